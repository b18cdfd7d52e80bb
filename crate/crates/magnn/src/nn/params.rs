//! Named trainable parameters: values, gradient buffers, Adam moments, and
//! checkpoint IO (JSON manifest + flat little-endian f64 blob).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::matrix::DenseMatrix;
use crate::util::Fnv64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Adam moment decay rates used across the crate. The second moment forgets
/// fast enough that the large-logit transient right after initialization
/// (sum pooling over all nodes) does not throttle later steps.
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.99;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug)]
pub enum Init {
    /// Uniform Glorot-style fan-based scaling.
    Glorot,
    /// Uniform in `(-bound, bound)`; used for biases with a fan-in bound.
    /// Biases must not start at zero: a bias-free ReLU net is positively
    /// homogeneous, which collapses the random-parameter separation
    /// properties the expressivity tests rely on.
    Uniform(f64),
    Zeros,
}

#[derive(Clone, Debug)]
struct Entry {
    name: String,
    value: DenseMatrix,
    grad: DenseMatrix,
    m1: DenseMatrix,
    m2: DenseMatrix,
}

/// All trainable state of one model. Parameters are registered once, in a
/// deterministic order, and addressed by [`ParamId`] afterwards.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    index: BTreeMap<String, usize>,
    adam_steps: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        init: Init,
        rng: &mut impl Rng,
    ) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::InvalidArgument(format!(
                "parameter {name} registered twice"
            )));
        }
        let value = match init {
            Init::Zeros => DenseMatrix::zeros(rows, cols),
            Init::Glorot => {
                let bound = (6.0 / (rows + cols) as f64).sqrt();
                DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound))
            }
            Init::Uniform(bound) => {
                DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound))
            }
        };
        let id = ParamId(self.entries.len());
        self.index.insert(name.to_string(), id.0);
        self.entries.push(Entry {
            name: name.to_string(),
            value,
            grad: DenseMatrix::zeros(rows, cols),
            m1: DenseMatrix::zeros(rows, cols),
            m2: DenseMatrix::zeros(rows, cols),
        });
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.index
            .get(name)
            .map(|&i| ParamId(i))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter {name}")))
    }

    pub fn value(&self, id: ParamId) -> &DenseMatrix {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut DenseMatrix {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &DenseMatrix {
        &self.entries[id.0].grad
    }

    pub fn set_grad_for_test(&mut self, id: ParamId, grad: DenseMatrix) {
        assert_eq!(self.entries[id.0].grad.shape(), grad.shape());
        self.entries[id.0].grad = grad;
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, grad: &DenseMatrix) {
        self.entries[id.0].grad.add_assign(grad);
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
    }

    pub fn num_tensors(&self) -> usize {
        self.entries.len()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.data().len()).sum()
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn adam_steps(&self) -> u64 {
        self.adam_steps
    }

    /// One Adam update from the current gradient buffers. Moments persist
    /// across steps; the bias correction uses the per-store step counter.
    pub fn adam_step(&mut self, lr: f64, beta1: f64, beta2: f64, eps: f64) {
        self.adam_steps += 1;
        let t = self.adam_steps as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for e in &mut self.entries {
            let g = e.grad.data();
            let m1 = e.m1.data_mut();
            for (m, &gi) in m1.iter_mut().zip(g) {
                *m = beta1 * *m + (1.0 - beta1) * gi;
            }
            let m2 = e.m2.data_mut();
            for (v, &gi) in m2.iter_mut().zip(g) {
                *v = beta2 * *v + (1.0 - beta2) * gi * gi;
            }
            let value = e.value.data_mut();
            for i in 0..value.len() {
                let mhat = e.m1.data()[i] / c1;
                let vhat = e.m2.data()[i] / c2;
                value[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }

    /// Copies parameter values (not moments, not gradients) from a
    /// shape-congruent store. Used for target-network synchronization.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if self.entries.len() != other.entries.len() {
            return Err(Error::Shape("stores have different parameter counts".into()));
        }
        for (dst, src) in self.entries.iter_mut().zip(&other.entries) {
            if dst.value.shape() != src.value.shape() {
                return Err(Error::Shape(format!(
                    "parameter {} shape mismatch",
                    dst.name
                )));
            }
            dst.value = src.value.clone();
        }
        Ok(())
    }

    /// Deterministic checksum of all parameter values, in registration order.
    pub fn checksum(&self) -> u64 {
        let mut h = Fnv64::new();
        for e in &self.entries {
            h.write(e.name.as_bytes());
            e.value.hash_into(&mut h);
        }
        h.finish()
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestParam {
    name: String,
    rows: usize,
    cols: usize,
    /// Byte offset into the parameter blob.
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    adam_steps: u64,
    params: Vec<ManifestParam>,
    extra: serde_json::Value,
}

const MANIFEST_FORMAT: &str = "magnn-checkpoint-v1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOB_FILE: &str = "params.bin";

impl ParamStore {
    /// Writes `manifest.json` and `params.bin` into `dir`. `extra` carries
    /// model-level configuration needed to rebuild the surrounding model.
    pub fn save(&self, dir: &Path, extra: serde_json::Value) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut params = Vec::new();
        let mut blob: Vec<u8> = Vec::new();
        for e in &self.entries {
            params.push(ManifestParam {
                name: e.name.clone(),
                rows: e.value.rows(),
                cols: e.value.cols(),
                offset: blob.len() as u64,
            });
            for &v in e.value.data() {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        let manifest = Manifest {
            format: MANIFEST_FORMAT.to_string(),
            adam_steps: self.adam_steps,
            params,
            extra,
        };
        let mut mf = std::fs::File::create(dir.join(MANIFEST_FILE))?;
        mf.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        std::fs::File::create(dir.join(BLOB_FILE))?.write_all(&blob)?;
        Ok(())
    }

    /// Reads back the `extra` value of a checkpoint without touching params.
    pub fn read_extra(dir: &Path) -> Result<serde_json::Value> {
        let manifest = read_manifest(dir)?;
        Ok(manifest.extra)
    }

    /// Loads values from a checkpoint into this store. Every parameter must
    /// already be registered with a matching name and shape.
    pub fn load_values(&mut self, dir: &Path) -> Result<()> {
        let manifest = read_manifest(dir)?;
        if manifest.params.len() != self.entries.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, model expects {}",
                manifest.params.len(),
                self.entries.len()
            )));
        }
        let mut blob = Vec::new();
        std::fs::File::open(dir.join(BLOB_FILE))?.read_to_end(&mut blob)?;
        for (entry, mp) in self.entries.iter_mut().zip(&manifest.params) {
            if entry.name != mp.name {
                return Err(Error::Checkpoint(format!(
                    "tensor name mismatch: checkpoint {} vs model {}",
                    mp.name, entry.name
                )));
            }
            if entry.value.shape() != (mp.rows, mp.cols) {
                return Err(Error::Checkpoint(format!(
                    "tensor {} shape mismatch: checkpoint {}x{} vs model {}x{}",
                    mp.name,
                    mp.rows,
                    mp.cols,
                    entry.value.rows(),
                    entry.value.cols()
                )));
            }
            let count = mp.rows * mp.cols;
            let start = mp.offset as usize;
            let end = start + count * 8;
            if end > blob.len() {
                return Err(Error::Checkpoint(format!(
                    "tensor {} extends past blob end",
                    mp.name
                )));
            }
            let data = entry.value.data_mut();
            for (i, chunk) in blob[start..end].chunks_exact(8).enumerate() {
                data[i] = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
            }
        }
        self.adam_steps = manifest.adam_steps;
        Ok(())
    }
}

fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint format {}",
            manifest.format
        )));
    }
    Ok(manifest)
}
