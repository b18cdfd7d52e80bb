//! Central finite-difference gradient checking.
//!
//! Used by the test suites as the independent oracle for the tape's backward
//! pass: it only ever calls user-supplied forward evaluations, never the
//! reverse-mode machinery it is checking.

use crate::nn::matrix::DenseMatrix;
use crate::nn::params::{ParamId, ParamStore};

/// Relative error with a unit floor, so near-zero gradient pairs compare by
/// absolute difference.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Compares the gradients currently held in `store` (from one backward pass
/// of `loss_fn` at the current parameter values) against central finite
/// differences with step `h`. Returns the maximum elementwise relative error.
///
/// `loss_fn` must be a pure forward evaluation.
pub fn max_fd_error(
    store: &mut ParamStore,
    h: f64,
    mut loss_fn: impl FnMut(&ParamStore) -> f64,
) -> f64 {
    let ids: Vec<ParamId> = store.param_ids().collect();
    let analytic: Vec<DenseMatrix> = ids.iter().map(|&id| store.grad(id).clone()).collect();
    let mut max_err: f64 = 0.0;
    for (slot, &id) in ids.iter().enumerate() {
        let (rows, cols) = store.value(id).shape();
        for r in 0..rows {
            for c in 0..cols {
                let orig = store.value(id).get(r, c);
                store.value_mut(id).set(r, c, orig + h);
                let up = loss_fn(store);
                store.value_mut(id).set(r, c, orig - h);
                let down = loss_fn(store);
                store.value_mut(id).set(r, c, orig);
                let fd = (up - down) / (2.0 * h);
                max_err = max_err.max(relative_error(analytic[slot].get(r, c), fd));
            }
        }
    }
    max_err
}
