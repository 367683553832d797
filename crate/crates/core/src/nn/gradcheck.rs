//! Finite-difference gradient verification.

use super::params::{Gradients, ParameterStore};

/// Step used for central differences.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Relative error of analytic against central-difference gradients.
///
/// `f` evaluates the scalar objective at a store and, when given a buffer,
/// adds its backward-pass gradients to it. The error is
/// `‖a − n‖ / max(1e-8, ‖a‖ + ‖n‖)` with Euclidean norms over all parameter
/// entries taken together.
pub fn grad_check<F>(store: &ParameterStore, f: F) -> f64
where
    F: Fn(&ParameterStore, Option<&mut Gradients>) -> f64,
{
    let mut analytic = Gradients::zeros_like(store);
    f(store, Some(&mut analytic));
    let mut work = store.clone();
    let (mut diff2, mut a2, mut n2) = (0.0, 0.0, 0.0);
    for id in store.ids() {
        let a = analytic.get(id);
        for k in 0..store.value(id).len() {
            let orig = store.value(id).as_slice().expect("contiguous")[k];
            work.value_mut(id).as_slice_mut().expect("contiguous")[k] = orig + GRAD_CHECK_STEP;
            let up = f(&work, None);
            work.value_mut(id).as_slice_mut().expect("contiguous")[k] = orig - GRAD_CHECK_STEP;
            let down = f(&work, None);
            work.value_mut(id).as_slice_mut().expect("contiguous")[k] = orig;
            let n = (up - down) / (2.0 * GRAD_CHECK_STEP);
            let av = a.as_slice().expect("contiguous")[k];
            diff2 += (av - n) * (av - n);
            a2 += av * av;
            n2 += n * n;
        }
    }
    diff2.sqrt() / (a2.sqrt() + n2.sqrt()).max(1e-8)
}
