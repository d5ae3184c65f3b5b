//! Adam optimizer with bias correction.

use crate::nn::{NnError, ParamSet};
use crate::tensor::{Scalar, Tensor};

/// Per-parameter first/second moment estimates plus hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState<T: Scalar = f32> {
    pub step: u64,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    m: ParamSet<T>,
    v: ParamSet<T>,
}

impl<T: Scalar> AdamState<T> {
    /// Fresh state with zero moments mirroring `params`.
    pub fn new(params: &ParamSet<T>, lr: T) -> Self {
        Self {
            step: 0,
            lr,
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            eps: T::from_f64(1e-8),
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }
}

/// One Adam update, in place. Rejects non-finite gradients, naming the
/// offending parameter.
pub fn adam_step<T: Scalar>(
    params: &mut ParamSet<T>,
    grads: &ParamSet<T>,
    state: &mut AdamState<T>,
) -> Result<(), NnError> {
    assert_eq!(params.len(), grads.len(), "param/grad set size mismatch");
    if let Some(name) = grads.first_non_finite() {
        return Err(NnError::NonFiniteGradient(name.to_string()));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = T::one() - state.beta1.powi(t);
    let bc2 = T::one() - state.beta2.powi(t);
    let one = T::one();
    for i in 0..params.len() {
        let g: &Tensor<T> = grads.entry(i).1;
        let m = state.m.entry_mut(i);
        for (mv, &gv) in m.data_mut().iter_mut().zip(g.data()) {
            *mv = state.beta1 * *mv + (one - state.beta1) * gv;
        }
        let v = state.v.entry_mut(i);
        for (vv, &gv) in v.data_mut().iter_mut().zip(g.data()) {
            *vv = state.beta2 * *vv + (one - state.beta2) * gv * gv;
        }
        let m = state.m.entry(i).1;
        let v = state.v.entry(i).1;
        let p = params.entry_mut(i);
        for ((pv, &mv), &vv) in p.data_mut().iter_mut().zip(m.data()).zip(v.data()) {
            let m_hat = mv / bc1;
            let v_hat = vv / bc2;
            *pv = *pv - state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}
