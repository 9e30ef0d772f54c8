//! Adam with bias correction and gradient-side L2 weight decay.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates for a list of parameters.
#[derive(Clone, Debug)]
pub struct AdamState<T: Scalar = f32> {
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<'p>(params: impl IntoIterator<Item = &'p Tensor<T>>) -> Self {
        let first: Vec<_> = params
            .into_iter()
            .map(|p| Tensor::zeros(p.shape()))
            .collect();
        Self {
            second: first.clone(),
            first,
            step: 0,
        }
    }

    /// Number of completed steps.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor<T>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor<T>] {
        &self.second
    }
}

/// Applies one Adam update in place.
///
/// `l2 · θ` is added to each gradient before the moment updates. If any
/// gradient entry is non-finite nothing is modified.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    lr: f64,
    l2: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::Contract(format!(
            "adam_step got {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::Config(format!(
            "learning rate must be non-negative, got {lr}"
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.first[i].shape() {
            return Err(Error::Dimension {
                op: "adam_step",
                left: p.shape().to_vec(),
                right: g.shape().to_vec(),
            });
        }
        if !g.is_finite() {
            return Err(Error::NonFinite {
                op: format!("adam_step gradient #{i}"),
            });
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let b1 = T::from_f64_lossy(BETA1);
    let b2 = T::from_f64_lossy(BETA2);
    let eps = T::from_f64_lossy(EPSILON);
    let decay = T::from_f64_lossy(l2);
    let lr = T::from_f64_lossy(lr);
    let bias1 = T::one() - b1.powi(t);
    let bias2 = T::one() - b2.powi(t);
    let one = T::one();

    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.first[i].data_mut();
        let v = state.second[i].data_mut();
        for (((theta, &grad), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
            let grad = grad + decay * *theta;
            *m = b1 * *m + (one - b1) * grad;
            *v = b2 * *v + (one - b2) * grad * grad;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *theta = *theta - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
