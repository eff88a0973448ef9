use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp, NnError};
use crate::scalar::Scalar;

/// Adam moments and hyperparameters for one network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step: u64,
    m: Vec<(Vec<T>, Vec<T>)>,
    v: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(mlp: &Mlp<T>, lr: T) -> Self {
        let zeros = Gradients::zeros_like(mlp).layers;
        Self { lr, beta1: T::of(0.9), beta2: T::of(0.999), eps: T::of(1e-8), step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn moments(&self) -> (&[(Vec<T>, Vec<T>)], &[(Vec<T>, Vec<T>)]) {
        (&self.m, &self.v)
    }

    pub(crate) fn from_parts(lr: T, beta1: T, beta2: T, eps: T, step: u64, m: Vec<(Vec<T>, Vec<T>)>, v: Vec<(Vec<T>, Vec<T>)>) -> Self {
        Self { lr, beta1, beta2, eps, step, m, v }
    }
}

/// One bias-corrected Adam update of `mlp` in place. `grads` are gradients
/// of the loss to be minimised.
pub fn adam_step<T: Scalar>(mlp: &mut Mlp<T>, adam: &mut AdamState<T>, grads: &Gradients<T>) -> Result<(), NnError> {
    let layers = mlp.layers();
    if grads.layers.len() != layers.len()
        || adam.m.len() != layers.len()
        || grads.layers.iter().zip(layers).any(|((w, b), l)| w.len() != l.weights.len() || b.len() != l.bias.len())
    {
        return Err(NnError::Architecture("gradient / optimizer shape does not match network".into()));
    }
    adam.step += 1;
    let t = adam.step as i32;
    let bc1 = T::one() - adam.beta1.powi(t);
    let bc2 = T::one() - adam.beta2.powi(t);
    let (b1, b2, lr, eps) = (adam.beta1, adam.beta2, adam.lr, adam.eps);
    let update = |p: &mut [T], g: &[T], m: &mut [T], v: &mut [T]| {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (T::one() - b1) * g[i];
            v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };
    for (li, layer) in mlp.layers_mut().iter_mut().enumerate() {
        let (gw, gb) = &grads.layers[li];
        let (mw, mb) = &mut adam.m[li];
        let (vw, vb) = &mut adam.v[li];
        update(&mut layer.weights, gw, mw, vw);
        update(&mut layer.bias, gb, mb, vb);
    }
    Ok(())
}
