//! Portable JSON checkpoints: layer sizes, activation tags, flat parameter
//! arrays (weights row-major, then bias, per layer) and optional Adam state.

use serde::{Deserialize, Serialize};

use super::{Activation, AdamState, Dense, Mlp, NnError};
use crate::scalar::Scalar;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamCheckpoint {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpCheckpoint {
    pub schema_version: u32,
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub params: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam: Option<AdamCheckpoint>,
}

fn flatten<T: Scalar>(parts: &[(Vec<T>, Vec<T>)]) -> Vec<Vec<f64>> {
    parts.iter().map(|(w, b)| w.iter().chain(b).map(|x| x.as_f64()).collect()).collect()
}

fn split<T: Scalar>(flat: &[Vec<f64>], sizes: &[usize]) -> Result<Vec<(Vec<T>, Vec<T>)>, NnError> {
    if flat.len() + 1 != sizes.len() {
        return Err(NnError::Checkpoint("layer count mismatch".into()));
    }
    flat.iter()
        .enumerate()
        .map(|(i, p)| {
            let nw = sizes[i] * sizes[i + 1];
            if p.len() != nw + sizes[i + 1] {
                return Err(NnError::Checkpoint(format!("layer {i}: expected {} values, got {}", nw + sizes[i + 1], p.len())));
            }
            Ok((p[..nw].iter().map(|&x| T::of(x)).collect(), p[nw..].iter().map(|&x| T::of(x)).collect()))
        })
        .collect()
}

impl MlpCheckpoint {
    pub fn capture<T: Scalar>(mlp: &Mlp<T>, adam: Option<&AdamState<T>>) -> Self {
        let layers: Vec<_> = mlp.layers().iter().map(|l| (l.weights.clone(), l.bias.clone())).collect();
        Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            layer_sizes: mlp.layer_sizes(),
            activations: mlp.layers().iter().map(|l| l.activation).collect(),
            params: flatten(&layers),
            adam: adam.map(|a| {
                let (m, v) = a.moments();
                AdamCheckpoint {
                    lr: a.lr.as_f64(),
                    beta1: a.beta1.as_f64(),
                    beta2: a.beta2.as_f64(),
                    eps: a.eps.as_f64(),
                    step: a.step,
                    m: flatten(m),
                    v: flatten(v),
                }
            }),
        }
    }

    pub fn restore<T: Scalar>(&self) -> Result<(Mlp<T>, Option<AdamState<T>>), NnError> {
        if self.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported schema version {}", self.schema_version)));
        }
        if self.activations.len() + 1 != self.layer_sizes.len() {
            return Err(NnError::Checkpoint("activation count mismatch".into()));
        }
        let parts = split::<T>(&self.params, &self.layer_sizes)?;
        let layers = parts
            .into_iter()
            .enumerate()
            .map(|(i, (weights, bias))| Dense {
                inputs: self.layer_sizes[i],
                outputs: self.layer_sizes[i + 1],
                weights,
                bias,
                activation: self.activations[i],
            })
            .collect();
        let mlp = Mlp::from_layers(layers)?;
        let adam = match &self.adam {
            None => None,
            Some(a) => Some(AdamState::from_parts(
                T::of(a.lr),
                T::of(a.beta1),
                T::of(a.beta2),
                T::of(a.eps),
                a.step,
                split(&a.m, &self.layer_sizes)?,
                split(&a.v, &self.layer_sizes)?,
            )),
        };
        Ok((mlp, adam))
    }

    pub fn to_json(&self) -> Result<String, NnError> {
        serde_json::to_string(self).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, NnError> {
        serde_json::from_str(s).map_err(|e| NnError::Checkpoint(e.to_string()))
    }
}
