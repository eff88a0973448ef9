//! The h1 (HO cost), h2 (class) and h3 (RLF anomaly) predictors.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{Metrics, RlfClass, Tier, TputClass};
use crate::nn::{adam_step, symexp, symlog, softmax_in_place, Activation, AdamState, Matrix, Mlp, MlpCheckpoint};
use crate::params::{CIO_BOX_DB, TTT_BOX_MS};

use super::CpdmError;

pub const PREDICTOR_HIDDEN: [usize; 3] = [32, 16, 8];
/// Cap on the anomaly class weight in the h3 loss.
const MAX_CLASS_WEIGHT: f64 = 20.0;

/// One supervised example: state, candidate action and the metrics measured
/// in the following window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub lr: f64,
    pub batch_size: usize,
    /// Gradient steps per network on the first fit.
    pub initial_steps: usize,
    /// Gradient steps per network on each warm-started refit.
    pub refit_steps: usize,
    pub validation_fraction: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self { lr: 0.002, batch_size: 64, initial_steps: 3000, refit_steps: 1000, validation_fraction: 0.2 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictorMetrics {
    pub train_samples: usize,
    pub validation_samples: usize,
    pub h1_mae: f64,
    pub h2_precision: f64,
    pub h2_recall: f64,
    pub h3_precision: f64,
    pub h3_recall: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub ho_cost: f64,
    /// Probabilities of good, normal, poor.
    pub class_probs: [f64; 3],
    pub rlf_normal_prob: f64,
    /// Labels the window normal when `rlf_normal_prob` reaches this value.
    pub rlf_cut: f64,
}

impl Prediction {
    pub fn class(&self) -> TputClass {
        let mut best = 0;
        for i in 1..3 {
            if self.class_probs[i] > self.class_probs[best] {
                best = i;
            }
        }
        TputClass::from_index(best)
    }

    pub fn rlf(&self) -> RlfClass {
        if self.rlf_normal_prob >= self.rlf_cut {
            RlfClass::Normal
        } else {
            RlfClass::Anomalous
        }
    }
}

/// Maps a TTT in ms to `[-1, 1]` on a log scale.
pub fn encode_ttt(ms: f64) -> f64 {
    let (lo, hi) = (TTT_BOX_MS.0.ln(), TTT_BOX_MS.1.ln());
    2.0 * (ms.max(TTT_BOX_MS.0).ln() - lo) / (hi - lo) - 1.0
}

pub fn encode_cio(db: f64) -> f64 {
    2.0 * (db - CIO_BOX_DB.0) / (CIO_BOX_DB.1 - CIO_BOX_DB.0) - 1.0
}

/// Network input: symlog of the state followed by the encoded action.
pub fn encode_input(tier: Tier, state: &[f64], action: &[f64], out: &mut Vec<f64>) {
    out.extend(state.iter().map(|&x| symlog(x)));
    match tier {
        Tier::Ca => out.push(encode_ttt(action[0])),
        Tier::Cpa => out.extend(action.iter().map(|&q| encode_cio(q))),
        Tier::Baseline => {
            out.push(encode_ttt(action[0]));
            out.extend(action[1..].iter().map(|&q| encode_cio(q)));
        }
    }
}

#[derive(Clone, Debug)]
pub struct PredictorSet {
    tier: Tier,
    state_dim: usize,
    action_dim: usize,
    config: PredictorConfig,
    h1: Mlp<f64>,
    h2: Mlp<f64>,
    h3: Mlp<f64>,
    adam: [AdamState<f64>; 3],
    /// Set when the anomaly labels seen so far are all one class.
    h3_constant: Option<RlfClass>,
    /// Log of the anomaly class weight used in the h3 loss.
    anomaly_log_weight: f64,
    /// Input standardization fitted on the first training set.
    shift: Vec<f64>,
    scale: Vec<f64>,
    fitted: bool,
    rng: ChaCha8Rng,
}

/// Serializable form of a [`PredictorSet`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorCheckpoint {
    pub tier: Tier,
    pub state_dim: usize,
    pub action_dim: usize,
    pub config: PredictorConfig,
    pub nets: Vec<MlpCheckpoint>,
    pub h3_constant: Option<RlfClass>,
    #[serde(default)]
    pub anomaly_log_weight: f64,
    #[serde(default)]
    pub shift: Vec<f64>,
    #[serde(default)]
    pub scale: Vec<f64>,
    pub fitted: bool,
    pub rng: ChaCha8Rng,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Macro-averaged precision and recall over the classes present in either
/// the truth or the predictions.
pub fn macro_precision_recall(truth: &[usize], pred: &[usize], classes: usize) -> (f64, f64) {
    let mut tp = vec![0usize; classes];
    let mut n_pred = vec![0usize; classes];
    let mut n_true = vec![0usize; classes];
    for (&t, &p) in truth.iter().zip(pred) {
        n_true[t] += 1;
        n_pred[p] += 1;
        if t == p {
            tp[t] += 1;
        }
    }
    let seen: Vec<usize> = (0..classes).filter(|&c| n_true[c] > 0 || n_pred[c] > 0).collect();
    if seen.is_empty() {
        return (0.0, 0.0);
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let p = seen.iter().map(|&c| ratio(tp[c], n_pred[c])).sum::<f64>() / seen.len() as f64;
    let r = seen.iter().map(|&c| ratio(tp[c], n_true[c])).sum::<f64>() / seen.len() as f64;
    (p, r)
}

impl PredictorSet {
    pub fn new(tier: Tier, state_dim: usize, action_dim: usize, config: PredictorConfig, seed: u64) -> Result<Self, CpdmError> {
        let input = state_dim + action_dim;
        let sizes = |out: usize| [input, PREDICTOR_HIDDEN[0], PREDICTOR_HIDDEN[1], PREDICTOR_HIDDEN[2], out];
        let h1 = Mlp::init(&sizes(1), Activation::Linear, seed)?;
        let h2 = Mlp::init(&sizes(3), Activation::Linear, seed.wrapping_add(1))?;
        let h3 = Mlp::init(&sizes(2), Activation::Linear, seed.wrapping_add(2))?;
        let adam = [AdamState::new(&h1, config.lr), AdamState::new(&h2, config.lr), AdamState::new(&h3, config.lr)];
        Ok(Self {
            tier,
            state_dim,
            action_dim,
            config,
            h1,
            h2,
            h3,
            adam,
            h3_constant: None,
            anomaly_log_weight: 0.0,
            shift: Vec::new(),
            scale: Vec::new(),
            fitted: false,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x0DDB_A11),
        })
    }

    pub fn tier(&self) -> Tier {
        self.tier
    }

    pub fn input_dim(&self) -> usize {
        self.state_dim + self.action_dim
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    fn check(&self, state: &[f64], action: &[f64]) -> Result<(), CpdmError> {
        if state.len() != self.state_dim || action.len() != self.action_dim {
            return Err(CpdmError::Dimension { expected: self.input_dim(), got: state.len() + action.len() });
        }
        Ok(())
    }

    fn encode_batch<'a>(&self, rows: impl Iterator<Item = (&'a [f64], &'a [f64])>) -> Result<Matrix<f64>, CpdmError> {
        let mut data = Vec::new();
        let mut n = 0;
        for (s, a) in rows {
            self.check(s, a)?;
            let start = data.len();
            encode_input(self.tier, s, a, &mut data);
            for (x, (m, d)) in data[start..].iter_mut().zip(self.shift.iter().zip(&self.scale)) {
                *x = (*x - m) / d;
            }
            n += 1;
        }
        Ok(Matrix::from_vec(n, self.input_dim(), data)?)
    }

    /// Predictions for one state and a batch of candidate actions.
    pub fn predict(&self, state: &[f64], actions: &[Vec<f64>]) -> Result<Vec<Prediction>, CpdmError> {
        let x = self.encode_batch(actions.iter().map(|a| (state, a.as_slice())))?;
        self.predict_encoded(&x)
    }

    fn predict_encoded(&self, x: &Matrix<f64>) -> Result<Vec<Prediction>, CpdmError> {
        let o1 = self.h1.forward(x)?;
        let o2 = self.h2.forward(x)?;
        let o3 = self.h3.forward(x)?;
        Ok((0..x.rows())
            .map(|r| {
                let mut c = [o2.get(r, 0), o2.get(r, 1), o2.get(r, 2)];
                softmax_in_place(&mut c);
                let rlf_normal_prob = match self.h3_constant {
                    Some(RlfClass::Normal) => 1.0,
                    Some(RlfClass::Anomalous) => 0.0,
                    None => {
                        // undo the class weighting of the loss
                        let mut z = [o3.get(r, 0), o3.get(r, 1) - self.anomaly_log_weight];
                        softmax_in_place(&mut z);
                        z[0]
                    }
                };
                let rlf_cut = 1.0 / (1.0 + self.anomaly_log_weight.exp());
                Prediction { ho_cost: symexp(o1.get(r, 0)).clamp(-1.0, 1.0), class_probs: c, rlf_normal_prob, rlf_cut }
            })
            .collect())
    }

    /// Fits on the chronologically first part of `data` and reports metrics
    /// on the rest. The first call runs `initial_steps`, later calls warm
    /// start and run `refit_steps`.
    pub fn fit(&mut self, data: &[Sample]) -> Result<PredictorMetrics, CpdmError> {
        let n_val = ((data.len() as f64) * self.config.validation_fraction).round() as usize;
        let n_train = data.len() - n_val;
        if n_train < self.config.batch_size {
            return Err(CpdmError::InsufficientData(format!("{n_train} training samples, batch size {}", self.config.batch_size)));
        }
        let (train, val) = data.split_at(n_train);
        let steps = if self.fitted { self.config.refit_steps } else { self.config.initial_steps };
        self.train(train, steps)?;
        self.fitted = true;
        let mut m = if val.is_empty() { PredictorMetrics::default() } else { self.evaluate(val)? };
        m.train_samples = n_train;
        m.validation_samples = n_val;
        Ok(m)
    }

    /// Runs `steps` minibatch Adam steps on every head.
    pub fn train(&mut self, data: &[Sample], steps: usize) -> Result<(), CpdmError> {
        if self.shift.is_empty() {
            self.fit_standardization(data);
        }
        let x_all = self.encode_batch(data.iter().map(|s| (s.state.as_slice(), s.action.as_slice())))?;
        let anomalies = data.iter().filter(|s| s.metrics.rlf == RlfClass::Anomalous).count();
        self.h3_constant = match anomalies {
            0 => Some(RlfClass::Normal),
            a if a == data.len() => Some(RlfClass::Anomalous),
            _ => None,
        };
        if self.h3_constant.is_some() {
            log::warn!("{:?} predictors: single-class anomaly labels, h3 is constant", self.tier);
        }
        let w_anom = ((data.len() - anomalies) as f64 / anomalies.max(1) as f64).clamp(1.0, MAX_CLASS_WEIGHT);
        self.anomaly_log_weight = w_anom.ln();
        let batch = self.config.batch_size.min(data.len());
        let width = self.input_dim();
        for _ in 0..steps {
            let idx = sample(&mut self.rng, data.len(), batch);
            let mut xb = Vec::with_capacity(batch * width);
            for i in idx.iter() {
                xb.extend_from_slice(x_all.row(i));
            }
            let xb = Matrix::from_vec(batch, width, xb)?;
            let bn = batch as f64;

            let c1 = self.h1.forward_cached(&xb)?;
            let mut g1 = Matrix::zeros(batch, 1);
            for (r, i) in idx.iter().enumerate() {
                g1.set(r, 0, 2.0 * (c1.output().get(r, 0) - symlog(data[i].metrics.ho_cost)) / bn);
            }
            let (grads, _) = self.h1.backward(&c1, &g1)?;
            adam_step(&mut self.h1, &mut self.adam[0], &grads)?;

            let c2 = self.h2.forward_cached(&xb)?;
            let mut g2 = Matrix::zeros(batch, 3);
            for (r, i) in idx.iter().enumerate() {
                let mut p = [c2.output().get(r, 0), c2.output().get(r, 1), c2.output().get(r, 2)];
                softmax_in_place(&mut p);
                p[data[i].metrics.class.index()] -= 1.0;
                for (k, v) in p.iter().enumerate() {
                    g2.set(r, k, v / bn);
                }
            }
            let (grads, _) = self.h2.backward(&c2, &g2)?;
            adam_step(&mut self.h2, &mut self.adam[1], &grads)?;

            if self.h3_constant.is_none() {
                let c3 = self.h3.forward_cached(&xb)?;
                let mut g3 = Matrix::zeros(batch, 2);
                for (r, i) in idx.iter().enumerate() {
                    let mut p = [c3.output().get(r, 0), c3.output().get(r, 1)];
                    softmax_in_place(&mut p);
                    let (k, w) = match data[i].metrics.rlf {
                        RlfClass::Normal => (0, 1.0),
                        RlfClass::Anomalous => (1, w_anom),
                    };
                    p[k] -= 1.0;
                    g3.set(r, 0, w * p[0] / bn);
                    g3.set(r, 1, w * p[1] / bn);
                }
                let (grads, _) = self.h3.backward(&c3, &g3)?;
                adam_step(&mut self.h3, &mut self.adam[2], &grads)?;
            }
        }
        if !(self.h1.all_finite() && self.h2.all_finite() && self.h3.all_finite()) {
            return Err(CpdmError::Diverged);
        }
        Ok(())
    }

    fn fit_standardization(&mut self, data: &[Sample]) {
        let width = self.input_dim();
        let mut row = Vec::with_capacity(width);
        let (mut sum, mut sq) = (vec![0.0; width], vec![0.0; width]);
        for s in data {
            row.clear();
            encode_input(self.tier, &s.state, &s.action, &mut row);
            for (k, x) in row.iter().enumerate() {
                sum[k] += x;
                sq[k] += x * x;
            }
        }
        let n = data.len().max(1) as f64;
        self.shift = sum.iter().map(|s| s / n).collect();
        self.scale = sq
            .iter()
            .zip(&self.shift)
            .map(|(q, m)| {
                let sd = (q / n - m * m).max(0.0).sqrt();
                if sd > 1e-9 { sd } else { 1.0 }
            })
            .collect();
    }

    /// MAE of h1 and macro precision/recall of h2 and h3 on `data`.
    pub fn evaluate(&self, data: &[Sample]) -> Result<PredictorMetrics, CpdmError> {
        if data.is_empty() {
            return Ok(PredictorMetrics::default());
        }
        let x = self.encode_batch(data.iter().map(|s| (s.state.as_slice(), s.action.as_slice())))?;
        let preds = self.predict_encoded(&x)?;
        let mae = preds.iter().zip(data).map(|(p, s)| (p.ho_cost - s.metrics.ho_cost).abs()).sum::<f64>() / data.len() as f64;
        let truth2: Vec<usize> = data.iter().map(|s| s.metrics.class.index()).collect();
        let pred2: Vec<usize> = preds.iter().map(|p| argmax(&p.class_probs)).collect();
        let code = |r: RlfClass| usize::from(r == RlfClass::Anomalous);
        let truth3: Vec<usize> = data.iter().map(|s| code(s.metrics.rlf)).collect();
        let pred3: Vec<usize> = preds.iter().map(|p| code(p.rlf())).collect();
        let (p2, r2) = macro_precision_recall(&truth2, &pred2, 3);
        let (p3, r3) = macro_precision_recall(&truth3, &pred3, 2);
        Ok(PredictorMetrics {
            train_samples: 0,
            validation_samples: data.len(),
            h1_mae: mae,
            h2_precision: p2,
            h2_recall: r2,
            h3_precision: p3,
            h3_recall: r3,
        })
    }

    pub fn checkpoint(&self) -> PredictorCheckpoint {
        PredictorCheckpoint {
            tier: self.tier,
            state_dim: self.state_dim,
            action_dim: self.action_dim,
            config: self.config.clone(),
            nets: vec![
                MlpCheckpoint::capture(&self.h1, Some(&self.adam[0])),
                MlpCheckpoint::capture(&self.h2, Some(&self.adam[1])),
                MlpCheckpoint::capture(&self.h3, Some(&self.adam[2])),
            ],
            h3_constant: self.h3_constant,
            anomaly_log_weight: self.anomaly_log_weight,
            shift: self.shift.clone(),
            scale: self.scale.clone(),
            fitted: self.fitted,
            rng: self.rng.clone(),
        }
    }

    pub fn from_checkpoint(c: &PredictorCheckpoint) -> Result<Self, CpdmError> {
        if c.nets.len() != 3 {
            return Err(CpdmError::Checkpoint(format!("expected 3 networks, found {}", c.nets.len())));
        }
        let mut nets = Vec::with_capacity(3);
        let mut adams = Vec::with_capacity(3);
        for n in &c.nets {
            let (mlp, adam) = n.restore::<f64>()?;
            if mlp.input_size() != c.state_dim + c.action_dim {
                return Err(CpdmError::Checkpoint("network input width does not match the tier".into()));
            }
            adams.push(adam.unwrap_or_else(|| AdamState::new(&mlp, c.config.lr)));
            nets.push(mlp);
        }
        let h3 = nets.pop().expect("three nets");
        let h2 = nets.pop().expect("three nets");
        let h1 = nets.pop().expect("three nets");
        let a3 = adams.pop().expect("three nets");
        let a2 = adams.pop().expect("three nets");
        let a1 = adams.pop().expect("three nets");
        Ok(Self {
            tier: c.tier,
            state_dim: c.state_dim,
            action_dim: c.action_dim,
            config: c.config.clone(),
            h1,
            h2,
            h3,
            adam: [a1, a2, a3],
            h3_constant: c.h3_constant,
            anomaly_log_weight: c.anomaly_log_weight,
            shift: c.shift.clone(),
            scale: c.scale.clone(),
            fitted: c.fitted,
            rng: c.rng.clone(),
        })
    }

    pub fn param_count(&self) -> usize {
        self.h1.param_count() + self.h2.param_count() + self.h3.param_count()
    }
}
