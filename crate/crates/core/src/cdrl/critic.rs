//! Compositional and monolithic critics and their joint TD/prediction loss.

use serde::{Deserialize, Serialize};

use crate::agents::{Metrics, RlfClass};
use crate::nn::{adam_step, softmax_in_place, symlog, Activation, AdamState, ForwardCache, Gradients, Matrix, Mlp, MlpCheckpoint};

use super::CdrlError;

pub const CRITIC_HIDDEN: [usize; 3] = [32, 16, 8];
pub const AGGREGATOR_HIDDEN: [usize; 2] = [16, 8];
/// Output widths of the sub-critics: HO cost, class logits, anomaly logit.
pub const SUB_CRITIC_WIDTHS: [usize; 3] = [1, 3, 1];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticKind {
    Compositional,
    Monolithic,
}

/// Loss applied to the classification heads.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadLoss {
    #[default]
    CrossEntropy,
    /// L2 distance between predicted probabilities and the one-hot target.
    L2,
}

/// `Q = f(h_1(x), .., h_K(x))` for the compositional kind, `Q = f(x)` for
/// the monolithic one.
#[derive(Clone, Debug, PartialEq)]
pub struct Critic {
    kind: CriticKind,
    subs: Vec<Mlp<f64>>,
    aggregator: Mlp<f64>,
}

pub struct CriticForward {
    pub q: Vec<f64>,
    /// Concatenated sub-critic outputs, one row per sample.
    pub omegas: Option<Matrix<f64>>,
    sub_caches: Vec<ForwardCache<f64>>,
    agg_cache: ForwardCache<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticGrads {
    pub subs: Vec<Gradients<f64>>,
    pub aggregator: Gradients<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub td_loss: f64,
    pub prediction_loss: f64,
    /// Samples without measured metrics, left out of the prediction term.
    pub excluded: usize,
    pub grads: CriticGrads,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticOptimizer {
    subs: Vec<AdamState<f64>>,
    aggregator: AdamState<f64>,
}

impl Critic {
    pub fn new(kind: CriticKind, input_dim: usize, seed: u64) -> Result<Self, CdrlError> {
        let hidden = |inp: usize, out: usize| vec![inp, CRITIC_HIDDEN[0], CRITIC_HIDDEN[1], CRITIC_HIDDEN[2], out];
        match kind {
            CriticKind::Monolithic => Ok(Self { kind, subs: Vec::new(), aggregator: Mlp::init(&hidden(input_dim, 1), Activation::Linear, seed)? }),
            CriticKind::Compositional => {
                let subs = SUB_CRITIC_WIDTHS
                    .iter()
                    .enumerate()
                    .map(|(k, &w)| Mlp::init(&hidden(input_dim, w), Activation::Linear, seed.wrapping_add(1 + k as u64)))
                    .collect::<Result<Vec<_>, _>>()?;
                let width = SUB_CRITIC_WIDTHS.iter().sum();
                let aggregator = Mlp::init(&[width, AGGREGATOR_HIDDEN[0], AGGREGATOR_HIDDEN[1], 1], Activation::Linear, seed)?;
                Ok(Self { kind, subs, aggregator })
            }
        }
    }

    /// Assembles a compositional critic from explicit networks.
    pub fn from_parts(subs: Vec<Mlp<f64>>, aggregator: Mlp<f64>) -> Result<Self, CdrlError> {
        if subs.is_empty() {
            return Ok(Self { kind: CriticKind::Monolithic, subs, aggregator });
        }
        let input = subs[0].input_size();
        if subs.iter().any(|s| s.input_size() != input) {
            return Err(CdrlError::Dimension("sub-critics disagree on the input width".into()));
        }
        let width: usize = subs.iter().map(Mlp::output_size).sum();
        if aggregator.input_size() != width || aggregator.output_size() != 1 {
            return Err(CdrlError::Dimension(format!("aggregator must map {width} metrics to one value")));
        }
        Ok(Self { kind: CriticKind::Compositional, subs, aggregator })
    }

    pub fn kind(&self) -> CriticKind {
        self.kind
    }

    pub fn subs(&self) -> &[Mlp<f64>] {
        &self.subs
    }

    pub fn aggregator(&self) -> &Mlp<f64> {
        &self.aggregator
    }

    pub fn input_dim(&self) -> usize {
        self.subs.first().unwrap_or(&self.aggregator).input_size()
    }

    pub fn all_finite(&self) -> bool {
        self.aggregator.all_finite() && self.subs.iter().all(Mlp::all_finite)
    }

    pub fn forward(&self, x: &Matrix<f64>) -> Result<CriticForward, CdrlError> {
        if x.cols() != self.input_dim() {
            return Err(CdrlError::Dimension(format!("critic input width {} != {}", x.cols(), self.input_dim())));
        }
        if self.subs.is_empty() {
            let agg_cache = self.aggregator.forward_cached(x)?;
            let q = agg_cache.output().data().to_vec();
            return Ok(CriticForward { q, omegas: None, sub_caches: Vec::new(), agg_cache });
        }
        let sub_caches = self.subs.iter().map(|s| s.forward_cached(x)).collect::<Result<Vec<_>, _>>()?;
        let outs: Vec<&Matrix<f64>> = sub_caches.iter().map(ForwardCache::output).collect();
        let omegas = Matrix::hcat(&outs)?;
        let agg_cache = self.aggregator.forward_cached(&omegas)?;
        let q = agg_cache.output().data().to_vec();
        Ok(CriticForward { q, omegas: Some(omegas), sub_caches, agg_cache })
    }

    pub fn q_values(&self, x: &Matrix<f64>) -> Result<Vec<f64>, CdrlError> {
        Ok(self.forward(x)?.q)
    }

    /// Q of one input together with the sub-critic metrics.
    pub fn critic_q(&self, x: &[f64]) -> Result<(f64, Vec<f64>), CdrlError> {
        let f = self.forward(&Matrix::row_vector(x))?;
        Ok((f.q[0], f.omegas.map(Matrix::into_vec).unwrap_or_default()))
    }

    /// Backpropagates `dL/dQ` (one value per sample) plus optional direct
    /// gradients on the sub-critic outputs. Returns parameter gradients and
    /// `dL/dx`.
    fn backprop(
        &self,
        fwd: &CriticForward,
        grad_q: &[f64],
        grad_omega: Option<&Matrix<f64>>,
    ) -> Result<(CriticGrads, Matrix<f64>), CdrlError> {
        let gq = Matrix::from_vec(grad_q.len(), 1, grad_q.to_vec())?;
        let (agg_grads, mut d_omega) = self.aggregator.backward(&fwd.agg_cache, &gq)?;
        if self.subs.is_empty() {
            return Ok((CriticGrads { subs: Vec::new(), aggregator: agg_grads }, d_omega));
        }
        if let Some(g) = grad_omega {
            d_omega.data_mut().iter_mut().zip(g.data()).for_each(|(a, &b)| *a += b);
        }
        let mut dx = Matrix::zeros(grad_q.len(), self.input_dim());
        let mut subs = Vec::with_capacity(self.subs.len());
        let mut off = 0;
        for (s, cache) in self.subs.iter().zip(&fwd.sub_caches) {
            let w = s.output_size();
            let (g, dxs) = s.backward(cache, &d_omega.columns(off, w))?;
            dx.data_mut().iter_mut().zip(dxs.data()).for_each(|(a, &b)| *a += b);
            subs.push(g);
            off += w;
        }
        Ok((CriticGrads { subs, aggregator: agg_grads }, dx))
    }

    /// Gradient of `sum_i weight * Q(x_i)` with respect to the inputs.
    pub fn input_grad(&self, x: &Matrix<f64>, weight: f64) -> Result<Matrix<f64>, CdrlError> {
        let fwd = self.forward(x)?;
        Ok(self.backprop(&fwd, &vec![weight; x.rows()], None)?.1)
    }

    pub fn optimizer(&self, lr: f64) -> CriticOptimizer {
        CriticOptimizer { subs: self.subs.iter().map(|s| AdamState::new(s, lr)).collect(), aggregator: AdamState::new(&self.aggregator, lr) }
    }

    pub fn apply(&mut self, grads: &CriticGrads, opt: &mut CriticOptimizer) -> Result<(), CdrlError> {
        for ((s, g), a) in self.subs.iter_mut().zip(&grads.subs).zip(&mut opt.subs) {
            adam_step(s, a, g)?;
        }
        adam_step(&mut self.aggregator, &mut opt.aggregator, &grads.aggregator)?;
        Ok(())
    }

    pub fn soft_update(&mut self, online: &Critic, tau: f64) {
        for (t, o) in self.subs.iter_mut().zip(&online.subs) {
            t.soft_update(o, tau);
        }
        self.aggregator.soft_update(&online.aggregator, tau);
    }

    pub fn checkpoint(&self, opt: Option<&CriticOptimizer>) -> Vec<MlpCheckpoint> {
        let mut out: Vec<MlpCheckpoint> =
            self.subs.iter().enumerate().map(|(i, s)| MlpCheckpoint::capture(s, opt.map(|o| &o.subs[i]))).collect();
        out.push(MlpCheckpoint::capture(&self.aggregator, opt.map(|o| &o.aggregator)));
        out
    }

    pub fn restore(nets: &[MlpCheckpoint], lr: f64) -> Result<(Self, CriticOptimizer), CdrlError> {
        let (agg, subs) = nets.split_last().ok_or_else(|| CdrlError::Checkpoint("empty critic checkpoint".into()))?;
        let mut sub_nets = Vec::new();
        let mut sub_opts = Vec::new();
        for s in subs {
            let (m, a) = s.restore::<f64>()?;
            sub_opts.push(a.unwrap_or_else(|| AdamState::new(&m, lr)));
            sub_nets.push(m);
        }
        let (aggregator, a) = agg.restore::<f64>()?;
        let opt = CriticOptimizer { subs: sub_opts, aggregator: a.unwrap_or_else(|| AdamState::new(&aggregator, lr)) };
        Ok((Self::from_parts(sub_nets, aggregator)?, opt))
    }
}

impl CriticOptimizer {
    pub fn lr(&self) -> f64 {
        self.aggregator.lr
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-log sigmoid(z)` for `y = 1`, `-log(1 - sigmoid(z))` for `y = 0`.
fn bce(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Per-sample prediction loss of the three heads and its gradient with
/// respect to the concatenated head outputs `[h1, logits(3), logit]`.
pub fn head_losses(omega: &[f64], m: &Metrics, mode: HeadLoss) -> ([f64; 3], [f64; 5]) {
    let mut grad = [0.0; 5];
    let t1 = symlog(m.ho_cost);
    let d1 = omega[0] - t1;
    let l1 = d1.abs();
    grad[0] = if d1 > 0.0 { 1.0 } else if d1 < 0.0 { -1.0 } else { 0.0 };

    let mut p = [omega[1], omega[2], omega[3]];
    softmax_in_place(&mut p);
    let y = m.class.index();
    let y3 = if m.rlf == RlfClass::Anomalous { 1.0 } else { 0.0 };
    let s = sigmoid(omega[4]);
    let (l2, l3) = match mode {
        HeadLoss::CrossEntropy => {
            for k in 0..3 {
                grad[1 + k] = p[k] - if k == y { 1.0 } else { 0.0 };
            }
            grad[4] = s - y3;
            let lse = {
                let mx = omega[1].max(omega[2]).max(omega[3]);
                mx + ((omega[1] - mx).exp() + (omega[2] - mx).exp() + (omega[3] - mx).exp()).ln()
            };
            (lse - omega[1 + y], bce(omega[4], y3))
        }
        HeadLoss::L2 => {
            let e: Vec<f64> = (0..3).map(|k| p[k] - if k == y { 1.0 } else { 0.0 }).collect();
            let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                // d norm / d p = e / norm, then through the softmax Jacobian
                let u: Vec<f64> = e.iter().map(|v| v / norm).collect();
                let dot: f64 = u.iter().zip(&p).map(|(a, b)| a * b).sum();
                for k in 0..3 {
                    grad[1 + k] = p[k] * (u[k] - dot);
                }
            }
            let d3 = s - y3;
            grad[4] = if d3 > 0.0 { s * (1.0 - s) } else if d3 < 0.0 { -s * (1.0 - s) } else { 0.0 };
            (norm, d3.abs())
        }
    };
    ([l1, l2, l3], grad)
}

/// TD loss `mean((Q - g)^2)` plus, for compositional critics, the
/// prediction loss `(1/K) * mean_i sum_k loss_k`, with gradients for every
/// network. Samples without metrics only enter the TD term.
pub fn compositional_loss(
    critic: &Critic,
    x: &Matrix<f64>,
    targets: &[f64],
    metrics: &[Option<Metrics>],
    mode: HeadLoss,
) -> Result<LossOutput, CdrlError> {
    let b = x.rows();
    if targets.len() != b || metrics.len() != b || b == 0 {
        return Err(CdrlError::Dimension(format!("batch of {b} rows with {} targets and {} metrics", targets.len(), metrics.len())));
    }
    let fwd = critic.forward(x)?;
    let bn = b as f64;
    let td_loss = fwd.q.iter().zip(targets).map(|(q, g)| (q - g).powi(2)).sum::<f64>() / bn;
    let grad_q: Vec<f64> = fwd.q.iter().zip(targets).map(|(q, g)| 2.0 * (q - g) / bn).collect();

    let mut prediction_loss = 0.0;
    let mut excluded = 0;
    let grad_omega = match &fwd.omegas {
        None => None,
        Some(om) => {
            let valid = metrics.iter().filter(|m| m.is_some()).count();
            excluded = b - valid;
            let k = critic.subs.len() as f64;
            let mut g = Matrix::zeros(b, om.cols());
            if valid > 0 {
                let scale = 1.0 / (k * valid as f64);
                for (r, m) in metrics.iter().enumerate() {
                    let Some(m) = m else { continue };
                    let (l, gr) = head_losses(om.row(r), m, mode);
                    prediction_loss += l.iter().sum::<f64>() * scale;
                    g.row_mut(r).iter_mut().zip(gr).for_each(|(a, v)| *a = v * scale);
                }
            }
            Some(g)
        }
    };
    let (grads, _) = critic.backprop(&fwd, &grad_q, grad_omega.as_ref())?;
    Ok(LossOutput { loss: td_loss + prediction_loss, td_loss, prediction_loss, excluded, grads })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::TputClass;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn batch(rng: &mut ChaCha8Rng, b: usize, d: usize) -> Matrix<f64> {
        Matrix::from_vec(b, d, (0..b * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn metrics(rng: &mut ChaCha8Rng) -> Metrics {
        Metrics {
            ho_cost: rng.random_range(-0.5..0.5),
            class: TputClass::from_index(rng.random_range(0..3)),
            rlf: if rng.random::<bool>() { RlfClass::Normal } else { RlfClass::Anomalous },
        }
    }

    #[test]
    fn q_is_the_aggregator_of_the_metrics() {
        let c = Critic::new(CriticKind::Compositional, 6, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = batch(&mut rng, 5, 6);
        let f = c.forward(&x).unwrap();
        let om = f.omegas.unwrap();
        assert_eq!(om.cols(), 5);
        assert_eq!(c.aggregator().forward(&om).unwrap().into_vec(), f.q);
        let (q, w) = c.critic_q(x.row(2)).unwrap();
        assert_eq!(q, f.q[2]);
        assert_eq!(w, om.row(2));
    }

    #[test]
    fn zero_aggregator_returns_its_bias() {
        let mut c = Critic::new(CriticKind::Compositional, 4, 3).unwrap();
        let n = c.aggregator.layers().len();
        for (i, l) in c.aggregator.layers_mut().iter_mut().enumerate() {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.bias.iter_mut().for_each(|b| *b = 0.0);
            if i + 1 == n {
                l.bias[0] = 0.7;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(c.q_values(&batch(&mut rng, 8, 4)).unwrap().iter().all(|&q| q == 0.7));
    }

    fn numeric_grad(c: &Critic, x: &Matrix<f64>, g: &[f64], m: &[Option<Metrics>], mode: HeadLoss) -> Vec<f64> {
        let eps = 1e-6;
        let mut out = Vec::new();
        let n_nets = c.subs.len() + 1;
        for net in 0..n_nets {
            let layers = if net < c.subs.len() { c.subs[net].layers().len() } else { c.aggregator.layers().len() };
            for li in 0..layers {
                let sizes = {
                    let l = if net < c.subs.len() { &c.subs[net].layers()[li] } else { &c.aggregator.layers()[li] };
                    (l.weights.len(), l.bias.len())
                };
                for which in 0..2 {
                    let len = if which == 0 { sizes.0 } else { sizes.1 };
                    for i in 0..len {
                        let eval = |d: f64| {
                            let mut cc = c.clone();
                            let mlp = if net < cc.subs.len() { &mut cc.subs[net] } else { &mut cc.aggregator };
                            let l = &mut mlp.layers_mut()[li];
                            if which == 0 { l.weights[i] += d } else { l.bias[i] += d }
                            compositional_loss(&cc, x, g, m, mode).unwrap().loss
                        };
                        out.push((eval(eps) - eval(-eps)) / (2.0 * eps));
                    }
                }
            }
        }
        out
    }

    fn analytic(c: &Critic, x: &Matrix<f64>, g: &[f64], m: &[Option<Metrics>], mode: HeadLoss) -> Vec<f64> {
        let o = compositional_loss(c, x, g, m, mode).unwrap();
        o.grads.subs.iter().flat_map(Gradients::flat).chain(o.grads.aggregator.flat()).collect()
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        for (seed, mode) in [(1, HeadLoss::CrossEntropy), (2, HeadLoss::L2)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut c = Critic::new(CriticKind::Compositional, 5, seed).unwrap();
            // keep pre-activations off the ReLU kink
            for net in c.subs.iter_mut().chain(std::iter::once(&mut c.aggregator)) {
                for l in net.layers_mut() {
                    l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.3..0.3));
                }
            }
            let x = batch(&mut rng, 6, 5);
            let g: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut m: Vec<Option<Metrics>> = (0..6).map(|_| Some(metrics(&mut rng))).collect();
            m[4] = None;
            let a = analytic(&c, &x, &g, &m, mode);
            let n = numeric_grad(&c, &x, &g, &m, mode);
            for (i, (p, q)) in a.iter().zip(&n).enumerate() {
                assert!((p - q).abs() <= 1e-4 * (1.0 + q.abs()), "{mode:?} param {i}: {p} vs {q}");
            }
        }
    }

    #[test]
    fn perfect_heads_and_targets_give_zero_loss() {
        // One sub-critic whose output is identically zero, aggregator bias 0.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let zero = |inp: usize, out: usize| {
            let mut m = Mlp::<f64>::init(&[inp, 4, out], Activation::Linear, 0).unwrap();
            for l in m.layers_mut() {
                l.weights.iter_mut().for_each(|w| *w = 0.0);
            }
            m
        };
        let c = Critic::from_parts(vec![zero(3, 1)], zero(1, 1)).unwrap();
        let x = batch(&mut rng, 4, 3);
        let q = c.q_values(&x).unwrap();
        assert!(q.iter().all(|&v| v == 0.0));
        // Plain TD loss when the single metric target matches h_1 == 0 and
        // only the TD targets differ.
        let g = vec![0.5, -0.5, 1.0, 0.0];
        let f = c.forward(&x).unwrap();
        let td = f.q.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 4.0;
        let none: Vec<Option<Metrics>> = vec![None; 4];
        let o = compositional_loss(&c, &x, &g, &none, HeadLoss::CrossEntropy).unwrap();
        assert_eq!(o.loss, td);
        assert_eq!(o.excluded, 4);
        let o = compositional_loss(&c, &x, &[0.0; 4], &none, HeadLoss::CrossEntropy).unwrap();
        assert_eq!(o.loss, 0.0);
    }

    #[test]
    fn monolithic_loss_is_plain_td() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = Critic::new(CriticKind::Monolithic, 4, 1).unwrap();
        let x = batch(&mut rng, 3, 4);
        let g = [1.0, 2.0, 3.0];
        let m: Vec<Option<Metrics>> = (0..3).map(|_| Some(metrics(&mut rng))).collect();
        let o = compositional_loss(&c, &x, &g, &m, HeadLoss::CrossEntropy).unwrap();
        let q = c.q_values(&x).unwrap();
        assert_eq!(o.prediction_loss, 0.0);
        assert!((o.loss - q.iter().zip(g).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = Critic::new(CriticKind::Compositional, 4, 2).unwrap();
        let x = batch(&mut rng, 1, 4);
        let g = c.input_grad(&x, 1.0).unwrap();
        for i in 0..4 {
            let mut a = x.clone();
            let mut b = x.clone();
            a.data_mut()[i] += 1e-6;
            b.data_mut()[i] -= 1e-6;
            let fd = (c.q_values(&a).unwrap()[0] - c.q_values(&b).unwrap()[0]) / 2e-6;
            assert!((fd - g.data()[i]).abs() < 1e-5, "{fd} vs {}", g.data()[i]);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let c = Critic::new(CriticKind::Compositional, 4, 2).unwrap();
        let opt = c.optimizer(0.002);
        let (d, o) = Critic::restore(&c.checkpoint(Some(&opt)), 0.1).unwrap();
        assert_eq!(c, d);
        assert_eq!(o, opt);
    }
}
