use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::agents::{quantize_cio, quantize_ttt, Metrics, Tier};
use crate::nn::{adam_step, symlog, Activation, AdamState, Matrix, Mlp, MlpCheckpoint};
use crate::params::{CIO_BOX_DB, CIO_MAX_DB, CIO_MIN_DB, TTT_BOX_MS, TTT_VALUES_MS};

use super::critic::{compositional_loss, Critic, CriticKind, CriticOptimizer, HeadLoss};
use super::replay::ReplayBuffer;
use super::CdrlError;

pub const ACTOR_HIDDEN: [usize; 3] = [64, 32, 8];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: u32,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    /// Exploration noise std as a fraction of the box width.
    pub expl_noise: f64,
    /// Target smoothing noise std as a fraction of the box width.
    pub smooth_noise: f64,
    /// Smoothing noise clip as a multiple of its std.
    pub smooth_clip: f64,
    pub head_loss: HeadLoss,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            tau: 0.005,
            policy_delay: 2,
            actor_lr: 0.001,
            critic_lr: 0.002,
            batch_size: 64,
            expl_noise: 0.1,
            smooth_noise: 0.2,
            smooth_clip: 0.5,
            head_loss: HeadLoss::CrossEntropy,
        }
    }
}

/// How one action component is quantized after clipping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantizer {
    Ttt,
    Cio,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionDim {
    pub lo: f64,
    pub hi: f64,
    pub quantizer: Quantizer,
}

impl ActionDim {
    pub const TTT: ActionDim = ActionDim { lo: TTT_BOX_MS.0, hi: TTT_BOX_MS.1, quantizer: Quantizer::Ttt };
    pub const CIO: ActionDim = ActionDim { lo: CIO_BOX_DB.0, hi: CIO_BOX_DB.1, quantizer: Quantizer::Cio };

    /// Maps a raw value to `[-1, 1]`.
    pub fn normalize(&self, x: f64) -> f64 {
        (2.0 * (x - self.lo) / (self.hi - self.lo) - 1.0).clamp(-1.0, 1.0)
    }

    pub fn denormalize(&self, u: f64) -> f64 {
        self.lo + (u.clamp(-1.0, 1.0) + 1.0) * 0.5 * (self.hi - self.lo)
    }

    pub fn quantize(&self, x: f64) -> f64 {
        match self.quantizer {
            Quantizer::Ttt => f64::from(quantize_ttt(x)),
            Quantizer::Cio => f64::from(quantize_cio(x)),
            Quantizer::None => x.clamp(self.lo, self.hi),
        }
    }

    /// Uniform draw over the quantized set (or the box).
    pub fn random<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.quantizer {
            Quantizer::Ttt => f64::from(TTT_VALUES_MS[rng.random_range(0..TTT_VALUES_MS.len())]),
            Quantizer::Cio => f64::from(rng.random_range(CIO_MIN_DB..=CIO_MAX_DB)),
            Quantizer::None => rng.random_range(self.lo..=self.hi),
        }
    }
}

/// Action layout of each tier.
pub fn action_dims(tier: Tier, num_neighbors: usize) -> Vec<ActionDim> {
    match tier {
        Tier::Ca => vec![ActionDim::TTT],
        Tier::Cpa => vec![ActionDim::CIO; 2],
        Tier::Baseline => std::iter::once(ActionDim::TTT).chain(std::iter::repeat_n(ActionDim::CIO, num_neighbors)).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLoss {
    pub critic: [f64; 2],
    pub td: [f64; 2],
    pub prediction: [f64; 2],
    /// Batch samples left out of the prediction term.
    pub excluded: usize,
    /// Present on steps that updated the actor.
    pub actor: Option<f64>,
}

/// TD3 with twin critics (compositional or monolithic) and a tanh actor
/// acting in the normalized action box.
#[derive(Clone, Debug)]
pub struct Td3Agent {
    config: Td3Config,
    state_dim: usize,
    dims: Vec<ActionDim>,
    actor: Mlp<f64>,
    actor_target: Mlp<f64>,
    actor_opt: AdamState<f64>,
    critics: [Critic; 2],
    critic_targets: [Critic; 2],
    critic_opts: [CriticOptimizer; 2],
    rng: ChaCha8Rng,
    critic_updates: u64,
    /// State standardization after symlog, fitted on the buffer at the
    /// first update.
    shift: Vec<f64>,
    scale: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Td3Checkpoint {
    pub config: Td3Config,
    pub state_dim: usize,
    pub dims: Vec<ActionDim>,
    pub actor: MlpCheckpoint,
    pub actor_target: MlpCheckpoint,
    pub critics: [Vec<MlpCheckpoint>; 2],
    pub critic_targets: [Vec<MlpCheckpoint>; 2],
    pub rng: ChaCha8Rng,
    pub critic_updates: u64,
    #[serde(default)]
    pub shift: Vec<f64>,
    #[serde(default)]
    pub scale: Vec<f64>,
}

fn symlog_row(s: &[f64], out: &mut Vec<f64>) {
    out.extend(s.iter().map(|&x| symlog(x)));
}

/// Per-column mean and standard deviation (1 for constant columns).
fn column_moments<'a>(rows: impl Iterator<Item = &'a [f64]>, width: usize) -> (Vec<f64>, Vec<f64>) {
    let (mut sum, mut sq, mut n) = (vec![0.0; width], vec![0.0; width], 0usize);
    let mut x = Vec::with_capacity(width);
    for r in rows {
        x.clear();
        symlog_row(r, &mut x);
        for (k, v) in x.iter().enumerate().take(width) {
            sum[k] += v;
            sq[k] += v * v;
        }
        n += 1;
    }
    let n = n.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let sd = sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| {
            let v = (q / n - m * m).max(0.0).sqrt();
            if v > 1e-9 { v } else { 1.0 }
        })
        .collect();
    (mean, sd)
}

impl Td3Agent {
    pub fn new(kind: CriticKind, state_dim: usize, dims: Vec<ActionDim>, config: Td3Config, seed: u64) -> Result<Self, CdrlError> {
        if dims.is_empty() || state_dim == 0 {
            return Err(CdrlError::Dimension("empty state or action".into()));
        }
        let a = dims.len();
        let sizes = [state_dim, ACTOR_HIDDEN[0], ACTOR_HIDDEN[1], ACTOR_HIDDEN[2], a];
        let actor = Mlp::init(&sizes, Activation::Tanh, seed)?;
        let critics = [Critic::new(kind, state_dim + a, seed.wrapping_add(100))?, Critic::new(kind, state_dim + a, seed.wrapping_add(200))?];
        let actor_opt = AdamState::new(&actor, config.actor_lr);
        let critic_opts = [critics[0].optimizer(config.critic_lr), critics[1].optimizer(config.critic_lr)];
        Ok(Self {
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            actor,
            actor_opt,
            critics,
            critic_opts,
            state_dim,
            dims,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0xA11CE),
            critic_updates: 0,
            shift: Vec::new(),
            scale: Vec::new(),
        })
    }

    pub fn config(&self) -> &Td3Config {
        &self.config
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dims(&self) -> &[ActionDim] {
        &self.dims
    }

    pub fn actor(&self) -> &Mlp<f64> {
        &self.actor
    }

    pub fn actor_target(&self) -> &Mlp<f64> {
        &self.actor_target
    }

    pub fn critics(&self) -> &[Critic; 2] {
        &self.critics
    }

    pub fn critic_targets(&self) -> &[Critic; 2] {
        &self.critic_targets
    }

    pub fn critic_kind(&self) -> CriticKind {
        self.critics[0].kind()
    }

    pub fn critic_updates(&self) -> u64 {
        self.critic_updates
    }

    fn check_state(&self, s: &[f64]) -> Result<(), CdrlError> {
        if s.len() != self.state_dim {
            return Err(CdrlError::Dimension(format!("state width {} != {}", s.len(), self.state_dim)));
        }
        Ok(())
    }

    /// Network encoding of a raw state: symlog, then the fitted
    /// standardization if any.
    pub fn encode_state(&self, s: &[f64], out: &mut Vec<f64>) {
        let start = out.len();
        symlog_row(s, out);
        for (x, (m, d)) in out[start..].iter_mut().zip(self.shift.iter().zip(&self.scale)) {
            *x = (*x - m) / d;
        }
    }

    /// Actor output in normalized units.
    pub fn policy(&self, s: &[f64]) -> Result<Vec<f64>, CdrlError> {
        self.check_state(s)?;
        let mut x = Vec::with_capacity(s.len());
        self.encode_state(s, &mut x);
        Ok(self.actor.forward_one(&x)?)
    }

    /// Continuous action in the box, before quantization.
    pub fn raw_action(&mut self, s: &[f64], explore: bool) -> Result<Vec<f64>, CdrlError> {
        let u = self.policy(s)?;
        let noise = Normal::new(0.0, 2.0 * self.config.expl_noise).map_err(|e| CdrlError::Dimension(e.to_string()))?;
        Ok(u
            .iter()
            .zip(&self.dims)
            .map(|(&u, d)| {
                let u = if explore { u + noise.sample(&mut self.rng) } else { u };
                d.denormalize(u)
            })
            .collect())
    }

    /// Policy action (plus exploration noise) clipped to the box and
    /// quantized to the allowed set.
    pub fn select_action(&mut self, s: &[f64], explore: bool) -> Result<Vec<f64>, CdrlError> {
        let raw = self.raw_action(s, explore)?;
        Ok(raw.iter().zip(&self.dims).map(|(&x, d)| d.quantize(x)).collect())
    }

    pub fn random_action<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.dims.iter().map(|d| d.random(rng)).collect()
    }

    pub fn critic_input(&self, s: &[f64], a: &[f64], out: &mut Vec<f64>) {
        self.encode_state(s, out);
        out.extend(a.iter().zip(&self.dims).map(|(&x, d)| d.normalize(x)));
    }

    pub fn q_value(&self, s: &[f64], a: &[f64]) -> Result<f64, CdrlError> {
        self.check_state(s)?;
        let mut x = Vec::new();
        self.critic_input(s, a, &mut x);
        Ok(self.critics[0].critic_q(&x)?.0)
    }

    /// `steps` TD3 updates on batches from `buffer`.
    pub fn td3_update(&mut self, buffer: &mut ReplayBuffer, steps: usize) -> Result<Vec<StepLoss>, CdrlError> {
        let b = self.config.batch_size;
        if buffer.len() < b {
            return Err(CdrlError::BufferTooSmall { needed: b, have: buffer.len() });
        }
        if self.shift.is_empty() {
            (self.shift, self.scale) = column_moments(buffer.iter().map(|t| t.state.as_slice()), self.state_dim);
        }
        let mut trace = Vec::with_capacity(steps);
        for _ in 0..steps {
            let batch = buffer.sample(b)?;
            trace.push(self.update_on(&batch)?);
        }
        Ok(trace)
    }

    fn update_on(&mut self, batch: &[&crate::agents::Transition]) -> Result<StepLoss, CdrlError> {
        let b = batch.len();
        let a = self.dims.len();
        let width = self.state_dim + a;
        let mut x = Vec::with_capacity(b * width);
        let mut s_next = Vec::with_capacity(b * self.state_dim);
        let mut s_now = Vec::with_capacity(b * self.state_dim);
        let mut metrics: Vec<Option<Metrics>> = Vec::with_capacity(b);
        for t in batch {
            if t.state.len() != self.state_dim || t.next_state.len() != self.state_dim || t.action.len() != a {
                return Err(CdrlError::Dimension(format!("transition widths ({}, {}) for agent ({}, {a})", t.state.len(), t.action.len(), self.state_dim)));
            }
            self.critic_input(&t.state, &t.action, &mut x);
            self.encode_state(&t.next_state, &mut s_next);
            self.encode_state(&t.state, &mut s_now);
            metrics.push(t.metrics);
        }
        let x = Matrix::from_vec(b, width, x)?;
        let s_next = Matrix::from_vec(b, self.state_dim, s_next)?;
        let s_now = Matrix::from_vec(b, self.state_dim, s_now)?;

        // Target policy smoothing.
        let sigma = 2.0 * self.config.smooth_noise;
        let clip = self.config.smooth_clip * sigma;
        let noise = Normal::new(0.0, sigma).map_err(|e| CdrlError::Dimension(e.to_string()))?;
        let mut u_next = self.actor_target.forward(&s_next)?;
        for v in u_next.data_mut() {
            *v = (*v + noise.sample(&mut self.rng).clamp(-clip, clip)).clamp(-1.0, 1.0);
        }
        let x_next = Matrix::hcat(&[&s_next, &u_next])?;
        let q1 = self.critic_targets[0].q_values(&x_next)?;
        let q2 = self.critic_targets[1].q_values(&x_next)?;
        let targets: Vec<f64> =
            batch.iter().zip(q1.iter().zip(&q2)).map(|(t, (a, b))| t.reward + self.config.gamma * a.min(*b)).collect();

        let mut out = StepLoss { critic: [0.0; 2], td: [0.0; 2], prediction: [0.0; 2], excluded: 0, actor: None };
        for k in 0..2 {
            let l = compositional_loss(&self.critics[k], &x, &targets, &metrics, self.config.head_loss)?;
            if !l.loss.is_finite() {
                return Err(CdrlError::Diverged(format!("critic {k} loss {} after {} updates", l.loss, self.critic_updates)));
            }
            self.critics[k].apply(&l.grads, &mut self.critic_opts[k])?;
            out.critic[k] = l.loss;
            out.td[k] = l.td_loss;
            out.prediction[k] = l.prediction_loss;
            out.excluded = l.excluded;
        }
        self.critic_updates += 1;

        if self.critic_updates % u64::from(self.config.policy_delay.max(1)) == 0 {
            let cache = self.actor.forward_cached(&s_now)?;
            let xa = Matrix::hcat(&[&s_now, cache.output()])?;
            let q = self.critics[0].q_values(&xa)?;
            let dx = self.critics[0].input_grad(&xa, -1.0 / b as f64)?;
            let (grads, _) = self.actor.backward(&cache, &dx.columns(self.state_dim, a))?;
            adam_step(&mut self.actor, &mut self.actor_opt, &grads)?;
            out.actor = Some(-q.iter().sum::<f64>() / b as f64);
            self.sync_targets(self.config.tau);
        }
        if !self.actor.all_finite() || !self.critics.iter().all(Critic::all_finite) {
            return Err(CdrlError::Diverged(format!("non-finite parameters after {} updates", self.critic_updates)));
        }
        Ok(out)
    }

    /// Makes the actor (and its target) output `action` for every state.
    pub fn init_actor_constant(&mut self, action: &[f64]) -> Result<(), CdrlError> {
        if action.len() != self.dims.len() {
            return Err(CdrlError::Dimension(format!("action width {} != {}", action.len(), self.dims.len())));
        }
        let last = self.actor.layers_mut().last_mut().expect("actor has layers");
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        for (b, (&x, d)) in last.bias.iter_mut().zip(action.iter().zip(&self.dims)) {
            *b = d.normalize(x).clamp(-0.999_999, 0.999_999).atanh();
        }
        self.actor_target = self.actor.clone();
        Ok(())
    }

    /// Polyak update of all target networks.
    pub fn sync_targets(&mut self, tau: f64) {
        self.actor_target.soft_update(&self.actor, tau);
        for k in 0..2 {
            self.critic_targets[k].soft_update(&self.critics[k], tau);
        }
    }

    pub fn checkpoint(&self) -> Td3Checkpoint {
        Td3Checkpoint {
            config: self.config.clone(),
            state_dim: self.state_dim,
            dims: self.dims.clone(),
            actor: MlpCheckpoint::capture(&self.actor, Some(&self.actor_opt)),
            actor_target: MlpCheckpoint::capture(&self.actor_target, None),
            critics: [self.critics[0].checkpoint(Some(&self.critic_opts[0])), self.critics[1].checkpoint(Some(&self.critic_opts[1]))],
            critic_targets: [self.critic_targets[0].checkpoint(None), self.critic_targets[1].checkpoint(None)],
            rng: self.rng.clone(),
            critic_updates: self.critic_updates,
            shift: self.shift.clone(),
            scale: self.scale.clone(),
        }
    }

    pub fn from_checkpoint(c: &Td3Checkpoint) -> Result<Self, CdrlError> {
        let (actor, opt) = c.actor.restore::<f64>()?;
        let (actor_target, _) = c.actor_target.restore::<f64>()?;
        let (c0, o0) = Critic::restore(&c.critics[0], c.config.critic_lr)?;
        let (c1, o1) = Critic::restore(&c.critics[1], c.config.critic_lr)?;
        let (t0, _) = Critic::restore(&c.critic_targets[0], c.config.critic_lr)?;
        let (t1, _) = Critic::restore(&c.critic_targets[1], c.config.critic_lr)?;
        if actor.input_size() != c.state_dim || actor.output_size() != c.dims.len() || c0.input_dim() != c.state_dim + c.dims.len() {
            return Err(CdrlError::Checkpoint("network shapes do not match the recorded dimensions".into()));
        }
        Ok(Self {
            config: c.config.clone(),
            state_dim: c.state_dim,
            dims: c.dims.clone(),
            actor_opt: opt.unwrap_or_else(|| AdamState::new(&actor, c.config.actor_lr)),
            actor,
            actor_target,
            critics: [c0, c1],
            critic_targets: [t0, t1],
            critic_opts: [o0, o1],
            rng: c.rng.clone(),
            critic_updates: c.critic_updates,
            shift: c.shift.clone(),
            scale: c.scale.clone(),
        })
    }
}
