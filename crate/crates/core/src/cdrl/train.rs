//! Online learners driving the simulator: the two-tier CA/CPA learner
//! (CDRL, or H-MADRL with monolithic critics) and the per-cell MADRL
//! baseline. One shared model per tier.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{
    baseline_state, baseline_state_dim, ca_metrics, ca_reward, ca_state, cpa_metrics, cpa_reward, cpa_state, CellLabels,
    Mirror, RewardWeights, Tier, Transition, CA_STATE_DIM, CPA_STATE_DIM,
};
use crate::control::{mean_ca_reward, run_intervals, Controller, LoopState};
use crate::cpdm::ThresholdTable;
use crate::params::{ttt_index, TTT_VALUES_MS};
use crate::sim::{CellId, KpiWindow, NetworkTopology, Simulator};

use super::critic::CriticKind;
use super::replay::{augment_and_push, ReplayBuffer};
use super::td3::{action_dims, StepLoss, Td3Agent, Td3Checkpoint, Td3Config};
use super::CdrlError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSchedule {
    /// Intervals between CPA (and baseline) decisions.
    pub cpa_period: u32,
    /// Intervals between CA decisions; a multiple of `cpa_period`.
    pub ca_period: u32,
    /// Gradient steps after each CPA decision.
    pub cpa_steps: usize,
    /// Gradient steps after each CA decision.
    pub ca_steps: usize,
    /// Learning-mode intervals acting uniformly at random.
    pub warmup_intervals: u64,
    pub replay_capacity: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self { cpa_period: 1, ca_period: 4, cpa_steps: 8, ca_steps: 8, warmup_intervals: 192, replay_capacity: 100_000 }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<(), CdrlError> {
        if self.cpa_period == 0 || self.ca_period == 0 || self.ca_period % self.cpa_period != 0 {
            return Err(CdrlError::Dimension(format!(
                "CA period {} must be a positive multiple of the CPA period {}",
                self.ca_period, self.cpa_period
            )));
        }
        if self.replay_capacity == 0 {
            return Err(CdrlError::Dimension("replay capacity must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub td3: Td3Config,
    pub schedule: TrainSchedule,
}

/// One training-log record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalLog {
    pub interval: u64,
    pub ca_reward: Option<f64>,
    pub cpa_reward: Option<f64>,
    pub ca_critic_loss: Option<f64>,
    pub cpa_critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    /// Samples without metrics left out of prediction terms.
    pub excluded: usize,
    /// Cells per TTT value after the decision.
    pub ttt_histogram: Vec<u32>,
    pub mean_abs_cio_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Pending {
    n: u16,
    m: Option<u16>,
    state: Vec<f64>,
    action: Vec<f64>,
}

fn mean_loss(trace: &[StepLoss]) -> (Option<f64>, Option<f64>, usize) {
    if trace.is_empty() {
        return (None, None, 0);
    }
    let c = trace.iter().map(|l| 0.5 * (l.critic[0] + l.critic[1])).sum::<f64>() / trace.len() as f64;
    let actors: Vec<f64> = trace.iter().filter_map(|l| l.actor).collect();
    let a = (!actors.is_empty()).then(|| actors.iter().sum::<f64>() / actors.len() as f64);
    (Some(c), a, trace.iter().map(|l| l.excluded).sum())
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn parameter_summary(topology: &NetworkTopology, entry: &mut IntervalLog) {
    let mut hist = vec![0u32; TTT_VALUES_MS.len()];
    for n in topology.cell_ids() {
        if let Some(i) = ttt_index(topology.ttt(n)) {
            hist[i] += 1;
        }
    }
    let pairs = topology.directed_pairs();
    let cio: f64 = pairs.iter().map(|&(n, m)| f64::from(topology.cio(n, m).abs())).sum();
    entry.ttt_histogram = hist;
    entry.mean_abs_cio_db = if pairs.is_empty() { 0.0 } else { cio / pairs.len() as f64 };
}

/// CA + CPA agents, each a shared TD3 model trained on every cell / pair.
#[derive(Clone, Debug)]
pub struct TwoTierLearner {
    config: LearnerConfig,
    weights: RewardWeights,
    thresholds: ThresholdTable,
    ca: Td3Agent,
    cpa: Td3Agent,
    ca_buf: ReplayBuffer,
    cpa_buf: ReplayBuffer,
    pending_ca: Vec<Pending>,
    pending_cpa: Vec<Pending>,
    rng: ChaCha8Rng,
    learning: bool,
    decisions: u64,
    learned: u64,
    log: Vec<IntervalLog>,
}

#[derive(Serialize, Deserialize)]
struct TwoTierState {
    ca: Td3Checkpoint,
    cpa: Td3Checkpoint,
    ca_buf: ReplayBuffer,
    cpa_buf: ReplayBuffer,
    pending_ca: Vec<Pending>,
    pending_cpa: Vec<Pending>,
    rng: ChaCha8Rng,
    learning: bool,
    decisions: u64,
    learned: u64,
}

impl TwoTierLearner {
    pub fn new(
        kind: CriticKind,
        config: LearnerConfig,
        weights: RewardWeights,
        thresholds: ThresholdTable,
        seed: u64,
    ) -> Result<Self, CdrlError> {
        let ca = Td3Agent::new(kind, CA_STATE_DIM, action_dims(Tier::Ca, 0), config.td3.clone(), seed.wrapping_add(1))?;
        let cpa = Td3Agent::new(kind, CPA_STATE_DIM, action_dims(Tier::Cpa, 0), config.td3.clone(), seed.wrapping_add(2))?;
        Self::from_agents(ca, cpa, config, weights, thresholds, seed)
    }

    pub fn from_agents(
        ca: Td3Agent,
        cpa: Td3Agent,
        config: LearnerConfig,
        weights: RewardWeights,
        thresholds: ThresholdTable,
        seed: u64,
    ) -> Result<Self, CdrlError> {
        config.schedule.validate()?;
        if ca.state_dim() != CA_STATE_DIM || cpa.state_dim() != CPA_STATE_DIM {
            return Err(CdrlError::Dimension("agent state widths do not match the CA/CPA observations".into()));
        }
        let cap = config.schedule.replay_capacity;
        Ok(Self {
            ca_buf: ReplayBuffer::new(cap, seed.wrapping_add(11)),
            cpa_buf: ReplayBuffer::new(cap, seed.wrapping_add(12)),
            rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(13)),
            config,
            weights,
            thresholds,
            ca,
            cpa,
            pending_ca: Vec::new(),
            pending_cpa: Vec::new(),
            learning: true,
            decisions: 0,
            learned: 0,
            log: Vec::new(),
        })
    }

    pub fn ca(&self) -> &Td3Agent {
        &self.ca
    }

    pub fn cpa(&self) -> &Td3Agent {
        &self.cpa
    }

    pub fn ca_mut(&mut self) -> &mut Td3Agent {
        &mut self.ca
    }

    pub fn cpa_mut(&mut self) -> &mut Td3Agent {
        &mut self.cpa
    }

    pub fn cpa_buffer(&self) -> &ReplayBuffer {
        &self.cpa_buf
    }

    pub fn ca_buffer(&self) -> &ReplayBuffer {
        &self.ca_buf
    }

    pub fn take_log(&mut self) -> Vec<IntervalLog> {
        std::mem::take(&mut self.log)
    }

    fn in_warmup(&self) -> bool {
        self.learning && self.learned < self.config.schedule.warmup_intervals
    }

    fn ca_phase(&mut self, w: &KpiWindow, topology: &mut NetworkTopology, labels: &[CellLabels], entry: &mut IntervalLog) -> Result<(), CdrlError> {
        let cells: Vec<CellId> = topology.cell_ids().collect();
        let states = cells.iter().map(|&n| ca_state(w, topology, n)).collect::<Result<Vec<_>, _>>()?;
        if self.learning {
            let mut rewards = Vec::new();
            for p in std::mem::take(&mut self.pending_ca) {
                let n = CellId(p.n);
                let reward = ca_reward(w, topology, n, &labels[n.index()], &self.weights)?;
                let metrics = ca_metrics(w, topology, n, &labels[n.index()], &self.weights)?;
                rewards.push(reward);
                self.ca_buf.push(Transition {
                    tier: Tier::Ca,
                    state: p.state,
                    action: p.action,
                    reward,
                    next_state: states[n.index()].clone(),
                    metrics: Some(metrics),
                    mirror: None,
                });
            }
            entry.ca_reward = mean(&rewards);
            if self.ca_buf.len() >= self.config.td3.batch_size {
                let trace = self.ca.td3_update(&mut self.ca_buf, self.config.schedule.ca_steps)?;
                let (c, a, ex) = mean_loss(&trace);
                entry.ca_critic_loss = c;
                entry.actor_loss = entry.actor_loss.or(a);
                entry.excluded += ex;
            }
        }
        let random = self.in_warmup();
        for (&n, s) in cells.iter().zip(states) {
            let a = if random { self.ca.random_action(&mut self.rng) } else { self.ca.select_action(&s, self.learning)? };
            topology.set_ttt(n, a[0] as u32)?;
            if self.learning {
                self.pending_ca.push(Pending { n: n.0, m: None, state: s, action: a });
            }
        }
        Ok(())
    }

    fn cpa_phase(&mut self, w: &KpiWindow, topology: &mut NetworkTopology, labels: &[CellLabels], entry: &mut IntervalLog) -> Result<(), CdrlError> {
        let pairs = topology.undirected_pairs();
        let states = pairs.iter().map(|&(n, m)| cpa_state(w, topology, n, m)).collect::<Result<Vec<_>, _>>()?;
        if self.learning {
            let mut rewards = Vec::new();
            for p in std::mem::take(&mut self.pending_cpa) {
                let (n, m) = (CellId(p.n), CellId(p.m.expect("CPA decisions name both cells")));
                let idx = pairs.iter().position(|&q| q == (n, m)).expect("pair set is fixed");
                let reward = cpa_reward(w, n, m, &labels[n.index()], &self.weights)?;
                let mirror = Mirror {
                    reward: cpa_reward(w, m, n, &labels[m.index()], &self.weights)?,
                    metrics: Some(cpa_metrics(w, m, n, &labels[m.index()], &self.weights)?),
                };
                rewards.push(reward);
                augment_and_push(
                    &mut self.cpa_buf,
                    Transition {
                        tier: Tier::Cpa,
                        state: p.state,
                        action: p.action,
                        reward,
                        next_state: states[idx].clone(),
                        metrics: Some(cpa_metrics(w, n, m, &labels[n.index()], &self.weights)?),
                        mirror: Some(mirror),
                    },
                );
            }
            entry.cpa_reward = mean(&rewards);
            if self.cpa_buf.len() >= self.config.td3.batch_size {
                let trace = self.cpa.td3_update(&mut self.cpa_buf, self.config.schedule.cpa_steps)?;
                let (c, a, ex) = mean_loss(&trace);
                entry.cpa_critic_loss = c;
                entry.actor_loss = a.or(entry.actor_loss);
                entry.excluded += ex;
            }
        }
        let random = self.in_warmup();
        for (&(n, m), s) in pairs.iter().zip(states) {
            let a = if random { self.cpa.random_action(&mut self.rng) } else { self.cpa.select_action(&s, self.learning)? };
            topology.set_cio(n, m, a[0] as i32)?;
            topology.set_cio(m, n, a[1] as i32)?;
            if self.learning {
                self.pending_cpa.push(Pending { n: n.0, m: Some(m.0), state: s, action: a });
            }
        }
        Ok(())
    }
}

impl Controller for TwoTierLearner {
    type Error = CdrlError;

    fn decide(&mut self, previous: Option<&KpiWindow>, topology: &mut NetworkTopology) -> Result<(), CdrlError> {
        let i = self.decisions;
        self.decisions += 1;
        let Some(w) = previous else { return Ok(()) };
        let labels = self.thresholds.label_all(w);
        let mut entry = IntervalLog { interval: w.interval + 1, ..IntervalLog::default() };
        let s = &self.config.schedule;
        let (ca_now, cpa_now) = (i % u64::from(s.ca_period) == 0, i % u64::from(s.cpa_period) == 0);
        if ca_now {
            self.ca_phase(w, topology, &labels, &mut entry)?;
        }
        if cpa_now {
            self.cpa_phase(w, topology, &labels, &mut entry)?;
        }
        if self.learning {
            self.learned += 1;
        }
        parameter_summary(topology, &mut entry);
        self.log.push(entry);
        Ok(())
    }

    fn set_learning(&mut self, on: bool) {
        if !on {
            self.pending_ca.clear();
            self.pending_cpa.clear();
        }
        self.learning = on;
    }

    fn save(&self) -> Result<serde_json::Value, CdrlError> {
        let s = TwoTierState {
            ca: self.ca.checkpoint(),
            cpa: self.cpa.checkpoint(),
            ca_buf: self.ca_buf.clone(),
            cpa_buf: self.cpa_buf.clone(),
            pending_ca: self.pending_ca.clone(),
            pending_cpa: self.pending_cpa.clone(),
            rng: self.rng.clone(),
            learning: self.learning,
            decisions: self.decisions,
            learned: self.learned,
        };
        serde_json::to_value(s).map_err(|e| CdrlError::Checkpoint(e.to_string()))
    }

    fn load(&mut self, state: serde_json::Value) -> Result<(), CdrlError> {
        let s: TwoTierState = serde_json::from_value(state).map_err(|e| CdrlError::Checkpoint(e.to_string()))?;
        self.ca = Td3Agent::from_checkpoint(&s.ca)?;
        self.cpa = Td3Agent::from_checkpoint(&s.cpa)?;
        self.ca_buf = s.ca_buf;
        self.cpa_buf = s.cpa_buf;
        self.pending_ca = s.pending_ca;
        self.pending_cpa = s.pending_cpa;
        self.rng = s.rng;
        self.learning = s.learning;
        self.decisions = s.decisions;
        self.learned = s.learned;
        Ok(())
    }

    fn drain_log(&mut self) -> Vec<serde_json::Value> {
        self.take_log().into_iter().map(|e| serde_json::to_value(e).expect("log records serialize")).collect()
    }
}

/// Per-cell MADRL baseline: one agent per cell acting on its TTT and the
/// CIOs towards its neighbours, sharing a model per neighbour count.
#[derive(Clone, Debug)]
pub struct BaselineLearner {
    config: LearnerConfig,
    weights: RewardWeights,
    thresholds: ThresholdTable,
    agents: BTreeMap<usize, Td3Agent>,
    buffers: BTreeMap<usize, ReplayBuffer>,
    pending: Vec<Pending>,
    rng: ChaCha8Rng,
    learning: bool,
    decisions: u64,
    learned: u64,
    log: Vec<IntervalLog>,
}

#[derive(Serialize, Deserialize)]
struct BaselineState {
    agents: BTreeMap<usize, Td3Checkpoint>,
    buffers: BTreeMap<usize, ReplayBuffer>,
    pending: Vec<Pending>,
    rng: ChaCha8Rng,
    learning: bool,
    decisions: u64,
    learned: u64,
}

impl BaselineLearner {
    pub fn new(
        topology: &NetworkTopology,
        config: LearnerConfig,
        weights: RewardWeights,
        thresholds: ThresholdTable,
        seed: u64,
    ) -> Result<Self, CdrlError> {
        config.schedule.validate()?;
        let mut agents = BTreeMap::new();
        let mut buffers = BTreeMap::new();
        for n in topology.cell_ids() {
            let k = topology.neighbors(n).len();
            if k == 0 {
                return Err(CdrlError::Dimension(format!("cell {} has no neighbours", n.0)));
            }
            if let std::collections::btree_map::Entry::Vacant(e) = agents.entry(k) {
                let s = seed.wrapping_add(100 * k as u64);
                e.insert(Td3Agent::new(CriticKind::Monolithic, baseline_state_dim(k), action_dims(Tier::Baseline, k), config.td3.clone(), s)?);
                buffers.insert(k, ReplayBuffer::new(config.schedule.replay_capacity, s.wrapping_add(1)));
            }
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(13)),
            config,
            weights,
            thresholds,
            agents,
            buffers,
            pending: Vec::new(),
            learning: true,
            decisions: 0,
            learned: 0,
            log: Vec::new(),
        })
    }

    pub fn agents(&self) -> &BTreeMap<usize, Td3Agent> {
        &self.agents
    }
}

impl Controller for BaselineLearner {
    type Error = CdrlError;

    fn decide(&mut self, previous: Option<&KpiWindow>, topology: &mut NetworkTopology) -> Result<(), CdrlError> {
        let i = self.decisions;
        self.decisions += 1;
        let Some(w) = previous else { return Ok(()) };
        if i % u64::from(self.config.schedule.cpa_period) != 0 {
            return Ok(());
        }
        let labels = self.thresholds.label_all(w);
        let mut entry = IntervalLog { interval: w.interval + 1, ..IntervalLog::default() };
        let cells: Vec<CellId> = topology.cell_ids().collect();
        let states = cells.iter().map(|&n| baseline_state(w, topology, n)).collect::<Result<Vec<_>, _>>()?;
        if self.learning {
            let mut rewards = Vec::new();
            for p in std::mem::take(&mut self.pending) {
                let n = CellId(p.n);
                let reward = ca_reward(w, topology, n, &labels[n.index()], &self.weights)?;
                rewards.push(reward);
                let k = topology.neighbors(n).len();
                self.buffers.get_mut(&k).expect("buffer per neighbour count").push(Transition {
                    tier: Tier::Baseline,
                    state: p.state,
                    action: p.action,
                    reward,
                    next_state: states[n.index()].clone(),
                    metrics: None,
                    mirror: None,
                });
            }
            entry.ca_reward = mean(&rewards);
            let mut losses = Vec::new();
            for (k, agent) in self.agents.iter_mut() {
                let buf = self.buffers.get_mut(k).expect("buffer per neighbour count");
                if buf.len() >= self.config.td3.batch_size {
                    losses.extend(agent.td3_update(buf, self.config.schedule.cpa_steps)?);
                }
            }
            let (c, a, _) = mean_loss(&losses);
            entry.ca_critic_loss = c;
            entry.actor_loss = a;
        }
        let random = self.in_warmup();
        for (&n, s) in cells.iter().zip(states) {
            let k = topology.neighbors(n).len();
            let agent = self.agents.get_mut(&k).expect("agent per neighbour count");
            let a = if random { agent.random_action(&mut self.rng) } else { agent.select_action(&s, self.learning)? };
            topology.set_ttt(n, a[0] as u32)?;
            let ns = topology.neighbors(n).to_vec();
            for (j, m) in ns.into_iter().enumerate() {
                topology.set_cio(n, m, a[1 + j] as i32)?;
            }
            if self.learning {
                self.pending.push(Pending { n: n.0, m: None, state: s, action: a });
            }
        }
        if self.learning {
            self.learned += 1;
        }
        parameter_summary(topology, &mut entry);
        self.log.push(entry);
        Ok(())
    }

    fn set_learning(&mut self, on: bool) {
        if !on {
            self.pending.clear();
        }
        self.learning = on;
    }

    fn save(&self) -> Result<serde_json::Value, CdrlError> {
        let s = BaselineState {
            agents: self.agents.iter().map(|(k, a)| (*k, a.checkpoint())).collect(),
            buffers: self.buffers.clone(),
            pending: self.pending.clone(),
            rng: self.rng.clone(),
            learning: self.learning,
            decisions: self.decisions,
            learned: self.learned,
        };
        serde_json::to_value(s).map_err(|e| CdrlError::Checkpoint(e.to_string()))
    }

    fn load(&mut self, state: serde_json::Value) -> Result<(), CdrlError> {
        let s: BaselineState = serde_json::from_value(state).map_err(|e| CdrlError::Checkpoint(e.to_string()))?;
        self.agents = s.agents.iter().map(|(k, c)| Ok((*k, Td3Agent::from_checkpoint(c)?))).collect::<Result<_, CdrlError>>()?;
        self.buffers = s.buffers;
        self.pending = s.pending;
        self.rng = s.rng;
        self.learning = s.learning;
        self.decisions = s.decisions;
        self.learned = s.learned;
        Ok(())
    }

    fn drain_log(&mut self) -> Vec<serde_json::Value> {
        std::mem::take(&mut self.log).into_iter().map(|e| serde_json::to_value(e).expect("log records serialize")).collect()
    }
}

impl BaselineLearner {
    fn in_warmup(&self) -> bool {
        self.learning && self.learned < self.config.schedule.warmup_intervals
    }
}

/// Trains the two tiers online for `intervals` intervals and returns the
/// per-interval network-mean CA reward.
pub fn alternating_train(
    learner: &mut TwoTierLearner,
    sim: &mut Simulator,
    state: &mut LoopState,
    intervals: u64,
) -> Result<Vec<f64>, CdrlError> {
    let thresholds = learner.thresholds.clone();
    let weights = learner.weights.clone();
    let mut windows = Vec::new();
    run_intervals(sim, learner, state, intervals, |w| windows.push(w.clone()))?;
    let topology = sim.topology();
    Ok(windows.iter().map(|w| mean_ca_reward(w, topology, &thresholds, &weights)).collect::<Result<_, _>>()?)
}
