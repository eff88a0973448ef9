//! Online CPDM: collects supervised samples, refits the predictors daily and
//! picks bounded parameter changes by predicted reward.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{
    ca_metrics, ca_state, cpa_metrics, cpa_state, swap_cpa_action, swap_cpa_state, CellLabels, RewardWeights, Tier,
    CA_ACTION_DIM, CA_STATE_DIM, CPA_ACTION_DIM, CPA_STATE_DIM,
};
use crate::control::Controller;
use crate::sim::{CellId, KpiWindow, NetworkTopology};

use super::audit::AuditRecord;
use super::predictors::{PredictorCheckpoint, PredictorConfig, PredictorMetrics, PredictorSet, Sample};
use super::search::{delta_space_ca, delta_space_cpa, select_action_cpdm, select_action_cpdm_pair, Decision, DeltaActionSpace, ScoreMode};
use super::thresholds::ThresholdTable;
use super::CpdmError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpdmConfig {
    pub predictor: PredictorConfig,
    /// Samples a tier needs before its predictors are first fitted.
    pub min_samples: usize,
    /// Intervals between refits.
    pub refit_period: u64,
    /// Intervals between CA decisions.
    pub ca_period: u32,
    /// Initial probability of a uniformly drawn candidate.
    pub explore_eps: f64,
    /// Learning intervals over which the exploration rate decays to zero.
    pub explore_decay_intervals: u64,

    pub score_mode: ScoreMode,
}

impl Default for CpdmConfig {
    fn default() -> Self {
        Self {
            predictor: PredictorConfig::default(),
            min_samples: 500,
            refit_period: 96,
            ca_period: 4,
            explore_eps: 0.02,
            explore_decay_intervals: 12 * 96,
            score_mode: ScoreMode::Soft,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Pending {
    n: u16,
    m: Option<u16>,
    state: Vec<f64>,
    action: Vec<f64>,
}

/// Result of one refit, for the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefitRecord {
    pub interval: u64,
    pub tier: Tier,
    pub metrics: PredictorMetrics,
}

#[derive(Clone, Debug)]
pub struct CpdmController {
    config: CpdmConfig,
    weights: RewardWeights,
    thresholds: ThresholdTable,
    ca: PredictorSet,
    cpa: PredictorSet,
    ca_samples: Vec<Sample>,
    cpa_samples: Vec<Sample>,
    held_out_ca: Vec<Sample>,
    held_out_cpa: Vec<Sample>,
    pending_ca: Vec<Pending>,
    pending_cpa: Vec<Pending>,
    audit: Vec<AuditRecord>,
    refits: Vec<RefitRecord>,
    rng: ChaCha8Rng,
    learning: bool,
    decisions: u64,
    learned: u64,
}

#[derive(Serialize, Deserialize)]
struct CpdmState {
    ca: PredictorCheckpoint,
    cpa: PredictorCheckpoint,
    ca_samples: Vec<Sample>,
    cpa_samples: Vec<Sample>,
    held_out_ca: Vec<Sample>,
    held_out_cpa: Vec<Sample>,
    pending_ca: Vec<Pending>,
    pending_cpa: Vec<Pending>,
    rng: ChaCha8Rng,
    learning: bool,
    decisions: u64,
    learned: u64,
}

impl CpdmController {
    pub fn new(config: CpdmConfig, weights: RewardWeights, thresholds: ThresholdTable, seed: u64) -> Result<Self, CpdmError> {
        if config.ca_period == 0 || config.refit_period == 0 {
            return Err(CpdmError::Parameter("CA and refit periods must be positive".into()));
        }
        Ok(Self {
            ca: PredictorSet::new(Tier::Ca, CA_STATE_DIM, CA_ACTION_DIM, config.predictor.clone(), seed.wrapping_add(1))?,
            cpa: PredictorSet::new(Tier::Cpa, CPA_STATE_DIM, CPA_ACTION_DIM, config.predictor.clone(), seed.wrapping_add(2))?,
            rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(3)),
            config,
            weights,
            thresholds,
            ca_samples: Vec::new(),
            cpa_samples: Vec::new(),
            held_out_ca: Vec::new(),
            held_out_cpa: Vec::new(),
            pending_ca: Vec::new(),
            pending_cpa: Vec::new(),
            audit: Vec::new(),
            refits: Vec::new(),
            learning: true,
            decisions: 0,
            learned: 0,
        })
    }

    pub fn predictors(&self, tier: Tier) -> &PredictorSet {
        if tier == Tier::Ca { &self.ca } else { &self.cpa }
    }

    pub fn training_samples(&self, tier: Tier) -> &[Sample] {
        if tier == Tier::Ca { &self.ca_samples } else { &self.cpa_samples }
    }

    /// Samples collected while learning was off.
    pub fn held_out_samples(&self, tier: Tier) -> &[Sample] {
        if tier == Tier::Ca { &self.held_out_ca } else { &self.held_out_cpa }
    }

    /// Predictor quality on the held-out samples.
    pub fn held_out_metrics(&self, tier: Tier) -> Result<PredictorMetrics, CpdmError> {
        let data = self.held_out_samples(tier);
        let mut m = self.predictors(tier).evaluate(data)?;
        m.validation_samples = data.len();
        m.train_samples = self.training_samples(tier).len();
        Ok(m)
    }

    pub fn take_audit(&mut self) -> Vec<AuditRecord> {
        std::mem::take(&mut self.audit)
    }

    pub fn take_refits(&mut self) -> Vec<RefitRecord> {
        std::mem::take(&mut self.refits)
    }

    fn explore_eps(&self) -> f64 {
        if !self.learning {
            return 0.0;
        }
        let d = self.config.explore_decay_intervals.max(1) as f64;
        self.config.explore_eps * (1.0 - self.learned as f64 / d).max(0.0)
    }

    fn choose(&mut self, tier: Tier, state: &[f64], space: &DeltaActionSpace) -> Result<Decision, CpdmError> {
        let eps = self.explore_eps();
        let predictors = if tier == Tier::Ca { &self.ca } else { &self.cpa };
        if !predictors.is_fitted() {
            // never fitted: hold the current setting, exploring like the greedy policy
            let explored = eps > 0.0 && self.rng.random::<f64>() < eps;
            let index = if explored {
                self.rng.random_range(0..space.len())
            } else {
                space.candidates.iter().position(|c| c.change == 0).unwrap_or(0)
            };
            return Ok(Decision { index, action: space.candidates[index].action.clone(), scores: Vec::new(), explored });
        }
        match tier {
            Tier::Ca => select_action_cpdm(predictors, state, space, &self.weights, self.config.score_mode, eps, &mut self.rng),
            _ => select_action_cpdm_pair(predictors, state, space, &self.weights, self.config.score_mode, eps, &mut self.rng),
        }
    }

    fn store(&mut self, tier: Tier, s: Sample) {
        match (tier, self.learning) {
            (Tier::Ca, true) => self.ca_samples.push(s),
            (Tier::Ca, false) => self.held_out_ca.push(s),
            (_, true) => self.cpa_samples.push(s),
            (_, false) => self.held_out_cpa.push(s),
        }
    }

    fn ca_phase(&mut self, w: &KpiWindow, topology: &mut NetworkTopology, labels: &[CellLabels]) -> Result<(), CpdmError> {
        let interval = w.interval + 1;
        let cells: Vec<CellId> = topology.cell_ids().collect();
        for p in std::mem::take(&mut self.pending_ca) {
            let n = CellId(p.n);
            let metrics = ca_metrics(w, topology, n, &labels[n.index()], &self.weights).map_err(agent_err)?;
            self.store(Tier::Ca, Sample { state: p.state, action: p.action, metrics });
        }
        for n in cells {
            let s = ca_state(w, topology, n).map_err(agent_err)?;
            let current = topology.ttt(n);
            let space = delta_space_ca(current)?;
            let d = self.choose(Tier::Ca, &s, &space)?;
            self.audit.push(AuditRecord::new(interval, Tier::Ca, (n.0, None), &s, vec![f64::from(current)], &space, &d));
            topology.set_ttt(n, d.action[0] as u32).map_err(sim_err)?;
            self.pending_ca.push(Pending { n: n.0, m: None, state: s, action: d.action });
        }
        Ok(())
    }

    fn cpa_phase(&mut self, w: &KpiWindow, topology: &mut NetworkTopology, labels: &[CellLabels]) -> Result<(), CpdmError> {
        let interval = w.interval + 1;
        for p in std::mem::take(&mut self.pending_cpa) {
            let (n, m) = (CellId(p.n), CellId(p.m.expect("CPA decisions name both cells")));
            let fwd = cpa_metrics(w, n, m, &labels[n.index()], &self.weights).map_err(agent_err)?;
            let rev = cpa_metrics(w, m, n, &labels[m.index()], &self.weights).map_err(agent_err)?;
            let swapped = Sample { state: swap_cpa_state(&p.state), action: swap_cpa_action(&p.action), metrics: rev };
            self.store(Tier::Cpa, Sample { state: p.state, action: p.action, metrics: fwd });
            self.store(Tier::Cpa, swapped);
        }
        for (n, m) in topology.undirected_pairs() {
            let s = cpa_state(w, topology, n, m).map_err(agent_err)?;
            let current = (topology.cio(n, m), topology.cio(m, n));
            let space = delta_space_cpa(current.0, current.1)?;
            let d = self.choose(Tier::Cpa, &s, &space)?;
            let previous = vec![f64::from(current.0), f64::from(current.1)];
            self.audit.push(AuditRecord::new(interval, Tier::Cpa, (n.0, Some(m.0)), &s, previous, &space, &d));
            topology.set_cio(n, m, d.action[0] as i32).map_err(sim_err)?;
            topology.set_cio(m, n, d.action[1] as i32).map_err(sim_err)?;
            self.pending_cpa.push(Pending { n: n.0, m: Some(m.0), state: s, action: d.action });
        }
        Ok(())
    }

    fn maybe_refit(&mut self, interval: u64) -> Result<(), CpdmError> {
        if !self.learning || self.learned == 0 || self.learned % self.config.refit_period != 0 {
            return Ok(());
        }
        for tier in [Tier::Ca, Tier::Cpa] {
            let (set, data) = if tier == Tier::Ca { (&mut self.ca, &self.ca_samples) } else { (&mut self.cpa, &self.cpa_samples) };
            if data.len() >= self.config.min_samples {
                let metrics = set.fit(data)?;
                log::info!("{tier:?} predictors refit on {} samples: {metrics:?}", data.len());
                self.refits.push(RefitRecord { interval, tier, metrics });
            }
        }
        Ok(())
    }
}

fn agent_err(e: crate::agents::AgentError) -> CpdmError {
    CpdmError::Parameter(e.to_string())
}

fn sim_err(e: crate::sim::SimError) -> CpdmError {
    CpdmError::Parameter(e.to_string())
}

impl Controller for CpdmController {
    type Error = CpdmError;

    fn decide(&mut self, previous: Option<&KpiWindow>, topology: &mut NetworkTopology) -> Result<(), CpdmError> {
        let i = self.decisions;
        self.decisions += 1;
        let Some(w) = previous else { return Ok(()) };
        self.maybe_refit(w.interval + 1)?;
        let labels = self.thresholds.label_all(w);
        if i % u64::from(self.config.ca_period) == 0 {
            self.ca_phase(w, topology, &labels)?;
        }
        self.cpa_phase(w, topology, &labels)?;
        if self.learning {
            self.learned += 1;
        }
        Ok(())
    }

    fn set_learning(&mut self, on: bool) {
        if on != self.learning {
            // samples straddling the switch belong to neither set
            self.pending_ca.clear();
            self.pending_cpa.clear();
        }
        self.learning = on;
    }

    fn save(&self) -> Result<serde_json::Value, CpdmError> {
        let s = CpdmState {
            ca: self.ca.checkpoint(),
            cpa: self.cpa.checkpoint(),
            ca_samples: self.ca_samples.clone(),
            cpa_samples: self.cpa_samples.clone(),
            held_out_ca: self.held_out_ca.clone(),
            held_out_cpa: self.held_out_cpa.clone(),
            pending_ca: self.pending_ca.clone(),
            pending_cpa: self.pending_cpa.clone(),
            rng: self.rng.clone(),
            learning: self.learning,
            decisions: self.decisions,
            learned: self.learned,
        };
        serde_json::to_value(s).map_err(|e| CpdmError::Checkpoint(e.to_string()))
    }

    fn load(&mut self, state: serde_json::Value) -> Result<(), CpdmError> {
        let s: CpdmState = serde_json::from_value(state).map_err(|e| CpdmError::Checkpoint(e.to_string()))?;
        self.ca = PredictorSet::from_checkpoint(&s.ca)?;
        self.cpa = PredictorSet::from_checkpoint(&s.cpa)?;
        self.ca_samples = s.ca_samples;
        self.cpa_samples = s.cpa_samples;
        self.held_out_ca = s.held_out_ca;
        self.held_out_cpa = s.held_out_cpa;
        self.pending_ca = s.pending_ca;
        self.pending_cpa = s.pending_cpa;
        self.rng = s.rng;
        self.learning = s.learning;
        self.decisions = s.decisions;
        self.learned = s.learned;
        Ok(())
    }

    fn drain_log(&mut self) -> Vec<serde_json::Value> {
        self.take_refits().into_iter().map(|r| serde_json::to_value(r).expect("refit records serialize")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{run_intervals, DefaultController, LoopState};
    use crate::cpdm::build_thresholds;
    use crate::sim::{ScenarioConfig, Simulator};

    fn scenario() -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        c.mobility.max_users = 30;
        c.timing.slots_per_interval = 60;
        c
    }

    fn setup(cfg: &ScenarioConfig) -> ThresholdTable {
        let mut sim = Simulator::new(cfg.clone()).unwrap();
        let mut ws = Vec::new();
        run_intervals(&mut sim, &mut DefaultController, &mut LoopState::default(), 96, |w| ws.push(w.clone())).unwrap();
        build_thresholds(&ws, 96, 1).unwrap()
    }

    fn quick() -> CpdmConfig {
        CpdmConfig {
            predictor: PredictorConfig { initial_steps: 50, refit_steps: 20, ..PredictorConfig::default() },
            min_samples: 200,
            refit_period: 24,
            explore_decay_intervals: 96,
            ..CpdmConfig::default()
        }
    }

    #[test]
    fn every_executed_change_is_bounded() {
        let cfg = scenario();
        let th = setup(&cfg);
        let mut ctl = CpdmController::new(quick(), RewardWeights::default(), th, 3).unwrap();
        let mut sim = Simulator::new(cfg).unwrap();
        let mut st = LoopState::default();
        let mut prev = sim.topology().parameters();
        for _ in 0..120 {
            run_intervals(&mut sim, &mut ctl, &mut st, 1, |_| {}).unwrap();
            let now = sim.topology().parameters();
            for (a, b) in prev.0.iter().zip(&now.0) {
                let (i, j) = (crate::params::ttt_index(*a).unwrap(), crate::params::ttt_index(*b).unwrap());
                assert!(i.abs_diff(j) <= 2);
            }
            for (a, b) in prev.1.iter().zip(&now.1) {
                assert!((a.1 - b.1).abs() <= 2);
            }
            prev = now;
        }
        let audit = ctl.take_audit();
        assert!(audit.iter().all(AuditRecord::is_safe));
        assert_eq!(audit.iter().filter(|r| r.tier == Tier::Cpa).count(), 119 * 21);
        assert!(ctl.predictors(Tier::Cpa).is_fitted());
        assert!(!ctl.take_refits().is_empty());
    }

    #[test]
    fn samples_cover_both_directions_and_eval_is_held_out() {
        let cfg = scenario();
        let th = setup(&cfg);
        let mut ctl = CpdmController::new(quick(), RewardWeights::default(), th, 4).unwrap();
        let mut sim = Simulator::new(cfg).unwrap();
        let mut st = LoopState::default();
        run_intervals(&mut sim, &mut ctl, &mut st, 49, |_| {}).unwrap();
        assert_eq!(ctl.training_samples(Tier::Cpa).len(), 47 * 42);
        assert_eq!(ctl.training_samples(Tier::Ca).len(), 11 * 7);
        ctl.set_learning(false);
        let before = ctl.training_samples(Tier::Cpa).len();
        run_intervals(&mut sim, &mut ctl, &mut st, 10, |_| {}).unwrap();
        assert_eq!(ctl.training_samples(Tier::Cpa).len(), before);
        assert_eq!(ctl.held_out_samples(Tier::Cpa).len(), 9 * 42);
        let m = ctl.held_out_metrics(Tier::Cpa).unwrap();
        assert_eq!(m.validation_samples, 9 * 42);
        assert!(m.h1_mae.is_finite());
    }

    #[test]
    fn evaluation_is_greedy() {
        let cfg = scenario();
        let th = setup(&cfg);
        let mut ctl = CpdmController::new(quick(), RewardWeights::default(), th, 5).unwrap();
        let mut sim = Simulator::new(cfg).unwrap();
        let mut st = LoopState::default();
        run_intervals(&mut sim, &mut ctl, &mut st, 30, |_| {}).unwrap();
        ctl.set_learning(false);
        ctl.take_audit();
        run_intervals(&mut sim, &mut ctl, &mut st, 8, |_| {}).unwrap();
        assert!(ctl.take_audit().iter().all(|r| !r.explored));
    }
}
