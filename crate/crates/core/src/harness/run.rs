use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::Tier;
use crate::cdrl::{BaselineLearner, CriticKind, LearnerConfig, TwoTierLearner};
use crate::control::{mean_ca_reward, Controller, DefaultController, LoopState};
use crate::cpdm::audit::AuditRecord;
use crate::cpdm::{build_thresholds, CpdmConfig, CpdmController, PredictorMetrics, ThresholdTable};
use crate::sim::kpi::read_jsonl;
use crate::sim::{KpiWindow, NetworkTopology, SimSnapshot, Simulator};

use super::config::{ExperimentConfig, Method};
use super::HarnessError;

pub const KPI_TRACE: &str = "kpi_trace.jsonl";
pub const PARAMS: &str = "params.jsonl";
pub const TRAIN_LOG: &str = "train_log.jsonl";
pub const AUDIT: &str = "audit.jsonl";
pub const REWARDS: &str = "rewards.csv";
pub const SUMMARY: &str = "summary.json";
pub const METADATA: &str = "metadata.json";
const WORK: &str = ".work";
const CHECKPOINT: &str = "checkpoint.json";
const STREAMS: [&str; 4] = [KPI_TRACE, PARAMS, TRAIN_LOG, AUDIT];

/// Parameter settings in force during one interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub interval: u64,
    pub ttt_ms: Vec<u32>,
    /// CIO of every directed neighbour pair, in `directed_pairs` order.
    pub cio_db: Vec<i32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    pub seed: u64,
    pub training_intervals: u64,
    pub evaluation_intervals: u64,
    /// Mean network CA reward over the last training day.
    pub final_training_reward: f64,
    /// Executed CPDM decisions and how many broke the bounded-step rule.
    pub audited_actions: u64,
    pub unsafe_actions: u64,
    /// CPDM predictor quality on the evaluation days, CA then CPA tier.
    pub held_out: Option<[PredictorMetrics; 2]>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    days_done: u32,
    sim: SimSnapshot,
    loop_state: LoopState,
    controller: serde_json::Value,
    lines: [usize; 4],
    audited: u64,
    unsafe_actions: u64,
}

enum AnyController {
    Dflt(DefaultController),
    TwoTier(Box<TwoTierLearner>),
    Baseline(Box<BaselineLearner>),
    Cpdm(Box<CpdmController>),
}

impl Controller for AnyController {
    type Error = HarnessError;

    fn decide(&mut self, previous: Option<&KpiWindow>, topology: &mut NetworkTopology) -> Result<(), HarnessError> {
        match self {
            AnyController::Dflt(c) => c.decide(previous, topology).map_err(|e| HarnessError::Config(e.to_string())),
            AnyController::TwoTier(c) => Ok(c.decide(previous, topology)?),
            AnyController::Baseline(c) => Ok(c.decide(previous, topology)?),
            AnyController::Cpdm(c) => Ok(c.decide(previous, topology)?),
        }
    }

    fn set_learning(&mut self, on: bool) {
        match self {
            AnyController::Dflt(c) => c.set_learning(on),
            AnyController::TwoTier(c) => c.set_learning(on),
            AnyController::Baseline(c) => c.set_learning(on),
            AnyController::Cpdm(c) => c.set_learning(on),
        }
    }

    fn save(&self) -> Result<serde_json::Value, HarnessError> {
        match self {
            AnyController::Dflt(_) => Ok(serde_json::Value::Null),
            AnyController::TwoTier(c) => Ok(c.save()?),
            AnyController::Baseline(c) => Ok(c.save()?),
            AnyController::Cpdm(c) => Ok(c.save()?),
        }
    }

    fn load(&mut self, state: serde_json::Value) -> Result<(), HarnessError> {
        match self {
            AnyController::Dflt(_) => Ok(()),
            AnyController::TwoTier(c) => Ok(c.load(state)?),
            AnyController::Baseline(c) => Ok(c.load(state)?),
            AnyController::Cpdm(c) => Ok(c.load(state)?),
        }
    }

    fn drain_log(&mut self) -> Vec<serde_json::Value> {
        match self {
            AnyController::Dflt(c) => c.drain_log(),
            AnyController::TwoTier(c) => c.drain_log(),
            AnyController::Baseline(c) => c.drain_log(),
            AnyController::Cpdm(c) => c.drain_log(),
        }
    }
}

fn controller_for(cfg: &ExperimentConfig, method: Method, seed: u64, sim: &Simulator, thresholds: Option<ThresholdTable>) -> Result<AnyController, HarnessError> {
    let learner = LearnerConfig { td3: cfg.td3.clone(), schedule: cfg.schedule.clone() };
    let th = || thresholds.clone().ok_or_else(|| HarnessError::Incomplete("reference thresholds missing".into()));
    let w = cfg.reward.clone();
    let seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    Ok(match method {
        Method::Dflt => AnyController::Dflt(DefaultController),
        Method::Madrl => AnyController::Baseline(Box::new(BaselineLearner::new(sim.topology(), learner, w, th()?, seed)?)),
        Method::HMadrl => AnyController::TwoTier(Box::new(TwoTierLearner::new(CriticKind::Monolithic, learner, w, th()?, seed)?)),
        Method::Cdrl => AnyController::TwoTier(Box::new(TwoTierLearner::new(CriticKind::Compositional, learner, w, th()?, seed)?)),
        Method::Cpdm => {
            let c = CpdmConfig { explore_decay_intervals: cfg.training_intervals(), ..cfg.cpdm.clone() };
            AnyController::Cpdm(Box::new(CpdmController::new(c, w, th()?, seed)?))
        }
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Keeps the first `n` lines of `path`.
fn truncate_lines(path: &Path, n: usize) -> Result<(), HarnessError> {
    if !path.exists() {
        File::create(path)?;
        return Ok(());
    }
    let mut keep = String::new();
    for line in BufReader::new(File::open(path)?).lines().take(n) {
        keep.push_str(&line?);
        keep.push('\n');
    }
    fs::write(path, keep)?;
    Ok(())
}

fn count_lines(path: &Path) -> Result<usize, HarnessError> {
    Ok(BufReader::new(File::open(path)?).lines().count())
}

fn append_jsonl<T: Serialize>(w: &mut impl Write, items: &[T]) -> Result<(), HarnessError> {
    for i in items {
        serde_json::to_writer(&mut *w, i)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_trace(path: &Path) -> Result<Vec<KpiWindow>, HarnessError> {
    let f = File::open(path).map_err(|e| HarnessError::Incomplete(format!("{}: {e}", path.display())))?;
    Ok(read_jsonl(BufReader::new(f))?)
}

/// Summary and KPI trace of a completed run.
pub fn load_run(cfg: &ExperimentConfig, method: Method, seed: u64) -> Result<(RunSummary, Vec<KpiWindow>), HarnessError> {
    let dir = cfg.run_dir(method, seed);
    let summary = load_summary(&dir).ok_or_else(|| HarnessError::Incomplete(format!("no completed {method} run for seed {seed} in {}", dir.display())))?;
    Ok((summary, load_trace(&dir.join(KPI_TRACE))?))
}

fn load_summary(dir: &Path) -> Option<RunSummary> {
    let text = fs::read_to_string(dir.join(SUMMARY)).ok()?;
    serde_json::from_str(&text).ok()
}

/// Thresholds from the training days of the seed's DFLT run, running it
/// first when it is missing.
pub fn reference_thresholds(cfg: &ExperimentConfig, seed: u64) -> Result<ThresholdTable, HarnessError> {
    let dir = cfg.run_dir(Method::Dflt, seed);
    if load_summary(&dir).is_none() {
        run_seed(cfg, Method::Dflt, seed)?;
    }
    let trace = load_trace(&dir.join(KPI_TRACE))?;
    thresholds_from(cfg, &trace)
}

pub(crate) fn thresholds_from(cfg: &ExperimentConfig, trace: &[KpiWindow]) -> Result<ThresholdTable, HarnessError> {
    let n = cfg.training_intervals() as usize;
    if trace.len() < n {
        return Err(HarnessError::Incomplete(format!("DFLT trace has {} windows, {n} needed", trace.len())));
    }
    Ok(build_thresholds(&trace[..n], cfg.intervals_per_day() as usize, 1)?)
}

/// Runs one method for one seed: training days with learning on, then
/// frozen evaluation days. Completed runs are returned from disk; an
/// interrupted run resumes from its last checkpoint.
pub fn run_seed(cfg: &ExperimentConfig, method: Method, seed: u64) -> Result<RunSummary, HarnessError> {
    run_seed_inner(cfg, method, seed, None)?.ok_or_else(|| HarnessError::Incomplete(format!("{method} seed {seed}")))
}

/// `halt_after` stops after that many days, leaving only the checkpoint.
fn run_seed_inner(cfg: &ExperimentConfig, method: Method, seed: u64, halt_after: Option<u32>) -> Result<Option<RunSummary>, HarnessError> {
    cfg.validate()?;
    let dir = cfg.run_dir(method, seed);
    if let Some(s) = load_summary(&dir) {
        return Ok(Some(s));
    }
    let thresholds = if method == Method::Dflt { None } else { Some(reference_thresholds(cfg, seed)?) };
    let work = dir.join(WORK);
    fs::create_dir_all(&work)?;

    let mut sim = Simulator::new(cfg.scenario_for(seed))?;
    let mut ctl = controller_for(cfg, method, seed, &sim, thresholds.clone())?;
    let mut loop_state = LoopState::default();
    let mut days_done = 0;
    let (mut audited, mut unsafe_actions) = (0u64, 0u64);
    let paths: Vec<PathBuf> = STREAMS.iter().map(|s| work.join(s)).collect();
    match fs::read_to_string(work.join(CHECKPOINT)) {
        Ok(text) => {
            let c: Checkpoint = serde_json::from_str(&text)?;
            sim.restore(c.sim)?;
            ctl.load(c.controller)?;
            loop_state = c.loop_state;
            days_done = c.days_done;
            audited = c.audited;
            unsafe_actions = c.unsafe_actions;
            for (p, n) in paths.iter().zip(c.lines) {
                truncate_lines(p, n)?;
            }
            log::info!("{method} seed {seed}: resuming after day {days_done}");
        }
        Err(_) => {
            for p in &paths {
                File::create(p)?;
            }
        }
    }

    let open = |p: &PathBuf| -> Result<BufWriter<File>, HarnessError> { Ok(BufWriter::new(OpenOptions::new().append(true).open(p)?)) };
    let mut out: Vec<BufWriter<File>> = paths.iter().map(open).collect::<Result<_, _>>()?;
    let per_day = cfg.intervals_per_day();
    let total_days = cfg.training_days + cfg.evaluation_days;
    let pairs = sim.topology().directed_pairs();
    for day in days_done..total_days {
        ctl.set_learning(day < cfg.training_days);
        for _ in 0..per_day {
            ctl.decide(loop_state.last.as_ref(), sim.topology_mut())?;
            let topo = sim.topology();
            let params = ParamRecord {
                interval: sim.interval(),
                ttt_ms: topo.cell_ids().map(|n| topo.ttt(n)).collect(),
                cio_db: pairs.iter().map(|&(n, m)| topo.cio(n, m)).collect(),
            };
            let w = sim.run_interval();
            append_jsonl(&mut out[0], std::slice::from_ref(&w))?;
            append_jsonl(&mut out[1], &[params])?;
            append_jsonl(&mut out[2], &ctl.drain_log())?;
            if let AnyController::Cpdm(c) = &mut ctl {
                let records: Vec<AuditRecord> = c.take_audit();
                audited += records.len() as u64;
                unsafe_actions += records.iter().filter(|r| !r.is_safe()).count() as u64;
                append_jsonl(&mut out[3], &records)?;
            }
            loop_state.last = Some(w);
        }
        for o in &mut out {
            o.flush()?;
        }
        let done = day + 1;
        if cfg.checkpoint_days > 0 && done % cfg.checkpoint_days == 0 && done < total_days {
            let lines = [count_lines(&paths[0])?, count_lines(&paths[1])?, count_lines(&paths[2])?, count_lines(&paths[3])?];
            let c = Checkpoint { days_done: done, sim: sim.snapshot(), loop_state: loop_state.clone(), controller: ctl.save()?, lines, audited, unsafe_actions };
            write_atomic(&work.join(CHECKPOINT), &serde_json::to_vec(&c)?)?;
        }
        if halt_after == Some(done) {
            return Ok(None);
        }
    }
    drop(out);

    let trace = load_trace(&paths[0])?;
    let thresholds = match thresholds {
        Some(t) => t,
        None => thresholds_from(cfg, &trace)?,
    };
    let n_train = cfg.training_intervals() as usize;
    let curve = trace[..n_train]
        .iter()
        .map(|w| mean_ca_reward(w, sim.topology(), &thresholds, &cfg.reward))
        .collect::<Result<Vec<f64>, _>>()?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["interval", "reward"]).map_err(|e| HarnessError::Io(e.to_string()))?;
    for (w, r) in trace.iter().zip(&curve) {
        csv.write_record([w.interval.to_string(), format!("{r}")]).map_err(|e| HarnessError::Io(e.to_string()))?;
    }
    write_atomic(&work.join(REWARDS), &csv.into_inner().map_err(|e| HarnessError::Io(e.to_string()))?)?;

    let last_day = &curve[curve.len() - per_day as usize..];
    let held_out = match &ctl {
        AnyController::Cpdm(c) => Some([c.held_out_metrics(Tier::Ca)?, c.held_out_metrics(Tier::Cpa)?]),
        _ => None,
    };
    let summary = RunSummary {
        method,
        seed,
        training_intervals: cfg.training_intervals(),
        evaluation_intervals: cfg.evaluation_intervals(),
        final_training_reward: last_day.iter().sum::<f64>() / last_day.len() as f64,
        audited_actions: audited,
        unsafe_actions,
        held_out,
    };
    let meta = serde_json::json!({
        "finished_unix_s": std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_atomic(&work.join(METADATA), serde_json::to_string_pretty(&meta)?.as_bytes())?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    for name in STREAMS.iter().chain(&[REWARDS, METADATA]) {
        fs::rename(work.join(name), dir.join(name))?;
    }
    // the summary marks the run complete, so it goes last
    write_atomic(&dir.join(SUMMARY), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    let _ = fs::remove_file(work.join(CHECKPOINT));
    let _ = fs::remove_dir(&work);
    log::info!("{method} seed {seed}: final training reward {:.4}", summary.final_training_reward);
    Ok(Some(summary))
}

/// Runs the configured method for every seed (DFLT references first).
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<RunSummary>, HarnessError> {
    cfg.seeds.iter().map(|&s| run_seed(cfg, cfg.method, s)).collect()
}
