//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.
//!
//! The trend and predictor criteria share one campaign (all methods, five
//! seeds, 12 training + 2 evaluation days) written under the cargo target
//! tmp dir. Set `SONLAB_REUSE_CAMPAIGN=1` to keep completed runs between
//! invocations; `SONLAB_ACCEPTANCE_SKIP_CAMPAIGN=1` runs only the property
//! criteria and exits nonzero.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sonlab::agents::{ca_reward, cpa_reward, CellLabels, Metrics, Mirror, RewardWeights, RlfClass, Tier, Transition, TputClass, CA_STATE_DIM, CPA_STATE_DIM};
use sonlab::cdrl::{augment_and_push, compositional_loss, Critic, CriticKind, HeadLoss, ReplayBuffer};
use sonlab::cpdm::{delta_space_ca, delta_space_cpa, score, select_action_cpdm, PredictorConfig, PredictorSet, ScoreMode};
use sonlab::harness::{self, ExperimentConfig, KpiRow, Method, ParamRecord, RunSummary};
use sonlab::nn::{symexp, symlog, Activation, Matrix, Mlp};
use sonlab::params::{ttt_index, CIO_MAX_DB, CIO_MIN_DB, TTT_VALUES_MS};
use sonlab::sim::kpi::{PairKpis, KPI_SCHEMA_VERSION, PSI_LEN};
use sonlab::sim::{build_topology, KpiWindow, NetworkTopology, ScenarioConfig};

#[derive(Clone)]
struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---------------------------------------------------------------- rewards

fn random_window(topology: &NetworkTopology, rng: &mut ChaCha8Rng) -> KpiWindow {
    let k = topology.num_cells();
    let rho = (0..k).map(|_| std::array::from_fn(|_| rng.random_range(0.0..50.0))).collect();
    let psi = topology
        .directed_pairs()
        .into_iter()
        .map(|(n, m)| {
            let attempts = f64::from(rng.random_range(0u32..60));
            let mut v = [0.0; PSI_LEN];
            v[0] = attempts;
            v[1] = rng.random_range(0.0..1.0);
            for x in &mut v[2..] {
                *x = (attempts * rng.random_range(0.0..0.5)).floor();
            }
            PairKpis { source: n, target: m, values: v }
        })
        .collect();
    KpiWindow {
        schema_version: KPI_SCHEMA_VERSION,
        interval: 0,
        hour_of_day: rng.random_range(0..24),
        rho,
        psi,
        latency_ms: (0..k).map(|_| rng.random_range(1.0..100.0)).collect(),
    }
}

fn random_labels(rng: &mut ChaCha8Rng) -> CellLabels {
    CellLabels {
        class: TputClass::from_index(rng.random_range(0..3)),
        rlf: if rng.random::<bool>() { RlfClass::Normal } else { RlfClass::Anomalous },
    }
}

fn reward_alignment() -> Outcome {
    let scenario = ScenarioConfig::default();
    let topology = build_topology(&scenario.grid, scenario.radio.tx_power_dbm).expect("topology");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    const WINDOWS: usize = 10_000;
    for i in 0..WINDOWS {
        let window = random_window(&topology, &mut rng);
        let w = RewardWeights { w1: rng.random_range(0.1..2.0), w2: rng.random_range(0.1..2.0), alpha: std::array::from_fn(|_| rng.random_range(0.0..1.5)) };
        let w = if i % 2 == 0 { RewardWeights::default() } else { w };
        for n in topology.cell_ids() {
            let labels = random_labels(&mut rng);
            let r_n = ca_reward(&window, &topology, n, &labels, &w).expect("ca reward");
            let ns = topology.neighbors(n);
            let mean = ns.iter().map(|&m| cpa_reward(&window, n, m, &labels, &w).expect("cpa reward")).sum::<f64>() / ns.len() as f64;
            worst = worst.max((r_n - mean).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-9 && secs < 10.0, format!("{WINDOWS} windows, max deviation {worst:.2e} (<= 1e-9), {secs:.2} s (< 10 s)"))
}

// ---------------------------------------------------------------- symlog

fn symlog_round_trip() -> Outcome {
    const N: usize = 1_000_000;
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    let mut odd = true;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..N {
        let x = -1e6 + 2e6 * i as f64 / (N - 1) as f64;
        let y = symlog(x);
        let back = symexp(y);
        let err = if x == 0.0 { back.abs() } else { (back - x).abs() / x.abs() };
        worst = worst.max(err);
        monotone &= y > prev;
        prev = y;
        odd &= symlog(-x) == -y;
    }
    let mut runner = TestRunner::new(PropConfig { cases: 2000, failure_persistence: None, ..PropConfig::default() });
    let props = runner
        .run(&(-1e9f64..1e9, -1e9f64..1e9), |(a, b)| {
            prop_assert_eq!(symlog(-a), -symlog(a));
            if a < b {
                prop_assert!(symlog(a) < symlog(b));
            }
            Ok(())
        })
        .is_ok();
    outcome(
        worst <= 1e-9 && monotone && odd && props,
        format!("{N} grid points, max relative error {worst:.2e} (<= 1e-9), odd {odd}, monotone {monotone}, property cases {props}"),
    )
}

// ---------------------------------------------------------------- gradients

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let outputs = [Activation::Linear, Activation::Tanh, Activation::Softmax];
    for k in 0..100 {
        let depth = rng.random_range(2..5);
        let mut sizes = vec![rng.random_range(1..6)];
        for _ in 0..depth {
            sizes.push(rng.random_range(1..7));
        }
        let out = *sizes.last().unwrap();
        let act = if out < 2 && outputs[k % 3] == Activation::Softmax { Activation::Tanh } else { outputs[k % 3] };
        let mut net: Mlp<f64> = Mlp::init(&sizes, act, k as u64).expect("mlp");
        // zero biases put dead-layer outputs exactly on a ReLU kink
        for l in net.layers_mut() {
            l.bias.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
        let b = rng.random_range(1..5);
        let x = Matrix::from_vec(b, sizes[0], (0..b * sizes[0]).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let c = Matrix::from_vec(b, out, (0..b * out).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let loss = |n: &Mlp<f64>| n.forward(&x).unwrap().data().iter().zip(c.data()).map(|(a, b)| a * b).sum::<f64>();
        let cache = net.forward_cached(&x).unwrap();
        let (grads, _) = net.backward(&cache, &c).unwrap();
        let analytic = grads.flat();
        let h = 1e-6;
        let mut idx = 0;
        for li in 0..net.layers().len() {
            let (nw, nb) = (net.layers()[li].weights.len(), net.layers()[li].bias.len());
            for j in 0..nw + nb {
                let bump = |n: &mut Mlp<f64>, d: f64| {
                    let l = &mut n.layers_mut()[li];
                    if j < nw { l.weights[j] += d } else { l.bias[j - nw] += d }
                };
                bump(&mut net, h);
                let up = loss(&net);
                bump(&mut net, -2.0 * h);
                let down = loss(&net);
                bump(&mut net, h);
                let numeric = (up - down) / (2.0 * h);
                let a = analytic[idx];
                let scale = a.abs().max(numeric.abs());
                if scale > 1e-7 {
                    worst = worst.max((a - numeric).abs() / scale);
                }
                idx += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-4 && secs < 60.0, format!("100 MLPs, max relative error {worst:.2e} (<= 1e-4), {secs:.2} s (< 60 s)"))
}

// ---------------------------------------------------------------- loss oracle

fn dense_forward(net: &Mlp<f64>, x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    for l in net.layers() {
        let mut z: Vec<f64> = (0..l.outputs).map(|o| l.bias[o] + (0..l.inputs).map(|i| l.weights[o * l.inputs + i] * v[i]).sum::<f64>()).collect();
        match l.activation {
            Activation::Relu => z.iter_mut().for_each(|a| *a = a.max(0.0)),
            Activation::Linear => {}
            Activation::Tanh => z.iter_mut().for_each(|a| *a = a.tanh()),
            Activation::Softmax => {
                let e: Vec<f64> = z.iter().map(|a| a.exp()).collect();
                let s: f64 = e.iter().sum();
                z = e.iter().map(|a| a / s).collect();
            }
        }
        v = z;
    }
    v
}

/// Straight-line loss: mean squared TD error plus the per-sample sum of
/// |h1 - symlog(cost)|, class cross-entropy and anomaly log-loss, averaged
/// over labelled samples and the three sub-critics.
fn oracle_loss(critic: &Critic, x: &Matrix<f64>, targets: &[f64], metrics: &[Option<Metrics>]) -> f64 {
    let b = x.rows();
    let mut td = 0.0;
    let mut pred = 0.0;
    let mut labelled = 0;
    for r in 0..b {
        let omega: Vec<f64> = critic.subs().iter().flat_map(|s| dense_forward(s, x.row(r))).collect();
        let q = dense_forward(critic.aggregator(), &omega)[0];
        td += (q - targets[r]).powi(2);
        if let Some(m) = metrics[r] {
            labelled += 1;
            let l1 = (omega[0] - (m.ho_cost.abs() + 1.0).ln() * m.ho_cost.signum()).abs();
            let z = &omega[1..4];
            let l2 = -(z[m.class.index()].exp() / z.iter().map(|v| v.exp()).sum::<f64>()).ln();
            let p = 1.0 / (1.0 + (-omega[4]).exp());
            let l3 = if m.rlf == RlfClass::Anomalous { -p.ln() } else { -(1.0 - p).ln() };
            pred += l1 + l2 + l3;
        }
    }
    let k = critic.subs().len() as f64;
    td / b as f64 + if labelled > 0 { pred / (k * labelled as f64) } else { 0.0 }
}

fn loss_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for i in 0..1000u64 {
        let dim = [CA_STATE_DIM + 1, CPA_STATE_DIM + 2][(i % 2) as usize];
        let critic = Critic::new(CriticKind::Compositional, dim, i).expect("critic");
        let b = rng.random_range(1..65);
        let x = Matrix::from_vec(b, dim, (0..b * dim).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let targets: Vec<f64> = (0..b).map(|_| rng.random_range(-3.0..3.0)).collect();
        let metrics: Vec<Option<Metrics>> = (0..b)
            .map(|_| {
                (rng.random::<f64>() < 0.9).then(|| Metrics {
                    ho_cost: rng.random_range(-1.0..1.0),
                    class: TputClass::from_index(rng.random_range(0..3)),
                    rlf: if rng.random::<bool>() { RlfClass::Normal } else { RlfClass::Anomalous },
                })
            })
            .collect();
        let got = compositional_loss(&critic, &x, &targets, &metrics, HeadLoss::CrossEntropy).expect("loss").loss;
        let want = oracle_loss(&critic, &x, &targets, &metrics);
        worst = worst.max((got - want).abs());
    }
    outcome(worst <= 1e-10, format!("1000 batches, max |difference| {worst:.2e} (<= 1e-10)"))
}

// ---------------------------------------------------------------- search oracle

fn search_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let w = RewardWeights::default();
    let (mut mismatches, mut size_errors, mut max_ca, mut max_cpa) = (0, 0, 0, 0);
    let sets: Vec<(PredictorSet, PredictorSet)> = (0..50u64)
        .map(|s| {
            (
                PredictorSet::new(Tier::Ca, CA_STATE_DIM, 1, PredictorConfig::default(), s).unwrap(),
                PredictorSet::new(Tier::Cpa, CPA_STATE_DIM, 2, PredictorConfig::default(), 1000 + s).unwrap(),
            )
        })
        .collect();
    for q in 0..10_000usize {
        let (ca, cpa) = &sets[q % sets.len()];
        let mode = if q % 3 == 0 { ScoreMode::Hard } else { ScoreMode::Soft };
        let (predictors, state, space, expected_len) = if q % 2 == 0 {
            let p = TTT_VALUES_MS[rng.random_range(0..TTT_VALUES_MS.len())];
            let i = ttt_index(p).unwrap() as i64;
            let expected = (i - 2).max(0)..=(i + 2).min(TTT_VALUES_MS.len() as i64 - 1);
            let state: Vec<f64> = (0..CA_STATE_DIM).map(|_| rng.random_range(0.0..40.0)).collect();
            (ca, state, delta_space_ca(p).unwrap(), expected.count())
        } else {
            let (a, b) = (rng.random_range(CIO_MIN_DB..=CIO_MAX_DB), rng.random_range(CIO_MIN_DB..=CIO_MAX_DB));
            let span = |v: i32| ((v - 2).max(CIO_MIN_DB)..=(v + 2).min(CIO_MAX_DB)).count();
            let state: Vec<f64> = (0..CPA_STATE_DIM).map(|_| rng.random_range(-24.0..40.0)).collect();
            (cpa, state, delta_space_cpa(a, b).unwrap(), span(a) * span(b))
        };
        if space.len() != expected_len {
            size_errors += 1;
        }
        if q % 2 == 0 {
            max_ca = max_ca.max(space.len());
        } else {
            max_cpa = max_cpa.max(space.len());
        }
        // brute force: score each candidate on its own, keep the first strict
        // maximum after ordering by (change, action)
        let mut order: Vec<usize> = (0..space.len()).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (&space.candidates[i], &space.candidates[j]);
            (a.change, &a.action).partial_cmp(&(b.change, &b.action)).unwrap()
        });
        let mut best = order[0];
        let mut best_score = score(predictors, &state, &space.candidates[best].action, &w, mode).unwrap();
        for &i in &order[1..] {
            let s = score(predictors, &state, &space.candidates[i].action, &w, mode).unwrap();
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        let d = select_action_cpdm(predictors, &state, &space, &w, mode, 0.0, &mut rng).unwrap();
        if d.index != best {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0 && size_errors == 0 && max_ca == 5 && max_cpa == 25,
        format!("10000 queries, {mismatches} argmax mismatches, {size_errors} candidate-set size errors, largest sets {max_ca} (CA) / {max_cpa} (CPA)"),
    )
}

// ---------------------------------------------------------------- augmentation

fn augmentation() -> Outcome {
    let metrics = (-1.0f64..1.0, 0usize..3, any::<bool>()).prop_map(|(h, c, a)| Metrics {
        ho_cost: h,
        class: TputClass::from_index(c),
        rlf: if a { RlfClass::Anomalous } else { RlfClass::Normal },
    });
    let transition = (
        prop::collection::vec(-50.0f64..50.0, CPA_STATE_DIM),
        prop::collection::vec(-24.0f64..24.0, 2),
        -3.0f64..3.0,
        prop::collection::vec(-50.0f64..50.0, CPA_STATE_DIM),
        prop::option::of(metrics.clone()),
        -3.0f64..3.0,
        prop::option::of(metrics),
    )
        .prop_map(|(state, action, reward, next_state, m, mr, mm)| Transition {
            tier: Tier::Cpa,
            state,
            action,
            reward,
            next_state,
            metrics: m,
            mirror: Some(Mirror { reward: mr, metrics: mm }),
        });
    let mut runner = TestRunner::new(PropConfig { cases: 2000, failure_persistence: None, ..PropConfig::default() });
    let buffer = std::cell::RefCell::new(ReplayBuffer::new(1_000_000, 1));
    let result = runner.run(&prop::collection::vec(transition, 1..8), |ts| {
        let mut buffer = buffer.borrow_mut();
        for t in ts {
            let before = buffer.len();
            augment_and_push(&mut buffer, t.clone());
            prop_assert_eq!(buffer.len(), before + 2);
            let (a, b) = (buffer.get(before).unwrap(), buffer.get(before + 1).unwrap());
            prop_assert_eq!(a, &t);
            prop_assert_eq!(b, &t.swapped());
            prop_assert_eq!(&b.swapped(), a);
            prop_assert_eq!(t.swapped().swapped(), t);
        }
        Ok(())
    });
    let detail = match &result {
        Ok(()) => format!("2000 cases, {} pushes, each adds 2 entries related by the swap; swap twice is identity", buffer.borrow().len() / 2),
        Err(e) => format!("property failed: {e}"),
    };
    outcome(result.is_ok(), detail)
}

// ---------------------------------------------------------------- campaign

fn campaign_config() -> ExperimentConfig {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-campaign");
    ExperimentConfig { output_dir: dir, seeds: vec![1, 2, 3, 4, 5], training_days: 12, evaluation_days: 2, ..ExperimentConfig::default() }
}

struct Campaign {
    cfg: ExperimentConfig,
    rows: Vec<KpiRow>,
    report: Option<harness::ComparisonReport>,
    summaries: BTreeMap<(Method, u64), RunSummary>,
    minutes: f64,
    error: Option<String>,
}

fn campaign() -> Campaign {
    let cfg = campaign_config();
    if std::env::var_os("SONLAB_REUSE_CAMPAIGN").is_none() {
        let _ = fs::remove_dir_all(&cfg.output_dir);
    }
    let start = Instant::now();
    let result = harness::compare(&cfg);
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    let mut summaries = BTreeMap::new();
    for m in Method::ALL {
        for &s in &cfg.seeds {
            if let Ok((summary, _)) = harness::load_run(&cfg, m, s) {
                summaries.insert((m, s), summary);
            }
        }
    }
    match result {
        Ok(report) => Campaign { cfg, rows: report.rows.clone(), report: Some(report), summaries, minutes, error: None },
        Err(e) => Campaign { cfg, rows: Vec::new(), report: None, summaries, minutes, error: Some(e.to_string()) },
    }
}

fn params(path: &Path) -> Vec<ParamRecord> {
    fs::read_to_string(path).map(|t| t.lines().map(|l| serde_json::from_str(l).expect("param record")).collect()).unwrap_or_default()
}

fn safety(c: &Campaign) -> Outcome {
    let mut audited = 0;
    let mut unsafe_audit = 0;
    let mut steps = 0;
    let mut violations = 0;
    for &seed in &c.cfg.seeds {
        let Some(s) = c.summaries.get(&(Method::Cpdm, seed)) else {
            return outcome(false, format!("CPDM seed {seed} did not complete"));
        };
        audited += s.audited_actions;
        unsafe_audit += s.unsafe_actions;
        // independent check on the executed parameter trace
        let recs = params(&c.cfg.run_dir(Method::Cpdm, seed).join("params.jsonl"));
        for p in recs.windows(2) {
            for (a, b) in p[0].ttt_ms.iter().zip(&p[1].ttt_ms) {
                steps += 1;
                if ttt_index(*a).unwrap().abs_diff(ttt_index(*b).unwrap()) > 2 {
                    violations += 1;
                }
            }
            for (a, b) in p[0].cio_db.iter().zip(&p[1].cio_db) {
                steps += 1;
                if (a - b).abs() > 2 {
                    violations += 1;
                }
            }
        }
    }
    outcome(
        unsafe_audit == 0 && violations == 0 && audited > 0,
        format!("{audited} audited decisions with {unsafe_audit} unsafe; {steps} parameter transitions with {violations} violations (5 seeds x 14 days)"),
    )
}

fn row(c: &Campaign, m: Method) -> Option<&KpiRow> {
    c.rows.iter().find(|r| r.method == m)
}

fn trend(c: &Campaign) -> Vec<Outcome> {
    let Some(report) = &c.report else {
        let e = c.error.clone().unwrap_or_default();
        return vec![outcome(false, format!("campaign failed: {e}")); 3];
    };
    let ch = &report.checks;
    let rewards: Vec<String> = [Method::Cpdm, Method::Cdrl, Method::HMadrl, Method::Madrl]
        .iter()
        .filter_map(|&m| row(c, m).map(|r| format!("{} {:.4}", m.label(), r.final_training_reward)))
        .collect();
    let tput = |m| row(c, m).map_or(f64::NAN, |r| r.dl_throughput_mbps);
    let within = c.minutes < 120.0;
    vec![
        outcome(
            ch.failure_reduction_ok && within,
            format!("CPDM HOL+HOE+HOW reduction vs DFLT {:.1}% (>= 20%), campaign {:.1} min (< 120)", 100.0 * ch.cpdm_failure_reduction, c.minutes),
        ),
        outcome(ch.reward_ordering_ok, format!("final training reward {}", rewards.join(", "))),
        outcome(ch.throughput_ok, format!("evaluation DL throughput CPDM {:.3} vs DFLT {:.3} Mbps", tput(Method::Cpdm), tput(Method::Dflt))),
    ]
}

fn predictors(c: &Campaign) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (t, tier) in ["CA", "CPA"].iter().enumerate() {
        let ms: Vec<_> = c.cfg.seeds.iter().filter_map(|&s| c.summaries.get(&(Method::Cpdm, s))?.held_out.map(|h| h[t])).collect();
        if ms.len() != c.cfg.seeds.len() {
            return outcome(false, "held-out metrics missing");
        }
        let n = ms.len() as f64;
        let avg = |f: fn(&sonlab::cpdm::PredictorMetrics) -> f64| ms.iter().map(f).sum::<f64>() / n;
        let (mae, p2, r2, p3, r3) = (avg(|m| m.h1_mae), avg(|m| m.h2_precision), avg(|m| m.h2_recall), avg(|m| m.h3_precision), avg(|m| m.h3_recall));
        pass &= mae <= 0.05 && p2 >= 0.75 && r2 >= 0.75 && p3 >= 0.85 && r3 >= 0.85;
        parts.push(format!("{tier}: h1 MAE {mae:.4}, h2 P/R {p2:.3}/{r2:.3}, h3 P/R {p3:.3}/{r3:.3}"));
    }
    outcome(pass, format!("{} (limits 0.05, 0.75, 0.85)", parts.join("; ")))
}

fn determinism(c: &Campaign) -> Outcome {
    let exe = env!("CARGO_BIN_EXE_sonlab");
    let base = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-determinism");
    let _ = fs::remove_dir_all(&base);
    let mut traces = Vec::new();
    for run in ["a", "b"] {
        let out = base.join(run);
        let status = Command::new(exe)
            .args(["train", "--method", "cpdm", "--seed", "1", "--out"])
            .arg(&out)
            .env("RUST_LOG", "warn")
            .output();
        match status {
            Ok(o) if o.status.success() => {}
            Ok(o) => return outcome(false, format!("train run {run} failed: {}", String::from_utf8_lossy(&o.stderr))),
            Err(e) => return outcome(false, format!("train run {run} failed: {e}")),
        }
        traces.push(fs::read(out.join("cpdm/seed-1/kpi_trace.jsonl")).unwrap_or_default());
    }
    let campaign_trace = fs::read(c.cfg.run_dir(Method::Cpdm, 1).join("kpi_trace.jsonl")).unwrap_or_default();
    let same = !traces[0].is_empty() && traces[0] == traces[1];
    outcome(
        same && traces[0] == campaign_trace,
        format!("two CLI runs {} ({} bytes); matches the in-process campaign run: {}", if same { "byte-identical" } else { "differ" }, traces[0].len(), traces[0] == campaign_trace),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };
    report("1 reward alignment", reward_alignment());
    report("2 symlog round trip", symlog_round_trip());
    report("3 gradient check", gradient_check());
    report("4 compositional loss oracle", loss_oracle());
    report("5 CPDM search oracle", search_oracle());
    report("7 augmentation", augmentation());
    if std::env::var_os("SONLAB_ACCEPTANCE_SKIP_CAMPAIGN").is_some() {
        println!("SKIP criteria 6, 8a-c, 9, 10: campaign disabled");
        std::process::exit(1);
    }
    let c = campaign();
    report("6 bounded-step safety", safety(&c));
    let mut t = trend(&c).into_iter();
    report("8a failure reduction", t.next().unwrap());
    report("8b reward ordering", t.next().unwrap());
    report("8c throughput", t.next().unwrap());
    report("9 predictor quality", predictors(&c));
    report("10 determinism", determinism(&c));
    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
