use serde::{Deserialize, Serialize};

use crate::agents::{RlfClass, TputClass};
use crate::cpdm::ThresholdTable;
use crate::sim::kpi::{PSI_ATTEMPTS, PSI_HOE, PSI_HOL, PSI_HOPP, PSI_HOW, RHO_ACTIVE_USERS, RHO_DL_THROUGHPUT};
use crate::sim::{CellId, KpiWindow};

use super::config::{ExperimentConfig, Method};
use super::run::{load_run, thresholds_from};
use super::HarnessError;

/// Evaluation KPIs of one method, for a single seed or averaged over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpiRow {
    pub method: Method,
    pub seeds: usize,
    /// User-weighted mean DL throughput per user.
    pub dl_throughput_mbps: f64,
    pub dl_latency_ms: f64,
    /// Event rates in percent of HO attempts.
    pub holr_pct: f64,
    pub hoer_pct: f64,
    pub howr_pct: f64,
    pub hoppr_pct: f64,
    /// Percent of (cell, interval) samples labelled poor / RLF-anomalous.
    /// Not reported for the reference itself.
    pub tput_anomaly_pct: Option<f64>,
    pub rlf_anomaly_pct: Option<f64>,
    /// HO attempts and late+early+wrong-cell failures, summed over seeds.
    pub ho_attempts: f64,
    pub ho_failures: f64,
    /// `100 * (1 - failures / reference failures)`.
    pub failure_reduction_pct: Option<f64>,
    /// Mean network CA reward over the last training day.
    pub final_training_reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub mean: KpiRow,
    pub per_seed: Vec<KpiRow>,
}

/// KPIs of evaluation windows. Anomaly rates need the reference
/// thresholds; pass `None` for the reference run.
pub fn evaluate_windows(method: Method, windows: &[KpiWindow], thresholds: Option<&ThresholdTable>) -> KpiRow {
    let (mut users, mut tput, mut lat) = (0.0, 0.0, 0.0);
    let mut counts = [0.0; 5];
    let (mut samples, mut poor, mut rlf) = (0usize, 0usize, 0usize);
    for w in windows {
        for (c, rho) in w.rho.iter().enumerate() {
            let u = rho[RHO_ACTIVE_USERS];
            users += u;
            tput += u * rho[RHO_DL_THROUGHPUT];
            lat += u * w.latency_ms[c];
            if let Some(t) = thresholds {
                let cell = CellId(c as u16);
                samples += 1;
                poor += usize::from(t.throughput_label(w, cell) == TputClass::Poor);
                rlf += usize::from(t.label(w, cell).rlf == RlfClass::Anomalous);
            }
        }
        for p in &w.psi {
            for (k, idx) in [PSI_ATTEMPTS, PSI_HOL, PSI_HOE, PSI_HOW, PSI_HOPP].into_iter().enumerate() {
                counts[k] += p.values[idx];
            }
        }
    }
    let pct = |x: f64| if counts[0] > 0.0 { 100.0 * x / counts[0] } else { 0.0 };
    let rate = |x: usize| 100.0 * x as f64 / samples.max(1) as f64;
    KpiRow {
        method,
        seeds: 1,
        dl_throughput_mbps: if users > 0.0 { tput / users } else { 0.0 },
        dl_latency_ms: if users > 0.0 { lat / users } else { 0.0 },
        holr_pct: pct(counts[1]),
        hoer_pct: pct(counts[2]),
        howr_pct: pct(counts[3]),
        hoppr_pct: pct(counts[4]),
        tput_anomaly_pct: thresholds.map(|_| rate(poor)),
        rlf_anomaly_pct: thresholds.map(|_| rate(rlf)),
        ho_attempts: counts[0],
        ho_failures: counts[1] + counts[2] + counts[3],
        failure_reduction_pct: None,
        final_training_reward: 0.0,
    }
}

/// `1 - failures / reference_failures`; zero reference failures give 0.
pub fn failure_reduction(failures: f64, reference_failures: f64) -> f64 {
    if reference_failures > 0.0 {
        1.0 - failures / reference_failures
    } else {
        0.0
    }
}

fn mean_row(method: Method, rows: &[KpiRow]) -> KpiRow {
    let n = rows.len() as f64;
    let avg = |f: fn(&KpiRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let avg_opt = |f: fn(&KpiRow) -> Option<f64>| rows.iter().map(f).collect::<Option<Vec<f64>>>().map(|v| v.iter().sum::<f64>() / n);
    KpiRow {
        method,
        seeds: rows.len(),
        dl_throughput_mbps: avg(|r| r.dl_throughput_mbps),
        dl_latency_ms: avg(|r| r.dl_latency_ms),
        holr_pct: avg(|r| r.holr_pct),
        hoer_pct: avg(|r| r.hoer_pct),
        howr_pct: avg(|r| r.howr_pct),
        hoppr_pct: avg(|r| r.hoppr_pct),
        tput_anomaly_pct: avg_opt(|r| r.tput_anomaly_pct),
        rlf_anomaly_pct: avg_opt(|r| r.rlf_anomaly_pct),
        ho_attempts: rows.iter().map(|r| r.ho_attempts).sum(),
        ho_failures: rows.iter().map(|r| r.ho_failures).sum(),
        failure_reduction_pct: None,
        final_training_reward: avg(|r| r.final_training_reward),
    }
}

/// Evaluation-day KPIs of completed runs of `method` over the configured
/// seeds, against the DFLT runs of the same seeds.
pub fn evaluate(cfg: &ExperimentConfig, method: Method) -> Result<KpiReport, HarnessError> {
    let n_train = cfg.training_intervals() as usize;
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    let mut reference_failures = 0.0;
    for &seed in &cfg.seeds {
        let (_, reference) = load_run(cfg, Method::Dflt, seed)?;
        let (summary, trace) = load_run(cfg, method, seed)?;
        if trace.len() < n_train + 1 {
            return Err(HarnessError::Incomplete(format!("{method} seed {seed} has no evaluation windows")));
        }
        let thresholds = thresholds_from(cfg, &reference)?;
        let th = (method != Method::Dflt).then_some(&thresholds);
        let mut row = evaluate_windows(method, &trace[n_train..], th);
        let reference_row = evaluate_windows(Method::Dflt, &reference[n_train..], None);
        row.failure_reduction_pct = Some(100.0 * failure_reduction(row.ho_failures, reference_row.ho_failures));
        row.final_training_reward = summary.final_training_reward;
        reference_failures += reference_row.ho_failures;
        per_seed.push(row);
    }
    let mut mean = mean_row(method, &per_seed);
    mean.failure_reduction_pct = Some(100.0 * failure_reduction(mean.ho_failures, reference_failures));
    Ok(KpiReport { mean, per_seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::kpi::{PairKpis, KPI_SCHEMA_VERSION, PSI_LEN, RHO_LEN};

    fn window(users: [f64; 2], tput: [f64; 2], psi: [f64; PSI_LEN]) -> KpiWindow {
        let rho = (0..2)
            .map(|c| {
                let mut r = [0.0; RHO_LEN];
                r[RHO_ACTIVE_USERS] = users[c];
                r[RHO_DL_THROUGHPUT] = tput[c];
                r
            })
            .collect();
        KpiWindow {
            schema_version: KPI_SCHEMA_VERSION,
            interval: 0,
            hour_of_day: 0,
            rho,
            psi: vec![PairKpis { source: CellId(0), target: CellId(1), values: psi }],
            latency_ms: vec![10.0, 40.0],
        }
    }

    #[test]
    fn throughput_and_latency_are_user_weighted() {
        let w = window([3.0, 1.0], [2.0, 10.0], [0.0; PSI_LEN]);
        let r = evaluate_windows(Method::Cpdm, &[w], None);
        assert!((r.dl_throughput_mbps - 4.0).abs() < 1e-12);
        assert!((r.dl_latency_ms - 17.5).abs() < 1e-12);
        assert_eq!(r.tput_anomaly_pct, None);
    }

    #[test]
    fn ho_rates_are_percent_of_attempts() {
        let a = window([1.0, 1.0], [1.0, 1.0], [20.0, 0.5, 2.0, 1.0, 3.0, 4.0]);
        let b = window([1.0, 1.0], [1.0, 1.0], [20.0, 0.5, 0.0, 1.0, 1.0, 0.0]);
        let r = evaluate_windows(Method::Cdrl, &[a, b], None);
        assert_eq!((r.holr_pct, r.hoer_pct, r.howr_pct, r.hoppr_pct), (5.0, 5.0, 10.0, 10.0));
        assert_eq!((r.ho_attempts, r.ho_failures), (40.0, 8.0));
        let none = evaluate_windows(Method::Cdrl, &[window([1.0, 1.0], [1.0, 1.0], [0.0; PSI_LEN])], None);
        assert_eq!(none.holr_pct, 0.0);
    }

    #[test]
    fn failure_reduction_edge_cases() {
        assert_eq!(failure_reduction(3.0, 4.0), 0.25);
        assert_eq!(failure_reduction(0.0, 0.0), 0.0);
        assert!(failure_reduction(8.0, 4.0) < 0.0);
    }
}
