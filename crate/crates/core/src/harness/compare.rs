use std::collections::BTreeMap;
use std::fs;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::evaluate::{evaluate, KpiRow};
use super::export::export_curves;
use super::run::run_seed;
use super::HarnessError;

/// Minimum CPDM reduction of late+early+wrong-cell failures against DFLT.
pub const MIN_FAILURE_REDUCTION: f64 = 0.20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendChecks {
    pub cpdm_failure_reduction: f64,
    pub failure_reduction_ok: bool,
    pub reward_ordering_ok: bool,
    pub throughput_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<KpiRow>,
    pub checks: TrendChecks,
}

/// CPDM > CDRL > MADRL strictly on final training reward, and
/// CDRL >= H-MADRL >= MADRL with at most one of those two relations broken.
pub fn reward_ordering_holds(r: &BTreeMap<Method, f64>) -> bool {
    let g = |m| r.get(&m).copied().unwrap_or(f64::NAN);
    let (cpdm, cdrl, h, madrl) = (g(Method::Cpdm), g(Method::Cdrl), g(Method::HMadrl), g(Method::Madrl));
    let strict = cpdm > cdrl && cdrl > madrl;
    let inversions = usize::from(!(cdrl >= h)) + usize::from(!(h >= madrl));
    strict && inversions <= 1
}

fn row(rows: &[KpiRow], m: Method) -> &KpiRow {
    rows.iter().find(|r| r.method == m).expect("every method evaluated")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "N/A".to_string(), |v| format!("{v:.4}"))
}

/// Runs (or reuses) every method on every seed, evaluates them and writes
/// `comparison.csv`, `comparison.json` and the curve exports under the
/// output directory.
pub fn compare(cfg: &ExperimentConfig) -> Result<ComparisonReport, HarnessError> {
    cfg.validate()?;
    for &seed in &cfg.seeds {
        for m in Method::ALL {
            run_seed(cfg, m, seed)?;
        }
    }
    let rows = Method::ALL.into_iter().map(|m| evaluate(cfg, m).map(|r| r.mean)).collect::<Result<Vec<_>, _>>()?;
    let rewards: BTreeMap<Method, f64> = rows.iter().map(|r| (r.method, r.final_training_reward)).collect();
    let cpdm = row(&rows, Method::Cpdm);
    let reduction = cpdm.failure_reduction_pct.unwrap_or(0.0) / 100.0;
    let checks = TrendChecks {
        cpdm_failure_reduction: reduction,
        failure_reduction_ok: reduction >= MIN_FAILURE_REDUCTION,
        reward_ordering_ok: reward_ordering_holds(&rewards),
        throughput_ok: cpdm.dl_throughput_mbps >= row(&rows, Method::Dflt).dl_throughput_mbps,
    };
    let report = ComparisonReport { rows, checks };

    fs::create_dir_all(&cfg.output_dir)?;
    let mut w = csv::Writer::from_path(cfg.output_dir.join("comparison.csv")).map_err(|e| HarnessError::Io(e.to_string()))?;
    w.write_record([
        "method", "dl_throughput_mbps", "dl_latency_ms", "holr_pct", "hoer_pct", "howr_pct", "hoppr_pct",
        "tput_anomaly_pct", "rlf_anomaly_pct", "failure_reduction_pct", "final_training_reward",
    ])
    .map_err(|e| HarnessError::Io(e.to_string()))?;
    for r in &report.rows {
        w.write_record([
            r.method.label().to_string(),
            format!("{:.4}", r.dl_throughput_mbps),
            format!("{:.4}", r.dl_latency_ms),
            format!("{:.4}", r.holr_pct),
            format!("{:.4}", r.hoer_pct),
            format!("{:.4}", r.howr_pct),
            format!("{:.4}", r.hoppr_pct),
            opt(r.tput_anomaly_pct),
            opt(r.rlf_anomaly_pct),
            opt(r.failure_reduction_pct),
            format!("{:.6}", r.final_training_reward),
        ])
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    }
    w.flush()?;
    fs::write(cfg.output_dir.join("comparison.json"), serde_json::to_string_pretty(&report)?)?;
    export_curves(cfg, &Method::ALL, &cfg.output_dir.join("curves"))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rewards(v: [f64; 4]) -> BTreeMap<Method, f64> {
        [Method::Cpdm, Method::Cdrl, Method::HMadrl, Method::Madrl].into_iter().zip(v).collect()
    }

    #[test]
    fn ordering_allows_one_inversion() {
        assert!(reward_ordering_holds(&rewards([4.0, 3.0, 2.0, 1.0])));
        // H-MADRL above CDRL
        assert!(reward_ordering_holds(&rewards([4.0, 3.0, 3.5, 1.0])));
        // H-MADRL below MADRL
        assert!(reward_ordering_holds(&rewards([4.0, 3.0, 0.5, 1.0])));
        assert!(!reward_ordering_holds(&rewards([2.0, 3.0, 2.5, 1.0])));
        assert!(!reward_ordering_holds(&rewards([4.0, 1.0, 2.0, 1.0])));
        assert!(!reward_ordering_holds(&BTreeMap::new()));
    }
}
