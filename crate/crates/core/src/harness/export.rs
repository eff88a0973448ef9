use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::agents::{ho_cost, RewardWeights};
use crate::sim::kpi::RHO_DL_THROUGHPUT;
use crate::sim::KpiWindow;

use super::config::{ExperimentConfig, Method};
use super::run::{load_run, REWARDS};
use super::HarnessError;

fn csv_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("csv: {e}"))
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Empirical CDF as `(value, P[X <= value])` at each distinct value.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = p,
            _ => out.push((x, p)),
        }
    }
    out
}

/// Per-(cell, interval) DL throughput.
fn throughput_samples(windows: &[KpiWindow]) -> Vec<f64> {
    windows.iter().flat_map(|w| w.rho.iter().map(|r| r[RHO_DL_THROUGHPUT])).collect()
}

/// Per-(cell, interval) mean |HO cost| over the cell's neighbours.
fn ho_cost_samples(windows: &[KpiWindow], w: &RewardWeights) -> Vec<f64> {
    let mut out = Vec::new();
    for win in windows {
        let mut acc = vec![(0.0, 0usize); win.num_cells()];
        for p in &win.psi {
            if let Some(back) = win.psi(p.target, p.source) {
                let a = &mut acc[p.source.index()];
                a.0 += ho_cost(&p.values, back, w).abs();
                a.1 += 1;
            }
        }
        out.extend(acc.into_iter().filter(|a| a.1 > 0).map(|(s, k)| s / k as f64));
    }
    out
}

fn read_rewards(path: &Path) -> Result<Vec<(u64, f64)>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|rec| rec.map_err(csv_err)).collect()
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes, for each method with completed runs, the training reward curve
/// (seed mean and std per interval) and CDFs of evaluation-day throughput
/// and |HO cost|. Returns the written files.
pub fn export_curves(cfg: &ExperimentConfig, methods: &[Method], dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir)?;
    let n_train = cfg.training_intervals() as usize;
    let mut written = Vec::new();
    for &method in methods {
        let mut curves: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        let (mut tput, mut cost) = (Vec::new(), Vec::new());
        for &seed in &cfg.seeds {
            let (_, trace) = load_run(cfg, method, seed)?;
            for (i, r) in read_rewards(&cfg.run_dir(method, seed).join(REWARDS))? {
                curves.entry(i).or_default().push(r);
            }
            let eval = &trace[n_train.min(trace.len())..];
            tput.extend(throughput_samples(eval));
            cost.extend(ho_cost_samples(eval, &cfg.reward));
        }
        let path = dir.join(format!("reward_{}.csv", method.name()));
        write_csv(
            &path,
            &["interval", "mean", "std", "seeds"],
            curves.iter().map(|(i, v)| {
                let (m, s) = mean_std(v);
                vec![i.to_string(), m.to_string(), s.to_string(), v.len().to_string()]
            }),
        )?;
        written.push(path);
        for (name, samples) in [("throughput", &tput), ("ho_cost", &cost)] {
            let path = dir.join(format!("cdf_{name}_{}.csv", method.name()));
            write_csv(&path, &["value", "cdf"], empirical_cdf(samples).into_iter().map(|(x, p)| vec![x.to_string(), p.to_string()]))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_matches_hand_values() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cdf_merges_ties_and_ends_at_one() {
        let c = empirical_cdf(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(c, vec![(1.0, 0.25), (2.0, 0.5), (3.0, 1.0)]);
        assert!(empirical_cdf(&[]).is_empty());
    }

    proptest::proptest! {
        #[test]
        fn cdf_is_monotone(xs in proptest::collection::vec(-1e3f64..1e3, 1..200)) {
            let c = empirical_cdf(&xs);
            proptest::prop_assert!(c.windows(2).all(|p| p[0].0 < p[1].0 && p[0].1 < p[1].1));
            proptest::prop_assert_eq!(c.last().unwrap().1, 1.0);
        }
    }
}
