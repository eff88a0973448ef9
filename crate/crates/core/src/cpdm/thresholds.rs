//! Per-cell, per-hour class boundaries learnt from a reference trace.

use serde::{Deserialize, Serialize};

use crate::agents::{CellLabels, RlfClass, TputClass};
use crate::sim::kpi::{KpiWindow, RHO_DL_THROUGHPUT, RHO_RLF};
use crate::sim::CellId;

use super::CpdmError;

/// Below this many samples an hour uses the cell's pooled boundaries.
pub const MIN_SAMPLES_PER_HOUR: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub tput_p33: f64,
    pub tput_p66: f64,
    pub latency_p33: f64,
    pub latency_p66: f64,
    /// Mean + 2 sigma of the RLF count.
    pub rlf_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    /// `bounds[cell][hour]`.
    pub bounds: Vec<[Bounds; 24]>,
}

/// Linearly interpolated percentile of sorted data, `q` in `[0, 1]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn bounds_of(tput: &mut [f64], lat: &mut [f64], rlf: &[f64]) -> Bounds {
    tput.sort_by(f64::total_cmp);
    lat.sort_by(f64::total_cmp);
    let n = rlf.len() as f64;
    let mean = rlf.iter().sum::<f64>() / n;
    let sd = (rlf.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    Bounds {
        tput_p33: percentile(tput, 1.0 / 3.0),
        tput_p66: percentile(tput, 2.0 / 3.0),
        latency_p33: percentile(lat, 1.0 / 3.0),
        latency_p66: percentile(lat, 2.0 / 3.0),
        rlf_max: mean + 2.0 * sd,
    }
}

/// Builds the table from reference windows covering at least `min_days`
/// days of `intervals_per_day` intervals.
pub fn build_thresholds(reference: &[KpiWindow], intervals_per_day: usize, min_days: usize) -> Result<ThresholdTable, CpdmError> {
    if reference.len() < intervals_per_day * min_days || reference.is_empty() {
        return Err(CpdmError::InsufficientData(format!(
            "{} reference windows, need {} days of {}",
            reference.len(),
            min_days,
            intervals_per_day
        )));
    }
    let cells = reference[0].num_cells();
    if reference.iter().any(|w| w.num_cells() != cells) {
        return Err(CpdmError::InsufficientData("reference windows disagree on the cell count".into()));
    }
    let mut bounds = Vec::with_capacity(cells);
    for c in 0..cells {
        let sample = |w: &KpiWindow| (w.rho[c][RHO_DL_THROUGHPUT], w.latency_ms[c], w.rho[c][RHO_RLF]);
        let all: Vec<_> = reference.iter().map(sample).collect();
        let pooled = {
            let (mut t, mut l, r): (Vec<f64>, Vec<f64>, Vec<f64>) = split3(&all);
            bounds_of(&mut t, &mut l, &r)
        };
        let mut hours = [pooled; 24];
        for (h, slot) in hours.iter_mut().enumerate() {
            let hs: Vec<_> = reference.iter().filter(|w| usize::from(w.hour_of_day) == h).map(sample).collect();
            if hs.len() >= MIN_SAMPLES_PER_HOUR {
                let (mut t, mut l, r) = split3(&hs);
                *slot = bounds_of(&mut t, &mut l, &r);
            }
        }
        bounds.push(hours);
    }
    Ok(ThresholdTable { bounds })
}

fn split3(v: &[(f64, f64, f64)]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (v.iter().map(|x| x.0).collect(), v.iter().map(|x| x.1).collect(), v.iter().map(|x| x.2).collect())
}

/// Throughput class: above p66 good, below p33 poor; boundary values take
/// the better class and degenerate boundaries give normal.
pub fn throughput_class(b: &Bounds, tput: f64) -> TputClass {
    if b.tput_p33 >= b.tput_p66 {
        TputClass::Normal
    } else if tput >= b.tput_p66 {
        TputClass::Good
    } else if tput >= b.tput_p33 {
        TputClass::Normal
    } else {
        TputClass::Poor
    }
}

/// Latency class: lower is better, same boundary rules as throughput.
pub fn latency_class(b: &Bounds, latency: f64) -> TputClass {
    if b.latency_p33 >= b.latency_p66 {
        TputClass::Normal
    } else if latency <= b.latency_p33 {
        TputClass::Good
    } else if latency <= b.latency_p66 {
        TputClass::Normal
    } else {
        TputClass::Poor
    }
}

pub fn rlf_class(b: &Bounds, rlf: f64) -> RlfClass {
    if rlf > b.rlf_max {
        RlfClass::Anomalous
    } else {
        RlfClass::Normal
    }
}

impl ThresholdTable {
    pub fn num_cells(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self, cell: CellId, hour: u8) -> &Bounds {
        &self.bounds[cell.index()][usize::from(hour % 24)]
    }

    /// Joint class (worse of throughput and latency) and RLF flag of `cell`
    /// in `window`.
    pub fn label(&self, window: &KpiWindow, cell: CellId) -> CellLabels {
        let b = self.bounds(cell, window.hour_of_day);
        let rho = window.rho(cell);
        let class = throughput_class(b, rho[RHO_DL_THROUGHPUT]).worse(latency_class(b, window.latency_ms[cell.index()]));
        CellLabels { class, rlf: rlf_class(b, rho[RHO_RLF]) }
    }

    /// Throughput class alone, used for the throughput-anomaly rate.
    pub fn throughput_label(&self, window: &KpiWindow, cell: CellId) -> TputClass {
        throughput_class(self.bounds(cell, window.hour_of_day), window.rho(cell)[RHO_DL_THROUGHPUT])
    }

    pub fn label_all(&self, window: &KpiWindow) -> Vec<CellLabels> {
        (0..window.num_cells()).map(|c| self.label(window, CellId(c as u16))).collect()
    }
}
