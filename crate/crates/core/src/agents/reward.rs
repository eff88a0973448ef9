use serde::{Deserialize, Serialize};

use crate::params::{CIO_MAX_DB, CIO_MIN_DB, TTT_VALUES_MS};
use crate::sim::kpi::{KpiWindow, PSI_ATTEMPTS, PSI_HOE, PSI_HOL, PSI_HOPP, PSI_HOW, PSI_LEN};
use crate::sim::{CellId, NetworkTopology};

use super::transition::Metrics;
use super::AgentError;

/// Joint throughput/latency class of a cell window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TputClass {
    Good,
    Normal,
    Poor,
}

impl TputClass {
    pub const ALL: [TputClass; 3] = [TputClass::Good, TputClass::Normal, TputClass::Poor];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i.min(2)]
    }

    pub fn worse(self, other: Self) -> Self {
        self.max(other)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RlfClass {
    Normal,
    Anomalous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellLabels {
    pub class: TputClass,
    pub rlf: RlfClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub w1: f64,
    pub w2: f64,
    /// HO-cost weights for the HOL, HOE, HOW and HOPP ratios.
    pub alpha: [f64; 4],
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { w1: 1.0, w2: 1.0, alpha: [1.0, 1.0, 1.0, 0.2] }
    }
}

/// `a0*R_hol - a1*R_hoe - a2*R_how - a3*R_hopp` on ratios in `[0, 1]`.
pub fn ho_cost_from_ratios(ratios: [f64; 4], w: &RewardWeights) -> f64 {
    let r = ratios.map(|x| x.clamp(0.0, 1.0));
    let c = w.alpha[0] * r[0] - w.alpha[1] * r[1] - w.alpha[2] * r[2] - w.alpha[3] * r[3];
    c.clamp(-1.0, 1.0)
}

/// HO cost of the pair from both directions: event counts of `(n,m)` and
/// `(m,n)` over their combined attempts. No attempts gives 0.
pub fn ho_cost(psi_nm: &[f64; PSI_LEN], psi_mn: &[f64; PSI_LEN], w: &RewardWeights) -> f64 {
    let attempts = psi_nm[PSI_ATTEMPTS] + psi_mn[PSI_ATTEMPTS];
    if attempts <= 0.0 {
        return 0.0;
    }
    let ratio = |k: usize| (psi_nm[k] + psi_mn[k]) / attempts;
    ho_cost_from_ratios([ratio(PSI_HOL), ratio(PSI_HOE), ratio(PSI_HOW), ratio(PSI_HOPP)], w)
}

pub fn pair_ho_cost(window: &KpiWindow, n: CellId, m: CellId, w: &RewardWeights) -> Result<f64, AgentError> {
    let nm = window.psi(n, m).ok_or(AgentError::NotNeighbors(n.0, m.0))?;
    let mn = window.psi(m, n).ok_or(AgentError::NotNeighbors(m.0, n.0))?;
    Ok(ho_cost(nm, mn, w))
}

pub fn g1(ho_cost: f64) -> f64 {
    (1.0 - ho_cost.abs()).clamp(0.0, 1.0)
}

pub fn g2(labels: &CellLabels) -> f64 {
    let class = match labels.class {
        TputClass::Good => 1.0,
        TputClass::Normal => 0.5,
        TputClass::Poor => 0.0,
    };
    class + if labels.rlf == RlfClass::Normal { 1.0 } else { 0.0 }
}

/// Reward of the agent on pair `(n, m)`: the pair's HO-cost term plus the
/// class term of cell `n`.
pub fn cpa_reward(window: &KpiWindow, n: CellId, m: CellId, labels_n: &CellLabels, w: &RewardWeights) -> Result<f64, AgentError> {
    Ok(w.w1 * g1(pair_ho_cost(window, n, m, w)?) + w.w2 * g2(labels_n))
}

/// Reward of the agent of cell `n`: mean HO-cost term over its pairs plus
/// its class term. Equals the mean of its pairs' `cpa_reward`.
pub fn ca_reward(
    window: &KpiWindow,
    topology: &NetworkTopology,
    n: CellId,
    labels_n: &CellLabels,
    w: &RewardWeights,
) -> Result<f64, AgentError> {
    let ns = topology.neighbors(n);
    if ns.is_empty() {
        return Err(AgentError::NoNeighbors(n.0));
    }
    let mut sum = 0.0;
    for &m in ns {
        sum += g1(pair_ho_cost(window, n, m, w)?);
    }
    Ok(w.w1 * sum / ns.len() as f64 + w.w2 * g2(labels_n))
}

/// Next-window metrics of the agent on pair `(n, m)`.
pub fn cpa_metrics(window: &KpiWindow, n: CellId, m: CellId, labels_n: &CellLabels, w: &RewardWeights) -> Result<Metrics, AgentError> {
    Ok(Metrics { ho_cost: pair_ho_cost(window, n, m, w)?, class: labels_n.class, rlf: labels_n.rlf })
}

/// Next-window metrics of the agent of cell `n`; the HO-cost entry is the
/// mean `|C|` over its pairs, so that `1 - ho_cost` is its mean `g1`.
pub fn ca_metrics(
    window: &KpiWindow,
    topology: &NetworkTopology,
    n: CellId,
    labels_n: &CellLabels,
    w: &RewardWeights,
) -> Result<Metrics, AgentError> {
    let ns = topology.neighbors(n);
    if ns.is_empty() {
        return Err(AgentError::NoNeighbors(n.0));
    }
    let mut sum = 0.0;
    for &m in ns {
        sum += pair_ho_cost(window, n, m, w)?.abs();
    }
    Ok(Metrics { ho_cost: sum / ns.len() as f64, class: labels_n.class, rlf: labels_n.rlf })
}

/// Nearest TTT in the allowed set; ties go to the smaller value.
pub fn quantize_ttt(raw: f64) -> u32 {
    let mut best = TTT_VALUES_MS[0];
    let mut best_d = f64::INFINITY;
    for &v in &TTT_VALUES_MS {
        let d = (f64::from(v) - raw).abs();
        if d < best_d {
            best = v;
            best_d = d;
        }
    }
    best
}

/// Nearest integer CIO in range; ties go to the smaller value.
pub fn quantize_cio(raw: f64) -> i32 {
    let r = raw.clamp(f64::from(CIO_MIN_DB), f64::from(CIO_MAX_DB));
    let down = r.floor();
    let v = if r - down > 0.5 { down + 1.0 } else { down };
    v as i32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::cio_values;

    const GOOD: CellLabels = CellLabels { class: TputClass::Good, rlf: RlfClass::Normal };

    #[test]
    fn ho_cost_examples() {
        let w = RewardWeights::default();
        assert!((ho_cost_from_ratios([0.1, 0.0, 0.0, 0.0], &w) - 0.1).abs() < 1e-15);
        assert!(ho_cost_from_ratios([0.2, 0.1, 0.05, 0.25], &w).abs() < 1e-15);
        assert_eq!(ho_cost_from_ratios([0.0; 4], &w), 0.0);
    }

    #[test]
    fn ho_cost_counts_both_directions() {
        let w = RewardWeights::default();
        let nm = [10.0, 0.9, 2.0, 0.0, 0.0, 0.0];
        let mn = [30.0, 1.0, 0.0, 0.0, 0.0, 10.0];
        assert!((ho_cost(&nm, &mn, &w) - (2.0 / 40.0 - 0.2 * 10.0 / 40.0)).abs() < 1e-15);
        assert_eq!(ho_cost(&nm, &mn, &w), ho_cost(&mn, &nm, &w));
        assert_eq!(ho_cost(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 3.0, 0.0, 0.0, 0.0], &w), 0.0);
    }

    #[test]
    fn g_terms() {
        assert_eq!(g1(0.0), 1.0);
        assert_eq!(g1(-0.25), 0.75);
        assert_eq!(g2(&GOOD), 2.0);
        assert_eq!(g2(&CellLabels { class: TputClass::Poor, rlf: RlfClass::Anomalous }), 0.0);
        assert_eq!(g2(&CellLabels { class: TputClass::Normal, rlf: RlfClass::Normal }), 1.5);
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_ttt(300.0), 320);
        assert_eq!(quantize_ttt(52.0), 40);
        assert_eq!(quantize_ttt(1e9), 5120);
        assert_eq!(quantize_ttt(-5.0), 40);
        assert_eq!(quantize_cio(3.4), 3);
        assert_eq!(quantize_cio(2.5), 2);
        assert_eq!(quantize_cio(-2.5), -3);
        assert_eq!(quantize_cio(99.0), 24);
    }

    #[test]
    fn quantize_is_idempotent_on_members() {
        for v in TTT_VALUES_MS {
            assert_eq!(quantize_ttt(f64::from(v)), v);
        }
        for q in cio_values() {
            assert_eq!(quantize_cio(f64::from(q)), q);
        }
    }

    #[test]
    fn worse_class() {
        assert_eq!(TputClass::Good.worse(TputClass::Poor), TputClass::Poor);
        assert_eq!(TputClass::Normal.worse(TputClass::Normal), TputClass::Normal);
    }
}
