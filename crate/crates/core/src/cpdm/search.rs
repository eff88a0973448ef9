//! Bounded-delta action spaces and exhaustive predicted-reward search.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{g1, g2, swap_cpa_action, swap_cpa_state, CellLabels, RewardWeights};
use crate::params::{ttt_index, CIO_MAX_DB, CIO_MIN_DB, TTT_VALUES_MS};

use super::predictors::{Prediction, PredictorSet};
use super::CpdmError;

/// Largest TTT index step and CIO step (dB) per decision.
pub const MAX_TTT_STEP: usize = 2;
pub const MAX_CIO_STEP: i32 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub action: Vec<f64>,
    /// Size of the change from the current setting (index steps or dB).
    pub change: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaActionSpace {
    pub candidates: Vec<Candidate>,
}

impl DeltaActionSpace {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// TTT values within two positions of `p` in the sorted set.
pub fn delta_space_ca(p: u32) -> Result<DeltaActionSpace, CpdmError> {
    let i = ttt_index(p).ok_or_else(|| CpdmError::Parameter(format!("TTT {p} ms not in the allowed set")))?;
    let lo = i.saturating_sub(MAX_TTT_STEP);
    let hi = (i + MAX_TTT_STEP).min(TTT_VALUES_MS.len() - 1);
    let candidates = (lo..=hi)
        .map(|j| Candidate { action: vec![f64::from(TTT_VALUES_MS[j])], change: j.abs_diff(i) as u32 })
        .collect();
    Ok(DeltaActionSpace { candidates })
}

/// All `(q_nm + d1, q_mn + d2)` for `d1, d2` in `-2..=2`, clamped into
/// range and deduplicated.
pub fn delta_space_cpa(q_nm: i32, q_mn: i32) -> Result<DeltaActionSpace, CpdmError> {
    for q in [q_nm, q_mn] {
        if !(CIO_MIN_DB..=CIO_MAX_DB).contains(&q) {
            return Err(CpdmError::Parameter(format!("CIO {q} dB out of range")));
        }
    }
    let mut seen = Vec::with_capacity(25);
    let mut candidates = Vec::with_capacity(25);
    for d1 in -MAX_CIO_STEP..=MAX_CIO_STEP {
        for d2 in -MAX_CIO_STEP..=MAX_CIO_STEP {
            let a = ((q_nm + d1).clamp(CIO_MIN_DB, CIO_MAX_DB), (q_mn + d2).clamp(CIO_MIN_DB, CIO_MAX_DB));
            if !seen.contains(&a) {
                seen.push(a);
                let change = (a.0 - q_nm).unsigned_abs() + (a.1 - q_mn).unsigned_abs();
                candidates.push(Candidate { action: vec![f64::from(a.0), f64::from(a.1)], change });
            }
        }
    }
    Ok(DeltaActionSpace { candidates })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Expected class terms under the predicted probabilities.
    #[default]
    Soft,
    /// Class terms of the most likely labels.
    Hard,
}

pub fn score_prediction(p: &Prediction, w: &RewardWeights, mode: ScoreMode) -> f64 {
    match mode {
        ScoreMode::Soft => {
            w.w1 * (1.0 - p.ho_cost.abs()) + w.w2 * (p.class_probs[0] + 0.5 * p.class_probs[1] + p.rlf_normal_prob)
        }
        ScoreMode::Hard => w.w1 * g1(p.ho_cost) + w.w2 * g2(&CellLabels { class: p.class(), rlf: p.rlf() }),
    }
}

pub fn score(predictors: &PredictorSet, state: &[f64], action: &[f64], w: &RewardWeights, mode: ScoreMode) -> Result<f64, CpdmError> {
    let p = predictors.predict(state, &[action.to_vec()])?;
    Ok(score_prediction(&p[0], w, mode))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub index: usize,
    pub action: Vec<f64>,
    pub scores: Vec<f64>,
    pub explored: bool,
}

/// Index of the best score; ties go to the smallest change, then the
/// lexicographically smallest action.
pub fn best_candidate(space: &DeltaActionSpace, scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..space.len() {
        let (a, b) = (&space.candidates[i], &space.candidates[best]);
        let better = match scores[i].total_cmp(&scores[best]) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => {
                (a.change, &a.action).partial_cmp(&(b.change, &b.action)) == Some(std::cmp::Ordering::Less)
            }
        };
        if better {
            best = i;
        }
    }
    best
}

/// Scores every candidate and returns the argmax, or with probability
/// `explore_eps` a uniformly drawn candidate.
pub fn select_action_cpdm<R: Rng>(
    predictors: &PredictorSet,
    state: &[f64],
    space: &DeltaActionSpace,
    w: &RewardWeights,
    mode: ScoreMode,
    explore_eps: f64,
    rng: &mut R,
) -> Result<Decision, CpdmError> {
    if space.is_empty() {
        return Err(CpdmError::Parameter("empty candidate set".into()));
    }
    let actions: Vec<Vec<f64>> = space.candidates.iter().map(|c| c.action.clone()).collect();
    let scores: Vec<f64> = predictors.predict(state, &actions)?.iter().map(|p| score_prediction(p, w, mode)).collect();
    Ok(decide(space, scores, explore_eps, rng))
}

/// Like [`select_action_cpdm`] for a cell pair, scoring every candidate
/// from both ends: the predicted reward of `n` plus that of `m` on the
/// swapped state and action.
pub fn select_action_cpdm_pair<R: Rng>(
    predictors: &PredictorSet,
    state: &[f64],
    space: &DeltaActionSpace,
    w: &RewardWeights,
    mode: ScoreMode,
    explore_eps: f64,
    rng: &mut R,
) -> Result<Decision, CpdmError> {
    if space.is_empty() {
        return Err(CpdmError::Parameter("empty candidate set".into()));
    }
    let actions: Vec<Vec<f64>> = space.candidates.iter().map(|c| c.action.clone()).collect();
    let swapped: Vec<Vec<f64>> = actions.iter().map(|a| swap_cpa_action(a)).collect();
    let fwd = predictors.predict(state, &actions)?;
    let rev = predictors.predict(&swap_cpa_state(state), &swapped)?;
    let scores = fwd.iter().zip(&rev).map(|(a, b)| score_prediction(a, w, mode) + score_prediction(b, w, mode)).collect();
    Ok(decide(space, scores, explore_eps, rng))
}

fn decide<R: Rng>(space: &DeltaActionSpace, scores: Vec<f64>, explore_eps: f64, rng: &mut R) -> Decision {
    let explored = explore_eps > 0.0 && rng.random::<f64>() < explore_eps;
    let index = if explored { rng.random_range(0..space.len()) } else { best_candidate(space, &scores) };
    Decision { index, action: space.candidates[index].action.clone(), scores, explored }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Tier;
    use crate::cpdm::predictors::PredictorConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ttts(s: &DeltaActionSpace) -> Vec<u32> {
        s.candidates.iter().map(|c| c.action[0] as u32).collect()
    }

    #[test]
    fn ca_windows() {
        assert_eq!(ttts(&delta_space_ca(320).unwrap()), vec![160, 256, 320, 480, 512]);
        assert_eq!(ttts(&delta_space_ca(40).unwrap()), vec![40, 64, 80]);
        assert_eq!(ttts(&delta_space_ca(5120).unwrap()), vec![1280, 2560, 5120]);
        assert!(delta_space_ca(300).is_err());
    }

    #[test]
    fn cpa_space_clamps_and_dedups() {
        assert_eq!(delta_space_cpa(0, 0).unwrap().len(), 25);
        let s = delta_space_cpa(24, 0).unwrap();
        assert_eq!(s.len(), 15);
        assert!(s.candidates.iter().all(|c| c.action[0] <= 24.0 && c.action[0] >= 22.0));
        assert_eq!(delta_space_cpa(24, -24).unwrap().len(), 9);
        assert!(delta_space_cpa(25, 0).is_err());
        assert!(delta_space_cpa(3, -7).unwrap().candidates.iter().any(|c| c.change == 0 && c.action == vec![3.0, -7.0]));
    }

    #[test]
    fn equal_scores_keep_the_current_setting() {
        let s = delta_space_cpa(1, 1).unwrap();
        let i = best_candidate(&s, &vec![0.5; s.len()]);
        assert_eq!(s.candidates[i].action, vec![1.0, 1.0]);
        let c = delta_space_ca(640).unwrap();
        assert_eq!(c.candidates[best_candidate(&c, &[1.0; 5])].action, vec![640.0]);
    }

    #[test]
    fn ties_prefer_small_changes_then_small_values() {
        let s = delta_space_ca(320).unwrap();
        // 256 and 480 tie at one step; the smaller value wins
        assert_eq!(s.candidates[best_candidate(&s, &[0.0, 1.0, 0.5, 1.0, 0.0])].action, vec![256.0]);
        assert_eq!(s.candidates[best_candidate(&s, &[2.0, 1.0, 0.5, 1.0, 2.0])].action, vec![160.0]);
    }

    #[test]
    fn score_bounds_and_monotonicity() {
        let w = RewardWeights::default();
        let best = Prediction { ho_cost: 0.0, class_probs: [1.0, 0.0, 0.0], rlf_normal_prob: 1.0, rlf_cut: 0.5 };
        assert_eq!(score_prediction(&best, &w, ScoreMode::Soft), 3.0);
        assert_eq!(score_prediction(&best, &w, ScoreMode::Hard), 3.0);
        let mut prev = f64::INFINITY;
        for h in [0.0, 0.1, 0.3, 0.7, 1.0] {
            let p = Prediction { ho_cost: -h, class_probs: [0.2, 0.5, 0.3], rlf_normal_prob: 0.6, rlf_cut: 0.5 };
            let sc = score_prediction(&p, &w, ScoreMode::Soft);
            assert!(sc < prev);
            prev = sc;
        }
        let p = Prediction { ho_cost: 0.2, class_probs: [0.2, 0.5, 0.3], rlf_normal_prob: 0.4, rlf_cut: 0.5 };
        let labels = CellLabels { class: p.class(), rlf: p.rlf() };
        assert_eq!(score_prediction(&p, &w, ScoreMode::Hard), g1(0.2) + g2(&labels));
    }

    #[test]
    fn exploration_stays_inside_the_space() {
        let p = PredictorSet::new(Tier::Cpa, 28, 2, PredictorConfig::default(), 1).unwrap();
        let s = delta_space_cpa(-23, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let d = select_action_cpdm(&p, &[1.0; 28], &s, &RewardWeights::default(), ScoreMode::Soft, 1.0, &mut rng).unwrap();
            assert!(d.explored);
            assert!((d.action[0] + 23.0).abs() <= 2.0 && (d.action[1] - 5.0).abs() <= 2.0 && d.action[0] >= -24.0);
        }
    }
}
