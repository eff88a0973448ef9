//! Two-tier (cell / cell-pair) and per-cell baseline observations, rewards
//! and action quantization.

mod observe;
mod reward;
mod transition;

pub use observe::{
    baseline_action_dim, baseline_state, baseline_state_dim, ca_state, cpa_state, g0_aggregate, swap_cpa_action,
    swap_cpa_state, CA_ACTION_DIM, CA_STATE_DIM, CPA_ACTION_DIM, CPA_STATE_DIM,
};
pub use reward::{
    ca_metrics, ca_reward, cpa_metrics, cpa_reward, g1, g2, ho_cost, ho_cost_from_ratios, pair_ho_cost, quantize_cio, quantize_ttt, CellLabels,
    RewardWeights, RlfClass, TputClass,
};
pub use transition::{read_transitions, write_transitions, Metrics, Mirror, Tier, Transition};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("cell {0} has no neighbours")]
    NoNeighbors(u16),
    #[error("({0}, {1}) is not a neighbour pair")]
    NotNeighbors(u16, u16),
    #[error("KPI window has {got} cells, topology has {expected}")]
    WindowShape { expected: usize, got: usize },
    #[error("transition log: {0}")]
    Log(String),
}
