//! The interval loop shared by every method: a controller sees the KPI
//! window of the interval that just ended and sets the parameters for the
//! next one.

use serde::{Deserialize, Serialize};

use crate::agents::{ca_reward, AgentError, RewardWeights};
use crate::cpdm::ThresholdTable;
use crate::params::{DEFAULT_CIO_DB, DEFAULT_TTT_MS};
use crate::sim::{KpiWindow, NetworkTopology, Simulator};

pub trait Controller {
    type Error: std::error::Error + Send + Sync + 'static;

    /// `previous` is `None` before the first interval.
    fn decide(&mut self, previous: Option<&KpiWindow>, topology: &mut NetworkTopology) -> Result<(), Self::Error>;

    /// Switches between training (exploration and updates) and frozen
    /// evaluation.
    fn set_learning(&mut self, on: bool);

    /// Serialized learner state for resuming.
    fn save(&self) -> Result<serde_json::Value, Self::Error>;

    fn load(&mut self, state: serde_json::Value) -> Result<(), Self::Error>;

    /// Per-interval training log records produced since the last call.
    fn drain_log(&mut self) -> Vec<serde_json::Value> {
        Vec::new()
    }
}

/// Fixed TTT 320 ms / CIO 0 dB everywhere.
#[derive(Clone, Copy, Debug, Default)]
pub struct DefaultController;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct DefaultControllerError(String);

impl Controller for DefaultController {
    type Error = DefaultControllerError;

    fn decide(&mut self, previous: Option<&KpiWindow>, topology: &mut NetworkTopology) -> Result<(), Self::Error> {
        if previous.is_none() {
            for n in topology.cell_ids().collect::<Vec<_>>() {
                topology.set_ttt(n, DEFAULT_TTT_MS).map_err(|e| DefaultControllerError(e.to_string()))?;
            }
            for (n, m) in topology.directed_pairs() {
                topology.set_cio(n, m, DEFAULT_CIO_DB).map_err(|e| DefaultControllerError(e.to_string()))?;
            }
        }
        Ok(())
    }

    fn set_learning(&mut self, _on: bool) {}

    fn save(&self) -> Result<serde_json::Value, Self::Error> {
        Ok(serde_json::Value::Null)
    }

    fn load(&mut self, _state: serde_json::Value) -> Result<(), Self::Error> {
        Ok(())
    }
}

/// Loop position carried across calls and checkpoints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoopState {
    pub last: Option<KpiWindow>,
}

/// Runs `intervals` intervals, handing each finished window to `sink`.
pub fn run_intervals<C: Controller>(
    sim: &mut Simulator,
    controller: &mut C,
    state: &mut LoopState,
    intervals: u64,
    mut sink: impl FnMut(&KpiWindow),
) -> Result<(), C::Error> {
    for _ in 0..intervals {
        controller.decide(state.last.as_ref(), sim.topology_mut())?;
        let w = sim.run_interval();
        sink(&w);
        state.last = Some(w);
    }
    Ok(())
}

/// Network-mean CA reward of one window, the quantity plotted per interval.
pub fn mean_ca_reward(window: &KpiWindow, topology: &NetworkTopology, thresholds: &ThresholdTable, w: &RewardWeights) -> Result<f64, AgentError> {
    let labels = thresholds.label_all(window);
    let mut sum = 0.0;
    for n in topology.cell_ids() {
        sum += ca_reward(window, topology, n, &labels[n.index()], w)?;
    }
    Ok(sum / topology.num_cells() as f64)
}
