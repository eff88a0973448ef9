//! Slot-based cellular simulator: mobility, RSRP, the TTT/CIO handover state
//! machine, radio link failures and per-interval KPI aggregation.

pub mod config;
pub mod engine;
pub mod events;
pub mod kpi;
pub mod radio;
pub mod topology;
pub mod traffic;

pub use config::ScenarioConfig;
pub use engine::{Mobility, SimSnapshot, Simulator, UserEquipment};
pub use events::{classify_ho_event, EventWindows, HoEventKind, HoRecord, MobilityEvent, SlotEvents};
pub use kpi::{aggregate_kpis, KpiWindow};
pub use radio::rsrp;
pub use topology::{build_topology, CellId, NetworkTopology, Point};
pub use traffic::traffic_pattern;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario config: {0}")]
    Config(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("KPI trace: {0}")]
    Trace(String),
}
