//! Handover failure taxonomy and per-slot event tallies.

use serde::{Deserialize, Serialize};

use super::topology::CellId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoRecord {
    pub source: CellId,
    pub target: CellId,
    pub time_ms: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MobilityEvent {
    /// Successful handover.
    Handover { source: CellId, target: CellId, time_ms: u64 },
    /// Radio link failure in `cell`.
    Rlf {
        cell: CellId,
        time_ms: u64,
        /// Cell the user re-attached to.
        reattach: CellId,
        /// Strongest neighbour of `cell` at the time of failure.
        strongest_neighbor: CellId,
        /// Whether any TTT timer was running when the link failed.
        timer_active: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HoEventKind {
    Hol,
    Hoe,
    How,
    Hopp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventWindows {
    pub t_early_ms: u64,
    pub t_pp_ms: u64,
}

/// Classifies `event` given the user's most recent successful handover.
/// Returns the failure kind and the directed pair it is charged to.
pub fn classify_ho_event(
    last_ho: Option<&HoRecord>,
    event: &MobilityEvent,
    windows: EventWindows,
) -> Option<(HoEventKind, (CellId, CellId))> {
    match *event {
        MobilityEvent::Handover { source, target, time_ms } => {
            let prev = last_ho?;
            (prev.source == target
                && prev.target == source
                && time_ms.saturating_sub(prev.time_ms) < windows.t_pp_ms)
                .then_some((HoEventKind::Hopp, (prev.source, prev.target)))
        }
        MobilityEvent::Rlf { cell, time_ms, reattach, strongest_neighbor, timer_active } => {
            if let Some(prev) = last_ho {
                if prev.target == cell && time_ms.saturating_sub(prev.time_ms) < windows.t_early_ms {
                    if reattach == prev.source {
                        return Some((HoEventKind::Hoe, (prev.source, prev.target)));
                    }
                    if reattach != cell {
                        return Some((HoEventKind::How, (prev.source, prev.target)));
                    }
                }
            }
            (timer_active || reattach != cell).then_some((HoEventKind::Hol, (cell, strongest_neighbor)))
        }
    }
}

/// Per-user accounting for one slot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserSlot {
    pub user: u32,
    pub cell: CellId,
    pub dl_bits: f64,
    pub ul_bits: f64,
    pub latency_ms: f64,
    pub cqi: u8,
}

/// Tally of one slot. Pair-indexed vectors are dense `n * num_cells + m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotEvents {
    pub num_cells: usize,
    pub ho_attempts: Vec<u32>,
    pub ho_successes: Vec<u32>,
    pub hol: Vec<u32>,
    pub hoe: Vec<u32>,
    pub how: Vec<u32>,
    pub hopp: Vec<u32>,
    pub rlf: Vec<u32>,
    pub dl_prb_usage: Vec<f64>,
    pub ul_prb_usage: Vec<f64>,
    /// Queueing latency of the cell in ms.
    pub cell_latency_ms: Vec<f64>,
    pub users: Vec<UserSlot>,
}

impl SlotEvents {
    pub fn new(num_cells: usize) -> Self {
        let pairs = num_cells * num_cells;
        Self {
            num_cells,
            ho_attempts: vec![0; pairs],
            ho_successes: vec![0; pairs],
            hol: vec![0; pairs],
            hoe: vec![0; pairs],
            how: vec![0; pairs],
            hopp: vec![0; pairs],
            rlf: vec![0; num_cells],
            dl_prb_usage: vec![0.0; num_cells],
            ul_prb_usage: vec![0.0; num_cells],
            cell_latency_ms: vec![0.0; num_cells],
            users: Vec::new(),
        }
    }

    #[inline]
    pub fn pair_index(&self, n: CellId, m: CellId) -> usize {
        n.index() * self.num_cells + m.index()
    }

    pub fn record(&mut self, kind: HoEventKind, (n, m): (CellId, CellId)) {
        let i = self.pair_index(n, m);
        let v = match kind {
            HoEventKind::Hol => &mut self.hol,
            HoEventKind::Hoe => &mut self.hoe,
            HoEventKind::How => &mut self.how,
            HoEventKind::Hopp => &mut self.hopp,
        };
        v[i] += 1;
    }

    pub fn total(v: &[u32]) -> u64 {
        v.iter().map(|&x| u64::from(x)).sum()
    }
}
