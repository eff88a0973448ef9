//! Fifteen-minute KPI windows.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::events::SlotEvents;
use super::topology::{CellId, NetworkTopology};
use super::SimError;

pub const KPI_SCHEMA_VERSION: u32 = 1;

pub const RHO_LEN: usize = 7;
pub const PSI_LEN: usize = 6;

pub const RHO_DL_THROUGHPUT: usize = 0;
pub const RHO_UL_THROUGHPUT: usize = 1;
pub const RHO_DL_PRB: usize = 2;
pub const RHO_UL_PRB: usize = 3;
pub const RHO_ACTIVE_USERS: usize = 4;
pub const RHO_RLF: usize = 5;
pub const RHO_CQI: usize = 6;

pub const PSI_ATTEMPTS: usize = 0;
pub const PSI_SUCCESS_RATIO: usize = 1;
pub const PSI_HOL: usize = 2;
pub const PSI_HOE: usize = 3;
pub const PSI_HOW: usize = 4;
pub const PSI_HOPP: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairKpis {
    pub source: CellId,
    pub target: CellId,
    pub values: [f64; PSI_LEN],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpiWindow {
    pub schema_version: u32,
    /// Global interval index since the start of the run.
    pub interval: u64,
    pub hour_of_day: u8,
    /// Cell KPIs indexed by cell id.
    pub rho: Vec<[f64; RHO_LEN]>,
    /// Pair KPIs for every directed neighbour pair, sorted by (source, target).
    pub psi: Vec<PairKpis>,
    /// Mean user latency per cell in ms.
    pub latency_ms: Vec<f64>,
}

impl KpiWindow {
    pub fn num_cells(&self) -> usize {
        self.rho.len()
    }

    pub fn rho(&self, n: CellId) -> &[f64; RHO_LEN] {
        &self.rho[n.index()]
    }

    pub fn psi(&self, n: CellId, m: CellId) -> Option<&[f64; PSI_LEN]> {
        self.psi
            .binary_search_by(|p| (p.source, p.target).cmp(&(n, m)))
            .ok()
            .map(|i| &self.psi[i].values)
    }

    pub fn total_active_users(&self) -> f64 {
        self.rho.iter().map(|r| r[RHO_ACTIVE_USERS]).sum()
    }
}

/// Identifies the window being aggregated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowMeta {
    pub interval: u64,
    pub hour_of_day: u8,
    pub slot_ms: u64,
}

/// Running sums over the slots of one interval.
#[derive(Clone, Debug)]
pub struct IntervalAccumulator {
    num_cells: usize,
    slots: u64,
    dl_bits: Vec<f64>,
    ul_bits: Vec<f64>,
    user_slots: Vec<u64>,
    dl_prb: Vec<f64>,
    ul_prb: Vec<f64>,
    rlf: Vec<u64>,
    cqi: Vec<f64>,
    user_latency: Vec<f64>,
    cell_latency: Vec<f64>,
    attempts: Vec<u64>,
    successes: Vec<u64>,
    failures: [Vec<u64>; 4],
}

impl IntervalAccumulator {
    pub fn new(num_cells: usize) -> Self {
        let c = || vec![0.0; num_cells];
        let p = || vec![0u64; num_cells * num_cells];
        Self {
            num_cells,
            slots: 0,
            dl_bits: c(),
            ul_bits: c(),
            user_slots: vec![0; num_cells],
            dl_prb: c(),
            ul_prb: c(),
            rlf: vec![0; num_cells],
            cqi: c(),
            user_latency: c(),
            cell_latency: c(),
            attempts: p(),
            successes: p(),
            failures: [p(), p(), p(), p()],
        }
    }

    pub fn add(&mut self, e: &SlotEvents) {
        debug_assert_eq!(e.num_cells, self.num_cells);
        self.slots += 1;
        for u in &e.users {
            let c = u.cell.index();
            self.dl_bits[c] += u.dl_bits;
            self.ul_bits[c] += u.ul_bits;
            self.user_slots[c] += 1;
            self.cqi[c] += f64::from(u.cqi);
            self.user_latency[c] += u.latency_ms;
        }
        for c in 0..self.num_cells {
            self.dl_prb[c] += e.dl_prb_usage[c];
            self.ul_prb[c] += e.ul_prb_usage[c];
            self.cell_latency[c] += e.cell_latency_ms[c];
            self.rlf[c] += u64::from(e.rlf[c]);
        }
        let add = |dst: &mut [u64], src: &[u32]| dst.iter_mut().zip(src).for_each(|(d, &s)| *d += u64::from(s));
        add(&mut self.attempts, &e.ho_attempts);
        add(&mut self.successes, &e.ho_successes);
        add(&mut self.failures[0], &e.hol);
        add(&mut self.failures[1], &e.hoe);
        add(&mut self.failures[2], &e.how);
        add(&mut self.failures[3], &e.hopp);
    }

    pub fn finish(&self, topology: &NetworkTopology, meta: WindowMeta) -> KpiWindow {
        let k = self.num_cells;
        let slot_s = meta.slot_ms as f64 / 1000.0;
        let slots = self.slots.max(1) as f64;
        let mut rho = Vec::with_capacity(k);
        let mut latency_ms = Vec::with_capacity(k);
        for c in 0..k {
            let us = self.user_slots[c] as f64;
            let per_user = |bits: f64| if us > 0.0 { bits / us / slot_s / 1e6 } else { 0.0 };
            rho.push([
                per_user(self.dl_bits[c]),
                per_user(self.ul_bits[c]),
                self.dl_prb[c] / slots,
                self.ul_prb[c] / slots,
                us / slots,
                self.rlf[c] as f64,
                if us > 0.0 { self.cqi[c] / us } else { 1.0 },
            ]);
            latency_ms.push(if us > 0.0 { self.user_latency[c] / us } else { self.cell_latency[c] / slots });
        }
        let psi = topology
            .directed_pairs()
            .into_iter()
            .map(|(n, m)| {
                let i = n.index() * k + m.index();
                let att = self.attempts[i];
                let ratio = if att == 0 { 1.0 } else { self.successes[i] as f64 / att as f64 };
                PairKpis {
                    source: n,
                    target: m,
                    values: [
                        att as f64,
                        ratio,
                        self.failures[0][i] as f64,
                        self.failures[1][i] as f64,
                        self.failures[2][i] as f64,
                        self.failures[3][i] as f64,
                    ],
                }
            })
            .collect();
        KpiWindow { schema_version: KPI_SCHEMA_VERSION, interval: meta.interval, hour_of_day: meta.hour_of_day, rho, psi, latency_ms }
    }
}

/// Aggregates the slots of one interval into a KPI window.
pub fn aggregate_kpis(events: &[SlotEvents], topology: &NetworkTopology, meta: WindowMeta) -> KpiWindow {
    let mut acc = IntervalAccumulator::new(topology.num_cells());
    events.iter().for_each(|e| acc.add(e));
    acc.finish(topology, meta)
}

pub fn write_jsonl<W: Write>(mut w: W, windows: &[KpiWindow]) -> std::io::Result<()> {
    for win in windows {
        serde_json::to_writer(&mut w, win)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<KpiWindow>, SimError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| SimError::Trace(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let w: KpiWindow = serde_json::from_str(&line).map_err(|e| SimError::Trace(format!("line {}: {e}", i + 1)))?;
        if w.schema_version != KPI_SCHEMA_VERSION {
            return Err(SimError::Trace(format!("line {}: unsupported schema version {}", i + 1, w.schema_version)));
        }
        out.push(w);
    }
    Ok(out)
}
