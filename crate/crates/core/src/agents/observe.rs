use crate::sim::kpi::{KpiWindow, PSI_LEN, RHO_LEN};
use crate::sim::{CellId, NetworkTopology};

use super::AgentError;

pub const CA_STATE_DIM: usize = RHO_LEN + PSI_LEN;
pub const CA_ACTION_DIM: usize = 1;
pub const CPA_STATE_DIM: usize = 2 * (1 + RHO_LEN + PSI_LEN);
pub const CPA_ACTION_DIM: usize = 2;

pub fn baseline_state_dim(num_neighbors: usize) -> usize {
    RHO_LEN + 2 * num_neighbors * PSI_LEN
}

pub fn baseline_action_dim(num_neighbors: usize) -> usize {
    1 + num_neighbors
}

/// Component-wise mean of the pair KPI vectors of one cell.
pub fn g0_aggregate<'a>(cell: CellId, psis: impl IntoIterator<Item = &'a [f64; PSI_LEN]>) -> Result<[f64; PSI_LEN], AgentError> {
    let mut sum = [0.0; PSI_LEN];
    let mut k = 0usize;
    for p in psis {
        sum.iter_mut().zip(p).for_each(|(s, v)| *s += v);
        k += 1;
    }
    if k == 0 {
        return Err(AgentError::NoNeighbors(cell.0));
    }
    Ok(sum.map(|s| s / k as f64))
}

fn check(window: &KpiWindow, topology: &NetworkTopology) -> Result<(), AgentError> {
    if window.num_cells() != topology.num_cells() {
        return Err(AgentError::WindowShape { expected: topology.num_cells(), got: window.num_cells() });
    }
    Ok(())
}

fn psi(window: &KpiWindow, n: CellId, m: CellId) -> Result<&[f64; PSI_LEN], AgentError> {
    window.psi(n, m).ok_or(AgentError::NotNeighbors(n.0, m.0))
}

/// `[rho_n, g0(psi_n)]`.
pub fn ca_state(window: &KpiWindow, topology: &NetworkTopology, n: CellId) -> Result<Vec<f64>, AgentError> {
    check(window, topology)?;
    let psis = topology.neighbors(n).iter().map(|&m| psi(window, n, m)).collect::<Result<Vec<_>, _>>()?;
    let mut s = Vec::with_capacity(CA_STATE_DIM);
    s.extend_from_slice(window.rho(n));
    s.extend_from_slice(&g0_aggregate(n, psis)?);
    Ok(s)
}

/// `[p_n, p_m, rho_n, rho_m, psi_nm, psi_mn]` with the TTTs currently set.
pub fn cpa_state(window: &KpiWindow, topology: &NetworkTopology, n: CellId, m: CellId) -> Result<Vec<f64>, AgentError> {
    check(window, topology)?;
    let mut s = Vec::with_capacity(CPA_STATE_DIM);
    s.push(f64::from(topology.ttt(n)));
    s.push(f64::from(topology.ttt(m)));
    s.extend_from_slice(window.rho(n));
    s.extend_from_slice(window.rho(m));
    s.extend_from_slice(psi(window, n, m)?);
    s.extend_from_slice(psi(window, m, n)?);
    Ok(s)
}

/// `[rho_n, (psi_nm, psi_mn) for each neighbour m]`.
pub fn baseline_state(window: &KpiWindow, topology: &NetworkTopology, n: CellId) -> Result<Vec<f64>, AgentError> {
    check(window, topology)?;
    let ns = topology.neighbors(n);
    let mut s = Vec::with_capacity(baseline_state_dim(ns.len()));
    s.extend_from_slice(window.rho(n));
    for &m in ns {
        s.extend_from_slice(psi(window, n, m)?);
        s.extend_from_slice(psi(window, m, n)?);
    }
    Ok(s)
}

/// Swaps the roles of `n` and `m` in a CPA state.
pub fn swap_cpa_state(s: &[f64]) -> Vec<f64> {
    assert_eq!(s.len(), CPA_STATE_DIM, "CPA state width");
    let (p, rest) = s.split_at(2);
    let (rho, psi) = rest.split_at(2 * RHO_LEN);
    let mut out = Vec::with_capacity(CPA_STATE_DIM);
    out.extend_from_slice(&[p[1], p[0]]);
    out.extend_from_slice(&rho[RHO_LEN..]);
    out.extend_from_slice(&rho[..RHO_LEN]);
    out.extend_from_slice(&psi[PSI_LEN..]);
    out.extend_from_slice(&psi[..PSI_LEN]);
    out
}

pub fn swap_cpa_action(a: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), CPA_ACTION_DIM, "CPA action width");
    vec![a[1], a[0]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::GridConfig;
    use crate::sim::kpi::{PairKpis, KPI_SCHEMA_VERSION};
    use crate::sim::build_topology;

    fn window(t: &NetworkTopology) -> KpiWindow {
        KpiWindow {
            schema_version: KPI_SCHEMA_VERSION,
            interval: 0,
            hour_of_day: 0,
            rho: (0..t.num_cells()).map(|c| [c as f64; RHO_LEN]).collect(),
            psi: t
                .directed_pairs()
                .into_iter()
                .map(|(n, m)| PairKpis { source: n, target: m, values: [(10 * n.0 + m.0) as f64; PSI_LEN] })
                .collect(),
            latency_ms: vec![5.0; t.num_cells()],
        }
    }

    #[test]
    fn g0_examples() {
        let a = [2.0, 1.0, 0.0, 0.0, 0.0, 4.0];
        let b = [4.0, 0.5, 2.0, 0.0, 0.0, 0.0];
        assert_eq!(g0_aggregate(CellId(0), [&a, &b]).unwrap(), [3.0, 0.75, 1.0, 0.0, 0.0, 2.0]);
        assert_eq!(g0_aggregate(CellId(0), [&a]).unwrap(), a);
        assert_eq!(g0_aggregate(CellId(0), [&b, &a]).unwrap(), g0_aggregate(CellId(0), [&a, &b]).unwrap());
        assert!(g0_aggregate(CellId(0), std::iter::empty()).is_err());
    }

    #[test]
    fn dimensions_follow_the_table() {
        for rings in [1, 2] {
            let t = build_topology(&GridConfig { rings, ..GridConfig::default() }, 15.0).unwrap();
            let w = window(&t);
            for n in t.cell_ids() {
                assert_eq!(ca_state(&w, &t, n).unwrap().len(), 13);
                let nn = t.neighbors(n).len();
                assert_eq!(baseline_state(&w, &t, n).unwrap().len(), 7 + 12 * nn);
                assert_eq!(baseline_action_dim(nn), 1 + nn);
                for &m in t.neighbors(n) {
                    assert_eq!(cpa_state(&w, &t, n, m).unwrap().len(), 28);
                }
            }
        }
    }

    #[test]
    fn swapped_state_is_the_mirror_pair() {
        let t = build_topology(&GridConfig::default(), 15.0).unwrap();
        let mut t2 = t.clone();
        t2.set_ttt(CellId(1), 640).unwrap();
        let w = window(&t2);
        let s = cpa_state(&w, &t2, CellId(1), CellId(2)).unwrap();
        let mirror = cpa_state(&w, &t2, CellId(2), CellId(1)).unwrap();
        assert_eq!(swap_cpa_state(&s), mirror);
        assert_eq!(swap_cpa_state(&swap_cpa_state(&s)), s);
        assert_eq!(swap_cpa_action(&[3.0, -2.0]), vec![-2.0, 3.0]);
    }

    #[test]
    fn non_neighbour_pair_is_rejected() {
        let t = build_topology(&GridConfig { rings: 2, ..GridConfig::default() }, 15.0).unwrap();
        let w = window(&t);
        let far = t.cell_ids().find(|&m| m != CellId(7) && !t.is_neighbor(CellId(7), m)).unwrap();
        assert!(cpa_state(&w, &t, CellId(7), far).is_err());
    }
}
