use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::GridConfig;
use super::SimError;
use crate::params::{is_valid_cio, is_valid_ttt, DEFAULT_CIO_DB, DEFAULT_TTT_MS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub u16);

impl CellId {
    #[inline]
    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: CellId,
    pub position: Point,
    pub tx_power_dbm: f64,
}

/// Cells, symmetric neighbour relations and the handover parameter stores:
/// one TTT per cell and one CIO per directed neighbour pair.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkTopology {
    cells: Vec<Cell>,
    neighbors: Vec<Vec<CellId>>,
    /// Lattice translations of the wrap-around cluster (empty without wrap).
    wrap_translations: Vec<Point>,
    region: Region,
    ttt_ms: Vec<u32>,
    /// Dense `cells x cells` CIO table; only neighbour entries are meaningful.
    cio_db: Vec<i32>,
    is_neighbor: Vec<bool>,
}

/// Convex scenario area: the Voronoi hexagon of the wrap lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    normals: Vec<Point>,
    half_extent: f64,
}

impl Region {
    pub fn contains(&self, p: Point) -> bool {
        self.normals.iter().all(|t| p.x * t.x + p.y * t.y <= 0.5 * (t.x * t.x + t.y * t.y) + 1e-9)
    }

    /// Maps `p` to its lattice-equivalent point inside the region.
    pub fn fold(&self, mut p: Point) -> Point {
        for _ in 0..8 {
            match self.normals.iter().find(|t| p.x * t.x + p.y * t.y > 0.5 * (t.x * t.x + t.y * t.y)) {
                Some(t) => p = Point::new(p.x - t.x, p.y - t.y),
                None => break,
            }
        }
        p
    }

    /// Half side of an axis-aligned square enclosing the region.
    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }
}

const HEX_DIRS: [(i32, i32); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];

fn axial_to_point(q: i32, r: i32, isd: f64) -> Point {
    Point::new(isd * (f64::from(q) + f64::from(r) / 2.0), isd * f64::from(r) * 3f64.sqrt() / 2.0)
}

fn rotate(p: Point, k: usize) -> Point {
    let a = std::f64::consts::FRAC_PI_3 * k as f64;
    Point::new(p.x * a.cos() - p.y * a.sin(), p.x * a.sin() + p.y * a.cos())
}

/// Builds a hexagonal layout of `rings` rings around a centre cell with all
/// parameters at their defaults (TTT 320 ms, CIO 0 dB).
pub fn build_topology(grid: &GridConfig, tx_power_dbm: f64) -> Result<NetworkTopology, SimError> {
    let isd = grid.inter_site_distance_m;
    if !(isd > 0.0) {
        return Err(SimError::Config("inter-site distance must be positive".into()));
    }
    let rings = i32::try_from(grid.rings).map_err(|_| SimError::Config("too many rings".into()))?;
    let mut axial = Vec::new();
    for q in -rings..=rings {
        for r in (-rings).max(-q - rings)..=rings.min(-q + rings) {
            axial.push((q, r));
        }
    }
    // centre first, then by ring and angle so ids are stable
    axial.sort_by(|a, b| {
        let ring = |(q, r): (i32, i32)| (q.abs() + r.abs() + (q + r).abs()) / 2;
        let ang = |(q, r): (i32, i32)| {
            let p = axial_to_point(q, r, 1.0);
            let t = p.y.atan2(p.x);
            if t < 0.0 { t + std::f64::consts::TAU } else { t }
        };
        ring(*a).cmp(&ring(*b)).then(ang(*a).total_cmp(&ang(*b)))
    });
    let n = axial.len();
    if n > usize::from(u16::MAX) {
        return Err(SimError::Config("too many cells".into()));
    }
    let cells: Vec<Cell> = axial
        .iter()
        .enumerate()
        .map(|(i, &(q, r))| Cell {
            id: CellId(i as u16),
            position: axial_to_point(q, r, isd),
            tx_power_dbm: tx_power_dbm + grid.tx_power_offsets_db.get(i).copied().unwrap_or(0.0),
        })
        .collect();

    let base = axial_to_point(2 * rings + 1, -rings, isd);
    let lattice: Vec<Point> = (0..6).map(|k| rotate(base, k)).collect();
    let wrap_translations = if grid.wrap_around { lattice.clone() } else { Vec::new() };

    let tol = 1e-6 * isd;
    let locate = |p: Point| -> Option<usize> {
        let shifts = std::iter::once(Point::new(0.0, 0.0)).chain(wrap_translations.iter().copied());
        for s in shifts {
            for (i, c) in cells.iter().enumerate() {
                if p.dist(Point::new(c.position.x + s.x, c.position.y + s.y)) < tol {
                    return Some(i);
                }
            }
        }
        None
    };

    let mut neighbors = Vec::with_capacity(n);
    for (i, &(q, r)) in axial.iter().enumerate() {
        let mut set = BTreeSet::new();
        for (dq, dr) in HEX_DIRS {
            if let Some(j) = locate(axial_to_point(q + dq, r + dr, isd)) {
                if j != i {
                    set.insert(CellId(j as u16));
                }
            }
        }
        if set.is_empty() {
            return Err(SimError::Config(format!("cell {i} would have no neighbours")));
        }
        neighbors.push(set.into_iter().collect::<Vec<_>>());
    }

    let mut is_neighbor = vec![false; n * n];
    for (i, ns) in neighbors.iter().enumerate() {
        for m in ns {
            is_neighbor[i * n + m.index()] = true;
        }
    }
    let half_extent = base.dist(Point::new(0.0, 0.0)) / 3f64.sqrt();
    Ok(NetworkTopology {
        region: Region { normals: lattice, half_extent },
        cells,
        neighbors,
        wrap_translations,
        ttt_ms: vec![DEFAULT_TTT_MS; n],
        cio_db: vec![DEFAULT_CIO_DB; n * n],
        is_neighbor,
    })
}

impl NetworkTopology {
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell_ids(&self) -> impl Iterator<Item = CellId> + '_ {
        self.cells.iter().map(|c| c.id)
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id.index()]
    }

    pub fn set_tx_power(&mut self, id: CellId, dbm: f64) {
        self.cells[id.index()].tx_power_dbm = dbm;
    }

    pub fn neighbors(&self, id: CellId) -> &[CellId] {
        &self.neighbors[id.index()]
    }

    pub fn is_neighbor(&self, n: CellId, m: CellId) -> bool {
        self.is_neighbor[n.index() * self.num_cells() + m.index()]
    }

    /// Every directed neighbour pair `(n, m)`, ordered by `n` then `m`.
    pub fn directed_pairs(&self) -> Vec<(CellId, CellId)> {
        self.cell_ids().flat_map(|n| self.neighbors(n).iter().map(move |&m| (n, m))).collect()
    }

    /// Unordered neighbour pairs as `(n, m)` with `n < m`.
    pub fn undirected_pairs(&self) -> Vec<(CellId, CellId)> {
        self.directed_pairs().into_iter().filter(|(n, m)| n < m).collect()
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn wrap_translations(&self) -> &[Point] {
        &self.wrap_translations
    }

    /// Distance from `p` to the nearest wrap image of cell `id`.
    pub fn wrapped_distance(&self, id: CellId, p: Point) -> f64 {
        let c = self.cells[id.index()].position;
        self.wrap_translations
            .iter()
            .map(|t| p.dist(Point::new(c.x + t.x, c.y + t.y)))
            .fold(p.dist(c), f64::min)
    }

    pub fn ttt(&self, n: CellId) -> u32 {
        self.ttt_ms[n.index()]
    }

    pub fn set_ttt(&mut self, n: CellId, ttt_ms: u32) -> Result<(), SimError> {
        if !is_valid_ttt(ttt_ms) {
            return Err(SimError::Parameter(format!("TTT {ttt_ms} ms not in the allowed set")));
        }
        self.ttt_ms[n.index()] = ttt_ms;
        Ok(())
    }

    pub fn cio(&self, n: CellId, m: CellId) -> i32 {
        self.cio_db[n.index() * self.num_cells() + m.index()]
    }

    pub fn set_cio(&mut self, n: CellId, m: CellId, cio_db: i32) -> Result<(), SimError> {
        if !self.is_neighbor(n, m) {
            return Err(SimError::Parameter(format!("({n}, {m}) is not a neighbour pair")));
        }
        if !is_valid_cio(cio_db) {
            return Err(SimError::Parameter(format!("CIO {cio_db} dB out of range")));
        }
        let k = self.num_cells();
        self.cio_db[n.index() * k + m.index()] = cio_db;
        Ok(())
    }

    pub fn reset_parameters(&mut self) {
        self.ttt_ms.iter_mut().for_each(|t| *t = DEFAULT_TTT_MS);
        self.cio_db.iter_mut().for_each(|c| *c = DEFAULT_CIO_DB);
    }

    /// Snapshot of the parameter stores, `(ttt per cell, cio per directed pair)`.
    pub fn parameters(&self) -> (Vec<u32>, Vec<((CellId, CellId), i32)>) {
        (self.ttt_ms.clone(), self.directed_pairs().into_iter().map(|(n, m)| ((n, m), self.cio(n, m))).collect())
    }
}
