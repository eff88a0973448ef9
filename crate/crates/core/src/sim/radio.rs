//! Log-distance path loss with spatially interpolated log-normal shadowing.

use super::config::RadioConfig;
use super::topology::{CellId, NetworkTopology, Point};

/// Deterministic shadowing field: one N(0, sigma^2) draw per (cell, grid
/// point), bilinearly interpolated between grid points. Draws are a pure
/// hash of (seed, cell, grid point) so query order never matters.
#[derive(Clone, Debug, PartialEq)]
pub struct Shadowing {
    seed: u64,
    sigma_db: f64,
    tile_m: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

impl Shadowing {
    pub fn new(seed: u64, sigma_db: f64, tile_m: f64) -> Self {
        Self { seed, sigma_db, tile_m }
    }

    fn draw(&self, cell: CellId, ix: i64, iy: i64) -> f64 {
        let h = splitmix64(
            self.seed
                ^ splitmix64(u64::from(cell.0).wrapping_mul(0xA24B_AED4_963E_E407))
                ^ splitmix64((ix as u64).wrapping_mul(0x9FB2_1C65_1E98_DF25))
                ^ (iy as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93),
        );
        let (u1, u2) = (unit(h), unit(splitmix64(h)));
        self.sigma_db * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn value(&self, cell: CellId, p: Point) -> f64 {
        if self.sigma_db == 0.0 {
            return 0.0;
        }
        let (gx, gy) = (p.x / self.tile_m, p.y / self.tile_m);
        let (x0, y0) = (gx.floor(), gy.floor());
        let (fx, fy) = (gx - x0, gy - y0);
        let (ix, iy) = (x0 as i64, y0 as i64);
        let s00 = self.draw(cell, ix, iy);
        let s10 = self.draw(cell, ix + 1, iy);
        let s01 = self.draw(cell, ix, iy + 1);
        let s11 = self.draw(cell, ix + 1, iy + 1);
        (s00 * (1.0 - fx) + s10 * fx) * (1.0 - fy) + (s01 * (1.0 - fx) + s11 * fx) * fy
    }
}

/// Path loss in dB at distance `d` (clamped to 1 m).
pub fn path_loss_db(radio: &RadioConfig, d: f64) -> f64 {
    radio.path_loss_ref_db + 10.0 * radio.path_loss_exponent * d.max(1.0).log10()
}

/// RSRP of `cell` at `p` in dBm, using the wrap-around distance.
pub fn rsrp(topology: &NetworkTopology, radio: &RadioConfig, shadowing: &Shadowing, cell: CellId, p: Point) -> f64 {
    let d = topology.wrapped_distance(cell, p);
    topology.cell(cell).tx_power_dbm - path_loss_db(radio, d) - shadowing.value(cell, p)
}

#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// RSRP of every cell precomputed on a square grid covering the scenario.
#[derive(Clone, Debug)]
pub struct RadioMap {
    origin: f64,
    resolution: f64,
    nx: usize,
    cells: usize,
    rsrp_dbm: Vec<f32>,
    rsrp_mw: Vec<f32>,
}

impl RadioMap {
    pub fn build(topology: &NetworkTopology, radio: &RadioConfig, shadowing: &Shadowing) -> Self {
        let half = topology.region().half_extent() + radio.map_resolution_m;
        let nx = (2.0 * half / radio.map_resolution_m).ceil() as usize + 1;
        let cells = topology.num_cells();
        let mut rsrp_dbm = Vec::with_capacity(nx * nx * cells);
        for iy in 0..nx {
            for ix in 0..nx {
                let p = Point::new(-half + (ix as f64 + 0.5) * radio.map_resolution_m, -half + (iy as f64 + 0.5) * radio.map_resolution_m);
                for c in topology.cell_ids() {
                    rsrp_dbm.push(rsrp(topology, radio, shadowing, c, p) as f32);
                }
            }
        }
        let rsrp_mw = rsrp_dbm.iter().map(|&v| db_to_lin(f64::from(v)) as f32).collect();
        Self { origin: -half, resolution: radio.map_resolution_m, nx, cells, rsrp_dbm, rsrp_mw }
    }

    #[inline]
    pub fn tile(&self, p: Point) -> usize {
        let ix = (((p.x - self.origin) / self.resolution) as usize).min(self.nx - 1);
        let iy = (((p.y - self.origin) / self.resolution) as usize).min(self.nx - 1);
        iy * self.nx + ix
    }

    /// RSRP (dBm) of all cells at tile `t`, indexed by cell id.
    #[inline]
    pub fn rsrp_dbm(&self, t: usize) -> &[f32] {
        &self.rsrp_dbm[t * self.cells..(t + 1) * self.cells]
    }

    #[inline]
    pub fn rsrp_mw(&self, t: usize) -> &[f32] {
        &self.rsrp_mw[t * self.cells..(t + 1) * self.cells]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::GridConfig;
    use crate::sim::topology::build_topology;

    fn setup(sigma: f64) -> (NetworkTopology, RadioConfig, Shadowing) {
        let radio = RadioConfig { shadowing_sigma_db: sigma, ..RadioConfig::default() };
        let topo = build_topology(&GridConfig::default(), radio.tx_power_dbm).unwrap();
        let sh = Shadowing::new(42, sigma, radio.shadowing_tile_m);
        (topo, radio, sh)
    }

    #[test]
    fn repeated_queries_are_identical() {
        let (t, r, s) = setup(6.0);
        let p = Point::new(123.4, -56.7);
        let a = rsrp(&t, &r, &s, CellId(3), p);
        let s2 = Shadowing::new(42, 6.0, r.shadowing_tile_m);
        assert_eq!(a, rsrp(&t, &r, &s2, CellId(3), p));
        assert_eq!(a, rsrp(&t, &r, &s, CellId(3), p));
    }

    #[test]
    fn doubling_distance_drops_by_log_distance_law() {
        let (t, mut r, s) = setup(0.0);
        r.path_loss_exponent = 3.5;
        let c = t.cell(CellId(0)).position;
        let a = rsrp(&t, &r, &s, CellId(0), Point::new(c.x + 100.0, c.y));
        let b = rsrp(&t, &r, &s, CellId(0), Point::new(c.x + 200.0, c.y));
        assert!((a - b - 35.0 * 2f64.log10()).abs() < 1e-9);
        assert!((a - b - 10.54).abs() < 0.01);
    }

    #[test]
    fn tx_power_offset_is_additive() {
        let (mut t, r, s) = setup(6.0);
        let pts = [Point::new(10.0, 20.0), Point::new(-300.0, 150.0), Point::new(400.0, -10.0)];
        let before: Vec<f64> = pts.iter().map(|&p| rsrp(&t, &r, &s, CellId(2), p)).collect();
        let tx = t.cell(CellId(2)).tx_power_dbm;
        t.set_tx_power(CellId(2), tx + 3.0);
        for (p, b) in pts.iter().zip(before) {
            assert!((rsrp(&t, &r, &s, CellId(2), *p) - b - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_distance_is_clamped() {
        let (t, r, s) = setup(0.0);
        let c = t.cell(CellId(0)).position;
        assert_eq!(rsrp(&t, &r, &s, CellId(0), c), r.tx_power_dbm - r.path_loss_ref_db);
    }

    #[test]
    fn shadowing_statistics_match_sigma() {
        let s = Shadowing::new(7, 6.0, 1.0);
        let vals: Vec<f64> = (0..4000).map(|i| s.value(CellId(0), Point::new(i as f64, 0.0))).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        assert!(mean.abs() < 0.5, "{mean}");
        assert!((sd - 6.0).abs() < 0.5, "{sd}");
    }

    #[test]
    fn map_agrees_with_exact_model_at_tile_centres() {
        let (t, r, s) = setup(6.0);
        let map = RadioMap::build(&t, &r, &s);
        let half = t.region().half_extent() + r.map_resolution_m;
        let p = Point::new(-half + 40.5 * r.map_resolution_m, -half + 77.5 * r.map_resolution_m);
        let row = map.rsrp_dbm(map.tile(p));
        for c in t.cell_ids() {
            assert!((f64::from(row[c.index()]) - rsrp(&t, &r, &s, c, p)).abs() < 1e-3);
        }
    }
}
