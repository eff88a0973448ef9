use serde::{Deserialize, Serialize};

use super::SimError;

/// Scenario description, loadable from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub grid: GridConfig,
    pub radio: RadioConfig,
    pub mobility: MobilityConfig,
    pub traffic: TrafficConfig,
    pub timing: TimingConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Rings of hexagonal cells around the centre cell.
    pub rings: u32,
    pub inter_site_distance_m: f64,
    pub wrap_around: bool,
    /// Per-cell transmit power offsets in dB, indexed by cell id; missing
    /// entries are 0.
    pub tx_power_offsets_db: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    /// Reference-signal transmit power per resource element.
    pub tx_power_dbm: f64,
    /// Path loss at 1 m.
    pub path_loss_ref_db: f64,
    pub path_loss_exponent: f64,
    pub shadowing_sigma_db: f64,
    /// Grid spacing of the independent shadowing draws; values between grid
    /// points are bilinearly interpolated.
    pub shadowing_tile_m: f64,
    /// Resolution of the precomputed RSRP map used by the slot loop.
    pub map_resolution_m: f64,
    pub noise_dbm: f64,
    /// Outage threshold on serving-cell RSRP.
    pub q_out_dbm: f64,
    pub bandwidth_mhz: f64,
    pub prbs: u32,
    pub max_spectral_efficiency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hotspot {
    pub cell: u16,
    pub radius_m: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilityConfig {
    pub max_users: usize,
    pub pedestrian_speed_mps: (f64, f64),
    pub vehicle_speed_mps: (f64, f64),
    pub vehicle_fraction: f64,
    pub max_pause_s: f64,
    /// Probability that a new waypoint is drawn inside a hotspot.
    pub hotspot_probability: f64,
    pub hotspots: Vec<Hotspot>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub busy_hours: Vec<u8>,
    pub dl_demand_mbps: f64,
    pub ul_scale: f64,
    pub base_latency_ms: f64,
    pub latency_max_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub slot_ms: u64,
    /// Measurement / handover-evaluation steps per slot.
    pub steps_per_slot: u32,
    pub slots_per_interval: u32,
    pub intervals_per_hour: u32,
    /// Consecutive measurement steps below Q_out that declare an RLF.
    pub t_rlf_steps: u32,
    pub t_early_ms: u64,
    pub t_pp_ms: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            grid: GridConfig::default(),
            radio: RadioConfig::default(),
            mobility: MobilityConfig::default(),
            traffic: TrafficConfig::default(),
            timing: TimingConfig::default(),
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { rings: 1, inter_site_distance_m: 500.0, wrap_around: true, tx_power_offsets_db: Vec::new() }
    }
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            tx_power_dbm: 15.0,
            path_loss_ref_db: 33.0,
            path_loss_exponent: 3.5,
            shadowing_sigma_db: 6.0,
            shadowing_tile_m: 25.0,
            map_resolution_m: 5.0,
            noise_dbm: -125.0,
            q_out_dbm: -110.0,
            bandwidth_mhz: 20.0,
            prbs: 100,
            max_spectral_efficiency: 5.55,
        }
    }
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            max_users: 56,
            pedestrian_speed_mps: (0.8, 2.0),
            vehicle_speed_mps: (8.0, 20.0),
            vehicle_fraction: 0.4,
            max_pause_s: 30.0,
            hotspot_probability: 0.5,
            hotspots: vec![
                Hotspot { cell: 1, radius_m: 150.0, weight: 2.0 },
                Hotspot { cell: 4, radius_m: 200.0, weight: 1.0 },
            ],
        }
    }
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self { busy_hours: vec![9, 18], dl_demand_mbps: 4.0, ul_scale: 0.3, base_latency_ms: 5.0, latency_max_ms: 100.0 }
    }
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            slot_ms: 1000,
            steps_per_slot: 10,
            slots_per_interval: 900,
            intervals_per_hour: 4,
            t_rlf_steps: 10,
            t_early_ms: 5_000,
            t_pp_ms: 10_000,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn intervals_per_day(&self) -> u32 {
        self.timing.intervals_per_hour * 24
    }

    pub fn step_ms(&self) -> u64 {
        self.timing.slot_ms / u64::from(self.timing.steps_per_slot.max(1))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if !(self.grid.inter_site_distance_m > 0.0) {
            return bad("inter_site_distance_m must be positive");
        }
        if self.timing.steps_per_slot == 0 || self.timing.slots_per_interval == 0 || self.timing.intervals_per_hour == 0 {
            return bad("timing counts must be positive");
        }
        if self.timing.slot_ms % u64::from(self.timing.steps_per_slot) != 0 {
            return bad("slot_ms must be divisible by steps_per_slot");
        }
        if self.timing.t_rlf_steps == 0 {
            return bad("t_rlf_steps must be positive");
        }
        if !(self.radio.map_resolution_m > 0.0) || !(self.radio.shadowing_tile_m > 0.0) {
            return bad("map resolution and shadowing tile must be positive");
        }
        if self.radio.prbs == 0 || !(self.radio.bandwidth_mhz > 0.0) {
            return bad("bandwidth and PRB count must be positive");
        }
        if self.mobility.max_users == 0 {
            return bad("max_users must be positive");
        }
        if self.traffic.latency_max_ms < self.traffic.base_latency_ms {
            return bad("latency_max_ms below base_latency_ms");
        }
        if self.traffic.busy_hours.iter().any(|&h| h > 23) {
            return bad("busy hours must be in 0..=23");
        }
        Ok(())
    }
}
