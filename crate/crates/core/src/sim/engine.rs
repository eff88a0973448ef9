//! The slot loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{MobilityConfig, ScenarioConfig};
use super::events::{classify_ho_event, EventWindows, HoRecord, MobilityEvent, SlotEvents, UserSlot};
use super::kpi::{IntervalAccumulator, KpiWindow, WindowMeta};
use super::radio::{db_to_lin, RadioMap, Shadowing};
use super::topology::{build_topology, CellId, NetworkTopology, Point, Region};
use super::traffic::traffic_pattern;
use super::SimError;

const CQI_LEVELS: f64 = 15.0;
const CQI_MIN_DB: f64 = -6.0;
const CQI_MAX_DB: f64 = 22.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Mobility {
    /// Random waypoint: walk to `target` at `speed_mps`, then pause.
    Waypoint { target: Point, speed_mps: f64, pause_s: f64 },
    /// Constant velocity, folded back into the region at its edge.
    Linear { velocity: Point },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserEquipment {
    pub id: u32,
    pub position: Point,
    pub mobility: Mobility,
    pub vehicle: bool,
    pub active: bool,
    pub serving: CellId,
    /// Elapsed ms the HO criterion has held, indexed by cell id; non-zero only
    /// for neighbours of the serving cell.
    pub ttt_timers: Vec<u32>,
    pub last_ho: Option<HoRecord>,
    /// Consecutive measurement steps with serving RSRP below Q_out.
    pub rlf_counter: u32,
}

impl UserEquipment {
    pub fn new(id: u32, position: Point, mobility: Mobility, num_cells: usize) -> Self {
        Self {
            id,
            position,
            mobility,
            vehicle: false,
            active: false,
            serving: CellId(0),
            ttt_timers: vec![0; num_cells],
            last_ho: None,
            rlf_counter: 0,
        }
    }

    pub fn ttt_timer(&self, m: CellId) -> u32 {
        self.ttt_timers[m.index()]
    }

    fn reset_link_state(&mut self) {
        self.ttt_timers.iter_mut().for_each(|t| *t = 0);
        self.last_ho = None;
        self.rlf_counter = 0;
    }
}

fn argmax(v: impl Iterator<Item = (CellId, f32)>) -> CellId {
    v.fold((CellId(0), f32::NEG_INFINITY), |best, (c, x)| if x > best.1 { (c, x) } else { best }).0
}

fn random_point(rng: &mut ChaCha8Rng, region: &Region) -> Point {
    let h = region.half_extent();
    loop {
        let p = Point::new(rng.random_range(-h..h), rng.random_range(-h..h));
        if region.contains(p) {
            return p;
        }
    }
}

fn draw_waypoint(rng: &mut ChaCha8Rng, cfg: &MobilityConfig, topology: &NetworkTopology) -> Point {
    let total: f64 = cfg.hotspots.iter().map(|h| h.weight).sum();
    if total > 0.0 && rng.random::<f64>() < cfg.hotspot_probability {
        let mut pick = rng.random::<f64>() * total;
        let spot = cfg
            .hotspots
            .iter()
            .find(|h| {
                pick -= h.weight;
                pick < 0.0
            })
            .unwrap_or(&cfg.hotspots[cfg.hotspots.len() - 1]);
        let centre = topology.cell(CellId(spot.cell)).position;
        for _ in 0..64 {
            let r = spot.radius_m * rng.random::<f64>().sqrt();
            let a = rng.random::<f64>() * std::f64::consts::TAU;
            let p = Point::new(centre.x + r * a.cos(), centre.y + r * a.sin());
            if topology.region().contains(p) {
                return p;
            }
        }
    }
    random_point(rng, topology.region())
}

fn draw_speed(rng: &mut ChaCha8Rng, cfg: &MobilityConfig, vehicle: bool) -> f64 {
    let (lo, hi) = if vehicle { cfg.vehicle_speed_mps } else { cfg.pedestrian_speed_mps };
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn move_user(u: &mut UserEquipment, dt: f64, rng: &mut ChaCha8Rng, cfg: &MobilityConfig, topology: &NetworkTopology) {
    match &mut u.mobility {
        Mobility::Linear { velocity } => {
            let p = Point::new(u.position.x + velocity.x * dt, u.position.y + velocity.y * dt);
            u.position = topology.region().fold(p);
        }
        Mobility::Waypoint { target, speed_mps, pause_s } => {
            if *pause_s > 0.0 {
                *pause_s = (*pause_s - dt).max(0.0);
                return;
            }
            let d = u.position.dist(*target);
            let step = *speed_mps * dt;
            if step >= d {
                u.position = *target;
                *pause_s = rng.random::<f64>() * cfg.max_pause_s;
                *target = draw_waypoint(rng, cfg, topology);
                *speed_mps = draw_speed(rng, cfg, u.vehicle);
            } else {
                let f = step / d;
                u.position = Point::new(u.position.x + (target.x - u.position.x) * f, u.position.y + (target.y - u.position.y) * f);
            }
        }
    }
}

/// Deterministic slot-based simulator for one scenario and seed.
#[derive(Clone, Debug)]
pub struct Simulator {
    config: ScenarioConfig,
    topology: NetworkTopology,
    map: RadioMap,
    users: Vec<UserEquipment>,
    /// Used for user movement only, so trajectories do not depend on the
    /// handover parameters.
    rng: ChaCha8Rng,
    clock_ms: u64,
    slot: u64,
    prev_dl_usage: Vec<f64>,
    /// When set, every user is active regardless of the daily profile.
    all_active: bool,
}

/// Serializable dynamic state of a [`Simulator`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSnapshot {
    pub users: Vec<UserEquipment>,
    pub rng: ChaCha8Rng,
    pub clock_ms: u64,
    pub slot: u64,
    pub prev_dl_usage: Vec<f64>,
    pub ttt_ms: Vec<u32>,
    pub cio: Vec<((CellId, CellId), i32)>,
}

impl Simulator {
    pub fn new(config: ScenarioConfig) -> Result<Self, SimError> {
        config.validate()?;
        let topology = build_topology(&config.grid, config.radio.tx_power_dbm)?;
        if let Some(h) = config.mobility.hotspots.iter().find(|h| usize::from(h.cell) >= topology.num_cells()) {
            return Err(SimError::Config(format!("hotspot cell {} does not exist", h.cell)));
        }
        let shadowing = Shadowing::new(
            config.seed ^ 0x5DEE_CE66_D1CE_4E5B,
            config.radio.shadowing_sigma_db,
            config.radio.shadowing_tile_m,
        );
        let map = RadioMap::build(&topology, &config.radio, &shadowing);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let k = topology.num_cells();
        let mut users = Vec::with_capacity(config.mobility.max_users);
        for id in 0..config.mobility.max_users {
            let vehicle = rng.random::<f64>() < config.mobility.vehicle_fraction;
            let position = draw_waypoint(&mut rng, &config.mobility, &topology);
            let target = draw_waypoint(&mut rng, &config.mobility, &topology);
            let speed_mps = draw_speed(&mut rng, &config.mobility, vehicle);
            let mut u = UserEquipment::new(id as u32, position, Mobility::Waypoint { target, speed_mps, pause_s: 0.0 }, k);
            u.vehicle = vehicle;
            users.push(u);
        }
        Ok(Self { prev_dl_usage: vec![0.0; k], config, topology, map, users, rng, clock_ms: 0, slot: 0, all_active: false })
    }

    /// Simulator with a hand-placed user population that is always active.
    pub fn with_users(config: ScenarioConfig, users: Vec<UserEquipment>) -> Result<Self, SimError> {
        let mut sim = Self::new(ScenarioConfig { mobility: MobilityConfig { max_users: users.len().max(1), ..config.mobility.clone() }, ..config })?;
        let k = sim.topology.num_cells();
        sim.users = users
            .into_iter()
            .map(|mut u| {
                u.ttt_timers.resize(k, 0);
                u.active = false;
                u
            })
            .collect();
        sim.all_active = true;
        Ok(sim)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn topology_mut(&mut self) -> &mut NetworkTopology {
        &mut self.topology
    }

    pub fn users(&self) -> &[UserEquipment] {
        &self.users
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    /// Index of the interval the next slot belongs to.
    pub fn interval(&self) -> u64 {
        self.slot / u64::from(self.config.timing.slots_per_interval)
    }

    pub fn hour_of_day(&self) -> u8 {
        ((self.interval() / u64::from(self.config.timing.intervals_per_hour)) % 24) as u8
    }

    pub fn active_target(&self) -> usize {
        if self.all_active {
            return self.users.len();
        }
        let mult = traffic_pattern(self.hour_of_day(), &self.config.traffic.busy_hours);
        ((self.config.mobility.max_users as f64 * mult).ceil() as usize).min(self.users.len())
    }

    pub fn snapshot(&self) -> SimSnapshot {
        let (ttt_ms, cio) = self.topology.parameters();
        SimSnapshot {
            users: self.users.clone(),
            rng: self.rng.clone(),
            clock_ms: self.clock_ms,
            slot: self.slot,
            prev_dl_usage: self.prev_dl_usage.clone(),
            ttt_ms,
            cio,
        }
    }

    pub fn restore(&mut self, s: SimSnapshot) -> Result<(), SimError> {
        if s.ttt_ms.len() != self.topology.num_cells() || s.prev_dl_usage.len() != self.topology.num_cells() {
            return Err(SimError::Config("snapshot does not match the topology".into()));
        }
        for (n, &t) in self.topology.cell_ids().collect::<Vec<_>>().into_iter().zip(&s.ttt_ms) {
            self.topology.set_ttt(n, t)?;
        }
        for ((n, m), q) in s.cio {
            self.topology.set_cio(n, m, q)?;
        }
        self.users = s.users;
        self.rng = s.rng;
        self.clock_ms = s.clock_ms;
        self.slot = s.slot;
        self.prev_dl_usage = s.prev_dl_usage;
        Ok(())
    }

    fn strongest_cell(&self, p: Point) -> CellId {
        let rs = self.map.rsrp_dbm(self.map.tile(p));
        argmax(rs.iter().enumerate().map(|(i, &v)| (CellId(i as u16), v)))
    }

    fn update_activity(&mut self) {
        let target = self.active_target();
        for i in 0..self.users.len() {
            let want = i < target;
            if want && !self.users[i].active {
                let cell = self.strongest_cell(self.users[i].position);
                let u = &mut self.users[i];
                u.reset_link_state();
                u.serving = cell;
                u.active = true;
            } else if !want && self.users[i].active {
                let u = &mut self.users[i];
                u.reset_link_state();
                u.active = false;
            }
        }
    }

    /// Advances one slot: movement and handover evaluation at every
    /// measurement step, then per-user throughput and latency accounting.
    pub fn step_slot(&mut self) -> SlotEvents {
        self.update_activity();
        let k = self.topology.num_cells();
        let mut events = SlotEvents::new(k);
        let timing = &self.config.timing;
        let step_ms = self.config.step_ms();
        let dt = step_ms as f64 / 1000.0;
        let windows = EventWindows { t_early_ms: timing.t_early_ms, t_pp_ms: timing.t_pp_ms };
        let q_out = self.config.radio.q_out_dbm;
        for step in 0..timing.steps_per_slot {
            let now = self.clock_ms + u64::from(step + 1) * step_ms;
            for u in &mut self.users {
                move_user(u, dt, &mut self.rng, &self.config.mobility, &self.topology);
                if u.active {
                    handover_step(u, now, step_ms, q_out, timing.t_rlf_steps, windows, &self.topology, &self.map, &mut events);
                }
            }
        }
        self.clock_ms += timing.slot_ms;
        self.slot += 1;
        self.account_radio(&mut events);
        events
    }

    fn account_radio(&mut self, events: &mut SlotEvents) {
        let radio = &self.config.radio;
        let traffic = &self.config.traffic;
        let k = self.topology.num_cells();
        let prbs = f64::from(radio.prbs);
        let prb_hz = radio.bandwidth_mhz * 1e6 / prbs;
        let noise_mw = db_to_lin(radio.noise_dbm);
        let slot_s = self.config.timing.slot_ms as f64 / 1000.0;
        let demand_bps = traffic.dl_demand_mbps * 1e6;

        let mut count = vec![0usize; k];
        let mut links: Vec<(u32, CellId, f64, f64)> = Vec::new();
        for u in self.users.iter().filter(|u| u.active) {
            let t = self.map.tile(u.position);
            let mw = self.map.rsrp_mw(t);
            let s = u.serving.index();
            let interference: f64 = mw
                .iter()
                .enumerate()
                .filter(|&(c, _)| c != s)
                .map(|(c, &p)| f64::from(p) * self.prev_dl_usage[c])
                .sum();
            let sinr = f64::from(mw[s]) / (interference + noise_mw);
            let se = (1.0 + sinr).log2().min(radio.max_spectral_efficiency);
            count[s] += 1;
            links.push((u.id, u.serving, sinr, se));
        }
        let mut required = vec![0.0; k];
        for &(_, c, _, se) in &links {
            required[c.index()] += if se > 0.0 { demand_bps / (prb_hz * se) } else { prbs };
        }
        let latency = |usage: f64| {
            if usage >= 1.0 {
                traffic.latency_max_ms
            } else {
                (traffic.base_latency_ms / (1.0 - usage)).min(traffic.latency_max_ms)
            }
        };
        for c in 0..k {
            events.dl_prb_usage[c] = (required[c] / prbs).min(1.0);
            events.ul_prb_usage[c] = (traffic.ul_scale * required[c] / prbs).min(1.0);
            events.cell_latency_ms[c] = latency(events.dl_prb_usage[c]);
        }
        events.users = links
            .into_iter()
            .map(|(user, cell, sinr, se)| {
                let c = cell.index();
                let dl_bits = prbs / count[c] as f64 * prb_hz * se * slot_s;
                let sinr_db = 10.0 * sinr.max(1e-30).log10();
                let level = ((sinr_db - CQI_MIN_DB) / ((CQI_MAX_DB - CQI_MIN_DB) / CQI_LEVELS)).floor() + 1.0;
                UserSlot {
                    user,
                    cell,
                    dl_bits,
                    ul_bits: traffic.ul_scale * dl_bits,
                    latency_ms: events.cell_latency_ms[c],
                    cqi: level.clamp(1.0, CQI_LEVELS) as u8,
                }
            })
            .collect();
        self.prev_dl_usage.copy_from_slice(&events.dl_prb_usage);
    }

    /// Runs one full interval and returns its KPI window.
    pub fn run_interval(&mut self) -> KpiWindow {
        let meta = WindowMeta { interval: self.interval(), hour_of_day: self.hour_of_day(), slot_ms: self.config.timing.slot_ms };
        let mut acc = IntervalAccumulator::new(self.topology.num_cells());
        for _ in 0..self.config.timing.slots_per_interval {
            acc.add(&self.step_slot());
        }
        acc.finish(&self.topology, meta)
    }
}

#[allow(clippy::too_many_arguments)]
fn handover_step(
    u: &mut UserEquipment,
    now: u64,
    step_ms: u64,
    q_out: f64,
    t_rlf_steps: u32,
    windows: EventWindows,
    topology: &NetworkTopology,
    map: &RadioMap,
    events: &mut SlotEvents,
) {
    let rs = map.rsrp_dbm(map.tile(u.position));
    let s = u.serving;
    let rs_s = f64::from(rs[s.index()]);
    if rs_s < q_out {
        u.rlf_counter += 1;
    } else {
        u.rlf_counter = 0;
    }
    let link_failure = |u: &mut UserEquipment, events: &mut SlotEvents, timer_active: bool| {
        let reattach = argmax(rs.iter().enumerate().map(|(i, &v)| (CellId(i as u16), v)));
        let strongest_neighbor = argmax(topology.neighbors(s).iter().map(|&m| (m, rs[m.index()])));
        let event = MobilityEvent::Rlf { cell: s, time_ms: now, reattach, strongest_neighbor, timer_active };
        events.rlf[s.index()] += 1;
        if let Some((kind, pair)) = classify_ho_event(u.last_ho.as_ref(), &event, windows) {
            events.record(kind, pair);
        }
        u.reset_link_state();
        u.serving = reattach;
    };
    if u.rlf_counter >= t_rlf_steps {
        let timer_active = u.ttt_timers.iter().any(|&t| t > 0);
        link_failure(u, events, timer_active);
        return;
    }

    let p = topology.ttt(s);
    let mut fired: Option<(CellId, f32)> = None;
    for &m in topology.neighbors(s) {
        let i = m.index();
        if f64::from(rs[i]) > rs_s + f64::from(topology.cio(s, m)) {
            let t = (u.ttt_timers[i] as u64 + step_ms).min(u64::from(p)) as u32;
            u.ttt_timers[i] = t;
            if t >= p && fired.is_none_or(|(_, best)| rs[i] > best) {
                fired = Some((m, rs[i]));
            }
        } else {
            u.ttt_timers[i] = 0;
        }
    }
    let Some((m, rs_m)) = fired else { return };
    let pair = events.pair_index(s, m);
    events.ho_attempts[pair] += 1;
    u.ttt_timers.iter_mut().for_each(|t| *t = 0);
    // The command must reach the user over the serving link and the target
    // must be usable; otherwise the handover fails and the user
    // re-establishes like after a link failure.
    if rs_s < q_out || f64::from(rs_m) < q_out {
        link_failure(u, events, true);
        return;
    }
    events.ho_successes[pair] += 1;
    let event = MobilityEvent::Handover { source: s, target: m, time_ms: now };
    if let Some((kind, pair)) = classify_ho_event(u.last_ho.as_ref(), &event, windows) {
        events.record(kind, pair);
    }
    u.last_ho = Some(HoRecord { source: s, target: m, time_ms: now });
    u.serving = m;
    u.rlf_counter = 0;
}
