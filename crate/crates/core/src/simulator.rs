//! Event-driven simulation of batteryless nodes under a power transmitter.
//!
//! Each node cycles through a strict sequence:
//!
//! ```text
//! CHARGING --(V reaches v_chrdy)--> ACTIVE (stages run, drain at each stage end)
//!     ^                                  |
//!     |                                  v
//!     +----------(shutdown)------- ADVERTISING (one packet per adv_interval
//!                                              while V stays >= v_floor)
//! ```
//!
//! Between events the capacitor voltage follows the harvester's closed form,
//! so there is no time step. The transmitter's schedule only changes which
//! nodes receive power and when; all randomness (packet delivery, leaf
//! motion noise) comes from ChaCha streams keyed by the scenario seed, so a
//! scenario always produces the same log.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy_buffer::{drain, stored_energy, BufferSpec, BufferState};
use crate::format::sig6;
use crate::harvester::{charge_time, voltage_after, HarvesterModel};
use crate::link_budget::{check_regulatory, received_power, required_tx_power, PathLossModel, RegulatoryRegion};
use crate::node_cycle::{advertising_count, CycleSpec, StageKind, BLE_PAYLOAD};
use crate::quantities::{MegaHertz, PowerDbm, Seconds, Volt};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("transmitter at {eirp} dBm / {freq} MHz violates region '{region}' (in band: {in_band}, margin {margin} dB)")]
    NonCompliant {
        eirp: f64,
        freq: f64,
        region: String,
        in_band: bool,
        margin: f64,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub id: String,
    pub buffer: BufferSpec,
    pub harvester: HarvesterModel,
    pub cycle: CycleSpec,
    /// Meters from the transmitter.
    pub distance: f64,
    pub path_loss: PathLossModel,
    pub initial_voltage: Volt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SchedulePolicy {
    AlwaysOn,
    /// Repeating on/off pattern starting with `on` at t = 0.
    DutyCycle { on: Seconds, off: Seconds },
    /// Pause the transmitter for `pause` whenever every node's last `window`
    /// delivered pitch readings have a standard deviation below the threshold.
    Adaptive {
        window: usize,
        angle_std_threshold: f64,
        pause: Seconds,
    },
    /// Round-robin frame of `slot`s; slot `i` powers `assignment[i]` alone.
    Tdm { slot: Seconds, assignment: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitterConfig {
    pub eirp: PowerDbm,
    pub freq: MegaHertz,
    pub region: RegulatoryRegion,
    pub policy: SchedulePolicy,
    pub enforce_compliance: bool,
}

impl Default for TransmitterConfig {
    fn default() -> Self {
        TransmitterConfig {
            eirp: PowerDbm::new(25.0),
            freq: MegaHertz::new(915.0),
            region: RegulatoryRegion::fcc(),
            policy: SchedulePolicy::AlwaysOn,
            enforce_compliance: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafMotionModel {
    pub amplitude_deg: f64,
    pub period: Seconds,
    pub noise_std_deg: f64,
    pub phase_rad: f64,
}

impl Default for LeafMotionModel {
    fn default() -> Self {
        LeafMotionModel {
            amplitude_deg: 1.0,
            period: Seconds::new(24.0 * 3600.0),
            noise_std_deg: 0.0,
            phase_rad: 0.0,
        }
    }
}

/// Leaf pitch at time `t`: a diurnal sine plus noise that depends only on
/// `(seed, t)`.
pub fn leaf_motion(model: &LeafMotionModel, t: Seconds, seed: u64) -> f64 {
    let w = std::f64::consts::TAU * t.value() / model.period.value();
    let base = model.amplitude_deg * (w + model.phase_rad).sin();
    if model.noise_std_deg == 0.0 {
        return base;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t.value().to_bits());
    let n: f64 = StandardNormal.sample(&mut rng);
    base + model.noise_std_deg * n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub nodes: Vec<NodeConfig>,
    pub transmitter: TransmitterConfig,
    pub duration: Seconds,
    pub seed: u64,
    pub motion: LeafMotionModel,
    /// Probability that an uplink packet is received.
    pub p_rx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ChargeReady,
    CycleStart,
    StageDone,
    Packet,
    Advertise,
    Shutdown,
    TxStateChange,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::ChargeReady => "charge_ready",
            EventKind::CycleStart => "cycle_start",
            EventKind::StageDone => "stage_done",
            EventKind::Packet => "packet",
            EventKind::Advertise => "advertise",
            EventKind::Shutdown => "shutdown",
            EventKind::TxStateChange => "tx_state_change",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    /// Node id, or `tx` for transmitter events.
    pub node: String,
    pub kind: EventKind,
    pub voltage: f64,
    pub detail: String,
}

pub const TX_NODE_ID: &str = "tx";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub events: Vec<Event>,
}

impl EventLog {
    pub const CSV_HEADER: &'static str = "time_s,node_id,kind,voltage_v,detail";

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.events.len() + 1));
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for e in &self.events {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                sig6(e.time),
                e.node,
                e.kind.as_str(),
                sig6(e.voltage),
                e.detail
            );
        }
        out
    }

    pub fn for_node<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Event> + 'a {
        self.events.iter().filter(move |e| e.node == id)
    }

    pub fn times(&self, id: &str, kind: EventKind) -> Vec<f64> {
        self.for_node(id)
            .filter(|e| e.kind == kind)
            .map(|e| e.time)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub id: String,
    pub measurements: u64,
    pub measurements_delivered: u64,
    pub packets_sent: u64,
    pub packets_delivered: u64,
    pub brownouts: u64,
    pub mean_interval_s: Option<f64>,
    pub min_interval_s: Option<f64>,
    pub max_interval_s: Option<f64>,
    /// Energy stored into the capacitor by the harvester.
    pub harvested_energy_j: f64,
    pub consumed_energy_j: f64,
    pub initial_voltage_v: f64,
    pub final_voltage_v: f64,
    pub stored_energy_delta_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub duration_s: f64,
    pub seed: u64,
    pub transmitter_on_time_s: f64,
    pub nodes: Vec<NodeReport>,
}

/// Transmitter on/off and slot bookkeeping.
struct Transmitter<'a> {
    policy: &'a SchedulePolicy,
    on: bool,
    /// Index into `nodes` of the node owning the current TDM slot.
    slot_owner: Option<usize>,
    tdm_owners: Vec<Option<usize>>,
    /// Boundary counter for periodic policies.
    boundary: u64,
    pause_until: Option<f64>,
    on_since: Option<f64>,
    on_time: f64,
}

impl<'a> Transmitter<'a> {
    fn new(policy: &'a SchedulePolicy, nodes: &[NodeConfig]) -> Result<Self, SimError> {
        let mut tdm_owners = Vec::new();
        match policy {
            SchedulePolicy::AlwaysOn => {}
            SchedulePolicy::DutyCycle { on, off } => {
                if on.value() <= 0.0 || off.value() <= 0.0 {
                    return Err(SimError::Invalid("duty cycle on/off must be positive".into()));
                }
            }
            SchedulePolicy::Adaptive {
                window,
                angle_std_threshold,
                pause,
            } => {
                if *window < 2 || pause.value() <= 0.0 || angle_std_threshold.is_nan() || *angle_std_threshold < 0.0 {
                    return Err(SimError::Invalid(
                        "adaptive policy needs window >= 2, pause > 0, threshold >= 0".into(),
                    ));
                }
            }
            SchedulePolicy::Tdm { slot, assignment } => {
                if slot.value() <= 0.0 || assignment.is_empty() {
                    return Err(SimError::Invalid("tdm needs a positive slot and a non-empty assignment".into()));
                }
                for (i, id) in assignment.iter().enumerate() {
                    if id != "-" && assignment[..i].contains(id) {
                        return Err(SimError::Invalid(format!("tdm assignment lists '{id}' twice")));
                    }
                    let idx = nodes.iter().position(|n| &n.id == id);
                    if idx.is_none() && id != "-" {
                        return Err(SimError::Invalid(format!("tdm assignment names unknown node '{id}'")));
                    }
                    tdm_owners.push(idx);
                }
            }
        }
        let slot_owner = tdm_owners.first().copied().flatten();
        Ok(Transmitter {
            policy,
            on: true,
            slot_owner,
            tdm_owners,
            boundary: 0,
            pause_until: None,
            on_since: Some(0.0),
            on_time: 0.0,
        })
    }

    fn powers(&self, node: usize) -> bool {
        self.on && (self.tdm_owners.is_empty() || self.slot_owner == Some(node))
    }

    fn next_change(&self) -> f64 {
        match self.policy {
            SchedulePolicy::AlwaysOn => f64::INFINITY,
            SchedulePolicy::DutyCycle { on, off } => {
                let k = self.boundary / 2;
                let period = on.value() + off.value();
                if self.boundary.is_multiple_of(2) {
                    k as f64 * period + on.value()
                } else {
                    (k + 1) as f64 * period
                }
            }
            SchedulePolicy::Adaptive { .. } => self.pause_until.unwrap_or(f64::INFINITY),
            SchedulePolicy::Tdm { slot, .. } => (self.boundary + 1) as f64 * slot.value(),
        }
    }

    fn set_on(&mut self, t: f64, on: bool) {
        if self.on == on {
            return;
        }
        if on {
            self.on_since = Some(t);
        } else if let Some(s) = self.on_since.take() {
            self.on_time += t - s;
        }
        self.on = on;
    }

    /// Apply the scheduled change at `t`; returns the log detail.
    fn advance(&mut self, t: f64, nodes: &[NodeConfig]) -> String {
        match self.policy {
            SchedulePolicy::AlwaysOn => String::new(),
            SchedulePolicy::DutyCycle { .. } => {
                self.boundary += 1;
                let on = self.boundary.is_multiple_of(2);
                self.set_on(t, on);
                if on { "on" } else { "off" }.to_string()
            }
            SchedulePolicy::Adaptive { .. } => {
                self.pause_until = None;
                self.set_on(t, true);
                "on".to_string()
            }
            SchedulePolicy::Tdm { .. } => {
                self.boundary += 1;
                let i = (self.boundary % self.tdm_owners.len() as u64) as usize;
                self.slot_owner = self.tdm_owners[i];
                format!(
                    "slot={}",
                    self.slot_owner.map(|n| nodes[n].id.as_str()).unwrap_or("-")
                )
            }
        }
    }

    fn finish(&mut self, t_end: f64) -> f64 {
        if let Some(s) = self.on_since.take() {
            self.on_time += t_end - s;
        }
        self.on_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Charging,
    Active { stage: usize, ends: f64 },
    Advertising { remaining: u64, next: f64 },
}

struct NodeState {
    voltage: f64,
    /// Time up to which `voltage` is current.
    at: f64,
    phase: Phase,
    p_rx_dbm: PowerDbm,
    harvested: f64,
    consumed: f64,
    measurements: u64,
    measurements_delivered: u64,
    packets_sent: u64,
    packets_delivered: u64,
    brownouts: u64,
    cycle_starts: Vec<f64>,
    /// Pitch of the measurement in flight, and whether any of its packets got through.
    pitch: f64,
    delivered_current: bool,
    recent_pitch: Vec<f64>,
    packet_rng: ChaCha8Rng,
    motion_seed: u64,
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Validate a scenario without running it.
pub fn validate(s: &Scenario) -> Result<(), SimError> {
    if s.duration.value().is_nan() || s.duration.value() <= 0.0 {
        return Err(SimError::Invalid("duration must be positive".into()));
    }
    if !(0.0..=1.0).contains(&s.p_rx) {
        return Err(SimError::Invalid(format!("p_rx must lie in [0, 1], got {}", s.p_rx)));
    }
    if s.nodes.is_empty() {
        return Err(SimError::Invalid("scenario has no nodes".into()));
    }
    if !(s.motion.period.value() > 0.0 && s.motion.amplitude_deg >= 0.0 && s.motion.noise_std_deg >= 0.0) {
        return Err(SimError::Invalid("leaf motion needs period > 0 and non-negative amplitude/noise".into()));
    }
    for (i, n) in s.nodes.iter().enumerate() {
        if n.id == TX_NODE_ID || n.id.is_empty() || n.id.contains(',') {
            return Err(SimError::Invalid(format!("node id '{}' is reserved or malformed", n.id)));
        }
        if s.nodes[..i].iter().any(|m| m.id == n.id) {
            return Err(SimError::Invalid(format!("duplicate node id '{}'", n.id)));
        }
        if !(n.distance.is_finite() && n.distance > 0.0) {
            return Err(SimError::Invalid(format!("node '{}' distance must be positive", n.id)));
        }
        n.buffer
            .validate()
            .map_err(|e| SimError::Invalid(format!("node '{}': {e}", n.id)))?;
        n.cycle
            .validate()
            .map_err(|e| SimError::Invalid(format!("node '{}': {e}", n.id)))?;
        BufferState::new(&n.buffer, n.initial_voltage)
            .map_err(|e| SimError::Invalid(format!("node '{}': {e}", n.id)))?;
    }
    let tx = &s.transmitter;
    if tx.enforce_compliance {
        let v = check_regulatory(tx.eirp, &tx.region, tx.freq);
        if !v.is_ok() {
            return Err(SimError::NonCompliant {
                eirp: tx.eirp.value(),
                freq: tx.freq.value(),
                region: tx.region.name.clone(),
                in_band: v.in_band,
                margin: v.margin.value(),
            });
        }
    }
    Ok(())
}

struct Sim<'a> {
    s: &'a Scenario,
    tx: Transmitter<'a>,
    nodes: Vec<NodeState>,
    log: Vec<Event>,
}

impl<'a> Sim<'a> {
    fn push(&mut self, time: f64, node: usize, kind: EventKind, detail: String) {
        let voltage = self.nodes[node].voltage;
        self.log.push(Event {
            time,
            node: self.s.nodes[node].id.clone(),
            kind,
            voltage,
            detail,
        });
    }

    fn powered_input(&self, i: usize) -> Option<PowerDbm> {
        let cfg = &self.s.nodes[i];
        let p = self.nodes[i].p_rx_dbm;
        (self.tx.powers(i) && cfg.harvester.is_harvesting(p)).then_some(p)
    }

    /// Bring a charging node's voltage up to time `t`.
    fn settle(&mut self, i: usize, t: f64) {
        let input = self.powered_input(i);
        let s = self.s;
        let cfg = &s.nodes[i];
        let n = &mut self.nodes[i];
        if n.phase != Phase::Charging {
            return;
        }
        if let Some(p) = input {
            let dt = t - n.at;
            if dt > 0.0 {
                let v = voltage_after(&cfg.harvester, &cfg.buffer, Volt::new(n.voltage), p, Seconds::new(dt)).value();
                n.harvested += 0.5 * cfg.buffer.c_measured.value() * (v * v - n.voltage * n.voltage);
                n.voltage = v;
            }
        }
        n.at = t;
    }

    fn next_event(&self, i: usize) -> f64 {
        let n = &self.nodes[i];
        match n.phase {
            Phase::Active { ends, .. } => ends,
            Phase::Advertising { next, .. } => next,
            Phase::Charging => {
                let cfg = &self.s.nodes[i];
                let v_chrdy = cfg.buffer.v_chrdy;
                if n.voltage >= v_chrdy.value() {
                    return n.at;
                }
                match self.powered_input(i) {
                    Some(p) => match charge_time(&cfg.harvester, &cfg.buffer, Volt::new(n.voltage), v_chrdy, p) {
                        Ok(dt) => n.at + dt.value(),
                        Err(_) => f64::INFINITY,
                    },
                    None => f64::INFINITY,
                }
            }
        }
    }

    fn send_packet(&mut self, i: usize, t: f64, kind: EventKind) {
        let p_rx = self.s.p_rx;
        let n = &mut self.nodes[i];
        let u: f64 = n.packet_rng.random();
        let delivered = u < p_rx;
        n.packets_sent += 1;
        let seq = n.packets_sent;
        let first_delivery = delivered && !n.delivered_current;
        if delivered {
            n.packets_delivered += 1;
            n.delivered_current = true;
        }
        let pitch = n.pitch;
        if first_delivery {
            n.measurements_delivered += 1;
            n.recent_pitch.push(pitch);
        }
        let detail = format!(
            "seq={seq};delivered={delivered};pitch_deg={};payload={}B/{}/{}dBm",
            sig6(pitch),
            BLE_PAYLOAD.bytes,
            BLE_PAYLOAD.phy,
            BLE_PAYLOAD.tx_power_dbm
        );
        self.push(t, i, kind, detail);
        if first_delivery {
            self.maybe_pause(t);
        }
    }

    fn maybe_pause(&mut self, t: f64) {
        let SchedulePolicy::Adaptive {
            window,
            angle_std_threshold,
            pause,
        } = self.s.transmitter.policy
        else {
            return;
        };
        if !self.tx.on {
            return;
        }
        for n in &mut self.nodes {
            let len = n.recent_pitch.len();
            if len > window {
                n.recent_pitch.drain(..len - window);
            }
        }
        let quiet = self
            .nodes
            .iter()
            .all(|n| n.recent_pitch.len() == window && std_dev(&n.recent_pitch) < angle_std_threshold);
        if !quiet {
            return;
        }
        for i in 0..self.nodes.len() {
            self.settle(i, t);
        }
        self.tx.set_on(t, false);
        self.tx.pause_until = Some(t + pause.value());
        for n in &mut self.nodes {
            n.recent_pitch.clear();
        }
        self.log.push(Event {
            time: t,
            node: TX_NODE_ID.into(),
            kind: EventKind::TxStateChange,
            voltage: 0.0,
            detail: "off".into(),
        });
    }

    fn shutdown(&mut self, i: usize, t: f64, reason: &str) {
        let n = &mut self.nodes[i];
        n.phase = Phase::Charging;
        n.at = t;
        self.push(t, i, EventKind::Shutdown, reason.to_string());
    }

    fn node_event(&mut self, i: usize, t: f64) {
        let s = self.s;
        let cfg = &s.nodes[i];
        let c = cfg.buffer.c_measured.value();
        match self.nodes[i].phase {
            Phase::Charging => {
                self.settle(i, t);
                let n = &mut self.nodes[i];
                let top = cfg.buffer.v_chrdy.value();
                if n.voltage < top {
                    n.harvested += 0.5 * c * (top * top - n.voltage * n.voltage);
                    n.voltage = top;
                }
                self.push(t, i, EventKind::ChargeReady, String::new());
                let n = &mut self.nodes[i];
                n.measurements += 1;
                n.cycle_starts.push(t);
                n.pitch = leaf_motion(&s.motion, Seconds::new(t), n.motion_seed);
                n.delivered_current = false;
                n.phase = Phase::Active {
                    stage: 0,
                    ends: t + cfg.cycle.stages[0].duration.value(),
                };
                self.push(t, i, EventKind::CycleStart, cfg.cycle.label.as_str().into());
            }
            Phase::Active { stage, .. } => {
                let st = cfg.cycle.stages[stage];
                let state = BufferState {
                    voltage: Volt::new(self.nodes[i].voltage),
                };
                let floor = cfg.buffer.v_floor.value();
                let after = drain(&cfg.buffer, state, st.energy())
                    .ok()
                    .filter(|s| s.voltage.value() >= floor);
                let Some(after) = after else {
                    let n = &mut self.nodes[i];
                    n.consumed += 0.5 * c * (n.voltage * n.voltage - floor * floor).max(0.0);
                    n.voltage = n.voltage.min(floor);
                    n.brownouts += 1;
                    self.shutdown(i, t, "brownout");
                    return;
                };
                let n = &mut self.nodes[i];
                n.voltage = after.voltage.value();
                n.consumed += st.energy().value();
                self.push(t, i, EventKind::StageDone, st.kind.to_string());
                let last = stage + 1 == cfg.cycle.stages.len();
                let has_tx = cfg.cycle.stage(StageKind::Transmission).is_some();
                if st.kind == StageKind::Transmission || (last && !has_tx) {
                    self.send_packet(i, t, EventKind::Packet);
                }
                if !last {
                    self.nodes[i].phase = Phase::Active {
                        stage: stage + 1,
                        ends: t + cfg.cycle.stages[stage + 1].duration.value(),
                    };
                    return;
                }
                let count = advertising_count(&cfg.buffer, after, &cfg.cycle);
                if count == 0 {
                    self.shutdown(i, t, "floor");
                } else {
                    self.nodes[i].phase = Phase::Advertising {
                        remaining: count,
                        next: t + cfg.cycle.adv_interval.value(),
                    };
                }
            }
            Phase::Advertising { remaining, .. } => {
                let state = BufferState {
                    voltage: Volt::new(self.nodes[i].voltage),
                };
                let e = cfg.cycle.adv_energy;
                // advertising_count guarantees the charge is there
                let after = drain(&cfg.buffer, state, e).unwrap_or_else(|_| BufferState::empty());
                let n = &mut self.nodes[i];
                n.voltage = after.voltage.value();
                n.consumed += e.value();
                self.send_packet(i, t, EventKind::Advertise);
                if remaining <= 1 {
                    self.shutdown(i, t, "floor");
                } else {
                    self.nodes[i].phase = Phase::Advertising {
                        remaining: remaining - 1,
                        next: t + cfg.cycle.adv_interval.value(),
                    };
                }
            }
        }
    }

    fn run(mut self) -> (EventLog, SimReport) {
        let end = self.s.duration.value();
        let initial = match &self.s.transmitter.policy {
            SchedulePolicy::Tdm { .. } => format!(
                "slot={}",
                self.tx.slot_owner.map(|n| self.s.nodes[n].id.as_str()).unwrap_or("-")
            ),
            _ => "on".to_string(),
        };
        self.log.push(Event {
            time: 0.0,
            node: TX_NODE_ID.into(),
            kind: EventKind::TxStateChange,
            voltage: 0.0,
            detail: initial,
        });
        loop {
            let t_tx = self.tx.next_change();
            let (t_node, idx) = (0..self.nodes.len())
                .map(|i| (self.next_event(i), i))
                .fold((f64::INFINITY, usize::MAX), |a, b| if b.0 < a.0 { b } else { a });
            let t = t_tx.min(t_node);
            if t.is_nan() || t > end {
                break;
            }
            if t_tx <= t_node {
                for i in 0..self.nodes.len() {
                    self.settle(i, t_tx);
                }
                let detail = self.tx.advance(t_tx, &self.s.nodes);
                self.log.push(Event {
                    time: t_tx,
                    node: TX_NODE_ID.into(),
                    kind: EventKind::TxStateChange,
                    voltage: 0.0,
                    detail,
                });
            } else {
                self.node_event(idx, t_node);
            }
        }
        for i in 0..self.nodes.len() {
            self.settle(i, end);
        }
        let on_time = self.tx.finish(end);
        let nodes = self
            .nodes
            .iter()
            .zip(&self.s.nodes)
            .map(|(n, cfg)| {
                let iv: Vec<f64> = n.cycle_starts.windows(2).map(|w| w[1] - w[0]).collect();
                let c = cfg.buffer.c_measured;
                let (mean, min, max) = if iv.is_empty() {
                    (None, None, None)
                } else {
                    (
                        Some(iv.iter().sum::<f64>() / iv.len() as f64),
                        iv.iter().copied().reduce(f64::min),
                        iv.iter().copied().reduce(f64::max),
                    )
                };
                NodeReport {
                    id: cfg.id.clone(),
                    measurements: n.measurements,
                    measurements_delivered: n.measurements_delivered,
                    packets_sent: n.packets_sent,
                    packets_delivered: n.packets_delivered,
                    brownouts: n.brownouts,
                    mean_interval_s: mean,
                    min_interval_s: min,
                    max_interval_s: max,
                    harvested_energy_j: n.harvested,
                    consumed_energy_j: n.consumed,
                    initial_voltage_v: cfg.initial_voltage.value(),
                    final_voltage_v: n.voltage,
                    stored_energy_delta_j: stored_energy(c, Volt::new(n.voltage)).value()
                        - stored_energy(c, cfg.initial_voltage).value(),
                }
            })
            .collect();
        (
            EventLog { events: self.log },
            SimReport {
                duration_s: end,
                seed: self.s.seed,
                transmitter_on_time_s: on_time,
                nodes,
            },
        )
    }
}

/// Per-node seed offsets, so nodes draw from disjoint streams.
fn node_seed(seed: u64, node: usize) -> u64 {
    seed ^ (node as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn run(scenario: &Scenario) -> Result<(EventLog, SimReport), SimError> {
    validate(scenario)?;
    let tx = Transmitter::new(&scenario.transmitter.policy, &scenario.nodes)?;
    let nodes = scenario
        .nodes
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            let p_rx_dbm = received_power(scenario.transmitter.eirp, &cfg.path_loss, cfg.distance)
                .map_err(|e| SimError::Invalid(format!("node '{}': {e}", cfg.id)))?;
            let mut packet_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
            packet_rng.set_stream(i as u64 + 1);
            Ok(NodeState {
                voltage: cfg.initial_voltage.value(),
                at: 0.0,
                phase: Phase::Charging,
                p_rx_dbm,
                harvested: 0.0,
                consumed: 0.0,
                measurements: 0,
                measurements_delivered: 0,
                packets_sent: 0,
                packets_delivered: 0,
                brownouts: 0,
                cycle_starts: Vec::new(),
                pitch: 0.0,
                delivered_current: false,
                recent_pitch: Vec::new(),
                packet_rng,
                motion_seed: node_seed(scenario.seed, i),
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let sim = Sim {
        s: scenario,
        tx,
        nodes,
        log: Vec::new(),
    };
    Ok(sim.run())
}

impl NodeConfig {
    /// EIRP needed to put this node exactly at harvester sensitivity.
    pub fn required_tx_power(&self) -> Result<PowerDbm, SimError> {
        required_tx_power(self.harvester.sensitivity, &self.path_loss, self.distance)
            .map_err(|e| SimError::Invalid(e.to_string()))
    }
}

/// Run independent scenarios in parallel; results keep the input order.
pub fn run_sweep(scenarios: &[Scenario]) -> Vec<Result<(EventLog, SimReport), SimError>> {
    scenarios.par_iter().map(run).collect()
}

/// Received power at which `node` would sit for a given transmitter EIRP.
pub fn node_input_power(node: &NodeConfig, eirp: PowerDbm) -> Result<PowerDbm, SimError> {
    received_power(eirp, &node.path_loss, node.distance).map_err(|e| SimError::Invalid(e.to_string()))
}
