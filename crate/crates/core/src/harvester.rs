//! RF harvester model.
//!
//! Charging is split into two phases at `v_phase`. Below it the harvester
//! runs its cold-start circuit with a low efficiency; above it the main boost
//! converter takes over. Within each phase the efficiency depends only on the
//! incident power, so the capacitor charges at a constant energy rate and the
//! charge time has a closed form:
//!
//! ```text
//! t = C · (v_b² − v_a²) / (2 · η(P) · P)
//! ```
//!
//! The efficiency curves are calibrated from measured charge times (see
//! [`dataset`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy_buffer::BufferSpec;
use crate::quantities::{dbm_to_watt, Farad, PowerDbm, Seconds, Volt};

pub const DEFAULT_SENSITIVITY_DBM: f64 = -15.0;
pub const DEFAULT_V_PHASE: f64 = 1.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarvestError {
    #[error("input power {p_in} dBm is below the harvester sensitivity {sensitivity} dBm")]
    NoHarvest { p_in: f64, sensitivity: f64 },
    #[error("target voltage {target} V is below start voltage {start} V")]
    InvalidRange { start: f64, target: f64 },
    #[error("efficiency curve needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("efficiency curve powers must be strictly increasing (at {0} dBm)")]
    Unordered(f64),
    #[error("efficiency {eta} at {p_in} dBm is outside (0, 1)")]
    NonPhysical { p_in: f64, eta: f64 },
    #[error("no calibration observations")]
    Empty,
    #[error("cold-start time at {p_in} dBm does not exceed the successive time it contains")]
    Inconsistent { p_in: f64 },
    #[error("cold-start observation at {p_in} dBm has no successive observation to pair with")]
    Unpaired { p_in: f64 },
    #[error("{kind} observation at {p_in} dBm has an invalid voltage span")]
    BadSpan { kind: ChargeKind, p_in: f64 },
    #[error("target charge time is not reachable: {0}")]
    Unreachable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCurve {
    points: Vec<(PowerDbm, f64)>,
}

impl EfficiencyCurve {
    pub fn new(points: Vec<(PowerDbm, f64)>) -> Result<Self, HarvestError> {
        if points.len() < 2 {
            return Err(HarvestError::TooFewPoints(points.len()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(HarvestError::Unordered(w[1].0.value()));
            }
        }
        for &(p, eta) in &points {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(HarvestError::NonPhysical {
                    p_in: p.value(),
                    eta,
                });
            }
        }
        Ok(EfficiencyCurve { points })
    }

    pub fn points(&self) -> &[(PowerDbm, f64)] {
        &self.points
    }
}

/// Linear interpolation in dBm, clamped to the end points.
pub fn efficiency_at(curve: &EfficiencyCurve, p: PowerDbm) -> f64 {
    let pts = &curve.points;
    let first = pts[0];
    let last = pts[pts.len() - 1];
    if p <= first.0 {
        return first.1;
    }
    if p >= last.0 {
        return last.1;
    }
    let i = pts.partition_point(|&(x, _)| x <= p);
    let (x0, y0) = pts[i - 1];
    let (x1, y1) = pts[i];
    if p == x0 {
        return y0;
    }
    let f = (p.value() - x0.value()) / (x1.value() - x0.value());
    y0 + f * (y1 - y0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvesterModel {
    pub sensitivity: PowerDbm,
    /// Boundary between cold-start and main-boost charging.
    pub v_phase: Volt,
    pub eta_cold: EfficiencyCurve,
    pub eta_main: EfficiencyCurve,
}

impl HarvesterModel {
    pub fn is_harvesting(&self, p_in: PowerDbm) -> bool {
        p_in >= self.sensitivity
    }

    fn check_input(&self, p_in: PowerDbm) -> Result<(), HarvestError> {
        if self.is_harvesting(p_in) {
            Ok(())
        } else {
            Err(HarvestError::NoHarvest {
                p_in: p_in.value(),
                sensitivity: self.sensitivity.value(),
            })
        }
    }

    /// Energy rate into the capacitor (W) in each phase.
    fn rates(&self, p_in: PowerDbm) -> (f64, f64) {
        let p = dbm_to_watt(p_in).value();
        (
            efficiency_at(&self.eta_cold, p_in) * p,
            efficiency_at(&self.eta_main, p_in) * p,
        )
    }
}

fn span_time(c: f64, va: f64, vb: f64, rate: f64) -> f64 {
    0.5 * c * (vb * vb - va * va) / rate
}

/// Time to charge `spec`'s capacitor from `v_start` to `v_target` at a
/// constant incident power.
pub fn charge_time(
    model: &HarvesterModel,
    spec: &BufferSpec,
    v_start: Volt,
    v_target: Volt,
    p_in: PowerDbm,
) -> Result<Seconds, HarvestError> {
    if v_target < v_start {
        return Err(HarvestError::InvalidRange {
            start: v_start.value(),
            target: v_target.value(),
        });
    }
    model.check_input(p_in)?;
    let (cold_rate, main_rate) = model.rates(p_in);
    let c = spec.c_measured.value();
    let (va, vb, vp) = (v_start.value(), v_target.value(), model.v_phase.value());
    let mut t = 0.0;
    if va < vp {
        t += span_time(c, va, vb.min(vp), cold_rate);
    }
    if vb > vp {
        t += span_time(c, va.max(vp), vb, main_rate);
    }
    Ok(Seconds::new(t))
}

/// Capacitor voltage after charging for `dt`, capped at `v_chrdy`. A start
/// voltage already at or above the cap is returned unchanged, as is any
/// start voltage when the input is below sensitivity.
pub fn voltage_after(
    model: &HarvesterModel,
    spec: &BufferSpec,
    v_start: Volt,
    p_in: PowerDbm,
    dt: Seconds,
) -> Volt {
    let cap = spec.v_chrdy.value();
    let v0 = v_start.value();
    if !model.is_harvesting(p_in) || dt.value() == 0.0 || v0 >= cap {
        return v_start;
    }
    let (cold_rate, main_rate) = model.rates(p_in);
    let c = spec.c_measured.value();
    let vp = model.v_phase.value();
    let mut remaining = dt.value();
    let mut v = v0;
    if v < vp {
        let to_phase = span_time(c, v, vp, cold_rate);
        if remaining <= to_phase {
            v = (v * v + 2.0 * cold_rate * remaining / c).sqrt();
            return Volt::new(v.min(cap));
        }
        remaining -= to_phase;
        v = vp;
    }
    v = (v * v + 2.0 * main_rate * remaining / c).sqrt();
    Volt::new(v.min(cap))
}

/// Lowest input power at which a charge from `v_start` to `v_target`
/// completes within `target`. Solved by bisection on the monotone
/// [`charge_time`].
pub fn power_for_charge_time(
    model: &HarvesterModel,
    spec: &BufferSpec,
    v_start: Volt,
    v_target: Volt,
    target: Seconds,
) -> Result<PowerDbm, HarvestError> {
    let time = |p: f64| charge_time(model, spec, v_start, v_target, PowerDbm::new(p)).map(|t| t.value());
    let mut lo = model.sensitivity.value();
    if time(lo)? <= target.value() {
        return Ok(model.sensitivity);
    }
    let mut hi = lo + 10.0;
    while time(hi)? > target.value() {
        hi += 10.0;
        if hi > lo + 200.0 {
            return Err(HarvestError::Unreachable(format!(
                "{} s needs more than {hi} dBm",
                target.value()
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if time(mid)? > target.value() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(PowerDbm::new(hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChargeKind {
    /// Charge from an empty capacitor.
    Cold,
    /// Recharge from the cut-off threshold.
    Successive,
}

impl std::fmt::Display for ChargeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChargeKind::Cold => "cold",
            ChargeKind::Successive => "successive",
        })
    }
}

impl std::str::FromStr for ChargeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cold" => Ok(ChargeKind::Cold),
            "successive" => Ok(ChargeKind::Successive),
            other => Err(format!("unknown charge kind '{other}' (cold|successive)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeObservation {
    pub c: Farad,
    pub v_start: Volt,
    pub v_target: Volt,
    pub p_in: PowerDbm,
    pub t_measured: Seconds,
    pub kind: ChargeKind,
}

/// Fit cold-start and main-boost efficiency curves to measured charge times.
///
/// Each successive observation fixes the main-phase efficiency at its power.
/// A cold observation at the same power and capacitance is then split into
/// its main-phase part (predicted from that efficiency) and the remaining
/// cold-start part, which fixes the cold efficiency. When several
/// observations share a power level their estimates are averaged. Without any
/// cold data the cold curve falls back to the main one.
pub fn calibrate(observations: &[ChargeObservation], v_phase: Volt) -> Result<HarvesterModel, HarvestError> {
    if observations.is_empty() {
        return Err(HarvestError::Empty);
    }
    let vp = v_phase.value();
    let mut main: Vec<(PowerDbm, Vec<f64>)> = Vec::new();
    let mut cold: Vec<(PowerDbm, Vec<f64>)> = Vec::new();
    let push = |table: &mut Vec<(PowerDbm, Vec<f64>)>, p: PowerDbm, eta: f64| {
        match table.iter_mut().find(|(q, _)| *q == p) {
            Some((_, v)) => v.push(eta),
            None => table.push((p, vec![eta])),
        }
    };

    for obs in observations.iter().filter(|o| o.kind == ChargeKind::Successive) {
        let (va, vb) = (obs.v_start.value(), obs.v_target.value());
        if va < vp - 1e-12 || vb <= va || obs.t_measured.value() <= 0.0 {
            return Err(HarvestError::BadSpan {
                kind: obs.kind,
                p_in: obs.p_in.value(),
            });
        }
        let energy = 0.5 * obs.c.value() * (vb * vb - va.max(vp).powi(2));
        let eta = energy / (dbm_to_watt(obs.p_in).value() * obs.t_measured.value());
        push(&mut main, obs.p_in, eta);
    }

    for obs in observations.iter().filter(|o| o.kind == ChargeKind::Cold) {
        let (va, vb) = (obs.v_start.value(), obs.v_target.value());
        if va >= vp || vb <= vp || obs.t_measured.value() <= 0.0 {
            return Err(HarvestError::BadSpan {
                kind: obs.kind,
                p_in: obs.p_in.value(),
            });
        }
        let paired = observations.iter().find(|s| {
            s.kind == ChargeKind::Successive && s.p_in == obs.p_in && s.c == obs.c
        });
        let Some(succ) = paired else {
            return Err(HarvestError::Unpaired {
                p_in: obs.p_in.value(),
            });
        };
        let p = dbm_to_watt(obs.p_in).value();
        let c = obs.c.value();
        let (sa, sb) = (succ.v_start.value().max(vp), succ.v_target.value());
        let eta_main = 0.5 * c * (sb * sb - sa * sa) / (p * succ.t_measured.value());
        let t_main = 0.5 * c * (vb * vb - vp * vp) / (eta_main * p);
        let t_cold = obs.t_measured.value() - t_main;
        if t_cold <= 0.0 {
            return Err(HarvestError::Inconsistent {
                p_in: obs.p_in.value(),
            });
        }
        let eta = 0.5 * c * (vp * vp - va * va) / (p * t_cold);
        push(&mut cold, obs.p_in, eta);
    }

    let finish = |mut table: Vec<(PowerDbm, Vec<f64>)>| {
        table.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite powers"));
        let pts = table
            .into_iter()
            .map(|(p, v)| (p, v.iter().sum::<f64>() / v.len() as f64))
            .collect();
        EfficiencyCurve::new(pts)
    };
    let eta_main = finish(main)?;
    let eta_cold = if cold.is_empty() {
        eta_main.clone()
    } else {
        finish(cold)?
    };
    Ok(HarvesterModel {
        sensitivity: PowerDbm::new(DEFAULT_SENSITIVITY_DBM),
        v_phase,
        eta_cold,
        eta_main,
    })
}

/// Measured charge times of the two buffer capacitors (4.5 V target, 0 V
/// cold start, 1.9 V successive start).
pub mod dataset {
    use super::{ChargeKind, ChargeObservation};
    use crate::quantities::{Farad, PowerDbm, Seconds, Volt};

    pub const POWERS_DBM: [f64; 7] = [-15.0, -12.5, -10.0, -7.5, -5.0, -2.5, 0.0];

    pub const COLD_470UF_MIN: [f64; 7] = [
        51.6674441655477,
        14.2852517127991,
        6.51599034865697,
        3.03283656040827,
        1.5777442574501,
        0.794835801919301,
        0.399235741297404,
    ];
    pub const COLD_1MF_MIN: [f64; 7] = [
        116.099621045589,
        30.0775133252144,
        13.095721968015,
        6.31956293185552,
        3.19734695752462,
        1.65223197937012,
        0.86369704802831,
    ];
    pub const SUCCESSIVE_470UF_MIN: [f64; 7] = [
        32.4160100777944,
        8.42984786430995,
        3.60942230621974,
        1.63517007827759,
        0.830230331420899,
        0.426346508661906,
        0.219642905394236,
    ];
    pub const SUCCESSIVE_1MF_MIN: [f64; 7] = [
        77.8878621260325,
        18.9325842062632,
        7.41878706614176,
        3.46779428720474,
        1.74288170337677,
        0.882898986339569,
        0.460833887259165,
    ];

    pub const V_TARGET: f64 = 4.5;
    pub const V_SUCCESSIVE_START: f64 = 1.9;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Capacitor {
        /// 470 µF nominal, 490 µF measured.
        Uf470,
        /// 1 mF nominal, 1.1 mF measured.
        Mf1,
    }

    impl Capacitor {
        pub fn nominal(self) -> Farad {
            match self {
                Capacitor::Uf470 => Farad::from_micro(470.0),
                Capacitor::Mf1 => Farad::from_micro(1000.0),
            }
        }

        pub fn measured(self) -> Farad {
            match self {
                Capacitor::Uf470 => Farad::from_micro(490.0),
                Capacitor::Mf1 => Farad::from_micro(1100.0),
            }
        }

        /// The measured part whose nominal value is closest (in ratio) to `nominal`.
        pub fn nearest(nominal: Farad) -> Capacitor {
            let r470 = (nominal.value() / Capacitor::Uf470.nominal().value()).ln().abs();
            let r1m = (nominal.value() / Capacitor::Mf1.nominal().value()).ln().abs();
            if r470 <= r1m {
                Capacitor::Uf470
            } else {
                Capacitor::Mf1
            }
        }

        pub fn minutes(self, kind: ChargeKind) -> &'static [f64; 7] {
            match (self, kind) {
                (Capacitor::Uf470, ChargeKind::Cold) => &COLD_470UF_MIN,
                (Capacitor::Uf470, ChargeKind::Successive) => &SUCCESSIVE_470UF_MIN,
                (Capacitor::Mf1, ChargeKind::Cold) => &COLD_1MF_MIN,
                (Capacitor::Mf1, ChargeKind::Successive) => &SUCCESSIVE_1MF_MIN,
            }
        }
    }

    pub fn observations(cap: Capacitor) -> Vec<ChargeObservation> {
        let mut out = Vec::with_capacity(14);
        for kind in [ChargeKind::Cold, ChargeKind::Successive] {
            let v_start = match kind {
                ChargeKind::Cold => 0.0,
                ChargeKind::Successive => V_SUCCESSIVE_START,
            };
            for (&p, &t) in POWERS_DBM.iter().zip(cap.minutes(kind)) {
                out.push(ChargeObservation {
                    c: cap.measured(),
                    v_start: Volt::new(v_start),
                    v_target: Volt::new(V_TARGET),
                    p_in: PowerDbm::new(p),
                    t_measured: Seconds::from_minutes(t),
                    kind,
                });
            }
        }
        out
    }

    pub fn all_observations() -> Vec<ChargeObservation> {
        let mut v = observations(Capacitor::Uf470);
        v.extend(observations(Capacitor::Mf1));
        v
    }
}

/// Model calibrated on one of the built-in capacitor datasets.
pub fn builtin_model(cap: dataset::Capacitor) -> HarvesterModel {
    calibrate(&dataset::observations(cap), Volt::new(DEFAULT_V_PHASE))
        .expect("built-in dataset is consistent")
}
