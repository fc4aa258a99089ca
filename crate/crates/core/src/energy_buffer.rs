//! Storage capacitor between the harvester and the buck converter.
//!
//! The capacitor is treated as ideal: zero ESR and no leakage. Energy is
//! always derived from the measured capacitance, since the nominal part
//! value can be off by 5-10% for electrolytics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantities::{EnergyJoule, Farad, Volt};

/// Relative slack above `v_chrdy` tolerated in [`BufferState`].
pub const OVERSHOOT_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BufferError {
    #[error("threshold ordering violated: need 0 < v_floor ({v_floor}) <= v_ovdis ({v_ovdis}) < v_chrdy ({v_chrdy})")]
    Thresholds { v_floor: f64, v_ovdis: f64, v_chrdy: f64 },
    #[error("upper voltage {hi} V must exceed lower voltage {lo} V")]
    VoltageOrder { hi: f64, lo: f64 },
    #[error("required energy must be positive")]
    NoEnergy,
    #[error("insufficient charge: {deficit} J short")]
    InsufficientCharge { deficit: EnergyJoule },
    #[error("buffer voltage {voltage} V exceeds the charge ceiling {ceiling} V")]
    Overcharged { voltage: f64, ceiling: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BufferSpec {
    pub c_nominal: Farad,
    pub c_measured: Farad,
    /// Voltage at which the harvester enables the load.
    pub v_chrdy: Volt,
    /// Voltage at which the harvester disables the load.
    pub v_ovdis: Volt,
    /// Lowest voltage at which the load still runs.
    pub v_floor: Volt,
    /// Series resistance in ohms. Always zero at present; kept so configs
    /// can carry it.
    pub esr_ohm: f64,
}

impl BufferSpec {
    pub fn new(
        c_nominal: Farad,
        c_measured: Farad,
        v_chrdy: Volt,
        v_ovdis: Volt,
        v_floor: Volt,
    ) -> Result<Self, BufferError> {
        let spec = BufferSpec {
            c_nominal,
            c_measured,
            v_chrdy,
            v_ovdis,
            v_floor,
            esr_ohm: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), BufferError> {
        let (f, o, c) = (
            self.v_floor.value(),
            self.v_ovdis.value(),
            self.v_chrdy.value(),
        );
        if 0.0 < f && f <= o && o < c {
            Ok(())
        } else {
            Err(BufferError::Thresholds {
                v_floor: f,
                v_ovdis: o,
                v_chrdy: c,
            })
        }
    }

    /// 470 µF part (490 µF measured) with 4.5 V / 1.9 V thresholds.
    pub fn case_i() -> Self {
        Self::with_default_thresholds(Farad::from_micro(470.0), Farad::from_micro(490.0))
    }

    /// 1 mF part (1.1 mF measured) with 4.5 V / 1.9 V thresholds.
    pub fn case_ii() -> Self {
        Self::with_default_thresholds(Farad::from_micro(1000.0), Farad::from_micro(1100.0))
    }

    pub fn with_default_thresholds(c_nominal: Farad, c_measured: Farad) -> Self {
        BufferSpec {
            c_nominal,
            c_measured,
            v_chrdy: Volt::new(DEFAULT_V_CHRDY),
            v_ovdis: Volt::new(DEFAULT_V_OVDIS),
            v_floor: Volt::new(DEFAULT_V_FLOOR),
            esr_ohm: 0.0,
        }
    }

    /// Energy usable by the load in one activation: from `v_chrdy` down to `v_floor`.
    pub fn usable_energy(&self) -> EnergyJoule {
        // thresholds are ordered by construction
        extractable_energy(self, self.v_chrdy, self.v_floor).unwrap_or(EnergyJoule::ZERO)
    }
}

pub const DEFAULT_V_CHRDY: f64 = 4.5;
pub const DEFAULT_V_OVDIS: f64 = 1.9;
pub const DEFAULT_V_FLOOR: f64 = 1.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BufferState {
    pub voltage: Volt,
}

impl BufferState {
    pub fn new(spec: &BufferSpec, voltage: Volt) -> Result<Self, BufferError> {
        let ceiling = spec.v_chrdy.value() * (1.0 + OVERSHOOT_MARGIN);
        if voltage.value() > ceiling {
            return Err(BufferError::Overcharged {
                voltage: voltage.value(),
                ceiling,
            });
        }
        Ok(BufferState { voltage })
    }

    pub fn empty() -> Self {
        BufferState {
            voltage: Volt::new(0.0),
        }
    }
}

/// C_B = 2·E / (V_CHRDY² − V_OVDIS²).
pub fn size_buffer(e_req: EnergyJoule, v_chrdy: Volt, v_ovdis: Volt) -> Result<Farad, BufferError> {
    if !(v_chrdy.value() > v_ovdis.value() && v_ovdis.value() > 0.0) {
        return Err(BufferError::VoltageOrder {
            hi: v_chrdy.value(),
            lo: v_ovdis.value(),
        });
    }
    if e_req.value() <= 0.0 {
        return Err(BufferError::NoEnergy);
    }
    Ok(Farad::new(
        2.0 * e_req.value() / (v_chrdy.squared() - v_ovdis.squared()),
    ))
}

/// ½·C·V².
pub fn stored_energy(c: Farad, v: Volt) -> EnergyJoule {
    EnergyJoule::new(0.5 * c.value() * v.squared())
}

/// Energy released when the buffer falls from `v_hi` to `v_lo`.
pub fn extractable_energy(spec: &BufferSpec, v_hi: Volt, v_lo: Volt) -> Result<EnergyJoule, BufferError> {
    if v_hi < v_lo {
        return Err(BufferError::VoltageOrder {
            hi: v_hi.value(),
            lo: v_lo.value(),
        });
    }
    Ok(EnergyJoule::new(
        0.5 * spec.c_measured.value() * (v_hi.squared() - v_lo.squared()),
    ))
}

/// Remove `e` from the buffer. Fails, reporting the shortfall, when the
/// buffer holds less than `e` in total.
pub fn drain(spec: &BufferSpec, state: BufferState, e: EnergyJoule) -> Result<BufferState, BufferError> {
    let c = spec.c_measured.value();
    let v2 = state.voltage.squared() - 2.0 * e.value() / c;
    if v2 < 0.0 {
        let deficit = e.saturating_sub(stored_energy(spec.c_measured, state.voltage));
        return Err(BufferError::InsufficientCharge { deficit });
    }
    Ok(BufferState {
        voltage: Volt::new(v2.sqrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sizing_matches_reported_capacitances() {
        let c1 = size_buffer(EnergyJoule::from_milli(2.88), Volt::new(4.5), Volt::new(1.9)).unwrap();
        assert_relative_eq!(c1.micro(), 346.1538, max_relative = 1e-6);
        let c2 = size_buffer(EnergyJoule::from_milli(9.11), Volt::new(4.5), Volt::new(1.9)).unwrap();
        assert_relative_eq!(c2.micro(), 1094.9519, max_relative = 1e-6);
        let c3 = size_buffer(EnergyJoule::from_milli(2.88), Volt::new(4.5), Volt::new(2.2)).unwrap();
        assert_relative_eq!(c3.micro(), 373.7832, max_relative = 1e-6);
    }

    #[test]
    fn sizing_rejects_inverted_thresholds() {
        let r = size_buffer(EnergyJoule::from_milli(1.0), Volt::new(1.9), Volt::new(4.5));
        assert!(matches!(r, Err(BufferError::VoltageOrder { .. })));
        let r = size_buffer(EnergyJoule::from_milli(1.0), Volt::new(2.0), Volt::new(2.0));
        assert!(r.is_err());
        let r = size_buffer(EnergyJoule::ZERO, Volt::new(4.5), Volt::new(1.9));
        assert!(matches!(r, Err(BufferError::NoEnergy)));
    }

    #[test]
    fn stored_energy_values() {
        assert_relative_eq!(
            stored_energy(Farad::from_micro(490.0), Volt::new(4.5)).milli(),
            4.96125,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            stored_energy(Farad::from_micro(1100.0), Volt::new(4.5)).milli(),
            11.1375,
            max_relative = 1e-12
        );
        assert_eq!(stored_energy(Farad::from_micro(1.0), Volt::new(0.0)), EnergyJoule::ZERO);
    }

    #[test]
    fn extractable_energy_cases() {
        let e1 = extractable_energy(&BufferSpec::case_i(), Volt::new(4.5), Volt::new(1.9)).unwrap();
        assert_relative_eq!(e1.milli(), 4.0768, max_relative = 1e-12);
        assert!(e1.milli() >= 2.88);
        let e2 = extractable_energy(&BufferSpec::case_ii(), Volt::new(4.5), Volt::new(1.9)).unwrap();
        assert_relative_eq!(e2.milli(), 9.152, max_relative = 1e-12);
        assert!(e2.milli() >= 9.11);
        let e0 = extractable_energy(&BufferSpec::case_i(), Volt::new(3.3), Volt::new(3.3)).unwrap();
        assert_eq!(e0, EnergyJoule::ZERO);
        assert!(extractable_energy(&BufferSpec::case_i(), Volt::new(1.0), Volt::new(2.0)).is_err());
    }

    #[test]
    fn drain_case_i_cycle() {
        let spec = BufferSpec::case_i();
        let s = BufferState { voltage: Volt::new(4.5) };
        let after = drain(&spec, s, EnergyJoule::from_milli(2.88)).unwrap();
        let expected = (20.25f64 - 2.0 * 2.88e-3 / 490e-6).sqrt();
        assert_relative_eq!(after.voltage.value(), expected, max_relative = 1e-14);
        assert_relative_eq!(after.voltage.value(), 2.914_59, max_relative = 1e-5);
        assert_eq!(drain(&spec, s, EnergyJoule::ZERO).unwrap(), s);
    }

    #[test]
    fn drain_reports_deficit() {
        let spec = BufferSpec::case_i();
        let s = BufferState { voltage: Volt::new(1.9) };
        match drain(&spec, s, EnergyJoule::from_milli(4.077)) {
            Err(BufferError::InsufficientCharge { deficit }) => {
                let have = 0.5 * 490e-6 * 1.9f64.powi(2);
                assert_relative_eq!(deficit.value(), 4.077e-3 - have, max_relative = 1e-9);
            }
            other => panic!("expected InsufficientCharge, got {other:?}"),
        }
    }

    #[test]
    fn spec_threshold_validation() {
        let c = Farad::from_micro(100.0);
        assert!(BufferSpec::new(c, c, Volt::new(4.5), Volt::new(1.9), Volt::new(1.9)).is_ok());
        assert!(BufferSpec::new(c, c, Volt::new(4.5), Volt::new(1.9), Volt::new(2.0)).is_err());
        assert!(BufferSpec::new(c, c, Volt::new(1.9), Volt::new(1.9), Volt::new(1.0)).is_err());
        assert!(BufferSpec::new(c, c, Volt::new(4.5), Volt::new(1.9), Volt::new(0.0)).is_err());
    }

    #[test]
    fn state_overshoot_margin() {
        let spec = BufferSpec::case_i();
        assert!(BufferState::new(&spec, Volt::new(4.54)).is_ok());
        assert!(BufferState::new(&spec, Volt::new(4.6)).is_err());
    }
}
