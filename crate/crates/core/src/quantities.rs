//! Unit-carrying scalars and decibel arithmetic.
//!
//! Every physical value in the crate travels in one of these newtypes. Only
//! the operations that make dimensional sense are implemented, so adding a
//! `Volt` to a `Farad` is a compile error rather than a silent bug.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantityError {
    #[error("{unit} value must be finite, got {value}")]
    NotFinite { unit: &'static str, value: f64 },
    #[error("{unit} value must be non-negative, got {value}")]
    Negative { unit: &'static str, value: f64 },
    #[error("{unit} value must be strictly positive, got {value}")]
    NotPositive { unit: &'static str, value: f64 },
}

fn finite(unit: &'static str, value: f64) -> Result<f64, QuantityError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(QuantityError::NotFinite { unit, value })
    }
}

fn non_negative(unit: &'static str, value: f64) -> Result<f64, QuantityError> {
    let value = finite(unit, value)?;
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(QuantityError::Negative { unit, value })
    }
}

fn positive(unit: &'static str, value: f64) -> Result<f64, QuantityError> {
    let value = finite(unit, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(QuantityError::NotPositive { unit, value })
    }
}

macro_rules! quantity {
    ($(#[$meta:meta])* $name:ident, $unit:literal, $check:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(f64);

        impl $name {
            pub const UNIT: &'static str = $unit;

            /// Validating constructor.
            pub fn try_new(value: f64) -> Result<Self, QuantityError> {
                $check($unit, value).map(Self)
            }

            /// Panics when `value` violates the unit's invariant. Use
            /// [`Self::try_new`] for untrusted input.
            #[track_caller]
            pub fn new(value: f64) -> Self {
                match Self::try_new(value) {
                    Ok(q) => q,
                    Err(e) => panic!("{e}"),
                }
            }

            pub fn value(self) -> f64 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                if let Some(p) = f.precision() {
                    write!(f, "{:.*} {}", p, self.0, $unit)
                } else {
                    write!(f, "{} {}", self.0, $unit)
                }
            }
        }
    };
}

macro_rules! linear_ops {
    ($name:ident) => {
        impl Add for $name {
            type Output = $name;
            fn add(self, rhs: $name) -> $name {
                $name(self.0 + rhs.0)
            }
        }

        impl AddAssign for $name {
            fn add_assign(&mut self, rhs: $name) {
                self.0 += rhs.0;
            }
        }

        impl Mul<f64> for $name {
            type Output = $name;
            fn mul(self, rhs: f64) -> $name {
                $name(self.0 * rhs)
            }
        }

        impl Div for $name {
            type Output = f64;
            fn div(self, rhs: $name) -> f64 {
                self.0 / rhs.0
            }
        }

        impl $name {
            pub const ZERO: $name = $name(0.0);

            /// Difference clamped at zero, for quantities that cannot go negative.
            pub fn saturating_sub(self, rhs: $name) -> $name {
                $name((self.0 - rhs.0).max(0.0))
            }
        }
    };
}

quantity!(
    /// Absolute power referenced to 1 mW.
    PowerDbm, "dBm", finite
);
quantity!(
    /// Linear power in watts.
    PowerWatt, "W", non_negative
);
quantity!(EnergyJoule, "J", non_negative);
quantity!(Volt, "V", non_negative);
quantity!(Farad, "F", positive);
quantity!(Seconds, "s", non_negative);
quantity!(Grams, "g", non_negative);
quantity!(
    /// Relative gain or loss in dB. Positive values amplify.
    DecibelGain, "dB", finite
);
quantity!(Meters, "m", positive);
quantity!(MegaHertz, "MHz", positive);

linear_ops!(PowerWatt);
linear_ops!(EnergyJoule);
linear_ops!(Seconds);
linear_ops!(Grams);

impl Sub for Seconds {
    type Output = Seconds;
    /// Panics in debug builds if the result would be negative.
    fn sub(self, rhs: Seconds) -> Seconds {
        debug_assert!(self.0 >= rhs.0, "negative duration {} - {}", self.0, rhs.0);
        Seconds(self.0 - rhs.0)
    }
}

impl Add for DecibelGain {
    type Output = DecibelGain;
    fn add(self, rhs: DecibelGain) -> DecibelGain {
        DecibelGain(self.0 + rhs.0)
    }
}

impl Neg for DecibelGain {
    type Output = DecibelGain;
    fn neg(self) -> DecibelGain {
        DecibelGain(-self.0)
    }
}

impl Add<DecibelGain> for PowerDbm {
    type Output = PowerDbm;
    fn add(self, rhs: DecibelGain) -> PowerDbm {
        apply_gain(self, rhs)
    }
}

impl Sub<DecibelGain> for PowerDbm {
    type Output = PowerDbm;
    fn sub(self, rhs: DecibelGain) -> PowerDbm {
        apply_gain(self, -rhs)
    }
}

impl Sub for PowerDbm {
    type Output = DecibelGain;
    fn sub(self, rhs: PowerDbm) -> DecibelGain {
        DecibelGain(self.0 - rhs.0)
    }
}

impl Mul<Seconds> for PowerWatt {
    type Output = EnergyJoule;
    fn mul(self, rhs: Seconds) -> EnergyJoule {
        EnergyJoule(self.0 * rhs.0)
    }
}

impl Div<Seconds> for EnergyJoule {
    type Output = PowerWatt;
    fn div(self, rhs: Seconds) -> PowerWatt {
        PowerWatt(self.0 / rhs.0)
    }
}

impl Div<PowerWatt> for EnergyJoule {
    type Output = Seconds;
    fn div(self, rhs: PowerWatt) -> Seconds {
        Seconds(self.0 / rhs.0)
    }
}

impl Volt {
    /// Squared voltage, the quantity capacitor energy is linear in.
    pub fn squared(self) -> f64 {
        self.0 * self.0
    }
}

impl Farad {
    pub fn from_micro(uf: f64) -> Farad {
        Farad::new(uf * 1e-6)
    }

    pub fn micro(self) -> f64 {
        self.0 * 1e6
    }
}

impl EnergyJoule {
    pub fn from_milli(mj: f64) -> EnergyJoule {
        EnergyJoule::new(mj * 1e-3)
    }

    pub fn milli(self) -> f64 {
        self.0 * 1e3
    }
}

impl PowerWatt {
    pub fn from_milli(mw: f64) -> PowerWatt {
        PowerWatt::new(mw * 1e-3)
    }

    pub fn milli(self) -> f64 {
        self.0 * 1e3
    }
}

impl Seconds {
    pub fn from_millis(ms: f64) -> Seconds {
        Seconds::new(ms * 1e-3)
    }

    pub fn from_minutes(min: f64) -> Seconds {
        Seconds::new(min * 60.0)
    }

    pub fn minutes(self) -> f64 {
        self.0 / 60.0
    }
}

/// 1 mW × 10^(p/10).
pub fn dbm_to_watt(p: PowerDbm) -> PowerWatt {
    PowerWatt(1e-3 * 10f64.powf(p.0 / 10.0))
}

pub fn watt_to_dbm(p: PowerWatt) -> Result<PowerDbm, QuantityError> {
    positive(PowerWatt::UNIT, p.0)?;
    Ok(PowerDbm(10.0 * (p.0 / 1e-3).log10()))
}

pub fn apply_gain(p: PowerDbm, g: DecibelGain) -> PowerDbm {
    PowerDbm(p.0 + g.0)
}
