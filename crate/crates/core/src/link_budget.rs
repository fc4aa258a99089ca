//! Downlink power budget for the wireless power transmitter.
//!
//! Path loss follows a log-distance law anchored at a measured point
//! (40 dB at 1 m with the node mounted on a leaf).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantities::{DecibelGain, MegaHertz, Meters, PowerDbm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinkError {
    #[error("distance must be positive, got {0} m")]
    Distance(f64),
    #[error("invalid path-loss model: {0}")]
    Model(String),
    #[error("invalid regulatory region '{name}': {reason}")]
    Region { name: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub anchor_loss: DecibelGain,
    pub anchor_distance: Meters,
    pub exponent: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel {
            anchor_loss: DecibelGain::new(40.0),
            anchor_distance: Meters::new(1.0),
            exponent: 2.0,
        }
    }
}

impl PathLossModel {
    pub fn new(anchor_loss: DecibelGain, anchor_distance: Meters, exponent: f64) -> Result<Self, LinkError> {
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(LinkError::Model(format!("exponent must be positive, got {exponent}")));
        }
        if anchor_loss.value() <= 0.0 {
            return Err(LinkError::Model(format!(
                "anchor loss must be positive, got {} dB",
                anchor_loss.value()
            )));
        }
        Ok(PathLossModel {
            anchor_loss,
            anchor_distance,
            exponent,
        })
    }
}

pub fn path_loss(model: &PathLossModel, d: f64) -> Result<DecibelGain, LinkError> {
    if !(d.is_finite() && d > 0.0) {
        return Err(LinkError::Distance(d));
    }
    let ratio = d / model.anchor_distance.value();
    Ok(DecibelGain::new(
        model.anchor_loss.value() + 10.0 * model.exponent * ratio.log10(),
    ))
}

pub fn received_power(tx: PowerDbm, model: &PathLossModel, d: f64) -> Result<PowerDbm, LinkError> {
    Ok(tx - path_loss(model, d)?)
}

pub fn required_tx_power(sensitivity: PowerDbm, model: &PathLossModel, d: f64) -> Result<PowerDbm, LinkError> {
    Ok(sensitivity + path_loss(model, d)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LimitKind {
    Eirp,
    Erp,
}

impl std::fmt::Display for LimitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LimitKind::Eirp => "EIRP",
            LimitKind::Erp => "ERP",
        })
    }
}

/// A band with a transmit power cap. ERP limits are compared as given,
/// without the dipole-to-isotropic conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegulatoryRegion {
    pub name: String,
    pub band_low: MegaHertz,
    pub band_high: MegaHertz,
    pub limit: PowerDbm,
    pub limit_kind: LimitKind,
}

impl RegulatoryRegion {
    pub fn new(
        name: impl Into<String>,
        band_low: MegaHertz,
        band_high: MegaHertz,
        limit: PowerDbm,
        limit_kind: LimitKind,
    ) -> Result<Self, LinkError> {
        let name = name.into();
        if band_low >= band_high {
            return Err(LinkError::Region {
                name,
                reason: format!(
                    "band_low {} MHz must be below band_high {} MHz",
                    band_low.value(),
                    band_high.value()
                ),
            });
        }
        Ok(RegulatoryRegion {
            name,
            band_low,
            band_high,
            limit,
            limit_kind,
        })
    }

    /// US 902-928 MHz unlicensed band, 36 dBm EIRP.
    pub fn fcc() -> Self {
        RegulatoryRegion {
            name: "fcc".into(),
            band_low: MegaHertz::new(902.0),
            band_high: MegaHertz::new(928.0),
            limit: PowerDbm::new(36.0),
            limit_kind: LimitKind::Eirp,
        }
    }

    /// EU 915-921 MHz band, 36 dBm ERP.
    pub fn eu() -> Self {
        RegulatoryRegion {
            name: "eu".into(),
            band_low: MegaHertz::new(915.0),
            band_high: MegaHertz::new(921.0),
            limit: PowerDbm::new(36.0),
            limit_kind: LimitKind::Erp,
        }
    }

    pub fn builtin() -> Vec<RegulatoryRegion> {
        vec![Self::fcc(), Self::eu()]
    }

    /// Case-insensitive lookup among `extra` first, then the built-in table.
    pub fn lookup(name: &str, extra: &[RegulatoryRegion]) -> Option<RegulatoryRegion> {
        extra
            .iter()
            .cloned()
            .chain(Self::builtin())
            .find(|r| r.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub in_band: bool,
    pub compliant: bool,
    /// Limit minus transmit power. Negative when over the limit.
    pub margin: DecibelGain,
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        self.in_band && self.compliant
    }
}

pub fn check_regulatory(tx: PowerDbm, region: &RegulatoryRegion, freq: MegaHertz) -> Verdict {
    Verdict {
        in_band: region.band_low <= freq && freq <= region.band_high,
        compliant: tx <= region.limit,
        margin: region.limit - tx,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn path_loss_anchor_and_extension() {
        let m = PathLossModel::default();
        assert_eq!(path_loss(&m, 1.0).unwrap(), DecibelGain::new(40.0));
        let steep = PathLossModel { exponent: 3.7, ..m };
        assert_eq!(path_loss(&steep, 1.0).unwrap(), DecibelGain::new(40.0));
        assert_relative_eq!(path_loss(&m, 2.0).unwrap().value(), 46.0206, max_relative = 1e-5);
        assert!(matches!(path_loss(&m, 0.0), Err(LinkError::Distance(_))));
        assert!(path_loss(&m, -1.0).is_err());
    }

    #[test]
    fn received_and_required() {
        let m = PathLossModel::default();
        assert_eq!(received_power(PowerDbm::new(25.0), &m, 1.0).unwrap(), PowerDbm::new(-15.0));
        assert_relative_eq!(
            received_power(PowerDbm::new(36.0), &m, 2.0).unwrap().value(),
            -10.0206,
            max_relative = 1e-5
        );
        assert_eq!(required_tx_power(PowerDbm::new(-15.0), &m, 1.0).unwrap(), PowerDbm::new(25.0));
        assert_relative_eq!(
            required_tx_power(PowerDbm::new(-15.0), &m, 2.0).unwrap().value(),
            31.0206,
            max_relative = 1e-5
        );
    }

    #[test]
    fn regulatory_verdicts() {
        let f915 = MegaHertz::new(915.0);
        let v = check_regulatory(PowerDbm::new(25.0), &RegulatoryRegion::fcc(), f915);
        assert!(v.in_band && v.compliant);
        assert_eq!(v.margin, DecibelGain::new(11.0));
        let v = check_regulatory(PowerDbm::new(36.0), &RegulatoryRegion::eu(), f915);
        assert!(v.in_band && v.compliant);
        assert_eq!(v.margin, DecibelGain::new(0.0));
        let v = check_regulatory(PowerDbm::new(25.0), &RegulatoryRegion::eu(), MegaHertz::new(868.0));
        assert!(!v.in_band);
        let v = check_regulatory(PowerDbm::new(37.0), &RegulatoryRegion::fcc(), f915);
        assert!(!v.compliant && v.margin.value() < 0.0);
    }

    #[test]
    fn region_lookup_and_validation() {
        assert_eq!(RegulatoryRegion::lookup("FCC", &[]).unwrap(), RegulatoryRegion::fcc());
        assert!(RegulatoryRegion::lookup("mars", &[]).is_none());
        let r = RegulatoryRegion::new("x", MegaHertz::new(930.0), MegaHertz::new(920.0), PowerDbm::new(30.0), LimitKind::Eirp);
        assert!(r.is_err());
        assert!(PathLossModel::new(DecibelGain::new(40.0), Meters::new(1.0), 0.0).is_err());
    }
}
