//! Weight accounting for node design variants.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantities::Grams;

/// Target mass for a leaf-mounted node; a variant passes when strictly below.
pub const WEIGHT_LIMIT_G: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BomError {
    #[error("unknown baseline variant '{0}'")]
    UnknownBaseline(String),
    #[error("variant '{0}' has no components")]
    Empty(String),
    #[error("unknown component category '{0}' (pcb|additional|storage)")]
    Category(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Pcb,
    Additional,
    Storage,
}

impl std::str::FromStr for Category {
    type Err = BomError;
    fn from_str(s: &str) -> Result<Self, BomError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pcb" => Ok(Category::Pcb),
            "additional" => Ok(Category::Additional),
            "storage" => Ok(Category::Storage),
            other => Err(BomError::Category(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub label: String,
    pub weight: Grams,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignVariant {
    pub name: String,
    pub components: Vec<Component>,
}

impl DesignVariant {
    pub fn new(name: impl Into<String>, components: Vec<Component>) -> Result<Self, BomError> {
        let name = name.into();
        if components.is_empty() {
            return Err(BomError::Empty(name));
        }
        Ok(DesignVariant { name, components })
    }

    /// Sum of component weights. Accumulated in whole micrograms so that
    /// decimal gram inputs add up without binary rounding residue.
    pub fn total(&self) -> Grams {
        let ug: i64 = self
            .components
            .iter()
            .map(|c| (c.weight.value() * 1e6).round() as i64)
            .sum();
        Grams::new(ug as f64 / 1e6)
    }

    pub fn category_total(&self, cat: Category) -> Grams {
        let ug: i64 = self
            .components
            .iter()
            .filter(|c| c.category == cat)
            .map(|c| (c.weight.value() * 1e6).round() as i64)
            .sum();
        Grams::new(ug as f64 / 1e6)
    }
}

fn component(label: &str, grams: f64, category: Category) -> Component {
    Component {
        label: label.into(),
        weight: Grams::new(grams),
        category,
    }
}

/// Battery-powered node and the two batteryless variants.
pub fn builtin_variants() -> Vec<DesignVariant> {
    use Category::*;
    vec![
        DesignVariant {
            name: "battery-powered".into(),
            components: vec![
                component("populated pcb", 1.4, Pcb),
                component("battery mount", 1.17, Additional),
                component("battery", 3.01, Storage),
            ],
        },
        DesignVariant {
            name: "case-i".into(),
            components: vec![
                component("populated pcb", 1.4, Pcb),
                component("harvester, matching and antenna", 0.6, Additional),
                component("470 uF capacitor", 0.97, Storage),
            ],
        },
        DesignVariant {
            name: "case-ii".into(),
            components: vec![
                component("populated pcb", 1.4, Pcb),
                component("harvester, matching and antenna", 0.6, Additional),
                component("1 mF capacitor", 1.44, Storage),
            ],
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub name: String,
    pub total: Grams,
    /// Signed change against the baseline, %, e.g. −46.8.
    pub delta_pct: f64,
    /// `delta_pct` at one decimal.
    pub delta_pct_1dp: f64,
    /// `delta_pct` rounded to a whole percent for display.
    pub delta_pct_display: i64,
    pub under_limit: bool,
}

pub fn weight_report(variants: &[DesignVariant], baseline: &str) -> Result<Vec<WeightRow>, BomError> {
    let base = variants
        .iter()
        .find(|v| v.name == baseline)
        .ok_or_else(|| BomError::UnknownBaseline(baseline.into()))?;
    let base_total = base.total().value();
    Ok(variants
        .iter()
        .map(|v| {
            let total = v.total();
            let delta = if v.name == base.name {
                0.0
            } else {
                100.0 * (total.value() / base_total - 1.0)
            };
            WeightRow {
                name: v.name.clone(),
                total,
                delta_pct: delta,
                delta_pct_1dp: (delta * 10.0).round() / 10.0,
                delta_pct_display: delta.round() as i64,
                under_limit: total.value() < WEIGHT_LIMIT_G,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_totals_and_deltas() {
        let rows = weight_report(&builtin_variants(), "battery-powered").unwrap();
        let totals: Vec<f64> = rows.iter().map(|r| r.total.value()).collect();
        assert_eq!(totals, vec![5.58, 2.97, 3.44]);
        assert_eq!(rows[0].delta_pct, 0.0);
        assert_eq!(rows[1].delta_pct_1dp, -46.8);
        assert_eq!(rows[2].delta_pct_1dp, -38.4);
        assert_eq!(rows[1].delta_pct_display, -47);
        assert_eq!(rows[2].delta_pct_display, -38);
        let under: Vec<bool> = rows.iter().map(|r| r.under_limit).collect();
        assert_eq!(under, vec![false, true, true]);
    }

    #[test]
    fn unknown_baseline() {
        assert!(matches!(
            weight_report(&builtin_variants(), "coin-cell"),
            Err(BomError::UnknownBaseline(_))
        ));
    }

    #[test]
    fn category_totals() {
        let v = &builtin_variants()[0];
        assert_eq!(v.category_total(Category::Storage).value(), 3.01);
        assert!(DesignVariant::new("x", vec![]).is_err());
    }
}
