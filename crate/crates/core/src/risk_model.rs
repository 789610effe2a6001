//! Crash-severity mathematics.
//!
//! A rear-end impact is treated as a perfectly inelastic, one-dimensional
//! collision: both vehicles leave the impact with one shared velocity and the
//! speed change each of them experiences (Δv) splits the closing speed in the
//! inverse ratio of the masses. The collision is only ever evaluated
//! predictively, never executed inside the simulator.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{kmh_to_ms, ms_to_kmh};
use crate::error::{invalid, Error, Result};

const DEFAULT_CURVES: &str = include_str!("../data/injury_curves.toml");

/// Result of a hypothetical perfectly inelastic impact between a striking
/// vehicle `i` and a struck vehicle `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionOutcome {
    pub v_shared_after: f64,
    /// Δv of the striking vehicle.
    pub delta_v_striker: f64,
    /// Δv of the struck vehicle.
    pub delta_v_struck: f64,
}

pub fn inelastic_collision(m_i: f64, v_i: f64, m_j: f64, v_j: f64) -> CollisionOutcome {
    let total = m_i + m_j;
    let closing = (v_i - v_j).abs();
    CollisionOutcome {
        v_shared_after: (m_i * v_i + m_j * v_j) / total,
        delta_v_striker: m_j / total * closing,
        delta_v_struck: m_i / total * closing,
    }
}

/// Caps on the predicted Δv of the striking vehicle (risk to self) and of
/// the struck vehicle (risk to others), both in m/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvisoryBounds {
    pub dv_cap_self: f64,
    pub dv_cap_other: f64,
}

impl AdvisoryBounds {
    pub fn new(dv_cap_self: f64, dv_cap_other: f64) -> Result<Self> {
        for (name, v) in [("dv_cap_self", dv_cap_self), ("dv_cap_other", dv_cap_other)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be > 0, got {v}")));
            }
        }
        Ok(Self {
            dv_cap_self,
            dv_cap_other,
        })
    }

    pub fn from_kmh(self_kmh: f64, other_kmh: f64) -> Result<Self> {
        Self::new(kmh_to_ms(self_kmh), kmh_to_ms(other_kmh))
    }
}

/// Summed surplus of predicted Δv over the caps across a transit.
///
/// Each trace entry is `(Δv_self, Δv_other)` for one step; the result is in
/// m/s·step.
pub fn risk_exceedance(trace: &[(f64, f64)], bounds: &AdvisoryBounds) -> (f64, f64) {
    trace.iter().fold((0.0, 0.0), |(rs, ro), &(dv_s, dv_o)| {
        (
            rs + (dv_s - bounds.dv_cap_self).max(0.0),
            ro + (dv_o - bounds.dv_cap_other).max(0.0),
        )
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Frontal,
    RearEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjuryLevel {
    Mais1,
    Mais2,
    Mais3,
    Mais4,
    Mais5,
    Fatality,
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Frontal => "frontal",
            Orientation::RearEnd => "rear_end",
        })
    }
}

impl fmt::Display for InjuryLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InjuryLevel::Mais1 => "mais1",
            InjuryLevel::Mais2 => "mais2",
            InjuryLevel::Mais3 => "mais3",
            InjuryLevel::Mais4 => "mais4",
            InjuryLevel::Mais5 => "mais5",
            InjuryLevel::Fatality => "fatality",
        })
    }
}

/// Logistic injury-probability curve over Δv expressed in km/h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjuryCurve {
    pub orientation: Orientation,
    pub level: InjuryLevel,
    pub intercept: f64,
    pub slope: f64,
    /// Inclusive Δv interval in km/h.
    pub valid_range_kmh: [f64; 2],
}

impl InjuryCurve {
    pub fn name(&self) -> String {
        format!("{}/{}", self.orientation, self.level)
    }

    fn logistic_kmh(&self, dv_kmh: f64) -> f64 {
        1.0 / (1.0 + (-(self.intercept + self.slope * dv_kmh)).exp())
    }
}

/// Probability of an injury at or above the curve's level for a Δv in m/s.
pub fn injury_probability(curve: &InjuryCurve, delta_v: f64) -> Result<f64> {
    let dv_kmh = ms_to_kmh(delta_v);
    let [lo, hi] = curve.valid_range_kmh;
    // the range is stated in km/h; allow for the m/s round trip
    let tol = 1e-9 * hi.abs().max(1.0);
    if !(dv_kmh >= lo - tol && dv_kmh <= hi + tol) {
        return Err(Error::OutOfRange {
            curve: curve.name(),
            delta_v_kmh: dv_kmh,
            lo,
            hi,
        });
    }
    Ok(curve.logistic_kmh(dv_kmh))
}

/// Inverse of [`injury_probability`]: the Δv (m/s) at which the curve reaches `p`.
pub fn delta_v_for_probability(curve: &InjuryCurve, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    if !(curve.slope > 0.0) {
        return Err(Error::NonInvertible(curve.name()));
    }
    let logit = (p / (1.0 - p)).ln();
    Ok(kmh_to_ms((logit - curve.intercept) / curve.slope))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjuryCurveSet {
    #[serde(rename = "curve")]
    pub curves: Vec<InjuryCurve>,
}

impl Default for InjuryCurveSet {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_CURVES).expect("bundled injury curves are valid")
    }
}

impl InjuryCurveSet {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let set: Self = toml::from_str(s)?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.curves.iter().enumerate() {
            let [lo, hi] = c.valid_range_kmh;
            if !(lo.is_finite() && hi.is_finite() && lo < hi && lo >= 0.0) {
                return Err(Error::Config(format!("curve {} has invalid range [{lo}, {hi}]", c.name())));
            }
            if !(c.intercept.is_finite() && c.slope.is_finite()) {
                return Err(Error::Config(format!("curve {} has non-finite coefficients", c.name())));
            }
            if self.curves[..i]
                .iter()
                .any(|o| o.orientation == c.orientation && o.level == c.level)
            {
                return Err(Error::Config(format!("curve {} is defined twice", c.name())));
            }
        }
        Ok(())
    }

    pub fn get(&self, orientation: Orientation, level: InjuryLevel) -> Option<&InjuryCurve> {
        self.curves
            .iter()
            .find(|c| c.orientation == orientation && c.level == level)
    }

    /// Tabulates every curve on a 0.5 km/h grid over its valid range.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["orientation", "level", "delta_v_kmh", "probability"])?;
        for c in &self.curves {
            let [lo, hi] = c.valid_range_kmh;
            let n = ((hi - lo) / 0.5).round() as usize;
            for k in 0..=n {
                let dv = (lo + 0.5 * k as f64).min(hi);
                w.write_record([
                    c.orientation.to_string(),
                    c.level.to_string(),
                    format!("{dv:.2}"),
                    format!("{:.9}", c.logistic_kmh(dv)),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
