//! Vocabulary types shared by every other module.
//!
//! Everything in here is SI: kilograms, metres, seconds, metres per second and
//! kg·m/s for momentum. Kilometres per hour only show up in configuration files
//! and reports, converted through [`kmh_to_ms`] / [`ms_to_kmh`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub fn kmh_to_ms(kmh: f64) -> f64 {
    kmh / 3.6
}

pub fn ms_to_kmh(ms: f64) -> f64 {
    ms * 3.6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VehicleId(pub u64);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

/// Static properties of one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSpec {
    pub id: VehicleId,
    /// kg
    pub mass: f64,
    /// Physical top speed of the vehicle, m/s.
    pub v_max_self: f64,
    /// m
    pub length: f64,
    /// m/s²
    pub accel_max: f64,
    /// m/s², positive number
    pub decel_max: f64,
}

impl VehicleSpec {
    pub fn new(
        id: VehicleId,
        mass: f64,
        v_max_self: f64,
        length: f64,
        accel_max: f64,
        decel_max: f64,
    ) -> Result<Self> {
        let spec = Self {
            id,
            mass,
            v_max_self,
            length,
            accel_max,
            decel_max,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        positive("mass", self.mass)?;
        if !(self.v_max_self >= 0.0 && self.v_max_self.is_finite()) {
            return Err(invalid("v_max_self", format!("must be >= 0, got {}", self.v_max_self)));
        }
        positive("length", self.length)?;
        positive("accel_max", self.accel_max)?;
        positive("decel_max", self.decel_max)
    }
}

/// Dynamic state of a vehicle inside one simulation instance.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub spec: VehicleSpec,
    pub edge: EdgeId,
    pub lane: usize,
    /// Front bumper, metres from the start of `edge`. The body covers
    /// `[position - length, position]`.
    pub position: f64,
    /// m/s
    pub speed: f64,
    /// Step at which the vehicle entered the edge it is measured on.
    pub entered_at: u64,
    pub exited_at: Option<u64>,
}

impl VehicleState {
    pub fn rear(&self) -> f64 {
        self.position - self.spec.length
    }
}

/// One directional road segment.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadEdge {
    pub id: EdgeId,
    /// m
    pub length: f64,
    pub lanes: usize,
    /// Speed limit, m/s.
    pub v_limit: f64,
    /// Minimum speed, m/s (0 when the road has none).
    pub v_min: f64,
}

impl RoadEdge {
    pub fn new(id: EdgeId, length: f64, lanes: usize, v_limit: f64, v_min: f64) -> Result<Self> {
        let edge = Self {
            id,
            length,
            lanes,
            v_limit,
            v_min,
        };
        edge.validate()?;
        Ok(edge)
    }

    pub fn validate(&self) -> Result<()> {
        positive("edge.length", self.length)?;
        if self.lanes == 0 {
            return Err(invalid("edge.lanes", "an edge needs at least one lane"));
        }
        positive("edge.v_limit", self.v_limit)?;
        if !(self.v_min >= 0.0 && self.v_min <= self.v_limit) {
            return Err(invalid(
                "edge.v_min",
                format!("must satisfy 0 <= v_min <= v_limit, got {} / {}", self.v_min, self.v_limit),
            ));
        }
        Ok(())
    }
}

/// Parameters of the admission logistic
/// `p(π) = δ_l + δ_u / (1 + exp(-λ (π - π_0)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub delta_l: f64,
    pub delta_u: f64,
    pub lambda: f64,
    pub pi_0: f64,
}

impl LogisticParams {
    pub fn new(delta_l: f64, delta_u: f64, lambda: f64, pi_0: f64) -> Result<Self> {
        let p = Self {
            delta_l,
            delta_u,
            lambda,
            pi_0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_l > 0.0 && self.delta_l < 1.0) {
            return Err(invalid("delta_l", format!("must lie in (0, 1), got {}", self.delta_l)));
        }
        if !(self.delta_u > 0.0 && self.delta_u < 1.0) {
            return Err(invalid("delta_u", format!("must lie in (0, 1), got {}", self.delta_u)));
        }
        if self.delta_l + self.delta_u > 1.0 + 1e-12 {
            return Err(invalid(
                "delta_u",
                format!("delta_l + delta_u must not exceed 1, got {}", self.delta_l + self.delta_u),
            ));
        }
        positive("lambda", self.lambda)?;
        if !self.pi_0.is_finite() {
            return Err(invalid("pi_0", "must be finite"));
        }
        Ok(())
    }
}

/// A momentum band `(rho_lower, rho_upper]` with its own admission logistic.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumClass {
    pub name: String,
    pub rho_lower: f64,
    pub rho_upper: f64,
    pub gate_params: LogisticParams,
}

impl MomentumClass {
    pub fn contains(&self, rho: f64) -> bool {
        rho > self.rho_lower && rho <= self.rho_upper
    }
}

/// Maximum momentum a vehicle can carry on `edge`: mass times the lower of its
/// own top speed and the road limit.
pub fn rho_max(spec: &VehicleSpec, edge: &RoadEdge) -> f64 {
    spec.mass * spec.v_max_self.min(edge.v_limit)
}

/// Checks that `classes` tile the momentum axis: first lower bound −∞, last
/// upper bound +∞, each lower bound equal to the previous upper bound.
pub fn check_partition(classes: &[MomentumClass]) -> Result<()> {
    let (first, last) = match (classes.first(), classes.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::Config("at least one momentum class is required".into())),
    };
    if first.rho_lower != f64::NEG_INFINITY {
        return Err(Error::Config(format!(
            "first class `{}` must start at -inf, starts at {}",
            first.name, first.rho_lower
        )));
    }
    if last.rho_upper != f64::INFINITY {
        return Err(Error::Config(format!(
            "last class `{}` must end at +inf, ends at {}",
            last.name, last.rho_upper
        )));
    }
    for c in classes {
        if !(c.rho_lower < c.rho_upper) {
            return Err(Error::Config(format!("class `{}` has an empty momentum range", c.name)));
        }
        c.gate_params.validate()?;
    }
    for w in classes.windows(2) {
        if w[0].rho_upper != w[1].rho_lower {
            return Err(Error::Config(format!(
                "classes `{}` and `{}` are not contiguous ({} vs {})",
                w[0].name, w[1].name, w[0].rho_upper, w[1].rho_lower
            )));
        }
    }
    Ok(())
}

/// Index of the class owning `rho`. Boundaries belong to the lower class.
pub fn classify_index(rho: f64, classes: &[MomentumClass]) -> Result<usize> {
    check_partition(classes)?;
    if !(rho > 0.0) {
        return Err(invalid("rho", format!("momentum must be positive to classify, got {rho}")));
    }
    classes
        .iter()
        .position(|c| c.contains(rho))
        .ok_or_else(|| Error::Config(format!("no class contains rho = {rho}")))
}

pub fn classify(rho: f64, classes: &[MomentumClass]) -> Result<&MomentumClass> {
    classify_index(rho, classes).map(|i| &classes[i])
}

/// Builds contiguous classes from ascending inclusive upper bounds. `uppers`
/// has one entry fewer than `params`; the final class is open-ended.
pub fn classes_from_bounds(
    names: &[&str],
    uppers: &[f64],
    params: &[LogisticParams],
) -> Result<Vec<MomentumClass>> {
    if names.len() != params.len() || uppers.len() + 1 != params.len() {
        return Err(Error::Config(format!(
            "{} names, {} bounds and {} parameter sets do not describe a partition",
            names.len(),
            uppers.len(),
            params.len()
        )));
    }
    let mut lower = f64::NEG_INFINITY;
    let mut out = Vec::with_capacity(params.len());
    for (i, p) in params.iter().enumerate() {
        let upper = uppers.get(i).copied().unwrap_or(f64::INFINITY);
        out.push(MomentumClass {
            name: names[i].to_string(),
            rho_lower: lower,
            rho_upper: upper,
            gate_params: *p,
        });
        lower = upper;
    }
    check_partition(&out)?;
    Ok(out)
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be > 0, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn edge(limit_kmh: f64) -> RoadEdge {
        RoadEdge::new(EdgeId(0), 1000.0, 2, kmh_to_ms(limit_kmh), 0.0).unwrap()
    }

    fn spec(mass: f64, vmax_kmh: f64) -> VehicleSpec {
        VehicleSpec::new(VehicleId(1), mass, kmh_to_ms(vmax_kmh), 4.5, 2.6, 4.5).unwrap()
    }

    fn three_classes() -> Vec<MomentumClass> {
        let p = LogisticParams::new(0.05, 0.9, 1.0, 0.0).unwrap();
        classes_from_bounds(&["I", "II", "III"], &[1e4, 3.3e5], &[p, p, p]).unwrap()
    }

    #[test]
    fn truck_limited_by_own_top_speed() {
        let rho = rho_max(&spec(20_000.0, 72.0), &edge(100.0));
        assert!((rho - 4.0e5).abs() < 1e-6);
    }

    #[test]
    fn motorcycle_sits_on_class_one_boundary() {
        let rho = rho_max(&spec(300.0, 120.0), &edge(130.0));
        assert!((rho - 1.0e4).abs() < 1e-9);
        assert_eq!(classify(rho, &three_classes()).unwrap().name, "I");
    }

    #[test]
    fn stationary_vehicle_has_zero_momentum() {
        assert_eq!(rho_max(&spec(1500.0, 0.0), &edge(50.0)), 0.0);
    }

    #[test]
    fn class_boundaries_belong_to_lower_class() {
        let classes = three_classes();
        assert_eq!(classify(1e4, &classes).unwrap().name, "I");
        assert_eq!(classify(1e5, &classes).unwrap().name, "II");
        assert_eq!(classify(3.3e5, &classes).unwrap().name, "II");
        assert_eq!(classify(3.3e5 + 1.0, &classes).unwrap().name, "III");
    }

    #[test]
    fn broken_partitions_are_rejected() {
        let mut classes = three_classes();
        classes[1].rho_lower = 2e4;
        assert!(matches!(classify(5e4, &classes), Err(Error::Config(_))));
        let mut open = three_classes();
        open[2].rho_upper = 1e9;
        assert!(check_partition(&open).is_err());
        assert!(check_partition(&[]).is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(VehicleSpec::new(VehicleId(0), 0.0, 10.0, 4.0, 1.0, 1.0).is_err());
        assert!(VehicleSpec::new(VehicleId(0), 10.0, -1.0, 4.0, 1.0, 1.0).is_err());
        assert!(RoadEdge::new(EdgeId(0), 100.0, 1, 10.0, 11.0).is_err());
        assert!(RoadEdge::new(EdgeId(0), 100.0, 0, 10.0, 0.0).is_err());
        assert!(LogisticParams::new(0.5, 0.6, 1.0, 0.0).is_err());
        assert!(LogisticParams::new(0.05, 0.9, 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn rho_max_is_homogeneous_in_mass(
            mass in 1.0f64..50_000.0,
            c in 0.01f64..100.0,
            vmax in 0.0f64..60.0,
            limit in 1.0f64..60.0,
        ) {
            let e = RoadEdge::new(EdgeId(0), 100.0, 1, limit, 0.0).unwrap();
            let a = VehicleSpec::new(VehicleId(0), mass, vmax, 4.0, 1.0, 1.0).unwrap();
            let b = VehicleSpec { mass: c * mass, ..a.clone() };
            let lhs = rho_max(&b, &e);
            let rhs = c * rho_max(&a, &e);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
            prop_assert!(rho_max(&a, &e) <= mass * limit + 1e-9);
            prop_assert!(rho_max(&a, &e) <= mass * vmax + 1e-9);
        }

        #[test]
        fn classify_is_total(rho in 1e-6f64..1e7) {
            let classes = three_classes();
            let idx = classify_index(rho, &classes).unwrap();
            prop_assert!(classes[idx].contains(rho));
            prop_assert_eq!(classes.iter().filter(|c| c.contains(rho)).count(), 1);
        }
    }
}
