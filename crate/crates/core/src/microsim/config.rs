//! Scenario configuration as read from / written to TOML.
//!
//! Speeds are given in km/h here and converted to m/s when the simulation is
//! built; nothing downstream sees km/h.

use serde::{Deserialize, Serialize};

use crate::access_control::{AccessLoopConfig, LagGains};
use crate::domain::{
    check_partition, kmh_to_ms, EdgeId, LogisticParams, MomentumClass, RoadEdge, VehicleId, VehicleSpec,
};
use crate::error::{Error, Result};
use crate::risk_model::AdvisoryBounds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeConfig {
    pub length_m: f64,
    pub lanes: usize,
    pub v_limit_kmh: f64,
    #[serde(default)]
    pub v_min_kmh: f64,
}

impl EdgeConfig {
    pub fn new(length_m: f64, lanes: usize, v_limit_kmh: f64, v_min_kmh: f64) -> Self {
        Self {
            length_m,
            lanes,
            v_limit_kmh,
            v_min_kmh,
        }
    }

    pub fn build(&self, id: EdgeId) -> Result<RoadEdge> {
        RoadEdge::new(
            id,
            self.length_m,
            self.lanes,
            kmh_to_ms(self.v_limit_kmh),
            kmh_to_ms(self.v_min_kmh),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkConfig {
    /// `approach` forks into the controlled `main` road and the `alt` road.
    Gate {
        approach: EdgeConfig,
        main: EdgeConfig,
        alt: EdgeConfig,
        /// Distance of the sensor gate before the junction, m.
        sensor_offset_m: f64,
    },
    /// A single controlled road.
    Highway { road: EdgeConfig },
}

/// Optional reduced top speed applied to a fraction of one vehicle type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowVariant {
    pub probability: f64,
    pub v_max_kmh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleType {
    pub name: String,
    pub mass_kg: f64,
    pub v_max_kmh: f64,
    pub length_m: f64,
    pub accel: f64,
    pub decel: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slow: Option<SlowVariant>,
}

impl VehicleType {
    pub fn motorcycle(mass_kg: f64, v_max_kmh: f64) -> Self {
        Self::with_dynamics("motorcycle", mass_kg, v_max_kmh, 2.2, 4.0, 6.0)
    }

    pub fn passenger(mass_kg: f64, v_max_kmh: f64) -> Self {
        Self::with_dynamics("pv", mass_kg, v_max_kmh, 4.5, 2.6, 4.5)
    }

    pub fn hgv(mass_kg: f64, v_max_kmh: f64) -> Self {
        Self::with_dynamics("hgv", mass_kg, v_max_kmh, 12.0, 1.0, 3.5)
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    fn with_dynamics(name: &str, mass_kg: f64, v_max_kmh: f64, length_m: f64, accel: f64, decel: f64) -> Self {
        Self {
            name: name.to_string(),
            mass_kg,
            v_max_kmh,
            length_m,
            accel,
            decel,
            slow: None,
        }
    }

    pub fn spec(&self, id: VehicleId, slow: bool) -> Result<VehicleSpec> {
        let v_max = match (&self.slow, slow) {
            (Some(s), true) => s.v_max_kmh,
            _ => self.v_max_kmh,
        };
        VehicleSpec::new(id, self.mass_kg, kmh_to_ms(v_max), self.length_m, self.accel, self.decel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalProcess {
    None,
    /// Independent Bernoulli trial per type and 1 s step with probability
    /// `rate / 60`; rates in veh/min, one per fleet entry.
    PerType { rates_per_min: Vec<f64> },
    /// One Bernoulli trial per step with probability `p_app`; the type is
    /// then drawn from `weights`.
    Mixed { p_app: f64, weights: Vec<f64> },
}

/// A vehicle placed on the network at a fixed step, used for staged
/// manoeuvres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedVehicle {
    pub vehicle_type: String,
    #[serde(default)]
    pub step: u64,
    pub lane: usize,
    pub position_m: f64,
    pub speed_kmh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConfig {
    pub name: String,
    /// Inclusive upper bound in kg·m/s; omitted for the last class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_upper: Option<f64>,
    pub delta_l: f64,
    pub delta_u: f64,
    pub lambda: f64,
    pub pi_0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessConfig {
    pub enabled: bool,
    pub reference_veh_per_min: f64,
    pub filter_window: usize,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub classes: Vec<ClassConfig>,
}

impl AccessConfig {
    pub fn loop_config(&self) -> AccessLoopConfig {
        AccessLoopConfig {
            reference: self.reference_veh_per_min,
            window: self.filter_window,
            gains: LagGains {
                alpha: self.alpha,
                beta: self.beta,
                kappa: self.kappa,
            },
        }
    }

    pub fn momentum_classes(&self) -> Result<Vec<MomentumClass>> {
        let mut lower = f64::NEG_INFINITY;
        let mut out = Vec::with_capacity(self.classes.len());
        for (i, c) in self.classes.iter().enumerate() {
            let last = i + 1 == self.classes.len();
            let upper = match (c.rho_upper, last) {
                (None, true) => f64::INFINITY,
                (Some(u), false) => u,
                (Some(_), true) => {
                    return Err(Error::Config(format!("last class `{}` must not set rho_upper", c.name)))
                }
                (None, false) => return Err(Error::Config(format!("class `{}` needs rho_upper", c.name))),
            };
            out.push(MomentumClass {
                name: c.name.clone(),
                rho_lower: lower,
                rho_upper: upper,
                gate_params: LogisticParams::new(c.delta_l, c.delta_u, c.lambda, c.pi_0)?,
            });
            lower = upper;
        }
        check_partition(&out)?;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisoryConfig {
    pub enabled: bool,
    pub horizon_m: f64,
    pub dv_cap_self_kmh: f64,
    pub dv_cap_other_kmh: f64,
    /// Steps between reference updates.
    #[serde(default = "one")]
    pub update_period: u64,
}

impl AdvisoryConfig {
    pub fn bounds(&self) -> Result<AdvisoryBounds> {
        AdvisoryBounds::from_kmh(self.dv_cap_self_kmh, self.dv_cap_other_kmh)
    }
}

fn one() -> u64 {
    1
}

/// Car-following and lane-change parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverConfig {
    /// Standstill distance kept to the leader, m.
    pub min_gap_m: f64,
    /// A slower leader closer than this triggers an overtaking attempt, m.
    pub overtake_lookahead_m: f64,
    /// Speed deficit below which a leader is not worth overtaking, m/s.
    pub overtake_threshold_ms: f64,
    /// Steps a vehicle waits after a lane change before the next one.
    pub lane_change_cooldown: u32,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            min_gap_m: 2.5,
            overtake_lookahead_m: 100.0,
            overtake_threshold_ms: 1.0,
            lane_change_cooldown: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// Number of 1 s steps.
    pub duration: u64,
    pub network: NetworkConfig,
    pub fleet: Vec<VehicleType>,
    pub arrivals: ArrivalProcess,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scripted: Vec<ScriptedVehicle>,
    pub access: AccessConfig,
    pub advisory: AdvisoryConfig,
    #[serde(default)]
    pub driver: DriverConfig,
    /// Keep per-vehicle, per-step traces of the controlled road.
    #[serde(default)]
    pub record_traces: bool,
}

impl SimConfig {
    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.fleet.iter().position(|t| t.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration == 0 {
            return Err(Error::Config("duration must be at least one step".into()));
        }
        match &self.network {
            NetworkConfig::Gate {
                approach,
                main,
                alt,
                sensor_offset_m,
            } => {
                let a = approach.build(EdgeId(0))?;
                main.build(EdgeId(1))?;
                alt.build(EdgeId(2))?;
                if approach.lanes > main.lanes || approach.lanes > alt.lanes {
                    return Err(Error::Config(
                        "the approach cannot have more lanes than the roads it feeds".into(),
                    ));
                }
                if !(*sensor_offset_m > 0.0 && *sensor_offset_m < a.length) {
                    return Err(Error::Config(format!(
                        "sensor offset {sensor_offset_m} m must lie inside the approach"
                    )));
                }
            }
            NetworkConfig::Highway { road } => {
                road.build(EdgeId(0))?;
            }
        }
        if self.fleet.is_empty() {
            return Err(Error::Config("the fleet needs at least one vehicle type".into()));
        }
        for (i, t) in self.fleet.iter().enumerate() {
            t.spec(VehicleId(0), false)?;
            if let Some(s) = &t.slow {
                if !(0.0..=1.0).contains(&s.probability) {
                    return Err(Error::Config(format!("slow probability of `{}` must be in [0, 1]", t.name)));
                }
                t.spec(VehicleId(0), true)?;
            }
            if self.fleet[..i].iter().any(|o| o.name == t.name) {
                return Err(Error::Config(format!("vehicle type `{}` defined twice", t.name)));
            }
        }
        match &self.arrivals {
            ArrivalProcess::None => {}
            ArrivalProcess::PerType { rates_per_min } => {
                if rates_per_min.len() != self.fleet.len() {
                    return Err(Error::Config(format!(
                        "{} arrival rates for {} vehicle types",
                        rates_per_min.len(),
                        self.fleet.len()
                    )));
                }
                if rates_per_min.iter().any(|r| !(0.0..=60.0).contains(r)) {
                    return Err(Error::Config("arrival rates must lie in [0, 60] veh/min".into()));
                }
            }
            ArrivalProcess::Mixed { p_app, weights } => {
                if !(0.0..=1.0).contains(p_app) {
                    return Err(Error::Config(format!("p_app = {p_app} is not a probability")));
                }
                if weights.len() != self.fleet.len() || weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::Config("one non-negative weight per vehicle type is required".into()));
                }
                if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::Config("type weights must sum to 1".into()));
                }
            }
        }
        for s in &self.scripted {
            if self.type_index(&s.vehicle_type).is_none() {
                return Err(Error::Config(format!("scripted vehicle uses unknown type `{}`", s.vehicle_type)));
            }
            let entry = match &self.network {
                NetworkConfig::Gate { approach, .. } => approach,
                NetworkConfig::Highway { road } => road,
            };
            if s.lane >= entry.lanes || !(s.position_m >= 0.0 && s.position_m <= entry.length_m) {
                return Err(Error::Config("scripted vehicle placed outside its road".into()));
            }
        }
        self.access.momentum_classes()?;
        self.access.loop_config().gains.validate()?;
        crate::access_control::AccessLoop::new(&self.access.loop_config())?;
        self.advisory.bounds()?;
        if !(self.advisory.horizon_m > 0.0) || self.advisory.update_period == 0 {
            return Err(Error::Config("advisory horizon and update period must be positive".into()));
        }
        let d = &self.driver;
        if !(d.min_gap_m >= 0.0 && d.overtake_lookahead_m > 0.0 && d.overtake_threshold_ms >= 0.0) {
            return Err(Error::Config("invalid driver parameters".into()));
        }
        Ok(())
    }
}
