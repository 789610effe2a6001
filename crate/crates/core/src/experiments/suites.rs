//! Built-in scenario suites.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::microsim::config::{
    AccessConfig, AdvisoryConfig, ArrivalProcess, ClassConfig, DriverConfig, EdgeConfig, NetworkConfig,
    ScriptedVehicle, SimConfig, SlowVariant, VehicleType,
};

pub const BUILTIN: [&str; 4] = ["access_ABC", "overtake_ABC", "combined_ABCD", "volume_CDEF"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDef {
    pub name: String,
    /// Admit exactly as many vehicles per run as this earlier scenario did,
    /// drawn uniformly from the vehicles that reached its gate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_admitted_of: Option<String>,
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub name: String,
    pub runs: u64,
    /// Steps per run; overrides the scenario configs.
    pub duration: u64,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<ScenarioDef>,
}

impl Suite {
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "access_ABC" => Ok(access_abc()),
            "overtake_ABC" => Ok(overtake_abc()),
            "combined_ABCD" => Ok(combined_abcd()),
            "volume_CDEF" => Ok(volume_cdef()),
            _ => Err(Error::UnknownSuite(name.to_string())),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let suite: Suite = toml::from_str(s)?;
        suite.validate()?;
        Ok(suite)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn scenario(&self, name: &str) -> Option<&ScenarioDef> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    /// Config of `scenario` as it is actually run.
    pub fn effective_config(&self, scenario: &ScenarioDef) -> SimConfig {
        let mut cfg = scenario.config.clone();
        cfg.duration = self.duration;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.duration == 0 {
            return Err(Error::Config("a suite needs at least one run and one step".into()));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Config(format!("suite `{}` has no scenarios", self.name)));
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::Config(format!("scenario name `{}` must be [A-Za-z0-9_-]+", s.name)));
            }
            if self.scenarios[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::Config(format!("scenario `{}` defined twice", s.name)));
            }
            if let Some(src) = &s.match_admitted_of {
                if !self.scenarios[..i].iter().any(|o| &o.name == src) {
                    return Err(Error::Config(format!(
                        "scenario `{}` matches `{src}`, which must be defined before it",
                        s.name
                    )));
                }
                if !matches!(s.config.network, NetworkConfig::Gate { .. }) {
                    return Err(Error::Config(format!("scenario `{}` needs a gate network", s.name)));
                }
            }
            self.effective_config(s)
                .validate()
                .map_err(|e| Error::Config(format!("scenario `{}`: {e}", s.name)))?;
        }
        Ok(())
    }
}

fn advisory(enabled: bool) -> AdvisoryConfig {
    AdvisoryConfig {
        enabled,
        horizon_m: 300.0,
        dv_cap_self_kmh: 23.19,
        dv_cap_other_kmh: 30.86,
        update_period: 1,
    }
}

fn classes(params: [(f64, f64, f64, f64); 3]) -> Vec<ClassConfig> {
    let names = ["I", "II", "III"];
    let uppers = [Some(1e4), Some(3.3e5), None];
    params
        .iter()
        .zip(names.iter().zip(uppers))
        .map(|(&(delta_l, delta_u, lambda, pi_0), (name, rho_upper))| ClassConfig {
            name: name.to_string(),
            rho_upper,
            delta_l,
            delta_u,
            lambda,
            pi_0,
        })
        .collect()
}

fn access(enabled: bool, reference: f64, params: [(f64, f64, f64, f64); 3]) -> AccessConfig {
    AccessConfig {
        enabled,
        reference_veh_per_min: reference,
        filter_window: 20,
        alpha: 0.9,
        beta: 0.99,
        kappa: 1.0,
        classes: classes(params),
    }
}

fn scenario(name: &str, config: SimConfig) -> ScenarioDef {
    ScenarioDef {
        name: name.to_string(),
        match_admitted_of: None,
        config,
    }
}

/// Gate network at three demand levels with the access loop on.
pub fn access_abc() -> Suite {
    let params = [(0.05, 0.9, 1.0, -3.0), (0.05, 0.9, 1.0, 0.0), (0.05, 0.9, 1.0, 3.0)];
    let fleet = vec![
        VehicleType::motorcycle(200.0, 144.0),
        VehicleType::passenger(2000.0, 144.0).named("car"),
        VehicleType::hgv(20_000.0, 72.0).named("truck"),
    ];
    let scenarios = [("A", 1.0), ("B", 6.0), ("C", 11.0)]
        .iter()
        .map(|&(name, rate)| {
            scenario(
                name,
                SimConfig {
                    seed: 0,
                    duration: 1000,
                    network: NetworkConfig::Gate {
                        approach: EdgeConfig::new(300.0, 2, 50.0, 0.0),
                        main: EdgeConfig::new(500.0, 2, 100.0, 0.0),
                        alt: EdgeConfig::new(500.0, 2, 100.0, 0.0),
                        sensor_offset_m: 30.0,
                    },
                    fleet: fleet.clone(),
                    arrivals: ArrivalProcess::PerType {
                        rates_per_min: vec![rate; 3],
                    },
                    scripted: Vec::new(),
                    access: access(true, 9.0, params),
                    advisory: advisory(false),
                    driver: DriverConfig::default(),
                    record_traces: false,
                },
            )
        })
        .collect();
    Suite {
        name: "access_ABC".into(),
        runs: 100,
        duration: 1000,
        scenarios,
    }
}

/// One fast vehicle catching up with a slow or stranded one on a two-lane
/// highway with a 60 km/h minimum speed.
pub fn overtake_abc() -> Suite {
    let leaders = [
        ("A", VehicleType::hgv(20_000.0, 60.0).named("slow_hgv"), 60.0),
        ("B", VehicleType::motorcycle(300.0, 60.0).named("slow_motorcycle"), 60.0),
        ("C", VehicleType::passenger(2500.0, 0.0).named("stranded_pv"), 0.0),
    ];
    let followers = [
        VehicleType::motorcycle(300.0, 144.0),
        VehicleType::passenger(2500.0, 144.0),
        VehicleType::hgv(20_000.0, 144.0),
    ];
    let mut scenarios = Vec::new();
    for (case, leader, leader_kmh) in &leaders {
        for f in &followers {
            let config = SimConfig {
                seed: 0,
                duration: 180,
                network: NetworkConfig::Highway {
                    road: EdgeConfig::new(8000.0, 2, 130.0, 60.0),
                },
                fleet: vec![leader.clone(), f.clone()],
                arrivals: ArrivalProcess::None,
                scripted: vec![
                    ScriptedVehicle {
                        vehicle_type: leader.name.clone(),
                        step: 0,
                        lane: 0,
                        position_m: 700.0,
                        speed_kmh: *leader_kmh,
                    },
                    ScriptedVehicle {
                        vehicle_type: f.name.clone(),
                        step: 0,
                        lane: 0,
                        position_m: 50.0,
                        speed_kmh: 130.0,
                    },
                ],
                access: access(false, 9.0, [(0.05, 0.9, 1.0, -3.0), (0.05, 0.9, 1.0, 0.0), (0.05, 0.9, 1.0, 3.0)]),
                advisory: advisory(true),
                driver: DriverConfig::default(),
                record_traces: true,
            };
            scenarios.push(scenario(&format!("{case}_{}", f.name), config));
        }
    }
    Suite {
        name: "overtake_ABC".into(),
        runs: 1,
        duration: 180,
        scenarios,
    }
}

const COMBINED_PARAMS: [(f64, f64, f64, f64); 3] =
    [(0.90, 0.09, 1.0, -3.0), (0.3, 0.69, 1.0, 0.0), (0.01, 0.98, 1.0, 3.0)];

fn combined_config(speed: bool, access_on: bool) -> SimConfig {
    // regular HGVs are only held back by the road limit; the slow variant is the one overtaken
    let mut hgv = VehicleType::hgv(20_000.0, 130.0);
    hgv.slow = Some(SlowVariant {
        probability: 0.3,
        v_max_kmh: 60.0,
    });
    SimConfig {
        seed: 0,
        duration: 3600,
        network: NetworkConfig::Gate {
            approach: EdgeConfig::new(300.0, 2, 50.0, 0.0),
            main: EdgeConfig::new(800.0, 3, 130.0, 0.0),
            alt: EdgeConfig::new(800.0, 2, 130.0, 0.0),
            sensor_offset_m: 30.0,
        },
        fleet: vec![
            VehicleType::motorcycle(200.0, 144.0),
            VehicleType::passenger(2500.0, 144.0),
            hgv,
        ],
        arrivals: ArrivalProcess::PerType {
            rates_per_min: vec![8.0; 3],
        },
        scripted: Vec::new(),
        access: access(access_on, 12.0, COMBINED_PARAMS),
        advisory: advisory(speed),
        driver: DriverConfig::default(),
        record_traces: false,
    }
}

/// Speed control and access control on a three-lane restricted road, alone
/// and together.
pub fn combined_abcd() -> Suite {
    Suite {
        name: "combined_ABCD".into(),
        runs: 50,
        duration: 3600,
        scenarios: vec![
            scenario("A", combined_config(false, false)),
            scenario("B", combined_config(true, false)),
            scenario("C", combined_config(false, true)),
            scenario("D", combined_config(true, true)),
        ],
    }
}

/// C and D against uncontrolled runs with the same number of admitted
/// vehicles picked at random (E pairs with C, F with D).
pub fn volume_cdef() -> Suite {
    let thinned = |name: &str, speed: bool, source: &str| ScenarioDef {
        name: name.to_string(),
        match_admitted_of: Some(source.to_string()),
        config: combined_config(speed, false),
    };
    Suite {
        name: "volume_CDEF".into(),
        runs: 50,
        duration: 3600,
        scenarios: vec![
            scenario("C", combined_config(false, true)),
            scenario("D", combined_config(true, true)),
            thinned("E", false, "C"),
            thinned("F", true, "D"),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate_and_round_trip() {
        for name in BUILTIN {
            let s = Suite::builtin(name).unwrap();
            s.validate().unwrap();
            let text = s.to_toml_string().unwrap();
            assert_eq!(Suite::from_toml_str(&text).unwrap(), s);
        }
    }

    #[test]
    fn combined_toggles() {
        let s = combined_abcd();
        let flags: Vec<(bool, bool)> = s
            .scenarios
            .iter()
            .map(|d| (d.config.advisory.enabled, d.config.access.enabled))
            .collect();
        assert_eq!(flags, [(false, false), (true, false), (false, true), (true, true)]);
    }

    #[test]
    fn unknown_suite() {
        assert!(matches!(Suite::builtin("nope"), Err(Error::UnknownSuite(_))));
    }

    #[test]
    fn forward_reference_is_rejected() {
        let mut s = volume_cdef();
        s.scenarios.swap(0, 2);
        assert!(s.validate().is_err());
    }
}
