//! Feedback admission control at the area gate.
//!
//! The measured admitted flow `ŷ[k]` (moving average of per-step admission
//! counts) is compared with the target `r`; a lag compensator turns the error
//! into a scalar `π[k]`, and every vehicle reaching the gate is admitted with a
//! class-specific logistic probability of `π[k]`.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{classify_index, rho_max, LogisticParams, MomentumClass, RoadEdge, VehicleId, VehicleSpec};
use crate::error::{invalid, Result};

/// Tunable gains of the lag compensator
/// `π[k] = β π[k-1] + κ (e[k] - α e[k-1])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagGains {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl LagGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.beta.is_finite() && self.kappa.is_finite()) {
            return Err(invalid("controller gains", "must be finite"));
        }
        if self.beta == 1.0 {
            return Err(invalid("beta", "a pole at z = 1 is not allowed (beta must differ from 1)"));
        }
        Ok(())
    }

    /// Steady-state ratio π*/e for a constant error.
    pub fn dc_gain(&self) -> f64 {
        self.kappa * (1.0 - self.alpha) / (1.0 - self.beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagControllerState {
    pub gains: LagGains,
    pub pi_prev: f64,
    pub e_prev: f64,
}

impl LagControllerState {
    pub fn new(gains: LagGains) -> Result<Self> {
        gains.validate()?;
        Ok(Self {
            gains,
            pi_prev: 0.0,
            e_prev: 0.0,
        })
    }

    pub fn step(&mut self, e_k: f64) -> f64 {
        let LagGains { alpha, beta, kappa } = self.gains;
        let pi = beta * self.pi_prev + kappa * (e_k - alpha * self.e_prev);
        self.pi_prev = pi;
        self.e_prev = e_k;
        pi
    }
}

/// Causal H-sample moving average turning admissions per 1 s step into veh/min.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowFilterState {
    window: VecDeque<u32>,
    h: usize,
    sum: u64,
}

impl FlowFilterState {
    pub fn new(h: usize) -> Result<Self> {
        if h == 0 {
            return Err(invalid("H", "filter window must hold at least one sample"));
        }
        Ok(Self {
            window: VecDeque::with_capacity(h),
            h,
            sum: 0,
        })
    }

    pub fn window_len(&self) -> usize {
        self.h
    }

    pub fn update(&mut self, y_k: u32) -> f64 {
        if self.window.len() == self.h {
            let old = self.window.pop_front().unwrap_or(0);
            self.sum -= u64::from(old);
        }
        self.window.push_back(y_k);
        self.sum += u64::from(y_k);
        60.0 / self.h as f64 * self.sum as f64
    }
}

pub fn admission_probability(params: &LogisticParams, pi_k: f64) -> f64 {
    params.delta_l + params.delta_u / (1.0 + (-params.lambda * (pi_k - params.pi_0)).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateDecision {
    pub vehicle: VehicleId,
    /// Index into the momentum class list.
    pub class: usize,
    pub rho: f64,
    pub p_yes: f64,
    pub admitted: bool,
    pub step: u64,
}

/// Classifies `vehicle` by its maximum momentum on `edge` (the controlled
/// road) and draws the admission outcome.
pub fn gate_decide<R: Rng + ?Sized>(
    vehicle: &VehicleSpec,
    edge: &RoadEdge,
    classes: &[MomentumClass],
    pi_k: f64,
    step: u64,
    rng: &mut R,
) -> Result<GateDecision> {
    let rho = rho_max(vehicle, edge);
    let class = classify_index(rho, classes)?;
    let p_yes = admission_probability(&classes[class].gate_params, pi_k);
    let admitted = rng.random::<f64>() < p_yes;
    Ok(GateDecision {
        vehicle: vehicle.id,
        class,
        rho,
        p_yes,
        admitted,
        step,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessLoopConfig {
    /// Target admitted flow, veh/min.
    pub reference: f64,
    /// Filter window, samples.
    pub window: usize,
    pub gains: LagGains,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSample {
    pub y: u32,
    pub y_hat: f64,
    pub error: f64,
    pub pi: f64,
}

/// Filter plus controller, advanced once per step with that step's admission count.
#[derive(Debug, Clone)]
pub struct AccessLoop {
    reference: f64,
    filter: FlowFilterState,
    controller: LagControllerState,
}

impl AccessLoop {
    pub fn new(cfg: &AccessLoopConfig) -> Result<Self> {
        if !(cfg.reference >= 0.0 && cfg.reference.is_finite()) {
            return Err(invalid("reference", format!("must be >= 0, got {}", cfg.reference)));
        }
        Ok(Self {
            reference: cfg.reference,
            filter: FlowFilterState::new(cfg.window)?,
            controller: LagControllerState::new(cfg.gains)?,
        })
    }

    /// Current controller output, used by gate decisions until the next update.
    pub fn pi(&self) -> f64 {
        self.controller.pi_prev
    }

    pub fn update(&mut self, y_k: u32) -> LoopSample {
        let y_hat = self.filter.update(y_k);
        let error = self.reference - y_hat;
        let pi = self.controller.step(error);
        LoopSample {
            y: y_k,
            y_hat,
            error,
            pi,
        }
    }
}
