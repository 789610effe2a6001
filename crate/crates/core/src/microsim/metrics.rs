use crate::domain::VehicleId;

/// Per-step record of the access loop and the gate.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSample {
    pub step: u64,
    /// Vehicles entering the controlled road this step.
    pub y: u32,
    pub y_hat: f64,
    pub error: f64,
    pub pi: f64,
    /// Gate requests per momentum class.
    pub requests: Vec<u32>,
    /// Admissions per momentum class.
    pub admitted: Vec<u32>,
    /// New arrivals per vehicle type.
    pub arrivals: Vec<u32>,
}

/// One vehicle's completed transit of the controlled road.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleRecord {
    pub id: VehicleId,
    pub type_index: usize,
    pub class: usize,
    pub entered_at: u64,
    pub exited_at: u64,
    /// Σ max(Δv_self − cap, 0), m/s·step.
    pub r_self: f64,
    pub r_other: f64,
}

impl VehicleRecord {
    pub fn travel_time(&self) -> u64 {
        self.exited_at - self.entered_at
    }

    pub fn r_total(&self) -> f64 {
        self.r_self + self.r_other
    }
}

/// Snapshot of one vehicle on the controlled road after a step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub vehicle: VehicleId,
    pub type_index: usize,
    pub lane: usize,
    pub position: f64,
    pub speed: f64,
    pub v_star: f64,
    pub binding: &'static str,
    pub leaders: usize,
    pub dv_self: f64,
    pub dv_other: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateCrossing {
    pub vehicle: VehicleId,
    pub class: usize,
    pub admitted: bool,
    pub step: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub seed: u64,
    pub steps: Vec<StepSample>,
    pub vehicles: Vec<VehicleRecord>,
    pub traces: Vec<TraceRow>,
    pub gate: Vec<GateCrossing>,
    pub arrivals: u64,
    pub exited: u64,
    /// Vehicles still on the controlled road when the run ended.
    pub in_area_at_end: u64,
    pub admitted: u64,
}

impl RunMetrics {
    pub fn mean_y_hat(&self, from_step: u64) -> f64 {
        mean(self.steps.iter().filter(|s| s.step >= from_step).map(|s| s.y_hat))
    }

    pub fn mean_error(&self, from_step: u64) -> f64 {
        mean(self.steps.iter().filter(|s| s.step >= from_step).map(|s| s.error))
    }
}

pub(crate) fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}
