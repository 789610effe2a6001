use crate::microsim::metrics::{mean, RunMetrics, VehicleRecord};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RiskSummary {
    pub mean_r_self: f64,
    pub mean_r_other: f64,
    /// Vehicles that completed their transit and were averaged over.
    pub completed: usize,
}

impl RiskSummary {
    pub fn mean_r_total(&self) -> f64 {
        self.mean_r_self + self.mean_r_other
    }
}

/// Mean exceedance over completed transits; vehicles still on the road at
/// the end of a run never produce a record and are reported separately.
pub fn aggregate_risk<'a>(records: impl IntoIterator<Item = &'a VehicleRecord>) -> RiskSummary {
    let (mut rs, mut ro, mut n) = (0.0, 0.0, 0usize);
    for r in records {
        rs += r.r_self;
        ro += r.r_other;
        n += 1;
    }
    if n == 0 {
        return RiskSummary::default();
    }
    RiskSummary {
        mean_r_self: rs / n as f64,
        mean_r_other: ro / n as f64,
        completed: n,
    }
}

/// First step of the steady-state window: the last 500 steps, or the second
/// half of shorter runs.
pub fn tail_start(duration: u64) -> u64 {
    duration - (duration / 2).min(500)
}

/// Run-level metrics, one row of `metrics_<scenario>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run: u64,
    pub seed: u64,
    pub arrivals: u64,
    pub gate_requests: u64,
    pub admitted: u64,
    pub completed: u64,
    pub in_area_at_end: u64,
    pub mean_travel_time: f64,
    pub mean_r_self: f64,
    pub mean_r_other: f64,
    pub mean_r_total: f64,
    pub mean_y_hat_tail: f64,
    pub mean_error_tail: f64,
    /// Admitted / requested per class over the steady-state window.
    pub share_tail: Vec<Option<f64>>,
}

pub fn summarize_run(run: u64, m: &RunMetrics, n_classes: usize, duration: u64) -> RunSummary {
    let risk = aggregate_risk(&m.vehicles);
    let from = tail_start(duration);
    let (req, adm) = class_counts(std::iter::once(m), n_classes, from);
    RunSummary {
        run,
        seed: m.seed,
        arrivals: m.arrivals,
        gate_requests: m.gate.len() as u64,
        admitted: m.admitted,
        completed: m.vehicles.len() as u64,
        in_area_at_end: m.in_area_at_end,
        mean_travel_time: mean(m.vehicles.iter().map(|v| v.travel_time() as f64)),
        mean_r_self: risk.mean_r_self,
        mean_r_other: risk.mean_r_other,
        mean_r_total: risk.mean_r_total(),
        mean_y_hat_tail: m.mean_y_hat(from),
        mean_error_tail: m.mean_error(from),
        share_tail: ratios(&req, &adm),
    }
}

/// Gate requests and admissions per class from `from_step` on, pooled over runs.
pub fn class_counts<'a>(
    runs: impl IntoIterator<Item = &'a RunMetrics>,
    n_classes: usize,
    from_step: u64,
) -> (Vec<u64>, Vec<u64>) {
    let mut req = vec![0u64; n_classes];
    let mut adm = vec![0u64; n_classes];
    for m in runs {
        for s in m.steps.iter().filter(|s| s.step >= from_step) {
            for c in 0..n_classes {
                req[c] += s.requests[c] as u64;
                adm[c] += s.admitted[c] as u64;
            }
        }
    }
    (req, adm)
}

pub fn ratios(req: &[u64], adm: &[u64]) -> Vec<Option<f64>> {
    req.iter()
        .zip(adm)
        .map(|(&r, &a)| (r > 0).then(|| a as f64 / r as f64))
        .collect()
}

/// Mean and sample standard deviation; `(0, 0)` for no data.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let m = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, var.sqrt())
}
