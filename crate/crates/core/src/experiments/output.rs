//! CSV files written for a suite run, and the text report built from them.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::aggregate::{aggregate_risk, class_counts, mean_std, ratios, summarize_run, tail_start, RunSummary};
use super::SuiteResult;
use crate::domain::ms_to_kmh;
use crate::error::{Error, Result};
use crate::microsim::SimConfig;
use crate::risk_model::InjuryCurveSet;

type Writer = csv::Writer<BufWriter<File>>;

fn writer(path: &Path) -> Result<Writer> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn class_names(cfg: &SimConfig) -> Vec<String> {
    cfg.access.classes.iter().map(|c| c.name.clone()).collect()
}

/// Writes all CSV files for `result` into `dir` (created if missing) and
/// returns their paths.
pub fn write_suite(result: &SuiteResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let suite = &result.suite;
    let duration = suite.duration;

    let mut summary = writer(&dir.join("summary.csv"))?;
    summary.write_record(["scenario", "metric", "mean", "std", "n"])?;
    let mut vehicles = writer(&dir.join("vehicles.csv"))?;
    vehicles.write_record([
        "scenario",
        "run",
        "vehicle",
        "vehicle_type",
        "class",
        "entered_at",
        "exited_at",
        "travel_time_s",
        "r_self",
        "r_other",
        "r_total",
    ])?;
    let mut series = writer(&dir.join("timeseries.csv"))?;
    series.write_record([
        "scenario",
        "step",
        "y_hat_mean",
        "y_hat_std",
        "error_mean",
        "error_std",
        "pi_mean",
        "pi_std",
    ])?;
    let mut shares = writer(&dir.join("shares.csv"))?;
    shares.write_record(["scenario", "step", "class", "requests", "admitted", "share_60s"])?;
    let mut arrivals = writer(&dir.join("arrivals.csv"))?;
    arrivals.write_record(["scenario", "step", "vehicle_type", "arrivals_per_min"])?;
    let any_traces = result.scenarios.iter().any(|s| s.runs.iter().any(|r| !r.traces.is_empty()));
    let mut traces = if any_traces {
        let mut w = writer(&dir.join("traces.csv"))?;
        w.write_record([
            "scenario",
            "run",
            "step",
            "vehicle",
            "vehicle_type",
            "lane",
            "position_m",
            "speed_kmh",
            "v_star_kmh",
            "binding",
            "leaders",
            "dv_self_kmh",
            "dv_other_kmh",
            "cap_self_kmh",
            "cap_other_kmh",
        ])?;
        Some(w)
    } else {
        None
    };

    for (def, sc) in suite.scenarios.iter().zip(&result.scenarios) {
        let cfg = &def.config;
        let classes = class_names(cfg);
        let types: Vec<&str> = cfg.fleet.iter().map(|t| t.name.as_str()).collect();
        let n_runs = sc.runs.len();

        // per-run metrics
        let path = dir.join(format!("metrics_{}.csv", sc.name));
        let mut m = writer(&path)?;
        let mut header: Vec<String> = [
            "run",
            "seed",
            "arrivals",
            "gate_requests",
            "admitted",
            "completed",
            "in_area_at_end",
            "mean_travel_time_s",
            "mean_r_self",
            "mean_r_other",
            "mean_r_total",
            "mean_y_hat_tail",
            "mean_error_tail",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(classes.iter().map(|c| format!("share_tail_{c}")));
        m.write_record(&header)?;
        let rows: Vec<RunSummary> = sc
            .runs
            .iter()
            .enumerate()
            .map(|(r, run)| summarize_run(r as u64, run, classes.len(), duration))
            .collect();
        for s in &rows {
            let mut rec = vec![
                s.run.to_string(),
                s.seed.to_string(),
                s.arrivals.to_string(),
                s.gate_requests.to_string(),
                s.admitted.to_string(),
                s.completed.to_string(),
                s.in_area_at_end.to_string(),
                s.mean_travel_time.to_string(),
                s.mean_r_self.to_string(),
                s.mean_r_other.to_string(),
                s.mean_r_total.to_string(),
                s.mean_y_hat_tail.to_string(),
                s.mean_error_tail.to_string(),
            ];
            rec.extend(s.share_tail.iter().map(|v| opt(*v)));
            m.write_record(&rec)?;
        }
        m.flush()?;
        written.push(path);

        // summary over runs
        let mut stat = |metric: &str, values: Vec<f64>| -> Result<()> {
            let (mu, sd) = mean_std(&values);
            let (mu, sd) = if values.is_empty() {
                (String::new(), String::new())
            } else {
                (mu.to_string(), sd.to_string())
            };
            summary.write_record([sc.name.clone(), metric.to_string(), mu, sd, values.len().to_string()])?;
            Ok(())
        };
        let col = |f: fn(&RunSummary) -> f64| rows.iter().map(f).collect::<Vec<_>>();
        stat("arrivals", col(|s| s.arrivals as f64))?;
        stat("gate_requests", col(|s| s.gate_requests as f64))?;
        stat("admitted", col(|s| s.admitted as f64))?;
        stat("completed", col(|s| s.completed as f64))?;
        stat("in_area_at_end", col(|s| s.in_area_at_end as f64))?;
        stat("mean_travel_time_s", col(|s| s.mean_travel_time))?;
        stat("mean_r_self", col(|s| s.mean_r_self))?;
        stat("mean_r_other", col(|s| s.mean_r_other))?;
        stat("mean_r_total", col(|s| s.mean_r_total))?;
        stat("mean_y_hat_tail", col(|s| s.mean_y_hat_tail))?;
        stat("mean_error_tail", col(|s| s.mean_error_tail))?;
        for (c, name) in classes.iter().enumerate() {
            let v: Vec<f64> = rows.iter().filter_map(|s| s.share_tail[c]).collect();
            stat(&format!("share_tail_{name}"), v)?;
        }
        let pooled = aggregate_risk(sc.runs.iter().flat_map(|r| &r.vehicles));
        let pooled_tt: Vec<f64> = sc
            .runs
            .iter()
            .flat_map(|r| r.vehicles.iter().map(|v| v.travel_time() as f64))
            .collect();
        let n_veh = pooled.completed.to_string();
        for (metric, value) in [
            ("pooled_r_self", pooled.mean_r_self),
            ("pooled_r_other", pooled.mean_r_other),
            ("pooled_r_total", pooled.mean_r_total()),
            ("pooled_travel_time_s", mean_std(&pooled_tt).0),
        ] {
            summary.write_record([sc.name.as_str(), metric, &value.to_string(), "", &n_veh])?;
        }
        let (req, adm) = class_counts(&sc.runs, classes.len(), tail_start(duration));
        for ((name, share), r) in classes.iter().zip(ratios(&req, &adm)).zip(&req) {
            summary.write_record([
                sc.name.clone(),
                format!("pooled_share_tail_{name}"),
                opt(share),
                String::new(),
                r.to_string(),
            ])?;
        }

        // vehicles
        for (r, run) in sc.runs.iter().enumerate() {
            for v in &run.vehicles {
                vehicles.write_record([
                    sc.name.clone(),
                    r.to_string(),
                    v.id.0.to_string(),
                    types[v.type_index].to_string(),
                    classes[v.class].clone(),
                    v.entered_at.to_string(),
                    v.exited_at.to_string(),
                    v.travel_time().to_string(),
                    v.r_self.to_string(),
                    v.r_other.to_string(),
                    v.r_total().to_string(),
                ])?;
            }
        }

        // time series, across runs
        let mut window: Vec<(Vec<u64>, Vec<u64>)> = Vec::new();
        for k in 0..duration as usize {
            let col = |f: fn(&crate::microsim::StepSample) -> f64| -> (f64, f64) {
                let v: Vec<f64> = sc.runs.iter().map(|r| f(&r.steps[k])).collect();
                mean_std(&v)
            };
            let (ym, ys) = col(|s| s.y_hat);
            let (em, es) = col(|s| s.error);
            let (pm, ps) = col(|s| s.pi);
            series.write_record([
                sc.name.clone(),
                k.to_string(),
                ym.to_string(),
                ys.to_string(),
                em.to_string(),
                es.to_string(),
                pm.to_string(),
                ps.to_string(),
            ])?;
            let mut req = vec![0u64; classes.len()];
            let mut adm = vec![0u64; classes.len()];
            for run in &sc.runs {
                for c in 0..classes.len() {
                    req[c] += run.steps[k].requests[c] as u64;
                    adm[c] += run.steps[k].admitted[c] as u64;
                }
            }
            window.push((req.clone(), adm.clone()));
            let lo = window.len().saturating_sub(60);
            for (c, name) in classes.iter().enumerate() {
                let (wr, wa) = window[lo..]
                    .iter()
                    .fold((0u64, 0u64), |(a, b), (r, d)| (a + r[c], b + d[c]));
                shares.write_record([
                    sc.name.clone(),
                    k.to_string(),
                    name.clone(),
                    req[c].to_string(),
                    adm[c].to_string(),
                    opt((wr > 0).then(|| wa as f64 / wr as f64)),
                ])?;
            }
            for (t, name) in types.iter().enumerate() {
                let total: u64 = sc.runs.iter().map(|r| r.steps[k].arrivals[t] as u64).sum();
                let per_min = if n_runs == 0 {
                    0.0
                } else {
                    total as f64 * 60.0 / n_runs as f64
                };
                arrivals.write_record([sc.name.as_str(), &k.to_string(), name, &per_min.to_string()])?;
            }
        }

        if let Some(w) = traces.as_mut() {
            let caps = cfg.advisory.bounds()?;
            for (r, run) in sc.runs.iter().enumerate() {
                for t in &run.traces {
                    w.write_record([
                        sc.name.clone(),
                        r.to_string(),
                        t.step.to_string(),
                        t.vehicle.0.to_string(),
                        types[t.type_index].to_string(),
                        t.lane.to_string(),
                        t.position.to_string(),
                        ms_to_kmh(t.speed).to_string(),
                        ms_to_kmh(t.v_star).to_string(),
                        t.binding.to_string(),
                        t.leaders.to_string(),
                        ms_to_kmh(t.dv_self).to_string(),
                        ms_to_kmh(t.dv_other).to_string(),
                        ms_to_kmh(caps.dv_cap_self).to_string(),
                        ms_to_kmh(caps.dv_cap_other).to_string(),
                    ])?;
                }
            }
        }
    }

    for (w, name) in [
        (&mut summary, "summary.csv"),
        (&mut vehicles, "vehicles.csv"),
        (&mut series, "timeseries.csv"),
        (&mut shares, "shares.csv"),
        (&mut arrivals, "arrivals.csv"),
    ] {
        w.flush()?;
        written.push(dir.join(name));
    }
    if let Some(mut w) = traces {
        w.flush()?;
        written.push(dir.join("traces.csv"));
    }
    let curves = dir.join("injury_curves.csv");
    InjuryCurveSet::default().write_csv(BufWriter::new(File::create(&curves)?))?;
    written.push(curves);
    Ok(written)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub metric: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: u64,
}

fn parse_opt(s: &str, what: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Config(format!("summary.csv: bad {what} `{s}`")))
}

pub fn read_summary(dir: &Path) -> Result<Vec<SummaryRow>> {
    let path = dir.join("summary.csv");
    let mut rdr = csv::Reader::from_path(&path)?;
    let headers = rdr.headers()?.clone();
    let expected = ["scenario", "metric", "mean", "std", "n"];
    if headers.iter().ne(expected) {
        return Err(Error::Config(format!(
            "{} does not have the columns {}",
            path.display(),
            expected.join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(SummaryRow {
            scenario: rec[0].to_string(),
            metric: rec[1].to_string(),
            mean: parse_opt(&rec[2], "mean")?,
            std: parse_opt(&rec[3], "std")?,
            n: rec[4]
                .parse()
                .map_err(|_| Error::Config(format!("summary.csv: bad count `{}`", &rec[4])))?,
        });
    }
    Ok(rows)
}

/// Metric-by-scenario table of `mean ± std` from a directory written by
/// [`write_suite`].
pub fn render_report(dir: &Path) -> Result<String> {
    let rows = read_summary(dir)?;
    let mut scenarios: Vec<String> = Vec::new();
    let mut metrics: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(String, String), String> = BTreeMap::new();
    for r in rows {
        if !scenarios.contains(&r.scenario) {
            scenarios.push(r.scenario.clone());
        }
        if !metrics.contains(&r.metric) {
            metrics.push(r.metric.clone());
        }
        let cell = match (r.mean, r.std) {
            (Some(m), Some(s)) => format!("{m:.4} ± {s:.4}"),
            (Some(m), None) => format!("{m:.4}"),
            _ => "-".to_string(),
        };
        cells.insert((r.metric, r.scenario), cell);
    }
    let width = cells.values().map(|c| c.chars().count()).max().unwrap_or(1).max(8);
    let mw = metrics.iter().map(|m| m.len()).max().unwrap_or(6).max(6);
    let mut out = format!("{:<mw$}", "metric");
    for s in &scenarios {
        out.push_str(&format!("  {s:>width$}"));
    }
    out.push('\n');
    for m in &metrics {
        out.push_str(&format!("{m:<mw$}"));
        for s in &scenarios {
            let c = cells.get(&(m.clone(), s.clone())).map(String::as_str).unwrap_or("-");
            out.push_str(&format!("  {c:>width$}"));
        }
        out.push('\n');
    }
    Ok(out)
}
