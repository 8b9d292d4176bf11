//! Report assembly and rendering.

use std::collections::BTreeMap;
use std::fmt::Write;

use cqr_core::battery::{self, CheckValue, PointReport, RunConfig};
use cqr_core::catalog::Expectation;
use cqr_core::exprdsl::MetricSpec;
use rayon::prelude::*;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct ConfigEcho {
    pub tol: f64,
    pub order: usize,
    pub fd: bool,
    pub checks: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub point_count: usize,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub metric: String,
    pub points: Vec<PointReport>,
    /// Largest `|normalized|` over all points, per check.
    pub worst: BTreeMap<String, f64>,
    pub config: ConfigEcho,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.points.iter().all(PointReport::passed)
    }

    fn new(spec: &MetricSpec, points: Vec<PointReport>, cfg: &RunConfig, seed: Option<u64>) -> Self {
        let mut worst: BTreeMap<String, f64> = BTreeMap::new();
        for p in &points {
            for (name, v) in &p.checks {
                let w = worst.entry(name.clone()).or_insert(0.0);
                *w = w.max(v.normalized.abs());
            }
        }
        Report {
            metric: spec.name.clone(),
            config: ConfigEcho {
                tol: cfg.tol,
                order: cfg.order,
                fd: cfg.fd,
                checks: cfg.checks.as_ref().map(|c| c.iter().cloned().collect()),
                seed,
                point_count: points.len(),
            },
            points,
            worst,
        }
    }
}

fn at_point(point: &[f64], e: cqr_core::Error) -> CliError {
    let msg = format!("at point {point:?}: {e}");
    if e.is_numerical() {
        CliError::Numerical(msg)
    } else {
        CliError::Input(msg)
    }
}

/// Runs the full battery at every point; points are evaluated in parallel and
/// reported in input order.
pub fn analyze(
    spec: &MetricSpec,
    expected: &[Expectation],
    points: &[Vec<f64>],
    cfg: &RunConfig,
    seed: Option<u64>,
) -> Result<Report, CliError> {
    let results: Vec<_> = points
        .par_iter()
        .map(|p| battery::run_point(spec, expected, p, cfg).map_err(|e| at_point(p, e)))
        .collect();
    let points = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Report::new(spec, points, cfg, seed))
}

pub fn identity(name: &str, spec: &MetricSpec, points: &[Vec<f64>], cfg: &RunConfig, seed: Option<u64>) -> Result<Report, CliError> {
    let results: Vec<_> = points
        .par_iter()
        .map(|p| {
            let r = battery::identity(name, spec, p, cfg).map_err(|e| at_point(p, e))?;
            let pass = r.normalized <= cfg.tol;
            Ok(PointReport {
                point: p.clone(),
                checks: BTreeMap::from([(
                    name.to_string(),
                    CheckValue {
                        raw: r.raw,
                        normalized: r.normalized,
                        pass: Some(pass),
                    },
                )]),
                classifications: BTreeMap::new(),
                failed: if pass { Vec::new() } else { vec![name.to_string()] },
            })
        })
        .collect();
    let points = results.into_iter().collect::<Result<Vec<_>, CliError>>()?;
    Ok(Report::new(spec, points, cfg, seed))
}

pub fn render_text(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "metric: {}", r.metric);
    let _ = writeln!(out, "points: {}  order: {}  tol: {:e}", r.points.len(), r.config.order, r.config.tol);
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<28} {:>12}  result", "check", "worst");
    for (name, w) in &r.worst {
        let graded: Vec<bool> = r.points.iter().filter_map(|p| p.checks.get(name).and_then(|c| c.pass)).collect();
        let verdict = if graded.is_empty() {
            "-"
        } else if graded.iter().all(|&b| b) {
            "pass"
        } else {
            "FAIL"
        };
        let _ = writeln!(out, "{name:<28} {w:>12.3e}  {verdict}");
    }
    let mut labels: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for p in &r.points {
        for (k, v) in &p.classifications {
            let seen = labels.entry(k).or_default();
            if !seen.contains(&v.as_str()) {
                seen.push(v);
            }
        }
    }
    if !labels.is_empty() {
        let _ = writeln!(out);
        for (k, v) in labels {
            let _ = writeln!(out, "{k:<28} {}", v.join(" | "));
        }
    }
    let failed: Vec<String> = r
        .points
        .iter()
        .enumerate()
        .flat_map(|(i, p)| p.failed.iter().map(move |f| format!("{f} @ point {i}")))
        .collect();
    let _ = writeln!(out);
    if failed.is_empty() {
        let _ = writeln!(out, "all assertions passed");
    } else {
        let _ = writeln!(out, "failed: {}", failed.join(", "));
    }
    out
}
