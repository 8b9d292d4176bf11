//! Runs every applicable check at one point and grades it against an
//! expected-results block.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::analysis::{
    annihilation_residual, antisym_condition_residual, compatibility_residual, concircular_fit,
    conformally_recurrent_residual, cqr_residual, deszcz_residuals, divergence_identity_residual,
    electric_decompose, gradient_a_checks, quasi_einstein_decompose, solve_fundamental_vector,
    theta_gamma_suite, weyl_divergence_residual, Residual, VectorField,
};
use crate::catalog::Expectation;
use crate::curvature::{
    conformal_identity_residual, fd_nabla_div_weyl, second_bianchi_residual, symmetry_residuals,
    trace_residual, CurvaturePack,
};
use crate::exprdsl::MetricSpec;
use crate::petrov::{
    bel_debever_classify, lorentzian4_suite, lovelock4_check, pontryagin_omega1,
    pontryagin_omega2_contraction, pontryagin_p1, pontryagin_pair_residual, weyl_invariants,
    COORDINATE_FRAME,
};
use crate::Error;

/// Identities that hold for every metric; always graded against `tol`.
pub const UNIVERSAL: &[&str] = &[
    "riemann_symmetry",
    "first_bianchi",
    "weyl_symmetry",
    "weyl_trace",
    "weyl_metric_compat",
    "second_bianchi",
    "lovelock4",
    "avez",
    "eq5",
    "weyl_conformal_invariance",
    "eq6",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tol: f64,
    pub order: usize,
    /// Finite-difference fallback for checks that need order 4.
    pub fd: bool,
    /// Restricts the reported checks; `None` keeps all.
    pub checks: Option<BTreeSet<String>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tol: 1e-9,
            order: 3,
            fd: false,
            checks: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckValue {
    pub raw: f64,
    pub normalized: f64,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointReport {
    pub point: Vec<f64>,
    pub checks: BTreeMap<String, CheckValue>,
    pub classifications: BTreeMap<String, String>,
    /// Checks and classifications that failed their assertion.
    pub failed: Vec<String>,
}

impl PointReport {
    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }

    pub fn value(&self, check: &str) -> Option<f64> {
        self.checks.get(check).map(|c| c.normalized)
    }
}

struct Collector {
    values: BTreeMap<String, Residual>,
    labels: BTreeMap<String, String>,
}

impl Collector {
    fn residual(&mut self, name: &str, r: Residual) {
        self.values.insert(name.to_string(), r);
    }

    fn value(&mut self, name: &str, v: f64) {
        self.values.insert(name.to_string(), Residual { raw: v, normalized: v });
    }

    fn label(&mut self, name: &str, v: impl Into<String>) {
        self.labels.insert(name.to_string(), v.into());
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn collect(spec: &MetricSpec, point: &[f64], cfg: &RunConfig) -> Result<Collector, Error> {
    let tol = cfg.tol;
    let pack = CurvaturePack::new(spec, point, cfg.order)?;
    let n = pack.dim();
    let mut out = Collector {
        values: BTreeMap::new(),
        labels: BTreeMap::new(),
    };

    out.value("riemann_max", pack.riemann_0_4.max_abs());
    out.value("ricci_max", pack.ricci.max_abs());
    out.value("weyl_max", pack.weyl_0_4.max_abs());
    out.value("nabla_weyl_max", pack.nabla_weyl.max_abs());
    out.value("scalar", pack.scalar);
    out.value("kretschmann", pack.kretschmann());
    out.value("weyl_square", pack.weyl_square());

    // universal identities
    let rs = symmetry_residuals(&pack.riemann_0_4);
    out.value("riemann_symmetry", rs.first_pair.max(rs.second_pair).max(rs.pair_exchange));
    out.value("first_bianchi", rs.first_bianchi);
    out.value("weyl_symmetry", symmetry_residuals(&pack.weyl_0_4).max());
    out.value("weyl_trace", trace_residual(&pack.weyl_0_4, &pack.metric));
    out.residual("weyl_metric_compat", compatibility_residual(&pack.metric.g, &pack.weyl_0_4, &pack));
    out.value("second_bianchi", second_bianchi_residual(&pack)?);
    if n == 4 {
        out.residual("lovelock4", lovelock4_check(&pack));
        let w = pontryagin_omega1(&pack, &COORDINATE_FRAME)?;
        let r = pontryagin_p1(&pack.riemann_0_4, &pack, &COORDINATE_FRAME)?;
        out.residual("avez", Residual::new((w - r).abs(), w.abs().max(r.abs())));
        let cm = pack.weyl_3_1.max_abs();
        out.residual("omega1", Residual { raw: w, normalized: w.abs() / (1.0 + cm).powi(2) });
        out.residual("pontryagin_pair", pontryagin_pair_residual(&pack));
        out.residual("omega2", pontryagin_omega2_contraction(&pack));
    }
    if let Some(sigma) = &spec.sigma {
        let r = conformal_identity_residual(spec, sigma, point)?;
        out.residual("eq5", Residual { raw: r.identity_residual_raw, normalized: r.identity_residual });
        out.value("eq5_hat_raised", r.identity_residual_hat_raised);
        out.value("weyl_conformal_invariance", r.weyl_invariance);
    }
    let nabla_div = match &pack.nabla_div_weyl {
        Some(t) => Some(t.clone()),
        None if cfg.fd => Some(fd_nabla_div_weyl(spec, point, 1e-4)?),
        None => None,
    };
    if let Some(t) = nabla_div {
        out.residual("eq6", divergence_identity_residual(&pack, &t));
    }

    // fundamental vector
    let fv = solve_fundamental_vector(&pack, tol);
    out.label("status", fv.status.as_str());
    out.label("kernel_dimension", fv.kernel_dimension.to_string());
    if let Some(e) = fv.exactness_residual {
        out.value("exactness", e);
    }
    let field = match &spec.vector_a {
        Some(_) => Some(VectorField::from_spec(spec, &pack)?),
        None => None,
    };
    let a: Vec<f64> = match &field {
        Some(f) => {
            let diff = f.a.iter().zip(&fv.a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            out.value("a_agreement", diff);
            f.a.clone()
        }
        None => fv.a.clone(),
    };
    out.residual("cqr_residual", cqr_residual(&pack, &a));
    out.residual("annihilation", annihilation_residual(&pack, &a));
    out.residual("weyl_divergence", weyl_divergence_residual(&pack));
    out.residual("antisym_condition", antisym_condition_residual(&pack, &a));
    out.residual("conformal_recurrence", conformally_recurrent_residual(&pack, &a));
    out.value("nullity", pack.metric.dot_lower(&a, &a));
    out.residual("ricci_riemann_compat", compatibility_residual(&pack.ricci, &pack.riemann_0_4, &pack));
    out.residual("ricci_weyl_compat", compatibility_residual(&pack.ricci, &pack.weyl_0_4, &pack));
    if let Ok(e) = electric_decompose(&pack, &a, tol) {
        out.residual("electric_representation", e.representation_residual);
        out.residual("electric_compat", e.compatibility_residual);
        out.value("electric_traces", e.trace.abs().max(e.a_contraction).max(e.b_contraction));
    }
    let tg = theta_gamma_suite(&pack, &a, tol)?;
    out.residual("theta_recurrence", tg.theta_recurrence);
    out.residual("tgg", tg.tgg);
    out.residual("nablagamma", tg.nablagamma);
    out.residual("coda", tg.coda);
    out.residual("theta_annihilation", tg.annihilation);
    if let Some(r) = tg.codazzi_gamma {
        out.residual("codazzi_gamma", r);
    }
    if let Some(r) = tg.love {
        out.residual("love", r);
    }
    out.label("theta_gamma_vacuous", tg.vacuous.to_string());

    if let Some(f) = &field {
        let g = gradient_a_checks(f, &pack, tol);
        out.residual("grad_a_weyl_contraction", g.weyl_contraction);
        out.residual("grad_a_square_relation", g.square_relation);
        out.residual("grad_a_weyl_compat", g.compatibility);
        let c = concircular_fit(spec, &pack)?;
        out.value("gamma", c.gamma);
        out.residual("concircular_fit", c.fit_residual);
        out.value("gamma_spread", c.gamma_gradient);
        out.value("null_consistency", c.null_consistency);
        let d = deszcz_residuals(&pack, c.gamma);
        out.residual("deszcz_weyl", d.weyl);
        out.residual("deszcz_ricci", d.ricci);
        out.residual("deszcz_gamma", d.gamma);
    }

    let q = quasi_einstein_decompose(&pack)?;
    out.residual("quasi_einstein", q.residual);
    out.value("ricci_rank_ratio", q.ricci_rank_ratio);
    out.residual("ricci_codazzi", q.codazzi_residual);
    let mult: Vec<String> = q.eigen_multiplicities.iter().map(usize::to_string).collect();
    out.label("ricci_multiplicities", mult.join(","));

    if n == 4 && pack.metric.is_lorentzian() {
        let inv = weyl_invariants(&pack)?;
        out.value("special_gap", inv.special_gap);
        out.value("invariant_i", inv.i.norm());
        out.value("invariant_j", inv.j.norm());
        if pack.weyl_0_4.max_abs() <= tol {
            out.label("petrov_class", "O");
        } else if max_abs(&a) > tol {
            if let Ok(rep) = bel_debever_classify(&pack, &a, tol) {
                out.label("petrov_class", rep.petrov_class.as_str());
                out.value("bel_debever_n", rep.bel_debever_residuals.level_n);
                out.value("bel_debever_iii", rep.bel_debever_residuals.level_iii);
                out.value("bel_debever_ii", rep.bel_debever_residuals.level_ii);
            }
        }
        if let Some(f) = &field {
            let l = lorentzian4_suite(&pack, f)?;
            out.residual("ricci_eigen", l.ricci_eigen_residual);
            out.value("lambda", l.lambda);
            out.residual("geodesic", l.geodesic_residual);
            out.value("mu", l.mu);
            out.value("closedness", l.closedness);
            out.value("divergence_A", l.divergence);
            out.residual("special_riemann", l.special_riemann_residual);
        }
    }
    Ok(out)
}

/// Evaluates every applicable check at `point` and grades it.
pub fn run_point(spec: &MetricSpec, expected: &[Expectation], point: &[f64], cfg: &RunConfig) -> Result<PointReport, Error> {
    let out = collect(spec, point, cfg)?;
    let keep = |name: &str| cfg.checks.as_ref().is_none_or(|s| s.contains(name));
    let find = |name: &str| expected.iter().find(|e| e.check == name);
    let mut failed = Vec::new();
    let mut checks = BTreeMap::new();
    for (name, r) in out.values {
        if !keep(&name) {
            continue;
        }
        let pass = if UNIVERSAL.contains(&name.as_str()) {
            Some(r.normalized <= cfg.tol)
        } else {
            find(&name).and_then(|e| e.accepts_value(r.normalized, spec, point))
        };
        if pass == Some(false) {
            failed.push(name.clone());
        }
        checks.insert(name, CheckValue { raw: r.raw, normalized: r.normalized, pass });
    }
    for (name, value) in &out.labels {
        if keep(name) && find(name).and_then(|e| e.accepts_label(value)) == Some(false) {
            failed.push(name.clone());
        }
    }
    for e in expected {
        if keep(&e.check) && !checks.contains_key(&e.check) && !out.labels.contains_key(&e.check) {
            failed.push(format!("{} (not computed)", e.check));
        }
    }
    failed.sort();
    Ok(PointReport {
        point: point.to_vec(),
        checks,
        classifications: out.labels,
        failed,
    })
}

/// Names accepted by [`identity`].
pub const IDENTITIES: &[&str] = &["lovelock4", "eq5", "eq6", "bianchi", "weyl_traces", "avez"];

/// Evaluates one named universal identity at `point`.
pub fn identity(name: &str, spec: &MetricSpec, point: &[f64], cfg: &RunConfig) -> Result<Residual, Error> {
    if name == "eq6" && cfg.order < 4 && !cfg.fd {
        return Err(Error::Input("eq6 needs --order 4 or --fd".into()));
    }
    let pack = CurvaturePack::new(spec, point, cfg.order)?;
    Ok(match name {
        "lovelock4" => lovelock4_check(&pack),
        "eq5" => {
            let sigma = spec.sigma.as_ref().ok_or_else(|| Error::Input("metric has no sigma".into()))?;
            let r = conformal_identity_residual(spec, sigma, point)?;
            Residual { raw: r.identity_residual_raw, normalized: r.identity_residual }
        }
        "eq6" => {
            let t = match &pack.nabla_div_weyl {
                Some(t) => t.clone(),
                None => fd_nabla_div_weyl(spec, point, 1e-4)?,
            };
            divergence_identity_residual(&pack, &t)
        }
        "bianchi" => {
            let v = symmetry_residuals(&pack.riemann_0_4).first_bianchi.max(second_bianchi_residual(&pack)?);
            Residual { raw: v, normalized: v }
        }
        "weyl_traces" => {
            let v = trace_residual(&pack.weyl_0_4, &pack.metric);
            Residual { raw: v, normalized: v }
        }
        "avez" => {
            let w = pontryagin_omega1(&pack, &COORDINATE_FRAME)?;
            let r = pontryagin_p1(&pack.riemann_0_4, &pack, &COORDINATE_FRAME)?;
            Residual::new((w - r).abs(), w.abs().max(r.abs()))
        }
        other => return Err(Error::Input(format!("unknown identity `{other}`"))),
    })
}

/// `count` points of the Halton sequence mapped into the sample box.
pub fn halton_points(spec: &MetricSpec, count: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    let radical_inverse = |mut i: u32, base: u32| {
        let mut f = 1.0;
        let mut r = 0.0;
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    };
    (1..=count as u32)
        .map(|i| {
            spec.sample_box
                .iter()
                .enumerate()
                .map(|(d, &(lo, hi))| lo + (hi - lo) * radical_inverse(i, PRIMES[d % PRIMES.len()]))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::builtin;

    #[test]
    fn halton_points_stay_in_the_box() {
        let e = builtin("schwarzschild").unwrap();
        let pts = halton_points(&e.spec, 7);
        assert_eq!(pts.len(), 7);
        assert!(pts.iter().all(|p| e.spec.contains(p)));
        assert_ne!(pts[0], pts[1]);
    }

    #[test]
    fn check_filter_and_unknown_expectations() {
        let e = builtin("minkowski4").unwrap();
        let cfg = RunConfig {
            checks: Some(["weyl_max".to_string()].into_iter().collect()),
            ..RunConfig::default()
        };
        let r = run_point(&e.spec, &e.expected, &[0.1, 0.2, 0.3, 0.4], &cfg).unwrap();
        assert_eq!(r.checks.keys().collect::<Vec<_>>(), vec!["weyl_max"]);
        assert_eq!(r.checks["weyl_max"].pass, Some(true));
        assert!(r.passed());
    }
}
