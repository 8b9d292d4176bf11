//! Built-in metrics with expected results.
//!
//! A builtin is requested with a call string such as `schwarzschild`,
//! `schwarzschild(M=2)`, `random_poly(7)` or
//! `ppwave(a=exp(4*u), b=0, c=u^2)`. Arguments may be positional.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::exprdsl::{format_number, Expression, MetricSpec, SpecError};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown builtin `{0}`")]
    UnknownName(String),
    #[error("builtin `{name}`: {message}")]
    BadArgument { name: String, message: String },
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// An identity stated in the source literature for this geometry.
    PublishedIdentity,
    /// Worked out by hand for this fixture (see the entry's note).
    HandDerivation,
    /// Holds for structural reasons (flat space, vanishing tensors).
    Trivial,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    /// `|value − target| ≤ tol`, optionally relative to `|target|`; the target
    /// may depend on the point.
    Near {
        target: Expression,
        tol: f64,
        relative: bool,
    },
    /// A classification label.
    Label(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expectation {
    pub check: String,
    pub bound: Bound,
    pub provenance: Provenance,
}

impl Expectation {
    fn new(check: &str, bound: Bound, provenance: Provenance) -> Self {
        Expectation {
            check: check.to_string(),
            bound,
            provenance,
        }
    }

    /// Tests a numeric value at `point`.
    pub fn accepts_value(&self, value: f64, spec: &MetricSpec, point: &[f64]) -> Option<bool> {
        match &self.bound {
            Bound::AtMost(x) => Some(value.abs() <= *x),
            Bound::AtLeast(x) => Some(value.abs() >= *x),
            Bound::Near {
                target,
                tol,
                relative,
            } => {
                let t = target.eval(point, &spec.parameters).ok()?;
                let slack = if *relative { tol * t.abs() } else { *tol };
                Some((value - t).abs() <= slack)
            }
            Bound::Label(_) => None,
        }
    }

    pub fn accepts_label(&self, label: &str) -> Option<bool> {
        match &self.bound {
            Bound::Label(want) => Some(want == label),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub spec: MetricSpec,
    pub expected: Vec<Expectation>,
    pub note: &'static str,
}

impl CatalogEntry {
    pub fn expectation(&self, check: &str) -> Option<&Expectation> {
        self.expected.iter().find(|e| e.check == check)
    }
}

/// Names and one-line summaries of every builtin.
pub const BUILTINS: &[(&str, &str)] = &[
    ("minkowski4", "flat space-time, diag(-1,1,1,1)"),
    ("schwarzschild(M=1)", "static black hole exterior, r in [2.5, 10]"),
    ("s3_sphere(a=1)", "round 3-sphere of radius a"),
    ("frw_flat(q=1)", "spatially flat FRW, scale factor t^q"),
    ("desitter(H=1)", "flat-sliced de Sitter, scale factor exp(H t)"),
    ("godel(a=1)", "Goedel rotating universe"),
    ("ppwave(a=..., b=..., c=...)", "pp-wave with profile a(x^2-y^2) + 2bxy + c(x^2+y^2)"),
    ("ppwave_cqr", "pp-wave with a = exp(4u); recurrent Weyl tensor, A = du"),
    ("ppwave_concircular", "pp-wave with a = u^-4, c = u^2; concircular A = -du/u"),
    ("random_poly(seed=0, dim=4)", "seeded polynomial perturbation of diag(-1,1,...)"),
];

/// Splits `name(arg, k=v, ...)` at top-level commas.
fn split_call(call: &str) -> Result<(String, Vec<String>), CatalogError> {
    let call = call.trim();
    let Some(open) = call.find('(') else {
        return Ok((call.to_string(), Vec::new()));
    };
    let name = call[..open].trim().to_string();
    let bad = |message: &str| CatalogError::BadArgument {
        name: name.clone(),
        message: message.to_string(),
    };
    let inner = call[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| bad("missing closing parenthesis"))?;
    let mut args = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in inner.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(bad("unbalanced parentheses"));
                }
            }
            ',' if depth == 0 => {
                args.push(inner[start..i].trim().to_string());
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(bad("unbalanced parentheses"));
    }
    let last = inner[start..].trim();
    if !last.is_empty() || !args.is_empty() {
        args.push(last.to_string());
    }
    Ok((name, args))
}

/// Binds positional and keyword arguments to `params`, filling defaults.
fn bind_args(name: &str, args: &[String], params: &[(&str, &str)]) -> Result<Vec<String>, CatalogError> {
    let bad = |message: String| CatalogError::BadArgument {
        name: name.to_string(),
        message,
    };
    let mut values: Vec<Option<String>> = vec![None; params.len()];
    let mut positional = 0;
    let mut seen_keyword = false;
    for arg in args {
        let kw = arg.split_once('=').filter(|(k, _)| {
            let k = k.trim();
            !k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        });
        match kw {
            Some((k, v)) => {
                seen_keyword = true;
                let k = k.trim();
                let slot = params
                    .iter()
                    .position(|(p, _)| *p == k)
                    .ok_or_else(|| bad(format!("unknown argument `{k}`")))?;
                if values[slot].is_some() {
                    return Err(bad(format!("argument `{k}` given twice")));
                }
                values[slot] = Some(v.trim().to_string());
            }
            None => {
                if seen_keyword {
                    return Err(bad("positional argument after keyword".into()));
                }
                if positional >= params.len() {
                    return Err(bad("too many arguments".into()));
                }
                values[positional] = Some(arg.clone());
                positional += 1;
            }
        }
    }
    Ok(values
        .into_iter()
        .zip(params)
        .map(|(v, (_, d))| v.unwrap_or_else(|| d.to_string()))
        .collect())
}

fn number(name: &str, arg: &str, text: &str) -> Result<f64, CatalogError> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CatalogError::BadArgument {
            name: name.to_string(),
            message: format!("`{arg}` must be a number, got `{text}`"),
        })
}

fn canonical(name: &str, params: &[(&str, &str)], values: &[String]) -> String {
    if params.iter().zip(values).all(|((_, d), v)| d == v) {
        return name.to_string();
    }
    let args: Vec<String> = params
        .iter()
        .zip(values)
        .map(|((p, _), v)| format!("{p}={v}"))
        .collect();
    format!("{name}({})", args.join(", "))
}

use Bound::{AtMost, Label};
use Provenance::{HandDerivation, PublishedIdentity, Trivial};

fn at_most(check: &str, x: f64, p: Provenance) -> Expectation {
    Expectation::new(check, AtMost(x), p)
}

fn label(check: &str, value: &str, p: Provenance) -> Expectation {
    Expectation::new(check, Label(value.to_string()), p)
}

fn near(check: &str, target: Expression, tol: f64, relative: bool, p: Provenance) -> Expectation {
    Expectation::new(
        check,
        Bound::Near {
            target,
            tol,
            relative,
        },
        p,
    )
}

const MINKOWSKI_NOTE: &str = "Constant metric: every Christoffel symbol and every curvature tensor vanishes identically.";

const SCHWARZSCHILD_NOTE: &str = "Vacuum, so Ricci = 0 and the Weyl tensor equals the Riemann tensor. \
The Kretschmann scalar is 48 M^2 / r^6. The field is type D, so the radial null directions are \
doubly aligned and the complex invariants satisfy I^3 = 27 J^2 with I = 3 M^2 / r^6.";

const SPHERE_NOTE: &str = "Constant curvature 1/a^2 in three dimensions: scalar curvature 6/a^2 and \
the Weyl tensor vanishes as it does for every three-dimensional metric.";

const FRW_NOTE: &str = "Conformally flat. With u = dt the Ricci tensor is a perfect-fluid combination \
alpha u u + beta g, so R^i_j has one simple eigenvalue and one of multiplicity three. Its Ricci tensor \
is then trivially Weyl compatible.";

const DESITTER_NOTE: &str = "Maximally symmetric: Ricci = 3 H^2 g, scalar 12 H^2, Weyl = 0.";

const GODEL_NOTE: &str = "Homogeneous dust solution. The Ricci tensor is proportional to u u with \
u = dt + e^x dz, which makes it quasi-Einstein with beta = 0 and Weyl compatible.";

const PPWAVE_NOTE: &str = "For H(u,x,y) du^2 + 2 du dv - dx^2 - dy^2 the only nonzero Christoffel symbols \
carry an upper v or x, y index; Gamma^u_ij = 0. Ricci is (c-part) du du times a function of u, so R = 0.";

const PPWAVE_CQR_NOTE: &str = "Profile a(u) = exp(4u), b = c = 0. The Weyl components are proportional to \
a(u) and, with Gamma^u_ij = 0, only the u-slot of the covariant derivative survives: grad C = (a'/a) du C. \
This is conformal recurrence with A_u = a'/(4a) = 1. A = du is null and satisfies \
A_i C_jklm + A_j C_kilm + A_k C_ijlm = 0 for the type N form, so the five-term recurrence holds with the \
same A. The Weyl tensor is type N relative to du.";

const PPWAVE_CONCIRCULAR_NOTE: &str = "Profile a(u) = u^-4, c(u) = u^2. As for the recurrent wave, \
A_u = a'/(4a) = -1/u. Since Gamma^u_ij = 0, grad_u A_u = 1/u^2 = A_u A_u and all other components \
vanish, so A is concircular with gamma = 0. The c-term gives a Ricci tensor proportional to c(u) du du: rank one, \
R = 0, and Codazzi because its only component depends on u alone.";

const RANDOM_NOTE: &str = "Generic metric, no special structure. Only universal identities are expected.";

fn ppwave_spec(name: &str, a: &str, b: &str, c: &str, box_u: (f64, f64), vector_a: Option<&[&str]>) -> Result<MetricSpec, SpecError> {
    let h = format!("({a})*(x^2 - y^2) + 2*({b})*x*y + ({c})*(x^2 + y^2)");
    MetricSpec::from_strings(
        name,
        &["u", "v", "x", "y"],
        &[],
        &[vec![h.as_str(), "1", "0", "0"], vec!["0", "0", "0"], vec!["-1", "0"], vec!["-1"]],
        &[box_u, (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
        None,
        vector_a,
    )
}

fn random_poly_spec(name: &str, seed: u64, dim: usize) -> Result<MetricSpec, SpecError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for i in 0..dim {
        let mut row = Vec::new();
        for j in i..dim {
            let mut text = if i != j {
                "0".to_string()
            } else if i == 0 {
                "-1".to_string()
            } else {
                "1".to_string()
            };
            for _ in 0..3 {
                let coef = (rng.gen_range(-0.05..=0.05f64) * 1e6).round() / 1e6;
                let degree = rng.gen_range(1..=3usize);
                let vars: Vec<String> = (0..degree).map(|_| coords[rng.gen_range(0..dim)].clone()).collect();
                let sign = if coef < 0.0 { " - " } else { " + " };
                text.push_str(&format!("{sign}{}*{}", format_number(coef.abs()), vars.join("*")));
            }
            row.push(text);
        }
        rows.push(row);
    }
    let coord_refs: Vec<&str> = coords.iter().map(String::as_str).collect();
    let row_refs: Vec<Vec<&str>> = rows.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
    let sigma = format!("0.2*{}*{} + 0.1*{}", coords[0], coords[1], coords[dim - 1]);
    MetricSpec::from_strings(
        name,
        &coord_refs,
        &[],
        &row_refs,
        &vec![(-0.3, 0.3); dim],
        Some(&sigma),
        None,
    )
}

/// Looks up a builtin by call string.
pub fn builtin(call: &str) -> Result<CatalogEntry, CatalogError> {
    let (name, args) = split_call(call)?;
    let name = name.as_str();
    let no_args = |params: &[(&str, &str)]| bind_args(name, &args, params);
    let entry = match name {
        "minkowski4" => {
            no_args(&[])?;
            let spec = MetricSpec::from_strings(
                name,
                &["t", "x", "y", "z"],
                &[],
                &[vec!["-1", "0", "0", "0"], vec!["1", "0", "0"], vec!["1", "0"], vec!["1"]],
                &[(-1.0, 1.0); 4],
                None,
                None,
            )?;
            let mut expected: Vec<Expectation> = ["riemann_max", "ricci_max", "weyl_max", "kretschmann", "nabla_weyl_max"]
                .iter()
                .map(|c| at_most(c, 1e-13, Trivial))
                .collect();
            expected.push(label("status", "conformally_flat", Trivial));
            CatalogEntry {
                spec,
                expected,
                note: MINKOWSKI_NOTE,
            }
        }
        "schwarzschild" => {
            let params = [("M", "1")];
            let v = no_args(&params)?;
            let m = number(name, "M", &v[0])?;
            let spec = MetricSpec::from_strings(
                &canonical(name, &params, &v),
                &["t", "r", "theta", "phi"],
                &[("M", m)],
                &[
                    vec!["-(1 - 2*M/r)", "0", "0", "0"],
                    vec!["1/(1 - 2*M/r)", "0", "0"],
                    vec!["r^2", "0"],
                    vec!["r^2*sin(theta)^2"],
                ],
                &[(0.0, 1.0), (2.5, 10.0), (0.3, 2.8), (0.0, 2.0 * std::f64::consts::PI)],
                Some("0.1*r"),
                None,
            )?;
            let k = spec.parse("48*M^2/r^6").expect("parses");
            CatalogEntry {
                expected: vec![
                    near("kretschmann", k, 1e-9, true, HandDerivation),
                    at_most("ricci_max", 1e-10, HandDerivation),
                    at_most("special_gap", 1e-9, HandDerivation),
                    label("status", "not_cqr", HandDerivation),
                ],
                spec,
                note: SCHWARZSCHILD_NOTE,
            }
        }
        "s3_sphere" => {
            let params = [("a", "1")];
            let v = no_args(&params)?;
            let a = number(name, "a", &v[0])?;
            let spec = MetricSpec::from_strings(
                &canonical(name, &params, &v),
                &["chi", "theta", "phi"],
                &[("a", a)],
                &[
                    vec!["a^2", "0", "0"],
                    vec!["a^2*sin(chi)^2", "0"],
                    vec!["a^2*sin(chi)^2*sin(theta)^2"],
                ],
                &[(0.3, 2.8), (0.3, 2.8), (0.0, 2.0 * std::f64::consts::PI)],
                None,
                None,
            )?;
            let target = spec.parse("6/a^2").expect("parses");
            CatalogEntry {
                expected: vec![
                    near("scalar", target, 1e-10, false, HandDerivation),
                    at_most("weyl_max", 1e-11, Trivial),
                    label("status", "conformally_flat", Trivial),
                ],
                spec,
                note: SPHERE_NOTE,
            }
        }
        "frw_flat" => {
            let params = [("q", "1")];
            let v = no_args(&params)?;
            let q = number(name, "q", &v[0])?;
            let spec = MetricSpec::from_strings(
                &canonical(name, &params, &v),
                &["t", "x", "y", "z"],
                &[("q", q)],
                &[
                    vec!["-1", "0", "0", "0"],
                    vec!["t^(2*q)", "0", "0"],
                    vec!["t^(2*q)", "0"],
                    vec!["t^(2*q)"],
                ],
                &[(0.5, 2.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
                None,
                None,
            )?;
            CatalogEntry {
                spec,
                expected: vec![
                    at_most("weyl_max", 1e-10, Trivial),
                    at_most("quasi_einstein", 1e-9, HandDerivation),
                    label("ricci_multiplicities", "1,3", HandDerivation),
                    at_most("ricci_weyl_compat", 1e-9, PublishedIdentity),
                    label("status", "conformally_flat", Trivial),
                ],
                note: FRW_NOTE,
            }
        }
        "desitter" => {
            let params = [("H", "1")];
            let v = no_args(&params)?;
            let h = number(name, "H", &v[0])?;
            let spec = MetricSpec::from_strings(
                &canonical(name, &params, &v),
                &["t", "x", "y", "z"],
                &[("H", h)],
                &[
                    vec!["-1", "0", "0", "0"],
                    vec!["exp(2*H*t)", "0", "0"],
                    vec!["exp(2*H*t)", "0"],
                    vec!["exp(2*H*t)"],
                ],
                &[(-1.0, 1.0); 4],
                None,
                None,
            )?;
            let target = spec.parse("12*H^2").expect("parses");
            CatalogEntry {
                expected: vec![
                    near("scalar", target, 1e-9, true, HandDerivation),
                    at_most("weyl_max", 1e-10, Trivial),
                    at_most("quasi_einstein", 1e-9, HandDerivation),
                    label("ricci_multiplicities", "4", HandDerivation),
                ],
                spec,
                note: DESITTER_NOTE,
            }
        }
        "godel" => {
            let params = [("a", "1")];
            let v = no_args(&params)?;
            let a = number(name, "a", &v[0])?;
            let spec = MetricSpec::from_strings(
                &canonical(name, &params, &v),
                &["t", "x", "y", "z"],
                &[("a", a)],
                &[
                    vec!["-a^2", "0", "0", "-a^2*exp(x)"],
                    vec!["a^2", "0", "0"],
                    vec!["a^2", "0"],
                    vec!["-0.5*a^2*exp(2*x)"],
                ],
                &[(-1.0, 1.0); 4],
                None,
                None,
            )?;
            let target = spec.parse("-1/a^2").expect("parses");
            CatalogEntry {
                expected: vec![
                    at_most("ricci_weyl_compat", 1e-9, PublishedIdentity),
                    at_most("quasi_einstein", 1e-9, HandDerivation),
                    near("scalar", target, 1e-9, true, HandDerivation),
                ],
                spec,
                note: GODEL_NOTE,
            }
        }
        "ppwave" => {
            let params = [("a", "0"), ("b", "0"), ("c", "0")];
            let v = no_args(&params)?;
            let spec = ppwave_spec(&canonical(name, &params, &v), &v[0], &v[1], &v[2], (-1.0, 1.0), None)?;
            CatalogEntry {
                spec,
                expected: vec![at_most("scalar", 1e-10, HandDerivation)],
                note: PPWAVE_NOTE,
            }
        }
        "ppwave_cqr" => {
            no_args(&[])?;
            let spec = ppwave_spec(name, "exp(4*u)", "0", "0", (0.0, 0.5), Some(&["1", "0", "0", "0"]))?;
            let mut expected = vec![
                label("status", "cqr", HandDerivation),
                label("petrov_class", "N", PublishedIdentity),
                label("kernel_dimension", "1", PublishedIdentity),
                at_most("a_agreement", 1e-9, HandDerivation),
                at_most("cqr_residual", 1e-9, HandDerivation),
                at_most("nullity", 1e-12, PublishedIdentity),
                at_most("omega1", 1e-11, PublishedIdentity),
                at_most("electric_representation", 1e-9, PublishedIdentity),
                at_most("conformal_recurrence", 1e-9, PublishedIdentity),
            ];
            for check in ["annihilation", "weyl_divergence", "antisym_condition", "ricci_eigen", "geodesic", "closedness", "divergence_A", "special_riemann"] {
                expected.push(at_most(check, 1e-10, PublishedIdentity));
            }
            for check in ["ricci_riemann_compat", "ricci_weyl_compat", "grad_a_weyl_contraction", "grad_a_weyl_compat", "electric_compat"] {
                expected.push(at_most(check, 1e-9, PublishedIdentity));
            }
            expected.push(label("theta_gamma_vacuous", "true", HandDerivation));
            CatalogEntry {
                spec,
                expected,
                note: PPWAVE_CQR_NOTE,
            }
        }
        "ppwave_concircular" => {
            no_args(&[])?;
            let spec = ppwave_spec(name, "u^(-4)", "0", "u^2", (1.0, 3.0), Some(&["-1/u", "0", "0", "0"]))?;
            let zero = Expression::Constant(0.0);
            let mut expected = vec![
                near("gamma", zero, 1e-11, false, HandDerivation),
                at_most("null_consistency", 1e-12, PublishedIdentity),
                at_most("ricci_rank_ratio", 1e-9, PublishedIdentity),
                label("status", "cqr", HandDerivation),
            ];
            for check in ["concircular_fit", "gamma_spread", "scalar", "ricci_codazzi", "deszcz_weyl", "deszcz_ricci", "deszcz_gamma"] {
                expected.push(at_most(check, 1e-10, PublishedIdentity));
            }
            CatalogEntry {
                spec,
                expected,
                note: PPWAVE_CONCIRCULAR_NOTE,
            }
        }
        "random_poly" => {
            let params = [("seed", "0"), ("dim", "4")];
            let v = no_args(&params)?;
            let seed: u64 = v[0].parse().map_err(|_| CatalogError::BadArgument {
                name: name.to_string(),
                message: format!("`seed` must be a non-negative integer, got `{}`", v[0]),
            })?;
            let dim: usize = match v[1].as_str() {
                "4" => 4,
                "5" => 5,
                other => {
                    return Err(CatalogError::BadArgument {
                        name: name.to_string(),
                        message: format!("`dim` must be 4 or 5, got `{other}`"),
                    })
                }
            };
            CatalogEntry {
                spec: random_poly_spec(&canonical(name, &params, &v), seed, dim)?,
                expected: Vec::new(),
                note: RANDOM_NOTE,
            }
        }
        _ => return Err(CatalogError::UnknownName(call.to_string())),
    };
    Ok(entry)
}

/// The catalog entry whose spec equals `spec`, if its name is a builtin call.
pub fn recognize(spec: &MetricSpec) -> Option<CatalogEntry> {
    builtin(&spec.name).ok().filter(|e| e.spec == *spec)
}
