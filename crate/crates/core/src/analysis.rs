//! Identity battery for conformally quasi-recurrent manifolds.
//!
//! Every check returns a [`Residual`] carrying both the raw max-abs value and
//! a scale-normalized one; thresholds are applied to the normalized value.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::curvature::{
    covector_jets, curvature_action_all, recurrence_rhs, CurvatureError, CurvaturePack,
};
use crate::exprdsl::MetricSpec;
use crate::jets::Jet;
use crate::tensor::{for_each_index, Tensor, Variance};

use Variance::{Lower as L, Upper as U};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("metric has no `{0}` field")]
    MissingField(&'static str),
    #[error("precondition violated: {0}")]
    ConditionViolated(String),
    #[error("no transversal vector with A·B = 1")]
    NoTransversal,
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub raw: f64,
    pub normalized: f64,
}

impl Residual {
    pub fn new(raw: f64, scale: f64) -> Self {
        Residual {
            raw,
            normalized: raw / (1.0 + scale),
        }
    }

    pub const ZERO: Residual = Residual {
        raw: 0.0,
        normalized: 0.0,
    };
}

fn max_abs_of(dim: usize, rank: usize, mut f: impl FnMut(&[usize]) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for_each_index(dim, rank, |x| worst = worst.max(f(x).abs()));
    worst
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `∇_i A_j` and `A_j` at the point, from the chart's `vector_A` expressions.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub a: Vec<f64>,
    pub nabla: Tensor,
    /// Plain partials `∂_i A_j`.
    pub partial: Tensor,
}

impl VectorField {
    pub fn from_spec(spec: &MetricSpec, pack: &CurvaturePack) -> Result<Self, AnalysisError> {
        let exprs = spec.vector_a.as_ref().ok_or(AnalysisError::MissingField("vector_A"))?;
        let jets = covector_jets(spec, exprs, &pack.point, 1)?;
        VectorField::from_jets(&jets, pack)
    }

    pub fn from_jets(jets: &Tensor<Jet>, pack: &CurvaturePack) -> Result<Self, AnalysisError> {
        let n = jets.dim();
        let nabla = pack.covariant_derivative(jets)?.values();
        let partial = Tensor::from_fn(n, &[L, L], |x| jets.get(&[x[1]]).gradient()[x[0]]);
        Ok(VectorField {
            a: jets.data().iter().map(Jet::value).collect(),
            nabla,
            partial,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CqrStatus {
    Cqr,
    ConformallySymmetric,
    NotCqr,
    ConformallyFlat,
}

impl CqrStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CqrStatus::Cqr => "cqr",
            CqrStatus::ConformallySymmetric => "conformally_symmetric",
            CqrStatus::NotCqr => "not_cqr",
            CqrStatus::ConformallyFlat => "conformally_flat",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FundamentalVectorReport {
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub recurrence_residual: Residual,
    pub annihilation_residual: Residual,
    pub nullity: f64,
    pub kernel_dimension: usize,
    pub status: CqrStatus,
    /// `max |A − ∇C²/(4C²)|` relative to `1 + max|A|`, when `C²` is not degenerate.
    pub exactness_residual: Option<f64>,
}

/// Columns `L(e_a)` of the linear map `A ↦ L(A)` flattened.
fn recurrence_matrix(c: &Tensor) -> DMatrix<f64> {
    let n = c.dim();
    let rows = n.pow(5);
    let mut m = DMatrix::zeros(rows, n);
    for a in 0..n {
        let mut e = vec![0.0; n];
        e[a] = 1.0;
        let col = recurrence_rhs(&e, c);
        for (r, v) in col.data().iter().enumerate() {
            m[(r, a)] = *v;
        }
    }
    m
}

/// Number of vectors `B^m` with `B^m C_{jklm} = 0`, counted by singular values.
pub fn kernel_dimension(c: &Tensor) -> usize {
    let n = c.dim();
    let mut m = DMatrix::zeros(n * n * n, n);
    for_each_index(n, 4, |x| {
        m[(x[0] * n * n + x[1] * n + x[2], x[3])] = *c.get(x);
    });
    let sv = m.singular_values();
    let top = sv.max();
    if top == 0.0 {
        return n;
    }
    sv.iter().filter(|&&s| s <= 1e-10 * top).count()
}

/// `∇_i C_{jklm} − L(A)_{ijklm}`, scaled by `1 + max|∇C|`.
pub fn cqr_residual(pack: &CurvaturePack, a: &[f64]) -> Residual {
    let raw = pack.nabla_weyl.sub(&recurrence_rhs(a, &pack.weyl_0_4)).max_abs();
    Residual::new(raw, pack.nabla_weyl.max_abs())
}

/// `A^m C_{jklm}`, scaled by `1 + max|C|`.
pub fn annihilation_residual(pack: &CurvaturePack, a: &[f64]) -> Residual {
    let a_up = pack.metric.raise_vector(a);
    let c = &pack.weyl_0_4;
    let n = pack.dim();
    let raw = max_abs_of(n, 3, |x| {
        (0..n).map(|m| a_up[m] * c.get(&[x[0], x[1], x[2], m])).sum()
    });
    Residual::new(raw, c.max_abs())
}

/// `∇_m C_{jkl}{}^m`, scaled by `1 + max|∇C|`.
pub fn weyl_divergence_residual(pack: &CurvaturePack) -> Residual {
    Residual::new(pack.weyl_divergence.max_abs(), pack.nabla_weyl.max_abs())
}

/// Least-squares fundamental vector of the recurrence.
pub fn solve_fundamental_vector(pack: &CurvaturePack, tol: f64) -> FundamentalVectorReport {
    let n = pack.dim();
    let c = &pack.weyl_0_4;
    if c.max_abs() <= tol {
        return FundamentalVectorReport {
            a: vec![0.0; n],
            recurrence_residual: Residual::new(pack.nabla_weyl.max_abs(), pack.nabla_weyl.max_abs()),
            annihilation_residual: Residual::ZERO,
            nullity: 0.0,
            kernel_dimension: n,
            status: CqrStatus::ConformallyFlat,
            exactness_residual: None,
        };
    }
    let m = recurrence_matrix(c);
    let rhs = DVector::from_column_slice(pack.nabla_weyl.data());
    let svd = m.svd(true, true);
    let cutoff = 1e-10 * svd.singular_values.max();
    let sol = svd.solve(&rhs, cutoff).expect("u and v computed");
    let a: Vec<f64> = sol.iter().copied().collect();

    let recurrence_residual = cqr_residual(pack, &a);
    let status = if recurrence_residual.normalized > tol {
        CqrStatus::NotCqr
    } else if max_abs(&a) <= tol {
        CqrStatus::ConformallySymmetric
    } else {
        CqrStatus::Cqr
    };

    let c2 = pack.weyl_square();
    let up = pack.raise_all(c);
    let exactness_residual = (c2.abs() > tol * (1.0 + c.max_abs().powi(2))).then(|| {
        let grad: Vec<f64> = (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for_each_index(n, 4, |x| {
                    let mut full = [i, 0, 0, 0, 0];
                    full[1..].copy_from_slice(x);
                    acc += pack.nabla_weyl.get(&full) * up.get(x);
                });
                2.0 * acc
            })
            .collect();
        let diff = a
            .iter()
            .zip(&grad)
            .map(|(ai, g)| (ai - g / (4.0 * c2)).abs())
            .fold(0.0, f64::max);
        diff / (1.0 + max_abs(&a))
    });

    FundamentalVectorReport {
        nullity: pack.metric.dot_lower(&a, &a),
        annihilation_residual: annihilation_residual(pack, &a),
        kernel_dimension: kernel_dimension(c),
        recurrence_residual,
        status,
        exactness_residual,
        a,
    }
}

/// `S_i{}^m K_{jklm} + S_j{}^m K_{kilm} + S_k{}^m K_{ijlm}`; the second slot of
/// `s` is raised.
pub fn compatibility_residual(s: &Tensor, k: &Tensor, pack: &CurvaturePack) -> Residual {
    let n = pack.dim();
    let s_mixed = s.raise_lower(1, &pack.metric).expect("rank 2");
    let term = |i: usize, j: usize, kk: usize, l: usize| -> f64 {
        (0..n).map(|m| s_mixed.get(&[i, m]) * k.get(&[j, kk, l, m])).sum()
    };
    let raw = max_abs_of(n, 4, |x| {
        let (i, j, kk, l) = (x[0], x[1], x[2], x[3]);
        term(i, j, kk, l) + term(j, kk, i, l) + term(kk, i, j, l)
    });
    Residual::new(raw, s_mixed.max_abs() * k.max_abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientAReport {
    /// `(∇_i A^m) C_{jklm} + (A^m A_m) C_{jkli}`.
    pub weyl_contraction: Residual,
    /// `|∇C|² − 8 (A·A) C²`.
    pub square_relation: Residual,
    /// Both sides of the square relation are below tolerance.
    pub square_relation_vacuous: bool,
    /// Weyl compatibility of `∇_i A_m`.
    pub compatibility: Residual,
}

pub fn gradient_a_checks(field: &VectorField, pack: &CurvaturePack, tol: f64) -> GradientAReport {
    let n = pack.dim();
    let c = &pack.weyl_0_4;
    let a = &field.a;
    let aa = pack.metric.dot_lower(a, a);
    let grad_up = field.nabla.raise_lower(1, &pack.metric).expect("rank 2");
    let raw9 = max_abs_of(n, 4, |x| {
        let (i, j, k, l) = (x[0], x[1], x[2], x[3]);
        let s: f64 = (0..n).map(|m| grad_up.get(&[i, m]) * c.get(&[j, k, l, m])).sum();
        s + aa * c.get(&[j, k, l, i])
    });
    let nabla_sq = pack.square_contract(&pack.nabla_weyl, &pack.nabla_weyl);
    let rhs = 8.0 * aa * pack.weyl_square();
    let scale10 = nabla_sq.abs().max(rhs.abs());
    GradientAReport {
        weyl_contraction: Residual::new(raw9, grad_up.max_abs() * c.max_abs() + aa.abs() * c.max_abs()),
        square_relation: Residual::new((nabla_sq - rhs).abs(), scale10),
        square_relation_vacuous: scale10 <= tol,
        compatibility: compatibility_residual(&field.nabla, c, pack),
    }
}

/// `(∇_i A_m − A_i A_m)`: the deviation from the concircular form before `γ g`.
fn concircular_defect(field: &VectorField) -> Tensor {
    let n = field.a.len();
    Tensor::from_fn(n, &[L, L], |x| field.nabla.get(x) - field.a[x[0]] * field.a[x[1]])
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcircularReport {
    pub gamma: f64,
    pub fit_residual: Residual,
    /// Spread of `γ` over perturbed points of the sample box.
    pub gamma_gradient: f64,
    /// `|A_m A^m + γ|`.
    pub null_consistency: f64,
}

/// Trace projection of `∇A − A⊗A` onto `g` at one pack.
pub fn concircular_gamma(field: &VectorField, pack: &CurvaturePack) -> (f64, Residual) {
    let d = concircular_defect(field);
    let g = &pack.metric.g;
    let dot: f64 = d.data().iter().zip(g.data()).map(|(x, y)| x * y).sum();
    let gg: f64 = g.data().iter().map(|x| x * x).sum();
    let gamma = dot / gg;
    let raw = d.sub(&g.scale(gamma)).max_abs();
    (gamma, Residual::new(raw, field.nabla.max_abs()))
}

/// Deterministic nearby points inside the sample box.
pub fn perturbed_points(spec: &MetricSpec, point: &[f64], count: usize) -> Vec<Vec<f64>> {
    // low-discrepancy offsets in [-1, 1], scaled to a tenth of each box side
    let golden = [0.618_033_988_749_895, 0.754_877_666_246_693, 0.569_840_290_998_053, 0.682_327_803_828_019, 0.724_491_959_000_515, 0.535_573_207_938_799];
    (1..=count)
        .map(|k| {
            point
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let (lo, hi) = spec.sample_box[i];
                    let frac = (k as f64 * golden[i % golden.len()]).fract();
                    let y = x + 0.1 * (hi - lo) * (2.0 * frac - 1.0);
                    y.clamp(lo, hi)
                })
                .collect()
        })
        .collect()
}

pub fn concircular_fit(spec: &MetricSpec, pack: &CurvaturePack) -> Result<ConcircularReport, AnalysisError> {
    let field = VectorField::from_spec(spec, pack)?;
    let (gamma, fit_residual) = concircular_gamma(&field, pack);
    let mut spread = 0.0f64;
    for p in perturbed_points(spec, &pack.point, 5) {
        let other = CurvaturePack::new(spec, &p, 3)?;
        let f = VectorField::from_spec(spec, &other)?;
        spread = spread.max((concircular_gamma(&f, &other).0 - gamma).abs());
    }
    Ok(ConcircularReport {
        gamma,
        fit_residual,
        gamma_gradient: spread,
        null_consistency: (pack.metric.dot_lower(&field.a, &field.a) + gamma).abs(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct QuasiEinsteinReport {
    pub beta: f64,
    pub alpha: f64,
    pub u: Vec<f64>,
    pub residual: Residual,
    /// Multiplicities of the distinct eigenvalues of `R^i{}_j`, ascending.
    pub eigen_multiplicities: Vec<usize>,
    pub quasi_einstein: bool,
    /// Singular values of `R_{kl}`, descending.
    pub ricci_singular_values: Vec<f64>,
    pub ricci_rank_ratio: f64,
    /// `∇_m R_{ij} − ∇_i R_{mj}`.
    pub codazzi_residual: Residual,
}

fn to_matrix(t: &Tensor) -> DMatrix<f64> {
    let n = t.dim();
    DMatrix::from_fn(n, n, |i, j| *t.get(&[i, j]))
}

pub fn quasi_einstein_decompose(pack: &CurvaturePack) -> Result<QuasiEinsteinReport, AnalysisError> {
    let n = pack.dim();
    let ricci = &pack.ricci;
    let mixed = to_matrix(&pack.metric.g_inv) * to_matrix(ricci);
    let eig = mixed.complex_eigenvalues();
    let scale = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let gap = 1e-6 * scale.max(1e-300);
    // cluster eigenvalues
    let mut clusters: Vec<(nalgebra::Complex<f64>, usize)> = Vec::new();
    for z in eig.iter() {
        match clusters.iter_mut().find(|(c, _)| (c - z).norm() <= gap) {
            Some(c) => c.1 += 1,
            None => clusters.push((*z, 1)),
        }
    }
    let mut eigen_multiplicities: Vec<usize> = clusters.iter().map(|c| c.1).collect();
    eigen_multiplicities.sort_unstable();
    let (beta_c, beta_mult) = clusters
        .iter()
        .copied()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.norm().total_cmp(&a.0.norm())))
        .expect("n >= 1");
    let beta = beta_c.re;

    let g = &pack.metric.g;
    let m = ricci.sub(&g.scale(beta));
    let k = (0..n)
        .max_by(|&a, &b| m.get(&[a, a]).abs().total_cmp(&m.get(&[b, b]).abs()))
        .expect("n >= 1");
    let mkk = *m.get(&[k, k]);
    let (alpha, u) = if mkk.abs() > 0.0 {
        let row: Vec<f64> = (0..n).map(|j| *m.get(&[k, j])).collect();
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        let u: Vec<f64> = row.iter().map(|x| x / norm).collect();
        (mkk / (u[k] * u[k]), u)
    } else {
        (0.0, vec![0.0; n])
    };
    let fitted = Tensor::from_fn(n, &[L, L], |x| alpha * u[x[0]] * u[x[1]] + beta * g.get(x));
    let raw = ricci.sub(&fitted).max_abs();
    let residual = Residual::new(raw, ricci.max_abs());
    let quasi_einstein = clusters.len() <= 2 && beta_mult + 1 >= n;

    let sv = to_matrix(ricci).singular_values();
    let mut ricci_singular_values: Vec<f64> = sv.iter().copied().collect();
    ricci_singular_values.sort_by(|a, b| b.total_cmp(a));
    let ricci_rank_ratio = if ricci_singular_values[0] > 0.0 {
        ricci_singular_values[1] / ricci_singular_values[0]
    } else {
        0.0
    };

    let nr = pack.nabla_ricci()?;
    let codazzi = max_abs_of(n, 3, |x| nr.get(&[x[0], x[1], x[2]]) - nr.get(&[x[1], x[0], x[2]]));

    Ok(QuasiEinsteinReport {
        beta,
        alpha,
        u,
        residual,
        eigen_multiplicities,
        quasi_einstein,
        ricci_singular_values,
        ricci_rank_ratio,
        codazzi_residual: Residual::new(codazzi, nr.max_abs()),
    })
}

/// `Θ_{pqrs} = C_{pqlm} C_{rs}{}^{lm}` and `Γ_{pr} = Θ_{pq r}{}^q`.
pub fn theta_gamma_tensors<T: crate::tensor::Scalar>(c: &Tensor<T>, c_up_last: &Tensor<T>, g_inv: &Tensor<T>) -> (Tensor<T>, Tensor<T>) {
    let n = c.dim();
    let zero = c.data()[0].zero_like();
    let theta = Tensor::from_fn(n, &[L; 4], |x| {
        let mut acc = zero.clone();
        for l in 0..n {
            for m in 0..n {
                acc = acc.plus(&c.get(&[x[0], x[1], l, m]).times(c_up_last.get(&[x[2], x[3], l, m])));
            }
        }
        acc
    });
    let gamma = Tensor::from_fn(n, &[L, L], |x| {
        let mut acc = zero.clone();
        for q in 0..n {
            for s in 0..n {
                acc = acc.plus(&g_inv.get(&[q, s]).times(theta.get(&[x[0], q, x[1], s])));
            }
        }
        acc
    });
    (theta, gamma)
}

/// `C_{rs}{}^{lm}` from `C_{rslm}`.
fn raise_last_pair<T: crate::tensor::Scalar>(c: &Tensor<T>, g_inv: &Tensor<T>) -> Tensor<T> {
    c.transform_slot(2, g_inv, U).transform_slot(3, g_inv, U)
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaGammaReport {
    #[serde(skip)]
    pub theta: Tensor,
    #[serde(skip)]
    pub gamma: Tensor,
    pub c2: f64,
    pub theta_max: f64,
    pub gamma_max: f64,
    pub theta_recurrence: Residual,
    /// `∇_s Θ_{pqr}{}^s − A_q Γ_{pr} + A_p Γ_{qr}`.
    pub tgg: Residual,
    /// `∇_i Γ_{pr} − 4A_i Γ_{pr} − A_p Γ_{ir} − A_r Γ_{ip}`.
    pub nablagamma: Residual,
    pub coda: Residual,
    /// Codazzi defect of `|Γ^q{}_q|^{-3/4} Γ_{pq}`; absent when `C²` vanishes.
    pub codazzi_gamma: Option<Residual>,
    /// Cyclic sum of `∇_i ∇_m Θ_{jkl}{}^m`; order 4 only.
    pub love: Option<Residual>,
    pub annihilation: Residual,
    pub symmetry: f64,
    pub vacuous: bool,
}

pub fn theta_gamma_suite(pack: &CurvaturePack, a: &[f64], tol: f64) -> Result<ThetaGammaReport, AnalysisError> {
    let n = pack.dim();
    let j = &pack.jets;
    let c_up = raise_last_pair(&j.weyl_0_4, &j.g_inv.map(|x| x.truncate(pack.order - 2)));
    let g_inv_lo = j.g_inv.map(|x| x.truncate(pack.order - 2));
    let (theta_j, gamma_j) = theta_gamma_tensors(&j.weyl_0_4, &c_up, &g_inv_lo);
    let theta = theta_j.values();
    let gamma = gamma_j.values();
    let nabla_theta = pack.covariant_derivative(&theta_j)?.values();
    let nabla_gamma = pack.covariant_derivative(&gamma_j)?.values();
    let g_inv = &pack.metric.g_inv;
    let c2: f64 = (0..n).flat_map(|p| (0..n).map(move |q| (p, q))).map(|(p, q)| g_inv.get(&[p, q]) * gamma.get(&[p, q])).sum();

    let theta_scale = nabla_theta.max_abs();
    let rec = max_abs_of(n, 5, |x| {
        let (i, p, q, r, s) = (x[0], x[1], x[2], x[3], x[4]);
        nabla_theta.get(x)
            - 4.0 * a[i] * theta.get(&[p, q, r, s])
            - a[p] * theta.get(&[i, q, r, s])
            - a[q] * theta.get(&[p, i, r, s])
            - a[r] * theta.get(&[p, q, i, s])
            - a[s] * theta.get(&[p, q, r, i])
    });
    let tgg = max_abs_of(n, 3, |x| {
        let (p, q, r) = (x[0], x[1], x[2]);
        let mut div = 0.0;
        for s in 0..n {
            for t in 0..n {
                div += g_inv.get(&[s, t]) * nabla_theta.get(&[s, p, q, r, t]);
            }
        }
        div - a[q] * gamma.get(&[p, r]) + a[p] * gamma.get(&[q, r])
    });
    let ng = max_abs_of(n, 3, |x| {
        let (i, p, r) = (x[0], x[1], x[2]);
        nabla_gamma.get(x) - 4.0 * a[i] * gamma.get(&[p, r]) - a[p] * gamma.get(&[i, r]) - a[r] * gamma.get(&[i, p])
    });
    let coda = max_abs_of(n, 3, |x| {
        let (jj, k, l) = (x[0], x[1], x[2]);
        nabla_gamma.get(&[jj, k, l]) - nabla_gamma.get(&[k, jj, l]) - 3.0 * a[jj] * gamma.get(&[k, l])
            + 3.0 * a[k] * gamma.get(&[jj, l])
    });
    let gscale = nabla_gamma.max_abs();

    let codazzi_gamma = (c2.abs() > tol * (1.0 + gamma.max_abs())).then(|| {
        // ∇_i(f Γ_jq) with f = |C²|^{-3/4}, ∂_i log f = −¾ ∂_i C² / C²
        let dc2: Vec<f64> = (0..n)
            .map(|i| (0..n).flat_map(|p| (0..n).map(move |q| (p, q))).map(|(p, q)| g_inv.get(&[p, q]) * nabla_gamma.get(&[i, p, q])).sum())
            .collect();
        let f = c2.abs().powf(-0.75);
        let d = |i: usize, jj: usize, q: usize| f * (nabla_gamma.get(&[i, jj, q]) - 0.75 * dc2[i] / c2 * gamma.get(&[jj, q]));
        let raw = max_abs_of(n, 3, |x| d(x[0], x[1], x[2]) - d(x[1], x[0], x[2]));
        Residual::new(raw, f * gscale)
    });

    let love = if pack.order >= 4 {
        let nt = pack.covariant_derivative(&theta_j)?;
        // ∇_m Θ_{jkl}{}^m
        let div = Tensor::from_fn(n, &[L; 3], |x| {
            let mut acc = Jet::constant(0.0, n, pack.order - 3);
            for m in 0..n {
                for t in 0..n {
                    acc = &acc + &(j.g_inv.get(&[m, t]) * nt.get(&[m, x[0], x[1], x[2], t]));
                }
            }
            acc
        });
        let dd = pack.covariant_derivative(&div)?.values();
        let raw = max_abs_of(n, 4, |x| {
            let (i, jj, k, l) = (x[0], x[1], x[2], x[3]);
            dd.get(&[i, jj, k, l]) + dd.get(&[jj, k, i, l]) + dd.get(&[k, i, jj, l])
        });
        Some(Residual::new(raw, dd.max_abs()))
    } else {
        None
    };

    let a_up = pack.metric.raise_vector(a);
    let ann = max_abs_of(n, 3, |x| (0..n).map(|p| a_up[p] * theta.get(&[p, x[0], x[1], x[2]])).sum())
        .max(max_abs_of(n, 1, |x| (0..n).map(|p| a_up[p] * gamma.get(&[p, x[0]])).sum()));
    let mut symmetry = 0.0f64;
    for_each_index(n, 4, |x| {
        let (p, q, r, s) = (x[0], x[1], x[2], x[3]);
        let v = *theta.get(x);
        symmetry = symmetry
            .max((v + theta.get(&[q, p, r, s])).abs())
            .max((v + theta.get(&[p, q, s, r])).abs())
            .max((v - theta.get(&[r, s, p, q])).abs());
    });
    for_each_index(n, 2, |x| symmetry = symmetry.max((gamma.get(x) - gamma.get(&[x[1], x[0]])).abs()));

    let theta_max = theta.max_abs();
    Ok(ThetaGammaReport {
        c2,
        theta_max,
        gamma_max: gamma.max_abs(),
        theta_recurrence: Residual::new(rec, theta_scale),
        tgg: Residual::new(tgg, theta_scale),
        nablagamma: Residual::new(ng, gscale),
        coda: Residual::new(coda, gscale),
        codazzi_gamma,
        love,
        annihilation: Residual::new(ann, theta_max),
        symmetry: symmetry / (1.0 + theta_max),
        vacuous: theta_max <= tol,
        theta,
        gamma,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DeszczResiduals {
    pub weyl: Residual,
    pub ricci: Residual,
    pub gamma: Residual,
}

pub fn deszcz_residuals(pack: &CurvaturePack, gamma: f64) -> DeszczResiduals {
    let n = pack.dim();
    let g = &pack.metric.g;
    let c = &pack.weyl_0_4;
    let gi = |a: usize, b: usize| *g.get(&[a, b]);

    // (∇_i∇_s − ∇_s∇_i) C_{jklm}
    let wc = curvature_action_all(c, pack);
    let w = max_abs_of(n, 6, |x| {
        let (i, s, j, k, l, m) = (x[0], x[1], x[2], x[3], x[4], x[5]);
        let rhs = gi(s, j) * c.get(&[i, k, l, m]) - gi(i, j) * c.get(&[s, k, l, m])
            + gi(s, k) * c.get(&[j, i, l, m]) - gi(i, k) * c.get(&[j, s, l, m])
            + gi(l, s) * c.get(&[j, k, i, m]) - gi(l, i) * c.get(&[j, k, s, m])
            + gi(m, s) * c.get(&[j, k, l, i]) - gi(m, i) * c.get(&[j, k, l, s]);
        wc.get(x) - gamma * rhs
    });

    let r = &pack.ricci;
    let rc = curvature_action_all(r, pack);
    let rr = max_abs_of(n, 4, |x| {
        let (i, s, k, l) = (x[0], x[1], x[2], x[3]);
        let rhs = gi(s, k) * r.get(&[i, l]) - gi(i, k) * r.get(&[s, l]) + gi(l, s) * r.get(&[k, i])
            - gi(l, i) * r.get(&[s, k]);
        rc.get(x) - gamma * rhs
    });

    // Γ_{pr}; left side is (∇_s∇_i − ∇_i∇_s)Γ_{pr}, slots [i, s] of the action swapped
    let up = raise_last_pair(c, &pack.metric.g_inv);
    let (_, gam) = theta_gamma_tensors(c, &up, &pack.metric.g_inv);
    let gc = curvature_action_all(&gam, pack);
    let gg = max_abs_of(n, 4, |x| {
        let (s, i, p, r) = (x[0], x[1], x[2], x[3]);
        let rhs = gi(s, p) * gam.get(&[r, i]) + gi(s, r) * gam.get(&[i, p]) - gi(i, p) * gam.get(&[r, s])
            - gi(i, r) * gam.get(&[s, p]);
        gc.get(&[s, i, p, r]) - gamma * rhs
    });

    let curv = pack.riemann_3_1.max_abs();
    DeszczResiduals {
        weyl: Residual::new(w, curv * c.max_abs() + gamma.abs() * c.max_abs()),
        ricci: Residual::new(rr, curv * r.max_abs() + gamma.abs() * r.max_abs()),
        gamma: Residual::new(gg, curv * gam.max_abs() + gamma.abs() * gam.max_abs()),
    }
}

/// `A_i C_{jklm} + A_j C_{kilm} + A_k C_{ijlm}`.
pub fn antisym_condition_residual(pack: &CurvaturePack, a: &[f64]) -> Residual {
    let n = pack.dim();
    let c = &pack.weyl_0_4;
    let raw = max_abs_of(n, 5, |x| {
        let (i, j, k, l, m) = (x[0], x[1], x[2], x[3], x[4]);
        a[i] * c.get(&[j, k, l, m]) + a[j] * c.get(&[k, i, l, m]) + a[k] * c.get(&[i, j, l, m])
    });
    Residual::new(raw, max_abs(a) * c.max_abs())
}

/// `∇_i C_{jklm} − 4 A_i C_{jklm}`.
pub fn conformally_recurrent_residual(pack: &CurvaturePack, a: &[f64]) -> Residual {
    let n = pack.dim();
    let c = &pack.weyl_0_4;
    let raw = max_abs_of(n, 5, |x| pack.nabla_weyl.get(x) - 4.0 * a[x[0]] * c.get(&x[1..]));
    Residual::new(raw, pack.nabla_weyl.max_abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct ElectricDecomposition {
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(skip)]
    pub e: Tensor,
    pub representation_residual: Residual,
    pub compatibility_residual: Residual,
    pub trace: f64,
    pub a_contraction: f64,
    pub b_contraction: f64,
}

/// A null vector `B^i` with `A_i B^i = 1`, for null `A`.
pub fn transversal(pack: &CurvaturePack, a: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    let n = a.len();
    let k = (0..n)
        .max_by(|&x, &y| a[x].abs().total_cmp(&a[y].abs()))
        .ok_or(AnalysisError::NoTransversal)?;
    if a[k] == 0.0 {
        return Err(AnalysisError::NoTransversal);
    }
    let mut b = vec![0.0; n];
    b[k] = 1.0 / a[k];
    let bb = pack.metric.dot_upper(&b, &b);
    let a_up = pack.metric.raise_vector(a);
    Ok(b.iter().zip(&a_up).map(|(bi, ai)| bi - 0.5 * bb * ai).collect())
}

pub fn electric_decompose(pack: &CurvaturePack, a: &[f64], tol: f64) -> Result<ElectricDecomposition, AnalysisError> {
    let n = pack.dim();
    let c = &pack.weyl_0_4;
    if c.max_abs() <= tol {
        let z = Tensor::zeros(n, &[L, L]);
        return Ok(ElectricDecomposition {
            b: vec![0.0; n],
            e: z,
            representation_residual: Residual::ZERO,
            compatibility_residual: Residual::ZERO,
            trace: 0.0,
            a_contraction: 0.0,
            b_contraction: 0.0,
        });
    }
    let anti = antisym_condition_residual(pack, a);
    let aa = pack.metric.dot_lower(a, a);
    if anti.normalized > tol || aa.abs() > tol * (1.0 + max_abs(a).powi(2)) {
        return Err(AnalysisError::ConditionViolated(format!(
            "antisymmetry residual {:e}, A·A = {:e}",
            anti.normalized, aa
        )));
    }
    let b = transversal(pack, a)?;
    let e = Tensor::from_fn(n, &[L, L], |x| {
        let mut acc = 0.0;
        for i in 0..n {
            for m in 0..n {
                acc += b[i] * b[m] * c.get(&[i, x[0], x[1], m]);
            }
        }
        acc
    });
    let rep = max_abs_of(n, 4, |x| {
        let (j, k, l, m) = (x[0], x[1], x[2], x[3]);
        let model = a[j] * a[m] * e.get(&[k, l]) - a[j] * a[l] * e.get(&[m, k]) - a[k] * a[m] * e.get(&[j, l])
            + a[k] * a[l] * e.get(&[j, m]);
        c.get(x) - model
    });
    let e_mixed = e.raise_lower(1, &pack.metric).expect("rank 2");
    let trace: f64 = (0..n).map(|k| e_mixed.get(&[k, k])).sum();
    let a_up = pack.metric.raise_vector(a);
    let a_contraction = max_abs_of(n, 1, |x| (0..n).map(|k| a_up[k] * e.get(&[k, x[0]])).sum());
    let b_contraction = max_abs_of(n, 1, |x| (0..n).map(|k| b[k] * e.get(&[k, x[0]])).sum());
    Ok(ElectricDecomposition {
        representation_residual: Residual::new(rep, c.max_abs()),
        compatibility_residual: compatibility_residual(&e, c, pack),
        trace,
        a_contraction,
        b_contraction,
        b,
        e,
    })
}

/// Lovelock-type identity for the Weyl divergence:
/// `∇_i∇_mC_{jkl}{}^m + cyclic(ijk) = −(n−3)/(n−2) (R_{im}R_{jkl}{}^m + cyclic)`.
pub fn divergence_identity_residual(pack: &CurvaturePack, lhs: &Tensor) -> Residual {
    let n = pack.dim();
    let nf = n as f64;
    let r = &pack.ricci;
    let riem = &pack.riemann_3_1;
    let rr = |i: usize, j: usize, k: usize, l: usize| -> f64 { (0..n).map(|m| r.get(&[i, m]) * riem.get(&[j, k, l, m])).sum() };
    let mut scale = 0.0f64;
    let raw = max_abs_of(n, 4, |x| {
        let (i, j, k, l) = (x[0], x[1], x[2], x[3]);
        let left = lhs.get(&[i, j, k, l]) + lhs.get(&[j, k, i, l]) + lhs.get(&[k, i, j, l]);
        let right = -(nf - 3.0) / (nf - 2.0) * (rr(i, j, k, l) + rr(j, k, i, l) + rr(k, i, j, l));
        scale = scale.max(left.abs()).max(right.abs());
        left - right
    });
    Residual::new(raw, scale.max(lhs.max_abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(metric: &[Vec<&str>], coords: &[&str], params: &[(&str, f64)], vector_a: Option<&[&str]>) -> MetricSpec {
        let n = coords.len();
        MetricSpec::from_strings("t", coords, params, metric, &vec![(0.0, 1.0); n], None, vector_a).unwrap()
    }

    fn ppwave(h: &str, vector_a: Option<&[&str]>) -> MetricSpec {
        spec(
            &[vec![h, "1", "0", "0"], vec!["0", "0", "0"], vec!["-1", "0"], vec!["-1"]],
            &["u", "v", "x", "y"],
            &[],
            vector_a,
        )
    }

    fn schwarzschild() -> MetricSpec {
        spec(
            &[
                vec!["-(1 - 2*M/r)", "0", "0", "0"],
                vec!["1/(1 - 2*M/r)", "0", "0"],
                vec!["r^2", "0"],
                vec!["r^2*sin(theta)^2"],
            ],
            &["t", "r", "theta", "phi"],
            &[("M", 1.0)],
            None,
        )
    }

    #[test]
    fn recurrent_pp_wave_vector_is_recovered() {
        let s = ppwave("exp(4*u)*(x^2 - y^2)", Some(&["1", "0", "0", "0"]));
        let p = CurvaturePack::new(&s, &[0.3, 0.0, 0.5, -0.2], 3).unwrap();
        let r = solve_fundamental_vector(&p, 1e-9);
        assert_eq!(r.status, CqrStatus::Cqr);
        for (x, want) in r.a.iter().zip([1.0, 0.0, 0.0, 0.0]) {
            assert!((x - want).abs() <= 1e-9, "{:?}", r.a);
        }
        assert!(r.nullity.abs() <= 1e-12);
        assert_eq!(r.kernel_dimension, 1);
        assert!(r.exactness_residual.is_none());
        assert!(annihilation_residual(&p, &[0.0, 1.0, 0.0, 0.0]).normalized > 1e-2);
    }

    #[test]
    fn constant_profile_is_conformally_symmetric() {
        let s = ppwave("x^2 - y^2", None);
        let p = CurvaturePack::new(&s, &[0.3, 0.0, 0.5, -0.2], 3).unwrap();
        let r = solve_fundamental_vector(&p, 1e-9);
        assert_eq!(r.status, CqrStatus::ConformallySymmetric);
        assert_eq!(cqr_residual(&p, &[0.0; 4]).raw, 0.0);
    }

    #[test]
    fn schwarzschild_is_not_recurrent() {
        let p = CurvaturePack::new(&schwarzschild(), &[0.0, 3.5, 1.2, 0.0], 3).unwrap();
        let r = solve_fundamental_vector(&p, 1e-9);
        assert_eq!(r.status, CqrStatus::NotCqr);
        assert!(r.exactness_residual.is_some());
        // metric compatibility reduces to first Bianchi
        assert!(compatibility_residual(&p.metric.g, &p.weyl_0_4, &p).normalized <= 1e-12);
        let s = Tensor::from_fn(4, &[L, L], |x| 0.3 + 0.1 * (x[0] + x[1]) as f64 + if x[0] == x[1] { 1.0 } else { 0.0 });
        assert!(compatibility_residual(&s, &p.weyl_0_4, &p).normalized > 1e-3);
        let d = deszcz_residuals(&p, 0.0);
        assert!(d.ricci.normalized <= 1e-12);
        assert!(d.weyl.normalized > 1e-6);
    }

    #[test]
    fn schwarzschild_theta_gamma() {
        let p = CurvaturePack::new(&schwarzschild(), &[0.0, 3.0, 1.2, 0.0], 3).unwrap();
        let t = theta_gamma_suite(&p, &[0.0; 4], 1e-9).unwrap();
        assert!((t.c2 - 48.0 / 729.0).abs() <= 1e-9);
        assert!(t.symmetry <= 1e-12);
        assert!(t.coda.normalized > 1e-6);
        assert!(!t.vacuous);
    }

    #[test]
    fn electric_part_of_recurrent_wave() {
        let s = ppwave("exp(4*u)*(x^2 - y^2)", None);
        let p = CurvaturePack::new(&s, &[0.3, 0.0, 0.5, -0.2], 3).unwrap();
        let a = [1.0, 0.0, 0.0, 0.0];
        let e = electric_decompose(&p, &a, 1e-9).unwrap();
        assert!(e.representation_residual.normalized <= 1e-9);
        assert!(e.trace.abs() <= 1e-11 && e.a_contraction <= 1e-11 && e.b_contraction <= 1e-11);
        assert!((e.e.get(&[2, 2]) + e.e.get(&[3, 3])).abs() <= 1e-11);
        assert!(e.e.get(&[2, 2]).abs() > 1e-3);
        assert!(e.compatibility_residual.normalized <= 1e-10);
        assert!(antisym_condition_residual(&p, &a).normalized <= 1e-10);
        assert!(conformally_recurrent_residual(&p, &a).normalized <= 1e-9);
        assert!(conformally_recurrent_residual(&p, &[2.0, 0.0, 0.0, 0.0]).normalized > 1e-3);
    }

    #[test]
    fn concircular_wave() {
        let s = ppwave("u^(-4)*(x^2 - y^2) + u^2*(x^2 + y^2)", Some(&["-1/u", "0", "0", "0"]));
        let s = MetricSpec {
            sample_box: vec![(1.0, 3.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
            ..s
        };
        let p = CurvaturePack::new(&s, &[2.0, 0.1, 0.3, -0.4], 3).unwrap();
        let c = concircular_fit(&s, &p).unwrap();
        assert!(c.gamma.abs() <= 1e-11, "{c:?}");
        assert!(c.fit_residual.normalized <= 1e-10);
        assert!(c.gamma_gradient <= 1e-10);
        assert!(c.null_consistency <= 1e-12);
        let q = quasi_einstein_decompose(&p).unwrap();
        assert!(p.scalar.abs() <= 1e-10);
        assert!(q.ricci_rank_ratio <= 1e-9, "{q:?}");
        assert!(q.codazzi_residual.normalized <= 1e-10);
        let d = deszcz_residuals(&p, c.gamma);
        assert!(d.weyl.normalized <= 1e-10 && d.ricci.normalized <= 1e-10 && d.gamma.normalized <= 1e-10, "{d:?}");
    }

    #[test]
    fn flrw_is_quasi_einstein() {
        let s = spec(
            &[vec!["-1", "0", "0", "0"], vec!["t^2", "0", "0"], vec!["t^2", "0"], vec!["t^2"]],
            &["t", "x", "y", "z"],
            &[],
            None,
        );
        let p = CurvaturePack::new(&s, &[1.3, 0.1, 0.2, 0.3], 3).unwrap();
        let q = quasi_einstein_decompose(&p).unwrap();
        assert!(q.quasi_einstein);
        assert_eq!(q.eigen_multiplicities, vec![1, 3]);
        assert!(q.residual.normalized <= 1e-9, "{q:?}");
    }

    #[test]
    fn divergence_identity_holds() {
        let p = CurvaturePack::new(&schwarzschild(), &[0.0, 3.5, 1.2, 0.0], 4).unwrap();
        let r = divergence_identity_residual(&p, p.nabla_div_weyl.as_ref().unwrap());
        assert!(r.normalized <= 1e-8, "{r:?}");
        let f = spec(
            &[vec!["-1", "0", "0", "0"], vec!["t^2", "0", "0"], vec!["t^2 + x*y", "0"], vec!["t^2 + z^2"]],
            &["t", "x", "y", "z"],
            &[],
            None,
        );
        let p = CurvaturePack::new(&f, &[1.3, 0.1, 0.2, 0.3], 4).unwrap();
        let r = divergence_identity_residual(&p, p.nabla_div_weyl.as_ref().unwrap());
        assert!(r.normalized <= 1e-8, "{r:?}");
        assert!(p.nabla_div_weyl.as_ref().unwrap().max_abs() > 1e-4);
    }
}
