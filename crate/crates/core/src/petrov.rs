//! Four-dimensional Lorentzian checks: the Weyl dimensional identity,
//! Bel-Debever alignment, quadratic invariants and Pontryagin densities.

use nalgebra::{Complex, DMatrix, Matrix4};
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{kernel_dimension, Residual, VectorField};
use crate::curvature::CurvaturePack;
use crate::tensor::{for_each_index, permutations, Tensor, Variance};

use Variance::{Lower as L, Upper as U};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PetrovError {
    #[error("needs dimension 4, got {0}")]
    Dimension(usize),
    #[error("test vector is not null (k·k = {0:e})")]
    NotNull(f64),
    #[error("metric is not Lorentzian")]
    Signature,
    #[error("frame vectors are linearly dependent")]
    DegenerateFrame,
}

fn require_lorentzian4(pack: &CurvaturePack) -> Result<(), PetrovError> {
    if pack.dim() != 4 {
        return Err(PetrovError::Dimension(pack.dim()));
    }
    if !pack.metric.is_lorentzian() {
        return Err(PetrovError::Signature);
    }
    Ok(())
}

fn max_abs_of(dim: usize, rank: usize, mut f: impl FnMut(&[usize]) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for_each_index(dim, rank, |x| worst = worst.max(f(x).abs()));
    worst
}

/// `C^{jk}{}_{st}`.
fn weyl_up_up_down_down(pack: &CurvaturePack) -> Tensor {
    pack.weyl_0_4
        .raise_lower(0, &pack.metric)
        .and_then(|t| t.raise_lower(1, &pack.metric))
        .expect("rank 4")
}

/// Nine-term `δ ⊗ C` identity satisfied by every Weyl tensor in dimension 4.
pub fn lovelock4_check(pack: &CurvaturePack) -> Residual {
    let n = pack.dim();
    let c = weyl_up_up_down_down(pack);
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let cu = |a: usize, b: usize, s: usize, t: usize| *c.get(&[a, b, s, t]);
    let raw = max_abs_of(n, 6, |x| {
        let (i, j, k, r, s, t) = (x[0], x[1], x[2], x[3], x[4], x[5]);
        d(r, i) * cu(j, k, s, t) + d(t, i) * cu(j, k, r, s) + d(s, i) * cu(j, k, t, r)
            + d(r, k) * cu(i, j, s, t) + d(t, k) * cu(i, j, r, s) + d(s, k) * cu(i, j, t, r)
            + d(r, j) * cu(k, i, s, t) + d(t, j) * cu(k, i, r, s) + d(s, j) * cu(k, i, t, r)
    });
    Residual::new(raw, c.max_abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PetrovClass {
    O,
    N,
    III,
    #[serde(rename = "II_or_D")]
    IIOrD,
    #[serde(rename = "not_aligned")]
    NotAligned,
}

impl PetrovClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PetrovClass::O => "O",
            PetrovClass::N => "N",
            PetrovClass::III => "III",
            PetrovClass::IIOrD => "II_or_D",
            PetrovClass::NotAligned => "not_aligned",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BelDebever {
    pub level_n: f64,
    pub level_iii: f64,
    pub level_ii: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PetrovReport {
    pub petrov_class: PetrovClass,
    pub bel_debever_residuals: BelDebever,
    pub invariant_i: [f64; 2],
    pub invariant_j: [f64; 2],
    pub special_gap: f64,
    /// `|I³ − 27J²| / max(|I|³, 27|J|²)`; zero when both vanish.
    pub special_gap_relative: f64,
    /// Null test vector, lower index.
    pub k: Vec<f64>,
}

/// Residuals of the three alignment conditions relative to a null covector `k`.
pub fn bel_debever_levels(pack: &CurvaturePack, k: &[f64]) -> BelDebever {
    let n = pack.dim();
    let c = &pack.weyl_0_4;
    let ku = pack.metric.raise_vector(k);
    let kscale = k.iter().chain(&ku).fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let cs = 1.0 + c.max_abs();

    // C_{jklm} k^m
    let ck: Tensor = Tensor::from_fn(n, &[L, L, L], |x| (0..n).map(|m| c.get(&[x[0], x[1], x[2], m]) * ku[m]).sum());
    let level_n = ck.max_abs() / (cs * kscale);

    // C_{jklm} k^l, then the [m p] antisymmetrization with k_p
    let ckl: Tensor = Tensor::from_fn(n, &[L, L, L], |x| (0..n).map(|l| c.get(&[x[0], x[1], l, x[2]]) * ku[l]).sum());
    let level_iii = max_abs_of(n, 4, |x| {
        let (j, kk, m, p) = (x[0], x[1], x[2], x[3]);
        0.5 * (ckl.get(&[j, kk, m]) * k[p] - ckl.get(&[j, kk, p]) * k[m])
    }) / (cs * kscale.powi(2));

    // k^b k^c C_{abcd}
    let kck = Tensor::from_fn(n, &[L, L], |x| {
        let mut acc = 0.0;
        for b in 0..n {
            for cc in 0..n {
                acc += ku[b] * ku[cc] * c.get(&[x[0], b, cc, x[1]]);
            }
        }
        acc
    });
    let level_ii = max_abs_of(n, 4, |x| {
        let (e, a, d, f) = (x[0], x[1], x[2], x[3]);
        0.25 * (k[e] * kck.get(&[a, d]) * k[f] - k[e] * kck.get(&[a, f]) * k[d] - k[a] * kck.get(&[e, d]) * k[f]
            + k[a] * kck.get(&[e, f]) * k[d])
    }) / (cs * kscale.powi(4));
    BelDebever {
        level_n,
        level_iii,
        level_ii,
    }
}

pub fn bel_debever_classify(pack: &CurvaturePack, k: &[f64], tol: f64) -> Result<PetrovReport, PetrovError> {
    require_lorentzian4(pack)?;
    let kk = pack.metric.dot_lower(k, k);
    let knorm = k.iter().map(|x| x * x).sum::<f64>();
    if kk.abs() > tol * (1.0 + knorm) {
        return Err(PetrovError::NotNull(kk));
    }
    let levels = bel_debever_levels(pack, k);
    let petrov_class = if pack.weyl_0_4.max_abs() <= tol {
        PetrovClass::O
    } else if levels.level_n <= tol {
        PetrovClass::N
    } else if levels.level_iii <= tol {
        PetrovClass::III
    } else if levels.level_ii <= tol {
        PetrovClass::IIOrD
    } else {
        PetrovClass::NotAligned
    };
    let inv = weyl_invariants(pack)?;
    Ok(PetrovReport {
        petrov_class,
        bel_debever_residuals: levels,
        invariant_i: [inv.i.re, inv.i.im],
        invariant_j: [inv.j.re, inv.j.im],
        special_gap: inv.special_gap,
        special_gap_relative: inv.special_gap_relative,
        k: k.to_vec(),
    })
}

/// `ε_{jklm}` with `ε_{0123} = +√|det g|`.
pub fn levi_civita_lower(pack: &CurvaturePack) -> Tensor {
    let w = pack.metric.det.abs().sqrt();
    let mut eps = Tensor::zeros(4, &[L; 4]);
    for (perm, sign) in permutations(4) {
        eps.set(&perm, sign * w);
    }
    eps
}

#[derive(Debug, Clone, Copy)]
pub struct WeylInvariants {
    pub i: Complex<f64>,
    pub j: Complex<f64>,
    pub special_gap: f64,
    pub special_gap_relative: f64,
}

/// Quadratic and cubic invariants of the self-dual Weyl tensor, normalized so
/// that `I³ = 27 J²` for algebraically special fields.
pub fn weyl_invariants(pack: &CurvaturePack) -> Result<WeylInvariants, PetrovError> {
    require_lorentzian4(pack)?;
    let eps = levi_civita_lower(pack);
    // C^{ab}{}_{lm}
    let c_uudd = weyl_up_up_down_down(pack);
    // *C_{jklm} = ½ ε_{jkab} C^{ab}{}_{lm}
    let dual = Tensor::from_fn(4, &[L; 4], |x| {
        let mut acc = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                acc += eps.get(&[x[0], x[1], a, b]) * c_uudd.get(&[a, b, x[2], x[3]]);
            }
        }
        0.5 * acc
    });
    // C⁺_{jk}{}^{lm} as a 16×16 matrix over index pairs
    let raise_pair = |t: &Tensor| {
        t.raise_lower(2, &pack.metric)
            .and_then(|t| t.raise_lower(3, &pack.metric))
            .expect("rank 4")
    };
    let c_ddu = raise_pair(&pack.weyl_0_4);
    let d_ddu = raise_pair(&dual);
    let m = DMatrix::from_fn(16, 16, |r, s| {
        let idx = [r / 4, r % 4, s / 4, s % 4];
        Complex::new(0.5 * c_ddu.get(&idx), -0.5 * d_ddu.get(&idx))
    });
    let m2 = &m * &m;
    let m3 = &m2 * &m;
    let i = m2.trace() / 8.0;
    let j = m3.trace() / 48.0;
    let gap = (i * i * i - j * j * 27.0).norm();
    let denom = i.norm().powi(3).max(27.0 * j.norm_sqr());
    Ok(WeylInvariants {
        i,
        j,
        special_gap: gap / (1.0 + i.norm().powi(3)),
        special_gap_relative: if denom > 0.0 { gap / denom } else { 0.0 },
    })
}

/// `P_{ijkl} = K_{ija}{}^b K_{klb}{}^a` for a (0,4) curvature tensor `K`.
fn pair_product(k: &Tensor, pack: &CurvaturePack) -> Tensor {
    let mixed = k.raise_lower(3, &pack.metric).expect("rank 4");
    Tensor::from_fn(4, &[L; 4], |x| {
        let mut acc = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                acc += mixed.get(&[x[0], x[1], a, b]) * mixed.get(&[x[2], x[3], b, a]);
            }
        }
        acc
    })
}

/// First Pontryagin integrand of a curvature tensor on a frame: `ω1`
/// evaluated on the frame and summed with signs over all orderings.
pub fn pontryagin_p1(k: &Tensor, pack: &CurvaturePack, frame: &[[f64; 4]; 4]) -> Result<f64, PetrovError> {
    if pack.dim() != 4 {
        return Err(PetrovError::Dimension(pack.dim()));
    }
    let fm = Matrix4::from_fn(|r, c| frame[r][c]);
    let norms: f64 = frame.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).product();
    if fm.determinant().abs() <= 1e-12 * norms.max(f64::MIN_POSITIVE) {
        return Err(PetrovError::DegenerateFrame);
    }
    let p = pair_product(k, pack);
    // Q(a,b,c,d) = P(X_a, X_b, X_c, X_d)
    let q = Tensor::from_fn(4, &[U; 4], |x| {
        let mut acc = 0.0;
        for_each_index(4, 4, |y| {
            acc += p.get(y) * frame[x[0]][y[0]] * frame[x[1]][y[1]] * frame[x[2]][y[2]] * frame[x[3]][y[3]];
        });
        acc
    });
    let omega = |a: usize, b: usize, c: usize, d: usize| {
        q.get(&[a, b, c, d]) - q.get(&[b, a, c, d]) - q.get(&[a, b, d, c]) + q.get(&[b, a, d, c])
    };
    Ok(permutations(4)
        .into_iter()
        .map(|(s, sign)| sign * omega(s[0], s[1], s[2], s[3]))
        .sum())
}

pub const COORDINATE_FRAME: [[f64; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

/// Pontryagin integrand built from the Weyl tensor.
pub fn pontryagin_omega1(pack: &CurvaturePack, frame: &[[f64; 4]; 4]) -> Result<f64, PetrovError> {
    pontryagin_p1(&pack.weyl_0_4, pack, frame)
}

/// `max |C_{lmj}{}^k C_{pqk}{}^j|`, scaled by `(1 + max|C|)²`.
pub fn pontryagin_pair_residual(pack: &CurvaturePack) -> Residual {
    let p = pair_product(&pack.weyl_0_4, pack);
    let cm = pack.weyl_3_1.max_abs();
    Residual {
        raw: p.max_abs(),
        normalized: p.max_abs() / (1.0 + cm).powi(2),
    }
}

/// `max |C_{lma}{}^b C_{pqb}{}^c C_{rsc}{}^d C_{tud}{}^a|` over all free indices.
pub fn pontryagin_omega2_contraction(pack: &CurvaturePack) -> Residual {
    let n = pack.dim();
    let mixed = &pack.weyl_3_1;
    let mats: Vec<DMatrix<f64>> = (0..n * n)
        .map(|lm| DMatrix::from_fn(n, n, |a, b| *mixed.get(&[lm / n, lm % n, a, b])))
        .collect();
    let pairs: Vec<DMatrix<f64>> = mats.iter().flat_map(|x| mats.iter().map(move |y| x * y)).collect();
    let mut worst = 0.0f64;
    for x in &pairs {
        let xt = x.transpose();
        for y in &pairs {
            // tr(XY) = Σ X_ab Y_ba
            let tr: f64 = xt.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
            worst = worst.max(tr.abs());
        }
    }
    Residual {
        raw: worst,
        normalized: worst / (1.0 + mixed.max_abs()).powi(4),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Lorentzian4Report {
    pub nullity: f64,
    pub kernel_dimension: usize,
    pub lambda: f64,
    pub ricci_eigen_residual: Residual,
    pub mu: f64,
    pub geodesic_residual: Residual,
    pub closedness: f64,
    pub divergence: f64,
    pub special_riemann_residual: Residual,
}

/// Least-squares `λ` with `v ≈ λ a` and the residual `max|v − λa|`.
fn proportionality(v: &[f64], a: &[f64]) -> (f64, f64) {
    let aa: f64 = a.iter().map(|x| x * x).sum();
    let lambda = if aa > 0.0 {
        v.iter().zip(a).map(|(x, y)| x * y).sum::<f64>() / aa
    } else {
        0.0
    };
    let res = v.iter().zip(a).map(|(x, y)| (x - lambda * y).abs()).fold(0.0, f64::max);
    (lambda, res)
}

pub fn lorentzian4_suite(pack: &CurvaturePack, field: &VectorField) -> Result<Lorentzian4Report, PetrovError> {
    require_lorentzian4(pack)?;
    let n = 4;
    let a = &field.a;
    let a_up = pack.metric.raise_vector(a);
    let amax = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let v: Vec<f64> = (0..n).map(|m| (0..n).map(|i| a_up[i] * pack.ricci.get(&[i, m])).sum()).collect();
    let (lambda, eig) = proportionality(&v, a);
    let w: Vec<f64> = (0..n).map(|m| (0..n).map(|i| a_up[i] * field.nabla.get(&[i, m])).sum()).collect();
    let (mu, geo) = proportionality(&w, a);
    let closedness = max_abs_of(n, 2, |x| field.partial.get(&[x[0], x[1]]) - field.partial.get(&[x[1], x[0]]));
    let divergence: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| pack.metric.g_inv.get(&[i, j]) * field.nabla.get(&[i, j]))
        .sum();

    // S_{kl} = R_{kjlm} A^m A^j
    let r = &pack.riemann_0_4;
    let s = Tensor::from_fn(n, &[L, L], |x| {
        let mut acc = 0.0;
        for j in 0..n {
            for m in 0..n {
                acc += r.get(&[x[0], j, x[1], m]) * a_up[m] * a_up[j];
            }
        }
        acc
    });
    let special = max_abs_of(n, 3, |x| {
        let (p, k, l) = (x[0], x[1], x[2]);
        a[p] * s.get(&[k, l]) - a[k] * s.get(&[p, l])
    });
    let rscale = r.max_abs() * (1.0 + amax).powi(3);
    Ok(Lorentzian4Report {
        nullity: pack.metric.dot_lower(a, a),
        kernel_dimension: kernel_dimension(&pack.weyl_0_4),
        lambda,
        ricci_eigen_residual: Residual::new(eig, pack.ricci.max_abs() * (1.0 + amax)),
        mu,
        geodesic_residual: Residual::new(geo, field.nabla.max_abs() * (1.0 + amax)),
        closedness,
        divergence,
        special_riemann_residual: Residual::new(special, rscale),
    })
}
