//! Curvature quantities at a point, built from metric jets.
//!
//! Conventions: `R_{jkl}{}^m = ∂_k Γ^m_{jl} − ∂_j Γ^m_{kl} + Γ^m_{kp} Γ^p_{jl}
//! − Γ^m_{jp} Γ^p_{kl}`, `R_{jklm} = R_{jkl}{}^p g_{pm}`, and the Ricci tensor
//! is `R_{kl} = −R_{mkl}{}^m`. With these signs the round
//! sphere has positive scalar curvature and the Weyl tensor built below is
//! trace-free on every pair of slots.
//!
//! Every field is first assembled as a tensor of jets: the metric at order
//! `K`, Christoffel symbols at `K−1`, curvature at `K−2`, `∇C` at `K−3`. A
//! covariant derivative only needs first partials of its argument, so `∇C`
//! is exact at `K = 3` and `∇∇C` at `K = 4`.

use serde::Serialize;
use thiserror::Error;

use crate::exprdsl::{BinaryOp, EvalError, Expression, MetricSpec, UnaryOp};
use crate::jets::Jet;
use crate::tensor::{invert_jet_matrix, MetricAtPoint, Scalar, Tensor, TensorError, Variance};

use Variance::{Lower as L, Upper as U};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurvatureError {
    #[error("singular metric at the point (|det| = {0:e})")]
    SingularMetric(f64),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("jet order {have} too low, need {needed}")]
    OrderTooLow { needed: usize, have: usize },
    #[error("point has {found} coordinates, chart has {expected}")]
    PointDimension { expected: usize, found: usize },
    #[error("{0}")]
    Tensor(TensorError),
}

impl From<TensorError> for CurvatureError {
    fn from(e: TensorError) -> Self {
        match e {
            TensorError::SingularMetric(d) => CurvatureError::SingularMetric(d),
            other => CurvatureError::Tensor(other),
        }
    }
}

/// Jet-valued fields kept alongside the point values so that derived
/// quantities can be differentiated further.
#[derive(Debug, Clone)]
pub struct PackJets {
    pub g: Tensor<Jet>,
    pub g_inv: Tensor<Jet>,
    pub christoffel: Tensor<Jet>,
    pub riemann_0_4: Tensor<Jet>,
    pub ricci: Tensor<Jet>,
    pub scalar: Jet,
    pub weyl_0_4: Tensor<Jet>,
    pub nabla_weyl: Tensor<Jet>,
    pub weyl_divergence: Tensor<Jet>,
}

/// Curvature at one point of a chart.
#[derive(Debug, Clone)]
pub struct CurvaturePack {
    pub point: Vec<f64>,
    pub order: usize,
    pub metric: MetricAtPoint,
    /// `Γ^m_{ij}`, slots `[m, i, j]`.
    pub christoffel: Tensor,
    pub riemann_0_4: Tensor,
    pub riemann_3_1: Tensor,
    pub ricci: Tensor,
    pub scalar: f64,
    pub weyl_0_4: Tensor,
    pub weyl_3_1: Tensor,
    /// `∇_i C_{jklm}`, slots `[i, j, k, l, m]`.
    pub nabla_weyl: Tensor,
    /// `∇_m C_{jkl}{}^m`.
    pub weyl_divergence: Tensor,
    /// `∇_i ∇_m C_{jkl}{}^m`; only at order 4.
    pub nabla_div_weyl: Option<Tensor>,
    pub jets: PackJets,
}

fn jet_tensor(dim: usize, variance: &[Variance], f: impl FnMut(&[usize]) -> Jet) -> Tensor<Jet> {
    Tensor::from_fn(dim, variance, f)
}

fn zero_jet(dim: usize, order: usize) -> Jet {
    Jet::constant(0.0, dim, order)
}

/// Evaluates the metric components of `spec` as jets at `point`.
pub fn metric_jets(spec: &MetricSpec, point: &[f64], order: usize) -> Result<Vec<Vec<Jet>>, CurvatureError> {
    let n = spec.dimension();
    if point.len() != n {
        return Err(CurvatureError::PointDimension {
            expected: n,
            found: point.len(),
        });
    }
    let mut g: Vec<Vec<Option<Jet>>> = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let jet = spec.components[i][j].eval_jet(point, &spec.parameters, order)?;
            g[j][i] = Some(jet.clone());
            g[i][j] = Some(jet);
        }
    }
    Ok(g.into_iter()
        .map(|row| row.into_iter().map(|j| j.expect("filled")).collect())
        .collect())
}

/// Evaluates a list of expressions (one per coordinate) as a lower-index
/// jet vector field.
pub fn covector_jets(
    spec: &MetricSpec,
    exprs: &[Expression],
    point: &[f64],
    order: usize,
) -> Result<Tensor<Jet>, CurvatureError> {
    let comps = exprs
        .iter()
        .map(|e| e.eval_jet(point, &spec.parameters, order))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Tensor::from_vec(spec.dimension(), &[L], comps))
}

/// `∇_i T`: prepends a lower slot. `christoffel` is `Γ^m_{ij}` with slots `[m, i, j]`.
pub fn covariant_derivative(field: &Tensor<Jet>, christoffel: &Tensor<Jet>) -> Result<Tensor<Jet>, CurvatureError> {
    let have = field.data().iter().map(|j| j.order()).min().unwrap_or(0);
    if have < 1 {
        return Err(CurvatureError::OrderTooLow { needed: 1, have });
    }
    let n = field.dim();
    let r = field.rank();
    let mut variance = vec![L];
    variance.extend_from_slice(field.variance());
    let mut src = vec![0usize; r];
    Ok(jet_tensor(n, &variance, |idx| {
        let i = idx[0];
        let a = &idx[1..];
        let mut acc = field.get(a).derivative(i);
        for s in 0..r {
            src.copy_from_slice(a);
            for p in 0..n {
                src[s] = p;
                match field.variance()[s] {
                    Variance::Lower => {
                        acc = &acc - &(christoffel.get(&[p, i, a[s]]) * field.get(&src));
                    }
                    Variance::Upper => {
                        acc = &acc + &(christoffel.get(&[a[s], i, p]) * field.get(&src));
                    }
                }
            }
        }
        acc
    }))
}

/// Weyl tensor from Riemann, Ricci, scalar and metric (all lower), generic
/// over plain values and jets.
pub fn weyl_from_riemann<T: Scalar>(riemann: &Tensor<T>, ricci: &Tensor<T>, scalar: &T, g: &Tensor<T>) -> Tensor<T> {
    let n = riemann.dim();
    let nf = n as f64;
    let c1 = 1.0 / (nf - 2.0);
    let c2 = 1.0 / ((nf - 1.0) * (nf - 2.0));
    Tensor::from_fn(n, &[L, L, L, L], |x| {
        let (j, k, l, m) = (x[0], x[1], x[2], x[3]);
        let gm = |a, b| g.get(&[a, b]);
        let rc = |a, b| ricci.get(&[a, b]);
        // g_{m[j} R_{k]l} + R_{m[j} g_{k]l}, weight-one brackets
        let bracket = gm(m, j)
            .times(rc(k, l))
            .minus(&gm(m, k).times(rc(j, l)))
            .plus(&rc(m, j).times(gm(k, l)))
            .minus(&rc(m, k).times(gm(j, l)));
        let gg = gm(m, j).times(gm(k, l)).minus(&gm(m, k).times(gm(j, l)));
        riemann
            .get(x)
            .plus(&bracket.scaled(c1))
            .minus(&scalar.times(&gg).scaled(c2))
    })
}

impl CurvaturePack {
    pub fn new(spec: &MetricSpec, point: &[f64], order: usize) -> Result<Self, CurvatureError> {
        if order < 3 {
            return Err(CurvatureError::OrderTooLow { needed: 3, have: order });
        }
        let g_jets = metric_jets(spec, point, order)?;
        CurvaturePack::from_metric_jets(point, g_jets)
    }

    /// Builds the pack from metric component jets of a common order `>= 3`.
    pub fn from_metric_jets(point: &[f64], g_jets: Vec<Vec<Jet>>) -> Result<Self, CurvatureError> {
        let n = g_jets.len();
        let order = g_jets.iter().flatten().map(|j| j.order()).min().unwrap_or(0);
        if order < 3 {
            return Err(CurvatureError::OrderTooLow { needed: 3, have: order });
        }
        let metric = MetricAtPoint::from_jets(g_jets.clone())?;
        let inv = invert_jet_matrix(&g_jets)?;
        let g = jet_tensor(n, &[L, L], |i| g_jets[i[0]][i[1]].clone());
        let g_inv = jet_tensor(n, &[U, U], |i| {
            // exact symmetry of the inverse
            (&inv[i[0]][i[1]] + &inv[i[1]][i[0]]).scale(0.5)
        });

        // ∂_k g_ij at order K−1
        let dg: Vec<Tensor<Jet>> = (0..n)
            .map(|k| jet_tensor(n, &[L, L], |i| g.get(i).derivative(k)))
            .collect();
        let christoffel = jet_tensor(n, &[U, L, L], |x| {
            let (m, i, j) = (x[0], x[1], x[2]);
            let mut acc = zero_jet(n, order - 1);
            for p in 0..n {
                let comb = &(dg[i].get(&[p, j]) + dg[j].get(&[p, i])) - dg[p].get(&[i, j]);
                acc = &acc + &(g_inv.get(&[m, p]) * &comb);
            }
            acc.scale(0.5)
        });
        // ∂_k Γ^m_{ij}, order K−2
        let dgamma: Vec<Tensor<Jet>> = (0..n)
            .map(|k| jet_tensor(n, &[U, L, L], |x| christoffel.get(x).derivative(k)))
            .collect();
        let gamma_lo = christoffel.map(|j| j.truncate(order - 2));

        let riemann_3_1 = jet_tensor(n, &[L, L, L, U], |x| {
            let (j, k, l, m) = (x[0], x[1], x[2], x[3]);
            let mut acc = dgamma[k].get(&[m, j, l]) - dgamma[j].get(&[m, k, l]);
            for p in 0..n {
                acc = &acc + &(gamma_lo.get(&[m, k, p]) * gamma_lo.get(&[p, j, l]));
                acc = &acc - &(gamma_lo.get(&[m, j, p]) * gamma_lo.get(&[p, k, l]));
            }
            acc
        });
        let g_lo = g.map(|j| j.truncate(order - 2));
        let g_inv_lo = g_inv.map(|j| j.truncate(order - 2));
        let riemann_0_4 = riemann_3_1.transform_slot(3, &g_lo, L);
        let ricci = jet_tensor(n, &[L, L], |x| {
            let (k, l) = (x[0], x[1]);
            let mut acc = zero_jet(n, order - 2);
            for m in 0..n {
                acc = &acc - riemann_3_1.get(&[m, k, l, m]);
            }
            acc
        });
        // exact symmetry
        let ricci = jet_tensor(n, &[L, L], |x| {
            (ricci.get(&[x[0], x[1]]) + ricci.get(&[x[1], x[0]])).scale(0.5)
        });
        let mut scalar = zero_jet(n, order - 2);
        for k in 0..n {
            for l in 0..n {
                scalar = &scalar + &(g_inv_lo.get(&[k, l]) * ricci.get(&[k, l]));
            }
        }
        let weyl_0_4 = weyl_from_riemann(&riemann_0_4, &ricci, &scalar, &g_lo);
        let nabla_weyl = covariant_derivative(&weyl_0_4, &christoffel)?;
        let weyl_divergence = divergence_last(&nabla_weyl, &g_inv);
        let nabla_div_weyl = if order >= 4 {
            Some(covariant_derivative(&weyl_divergence, &christoffel)?.values())
        } else {
            None
        };

        let riemann_0_4_v = riemann_0_4.values();
        let weyl_0_4_v = weyl_0_4.values();
        Ok(CurvaturePack {
            point: point.to_vec(),
            order,
            christoffel: christoffel.values(),
            riemann_3_1: riemann_3_1.values(),
            riemann_0_4: riemann_0_4_v,
            ricci: ricci.values(),
            scalar: scalar.value(),
            weyl_3_1: weyl_0_4_v.raise_lower(3, &metric)?,
            weyl_0_4: weyl_0_4_v,
            nabla_weyl: nabla_weyl.values(),
            weyl_divergence: weyl_divergence.values(),
            nabla_div_weyl,
            metric,
            jets: PackJets {
                g,
                g_inv,
                christoffel,
                riemann_0_4,
                ricci,
                scalar,
                weyl_0_4,
                nabla_weyl,
                weyl_divergence,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// Covariant derivative of a jet field using this pack's connection.
    pub fn covariant_derivative(&self, field: &Tensor<Jet>) -> Result<Tensor<Jet>, CurvatureError> {
        covariant_derivative(field, &self.jets.christoffel)
    }

    /// Raises every slot of a lower-index tensor.
    pub fn raise_all(&self, t: &Tensor) -> Tensor {
        let mut out = t.clone();
        for s in 0..t.rank() {
            if out.variance()[s] == L {
                out = out.raise_lower(s, &self.metric).expect("slot in range");
            }
        }
        out
    }

    /// Full contraction `a_{...} b^{...}` of two all-lower tensors.
    pub fn square_contract(&self, a: &Tensor, b: &Tensor) -> f64 {
        let up = self.raise_all(b);
        a.data().iter().zip(up.data()).map(|(x, y)| x * y).sum()
    }

    /// `R_{jklm} R^{jklm}`.
    pub fn kretschmann(&self) -> f64 {
        self.square_contract(&self.riemann_0_4, &self.riemann_0_4)
    }

    /// `C² = C_{jklm} C^{jklm}`.
    pub fn weyl_square(&self) -> f64 {
        self.square_contract(&self.weyl_0_4, &self.weyl_0_4)
    }

    /// `∇_i R_{jklm}` from the Riemann jets.
    pub fn nabla_riemann(&self) -> Result<Tensor, CurvatureError> {
        Ok(self.covariant_derivative(&self.jets.riemann_0_4)?.values())
    }

    /// `∇_i R_{jk}`, slots `[i, j, k]`.
    pub fn nabla_ricci(&self) -> Result<Tensor, CurvatureError> {
        Ok(self.covariant_derivative(&self.jets.ricci)?.values())
    }

    /// Direct second covariant derivative `∇_i ∇_s C_{jklm}` (order 4 only).
    pub fn second_nabla_weyl(&self) -> Result<Tensor, CurvatureError> {
        Ok(self.covariant_derivative(&self.jets.nabla_weyl)?.values())
    }
}

/// `g^{mp} T_{i j k l p}` contracted between the first and last slot.
fn divergence_last(nabla: &Tensor<Jet>, g_inv: &Tensor<Jet>) -> Tensor<Jet> {
    let n = nabla.dim();
    let r = nabla.rank();
    let order = nabla.data()[0].order();
    let mut full = vec![0usize; r];
    jet_tensor(n, &vec![L; r - 2], |idx| {
        let mut acc = zero_jet(n, order);
        for m in 0..n {
            for p in 0..n {
                full[0] = m;
                full[1..r - 1].copy_from_slice(idx);
                full[r - 1] = p;
                acc = &acc + &(g_inv.get(&[m, p]) * nabla.get(&full));
            }
        }
        acc
    })
}

/// Convenience wrapper matching [`CurvaturePack::new`].
pub fn curvature_pack(spec: &MetricSpec, point: &[f64], order: usize) -> Result<CurvaturePack, CurvatureError> {
    CurvaturePack::new(spec, point, order)
}

/// `(∇_i ∇_s − ∇_s ∇_i) t` for an all-lower tensor via the Ricci identity;
/// slots of the result are `[i, s, a_1 … a_r]`.
pub fn curvature_action_all(t: &Tensor, pack: &CurvaturePack) -> Tensor {
    let n = t.dim();
    let r = t.rank();
    let riem = &pack.riemann_3_1; // R_{is a}{}^p
    let mut variance = vec![L, L];
    variance.extend_from_slice(t.variance());
    let mut src = vec![0usize; r];
    Tensor::from_fn(n, &variance, |idx| {
        let (i, s) = (idx[0], idx[1]);
        let a = &idx[2..];
        let mut acc = 0.0;
        for slot in 0..r {
            src.copy_from_slice(a);
            for p in 0..n {
                src[slot] = p;
                acc += riem.get(&[i, s, a[slot], p]) * t.get(&src);
            }
        }
        acc
    })
}

/// `(∇_i ∇_s − ∇_s ∇_i) t` at fixed `(i, s)`.
pub fn curvature_action(t: &Tensor, pack: &CurvaturePack, i: usize, s: usize) -> Tensor {
    let n = t.dim();
    let riem = &pack.riemann_3_1;
    let r = t.rank();
    let mut src = vec![0usize; r];
    Tensor::from_fn(n, t.variance(), |a| {
        let mut acc = 0.0;
        for slot in 0..r {
            src.copy_from_slice(a);
            for p in 0..n {
                src[slot] = p;
                acc += riem.get(&[i, s, a[slot], p]) * t.get(&src);
            }
        }
        acc
    })
}

/// Metric `e^{2σ} g`.
pub fn conformal_rescale(spec: &MetricSpec, sigma: &Expression) -> MetricSpec {
    let mut out = spec.clone();
    out.sigma = None;
    out.vector_a = None;
    if *sigma == Expression::Constant(0.0) {
        return out;
    }
    out.name = format!("{}_rescaled", spec.name);
    let factor = Expression::unary(
        UnaryOp::Exp,
        Expression::binary(BinaryOp::Mul, Expression::Constant(2.0), sigma.clone()),
    );
    out.components = spec
        .components
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| Expression::binary(BinaryOp::Mul, factor.clone(), c.clone()))
                .collect()
        })
        .collect();
    out
}

/// `L(A)_{ijklm} = 2A_i T_{jklm} + A_j T_{iklm} + A_k T_{jilm} + A_l T_{jkim} + A_m T_{jkli}`.
pub fn recurrence_rhs(a: &[f64], t: &Tensor) -> Tensor {
    let n = t.dim();
    Tensor::from_fn(n, &[L; 5], |x| {
        let (i, j, k, l, m) = (x[0], x[1], x[2], x[3], x[4]);
        2.0 * a[i] * t.get(&[j, k, l, m])
            + a[j] * t.get(&[i, k, l, m])
            + a[k] * t.get(&[j, i, l, m])
            + a[l] * t.get(&[j, k, i, m])
            + a[m] * t.get(&[j, k, l, i])
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformalReport {
    /// Scale-normalized residual of the rescaling identity with `A^p = g^{pq} ∂_q σ`.
    pub identity_residual: f64,
    pub identity_residual_raw: f64,
    /// Same identity with `A^p` raised by the rescaled metric instead.
    pub identity_residual_hat_raised: f64,
    /// `max |Ĉ_{jkl}{}^m − C_{jkl}{}^m|`, scale-normalized.
    pub weyl_invariance: f64,
}

/// Checks the transformation law of `∇C` and the invariance of `C_{jkl}{}^m`
/// under `ĝ = e^{2σ} g` at one point.
pub fn conformal_identity_residual(
    spec: &MetricSpec,
    sigma: &Expression,
    point: &[f64],
) -> Result<ConformalReport, CurvatureError> {
    let pack = CurvaturePack::new(spec, point, 3)?;
    let hat = CurvaturePack::new(&conformal_rescale(spec, sigma), point, 3)?;
    let n = spec.dimension();
    let s = sigma.eval_jet(point, &spec.parameters, 1)?;
    let grad = s.gradient();
    let e2s = (2.0 * s.value()).exp();
    let a_up = pack.metric.raise_vector(&grad);
    let a_up_hat = hat.metric.raise_vector(&grad);

    let rhs = pack.nabla_weyl.sub(&recurrence_rhs(&grad, &pack.weyl_0_4)).scale(e2s);
    let c_hat = &hat.weyl_0_4;
    let g = &pack.metric.g;
    let lhs_with = |a_up: &[f64]| {
        Tensor::from_fn(n, &[L; 5], |x| {
            let (i, j, k, l, m) = (x[0], x[1], x[2], x[3], x[4]);
            let mut bracket = 0.0;
            for p in 0..n {
                bracket += a_up[p]
                    * (g.get(&[i, j]) * c_hat.get(&[p, k, l, m])
                        + g.get(&[i, k]) * c_hat.get(&[j, p, l, m])
                        + g.get(&[i, l]) * c_hat.get(&[j, k, p, m])
                        + g.get(&[i, m]) * c_hat.get(&[j, k, l, p]));
            }
            hat.nabla_weyl.get(x) - bracket
        })
    };
    let scale = 1.0 + hat.nabla_weyl.max_abs().max(e2s * pack.nabla_weyl.max_abs());
    let raw = lhs_with(&a_up).sub(&rhs).max_abs();
    let raw_hat = lhs_with(&a_up_hat).sub(&rhs).max_abs();
    let weyl_invariance =
        hat.weyl_3_1.sub(&pack.weyl_3_1).max_abs() / (1.0 + pack.weyl_3_1.max_abs());
    Ok(ConformalReport {
        identity_residual: raw / scale,
        identity_residual_raw: raw,
        identity_residual_hat_raised: raw_hat / scale,
        weyl_invariance,
    })
}

/// `∇_i ∇_m C_{jkl}{}^m` by central differences of the order-3 divergence
/// field, corrected with the connection at the centre point.
pub fn fd_nabla_div_weyl(spec: &MetricSpec, point: &[f64], step: f64) -> Result<Tensor, CurvatureError> {
    let n = spec.dimension();
    let centre = CurvaturePack::new(spec, point, 3)?;
    let mut partials = Vec::with_capacity(n);
    for i in 0..n {
        let mut plus = point.to_vec();
        let mut minus = point.to_vec();
        plus[i] += step;
        minus[i] -= step;
        let dp = CurvaturePack::new(spec, &plus, 3)?.weyl_divergence;
        let dm = CurvaturePack::new(spec, &minus, 3)?.weyl_divergence;
        partials.push(dp.sub(&dm).scale(0.5 / step));
    }
    let gamma = &centre.christoffel;
    let div = &centre.weyl_divergence;
    Ok(Tensor::from_fn(n, &[L; 4], |x| {
        let (i, j, k, l) = (x[0], x[1], x[2], x[3]);
        let mut acc = *partials[i].get(&[j, k, l]);
        for p in 0..n {
            acc -= gamma.get(&[p, i, j]) * div.get(&[p, k, l]);
            acc -= gamma.get(&[p, i, k]) * div.get(&[j, p, l]);
            acc -= gamma.get(&[p, i, l]) * div.get(&[j, k, p]);
        }
        acc
    }))
}

/// Symmetry residuals of a (0,4) curvature-like tensor, each scaled by
/// `1 + max|t|`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SymmetryResiduals {
    pub first_pair: f64,
    pub second_pair: f64,
    pub pair_exchange: f64,
    pub first_bianchi: f64,
}

impl SymmetryResiduals {
    pub fn max(&self) -> f64 {
        self.first_pair
            .max(self.second_pair)
            .max(self.pair_exchange)
            .max(self.first_bianchi)
    }
}

pub fn symmetry_residuals(t: &Tensor) -> SymmetryResiduals {
    let n = t.dim();
    let scale = 1.0 + t.max_abs();
    let mut r = [0.0f64; 4];
    crate::tensor::for_each_index(n, 4, |x| {
        let (j, k, l, m) = (x[0], x[1], x[2], x[3]);
        let v = *t.get(x);
        r[0] = r[0].max((v + t.get(&[k, j, l, m])).abs());
        r[1] = r[1].max((v + t.get(&[j, k, m, l])).abs());
        r[2] = r[2].max((v - t.get(&[l, m, j, k])).abs());
        r[3] = r[3].max((v + t.get(&[j, l, m, k]) + t.get(&[j, m, k, l])).abs());
    });
    SymmetryResiduals {
        first_pair: r[0] / scale,
        second_pair: r[1] / scale,
        pair_exchange: r[2] / scale,
        first_bianchi: r[3] / scale,
    }
}

/// Largest trace of a (0,4) tensor over any pair of slots, scaled by `1 + max|t|`.
pub fn trace_residual(t: &Tensor, metric: &MetricAtPoint) -> f64 {
    let n = t.dim();
    let mut worst = 0.0f64;
    for a in 0..4 {
        for b in a + 1..4 {
            let rest: Vec<usize> = (0..4).filter(|&s| s != a && s != b).collect();
            let mut full = [0usize; 4];
            for x in 0..n {
                for y in 0..n {
                    let mut acc = 0.0;
                    for p in 0..n {
                        for q in 0..n {
                            full[a] = p;
                            full[b] = q;
                            full[rest[0]] = x;
                            full[rest[1]] = y;
                            acc += metric.g_inv.get(&[p, q]) * t.get(&full);
                        }
                    }
                    worst = worst.max(acc.abs());
                }
            }
        }
    }
    worst / (1.0 + t.max_abs())
}

/// `∇_i R_{jklm} + ∇_j R_{kilm} + ∇_k R_{ijlm}`, scaled.
pub fn second_bianchi_residual(pack: &CurvaturePack) -> Result<f64, CurvatureError> {
    let d = pack.nabla_riemann()?;
    let n = pack.dim();
    let mut worst = 0.0f64;
    crate::tensor::for_each_index(n, 5, |x| {
        let (i, j, k, l, m) = (x[0], x[1], x[2], x[3], x[4]);
        let v = d.get(x) + d.get(&[j, k, i, l, m]) + d.get(&[k, i, j, l, m]);
        worst = worst.max(v.abs());
    });
    Ok(worst / (1.0 + d.max_abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(name: &str, coords: &[&str], metric: &[Vec<&str>], params: &[(&str, f64)]) -> MetricSpec {
        let n = coords.len();
        MetricSpec::from_strings(name, coords, params, metric, &vec![(-1.0, 1.0); n], None, None).unwrap()
    }

    fn minkowski() -> MetricSpec {
        spec(
            "flat",
            &["t", "x", "y", "z"],
            &[vec!["-1", "0", "0", "0"], vec!["1", "0", "0"], vec!["1", "0"], vec!["1"]],
            &[],
        )
    }

    fn schwarzschild() -> MetricSpec {
        spec(
            "schw",
            &["t", "r", "theta", "phi"],
            &[
                vec!["-(1 - 2*M/r)", "0", "0", "0"],
                vec!["1/(1 - 2*M/r)", "0", "0"],
                vec!["r^2", "0"],
                vec!["r^2*sin(theta)^2"],
            ],
            &[("M", 1.0)],
        )
    }

    fn sphere3() -> MetricSpec {
        spec(
            "s3",
            &["chi", "theta", "phi"],
            &[vec!["1", "0", "0"], vec!["sin(chi)^2", "0"], vec!["sin(chi)^2*sin(theta)^2"]],
            &[],
        )
    }

    #[test]
    fn flat_space_has_no_curvature() {
        let p = CurvaturePack::new(&minkowski(), &[0.1, 0.2, 0.3, 0.4], 3).unwrap();
        assert!(p.riemann_0_4.max_abs() <= 1e-13);
        assert!(p.ricci.max_abs() <= 1e-13);
        assert!(p.weyl_0_4.max_abs() <= 1e-13);
        assert!(p.nabla_weyl.max_abs() <= 1e-13);
    }

    #[test]
    fn schwarzschild_kretschmann_closed_form() {
        let p = CurvaturePack::new(&schwarzschild(), &[0.0, 3.0, std::f64::consts::FRAC_PI_2, 0.0], 3).unwrap();
        let k = p.kretschmann();
        assert!((k - 48.0 / 729.0).abs() <= 1e-9 * 48.0 / 729.0, "{k}");
        assert!(p.ricci.max_abs() <= 1e-10);
        let sym = symmetry_residuals(&p.riemann_0_4);
        assert!(sym.max() <= 1e-12, "{sym:?}");
    }

    #[test]
    fn unit_three_sphere() {
        let p = CurvaturePack::new(&sphere3(), &[1.0, 0.7, 0.2], 3).unwrap();
        assert!((p.scalar - 6.0).abs() <= 1e-10, "{}", p.scalar);
        assert!(p.weyl_0_4.max_abs() <= 1e-11);
    }

    #[test]
    fn metric_is_parallel_and_scalar_gradient_is_plain() {
        let s = schwarzschild();
        let pt = [0.0, 4.0, 1.0, 0.3];
        let p = CurvaturePack::new(&s, &pt, 3).unwrap();
        let dg = p.covariant_derivative(&p.jets.g).unwrap().values();
        assert!(dg.max_abs() <= 1e-12);
        let f = s.parse("r^2*cos(theta)").unwrap().eval_jet(&pt, &s.parameters, 3).unwrap();
        let scalar = Tensor::from_vec(4, &[], vec![f.clone()]);
        let grad = p.covariant_derivative(&scalar).unwrap().values();
        for (i, g) in f.gradient().iter().enumerate() {
            assert_eq!(grad.get(&[i]), g);
        }
    }

    #[test]
    fn curvature_action_on_metric_and_scalar_vanishes() {
        let p = CurvaturePack::new(&schwarzschild(), &[0.0, 4.0, 1.0, 0.3], 3).unwrap();
        assert!(curvature_action_all(&p.metric.g, &p).max_abs() <= 1e-14);
        let s = Tensor::scalar(2.0);
        assert_eq!(curvature_action(&s, &p, 0, 1).max_abs(), 0.0);
    }

    #[test]
    fn order_too_low_is_reported() {
        assert!(matches!(
            CurvaturePack::new(&minkowski(), &[0.0; 4], 2),
            Err(CurvatureError::OrderTooLow { .. })
        ));
        let p = CurvaturePack::new(&minkowski(), &[0.0; 4], 3).unwrap();
        assert!(matches!(
            p.covariant_derivative(&p.jets.nabla_weyl),
            Err(CurvatureError::OrderTooLow { .. })
        ));
    }

    #[test]
    fn horizon_is_a_numerical_failure() {
        let err = CurvaturePack::new(&schwarzschild(), &[0.0, 2.0, 1.0, 0.0], 3).unwrap_err();
        assert!(matches!(err, CurvatureError::Eval(_)), "{err:?}");
    }

    #[test]
    fn identity_rescaling() {
        let m = minkowski();
        let out = conformal_rescale(&m, &Expression::Constant(0.0));
        assert_eq!(out.components, m.components);
        let r = conformal_identity_residual(&m, &Expression::Constant(0.0), &[0.0; 4]).unwrap();
        assert_eq!(r.identity_residual, 0.0);
    }

    #[test]
    fn rescaled_flat_space_stays_conformally_flat() {
        let m = minkowski();
        let sigma = m.parse("x").unwrap();
        let p = CurvaturePack::new(&conformal_rescale(&m, &sigma), &[0.1, 0.2, 0.3, 0.4], 3).unwrap();
        assert!(p.weyl_0_4.max_abs() <= 1e-11);
        assert!(p.riemann_0_4.max_abs() > 1e-3);
    }

    #[test]
    fn schwarzschild_rescaling_identity() {
        let s = schwarzschild();
        let sigma = s.parse("0.1*r").unwrap();
        let r = conformal_identity_residual(&s, &sigma, &[0.3, 4.2, 1.1, 0.5]).unwrap();
        assert!(r.identity_residual <= 1e-9, "{r:?}");
        assert!(r.weyl_invariance <= 1e-9, "{r:?}");
    }

    #[test]
    fn curvature_action_matches_direct_second_derivative() {
        let s = schwarzschild();
        let p = CurvaturePack::new(&s, &[0.3, 4.2, 1.1, 0.5], 4).unwrap();
        let dd = p.second_nabla_weyl().unwrap();
        let action = curvature_action_all(&p.weyl_0_4, &p);
        let direct = dd.sub(&dd.permute(&[1, 0, 2, 3, 4, 5]));
        let err = action.sub(&direct).max_abs() / (1.0 + direct.max_abs());
        assert!(err <= 1e-8, "{err}");
        assert!(direct.max_abs() > 1e-3);
    }

    #[test]
    fn finite_difference_divergence_derivative_agrees() {
        let s = schwarzschild();
        let pt = [0.3, 4.2, 1.1, 0.5];
        let p = CurvaturePack::new(&s, &pt, 4).unwrap();
        let exact = p.nabla_div_weyl.clone().unwrap();
        let fd = fd_nabla_div_weyl(&s, &pt, 1e-4).unwrap();
        assert!(fd.sub(&exact).max_abs() <= 1e-6 * (1.0 + exact.max_abs()));
    }
}
