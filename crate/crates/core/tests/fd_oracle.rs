//! Curvature scalars recomputed by plain finite differences of the metric.

use cqr_core::catalog::builtin;
use cqr_core::curvature::CurvaturePack;
use cqr_core::exprdsl::MetricSpec;
use nalgebra::DMatrix;

const H: f64 = 2e-3;

fn metric(spec: &MetricSpec, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| spec.components[i][j].eval(x, &spec.parameters).unwrap())
}

/// Five-point central difference of `f` along coordinate `k`.
fn diff<T>(f: &dyn Fn(&[f64]) -> T, x: &[f64], k: usize, combine: impl Fn(&[T; 4]) -> T) -> T {
    let at = |s: f64| {
        let mut y = x.to_vec();
        y[k] += s * H;
        f(&y)
    };
    combine(&[at(2.0), at(1.0), at(-1.0), at(-2.0)])
}

fn five_point(v: &[f64; 4]) -> f64 {
    (-v[0] + 8.0 * v[1] - 8.0 * v[2] + v[3]) / (12.0 * H)
}

/// `gamma[a][b][c]` = Γ^a_{bc}.
fn christoffel(spec: &MetricSpec, x: &[f64]) -> Vec<Vec<Vec<f64>>> {
    let n = x.len();
    let g = metric(spec, x);
    let gi = g.clone().try_inverse().unwrap();
    let dg: Vec<DMatrix<f64>> = (0..n)
        .map(|k| {
            diff(&|y: &[f64]| metric(spec, y), x, k, |v| (&v[1] * 8.0 - &v[2] * 8.0 - &v[0] + &v[3]) / (12.0 * H))
        })
        .collect();
    let mut out = vec![vec![vec![0.0; n]; n]; n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                out[a][b][c] = 0.5
                    * (0..n)
                        .map(|d| gi[(a, d)] * (dg[b][(d, c)] + dg[c][(d, b)] - dg[d][(b, c)]))
                        .sum::<f64>();
            }
        }
    }
    out
}

/// Returns (scalar curvature, Kretschmann) with R^a_{bcd} in the MTW convention.
fn oracle(spec: &MetricSpec, x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let gam = christoffel(spec, x);
    let dgam: Vec<Vec<Vec<Vec<f64>>>> = (0..n)
        .map(|k| {
            let f = |y: &[f64]| christoffel(spec, y);
            diff(&f, x, k, |v| {
                let mut out = v[0].clone();
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            out[a][b][c] = five_point(&[v[0][a][b][c], v[1][a][b][c], v[2][a][b][c], v[3][a][b][c]]);
                        }
                    }
                }
                out
            })
        })
        .collect();
    let g = metric(spec, x);
    let gi = g.clone().try_inverse().unwrap();
    let mut riem = vec![0.0; n * n * n * n];
    let idx = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v = dgam[c][a][d][b] - dgam[d][a][c][b];
                    for e in 0..n {
                        v += gam[a][c][e] * gam[e][d][b] - gam[a][d][e] * gam[e][c][b];
                    }
                    riem[idx(a, b, c, d)] = v;
                }
            }
        }
    }
    let mut scalar = 0.0;
    for b in 0..n {
        for d in 0..n {
            let ricci: f64 = (0..n).map(|a| riem[idx(a, b, a, d)]).sum();
            scalar += gi[(b, d)] * ricci;
        }
    }
    // lower the first index, raise the last three
    let lower = |a: usize, b: usize, c: usize, d: usize| (0..n).map(|e| g[(a, e)] * riem[idx(e, b, c, d)]).sum::<f64>();
    let mut low = vec![0.0; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    low[idx(a, b, c, d)] = lower(a, b, c, d);
                }
            }
        }
    }
    let mut k = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut up = 0.0;
                    for p in 0..n {
                        for q in 0..n {
                            for r in 0..n {
                                up += gi[(b, p)] * gi[(c, q)] * gi[(d, r)] * riem[idx(a, p, q, r)];
                            }
                        }
                    }
                    k += low[idx(a, b, c, d)] * up;
                }
            }
        }
    }
    (scalar, k)
}

fn compare(call: &str, x: &[f64]) {
    let spec = builtin(call).unwrap().spec;
    let pack = CurvaturePack::new(&spec, x, 3).unwrap();
    let (scalar, kretschmann) = oracle(&spec, x);
    let scale = 1.0 + kretschmann.abs().sqrt();
    assert!((pack.scalar - scalar).abs() <= 1e-6 * scale, "{call}: scalar {} vs {scalar}", pack.scalar);
    assert!(
        (pack.kretschmann() - kretschmann).abs() <= 1e-6 * scale * scale,
        "{call}: kretschmann {} vs {kretschmann}",
        pack.kretschmann()
    );
}

#[test]
fn random_polynomial_metrics() {
    for seed in [0, 5, 11] {
        compare(&format!("random_poly(seed={seed})"), &[0.1, -0.2, 0.15, 0.05]);
    }
    compare("random_poly(seed=2, dim=5)", &[0.1, -0.2, 0.15, 0.05, 0.2]);
}

#[test]
fn catalog_geometries() {
    compare("godel(a=1.3)", &[0.2, 0.3, -0.1, 0.4]);
    compare("schwarzschild(M=1)", &[0.5, 4.0, 1.0, 0.3]);
    compare("frw_flat(q=0.7)", &[1.2, 0.1, 0.2, 0.3]);
    compare("ppwave(a=u^2, b=sin(u), c=u)", &[0.4, 0.1, 0.3, -0.2]);
}

#[test]
fn sphere_scalar_matches_oracle_sign() {
    let spec = builtin("s3_sphere(a=1)").unwrap().spec;
    let (scalar, _) = oracle(&spec, &spec.box_center());
    assert!((scalar - 6.0).abs() < 1e-6);
}
