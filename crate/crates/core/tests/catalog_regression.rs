use cqr_core::battery::{halton_points, run_point, RunConfig};
use cqr_core::catalog::builtin;

fn check(call: &str, order: usize) {
    let entry = builtin(call).unwrap();
    let cfg = RunConfig { order, ..RunConfig::default() };
    for p in halton_points(&entry.spec, 5) {
        let r = run_point(&entry.spec, &entry.expected, &p, &cfg).unwrap();
        let detail: Vec<String> = r
            .failed
            .iter()
            .map(|f| format!("{f}={:?} {:?}", r.value(f), r.classifications.get(f)))
            .collect();
        assert!(r.passed(), "{call} at {p:?}: {detail:?}");
    }
}

#[test]
fn minkowski() {
    check("minkowski4", 3);
}

#[test]
fn schwarzschild() {
    check("schwarzschild", 4);
}

#[test]
fn sphere() {
    check("s3_sphere(a=2)", 3);
}

#[test]
fn frw() {
    check("frw_flat(q=0.7)", 3);
}

#[test]
fn desitter() {
    check("desitter(H=0.5)", 3);
}

#[test]
fn godel() {
    check("godel", 3);
}

#[test]
fn ppwave_generic() {
    check("ppwave(a=u, b=0.3, c=u^2)", 3);
}

#[test]
fn ppwave_cqr() {
    check("ppwave_cqr", 4);
}

#[test]
fn ppwave_concircular() {
    check("ppwave_concircular", 3);
}

#[test]
fn random_poly_universal_identities() {
    check("random_poly(seed=3)", 3);
    check("random_poly(seed=1, dim=5)", 3);
}

#[test]
fn ppwaves_have_no_u_christoffels() {
    use cqr_core::curvature::CurvaturePack;
    for call in ["ppwave_cqr", "ppwave_concircular", "ppwave(a=sin(u), b=u^3, c=exp(u))"] {
        let spec = builtin(call).unwrap().spec;
        for p in halton_points(&spec, 5) {
            let pack = CurvaturePack::new(&spec, &p, 3).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let v = pack.christoffel.get(&[0, i, j]).abs();
                    assert!(v <= 1e-13, "{call}: Gamma^u_{i}{j} = {v}");
                }
            }
        }
    }
}
