use std::collections::BTreeMap;

use cqr_core::exprdsl::{parse_expression, BinaryOp, Expression, Scope, UnaryOp};
use cqr_core::jets::{coefficient_count, Jet};
use cqr_core::tensor::{for_each_index, MetricAtPoint, Tensor, Variance};
use proptest::prelude::*;

const DIM: usize = 3;

fn close(a: &Jet, b: &Jet, tol: f64) -> bool {
    a.coefficients()
        .iter()
        .zip(b.coefficients())
        .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

fn jet(order: usize) -> impl Strategy<Value = Jet> {
    prop::collection::vec(-2.0f64..2.0, coefficient_count(DIM, order))
        .prop_map(move |c| Jet::from_coefficients(DIM, order, c))
}

fn expression() -> impl Strategy<Value = Expression> {
    let leaf = prop_oneof![
        (0..DIM).prop_map(Expression::Coordinate),
        (-20i32..20).prop_map(|k| Expression::Constant(k as f64 / 16.0)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expression::binary(BinaryOp::Add, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expression::binary(BinaryOp::Sub, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expression::binary(BinaryOp::Mul, a, b)),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expression::binary(BinaryOp::Div, a, Expression::unary(UnaryOp::Exp, b))),
            (inner.clone(), 2u32..4)
                .prop_map(|(a, k)| Expression::binary(BinaryOp::Pow, a, Expression::Constant(k as f64))),
            inner.clone().prop_map(|a| Expression::unary(UnaryOp::Sin, a)),
            inner.clone().prop_map(|a| Expression::unary(UnaryOp::Cos, a)),
            inner.clone().prop_map(|a| Expression::unary(UnaryOp::Neg, a)),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.8f64..0.8, DIM)
}

fn coords() -> Vec<String> {
    vec!["x".into(), "y".into(), "z".into()]
}

fn eval(e: &Expression, p: &[f64]) -> f64 {
    e.eval(p, &BTreeMap::new()).unwrap()
}

proptest! {
    #[test]
    fn jet_ring_axioms(a in jet(4), b in jet(4), c in jet(4)) {
        prop_assert!(close(&(&a * &b), &(&b * &a), 1e-12));
        prop_assert!(close(&(&(&a * &b) * &c), &(&a * &(&b * &c)), 1e-10));
        prop_assert!(close(&(&(&a + &b) * &c), &(&(&a * &c) + &(&b * &c)), 1e-11));
        prop_assert!(close(&(&(&a - &a) + &b), &b, 0.0));
    }

    #[test]
    fn leibniz_rule(a in jet(4), b in jet(4), i in 0..DIM) {
        let lhs = (&a * &b).derivative(i);
        let rhs = &(&a.derivative(i) * &b.truncate(3)) + &(&a.truncate(3) * &b.derivative(i));
        prop_assert!(close(&lhs, &rhs, 1e-11));
    }

    #[test]
    fn exp_ln_round_trip(mut a in jet(4), v in 0.2f64..3.0) {
        let mut c = a.coefficients().to_vec();
        c[0] = v;
        a = Jet::from_coefficients(DIM, 4, c);
        prop_assert!(close(&a.ln().unwrap().exp().unwrap(), &a, 1e-10));
        prop_assert!(close(&a.exp().unwrap().ln().unwrap(), &a, 1e-10));
        let r = a.recip().unwrap();
        prop_assert!(close(&(&a * &r), &Jet::constant(1.0, DIM, 4), 1e-10));
    }

    #[test]
    fn print_parse_round_trip(e in expression(), p in point()) {
        let names = coords();
        let text = e.display(&names).to_string();
        let back = parse_expression(&text, &Scope::new(&names, &[])).unwrap();
        let again = back.display(&names).to_string();
        prop_assert_eq!(&text, &again);
        let (x, y) = (eval(&e, &p), eval(&back, &p));
        prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()), "{} vs {} for {}", x, y, text);
    }

    #[test]
    fn jets_agree_with_finite_differences(e in expression(), p in point()) {
        let j = e.eval_jet(&p, &BTreeMap::new(), 2).unwrap();
        let h = 1e-3;
        for i in 0..DIM {
            let f = |s: f64| {
                let mut q = p.clone();
                q[i] += s * h;
                eval(&e, &q)
            };
            let (f2, f1, f0, m1, m2) = (f(2.0), f(1.0), f(0.0), f(-1.0), f(-2.0));
            let first = (-f2 + 8.0 * f1 - 8.0 * m1 + m2) / (12.0 * h);
            let second = (-f2 + 16.0 * f1 - 30.0 * f0 + 16.0 * m1 - m2) / (12.0 * h * h);
            let d1 = j.gradient()[i];
            let mut ex = [0u8; DIM];
            ex[i] = 2;
            let d2 = j.partial(&ex);
            prop_assert!((first - d1).abs() <= 1e-7 * (1.0 + d1.abs()), "{} vs {}", first, d1);
            prop_assert!((second - d2).abs() <= 1e-5 * (1.0 + d2.abs()), "{} vs {}", second, d2);
        }
    }

    #[test]
    fn polynomials_are_reproduced_exactly(
        coeffs in prop::collection::vec(-1.0f64..1.0, coefficient_count(DIM, 4)),
        p in point(),
        h in prop::collection::vec(-0.5f64..0.5, DIM),
    ) {
        // build the polynomial sum c_k x^k as an expression
        let layout = cqr_core::jets::layout(DIM);
        let mut poly = Expression::Constant(0.0);
        for (k, &c) in coeffs.iter().enumerate() {
            let mut term = Expression::Constant(c);
            for (var, &e) in layout.exponent(k).iter().enumerate() {
                for _ in 0..e {
                    term = Expression::binary(BinaryOp::Mul, term, Expression::Coordinate(var));
                }
            }
            poly = Expression::binary(BinaryOp::Add, poly, term);
        }
        let j = poly.eval_jet(&p, &BTreeMap::new(), 4).unwrap();
        let shifted: Vec<f64> = p.iter().zip(&h).map(|(a, b)| a + b).collect();
        let taylor: f64 = j.coefficients().iter().enumerate().map(|(k, c)| {
            c * layout.exponent(k).iter().zip(&h).map(|(&e, x)| x.powi(e as i32)).product::<f64>()
        }).sum();
        prop_assert!((taylor - eval(&poly, &shifted)).abs() <= 1e-11);
    }

    #[test]
    fn permute_then_inverse_is_identity(data in prop::collection::vec(-1.0f64..1.0, 27), perm in Just(vec![0usize, 1, 2]).prop_shuffle()) {
        let v = [Variance::Lower, Variance::Upper, Variance::Lower];
        let t = Tensor::from_vec(DIM, &v, data);
        let mut inv = vec![0; 3];
        for (k, &q) in perm.iter().enumerate() {
            inv[q] = k;
        }
        prop_assert_eq!(t.permute(&perm).permute(&inv), t);
    }

    #[test]
    fn raise_then_lower_is_identity(off in prop::collection::vec(-0.3f64..0.3, 3), data in prop::collection::vec(-1.0f64..1.0, 9)) {
        let g = [[-1.0, off[0], off[1]], [off[0], 1.0, off[2]], [off[1], off[2], 2.0]];
        let jets = g.iter().map(|row| row.iter().map(|&x| Jet::constant(x, DIM, 0)).collect()).collect();
        let m = MetricAtPoint::from_jets(jets).unwrap();
        let t = Tensor::from_vec(DIM, &[Variance::Lower, Variance::Lower], data);
        let back = t.raise_lower(1, &m).unwrap().raise_lower(1, &m).unwrap();
        prop_assert!(back.sub(&t).max_abs() <= 1e-12);
        // contracting g with its inverse gives the identity
        let mut worst: f64 = 0.0;
        for_each_index(DIM, 2, |ij| {
            let s: f64 = (0..DIM).map(|k| m.g.get(&[ij[0], k]) * m.g_inv.get(&[k, ij[1]])).sum();
            worst = worst.max((s - if ij[0] == ij[1] { 1.0 } else { 0.0 }).abs());
        });
        prop_assert!(worst <= 1e-12);
    }
}
