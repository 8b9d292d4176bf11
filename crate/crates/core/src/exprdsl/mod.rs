//! Closed-form scalar expressions over chart coordinates and named parameters.
//!
//! Expressions are parsed once against a [`Scope`] (coordinate and parameter
//! names) and evaluated as [`Jet`]s, which gives exact partial derivatives at
//! a point. The printer emits a canonical, minimally parenthesized form that
//! parses back to the same tree.

mod metric;
mod parser;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::jets::{Jet, JetError};

pub use metric::{MetricFile, MetricSpec, SpecError};
pub use parser::{parse_expression, ParseError};

/// Names visible to the parser.
#[derive(Debug, Clone, Copy)]
pub struct Scope<'a> {
    pub coordinates: &'a [String],
    pub parameters: &'a [String],
}

impl<'a> Scope<'a> {
    pub fn new(coordinates: &'a [String], parameters: &'a [String]) -> Self {
        Scope {
            coordinates,
            parameters,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    pub fn from_name(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "sinh" => UnaryOp::Sinh,
            "cosh" => UnaryOp::Cosh,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Sinh => "sinh",
            UnaryOp::Cosh => "cosh",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => " + ",
            BinaryOp::Sub => " - ",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
            BinaryOp::Pow => 4,
        }
    }
}

/// Expression tree. `Pow` exponents never reference coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Constant(f64),
    Coordinate(usize),
    Parameter(String),
    Unary(UnaryOp, Box<Expression>),
    Binary(BinaryOp, Box<Expression>, Box<Expression>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Domain(#[from] JetError),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("coordinate index {index} outside a {dim}-dimensional point")]
    CoordinateOutOfRange { index: usize, dim: usize },
}

impl Expression {
    pub fn constant(value: f64) -> Self {
        Expression::Constant(value)
    }

    pub fn unary(op: UnaryOp, arg: Expression) -> Self {
        Expression::Unary(op, Box::new(arg))
    }

    pub fn binary(op: BinaryOp, lhs: Expression, rhs: Expression) -> Self {
        Expression::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Does any node reference a chart coordinate?
    pub fn depends_on_coordinates(&self) -> bool {
        match self {
            Expression::Coordinate(_) => true,
            Expression::Constant(_) | Expression::Parameter(_) => false,
            Expression::Unary(_, a) => a.depends_on_coordinates(),
            Expression::Binary(_, a, b) => {
                a.depends_on_coordinates() || b.depends_on_coordinates()
            }
        }
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_coordinate(&self) -> Option<usize> {
        match self {
            Expression::Coordinate(i) => Some(*i),
            Expression::Constant(_) | Expression::Parameter(_) => None,
            Expression::Unary(_, a) => a.max_coordinate(),
            Expression::Binary(_, a, b) => a.max_coordinate().max(b.max_coordinate()),
        }
    }

    /// Collects referenced parameter names.
    pub fn parameters(&self, out: &mut Vec<String>) {
        match self {
            Expression::Parameter(p) => {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
            Expression::Constant(_) | Expression::Coordinate(_) => {}
            Expression::Unary(_, a) => a.parameters(out),
            Expression::Binary(_, a, b) => {
                a.parameters(out);
                b.parameters(out);
            }
        }
    }

    /// Value at a point.
    pub fn eval(&self, point: &[f64], params: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
        Ok(self.eval_jet(point, params, 0)?.value())
    }

    /// Taylor jet of the expression at `point` through `order`.
    pub fn eval_jet(
        &self,
        point: &[f64],
        params: &BTreeMap<String, f64>,
        order: usize,
    ) -> Result<Jet, EvalError> {
        let dim = point.len();
        Ok(match self {
            Expression::Constant(c) => Jet::constant(*c, dim, order),
            Expression::Coordinate(i) => {
                let value = *point
                    .get(*i)
                    .ok_or(EvalError::CoordinateOutOfRange { index: *i, dim })?;
                Jet::variable(*i, value, dim, order)
            }
            Expression::Parameter(p) => Jet::constant(lookup(params, p)?, dim, order),
            Expression::Unary(op, arg) => {
                let a = arg.eval_jet(point, params, order)?;
                match op {
                    UnaryOp::Neg => -&a,
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Sinh => a.sinh(),
                    UnaryOp::Cosh => a.cosh(),
                    UnaryOp::Exp => a.exp()?,
                    UnaryOp::Log => a.ln()?,
                    UnaryOp::Sqrt => a.sqrt()?,
                }
            }
            Expression::Binary(BinaryOp::Pow, base, exponent) => {
                let e = exponent.eval_constant(params)?;
                base.eval_jet(point, params, order)?.powf(e)?
            }
            Expression::Binary(op, lhs, rhs) => {
                let a = lhs.eval_jet(point, params, order)?;
                let b = rhs.eval_jet(point, params, order)?;
                match op {
                    BinaryOp::Add => &a + &b,
                    BinaryOp::Sub => &a - &b,
                    BinaryOp::Mul => &a * &b,
                    BinaryOp::Div => a.div_jet(&b)?,
                    BinaryOp::Pow => unreachable!(),
                }
            }
        })
    }

    /// Evaluates a coordinate-free expression with plain floats.
    pub fn eval_constant(&self, params: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
        let domain = |msg: String| EvalError::Domain(JetError::Domain(msg));
        let v = match self {
            Expression::Constant(c) => *c,
            Expression::Coordinate(i) => {
                return Err(EvalError::CoordinateOutOfRange { index: *i, dim: 0 })
            }
            Expression::Parameter(p) => lookup(params, p)?,
            Expression::Unary(op, arg) => {
                let a = arg.eval_constant(params)?;
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Sinh => a.sinh(),
                    UnaryOp::Cosh => a.cosh(),
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Log if a > 0.0 => a.ln(),
                    UnaryOp::Log => return Err(domain(format!("log of non-positive value {a}"))),
                    UnaryOp::Sqrt if a >= 0.0 => a.sqrt(),
                    UnaryOp::Sqrt => return Err(domain(format!("sqrt of negative value {a}"))),
                }
            }
            Expression::Binary(op, lhs, rhs) => {
                let a = lhs.eval_constant(params)?;
                let b = rhs.eval_constant(params)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div if b != 0.0 => a / b,
                    BinaryOp::Div => return Err(domain("division by zero".into())),
                    BinaryOp::Pow => a.powf(b),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(domain("non-finite constant".into()))
        }
    }

    /// Canonical text using the given coordinate names.
    pub fn display<'a>(&'a self, coordinates: &'a [String]) -> ExpressionDisplay<'a> {
        ExpressionDisplay {
            expr: self,
            coordinates,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expression::Constant(c) if c.is_sign_negative() => 3,
            Expression::Constant(_) | Expression::Coordinate(_) | Expression::Parameter(_) => 5,
            Expression::Unary(UnaryOp::Neg, _) => 3,
            Expression::Unary(_, _) => 5,
            Expression::Binary(op, _, _) => op.precedence(),
        }
    }
}

fn lookup(params: &BTreeMap<String, f64>, name: &str) -> Result<f64, EvalError> {
    params
        .get(name)
        .copied()
        .ok_or_else(|| EvalError::UnknownParameter(name.to_string()))
}

pub struct ExpressionDisplay<'a> {
    expr: &'a Expression,
    coordinates: &'a [String],
}

impl ExpressionDisplay<'_> {
    fn child<'b>(&'b self, expr: &'b Expression) -> ExpressionDisplay<'b> {
        ExpressionDisplay {
            expr,
            coordinates: self.coordinates,
        }
    }

    fn write_wrapped(&self, f: &mut fmt::Formatter<'_>, expr: &Expression, wrap: bool) -> fmt::Result {
        if wrap {
            write!(f, "({})", self.child(expr))
        } else {
            write!(f, "{}", self.child(expr))
        }
    }
}

pub(crate) fn format_number(c: f64) -> String {
    if c.fract() == 0.0 && c.abs() < 1e15 {
        format!("{}", c)
    } else {
        format!("{:?}", c)
    }
}

impl fmt::Display for ExpressionDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr {
            Expression::Constant(c) => write!(f, "{}", format_number(*c)),
            Expression::Coordinate(i) => match self.coordinates.get(*i) {
                Some(name) => write!(f, "{name}"),
                None => write!(f, "x{i}"),
            },
            Expression::Parameter(p) => write!(f, "{p}"),
            Expression::Unary(UnaryOp::Neg, a) => {
                write!(f, "-")?;
                self.write_wrapped(f, a, a.precedence() < 3)
            }
            Expression::Unary(op, a) => write!(f, "{}({})", op.name(), self.child(a)),
            Expression::Binary(op, a, b) => {
                let p = op.precedence();
                if *op == BinaryOp::Pow {
                    // right-associative; the exponent may be a negation
                    self.write_wrapped(f, a, a.precedence() <= p)?;
                    write!(f, "^")?;
                    self.write_wrapped(f, b, b.precedence() < 3)
                } else {
                    self.write_wrapped(f, a, a.precedence() < p)?;
                    write!(f, "{}", op.symbol())?;
                    self.write_wrapped(f, b, b.precedence() <= p)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn polynomial_jet() {
        let coords = names(&["x"]);
        let e = parse_expression("x^2", &Scope::new(&coords, &[])).unwrap();
        let j = e.eval_jet(&[3.0], &BTreeMap::new(), 2).unwrap();
        assert_eq!(j.value(), 9.0);
        assert_eq!(j.partial(&[1]), 6.0);
        assert_eq!(j.partial(&[2]), 2.0);
    }

    #[test]
    fn sine_jet() {
        let coords = names(&["x"]);
        let e = parse_expression("sin(x)", &Scope::new(&coords, &[])).unwrap();
        let j = e.eval_jet(&[0.0], &BTreeMap::new(), 3).unwrap();
        let d: Vec<f64> = (0..4).map(|k| j.partial(&[k])).collect();
        assert_eq!(d, vec![0.0, 1.0, 0.0, -1.0]);
    }

    #[test]
    fn parameters_resolve_at_evaluation() {
        let coords = names(&["t"]);
        let params = names(&["q"]);
        let e = parse_expression("t^(2*q)", &Scope::new(&coords, &params)).unwrap();
        let mut values = BTreeMap::new();
        assert!(matches!(
            e.eval(&[2.0], &values),
            Err(EvalError::UnknownParameter(_))
        ));
        values.insert("q".to_string(), 1.5);
        assert!((e.eval(&[2.0], &values).unwrap() - 8.0).abs() < 1e-14);
    }

    #[test]
    fn domain_error_on_log_of_negative() {
        let coords = names(&["x"]);
        let e = parse_expression("log(x)", &Scope::new(&coords, &[])).unwrap();
        assert!(matches!(
            e.eval_jet(&[-1.0], &BTreeMap::new(), 1),
            Err(EvalError::Domain(_))
        ));
        let e = parse_expression("1/(x - 2)", &Scope::new(&coords, &[])).unwrap();
        assert!(e.eval_jet(&[2.0], &BTreeMap::new(), 1).is_err());
    }

    #[test]
    fn printer_parenthesizes_minimally() {
        let coords = names(&["u", "x", "y"]);
        let scope = Scope::new(&coords, &[]);
        for (src, canon) in [
            ("exp(4*u)*(x^2 - y^2)", "exp(4*u)*(x^2 - y^2)"),
            ("(x)", "x"),
            ("-x^2", "-x^2"),
            ("(-x)^2", "(-x)^2"),
            ("x^-2", "x^-2"),
            ("x^2^3", "x^2^3"),
            ("(x^2)^3", "(x^2)^3"),
            ("x - (y - u)", "x - (y - u)"),
            ("(x - y) - u", "x - y - u"),
            ("x/(y*u)", "x/(y*u)"),
            ("-(x + y)", "-(x + y)"),
            ("1.5e-3*x", "0.0015*x"),
        ] {
            let e = parse_expression(src, &scope).unwrap();
            assert_eq!(e.display(&coords).to_string(), canon, "{src}");
        }
    }
}
