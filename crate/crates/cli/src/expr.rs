//! Small expression trees so configs can define coefficient functions inline.
//!
//! A JSON number is a constant, a string is a variable, and a single-key
//! object is an operation, e.g. `{"mul": [0.5, {"cos": "y"}]}`. Scalar
//! coefficients see the variable `x`; drivers see `t`, `x`, `y`, `z`.

use std::sync::Arc;

use gldp_core::coeffs::{DriverFn, ScalarFn};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expr {
    Const(f64),
    Var(String),
    Node(Node),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i32),
    Tanh(Box<Expr>),
    Cos(Box<Expr>),
    Sin(Box<Expr>),
    Atan(Box<Expr>),
    Exp(Box<Expr>),
    Abs(Box<Expr>),
}

/// Variable names resolved to slot indices so evaluation never compares
/// strings in the hot loop.
enum Compiled {
    Const(f64),
    Var(usize),
    Add(Vec<Compiled>),
    Mul(Vec<Compiled>),
    Sub(Box<Compiled>, Box<Compiled>),
    Div(Box<Compiled>, Box<Compiled>),
    Neg(Box<Compiled>),
    Pow(Box<Compiled>, i32),
    Unary(fn(f64) -> f64, Box<Compiled>),
}

impl Compiled {
    fn eval(&self, env: &[f64]) -> f64 {
        match self {
            Compiled::Const(c) => *c,
            Compiled::Var(i) => env[*i],
            Compiled::Add(xs) => xs.iter().map(|e| e.eval(env)).sum(),
            Compiled::Mul(xs) => xs.iter().map(|e| e.eval(env)).product(),
            Compiled::Sub(a, b) => a.eval(env) - b.eval(env),
            Compiled::Div(a, b) => a.eval(env) / b.eval(env),
            Compiled::Neg(a) => -a.eval(env),
            Compiled::Pow(a, k) => a.eval(env).powi(*k),
            Compiled::Unary(f, a) => f(a.eval(env)),
        }
    }
}

fn compile(expr: &Expr, vars: &[&str]) -> Result<Compiled, String> {
    let sub = |e: &Expr| compile(e, vars);
    Ok(match expr {
        Expr::Const(c) => {
            if !c.is_finite() {
                return Err("expression constants must be finite".to_string());
            }
            Compiled::Const(*c)
        }
        Expr::Var(name) => match vars.iter().position(|v| v == name) {
            Some(i) => Compiled::Var(i),
            None => {
                return Err(format!(
                    "unknown variable {name:?}; this slot allows {vars:?}"
                ))
            }
        },
        Expr::Node(node) => match node {
            Node::Add(xs) => Compiled::Add(xs.iter().map(sub).collect::<Result<_, _>>()?),
            Node::Mul(xs) => Compiled::Mul(xs.iter().map(sub).collect::<Result<_, _>>()?),
            Node::Sub(a, b) => Compiled::Sub(Box::new(sub(a)?), Box::new(sub(b)?)),
            Node::Div(a, b) => Compiled::Div(Box::new(sub(a)?), Box::new(sub(b)?)),
            Node::Neg(a) => Compiled::Neg(Box::new(sub(a)?)),
            Node::Pow(a, k) => Compiled::Pow(Box::new(sub(a)?), *k),
            Node::Tanh(a) => Compiled::Unary(f64::tanh, Box::new(sub(a)?)),
            Node::Cos(a) => Compiled::Unary(f64::cos, Box::new(sub(a)?)),
            Node::Sin(a) => Compiled::Unary(f64::sin, Box::new(sub(a)?)),
            Node::Atan(a) => Compiled::Unary(f64::atan, Box::new(sub(a)?)),
            Node::Exp(a) => Compiled::Unary(f64::exp, Box::new(sub(a)?)),
            Node::Abs(a) => Compiled::Unary(f64::abs, Box::new(sub(a)?)),
        },
    })
}

/// Compiles a one-variable coefficient expression over `x`.
pub fn scalar_fn(expr: &Expr) -> Result<ScalarFn, String> {
    let c = compile(expr, &["x"])?;
    Ok(Arc::new(move |x| c.eval(&[x])))
}

/// Compiles a driver expression over `(t, x, y, z)`.
pub fn driver_fn(expr: &Expr) -> Result<DriverFn, String> {
    let c = compile(expr, &["t", "x", "y", "z"])?;
    Ok(Arc::new(move |t, x, y, z| c.eval(&[t, x, y, z])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> Expr {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn numbers_strings_and_nodes_round_trip() {
        let e = parse(r#"{"add": [1.0, {"mul": [2.0, "x"]}]}"#);
        let f = scalar_fn(&e).unwrap();
        assert_eq!(f(3.0), 7.0);
        let back = serde_json::to_string(&e).unwrap();
        assert_eq!(parse(&back), e);
    }

    #[test]
    fn driver_sees_all_four_slots() {
        let e = parse(r#"{"add": ["t", {"neg": "y"}, {"sin": "x"}, {"mul": [0.0, "z"]}]}"#);
        let f = driver_fn(&e).unwrap();
        assert_eq!(f(0.25, 0.0, 1.5, 9.0), 0.25 - 1.5);
    }

    #[test]
    fn unknown_variables_are_named_in_the_error() {
        let e = parse(r#"{"cos": "y"}"#);
        let err = match scalar_fn(&e) {
            Err(m) => m,
            Ok(_) => panic!("expected a compile error"),
        };
        assert!(err.contains("\"y\""), "{err}");
    }

    #[test]
    fn composite_shapes_match_direct_evaluation() {
        let e = parse(r#"{"add": [1.0, {"mul": [0.5, {"pow": [{"cos": "x"}, 2]}]}]}"#);
        let f = scalar_fn(&e).unwrap();
        for i in 0..50 {
            let x = -2.0 + 0.08 * i as f64;
            assert!((f(x) - (1.0 + 0.5 * x.cos() * x.cos())).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_constants_are_rejected() {
        let e = Expr::Const(f64::NAN);
        assert!(scalar_fn(&e).is_err());
    }
}
