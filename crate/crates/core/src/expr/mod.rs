//! Scalar expressions for embeddings, conformal factors and normal speeds.
//!
//! Expressions are parsed once into an immutable [`ExprAst`] over a fixed list
//! of declared variables and evaluated with second-order forward-mode jets, so
//! every evaluation yields the value, the gradient and the (symmetric) Hessian
//! with respect to the declared variables at machine precision.

mod jet;
mod parse;

pub use jet::{JetValue, MAX_VARS};
pub use parse::parse_expr;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` at byte {offset} takes {expected} argument(s), found {found}")]
    Arity {
        name: String,
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("too many variables declared ({0}); at most {MAX_VARS} are supported")]
    TooManyVariables(usize),
    #[error("variable name `{0}` is reserved or declared twice")]
    BadVariable(String),
    #[error("no value supplied for variable `{0}`")]
    MissingVariable(String),
    #[error("expected {expected} variable values, got {found}")]
    PointArity { expected: usize, found: usize },
    #[error("domain error in `{node}`: {message}")]
    Domain { node: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub(crate) fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

/// Expression tree node. Variables are stored as indices into the declared
/// variable list of the owning [`ExprAst`].
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn fmt_with(&self, vars: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(i) => write!(f, "{}", vars[*i]),
            Node::Neg(a) => {
                write!(f, "(-")?;
                a.fmt_with(vars, f)?;
                write!(f, ")")
            }
            Node::Binary(op, a, b) => {
                write!(f, "(")?;
                a.fmt_with(vars, f)?;
                write!(f, " {} ", op.symbol())?;
                b.fmt_with(vars, f)?;
                write!(f, ")")
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_with(vars, f)?;
                write!(f, ")")
            }
        }
    }

    fn render(&self, vars: &[String]) -> String {
        struct Show<'a>(&'a Node, &'a [String]);
        impl fmt::Display for Show<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt_with(self.1, f)
            }
        }
        Show(self, vars).to_string()
    }
}

/// A parsed expression together with its declared variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    root: Node,
    vars: Vec<String>,
    source: String,
}

impl ExprAst {
    pub(crate) fn new(root: Node, vars: Vec<String>, source: String) -> Self {
        Self { root, vars, source }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    /// The text the expression was parsed from.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// Evaluate value, gradient and Hessian at `values`, given in the order
    /// of the declared variables.
    pub fn eval_jet(&self, values: &[f64]) -> Result<JetValue, ExprError> {
        if values.len() != self.vars.len() {
            return Err(ExprError::PointArity {
                expected: self.vars.len(),
                found: values.len(),
            });
        }
        self.eval_node(&self.root, values)
    }

    /// Same as [`ExprAst::eval_jet`] with the point given by name.
    pub fn eval_jet_named(&self, point: &HashMap<String, f64>) -> Result<JetValue, ExprError> {
        let values = self
            .vars
            .iter()
            .map(|name| {
                point
                    .get(name)
                    .copied()
                    .ok_or_else(|| ExprError::MissingVariable(name.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.eval_jet(&values)
    }

    /// Plain value, still checked for domain errors.
    pub fn eval(&self, values: &[f64]) -> Result<f64, ExprError> {
        Ok(self.eval_jet(values)?.value())
    }

    fn eval_node(&self, node: &Node, values: &[f64]) -> Result<JetValue, ExprError> {
        let nvars = self.vars.len();
        let out = match node {
            Node::Const(c) => JetValue::constant(nvars, *c),
            Node::Var(i) => JetValue::variable(nvars, *i, values[*i]),
            Node::Neg(a) => self.eval_node(a, values)?.scale(-1.0),
            Node::Binary(op, a, b) => {
                let x = self.eval_node(a, values)?;
                let y = self.eval_node(b, values)?;
                match op {
                    BinOp::Add => x.add(&y),
                    BinOp::Sub => x.add(&y.scale(-1.0)),
                    BinOp::Mul => x.mul(&y),
                    BinOp::Div => {
                        if y.value() == 0.0 {
                            return Err(self.domain(node, "division by zero"));
                        }
                        x.mul(&y.recip())
                    }
                    BinOp::Pow => self.pow(node, &x, &y)?,
                }
            }
            Node::Call(func, a) => {
                let x = self.eval_node(a, values)?;
                self.call(node, *func, &x)?
            }
        };
        if !out.is_finite() {
            return Err(self.domain(node, "non-finite result"));
        }
        Ok(out)
    }

    fn pow(&self, node: &Node, base: &JetValue, exponent: &JetValue) -> Result<JetValue, ExprError> {
        let b = base.value();
        if exponent.is_constant() {
            let p = exponent.value();
            let integral = p.fract() == 0.0 && p.abs() < 1.0e9;
            if b < 0.0 && !integral {
                return Err(self.domain(node, "negative base with non-integer exponent"));
            }
            if b == 0.0 && (p < 0.0 || (!integral && p < 2.0)) {
                return Err(self.domain(node, "power not differentiable at zero base"));
            }
            let (f0, f1, f2) = if integral {
                let k = p as i32;
                let d1 = if k == 0 { 0.0 } else { p * b.powi(k - 1) };
                let d2 = if k == 0 || k == 1 {
                    0.0
                } else {
                    p * (p - 1.0) * b.powi(k - 2)
                };
                (b.powi(k), d1, d2)
            } else {
                (b.powf(p), p * b.powf(p - 1.0), p * (p - 1.0) * b.powf(p - 2.0))
            };
            return Ok(base.compose(f0, f1, f2));
        }
        if b <= 0.0 {
            return Err(self.domain(node, "variable exponent requires a positive base"));
        }
        let log_base = base.compose(b.ln(), 1.0 / b, -1.0 / (b * b));
        let arg = exponent.mul(&log_base);
        let e = arg.value().exp();
        Ok(arg.compose(e, e, e))
    }

    fn call(&self, node: &Node, func: Func, x: &JetValue) -> Result<JetValue, ExprError> {
        let a = x.value();
        let (f0, f1, f2) = match func {
            Func::Sin => (a.sin(), a.cos(), -a.sin()),
            Func::Cos => (a.cos(), -a.sin(), -a.cos()),
            Func::Sinh => (a.sinh(), a.cosh(), a.sinh()),
            Func::Cosh => (a.cosh(), a.sinh(), a.cosh()),
            Func::Tanh => {
                let t = a.tanh();
                let s = 1.0 - t * t;
                (t, s, -2.0 * t * s)
            }
            Func::Exp => {
                let e = a.exp();
                (e, e, e)
            }
            Func::Log => {
                if a <= 0.0 {
                    return Err(self.domain(node, &format!("logarithm of non-positive value {a}")));
                }
                (a.ln(), 1.0 / a, -1.0 / (a * a))
            }
            Func::Sqrt => {
                if a <= 0.0 {
                    return Err(self.domain(node, &format!("square root of non-positive value {a}")));
                }
                let s = a.sqrt();
                (s, 0.5 / s, -0.25 / (s * a))
            }
            Func::Abs => (a.abs(), if a < 0.0 { -1.0 } else { 1.0 }, 0.0),
        };
        Ok(x.compose(f0, f1, f2))
    }

    fn domain(&self, node: &Node, message: &str) -> ExprError {
        ExprError::Domain {
            node: node.render(&self.vars),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt_with(&self.vars, f)
    }
}
