use std::collections::BTreeMap;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::ast::{BinaryOp, Expr, UnaryOp};
use super::dual::Dual;
use super::{parse, ExprError};

/// Coordinate names (active variables, in chart order) plus named constants.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    pub coordinates: Vec<String>,
    pub parameters: BTreeMap<String, f64>,
}

impl Vocabulary {
    pub fn new(coordinates: Vec<String>, parameters: BTreeMap<String, f64>) -> Self {
        Vocabulary {
            coordinates,
            parameters,
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.coordinates
            .iter()
            .map(String::as_str)
            .chain(self.parameters.keys().map(String::as_str))
            .collect()
    }
}

#[derive(Debug, Clone)]
enum Node {
    Const(f64),
    Param(String, f64),
    Coord(usize),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

impl Node {
    fn bind(expr: &Expr, vocab: &Vocabulary) -> Result<Node, ExprError> {
        Ok(match expr {
            Expr::Const(c) => Node::Const(*c),
            Expr::Var(name) => {
                if let Some(i) = vocab.coordinates.iter().position(|c| c == name) {
                    Node::Coord(i)
                } else if let Some(v) = vocab.parameters.get(name) {
                    Node::Param(name.clone(), *v)
                } else {
                    return Err(ExprError::UnknownVariable {
                        name: name.clone(),
                        offset: 0,
                    });
                }
            }
            Expr::Unary(op, arg) => Node::Unary(*op, Box::new(Node::bind(arg, vocab)?)),
            Expr::Binary(op, lhs, rhs) => Node::Binary(
                *op,
                Box::new(Node::bind(lhs, vocab)?),
                Box::new(Node::bind(rhs, vocab)?),
            ),
        })
    }

    fn to_expr(&self, names: &[String]) -> Expr {
        match self {
            Node::Const(c) => Expr::Const(*c),
            Node::Param(name, _) => Expr::Var(name.clone()),
            Node::Coord(i) => Expr::Var(names[*i].clone()),
            Node::Unary(op, arg) => Expr::unary(*op, arg.to_expr(names)),
            Node::Binary(op, lhs, rhs) => Expr::binary(*op, lhs.to_expr(names), rhs.to_expr(names)),
        }
    }
}

/// Arithmetic shared by plain evaluation and dual-number evaluation.
trait Scalar:
    Sized
    + Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn value(&self) -> f64;
    fn varies(&self) -> bool;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    fn pow(self, exponent: Self) -> Self;
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn varies(&self) -> bool {
        false
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn pow(self, exponent: Self) -> Self {
        self.powf(exponent)
    }
}

impl Scalar for Dual {
    fn value(&self) -> f64 {
        self.value
    }
    fn varies(&self) -> bool {
        self.derivs.iter().any(|d| *d != 0.0)
    }
    fn exp(self) -> Self {
        Dual::exp(self)
    }
    fn ln(self) -> Self {
        Dual::ln(self)
    }
    fn sin(self) -> Self {
        Dual::sin(self)
    }
    fn cos(self) -> Self {
        Dual::cos(self)
    }
    fn sqrt(self) -> Self {
        Dual::sqrt(self)
    }
    fn tanh(self) -> Self {
        Dual::tanh(self)
    }
    fn pow(self, exponent: Self) -> Self {
        Dual::pow(self, exponent)
    }
}

/// Domain failure: which operation, and the offending node.
struct Failure<'a> {
    message: &'static str,
    node: &'a Node,
}

fn eval_node<'a, T: Scalar>(
    node: &'a Node,
    constant: &impl Fn(f64) -> T,
    coord: &impl Fn(usize) -> T,
) -> Result<T, Failure<'a>> {
    let out = match node {
        Node::Const(c) | Node::Param(_, c) => constant(*c),
        Node::Coord(i) => coord(*i),
        Node::Unary(op, arg) => {
            let a = eval_node(arg, constant, coord)?;
            let v = a.value();
            let fail = |message| Err(Failure { message, node });
            match op {
                UnaryOp::Neg => -a,
                UnaryOp::Exp => a.exp(),
                UnaryOp::Log if v <= 0.0 => return fail("logarithm of a non-positive value"),
                UnaryOp::Log => a.ln(),
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
                UnaryOp::Sqrt if v < 0.0 => return fail("square root of a negative value"),
                UnaryOp::Sqrt => a.sqrt(),
                UnaryOp::Tanh => a.tanh(),
            }
        }
        Node::Binary(op, lhs, rhs) => {
            let a = eval_node(lhs, constant, coord)?;
            let b = eval_node(rhs, constant, coord)?;
            let (va, vb) = (a.value(), b.value());
            let fail = |message| Err(Failure { message, node });
            match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div if vb == 0.0 => return fail("division by zero"),
                BinaryOp::Div => a / b,
                BinaryOp::Pow if va == 0.0 && vb < 0.0 => {
                    return fail("zero raised to a negative power")
                }
                BinaryOp::Pow if va < 0.0 && (vb.fract() != 0.0 || b.varies()) => {
                    return fail("negative base with a non-integer or varying exponent")
                }
                BinaryOp::Pow => a.pow(b),
            }
        }
    };
    if out.value().is_finite() {
        Ok(out)
    } else {
        Err(Failure {
            message: "non-finite result",
            node,
        })
    }
}

/// An expression bound to a coordinate layout: parameters are folded in as
/// constants and every coordinate is an active differentiation variable.
#[derive(Debug, Clone)]
pub struct BoundExpr {
    source: String,
    expr: Expr,
    root: Node,
    coordinates: Vec<String>,
}

impl BoundExpr {
    pub fn compile(src: &str, vocab: &Vocabulary) -> Result<Self, ExprError> {
        let names = vocab.names();
        let expr = parse(src, &names)?;
        Self::from_expr(expr, src, vocab)
    }

    pub fn from_expr(expr: Expr, src: &str, vocab: &Vocabulary) -> Result<Self, ExprError> {
        let root = Node::bind(&expr, vocab)?;
        Ok(BoundExpr {
            source: src.to_string(),
            expr,
            root,
            coordinates: vocab.coordinates.clone(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    /// Whether the coordinate with the given name occurs in the expression.
    pub fn references(&self, coordinate: &str) -> bool {
        self.expr.references(coordinate)
    }

    fn domain_error(&self, failure: Failure<'_>) -> ExprError {
        ExprError::Domain {
            message: failure.message.to_string(),
            subexpression: failure.node.to_expr(&self.coordinates).to_string(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), ExprError> {
        if x.len() == self.coordinates.len() {
            Ok(())
        } else {
            Err(ExprError::DimensionMismatch {
                expected: self.coordinates.len(),
                found: x.len(),
            })
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        self.check_dim(x)?;
        eval_node(&self.root, &|c| c, &|i| x[i]).map_err(|f| self.domain_error(f))
    }

    /// Value and gradient with respect to all coordinates.
    pub fn eval_dual(&self, x: &[f64]) -> Result<Dual, ExprError> {
        self.check_dim(x)?;
        let n = x.len();
        eval_node(
            &self.root,
            &|c| Dual::constant(c, n),
            &|i| Dual::variable(x[i], i, n),
        )
        .map_err(|f| self.domain_error(f))
    }
}

/// Evaluates `expr` at `point` and returns the gradient with respect to
/// every variable in `point` (zero for variables the expression ignores).
pub fn eval_with_grad(
    expr: &Expr,
    point: &BTreeMap<String, f64>,
) -> Result<(f64, BTreeMap<String, f64>), ExprError> {
    if let Some(missing) = expr.variables().into_iter().find(|v| !point.contains_key(*v)) {
        return Err(ExprError::UnknownVariable {
            name: missing.to_string(),
            offset: 0,
        });
    }
    let vocab = Vocabulary::new(point.keys().cloned().collect(), BTreeMap::new());
    let bound = BoundExpr::from_expr(expr.clone(), &expr.to_string(), &vocab)?;
    let values: Vec<f64> = point.values().copied().collect();
    let dual = bound.eval_dual(&values)?;
    let gradient = point.keys().cloned().zip(dual.derivs).collect();
    Ok((dual.value, gradient))
}
