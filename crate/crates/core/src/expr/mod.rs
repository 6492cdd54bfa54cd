//! Closed-form expressions of a single time variable `t`.
//!
//! Coefficients, delays, and history functions are all given as expression
//! trees over the node set: constants, `t`, unary `-`, `sin`, `cos`, `exp`,
//! `log`, `sqrt`, `abs`, the four arithmetic operators, and `^` with a
//! constant exponent. The named constants `pi` and `e` fold to their values
//! at parse time, as does every all-constant subtree.

mod parser;

use std::fmt;

pub use parser::ParseError;

/// Position of a node in the source text, as a byte offset. Nodes produced
/// by [`Expr::differentiate`] inherit the offset of the node they came from.
pub type Offset = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum UnOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl UnOp {
    fn name(self) -> &'static str {
        match self {
            UnOp::Neg => "-",
            UnOp::Sin => "sin",
            UnOp::Cos => "cos",
            UnOp::Exp => "exp",
            UnOp::Log => "log",
            UnOp::Sqrt => "sqrt",
            UnOp::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Const(f64),
    Time,
    Un(UnOp, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// Base raised to a constant exponent.
    Pow(Box<Expr>, f64),
}

/// An immutable expression tree in the time variable `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub(crate) node: Node,
    pub(crate) offset: Offset,
}

/// Evaluation failure at a specific node.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{what} at byte {offset} (t = {t})")]
    Domain {
        offset: Offset,
        what: &'static str,
        t: f64,
    },
    #[error("non-finite result at byte {offset} (t = {t})")]
    NonFinite { offset: Offset, t: f64 },
}

/// Differentiation failure: `abs` has no derivative in this node set.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiffError {
    #[error("abs(...) at byte {offset} is not differentiable")]
    Abs { offset: Offset },
}

impl Expr {
    /// Parses `text` into an expression, folding constant subtrees.
    ///
    /// Errors carry the byte offset of the offending token.
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        parser::parse(text)
    }

    pub(crate) fn constant(v: f64, offset: Offset) -> Expr {
        Expr {
            node: Node::Const(v),
            offset,
        }
    }

    pub(crate) fn time(offset: Offset) -> Expr {
        Expr {
            node: Node::Time,
            offset,
        }
    }

    /// Builds a unary node, folding it to a constant when the operand is
    /// constant and the operation evaluates to a finite value.
    pub(crate) fn unary(op: UnOp, a: Expr, offset: Offset) -> Expr {
        if let Node::Const(v) = a.node {
            if let Ok(r) = apply_unary(op, v, offset, 0.0) {
                return Expr::constant(r, offset);
            }
        }
        if op == UnOp::Neg {
            // --u is u; keeps derivative trees from nesting negations.
            if let Node::Un(UnOp::Neg, inner) = a.node {
                return *inner;
            }
            return Expr {
                node: Node::Un(UnOp::Neg, Box::new(a)),
                offset,
            };
        }
        Expr {
            node: Node::Un(op, Box::new(a)),
            offset,
        }
    }

    /// Builds a binary node, folding constants and dropping arithmetic
    /// identities (`+0`, `*1`, `*0`, `/1`).
    pub(crate) fn binary(op: BinOp, a: Expr, b: Expr, offset: Offset) -> Expr {
        if let (Node::Const(x), Node::Const(y)) = (&a.node, &b.node) {
            if let Ok(r) = apply_binary(op, *x, *y, offset, 0.0) {
                return Expr::constant(r, offset);
            }
        }
        match op {
            BinOp::Add => {
                if a.is_const(0.0) {
                    return b;
                }
                if b.is_const(0.0) {
                    return a;
                }
            }
            BinOp::Sub => {
                if b.is_const(0.0) {
                    return a;
                }
                if a.is_const(0.0) {
                    return Expr::unary(UnOp::Neg, b, offset);
                }
            }
            BinOp::Mul => {
                if a.is_const(0.0) || b.is_const(0.0) {
                    return Expr::constant(0.0, offset);
                }
                if a.is_const(1.0) {
                    return b;
                }
                if b.is_const(1.0) {
                    return a;
                }
            }
            BinOp::Div => {
                if b.is_const(1.0) {
                    return a;
                }
            }
        }
        Expr {
            node: Node::Bin(op, Box::new(a), Box::new(b)),
            offset,
        }
    }

    /// Builds `base^k`, folding constant bases and trivial exponents.
    pub(crate) fn pow(base: Expr, k: f64, offset: Offset) -> Expr {
        if k == 0.0 {
            return Expr::constant(1.0, offset);
        }
        if k == 1.0 {
            return base;
        }
        if let Node::Const(v) = base.node {
            if let Ok(r) = apply_pow(v, k, offset, 0.0) {
                return Expr::constant(r, offset);
            }
        }
        Expr {
            node: Node::Pow(Box::new(base), k),
            offset,
        }
    }

    fn is_const(&self, v: f64) -> bool {
        matches!(self.node, Node::Const(c) if c == v)
    }

    /// Returns `Some(v)` when the tree is a single constant. Construction
    /// folds every constant subtree, so this is a syntactic check.
    pub fn as_constant(&self) -> Option<f64> {
        match self.node {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    /// Evaluates the expression at time `t`.
    ///
    /// Every intermediate value is checked: domain violations (logarithm of
    /// a non-positive value, division by zero, ...) and non-finite results
    /// are reported with the offending node's offset.
    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        match &self.node {
            Node::Const(v) => Ok(*v),
            Node::Time => Ok(t),
            Node::Un(op, a) => apply_unary(*op, a.eval(t)?, self.offset, t),
            Node::Bin(op, a, b) => apply_binary(*op, a.eval(t)?, b.eval(t)?, self.offset, t),
            Node::Pow(base, k) => apply_pow(base.eval(t)?, *k, self.offset, t),
        }
    }

    /// Symbolic derivative with respect to `t`.
    ///
    /// The result stays inside the same node set; `abs` is rejected.
    pub fn differentiate(&self) -> Result<Expr, DiffError> {
        let off = self.offset;
        Ok(match &self.node {
            Node::Const(_) => Expr::constant(0.0, off),
            Node::Time => Expr::constant(1.0, off),
            Node::Un(op, a) => {
                let da = a.differentiate()?;
                match op {
                    UnOp::Neg => Expr::unary(UnOp::Neg, da, off),
                    UnOp::Sin => {
                        let cos = Expr::unary(UnOp::Cos, (**a).clone(), off);
                        Expr::binary(BinOp::Mul, cos, da, off)
                    }
                    UnOp::Cos => {
                        let sin = Expr::unary(UnOp::Sin, (**a).clone(), off);
                        let msin = Expr::unary(UnOp::Neg, sin, off);
                        Expr::binary(BinOp::Mul, msin, da, off)
                    }
                    UnOp::Exp => {
                        let e = Expr::unary(UnOp::Exp, (**a).clone(), off);
                        Expr::binary(BinOp::Mul, e, da, off)
                    }
                    UnOp::Log => Expr::binary(BinOp::Div, da, (**a).clone(), off),
                    UnOp::Sqrt => {
                        let s = Expr::unary(UnOp::Sqrt, (**a).clone(), off);
                        let two_s = Expr::binary(BinOp::Mul, Expr::constant(2.0, off), s, off);
                        Expr::binary(BinOp::Div, da, two_s, off)
                    }
                    UnOp::Abs => return Err(DiffError::Abs { offset: off }),
                }
            }
            Node::Bin(op, a, b) => {
                let da = a.differentiate()?;
                let db = b.differentiate()?;
                match op {
                    BinOp::Add => Expr::binary(BinOp::Add, da, db, off),
                    BinOp::Sub => Expr::binary(BinOp::Sub, da, db, off),
                    BinOp::Mul => {
                        let l = Expr::binary(BinOp::Mul, da, (**b).clone(), off);
                        let r = Expr::binary(BinOp::Mul, (**a).clone(), db, off);
                        Expr::binary(BinOp::Add, l, r, off)
                    }
                    BinOp::Div => {
                        // (a/b)' = (a'b - ab') / b^2
                        let l = Expr::binary(BinOp::Mul, da, (**b).clone(), off);
                        let r = Expr::binary(BinOp::Mul, (**a).clone(), db, off);
                        let num = Expr::binary(BinOp::Sub, l, r, off);
                        let den = Expr::pow((**b).clone(), 2.0, off);
                        Expr::binary(BinOp::Div, num, den, off)
                    }
                }
            }
            Node::Pow(base, k) => {
                let db = base.differentiate()?;
                let p = Expr::pow((**base).clone(), k - 1.0, off);
                let kp = Expr::binary(BinOp::Mul, Expr::constant(*k, off), p, off);
                Expr::binary(BinOp::Mul, kp, db, off)
            }
        })
    }
}

fn apply_unary(op: UnOp, v: f64, offset: Offset, t: f64) -> Result<f64, EvalError> {
    let r = match op {
        UnOp::Neg => -v,
        UnOp::Sin => v.sin(),
        UnOp::Cos => v.cos(),
        UnOp::Exp => v.exp(),
        UnOp::Log => {
            if v <= 0.0 {
                return Err(EvalError::Domain {
                    offset,
                    what: "log of a non-positive value",
                    t,
                });
            }
            v.ln()
        }
        UnOp::Sqrt => {
            if v < 0.0 {
                return Err(EvalError::Domain {
                    offset,
                    what: "sqrt of a negative value",
                    t,
                });
            }
            v.sqrt()
        }
        UnOp::Abs => v.abs(),
    };
    finite(r, offset, t)
}

fn apply_binary(op: BinOp, x: f64, y: f64, offset: Offset, t: f64) -> Result<f64, EvalError> {
    let r = match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        BinOp::Div => {
            if y == 0.0 {
                return Err(EvalError::Domain {
                    offset,
                    what: "division by zero",
                    t,
                });
            }
            x / y
        }
    };
    finite(r, offset, t)
}

fn apply_pow(base: f64, k: f64, offset: Offset, t: f64) -> Result<f64, EvalError> {
    if base < 0.0 && k.fract() != 0.0 {
        return Err(EvalError::Domain {
            offset,
            what: "negative base with non-integer exponent",
            t,
        });
    }
    if base == 0.0 && k < 0.0 {
        return Err(EvalError::Domain {
            offset,
            what: "zero base with negative exponent",
            t,
        });
    }
    finite(base.powf(k), offset, t)
}

fn finite(r: f64, offset: Offset, t: f64) -> Result<f64, EvalError> {
    if r.is_finite() {
        Ok(r)
    } else {
        Err(EvalError::NonFinite { offset, t })
    }
}

impl fmt::Display for Expr {
    /// Prints a fully parenthesized form that re-parses to an expression
    /// with identical evaluation behavior.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Const(v) => write!(f, "{v}"),
            Node::Time => write!(f, "t"),
            Node::Un(UnOp::Neg, a) => write!(f, "(-{a})"),
            Node::Un(op, a) => write!(f, "{}({a})", op.name()),
            Node::Bin(op, a, b) => write!(f, "({a}{}{b})", op.symbol()),
            Node::Pow(base, k) => write!(f, "({base}^{k})"),
        }
    }
}
