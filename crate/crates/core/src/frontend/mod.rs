//! Mini-C frontend: lexing, parsing, canonical loop analysis and printing.

pub mod ast;
mod lexer;
mod parser;
pub mod printer;

use thiserror::Error;

use crate::affine::{AffineExpr, QExpr};
pub use ast::*;
pub use parser::{is_loop_pragma, pragma_body, BUILTIN_FUNCTIONS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrontendError {
    #[error("{loc}: syntax error: {message}")]
    Syntax { loc: Location, message: String },
    #[error("{loc}: non-canonical loop: {reason}")]
    NonCanonicalLoop { loc: Location, reason: String },
    #[error("{loc}: non-affine subscript of `{array}` in a transformed loop nest")]
    NonAffineAccess { loc: Location, array: String },
    #[error("{loc}: use of undeclared identifier `{name}`")]
    Undeclared { loc: Location, name: String },
    #[error("{loc}: `{name}` is declared twice")]
    Redeclared { loc: Location, name: String },
    #[error("{loc}: `{array}` has rank {expected} but is used with {found} subscripts")]
    RankMismatch { loc: Location, array: String, expected: usize, found: usize },
    #[error("{loc}: loop pragma is not followed by a for-loop")]
    MisplacedPragma { loc: Location },
}

impl FrontendError {
    pub fn location(&self) -> Location {
        match self {
            FrontendError::Syntax { loc, .. }
            | FrontendError::NonCanonicalLoop { loc, .. }
            | FrontendError::NonAffineAccess { loc, .. }
            | FrontendError::Undeclared { loc, .. }
            | FrontendError::Redeclared { loc, .. }
            | FrontendError::RankMismatch { loc, .. }
            | FrontendError::MisplacedPragma { loc } => *loc,
        }
    }
}

pub fn parse_source(text: &str) -> Result<Program, FrontendError> {
    parser::parse_program(text)
}

/// A loop in generator form: the counter starts at `first` and advances by
/// `step`; it runs while `counter < limit` (step > 0) or `counter >= limit` (step < 0).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopRange {
    pub first: QExpr,
    pub limit: QExpr,
    pub step: i64,
}

impl LoopRange {
    /// Number of iterations, clamped at zero.
    pub fn count(&self) -> Result<QExpr, crate::affine::ArithError> {
        let span = if self.step > 0 {
            self.limit.sub(&self.first)?
        } else {
            self.first.sub(&self.limit)?.add_const(1)?
        };
        QExpr::max(vec![QExpr::from(0), span.ceildiv(self.step.abs())?])
    }

    /// Smallest value taken by the counter when the range is non-empty.
    pub fn lower(&self) -> Result<QExpr, crate::affine::ArithError> {
        if self.step > 0 {
            return Ok(self.first.clone());
        }
        let s = self.step.abs();
        let k = self.first.sub(&self.limit)?.floordiv(s)?;
        self.first.sub(&k.scale(s)?)
    }
}

/// Converts an expression to an affine form over the variables accepted by `is_var`.
pub fn expr_to_affine(e: &Expr, is_var: &dyn Fn(&str) -> bool) -> Option<AffineExpr> {
    match e {
        Expr::Int(v) => Some(AffineExpr::constant(*v)),
        Expr::Var(v) if is_var(v) => Some(AffineExpr::var(v.clone())),
        Expr::Unary(UnOp::Neg, x) => expr_to_affine(x, is_var)?.neg().ok(),
        Expr::Binary(BinOp::Add, l, r) => {
            expr_to_affine(l, is_var)?.add(&expr_to_affine(r, is_var)?).ok()
        }
        Expr::Binary(BinOp::Sub, l, r) => {
            expr_to_affine(l, is_var)?.sub(&expr_to_affine(r, is_var)?).ok()
        }
        Expr::Binary(BinOp::Mul, l, r) => {
            let a = expr_to_affine(l, is_var)?;
            let b = expr_to_affine(r, is_var)?;
            match (a.as_constant(), b.as_constant()) {
                (Some(k), _) => b.scale(k).ok(),
                (_, Some(k)) => a.scale(k).ok(),
                _ => None,
            }
        }
        _ => None,
    }
}

/// Converts an expression built from affine parts, `min`, `max` and `floord`
/// (positive constant divisor) to a quasi-affine form.
pub fn expr_to_qexpr(e: &Expr, is_var: &dyn Fn(&str) -> bool) -> Option<QExpr> {
    if let Some(a) = expr_to_affine(e, is_var) {
        return Some(QExpr::Aff(a));
    }
    match e {
        Expr::Unary(UnOp::Neg, x) => expr_to_qexpr(x, is_var)?.scale(-1).ok(),
        Expr::Binary(BinOp::Add, l, r) => {
            expr_to_qexpr(l, is_var)?.add(&expr_to_qexpr(r, is_var)?).ok()
        }
        Expr::Binary(BinOp::Sub, l, r) => {
            expr_to_qexpr(l, is_var)?.sub(&expr_to_qexpr(r, is_var)?).ok()
        }
        Expr::Binary(BinOp::Mul, l, r) => {
            if let Some(k) = expr_to_affine(l, &|_| false).and_then(|a| a.as_constant()) {
                return expr_to_qexpr(r, is_var)?.scale(k).ok();
            }
            let k = expr_to_affine(r, &|_| false)?.as_constant()?;
            expr_to_qexpr(l, is_var)?.scale(k).ok()
        }
        Expr::Call(name, args) if args.len() == 2 => match name.as_str() {
            "min" | "max" => {
                let a = expr_to_qexpr(&args[0], is_var)?;
                let b = expr_to_qexpr(&args[1], is_var)?;
                if name == "min" {
                    QExpr::min(vec![a, b]).ok()
                } else {
                    QExpr::max(vec![a, b]).ok()
                }
            }
            "floord" => {
                let d = expr_to_affine(&args[1], &|_| false)?.as_constant()?;
                if d <= 0 {
                    return None;
                }
                expr_to_qexpr(&args[0], is_var)?.floordiv(d).ok()
            }
            _ => None,
        },
        _ => None,
    }
}

/// Builds an expression for an affine form, ordering variables by `rank`.
pub fn affine_to_expr<K: Ord>(a: &AffineExpr, rank: &dyn Fn(&str) -> K) -> Expr {
    let mut acc: Option<Expr> = None;
    for (name, c) in a.ordered_terms(rank) {
        let mag = c.unsigned_abs() as i64;
        let term = if mag == 1 {
            Expr::var(name)
        } else {
            Expr::bin(BinOp::Mul, Expr::Int(mag), Expr::var(name))
        };
        acc = Some(match acc {
            None if c < 0 => Expr::Unary(UnOp::Neg, Box::new(term)),
            None => term,
            Some(e) if c < 0 => Expr::bin(BinOp::Sub, e, term),
            Some(e) => Expr::bin(BinOp::Add, e, term),
        });
    }
    let k = a.constant_part();
    match acc {
        None => Expr::Int(k),
        Some(e) if k > 0 => Expr::bin(BinOp::Add, e, Expr::Int(k)),
        Some(e) if k < 0 => Expr::bin(BinOp::Sub, e, Expr::Int(-k)),
        Some(e) => e,
    }
}

/// Builds an expression using the `min`, `max` and `floord` helpers.
pub fn qexpr_to_expr<K: Ord>(q: &QExpr, rank: &dyn Fn(&str) -> K) -> Expr {
    match q {
        QExpr::Aff(a) => affine_to_expr(a, rank),
        QExpr::Min(args) | QExpr::Max(args) => {
            let name = if matches!(q, QExpr::Min(_)) { "min" } else { "max" };
            let mut it = args.iter().rev();
            let mut acc = qexpr_to_expr(it.next().expect("non-empty"), rank);
            for a in it {
                acc = Expr::call(name, vec![qexpr_to_expr(a, rank), acc]);
            }
            acc
        }
        QExpr::FloorDiv(x, d) => Expr::call("floord", vec![qexpr_to_expr(x, rank), Expr::Int(*d)]),
        QExpr::Mul(k, x) => Expr::bin(BinOp::Mul, Expr::Int(*k), qexpr_to_expr(x, rank)),
        QExpr::Add(parts) => {
            let mut acc = qexpr_to_expr(&parts[0], rank);
            for p in &parts[1..] {
                match p {
                    QExpr::Aff(a) => {
                        for (name, c) in a.ordered_terms(rank) {
                            let mag = c.unsigned_abs() as i64;
                            let term = if mag == 1 {
                                Expr::var(name)
                            } else {
                                Expr::bin(BinOp::Mul, Expr::Int(mag), Expr::var(name))
                            };
                            let op = if c < 0 { BinOp::Sub } else { BinOp::Add };
                            acc = Expr::bin(op, acc, term);
                        }
                        let k = a.constant_part();
                        if k > 0 {
                            acc = Expr::bin(BinOp::Add, acc, Expr::Int(k));
                        } else if k < 0 {
                            acc = Expr::bin(BinOp::Sub, acc, Expr::Int(-k));
                        }
                    }
                    QExpr::Mul(k, x) if *k < 0 => {
                        let term = if *k == -1 {
                            qexpr_to_expr(x, rank)
                        } else {
                            Expr::bin(BinOp::Mul, Expr::Int(-k), qexpr_to_expr(x, rank))
                        };
                        acc = Expr::bin(BinOp::Sub, acc, term);
                    }
                    other => acc = Expr::bin(BinOp::Add, acc, qexpr_to_expr(other, rank)),
                }
            }
            acc
        }
    }
}

/// Splits a loop condition into bound constraints on the counter.
fn condition_bounds(cond: &Expr, counter: &str, out: &mut Vec<(BinOp, Expr)>) -> Result<(), String> {
    match cond {
        Expr::Binary(BinOp::And, l, r) => {
            condition_bounds(l, counter, out)?;
            condition_bounds(r, counter, out)
        }
        Expr::Binary(op @ (BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge), l, r) => {
            let is_counter = |e: &Expr| matches!(e, Expr::Var(v) if v == counter);
            if is_counter(l) && !r.mentions_var(counter) {
                out.push((*op, (**r).clone()));
                Ok(())
            } else if is_counter(r) && !l.mentions_var(counter) {
                let flipped = match op {
                    BinOp::Lt => BinOp::Gt,
                    BinOp::Le => BinOp::Ge,
                    BinOp::Gt => BinOp::Lt,
                    _ => BinOp::Le,
                };
                out.push((flipped, (**l).clone()));
                Ok(())
            } else {
                Err(format!("condition does not compare `{counter}` against a bound"))
            }
        }
        _ => Err(format!("condition does not compare `{counter}` against a bound")),
    }
}

/// Analyzes a for-loop into generator form; `is_var` accepts the symbols
/// bounds may mention (outer counters and scalar parameters).
pub fn loop_range(l: &Loop, is_var: &dyn Fn(&str) -> bool) -> Result<LoopRange, String> {
    let first = expr_to_qexpr(&l.init, is_var)
        .ok_or_else(|| format!("initial value of `{}` is not affine", l.counter))?;
    let mut bounds = Vec::new();
    condition_bounds(&l.cond, &l.counter, &mut bounds)?;
    let mut limits = Vec::new();
    for (op, e) in bounds {
        let b = expr_to_qexpr(&e, is_var)
            .ok_or_else(|| format!("bound of `{}` is not affine", l.counter))?;
        let up = matches!(op, BinOp::Lt | BinOp::Le);
        if up != (l.step > 0) {
            return Err(format!("condition direction does not match the step of `{}`", l.counter));
        }
        let b = match op {
            BinOp::Le | BinOp::Gt => b.add_const(1).map_err(|e| e.to_string())?,
            _ => b,
        };
        limits.push(b);
    }
    let limit = if l.step > 0 { QExpr::min(limits) } else { QExpr::max(limits) }
        .map_err(|e| e.to_string())?;
    Ok(LoopRange { first, limit, step: l.step })
}

/// Normalized range of a canonical loop: the smallest counter value and the
/// trip count, which is zero for empty ranges.
pub fn canonical_range(l: &Loop) -> Result<(QExpr, QExpr), FrontendError> {
    let range = loop_range(l, &|_| true)
        .map_err(|reason| FrontendError::NonCanonicalLoop { loc: l.loc, reason })?;
    let err = |e: crate::affine::ArithError| FrontendError::NonCanonicalLoop {
        loc: l.loc,
        reason: e.to_string(),
    };
    Ok((range.lower().map_err(err)?, range.count().map_err(err)?))
}
