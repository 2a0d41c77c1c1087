//! Exact integer affine and quasi-affine expressions.
//!
//! [`AffineExpr`] is a constant plus integer multiples of named variables
//! (loop counters and parameters). [`QExpr`] extends it with `min`, `max`
//! and floor division by positive constants, which is the vocabulary
//! needed for loop bounds after strip-mining, unrolling and packing.
//!
//! All arithmetic is checked; overflow surfaces as [`ArithError::Overflow`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArithError {
    #[error("integer overflow in affine arithmetic")]
    Overflow,
    #[error("division by zero")]
    DivisionByZero,
    #[error("unbound identifier `{0}`")]
    Unbound(String),
}

pub type ArithResult<T> = Result<T, ArithError>;

fn ck(v: Option<i64>) -> ArithResult<i64> {
    v.ok_or(ArithError::Overflow)
}

/// Floor division, correct for negative numerators and denominators.
pub fn floor_div(a: i64, b: i64) -> ArithResult<i64> {
    if b == 0 {
        return Err(ArithError::DivisionByZero);
    }
    let q = ck(a.checked_div(b))?;
    let r = ck(a.checked_rem(b))?;
    if r != 0 && ((r < 0) != (b < 0)) {
        ck(q.checked_sub(1))
    } else {
        Ok(q)
    }
}

/// Ceiling division.
pub fn ceil_div(a: i64, b: i64) -> ArithResult<i64> {
    let q = floor_div(a, b)?;
    if ck(q.checked_mul(b))? == a {
        Ok(q)
    } else {
        ck(q.checked_add(1))
    }
}

/// `constant + sum(coeff * var)`; zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct AffineExpr {
    constant: i64,
    coeffs: BTreeMap<String, i64>,
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: i64) -> Self {
        AffineExpr { constant: c, coeffs: BTreeMap::new() }
    }

    pub fn var(name: impl Into<String>) -> Self {
        Self::term(name, 1)
    }

    pub fn term(name: impl Into<String>, coeff: i64) -> Self {
        let mut coeffs = BTreeMap::new();
        if coeff != 0 {
            coeffs.insert(name.into(), coeff);
        }
        AffineExpr { constant: 0, coeffs }
    }

    pub fn constant_part(&self) -> i64 {
        self.constant
    }

    pub fn as_constant(&self) -> Option<i64> {
        self.coeffs.is_empty().then_some(self.constant)
    }

    pub fn coeff(&self, name: &str) -> i64 {
        self.coeffs.get(name).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, i64)> {
        self.coeffs.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.coeffs.keys().map(String::as_str)
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.coeffs.contains_key(name)
    }

    /// If the expression is exactly `var + c`, returns `(var, c)`.
    pub fn as_var_plus_const(&self) -> Option<(&str, i64)> {
        if self.coeffs.len() != 1 {
            return None;
        }
        let (name, coeff) = self.coeffs.iter().next()?;
        (*coeff == 1).then_some((name.as_str(), self.constant))
    }

    pub fn add(&self, other: &AffineExpr) -> ArithResult<AffineExpr> {
        let mut out = self.clone();
        out.constant = ck(out.constant.checked_add(other.constant))?;
        for (name, c) in &other.coeffs {
            let e = out.coeffs.entry(name.clone()).or_insert(0);
            *e = ck(e.checked_add(*c))?;
            if *e == 0 {
                out.coeffs.remove(name);
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &AffineExpr) -> ArithResult<AffineExpr> {
        self.add(&other.neg()?)
    }

    pub fn neg(&self) -> ArithResult<AffineExpr> {
        self.scale(-1)
    }

    pub fn add_const(&self, c: i64) -> ArithResult<AffineExpr> {
        let mut out = self.clone();
        out.constant = ck(out.constant.checked_add(c))?;
        Ok(out)
    }

    pub fn scale(&self, k: i64) -> ArithResult<AffineExpr> {
        if k == 0 {
            return Ok(AffineExpr::zero());
        }
        let mut out = AffineExpr::constant(ck(self.constant.checked_mul(k))?);
        for (name, c) in &self.coeffs {
            out.coeffs.insert(name.clone(), ck(c.checked_mul(k))?);
        }
        Ok(out)
    }

    /// Exact division when every coefficient and the constant are multiples of `d`.
    pub fn div_exact(&self, d: i64) -> Option<AffineExpr> {
        if d == 0 || self.constant % d != 0 || self.coeffs.values().any(|c| c % d != 0) {
            return None;
        }
        let mut out = AffineExpr::constant(self.constant / d);
        for (name, c) in &self.coeffs {
            out.coeffs.insert(name.clone(), c / d);
        }
        Some(out)
    }

    /// Replaces `name` by `repl`.
    pub fn substitute(&self, name: &str, repl: &AffineExpr) -> ArithResult<AffineExpr> {
        let c = self.coeff(name);
        if c == 0 {
            return Ok(self.clone());
        }
        let mut rest = self.clone();
        rest.coeffs.remove(name);
        rest.add(&repl.scale(c)?)
    }

    pub fn substitute_all(&self, map: &BTreeMap<String, AffineExpr>) -> ArithResult<AffineExpr> {
        let mut out = AffineExpr::constant(self.constant);
        for (name, c) in &self.coeffs {
            let piece = match map.get(name) {
                Some(repl) => repl.scale(*c)?,
                None => AffineExpr::term(name.clone(), *c),
            };
            out = out.add(&piece)?;
        }
        Ok(out)
    }

    pub fn rename(&self, from: &str, to: &str) -> AffineExpr {
        if from == to || !self.mentions(from) {
            return self.clone();
        }
        // Renaming onto an existing name cannot overflow unless coefficients are
        // already near the limit, which the callers never construct.
        self.substitute(from, &AffineExpr::var(to))
            .expect("rename overflow")
    }

    pub fn eval(&self, env: &dyn Fn(&str) -> Option<i64>) -> ArithResult<i64> {
        let mut acc = self.constant;
        for (name, c) in &self.coeffs {
            let v = env(name).ok_or_else(|| ArithError::Unbound(name.clone()))?;
            acc = ck(acc.checked_add(ck(c.checked_mul(v))?))?;
        }
        Ok(acc)
    }

    /// Terms ordered for display: positive coefficients first, then negative,
    /// each group sorted by `rank`.
    pub fn ordered_terms<K: Ord>(&self, rank: impl Fn(&str) -> K) -> Vec<(&str, i64)> {
        let mut terms: Vec<(&str, i64)> = self.terms().collect();
        terms.sort_by(|a, b| (a.1 < 0).cmp(&(b.1 < 0)).then_with(|| rank(a.0).cmp(&rank(b.0))));
        terms
    }
}

impl From<i64> for AffineExpr {
    fn from(c: i64) -> Self {
        AffineExpr::constant(c)
    }
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.ordered_terms(|s| s.to_string());
        let mut first = true;
        for (name, c) in terms {
            let mag = c.unsigned_abs();
            if first {
                if c < 0 {
                    write!(f, "-")?;
                }
            } else if c < 0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if mag == 1 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{mag} * {name}")?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant < 0 {
            write!(f, " - {}", self.constant.unsigned_abs())
        } else if self.constant > 0 {
            write!(f, " + {}", self.constant)
        } else {
            Ok(())
        }
    }
}

/// Direction of change of an expression as one variable grows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotonicity {
    Constant,
    NonDecreasing,
    NonIncreasing,
    Mixed,
}

impl Monotonicity {
    fn flip(self) -> Self {
        match self {
            Monotonicity::NonDecreasing => Monotonicity::NonIncreasing,
            Monotonicity::NonIncreasing => Monotonicity::NonDecreasing,
            m => m,
        }
    }

    fn join(self, other: Self) -> Self {
        use Monotonicity::*;
        match (self, other) {
            (Constant, m) | (m, Constant) => m,
            (a, b) if a == b => a,
            _ => Mixed,
        }
    }
}

/// Quasi-affine expression: affine forms combined with `min`, `max`,
/// constant scaling, sums and floor division by a positive constant.
///
/// Values are always built through the smart constructors, which keep a
/// normal form: sums are flat and carry at most one affine part (last),
/// affine offsets are pushed into `min`/`max` arms, and constants fold.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QExpr {
    Aff(AffineExpr),
    Min(Vec<QExpr>),
    Max(Vec<QExpr>),
    /// Floor division by a positive constant.
    FloorDiv(Box<QExpr>, i64),
    /// Scaling of a non-affine expression by a constant other than 0 and 1.
    Mul(i64, Box<QExpr>),
    /// Flat sum of at least two parts; an affine part, if any, is last.
    Add(Vec<QExpr>),
}

impl From<AffineExpr> for QExpr {
    fn from(a: AffineExpr) -> Self {
        QExpr::Aff(a)
    }
}

impl From<i64> for QExpr {
    fn from(c: i64) -> Self {
        QExpr::Aff(AffineExpr::constant(c))
    }
}

impl QExpr {
    pub fn var(name: impl Into<String>) -> Self {
        QExpr::Aff(AffineExpr::var(name))
    }

    pub fn as_affine(&self) -> Option<&AffineExpr> {
        match self {
            QExpr::Aff(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_constant(&self) -> Option<i64> {
        self.as_affine().and_then(AffineExpr::as_constant)
    }

    /// Splits into a non-affine remainder and an affine part.
    fn split(&self) -> (Vec<QExpr>, AffineExpr) {
        match self {
            QExpr::Aff(a) => (Vec::new(), a.clone()),
            QExpr::Add(parts) => {
                let mut rest = parts.clone();
                match rest.last() {
                    Some(QExpr::Aff(a)) => {
                        let a = a.clone();
                        rest.pop();
                        (rest, a)
                    }
                    _ => (rest, AffineExpr::zero()),
                }
            }
            other => (vec![other.clone()], AffineExpr::zero()),
        }
    }

    pub fn add(&self, other: &QExpr) -> ArithResult<QExpr> {
        let (mut parts, aff_a) = self.split();
        let (parts_b, aff_b) = other.split();
        parts.extend(parts_b);
        let aff = aff_a.add(&aff_b)?;
        Self::assemble(parts, aff)
    }

    fn assemble(mut parts: Vec<QExpr>, aff: AffineExpr) -> ArithResult<QExpr> {
        match parts.len() {
            0 => Ok(QExpr::Aff(aff)),
            1 if aff == AffineExpr::zero() => Ok(parts.pop().unwrap()),
            1 => {
                let only = parts.pop().unwrap();
                match only {
                    QExpr::Min(args) => {
                        let args = args
                            .iter()
                            .map(|a| a.add(&QExpr::Aff(aff.clone())))
                            .collect::<ArithResult<Vec<_>>>()?;
                        QExpr::min(args)
                    }
                    QExpr::Max(args) => {
                        let args = args
                            .iter()
                            .map(|a| a.add(&QExpr::Aff(aff.clone())))
                            .collect::<ArithResult<Vec<_>>>()?;
                        QExpr::max(args)
                    }
                    other => Ok(QExpr::Add(vec![other, QExpr::Aff(aff)])),
                }
            }
            _ => {
                if aff != AffineExpr::zero() {
                    parts.push(QExpr::Aff(aff));
                }
                Ok(QExpr::Add(parts))
            }
        }
    }

    pub fn add_aff(&self, a: &AffineExpr) -> ArithResult<QExpr> {
        self.add(&QExpr::Aff(a.clone()))
    }

    pub fn add_const(&self, c: i64) -> ArithResult<QExpr> {
        self.add(&QExpr::from(c))
    }

    pub fn sub(&self, other: &QExpr) -> ArithResult<QExpr> {
        self.add(&other.scale(-1)?)
    }

    pub fn scale(&self, k: i64) -> ArithResult<QExpr> {
        match (k, self) {
            (0, _) => Ok(QExpr::from(0)),
            (1, _) => Ok(self.clone()),
            (_, QExpr::Aff(a)) => Ok(QExpr::Aff(a.scale(k)?)),
            (_, QExpr::Min(args)) | (_, QExpr::Max(args)) => {
                let scaled = args.iter().map(|a| a.scale(k)).collect::<ArithResult<Vec<_>>>()?;
                let is_min = matches!(self, QExpr::Min(_));
                if (k > 0) == is_min {
                    QExpr::min(scaled)
                } else {
                    QExpr::max(scaled)
                }
            }
            (_, QExpr::Mul(k2, inner)) => {
                let kk = ck(k.checked_mul(*k2))?;
                if kk == 1 {
                    Ok((**inner).clone())
                } else {
                    Ok(QExpr::Mul(kk, inner.clone()))
                }
            }
            (_, QExpr::Add(parts)) => {
                let mut acc = QExpr::from(0);
                for p in parts {
                    acc = acc.add(&p.scale(k)?)?;
                }
                Ok(acc)
            }
            (_, QExpr::FloorDiv(..)) => Ok(QExpr::Mul(k, Box::new(self.clone()))),
        }
    }

    pub fn min(args: Vec<QExpr>) -> ArithResult<QExpr> {
        Self::extremum(args, true)
    }

    pub fn max(args: Vec<QExpr>) -> ArithResult<QExpr> {
        Self::extremum(args, false)
    }

    fn extremum(args: Vec<QExpr>, is_min: bool) -> ArithResult<QExpr> {
        let mut flat: Vec<QExpr> = Vec::new();
        for a in args {
            match a {
                QExpr::Min(inner) if is_min => flat.extend(inner),
                QExpr::Max(inner) if !is_min => flat.extend(inner),
                other => flat.push(other),
            }
        }
        // Drop arms dominated by another affine arm that differs by a constant.
        let mut kept: Vec<QExpr> = Vec::new();
        'outer: for a in flat {
            if let QExpr::Aff(ea) = &a {
                for k in kept.iter_mut() {
                    if let QExpr::Aff(ek) = k {
                        if let Some(d) = ea.sub(ek)?.as_constant() {
                            let replace = if is_min { d < 0 } else { d > 0 };
                            if replace {
                                *k = a.clone();
                            }
                            continue 'outer;
                        }
                    }
                }
            } else if kept.contains(&a) {
                continue;
            }
            kept.push(a);
        }
        match kept.len() {
            0 => panic!("min/max of no arguments"),
            1 => Ok(kept.pop().unwrap()),
            _ => Ok(if is_min { QExpr::Min(kept) } else { QExpr::Max(kept) }),
        }
    }

    pub fn floordiv(&self, d: i64) -> ArithResult<QExpr> {
        if d <= 0 {
            return Err(ArithError::DivisionByZero);
        }
        if d == 1 {
            return Ok(self.clone());
        }
        match self {
            QExpr::Aff(a) => {
                if let Some(c) = a.as_constant() {
                    return Ok(QExpr::from(floor_div(c, d)?));
                }
                // floord(d*q + r, d) = q + floord(r, d) for the variable part divisible by d
                let mut var_part = a.clone();
                var_part = var_part.add_const(-a.constant_part())?;
                if let Some(q) = var_part.div_exact(d) {
                    return Ok(QExpr::Aff(q.add_const(floor_div(a.constant_part(), d)?)?));
                }
                Ok(QExpr::FloorDiv(Box::new(self.clone()), d))
            }
            QExpr::Min(args) => {
                QExpr::min(args.iter().map(|a| a.floordiv(d)).collect::<ArithResult<_>>()?)
            }
            QExpr::Max(args) => {
                QExpr::max(args.iter().map(|a| a.floordiv(d)).collect::<ArithResult<_>>()?)
            }
            QExpr::FloorDiv(inner, d2) => inner.floordiv(ck(d.checked_mul(*d2))?),
            _ => Ok(QExpr::FloorDiv(Box::new(self.clone()), d)),
        }
    }

    /// Ceiling division by a positive constant: `ceild(x, d) = -floord(-x, d)`.
    pub fn ceildiv(&self, d: i64) -> ArithResult<QExpr> {
        self.scale(-1)?.floordiv(d)?.scale(-1)
    }

    pub fn eval(&self, env: &dyn Fn(&str) -> Option<i64>) -> ArithResult<i64> {
        match self {
            QExpr::Aff(a) => a.eval(env),
            QExpr::Min(args) => {
                let mut best: Option<i64> = None;
                for a in args {
                    let v = a.eval(env)?;
                    best = Some(best.map_or(v, |b| b.min(v)));
                }
                Ok(best.expect("non-empty min"))
            }
            QExpr::Max(args) => {
                let mut best: Option<i64> = None;
                for a in args {
                    let v = a.eval(env)?;
                    best = Some(best.map_or(v, |b| b.max(v)));
                }
                Ok(best.expect("non-empty max"))
            }
            QExpr::FloorDiv(inner, d) => floor_div(inner.eval(env)?, *d),
            QExpr::Mul(k, inner) => ck(inner.eval(env)?.checked_mul(*k)),
            QExpr::Add(parts) => {
                let mut acc = 0i64;
                for p in parts {
                    acc = ck(acc.checked_add(p.eval(env)?))?;
                }
                Ok(acc)
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            QExpr::Aff(a) => out.extend(a.vars().map(str::to_string)),
            QExpr::Min(args) | QExpr::Max(args) | QExpr::Add(args) => {
                args.iter().for_each(|a| a.collect_vars(out))
            }
            QExpr::FloorDiv(inner, _) | QExpr::Mul(_, inner) => inner.collect_vars(out),
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        match self {
            QExpr::Aff(a) => a.mentions(name),
            QExpr::Min(args) | QExpr::Max(args) | QExpr::Add(args) => {
                args.iter().any(|a| a.mentions(name))
            }
            QExpr::FloorDiv(inner, _) | QExpr::Mul(_, inner) => inner.mentions(name),
        }
    }

    /// Replaces a variable by an arbitrary quasi-affine expression.
    pub fn substitute(&self, name: &str, repl: &QExpr) -> ArithResult<QExpr> {
        if !self.mentions(name) {
            return Ok(self.clone());
        }
        match self {
            QExpr::Aff(a) => {
                let c = a.coeff(name);
                let rest = a.substitute(name, &AffineExpr::zero())?;
                QExpr::Aff(rest).add(&repl.scale(c)?)
            }
            QExpr::Min(args) => {
                QExpr::min(args.iter().map(|a| a.substitute(name, repl)).collect::<ArithResult<_>>()?)
            }
            QExpr::Max(args) => {
                QExpr::max(args.iter().map(|a| a.substitute(name, repl)).collect::<ArithResult<_>>()?)
            }
            QExpr::FloorDiv(inner, d) => inner.substitute(name, repl)?.floordiv(*d),
            QExpr::Mul(k, inner) => inner.substitute(name, repl)?.scale(*k),
            QExpr::Add(parts) => {
                let mut acc = QExpr::from(0);
                for p in parts {
                    acc = acc.add(&p.substitute(name, repl)?)?;
                }
                Ok(acc)
            }
        }
    }

    pub fn substitute_aff(&self, name: &str, repl: &AffineExpr) -> ArithResult<QExpr> {
        self.substitute(name, &QExpr::Aff(repl.clone()))
    }

    pub fn substitute_all(&self, map: &BTreeMap<String, AffineExpr>) -> ArithResult<QExpr> {
        // Substitute through fresh placeholders so replacements mentioning
        // other keys are not substituted twice.
        let mut cur = self.clone();
        let keys: Vec<&String> = map.keys().filter(|k| self.mentions(k)).collect();
        for (idx, k) in keys.iter().enumerate() {
            cur = cur.substitute_aff(k, &AffineExpr::var(format!("\u{1}{idx}")))?;
        }
        for (idx, k) in keys.iter().enumerate() {
            cur = cur.substitute_aff(&format!("\u{1}{idx}"), &map[*k])?;
        }
        Ok(cur)
    }

    pub fn rename(&self, from: &str, to: &str) -> QExpr {
        if from == to {
            return self.clone();
        }
        self.substitute_aff(from, &AffineExpr::var(to)).expect("rename overflow")
    }

    /// A constant upper bound valid for every assignment of the variables.
    pub fn const_upper(&self) -> Option<i64> {
        match self {
            QExpr::Aff(a) => a.as_constant(),
            QExpr::Min(args) => args.iter().filter_map(QExpr::const_upper).min(),
            QExpr::Max(args) => {
                let ups: Option<Vec<i64>> = args.iter().map(QExpr::const_upper).collect();
                ups?.into_iter().max()
            }
            QExpr::FloorDiv(inner, d) => floor_div(inner.const_upper()?, *d).ok(),
            QExpr::Mul(k, inner) => {
                let b = if *k > 0 { inner.const_upper()? } else { inner.const_lower()? };
                b.checked_mul(*k)
            }
            QExpr::Add(parts) => {
                let mut acc = 0i64;
                for p in parts {
                    acc = acc.checked_add(p.const_upper()?)?;
                }
                Some(acc)
            }
        }
    }

    /// A constant lower bound valid for every assignment of the variables.
    pub fn const_lower(&self) -> Option<i64> {
        match self {
            QExpr::Aff(a) => a.as_constant(),
            QExpr::Min(args) => {
                let lows: Option<Vec<i64>> = args.iter().map(QExpr::const_lower).collect();
                lows?.into_iter().min()
            }
            QExpr::Max(args) => args.iter().filter_map(QExpr::const_lower).max(),
            QExpr::FloorDiv(inner, d) => floor_div(inner.const_lower()?, *d).ok(),
            QExpr::Mul(k, inner) => {
                let b = if *k > 0 { inner.const_lower()? } else { inner.const_upper()? };
                b.checked_mul(*k)
            }
            QExpr::Add(parts) => {
                let mut acc = 0i64;
                for p in parts {
                    acc = acc.checked_add(p.const_lower()?)?;
                }
                Some(acc)
            }
        }
    }

    pub fn monotonicity(&self, name: &str) -> Monotonicity {
        match self {
            QExpr::Aff(a) => match a.coeff(name) {
                0 => Monotonicity::Constant,
                c if c > 0 => Monotonicity::NonDecreasing,
                _ => Monotonicity::NonIncreasing,
            },
            QExpr::Min(args) | QExpr::Max(args) | QExpr::Add(args) => args
                .iter()
                .map(|a| a.monotonicity(name))
                .fold(Monotonicity::Constant, Monotonicity::join),
            QExpr::FloorDiv(inner, _) => inner.monotonicity(name),
            QExpr::Mul(k, inner) => {
                let m = inner.monotonicity(name);
                if *k < 0 {
                    m.flip()
                } else {
                    m
                }
            }
        }
    }
}

impl fmt::Display for QExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QExpr::Aff(a) => write!(f, "{a}"),
            QExpr::Min(args) | QExpr::Max(args) => {
                let name = if matches!(self, QExpr::Min(_)) { "min" } else { "max" };
                // Binary helper calls, nested to the right.
                let n = args.len();
                for (i, a) in args.iter().enumerate() {
                    if i + 1 < n {
                        write!(f, "{name}({a}, ")?;
                    } else {
                        write!(f, "{a}")?;
                    }
                }
                for _ in 0..n - 1 {
                    write!(f, ")")?;
                }
                Ok(())
            }
            QExpr::FloorDiv(inner, d) => write!(f, "floord({inner}, {d})"),
            QExpr::Mul(k, inner) => write!(f, "{k} * ({inner})"),
            QExpr::Add(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "({p})")?;
                }
                Ok(())
            }
        }
    }
}
