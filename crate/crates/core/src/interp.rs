//! Reference interpreter for the mini-C subset.
//!
//! Arrays are stored sparsely: an element that was never written reads as a
//! deterministic pseudo-random value derived from the array name, the flat
//! index and the seed, so two programs run with the same seed start from the
//! same memory image.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::frontend::{
    Access, AssignOp, BinOp, Expr, Function, Location, ScalarType, Stmt, UnOp, VarDecl,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("{loc}: index {index:?} out of bounds for `{array}` with extents {extents:?}")]
    OutOfBounds { loc: Location, array: String, index: Vec<i64>, extents: Vec<i64> },
    #[error("{loc}: division by zero")]
    DivisionByZero { loc: Location },
    #[error("execution exceeded the budget of {budget} steps")]
    BudgetExceeded { budget: u64 },
    #[error("{loc}: call to unknown function `{name}`")]
    UnknownFunction { loc: Location, name: String },
    #[error("{loc}: `{name}` is not bound")]
    Unbound { loc: Location, name: String },
    #[error("no value given for parameter `{name}`")]
    MissingParam { name: String },
    #[error("array `{array}` has negative extent {extent}")]
    NegativeExtent { array: String, extent: i64 },
    #[error("{loc}: `{name}` is an array and cannot be used as a value")]
    ArrayAsValue { loc: Location, name: String },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Int(v) => v as f64,
            Value::Float(v) => v,
        }
    }

    /// C conversion to an integer (truncation toward zero).
    pub fn as_i64(self) -> i64 {
        match self {
            Value::Int(v) => v,
            Value::Float(v) => v as i64,
        }
    }

    fn truthy(self) -> bool {
        match self {
            Value::Int(v) => v != 0,
            Value::Float(v) => v != 0.0,
        }
    }

    /// Equality for result comparison: exact for integers, relative 1e-9 otherwise.
    pub fn approx_eq(self, other: Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (a, b) => {
                let (a, b) = (a.as_f64(), b.as_f64());
                if a == b {
                    return true;
                }
                let scale = a.abs().max(b.abs()).max(1.0);
                (a - b).abs() <= 1e-9 * scale
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
        }
    }
}

/// How `double` data is modelled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NumericMode {
    /// Every value is an integer with wrapping arithmetic; results compare exactly.
    #[default]
    Integer,
    /// `double` data uses f64; results compare with a relative tolerance.
    Double,
}

#[derive(Clone, Debug)]
pub struct InterpConfig {
    pub mode: NumericMode,
    pub seed: u64,
    /// Maximum number of executed statements plus loop iterations.
    pub budget: u64,
    pub trace: bool,
    pub record_accesses: bool,
}

impl Default for InterpConfig {
    fn default() -> Self {
        InterpConfig { mode: NumericMode::Integer, seed: 0, budget: 10_000_000, trace: false, record_accesses: false }
    }
}

/// A statement instance: the statement name and its enclosing loop counters, outermost first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Instance {
    pub stmt: String,
    pub counters: Vec<i64>,
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c: Vec<String> = self.counters.iter().map(i64::to_string).collect();
        write!(f, "{}[{}]", self.stmt, c.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessEvent {
    /// Index of the executing statement instance in execution order.
    pub instance: usize,
    pub array: String,
    pub index: Vec<i64>,
    pub write: bool,
}

#[derive(Clone, Debug)]
pub struct ArrayState {
    pub decl: VarDecl,
    pub extents: Vec<i64>,
    pub written: HashMap<Vec<i64>, Value>,
}

#[derive(Clone, Debug, Default)]
pub struct RunResult {
    pub arrays: BTreeMap<String, ArrayState>,
    /// Executed statement instances (only when tracing or recording accesses).
    pub trace: Vec<Instance>,
    pub accesses: Vec<AccessEvent>,
    /// External calls with their evaluated arguments.
    pub calls: Vec<(String, Vec<Value>)>,
    pub steps: u64,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Initial content of an element that was never written.
pub fn fill_value(array: &str, index: &[i64], seed: u64, ty: ScalarType, mode: NumericMode) -> Value {
    let mut h = splitmix(seed);
    for b in array.bytes() {
        h = splitmix(h ^ u64::from(b));
    }
    for &i in index {
        h = splitmix(h ^ (i as u64));
    }
    let v = (h % 201) as i64 - 100;
    if mode == NumericMode::Double && ty == ScalarType::Double {
        Value::Float(v as f64 / 4.0)
    } else {
        Value::Int(v)
    }
}

struct Machine<'a> {
    cfg: &'a InterpConfig,
    params: HashMap<String, Value>,
    counters: Vec<(String, i64)>,
    arrays: BTreeMap<String, ArrayState>,
    trace: Vec<Instance>,
    accesses: Vec<AccessEvent>,
    calls: Vec<(String, Vec<Value>)>,
    instances: usize,
    steps: u64,
}

fn arith(op: BinOp, a: Value, b: Value, loc: Location) -> Result<Value, InterpError> {
    use Value::*;
    Ok(match (a, b) {
        (Int(x), Int(y)) => match op {
            BinOp::Add => Int(x.wrapping_add(y)),
            BinOp::Sub => Int(x.wrapping_sub(y)),
            BinOp::Mul => Int(x.wrapping_mul(y)),
            BinOp::Div if y == 0 => return Err(InterpError::DivisionByZero { loc }),
            BinOp::Div => Int(x.wrapping_div(y)),
            BinOp::Mod if y == 0 => return Err(InterpError::DivisionByZero { loc }),
            BinOp::Mod => Int(x.wrapping_rem(y)),
            BinOp::Lt => Int((x < y) as i64),
            BinOp::Le => Int((x <= y) as i64),
            BinOp::Gt => Int((x > y) as i64),
            BinOp::Ge => Int((x >= y) as i64),
            BinOp::Eq => Int((x == y) as i64),
            BinOp::Ne => Int((x != y) as i64),
            BinOp::And | BinOp::Or => unreachable!("short-circuit operators are handled by the caller"),
        },
        (a, b) => {
            let (x, y) = (a.as_f64(), b.as_f64());
            match op {
                BinOp::Add => Float(x + y),
                BinOp::Sub => Float(x - y),
                BinOp::Mul => Float(x * y),
                BinOp::Div => Float(x / y),
                BinOp::Mod => Float(x % y),
                BinOp::Lt => Int((x < y) as i64),
                BinOp::Le => Int((x <= y) as i64),
                BinOp::Gt => Int((x > y) as i64),
                BinOp::Ge => Int((x >= y) as i64),
                BinOp::Eq => Int((x == y) as i64),
                BinOp::Ne => Int((x != y) as i64),
                BinOp::And | BinOp::Or => unreachable!("short-circuit operators are handled by the caller"),
            }
        }
    })
}

impl<'a> Machine<'a> {
    fn tick(&mut self) -> Result<(), InterpError> {
        self.steps += 1;
        if self.steps > self.cfg.budget {
            return Err(InterpError::BudgetExceeded { budget: self.cfg.budget });
        }
        Ok(())
    }

    fn scalar(&self, name: &str, loc: Location) -> Result<Value, InterpError> {
        if let Some((_, v)) = self.counters.iter().rev().find(|(n, _)| n == name) {
            return Ok(Value::Int(*v));
        }
        if let Some(v) = self.params.get(name) {
            return Ok(*v);
        }
        if let Some(a) = self.arrays.get(name) {
            if a.extents.is_empty() {
                return Ok(self.read_element(name, &[]));
            }
            return Err(InterpError::ArrayAsValue { loc, name: name.into() });
        }
        Err(InterpError::Unbound { loc, name: name.into() })
    }

    fn read_element(&self, array: &str, index: &[i64]) -> Value {
        let a = &self.arrays[array];
        match a.written.get(index) {
            Some(v) => *v,
            None => fill_value(array, index, self.cfg.seed, a.decl.ty, self.cfg.mode),
        }
    }

    fn index_of(&mut self, acc: &Access, loc: Location) -> Result<Vec<i64>, InterpError> {
        let mut index = Vec::with_capacity(acc.indices.len());
        for e in &acc.indices {
            index.push(self.eval(e, loc)?.as_i64());
        }
        let a = self
            .arrays
            .get(&acc.array)
            .ok_or_else(|| InterpError::Unbound { loc, name: acc.array.clone() })?;
        if index.len() != a.extents.len()
            || index.iter().zip(&a.extents).any(|(i, e)| *i < 0 || i >= e)
        {
            return Err(InterpError::OutOfBounds {
                loc,
                array: acc.array.clone(),
                index,
                extents: a.extents.clone(),
            });
        }
        Ok(index)
    }

    fn record(&mut self, array: &str, index: &[i64], write: bool) {
        if self.cfg.record_accesses {
            self.accesses.push(AccessEvent {
                instance: self.instances,
                array: array.to_string(),
                index: index.to_vec(),
                write,
            });
        }
    }

    fn eval(&mut self, e: &Expr, loc: Location) -> Result<Value, InterpError> {
        Ok(match e {
            Expr::Int(v) => Value::Int(*v),
            Expr::Float(v) => match self.cfg.mode {
                NumericMode::Double => Value::Float(*v),
                NumericMode::Integer if v.fract() == 0.0 => Value::Int(*v as i64),
                NumericMode::Integer => Value::Float(*v),
            },
            Expr::Var(n) => self.scalar(n, loc)?,
            Expr::SizeOf(t) => Value::Int(t.size_bytes()),
            Expr::Access(acc) => {
                let index = self.index_of(acc, loc)?;
                self.record(&acc.array, &index, false);
                self.read_element(&acc.array, &index)
            }
            Expr::Unary(UnOp::Neg, x) => match self.eval(x, loc)? {
                Value::Int(v) => Value::Int(v.wrapping_neg()),
                Value::Float(v) => Value::Float(-v),
            },
            Expr::Unary(UnOp::Not, x) => Value::Int(!self.eval(x, loc)?.truthy() as i64),
            Expr::Binary(BinOp::And, l, r) => {
                Value::Int((self.eval(l, loc)?.truthy() && self.eval(r, loc)?.truthy()) as i64)
            }
            Expr::Binary(BinOp::Or, l, r) => {
                Value::Int((self.eval(l, loc)?.truthy() || self.eval(r, loc)?.truthy()) as i64)
            }
            Expr::Binary(op, l, r) => {
                let a = self.eval(l, loc)?;
                let b = self.eval(r, loc)?;
                arith(*op, a, b, loc)?
            }
            Expr::Call(name, args) => self.builtin(name, args, loc)?,
        })
    }

    fn builtin(&mut self, name: &str, args: &[Expr], loc: Location) -> Result<Value, InterpError> {
        match name {
            "min" | "max" if !args.is_empty() => {
                let mut best = self.eval(&args[0], loc)?;
                for a in &args[1..] {
                    let v = self.eval(a, loc)?;
                    let better = if name == "min" { v.as_f64() < best.as_f64() } else { v.as_f64() > best.as_f64() };
                    if better {
                        best = v;
                    }
                }
                Ok(best)
            }
            "floord" if args.len() == 2 => {
                let a = self.eval(&args[0], loc)?.as_i64();
                let b = self.eval(&args[1], loc)?.as_i64();
                crate::affine::floor_div(a, b)
                    .map(Value::Int)
                    .map_err(|_| InterpError::DivisionByZero { loc })
            }
            "lf_disjoint" if args.len() == 4 => {
                // Distinct arrays never overlap in the interpreter's memory model.
                let (Expr::Var(a), Expr::Var(b)) = (&args[0], &args[2]) else {
                    return Ok(Value::Int(0));
                };
                self.eval(&args[1], loc)?;
                self.eval(&args[3], loc)?;
                Ok(Value::Int((a != b) as i64))
            }
            _ => Err(InterpError::UnknownFunction { loc, name: name.into() }),
        }
    }

    fn begin_instance(&mut self, name: &str) {
        if self.cfg.trace || self.cfg.record_accesses {
            self.trace.push(Instance {
                stmt: name.to_string(),
                counters: self.counters.iter().map(|(_, v)| *v).collect(),
            });
        }
    }

    fn exec_block(&mut self, body: &[Stmt]) -> Result<(), InterpError> {
        for s in body {
            self.exec(s)?;
        }
        Ok(())
    }

    fn exec(&mut self, s: &Stmt) -> Result<(), InterpError> {
        match s {
            Stmt::Block(b) => self.exec_block(b),
            Stmt::If(i) => {
                if self.eval(&i.cond, i.loc)?.truthy() {
                    self.exec_block(&i.then_body)
                } else {
                    self.exec_block(&i.else_body)
                }
            }
            Stmt::For(l) => {
                let mut v = self.eval(&l.init, l.loc)?.as_i64();
                self.counters.push((l.counter.clone(), v));
                let result = (|| {
                    loop {
                        self.counters.last_mut().expect("pushed above").1 = v;
                        if !self.eval(&l.cond, l.loc)?.truthy() {
                            return Ok(());
                        }
                        self.tick()?;
                        self.exec_block(&l.body)?;
                        v = v.wrapping_add(l.step);
                    }
                })();
                self.counters.pop();
                result
            }
            Stmt::Assign(a) => {
                self.tick()?;
                self.begin_instance(&a.name);
                let rhs = self.eval(&a.rhs, a.loc)?;
                let index = self.index_of(&a.lhs, a.loc)?;
                let value = match a.op {
                    AssignOp::Set => rhs,
                    compound => {
                        self.record(&a.lhs.array, &index, false);
                        let old = self.read_element(&a.lhs.array, &index);
                        let op = match compound {
                            AssignOp::Add => BinOp::Add,
                            AssignOp::Sub => BinOp::Sub,
                            AssignOp::Mul => BinOp::Mul,
                            AssignOp::Set => unreachable!(),
                        };
                        arith(op, old, rhs, a.loc)?
                    }
                };
                self.record(&a.lhs.array, &index, true);
                let ty = self.arrays[&a.lhs.array].decl.ty;
                let value = match (ty, value) {
                    (t, Value::Float(f)) if t.is_integer() => Value::Int(f as i64),
                    (ScalarType::Double, Value::Int(i)) if self.cfg.mode == NumericMode::Double => {
                        Value::Float(i as f64)
                    }
                    (_, v) => v,
                };
                self.arrays.get_mut(&a.lhs.array).expect("checked by index_of").written.insert(index, value);
                self.instances += 1;
                Ok(())
            }
            Stmt::Call(c) => {
                self.tick()?;
                self.begin_instance(&c.name);
                let mut args = Vec::new();
                for e in &c.args {
                    match e {
                        Expr::Var(n) if self.arrays.get(n).is_some_and(|a| !a.extents.is_empty()) => {
                            args.push(Value::Int(0));
                        }
                        e => args.push(self.eval(e, c.loc)?),
                    }
                }
                self.calls.push((c.callee.clone(), args));
                self.instances += 1;
                Ok(())
            }
        }
    }
}

/// Runs `f` with the given scalar parameter values.
pub fn run_function(
    f: &Function,
    params: &BTreeMap<String, i64>,
    cfg: &InterpConfig,
) -> Result<RunResult, InterpError> {
    let mut m = Machine {
        cfg,
        params: HashMap::new(),
        counters: Vec::new(),
        arrays: BTreeMap::new(),
        trace: Vec::new(),
        accesses: Vec::new(),
        calls: Vec::new(),
        instances: 0,
        steps: 0,
    };
    for p in f.scalar_params() {
        let v = *params.get(&p.name).ok_or_else(|| InterpError::MissingParam { name: p.name.clone() })?;
        let v = if p.ty == ScalarType::Double && cfg.mode == NumericMode::Double {
            Value::Float(v as f64)
        } else {
            Value::Int(v)
        };
        m.params.insert(p.name.clone(), v);
    }
    for d in f.array_params().chain(f.locals.iter()) {
        let mut extents = Vec::new();
        for e in &d.dims {
            let x = m.eval(e, d.loc)?.as_i64();
            if x < 0 {
                return Err(InterpError::NegativeExtent { array: d.name.clone(), extent: x });
            }
            extents.push(x);
        }
        m.arrays.insert(d.name.clone(), ArrayState { decl: d.clone(), extents, written: HashMap::new() });
    }
    m.exec_block(&f.body)?;
    Ok(RunResult {
        arrays: m.arrays,
        trace: m.trace,
        accesses: m.accesses,
        calls: m.calls,
        steps: m.steps,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Equivalence {
    Equal,
    ValueMismatch { array: String, index: Vec<i64>, left: Value, right: Value },
    ShapeMismatch { array: String },
    CallMismatch,
}

impl Equivalence {
    pub fn is_equal(&self) -> bool {
        *self == Equivalence::Equal
    }
}

impl fmt::Display for Equivalence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Equivalence::Equal => write!(f, "equivalent"),
            Equivalence::ValueMismatch { array, index, left, right } => {
                let ix: String = index.iter().map(|i| format!("[{i}]")).collect();
                write!(f, "{array}{ix}: {left} vs {right}")
            }
            Equivalence::ShapeMismatch { array } => write!(f, "`{array}` differs in shape or presence"),
            Equivalence::CallMismatch => write!(f, "external calls differ"),
        }
    }
}

/// Compares the final memory of two runs. Temporaries whose name starts with
/// `Packed_` are ignored when only one side declares them; external calls are
/// compared as multisets.
pub fn compare_runs(a: &RunResult, b: &RunResult, cfg: &InterpConfig) -> Equivalence {
    let names: std::collections::BTreeSet<&String> = a.arrays.keys().chain(b.arrays.keys()).collect();
    for name in names {
        let (sa, sb) = match (a.arrays.get(name), b.arrays.get(name)) {
            (Some(x), Some(y)) => (x, y),
            _ if name.starts_with("Packed_") => continue,
            _ => return Equivalence::ShapeMismatch { array: name.clone() },
        };
        if sa.extents != sb.extents {
            return Equivalence::ShapeMismatch { array: name.clone() };
        }
        let mut keys: Vec<&Vec<i64>> = sa.written.keys().chain(sb.written.keys()).collect();
        keys.sort();
        keys.dedup();
        for k in keys {
            let fill = || fill_value(name, k, cfg.seed, sa.decl.ty, cfg.mode);
            let va = sa.written.get(k).copied().unwrap_or_else(fill);
            let vb = sb.written.get(k).copied().unwrap_or_else(fill);
            if !va.approx_eq(vb) {
                return Equivalence::ValueMismatch { array: name.clone(), index: k.clone(), left: va, right: vb };
            }
        }
    }
    let key = |c: &(String, Vec<Value>)| format!("{}{:?}", c.0, c.1);
    let mut ca: Vec<String> = a.calls.iter().map(key).collect();
    let mut cb: Vec<String> = b.calls.iter().map(key).collect();
    ca.sort();
    cb.sort();
    if ca != cb {
        return Equivalence::CallMismatch;
    }
    Equivalence::Equal
}

/// Runs both functions from the same initial memory and compares the results.
pub fn equivalent(
    a: &Function,
    b: &Function,
    params: &BTreeMap<String, i64>,
    cfg: &InterpConfig,
) -> Result<Equivalence, InterpError> {
    let ra = run_function(a, params, cfg)?;
    let rb = run_function(b, params, cfg)?;
    Ok(compare_runs(&ra, &rb, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;

    fn func(src: &str) -> Function {
        parse_source(src).unwrap().functions.remove(0)
    }

    fn params(pairs: &[(&str, i64)]) -> BTreeMap<String, i64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn c_integer_semantics() {
        let f = func("void f(int A[4]) { A[0] = -7 / 2; A[1] = -7 % 2; A[2] = floord(-7, 2); A[3] = min(3, max(1, 2)); }");
        let r = run_function(&f, &params(&[]), &InterpConfig::default()).unwrap();
        let a = &r.arrays["A"].written;
        assert_eq!(a[&vec![0]], Value::Int(-3));
        assert_eq!(a[&vec![1]], Value::Int(-1));
        assert_eq!(a[&vec![2]], Value::Int(-4));
        assert_eq!(a[&vec![3]], Value::Int(2));
    }

    #[test]
    fn errors_are_reported() {
        let f = func("void f(int n, int A[n]) { for (int i = 0; i <= n; i+=1) A[i] = 1; }");
        let err = run_function(&f, &params(&[("n", 3)]), &InterpConfig::default()).unwrap_err();
        assert!(matches!(err, InterpError::OutOfBounds { .. }));
        let f = func("void f(int n, int A[1]) { A[0] = 1 / n; }");
        let err = run_function(&f, &params(&[("n", 0)]), &InterpConfig::default()).unwrap_err();
        assert!(matches!(err, InterpError::DivisionByZero { .. }));
        let f = func("void f(int n, int A[1]) { for (int i = 0; i < n; i+=1) A[0] += 1; }");
        let cfg = InterpConfig { budget: 100, ..Default::default() };
        let err = run_function(&f, &params(&[("n", 1000)]), &cfg).unwrap_err();
        assert_eq!(err, InterpError::BudgetExceeded { budget: 100 });
    }

    #[test]
    fn trace_and_accesses() {
        let f = func("void f(int n, int A[n]) { for (int i = 1; i < n; i+=1) A[i] = A[i-1]; }");
        let cfg = InterpConfig { trace: true, record_accesses: true, ..Default::default() };
        let r = run_function(&f, &params(&[("n", 3)]), &cfg).unwrap();
        assert_eq!(
            r.trace,
            vec![Instance { stmt: "S0".into(), counters: vec![1] }, Instance { stmt: "S0".into(), counters: vec![2] }]
        );
        assert_eq!(r.accesses.len(), 4);
        assert!(r.accesses[1].write && r.accesses[1].index == vec![1]);
    }

    #[test]
    fn seeded_fill_is_shared() {
        let a = func("void f(int n, double A[n]) { for (int i = 0; i < n; i+=1) A[i] = A[i] * 2; }");
        let b = func("void f(int n, double A[n]) { for (int i = n - 1; i >= 0; i-=1) A[i] = A[i] + A[i]; }");
        let p = params(&[("n", 9)]);
        for mode in [NumericMode::Integer, NumericMode::Double] {
            let cfg = InterpConfig { mode, seed: 42, ..Default::default() };
            assert!(equivalent(&a, &b, &p, &cfg).unwrap().is_equal());
        }
        let c = func("void f(int n, double A[n]) { for (int i = 1; i < n; i+=1) A[i] = A[i-1] * 2; }");
        let cfg = InterpConfig { seed: 42, ..Default::default() };
        assert!(!equivalent(&a, &c, &p, &cfg).unwrap().is_equal());
    }

    #[test]
    fn fill_values_in_range() {
        for i in 0..500 {
            let v = fill_value("A", &[i, 3], 7, ScalarType::Int, NumericMode::Integer).as_i64();
            assert!((-100..=100).contains(&v));
        }
    }
}
