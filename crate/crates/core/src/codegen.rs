//! Structural code generation: every band is emitted directly as a `for`
//! loop, leaves become their source statement with substituted subscripts.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use thiserror::Error;

use crate::affine::{ArithError, QExpr};
use crate::frontend::printer::print_program;
use crate::frontend::{
    expr_to_qexpr, qexpr_to_expr, Access, Allocation, Assign, AssignOp, BinOp, CallStmt, Expr,
    Function, IfStmt, Location, Loop, Program, Stmt, VarDecl,
};
use crate::pipeline::{FunctionOutcome, Outcome};
use crate::sched::{Band, Leaf, Node, PackUse, ScheduleTree, StmtKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodegenError {
    #[error("unsupported schedule shape: {reason}")]
    UnsupportedScheduleShape { reason: String },
    #[error(transparent)]
    Arith(#[from] ArithError),
}

/// How loop counters relate to the values of the schedule's loop variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LoopStyle {
    /// Tile-index style when the function uses packed arrays, value style otherwise.
    #[default]
    Auto,
    /// The counter takes the loop variable's values: `for (c0 = F; c0 < L; c0 += s)`.
    Value,
    /// The counter numbers the iterations: `for (c0 = 0; c0 <= floord(L - F - 1, s); c0 += 1)`.
    TileIndex,
}

impl FromStr for LoopStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(LoopStyle::Auto),
            "value" => Ok(LoopStyle::Value),
            "tile-index" => Ok(LoopStyle::TileIndex),
            _ => Err(format!("unknown loop style `{s}` (expected auto, value or tile-index)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CounterNaming {
    /// `c0`, `c1`, ... by nesting depth.
    #[default]
    Numbered,
    /// The loop's id when it has one, numbered otherwise.
    LoopIds,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CodegenOptions {
    pub style: LoopStyle,
    pub counters: CounterNaming,
}

pub const HELPERS: &str = "\
static inline long floord(long n, long d) { return n >= 0 ? n / d : -((-n + d - 1) / d); }
static inline long min(long a, long b) { return a < b ? a : b; }
static inline long max(long a, long b) { return a > b ? a : b; }
static inline int lf_disjoint(const void *a, long an, const void *b, long bn) { return (const char *)a + an <= (const char *)b || (const char *)b + bn <= (const char *)a; }
";

/// Renders a program with the helper definitions it may call.
pub fn emit_c(p: &Program) -> String {
    let mut out = String::new();
    let heap = p.functions.iter().any(|f| f.locals.iter().any(|d| d.alloc == Allocation::Heap));
    if heap {
        out.push_str("#include <stdlib.h>\n\n");
    }
    out.push_str(HELPERS);
    out.push('\n');
    out.push_str(&print_program(p));
    out
}

pub fn generate_program(o: &Outcome, opts: &CodegenOptions) -> Result<Program, CodegenError> {
    let functions = o.functions.iter().map(|f| generate_function(f, opts)).collect::<Result<_, _>>()?;
    Ok(Program { functions, helpers: Vec::new() })
}

pub fn strip_pragmas(body: &[Stmt]) -> Vec<Stmt> {
    body.iter()
        .map(|s| match s {
            Stmt::For(l) => Stmt::For(Loop { pragmas: Vec::new(), body: strip_pragmas(&l.body), ..l.clone() }),
            Stmt::Block(b) => Stmt::Block(strip_pragmas(b)),
            Stmt::If(i) => Stmt::If(IfStmt {
                then_body: strip_pragmas(&i.then_body),
                else_body: strip_pragmas(&i.else_body),
                ..i.clone()
            }),
            other => other.clone(),
        })
        .collect()
}

pub fn generate_function(fo: &FunctionOutcome, opts: &CodegenOptions) -> Result<Function, CodegenError> {
    let f = &fo.original;
    let original = strip_pragmas(&f.body);
    let tree = match &fo.tree {
        Some(t) if fo.applied > 0 => t,
        _ => return Ok(Function { body: original, ..f.clone() }),
    };
    let mut locals = f.locals.clone();
    for p in &tree.packs {
        locals.push(VarDecl {
            name: p.name.clone(),
            ty: p.ty,
            dims: p.extents.iter().map(|e| Expr::Int(*e)).collect(),
            alloc: p.alloc,
            loc: Location::default(),
        });
    }
    let transformed = generate_tree(f, tree, opts)?;
    let body = match build_runtime_check(f, tree) {
        Some(cond) => vec![Stmt::If(IfStmt {
            cond,
            then_body: transformed,
            else_body: original,
            loc: Location::default(),
        })],
        None => transformed,
    };
    Ok(Function { locals, body, ..f.clone() })
}

fn array_bytes(d: &VarDecl) -> Expr {
    d.dims.iter().fold(Expr::SizeOf(d.ty), |acc, e| Expr::bin(BinOp::Mul, acc, e.clone()))
}

/// Disjointness predicates for every pair of array parameters where one is
/// written and the other accessed by the schedule's statements.
pub fn build_runtime_check(f: &Function, tree: &ScheduleTree) -> Option<Expr> {
    let mut accessed = BTreeSet::new();
    let mut written = BTreeSet::new();
    for id in tree.root.leaf_stmts() {
        if let Some(ast) = &tree.stmts[&id].ast {
            for (a, w) in ast.accesses() {
                accessed.insert(a.array.clone());
                if w {
                    written.insert(a.array.clone());
                }
            }
        }
    }
    let arrays: Vec<&VarDecl> = f.array_params().collect();
    let mut seen = BTreeSet::new();
    let mut conj: Option<Expr> = None;
    for (i, x) in arrays.iter().enumerate() {
        if !written.contains(&x.name) {
            continue;
        }
        for (j, y) in arrays.iter().enumerate() {
            if i == j || !accessed.contains(&y.name) || !seen.insert((i.min(j), i.max(j))) {
                continue;
            }
            let test = Expr::call(
                "lf_disjoint",
                vec![Expr::var(&x.name), array_bytes(x), Expr::var(&y.name), array_bytes(y)],
            );
            conj = Some(match conj {
                None => test,
                Some(c) => Expr::bin(BinOp::And, c, test),
            });
        }
    }
    conj
}

struct Gen<'a> {
    f: &'a Function,
    tree: &'a ScheduleTree,
    tile_index: bool,
    naming: CounterNaming,
    prefix: String,
    reserved: BTreeSet<String>,
    /// Counter names in scope, outermost first.
    counters: Vec<String>,
    /// Band variable to its value in terms of counters, in scope order.
    values: Vec<(String, QExpr)>,
}

fn numbered_prefix(reserved: &BTreeSet<String>) -> String {
    let clashes = |p: &str| {
        reserved.iter().any(|n| n.strip_prefix(p).is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit())))
    };
    ["c", "c_", "lf_c"]
        .iter()
        .map(|s| s.to_string())
        .chain((1..).map(|k| format!("lf{k}_c")))
        .find(|p| !clashes(p))
        .expect("unbounded")
}

pub fn generate_tree(f: &Function, tree: &ScheduleTree, opts: &CodegenOptions) -> Result<Vec<Stmt>, CodegenError> {
    let mut reserved: BTreeSet<String> = tree.used_names();
    reserved.extend(f.params.iter().chain(&f.locals).map(|d| d.name.clone()));
    reserved.extend(tree.packs.iter().map(|p| p.name.clone()));
    reserved.extend(["floord", "min", "max", "lf_disjoint"].map(String::from));
    let tile_index = match opts.style {
        LoopStyle::Auto => tree.has_packs(),
        LoopStyle::Value => false,
        LoopStyle::TileIndex => true,
    };
    let mut g = Gen {
        f,
        tree,
        tile_index,
        naming: opts.counters,
        prefix: numbered_prefix(&reserved),
        reserved,
        counters: Vec::new(),
        values: Vec::new(),
    };
    g.node(&tree.root)
}

impl Gen<'_> {
    /// Term order for printing: parameters, then counters by depth, then anything else.
    fn rank(&self, name: &str) -> (u8, usize, String) {
        if let Some(i) = self.f.params.iter().position(|p| p.name == name) {
            (0, i, String::new())
        } else if let Some(i) = self.counters.iter().position(|c| c == name) {
            (1, i, String::new())
        } else {
            (2, 0, name.to_string())
        }
    }

    fn print(&self, q: &QExpr) -> Expr {
        qexpr_to_expr(q, &|n: &str| self.rank(n))
    }

    /// Rewrites band variables into counter expressions.
    fn in_counters(&self, q: &QExpr) -> Result<QExpr, CodegenError> {
        let mut q = q.clone();
        for (var, value) in self.values.iter().rev() {
            if q.mentions(var) {
                q = q.substitute(var, value)?;
            }
        }
        Ok(q)
    }

    fn counter_name(&self, b: &Band) -> String {
        if self.naming == CounterNaming::LoopIds {
            if let Some(id) = &b.loop_id {
                if !self.reserved.contains(id) && !self.counters.contains(id) {
                    return id.clone();
                }
            }
        }
        format!("{}{}", self.prefix, self.counters.len())
    }

    fn node(&mut self, n: &Node) -> Result<Vec<Stmt>, CodegenError> {
        match n {
            Node::Empty => Ok(Vec::new()),
            Node::Sequence(fs) => {
                let mut out = Vec::new();
                for filt in fs {
                    out.extend(self.node(&filt.child)?);
                }
                Ok(out)
            }
            Node::Leaf(l) => Ok(vec![self.leaf(l)?]),
            Node::Band(b) => Ok(vec![self.band(b)?]),
        }
    }

    fn band(&mut self, b: &Band) -> Result<Stmt, CodegenError> {
        if b.step == 0 {
            return Err(CodegenError::UnsupportedScheduleShape { reason: format!("loop `{}` has step 0", b.var) });
        }
        let first = self.in_counters(&b.first)?;
        let limit = self.in_counters(&b.limit)?;
        let c = self.counter_name(b);
        let s = b.step.abs();
        let (init, cond, step, value) = if self.tile_index {
            let count_max = if b.step > 0 {
                limit.sub(&first)?.add_const(-1)?.floordiv(s)?
            } else {
                first.sub(&limit)?.floordiv(s)?
            };
            let value = first.add(&QExpr::var(&c).scale(b.step)?)?;
            (QExpr::from(0), (BinOp::Le, count_max), 1, value)
        } else if b.step > 0 {
            (first, (BinOp::Lt, limit), b.step, QExpr::var(&c))
        } else {
            (first, (BinOp::Ge, limit), b.step, QExpr::var(&c))
        };
        self.counters.push(c.clone());
        let init = self.print(&init);
        let cond = Expr::bin(cond.0, Expr::var(&c), self.print(&cond.1));
        self.values.push((b.var.clone(), value));
        let body = self.node(&b.child);
        self.values.pop();
        self.counters.pop();
        Ok(Stmt::For(Loop {
            counter: c,
            init,
            cond,
            step,
            body: body?,
            pragmas: Vec::new(),
            key: b.handle,
            loc: Location::default(),
        }))
    }

    fn leaf(&self, l: &Leaf) -> Result<Stmt, CodegenError> {
        let s = &self.tree.stmts[&l.stmt];
        let env: BTreeMap<String, QExpr> =
            s.counters.iter().cloned().zip(l.instance.iter().map(|a| QExpr::from(a.clone()))).collect();
        let cx = LeafCx { g: self, env: &env, packs: &l.packs };
        match (&s.kind, &s.ast) {
            (StmtKind::Original, Some(Stmt::Assign(a))) => Ok(Stmt::Assign(Assign {
                name: s.name.clone(),
                labeled: false,
                lhs: cx.access(&a.lhs)?,
                op: a.op,
                rhs: cx.expr(&a.rhs)?,
                loc: a.loc,
            })),
            (StmtKind::Original, Some(Stmt::Call(c))) => Ok(Stmt::Call(CallStmt {
                name: s.name.clone(),
                labeled: false,
                callee: c.callee.clone(),
                args: c.args.iter().map(|e| cx.expr(e)).collect::<Result<_, _>>()?,
                loc: c.loc,
            })),
            (StmtKind::CopyIn { pack } | StmtKind::CopyOut { pack }, _) => {
                let p = &self.tree.packs[*pack];
                let use_ = l.packs.iter().find(|u| u.pack == *pack).expect("copy statement carries its pack");
                let buf_idx: Vec<QExpr> = l.instance.iter().map(|a| QExpr::from(a.clone())).collect();
                let mut src_idx = Vec::new();
                for (d, off) in use_.offsets.iter().enumerate() {
                    src_idx.push(match p.dims.iter().position(|k| *k == d) {
                        Some(i) => off.add(&buf_idx[i])?,
                        None => off.clone(),
                    });
                }
                let packed = self.access_of(&p.name, &buf_idx)?;
                let orig = self.access_of(&p.array, &src_idx)?;
                let (lhs, rhs) = if matches!(s.kind, StmtKind::CopyIn { .. }) { (packed, orig) } else { (orig, packed) };
                Ok(Stmt::Assign(Assign {
                    name: s.name.clone(),
                    labeled: false,
                    lhs,
                    op: AssignOp::Set,
                    rhs: Expr::Access(rhs),
                    loc: Location::default(),
                }))
            }
            _ => Err(CodegenError::UnsupportedScheduleShape {
                reason: format!("statement {} has no code", s.name),
            }),
        }
    }

    fn access_of(&self, array: &str, idx: &[QExpr]) -> Result<Access, CodegenError> {
        Ok(Access {
            array: array.to_string(),
            indices: idx.iter().map(|q| Ok(self.print(&self.in_counters(q)?))).collect::<Result<_, CodegenError>>()?,
        })
    }
}

struct LeafCx<'a> {
    g: &'a Gen<'a>,
    /// Source counters to their values in terms of band variables.
    env: &'a BTreeMap<String, QExpr>,
    packs: &'a [PackUse],
}

impl LeafCx<'_> {
    fn is_var(&self, n: &str) -> bool {
        self.env.contains_key(n) || self.g.f.is_param_scalar(n)
    }

    /// The expression in terms of band variables, if it is quasi-affine.
    fn band_form(&self, e: &Expr) -> Result<Option<QExpr>, CodegenError> {
        let Some(mut q) = expr_to_qexpr(e, &|n| self.is_var(n)) else { return Ok(None) };
        for (c, v) in self.env {
            if q.mentions(c) {
                q = q.substitute(c, v)?;
            }
        }
        Ok(Some(q))
    }

    fn expr(&self, e: &Expr) -> Result<Expr, CodegenError> {
        if self.env.keys().any(|c| e.mentions_var(c)) && !matches!(e, Expr::Access(_)) {
            if let Some(q) = self.band_form(e)? {
                return Ok(self.g.print(&self.g.in_counters(&q)?));
            }
        }
        Ok(match e {
            Expr::Access(a) => Expr::Access(self.access(a)?),
            Expr::Unary(op, x) => Expr::Unary(*op, Box::new(self.expr(x)?)),
            Expr::Binary(op, l, r) => Expr::bin(*op, self.expr(l)?, self.expr(r)?),
            Expr::Call(n, args) => Expr::Call(n.clone(), args.iter().map(|a| self.expr(a)).collect::<Result<_, _>>()?),
            other => other.clone(),
        })
    }

    fn access(&self, a: &Access) -> Result<Access, CodegenError> {
        let packed = self.packs.iter().find(|u| self.g.tree.packs[u.pack].array == a.array);
        let Some(u) = packed else {
            return Ok(Access { array: a.array.clone(), indices: a.indices.iter().map(|e| self.expr(e)).collect::<Result<_, _>>()? });
        };
        let p = &self.g.tree.packs[u.pack];
        let mut idx = Vec::new();
        for d in &p.dims {
            let sub = self.band_form(&a.indices[*d])?.ok_or_else(|| CodegenError::UnsupportedScheduleShape {
                reason: format!("non-affine subscript of packed array {}", a.array),
            })?;
            idx.push(sub.sub(&u.offsets[*d])?);
        }
        self.g.access_of(&p.name, &idx)
    }
}

/// Text of the generated program for a pipeline outcome.
pub fn render(o: &Outcome, opts: &CodegenOptions) -> Result<String, CodegenError> {
    Ok(emit_c(&generate_program(o, opts)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;
    use crate::interp::{equivalent, Equivalence, InterpConfig};
    use crate::pipeline::{transform_source, Options};

    fn gen(src: &str, style: LoopStyle) -> String {
        let o = transform_source(src, &Options::default()).unwrap();
        assert!(!o.has_errors(), "{:?}", o.diagnostics);
        let p = generate_program(&o, &CodegenOptions { style, ..Default::default() }).unwrap();
        print_program(&p)
    }

    #[test]
    fn stripmine_value_style() {
        let src = "void f(int n, int A[n]) {\n#pragma clang loop stripmine size(4)\nfor (int i = 0; i < n; i+=1)\n  A[i] = i;\n}";
        let out = gen(src, LoopStyle::Auto);
        assert!(out.contains("for (int c0 = 0; c0 < n; c0 += 4)"), "{out}");
        assert!(out.contains("for (int c1 = c0; c1 < min(c0 + 4, n); c1 += 1)"), "{out}");
        assert!(out.contains("A[c1] = c1;"), "{out}");
        let out = gen(src, LoopStyle::TileIndex);
        assert!(out.contains("for (int c0 = 0; c0 <= floord(n - 1, 4); c0 += 1)"), "{out}");
        assert!(out.contains("A[4 * c0 + c1] = 4 * c0 + c1;"), "{out}");
    }

    #[test]
    fn reverse_and_no_check_for_single_array() {
        let src = "void f(int n, int A[n]) {\n#pragma clang loop reverse\nfor (int i = 0; i < n; i+=1)\n  A[i] = i;\n}";
        let out = gen(src, LoopStyle::Auto);
        assert!(out.contains("for (int c0 = n - 1; c0 >= 0; c0 -= 1)"), "{out}");
        assert!(!out.contains("if ("), "{out}");
    }

    #[test]
    fn matmul_check_and_equivalence() {
        let src = "void mm(int M, int N, int K, int C[M][N], int A[M][K], int B[K][N]) {\n#pragma clang loop(j2) pack array(A)\n#pragma clang loop(i1) pack array(B)\n#pragma clang loop(i1,j1,k1,i2,j2,k2) interchange permutation(j1,k1,i1,j2,i2,k2)\n#pragma clang loop(i,j,k) tile sizes(2,3,2) pit_ids(i1,j1,k1) tile_ids(i2,j2,k2)\n#pragma clang loop id(i)\nfor (int i = 0; i < M; i+=1)\n for (int j = 0; j < N; j+=1)\n  for (int k = 0; k < K; k+=1)\n   C[i][j] += A[i][k] * B[k][j];\n}";
        let o = transform_source(src, &Options::default()).unwrap();
        let text = render(&o, &CodegenOptions::default()).unwrap();
        assert!(text.contains("if (lf_disjoint(C, sizeof(int) * M * N, A, sizeof(int) * M * K) && lf_disjoint(C, sizeof(int) * M * N, B, sizeof(int) * K * N))"), "{text}");
        assert!(text.contains("C[2 * c2 + c4][3 * c0 + c3] += Packed_A[c4][c5] * Packed_B[c3][c5];"), "{text}");
        let reparsed = parse_source(&text).unwrap();
        let params: BTreeMap<String, i64> = [("M", 7), ("N", 5), ("K", 6)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let eq = equivalent(&o.program.functions[0], &reparsed.functions[0], &params, &InterpConfig::default()).unwrap();
        assert_eq!(eq, Equivalence::Equal);
    }

    #[test]
    fn helpers_round_trip_and_counter_prefix() {
        let src = "void f(int n, int c0, int A[n]) {\n#pragma clang loop reverse\nfor (int i = 0; i < n; i+=1)\n  A[i] = c0;\n}";
        let out = gen(src, LoopStyle::Auto);
        assert!(out.contains("for (int c_0 = n - 1; c_0 >= 0; c_0 -= 1)"), "{out}");
        let p = parse_source(&emit_c(&parse_source(src).unwrap())).unwrap();
        assert_eq!(p.helpers, vec!["floord", "min", "max", "lf_disjoint"]);
    }
}
