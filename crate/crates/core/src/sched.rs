//! Schedule trees: a nested band/sequence/leaf representation of a loop nest
//! that transformations rewrite and code generation walks.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write};

use thiserror::Error;

use crate::affine::{AffineExpr, ArithError, QExpr};
use crate::frontend::{loop_range, Allocation, Function, Location, ScalarType, Stmt};
use crate::interp::Instance;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchedError {
    #[error("{loc}: loop cannot be represented: {reason}")]
    Unsupported { loc: Location, reason: String },
    #[error("enumeration exceeded the cap of {cap} statement instances")]
    InstanceCapExceeded { cap: usize },
    #[error("evaluating the schedule: {0}")]
    Arith(#[from] ArithError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    Original,
    /// Copies the packed region of an array into its buffer.
    CopyIn { pack: usize },
    /// Copies a written buffer back to the array.
    CopyOut { pack: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeStmt {
    pub name: String,
    /// Name of the source statement this one instantiates (the array name for copies).
    pub origin: String,
    pub kind: StmtKind,
    /// The source statement, for original statements and their unrolled copies.
    pub ast: Option<Stmt>,
    /// Counters of the loops enclosing the source statement, outermost first.
    pub counters: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BandShape {
    Plain,
    /// Tile loop stepping over blocks of `size` iterations of the original loop.
    Pit { size: i64 },
    /// Iterations inside the block starting at `pit`.
    Strip { pit: String, size: i64 },
}

/// One loop. The variable starts at `first` and advances by `step` while it
/// is below `limit` (positive step) or at least `limit` (negative step).
#[derive(Clone, Debug, PartialEq)]
pub struct Band {
    pub var: String,
    pub loop_id: Option<String>,
    pub handle: usize,
    pub first: QExpr,
    pub limit: QExpr,
    pub step: i64,
    pub shape: BandShape,
    pub child: Box<Node>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Filter {
    pub stmts: BTreeSet<usize>,
    pub child: Node,
}

/// Rewrites every access to the packed array in a leaf to its buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct PackUse {
    pub pack: usize,
    /// Lower corner of the packed region, one entry per dimension of the array.
    pub offsets: Vec<QExpr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    pub stmt: usize,
    /// Source counter values (or, for copies, buffer offsets) in terms of band variables.
    pub instance: Vec<AffineExpr>,
    pub packs: Vec<PackUse>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Band(Band),
    Sequence(Vec<Filter>),
    Leaf(Leaf),
    Empty,
}

/// A packing buffer introduced by the `pack` transformation.
#[derive(Clone, Debug, PartialEq)]
pub struct PackedArrayDecl {
    pub name: String,
    pub array: String,
    pub ty: ScalarType,
    /// Array dimensions kept in the buffer, in buffer order.
    pub dims: Vec<usize>,
    pub extents: Vec<i64>,
    pub alloc: Allocation,
    pub written: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleTree {
    pub params: Vec<String>,
    pub stmts: BTreeMap<usize, TreeStmt>,
    pub root: Node,
    pub packs: Vec<PackedArrayDecl>,
    pub next_stmt: usize,
    pub next_handle: usize,
}

impl Node {
    pub fn child_count(&self) -> usize {
        match self {
            Node::Band(_) => 1,
            Node::Sequence(fs) => fs.len(),
            Node::Leaf(_) | Node::Empty => 0,
        }
    }

    pub fn child(&self, i: usize) -> &Node {
        match self {
            Node::Band(b) => &b.child,
            Node::Sequence(fs) => &fs[i].child,
            _ => panic!("leaf has no children"),
        }
    }

    pub fn child_mut(&mut self, i: usize) -> &mut Node {
        match self {
            Node::Band(b) => &mut b.child,
            Node::Sequence(fs) => &mut fs[i].child,
            _ => panic!("leaf has no children"),
        }
    }

    pub fn at(&self, path: &[usize]) -> &Node {
        path.iter().fold(self, |n, &i| n.child(i))
    }

    pub fn at_mut(&mut self, path: &[usize]) -> &mut Node {
        let mut n = self;
        for &i in path {
            n = n.child_mut(i);
        }
        n
    }

    /// Statement ids of the leaves below, in tree order.
    pub fn leaf_stmts(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit_leaves(&mut |l| out.push(l.stmt));
        out
    }

    pub fn visit_leaves(&self, f: &mut dyn FnMut(&Leaf)) {
        match self {
            Node::Band(b) => b.child.visit_leaves(f),
            Node::Sequence(fs) => fs.iter().for_each(|x| x.child.visit_leaves(f)),
            Node::Leaf(l) => f(l),
            Node::Empty => {}
        }
    }

    pub fn visit_leaves_mut(&mut self, f: &mut dyn FnMut(&mut Leaf)) {
        match self {
            Node::Band(b) => b.child.visit_leaves_mut(f),
            Node::Sequence(fs) => fs.iter_mut().for_each(|x| x.child.visit_leaves_mut(f)),
            Node::Leaf(l) => f(l),
            Node::Empty => {}
        }
    }

    pub fn visit_bands(&self, f: &mut dyn FnMut(&Band)) {
        match self {
            Node::Band(b) => {
                f(b);
                b.child.visit_bands(f)
            }
            Node::Sequence(fs) => fs.iter().for_each(|x| x.child.visit_bands(f)),
            Node::Leaf(_) | Node::Empty => {}
        }
    }

    pub fn visit_bands_mut(&mut self, f: &mut dyn FnMut(&mut Band)) {
        match self {
            Node::Band(b) => {
                f(b);
                b.child.visit_bands_mut(f)
            }
            Node::Sequence(fs) => fs.iter_mut().for_each(|x| x.child.visit_bands_mut(f)),
            Node::Leaf(_) | Node::Empty => {}
        }
    }

    /// Path to the band with the given handle.
    pub fn find_band(&self, handle: usize) -> Option<Vec<usize>> {
        match self {
            Node::Band(b) if b.handle == handle => Some(vec![]),
            Node::Band(b) => b.child.find_band(handle).map(|mut p| {
                p.insert(0, 0);
                p
            }),
            Node::Sequence(fs) => fs.iter().enumerate().find_map(|(i, f)| {
                f.child.find_band(handle).map(|mut p| {
                    p.insert(0, i);
                    p
                })
            }),
            Node::Leaf(_) | Node::Empty => None,
        }
    }

    /// Substitutes a band variable throughout the subtree (bounds, instances, pack offsets).
    pub fn substitute(&mut self, var: &str, repl: &AffineExpr) -> Result<(), ArithError> {
        match self {
            Node::Band(b) => {
                b.first = b.first.substitute_aff(var, repl)?;
                b.limit = b.limit.substitute_aff(var, repl)?;
                b.child.substitute(var, repl)
            }
            Node::Sequence(fs) => fs.iter_mut().try_for_each(|f| f.child.substitute(var, repl)),
            Node::Leaf(l) => {
                for e in &mut l.instance {
                    *e = e.substitute(var, repl)?;
                }
                for p in &mut l.packs {
                    for o in &mut p.offsets {
                        *o = o.substitute_aff(var, repl)?;
                    }
                }
                Ok(())
            }
            Node::Empty => Ok(()),
        }
    }

    /// Recomputes every filter's statement set from the leaves below it.
    pub fn refresh_filters(&mut self) {
        match self {
            Node::Band(b) => b.child.refresh_filters(),
            Node::Sequence(fs) => {
                for f in fs.iter_mut() {
                    f.child.refresh_filters();
                    f.stmts = f.child.leaf_stmts().into_iter().collect();
                }
            }
            Node::Leaf(_) | Node::Empty => {}
        }
    }

    /// Builds a sequence from parts, dropping empty parts and collapsing singletons.
    pub fn sequence(parts: Vec<Node>) -> Node {
        let mut filters = Vec::new();
        for p in parts {
            match p {
                Node::Empty => {}
                Node::Sequence(fs) => filters.extend(fs),
                other => filters.push(Filter { stmts: other.leaf_stmts().into_iter().collect(), child: other }),
            }
        }
        match filters.len() {
            0 => Node::Empty,
            1 => filters.pop().expect("one filter").child,
            _ => Node::Sequence(filters),
        }
    }
}

impl ScheduleTree {
    pub fn fresh_stmt(&mut self, s: TreeStmt) -> usize {
        let id = self.next_stmt;
        self.next_stmt += 1;
        self.stmts.insert(id, s);
        id
    }

    pub fn fresh_handle(&mut self) -> usize {
        let h = self.next_handle;
        self.next_handle += 1;
        h
    }

    pub fn band(&self, handle: usize) -> Option<&Band> {
        let path = self.root.find_band(handle)?;
        match self.root.at(&path) {
            Node::Band(b) => Some(b),
            _ => None,
        }
    }

    /// Band variables of the bands strictly above `path`, outermost first.
    pub fn vars_above(&self, path: &[usize]) -> Vec<String> {
        let mut out = Vec::new();
        let mut n = &self.root;
        for &i in path {
            if let Node::Band(b) = n {
                out.push(b.var.clone());
            }
            n = n.child(i);
        }
        out
    }

    /// Every variable name in use (parameters and band variables).
    pub fn used_names(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.params.iter().cloned().collect();
        self.root.visit_bands(&mut |b| {
            out.insert(b.var.clone());
        });
        for s in self.stmts.values() {
            out.extend(s.counters.iter().cloned());
        }
        out
    }

    /// A variable name based on `base` that is not yet used.
    pub fn fresh_var(&self, base: &str) -> String {
        let used = self.used_names();
        if !used.contains(base) {
            return base.to_string();
        }
        (1..).map(|i| format!("{base}_{i}")).find(|n| !used.contains(n)).expect("unbounded")
    }

    pub fn has_packs(&self) -> bool {
        !self.packs.is_empty()
    }
}

/// Builds the tree of a function body. Each loop's band gets its pre-order key as handle.
pub fn lower_to_tree(f: &Function) -> Result<ScheduleTree, SchedError> {
    let params: Vec<String> = f.scalar_params().map(|p| p.name.clone()).collect();
    let mut tree = ScheduleTree {
        params: params.clone(),
        stmts: BTreeMap::new(),
        root: Node::Empty,
        packs: Vec::new(),
        next_stmt: 0,
        next_handle: f.loops().len(),
    };
    let mut scope = Vec::new();
    tree.root = lower_block(&f.body, f, &mut scope, &mut tree)?;
    Ok(tree)
}

fn lower_block(
    body: &[Stmt],
    f: &Function,
    scope: &mut Vec<String>,
    tree: &mut ScheduleTree,
) -> Result<Node, SchedError> {
    let mut parts = Vec::new();
    for s in body {
        parts.push(lower_stmt(s, f, scope, tree)?);
    }
    Ok(Node::sequence(parts))
}

fn lower_stmt(
    s: &Stmt,
    f: &Function,
    scope: &mut Vec<String>,
    tree: &mut ScheduleTree,
) -> Result<Node, SchedError> {
    match s {
        Stmt::Block(b) => lower_block(b, f, scope, tree),
        Stmt::If(i) => Err(SchedError::Unsupported {
            loc: i.loc,
            reason: "conditional statements inside transformed functions".into(),
        }),
        Stmt::Assign(_) | Stmt::Call(_) => {
            let name = s.name().expect("simple statement").to_string();
            let is_var = |v: &str| scope.iter().any(|x| x == v) || f.is_param_scalar(v);
            for (acc, _) in s.accesses() {
                for ix in &acc.indices {
                    if crate::frontend::expr_to_affine(ix, &is_var).is_none() {
                        let loc = match s {
                            Stmt::Assign(a) => a.loc,
                            Stmt::Call(c) => c.loc,
                            _ => unreachable!(),
                        };
                        return Err(SchedError::Unsupported {
                            loc,
                            reason: format!("subscript of `{}` in {name} is not affine", acc.array),
                        });
                    }
                }
            }
            let id = tree.fresh_stmt(TreeStmt {
                name: name.clone(),
                origin: name,
                kind: StmtKind::Original,
                ast: Some(s.clone()),
                counters: scope.clone(),
            });
            Ok(Node::Leaf(Leaf {
                stmt: id,
                instance: scope.iter().map(AffineExpr::var).collect(),
                packs: Vec::new(),
            }))
        }
        Stmt::For(l) => {
            if scope.contains(&l.counter) || f.lookup(&l.counter).is_some() {
                return Err(SchedError::Unsupported {
                    loc: l.loc,
                    reason: format!("counter `{}` shadows another variable", l.counter),
                });
            }
            let is_var = |v: &str| scope.iter().any(|x| x == v) || f.is_param_scalar(v);
            let range = loop_range(l, &is_var).map_err(|reason| SchedError::Unsupported { loc: l.loc, reason })?;
            scope.push(l.counter.clone());
            let child = lower_block(&l.body, f, scope, tree);
            scope.pop();
            Ok(Node::Band(Band {
                var: l.counter.clone(),
                loop_id: None,
                handle: l.key,
                first: range.first,
                limit: range.limit,
                step: range.step,
                shape: BandShape::Plain,
                child: Box::new(child?),
            }))
        }
    }
}

/// Values taken by a band's variable under `env`.
pub fn band_values(b: &Band, env: &dyn Fn(&str) -> Option<i64>) -> Result<Vec<i64>, ArithError> {
    let first = b.first.eval(env)?;
    let limit = b.limit.eval(env)?;
    let mut out = Vec::new();
    let mut v = first;
    if b.step > 0 {
        while v < limit {
            out.push(v);
            v += b.step;
        }
    } else {
        while v >= limit {
            out.push(v);
            v += b.step;
        }
    }
    Ok(out)
}

/// Iteration count of a band under `env`, without materializing the values.
pub fn band_trip_count(b: &Band, env: &dyn Fn(&str) -> Option<i64>) -> Result<i64, ArithError> {
    let first = b.first.eval(env)?;
    let limit = b.limit.eval(env)?;
    let s = b.step.abs();
    let span = if b.step > 0 { limit - first } else { first - limit + 1 };
    Ok(if span <= 0 { 0 } else { (span + s - 1) / s })
}

/// Original statement instances in the order the tree executes them.
pub fn enumerate_order(
    tree: &ScheduleTree,
    params: &BTreeMap<String, i64>,
    cap: usize,
) -> Result<Vec<Instance>, SchedError> {
    let mut out = Vec::new();
    let mut env: Vec<(String, i64)> = params.iter().map(|(k, v)| (k.clone(), *v)).collect();
    walk(tree, &tree.root, &mut env, &mut out, cap)?;
    Ok(out)
}

fn lookup_env(env: &[(String, i64)], name: &str) -> Option<i64> {
    env.iter().rev().find(|(n, _)| n == name).map(|(_, v)| *v)
}

fn walk(
    tree: &ScheduleTree,
    node: &Node,
    env: &mut Vec<(String, i64)>,
    out: &mut Vec<Instance>,
    cap: usize,
) -> Result<(), SchedError> {
    match node {
        Node::Empty => Ok(()),
        Node::Sequence(fs) => fs.iter().try_for_each(|f| walk(tree, &f.child, env, out, cap)),
        Node::Band(b) => {
            let values = {
                let e = &*env;
                band_values(b, &|n| lookup_env(e, n))?
            };
            for v in values {
                env.push((b.var.clone(), v));
                let r = walk(tree, &b.child, env, out, cap);
                env.pop();
                r?;
            }
            Ok(())
        }
        Node::Leaf(l) => {
            let s = &tree.stmts[&l.stmt];
            if s.kind != StmtKind::Original {
                return Ok(());
            }
            if out.len() >= cap {
                return Err(SchedError::InstanceCapExceeded { cap });
            }
            let e = &*env;
            let counters = l
                .instance
                .iter()
                .map(|a| a.eval(&|n| lookup_env(e, n)))
                .collect::<Result<Vec<_>, _>>()?;
            out.push(Instance { stmt: s.origin.clone(), counters });
            Ok(())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn node_label(n: &Node, tree: &ScheduleTree) -> String {
    match n {
        Node::Band(b) => format!("band({})", b.var),
        Node::Sequence(_) => "sequence".into(),
        Node::Leaf(l) => format!("leaf({})", tree.stmts.get(&l.stmt).map_or("?", |s| s.name.as_str())),
        Node::Empty => "empty".into(),
    }
}

/// Structural checks: statement coverage, filter consistency and variable scoping.
pub fn validate_tree(tree: &ScheduleTree) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut leaf_count: BTreeMap<usize, usize> = BTreeMap::new();
    tree.root.visit_leaves(&mut |l| *leaf_count.entry(l.stmt).or_default() += 1);
    for (id, s) in &tree.stmts {
        match leaf_count.get(id).copied().unwrap_or(0) {
            0 => out.push(Violation { path: "/".into(), message: format!("statement {} has no leaf", s.name) }),
            1 => {}
            n => out.push(Violation {
                path: "/".into(),
                message: format!("statement {} appears in {n} leaves", s.name),
            }),
        }
    }
    for id in leaf_count.keys() {
        if !tree.stmts.contains_key(id) {
            out.push(Violation { path: "/".into(), message: format!("leaf refers to unknown statement #{id}") });
        }
    }
    let multi: BTreeSet<usize> = leaf_count.iter().filter(|(_, c)| **c > 1).map(|(id, _)| *id).collect();
    let mut scope: Vec<String> = tree.params.clone();
    check_node(tree, &tree.root, String::new(), &mut scope, &multi, &mut out);
    out
}

fn check_node(
    tree: &ScheduleTree,
    node: &Node,
    path: String,
    scope: &mut Vec<String>,
    multi: &BTreeSet<usize>,
    out: &mut Vec<Violation>,
) {
    let here = format!("{path}/{}", node_label(node, tree));
    let name = |id: &usize| tree.stmts.get(id).map_or(format!("#{id}"), |s| s.name.clone());
    match node {
        Node::Empty => {}
        Node::Band(b) => {
            for v in b.first.vars().into_iter().chain(b.limit.vars()) {
                if !scope.contains(&v) {
                    out.push(Violation { path: here.clone(), message: format!("bound mentions `{v}` which is not in scope") });
                }
            }
            if scope.contains(&b.var) {
                out.push(Violation { path: here.clone(), message: format!("variable `{}` is already bound", b.var) });
            }
            if b.step == 0 {
                out.push(Violation { path: here.clone(), message: "zero step".into() });
            }
            scope.push(b.var.clone());
            check_node(tree, &b.child, here, scope, multi, out);
            scope.pop();
        }
        Node::Sequence(fs) => {
            let mut seen: BTreeSet<usize> = BTreeSet::new();
            let mut overlap = false;
            for (i, f) in fs.iter().enumerate() {
                let fpath = format!("{here}/filter[{i}]");
                let below: BTreeSet<usize> = f.child.leaf_stmts().into_iter().collect();
                for id in below.difference(&f.stmts) {
                    out.push(Violation { path: fpath.clone(), message: format!("filter lacks {} which occurs below it", name(id)) });
                }
                for id in f.stmts.difference(&below) {
                    out.push(Violation { path: fpath.clone(), message: format!("filter names {} which does not occur below it", name(id)) });
                }
                if f.stmts.iter().any(|id| !multi.contains(id) && seen.contains(id)) {
                    overlap = true;
                }
                seen.extend(f.stmts.iter().copied());
                check_node(tree, &f.child, fpath, scope, multi, out);
            }
            if overlap {
                out.push(Violation { path: here, message: "sequence filters overlap".into() });
            }
        }
        Node::Leaf(l) => {
            let Some(s) = tree.stmts.get(&l.stmt) else { return };
            let expected = match s.kind {
                StmtKind::Original => s.counters.len(),
                StmtKind::CopyIn { pack } | StmtKind::CopyOut { pack } => {
                    tree.packs.get(pack).map_or(l.instance.len(), |p| p.dims.len())
                }
            };
            if l.instance.len() != expected {
                out.push(Violation {
                    path: here.clone(),
                    message: format!("instance has {} coordinates, expected {expected}", l.instance.len()),
                });
            }
            let mut mentioned: BTreeSet<String> = BTreeSet::new();
            for e in &l.instance {
                mentioned.extend(e.vars().map(String::from));
            }
            for p in &l.packs {
                for o in &p.offsets {
                    mentioned.extend(o.vars());
                }
            }
            for v in mentioned {
                if !scope.contains(&v) {
                    out.push(Violation { path: here.clone(), message: format!("instance mentions `{v}` which is not in scope") });
                }
            }
        }
    }
}

fn instance_text(tree: &ScheduleTree, id: usize) -> String {
    let s = &tree.stmts[&id];
    format!("{}[{}]", s.name, s.counters.join(", "))
}

fn band_range_text(b: &Band) -> String {
    let v = &b.var;
    let mut s = if b.step > 0 {
        format!("{} <= {v} < {}", b.first, b.limit)
    } else {
        format!("{} <= {v} <= {}", b.limit, b.first)
    };
    if b.step != 1 {
        let _ = write!(s, ", step {}", b.step);
    }
    match &b.shape {
        BandShape::Plain => {}
        BandShape::Pit { size } => {
            let _ = write!(s, ", tiles of {size}");
        }
        BandShape::Strip { pit, .. } => {
            let _ = write!(s, ", within tile {pit}");
        }
    }
    s
}

fn display_node(tree: &ScheduleTree, n: &Node, level: usize, out: &mut String) {
    let pad = "  ".repeat(level);
    match n {
        Node::Empty => {
            let _ = writeln!(out, "{pad}Empty");
        }
        Node::Band(b) => {
            let maps: Vec<String> = b
                .child
                .leaf_stmts()
                .into_iter()
                .map(|id| format!("{} -> [{}]", instance_text(tree, id), b.var))
                .collect();
            let id = b.loop_id.as_ref().map(|i| format!(" ({i})")).unwrap_or_default();
            let _ = writeln!(out, "{pad}Band{id}: {{ {} | {} }}", maps.join("; "), band_range_text(b));
            display_node(tree, &b.child, level + 1, out);
        }
        Node::Sequence(fs) => {
            let _ = writeln!(out, "{pad}Sequence");
            for f in fs {
                let names: Vec<String> = f.stmts.iter().map(|id| instance_text(tree, *id)).collect();
                let _ = writeln!(out, "{pad}  Filter: {{ {} }}", names.join("; "));
                display_node(tree, &f.child, level + 2, out);
            }
        }
        Node::Leaf(l) => {
            let s = &tree.stmts[&l.stmt];
            let coords: Vec<String> = l.instance.iter().map(|e| e.to_string()).collect();
            let mut line = format!("{pad}{}[{}]", s.name, coords.join(", "));
            if !l.packs.is_empty() {
                let names: Vec<&str> = l.packs.iter().map(|p| tree.packs[p.pack].name.as_str()).collect();
                let _ = write!(line, " uses {}", names.join(", "));
            }
            let _ = writeln!(out, "{line}");
        }
    }
}

impl fmt::Display for ScheduleTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dom: Vec<String> = self.root.leaf_stmts().into_iter().map(|id| instance_text(self, id)).collect();
        let mut out = format!("Domain: {{ {} }}\n", dom.join(", "));
        for p in &self.packs {
            let ext: String = p.extents.iter().map(|e| format!("[{e}]")).collect();
            let _ = writeln!(out, "Buffer: {} {}{ext} packs {}", p.ty.keyword(), p.name, p.array);
        }
        display_node(self, &self.root, 0, &mut out);
        f.write_str(&out)
    }
}

/// Leaves and their enclosing band variables, in tree order.
pub fn leaves_with_scope(tree: &ScheduleTree) -> Vec<(Vec<String>, Leaf)> {
    fn go(n: &Node, scope: &mut Vec<String>, out: &mut Vec<(Vec<String>, Leaf)>) {
        match n {
            Node::Band(b) => {
                scope.push(b.var.clone());
                go(&b.child, scope, out);
                scope.pop();
            }
            Node::Sequence(fs) => fs.iter().for_each(|f| go(&f.child, scope, out)),
            Node::Leaf(l) => out.push((scope.clone(), l.clone())),
            Node::Empty => {}
        }
    }
    let mut out = Vec::new();
    go(&tree.root, &mut Vec::new(), &mut out);
    out
}

/// Map from band handle to path, for every band in the tree.
pub fn band_paths(tree: &ScheduleTree) -> HashMap<usize, Vec<usize>> {
    fn go(n: &Node, path: &mut Vec<usize>, out: &mut HashMap<usize, Vec<usize>>) {
        match n {
            Node::Band(b) => {
                out.insert(b.handle, path.clone());
                path.push(0);
                go(&b.child, path, out);
                path.pop();
            }
            Node::Sequence(fs) => {
                for (i, f) in fs.iter().enumerate() {
                    path.push(i);
                    go(&f.child, path, out);
                    path.pop();
                }
            }
            _ => {}
        }
    }
    let mut out = HashMap::new();
    go(&tree.root, &mut Vec::new(), &mut out);
    out
}
