use std::collections::{BTreeMap, BTreeSet};

use crate::affine::{AffineExpr, Monotonicity, QExpr};
use crate::frontend::{expr_to_affine, Allocation, VarDecl};
use crate::sched::{Band, BandShape, Leaf, Node, PackUse, PackedArrayDecl, ScheduleTree, StmtKind, TreeStmt};

use super::{band_at, band_last, finish, splice, TResult, TransformError};

/// Smallest and largest value of a band's variable over a non-empty range.
fn band_extremes(b: &Band) -> TResult<(QExpr, QExpr)> {
    let last = band_last(b)?;
    Ok(if b.step > 0 { (b.first.clone(), last) } else { (last, b.first.clone()) })
}

/// Bound of `e` over the ranges of the bands in `stack`, eliminating
/// variables innermost first.
fn bound(e: &QExpr, stack: &[&Band], upper: bool, array: &str) -> TResult<QExpr> {
    let mut e = e.clone();
    for b in stack.iter().rev() {
        if !e.mentions(&b.var) {
            continue;
        }
        let (lo, hi) = band_extremes(b)?;
        let pick_hi = match e.monotonicity(&b.var) {
            Monotonicity::NonDecreasing => upper,
            Monotonicity::NonIncreasing => !upper,
            Monotonicity::Constant => continue,
            Monotonicity::Mixed => return Err(TransformError::NonAffinePack { array: array.into() }),
        };
        e = e.substitute(&b.var, if pick_hi { &hi } else { &lo })?;
    }
    Ok(e)
}

struct DimInfo {
    subs: Vec<AffineExpr>,
    lo: Vec<QExpr>,
    hi: Vec<QExpr>,
    /// Depth (within the packed subtree) of the innermost band whose variable occurs.
    depth: Option<usize>,
}

fn collect<'a>(
    t: &ScheduleTree,
    n: &'a Node,
    stack: &mut Vec<&'a Band>,
    decl: &VarDecl,
    dims: &mut [DimInfo],
    written: &mut bool,
    found: &mut bool,
) -> TResult<()> {
    match n {
        Node::Empty => Ok(()),
        Node::Band(b) => {
            stack.push(b);
            let r = collect(t, &b.child, stack, decl, dims, written, found);
            stack.pop();
            r
        }
        Node::Sequence(fs) => fs.iter().try_for_each(|f| collect(t, &f.child, stack, decl, dims, written, found)),
        Node::Leaf(l) => {
            let s = &t.stmts[&l.stmt];
            let already = l.packs.iter().any(|p| t.packs[p.pack].array == decl.name)
                || matches!(s.kind, StmtKind::CopyIn { pack } | StmtKind::CopyOut { pack } if t.packs[pack].array == decl.name);
            if already {
                return Err(TransformError::AlreadyPacked { array: decl.name.clone() });
            }
            let Some(ast) = &s.ast else { return Ok(()) };
            let env: BTreeMap<String, AffineExpr> =
                s.counters.iter().cloned().zip(l.instance.iter().cloned()).collect();
            let is_var = |v: &str| s.counters.iter().any(|c| c == v) || t.params.iter().any(|p| p == v);
            for (acc, w) in ast.accesses() {
                if acc.array != decl.name {
                    continue;
                }
                *found = true;
                *written |= w;
                for (d, ix) in acc.indices.iter().enumerate() {
                    let a = expr_to_affine(ix, &is_var)
                        .ok_or_else(|| TransformError::NonAffinePack { array: decl.name.clone() })?
                        .substitute_all(&env)?;
                    let q = QExpr::from(a.clone());
                    dims[d].lo.push(bound(&q, stack, false, &decl.name)?);
                    dims[d].hi.push(bound(&q, stack, true, &decl.name)?);
                    if let Some(depth) = stack.iter().rposition(|b| a.mentions(&b.var)) {
                        dims[d].depth = Some(dims[d].depth.map_or(depth, |x: usize| x.max(depth)));
                    }
                    dims[d].subs.push(a);
                }
            }
            Ok(())
        }
    }
}

fn add_pack_use(t: &ScheduleTree, n: &mut Node, use_: &PackUse, array: &str) {
    n.visit_leaves_mut(&mut |l: &mut Leaf| {
        let s = &t.stmts[&l.stmt];
        if s.ast.as_ref().is_some_and(|a| a.accesses().iter().any(|(acc, _)| acc.array == array)) {
            l.packs.push(use_.clone());
        }
    });
}

/// Copies the region of `decl` accessed inside loop `h` into a dense buffer
/// before the loop (and back after it when written), and redirects the
/// loop's accesses to the buffer.
pub fn pack(
    t: &mut ScheduleTree,
    h: usize,
    decl: &VarDecl,
    alloc: Allocation,
    layout: Option<&[usize]>,
    taken: &BTreeSet<String>,
) -> TResult<Vec<usize>> {
    let (path, band) = band_at(t, h)?;
    let rank = decl.rank();
    let mut dims: Vec<DimInfo> =
        (0..rank).map(|_| DimInfo { subs: vec![], lo: vec![], hi: vec![], depth: None }).collect();
    let mut written = false;
    let mut found = false;
    let node = Node::Band(band.clone());
    collect(t, &node, &mut Vec::new(), decl, &mut dims, &mut written, &mut found)?;
    if !found {
        return Err(TransformError::EmptyFootprint { array: decl.name.clone() });
    }

    let mut kept = Vec::new();
    let mut offsets = Vec::new();
    let mut extents_q = BTreeMap::new();
    for (d, info) in dims.iter().enumerate() {
        let lo = QExpr::min(info.lo.clone())?;
        let hi = QExpr::max(info.hi.clone())?;
        let invariant = info.depth.is_none() && info.subs.windows(2).all(|w| w[0] == w[1]);
        if !invariant {
            kept.push(d);
            extents_q.insert(d, hi.sub(&lo)?.add_const(1)?);
        }
        offsets.push(lo);
    }
    if kept.is_empty() {
        // A single element: keep the last dimension with extent one.
        kept.push(rank - 1);
        extents_q.insert(rank - 1, QExpr::from(1));
    }
    match layout {
        Some(l) => {
            let mut a = l.to_vec();
            let mut b = kept.clone();
            a.sort();
            b.sort();
            if a != b {
                return Err(TransformError::InvalidLayout { rank });
            }
            kept = l.to_vec();
        }
        None => kept.sort_by_key(|d| (dims[*d].depth.map_or(0, |x| x + 1), *d)),
    }
    let mut extents = Vec::new();
    for d in &kept {
        match extents_q[d].const_upper() {
            Some(e) if e >= 1 => extents.push(e),
            Some(_) => return Err(TransformError::EmptyFootprint { array: decl.name.clone() }),
            None => return Err(TransformError::ParametricFootprint { array: decl.name.clone() }),
        }
    }

    let existing: BTreeSet<String> = t.packs.iter().map(|p| p.name.clone()).collect();
    let base = format!("Packed_{}", decl.name);
    let name = std::iter::once(base.clone())
        .chain((1..).map(|i| format!("{base}{i}")))
        .find(|n| !taken.contains(n) && !existing.contains(n))
        .expect("unbounded");
    let pack_idx = t.packs.len();
    t.packs.push(PackedArrayDecl {
        name: name.clone(),
        array: decl.name.clone(),
        ty: decl.ty,
        dims: kept.clone(),
        extents,
        alloc,
        written,
    });
    let use_ = PackUse { pack: pack_idx, offsets };

    let mut body = node;
    add_pack_use(t, &mut body, &use_, &decl.name);

    let copy_nest = |t: &mut ScheduleTree, kind: StmtKind, label: &str| -> Node {
        let vars: Vec<String> = (0..kept.len())
            .map(|i| {
                let used = t.used_names();
                let base = format!("{name}_{label}{i}");
                let mut v = base.clone();
                let mut k = 1;
                while used.contains(&v) {
                    v = format!("{base}_{k}");
                    k += 1;
                }
                v
            })
            .collect();
        let id = t.fresh_stmt(TreeStmt {
            name: format!("{name}.{label}"),
            origin: decl.name.clone(),
            kind,
            ast: None,
            counters: vars.clone(),
        });
        let mut n = Node::Leaf(Leaf {
            stmt: id,
            instance: vars.iter().map(AffineExpr::var).collect(),
            packs: vec![use_.clone()],
        });
        for (i, v) in vars.iter().enumerate().rev() {
            n = Node::Band(Band {
                var: v.clone(),
                loop_id: None,
                handle: t.fresh_handle(),
                first: QExpr::from(0),
                limit: extents_q[&kept[i]].clone(),
                step: 1,
                shape: BandShape::Plain,
                child: Box::new(n),
            });
        }
        n
    };
    let copy_in = copy_nest(t, StmtKind::CopyIn { pack: pack_idx }, "in");
    let mut parts = vec![copy_in, body];
    if written {
        parts.push(copy_nest(t, StmtKind::CopyOut { pack: pack_idx }, "out"));
    }
    splice(t, &path, Node::sequence(parts));
    finish(t);
    Ok(vec![h])
}
