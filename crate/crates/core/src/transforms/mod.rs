//! Rewrites on schedule trees. Every transformation addresses bands by
//! handle and returns the handles of its output loops, outermost first.

mod pack;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::affine::{AffineExpr, ArithError, QExpr};
use crate::sched::{Band, BandShape, Filter, Leaf, Node, ScheduleTree, TreeStmt};

pub use pack::pack;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransformError {
    #[error("the loop no longer exists in the schedule")]
    MissingLoop,
    #[error("loops are not perfectly nested")]
    NotPerfectlyNested,
    #[error("the bounds of loop `{var}` depend on a loop that would move inside it")]
    NonRectangular { var: String },
    #[error("permutation does not name exactly the interchanged loops")]
    InvalidPermutation,
    #[error("unroll-and-jam needs a loop nested inside the unrolled one")]
    JamNotNested,
    #[error("fused loops must have matching iteration ranges up to a common offset")]
    RangeMismatch,
    #[error("fused loops must be adjacent siblings")]
    NonAdjacent,
    #[error("loop has no statements to distribute over")]
    NothingToDistribute,
    #[error("full unrolling needs a constant trip count")]
    NonConstantTripCount,
    #[error("full unrolling of {count} iterations exceeds the limit of {limit}")]
    UnrollTooLarge { count: i64, limit: i64 },
    #[error("`{array}` is not accessed inside the packed loop")]
    EmptyFootprint { array: String },
    #[error("the packed region of `{array}` has no constant size bound")]
    ParametricFootprint { array: String },
    #[error("an access to `{array}` inside the packed loop is not affine in the loop counters")]
    NonAffinePack { array: String },
    #[error("`{array}` is already packed inside this loop")]
    AlreadyPacked { array: String },
    #[error("layout must be a permutation of the packed dimensions 0..{rank}")]
    InvalidLayout { rank: usize },
    #[error("arithmetic overflow in loop bounds: {0}")]
    Arith(#[from] ArithError),
}

pub type TResult<T> = Result<T, TransformError>;

pub const MAX_FULL_UNROLL: i64 = 1024;

fn band_at(t: &ScheduleTree, h: usize) -> TResult<(Vec<usize>, &Band)> {
    let path = t.root.find_band(h).ok_or(TransformError::MissingLoop)?;
    match t.root.at(&path) {
        Node::Band(b) => Ok((path, b)),
        _ => unreachable!("find_band returns band paths"),
    }
}

/// Replaces the node at `path`; a sequence replacing a filter's child is
/// spliced into the enclosing sequence.
pub(crate) fn splice(t: &mut ScheduleTree, path: &[usize], node: Node) {
    if let Some((&idx, parent)) = path.split_last() {
        if let Node::Sequence(fs) = t.root.at_mut(parent) {
            let mut parts: Vec<Node> = fs.drain(..).map(|f| f.child).collect();
            parts[idx] = node;
            *t.root.at_mut(parent) = Node::sequence(parts);
            return;
        }
    }
    *t.root.at_mut(path) = node;
}

fn finish(t: &mut ScheduleTree) {
    t.root.refresh_filters();
}

/// The band `h` and its perfectly nested descendants, `len` bands in total.
pub fn chain_from(t: &ScheduleTree, h: usize, len: usize) -> TResult<Vec<usize>> {
    let (_, mut b) = band_at(t, h)?;
    let mut out = vec![b.handle];
    while out.len() < len {
        match b.child.as_ref() {
            Node::Band(inner) => {
                b = inner;
                out.push(b.handle);
            }
            _ => return Err(TransformError::NotPerfectlyNested),
        }
    }
    Ok(out)
}

/// Checks that `handles` form a perfectly nested chain, outermost first.
pub fn check_chain(t: &ScheduleTree, handles: &[usize]) -> TResult<()> {
    let expect = chain_from(t, handles[0], handles.len())?;
    if expect == handles {
        Ok(())
    } else {
        Err(TransformError::NotPerfectlyNested)
    }
}

/// The band directly following `h` in its enclosing sequence.
pub fn next_sibling(t: &ScheduleTree, h: usize) -> TResult<usize> {
    let (path, _) = band_at(t, h)?;
    let Some((&idx, parent)) = path.split_last() else { return Err(TransformError::NonAdjacent) };
    match t.root.at(parent) {
        Node::Sequence(fs) => match fs.get(idx + 1).map(|f| &f.child) {
            Some(Node::Band(b)) => Ok(b.handle),
            _ => Err(TransformError::NonAdjacent),
        },
        _ => Err(TransformError::NonAdjacent),
    }
}

/// Last value taken by a band's variable, assuming the range is non-empty.
pub fn band_last(b: &Band) -> TResult<QExpr> {
    let s = b.step.abs();
    if b.step > 0 {
        let k = b.limit.sub(&b.first)?.add_const(-1)?.floordiv(s)?;
        Ok(b.first.add(&k.scale(s)?)?)
    } else {
        let k = b.first.sub(&b.limit)?.floordiv(s)?;
        Ok(b.first.sub(&k.scale(s)?)?)
    }
}

/// Trip count of a band, clamped at zero.
pub fn band_count(b: &Band) -> TResult<QExpr> {
    let s = b.step.abs();
    let span = if b.step > 0 { b.limit.sub(&b.first)? } else { b.first.sub(&b.limit)?.add_const(1)? };
    Ok(QExpr::max(vec![QExpr::from(0), span.ceildiv(s)?])?)
}

pub fn reverse(t: &mut ScheduleTree, h: usize) -> TResult<Vec<usize>> {
    let (path, _) = band_at(t, h)?;
    let Node::Band(b) = t.root.at_mut(&path) else { unreachable!() };
    let s = b.step.abs();
    if b.step > 0 {
        let first = band_last(b)?;
        b.limit = b.first.clone();
        b.first = first;
    } else {
        let k = b.first.sub(&b.limit)?.floordiv(s)?;
        let first = b.first.sub(&k.scale(s)?)?;
        b.limit = b.first.add_const(1)?;
        b.first = first;
    }
    b.step = -b.step;
    finish(t);
    Ok(vec![h])
}

/// Splits a band into a pit band over blocks and a strip band within a block.
/// The strip keeps the band's variable; the pit gets a fresh one.
fn split_band(t: &mut ScheduleTree, b: &Band, size: i64, pit_var: &str) -> TResult<(Band, Band)> {
    let step = b.step.checked_mul(size).ok_or(ArithError::Overflow)?;
    let p = QExpr::var(pit_var);
    let strip_limit = if b.step > 0 {
        QExpr::min(vec![p.add_const(step)?, b.limit.clone()])?
    } else {
        QExpr::max(vec![p.add_const(step + 1)?, b.limit.clone()])?
    };
    let strip = Band {
        var: b.var.clone(),
        loop_id: None,
        handle: t.fresh_handle(),
        first: p,
        limit: strip_limit,
        step: b.step,
        shape: BandShape::Strip { pit: pit_var.to_string(), size },
        child: b.child.clone(),
    };
    let pit = Band {
        var: pit_var.to_string(),
        loop_id: None,
        handle: b.handle,
        first: b.first.clone(),
        limit: b.limit.clone(),
        step,
        shape: BandShape::Pit { size },
        child: Box::new(Node::Empty),
    };
    Ok((pit, strip))
}

fn pit_var_name(t: &ScheduleTree, hint: Option<&str>, var: &str, reserved: &[String]) -> String {
    let mut used = t.used_names();
    used.extend(reserved.iter().cloned());
    if let Some(h) = hint.filter(|h| !used.contains(*h)) {
        return h.to_string();
    }
    let base = format!("{var}_t");
    std::iter::once(base.clone())
        .chain((1..).map(|i| format!("{base}{i}")))
        .find(|n| !used.contains(n))
        .expect("unbounded")
}

pub fn stripmine(t: &mut ScheduleTree, h: usize, size: i64, pit_hint: Option<&str>) -> TResult<Vec<usize>> {
    tile(t, &[h], &[size], &[pit_hint])
}

pub fn tile(t: &mut ScheduleTree, chain: &[usize], sizes: &[i64], pit_hints: &[Option<&str>]) -> TResult<Vec<usize>> {
    check_chain(t, chain)?;
    let (path, _) = band_at(t, chain[0])?;
    let mut bands = Vec::new();
    for &h in chain {
        bands.push(band_at(t, h)?.1.clone());
    }
    let body = bands.last().expect("non-empty chain").child.clone();
    let mut pits = Vec::new();
    let mut strips = Vec::new();
    let mut reserved = Vec::new();
    for (i, b) in bands.iter().enumerate() {
        let name = pit_var_name(t, pit_hints.get(i).copied().flatten(), &b.var, &reserved);
        reserved.push(name.clone());
        let (pit, strip) = split_band(t, b, sizes[i], &name)?;
        pits.push(pit);
        strips.push(strip);
    }
    let pit_vars: Vec<&str> = pits.iter().map(|p| p.var.as_str()).collect();
    for (i, p) in pits.iter().enumerate() {
        for v in p.first.vars().into_iter().chain(p.limit.vars()) {
            if bands.iter().any(|b| b.var == v) || pit_vars[i..].contains(&v.as_str()) {
                return Err(TransformError::NonRectangular { var: bands[i].var.clone() });
            }
        }
    }
    let outputs: Vec<usize> = pits.iter().chain(&strips).map(|b| b.handle).collect();
    let mut node = *body;
    for mut b in pits.into_iter().chain(strips).rev() {
        b.child = Box::new(node);
        node = Node::Band(b);
    }
    *t.root.at_mut(&path) = node;
    finish(t);
    Ok(outputs)
}

/// Reorders a perfect chain so that `perm[0]` becomes outermost.
pub fn interchange(t: &mut ScheduleTree, chain: &[usize], perm: &[usize]) -> TResult<Vec<usize>> {
    check_chain(t, chain)?;
    let a: BTreeSet<usize> = chain.iter().copied().collect();
    let b: BTreeSet<usize> = perm.iter().copied().collect();
    if a != b || perm.len() != chain.len() {
        return Err(TransformError::InvalidPermutation);
    }
    let (path, _) = band_at(t, chain[0])?;
    let mut bands = Vec::new();
    for &h in chain {
        bands.push(band_at(t, h)?.1.clone());
    }
    let body = bands.last().expect("non-empty chain").child.clone();
    let ordered: Vec<Band> = perm
        .iter()
        .map(|h| bands.iter().find(|b| b.handle == *h).expect("permutation checked").clone())
        .collect();
    let chain_vars: Vec<&str> = bands.iter().map(|b| b.var.as_str()).collect();
    for (i, b) in ordered.iter().enumerate() {
        let above: Vec<&str> = ordered[..i].iter().map(|x| x.var.as_str()).collect();
        for v in b.first.vars().into_iter().chain(b.limit.vars()) {
            if chain_vars.contains(&v.as_str()) && !above.contains(&v.as_str()) {
                return Err(TransformError::NonRectangular { var: b.var.clone() });
            }
        }
    }
    let mut node = *body;
    for mut b in ordered.into_iter().rev() {
        b.child = Box::new(node);
        node = Node::Band(b);
    }
    *t.root.at_mut(&path) = node;
    finish(t);
    Ok(perm.to_vec())
}

/// Deep copy of a subtree with fresh statement ids named `<name>.<suffix>`
/// and, when `fresh_handles`, fresh band handles.
fn clone_subtree(t: &mut ScheduleTree, n: &Node, suffix: usize, fresh_handles: bool) -> Node {
    match n {
        Node::Empty => Node::Empty,
        Node::Band(b) => {
            let child = clone_subtree(t, &b.child, suffix, fresh_handles);
            Node::Band(Band {
                handle: if fresh_handles { t.fresh_handle() } else { b.handle },
                child: Box::new(child),
                ..b.clone()
            })
        }
        Node::Sequence(fs) => Node::Sequence(
            fs.iter()
                .map(|f| Filter { stmts: BTreeSet::new(), child: clone_subtree(t, &f.child, suffix, fresh_handles) })
                .collect(),
        ),
        Node::Leaf(l) => {
            let old = t.stmts[&l.stmt].clone();
            let id = t.fresh_stmt(TreeStmt { name: format!("{}.{suffix}", old.name), ..old });
            Node::Leaf(Leaf { stmt: id, ..l.clone() })
        }
    }
}

fn remove_stmts(t: &mut ScheduleTree, n: &Node) {
    for id in n.leaf_stmts() {
        t.stmts.remove(&id);
    }
}

pub fn unroll(t: &mut ScheduleTree, h: usize, factor: i64) -> TResult<Vec<usize>> {
    let (path, b) = band_at(t, h)?;
    let b = b.clone();
    let s = b.step;
    let count = band_count(&b)?;
    let main_limit = b.limit.add_const(-(factor - 1) * s)?;
    let mut copies = Vec::new();
    for k in 0..factor {
        let mut c = clone_subtree(t, &b.child, (k + 1) as usize, k > 0);
        c.substitute(&b.var, &AffineExpr::var(&b.var).add_const(k * s)?)?;
        copies.push(c);
    }
    let main = Band {
        limit: main_limit,
        step: s.checked_mul(factor).ok_or(ArithError::Overflow)?,
        child: Box::new(Node::sequence(copies)),
        ..b.clone()
    };
    let done = count.floordiv(factor)?.scale(factor * s)?;
    let epilogue_first = b.first.add(&done)?;
    let remainder = count.as_constant().map(|c| c % factor);
    let mut outputs = vec![h];
    let node = if remainder == Some(0) {
        remove_stmts(t, &b.child);
        Node::Band(main)
    } else {
        let epi = Band { first: epilogue_first, handle: t.fresh_handle(), ..b.clone() };
        outputs.push(epi.handle);
        Node::sequence(vec![Node::Band(main), Node::Band(epi)])
    };
    splice(t, &path, node);
    finish(t);
    Ok(outputs)
}

pub fn unroll_full(t: &mut ScheduleTree, h: usize) -> TResult<Vec<usize>> {
    let (path, b) = band_at(t, h)?;
    let b = b.clone();
    let count = band_count(&b)?.as_constant().ok_or(TransformError::NonConstantTripCount)?;
    if count > MAX_FULL_UNROLL {
        return Err(TransformError::UnrollTooLarge { count, limit: MAX_FULL_UNROLL });
    }
    let first = b.first.as_affine().ok_or(TransformError::NonConstantTripCount)?.clone();
    let mut copies = Vec::new();
    for k in 0..count {
        let mut c = clone_subtree(t, &b.child, (k + 1) as usize, k > 0);
        c.substitute(&b.var, &first.add_const(k * b.step)?)?;
        copies.push(c);
    }
    remove_stmts(t, &b.child);
    splice(t, &path, Node::sequence(copies));
    finish(t);
    Ok(vec![])
}

pub fn distribute(t: &mut ScheduleTree, h: usize) -> TResult<Vec<usize>> {
    let (path, b) = band_at(t, h)?;
    let b = b.clone();
    let Node::Sequence(fs) = b.child.as_ref() else { return Err(TransformError::NothingToDistribute) };
    let mut parts = Vec::new();
    let mut outputs = Vec::new();
    for (i, f) in fs.iter().enumerate() {
        let handle = if i == 0 { h } else { t.fresh_handle() };
        outputs.push(handle);
        parts.push(Node::Band(Band { handle, child: Box::new(f.child.clone()), ..b.clone() }));
    }
    splice(t, &path, Node::sequence(parts));
    finish(t);
    Ok(outputs)
}

/// Bodies of bands whose ranges agree up to a constant or parametric offset,
/// with the variable of band k replaced by `var0 + offset_k`.
fn align(bands: &[Band]) -> TResult<Vec<Node>> {
    let first = &bands[0];
    let mut children = vec![*first.child.clone()];
    for b in &bands[1..] {
        if b.step != first.step {
            return Err(TransformError::RangeMismatch);
        }
        let d = b.first.sub(&first.first)?;
        let d = d.as_affine().ok_or(TransformError::RangeMismatch)?.clone();
        if b.limit.sub(&first.limit)? != QExpr::from(d.clone()) {
            return Err(TransformError::RangeMismatch);
        }
        if bands.iter().any(|x| d.mentions(&x.var)) {
            return Err(TransformError::RangeMismatch);
        }
        let mut c = *b.child.clone();
        c.substitute(&b.var, &AffineExpr::var(&first.var).add(&d)?)?;
        children.push(c);
    }
    Ok(children)
}

fn merge_bands(bands: Vec<Band>) -> TResult<Band> {
    let children = align(&bands)?;
    Ok(Band { child: Box::new(Node::sequence(children)), ..bands[0].clone() })
}

pub fn fuse(t: &mut ScheduleTree, handles: &[usize]) -> TResult<Vec<usize>> {
    let (path, _) = band_at(t, handles[0])?;
    let Some((&idx, parent)) = path.split_last() else { return Err(TransformError::NonAdjacent) };
    let Node::Sequence(fs) = t.root.at(parent) else { return Err(TransformError::NonAdjacent) };
    let mut bands = Vec::new();
    for (k, &h) in handles.iter().enumerate() {
        match fs.get(idx + k).map(|f| &f.child) {
            Some(Node::Band(b)) if b.handle == h => bands.push(b.clone()),
            _ => return Err(TransformError::NonAdjacent),
        }
    }
    let merged = merge_bands(bands)?;
    let Node::Sequence(fs) = t.root.at_mut(parent) else { unreachable!() };
    let mut parts: Vec<Node> = fs.drain(..).map(|f| f.child).collect();
    parts.splice(idx..idx + handles.len(), [Node::Band(merged)]);
    *t.root.at_mut(parent) = Node::sequence(parts);
    finish(t);
    Ok(vec![handles[0]])
}

/// Fuses the per-copy chains produced by unrolling, level by level, down to the jam depth.
fn jam(copies: Vec<Node>, depth: usize) -> TResult<Node> {
    let mut bands = Vec::new();
    for c in copies {
        match c {
            Node::Band(b) => bands.push(b),
            _ => return Err(TransformError::JamNotNested),
        }
    }
    let children = align(&bands)?;
    let child = if depth == 1 { Node::sequence(children) } else { jam(children, depth - 1)? };
    Ok(Node::Band(Band { child: Box::new(child), ..bands[0].clone() }))
}

pub fn unroll_and_jam(t: &mut ScheduleTree, h: usize, jam_loop: Option<usize>, factor: i64) -> TResult<Vec<usize>> {
    let (_, b) = band_at(t, h)?;
    let mut chain = Vec::new();
    let mut cur = b.child.as_ref();
    while let Node::Band(inner) = cur {
        chain.push(inner.handle);
        cur = inner.child.as_ref();
    }
    let depth = match jam_loop {
        None if chain.is_empty() => return Err(TransformError::JamNotNested),
        None => chain.len(),
        Some(j) => chain.iter().position(|x| *x == j).ok_or(TransformError::JamNotNested)? + 1,
    };
    let mut work = t.clone();
    let outputs = unroll(&mut work, h, factor)?;
    let (path, _) = band_at(&work, h)?;
    let Node::Band(main) = work.root.at(&path) else { unreachable!() };
    let copies: Vec<Node> = match main.child.as_ref() {
        Node::Sequence(fs) => fs.iter().map(|f| f.child.clone()).collect(),
        other => vec![other.clone()],
    };
    let jammed = jam(copies, depth)?;
    let Node::Band(main) = work.root.at_mut(&path) else { unreachable!() };
    *main.child = jammed;
    finish(&mut work);
    *t = work;
    Ok(vec![outputs[0]])
}

#[cfg(test)]
mod tests;
