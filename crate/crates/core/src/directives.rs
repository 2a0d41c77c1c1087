//! Loop pragma parsing and per-function transformation plans.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::frontend::{pragma_body, Allocation, Function, Location, Loop, Program, Stmt};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DirectiveError {
    #[error("{loc}: unknown transformation `{name}`")]
    UnknownTransformation { loc: Location, name: String },
    #[error("{loc}: unknown clause `{clause}` for `{kind}`")]
    UnknownClause { loc: Location, kind: &'static str, clause: String },
    #[error("{loc}: clause `{clause}`: {message}")]
    ClauseArityError { loc: Location, clause: String, message: String },
    #[error("{loc}: clause `{clause}` given more than once")]
    DuplicateClause { loc: Location, clause: String },
    #[error("{loc}: `{kind}` requires the `{clause}` clause")]
    MissingClause { loc: Location, kind: &'static str, clause: &'static str },
    #[error("{loc}: old-style `{text}` is not supported; use the directive-clause form")]
    LegacySyntax { loc: Location, text: String },
    #[error("{loc}: malformed pragma: {message}")]
    Malformed { loc: Location, message: String },
    #[error("{loc}: no loop with identifier `{id}`")]
    UnresolvedLoopId { loc: Location, id: String },
    #[error("{loc}: loop identifier `{id}` is ambiguous; several loops use this counter name")]
    AmbiguousImplicitId { loc: Location, id: String },
    #[error("{loc}: `{kind}` targets are not a perfectly nested chain of loops")]
    TargetNotPerfectlyNested { loc: Location, kind: &'static str },
    #[error("{loc}: loop identifier `{id}` is defined more than once")]
    IdRedefinition { loc: Location, id: String },
    #[error("{loc}: `{array}` is not a declared array")]
    UnknownArray { loc: Location, array: String },
    #[error("{loc}: `{kind}` has no loop to apply to (the transformation below has no single output loop)")]
    NoTargetLoop { loc: Location, kind: &'static str },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DirectiveKind {
    Id,
    Reverse,
    Interchange,
    Tile,
    StripMine,
    Unroll,
    UnrollAndJam,
    Distribute,
    Fuse,
    Pack,
}

impl DirectiveKind {
    pub const ALL: [DirectiveKind; 10] = [
        DirectiveKind::Id,
        DirectiveKind::Reverse,
        DirectiveKind::Interchange,
        DirectiveKind::Tile,
        DirectiveKind::StripMine,
        DirectiveKind::Unroll,
        DirectiveKind::UnrollAndJam,
        DirectiveKind::Distribute,
        DirectiveKind::Fuse,
        DirectiveKind::Pack,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            DirectiveKind::Id => "id",
            DirectiveKind::Reverse => "reverse",
            DirectiveKind::Interchange => "interchange",
            DirectiveKind::Tile => "tile",
            DirectiveKind::StripMine => "stripmine",
            DirectiveKind::Unroll => "unroll",
            DirectiveKind::UnrollAndJam => "unroll_and_jam",
            DirectiveKind::Distribute => "distribute",
            DirectiveKind::Fuse => "fuse",
            DirectiveKind::Pack => "pack",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.keyword() == s)
    }

    /// Whether the transformation may reorder statement instances.
    pub fn reorders(self) -> bool {
        !matches!(
            self,
            DirectiveKind::Id | DirectiveKind::StripMine | DirectiveKind::Unroll | DirectiveKind::Pack
        )
    }
}

impl fmt::Display for DirectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnrollFactor {
    Factor(i64),
    Full,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DirectiveOp {
    Id { name: String },
    Reverse,
    Interchange { permutation: Vec<String> },
    Tile { sizes: Vec<i64>, pit_ids: Vec<String>, tile_ids: Vec<String> },
    StripMine { size: i64, pit_id: Option<String>, strip_id: Option<String> },
    Unroll(UnrollFactor),
    UnrollAndJam { factor: i64 },
    Distribute { ids: Vec<String> },
    Fuse,
    Pack { array: String, allocation: Allocation, layout: Option<Vec<usize>> },
}

impl DirectiveOp {
    pub fn kind(&self) -> DirectiveKind {
        match self {
            DirectiveOp::Id { .. } => DirectiveKind::Id,
            DirectiveOp::Reverse => DirectiveKind::Reverse,
            DirectiveOp::Interchange { .. } => DirectiveKind::Interchange,
            DirectiveOp::Tile { .. } => DirectiveKind::Tile,
            DirectiveOp::StripMine { .. } => DirectiveKind::StripMine,
            DirectiveOp::Unroll(_) => DirectiveKind::Unroll,
            DirectiveOp::UnrollAndJam { .. } => DirectiveKind::UnrollAndJam,
            DirectiveOp::Distribute { .. } => DirectiveKind::Distribute,
            DirectiveOp::Fuse => DirectiveKind::Fuse,
            DirectiveOp::Pack { .. } => DirectiveKind::Pack,
        }
    }

    /// Identifiers this directive gives to its output loops.
    pub fn introduced_ids(&self) -> Vec<&str> {
        match self {
            DirectiveOp::Id { name } => vec![name],
            DirectiveOp::Tile { pit_ids, tile_ids, .. } => {
                pit_ids.iter().chain(tile_ids).map(String::as_str).collect()
            }
            DirectiveOp::StripMine { pit_id, strip_id, .. } => {
                pit_id.iter().chain(strip_id).map(String::as_str).collect()
            }
            DirectiveOp::Distribute { ids } => ids.iter().map(String::as_str).collect(),
            _ => vec![],
        }
    }
}

/// One parsed loop pragma.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Directive {
    pub op: DirectiveOp,
    /// Loop identifiers from the `loop(...)` form; empty means "the next loop".
    pub targets: Vec<String>,
    /// False when the `hint` clause is present.
    pub forced: bool,
    /// The `unsafe` clause: skip legality checking.
    pub unchecked: bool,
    pub loc: Location,
}

impl Directive {
    pub fn kind(&self) -> DirectiveKind {
        self.op.kind()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum PTok {
    Word(String),
    Int(i64),
    Open,
    Close,
    Comma,
}

fn lex_pragma(body: &str, loc: Location) -> Result<Vec<PTok>, DirectiveError> {
    let mut out = Vec::new();
    let chars: Vec<char> = body.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                out.push(PTok::Open);
                i += 1;
            }
            ')' => {
                out.push(PTok::Close);
                i += 1;
            }
            ',' => {
                out.push(PTok::Comma);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '-' => {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v = s.parse::<i64>().map_err(|_| DirectiveError::Malformed {
                    loc,
                    message: format!("bad integer `{s}`"),
                })?;
                out.push(PTok::Int(v));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(PTok::Word(chars[start..i].iter().collect()));
            }
            other => {
                return Err(DirectiveError::Malformed {
                    loc,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

const LEGACY_OPTIONS: &[&str] = &[
    "vectorize",
    "vectorize_width",
    "vectorize_predicate",
    "interleave",
    "interleave_count",
    "unroll",
    "unroll_count",
    "unroll_and_jam",
    "distribute",
    "pipeline",
    "pipeline_initiation_interval",
];

#[derive(Clone, Debug, PartialEq)]
enum Arg {
    Word(String),
    Int(i64),
}

/// Parses `( arg, arg, ... )` starting at `*pos` (which must be an opening paren).
fn parse_args(toks: &[PTok], pos: &mut usize, loc: Location) -> Result<Vec<Arg>, DirectiveError> {
    debug_assert_eq!(toks.get(*pos), Some(&PTok::Open));
    *pos += 1;
    let mut args = Vec::new();
    if toks.get(*pos) == Some(&PTok::Close) {
        *pos += 1;
        return Ok(args);
    }
    loop {
        match toks.get(*pos) {
            Some(PTok::Word(w)) => args.push(Arg::Word(w.clone())),
            Some(PTok::Int(v)) => args.push(Arg::Int(*v)),
            _ => {
                return Err(DirectiveError::Malformed { loc, message: "expected an argument".into() })
            }
        }
        *pos += 1;
        match toks.get(*pos) {
            Some(PTok::Comma) => *pos += 1,
            Some(PTok::Close) => {
                *pos += 1;
                return Ok(args);
            }
            _ => {
                return Err(DirectiveError::Malformed { loc, message: "expected `,` or `)`".into() })
            }
        }
    }
}

/// Parses one pragma line (with its `#pragma clang loop` / `#pragma loop` prefix).
pub fn parse_directive(line: &str, loc: Location) -> Result<Directive, DirectiveError> {
    let body = pragma_body(line.trim()).ok_or_else(|| DirectiveError::Malformed {
        loc,
        message: "expected `#pragma clang loop` or `#pragma loop`".into(),
    })?;
    let toks = lex_pragma(body, loc)?;
    let mut pos = 0;
    let mut targets = Vec::new();
    if toks.first() == Some(&PTok::Open) {
        for a in parse_args(&toks, &mut pos, loc)? {
            match a {
                Arg::Word(w) => targets.push(w),
                Arg::Int(v) => {
                    return Err(DirectiveError::Malformed {
                        loc,
                        message: format!("loop identifier expected, found `{v}`"),
                    })
                }
            }
        }
        if targets.is_empty() {
            return Err(DirectiveError::Malformed { loc, message: "empty loop list".into() });
        }
    }
    let kw = match toks.get(pos) {
        Some(PTok::Word(w)) => w.clone(),
        _ => return Err(DirectiveError::Malformed { loc, message: "missing transformation".into() }),
    };
    pos += 1;
    let kind = match DirectiveKind::from_keyword(&kw) {
        Some(k) if k != DirectiveKind::Id && toks.get(pos) == Some(&PTok::Open) => {
            return Err(DirectiveError::LegacySyntax { loc, text: format!("{kw}(...)") })
        }
        Some(k) => k,
        None if LEGACY_OPTIONS.contains(&kw.as_str()) => {
            return Err(DirectiveError::LegacySyntax { loc, text: kw })
        }
        None => return Err(DirectiveError::UnknownTransformation { loc, name: kw }),
    };

    let mut clauses: BTreeMap<String, Option<Vec<Arg>>> = BTreeMap::new();
    let mut id_name = None;
    if kind == DirectiveKind::Id {
        if toks.get(pos) != Some(&PTok::Open) {
            return Err(DirectiveError::ClauseArityError {
                loc,
                clause: "id".into(),
                message: "expects one loop identifier".into(),
            });
        }
        match parse_args(&toks, &mut pos, loc)?.as_slice() {
            [Arg::Word(w)] => id_name = Some(w.clone()),
            _ => {
                return Err(DirectiveError::ClauseArityError {
                    loc,
                    clause: "id".into(),
                    message: "expects one loop identifier".into(),
                })
            }
        }
    }
    while pos < toks.len() {
        let name = match &toks[pos] {
            PTok::Word(w) => w.clone(),
            _ => return Err(DirectiveError::Malformed { loc, message: "expected a clause".into() }),
        };
        pos += 1;
        if !clause_allowed(kind, &name) {
            return Err(DirectiveError::UnknownClause { loc, kind: kind.keyword(), clause: name });
        }
        let args = if toks.get(pos) == Some(&PTok::Open) {
            Some(parse_args(&toks, &mut pos, loc)?)
        } else {
            None
        };
        if clauses.insert(name.clone(), args).is_some() {
            return Err(DirectiveError::DuplicateClause { loc, clause: name });
        }
    }

    let forced = clauses.remove("hint").is_none();
    let unchecked = clauses.remove("unsafe").is_some();
    let mut c = Clauses { loc, map: clauses };
    let op = match kind {
        DirectiveKind::Id => DirectiveOp::Id { name: id_name.expect("parsed above") },
        DirectiveKind::Reverse => DirectiveOp::Reverse,
        DirectiveKind::Fuse => DirectiveOp::Fuse,
        DirectiveKind::Interchange => {
            let permutation = c.required_words(kind, "permutation")?;
            if permutation.len() < 2 {
                return Err(c.arity("permutation", "needs at least two loops"));
            }
            if !targets.is_empty() && permutation.len() != targets.len() {
                return Err(c.arity("permutation", "length must equal the number of target loops"));
            }
            DirectiveOp::Interchange { permutation }
        }
        DirectiveKind::Tile => {
            let sizes = c.required_ints(kind, "sizes")?;
            if sizes.is_empty() {
                return Err(c.arity("sizes", "needs at least one size"));
            }
            if sizes.iter().any(|s| *s < 1) {
                return Err(c.arity("sizes", "tile sizes must be positive"));
            }
            if !targets.is_empty() && sizes.len() != targets.len() {
                return Err(c.arity("sizes", "length must equal the number of target loops"));
            }
            let pit_ids = c.optional_words("pit_ids")?.unwrap_or_default();
            let tile_ids = c.optional_words("tile_ids")?.unwrap_or_default();
            if !pit_ids.is_empty() && pit_ids.len() != sizes.len() {
                return Err(c.arity("pit_ids", "length must equal the number of sizes"));
            }
            if !tile_ids.is_empty() && tile_ids.len() != sizes.len() {
                return Err(c.arity("tile_ids", "length must equal the number of sizes"));
            }
            DirectiveOp::Tile { sizes, pit_ids, tile_ids }
        }
        DirectiveKind::StripMine => {
            let size = c.required_int(kind, "size")?;
            if size < 2 {
                return Err(c.arity("size", "strip size must be at least 2"));
            }
            let pit_id = c.optional_word("pit_id")?;
            let strip_id = c.optional_word("strip_id")?;
            DirectiveOp::StripMine { size, pit_id, strip_id }
        }
        DirectiveKind::Unroll => {
            let full = c.flag("full")?;
            let factor = c.optional_int("factor")?;
            match (full, factor) {
                (true, None) => DirectiveOp::Unroll(UnrollFactor::Full),
                (false, Some(f)) if f >= 2 => DirectiveOp::Unroll(UnrollFactor::Factor(f)),
                (false, Some(_)) => return Err(c.arity("factor", "unroll factor must be at least 2")),
                (true, Some(_)) => return Err(c.arity("full", "`full` and `factor` are exclusive")),
                (false, None) => {
                    return Err(DirectiveError::MissingClause { loc, kind: kind.keyword(), clause: "factor" })
                }
            }
        }
        DirectiveKind::UnrollAndJam => {
            let factor = c.required_int(kind, "factor")?;
            if factor < 2 {
                return Err(c.arity("factor", "unroll factor must be at least 2"));
            }
            DirectiveOp::UnrollAndJam { factor }
        }
        DirectiveKind::Distribute => {
            DirectiveOp::Distribute { ids: c.optional_words("ids")?.unwrap_or_default() }
        }
        DirectiveKind::Pack => {
            let array = match c.required_words(kind, "array")?.as_slice() {
                [a] => a.clone(),
                _ => return Err(c.arity("array", "expects exactly one array name")),
            };
            let allocation = match c.optional_word("allocate")?.as_deref() {
                None => Allocation::Stack,
                Some("malloc") => Allocation::Heap,
                Some(other) => {
                    return Err(c.arity("allocate", &format!("unsupported allocator `{other}`")))
                }
            };
            let layout = match c.optional_ints("layout")? {
                None => None,
                Some(v) if v.iter().any(|x| *x < 0) => {
                    return Err(c.arity("layout", "dimension indices must be non-negative"))
                }
                Some(v) => Some(v.into_iter().map(|x| x as usize).collect()),
            };
            DirectiveOp::Pack { array, allocation, layout }
        }
    };
    let max_targets = match kind {
        DirectiveKind::Id
        | DirectiveKind::Reverse
        | DirectiveKind::StripMine
        | DirectiveKind::Unroll
        | DirectiveKind::Distribute
        | DirectiveKind::Pack => 1,
        DirectiveKind::UnrollAndJam => 2,
        _ => usize::MAX,
    };
    if targets.len() > max_targets {
        return Err(DirectiveError::ClauseArityError {
            loc,
            clause: "loop".into(),
            message: format!("`{kind}` takes at most {max_targets} target loop(s)"),
        });
    }
    if kind == DirectiveKind::Fuse && targets.len() == 1 {
        return Err(DirectiveError::ClauseArityError {
            loc,
            clause: "loop".into(),
            message: "`fuse` needs at least two target loops".into(),
        });
    }
    if kind == DirectiveKind::Id && !targets.is_empty() {
        return Err(DirectiveError::ClauseArityError {
            loc,
            clause: "loop".into(),
            message: "`id` applies to the next loop only".into(),
        });
    }
    Ok(Directive { op, targets, forced, unchecked, loc })
}

fn clause_allowed(kind: DirectiveKind, clause: &str) -> bool {
    if clause == "hint" || clause == "unsafe" {
        return kind != DirectiveKind::Id;
    }
    let allowed: &[&str] = match kind {
        DirectiveKind::Id | DirectiveKind::Reverse | DirectiveKind::Fuse => &[],
        DirectiveKind::Interchange => &["permutation"],
        DirectiveKind::Tile => &["sizes", "pit_ids", "tile_ids"],
        DirectiveKind::StripMine => &["size", "pit_id", "strip_id"],
        DirectiveKind::Unroll => &["factor", "full"],
        DirectiveKind::UnrollAndJam => &["factor"],
        DirectiveKind::Distribute => &["ids"],
        DirectiveKind::Pack => &["array", "allocate", "layout"],
    };
    allowed.contains(&clause)
}

struct Clauses {
    loc: Location,
    map: BTreeMap<String, Option<Vec<Arg>>>,
}

impl Clauses {
    fn arity(&self, clause: &str, message: &str) -> DirectiveError {
        DirectiveError::ClauseArityError { loc: self.loc, clause: clause.into(), message: message.into() }
    }

    fn flag(&mut self, name: &str) -> Result<bool, DirectiveError> {
        match self.map.remove(name) {
            None => Ok(false),
            Some(None) => Ok(true),
            Some(Some(_)) => Err(self.arity(name, "takes no arguments")),
        }
    }

    fn args(&mut self, name: &str) -> Result<Option<Vec<Arg>>, DirectiveError> {
        match self.map.remove(name) {
            None => Ok(None),
            Some(None) => Err(self.arity(name, "expects a parenthesized argument list")),
            Some(Some(a)) if a.is_empty() => Err(self.arity(name, "expects at least one argument")),
            Some(Some(a)) => Ok(Some(a)),
        }
    }

    fn optional_words(&mut self, name: &str) -> Result<Option<Vec<String>>, DirectiveError> {
        let Some(args) = self.args(name)? else { return Ok(None) };
        args.into_iter()
            .map(|a| match a {
                Arg::Word(w) => Ok(w),
                Arg::Int(_) => Err(self.arity(name, "expects identifiers")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn optional_ints(&mut self, name: &str) -> Result<Option<Vec<i64>>, DirectiveError> {
        let Some(args) = self.args(name)? else { return Ok(None) };
        args.into_iter()
            .map(|a| match a {
                Arg::Int(v) => Ok(v),
                Arg::Word(_) => Err(self.arity(name, "expects integer constants")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn optional_word(&mut self, name: &str) -> Result<Option<String>, DirectiveError> {
        match self.optional_words(name)? {
            None => Ok(None),
            Some(v) if v.len() == 1 => Ok(v.into_iter().next()),
            Some(_) => Err(self.arity(name, "expects exactly one identifier")),
        }
    }

    fn optional_int(&mut self, name: &str) -> Result<Option<i64>, DirectiveError> {
        match self.optional_ints(name)? {
            None => Ok(None),
            Some(v) if v.len() == 1 => Ok(Some(v[0])),
            Some(_) => Err(self.arity(name, "expects exactly one integer")),
        }
    }

    fn required_words(&mut self, kind: DirectiveKind, name: &'static str) -> Result<Vec<String>, DirectiveError> {
        self.optional_words(name)?.ok_or(DirectiveError::MissingClause {
            loc: self.loc,
            kind: kind.keyword(),
            clause: name,
        })
    }

    fn required_ints(&mut self, kind: DirectiveKind, name: &'static str) -> Result<Vec<i64>, DirectiveError> {
        self.optional_ints(name)?.ok_or(DirectiveError::MissingClause {
            loc: self.loc,
            kind: kind.keyword(),
            clause: name,
        })
    }

    fn required_int(&mut self, kind: DirectiveKind, name: &'static str) -> Result<i64, DirectiveError> {
        self.optional_int(name)?.ok_or(DirectiveError::MissingClause {
            loc: self.loc,
            kind: kind.keyword(),
            clause: name,
        })
    }
}

/// A reference to a loop as known at plan time.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LoopRef {
    /// A loop of the source, by pre-order key.
    Original(usize),
    /// A loop named by an output-id clause of an earlier step.
    Named(String),
    /// An unnamed output loop of an earlier step.
    Output { step: usize, index: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Targets {
    Explicit(Vec<LoopRef>),
    /// The loop and its perfectly nested descendants, `len` loops in total.
    Chain(LoopRef, usize),
    /// The loop and its next sibling (target-less `fuse`).
    WithNextSibling(LoopRef),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanStep {
    pub directive: Directive,
    pub targets: Targets,
    /// Resolved `permutation(...)` of an interchange.
    pub permutation: Vec<LoopRef>,
    /// Output identifiers that name loops, in output order.
    pub output_names: Vec<(usize, String)>,
    /// Human-readable form for plan dumps.
    pub display: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionPlan {
    pub function: String,
    pub steps: Vec<PlanStep>,
    /// Identifier of each source loop (explicit `id`, else its counter when unambiguous).
    pub loop_ids: BTreeMap<usize, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Plan {
    pub functions: Vec<FunctionPlan>,
}

impl Plan {
    pub fn function(&self, name: &str) -> Option<&FunctionPlan> {
        self.functions.iter().find(|f| f.function == name)
    }

    pub fn is_empty(&self) -> bool {
        self.functions.iter().all(|f| f.steps.is_empty())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum NameEntry {
    Implicit(usize),
    Ambiguous,
    Bound(LoopRef),
}

struct LoopInfo<'a> {
    l: &'a Loop,
    directives: Vec<Directive>,
}

pub fn resolve_plan(program: &Program) -> Result<Plan, DirectiveError> {
    let mut plan = Plan::default();
    for f in &program.functions {
        plan.functions.push(resolve_function(f)?);
    }
    Ok(plan)
}

/// Post-order over loops: nested loops first, siblings in source order.
fn post_order<'a>(body: &'a [Stmt], out: &mut Vec<&'a Loop>) {
    for s in body {
        match s {
            Stmt::For(l) => {
                post_order(&l.body, out);
                out.push(l);
            }
            Stmt::Block(b) => post_order(b, out),
            Stmt::If(i) => {
                post_order(&i.then_body, out);
                post_order(&i.else_body, out);
            }
            Stmt::Assign(_) | Stmt::Call(_) => {}
        }
    }
}

/// The single loop directly forming `l`'s body, if the body is exactly one loop.
pub fn sole_inner_loop(l: &Loop) -> Option<&Loop> {
    let mut body: &[Stmt] = &l.body;
    loop {
        match body {
            [Stmt::For(inner)] => return Some(inner),
            [Stmt::Block(b)] => body = b,
            _ => return None,
        }
    }
}

pub fn resolve_function(f: &Function) -> Result<FunctionPlan, DirectiveError> {
    let mut order = Vec::new();
    post_order(&f.body, &mut order);
    let all_loops = f.loops();
    let by_key: HashMap<usize, &Loop> = all_loops.iter().map(|l| (l.key, *l)).collect();

    let mut infos = Vec::new();
    for l in &order {
        let directives = l
            .pragmas
            .iter()
            .map(|p| parse_directive(&p.text, p.loc))
            .collect::<Result<Vec<_>, _>>()?;
        infos.push(LoopInfo { l, directives });
    }

    let mut names: HashMap<String, NameEntry> = HashMap::new();
    for l in &all_loops {
        let e = names.entry(l.counter.clone()).or_insert(NameEntry::Implicit(l.key));
        if *e != NameEntry::Implicit(l.key) {
            *e = NameEntry::Ambiguous;
        }
    }
    let mut loop_ids: BTreeMap<usize, String> = BTreeMap::new();
    // Explicit ids directly above a source loop name that loop.
    for info in &infos {
        if let Some(Directive { op: DirectiveOp::Id { name }, loc, .. }) = info.directives.last() {
            if matches!(names.get(name), Some(NameEntry::Bound(_))) {
                return Err(DirectiveError::IdRedefinition { loc: *loc, id: name.clone() });
            }
            names.insert(name.clone(), NameEntry::Bound(LoopRef::Original(info.l.key)));
            loop_ids.insert(info.l.key, name.clone());
        }
    }
    for l in &all_loops {
        if !loop_ids.contains_key(&l.key)
            && names.get(&l.counter) == Some(&NameEntry::Implicit(l.key))
        {
            loop_ids.insert(l.key, l.counter.clone());
        }
    }

    let lookup = |names: &HashMap<String, NameEntry>, id: &str, loc: Location| -> Result<LoopRef, DirectiveError> {
        match names.get(id) {
            Some(NameEntry::Implicit(k)) => Ok(LoopRef::Original(*k)),
            Some(NameEntry::Bound(r)) => Ok(r.clone()),
            Some(NameEntry::Ambiguous) => Err(DirectiveError::AmbiguousImplicitId { loc, id: id.into() }),
            None => Err(DirectiveError::UnresolvedLoopId { loc, id: id.into() }),
        }
    };

    let mut steps: Vec<PlanStep> = Vec::new();
    for info in &infos {
        let mut current: Option<LoopRef> = Some(LoopRef::Original(info.l.key));
        for (pos, d) in info.directives.iter().rev().enumerate() {
            let kind = d.kind();
            if let DirectiveOp::Id { name } = &d.op {
                if pos == 0 {
                    continue;
                }
                let r = current.clone().ok_or(DirectiveError::NoTargetLoop { loc: d.loc, kind: kind.keyword() })?;
                if matches!(names.get(name), Some(NameEntry::Bound(_))) {
                    return Err(DirectiveError::IdRedefinition { loc: d.loc, id: name.clone() });
                }
                names.insert(name.clone(), NameEntry::Bound(r));
                continue;
            }
            let explicit = d
                .targets
                .iter()
                .map(|t| lookup(&names, t, d.loc))
                .collect::<Result<Vec<_>, _>>()?;
            let need_current = || current.clone().ok_or(DirectiveError::NoTargetLoop { loc: d.loc, kind: kind.keyword() });
            let targets = if !explicit.is_empty() {
                Targets::Explicit(explicit.clone())
            } else {
                match &d.op {
                    DirectiveOp::Tile { sizes, .. } => Targets::Chain(need_current()?, sizes.len()),
                    DirectiveOp::Interchange { permutation } => {
                        Targets::Chain(need_current()?, permutation.len())
                    }
                    DirectiveOp::Fuse => Targets::WithNextSibling(need_current()?),
                    _ => Targets::Explicit(vec![need_current()?]),
                }
            };
            let permutation = match &d.op {
                DirectiveOp::Interchange { permutation } => {
                    let refs = permutation
                        .iter()
                        .map(|p| lookup(&names, p, d.loc))
                        .collect::<Result<Vec<_>, _>>()?;
                    if !d.targets.is_empty() {
                        let mut a = d.targets.clone();
                        let mut b = permutation.clone();
                        a.sort();
                        b.sort();
                        if a != b {
                            return Err(DirectiveError::ClauseArityError {
                                loc: d.loc,
                                clause: "permutation".into(),
                                message: "must be a permutation of the target loops".into(),
                            });
                        }
                    }
                    refs
                }
                _ => Vec::new(),
            };
            check_static_nesting(d, &targets, &by_key)?;
            if let DirectiveOp::Pack { array, .. } = &d.op {
                if f.lookup(array).is_none_or(|decl| decl.rank() == 0) {
                    return Err(DirectiveError::UnknownArray { loc: d.loc, array: array.clone() });
                }
            }
            let step_idx = steps.len();
            let mut output_names = Vec::new();
            match &d.op {
                DirectiveOp::Tile { pit_ids, tile_ids, sizes } => {
                    for (i, id) in pit_ids.iter().enumerate() {
                        output_names.push((i, id.clone()));
                    }
                    for (i, id) in tile_ids.iter().enumerate() {
                        output_names.push((sizes.len() + i, id.clone()));
                    }
                }
                DirectiveOp::StripMine { pit_id, strip_id, .. } => {
                    if let Some(p) = pit_id {
                        output_names.push((0, p.clone()));
                    }
                    if let Some(s) = strip_id {
                        output_names.push((1, s.clone()));
                    }
                }
                DirectiveOp::Distribute { ids } => {
                    for (i, id) in ids.iter().enumerate() {
                        output_names.push((i, id.clone()));
                    }
                }
                _ => {}
            }
            for (_, id) in &output_names {
                if names.contains_key(id) {
                    return Err(DirectiveError::IdRedefinition { loc: d.loc, id: id.clone() });
                }
                names.insert(id.clone(), NameEntry::Bound(LoopRef::Named(id.clone())));
            }
            let first_target = match &targets {
                Targets::Explicit(v) => v.first().cloned(),
                Targets::Chain(r, _) | Targets::WithNextSibling(r) => Some(r.clone()),
            };
            let output_ref = |index: usize| -> LoopRef {
                output_names
                    .iter()
                    .find(|(i, _)| *i == index)
                    .map(|(_, n)| LoopRef::Named(n.clone()))
                    .unwrap_or(LoopRef::Output { step: step_idx, index })
            };
            current = match &d.op {
                DirectiveOp::Reverse
                | DirectiveOp::Pack { .. }
                | DirectiveOp::UnrollAndJam { .. }
                | DirectiveOp::Fuse
                | DirectiveOp::Unroll(UnrollFactor::Factor(_)) => first_target,
                DirectiveOp::Interchange { .. } => permutation.first().cloned(),
                DirectiveOp::Tile { .. } | DirectiveOp::StripMine { .. } => Some(output_ref(0)),
                DirectiveOp::Unroll(UnrollFactor::Full) | DirectiveOp::Distribute { .. } => None,
                DirectiveOp::Id { .. } => unreachable!(),
            };
            let display = display_step(d, &targets, &loop_ids, &by_key);
            steps.push(PlanStep { directive: d.clone(), targets, permutation, output_names, display });
        }
    }
    Ok(FunctionPlan { function: f.name.clone(), steps, loop_ids })
}

fn check_static_nesting(
    d: &Directive,
    targets: &Targets,
    by_key: &HashMap<usize, &Loop>,
) -> Result<(), DirectiveError> {
    if !matches!(d.kind(), DirectiveKind::Tile | DirectiveKind::Interchange) {
        return Ok(());
    }
    let err = DirectiveError::TargetNotPerfectlyNested { loc: d.loc, kind: d.kind().keyword() };
    match targets {
        Targets::Chain(LoopRef::Original(k), len) => {
            let mut cur = by_key[k];
            for _ in 1..*len {
                cur = sole_inner_loop(cur).ok_or(err.clone())?;
            }
            Ok(())
        }
        Targets::Explicit(refs) if refs.iter().all(|r| matches!(r, LoopRef::Original(_))) => {
            for w in refs.windows(2) {
                let (LoopRef::Original(a), LoopRef::Original(b)) = (&w[0], &w[1]) else { unreachable!() };
                match sole_inner_loop(by_key[a]) {
                    Some(inner) if inner.key == *b => {}
                    _ => return Err(err),
                }
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn ref_name(r: &LoopRef, loop_ids: &BTreeMap<usize, String>, by_key: &HashMap<usize, &Loop>) -> String {
    match r {
        LoopRef::Original(k) => loop_ids
            .get(k)
            .cloned()
            .unwrap_or_else(|| format!("{}@{}", by_key[k].counter, by_key[k].loc)),
        LoopRef::Named(n) => n.clone(),
        LoopRef::Output { step, index } => format!("%{}.{}", step + 1, index),
    }
}

fn display_step(
    d: &Directive,
    targets: &Targets,
    loop_ids: &BTreeMap<usize, String>,
    by_key: &HashMap<usize, &Loop>,
) -> String {
    let name = |r: &LoopRef| ref_name(r, loop_ids, by_key);
    let target_text = match targets {
        Targets::Explicit(v) => v.iter().map(name).collect::<Vec<_>>().join(","),
        Targets::Chain(r, len) if *len == 1 => name(r),
        Targets::Chain(r, len) => format!("{} +{} nested", name(r), len - 1),
        Targets::WithNextSibling(r) => format!("{},<next>", name(r)),
    };
    let mut s = format!("{} loop({})", d.kind(), target_text);
    let list = |v: &[String]| v.join(",");
    match &d.op {
        DirectiveOp::Interchange { permutation } => s += &format!(" permutation({})", list(permutation)),
        DirectiveOp::Tile { sizes, pit_ids, tile_ids } => {
            let sz: Vec<String> = sizes.iter().map(i64::to_string).collect();
            s += &format!(" sizes({})", sz.join(","));
            if !pit_ids.is_empty() {
                s += &format!(" pit_ids({})", list(pit_ids));
            }
            if !tile_ids.is_empty() {
                s += &format!(" tile_ids({})", list(tile_ids));
            }
        }
        DirectiveOp::StripMine { size, pit_id, strip_id } => {
            s += &format!(" size({size})");
            if let Some(p) = pit_id {
                s += &format!(" pit_id({p})");
            }
            if let Some(q) = strip_id {
                s += &format!(" strip_id({q})");
            }
        }
        DirectiveOp::Unroll(UnrollFactor::Factor(f)) | DirectiveOp::UnrollAndJam { factor: f } => {
            s += &format!(" factor({f})")
        }
        DirectiveOp::Unroll(UnrollFactor::Full) => s += " full",
        DirectiveOp::Distribute { ids } if !ids.is_empty() => s += &format!(" ids({})", list(ids)),
        DirectiveOp::Pack { array, allocation, layout } => {
            s += &format!(" array({array})");
            if *allocation == Allocation::Heap {
                s += " allocate(malloc)";
            }
            if let Some(l) = layout {
                let l: Vec<String> = l.iter().map(usize::to_string).collect();
                s += &format!(" layout({})", l.join(","));
            }
        }
        _ => {}
    }
    if !d.forced {
        s += " hint";
    }
    if d.unchecked {
        s += " unsafe";
    }
    s
}

/// One line per planned directive, in application order.
pub fn dump_plan(plan: &Plan) -> String {
    let mut out = String::new();
    for f in &plan.functions {
        for step in &f.steps {
            out.push_str(&step.display);
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;

    fn parse(line: &str) -> Result<Directive, DirectiveError> {
        parse_directive(line, Location::new(1, 1))
    }

    #[test]
    fn tile_with_targets() {
        let d = parse("#pragma clang loop(i,j) tile sizes(4,8)").unwrap();
        assert_eq!(d.targets, vec!["i", "j"]);
        assert_eq!(
            d.op,
            DirectiveOp::Tile { sizes: vec![4, 8], pit_ids: vec![], tile_ids: vec![] }
        );
        assert!(d.forced);
    }

    #[test]
    fn id_and_alias_prefix() {
        let d = parse("#pragma clang loop id(i)").unwrap();
        assert_eq!(d.op, DirectiveOp::Id { name: "i".into() });
        let d = parse("#pragma loop unroll factor(2) hint").unwrap();
        assert_eq!(d.op, DirectiveOp::Unroll(UnrollFactor::Factor(2)));
        assert!(!d.forced);
    }

    #[test]
    fn structured_errors() {
        assert!(matches!(parse("#pragma clang loop reverse reverse"), Err(DirectiveError::UnknownClause { .. })));
        assert!(matches!(parse("#pragma clang loop skew"), Err(DirectiveError::UnknownTransformation { .. })));
        assert!(matches!(parse("#pragma clang loop vectorize(enable)"), Err(DirectiveError::LegacySyntax { .. })));
        assert!(matches!(parse("#pragma clang loop unroll(enable)"), Err(DirectiveError::LegacySyntax { .. })));
        assert!(matches!(
            parse("#pragma clang loop unroll factor(2) factor(3)"),
            Err(DirectiveError::DuplicateClause { .. })
        ));
        assert!(matches!(
            parse("#pragma clang loop(i,j) tile sizes(4)"),
            Err(DirectiveError::ClauseArityError { .. })
        ));
        assert!(matches!(
            parse("#pragma clang loop unroll factor(1)"),
            Err(DirectiveError::ClauseArityError { .. })
        ));
        assert!(matches!(
            parse("#pragma clang loop(i,j) interchange permutation(j)"),
            Err(DirectiveError::ClauseArityError { .. })
        ));
        assert!(matches!(parse("#pragma clang loop stripmine"), Err(DirectiveError::MissingClause { .. })));
    }

    #[test]
    fn clause_order_is_irrelevant() {
        let a = parse("#pragma clang loop tile sizes(2,3) pit_ids(a,b) tile_ids(c,d)").unwrap();
        let b = parse("#pragma clang loop tile tile_ids(c,d) sizes(2,3) pit_ids(a,b)").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stacked_unroll_then_reverse() {
        let src = "void f() {\n#pragma clang loop reverse\n#pragma clang loop unroll factor(2)\nfor (int i = 0; i < 128; i+=1)\n  Stmt(i);\n}";
        let p = parse_source(src).unwrap();
        let plan = resolve_plan(&p).unwrap();
        let text = dump_plan(&plan);
        assert_eq!(text, "unroll loop(i) factor(2)\nreverse loop(i)\n");
    }

    #[test]
    fn matmul_chain_plan() {
        let src = r#"
void matmul(int M, int N, int K, double C[M][N], double A[M][K], double B[K][N]) {
  #pragma clang loop(j2) pack array(A)
  #pragma clang loop(i1) pack array(B)
  #pragma clang loop(i1,j1,k1,i2,j2,k2) interchange \
          permutation(j1,k1,i1,j2,i2,k2)
  #pragma clang loop(i,j,k) tile sizes(96,2048,256) \
          pit_ids(i1,j1,k1) tile_ids(i2,j2,k2)
  #pragma clang loop id(i)
  for (int i = 0; i < M; i+=1)
    #pragma clang loop id(j)
    for (int j = 0; j < N; j+=1)
      #pragma clang loop id(k)
      for (int k = 0; k < K; k+=1)
        C[i][j] += A[i][k] * B[k][j];
}
"#;
        let plan = resolve_plan(&parse_source(src).unwrap()).unwrap();
        let lines: Vec<String> = dump_plan(&plan).lines().map(String::from).collect();
        assert_eq!(
            lines,
            vec![
                "tile loop(i,j,k) sizes(96,2048,256) pit_ids(i1,j1,k1) tile_ids(i2,j2,k2)",
                "interchange loop(i1,j1,k1,i2,j2,k2) permutation(j1,k1,i1,j2,i2,k2)",
                "pack loop(i1) array(B)",
                "pack loop(j2) array(A)",
            ]
        );
    }

    #[test]
    fn ambiguous_and_unresolved_ids() {
        let src = "void f(int n, int A[n]) {\n#pragma clang loop(i) reverse\nfor (int i = 0; i < n; i+=1) A[i] = 0;\nfor (int i = 0; i < n; i+=1) A[i] = 1;\n}";
        let err = resolve_plan(&parse_source(src).unwrap()).unwrap_err();
        assert!(matches!(err, DirectiveError::AmbiguousImplicitId { .. }), "{err}");
        let src = "void f(int n, int A[n]) {\n#pragma clang loop(q) reverse\nfor (int i = 0; i < n; i+=1) A[i] = 0;\n}";
        let err = resolve_plan(&parse_source(src).unwrap()).unwrap_err();
        assert!(matches!(err, DirectiveError::UnresolvedLoopId { .. }));
    }

    #[test]
    fn redefinition_and_nesting_errors() {
        let src = "void f(int n, int A[n][n]) {\n#pragma clang loop id(x)\nfor (int i = 0; i < n; i+=1)\n#pragma clang loop id(x)\nfor (int j = 0; j < n; j+=1) A[i][j] = 0;\n}";
        let err = resolve_plan(&parse_source(src).unwrap()).unwrap_err();
        assert!(matches!(err, DirectiveError::IdRedefinition { .. }));
        let src = "void f(int n, int A[n][n]) {\n#pragma clang loop(i,j) tile sizes(2,2)\nfor (int i = 0; i < n; i+=1) { A[i][0] = 1; for (int j = 0; j < n; j+=1) A[i][j] = 0; }\n}";
        let err = resolve_plan(&parse_source(src).unwrap()).unwrap_err();
        assert!(matches!(err, DirectiveError::TargetNotPerfectlyNested { .. }));
    }

    #[test]
    fn inner_stacks_come_first() {
        let src = "void f(int n, int A[n][n]) {\n#pragma clang loop reverse\nfor (int i = 0; i < n; i+=1)\n#pragma clang loop unroll factor(2)\nfor (int j = 0; j < n; j+=1) A[i][j] = 0;\n}";
        let plan = resolve_plan(&parse_source(src).unwrap()).unwrap();
        assert_eq!(dump_plan(&plan), "unroll loop(j) factor(2)\nreverse loop(i)\n");
    }

    #[test]
    fn no_pragmas_means_empty_plan() {
        let src = "void f(int n, int A[n]) { for (int i = 0; i < n; i+=1) A[i] = 0; }";
        assert!(resolve_plan(&parse_source(src).unwrap()).unwrap().is_empty());
    }
}
