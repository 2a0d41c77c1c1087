//! Applies a program's transformation plan step by step, checking each
//! intermediate schedule against the original program's dependences.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::directives::{resolve_plan, DirectiveError, DirectiveOp, FunctionPlan, LoopRef, Plan, PlanStep, Targets, UnrollFactor};
use crate::frontend::{parse_source, Function, FrontendError, Location, Program};
use crate::legality::{decide, DependenceGrid, Violation, Policy, StepReport, Verdict, DEFAULT_GRID, DEFAULT_MAX_INSTANCES};
use crate::sched::{lower_to_tree, validate_tree, ScheduleTree};
use crate::transforms::{self, TransformError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Directive(#[from] DirectiveError),
}

impl PipelineError {
    /// The message without its leading location.
    pub fn message(&self) -> String {
        let full = self.to_string();
        let prefix = format!("{}: ", self.location());
        full.strip_prefix(&prefix).map(str::to_string).unwrap_or(full)
    }

    pub fn location(&self) -> Location {
        match self {
            PipelineError::Frontend(e) => e.location(),
            PipelineError::Directive(e) => directive_location(e),
        }
    }
}

fn directive_location(e: &DirectiveError) -> Location {
    use DirectiveError::*;
    match e {
        UnknownTransformation { loc, .. }
        | UnknownClause { loc, .. }
        | ClauseArityError { loc, .. }
        | DuplicateClause { loc, .. }
        | MissingClause { loc, .. }
        | LegacySyntax { loc, .. }
        | Malformed { loc, .. }
        | UnresolvedLoopId { loc, .. }
        | AmbiguousImplicitId { loc, .. }
        | TargetNotPerfectlyNested { loc, .. }
        | IdRedefinition { loc, .. }
        | UnknownArray { loc, .. }
        | NoTargetLoop { loc, .. } => *loc,
    }
}

#[derive(Clone, Debug)]
pub struct Options {
    pub policy: Policy,
    pub grid: Vec<i64>,
    pub max_instances: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options { policy: Policy::Error, grid: DEFAULT_GRID.to_vec(), max_instances: DEFAULT_MAX_INSTANCES }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub loc: Location,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: {sev}: {}", self.loc, self.message)
    }
}

#[derive(Clone, Debug)]
pub struct FunctionOutcome {
    pub original: Function,
    /// Final schedule; `None` when the function has no directives or could not be lowered.
    pub tree: Option<ScheduleTree>,
    pub applied: usize,
    pub steps: Vec<StepReport>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub program: Program,
    pub plan: Plan,
    pub functions: Vec<FunctionOutcome>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Outcome {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }

    pub fn reports(&self) -> Vec<StepReport> {
        self.functions.iter().flat_map(|f| f.steps.iter().cloned()).collect()
    }

    pub fn applied(&self) -> usize {
        self.functions.iter().map(|f| f.applied).sum()
    }
}

pub fn transform_source(text: &str, opts: &Options) -> Result<Outcome, PipelineError> {
    transform_program(&parse_source(text)?, opts)
}

pub fn transform_program(p: &Program, opts: &Options) -> Result<Outcome, PipelineError> {
    let plan = resolve_plan(p)?;
    let mut functions = Vec::new();
    let mut diagnostics = Vec::new();
    for (f, fp) in p.functions.iter().zip(&plan.functions) {
        functions.push(transform_function(f, fp, opts, &mut diagnostics));
    }
    Ok(Outcome { program: p.clone(), plan, functions, diagnostics })
}

struct Resolver {
    names: HashMap<String, usize>,
    outputs: HashMap<(usize, usize), usize>,
}

impl Resolver {
    fn handle(&self, tree: &ScheduleTree, r: &LoopRef) -> Result<usize, TransformError> {
        let h = match r {
            LoopRef::Original(k) => Some(*k),
            LoopRef::Named(n) => self.names.get(n).copied(),
            LoopRef::Output { step, index } => self.outputs.get(&(*step, *index)).copied(),
        };
        h.filter(|h| tree.root.find_band(*h).is_some()).ok_or(TransformError::MissingLoop)
    }

    fn targets(&self, tree: &ScheduleTree, t: &Targets) -> Result<Vec<usize>, TransformError> {
        match t {
            Targets::Explicit(v) => v.iter().map(|r| self.handle(tree, r)).collect(),
            Targets::Chain(r, len) => transforms::chain_from(tree, self.handle(tree, r)?, *len),
            Targets::WithNextSibling(r) => {
                let h = self.handle(tree, r)?;
                Ok(vec![h, transforms::next_sibling(tree, h)?])
            }
        }
    }
}

fn apply_step(
    tree: &mut ScheduleTree,
    f: &Function,
    step: &PlanStep,
    res: &Resolver,
) -> Result<Vec<usize>, TransformError> {
    let hs = res.targets(tree, &step.targets)?;
    match &step.directive.op {
        DirectiveOp::Id { .. } => Ok(hs),
        DirectiveOp::Reverse => transforms::reverse(tree, hs[0]),
        DirectiveOp::Interchange { .. } => {
            let perm = step
                .permutation
                .iter()
                .map(|r| res.handle(tree, r))
                .collect::<Result<Vec<_>, _>>()?;
            transforms::interchange(tree, &hs, &perm)
        }
        DirectiveOp::Tile { sizes, pit_ids, .. } => {
            let hints: Vec<Option<&str>> = (0..sizes.len()).map(|i| pit_ids.get(i).map(String::as_str)).collect();
            transforms::tile(tree, &hs, sizes, &hints)
        }
        DirectiveOp::StripMine { size, pit_id, .. } => transforms::stripmine(tree, hs[0], *size, pit_id.as_deref()),
        DirectiveOp::Unroll(UnrollFactor::Factor(k)) => transforms::unroll(tree, hs[0], *k),
        DirectiveOp::Unroll(UnrollFactor::Full) => transforms::unroll_full(tree, hs[0]),
        DirectiveOp::UnrollAndJam { factor } => transforms::unroll_and_jam(tree, hs[0], hs.get(1).copied(), *factor),
        DirectiveOp::Distribute { .. } => transforms::distribute(tree, hs[0]),
        DirectiveOp::Fuse => transforms::fuse(tree, &hs),
        DirectiveOp::Pack { array, allocation, layout } => {
            let decl = f.lookup(array).expect("checked during plan resolution");
            let taken: BTreeSet<String> = f.params.iter().chain(&f.locals).map(|d| d.name.clone()).collect();
            transforms::pack(tree, hs[0], decl, *allocation, layout.as_deref(), &taken)
        }
    }
}

fn set_loop_id(tree: &mut ScheduleTree, handle: usize, id: &str) {
    tree.root.visit_bands_mut(&mut |b| {
        if b.handle == handle {
            b.loop_id = Some(id.to_string());
        }
    });
}

fn binding_text(b: &std::collections::BTreeMap<String, i64>) -> String {
    b.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ")
}

pub fn transform_function(
    f: &Function,
    fp: &FunctionPlan,
    opts: &Options,
    diagnostics: &mut Vec<Diagnostic>,
) -> FunctionOutcome {
    let mut outcome = FunctionOutcome { original: f.clone(), tree: None, applied: 0, steps: Vec::new() };
    if fp.steps.is_empty() {
        return outcome;
    }
    let report = |step: &PlanStep, verdict: Verdict, detail: Option<String>, witness| StepReport {
        function: f.name.clone(),
        loc: step.directive.loc,
        kind: step.directive.kind(),
        verdict,
        detail,
        witness,
    };
    let mut tree = match lower_to_tree(f) {
        Ok(t) => t,
        Err(e) => {
            for step in &fp.steps {
                let v = decide(step.directive.forced, opts.policy, true);
                outcome.steps.push(report(step, v, Some(e.to_string()), None));
            }
            diagnostics.push(Diagnostic {
                severity: if opts.policy == Policy::Error { Severity::Error } else { Severity::Warning },
                loc: fp.steps[0].directive.loc,
                message: format!("cannot transform `{}`: {e}", f.name),
            });
            return outcome;
        }
    };
    for (key, id) in &fp.loop_ids {
        set_loop_id(&mut tree, *key, id);
    }
    let mut deps: Option<DependenceGrid> = None;
    let mut res = Resolver { names: HashMap::new(), outputs: HashMap::new() };
    for (si, step) in fp.steps.iter().enumerate() {
        let d = &step.directive;
        let mut work = tree.clone();
        let mut witness = None;
        let verdict_detail: (Verdict, Option<String>, Option<Vec<usize>>) = match apply_step(&mut work, f, step, &res) {
            Err(e) => (decide(d.forced, opts.policy, true), Some(e.to_string()), None),
            Ok(outs) if d.unchecked => (Verdict::LegalUnchecked, None, Some(outs)),
            Ok(outs) => {
                let grid = deps.get_or_insert_with(|| DependenceGrid::build(f, &opts.grid, opts.max_instances));
                match grid.check(&work, opts.max_instances) {
                    Err(e) => (decide(d.forced, opts.policy, true), Some(e.to_string()), None),
                    Ok(Some((b, v))) => {
                        let detail = format!("{v} ({})", binding_text(&b));
                        if let Violation::Reversed(dep) = v {
                            witness = Some((b, dep));
                        }
                        (decide(d.forced, opts.policy, false), Some(detail), None)
                    }
                    Ok(None) if grid.samples.is_empty() => (
                        Verdict::LegalUnchecked,
                        Some("no parameter binding of the grid could be evaluated".into()),
                        Some(outs),
                    ),
                    Ok(None) => (Verdict::Legal, None, Some(outs)),
                }
            }
        };
        let (verdict, detail, outs) = verdict_detail;
        if let Some(outs) = outs {
            for (i, h) in outs.iter().enumerate() {
                res.outputs.insert((si, i), *h);
            }
            for (idx, name) in &step.output_names {
                if let Some(h) = outs.get(*idx) {
                    res.names.insert(name.clone(), *h);
                    set_loop_id(&mut work, *h, name);
                }
            }
            tree = work;
            outcome.applied += 1;
        } else if d.forced && opts.policy != Policy::Silent {
            let what = match verdict {
                Verdict::IllegalAborted | Verdict::IllegalSkipped => {
                    format!("`{}` would violate the dependence {}", d.kind(), detail.as_deref().unwrap_or(""))
                }
                _ => format!("cannot apply `{}`: {}", d.kind(), detail.as_deref().unwrap_or("")),
            };
            let skipped = if verdict.aborted() { "" } else { "; transformation skipped" };
            diagnostics.push(Diagnostic {
                severity: if verdict.aborted() { Severity::Error } else { Severity::Warning },
                loc: d.loc,
                message: format!("{what}{skipped}"),
            });
        }
        outcome.steps.push(report(step, verdict, detail, witness));
        if verdict.aborted() {
            break;
        }
    }
    let problems = validate_tree(&tree);
    if !problems.is_empty() {
        let text: Vec<String> = problems.iter().map(|v| v.to_string()).collect();
        diagnostics.push(Diagnostic {
            severity: Severity::Error,
            loc: f.loc,
            message: format!("internal error: invalid schedule tree: {}", text.join("; ")),
        });
    }
    outcome.tree = Some(tree);
    outcome
}
