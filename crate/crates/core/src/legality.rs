//! Instance-level legality: dependences of the original program, observed by
//! running it on a finite grid of parameter values, must still point forward
//! in the transformed execution order.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::frontend::{Function, Location};
use crate::interp::{run_function, Instance, InterpConfig, InterpError};
use crate::sched::{enumerate_order, SchedError, ScheduleTree};

pub const DEFAULT_GRID: [i64; 6] = [0, 1, 2, 3, 5, 8];
pub const DEFAULT_MAX_INSTANCES: usize = 1_000_000;

/// Values of a function's scalar parameters.
pub type Binding = BTreeMap<String, i64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DepKind {
    Flow,
    Anti,
    Output,
}

impl fmt::Display for DepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DepKind::Flow => "flow",
            DepKind::Anti => "anti",
            DepKind::Output => "output",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dependence {
    pub kind: DepKind,
    pub source: Instance,
    pub target: Instance,
}

impl fmt::Display for Dependence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} -> {}", self.kind, self.source, self.target)
    }
}

/// Dependences of one run, in the order they arise.
pub fn compute_dependences(
    f: &Function,
    params: &BTreeMap<String, i64>,
    budget: u64,
) -> Result<(Vec<Instance>, Vec<Dependence>), InterpError> {
    let cfg = InterpConfig { record_accesses: true, budget, ..Default::default() };
    let run = run_function(f, params, &cfg)?;
    let mut last_writer: HashMap<(&str, &[i64]), usize> = HashMap::new();
    let mut readers: HashMap<(&str, &[i64]), Vec<usize>> = HashMap::new();
    let mut seen: HashSet<(DepKind, usize, usize)> = HashSet::new();
    let mut deps = Vec::new();
    let mut add = |kind, s: usize, t: usize, deps: &mut Vec<Dependence>| {
        if s != t && seen.insert((kind, s, t)) {
            deps.push(Dependence { kind, source: run.trace[s].clone(), target: run.trace[t].clone() });
        }
    };
    for ev in &run.accesses {
        let loc = (ev.array.as_str(), ev.index.as_slice());
        if ev.write {
            if let Some(&w) = last_writer.get(&loc) {
                add(DepKind::Output, w, ev.instance, &mut deps);
            }
            for &r in readers.get(&loc).into_iter().flatten() {
                add(DepKind::Anti, r, ev.instance, &mut deps);
            }
            readers.remove(&loc);
            last_writer.insert(loc, ev.instance);
        } else {
            if let Some(&w) = last_writer.get(&loc) {
                add(DepKind::Flow, w, ev.instance, &mut deps);
            }
            readers.entry(loc).or_default().push(ev.instance);
        }
    }
    Ok((run.trace.clone(), deps))
}

/// Why a schedule fails a dependence check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Reversed(Dependence),
    /// The transformed schedule does not execute the same instances.
    InstanceMismatch(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Reversed(d) => write!(f, "{d}"),
            Violation::InstanceMismatch(m) => f.write_str(m),
        }
    }
}

/// First dependence whose target runs before its source in `after`.
pub fn check_order(deps: &[Dependence], before: &[Instance], after: &[Instance]) -> Option<Violation> {
    if before.len() != after.len() {
        return Some(Violation::InstanceMismatch(format!(
            "schedule executes {} instances instead of {}",
            after.len(),
            before.len()
        )));
    }
    let pos: HashMap<&Instance, usize> = after.iter().enumerate().map(|(i, x)| (x, i)).collect();
    if pos.len() != after.len() {
        return Some(Violation::InstanceMismatch("schedule executes an instance twice".into()));
    }
    for inst in before {
        if !pos.contains_key(inst) {
            return Some(Violation::InstanceMismatch(format!("instance {inst} is not executed")));
        }
    }
    deps.iter().find(|d| pos[&d.source] > pos[&d.target]).map(|d| Violation::Reversed(d.clone()))
}

/// Every binding of `params` to values from `grid`, in lexicographic order.
pub fn grid_bindings(params: &[String], grid: &[i64]) -> Vec<BTreeMap<String, i64>> {
    let mut out = vec![BTreeMap::new()];
    for p in params {
        let mut next = Vec::new();
        for b in &out {
            for v in grid {
                let mut b = b.clone();
                b.insert(p.clone(), *v);
                next.push(b);
            }
        }
        out = next;
    }
    out
}

/// Dependence information of the original function on every usable grid binding.
#[derive(Clone, Debug, Default)]
pub struct DependenceGrid {
    pub samples: Vec<(Binding, Vec<Instance>, Vec<Dependence>)>,
    /// Bindings skipped because the original program fails or exceeds the cap there.
    pub skipped: usize,
}

impl DependenceGrid {
    pub fn build(f: &Function, grid: &[i64], max_instances: usize) -> DependenceGrid {
        let params: Vec<String> = f.scalar_params().map(|p| p.name.clone()).collect();
        let mut out = DependenceGrid::default();
        for b in grid_bindings(&params, grid) {
            match compute_dependences(f, &b, (max_instances as u64).saturating_mul(4).max(1000)) {
                Ok((trace, _)) if trace.len() > max_instances => out.skipped += 1,
                Ok((trace, deps)) => out.samples.push((b, trace, deps)),
                Err(_) => out.skipped += 1,
            }
        }
        out
    }

    /// First violation over the grid, with the binding it occurs at.
    pub fn check(
        &self,
        tree: &ScheduleTree,
        max_instances: usize,
    ) -> Result<Option<(Binding, Violation)>, SchedError> {
        for (b, trace, deps) in &self.samples {
            let after = match enumerate_order(tree, b, max_instances) {
                Ok(a) => a,
                Err(SchedError::InstanceCapExceeded { .. }) => continue,
                Err(e) => return Err(e),
            };
            if let Some(v) = check_order(deps, trace, &after) {
                return Ok(Some((b.clone(), v)));
            }
        }
        Ok(None)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Policy {
    #[default]
    Error,
    Warn,
    Silent,
}

impl FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "error" => Ok(Policy::Error),
            "warn" => Ok(Policy::Warn),
            "silent" => Ok(Policy::Silent),
            other => Err(format!("unknown policy `{other}` (expected error, warn or silent)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Legal,
    /// Applied without checking (`unsafe` clause, or no usable grid binding).
    LegalUnchecked,
    IllegalSkipped,
    IllegalAborted,
    FailedSkipped,
    FailedAborted,
}

impl Verdict {
    pub fn applied(self) -> bool {
        matches!(self, Verdict::Legal | Verdict::LegalUnchecked)
    }

    pub fn aborted(self) -> bool {
        matches!(self, Verdict::IllegalAborted | Verdict::FailedAborted)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Legal => "legal",
            Verdict::LegalUnchecked => "legal-unchecked",
            Verdict::IllegalSkipped => "illegal-skipped",
            Verdict::IllegalAborted => "illegal-aborted",
            Verdict::FailedSkipped => "failed-skipped",
            Verdict::FailedAborted => "failed-aborted",
        })
    }
}

/// Outcome for a directive that could not be applied as requested.
pub fn decide(forced: bool, policy: Policy, structural: bool) -> Verdict {
    let abort = forced && policy == Policy::Error;
    match (structural, abort) {
        (false, false) => Verdict::IllegalSkipped,
        (false, true) => Verdict::IllegalAborted,
        (true, false) => Verdict::FailedSkipped,
        (true, true) => Verdict::FailedAborted,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepReport {
    pub function: String,
    pub loc: Location,
    pub kind: crate::directives::DirectiveKind,
    pub verdict: Verdict,
    /// Violated dependence (with its binding) or failure reason.
    pub detail: Option<String>,
    /// The violated dependence and the parameter binding it was found at.
    pub witness: Option<(Binding, Dependence)>,
}

/// Tab-separated report: location, transformation, verdict, witness.
pub fn format_report(file: &str, steps: &[StepReport], grid: &[i64]) -> String {
    let g: Vec<String> = grid.iter().map(i64::to_string).collect();
    let mut out = format!(
        "# legality is checked on parameter values {{{}}}; a legal verdict is evidence on that grid, not a proof\n",
        g.join(",")
    );
    out.push_str("# location\ttransformation\tverdict\twitness\n");
    for s in steps {
        out.push_str(&format!(
            "{file}:{}\t{}\t{}\t{}\n",
            s.loc,
            s.kind,
            s.verdict,
            s.detail.as_deref().unwrap_or("-")
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;

    fn func(src: &str) -> Function {
        parse_source(src).unwrap().functions.remove(0)
    }

    fn b(pairs: &[(&str, i64)]) -> BTreeMap<String, i64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn recurrence_has_flow_dependences() {
        let f = func("void f(int n, int A[n]) { for (int i = 1; i < n; i+=1) A[i] = A[i-1] + 1; }");
        let (trace, deps) = compute_dependences(&f, &b(&[("n", 4)]), 1000).unwrap();
        assert_eq!(trace.len(), 3);
        let text: Vec<String> = deps.iter().map(|d| d.to_string()).collect();
        assert_eq!(text, vec!["flow S0[1] -> S0[2]", "flow S0[2] -> S0[3]"]);
        let mut reversed = trace.clone();
        reversed.reverse();
        assert_eq!(check_order(&deps, &trace, &reversed), Some(Violation::Reversed(deps[0].clone())));
        assert_eq!(check_order(&deps, &trace, &trace), None);
    }

    #[test]
    fn anti_and_output_dependences() {
        let f = func("void f(int n, int A[n], int s[1]) { for (int i = 0; i < n; i+=1) { A[i] = s[0]; s[0] = i; } }");
        let (_, deps) = compute_dependences(&f, &b(&[("n", 2)]), 1000).unwrap();
        let text: Vec<String> = deps.iter().map(|d| d.to_string()).collect();
        assert!(text.contains(&"anti S0[0] -> S1[0]".to_string()), "{text:?}");
        assert!(text.contains(&"flow S1[0] -> S0[1]".to_string()));
        assert!(text.contains(&"output S1[0] -> S1[1]".to_string()));
    }

    #[test]
    fn reductions_do_not_depend_on_themselves() {
        let f = func("void f(int n, int A[1]) { for (int i = 0; i < n; i+=1) A[0] += i; }");
        let (_, deps) = compute_dependences(&f, &b(&[("n", 1)]), 1000).unwrap();
        assert!(deps.is_empty());
    }

    #[test]
    fn grid_is_cartesian() {
        let g = grid_bindings(&["a".into(), "b".into()], &[0, 1, 2]);
        assert_eq!(g.len(), 9);
        assert_eq!(g[5], b(&[("a", 1), ("b", 2)]));
        assert_eq!(grid_bindings(&[], &[0, 1]).len(), 1);
    }

    #[test]
    fn policy_table() {
        assert_eq!(decide(true, Policy::Error, false), Verdict::IllegalAborted);
        assert_eq!(decide(true, Policy::Warn, false), Verdict::IllegalSkipped);
        assert_eq!(decide(false, Policy::Error, false), Verdict::IllegalSkipped);
        assert_eq!(decide(true, Policy::Silent, true), Verdict::FailedSkipped);
        assert_eq!(decide(true, Policy::Error, true), Verdict::FailedAborted);
        assert_eq!("warn".parse::<Policy>(), Ok(Policy::Warn));
        assert!("loud".parse::<Policy>().is_err());
    }
}
