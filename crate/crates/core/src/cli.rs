//! Command-line driver: parse, plan, transform, emit, and optionally verify.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::codegen::{generate_program, emit_c, CodegenOptions, CounterNaming, LoopStyle};
use crate::directives::{dump_plan, resolve_plan};
use crate::frontend::{parse_source, Function};
use crate::interp::{equivalent, run_function, Equivalence, InterpConfig};
use crate::legality::{format_report, grid_bindings, Policy, DEFAULT_GRID, DEFAULT_MAX_INSTANCES};
use crate::pipeline::{transform_program, Options, PipelineError};
use crate::sched::lower_to_tree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    C,
    Tree,
    Plan,
    Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CounterNames {
    Numbered,
    Ids,
}

#[derive(Debug, Parser)]
#[command(name = "loopforge", version, about = "Applies `#pragma clang loop` transformations to mini-C sources")]
pub struct Args {
    /// Input file (`-` reads standard input).
    pub input: PathBuf,
    /// What to print: generated C, the schedule tree, the resolved plan, or the legality report.
    #[arg(long, value_enum, default_value = "c")]
    pub emit: Emit,
    /// Output file; standard output when omitted.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
    /// What to do when a forced directive is illegal or cannot be applied: error, warn or silent.
    #[arg(long, default_value = "error", value_parser = parse_policy)]
    pub policy: Policy,
    /// Parameter values used for legality checking and verification.
    #[arg(long = "legality-grid", value_delimiter = ',', default_values_t = DEFAULT_GRID.to_vec())]
    pub legality_grid: Vec<i64>,
    /// Seed for the interpreter's initial array contents.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Check the emitted code against the input with the interpreter.
    #[arg(long)]
    pub verify: bool,
    /// Also write the legality report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Statement instances above which a grid binding is not checked.
    #[arg(long = "max-instances", default_value_t = DEFAULT_MAX_INSTANCES)]
    pub max_instances: usize,
    /// Loop form in emitted code: auto, value (`c < n`) or tile-index (`c <= floord(...)`).
    #[arg(long = "loop-style", default_value = "auto", value_parser = |s: &str| s.parse::<LoopStyle>())]
    pub loop_style: LoopStyle,
    /// Name emitted counters c0, c1, ... by depth, or after loop identifiers where available.
    #[arg(long = "counter-names", value_enum, default_value = "numbered")]
    pub counter_names: CounterNames,
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    s.parse::<Policy>().map_err(|_| format!("unknown policy `{s}` (expected error, warn or silent)"))
}

/// Result of running the driver: process exit code plus what went to each stream.
#[derive(Debug, Default)]
pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VerifyOutcome {
    Pass { checked: usize, skipped: usize },
    Fail { binding: BTreeMap<String, i64>, detail: String },
}

/// Interprets both functions for every grid binding of the scalar parameters.
/// Bindings on which the original itself fails to run are skipped.
pub fn verify_function(original: &Function, generated: &Function, grid: &[i64], seed: u64) -> VerifyOutcome {
    let names: Vec<String> = original.scalar_params().map(|p| p.name.clone()).collect();
    let cfg = InterpConfig { seed, ..Default::default() };
    let (mut checked, mut skipped) = (0, 0);
    for b in grid_bindings(&names, grid) {
        match equivalent(original, generated, &b, &cfg) {
            Ok(Equivalence::Equal) => checked += 1,
            Ok(e) => return VerifyOutcome::Fail { binding: b, detail: e.to_string() },
            Err(e) => match run_function(original, &b, &cfg) {
                Ok(_) => return VerifyOutcome::Fail { binding: b, detail: format!("transformed code failed: {e}") },
                Err(_) => skipped += 1,
            },
        }
    }
    VerifyOutcome::Pass { checked, skipped }
}

fn binding_text(b: &BTreeMap<String, i64>) -> String {
    b.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ")
}

pub fn run(args: &Args, source: &str) -> Run {
    let file = args.input.display().to_string();
    let mut r = Run::default();
    let program = match parse_source(source) {
        Ok(p) => p,
        Err(e) => return usage_error(&file, &PipelineError::from(e)),
    };
    if args.emit == Emit::Plan {
        return match resolve_plan(&program) {
            Ok(plan) => Run { code: 0, stdout: dump_plan(&plan), stderr: String::new() },
            Err(e) => usage_error(&file, &PipelineError::from(e)),
        };
    }
    let opts = Options { policy: args.policy, grid: args.legality_grid.clone(), max_instances: args.max_instances };
    let outcome = match transform_program(&program, &opts) {
        Ok(o) => o,
        Err(e) => return usage_error(&file, &e),
    };
    for d in &outcome.diagnostics {
        let _ = writeln!(r.stderr, "{file}:{d}");
    }
    let report = format_report(&file, &outcome.reports(), &args.legality_grid);
    if let Some(path) = &args.report {
        if let Err(e) = std::fs::write(path, &report) {
            let _ = writeln!(r.stderr, "loopforge: cannot write {}: {e}", path.display());
            r.code = 2;
            return r;
        }
    }
    if outcome.has_errors() {
        r.code = 1;
        if args.emit == Emit::Report {
            r.stdout = report;
        }
        return r;
    }
    let cg = CodegenOptions {
        style: args.loop_style,
        counters: match args.counter_names {
            CounterNames::Numbered => CounterNaming::Numbered,
            CounterNames::Ids => CounterNaming::LoopIds,
        },
    };
    let generated = match generate_program(&outcome, &cg) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(r.stderr, "{file}: error: {e}");
            r.code = 1;
            return r;
        }
    };
    r.stdout = match args.emit {
        Emit::C => emit_c(&generated),
        Emit::Report => report,
        Emit::Plan => unreachable!("handled above"),
        Emit::Tree => {
            let mut out = String::new();
            for fo in &outcome.functions {
                let _ = writeln!(out, "Function {}:", fo.original.name);
                match fo.tree.clone().map(Ok).unwrap_or_else(|| lower_to_tree(&fo.original)) {
                    Ok(t) => {
                        let _ = writeln!(out, "{t}");
                    }
                    Err(e) => {
                        let _ = writeln!(out, "  (no schedule tree: {e})\n");
                    }
                }
            }
            out
        }
    };
    if args.verify {
        for (orig, gen) in outcome.program.functions.iter().zip(&generated.functions) {
            match verify_function(orig, gen, &args.legality_grid, args.seed) {
                VerifyOutcome::Pass { checked, skipped } => {
                    let _ = writeln!(r.stderr, "PASS {} ({checked} bindings, {skipped} skipped)", orig.name);
                }
                VerifyOutcome::Fail { binding, detail } => {
                    let _ = writeln!(r.stderr, "FAIL {} at {}: {detail}", orig.name, binding_text(&binding));
                    r.code = 1;
                }
            }
        }
    }
    r
}

fn usage_error(file: &str, e: &PipelineError) -> Run {
    Run { code: 2, stdout: String::new(), stderr: format!("{file}:{}: error: {}\n", e.location(), e.message()) }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let source = if args.input.as_os_str() == "-" {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s).map(|_| s)
    } else {
        std::fs::read_to_string(&args.input)
    };
    let source = match source {
        Ok(s) => s,
        Err(e) => {
            eprintln!("loopforge: cannot read {}: {e}", args.input.display());
            return 2;
        }
    };
    let r = run(&args, &source);
    eprint!("{}", r.stderr);
    match &args.output {
        Some(path) if !r.stdout.is_empty() || r.code == 0 => {
            if let Err(e) = std::fs::write(path, &r.stdout) {
                eprintln!("loopforge: cannot write {}: {e}", path.display());
                return 2;
            }
        }
        _ => print!("{}", r.stdout),
    }
    r.code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> Args {
        Args::try_parse_from(["loopforge", "in.c"].iter().chain(extra)).unwrap()
    }

    const REC: &str = "void f(int n, int A[n]) {\n#pragma clang loop reverse\nfor (int i = 1; i < n; i+=1)\n  A[i] = A[i-1] + 1;\n}\n";

    #[test]
    fn syntax_error_exits_two() {
        let r = run(&args(&[]), "void f( {");
        assert_eq!(r.code, 2);
        assert!(r.stderr.starts_with("in.c:1:"), "{}", r.stderr);
        assert_eq!(r.stderr.lines().count(), 1);
    }

    #[test]
    fn policies_and_verify() {
        let r = run(&args(&[]), REC);
        assert_eq!(r.code, 1);
        assert!(r.stderr.contains("in.c:2:1: error: `reverse`"), "{}", r.stderr);
        assert!(r.stdout.is_empty());
        let r = run(&args(&["--policy=warn", "--verify"]), REC);
        assert_eq!(r.code, 0, "{}", r.stderr);
        assert!(r.stderr.contains("warning"));
        assert!(r.stderr.contains("PASS f"));
        assert!(r.stdout.contains("for (int i = 1; i < n; i += 1)"), "{}", r.stdout);
    }

    #[test]
    fn plan_tree_and_report_modes() {
        let r = run(&args(&["--emit=plan"]), REC);
        assert_eq!(r.code, 0);
        assert_eq!(r.stdout.lines().count(), 1);
        let r = run(&args(&["--emit=tree", "--policy=silent"]), REC);
        assert!(r.stdout.contains("Band"), "{}", r.stdout);
        let r = run(&args(&["--emit=report", "--policy=silent"]), REC);
        assert!(r.stdout.contains("in.c:2:1\treverse\tillegal-skipped\tflow S0[1] -> S0[2]"), "{}", r.stdout);
    }

    #[test]
    fn grid_flag_parses_csv() {
        let a = args(&["--legality-grid=1,4", "--loop-style=value"]);
        assert_eq!(a.legality_grid, vec![1, 4]);
        assert_eq!(a.loop_style, LoopStyle::Value);
        assert!(Args::try_parse_from(["loopforge", "x.c", "--policy=loud"]).is_err());
    }
}
