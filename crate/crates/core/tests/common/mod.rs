//! Random mini-C programs with one transformation directive each, for the
//! equivalence and legality suites.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;

use loopforge::directives::DirectiveKind;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type Rng8 = ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct Case {
    pub src: String,
    /// Directive kinds that occur in the source.
    pub kinds: Vec<DirectiveKind>,
}

pub fn binding(pairs: &[(&str, i64)]) -> BTreeMap<String, i64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// A subscript `v + o` printed as C.
fn sub(v: &str, o: i64) -> String {
    match o {
        0 => v.to_string(),
        o if o > 0 => format!("{v} + {o}"),
        o => format!("{v} - {}", -o),
    }
}

/// Statement over 1-D arrays `A`, `B` indexed by `i`; offsets lie in
/// `lo_off..=2` when `deps` is set and are zero otherwise.
fn stmt_1d(rng: &mut Rng8, i: &str, lo_off: i64, deps: bool) -> String {
    let off = |rng: &mut Rng8| if deps { rng.gen_range(lo_off..=2) } else { 0 };
    let lhs = *["A", "B"].choose(rng).unwrap();
    let lo = off(rng);
    let mut rhs = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        rhs.push(match rng.gen_range(0..4) {
            0 => sub(i, rng.gen_range(0..3)),
            1 => rng.gen_range(1..9).to_string(),
            _ => format!("{}[{}]", ["A", "B"].choose(rng).unwrap(), sub(i, off(rng))),
        });
    }
    let op = ["=", "+=", "-="].choose(rng).unwrap();
    format!("{lhs}[{}] {op} {};", sub(i, lo), rhs.join(" + "))
}

/// Statement over 2-D arrays `A`, `B` indexed by `i`, `j`.
fn stmt_2d(rng: &mut Rng8, i: &str, j: &str, lo_off: i64, deps: bool) -> String {
    let arrays = ["A", "B"];
    let lhs = *arrays.choose(rng).unwrap();
    let off = |rng: &mut Rng8| if deps { rng.gen_range(lo_off..=2) } else { 0 };
    let (li, lj) = (off(rng), off(rng));
    let mut rhs = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        rhs.push(match rng.gen_range(0..5) {
            0 => format!("{} * 2", sub(i, 0)),
            1 => sub(j, rng.gen_range(0..2)),
            _ => {
                let a = *arrays.choose(rng).unwrap();
                format!("{a}[{}][{}]", sub(i, off(rng)), sub(j, off(rng)))
            }
        });
    }
    let op = ["=", "+="].choose(rng).unwrap();
    format!("{lhs}[{}][{}] {op} {};", sub(i, li), sub(j, lj), rhs.join(" + "))
}

fn header_1d() -> &'static str {
    "void f(int n, int A[n + 3], int B[n + 3])"
}

fn header_2d() -> &'static str {
    "void f(int n, int m, int A[n + 3][m + 3], int B[n + 3][m + 3])"
}

/// Two-deep arrays whose inner extent fits the constant-count loops.
fn header_2c() -> &'static str {
    "void f(int n, int A[n + 3][8], int B[n + 3][8])"
}

/// Loop header over `v` from `lo` below `hi`.
fn loop_1d(v: &str, lo: i64, hi: &str) -> String {
    format!("for (int {v} = {lo}; {v} < {hi}; {v} += 1)")
}

pub fn random_case(rng: &mut Rng8, kind: DirectiveKind, deps: bool) -> Case {
    let mut kinds = vec![kind];
    let lo = if deps { 1 } else { 0 };
    let lo_off = -lo;
    let mut s = String::new();
    match kind {
        DirectiveKind::Reverse | DirectiveKind::StripMine | DirectiveKind::Unroll => {
            let pragma = match kind {
                DirectiveKind::Reverse => "reverse".to_string(),
                DirectiveKind::StripMine => format!("stripmine size({})", rng.gen_range(2..=5)),
                _ => format!("unroll factor({})", rng.gen_range(2..=4)),
            };
            if rng.gen_bool(0.5) {
                let _ = writeln!(s, "{} {{\n  #pragma clang loop {pragma}\n  {}", header_1d(), loop_1d("i", lo, "n"));
                let body: Vec<String> = (0..rng.gen_range(1..=2)).map(|_| stmt_1d(rng, "i", lo_off, deps)).collect();
                let _ = writeln!(s, "  {{\n    {}\n  }}\n}}", body.join("\n    "));
            } else {
                // Two-deep nest, directive on the inner or outer loop.
                let inner = rng.gen_bool(0.5);
                let _ = writeln!(s, "{} {{", header_2d());
                if !inner {
                    let _ = writeln!(s, "  #pragma clang loop {pragma}");
                }
                let _ = writeln!(s, "  {}", loop_1d("i", lo, "n"));
                if inner {
                    let _ = writeln!(s, "    #pragma clang loop {pragma}");
                }
                let _ = writeln!(s, "    {}", loop_1d("j", lo, "m"));
                let _ = writeln!(s, "      {}\n}}", stmt_2d(rng, "i", "j", lo_off, deps));
            }
            if kind == DirectiveKind::Unroll && rng.gen_bool(0.3) {
                // Full unrolling of a constant-count inner loop.
                s.clear();
                let c = rng.gen_range(1..=3);
                let _ = writeln!(
                    s,
                    "{} {{\n  {}\n    #pragma clang loop unroll full\n    {}\n      {}\n}}",
                    header_2c(),
                    loop_1d("i", lo, "n"),
                    loop_1d("j", lo, &(c + lo).to_string()),
                    stmt_2d(rng, "i", "j", lo_off, deps)
                );
            }
        }
        DirectiveKind::Interchange | DirectiveKind::Tile | DirectiveKind::UnrollAndJam => {
            let pragma = match kind {
                DirectiveKind::Interchange => "(i,j) interchange permutation(j,i)".to_string(),
                DirectiveKind::Tile => format!("(i,j) tile sizes({},{})", rng.gen_range(1..=4), rng.gen_range(1..=4)),
                _ => format!(" unroll_and_jam factor({})", rng.gen_range(2..=3)),
            };
            let _ = writeln!(
                s,
                "{} {{\n  #pragma clang loop{pragma}\n  {}\n    {} {{",
                header_2d(),
                loop_1d("i", lo, "n"),
                loop_1d("j", lo, "m")
            );
            for _ in 0..rng.gen_range(1..=2) {
                let _ = writeln!(s, "      {}", stmt_2d(rng, "i", "j", lo_off, deps));
            }
            s.push_str("    }\n}\n");
        }
        DirectiveKind::Distribute => {
            let _ = writeln!(s, "{} {{\n  #pragma clang loop distribute\n  {} {{", header_1d(), loop_1d("i", lo, "n"));
            for _ in 0..rng.gen_range(2..=3) {
                let _ = writeln!(s, "    {}", stmt_1d(rng, "i", lo_off, deps));
            }
            s.push_str("  }\n}\n");
        }
        DirectiveKind::Fuse => {
            // The second loop may be shifted by one; its body then indexes with `k - 1`.
            let shift = if rng.gen_bool(0.3) { 1 } else { 0 };
            let _ = writeln!(s, "{} {{\n  #pragma clang loop fuse\n  {}", header_1d(), loop_1d("i", lo, "n"));
            let _ = writeln!(s, "    {}", stmt_1d(rng, "i", lo_off, deps));
            let _ = writeln!(s, "  {}", loop_1d("k", lo + shift, &sub("n", shift)));
            let base = if shift == 1 { "k - 1" } else { "k" };
            let _ = writeln!(s, "    {}\n}}", stmt_1d(rng, base, lo_off, deps));
        }
        DirectiveKind::Pack => {
            let a = *["A", "B"].choose(rng).unwrap();
            let c = rng.gen_range(2..=5);
            if rng.gen_bool(0.5) {
                // Constant-count inner loop, packed per outer iteration.
                let alloc = if rng.gen_bool(0.3) { " allocate(malloc)" } else { "" };
                let _ = writeln!(
                    s,
                    "{} {{\n  {}\n    #pragma clang loop pack array({a}){alloc}\n    {}\n      {}\n}}",
                    header_2c(),
                    loop_1d("i", lo, "n"),
                    loop_1d("j", lo, &(c + lo).to_string()),
                    stmt_2d(rng, "i", "j", lo_off, deps)
                );
            } else {
                // Packing the strip loop of a strip-mined loop.
                kinds.push(DirectiveKind::StripMine);
                let _ = writeln!(
                    s,
                    "{} {{\n  #pragma clang loop(i2) pack array({a})\n  #pragma clang loop stripmine size({c}) strip_id(i2)\n  {}\n  {{\n    {}\n    {}\n  }}\n}}",
                    header_1d(),
                    loop_1d("i", lo, "n"),
                    stmt_1d(rng, "i", lo_off, deps),
                    stmt_1d(rng, "i", lo_off, deps)
                );
            }
        }
        DirectiveKind::Id => {
            // Name the inner loop and transform it from the outer loop's pragma stack.
            let other = ["reverse", "stripmine size(2)", "unroll factor(2)"].choose(rng).unwrap();
            kinds.push(DirectiveKind::from_keyword(other.split(' ').next().unwrap()).unwrap());
            let _ = writeln!(
                s,
                "{} {{\n  #pragma clang loop(inner) {other}\n  {}\n    #pragma clang loop id(inner)\n    {}\n      {}\n}}",
                header_2d(),
                loop_1d("i", lo, "n"),
                loop_1d("j", lo, "m"),
                stmt_2d(rng, "i", "j", lo_off, deps)
            );
        }
    }
    Case { src: s, kinds }
}

/// Cases with kinds cycling through every directive kind.
pub fn corpus(seed: u64, count: usize, deps: bool) -> Vec<Case> {
    let mut rng = Rng8::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let kind = DirectiveKind::ALL[i % DirectiveKind::ALL.len()];
            random_case(&mut rng, kind, deps)
        })
        .collect()
}
