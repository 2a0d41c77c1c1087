use std::io::Write;
use std::process::{Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_loopforge");

const REC: &str = "void f(int n, int A[n]) {\n  #pragma clang loop reverse\n  for (int i = 1; i < n; i += 1)\n    A[i] = A[i - 1] + 1;\n}\n";

const TILE: &str = "void f(int n, int m, int A[n][m]) {\n  #pragma clang loop(i,j) tile sizes(4,8)\n  for (int i = 0; i < n; i += 1)\n    for (int j = 0; j < m; j += 1)\n      A[i][j] = i + j;\n}\n";

fn run_with_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(BIN)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn transforms_file_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("tile.c");
    let output = dir.path().join("out.c");
    std::fs::write(&input, TILE).unwrap();
    let out = Command::new(BIN).arg(&input).arg("-o").arg(&output).arg("--verify").output().unwrap();
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("PASS f (36 bindings, 0 skipped)"), "{}", text(&out.stderr));
    let c = std::fs::read_to_string(&output).unwrap();
    assert!(c.contains("c0 += 4") && c.contains("c1 += 8"), "{c}");
    assert!(!c.contains("#pragma"));
}

#[test]
fn reads_stdin() {
    let out = run_with_stdin(&["-", "--emit=plan"], TILE);
    assert!(out.status.success());
    assert!(text(&out.stdout).contains("tile"), "{}", text(&out.stdout));
}

#[test]
fn illegal_directive_exit_codes() {
    let out = run_with_stdin(&["-"], REC);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(text(&out.stderr).starts_with("-:2:3: error: `reverse` would violate"), "{}", text(&out.stderr));

    let out = run_with_stdin(&["-", "--policy=silent"], REC);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stderr.is_empty(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("A[i] = A[i - 1] + 1;"));
}

#[test]
fn report_file_and_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.tsv");
    let out = run_with_stdin(&["-", "--policy=warn", "--report", report.to_str().unwrap()], REC);
    assert_eq!(out.status.code(), Some(0));
    let r = std::fs::read_to_string(&report).unwrap();
    assert!(r.contains("illegal-skipped"), "{r}");

    let out = run_with_stdin(&["-", "--emit=bogus"], REC);
    assert_eq!(out.status.code(), Some(2));
    let out = run_with_stdin(&["-"], "void f(int n) { for (int i = 0; i < n; i += 1) }");
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).starts_with("-:1:"), "{}", text(&out.stderr));
    let out = Command::new(BIN).arg("/nonexistent/x.c").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tree_emission() {
    let out = run_with_stdin(&["-", "--emit=tree"], TILE);
    assert!(out.status.success());
    let t = text(&out.stdout);
    assert!(t.starts_with("Function f:"), "{t}");
    assert!(t.matches("Band").count() == 4, "{t}");
}
