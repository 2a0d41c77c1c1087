use std::collections::{BTreeMap, BTreeSet};

use super::*;
use crate::frontend::{parse_source, Allocation, Function};
use crate::interp::Instance;
use crate::sched::{enumerate_order, lower_to_tree, validate_tree, StmtKind};

fn setup(src: &str) -> (Function, ScheduleTree) {
    let f = parse_source(src).unwrap().functions.remove(0);
    let t = lower_to_tree(&f).unwrap();
    (f, t)
}

fn key(f: &Function, counter: &str) -> usize {
    f.loops().iter().find(|l| l.counter == counter).unwrap().key
}

fn order(t: &ScheduleTree, pairs: &[(&str, i64)]) -> Vec<Instance> {
    assert_eq!(validate_tree(t), vec![], "{t}");
    let p: BTreeMap<String, i64> = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    enumerate_order(t, &p, 1_000_000).unwrap()
}

fn inst(stmt: &str, c: &[i64]) -> Instance {
    Instance { stmt: stmt.into(), counters: c.to_vec() }
}

const ONE: &str = "void f(int n, int A[n]) { for (int i = 0; i < n; i+=1) A[i] = i; }";
const TWO: &str = "void f(int n, int m, int A[n][m]) { for (int i = 0; i < n; i+=1) for (int j = 0; j < m; j+=1) A[i][j] = i; }";

#[test]
fn reverse_walks_backwards() {
    for step in [1, 3] {
        let src = format!("void f(int n, int A[n]) {{ for (int i = 2; i < n; i+={step}) A[i] = i; }}");
        let (f, mut t) = setup(&src);
        let before = order(&t, &[("n", 11)]);
        reverse(&mut t, key(&f, "i")).unwrap();
        for n in [0, 1, 2, 3, 11, 12] {
            let mut expect: Vec<Instance> = (2..n).step_by(step).map(|i| inst("S0", &[i])).collect();
            expect.reverse();
            assert_eq!(order(&t, &[("n", n)]), expect);
        }
        reverse(&mut t, key(&f, "i")).unwrap();
        assert_eq!(order(&t, &[("n", 11)]), before);
    }
}

#[test]
fn reverse_of_constant_loop() {
    let (f, mut t) = setup("void f(int A[128]) { for (int i = 0; i < 128; i+=1) A[i] = i; }");
    reverse(&mut t, key(&f, "i")).unwrap();
    let Node::Band(b) = &t.root else { panic!() };
    assert_eq!((b.first.clone(), b.limit.clone(), b.step), (QExpr::from(127), QExpr::from(0), -1));
}

#[test]
fn stripmine_preserves_order() {
    let (f, mut t) = setup(ONE);
    let out = stripmine(&mut t, key(&f, "i"), 4, Some("i1")).unwrap();
    assert_eq!(out.len(), 2);
    let Node::Band(pit) = &t.root else { panic!() };
    assert_eq!((pit.var.as_str(), pit.step), ("i1", 4));
    for n in [0, 1, 4, 5, 9] {
        let expect: Vec<Instance> = (0..n).map(|i| inst("S0", &[i])).collect();
        assert_eq!(order(&t, &[("n", n)]), expect);
    }
}

#[test]
fn stripmine_downward_loop() {
    let (f, mut t) = setup("void f(int n, int A[n]) { for (int i = n - 1; i >= 0; i-=2) A[i] = i; }");
    stripmine(&mut t, key(&f, "i"), 3, None).unwrap();
    for n in [0, 1, 6, 7, 13] {
        let expect: Vec<Instance> = (0..n).rev().step_by(2).map(|i| inst("S0", &[i])).collect();
        assert_eq!(order(&t, &[("n", n)]), expect);
    }
}

#[test]
fn tile_matches_blocked_oracle() {
    let (f, mut t) = setup(TWO);
    tile(&mut t, &[key(&f, "i"), key(&f, "j")], &[4, 8], &[None, None]).unwrap();
    for (n, m) in [(0, 3), (5, 9), (8, 16), (9, 7)] {
        let mut expect = Vec::new();
        for ii in (0..n).step_by(4) {
            for jj in (0..m).step_by(8) {
                for i in ii..(ii + 4).min(n) {
                    for j in jj..(jj + 8).min(m) {
                        expect.push(inst("S0", &[i, j]));
                    }
                }
            }
        }
        assert_eq!(order(&t, &[("n", n), ("m", m)]), expect);
    }
}

#[test]
fn tile_equals_stripmine_plus_interchange() {
    let (f, mut a) = setup(TWO);
    let (i, j) = (key(&f, "i"), key(&f, "j"));
    let out = tile(&mut a, &[i, j], &[3, 2], &[None, None]).unwrap();
    let (_, mut b) = setup(TWO);
    let pi = stripmine(&mut b, i, 3, None).unwrap();
    let pj = stripmine(&mut b, j, 2, None).unwrap();
    interchange(&mut b, &[pi[0], pi[1], pj[0], pj[1]], &[pi[0], pj[0], pi[1], pj[1]]).unwrap();
    assert_eq!(out.len(), 4);
    for (n, m) in [(4, 5), (7, 3), (0, 2)] {
        assert_eq!(order(&a, &[("n", n), ("m", m)]), order(&b, &[("n", n), ("m", m)]));
    }
}

#[test]
fn interchange_swaps_nesting() {
    let (f, mut t) = setup(TWO);
    let (i, j) = (key(&f, "i"), key(&f, "j"));
    interchange(&mut t, &[i, j], &[j, i]).unwrap();
    let mut expect = Vec::new();
    for j in 0..4 {
        for i in 0..3 {
            expect.push(inst("S0", &[i, j]));
        }
    }
    assert_eq!(order(&t, &[("n", 3), ("m", 4)]), expect);
    assert_eq!(interchange(&mut t, &[j, i], &[j, j]), Err(TransformError::InvalidPermutation));
}

#[test]
fn interchange_rejects_triangular_bounds() {
    let (f, mut t) = setup("void f(int n, int A[n][n]) { for (int i = 0; i < n; i+=1) for (int j = 0; j < i; j+=1) A[i][j] = 0; }");
    let (i, j) = (key(&f, "i"), key(&f, "j"));
    assert!(matches!(interchange(&mut t, &[i, j], &[j, i]), Err(TransformError::NonRectangular { .. })));
}

#[test]
fn unroll_keeps_order_and_names_copies() {
    for factor in [2, 3] {
        let (f, mut t) = setup(ONE);
        unroll(&mut t, key(&f, "i"), factor).unwrap();
        let names: BTreeSet<String> = t.stmts.values().map(|s| s.name.clone()).collect();
        assert!(names.contains("S0.1") && names.contains("S0.2") && names.contains("S0"));
        for n in [0, 1, 2, 5, 6, 7] {
            let expect: Vec<Instance> = (0..n).map(|i| inst("S0", &[i])).collect();
            assert_eq!(order(&t, &[("n", n)]), expect);
        }
    }
}

#[test]
fn unroll_of_multiple_has_no_epilogue() {
    let (f, mut t) = setup("void f(int A[128]) { for (int i = 0; i < 128; i+=1) A[i] = i; }");
    assert_eq!(unroll(&mut t, key(&f, "i"), 2).unwrap().len(), 1);
    let names: Vec<String> = t.stmts.values().map(|s| s.name.clone()).collect();
    assert_eq!(names, vec!["S0.1", "S0.2"]);
    assert_eq!(order(&t, &[]).len(), 128);
}

#[test]
fn full_unroll() {
    let (f, mut t) = setup("void f(int n, int A[n][5]) { for (int i = 0; i < n; i+=1) for (int j = 0; j < 5; j+=1) A[i][j] = i; }");
    unroll_full(&mut t, key(&f, "j")).unwrap();
    assert_eq!(t.stmts.len(), 5);
    let expect: Vec<Instance> = (0..3).flat_map(|i| (0..5).map(move |j| inst("S0", &[i, j]))).collect();
    assert_eq!(order(&t, &[("n", 3)]), expect);
    let (f, mut t) = setup(ONE);
    assert_eq!(unroll_full(&mut t, key(&f, "i")), Err(TransformError::NonConstantTripCount));
}

#[test]
fn distribute_then_fuse_round_trip() {
    let src = "void f(int n, int A[n], int B[n]) { for (int i = 0; i < n; i+=1) { A[i] = i; B[i] = A[i]; } }";
    let (f, mut t) = setup(src);
    let orig = order(&t, &[("n", 4)]);
    let outs = distribute(&mut t, key(&f, "i")).unwrap();
    let expect: Vec<Instance> =
        (0..4).map(|i| inst("S0", &[i])).chain((0..4).map(|i| inst("S1", &[i]))).collect();
    assert_eq!(order(&t, &[("n", 4)]), expect);
    fuse(&mut t, &outs).unwrap();
    assert_eq!(order(&t, &[("n", 4)]), orig);
}

#[test]
fn fuse_with_offset_and_mismatch() {
    let src = "void f(int n, int A[n+1], int B[n+1]) { for (int i = 0; i < n; i+=1) A[i] = i; for (int j = 1; j < n + 1; j+=1) B[j] = j; }";
    let (f, mut t) = setup(src);
    let (i, j) = (key(&f, "i"), key(&f, "j"));
    assert_eq!(next_sibling(&t, i), Ok(j));
    fuse(&mut t, &[i, j]).unwrap();
    let expect: Vec<Instance> = (0..3).flat_map(|i| [inst("S0", &[i]), inst("S1", &[i + 1])]).collect();
    assert_eq!(order(&t, &[("n", 3)]), expect);

    let src = "void f(int n, int A[n], int B[n]) { for (int i = 0; i < n; i+=1) A[i] = i; for (int j = 0; j < 5; j+=1) B[j] = j; }";
    let (f, mut t) = setup(src);
    assert_eq!(fuse(&mut t, &[key(&f, "i"), key(&f, "j")]), Err(TransformError::RangeMismatch));
    let src = "void f(int n, int A[n], int B[n]) { for (int i = 0; i < n; i+=1) A[i] = i; A[0] = 1; for (int j = 0; j < n; j+=1) B[j] = j; }";
    let (f, mut t) = setup(src);
    assert_eq!(fuse(&mut t, &[key(&f, "i"), key(&f, "j")]), Err(TransformError::NonAdjacent));
}

#[test]
fn unroll_and_jam_matches_oracle_and_sugar() {
    let src = "void f(int n, int m, int A[n][m]) { for (int i = 0; i < n; i+=1) for (int j = 0; j < m; j+=1) A[i][j] = i; }";
    let (f, mut t) = setup(src);
    let (i, j) = (key(&f, "i"), key(&f, "j"));
    unroll_and_jam(&mut t, i, None, 2).unwrap();
    for (n, m) in [(4, 3), (5, 2), (0, 3), (1, 1)] {
        let mut expect = Vec::new();
        let main = n / 2 * 2;
        for ii in (0..main).step_by(2) {
            for j in 0..m {
                expect.push(inst("S0", &[ii, j]));
                expect.push(inst("S0", &[ii + 1, j]));
            }
        }
        for ii in main..n {
            for j in 0..m {
                expect.push(inst("S0", &[ii, j]));
            }
        }
        assert_eq!(order(&t, &[("n", n), ("m", m)]), expect);
    }
    let (_, mut t) = setup(src);
    assert_eq!(unroll_and_jam(&mut t, j, None, 2), Err(TransformError::JamNotNested));
    assert_eq!(unroll_and_jam(&mut t, i, Some(i), 2), Err(TransformError::JamNotNested));
}

#[test]
fn pack_column_example() {
    let src = "void f(int n, double A[32][n]) { for (int i = 0; i < n; i+=1) for (int j = 0; j < 32; j+=1) g(A[j][i], i); }";
    let (f, mut t) = setup(src);
    let a = f.lookup("A").unwrap().clone();
    pack(&mut t, key(&f, "j"), &a, Allocation::Stack, None, &BTreeSet::new()).unwrap();
    assert_eq!(t.packs.len(), 1);
    let p = &t.packs[0];
    assert_eq!((p.name.as_str(), p.dims.clone(), p.extents.clone(), p.written), ("Packed_A", vec![0], vec![32], false));
    assert_eq!(validate_tree(&t), vec![]);
    let Node::Band(outer) = &t.root else { panic!() };
    let Node::Sequence(fs) = outer.child.as_ref() else { panic!("{t}") };
    assert_eq!(fs.len(), 2);
    assert_eq!(order(&t, &[("n", 3)]).len(), 96);
}

#[test]
fn pack_errors() {
    let src = "void f(int n, double A[n], double B[n]) { for (int i = 0; i < n; i+=1) A[i] = 0; }";
    let (f, mut t) = setup(src);
    let b = f.lookup("B").unwrap().clone();
    let a = f.lookup("A").unwrap().clone();
    assert!(matches!(
        pack(&mut t, key(&f, "i"), &b, Allocation::Stack, None, &BTreeSet::new()),
        Err(TransformError::EmptyFootprint { .. })
    ));
    assert!(matches!(
        pack(&mut t, key(&f, "i"), &a, Allocation::Stack, None, &BTreeSet::new()),
        Err(TransformError::ParametricFootprint { .. })
    ));
}

#[test]
fn pack_written_array_gets_copy_out() {
    let src = "void f(int n, double A[n][8]) { for (int i = 0; i < n; i+=1) for (int j = 0; j < 8; j+=1) A[i][j] += 1; }";
    let (f, mut t) = setup(src);
    let a = f.lookup("A").unwrap().clone();
    pack(&mut t, key(&f, "j"), &a, Allocation::Heap, None, &BTreeSet::new()).unwrap();
    assert!(t.packs[0].written);
    assert_eq!(t.packs[0].extents, vec![8]);
    let kinds: Vec<StmtKind> = t.stmts.values().map(|s| s.kind.clone()).collect();
    assert!(kinds.contains(&StmtKind::CopyOut { pack: 0 }));
    assert_eq!(validate_tree(&t), vec![]);
}
