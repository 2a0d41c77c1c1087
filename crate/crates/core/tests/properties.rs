mod common;

use std::collections::BTreeMap;

use common::{random_case, Rng8, SeedableRng};
use loopforge::affine::{floor_div, AffineExpr, QExpr};
use loopforge::codegen::{render, CodegenOptions};
use loopforge::directives::DirectiveKind;
use loopforge::frontend::parse_source;
use loopforge::frontend::printer::print_program;
use loopforge::legality::{grid_bindings, Policy};
use loopforge::pipeline::{transform_source, Options};
use loopforge::sched::{enumerate_order, lower_to_tree};
use proptest::prelude::*;

fn affine() -> impl Strategy<Value = AffineExpr> {
    (-20i64..20, -3i64..4, -3i64..4).prop_map(|(c, a, b)| {
        AffineExpr::constant(c).add(&AffineExpr::term("x", a)).unwrap().add(&AffineExpr::term("y", b)).unwrap()
    })
}

fn qexpr() -> impl Strategy<Value = QExpr> {
    let leaf = affine().prop_map(QExpr::from);
    leaf.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.add(&b).unwrap()),
            prop::collection::vec(inner.clone(), 1..3).prop_map(|v| QExpr::min(v).unwrap()),
            prop::collection::vec(inner.clone(), 1..3).prop_map(|v| QExpr::max(v).unwrap()),
            (inner.clone(), 1i64..6).prop_map(|(a, d)| a.floordiv(d).unwrap()),
            (inner, -3i64..4).prop_map(|(a, k)| a.scale(k).unwrap()),
        ]
    })
}

fn env(x: i64, y: i64) -> impl Fn(&str) -> Option<i64> {
    move |n| match n {
        "x" => Some(x),
        "y" => Some(y),
        _ => None,
    }
}

proptest! {
    #[test]
    fn qexpr_smart_constructors_preserve_value(a in qexpr(), b in qexpr(), d in 1i64..7, x in -10i64..10, y in -10i64..10) {
        let e = env(x, y);
        let (va, vb) = (a.eval(&e).unwrap(), b.eval(&e).unwrap());
        prop_assert_eq!(a.add(&b).unwrap().eval(&e).unwrap(), va + vb);
        prop_assert_eq!(QExpr::min(vec![a.clone(), b.clone()]).unwrap().eval(&e).unwrap(), va.min(vb));
        prop_assert_eq!(QExpr::max(vec![a.clone(), b.clone()]).unwrap().eval(&e).unwrap(), va.max(vb));
        prop_assert_eq!(a.floordiv(d).unwrap().eval(&e).unwrap(), floor_div(va, d).unwrap());
        prop_assert_eq!(a.sub(&b).unwrap().eval(&e).unwrap(), va - vb);
    }

    #[test]
    fn substitution_commutes_with_evaluation(a in qexpr(), r in affine(), x in -10i64..10, y in -10i64..10) {
        let rx = r.eval(&env(x, y)).unwrap();
        let direct = a.eval(&env(rx, y)).unwrap();
        prop_assert_eq!(a.substitute_aff("x", &r).unwrap().eval(&env(x, y)).unwrap(), direct);
    }

    #[test]
    fn printing_is_a_fixed_point(seed in any::<u64>(), k in 0usize..10, deps in any::<bool>()) {
        let mut rng = Rng8::seed_from_u64(seed);
        let c = random_case(&mut rng, DirectiveKind::ALL[k], deps);
        let once = print_program(&parse_source(&c.src).unwrap());
        let twice = print_program(&parse_source(&once).unwrap());
        prop_assert_eq!(once, twice);
    }

    /// Forced transformations reorder instances but never add or drop any.
    #[test]
    fn transformations_preserve_the_instance_set(seed in any::<u64>(), k in 0usize..10) {
        let mut rng = Rng8::seed_from_u64(seed);
        let c = random_case(&mut rng, DirectiveKind::ALL[k], true);
        let src: String = c.src.lines().map(|l| {
            if l.contains("#pragma clang loop") && !l.contains(" id(") { format!("{l} unsafe\n") } else { format!("{l}\n") }
        }).collect();
        let o = transform_source(&src, &Options { policy: Policy::Silent, ..Default::default() }).unwrap();
        let f = &o.program.functions[0];
        let before = lower_to_tree(f).unwrap();
        let after = o.functions[0].tree.as_ref().unwrap();
        let params: Vec<String> = f.scalar_params().map(|p| p.name.clone()).collect();
        for b in grid_bindings(&params, &[0, 2, 5]) {
            let mut x = enumerate_order(&before, &b, 100_000).unwrap();
            let mut y = enumerate_order(after, &b, 100_000).unwrap();
            x.sort();
            y.sort();
            prop_assert_eq!(x, y, "{}", src);
        }
    }

    /// Emitted C parses back and mentions no pragma.
    #[test]
    fn emitted_code_reparses(seed in any::<u64>(), k in 0usize..10) {
        let mut rng = Rng8::seed_from_u64(seed);
        let c = random_case(&mut rng, DirectiveKind::ALL[k], false);
        let o = transform_source(&c.src, &Options { policy: Policy::Silent, ..Default::default() }).unwrap();
        let text = render(&o, &CodegenOptions::default()).unwrap();
        prop_assert!(!text.contains("#pragma"));
        let p = parse_source(&text);
        prop_assert!(p.is_ok(), "{}", text);
        let names: BTreeMap<_, _> = p.unwrap().functions.iter().map(|f| (f.name.clone(), f.params.len())).collect();
        prop_assert_eq!(names.get("f").copied(), Some(o.program.functions[0].params.len()));
    }
}
