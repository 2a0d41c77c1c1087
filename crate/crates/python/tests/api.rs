use std::sync::Once;

use pyo3::prelude::*;
use pyo3::types::PyDict;

static INIT: Once = Once::new();

fn with_module<R>(f: impl FnOnce(Python<'_>, &Bound<'_, PyModule>) -> PyResult<R>) -> R {
    INIT.call_once(|| pyo3::append_to_inittab!(loopforge_module));
    Python::attach(|py| {
        let m = py.import("loopforge").unwrap();
        f(py, &m).unwrap()
    })
}

use loopforge_py::loopforge_module;

const REV: &str = "void f(int n, int A[n]) {\n#pragma clang loop reverse\nfor (int i = 0; i < n; i += 1)\n  A[i] = i;\n}\n";
const REC: &str = "void f(int n, int A[n]) {\n#pragma clang loop reverse\nfor (int i = 1; i < n; i += 1)\n  A[i] = A[i - 1] + 1;\n}\n";

#[test]
fn transform_emit_and_verify() {
    with_module(|_, m| {
        let o = m.call_method1("transform", (REV,))?;
        assert!(!o.getattr("has_errors")?.extract::<bool>()?);
        let c: String = o.call_method0("emit_c")?.extract()?;
        assert!(c.contains("c0 >= 0; c0 -= 1"), "{c}");
        let v: Vec<(String, bool, String)> = o.call_method0("verify")?.extract()?;
        assert!(v[0].1, "{v:?}");
        let r = o.getattr("reports")?.get_item(0)?;
        assert_eq!(r.getattr("verdict")?.extract::<String>()?, "legal");
        Ok(())
    })
}

#[test]
fn illegal_and_errors() {
    with_module(|py, m| {
        let kw = PyDict::new(py);
        kw.set_item("policy", "warn")?;
        let o = m.call_method("transform", (REC,), Some(&kw))?;
        let d: Vec<String> = o.getattr("diagnostics")?.extract()?;
        assert!(d[0].contains("warning") && d[0].contains("flow S0[1] -> S0[2]"), "{d:?}");
        let e = m.call_method1("transform", ("void f( {",)).unwrap_err();
        assert!(e.is_instance(py, &m.getattr("LoopforgeError")?));
        Ok(())
    })
}

#[test]
fn interpret_returns_written_cells() {
    with_module(|py, m| {
        let params = PyDict::new(py);
        params.set_item("n", 3)?;
        let r = m.call_method1("interpret", (REV, "f", params))?;
        let cells: Vec<(Vec<i64>, f64)> = r.get_item("A")?.extract()?;
        assert_eq!(cells, vec![(vec![0], 0.0), (vec![1], 1.0), (vec![2], 2.0)]);
        Ok(())
    })
}
