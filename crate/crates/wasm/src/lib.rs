//! Browser bindings: build a model, propagate it adaptively, and compare
//! integrators against a dense reference. Results are returned as JSON text.

use hubmag::basis::binomial;
use hubmag::control::{propagate_adaptive, Record, StepController};
use hubmag::experiments::{initial_state, parse_geometry, reference_solution, ModelSpec, Reference};
use hubmag::sparse::diff_norm;
use hubmag::{HubbardModel, Method, DEFAULT_KRYLOV_TOL};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest basis the page will propagate; the 2x4 ladder fits.
const MAX_DIM: usize = 5000;

type Out = Result<String, String>;

fn js_err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn model(geometry: &str, u: f64, a: f64) -> Result<HubbardModel, String> {
    let mut spec = ModelSpec::preset(geometry).map_err(js_err)?;
    let (r, c) = parse_geometry(geometry).map_err(js_err)?;
    let n = r * c;
    let dim = binomial(n, n / 2) * binomial(n, n - n / 2);
    if dim > MAX_DIM as u128 {
        return Err(js_err(format!("{geometry} has {dim} states, the demo stops at {MAX_DIM}")));
    }
    spec.u = u;
    spec.pulse.a = a;
    spec.build().map_err(js_err)
}

/// Dimension, nonzeros and extremal eigenvalues of `H(0)`.
#[wasm_bindgen]
pub fn describe(geometry: &str, u: f64, a: f64) -> Result<String, JsValue> {
    describe_json(geometry, u, a).map_err(|e| JsValue::from_str(&e))
}

/// Adaptive propagation from the ground state; one entry per accepted step
/// plus the initial state.
#[wasm_bindgen]
pub fn trace(geometry: &str, u: f64, a: f64, method: &str, tol: f64, t1: f64) -> Result<String, JsValue> {
    trace_json(geometry, u, a, method, tol, t1).map_err(|e| JsValue::from_str(&e))
}

/// Achieved error and cost of each method over a tolerance ladder, against
/// a dense reference (small models) or a tight CF4oH run.
#[wasm_bindgen]
pub fn work_precision(geometry: &str, u: f64, a: f64, methods: &str, t1: f64) -> Result<String, JsValue> {
    work_precision_json(geometry, u, a, methods, t1).map_err(|e| JsValue::from_str(&e))
}

pub fn describe_json(geometry: &str, u: f64, a: f64) -> Out {
    let m = model(geometry, u, a)?;
    let (lo, hi) = m.extremal_eigenvalues(0.0).map_err(js_err)?;
    Ok(json!({
        "rows": m.rows,
        "cols": m.cols,
        "dim": m.dim(),
        "nnz": m.nnz(),
        "e_min": lo,
        "e_max": hi,
        "pulse": m.pulse,
    })
    .to_string())
}

pub fn trace_json(geometry: &str, u: f64, a: f64, method: &str, tol: f64, t1: f64) -> Out {
    let m = model(geometry, u, a)?;
    let method: Method = method.parse().map_err(js_err)?;
    let ctrl = StepController::new(tol, method.controller_order()).map_err(js_err)?;
    let psi0 = initial_state(&m, 0.0).map_err(js_err)?;
    let tr = propagate_adaptive(&method.stepper(DEFAULT_KRYLOV_TOL), &m, 0.0, t1, &ctrl, &psi0, Record::Observables)
        .map_err(js_err)?;
    let col = |f: &dyn Fn(&hubmag::control::Sample) -> f64| tr.samples.iter().map(f).collect::<Vec<f64>>();
    Ok(json!({
        "t": col(&|s| s.t),
        "tau": col(&|s| s.tau),
        "energy": col(&|s| s.energy),
        "double_occ": col(&|s| s.double_occ),
        "norm": col(&|s| s.norm),
        "accepted": tr.accepted_steps,
        "rejected": tr.rejected_steps,
        "matvecs": tr.matvecs,
    })
    .to_string())
}

pub fn work_precision_json(geometry: &str, u: f64, a: f64, methods: &str, t1: f64) -> Out {
    let m = model(geometry, u, a)?;
    let methods = Method::parse_list(methods).map_err(js_err)?;
    let psi0 = initial_state(&m, 0.0).map_err(js_err)?;
    let reference = Reference::Auto.resolve(&m);
    let exact = reference_solution(&m, reference, 0.0, t1, &psi0, DEFAULT_KRYLOV_TOL).map_err(js_err)?;
    let mut series = Vec::new();
    for method in methods {
        let mut points = Vec::new();
        for k in 3..=9 {
            let tol = 10f64.powi(-k);
            let ctrl = StepController::new(tol, method.controller_order()).map_err(js_err)?;
            let tr = propagate_adaptive(&method.stepper(DEFAULT_KRYLOV_TOL), &m, 0.0, t1, &ctrl, &psi0, Record::Nothing)
                .map_err(js_err)?;
            points.push(json!({
                "tol": tol,
                "error": diff_norm(&tr.psi_final, &exact),
                "matvecs": tr.matvecs,
                "steps": tr.accepted_steps,
            }));
        }
        series.push(json!({ "method": method.name(), "points": points }));
    }
    Ok(json!({ "reference": reference.describe(), "series": series }).to_string())
}
