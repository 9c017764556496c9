//! The experiment families: equidistant convergence studies, adaptive
//! work–precision sweeps and observable traces, plus their CSV tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{propagate_adaptive, propagate_fixed, Record, StepController, Trajectory};
use crate::dense;
use crate::io::{fmt_f64, CsvTable};
use crate::method::Method;
use crate::model::{Geometry, HubbardModel};
use crate::pulse::PulseParams;
use crate::sparse::diff_norm;
use crate::{Error, Result, C64, DEFAULT_KRYLOV_TOL};

pub const CONVERGENCE_COLUMNS: [&str; 4] = ["method", "tau", "error_l2_vs_reference", "matvecs"];
pub const WORKPREC_COLUMNS: [&str; 7] = [
    "method",
    "tol",
    "achieved_error",
    "matvecs",
    "steps_accepted",
    "steps_rejected",
    "quotient",
];
pub const TRACE_COLUMNS: [&str; 8] = [
    "t",
    "tau",
    "norm",
    "energy",
    "double_occ",
    "err_est",
    "matvecs_cum",
    "krylov_m",
];

/// Largest dimension for which references come from the dense propagator.
pub const DENSE_REFERENCE_MAX_DIM: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OnSite {
    Uniform { value: f64 },
    Corners { corner: f64, inner: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub geometry: String,
    pub u: f64,
    pub on_site: OnSite,
    pub hop: f64,
    pub pulse: PulseParams,
}

pub fn parse_geometry(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Parameter(format!("geometry `{s}` is not of the form RxC"));
    let (r, c) = s.trim().to_ascii_lowercase().split_once('x').map(|(a, b)| (a.to_string(), b.to_string())).ok_or_else(bad)?;
    let r: usize = r.parse().map_err(|_| bad())?;
    let c: usize = c.parse().map_err(|_| bad())?;
    if r == 0 || c == 0 {
        return Err(bad());
    }
    Ok((r, c))
}

impl ModelSpec {
    /// Defaults for a geometry: the ladder and lattice setups for `2x4` and
    /// `4x3`, otherwise `U = 4`, zero on-site energies and the ladder drive.
    pub fn preset(geometry: &str) -> Result<Self> {
        let (r, c) = parse_geometry(geometry)?;
        let geometry = format!("{r}x{c}");
        Ok(match (r, c) {
            (2, 4) => ModelSpec {
                geometry,
                u: 4.0,
                on_site: OnSite::Corners {
                    corner: -1.75,
                    inner: -2.25,
                },
                hop: 1.0,
                pulse: PulseParams::ladder_default(),
            },
            (4, 3) => ModelSpec {
                geometry,
                u: 8.0,
                on_site: OnSite::Uniform { value: -4.0 },
                hop: 1.0,
                pulse: PulseParams::lattice_4x3_default(),
            },
            _ => ModelSpec {
                geometry,
                u: 4.0,
                on_site: OnSite::Uniform { value: 0.0 },
                hop: 1.0,
                pulse: PulseParams::ladder_default(),
            },
        })
    }

    pub fn lattice(&self) -> Result<Geometry> {
        let (r, c) = parse_geometry(&self.geometry)?;
        let g = match self.on_site {
            OnSite::Uniform { value } => Geometry::uniform(r, c, value, self.hop),
            OnSite::Corners { corner, inner } => Geometry::corner_pattern(r, c, corner, inner, self.hop),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn build(&self) -> Result<HubbardModel> {
        HubbardModel::half_filled(&self.lattice()?, self.u, self.pulse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Reference {
    /// Dense propagation for small models, adaptive CF4oH at `1e-11` otherwise.
    Auto,
    /// Dense sixth-order Magnus with this many steps per unit time.
    Dense { steps_per_unit: usize },
    Adaptive { method: Method, tol: f64 },
}

impl Reference {
    pub fn resolve(self, model: &HubbardModel) -> Reference {
        match self {
            Reference::Auto if model.dim() <= DENSE_REFERENCE_MAX_DIM => Reference::Dense { steps_per_unit: 256 },
            Reference::Auto => Reference::Adaptive {
                method: Method::Cf4oH,
                tol: 1e-11,
            },
            r => r,
        }
    }

    pub fn describe(self) -> String {
        match self {
            Reference::Auto => "auto".into(),
            Reference::Dense { steps_per_unit } => format!("dense magnus6, {steps_per_unit} steps per unit time"),
            Reference::Adaptive { method, tol } => format!("adaptive {method} at tol {tol:e}"),
        }
    }
}

/// State at `t0`: the ground state of `H(t0)`.
pub fn initial_state(model: &HubbardModel, t0: f64) -> Result<Vec<C64>> {
    model.ground_state(t0)
}

pub fn reference_solution(
    model: &HubbardModel,
    reference: Reference,
    t0: f64,
    t1: f64,
    psi0: &[C64],
    krylov_tol: f64,
) -> Result<Vec<C64>> {
    match reference.resolve(model) {
        Reference::Dense { steps_per_unit } => {
            let steps = (((t1 - t0) * steps_per_unit as f64).ceil() as usize).max(1);
            Ok(dense::reference_propagate(model, t0, t1, psi0, steps))
        }
        Reference::Adaptive { method, tol } => {
            let ctrl = StepController::new(tol, method.controller_order())?;
            let tr = propagate_adaptive(&method.stepper(krylov_tol), model, t0, t1, &ctrl, psi0, Record::Nothing)?;
            Ok(tr.psi_final)
        }
        Reference::Auto => unreachable!("resolved above"),
    }
}

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Parameter(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    pub methods: Vec<Method>,
    pub k_min: u32,
    pub k_max: u32,
    pub t0: f64,
    pub t1: f64,
    pub krylov_tol: f64,
    pub reference: Reference,
}

impl ConvergenceSpec {
    pub fn new(methods: Vec<Method>, k_min: u32, k_max: u32, t0: f64, t1: f64) -> Self {
        ConvergenceSpec {
            methods,
            k_min,
            k_max,
            t0,
            t1,
            krylov_tol: DEFAULT_KRYLOV_TOL,
            reference: Reference::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub method: Method,
    pub tau: f64,
    pub error: f64,
    pub matvecs: u64,
}

/// Number of equidistant steps of nominal size `2^-k` covering `[t0, t1]`.
pub fn steps_for(k: u32, t0: f64, t1: f64) -> usize {
    let n = (t1 - t0) * 2f64.powi(k as i32);
    (n - 1e-9).ceil().max(1.0) as usize
}

pub fn run_convergence(
    model: &HubbardModel,
    spec: &ConvergenceSpec,
    psi0: &[C64],
    reference: &[C64],
) -> Result<Vec<ConvergenceRow>> {
    if spec.k_min > spec.k_max {
        return Err(Error::Parameter(format!("empty k range {}..{}", spec.k_min, spec.k_max)));
    }
    let cells: Vec<(Method, u32)> = spec
        .methods
        .iter()
        .flat_map(|&m| (spec.k_min..=spec.k_max).map(move |k| (m, k)))
        .collect();
    cells
        .par_iter()
        .map(|&(method, k)| {
            let n = steps_for(k, spec.t0, spec.t1);
            let tr = propagate_fixed(&method.stepper(spec.krylov_tol), model, spec.t0, spec.t1, n, psi0, Record::Nothing)?;
            Ok(ConvergenceRow {
                method,
                tau: (spec.t1 - spec.t0) / n as f64,
                error: diff_norm(&tr.psi_final, reference),
                matvecs: tr.matvecs,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkprecSpec {
    pub methods: Vec<Method>,
    pub tols: Vec<f64>,
    pub t0: f64,
    pub t1: f64,
    pub krylov_tol: f64,
    pub reference: Reference,
}

impl WorkprecSpec {
    pub fn new(methods: Vec<Method>, tols: Vec<f64>, t0: f64, t1: f64) -> Self {
        WorkprecSpec {
            methods,
            tols,
            t0,
            t1,
            krylov_tol: DEFAULT_KRYLOV_TOL,
            reference: Reference::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkprecRow {
    pub method: Method,
    pub tol: f64,
    pub achieved_error: f64,
    pub matvecs: u64,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub final_norm: f64,
}

impl WorkprecRow {
    pub fn quotient(&self) -> f64 {
        self.achieved_error / self.tol
    }
}

pub fn run_workprec(
    model: &HubbardModel,
    spec: &WorkprecSpec,
    psi0: &[C64],
    reference: &[C64],
) -> Result<Vec<WorkprecRow>> {
    let cells: Vec<(Method, f64)> = spec
        .methods
        .iter()
        .flat_map(|&m| spec.tols.iter().map(move |&t| (m, t)))
        .collect();
    cells
        .par_iter()
        .map(|&(method, tol)| {
            let ctrl = StepController::new(tol, method.controller_order())?;
            let tr = propagate_adaptive(
                &method.stepper(spec.krylov_tol),
                model,
                spec.t0,
                spec.t1,
                &ctrl,
                psi0,
                Record::Nothing,
            )?;
            Ok(WorkprecRow {
                method,
                tol,
                achieved_error: diff_norm(&tr.psi_final, reference),
                matvecs: tr.matvecs,
                steps_accepted: tr.accepted_steps,
                steps_rejected: tr.rejected_steps,
                final_norm: crate::sparse::norm2(&tr.psi_final),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSpec {
    pub method: Method,
    pub tol: f64,
    pub t0: f64,
    pub t1: f64,
    pub krylov_tol: f64,
}

impl TraceSpec {
    pub fn new(method: Method, tol: f64, t0: f64, t1: f64) -> Self {
        TraceSpec {
            method,
            tol,
            t0,
            t1,
            krylov_tol: DEFAULT_KRYLOV_TOL,
        }
    }
}

pub fn run_trace(model: &HubbardModel, spec: &TraceSpec, psi0: &[C64]) -> Result<Trajectory> {
    let ctrl = StepController::new(spec.tol, spec.method.controller_order())?;
    propagate_adaptive(
        &spec.method.stepper(spec.krylov_tol),
        model,
        spec.t0,
        spec.t1,
        &ctrl,
        psi0,
        Record::Observables,
    )
}

/// Common metadata block: command, spec echo, version, solver constants.
pub fn metadata<S: Serialize>(table: &mut CsvTable, command: &str, model: &ModelEcho, spec: &S, krylov_tol: f64) -> Result<()> {
    let c = StepController::new(1.0, 1)?;
    table.meta("command", command);
    table.meta("version", concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")));
    table.meta("model", serde_json::to_string(model).map_err(|e| Error::Parameter(e.to_string()))?);
    table.meta("spec", serde_json::to_string(spec).map_err(|e| Error::Parameter(e.to_string()))?);
    table.meta("krylov_tol", fmt_f64(krylov_tol));
    table.meta(
        "controller",
        format!(
            "accept if err <= tol; safety {}, grow_max {}, shrink_min {}",
            c.safety, c.grow_max, c.shrink_min
        ),
    );
    table.meta("error_norm", "2-norm of the difference at the final time");
    Ok(())
}

/// Model description echoed into output files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEcho {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub nnz: usize,
    pub u: f64,
    pub pulse: PulseParams,
}

impl ModelEcho {
    pub fn of(m: &HubbardModel) -> Self {
        ModelEcho {
            rows: m.rows,
            cols: m.cols,
            dim: m.dim(),
            nnz: m.nnz(),
            u: m.u,
            pulse: m.pulse,
        }
    }
}

pub fn convergence_table(rows: &[ConvergenceRow]) -> Result<CsvTable> {
    let mut t = CsvTable::new(&CONVERGENCE_COLUMNS);
    for r in rows {
        t.push(vec![r.method.to_string(), fmt_f64(r.tau), fmt_f64(r.error), r.matvecs.to_string()])?;
    }
    Ok(t)
}

pub fn workprec_table(rows: &[WorkprecRow]) -> Result<CsvTable> {
    let mut t = CsvTable::new(&WORKPREC_COLUMNS);
    for r in rows {
        t.push(vec![
            r.method.to_string(),
            fmt_f64(r.tol),
            fmt_f64(r.achieved_error),
            r.matvecs.to_string(),
            r.steps_accepted.to_string(),
            r.steps_rejected.to_string(),
            fmt_f64(r.quotient()),
        ])?;
    }
    Ok(t)
}

pub fn trace_table(tr: &Trajectory) -> Result<CsvTable> {
    let mut t = CsvTable::new(&TRACE_COLUMNS);
    for s in &tr.samples {
        t.push(vec![
            fmt_f64(s.t),
            fmt_f64(s.tau),
            fmt_f64(s.norm),
            fmt_f64(s.energy),
            fmt_f64(s.double_occ),
            fmt_f64(s.err_est),
            s.matvecs_cum.to_string(),
            s.krylov_m.to_string(),
        ])?;
    }
    Ok(t)
}

/// `"0..5"` or `"3"`; both ends inclusive.
pub fn parse_k_range(s: &str) -> Result<(u32, u32)> {
    let bad = || Error::Parameter(format!("k range `{s}`"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a.trim(), b.trim().trim_start_matches('=')),
        None => (s.trim(), s.trim()),
    };
    let (a, b): (u32, u32) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

/// Either a comma list (`"1e-4,1e-6"`) or a decade range (`"1e-4..1e-10"`).
pub fn parse_tols(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parameter(format!("tolerance list `{s}`"));
    let out: Vec<f64> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if !(a > 0.0 && b > 0.0) {
            return Err(bad());
        }
        let (la, lb) = (a.log10().round() as i32, b.log10().round() as i32);
        let step = if lb >= la { 1 } else { -1 };
        let mut v = Vec::new();
        let mut e = la;
        loop {
            v.push(10f64.powi(e));
            if e == lb {
                break;
            }
            e += step;
        }
        v
    } else {
        parse_list(s)?
    };
    if out.is_empty() || out.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(bad());
    }
    Ok(out)
}

/// Comma-separated numbers; braces are allowed (`"{1,2,4}"`).
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    let t = s.trim().trim_start_matches('{').trim_end_matches('}');
    t.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Parameter(format!("number list `{s}`"))))
        .collect()
}
