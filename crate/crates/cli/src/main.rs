use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hubmag::experiments::{
    self, convergence_table, initial_state, metadata, parse_k_range, parse_list, parse_tols, reference_solution,
    run_convergence, run_trace, run_workprec, trace_table, workprec_table, with_threads, ConvergenceSpec, ModelEcho,
    ModelSpec, OnSite, Reference, TraceSpec, WorkprecSpec,
};
use hubmag::io::{load_model, save_model, write_matrix_market, CsvTable};
use hubmag::{HubbardModel, Method, DEFAULT_KRYLOV_TOL};

type Res<T> = Result<T, Box<dyn std::error::Error>>;

/// Models larger than this need `--large`.
const LARGE_DIM: usize = 100_000;

#[derive(Parser)]
#[command(name = "hubmag", version, about = "Time propagation of driven Hubbard models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Assemble a model and write the binary cache.
    Build {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, env = "HUBMAG_OUT")]
        out: PathBuf,
    },
    /// Write H(t) in Matrix Market format.
    Export {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[arg(long, env = "HUBMAG_OUT")]
        out: PathBuf,
    },
    /// Equidistant steps tau = 2^-k against a reference solution.
    Convergence {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, env = "HUBMAG_METHODS", default_value = "cf2,cf4,cf4o,cf4oh,cf6n,cf7,magnus4,magnusstrang4")]
        methods: String,
        #[arg(long, env = "HUBMAG_K", default_value = "0..5")]
        k: String,
        #[arg(long, env = "HUBMAG_REFERENCE", default_value = "auto")]
        reference: String,
    },
    /// Adaptive runs over a list of tolerances.
    Workprec {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, env = "HUBMAG_METHODS", default_value = "all")]
        methods: String,
        #[arg(long, env = "HUBMAG_TOLS", default_value = "1e-4..1e-10")]
        tols: String,
        #[arg(long, env = "HUBMAG_REFERENCE", default_value = "auto")]
        reference: String,
    },
    /// One adaptive run with step sizes and observables after every step.
    Trace {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, env = "HUBMAG_METHOD", default_value = "cf4oh")]
        method: String,
        #[arg(long, env = "HUBMAG_TOL", default_value_t = 1e-11)]
        tol: f64,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Load a model cache instead of assembling one.
    #[arg(long, env = "HUBMAG_MODEL", conflicts_with = "geometry")]
    model: Option<PathBuf>,
    /// Lattice as RxC; 2x4 and 4x3 select the ladder and lattice presets.
    #[arg(long, env = "HUBMAG_GEOMETRY")]
    geometry: Option<String>,
    #[arg(long = "U", env = "HUBMAG_U")]
    u: Option<f64>,
    /// Uniform on-site energy.
    #[arg(long, env = "HUBMAG_ON_SITE", allow_hyphen_values = true, conflicts_with_all = ["corner", "inner"])]
    on_site: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires = "inner")]
    corner: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires = "corner")]
    inner: Option<f64>,
    #[arg(long, env = "HUBMAG_HOP")]
    hop: Option<f64>,
    #[arg(long, env = "HUBMAG_A")]
    a: Option<f64>,
    /// One value, or a comma list for parameter sweeps.
    #[arg(long, env = "HUBMAG_OMEGA")]
    omega: Option<String>,
    /// One value, or a comma list for parameter sweeps.
    #[arg(long = "sigma-p", env = "HUBMAG_SIGMA_P")]
    sigma_p: Option<String>,
    #[arg(long = "t-p", env = "HUBMAG_T_P")]
    t_p: Option<f64>,
    /// Allow models with more than 100000 basis states.
    #[arg(long, env = "HUBMAG_LARGE")]
    large: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, env = "HUBMAG_T0", default_value_t = 0.0)]
    t0: f64,
    #[arg(long, env = "HUBMAG_T1", default_value_t = 20.0)]
    t1: f64,
    #[arg(long, env = "HUBMAG_KRYLOV_TOL", default_value_t = DEFAULT_KRYLOV_TOL)]
    krylov_tol: f64,
    #[arg(long, env = "HUBMAG_THREADS")]
    threads: Option<usize>,
    #[arg(long, env = "HUBMAG_OUT")]
    out: PathBuf,
}

struct Loaded {
    model: HubbardModel,
    /// One entry per (sigma_p, omega) combination.
    pulses: Vec<(f64, f64)>,
}

fn single(list: &Option<String>, name: &str) -> Res<Option<f64>> {
    match list {
        None => Ok(None),
        Some(s) => {
            let v = parse_list(s)?;
            if v.len() != 1 {
                return Err(format!("--{name} takes a single value here").into());
            }
            Ok(Some(v[0]))
        }
    }
}

impl ModelArgs {
    fn spec(&self) -> Res<ModelSpec> {
        let mut s = ModelSpec::preset(self.geometry.as_deref().unwrap_or("2x4"))?;
        if let Some(u) = self.u {
            s.u = u;
        }
        if let Some(v) = self.on_site {
            s.on_site = OnSite::Uniform { value: v };
        }
        if let (Some(corner), Some(inner)) = (self.corner, self.inner) {
            s.on_site = OnSite::Corners { corner, inner };
        }
        if let Some(h) = self.hop {
            s.hop = h;
        }
        self.apply_pulse(&mut s.pulse);
        if let Some(w) = single(&self.omega, "omega")? {
            s.pulse.omega = w;
        }
        if let Some(sp) = single(&self.sigma_p, "sigma-p")? {
            s.pulse.sigma_p = sp;
        }
        Ok(s)
    }

    fn apply_pulse(&self, p: &mut hubmag::PulseParams) {
        if let Some(a) = self.a {
            p.a = a;
        }
        if let Some(t) = self.t_p {
            p.t_p = t;
        }
    }

    fn check_size(&self, dim: usize) -> Res<()> {
        if dim > LARGE_DIM && !self.large {
            return Err(format!("model has {dim} basis states; pass --large to proceed").into());
        }
        Ok(())
    }

    /// A single model, for `build` and `export`.
    fn one(&self) -> Res<HubbardModel> {
        if let Some(path) = &self.model {
            let mut m = load_model(path)?;
            self.check_size(m.dim())?;
            self.apply_pulse(&mut m.pulse);
            if let Some(w) = single(&self.omega, "omega")? {
                m.pulse.omega = w;
            }
            if let Some(sp) = single(&self.sigma_p, "sigma-p")? {
                m.pulse.sigma_p = sp;
            }
            return Ok(m);
        }
        let spec = self.spec()?;
        let (r, c) = experiments::parse_geometry(&spec.geometry)?;
        let n = r * c;
        let dim = hubmag::basis::binomial(n, n / 2) * hubmag::basis::binomial(n, n - n / 2);
        self.check_size(dim as usize)?;
        Ok(spec.build()?)
    }

    /// The model plus the pulse sweep for the run commands.
    fn sweep(&self) -> Res<Loaded> {
        let stripped = ModelArgs {
            omega: None,
            sigma_p: None,
            model: self.model.clone(),
            geometry: self.geometry.clone(),
            ..*self
        };
        let model = stripped.one()?;
        let sps = match &self.sigma_p {
            Some(s) => parse_list(s)?,
            None => vec![model.pulse.sigma_p],
        };
        let oms = match &self.omega {
            Some(s) => parse_list(s)?,
            None => vec![model.pulse.omega],
        };
        let pulses = sps.iter().flat_map(|&sp| oms.iter().map(move |&w| (sp, w))).collect();
        Ok(Loaded { model, pulses })
    }
}

fn parse_reference(s: &str) -> Res<Reference> {
    let s = s.trim().to_ascii_lowercase();
    if s == "auto" {
        return Ok(Reference::Auto);
    }
    if let Some(rest) = s.strip_prefix("dense") {
        let steps = match rest.strip_prefix(':') {
            Some(n) => n.parse()?,
            None if rest.is_empty() => 256,
            None => return Err(format!("reference `{s}`").into()),
        };
        return Ok(Reference::Dense { steps_per_unit: steps });
    }
    let (m, tol) = s.split_once(':').ok_or_else(|| format!("reference `{s}`: use auto, dense[:N] or METHOD:TOL"))?;
    Ok(Reference::Adaptive {
        method: m.parse()?,
        tol: tol.parse()?,
    })
}

fn out_path(base: &Path, pulses: &[(f64, f64)], p: (f64, f64)) -> PathBuf {
    if pulses.len() == 1 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}_sigma{}_omega{}.{ext}", p.0, p.1))
}

fn save(table: &CsvTable, path: &Path) -> Res<()> {
    table.save(path)?;
    println!("wrote {} ({} rows)", path.display(), table.rows.len());
    Ok(())
}

fn run(cli: Cli) -> Res<()> {
    match cli.cmd {
        Cmd::Build { model, out } => {
            let m = model.one()?;
            save_model(&out, &m)?;
            let (lo, hi) = m.extremal_eigenvalues(0.0)?;
            println!("rows {} cols {} n {}", m.rows, m.cols, m.dim());
            println!("nnz {} (stored {})", m.nnz(), m.stored_nnz());
            println!("eigenvalues [{lo:.6}, {hi:.6}]");
            println!("wrote {}", out.display());
        }
        Cmd::Export { model, t, out } => {
            let m = model.one()?;
            let mut w = std::io::BufWriter::new(std::fs::File::create(&out)?);
            write_matrix_market(&mut w, &m, t)?;
            println!("wrote {}", out.display());
        }
        Cmd::Convergence {
            model,
            run,
            methods,
            k,
            reference,
        } => {
            let loaded = model.sweep()?;
            let (k_min, k_max) = parse_k_range(&k)?;
            let mut spec = ConvergenceSpec::new(Method::parse_list(&methods)?, k_min, k_max, run.t0, run.t1);
            spec.krylov_tol = run.krylov_tol;
            spec.reference = parse_reference(&reference)?;
            for &p in &loaded.pulses {
                let mut m = loaded.model.clone();
                (m.pulse.sigma_p, m.pulse.omega) = p;
                let psi0 = initial_state(&m, run.t0)?;
                let (rows, resolved) = with_threads(run.threads, || -> hubmag::Result<_> {
                    let r = spec.reference.resolve(&m);
                    let reference = reference_solution(&m, r, run.t0, run.t1, &psi0, run.krylov_tol)?;
                    Ok((run_convergence(&m, &spec, &psi0, &reference)?, r))
                })??;
                let mut t = convergence_table(&rows)?;
                metadata(&mut t, "convergence", &ModelEcho::of(&m), &spec, run.krylov_tol)?;
                t.meta("reference", resolved.describe());
                save(&t, &out_path(&run.out, &loaded.pulses, p))?;
            }
        }
        Cmd::Workprec {
            model,
            run,
            methods,
            tols,
            reference,
        } => {
            let loaded = model.sweep()?;
            let mut spec = WorkprecSpec::new(Method::parse_list(&methods)?, parse_tols(&tols)?, run.t0, run.t1);
            spec.krylov_tol = run.krylov_tol;
            spec.reference = parse_reference(&reference)?;
            for &p in &loaded.pulses {
                let mut m = loaded.model.clone();
                (m.pulse.sigma_p, m.pulse.omega) = p;
                let psi0 = initial_state(&m, run.t0)?;
                let (rows, resolved) = with_threads(run.threads, || -> hubmag::Result<_> {
                    let r = spec.reference.resolve(&m);
                    let reference = reference_solution(&m, r, run.t0, run.t1, &psi0, run.krylov_tol)?;
                    Ok((run_workprec(&m, &spec, &psi0, &reference)?, r))
                })??;
                let mut t = workprec_table(&rows)?;
                metadata(&mut t, "workprec", &ModelEcho::of(&m), &spec, run.krylov_tol)?;
                t.meta("reference", resolved.describe());
                save(&t, &out_path(&run.out, &loaded.pulses, p))?;
            }
        }
        Cmd::Trace { model, run, method, tol } => {
            let loaded = model.sweep()?;
            let mut spec = TraceSpec::new(method.parse()?, tol, run.t0, run.t1);
            spec.krylov_tol = run.krylov_tol;
            for &p in &loaded.pulses {
                let mut m = loaded.model.clone();
                (m.pulse.sigma_p, m.pulse.omega) = p;
                let psi0 = initial_state(&m, run.t0)?;
                let tr = run_trace(&m, &spec, &psi0)?;
                let mut t = trace_table(&tr)?;
                metadata(&mut t, "trace", &ModelEcho::of(&m), &spec, run.krylov_tol)?;
                t.meta("steps_accepted", tr.accepted_steps);
                t.meta("steps_rejected", tr.rejected_steps);
                save(&t, &out_path(&run.out, &loaded.pulses, p))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
