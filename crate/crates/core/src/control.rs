//! Step-size control and the propagation loops.

use serde::{Deserialize, Serialize};

use crate::method::Stepper;
use crate::model::HubbardModel;
use crate::sparse::{norm2, MatvecCounter};
use crate::{Error, Result, C64};

pub const MAX_ACCEPTED_STEPS: usize = 1_000_000;
pub const MAX_CONSECUTIVE_REJECTIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepController {
    pub tol: f64,
    pub safety: f64,
    pub grow_max: f64,
    pub shrink_min: f64,
    pub order: u32,
}

impl StepController {
    pub fn new(tol: f64, order: u32) -> Result<Self> {
        let c = StepController {
            tol,
            safety: 0.9,
            grow_max: 4.0,
            shrink_min: 0.25,
            order,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.tol > 0.0
            && self.tol.is_finite()
            && 0.0 < self.shrink_min
            && self.shrink_min < 1.0
            && 1.0 < self.grow_max
            && self.grow_max.is_finite()
            && 0.0 < self.safety
            && self.safety <= 1.0
            && self.order >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid step controller {self:?}")))
        }
    }

    /// Accept iff `err ≤ tol`; the next step is `τ·clamp(ρ (tol/err)^{1/(p+1)}, α_min, α_max)`.
    pub fn propose(&self, tau: f64, err_est: f64) -> (bool, f64) {
        if !err_est.is_finite() {
            return (false, tau * self.shrink_min);
        }
        let accept = err_est <= self.tol;
        let ratio = self.tol / err_est.max(1e-300);
        let factor = (self.safety * ratio.powf(1.0 / (self.order as f64 + 1.0))).clamp(self.shrink_min, self.grow_max);
        (accept, tau * factor)
    }

    pub fn initial_step(t0: f64, t_end: f64) -> f64 {
        (0.1f64).min((t_end - t0) / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub tau: f64,
    pub norm: f64,
    pub energy: f64,
    pub double_occ: f64,
    pub err_est: f64,
    pub matvecs_cum: u64,
    pub krylov_m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Record {
    /// Only step data; energy and double occupation are left as NaN.
    #[default]
    Steps,
    /// Also evaluate the observables after every accepted step.
    Observables,
    Nothing,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub matvecs: u64,
    pub psi_final: Vec<C64>,
}

impl Trajectory {
    pub fn max_norm_drift(&self) -> f64 {
        self.samples.iter().map(|s| (s.norm - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Energy and double occupation of `psi / ‖psi‖`.
pub fn observables(model: &HubbardModel, t: f64, psi: &[C64]) -> Result<(f64, f64)> {
    let n = norm2(psi);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::State(format!("state norm {n}")));
    }
    let unit: Vec<C64> = psi.iter().map(|z| z / n).collect();
    Ok((model.energy(t, &unit)?, model.double_occupation(&unit)?))
}

fn sample(
    model: &HubbardModel,
    record: Record,
    t: f64,
    tau: f64,
    psi: &[C64],
    err_est: f64,
    matvecs_cum: u64,
    krylov_m: usize,
) -> Result<Sample> {
    let (energy, double_occ) = match record {
        Record::Observables => observables(model, t, psi)?,
        _ => (f64::NAN, f64::NAN),
    };
    Ok(Sample {
        t,
        tau,
        norm: norm2(psi),
        energy,
        double_occ,
        err_est,
        matvecs_cum,
        krylov_m,
    })
}

fn check_window(t0: f64, t_end: f64, psi0: &[C64], model: &HubbardModel) -> Result<()> {
    if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::Parameter(format!("time window [{t0}, {t_end}]")));
    }
    crate::error::check_dim(model.dim(), psi0.len())
}

/// Adaptive propagation from `t0` to `t_end`, landing exactly on `t_end`.
pub fn propagate_adaptive(
    stepper: &Stepper,
    model: &HubbardModel,
    t0: f64,
    t_end: f64,
    ctrl: &StepController,
    psi0: &[C64],
    record: Record,
) -> Result<Trajectory> {
    check_window(t0, t_end, psi0, model)?;
    ctrl.validate()?;
    let counter = MatvecCounter::new();
    let mut traj = Trajectory {
        samples: Vec::new(),
        accepted_steps: 0,
        rejected_steps: 0,
        matvecs: 0,
        psi_final: psi0.to_vec(),
    };
    if record != Record::Nothing {
        traj.samples.push(sample(model, record, t0, 0.0, psi0, 0.0, 0, 0)?);
    }
    let mut t = t0;
    let mut tau = StepController::initial_step(t0, t_end);
    let mut rejections = 0;
    let eps = 1e-13 * t_end.abs().max(1.0);
    while t < t_end {
        let last = t + tau >= t_end - eps;
        let h = if last { t_end - t } else { tau };
        let est = stepper.step_with_estimate(model, t, h, &traj.psi_final, &counter)?;
        let (accept, next) = ctrl.propose(h, est.err_est);
        if accept {
            rejections = 0;
            traj.accepted_steps += 1;
            if traj.accepted_steps > MAX_ACCEPTED_STEPS {
                return Err(Error::StepControl(format!("more than {MAX_ACCEPTED_STEPS} steps")));
            }
            t = if last { t_end } else { t + h };
            traj.psi_final = est.psi_next;
            if record != Record::Nothing {
                let s = sample(model, record, t, h, &traj.psi_final, est.err_est, counter.get(), est.krylov_m)?;
                traj.samples.push(s);
            }
            // a clipped final step says nothing about the natural step size
            if !last || next > tau {
                tau = next;
            }
        } else {
            rejections += 1;
            traj.rejected_steps += 1;
            if rejections > MAX_CONSECUTIVE_REJECTIONS {
                return Err(Error::StepControl(format!(
                    "{rejections} consecutive rejections at t = {t}, tau = {h:e}"
                )));
            }
            tau = next;
        }
    }
    traj.matvecs = counter.get();
    Ok(traj)
}

/// Propagation on a uniform grid of `n_steps` steps.
pub fn propagate_fixed(
    stepper: &Stepper,
    model: &HubbardModel,
    t0: f64,
    t_end: f64,
    n_steps: usize,
    psi0: &[C64],
    record: Record,
) -> Result<Trajectory> {
    check_window(t0, t_end, psi0, model)?;
    if n_steps == 0 {
        return Err(Error::Parameter("n_steps must be positive".into()));
    }
    let counter = MatvecCounter::new();
    let mut psi = psi0.to_vec();
    let mut samples = Vec::new();
    if record != Record::Nothing {
        samples.push(sample(model, record, t0, 0.0, psi0, 0.0, 0, 0)?);
    }
    let grid = |k: usize| if k == n_steps { t_end } else { t0 + (t_end - t0) * k as f64 / n_steps as f64 };
    for k in 0..n_steps {
        let (ta, tb) = (grid(k), grid(k + 1));
        psi = stepper.step(model, ta, tb - ta, &psi, &counter)?;
        if record != Record::Nothing {
            samples.push(sample(model, record, tb, tb - ta, &psi, f64::NAN, counter.get(), 0)?);
        }
    }
    Ok(Trajectory {
        samples,
        accepted_steps: n_steps,
        rejected_steps: 0,
        matvecs: counter.get(),
        psi_final: psi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;
    use crate::method::Method;
    use crate::model::Geometry;
    use crate::pulse::PulseParams;
    use crate::sparse::diff_norm;

    fn dimer(pulse: PulseParams) -> HubbardModel {
        HubbardModel::half_filled(&Geometry::uniform(1, 2, -1.0, 1.0), 4.0, pulse).unwrap()
    }

    #[test]
    fn propose_examples() {
        let c = StepController::new(1e-6, 4).unwrap();
        let (a, n) = c.propose(0.1, 1e-6);
        assert!(a && (n - 0.09).abs() < 1e-15);
        let (a, n) = c.propose(0.1, 0.0);
        assert!(a && (n - 0.4).abs() < 1e-15);
        let (a, n) = c.propose(0.1, 32.0 * 1e-6);
        assert!(!a && (n - 0.045).abs() < 1e-12, "{n}");
        let (a, n) = c.propose(0.1, f64::NAN);
        assert!(!a && n == 0.025);
        assert!(StepController::new(0.0, 4).is_err());
        let mut bad = c;
        bad.grow_max = 0.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_hamiltonian_grows_at_the_maximal_rate() {
        let m = dimer(PulseParams::off());
        let psi = m.ground_state(0.0).unwrap();
        let s = Method::Cf4.stepper(1e-12);
        let ctrl = StepController::new(1e-8, 4).unwrap();
        let tr = propagate_adaptive(&s, &m, 0.0, 20.0, &ctrl, &psi, Record::Steps).unwrap();
        // 0.1, 0.4, 1.6, 6.4, then the remaining 11.5 clipped
        let taus: Vec<f64> = tr.samples[1..].iter().map(|s| s.tau).collect();
        assert_eq!(taus.len(), 5, "{taus:?}");
        assert!((taus[3] - 6.4).abs() < 1e-12);
        assert_eq!(tr.samples.last().unwrap().t, 20.0);
        assert_eq!(tr.rejected_steps, 0);
        assert!(tr.samples.iter().all(|s| s.err_est < 1e-10));
    }

    #[test]
    fn adaptive_run_meets_tolerance_on_the_dimer() {
        let m = dimer(PulseParams::new(1.0, 3.5, 2.0, 6.0));
        let psi = m.ground_state(0.0).unwrap();
        let exact = dense::reference_propagate(&m, 0.0, 12.0, &psi, 4096);
        for method in Method::EXPONENTIAL {
            let ctrl = StepController::new(1e-8, method.controller_order()).unwrap();
            let tr = propagate_adaptive(&method.stepper(1e-12), &m, 0.0, 12.0, &ctrl, &psi, Record::Observables).unwrap();
            let err = diff_norm(&tr.psi_final, &exact);
            // unitary propagation: the global error is at most the sum of the local ones
            assert!(err < 2.0 * tr.accepted_steps as f64 * 1e-8, "{method}: {err:e}");
            assert!(tr.max_norm_drift() < 1e-9);
            let ts: Vec<f64> = tr.samples.iter().map(|s| s.t).collect();
            assert!(ts.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(*ts.last().unwrap(), 12.0);
        }
    }

    #[test]
    fn fixed_single_step_equals_stepper_call() {
        let m = dimer(PulseParams::ladder_default());
        let psi = m.ground_state(0.0).unwrap();
        let s = Method::Cf4o.stepper(1e-12);
        let tr = propagate_fixed(&s, &m, 5.0, 5.3, 1, &psi, Record::Nothing).unwrap();
        let one = s.step(&m, 5.0, 0.3, &psi, &MatvecCounter::new()).unwrap();
        assert!(diff_norm(&tr.psi_final, &one) < 1e-14);
        assert!(tr.samples.is_empty());
    }

    #[test]
    fn fixed_halving_reproduces_orders() {
        let m = dimer(PulseParams::new(1.0, 3.5, 2.0, 6.0));
        let psi = m.ground_state(0.0).unwrap();
        let exact = dense::reference_propagate(&m, 4.0, 8.0, &psi, 4096);
        for method in [Method::Cf2, Method::Cf4, Method::MagnusStrang4, Method::DoPri45] {
            let s = method.stepper(1e-13);
            let err = |n| diff_norm(&propagate_fixed(&s, &m, 4.0, 8.0, n, &psi, Record::Nothing).unwrap().psi_final, &exact);
            let (n1, n2) = if method == Method::DoPri45 { (256, 512) } else { (64, 128) };
            let slope = (err(n1) / err(n2)).log2();
            let p = method.order() as f64;
            assert!((slope - p).abs() < 0.4, "{method}: slope {slope}");
        }
    }

    #[test]
    fn norm_drift_over_many_steps() {
        let m = dimer(PulseParams::ladder_default());
        let psi = m.ground_state(0.0).unwrap();
        let tr = propagate_fixed(&Method::Cf4.stepper(1e-12), &m, 0.0, 20.0, 1000, &psi, Record::Steps).unwrap();
        assert!(tr.max_norm_drift() < 1e-9);
        assert_eq!(tr.samples.len(), 1001);
    }

    #[test]
    fn bad_windows_are_rejected() {
        let m = dimer(PulseParams::off());
        let psi = m.ground_state(0.0).unwrap();
        let s = Method::Cf2.stepper(1e-12);
        let ctrl = StepController::new(1e-6, 2).unwrap();
        assert!(propagate_adaptive(&s, &m, 1.0, 1.0, &ctrl, &psi, Record::Steps).is_err());
        assert!(propagate_fixed(&s, &m, 0.0, 1.0, 0, &psi, Record::Steps).is_err());
        assert!(propagate_fixed(&s, &m, 0.0, 1.0, 2, &psi[..3], Record::Steps).is_err());
    }
}
