//! Fourth-order Magnus–Strang splitting
//! `S(τ; t0) = e^{½τ² Φ_B} e^{τ Φ_A} e^{½τ² Φ_B}`.
//!
//! `τΦ_A` approximates the first Magnus term `-i ∫ H`, and `τ²Φ_B` the second,
//! `-½ ∫∫ [H(ζ), H(ξ)]`, which for this Hamiltonian reduces to three fixed
//! commutators with scalar weights. The weights are obtained from a Gauss
//! rule on `[0, 1]` and a degree-3 rule on the triangle `0 ≤ x ≤ y ≤ 1`.

use crate::cfm::StepEstimate;
use crate::generator::{run_product, DefectKind, Factor, Generator};
use crate::krylov::DEFAULT_M_MAX;
use crate::model::{HubbardModel, Lin};
use crate::pulse::Drive;
use crate::sparse::{norm2, MatvecCounter};
use crate::{Result, C64};

/// Nodes and weights `(x, w)` on `[0, 1]`.
pub fn interval_rule() -> [(f64, f64); 2] {
    let r = (1.0f64 / 12.0).sqrt();
    [(0.5 - r, 0.5), (0.5 + r, 0.5)]
}

/// Nodes and weights `(x, y, w)` on the triangle `0 ≤ x ≤ y ≤ 1`.
pub const TRIANGLE_RULE: [(f64, f64, f64); 6] = [
    (0.445948490915965, 0.554051509084035, 0.111690794839006),
    (0.445948490915965, 0.891896981831930, 0.111690794839006),
    (0.108103018168070, 0.554051509084035, 0.111690794839006),
    (0.091576213509771, 0.908423786490229, 0.054975871827661),
    (0.091576213509771, 0.183152427019541, 0.054975871827661),
    (0.816847572980459, 0.908423786490229, 0.054975871827661),
];

/// Scalar weights of `Φ_A`, `Φ_B` and of their derivatives `Φ̌ = (∂_τ - ½∂_{t0}) Φ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StrangCoefficients {
    pub c1_hat: f64,
    pub s1_hat: f64,
    pub c2_hat: f64,
    pub s2_hat: f64,
    pub r_hat: f64,
    pub c1_chk: f64,
    pub s1_chk: f64,
    pub c2_chk: f64,
    pub s2_chk: f64,
    pub r_chk: f64,
}

pub fn strang_coefficients(drive: &dyn Drive, t0: f64, tau: f64) -> StrangCoefficients {
    let mut sc = StrangCoefficients::default();
    for (x, w) in interval_rule() {
        let p = drive.eval(t0 + x * tau);
        sc.c1_hat += w * p.c;
        sc.s1_hat += w * p.s;
        sc.c1_chk += w * (x - 0.5) * p.dc;
        sc.s1_chk += w * (x - 0.5) * p.ds;
    }
    for (x, y, w) in TRIANGLE_RULE {
        let px = drive.eval(t0 + x * tau);
        let py = drive.eval(t0 + y * tau);
        let (dx, dy) = (x - 0.5, y - 0.5);
        sc.c2_hat += 0.5 * w * (py.c - px.c);
        sc.s2_hat += 0.5 * w * (py.s - px.s);
        sc.r_hat += 0.5 * w * (py.c * px.s - px.c * py.s);
        sc.c2_chk += 0.5 * w * (dy * py.dc - dx * px.dc);
        sc.s2_chk += 0.5 * w * (dy * py.ds - dx * px.ds);
        // (∂_τ - ½∂_{t0}) applied to c(t0+yτ) s(t0+xτ) - c(t0+xτ) s(t0+yτ)
        sc.r_chk += 0.5 * w * (dy * py.dc * px.s + dx * py.c * px.ds - dx * px.dc * py.s - dy * px.c * py.ds);
    }
    sc
}

impl StrangCoefficients {
    /// `Φ_A = -i H_diag - i ĉ1 H_symm + ŝ1 H_anti`.
    pub fn phi_a(&self) -> Lin {
        Lin::new(C64::new(0.0, -1.0), C64::new(0.0, -self.c1_hat), C64::new(self.s1_hat, 0.0))
    }

    pub fn phi_a_check(&self) -> Lin {
        Lin::new(C64::default(), C64::new(0.0, -self.c1_chk), C64::new(self.s1_chk, 0.0))
    }

    /// `Φ_B = -ĉ2 [H_symm, H_diag] - i ŝ2 [H_anti, H_diag] - i r̂ [H_symm, H_anti]`.
    pub fn phi_b(&self) -> Generator {
        Generator::Strang {
            c2: self.c2_hat,
            s2: self.s2_hat,
            r: self.r_hat,
        }
    }

    pub fn phi_b_check(&self) -> Generator {
        Generator::Strang {
            c2: self.c2_chk,
            s2: self.s2_chk,
            r: self.r_chk,
        }
    }
}

pub fn phi_a_apply(model: &HubbardModel, sc: &StrangCoefficients, v: &[C64], counter: &MatvecCounter) -> Vec<C64> {
    Generator::Lin(sc.phi_a()).apply_new(model, v, counter)
}

pub fn phi_b_apply(model: &HubbardModel, sc: &StrangCoefficients, v: &[C64], counter: &MatvecCounter) -> Vec<C64> {
    sc.phi_b().apply_new(model, v, counter)
}

fn factors(model: &HubbardModel, t0: f64, tau: f64) -> Vec<Factor> {
    let sc = strang_coefficients(&model.pulse, t0, tau);
    let b = Factor {
        x: sc.phi_b(),
        h: 0.5 * tau * tau,
        hdot: tau,
        y: sc.phi_b_check(),
        depth: 0,
    };
    let a = Factor {
        x: Generator::Lin(sc.phi_a()),
        h: tau,
        hdot: 1.0,
        y: Generator::Lin(sc.phi_a_check()),
        depth: 3,
    };
    vec![b.clone(), a, b]
}

pub fn magnus_strang_step(
    model: &HubbardModel,
    t0: f64,
    tau: f64,
    psi: &[C64],
    krylov_tol: f64,
    counter: &MatvecCounter,
) -> Result<Vec<C64>> {
    let f = factors(model, t0, tau);
    Ok(run_product(model, &f, t0, tau, psi, None, krylov_tol, DEFAULT_M_MAX, counter)?.psi)
}

/// Step with the symmetrized defect threaded through the three factors;
/// `err_est = τ/5 ‖D(τ) ψ‖`.
pub fn magnus_strang_defect_step(
    model: &HubbardModel,
    t0: f64,
    tau: f64,
    psi: &[C64],
    krylov_tol: f64,
    counter: &MatvecCounter,
) -> Result<StepEstimate> {
    let before = counter.get();
    let f = factors(model, t0, tau);
    let r = run_product(
        model,
        &f,
        t0,
        tau,
        psi,
        Some(DefectKind::Symmetrized),
        krylov_tol,
        DEFAULT_M_MAX,
        counter,
    )?;
    let d = r.defect.expect("defect requested");
    Ok(StepEstimate {
        psi_next: r.psi,
        err_est: tau.abs() / 5.0 * norm2(&d),
        matvecs: counter.get() - before,
        krylov_m: r.krylov_m,
    })
}
