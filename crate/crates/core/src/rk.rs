//! Dormand–Prince 5(4) for `ψ' = -i H(t) ψ`, with first-same-as-last reuse.

use std::cell::RefCell;

use crate::cfm::StepEstimate;
use crate::model::HubbardModel;
use crate::sparse::{diff_norm, MatvecCounter};
use crate::C64;

pub const NODES: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

pub const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

/// Fifth-order weights (equal to the last row of `A`).
pub const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];

/// Embedded fourth-order weights.
pub const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

pub const ORDER: u32 = 5;
pub const EMBEDDED_ORDER: u32 = 4;

fn rhs(model: &HubbardModel, t: f64, psi: &[C64], counter: &MatvecCounter) -> Vec<C64> {
    let mut k = model.apply_h(t, psi, counter);
    for z in k.iter_mut() {
        *z = C64::new(z.im, -z.re);
    }
    k
}

/// One embedded step. `k1`, if given, must equal `-i H(t0) psi`.
/// Returns the estimate and the last stage `-i H(t0+τ) ψ₁`.
pub fn dopri45_step_with(
    model: &HubbardModel,
    t0: f64,
    tau: f64,
    psi: &[C64],
    k1: Option<&[C64]>,
    counter: &MatvecCounter,
) -> (StepEstimate, Vec<C64>) {
    let before = counter.get();
    let mut k: Vec<Vec<C64>> = Vec::with_capacity(7);
    k.push(match k1 {
        Some(k1) => k1.to_vec(),
        None => rhs(model, t0, psi, counter),
    });
    for (s, row) in A.iter().enumerate().skip(1) {
        let mut y = psi.to_vec();
        for (j, &a) in row.iter().enumerate() {
            if a != 0.0 {
                let f = tau * a;
                for (yi, ki) in y.iter_mut().zip(&k[j]) {
                    *yi += ki * f;
                }
            }
        }
        if s == 6 {
            let last = rhs(model, t0 + tau, &y, counter);
            k.push(last);
            let mut y4 = psi.to_vec();
            for (j, &b) in B4.iter().enumerate() {
                if b != 0.0 {
                    let f = tau * b;
                    for (yi, ki) in y4.iter_mut().zip(&k[j]) {
                        *yi += ki * f;
                    }
                }
            }
            let err = diff_norm(&y, &y4);
            let est = StepEstimate {
                psi_next: y,
                err_est: err,
                matvecs: counter.get() - before,
                krylov_m: 0,
            };
            let fsal = k.pop().expect("seven stages");
            return (est, fsal);
        }
        k.push(rhs(model, t0 + NODES[s] * tau, &y, counter));
    }
    unreachable!("tableau has seven stages")
}

/// Stand-alone step (seven right-hand-side evaluations).
pub fn dopri45_step(model: &HubbardModel, t0: f64, tau: f64, psi: &[C64], counter: &MatvecCounter) -> StepEstimate {
    dopri45_step_with(model, t0, tau, psi, None, counter).0
}

struct Stage {
    t: f64,
    psi: Vec<C64>,
    k: Vec<C64>,
}

/// Dormand–Prince with reuse of known first stages. Remembers `-iH(t)ψ` at the
/// start of the last attempted step (reused after a rejection) and at its end
/// (reused after an acceptance).
#[derive(Default)]
pub struct DoPri45 {
    cache: RefCell<Vec<Stage>>,
}

impl DoPri45 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(
        &self,
        model: &HubbardModel,
        t0: f64,
        tau: f64,
        psi: &[C64],
        counter: &MatvecCounter,
    ) -> StepEstimate {
        let k1 = {
            let cache = self.cache.borrow();
            cache
                .iter()
                .find(|s| s.t == t0 && s.psi.as_slice() == psi)
                .map(|s| s.k.clone())
        };
        let k1 = match k1 {
            Some(k) => k,
            None => rhs(model, t0, psi, counter),
        };
        let (est, last) = dopri45_step_with(model, t0, tau, psi, Some(&k1), counter);
        let mut cache = self.cache.borrow_mut();
        cache.clear();
        cache.push(Stage {
            t: t0,
            psi: psi.to_vec(),
            k: k1,
        });
        cache.push(Stage {
            t: t0 + tau,
            psi: est.psi_next.clone(),
            k: last,
        });
        est
    }

    pub fn reset(&self) {
        self.cache.borrow_mut().clear();
    }
}
