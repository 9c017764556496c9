//! Dense linear algebra for small models: oracles and reference solutions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::model::{HubbardModel, Lin};
use crate::pulse::Drive;
use crate::C64;

pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> DMatrix<C64> {
    let m = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn eigvalsh(h: &DMatrix<C64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.total_cmp(b));
    e
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn expm_hermitian(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let eig = SymmetricEigen::new(h.clone());
    let q = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        h.nrows(),
        eig.eigenvalues.iter().map(|&l| C64::new(0.0, -t * l).exp()),
    ));
    q * d * q.adjoint()
}

pub fn expm_hermitian_apply(h: &DMatrix<C64>, t: f64, v: &[C64]) -> Vec<C64> {
    let r = expm_hermitian(h, t) * DVector::from_column_slice(v);
    r.iter().copied().collect()
}

/// `exp(X)` for skew-Hermitian `X`.
pub fn expm_skew(x: &DMatrix<C64>) -> DMatrix<C64> {
    let h = x * C64::new(0.0, 1.0);
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    expm_hermitian(&h, 1.0)
}

/// Scaling and squaring with a Taylor polynomial, for arbitrary matrices.
pub fn expm_general(x: &DMatrix<C64>) -> DMatrix<C64> {
    let n = x.nrows();
    let norm: f64 = x.iter().map(|z| z.norm()).sum::<f64>().max(1e-300);
    let s = (norm.log2().ceil() as i32 + 4).max(0);
    let y = x / C64::new(2f64.powi(s), 0.0);
    let mut term = DMatrix::<C64>::identity(n, n);
    let mut acc = term.clone();
    for k in 1..30 {
        term = &term * &y / C64::new(k as f64, 0.0);
        acc += &term;
    }
    for _ in 0..s {
        acc = &acc * &acc;
    }
    acc
}

pub fn lin_dense(model: &HubbardModel, lin: &Lin) -> DMatrix<C64> {
    let s = model.h_symm.to_dense();
    let a = model.h_anti.to_dense();
    let n = model.dim();
    DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { model.h_diag[i] } else { 0.0 };
        lin.diag * d + lin.symm * s[(i, j)] + lin.anti * a[(i, j)]
    })
}

pub fn commutator(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a * b - b * a
}

/// `A(t) = -i H(t)` as a dense matrix.
pub fn generator_dense(model: &HubbardModel, t: f64) -> DMatrix<C64> {
    model.dense(t) * C64::new(0.0, -1.0)
}

/// One step of the sixth-order Magnus integrator with three Gauss nodes,
/// evaluated with dense commutators and a dense exponential.
pub fn magnus6_step(model: &HubbardModel, t0: f64, tau: f64) -> DMatrix<C64> {
    let r = 15f64.sqrt() / 10.0;
    let a1 = generator_dense(model, t0 + (0.5 - r) * tau);
    let a2 = generator_dense(model, t0 + 0.5 * tau);
    let a3 = generator_dense(model, t0 + (0.5 + r) * tau);
    let c = |x: f64| C64::new(x, 0.0);
    let al1 = &a2 * c(tau);
    let al2 = (&a3 - &a1) * c(15f64.sqrt() * tau / 3.0);
    let al3 = (&a3 - &a2 * c(2.0) + &a1) * c(10.0 * tau / 3.0);
    let c1 = commutator(&al1, &al2);
    let c2 = commutator(&al1, &(&al3 * c(2.0) + &c1)) * c(-1.0 / 60.0);
    let inner = commutator(&(&al1 * c(-20.0) - &al3 + &c1), &(&al2 + &c2));
    let omega = &al1 + &al3 * c(1.0 / 12.0) + inner * c(1.0 / 240.0);
    expm_skew(&omega)
}

/// Dense reference propagation on an equidistant grid with `steps` Magnus-6 steps.
pub fn reference_propagate(model: &HubbardModel, t0: f64, t1: f64, psi0: &[C64], steps: usize) -> Vec<C64> {
    let tau = (t1 - t0) / steps as f64;
    let mut psi = DVector::from_column_slice(psi0);
    for k in 0..steps {
        psi = magnus6_step(model, t0 + k as f64 * tau, tau) * psi;
    }
    psi.iter().copied().collect()
}

/// Dense propagator `U(t1, t0)` of `ψ' = -i H(t) ψ`.
pub fn reference_propagator(model: &HubbardModel, t0: f64, t1: f64, steps: usize) -> DMatrix<C64> {
    let tau = (t1 - t0) / steps as f64;
    let n = model.dim();
    let mut u = DMatrix::<C64>::identity(n, n);
    for k in 0..steps {
        u = magnus6_step(model, t0 + k as f64 * tau, tau) * u;
    }
    u
}

/// Dense `A'(t)`.
pub fn generator_dot_dense(model: &HubbardModel, t: f64) -> DMatrix<C64> {
    let pv = model.pulse.eval(t);
    lin_dense(model, &Lin::generator_dot(pv.dc, pv.ds))
}
