//! Lanczos approximation of `exp(-i t Ω) v` for Hermitian `Ω`.
//!
//! With `T_m` the Lanczos tridiagonal, `γ_m = Π_{j<m} (T_m)_{j+1,j}` and
//! `τ_{m+1,m}` the next off-diagonal, the local error of
//! `S_m(t)v = ‖v‖ V_m exp(-i t T_m) e_1` obeys
//!
//! ```text
//! ‖L_m(t) v‖ ≤ ‖v‖ τ_{m+1,m} γ_m t^m / m!
//! ```
//!
//! and the right-hand side is asymptotically exact for `t → 0`. The basis
//! grows until this bound drops below the tolerance. If the dimension cap is
//! reached first, the time interval is cut into dyadic pieces.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};

use crate::error::check_dim;
use crate::sparse::{axpy, cdot, expm_tridiagonal_e1, norm2, tridiagonal_eigh};
use crate::{Error, Result, C64};

/// A Hermitian operator available only through its action.
pub trait HermitianOperator {
    fn dim(&self) -> usize;

    /// `y = Ω x`; `y` is overwritten.
    fn apply(&self, x: &[C64], y: &mut [C64]);

    /// Optional estimate of the spectral radius, used for the breakdown test.
    fn norm_hint(&self) -> Option<f64> {
        None
    }
}

/// Dense Hermitian matrix as an operator, mostly for tests and small oracles.
pub struct DenseHermitian(pub DMatrix<C64>);

impl HermitianOperator for DenseHermitian {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let n = self.0.nrows();
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..n).map(|j| self.0[(i, j)] * x[j]).sum();
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovResult {
    pub w: Vec<C64>,
    /// Largest Krylov dimension used.
    pub m: usize,
    /// Error bound of the returned approximation (absolute, summed over substeps).
    pub bound: f64,
    /// Number of operator applications.
    pub matvecs: u64,
    pub substeps: usize,
}

pub const DEFAULT_M_MAX: usize = 60;
const MAX_BISECTIONS: u32 = 30;
const BREAKDOWN_REL: f64 = 1e-14;

fn ln_factorial(m: usize) -> f64 {
    (1..=m).map(|k| (k as f64).ln()).sum()
}

struct Lanczos {
    basis: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    scale: f64,
}

impl Lanczos {
    fn new(v: &[C64], nrm: f64, hint: Option<f64>) -> Self {
        let q: Vec<C64> = v.iter().map(|z| z / nrm).collect();
        Lanczos {
            basis: vec![q],
            alpha: Vec::new(),
            beta: Vec::new(),
            scale: hint.unwrap_or(0.0),
        }
    }

    /// One Lanczos step with two-pass full reorthogonalization. Returns the
    /// new off-diagonal entry `β_j`; the next basis vector is pushed unless
    /// the recurrence broke down.
    fn extend(&mut self, op: &dyn HermitianOperator) -> (f64, bool) {
        let j = self.basis.len() - 1;
        let mut w = vec![C64::new(0.0, 0.0); op.dim()];
        op.apply(&self.basis[j], &mut w);
        let a = cdot(&self.basis[j], &w).re;
        axpy(C64::new(-a, 0.0), &self.basis[j], &mut w);
        if j > 0 {
            axpy(C64::new(-self.beta[j - 1], 0.0), &self.basis[j - 1], &mut w);
        }
        for _ in 0..2 {
            for q in &self.basis {
                let h = cdot(q, &w);
                axpy(-h, q, &mut w);
            }
        }
        let b = norm2(&w);
        self.alpha.push(a);
        let prev = self.beta.last().copied().unwrap_or(0.0);
        self.scale = self.scale.max(a.abs() + b + prev);
        let breakdown = b <= BREAKDOWN_REL * self.scale.max(f64::MIN_POSITIVE)
            || self.basis.len() == op.dim();
        if !breakdown {
            self.basis.push(w.into_iter().map(|z| z / b).collect());
        }
        (b, breakdown)
    }

    fn combine(&self, coeffs: &[C64], factor: f64, n: usize) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (q, &y) in self.basis.iter().zip(coeffs) {
            axpy(y * factor, q, &mut out);
        }
        out
    }
}

/// Adaptive Lanczos approximation of `exp(-i t Ω) v` with tolerance `tol`
/// relative to `‖v‖`.
pub fn lanczos_expm(
    op: &dyn HermitianOperator,
    v: &[C64],
    t: f64,
    tol: f64,
    m_max: usize,
) -> Result<KrylovResult> {
    check_dim(op.dim(), v.len())?;
    if !(tol > 0.0) || m_max == 0 {
        return Err(Error::Parameter(format!(
            "Lanczos needs tol > 0 and m_max > 0 (tol={tol}, m_max={m_max})"
        )));
    }
    let nrm = norm2(v);
    if t == 0.0 || nrm == 0.0 {
        return Ok(KrylovResult {
            w: v.to_vec(),
            m: 1,
            bound: 0.0,
            matvecs: 0,
            substeps: 1,
        });
    }
    let total = t.abs();
    let sign = t.signum();
    let mut done = 0.0;
    let mut current = v.to_vec();
    let mut result = KrylovResult {
        w: Vec::new(),
        m: 0,
        bound: 0.0,
        matvecs: 0,
        substeps: 0,
    };
    while done < total {
        let remaining = total - done;
        let mut lz = Lanczos::new(&current, nrm, op.norm_hint());
        let mut log_gamma = 0.0;
        let (span, bound) = loop {
            let (b, breakdown) = lz.extend(op);
            result.matvecs += 1;
            let m = lz.alpha.len();
            if breakdown {
                break (remaining, 0.0);
            }
            let log_bound = b.ln() + log_gamma + m as f64 * remaining.ln() - ln_factorial(m);
            // tolerance is shared out in proportion to the time covered
            let log_tol = (tol * remaining / total).ln();
            if log_bound <= log_tol {
                break (remaining, nrm * log_bound.exp());
            }
            if m >= m_max {
                // halving the time divides the bound by 2^m and the share by 2
                let excess = log_bound - log_tol;
                let k = (excess / ((m as f64 - 1.0).max(1.0) * std::f64::consts::LN_2)).ceil();
                if k > MAX_BISECTIONS as f64 {
                    return Err(Error::Convergence(format!(
                        "bound {:.3e} at m={m} needs more than {MAX_BISECTIONS} bisections",
                        log_bound.exp()
                    )));
                }
                let span = remaining / 2f64.powi(k as i32);
                let lb = log_bound - k * m as f64 * std::f64::consts::LN_2;
                break (span, nrm * lb.exp());
            }
            log_gamma += b.ln();
            lz.beta.push(b);
        };
        let (lam, q) = tridiagonal_eigh(&lz.alpha, &lz.beta[..lz.alpha.len() - 1])?;
        let y = expm_tridiagonal_e1(&lam, &q, sign * span);
        current = lz.combine(&y, nrm, v.len());
        result.m = result.m.max(lz.alpha.len());
        result.bound += bound;
        result.substeps += 1;
        done += span;
        if result.substeps > 1 << 20 {
            return Err(Error::Convergence("too many Krylov substeps".into()));
        }
    }
    result.w = current;
    Ok(result)
}

/// Fixed-dimension variant: exactly `m` Lanczos steps (fewer on breakdown),
/// no substepping. The returned bound is the a-posteriori estimate.
pub fn lanczos_expm_fixed(
    op: &dyn HermitianOperator,
    v: &[C64],
    t: f64,
    m: usize,
) -> Result<KrylovResult> {
    check_dim(op.dim(), v.len())?;
    let nrm = norm2(v);
    if t == 0.0 || nrm == 0.0 || m == 0 {
        return Ok(KrylovResult {
            w: v.to_vec(),
            m: 1,
            bound: 0.0,
            matvecs: 0,
            substeps: 1,
        });
    }
    let mut lz = Lanczos::new(v, nrm, op.norm_hint());
    let mut log_gamma = 0.0;
    let mut bound = 0.0;
    let mut matvecs = 0;
    loop {
        let (b, breakdown) = lz.extend(op);
        matvecs += 1;
        let k = lz.alpha.len();
        if breakdown {
            break;
        }
        if k == m {
            bound = nrm * (b.ln() + log_gamma + k as f64 * t.abs().ln() - ln_factorial(k)).exp();
            break;
        }
        log_gamma += b.ln();
        lz.beta.push(b);
    }
    let k = lz.alpha.len();
    let (lam, q) = tridiagonal_eigh(&lz.alpha, &lz.beta[..k - 1])?;
    let y = expm_tridiagonal_e1(&lam, &q, t);
    Ok(KrylovResult {
        w: lz.combine(&y, nrm, v.len()),
        m: k,
        bound,
        matvecs,
        substeps: 1,
    })
}

#[derive(Debug, Clone)]
pub struct ExtremalEigen {
    pub min: f64,
    pub max: f64,
    /// Normalized Ritz vector belonging to `min`.
    pub ground_state: Vec<C64>,
    pub iterations: usize,
}

/// Extremal eigenvalues by Lanczos with full reorthogonalization, converged
/// when both extremal Ritz residuals fall below `tol · ‖T_m‖`.
pub fn lanczos_extremal(
    op: &dyn HermitianOperator,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<ExtremalEigen> {
    let n = op.dim();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
    let nrm = norm2(&v);
    let mut lz = Lanczos::new(&v, nrm, op.norm_hint());
    for it in 1..=max_iter.min(n.max(1)) {
        let (b, breakdown) = lz.extend(op);
        let k = lz.alpha.len();
        let check = breakdown || it % 5 == 0 || it == max_iter.min(n);
        if check {
            let (lam, q) = tridiagonal_eigh(&lz.alpha, &lz.beta[..k - 1])?;
            let (imin, imax) = extremes(&lam);
            let res_min = b * q[(k - 1, imin)].abs();
            let res_max = b * q[(k - 1, imax)].abs();
            let scale = lam[imin].abs().max(lam[imax].abs()).max(1.0);
            if breakdown || (res_min <= tol * scale && res_max <= tol * scale) {
                let coeffs: Vec<C64> = (0..k).map(|i| C64::new(q[(i, imin)], 0.0)).collect();
                let mut g = lz.combine(&coeffs, 1.0, n);
                let gn = norm2(&g);
                g.iter_mut().for_each(|z| *z /= gn);
                return Ok(ExtremalEigen {
                    min: lam[imin],
                    max: lam[imax],
                    ground_state: g,
                    iterations: it,
                });
            }
        }
        if breakdown {
            break;
        }
        lz.beta.push(b);
    }
    Err(Error::IterationLimit(format!(
        "extremal eigenvalues not converged after {max_iter} Lanczos steps"
    )))
}

fn extremes(lam: &[f64]) -> (usize, usize) {
    let mut imin = 0;
    let mut imax = 0;
    for (i, &l) in lam.iter().enumerate() {
        if l < lam[imin] {
            imin = i;
        }
        if l > lam[imax] {
            imax = i;
        }
    }
    (imin, imax)
}
