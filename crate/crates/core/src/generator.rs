//! Matrix-free skew-Hermitian exponents, their exponentials, and the
//! truncated series for the derivative of a matrix exponential.
//!
//! A one-step method is written as a product of factors `exp(h_j X_j)`.
//! Differentiating the step (with respect to `τ`, or with `∂_τ - ½∂_{t0}`
//! for the symmetrized defect) produces, per factor,
//!
//! ```text
//! Γ_j = ∫_0^1 e^{σ h X} (ḣ X + h Y) e^{-σ h X} dσ
//!     ≈ ḣ X + Σ_{m=0}^{M} h^{m+1}/(m+1)! ad_X^m(Y),
//! ```
//!
//! where `Y` is the derivative of `X`. The defect is then threaded through
//! the factors together with the solution.

use crate::krylov::{lanczos_expm, HermitianOperator, KrylovResult};
use crate::model::{HubbardModel, Lin};
use crate::sparse::{axpy, norm2, MatvecCounter};
use crate::{Result, C64};

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Lin(Lin),
    /// `-c2 [H_symm, H_diag] - i s2 [H_anti, H_diag] - i r [H_symm, H_anti]`.
    Strang { c2: f64, s2: f64, r: f64 },
    /// `lin + Σ k [L1, L2]`.
    Composite { lin: Lin, comms: Vec<(C64, Lin, Lin)> },
}

impl Generator {
    pub fn zero() -> Self {
        Generator::Lin(Lin::zero())
    }

    /// `y = X x`, overwriting `y`.
    pub fn apply(&self, model: &HubbardModel, x: &[C64], y: &mut [C64], counter: &MatvecCounter) {
        match self {
            Generator::Lin(l) => model.apply_lin(l, x, y, counter),
            Generator::Strang { c2, s2, r } => strang_apply(model, *c2, *s2, *r, x, y, counter),
            Generator::Composite { lin, comms } => {
                model.apply_lin(lin, x, y, counter);
                let n = x.len();
                let mut t1 = vec![C64::default(); n];
                let mut t2 = vec![C64::default(); n];
                for (k, l1, l2) in comms {
                    model.apply_lin(l2, x, &mut t1, counter);
                    model.apply_lin(l1, &t1, &mut t2, counter);
                    axpy(*k, &t2, y);
                    model.apply_lin(l1, x, &mut t1, counter);
                    model.apply_lin(l2, &t1, &mut t2, counter);
                    axpy(-*k, &t2, y);
                }
            }
        }
    }

    pub fn apply_new(&self, model: &HubbardModel, x: &[C64], counter: &MatvecCounter) -> Vec<C64> {
        let mut y = vec![C64::default(); x.len()];
        self.apply(model, x, &mut y, counter);
        y
    }

    /// `a X + b Y` when both share a representation that stays closed.
    pub fn combine(a: f64, x: &Generator, b: f64, y: &Generator) -> Option<Generator> {
        let (ca, cb) = (C64::new(a, 0.0), C64::new(b, 0.0));
        match (x, y) {
            (Generator::Lin(l), Generator::Lin(m)) => Some(Generator::Lin(l.scale(ca).add(m.scale(cb)))),
            (
                Generator::Strang { c2, s2, r },
                Generator::Strang {
                    c2: d2,
                    s2: t2,
                    r: q,
                },
            ) => Some(Generator::Strang {
                c2: a * c2 + b * d2,
                s2: a * s2 + b * t2,
                r: a * r + b * q,
            }),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Generator::Lin(l) => l.cost() == 0,
            Generator::Strang { c2, s2, r } => *c2 == 0.0 && *s2 == 0.0 && *r == 0.0,
            Generator::Composite { lin, comms } => lin.cost() == 0 && comms.is_empty(),
        }
    }
}

/// Commutator combination evaluated with two products by each stored matrix:
/// the recombination keeps four scratch vectors.
fn strang_apply(
    model: &HubbardModel,
    c2: f64,
    s2: f64,
    r: f64,
    v: &[C64],
    y: &mut [C64],
    counter: &MatvecCounter,
) {
    let n = v.len();
    let (c2, s2, r) = (C64::new(c2, 0.0), C64::new(s2, 0.0), C64::new(r, 0.0));
    let mut h1 = vec![C64::default(); n];
    let mut h2 = vec![C64::default(); n];
    let mut h3 = vec![C64::default(); n];
    let mut h4 = vec![C64::default(); n];
    model.apply_diag(v, &mut h1, counter);
    model.apply_symm(v, &mut h2, counter);
    model.apply_anti(v, &mut h3, counter);
    for k in 0..n {
        h4[k] = -I * c2 * h1[k] + r * h3[k];
    }
    model.apply_symm(&h4, y, counter);
    for k in 0..n {
        h4[k] = s2 * h1[k] - r * h2[k];
    }
    model.apply_anti(&h4, &mut h1, counter);
    for k in 0..n {
        y[k] += h1[k];
    }
    for k in 0..n {
        h4[k] = -I * c2 * h2[k] + s2 * h3[k];
    }
    model.apply_diag(&h4, &mut h1, counter);
    for k in 0..n {
        y[k] = -I * (y[k] - h1[k]);
    }
}

/// `i X` as a Hermitian operator for Lanczos.
pub struct SkewOp<'a> {
    pub model: &'a HubbardModel,
    pub gen: &'a Generator,
    pub counter: &'a MatvecCounter,
}

impl HermitianOperator for SkewOp<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        match self.gen {
            Generator::Lin(l) => self.model.apply_lin(&l.scale(I), x, y, self.counter),
            g => {
                g.apply(self.model, x, y, self.counter);
                y.iter_mut().for_each(|z| *z *= I);
            }
        }
    }
}

/// `exp(h X) v` by Lanczos on `i X` with time `h`.
pub fn exp_apply(
    model: &HubbardModel,
    gen: &Generator,
    h: f64,
    v: &[C64],
    tol: f64,
    m_max: usize,
    counter: &MatvecCounter,
) -> Result<KrylovResult> {
    if gen.is_zero() {
        return Ok(KrylovResult {
            w: v.to_vec(),
            m: 1,
            bound: 0.0,
            matvecs: 0,
            substeps: 1,
        });
    }
    let op = SkewOp { model, gen, counter };
    lanczos_expm(&op, v, h, tol, m_max)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// `(ḣ X + Σ_{m=0}^{M} h^{m+1}/(m+1)! ad_X^m(Y)) v`.
///
/// The commutators are expanded as `ad_X^m(Y) = Σ_i C(m,i) (-1)^i X^{m-i} Y X^i`
/// and grouped by the right factor `X^i v`, which costs `M + (M+1) + M(M+1)/2`
/// applications of `X` or `Y`: 13 for `M = 3`.
#[allow(clippy::too_many_arguments)]
pub fn gamma_tilde_apply(
    model: &HubbardModel,
    x: &Generator,
    y: &Generator,
    h: f64,
    hdot: f64,
    depth: usize,
    v: &[C64],
    counter: &MatvecCounter,
) -> Vec<C64> {
    if depth == 0 || y.is_zero() {
        let (b, y) = if y.is_zero() { (0.0, x) } else { (h, y) };
        if let Some(g) = Generator::combine(hdot, x, b, y) {
            return g.apply_new(model, v, counter);
        }
    }
    let n = v.len();
    let mut powers = vec![v.to_vec()];
    for i in 1..=depth.max(usize::from(hdot != 0.0)) {
        let next = x.apply_new(model, &powers[i - 1], counter);
        powers.push(next);
    }
    let mut out = vec![C64::default(); n];
    if hdot != 0.0 {
        axpy(C64::new(hdot, 0.0), &powers[1], &mut out);
    }
    let mut scratch = vec![C64::default(); n];
    for (i, xi) in powers.iter().enumerate().take(depth + 1) {
        let mut w = y.apply_new(model, xi, counter);
        for j in 0..=depth - i {
            let m = i + j;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let coef = h.powi(m as i32 + 1) / factorial(m + 1) * binomial(m, i) * sign;
            axpy(C64::new(coef, 0.0), &w, &mut out);
            if j < depth - i {
                x.apply(model, &w, &mut scratch, counter);
                std::mem::swap(&mut w, &mut scratch);
            }
        }
    }
    out
}

/// One exponential factor `exp(h X)` of a product method, with the data
/// needed to differentiate it.
#[derive(Debug, Clone)]
pub struct Factor {
    pub x: Generator,
    pub h: f64,
    pub hdot: f64,
    pub y: Generator,
    pub depth: usize,
}

/// How the defect of a product method is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefectKind {
    /// `D = S' - A(t0+τ) S`.
    Classical,
    /// `D = (∂_τ - ½∂_{t0}) S - ½ (A(t0+τ) S + S A(t0))`.
    Symmetrized,
}

#[derive(Debug, Clone)]
pub struct ProductResult {
    pub psi: Vec<C64>,
    pub defect: Option<Vec<C64>>,
    pub krylov_m: usize,
}

/// Applies the factors in order; with a defect kind, threads the defect
/// alongside the solution.
#[allow(clippy::too_many_arguments)]
pub fn run_product(
    model: &HubbardModel,
    factors: &[Factor],
    t0: f64,
    tau: f64,
    psi: &[C64],
    defect: Option<DefectKind>,
    tol: f64,
    m_max: usize,
    counter: &MatvecCounter,
) -> Result<ProductResult> {
    let mut u = psi.to_vec();
    let mut krylov_m = 0;
    let mut d = match defect {
        Some(DefectKind::Symmetrized) => {
            let mut h = model.apply_h(t0, &u, counter);
            h.iter_mut().for_each(|z| *z *= 0.5 * I);
            Some(h)
        }
        Some(DefectKind::Classical) => Some(vec![C64::default(); u.len()]),
        None => None,
    };
    for f in factors {
        let r = exp_apply(model, &f.x, f.h, &u, tol, m_max, counter)?;
        krylov_m = krylov_m.max(r.m);
        u = r.w;
        if let Some(dv) = d.as_mut() {
            if norm2(dv) > 0.0 {
                let rd = exp_apply(model, &f.x, f.h, dv, tol, m_max, counter)?;
                krylov_m = krylov_m.max(rd.m);
                *dv = rd.w;
            }
            let g = gamma_tilde_apply(model, &f.x, &f.y, f.h, f.hdot, f.depth, &u, counter);
            axpy(C64::new(1.0, 0.0), &g, dv);
        }
    }
    if let (Some(dv), Some(kind)) = (d.as_mut(), defect) {
        let h = model.apply_h(t0 + tau, &u, counter);
        let w = if kind == DefectKind::Symmetrized { 0.5 * I } else { I };
        axpy(w, &h, dv);
    }
    Ok(ProductResult {
        psi: u,
        defect: d,
        krylov_m,
    })
}
