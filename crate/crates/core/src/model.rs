//! Lattice geometry, Hamiltonian assembly and observables.
//!
//! The hopping term `Σ v f(t) c†_j c_i + h.c.` over forward bonds `i → j`
//! (one step right or down) splits into `c(t) H_symm + i s(t) H_anti`, where
//! `H_symm` holds `v·sign` on both hop directions and `H_anti` holds `v·sign`
//! on forward hops and `-v·sign` on backward hops.

use crate::basis::{doublon_count, Basis, SpinMask};
use crate::error::check_dim;
use crate::krylov::{lanczos_extremal, ExtremalEigen, HermitianOperator};
use crate::pulse::{Drive, PulseParams};
use crate::sparse::{cdot, norm2, MatvecCounter, SparseRealMatrix};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub rows: usize,
    pub cols: usize,
    /// On-site energies, indexed lexicographically (`site = row * cols + col`).
    pub on_site: Vec<f64>,
    /// Magnitude of the nearest-neighbour hopping.
    pub hop: f64,
}

impl Geometry {
    pub fn uniform(rows: usize, cols: usize, on_site: f64, hop: f64) -> Self {
        Geometry {
            rows,
            cols,
            on_site: vec![on_site; rows * cols],
            hop,
        }
    }

    /// `corner` on the four lattice corners, `inner` everywhere else.
    pub fn corner_pattern(rows: usize, cols: usize, corner: f64, inner: f64, hop: f64) -> Self {
        let mut g = Geometry::uniform(rows, cols, inner, hop);
        for (r, c) in [(0, 0), (0, cols - 1), (rows - 1, 0), (rows - 1, cols - 1)] {
            g.on_site[r * cols + c] = corner;
        }
        g
    }

    pub fn ladder_2x4() -> Self {
        Geometry::corner_pattern(2, 4, -1.75, -2.25, 1.0)
    }

    pub fn lattice_4x3() -> Self {
        Geometry::uniform(4, 3, -4.0, 1.0)
    }

    pub fn n_sites(&self) -> usize {
        self.rows * self.cols
    }

    /// Forward bonds `(i, j)`: `j` is the right or lower neighbour of `i`.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let i = r * self.cols + c;
                if c + 1 < self.cols {
                    out.push((i, i + 1));
                }
                if r + 1 < self.rows {
                    out.push((i, i + self.cols));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.n_sites() > 64 {
            return Err(Error::Parameter(format!(
                "lattice {}x{} must have between 1 and 64 sites",
                self.rows, self.cols
            )));
        }
        check_dim(self.n_sites(), self.on_site.len())
    }
}

/// Three coefficients of a linear combination `d·H_diag + s·H_symm + a·H_anti`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Lin {
    pub diag: C64,
    pub symm: C64,
    pub anti: C64,
}

impl Lin {
    pub fn new(diag: C64, symm: C64, anti: C64) -> Self {
        Lin { diag, symm, anti }
    }

    pub fn zero() -> Self {
        Lin::default()
    }

    /// Number of stored matrices touched by one product.
    pub fn cost(&self) -> u64 {
        [self.diag, self.symm, self.anti]
            .iter()
            .filter(|z| **z != C64::new(0.0, 0.0))
            .count() as u64
    }

    pub fn scale(self, k: C64) -> Lin {
        Lin::new(self.diag * k, self.symm * k, self.anti * k)
    }

    pub fn add(self, o: Lin) -> Lin {
        Lin::new(self.diag + o.diag, self.symm + o.symm, self.anti + o.anti)
    }

    /// `H(t)` for a drive value.
    pub fn hamiltonian(c: f64, s: f64) -> Lin {
        Lin::new(C64::new(1.0, 0.0), C64::new(c, 0.0), C64::new(0.0, s))
    }

    /// `A(t) = -i H(t)`.
    pub fn generator(c: f64, s: f64) -> Lin {
        Lin::new(C64::new(0.0, -1.0), C64::new(0.0, -c), C64::new(s, 0.0))
    }

    /// `A'(t)` from the derivatives of the drive.
    pub fn generator_dot(dc: f64, ds: f64) -> Lin {
        Lin::new(C64::new(0.0, 0.0), C64::new(0.0, -dc), C64::new(ds, 0.0))
    }
}

#[derive(Debug, Clone)]
pub struct HubbardModel {
    pub rows: usize,
    pub cols: usize,
    pub basis: Basis,
    pub u: f64,
    pub h_diag: Vec<f64>,
    pub h_symm: SparseRealMatrix,
    pub h_anti: SparseRealMatrix,
    pub pulse: PulseParams,
}

impl HubbardModel {
    pub fn build(geom: &Geometry, basis: Basis, u: f64, pulse: PulseParams) -> Result<Self> {
        geom.validate()?;
        if basis.n_sites() != geom.n_sites() {
            return Err(Error::Parameter(format!(
                "basis has {} sites, lattice {}x{} has {}",
                basis.n_sites(),
                geom.rows,
                geom.cols,
                geom.n_sites()
            )));
        }
        let n = basis.len();
        let bonds = geom.bonds();
        let h_diag: Vec<f64> = basis
            .states()
            .map(|(up, down)| {
                let onsite: f64 = (0..geom.n_sites())
                    .map(|i| {
                        let occ = up.is_occupied(i) as u32 + down.is_occupied(i) as u32;
                        geom.on_site[i] * occ as f64
                    })
                    .sum();
                onsite + u * doublon_count(up, down) as f64
            })
            .collect();

        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0usize);
        let mut col_idx = Vec::new();
        let mut symm = Vec::new();
        let mut anti = Vec::new();
        let mut row: Vec<(usize, f64, f64)> = Vec::new();
        let v = geom.hop;
        for (up, down) in basis.states() {
            row.clear();
            // Row k of H collects amplitudes into state k from its neighbours:
            // H[k, k'] = conj(H[k', k]), and k' is reached from k by one hop.
            for &(i, j) in &bonds {
                for spin in 0..2 {
                    let mask = if spin == 0 { up } else { down };
                    for (from, to, forward) in [(i, j, true), (j, i, false)] {
                        if let Some((m, sign)) = mask.hop(from, to) {
                            let (nu, nd) = if spin == 0 { (m, down) } else { (up, m) };
                            let col = basis.index_of(nu, nd).ok_or_else(|| {
                                Error::State("hop left the particle-number sector".into())
                            })?;
                            // forward k -> k' carries f, so H[k, k'] carries conj(f)
                            let a = if forward { -v * sign } else { v * sign };
                            row.push((col, v * sign, a));
                        }
                    }
                }
            }
            row.sort_unstable_by_key(|e| e.0);
            for &(c, s, a) in &row {
                col_idx.push(c);
                symm.push(s);
                anti.push(a);
            }
            row_ptr.push(col_idx.len());
        }
        let h_symm = SparseRealMatrix::from_raw(n, row_ptr.clone(), col_idx.clone(), symm)?;
        let h_anti = SparseRealMatrix::from_raw(n, row_ptr, col_idx, anti)?;
        Ok(HubbardModel {
            rows: geom.rows,
            cols: geom.cols,
            basis,
            u,
            h_diag,
            h_symm,
            h_anti,
            pulse,
        })
    }

    /// Half filling, equal numbers of up and down electrons.
    pub fn half_filled(geom: &Geometry, u: f64, pulse: PulseParams) -> Result<Self> {
        let n = geom.n_sites();
        if !n.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "half filling needs an even number of sites, got {n}"
            )));
        }
        HubbardModel::build(geom, Basis::enumerate(n, n / 2, n / 2)?, u, pulse)
    }

    pub fn ladder_2x4() -> Result<Self> {
        HubbardModel::half_filled(&Geometry::ladder_2x4(), 4.0, PulseParams::ladder_default())
    }

    pub fn lattice_4x3() -> Result<Self> {
        HubbardModel::half_filled(&Geometry::lattice_4x3(), 8.0, PulseParams::lattice_4x3_default())
    }

    /// Assembles a model from stored matrices, checking all structural invariants.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        n_up: usize,
        n_down: usize,
        u: f64,
        pulse: PulseParams,
        h_diag: Vec<f64>,
        h_symm: SparseRealMatrix,
        h_anti: SparseRealMatrix,
    ) -> Result<Self> {
        let basis = Basis::enumerate(rows * cols, n_up, n_down)?;
        check_dim(basis.len(), h_diag.len())?;
        check_dim(basis.len(), h_symm.n())?;
        check_dim(basis.len(), h_anti.n())?;
        h_symm.validate()?;
        h_anti.validate()?;
        if !h_symm.same_pattern(&h_anti) {
            return Err(Error::Format(
                "H_symm and H_anti must share one sparsity pattern".into(),
            ));
        }
        Ok(HubbardModel {
            rows,
            cols,
            basis,
            u,
            h_diag,
            h_symm,
            h_anti,
            pulse,
        })
    }

    pub fn dim(&self) -> usize {
        self.h_diag.len()
    }

    /// Number of structurally nonzero off-diagonal entries of `H(t)`.
    pub fn offdiag_nnz(&self) -> usize {
        self.h_symm.nnz()
    }

    /// Numerically nonzero entries of `H(t)`; the pattern does not depend on `t`.
    pub fn nnz(&self) -> usize {
        self.offdiag_nnz() + self.h_diag.iter().filter(|d| **d != 0.0).count()
    }

    /// Entries of `H(t)` in a CSR layout that stores the full diagonal.
    pub fn stored_nnz(&self) -> usize {
        self.offdiag_nnz() + self.dim()
    }

    /// `y = L x` for a linear combination of the three matrices, overwriting
    /// `y`. Each stored matrix with a nonzero coefficient counts one product.
    pub fn apply_lin(&self, lin: &Lin, x: &[C64], y: &mut [C64], counter: &MatvecCounter) {
        counter.add(lin.cost());
        self.apply_lin_uncounted(lin, x, y);
    }

    pub(crate) fn apply_lin_uncounted(&self, lin: &Lin, x: &[C64], y: &mut [C64]) {
        let zero = C64::new(0.0, 0.0);
        let rp = self.h_symm.row_ptr();
        let ci = self.h_symm.col_idx();
        let sv = self.h_symm.values();
        let av = self.h_anti.values();
        let (ls, la) = (lin.symm, lin.anti);
        for r in 0..self.dim() {
            let mut acc = if lin.diag == zero {
                zero
            } else {
                lin.diag * (self.h_diag[r] * x[r])
            };
            let range = rp[r]..rp[r + 1];
            if la == zero {
                let mut s = zero;
                for k in range {
                    s += x[ci[k]] * sv[k];
                }
                acc += ls * s;
            } else if ls == zero {
                let mut a = zero;
                for k in range {
                    a += x[ci[k]] * av[k];
                }
                acc += la * a;
            } else {
                let (mut s, mut a) = (zero, zero);
                for k in range {
                    let xv = x[ci[k]];
                    s += xv * sv[k];
                    a += xv * av[k];
                }
                acc += ls * s + la * a;
            }
            y[r] = acc;
        }
    }

    pub fn apply_diag(&self, x: &[C64], y: &mut [C64], counter: &MatvecCounter) {
        self.apply_lin(&Lin::new(C64::new(1.0, 0.0), C64::default(), C64::default()), x, y, counter)
    }

    pub fn apply_symm(&self, x: &[C64], y: &mut [C64], counter: &MatvecCounter) {
        counter.add(1);
        self.h_symm.spmv_into(x, C64::new(1.0, 0.0), y, false);
    }

    pub fn apply_anti(&self, x: &[C64], y: &mut [C64], counter: &MatvecCounter) {
        counter.add(1);
        self.h_anti.spmv_into(x, C64::new(1.0, 0.0), y, false);
    }

    /// `H(t) x`, counted as three products.
    pub fn apply_h(&self, t: f64, x: &[C64], counter: &MatvecCounter) -> Vec<C64> {
        let pv = self.pulse.eval(t);
        let mut y = vec![C64::default(); x.len()];
        self.apply_lin(&Lin::hamiltonian(pv.c, pv.s), x, &mut y, counter);
        y
    }

    pub fn hamiltonian_at(&self, t: f64) -> HamiltonianOp<'_> {
        let pv = self.pulse.eval(t);
        HamiltonianOp {
            model: self,
            lin: Lin::hamiltonian(pv.c, pv.s),
            counter: None,
        }
    }

    /// Dense `H(t)`, for small models only.
    pub fn dense(&self, t: f64) -> nalgebra::DMatrix<C64> {
        let pv = self.pulse.eval(t);
        let s = self.h_symm.to_dense();
        let a = self.h_anti.to_dense();
        let n = self.dim();
        nalgebra::DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { self.h_diag[i] } else { 0.0 };
            C64::new(d + pv.c * s[(i, j)], pv.s * a[(i, j)])
        })
    }

    pub fn extremal_eigenvalues(&self, t: f64) -> Result<(f64, f64)> {
        let e = self.extremal(t)?;
        Ok((e.min, e.max))
    }

    pub fn extremal(&self, t: f64) -> Result<ExtremalEigen> {
        let op = self.hamiltonian_at(t);
        lanczos_extremal(&op, 1e-10, self.dim().min(2000), 0x5eed)
    }

    /// Normalized ground state of `H(t)`.
    pub fn ground_state(&self, t: f64) -> Result<Vec<C64>> {
        Ok(self.extremal(t)?.ground_state)
    }

    /// `⟨ψ|H(t)|ψ⟩`.
    pub fn energy(&self, t: f64, psi: &[C64]) -> Result<f64> {
        check_dim(self.dim(), psi.len())?;
        check_normalized(psi)?;
        let op = self.hamiltonian_at(t);
        let mut hp = vec![C64::default(); psi.len()];
        op.apply(psi, &mut hp);
        let e = cdot(psi, &hp);
        if e.im.abs() >= 1e-10 * e.re.abs().max(1.0) {
            return Err(Error::State(format!(
                "energy has imaginary part {:.3e}",
                e.im
            )));
        }
        Ok(e.re)
    }

    /// Mean double occupation `(1/N) Σ_i ⟨n_i↑ n_i↓⟩`.
    pub fn double_occupation(&self, psi: &[C64]) -> Result<f64> {
        double_occupation(&self.basis, psi)
    }
}

pub fn double_occupation(basis: &Basis, psi: &[C64]) -> Result<f64> {
    check_dim(basis.len(), psi.len())?;
    check_normalized(psi)?;
    let total: f64 = basis
        .states()
        .zip(psi)
        .map(|((up, down), z): ((SpinMask, SpinMask), &C64)| {
            z.norm_sqr() * doublon_count(up, down) as f64
        })
        .sum();
    Ok(total / basis.n_sites() as f64)
}

fn check_normalized(psi: &[C64]) -> Result<()> {
    let nrm = norm2(psi);
    if (nrm - 1.0).abs() > 1e-8 {
        return Err(Error::State(format!("state norm {nrm} differs from 1")));
    }
    Ok(())
}

/// A Hermitian combination of the model matrices as a Lanczos operator.
pub struct HamiltonianOp<'a> {
    pub model: &'a HubbardModel,
    pub lin: Lin,
    pub counter: Option<&'a MatvecCounter>,
}

impl HermitianOperator for HamiltonianOp<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        match self.counter {
            Some(c) => self.model.apply_lin(&self.lin, x, y, c),
            None => self.model.apply_lin_uncounted(&self.lin, x, y),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;

    fn dimer(pulse: PulseParams) -> HubbardModel {
        HubbardModel::half_filled(&Geometry::uniform(1, 2, -1.0, 1.0), 4.0, pulse).unwrap()
    }

    #[test]
    fn bonds_are_right_and_down() {
        let g = Geometry::uniform(2, 3, 0.0, 1.0);
        assert_eq!(g.bonds(), vec![(0, 1), (0, 3), (1, 2), (1, 4), (2, 5), (3, 4), (4, 5)]);
        assert_eq!(Geometry::lattice_4x3().bonds().len(), 17);
        let l = Geometry::ladder_2x4();
        assert_eq!(l.on_site, vec![-1.75, -2.25, -2.25, -1.75, -1.75, -2.25, -2.25, -1.75]);
    }

    /// Dimer in the ordered basis (up, down) ∈ {(01,01), (01,10), (10,01), (10,10)}:
    /// hand assembly with one forward bond 0 → 1.
    #[test]
    fn dimer_matches_hand_assembly() {
        let m = dimer(PulseParams::off());
        assert_eq!(m.h_diag, vec![2.0, -2.0, -2.0, 2.0]);
        assert_eq!(m.offdiag_nnz(), 8);
        // forward hops of either spin from state 0 land in 1 (down) and 2 (up)
        let s = m.h_symm.to_dense();
        let a = m.h_anti.to_dense();
        for (r, c) in [(1, 0), (2, 0), (3, 1), (3, 2)] {
            assert_eq!(s[(r, c)], 1.0);
            assert_eq!(s[(c, r)], 1.0);
            assert_eq!(a[(r, c)], 1.0);
            assert_eq!(a[(c, r)], -1.0);
        }
        assert_eq!(s[(0, 3)], 0.0);
        assert_eq!(s[(1, 2)], 0.0);
    }

    #[test]
    fn structure_invariants_on_small_lattices() {
        for g in [Geometry::uniform(2, 2, -1.0, 1.0), Geometry::corner_pattern(2, 3, -1.0, -2.0, 1.0)] {
            let m = HubbardModel::half_filled(&g, 3.0, PulseParams::ladder_default()).unwrap();
            assert!(m.h_symm.same_pattern(&m.h_anti));
            let s = m.h_symm.to_dense();
            let a = m.h_anti.to_dense();
            assert_eq!(s, s.transpose());
            assert_eq!(a, -a.transpose());
            for t in [0.0, 5.3, 6.0, 9.1] {
                let h = m.dense(t);
                assert_eq!(h, h.adjoint());
            }
        }
    }

    #[test]
    fn isospectral_in_time() {
        for g in [Geometry::uniform(1, 2, -1.0, 1.0), Geometry::uniform(2, 2, -1.0, 1.0)] {
            let m = HubbardModel::half_filled(&g, 4.0, PulseParams::ladder_default()).unwrap();
            let e0 = dense::eigvalsh(&m.dense(0.0));
            let e1 = dense::eigvalsh(&m.dense(m.pulse.t_p));
            for (x, y) in e0.iter().zip(&e1) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn fused_product_matches_dense() {
        let m = HubbardModel::half_filled(&Geometry::uniform(2, 2, -0.5, 1.0), 2.0, PulseParams::ladder_default())
            .unwrap();
        let x: Vec<C64> = (0..m.dim()).map(|i| C64::new(i as f64 * 0.1, 1.0 - i as f64 * 0.05)).collect();
        let counter = MatvecCounter::new();
        let t = 5.5;
        let y = m.apply_h(t, &x, &counter);
        assert_eq!(counter.get(), 3);
        let h = m.dense(t);
        for r in 0..m.dim() {
            let expect: C64 = (0..m.dim()).map(|c| h[(r, c)] * x[c]).sum();
            assert!((expect - y[r]).norm() < 1e-13);
        }
        let mut z = vec![C64::default(); m.dim()];
        m.apply_lin(&Lin::new(C64::default(), C64::new(0.0, 2.0), C64::default()), &x, &mut z, &counter);
        assert_eq!(counter.get(), 4);
    }

    #[test]
    fn dimer_ground_state_energy() {
        let m = dimer(PulseParams::off());
        let eig = dense::eigvalsh(&m.dense(-100.0));
        let gs = m.ground_state(-100.0).unwrap();
        assert!((m.energy(-100.0, &gs).unwrap() - eig[0]).abs() < 1e-10);
        let (lo, hi) = m.extremal_eigenvalues(0.0).unwrap();
        assert!((lo - eig[0]).abs() < 1e-10 && (hi - eig[3]).abs() < 1e-10);
    }

    #[test]
    fn basis_vector_energy_in_the_tail() {
        let m = HubbardModel::ladder_2x4().unwrap();
        for k in [0, 17, 4899] {
            let mut e = vec![C64::default(); m.dim()];
            e[k] = C64::new(1.0, 0.0);
            assert!((m.energy(500.0, &e).unwrap() - m.h_diag[k]).abs() < 1e-14);
        }
        let mut bad = vec![C64::default(); m.dim()];
        bad[0] = C64::new(2.0, 0.0);
        assert!(m.energy(0.0, &bad).is_err());
    }

    #[test]
    fn double_occupation_examples() {
        let b = Basis::enumerate(8, 4, 4).unwrap();
        let mut psi = vec![C64::default(); b.len()];
        psi[b.index_of(SpinMask(0b01010101), SpinMask(0b10101010)).unwrap()] = C64::new(1.0, 0.0);
        assert_eq!(double_occupation(&b, &psi).unwrap(), 0.0);
        psi.iter_mut().for_each(|z| *z = C64::default());
        psi[b.index_of(SpinMask(0b1111), SpinMask(0b1111)).unwrap()] = C64::new(0.0, 1.0);
        assert_eq!(double_occupation(&b, &psi).unwrap(), 0.5);

        let d = Basis::enumerate(2, 1, 1).unwrap();
        let uniform = vec![C64::new(0.5, 0.0); 4];
        assert!((double_occupation(&d, &uniform).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_mismatched_basis() {
        let g = Geometry::uniform(2, 2, 0.0, 1.0);
        let b = Basis::enumerate(5, 2, 2).unwrap();
        assert!(HubbardModel::build(&g, b, 1.0, PulseParams::off()).is_err());
        assert!(HubbardModel::half_filled(&Geometry::uniform(1, 3, 0.0, 1.0), 1.0, PulseParams::off()).is_err());
    }
}
