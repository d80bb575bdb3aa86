//! Nambu (particle-hole) linear algebra.
//!
//! A quadratic fermion Hamiltonian `H = Psi^dag M Psi` with
//! `Psi = (c_1..c_N, c_1^dag..c_N^dag)` is stored through its blocks
//! `M = [[A, B], [-B*, -A*]]`. Bogoliubov transformations are stored through
//! the first block column `(U; V)` of `[[U, V*], [V, U*]]`, so that
//! `c = U gamma + V* gamma^dag`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::RingModel;
use crate::C64;

const STRUCTURE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct NambuMatrix {
    a: DMatrix<C64>,
    b: DMatrix<C64>,
}

impl NambuMatrix {
    /// Builds from blocks, checking `A = A^dag` and `B = -B^T`.
    pub fn from_blocks(a: DMatrix<C64>, b: DMatrix<C64>) -> Result<Self> {
        let m = Self::from_blocks_unchecked(a, b);
        m.validate()?;
        Ok(m)
    }

    pub(crate) fn from_blocks_unchecked(a: DMatrix<C64>, b: DMatrix<C64>) -> Self {
        debug_assert_eq!(a.shape(), b.shape());
        Self { a, b }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn a(&self) -> &DMatrix<C64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<C64> {
        &self.b
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        if self.a.shape() != (n, n) || self.b.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "Nambu blocks must be square and equal, got {:?} and {:?}",
                self.a.shape(),
                self.b.shape()
            )));
        }
        let scale = 1.0 + max_abs(&self.a).max(max_abs(&self.b));
        for i in 0..n {
            for k in 0..n {
                if (self.a[(i, k)] - self.a[(k, i)].conj()).norm() > STRUCTURE_TOL * scale {
                    return Err(Error::InvalidArgument("A block is not hermitian".into()));
                }
                if (self.b[(i, k)] + self.b[(k, i)]).norm() > STRUCTURE_TOL * scale {
                    return Err(Error::InvalidArgument("B block is not antisymmetric".into()));
                }
            }
        }
        Ok(())
    }

    /// The full `2N x 2N` hermitian matrix.
    pub fn assemble(&self) -> DMatrix<C64> {
        let n = self.n();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.a);
        m.view_mut((0, n), (n, n)).copy_from(&self.b);
        m.view_mut((n, 0), (n, n)).copy_from(&(-self.b.conjugate()));
        m.view_mut((n, n), (n, n)).copy_from(&(-self.a.conjugate()));
        m
    }

    /// `wa * self + wb * other`.
    pub fn combine(&self, wa: f64, other: &NambuMatrix, wb: f64) -> NambuMatrix {
        NambuMatrix {
            a: &self.a * C64::from(wa) + &other.a * C64::from(wb),
            b: &self.b * C64::from(wa) + &other.b * C64::from(wb),
        }
    }

    fn is_real(&self) -> bool {
        self.a.iter().chain(self.b.iter()).all(|z| z.im == 0.0)
    }
}

/// Positive-branch BdG energies and the Bogoliubov blocks diagonalizing a
/// Nambu matrix: `M = W diag(e_1..e_N, -e_1..-e_N) W^dag` with
/// `W = [[U, V*], [V, U*]]`.
#[derive(Debug, Clone)]
pub struct BdGSpectrum {
    pub energies: Vec<f64>,
    pub u: DMatrix<C64>,
    pub v: DMatrix<C64>,
}

impl BdGSpectrum {
    pub fn unitary(&self) -> DMatrix<C64> {
        assemble_bogoliubov(&self.u, &self.v)
    }

    /// Fermion parity (0 even, 1 odd) of the Bogoliubov vacuum.
    pub fn vacuum_parity(&self) -> u8 {
        vacuum_parity(&self.u, &self.v)
    }
}

/// `[[U, V*], [V, U*]]`.
pub fn assemble_bogoliubov(u: &DMatrix<C64>, v: &DMatrix<C64>) -> DMatrix<C64> {
    let n = u.nrows();
    let mut w = DMatrix::zeros(2 * n, 2 * n);
    w.view_mut((0, 0), (n, n)).copy_from(u);
    w.view_mut((0, n), (n, n)).copy_from(&v.conjugate());
    w.view_mut((n, 0), (n, n)).copy_from(v);
    w.view_mut((n, n), (n, n)).copy_from(&u.conjugate());
    w
}

/// Parity of the vacuum annihilated by `gamma = U^dag c + V^dag c^dag`.
///
/// The particle-hole unitaries form a copy of `O(2N)`; the vacuum parity is
/// constant on each component and flips with every single-mode exchange, so
/// it equals the sign of `det W` (the identity gives the empty state).
pub fn vacuum_parity(u: &DMatrix<C64>, v: &DMatrix<C64>) -> u8 {
    let det = assemble_bogoliubov(u, v).determinant();
    if det.re < 0.0 {
        1
    } else {
        0
    }
}

/// `max |W^dag W - 1|` over entries.
pub fn unitarity_drift(u: &DMatrix<C64>, v: &DMatrix<C64>) -> f64 {
    let w = assemble_bogoliubov(u, v);
    let mut gram = w.adjoint() * &w;
    for i in 0..gram.nrows() {
        gram[(i, i)] -= C64::from(1.0);
    }
    gram.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Diagonalizes a Nambu matrix with a dense hermitian eigensolver.
///
/// Only the positive-branch eigenvectors are taken from the solver; the
/// negative branch is always their particle-hole conjugate. Columns are
/// phase-fixed so that their largest entry is real and positive.
pub fn diagonalize(m: &NambuMatrix) -> Result<BdGSpectrum> {
    let n = m.n();
    let full = m.assemble();
    let scale = max_abs(&full).max(1.0);
    let eig = SymmetricEigen::try_new(full, f64::EPSILON, 10_000)
        .ok_or(Error::EigensolverFailure)?;
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&i, &k| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[k]));

    let zero_tol = 1e-9 * scale;
    let near_zero: Vec<usize> =
        order.iter().copied().filter(|&i| eig.eigenvalues[i].abs() < zero_tol).collect();

    let mut columns: Vec<(f64, DVector<C64>)> = Vec::with_capacity(n);
    for &i in order.iter().skip(n) {
        if near_zero.contains(&i) {
            continue;
        }
        columns.push((eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()));
    }
    if !near_zero.is_empty() {
        let vectors: Vec<DVector<C64>> =
            near_zero.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        for x in pair_zero_modes(&vectors, n) {
            columns.push((0.0, x));
        }
    }
    if columns.len() != n {
        return Err(Error::EigensolverFailure);
    }
    columns.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut u = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    let mut energies = Vec::with_capacity(n);
    for (mu, (e, mut x)) in columns.into_iter().enumerate() {
        fix_phase(&mut x);
        energies.push(e.max(0.0));
        u.column_mut(mu).copy_from(&x.rows(0, n));
        v.column_mut(mu).copy_from(&x.rows(n, n));
    }
    Ok(BdGSpectrum { energies, u, v })
}

/// Splits a particle-hole invariant zero-energy subspace into orthonormal
/// columns `x` with `<C x, x> = 0`, where `C (u; v) = (v*; u*)`.
fn pair_zero_modes(vectors: &[DVector<C64>], n: usize) -> Vec<DVector<C64>> {
    let conj = |x: &DVector<C64>| {
        let mut y = DVector::zeros(2 * n);
        for i in 0..n {
            y[i] = x[i + n].conj();
            y[i + n] = x[i].conj();
        }
        y
    };
    // C-invariant spanning set, orthonormalized with real coefficients
    let mut basis: Vec<DVector<C64>> = Vec::new();
    for x in vectors {
        let cx = conj(x);
        for cand in [x + &cx, (x - &cx) * C64::i()] {
            let mut r = cand;
            for q in &basis {
                let proj = q.dotc(&r).re;
                r -= q * C64::from(proj);
            }
            let norm = r.norm();
            if norm > 1e-6 {
                basis.push(r / C64::from(norm));
            }
        }
    }
    let s = C64::from(core::f64::consts::FRAC_1_SQRT_2);
    basis
        .chunks_exact(2)
        .map(|pair| (&pair[0] + &pair[1] * C64::i()) * s)
        .collect()
}

fn fix_phase(x: &mut DVector<C64>) {
    let max = x.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    if max == 0.0 {
        return;
    }
    let pivot = x.iter().position(|z| z.norm() >= max * (1.0 - 1e-12)).unwrap_or(0);
    let phase = x[pivot].conj() / x[pivot].norm();
    *x *= phase;
}

/// Positive-branch energies only, ascending.
///
/// Real Nambu matrices (`A` real symmetric, `B` real antisymmetric) reduce to
/// the singular values of the `N x N` matrix `A + B`; complex ones fall back
/// to the hermitian eigensolver.
pub fn bdg_energies(m: &NambuMatrix) -> Result<Vec<f64>> {
    let n = m.n();
    if m.is_real() {
        let sum = DMatrix::from_fn(n, n, |i, k| m.a[(i, k)].re + m.b[(i, k)].re);
        let svd = sum.try_svd(false, false, f64::EPSILON, 10_000).ok_or(Error::EigensolverFailure)?;
        let mut e: Vec<f64> = svd.singular_values.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        return Ok(e);
    }
    let eig = SymmetricEigen::try_new(m.assemble(), f64::EPSILON, 10_000)
        .ok_or(Error::EigensolverFailure)?;
    let mut all: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    all.sort_by(f64::total_cmp);
    Ok(all[n..].iter().map(|e| e.max(0.0)).collect())
}

/// `s H_z + (1 - s) H_x` for `s` in `[0, 1]`.
pub fn interpolate(model: &RingModel, s: f64) -> Result<NambuMatrix> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::OutOfRange(s));
    }
    mix(model, s)
}

/// `s H_z + (1 - s) H_x` for any finite `s`.
pub(crate) fn mix(model: &RingModel, s: f64) -> Result<NambuMatrix> {
    let hz = model.nambu_hz()?;
    Ok(hz.combine(s, &model.nambu_hx(), 1.0 - s))
}

/// `points` equally spaced values covering `[0, 1]`.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| i as f64 / (points - 1) as f64).collect(),
    }
}

pub const DEFAULT_GRID_POINTS: usize = 1001;

/// Lowest gap of the odd-sector spectrum along the linear interpolation.
#[derive(Debug, Clone)]
pub struct GapCurve {
    pub s_values: Vec<f64>,
    pub gaps: Vec<f64>,
    pub epsilon1: Vec<f64>,
    pub epsilon2: Vec<f64>,
    /// First grid point past the zero-energy crossing of the lowest level.
    pub s_c_detected: f64,
    /// Grid point of the smallest gap beyond the crossing.
    pub s_b_detected: f64,
}

impl GapCurve {
    pub fn min_gap_after_crossing(&self) -> f64 {
        self.s_values
            .iter()
            .zip(&self.gaps)
            .filter(|(s, _)| **s >= self.s_c_detected)
            .map(|(_, g)| *g)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Scans the grid. While the Bogoliubov vacuum is odd the first sector
/// excitation costs `2 (e_2 + e_1)`; past the zero crossing the vacuum turns
/// even, the lowest level stays occupied and the gap is `2 (e_2 - e_1)`.
/// The branch is chosen from the exact vacuum parity at each point, so grid
/// points next to the crossing are never misassigned.
pub fn gap_curve(model: &RingModel, grid: &[f64]) -> Result<GapCurve> {
    if grid.len() < 3 {
        return Err(Error::GridTooCoarse(format!("{} grid points", grid.len())));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 || grid[grid.len() - 1] > 1.0 {
        return Err(Error::InvalidArgument("grid must be strictly increasing in [0, 1]".into()));
    }
    let hz = model.nambu_hz()?;
    let hx = model.nambu_hx();
    let mut eps1 = Vec::with_capacity(grid.len());
    let mut eps2 = Vec::with_capacity(grid.len());
    let mut odd = Vec::with_capacity(grid.len());
    for &s in grid {
        let m = hz.combine(s, &hx, 1.0 - s);
        let e = bdg_energies(&m)?;
        eps1.push(e[0]);
        eps2.push(e[1]);
        odd.push(real_vacuum_parity(&m)? == 1);
    }
    let crossing = match odd.iter().position(|o| !o) {
        Some(i) if i > 0 => i,
        _ => {
            return Err(Error::GridTooCoarse(
                "lowest BdG level does not cross zero inside the grid".into(),
            ))
        }
    };
    let gaps: Vec<f64> = (0..grid.len())
        .map(|i| if odd[i] { 2.0 * (eps2[i] + eps1[i]) } else { 2.0 * (eps2[i] - eps1[i]) })
        .collect();
    let beyond = crossing + argmin(&gaps[crossing..]);
    Ok(GapCurve {
        s_values: grid.to_vec(),
        gaps,
        epsilon1: eps1,
        epsilon2: eps2,
        s_c_detected: grid[crossing],
        s_b_detected: grid[beyond],
    })
}

/// Vacuum parity of a real Nambu matrix from `sign det(A + B)`: negative
/// means odd. The sign flips exactly when a level crosses zero.
pub fn real_vacuum_parity(m: &NambuMatrix) -> Result<u8> {
    if !m.is_real() {
        return Ok(diagonalize(m)?.vacuum_parity());
    }
    let n = m.n();
    let sum = DMatrix::from_fn(n, n, |i, k| m.a[(i, k)].re + m.b[(i, k)].re);
    Ok(if sum.determinant() < 0.0 { 1 } else { 0 })
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Replaces the listed columns of `(U; V)` by their particle-hole partners
/// `(V*; U*)`, i.e. exchanges `gamma_mu` and `gamma_mu^dag`.
pub fn flip_modes(u: &DMatrix<C64>, v: &DMatrix<C64>, modes: &[usize]) -> (DMatrix<C64>, DMatrix<C64>) {
    let mut uf = u.clone();
    let mut vf = v.clone();
    for &mu in modes {
        for i in 0..u.nrows() {
            uf[(i, mu)] = v[(i, mu)].conj();
            vf[(i, mu)] = u[(i, mu)].conj();
        }
    }
    (uf, vf)
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}


#[cfg(test)]
mod tests {
    use super::*;

    fn diag_residual(m: &NambuMatrix, spec: &BdGSpectrum) -> f64 {
        let n = m.n();
        let w = spec.unitary();
        let mut d = w.adjoint() * m.assemble() * &w;
        for mu in 0..n {
            d[(mu, mu)] -= C64::from(spec.energies[mu]);
            d[(mu + n, mu + n)] += C64::from(spec.energies[mu]);
        }
        max_abs(&d)
    }

    #[test]
    fn driver_diagonalization() {
        let m = RingModel::new(7).unwrap();
        let spec = diagonalize(&m.nambu_hx()).unwrap();
        for e in &spec.energies {
            assert!((e - 1.0).abs() < 1e-12);
        }
        // h < 0: positive-energy quasiparticles are holes, gamma = c^dag
        assert!(max_abs(&spec.u) < 1e-12);
        let vv = spec.v.adjoint() * &spec.v;
        assert!(max_abs(&(vv - DMatrix::identity(7, 7))) < 1e-12);
        assert!(diag_residual(&m.nambu_hx(), &spec) < 1e-11);
        assert_eq!(spec.vacuum_parity(), 1);
    }

    #[test]
    fn target_energies_are_coupling_magnitudes() {
        let m = RingModel::new(7).unwrap();
        let spec = diagonalize(&m.nambu_hz().unwrap()).unwrap();
        let mut expected: Vec<f64> = m.couplings().as_slice().iter().map(|j| j.abs()).collect();
        expected.sort_by(f64::total_cmp);
        for (e, x) in spec.energies.iter().zip(&expected) {
            assert!((e - x).abs() < 1e-12);
        }
        let fast = bdg_energies(&m.nambu_hz().unwrap()).unwrap();
        for (e, x) in fast.iter().zip(&expected) {
            assert!((e - x).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let m = RingModel::new(5).unwrap();
        assert_eq!(interpolate(&m, 0.0).unwrap().assemble(), m.nambu_hx().assemble());
        assert_eq!(interpolate(&m, 1.0).unwrap().assemble(), m.nambu_hz().unwrap().assemble());
        let mid = interpolate(&m, 0.5).unwrap().assemble();
        let avg = (m.nambu_hx().assemble() + m.nambu_hz().unwrap().assemble()) * C64::from(0.5);
        assert!(max_abs(&(mid - avg)) < 1e-15);
        assert!(matches!(interpolate(&m, 1.5), Err(Error::OutOfRange(_))));
        assert!(matches!(interpolate(&m, -0.1), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn spectrum_structure_along_the_path() {
        let m = RingModel::new(9).unwrap();
        for &s in &[0.1, 0.37, 0.5, 0.77, 0.9, 0.99] {
            let h = interpolate(&m, s).unwrap();
            let spec = diagonalize(&h).unwrap();
            let gram = spec.u.adjoint() * &spec.u + spec.v.adjoint() * &spec.v;
            assert!(max_abs(&(gram - DMatrix::identity(9, 9))) < 1e-12);
            assert!(diag_residual(&h, &spec) < 1e-11);
            // symmetric spectrum of the full matrix
            let full = SymmetricEigen::new(h.assemble());
            let mut ev: Vec<f64> = full.eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            for k in 0..18 {
                assert!((ev[k] + ev[17 - k]).abs() < 1e-12);
            }
            let fast = bdg_energies(&h).unwrap();
            for (a, b) in fast.iter().zip(&spec.energies) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn complex_input_uses_eigensolver_path() {
        let m = RingModel::new(5).unwrap();
        let h = interpolate(&m, 0.3).unwrap();
        // a gauge rotation c -> e^{i phi} c keeps the spectrum
        let phase = C64::from_polar(1.0, 0.4);
        let a = h.a().clone();
        let b = h.b().map(|z| z * phase * phase);
        let rotated = NambuMatrix::from_blocks(a, b).unwrap();
        let e1 = bdg_energies(&h).unwrap();
        let e2 = bdg_energies(&rotated).unwrap();
        for (x, y) in e1.iter().zip(&e2) {
            assert!((x - y).abs() < 1e-12);
        }
        let spec = diagonalize(&rotated).unwrap();
        assert!(diag_residual(&rotated, &spec) < 1e-11);
    }

    #[test]
    fn exact_zero_modes_are_paired() {
        // A = 0, B = 0: every level sits at zero energy
        let n = 3;
        let m = NambuMatrix::from_blocks(DMatrix::zeros(n, n), DMatrix::zeros(n, n)).unwrap();
        let spec = diagonalize(&m).unwrap();
        let w = spec.unitary();
        let gram = w.adjoint() * &w;
        assert!(max_abs(&(gram - DMatrix::identity(2 * n, 2 * n))) < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian_blocks() {
        let mut a = DMatrix::<C64>::zeros(3, 3);
        a[(0, 1)] = C64::new(1.0, 0.0);
        assert!(NambuMatrix::from_blocks(a, DMatrix::zeros(3, 3)).is_err());
        let mut b = DMatrix::<C64>::zeros(3, 3);
        b[(0, 1)] = C64::new(1.0, 0.0);
        b[(1, 0)] = C64::new(1.0, 0.0);
        assert!(NambuMatrix::from_blocks(DMatrix::zeros(3, 3), b).is_err());
    }

    #[test]
    fn gap_curve_endpoint_and_crossing() {
        let m = RingModel::new(5).unwrap();
        let curve = gap_curve(&m, &uniform_grid(401)).unwrap();
        let last = *curve.gaps.last().unwrap();
        assert!((last - 0.1).abs() < 1e-12);
        assert!((curve.gaps[0] - 4.0).abs() < 1e-12);
        assert!(curve.s_c_detected > 0.3 && curve.s_c_detected < 0.7);
        assert!(curve.gaps.iter().all(|g| *g >= 0.0));
        assert!(curve.s_b_detected > curve.s_c_detected);
    }

    #[test]
    fn gap_curve_is_continuous_across_the_crossing() {
        let m = RingModel::new(21).unwrap();
        let grid = uniform_grid(2001);
        let curve = gap_curve(&m, &grid).unwrap();
        let ic = grid.iter().position(|s| *s == curve.s_c_detected).unwrap();
        let step_jump = (curve.gaps[ic] - curve.gaps[ic - 1]).abs();
        let slope = (curve.gaps[ic - 1] - curve.gaps[ic - 2]).abs();
        assert!(step_jump <= 4.0 * curve.epsilon1[ic] + 2.0 * slope + 1e-9);
    }

    #[test]
    fn gap_curve_rejects_bad_grids() {
        let m = RingModel::new(7).unwrap();
        assert!(matches!(gap_curve(&m, &[0.0, 1.0]), Err(Error::GridTooCoarse(_))));
        // crossing not bracketed
        assert!(matches!(gap_curve(&m, &[0.0, 0.1, 0.2]), Err(Error::GridTooCoarse(_))));
        assert!(gap_curve(&m, &[0.0, 0.5, 0.4, 1.0]).is_err());
    }

    #[test]
    fn determinant_parity_matches_bogoliubov_parity() {
        for n in [5, 7, 9] {
            let m = RingModel::new(n).unwrap();
            for i in 0..=20 {
                let s = i as f64 / 20.0;
                let nm = interpolate(&m, s).unwrap();
                let spec = diagonalize(&nm).unwrap();
                assert_eq!(real_vacuum_parity(&nm).unwrap(), spec.vacuum_parity(), "N={n} s={s}");
            }
        }
    }

    #[test]
    fn flipping_a_mode_flips_vacuum_parity() {
        let m = RingModel::new(7).unwrap();
        let spec = diagonalize(&interpolate(&m, 0.3).unwrap()).unwrap();
        let p = spec.vacuum_parity();
        let (u, v) = flip_modes(&spec.u, &spec.v, &[0]);
        assert_eq!(vacuum_parity(&u, &v), 1 - p);
        let (u2, v2) = flip_modes(&spec.u, &spec.v, &[0, 3]);
        assert_eq!(vacuum_parity(&u2, &v2), p);
    }
}
