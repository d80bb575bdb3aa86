//! The frustrated Ising ring: a ferromagnetic ring of odd length with two weak
//! central bonds and one antiferromagnetic bond closing the ring.
//!
//! Sites and bonds carry 1-based labels in the public accessors, matching the
//! usual ring notation: bond `j` joins sites `j` and `j + 1`, and bond `N`
//! joins site `N` back to site `1`. Internally every array is 0-based, so
//! bond `j` lives at index `j - 1`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::nambu::NambuMatrix;
use crate::C64;

pub const DEFAULT_J: f64 = 1.0;
pub const DEFAULT_J_W: f64 = 0.5;
pub const DEFAULT_J_F: f64 = 0.45;
pub const DEFAULT_H: f64 = -1.0;

/// Problem instance. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingModel {
    n: usize,
    j: f64,
    j_w: f64,
    j_f: f64,
    h: f64,
    parity: u8,
}

impl RingModel {
    /// Ring of `n` spins with the default couplings `J = 1`, `J_w = 0.5`,
    /// `J_f = 0.45` and field `h = -1`.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_params(n, DEFAULT_J, DEFAULT_J_W, DEFAULT_J_F, DEFAULT_H)
    }

    pub fn with_params(n: usize, j: f64, j_w: f64, j_f: f64, h: f64) -> Result<Self> {
        if n < 5 || n % 2 == 0 {
            return Err(Error::InvalidModel(format!("N = {n} must be odd and >= 5")));
        }
        if ![j, j_w, j_f, h].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidModel("couplings and field must be finite".into()));
        }
        if !(0.0 < j_f && j_f < j_w && j_w < j) {
            return Err(Error::InvalidModel(format!(
                "need 0 < J_f < J_w < J, got J = {j}, J_w = {j_w}, J_f = {j_f}"
            )));
        }
        if j * j_f <= j_w * j_w {
            return Err(Error::InvalidModel(format!(
                "need J * J_f > J_w^2 (bottleneck regime), got {} <= {}",
                j * j_f,
                j_w * j_w
            )));
        }
        // odd N: the fully occupied state |F> is the driver ground state for h < 0
        let parity = if h < 0.0 { 1 } else { 0 };
        Ok(Self { n, j, j_w, j_f, h, parity })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn j(&self) -> f64 {
        self.j
    }
    pub fn j_w(&self) -> f64 {
        self.j_w
    }
    pub fn j_f(&self) -> f64 {
        self.j_f
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn parity(&self) -> u8 {
        self.parity
    }

    pub(crate) fn require_odd_sector(&self) -> Result<()> {
        if self.parity != 1 {
            return Err(Error::UnsupportedParity(self.parity));
        }
        Ok(())
    }

    pub fn couplings(&self) -> CouplingVector {
        let n = self.n;
        let values = (1..=n)
            .map(|bond| {
                if bond == n {
                    -self.j_f
                } else if bond == (n - 1) / 2 || bond == (n + 1) / 2 {
                    self.j_w
                } else {
                    self.j
                }
            })
            .collect();
        CouplingVector { values }
    }

    /// `E_gs = -(N - 3) J - 2 J_w + J_f`, the ferromagnetic ground energy.
    pub fn ground_state_energy(&self) -> f64 {
        -((self.n - 3) as f64) * self.j - 2.0 * self.j_w + self.j_f
    }

    /// Gap `2 (J_w - J_f)` of the target Hamiltonian.
    pub fn final_gap(&self) -> f64 {
        2.0 * (self.j_w - self.j_f)
    }

    /// Predicted location `s_b` of the exponentially small gap.
    pub fn bottleneck_location(&self) -> f64 {
        let (j, jw, jf) = (self.j, self.j_w, self.j_f);
        let num = (j * j - jw * jw) * (jw * jw - jf * jf);
        let den = j * jf * (j * j + jf * jf - 2.0 * jw * jw);
        1.0 / (1.0 + num / den)
    }

    /// Per-site factor `r` of the bottleneck gap decay, `gap ~ r^N`.
    pub fn bottleneck_gap_ratio(&self) -> f64 {
        let (j, jw, jf) = (self.j, self.j_w, self.j_f);
        j * (jw * jw - jf * jf) / (jf * (j * j - jw * jw))
    }

    /// Smallest QAOA depth reaching the exact ground state, `(N^2 - 1) / 4`.
    pub fn critical_depth(&self) -> usize {
        critical_depth(self.n)
    }

    /// Driver in Nambu form: `A_x = h 1`, `B_x = 0`.
    pub fn nambu_hx(&self) -> NambuMatrix {
        let n = self.n;
        let a = DMatrix::from_diagonal_element(n, n, C64::new(self.h, 0.0));
        NambuMatrix::from_blocks_unchecked(a, DMatrix::zeros(n, n))
    }

    /// Target in Nambu form for the odd fermion-parity sector.
    pub fn nambu_hz(&self) -> Result<NambuMatrix> {
        self.require_odd_sector()?;
        let n = self.n;
        let couplings = self.couplings();
        let mut a = DMatrix::<C64>::zeros(n, n);
        let mut b = DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            // bond i + 1 joins sites i and i + 1 (mod n); the odd sector closes
            // the ring with c_{N+1} = +c_1.
            let k = (i + 1) % n;
            let half = C64::new(-couplings.values[i] / 2.0, 0.0);
            a[(i, k)] += half;
            a[(k, i)] += half;
            b[(i, k)] += half;
            b[(k, i)] -= half;
        }
        Ok(NambuMatrix::from_blocks_unchecked(a, b))
    }
}

/// `(N^2 - 1) / 4` for odd `n`.
pub fn critical_depth(n: usize) -> usize {
    debug_assert!(n % 2 == 1);
    (n * n - 1) / 4
}

/// Bond couplings, entry `j` (1-based) for the bond between sites `j` and `j+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingVector {
    values: Vec<f64>,
}

impl CouplingVector {
    /// Coupling of bond `bond` (1-based, cyclic).
    pub fn get(&self, bond: usize) -> f64 {
        let n = self.values.len();
        self.values[(bond + n - 1) % n]
    }

    /// 0-based view: `as_slice()[j - 1]` is bond `j`.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn couplings_n13_defaults() {
        let c = RingModel::new(13).unwrap().couplings();
        for bond in 1..=13 {
            let expected = match bond {
                6 | 7 => 0.5,
                13 => -0.45,
                _ => 1.0,
            };
            assert_eq!(c.get(bond), expected, "bond {bond}");
        }
    }

    #[test]
    fn couplings_n5_defaults() {
        let c = RingModel::new(5).unwrap().couplings();
        assert_eq!(c.as_slice(), &[1.0, 0.5, 0.5, 1.0, -0.45]);
    }

    #[test]
    fn rejects_invalid_models() {
        assert!(matches!(
            RingModel::with_params(13, 1.0, 0.5, 0.6, -1.0),
            Err(Error::InvalidModel(_))
        ));
        assert!(RingModel::new(4).is_err());
        assert!(RingModel::new(3).is_err());
        // J J_f <= J_w^2 leaves the bottleneck regime
        assert!(RingModel::with_params(7, 1.0, 0.5, 0.2, -1.0).is_err());
        assert!(RingModel::with_params(7, 1.0, f64::NAN, 0.45, -1.0).is_err());
    }

    #[test]
    fn reference_energies() {
        let m13 = RingModel::new(13).unwrap();
        assert!(close(m13.ground_state_energy(), -10.55, 1e-12));
        let m5 = RingModel::new(5).unwrap();
        assert!(close(m5.ground_state_energy(), -2.55, 1e-12));
        assert!(close(m13.final_gap(), 0.1, 1e-12));
    }

    #[test]
    fn coupling_sum_is_minus_ground_energy() {
        for n in (5..=101).step_by(2) {
            let m = RingModel::new(n).unwrap();
            let sum = m.couplings().sum();
            assert!(close(sum, -m.ground_state_energy(), 1e-14 * n as f64));
        }
    }

    #[test]
    fn bottleneck_constants() {
        let m = RingModel::new(13).unwrap();
        assert!(close(m.bottleneck_location(), 0.89872068, 1e-8));
        assert!(close(m.bottleneck_gap_ratio(), 0.0475 / 0.3375, 1e-12));
        // close to the J_w^2 = J J_f boundary the formula stays finite
        let edge = RingModel::with_params(9, 1.0, 0.5, 0.250001, -1.0).unwrap();
        assert!(edge.bottleneck_location().is_finite());
    }

    #[test]
    fn critical_depths() {
        assert_eq!(critical_depth(13), 42);
        assert_eq!(critical_depth(5), 6);
        assert_eq!(critical_depth(7), 12);
        for n in (5..2001).step_by(2) {
            assert_eq!(4 * critical_depth(n), n * n - 1);
        }
    }

    #[test]
    fn driver_nambu_blocks() {
        let m = RingModel::new(7).unwrap();
        let hx = m.nambu_hx();
        for i in 0..7 {
            for k in 0..7 {
                let expect = if i == k { -1.0 } else { 0.0 };
                assert_eq!(hx.a()[(i, k)], C64::new(expect, 0.0));
                assert_eq!(hx.b()[(i, k)], C64::new(0.0, 0.0));
            }
        }
        let zero_field = RingModel::with_params(7, 1.0, 0.5, 0.45, 0.0).unwrap();
        assert!(zero_field.nambu_hx().assemble().iter().all(|z| z.norm() == 0.0));
        assert!(matches!(zero_field.nambu_hz(), Err(Error::UnsupportedParity(0))));
    }

    #[test]
    fn target_nambu_blocks_n5() {
        let hz = RingModel::new(5).unwrap().nambu_hz().unwrap();
        let a = hz.a();
        let b = hz.b();
        assert!(close(a[(0, 1)].re, -0.5, 1e-15));
        assert!(close(a[(1, 2)].re, -0.25, 1e-15));
        assert!(close(a[(4, 0)].re, 0.225, 1e-15));
        assert!(close(a[(0, 4)].re, 0.225, 1e-15));
        assert!(close(b[(4, 0)].re, 0.225, 1e-15));
        assert!(close(b[(0, 4)].re, -0.225, 1e-15));
        assert!(close(b[(0, 1)].re, -0.5, 1e-15));
        assert!(close(b[(1, 0)].re, 0.5, 1e-15));
        hz.validate().unwrap();
    }
}
