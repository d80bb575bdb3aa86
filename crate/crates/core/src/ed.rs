//! Dense state-vector simulation of the spin ring for small `N`, used as the
//! ground truth for every free-fermion computation.
//!
//! Basis index bit `j` set means `sigma^z_j = -1`. `H_z = -sum_j J_j
//! sigma^z_j sigma^z_{j+1}` is diagonal, `H_x = -h sum_j sigma^x_j` is applied
//! as single-site rotations. The parity `prod_j sigma^x_j` flips every bit.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::RingModel;
use crate::propagate::Schedule;
use crate::C64;

/// Largest ring handled by the dense oracle.
pub const MAX_SITES: usize = 13;

/// Most eigenvalues returned by [`spectrum_sector`].
pub const MAX_LEVELS: usize = 32;

fn check_size(model: &RingModel) -> Result<usize> {
    if model.n() > MAX_SITES {
        return Err(Error::SizeLimit(model.n()));
    }
    Ok(model.n())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    n: usize,
    amplitudes: Vec<C64>,
}

impl SpinState {
    pub fn from_amplitudes(n: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != 1 << n {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} amplitudes for {n} spins",
                amplitudes.len()
            )));
        }
        Ok(Self { n, amplitudes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &SpinState) -> C64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }
}

/// `|<a|b>|^2`.
pub fn overlap_sq(a: &SpinState, b: &SpinState) -> f64 {
    a.inner(b).norm_sqr()
}

/// Diagonal of `H_z` over the computational basis.
pub fn z_energies(model: &RingModel) -> Result<Vec<f64>> {
    let n = check_size(model)?;
    let couplings = model.couplings();
    let j = couplings.as_slice();
    Ok((0..1usize << n)
        .map(|x| {
            (0..n)
                .map(|i| {
                    let k = (i + 1) % n;
                    let aligned = ((x >> i) ^ (x >> k)) & 1 == 0;
                    if aligned {
                        -j[i]
                    } else {
                        j[i]
                    }
                })
                .sum()
        })
        .collect())
}

/// Every spin in the ground state of `-h sigma^x` (the `-x` direction for
/// `h < 0`).
pub fn initial_state(model: &RingModel) -> Result<SpinState> {
    let n = check_size(model)?;
    if model.h() >= 0.0 {
        return Err(Error::UnsupportedField(model.h()));
    }
    let amp = 1.0 / ((1usize << n) as f64).sqrt();
    let amplitudes = (0..1usize << n)
        .map(|x: usize| C64::from(if x.count_ones() % 2 == 0 { amp } else { -amp }))
        .collect();
    Ok(SpinState { n, amplitudes })
}

/// `e^{-i theta_x H_x} e^{-i theta_z H_z} |state>`.
pub fn apply_step(state: &SpinState, model: &RingModel, theta_x: f64, theta_z: f64) -> Result<SpinState> {
    let diag = z_energies(model)?;
    let mut out = state.clone();
    apply_step_with(&mut out, &diag, model.h(), theta_x, theta_z);
    Ok(out)
}

fn apply_step_with(state: &mut SpinState, diag: &[f64], h: f64, theta_x: f64, theta_z: f64) {
    for (a, e) in state.amplitudes.iter_mut().zip(diag) {
        *a *= C64::from_polar(1.0, -theta_z * e);
    }
    // e^{i theta_x h sigma^x} = cos + i sin sigma^x on each site
    let (s, c) = (theta_x * h).sin_cos();
    let is = C64::new(0.0, s);
    for site in 0..state.n {
        let bit = 1usize << site;
        for x in 0..state.amplitudes.len() {
            if x & bit == 0 {
                let a = state.amplitudes[x];
                let b = state.amplitudes[x | bit];
                state.amplitudes[x] = a * c + b * is;
                state.amplitudes[x | bit] = b * c + a * is;
            }
        }
    }
}

/// Runs a whole schedule from [`initial_state`].
pub fn evolve(model: &RingModel, schedule: &Schedule) -> Result<SpinState> {
    let diag = z_energies(model)?;
    let mut state = initial_state(model)?;
    for (tx, tz) in schedule.theta_x().iter().zip(schedule.theta_z()) {
        apply_step_with(&mut state, &diag, model.h(), *tx, *tz);
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinObservables {
    /// `<H_z>`.
    pub energy: f64,
    /// `<sigma^z_j sigma^z_{j+1}>` per bond, 0-based.
    pub correlators: Vec<f64>,
    /// `<prod_j sigma^x_j>`.
    pub parity: f64,
}

pub fn observables(state: &SpinState, model: &RingModel) -> Result<SpinObservables> {
    let n = check_size(model)?;
    if state.n != n {
        return Err(Error::DimensionMismatch(alloc::format!("state has {} spins, model {n}", state.n)));
    }
    let mask = (1usize << n) - 1;
    let mut correlators = vec![0.0; n];
    let mut parity = 0.0;
    for (x, a) in state.amplitudes.iter().enumerate() {
        let p = a.norm_sqr();
        for (i, c) in correlators.iter_mut().enumerate() {
            let k = (i + 1) % n;
            if ((x >> i) ^ (x >> k)) & 1 == 0 {
                *c += p;
            } else {
                *c -= p;
            }
        }
        parity += (state.amplitudes[x ^ mask].conj() * a).re;
    }
    let couplings = model.couplings();
    let energy = -couplings.as_slice().iter().zip(&correlators).map(|(j, c)| j * c).sum::<f64>();
    Ok(SpinObservables { energy, correlators, parity })
}

/// `(1/N) sum_j J_j (1 - <sigma^z_j sigma^z_{j+1}>)` from the spin state.
pub fn residual_energy(state: &SpinState, model: &RingModel) -> Result<f64> {
    let obs = observables(state, model)?;
    Ok((obs.energy - model.ground_state_energy()) / model.n() as f64)
}

/// `s H_z + (1 - s) H_x` in the odd-parity basis `(|x> - |~x>) / sqrt 2`,
/// `x` ranging over configurations with the top bit clear.
fn sector_hamiltonian(model: &RingModel, s: f64) -> Result<DMatrix<f64>> {
    let n = check_size(model)?;
    let diag = z_energies(model)?;
    let dim = 1usize << (n - 1);
    let top = 1usize << (n - 1);
    let mask = (1usize << n) - 1;
    let coeff = -(1.0 - s) * model.h();
    let mut m = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        m[(x, x)] = s * diag[x];
        if coeff == 0.0 {
            continue;
        }
        for site in 0..n {
            let y = x ^ (1 << site);
            if y & top == 0 {
                m[(y, x)] += coeff;
            } else {
                m[(y ^ mask, x)] -= coeff;
            }
        }
    }
    Ok(m)
}

/// Lowest `k` eigenpairs of `s H_z + (1 - s) H_x` in the sector
/// `prod sigma^x = -1`, ascending.
pub fn eigenstates_sector(model: &RingModel, s: f64, k: usize) -> Result<(Vec<f64>, Vec<SpinState>)> {
    let n = check_size(model)?;
    if k > MAX_LEVELS {
        return Err(Error::InvalidArgument(alloc::format!("k = {k} exceeds {MAX_LEVELS}")));
    }
    let h = sector_hamiltonian(model, s)?;
    let dim = h.nrows();
    let k = k.min(dim);
    let (values, vectors) = if s == 1.0 {
        // already diagonal
        (h.diagonal(), DMatrix::identity(dim, dim))
    } else {
        let eig = SymmetricEigen::try_new(h, f64::EPSILON, 100_000).ok_or(Error::EigensolverFailure)?;
        (eig.eigenvalues, eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mask = (1usize << n) - 1;
    let norm = core::f64::consts::FRAC_1_SQRT_2;
    let mut energies = Vec::with_capacity(k);
    let mut states = Vec::with_capacity(k);
    for &col in order.iter().take(k) {
        energies.push(values[col]);
        let mut amplitudes = vec![C64::from(0.0); 1 << n];
        for x in 0..dim {
            let c = vectors[(x, col)] * norm;
            amplitudes[x] += c;
            amplitudes[x ^ mask] -= c;
        }
        states.push(SpinState { n, amplitudes });
    }
    Ok((energies, states))
}

/// Lowest `k` sector energies.
pub fn spectrum_sector(model: &RingModel, s: f64, k: usize) -> Result<Vec<f64>> {
    Ok(eigenstates_sector(model, s, k)?.0)
}
