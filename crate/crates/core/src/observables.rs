//! Green's functions, residual energy and instantaneous-level populations of
//! a propagated Bogoliubov state.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::RingModel;
use crate::nambu::{diagonalize, flip_modes, mix, NambuMatrix};
use crate::propagate::{advance, BdGPropagator, RingDynamics, Schedule, DEGENERATE_STEP_TOL};
use crate::C64;

/// `g = <c c^dag>` and `f = <c c>` in the state described by `(U; V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreensFunctions {
    pub g: DMatrix<C64>,
    pub f: DMatrix<C64>,
}

/// `G = U U^dag`, `F = U V^dag`.
pub fn greens(prop: &BdGPropagator) -> GreensFunctions {
    GreensFunctions { g: &prop.u * prop.u.adjoint(), f: &prop.u * prop.v.adjoint() }
}

impl GreensFunctions {
    /// `<sigma^z_j sigma^z_{j+1}> = -(F + G)_{j,j+1} - c.c.`, bond `N`
    /// wrapping to site 1.
    pub fn correlators(&self) -> Vec<f64> {
        let n = self.g.nrows();
        (0..n)
            .map(|j| {
                let k = (j + 1) % n;
                -2.0 * (self.f[(j, k)] + self.g[(j, k)]).re
            })
            .collect()
    }

    /// Residual energy evaluated from the correlators.
    pub fn residual_energy(&self, model: &RingModel) -> f64 {
        let couplings = model.couplings();
        let corr = self.correlators();
        let n = corr.len() as f64;
        couplings.as_slice().iter().zip(&corr).map(|(j, c)| j * (1.0 - c)).sum::<f64>() / n
    }
}

/// Domain-wall density `(1 - <sigma^z_j sigma^z_{j+1}>) / 2` per bond.
///
/// This is the occupation of the bond's `H_z` quasiparticle,
/// `sum_m |b_jm|^2` with `(a; b) = W_z^dag (U; V)`. Unlike `1 - <...>` it
/// keeps full relative precision as the state approaches the ground state.
pub(crate) fn bond_excitations(n: usize, u: &[C64], v: &[C64], out: &mut [f64]) {
    out.iter_mut().for_each(|c| *c = 0.0);
    for m in 0..n {
        let uc = &u[m * n..(m + 1) * n];
        let vc = &v[m * n..(m + 1) * n];
        for j in 0..n {
            let k = if j + 1 == n { 0 } else { j + 1 };
            out[j] += ((uc[j] + uc[k] - vc[j] + vc[k]) * 0.5).norm_sqr();
        }
    }
}

/// `(2/N) sum_j J_j n_j` from the domain-wall densities.
pub(crate) fn residual_from_excitations(couplings: &[f64], occ: &[f64]) -> f64 {
    let n = couplings.len() as f64;
    2.0 * couplings.iter().zip(occ).map(|(j, o)| j * o).sum::<f64>() / n
}

/// Residual energy per site, `(E - E_gs) / N
/// = (1/N) sum_j J_j (1 - <sigma^z_j sigma^z_{j+1}>)`.
pub fn residual_energy(model: &RingModel, prop: &BdGPropagator) -> f64 {
    let n = model.n();
    let mut occ = vec![0.0; n];
    bond_excitations(n, prop.u.as_slice(), prop.v.as_slice(), &mut occ);
    residual_from_excitations(model.couplings().as_slice(), &occ)
}

/// `s_p H_z + (1 - s_p) H_x` with `s_p = theta_z / (theta_x + theta_z)`, the
/// leading term of the step's Baker-Campbell-Hausdorff expansion.
pub fn effective_hamiltonian(model: &RingModel, theta_x: f64, theta_z: f64) -> Result<NambuMatrix> {
    let delta = theta_x + theta_z;
    if delta.abs() <= DEGENERATE_STEP_TOL {
        return Err(Error::DegenerateStep(delta));
    }
    mix(model, theta_z / delta)
}

/// A Bogoliubov vacuum given by its `(U, V)` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub u: DMatrix<C64>,
    pub v: DMatrix<C64>,
}

impl From<&BdGPropagator> for GaussianState {
    fn from(p: &BdGPropagator) -> Self {
        Self { u: p.u.clone(), v: p.v.clone() }
    }
}

/// `|<a|b>|^2 = |det(U_a^dag U_b + V_a^dag V_b)|`.
pub fn gaussian_overlap_sq(a: &GaussianState, b: &GaussianState) -> f64 {
    let m = a.u.adjoint() * &b.u + a.v.adjoint() * &b.v;
    m.determinant().norm()
}

/// Eigenstates of a Nambu Hamiltonian inside the odd sector, lowest first.
#[derive(Debug, Clone)]
pub struct SectorLevels {
    /// Energies relative to the sector ground state.
    pub excitation_energies: Vec<f64>,
    /// Excited modes (indices into the ascending BdG spectrum) per level.
    pub modes: Vec<Vec<usize>>,
    pub states: Vec<GaussianState>,
    /// Whether the lowest mode had to be filled to reach the odd sector.
    pub flipped: bool,
}

/// Lowest `levels` eigenstates of `m` with odd fermion parity.
///
/// With `H = Psi^dag M Psi` each quasiparticle costs `2 epsilon`. When the
/// Bogoliubov vacuum is even, the lowest mode is filled (a particle-hole
/// exchange of that column) and its energy enters with a minus sign.
/// Excitations are even-size mode subsets ordered by summed energy; only the
/// lowest `levels + 1` modes can appear in the lowest `levels` states, so the
/// enumeration is exhaustive.
pub fn sector_levels(m: &NambuMatrix, levels: usize) -> Result<SectorLevels> {
    let spec = diagonalize(m)?;
    let n = m.n();
    let flipped = spec.vacuum_parity() != 1;
    let (u0, v0) = if flipped { flip_modes(&spec.u, &spec.v, &[0]) } else { (spec.u, spec.v) };
    let mut e = spec.energies;
    if flipped {
        e[0] = -e[0];
    }
    let pool = n.min(levels + 1).min(20);
    let mut subsets: Vec<(f64, Vec<usize>)> = (0u32..1 << pool)
        .filter(|mask| mask.count_ones() % 2 == 0)
        .map(|mask| {
            let modes: Vec<usize> = (0..pool).filter(|i| mask >> i & 1 == 1).collect();
            (2.0 * modes.iter().map(|&i| e[i]).sum::<f64>(), modes)
        })
        .collect();
    subsets.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.len().cmp(&b.1.len())));
    subsets.truncate(levels);
    let mut out = SectorLevels {
        excitation_energies: Vec::with_capacity(levels),
        modes: Vec::with_capacity(levels),
        states: Vec::with_capacity(levels),
        flipped,
    };
    for (energy, modes) in subsets {
        let (u, v) = flip_modes(&u0, &v0, &modes);
        out.excitation_energies.push(energy);
        out.states.push(GaussianState { u, v });
        out.modes.push(modes);
    }
    Ok(out)
}

/// Populations `P_j(p)` of the lowest odd-sector eigenstates of the
/// per-step effective Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTrace {
    /// Step index; 0 is the initial state.
    pub p_index: Vec<usize>,
    pub s_p: Vec<f64>,
    /// One row per recorded step, `levels` entries each.
    pub pops: Vec<Vec<f64>>,
    /// Steps skipped because `theta_x + theta_z` vanished.
    pub skipped: Vec<usize>,
}

impl PopulationTrace {
    /// Step with the smallest ground-state population.
    pub fn min_ground_population(&self) -> Option<(usize, f64)> {
        self.p_index
            .iter()
            .zip(&self.pops)
            .map(|(p, row)| (*p, row[0]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Row 0 is the initial state against the driver (`s = 0`); row `p` is the
/// state after step `p` against the eigenstates of that step's effective
/// Hamiltonian.
pub fn populations(model: &RingModel, schedule: &Schedule, levels: usize) -> Result<PopulationTrace> {
    if levels == 0 {
        return Err(Error::InvalidArgument("need at least one level".into()));
    }
    let dynamics = RingDynamics::new(model)?;
    let mut prop = BdGPropagator::fully_occupied(model.n());
    let mut trace = PopulationTrace { p_index: vec![], s_p: vec![], pops: vec![], skipped: vec![] };
    let record = |p: usize, s: f64, prop: &BdGPropagator, trace: &mut PopulationTrace| -> Result<()> {
        let lv = sector_levels(&mix(model, s)?, levels)?;
        let psi = GaussianState::from(prop);
        trace.p_index.push(p);
        trace.s_p.push(s);
        trace.pops.push(lv.states.iter().map(|phi| gaussian_overlap_sq(phi, &psi)).collect());
        Ok(())
    };
    record(0, 0.0, &prop, &mut trace)?;
    for (i, (tx, tz)) in schedule.theta_x().iter().zip(schedule.theta_z()).enumerate() {
        advance(&dynamics, &mut prop, *tx, *tz)?;
        let delta = tx + tz;
        if delta.abs() <= DEGENERATE_STEP_TOL {
            log::warn!("step {} has theta_x + theta_z = {delta:e}; no population sample", i + 1);
            trace.skipped.push(i + 1);
            continue;
        }
        record(i + 1, tz / delta, &prop, &mut trace)?;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagate::propagate;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn initial_greens_functions_vanish() {
        let gf = greens(&BdGPropagator::fully_occupied(7));
        assert!(gf.g.iter().all(|z| z.norm() == 0.0));
        assert!(gf.f.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn greens_structure() {
        let m = RingModel::new(9).unwrap();
        let s = Schedule::new(vec![0.0, 0.4, 1.3], vec![0.7, 0.2, -0.6]).unwrap();
        let gf = greens(&propagate(&m, &s).unwrap());
        assert!(crate::nambu::max_abs(&(gf.g.adjoint() - &gf.g)) < 1e-12);
        assert!(crate::nambu::max_abs(&(gf.f.transpose() + &gf.f)) < 1e-12);
        let occ = nalgebra::SymmetricEigen::new(DMatrix::<C64>::identity(9, 9) - &gf.g);
        assert!(occ.eigenvalues.iter().all(|x| *x > -1e-12 && *x < 1.0 + 1e-12));
    }

    #[test]
    fn identity_circuit_residual() {
        let m = RingModel::new(13).unwrap();
        let prop = propagate(&m, &Schedule::zeros(3).unwrap()).unwrap();
        assert!(close(residual_energy(&m, &prop), 10.55 / 13.0, 1e-14));
        let via_greens = greens(&prop).residual_energy(&m);
        assert!(close(via_greens, 10.55 / 13.0, 1e-14));
    }

    #[test]
    fn effective_hamiltonian_limits() {
        let m = RingModel::new(7).unwrap();
        let hx = m.nambu_hx().assemble();
        let hz = m.nambu_hz().unwrap().assemble();
        let d = |a: &NambuMatrix, b: &DMatrix<C64>| crate::nambu::max_abs(&(a.assemble() - b));
        assert!(d(&effective_hamiltonian(&m, 0.3, 0.0).unwrap(), &hx) < 1e-15);
        assert!(d(&effective_hamiltonian(&m, 0.0, 0.3).unwrap(), &hz) < 1e-15);
        let half = crate::nambu::interpolate(&m, 0.5).unwrap().assemble();
        assert!(d(&effective_hamiltonian(&m, 0.2, 0.2).unwrap(), &half) < 1e-15);
        assert!(matches!(effective_hamiltonian(&m, 0.2, -0.2), Err(Error::DegenerateStep(_))));
    }

    #[test]
    fn overlap_basics() {
        let n = 7;
        let full = GaussianState::from(&BdGPropagator::fully_occupied(n));
        let empty = GaussianState { u: DMatrix::identity(n, n), v: DMatrix::zeros(n, n) };
        assert!(close(gaussian_overlap_sq(&full, &full), 1.0, 1e-15));
        assert!(gaussian_overlap_sq(&full, &empty) < 1e-15);
        let m = RingModel::new(n).unwrap();
        let s = Schedule::new(vec![0.5, 0.9], vec![0.3, 1.1]).unwrap();
        let psi = GaussianState::from(&propagate(&m, &s).unwrap());
        let gs = &sector_levels(&mix(&m, 0.7).unwrap(), 1).unwrap().states[0];
        let ab = gaussian_overlap_sq(&psi, gs);
        assert!(ab > 0.0 && ab <= 1.0 + 1e-12);
        assert!(close(ab, gaussian_overlap_sq(gs, &psi), 1e-12));
    }

    #[test]
    fn sector_levels_flip_above_crossing() {
        let m = RingModel::new(9).unwrap();
        let below = sector_levels(&mix(&m, 0.1).unwrap(), 3).unwrap();
        assert!(!below.flipped);
        let above = sector_levels(&mix(&m, 1.0).unwrap(), 3).unwrap();
        assert!(above.flipped);
        assert!(close(above.excitation_energies[1] - above.excitation_energies[0], m.final_gap(), 1e-12));
    }

    #[test]
    fn initial_row_is_ground_state() {
        let m = RingModel::new(9).unwrap();
        let trace = populations(&m, &crate::propagate::linear_schedule(4, 0.5).unwrap(), 5).unwrap();
        assert_eq!(trace.p_index, vec![0, 1, 2, 3, 4]);
        assert!(close(trace.pops[0][0], 1.0, 1e-12));
        for row in &trace.pops {
            assert!(row.iter().all(|p| *p >= -1e-12 && *p <= 1.0 + 1e-12));
            assert!(row.iter().sum::<f64>() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn degenerate_steps_are_skipped() {
        let m = RingModel::new(7).unwrap();
        let s = Schedule::new(vec![0.3, 0.4, 0.1], vec![0.2, -0.4, 0.5]).unwrap();
        let trace = populations(&m, &s, 3).unwrap();
        assert_eq!(trace.p_index, vec![0, 1, 3]);
        assert_eq!(trace.skipped, vec![2]);
    }
}
