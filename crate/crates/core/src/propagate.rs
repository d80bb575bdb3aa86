//! Digitized dynamics `e^{-i theta_x H_x} e^{-i theta_z H_z}` applied to the
//! Bogoliubov transformation of the evolving state.
//!
//! `H_z` is diagonal in the closed-form quasiparticles
//! `g_j = (c_{j+1}^dag + c_j^dag + c_{j+1} - c_j) / 2` with energies `J_j`,
//! and `H_x` is diagonal in the bare fermions, so one step is a sparse basis
//! change, a diagonal phase, the inverse basis change and another diagonal
//! phase: `O(N^2)` work per step on the `2N x N` block `(U; V)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::RingModel;
use crate::nambu::{assemble_bogoliubov, max_abs};
use crate::C64;

/// Drift of `W^dag W` above which the propagator is re-unitarized.
pub const REORTHONORMALIZE_THRESHOLD: f64 = 1e-9;

/// Degenerate-step tolerance on `|theta_x + theta_z|`.
pub const DEGENERATE_STEP_TOL: f64 = 1e-12;

/// Angles of a depth-`P` alternating circuit; step `p` applies
/// `e^{-i theta_x[p] H_x} e^{-i theta_z[p] H_z}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    theta_x: Vec<f64>,
    theta_z: Vec<f64>,
}

impl Schedule {
    pub fn new(theta_x: Vec<f64>, theta_z: Vec<f64>) -> Result<Self> {
        if theta_x.len() != theta_z.len() {
            return Err(Error::InvalidSchedule(format!(
                "theta_x has {} entries, theta_z has {}",
                theta_x.len(),
                theta_z.len()
            )));
        }
        if theta_x.is_empty() {
            return Err(Error::InvalidSchedule("depth must be at least 1".into()));
        }
        if theta_x.iter().chain(&theta_z).any(|t| !t.is_finite()) {
            return Err(Error::InvalidSchedule("angles must be finite".into()));
        }
        Ok(Self { theta_x, theta_z })
    }

    pub fn zeros(depth: usize) -> Result<Self> {
        Self::new(vec![0.0; depth], vec![0.0; depth])
    }

    /// Splits a flat `[theta_x..., theta_z...]` parameter vector.
    pub fn from_params(params: &[f64]) -> Result<Self> {
        if params.len() % 2 != 0 {
            return Err(Error::InvalidSchedule("odd parameter count".into()));
        }
        let p = params.len() / 2;
        Self::new(params[..p].to_vec(), params[p..].to_vec())
    }

    pub fn to_params(&self) -> Vec<f64> {
        let mut out = self.theta_x.clone();
        out.extend_from_slice(&self.theta_z);
        out
    }

    pub fn depth(&self) -> usize {
        self.theta_x.len()
    }
    pub fn theta_x(&self) -> &[f64] {
        &self.theta_x
    }
    pub fn theta_z(&self) -> &[f64] {
        &self.theta_z
    }

    /// Step durations `theta_x + theta_z`.
    pub fn deltas(&self) -> Vec<f64> {
        self.theta_x.iter().zip(&self.theta_z).map(|(x, z)| x + z).collect()
    }

    /// `s_p = theta_z / (theta_x + theta_z)`, `None` on degenerate steps.
    pub fn s_values(&self) -> Vec<Option<f64>> {
        self.theta_x
            .iter()
            .zip(&self.theta_z)
            .map(|(x, z)| {
                let d = x + z;
                (d.abs() > DEGENERATE_STEP_TOL).then(|| z / d)
            })
            .collect()
    }

    /// Signed total time `sum (theta_x + theta_z)`.
    pub fn tau_signed(&self) -> f64 {
        self.deltas().iter().sum()
    }

    /// `sum (|theta_x| + |theta_z|)`.
    pub fn tau_abs(&self) -> f64 {
        self.theta_x.iter().chain(&self.theta_z).map(|t| t.abs()).sum()
    }

    pub fn concat(&self, other: &Schedule) -> Schedule {
        let mut theta_x = self.theta_x.clone();
        theta_x.extend_from_slice(&other.theta_x);
        let mut theta_z = self.theta_z.clone();
        theta_z.extend_from_slice(&other.theta_z);
        Schedule { theta_x, theta_z }
    }
}

/// Digitized linear ramp on the midpoint grid `t_p = (p - 1/2) dt`.
pub fn linear_schedule(depth: usize, dt: f64) -> Result<Schedule> {
    if depth == 0 {
        return Err(Error::InvalidSchedule("depth must be at least 1".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    let (theta_x, theta_z) = (1..=depth)
        .map(|p| {
            let frac = (p as f64 - 0.5) / depth as f64;
            (dt * (1.0 - frac), dt * frac)
        })
        .unzip();
    Schedule::new(theta_x, theta_z)
}

/// Closed-form blocks `(U_z, V_z)` of the transformation diagonalizing `H_z`
/// in the odd sector; column `j` is the quasiparticle of bond `j`.
pub fn uz_blocks(model: &RingModel) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    model.require_odd_sector()?;
    let n = model.n();
    let mut uz = DMatrix::zeros(n, n);
    let mut vz = DMatrix::zeros(n, n);
    for j in 0..n {
        let k = (j + 1) % n;
        uz[(j, j)] = -0.5;
        uz[(k, j)] = 0.5;
        vz[(j, j)] = 0.5;
        vz[(k, j)] = 0.5;
    }
    Ok((uz, vz))
}

/// Dense blocks of one step unitary `[[U, V*], [V, U*]]`.
#[derive(Debug, Clone)]
pub struct StepUnitary {
    pub u_blk: DMatrix<C64>,
    pub v_blk: DMatrix<C64>,
}

impl StepUnitary {
    pub fn assemble(&self) -> DMatrix<C64> {
        assemble_bogoliubov(&self.u_blk, &self.v_blk)
    }

    /// Left-multiplies the propagator by this step with two block products
    /// per output block.
    pub fn apply(&self, prop: &mut BdGPropagator) {
        let u = &self.u_blk * &prop.u + self.v_blk.conjugate() * &prop.v;
        let v = &self.v_blk * &prop.u + self.u_blk.conjugate() * &prop.v;
        prop.u = u;
        prop.v = v;
        prop.steps_applied += 1;
    }
}

/// Dense step blocks
/// `U = e^{-2i theta_x h} (U_z D U_z^dag + V_z* D* V_z^T)`,
/// `V = e^{+2i theta_x h} (V_z D U_z^dag + U_z* D* V_z^T)`,
/// `D = diag(e^{-2i theta_z J_j})`.
pub fn step_unitary(model: &RingModel, theta_x: f64, theta_z: f64) -> Result<StepUnitary> {
    let (uz, vz) = uz_blocks(model)?;
    let uz = uz.map(C64::from);
    let vz = vz.map(C64::from);
    let couplings = model.couplings();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        model.n(),
        couplings.as_slice().iter().map(|j| C64::from_polar(1.0, -2.0 * theta_z * j)),
    ));
    let dc = d.conjugate();
    let phase = C64::from_polar(1.0, -2.0 * theta_x * model.h());
    let u_blk = (&uz * &d * uz.adjoint() + vz.conjugate() * &dc * vz.transpose()) * phase;
    let v_blk = (&vz * &d * uz.adjoint() + uz.conjugate() * &dc * vz.transpose()) * phase.conj();
    Ok(StepUnitary { u_blk, v_blk })
}

/// Derivatives of the full step unitary with respect to `theta_x` and
/// `theta_z`: `diag(-2ih, 2ih) S` and `Phi W_z dD W_z^dag` with
/// `dD = diag(-2i J D, 2i J D*)`.
pub fn assemble_step_derivatives(
    model: &RingModel,
    theta_x: f64,
    theta_z: f64,
) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let n = model.n();
    let step = step_unitary(model, theta_x, theta_z)?.assemble();
    let h = model.h();
    let mut dx = step.clone();
    for r in 0..2 * n {
        let f = if r < n { C64::new(0.0, -2.0 * h) } else { C64::new(0.0, 2.0 * h) };
        for c in 0..2 * n {
            dx[(r, c)] *= f;
        }
    }
    let (uz, vz) = uz_blocks(model)?;
    let wz = assemble_bogoliubov(&uz.map(C64::from), &vz.map(C64::from));
    let couplings = model.couplings();
    let mut dd = DMatrix::<C64>::zeros(2 * n, 2 * n);
    for (i, j) in couplings.as_slice().iter().enumerate() {
        let d = C64::from_polar(1.0, -2.0 * theta_z * j);
        dd[(i, i)] = C64::new(0.0, -2.0 * j) * d;
        dd[(i + n, i + n)] = C64::new(0.0, 2.0 * j) * d.conj();
    }
    let phase = C64::from_polar(1.0, -2.0 * theta_x * h);
    let mut dz = &wz * dd * wz.adjoint();
    for r in 0..2 * n {
        let f = if r < n { phase } else { phase.conj() };
        for c in 0..2 * n {
            dz[(r, c)] *= f;
        }
    }
    Ok((dx, dz))
}

/// The first block column `(U; V)` of the accumulated BdG unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct BdGPropagator {
    pub u: DMatrix<C64>,
    pub v: DMatrix<C64>,
    pub steps_applied: usize,
}

impl BdGPropagator {
    /// The fully occupied state: `W_0 = [[0, 1], [1, 0]]`.
    pub fn fully_occupied(n: usize) -> Self {
        Self { u: DMatrix::zeros(n, n), v: DMatrix::identity(n, n), steps_applied: 0 }
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn unitary(&self) -> DMatrix<C64> {
        assemble_bogoliubov(&self.u, &self.v)
    }

    /// `max(|U^dag U + V^dag V - 1|, |U^T V + V^T U|)`, the entries of
    /// `W^dag W - 1`.
    pub fn unitarity_drift(&self) -> f64 {
        let n = self.n();
        let mut gram = self.u.adjoint() * &self.u + self.v.adjoint() * &self.v;
        for i in 0..n {
            gram[(i, i)] -= C64::from(1.0);
        }
        let cross = self.u.transpose() * &self.v + self.v.transpose() * &self.u;
        max_abs(&gram).max(max_abs(&cross))
    }

    /// Restores exact unitarity with the polar factor `W (W^dag W)^{-1/2}`,
    /// which keeps the particle-hole block structure.
    pub fn reorthonormalize(&mut self) -> Result<()> {
        let n = self.n();
        let w = self.unitary();
        let gram = w.adjoint() * &w;
        let eig = SymmetricEigen::try_new(gram, f64::EPSILON, 10_000)
            .ok_or(Error::EigensolverFailure)?;
        let inv_sqrt = eig.eigenvalues.map(|l| C64::from(1.0 / l.sqrt()));
        let root = &eig.eigenvectors
            * DMatrix::from_diagonal(&inv_sqrt)
            * eig.eigenvectors.adjoint();
        let fixed = w * root;
        self.u = fixed.view((0, 0), (n, n)).into_owned();
        self.v = fixed.view((n, 0), (n, n)).into_owned();
        Ok(())
    }
}

/// Precomputed data for the sparse step kernel.
#[derive(Debug, Clone)]
pub struct RingDynamics {
    n: usize,
    couplings: Vec<f64>,
    h: f64,
}

/// Per-step phases.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepPhases {
    /// `e^{-2i theta_x h}`, applied to the particle rows.
    pub x: C64,
}

impl RingDynamics {
    pub fn new(model: &RingModel) -> Result<Self> {
        model.require_odd_sector()?;
        Ok(Self { n: model.n(), couplings: model.couplings().as_slice().to_vec(), h: model.h() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub(crate) fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub(crate) fn h(&self) -> f64 {
        self.h
    }

    pub(crate) fn fill_phases(&self, theta_x: f64, theta_z: f64, d: &mut [C64]) -> StepPhases {
        for (dj, j) in d.iter_mut().zip(&self.couplings) {
            *dj = C64::from_polar(1.0, -2.0 * theta_z * j);
        }
        StepPhases { x: C64::from_polar(1.0, -2.0 * theta_x * self.h) }
    }

    /// Applies one step to `(u; v)` stored column-major (`n x n` each).
    pub fn apply_step(&self, u: &mut [C64], v: &mut [C64], theta_x: f64, theta_z: f64) {
        let n = self.n;
        let mut d = vec![C64::from(0.0); n];
        let mut a = vec![C64::from(0.0); n];
        let mut b = vec![C64::from(0.0); n];
        let ph = self.fill_phases(theta_x, theta_z, &mut d);
        for col in 0..n {
            let uc = &mut u[col * n..(col + 1) * n];
            let vc = &mut v[col * n..(col + 1) * n];
            to_quasi(uc, vc, &mut a, &mut b);
            for j in 0..n {
                a[j] *= d[j];
                b[j] *= d[j].conj();
            }
            from_quasi(&a, &b, uc, vc);
            for k in 0..n {
                uc[k] *= ph.x;
                vc[k] *= ph.x.conj();
            }
        }
    }

    /// Runs the whole schedule from the fully occupied state, without any
    /// drift bookkeeping. Returns `(U, V)` column-major.
    pub fn evolve(&self, theta_x: &[f64], theta_z: &[f64]) -> (Vec<C64>, Vec<C64>) {
        let n = self.n;
        let mut u = vec![C64::from(0.0); n * n];
        let mut v = vec![C64::from(0.0); n * n];
        for i in 0..n {
            v[i * n + i] = C64::from(1.0);
        }
        for (tx, tz) in theta_x.iter().zip(theta_z) {
            self.apply_step(&mut u, &mut v, *tx, *tz);
        }
        (u, v)
    }
}

/// `(a; b) = W_z^dag (u; v)` for one column.
#[inline]
pub(crate) fn to_quasi(u: &[C64], v: &[C64], a: &mut [C64], b: &mut [C64]) {
    let n = u.len();
    for j in 0..n {
        let k = if j + 1 == n { 0 } else { j + 1 };
        a[j] = (-u[j] + u[k] + v[j] + v[k]) * 0.5;
        b[j] = (u[j] + u[k] - v[j] + v[k]) * 0.5;
    }
}

/// `(u; v) = W_z (a; b)` for one column.
#[inline]
pub(crate) fn from_quasi(a: &[C64], b: &[C64], u: &mut [C64], v: &mut [C64]) {
    let n = a.len();
    for k in 0..n {
        let j = if k == 0 { n - 1 } else { k - 1 };
        u[k] = (-a[k] + a[j] + b[k] + b[j]) * 0.5;
        v[k] = (a[k] + a[j] - b[k] + b[j]) * 0.5;
    }
}

/// Propagates the fully occupied state through `schedule`, checking
/// unitarity after every step and re-unitarizing (with a warning) whenever
/// the drift exceeds [`REORTHONORMALIZE_THRESHOLD`].
pub fn propagate(model: &RingModel, schedule: &Schedule) -> Result<BdGPropagator> {
    let dynamics = RingDynamics::new(model)?;
    let mut prop = BdGPropagator::fully_occupied(model.n());
    for (tx, tz) in schedule.theta_x().iter().zip(schedule.theta_z()) {
        advance(&dynamics, &mut prop, *tx, *tz)?;
    }
    Ok(prop)
}

/// Applies one step to an existing propagator with the drift check.
pub fn advance(
    dynamics: &RingDynamics,
    prop: &mut BdGPropagator,
    theta_x: f64,
    theta_z: f64,
) -> Result<()> {
    dynamics.apply_step(prop.u.as_mut_slice(), prop.v.as_mut_slice(), theta_x, theta_z);
    prop.steps_applied += 1;
    let drift = prop.unitarity_drift();
    if drift > REORTHONORMALIZE_THRESHOLD {
        log::warn!(
            "unitarity drift {drift:e} after step {}; re-orthonormalizing",
            prop.steps_applied
        );
        prop.reorthonormalize()?;
    }
    Ok(())
}
