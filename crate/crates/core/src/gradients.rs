//! Exact gradients of the residual energy with respect to every angle.
//!
//! The energy is a real quadratic form in `X_P = (U_P; V_P)`, so
//! `d eps = Re <Lambda_P, dX_P>` with a cotangent `Lambda_P` linear in `X_P`. Pulling
//! `Lambda` back through the steps (`Lambda_{p-1} = S_p^dag Lambda_p`) gives
//! every derivative from one forward and one backward sweep, each costing
//! `O(P N^2)` with the sparse step kernel.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::RingModel;
use crate::observables::{bond_excitations, residual_from_excitations};
use crate::propagate::{
    assemble_step_derivatives, from_quasi, step_unitary, to_quasi, BdGPropagator, RingDynamics,
    Schedule,
};
use crate::C64;

/// `d eps / d theta_x[p]` and `d eps / d theta_z[p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub d_theta_x: Vec<f64>,
    pub d_theta_z: Vec<f64>,
}

impl GradientVector {
    /// Splits a flat `[d_theta_x..., d_theta_z...]` vector.
    pub fn from_flat(flat: &[f64]) -> Self {
        let p = flat.len() / 2;
        Self { d_theta_x: flat[..p].to_vec(), d_theta_z: flat[p..].to_vec() }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.d_theta_x.clone();
        out.extend_from_slice(&self.d_theta_z);
        out
    }

    pub fn max_norm(&self) -> f64 {
        self.d_theta_x.iter().chain(&self.d_theta_z).fold(0.0, |m, g| m.max(g.abs()))
    }
}

impl RingDynamics {
    /// Residual energy of the flat parameter vector `[theta_x..., theta_z...]`.
    pub fn energy(&self, params: &[f64]) -> f64 {
        let p = params.len() / 2;
        let (u, v) = self.evolve(&params[..p], &params[p..]);
        let mut occ = vec![0.0; self.n()];
        bond_excitations(self.n(), &u, &v, &mut occ);
        residual_from_excitations(self.couplings(), &occ)
    }

    /// Residual energy and its gradient, written into `grad` with the same
    /// flat layout as `params`.
    pub fn energy_and_gradient(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        assert_eq!(params.len(), grad.len());
        assert!(params.len() % 2 == 0);
        let n = self.n();
        let nn = n * n;
        let depth = params.len() / 2;
        let (theta_x, theta_z) = params.split_at(depth);
        let (grad_x, grad_z) = grad.split_at_mut(depth);

        // forward sweep, keeping every intermediate state
        let mut us = vec![C64::from(0.0); nn * (depth + 1)];
        let mut vs = vec![C64::from(0.0); nn * (depth + 1)];
        for i in 0..n {
            vs[i * n + i] = C64::from(1.0);
        }
        for p in 0..depth {
            let (done_u, next_u) = us.split_at_mut((p + 1) * nn);
            let (done_v, next_v) = vs.split_at_mut((p + 1) * nn);
            next_u[..nn].copy_from_slice(&done_u[p * nn..]);
            next_v[..nn].copy_from_slice(&done_v[p * nn..]);
            self.apply_step(&mut next_u[..nn], &mut next_v[..nn], theta_x[p], theta_z[p]);
        }

        let j = self.couplings();
        let u_fin = &us[depth * nn..];
        let v_fin = &vs[depth * nn..];
        let mut occ = vec![0.0; n];
        bond_excitations(n, u_fin, v_fin, &mut occ);
        let energy = residual_from_excitations(j, &occ);

        // eps = (2/N) sum_j J_j sum_m |b_jm|^2 with (a; b) = W_z^dag X, so the
        // cotangent is W_z (0; (4/N) J b)
        let scale = 4.0 / n as f64;
        let mut lu = vec![C64::from(0.0); nn];
        let mut lv = vec![C64::from(0.0); nn];
        {
            let zero = vec![C64::from(0.0); n];
            let mut a = vec![C64::from(0.0); n];
            let mut b = vec![C64::from(0.0); n];
            for m in 0..n {
                let cols = m * n..(m + 1) * n;
                to_quasi(&u_fin[cols.clone()], &v_fin[cols.clone()], &mut a, &mut b);
                for r in 0..n {
                    b[r] *= scale * j[r];
                }
                from_quasi(&zero, &b, &mut lu[cols.clone()], &mut lv[cols]);
            }
        }

        // backward sweep
        let h = self.h();
        let mut d = vec![C64::from(0.0); n];
        let mut a = vec![C64::from(0.0); n];
        let mut b = vec![C64::from(0.0); n];
        let mut la = vec![C64::from(0.0); n];
        let mut lb = vec![C64::from(0.0); n];
        for p in (0..depth).rev() {
            let ph = self.fill_phases(theta_x[p], theta_z[p], &mut d);
            let u_after = &us[(p + 1) * nn..(p + 2) * nn];
            let v_after = &vs[(p + 1) * nn..(p + 2) * nn];
            let u_before = &us[p * nn..(p + 1) * nn];
            let v_before = &vs[p * nn..(p + 1) * nn];
            let mut gx = 0.0;
            let mut gz = 0.0;
            for m in 0..n {
                let cols = m * n..(m + 1) * n;
                let lu_c = &mut lu[cols.clone()];
                let lv_c = &mut lv[cols.clone()];
                for (l, x) in lu_c.iter().zip(&u_after[cols.clone()]) {
                    gx += (l.conj() * x).im;
                }
                for (l, x) in lv_c.iter().zip(&v_after[cols.clone()]) {
                    gx -= (l.conj() * x).im;
                }
                for k in 0..n {
                    lu_c[k] *= ph.x.conj();
                    lv_c[k] *= ph.x;
                }
                to_quasi(lu_c, lv_c, &mut la, &mut lb);
                to_quasi(&u_before[cols.clone()], &v_before[cols], &mut a, &mut b);
                for r in 0..n {
                    let ta = d[r] * a[r];
                    let tb = d[r].conj() * b[r];
                    gz += 2.0 * j[r] * ((la[r].conj() * ta).im - (lb[r].conj() * tb).im);
                    la[r] *= d[r].conj();
                    lb[r] *= d[r];
                }
                from_quasi(&la, &lb, lu_c, lv_c);
            }
            grad_x[p] = 2.0 * h * gx;
            grad_z[p] = gz;
        }
        energy
    }
}

/// Residual energy and its exact gradient.
pub fn energy_and_gradient(model: &RingModel, schedule: &Schedule) -> Result<(f64, GradientVector)> {
    let dynamics = RingDynamics::new(model)?;
    let params = schedule.to_params();
    let mut grad = vec![0.0; params.len()];
    let e = dynamics.energy_and_gradient(&params, &mut grad);
    Ok((e, GradientVector::from_flat(&grad)))
}

/// Same quantity through dense prefix and suffix products of the full
/// `2N x 2N` step unitaries, `O(P N^3)`. Kept as an independent reference.
pub fn energy_and_gradient_dense(model: &RingModel, schedule: &Schedule) -> Result<(f64, GradientVector)> {
    let n = model.n();
    let depth = schedule.depth();
    let steps: Vec<DMatrix<C64>> = schedule
        .theta_x()
        .iter()
        .zip(schedule.theta_z())
        .map(|(tx, tz)| step_unitary(model, *tx, *tz).map(|s| s.assemble()))
        .collect::<Result<_>>()?;
    let x0 = BdGPropagator::fully_occupied(n).unitary().columns(0, n).into_owned();
    let mut prefix = Vec::with_capacity(depth + 1);
    prefix.push(x0);
    for s in &steps {
        let next = s * prefix.last().unwrap();
        prefix.push(next);
    }
    let mut suffix = vec![DMatrix::<C64>::identity(2 * n, 2 * n); depth + 1];
    for p in (0..depth).rev() {
        suffix[p] = &suffix[p + 1] * &steps[p];
    }
    let fin = &prefix[depth];
    let eval = |x: &DMatrix<C64>| -> f64 {
        let prop = BdGPropagator {
            u: x.rows(0, n).into_owned(),
            v: x.rows(n, n).into_owned(),
            steps_applied: depth,
        };
        crate::observables::residual_energy(model, &prop)
    };
    let energy = eval(fin);
    // directional derivative of eps along dX_P, via the Green's functions
    let couplings = model.couplings();
    let jv = couplings.as_slice();
    let directional = |dx: &DMatrix<C64>| -> f64 {
        let u = fin.rows(0, n);
        let w = fin.rows(0, n) + fin.rows(n, n);
        let du = dx.rows(0, n);
        let dw = dx.rows(0, n) + dx.rows(n, n);
        let mut acc = 0.0;
        for r in 0..n {
            let k = (r + 1) % n;
            let mut s = C64::from(0.0);
            for m in 0..n {
                s += du[(r, m)] * w[(k, m)].conj() + u[(r, m)] * dw[(k, m)].conj();
            }
            acc += jv[r] * 2.0 * s.re;
        }
        acc / n as f64
    };
    let mut gx = vec![0.0; depth];
    let mut gz = vec![0.0; depth];
    for p in 0..depth {
        let (dsx, dsz) = assemble_step_derivatives(model, schedule.theta_x()[p], schedule.theta_z()[p])?;
        gx[p] = directional(&(&suffix[p + 1] * (dsx * &prefix[p])));
        gz[p] = directional(&(&suffix[p + 1] * (dsz * &prefix[p])));
    }
    Ok((energy, GradientVector { d_theta_x: gx, d_theta_z: gz }))
}

/// Largest deviation between the analytic gradient and central differences
/// with step `h_step`.
pub fn finite_difference_check(model: &RingModel, schedule: &Schedule, h_step: f64) -> Result<f64> {
    Ok(finite_difference_report(model, schedule, h_step)?.max_error)
}

/// Per-component comparison behind [`finite_difference_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDifferenceReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_error: f64,
}

pub fn finite_difference_report(
    model: &RingModel,
    schedule: &Schedule,
    h_step: f64,
) -> Result<FiniteDifferenceReport> {
    if !(1e-8..=1e-3).contains(&h_step) {
        return Err(Error::InvalidArgument(alloc::format!("h_step = {h_step} outside [1e-8, 1e-3]")));
    }
    let dynamics = RingDynamics::new(model)?;
    let mut params = schedule.to_params();
    let mut analytic = vec![0.0; params.len()];
    dynamics.energy_and_gradient(&params, &mut analytic);
    let mut numeric = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + h_step;
        let up = dynamics.energy(&params);
        params[i] = orig - h_step;
        let down = dynamics.energy(&params);
        params[i] = orig;
        numeric.push((up - down) / (2.0 * h_step));
    }
    let max_error = analytic.iter().zip(&numeric).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()));
    Ok(FiniteDifferenceReport { analytic, numeric, max_error })
}
