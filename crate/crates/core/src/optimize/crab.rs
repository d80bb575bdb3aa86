//! Dressed CRAB over digitized schedules.
//!
//! Angles are a linear function of the coefficients:
//! `theta_x[p] = C0x base_x[p] + (1 - t_p/tau) sum_n Cx_n sin(omega_n t_p)` and
//! `theta_z[p] = C0z base_z[p] + (t_p/tau) sum_n Cz_n sin(omega_n t_p)`, with
//! `t_p/tau = (p - 1/2)/P`. The frequencies are drawn from a Gamma law and
//! kept fixed; each super-iteration freezes the previous optimum as the new
//! base and draws fresh frequencies.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::RangeInclusive;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::bfgs::{bfgs_minimize, BfgsSettings};
use super::{task_rng, Executor, OptimizationResult};
use crate::error::{Error, Result};
use crate::model::RingModel;
use crate::propagate::{linear_schedule, RingDynamics, Schedule};

/// Gamma law with shape `alpha` and scale `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSpec {
    pub alpha: f64,
    pub beta: f64,
}

impl GammaSpec {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Gamma parameters must be positive, got alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// `(alpha - 1) beta`, the peak of the density for `alpha > 1`.
    pub fn mode(&self) -> f64 {
        ((self.alpha - 1.0) * self.beta).max(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.alpha * self.beta
    }
}

/// Frequency law of the first super-iteration, peaked at `x = 2`.
pub const FIRST_GAMMA: GammaSpec = GammaSpec { alpha: 1.5, beta: 4.0 };
/// Frequency law of the second super-iteration, peaked at `x = 10`.
pub const SECOND_GAMMA: GammaSpec = GammaSpec { alpha: 1.5, beta: 20.0 };

/// Draws `x ~ Gamma(alpha, beta)` and returns `omega = x pi / tau_ref`.
pub fn sample_frequencies<R: Rng + ?Sized>(
    spec: &GammaSpec,
    n_c: usize,
    tau_ref: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(tau_ref > 0.0 && tau_ref.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau_ref = {tau_ref} must be positive")));
    }
    let law = Gamma::new(spec.alpha, spec.beta)
        .map_err(|e| Error::InvalidArgument(format!("Gamma law: {e}")))?;
    // a zero draw would give a dead mode; redraw (probability zero in exact arithmetic)
    Ok((0..n_c)
        .map(|_| loop {
            let x: f64 = law.sample(rng);
            if x > 0.0 {
                break x * PI / tau_ref;
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrabParams {
    pub c0_x: f64,
    pub c0_z: f64,
    pub c_x: Vec<f64>,
    pub c_z: Vec<f64>,
    /// Angular frequencies, fixed during the optimization.
    pub omega: Vec<f64>,
    pub n_c: usize,
    pub super_iteration: usize,
}

impl CrabParams {
    /// `C0 = 1`, all mode amplitudes zero: reproduces the base schedule.
    pub fn identity(omega: Vec<f64>, super_iteration: usize) -> Self {
        let n_c = omega.len();
        Self { c0_x: 1.0, c0_z: 1.0, c_x: vec![0.0; n_c], c_z: vec![0.0; n_c], omega, n_c, super_iteration }
    }

    /// Flat layout `[C0x, Cx_1..Cx_Nc, C0z, Cz_1..Cz_Nc]`.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.n_c + 2);
        out.push(self.c0_x);
        out.extend_from_slice(&self.c_x);
        out.push(self.c0_z);
        out.extend_from_slice(&self.c_z);
        out
    }

    pub fn with_coefficients(&self, coeffs: &[f64]) -> Result<Self> {
        let k = self.n_c;
        if coeffs.len() != 2 * k + 2 {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for N_c = {k}",
                coeffs.len()
            )));
        }
        Ok(Self {
            c0_x: coeffs[0],
            c_x: coeffs[1..=k].to_vec(),
            c0_z: coeffs[k + 1],
            c_z: coeffs[k + 2..].to_vec(),
            ..self.clone()
        })
    }

    fn validate(&self) -> Result<()> {
        if self.c_x.len() != self.n_c || self.c_z.len() != self.n_c || self.omega.len() != self.n_c {
            return Err(Error::DimensionMismatch(format!(
                "N_c = {} but {} / {} amplitudes and {} frequencies",
                self.n_c,
                self.c_x.len(),
                self.c_z.len(),
                self.omega.len()
            )));
        }
        Ok(())
    }
}

/// The constant Jacobian `d theta / d C` of the CRAB map for one base
/// schedule and frequency set. Rows follow the flat angle layout
/// `[theta_x..., theta_z...]`, columns the coefficient layout of
/// [`CrabParams::coefficients`].
#[derive(Debug, Clone, PartialEq)]
pub struct CrabMap {
    depth: usize,
    n_c: usize,
    /// Row-major `2P x (2 N_c + 2)`.
    jac: Vec<f64>,
}

impl CrabMap {
    /// `tau` is the reference duration that sets `t_p = (p - 1/2) tau / P`.
    pub fn new(base: &Schedule, omega: &[f64], tau: f64) -> Self {
        let depth = base.depth();
        let n_c = omega.len();
        let cols = 2 * n_c + 2;
        let mut jac = vec![0.0; 2 * depth * cols];
        for p in 0..depth {
            let frac = (p as f64 + 0.5) / depth as f64;
            let t = frac * tau;
            let rx = p * cols;
            let rz = (depth + p) * cols;
            jac[rx] = base.theta_x()[p];
            jac[rz + n_c + 1] = base.theta_z()[p];
            for (k, w) in omega.iter().enumerate() {
                let wave = (w * t).sin();
                jac[rx + 1 + k] = (1.0 - frac) * wave;
                jac[rz + n_c + 2 + k] = frac * wave;
            }
        }
        Self { depth, n_c, jac }
    }

    pub fn n_coefficients(&self) -> usize {
        2 * self.n_c + 2
    }

    /// `theta = J c`.
    pub fn angles(&self, coeffs: &[f64], out: &mut [f64]) {
        let cols = self.n_coefficients();
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.jac[r * cols..(r + 1) * cols].iter().zip(coeffs).map(|(a, b)| a * b).sum();
        }
    }

    /// `J^T g`.
    pub fn pull_back(&self, grad_theta: &[f64], out: &mut [f64]) {
        let cols = self.n_coefficients();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, g) in grad_theta.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(&self.jac[r * cols..(r + 1) * cols]) {
                *o += a * g;
            }
        }
    }

    pub fn schedule(&self, coeffs: &[f64]) -> Result<Schedule> {
        let mut theta = vec![0.0; 2 * self.depth];
        self.angles(coeffs, &mut theta);
        Schedule::from_params(&theta)
    }
}

/// Angles of the CRAB Ansatz for `params` over `base`, with `tau = P dt`
/// implied by the frequencies' reference time `tau_ref`.
pub fn crab_schedule(params: &CrabParams, base: &Schedule, tau_ref: f64) -> Result<Schedule> {
    params.validate()?;
    CrabMap::new(base, &params.omega, tau_ref).schedule(&params.coefficients())
}

/// Residual energy and its gradient with respect to the CRAB coefficients,
/// `J^T (d eps / d theta)`.
pub fn crab_gradient(
    model: &RingModel,
    params: &CrabParams,
    base: &Schedule,
    tau_ref: f64,
) -> Result<(f64, Vec<f64>)> {
    params.validate()?;
    let dynamics = RingDynamics::new(model)?;
    let map = CrabMap::new(base, &params.omega, tau_ref);
    let mut theta = vec![0.0; 2 * base.depth()];
    let mut g_theta = vec![0.0; 2 * base.depth()];
    let mut g = vec![0.0; map.n_coefficients()];
    map.angles(&params.coefficients(), &mut theta);
    let e = dynamics.energy_and_gradient(&theta, &mut g_theta);
    map.pull_back(&g_theta, &mut g);
    Ok((e, g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrabSettings {
    pub bfgs: BfgsSettings,
    /// Independent frequency draws; the best one is kept.
    pub draws: usize,
    pub super_iterations: usize,
    /// Step of the linear base schedule.
    pub dt: f64,
    /// Frequency law per super-iteration; the last entry repeats.
    pub gammas: Vec<GammaSpec>,
    /// Number of Fourier modes; `None` means `N_c = P`.
    pub n_c: Option<usize>,
    /// Stop a draw as soon as its energy falls below this value, and skip
    /// the remaining draws.
    pub stop_below: Option<f64>,
}

impl Default for CrabSettings {
    fn default() -> Self {
        Self {
            bfgs: BfgsSettings::default(),
            draws: 10,
            super_iterations: 2,
            dt: 0.5,
            gammas: vec![FIRST_GAMMA, SECOND_GAMMA],
            n_c: None,
            stop_below: None,
        }
    }
}

/// Outcome of one frequency draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawOutcome {
    pub draw: usize,
    pub energy: f64,
    /// Energy after each super-iteration.
    pub stage_energies: Vec<f64>,
    pub params: Vec<CrabParams>,
    pub schedule: Schedule,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrabResult {
    pub best: OptimizationResult,
    pub best_draw: usize,
    pub draws: Vec<DrawOutcome>,
}

fn run_draw(
    dynamics: &RingDynamics,
    p_depth: usize,
    seed: u64,
    draw: usize,
    settings: &CrabSettings,
) -> Result<DrawOutcome> {
    let mut rng = task_rng(seed, draw);
    let tau = p_depth as f64 * settings.dt;
    let n_c = settings.n_c.unwrap_or(p_depth);
    let mut base = linear_schedule(p_depth, settings.dt)?;
    let mut bfgs = settings.bfgs;
    if let Some(t) = settings.stop_below {
        bfgs.target = Some(bfgs.target.map_or(t, |x| x.max(t)));
    }
    let mut out = DrawOutcome {
        draw,
        energy: f64::INFINITY,
        stage_energies: Vec::new(),
        params: Vec::new(),
        schedule: base.clone(),
        iterations: 0,
        grad_norm: f64::NAN,
        converged: false,
    };
    for stage in 0..settings.super_iterations {
        let spec = settings.gammas[stage.min(settings.gammas.len() - 1)];
        let omega = sample_frequencies(&spec, n_c, tau, &mut rng)?;
        let start = CrabParams::identity(omega, stage + 1);
        let map = CrabMap::new(&base, &start.omega, tau);
        let mut theta = vec![0.0; 2 * p_depth];
        let mut g_theta = vec![0.0; 2 * p_depth];
        let result = bfgs_minimize(
            |c, g| {
                map.angles(c, &mut theta);
                let e = dynamics.energy_and_gradient(&theta, &mut g_theta);
                map.pull_back(&g_theta, g);
                e
            },
            &start.coefficients(),
            &bfgs,
        );
        out.iterations += result.iterations;
        out.grad_norm = result.grad_norm;
        out.converged = result.converged();
        out.energy = result.f;
        out.stage_energies.push(result.f);
        base = map.schedule(&result.x)?;
        out.params.push(start.with_coefficients(&result.x)?);
        log::debug!("draw {draw}, super-iteration {}: eps = {:e}", stage + 1, result.f);
        if settings.stop_below.is_some_and(|t| result.f <= t) {
            break;
        }
    }
    out.schedule = base;
    Ok(out)
}

/// Dressed CRAB with `settings.super_iterations` super-iterations from the
/// linear schedule, best of `settings.draws` frequency draws.
pub fn dqa_crab<E: Executor>(
    model: &RingModel,
    p_depth: usize,
    seed: u64,
    settings: &CrabSettings,
    exec: &E,
) -> Result<CrabResult> {
    if p_depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    if settings.draws == 0 || settings.super_iterations == 0 || settings.gammas.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one draw, one super-iteration and one Gamma law".into(),
        ));
    }
    let dynamics = RingDynamics::new(model)?;
    let draws: Vec<DrawOutcome> = if settings.stop_below.is_some() {
        // sequential so that later draws can be skipped
        let mut done = Vec::new();
        for d in 0..settings.draws {
            let o = run_draw(&dynamics, p_depth, seed, d, settings)?;
            let stop = settings.stop_below.is_some_and(|t| o.energy <= t);
            done.push(o);
            if stop {
                break;
            }
        }
        done
    } else {
        exec.map(settings.draws, |d| run_draw(&dynamics, p_depth, seed, d, settings))
            .into_iter()
            .collect::<Result<_>>()?
    };
    let best = draws
        .iter()
        .min_by(|a, b| a.energy.total_cmp(&b.energy))
        .expect("at least one draw");
    log::info!("dQA-CRAB N = {}, P = {p_depth}: best eps = {:e}", model.n(), best.energy);
    Ok(CrabResult {
        best: OptimizationResult::new(
            best.schedule.clone(),
            best.energy,
            best.iterations,
            best.grad_norm,
            best.converged,
            seed,
        ),
        best_draw: best.draw,
        draws,
    })
}

/// How [`threshold_time`] walks the depth range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthSearch {
    /// Every depth from the bottom of the range upward.
    Linear,
    /// Bisection, assuming success is monotone in `P`.
    Bisect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub p_min: usize,
    /// `sum (theta_x + theta_z)` of the optimized schedule at `p_min`.
    pub tau: f64,
    pub tau_abs: f64,
    /// Target residual energy `c 2 (J_w - J_f) / N`.
    pub target: f64,
    pub result: CrabResult,
    /// `(P, eps)` for every depth tried; `eps` may be an early-exit value.
    pub tried: Vec<(usize, f64)>,
}

/// Smallest depth at which dQA-CRAB meets `E_P - E_gs <= c 2 (J_w - J_f)`.
///
/// Depths are screened with early exits (a draw stops once it crosses the
/// target); the reported schedule at `p_min` comes from a full optimization.
pub fn threshold_time<E: Executor>(
    model: &RingModel,
    c: f64,
    p_search: RangeInclusive<usize>,
    search: DepthSearch,
    seed: u64,
    settings: &CrabSettings,
    exec: &E,
) -> Result<ThresholdResult> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("c = {c} must be positive")));
    }
    let (lo, hi) = (*p_search.start(), *p_search.end());
    if lo == 0 || lo > hi {
        return Err(Error::InvalidArgument(format!("bad depth range {lo}..={hi}")));
    }
    let target = c * model.final_gap() / model.n() as f64;
    let screen = CrabSettings { stop_below: Some(target), ..settings.clone() };
    let mut tried = Vec::new();
    let passes = |p: usize, tried: &mut Vec<(usize, f64)>| -> Result<bool> {
        let r = dqa_crab(model, p, seed, &screen, exec)?;
        tried.push((p, r.best.energy));
        Ok(r.best.energy <= target)
    };
    let p_min = match search {
        DepthSearch::Linear => {
            let mut found = None;
            for p in lo..=hi {
                if passes(p, &mut tried)? {
                    found = Some(p);
                    break;
                }
            }
            found
        }
        DepthSearch::Bisect => {
            if !passes(hi, &mut tried)? {
                None
            } else if passes(lo, &mut tried)? {
                Some(lo)
            } else {
                let (mut bad, mut good) = (lo, hi);
                while good - bad > 1 {
                    let mid = bad + (good - bad) / 2;
                    if passes(mid, &mut tried)? {
                        good = mid;
                    } else {
                        bad = mid;
                    }
                }
                Some(good)
            }
        }
    };
    let p_min = p_min.ok_or_else(|| {
        Error::NotFound(format!("threshold c = {c} not reached for P in {lo}..={hi}"))
    })?;
    let result = dqa_crab(model, p_min, seed, settings, exec)?;
    Ok(ThresholdResult {
        p_min,
        tau: result.best.tau_signed,
        tau_abs: result.best.tau_abs,
        target,
        result,
        tried,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::Sequential;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gamma_modes() {
        assert!((FIRST_GAMMA.mode() - 2.0).abs() < 1e-15);
        assert!((SECOND_GAMMA.mode() - 10.0).abs() < 1e-15);
        assert!(GammaSpec::new(0.0, 1.0).is_err());
    }

    #[test]
    fn gamma_sample_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = sample_frequencies(&FIRST_GAMMA, 100_000, PI, &mut rng).unwrap();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        assert!((mean - 6.0).abs() < 0.12, "{mean}");
        assert!(w.iter().all(|x| *x > 0.0));
    }

    #[test]
    fn identity_coefficients_reproduce_base() {
        let base = linear_schedule(7, 0.5).unwrap();
        let params = CrabParams::identity(vec![1.0, 2.5, 0.3, 4.0, 7.0, 1.1, 0.2], 1);
        let s = crab_schedule(&params, &base, 3.5).unwrap();
        assert_eq!(s, base);
        let zero = params.with_coefficients(&[0.0; 16]).unwrap();
        assert_eq!(crab_schedule(&zero, &base, 3.5).unwrap(), Schedule::zeros(7).unwrap());
    }

    #[test]
    fn single_mode_perturbation() {
        let base = linear_schedule(6, 0.5).unwrap();
        let omega = vec![0.7, 1.9, 2.2, 0.4, 3.3, 5.0];
        let mut params = CrabParams::identity(omega.clone(), 1);
        let eps = 1e-3;
        params.c_z[2] = eps;
        let s = crab_schedule(&params, &base, 3.0).unwrap();
        for p in 0..6 {
            let frac = (p as f64 + 0.5) / 6.0;
            let expect = base.theta_z()[p] + eps * frac * (omega[2] * frac * 3.0).sin();
            assert!((s.theta_z()[p] - expect).abs() < 1e-15);
            assert_eq!(s.theta_x()[p], base.theta_x()[p]);
        }
    }

    #[test]
    fn coefficient_gradient_matches_differences() {
        let m = RingModel::new(9).unwrap();
        let base = linear_schedule(5, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let omega = sample_frequencies(&FIRST_GAMMA, 5, 2.5, &mut rng).unwrap();
        let coeffs: Vec<f64> = (0..12).map(|_| rng.random_range(-0.5..1.5)).collect();
        let params = CrabParams::identity(omega, 1).with_coefficients(&coeffs).unwrap();
        let (_, g) = crab_gradient(&m, &params, &base, 2.5).unwrap();
        let h = 1e-6;
        for i in 0..coeffs.len() {
            let mut up = coeffs.clone();
            up[i] += h;
            let mut down = coeffs.clone();
            down[i] -= h;
            let eu = crab_gradient(&m, &params.with_coefficients(&up).unwrap(), &base, 2.5).unwrap().0;
            let ed = crab_gradient(&m, &params.with_coefficients(&down).unwrap(), &base, 2.5).unwrap().0;
            assert!((g[i] - (eu - ed) / (2.0 * h)).abs() < 1e-6);
        }
    }

    #[test]
    fn gradient_at_origin_is_chain_rule() {
        let m = RingModel::new(7).unwrap();
        let base = linear_schedule(4, 0.5).unwrap();
        let params = CrabParams::identity(vec![1.0, 2.0, 3.0, 4.0], 1).with_coefficients(&[0.0; 10]).unwrap();
        let (_, g) = crab_gradient(&m, &params, &base, 2.0).unwrap();
        let (_, gt) = crate::gradients::energy_and_gradient(&m, &Schedule::zeros(4).unwrap()).unwrap();
        let expect: f64 = base.theta_x().iter().zip(&gt.d_theta_x).map(|(a, b)| a * b).sum();
        assert!((g[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn dimension_checks() {
        let m = RingModel::new(5).unwrap();
        let base = linear_schedule(3, 0.5).unwrap();
        let mut params = CrabParams::identity(vec![1.0, 2.0], 1);
        params.c_x.push(0.0);
        assert!(matches!(crab_gradient(&m, &params, &base, 1.5), Err(Error::DimensionMismatch(_))));
        assert!(CrabParams::identity(vec![1.0], 1).with_coefficients(&[1.0]).is_err());
    }

    #[test]
    fn small_crab_run_improves_on_linear() {
        let m = RingModel::new(7).unwrap();
        let settings = CrabSettings { draws: 2, ..Default::default() };
        let r = dqa_crab(&m, 6, 5, &settings, &Sequential).unwrap();
        let linear = RingDynamics::new(&m).unwrap().energy(&linear_schedule(6, 0.5).unwrap().to_params());
        assert!(r.best.energy < linear);
        assert_eq!(r.draws.len(), 2);
        for d in &r.draws {
            assert!(d.stage_energies[1] <= d.stage_energies[0] + 1e-15);
        }
        let again = dqa_crab(&m, 6, 5, &settings, &Sequential).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn vacuous_threshold() {
        let m = RingModel::new(7).unwrap();
        let settings = CrabSettings { draws: 1, ..Default::default() };
        let t = threshold_time(&m, 1e6, 1..=5, DepthSearch::Linear, 1, &settings, &Sequential).unwrap();
        assert_eq!(t.p_min, 1);
        assert!(threshold_time(&m, 0.0, 1..=5, DepthSearch::Linear, 1, &settings, &Sequential).is_err());
    }
}
