//! Random-restart QAOA (QAOA-RAND) and the controllability scans built on it.

use alloc::format;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use rand::Rng;

use super::bfgs::{bfgs_minimize, BfgsSettings, Termination};
use super::{task_rng, Executor, OptimizationResult};
use crate::error::{Error, Result};
use crate::model::RingModel;
use crate::propagate::{RingDynamics, Schedule};

/// Residual energy treated as exactly zero.
pub const ZERO_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QaoaSettings {
    pub bfgs: BfgsSettings,
    pub zero_threshold: f64,
    /// Initial angles are uniform in `[init_low, init_high)`.
    pub init_low: f64,
    pub init_high: f64,
}

impl Default for QaoaSettings {
    fn default() -> Self {
        Self {
            bfgs: BfgsSettings::default(),
            zero_threshold: ZERO_THRESHOLD,
            init_low: 0.0,
            init_high: core::f64::consts::PI,
        }
    }
}

/// One BFGS run from a random start.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub energy: f64,
    pub initial_energy: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub termination: Termination,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllabilityReport {
    pub n: usize,
    pub p_depth: usize,
    pub restarts: usize,
    pub seed: u64,
    pub energies: Vec<f64>,
    pub success_count: usize,
    pub zero_threshold: f64,
    pub outcomes: Vec<RestartOutcome>,
}

impl ControllabilityReport {
    pub fn min_energy(&self) -> f64 {
        self.energies.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn median_energy(&self) -> f64 {
        let mut e = self.energies.clone();
        e.sort_by(f64::total_cmp);
        let k = e.len();
        if k % 2 == 1 {
            e[k / 2]
        } else {
            0.5 * (e[k / 2 - 1] + e[k / 2])
        }
    }

    /// Restart with the lowest energy as an optimization result.
    pub fn best(&self) -> Result<OptimizationResult> {
        let o = self
            .outcomes
            .iter()
            .min_by(|a, b| a.energy.total_cmp(&b.energy))
            .ok_or_else(|| Error::NotFound("no restarts".into()))?;
        let schedule = Schedule::from_params(&o.params)?;
        let converged = !matches!(o.termination, Termination::IterationLimit | Termination::LineSearchFailure);
        Ok(OptimizationResult::new(schedule, o.energy, o.iterations, o.grad_norm, converged, self.seed))
    }
}

/// Optimizes restart `index` of a run seeded with `seed`.
pub fn qaoa_restart(
    dynamics: &RingDynamics,
    p_depth: usize,
    seed: u64,
    index: usize,
    settings: &QaoaSettings,
) -> RestartOutcome {
    let mut rng = task_rng(seed, index);
    let x0: Vec<f64> = (0..2 * p_depth)
        .map(|_| rng.random_range(settings.init_low..settings.init_high))
        .collect();
    let out = bfgs_minimize(|x, g| dynamics.energy_and_gradient(x, g), &x0, &settings.bfgs);
    if !out.converged() {
        log::debug!("restart {index}: {} after {} iterations", out.termination.as_str(), out.iterations);
    }
    RestartOutcome {
        energy: out.f,
        initial_energy: out.f_initial,
        iterations: out.iterations,
        grad_norm: out.grad_norm,
        termination: out.termination,
        params: out.x,
    }
}

/// Runs `restarts` independent BFGS optimizations of all `2P` angles from
/// uniform random starts; deterministic given `seed`.
pub fn qaoa_rand<E: Executor>(
    model: &RingModel,
    p_depth: usize,
    restarts: usize,
    seed: u64,
    settings: &QaoaSettings,
    exec: &E,
) -> Result<ControllabilityReport> {
    if p_depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    if restarts == 0 {
        return Err(Error::InvalidArgument("need at least one restart".into()));
    }
    if !(settings.init_low < settings.init_high) {
        return Err(Error::InvalidArgument("empty initialization range".into()));
    }
    let dynamics = RingDynamics::new(model)?;
    let outcomes = exec.map(restarts, |i| qaoa_restart(&dynamics, p_depth, seed, i, settings));
    let energies: Vec<f64> = outcomes.iter().map(|o| o.energy).collect();
    let success_count = energies.iter().filter(|e| **e < settings.zero_threshold).count();
    log::info!(
        "N = {}, P = {p_depth}: {success_count}/{restarts} restarts below {:e}",
        model.n(),
        settings.zero_threshold
    );
    Ok(ControllabilityReport {
        n: model.n(),
        p_depth,
        restarts,
        seed,
        energies,
        success_count,
        zero_threshold: settings.zero_threshold,
        outcomes,
    })
}

/// Smallest depth in `p_range` where at least one restart reaches zero
/// residual energy. Returns the reports of every depth scanned.
pub fn find_critical_depth<E: Executor>(
    model: &RingModel,
    p_range: RangeInclusive<usize>,
    restarts: usize,
    seed: u64,
    settings: &QaoaSettings,
    exec: &E,
) -> Result<(usize, Vec<ControllabilityReport>)> {
    scan(model, p_range, restarts, seed, settings, exec, |r| r.success_count >= 1)
}

/// Smallest depth in `p_range` where every restart reaches zero.
pub fn full_success_depth<E: Executor>(
    model: &RingModel,
    p_range: RangeInclusive<usize>,
    restarts: usize,
    seed: u64,
    settings: &QaoaSettings,
    exec: &E,
) -> Result<(usize, Vec<ControllabilityReport>)> {
    scan(model, p_range, restarts, seed, settings, exec, |r| r.success_count == r.restarts)
}

fn scan<E: Executor>(
    model: &RingModel,
    p_range: RangeInclusive<usize>,
    restarts: usize,
    seed: u64,
    settings: &QaoaSettings,
    exec: &E,
    accept: impl Fn(&ControllabilityReport) -> bool,
) -> Result<(usize, Vec<ControllabilityReport>)> {
    let mut reports = Vec::new();
    for p in p_range.clone() {
        let report = qaoa_rand(model, p, restarts, seed, settings, exec)?;
        let ok = accept(&report);
        reports.push(report);
        if ok {
            return Ok((p, reports));
        }
    }
    Err(Error::NotFound(format!(
        "no depth in {}..={} met the criterion for N = {}",
        p_range.start(),
        p_range.end(),
        model.n()
    )))
}
