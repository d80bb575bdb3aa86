//! Optimization drivers: BFGS, random-restart QAOA and dressed CRAB.

pub mod bfgs;
pub mod crab;
pub mod qaoa;

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use bfgs::{bfgs_minimize, BfgsOutcome, BfgsSettings, Termination};
pub use crab::{
    crab_gradient, crab_schedule, dqa_crab, sample_frequencies, threshold_time, CrabMap, CrabParams,
    CrabResult, CrabSettings, DepthSearch, DrawOutcome, GammaSpec, ThresholdResult,
};
pub use qaoa::{
    find_critical_depth, full_success_depth, qaoa_rand, qaoa_restart, ControllabilityReport,
    QaoaSettings, RestartOutcome, ZERO_THRESHOLD,
};

use crate::propagate::Schedule;

/// Runs independent indexed tasks. Results come back ordered by index, so
/// any implementation gives identical output.
pub trait Executor {
    fn map<T, F>(&self, count: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs tasks one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, count: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(task).collect()
    }
}

/// Independent random stream for task `index` of a run seeded with `seed`.
pub fn task_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Best schedule of an optimization run and its bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub schedule: Schedule,
    pub energy: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub seed: u64,
    /// `sum (theta_x + theta_z)`.
    pub tau_signed: f64,
    /// `sum (|theta_x| + |theta_z|)`.
    pub tau_abs: f64,
}

impl OptimizationResult {
    pub(crate) fn new(
        schedule: Schedule,
        energy: f64,
        iterations: usize,
        grad_norm: f64,
        converged: bool,
        seed: u64,
    ) -> Self {
        let tau_signed = schedule.tau_signed();
        let tau_abs = schedule.tau_abs();
        Self { schedule, energy, iterations, grad_norm, converged, seed, tau_signed, tau_abs }
    }
}
