//! One function per subcommand. Each writes its files through an
//! [`OutputSet`] and returns a short summary for the terminal.

use std::path::Path;

use fring_core::bottleneck::refine_bottleneck;
use fring_core::gradients::finite_difference_report;
use fring_core::nambu::{gap_curve, uniform_grid};
use fring_core::observables::{populations, PopulationTrace};
use fring_core::optimize::{
    dqa_crab, qaoa_rand, task_rng, threshold_time, ControllabilityReport, CrabResult,
};
use fring_core::propagate::{linear_schedule, Schedule};
use fring_core::RingModel;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{DepthRange, RunConfig};
use crate::error::{CliError, CliResult};
use crate::exec::Rayon;
use crate::fit::{power_law, PowerLaw};
use crate::output::{read_result, OutputSet};
use crate::reference;

/// Largest central-difference deviation accepted by `grad-check`.
pub const GRAD_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct ModelInfo {
    pub n: usize,
    pub j: f64,
    pub j_w: f64,
    pub j_f: f64,
    pub h: f64,
}

impl From<&RingModel> for ModelInfo {
    fn from(m: &RingModel) -> Self {
        Self { n: m.n(), j: m.j(), j_w: m.j_w(), j_f: m.j_f(), h: m.h() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleJson {
    pub theta_x: Vec<f64>,
    pub theta_z: Vec<f64>,
}

impl From<&Schedule> for ScheduleJson {
    fn from(s: &Schedule) -> Self {
        Self { theta_x: s.theta_x().to_vec(), theta_z: s.theta_z().to_vec() }
    }
}

impl ScheduleJson {
    pub fn to_schedule(&self) -> CliResult<Schedule> {
        Ok(Schedule::new(self.theta_x.clone(), self.theta_z.clone())?)
    }
}

/// Summary printed after a successful run.
#[derive(Debug, Clone)]
pub struct Summary {
    pub headline: String,
    pub result: Value,
}

pub fn spectrum(cfg: &RunConfig, out: &mut OutputSet) -> CliResult<Summary> {
    #[derive(Serialize)]
    struct Row {
        s: f64,
        gap: f64,
        epsilon1: f64,
        epsilon2: f64,
    }
    let model = cfg.model()?;
    let curve = gap_curve(&model, &uniform_grid(cfg.points))?;
    let rows: Vec<Row> = (0..curve.s_values.len())
        .map(|i| Row {
            s: curve.s_values[i],
            gap: curve.gaps[i],
            epsilon1: curve.epsilon1[i],
            epsilon2: curve.epsilon2[i],
        })
        .collect();
    out.csv("spectrum.csv", &rows)?;
    // the grid minimum only brackets the dip; resolve it in fixed point
    let step = curve.s_values[1] - curve.s_values[0];
    let lo = (curve.s_b_detected - step).max(curve.s_c_detected);
    let hi = (curve.s_b_detected + step).min(1.0);
    let refined = if lo < hi { Some(refine_bottleneck(&model, lo, hi)?) } else { None };
    let result = json!({
        "model": ModelInfo::from(&model),
        "points": cfg.points,
        "s_c": curve.s_c_detected,
        "s_b": curve.s_b_detected,
        "min_gap": curve.min_gap_after_crossing(),
        "s_b_predicted": model.bottleneck_location(),
        "gap_ratio_predicted": model.bottleneck_gap_ratio(),
        "final_gap": curve.gaps.last().copied(),
        "bottleneck": refined.map(|b| json!({
            "s_b": b.s,
            "min_gap": b.gap,
            "epsilon1": b.epsilon1,
            "epsilon2": b.epsilon2,
            "bits": b.bits,
        })),
    });
    out.json("spectrum.json", &result)?;
    Ok(Summary {
        headline: format!(
            "N = {}: s_c = {:.6}, s_b = {:.9}, min gap = {:.6e}",
            model.n(),
            curve.s_c_detected,
            refined.map_or(curve.s_b_detected, |b| b.s),
            refined.map_or(curve.min_gap_after_crossing(), |b| b.gap)
        ),
        result,
    })
}

#[derive(Debug, Serialize)]
struct EnergyRow {
    p: usize,
    restart: usize,
    eps: f64,
    initial_eps: f64,
    iterations: usize,
    termination: &'static str,
}

fn energy_rows(r: &ControllabilityReport) -> impl Iterator<Item = EnergyRow> + '_ {
    r.outcomes.iter().enumerate().map(move |(i, o)| EnergyRow {
        p: r.p_depth,
        restart: i,
        eps: o.energy,
        initial_eps: o.initial_energy,
        iterations: o.iterations,
        termination: o.termination.as_str(),
    })
}

/// Scans the depth range; stops once every restart succeeds.
pub fn controllability(cfg: &RunConfig, out: &mut OutputSet) -> CliResult<Summary> {
    #[derive(Serialize)]
    struct Row {
        p: usize,
        restarts: usize,
        successes: usize,
        min_eps: f64,
        median_eps: f64,
    }
    let model = cfg.model()?;
    let settings = cfg.qaoa()?;
    let predicted = model.critical_depth();
    let range = match cfg.p {
        Some(r) => r,
        None => DepthRange::new(predicted.saturating_sub(1).max(1), predicted + 3)?,
    };
    let mut rows = Vec::new();
    let mut energies = Vec::new();
    let (mut p1, mut p2) = (None, None);
    for p in range.as_range() {
        let r = qaoa_rand(&model, p, cfg.restarts, cfg.seed, &settings, &Rayon)?;
        rows.push(Row {
            p,
            restarts: r.restarts,
            successes: r.success_count,
            min_eps: r.min_energy(),
            median_eps: r.median_energy(),
        });
        energies.extend(energy_rows(&r));
        if p1.is_none() && r.success_count >= 1 {
            p1 = Some(p);
        }
        if r.success_count == r.restarts {
            p2 = Some(p);
            break;
        }
    }
    out.csv("controllability.csv", &rows)?;
    out.csv("controllability_energies.csv", &energies)?;
    let result = json!({
        "model": ModelInfo::from(&model),
        "p_range": range,
        "restarts": cfg.restarts,
        "seed": cfg.seed,
        "zero_threshold": settings.zero_threshold,
        "p1_cr": p1,
        "p2_cr": p2,
        "p1_cr_predicted": predicted,
    });
    out.json("controllability.json", &result)?;
    let p1 = p1.ok_or_else(|| {
        CliError::NotFound(format!("no depth in {range} reached eps < {:e}", settings.zero_threshold))
    })?;
    let p2 = p2.map_or("not reached".to_string(), |p| p.to_string());
    Ok(Summary { headline: format!("N = {}: P1_cr = {p1}, P2_cr = {p2}", model.n()), result })
}

pub fn qaoa(cfg: &RunConfig, out: &mut OutputSet) -> CliResult<Summary> {
    let model = cfg.model()?;
    let settings = cfg.qaoa()?;
    let p = cfg.depth()?;
    let r = qaoa_rand(&model, p, cfg.restarts, cfg.seed, &settings, &Rayon)?;
    let best = r.best()?;
    out.csv("qaoa_energies.csv", &energy_rows(&r).collect::<Vec<_>>())?;
    let result = json!({
        "model": ModelInfo::from(&model),
        "p": p,
        "seed": cfg.seed,
        "restarts": r.restarts,
        "energies": r.energies,
        "success_count": r.success_count,
        "zero_threshold": r.zero_threshold,
        "min_eps": r.min_energy(),
        "median_eps": r.median_energy(),
        "best_schedule": ScheduleJson::from(&best.schedule),
        "tau_signed": best.tau_signed,
        "tau_abs": best.tau_abs,
    });
    out.json("qaoa.json", &result)?;
    Ok(Summary {
        headline: format!(
            "N = {}, P = {p}: {}/{} restarts below {:e}, best eps = {:e}",
            model.n(),
            r.success_count,
            r.restarts,
            r.zero_threshold,
            r.min_energy()
        ),
        result,
    })
}

/// Ground-state dip of a population trace: the step where `P_0` is
/// smallest comes before the last step and `P_0` recovers afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DipSummary {
    pub min_p0_step: usize,
    pub min_p0: f64,
    pub final_step: usize,
    pub final_p0: f64,
    pub dip_and_recover: bool,
}

pub fn dip_summary(trace: &PopulationTrace) -> Option<DipSummary> {
    let (min_p0_step, min_p0) = trace.min_ground_population()?;
    let final_step = *trace.p_index.last()?;
    let final_p0 = trace.pops.last()?[0];
    Some(DipSummary {
        min_p0_step,
        min_p0,
        final_step,
        final_p0,
        dip_and_recover: min_p0_step < final_step && final_p0 > min_p0,
    })
}

fn write_populations(out: &mut OutputSet, name: &str, trace: &PopulationTrace) -> CliResult<()> {
    // column count depends on the level count, so rows go out as string records
    let levels = trace.pops.first().map_or(0, Vec::len);
    let mut header = vec!["step".to_string(), "s_p".to_string()];
    header.extend((0..levels).map(|k| format!("p{k}")));
    let mut rows = vec![header];
    for ((p, s), pops) in trace.p_index.iter().zip(&trace.s_p).zip(&trace.pops) {
        let mut r = vec![p.to_string(), format!("{s:?}")];
        r.extend(pops.iter().map(|x| format!("{x:?}")));
        rows.push(r);
    }
    out.csv_records(name, &rows)?;
    Ok(())
}

fn crab_json(model: &RingModel, p: usize, cfg: &RunConfig, r: &CrabResult) -> Value {
    let draws: Vec<Value> = r
        .draws
        .iter()
        .map(|d| {
            json!({
                "draw": d.draw,
                "energy": d.energy,
                "stage_energies": d.stage_energies,
                "iterations": d.iterations,
                "converged": d.converged,
            })
        })
        .collect();
    let threshold = cfg.c * model.final_gap() / model.n() as f64;
    json!({
        "model": ModelInfo::from(model),
        "p": p,
        "seed": r.best.seed,
        "energy": r.best.energy,
        "iterations": r.best.iterations,
        "grad_norm": r.best.grad_norm,
        "converged": r.best.converged,
        "tau_signed": r.best.tau_signed,
        "tau_abs": r.best.tau_abs,
        "best_draw": r.best_draw,
        "threshold_c": cfg.c,
        "threshold_eps": threshold,
        "meets_threshold": r.best.energy <= threshold,
        "schedule": ScheduleJson::from(&r.best.schedule),
        "draws": draws,
    })
}

pub fn crab(cfg: &RunConfig, out: &mut OutputSet) -> CliResult<Summary> {
    #[derive(Serialize)]
    struct Row {
        step: usize,
        theta_x: f64,
        theta_z: f64,
        s_p: Option<f64>,
        delta_p: f64,
    }
    let model = cfg.model()?;
    let settings = cfg.crab()?;
    let p = cfg.depth()?;
    let r = dqa_crab(&model, p, cfg.seed, &settings, &Rayon)?;
    let s = &r.best.schedule;
    let rows: Vec<Row> = s
        .s_values()
        .into_iter()
        .zip(s.deltas())
        .enumerate()
        .map(|(i, (s_p, delta_p))| Row {
            step: i + 1,
            theta_x: s.theta_x()[i],
            theta_z: s.theta_z()[i],
            s_p,
            delta_p,
        })
        .collect();
    out.csv("crab_schedule.csv", &rows)?;
    out.json("crab_schedule.json", &ScheduleJson::from(s))?;
    let mut result = crab_json(&model, p, cfg, &r);
    if cfg.emit_populations {
        let trace = populations(&model, s, cfg.levels)?;
        write_populations(out, "crab_populations.csv", &trace)?;
        result["populations"] = json!({
            "levels": cfg.levels,
            "skipped_steps": trace.skipped,
            "dip": dip_summary(&trace),
        });
    }
    out.json("crab.json", &result)?;
    Ok(Summary {
        headline: format!("N = {}, P = {p}: eps = {:e} (draw {})", model.n(), r.best.energy, r.best_draw),
        result,
    })
}

/// Schedule stored in a `crab`, `crab_schedule` or `qaoa` result file.
pub fn load_schedule(path: &Path) -> CliResult<Schedule> {
    let result = read_result(path)?;
    let node = ["schedule", "best_schedule"].iter().find_map(|k| result.get(*k)).unwrap_or(&result);
    let s: ScheduleJson = serde_json::from_value(node.clone())
        .map_err(|source| CliError::Json { context: format!("schedule in {}", path.display()), source })?;
    s.to_schedule()
}

pub fn population_trace(cfg: &RunConfig, out: &mut OutputSet) -> CliResult<Summary> {
    let model = cfg.model()?;
    let schedule = match &cfg.schedule {
        Some(path) => load_schedule(path)?,
        None => linear_schedule(cfg.depth()?, cfg.dt)?,
    };
    let trace = populations(&model, &schedule, cfg.levels)?;
    write_populations(out, "populations.csv", &trace)?;
    let dip = dip_summary(&trace);
    let result = json!({
        "model": ModelInfo::from(&model),
        "p": schedule.depth(),
        "levels": cfg.levels,
        "skipped_steps": trace.skipped,
        "final_populations": trace.pops.last(),
        "dip": dip,
    });
    out.json("populations.json", &result)?;
    let final_p0 = trace.pops.last().map_or(f64::NAN, |r| r[0]);
    Ok(Summary {
        headline: format!("N = {}, P = {}: final P0 = {final_p0:.6}", model.n(), schedule.depth()),
        result,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub p_min: usize,
    pub tau: f64,
    pub tau_abs: f64,
    pub eps: f64,
    pub target: f64,
    pub reference_tau: Option<f64>,
}

pub fn scaling(cfg: &RunConfig, out: &mut OutputSet) -> CliResult<Summary> {
    if !(cfg.c > 0.0 && cfg.c.is_finite()) {
        return Err(CliError::Validation(format!("--c must be positive, got {}", cfg.c)));
    }
    if cfg.n_list.is_empty() {
        return Err(CliError::Validation("--n needs at least one size".into()));
    }
    let models = cfg.n_list.iter().map(|n| cfg.model_for(*n)).collect::<CliResult<Vec<_>>>()?;
    let settings = cfg.crab()?;
    let refs = reference::load(cfg.reference.as_deref())?;
    let mut rows = Vec::new();
    for model in &models {
        let range = cfg.p_search_for(model.n());
        let t = threshold_time(model, cfg.c, range.as_range(), cfg.search.into(), cfg.seed, &settings, &Rayon)?;
        log::info!("N = {}: p_min = {}, tau = {:.4}", model.n(), t.p_min, t.tau);
        rows.push(ScalingRow {
            n: model.n(),
            p_min: t.p_min,
            tau: t.tau,
            tau_abs: t.tau_abs,
            eps: t.result.best.energy,
            target: t.target,
            reference_tau: refs.iter().find(|r| r.n == model.n()).map(|r| r.tau),
        });
    }
    out.csv("scaling.csv", &rows)?;
    let fits = scaling_fits(&rows, &refs);
    let result = json!({
        "c": cfg.c,
        "rows": rows,
        "reference": refs,
        "fit": fits,
    });
    out.json("scaling.json", &result)?;
    let show = |f: &Option<PowerLaw>| f.map_or("n/a".to_string(), |f| format!("{:.3}", f.exponent));
    Ok(Summary {
        headline: format!(
            "tau ~ N^k: dQA-CRAB k = {}, reference k = {}",
            show(&fits.dqa_crab),
            show(&fits.reference)
        ),
        result,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingFits {
    pub dqa_crab: Option<PowerLaw>,
    pub dqa_crab_abs: Option<PowerLaw>,
    pub reference: Option<PowerLaw>,
}

pub fn scaling_fits(rows: &[ScalingRow], refs: &[reference::ReferencePoint]) -> ScalingFits {
    let n: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let tau: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    let tau_abs: Vec<f64> = rows.iter().map(|r| r.tau_abs).collect();
    let rn: Vec<f64> = refs.iter().map(|r| r.n as f64).collect();
    let rt: Vec<f64> = refs.iter().map(|r| r.tau).collect();
    ScalingFits { dqa_crab: power_law(&n, &tau), dqa_crab_abs: power_law(&n, &tau_abs), reference: power_law(&rn, &rt) }
}

pub fn grad_check(cfg: &RunConfig, out: &mut OutputSet) -> CliResult<Summary> {
    #[derive(Serialize)]
    struct Row {
        sample: usize,
        n: usize,
        p: usize,
        max_error: f64,
        max_gradient: f64,
    }
    if cfg.samples == 0 {
        return Err(CliError::Validation("--samples must be at least 1".into()));
    }
    if cfg.max_p == 0 {
        return Err(CliError::Validation("--max-p must be at least 1".into()));
    }
    let model = cfg.model()?;
    let mut rows = Vec::new();
    for i in 0..cfg.samples {
        let mut rng = task_rng(cfg.seed, i);
        let p = match cfg.p {
            Some(_) => cfg.depth()?,
            None => rng.random_range(1..=cfg.max_p),
        };
        let mut angle = || rng.random_range(cfg.init_low..cfg.init_high);
        let tx: Vec<f64> = (0..p).map(|_| angle()).collect();
        let tz: Vec<f64> = (0..p).map(|_| angle()).collect();
        let rep = finite_difference_report(&model, &Schedule::new(tx, tz)?, cfg.h_step)?;
        rows.push(Row {
            sample: i,
            n: model.n(),
            p,
            max_error: rep.max_error,
            max_gradient: rep.analytic.iter().fold(0.0, |m, g| m.max(g.abs())),
        });
    }
    out.csv("grad_check.csv", &rows)?;
    let worst = rows.iter().map(|r| r.max_error).fold(0.0, f64::max);
    let result = json!({
        "model": ModelInfo::from(&model),
        "samples": cfg.samples,
        "h_step": cfg.h_step,
        "max_error": worst,
        "tolerance": GRAD_CHECK_TOL,
        "pass": worst <= GRAD_CHECK_TOL,
    });
    out.json("grad_check.json", &result)?;
    if worst > GRAD_CHECK_TOL {
        return Err(CliError::Numerical(format!(
            "gradient deviates from central differences by {worst:e} > {GRAD_CHECK_TOL:e}"
        )));
    }
    Ok(Summary { headline: format!("{} samples, max deviation {worst:.3e}", cfg.samples), result })
}
