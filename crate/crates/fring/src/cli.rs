use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{DepthRange, RunConfig, SearchMode};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "fring", version, about = "Digitized annealing and QAOA on the frustrated Ising ring")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for independent restarts.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub bfgs: BfgsArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Ring size; `scaling` takes a comma separated list.
    #[arg(long, global = true, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, global = true)]
    pub j: Option<f64>,
    #[arg(long = "j-w", global = true)]
    pub j_w: Option<f64>,
    #[arg(long = "j-f", global = true)]
    pub j_f: Option<f64>,
    /// Transverse field; must be negative.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub h: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BfgsArgs {
    #[arg(long, global = true)]
    pub grad_tol: Option<f64>,
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Odd-sector gap along the linear interpolation.
    Spectrum {
        #[arg(long)]
        points: Option<usize>,
    },
    /// Random-restart QAOA over a depth range; detects both critical depths.
    Controllability(RestartArgs),
    /// Random-restart QAOA at one depth.
    QaoaRand(RestartArgs),
    /// Dressed CRAB optimization of a smooth schedule.
    Crab {
        #[command(flatten)]
        crab: CrabArgs,
        #[arg(long)]
        p: Option<DepthRange>,
        /// Also write the instantaneous-eigenstate populations.
        #[arg(long)]
        emit_populations: bool,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Instantaneous-eigenstate populations along a schedule.
    Populations {
        /// Schedule or crab result JSON; a linear schedule when absent.
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long)]
        p: Option<DepthRange>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Threshold annealing time versus N, compared with the reference table.
    Scaling {
        #[command(flatten)]
        crab: CrabArgs,
        /// Threshold in units of the final gap.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        p_search: Option<DepthRange>,
        #[arg(long, value_enum)]
        search: Option<SearchArg>,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Analytic gradient against central differences on random schedules.
    GradCheck {
        #[arg(long)]
        p: Option<DepthRange>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        h_step: Option<f64>,
        /// Largest depth drawn when `--p` is absent.
        #[arg(long)]
        max_p: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct RestartArgs {
    #[arg(long)]
    pub p: Option<DepthRange>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub zero_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CrabArgs {
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub super_iterations: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Fourier modes per super-iteration; defaults to P.
    #[arg(long)]
    pub n_c: Option<usize>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SearchArg {
    Linear,
    Bisect,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Controllability(_) => "controllability",
            Command::QaoaRand(_) => "qaoa-rand",
            Command::Crab { .. } => "crab",
            Command::Populations { .. } => "populations",
            Command::Scaling { .. } => "scaling",
            Command::GradCheck { .. } => "grad-check",
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

impl CrabArgs {
    fn apply(&self, c: &mut RunConfig) {
        set(&mut c.draws, self.draws);
        set(&mut c.super_iterations, self.super_iterations);
        set(&mut c.dt, self.dt);
        set_opt(&mut c.n_c, self.n_c);
    }
}

impl RestartArgs {
    fn apply(&self, c: &mut RunConfig) {
        set_opt(&mut c.p, self.p);
        set(&mut c.restarts, self.restarts);
        set(&mut c.zero_threshold, self.zero_threshold);
    }
}

impl Cli {
    /// Config file (or defaults) with every given flag applied.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        set(&mut c.out, self.out.clone());
        set(&mut c.seed, self.seed);
        let m = &self.model;
        match (m.n.len(), &self.command) {
            (0, _) => {}
            (_, Command::Scaling { .. }) => c.n_list = m.n.clone(),
            (1, _) => c.n = m.n[0],
            _ => {
                return Err(CliError::Validation(format!(
                    "{} takes a single --n, got {} values",
                    self.command.name(),
                    m.n.len()
                )))
            }
        }
        set(&mut c.j, m.j);
        set(&mut c.j_w, m.j_w);
        set(&mut c.j_f, m.j_f);
        set(&mut c.h, m.h);
        set(&mut c.grad_tol, self.bfgs.grad_tol);
        set(&mut c.rel_tol, self.bfgs.rel_tol);
        set(&mut c.max_iter, self.bfgs.max_iter);
        match &self.command {
            Command::Spectrum { points } => set(&mut c.points, *points),
            Command::Controllability(a) | Command::QaoaRand(a) => a.apply(&mut c),
            Command::Crab { crab, p, emit_populations, levels } => {
                crab.apply(&mut c);
                set_opt(&mut c.p, *p);
                c.emit_populations |= *emit_populations;
                set(&mut c.levels, *levels);
            }
            Command::Populations { schedule, p, dt, levels } => {
                set_opt(&mut c.schedule, schedule.clone());
                set_opt(&mut c.p, *p);
                set(&mut c.dt, *dt);
                set(&mut c.levels, *levels);
            }
            Command::Scaling { crab, c: thr, p_search, search, reference } => {
                crab.apply(&mut c);
                set(&mut c.c, *thr);
                set_opt(&mut c.p_search, *p_search);
                set(
                    &mut c.search,
                    search.map(|s| match s {
                        SearchArg::Linear => SearchMode::Linear,
                        SearchArg::Bisect => SearchMode::Bisect,
                    }),
                );
                set_opt(&mut c.reference, reference.clone());
            }
            Command::GradCheck { p, samples, h_step, max_p } => {
                set_opt(&mut c.p, *p);
                set(&mut c.samples, *samples);
                set(&mut c.h_step, *h_step);
                set(&mut c.max_p, *max_p);
            }
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(args: &[&str]) -> CliResult<RunConfig> {
        Cli::try_parse_from(args).unwrap().resolve()
    }

    #[test]
    fn flags_override_defaults() {
        let c = resolve(&["fring", "controllability", "--n", "5", "--p", "4:10", "--restarts", "30"]).unwrap();
        assert_eq!(c.n, 5);
        assert_eq!(c.p, Some(DepthRange { lo: 4, hi: 10 }));
        assert_eq!(c.restarts, 30);
        let c = resolve(&["fring", "scaling", "--c", "0.1", "--n", "13,21,29"]).unwrap();
        assert_eq!(c.n_list, vec![13, 21, 29]);
        let c = resolve(&["fring", "spectrum", "--h", "-2", "--seed", "4"]).unwrap();
        assert_eq!((c.h, c.seed), (-2.0, 4));
    }

    #[test]
    fn rejects_lists_outside_scaling_and_short_flags() {
        assert!(resolve(&["fring", "spectrum", "--n", "5,7"]).is_err());
        assert!(Cli::try_parse_from(["fring", "spectrum", "-n", "5"]).is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"n": 9, "restarts": 12, "seed": 3}"#).unwrap();
        let p = path.to_str().unwrap();
        let c = resolve(&["fring", "qaoa-rand", "--config", p, "--restarts", "20"]).unwrap();
        assert_eq!((c.n, c.restarts, c.seed), (9, 20, 3));
    }
}
