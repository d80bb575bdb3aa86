//! Run configuration: a JSON file with every field optional, then command
//! line overrides on top.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fring_core::model::{DEFAULT_H, DEFAULT_J, DEFAULT_J_F, DEFAULT_J_W};
use fring_core::optimize::{
    BfgsSettings, CrabSettings, DepthSearch, GammaSpec, QaoaSettings, ZERO_THRESHOLD,
};
use fring_core::RingModel;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Inclusive depth range written `lo:hi`, or a single depth `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DepthRange {
    pub lo: usize,
    pub hi: usize,
}

impl DepthRange {
    pub fn new(lo: usize, hi: usize) -> CliResult<Self> {
        if lo == 0 || lo > hi {
            return Err(CliError::Validation(format!("depth range {lo}:{hi} is empty or starts at 0")));
        }
        Ok(Self { lo, hi })
    }

    pub fn as_range(&self) -> std::ops::RangeInclusive<usize> {
        self.lo..=self.hi
    }
}

impl FromStr for DepthRange {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let bad = || CliError::Validation(format!("cannot parse depth range '{s}' (want P or LO:HI)"));
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        match s.split_once(':') {
            Some((a, b)) => DepthRange::new(parse(a)?, parse(b)?),
            None => {
                let p = parse(s)?;
                DepthRange::new(p, p)
            }
        }
    }
}

impl TryFrom<String> for DepthRange {
    type Error = CliError;
    fn try_from(s: String) -> CliResult<Self> {
        s.parse()
    }
}

impl From<DepthRange> for String {
    fn from(r: DepthRange) -> String {
        r.to_string()
    }
}

impl fmt::Display for DepthRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Linear,
    Bisect,
}

impl From<SearchMode> for DepthSearch {
    fn from(m: SearchMode) -> Self {
        match m {
            SearchMode::Linear => DepthSearch::Linear,
            SearchMode::Bisect => DepthSearch::Bisect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaConfig {
    pub alpha: f64,
    pub beta: f64,
}

/// Everything a subcommand needs. Defaults are the standard ring constants
/// and the two-stage dressed CRAB recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    /// System sizes for `scaling`.
    pub n_list: Vec<usize>,
    pub j: f64,
    pub j_w: f64,
    pub j_f: f64,
    pub h: f64,
    /// Depth, or depth range for `controllability`.
    pub p: Option<DepthRange>,
    pub restarts: usize,
    pub seed: u64,
    /// Grid points on `[0, 1]` for `spectrum`.
    pub points: usize,
    /// Sector levels tracked by `populations`.
    pub levels: usize,
    pub zero_threshold: f64,
    pub init_low: f64,
    pub init_high: f64,
    pub grad_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub c: f64,
    pub draws: usize,
    pub super_iterations: usize,
    pub dt: f64,
    pub gammas: Vec<GammaConfig>,
    pub n_c: Option<usize>,
    /// Depth range for `scaling`; when absent each N searches `N:4N`.
    pub p_search: Option<DepthRange>,
    pub search: SearchMode,
    /// Schedule JSON consumed by `populations`.
    pub schedule: Option<PathBuf>,
    pub emit_populations: bool,
    /// Reference table for `scaling`; the bundled copy when absent.
    pub reference: Option<PathBuf>,
    pub h_step: f64,
    pub samples: usize,
    pub max_p: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let b = BfgsSettings::default();
        Self {
            n: 13,
            n_list: vec![13, 21, 29, 37, 45],
            j: DEFAULT_J,
            j_w: DEFAULT_J_W,
            j_f: DEFAULT_J_F,
            h: DEFAULT_H,
            p: None,
            restarts: 250,
            seed: 1,
            points: fring_core::nambu::DEFAULT_GRID_POINTS,
            levels: 4,
            zero_threshold: ZERO_THRESHOLD,
            init_low: 0.0,
            init_high: std::f64::consts::PI,
            grad_tol: b.grad_tol,
            rel_tol: b.rel_tol,
            max_iter: b.max_iter,
            c: 0.1,
            draws: 10,
            super_iterations: 2,
            dt: 0.5,
            gammas: vec![GammaConfig { alpha: 1.5, beta: 4.0 }, GammaConfig { alpha: 1.5, beta: 20.0 }],
            n_c: None,
            p_search: None,
            search: SearchMode::Bisect,
            schedule: None,
            emit_populations: false,
            reference: None,
            h_step: 1e-5,
            samples: 20,
            max_p: 20,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::Validation(format!("config {} not found", path.display())),
            _ => CliError::io(path, e),
        })?;
        serde_json::from_str(&text)
            .map_err(|source| CliError::Json { context: format!("config {}", path.display()), source })
    }

    pub fn model(&self) -> CliResult<RingModel> {
        self.model_for(self.n)
    }

    pub fn model_for(&self, n: usize) -> CliResult<RingModel> {
        Ok(RingModel::with_params(n, self.j, self.j_w, self.j_f, self.h)?)
    }

    pub fn bfgs(&self) -> BfgsSettings {
        BfgsSettings { grad_tol: self.grad_tol, rel_tol: self.rel_tol, max_iter: self.max_iter, ..Default::default() }
    }

    pub fn qaoa(&self) -> CliResult<QaoaSettings> {
        if self.restarts == 0 {
            return Err(CliError::Validation("--restarts must be at least 1".into()));
        }
        if !(self.zero_threshold > 0.0) {
            return Err(CliError::Validation("zero threshold must be positive".into()));
        }
        Ok(QaoaSettings {
            bfgs: self.bfgs(),
            zero_threshold: self.zero_threshold,
            init_low: self.init_low,
            init_high: self.init_high,
        })
    }

    pub fn crab(&self) -> CliResult<CrabSettings> {
        if self.draws == 0 {
            return Err(CliError::Validation("--draws must be at least 1".into()));
        }
        if self.super_iterations == 0 {
            return Err(CliError::Validation("--super-iterations must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CliError::Validation(format!("dt = {} must be positive", self.dt)));
        }
        if self.gammas.is_empty() {
            return Err(CliError::Validation("need at least one Gamma law".into()));
        }
        let gammas = self
            .gammas
            .iter()
            .map(|g| GammaSpec::new(g.alpha, g.beta))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CrabSettings {
            bfgs: self.bfgs(),
            draws: self.draws,
            super_iterations: self.super_iterations,
            dt: self.dt,
            gammas,
            n_c: self.n_c,
            stop_below: None,
        })
    }

    /// Single depth; fails when a proper range or nothing was given.
    pub fn depth(&self) -> CliResult<usize> {
        match self.p {
            Some(r) if r.lo == r.hi => Ok(r.lo),
            Some(r) => Err(CliError::Validation(format!("expected a single depth, got {r}"))),
            None => Err(CliError::Validation("--p is required".into())),
        }
    }

    pub fn p_search_for(&self, n: usize) -> DepthRange {
        self.p_search.unwrap_or(DepthRange { lo: n, hi: 4 * n })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_range_parsing() {
        assert_eq!("41:45".parse::<DepthRange>().unwrap(), DepthRange { lo: 41, hi: 45 });
        assert_eq!("7".parse::<DepthRange>().unwrap(), DepthRange { lo: 7, hi: 7 });
        assert!("5:4".parse::<DepthRange>().is_err());
        assert!("0".parse::<DepthRange>().is_err());
        assert!("a:b".parse::<DepthRange>().is_err());
    }

    #[test]
    fn json_roundtrip_and_partial_files() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
        let partial: RunConfig = serde_json::from_str(r#"{"n": 7, "p": "3:9"}"#).unwrap();
        assert_eq!(partial.n, 7);
        assert_eq!(partial.p, Some(DepthRange { lo: 3, hi: 9 }));
        assert_eq!(partial.restarts, 250);
        assert!(serde_json::from_str::<RunConfig>(r#"{"nn": 7}"#).is_err());
    }

    #[test]
    fn settings_validation() {
        let c = RunConfig { restarts: 0, ..Default::default() };
        assert!(c.qaoa().is_err());
        let c = RunConfig { gammas: vec![GammaConfig { alpha: -1.0, beta: 1.0 }], ..Default::default() };
        assert!(c.crab().is_err());
        assert!(RunConfig { n: 4, ..Default::default() }.model().is_err());
    }
}
