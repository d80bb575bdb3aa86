//! Continuous-time annealing times used as the scaling reference.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Bundled copy of `data/cote2023_fig5_tau.csv`.
pub const BUNDLED: &str = include_str!("../data/cote2023_fig5_tau.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub n: usize,
    pub tau: f64,
}

/// Parses an `n,tau` table; lines starting with `#` are provenance notes.
pub fn parse(text: &str) -> CliResult<Vec<ReferencePoint>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for r in rdr.deserialize() {
        let p: ReferencePoint =
            r.map_err(|source| CliError::Csv { context: "reference table".into(), source })?;
        if p.n < 5 || !(p.tau > 0.0) {
            return Err(CliError::Validation(format!("reference row n = {}, tau = {} is invalid", p.n, p.tau)));
        }
        rows.push(p);
    }
    Ok(rows)
}

pub fn load(path: Option<&Path>) -> CliResult<Vec<ReferencePoint>> {
    match path {
        None => parse(BUNDLED),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => CliError::NotFound(format!("reference table {} not found", p.display())),
                _ => CliError::io(p, e),
            })?;
            parse(&text)
        }
    }
}
