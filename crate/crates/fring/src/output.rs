//! Result files. JSON documents carry `"schema": "v1"` and the resolved
//! config; CSV files start with `#` metadata lines. Timing lives only in a
//! `<name>.run.json` sidecar so result files are reproducible byte for byte.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const SCHEMA: &str = "v1";

/// Writes the files of one subcommand into a directory.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    command: String,
    config: Value,
    written: Vec<PathBuf>,
}

impl OutputSet {
    pub fn create(dir: &Path, command: &str, config: &RunConfig) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let config = serde_json::to_value(config)
            .map_err(|source| CliError::Json { context: "serializing config".into(), source })?;
        Ok(Self { dir: dir.to_path_buf(), command: command.to_string(), config, written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Wraps `result` as `{schema, command, config, result}`.
    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> CliResult<PathBuf> {
        let result = serde_json::to_value(result)
            .map_err(|source| CliError::Json { context: format!("serializing {name}"), source })?;
        let doc = json!({
            "schema": SCHEMA,
            "command": self.command,
            "config": self.config,
            "result": result,
        });
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(&doc)
            .map_err(|source| CliError::Json { context: format!("serializing {name}"), source })?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    fn open_csv(&self, name: &str) -> CliResult<(PathBuf, csv::Writer<BufWriter<File>>)> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut out = BufWriter::new(file);
        let config = serde_json::to_string(&self.config)
            .map_err(|source| CliError::Json { context: "serializing config".into(), source })?;
        writeln!(out, "# schema: {SCHEMA}")
            .and_then(|_| writeln!(out, "# command: {}", self.command))
            .and_then(|_| writeln!(out, "# config: {config}"))
            .map_err(|e| CliError::io(&path, e))?;
        Ok((path, csv::Writer::from_writer(out)))
    }

    fn finish_csv(&mut self, path: PathBuf, mut w: csv::Writer<BufWriter<File>>) -> CliResult<PathBuf> {
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Rows with a serde header; the struct fields become the columns.
    pub fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> CliResult<PathBuf> {
        let (path, mut w) = self.open_csv(name)?;
        for r in rows {
            w.serialize(r).map_err(|source| CliError::Csv { context: path.display().to_string(), source })?;
        }
        self.finish_csv(path, w)
    }

    /// Raw records; the first one is the header.
    pub fn csv_records(&mut self, name: &str, records: &[Vec<String>]) -> CliResult<PathBuf> {
        let (path, mut w) = self.open_csv(name)?;
        for r in records {
            w.write_record(r).map_err(|source| CliError::Csv { context: path.display().to_string(), source })?;
        }
        self.finish_csv(path, w)
    }

    /// Timing sidecar; the only file that differs between identical runs.
    pub fn sidecar(&mut self, started: SystemTime, wall: Duration) -> CliResult<PathBuf> {
        let path = self.path(&format!("{}.run.json", self.command));
        let unix = started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let doc = json!({
            "schema": SCHEMA,
            "command": self.command,
            "started_unix": unix,
            "wall_time": wall.as_secs_f64(),
            "threads": rayon::current_num_threads(),
            "version": env!("CARGO_PKG_VERSION"),
            "files": self.written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        });
        let text = serde_json::to_string_pretty(&doc)
            .map_err(|source| CliError::Json { context: "serializing sidecar".into(), source })?;
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Reads the `result` field of a file written by [`OutputSet::json`].
pub fn read_result(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut doc: Value = serde_json::from_str(&text)
        .map_err(|source| CliError::Json { context: path.display().to_string(), source })?;
    match doc.get("schema").and_then(Value::as_str) {
        Some(SCHEMA) => {}
        other => {
            return Err(CliError::Validation(format!(
                "{}: unsupported schema {other:?}, expected \"{SCHEMA}\"",
                path.display()
            )))
        }
    }
    Ok(doc["result"].take())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        p: usize,
        eps: f64,
    }

    #[test]
    fn json_and_csv_carry_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::default();
        let mut out = OutputSet::create(dir.path(), "demo", &cfg).unwrap();
        let j = out.json("demo.json", &json!({"x": 1})).unwrap();
        let c = out.csv("demo.csv", &[Row { p: 1, eps: 0.5 }, Row { p: 2, eps: 0.25 }]).unwrap();
        assert_eq!(read_result(&j).unwrap(), json!({"x": 1}));
        let text = fs::read_to_string(&c).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# schema: v1");
        assert!(lines[2].starts_with("# config: {"));
        assert_eq!(lines[3], "p,eps");
        assert_eq!(lines.len(), 6);
        let side = out.sidecar(SystemTime::now(), Duration::from_millis(5)).unwrap();
        assert!(fs::read_to_string(side).unwrap().contains("wall_time"));
    }

    #[test]
    fn rejects_foreign_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        fs::write(&p, r#"{"schema": "v0", "result": 1}"#).unwrap();
        assert!(matches!(read_result(&p), Err(CliError::Validation(_))));
    }
}
