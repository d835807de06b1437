//! Artifact directory and the one-page text summary.
//!
//! Nothing written here depends on the clock or the thread count, so two runs
//! with the same configuration produce identical files.

use crate::config::RunConfig;
use crate::error::CliError;
use serde::Serialize;
use std::fmt::Display;
use std::path::PathBuf;

pub struct Report {
    dir: PathBuf,
    command: &'static str,
    config: RunConfig,
    lines: Vec<String>,
    failures: Vec<String>,
    files: Vec<String>,
}

impl Report {
    pub fn new(command: &'static str, config: &RunConfig) -> Result<Self, CliError> {
        let dir = config.out();
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Input(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Report {
            dir,
            command,
            config: config.clone(),
            lines: Vec::new(),
            failures: Vec::new(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn text(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::write(self.path(name), contents)?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
        s.push('\n');
        self.text(name, &s)
    }

    pub fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<(), CliError> {
        let mut s = String::from(header);
        s.push('\n');
        for r in rows {
            s.push_str(&r);
            s.push('\n');
        }
        self.text(name, &s)
    }

    /// Records a file written by someone else.
    pub fn attach(&mut self, name: &str) {
        self.files.push(name.into());
    }

    pub fn line(&mut self, key: &str, value: impl Display) {
        self.lines.push(format!("{key}: {value}"));
    }

    /// An asserted check; a failure turns the exit status to 2.
    pub fn check(&mut self, name: &str, pass: bool, detail: impl Display) {
        self.lines
            .push(format!("check {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" }));
        if !pass {
            self.failures.push(name.into());
        }
    }

    /// A check that is reported but not asserted.
    pub fn note(&mut self, name: &str, pass: bool, detail: impl Display) {
        self.lines
            .push(format!("note {name}: {} ({detail})", if pass { "holds" } else { "fails" }));
    }

    /// Writes `summary.txt`, echoes it to stdout and returns the exit status.
    pub fn finish(mut self) -> Result<u8, CliError> {
        let mut s = String::new();
        s.push_str(&format!("carnot {}\n", env!("CARGO_PKG_VERSION")));
        s.push_str(&format!("command: {}\n", self.command));
        s.push_str(&format!("seed: {}\n", self.config.seed()));
        let echo = serde_json::to_string(&self.config).map_err(|e| CliError::Numerical(e.to_string()))?;
        s.push_str(&format!("config: {echo}\n"));
        for l in &self.lines {
            s.push_str(l);
            s.push('\n');
        }
        self.files.push("summary.txt".into());
        s.push_str(&format!("files: {}\n", self.files.join(" ")));
        if self.failures.is_empty() {
            s.push_str("status: pass\n");
        } else {
            s.push_str(&format!("status: fail ({})\n", self.failures.join(", ")));
        }
        std::fs::write(self.path("summary.txt"), &s)?;
        print!("{s}");
        Ok(if self.failures.is_empty() { 0 } else { 2 })
    }
}
