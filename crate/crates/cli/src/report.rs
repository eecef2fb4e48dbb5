//! Per-run bookkeeping shared by the batch commands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::io::{write_atomic, write_json, InputError};
use crate::{CliError, ExitStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub source: String,
    pub reason: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub seed: u64,
    pub inputs: usize,
    pub succeeded: usize,
    pub failed: usize,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

/// Collects outputs and failures of one command run.
pub struct Batch {
    command: &'static str,
    seed: u64,
    out_dir: PathBuf,
    inputs: usize,
    succeeded: usize,
    outputs: Vec<String>,
    failures: Vec<Failure>,
}

impl Batch {
    pub fn new(command: &'static str, seed: u64, out_dir: &Path) -> Self {
        Self {
            command,
            seed,
            out_dir: out_dir.to_path_buf(),
            inputs: 0,
            succeeded: 0,
            outputs: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn input(&mut self) {
        self.inputs += 1;
    }

    pub fn success(&mut self) {
        self.succeeded += 1;
    }

    pub fn fail(&mut self, source: &str, reason: &str, message: impl Into<String>) {
        let message = message.into();
        log::warn!("{source}: {reason}: {message}");
        self.failures.push(Failure {
            source: source.to_string(),
            reason: reason.to_string(),
            message,
        });
    }

    pub fn fail_input(&mut self, source: &str, e: InputError) {
        self.fail(source, e.reason, e.message);
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        write_json(&self.out_dir.join(rel), value).map_err(|e| CliError::Io(rel.into(), e))?;
        self.outputs.push(rel.to_string());
        Ok(())
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> Result<(), CliError> {
        write_atomic(&self.out_dir.join(rel), text.as_bytes())
            .map_err(|e| CliError::Io(rel.into(), e))?;
        self.outputs.push(rel.to_string());
        Ok(())
    }

    /// Writes `failures.json` and `summary.json` and maps the tally to an
    /// exit status: all failed → total, some failed → partial.
    pub fn finish(mut self) -> Result<ExitStatus, CliError> {
        let failures = std::mem::take(&mut self.failures);
        self.write_json("failures.json", &failures)?;
        self.outputs.push("summary.json".into());
        let summary = Summary {
            command: self.command.to_string(),
            seed: self.seed,
            inputs: self.inputs,
            succeeded: self.succeeded,
            failed: failures.len(),
            outputs: self.outputs.clone(),
        };
        write_json(&self.out_dir.join("summary.json"), &summary)
            .map_err(|e| CliError::Io("summary.json".into(), e))?;
        Ok(if failures.is_empty() {
            ExitStatus::Success
        } else if self.succeeded == 0 {
            ExitStatus::TotalFailure
        } else {
            ExitStatus::PartialFailure
        })
    }
}

/// File-name-safe form of an identifier.
pub fn slug(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "unnamed".into()
    } else {
        s
    }
}

/// Picks `base`, or `base-2`, `base-3`, ... if already taken.
pub fn unique_name(taken: &mut std::collections::BTreeSet<String>, base: &str) -> String {
    let mut name = base.to_string();
    let mut k = 2;
    while !taken.insert(name.clone()) {
        name = format!("{base}-{k}");
        k += 1;
    }
    name
}
