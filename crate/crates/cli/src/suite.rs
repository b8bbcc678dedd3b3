//! Running manifests of scenarios on a bounded worker pool.

use std::collections::BTreeSet;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{ConfigError, Overrides, Scenario};
use crate::run::{load_source, run_parsed, RunOutcome, Status};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TomlManifest {
    scenarios: Vec<String>,
}

/// Scenario references of a manifest: a TOML file with `scenarios = [...]`
/// or one path per line (`#` starts a comment). Relative paths are resolved
/// against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))?;
    let entries: Vec<String> = if text.lines().any(|l| l.trim_start().starts_with("scenarios")) {
        toml::from_str::<TomlManifest>(&text)
            .map_err(|e| ConfigError::new(format!("{}: {}", path.display(), e.message())))?
            .scenarios
    } else {
        text.lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect()
    };
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(entries
        .into_iter()
        .map(|e| {
            if e.starts_with("builtin:") || Path::new(&e).is_absolute() {
                e
            } else {
                base.join(e).to_string_lossy().into_owned()
            }
        })
        .collect())
}

#[derive(Debug)]
pub struct SuiteOutcome {
    pub status: Status,
    pub runs: Vec<RunOutcome>,
    pub messages: Vec<String>,
    pub summary: Option<PathBuf>,
}

/// Runs every scenario of a manifest with at most `jobs` scenarios at a time
/// and writes `<out_dir>/summary.csv`.
///
/// All scenarios are parsed first; duplicate ids reject the whole suite with
/// status 2 before anything runs. Each scenario draws only from its own seed
/// tree, so outputs do not depend on `jobs` or on scheduling order.
pub fn run_suite(manifest: &Path, jobs: usize, overrides: &Overrides, out_dir: &Path) -> SuiteOutcome {
    let invalid = |messages: Vec<String>| SuiteOutcome {
        status: Status::Invalid,
        runs: vec![],
        messages,
        summary: None,
    };
    let sources = match read_manifest(manifest) {
        Ok(s) => s,
        Err(e) => return invalid(vec![e.to_string()]),
    };
    let mut parsed: Vec<Result<Scenario, String>> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut duplicates = Vec::new();
    for src in &sources {
        match load_source(src) {
            Ok(sc) => {
                if !seen.insert(sc.id.clone()) {
                    duplicates.push(format!("duplicate scenario id `{}` ({src})", sc.id));
                }
                parsed.push(Ok(sc));
            }
            Err(e) => parsed.push(Err(format!("{src}: {e}"))),
        }
    }
    if !duplicates.is_empty() {
        return invalid(duplicates);
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => return invalid(vec![format!("cannot start worker pool: {e}")]),
    };
    let runs: Vec<RunOutcome> = pool.install(|| {
        parsed
            .into_par_iter()
            .zip(sources.par_iter())
            .map(|(p, src)| match p {
                Ok(sc) => run_parsed(sc, overrides, out_dir),
                Err(msg) => RunOutcome {
                    id: src.clone(),
                    status: Status::Invalid,
                    messages: vec![msg],
                    timings: vec![],
                    report_dir: None,
                },
            })
            .collect()
    });
    let status = runs.iter().map(|r| r.status).max().unwrap_or(Status::Pass);
    let mut messages: Vec<String> = runs.iter().flat_map(|r| r.messages.iter().cloned()).collect();
    let summary = out_dir.join("summary.csv");
    let summary = match write_summary(&summary, &runs) {
        Ok(()) => Some(summary),
        Err(e) => {
            messages.push(format!("cannot write summary: {e}"));
            None
        }
    };
    SuiteOutcome {
        status: if summary.is_none() { Status::Invalid } else { status },
        runs,
        messages,
        summary,
    }
}

fn write_summary(path: &Path, runs: &[RunOutcome]) -> io::Result<()> {
    std::fs::create_dir_all(path.parent().unwrap_or(Path::new(".")))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(["id", "task", "status", "wall_time_s", "n_effective"])?;
    for r in runs {
        if r.timings.is_empty() {
            let status = if r.status == Status::Pass { "PASS" } else { "ERROR" };
            w.write_record([r.id.as_str(), "", status, "0", "0"])?;
        }
        for t in &r.timings {
            let status = if t.pass { "PASS" } else { "FAIL" };
            w.write_record([
                r.id.clone(),
                t.task.clone(),
                status.to_string(),
                format!("{:.3}", t.wall_time_s),
                t.n_effective.to_string(),
            ])?;
        }
    }
    w.flush()
}
