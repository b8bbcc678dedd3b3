//! Running single scenarios.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{ConfigError, Overrides, Scenario};
use crate::report::{params_hash, Report, TaskReport, SCHEMA_VERSION};
use crate::tasks::execute;

/// Exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Pass = 0,
    /// A tolerance was exceeded.
    Fail = 1,
    /// The configuration is invalid or a task raised an error.
    Invalid = 2,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Per-task timing kept out of `report.json`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskTiming {
    pub task: String,
    pub pass: bool,
    pub wall_time_s: f64,
    pub n_effective: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub id: String,
    pub status: Status,
    /// Human-readable lines: failing z-scores and errors.
    pub messages: Vec<String>,
    pub timings: Vec<TaskTiming>,
    pub report_dir: Option<PathBuf>,
}

/// Validates and runs a parsed scenario, writing `<out_dir>/<id>/report.json`
/// and `<out_dir>/<id>/tables/*.csv`. The report is rewritten after every
/// task, so a failure leaves the finished tasks on disk.
pub fn run_parsed(mut sc: Scenario, overrides: &Overrides, out_dir: &Path) -> RunOutcome {
    sc.apply(overrides);
    let canonical = sc.canonical_json();
    let mut report = Report {
        schema_version: SCHEMA_VERSION,
        id: sc.id.clone(),
        params_hash: params_hash(&canonical),
        seed: sc.budget.seed,
        config: serde_json::from_str(&canonical).expect("canonical JSON parses"),
        tasks: vec![],
        error: None,
        pass: false,
    };
    let mut outcome = RunOutcome {
        id: sc.id.clone(),
        status: Status::Pass,
        messages: vec![],
        timings: vec![],
        report_dir: None,
    };
    let built = match sc.validate() {
        Ok(b) => b,
        Err(e) => {
            outcome.status = Status::Invalid;
            outcome.messages.push(format!("{}: {e}", sc.id));
            if e.field.as_deref() != Some("id") {
                let dir = out_dir.join(&sc.id);
                report.error = Some(e.to_string());
                if report.write(&dir).is_ok() {
                    outcome.report_dir = Some(dir);
                }
            }
            return outcome;
        }
    };
    let dir = out_dir.join(&sc.id);
    outcome.report_dir = Some(dir.clone());
    let io_error = |outcome: &mut RunOutcome, e: std::io::Error| {
        outcome.status = Status::Invalid;
        outcome.messages.push(format!("{}: cannot write report: {e}", sc.id));
    };
    report.pass = true;
    if let Err(e) = report.write(&dir) {
        io_error(&mut outcome, e);
        return outcome;
    }
    for (index, task) in sc.tasks.iter().enumerate() {
        let start = Instant::now();
        let result = execute(task, &sc, &built);
        let wall = start.elapsed().as_secs_f64();
        let entry = match result {
            Ok(t) => {
                let pass = t.failures.is_empty();
                for f in &t.failures {
                    outcome.messages.push(format!("{} task {index} ({}): {f}", sc.id, task.kind()));
                }
                if !pass {
                    outcome.status = outcome.status.max(Status::Fail);
                }
                TaskReport {
                    index,
                    task: task.kind().into(),
                    pass,
                    n_effective: t.n_effective,
                    metrics: t.metrics,
                    failures: t.failures,
                    rows: t.rows,
                }
            }
            Err(e) => {
                outcome.status = Status::Invalid;
                outcome.messages.push(format!("{} task {index} ({}): {e}", sc.id, task.kind()));
                report.error = Some(format!("task {index}: {e}"));
                TaskReport {
                    index,
                    task: task.kind().into(),
                    pass: false,
                    n_effective: 0,
                    metrics: serde_json::Value::Null,
                    failures: vec![e.to_string()],
                    rows: vec![],
                }
            }
        };
        outcome.timings.push(TaskTiming {
            task: entry.task.clone(),
            pass: entry.pass,
            wall_time_s: wall,
            n_effective: entry.n_effective,
        });
        report.pass &= entry.pass;
        let written = report.write_table(&dir, &entry);
        report.tasks.push(entry);
        if let Err(e) = written.and_then(|_| report.write(&dir)) {
            io_error(&mut outcome, e);
            return outcome;
        }
        if outcome.status == Status::Invalid {
            break;
        }
    }
    outcome
}

/// Loads a scenario from a file or a `builtin:<name>` reference and runs it.
pub fn run_scenario(source: &str, overrides: &Overrides, out_dir: &Path) -> RunOutcome {
    match load_source(source) {
        Ok(sc) => run_parsed(sc, overrides, out_dir),
        Err(e) => RunOutcome {
            id: source.to_string(),
            status: Status::Invalid,
            messages: vec![format!("{source}: {e}")],
            timings: vec![],
            report_dir: None,
        },
    }
}

/// Parses a scenario file or a `builtin:<name>` reference.
pub fn load_source(source: &str) -> Result<Scenario, ConfigError> {
    match source.strip_prefix("builtin:") {
        Some(name) => {
            let text = crate::builtins::get(name).ok_or_else(|| ConfigError::new(format!("unknown builtin `{name}`")))?;
            Scenario::parse(text)
        }
        None => Scenario::load(Path::new(source)),
    }
}
