//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Each criterion runs the scenarios under `scenarios/acceptance`, after
//! checking that their budgets and tolerances have not drifted from the
//! pinned values below.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use levypot::config::{SchemeName, Tolerances};
use levypot::run::load_source;
use levypot::{run_parsed, run_suite, Overrides, Scenario, Status, Task};
use serde_json::Value;

const Z_MAX: f64 = 3.0;
const REL: f64 = 0.05;
const P_MIN: f64 = 0.01;
const K_SIGMA: f64 = 3.0;
const RESIDUAL_REL_LOCAL: f64 = 0.03;
const RESIDUAL_REL_FRACTIONAL: f64 = 0.05;
const NEWTONIAN_ATOM: f64 = std::f64::consts::TAU;
const FRACTIONAL_ATOM: f64 = 3.0032921893612596;

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/acceptance")
}

fn load(id: &str) -> Scenario {
    let src = if id.starts_with("builtin:") {
        id.to_string()
    } else {
        scenario_dir().join(format!("{id}.toml")).to_string_lossy().into_owned()
    };
    load_source(&src).unwrap_or_else(|e| panic!("{id}: {e}"))
}

fn default_tolerances(residual_rel: f64) -> Tolerances {
    Tolerances {
        z_max: Z_MAX,
        rel: REL,
        p_min: P_MIN,
        k_sigma: K_SIGMA,
        residual_rel,
    }
}

struct Criterion {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Criterion {
    fn new() -> Self {
        Self {
            failures: vec![],
            notes: vec![],
        }
    }

    fn require(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(msg());
        }
    }

    /// Checks the pinned tolerances, runs the scenario and returns its
    /// report.
    fn run(&mut self, sc: Scenario, tol: &Tolerances, out: &Path) -> Option<Value> {
        self.require(sc.tolerances == *tol, || format!("{}: tolerances differ from the pinned values", sc.id));
        let id = sc.id.clone();
        let outcome = run_parsed(sc, &Overrides::default(), out);
        self.require(outcome.status == Status::Pass, || {
            format!("{id}: {:?}: {}", outcome.status, outcome.messages.join("; "))
        });
        let path = outcome.report_dir?.join("report.json");
        let text = fs::read_to_string(&path).ok()?;
        serde_json::from_str(&text).ok()
    }
}

fn metric(report: &Option<Value>, task: usize, path: &str) -> f64 {
    let mut v = report.as_ref().map(|r| &r["tasks"][task]["metrics"]).unwrap_or(&Value::Null);
    for key in path.split('.') {
        v = match key.parse::<usize>() {
            Ok(i) => &v[i],
            Err(_) => &v[key],
        };
    }
    v.as_f64().unwrap_or(f64::NAN)
}

fn exit_law(out: &Path, c: &mut Criterion) {
    let sc = load("exit_law");
    c.require(sc.budget.n == 100_000 && sc.budget.scheme == SchemeName::Wos, || "budget must be n = 1e5 with WoS".into());
    match &sc.tasks[..] {
        [Task::Poisson { x, bins, .. }] => c.require(*bins == 20 && x[..] == [0.3, 0.0], || "need 20 bins from (0.3, 0)".into()),
        _ => c.require(false, || "expected one poisson task".into()),
    }
    let r = c.run(sc, &default_tolerances(RESIDUAL_REL_LOCAL), out);
    c.notes.push(format!("p = {:.3}", metric(&r, 0, "p_value")));
}

fn green(out: &Path, c: &mut Criterion) {
    let sc = load("green_ball");
    c.require(sc.budget.n == 1_000_000, || "budget must be n = 1e6".into());
    match &sc.tasks[..] {
        [Task::Green { cell, margin, .. }] => c.require(*cell == 0.1 && *margin >= 0.1, || "cells of 0.1 with margin 0.1".into()),
        _ => c.require(false, || "expected one green task".into()),
    }
    let r = c.run(sc, &default_tolerances(RESIDUAL_REL_LOCAL), out);
    c.notes.push(format!(
        "max rel = {:.4} over {} cells",
        metric(&r, 0, "max_rel_error"),
        metric(&r, 0, "cells_compared")
    ));
}

fn z_scenarios(out: &Path, c: &mut Criterion, ids: &[&str], key: &str) {
    for id in ids {
        let r = c.run(load(id), &default_tolerances(RESIDUAL_REL_LOCAL), out);
        let tasks = r.as_ref().and_then(|r| r["tasks"].as_array()).map_or(0, |t| t.len());
        for t in 0..tasks {
            c.notes.push(format!("{id}: z = {:.2}", metric(&r, t, key)));
        }
    }
}

fn killing(out: &Path, c: &mut Criterion) {
    let sc = load("killing");
    match &sc.tasks[..] {
        [Task::Killing { kappas, .. }] => c.require(kappas[..] == [0.5, 2.0], || "κ ∈ {0.5, 2}".into()),
        _ => c.require(false, || "expected one killing task".into()),
    }
    let r = c.run(sc, &default_tolerances(RESIDUAL_REL_LOCAL), out);
    c.notes.push(format!(
        "z = {:.2} (κ = 0.5), {:.2} (κ = 2)",
        metric(&r, 0, "rates.0.check.z_score"),
        metric(&r, 0, "rates.1.check.z_score")
    ));
}

fn bocher_local(out: &Path, c: &mut Criterion) {
    let sc = load("bocher_newtonian");
    c.require(sc.operator.dim == 3 && sc.operator.jump.is_none(), || "d = 3 Brownian".into());
    match &sc.tasks[..] {
        [Task::Decompose { expected_atom, .. }] => {
            c.require(*expected_atom == Some(NEWTONIAN_ATOM), || "atom pinned to 2π".into())
        }
        _ => c.require(false, || "expected one decompose task".into()),
    }
    let r = c.run(sc, &default_tolerances(RESIDUAL_REL_LOCAL), out);
    let a = metric(&r, 0, "atoms.0.coefficient");
    c.notes.push(format!(
        "a = {a:.4} (rel {:.1e}), residual/scale = {:.1e}",
        (a - NEWTONIAN_ATOM).abs() / NEWTONIAN_ATOM,
        metric(&r, 0, "residual_rms") / metric(&r, 0, "central_scale")
    ));
}

fn bocher_fractional(out: &Path, c: &mut Criterion) {
    let sc = load("bocher_fractional");
    let atoms: Vec<Option<f64>> = sc
        .tasks
        .iter()
        .filter_map(|t| match t {
            Task::Decompose { expected_atom, .. } => Some(*expected_atom),
            _ => None,
        })
        .collect();
    c.require(atoms == [Some(FRACTIONAL_ATOM), None], || "fractional atom then removable control".into());
    let r = c.run(sc, &default_tolerances(RESIDUAL_REL_FRACTIONAL), out);
    let a = metric(&r, 0, "atoms.0.coefficient");
    c.notes.push(format!(
        "a = {a:.4} (rel {:.4}); removable a/σ = {:.2}",
        (a - FRACTIONAL_ATOM).abs() / FRACTIONAL_ATOM,
        metric(&r, 1, "atoms.0.unconstrained") / metric(&r, 1, "atoms.0.std_error")
    ));
}

fn maxprin(out: &Path, c: &mut Criterion) {
    for id in ["maxprin_cauchy", "maxprin_stable", "maxprin_local"] {
        let sc = load(id);
        if let [Task::Maxprin { drifts, .. }] = &sc.tasks[..] {
            if id == "maxprin_local" {
                c.require(drifts.len() == 2, || "local case needs two drifts".into());
            }
        } else {
            c.require(false, || format!("{id}: expected one maxprin task"));
        }
        let r = c.run(sc, &default_tolerances(RESIDUAL_REL_LOCAL), out);
        let drifts = r.as_ref().and_then(|r| r["tasks"][0]["metrics"]["drifts"].as_array()).map_or(0, |d| d.len());
        for k in 0..drifts {
            let points = metric(&r, 0, &format!("drifts.{k}.grid_points"));
            c.require(points == 20.0, || format!("{id}: {points} grid points, need 20"));
            c.notes.push(format!("{id}: min margin = {:.4}", metric(&r, 0, &format!("drifts.{k}.min_margin"))));
        }
    }
}

fn wv(out: &Path, c: &mut Criterion) {
    let r = c.run(load("wv_stable"), &default_tolerances(RESIDUAL_REL_LOCAL), out);
    c.notes.push(format!("stable z = {:.2}", metric(&r, 0, "z_score")));
    let sc = load("builtin:wv_local_is_one");
    c.require(sc.operator.jump.is_none(), || "local case must have no jumps".into());
    let r = c.run(sc, &default_tolerances(RESIDUAL_REL_LOCAL), out);
    c.notes.push(format!("local direct = {}", metric(&r, 0, "direct.value")));
}

fn polarity(out: &Path, c: &mut Criterion) {
    let sc = load("polarity");
    let kinds: Vec<&str> = sc.tasks.iter().map(Task::kind).collect();
    c.require(kinds == ["lil_singleton", "hyperplane", "polarity_ladder"], || format!("unexpected tasks {kinds:?}"));
    for t in &sc.tasks {
        if let Task::PolarityLadder { exponent, exponent_tol, .. } = t {
            c.require(*exponent == Some(0.5) && *exponent_tol == 0.1, || "exponent 0.5 ± 0.1".into());
        }
    }
    let r = c.run(sc, &default_tolerances(RESIDUAL_REL_LOCAL), out);
    c.notes.push(format!("fitted exponent = {:.3}", metric(&r, 2, "rates.0.verdict.fitted_exponent")));
}

fn artifacts(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).expect("readable output") {
            let p = entry.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "summary.csv") {
                let bytes = fs::read(&p).expect("readable file");
                files.push((p.strip_prefix(dir).expect("prefix").to_path_buf(), bytes));
            }
        }
    }
    files.sort();
    files
}

fn reproducibility(out: &Path, c: &mut Criterion) {
    let manifest = out.join("manifest.txt");
    let lines = [
        "builtin:exit_law_quick".to_string(),
        "builtin:wv_local_is_one".to_string(),
        scenario_dir().join("polarity.toml").to_string_lossy().into_owned(),
        scenario_dir().join("duality_stable.toml").to_string_lossy().into_owned(),
    ];
    fs::write(&manifest, lines.join("\n")).expect("manifest written");
    let runs: Vec<Vec<(PathBuf, Vec<u8>)>> = [("a", 1), ("b", 1), ("c", 2)]
        .iter()
        .map(|(name, jobs)| {
            let dir = out.join(name);
            let s = run_suite(&manifest, *jobs, &Overrides::default(), &dir);
            c.require(s.status == Status::Pass, || format!("suite {name}: {:?} {:?}", s.status, s.messages));
            artifacts(&dir)
        })
        .collect();
    c.require(!runs[0].is_empty(), || "no artifacts written".into());
    c.require(runs[0] == runs[1], || "repeated runs differ".into());
    c.require(runs[0] == runs[2], || "--jobs 2 differs from --jobs 1".into());
    c.notes.push(format!("{} files compared across 3 runs", runs[0].len()));
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let criteria: [(&str, Box<dyn Fn(&Path, &mut Criterion)>); 13] = [
        ("exit law vs closed-form ball exit density", Box::new(exit_law)),
        ("Green density vs closed-form ball Green function", Box::new(green)),
        (
            "Ikeda–Watanabe exterior hitting",
            Box::new(|o: &Path, c: &mut Criterion| {
                z_scenarios(o, c, &["exterior_cauchy", "exterior_bump", "exterior_killed_drift"], "z_score")
            }),
        ),
        (
            "Dynkin formula",
            Box::new(|o: &Path, c: &mut Criterion| {
                z_scenarios(
                    o,
                    c,
                    &["dynkin_stable_0", "dynkin_stable_k0p1", "dynkin_brownian_0", "dynkin_brownian_k0p1"],
                    "z_score",
                )
            }),
        ),
        ("killing identity", Box::new(killing)),
        (
            "duality",
            Box::new(|o: &Path, c: &mut Criterion| z_scenarios(o, c, &["duality_drifted_brownian", "duality_stable"], "z_score")),
        ),
        ("Bôcher decomposition, local case", Box::new(bocher_local)),
        ("Bôcher decomposition, fractional case", Box::new(bocher_fractional)),
        ("maximum principle", Box::new(maxprin)),
        ("w_V consistency", Box::new(wv)),
        ("polarity", Box::new(polarity)),
        (
            "resolvent identity",
            Box::new(|o: &Path, c: &mut Criterion| z_scenarios(o, c, &["resolvent_identity"], "z_score")),
        ),
        ("reproducibility across reruns and --jobs", Box::new(reproducibility)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let dir = tmp.path().join(format!("c{:02}", i + 1));
        fs::create_dir_all(&dir).expect("criterion directory");
        let mut c = Criterion::new();
        let start = Instant::now();
        check(&dir, &mut c);
        let secs = start.elapsed().as_secs_f64();
        let verdict = if c.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {:2}: {verdict} {name} [{secs:.1} s] {}", i + 1, c.notes.join(", "));
        for f in &c.failures {
            println!("    {f}");
        }
        failed += usize::from(!c.failures.is_empty());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
