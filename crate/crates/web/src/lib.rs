//! WebAssembly bindings for a static demo page.
//!
//! Each exported function runs a small Monte Carlo experiment on the unit
//! ball and returns its result as a JSON string for plotting.

use levy_potential::kernels::{green_ball, poisson_ball_radial_bins};
use levy_potential::levy::{Domain, DriftField, JumpSpec, LevyTriplet, Operator, Shape};
use levy_potential::path::{wos_exit_ball, PathConfig};
use levy_potential::polarity::{epsilon_ladder, hitting_ladder, polar_extrapolate, Target};
use levy_potential::potential::{estimate_green_density, CellGrid};
use levy_potential::quad::GaussRule;
use levy_potential::rng::SeedTree;
use levy_potential::stats::{bin_of, chi_square_gof};
use levy_potential::{Error, Result};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_PATHS: u32 = 200_000;

fn check_budget(n: u32) -> Result<u64> {
    if n == 0 || n > MAX_PATHS {
        return Err(Error::Argument(format!("path count must lie in 1..={MAX_PATHS}")));
    }
    Ok(n as u64)
}

fn stable(d: usize, s: f64) -> Result<Operator> {
    let triplet = LevyTriplet::pure_jump(d, JumpSpec::IsotropicStable { s })?;
    Operator::new(triplet, DriftField::zero(d), 0.0)
}

/// Histogram of the exit radius of the 2s-stable process started at
/// `(x0, 0)` in the unit disc, against equiprobable bins of the exact law.
pub fn exit_law_value(s: f64, x0: f64, n: u32, bins: u32, seed: u32) -> Result<Value> {
    let n = check_budget(n)?;
    if !(2..=50).contains(&bins) {
        return Err(Error::Argument("bins must lie in 2..=50".into()));
    }
    let x = [x0, 0.0];
    let edges = poisson_ball_radial_bins(2, s, 1.0, &x, bins as usize)?;
    let tree = SeedTree::new(seed as u64).derive("web_exit_law");
    let mut counts = vec![0u64; bins as usize];
    let mut radii = Vec::with_capacity(n as usize);
    for i in 0..n {
        let e = wos_exit_ball(s, &[0.0, 0.0], 1.0, &x, &mut tree.index(i).rng())?;
        let r = e.exit_pos.iter().map(|v| v * v).sum::<f64>().sqrt();
        counts[bin_of(&edges[..edges.len() - 1], r)] += 1;
        radii.push(r);
    }
    let probs = vec![1.0 / bins as f64; bins as usize];
    let test = chi_square_gof(&counts, &probs);
    Ok(json!({
        "inner_edges": edges[..edges.len() - 1],
        "counts": counts,
        "expected_per_bin": n as f64 / bins as f64,
        "chi_square": test.statistic,
        "p_value": test.p_value,
    }))
}

/// Monte Carlo Green density of the 2s-stable process killed on leaving the
/// unit disc, along the row of cells through the pole `(x0, 0)`, with the
/// cell-averaged closed form.
pub fn green_profile_value(s: f64, x0: f64, n: u32, seed: u32) -> Result<Value> {
    let n = check_budget(n)?;
    let op = stable(2, s)?;
    let shape = Shape::centered_ball(2, 1.0);
    let v = Domain::new(shape.clone());
    let grid = CellGrid::covering(&shape, 2.0 / 25.0)?;
    let mut cfg = PathConfig::wos(seed as u64);
    cfg.occupation_draws = 4;
    let x = [x0, 0.0];
    let g = estimate_green_density(&op, &v, &x, &grid, n, &cfg)?;
    let rule = GaussRule::new(4, 0.0, 1.0);
    let mut rows = Vec::new();
    for i in 0..grid.len() {
        let (lo, hi) = grid.bounds(i);
        if !(lo[1] < 0.0 && hi[1] > 0.0) || !corners_inside(&shape, &lo, &hi) {
            continue;
        }
        let mut exact = 0.0;
        for (a, wa) in rule.nodes.iter().zip(&rule.weights) {
            for (b, wb) in rule.nodes.iter().zip(&rule.weights) {
                let y = [lo[0] + a * (hi[0] - lo[0]), lo[1] + b * (hi[1] - lo[1])];
                exact += wa * wb * green_ball(2, s, 1.0, &x, &y)?;
            }
        }
        let est = &g.density[i];
        rows.push(json!({
            "center": grid.center(i)[0],
            "estimate": est.value,
            "std_error": est.std_error,
            "exact": exact,
        }));
    }
    Ok(json!({"cells": rows, "expected_exit_time": g.total_mass.value}))
}

fn corners_inside(shape: &Shape, lo: &[f64], hi: &[f64]) -> bool {
    [[lo[0], lo[1]], [lo[0], hi[1]], [hi[0], lo[1]], [hi[0], hi[1]]]
        .iter()
        .all(|c| shape.contains(c))
}

/// Probabilities of hitting `B_ε(0)` from distance 1/2 over a geometric
/// ladder of ε, with the fitted decay exponent and the polarity verdict.
pub fn hitting_ladder_value(d: u32, s: f64, n: u32, seed: u32) -> Result<Value> {
    let n = check_budget(n)?;
    if !(1..=3).contains(&d) {
        return Err(Error::Argument("dimension must be 1, 2 or 3".into()));
    }
    let d = d as usize;
    let op = stable(d, s)?;
    let target = Target::Ball {
        center: vec![0.0; d],
        radius: 1.0,
    };
    let mut x = vec![0.0; d];
    x[0] = 0.5;
    let eps = epsilon_ladder(0.5);
    let cfg = PathConfig::wos(seed as u64);
    let evidence = hitting_ladder(&op, &target, &x, &eps, n, &cfg)?;
    let verdict = polar_extrapolate(&evidence, n)?;
    Ok(json!({
        "verdict": verdict.verdict,
        "fitted_exponent": verdict.fitted_exponent,
        "exponent_std_error": verdict.exponent_std_error,
        "reference_exponent": (d as f64 - 2.0 * s).max(0.0),
        "evidence": verdict.evidence,
        "floor": verdict.floor,
    }))
}

fn to_js(r: Result<Value>) -> std::result::Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn exit_law(s: f64, x0: f64, n: u32, bins: u32, seed: u32) -> std::result::Result<String, JsError> {
    to_js(exit_law_value(s, x0, n, bins, seed))
}

#[wasm_bindgen]
pub fn green_profile(s: f64, x0: f64, n: u32, seed: u32) -> std::result::Result<String, JsError> {
    to_js(green_profile_value(s, x0, n, seed))
}

#[wasm_bindgen]
pub fn polarity_ladder(d: u32, s: f64, n: u32, seed: u32) -> std::result::Result<String, JsError> {
    to_js(hitting_ladder_value(d, s, n, seed))
}
