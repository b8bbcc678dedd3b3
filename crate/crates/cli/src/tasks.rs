//! Execution of individual tasks.

use levy_potential::bocher::{decompose, representation_check_kappa1, verify_max_principle};
use levy_potential::kernels::poisson_ball_radial_bins;
use levy_potential::levy::{Domain, DriftField, JumpSpec, Operator, Shape};
use levy_potential::mc::{map_indices, CHUNK};
use levy_potential::path::{simulate_until_exit, PathConfig};
use levy_potential::polarity::{
    epsilon_ladder, hitting_ladder, hyperplane_polarity, lil_singleton_test, polar_extrapolate,
};
use levy_potential::potential::{
    check_duality, check_dynkin, check_killing, check_resolvent_identity, estimate_exterior_hit,
    estimate_green_density, estimate_wv, CellGrid, GreenOracle, NestedBudget,
};
use levy_potential::quad::GaussRule;
use levy_potential::rng::SeedTree;
use levy_potential::stats::{bin_of, chi_square_gof};
use levy_potential::{Error, Result};
use serde_json::{json, Value};

use crate::config::{Built, Scenario, Task};
use crate::report::Row;

/// Result of a task before it is placed in the report.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcome {
    pub metrics: Value,
    pub failures: Vec<String>,
    pub rows: Vec<Row>,
    pub n_effective: u64,
}

struct Checks {
    failures: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self { failures: vec![] }
    }

    fn require(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(msg());
        }
    }

    fn z(&mut self, label: &str, z: f64, z_max: f64) {
        self.require(z < z_max, || format!("{label}: z = {z:.3} ≥ {z_max}"));
    }
}

fn unsupported<T>(msg: &str) -> Result<T> {
    Err(Error::Unsupported(msg.into()))
}

/// Runs one task of a validated scenario.
pub fn execute(task: &Task, sc: &Scenario, built: &Built) -> Result<TaskOutcome> {
    let op = &built.op;
    let cfg = &built.cfg;
    let tol = &sc.tolerances;
    let v = Domain::new(sc.geometry.v.clone());
    let n = sc.path_count(task);
    let mut checks = Checks::new();
    let mut rows = Vec::new();
    let (metrics, n_effective) = match task {
        Task::Poisson { x, bins, .. } => {
            let (metrics, r) = exit_law(op, &v.shape, x, *bins, n, cfg, tol.p_min, &mut checks)?;
            rows = r;
            (metrics, n)
        }
        Task::Green { x, cell, margin, draws, .. } => {
            let oracle = GreenOracle::for_operator(op, &v.shape)
                .ok_or_else(|| Error::Unsupported("no closed-form Green function for this operator and domain".into()))?;
            let grid = CellGrid::covering(&v.shape, *cell)?;
            let cfg = PathConfig {
                occupation_draws: *draws,
                ..*cfg
            };
            let g = estimate_green_density(op, &v, x, &grid, n, &cfg)?;
            let rule = GaussRule::new(6, 0.0, 1.0);
            let (mut max_rel, mut max_z, mut compared) = (0.0f64, 0.0f64, 0usize);
            let mut worst = Value::Null;
            for i in 0..grid.len() {
                let (lo, hi) = grid.bounds(i);
                if !cell_is_interior(&v.shape, &lo, &hi, *margin) || box_distance(x, &lo, &hi) < *margin {
                    continue;
                }
                let exact = cell_average(&rule, &lo, &hi, |y| oracle.eval(x, y));
                let est = &g.density[i];
                let rel = (est.value - exact).abs() / exact;
                max_z = max_z.max((est.value - exact).abs() / est.std_error);
                if rel > max_rel {
                    max_rel = rel;
                    worst = json!({"center": grid.center(i), "estimate": est.value, "exact": exact});
                }
                compared += 1;
                rows.push(Row::new(format!("cell_{i}"), est));
                rows.push(Row::exact(format!("cell_{i}_exact"), exact));
            }
            rows.push(Row::new("total_mass", &g.total_mass));
            checks.require(compared > 0, || "no cell satisfies the margins".into());
            checks.require(max_rel <= tol.rel, || format!("largest relative error {max_rel:.4} > {}", tol.rel));
            (
                json!({"cells_compared": compared, "max_rel_error": max_rel, "max_z_score": max_z, "worst_cell": worst,
                       "total_mass": g.total_mass}),
                g.total_mass.n_samples,
            )
        }
        Task::ExteriorHit { x, u_ext, .. } => {
            let outer = sc.geometry.outer.as_ref().expect("validated");
            let h = estimate_exterior_hit(op, &v, outer, u_ext, x, n, cfg)?;
            checks.z("direct vs Ikeda–Watanabe", h.z_score(), tol.z_max);
            rows.push(Row::new("direct", &h.direct));
            rows.push(Row::new("ikeda_watanabe", &h.iw));
            (json!({"direct": h.direct, "iw": h.iw, "z_score": h.z_score()}), h.direct.n_samples)
        }
        Task::Dynkin { x, b, mu, n_outer, n_inner, .. } => {
            let budget = NestedBudget {
                n_outer: *n_outer,
                n_inner: *n_inner,
            };
            let c = check_dynkin(op, b, &v, mu, x, n, budget, cfg)?;
            checks.z("Dynkin", c.z_score, tol.z_max);
            rows.push(Row::new("lhs", &c.lhs));
            rows.push(Row::new("rhs", &c.rhs));
            rows.push(Row::new("exit_term", &c.exit_term));
            rows.push(Row::new("inner_term", &c.inner_term));
            (serde_json::to_value(c).expect("serialisable"), c.rhs.n_samples)
        }
        Task::Killing { x, f, kappas, .. } => {
            let mut per = Vec::new();
            let mut n_eff = 0;
            for k in kappas {
                let c = check_killing(&op.with_kappa(*k), &v, x, f, n, cfg)?;
                checks.z(&format!("κ = {k}"), c.z_score, tol.z_max);
                rows.push(Row::new(format!("weighted_kappa_{k}"), &c.lhs));
                rows.push(Row::new(format!("per_step_kappa_{k}"), &c.rhs));
                n_eff = c.lhs.n_samples;
                per.push(json!({"kappa": k, "check": c}));
            }
            (json!({ "rates": per }), n_eff)
        }
        Task::Duality { f, g, per_dim, .. } => {
            let c = check_duality(op, &v, f, g, n, *per_dim, cfg)?;
            checks.z("duality", c.z_score, tol.z_max);
            rows.push(Row::new("primal", &c.lhs));
            rows.push(Row::new("dual", &c.rhs));
            (serde_json::to_value(c).expect("serialisable"), c.lhs.n_samples)
        }
        Task::Decompose {
            problem,
            expected_atom,
            removable,
            ..
        } => {
            let spec = sc.problem(problem);
            let dec = decompose(op, &spec, n, cfg)?;
            for (k, a) in dec.atom_coeffs.iter().enumerate() {
                rows.push(Row {
                    estimator_id: format!("atom_{k}"),
                    value: a.coefficient,
                    std_error: a.std_error,
                    n,
                    censored_fraction: 0.0,
                });
            }
            rows.push(Row::exact("residual_rms", dec.residual_rms));
            rows.push(Row::exact("residual_floor", dec.residual_floor));
            rows.push(Row::exact("central_scale", dec.central_scale));
            if let Some(e) = expected_atom {
                match dec.atom_coeffs.first() {
                    None => checks.require(false, || "no singular point to carry the atom".into()),
                    Some(a) => {
                        let rel = (a.coefficient - e).abs() / e.abs();
                        checks.require(a.coefficient > 0.0, || "the atom is not positive".into());
                        checks.require(rel <= tol.rel, || {
                            format!("atom {:.5} differs from {e:.5} by {:.2}%", a.coefficient, 100.0 * rel)
                        });
                    }
                }
                let bound = tol.residual_rel * dec.central_scale;
                checks.require(dec.residual_rms <= bound, || {
                    format!("residual rms {:.4e} > {bound:.4e}", dec.residual_rms)
                });
                checks.require(!dec.inconsistent, || "a coefficient is significantly negative".into());
            }
            if *removable {
                for (k, a) in dec.atom_coeffs.iter().enumerate() {
                    let z = a.unconstrained.abs() / a.std_error;
                    checks.require(z <= tol.k_sigma, || {
                        format!("atom {k}: {:.4e} is {z:.2}σ from zero", a.unconstrained)
                    });
                }
            }
            let atoms: Vec<Value> = dec
                .atom_coeffs
                .iter()
                .map(|a| {
                    json!({"point": a.point, "coefficient": a.coefficient, "unconstrained": a.unconstrained,
                           "std_error": a.std_error})
                })
                .collect();
            (
                json!({"atoms": atoms, "residual_rms": dec.residual_rms, "residual_floor": dec.residual_floor,
                       "central_scale": dec.central_scale, "inconsistent": dec.inconsistent,
                       "density_coeffs": dec.density_coeffs, "grid_points": dec.grid_points.len()}),
                n,
            )
        }
        Task::Representation { problem, .. } => {
            let c = representation_check_kappa1(op, &sc.problem(problem), n, cfg)?;
            checks.z("largest representation", c.max_z_score, tol.z_max);
            for (k, r) in c.rhs.iter().enumerate() {
                rows.push(Row::new(format!("rhs_{k}"), r));
                rows.push(Row::exact(format!("u_{k}"), c.lhs[k]));
            }
            (json!({"z_scores": c.z_scores, "max_z_score": c.max_z_score}), n)
        }
        Task::Maxprin { problem, drifts, .. } => {
            let spec = sc.problem(problem);
            let variants: Vec<Operator> = if drifts.is_empty() {
                vec![op.clone()]
            } else {
                drifts
                    .iter()
                    .map(|k| {
                        let b = DriftField::builtin(op.dim(), k.clone())?;
                        Operator::new(op.triplet.clone(), b, op.kappa)
                    })
                    .collect::<Result<_>>()?
            };
            let mut per = Vec::new();
            for (j, o) in variants.iter().enumerate() {
                let rep = verify_max_principle(o, &spec, n, cfg)?;
                checks.require(rep.passes(tol.k_sigma), || {
                    format!("drift {j}: smallest margin {:.4e} at {:.2}σ", rep.min_margin, rep.min_margin_z)
                });
                for (k, m) in rep.margins.iter().enumerate() {
                    rows.push(Row::new(format!("drift_{j}_margin_{k}"), m));
                }
                per.push(json!({"min_margin": rep.min_margin, "min_margin_z": rep.min_margin_z,
                                "inf_sample": rep.inf_sample, "inf_sample_size": rep.inf_sample_size,
                                "grid_points": rep.grid_points.len()}));
            }
            (json!({ "drifts": per }), n)
        }
        Task::Wv { x, expect_one, .. } => {
            let outer = sc.geometry.outer.as_ref().expect("validated");
            let w = estimate_wv(op, &v, outer, x, n, cfg)?;
            checks.z("direct vs 1 − Ikeda–Watanabe", w.z_score(), tol.z_max);
            if *expect_one {
                checks.require((w.direct.value - 1.0).abs() <= 1e-12, || format!("direct estimate {} ≠ 1", w.direct.value));
                checks.require(w.direct.is_validated(), || {
                    format!("censored fraction {} above 1e-3", w.direct.censored_fraction)
                });
            }
            rows.push(Row::new("direct", &w.direct));
            rows.push(Row::new("one_minus_iw", &w.iw_complement));
            (json!({"direct": w.direct, "iw_complement": w.iw_complement, "z_score": w.z_score()}), w.direct.n_samples)
        }
        Task::LilSingleton { cases } => {
            let mut per = Vec::new();
            for (k, c) in cases.iter().enumerate() {
                let r = lil_singleton_test(&c.jump, c.dim)?;
                checks.require(r.polar == c.polar, || {
                    format!("case {k} (d = {}, {:?}): polar = {}, expected {}", c.dim, c.jump, r.polar, c.polar)
                });
                rows.push(Row::exact(format!("case_{k}_polar"), if r.polar { 1.0 } else { 0.0 }));
                per.push(serde_json::to_value(&r).expect("serialisable"));
            }
            (json!({ "cases": per }), 0)
        }
        Task::Hyperplane { cases } => {
            let mut per = Vec::new();
            for (k, c) in cases.iter().enumerate() {
                let r = hyperplane_polarity(&c.jump, c.dim, c.codim)?;
                checks.require(r.verdict == c.verdict, || {
                    format!("case {k} ({:?}): {:?}, expected {:?}", c.jump, r.verdict, c.verdict)
                });
                per.push(json!({"verdict": r.verdict}));
            }
            (json!({ "cases": per }), 0)
        }
        Task::PolarityLadder {
            target,
            x,
            expect,
            eps,
            exponent,
            exponent_tol,
            kappas,
            ..
        } => {
            let eps = eps
                .clone()
                .unwrap_or_else(|| epsilon_ladder(target.radius() - target.signed_distance(x)));
            let rates = if kappas.is_empty() { vec![op.kappa] } else { kappas.clone() };
            let mut per = Vec::new();
            for (j, k) in rates.iter().enumerate() {
                let ev = hitting_ladder(&op.with_kappa(*k), target, x, &eps, n, cfg)?;
                let verdict = polar_extrapolate(&ev, n)?;
                checks.require(verdict.verdict == *expect, || {
                    format!("κ = {k}: verdict {:?}, expected {expect:?}", verdict.verdict)
                });
                if let (0, Some(e)) = (j, exponent) {
                    match verdict.fitted_exponent {
                        Some(b) => checks.require((b - e).abs() <= *exponent_tol, || {
                            format!("fitted exponent {b:.4} outside {e} ± {exponent_tol}")
                        }),
                        None => checks.require(false, || "no exponent could be fitted".into()),
                    }
                }
                for (r, ev) in verdict.evidence.iter().enumerate() {
                    rows.push(Row {
                        estimator_id: format!("kappa_{k}_rung_{r}"),
                        value: ev.estimate,
                        std_error: ev.std_error,
                        n,
                        censored_fraction: 0.0,
                    });
                }
                per.push(json!({"kappa": k, "verdict": verdict}));
            }
            (json!({ "rates": per }), n)
        }
        Task::ResolventIdentity {
            x,
            f,
            alpha,
            beta,
            n_inner,
            ..
        } => {
            let c = check_resolvent_identity(op, &v, x, f, *alpha, *beta, n, *n_inner, cfg, cfg)?;
            checks.z("resolvent identity", c.z_score, tol.z_max);
            rows.push(Row::new("lhs", &c.lhs));
            rows.push(Row::new("rhs", &c.rhs));
            rows.push(Row::new("direct", &c.direct));
            rows.push(Row::new("nested", &c.nested));
            (serde_json::to_value(c).expect("serialisable"), c.lhs.n_samples)
        }
    };
    Ok(TaskOutcome {
        metrics,
        failures: checks.failures,
        rows,
        n_effective,
    })
}

/// Radial exit law from a ball against its closed form.
#[allow(clippy::too_many_arguments)]
fn exit_law(
    op: &Operator,
    v: &Shape,
    x: &[f64],
    bins: usize,
    n: u64,
    cfg: &PathConfig,
    p_min: f64,
    checks: &mut Checks,
) -> Result<(Value, Vec<Row>)> {
    let JumpSpec::IsotropicStable { s } = op.triplet.jump else {
        return unsupported("the exit-law oracle needs isotropic stable jumps");
    };
    let Shape::Ball { center, radius } = v else {
        return unsupported("the exit-law oracle needs a ball");
    };
    if !op.drift.is_zero() || op.kappa != 0.0 || op.triplet.has_diffusion() || op.triplet.l.iter().any(|l| *l != 0.0) {
        return unsupported("the exit-law oracle needs a pure stable operator without killing");
    }
    let d = x.len();
    let rel: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
    let edges = poisson_ball_radial_bins(d, s, *radius, &rel, bins)?;
    let domain = Domain::new(v.clone());
    let tree = SeedTree::new(cfg.seed).derive("exit_law").point(x);
    let chunks = map_indices(n.div_ceil(CHUNK), |c| -> Result<(Vec<u64>, u64)> {
        let mut counts = vec![0u64; bins];
        let mut censored = 0;
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            let mut rng = tree.index(i).rng();
            let e = simulate_until_exit(&op.triplet, &op.drift, &domain, x, 0.0, cfg, &mut rng)?;
            if e.is_censored() {
                censored += 1;
                continue;
            }
            let r = e.exit_pos.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
            counts[bin_of(&edges, r)] += 1;
        }
        Ok((counts, censored))
    });
    let mut counts = vec![0u64; bins];
    let mut censored = 0;
    for ch in chunks {
        let (c, k) = ch?;
        counts.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        censored += k;
    }
    let probs = vec![1.0 / bins as f64; bins];
    let t = chi_square_gof(&counts, &probs);
    let total: u64 = counts.iter().sum();
    let censored_fraction = censored as f64 / n as f64;
    checks.require(t.p_value > p_min, || format!("chi-square p-value {:.4e} ≤ {p_min}", t.p_value));
    checks.require(censored_fraction <= 1e-3, || format!("censored fraction {censored_fraction} above 1e-3"));
    let rows = counts
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let p = *c as f64 / total as f64;
            Row {
                estimator_id: format!("bin_{k}"),
                value: p,
                std_error: (p * (1.0 - p) / total as f64).sqrt(),
                n: total,
                censored_fraction,
            }
        })
        .collect();
    let finite: Vec<f64> = edges[..bins - 1].to_vec();
    Ok((
        json!({"chi_square": t.statistic, "dof": t.dof, "p_value": t.p_value, "counts": counts,
               "bin_edges": finite, "censored_fraction": censored_fraction}),
        rows,
    ))
}

/// Whether every corner of the box lies in `v` at least `margin` inside.
fn cell_is_interior(v: &Shape, lo: &[f64], hi: &[f64], margin: f64) -> bool {
    let d = lo.len();
    (0..1usize << d).all(|mask| {
        let c: Vec<f64> = (0..d).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect();
        v.contains(&c) && v.boundary_distance(&c) >= margin
    })
}

fn box_distance(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(p, (a, b))| {
            let t = if p < a { a - p } else if p > b { p - b } else { 0.0 };
            t * t
        })
        .sum::<f64>()
        .sqrt()
}

/// Product Gauss average of `f` over a box.
fn cell_average<F: Fn(&[f64]) -> f64>(rule: &GaussRule, lo: &[f64], hi: &[f64], f: F) -> f64 {
    let d = lo.len();
    let m = rule.nodes.len();
    let mut y = vec![0.0; d];
    let mut total = 0.0;
    for mut idx in 0..m.pow(d as u32) {
        let mut w = 1.0;
        for k in 0..d {
            let j = idx % m;
            idx /= m;
            y[k] = lo[k] + rule.nodes[j] * (hi[k] - lo[k]);
            w *= rule.weights[j];
        }
        total += w * f(&y);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_average_is_exact_for_polynomials() {
        let rule = GaussRule::new(6, 0.0, 1.0);
        let v = cell_average(&rule, &[0.0, 1.0], &[2.0, 2.0], |y| y[0] * y[0] * y[1]);
        // (1/2)∫₀² x² dx · ∫₁² y dy = (4/3)(3/2)
        assert!((v - 2.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn interior_cells_and_distances() {
        let b = Shape::centered_ball(2, 1.0);
        assert!(cell_is_interior(&b, &[0.0, 0.0], &[0.1, 0.1], 0.1));
        assert!(!cell_is_interior(&b, &[0.8, 0.0], &[0.9, 0.1], 0.1));
        assert_eq!(box_distance(&[0.05, 0.05], &[0.0, 0.0], &[0.1, 0.1]), 0.0);
        assert!((box_distance(&[0.0, 0.0], &[0.3, 0.4], &[0.5, 0.5]) - 0.5).abs() < 1e-15);
    }
}
