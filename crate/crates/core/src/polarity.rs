//! Polarity diagnostics: hitting probabilities of shrinking targets and their
//! log-log extrapolation, the law-of-iterated-logarithm criterion for points
//! and hyperplanes, and a capacity lower bound for balls.

use serde::{Deserialize, Serialize};

use crate::error::{arg, unsupported, Result};
use crate::kernels::riesz_constant;
use crate::levy::domain::{dist, norm};
use crate::levy::{bg_index, bg_index_scan, JumpSpec, Operator, Shape};
use crate::mc::MCEstimate;
use crate::path::{PathConfig, Region};
use crate::potential::engine::{try_run_paths, Engine};
use crate::quad::sphere_rule;
use crate::rng::SeedTree;

/// Smallest log-log slope taken as evidence of decay to zero.
pub const MIN_POLAR_EXPONENT: f64 = 0.15;
/// Rungs of the default ε ladder.
pub const LADDER_RUNGS: usize = 5;

/// Open sets to be hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Ball { center: Vec<f64>, radius: f64 },
    /// `{x : |(x₁, …, x_codim)| < radius}`, a tube around a coordinate
    /// subspace of codimension `codim`.
    Tube { codim: usize, radius: f64 },
}

impl Target {
    /// Positive inside, negative outside; the absolute value is the distance
    /// to the boundary.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self {
            Target::Ball { center, radius } => radius - dist(x, center),
            Target::Tube { codim, radius } => radius - norm(&x[..*codim]),
        }
    }

    fn inward_normal(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let (c, m): (Vec<f64>, usize) = match self {
            Target::Ball { center, .. } => (center.clone(), x.len()),
            Target::Tube { codim, .. } => (vec![0.0; *codim], *codim),
        };
        let r = dist(&x[..m], &c);
        for i in 0..m {
            out[i] = if r > 0.0 { (c[i] - x[i]) / r } else if i == 0 { 1.0 } else { 0.0 };
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            Target::Ball { radius, .. } | Target::Tube { radius, .. } => *radius,
        }
    }

    pub fn with_radius(&self, r: f64) -> Self {
        let mut t = self.clone();
        match &mut t {
            Target::Ball { radius, .. } | Target::Tube { radius, .. } => *radius = r,
        }
        t
    }
}

/// A reference ball with a target removed; leaving it through the target
/// is a hit.
#[derive(Debug, Clone)]
struct Avoiding {
    outer: Shape,
    target: Target,
}

impl Region for Avoiding {
    fn dim(&self) -> usize {
        self.outer.dim()
    }

    fn signed_distance(&self, x: &[f64]) -> f64 {
        self.outer.signed_distance(x).min(-self.target.signed_distance(x))
    }

    fn outward_normal(&self, x: &[f64], out: &mut [f64]) {
        if -self.target.signed_distance(x) < self.outer.signed_distance(x) {
            self.target.inward_normal(x, out);
        } else {
            self.outer.outward_normal(x, out);
        }
    }

    fn scale(&self) -> f64 {
        0.5 * self.outer.diameter()
    }
}

/// Probability of entering `target` before leaving `reference` and before
/// `horizon` (Euler only), with the Feynman–Kac weight of the operator's κ.
///
/// Walk-on-spheres is used when `cfg` asks for it and the operator admits it.
pub fn hitting_probability(
    op: &Operator,
    target: &Target,
    reference: &Shape,
    x: &[f64],
    horizon: f64,
    n: u64,
    cfg: &PathConfig,
) -> Result<MCEstimate> {
    if x.len() != op.dim() || reference.dim() != op.dim() {
        return arg("dimension mismatch");
    }
    if let Target::Ball { center, .. } = target {
        if center.len() != op.dim() {
            return arg("target dimension mismatch");
        }
    }
    if let Target::Tube { codim, .. } = target {
        if *codim == 0 || *codim > op.dim() {
            return arg("tube codimension must lie in 1..=d");
        }
    }
    if target.signed_distance(x) >= 0.0 {
        return arg("the starting point lies in the closed target");
    }
    if !(target.radius() > 0.0) {
        return arg("target radius must be positive");
    }
    if !reference.contains(x) {
        return arg("the starting point must lie in the reference ball");
    }
    let mut c = *cfg;
    if horizon.is_finite() {
        c.horizon = horizon;
    }
    let region = Avoiding {
        outer: reference.clone(),
        target: target.clone(),
    };
    let engine = Engine::new(op, &c)?;
    let tree = SeedTree::new(cfg.seed).derive("hitting").point(x).derive(&format!("{:e}", target.radius()));
    try_run_paths(n, &tree, |_, rng| {
        let e = engine.exit(&region, x, &c, rng)?;
        if e.is_censored() || e.is_killed() {
            return Ok(Some(0.0));
        }
        Ok(Some(if target.signed_distance(&e.exit_pos) > 0.0 { e.fk_weight } else { 0.0 }))
    })
}

/// Geometric ε ladder: `LADDER_RUNGS` rungs of ratio 1/2 from `dist/8`.
pub fn epsilon_ladder(dist_to_center: f64) -> Vec<f64> {
    (0..LADDER_RUNGS).map(|k| dist_to_center / 8.0 * 0.5f64.powi(k as i32)).collect()
}

/// One rung of a hitting ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub eps: f64,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Polar,
    Nonpolar,
    Inconclusive,
}

/// Verdict with the fitted decay exponent and the evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarityVerdict {
    pub verdict: Verdict,
    pub fitted_exponent: Option<f64>,
    pub exponent_std_error: Option<f64>,
    pub evidence: Vec<Evidence>,
    /// Detection floor `10/n`.
    pub floor: f64,
}

/// Hitting probabilities of `target` scaled to each ε of the ladder, with a
/// reference ball of radius `10·|x − c|` around the target's centre `c`
/// (the origin for tubes).
pub fn hitting_ladder(
    op: &Operator,
    target: &Target,
    x: &[f64],
    eps: &[f64],
    n: u64,
    cfg: &PathConfig,
) -> Result<Vec<Evidence>> {
    let center = match target {
        Target::Ball { center, .. } => center.clone(),
        Target::Tube { .. } => vec![0.0; x.len()],
    };
    let d0 = match target {
        Target::Ball { .. } => dist(x, &center),
        Target::Tube { codim, .. } => norm(&x[..*codim]),
    };
    let reference = Shape::ball(center, 10.0 * d0.max(norm(x)));
    eps.iter()
        .map(|&e| {
            let m = hitting_probability(op, &target.with_radius(e), &reference, x, cfg.horizon, n, cfg)?;
            Ok(Evidence {
                eps: e,
                estimate: m.value,
                std_error: m.std_error,
            })
        })
        .collect()
}

/// Fits `log p = α + β log ε` by weighted least squares and classifies.
///
/// * all estimates zero: polar;
/// * `β − 2σ_β > MIN_POLAR_EXPONENT` and the ladder non-increasing within two
///   standard errors: polar, since the power law extrapolates to 0 at ε = 0;
/// * `β + 2σ_β < MIN_POLAR_EXPONENT` and the smallest rung more than two
///   standard errors above the floor `10/n`: non-polar;
/// * otherwise inconclusive.
pub fn polar_extrapolate(evidence: &[Evidence], n: u64) -> Result<PolarityVerdict> {
    if evidence.len() < 4 {
        return arg("extrapolation needs at least four rungs");
    }
    if evidence.iter().any(|e| !(e.eps > 0.0)) || evidence.windows(2).any(|w| w[1].eps >= w[0].eps) {
        return arg("ε must be positive and strictly decreasing along the ladder");
    }
    let floor = 10.0 / n.max(1) as f64;
    let mut out = PolarityVerdict {
        verdict: Verdict::Inconclusive,
        fitted_exponent: None,
        exponent_std_error: None,
        evidence: evidence.to_vec(),
        floor,
    };
    if evidence.iter().all(|e| e.estimate == 0.0) {
        out.verdict = Verdict::Polar;
        return Ok(out);
    }
    let pts: Vec<(f64, f64, f64)> = evidence
        .iter()
        .filter(|e| e.estimate > 0.0)
        .map(|e| {
            let rel = (e.std_error / e.estimate).max(1e-6);
            (e.eps.ln(), e.estimate.ln(), 1.0 / (rel * rel))
        })
        .collect();
    if pts.len() < 3 {
        return Ok(out);
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let beta = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let resid: f64 = pts.iter().map(|p| p.2 * (p.1 - my - beta * (p.0 - mx)).powi(2)).sum();
    // inflate by the reduced chi-square when the scatter exceeds the errors
    let dof = (pts.len() - 2) as f64;
    let se = (resid / dof).max(1.0).sqrt() / sxx.sqrt();
    out.fitted_exponent = Some(beta);
    out.exponent_std_error = Some(se);
    let non_increasing = evidence
        .windows(2)
        .all(|w| w[1].estimate <= w[0].estimate + 2.0 * w[0].std_error.hypot(w[1].std_error));
    let last = evidence[evidence.len() - 1];
    out.verdict = if beta - 2.0 * se > MIN_POLAR_EXPONENT && non_increasing {
        Verdict::Polar
    } else if beta + 2.0 * se < MIN_POLAR_EXPONENT && last.estimate - 2.0 * last.std_error > floor {
        Verdict::Nonpolar
    } else {
        Verdict::Inconclusive
    };
    Ok(out)
}

/// Outcome of the law-of-iterated-logarithm criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilVerdict {
    pub polar: bool,
    /// The window `(β_L ∨ 1, d)`, or `None` when it is empty.
    pub gamma_window: Option<(f64, f64)>,
    /// The window from the closed-form cylindrical index in the literature
    /// when it differs from the scan.
    pub alternative_window: Option<(f64, f64)>,
    pub criterion: String,
}

fn window(beta: f64, top: f64) -> Option<(f64, f64)> {
    let lo = beta.max(1.0);
    (lo < top).then_some((lo, top))
}

/// Points are polar when `γ ∈ (β_L ∨ 1, d)` exists, i.e. for `d ≥ 2`; in
/// `d = 1` stable motion hits points iff `2s > 1`.
pub fn lil_singleton_test(jump: &JumpSpec, d: usize) -> Result<LilVerdict> {
    if jump.is_none() {
        return unsupported("the criterion needs a jump part");
    }
    jump.validate(d)?;
    let beta = bg_index(jump)?;
    let scan = bg_index_scan(jump, d)?;
    let gamma_window = window(beta, d as f64);
    let alternative_window = scan.discrepancy().and(scan.literature_min_formula).and_then(|b| window(b, d as f64));
    if gamma_window.is_some() {
        return Ok(LilVerdict {
            polar: true,
            gamma_window,
            alternative_window,
            criterion: "non-empty γ window".into(),
        });
    }
    Ok(LilVerdict {
        polar: kesten_points_polar(jump, 1)?,
        gamma_window: None,
        alternative_window,
        criterion: "Kesten integral test of the symbol".into(),
    })
}

/// Analytic verdict for the coordinate subspace `{x₁ = … = x_codim = 0}`:
/// polar when the projected process has a non-empty window
/// `(β_{Π(L)} ∨ 1, 2)` or, failing that, when points are polar for the
/// projected process by Kesten's test; inconclusive otherwise.
pub fn hyperplane_polarity(jump: &JumpSpec, d: usize, codim: usize) -> Result<PolarityVerdict> {
    if codim < 2 {
        return unsupported("the hyperplane criterion needs codimension at least 2");
    }
    if d < 3 || codim > d {
        return arg("the hyperplane criterion needs d ≥ 3 and codim ≤ d");
    }
    jump.validate(d)?;
    if jump.is_none() {
        return unsupported("the criterion needs a jump part");
    }
    let projected = project_jump(jump, codim);
    let beta = match &projected {
        JumpSpec::MixedLaplacianStable { .. } => 2.0,
        j => bg_index(j)?,
    };
    let polar = window(beta, 2.0).is_some() || kesten_points_polar(&projected, codim)?;
    Ok(PolarityVerdict {
        verdict: if polar { Verdict::Polar } else { Verdict::Inconclusive },
        fitted_exponent: None,
        exponent_std_error: None,
        evidence: vec![],
        floor: 0.0,
    })
}

/// Jump part of the projection onto the first `k` coordinates.
pub fn project_jump(jump: &JumpSpec, k: usize) -> JumpSpec {
    match jump {
        JumpSpec::CylindricalStable { s } => JumpSpec::CylindricalStable { s: s[..k].to_vec() },
        j => j.clone(),
    }
}

/// Kesten's test for the symmetric Lévy process in `ℝ^k` generated by
/// `jump` (plus its own Gaussian part, if any): points are polar iff
/// `∫ 1/(1 + ψ(ξ)) dξ = ∞`.
///
/// Divergence is read off the ratio of the integrals over two consecutive
/// dyadic shells far out, where `1/(1+ψ)` behaves like a power.
pub fn kesten_points_polar(jump: &JumpSpec, k: usize) -> Result<bool> {
    if jump.is_none() {
        return unsupported("the test needs a jump part");
    }
    jump.validate(k)?;
    let rule = sphere_rule(k, if k == 2 { 256 } else { 48 });
    let gauss = crate::quad::GaussRule::new(32, 0.0, 1.0);
    let shell = |m: i32| {
        let (lo, hi) = (2f64.powi(m), 2f64.powi(m + 1));
        let mut xi = vec![0.0; k];
        let mut total = 0.0;
        for (t, wt) in gauss.nodes.iter().zip(&gauss.weights) {
            let r = lo + t * (hi - lo);
            let mut ang = 0.0;
            for (theta, w) in &rule {
                for i in 0..k {
                    xi[i] = r * theta[i];
                }
                ang += w / (1.0 + jump.symbol(&xi));
            }
            total += wt * (hi - lo) * r.powi(k as i32 - 1) * ang;
        }
        total
    };
    Ok(shell(31) / shell(30) >= 1.0 - 1e-6)
}

/// Lower bound on the capacity of `B_ε(x₀)` from the uniform trial
/// measure: `μ(B)/sup_B Gμ` with the free Riesz kernel, which dominates the
/// killed Green function for every `κ ≥ 0`.
///
/// The potential of the uniform measure at a point `a` is
/// `C/(2s|B_ε|) ∫_S t(θ)^{2s} dθ` with `t(θ)` the length of the ray from `a`
/// to `∂B_ε`; its supremum is taken over radial samples.
pub fn capacity_estimate(jump: &JumpSpec, x0: &[f64], eps: f64, mass: f64, kappa: f64) -> Result<f64> {
    let d = x0.len();
    let JumpSpec::IsotropicStable { s } = jump else {
        return unsupported("the capacity bound needs the isotropic stable kernel");
    };
    let s = *s;
    if (d as f64) <= 2.0 * s {
        return unsupported("no free Riesz kernel for d ≤ 2s");
    }
    if !(eps > 0.0) || !(mass >= 0.0) || !(kappa >= 0.0) {
        return arg("ε must be positive and mass and κ non-negative");
    }
    if mass == 0.0 {
        return Ok(0.0);
    }
    let rule = sphere_rule(d, if d == 2 { 256 } else { 48 });
    let vol = crate::quad::ball_volume(d) * eps.powi(d as i32);
    let c = riesz_constant(d, s);
    let mut sup: f64 = 0.0;
    for k in 0..=8 {
        let a = eps * k as f64 / 8.0;
        let mut acc = 0.0;
        for (theta, w) in &rule {
            // ray from a·e₁: t² + 2t a θ₁ + a² − ε² = 0
            let b = a * theta[0];
            let t = -b + (b * b + eps * eps - a * a).max(0.0).sqrt();
            acc += w * t.powf(2.0 * s);
        }
        sup = sup.max(c / (2.0 * s * vol) * acc);
    }
    // trial measure of total mass `mass` has potential mass·sup; rescaled to
    // potential 1 its mass is 1/sup
    Ok(mass / (mass * sup))
}
