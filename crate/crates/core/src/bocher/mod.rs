//! Decomposition of positive solutions with isolated singularities into a
//! harmonic part, Green atoms on the singular set and measure potentials,
//! together with checks of the representation formula and of the maximum
//! principle.
//!
//! With `κ = 0` a non-negative solution of `−Au + b·∇u + λ = μ₀ + σ_K` on
//! `V ⊂⊂ D` satisfies
//! `u + R^V λ⁺ = E_x u(X_{τ_V}) + R^V μ₀ + R^V σ_K + R^V λ⁻`, so the residual
//! `u + R^V λ⁺ − h − R^V μ₀ − R^V λ⁻` is a non-negative combination of
//! `G_V(·, x_k)` over `x_k ∈ K`.

mod nnls;
mod strength;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use nnls::{nnls, ols_with_errors, NnlsSolution, NNLS_MAX_ITER, NNLS_STEP_TOL};
pub use strength::{singularity_strength, SingularityFit};

use crate::error::{arg, domain, Error, Result};
use crate::levy::domain::{dist, halton, quasi_random_points};
use crate::levy::{kappa0_on, Operator, Shape};
use crate::mc::MCEstimate;
use crate::path::{PathConfig, Region};
use crate::potential::engine::{try_run_paths, try_run_paths_vec, Engine};
use crate::potential::estimators::{atom_green, harmonic_in, resolvent_in, GreenOracle};
use crate::potential::{IdentityCheck, MeasureSpec, ScalarField, SignedMeasure};
use crate::rng::SeedTree;

/// Size of the quasi-random sample of `D∖V` used for the infimum.
pub const INF_SAMPLE_SIZE: usize = 10_000;

/// Where the decomposition is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    /// Halton points of `V` at least two cell sizes away from `K`.
    QuasiRandom { count: usize },
    Points { points: Vec<Vec<f64>> },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::QuasiRandom { count: 20 }
    }
}

/// The regular part `μ₀` of the right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mu0Spec {
    Known { measure: MeasureSpec },
    /// Fit a non-negative density in a tensor hat basis with
    /// `basis_per_dim ∈ [2, 5]` nodes per axis over `V`'s bounding box.
    Unknown { basis_per_dim: usize },
}

impl Default for Mu0Spec {
    fn default() -> Self {
        Mu0Spec::Known {
            measure: MeasureSpec::zero(),
        }
    }
}

fn default_cell() -> f64 {
    0.05
}

/// A positive function `u` with singular set `K ⊂ V ⊂⊂ D` and the measures of
/// its equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub u: ScalarField,
    pub outer: Shape,
    pub v: Shape,
    #[serde(default)]
    pub singular_set: Vec<Vec<f64>>,
    #[serde(default)]
    pub lambda: SignedMeasure,
    #[serde(default)]
    pub mu0: Mu0Spec,
    /// `σ_K`, used only by the forward representation check.
    #[serde(default)]
    pub sigma: MeasureSpec,
    #[serde(default)]
    pub kappa1: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_cell")]
    pub cell: f64,
}

impl ProblemSpec {
    /// A problem with no measures, the default grid and cell size.
    pub fn new(u: ScalarField, outer: Shape, v: Shape, singular_set: Vec<Vec<f64>>) -> Self {
        Self {
            u,
            outer,
            v,
            singular_set,
            lambda: SignedMeasure::default(),
            mu0: Mu0Spec::default(),
            sigma: MeasureSpec::zero(),
            kappa1: 0.0,
            grid: GridSpec::default(),
            cell: default_cell(),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        self.outer.validate()?;
        self.v.validate()?;
        if self.outer.dim() != d || self.v.dim() != d {
            return arg("domain dimension differs from the operator");
        }
        if !self.outer.compactly_contains(&self.v) {
            return domain("the closure of V must lie in D");
        }
        for p in &self.singular_set {
            if p.len() != d || !self.v.contains(p) {
                return domain("singular points must lie in V");
            }
        }
        if !(self.cell > 0.0) || !self.cell.is_finite() {
            return arg("cell size must be positive");
        }
        if !(self.kappa1 >= 0.0) || !self.kappa1.is_finite() {
            return arg("kappa1 must be finite and non-negative");
        }
        self.lambda.positive.validate(&self.v)?;
        self.lambda.negative.validate(&self.v)?;
        self.sigma.validate(&self.v)?;
        match &self.mu0 {
            Mu0Spec::Known { measure } => measure.validate(&self.v)?,
            Mu0Spec::Unknown { basis_per_dim } => {
                if !(2..=5).contains(basis_per_dim) {
                    return arg("the density basis needs 2 to 5 nodes per axis");
                }
            }
        }
        Ok(())
    }

    fn min_dist_to_k(&self, x: &[f64]) -> f64 {
        self.singular_set.iter().map(|p| dist(x, p)).fold(f64::INFINITY, f64::min)
    }

    /// Evaluation points in `V`, each at least `2·cell` from `K`.
    pub fn grid_points(&self) -> Result<Vec<Vec<f64>>> {
        let sep = 2.0 * self.cell;
        match &self.grid {
            GridSpec::Points { points } => {
                if points.is_empty() {
                    return Err(Error::Grid("empty grid".into()));
                }
                for p in points {
                    if p.len() != self.v.dim() || !self.v.contains(p) {
                        return Err(Error::Grid(format!("grid point {p:?} is not in V")));
                    }
                    if self.min_dist_to_k(p) < sep {
                        return Err(Error::Grid(format!(
                            "grid point {p:?} is closer than {sep} to the singular set"
                        )));
                    }
                }
                Ok(points.clone())
            }
            GridSpec::QuasiRandom { count } => {
                if *count == 0 {
                    return Err(Error::Grid("empty grid".into()));
                }
                let (lo, hi) = self.v.bounding_box();
                let d = lo.len();
                let mut out = Vec::with_capacity(*count);
                let mut i = 1u64;
                while out.len() < *count && i < 1000 * *count as u64 + 1000 {
                    let h = halton(i, d);
                    let p: Vec<f64> = (0..d).map(|k| lo[k] + h[k] * (hi[k] - lo[k])).collect();
                    if self.v.contains(&p) && self.min_dist_to_k(&p) >= sep {
                        out.push(p);
                    }
                    i += 1;
                }
                if out.len() < *count {
                    return Err(Error::Grid("V has too little room away from the singular set".into()));
                }
                Ok(out)
            }
        }
    }

    fn u_on(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let vals: Vec<f64> = points.iter().map(|p| self.u.eval(p)).collect();
        if let Some(v) = vals.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return arg(format!("u must be finite and non-negative on sample points, got {v}"));
        }
        Ok(vals)
    }
}

/// Fitted coefficient of `G_V(·, x_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomCoefficient {
    pub point: Vec<f64>,
    /// Non-negative least-squares value.
    pub coefficient: f64,
    /// Unconstrained least-squares value.
    pub unconstrained: f64,
    pub std_error: f64,
}

/// Result of [`decompose`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BocherDecomposition {
    pub grid_points: Vec<Vec<f64>>,
    pub u_values: Vec<f64>,
    /// `E_x u(X_{τ_V})`.
    pub h_values: Vec<MCEstimate>,
    pub atom_coeffs: Vec<AtomCoefficient>,
    /// Hat-basis density coefficients when `μ₀` is fitted.
    pub density_coeffs: Vec<f64>,
    /// `R^V μ₀`, given or fitted.
    pub mu0_potential: Vec<MCEstimate>,
    /// `Σ_k a_k G_V(·, x_k)`.
    pub sigma_potential: Vec<f64>,
    /// `R^V λ = R^V λ⁺ − R^V λ⁻`.
    pub lambda_potential: Vec<MCEstimate>,
    /// Root mean square of the residual after the fit.
    pub residual_rms: f64,
    /// Root mean square of the per-point standard errors of the residual.
    pub residual_floor: f64,
    /// Root mean square of `u` over the grid.
    pub central_scale: f64,
    /// Set when an unconstrained coefficient is below `−3σ`.
    pub inconsistent: bool,
}

/// Tensor hat functions over a box.
struct HatBasis {
    lo: Vec<f64>,
    step: Vec<f64>,
    m: usize,
}

impl HatBasis {
    fn new(region: &Shape, m: usize) -> Self {
        let (lo, hi) = region.bounding_box();
        let step = lo.iter().zip(&hi).map(|(a, b)| (b - a) / (m - 1) as f64).collect();
        Self { lo, step, m }
    }

    fn len(&self) -> usize {
        self.m.pow(self.lo.len() as u32)
    }

    fn eval_all(&self, y: &[f64], w: f64, out: &mut [f64]) {
        let d = self.lo.len();
        for (j, o) in out.iter_mut().enumerate().take(self.len()) {
            let mut k = j;
            let mut v = w;
            for i in 0..d {
                let c = self.lo[i] + (k % self.m) as f64 * self.step[i];
                k /= self.m;
                v *= (1.0 - (y[i] - c).abs() / self.step[i]).max(0.0);
                if v == 0.0 {
                    break;
                }
            }
            *o += v;
        }
    }
}

/// Splits `u` on the grid into harmonic part, measure potentials and Green
/// atoms on `K` (`κ = 0`).
///
/// Atom columns come from the closed-form ball Green function when available
/// and from regularised atoms otherwise. Coefficients are fitted by
/// non-negative least squares; their standard errors are the sandwich errors
/// of the unconstrained fit.
pub fn decompose(op: &Operator, spec: &ProblemSpec, n: u64, cfg: &PathConfig) -> Result<BocherDecomposition> {
    spec.validate(op.dim())?;
    let op0 = op.with_kappa(0.0);
    let points = spec.grid_points()?;
    let u_values = spec.u_on(&points)?;
    let tree = SeedTree::new(cfg.seed).derive("bocher");
    let oracle = GreenOracle::for_operator(&op0, &spec.v);
    let basis = match &spec.mu0 {
        Mu0Spec::Unknown { basis_per_dim } => Some(HatBasis::new(&spec.v, *basis_per_dim)),
        Mu0Spec::Known { .. } => None,
    };
    let nk = spec.singular_set.len();
    let nb = basis.as_ref().map_or(0, HatBasis::len);
    let engine = Engine::new(&op0, cfg)?;

    let mut h_values = Vec::new();
    let mut lambda_potential = Vec::new();
    let mut known_mu0 = Vec::new();
    let mut cols = DMatrix::<f64>::zeros(points.len(), nk + nb);
    let mut resid = DVector::<f64>::zeros(points.len());
    let mut sigma = Vec::new();
    for (i, x) in points.iter().enumerate() {
        let t = tree.point(x);
        let h = harmonic_in(&op0, &spec.v, x, &spec.u, n, cfg, &t.derive("h"))?;
        let lp = resolvent_in(&op0, &spec.v, x, &spec.lambda.positive, n, cfg, &t.derive("lambda+"))?;
        let lm = resolvent_in(&op0, &spec.v, x, &spec.lambda.negative, n, cfg, &t.derive("lambda-"))?;
        let m0 = match &spec.mu0 {
            Mu0Spec::Known { measure } => resolvent_in(&op0, &spec.v, x, measure, n, cfg, &t.derive("mu0"))?,
            Mu0Spec::Unknown { .. } => MCEstimate::zero(),
        };
        for (k, p) in spec.singular_set.iter().enumerate() {
            let g = atom_green(&op0, &spec.v, x, p, n, cfg, &t.derive("atom").index(k as u64), oracle.as_ref())?;
            cols[(i, k)] = g.value;
        }
        if let Some(b) = &basis {
            let st = try_run_paths_vec(n, nb, &t.derive("basis"), |_, rng, out| {
                let e = engine.run(&spec.v, x, cfg, rng, &mut |y, w| b.eval_all(y, w, out))?;
                Ok(!e.is_censored())
            })?;
            for j in 0..nb {
                cols[(i, nk + j)] = st.estimate(j).value;
            }
        }
        let lam = lp.add(&lm.scale(-1.0));
        let r = h.add(&m0).add(&lam.scale(-1.0));
        resid[i] = u_values[i] - r.value;
        sigma.push(r.std_error);
        h_values.push(h);
        lambda_potential.push(lam);
        known_mu0.push(m0);
    }

    let fit = nnls(&cols, &resid);
    let (unconstrained, se) =
        ols_with_errors(&cols, &resid, &sigma).unwrap_or((vec![f64::NAN; nk + nb], vec![f64::NAN; nk + nb]));
    let inconsistent = unconstrained.iter().zip(&se).any(|(c, s)| *c < -3.0 * s);
    let fitted = &cols * DVector::from_column_slice(&fit.coeffs);
    let m = points.len() as f64;
    let residual_rms = ((&resid - &fitted).norm_squared() / m).sqrt();
    let residual_floor = (sigma.iter().map(|s| s * s).sum::<f64>() / m).sqrt();
    let central_scale = (u_values.iter().map(|u| u * u).sum::<f64>() / m).sqrt();
    let sigma_potential = (0..points.len())
        .map(|i| (0..nk).map(|k| fit.coeffs[k] * cols[(i, k)]).sum())
        .collect();
    let density_coeffs = fit.coeffs[nk..].to_vec();
    let mu0_potential = match basis {
        Some(_) => (0..points.len())
            .map(|i| MCEstimate::exact((0..nb).map(|j| density_coeffs[j] * cols[(i, nk + j)]).sum()))
            .collect(),
        None => known_mu0,
    };
    let atom_coeffs = spec
        .singular_set
        .iter()
        .enumerate()
        .map(|(k, p)| AtomCoefficient {
            point: p.clone(),
            coefficient: fit.coeffs[k],
            unconstrained: unconstrained[k],
            std_error: se[k],
        })
        .collect();
    Ok(BocherDecomposition {
        grid_points: points,
        u_values,
        h_values,
        atom_coeffs,
        density_coeffs,
        mu0_potential,
        sigma_potential,
        lambda_potential,
        residual_rms,
        residual_floor,
        central_scale,
        inconsistent,
    })
}

/// Both sides of the representation with killing `κ₁` at every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationCheck {
    pub grid_points: Vec<Vec<f64>>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<MCEstimate>,
    pub z_scores: Vec<f64>,
    pub max_z_score: f64,
}

/// Evaluates
/// `u = E^{κ₁}u(X_{τ_V}) + R^{κ₁}μ₀ + R^{κ₁}σ_K − R^{κ₁}λ + κ₁R^{κ₁}u` on the
/// grid, where the killing of the resolvents is the operator's κ plus `κ₁`.
pub fn representation_check_kappa1(
    op: &Operator,
    spec: &ProblemSpec,
    n: u64,
    cfg: &PathConfig,
) -> Result<RepresentationCheck> {
    spec.validate(op.dim())?;
    let k0 = kappa0_on(&op.drift, &spec.v)?;
    if !(spec.kappa1 > k0) {
        return arg(format!("kappa1 = {} must exceed κ₀ = {k0}", spec.kappa1));
    }
    let Mu0Spec::Known { measure: mu0 } = &spec.mu0 else {
        return arg("the representation check needs μ₀ to be given");
    };
    let op1 = op.with_kappa(op.kappa + spec.kappa1);
    let points = spec.grid_points()?;
    let lhs = spec.u_on(&points)?;
    let tree = SeedTree::new(cfg.seed).derive("representation");
    let u_density = MeasureSpec::density(spec.u.clone());
    let mut rhs = Vec::new();
    for x in &points {
        let t = tree.point(x);
        let r = harmonic_in(&op1, &spec.v, x, &spec.u, n, cfg, &t.derive("h"))?
            .add(&resolvent_in(&op1, &spec.v, x, mu0, n, cfg, &t.derive("mu0"))?)
            .add(&resolvent_in(&op1, &spec.v, x, &spec.sigma, n, cfg, &t.derive("sigma"))?)
            .add(&resolvent_in(&op1, &spec.v, x, &spec.lambda.positive, n, cfg, &t.derive("lambda+"))?.scale(-1.0))
            .add(&resolvent_in(&op1, &spec.v, x, &spec.lambda.negative, n, cfg, &t.derive("lambda-"))?)
            .add(&resolvent_in(&op1, &spec.v, x, &u_density, n, cfg, &t.derive("u"))?.scale(spec.kappa1));
        rhs.push(r);
    }
    let z_scores: Vec<f64> = lhs.iter().zip(&rhs).map(|(l, r)| MCEstimate::exact(*l).z_score(r)).collect();
    let max_z_score = z_scores.iter().copied().fold(0.0, f64::max);
    Ok(RepresentationCheck {
        grid_points: points,
        lhs,
        rhs,
        z_scores,
        max_z_score,
    })
}

/// Margins of `u + R^V λ⁺ ≥ inf_{D∖V} u · P_x(X_{τ_V} ∈ D)` on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    pub grid_points: Vec<Vec<f64>>,
    pub margins: Vec<MCEstimate>,
    /// Direct estimates of `w_V = P_x(X_{τ_V} ∈ D)`.
    pub w_values: Vec<MCEstimate>,
    /// Sample infimum of `u` over `D∖V`. It bounds the true infimum from
    /// above, so the verified inequality is the stronger one.
    pub inf_sample: f64,
    pub inf_sample_size: usize,
    pub min_margin: f64,
    /// Smallest `margin / σ` over the grid.
    pub min_margin_z: f64,
}

impl MaxPrincipleReport {
    /// Every margin is at least `−k` standard errors.
    pub fn passes(&self, k: f64) -> bool {
        self.margins.iter().all(|m| m.value >= -k * m.std_error)
    }
}

/// Sample of `D∖V`: Halton points plus points of `V` near `∂V` projected just
/// outside it.
fn complement_sample(outer: &Shape, v: &Shape) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = quasi_random_points(outer, INF_SAMPLE_SIZE)
        .into_iter()
        .filter(|p| !v.contains(p))
        .collect();
    let shell = 0.05 * v.diameter();
    let mut q = vec![0.0; v.dim()];
    for p in quasi_random_points(v, INF_SAMPLE_SIZE / 5) {
        if v.signed_distance(&p) < shell {
            Region::project_outside(v, &p, &mut q);
            if outer.contains(&q) {
                out.push(q.clone());
            }
        }
    }
    out
}

/// Checks the lower bound of the maximum principle at every grid point.
pub fn verify_max_principle(op: &Operator, spec: &ProblemSpec, n: u64, cfg: &PathConfig) -> Result<MaxPrincipleReport> {
    spec.validate(op.dim())?;
    let op0 = op.with_kappa(0.0);
    let sample = complement_sample(&spec.outer, &spec.v);
    if sample.is_empty() {
        return arg("the sample of D∖V is empty");
    }
    let inf_sample = spec.u_on(&sample)?.into_iter().fold(f64::INFINITY, f64::min);
    let points = spec.grid_points()?;
    let u_values = spec.u_on(&points)?;
    let tree = SeedTree::new(cfg.seed).derive("max_principle");
    let engine = Engine::new(&op0, cfg)?;
    let mut margins = Vec::new();
    let mut w_values = Vec::new();
    for (x, u) in points.iter().zip(&u_values) {
        let t = tree.point(x);
        let w = try_run_paths(n, &t.derive("wv"), |_, rng| {
            let e = engine.exit(&spec.v, x, cfg, rng)?;
            Ok(if e.is_censored() {
                None
            } else {
                Some(if spec.outer.contains(&e.exit_pos) { 1.0 } else { 0.0 })
            })
        })?;
        let lp = resolvent_in(&op0, &spec.v, x, &spec.lambda.positive, n, cfg, &t.derive("lambda+"))?;
        let mut m = lp.add(&w.scale(-inf_sample));
        m.value += u;
        margins.push(m);
        w_values.push(w);
    }
    let min_margin = margins.iter().map(|m| m.value).fold(f64::INFINITY, f64::min);
    let min_margin_z = margins
        .iter()
        .map(|m| {
            if m.std_error > 0.0 {
                m.value / m.std_error
            } else if m.value >= 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min);
    Ok(MaxPrincipleReport {
        grid_points: points,
        margins,
        w_values,
        inf_sample,
        inf_sample_size: sample.len(),
        min_margin,
        min_margin_z,
    })
}

/// Compares `u(x)` with `E_x u(X_{τ_B})` for the ball `B = B(x, radius)`.
pub fn harmonicity_check(
    op: &Operator,
    u: &ScalarField,
    x: &[f64],
    radius: f64,
    n: u64,
    cfg: &PathConfig,
) -> Result<IdentityCheck> {
    if x.len() != op.dim() {
        return arg("point has the wrong dimension");
    }
    if !(radius > 0.0) {
        return arg("radius must be positive");
    }
    let ball = Shape::ball(x.to_vec(), radius);
    let tree = SeedTree::new(cfg.seed).derive("harmonicity").point(x);
    let rhs = harmonic_in(op, &ball, x, u, n, cfg, &tree)?;
    Ok(IdentityCheck::new(MCEstimate::exact(u.eval(x)), rhs))
}

#[cfg(test)]
mod tests;
