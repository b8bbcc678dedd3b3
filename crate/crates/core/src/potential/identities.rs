use rand::Rng;
use serde::{Deserialize, Serialize};

use super::engine::{try_run_paths, Engine};
use super::estimators::{occupation_estimate, resolvent_in};
use super::field::{product_nodes, MeasureSpec, ScalarField};
use crate::error::{arg, domain, Error, Result};
use crate::levy::{Domain, Operator, Shape};
use crate::mc::MCEstimate;
use crate::path::{KillingMode, PathConfig, Scheme};
use crate::rng::SeedTree;

/// Two estimates of the same quantity from independent path systems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: MCEstimate,
    pub rhs: MCEstimate,
    pub z_score: f64,
}

impl IdentityCheck {
    pub fn new(lhs: MCEstimate, rhs: MCEstimate) -> Self {
        Self {
            lhs,
            rhs,
            z_score: lhs.z_score(&rhs),
        }
    }

    pub fn passes(&self, z_max: f64) -> bool {
        self.z_score < z_max
    }
}

/// Largest `n_outer · n_inner` accepted by nested estimators.
pub const NESTED_PATH_CAP: u64 = 20_000_000;

/// Outer and inner path counts of a nested estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NestedBudget {
    pub n_outer: u64,
    pub n_inner: u64,
}

impl Default for NestedBudget {
    fn default() -> Self {
        Self {
            n_outer: 1000,
            n_inner: 100,
        }
    }
}

impl NestedBudget {
    fn check(&self) -> Result<()> {
        if self.n_outer == 0 || self.n_inner == 0 {
            return arg("nested budget must be positive");
        }
        match self.n_outer.checked_mul(self.n_inner) {
            Some(t) if t <= NESTED_PATH_CAP => Ok(()),
            _ => Err(Error::Budget {
                requested: self.n_outer.saturating_mul(self.n_inner),
                cap: NESTED_PATH_CAP,
            }),
        }
    }
}

/// Dynkin's formula `E_x[e^{−κτ_B} R^V μ(X_{τ_B})] + R^B μ(x) = R^V μ(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynkinCheck {
    pub lhs: MCEstimate,
    pub rhs: MCEstimate,
    pub z_score: f64,
    /// The nested exit term `E_x[e^{−κτ_B} R^V μ(X_{τ_B})]`.
    pub exit_term: MCEstimate,
    /// `R^B μ(x)`.
    pub inner_term: MCEstimate,
}

/// Checks Dynkin's formula for a ball `B ⊂ V`.
///
/// The exit term is nested: each of `budget.n_outer` paths runs to `τ_B`
/// and the resolvent at its exit point is estimated from `budget.n_inner`
/// fresh paths. Both remaining terms use `n` paths each.
#[allow(clippy::too_many_arguments)]
pub fn check_dynkin(
    op: &Operator,
    b: &Shape,
    v: &Domain,
    mu: &MeasureSpec,
    x: &[f64],
    n: u64,
    budget: NestedBudget,
    cfg: &PathConfig,
) -> Result<DynkinCheck> {
    budget.check()?;
    if !matches!(b, Shape::Ball { .. }) {
        return arg("B must be a ball");
    }
    if b != &v.shape && !v.shape.compactly_contains(b) {
        return arg("B must be contained in V");
    }
    if !b.contains(x) {
        return domain("x must lie in B");
    }
    let tree = SeedTree::new(cfg.seed).derive("dynkin").point(x);
    let engine = Engine::new(op, cfg)?;
    let inner_tree = tree.derive("inner");
    let exit_term = try_run_paths(budget.n_outer, &tree.derive("outer"), |i, rng| {
        let e = engine.exit(b, x, cfg, rng)?;
        if e.is_censored() {
            return Ok(None);
        }
        if e.is_killed() || !v.shape.contains(&e.exit_pos) {
            return Ok(Some(0.0));
        }
        let r = resolvent_in(op, &v.shape, &e.exit_pos, mu, budget.n_inner, cfg, &inner_tree.index(i))?;
        Ok(Some(e.fk_weight * r.value))
    })?;
    let inner_term = resolvent_in(op, b, x, mu, n, cfg, &tree.derive("ball"))?;
    let rhs = resolvent_in(op, &v.shape, x, mu, n, cfg, &tree.derive("rhs"))?;
    let lhs = exit_term.add(&inner_term);
    Ok(DynkinCheck {
        lhs,
        rhs,
        z_score: lhs.z_score(&rhs),
        exit_term,
        inner_term,
    })
}

/// Outer quadrature nodes for `∫_V g · (·)`: a product Gauss rule over the
/// support box of `g` when it is known, else over `V`.
fn outer_nodes(v: &Shape, g: &ScalarField, per_dim: usize) -> Vec<(Vec<f64>, f64)> {
    let region = match g.support_box() {
        Some((lo, hi)) if lo.len() == v.dim() => Shape::Box { lo, hi },
        _ => v.clone(),
    };
    product_nodes(&region, per_dim)
        .into_iter()
        .filter(|(x, _)| v.contains(x) && g.eval(x) != 0.0)
        .collect()
}

/// `Σ_j w_j g(x_j) R f(x_j)` with independent path systems per node.
#[allow(clippy::too_many_arguments)]
fn bilinear(
    engine: &Engine,
    v: &Shape,
    f: &ScalarField,
    g: &ScalarField,
    n: u64,
    per_dim: usize,
    cfg: &PathConfig,
    tree: &SeedTree,
) -> Result<MCEstimate> {
    let nodes = outer_nodes(v, g, per_dim);
    let fe = |y: &[f64]| f.eval(y);
    let mut value = 0.0;
    let mut var = 0.0;
    let mut n_samples = 0;
    let mut censored: f64 = 0.0;
    for (x, w) in &nodes {
        let c = w * g.eval(x);
        let e = occupation_estimate(engine, v, x, &fe, n, cfg, &tree.point(x))?;
        value += c * e.value;
        var += (c * e.std_error).powi(2);
        n_samples += e.n_samples;
        censored = censored.max(e.censored_fraction);
    }
    Ok(MCEstimate {
        value,
        std_error: var.sqrt(),
        n_samples,
        censored_fraction: censored,
    })
}

/// Duality `∫ g R^{κ,V} f = ∫ f R^{κ,*,V} g`.
///
/// The left side uses the process itself; the right side uses the dual
/// process with drift `+b` and weight `exp ∫(div b − κ)`. Each side is an
/// outer product Gauss rule with `per_dim` nodes per axis over the support
/// of the outer density and `n` paths per node.
#[allow(clippy::too_many_arguments)]
pub fn check_duality(
    op: &Operator,
    v: &Domain,
    f: &ScalarField,
    g: &ScalarField,
    n: u64,
    per_dim: usize,
    cfg: &PathConfig,
) -> Result<IdentityCheck> {
    if per_dim == 0 {
        return arg("quadrature needs at least one node per axis");
    }
    let tree = SeedTree::new(cfg.seed).derive("duality");
    let primal = Engine::new(op, cfg)?;
    let dual = Engine::dual(op, cfg)?;
    let lhs = bilinear(&primal, &v.shape, f, g, n, per_dim, cfg, &tree.derive("lhs"))?;
    let rhs = bilinear(&dual, &v.shape, g, f, n, per_dim, cfg, &tree.derive("rhs"))?;
    Ok(IdentityCheck::new(lhs, rhs))
}

/// Killing identity: `E_x[e^{−κτ_V} f(X_{τ_V})]` from weighted paths
/// against paths killed step by step at rate κ.
pub fn check_killing(
    op: &Operator,
    v: &Domain,
    x: &[f64],
    f: &ScalarField,
    n: u64,
    cfg: &PathConfig,
) -> Result<IdentityCheck> {
    if cfg.scheme != Scheme::Euler {
        return arg("the killing identity needs time-stepped paths");
    }
    if !v.contains(x) {
        return domain("x must lie in V");
    }
    let tree = SeedTree::new(cfg.seed).derive("killing").point(x);
    let run = |mode: KillingMode, label: &str| -> Result<MCEstimate> {
        let c = cfg.with_killing(mode);
        let engine = Engine::new(op, &c)?;
        try_run_paths(n, &tree.derive(label), |_, rng| {
            let e = engine.exit(&v.shape, x, &c, rng)?;
            Ok(if e.is_censored() { None } else { Some(e.weighted(|z| f.eval(z))) })
        })
    };
    let weighted = run(KillingMode::Weight, "weighted")?;
    let killed = run(KillingMode::PerStep, "per_step")?;
    Ok(IdentityCheck::new(weighted, killed))
}

/// Resolvent identity `R_α f = R_β f + (β − α) R_α(R_β f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventCheck {
    pub lhs: MCEstimate,
    pub rhs: MCEstimate,
    pub z_score: f64,
    /// `R_β f(x)`.
    pub direct: MCEstimate,
    /// The nested term `R_α(R_β f)(x)`.
    pub nested: MCEstimate,
}

/// Checks the resolvent identity at `x` for rates `α < β`.
///
/// The nested term picks one occupation point per outer path with
/// probability proportional to its weight, so `W·R_β f(Y)` is unbiased for
/// `R_α(R_β f)(x)`; the inner value uses `n_inner` paths. Runs at rate α use
/// `cfg_alpha`, runs at rate β use `cfg_beta`.
#[allow(clippy::too_many_arguments)]
pub fn check_resolvent_identity(
    op: &Operator,
    v: &Domain,
    x: &[f64],
    f: &ScalarField,
    alpha: f64,
    beta: f64,
    n: u64,
    n_inner: u64,
    cfg_alpha: &PathConfig,
    cfg_beta: &PathConfig,
) -> Result<ResolventCheck> {
    if !(0.0 <= alpha && alpha < beta) {
        return arg("rates must satisfy 0 ≤ α < β");
    }
    NestedBudget { n_outer: n, n_inner }.check()?;
    if !v.contains(x) {
        return domain("x must lie in V");
    }
    let op_a = op.with_kappa(alpha);
    let op_b = op.with_kappa(beta);
    let tree = SeedTree::new(cfg_alpha.seed).derive("resolvent_identity").point(x);
    let mu = MeasureSpec::density(f.clone());
    let lhs = resolvent_in(&op_a, &v.shape, x, &mu, n, cfg_alpha, &tree.derive("lhs"))?;
    let direct = resolvent_in(&op_b, &v.shape, x, &mu, n, cfg_beta, &tree.derive("beta"))?;
    let engine = Engine::new(&op_a, cfg_alpha)?;
    let inner_tree = tree.derive("inner");
    let nested = try_run_paths(n, &tree.derive("outer"), |i, rng| {
        let mut pts: Vec<(Vec<f64>, f64)> = Vec::new();
        let e = engine.run(&v.shape, x, cfg_alpha, rng, &mut |y, w| pts.push((y.to_vec(), w)))?;
        if e.is_censored() {
            return Ok(None);
        }
        let total: f64 = pts.iter().map(|p| p.1).sum();
        if total <= 0.0 {
            return Ok(Some(0.0));
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = pts.len() - 1;
        for (k, (_, w)) in pts.iter().enumerate() {
            if u < *w {
                pick = k;
                break;
            }
            u -= w;
        }
        let y = &pts[pick].0;
        if !v.contains(y) {
            return Ok(Some(0.0));
        }
        let r = resolvent_in(&op_b, &v.shape, y, &mu, n_inner, cfg_beta, &inner_tree.index(i))?;
        Ok(Some(total * r.value))
    })?;
    let rhs = direct.add(&nested.scale(beta - alpha));
    Ok(ResolventCheck {
        lhs,
        rhs,
        z_score: lhs.z_score(&rhs),
        direct,
        nested,
    })
}
