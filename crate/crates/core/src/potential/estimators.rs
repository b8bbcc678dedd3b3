use serde::{Deserialize, Serialize};

use super::engine::{try_run_paths, try_run_paths_vec, Engine};
use super::exterior::{ExteriorCharge, ExteriorIntensity};
use super::field::{MeasureSpec, ScalarField};
use crate::error::{arg, domain, unsupported, Result};
use crate::kernels::green_ball;
use crate::levy::domain::dist;
use crate::levy::{Domain, JumpSpec, Operator, Shape};
use crate::mc::{Kahan, MCEstimate};
use crate::path::{wos_kind, PathConfig, Region, WosKind};
use crate::rng::SeedTree;

/// Regularisation radii for atoms without a Green oracle, as fractions of
/// the domain diameter.
pub const ATOM_LADDER: [f64; 3] = [0.08, 0.04, 0.02];

fn check_point(v: &Shape, x: &[f64]) -> Result<()> {
    if x.len() != v.dim() {
        return arg("point has the wrong dimension");
    }
    if !v.contains(x) {
        return domain("evaluation point must lie in the domain");
    }
    Ok(())
}

/// Closed-form Green function of a centred-or-shifted ball for isotropic
/// stable motion or Brownian motion with `Q = qI`, both without drift and
/// without killing.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenOracle {
    d: usize,
    s: f64,
    center: Vec<f64>,
    radius: f64,
    factor: f64,
}

impl GreenOracle {
    pub fn for_operator(op: &Operator, v: &Shape) -> Option<Self> {
        if op.kappa != 0.0 {
            return None;
        }
        let Shape::Ball { center, radius } = v else {
            return None;
        };
        let (s, factor) = match wos_kind(&op.triplet, &op.drift).ok()? {
            WosKind::Stable { s } => (s, 1.0),
            WosKind::Brownian { q } => (1.0, 1.0 / q),
        };
        Some(Self {
            d: op.dim(),
            s,
            center: center.clone(),
            radius: *radius,
            factor,
        })
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let xs: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let ys: Vec<f64> = y.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        self.factor * green_ball(self.d, self.s, self.radius, &xs, &ys).unwrap_or(0.0)
    }
}

/// Mean occupation functional `∫₀^τ W_t f(X_t) dt` over `n` paths.
pub(crate) fn occupation_estimate<G: Region + ?Sized>(
    engine: &Engine,
    v: &G,
    x: &[f64],
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    n: u64,
    cfg: &PathConfig,
    tree: &SeedTree,
) -> Result<MCEstimate> {
    try_run_paths(n, tree, |_, rng| {
        let mut acc = Kahan::default();
        let e = engine.run(v, x, cfg, rng, &mut |y, w| acc.add(w * f(y)))?;
        Ok(if e.is_censored() { None } else { Some(acc.value()) })
    })
}

/// Intercept of the least-squares fit `v(ε) = a + c ε²`, with its standard
/// error propagated from independent rung estimates.
pub fn richardson_eps2(eps: &[f64], vals: &[MCEstimate]) -> Result<MCEstimate> {
    if eps.len() != vals.len() || eps.len() < 2 {
        return arg("Richardson fit needs at least two rungs");
    }
    let m = eps.len() as f64;
    let s1: f64 = eps.iter().map(|e| e * e).sum();
    let s2: f64 = eps.iter().map(|e| e.powi(4)).sum();
    let det = m * s2 - s1 * s1;
    if det.abs() < 1e-300 {
        return arg("Richardson rungs must be distinct");
    }
    let mut value = 0.0;
    let mut var = 0.0;
    for (e, v) in eps.iter().zip(vals) {
        let a = (s2 - s1 * e * e) / det;
        value += a * v.value;
        var += (a * v.std_error).powi(2);
    }
    Ok(MCEstimate {
        value,
        std_error: var.sqrt(),
        n_samples: vals.iter().map(|v| v.n_samples).sum(),
        censored_fraction: vals.iter().map(|v| v.censored_fraction).fold(0.0, f64::max),
    })
}

/// `G_V(x, p)` by the oracle or by regularised atoms.
#[allow(clippy::too_many_arguments)]
pub(crate) fn atom_green(
    op: &Operator,
    v: &Shape,
    x: &[f64],
    p: &[f64],
    n: u64,
    cfg: &PathConfig,
    tree: &SeedTree,
    oracle: Option<&GreenOracle>,
) -> Result<MCEstimate> {
    if dist(x, p) == 0.0 {
        return domain("the Green function is singular at the atom itself");
    }
    if !v.contains(p) {
        return Ok(MCEstimate::zero());
    }
    if let Some(o) = oracle {
        return Ok(MCEstimate::exact(o.eval(x, p)));
    }
    let diam = v.diameter();
    let engine = Engine::new(op, cfg)?;
    let mut eps = Vec::new();
    let mut vals = Vec::new();
    for (k, frac) in ATOM_LADDER.iter().enumerate() {
        let e = frac * diam;
        let ball = Shape::ball(p.to_vec(), e);
        if !v.compactly_contains(&ball) || dist(x, p) <= e {
            return unsupported(format!(
                "no Green evaluation method for the atom at {p:?}: it is within {e} of the boundary or of x"
            ));
        }
        let dens = 1.0 / ball.volume();
        let f = move |y: &[f64]| if dist(y, p) <= e { dens } else { 0.0 };
        vals.push(occupation_estimate(&engine, v, x, &f, n, cfg, &tree.index(k as u64))?);
        eps.push(e);
    }
    richardson_eps2(&eps, &vals)
}

/// `R^{κ,V} μ(x) = E_x ∫₀^{τ_V} e^{−κt} μ(X_t) dt` for a density-plus-atoms
/// measure.
pub fn estimate_resolvent(
    op: &Operator,
    v: &Domain,
    x: &[f64],
    mu: &MeasureSpec,
    n: u64,
    cfg: &PathConfig,
) -> Result<MCEstimate> {
    let tree = SeedTree::new(cfg.seed).derive("resolvent").point(x);
    resolvent_in(op, &v.shape, x, mu, n, cfg, &tree)
}

pub(crate) fn resolvent_in(
    op: &Operator,
    v: &Shape,
    x: &[f64],
    mu: &MeasureSpec,
    n: u64,
    cfg: &PathConfig,
    tree: &SeedTree,
) -> Result<MCEstimate> {
    check_point(v, x)?;
    let mut total = MCEstimate::zero();
    if let Some(f) = mu.density.as_ref().filter(|f| !f.is_zero()) {
        let engine = Engine::new(op, cfg)?;
        let g = |y: &[f64]| f.eval(y);
        total = total.add(&occupation_estimate(&engine, v, x, &g, n, cfg, &tree.derive("density"))?);
    }
    if mu.atoms.iter().any(|a| a.mass != 0.0) {
        let oracle = GreenOracle::for_operator(op, v);
        for (k, a) in mu.atoms.iter().enumerate() {
            if a.mass == 0.0 {
                continue;
            }
            let g = atom_green(op, v, x, &a.point, n, cfg, &tree.derive("atom").index(k as u64), oracle.as_ref())?;
            total = total.add(&g.scale(a.mass));
        }
    }
    Ok(total)
}

/// `Π^κ_V u(x) = E_x[e^{−κτ_V} u(X_{τ_V})]`.
pub fn estimate_harmonic_extension(
    op: &Operator,
    v: &Domain,
    x: &[f64],
    u: &ScalarField,
    n: u64,
    cfg: &PathConfig,
) -> Result<MCEstimate> {
    let tree = SeedTree::new(cfg.seed).derive("harmonic").point(x);
    harmonic_in(op, &v.shape, x, u, n, cfg, &tree)
}

pub(crate) fn harmonic_in<G: Region + ?Sized>(
    op: &Operator,
    v: &G,
    x: &[f64],
    u: &ScalarField,
    n: u64,
    cfg: &PathConfig,
    tree: &SeedTree,
) -> Result<MCEstimate> {
    if !v.contains(x) {
        return domain("evaluation point must lie in the domain");
    }
    let engine = Engine::new(op, cfg)?;
    try_run_paths(n, tree, |_, rng| {
        let e = engine.exit(v, x, cfg, rng)?;
        Ok(if e.is_censored() { None } else { Some(e.weighted(|z| u.eval(z))) })
    })
}

/// Regular grid of cubic cells covering a bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub lo: Vec<f64>,
    pub cell: f64,
    pub counts: Vec<usize>,
}

impl CellGrid {
    /// Cells of side `cell` covering the bounding box of `shape`.
    pub fn covering(shape: &Shape, cell: f64) -> Result<Self> {
        if !(cell > 0.0) || !cell.is_finite() {
            return arg("cell size must be positive");
        }
        let (lo, hi) = shape.bounding_box();
        let counts = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| (((b - a) / cell) - 1e-9).ceil().max(1.0) as usize)
            .collect();
        Ok(Self { lo, cell, counts })
    }

    pub fn len(&self) -> usize {
        if self.counts.is_empty() {
            0
        } else {
            self.counts.iter().product()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell.powi(self.counts.len() as i32)
    }

    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        let mut stride = 1;
        for i in 0..self.counts.len() {
            let u = (x[i] - self.lo[i]) / self.cell;
            if !(u >= 0.0) {
                return None;
            }
            let j = u as usize;
            if j >= self.counts[i] {
                return None;
            }
            idx += j * stride;
            stride *= self.counts[i];
        }
        Some(idx)
    }

    /// Lower and upper corners of cell `i`.
    pub fn bounds(&self, mut i: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![0.0; self.counts.len()];
        for k in 0..self.counts.len() {
            let j = i % self.counts[k];
            i /= self.counts[k];
            lo[k] = self.lo[k] + j as f64 * self.cell;
        }
        let hi = lo.iter().map(|a| a + self.cell).collect();
        (lo, hi)
    }

    pub fn center(&self, i: usize) -> Vec<f64> {
        let (lo, _) = self.bounds(i);
        lo.iter().map(|a| a + 0.5 * self.cell).collect()
    }
}

/// Occupation density per cell of the killed process started at `x`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreenEstimate {
    pub grid: CellGrid,
    /// Occupation mass of each cell divided by the cell volume.
    pub density: Vec<MCEstimate>,
    /// Total occupation, an estimate of `E_x ∫₀^τ e^{−κt} dt`.
    pub total_mass: MCEstimate,
}

/// Cell averages of `G^κ_V(x, ·)`.
pub fn estimate_green_density(
    op: &Operator,
    v: &Domain,
    x: &[f64],
    grid: &CellGrid,
    n: u64,
    cfg: &PathConfig,
) -> Result<GreenEstimate> {
    if grid.is_empty() {
        return arg("empty grid");
    }
    if grid.counts.len() != v.dim() {
        return arg("grid dimension differs from the domain");
    }
    check_point(&v.shape, x)?;
    let engine = Engine::new(op, cfg)?;
    let k = grid.len();
    let tree = SeedTree::new(cfg.seed).derive("green").point(x);
    let st = try_run_paths_vec(n, k + 1, &tree, |_, rng, out| {
        let e = engine.run(&v.shape, x, cfg, rng, &mut |y, w| {
            if let Some(i) = grid.index_of(y) {
                out[i] += w;
            }
            out[k] += w;
        })?;
        Ok(!e.is_censored())
    })?;
    let vol = grid.cell_volume();
    Ok(GreenEstimate {
        grid: grid.clone(),
        density: (0..k).map(|i| st.estimate(i).scale(1.0 / vol)).collect(),
        total_mass: st.estimate(k),
    })
}

/// Direct and Ikeda–Watanabe estimates of `E_x[e^{−κτ_V} 1_{D^c} u(X_{τ_V})]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExteriorHit {
    pub direct: MCEstimate,
    pub iw: MCEstimate,
}

impl ExteriorHit {
    pub fn z_score(&self) -> f64 {
        self.direct.z_score(&self.iw)
    }
}

fn check_nested(v: &Domain, outer: &Shape) -> Result<()> {
    if outer.dim() != v.dim() {
        return arg("D and V have different dimensions");
    }
    if !outer.compactly_contains(&v.shape) {
        return arg("V must be compactly contained in D");
    }
    Ok(())
}

/// Exit-to-exterior functional by direct path sampling and by the
/// occupation integral of the exterior jump intensity.
pub fn estimate_exterior_hit(
    op: &Operator,
    v: &Domain,
    outer: &Shape,
    u_ext: &ScalarField,
    x: &[f64],
    n: u64,
    cfg: &PathConfig,
) -> Result<ExteriorHit> {
    check_nested(v, outer)?;
    check_point(&v.shape, x)?;
    if op.triplet.jump.is_none() || u_ext.is_zero() {
        return Ok(ExteriorHit {
            direct: MCEstimate::zero(),
            iw: MCEstimate::zero(),
        });
    }
    let tree = SeedTree::new(cfg.seed).derive("exterior_hit").point(x);
    let engine = Engine::new(op, cfg)?;
    let direct = try_run_paths(n, &tree.derive("direct"), |_, rng| {
        let e = engine.exit(&v.shape, x, cfg, rng)?;
        Ok(if e.is_censored() {
            None
        } else {
            Some(e.weighted(|z| if outer.contains(z) { 0.0 } else { u_ext.eval(z) }))
        })
    })?;
    let intensity = ExteriorIntensity::new(
        &op.triplet.jump,
        ExteriorCharge {
            u_exterior: u_ext.clone(),
            outer: outer.clone(),
        },
    )?;
    let table = intensity.tabulate(&v.shape)?;
    let j = |y: &[f64]| table.eval(y);
    let iw = occupation_estimate(&engine, &v.shape, x, &j, n, cfg, &tree.derive("iw"))?;
    Ok(ExteriorHit { direct, iw })
}

/// Two estimates of `w_V(x) = P_x(X_{τ_V} ∈ D∖V)` (κ = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WvEstimate {
    pub direct: MCEstimate,
    pub iw_complement: MCEstimate,
}

impl WvEstimate {
    pub fn z_score(&self) -> f64 {
        self.direct.z_score(&self.iw_complement)
    }
}

/// `w_V(x)` directly and as `1 − E_x[1_{D^c}(X_{τ_V})]` through the
/// Ikeda–Watanabe occupation integral. The operator's κ is ignored.
pub fn estimate_wv(
    op: &Operator,
    v: &Domain,
    outer: &Shape,
    x: &[f64],
    n: u64,
    cfg: &PathConfig,
) -> Result<WvEstimate> {
    check_nested(v, outer)?;
    check_point(&v.shape, x)?;
    let op0 = op.with_kappa(0.0);
    let tree = SeedTree::new(cfg.seed).derive("wv").point(x);
    let engine = Engine::new(&op0, cfg)?;
    let direct = try_run_paths(n, &tree.derive("direct"), |_, rng| {
        let e = engine.exit(&v.shape, x, cfg, rng)?;
        Ok(if e.is_censored() {
            None
        } else {
            Some(if outer.contains(&e.exit_pos) { 1.0 } else { 0.0 })
        })
    })?;
    let iw_complement = if matches!(op.triplet.jump, JumpSpec::None) {
        MCEstimate::exact(1.0)
    } else {
        let mut c = *cfg;
        c.seed = SeedTree::new(cfg.seed).derive("wv_iw").key();
        let hit = estimate_exterior_hit(&op0, v, outer, &ScalarField::Constant { value: 1.0 }, x, n, &c)?;
        let mut e = hit.iw.scale(-1.0);
        e.value += 1.0;
        e
    };
    Ok(WvEstimate { direct, iw_complement })
}
