//! Paths of the killed, drift-perturbed Lévy process run to the first exit
//! from a domain.
//!
//! Two schemes are available: an Euler scheme with exact stable increments
//! for general operators, and walk-on-spheres, which samples exit positions
//! without time discretisation for isotropic stable (and Brownian) motion
//! without drift.

mod euler;
mod region;
mod wos;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use euler::{simulate_euler, Process};
pub use region::{Punctured, Region};
pub use wos::{shared_occupation_sampler, wos_exit_ball, wos_walk, WosKind};

use crate::error::{arg, domain, unsupported, Result};
use crate::levy::{Domain, DriftField, JumpSpec, LevyTriplet};
use crate::rng::PathRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Euler,
    WalkOnSpheres,
}

/// How killing at rate `κ` enters an Euler path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KillingMode {
    /// Paths survive; the weight `e^{−κt}` is carried along.
    #[default]
    Weight,
    /// Paths are killed with probability `1 − e^{−κΔt}` after every step.
    PerStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub killing: KillingMode,
    /// Stopping shell of Brownian walk-on-spheres, relative to the domain
    /// diameter.
    #[serde(default = "default_wos_eps")]
    pub wos_eps: f64,
    #[serde(default = "default_max_steps")]
    pub max_wos_steps: u64,
    /// Occupation points drawn per walk-on-spheres ball, each carrying an
    /// equal share of the ball's expected exit time.
    #[serde(default = "default_occupation_draws")]
    pub occupation_draws: u32,
}

fn default_wos_eps() -> f64 {
    1e-5
}

fn default_max_steps() -> u64 {
    1_000_000
}

fn default_occupation_draws() -> u32 {
    1
}

impl PathConfig {
    pub fn euler(dt: f64, horizon: f64, seed: u64) -> Self {
        Self {
            dt,
            horizon,
            seed,
            scheme: Scheme::Euler,
            killing: KillingMode::Weight,
            wos_eps: default_wos_eps(),
            max_wos_steps: default_max_steps(),
            occupation_draws: default_occupation_draws(),
        }
    }

    pub fn wos(seed: u64) -> Self {
        Self {
            scheme: Scheme::WalkOnSpheres,
            ..Self::euler(1e-3, f64::INFINITY, seed)
        }
    }

    pub fn with_killing(mut self, killing: KillingMode) -> Self {
        self.killing = killing;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.scheme == Scheme::Euler {
            if !(self.dt > 0.0) || !self.dt.is_finite() {
                return arg(format!("time step {} must be positive", self.dt));
            }
            if !(self.horizon >= self.dt) {
                return arg("horizon must be at least one time step");
            }
        }
        if self.occupation_draws == 0 {
            return arg("occupation_draws must be at least 1");
        }
        Ok(())
    }
}

/// Horizon of `10⁶` times a rough expected exit time from a ball spanning
/// the domain.
pub fn default_horizon(triplet: &LevyTriplet, drift: &DriftField, v: &Domain) -> f64 {
    let r = 0.5 * v.shape.diameter();
    let d = triplet.dim();
    let mut guess = f64::INFINITY;
    let q_max = triplet.q_matrix().symmetric_eigenvalues().max();
    if q_max > 0.0 {
        guess = guess.min(r * r / q_max);
    }
    match &triplet.jump {
        JumpSpec::IsotropicStable { s } => guess = guess.min(r.powf(2.0 * s)),
        JumpSpec::MixedLaplacianStable { s } => guess = guess.min(r.powf(2.0 * s)).min(r * r / 2.0),
        JumpSpec::CylindricalStable { s } => {
            for si in s {
                guess = guess.min(r.powf(2.0 * si));
            }
        }
        JumpSpec::None => {}
    }
    if drift.sup_bound > 0.0 && drift.sup_bound.is_finite() {
        guess = guess.min(2.0 * r / drift.sup_bound);
    }
    if !guess.is_finite() {
        guess = r.max(1.0) * d as f64;
    }
    1e6 * guess
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExitMode {
    JumpOvershoot,
    BoundaryCreep,
    Censored { horizon: f64 },
    /// Removed by per-step killing before leaving the domain.
    Killed,
}

/// Outcome of one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitSample {
    pub exit_pos: Vec<f64>,
    /// `NaN` for walk-on-spheres, which does not track time.
    pub exit_time: f64,
    pub exit_mode: ExitMode,
    pub fk_weight: f64,
}

impl ExitSample {
    pub fn is_censored(&self) -> bool {
        matches!(self.exit_mode, ExitMode::Censored { .. })
    }

    pub fn is_killed(&self) -> bool {
        matches!(self.exit_mode, ExitMode::Killed)
    }

    /// `weight · f(X_τ)` as seen by harmonic-measure estimators; killed
    /// paths contribute zero.
    pub fn weighted<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        if self.is_killed() {
            0.0
        } else {
            self.fk_weight * f(&self.exit_pos)
        }
    }
}

/// Walk-on-spheres parameters implied by an operator, if it qualifies.
pub fn wos_kind(triplet: &LevyTriplet, drift: &DriftField) -> Result<WosKind> {
    if !drift.is_zero() || triplet.l.iter().any(|v| *v != 0.0) {
        return unsupported("walk-on-spheres needs zero drift");
    }
    match &triplet.jump {
        JumpSpec::IsotropicStable { s } if !triplet.has_diffusion() => Ok(WosKind::Stable { s: *s }),
        JumpSpec::None => {
            let q = triplet.q_matrix();
            let q0 = q[(0, 0)];
            let d = triplet.dim();
            let scalar = (0..d).all(|i| (0..d).all(|j| q[(i, j)] == if i == j { q0 } else { 0.0 }));
            if scalar && q0 > 0.0 {
                Ok(WosKind::Brownian { q: q0 })
            } else {
                unsupported("walk-on-spheres needs Q = q·I")
            }
        }
        _ => unsupported("walk-on-spheres needs isotropic stable jumps without diffusion"),
    }
}

/// Runs one path from `x0` until it leaves `v`.
pub fn simulate_until_exit(
    triplet: &LevyTriplet,
    drift: &DriftField,
    v: &Domain,
    x0: &[f64],
    kappa: f64,
    cfg: &PathConfig,
    rng: &mut PathRng,
) -> Result<ExitSample> {
    simulate_in(triplet, drift, &v.shape, x0, kappa, cfg, rng)
}

/// [`simulate_until_exit`] on any [`Region`].
pub fn simulate_in<G: Region + ?Sized>(
    triplet: &LevyTriplet,
    drift: &DriftField,
    v: &G,
    x0: &[f64],
    kappa: f64,
    cfg: &PathConfig,
    rng: &mut PathRng,
) -> Result<ExitSample> {
    cfg.validate()?;
    if !(kappa >= 0.0) {
        return arg("killing rate must be non-negative");
    }
    if !v.contains(x0) {
        return domain("starting point must lie in the domain");
    }
    match cfg.scheme {
        Scheme::Euler => {
            let p = Process::new(triplet, drift, kappa)?;
            simulate_euler(&p, v, x0, cfg, rng, &mut |_, _| {})
        }
        Scheme::WalkOnSpheres => {
            if kappa != 0.0 {
                return unsupported("walk-on-spheres does not track time, so κ must be 0");
            }
            let kind = wos_kind(triplet, drift)?;
            wos_walk(kind, v, x0, cfg, rng, &mut |_, _, _| {})
        }
    }
}

/// One-path estimate of `∫₀^{τ_V} e^{−κt} f(X_t) dt`.
///
/// Euler paths integrate the frozen value of `f` exactly against `e^{−κt}`
/// over each step. Walk-on-spheres (κ = 0) uses one draw from the
/// occupation density of every inscribed ball weighted by its expected exit
/// time.
#[allow(clippy::too_many_arguments)]
pub fn occupation_functional<F: Fn(&[f64]) -> f64>(
    triplet: &LevyTriplet,
    drift: &DriftField,
    v: &Domain,
    x0: &[f64],
    f: F,
    kappa: f64,
    cfg: &PathConfig,
    rng: &mut PathRng,
) -> Result<f64> {
    occupation_in(triplet, drift, &v.shape, x0, &f, kappa, cfg, rng).map(|(o, _)| o)
}

/// Occupation functional together with the exit sample of the same path.
#[allow(clippy::too_many_arguments)]
pub fn occupation_in<G: Region + ?Sized, F: Fn(&[f64]) -> f64>(
    triplet: &LevyTriplet,
    drift: &DriftField,
    v: &G,
    x0: &[f64],
    f: &F,
    kappa: f64,
    cfg: &PathConfig,
    rng: &mut PathRng,
) -> Result<(f64, ExitSample)> {
    cfg.validate()?;
    if !v.contains(x0) {
        return domain("starting point must lie in the domain");
    }
    let mut acc = crate::mc::Kahan::default();
    let exit = match cfg.scheme {
        Scheme::Euler => {
            let p = Process::new(triplet, drift, kappa)?;
            simulate_euler(&p, v, x0, cfg, rng, &mut |x, w| acc.add(w * f(x)))?
        }
        Scheme::WalkOnSpheres => {
            if kappa != 0.0 {
                return unsupported("walk-on-spheres does not track time, so κ must be 0");
            }
            let kind = wos_kind(triplet, drift)?;
            let d = x0.len();
            let sampler = shared_occupation_sampler(d, kind.s())?;
            let mut y = vec![0.0; d];
            let mut off = vec![0.0; d];
            wos_walk(kind, v, x0, cfg, rng, &mut |x, r, rng| {
                sampler.sample(r, rng, &mut off);
                for i in 0..d {
                    y[i] = x[i] + off[i];
                }
                acc.add(kind.ball_exit_time(d, r) * f(&y));
            })?
        }
    };
    Ok((acc.value(), exit))
}

/// Shared handle to an occupation sampler table.
pub type SamplerHandle = Arc<crate::kernels::BallOccupationSampler>;

#[cfg(test)]
mod tests;
