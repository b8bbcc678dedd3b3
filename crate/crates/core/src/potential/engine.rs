use std::sync::{Arc, Mutex};

use crate::error::{unsupported, Error, Result};
use crate::kernels::BallOccupationSampler;
use crate::levy::Operator;
use crate::mc::{run_paths_vec, MCEstimate, VecStats};
use crate::path::{shared_occupation_sampler, simulate_euler, wos_kind, wos_walk, ExitSample, PathConfig, Process, Region, Scheme, WosKind};
use crate::rng::{PathRng, SeedTree};

/// A path generator with an occupation callback, chosen from an operator and
/// a [`PathConfig`].
pub(crate) enum Engine {
    Euler(Process),
    Wos(WosKind, Arc<BallOccupationSampler>),
}

impl Engine {
    pub fn new(op: &Operator, cfg: &PathConfig) -> Result<Self> {
        Self::build(op, cfg, false)
    }

    /// Engine of the dual process.
    pub fn dual(op: &Operator, cfg: &PathConfig) -> Result<Self> {
        Self::build(op, cfg, true)
    }

    fn build(op: &Operator, cfg: &PathConfig, dual: bool) -> Result<Self> {
        cfg.validate()?;
        match cfg.scheme {
            Scheme::Euler => Ok(Engine::Euler(if dual {
                Process::dual(&op.triplet, &op.drift, op.kappa)?
            } else {
                Process::new(&op.triplet, &op.drift, op.kappa)?
            })),
            Scheme::WalkOnSpheres => {
                if op.kappa != 0.0 {
                    return unsupported("walk-on-spheres does not track time, so κ must be 0");
                }
                let kind = wos_kind(&op.triplet, &op.drift)?;
                let sampler = shared_occupation_sampler(op.dim(), kind.s())?;
                Ok(Engine::Wos(kind, sampler))
            }
        }
    }

    /// Runs one path; `visit(y, w)` receives occupation points with weights
    /// whose weighted sum of `f(y)` estimates `∫₀^τ W_t f(X_t) dt`.
    pub fn run<G: Region + ?Sized>(
        &self,
        v: &G,
        x0: &[f64],
        cfg: &PathConfig,
        rng: &mut PathRng,
        visit: &mut dyn FnMut(&[f64], f64),
    ) -> Result<ExitSample> {
        match self {
            Engine::Euler(p) => simulate_euler(p, v, x0, cfg, rng, visit),
            Engine::Wos(kind, sampler) => {
                let d = x0.len();
                let mut y = vec![0.0; d];
                let mut off = vec![0.0; d];
                let m = cfg.occupation_draws.max(1);
                wos_walk(*kind, v, x0, cfg, rng, &mut |x, r, rng| {
                    let w = kind.ball_exit_time(d, r) / m as f64;
                    for _ in 0..m {
                        sampler.sample(r, rng, &mut off);
                        for i in 0..d {
                            y[i] = x[i] + off[i];
                        }
                        visit(&y, w);
                    }
                })
            }
        }
    }

    /// Runs one path without observing occupation.
    pub fn exit<G: Region + ?Sized>(&self, v: &G, x0: &[f64], cfg: &PathConfig, rng: &mut PathRng) -> Result<ExitSample> {
        self.run(v, x0, cfg, rng, &mut |_, _| {})
    }
}

/// [`run_paths_vec`] for closures that can fail; the first error (by path
/// index order of discovery) aborts the estimate.
pub(crate) fn try_run_paths_vec<F>(n: u64, k: usize, tree: &SeedTree, f: F) -> Result<VecStats>
where
    F: Fn(u64, &mut PathRng, &mut [f64]) -> Result<bool> + Sync,
{
    let err: Mutex<Option<(u64, Error)>> = Mutex::new(None);
    let stats = run_paths_vec(n, k, tree, |i, rng, out| match f(i, rng, out) {
        Ok(b) => b,
        Err(e) => {
            let mut g = err.lock().expect("error slot");
            if g.as_ref().is_none_or(|(j, _)| i < *j) {
                *g = Some((i, e));
            }
            false
        }
    });
    match err.into_inner().expect("error slot") {
        Some((_, e)) => Err(e),
        None => Ok(stats),
    }
}

/// Scalar version of [`try_run_paths_vec`]; `Ok(None)` marks censoring.
pub(crate) fn try_run_paths<F>(n: u64, tree: &SeedTree, f: F) -> Result<MCEstimate>
where
    F: Fn(u64, &mut PathRng) -> Result<Option<f64>> + Sync,
{
    let st = try_run_paths_vec(n, 1, tree, |i, rng, out| {
        Ok(match f(i, rng)? {
            Some(v) => {
                out[0] = v;
                true
            }
            None => false,
        })
    })?;
    Ok(st.estimate(0))
}
