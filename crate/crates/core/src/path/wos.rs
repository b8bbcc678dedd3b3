use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::{ExitMode, ExitSample, PathConfig, Region};
use crate::error::{arg, domain, Result};
use crate::kernels::{expected_exit_time_ball, BallOccupationSampler};
use crate::levy::Shape;
use crate::rng::PathRng;
use crate::stable::{beta, unit_direction};

/// Processes that walk-on-spheres can sample exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WosKind {
    /// Isotropic 2s-stable: the exit point from a ball centred at `x` is
    /// `x + r·U/√B` with `U` uniform on the sphere and `B ~ Beta(s, 1−s)`.
    Stable { s: f64 },
    /// Brownian motion with generator `½q Δ`: uniform on the sphere, stopped
    /// in a thin shell at the boundary.
    Brownian { q: f64 },
}

impl WosKind {
    /// Exponent `s` with `s = 1` for Brownian motion.
    pub fn s(&self) -> f64 {
        match self {
            WosKind::Stable { s } => *s,
            WosKind::Brownian { .. } => 1.0,
        }
    }

    /// `E τ` from the centre of a ball of radius `r`.
    pub fn ball_exit_time(&self, d: usize, r: f64) -> f64 {
        let base = expected_exit_time_ball(d, self.s(), r, &vec![0.0; d]).expect("centre lies in the ball");
        match self {
            WosKind::Stable { .. } => base,
            WosKind::Brownian { q } => base / q,
        }
    }
}

/// Occupation sampler tables are expensive to build; they are cached per
/// `(d, s)`.
pub fn shared_occupation_sampler(d: usize, s: f64) -> Result<Arc<BallOccupationSampler>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<BallOccupationSampler>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (d, s.to_bits());
    if let Some(v) = cache.lock().expect("sampler cache").get(&key) {
        return Ok(v.clone());
    }
    let built = Arc::new(BallOccupationSampler::new(d, s)?);
    Ok(cache.lock().expect("sampler cache").entry(key).or_insert(built).clone())
}

/// Walk-on-spheres from `x0` until the walk leaves `v`.
///
/// `visit(x, r, rng)` is called for every inscribed ball `B(x, r)` before
/// the walk leaves it.
pub fn wos_walk<G: Region + ?Sized>(
    kind: WosKind,
    v: &G,
    x0: &[f64],
    cfg: &PathConfig,
    rng: &mut PathRng,
    visit: &mut dyn FnMut(&[f64], f64, &mut PathRng),
) -> Result<ExitSample> {
    if !v.contains(x0) {
        return domain("starting point must lie in the domain");
    }
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut u = vec![0.0; d];
    let eps = cfg.wos_eps * v.scale();
    for _ in 0..cfg.max_wos_steps {
        let r = v.signed_distance(&x);
        match kind {
            WosKind::Stable { s } => {
                visit(&x, r, rng);
                unit_direction(rng, &mut u);
                let b = beta(s, 1.0 - s, rng);
                let rho = r / b.sqrt();
                for i in 0..d {
                    x[i] += rho * u[i];
                }
                if !v.contains(&x) {
                    return Ok(ExitSample {
                        exit_pos: x,
                        exit_time: f64::NAN,
                        exit_mode: ExitMode::JumpOvershoot,
                        fk_weight: 1.0,
                    });
                }
            }
            WosKind::Brownian { .. } => {
                if r < eps {
                    let mut pos = vec![0.0; d];
                    v.project_outside(&x, &mut pos);
                    return Ok(ExitSample {
                        exit_pos: pos,
                        exit_time: f64::NAN,
                        exit_mode: ExitMode::BoundaryCreep,
                        fk_weight: 1.0,
                    });
                }
                visit(&x, r, rng);
                unit_direction(rng, &mut u);
                for i in 0..d {
                    x[i] += r * u[i];
                }
            }
        }
    }
    Ok(ExitSample {
        exit_pos: x,
        exit_time: f64::NAN,
        exit_mode: ExitMode::Censored { horizon: f64::INFINITY },
        fk_weight: 1.0,
    })
}

/// Exact exit position of the isotropic 2s-stable process from a ball.
pub fn wos_exit_ball(s: f64, center: &[f64], radius: f64, x0: &[f64], rng: &mut PathRng) -> Result<ExitSample> {
    if !(s > 0.0 && s < 1.0) {
        return arg("stability parameter must lie in (0,1)");
    }
    let ball = Shape::ball(center.to_vec(), radius);
    if !Region::contains(&ball, x0) {
        return domain("starting point must lie strictly inside the ball");
    }
    let cfg = PathConfig::wos(0);
    wos_walk(WosKind::Stable { s }, &ball, x0, &cfg, rng, &mut |_, _, _| {})
}
