use rand::Rng;
use rand_distr::StandardNormal;

use super::{ExitMode, ExitSample, KillingMode, PathConfig, Region};
use crate::error::{arg, domain, unsupported, Result};
use crate::levy::{DriftField, JumpSpec, LevyTriplet};
use crate::rng::PathRng;
use crate::stable::{isotropic_stable, symmetric_stable};

/// Discretised dynamics of the operator `A − b·∇ − κ` or of its dual.
///
/// The process generated by `A − b·∇` moves with drift `l − b`; the dual
/// moves with `l + b` and carries the weight `exp ∫(div b − κ)`.
#[derive(Debug, Clone)]
pub struct Process {
    d: usize,
    l: Vec<f64>,
    /// Row-major square root of the Gaussian covariance.
    sqrt_cov: Option<Vec<f64>>,
    jump: JumpSpec,
    drift: DriftField,
    drift_sign: f64,
    kappa: f64,
    dual: bool,
}

impl Process {
    pub fn new(triplet: &LevyTriplet, drift: &DriftField, kappa: f64) -> Result<Self> {
        Self::build(triplet, drift, kappa, false)
    }

    /// The dual process of a symmetric triplet (`l = 0`).
    pub fn dual(triplet: &LevyTriplet, drift: &DriftField, kappa: f64) -> Result<Self> {
        if triplet.l.iter().any(|v| *v != 0.0) {
            return unsupported("duality is implemented for symmetric triplets with l = 0");
        }
        Self::build(triplet, drift, kappa, true)
    }

    fn build(triplet: &LevyTriplet, drift: &DriftField, kappa: f64, dual: bool) -> Result<Self> {
        triplet.validate()?;
        let d = triplet.dim();
        if drift.dim() != d {
            return arg("drift dimension differs from the triplet");
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return arg("killing rate must be finite and non-negative");
        }
        let mut cov = triplet.q_matrix();
        if matches!(triplet.jump, JumpSpec::MixedLaplacianStable { .. }) {
            // the extra Δ is ½Tr(2I·D²)
            for i in 0..d {
                cov[(i, i)] += 2.0;
            }
        }
        let sqrt_cov = if cov.iter().any(|v| *v != 0.0) {
            let t = LevyTriplet {
                l: vec![0.0; d],
                q: (0..d).map(|i| (0..d).map(|j| cov[(i, j)]).collect()).collect(),
                jump: JumpSpec::None,
            };
            let s = t.sqrt_q();
            Some((0..d * d).map(|k| s[(k / d, k % d)]).collect())
        } else {
            None
        };
        Ok(Self {
            d,
            l: triplet.l.clone(),
            sqrt_cov,
            jump: triplet.jump.clone(),
            drift: drift.clone(),
            drift_sign: if dual { 1.0 } else { -1.0 },
            kappa,
            dual,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn is_dual(&self) -> bool {
        self.dual
    }

    /// Exponential rate of the path weight at `x`.
    fn rate(&self, x: &[f64]) -> f64 {
        if self.dual {
            let div = self
                .drift
                .divergence(x)
                .unwrap_or_else(|| self.drift.divergence_fd(x));
            div - self.kappa
        } else {
            -self.kappa
        }
    }

    /// `nᵀ Cov n` along a unit vector.
    fn variance_along(&self, n: &[f64]) -> f64 {
        match &self.sqrt_cov {
            None => 0.0,
            Some(s) => {
                let d = self.d;
                (0..d)
                    .map(|j| {
                        let v: f64 = (0..d).map(|i| n[i] * s[i * d + j]).sum();
                        v * v
                    })
                    .sum()
            }
        }
    }

    /// Continuous part (drift and Gaussian) and jump part of one increment.
    fn increment(&self, x: &[f64], dt: f64, rng: &mut PathRng, cont: &mut [f64], jump: &mut [f64], tmp: &mut [f64]) {
        let d = self.d;
        self.drift.eval(x, tmp);
        for i in 0..d {
            cont[i] = (self.l[i] + self.drift_sign * tmp[i]) * dt;
        }
        if let Some(s) = &self.sqrt_cov {
            let sd = dt.sqrt();
            for t in tmp.iter_mut() {
                *t = rng.sample::<f64, _>(StandardNormal) * sd;
            }
            for i in 0..d {
                cont[i] += (0..d).map(|j| s[i * d + j] * tmp[j]).sum::<f64>();
            }
        }
        match &self.jump {
            JumpSpec::None => jump.iter_mut().for_each(|j| *j = 0.0),
            JumpSpec::IsotropicStable { s } | JumpSpec::MixedLaplacianStable { s } => {
                isotropic_stable(*s, rng, jump);
                let scale = dt.powf(0.5 / s);
                jump.iter_mut().for_each(|j| *j *= scale);
            }
            JumpSpec::CylindricalStable { s } => {
                for (j, si) in jump.iter_mut().zip(s) {
                    *j = dt.powf(0.5 / si) * symmetric_stable(2.0 * si, rng);
                }
            }
        }
    }
}

/// `(e^z − 1)/z`, stable near 0.
fn phi(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

/// Runs an Euler path until it leaves `v`.
///
/// `visit(x, w)` is called once per step with the left endpoint `x` and the
/// occupation weight `w = W·∫e^{c s}ds` of the step, where `W` is the path
/// weight at the start of the step and `c` the frozen weight rate. Summing
/// `w·f(x)` gives the discretised occupation functional.
pub fn simulate_euler<G: Region + ?Sized>(
    p: &Process,
    v: &G,
    x0: &[f64],
    cfg: &PathConfig,
    rng: &mut PathRng,
    visit: &mut dyn FnMut(&[f64], f64),
) -> Result<ExitSample> {
    cfg.validate()?;
    if x0.len() != p.d {
        return arg("starting point has the wrong dimension");
    }
    if !v.contains(x0) {
        return domain("starting point must lie in the domain");
    }
    let d = p.d;
    let dt = cfg.dt;
    let per_step = cfg.killing == KillingMode::PerStep && p.kappa > 0.0 && !p.dual;
    let (mut cont, mut jmp, mut tmp, mut y, mut normal) =
        (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut log_w = 0.0;
    let creep_tol = 1e-8 * v.scale();

    let weight_of = |log_w: f64, t: f64| -> f64 {
        if per_step {
            1.0
        } else if p.dual {
            log_w.exp()
        } else {
            (-p.kappa * t).exp()
        }
    };
    // killing coin over an elapsed time h
    let survives = |h: f64, rng: &mut PathRng| -> bool { !per_step || rng.random::<f64>() >= -(-p.kappa * h).exp_m1() };

    loop {
        if t + dt > cfg.horizon * (1.0 + 1e-12) {
            return Ok(ExitSample {
                exit_pos: x,
                exit_time: t,
                exit_mode: ExitMode::Censored { horizon: cfg.horizon },
                fk_weight: weight_of(log_w, t),
            });
        }
        let c = if per_step { 0.0 } else { p.rate(&x) };
        let w_now = weight_of(log_w, t);
        p.increment(&x, dt, rng, &mut cont, &mut jmp, &mut tmp);
        for i in 0..d {
            y[i] = x[i] + cont[i] + jmp[i];
        }

        let mut exit: Option<(ExitMode, f64, Vec<f64>)> = None;
        if !v.contains(&y) {
            for i in 0..d {
                tmp[i] = x[i] + jmp[i];
            }
            if !v.contains(&tmp) {
                exit = Some((ExitMode::JumpOvershoot, 1.0, y.clone()));
            } else {
                let len = y.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                while (hi - lo) * len > creep_tol {
                    let mid = 0.5 * (lo + hi);
                    for i in 0..d {
                        tmp[i] = x[i] + mid * (y[i] - x[i]);
                    }
                    if v.contains(&tmp) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let mut pos: Vec<f64> = (0..d).map(|i| x[i] + hi * (y[i] - x[i])).collect();
                if v.contains(&pos) {
                    let q = pos.clone();
                    v.project_outside(&q, &mut pos);
                }
                exit = Some((ExitMode::BoundaryCreep, hi, pos));
            }
        } else if p.sqrt_cov.is_some() {
            // Brownian-bridge test for a crossing between the grid times
            let d0 = v.signed_distance(&x);
            let d1 = v.signed_distance(&y);
            v.outward_normal(&x, &mut normal);
            let var = p.variance_along(&normal);
            if var > 0.0 {
                let prob = (-2.0 * d0 * d1 / (var * dt)).exp();
                if prob > 1e-14 && rng.random::<f64>() < prob {
                    let mut pos = vec![0.0; d];
                    v.project_outside(&y, &mut pos);
                    exit = Some((ExitMode::BoundaryCreep, d0 / (d0 + d1), pos));
                }
            }
        }

        if let Some((mode, frac, pos)) = exit {
            let h = frac * dt;
            visit(&x, w_now * h * phi(c * h));
            log_w += c * h;
            t += h;
            if !survives(h, rng) {
                return Ok(killed(pos, t));
            }
            return Ok(ExitSample {
                exit_pos: pos,
                exit_time: t,
                exit_mode: mode,
                fk_weight: weight_of(log_w, t),
            });
        }

        visit(&x, w_now * dt * phi(c * dt));
        log_w += c * dt;
        t += dt;
        if !survives(dt, rng) {
            return Ok(killed(y, t));
        }
        std::mem::swap(&mut x, &mut y);
    }
}

fn killed(pos: Vec<f64>, t: f64) -> ExitSample {
    ExitSample {
        exit_pos: pos,
        exit_time: t,
        exit_mode: ExitMode::Killed,
        fk_weight: 0.0,
    }
}
