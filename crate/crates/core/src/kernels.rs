//! Closed-form kernels of the isotropic stable and Brownian operators:
//! free-space Riesz kernel, ball Green function, ball exit density and the
//! expected exit time from a ball.
//!
//! `s ∈ (0,1)` refers to the fractional Laplacian with symbol `|ξ|^{2s}`;
//! `s = 1` is Brownian motion with generator `½Δ`, whose kernels are twice
//! those of `Δ`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{arg, domain, Error, Result};
use crate::levy::domain::{dist, norm};
use crate::quad::{integrate, sphere_area, Tol};
use crate::stable::unit_direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelId {
    RieszFree,
    GreenBall,
    PoissonBall,
}

/// A kernel value tagged with what produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEval {
    pub value: f64,
    pub kernel_id: KernelId,
    pub d: usize,
    pub s: f64,
    pub radius: Option<f64>,
}

fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s <= 1.0 {
        Ok(())
    } else {
        arg(format!("stability parameter {s} outside (0,1]"))
    }
}

fn brownian_factor(s: f64) -> f64 {
    if s == 1.0 {
        2.0
    } else {
        1.0
    }
}

/// Riesz constant `Γ(d/2 − s) / (4^s π^{d/2} Γ(s))`.
pub fn riesz_constant(d: usize, s: f64) -> f64 {
    let h = d as f64 / 2.0;
    brownian_factor(s) * gamma(h - s) / (4f64.powf(s) * PI.powf(h) * gamma(s))
}

/// Free-space Green function `C(d,s)|x − y|^{2s−d}`; `+∞` on the diagonal.
pub fn riesz_green_free(d: usize, s: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_s(s)?;
    if (d as f64) <= 2.0 * s {
        return Err(Error::Unsupported(format!(
            "no free Green function for d = {d} ≤ 2s = {}: the process is recurrent",
            2.0 * s
        )));
    }
    let r = dist(x, y);
    if r == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(riesz_constant(d, s) * r.powf(2.0 * s - d as f64))
}

/// `∫₀^{r₀} t^{s−1}(1+t)^{−d/2} dt`.
pub fn green_inner_integral(d: usize, s: f64, r0: f64) -> f64 {
    if r0 <= 0.0 {
        return 0.0;
    }
    if r0.is_infinite() {
        return f64::INFINITY;
    }
    let h = d as f64 / 2.0;
    let tol = Tol::new(1e-12, 1e-10);
    // t = w^{1/s} removes the endpoint singularity on [0, 1]
    let head = |hi: f64| integrate(|w| (1.0 + w.powf(1.0 / s)).powf(-h), 0.0, hi.powf(s), tol) / s;
    if r0 <= 1.0 {
        return head(r0);
    }
    // t = e^v on [1, r₀]
    head(1.0) + integrate(|v| (s * v).exp() * (1.0 + v.exp()).powf(-h), 0.0, r0.ln(), tol)
}

/// Green function of the centred ball of the given radius.
///
/// `κ(d,s)|x − y|^{2s−d} ∫₀^{r₀} t^{s−1}(1+t)^{−d/2} dt` with
/// `r₀ = (r² − |x|²)(r² − |y|²) / (r²|x − y|²)`. The formula is finite for
/// every `d`, including the recurrent regime `d ≤ 2s`.
pub fn green_ball(d: usize, s: f64, radius: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_s(s)?;
    if !(radius > 0.0) {
        return arg("radius must be positive");
    }
    if x.len() != d || y.len() != d {
        return arg("point dimension mismatch");
    }
    let r2 = radius * radius;
    let (ax, ay) = (r2 - norm(x).powi(2), r2 - norm(y).powi(2));
    if ax <= 0.0 || ay <= 0.0 {
        if ax < 0.0 || ay < 0.0 {
            return domain("points must lie in the ball");
        }
        return Ok(0.0);
    }
    let r = dist(x, y);
    let h = d as f64 / 2.0;
    let kappa = brownian_factor(s) * gamma(h) / (4f64.powf(s) * PI.powf(h) * gamma(s).powi(2));
    if r == 0.0 {
        if (d as f64) > 2.0 * s {
            return Ok(f64::INFINITY);
        }
        if (d as f64) < 2.0 * s {
            // |x−y|^{2s−d} ∫₀^{r₀} ~ r₀^{s−d/2}|x−y|^{2s−d}/(s − d/2) as x → y
            return Ok(kappa * (ax * ay / r2).powf(s - h) / (s - h));
        }
        return Ok(f64::INFINITY);
    }
    let r0 = ax * ay / (r2 * r * r);
    Ok(kappa * r.powf(2.0 * s - d as f64) * green_inner_integral(d, s, r0))
}

/// Exit density `X_{τ_B} ∈ dz` of the isotropic 2s-stable process from the
/// centred ball, `s ∈ (0,1)`.
pub fn poisson_ball(d: usize, s: f64, radius: f64, x: &[f64], z: &[f64]) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return arg("the ball exit density needs s in (0,1)");
    }
    let (nx, nz) = (norm(x), norm(z));
    if !(nx < radius && radius < nz) {
        return domain("need |x| < radius < |z|");
    }
    let h = d as f64 / 2.0;
    let c = gamma(h) * PI.powf(-h - 1.0) * (PI * s).sin();
    let r2 = radius * radius;
    Ok(c * ((r2 - nx * nx) / (nz * nz - r2)).powf(s) * dist(x, z).powf(-(d as f64)))
}

/// `P_0(|X_{τ_B}| ≤ ρ)` for the centred ball, by quadrature of the radial
/// profile of [`poisson_ball`].
pub fn poisson_ball_radial_cdf(d: usize, s: f64, radius: f64, rho: f64) -> Result<f64> {
    poisson_ball_radial_cdf_from(d, s, radius, &vec![0.0; d], rho)
}

/// `P_x(|X_{τ_B}| ≤ ρ)` for the centred ball.
///
/// The sphere average of `|x − z|^{−d}` over `|z| = r > |x|` is
/// `r^{2−d}/(r² − |x|²)` (the classical Poisson kernel has unit mass), so the
/// radial exit density is `c·|S|·((R² − |x|²)/(r² − R²))^s · r/(r² − |x|²)`.
/// It is evaluated in `δ = r − R` so that points within rounding distance of
/// the sphere still carry their (non-negligible) mass.
pub fn poisson_ball_radial_cdf_from(d: usize, s: f64, radius: f64, x: &[f64], rho: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return arg("the ball exit density needs s in (0,1)");
    }
    let a2 = x.iter().map(|v| v * v).sum::<f64>();
    let r2 = radius * radius;
    if x.len() != d || !(a2 < r2) {
        return domain("need x inside the ball");
    }
    if rho <= radius {
        return Ok(0.0);
    }
    if rho.is_infinite() {
        return Ok(1.0);
    }
    let h = d as f64 / 2.0;
    let c = gamma(h) * PI.powf(-h - 1.0) * (PI * s).sin();
    let t = 1.0 - s;
    // δ = w^{1/(1−s)} absorbs the δ^{−s} singularity
    let f = |w: f64| {
        if w <= 0.0 {
            return 0.0;
        }
        let delta = w.powf(1.0 / t);
        let rr = radius + delta;
        let p = c * ((r2 - a2) / (delta * (2.0 * radius + delta))).powf(s) * rr / (rr * rr - a2);
        p * w.powf(1.0 / t - 1.0) / t
    };
    let v = sphere_area(d) * integrate(f, 0.0, (rho - radius).powf(t), Tol::new(1e-13, 1e-10));
    Ok(v.min(1.0))
}

/// Radii splitting the exit law of `|X_{τ_B}|` from `x` into `bins`
/// equiprobable classes; the last edge is `∞`.
pub fn poisson_ball_radial_bins(d: usize, s: f64, radius: f64, x: &[f64], bins: usize) -> Result<Vec<f64>> {
    if bins < 2 {
        return arg("need at least two bins");
    }
    let cdf = |r: f64| poisson_ball_radial_cdf_from(d, s, radius, x, r);
    let mut edges = Vec::with_capacity(bins);
    for k in 1..bins {
        let target = k as f64 / bins as f64;
        let mut hi = 2.0 * radius;
        while cdf(hi)? < target {
            hi *= 2.0;
        }
        let mut lo = radius;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        edges.push(0.5 * (lo + hi));
    }
    edges.push(f64::INFINITY);
    Ok(edges)
}

/// Harmonic measure density of `½Δ` on the sphere `|z| = radius` with
/// respect to surface measure.
pub fn brownian_harmonic_density(d: usize, radius: f64, x: &[f64], z: &[f64]) -> Result<f64> {
    let nx = norm(x);
    if nx >= radius {
        return domain("x must lie inside the ball");
    }
    Ok((radius * radius - nx * nx) / (sphere_area(d) * radius * dist(x, z).powi(d as i32)))
}

/// `E_x τ_B` for the centred ball.
pub fn expected_exit_time_ball(d: usize, s: f64, radius: f64, x: &[f64]) -> Result<f64> {
    check_s(s)?;
    let a = radius * radius - norm(x).powi(2);
    if a < 0.0 {
        return domain("x must lie in the closed ball");
    }
    let h = d as f64 / 2.0;
    Ok(brownian_factor(s) * gamma(h) / (4f64.powf(s) * gamma(1.0 + s) * gamma(h + s)) * a.powf(s))
}

/// One-dimensional gambler's ruin: probability that Brownian motion started
/// at `x` leaves `(a, b)` through `b`.
pub fn newtonian_exit_interval(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a < x && x < b) {
        return domain("need a < x < b");
    }
    Ok((x - a) / (b - a))
}

/// Samples from the normalised occupation density `G_B(0, y) dy / E_0 τ_B`
/// of a centred ball, by inverting a tabulated radial CDF.
///
/// The table is built for the unit ball; samples scale with the radius.
#[derive(Debug, Clone)]
pub struct BallOccupationSampler {
    d: usize,
    s: f64,
    exponent: f64,
    cdf: Vec<f64>,
}

impl BallOccupationSampler {
    const NODES: usize = 2048;

    pub fn new(d: usize, s: f64) -> Result<Self> {
        check_s(s)?;
        if d == 0 {
            return arg("dimension must be positive");
        }
        // radial density ~ ρ^{β−1} at 0 with β = min(2s, d); ρ = v^m makes
        // it linear in v
        let beta = (2.0 * s).min(d as f64);
        let exponent = 2.0 / beta;
        let h = d as f64 / 2.0;
        let density = |v: f64| {
            if v <= 0.0 || v >= 1.0 {
                return 0.0;
            }
            let rho = v.powf(exponent);
            let r0 = (1.0 - rho * rho) / (rho * rho);
            let g = rho.powf(2.0 * s - d as f64) * green_inner_integral(d, s, r0);
            exponent * v.powf(exponent - 1.0) * rho.powf(2.0 * h - 1.0) * g
        };
        let mut cdf = vec![0.0; Self::NODES + 1];
        let tol = Tol::new(1e-13, 1e-10);
        for i in 1..=Self::NODES {
            let (a, b) = ((i - 1) as f64 / Self::NODES as f64, i as f64 / Self::NODES as f64);
            cdf[i] = cdf[i - 1] + integrate(density, a, b, tol);
        }
        let total = cdf[Self::NODES];
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(Self { d, s, exponent, cdf })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Radius `|Y|/r` for a uniform `u`.
    pub fn radial_quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|c| *c <= u).clamp(1, Self::NODES);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        let v = (i as f64 - 1.0 + frac.clamp(0.0, 1.0)) / Self::NODES as f64;
        v.powf(self.exponent)
    }

    /// Offset `Y − center` for a ball of the given radius.
    pub fn sample<R: Rng + ?Sized>(&self, radius: f64, rng: &mut R, out: &mut [f64]) {
        let rho = radius * self.radial_quantile(rng.random::<f64>());
        unit_direction(rng, out);
        out.iter_mut().for_each(|o| *o *= rho);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_to_infinity;
    use crate::rng::SeedTree;
    use statrs::function::beta::{beta, beta_reg};

    #[test]
    fn off_centre_radial_cdf_matches_planar_quadrature() {
        let (s, x, rho) = (0.5, [0.3, 0.0], 1.5);
        // r = 1 + w² removes the (r − 1)^{−1/2} singularity
        let brute = integrate(
            |w| {
                let r = 1.0 + w * w;
                let ang = integrate(
                    |th| poisson_ball(2, s, 1.0, &x, &[r * th.cos(), r * th.sin()]).unwrap(),
                    0.0,
                    2.0 * PI,
                    Tol::new(1e-12, 1e-10),
                );
                2.0 * w * r * ang
            },
            1e-12,
            (rho - 1.0f64).sqrt(),
            Tol::new(1e-10, 1e-9),
        );
        let q = poisson_ball_radial_cdf_from(2, s, 1.0, &x, rho).unwrap();
        assert!((q - brute).abs() < 1e-6, "{q} vs {brute}");
        assert!((poisson_ball_radial_cdf_from(2, s, 1.0, &x, 1e12).unwrap() - 1.0).abs() < 1e-4);
        let centred = poisson_ball_radial_cdf(3, 0.7, 2.0, 2.5).unwrap();
        assert_eq!(centred, poisson_ball_radial_cdf_from(3, 0.7, 2.0, &[0.0; 3], 2.5).unwrap());
        assert!(poisson_ball_radial_cdf_from(2, s, 1.0, &[1.0, 0.0], 2.0).is_err());
    }

    #[test]
    fn radial_bins_are_equiprobable() {
        let x = [0.3, 0.0];
        let edges = poisson_ball_radial_bins(2, 0.5, 1.0, &x, 20).unwrap();
        assert_eq!(edges.len(), 20);
        for (k, e) in edges[..19].iter().enumerate() {
            let q = poisson_ball_radial_cdf_from(2, 0.5, 1.0, &x, *e).unwrap();
            assert!((q - (k + 1) as f64 / 20.0).abs() < 1e-8);
        }
    }

    #[test]
    fn newtonian_constant_matches_heat_kernel_integral() {
        let oracle = integrate_to_infinity(
            |t| (2.0 * PI * t).powf(-1.5) * (-0.5 / t).exp(),
            0.0,
            Tol::default(),
        );
        let v = riesz_green_free(3, 1.0, &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert!((v - oracle).abs() < 1e-8 * oracle, "{v} vs {oracle}");
        assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn riesz_homogeneity_and_diagonal() {
        let (x, y) = ([0.1, 0.2], [0.7, -0.4]);
        let base = riesz_green_free(2, 0.3, &x, &y).unwrap();
        let lam: f64 = 2.5;
        let scaled = riesz_green_free(2, 0.3, &[0.25, 0.5], &[1.75, -1.0]).unwrap();
        assert!((scaled - lam.powf(0.6 - 2.0) * base).abs() < 1e-12 * base);
        assert_eq!(riesz_green_free(2, 0.3, &x, &x).unwrap(), f64::INFINITY);
        assert!(matches!(riesz_green_free(1, 0.5, &[0.0], &[1.0]), Err(Error::Unsupported(_))));
        assert!(matches!(riesz_green_free(2, 1.0, &x, &y), Err(Error::Unsupported(_))));
    }

    #[test]
    fn inner_integral_matches_incomplete_beta() {
        for &(d, s) in &[(1usize, 0.25), (2, 0.75), (3, 0.5), (3, 1.0), (2, 0.1)] {
            let b = d as f64 / 2.0 - s;
            for &r0 in &[1e-4, 0.3, 1.0, 7.0, 1e4] {
                let u0 = r0 / (1.0 + r0);
                let oracle = beta_reg(s, b, u0) * beta(s, b);
                let v = green_inner_integral(d, s, r0);
                assert!((v - oracle).abs() < 1e-9 * oracle, "d={d} s={s} r0={r0}: {v} vs {oracle}");
            }
        }
    }

    #[test]
    fn green_ball_properties() {
        let (x, y) = ([0.2, 0.0], [-0.3, 0.1]);
        let g = green_ball(2, 0.75, 1.0, &x, &y).unwrap();
        assert!((g - green_ball(2, 0.75, 1.0, &y, &x).unwrap()).abs() < 1e-14 * g);
        assert!(g <= riesz_green_free(2, 0.75, &x, &y).unwrap());
        let central = green_ball(2, 0.75, 1.0, &x, &[0.0, 0.0]).unwrap();
        let edge = green_ball(2, 0.75, 1.0, &x, &[1.0 - 1e-6, 0.0]).unwrap();
        assert!(edge < 1e-3 * central);
        assert!(green_ball(2, 0.75, 1.0, &x, &[1.1, 0.0]).is_err());
        assert_eq!(green_ball(2, 0.75, 1.0, &x, &x).unwrap(), f64::INFINITY);
    }

    #[test]
    fn brownian_ball_green_closed_forms() {
        // d = 1, ½Δ on (−1, 1): G(x, y) = (1 − x∨y)(1 + x∧y)
        for &(x, y) in &[(0.0, 0.0), (0.3, -0.5), (-0.9, 0.2)] {
            let g = green_ball(1, 1.0, 1.0, &[x], &[y]).unwrap();
            let oracle = (1.0 - f64::max(x, y)) * (1.0 + f64::min(x, y));
            assert!((g - oracle).abs() < 1e-9, "{g} vs {oracle}");
        }
        // d = 2: (1/π) log(|x||y − x*| / |x − y|)
        let (x, y) = ([0.3, 0.1], [-0.2, 0.4]);
        let nx2 = norm(&x).powi(2);
        let xs = [x[0] / nx2, x[1] / nx2];
        let oracle = (norm(&x) * dist(&y, &xs) / dist(&x, &y)).ln() / PI;
        let g = green_ball(2, 1.0, 1.0, &x, &y).unwrap();
        assert!((g - oracle).abs() < 1e-9);
        // d = 3: 1/(2π)(1/|x−y| − 1/(|x||y − x*|))
        let (x, y) = ([0.3, 0.1, 0.0], [-0.2, 0.4, 0.1]);
        let nx2 = norm(&x).powi(2);
        let xs: Vec<f64> = x.iter().map(|v| v / nx2).collect();
        let oracle = (1.0 / dist(&x, &y) - 1.0 / (norm(&x) * dist(&y, &xs))) / (2.0 * PI);
        let g = green_ball(3, 1.0, 1.0, &x, &y).unwrap();
        assert!((g - oracle).abs() < 1e-9);
    }

    #[test]
    fn exit_time_is_green_mass() {
        for &(d, s) in &[(1usize, 0.5), (2, 0.75), (3, 0.3), (1, 1.0), (3, 1.0)] {
            let r = 0.7;
            let sampler_mass = {
                let h = d as f64 / 2.0;
                let f = |rho: f64| {
                    if rho == 0.0 {
                        return 0.0;
                    }
                    let mut y = vec![0.0; d];
                    y[0] = rho;
                    rho.powf(2.0 * h - 1.0) * green_ball(d, s, r, &vec![0.0; d], &y).unwrap()
                };
                sphere_area(d) * integrate(f, 0.0, r, Tol::new(1e-12, 1e-9))
            };
            let e = expected_exit_time_ball(d, s, r, &vec![0.0; d]).unwrap();
            assert!((sampler_mass - e).abs() < 1e-6 * e, "d={d} s={s}: {sampler_mass} vs {e}");
        }
        // Brownian interval: E τ = 1 − x² for ½Δ
        let e = expected_exit_time_ball(1, 1.0, 1.0, &[0.5]).unwrap();
        assert!((e - 0.75).abs() < 1e-14);
    }

    #[test]
    fn poisson_density_normalised_and_radial() {
        // mass within f64 resolution of the sphere is ~ε^{1−s}, so s stays ≤ 0.6
        for &(d, s) in &[(1usize, 0.5), (2, 0.6), (3, 0.3)] {
            let h = d as f64 / 2.0;
            // x = 0: radial; mass = ω_d ∫_1^∞ ρ^{d−1} P(ρ) dρ
            let f = |rho: f64| {
                let mut z = vec![0.0; d];
                z[0] = rho;
                rho.powf(2.0 * h - 1.0) * poisson_ball(d, s, 1.0, &vec![0.0; d], &z).unwrap()
            };
            // u = 1/ρ² maps the tail to a Beta(s, 1−s) shape on (0, 1); the
            // endpoint singularities are removed by u = v^{1/s} and 1 − u = w^{1/(1−s)}
            let g = |u: f64| {
                let rho = u.powf(-0.5);
                if u <= 0.0 || rho <= 1.0 {
                    0.0
                } else {
                    f(rho) * 0.5 * u.powf(-1.5)
                }
            };
            let tol = Tol::new(1e-12, 1e-10);
            let lo = integrate(|v: f64| g(v.powf(1.0 / s)) * v.powf(1.0 / s - 1.0) / s, 0.0, 0.5f64.powf(s), tol);
            let t = 1.0 - s;
            let hi = integrate(|w: f64| g(1.0 - w.powf(1.0 / t)) * w.powf(1.0 / t - 1.0) / t, 0.0, 0.5f64.powf(t), tol);
            let mass = sphere_area(d) * (lo + hi);
            assert!((mass - 1.0).abs() < 1e-6, "d={d} s={s}: {mass}");
        }
        let a = poisson_ball(2, 0.5, 1.0, &[0.0, 0.0], &[1.5, 0.0]).unwrap();
        let b = poisson_ball(2, 0.5, 1.0, &[0.0, 0.0], &[0.0, -1.5]).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!(poisson_ball(2, 0.5, 1.0, &[0.0, 0.0], &[0.5, 0.0]).is_err());
    }

    #[test]
    fn poisson_mass_near_sphere_vanishes() {
        let s = 0.6;
        let shell = |delta: f64| {
            integrate(
                |rho| poisson_ball(1, s, 1.0, &[0.3], &[rho]).unwrap(),
                1.0 + 1e-14,
                1.0 + delta,
                Tol::new(1e-14, 1e-8),
            )
        };
        let masses: Vec<f64> = [1e-2, 1e-4, 1e-6, 1e-8, 1e-10].iter().map(|d| shell(*d)).collect();
        // mass ~ δ^{1−s}
        assert!(masses.windows(2).all(|w| w[1] < w[0]), "{masses:?}");
        assert!(masses[4] < 1e-3, "{masses:?}");
    }

    /// The exit density equals ∫_B G_B(x, y) ν(z − y) dy.
    #[test]
    fn ikeda_watanabe_closed_form() {
        use crate::levy::triplet::stable_density_constant;
        let (s, x, z) = (0.5, 0.2, 1.6);
        let c = stable_density_constant(1, s);
        let tol = Tol::new(1e-13, 1e-10);
        let lhs = integrate(|y| green_ball(1, s, 1.0, &[x], &[y]).unwrap() * c * (z - y).abs().powf(-1.0 - 2.0 * s), -1.0, x, tol)
            + integrate(|y| green_ball(1, s, 1.0, &[x], &[y]).unwrap() * c * (z - y).abs().powf(-1.0 - 2.0 * s), x, 1.0, tol);
        let rhs = poisson_ball(1, s, 1.0, &[x], &[z]).unwrap();
        assert!((lhs - rhs).abs() < 1e-3 * rhs, "{lhs} vs {rhs}");

        // d = 2 in polar coordinates around x
        let (s, x, z) = (0.75, [0.2, 0.0], [0.0, 1.4]);
        let c = stable_density_constant(2, s);
        let along = |theta: f64| {
            let (dx, dy) = (theta.cos(), theta.sin());
            // chord length from x to the unit circle along θ
            let b = x[0] * dx + x[1] * dy;
            let len = -b + (b * b - (norm(&x).powi(2) - 1.0)).sqrt();
            integrate(
                |t| {
                    let y = [x[0] + t * dx, x[1] + t * dy];
                    t * green_ball(2, s, 1.0, &x, &y).unwrap() * c * dist(&z, &y).powf(-2.0 - 2.0 * s)
                },
                0.0,
                len,
                Tol::new(1e-12, 1e-9),
            )
        };
        let lhs = integrate(along, 0.0, 2.0 * PI, Tol::new(1e-12, 1e-8));
        let rhs = poisson_ball(2, s, 1.0, &x, &z).unwrap();
        assert!((lhs - rhs).abs() < 1e-3 * rhs, "{lhs} vs {rhs}");
    }

    #[test]
    fn newtonian_interval() {
        assert_eq!(newtonian_exit_interval(0.0, 1.0, 0.25).unwrap(), 0.25);
        assert_eq!(newtonian_exit_interval(-1.0, 1.0, 0.0).unwrap(), 0.5);
        assert!(newtonian_exit_interval(0.0, 1.0, 1e-12).unwrap() < 1e-11);
        assert!(newtonian_exit_interval(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn continuity_off_diagonal() {
        let h = 1e-6;
        let (x, y) = ([0.1, 0.2], [-0.3, 0.35]);
        let g0 = green_ball(2, 0.4, 1.0, &x, &y).unwrap();
        let g1 = green_ball(2, 0.4, 1.0, &x, &[y[0] + h, y[1]]).unwrap();
        assert!((g0 - g1).abs() < 1e-4 * g0);
        let p0 = poisson_ball(2, 0.4, 1.0, &x, &[1.3, 0.2]).unwrap();
        let p1 = poisson_ball(2, 0.4, 1.0, &x, &[1.3 + h, 0.2]).unwrap();
        assert!((p0 - p1).abs() < 1e-4 * p0);
    }

    #[test]
    fn occupation_sampler_matches_green_profile() {
        for &(d, s) in &[(2usize, 0.75), (1, 0.3), (3, 1.0), (1, 1.0)] {
            let sampler = BallOccupationSampler::new(d, s).unwrap();
            let mut rng = SeedTree::new(11).derive("occ").rng();
            let n = 100_000;
            let mut y = vec![0.0; d];
            let cut = 0.5;
            let mut inside = 0usize;
            for _ in 0..n {
                sampler.sample(1.0, &mut rng, &mut y);
                if norm(&y) < cut {
                    inside += 1;
                }
            }
            let h = d as f64 / 2.0;
            let mass = |hi: f64| {
                integrate(
                    |rho: f64| {
                        if rho == 0.0 {
                            return 0.0;
                        }
                        let mut z = vec![0.0; d];
                        z[0] = rho;
                        rho.powf(2.0 * h - 1.0) * green_ball(d, s, 1.0, &vec![0.0; d], &z).unwrap()
                    },
                    0.0,
                    hi,
                    Tol::new(1e-12, 1e-9),
                )
            };
            let p = mass(cut) / mass(1.0);
            let emp = inside as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((emp - p).abs() < 4.0 * se, "d={d} s={s}: {emp} vs {p}");
        }
    }

    fn point_in_ball(r: f64) -> impl proptest::strategy::Strategy<Value = [f64; 2]> {
        use proptest::prelude::*;
        (0.0f64..0.95, 0.0f64..std::f64::consts::TAU).prop_map(move |(a, t)| [r * a * t.cos(), r * a * t.sin()])
    }

    proptest::proptest! {
        #[test]
        fn ball_green_is_symmetric_and_below_the_free_kernel(
            s in 0.1f64..0.95,
            x in point_in_ball(1.0),
            y in point_in_ball(1.0),
        ) {
            proptest::prop_assume!(dist(&x, &y) > 1e-3);
            let g = green_ball(2, s, 1.0, &x, &y).unwrap();
            let h = green_ball(2, s, 1.0, &y, &x).unwrap();
            proptest::prop_assert!(g >= 0.0);
            proptest::prop_assert!((g - h).abs() <= 1e-9 * g.max(1e-300));
            let free = riesz_green_free(2, s, &x, &y).unwrap();
            proptest::prop_assert!(g <= free * (1.0 + 1e-9));
        }
    }
}
