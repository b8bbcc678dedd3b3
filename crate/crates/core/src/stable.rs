//! Samplers for stable laws.
//!
//! * symmetric one-dimensional α-stable with `E e^{itX} = e^{-|t|^α}`
//!   (Chambers–Mallows–Stuck),
//! * positive s-stable with `E e^{-λS} = e^{-λ^s}` (Kanter's representation),
//! * rotationally invariant 2s-stable vectors with `E e^{iξ·X} = e^{-|ξ|^{2s}}`,
//!   built by subordinating a Gaussian with a positive s-stable time.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// Symmetric α-stable variate, `0 < α ≤ 2`, unit scale.
pub fn symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v: f64 = (rng.random::<f64>() - 0.5) * PI;
    if (alpha - 1.0).abs() < 1e-12 {
        return v.tan();
    }
    let w: f64 = Exp1.sample(rng);
    let av = alpha * v;
    av.sin() / v.cos().powf(1.0 / alpha) * ((v - av).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Positive s-stable variate, `0 < s < 1`, with Laplace transform `e^{-λ^s}`.
pub fn positive_stable<R: Rng + ?Sized>(s: f64, rng: &mut R) -> f64 {
    // Avoid the endpoints of (0, π) where sin vanishes.
    let u: f64 = loop {
        let u = rng.random::<f64>() * PI;
        if u > 0.0 {
            break u;
        }
    };
    let e: f64 = Exp1.sample(rng);
    (s * u).sin() / u.sin().powf(1.0 / s) * (((1.0 - s) * u).sin() / e).powf((1.0 - s) / s)
}

/// Fills `out` with a rotationally invariant 2s-stable vector of unit scale.
pub fn isotropic_stable<R: Rng + ?Sized>(s: f64, rng: &mut R, out: &mut [f64]) {
    let scale = (2.0 * positive_stable(s, rng)).sqrt();
    for o in out.iter_mut() {
        let g: f64 = StandardNormal.sample(rng);
        *o = scale * g;
    }
}

/// Fills `out` with a uniformly distributed unit vector.
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    if out.len() == 1 {
        out[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        let mut n2 = 0.0;
        for o in out.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *o = g;
            n2 += g * g;
        }
        if n2 > 1e-300 {
            let inv = 1.0 / n2.sqrt();
            out.iter_mut().for_each(|o| *o *= inv);
            return;
        }
    }
}

/// Beta(a, b) variate via two gamma draws.
pub fn beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let x = rand_distr::Gamma::new(a, 1.0).expect("a > 0").sample(rng);
    let y = rand_distr::Gamma::new(b, 1.0).expect("b > 0").sample(rng);
    if x + y == 0.0 {
        return 0.5;
    }
    x / (x + y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn ecf(alpha: f64, t: f64, n: usize) -> f64 {
        let mut rng = SeedTree::new(11).derive("ecf").rng();
        (0..n)
            .map(|_| (t * symmetric_stable(alpha, &mut rng)).cos())
            .sum::<f64>()
            / n as f64
    }

    #[test]
    fn cms_matches_characteristic_function() {
        let n = 200_000;
        for &alpha in &[0.5, 1.0, 1.5, 1.9] {
            for &t in &[0.3f64, 1.0, 2.0] {
                let want = (-t.powf(alpha)).exp();
                let got = ecf(alpha, t, n);
                // |cos| ≤ 1 so the standard error is below 1/sqrt(n)
                assert!((got - want).abs() < 4.0 / (n as f64).sqrt(), "α={alpha} t={t}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn kanter_matches_laplace_transform() {
        let n = 200_000;
        let mut rng = SeedTree::new(5).rng();
        for &s in &[0.25, 0.5, 0.75] {
            let draws: Vec<f64> = (0..n).map(|_| positive_stable(s, &mut rng)).collect();
            for &lam in &[0.5f64, 1.0, 3.0] {
                let want = (-lam.powf(s)).exp();
                let got = draws.iter().map(|x| (-lam * x).exp()).sum::<f64>() / n as f64;
                assert!((got - want).abs() < 4.0 / (n as f64).sqrt(), "s={s} λ={lam}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn isotropic_characteristic_function() {
        let n = 200_000;
        let s = 0.6;
        let mut rng = SeedTree::new(9).rng();
        let xi = [0.7, -0.4];
        let mut acc = 0.0;
        let mut buf = [0.0; 2];
        for _ in 0..n {
            isotropic_stable(s, &mut rng, &mut buf);
            acc += (xi[0] * buf[0] + xi[1] * buf[1]).cos();
        }
        let norm = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        let want = (-norm.powf(2.0 * s)).exp();
        assert!((acc / n as f64 - want).abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn beta_mean() {
        let mut rng = SeedTree::new(3).rng();
        let n = 100_000;
        let m = (0..n).map(|_| beta(0.25, 0.75, &mut rng)).sum::<f64>() / n as f64;
        assert!((m - 0.25).abs() < 0.005);
    }
}
