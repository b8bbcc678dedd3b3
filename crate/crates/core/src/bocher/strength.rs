use serde::{Deserialize, Serialize};

use crate::error::{arg, unsupported, Result};
use crate::kernels::riesz_constant;
use crate::potential::ScalarField;
use crate::quad::sphere_rule;

/// Asymptotic fit of `u(x) ≈ a·C(d,s)|x − x₀|^{2s−d}` near `x₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityFit {
    /// The limit `a`.
    pub coefficient: f64,
    /// Coefficient of the `r^{d−2s}` correction, proportional to the regular
    /// part of `u` at `x₀`.
    pub regular_part: f64,
    /// `(r, sphere-averaged u·r^{d−2s}/C)` per rung.
    pub rungs: Vec<(f64, f64)>,
}

/// Estimates the Green-atom coefficient of `u` at `x0` from sphere averages on
/// a decreasing radius ladder.
///
/// `g(r) = ⟨u(x₀ + rθ)⟩_θ r^{d−2s}/C(d,s)` is fitted by least squares to
/// `a + b r^{d−2s}`, which is exact for a Riesz atom plus a harmonic regular
/// part up to `O(r^{d−2s+2})`. `s = 1` is the Brownian `½Δ` normalisation.
pub fn singularity_strength(u: &ScalarField, x0: &[f64], s: f64, radii: &[f64]) -> Result<SingularityFit> {
    let d = x0.len();
    if d == 0 {
        return arg("x0 must have at least one coordinate");
    }
    if !(s > 0.0 && s <= 1.0) {
        return arg(format!("stability parameter {s} outside (0,1]"));
    }
    if (d as f64) <= 2.0 * s {
        return unsupported(format!("no Riesz profile for d = {d} ≤ 2s = {}", 2.0 * s));
    }
    if radii.len() < 4 {
        return arg("the radius ladder needs at least four rungs");
    }
    if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return arg("the radius ladder must be positive and strictly decreasing");
    }
    let q = d as f64 - 2.0 * s;
    let c = riesz_constant(d, s);
    let rule = sphere_rule(d, if d == 2 { 64 } else { 24 });
    let total_w: f64 = rule.iter().map(|(_, w)| w).sum();
    let mut p = vec![0.0; d];
    let rungs: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            let mut acc = 0.0;
            for (theta, w) in &rule {
                for k in 0..d {
                    p[k] = x0[k] + r * theta[k];
                }
                acc += w * u.eval(&p);
            }
            (r, acc / total_w * r.powf(q) / c)
        })
        .collect();
    // least squares of g = a + b t with t = r^q
    let m = rungs.len() as f64;
    let (st, sg) = rungs.iter().fold((0.0, 0.0), |(a, b), (r, g)| (a + r.powf(q), b + g));
    let (mt, mg) = (st / m, sg / m);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (r, g) in &rungs {
        let t = r.powf(q) - mt;
        sxx += t * t;
        sxy += t * (g - mg);
    }
    let b = sxy / sxx;
    Ok(SingularityFit {
        coefficient: mg - b * mt,
        regular_part: b,
        rungs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::riesz_green_free;

    const LADDER: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

    #[test]
    fn unit_atom() {
        for (d, s) in [(2usize, 0.75), (3, 0.5), (3, 1.0)] {
            let x0 = vec![0.1; d];
            let c = x0.clone();
            let u = ScalarField::custom(move |x| riesz_green_free(d, s, x, &c).unwrap());
            let fit = singularity_strength(&u, &x0, s, &LADDER).unwrap();
            assert!((fit.coefficient - 1.0).abs() < 1e-9, "{d} {s}: {}", fit.coefficient);
        }
    }

    #[test]
    fn smooth_function_has_no_atom() {
        let u = ScalarField::Affine {
            c0: 2.0,
            grad: vec![0.5, -1.0],
        };
        let fit = singularity_strength(&u, &[0.2, 0.1], 0.75, &LADDER).unwrap();
        assert!(fit.coefficient.abs() < 1e-9, "{}", fit.coefficient);
    }

    #[test]
    fn double_atom_plus_harmonic() {
        // 2G plus a Newtonian potential of a far charge, harmonic near x₀
        let d = 3;
        let u = ScalarField::custom(move |x| {
            2.0 * riesz_green_free(d, 1.0, x, &[0.0; 3]).unwrap() + 1.0 / ((x[0] - 3.0).powi(2) + x[1] * x[1] + x[2] * x[2]).sqrt()
        });
        let fit = singularity_strength(&u, &[0.0; 3], 1.0, &LADDER).unwrap();
        assert!((fit.coefficient - 2.0).abs() < 0.04, "{}", fit.coefficient);
    }

    #[test]
    fn ladder_errors() {
        let u = ScalarField::Constant { value: 1.0 };
        assert!(singularity_strength(&u, &[0.0, 0.0], 0.75, &[0.1, 0.05, 0.025]).is_err());
        assert!(singularity_strength(&u, &[0.0, 0.0], 0.75, &[0.1, 0.05, 0.06, 0.01]).is_err());
        assert!(singularity_strength(&u, &[0.0], 0.75, &LADDER).is_err());
    }
}
