use serde::{Deserialize, Serialize};

use super::field::ScalarField;
use crate::error::{arg, domain, Result};
use crate::levy::{stable_density_constant, JumpSpec, Shape};
use crate::quad::{sphere_rule, GaussRule};

/// Exterior values `u` on `D^c` together with the set `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExteriorCharge {
    pub u_exterior: ScalarField,
    pub outer: Shape,
}

/// The jump intensity `J(y) = ∫_{D^c} u(z) ν(z − y) dz` for `y ∈ D`.
///
/// Along each ray `y + tθ` the radial measure is `c t^{−1−2s} dt`. The
/// substitution `v = t^{−2s}` turns every exterior interval, including the
/// unbounded one, into a finite `v`-interval with a bounded integrand, so
/// no truncation is needed.
#[derive(Debug, Clone)]
pub struct ExteriorIntensity {
    d: usize,
    charge: ExteriorCharge,
    /// `(direction, angular weight, c, s)` for every ray family.
    rays: Vec<(Vec<f64>, f64, f64, f64)>,
    radial: GaussRule,
}

impl ExteriorIntensity {
    pub fn new(jump: &JumpSpec, charge: ExteriorCharge) -> Result<Self> {
        let d = charge.outer.dim();
        jump.validate(d)?;
        let mut rays = Vec::new();
        match jump {
            JumpSpec::None => {}
            JumpSpec::IsotropicStable { s } | JumpSpec::MixedLaplacianStable { s } => {
                let c = stable_density_constant(d, *s);
                let n = match d {
                    1 => 2,
                    2 => 128,
                    _ => 24,
                };
                for (dir, w) in sphere_rule(d, n) {
                    rays.push((dir, w, c, *s));
                }
            }
            JumpSpec::CylindricalStable { s } => {
                for (i, si) in s.iter().enumerate() {
                    let c = stable_density_constant(1, *si);
                    for sign in [1.0, -1.0] {
                        let mut e = vec![0.0; d];
                        e[i] = sign;
                        rays.push((e, 1.0, c, *si));
                    }
                }
            }
        }
        Ok(Self {
            d,
            charge,
            rays,
            radial: GaussRule::new(48, 0.0, 1.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.rays.is_empty() || self.charge.u_exterior.is_zero()
    }

    /// `J(y)`; requires `y ∈ D`.
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.d {
            return arg("point has the wrong dimension");
        }
        if !self.charge.outer.contains(y) {
            return domain("the exterior intensity is finite only inside D");
        }
        Ok(self.eval_inside(y))
    }

    fn eval_inside(&self, y: &[f64]) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let mut z = vec![0.0; self.d];
        let mut total = 0.0;
        for (theta, w, c, s) in &self.rays {
            for (t0, t1) in self.charge.outer.ray_exterior_intervals(y, theta) {
                let v0 = t0.powf(-2.0 * s);
                let v1 = if t1.is_finite() { t1.powf(-2.0 * s) } else { 0.0 };
                let mut acc = 0.0;
                for (node, wt) in self.radial.nodes.iter().zip(&self.radial.weights) {
                    let v = v1 + node * (v0 - v1);
                    let t = v.powf(-0.5 / s);
                    for k in 0..self.d {
                        z[k] = y[k] + t * theta[k];
                    }
                    acc += wt * self.charge.u_exterior.eval(&z);
                }
                total += w * c / (2.0 * s) * (v0 - v1) * acc;
            }
        }
        total
    }

    /// Interpolating table of `J` over the bounding box of `region`.
    pub fn tabulate(&self, region: &Shape) -> Result<IntensityTable> {
        if region.dim() != self.d {
            return arg("table region has the wrong dimension");
        }
        let (lo, hi) = region.bounding_box();
        let m: usize = if self.d <= 2 { 65 } else { 41 };
        let total = m.pow(self.d as u32);
        let values: Vec<f64> = crate::mc::map_indices(total as u64, |k| {
            let p = node_point(&lo, &hi, m, k as usize);
            if self.charge.outer.contains(&p) {
                self.eval_inside(&p)
            } else {
                f64::NAN
            }
        });
        Ok(IntensityTable {
            lo,
            hi,
            m,
            values,
            exact: self.clone(),
        })
    }
}

fn node_point(lo: &[f64], hi: &[f64], m: usize, mut k: usize) -> Vec<f64> {
    let mut p = vec![0.0; lo.len()];
    for i in 0..lo.len() {
        let j = k % m;
        k /= m;
        p[i] = lo[i] + (hi[i] - lo[i]) * j as f64 / (m - 1) as f64;
    }
    p
}

/// Multilinear interpolant of [`ExteriorIntensity`] on a regular grid; falls
/// back to direct evaluation outside the grid or next to nodes outside `D`.
#[derive(Debug, Clone)]
pub struct IntensityTable {
    lo: Vec<f64>,
    hi: Vec<f64>,
    m: usize,
    values: Vec<f64>,
    exact: ExteriorIntensity,
}

impl IntensityTable {
    pub fn eval(&self, y: &[f64]) -> f64 {
        let d = self.lo.len();
        let mut base = 0usize;
        let mut stride = 1usize;
        let mut frac = [0.0f64; 3];
        let mut offs = [0usize; 3];
        for i in 0..d {
            let u = (y[i] - self.lo[i]) / (self.hi[i] - self.lo[i]) * (self.m - 1) as f64;
            if !(u >= 0.0 && u <= (self.m - 1) as f64) {
                return self.exact.eval_inside(y);
            }
            let j = (u.floor() as usize).min(self.m - 2);
            frac[i] = u - j as f64;
            base += j * stride;
            offs[i] = stride;
            stride *= self.m;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut idx = base;
            let mut w = 1.0;
            for i in 0..d {
                if corner >> i & 1 == 1 {
                    idx += offs[i];
                    w *= frac[i];
                } else {
                    w *= 1.0 - frac[i];
                }
            }
            let v = self.values[idx];
            if !v.is_finite() {
                return self.exact.eval_inside(y);
            }
            acc += w * v;
        }
        acc
    }
}
