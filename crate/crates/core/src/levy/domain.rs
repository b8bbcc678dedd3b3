use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[inline]
pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Bounded open sets used as `V` and `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Annulus { center: Vec<f64>, r_in: f64, r_out: f64 },
}

impl Shape {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Shape::Ball { center, radius }
    }

    pub fn centered_ball(d: usize, radius: f64) -> Self {
        Shape::Ball {
            center: vec![0.0; d],
            radius,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Shape::Ball { center, .. } | Shape::Annulus { center, .. } => center.len(),
            Shape::Box { lo, .. } => lo.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Shape::Ball { center, radius } => {
                if center.is_empty() || !(*radius > 0.0) || !radius.is_finite() {
                    return domain("ball needs d >= 1 and a finite positive radius");
                }
            }
            Shape::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return domain("box needs lo < hi componentwise");
                }
            }
            Shape::Annulus { center, r_in, r_out } => {
                if center.is_empty() || !(*r_in >= 0.0) || !(r_in < r_out) || !r_out.is_finite() {
                    return domain("annulus needs 0 <= r_in < r_out");
                }
            }
        }
        Ok(())
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Ball { center, radius } => radius - dist(x, center),
            Shape::Box { lo, hi } => {
                let mut inside = f64::INFINITY;
                let mut outside2 = 0.0;
                for i in 0..lo.len() {
                    let a = x[i] - lo[i];
                    let b = hi[i] - x[i];
                    inside = inside.min(a.min(b));
                    let o = (-a).max(-b).max(0.0);
                    outside2 += o * o;
                }
                if inside >= 0.0 {
                    inside
                } else {
                    -outside2.sqrt()
                }
            }
            Shape::Annulus { center, r_in, r_out } => {
                let r = dist(x, center);
                (r - r_in).min(r_out - r)
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.signed_distance(x) > 0.0
    }

    /// Distance from an interior point to the complement.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        self.signed_distance(x).max(0.0)
    }

    /// Outward unit normal of the boundary piece closest to `x`.
    pub fn outward_normal(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Shape::Ball { center, .. } => radial_unit(x, center, 1.0, out),
            Shape::Annulus { center, r_in, r_out } => {
                let r = dist(x, center);
                let sign = if r - r_in < r_out - r { -1.0 } else { 1.0 };
                radial_unit(x, center, sign, out);
            }
            Shape::Box { lo, hi } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                let mut best = f64::INFINITY;
                let mut axis = 0;
                let mut sign = 1.0;
                for i in 0..lo.len() {
                    let a = (x[i] - lo[i]).abs();
                    let b = (hi[i] - x[i]).abs();
                    if a < best {
                        best = a;
                        axis = i;
                        sign = -1.0;
                    }
                    if b < best {
                        best = b;
                        axis = i;
                        sign = 1.0;
                    }
                }
                out[axis] = sign;
            }
        }
    }

    /// Projects `x` onto the nearest boundary piece and nudges it outward so
    /// that the result lies in the complement.
    pub fn project_outside(&self, x: &[f64], out: &mut [f64]) {
        let mut n = vec![0.0; x.len()];
        self.outward_normal(x, &mut n);
        let sd = self.signed_distance(x);
        let nudge = 1e-12 * (1.0 + self.diameter());
        for i in 0..x.len() {
            out[i] = x[i] + (sd.max(0.0) + nudge) * n[i];
        }
        if self.contains(out) {
            // Corner cases of boxes: walk further along the normal.
            let mut step = nudge;
            while self.contains(out) {
                step *= 2.0;
                for i in 0..x.len() {
                    out[i] += step * n[i];
                }
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Shape::Ball { radius, .. } => 2.0 * radius,
            Shape::Annulus { r_out, .. } => 2.0 * r_out,
            Shape::Box { lo, hi } => dist(lo, hi),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Shape::Ball { center, radius: r } | Shape::Annulus { center, r_out: r, .. } => (
                center.iter().map(|c| c - r).collect(),
                center.iter().map(|c| c + r).collect(),
            ),
            Shape::Box { lo, hi } => (lo.clone(), hi.clone()),
        }
    }

    pub fn volume(&self) -> f64 {
        let d = self.dim();
        match self {
            Shape::Ball { radius, .. } => crate::quad::ball_volume(d) * radius.powi(d as i32),
            Shape::Annulus { r_in, r_out, .. } => {
                crate::quad::ball_volume(d) * (r_out.powi(d as i32) - r_in.powi(d as i32))
            }
            Shape::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
        }
    }

    /// `true` when the closure of `inner` lies in `self` (V ⊂⊂ D). Exact for
    /// balls and boxes; for annuli it tests the radial band conservatively.
    pub fn compactly_contains(&self, inner: &Shape) -> bool {
        if inner.dim() != self.dim() {
            return false;
        }
        match (self, inner) {
            (Shape::Ball { center: c, radius: r }, Shape::Ball { center: ci, radius: ri }) => {
                dist(c, ci) + ri < *r
            }
            (Shape::Ball { center: c, radius: r }, Shape::Box { lo, hi }) => {
                // farthest corner
                let far: f64 = (0..lo.len())
                    .map(|i| {
                        let a = (lo[i] - c[i]).abs().max((hi[i] - c[i]).abs());
                        a * a
                    })
                    .sum::<f64>()
                    .sqrt();
                far < *r
            }
            (Shape::Box { lo, hi }, _) => {
                let (ilo, ihi) = inner.bounding_box();
                (0..lo.len()).all(|i| lo[i] < ilo[i] && ihi[i] < hi[i])
            }
            (Shape::Annulus { center, r_in, r_out }, _) => {
                let (ilo, ihi) = inner.bounding_box();
                // inner must avoid the hole and stay inside the outer ball
                let outer_ok = Shape::Ball {
                    center: center.clone(),
                    radius: *r_out,
                }
                .compactly_contains(inner);
                let mid: Vec<f64> = ilo.iter().zip(&ihi).map(|(a, b)| 0.5 * (a + b)).collect();
                let half = 0.5 * dist(&ilo, &ihi);
                outer_ok && dist(&mid, center) - half > *r_in
            }
            (Shape::Ball { center: c, radius: r }, Shape::Annulus { center: ci, r_out, .. }) => {
                dist(c, ci) + r_out < *r
            }
        }
    }

    /// Parameter intervals `[t0, t1]` (t1 may be `∞`) where the ray
    /// `y + t·θ`, `t > 0`, lies in the complement of the closure-free set.
    pub fn ray_exterior_intervals(&self, y: &[f64], theta: &[f64]) -> Vec<(f64, f64)> {
        match self {
            Shape::Ball { center, radius } => match sphere_hits(y, theta, center, *radius) {
                Some((_, t1)) => vec![(t1.max(0.0), f64::INFINITY)],
                None => vec![(0.0, f64::INFINITY)],
            },
            Shape::Annulus { center, r_in, r_out } => {
                let mut v = Vec::new();
                if *r_in > 0.0 {
                    if let Some((t0, t1)) = sphere_hits(y, theta, center, *r_in) {
                        if t1 > 0.0 {
                            v.push((t0.max(0.0), t1));
                        }
                    }
                }
                match sphere_hits(y, theta, center, *r_out) {
                    Some((_, t1)) => v.push((t1.max(0.0), f64::INFINITY)),
                    None => v.push((0.0, f64::INFINITY)),
                }
                v
            }
            Shape::Box { lo, hi } => {
                // slab method: the ray is inside on [tmin, tmax]
                let mut tmin = f64::NEG_INFINITY;
                let mut tmax = f64::INFINITY;
                for i in 0..lo.len() {
                    if theta[i].abs() < 1e-300 {
                        if y[i] <= lo[i] || y[i] >= hi[i] {
                            return vec![(0.0, f64::INFINITY)];
                        }
                        continue;
                    }
                    let a = (lo[i] - y[i]) / theta[i];
                    let b = (hi[i] - y[i]) / theta[i];
                    tmin = tmin.max(a.min(b));
                    tmax = tmax.min(a.max(b));
                }
                if tmax <= tmin.max(0.0) {
                    vec![(0.0, f64::INFINITY)]
                } else if tmin > 0.0 {
                    vec![(0.0, tmin), (tmax, f64::INFINITY)]
                } else {
                    vec![(tmax, f64::INFINITY)]
                }
            }
        }
    }
}

fn radial_unit(x: &[f64], center: &[f64], sign: f64, out: &mut [f64]) {
    let r = dist(x, center);
    if r < 1e-300 {
        out.iter_mut().for_each(|o| *o = 0.0);
        out[0] = sign;
        return;
    }
    for i in 0..x.len() {
        out[i] = sign * (x[i] - center[i]) / r;
    }
}

/// Ray–sphere intersection parameters `t0 ≤ t1` for `|y + tθ − c| = r`.
fn sphere_hits(y: &[f64], theta: &[f64], c: &[f64], r: f64) -> Option<(f64, f64)> {
    let mut b = 0.0;
    let mut cc = -r * r;
    for i in 0..y.len() {
        let w = y[i] - c[i];
        b += w * theta[i];
        cc += w * w;
    }
    let disc = b * b - cc;
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some((-b - s, -b + s))
}

/// A bounded open set together with its finite singular set `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub shape: Shape,
    #[serde(default)]
    pub singular_set: Vec<Vec<f64>>,
}

impl Domain {
    pub fn new(shape: Shape) -> Self {
        Self {
            shape,
            singular_set: Vec::new(),
        }
    }

    pub fn with_singular_set(shape: Shape, k: Vec<Vec<f64>>) -> Result<Self> {
        let d = Self { shape, singular_set: k };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        for p in &self.singular_set {
            if p.len() != self.shape.dim() || !self.shape.contains(p) {
                return domain("singular points must lie in the interior");
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.shape.contains(x)
    }
}

impl From<Shape> for Domain {
    fn from(shape: Shape) -> Self {
        Domain::new(shape)
    }
}

/// Halton low-discrepancy points in `[0,1)^d`.
pub fn halton(index: u64, d: usize) -> Vec<f64> {
    const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    (0..d)
        .map(|k| {
            let base = PRIMES[k % PRIMES.len()];
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index + 1;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}

/// Quasi-random points of `region` (rejection from the bounding box).
pub fn quasi_random_points(region: &Shape, count: usize) -> Vec<Vec<f64>> {
    let (lo, hi) = region.bounding_box();
    let d = region.dim();
    let mut out = Vec::with_capacity(count);
    let mut i = 0u64;
    while out.len() < count && i < 1000 * count as u64 + 1000 {
        let u = halton(i, d);
        let p: Vec<f64> = (0..d).map(|k| lo[k] + u[k] * (hi[k] - lo[k])).collect();
        if region.contains(&p) {
            out.push(p);
        }
        i += 1;
    }
    out
}
