use serde::{Deserialize, Serialize};

use crate::levy::domain::{dist, Shape};

/// An open bounded set that paths can be run in.
pub trait Region: Sync {
    fn dim(&self) -> usize;
    /// Positive inside, negative outside; the absolute value is the distance
    /// to the boundary at least near it.
    fn signed_distance(&self, x: &[f64]) -> f64;
    fn outward_normal(&self, x: &[f64], out: &mut [f64]);
    /// Characteristic length used for relative tolerances.
    fn scale(&self) -> f64;

    fn contains(&self, x: &[f64]) -> bool {
        self.signed_distance(x) > 0.0
    }

    /// Moves `x` along the outward normal until it leaves the region.
    fn project_outside(&self, x: &[f64], out: &mut [f64]) {
        let mut n = vec![0.0; x.len()];
        self.outward_normal(x, &mut n);
        let sd = self.signed_distance(x);
        let mut step = sd.max(0.0) + 1e-12 * (1.0 + self.scale());
        loop {
            for i in 0..x.len() {
                out[i] = x[i] + step * n[i];
            }
            if !self.contains(out) {
                return;
            }
            step *= 2.0;
        }
    }
}

impl Region for Shape {
    fn dim(&self) -> usize {
        Shape::dim(self)
    }

    fn signed_distance(&self, x: &[f64]) -> f64 {
        Shape::signed_distance(self, x)
    }

    fn outward_normal(&self, x: &[f64], out: &mut [f64]) {
        Shape::outward_normal(self, x, out)
    }

    fn scale(&self) -> f64 {
        0.5 * self.diameter()
    }
}

/// A shape with closed balls removed; hitting a hole ends the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Punctured {
    pub outer: Shape,
    pub holes: Vec<(Vec<f64>, f64)>,
}

impl Punctured {
    pub fn new(outer: Shape, holes: Vec<(Vec<f64>, f64)>) -> Self {
        Self { outer, holes }
    }

    /// Index of the hole containing `x`, if any.
    pub fn hole_of(&self, x: &[f64]) -> Option<usize> {
        self.holes.iter().position(|(c, r)| dist(x, c) <= *r)
    }

    fn nearest_hole(&self, x: &[f64]) -> Option<(usize, f64)> {
        self.holes
            .iter()
            .enumerate()
            .map(|(k, (c, r))| (k, dist(x, c) - r))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

impl Region for Punctured {
    fn dim(&self) -> usize {
        self.outer.dim()
    }

    fn signed_distance(&self, x: &[f64]) -> f64 {
        let o = self.outer.signed_distance(x);
        match self.nearest_hole(x) {
            Some((_, h)) => o.min(h),
            None => o,
        }
    }

    fn outward_normal(&self, x: &[f64], out: &mut [f64]) {
        let o = self.outer.signed_distance(x);
        match self.nearest_hole(x) {
            Some((k, h)) if h < o => {
                let (c, _) = &self.holes[k];
                let r = dist(x, c);
                for i in 0..x.len() {
                    out[i] = if r > 0.0 { (c[i] - x[i]) / r } else if i == 0 { 1.0 } else { 0.0 };
                }
            }
            _ => self.outer.outward_normal(x, out),
        }
    }

    fn scale(&self) -> f64 {
        0.5 * self.outer.diameter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn punctured_geometry() {
        let p = Punctured::new(Shape::centered_ball(2, 1.0), vec![(vec![0.5, 0.0], 0.1)]);
        assert!(p.contains(&[0.0, 0.0]));
        assert!(!p.contains(&[0.5, 0.05]));
        assert!((p.signed_distance(&[0.3, 0.0]) - 0.1).abs() < 1e-15);
        let mut out = [0.0; 2];
        p.project_outside(&[0.35, 0.0], &mut out);
        assert!(!p.contains(&out));
        assert_eq!(p.hole_of(&out), Some(0));
        p.project_outside(&[-0.95, 0.0], &mut out);
        assert!(out[0] <= -1.0 && p.hole_of(&out).is_none());
    }
}
