//! Numerical quadrature used by the closed-form kernels and the
//! Ikeda–Watanabe style exterior integrals.

use std::f64::consts::PI;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tol {
    fn default() -> Self {
        Self {
            abs: 1e-12,
            rel: 1e-10,
            max_intervals: 2000,
        }
    }
}

impl Tol {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            ..Self::default()
        }
    }
}

/// Adaptive Gauss–Kronrod (7/15) on `[a, b]`; bisects the interval with the
/// largest error estimate until the global error meets `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tol) -> f64 {
    integrate_with_error(f, a, b, tol).0
}

pub fn integrate_with_error<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tol) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let (v, e) = gk15(&f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > tol.abs.max(tol.rel * total.abs()) && pieces.len() < tol.max_intervals {
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|p, q| p.1 .3.total_cmp(&q.1 .3))
            .expect("non-empty");
        let (lo, hi, pv, pe) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            pieces.push((lo, hi, pv, 0.0));
            err -= pe;
            continue;
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
    // Re-sum to avoid drift from the running updates.
    let total: f64 = pieces.iter().map(|p| p.2).sum();
    let err: f64 = pieces.iter().map(|p| p.3).sum();
    (total, err)
}

/// Integral over `[a, ∞)` through `x = a + t/(1-t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: Tol) -> f64 {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let om = 1.0 - t;
            let x = a + t / om;
            let v = f(x) / (om * om);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "need at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Fixed Gauss–Legendre rule mapped onto `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize, a: f64, b: f64) -> Self {
        let (x, w) = gauss_legendre(n);
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        Self {
            nodes: x.iter().map(|t| c + h * t).collect(),
            weights: w.iter().map(|wi| h * wi).collect(),
        }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }
}

/// Quadrature over the unit sphere `S^{d-1}` for d = 1, 2, 3: directions and
/// weights summing to the surface area.
pub fn sphere_rule(d: usize, n: usize) -> Vec<(Vec<f64>, f64)> {
    match d {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => {
            let h = 2.0 * PI / n as f64;
            (0..n)
                .map(|k| {
                    let t = (k as f64 + 0.5) * h;
                    (vec![t.cos(), t.sin()], h)
                })
                .collect()
        }
        3 => {
            let polar = GaussRule::new(n, -1.0, 1.0);
            let m = 2 * n;
            let h = 2.0 * PI / m as f64;
            let mut out = Vec::with_capacity(n * m);
            for (ct, w) in polar.nodes.iter().zip(&polar.weights) {
                let st = (1.0 - ct * ct).max(0.0).sqrt();
                for k in 0..m {
                    let p = (k as f64 + 0.5) * h;
                    out.push((vec![st * p.cos(), st * p.sin(), *ct], w * h));
                }
            }
            out
        }
        _ => panic!("sphere quadrature implemented for d <= 3"),
    }
}

/// Surface area of the unit sphere in R^d.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / statrs::function::gamma::gamma(h)
}

/// Volume of the unit ball in R^d.
pub fn ball_volume(d: usize) -> f64 {
    sphere_area(d) / d as f64
}
