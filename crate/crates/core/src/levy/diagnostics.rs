//! Derived scalars and structural diagnostics of an operator: `κ₀`, the
//! Blumenthal–Getoor index, the Hörmander bracket rank and the tail weight
//! `ρ_F`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::domain::{halton, norm, Shape};
use super::drift::DriftField;
use super::jet::{Jet, JetSpace};
use super::triplet::{stable_density_constant, JumpSpec};
use crate::error::{arg, domain, unsupported, Error, Result};
use crate::quad::{integrate, Tol};

/// `κ₀ = sup |div b|` over the given sample points.
///
/// Uses the analytic divergence when the field provides one; otherwise
/// central differences if `fd_fallback` is set.
pub fn kappa0(drift: &DriftField, points: &[Vec<f64>], fd_fallback: bool) -> Result<f64> {
    if points.is_empty() {
        return arg("kappa0 needs at least one sample point");
    }
    let mut sup: f64 = 0.0;
    for p in points {
        let v = match drift.divergence(p) {
            Some(v) => v,
            None if fd_fallback => drift.divergence_fd(p),
            None => {
                return Err(Error::Config(
                    "drift has no divergence and finite-difference fallback is off".into(),
                ))
            }
        };
        sup = sup.max(v.abs());
    }
    Ok(sup)
}

/// `κ₀` over the default grid: 10⁴ Halton points of `region`.
pub fn kappa0_on(drift: &DriftField, region: &Shape) -> Result<f64> {
    let pts = super::domain::quasi_random_points(region, 10_000);
    kappa0(drift, &pts, true)
}

/// Closed-form Blumenthal–Getoor index `inf{α > 0 : ∫_{B₁}|x|^α ν(dx) < ∞}`.
pub fn bg_index(jump: &JumpSpec) -> Result<f64> {
    match jump {
        JumpSpec::None => Err(Error::UndefinedIndex("ν ≡ 0".into())),
        JumpSpec::IsotropicStable { s } | JumpSpec::MixedLaplacianStable { s } => Ok(2.0 * s),
        JumpSpec::CylindricalStable { s } => Ok(s.iter().fold(0.0f64, |m, v| m.max(2.0 * v))),
    }
}

/// Radial profiles `f(ρ)` with `∫_{B₁} g(|x|) ν(dx) = Σ_k ∫_0^1 g(ρ) f_k(ρ) dρ`.
fn radial_profiles(jump: &JumpSpec, d: usize) -> Vec<Box<dyn Fn(f64) -> f64>> {
    match jump {
        JumpSpec::None => vec![],
        JumpSpec::IsotropicStable { s } | JumpSpec::MixedLaplacianStable { s } => {
            let s = *s;
            let c = stable_density_constant(d, s) * crate::quad::sphere_area(d);
            vec![Box::new(move |r: f64| c * r.powf(-1.0 - 2.0 * s))]
        }
        JumpSpec::CylindricalStable { s } => s
            .iter()
            .map(|&si| {
                let c = 2.0 * stable_density_constant(1, si);
                Box::new(move |r: f64| c * r.powf(-1.0 - 2.0 * si)) as Box<dyn Fn(f64) -> f64>
            })
            .collect(),
    }
}

/// Result of the integrability scan.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BgScan {
    /// Largest α on the 0.01 grid for which `∫_{B₁}|x|^α ν(dx)` diverges.
    pub threshold: f64,
    pub analytic: f64,
    /// Differs from the scan when the closed form reported in the
    /// literature for cylindrical jumps (the minimum of the sᵢ) disagrees.
    pub literature_min_formula: Option<f64>,
}

impl BgScan {
    pub fn discrepancy(&self) -> Option<String> {
        self.literature_min_formula
            .filter(|v| (v - self.threshold).abs() > 0.01)
            .map(|v| {
                format!(
                    "scan threshold {:.3} differs from min(s_i) = {:.3}",
                    self.threshold, v
                )
            })
    }
}

/// Numerical integrability scan for the Blumenthal–Getoor index.
///
/// For each α on a 0.01 grid the integral over dyadic shells
/// `[2^{-m-1}, 2^{-m}]` deep inside the ball is compared between consecutive
/// shells; the integral converges iff the shell masses shrink.
pub fn bg_index_scan(jump: &JumpSpec, d: usize) -> Result<BgScan> {
    jump.validate(d)?;
    let analytic = bg_index(jump)?;
    let profiles = radial_profiles(jump, d);
    let shell = |alpha: f64, f: &dyn Fn(f64) -> f64, m: i32| {
        let hi = 2f64.powi(-m);
        integrate(|r| r.powf(alpha) * f(r), 0.5 * hi, hi, Tol::new(0.0, 1e-12))
    };
    let mut threshold = 0.0;
    for k in 1..=200 {
        let alpha = k as f64 * 0.01;
        let diverges = profiles.iter().any(|f| {
            let a = shell(alpha, f.as_ref(), 30);
            let b = shell(alpha, f.as_ref(), 31);
            b / a >= 1.0 - 1e-9
        });
        if diverges {
            threshold = alpha;
        }
    }
    let literature_min_formula = match jump {
        JumpSpec::CylindricalStable { s } => Some(s.iter().fold(f64::INFINITY, |m, v| m.min(*v))),
        _ => None,
    };
    Ok(BgScan {
        threshold,
        analytic,
        literature_min_formula,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HormanderResult {
    pub rank_achieved: usize,
    pub n_used: usize,
    pub satisfied: bool,
}

fn numerical_rank(cols: &[Vec<f64>], d: usize) -> usize {
    if cols.is_empty() {
        return 0;
    }
    let m = nalgebra::DMatrix::from_fn(d, cols.len(), |i, j| cols[j][i]);
    let sv = m.singular_values();
    let max = sv.max();
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|v| **v > 1e-8 * max).count()
}

/// Rank of `[√Q, B₁√Q, …, Bₙ√Q, C, B₁C, …, BₙC]` with
/// `Bₙ^{ij} = b·∇B_{n−1}^{ij} − ∇bⁱ·B_{n−1}^{·j} + ½Tr(Q D²B_{n−1}^{ij})`, `B₀ = I`.
///
/// Built-in drifts are differentiated exactly with jets; custom drifts use
/// central differences, which is only accurate enough for `n_max ≤ 1`.
pub fn hormander_rank_check(
    drift: &DriftField,
    q: &[Vec<f64>],
    c: &[Vec<f64>],
    x: &[f64],
    n_max: i64,
) -> Result<HormanderResult> {
    if n_max < 0 {
        return arg("n_max must be non-negative");
    }
    let n_max = n_max as usize;
    let d = x.len();
    let sqrt_q = super::triplet::LevyTriplet::new(vec![0.0; d], q.to_vec(), JumpSpec::None)?.sqrt_q();
    let cmat = nalgebra::DMatrix::from_fn(d, c.first().map_or(0, |r| r.len()), |i, j| c[i][j]);
    let qm = nalgebra::DMatrix::from_fn(d, d, |i, j| q[i][j]);

    let mut cols: Vec<Vec<f64>> = Vec::new();
    let push_block = |cols: &mut Vec<Vec<f64>>, b: &nalgebra::DMatrix<f64>| {
        for m in [&sqrt_q, &cmat] {
            let prod = b * m;
            for j in 0..prod.ncols() {
                cols.push(prod.column(j).iter().copied().collect());
            }
        }
    };
    let ident = nalgebra::DMatrix::<f64>::identity(d, d);
    push_block(&mut cols, &ident);
    let mut rank = numerical_rank(&cols, d);
    if rank == d || n_max == 0 {
        return Ok(HormanderResult {
            rank_achieved: rank,
            n_used: 0,
            satisfied: rank == d,
        });
    }

    let space = JetSpace::new(d, 2 * n_max + 1);
    let matrices: Vec<nalgebra::DMatrix<f64>> = match drift.jets(&space, x) {
        Some(b) => {
            let mut prev: Vec<Vec<Jet>> = (0..d)
                .map(|i| (0..d).map(|j| Jet::constant(&space, if i == j { 1.0 } else { 0.0 })).collect())
                .collect();
            let db: Vec<Vec<Jet>> = b.iter().map(|bi| (0..d).map(|k| bi.derivative(k)).collect()).collect();
            let mut out = Vec::new();
            for _ in 1..=n_max {
                let mut next = vec![vec![Jet::constant(&space, 0.0); d]; d];
                for i in 0..d {
                    for j in 0..d {
                        let mut acc = Jet::constant(&space, 0.0);
                        for k in 0..d {
                            let dk = prev[i][j].derivative(k);
                            acc = acc.add(&b[k].mul(&dk));
                            acc = acc.sub(&db[i][k].mul(&prev[k][j]));
                            for l in 0..d {
                                if qm[(k, l)] != 0.0 {
                                    acc = acc.add(&dk.derivative(l).scale(0.5 * qm[(k, l)]));
                                }
                            }
                        }
                        next[i][j] = acc;
                    }
                }
                out.push(nalgebra::DMatrix::from_fn(d, d, |i, j| next[i][j].value()));
                prev = next;
            }
            out
        }
        None => {
            if n_max > 1 {
                return unsupported("finite-difference brackets beyond n = 1 need an analytic drift");
            }
            let jac = drift.jacobian_fd(x);
            vec![nalgebra::DMatrix::from_fn(d, d, |i, j| -jac[i][j])]
        }
    };
    for (n, bn) in matrices.iter().enumerate() {
        push_block(&mut cols, bn);
        rank = numerical_rank(&cols, d);
        if rank == d {
            return Ok(HormanderResult {
                rank_achieved: rank,
                n_used: n + 1,
                satisfied: true,
            });
        }
    }
    Ok(HormanderResult {
        rank_achieved: rank,
        n_used: n_max,
        satisfied: false,
    })
}

/// Compact sets for [`tail_weight_rho`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompactSet {
    ClosedBall { center: Vec<f64>, radius: f64 },
}

impl CompactSet {
    /// Distance from the set to the complement of `v`, or an error when the
    /// set is not inside `v`.
    fn distance_to_complement(&self, v: &Shape) -> Result<f64> {
        match self {
            CompactSet::ClosedBall { center, radius } => {
                let r = v.signed_distance(center) - radius;
                if r <= 0.0 {
                    domain("F must lie inside V")
                } else {
                    Ok(r)
                }
            }
        }
    }
}

/// Quadrature scheme for [`tail_weight_rho_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailScheme {
    /// Rays from the jump origin; radial integral in closed form.
    RaysFromOrigin,
    /// Nested integral in polar coordinates around the centre of `F`.
    PolarAroundSet,
}

/// `ρ_F(x) = ν(B^c_{r_F} ∩ (F − x)) + ν(B^c_{r_F} ∩ (x − F))` with
/// `r_F = (2 dist(F, V^c)) ∧ 1`.
pub fn tail_weight_rho(f: &CompactSet, v: &Shape, x: &[f64], jump: &JumpSpec) -> Result<f64> {
    tail_weight_rho_with(f, v, x, jump, TailScheme::RaysFromOrigin)
}

pub fn tail_weight_rho_with(
    f: &CompactSet,
    v: &Shape,
    x: &[f64],
    jump: &JumpSpec,
    scheme: TailScheme,
) -> Result<f64> {
    if jump.is_none() {
        return unsupported("ν ≡ 0 carries no tail weight");
    }
    jump.validate(x.len())?;
    let r_f = (2.0 * f.distance_to_complement(v)?).min(1.0);
    let CompactSet::ClosedBall { center, radius } = f;
    let shifted: Vec<f64> = center.iter().zip(x).map(|(c, xi)| c - xi).collect();
    let reflected: Vec<f64> = shifted.iter().map(|c| -c).collect();
    let one = |c: &[f64]| match jump {
        JumpSpec::IsotropicStable { s } | JumpSpec::MixedLaplacianStable { s } => {
            let k = stable_density_constant(x.len(), *s);
            k * match scheme {
                TailScheme::RaysFromOrigin => ball_tail_rays(c, *radius, r_f, *s),
                TailScheme::PolarAroundSet => ball_tail_polar(c, *radius, r_f, *s),
            }
        }
        JumpSpec::CylindricalStable { s } => axis_tail(c, *radius, r_f, s),
        JumpSpec::None => 0.0,
    };
    Ok(one(&shifted) + one(&reflected))
}

/// `∫_{t ≥ r, t∈[a,b]} t^{-1-2s} dt` in closed form.
fn radial_power_mass(a: f64, b: f64, r: f64, s: f64) -> f64 {
    let lo = a.max(r);
    if b <= lo {
        return 0.0;
    }
    let p = 2.0 * s;
    (lo.powf(-p) - b.powf(-p)) / p
}

/// Unnormalised `∫_{z∈B(c,R), |z|≥r} |z|^{-d-2s} dz` by rays from 0.
fn ball_tail_rays(c: &[f64], radius: f64, r: f64, s: f64) -> f64 {
    let d = c.len();
    let dc = norm(c);
    // chord of the ray at angle φ from the axis through c
    let chord = |phi: f64| -> (f64, f64) {
        let along = dc * phi.cos();
        let perp2 = (dc * phi.sin()).powi(2);
        let disc = radius * radius - perp2;
        if disc <= 0.0 {
            return (0.0, 0.0);
        }
        let h = disc.sqrt();
        ((along - h).max(0.0), (along + h).max(0.0))
    };
    let radial = |phi: f64| {
        let (a, b) = chord(phi);
        radial_power_mass(a, b, r, s)
    };
    let phi_max = if dc > radius { (radius / dc).asin() } else { PI };
    let tol = Tol::new(1e-14, 1e-11);
    match d {
        1 => radial(0.0) + radial(PI),
        2 => 2.0 * integrate(radial, 0.0, phi_max, tol),
        3 => 2.0 * PI * integrate(|p| p.sin() * radial(p), 0.0, phi_max, tol),
        _ => f64::NAN,
    }
}

/// Same integral, nested in polar coordinates centred at `c`.
fn ball_tail_polar(c: &[f64], radius: f64, r: f64, s: f64) -> f64 {
    let d = c.len();
    let dc = norm(c);
    let p = d as f64 + 2.0 * s;
    let tol = Tol::new(1e-14, 1e-11);
    // |z|² = ρ² + D² + 2ρD cosψ; keep cosψ ≥ cut
    let inner = |rho: f64| -> f64 {
        let z2 = |cpsi: f64| rho * rho + dc * dc + 2.0 * rho * dc * cpsi;
        let cut = if rho * dc > 0.0 {
            ((r * r - rho * rho - dc * dc) / (2.0 * rho * dc)).clamp(-1.0, 1.0)
        } else if rho * rho + dc * dc >= r * r {
            -1.0
        } else {
            1.0
        };
        match d {
            1 => [1.0, -1.0]
                .iter()
                .filter(|cp| **cp >= cut)
                .map(|cp| z2(*cp).powf(-p / 2.0))
                .sum::<f64>(),
            2 => {
                let psi_max = cut.acos();
                2.0 * integrate(|psi| z2(psi.cos()).powf(-p / 2.0), 0.0, psi_max, tol)
            }
            3 => 2.0 * PI * integrate(|cp| z2(cp).powf(-p / 2.0), cut, 1.0, tol),
            _ => f64::NAN,
        }
    };
    let jac = |rho: f64| rho.powi(d as i32 - 1);
    integrate(|rho| jac(rho) * inner(rho), 0.0, radius, tol)
}

/// Cylindrical jumps live on the coordinate axes.
fn axis_tail(c: &[f64], radius: f64, r: f64, s: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, si) in s.iter().enumerate() {
        // points t·eᵢ inside B(c, R): |t − cᵢ|² + Σ_{j≠i} c_j² ≤ R²
        let perp2: f64 = c.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v * v).sum();
        let disc = radius * radius - perp2;
        if disc <= 0.0 {
            continue;
        }
        let h = disc.sqrt();
        let (a, b) = (c[i] - h, c[i] + h);
        let k = stable_density_constant(1, *si);
        // positive and negative half-lines
        acc += k * radial_power_mass(a.max(0.0), b.max(0.0), r, *si);
        acc += k * radial_power_mass((-b).max(0.0), (-a).max(0.0), r, *si);
    }
    acc
}

/// Sample points for testing monotonicity properties (Halton in a box).
pub fn sample_points(lo: &[f64], hi: &[f64], count: usize) -> Vec<Vec<f64>> {
    (0..count as u64)
        .map(|i| {
            halton(i, lo.len())
                .iter()
                .enumerate()
                .map(|(k, u)| lo[k] + u * (hi[k] - lo[k]))
                .collect()
        })
        .collect()
}
