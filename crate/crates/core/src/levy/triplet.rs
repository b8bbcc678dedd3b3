use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Jump part of the Lévy operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpSpec {
    /// `ν ≡ 0`: a local (diffusion) operator.
    None,
    /// Rotationally invariant 2s-stable jumps, symbol `|ξ|^{2s}`.
    IsotropicStable { s: f64 },
    /// Independent one-dimensional 2sᵢ-stable jumps along the axes,
    /// symbol `Σ |ξᵢ|^{2sᵢ}`.
    CylindricalStable { s: Vec<f64> },
    /// `Δ + Δ^s`: an extra Laplacian (Gaussian part with covariance `2I`)
    /// on top of isotropic 2s-stable jumps, symbol `|ξ|² + |ξ|^{2s}`.
    MixedLaplacianStable { s: f64 },
}

impl JumpSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        let ok = |s: f64| s > 0.0 && s < 1.0;
        match self {
            JumpSpec::None => Ok(()),
            JumpSpec::IsotropicStable { s } | JumpSpec::MixedLaplacianStable { s } => {
                if ok(*s) {
                    Ok(())
                } else {
                    Err(Error::Config(format!("stability parameter {s} outside (0,1)")))
                }
            }
            JumpSpec::CylindricalStable { s } => {
                if s.len() != d {
                    return Err(Error::Config(format!(
                        "cylindrical jumps need {d} parameters, got {}",
                        s.len()
                    )));
                }
                if s.iter().all(|v| ok(*v)) {
                    Ok(())
                } else {
                    Err(Error::Config("stability parameters must lie in (0,1)".into()))
                }
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, JumpSpec::None)
    }

    /// The isotropic stable parameter when `ν` is rotationally invariant.
    pub fn isotropic_s(&self) -> Option<f64> {
        match self {
            JumpSpec::IsotropicStable { s } | JumpSpec::MixedLaplacianStable { s } => Some(*s),
            _ => None,
        }
    }

    /// Jump part of the symbol.
    pub fn symbol(&self, xi: &[f64]) -> f64 {
        match self {
            JumpSpec::None => 0.0,
            JumpSpec::IsotropicStable { s } => super::domain::norm(xi).powf(2.0 * s),
            JumpSpec::CylindricalStable { s } => {
                xi.iter().zip(s).map(|(x, si)| x.abs().powf(2.0 * si)).sum()
            }
            JumpSpec::MixedLaplacianStable { s } => {
                let n = super::domain::norm(xi);
                n * n + n.powf(2.0 * s)
            }
        }
    }
}

/// Normalising constant of the Lévy density `c(d,s)|z|^{-d-2s}` whose
/// symbol is exactly `|ξ|^{2s}`.
pub fn stable_density_constant(d: usize, s: f64) -> f64 {
    let h = d as f64 / 2.0;
    s * 4f64.powf(s) * gamma(h + s) / (std::f64::consts::PI.powf(h) * gamma(1.0 - s))
}

/// The operator `A` of a Lévy triplet `(l, Q, ν)` with zero killing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyTriplet {
    pub l: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub jump: JumpSpec,
}

impl LevyTriplet {
    pub fn new(l: Vec<f64>, q: Vec<Vec<f64>>, jump: JumpSpec) -> Result<Self> {
        let t = Self { l, q, jump };
        t.validate()?;
        Ok(t)
    }

    /// Pure jump operator with no drift and no diffusion.
    pub fn pure_jump(d: usize, jump: JumpSpec) -> Result<Self> {
        Self::new(vec![0.0; d], vec![vec![0.0; d]; d], jump)
    }

    /// Brownian operator `½ Tr(Q D²)` with `Q = q·I`.
    pub fn brownian(d: usize, q: f64) -> Result<Self> {
        let mut m = vec![vec![0.0; d]; d];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = q;
        }
        Self::new(vec![0.0; d], m, JumpSpec::None)
    }

    pub fn dim(&self) -> usize {
        self.l.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.l.len();
        if d == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if self.q.len() != d || self.q.iter().any(|r| r.len() != d) {
            return Err(Error::Config("Q must be d x d".into()));
        }
        let sym = self.q_matrix();
        let eig = sym.symmetric_eigenvalues();
        if eig.iter().any(|e| *e < -1e-12) {
            return Err(Error::Config("Q must be positive semidefinite".into()));
        }
        self.jump.validate(d)
    }

    /// Symmetrised diffusion matrix.
    pub fn q_matrix(&self) -> nalgebra::DMatrix<f64> {
        let d = self.dim();
        nalgebra::DMatrix::from_fn(d, d, |i, j| 0.5 * (self.q[i][j] + self.q[j][i]))
    }

    /// `Q^{1/2}` through the symmetric eigendecomposition.
    pub fn sqrt_q(&self) -> nalgebra::DMatrix<f64> {
        let eig = self.q_matrix().symmetric_eigen();
        let d = self.dim();
        let mut s = nalgebra::DMatrix::zeros(d, d);
        for k in 0..d {
            let lam = eig.eigenvalues[k].max(0.0).sqrt();
            let v = eig.eigenvectors.column(k);
            s += lam * v * v.transpose();
        }
        s
    }

    pub fn has_diffusion(&self) -> bool {
        self.q.iter().flatten().any(|v| *v != 0.0)
            || matches!(self.jump, JumpSpec::MixedLaplacianStable { .. })
    }

    /// `ψ(ξ) = −i l·ξ + ½ ξᵀQξ + ∫(1 − e^{iy·ξ} + i y·ξ 1_{B₁}(y)) ν(dy)`.
    pub fn symbol(&self, xi: &[f64]) -> Complex64 {
        let d = self.dim();
        let drift: f64 = self.l.iter().zip(xi).map(|(a, b)| a * b).sum();
        let mut quad = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad += xi[i] * self.q[i][j] * xi[j];
            }
        }
        Complex64::new(0.5 * quad + self.jump.symbol(xi), -drift)
    }
}

/// `symbol_eval` of the operator map.
pub fn symbol_eval(triplet: &LevyTriplet, xi: &[f64]) -> Complex64 {
    triplet.symbol(xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, Tol};
    use std::f64::consts::PI;

    #[test]
    fn isotropic_symbol_is_power() {
        let t = LevyTriplet::pure_jump(2, JumpSpec::IsotropicStable { s: 0.3 }).unwrap();
        let v = t.symbol(&[0.6, 0.8]);
        assert!((v.re - 1.0).abs() < 1e-14 && v.im == 0.0);
        let v = t.symbol(&[3.0, 4.0]);
        assert!((v.re - 5f64.powf(0.6)).abs() < 1e-12);
        assert_eq!(t.symbol(&[0.0, 0.0]), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn drift_gives_imaginary_part_and_conjugate_symmetry() {
        let t = LevyTriplet::new(
            vec![1.0, -2.0],
            vec![vec![1.0, 0.2], vec![0.2, 0.5]],
            JumpSpec::CylindricalStable { s: vec![0.4, 0.7] },
        )
        .unwrap();
        let xi = [0.3, -1.7];
        let a = t.symbol(&xi);
        let b = t.symbol(&[-0.3, 1.7]);
        assert!((a - b.conj()).norm() < 1e-14);
        assert!(a.re >= 0.0);
    }

    #[test]
    fn validation() {
        assert!(LevyTriplet::new(vec![0.0], vec![vec![-1.0]], JumpSpec::None).is_err());
        assert!(LevyTriplet::pure_jump(1, JumpSpec::IsotropicStable { s: 1.0 }).is_err());
        assert!(LevyTriplet::pure_jump(2, JumpSpec::CylindricalStable { s: vec![0.5] }).is_err());
        assert!(LevyTriplet::new(vec![], vec![], JumpSpec::None).is_err());
    }

    /// The constant reproduces the symbol at |ξ| = 1 through the
    /// Lévy–Khintchine integral ∫(1 − cos z₁) c |z|^{-d-2s} dz.
    #[test]
    fn density_constant_reproduces_unit_symbol() {
        for &s in &[0.25, 0.5, 0.75] {
            // d = 1: 2∫_0^∞ (1 − cos z) z^{-1-2s} dz
            let c = stable_density_constant(1, s);
            let near = integrate(|z| (1.0 - z.cos()) * z.powf(-1.0 - 2.0 * s), 0.0, 1.0, Tol::default());
            // ∫_1^∞ z^{-1-2s} dz minus the oscillatory part, summed period by period
            let mut osc = integrate(|z| z.cos() * z.powf(-1.0 - 2.0 * s), 1.0, 2.0 * PI, Tol::default());
            for k in 1..20_000 {
                let a = 2.0 * PI * k as f64;
                osc += integrate(|z| z.cos() * z.powf(-1.0 - 2.0 * s), a, a + 2.0 * PI, Tol::new(1e-14, 1e-10));
            }
            let far = 1.0 / (2.0 * s) - osc;
            let v = 2.0 * c * (near + far);
            assert!((v - 1.0).abs() < 2e-4, "d=1 s={s}: {v}");
            // d = 2 polar: ∫_0^{2π}∫_0^∞ (1 − cos(r cosθ)) r^{-1-2s} dr dθ
            // = ∫ |cosθ|^{2s} dθ · ∫ (1 − cos u) u^{-1-2s} du
            let c2 = stable_density_constant(2, s);
            let ang = integrate(|t| t.cos().abs().powf(2.0 * s), 0.0, 2.0 * PI, Tol::default());
            let v2 = c2 * ang * (near + far);
            assert!((v2 - 1.0).abs() < 2e-4, "d=2 s={s}: {v2}");
        }
    }

    fn any_jump() -> impl proptest::strategy::Strategy<Value = JumpSpec> {
        use proptest::prelude::*;
        prop_oneof![
            Just(JumpSpec::None),
            (0.05f64..0.95).prop_map(|s| JumpSpec::IsotropicStable { s }),
            (0.05f64..0.95, 0.05f64..0.95).prop_map(|(a, b)| JumpSpec::CylindricalStable { s: vec![a, b] }),
            (0.05f64..0.95).prop_map(|s| JumpSpec::MixedLaplacianStable { s }),
        ]
    }

    proptest::proptest! {
        #[test]
        fn symbol_is_negative_definite_and_hermitian(
            jump in any_jump(),
            l in proptest::array::uniform2(-2.0f64..2.0),
            q11 in 0.0f64..2.0,
            q22 in 0.0f64..2.0,
            xi in proptest::array::uniform2(-50.0f64..50.0),
        ) {
            let q = vec![vec![q11, 0.0], vec![0.0, q22]];
            let t = LevyTriplet::new(l.to_vec(), q.clone(), jump.clone()).unwrap();
            let v = t.symbol(&xi);
            let w = t.symbol(&[-xi[0], -xi[1]]);
            proptest::prop_assert!(v.re >= 0.0);
            proptest::prop_assert!((v - w.conj()).norm() <= 1e-12 * (1.0 + v.norm()));
            let sym = LevyTriplet::new(vec![0.0, 0.0], q, jump).unwrap().symbol(&xi);
            proptest::prop_assert!(sym.im.abs() <= 1e-12 * (1.0 + sym.re));
        }
    }
}
