use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::levy::domain::{dist, Shape};
use crate::quad::GaussRule;

/// User-supplied function wrapper.
#[derive(Clone)]
pub struct CustomField(pub Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>);

impl fmt::Debug for CustomField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomField(..)")
    }
}

impl PartialEq for CustomField {
    fn eq(&self, o: &Self) -> bool {
        Arc::ptr_eq(&self.0, &o.0)
    }
}

/// Real functions on `ℝ^d` that configurations can name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarField {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `height·exp(1 − 1/(1 − |x−c|²/r²))` inside the ball, 0 outside.
    Bump {
        center: Vec<f64>,
        radius: f64,
        height: f64,
    },
    /// `value` on the closed ball (or on its complement).
    BallIndicator {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "one")]
        value: f64,
        #[serde(default)]
        complement: bool,
    },
    /// `scale·|x − c|^power`.
    RadialPower {
        center: Vec<f64>,
        power: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `c₀ + g·x`.
    Affine {
        c0: f64,
        grad: Vec<f64>,
    },
    Sum {
        terms: Vec<ScalarField>,
    },
    Scaled {
        factor: f64,
        field: Box<ScalarField>,
    },
    #[serde(skip)]
    Custom(CustomField),
}

fn one() -> f64 {
    1.0
}

impl ScalarField {
    pub fn custom<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        ScalarField::Custom(CustomField(Arc::new(f)))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::Zero => 0.0,
            ScalarField::Constant { value } => *value,
            ScalarField::Bump { center, radius, height } => {
                let q = dist(x, center).powi(2) / (radius * radius);
                if q >= 1.0 {
                    0.0
                } else {
                    height * (1.0 - 1.0 / (1.0 - q)).exp()
                }
            }
            ScalarField::BallIndicator {
                center,
                radius,
                value,
                complement,
            } => {
                if (dist(x, center) <= *radius) != *complement {
                    *value
                } else {
                    0.0
                }
            }
            ScalarField::RadialPower { center, power, scale } => scale * dist(x, center).powf(*power),
            ScalarField::Affine { c0, grad } => c0 + grad.iter().zip(x).map(|(g, v)| g * v).sum::<f64>(),
            ScalarField::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
            ScalarField::Scaled { factor, field } => factor * field.eval(x),
            ScalarField::Custom(f) => (f.0)(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ScalarField::Zero => true,
            ScalarField::Constant { value } => *value == 0.0,
            ScalarField::Scaled { factor, field } => *factor == 0.0 || field.is_zero(),
            ScalarField::Sum { terms } => terms.iter().all(|t| t.is_zero()),
            _ => false,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        ScalarField::Scaled {
            factor,
            field: Box::new(self),
        }
    }

    /// Bounding box of the support when it is known to be compact.
    pub fn support_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            ScalarField::Zero => Some((vec![], vec![])),
            ScalarField::Bump { center, radius, .. }
            | ScalarField::BallIndicator {
                center,
                radius,
                complement: false,
                ..
            } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            ScalarField::Scaled { field, .. } => field.support_box(),
            _ => None,
        }
    }
}

/// A point mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub mass: f64,
}

/// Measure with an optional Lebesgue density and finitely many atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MeasureSpec {
    #[serde(default)]
    pub density: Option<ScalarField>,
    #[serde(default)]
    pub atoms: Vec<Atom>,
}

impl MeasureSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn density(f: ScalarField) -> Self {
        Self {
            density: Some(f),
            atoms: vec![],
        }
    }

    pub fn atom(point: Vec<f64>, mass: f64) -> Self {
        Self {
            density: None,
            atoms: vec![Atom { point, mass }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.density.as_ref().is_none_or(|d| d.is_zero()) && self.atoms.iter().all(|a| a.mass == 0.0)
    }

    pub fn density_at(&self, x: &[f64]) -> f64 {
        self.density.as_ref().map_or(0.0, |f| f.eval(x))
    }

    /// Atom masses must be finite and non-negative and the density
    /// integrable over `region` (checked by product Gauss quadrature).
    pub fn validate(&self, region: &Shape) -> Result<()> {
        for a in &self.atoms {
            if !(a.mass >= 0.0) || !a.mass.is_finite() {
                return arg(format!("atom mass {} must be finite and non-negative", a.mass));
            }
            if a.point.len() != region.dim() {
                return arg("atom dimension mismatch");
            }
        }
        if let Some(f) = &self.density {
            let total = integrate_over(region, 24, |x| f.eval(x).abs());
            if !total.is_finite() {
                return arg("density is not integrable over the domain");
            }
        }
        Ok(())
    }
}

/// Signed measure as a pair of positive parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SignedMeasure {
    #[serde(default)]
    pub positive: MeasureSpec,
    #[serde(default)]
    pub negative: MeasureSpec,
}

/// Product Gauss–Legendre nodes over the bounding box of `region`, keeping
/// the nodes inside it.
pub fn product_nodes(region: &Shape, per_dim: usize) -> Vec<(Vec<f64>, f64)> {
    let (lo, hi) = region.bounding_box();
    let d = lo.len();
    let rules: Vec<GaussRule> = (0..d).map(|k| GaussRule::new(per_dim, lo[k], hi[k])).collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        let x: Vec<f64> = (0..d).map(|k| rules[k].nodes[idx[k]]).collect();
        let w: f64 = (0..d).map(|k| rules[k].weights[idx[k]]).product();
        if region.contains(&x) {
            out.push((x, w));
        }
        let mut k = 0;
        loop {
            if k == d {
                return out;
            }
            idx[k] += 1;
            if idx[k] < per_dim {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// `∫_region f` with a product Gauss rule restricted to the region.
pub fn integrate_over<F: Fn(&[f64]) -> f64>(region: &Shape, per_dim: usize, f: F) -> f64 {
    product_nodes(region, per_dim).iter().map(|(x, w)| w * f(x)).sum()
}
