use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::jet::{Jet, JetSpace};
use crate::error::{Error, Result};

type VectorFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Built-in drift fields, selectable by name in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftKind {
    Zero,
    Constant { c: Vec<f64> },
    /// `b(x) = A x + c` with `A` given row-major.
    Linear { a: Vec<Vec<f64>>, #[serde(default)] c: Vec<f64> },
    /// `b(x) = amp·(sin x₂, cos x₁)` in two dimensions.
    SinCos { amp: f64 },
    /// `bᵢ(x) = amp·sin(freq·xᵢ)` componentwise.
    Sine { amp: f64, freq: f64 },
}

/// A bounded Lipschitz vector field `b` entering the operator `A − b·∇`.
///
/// Paths of the associated process move with velocity `−b` (plus the Lévy
/// part), so that `A − b·∇` is the generator.
#[derive(Clone)]
pub struct DriftField {
    dim: usize,
    repr: Repr,
    pub lipschitz_bound: f64,
    pub sup_bound: f64,
}

#[derive(Clone)]
enum Repr {
    Builtin(DriftKind),
    Custom {
        b: Arc<VectorFn>,
        div: Option<Arc<ScalarFn>>,
    },
    Negated(Box<DriftField>),
}

impl fmt::Debug for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("DriftField");
        s.field("dim", &self.dim);
        match &self.repr {
            Repr::Builtin(k) => s.field("kind", k),
            Repr::Custom { .. } => s.field("kind", &"custom"),
            Repr::Negated(inner) => s.field("negated", inner),
        };
        s.field("lipschitz_bound", &self.lipschitz_bound)
            .field("sup_bound", &self.sup_bound)
            .finish()
    }
}

fn operator_norm(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
    m.singular_values().max()
}

impl DriftField {
    pub fn zero(dim: usize) -> Self {
        Self::builtin(dim, DriftKind::Zero).expect("zero drift is valid")
    }

    /// Builds a built-in field. For linear fields the sup bound is infinite
    /// globally; call [`DriftField::with_bounds`] to record the bound on a
    /// bounded region.
    pub fn builtin(dim: usize, kind: DriftKind) -> Result<Self> {
        let (lip, sup) = match &kind {
            DriftKind::Zero => (0.0, 0.0),
            DriftKind::Constant { c } => {
                check_len(c.len(), dim)?;
                (0.0, super::domain::norm(c))
            }
            DriftKind::Linear { a, c } => {
                check_len(a.len(), dim)?;
                if a.iter().any(|r| r.len() != dim) {
                    return Err(Error::Config("linear drift matrix must be d x d".into()));
                }
                if !c.is_empty() {
                    check_len(c.len(), dim)?;
                }
                (operator_norm(a), f64::INFINITY)
            }
            DriftKind::SinCos { amp } => {
                if dim != 2 {
                    return Err(Error::Config("sin_cos drift is two-dimensional".into()));
                }
                (amp.abs(), amp.abs() * 2f64.sqrt())
            }
            DriftKind::Sine { amp, freq } => (
                (amp * freq).abs(),
                amp.abs() * (dim as f64).sqrt(),
            ),
        };
        Ok(Self {
            dim,
            repr: Repr::Builtin(kind),
            lipschitz_bound: lip,
            sup_bound: sup,
        })
    }

    /// User-supplied field with declared bounds and optional divergence.
    pub fn custom<B, V>(dim: usize, b: B, div: Option<V>, lipschitz_bound: f64, sup_bound: f64) -> Self
    where
        B: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            dim,
            repr: Repr::Custom {
                b: Arc::new(b),
                div: div.map(|f| Arc::new(f) as Arc<ScalarFn>),
            },
            lipschitz_bound,
            sup_bound,
        }
    }

    pub fn with_bounds(mut self, lipschitz_bound: f64, sup_bound: f64) -> Self {
        self.lipschitz_bound = lipschitz_bound;
        self.sup_bound = sup_bound;
        self
    }

    /// `−b`, the drift of the dual operator.
    pub fn negated(&self) -> Self {
        match &self.repr {
            Repr::Negated(inner) => (**inner).clone(),
            _ => Self {
                dim: self.dim,
                repr: Repr::Negated(Box::new(self.clone())),
                lipschitz_bound: self.lipschitz_bound,
                sup_bound: self.sup_bound,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> Option<&DriftKind> {
        match &self.repr {
            Repr::Builtin(k) => Some(k),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Builtin(DriftKind::Zero))
    }

    #[inline]
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match &self.repr {
            Repr::Builtin(kind) => match kind {
                DriftKind::Zero => out.iter_mut().for_each(|o| *o = 0.0),
                DriftKind::Constant { c } => out.copy_from_slice(c),
                DriftKind::Linear { a, c } => {
                    for i in 0..self.dim {
                        out[i] = a[i].iter().zip(x).map(|(p, q)| p * q).sum::<f64>()
                            + c.get(i).copied().unwrap_or(0.0);
                    }
                }
                DriftKind::SinCos { amp } => {
                    out[0] = amp * x[1].sin();
                    out[1] = amp * x[0].cos();
                }
                DriftKind::Sine { amp, freq } => {
                    for i in 0..self.dim {
                        out[i] = amp * (freq * x[i]).sin();
                    }
                }
            },
            Repr::Custom { b, .. } => b(x, out),
            Repr::Negated(inner) => {
                inner.eval(x, out);
                out.iter_mut().for_each(|o| *o = -*o);
            }
        }
    }

    /// Analytic divergence when available.
    pub fn divergence(&self, x: &[f64]) -> Option<f64> {
        match &self.repr {
            Repr::Builtin(kind) => Some(match kind {
                DriftKind::Zero | DriftKind::Constant { .. } | DriftKind::SinCos { .. } => 0.0,
                DriftKind::Linear { a, .. } => (0..self.dim).map(|i| a[i][i]).sum(),
                DriftKind::Sine { amp, freq } => {
                    x.iter().map(|xi| amp * freq * (freq * xi).cos()).sum()
                }
            }),
            Repr::Custom { div, .. } => div.as_ref().map(|f| f(x)),
            Repr::Negated(inner) => inner.divergence(x).map(|v| -v),
        }
    }

    /// Central-difference divergence with step `1e-5·(1 + ‖x‖)`.
    pub fn divergence_fd(&self, x: &[f64]) -> f64 {
        let h = fd_step(x);
        let mut xp = x.to_vec();
        let mut bp = vec![0.0; self.dim];
        let mut bm = vec![0.0; self.dim];
        let mut acc = 0.0;
        for i in 0..self.dim {
            xp[i] = x[i] + h;
            self.eval(&xp, &mut bp);
            xp[i] = x[i] - h;
            self.eval(&xp, &mut bm);
            xp[i] = x[i];
            acc += (bp[i] - bm[i]) / (2.0 * h);
        }
        acc
    }

    /// Jacobian `∂bⁱ/∂xʲ` by central differences.
    pub fn jacobian_fd(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let h = fd_step(x);
        let mut jac = vec![vec![0.0; self.dim]; self.dim];
        let mut xp = x.to_vec();
        let mut bp = vec![0.0; self.dim];
        let mut bm = vec![0.0; self.dim];
        for j in 0..self.dim {
            xp[j] = x[j] + h;
            self.eval(&xp, &mut bp);
            xp[j] = x[j] - h;
            self.eval(&xp, &mut bm);
            xp[j] = x[j];
            for i in 0..self.dim {
                jac[i][j] = (bp[i] - bm[i]) / (2.0 * h);
            }
        }
        jac
    }

    /// Taylor jets of the components around `x`, or `None` for custom fields.
    pub fn jets(&self, space: &Arc<JetSpace>, x: &[f64]) -> Option<Vec<Jet>> {
        let vars: Vec<Jet> = (0..self.dim).map(|k| Jet::variable(space, k, x[k])).collect();
        match &self.repr {
            Repr::Builtin(kind) => Some(match kind {
                DriftKind::Zero => (0..self.dim).map(|_| Jet::constant(space, 0.0)).collect(),
                DriftKind::Constant { c } => c.iter().map(|v| Jet::constant(space, *v)).collect(),
                DriftKind::Linear { a, c } => (0..self.dim)
                    .map(|i| {
                        let mut j = Jet::constant(space, c.get(i).copied().unwrap_or(0.0));
                        for k in 0..self.dim {
                            j = j.add(&vars[k].scale(a[i][k]));
                        }
                        j
                    })
                    .collect(),
                DriftKind::SinCos { amp } => vec![vars[1].sin().scale(*amp), vars[0].cos().scale(*amp)],
                DriftKind::Sine { amp, freq } => vars
                    .iter()
                    .map(|v| v.scale(*freq).sin().scale(*amp))
                    .collect(),
            }),
            Repr::Custom { .. } => None,
            Repr::Negated(inner) => inner
                .jets(space, x)
                .map(|v| v.into_iter().map(|j| j.scale(-1.0)).collect()),
        }
    }

    /// Checks the declared Lipschitz and sup bounds on sample points.
    pub fn check_bounds(&self, points: &[Vec<f64>]) -> Result<()> {
        let mut bx = vec![0.0; self.dim];
        let mut by = vec![0.0; self.dim];
        for (i, x) in points.iter().enumerate() {
            self.eval(x, &mut bx);
            if super::domain::norm(&bx) > self.sup_bound * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::Config(format!("drift exceeds sup bound at {x:?}")));
            }
            let y = &points[(i + 1) % points.len()];
            self.eval(y, &mut by);
            let lhs = super::domain::dist(&bx, &by);
            let rhs = self.lipschitz_bound * super::domain::dist(x, y);
            if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::Config(format!("drift violates Lipschitz bound near {x:?}")));
            }
        }
        Ok(())
    }
}

fn check_len(got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Config(format!("drift parameter has length {got}, expected {want}")))
    }
}

pub(crate) fn fd_step(x: &[f64]) -> f64 {
    1e-5 * (1.0 + super::domain::norm(x))
}
