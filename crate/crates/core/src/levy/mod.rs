//! Operator description: Lévy triplet, drift field, domains and derived
//! diagnostics.

pub mod diagnostics;
pub mod domain;
pub mod drift;
pub mod jet;
pub mod triplet;

pub use diagnostics::{
    bg_index, bg_index_scan, hormander_rank_check, kappa0, kappa0_on, tail_weight_rho, BgScan, CompactSet,
    HormanderResult,
};
pub use domain::{Domain, Shape};
pub use drift::{DriftField, DriftKind};
pub use triplet::{stable_density_constant, symbol_eval, JumpSpec, LevyTriplet};

/// Full operator `A − b·∇ − κ`.
#[derive(Debug, Clone)]
pub struct Operator {
    pub triplet: LevyTriplet,
    pub drift: DriftField,
    pub kappa: f64,
}

impl Operator {
    pub fn new(triplet: LevyTriplet, drift: DriftField, kappa: f64) -> crate::Result<Self> {
        if triplet.dim() != drift.dim() {
            return Err(crate::Error::Config("drift and triplet dimensions differ".into()));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(crate::Error::Config(format!("killing rate {kappa} must be finite and non-negative")));
        }
        Ok(Self { triplet, drift, kappa })
    }

    pub fn dim(&self) -> usize {
        self.triplet.dim()
    }

    pub fn with_kappa(&self, kappa: f64) -> Self {
        Self {
            kappa,
            ..self.clone()
        }
    }
}
