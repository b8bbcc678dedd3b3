//! Monte Carlo estimators of resolvents, harmonic extensions, Green
//! densities and exit-to-exterior functionals, and statistical checks of the
//! identities that tie them together.
//!
//! Every estimator draws its paths from a seed tree keyed by the estimator
//! name and the evaluation point, so two sides of an identity never share
//! paths and standard errors combine in quadrature.

pub(crate) mod engine;
pub(crate) mod estimators;
mod exterior;
mod field;
mod identities;

pub use estimators::{
    estimate_exterior_hit, estimate_green_density, estimate_harmonic_extension, estimate_resolvent, estimate_wv,
    richardson_eps2, CellGrid, ExteriorHit, GreenEstimate, GreenOracle, WvEstimate, ATOM_LADDER,
};
pub use exterior::{ExteriorCharge, ExteriorIntensity, IntensityTable};
pub use field::{integrate_over, product_nodes, Atom, CustomField, MeasureSpec, ScalarField, SignedMeasure};
pub use identities::{
    check_duality, check_dynkin, check_killing, check_resolvent_identity, DynkinCheck, IdentityCheck, NestedBudget,
    ResolventCheck, NESTED_PATH_CAP,
};
