use std::f64::consts::PI;

use super::*;
use crate::kernels::{expected_exit_time_ball, riesz_constant};
use crate::levy::{DriftField, DriftKind, JumpSpec, LevyTriplet};
use crate::path::PathConfig;

fn stable(d: usize, s: f64) -> Operator {
    Operator::new(
        LevyTriplet::pure_jump(d, JumpSpec::IsotropicStable { s }).unwrap(),
        DriftField::zero(d),
        0.0,
    )
    .unwrap()
}

fn brownian(d: usize, drift: DriftField) -> Operator {
    Operator::new(LevyTriplet::brownian(d, 1.0).unwrap(), drift, 0.0).unwrap()
}

fn radial(d: usize, power: f64) -> ScalarField {
    ScalarField::RadialPower {
        center: vec![0.0; d],
        power,
        scale: 1.0,
    }
}

fn spec(u: ScalarField, d: usize, v_radius: f64, k: Vec<Vec<f64>>) -> ProblemSpec {
    ProblemSpec::new(u, Shape::centered_ball(d, 1.0), Shape::centered_ball(d, v_radius), k)
}

fn small_grid(mut p: ProblemSpec, count: usize) -> ProblemSpec {
    p.grid = GridSpec::QuasiRandom { count };
    p
}

#[test]
fn newtonian_atom_in_three_dimensions() {
    // 1/|x| = 2π·G_{½Δ}(x, 0) + (harmonic constant 2 on B_{1/2})
    let p = spec(radial(3, -1.0), 3, 0.5, vec![vec![0.0; 3]]);
    let dec = decompose(&brownian(3, DriftField::zero(3)), &p, 4_000, &PathConfig::wos(3)).unwrap();
    let a = dec.atom_coeffs[0].coefficient;
    assert!((a / (2.0 * PI) - 1.0).abs() < 0.05, "a = {a}");
    for h in &dec.h_values {
        assert!((h.value - 2.0).abs() < 1e-3, "{h:?}");
    }
    assert!(dec.residual_rms < 0.03 * dec.central_scale);
    assert!(!dec.inconsistent);
}

#[test]
fn fractional_atom_matches_riesz_normalisation() {
    let (d, s) = (2, 0.75);
    let p = small_grid(spec(radial(d, 2.0 * s - d as f64), d, 0.5, vec![vec![0.0; 2]]), 12);
    let op = stable(d, s);
    let dec = decompose(&op, &p, 4_000, &PathConfig::wos(5)).unwrap();
    let expect = 1.0 / riesz_constant(d, s);
    let a = &dec.atom_coeffs[0];
    assert!(a.coefficient > 0.0);
    assert!((a.coefficient - expect).abs() < 0.05 * expect + 3.0 * a.std_error, "{a:?} vs {expect}");
    assert!(dec.residual_rms < 0.05 * dec.central_scale, "{} vs {}", dec.residual_rms, dec.central_scale);
    let fit = singularity_strength(&p.u, &[0.0, 0.0], s, &[0.1, 0.05, 0.025, 0.0125]).unwrap();
    assert!((fit.coefficient - a.coefficient).abs() < 0.1 * fit.coefficient);
}

#[test]
fn removable_singularity_gives_zero_atom() {
    // |x − p|^{2s−d} with p outside D is s-harmonic in D
    let (d, s) = (2, 0.75);
    let u = ScalarField::RadialPower {
        center: vec![2.0, 0.0],
        power: 2.0 * s - d as f64,
        scale: 1.0,
    };
    let p = small_grid(spec(u, d, 0.5, vec![vec![0.0, 0.0]]), 12);
    let dec = decompose(&stable(d, s), &p, 4_000, &PathConfig::wos(8)).unwrap();
    let a = &dec.atom_coeffs[0];
    assert!(a.unconstrained.abs() < 3.0 * a.std_error, "{a:?}");
    assert!(dec.residual_rms < 3.0 * dec.residual_floor, "{} vs {}", dec.residual_rms, dec.residual_floor);
}

#[test]
fn scaling_is_exact_under_common_random_numbers() {
    let (d, s) = (2, 0.75);
    let p = small_grid(spec(radial(d, -0.5), d, 0.5, vec![vec![0.0, 0.0]]), 6);
    let mut q = p.clone();
    q.u = p.u.clone().scaled(3.0);
    let op = stable(d, s);
    let cfg = PathConfig::wos(13);
    let a = decompose(&op, &p, 1_000, &cfg).unwrap();
    let b = decompose(&op, &q, 1_000, &cfg).unwrap();
    for (x, y) in a.h_values.iter().zip(&b.h_values) {
        assert!((3.0 * x.value - y.value).abs() < 1e-12 * y.value.abs());
    }
    let (ca, cb) = (a.atom_coeffs[0].coefficient, b.atom_coeffs[0].coefficient);
    assert!((3.0 * ca - cb).abs() < 1e-8 * cb, "{ca} {cb}");
}

#[test]
fn atom_is_invariant_under_domain_enlargement() {
    let (d, s) = (2, 0.75);
    let op = stable(d, s);
    let mut coeffs = Vec::new();
    for r in [0.4, 0.6] {
        let p = small_grid(spec(radial(d, -0.5), d, r, vec![vec![0.0, 0.0]]), 10);
        coeffs.push(decompose(&op, &p, 3_000, &PathConfig::wos(21)).unwrap().atom_coeffs[0].clone());
    }
    let se = coeffs[0].std_error.hypot(coeffs[1].std_error);
    assert!((coeffs[0].coefficient - coeffs[1].coefficient).abs() < 3.0 * se + 0.02 * coeffs[0].coefficient);
}

#[test]
fn harmonicity_test_agrees_with_decomposition() {
    let (d, s) = (2, 0.75);
    let op = stable(d, s);
    let cfg = PathConfig::wos(4);
    let harmonic = ScalarField::RadialPower {
        center: vec![2.0, 0.0],
        power: -0.5,
        scale: 1.0,
    };
    let check = harmonicity_check(&op, &harmonic, &[0.1, 0.1], 0.2, 20_000, &cfg).unwrap();
    assert!(check.passes(3.0), "{check:?}");
    // a bump is not harmonic: its ball average falls below the peak
    let bump = ScalarField::Bump {
        center: vec![0.1, 0.1],
        radius: 0.3,
        height: 1.0,
    };
    let check = harmonicity_check(&op, &bump, &[0.1, 0.1], 0.2, 20_000, &cfg).unwrap();
    assert!(!check.passes(3.0));
    let p = small_grid(spec(bump, d, 0.5, vec![]), 10);
    let dec = decompose(&op, &p, 2_000, &cfg).unwrap();
    assert!(dec.residual_rms > 3.0 * dec.residual_floor);
}

#[test]
fn unknown_density_is_recovered_non_negative() {
    // u = E τ_V for ½Δ in d = 1 solves −½u'' = 1, so μ₀ = dx
    let r = 0.5;
    let u = ScalarField::custom(move |x| expected_exit_time_ball(1, 1.0, r, x).unwrap_or(0.0));
    let mut p = small_grid(spec(u, 1, r, vec![]), 8);
    p.mu0 = Mu0Spec::Unknown { basis_per_dim: 3 };
    let dec = decompose(&brownian(1, DriftField::zero(1)), &p, 4_000, &PathConfig::wos(6)).unwrap();
    assert!(dec.density_coeffs.iter().all(|c| *c >= 0.0));
    for (m, u) in dec.mu0_potential.iter().zip(&dec.u_values) {
        assert!((m.value - u).abs() < 0.1 * dec.central_scale, "{m:?} vs {u}");
    }
}

#[test]
fn grid_errors() {
    let mut p = spec(radial(2, -0.5), 2, 0.5, vec![vec![0.0, 0.0]]);
    p.grid = GridSpec::Points {
        points: vec![vec![0.05, 0.0]],
    };
    let err = decompose(&stable(2, 0.75), &p, 10, &PathConfig::wos(1)).unwrap_err();
    assert!(matches!(err, Error::Grid(_)));
    p.grid = GridSpec::Points { points: vec![] };
    assert!(matches!(p.grid_points(), Err(Error::Grid(_))));
    let bad = spec(radial(2, -0.5), 2, 1.0, vec![]);
    assert!(bad.validate(2).is_err());
}

fn euler(seed: u64) -> PathConfig {
    PathConfig::euler(1e-3, 50.0, seed)
}

#[test]
fn representation_of_a_potential() {
    // u = R^{0,V}1 = (r² − |x|²)/2 on B_r ⊂ ℝ²; with κ₁ the identity becomes
    // R⁰1 = R^{κ₁}1 + κ₁R^{κ₁}R⁰1
    let r = 0.5;
    let u = ScalarField::custom(move |x| expected_exit_time_ball(2, 1.0, r, x).unwrap_or(0.0));
    let mut p = small_grid(spec(u, 2, r, vec![]), 5);
    p.mu0 = Mu0Spec::Known {
        measure: MeasureSpec::density(ScalarField::Constant { value: 1.0 }),
    };
    p.kappa1 = 1.0;
    let c = representation_check_kappa1(&brownian(2, DriftField::zero(2)), &p, 10_000, &euler(31)).unwrap();
    assert!(c.max_z_score < 3.0, "{c:?}");
}

#[test]
fn representation_of_a_harmonic_function() {
    let u = ScalarField::Affine {
        c0: 2.0,
        grad: vec![1.0, -0.5],
    };
    let mut p = small_grid(spec(u, 2, 0.5, vec![]), 5);
    p.kappa1 = 2.0;
    let c = representation_check_kappa1(&brownian(2, DriftField::zero(2)), &p, 10_000, &euler(32)).unwrap();
    assert!(c.max_z_score < 3.0, "{c:?}");
}

#[test]
fn representation_of_zero_and_errors() {
    let mut p = small_grid(spec(ScalarField::Zero, 2, 0.5, vec![]), 3);
    let op = brownian(2, DriftField::zero(2));
    assert!(representation_check_kappa1(&op, &p, 100, &euler(1)).is_err());
    p.kappa1 = 1.0;
    let c = representation_check_kappa1(&op, &p, 100, &euler(1)).unwrap();
    assert_eq!(c.max_z_score, 0.0);
    p.mu0 = Mu0Spec::Unknown { basis_per_dim: 2 };
    assert!(representation_check_kappa1(&op, &p, 100, &euler(1)).is_err());
}

#[test]
fn max_principle_constant_function() {
    let p = small_grid(spec(ScalarField::Constant { value: 2.0 }, 2, 0.5, vec![]), 6);
    let rep = verify_max_principle(&stable(2, 0.5), &p, 5_000, &PathConfig::wos(40)).unwrap();
    assert!(rep.inf_sample == 2.0);
    for (m, w) in rep.margins.iter().zip(&rep.w_values) {
        assert!((m.value - 2.0 * (1.0 - w.value)).abs() < 1e-12);
        assert!(w.value < 1.0);
    }
    assert!(rep.passes(3.0));
}

#[test]
fn max_principle_local_case_is_drift_independent() {
    let p = small_grid(spec(radial(3, -1.0), 3, 0.5, vec![vec![0.0; 3]]), 6);
    for drift in [
        DriftField::zero(3),
        DriftField::builtin(3, DriftKind::Constant { c: vec![1.0, 0.0, -0.5] }).unwrap(),
    ] {
        let rep = verify_max_principle(&brownian(3, drift), &p, 500, &euler(41)).unwrap();
        assert!(rep.w_values.iter().all(|w| w.value == 1.0));
        assert!((rep.inf_sample - 1.0).abs() < 0.02);
        assert!(rep.passes(3.0) && rep.min_margin > 0.0);
    }
}

#[test]
fn max_principle_fractional_profile() {
    let p = spec(radial(2, -1.0), 2, 0.5, vec![vec![0.0, 0.0]]);
    let rep = verify_max_principle(&stable(2, 0.5), &p, 2_000, &PathConfig::wos(42)).unwrap();
    assert_eq!(rep.margins.len(), 20);
    assert!(rep.passes(3.0), "{rep:?}");
}

#[test]
fn spec_round_trips_through_json() {
    let mut p = spec(radial(2, -0.5), 2, 0.5, vec![vec![0.0, 0.0]]);
    p.mu0 = Mu0Spec::Unknown { basis_per_dim: 3 };
    let s = serde_json::to_string(&p).unwrap();
    assert_eq!(serde_json::from_str::<ProblemSpec>(&s).unwrap(), p);
    let minimal = r#"{"u":{"kind":"constant","value":1.0},"outer":{"kind":"ball","center":[0,0],"radius":1},"v":{"kind":"ball","center":[0,0],"radius":0.5}}"#;
    let q: ProblemSpec = serde_json::from_str(minimal).unwrap();
    assert_eq!(q.grid, GridSpec::QuasiRandom { count: 20 });
    assert_eq!(q.mu0, Mu0Spec::default());
}
