use super::*;
use crate::kernels::{expected_exit_time_ball, poisson_ball_radial_cdf};
use crate::levy::domain::norm;
use crate::levy::{DriftKind, Shape};
use crate::mc::{run_paths, run_paths_vec};
use crate::rng::SeedTree;
use crate::stats::{bin_of, chi_square_gof, chi_square_two_sample, ks_distance};

fn unit_ball(d: usize) -> Domain {
    Domain::new(Shape::centered_ball(d, 1.0))
}

fn stable(d: usize, s: f64) -> LevyTriplet {
    LevyTriplet::pure_jump(d, JumpSpec::IsotropicStable { s }).unwrap()
}

/// Equal-probability edges of `|Z|` for the exit law from the centre.
fn radial_edges(d: usize, s: f64, bins: usize) -> Vec<f64> {
    (1..bins)
        .map(|k| {
            let target = k as f64 / bins as f64;
            let (mut lo, mut hi) = (1.0f64, 2.0f64);
            while poisson_ball_radial_cdf(d, s, 1.0, hi).unwrap() < target {
                hi *= 2.0;
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if poisson_ball_radial_cdf(d, s, 1.0, mid).unwrap() < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

#[test]
fn radial_cdf_matches_beta_law() {
    use statrs::function::beta::beta_reg;
    for &(d, s) in &[(1usize, 0.5), (2, 0.5), (3, 0.8)] {
        for &rho in &[1.01, 1.5, 3.0, 20.0] {
            let q = poisson_ball_radial_cdf(d, s, 1.0, rho).unwrap();
            let oracle = 1.0 - beta_reg(s, 1.0 - s, 1.0 / (rho * rho));
            assert!((q - oracle).abs() < 1e-7, "d={d} s={s} rho={rho}: {q} vs {oracle}");
        }
    }
}

#[test]
fn brownian_paths_creep_out() {
    let t = LevyTriplet::brownian(2, 1.0).unwrap();
    let v = unit_ball(2);
    let cfg = PathConfig::euler(1e-3, 1e3, 1);
    let tree = SeedTree::new(1);
    for i in 0..200 {
        let mut rng = tree.index(i).rng();
        let e = simulate_until_exit(&t, &DriftField::zero(2), &v, &[0.0, 0.0], 0.0, &cfg, &mut rng).unwrap();
        assert_eq!(e.exit_mode, ExitMode::BoundaryCreep);
        let r = norm(&e.exit_pos);
        assert!((1.0..1.0 + 1e-6).contains(&r), "{r}");
        assert_eq!(e.fk_weight, 1.0);
    }
}

#[test]
fn argument_errors() {
    let t = stable(2, 0.5);
    let v = unit_ball(2);
    let mut rng = SeedTree::new(2).rng();
    let cfg = PathConfig::euler(0.0, 1.0, 1);
    assert!(simulate_until_exit(&t, &DriftField::zero(2), &v, &[0.0, 0.0], 0.0, &cfg, &mut rng).is_err());
    let cfg = PathConfig::euler(1e-3, 1.0, 1);
    assert!(matches!(
        simulate_until_exit(&t, &DriftField::zero(2), &v, &[2.0, 0.0], 0.0, &cfg, &mut rng),
        Err(crate::Error::Domain(_))
    ));
    assert!(wos_exit_ball(0.5, &[0.0, 0.0], 1.0, &[1.0, 0.0], &mut rng).is_err());
    let drifted = DriftField::builtin(2, DriftKind::Constant { c: vec![1.0, 0.0] }).unwrap();
    assert!(simulate_until_exit(&t, &drifted, &v, &[0.0, 0.0], 0.0, &PathConfig::wos(1), &mut rng).is_err());
}

#[test]
fn deterministic_replay() {
    let t = stable(2, 0.7);
    let b = DriftField::builtin(2, DriftKind::SinCos { amp: 0.5 }).unwrap();
    let v = unit_ball(2);
    let cfg = PathConfig::euler(1e-3, 1e3, 5);
    let run = || {
        let mut rng = SeedTree::new(5).index(17).rng();
        simulate_until_exit(&t, &b, &v, &[0.1, 0.2], 0.3, &cfg, &mut rng).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn wos_exit_from_centre_is_isotropic_and_matches_radial_law() {
    let (d, s) = (2, 0.5);
    let n = 100_000u64;
    let tree = SeedTree::new(21);
    let mut radii = Vec::with_capacity(n as usize);
    let mut quadrants = [0u64; 8];
    for i in 0..n {
        let mut rng = tree.index(i).rng();
        let e = wos_exit_ball(s, &[0.0, 0.0], 1.0, &[0.0, 0.0], &mut rng).unwrap();
        let a = e.exit_pos[1].atan2(e.exit_pos[0]);
        let k = (((a + std::f64::consts::PI) / (2.0 * std::f64::consts::PI)) * 8.0) as usize;
        quadrants[k.min(7)] += 1;
        radii.push(norm(&e.exit_pos));
        assert!(e.exit_time.is_nan());
    }
    let angular = chi_square_gof(&quadrants, &[0.125; 8]);
    assert!(angular.p_value > 1e-3, "{angular:?}");
    let ks = ks_distance(&mut radii, |r| poisson_ball_radial_cdf(d, s, 1.0, r).unwrap());
    assert!(ks < 0.01, "KS = {ks}");
}

#[test]
fn wos_strong_markov_composition() {
    let s = 0.6;
    let x0 = [0.2, -0.1];
    let edges = [1.05, 1.2, 1.5, 2.0, 3.0];
    let n = 40_000u64;
    let direct_tree = SeedTree::new(31).derive("direct");
    let nested_tree = SeedTree::new(31).derive("nested");
    let mut a = [0u64; 6];
    let mut b = [0u64; 6];
    for i in 0..n {
        let mut rng = direct_tree.index(i).rng();
        let e = wos_exit_ball(s, &[0.0, 0.0], 1.0, &x0, &mut rng).unwrap();
        a[bin_of(&edges, norm(&e.exit_pos))] += 1;
        let mut rng = nested_tree.index(i).rng();
        let mut x = x0.to_vec();
        // leave the inner ball first, then continue in the outer one
        if norm(&x) < 0.5 {
            x = wos_exit_ball(s, &[0.0, 0.0], 0.5, &x, &mut rng).unwrap().exit_pos;
        }
        if norm(&x) < 1.0 {
            x = wos_exit_ball(s, &[0.0, 0.0], 1.0, &x, &mut rng).unwrap().exit_pos;
        }
        b[bin_of(&edges, norm(&x))] += 1;
    }
    let t = chi_square_two_sample(&a, &b);
    assert!(t.p_value > 1e-3, "{t:?}");
}

#[test]
fn euler_stable_exit_law_matches_ball_density() {
    let (d, s) = (2, 0.5);
    let t = stable(d, s);
    let v = unit_ball(d);
    let cfg = PathConfig::euler(2e-4, 1e3, 3);
    let edges = radial_edges(d, s, 10);
    let n = 20_000u64;
    let tree = SeedTree::new(3);
    let stats = run_paths_vec(n, 11, &tree, |_, rng, out| {
        let e = simulate_until_exit(&t, &DriftField::zero(d), &v, &[0.0, 0.0], 0.0, &cfg, rng).unwrap();
        out[bin_of(&edges, norm(&e.exit_pos))] = 1.0;
        out[10] = if e.exit_mode == ExitMode::JumpOvershoot { 1.0 } else { 0.0 };
        true
    });
    let counts: Vec<u64> = (0..10).map(|k| (stats.estimate(k).value * n as f64).round() as u64).collect();
    let gof = chi_square_gof(&counts, &[0.1; 10]);
    assert!(gof.p_value > 1e-3, "{gof:?} {counts:?}");
    assert_eq!(stats.estimate(10).value, 1.0);
}

#[test]
fn occupation_trivial_cases() {
    let t = stable(1, 0.5);
    let v = unit_ball(1);
    let cfg = PathConfig::euler(1e-3, 1e3, 4);
    let mut rng = SeedTree::new(4).rng();
    let z = occupation_functional(&t, &DriftField::zero(1), &v, &[0.0], |_| 0.0, 0.0, &cfg, &mut rng).unwrap();
    assert_eq!(z, 0.0);
    let mut rng = SeedTree::new(4).rng();
    let (o, e) = occupation_in(&t, &DriftField::zero(1), &v.shape, &[0.0], &|_: &[f64]| 1.0, 0.0, &cfg, &mut rng).unwrap();
    assert!((o - e.exit_time).abs() < 1e-12 * e.exit_time.max(1.0));
}

#[test]
fn brownian_interval_exit_time() {
    let t = LevyTriplet::brownian(1, 1.0).unwrap();
    let v = unit_ball(1);
    let cfg = PathConfig::euler(1e-3, 1e3, 6);
    let tree = SeedTree::new(6);
    let e = run_paths(100_000, &tree, |_, rng| {
        occupation_functional(&t, &DriftField::zero(1), &v, &[0.0], |_| 1.0, 0.0, &cfg, rng).ok()
    });
    let oracle = expected_exit_time_ball(1, 1.0, 1.0, &[0.0]).unwrap();
    assert!((e.value - oracle).abs() < 0.02 * oracle, "{e:?} vs {oracle}");
}

#[test]
fn wos_occupation_gives_exit_time() {
    for (t, d) in [(stable(2, 0.75), 2usize), (LevyTriplet::brownian(3, 1.0).unwrap(), 3)] {
        let v = unit_ball(d);
        let x0 = vec![0.3; d];
        let cfg = PathConfig::wos(8);
        let tree = SeedTree::new(8);
        let e = run_paths(20_000, &tree, |_, rng| {
            occupation_functional(&t, &DriftField::zero(d), &v, &x0, |_| 1.0, 0.0, &cfg, rng).ok()
        });
        let s = t.jump.isotropic_s().unwrap_or(1.0);
        let oracle = expected_exit_time_ball(d, s, 1.0, &x0).unwrap();
        assert!(e.within(oracle, 4.0), "d={d}: {e:?} vs {oracle}");
    }
}

#[test]
fn killing_weight_and_per_step_agree() {
    let t = stable(2, 0.75);
    let b = DriftField::builtin(2, DriftKind::SinCos { amp: 0.5 }).unwrap();
    let v = unit_ball(2);
    let kappa = 2.0;
    let f = |z: &[f64]| 1.0 / (1.0 + norm(z));
    let weight_cfg = PathConfig::euler(1e-3, 1e3, 9);
    let kill_cfg = weight_cfg.with_killing(KillingMode::PerStep);
    let n = 20_000;
    let a = run_paths(n, &SeedTree::new(9).derive("weight"), |_, rng| {
        let e = simulate_until_exit(&t, &b, &v, &[0.2, 0.0], kappa, &weight_cfg, rng).ok()?;
        Some(e.weighted(f))
    });
    let k = run_paths(n, &SeedTree::new(9).derive("kill"), |_, rng| {
        let e = simulate_until_exit(&t, &b, &v, &[0.2, 0.0], kappa, &kill_cfg, rng).ok()?;
        Some(e.weighted(f))
    });
    assert!(a.z_score(&k) < 3.0, "{a:?} vs {k:?}");
    // κ = 0 leaves the weight at exactly one
    let mut rng = SeedTree::new(9).rng();
    let e = simulate_until_exit(&t, &b, &v, &[0.2, 0.0], 0.0, &weight_cfg, &mut rng).unwrap();
    assert_eq!(e.fk_weight, 1.0);
}

#[test]
fn wos_and_euler_exit_laws_agree() {
    // Euler misses excursions across the boundary between grid times; the
    // effect on the first shell grows with s and is visible at s = 0.75
    let (d, s) = (2, 0.5);
    let t = stable(d, s);
    let v = unit_ball(d);
    let x0 = [0.4, 0.1];
    let edges = [1.02, 1.1, 1.3, 1.7, 2.5];
    let n = 20_000u64;
    let count = |cfg: PathConfig, label: &str| {
        let st = run_paths_vec(n, 6, &SeedTree::new(10).derive(label), |_, rng, out| {
            let e = simulate_until_exit(&t, &DriftField::zero(d), &v, &x0, 0.0, &cfg, rng).unwrap();
            out[bin_of(&edges, norm(&e.exit_pos))] = 1.0;
            true
        });
        (0..6).map(|k| (st.estimate(k).value * n as f64).round() as u64).collect::<Vec<_>>()
    };
    let a = count(PathConfig::euler(1e-4, 1e3, 10), "euler");
    let b = count(PathConfig::wos(10), "wos");
    let r = chi_square_two_sample(&a, &b);
    assert!(r.p_value > 0.01, "{r:?} {a:?} {b:?}");
}

#[test]
fn censoring_at_horizon() {
    let t = LevyTriplet::brownian(1, 1e-6).unwrap();
    let v = unit_ball(1);
    let cfg = PathConfig::euler(1e-2, 0.1, 1);
    let mut rng = SeedTree::new(1).rng();
    let e = simulate_until_exit(&t, &DriftField::zero(1), &v, &[0.0], 0.0, &cfg, &mut rng).unwrap();
    assert!(e.is_censored());
    assert!(e.exit_time <= 0.1 + 1e-12);
}
