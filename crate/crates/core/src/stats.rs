//! Goodness-of-fit helpers used by validation runs.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Result of a hypothesis test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

fn chi2_upper(stat: f64, dof: f64) -> f64 {
    if dof <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof).expect("positive degrees of freedom");
    dist.sf(stat)
}

/// Pearson test of bin counts against bin probabilities.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> TestResult {
    let n: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut bins = 0usize;
    for (c, p) in counts.iter().zip(probs) {
        let e = p * n as f64;
        if e > 0.0 {
            stat += (*c as f64 - e).powi(2) / e;
            bins += 1;
        }
    }
    let dof = bins.saturating_sub(1) as f64;
    TestResult {
        statistic: stat,
        dof,
        p_value: chi2_upper(stat, dof),
    }
}

/// Two-sample chi-square test of homogeneity on shared bins.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> TestResult {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let mut stat = 0.0;
    let mut bins = 0usize;
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (*x as f64, *y as f64);
        if x + y > 0.0 {
            stat += (ka * x - kb * y).powi(2) / (x + y);
            bins += 1;
        }
    }
    let dof = bins.saturating_sub(1) as f64;
    TestResult {
        statistic: stat,
        dof,
        p_value: chi2_upper(stat, dof),
    }
}

/// Kolmogorov distance between the empirical law of `samples` and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Bin index of `v` among sorted interior `edges` (`edges.len() + 1` bins).
pub fn bin_of(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|e| *e <= v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_perfect_fit() {
        let r = chi_square_gof(&[25, 25, 25, 25], &[0.25; 4]);
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let r = chi_square_gof(&[100, 0], &[0.5, 0.5]);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn two_sample_identical() {
        let r = chi_square_two_sample(&[10, 20, 30], &[20, 40, 60]);
        assert!(r.statistic < 1e-12);
    }

    #[test]
    fn ks_uniform() {
        let mut xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_distance(&mut xs, |x| x) <= 0.0005 + 1e-12);
        assert_eq!(bin_of(&[0.25, 0.5, 0.75], 0.6), 2);
    }
}
