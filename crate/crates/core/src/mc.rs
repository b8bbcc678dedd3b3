//! Monte Carlo plumbing: estimates with standard errors and a deterministic
//! chunked runner.
//!
//! Path `i` always draws from substream `i` of the seed tree and chunks are
//! reduced in index order, so results are bit-identical whether chunks run
//! sequentially or on a thread pool.

use serde::{Deserialize, Serialize};

use crate::rng::{PathRng, SeedTree};

/// Mean of a path functional with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub censored_fraction: f64,
}

/// Largest censoring fraction accepted by validated estimates.
pub const MAX_CENSORED_FRACTION: f64 = 1e-3;

impl MCEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            n_samples: 0,
            censored_fraction: 0.0,
        }
    }

    pub fn zero() -> Self {
        Self::exact(0.0)
    }

    pub fn is_validated(&self) -> bool {
        self.censored_fraction <= MAX_CENSORED_FRACTION
    }

    /// Sum of independent estimates.
    pub fn add(&self, o: &MCEstimate) -> MCEstimate {
        MCEstimate {
            value: self.value + o.value,
            std_error: self.std_error.hypot(o.std_error),
            n_samples: self.n_samples + o.n_samples,
            censored_fraction: self.censored_fraction.max(o.censored_fraction),
        }
    }

    pub fn scale(&self, c: f64) -> MCEstimate {
        MCEstimate {
            value: c * self.value,
            std_error: c.abs() * self.std_error,
            ..*self
        }
    }

    /// `|a − b| / √(σ_a² + σ_b²)`; zero when both sides are exact and equal.
    pub fn z_score(&self, o: &MCEstimate) -> f64 {
        let diff = (self.value - o.value).abs();
        let se = self.std_error.hypot(o.std_error);
        if se == 0.0 {
            if diff <= 1e-12 * (1.0 + self.value.abs()) {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / se
        }
    }

    /// Whether `target` lies within `k` standard errors.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error + 1e-12 * (1.0 + target.abs())
    }
}

/// Kahan–Babuška compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Componentwise sums and sums of squares of vector-valued samples.
#[derive(Debug, Clone)]
pub struct VecStats {
    sum: Vec<Kahan>,
    sq: Vec<Kahan>,
    pub n: u64,
    pub censored: u64,
}

impl VecStats {
    pub fn new(k: usize) -> Self {
        Self {
            sum: vec![Kahan::default(); k],
            sq: vec![Kahan::default(); k],
            n: 0,
            censored: 0,
        }
    }

    pub fn push(&mut self, v: &[f64]) {
        for (i, x) in v.iter().enumerate() {
            self.sum[i].add(*x);
            self.sq[i].add(x * x);
        }
        self.n += 1;
    }

    pub fn push_censored(&mut self) {
        self.censored += 1;
    }

    pub fn merge(&mut self, o: &VecStats) {
        for i in 0..self.sum.len() {
            self.sum[i].add(o.sum[i].value());
            self.sq[i].add(o.sq[i].value());
        }
        self.n += o.n;
        self.censored += o.censored;
    }

    pub fn len(&self) -> usize {
        self.sum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum.is_empty()
    }

    pub fn estimate(&self, i: usize) -> MCEstimate {
        let total = self.n + self.censored;
        let censored_fraction = if total == 0 {
            0.0
        } else {
            self.censored as f64 / total as f64
        };
        if self.n == 0 {
            return MCEstimate {
                value: f64::NAN,
                std_error: f64::NAN,
                n_samples: 0,
                censored_fraction,
            };
        }
        let n = self.n as f64;
        let mean = self.sum[i].value() / n;
        let var = if self.n > 1 {
            ((self.sq[i].value() - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        MCEstimate {
            value: mean,
            std_error: (var / n).sqrt(),
            n_samples: self.n,
            censored_fraction,
        }
    }

    pub fn estimates(&self) -> Vec<MCEstimate> {
        (0..self.len()).map(|i| self.estimate(i)).collect()
    }
}

/// Paths per chunk; fixed so that the reduction order never depends on the
/// number of threads.
pub const CHUNK: u64 = 512;

/// Runs `n` independent paths producing `k` values each.
///
/// The closure receives the path index and its RNG, writes into the output
/// slice and returns `false` for censored paths, which are counted and
/// excluded from the means.
pub fn run_paths_vec<F>(n: u64, k: usize, tree: &SeedTree, f: F) -> VecStats
where
    F: Fn(u64, &mut PathRng, &mut [f64]) -> bool + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let run_chunk = |c: u64| {
        let mut st = VecStats::new(k);
        let mut buf = vec![0.0; k];
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            buf.iter_mut().for_each(|b| *b = 0.0);
            let mut rng = tree.index(i).rng();
            if f(i, &mut rng, &mut buf) {
                st.push(&buf);
            } else {
                st.push_censored();
            }
        }
        st
    };
    let parts: Vec<VecStats> = map_indices(chunks, run_chunk);
    let mut total = VecStats::new(k);
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Scalar version of [`run_paths_vec`]; `None` marks a censored path.
pub fn run_paths<F>(n: u64, tree: &SeedTree, f: F) -> MCEstimate
where
    F: Fn(u64, &mut PathRng) -> Option<f64> + Sync,
{
    run_paths_vec(n, 1, tree, |i, rng, out| match f(i, rng) {
        Some(v) => {
            out[0] = v;
            true
        }
        None => false,
    })
    .estimate(0)
}

/// Ordered map over `0..n`, parallel when the `parallel` feature is on.
pub fn map_indices<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(&f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
