use nalgebra::{DMatrix, DVector};

/// Fixed iteration budget of the projected-gradient phase.
pub const NNLS_MAX_ITER: usize = 1000;
/// Relative step size at which the iteration is declared converged.
pub const NNLS_STEP_TOL: f64 = 1e-10;

/// Solution of `min ‖A a − r‖²` subject to `a ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub coeffs: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Non-negative least squares by projected gradient descent with step
/// `1/‖AᵀA‖₂`, followed by an exact least-squares solve on the detected
/// positive set when that solve stays feasible.
pub fn nnls(a: &DMatrix<f64>, r: &DVector<f64>) -> NnlsSolution {
    let k = a.ncols();
    if k == 0 {
        return NnlsSolution {
            coeffs: vec![],
            residual_norm: r.norm(),
            iterations: 0,
        };
    }
    let ata = a.transpose() * a;
    let atr = a.transpose() * r;
    let lip = ata.clone().symmetric_eigenvalues().max();
    if !(lip > 0.0) {
        return NnlsSolution {
            coeffs: vec![0.0; k],
            residual_norm: r.norm(),
            iterations: 0,
        };
    }
    let mut x = DVector::<f64>::zeros(k);
    let mut iterations = 0;
    for it in 0..NNLS_MAX_ITER {
        iterations = it + 1;
        let grad = &ata * &x - &atr;
        let next = (&x - grad / lip).map(|v| v.max(0.0));
        let step = (&next - &x).norm();
        x = next;
        if step <= NNLS_STEP_TOL * x.norm().max(1e-300) {
            break;
        }
    }
    let support: Vec<usize> = (0..k).filter(|i| x[*i] > 0.0).collect();
    if !support.is_empty() {
        if let Some(sol) = solve_subset(&ata, &atr, &support) {
            if sol.iter().all(|v| *v > 0.0) {
                let mut polished = DVector::<f64>::zeros(k);
                for (j, i) in support.iter().enumerate() {
                    polished[*i] = sol[j];
                }
                let g = &ata * &polished - &atr;
                // KKT: no inactive coordinate wants to become positive
                if (0..k).all(|i| polished[i] > 0.0 || g[i] >= -1e-12 * (1.0 + atr.norm())) {
                    x = polished;
                }
            }
        }
    }
    NnlsSolution {
        residual_norm: (a * &x - r).norm(),
        coeffs: x.iter().copied().collect(),
        iterations,
    }
}

/// Unconstrained normal-equation solve restricted to `cols`.
pub(crate) fn solve_subset(ata: &DMatrix<f64>, atr: &DVector<f64>, cols: &[usize]) -> Option<Vec<f64>> {
    let m = cols.len();
    let sub = DMatrix::from_fn(m, m, |i, j| ata[(cols[i], cols[j])]);
    let rhs = DVector::from_fn(m, |i, _| atr[cols[i]]);
    let sol = sub.cholesky()?.solve(&rhs);
    Some(sol.iter().copied().collect())
}

/// Ordinary least squares with sandwich standard errors for independent
/// response errors `sigma`.
pub fn ols_with_errors(a: &DMatrix<f64>, r: &DVector<f64>, sigma: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let k = a.ncols();
    if k == 0 {
        return Some((vec![], vec![]));
    }
    let ata = a.transpose() * a;
    let inv = ata.clone().try_inverse()?;
    let coef = &inv * (a.transpose() * r);
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for i in 0..a.nrows() {
        let row = a.row(i).transpose();
        meat += &row * row.transpose() * sigma[i].powi(2);
    }
    let cov = &inv * meat * &inv;
    Some((coef.iter().copied().collect(), (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive search over active sets.
    fn brute_force(a: &DMatrix<f64>, r: &DVector<f64>) -> (Vec<f64>, f64) {
        let k = a.ncols();
        let ata = a.transpose() * a;
        let atr = a.transpose() * r;
        let mut best = (vec![0.0; k], r.norm());
        for mask in 1u32..(1 << k) {
            let cols: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
            if let Some(sol) = solve_subset(&ata, &atr, &cols) {
                if sol.iter().all(|v| *v >= 0.0) {
                    let mut x = DVector::zeros(k);
                    for (j, i) in cols.iter().enumerate() {
                        x[*i] = sol[j];
                    }
                    let res = (a * &x - r).norm();
                    if res < best.1 {
                        best = (x.iter().copied().collect(), res);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn recovers_positive_solution() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 0.5]);
        let truth = DVector::from_vec(vec![2.0, 3.0]);
        let r = &a * &truth;
        let s = nnls(&a, &r);
        assert!((s.coeffs[0] - 2.0).abs() < 1e-10 && (s.coeffs[1] - 3.0).abs() < 1e-10);
        assert!(s.residual_norm < 1e-9);
    }

    #[test]
    fn clamps_negative_direction() {
        let a = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.0]);
        let r = DVector::from_vec(vec![-1.0, -2.0, -1.5]);
        assert_eq!(nnls(&a, &r).coeffs, vec![0.0]);
    }

    #[test]
    fn ols_errors_scale_with_noise() {
        let a = DMatrix::from_row_slice(4, 1, &[1.0, 1.0, 1.0, 1.0]);
        let r = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let (c, se) = ols_with_errors(&a, &r, &[2.0; 4]).unwrap();
        assert!((c[0] - 2.5).abs() < 1e-12);
        assert!((se[0] - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn matches_brute_force(vals in proptest::collection::vec(-2.0f64..2.0, 18), rhs in proptest::collection::vec(-3.0f64..3.0, 6)) {
            let a = DMatrix::from_row_slice(6, 3, &vals);
            prop_assume!(a.clone().svd(false, false).singular_values.min() > 1e-2);
            let r = DVector::from_vec(rhs);
            let s = nnls(&a, &r);
            let (_, best) = brute_force(&a, &r);
            prop_assert!(s.residual_norm <= best + 1e-7 * (1.0 + best));
            prop_assert!(s.coeffs.iter().all(|c| *c >= 0.0));
        }
    }
}
