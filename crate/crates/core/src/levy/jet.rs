//! Truncated multivariate Taylor polynomials ("jets") used to differentiate
//! built-in drift fields exactly in the Hörmander bracket recursion.

use std::collections::HashMap;
use std::sync::Arc;

#[derive(Debug)]
pub struct JetSpace {
    pub dim: usize,
    pub order: usize,
    exps: Vec<Vec<u32>>,
    degree: Vec<usize>,
    mul: Vec<(usize, usize, usize)>,
    deriv: Vec<Vec<(usize, usize, f64)>>,
    unit: Vec<usize>,
}

impl JetSpace {
    pub fn new(dim: usize, order: usize) -> Arc<Self> {
        let mut exps: Vec<Vec<u32>> = Vec::new();
        fn rec(prefix: &mut Vec<u32>, dim: usize, left: usize, out: &mut Vec<Vec<u32>>) {
            if prefix.len() == dim {
                out.push(prefix.clone());
                return;
            }
            for e in 0..=left {
                prefix.push(e as u32);
                rec(prefix, dim, left - e, out);
                prefix.pop();
            }
        }
        rec(&mut Vec::new(), dim, order, &mut exps);
        exps.sort_by_key(|e| e.iter().sum::<u32>());
        let index: HashMap<Vec<u32>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let degree: Vec<usize> = exps.iter().map(|e| e.iter().sum::<u32>() as usize).collect();
        let mut mul = Vec::new();
        for i in 0..exps.len() {
            for j in 0..exps.len() {
                if degree[i] + degree[j] <= order {
                    let e: Vec<u32> = exps[i].iter().zip(&exps[j]).map(|(a, b)| a + b).collect();
                    mul.push((i, j, index[&e]));
                }
            }
        }
        let deriv = (0..dim)
            .map(|k| {
                exps.iter()
                    .enumerate()
                    .filter(|(_, e)| e[k] > 0)
                    .map(|(i, e)| {
                        let mut f = e.clone();
                        f[k] -= 1;
                        (i, index[&f], f64::from(e[k]))
                    })
                    .collect()
            })
            .collect();
        let unit = (0..dim)
            .map(|k| {
                let mut e = vec![0u32; dim];
                e[k] = 1;
                index.get(&e).copied().unwrap_or(usize::MAX)
            })
            .collect();
        Arc::new(Self {
            dim,
            order,
            exps,
            degree,
            mul,
            deriv,
            unit,
        })
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }
}

/// Taylor expansion `Σ c_e t^e` of a function around a base point.
#[derive(Debug, Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coef: Vec<f64>,
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, c: f64) -> Self {
        let mut coef = vec![0.0; space.len()];
        coef[0] = c;
        Self {
            space: space.clone(),
            coef,
        }
    }

    /// The coordinate function `x_k` expanded at `base`.
    pub fn variable(space: &Arc<JetSpace>, k: usize, base: f64) -> Self {
        let mut j = Self::constant(space, base);
        if space.order >= 1 {
            j.coef[space.unit[k]] = 1.0;
        }
        j
    }

    pub fn value(&self) -> f64 {
        self.coef[0]
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet {
            space: self.space.clone(),
            coef: self.coef.iter().zip(&o.coef).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        Jet {
            space: self.space.clone(),
            coef: self.coef.iter().zip(&o.coef).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            coef: self.coef.iter().map(|a| a * c).collect(),
        }
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let mut coef = vec![0.0; self.coef.len()];
        for &(i, j, k) in &self.space.mul {
            coef[k] += self.coef[i] * o.coef[j];
        }
        Jet {
            space: self.space.clone(),
            coef,
        }
    }

    /// `∂/∂x_k`; the top-degree coefficients become meaningless, which the
    /// caller accounts for by tracking the usable order.
    pub fn derivative(&self, k: usize) -> Jet {
        let mut coef = vec![0.0; self.coef.len()];
        for &(src, dst, f) in &self.space.deriv[k] {
            coef[dst] += f * self.coef[src];
        }
        Jet {
            space: self.space.clone(),
            coef,
        }
    }

    fn nilpotent_part(&self) -> Jet {
        let mut n = self.clone();
        n.coef[0] = 0.0;
        n
    }

    fn series(&self, terms: impl Fn(usize) -> f64) -> Jet {
        // Σ_k terms(k) δ^k with δ nilpotent of order `space.order + 1`
        let delta = self.nilpotent_part();
        let mut acc = Jet::constant(&self.space, terms(0));
        let mut pow = Jet::constant(&self.space, 1.0);
        for k in 1..=self.space.order {
            pow = pow.mul(&delta);
            acc = acc.add(&pow.scale(terms(k)));
        }
        acc
    }

    pub fn sin(&self) -> Jet {
        let a = self.coef[0];
        let (s, c) = a.sin_cos();
        self.series(|k| {
            let f = factorial(k);
            // derivatives of sin cycle: sin, cos, -sin, -cos
            match k % 4 {
                0 => s / f,
                1 => c / f,
                2 => -s / f,
                _ => -c / f,
            }
        })
    }

    pub fn cos(&self) -> Jet {
        let a = self.coef[0];
        let (s, c) = a.sin_cos();
        self.series(|k| {
            let f = factorial(k);
            match k % 4 {
                0 => c / f,
                1 => -s / f,
                2 => -c / f,
                _ => s / f,
            }
        })
    }

    pub fn degree_of(&self, i: usize) -> usize {
        self.space.degree[i]
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_and_trig() {
        let sp = JetSpace::new(2, 4);
        let x = Jet::variable(&sp, 0, 0.3);
        let y = Jet::variable(&sp, 1, -0.2);
        // f = sin(x) * y ; ∂x f = cos(x) y ; ∂y∂x f = cos(x)
        let f = x.sin().mul(&y);
        let fx = f.derivative(0);
        assert!((fx.value() - 0.3f64.cos() * -0.2).abs() < 1e-14);
        let fxy = fx.derivative(1);
        assert!((fxy.value() - 0.3f64.cos()).abs() < 1e-14);
        let fxx = fx.derivative(0);
        assert!((fxx.value() + 0.3f64.sin() * -0.2).abs() < 1e-14);
        let c = x.cos().derivative(0).derivative(0).derivative(0);
        assert!((c.value() - 0.3f64.sin()).abs() < 1e-14);
    }
}
