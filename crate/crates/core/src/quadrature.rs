//! Gauss rules on the unit interval and collapsed (Duffy) product rules on
//! reference simplices.
//!
//! Simplex rules are returned in barycentric form with weights normalized to
//! sum to one, so integrating over a physical simplex is
//! `measure * sum(w_q * f(sum_k lambda_qk * x_k))`.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[0, 1]`, exact for degree `2n - 1`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one Gauss point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        // map [-1, 1] -> [0, 1]
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A quadrature rule on the reference `dim`-simplex.
#[derive(Debug, Clone)]
pub struct SimplexRule {
    pub dim: usize,
    /// Barycentric coordinates, `dim + 1` entries per point.
    pub bary: Vec<Vec<f64>>,
    /// Normalized weights (sum to 1).
    pub weights: Vec<f64>,
}

impl SimplexRule {
    /// Collapsed product rule exact for polynomials of total degree `degree`.
    pub fn with_degree(dim: usize, degree: usize) -> Self {
        let n = ((degree + dim + 1) / 2).max(1);
        Self::collapsed(dim, n)
    }

    /// Collapsed product rule with `n` Gauss points per direction.
    pub fn collapsed(dim: usize, n: usize) -> Self {
        let (x, w) = gauss_legendre_unit(n);
        let mut bary = Vec::new();
        let mut weights = Vec::new();
        match dim {
            0 => {
                bary.push(vec![1.0]);
                weights.push(1.0);
            }
            1 => {
                for (&s, &ws) in x.iter().zip(&w) {
                    bary.push(vec![1.0 - s, s]);
                    weights.push(ws);
                }
            }
            2 => {
                for (&u, &wu) in x.iter().zip(&w) {
                    for (&v, &wv) in x.iter().zip(&w) {
                        let px = u;
                        let py = v * (1.0 - u);
                        bary.push(vec![1.0 - px - py, px, py]);
                        weights.push(2.0 * wu * wv * (1.0 - u));
                    }
                }
            }
            3 => {
                for (&u, &wu) in x.iter().zip(&w) {
                    for (&v, &wv) in x.iter().zip(&w) {
                        for (&s, &ws) in x.iter().zip(&w) {
                            let px = u;
                            let py = v * (1.0 - u);
                            let pz = s * (1.0 - u) * (1.0 - v);
                            bary.push(vec![1.0 - px - py - pz, px, py, pz]);
                            weights.push(6.0 * wu * wv * ws * (1.0 - u).powi(2) * (1.0 - v));
                        }
                    }
                }
            }
            _ => panic!("simplex rules are provided for dim <= 3, got {dim}"),
        }
        SimplexRule { dim, bary, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical points for a simplex with the given vertex coordinates.
    pub fn map_points(&self, verts: &[&[f64]]) -> Vec<Vec<f64>> {
        let space_dim = verts[0].len();
        self.bary
            .iter()
            .map(|lam| {
                let mut p = vec![0.0; space_dim];
                for (l, v) in lam.iter().zip(verts) {
                    for (pc, vc) in p.iter_mut().zip(v.iter()) {
                        *pc += l * vc;
                    }
                }
                p
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..8 {
            let (x, w) = gauss_legendre_unit(n);
            for p in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    // Reference simplex moments: integral of prod lambda_k^a_k over the simplex
    // normalized by its measure is dim! * prod a_k! / (dim + sum a_k)!.
    fn moment(dim: usize, a: &[usize]) -> f64 {
        let s: usize = a.iter().sum();
        factorial(dim) * a.iter().map(|&k| factorial(k)).product::<f64>() / factorial(dim + s)
    }

    #[test]
    fn simplex_rules_hit_requested_degree() {
        for dim in 1..=3 {
            for degree in 1..=8 {
                let rule = SimplexRule::with_degree(dim, degree);
                let wsum: f64 = rule.weights.iter().sum();
                assert!((wsum - 1.0).abs() < 1e-14);
                // all exponent tuples of total degree == degree on lambda_1..lambda_dim
                let mut exps = vec![0usize; dim + 1];
                loop {
                    let tot: usize = exps.iter().sum();
                    if tot <= degree {
                        let q: f64 = rule
                            .bary
                            .iter()
                            .zip(&rule.weights)
                            .map(|(l, w)| {
                                w * l
                                    .iter()
                                    .zip(&exps)
                                    .map(|(x, &e)| x.powi(e as i32))
                                    .product::<f64>()
                            })
                            .sum();
                        let exact = moment(dim, &exps);
                        assert!(
                            (q - exact).abs() < 1e-14,
                            "dim={dim} degree={degree} exps={exps:?}: {q} vs {exact}"
                        );
                    }
                    // odometer
                    let mut k = 0;
                    loop {
                        if k == exps.len() {
                            break;
                        }
                        exps[k] += 1;
                        if exps[k] <= degree {
                            break;
                        }
                        exps[k] = 0;
                        k += 1;
                    }
                    if k == exps.len() {
                        break;
                    }
                }
            }
        }
    }
}
