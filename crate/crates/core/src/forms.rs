//! Norms, the trilinear form, Poincare and Grashof constants, and sample-based
//! checks of the classical bounds on `b`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::spectral::{random_band_limited, SpectralField, SpectralGrid};

pub use crate::spectral::trilinear_b;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub l2: f64,
    pub h1_semi: f64,
    pub vprime: f64,
    pub linf_grad: f64,
}

pub fn norms(field: &SpectralField) -> Result<NormReport> {
    Ok(NormReport {
        l2: field.l2_sq().sqrt(),
        h1_semi: field.h1_sq().sqrt(),
        vprime: field.vprime_sq()?.sqrt(),
        linf_grad: field.grad_linf(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub lambda1: f64,
    pub rho: f64,
    pub grashof: f64,
    pub f: f64,
}

impl Constants {
    pub fn new(lambda1: f64, nu: f64, f: f64) -> Result<Self> {
        Ok(Constants {
            lambda1,
            rho: lambda1.powf(-0.5),
            grashof: grashof(f, lambda1, nu)?,
            f,
        })
    }
}

/// `Gr = F / (lambda1 nu^2)`.
pub fn grashof(f: f64, lambda1: f64, nu: f64) -> Result<f64> {
    if !(f >= 0.0) || !(lambda1 > 0.0) || !(nu > 0.0) {
        return Err(invalid(format!(
            "grashof needs F >= 0 and positive lambda1, nu (got F={f}, lambda1={lambda1}, nu={nu})"
        )));
    }
    Ok(f / (lambda1 * nu * nu))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// Periodic box `[0, L]^d`, mean-zero fields.
    Torus { dim: usize, length: f64, m: usize },
    /// Unit square with homogeneous Dirichlet data, `n` interior points per axis.
    DirichletSquare { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen {
    pub lambda1: f64,
    pub rho: f64,
    pub iterations: usize,
}

const EIG_RTOL: f64 = 1e-8;
const EIG_MAX_ITER: usize = 500;

/// Smallest eigenvalue of the Laplacian by inverse power iteration.
pub fn poincare_constant(domain: Domain, seed: u64) -> Result<Eigen> {
    match domain {
        Domain::Torus { dim, length, m } => torus_eigen(dim, length, m, seed),
        Domain::DirichletSquare { n } => dirichlet_eigen(n, seed),
    }
}

fn torus_eigen(dim: usize, length: f64, m: usize, seed: u64) -> Result<Eigen> {
    let grid = SpectralGrid::new(dim, m, length)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = random_band_limited(&grid, (m / 3) as f64, 1.0, &mut rng);
    let mut last = f64::INFINITY;
    for it in 1..=EIG_MAX_ITER {
        // x <- A^{-1} x
        for c in x.coefficients_mut() {
            for (idx, z) in c.iter_mut().enumerate() {
                let k2 = grid.k2(idx);
                *z = if k2 == 0.0 { *z * 0.0 } else { *z / k2 };
            }
        }
        let n = x.l2_sq().sqrt();
        x.scale(1.0 / n);
        let lambda = x.h1_sq();
        if (lambda - last).abs() <= EIG_RTOL * lambda {
            return Ok(Eigen {
                lambda1: lambda,
                rho: lambda.powf(-0.5),
                iterations: it,
            });
        }
        last = lambda;
    }
    Err(Error::NotConverged {
        what: "torus inverse iteration".into(),
        iterations: EIG_MAX_ITER,
        residual: f64::NAN,
    })
}

// 5-point Laplacian on the interior n x n grid, h = 1/(n+1)
fn laplace_apply(n: usize, x: &[f64], out: &mut [f64]) {
    let h2 = ((n + 1) * (n + 1)) as f64;
    for i in 0..n {
        for j in 0..n {
            let c = x[i * n + j];
            let mut s = 4.0 * c;
            if i > 0 {
                s -= x[(i - 1) * n + j];
            }
            if i + 1 < n {
                s -= x[(i + 1) * n + j];
            }
            if j > 0 {
                s -= x[i * n + j - 1];
            }
            if j + 1 < n {
                s -= x[i * n + j + 1];
            }
            out[i * n + j] = s * h2;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cg_solve(n: usize, b: &[f64], x: &mut [f64], tol: f64) -> Result<()> {
    let len = b.len();
    let mut ax = vec![0.0; len];
    laplace_apply(n, x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let bnorm = dot(b, b).sqrt();
    let mut ap = vec![0.0; len];
    for _ in 0..20 * len {
        if rr.sqrt() <= tol * bnorm {
            return Ok(());
        }
        laplace_apply(n, &p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..len {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..len {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        what: "conjugate gradient".into(),
        iterations: 20 * len,
        residual: rr.sqrt() / bnorm,
    })
}

fn dirichlet_eigen(n: usize, seed: u64) -> Result<Eigen> {
    if n < 3 {
        return Err(invalid("need at least 3 interior points per axis"));
    }
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = n * n;
    let mut x: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
    let norm = dot(&x, &x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    let mut y = vec![0.0; len];
    let mut ax = vec![0.0; len];
    let mut last = f64::INFINITY;
    for it in 1..=EIG_MAX_ITER {
        y.copy_from_slice(&x);
        cg_solve(n, &x, &mut y, 1e-12)?;
        let norm = dot(&y, &y).sqrt();
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        laplace_apply(n, &x, &mut ax);
        let lambda = dot(&x, &ax);
        if (lambda - last).abs() <= EIG_RTOL * lambda {
            return Ok(Eigen {
                lambda1: lambda,
                rho: lambda.powf(-0.5),
                iterations: it,
            });
        }
        last = lambda;
    }
    Err(Error::NotConverged {
        what: "Dirichlet inverse iteration".into(),
        iterations: EIG_MAX_ITER,
        residual: f64::NAN,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    /// 2D Ladyzhenskaya-type bound with constant `2^{1/2}`.
    Lady2d,
    /// 3D bound with constant 2.
    Lady3d,
    /// `|b(v,u,v)| <= ||grad u||_inf |v|^2`.
    Holder,
}

impl Inequality {
    pub fn id(self) -> &'static str {
        match self {
            Inequality::Lady2d => "lady_2d",
            Inequality::Lady3d => "lady_3d",
            Inequality::Holder => "holder_linf",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityRow {
    pub inequality: Inequality,
    pub sample: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub dim: usize,
    pub rows: Vec<InequalityRow>,
}

impl InequalityReport {
    pub fn max_ratio(&self, which: Inequality) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.inequality == which)
            .map(|r| r.ratio)
            .fold(0.0, f64::max)
    }
}

pub type Triple = (SpectralField, SpectralField, SpectralField);

/// Grid used for the sampled inequality checks: band `|k| <= 8`, alias-free
/// triple products.
pub fn sample_grid(dim: usize) -> Result<Arc<SpectralGrid>> {
    SpectralGrid::torus(dim, 32)
}

pub const SAMPLE_BAND: f64 = 8.0;

/// Seeded random divergence-free triples with varied band limits.
pub fn random_triples(dim: usize, count: usize, seed: u64) -> Result<Vec<Triple>> {
    let grid = sample_grid(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::Rng;
    Ok((0..count)
        .map(|_| {
            let draw = |rng: &mut ChaCha8Rng| {
                let band = rng.random_range(1.0..=SAMPLE_BAND);
                let amp = rng.random_range(0.1..10.0);
                random_band_limited(&grid, band, amp, rng)
            };
            (draw(&mut rng), draw(&mut rng), draw(&mut rng))
        })
        .collect())
}

/// Evaluates the dimension-appropriate bound and the Holder bound on each
/// sample triple.
pub fn verify_ladyzhenskaya(samples: &[Triple], dim: usize) -> Result<InequalityReport> {
    if dim != 2 && dim != 3 {
        return Err(invalid(format!("dimension must be 2 or 3, got {dim}")));
    }
    let rows: Vec<Vec<InequalityRow>> = samples
        .par_iter()
        .enumerate()
        .map(|(i, (u, v, w))| -> Result<Vec<InequalityRow>> {
            if u.dim() != dim {
                return Err(Error::GridMismatch(format!("sample {i} is not {dim}-dimensional")));
            }
            let lhs = trilinear_b(u, v, w)?.abs();
            let (lu, hu) = (u.l2_sq().sqrt(), u.h1_sq().sqrt());
            let hv = v.h1_sq().sqrt();
            let (lw, hw) = (w.l2_sq().sqrt(), w.h1_sq().sqrt());
            let (which, rhs) = if dim == 2 {
                (
                    Inequality::Lady2d,
                    2f64.sqrt() * (lu * hu).sqrt() * hv * (lw * hw).sqrt(),
                )
            } else {
                (
                    Inequality::Lady3d,
                    2.0 * lu.powf(0.25) * hu.powf(0.75) * hv * lw.powf(0.25) * hw.powf(0.75),
                )
            };
            let holder_lhs = trilinear_b(v, u, v)?.abs();
            let holder_rhs = u.grad_linf() * v.l2_sq();
            Ok(vec![
                InequalityRow {
                    inequality: which,
                    sample: i,
                    lhs,
                    rhs,
                    ratio: lhs / rhs,
                },
                InequalityRow {
                    inequality: Inequality::Holder,
                    sample: i,
                    lhs: holder_lhs,
                    rhs: holder_rhs,
                    ratio: holder_lhs / holder_rhs,
                },
            ])
        })
        .collect::<Result<_>>()?;
    Ok(InequalityReport {
        dim,
        rows: rows.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grashof_arithmetic() {
        assert_eq!(grashof(100.0, 1.0, 0.1).unwrap(), 100.0 / (0.1 * 0.1));
        assert!((grashof(100.0, 1.0, 0.1).unwrap() - 10000.0).abs() < 1e-9);
        assert_eq!(grashof(0.0, 1.0, 0.1).unwrap(), 0.0);
        let g1 = grashof(3.0, 2.0, 0.2).unwrap();
        let g2 = grashof(3.0, 2.0, 0.4).unwrap();
        assert!((g1 / g2 - 4.0).abs() < 1e-12);
        assert!(grashof(1.0, 0.0, 1.0).is_err());
        assert!(grashof(1.0, 1.0, -1.0).is_err());
        assert!(grashof(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn constants_tie_together() {
        let c = Constants::new(4.0, 0.5, 2.0).unwrap();
        assert_eq!(c.rho, 0.5);
        assert_eq!(c.grashof, 2.0);
    }

    #[test]
    fn torus_eigenvalue_and_rescaling() {
        let e = poincare_constant(Domain::Torus { dim: 2, length: 2.0 * PI, m: 16 }, 1).unwrap();
        assert!((e.lambda1 - 1.0).abs() < 1e-8);
        assert!((e.rho - 1.0).abs() < 1e-8);
        let l = 3.0;
        let e = poincare_constant(Domain::Torus { dim: 2, length: l, m: 16 }, 1).unwrap();
        let exact = (2.0 * PI / l).powi(2);
        assert!((e.lambda1 - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn dirichlet_square_small_grid_matches_discrete_formula() {
        // discrete first eigenvalue of the 5-point operator: 8 sin^2(pi h / 2) / h^2
        let n = 15;
        let h = 1.0 / (n + 1) as f64;
        let discrete = 8.0 * (PI * h / 2.0).sin().powi(2) / (h * h);
        let e = poincare_constant(Domain::DirichletSquare { n }, 3).unwrap();
        assert!((e.lambda1 - discrete).abs() < 1e-7 * discrete);
    }

    #[test]
    fn trilinear_antisymmetry_and_linearity() {
        let t = random_triples(2, 6, 5).unwrap();
        for (u, v, w) in &t {
            let scale = u.l2_sq().sqrt() * v.h1_sq().sqrt() * w.l2_sq().sqrt();
            assert!(trilinear_b(u, u, u).unwrap().abs() < 1e-12 * scale.max(1.0));
            let a = trilinear_b(u, v, w).unwrap();
            let b = trilinear_b(u, w, v).unwrap();
            assert!((a + b).abs() < 1e-10 * scale.max(1.0));
            let combo = v.add(&w.scaled(2.5)).unwrap();
            let lin = trilinear_b(u, &combo, w).unwrap();
            let parts = a + 2.5 * trilinear_b(u, w, w).unwrap();
            assert!((lin - parts).abs() < 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn norms_reject_mean() {
        let g = SpectralGrid::torus(2, 8).unwrap();
        let f = SpectralField::from_fn(&g, |_| vec![0.0, 1.0]);
        assert!(norms(&f).is_err());
    }
}
