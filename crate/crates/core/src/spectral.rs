//! Divergence-free velocity fields on the periodic box `[0, L]^d` stored as
//! truncated Fourier coefficients.
//!
//! Coefficients are normalized so that `u(x) = sum_k u_k exp(i k.x)`; the
//! physical L2 norm is therefore `L^d * sum |u_k|^2`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};

pub struct SpectralGrid {
    dim: usize,
    m: usize,
    length: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("dim", &self.dim)
            .field("m", &self.m)
            .field("length", &self.length)
            .finish()
    }
}

impl SpectralGrid {
    pub fn new(dim: usize, m: usize, length: f64) -> Result<Arc<Self>> {
        if dim != 2 && dim != 3 {
            return Err(invalid(format!("spectral dimension must be 2 or 3, got {dim}")));
        }
        if m < 4 || m % 2 != 0 {
            return Err(invalid(format!("grid size must be even and >= 4, got {m}")));
        }
        if !(length > 0.0) {
            return Err(invalid("domain length must be positive"));
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(SpectralGrid {
            dim,
            m,
            length,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }))
    }

    /// `[0, 2 pi]^d` with `m` points per axis.
    pub fn torus(dim: usize, m: usize) -> Result<Arc<Self>> {
        Self::new(dim, m, 2.0 * PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    pub fn dx(&self) -> f64 {
        self.length / self.m as f64
    }

    /// Largest retained integer wavenumber per axis under the 2/3 rule.
    pub fn cutoff(&self) -> i64 {
        ((self.m - 1) / 3) as i64
    }

    /// Fundamental wavenumber `2 pi / L`.
    pub fn k0(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn same_as(&self, other: &SpectralGrid) -> bool {
        self.dim == other.dim && self.m == other.m && self.length == other.length
    }

    fn int_k(&self, i: usize) -> i64 {
        if i <= self.m / 2 {
            i as i64
        } else {
            i as i64 - self.m as i64
        }
    }

    /// Integer wavevector of flat index `idx` (unused axes are 0).
    pub fn int_wavevector(&self, idx: usize) -> [i64; 3] {
        let mut out = [0i64; 3];
        let mut rem = idx;
        for a in (0..self.dim).rev() {
            out[a] = self.int_k(rem % self.m);
            rem /= self.m;
        }
        out
    }

    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let k = self.int_wavevector(idx);
        let k0 = self.k0();
        [k[0] as f64 * k0, k[1] as f64 * k0, k[2] as f64 * k0]
    }

    pub fn k2(&self, idx: usize) -> f64 {
        let k = self.wavevector(idx);
        k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
    }

    /// Flat index of an integer wavevector.
    pub fn index_of(&self, k: [i64; 3]) -> usize {
        let m = self.m as i64;
        (0..self.dim).fold(0usize, |acc, a| acc * self.m + k[a].rem_euclid(m) as usize)
    }

    pub fn is_retained(&self, idx: usize) -> bool {
        let k = self.int_wavevector(idx);
        let c = self.cutoff();
        k.iter().all(|x| x.abs() <= c)
    }

    /// Physical coordinates of grid point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        let mut rem = idx;
        for a in (0..self.dim).rev() {
            out[a] = (rem % self.m) as f64 * self.dx();
            rem /= self.m;
        }
        out
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        let m = self.m;
        let n = data.len();
        // last axis is contiguous
        plan.process(data);
        if self.dim == 1 {
            return;
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.dim - 1 {
            let stride = m.pow((self.dim - 1 - axis) as u32);
            let block = stride * m;
            // gather lines along `axis` contiguously
            let mut line = 0;
            for base in (0..n).step_by(block) {
                for off in 0..stride {
                    for j in 0..m {
                        buf[line * m + j] = data[base + off + j * stride];
                    }
                    line += 1;
                }
            }
            plan.process(&mut buf);
            let mut line = 0;
            for base in (0..n).step_by(block) {
                for off in 0..stride {
                    for j in 0..m {
                        data[base + off + j * stride] = buf[line * m + j];
                    }
                    line += 1;
                }
            }
        }
    }

    /// Normalized forward transform of real grid values.
    pub fn to_spectral(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }

    /// Grid values of a coefficient array (real part).
    pub fn to_physical(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut data = coeffs.to_vec();
        self.transform(&mut data, true);
        data.iter().map(|c| c.re).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Arc<SpectralGrid>,
    comps: Vec<Vec<Complex64>>,
}

impl SpectralField {
    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        let n = grid.len();
        SpectralField {
            grid: grid.clone(),
            comps: vec![vec![Complex64::new(0.0, 0.0); n]; grid.dim()],
        }
    }

    /// Samples `f` on the grid and transforms. No projection is applied.
    pub fn from_fn<F>(grid: &Arc<SpectralGrid>, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let d = grid.dim();
        let mut vals = vec![vec![0.0; grid.len()]; d];
        for idx in 0..grid.len() {
            let p = grid.point(idx);
            let v = f(&p[..d]);
            for a in 0..d {
                vals[a][idx] = v[a];
            }
        }
        Self::from_physical(grid, &vals)
    }

    pub fn from_physical(grid: &Arc<SpectralGrid>, values: &[Vec<f64>]) -> Self {
        SpectralField {
            grid: grid.clone(),
            comps: values.iter().map(|v| grid.to_spectral(v)).collect(),
        }
    }

    pub fn from_coefficients(grid: &Arc<SpectralGrid>, comps: Vec<Vec<Complex64>>) -> Result<Self> {
        if comps.len() != grid.dim() || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch("coefficient arrays do not match the grid".into()));
        }
        Ok(SpectralField {
            grid: grid.clone(),
            comps,
        })
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn coefficients(&self) -> &[Vec<Complex64>] {
        &self.comps
    }

    pub fn coefficients_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.comps
    }

    pub fn check_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }

    pub fn to_physical(&self) -> Vec<Vec<f64>> {
        self.comps.iter().map(|c| self.grid.to_physical(c)).collect()
    }

    /// Leray projection: removes the component of each mode along `k`.
    pub fn project(&mut self) {
        let d = self.dim();
        for idx in 0..self.grid.len() {
            let k = self.grid.wavevector(idx);
            let k2 = self.grid.k2(idx);
            if k2 == 0.0 {
                for a in 0..d {
                    self.comps[a][idx] = Complex64::new(0.0, 0.0);
                }
                continue;
            }
            let dot: Complex64 = (0..d).map(|a| self.comps[a][idx] * k[a]).sum();
            for a in 0..d {
                self.comps[a][idx] -= dot * (k[a] / k2);
            }
        }
    }

    /// Zeroes every mode outside the 2/3-rule box.
    pub fn dealias(&mut self) {
        for idx in 0..self.grid.len() {
            if !self.grid.is_retained(idx) {
                for c in self.comps.iter_mut() {
                    c[idx] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    pub fn max_divergence(&self) -> f64 {
        (0..self.grid.len())
            .map(|idx| {
                let k = self.grid.wavevector(idx);
                (0..self.dim()).map(|a| self.comps[a][idx] * k[a]).sum::<Complex64>().norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn mean_magnitude(&self) -> f64 {
        self.comps.iter().map(|c| c[0].norm()).fold(0.0, f64::max)
    }

    /// Largest Hermitian-symmetry defect `|u_k - conj(u_{-k})|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for idx in 0..self.grid.len() {
            let k = self.grid.int_wavevector(idx);
            let mirror = self.grid.index_of([-k[0], -k[1], -k[2]]);
            for c in &self.comps {
                worst = worst.max((c[idx] - c[mirror].conj()).norm());
            }
        }
        worst
    }

    fn weighted_sum(&self, weight: impl Fn(usize) -> f64) -> f64 {
        let mut s = 0.0;
        for idx in 0..self.grid.len() {
            let w = weight(idx);
            if w == 0.0 {
                continue;
            }
            for c in &self.comps {
                s += w * c[idx].norm_sqr();
            }
        }
        s * self.grid.volume()
    }

    /// `|u|^2`, the squared L2 norm.
    pub fn l2_sq(&self) -> f64 {
        self.weighted_sum(|_| 1.0)
    }

    /// `||u||^2 = |grad u|^2_{L2}`.
    pub fn h1_sq(&self) -> f64 {
        self.weighted_sum(|idx| self.grid.k2(idx))
    }

    /// `||u||_{V'}^2 = sum |u_k|^2 / |k|^2`; defined on mean-zero fields only.
    pub fn vprime_sq(&self) -> Result<f64> {
        if self.mean_magnitude() > 1e-13 * self.l2_sq().sqrt().max(1.0) {
            return Err(invalid("the V' norm is defined for mean-zero fields only"));
        }
        Ok(self.weighted_sum(|idx| {
            let k2 = self.grid.k2(idx);
            if k2 == 0.0 {
                0.0
            } else {
                1.0 / k2
            }
        }))
    }

    /// `(u, v)` in L2.
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        self.check_grid(other)?;
        let mut s = 0.0;
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for (x, y) in a.iter().zip(b) {
                s += (x * y.conj()).re;
            }
        }
        Ok(s * self.grid.volume())
    }

    /// `grad[i][j]` holds grid values of `d u_i / d x_j`.
    pub fn gradient_physical(&self) -> Vec<Vec<Vec<f64>>> {
        let d = self.dim();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let deriv: Vec<Complex64> = self.comps[i]
                            .iter()
                            .enumerate()
                            .map(|(idx, c)| c * Complex64::new(0.0, self.derivative_k(idx, j)))
                            .collect();
                        self.grid.to_physical(&deriv)
                    })
                    .collect()
            })
            .collect()
    }

    // The Nyquist mode has no real derivative; drop it.
    fn derivative_k(&self, idx: usize, axis: usize) -> f64 {
        let k = self.grid.int_wavevector(idx);
        if k[axis].unsigned_abs() as usize * 2 == self.grid.m() {
            0.0
        } else {
            k[axis] as f64 * self.grid.k0()
        }
    }

    /// Max over the collocation grid of the pointwise Frobenius norm of `grad u`.
    pub fn grad_linf(&self) -> f64 {
        let g = self.gradient_physical();
        let d = self.dim();
        (0..self.grid.len())
            .map(|p| {
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        s += g[i][j][p] * g[i][j][p];
                    }
                }
                s.sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_speed(&self) -> f64 {
        let u = self.to_physical();
        (0..self.grid.len())
            .map(|p| u.iter().map(|c| c[p] * c[p]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    pub fn scale(&mut self, s: f64) {
        self.comps.iter_mut().flatten().for_each(|c| *c *= s);
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &SpectralField) -> Result<()> {
        self.check_grid(x)?;
        for (s, o) in self.comps.iter_mut().zip(&x.comps) {
            for (p, q) in s.iter_mut().zip(o) {
                *p += q * a;
            }
        }
        Ok(())
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    /// Nonzero modes as `(integer wavevector, per-component coefficient)`.
    pub fn active_modes(&self) -> Vec<([i64; 3], Vec<Complex64>)> {
        (0..self.grid.len())
            .filter_map(|idx| {
                let c: Vec<Complex64> = self.comps.iter().map(|c| c[idx]).collect();
                if c.iter().any(|z| z.norm_sqr() > 0.0) {
                    Some((self.grid.int_wavevector(idx), c))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Pointwise evaluator by direct trigonometric summation.
    pub fn evaluator(&self) -> PointEvaluator {
        PointEvaluator {
            dim: self.dim(),
            m: self.grid.m() as i64,
            k0: self.grid.k0(),
            modes: self.active_modes(),
        }
    }

    /// Embeds the coefficients into a finer (or equal) grid.
    pub fn prolong(&self, fine: &Arc<SpectralGrid>) -> Result<SpectralField> {
        if fine.dim() != self.dim() || fine.m() < self.grid.m() || fine.length() != self.grid.length() {
            return Err(Error::GridMismatch("prolongation needs a finer grid of the same box".into()));
        }
        let mut out = SpectralField::zeros(fine);
        for idx in 0..self.grid.len() {
            let k = self.grid.int_wavevector(idx);
            if k.iter().any(|x| x.unsigned_abs() as usize * 2 == self.grid.m()) {
                continue;
            }
            let j = fine.index_of(k);
            for a in 0..self.dim() {
                out.comps[a][j] = self.comps[a][idx];
            }
        }
        Ok(out)
    }

    /// Restricts to a coarser grid by dropping modes it cannot hold.
    pub fn restrict(&self, coarse: &Arc<SpectralGrid>) -> Result<SpectralField> {
        if coarse.dim() != self.dim() || coarse.length() != self.grid.length() {
            return Err(Error::GridMismatch("restriction needs the same box".into()));
        }
        let mut out = SpectralField::zeros(coarse);
        let half = (coarse.m() / 2) as i64;
        for idx in 0..self.grid.len() {
            let k = self.grid.int_wavevector(idx);
            if k.iter().all(|x| x.abs() < half) {
                let j = coarse.index_of(k);
                for a in 0..self.dim() {
                    out.comps[a][j] = self.comps[a][idx];
                }
            }
        }
        Ok(out)
    }
}

/// Evaluates a band-limited field at arbitrary points.
#[derive(Debug, Clone)]
pub struct PointEvaluator {
    dim: usize,
    m: i64,
    k0: f64,
    modes: Vec<([i64; 3], Vec<Complex64>)>,
}

impl PointEvaluator {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let half = self.m / 2;
        // per-axis exp(i k x) tables for k in [-m/2, m/2]
        let tables: Vec<Vec<Complex64>> = (0..self.dim)
            .map(|a| {
                (-half..=half)
                    .map(|k| Complex64::from_polar(1.0, k as f64 * self.k0 * x[a]))
                    .collect()
            })
            .collect();
        let mut out = vec![0.0; self.dim];
        for (k, c) in &self.modes {
            let mut e = Complex64::new(1.0, 0.0);
            for a in 0..self.dim {
                e *= tables[a][(k[a] + half) as usize];
            }
            for (o, ci) in out.iter_mut().zip(c) {
                *o += (ci * e).re;
            }
        }
        out
    }
}

/// Random divergence-free real field with modes `0 < |k| <= kmax` (integer
/// wavenumbers), flat spectrum, scaled to the requested L2 norm.
pub fn random_band_limited(
    grid: &Arc<SpectralGrid>,
    kmax: f64,
    l2_norm: f64,
    rng: &mut impl Rng,
) -> SpectralField {
    let d = grid.dim();
    let n = grid.len();
    let mut raw = vec![vec![Complex64::new(0.0, 0.0); n]; d];
    for idx in 0..n {
        let k = grid.int_wavevector(idx);
        let kk = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
        let nyquist = k.iter().any(|x| x.unsigned_abs() as usize * 2 == grid.m());
        if kk == 0.0 || kk > kmax || nyquist {
            continue;
        }
        for c in raw.iter_mut() {
            c[idx] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    let mut comps = vec![vec![Complex64::new(0.0, 0.0); n]; d];
    for idx in 0..n {
        let k = grid.int_wavevector(idx);
        let mirror = grid.index_of([-k[0], -k[1], -k[2]]);
        for a in 0..d {
            comps[a][idx] = (raw[a][idx] + raw[a][mirror].conj()) * 0.5;
        }
    }
    let mut f = SpectralField {
        grid: grid.clone(),
        comps,
    };
    f.project();
    let norm = f.l2_sq().sqrt();
    if norm > 0.0 {
        f.scale(l2_norm / norm);
    }
    f
}

/// Seeded convenience wrapper around [`random_band_limited`].
pub fn seeded_band_limited(grid: &Arc<SpectralGrid>, kmax: f64, l2_norm: f64, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_band_limited(grid, kmax, l2_norm, &mut rng)
}

/// `b(u, v, w) = int (u . grad) v . w` by collocation. Exact when the triple
/// product is alias-free on the grid, which holds for 2/3-rule fields.
pub fn trilinear_b(u: &SpectralField, v: &SpectralField, w: &SpectralField) -> Result<f64> {
    u.check_grid(v)?;
    u.check_grid(w)?;
    let grid = u.grid();
    let d = grid.dim();
    let up = u.to_physical();
    let wp = w.to_physical();
    let gv = v.gradient_physical();
    let mut s = 0.0;
    for p in 0..grid.len() {
        for i in 0..d {
            let mut adv = 0.0;
            for j in 0..d {
                adv += up[j][p] * gv[i][j][p];
            }
            s += adv * wp[i][p];
        }
    }
    Ok(s * grid.volume() / grid.len() as f64)
}

/// `P[(u . grad) v]`, dealiased, in advective form.
pub fn advective_term(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    u.check_grid(v)?;
    let grid = u.grid();
    let d = grid.dim();
    let up = u.to_physical();
    let gv = v.gradient_physical();
    let vals: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..grid.len())
                .map(|p| (0..d).map(|j| up[j][p] * gv[i][j][p]).sum())
                .collect()
        })
        .collect();
    let mut out = SpectralField::from_physical(grid, &vals);
    out.dealias();
    out.project();
    Ok(out)
}

/// `B(u, u) = P[div(u (x) u)]` for divergence-free `u`, dealiased.
pub fn nonlinear_term(u: &SpectralField) -> SpectralField {
    let grid = u.grid();
    let d = grid.dim();
    let up = u.to_physical();
    let mut out = SpectralField::zeros(grid);
    for a in 0..d {
        for b in a..d {
            let prod: Vec<f64> = up[a].iter().zip(&up[b]).map(|(x, y)| x * y).collect();
            let ph = grid.to_spectral(&prod);
            for idx in 0..grid.len() {
                let ka = u.derivative_k(idx, a);
                let kb = u.derivative_k(idx, b);
                // d_b (u_a u_b) contributes to component a, d_a (u_a u_b) to b
                out.comps[a][idx] += ph[idx] * Complex64::new(0.0, kb);
                if a != b {
                    out.comps[b][idx] += ph[idx] * Complex64::new(0.0, ka);
                }
            }
        }
    }
    out.dealias();
    out.project();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2(m: usize) -> Arc<SpectralGrid> {
        SpectralGrid::torus(2, m).unwrap()
    }

    #[test]
    fn transform_roundtrip_and_parseval() {
        for (d, m) in [(2, 16), (3, 8)] {
            let g = SpectralGrid::torus(d, m).unwrap();
            let f = seeded_band_limited(&g, 2.5, 1.3, 7);
            let phys = f.to_physical();
            let back = SpectralField::from_physical(&g, &phys);
            for (a, b) in f.coefficients().iter().zip(back.coefficients()) {
                for (x, y) in a.iter().zip(b) {
                    assert!((x - y).norm() < 1e-14);
                }
            }
            let quad: f64 = phys.iter().flatten().map(|x| x * x).sum::<f64>() * g.volume() / g.len() as f64;
            assert!((quad - f.l2_sq()).abs() < 1e-10 * quad);
            assert!((f.l2_sq().sqrt() - 1.3).abs() < 1e-12);
        }
    }

    #[test]
    fn random_fields_are_admissible() {
        for (d, m) in [(2, 32), (3, 16)] {
            let g = SpectralGrid::torus(d, m).unwrap();
            let f = seeded_band_limited(&g, 4.0, 1.0, 3);
            assert!(f.max_divergence() < 1e-12);
            assert!(f.mean_magnitude() == 0.0);
            assert!(f.hermitian_defect() < 1e-15);
            let again = seeded_band_limited(&g, 4.0, 1.0, 3);
            assert_eq!(f.coefficients(), again.coefficients());
        }
    }

    #[test]
    fn single_mode_norms() {
        let g = grid2(16);
        let a = 0.7;
        // u = c (0, cos x), |u|^2 = c^2 * 2 pi^2
        let c = a / (2.0 * PI * PI).sqrt();
        let f = SpectralField::from_fn(&g, |x| vec![0.0, c * x[0].cos()]);
        assert!((f.l2_sq().sqrt() - a).abs() < 1e-12);
        assert!((f.h1_sq().sqrt() - a).abs() < 1e-12);
        assert!((f.vprime_sq().unwrap().sqrt() - a).abs() < 1e-12);

        // k = (3, 4): direction (-4, 3)/5
        let f = SpectralField::from_fn(&g, |x| {
            let s = c * (3.0 * x[0] + 4.0 * x[1]).cos();
            vec![-0.8 * s, 0.6 * s]
        });
        assert!(f.max_divergence() < 1e-12);
        assert!((f.h1_sq().sqrt() - 5.0 * a).abs() < 1e-11);
        assert!((f.vprime_sq().unwrap().sqrt() - a / 5.0).abs() < 1e-12);
    }

    #[test]
    fn vprime_rejects_nonzero_mean() {
        let g = grid2(8);
        let f = SpectralField::from_fn(&g, |_| vec![1.0, 0.0]);
        assert!(f.vprime_sq().is_err());
    }

    #[test]
    fn evaluator_matches_grid_values() {
        let g = grid2(16);
        let f = seeded_band_limited(&g, 5.0, 1.0, 11);
        let phys = f.to_physical();
        let ev = f.evaluator();
        for idx in [0, 5, 77, 200] {
            let p = g.point(idx);
            let v = ev.eval(&p[..2]);
            assert!((v[0] - phys[0][idx]).abs() < 1e-13);
            assert!((v[1] - phys[1][idx]).abs() < 1e-13);
        }
    }

    #[test]
    fn nonlinear_forms_agree() {
        let g = grid2(32);
        let u = seeded_band_limited(&g, 6.0, 1.0, 1);
        let div_form = nonlinear_term(&u);
        let adv_form = advective_term(&u, &u).unwrap();
        let diff = div_form.sub(&adv_form).unwrap();
        assert!(diff.l2_sq().sqrt() < 1e-12);
    }

    #[test]
    fn prolong_restrict_roundtrip() {
        let g = grid2(16);
        let fine = grid2(32);
        let f = seeded_band_limited(&g, 5.0, 1.0, 2);
        let up = f.prolong(&fine).unwrap();
        assert!((up.l2_sq() - f.l2_sq()).abs() < 1e-14);
        let down = up.restrict(&g).unwrap();
        assert_eq!(down.coefficients(), f.coefficients());
    }
}
