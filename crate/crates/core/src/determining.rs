//! Sufficient resolution thresholds for the interpolant to be determining,
//! twin-trajectory experiments, and checks of the differential inequality
//! for `w = u - v` along computed flows.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::gronwall::{TimeSeries, DEFAULT_TAIL_FRACTION};
use crate::mesh::{build_box_mesh, SimplicialMesh};
use crate::nse2d::{advance, Forcing, InitialCondition, SimulationConfig, Solver};
use crate::quadrature::SimplexRule;
use crate::spectral::{seeded_band_limited, SpectralField, SpectralGrid};
use crate::szinterp::{
    box_family, l2_error_vector, p1_l2_norm_sq, ScottZhangOperator, CELL_RULE_DEGREE,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    /// `N^{2 gamma}` bound.
    pub n_pow: f64,
    pub n: f64,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {x}")))
    }
}

/// `N^{2 gamma} > 8 C1^2 (F / nu^2)^2`.
pub fn threshold_2d(nu: f64, f: f64, gamma: f64, c1: f64) -> Result<Threshold> {
    positive("nu", nu)?;
    positive("F", f)?;
    positive("gamma", gamma)?;
    positive("C1", c1)?;
    let n_pow = 8.0 * c1 * c1 * (f / (nu * nu)).powi(2);
    Ok(Threshold {
        n_pow,
        n: n_pow.powf(1.0 / (2.0 * gamma)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Threshold3d {
    pub threshold: Threshold,
    /// Min over the window grid of the tail-max window average of `||grad u||_inf`.
    pub epsilon_quantity: f64,
    /// `nu * epsilon_quantity`.
    pub epsilon_inf: f64,
    /// Window length attaining the minimum.
    pub best_window: f64,
}

/// `N^{2 gamma} > (4 C1^2 / nu) * inf_T limsup (1/T) int ||grad u||_inf`.
pub fn threshold_3d(
    nu: f64,
    grad_linf: &TimeSeries,
    gamma: f64,
    c1: f64,
    t_grid: &[f64],
) -> Result<Threshold3d> {
    positive("nu", nu)?;
    positive("gamma", gamma)?;
    positive("C1", c1)?;
    if t_grid.is_empty() {
        return Err(invalid("the window grid is empty"));
    }
    let span = grad_linf.t_end() - grad_linf.t0();
    let tail_start = grad_linf.t0() + (1.0 - DEFAULT_TAIL_FRACTION) * span;
    let mut best = (f64::INFINITY, f64::NAN);
    for &t in t_grid {
        positive("window length", t)?;
        let avgs = grad_linf.window_averages(t, tail_start);
        if avgs.is_empty() {
            return Err(Error::SeriesTooShort(format!(
                "no tail window of length {t} fits the series"
            )));
        }
        let limsup = avgs.iter().map(|w| w.1).fold(f64::NEG_INFINITY, f64::max);
        if limsup < best.0 {
            best = (limsup, t);
        }
    }
    let eps = best.0.max(0.0);
    let n_pow = 4.0 * c1 * c1 / nu * eps;
    Ok(Threshold3d {
        threshold: Threshold {
            n_pow,
            n: n_pow.powf(1.0 / (2.0 * gamma)),
        },
        epsilon_quantity: eps,
        epsilon_inf: nu * eps,
        best_window: best.1,
    })
}

/// Largest mesh size guaranteeing `N >= n` on a family with
/// `N h^d / |Omega| >= c_lower`.
pub fn h_threshold(n: f64, c_lower: f64, measure: f64, dim: usize) -> Result<f64> {
    positive("c_lower", c_lower)?;
    positive("domain measure", measure)?;
    if n <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((c_lower * measure / n).powf(1.0 / dim as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdInputs {
    pub nu: f64,
    /// `limsup ||f||_{V'}`.
    pub f: f64,
    pub lambda1: f64,
    pub c1: f64,
    /// `||grad u||_inf` history for the three-dimensional criterion.
    pub grad_linf: Option<TimeSeries>,
    pub t_grid: Vec<f64>,
    /// Lower constant of the mesh bracket, per dimension.
    pub c_lower_2d: f64,
    pub c_lower_3d: f64,
    pub measure_2d: f64,
    pub measure_3d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub gamma_2d: f64,
    pub gamma_3d: f64,
    pub c1: f64,
    pub nu: f64,
    pub f: f64,
    pub epsilon_quantity: Option<f64>,
    pub n_threshold_2d: f64,
    pub h_threshold_2d: f64,
    pub n_threshold_3d: Option<f64>,
    pub h_threshold_3d: Option<f64>,
    pub grashof: f64,
}

pub const GAMMA_2D: f64 = 0.5;
pub const GAMMA_3D: f64 = 1.0 / 3.0;

/// Reports with the supplied `C1` and with `C1 = 1`.
pub fn threshold_reports(inp: &ThresholdInputs) -> Result<Vec<ThresholdReport>> {
    let grashof = crate::forms::grashof(inp.f, inp.lambda1, inp.nu)?;
    let mut out = Vec::new();
    for c1 in [inp.c1, 1.0] {
        let t2 = threshold_2d(inp.nu, inp.f, GAMMA_2D, c1)?;
        let (eps, n3, h3) = match &inp.grad_linf {
            Some(s) => {
                let t3 = threshold_3d(inp.nu, s, GAMMA_3D, c1, &inp.t_grid)?;
                let h = h_threshold(t3.threshold.n, inp.c_lower_3d, inp.measure_3d, 3)?;
                (Some(t3.epsilon_quantity), Some(t3.threshold.n), Some(h))
            }
            None => (None, None, None),
        };
        out.push(ThresholdReport {
            gamma_2d: GAMMA_2D,
            gamma_3d: GAMMA_3D,
            c1,
            nu: inp.nu,
            f: inp.f,
            epsilon_quantity: eps,
            n_threshold_2d: t2.n,
            h_threshold_2d: h_threshold(t2.n, inp.c_lower_2d, inp.measure_2d, 2)?,
            n_threshold_3d: n3,
            h_threshold_3d: h3,
            grashof,
        });
    }
    Ok(out)
}

type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A test field for the approximation constant.
#[derive(Clone)]
pub struct CorpusField {
    pub id: String,
    pub ncomp: usize,
    pub eval: VectorFn,
    /// `|u|_{H1}` over the mesh domain.
    pub h1_semi: f64,
}

impl std::fmt::Debug for CorpusField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CorpusField")
            .field("id", &self.id)
            .field("h1_semi", &self.h1_semi)
            .finish()
    }
}

impl CorpusField {
    pub fn from_spectral(id: impl Into<String>, u: &SpectralField) -> Self {
        let ev = u.evaluator();
        CorpusField {
            id: id.into(),
            ncomp: u.dim(),
            eval: Arc::new(move |x| ev.eval(x)),
            h1_semi: u.h1_sq().sqrt(),
        }
    }
}

/// Ten seeded band-limited fields (`|k| <= 8`) plus single Fourier modes on
/// the `[0, 2 pi]^2` torus.
pub fn default_corpus(seed: u64) -> Result<Vec<CorpusField>> {
    let grid = SpectralGrid::torus(2, 32)?;
    let mut out = Vec::new();
    for i in 0..10u64 {
        let u = seeded_band_limited(&grid, 8.0, 1.0, seed.wrapping_add(i));
        out.push(CorpusField::from_spectral(format!("band8_seed{}", seed.wrapping_add(i)), &u));
    }
    for k in [[1, 0], [0, 1], [1, 1], [2, 1], [3, 0], [2, 3], [4, 4], [6, 0], [8, 0]] {
        let f = Forcing::SingleMode { amplitude: 1.0, k };
        let u = f.steady_state(&grid, 1.0)?.expect("single modes have closed forms");
        out.push(CorpusField::from_spectral(format!("mode_{}_{}", k[0], k[1]), &u));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct C1Estimate {
    pub c1: f64,
    pub corpus_id: String,
    pub level: usize,
    /// Max ratio per level.
    pub per_level: Vec<f64>,
}

/// `C1 = max ||u - I_h u||_{L2} N^gamma / |u|_{H1}` over levels and corpus.
pub fn estimate_c1(family: &[ScottZhangOperator], corpus: &[CorpusField], gamma: f64) -> Result<C1Estimate> {
    if corpus.is_empty() {
        return Err(invalid("the field corpus is empty"));
    }
    if family.is_empty() {
        return Err(invalid("the mesh family is empty"));
    }
    let mut best = (f64::NEG_INFINITY, String::new(), 0usize);
    let mut per_level = Vec::with_capacity(family.len());
    for (level, op) in family.iter().enumerate() {
        let mesh = op.mesh();
        let rule = SimplexRule::with_degree(mesh.dim(), CELL_RULE_DEGREE);
        let n_gamma = (op.n() as f64).powf(gamma);
        let ratios: Vec<(f64, &str)> = corpus
            .iter()
            .map(|cf| {
                let f = cf.eval.as_ref();
                let coeffs = op.interpolate_with(cf.ncomp, f);
                let err = l2_error_vector(mesh, &coeffs, f, &rule);
                // fields the interpolant reproduces carry no information
                let ratio = if cf.h1_semi <= 0.0 || err <= 1e-12 * cf.h1_semi {
                    0.0
                } else {
                    err * n_gamma / cf.h1_semi
                };
                (ratio, cf.id.as_str())
            })
            .collect();
        let (lvl_max, id) = ratios
            .iter()
            .fold((0.0, ""), |acc, &(r, id)| if r > acc.0 { (r, id) } else { acc });
        per_level.push(lvl_max);
        if lvl_max > best.0 {
            best = (lvl_max, id.to_string(), level);
        }
    }
    Ok(C1Estimate {
        c1: best.0,
        corpus_id: best.1,
        level: best.2,
        per_level,
    })
}

/// `g = f + exp(-rate t) m` for a single Fourier mode `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayingMode {
    pub amplitude: f64,
    pub k: [i64; 2],
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinConfig {
    /// The reference run `u`: viscosity, grid, step, horizon, forcing, `u0`.
    pub base: SimulationConfig,
    pub v_init: InitialCondition,
    pub difference: Option<DecayingMode>,
    /// Cells per side of the triangulation of `[0, L]^2`.
    pub mesh_n: usize,
    pub gamma: f64,
    /// Fixed approximation constant; estimated from the default corpus when absent.
    pub c1: Option<f64>,
    pub corpus_seed: u64,
}

impl Default for TwinConfig {
    fn default() -> Self {
        TwinConfig {
            base: SimulationConfig {
                nu: 1.0,
                m: 64,
                dt: 5e-3,
                t_end: 20.0,
                record_stride: 2,
                forcing: Forcing::Kolmogorov { amplitude: 0.2, k: 1 },
                init: InitialCondition::Steady,
                ..SimulationConfig::default()
            },
            v_init: InitialCondition::PerturbedSteady {
                kmax: 16.0,
                l2: 1.0,
                seed: 7,
            },
            difference: None,
            mesh_n: 8,
            gamma: GAMMA_2D,
            c1: None,
            corpus_seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TwinDiagnostics {
    pub times: Vec<f64>,
    pub w_l2sq: Vec<f64>,
    pub w_h1sq: Vec<f64>,
    pub rnw_l2sq: Vec<f64>,
    pub u_h1sq: Vec<f64>,
    pub grad_linf: Vec<f64>,
    /// `||f - g||_{V'}^2`.
    pub fg_vprime_sq: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub residual: Vec<f64>,
    /// Finite-difference `d/dt |w|^2`.
    pub dw_dt: Vec<f64>,
    pub n: usize,
    pub c1: f64,
    pub gamma: f64,
    pub nu: f64,
    pub lambda1: f64,
}

impl TwinDiagnostics {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn record_dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    /// `alpha` recomputed from its ingredients.
    pub fn alpha_at(&self, i: usize) -> f64 {
        alpha_value(self.nu, self.n, self.gamma, self.c1, self.u_h1sq[i])
    }

    pub fn beta_at(&self, i: usize) -> f64 {
        beta_value(self.nu, self.n, self.gamma, self.c1, self.fg_vprime_sq[i], self.rnw_l2sq[i])
    }

    pub fn alpha_series(&self) -> Result<TimeSeries> {
        TimeSeries::from_samples(&self.times, self.alpha.clone())
    }

    pub fn beta_series(&self) -> Result<TimeSeries> {
        TimeSeries::from_samples(&self.times, self.beta.clone())
    }

    pub fn y_series(&self) -> Result<TimeSeries> {
        TimeSeries::from_samples(&self.times, self.w_l2sq.clone())
    }

    /// Window `rho^2 / nu` used by the Gronwall check.
    pub fn gronwall_window(&self) -> f64 {
        1.0 / (self.lambda1 * self.nu)
    }

    /// Recomputes `alpha`, `beta` and the residual after changing `C1`.
    pub fn with_c1(&self, c1: f64) -> TwinDiagnostics {
        let mut d = self.clone();
        d.c1 = c1;
        d.assemble();
        d
    }

    fn assemble(&mut self) {
        let n = self.len();
        self.alpha = (0..n).map(|i| self.alpha_at(i)).collect();
        self.beta = (0..n).map(|i| self.beta_at(i)).collect();
        self.dw_dt = finite_difference(&self.times, &self.w_l2sq);
        self.residual = (0..n)
            .map(|i| self.dw_dt[i] + self.alpha[i] * self.w_l2sq[i] - self.beta[i])
            .collect();
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t", "w_l2sq", "w_h1sq", "rnw_l2sq", "u_h1sq", "grad_linf", "alpha", "beta", "residual", "y",
        ])?;
        for i in 0..self.len() {
            w.write_record([
                format!("{:?}", self.times[i]),
                format!("{:e}", self.w_l2sq[i]),
                format!("{:e}", self.w_h1sq[i]),
                format!("{:e}", self.rnw_l2sq[i]),
                format!("{:e}", self.u_h1sq[i]),
                format!("{:e}", self.grad_linf[i]),
                format!("{:e}", self.alpha[i]),
                format!("{:e}", self.beta[i]),
                format!("{:e}", self.residual[i]),
                format!("{:e}", self.w_l2sq[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn alpha_value(nu: f64, n: usize, gamma: f64, c1: f64, u_h1sq: f64) -> f64 {
    nu * (n as f64).powf(2.0 * gamma) / (2.0 * c1 * c1) - 2.0 / nu * u_h1sq
}

pub fn beta_value(nu: f64, n: usize, gamma: f64, c1: f64, fg_vprime_sq: f64, rnw_l2sq: f64) -> f64 {
    2.0 / nu * fg_vprime_sq + nu * (n as f64).powf(2.0 * gamma) / (c1 * c1) * rnw_l2sq
}

/// Second-order differences: central inside, one-sided at the ends.
pub fn finite_difference(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let h = (t[n - 1] - t[0]) / (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h)
            } else {
                (y[i + 1] - y[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Triangulation of the periodic box used for the functionals. The box is
/// meshed without periodic identification.
pub fn twin_mesh(length: f64, n: usize) -> Result<SimplicialMesh> {
    build_box_mesh(2, &[length, length], n)
}

/// `||I_h w||_{L2}^2` for a spectral field.
pub fn projected_l2_sq(op: &ScottZhangOperator, w: &SpectralField) -> f64 {
    let ev = w.evaluator();
    let coeffs = op.interpolate_with(w.dim(), &|x| ev.eval(x));
    coeffs.iter().map(|c| p1_l2_norm_sq(op.mesh(), c)).sum()
}

/// Runs `u` and `v` in lockstep and records the difference diagnostics.
pub fn twin_experiment(cfg: &TwinConfig) -> Result<TwinDiagnostics> {
    let base = &cfg.base;
    base.validate()?;
    if cfg.mesh_n == 0 {
        return Err(invalid("mesh_n must be at least 1"));
    }
    let grid = base.grid()?;
    let f = base.forcing.field(&grid, base.nu)?;
    let u0 = base.init.field(&grid, &base.forcing, base.nu)?;
    let v0 = cfg.v_init.field(&grid, &base.forcing, base.nu)?;
    let mesh = Arc::new(twin_mesh(base.length, cfg.mesh_n)?);
    let op = ScottZhangOperator::new(mesh)?;
    let c1 = match cfg.c1 {
        Some(c) => {
            positive("C1", c)?;
            c
        }
        None => {
            let family = box_family(2, &[base.length, base.length], cfg.mesh_n, 3)?;
            estimate_c1(&family, &default_corpus(cfg.corpus_seed)?, cfg.gamma)?.c1
        }
    };
    let mut su = Solver::new(&grid, base.nu, f.clone())?;
    let mut sv = Solver::new(&grid, base.nu, f)?;
    let mut diff_vprime_sq = 0.0;
    let mut diff_rate = 0.0;
    if let Some(d) = &cfg.difference {
        let h = Forcing::SingleMode { amplitude: d.amplitude, k: d.k }
            .steady_state(&grid, base.nu)?
            .expect("single modes have closed forms");
        diff_vprime_sq = h.vprime_sq()?;
        diff_rate = d.rate;
        sv = sv.with_transient(h, d.rate)?;
    }
    let lambda1 = (2.0 * PI / base.length).powi(2);
    let mut diag = TwinDiagnostics {
        times: Vec::new(),
        w_l2sq: Vec::new(),
        w_h1sq: Vec::new(),
        rnw_l2sq: Vec::new(),
        u_h1sq: Vec::new(),
        grad_linf: Vec::new(),
        fg_vprime_sq: Vec::new(),
        alpha: Vec::new(),
        beta: Vec::new(),
        residual: Vec::new(),
        dw_dt: Vec::new(),
        n: op.n(),
        c1,
        gamma: cfg.gamma,
        nu: base.nu,
        lambda1,
    };
    let mut states = Vec::new();
    let (mut u, mut v) = (u0, v0);
    states.push((0.0, u.clone(), v.clone()));
    for i in 0..base.n_steps() {
        let t = i as f64 * base.dt;
        u = advance(&mut su, &u, t, base.dt, base.adaptive)?;
        v = advance(&mut sv, &v, t, base.dt, base.adaptive)?;
        if (i + 1) % base.record_stride == 0 {
            states.push(((i + 1) as f64 * base.dt, u.clone(), v.clone()));
        }
    }
    let rows: Vec<[f64; 6]> = states
        .par_iter()
        .map(|(t, u, v)| -> Result<[f64; 6]> {
            let w = u.sub(v)?;
            Ok([
                *t,
                w.l2_sq(),
                w.h1_sq(),
                projected_l2_sq(&op, &w),
                u.h1_sq(),
                u.grad_linf(),
            ])
        })
        .collect::<Result<_>>()?;
    for r in rows {
        diag.times.push(r[0]);
        diag.w_l2sq.push(r[1]);
        diag.w_h1sq.push(r[2]);
        diag.rnw_l2sq.push(r[3]);
        diag.u_h1sq.push(r[4]);
        diag.grad_linf.push(r[5]);
        diag.fg_vprime_sq.push(diff_vprime_sq * (-2.0 * diff_rate * r[0]).exp());
    }
    diag.assemble();
    Ok(diag)
}

pub const MAX_RECORD_DT: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceModel {
    /// `tol = c * dt_record * scale`.
    pub c: f64,
}

impl Default for ToleranceModel {
    fn default() -> Self {
        ToleranceModel { c: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck {
    /// Max of `|w|^2 / (2 N^{-2 gamma} C1^2 ||w||^2 + 2 ||R_N w||^2)`.
    pub split_max_ratio: f64,
    pub split_violations: usize,
    pub split_passed: bool,
    pub max_residual: f64,
    pub residual_tolerance: f64,
    pub residual_violations: usize,
    pub residual_passed: bool,
}

impl InequalityCheck {
    pub fn passed(&self) -> bool {
        self.split_passed && self.residual_passed
    }
}

/// (a) the split inequality at every record, (b) `r(t) <= c dt_rec scale`
/// where `scale` bounds the magnitude of the terms in `r`.
pub fn verify_differential_inequality(diag: &TwinDiagnostics, tol: ToleranceModel) -> Result<InequalityCheck> {
    let dt = diag.record_dt();
    if dt > MAX_RECORD_DT * (1.0 + 1e-12) {
        return Err(Error::StrideTooCoarse {
            stride: dt,
            max: MAX_RECORD_DT,
        });
    }
    let np = (diag.n as f64).powf(-2.0 * diag.gamma);
    let mut split_max_ratio: f64 = 0.0;
    let mut split_violations = 0;
    for i in 0..diag.len() {
        let lhs = diag.w_l2sq[i];
        let rhs = 2.0 * np * diag.c1 * diag.c1 * diag.w_h1sq[i] + 2.0 * diag.rnw_l2sq[i];
        if lhs > 0.0 {
            split_max_ratio = split_max_ratio.max(lhs / rhs);
        }
        if lhs > rhs * (1.0 + 1e-9) {
            split_violations += 1;
        }
    }
    let scale = (0..diag.len())
        .map(|i| diag.dw_dt[i].abs() + (diag.alpha[i] * diag.w_l2sq[i]).abs() + diag.beta[i].abs())
        .fold(0.0, f64::max);
    let residual_tolerance = tol.c * dt * scale;
    let max_residual = diag.residual.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let residual_violations = diag.residual.iter().filter(|&&r| r > residual_tolerance).count();
    Ok(InequalityCheck {
        split_max_ratio,
        split_violations,
        split_passed: split_violations == 0,
        max_residual,
        residual_tolerance,
        residual_violations,
        residual_passed: residual_violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::szinterp::unit_box_family;

    #[test]
    fn threshold_examples() {
        let t = threshold_2d(1.0, 1.0, 0.5, 1.0).unwrap();
        assert_eq!(t.n, 8.0);
        let t2 = threshold_2d(1.0, 2.0, 0.5, 1.0).unwrap();
        assert_eq!(t2.n_pow, 4.0 * t.n_pow);
        assert!(threshold_2d(0.0, 1.0, 0.5, 1.0).is_err());
        assert!(threshold_2d(1.0, -1.0, 0.5, 1.0).is_err());

        let ones = TimeSeries::from_fn(0.0, 0.1, 201, |_| 1.0).unwrap();
        let t3 = threshold_3d(1.0, &ones, 1.0 / 3.0, 1.0, &[1.0]).unwrap();
        assert!((t3.threshold.n - 8.0).abs() < 1e-12);
        assert!(threshold_3d(1.0, &ones, 1.0 / 3.0, 1.0, &[]).is_err());
        assert!(threshold_3d(1.0, &ones, 1.0 / 3.0, 1.0, &[50.0]).is_err());

        let c = TimeSeries::from_fn(0.0, 0.1, 201, |_| 2.5).unwrap();
        for grid in [vec![1.0], vec![0.5, 2.0, 4.0]] {
            let t = threshold_3d(1.0, &c, 1.0 / 3.0, 1.0, &grid).unwrap();
            assert!((t.epsilon_quantity - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn n_threshold_scales_with_grashof_squared() {
        // at fixed lambda1 and nu, Gr is proportional to F
        let a = threshold_2d(0.5, 3.0, 0.5, 1.0).unwrap().n;
        let b = threshold_2d(0.5, 6.0, 0.5, 1.0).unwrap().n;
        assert!((b / a - 4.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_is_monotone_in_window_grid() {
        let s = TimeSeries::from_fn(0.0, 0.05, 2001, |t| 1.0 + (3.0 * t).sin().powi(2)).unwrap();
        let small = threshold_3d(1.0, &s, 1.0 / 3.0, 1.0, &[1.0, 2.0]).unwrap();
        let big = threshold_3d(1.0, &s, 1.0 / 3.0, 1.0, &[1.0, 2.0, 0.7, 5.0]).unwrap();
        assert!(big.epsilon_quantity <= small.epsilon_quantity);
    }

    #[test]
    fn linear_fields_do_not_contribute_to_c1() {
        let family = unit_box_family(2, 2, 2).unwrap();
        let lin = CorpusField {
            id: "linear".into(),
            ncomp: 1,
            eval: Arc::new(|x: &[f64]| vec![2.0 * x[0] - x[1]]),
            h1_semi: 5f64.sqrt(),
        };
        let est = estimate_c1(&family, &[lin], 0.5).unwrap();
        assert_eq!(est.c1, 0.0);
        assert!(estimate_c1(&family, &[], 0.5).is_err());
    }

    #[test]
    fn finite_difference_is_second_order_exact_on_quadratics() {
        let t: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * t * t - t).collect();
        for (ti, d) in t.iter().zip(finite_difference(&t, &y)) {
            assert!((d - (6.0 * ti - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_twins_have_zero_difference() {
        let mut cfg = TwinConfig::default();
        cfg.base.m = 16;
        cfg.base.t_end = 0.2;
        cfg.base.dt = 1e-2;
        cfg.base.record_stride = 1;
        cfg.v_init = cfg.base.init.clone();
        cfg.mesh_n = 4;
        cfg.c1 = Some(1.0);
        let d = twin_experiment(&cfg).unwrap();
        assert!(d.w_l2sq.iter().all(|&x| x == 0.0));
        assert!(d.rnw_l2sq.iter().all(|&x| x == 0.0));
        let check = verify_differential_inequality(&d, ToleranceModel::default()).unwrap();
        assert!(check.max_residual <= 0.0);
    }
}
