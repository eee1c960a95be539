//! Pseudo-spectral solver for `du/dt + nu A u + B(u, u) = f` on the periodic
//! square, with exponential time differencing (ETDRK2) for the viscous term.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::gronwall::TimeSeries;
use crate::spectral::{nonlinear_term, seeded_band_limited, SpectralField, SpectralGrid};

pub const DEFAULT_CFL: f64 = 0.4;

#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Zero,
    /// `f = A sin(k y) e_x`.
    Kolmogorov { amplitude: f64, k: i64 },
    /// `f = nu |k|^2 m(x)` for the unit-direction mode
    /// `m = A k_perp/|k| cos(k.x)`, which makes `m` a steady state.
    SingleMode { amplitude: f64, k: [i64; 2] },
}

impl Forcing {
    pub fn field(&self, grid: &Arc<SpectralGrid>, nu: f64) -> Result<SpectralField> {
        if grid.dim() != 2 {
            return Err(invalid("the solver is two-dimensional"));
        }
        let k0 = grid.k0();
        Ok(match *self {
            Forcing::Zero => SpectralField::zeros(grid),
            Forcing::Kolmogorov { amplitude, k } => {
                let kk = k as f64 * k0;
                SpectralField::from_fn(grid, |x| vec![amplitude * (kk * x[1]).sin(), 0.0])
            }
            Forcing::SingleMode { amplitude, k } => {
                let m = single_mode(grid, amplitude, k)?;
                let k2 = ((k[0] * k[0] + k[1] * k[1]) as f64) * k0 * k0;
                m.scaled(nu * k2)
            }
        })
    }

    /// The steady state of the unforced-nonlinearity balance, when one exists
    /// in closed form.
    pub fn steady_state(&self, grid: &Arc<SpectralGrid>, nu: f64) -> Result<Option<SpectralField>> {
        Ok(match *self {
            Forcing::Zero => Some(SpectralField::zeros(grid)),
            Forcing::Kolmogorov { k, .. } => {
                let k2 = (k as f64 * grid.k0()).powi(2);
                Some(self.field(grid, nu)?.scaled(1.0 / (nu * k2)))
            }
            Forcing::SingleMode { amplitude, k } => Some(single_mode(grid, amplitude, k)?),
        })
    }
}

fn single_mode(grid: &Arc<SpectralGrid>, amplitude: f64, k: [i64; 2]) -> Result<SpectralField> {
    if k == [0, 0] {
        return Err(invalid("single-mode forcing needs a nonzero wavevector"));
    }
    let k0 = grid.k0();
    let (kx, ky) = (k[0] as f64 * k0, k[1] as f64 * k0);
    let norm = (kx * kx + ky * ky).sqrt();
    let (dx, dy) = (-ky / norm, kx / norm);
    Ok(SpectralField::from_fn(grid, |x| {
        let c = amplitude * (kx * x[0] + ky * x[1]).cos();
        vec![dx * c, dy * c]
    }))
}

/// `exp(-2 nu t) (sin x cos y, -cos x sin y)` on `[0, 2 pi]^2`.
pub fn taylor_green_exact(grid: &Arc<SpectralGrid>, t: f64, nu: f64) -> SpectralField {
    let d = (-2.0 * nu * t).exp();
    SpectralField::from_fn(grid, |x| {
        vec![d * x[0].sin() * x[1].cos(), -d * x[0].cos() * x[1].sin()]
    })
}

fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

fn phi2(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// Per-mode ETDRK2 coefficients for one step size.
#[derive(Debug, Clone)]
struct Coefficients {
    dt: f64,
    decay: Vec<f64>,
    h_phi1: Vec<f64>,
    h_phi2: Vec<f64>,
}

impl Coefficients {
    fn new(grid: &SpectralGrid, nu: f64, dt: f64) -> Self {
        let n = grid.len();
        let mut c = Coefficients {
            dt,
            decay: vec![0.0; n],
            h_phi1: vec![0.0; n],
            h_phi2: vec![0.0; n],
        };
        for idx in 0..n {
            let z = -nu * grid.k2(idx) * dt;
            c.decay[idx] = z.exp();
            c.h_phi1[idx] = dt * phi1(z);
            c.h_phi2[idx] = dt * phi2(z);
        }
        c
    }
}

/// Time stepper for a fixed grid, viscosity and forcing.
#[derive(Debug, Clone)]
pub struct Solver {
    grid: Arc<SpectralGrid>,
    nu: f64,
    forcing: SpectralField,
    /// Optional `exp(-rate t) h` added to the forcing.
    transient: Option<(SpectralField, f64)>,
    cfl: f64,
    coeffs: Vec<Coefficients>,
}

impl Solver {
    pub fn new(grid: &Arc<SpectralGrid>, nu: f64, forcing: SpectralField) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(invalid("the solver is two-dimensional"));
        }
        if !(nu >= 0.0) {
            return Err(invalid(format!("viscosity must be nonnegative, got {nu}")));
        }
        if !forcing.grid().same_as(grid) {
            return Err(Error::GridMismatch("forcing lives on a different grid".into()));
        }
        let mut forcing = forcing;
        forcing.dealias();
        forcing.project();
        Ok(Solver {
            grid: grid.clone(),
            nu,
            forcing,
            transient: None,
            cfl: DEFAULT_CFL,
            coeffs: Vec::new(),
        })
    }

    /// Adds `exp(-rate t) h` to the forcing.
    pub fn with_transient(mut self, h: SpectralField, rate: f64) -> Result<Self> {
        if !h.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch("transient forcing lives on a different grid".into()));
        }
        let mut h = h;
        h.dealias();
        h.project();
        self.transient = Some((h, rate));
        Ok(self)
    }

    /// Forcing at time `t`.
    pub fn forcing_at(&self, t: f64) -> SpectralField {
        let mut f = self.forcing.clone();
        if let Some((h, rate)) = &self.transient {
            f.axpy((-rate * t).exp(), h).expect("same grid");
        }
        f
    }

    pub fn with_cfl(mut self, cfl: f64) -> Self {
        self.cfl = cfl;
        self
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn forcing(&self) -> &SpectralField {
        &self.forcing
    }

    pub fn cfl_limit(&self, max_speed: f64) -> f64 {
        if max_speed > 0.0 {
            self.cfl * self.grid.dx() / max_speed
        } else {
            f64::INFINITY
        }
    }

    fn coefficients(&mut self, dt: f64) -> &Coefficients {
        if let Some(i) = self.coeffs.iter().position(|c| c.dt == dt) {
            return &self.coeffs[i];
        }
        self.coeffs.push(Coefficients::new(&self.grid, self.nu, dt));
        self.coeffs.last().unwrap()
    }

    /// `f(t) - B(u, u)`.
    fn rhs(&self, u: &SpectralField, t: f64) -> SpectralField {
        let mut n = nonlinear_term(u);
        n.scale(-1.0);
        n.axpy(1.0, &self.forcing).expect("same grid");
        if let Some((h, rate)) = &self.transient {
            n.axpy((-rate * t).exp(), h).expect("same grid");
        }
        n
    }

    /// One ETDRK2 step from time `t`.
    pub fn step(&mut self, u: &SpectralField, t: f64, dt: f64) -> Result<SpectralField> {
        if !u.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch("state lives on a different grid".into()));
        }
        if !(dt > 0.0) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        let speed = u.max_speed();
        if !speed.is_finite() {
            return Err(Error::NonFinite {
                time: t,
                what: "velocity".into(),
            });
        }
        let limit = self.cfl_limit(speed);
        if dt > limit {
            return Err(Error::Cfl { time: t, dt, limit });
        }
        let n0 = self.rhs(u, t);
        let c = self.coefficients(dt).clone();
        let mut a = SpectralField::zeros(&self.grid);
        for ((ac, uc), nc) in a
            .coefficients_mut()
            .iter_mut()
            .zip(u.coefficients())
            .zip(n0.coefficients())
        {
            for idx in 0..ac.len() {
                ac[idx] = uc[idx] * c.decay[idx] + nc[idx] * c.h_phi1[idx];
            }
        }
        let n1 = self.rhs(&a, t + dt);
        for ((ac, n1c), n0c) in a
            .coefficients_mut()
            .iter_mut()
            .zip(n1.coefficients())
            .zip(n0.coefficients())
        {
            for idx in 0..ac.len() {
                ac[idx] += (n1c[idx] - n0c[idx]) * c.h_phi2[idx];
            }
        }
        a.dealias();
        a.project();
        if !a.is_finite() {
            return Err(Error::NonFinite {
                time: t + dt,
                what: "velocity".into(),
            });
        }
        Ok(a)
    }
}

/// Convenience single step with a fresh solver.
pub fn step(state: &SpectralField, forcing: &SpectralField, nu: f64, dt: f64) -> Result<SpectralField> {
    Solver::new(state.grid(), nu, forcing.clone())?.step(state, 0.0, dt)
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Zero,
    TaylorGreen { amplitude: f64 },
    /// Seeded band-limited field with the given L2 norm.
    Random { kmax: f64, l2: f64, seed: u64 },
    /// The closed-form steady state of the forcing.
    Steady,
    /// Steady state plus a seeded band-limited perturbation.
    PerturbedSteady { kmax: f64, l2: f64, seed: u64 },
}

impl InitialCondition {
    pub fn field(&self, grid: &Arc<SpectralGrid>, forcing: &Forcing, nu: f64) -> Result<SpectralField> {
        let steady = || -> Result<SpectralField> {
            forcing
                .steady_state(grid, nu)?
                .ok_or_else(|| invalid("forcing has no closed-form steady state"))
        };
        let mut u = match *self {
            InitialCondition::Zero => SpectralField::zeros(grid),
            InitialCondition::TaylorGreen { amplitude } => taylor_green_exact(grid, 0.0, 0.0).scaled(amplitude),
            InitialCondition::Random { kmax, l2, seed } => seeded_band_limited(grid, kmax, l2, seed),
            InitialCondition::Steady => steady()?,
            InitialCondition::PerturbedSteady { kmax, l2, seed } => {
                steady()?.add(&seeded_band_limited(grid, kmax, l2, seed))?
            }
        };
        u.dealias();
        u.project();
        Ok(u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub nu: f64,
    pub m: usize,
    pub length: f64,
    pub dt: f64,
    pub t_end: f64,
    pub record_stride: usize,
    pub forcing: Forcing,
    pub init: InitialCondition,
    /// Subdivide steps that would violate the CFL bound instead of failing.
    pub adaptive: bool,
    /// Keep the state every this many records.
    pub checkpoint_every: Option<usize>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            nu: 0.1,
            m: 64,
            length: 2.0 * PI,
            dt: 1e-3,
            t_end: 1.0,
            record_stride: 10,
            forcing: Forcing::Zero,
            init: InitialCondition::TaylorGreen { amplitude: 1.0 },
            adaptive: true,
            checkpoint_every: None,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(invalid("nu must be positive"));
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(invalid("dt and t_end must be positive"));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride must be at least 1"));
        }
        if self.checkpoint_every == Some(0) {
            return Err(invalid("checkpoint interval must be at least 1"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn grid(&self) -> Result<Arc<SpectralGrid>> {
        SpectralGrid::new(2, self.m, self.length)
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// `|u|^2 / 2`.
    pub energy: Vec<f64>,
    /// `||u||^2`.
    pub enstrophy: Vec<f64>,
    pub grad_linf: Vec<f64>,
    /// `||f||_{V'}` at each record time.
    pub f_vprime: Vec<f64>,
    /// `(f, u)`, used by the energy balance check.
    pub forcing_power: Vec<f64>,
    pub checkpoints: Vec<(f64, SpectralField)>,
    pub final_state: SpectralField,
}

impl TrajectoryRecord {
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

    pub fn enstrophy_series(&self) -> Result<TimeSeries> {
        TimeSeries::from_samples(&self.times, self.enstrophy.clone())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "energy", "enstrophy", "grad_linf", "f_vprime"])?;
        for i in 0..self.len() {
            w.write_record([
                format!("{:?}", self.times[i]),
                format!("{:e}", self.energy[i]),
                format!("{:e}", self.enstrophy[i]),
                format!("{:e}", self.grad_linf[i]),
                format!("{:e}", self.f_vprime[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Sample {
    energy: f64,
    enstrophy: f64,
    grad_linf: f64,
    forcing_power: f64,
}

fn sample(u: &SpectralField, f: &SpectralField, t: f64) -> Result<Sample> {
    let s = Sample {
        energy: 0.5 * u.l2_sq(),
        enstrophy: u.h1_sq(),
        grad_linf: u.grad_linf(),
        forcing_power: f.inner(u)?,
    };
    if ![s.energy, s.enstrophy, s.grad_linf].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            time: t,
            what: "recorded norms".into(),
        });
    }
    Ok(s)
}

/// Advances `u` by `dt`, splitting into power-of-two substeps when allowed
/// and needed for the CFL bound.
pub fn advance(solver: &mut Solver, u: &SpectralField, t: f64, dt: f64, adaptive: bool) -> Result<SpectralField> {
    let mut parts = 1usize;
    if adaptive {
        let limit = solver.cfl_limit(u.max_speed());
        while dt / parts as f64 > limit && parts < 1 << 16 {
            parts *= 2;
        }
    }
    'retry: loop {
        let h = dt / parts as f64;
        let mut state = u.clone();
        for p in 0..parts {
            match solver.step(&state, t + p as f64 * h, h) {
                Ok(next) => state = next,
                // the speed grew inside the step; halve and start over
                Err(Error::Cfl { .. }) if adaptive && parts < 1 << 16 => {
                    parts *= 2;
                    continue 'retry;
                }
                Err(e) => return Err(e),
            }
        }
        return Ok(state);
    }
}

pub fn simulate(config: &SimulationConfig) -> Result<TrajectoryRecord> {
    config.validate()?;
    let grid = config.grid()?;
    let f = config.forcing.field(&grid, config.nu)?;
    let u0 = config.init.field(&grid, &config.forcing, config.nu)?;
    simulate_from(config, &grid, u0, f)
}

/// Runs from an explicit initial state and forcing field.
pub fn simulate_from(
    config: &SimulationConfig,
    grid: &Arc<SpectralGrid>,
    u0: SpectralField,
    forcing: SpectralField,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    let mut solver = Solver::new(grid, config.nu, forcing)?;
    let f = solver.forcing().clone();
    let f_vprime = f.vprime_sq()?.sqrt();
    let mut rec = TrajectoryRecord {
        times: Vec::new(),
        energy: Vec::new(),
        enstrophy: Vec::new(),
        grad_linf: Vec::new(),
        f_vprime: Vec::new(),
        forcing_power: Vec::new(),
        checkpoints: Vec::new(),
        final_state: u0.clone(),
    };
    let push = |rec: &mut TrajectoryRecord, u: &SpectralField, t: f64| -> Result<()> {
        let s = sample(u, &f, t)?;
        rec.times.push(t);
        rec.energy.push(s.energy);
        rec.enstrophy.push(s.enstrophy);
        rec.grad_linf.push(s.grad_linf);
        rec.f_vprime.push(f_vprime);
        rec.forcing_power.push(s.forcing_power);
        if let Some(every) = config.checkpoint_every {
            if (rec.times.len() - 1) % every == 0 {
                rec.checkpoints.push((t, u.clone()));
            }
        }
        Ok(())
    };
    let mut u = u0;
    push(&mut rec, &u, 0.0)?;
    let n = config.n_steps();
    for i in 0..n {
        let t = i as f64 * config.dt;
        u = advance(&mut solver, &u, t, config.dt, config.adaptive)?;
        if (i + 1) % config.record_stride == 0 {
            push(&mut rec, &u, (i + 1) as f64 * config.dt)?;
        }
    }
    rec.final_state = u;
    Ok(rec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    /// Max relative residual of `dE/dt = -nu ||u||^2 + (f, u)`.
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares finite differences of the recorded energy with the trapezoid
/// average of the right-hand side, relative to the largest rate magnitude.
/// The tolerance is `10 dt` per unit time.
pub fn verify_energy_identity(rec: &TrajectoryRecord, nu: f64, dt: f64) -> Result<EnergyBalance> {
    if rec.len() < 2 {
        return Err(Error::SeriesTooShort("energy balance needs two records".into()));
    }
    let rate = |i: usize| -nu * rec.enstrophy[i] + rec.forcing_power[i];
    let scale = (0..rec.len()).map(|i| rate(i).abs()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for i in 0..rec.len() - 1 {
        let h = rec.times[i + 1] - rec.times[i];
        let lhs = (rec.energy[i + 1] - rec.energy[i]) / h;
        let rhs = 0.5 * (rate(i) + rate(i + 1));
        worst = worst.max((lhs - rhs).abs());
    }
    let rel = if scale > 0.0 { worst / scale } else { worst };
    let tolerance = 10.0 * dt;
    Ok(EnergyBalance {
        max_residual: rel,
        tolerance,
        passed: rel <= tolerance,
    })
}

pub const APRIORI_TAIL_FRACTION: f64 = 0.5;
pub const APRIORI_MIN_WINDOWS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriReport {
    pub window: f64,
    pub max_window_average: f64,
    pub bound: f64,
    /// `max_window_average / bound` (0 when both vanish).
    pub ratio: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Late-time sliding-window enstrophy averages against `(2 / nu^2) F^2`
/// with window `T = rho^2 / nu`.
pub fn verify_apriori_bound(
    rec: &TrajectoryRecord,
    nu: f64,
    rho: f64,
    forcing_vprime: &[f64],
) -> Result<AprioriReport> {
    if forcing_vprime.len() != rec.len() {
        return Err(invalid("forcing series and record differ in length"));
    }
    let window = rho * rho / nu;
    let span = rec.times.last().copied().unwrap_or(0.0) - rec.times.first().copied().unwrap_or(0.0);
    if span < APRIORI_MIN_WINDOWS * window * (1.0 - 1e-12) {
        return Err(Error::SeriesTooShort(format!(
            "record spans {span}, need {APRIORI_MIN_WINDOWS} windows of length {window}"
        )));
    }
    let ens = rec.enstrophy_series()?;
    let tail_start = rec.times[0] + (1.0 - APRIORI_TAIL_FRACTION) * span;
    let max_avg = ens
        .window_averages(window, tail_start)
        .iter()
        .map(|w| w.1)
        .fold(0.0, f64::max);
    let f_late = rec
        .times
        .iter()
        .zip(forcing_vprime)
        .filter(|(t, _)| **t >= tail_start)
        .map(|(_, f)| *f)
        .fold(0.0, f64::max);
    let bound = 2.0 / (nu * nu) * f_late * f_late;
    let tolerance = 1e-6 * rec.enstrophy.iter().copied().fold(0.0, f64::max);
    let ratio = if bound > 0.0 {
        max_avg / bound
    } else if max_avg <= tolerance {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(AprioriReport {
        window,
        max_window_average: max_avg,
        bound,
        ratio,
        tolerance,
        passed: max_avg <= bound + tolerance,
    })
}

/// Writes a state as text: a `m length` header then one `re im` pair per
/// coefficient, component by component.
pub fn write_checkpoint<W: Write>(u: &SpectralField, mut out: W) -> Result<()> {
    let g = u.grid();
    writeln!(out, "{} {} {:?}", g.dim(), g.m(), g.length())?;
    for c in u.coefficients() {
        for z in c {
            writeln!(out, "{:?} {:?}", z.re, z.im)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(input: R) -> Result<SpectralField> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| invalid("empty checkpoint"))??;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 {
        return Err(invalid("checkpoint header must be `dim m length`"));
    }
    let parse_err = |s: &str| invalid(format!("bad number `{s}` in checkpoint"));
    let dim: usize = h[0].parse().map_err(|_| parse_err(h[0]))?;
    let m: usize = h[1].parse().map_err(|_| parse_err(h[1]))?;
    let length: f64 = h[2].parse().map_err(|_| parse_err(h[2]))?;
    let grid = SpectralGrid::new(dim, m, length)?;
    let mut comps = vec![Vec::with_capacity(grid.len()); dim];
    for comp in comps.iter_mut() {
        for _ in 0..grid.len() {
            let line = lines.next().ok_or_else(|| invalid("truncated checkpoint"))??;
            let mut it = line.split_whitespace();
            let mut num = || -> Result<f64> {
                let s = it.next().ok_or_else(|| invalid("truncated coefficient line"))?;
                s.parse().map_err(|_| parse_err(s))
            };
            comp.push(Complex64::new(num()?, num()?));
        }
    }
    SpectralField::from_coefficients(&grid, comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::advective_term;

    fn grid(m: usize) -> Arc<SpectralGrid> {
        SpectralGrid::torus(2, m).unwrap()
    }

    #[test]
    fn taylor_green_energy() {
        let g = grid(16);
        for (t, nu) in [(0.0, 0.1), (1.0, 0.1), (3.0, 0.0)] {
            let e = 0.5 * taylor_green_exact(&g, t, nu).l2_sq();
            // |u|^2 = 2 pi^2 e^{-4 nu t}, energy is half of it
            assert!((e - PI * PI * (-4.0 * nu * t).exp()).abs() < 1e-11);
        }
        let tg = taylor_green_exact(&g, 0.0, 0.0);
        assert!((tg.l2_sq().sqrt() - 2f64.sqrt() * PI).abs() < 1e-12);
    }

    #[test]
    fn taylor_green_is_reproduced() {
        let g = grid(64);
        let nu = 0.1;
        let mut u = taylor_green_exact(&g, 0.0, nu);
        let zero = SpectralField::zeros(&g);
        let mut solver = Solver::new(&g, nu, zero).unwrap();
        for i in 0..1000 {
            u = solver.step(&u, i as f64 * 1e-3, 1e-3).unwrap();
        }
        let exact = taylor_green_exact(&g, 1.0, nu);
        let err = u.sub(&exact).unwrap().l2_sq().sqrt() / exact.l2_sq().sqrt();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn unforced_energy_decreases_each_step() {
        let g = grid(32);
        let mut u = seeded_band_limited(&g, 6.0, 2.0, 4);
        let mut solver = Solver::new(&g, 0.05, SpectralField::zeros(&g)).unwrap();
        let mut e = u.l2_sq();
        for i in 0..50 {
            u = solver.step(&u, i as f64 * 0.01, 0.01).unwrap();
            let e2 = u.l2_sq();
            assert!(e2 < e);
            e = e2;
            assert!(u.max_divergence() < 1e-12);
            assert_eq!(u.mean_magnitude(), 0.0);
        }
    }

    #[test]
    fn single_mode_steady_state_holds() {
        let g = grid(32);
        let nu = 0.3;
        let forcing = Forcing::SingleMode { amplitude: 0.8, k: [2, 1] };
        let f = forcing.field(&g, nu).unwrap();
        let u0 = forcing.steady_state(&g, nu).unwrap().unwrap();
        let mut solver = Solver::new(&g, nu, f).unwrap();
        let mut u = u0.clone();
        for i in 0..1000 {
            u = solver.step(&u, i as f64 * 1e-2, 1e-2).unwrap();
        }
        let drift = u.sub(&u0).unwrap().l2_sq().sqrt() / u0.l2_sq().sqrt();
        assert!(drift < 1e-8, "{drift}");
    }

    #[test]
    fn cfl_violation_and_blowup_are_errors() {
        let g = grid(16);
        let u = taylor_green_exact(&g, 0.0, 0.0).scaled(100.0);
        let mut solver = Solver::new(&g, 0.1, SpectralField::zeros(&g)).unwrap();
        assert!(matches!(solver.step(&u, 0.0, 0.1), Err(Error::Cfl { .. })));
        let mut bad = u.clone();
        bad.coefficients_mut()[0][3] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(solver.step(&bad, 0.0, 1e-6), Err(Error::NonFinite { .. })));
        // adaptive advance splits the step instead
        let ok = advance(&mut solver, &u, 0.0, 0.01, true);
        assert!(ok.is_ok());
    }

    #[test]
    fn dealiased_nonlinearity_matches_finer_grid() {
        let g = grid(48);
        let fine = grid(96);
        let u = seeded_band_limited(&g, 8.0, 1.0, 9);
        let coarse_b = nonlinear_term(&u);
        let fine_b = nonlinear_term(&u.prolong(&fine).unwrap()).restrict(&g).unwrap();
        let err = coarse_b.sub(&fine_b).unwrap().l2_sq().sqrt();
        assert!(err < 1e-12, "{err}");
        let adv = advective_term(&u, &u).unwrap();
        assert!(adv.sub(&coarse_b).unwrap().l2_sq().sqrt() < 1e-12);
    }

    #[test]
    fn second_order_in_time() {
        let g = grid(32);
        let nu = 0.05;
        let u0 = seeded_band_limited(&g, 5.0, 3.0, 21);
        let run = |dt: f64| {
            let mut s = Solver::new(&g, nu, SpectralField::zeros(&g)).unwrap();
            let mut u = u0.clone();
            let n = (0.5 / dt).round() as usize;
            for i in 0..n {
                u = s.step(&u, i as f64 * dt, dt).unwrap();
            }
            u
        };
        let reference = run(1e-4);
        let errs: Vec<f64> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&dt| run(dt).sub(&reference).unwrap().l2_sq().sqrt())
            .collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!(slope >= 1.8, "{errs:?}");
        }
    }

    #[test]
    fn checkpoint_roundtrip() {
        let g = grid(8);
        let u = seeded_band_limited(&g, 2.0, 1.0, 1);
        let mut buf = Vec::new();
        write_checkpoint(&u, &mut buf).unwrap();
        let back = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back.coefficients(), u.coefficients());
    }
}
