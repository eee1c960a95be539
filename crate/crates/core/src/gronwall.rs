//! Finite-horizon checks of the generalized Gronwall lemma: for
//! `y' + alpha y <= beta` with `alpha` positive on average and `beta+`
//! vanishing on average, `y -> 0`.

use crate::error::{invalid, Error, Result};

/// Samples on a uniform time grid `t0 + i * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn uniform(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !t0.is_finite() {
            return Err(invalid("time series needs a finite start and positive stride"));
        }
        if values.len() < 2 {
            return Err(Error::SeriesTooShort("at least two samples are required".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                time: t0 + i as f64 * dt,
                what: "time series value".into(),
            });
        }
        Ok(TimeSeries { t0, dt, values })
    }

    /// Accepts explicit sample times, which must be uniform to 1e-12.
    pub fn from_samples(times: &[f64], values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(invalid("times and values differ in length"));
        }
        if times.len() < 2 {
            return Err(Error::SeriesTooShort("at least two samples are required".into()));
        }
        let n = times.len() - 1;
        let dt = (times[n] - times[0]) / n as f64;
        for (i, &t) in times.iter().enumerate() {
            let expect = times[0] + i as f64 * dt;
            if (t - expect).abs() > 1e-12 * expect.abs().max(1.0) {
                return Err(invalid(format!("sample times are not uniform at index {i}")));
            }
        }
        Self::uniform(times[0], dt, values)
    }

    pub fn from_fn(t0: f64, dt: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::uniform(t0, dt, (0..n).map(|i| f(t0 + i as f64 * dt)).collect())
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries {
            t0: self.t0,
            dt: self.dt,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn same_grid(&self, other: &TimeSeries) -> bool {
        self.len() == other.len()
            && (self.t0 - other.t0).abs() <= 1e-12 * self.t0.abs().max(1.0)
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let s = ((t - self.t0) / self.dt).clamp(0.0, (self.len() - 1) as f64);
        let i = (s.floor() as usize).min(self.len() - 2);
        (i, s - i as f64)
    }

    /// Piecewise-linear value at `t` (clamped to the series span).
    pub fn value_at(&self, t: f64) -> f64 {
        let (i, s) = self.locate(t);
        self.values[i] * (1.0 - s) + self.values[i + 1] * s
    }

    /// Trapezoid integral of the piecewise-linear interpolant over `[a, b]`,
    /// summed locally so the result depends only on samples near the window.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integral(b, a);
        }
        let (ia, sa) = self.locate(a);
        let (ib, sb) = self.locate(b);
        let v = &self.values;
        let lerp = |i: usize, s: f64| v[i] * (1.0 - s) + v[i + 1] * s;
        if ia == ib {
            return 0.5 * (sb - sa) * self.dt * (lerp(ia, sa) + lerp(ib, sb));
        }
        let mut total = 0.5 * (1.0 - sa) * self.dt * (lerp(ia, sa) + v[ia + 1]);
        for i in ia + 1..ib {
            total += 0.5 * self.dt * (v[i] + v[i + 1]);
        }
        total + 0.5 * sb * self.dt * (v[ib] + lerp(ib, sb))
    }

    /// Averages over `[s, s + window]` for every grid start `s >= from`
    /// whose window fits in the series.
    pub fn window_averages(&self, window: f64, from: f64) -> Vec<(f64, f64)> {
        let end = self.t_end();
        let eps = 1e-9 * self.dt;
        let first = ((from - self.t0) / self.dt - 1e-9).ceil().max(0.0) as usize;
        (first..self.len())
            .map(|i| self.time(i))
            .take_while(|&s| s + window <= end + eps)
            .map(|s| (s, self.integral(s, (s + window).min(end)) / window))
            .collect()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Max over `[a, b]` of the samples inside the interval.
    pub fn max_over(&self, a: f64, b: f64) -> f64 {
        let eps = 1e-9 * self.dt;
        (0..self.len())
            .filter(|&i| self.time(i) >= a - eps && self.time(i) <= b + eps)
            .map(|i| self.values[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;
pub const MIN_TAIL_WINDOWS: f64 = 5.0;
pub const BETA_TOL_FACTOR: f64 = 1e-3;
pub const CONCLUSION_TOL_FACTOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hypotheses {
    pub m_positive: bool,
    pub big_m_finite: bool,
    pub beta_vanishes: bool,
}

impl Hypotheses {
    pub fn all(&self) -> bool {
        self.m_positive && self.big_m_finite && self.beta_vanishes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport {
    pub window: f64,
    pub tail_start: f64,
    /// Min over tail windows of the average of `alpha`.
    pub m: f64,
    /// Max over tail windows of the average of `alpha-`.
    pub big_m: f64,
    /// Average of `beta+` over the last window.
    pub beta_plus_limit: f64,
    pub tol_beta: f64,
    pub hypotheses_met: Hypotheses,
    /// Last tenth of `y`, when attached.
    pub y_tail: Option<Vec<f64>>,
}

impl GronwallReport {
    pub fn attach_y(&mut self, y: &TimeSeries) {
        let n = y.len();
        let k = (n / 10).max(1);
        self.y_tail = Some(y.values()[n - k..].to_vec());
    }
}

pub fn check_hypotheses(
    alpha: &TimeSeries,
    beta: &TimeSeries,
    window: f64,
    tail_fraction: f64,
) -> Result<GronwallReport> {
    if !alpha.same_grid(beta) {
        return Err(invalid("alpha and beta must share a time grid"));
    }
    if !(window > 0.0) || !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(invalid("window must be positive and tail fraction in (0, 1]"));
    }
    let span = alpha.t_end() - alpha.t0();
    let tail_start = alpha.t0() + (1.0 - tail_fraction) * span;
    let tail = alpha.t_end() - tail_start;
    if tail < MIN_TAIL_WINDOWS * window * (1.0 - 1e-12) {
        return Err(Error::SeriesTooShort(format!(
            "tail of length {tail} holds fewer than {MIN_TAIL_WINDOWS} windows of length {window}"
        )));
    }
    let m = alpha
        .window_averages(window, tail_start)
        .iter()
        .map(|w| w.1)
        .fold(f64::INFINITY, f64::min);
    let big_m = alpha
        .map(|a| (-a).max(0.0))
        .window_averages(window, tail_start)
        .iter()
        .map(|w| w.1)
        .fold(0.0, f64::max);
    let beta_plus = beta.map(|b| b.max(0.0));
    let end = beta.t_end();
    let beta_plus_limit = beta_plus.integral(end - window, end) / window;
    let tol_beta = BETA_TOL_FACTOR * beta.values().iter().fold(0.0f64, |a, b| a.max(b.abs()));
    Ok(GronwallReport {
        window,
        tail_start,
        m,
        big_m,
        beta_plus_limit,
        tol_beta,
        hypotheses_met: Hypotheses {
            m_positive: m > 0.0,
            big_m_finite: big_m.is_finite(),
            beta_vanishes: beta_plus_limit <= tol_beta,
        },
        y_tail: None,
    })
}

fn cubic_at(series: &TimeSeries, t: f64) -> f64 {
    // four-point Lagrange interpolation on the nearest stencil
    let n = series.len();
    if n < 4 {
        return series.value_at(t);
    }
    let s = (t - series.t0()) / series.dt();
    let i0 = ((s.floor() as isize) - 1).clamp(0, n as isize - 4) as usize;
    let x = s - i0 as f64;
    let v = series.values();
    let l0 = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0;
    let l1 = x * (x - 2.0) * (x - 3.0) / 2.0;
    let l2 = -x * (x - 1.0) * (x - 3.0) / 2.0;
    let l3 = x * (x - 1.0) * (x - 2.0) / 6.0;
    l0 * v[i0] + l1 * v[i0 + 1] + l2 * v[i0 + 2] + l3 * v[i0 + 3]
}

/// Integrates the equality case `y' = -alpha y + beta` with RK4 on the
/// sample grid; the result bounds every solution of the inequality.
pub fn integrate_inequality(alpha: &TimeSeries, beta: &TimeSeries, y0: f64) -> Result<TimeSeries> {
    if !(y0 >= 0.0) {
        return Err(invalid(format!("initial value must be nonnegative, got {y0}")));
    }
    if !alpha.same_grid(beta) {
        return Err(invalid("alpha and beta must share a time grid"));
    }
    let h = alpha.dt();
    let rhs = |i: usize, y: f64| -alpha.values()[i] * y + beta.values()[i];
    let rhs_mid = |t: f64, y: f64| -cubic_at(alpha, t) * y + cubic_at(beta, t);
    let mut out = Vec::with_capacity(alpha.len());
    let mut y = y0;
    out.push(y);
    for i in 0..alpha.len() - 1 {
        let tm = alpha.time(i) + 0.5 * h;
        let k1 = rhs(i, y);
        let k2 = rhs_mid(tm, y + 0.5 * h * k1);
        let k3 = rhs_mid(tm, y + 0.5 * h * k2);
        let k4 = rhs(i + 1, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(y);
    }
    TimeSeries::uniform(alpha.t0(), h, out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conclusion {
    pub passed: bool,
    pub final_max: f64,
    pub first_max: f64,
    pub tol: f64,
}

/// Decay test: the final-window max must be below `1e-6 * y(0)` and below
/// a tenth of the first-window max.
pub fn verify_conclusion(y: &TimeSeries, window: f64) -> Conclusion {
    let y0 = y.values()[0];
    let tol = CONCLUSION_TOL_FACTOR * y0;
    let first_max = y.max_over(y.t0(), y.t0() + window);
    let final_max = y.max_over(y.t_end() - window, y.t_end());
    Conclusion {
        passed: final_max < tol && final_max < 0.1 * first_max,
        final_max,
        first_max,
        tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn series(f: impl Fn(f64) -> f64, horizon: f64, dt: f64) -> TimeSeries {
        TimeSeries::from_fn(0.0, dt, (horizon / dt).round() as usize + 1, f).unwrap()
    }

    #[test]
    fn rejects_bad_series() {
        assert!(TimeSeries::uniform(0.0, 0.0, vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::uniform(0.0, 1.0, vec![1.0]).is_err());
        assert!(TimeSeries::uniform(0.0, 1.0, vec![1.0, f64::NAN]).is_err());
        assert!(TimeSeries::from_samples(&[0.0, 1.0, 2.5], vec![0.0; 3]).is_err());
        assert!(TimeSeries::from_samples(&[0.0, 0.1, 0.2], vec![0.0; 3]).is_ok());
    }

    #[test]
    fn integral_of_linear_is_exact_off_grid() {
        let s = series(|t| 3.0 * t + 1.0, 10.0, 0.1);
        let exact = |a: f64, b: f64| 1.5 * (b * b - a * a) + (b - a);
        assert!((s.integral(0.37, 8.123) - exact(0.37, 8.123)).abs() < 1e-12);
    }

    #[test]
    fn constant_alpha_zero_beta() {
        let a = series(|_| 1.0, 100.0, 0.05);
        let b = series(|_| 0.0, 100.0, 0.05);
        for w in [1.0, 3.3, 7.0] {
            let r = check_hypotheses(&a, &b, w, 0.5).unwrap();
            assert!((r.m - 1.0).abs() < 1e-12);
            assert_eq!(r.big_m, 0.0);
            assert_eq!(r.beta_plus_limit, 0.0);
            assert!(r.hypotheses_met.all());
        }
    }

    #[test]
    fn oscillating_alpha_has_unit_mean() {
        let a = series(|t| 1.0 + t.sin(), 100.0, 0.01);
        let b = series(|_| 0.0, 100.0, 0.01);
        let r = check_hypotheses(&a, &b, 2.0 * PI, 0.5).unwrap();
        assert!((r.m - 1.0).abs() < 1e-4, "{}", r.m);
        assert_eq!(r.big_m, 0.0);
    }

    #[test]
    fn zero_alpha_is_flagged() {
        let a = series(|_| 0.0, 50.0, 0.1);
        let b = series(|_| 0.0, 50.0, 0.1);
        let r = check_hypotheses(&a, &b, 2.0, 0.5).unwrap();
        assert_eq!(r.m, 0.0);
        assert!(!r.hypotheses_met.m_positive);
    }

    #[test]
    fn short_tail_is_an_error() {
        let a = series(|_| 1.0, 10.0, 0.1);
        assert!(matches!(
            check_hypotheses(&a, &a, 2.0, 0.5),
            Err(Error::SeriesTooShort(_))
        ));
    }

    #[test]
    fn closed_form_envelopes() {
        let dt = 0.01;
        let a = series(|_| 1.0, 10.0, dt);
        let b = series(|t| (-t).exp(), 10.0, dt);
        let y = integrate_inequality(&a, &b, 1.0).unwrap();
        for i in 0..y.len() {
            let t = y.time(i);
            assert!((y.values()[i] - (-t).exp() * (1.0 + t)).abs() < 1e-8);
        }
        let y10 = y.values()[y.len() - 1];
        assert!((y10 - 11.0 * (-10.0f64).exp()).abs() < 1e-10);

        let a = series(|t| 1.0 + t.sin(), 20.0, dt);
        let zero = series(|_| 0.0, 20.0, dt);
        let y = integrate_inequality(&a, &zero, 1.0).unwrap();
        for i in 0..y.len() {
            let t = y.time(i);
            assert!((y.values()[i] - (-t - 1.0 + t.cos()).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn negative_start_rejected() {
        let a = series(|_| 1.0, 1.0, 0.1);
        assert!(integrate_inequality(&a, &a, -1.0).is_err());
    }

    #[test]
    fn conclusion_examples() {
        let w = 2.0;
        assert!(verify_conclusion(&series(|t| (-t).exp(), 30.0, 0.01), w).passed);
        assert!(!verify_conclusion(&series(|_| 1.0, 30.0, 0.01), w).passed);
        assert!(verify_conclusion(&series(|t| (-t).exp() * (1.0 + t), 20.0, 0.01), w).passed);
    }

    #[test]
    fn transient_does_not_change_tail_report() {
        let a = series(|t| 1.0 + 0.5 * (2.0 * t).sin(), 60.0, 0.05);
        let b = series(|t| (-t).exp(), 60.0, 0.05);
        let r1 = check_hypotheses(&a, &b, 3.0, 0.5).unwrap();
        let n = a.len() / 10;
        let mut av = a.values().to_vec();
        for v in av.iter_mut().take(n) {
            *v = -5.0;
        }
        let a2 = TimeSeries::uniform(0.0, 0.05, av).unwrap();
        let r2 = check_hypotheses(&a2, &b, 3.0, 0.5).unwrap();
        assert_eq!(r1.m, r2.m);
        assert_eq!(r1.big_m, r2.big_m);
    }
}
