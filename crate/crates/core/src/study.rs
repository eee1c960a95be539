//! Table producers behind the single-purpose commands.

use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::determining::{threshold_reports, ThresholdInputs};
use crate::error::{invalid, Result};
use crate::forms::{random_triples, verify_ladyzhenskaya};
use crate::gronwall::{
    check_hypotheses, integrate_inequality, verify_conclusion, Conclusion, GronwallReport, TimeSeries,
    DEFAULT_TAIL_FRACTION,
};
use crate::mesh::{build_box_mesh, family_bracket, metrics, refine, SimplicialMesh};
use crate::pipeline::{f, linear_field, random_gronwall_case, rough_field, smooth_field, Table, GRONWALL_DT};
use crate::szinterp::{l2_error_and_rate, unit_box_family};

/// Metrics of `n`-per-side unit-box meshes and `refinements` red/Bey
/// refinements. Also returns the finest mesh.
pub fn mesh_study(dim: usize, n: usize, refinements: usize) -> Result<(Table, SimplicialMesh)> {
    let mut table = Table::new(
        "mesh_study.csv",
        &["level", "h", "h_min", "N", "shape_regularity", "quasi_uniformity", "c_lower", "c_upper"],
    );
    let mut mesh = build_box_mesh(dim, &vec![1.0; dim], n)?;
    for level in 0..=refinements {
        if level > 0 {
            mesh = refine(&mesh)?;
        }
        let m = metrics(&mesh);
        table.push(vec![
            level.to_string(),
            f(m.h),
            f(m.h_min),
            m.n_vertices.to_string(),
            f(m.shape_regularity),
            f(m.quasi_uniformity),
            f(m.c_lower),
            f(m.c_upper),
        ]);
    }
    Ok((table, mesh))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestField {
    Smooth,
    Rough,
    Linear,
}

impl TestField {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(TestField::Smooth),
            "rough" => Ok(TestField::Rough),
            "linear" => Ok(TestField::Linear),
            _ => Err(invalid(format!("unknown field `{s}` (smooth, rough, linear)"))),
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            TestField::Smooth => smooth_field(x),
            TestField::Rough => rough_field(x),
            TestField::Linear => linear_field(x),
        }
    }
}

/// Coarsest cells per side for the convergence families.
pub fn convergence_n0(dim: usize) -> usize {
    if dim == 2 {
        4
    } else {
        2
    }
}

/// Returns the table and the fitted slope.
pub fn sz_convergence(dim: usize, field: TestField, levels: usize) -> Result<(Table, f64)> {
    let family = unit_box_family(dim, convergence_n0(dim), levels)?;
    let g = move |x: &[f64]| field.eval(x);
    let t = l2_error_and_rate(&family, &[&g])?;
    let mut table = Table::new("sz_convergence.csv", &["level", "h", "N", "l2_error", "running_slope"]);
    for r in &t.rows {
        table.push(vec![r.level.to_string(), f(r.h), r.n.to_string(), f(r.l2_error), f(r.running_slope)]);
    }
    Ok((table, t.slope))
}

/// Returns the table and the largest ratio.
pub fn forms_verify(dim: usize, samples: usize, seed: u64) -> Result<(Table, f64)> {
    let triples = random_triples(dim, samples, seed)?;
    let report = verify_ladyzhenskaya(&triples, dim)?;
    let mut table = Table::new("forms_verify.csv", &["inequality", "sample", "lhs", "rhs", "ratio"]);
    let mut worst: f64 = 0.0;
    for r in &report.rows {
        worst = worst.max(r.ratio);
        table.push(vec![r.inequality.id().to_string(), r.sample.to_string(), f(r.lhs), f(r.rhs), f(r.ratio)]);
    }
    Ok((table, worst))
}

#[derive(Debug, Clone)]
pub struct GronwallDemo {
    pub table: Table,
    pub report: GronwallReport,
    pub envelope: Conclusion,
    /// Decay of a supplied `y` column, when one was read.
    pub observed: Option<Conclusion>,
}

impl GronwallDemo {
    /// When the hypotheses hold, every checked series must decay.
    pub fn consistent(&self) -> bool {
        !self.report.hypotheses_met.all()
            || (self.envelope.passed && self.observed.as_ref().is_none_or(|c| c.passed))
    }
}

pub const DEMO_HORIZON: f64 = 100.0;
pub const DEMO_WINDOW: f64 = 10.0;

fn demo_from(alpha: TimeSeries, beta: TimeSeries, y: Option<TimeSeries>, window: f64) -> Result<GronwallDemo> {
    let report = check_hypotheses(&alpha, &beta, window, DEFAULT_TAIL_FRACTION)?;
    let y0 = y.as_ref().map(|y| y.values()[0]).unwrap_or(1.0);
    let env = integrate_inequality(&alpha, &beta, y0)?;
    let envelope = verify_conclusion(&env, window);
    let observed = y.as_ref().map(|y| verify_conclusion(y, window));
    let mut cols = vec!["t", "alpha", "beta", "envelope"];
    if y.is_some() {
        cols.push("y");
    }
    let mut table = Table::new("gronwall_demo.csv", &cols);
    for i in 0..alpha.len() {
        let mut row = vec![
            format!("{:?}", alpha.time(i)),
            f(alpha.values()[i]),
            f(beta.values()[i]),
            f(env.values()[i]),
        ];
        if let Some(y) = &y {
            row.push(f(y.values()[i]));
        }
        table.push(row);
    }
    Ok(GronwallDemo { table, report, envelope, observed })
}

/// Synthetic cases: `exp` (alpha = 1, beta = e^-t), `oscillatory`
/// (alpha = 0.2 + sin t, beta = e^-t/2 cos^2 t), `random`.
pub fn gronwall_demo(case: &str, seed: u64, window: Option<f64>) -> Result<GronwallDemo> {
    let n = (DEMO_HORIZON / GRONWALL_DT).round() as usize + 1;
    let (alpha, beta) = match case {
        "exp" => (
            TimeSeries::from_fn(0.0, GRONWALL_DT, n, |_| 1.0)?,
            TimeSeries::from_fn(0.0, GRONWALL_DT, n, |t| (-t).exp())?,
        ),
        "oscillatory" => (
            TimeSeries::from_fn(0.0, GRONWALL_DT, n, |t| 0.2 + t.sin())?,
            TimeSeries::from_fn(0.0, GRONWALL_DT, n, |t| (-0.5 * t).exp() * t.cos().powi(2))?,
        ),
        "random" => {
            let (a, b, _) = random_gronwall_case(&mut ChaCha8Rng::seed_from_u64(seed))?;
            (a, b)
        }
        other => return Err(invalid(format!("unknown case `{other}` (exp, oscillatory, random)"))),
    };
    demo_from(alpha, beta, None, window.unwrap_or(DEMO_WINDOW))
}

/// Reads `t`, `alpha`, `beta` and optional `y` columns; `#` lines are
/// skipped.
pub fn read_series_csv<R: Read>(input: R, columns: &[&str]) -> Result<Vec<Option<TimeSeries>>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = rdr.headers()?.clone();
    let pos = |name: &str| headers.iter().position(|h| h.trim() == name);
    let t_col = pos("t").ok_or_else(|| invalid("input CSV has no `t` column"))?;
    let idx: Vec<Option<usize>> = columns.iter().map(|c| pos(c)).collect();
    let mut times = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
    let num = |s: &str| -> Result<f64> {
        s.trim().parse::<f64>().map_err(|_| invalid(format!("bad number `{s}` in input CSV")))
    };
    for rec in rdr.records() {
        let rec = rec?;
        times.push(num(&rec[t_col])?);
        for (k, i) in idx.iter().enumerate() {
            if let Some(i) = i {
                cols[k].push(num(&rec[*i])?);
            }
        }
    }
    idx.iter()
        .zip(cols)
        .map(|(i, v)| match i {
            Some(_) => TimeSeries::from_samples(&times, v).map(Some),
            None => Ok(None),
        })
        .collect()
}

/// Hypotheses and decay for a recorded `alpha`, `beta`, `y` history.
pub fn gronwall_from_csv<R: Read>(input: R, window: f64) -> Result<GronwallDemo> {
    let mut s = read_series_csv(input, &["alpha", "beta", "y"])?.into_iter();
    let alpha = s.next().flatten().ok_or_else(|| invalid("input CSV has no `alpha` column"))?;
    let beta = s.next().flatten().ok_or_else(|| invalid("input CSV has no `beta` column"))?;
    demo_from(alpha, beta, s.next().flatten(), window)
}

/// Threshold rows for a `thresholds` config: the configured `C1` and
/// `C1 = 1`, each with 2D and (when a series is given) 3D values.
pub fn thresholds_table(cfg: &RunConfig) -> Result<Table> {
    let series = cfg.str("series");
    let grad_linf = if series.is_empty() {
        None
    } else {
        let file = std::fs::File::open(series)?;
        read_series_csv(file, &["grad_linf"])?.pop().flatten()
    };
    let n0 = cfg.usize("mesh.n0")?;
    let levels = cfg.usize("mesh.levels")?;
    let (_, lo2, hi2) = family_bracket(2, n0, levels)?;
    let (_, lo3, hi3) = family_bracket(3, n0, levels)?;
    let inp = ThresholdInputs {
        nu: cfg.f64("nu")?,
        f: cfg.f64("F")?,
        lambda1: cfg.f64("lambda1")?,
        c1: cfg.f64("c1")?,
        grad_linf,
        t_grid: cfg.f64_list("t_grid")?,
        c_lower_2d: lo2,
        c_lower_3d: lo3,
        measure_2d: 1.0,
        measure_3d: 1.0,
    };
    let mut table = Table::new(
        "thresholds.csv",
        &[
            "c1", "nu", "F", "grashof", "gamma_2d", "n_threshold_2d", "h_threshold_2d", "bracket_2d_lo",
            "bracket_2d_hi", "gamma_3d", "epsilon_quantity", "n_threshold_3d", "h_threshold_3d", "bracket_3d_lo",
            "bracket_3d_hi",
        ],
    );
    let opt = |x: Option<f64>| x.map(f).unwrap_or_default();
    for r in threshold_reports(&inp)? {
        table.push(vec![
            f(r.c1),
            f(r.nu),
            f(r.f),
            f(r.grashof),
            f(r.gamma_2d),
            f(r.n_threshold_2d),
            f(r.h_threshold_2d),
            f(lo2),
            f(hi2),
            f(r.gamma_3d),
            opt(r.epsilon_quantity),
            opt(r.n_threshold_3d),
            opt(r.h_threshold_3d),
            f(lo3),
            f(hi3),
        ]);
    }
    Ok(table)
}
