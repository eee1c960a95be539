use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use szdet::config::{header_lines, parse_config, settings_hash, write_with_header, RunConfig};
use szdet::determining::{twin_experiment, verify_differential_inequality, ToleranceModel};
use szdet::mesh::write_mesh_text;
use szdet::nse2d::{simulate, write_checkpoint};
use szdet::pipeline::{run_pipeline, Table, PIPELINES};
use szdet::study::{
    forms_verify, gronwall_demo, gronwall_from_csv, mesh_study, sz_convergence, thresholds_table, TestField,
};
use szdet::Error;

#[derive(Parser)]
#[command(name = "szdet", version, about = "Scott-Zhang determining projections for Navier-Stokes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Metrics of a refined unit-box mesh family.
    MeshStudy {
        #[arg(long, value_parser = ["2", "3"])]
        dim: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        refinements: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also export the finest mesh as text.
        #[arg(long)]
        mesh_out: Option<PathBuf>,
    },
    /// L2 error of the Scott-Zhang interpolant under refinement.
    SzConvergence {
        #[arg(long, value_parser = ["2", "3"])]
        dim: String,
        #[arg(long, value_parser = ["smooth", "rough", "linear"])]
        field: String,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ladyzhenskaya and Holder ratios on random triples.
    FormsVerify {
        #[arg(long, value_parser = ["2", "3"])]
        dim: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pseudo-spectral run on the 2D torus.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
    },
    /// Gronwall hypotheses and envelope for a synthetic or recorded history.
    GronwallDemo {
        #[arg(long, value_parser = ["exp", "oscillatory", "random"], required_unless_present = "input")]
        case: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV with t, alpha, beta and optionally y columns.
        #[arg(long, conflicts_with = "case")]
        input: Option<PathBuf>,
        /// Averaging window (default 10, or 1 for recorded input).
        #[arg(long)]
        window: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two trajectories and the decay of their difference.
    Twin {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resolution thresholds N and h.
    Thresholds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs a named acceptance pipeline.
    Pipeline {
        name: String,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

enum Failure {
    Usage(String),
    Criterion(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_)
            | Error::ConfigSyntax { .. }
            | Error::UnknownKey { .. }
            | Error::DuplicateKey { .. }
            | Error::ConfigValue { .. }
            | Error::UnknownPipeline(_)
            | Error::Io(_)
            | Error::Csv(_) => Failure::Usage(e.to_string()),
            other => Failure::Criterion(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Criterion(m)) => {
            eprintln!("failed: {m}");
            ExitCode::from(1)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_table(path: &Path, table: &Table, settings: &[(&str, String)], seed: u64) -> Result<(), Failure> {
    let mut header = header_lines(&settings_hash(settings), seed);
    for (k, v) in settings {
        header.push_str(&format!("# {k} = {v}\n"));
    }
    table.write(create(path)?, &header)?;
    Ok(())
}

fn load_config(command: &str, path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_config(command, &text)?)
}

fn dim_of(s: &str) -> usize {
    s.parse().expect("validated by clap")
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::MeshStudy { dim, n, refinements, out, mesh_out } => {
            let (table, mesh) = mesh_study(dim_of(&dim), n, refinements)?;
            let settings = [("dim", dim), ("n", n.to_string()), ("refinements", refinements.to_string())];
            write_table(&out, &table, &settings, 0)?;
            if let Some(p) = mesh_out {
                let mut w = create(&p)?;
                write_mesh_text(&mesh, &mut w)?;
                w.flush()?;
            }
        }
        Command::SzConvergence { dim, field, levels, out } => {
            let (table, slope) = sz_convergence(dim_of(&dim), TestField::parse(&field)?, levels)?;
            let settings = [("dim", dim), ("field", field), ("levels", levels.to_string())];
            write_table(&out, &table, &settings, 0)?;
            println!("fitted slope {slope:.4}");
        }
        Command::FormsVerify { dim, samples, seed, out } => {
            let (table, worst) = forms_verify(dim_of(&dim), samples, seed)?;
            let settings = [("dim", dim), ("samples", samples.to_string()), ("seed", seed.to_string())];
            write_table(&out, &table, &settings, seed)?;
            println!("max ratio {worst:e}");
            if worst > 1.0 + 1e-9 {
                return Err(Failure::Criterion(format!("ratio {worst} exceeds 1")));
            }
        }
        Command::Simulate { config, out, checkpoint_dir } => {
            let cfg = load_config("simulate", &config)?;
            let mut sim = cfg.simulation()?;
            if checkpoint_dir.is_some() {
                sim.checkpoint_every = Some(cfg.usize("checkpoint_every")?);
            }
            let rec = simulate(&sim)?;
            write_with_header(create(&out)?, &cfg.header(), |w| rec.write_csv(w))?;
            if let Some(dir) = checkpoint_dir {
                std::fs::create_dir_all(&dir)?;
                for (i, (_, u)) in rec.checkpoints.iter().enumerate() {
                    let mut w = create(&dir.join(format!("checkpoint_{i:05}.txt")))?;
                    write_checkpoint(u, &mut w)?;
                    w.flush()?;
                }
            }
        }
        Command::GronwallDemo { case, seed, input, window, out } => {
            let (demo, settings) = match (&case, &input) {
                (_, Some(p)) => {
                    let w = window.unwrap_or(1.0);
                    let demo = gronwall_from_csv(File::open(p)?, w)?;
                    (demo, vec![("input", p.display().to_string()), ("window", w.to_string())])
                }
                (Some(c), None) => {
                    let demo = gronwall_demo(c, seed, window)?;
                    let w = demo.report.window;
                    (demo, vec![("case", c.clone()), ("seed", seed.to_string()), ("window", w.to_string())])
                }
                (None, None) => unreachable!("enforced by clap"),
            };
            write_table(&out, &demo.table, &settings, seed)?;
            let r = &demo.report;
            println!(
                "m {:e}, M {:e}, beta+ limit {:e}, hypotheses {}, envelope final max {:e}",
                r.m,
                r.big_m,
                r.beta_plus_limit,
                if r.hypotheses_met.all() { "met" } else { "not met" },
                demo.envelope.final_max
            );
            if let Some(o) = &demo.observed {
                println!("observed y final max {:e} (tol {:e})", o.final_max, o.tol);
            }
            if !demo.consistent() {
                return Err(Failure::Criterion("hypotheses hold but the series does not decay".into()));
            }
        }
        Command::Twin { config, out } => {
            let cfg = load_config("twin", &config)?;
            let diag = twin_experiment(&cfg.twin()?)?;
            let check = verify_differential_inequality(&diag, ToleranceModel { c: cfg.f64("tol_c")? })?;
            let header = format!("{}# c1_used = {}\n", cfg.header(), diag.c1);
            write_with_header(create(&out)?, &header, |w| diag.write_csv(w))?;
            println!(
                "C1 {:.4}, split max ratio {:.4} ({} violations), residual violations {}",
                diag.c1, check.split_max_ratio, check.split_violations, check.residual_violations
            );
            if !check.passed() {
                return Err(Failure::Criterion("differential inequality check failed".into()));
            }
        }
        Command::Thresholds { config, out } => {
            let cfg = load_config("thresholds", &config)?;
            let table = thresholds_table(&cfg)?;
            table.write(create(&out)?, &cfg.header())?;
        }
        Command::Pipeline { name, out_dir, seed } => {
            if !PIPELINES.contains(&name.as_str()) {
                return Err(Failure::Usage(format!(
                    "unknown pipeline `{name}` (one of {})",
                    PIPELINES.join(", ")
                )));
            }
            let report = run_pipeline(&name, seed)?;
            report.write_tables(&out_dir)?;
            for c in &report.criteria {
                println!("{c}");
            }
            if !report.passed() {
                return Err(Failure::Criterion(format!("pipeline {name} has failing criteria")));
            }
        }
    }
    Ok(())
}
