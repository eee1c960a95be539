//! `key = value` run configuration with per-command schemas, and the CSV
//! header block that records a resolved configuration.

use std::collections::BTreeMap;
use std::io::Write;

use sha2::{Digest, Sha256};

use crate::determining::{DecayingMode, TwinConfig};
use crate::error::{Error, Result};
use crate::nse2d::{Forcing, InitialCondition, SimulationConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `(key, default, meaning)`.
pub type Schema = &'static [(&'static str, &'static str, &'static str)];

const SIMULATE: Schema = &[
    ("nu", "0.1", "kinematic viscosity"),
    ("M", "64", "grid points per axis"),
    ("length", "6.283185307179586", "side of the periodic box"),
    ("dt", "0.001", "time step"),
    ("t_end", "1.0", "final time"),
    ("record_stride", "10", "steps between records"),
    ("adaptive", "true", "split steps that would violate the CFL bound"),
    ("forcing.kind", "zero", "zero | kolmogorov | single_mode"),
    ("forcing.amplitude", "1.0", "forcing amplitude"),
    ("forcing.k", "1", "wavenumber: `k` for kolmogorov, `kx,ky` for single_mode"),
    ("init.kind", "taylor_green", "zero | taylor_green | random | steady | perturbed_steady"),
    ("init.amplitude", "1.0", "amplitude, or L2 norm for random kinds"),
    ("init.kmax", "8", "band limit for random kinds"),
    ("seed", "0", "seed for random initial data"),
    ("checkpoint_every", "10", "records between checkpoints when a checkpoint directory is given"),
];

const TWIN: Schema = &[
    ("nu", "1.0", "kinematic viscosity"),
    ("M", "64", "grid points per axis"),
    ("length", "6.283185307179586", "side of the periodic box"),
    ("dt", "0.005", "time step"),
    ("t_end", "20.0", "final time"),
    ("record_stride", "2", "steps between records"),
    ("adaptive", "true", "split steps that would violate the CFL bound"),
    ("forcing.kind", "kolmogorov", "forcing f of the reference run"),
    ("forcing.amplitude", "0.2", "forcing amplitude"),
    ("forcing.k", "1", "forcing wavenumber"),
    ("init.kind", "steady", "initial data u0"),
    ("init.amplitude", "1.0", "amplitude, or L2 norm for random kinds"),
    ("init.kmax", "8", "band limit for random kinds"),
    ("seed", "0", "seed for random u0"),
    ("v.kind", "perturbed_steady", "initial data v0"),
    ("v.amplitude", "1.0", "amplitude, or L2 norm of the perturbation"),
    ("v.kmax", "16", "band limit of the perturbation"),
    ("v.seed", "7", "seed for the perturbation"),
    ("g.amplitude", "0", "amplitude of the decaying mode in g - f (0 disables)"),
    ("g.k", "1,1", "wavevector of the decaying mode"),
    ("g.rate", "1.0", "decay rate of the mode"),
    ("mesh_n", "8", "cells per side of the triangulation"),
    ("gamma", "0.5", "approximation exponent"),
    ("c1", "0", "approximation constant (0 estimates it from the corpus)"),
    ("corpus_seed", "1", "seed of the C1 corpus"),
    ("tol_c", "10", "factor of the residual tolerance c * dt_record * scale"),
];

const THRESHOLDS: Schema = &[
    ("nu", "1.0", "kinematic viscosity"),
    ("F", "1.0", "limsup of the forcing V' norm"),
    ("lambda1", "1.0", "first Stokes eigenvalue"),
    ("c1", "1.0", "approximation constant"),
    ("series", "", "CSV with a grad_linf column for the 3D criterion (empty: skip)"),
    ("t_grid", "1,2,4", "window lengths for the 3D criterion"),
    ("mesh.n0", "2", "cells per side of the coarsest bracket mesh"),
    ("mesh.levels", "4", "refinement levels of the bracket family"),
];

pub fn schema(command: &str) -> Option<Schema> {
    match command {
        "simulate" => Some(SIMULATE),
        "twin" => Some(TWIN),
        "thresholds" => Some(THRESHOLDS),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    /// Resolved values: explicit settings over schema defaults.
    values: BTreeMap<String, String>,
    explicit: BTreeMap<String, usize>,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(command: &str, text: &str) -> Result<RunConfig> {
    let schema = schema(command).ok_or_else(|| Error::UnknownPipeline(command.to_string()))?;
    let mut values: BTreeMap<String, String> =
        schema.iter().map(|(k, d, _)| (k.to_string(), d.to_string())).collect();
    let mut explicit = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::ConfigSyntax {
                line: line_no,
                message: "empty key".into(),
            });
        }
        if !values.contains_key(key) {
            return Err(Error::UnknownKey {
                key: key.to_string(),
                line: line_no,
            });
        }
        if explicit.insert(key.to_string(), line_no).is_some() {
            return Err(Error::DuplicateKey {
                key: key.to_string(),
                line: line_no,
            });
        }
        values.insert(key.to_string(), value.to_string());
    }
    Ok(RunConfig {
        command: command.to_string(),
        values,
        explicit,
    })
}

impl RunConfig {
    pub fn defaults(command: &str) -> Result<Self> {
        parse_config(command, "")
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("`{key}` is not in the {} schema", self.command))
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains_key(key)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, expected: &'static str) -> Result<T> {
        let v = self.raw(key);
        v.parse().map_err(|_| Error::ConfigValue {
            key: key.to_string(),
            value: v.to_string(),
            expected,
        })
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.parse(key, "a number")
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.parse(key, "a nonnegative integer")
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.parse(key, "a nonnegative integer")
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        self.parse(key, "true or false")
    }

    pub fn str(&self, key: &str) -> &str {
        self.raw(key)
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.list(key, "a comma-separated list of numbers")
    }

    fn list<T: std::str::FromStr>(&self, key: &str, expected: &'static str) -> Result<Vec<T>> {
        let v = self.raw(key);
        v.split(',')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<Vec<T>, _>>()
            .map_err(|_| Error::ConfigValue {
                key: key.to_string(),
                value: v.to_string(),
                expected,
            })
    }

    /// The `seed` key, or 0 for schemas without one.
    pub fn seed(&self) -> u64 {
        if self.values.contains_key("seed") {
            self.u64("seed").unwrap_or(0)
        } else {
            0
        }
    }

    /// Canonical `key = value` lines of the resolved configuration.
    pub fn canonical(&self) -> String {
        let mut s = format!("command = {}\n", self.command);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn header(&self) -> String {
        let mut h = header_lines(&self.hash(), self.seed());
        for line in self.canonical().lines() {
            h.push_str(&format!("# {line}\n"));
        }
        h
    }

    pub fn wavevector(&self, key: &str) -> Result<[i64; 2]> {
        let parts: Vec<i64> = self.list(key, "an integer or `kx,ky`")?;
        match parts.as_slice() {
            [k] => Ok([*k, 0]),
            [kx, ky] => Ok([*kx, *ky]),
            _ => Err(Error::ConfigValue {
                key: key.to_string(),
                value: self.raw(key).to_string(),
                expected: "an integer or `kx,ky`",
            }),
        }
    }

    fn forcing(&self) -> Result<Forcing> {
        let amplitude = self.f64("forcing.amplitude")?;
        match self.str("forcing.kind") {
            "zero" => Ok(Forcing::Zero),
            "kolmogorov" => Ok(Forcing::Kolmogorov {
                amplitude,
                k: self.wavevector("forcing.k")?[0],
            }),
            "single_mode" => Ok(Forcing::SingleMode {
                amplitude,
                k: self.wavevector("forcing.k")?,
            }),
            other => Err(Error::ConfigValue {
                key: "forcing.kind".into(),
                value: other.into(),
                expected: "zero, kolmogorov or single_mode",
            }),
        }
    }

    fn initial(&self, prefix: &str, seed_key: &str) -> Result<InitialCondition> {
        let kind_key = format!("{prefix}.kind");
        let amplitude = self.f64(&format!("{prefix}.amplitude"))?;
        let kmax = self.f64(&format!("{prefix}.kmax"))?;
        let seed = self.u64(seed_key)?;
        match self.str(&kind_key) {
            "zero" => Ok(InitialCondition::Zero),
            "taylor_green" => Ok(InitialCondition::TaylorGreen { amplitude }),
            "random" => Ok(InitialCondition::Random { kmax, l2: amplitude, seed }),
            "steady" => Ok(InitialCondition::Steady),
            "perturbed_steady" => Ok(InitialCondition::PerturbedSteady { kmax, l2: amplitude, seed }),
            other => Err(Error::ConfigValue {
                key: kind_key,
                value: other.into(),
                expected: "zero, taylor_green, random, steady or perturbed_steady",
            }),
        }
    }

    /// Simulation settings (valid for `simulate` and `twin`).
    pub fn simulation(&self) -> Result<SimulationConfig> {
        let cfg = SimulationConfig {
            nu: self.f64("nu")?,
            m: self.usize("M")?,
            length: self.f64("length")?,
            dt: self.f64("dt")?,
            t_end: self.f64("t_end")?,
            record_stride: self.usize("record_stride")?,
            forcing: self.forcing()?,
            init: self.initial("init", "seed")?,
            adaptive: self.bool("adaptive")?,
            checkpoint_every: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn twin(&self) -> Result<TwinConfig> {
        let g_amp = self.f64("g.amplitude")?;
        let c1 = self.f64("c1")?;
        Ok(TwinConfig {
            base: self.simulation()?,
            v_init: self.initial("v", "v.seed")?,
            difference: if g_amp != 0.0 {
                Some(DecayingMode {
                    amplitude: g_amp,
                    k: self.wavevector("g.k")?,
                    rate: self.f64("g.rate")?,
                })
            } else {
                None
            },
            mesh_n: self.usize("mesh_n")?,
            gamma: self.f64("gamma")?,
            c1: if c1 > 0.0 { Some(c1) } else { None },
            corpus_seed: self.u64("corpus_seed")?,
        })
    }
}

/// Version, config hash and seed as `#` comment lines.
pub fn header_lines(config_hash: &str, seed: u64) -> String {
    format!("# szdet {VERSION}\n# config_sha256 {config_hash}\n# seed {seed}\n")
}

/// Hash of free-form settings (used by flag-driven commands).
pub fn settings_hash(settings: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in settings {
        s.push_str(&format!("{k} = {v}\n"));
    }
    hex::encode(Sha256::digest(s.as_bytes()))
}

/// Writes the header block then the CSV body produced by `body`.
pub fn write_with_header<W: Write>(
    mut out: W,
    header: &str,
    body: impl FnOnce(&mut W) -> Result<()>,
) -> Result<()> {
    out.write_all(header.as_bytes())?;
    body(&mut out)?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn typed_accessors() {
        let c = parse_config("simulate", "nu = 0.1\n# comment\n  M=32  # trailing\n").unwrap();
        assert_eq!(c.f64("nu").unwrap(), 0.1);
        assert_eq!(c.usize("M").unwrap(), 32);
        assert!(c.is_explicit("nu"));
        assert!(!c.is_explicit("dt"));
        assert_eq!(c.f64("dt").unwrap(), 0.001);
    }

    #[test]
    fn errors_name_the_problem() {
        match parse_config("simulate", "nuu = 0.1") {
            Err(Error::UnknownKey { key, line }) => {
                assert_eq!(key, "nuu");
                assert_eq!(line, 1);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_config("simulate", "nu = 1\nnu = 2"),
            Err(Error::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("simulate", "\n\njust words"),
            Err(Error::ConfigSyntax { line: 3, .. })
        ));
        let c = parse_config("simulate", "nu = fast").unwrap();
        assert!(matches!(c.f64("nu"), Err(Error::ConfigValue { .. })));
        assert!(parse_config("nonsense", "").is_err());
    }

    #[test]
    fn empty_file_gives_defaults_in_header() {
        let c = parse_config("simulate", "").unwrap();
        let h = c.header();
        assert!(h.starts_with("# szdet "));
        assert!(h.contains("# config_sha256 "));
        assert!(h.contains("# seed 0"));
        assert!(h.contains("# nu = 0.1"));
        assert_eq!(c.hash(), parse_config("simulate", "nu = 0.1").unwrap().hash());
        assert_ne!(c.hash(), parse_config("simulate", "nu = 0.2").unwrap().hash());
    }

    #[test]
    fn builds_typed_configs() {
        let c = parse_config(
            "simulate",
            "forcing.kind = single_mode\nforcing.k = 2,1\ninit.kind = random\nseed = 4",
        )
        .unwrap();
        let s = c.simulation().unwrap();
        assert_eq!(s.forcing, Forcing::SingleMode { amplitude: 1.0, k: [2, 1] });
        assert_eq!(s.init, InitialCondition::Random { kmax: 8.0, l2: 1.0, seed: 4 });
        let t = RunConfig::defaults("twin").unwrap().twin().unwrap();
        assert_eq!(t, TwinConfig::default());
    }
}
