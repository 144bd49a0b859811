//! Run configuration: command-line flags layered over an optional JSON file.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

/// A list given either as a JSON array or as comma-separated text.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ListArg {
    List(Vec<f64>),
    One(f64),
    Text(String),
}

impl ListArg {
    fn values(&self, what: &str) -> Result<Vec<f64>, String> {
        match self {
            ListArg::List(v) => Ok(v.clone()),
            ListArg::One(v) => Ok(vec![*v]),
            ListArg::Text(s) => parse_list(s, what),
        }
    }
}

/// `K` as an integer or the word `auto`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum CutoffArg {
    Int(usize),
    Text(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Cutoff {
    Auto,
    Fixed(usize),
}

fn parse_cutoff(s: &str) -> Result<Cutoff, String> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("auto") {
        return Ok(Cutoff::Auto);
    }
    t.parse::<usize>()
        .map(Cutoff::Fixed)
        .map_err(|_| format!("--K expects an integer or 'auto', got '{s}'"))
}

pub fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("cannot parse {what} value '{v}'"))
        })
        .collect()
}

/// Flags shared by every subcommand. Each one overrides the same key of `--config`.
#[derive(Args, Clone, Debug, Default)]
pub struct Flags {
    /// JSON file with any of the keys below; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Potential file `{"dim": n, "coeffs": [{"q": [..], "re": r, "im": s}]}`.
    #[arg(long, global = true)]
    pub potential: Option<PathBuf>,
    /// `PATH:TRANSFORM` (e.g. `cosx.json:translate=pi`) or `PATH1:PATH2`.
    #[arg(long, global = true)]
    pub pair: Option<String>,
    /// Potential `a(x)` of the Egorov observable `a(x)·bump(|η|)`.
    #[arg(long, global = true)]
    pub observable: Option<PathBuf>,
    /// Comma-separated list of ħ values in (0, 1].
    #[arg(long, global = true)]
    pub hbar: Option<String>,
    /// Plane-wave cutoff: an integer or `auto`.
    #[arg(long = "K", global = true)]
    pub k: Option<String>,
    /// Energy for the automatic cutoff, or the top of the counting window.
    #[arg(long, global = true)]
    pub energy: Option<f64>,
    #[arg(long, global = true)]
    pub pmax: Option<f64>,
    #[arg(long, global = true)]
    pub dp: Option<f64>,
    /// Cell-problem nodes per axis.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Momentum vector for `cell-solve`, comma-separated.
    #[arg(long, global = true)]
    pub p: Option<String>,
    /// Maslov integer of the Bohr–Sommerfeld labels.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu: Option<i64>,
    /// closed-form | cell-problem | inf-sup-upper
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// godunov | lax-friedrichs
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// Egorov time.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t: Option<f64>,
    /// Flow step.
    #[arg(long, global = true)]
    pub step: Option<f64>,
    /// Energy level bounding the P grid in `isospectral-check`.
    #[arg(long, global = true)]
    pub emax: Option<f64>,
    /// Monte Carlo samples of the phase-space volume.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Worker threads (default: number of processors).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

/// Contents of a `--config` file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub potential: Option<PathBuf>,
    pub pair: Option<String>,
    pub observable: Option<PathBuf>,
    pub hbar: Option<ListArg>,
    #[serde(rename = "K")]
    pub k: Option<CutoffArg>,
    pub energy: Option<f64>,
    pub pmax: Option<f64>,
    pub dp: Option<f64>,
    pub grid: Option<usize>,
    pub p: Option<ListArg>,
    pub mu: Option<i64>,
    pub method: Option<String>,
    pub scheme: Option<String>,
    pub t: Option<f64>,
    pub step: Option<f64>,
    pub emax: Option<f64>,
    pub samples: Option<usize>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Fully merged configuration. Fields left `None` take per-subcommand defaults.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub potential: Option<PathBuf>,
    pub pair: Option<String>,
    pub observable: Option<PathBuf>,
    pub hbar: Option<Vec<f64>>,
    pub cutoff: Cutoff,
    pub energy: Option<f64>,
    pub pmax: f64,
    pub dp: f64,
    pub grid: usize,
    pub p: Option<Vec<f64>>,
    pub mu: i64,
    pub method: Option<String>,
    pub scheme: String,
    pub t: f64,
    pub step: f64,
    pub emax: Option<f64>,
    pub samples: usize,
    #[serde(skip)]
    pub jobs: Option<usize>,
    #[serde(skip)]
    pub out: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    pub fn merge(subcommand: &str, flags: Flags, file: FileConfig) -> Result<Self, String> {
        let hbar = match flags.hbar {
            Some(s) => Some(parse_list(&s, "hbar")?),
            None => file.hbar.map(|l| l.values("hbar")).transpose()?,
        };
        let p = match flags.p {
            Some(s) => Some(parse_list(&s, "p")?),
            None => file.p.map(|l| l.values("p")).transpose()?,
        };
        let cutoff = match (flags.k, file.k) {
            (Some(s), _) => parse_cutoff(&s)?,
            (None, Some(CutoffArg::Int(k))) => Cutoff::Fixed(k),
            (None, Some(CutoffArg::Text(s))) => parse_cutoff(&s)?,
            (None, None) => Cutoff::Auto,
        };
        let cfg = RunConfig {
            subcommand: subcommand.to_string(),
            potential: flags.potential.or(file.potential),
            pair: flags.pair.or(file.pair),
            observable: flags.observable.or(file.observable),
            hbar,
            cutoff,
            energy: flags.energy.or(file.energy),
            pmax: flags.pmax.or(file.pmax).unwrap_or(3.0),
            dp: flags.dp.or(file.dp).unwrap_or(0.25),
            grid: flags.grid.or(file.grid).unwrap_or(64),
            p,
            mu: flags.mu.or(file.mu).unwrap_or(0),
            method: flags.method.or(file.method),
            scheme: flags.scheme.or(file.scheme).unwrap_or_else(|| "godunov".into()),
            t: flags.t.or(file.t).unwrap_or(1.0),
            step: flags.step.or(file.step).unwrap_or(1e-3),
            emax: flags.emax.or(file.emax),
            samples: flags.samples.or(file.samples).unwrap_or(200_000),
            jobs: flags.jobs.or(file.jobs),
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            seed: flags.seed.or(file.seed).unwrap_or(42),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if let Some(h) = &self.hbar {
            if h.is_empty() {
                return Err("--hbar needs at least one value".into());
            }
            if let Some(bad) = h.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
                return Err(format!("hbar values must lie in (0, 1], got {bad}"));
            }
        }
        let positive = [("dp", self.dp), ("step", self.step)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("--{name} must be positive, got {v}"));
            }
        }
        if !(self.pmax >= 0.0 && self.pmax.is_finite()) {
            return Err(format!("--pmax must be non-negative, got {}", self.pmax));
        }
        if !self.t.is_finite() {
            return Err("--t must be finite".into());
        }
        if self.jobs == Some(0) {
            return Err("--jobs must be at least 1".into());
        }
        if let Some(p) = &self.p {
            if p.iter().any(|v| !v.is_finite()) {
                return Err("--p values must be finite".into());
            }
        }
        Ok(())
    }

    pub fn hbars_or(&self, default: &[f64]) -> Vec<f64> {
        self.hbar.clone().unwrap_or_else(|| default.to_vec())
    }
}
