//! One function per subcommand. Each returns the artifacts to write.

use std::path::{Path, PathBuf};

use serde_json::json;
use torhom::homog::{effective_grid, CellParams, CellScheme, EffectiveMethod, PGrid};
use torhom::inverse::{bs_reconstruct, make_pair, theorem2_check, user_pair, weyl_first_invariant, TransformSpec, DEFAULT_HBARS};
use torhom::io::{fmt_e12, Csv};
use torhom::planewave::{auto_cutoff, spectrum, weyl_count, CutoffRule};
use torhom::semiclassics::{egorov_scaling, EgorovCutoff};
use torhom::{cell_problem_solve, potential_extrema, Error, FourierPotential, PhaseSpaceFunction};

use crate::config::{Cutoff, RunConfig};

/// Largest automatic cutoff in dimension ≥ 2, where the dense basis has `(2K+1)^n` modes.
pub const AUTO_CUTOFF_CAP_2D: usize = 12;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { code: 2, kind: "validation", message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError { code: 3, kind: "numerical", message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::numerical(e.to_string())
        } else {
            CliError::validation(e.to_string())
        }
    }
}

impl From<String> for CliError {
    fn from(s: String) -> Self {
        CliError::validation(s)
    }
}

/// Files to write plus the inputs that were read.
#[derive(Default)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub inputs: Vec<PathBuf>,
    /// 3 when a table was produced but failed its validity checks.
    pub exit_code: i32,
}

impl Outcome {
    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn json(&mut self, name: &str, value: &impl serde::Serialize) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::validation(e.to_string()))?;
        s.push('\n');
        self.file(name, s);
        Ok(())
    }
}

fn load_potential(path: &Path, out: &mut Outcome) -> Result<FourierPotential, CliError> {
    out.inputs.push(path.to_path_buf());
    FourierPotential::load(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn require_potential(cfg: &RunConfig, out: &mut Outcome) -> Result<FourierPotential, CliError> {
    let path = cfg
        .potential
        .as_ref()
        .ok_or_else(|| CliError::validation(format!("{} needs --potential", cfg.subcommand)))?;
    load_potential(path, out)
}

fn spectral_cutoff(cfg: &RunConfig, pot: &FourierPotential, hbar: f64, energy: f64) -> usize {
    match cfg.cutoff {
        Cutoff::Fixed(k) => k,
        Cutoff::Auto if pot.dim() == 1 => auto_cutoff(pot, hbar, energy),
        Cutoff::Auto => auto_cutoff(pot, hbar, energy).min(AUTO_CUTOFF_CAP_2D.max(pot.bandwidth())),
    }
}

fn cell_params(cfg: &RunConfig) -> Result<CellParams, CliError> {
    let scheme = match cfg.scheme.as_str() {
        "godunov" => CellScheme::Godunov,
        "lax-friedrichs" => CellScheme::LaxFriedrichs,
        other => return Err(CliError::validation(format!("unknown scheme '{other}'"))),
    };
    Ok(CellParams { grid: cfg.grid, scheme, seed: cfg.seed, ..CellParams::default() })
}

pub fn spectrum_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let pot = require_potential(cfg, &mut out)?;
    let energy = cfg.energy.unwrap_or(5.0);
    let mut csv = Csv::new(&["hbar", "K", "index", "eigenvalue", "residual"]);
    let mut meta = Vec::new();
    for h in cfg.hbars_or(&[1.0]) {
        let k = spectral_cutoff(cfg, &pot, h, energy);
        let s = spectrum(&pot, h, k)?;
        for (i, (e, r)) in s.eigenvalues.iter().zip(&s.residuals).enumerate() {
            csv.row([fmt_e12(h), k.to_string(), i.to_string(), fmt_e12(*e), fmt_e12(*r)]);
        }
        meta.push(json!({
            "hbar": h,
            "K": k,
            "size": s.len(),
            "trusted_energy": s.trusted_energy,
            "tail_bound": s.tail_bound,
        }));
    }
    out.file("spectrum.csv", csv.finish());
    out.json("spectrum.json", &meta)?;
    Ok(out)
}

pub fn weyl_count_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let pot = require_potential(cfg, &mut out)?;
    let e = cfg.energy.unwrap_or(2.0);
    let hbars = cfg.hbars_or(&[0.2, 0.1, 0.05, 0.025]);
    let min_v = potential_extrema(&pot, 256)?.min_v;
    let rule = match cfg.cutoff {
        Cutoff::Fixed(k) => CutoffRule::Fixed(k),
        Cutoff::Auto => CutoffRule::Auto { energy: e + 1.0 },
    };
    let report = weyl_count(&pot, &hbars, (min_v - 1e-9, e), rule, cfg.samples, cfg.seed)?;
    let mut csv = Csv::new(&["hbar", "K", "count", "scaled_count", "volume", "trusted"]);
    for i in 0..report.hbar.len() {
        csv.row([
            fmt_e12(report.hbar[i]),
            report.cutoffs[i].to_string(),
            report.counts[i].to_string(),
            fmt_e12(report.scaled_counts[i]),
            fmt_e12(report.volume),
            report.trusted[i].to_string(),
        ]);
    }
    let first_invariant = if pot.dim() == 1 && hbars.len() >= 3 {
        let specs = hbars
            .iter()
            .zip(&report.cutoffs)
            .map(|(&h, &k)| spectrum(&pot, h, k))
            .collect::<Result<Vec<_>, _>>()?;
        weyl_first_invariant(&specs, e).ok()
    } else {
        None
    };
    out.file("weyl_count.csv", csv.finish());
    out.json(
        "weyl_count.json",
        &json!({
            "report": report,
            "remainder_constant": report.remainder_constant(),
            "first_invariant": first_invariant,
        }),
    )?;
    Ok(out)
}

pub fn effective_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let pot = require_potential(cfg, &mut out)?;
    let method = match cfg.method.as_deref() {
        None if pot.dim() == 1 => EffectiveMethod::ClosedForm,
        None => EffectiveMethod::CellProblem,
        Some("closed-form") => EffectiveMethod::ClosedForm,
        Some("cell-problem") => EffectiveMethod::CellProblem,
        Some("inf-sup-upper") => EffectiveMethod::InfSupUpper,
        Some(other) => return Err(CliError::validation(format!("unknown method '{other}'"))),
    };
    let grid = PGrid { pmax: cfg.pmax, dp: cfg.dp };
    let table = effective_grid(&PhaseSpaceFunction::mechanical(&pot), grid, method, &cell_params(cfg)?)?;
    out.file("effective.csv", table.to_csv());
    let mut cert = table.certificates_json();
    cert["valid"] = json!(table.valid);
    cert["hold"] = json!(table.certificates.hold());
    out.json("certificates.json", &cert)?;
    if !table.valid || !table.certificates.hold() {
        out.exit_code = 3;
    }
    Ok(out)
}

pub fn cell_solve_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let pot = require_potential(cfg, &mut out)?;
    let n = pot.dim();
    let p = cfg.p.clone().unwrap_or_else(|| vec![0.0; n]);
    if p.len() != n {
        return Err(CliError::validation(format!("--p needs {n} components, got {}", p.len())));
    }
    let sol = cell_problem_solve(&PhaseSpaceFunction::mechanical(&pot), &p, &cell_params(cfg)?)?;
    let g = sol.corrector.grid;
    let mut header: Vec<String> = if n == 1 { vec!["x".into()] } else { (1..=n).map(|i| format!("x_{i}")).collect() };
    header.push("u".into());
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&refs);
    let dx = std::f64::consts::TAU / g as f64;
    for (flat, u) in sol.corrector.values.iter().enumerate() {
        let mut idx = vec![0usize; n];
        let mut rem = flat;
        for v in idx.iter_mut().rev() {
            *v = rem % g;
            rem /= g;
        }
        let mut row: Vec<String> = idx.iter().map(|&i| fmt_e12(i as f64 * dx)).collect();
        row.push(fmt_e12(*u));
        csv.row(row);
    }
    out.file("corrector.csv", csv.finish());
    out.json(
        "cell.json",
        &json!({
            "P": p,
            "hbar_eff": sol.hbar_eff,
            "residual": sol.corrector.residual,
            "iterations": sol.iterations,
            "discounted": sol.discounted,
        }),
    )?;
    Ok(out)
}

pub fn egorov_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let pot = require_potential(cfg, &mut out)?;
    let obs = match &cfg.observable {
        Some(path) => load_potential(path, &mut out)?,
        None => FourierPotential::cosine(pot.dim(), 0, 1.0),
    };
    if obs.dim() != pot.dim() {
        return Err(CliError::validation("observable and generator dimensions differ"));
    }
    let b = PhaseSpaceFunction::mechanical(&pot);
    let a = PhaseSpaceFunction::trig_bump(&obs, 1.0)?;
    let rule = match cfg.cutoff {
        Cutoff::Fixed(k) => EgorovCutoff::Fixed(k),
        Cutoff::Auto => EgorovCutoff::default(),
    };
    let hbars = cfg.hbars_or(&[0.2, 0.1, 0.05, 0.025]);
    let report = egorov_scaling(&a, &b, cfg.t, &hbars, rule, cfg.step)?;
    let mut csv = Csv::new(&["hbar", "K", "residual"]);
    for i in 0..report.hbar.len() {
        csv.row([fmt_e12(report.hbar[i]), report.cutoffs[i].to_string(), fmt_e12(report.residual[i])]);
    }
    out.file("egorov.csv", csv.finish());
    out.json("egorov.json", &report)?;
    Ok(out)
}

pub fn isospectral_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let spec = cfg
        .pair
        .as_ref()
        .ok_or_else(|| CliError::validation("isospectral-check needs --pair PATH:TRANSFORM"))?;
    let (path, rest) = spec
        .split_once(':')
        .ok_or_else(|| CliError::validation(format!("--pair expects PATH:TRANSFORM, got '{spec}'")))?;
    let pot = load_potential(Path::new(path), &mut out)?;
    let pair = match rest.parse::<TransformSpec>() {
        Ok(t) => make_pair(&pot, &t)?,
        Err(_) if Path::new(rest).is_file() => {
            let other = load_potential(Path::new(rest), &mut out)?;
            user_pair(&pot, &other)?
        }
        Err(e) => return Err(e.into()),
    };
    let n = pot.dim();
    let max_v = potential_extrema(&pair.pot1, 256)?.max_v;
    let emax = cfg.emax.unwrap_or(0.5 * n as f64 * cfg.pmax * cfg.pmax + max_v + 1.0);
    let energy = cfg.energy.unwrap_or(emax);
    let rule = match cfg.cutoff {
        Cutoff::Fixed(k) => CutoffRule::Fixed(k),
        Cutoff::Auto if n == 1 => CutoffRule::Auto { energy },
        Cutoff::Auto => CutoffRule::Fixed(AUTO_CUTOFF_CAP_2D.max(pot.bandwidth())),
    };
    if !pair.hypothesis_verified {
        out.json(
            "theorem2.json",
            &json!({
                "verdict": "fail",
                "hypothesis": "unverified",
                "probe_distance": pair.probe_distance,
            }),
        )?;
        return Ok(out);
    }
    let grid = PGrid { pmax: cfg.pmax, dp: cfg.dp };
    let report = theorem2_check(&pair, &cfg.hbars_or(&DEFAULT_HBARS), rule, grid, emax, &cell_params(cfg)?)?;
    out.json("theorem2.json", &report)?;
    Ok(out)
}

pub fn bs_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let pot = require_potential(cfg, &mut out)?;
    if pot.dim() != 1 {
        return Err(CliError::validation("bs-reconstruct is one-dimensional"));
    }
    let hbars = cfg.hbars_or(&[0.1]);
    let [h] = hbars[..] else {
        return Err(CliError::validation("bs-reconstruct takes a single --hbar"));
    };
    let k = spectral_cutoff(cfg, &pot, h, cfg.energy.unwrap_or(4.0));
    let csv = bs_reconstruct(&pot, &spectrum(&pot, h, k)?, cfg.mu)?.to_csv();
    out.file("bs.csv", csv);
    Ok(out)
}
