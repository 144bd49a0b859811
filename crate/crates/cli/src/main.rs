//! `torhom`: batch front-end for spectra, Weyl counts, effective
//! Hamiltonians, Egorov residuals and isospectral checks.

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use commands::{CliError, Outcome};
use config::{FileConfig, Flags, RunConfig};

#[derive(Parser)]
#[command(name = "torhom", version, about = "Periodic Schrödinger spectra and effective Hamiltonians on the flat torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Eigenvalues of −½ħ²Δ + V per ħ.
    Spectrum,
    /// Eigenvalue counts against the phase-space volume.
    WeylCount,
    /// Effective Hamiltonian table on a symmetric P grid.
    Effective,
    /// One cell problem at the momentum given by --p.
    CellSolve,
    /// Egorov residuals for the generator ½|η|² + V.
    Egorov,
    /// Spectra and effective Hamiltonians of a pair of potentials.
    IsospectralCheck,
    /// Bohr–Sommerfeld reconstruction of H̄ from a 1D spectrum.
    BsReconstruct,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::WeylCount => "weyl-count",
            Command::Effective => "effective",
            Command::CellSolve => "cell-solve",
            Command::Egorov => "egorov",
            Command::IsospectralCheck => "isospectral-check",
            Command::BsReconstruct => "bs-reconstruct",
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn inputs_hash(cfg: &RunConfig, inputs: &[PathBuf]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cfg).unwrap_or_default());
    for path in inputs {
        h.update(path.to_string_lossy().as_bytes());
        h.update(fs::read(path).unwrap_or_default());
    }
    hex(&h.finalize())
}

fn error_json(err: &CliError) -> serde_json::Value {
    json!({ "error": err.message, "kind": err.kind, "exit_code": err.code })
}

/// Reports a failure on stderr and, when the output directory is known, in `error.json`.
fn fail(err: CliError, out: Option<&Path>) -> ExitCode {
    let body = error_json(&err);
    eprintln!("error: {}", err.message);
    eprintln!("{body}");
    if let Some(dir) = out {
        if fs::create_dir_all(dir).is_ok() {
            let _ = fs::write(dir.join("error.json"), format!("{body:#}\n"));
        }
    }
    ExitCode::from(err.code as u8)
}

/// `--out` as written on the command line, for failures before the config exists.
fn raw_out_dir() -> Option<PathBuf> {
    let args: Vec<String> = std::env::args().collect();
    args.iter().enumerate().find_map(|(i, a)| {
        if a == "--out" {
            args.get(i + 1).map(PathBuf::from)
        } else {
            a.strip_prefix("--out=").map(PathBuf::from)
        }
    })
}

fn load_config(flags: &Flags) -> Result<FileConfig, CliError> {
    match &flags.config {
        None => Ok(FileConfig::default()),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
        }
    }
}

fn execute(command: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match command {
        Command::Spectrum => commands::spectrum_cmd(cfg),
        Command::WeylCount => commands::weyl_count_cmd(cfg),
        Command::Effective => commands::effective_cmd(cfg),
        Command::CellSolve => commands::cell_solve_cmd(cfg),
        Command::Egorov => commands::egorov_cmd(cfg),
        Command::IsospectralCheck => commands::isospectral_cmd(cfg),
        Command::BsReconstruct => commands::bs_cmd(cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return fail(CliError::validation(e.kind().to_string()), raw_out_dir().as_deref());
        }
    };
    let start = Instant::now();
    let file = match load_config(&cli.flags) {
        Ok(f) => f,
        Err(e) => return fail(e, raw_out_dir().as_deref()),
    };
    let out_hint = cli.flags.out.clone().or(file.out.clone());
    let cfg = match RunConfig::merge(cli.command.name(), cli.flags, file) {
        Ok(c) => c,
        Err(msg) => return fail(CliError::validation(msg), out_hint.as_deref()),
    };
    if let Some(j) = cfg.jobs {
        // only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let outcome = match execute(cli.command, &cfg) {
        Ok(o) => o,
        Err(e) => return fail(e, Some(&cfg.out)),
    };
    if let Err(e) = fs::create_dir_all(&cfg.out) {
        return fail(CliError::validation(format!("{}: {e}", cfg.out.display())), None);
    }
    let mut names = Vec::new();
    for (name, contents) in &outcome.files {
        if let Err(e) = fs::write(cfg.out.join(name), contents) {
            return fail(CliError::validation(format!("{name}: {e}")), None);
        }
        names.push(name.clone());
    }
    let manifest = json!({
        "tool": "torhom",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cfg.subcommand,
        "config": cfg,
        "inputs": outcome.inputs,
        "inputs_sha256": inputs_hash(&cfg, &outcome.inputs),
        "outputs": names,
        "exit_code": outcome.exit_code,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    if let Err(e) = fs::write(cfg.out.join("manifest.json"), format!("{manifest:#}\n")) {
        return fail(CliError::validation(format!("manifest.json: {e}")), None);
    }
    if outcome.exit_code != 0 {
        let err = CliError::numerical("emitted table failed its validity checks");
        let _ = fs::write(cfg.out.join("error.json"), format!("{:#}\n", error_json(&err)));
        eprintln!("error: {}", err.message);
    }
    ExitCode::from(outcome.exit_code as u8)
}
