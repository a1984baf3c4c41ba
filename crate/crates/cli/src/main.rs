use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use chiral_qhe_cli::commands::{self, Output, SpectrumRequest};
use chiral_qhe_cli::config::{parse_assignment, Emit, PresetName, RunConfig, Settings, SweepAxis};
use chiral_qhe_cli::error::{CliError, CliResult};
use chiral_qhe_cli::writer::{write_file, ArtifactWriter};

#[derive(Debug, Parser)]
#[command(
    name = "chiral-qhe",
    version,
    about = "Liouvillian spectra, chiral loops and sweeps of a driven dissipative qubit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<PresetName>,
    /// Override a parameter, e.g. `--set t5=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    /// Artifact kinds to write (default: all).
    #[arg(long, value_enum, value_delimiter = ',')]
    emit: Vec<Emit>,
    /// Keep the quantum-jump term.
    #[arg(long)]
    jumps: Option<bool>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the four labelled Liouvillian eigenvalues.
    Spectrum {
        #[arg(long, allow_negative_numbers = true)]
        omega_khz: f64,
        /// Decay rate in rad/µs.
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        delta_khz: f64,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        jumps: bool,
        /// Also write the spectrum as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Eigenvalue sheets over a (Δ, γ) grid.
    Surface {
        #[command(flatten)]
        common: Common,
        /// Points per axis.
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Run one five-stroke loop.
    Loop {
        #[command(flatten)]
        common: Common,
        /// cw or ccw
        #[arg(long)]
        direction: Option<String>,
        /// plus or minus
        #[arg(long)]
        start: Option<String>,
    },
    /// Final-state sweep over γ_max/4Ω or T5, as the preset dictates.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma separated axis values.
        #[arg(long, allow_hyphen_values = true)]
        values: Option<String>,
    },
    /// Run the acceptance suite and write its CSV artifacts.
    Validate {
        #[arg(long, short = 'o')]
        out: Option<PathBuf>,
    },
}

struct Resolved {
    settings: Settings,
    out_dir: PathBuf,
    emit: std::collections::BTreeSet<Emit>,
}

fn resolve(common: &Common, extra: Vec<(String, Value)>, default_dir: &str) -> CliResult<Resolved> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if common.preset.is_some() {
        cfg.preset = common.preset;
    }
    for a in &common.set {
        let (k, v) = parse_assignment(a)?;
        cfg.overrides.insert(k, v);
    }
    if let Some(j) = common.jumps {
        cfg.overrides.insert("jumps".into(), Value::Bool(j));
    }
    for (k, v) in extra {
        cfg.overrides.insert(k, v);
    }
    if !common.emit.is_empty() {
        cfg.emit = Some(common.emit.iter().copied().collect());
    }
    let out_dir = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(default_dir));
    Ok(Resolved {
        settings: Settings::resolve(&cfg)?,
        emit: cfg.emit_set(),
        out_dir,
    })
}

fn emit(out: &Output, dir: &Path, kinds: std::collections::BTreeSet<Emit>) -> CliResult<()> {
    print!("{}", out.text);
    let mut w = ArtifactWriter::new(dir, kinds)?;
    for a in &out.artifacts {
        w.write(a.kind, &a.name, &a.bytes)?;
    }
    println!("wrote {} files to {}", w.written().len(), dir.display());
    Ok(())
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("LEP_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Usage(format!("LEP_THREADS must be a positive integer, got '{v}'"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("LEP_THREADS: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Spectrum {
            omega_khz,
            gamma,
            delta_khz,
            jumps,
            json,
        } => {
            let (report, out) = commands::cmd_spectrum(SpectrumRequest {
                omega_khz,
                gamma,
                delta_khz,
                jumps,
            })?;
            print!("{}", out.text);
            if let Some(path) = json {
                let mut text =
                    serde_json::to_string_pretty(&report).map_err(chiral_qhe::Error::from)?;
                text.push('\n');
                write_file(&path, text.as_bytes())?;
            }
            Ok(())
        }
        Command::Surface { common, resolution } => {
            let extra = resolution
                .map(|n| ("surface_resolution".to_string(), Value::from(n)))
                .into_iter()
                .collect();
            let r = resolve(&common, extra, "out/surface")?;
            emit(&commands::cmd_surface(&r.settings)?, &r.out_dir, r.emit)
        }
        Command::Loop {
            common,
            direction,
            start,
        } => {
            let extra = [("direction", direction), ("start", start)]
                .into_iter()
                .filter_map(|(k, v)| v.map(|v| (k.to_string(), Value::String(v))))
                .collect();
            let r = resolve(&common, extra, "out/loop")?;
            let (_, out) = commands::cmd_loop(&r.settings)?;
            emit(&out, &r.out_dir, r.emit)
        }
        Command::Sweep { common, values } => {
            let mut r = resolve(&common, Vec::new(), "out/sweep")?;
            if let Some(v) = values {
                let key = match r.settings.sweep {
                    SweepAxis::GammaMaxRatio(_) => "gamma_max_ratios",
                    SweepAxis::T5 { .. } => "t5_values",
                };
                r.settings.apply(key, &Value::String(v))?;
            }
            let (_, out) = commands::cmd_sweep(&r.settings)?;
            emit(&out, &r.out_dir, r.emit)
        }
        Command::Validate { out } => {
            let dir = out.unwrap_or_else(|| PathBuf::from("out/validate"));
            let result = commands::cmd_validate()?;
            emit(&result, &dir, [Emit::Csv].into_iter().collect())?;
            match result.failures {
                0 => Ok(()),
                n => Err(CliError::Acceptance(n)),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
