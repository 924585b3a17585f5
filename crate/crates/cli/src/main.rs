use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use tcqd_cli::{presets, run_batch, CliError, SimConfig};

#[derive(Parser)]
#[command(
    name = "tcqd",
    version,
    about = "Open Tavis-Cummings dynamics: spin quasi-probabilities and photon statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset (or `all`) or a config file.
    #[command(group(ArgGroup::new("source").required(true).args(["preset", "config"])))]
    Run {
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output root; each run writes into `<out>/<name>/`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List preset names.
    ListPresets,
    /// Check a config file and report every violation.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the TOML of a preset's runs.
    ShowPreset { name: String },
}

fn configs_for(preset: Option<&str>, config: Option<&PathBuf>) -> Result<Vec<SimConfig>, CliError> {
    match (preset, config) {
        (Some("all"), _) => Ok(presets::all().into_iter().flat_map(|p| p.runs).collect()),
        (Some(name), _) => presets::get(name)
            .map(|p| p.runs)
            .ok_or_else(|| CliError::UnknownPreset(name.into())),
        (None, Some(path)) => Ok(vec![SimConfig::load(path)?]),
        (None, None) => Err(CliError::config("either --preset or --config is required")),
    }
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { preset, config, out } => {
            let configs = configs_for(preset.as_deref(), config.as_ref())?;
            let root = out
                .or_else(|| configs.first().and_then(|c| c.out_dir.clone()))
                .unwrap_or_else(|| PathBuf::from("out"));
            for (name, files) in run_batch(&configs, &root)? {
                println!("{name}:");
                for f in files {
                    println!("  {}", f.display());
                }
            }
        }
        Command::ListPresets => {
            for p in presets::all() {
                println!("{:<11} {}", p.name, p.description);
            }
        }
        Command::Validate { config } => {
            let cfg = SimConfig::load(&config)?;
            println!("{}: ok ({})", config.display(), cfg.name);
        }
        Command::ShowPreset { name } => {
            let p = presets::get(&name).ok_or(CliError::UnknownPreset(name))?;
            let docs: Vec<String> = p.runs.iter().map(SimConfig::to_toml).collect();
            print!("{}", docs.join("\n# ---\n\n"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
