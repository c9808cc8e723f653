use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use isac_sim::{
    emit_results, estimation_observation, run_scenario, write_results, OutputFormat, ScenarioConfig, ScenarioKind,
};

#[derive(Debug, Parser)]
#[command(name = "isac-sim", version, about = "Monte-Carlo sweeps for MIMO sensing and communication")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML scenario file; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,

    /// Worker threads; 0 lets rayon decide. Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Communication capacity versus transmit power.
    CapacitySweep,
    /// Sensing capacity versus transmit power.
    SensingSweep,
    /// Pareto waveform trade-off across rho.
    IsacTradeoff,
    /// Angle, Doppler, delay and gain recovery versus SNR.
    MmwaveEstimation {
        /// Also write the observation of trial 0 at the first SNR point.
        #[arg(long)]
        observation: Option<PathBuf>,
    },
    /// Scanning beams, beam shifting and superposition gains across rho.
    BeamScan,
}

impl Command {
    fn kind(&self) -> ScenarioKind {
        match self {
            Command::CapacitySweep => ScenarioKind::CapacitySweep,
            Command::SensingSweep => ScenarioKind::SensingSweep,
            Command::IsacTradeoff => ScenarioKind::IsacTradeoff,
            Command::MmwaveEstimation { .. } => ScenarioKind::MmwaveEstimation,
            Command::BeamScan => ScenarioKind::BeamScan,
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<ScenarioConfig> {
    let kind = cli.command.kind();
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let table: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
            if let Some(k) = table.get("kind").and_then(|v| v.as_str()) {
                if k != kind.as_str() {
                    bail!("config kind `{k}` does not match subcommand `{kind}`");
                }
            }
            ScenarioConfig::from_toml_str(&text)?
        }
        None => ScenarioConfig::default(),
    };
    cfg.kind = kind;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build()?;
    let results = pool.install(|| run_scenario(&cfg))?;
    if let Command::MmwaveEstimation { observation: Some(path) } = &cli.command {
        estimation_observation(&cfg, 0, 0)?
            .write_to(path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    match &cfg.out {
        Some(path) => emit_results(&results, cli.format, path)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_results(&results, cli.format, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("isac-sim: {e:#}");
            ExitCode::FAILURE
        }
    }
}
