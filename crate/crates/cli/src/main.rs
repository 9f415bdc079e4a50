use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use spexcon::io::{read_csv, write_json, write_labels_csv, write_periodogram_csv, write_report_bundle, write_series_csv};
use spexcon::pipeline::{analyze_timed, clustering_summary, periodograms, prepare, Stages, Timings};
use spexcon::{synthesize_eeg, Error, MultiChannelSeries, PipelineConfig, Result, Scenario, SimConfig};

#[derive(Parser)]
#[command(name = "spexcon", version, about = "Phase-dependent spectral extremal connectivity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic series with known tail dependence.
    Simulate(SimulateArgs),
    /// Band energies per block, channel and band.
    Periodogram(RunArgs),
    /// Burst/non-burst phase labels.
    Cluster(RunArgs),
    /// Point estimates only.
    Fit(RunArgs),
    /// Point estimates with bootstrap intervals and FCR selection.
    Bootstrap(RunArgs),
    /// Point estimates with QQ diagnostics.
    Diagnose(RunArgs),
    /// Every stage.
    Pipeline(RunArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation config (JSON).
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Preset design: low-change or high-change.
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_blocks: Option<usize>,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV; overrides the config's input_path.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Required when no config is given.
    #[arg(long)]
    sampling_rate: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Comma-separated channel names.
    #[arg(long, value_delimiter = ',')]
    conditioning: Option<Vec<String>>,
}

#[derive(Serialize)]
struct ErrorObject<'a> {
    kind: spexcon::ErrorKind,
    stage: Option<&'a str>,
    message: String,
}

fn report_error(err: &Error) {
    let mut root = err;
    while let Error::Stage { source, .. } = root {
        root = source;
    }
    let object = ErrorObject { kind: err.kind(), stage: err.stage(), message: root.to_string() };
    let json = serde_json::json!({ "error": object });
    eprintln!("{json}");
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut config = match (&args.config, args.scenario) {
        (Some(path), _) => serde_json::from_str::<SimConfig>(&read_text(path)?)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?,
        (None, Some(scenario)) => scenario.config(0),
        (None, None) => return Err(Error::InvalidConfig("simulate needs --config or --scenario".into())),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.n_blocks {
        config.n_blocks = n;
    }
    let data = synthesize_eeg(&config).map_err(|e| e.at("simulate"))?;
    let dir = &args.output_dir;
    std::fs::create_dir_all(dir)?;
    write_series_csv(&dir.join("series.csv"), &data.series)?;
    write_json(&dir.join("truth.json"), &data.truth)?;
    write_labels_csv(&dir.join("labels.csv"), data.labels.labels())?;
    write_json(&dir.join("sim_config.json"), &config)?;
    Ok(())
}

fn load(args: &RunArgs) -> Result<(PipelineConfig, MultiChannelSeries, PathBuf)> {
    let mut config = match (&args.config, args.sampling_rate) {
        (Some(path), _) => PipelineConfig::from_json(&read_text(path)?)?,
        (None, Some(rate)) => PipelineConfig::new(rate),
        (None, None) => return Err(Error::InvalidConfig("need --config or --sampling-rate".into())),
    };
    if let Some(rate) = args.sampling_rate {
        config.sampling_rate = rate;
    }
    if let Some(input) = &args.input {
        config.input_path = Some(input.clone());
    }
    if let Some(dir) = &args.output_dir {
        config.output_dir = Some(dir.clone());
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(r) = args.replicates {
        config.n_replicates = r;
    }
    if let Some(c) = &args.conditioning {
        config.conditioning_channels = Some(c.clone());
    }
    config.validate()?;
    let input = config.input_path.clone().ok_or_else(|| Error::InvalidConfig("no input file given".into()))?;
    let series = read_csv(&input, config.sampling_rate).map_err(|e| e.at("read_csv"))?;
    let dir = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok((config, series, dir))
}

fn run(args: &RunArgs, stages: Stages) -> Result<()> {
    let (config, series, dir) = load(args)?;
    let (report, timings) = analyze_timed(&series, &config, stages)?;
    write_report_bundle(&dir, &report)?;
    write_timings(&dir, &timings)
}

fn write_timings(dir: &Path, timings: &Timings) -> Result<()> {
    let mut map = serde_json::Map::new();
    for (stage, secs) in timings.stages.iter().cloned() {
        map.insert(stage, secs.into());
    }
    map.insert("total".into(), timings.total().into());
    write_json(&dir.join("timings.json"), &map)
}

fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Periodogram(args) => {
            let (config, series, dir) = load(args)?;
            let (_, tensor) = periodograms(&series, &config)?;
            write_periodogram_csv(&dir.join("periodogram.csv"), &tensor, series.channel_names())
        }
        Command::Cluster(args) => {
            let (config, series, dir) = load(args)?;
            let prepared = prepare(&series, &config)?;
            write_labels_csv(&dir.join("labels.csv"), prepared.clustering.labels.labels())?;
            write_json(&dir.join("clustering.json"), &clustering_summary(&prepared, &config))
        }
        Command::Fit(args) => run(args, Stages::FIT),
        Command::Bootstrap(args) => run(args, Stages { bootstrap: true, diagnose: false }),
        Command::Diagnose(args) => run(args, Stages { bootstrap: false, diagnose: true }),
        Command::Pipeline(args) => run(args, Stages::ALL),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            report_error(&err);
            ExitCode::from(err.kind().exit_code() as u8)
        }
    }
}
