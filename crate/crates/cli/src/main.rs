//! `wban`: transmission-power sweeps of the broadcast model, simulator
//! batches, and multi-broadcast abaques.
//!
//! Exit status is 0 on success, 1 when the configuration or dataset is
//! invalid, and 2 when a computation or output step fails.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use wban_core::experiment::{self, ExperimentConfig};
use wban_core::{AttenuationMatrix, Error, InterferenceMode, Simulation};

#[derive(Parser)]
#[command(name = "wban", version, about = "Diffusion broadcast in wireless body area networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytical metrics from the Markov chain at each transmission power.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Write the chain of every sweep point as JSON.
        #[arg(long, value_name = "FILE")]
        export_chain: Option<PathBuf>,
    },
    /// Simulator estimates at each transmission power.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write the event trace of the first run at each power as JSON lines.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
    },
    /// Cover probability over transmission power and broadcast repetitions.
    Abaque {
        #[command(flatten)]
        common: Common,
    },
    /// Check an attenuation CSV and print a summary.
    ValidateDataset {
        /// Path to the dataset; defaults to the bundled running posture.
        path: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// JSON configuration; flags below override its fields.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; standard output when absent.
    #[arg(long, short, value_name = "FILE")]
    output: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    sink: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<InterferenceMode>,
    #[arg(long, allow_hyphen_values = true)]
    pt_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pt_stop: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pt_step: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    sn_dbm: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pn_dbm: Option<f64>,
    #[arg(long)]
    n_bit: Option<u32>,
    #[arg(long)]
    bitrate_bps: Option<f64>,
    #[arg(long)]
    tu_seconds: Option<f64>,
    #[arg(long)]
    w_init: Option<u32>,
    #[arg(long)]
    max_attempts: Option<u32>,
    #[arg(long)]
    t_setup: Option<f64>,
    #[arg(long)]
    t_cca: Option<f64>,
    /// Comma-separated repetition counts, e.g. `1,2,4,8`.
    #[arg(long, value_delimiter = ',')]
    k_values: Option<Vec<u32>>,
    #[arg(long)]
    n_runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_backoffs: Option<f64>,
    /// Cover probability target; the smallest K reaching it is printed to stderr.
    #[arg(long)]
    threshold: Option<f64>,
}

fn parse_mode(s: &str) -> Result<InterferenceMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Overrides {
    fn apply(self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag { cfg.$($field).+ = v; })*
            };
        }
        set! {
            sink => sink,
            mode => mode,
            pt_start => pt_sweep.start,
            pt_stop => pt_sweep.stop,
            pt_step => pt_sweep.step,
            sn_dbm => radio.sn_dbm,
            pn_dbm => radio.pn_dbm,
            n_bit => radio.n_bit,
            bitrate_bps => radio.bitrate_bps,
            tu_seconds => csma.tu_seconds,
            w_init => csma.w_init,
            max_attempts => csma.max_attempts,
            t_setup => csma.t_setup,
            t_cca => csma.t_cca,
            k_values => k_values,
            n_runs => n_runs,
            seed => seed,
            n_backoffs => n_backoffs,
        }
        if self.dataset.is_some() {
            cfg.dataset = self.dataset;
        }
        if self.threshold.is_some() {
            cfg.threshold = self.threshold;
        }
    }
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_)
            | Error::InvalidMatrix(_)
            | Error::NodeCount(_)
            | Error::Domain(_)
            | Error::Json(_)
            | Error::Csv(_) => Failure::Validation(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn runtime<'a>(context: &'a str, path: &'a Path) -> impl FnOnce(io::Error) -> Failure + 'a {
    move |e| Failure::Runtime(format!("{context} {}: {e}", path.display()))
}

fn resolve(common: &mut Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    std::mem::take(&mut common.overrides).apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(runtime("cannot create", p))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(
    common: &Common,
    csv: impl FnOnce(&mut dyn Write) -> wban_core::Result<()>,
    json: impl FnOnce() -> wban_core::Result<String>,
) -> Result<(), Failure> {
    let mut out = open_output(common.output.as_deref())?;
    let written = match common.format {
        Format::Csv => csv(&mut out),
        Format::Json => json().and_then(|s| Ok(writeln!(out, "{s}")?)),
    };
    written.map_err(|e| Failure::Runtime(e.to_string()))?;
    out.flush().map_err(|e| Failure::Runtime(format!("cannot write output: {e}")))
}

#[derive(Serialize)]
struct ChainAt {
    pt_dbm: f64,
    chain: wban_core::markov::ChainExport,
}

fn export_chains(cfg: &ExperimentConfig, path: &Path) -> Result<(), Failure> {
    let matrix = cfg.load_matrix()?;
    let chains = cfg
        .pt_sweep
        .points()
        .into_iter()
        .map(|pt| Ok(ChainAt { pt_dbm: pt, chain: cfg.chain_at(&matrix, pt)?.to_export() }))
        .collect::<Result<Vec<_>, Error>>()?;
    let file = File::create(path).map_err(runtime("cannot create", path))?;
    serde_json::to_writer(BufWriter::new(file), &chains).map_err(|e| Failure::Runtime(e.to_string()))
}

fn write_traces(cfg: &ExperimentConfig, path: &Path) -> Result<(), Failure> {
    let matrix = cfg.load_matrix()?;
    let mut out = BufWriter::new(File::create(path).map_err(runtime("cannot create", path))?);
    for pt in cfg.pt_sweep.points() {
        let sim = Simulation::new(matrix.clone(), cfg.radio.with_pt(pt), cfg.csma, cfg.sink)?;
        for event in sim.run_traced(cfg.seed).trace {
            let mut line = serde_json::to_value(&event).map_err(Error::from)?;
            line["pt_dbm"] = pt.into();
            writeln!(out, "{line}").map_err(runtime("cannot write", path))?;
        }
    }
    out.flush().map_err(runtime("cannot write", path))
}

fn validate_dataset(path: Option<PathBuf>) -> Result<(), Failure> {
    let matrix = match &path {
        Some(p) => AttenuationMatrix::from_path(p).map_err(|e| match e {
            Error::Io(io) => Failure::Validation(format!("cannot read {}: {io}", p.display())),
            other => other.into(),
        })?,
        None => AttenuationMatrix::posture2_running(),
    };
    let n = matrix.n_nodes();
    let pairs: Vec<(f64, f64)> =
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| (matrix.mean_db(i, j), matrix.std_db(i, j))).collect();
    let (lo, hi) = pairs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    println!("nodes: {n}");
    println!("pairs: {}", pairs.len());
    println!("mean attenuation range: {lo} .. {hi} dB");
    println!("largest std: {} dB", pairs.iter().map(|p| p.1).fold(0.0, f64::max));
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze { mut common, export_chain } => {
            let cfg = resolve(&mut common)?;
            let report = experiment::analyze(&cfg)?;
            emit(&common, |w| report.write_csv(w), || report.to_json())?;
            if let Some(path) = export_chain {
                export_chains(&cfg, &path)?;
            }
        }
        Command::Simulate { mut common, trace } => {
            let cfg = resolve(&mut common)?;
            let report = experiment::simulate(&cfg)?;
            emit(&common, |w| report.write_csv(w), || report.to_json())?;
            if let Some(path) = trace {
                write_traces(&cfg, &path)?;
            }
        }
        Command::Abaque { mut common } => {
            let cfg = resolve(&mut common)?;
            let report = experiment::abaque_report(&cfg)?;
            emit(&common, |w| report.write_csv(w), || report.to_json())?;
            if let (Some(t), Some(mins)) = (cfg.threshold, &report.min_k_for_threshold) {
                for (pt, k) in mins {
                    match k {
                        Some(k) => eprintln!("pt_dbm {pt}: K = {k} reaches cover probability {t}"),
                        None => eprintln!("pt_dbm {pt}: no listed K reaches cover probability {t}"),
                    }
                }
            }
        }
        Command::ValidateDataset { path } => validate_dataset(path)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
