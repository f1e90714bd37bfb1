use std::path::PathBuf;
use std::process::ExitCode;

use affectfuse::models::{Architecture, ModalitySet};
use affectfuse::synth::SynthSpec;
use affectfuse::EmotionDimension;
use affectfuse_cli::{cmd_eval, cmd_loocv, cmd_report, cmd_synth, cmd_train, CliError, Overrides};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "affectfuse", version, about = "Multimodal valence/arousal models: train, evaluate, tabulate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Train once on the configured clips and save a checkpoint.
    Train(RunArgs),
    /// Score a checkpoint on the configured clips.
    Eval(RunArgs),
    /// Leave-one-clip-out cross-validation.
    Loocv(RunArgs),
    /// Tabulate LOOCV reports.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// JSON synthetic-data spec; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    clips: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    separability: Option<f64>,
    #[arg(long)]
    drift_period: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallel_folds: Option<usize>,
    #[arg(long, value_parser = parse_model)]
    model: Option<Architecture>,
    #[arg(long, value_parser = parse_dimension)]
    dimension: Option<EmotionDimension>,
    /// Comma-separated subset of rgb, flow, audio.
    #[arg(long, value_parser = parse_modalities)]
    modalities: Option<ModalitySet>,
}

#[derive(Args)]
struct ReportArgs {
    /// LOOCV report files; when omitted, every loocv_*.json in --out.
    reports: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_model(s: &str) -> Result<Architecture, String> {
    s.parse().map_err(|e: affectfuse::Error| e.to_string())
}

fn parse_dimension(s: &str) -> Result<EmotionDimension, String> {
    s.parse().map_err(|e: affectfuse::Error| e.to_string())
}

fn parse_modalities(s: &str) -> Result<ModalitySet, String> {
    ModalitySet::parse_list(s).map_err(|e| e.to_string())
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            manifest: self.manifest.clone(),
            output_dir: self.out.clone(),
            seed: self.seed,
            parallel_folds: self.parallel_folds,
            model: self.model,
            dimension: self.dimension,
            modalities: self.modalities.clone(),
        }
    }
}

fn synth_spec(args: &SynthArgs) -> Result<SynthSpec, CliError> {
    let mut spec = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("invalid spec {}: {e}", p.display())))?
        }
        None => SynthSpec::default(),
    };
    spec.seed = args.seed.unwrap_or(spec.seed);
    spec.clips = args.clips.unwrap_or(spec.clips);
    spec.frames_per_clip = args.frames.unwrap_or(spec.frames_per_clip);
    spec.separability = args.separability.unwrap_or(spec.separability);
    spec.drift_period = args.drift_period.unwrap_or(spec.drift_period);
    Ok(spec)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(args) => {
            let manifest = cmd_synth(&synth_spec(&args)?, &args.out)?;
            println!("{}", manifest.display());
        }
        Command::Train(args) => {
            let out = cmd_train(args.config.as_deref(), &args.overrides())?;
            println!("checkpoint: {}", out.checkpoint.display());
            println!("report: {}", out.report.display());
        }
        Command::Eval(args) => {
            let out = cmd_eval(args.config.as_deref(), &args.overrides())?;
            let m = out.summary.mean;
            println!(
                "accuracy {:.4}  accuracy±1 {:.4}  mae {:.4}  mse {:.4}  pearson {:.4}",
                m.accuracy, m.accuracy_pm1, m.mae, m.mse, m.pearson
            );
            println!("report: {}", out.report.display());
        }
        Command::Loocv(args) => {
            let out = cmd_loocv(args.config.as_deref(), &args.overrides())?;
            print!("{}", out.table_text);
            println!("report: {}", out.report.display());
        }
        Command::Report(args) => {
            for (path, text) in cmd_report(&args.reports, args.out.as_deref())? {
                print!("{text}");
                if !path.as_os_str().is_empty() {
                    println!("written: {}", path.display());
                }
                println!();
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
