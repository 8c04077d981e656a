//! `boundary`: synthetic data, heatmap generation, training, evaluation,
//! ablations and CED plots.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use boundary_core::ablation::VARIANTS;
use boundary_core::data::{Split, DEFAULT_EXPAND};
use boundary_core::eval::NormalizationKind;
use boundary_core::Error;
use clap::{Args, Parser, Subcommand};

use commands::{EvalArgs, GenHeatmapsArgs, PlotArgs, SynthArgs};
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "boundary", version, about = "Boundary-aware face alignment toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct TrainOverrides {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    train_manifest: Option<PathBuf>,
    #[arg(long)]
    val_manifest: Option<PathBuf>,
    /// Synthetic corpus sizes, used when no manifests are given.
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_val: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a procedural face corpus with a manifest.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "300w_68")]
        scheme: String,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        side: usize,
        #[arg(long, default_value_t = 0.0)]
        occlusion: f64,
        #[arg(long, default_value = "train", value_parser = parse_split)]
        split: Split,
    },
    /// Ground-truth boundary heatmap archives for every manifest item.
    GenHeatmaps {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        /// Builtin scheme id or a scheme JSON file.
        #[arg(long, default_value = "300w_68")]
        scheme: String,
        /// Crop side; maps are a quarter of it.
        #[arg(long, default_value_t = 256)]
        side: usize,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_EXPAND)]
        expand: f64,
        /// Also write a PNG montage per sample.
        #[arg(long)]
        montage: bool,
    },
    /// Train a pipeline and write a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        overrides: TrainOverrides,
    },
    /// Score a checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to the synthetic validation split of the run config.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Comma-separated: inter_ocular, inter_pupil, face_size.
        #[arg(long, value_delimiter = ',', value_parser = parse_norm)]
        norms: Vec<NormalizationKind>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value = "eval")]
        label: String,
    },
    /// Train each named variant on the same data.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        overrides: TrainOverrides,
        /// Comma-separated variant labels.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
    },
    /// CED curves of one or more metrics reports.
    PlotCed {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value = "inter_ocular", value_parser = parse_norm)]
        norm: NormalizationKind,
        #[arg(long)]
        max_t: Option<f64>,
    },
}

fn parse_split(s: &str) -> Result<Split, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown split `{s}`"))
}

fn parse_norm(s: &str) -> Result<NormalizationKind, String> {
    NormalizationKind::parse(s).map_err(|e| e.to_string())
}

/// 1 for usage and configuration, 2 for data, 3 for numerical failures.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) | Error::Config(_) | Error::Dimension(_) => 1,
        Error::NonFinite(_) | Error::Numerical(_) => 3,
        Error::DegenerateBoundary { .. }
        | Error::EmptyBoundary(_)
        | Error::Parse { .. }
        | Error::Data(_)
        | Error::Io { .. }
        | Error::Json(_) => 2,
    }
}

fn run_config(common: &Common, o: Option<&TrainOverrides>) -> boundary_core::Result<RunConfig> {
    let mut cfg = RunConfig::load_or_default(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
    }
    if let Some(o) = o {
        if let Some(v) = o.epochs {
            cfg.train.max_epochs = v;
        }
        if let Some(v) = o.batch_size {
            cfg.train.batch_size = v;
        }
        if let Some(v) = &o.train_manifest {
            cfg.data.train_manifest = Some(v.clone());
        }
        if let Some(v) = &o.val_manifest {
            cfg.data.val_manifest = Some(v.clone());
        }
        if let Some(v) = o.n_train {
            cfg.data.synthetic.n_train = v;
        }
        if let Some(v) = o.n_val {
            cfg.data.synthetic.n_val = v;
        }
    }
    cfg.resolve()
}

fn run(command: Command) -> boundary_core::Result<()> {
    match command {
        Command::Synth {
            common,
            scheme,
            n,
            side,
            occlusion,
            split,
        } => {
            let args = SynthArgs {
                scheme,
                n,
                seed: common.seed.unwrap_or(0),
                side,
                occlusion_fraction: occlusion,
                split,
            };
            commands::synth(&args, &common.out)
        }
        Command::GenHeatmaps {
            common,
            manifest,
            scheme,
            side,
            sigma,
            expand,
            montage,
        } => {
            let args = GenHeatmapsArgs {
                manifest,
                scheme,
                side,
                sigma: sigma.unwrap_or_else(|| GenHeatmapsArgs::default_sigma(side)),
                expand,
                montage,
            };
            commands::gen_heatmaps(&args, &common.out)
        }
        Command::Train { common, overrides } => {
            let cfg = run_config(&common, Some(&overrides))?;
            commands::train_cmd(&cfg, &common.out)
        }
        Command::Eval {
            common,
            checkpoint,
            manifest,
            norms,
            threshold,
            label,
        } => {
            let mut run = run_config(&common, None)?;
            if !norms.is_empty() {
                run.eval.normalizations = norms;
            }
            if let Some(t) = threshold {
                run.eval.threshold = t;
            }
            let run = run.resolve()?;
            let args = EvalArgs {
                checkpoint,
                manifest,
                label,
                run,
            };
            commands::eval(&args, &common.out)
        }
        Command::Ablate {
            common,
            overrides,
            variants,
        } => {
            let mut cfg = run_config(&common, Some(&overrides))?;
            if !variants.is_empty() {
                cfg.variants = variants;
            }
            if cfg.variants.is_empty() {
                return Err(Error::Usage(format!("no variants given; known: {}", VARIANTS.join(", "))));
            }
            commands::ablate(&cfg, &common.out).map(|_| ())
        }
        Command::PlotCed {
            common,
            reports,
            norm,
            max_t,
        } => {
            let args = PlotArgs {
                reports,
                normalization: norm,
                max_t,
            };
            commands::plot_ced(&args, &common.out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_kind() {
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(exit_code(&Error::Data("x".into())), 2);
        let io = Error::Io {
            path: PathBuf::from("a"),
            source: std::io::Error::other("x"),
        };
        assert_eq!(exit_code(&io), 2);
        assert_eq!(exit_code(&Error::Numerical("x".into())), 3);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
