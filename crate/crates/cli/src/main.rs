use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use geomag::dataset::{sequential_split, FeaturePreset, FeatureSpec, SplitSpec, WindowConfig};
use geomag::eval::{evaluate, forecasts, generate_synthetic, report_from_forecasts, SynthConfig};
use geomag::ingest::{align, parse_columnar, parse_superdarn, resample_hourly, ColumnMap};
use geomag::optim::{EpochRecord, StopDecision, TrainHistory};
use geomag::pipeline::{prepare, ExperimentConfig, Manifest, ModelBundle, Prepared};
use geomag::search::{run_search, train_with, HyperParams, SearchConfig, SearchSpace};
use geomag::TimeTable;

#[derive(Parser)]
#[command(name = "geomag", version, about = "Forecast geomagnetic indices with an LSTM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw hourly and SuperDARN files into a canonical CSV table.
    Ingest(IngestArgs),
    /// Write a synthetic coupled-series table.
    Synth(SynthArgs),
    /// Random hyperparameter search with median early stopping.
    Search(SearchArgs),
    /// Train one model with fixed hyperparameters.
    Train(TrainArgs),
    /// Score a saved model and persistence on the test partition.
    Evaluate(EvaluateArgs),
    /// Forecast the next hours from the end of a table.
    Predict(PredictArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Whitespace-delimited hourly file (OMNI2 layout unless --colmap is given).
    #[arg(long)]
    omni: Option<PathBuf>,
    /// JSON column map for --omni.
    #[arg(long)]
    colmap: Option<PathBuf>,
    /// SuperDARN polar-cap potential file, resampled to hourly means.
    #[arg(long)]
    sdarn: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    length: usize,
    /// Signal-to-noise amplitude ratio; ignored when --noise-std is set.
    #[arg(long, default_value_t = 5.0)]
    snr: f64,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON SynthConfig overriding all of the above.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// Canonical CSV table.
    #[arg(long)]
    data: PathBuf,
    /// base, sdrn, sw or custom.
    #[arg(long, default_value = "base")]
    features: FeaturePreset,
    /// Input columns for the custom feature set.
    #[arg(long, value_delimiter = ',')]
    inputs: Vec<String>,
    /// Target columns for the custom feature set.
    #[arg(long, value_delimiter = ',')]
    targets: Vec<String>,
    #[arg(long, default_value_t = 6)]
    history: usize,
    #[arg(long, default_value_t = 6)]
    lead: usize,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.6, 0.1, 0.3])]
    split: Vec<f64>,
}

impl DataArgs {
    fn experiment(&self) -> Result<ExperimentConfig> {
        let features = match self.features {
            FeaturePreset::Custom => FeatureSpec::custom(self.inputs.clone(), self.targets.clone())?,
            preset => {
                if !self.inputs.is_empty() || !self.targets.is_empty() {
                    bail!("--inputs/--targets only apply to --features custom");
                }
                FeatureSpec::preset(preset)?
            }
        };
        Ok(ExperimentConfig {
            features,
            window: WindowConfig::new(self.history, self.lead)?,
            split: SplitSpec::new(self.split[0], self.split[1], self.split[2])?,
        })
    }

    fn load(&self) -> Result<(TimeTable, ExperimentConfig, Prepared<f64>)> {
        let table = TimeTable::load(&self.data)?;
        let exp = self.experiment()?;
        let prepared = prepare(&table, &exp)?;
        info!(
            "windows: train {}, validation {}, test {}",
            prepared.train.len(),
            prepared.val.len(),
            prepared.test.len()
        );
        Ok((table, exp, prepared))
    }
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    grace_epochs: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    /// JSON SearchConfig; flags given explicitly take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON SearchSpace.
    #[arg(long)]
    space: Option<PathBuf>,
    /// Output directory for the ledger, model bundle and test report.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    weight_decay: f64,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 1)]
    layers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    max_epochs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model directory written by search or train.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output directory for report.csv, report.json, metrics.csv and forecasts.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
fn write_atomic(path: &Path, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, &buf).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn save_table(t: &TimeTable, path: &Path) -> Result<()> {
    write_atomic(path, |buf| Ok(t.write_csv(buf)?))
}

fn ingest(args: IngestArgs) -> Result<()> {
    let mut tables = Vec::new();
    if let Some(path) = &args.omni {
        let map = match &args.colmap {
            Some(p) => ColumnMap::from_json(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
            None => ColumnMap::omni2(),
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let t = parse_columnar(&text, &map)?;
        info!("{}: {} rows", path.display(), t.len());
        tables.push(t);
    }
    if let Some(path) = &args.sdarn {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let t = resample_hourly(&parse_superdarn(&text)?);
        info!("{}: {} hourly rows", path.display(), t.len());
        tables.push(t);
    }
    let table = match tables.len() {
        0 => bail!("give --omni, --sdarn or both"),
        1 => tables.pop().unwrap(),
        _ => align(&tables)?,
    };
    save_table(&table, &args.out)?;
    info!("wrote {} rows to {}", table.len(), args.out.display());
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let cfg = match (&args.config, args.noise_std) {
        (Some(p), _) => read_json(p)?,
        (None, Some(noise)) => SynthConfig::standard(args.length, noise, args.seed),
        (None, None) => SynthConfig::standard_with_snr(args.length, args.snr, args.seed),
    };
    let table = generate_synthetic(&cfg)?;
    save_table(&table, &args.out)?;
    info!("wrote {} rows (noise std {:.4}) to {}", table.len(), cfg.noise_std, args.out.display());
    Ok(())
}

/// Saves the bundle and scores it on the test windows.
fn finish_model(out: &Path, bundle: &ModelBundle, prepared: &Prepared<f64>) -> Result<()> {
    bundle.save(out)?;
    let report = evaluate(&bundle.params, &prepared.test, &prepared.scaler)?;
    write_atomic(&out.join("report.csv"), |b| Ok(report.write_pearson_csv(b)?))?;
    write_atomic(&out.join("report.json"), |b| Ok(serde_json::to_writer_pretty(b, &report)?))?;
    for idx in &report.indices {
        let h1 = &idx.horizons[0];
        info!("{} h=1: model rho {:?}, persistence rho {:?}", idx.name, h1.model_pearson, h1.persistence_pearson);
    }
    Ok(())
}

fn search(args: SearchArgs) -> Result<()> {
    let (_, exp, prepared) = args.data.load()?;
    let mut cfg: SearchConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => SearchConfig::default(),
    };
    cfg.n_trials = args.trials.unwrap_or(cfg.n_trials);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.workers = args.workers.unwrap_or(cfg.workers);
    cfg.grace_epochs = args.grace_epochs.unwrap_or(cfg.grace_epochs);
    cfg.max_epochs = args.max_epochs.unwrap_or(cfg.max_epochs);
    let space: SearchSpace = match &args.space {
        Some(p) => read_json(p)?,
        None => SearchSpace::default(),
    };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let ledger = args.out.join("ledger.jsonl");
    let partial = args.out.join("ledger.jsonl.partial");
    cfg.ledger_path = Some(partial.clone());

    let outcome = run_search(&prepared.train, &prepared.val, &space, &cfg)?;
    fs::rename(&partial, &ledger).with_context(|| format!("renaming {}", partial.display()))?;
    info!(
        "best trial {} with validation loss {:.6}: {:?}",
        outcome.best_trial, outcome.best_val_loss, outcome.best_hyperparams
    );
    write_atomic(&args.out.join("best.json"), |b| Ok(serde_json::to_writer_pretty(b, &outcome.best_hyperparams)?))?;
    let bundle = ModelBundle {
        params: outcome.best_model,
        manifest: Manifest {
            experiment: exp,
            scaler: prepared.scaler.clone(),
            hyperparams: outcome.best_hyperparams,
            best_val_loss: outcome.best_val_loss,
        },
    };
    finish_model(&args.out, &bundle, &prepared)
}

fn train(args: TrainArgs) -> Result<()> {
    let (_, exp, prepared) = args.data.load()?;
    let hp = HyperParams {
        lr: args.lr,
        weight_decay: args.weight_decay,
        batch_size: args.batch_size,
        hidden_dim: args.hidden,
        num_layers: args.layers,
        seed: args.seed,
    };
    let log_epoch = |r: &EpochRecord, _: &TrainHistory| {
        log::debug!("epoch {}: train {:.6}, validation {:.6}", r.epoch, r.train_loss, r.val_loss);
        StopDecision::Continue
    };
    let outcome = train_with(&hp, &prepared.train, &prepared.val, args.max_epochs, log_epoch)?;
    info!("best epoch {} with validation loss {:.6}", outcome.best_epoch, outcome.best_val_loss);
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_atomic(&args.out.join("history.csv"), |b| {
        TrainHistory::write_csv_header(&mut *b)?;
        for e in &outcome.history.epochs {
            TrainHistory::write_csv_row(&mut *b, e)?;
        }
        Ok(())
    })?;
    let bundle = ModelBundle {
        params: outcome.params,
        manifest: Manifest {
            experiment: exp,
            scaler: prepared.scaler.clone(),
            hyperparams: hp,
            best_val_loss: outcome.best_val_loss,
        },
    };
    finish_model(&args.out, &bundle, &prepared)
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let bundle = ModelBundle::load(&args.model)?;
    let table = TimeTable::load(&args.data)?;
    let (_, _, test) = sequential_split(&table, &bundle.manifest.experiment.split)?;
    let windows = bundle.windows(&test)?;
    let f = forecasts(&bundle.params, &windows, &bundle.manifest.scaler)?;
    let targets = &windows.target_columns;
    let report = report_from_forecasts(targets, windows.config.lead, &f.model, &f.actual, f.persistence.as_ref())?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_atomic(&args.out.join("report.csv"), |b| Ok(report.write_pearson_csv(b)?))?;
    write_atomic(&args.out.join("report.json"), |b| Ok(serde_json::to_writer_pretty(b, &report)?))?;
    write_atomic(&args.out.join("metrics.csv"), |b| Ok(report.write_long_csv(b)?))?;
    write_atomic(&args.out.join("forecasts.csv"), |b| {
        write!(b, "anchor,horizon")?;
        for name in targets {
            write!(b, ",{name},{name}_mnet,{name}_pers")?;
        }
        writeln!(b)?;
        let k = targets.len();
        for (i, anchor) in f.anchors.iter().enumerate() {
            for h in 0..windows.config.lead {
                write!(b, "{},{}", anchor.epoch_hour(), h + 1)?;
                for j in 0..k {
                    let c = h * k + j;
                    let pers = f.persistence.as_ref().map_or("NA".to_string(), |p| p[[i, c]].to_string());
                    write!(b, ",{},{},{}", f.actual[[i, c]], f.model[[i, c]], pers)?;
                }
                writeln!(b)?;
            }
        }
        Ok(())
    })?;
    report.write_pearson_csv(std::io::stdout().lock())?;
    Ok(())
}

fn predict(args: PredictArgs) -> Result<()> {
    let bundle = ModelBundle::load(&args.model)?;
    let table = TimeTable::load(&args.data)?;
    let (anchor, pred) = bundle.predict_latest(&table)?;
    let targets = &bundle.manifest.experiment.features.target_columns;
    let mut buf = Vec::new();
    writeln!(buf, "epoch_hour,horizon,{}", targets.join(","))?;
    for (h, row) in pred.rows().into_iter().enumerate() {
        let values: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(buf, "{},{},{}", anchor.add_hours(h as i64 + 1).epoch_hour(), h + 1, values.join(","))?;
    }
    match &args.out {
        Some(path) => write_atomic(path, |b| {
            b.extend_from_slice(&buf);
            Ok(())
        }),
        None => Ok(std::io::stdout().write_all(&buf)?),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth(a),
        Command::Search(a) => search(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Predict(a) => predict(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
