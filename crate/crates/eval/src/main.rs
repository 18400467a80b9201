//! `jamloc`: dataset generation, training, evaluation and ablations.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use jamloc_core::dataset::{read_dataset, write_dataset};
use jamloc_core::estimators::Estimator;
use jamloc_core::sampling::{DownsampleConfig, DownsampleMethod};
use jamloc_core::scenario::{generate_dynamic, DynamicGenConfig, ScenarioInstance};
use jamloc_eval::config::{DataKind, RunConfig};
use jamloc_eval::experiment::{
    checkpoint_hash, dataset_hash, generate_static_grid, split_dataset, Split,
};
use jamloc_eval::plots::{confidence_plot, emit_plot, emit_plots};
use jamloc_eval::{
    evaluate, run_ablation, AblationKind, ConfidenceProfile, EvalReport, Predictor, ReportMeta,
};
use jamloc_nn::model::Arch;
use jamloc_nn::Checkpoint;

#[derive(Parser)]
#[command(
    name = "jamloc",
    version,
    about = "Jamming source localization from noise-floor measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

impl Common {
    fn run_config(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => RunConfig::default(),
        };
        if self.seed.is_some() {
            c.seed = self.seed;
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a static or dynamic dataset (JSON lines).
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kind: Option<String>,
        /// Static: per topology and placement. Dynamic: trajectories.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Downsample every trajectory of a dataset.
    Downsample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "binning")]
        method: String,
        #[arg(long, default_value_t = 1000)]
        target: usize,
        #[arg(long, default_value_t = 1.0)]
        bin: f64,
    },
    /// Train a model on the 70% split and write a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        arch: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        layers: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        verbose: bool,
    },
    /// Evaluate a checkpoint; writes report.json and CSV tables.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Evaluate classical estimators.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "wcl,mlat,mle,lsq,pl")]
        estimators: Vec<String>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Run an ablation grid and write a CSV table.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ablation: String,
        #[arg(long)]
        arch: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Confidence weights against distance to the jammer.
    Confidence {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Render plots and their CSV series from a report.json.
    Plot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        report: PathBuf,
    },
}

fn load(path: &Path) -> anyhow::Result<Vec<ScenarioInstance>> {
    Ok(read_dataset(path)
        .with_context(|| format!("reading {}", path.display()))?
        .1)
}

fn pick(split: &Split, all: &[ScenarioInstance], which: SplitArg) -> Vec<ScenarioInstance> {
    match which {
        SplitArg::Train => split.train.clone(),
        SplitArg::Val => split.val.clone(),
        SplitArg::Test => split.test.clone(),
        SplitArg::All => all.to_vec(),
    }
}

fn write_report(report: &EvalReport, dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), serde_json::to_vec_pretty(report)?)?;
    std::fs::write(dir.join("aggregates.csv"), report.aggregates_csv()?)?;
    std::fs::write(dir.join("records.csv"), report.records_csv()?)?;
    Ok(())
}

fn print_summary(report: &EvalReport) {
    for (k, s) in &report.aggregates {
        println!(
            "{k:<28} n={:<6} rmse={:>9.3} mae={:>9.3}",
            s.count, s.rmse, s.mae
        );
    }
    if report.fallback_count() > 0 {
        println!("fallbacks: {}", report.fallback_count());
    }
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> anyhow::Result<T> {
    s.parse::<T>().map_err(anyhow::Error::msg)
}

fn load_checkpoint(path: &Path) -> anyhow::Result<(Checkpoint, String, u64)> {
    let c = Checkpoint::load(path).with_context(|| format!("reading {}", path.display()))?;
    let hash = checkpoint_hash(&c);
    let seed = c.manifest.as_ref().map_or(0, |m| m.seed);
    Ok((c, hash, seed))
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate {
            common,
            kind,
            count,
        } => {
            let rc = common.run_config()?;
            let seed = rc.seed.unwrap_or(0);
            let kind = match kind.as_deref() {
                None => rc.generate.kind,
                Some("static") => DataKind::Static,
                Some("dynamic") => DataKind::Dynamic,
                Some(o) => bail!("unknown kind '{o}'"),
            };
            let (instances, generator) = match kind {
                DataKind::Static => {
                    let cfg = rc.generate.static_config.clone().unwrap_or_default();
                    let n = count.or(rc.generate.count).unwrap_or(500);
                    let v = generate_static_grid(n, seed, &cfg)?;
                    (
                        v,
                        serde_json::json!({"kind": "static", "per_cell": n, "seed": seed, "config": cfg}),
                    )
                }
                DataKind::Dynamic => {
                    let cfg: DynamicGenConfig =
                        rc.generate.dynamic_config.clone().unwrap_or_default();
                    let n = count.or(rc.generate.count).unwrap_or(300);
                    let v = generate_dynamic(n, seed, &cfg)?;
                    (
                        v,
                        serde_json::json!({"kind": "dynamic", "count": n, "seed": seed, "config": cfg}),
                    )
                }
            };
            write_dataset(&common.out, &instances, generator)?;
            println!(
                "wrote {} instances to {} ({})",
                instances.len(),
                common.out.display(),
                dataset_hash(&instances)
            );
        }
        Command::Downsample {
            common,
            data,
            method,
            target,
            bin,
        } => {
            let (header, instances) = read_dataset(&data)?;
            let ds = DownsampleConfig::new(parse::<DownsampleMethod>(&method)?, target, bin)?;
            let out: Vec<ScenarioInstance> = instances
                .iter()
                .map(|i| {
                    if i.is_dynamic() {
                        i.with_samples(ds.apply(&i.samples))
                    } else {
                        i.clone()
                    }
                })
                .collect();
            let generator = serde_json::json!({"source": header.generator, "downsample": ds});
            write_dataset(&common.out, &out, generator)?;
            println!("wrote {} instances to {}", out.len(), common.out.display());
        }
        Command::Train {
            common,
            data,
            arch,
            epochs,
            layers,
            width,
            verbose,
        } => {
            let rc = common.run_config()?;
            let arch = arch.as_deref().map(parse::<Arch>).transpose()?;
            let mut e = rc.experiment(arch);
            if let Some(n) = epochs {
                e.train.epochs = n;
            }
            if let Some(l) = layers {
                e.model.layers = l;
            }
            if let Some(w) = width {
                e.model.hidden_dim = w;
                e.model.out_dim = w;
            }
            e.train.verbose = verbose;
            let all = load(&data)?;
            let split = split_dataset(&all, e.train.seed);
            let (model, history) = e.fit(&split.train, &split.val)?;
            let ckpt = e.checkpoint(&model, history.clone(), &split.train, &split.val);
            ckpt.save(&common.out)?;
            println!(
                "{} trained: best epoch {} val loss {:.6}; checkpoint {} ({})",
                model.config.arch.as_str(),
                history.best_epoch,
                history.best_val_loss,
                common.out.display(),
                checkpoint_hash(&ckpt)
            );
        }
        Command::Evaluate {
            common,
            data,
            checkpoint,
            split,
            stride,
        } => {
            let rc = common.run_config()?;
            let (ckpt, hash, ck_seed) = load_checkpoint(&checkpoint)?;
            let seed = rc.seed.unwrap_or(ck_seed);
            let all = load(&data)?;
            let sel = pick(&split_dataset(&all, seed), &all, split);
            let graph = ckpt.graph;
            let model = ckpt.into_model()?;
            let stride = stride
                .or(rc.eval.stride)
                .unwrap_or(jamloc_eval::runner::DEFAULT_STRIDE);
            let meta = ReportMeta {
                dataset_hash: dataset_hash(&sel),
                checkpoint_hash: Some(hash),
                seed: Some(seed),
                stride: None,
            };
            let report = evaluate(&Predictor::learned(model, graph), &sel, stride, meta)?;
            write_report(&report, &common.out)?;
            print_summary(&report);
        }
        Command::Baseline {
            common,
            data,
            estimators,
            split,
            stride,
        } => {
            let rc = common.run_config()?;
            let seed = rc.seed.unwrap_or(0);
            let all = load(&data)?;
            let sel = pick(&split_dataset(&all, seed), &all, split);
            let graph = rc.graph.unwrap_or_default();
            let stride = stride
                .or(rc.eval.stride)
                .unwrap_or(jamloc_eval::runner::DEFAULT_STRIDE);
            for name in estimators {
                let est: Estimator = parse(&name)?;
                if !est.is_classical() {
                    bail!("{name} is a learned model; use `train` and `evaluate`");
                }
                let meta = ReportMeta {
                    dataset_hash: dataset_hash(&sel),
                    checkpoint_hash: None,
                    seed: Some(seed),
                    stride: None,
                };
                let report = evaluate(&Predictor::classical(est, &graph), &sel, stride, meta)?;
                write_report(&report, &common.out.join(est.as_str()))?;
                println!("== {}", est.as_str());
                print_summary(&report);
            }
        }
        Command::Ablate {
            common,
            data,
            ablation,
            arch,
            epochs,
        } => {
            let rc = common.run_config()?;
            let arch = arch.as_deref().map(parse::<Arch>).transpose()?;
            let mut e = rc.experiment(arch);
            if let Some(n) = epochs {
                e.train.epochs = n;
            }
            let kind: AblationKind = parse(&ablation)?;
            let all = load(&data)?;
            let split = split_dataset(&all, e.train.seed);
            let table = run_ablation(kind, &e, &split);
            if let Some(parent) = common.out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            let csv = table.to_csv()?;
            std::fs::write(&common.out, &csv)?;
            print!("{csv}");
        }
        Command::Confidence {
            common,
            data,
            checkpoint,
            split,
            stride,
        } => {
            let rc = common.run_config()?;
            let (ckpt, hash, ck_seed) = load_checkpoint(&checkpoint)?;
            let seed = rc.seed.unwrap_or(ck_seed);
            let all = load(&data)?;
            let sel = pick(&split_dataset(&all, seed), &all, split);
            let graph = ckpt.graph;
            let model = ckpt.into_model()?;
            if model.config.arch != Arch::Cage {
                bail!("confidence profiles need a cage checkpoint");
            }
            let stride = stride
                .or(rc.eval.stride)
                .unwrap_or(jamloc_eval::runner::DEFAULT_STRIDE);
            let meta = ReportMeta {
                dataset_hash: dataset_hash(&sel),
                checkpoint_hash: Some(hash),
                seed: Some(seed),
                stride: None,
            };
            let report = evaluate(&Predictor::learned(model, graph), &sel, stride, meta)?;
            let profile = ConfidenceProfile::from_report(&report);
            std::fs::create_dir_all(&common.out)?;
            std::fs::write(
                common.out.join("confidence.json"),
                serde_json::to_vec_pretty(&profile)?,
            )?;
            let mut w = csv::Writer::from_path(common.out.join("confidence_buckets.csv"))?;
            w.write_record([
                "bucket",
                "count",
                "alpha_r",
                "alpha_sin_theta",
                "alpha_cos_theta",
                "alpha_sin_phi",
                "alpha_cos_phi",
                "alpha_mean",
            ])?;
            for b in &profile.buckets {
                let mut row = vec![b.bucket.label().to_string(), b.count.to_string()];
                row.extend(b.mean_alpha.iter().map(|a| a.to_string()));
                row.push(b.overall().to_string());
                w.write_record(row)?;
                println!(
                    "{:<10} n={:<6} mean alpha {:.4}",
                    b.bucket.label(),
                    b.count,
                    b.overall()
                );
            }
            w.flush()?;
            emit_plot(
                &confidence_plot(&profile),
                &common.out,
                "confidence_vs_distance",
            )?;
        }
        Command::Plot { common, report } => {
            let r: EvalReport = serde_json::from_slice(&std::fs::read(&report)?)?;
            for f in emit_plots(&r, &common.out)? {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}
