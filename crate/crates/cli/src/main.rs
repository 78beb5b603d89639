use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use despawn_core::analysis::{
    dict_classify, dict_train, elm_fit, elm_score, roc_auc, LatentFeatures, DEFAULT_NEURONS,
    DEFAULT_RIDGE,
};
use despawn_core::network::loss;
use despawn_core::pipeline::{
    feature_rows, generate_synthetic, load_dictionary, load_elm, load_manifest_windows, load_model,
    read_features_csv, read_scores_csv, read_wav, save_dictionary, save_elm, save_model,
    write_features_csv, write_scores_csv, write_synthetic, write_wav, Split, SyntheticSpec, Window,
};
use despawn_core::training::{gradient_check, train, GradCheckConfig, TrainConfig};
use despawn_core::SharingMode;

#[derive(Parser)]
#[command(
    name = "despawn",
    version,
    about = "Learnable sparse wavelet networks for audio"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

impl SplitArg {
    fn split(self) -> Option<Split> {
        match self {
            SplitArg::Train => Some(Split::Train),
            SplitArg::Test => Some(Split::Test),
            SplitArg::All => None,
        }
    }
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Sharing mode: db4, db4-ht, cwn, decwn, lcwn, despawn, despawn2 or free.
    #[arg(long, default_value = "despawn")]
    mode: SharingMode,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Cascade depth, or `auto` for the nearest log2 of the window size.
    #[arg(long, default_value = "auto")]
    levels: String,
    #[arg(long, default_value_t = 8)]
    kernel_size: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainArgs {
    fn config(&self) -> Result<TrainConfig> {
        let levels = match self.levels.as_str() {
            "auto" => None,
            n => Some(
                n.parse()
                    .with_context(|| format!("--levels expects `auto` or a count, got {n:?}"))?,
            ),
        };
        Ok(TrainConfig {
            epochs: self.epochs,
            learning_rate: self.lr,
            batch_size: self.batch,
            seed: self.seed,
            gamma: self.gamma,
            levels,
            kernel_size: self.kernel_size,
            ..TrainConfig::default()
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the seeded synthetic benchmark as WAV files plus manifests.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        sigma: Option<f64>,
        /// Normal training windows.
        #[arg(long)]
        n_normal: Option<usize>,
        /// Test windows per anomaly type.
        #[arg(long)]
        n_anomal: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
    },
    /// Train one model on the training split of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        args: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pass a WAV file through a model and write the reconstruction.
    Reconstruct {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export latent features of every manifest window as CSV.
    Features {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        split: SplitArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the one-class detector on a feature CSV.
    DetectTrain {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = DEFAULT_NEURONS)]
        neurons: usize,
        #[arg(long, default_value_t = DEFAULT_RIDGE)]
        ridge: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a feature CSV with a fitted detector.
    DetectScore {
        #[arg(long)]
        elm: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// ROC-AUC of a score CSV against manifest labels (non-`normal` is positive).
    EvalAuc {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Compare manual gradients with central differences.
    GradCheck {
        #[arg(long)]
        mode: SharingMode,
        /// First of five consecutive seeds.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Relative tolerance; the absolute floor is a thousandth of it.
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Train one model per label on the training split of a manifest.
    ClassifyTrain {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        args: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label manifest windows by the class model with the lowest loss.
    Classify {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        out: PathBuf,
    },
}

fn windows(manifest: &Path, split: Option<Split>) -> Result<Vec<Window>> {
    let (_, windows) = load_manifest_windows(manifest, split)
        .with_context(|| format!("loading manifest {}", manifest.display()))?;
    if windows.is_empty() {
        bail!(
            "manifest {} has no windows in the requested split",
            manifest.display()
        );
    }
    Ok(windows)
}

fn synth(
    out: &Path,
    seed: u64,
    sigma: Option<f64>,
    n_normal: Option<usize>,
    n_anomal: Option<usize>,
    window: Option<usize>,
) -> Result<()> {
    let mut spec = SyntheticSpec::default();
    spec.sigma = sigma.unwrap_or(spec.sigma);
    spec.n_normal_train = n_normal.unwrap_or(spec.n_normal_train);
    spec.n_anomalous = n_anomal.unwrap_or(spec.n_anomalous);
    spec.window = window.unwrap_or(spec.window);
    let data = generate_synthetic(&spec, seed)?;
    write_synthetic(out, &spec, &data)?;
    println!(
        "{}",
        json!({
            "detection_manifest": out.join("detection.json"),
            "classification_manifest": out.join("classification.json"),
            "detection_windows": data.detection.len(),
            "classification_windows": data.classification.len(),
        })
    );
    Ok(())
}

fn train_cmd(manifest: &Path, args: &TrainArgs, out: &Path) -> Result<()> {
    let signals: Vec<Vec<f64>> = windows(manifest, Some(Split::Train))?
        .into_iter()
        .map(|w| w.samples)
        .collect();
    let report = train(&signals, args.mode, &args.config()?)?;
    save_model(out, &report.final_model)?;
    let history = &report.loss_history;
    println!(
        "{}",
        json!({
            "mode": args.mode.name(),
            "signals": signals.len(),
            "levels": report.final_model.levels(),
            "parameters": report.final_model.parameter_count(),
            "first_epoch": history.first(),
            "last_epoch": history.last(),
            "seconds": report.wall_time,
        })
    );
    Ok(())
}

fn reconstruct(model: &Path, input: &Path, out: &Path) -> Result<()> {
    let model = load_model(model)?;
    let audio = read_wav(input).with_context(|| format!("reading {}", input.display()))?;
    let record = model.forward(&audio.samples)?;
    let breakdown = loss(&record, &audio.samples, model.gamma())?;
    write_wav(out, &record.reconstruction, audio.sample_rate)?;
    let residual: Vec<f64> = audio
        .samples
        .iter()
        .zip(&record.reconstruction)
        .map(|(f, r)| (f - r).abs())
        .collect();
    let max = residual.iter().copied().fold(0.0, f64::max);
    let mean = residual.iter().sum::<f64>() / residual.len().max(1) as f64;
    println!(
        "{}",
        json!({
            "samples": residual.len(),
            "sample_rate": audio.sample_rate,
            "mean_abs_residual": mean,
            "max_abs_residual": max,
            "loss": breakdown,
        })
    );
    Ok(())
}

fn features(model: &Path, manifest: &Path, split: SplitArg, out: &Path) -> Result<()> {
    let model = load_model(model)?;
    let windows = windows(manifest, split.split())?;
    let rows = feature_rows(
        &model,
        windows
            .iter()
            .map(|w| (w.id.as_str(), w.samples.as_slice())),
    )?;
    write_features_csv(out, &rows)?;
    println!(
        "{}",
        json!({ "rows": rows.len(), "dimension": rows[0].1.dimension() })
    );
    Ok(())
}

fn detect_train(features: &Path, neurons: usize, ridge: f64, seed: u64, out: &Path) -> Result<()> {
    let rows = read_features_csv(features)?;
    let vectors: Vec<LatentFeatures> = rows.into_iter().map(|(_, f)| f).collect();
    let elm = elm_fit(&vectors, neurons, ridge, seed)?;
    save_elm(out, &elm)?;
    println!(
        "{}",
        json!({ "samples": vectors.len(), "neurons": neurons, "ridge": ridge })
    );
    Ok(())
}

fn detect_score(elm: &Path, features: &Path, out: &Path) -> Result<()> {
    let elm = load_elm(elm)?;
    let rows = read_features_csv(features)?;
    let scores = rows
        .iter()
        .map(|(id, f)| Ok((id.clone(), elm_score(&elm, f)?)))
        .collect::<Result<Vec<_>>>()?;
    write_scores_csv(out, &scores)?;
    println!("{}", json!({ "rows": scores.len() }));
    Ok(())
}

fn eval_auc(scores: &Path, manifest: &Path) -> Result<()> {
    let labels: HashMap<String, bool> = windows(manifest, None)?
        .into_iter()
        .map(|w| (w.id.clone(), w.is_anomalous()))
        .collect();
    let mut values = Vec::new();
    let mut truth = Vec::new();
    for (id, score) in read_scores_csv(scores)? {
        let anomalous = labels
            .get(&id)
            .ok_or_else(|| anyhow!("window {id:?} is not in the manifest"))?;
        values.push(score);
        truth.push(*anomalous);
    }
    println!("{}", roc_auc(&values, &truth)?);
    Ok(())
}

fn grad_check(mode: SharingMode, seed: u64, tolerance: f64) -> Result<bool> {
    let config = GradCheckConfig {
        seeds: (seed..seed + 5).collect(),
        relative_tolerance: tolerance,
        absolute_tolerance: tolerance * 1e-3,
        ..GradCheckConfig::default()
    };
    let report = gradient_check(mode, &config)?;
    println!(
        "{}",
        json!({
            "mode": mode.name(),
            "parameters": report.parameters,
            "checks": report.checks.len(),
            "failures": report.failures,
            "max_abs_error": report.max_abs_error,
            "passed": report.passed(),
        })
    );
    Ok(report.passed())
}

fn classify_train(manifest: &Path, args: &TrainArgs, out: &Path) -> Result<()> {
    let mut classes: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for w in windows(manifest, Some(Split::Train))? {
        let label = w
            .label
            .ok_or_else(|| anyhow!("training window {} has no label", w.id))?;
        classes.entry(label).or_default().push(w.samples);
    }
    let dict = dict_train(&classes, args.mode, &args.config()?)?;
    save_dictionary(out, &dict)?;
    let counts: BTreeMap<&String, usize> = classes.iter().map(|(l, s)| (l, s.len())).collect();
    println!("{}", json!({ "mode": args.mode.name(), "classes": counts }));
    Ok(())
}

fn classify(dict: &Path, manifest: &Path, split: SplitArg, out: &Path) -> Result<()> {
    let dict = load_dictionary(dict)?;
    let labels: Vec<String> = dict.labels().map(str::to_string).collect();
    let windows = windows(manifest, split.split())?;
    let mut writer = csv::Writer::from_path(out)?;
    let mut header = vec!["id".to_string(), "label".into(), "predicted".into()];
    header.extend(labels.iter().map(|l| format!("loss_{l}")));
    writer.write_record(&header)?;
    let (mut labelled, mut correct) = (0usize, 0usize);
    for w in &windows {
        let (predicted, losses) = dict_classify(&w.samples, &dict)?;
        if let Some(truth) = &w.label {
            labelled += 1;
            correct += usize::from(*truth == predicted);
        }
        let mut record = vec![w.id.clone(), w.label.clone().unwrap_or_default(), predicted];
        record.extend(labels.iter().map(|l| losses[l].to_string()));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    let accuracy = (labelled > 0).then(|| correct as f64 / labelled as f64);
    println!(
        "{}",
        json!({ "windows": windows.len(), "accuracy": accuracy })
    );
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Synth {
            out,
            seed,
            sigma,
            n_normal,
            n_anomal,
            window,
        } => synth(&out, seed, sigma, n_normal, n_anomal, window)?,
        Command::Train {
            manifest,
            args,
            out,
        } => train_cmd(&manifest, &args, &out)?,
        Command::Reconstruct { model, input, out } => reconstruct(&model, &input, &out)?,
        Command::Features {
            model,
            manifest,
            split,
            out,
        } => features(&model, &manifest, split, &out)?,
        Command::DetectTrain {
            features,
            neurons,
            ridge,
            seed,
            out,
        } => detect_train(&features, neurons, ridge, seed, &out)?,
        Command::DetectScore { elm, features, out } => detect_score(&elm, &features, &out)?,
        Command::EvalAuc { scores, manifest } => eval_auc(&scores, &manifest)?,
        Command::GradCheck {
            mode,
            seed,
            tolerance,
        } => return grad_check(mode, seed, tolerance),
        Command::ClassifyTrain {
            manifest,
            args,
            out,
        } => classify_train(&manifest, &args, &out)?,
        Command::Classify {
            dict,
            manifest,
            split,
            out,
        } => classify(&dict, &manifest, split, &out)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: gradient check failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
