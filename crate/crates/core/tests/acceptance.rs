//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use despawn_core::analysis::DictionaryModel;
use despawn_core::network::{ht_activation, ThresholdPair, DEFAULT_ALPHA};
use despawn_core::pipeline::{
    generate_synthetic, run_classification, run_detection, ClassificationOutcome, DetectionConfig,
    DetectionOutcome, Split, SyntheticDataset, SyntheticSpec, CLASS_A_LABEL, CLASS_B_LABEL,
    NORMAL_LABEL,
};
use despawn_core::training::{gradient_check, GradCheckConfig, TrainConfig};
use despawn_core::wavelet::{
    cqf_from_scaling, daubechies_scaling, db4_filterbank, haar_filterbank, FilterBank,
};
use despawn_core::{DespawnModel, SharingMode};

const RECON_TOLERANCE: f64 = 1e-8;
const RECON_SIGNALS: usize = 100;
const RECON_LENGTHS: [usize; 3] = [1024, 625, 4096];
const RECON_BUDGET: Duration = Duration::from_secs(10);
const DB4_SUM_TOLERANCE: f64 = 1e-12;
const HT_GRID_POINTS: usize = 10_000;
const HT_SYMMETRY_TOLERANCE: f64 = 1e-12;
const HT_REFERENCE: f64 = 0.9933074;
const HT_REFERENCE_TOLERANCE: f64 = 1e-6;
const EXPECTED_PARAMETERS: usize = 170;
const GRAD_BUDGET: Duration = Duration::from_secs(60);
const TRAINING_EPOCHS: usize = 50;
const MAX_LOSS_RATIO: f64 = 0.80;
const TRAINING_BUDGET: Duration = Duration::from_secs(300);
const MIN_AUC: f64 = 0.90;
const DETECTION_BUDGET: Duration = Duration::from_secs(600);
const MIN_ACCURACY: f64 = 0.95;
const CLASSIFICATION_BUDGET: Duration = Duration::from_secs(600);
const SEED: u64 = 0;

struct Verdict {
    id: u32,
    name: &'static str,
    passed: bool,
}

fn verdict(id: u32, name: &'static str, passed: bool, detail: String) -> Verdict {
    println!(
        "{} criterion {id:>2} {name}: {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    Verdict { id, name, passed }
}

fn perfect_reconstruction() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    let mut failed = None;
    for &n in &RECON_LENGTHS {
        let levels = despawn_core::wavelet::max_levels(n);
        for mode in [SharingMode::Db4Fixed, SharingMode::Db4FixedHt] {
            let model = DespawnModel::new(levels, 8, mode, 1.0).expect("db4 model");
            for _ in 0..RECON_SIGNALS {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                match model.forward(&x) {
                    Ok(r) => {
                        let err = x
                            .iter()
                            .zip(&r.reconstruction)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max);
                        worst = worst.max(err);
                    }
                    Err(e) => failed = Some(e.to_string()),
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let passed = failed.is_none() && worst <= RECON_TOLERANCE && elapsed < RECON_BUDGET;
    verdict(
        1,
        "perfect reconstruction",
        passed,
        match failed {
            Some(e) => format!("error: {e}"),
            None => format!(
                "max |f - f~| = {worst:.3e} (<= {RECON_TOLERANCE:e}) over {} signals, {elapsed:.2?} (< {RECON_BUDGET:?})",
                2 * RECON_SIGNALS * RECON_LENGTHS.len()
            ),
        },
    )
}

fn bank_relations_bitwise(bank: &FilterBank) -> bool {
    let h = bank.h.taps();
    let k = h.len();
    let sign = |n: usize| if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    (0..k).all(|n| {
        bank.g.taps()[n].to_bits() == (sign(n) * h[k - 1 - n]).to_bits()
            && bank.h_bar.taps()[n].to_bits() == h[k - 1 - n].to_bits()
            && bank.g_bar.taps()[n].to_bits() == (-sign(n) * h[n]).to_bits()
    })
}

fn cqf_identity() -> Verdict {
    let db4 = db4_filterbank();
    let derived = cqf_from_scaling(&daubechies_scaling(8).expect("db4 taps")).expect("bank");
    let bitwise = bank_relations_bitwise(&haar_filterbank())
        && bank_relations_bitwise(&db4)
        && bank_relations_bitwise(&derived);
    let sum: f64 = db4.h.taps().iter().sum();
    let energy: f64 = db4.h.taps().iter().map(|v| v * v).sum();
    let sum_err = (sum - std::f64::consts::SQRT_2).abs();
    let energy_err = (energy - 1.0).abs();
    let passed = bitwise && sum_err <= DB4_SUM_TOLERANCE && energy_err <= DB4_SUM_TOLERANCE;
    verdict(
        2,
        "CQF identity",
        passed,
        format!(
            "relations bitwise: {bitwise}; |sum h - sqrt2| = {sum_err:.1e}, |sum h^2 - 1| = {energy_err:.1e} (<= {DB4_SUM_TOLERANCE:e})"
        ),
    )
}

fn ht_identities() -> Verdict {
    let zero = ThresholdPair::zero(DEFAULT_ALPHA);
    let grid = (0..HT_GRID_POINTS).map(|i| -5.0 + 10.0 * i as f64 / (HT_GRID_POINTS - 1) as f64);
    let identity = grid
        .clone()
        .all(|x| ht_activation(x, &zero).to_bits() == x.to_bits());

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut symmetry_err = 0.0f64;
    for x in grid {
        let (bp, bm) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
        let t = ThresholdPair::new(bp, bm, DEFAULT_ALPHA);
        let swapped = ThresholdPair::new(bm, bp, DEFAULT_ALPHA);
        symmetry_err = symmetry_err.max((ht_activation(-x, &t) + ht_activation(x, &swapped)).abs());
    }
    let reference = ht_activation(1.0, &ThresholdPair::new(0.5, 0.5, DEFAULT_ALPHA));
    let reference_err = (reference - HT_REFERENCE).abs();
    let passed = identity
        && symmetry_err <= HT_SYMMETRY_TOLERANCE
        && reference_err <= HT_REFERENCE_TOLERANCE;
    verdict(
        3,
        "hard-threshold identities",
        passed,
        format!(
            "zero-threshold identity exact on {HT_GRID_POINTS} points: {identity}; odd symmetry error {symmetry_err:.1e} (<= {HT_SYMMETRY_TOLERANCE:e}); HT(1; 0.5, 0.5) = {reference:.7} (target {HT_REFERENCE} +- {HT_REFERENCE_TOLERANCE:e})"
        ),
    )
}

fn parameter_count() -> Verdict {
    let count =
        DespawnModel::new(17, 8, SharingMode::PerLevelCqfHt, 1.0).map(|m| m.parameter_count());
    let passed = matches!(count, Ok(EXPECTED_PARAMETERS));
    verdict(
        4,
        "parameter count",
        passed,
        format!("despawn, k = 8, L = 17: {count:?} (expected exactly {EXPECTED_PARAMETERS})"),
    )
}

fn gradient_correctness() -> Verdict {
    let start = Instant::now();
    let cfg = GradCheckConfig::default();
    let mut summary = Vec::new();
    let mut passed = true;
    for mode in SharingMode::ALL {
        if mode.scheme().parameter_count(1, cfg.kernel_size) == 0 {
            continue;
        }
        match gradient_check(mode, &cfg) {
            Ok(report) => {
                passed &= report.passed();
                summary.push(format!(
                    "{mode} {}/{}",
                    report.checks.len() - report.failures,
                    report.checks.len()
                ));
            }
            Err(e) => {
                passed = false;
                summary.push(format!("{mode} error: {e}"));
            }
        }
    }
    let elapsed = start.elapsed();
    passed &= elapsed < GRAD_BUDGET;
    verdict(
        5,
        "gradient correctness",
        passed,
        format!(
            "tolerance max({:e} rel, {:e} abs), length {}, {} seeds: [{}], {elapsed:.2?} (< {GRAD_BUDGET:?})",
            cfg.relative_tolerance,
            cfg.absolute_tolerance,
            cfg.signal_length,
            cfg.seeds.len(),
            summary.join(", ")
        ),
    )
}

fn train_config() -> TrainConfig {
    TrainConfig {
        epochs: TRAINING_EPOCHS,
        seed: SEED,
        ..TrainConfig::default()
    }
}

fn detection(data: &SyntheticDataset) -> (DetectionOutcome, Duration) {
    let start = Instant::now();
    let train_set: Vec<(String, Vec<f64>)> =
        SyntheticDataset::signals(&data.detection, Split::Train, Some(NORMAL_LABEL))
            .map(|s| (s.id.clone(), s.samples.clone()))
            .collect();
    let test_set: Vec<(String, Vec<f64>, bool)> =
        SyntheticDataset::signals(&data.detection, Split::Test, None)
            .map(|s| (s.id.clone(), s.samples.clone(), s.label != NORMAL_LABEL))
            .collect();
    let cfg = DetectionConfig {
        mode: SharingMode::PerLevelCqfHt,
        train: train_config(),
        elm_seed: SEED,
        ..DetectionConfig::default()
    };
    let outcome = run_detection(&train_set, &test_set, &cfg).expect("detection pipeline");
    (outcome, start.elapsed())
}

fn classification(data: &SyntheticDataset, mode: SharingMode) -> (ClassificationOutcome, Duration) {
    let start = Instant::now();
    let mut train_sets = BTreeMap::new();
    for label in [CLASS_A_LABEL, CLASS_B_LABEL] {
        let signals = SyntheticDataset::signals(&data.classification, Split::Train, Some(label))
            .map(|s| s.samples.clone())
            .collect::<Vec<_>>();
        train_sets.insert(label.to_string(), signals);
    }
    let test_set: Vec<(String, Vec<f64>)> =
        SyntheticDataset::signals(&data.classification, Split::Test, None)
            .map(|s| (s.label.clone(), s.samples.clone()))
            .collect();
    let outcome =
        run_classification(&train_sets, &test_set, mode, &train_config()).expect("classification");
    (outcome, start.elapsed())
}

fn training_progress(run: &DetectionOutcome, elapsed: Duration) -> Verdict {
    let history = &run.report.loss_history;
    let (first, last) = (history[0], history[history.len() - 1]);
    let ratio = last.total / first.total;
    let passed = history.len() == TRAINING_EPOCHS
        && ratio <= MAX_LOSS_RATIO
        && last.sparsity < first.sparsity
        && elapsed < TRAINING_BUDGET;
    verdict(
        6,
        "training progress",
        passed,
        format!(
            "{} epochs, total loss {:.5} -> {:.5} (ratio {ratio:.4} <= {MAX_LOSS_RATIO}), sparsity {:.5} -> {:.5}, {elapsed:.2?} (< {TRAINING_BUDGET:?})",
            history.len(),
            first.total,
            last.total,
            first.sparsity,
            last.sparsity
        ),
    )
}

fn anomaly_detection(run: &DetectionOutcome, elapsed: Duration) -> Verdict {
    let passed = run.auc >= MIN_AUC && elapsed < DETECTION_BUDGET;
    verdict(
        7,
        "anomaly detection",
        passed,
        format!(
            "AUC {:.4} (>= {MIN_AUC}) on {} test windows, {elapsed:.2?} (< {DETECTION_BUDGET:?})",
            run.auc,
            run.test_scores.len()
        ),
    )
}

fn dictionary_classification(run: &ClassificationOutcome, elapsed: Duration) -> Verdict {
    let passed = run.accuracy >= MIN_ACCURACY && elapsed < CLASSIFICATION_BUDGET;
    verdict(
        8,
        "dictionary classification",
        passed,
        format!(
            "despawn accuracy {:.4} (>= {MIN_ACCURACY}) on {} test windows, {elapsed:.2?} (< {CLASSIFICATION_BUDGET:?})",
            run.accuracy,
            run.predictions.len()
        ),
    )
}

fn ablation_ordering(
    db4: &ClassificationOutcome,
    db4_ht: &ClassificationOutcome,
    despawn: &ClassificationOutcome,
) -> Verdict {
    let first_label = db4
        .dictionary
        .labels()
        .next()
        .unwrap_or_default()
        .to_string();
    let all_tied = db4.predictions.iter().all(|(_, pred, losses)| {
        let mut values = losses.values().map(|v| v.to_bits());
        let first = values.next();
        values.all(|v| Some(v) == first) && *pred == first_label
    });
    let classes = db4.dictionary.class_models.len() as f64;
    let chance = db4.accuracy == 1.0 / classes;
    let strict = despawn.accuracy > db4_ht.accuracy;
    verdict(
        9,
        "ablation ordering",
        all_tied && chance && strict,
        format!(
            "db4 losses tied bitwise: {all_tied}, db4 accuracy {:.4} (chance {:.4}); db4-ht {:.4} < despawn {:.4}: {strict}",
            db4.accuracy,
            1.0 / classes,
            db4_ht.accuracy,
            despawn.accuracy
        ),
    )
}

fn models_identical(a: &DictionaryModel, b: &DictionaryModel) -> bool {
    a.class_models.len() == b.class_models.len()
        && a.class_models
            .iter()
            .zip(&b.class_models)
            .all(|((la, ma), (lb, mb))| la == lb && same_bits(&ma.parameters(), &mb.parameters()))
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn determinism(
    data: &SyntheticDataset,
    first_detection: &DetectionOutcome,
    first_classification: &ClassificationOutcome,
) -> Verdict {
    let again = generate_synthetic(&SyntheticSpec::default(), SEED).expect("synthetic data");
    let data_same = again == *data;
    let (second_detection, _) = detection(&again);
    let (second_classification, _) = classification(&again, SharingMode::PerLevelCqfHt);

    let model_same = same_bits(
        &first_detection.report.final_model.parameters(),
        &second_detection.report.final_model.parameters(),
    ) && first_detection.report.final_model == second_detection.report.final_model;
    let flatten = |rows: &[(String, despawn_core::analysis::LatentFeatures)]| {
        rows.iter()
            .flat_map(|(_, f)| f.to_vec())
            .collect::<Vec<f64>>()
    };
    let features_same = same_bits(
        &flatten(&first_detection.train_features),
        &flatten(&second_detection.train_features),
    ) && same_bits(
        &flatten(&first_detection.test_features),
        &flatten(&second_detection.test_features),
    );
    let scores_same = same_bits(&first_detection.test_scores, &second_detection.test_scores)
        && first_detection.elm == second_detection.elm;
    let history_same = first_detection.report.loss_history == second_detection.report.loss_history;
    let dictionary_same = models_identical(
        &first_classification.dictionary,
        &second_classification.dictionary,
    ) && first_classification.predictions
        == second_classification.predictions;
    let passed =
        data_same && model_same && features_same && scores_same && history_same && dictionary_same;
    verdict(
        10,
        "determinism",
        passed,
        format!(
            "data {data_same}, model {model_same}, loss history {history_same}, features {features_same}, scores {scores_same}, dictionary {dictionary_same}"
        ),
    )
}

fn main() -> ExitCode {
    let mut verdicts = vec![
        perfect_reconstruction(),
        cqf_identity(),
        ht_identities(),
        parameter_count(),
        gradient_correctness(),
    ];

    let data = generate_synthetic(&SyntheticSpec::default(), SEED).expect("synthetic data");
    let (detection_run, detection_time) = detection(&data);
    verdicts.push(training_progress(&detection_run, detection_time));
    verdicts.push(anomaly_detection(&detection_run, detection_time));

    let (despawn, despawn_time) = classification(&data, SharingMode::PerLevelCqfHt);
    verdicts.push(dictionary_classification(&despawn, despawn_time));
    let (db4, _) = classification(&data, SharingMode::Db4Fixed);
    let (db4_ht, _) = classification(&data, SharingMode::Db4FixedHt);
    verdicts.push(ablation_ordering(&db4, &db4_ht, &despawn));

    verdicts.push(determinism(&data, &detection_run, &despawn));

    let failed: Vec<String> = verdicts
        .iter()
        .filter(|v| !v.passed)
        .map(|v| format!("{} ({})", v.id, v.name))
        .collect();
    println!(
        "acceptance: {}/{} criteria passed",
        verdicts.len() - failed.len(),
        verdicts.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
