//! The experiment orchestrator: scan, extract, evaluate, select, vote,
//! choose, refit, persist.
//!
//! Every random decision derives from the configured master seed, and all
//! parallel fan-out points collect back in fixed order, so a run is a pure
//! function of its config and inputs. Errors carry the stage they happened in
//! and a failure marker is left in the output directory for interrupted runs.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{make_folds, make_label_folds, scan_dataset, stratified_split, DatasetManifest};
use crate::ensemble::{
    hard_vote, quantize_score, select_top_k, soft_vote_probs, EnsembleModel, Leaderboard,
    SelectionCriterion, VotingMode,
};
use crate::error::{Error, Result};
use crate::features::{extract_features, load_features, store_features, BackboneSpec, CacheKey, FeatureMatrix};
use crate::metrics::{aggregate_folds, evaluate, CvReport, MetricsBundle};
use crate::util::{atomic_write, derive_seed};
use crate::zoo::{train, ClassifierId, ClassifierSpec};

use super::bundle::save_bundle;
use super::config::{EvalMode, ExperimentConfig};
use super::result::{
    BackbonePredictions, ClassifierEval, EnsembleEval, ExperimentResult, ExtractTiming,
    HpfSelection, PredFold, PredOutput, Provenance, RankFold, Timings, TrainTiming,
};

/// Images per extraction batch. Bounds decode memory; has no effect on the
/// extracted values.
const EXTRACT_BATCH: usize = 32;

/// Fold count for the leak-free ranking cross validation inside the training
/// portion (holdout mode only).
const RANKING_FOLDS: usize = 5;

pub const RESULT_FILE: &str = "result.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_COPY_FILE: &str = "config.toml";
pub const FAILURE_FILE: &str = "failure.json";
pub const PREDICTIONS_DIR: &str = "predictions";
pub const BUNDLE_DIR: &str = "bundle";

/// Serialize as pretty JSON with a trailing newline. The byte output is
/// deterministic for a given value, which the summary file relies on.
pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T, context: &str) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| Error::Json {
        context: context.into(),
        source,
    })?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path, context: &str) -> Result<T> {
    let bytes = crate::util::read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        context: format!("{context} at {}", path.display()),
        source,
    })
}

/// Load a persisted run result from its output directory.
pub fn load_result(dir: &Path) -> Result<ExperimentResult> {
    read_json(&dir.join(RESULT_FILE), "experiment result")
}

fn gather(labels: &[u32], indices: &[usize]) -> Vec<u32> {
    indices.iter().map(|&i| labels[i]).collect()
}

/// Map a model's probability columns (its training classes) onto the full
/// class grid; classes the model never saw get zero columns.
fn expand_probs(probs: &Array2<f64>, classes: &[u32], n_classes: usize) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((probs.nrows(), n_classes));
    for (j, &class) in classes.iter().enumerate() {
        out.column_mut(class as usize).assign(&probs.column(j));
    }
    out
}

/// Row argmax with ties to the lowest column. Columns are class ids here, so
/// this is the documented lowest-label tie-break.
fn argmax_labels(probs: ArrayView2<f64>) -> Vec<u32> {
    probs
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best as u32
        })
        .collect()
}

fn probs_to_rows(probs: &Array2<f64>) -> Vec<Vec<f64>> {
    probs.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// One classifier's raw outputs on one fold.
struct FoldOutput {
    predicted: Vec<u32>,
    /// Full-width probabilities, columns = class ids.
    probs: Array2<f64>,
    train_seconds: f64,
    predict_seconds: f64,
}

/// Everything produced by evaluating one backbone's features.
struct BackboneEvalData {
    folds: Vec<PredFold>,
    outputs: BTreeMap<ClassifierId, Vec<FoldOutput>>,
    reports: BTreeMap<ClassifierId, CvReport>,
    /// Leak-free holdout ranking: per classifier, (mean inner-CV accuracy,
    /// per-inner-fold predictions).
    ranking: Option<BTreeMap<ClassifierId, (f64, Vec<RankFold>)>>,
}

fn train_and_predict(
    spec: &ClassifierSpec,
    features: &FeatureMatrix,
    train_idx: &[usize],
    test_idx: &[usize],
    n_classes: usize,
) -> Result<FoldOutput> {
    let x_train = features.values.select(Axis(0), train_idx);
    let y_train = gather(&features.labels, train_idx);
    let model = train(spec, x_train.view(), &y_train)?;
    let x_test = features.values.select(Axis(0), test_idx);
    let started = Instant::now();
    let raw = model.predict_proba(x_test.view())?;
    let predict_seconds = started.elapsed().as_secs_f64();
    let probs = expand_probs(&raw, &model.classes, n_classes);
    let predicted = argmax_labels(probs.view());
    Ok(FoldOutput {
        predicted,
        probs,
        train_seconds: model.train_seconds,
        predict_seconds,
    })
}

/// Train and score every classifier on every fold. Classifiers within a fold
/// run in parallel; outputs collect into id-keyed maps so the result is
/// independent of scheduling.
fn evaluate_backbone(
    features: &FeatureMatrix,
    fold_pairs: &[(Vec<usize>, Vec<usize>)],
    specs: &[ClassifierSpec],
    n_classes: usize,
) -> Result<BackboneEvalData> {
    let mut outputs: BTreeMap<ClassifierId, Vec<FoldOutput>> = specs
        .iter()
        .map(|s| (s.classifier_id, Vec::with_capacity(fold_pairs.len())))
        .collect();
    let mut folds = Vec::with_capacity(fold_pairs.len());
    for (f, (train_idx, test_idx)) in fold_pairs.iter().enumerate() {
        let fold_results: Vec<(ClassifierId, FoldOutput)> = specs
            .par_iter()
            .map(|spec| {
                train_and_predict(spec, features, train_idx, test_idx, n_classes)
                    .map(|out| (spec.classifier_id, out))
                    .map_err(|source| Error::InFold {
                        fold: f,
                        source: Box::new(Error::in_stage(spec.classifier_id.to_string(), source)),
                    })
            })
            .collect::<Result<_>>()?;
        for (id, out) in fold_results {
            outputs.get_mut(&id).expect("id from specs").push(out);
        }
        folds.push(PredFold {
            fold: f,
            test_indices: test_idx.clone(),
            actual: gather(&features.labels, test_idx),
        });
    }

    let mut reports = BTreeMap::new();
    for spec in specs {
        let outs = &outputs[&spec.classifier_id];
        let bundles = folds
            .iter()
            .zip(outs)
            .map(|(fold, out)| {
                evaluate(
                    &fold.actual,
                    &out.predicted,
                    Some(out.probs.view()),
                    n_classes,
                    out.predict_seconds,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let aggregate = aggregate_folds(&bundles)?;
        reports.insert(
            spec.classifier_id,
            CvReport {
                folds: bundles,
                aggregate,
            },
        );
    }
    Ok(BackboneEvalData {
        folds,
        outputs,
        reports,
        ranking: None,
    })
}

/// Rank classifiers without touching the held-out test data: cross-validate
/// inside the training portion and average the fold accuracies.
fn inner_cv_ranking(
    features: &FeatureMatrix,
    train_idx: &[usize],
    specs: &[ClassifierSpec],
    n_classes: usize,
    seed: u64,
) -> Result<BTreeMap<ClassifierId, (f64, Vec<RankFold>)>> {
    let train_labels = gather(&features.labels, train_idx);
    let plan = make_label_folds(&train_labels, RANKING_FOLDS, seed)?;
    let mut accuracies: BTreeMap<ClassifierId, Vec<f64>> =
        specs.iter().map(|s| (s.classifier_id, Vec::new())).collect();
    let mut rank_folds: BTreeMap<ClassifierId, Vec<RankFold>> =
        specs.iter().map(|s| (s.classifier_id, Vec::new())).collect();
    for f in 0..plan.k {
        // Plan positions index into the train subset; map back to manifest
        // positions before slicing features.
        let inner_train: Vec<usize> = plan.train_indices(f).iter().map(|&p| train_idx[p]).collect();
        let inner_test: Vec<usize> = plan.test_indices(f).iter().map(|&p| train_idx[p]).collect();
        let actual = gather(&features.labels, &inner_test);
        let fold_results: Vec<(ClassifierId, FoldOutput)> = specs
            .par_iter()
            .map(|spec| {
                train_and_predict(spec, features, &inner_train, &inner_test, n_classes)
                    .map(|out| (spec.classifier_id, out))
                    .map_err(|source| Error::InFold {
                        fold: f,
                        source: Box::new(Error::in_stage(spec.classifier_id.to_string(), source)),
                    })
            })
            .collect::<Result<_>>()?;
        for (id, out) in fold_results {
            let correct = out
                .predicted
                .iter()
                .zip(&actual)
                .filter(|(p, a)| p == a)
                .count();
            accuracies
                .get_mut(&id)
                .expect("id from specs")
                .push(correct as f64 / actual.len() as f64);
            rank_folds.get_mut(&id).expect("id from specs").push(RankFold {
                test_indices: inner_test.clone(),
                actual: actual.clone(),
                predicted: out.predicted,
            });
        }
    }
    Ok(specs
        .iter()
        .map(|s| {
            let accs = &accuracies[&s.classifier_id];
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            (
                s.classifier_id,
                (mean, rank_folds.remove(&s.classifier_id).expect("id from specs")),
            )
        })
        .collect())
}

/// One ensemble's outputs on one fold.
struct EnsFold {
    predicted: Vec<u32>,
    /// Present in soft mode only; hard votes carry no probabilities.
    probs: Option<Array2<f64>>,
    /// Member prediction time plus the vote itself.
    seconds: f64,
}

fn ensemble_fold(
    members: &[&FoldOutput],
    weights: &[f64],
    mode: VotingMode,
    n_classes: usize,
) -> Result<EnsFold> {
    let member_seconds: f64 = members.iter().map(|o| o.predict_seconds).sum();
    let started = Instant::now();
    let (predicted, probs) = match mode {
        VotingMode::Hard => {
            let votes: Vec<Vec<u32>> = members.iter().map(|o| o.predicted.clone()).collect();
            (hard_vote(&votes, weights, n_classes)?, None)
        }
        VotingMode::Soft => {
            let views: Vec<ArrayView2<f64>> = members.iter().map(|o| o.probs.view()).collect();
            let combined = soft_vote_probs(&views, weights)?;
            (argmax_labels(combined.view()), Some(combined))
        }
    };
    Ok(EnsFold {
        predicted,
        probs,
        seconds: member_seconds + started.elapsed().as_secs_f64(),
    })
}

/// Evaluate one voting mode over every fold of one backbone, from the stored
/// member outputs.
fn ensemble_report(
    data: &BackboneEvalData,
    selected: &[ClassifierId],
    weights: &[f64],
    mode: VotingMode,
    n_classes: usize,
) -> Result<(CvReport, Vec<EnsFold>)> {
    let mut ens_folds = Vec::with_capacity(data.folds.len());
    let mut bundles = Vec::with_capacity(data.folds.len());
    for (f, fold) in data.folds.iter().enumerate() {
        let members: Vec<&FoldOutput> = selected.iter().map(|id| &data.outputs[id][f]).collect();
        let ens = ensemble_fold(&members, weights, mode, n_classes)?;
        bundles.push(evaluate(
            &fold.actual,
            &ens.predicted,
            ens.probs.as_ref().map(|p| p.view()),
            n_classes,
            ens.seconds,
        )?);
        ens_folds.push(ens);
    }
    let aggregate = aggregate_folds(&bundles)?;
    Ok((
        CvReport {
            folds: bundles,
            aggregate,
        },
        ens_folds,
    ))
}

/// Best (backbone, mode) by mean ensemble accuracy at reporting precision.
/// Ties between modes prefer soft; ties between backbones keep the earlier
/// config order.
fn choose(
    backbone_order: &[crate::features::BackboneId],
    modes: &[VotingMode],
    evals: &[EnsembleEval],
) -> (crate::features::BackboneId, VotingMode) {
    let accuracy = |backbone, mode| -> i64 {
        let eval = evals
            .iter()
            .find(|e| e.backbone_id == backbone && e.mode == mode)
            .expect("every configured (backbone, mode) was evaluated");
        quantize_score(eval.report.aggregate.accuracy.mean)
    };
    let mut best: Option<(i64, crate::features::BackboneId, VotingMode)> = None;
    for &backbone in backbone_order {
        let mut mode_best: Option<(i64, VotingMode)> = None;
        for &mode in modes {
            let score = accuracy(backbone, mode);
            let wins = match mode_best {
                None => true,
                Some((best_score, best_mode)) => {
                    score > best_score
                        || (score == best_score
                            && mode == VotingMode::Soft
                            && best_mode != VotingMode::Soft)
                }
            };
            if wins {
                mode_best = Some((score, mode));
            }
        }
        let (score, mode) = mode_best.expect("modes is non-empty");
        // Strictly greater only: an equal later backbone must not displace an
        // earlier one.
        if best.map_or(true, |(best_score, _, _)| score > best_score) {
            best = Some((score, backbone, mode));
        }
    }
    let (_, backbone, mode) = best.expect("backbone_order is non-empty");
    (backbone, mode)
}

/// Pool per-fold ensemble outputs into one prediction set over every tested
/// sample and score it.
fn pool_folds(
    folds: &[PredFold],
    ens_folds: &[EnsFold],
    n_classes: usize,
) -> Result<MetricsBundle> {
    let mut actual = Vec::new();
    let mut predicted = Vec::new();
    let mut prob_rows: Vec<Vec<f64>> = Vec::new();
    let mut have_probs = true;
    let mut seconds = 0.0;
    for (fold, ens) in folds.iter().zip(ens_folds) {
        actual.extend_from_slice(&fold.actual);
        predicted.extend_from_slice(&ens.predicted);
        seconds += ens.seconds;
        match &ens.probs {
            Some(p) => prob_rows.extend(probs_to_rows(p)),
            None => have_probs = false,
        }
    }
    let probs_matrix = if have_probs {
        let mut m = Array2::<f64>::zeros((prob_rows.len(), n_classes));
        for (i, row) in prob_rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[[i, j]] = v;
            }
        }
        Some(m)
    } else {
        None
    };
    evaluate(
        &actual,
        &predicted,
        probs_matrix.as_ref().map(|m| m.view()),
        n_classes,
        seconds,
    )
}

/// Load cached features for the key, or run the backbone and fill the cache.
/// The boolean reports whether the cache was hit.
fn extract_or_load(
    spec: &BackboneSpec,
    manifest: &DatasetManifest,
    config: &ExperimentConfig,
) -> Result<(FeatureMatrix, bool)> {
    let key = CacheKey {
        dataset_id: manifest.dataset_id.clone(),
        backbone_id: spec.backbone_id,
        preprocess_hash: config.preprocess.hash(),
    };
    match load_features(&key, &config.cache_dir) {
        Ok(matrix) => {
            log::debug!("feature cache hit for {}", spec.backbone_id);
            return Ok((matrix, true));
        }
        Err(e) => log::debug!("feature cache miss for {}: {e}", spec.backbone_id),
    }
    let backbone = spec.load()?;
    let matrix = extract_features(&*backbone, manifest, &config.preprocess, EXTRACT_BATCH)?;
    store_features(&matrix, &config.cache_dir)?;
    Ok((matrix, false))
}

/// Best-effort failure marker so interrupted output directories are
/// self-describing. Never masks the original error.
fn write_failure(output_dir: &Path, error: &Error) {
    let doc = serde_json::json!({
        "error": error.to_string(),
        "class": format!("{:?}", error.class()).to_lowercase(),
    });
    if std::fs::create_dir_all(output_dir).is_ok() {
        if let Ok(mut bytes) = serde_json::to_vec_pretty(&doc) {
            bytes.push(b'\n');
            let _ = atomic_write(&output_dir.join(FAILURE_FILE), &bytes);
        }
    }
}

/// Run the whole pipeline described by `config` and persist every output
/// under its output directory. See the module docs for the stage order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    match execute(config) {
        Ok(result) => {
            // A failure marker from an earlier broken run must not outlive a
            // successful one.
            let _ = std::fs::remove_file(config.output_dir.join(FAILURE_FILE));
            Ok(result)
        }
        Err(error) => {
            write_failure(&config.output_dir, &error);
            Err(error)
        }
    }
}

fn execute(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let total_started = Instant::now();

    config.validate().map_err(|e| Error::in_stage("config", e))?;
    let label_map = config.label_map()?;
    let n_classes = label_map.n_classes();
    let seed = config.evaluation.seed;
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| Error::io(config.output_dir.clone(), e))?;
    config.save(&config.output_dir.join(CONFIG_COPY_FILE))?;

    // Scan.
    log::info!("scanning {}", config.dataset.root.display());
    let scan_started = Instant::now();
    let (manifest, skips) =
        scan_dataset(&config.dataset.root, &label_map).map_err(|e| Error::in_stage("scan", e))?;
    let scan_seconds = scan_started.elapsed().as_secs_f64();
    manifest.save(&config.output_dir.join(MANIFEST_FILE))?;
    if !skips.records.is_empty() {
        skips.write_jsonl(&config.output_dir.join("skipped.jsonl"))?;
    }
    log::info!(
        "scanned {} samples across {} classes ({} skipped)",
        manifest.len(),
        n_classes,
        skips.records.len()
    );

    // Fold plan.
    let fold_pairs: Vec<(Vec<usize>, Vec<usize>)> = match config.evaluation.mode {
        EvalMode::Kfold => {
            let plan = make_folds(&manifest, config.evaluation.k, seed)
                .map_err(|e| Error::in_stage("split", e))?;
            (0..plan.k)
                .map(|f| (plan.train_indices(f), plan.test_indices(f).to_vec()))
                .collect()
        }
        EvalMode::Holdout => {
            let (train_idx, test_idx) =
                stratified_split(&manifest, config.evaluation.train_fraction, seed)
                    .map_err(|e| Error::in_stage("split", e))?;
            vec![(train_idx, test_idx)]
        }
    };

    // Extract and evaluate per backbone.
    let specs = config.classifier_specs();
    let classifier_ids: Vec<ClassifierId> = specs.iter().map(|s| s.classifier_id).collect();
    let mut board = Leaderboard::new(classifier_ids.clone(), config.backbone_ids());
    let mut extract_timings = Vec::new();
    let mut train_timings = Vec::new();
    let mut classifier_evals = Vec::new();
    let mut evaluate_seconds = 0.0;
    let mut backbone_data: BTreeMap<crate::features::BackboneId, BackboneEvalData> =
        BTreeMap::new();
    let rank_leak_free =
        config.evaluation.mode == EvalMode::Holdout && !config.hpf.paper_faithful;

    for backbone_spec in &config.backbones {
        let backbone_id = backbone_spec.backbone_id;
        log::info!("extracting features with {backbone_id}");
        let extract_started = Instant::now();
        let (features, cache_hit) = extract_or_load(backbone_spec, &manifest, config)
            .map_err(|e| Error::in_stage(format!("extract/{backbone_id}"), e))?;
        extract_timings.push(ExtractTiming {
            backbone_id,
            seconds: extract_started.elapsed().as_secs_f64(),
            cache_hit,
        });

        log::info!("evaluating {} classifiers under {backbone_id}", specs.len());
        let eval_started = Instant::now();
        let mut data = evaluate_backbone(&features, &fold_pairs, &specs, n_classes)
            .map_err(|e| Error::in_stage(format!("evaluate/{backbone_id}"), e))?;
        if rank_leak_free {
            data.ranking = Some(
                inner_cv_ranking(
                    &features,
                    &fold_pairs[0].0,
                    &specs,
                    n_classes,
                    derive_seed(seed, "ranking-cv"),
                )
                .map_err(|e| Error::in_stage(format!("rank/{backbone_id}"), e))?,
            );
        }
        evaluate_seconds += eval_started.elapsed().as_secs_f64();

        for &classifier_id in &classifier_ids {
            let cell = match &data.ranking {
                Some(ranking) => ranking[&classifier_id].0,
                None => data.reports[&classifier_id].aggregate.accuracy.mean,
            };
            board
                .set(classifier_id, backbone_id, cell)
                .map_err(|e| Error::in_stage("leaderboard", e))?;
            let outs = &data.outputs[&classifier_id];
            train_timings.push(TrainTiming {
                backbone_id,
                classifier_id,
                train_seconds: outs.iter().map(|o| o.train_seconds).sum(),
                predict_seconds: outs.iter().map(|o| o.predict_seconds).sum(),
            });
            classifier_evals.push(ClassifierEval {
                backbone_id,
                classifier_id,
                report: data.reports[&classifier_id].clone(),
            });
        }
        backbone_data.insert(backbone_id, data);
    }

    // Select.
    let selected = select_top_k(&board, config.hpf.top_k, config.hpf.criterion)
        .map_err(|e| Error::in_stage("select", e))?;
    let scores: BTreeMap<ClassifierId, f64> = classifier_ids
        .iter()
        .map(|&c| {
            let score = match config.hpf.criterion {
                SelectionCriterion::AverageAcrossBackbones => board.average_across_backbones(c)?,
                SelectionCriterion::PerBackbone(b) => board.cell_score(c, b)?,
            };
            Ok((c, score))
        })
        .collect::<Result<_>>()
        .map_err(|e: Error| Error::in_stage("select", e))?;
    let selection = HpfSelection {
        selected: selected.clone(),
        top_k: config.hpf.top_k,
        criterion: config.hpf.criterion,
        scores,
    };
    log::info!(
        "selected {}",
        selected.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
    );

    // Ensembles over the stored member outputs.
    let weights = config
        .ensemble
        .weights
        .clone()
        .unwrap_or_else(|| vec![1.0; config.hpf.top_k]);
    let ensemble_started = Instant::now();
    let mut ensemble_evals = Vec::new();
    let mut ens_folds_store: Vec<(crate::features::BackboneId, VotingMode, Vec<EnsFold>)> =
        Vec::new();
    for backbone_spec in &config.backbones {
        let backbone_id = backbone_spec.backbone_id;
        let data = &backbone_data[&backbone_id];
        for &mode in &config.ensemble.modes {
            let (report, ens_folds) =
                ensemble_report(data, &selected, &weights, mode, n_classes)
                    .map_err(|e| Error::in_stage(format!("ensemble/{backbone_id}/{mode}"), e))?;
            ensemble_evals.push(EnsembleEval {
                backbone_id,
                mode,
                report,
            });
            ens_folds_store.push((backbone_id, mode, ens_folds));
        }
    }
    let ensemble_seconds = ensemble_started.elapsed().as_secs_f64();

    // Choose mode and backbone.
    let (chosen_backbone, chosen_mode) = choose(
        &config.backbone_ids(),
        &config.ensemble.modes,
        &ensemble_evals,
    );
    log::info!("chose {chosen_mode} voting on {chosen_backbone}");

    // Final pooled metrics for the chosen pair.
    let chosen_folds = ens_folds_store
        .iter()
        .find(|(b, m, _)| *b == chosen_backbone && *m == chosen_mode)
        .map(|(_, _, f)| f)
        .expect("chosen pair was evaluated");
    let final_metrics = pool_folds(
        &backbone_data[&chosen_backbone].folds,
        chosen_folds,
        n_classes,
    )
    .map_err(|e| Error::in_stage("final-metrics", e))?;

    // Refit the winning ensemble for deployment. Kfold refits on everything;
    // holdout stays on the training portion so the bundle never saw the test
    // data its reported metrics came from.
    let refit_started = Instant::now();
    let refit_indices: Vec<usize> = match config.evaluation.mode {
        EvalMode::Kfold => (0..manifest.len()).collect(),
        EvalMode::Holdout => fold_pairs[0].0.clone(),
    };
    let chosen_backbone_spec = config
        .backbones
        .iter()
        .find(|b| b.backbone_id == chosen_backbone)
        .expect("chosen backbone is configured");
    let (features, _) = extract_or_load(chosen_backbone_spec, &manifest, config)
        .map_err(|e| Error::in_stage("refit", e))?;
    let x_refit = features.values.select(Axis(0), &refit_indices);
    let y_refit = gather(&features.labels, &refit_indices);
    let members = selected
        .par_iter()
        .map(|id| {
            let spec = specs
                .iter()
                .find(|s| s.classifier_id == *id)
                .expect("selected ids come from specs");
            train(spec, x_refit.view(), &y_refit)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::in_stage("refit", e))?;
    let ensemble = EnsembleModel::new(members, Some(weights.clone()), chosen_mode)
        .map_err(|e| Error::in_stage("refit", e))?;
    save_bundle(
        &config.output_dir.join(BUNDLE_DIR),
        chosen_backbone_spec,
        &config.preprocess,
        &label_map,
        &ensemble,
    )
    .map_err(|e| Error::in_stage("bundle", e))?;
    let refit_seconds = refit_started.elapsed().as_secs_f64();

    // Persist predictions, result, and summary.
    let predictions_dir = config.output_dir.join(PREDICTIONS_DIR);
    std::fs::create_dir_all(&predictions_dir)
        .map_err(|e| Error::io(predictions_dir.clone(), e))?;
    for (backbone_id, data) in &backbone_data {
        let doc = BackbonePredictions {
            backbone_id: *backbone_id,
            n_classes,
            folds: data.folds.clone(),
            classifiers: data
                .outputs
                .iter()
                .map(|(id, outs)| {
                    let converted = outs
                        .iter()
                        .map(|o| PredOutput {
                            predicted: o.predicted.clone(),
                            probabilities: probs_to_rows(&o.probs),
                        })
                        .collect();
                    (*id, converted)
                })
                .collect(),
            ranking: data.ranking.as_ref().map(|ranking| {
                ranking
                    .iter()
                    .map(|(id, (_, folds))| (*id, folds.clone()))
                    .collect()
            }),
        };
        write_json(
            &predictions_dir.join(format!("{backbone_id}.json")),
            &doc,
            "backbone predictions",
        )?;
    }

    let provenance = Provenance {
        config_hash: config.config_hash()?,
        dataset_id: manifest.dataset_id.clone(),
        seed,
        eval_mode: config.evaluation.mode,
        n_samples: manifest.len(),
        n_classes,
        class_names: label_map.names_by_id(),
    };
    let timings = Timings {
        scan_seconds,
        extract: extract_timings,
        evaluate_seconds,
        train: train_timings,
        ensemble_seconds,
        refit_seconds,
        total_seconds: total_started.elapsed().as_secs_f64(),
    };
    let result = ExperimentResult {
        provenance,
        leaderboard: board,
        selection,
        classifier_evals,
        ensemble_evals,
        chosen_mode,
        chosen_backbone,
        final_metrics,
        timings,
    };
    write_json(
        &config.output_dir.join(RESULT_FILE),
        &result,
        "experiment result",
    )?;
    write_json(
        &config.output_dir.join(SUMMARY_FILE),
        &result.summary(),
        "experiment summary",
    )?;
    log::info!(
        "final accuracy {:.2}% in {:.1}s",
        result.final_metrics.accuracy * 100.0,
        result.timings.total_seconds
    );
    Ok(result)
}
