//! Report emission: tables as CSV, metrics as JSON, charts as PNG.
//!
//! Numeric files are authoritative and byte-deterministic for a given
//! result; images are convenience renderings of the same numbers. Metrics
//! are stored as fractions everywhere else and rendered as percentages with
//! two decimals here, matching the usual presentation of accuracy tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::VotingMode;
use crate::error::{Error, Result};
use crate::features::BackboneId;
use crate::metrics::{AggregateMetrics, MetricsBundle};
use crate::util::{atomic_write, sha256_hex};
use crate::zoo::ClassifierId;

use super::plot;
use super::result::ExperimentResult;
use super::runner::write_json;

pub const REPORT_MANIFEST_FILE: &str = "report_manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportFile {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Index of everything a report emission wrote.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub files: Vec<ReportFile>,
}

impl ReportManifest {
    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|f| f.name.as_str()).collect()
    }
}

fn pct(fraction: f64) -> String {
    format!("{:.2}", fraction * 100.0)
}

fn write_text(dir: &Path, name: &str, content: &str, files: &mut Vec<String>) -> Result<()> {
    atomic_write(&dir.join(name), content.as_bytes())?;
    files.push(name.to_string());
    Ok(())
}

fn leaderboard_csv(result: &ExperimentResult) -> Result<String> {
    let board = &result.leaderboard;
    let mut out = String::from("classifier");
    for backbone in &board.backbones {
        out.push(',');
        out.push_str(backbone.as_str());
    }
    out.push_str(",average\n");
    for &classifier in &board.classifiers {
        out.push_str(classifier.display_name());
        for &backbone in &board.backbones {
            out.push(',');
            out.push_str(&pct(board.cell_score(classifier, backbone)?));
        }
        out.push(',');
        out.push_str(&pct(board.average_across_backbones(classifier)?));
        out.push('\n');
    }
    Ok(out)
}

fn ensemble_accuracy_csv(result: &ExperimentResult) -> String {
    // Mode columns in first-evaluated order, rows in config backbone order.
    let mut modes: Vec<VotingMode> = Vec::new();
    for eval in &result.ensemble_evals {
        if !modes.contains(&eval.mode) {
            modes.push(eval.mode);
        }
    }
    let mut out = String::from("backbone");
    for mode in &modes {
        out.push(',');
        out.push_str(mode.as_str());
    }
    out.push('\n');
    for &backbone in &result.leaderboard.backbones {
        out.push_str(backbone.as_str());
        for &mode in &modes {
            out.push(',');
            match result.ensemble_accuracy(backbone, mode) {
                Some(accuracy) => out.push_str(&pct(accuracy)),
                None => {}
            }
        }
        out.push('\n');
    }
    out
}

fn confusion_csv(class_names: &[String], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = String::from("actual");
    for name in class_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (name, cells) in class_names.iter().zip(rows) {
        out.push_str(name);
        for cell in cells {
            out.push(',');
            out.push_str(&cell);
        }
        out.push('\n');
    }
    out
}

fn timing_row(out: &mut String, stage: &str, seconds: f64) {
    // Whole seconds plus exact-ish milliseconds; sub-second stages round to
    // 0s the way timing tables usually present them.
    out.push_str(&format!(
        "{stage},{},{}\n",
        seconds.round() as i64,
        (seconds * 1000.0).round() as i64
    ));
}

fn timing_csv(result: &ExperimentResult) -> String {
    let t = &result.timings;
    let mut out = String::from("stage,seconds,milliseconds\n");
    timing_row(&mut out, "scan", t.scan_seconds);
    for e in &t.extract {
        let stage = format!(
            "extract/{}{}",
            e.backbone_id,
            if e.cache_hit { " (cached)" } else { "" }
        );
        timing_row(&mut out, &stage, e.seconds);
    }
    timing_row(&mut out, "evaluate", t.evaluate_seconds);
    for tt in &t.train {
        timing_row(
            &mut out,
            &format!("train/{}/{}", tt.backbone_id, tt.classifier_id),
            tt.train_seconds,
        );
    }
    timing_row(&mut out, "ensemble", t.ensemble_seconds);
    timing_row(&mut out, "refit", t.refit_seconds);
    timing_row(&mut out, "predict", result.final_metrics.prediction_seconds);
    timing_row(&mut out, "total", t.total_seconds);
    out
}

#[derive(Serialize)]
struct ClassifierAggregate<'a> {
    backbone_id: BackboneId,
    classifier_id: ClassifierId,
    aggregate: &'a AggregateMetrics,
}

#[derive(Serialize)]
struct EnsembleAggregate<'a> {
    backbone_id: BackboneId,
    mode: VotingMode,
    aggregate: &'a AggregateMetrics,
}

#[derive(Serialize)]
struct MetricsDoc<'a> {
    final_metrics: &'a MetricsBundle,
    classifiers: Vec<ClassifierAggregate<'a>>,
    ensembles: Vec<EnsembleAggregate<'a>>,
}

/// Write every report file for a completed result into `out_dir` and return
/// the manifest of what was written. Identical results produce byte-identical
/// CSV and JSON files.
pub fn emit_report(result: &ExperimentResult, out_dir: &Path) -> Result<ReportManifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.to_path_buf(), e))?;
    let mut files: Vec<String> = Vec::new();
    let class_names = &result.provenance.class_names;

    write_text(out_dir, "leaderboard.csv", &leaderboard_csv(result)?, &mut files)?;
    write_text(
        out_dir,
        "ensemble_accuracy.csv",
        &ensemble_accuracy_csv(result),
        &mut files,
    )?;

    let metrics_doc = MetricsDoc {
        final_metrics: &result.final_metrics,
        classifiers: result
            .classifier_evals
            .iter()
            .map(|e| ClassifierAggregate {
                backbone_id: e.backbone_id,
                classifier_id: e.classifier_id,
                aggregate: &e.report.aggregate,
            })
            .collect(),
        ensembles: result
            .ensemble_evals
            .iter()
            .map(|e| EnsembleAggregate {
                backbone_id: e.backbone_id,
                mode: e.mode,
                aggregate: &e.report.aggregate,
            })
            .collect(),
    };
    write_json(&out_dir.join("metrics.json"), &metrics_doc, "report metrics")?;
    files.push("metrics.json".to_string());

    // Confusion matrix: counts, row-normalized percentages, and
    // total-normalized percentages (the latter sum to 100 over the matrix).
    let confusion = &result.final_metrics.confusion;
    let total: u64 = confusion.counts.iter().flatten().sum();
    write_text(
        out_dir,
        "confusion_counts.csv",
        &confusion_csv(
            class_names,
            confusion
                .counts
                .iter()
                .map(|row| row.iter().map(|c| c.to_string()).collect()),
        ),
        &mut files,
    )?;
    write_text(
        out_dir,
        "confusion_row_pct.csv",
        &confusion_csv(
            class_names,
            confusion.counts.iter().map(|row| {
                let row_total: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| {
                        if row_total == 0 {
                            "0.00".to_string()
                        } else {
                            pct(c as f64 / row_total as f64)
                        }
                    })
                    .collect()
            }),
        ),
        &mut files,
    )?;
    write_text(
        out_dir,
        "confusion_total_pct.csv",
        &confusion_csv(
            class_names,
            confusion
                .counts
                .iter()
                .map(|row| row.iter().map(|&c| pct(c as f64 / total as f64)).collect()),
        ),
        &mut files,
    )?;
    plot::confusion_heatmap(
        &out_dir.join("confusion_heatmap.png"),
        "CONFUSION MATRIX",
        class_names,
        &confusion.counts,
    )?;
    files.push("confusion_heatmap.png".to_string());

    // ROC exists only when the chosen ensemble produced probabilities.
    if let Some(roc) = &result.final_metrics.roc {
        let mut csv = String::from("class,fpr,tpr\n");
        let mut curves = Vec::new();
        for (class, class_roc) in roc.per_class.iter().enumerate() {
            if let Some(class_roc) = class_roc {
                let name = &class_names[class];
                let mut points = Vec::with_capacity(class_roc.points.len());
                for &(fpr, tpr) in &class_roc.points {
                    csv.push_str(&format!("{name},{fpr},{tpr}\n"));
                    points.push((fpr, tpr));
                }
                curves.push((name.clone(), points));
            }
        }
        write_text(out_dir, "roc.csv", &csv, &mut files)?;
        plot::roc_chart(&out_dir.join("roc.png"), "ROC (ONE VS REST)", &curves)?;
        files.push("roc.png".to_string());
    }

    // Accuracy bars: each classifier under the chosen backbone, then the
    // chosen ensemble.
    let mut labels: Vec<String> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for &classifier in &result.leaderboard.classifiers {
        labels.push(classifier.display_name().to_string());
        values.push(100.0 * result.leaderboard.cell_score(classifier, result.chosen_backbone)?);
    }
    labels.push("ENS".to_string());
    values.push(100.0 * result.final_metrics.accuracy);
    plot::bar_chart(
        &out_dir.join("accuracy_bars.png"),
        &format!("ACCURACY ON {}", result.chosen_backbone.as_str().to_uppercase()),
        &labels,
        &values,
        Some(100.0),
        "%",
    )?;
    files.push("accuracy_bars.png".to_string());

    let errors = &result.final_metrics.errors;
    plot::bar_chart(
        &out_dir.join("error_bars.png"),
        "PREDICTION ERRORS",
        &["MAE".to_string(), "MSE".to_string(), "RMSE".to_string()],
        &[errors.mae, errors.mse, errors.rmse],
        None,
        "",
    )?;
    files.push("error_bars.png".to_string());

    write_text(out_dir, "timing.csv", &timing_csv(result), &mut files)?;

    // Manifest last so it can describe everything else.
    files.sort();
    let mut entries = Vec::with_capacity(files.len());
    for name in &files {
        let bytes = crate::util::read_bytes(&out_dir.join(name))?;
        entries.push(ReportFile {
            name: name.clone(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = ReportManifest { files: entries };
    write_json(
        &out_dir.join(REPORT_MANIFEST_FILE),
        &manifest,
        "report manifest",
    )?;
    Ok(manifest)
}
