use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::commands::read_json;
use super::manifest::RunRecorder;
use super::ReportArgs;
use crate::error::{Error, Result};
use crate::numeric::mean_and_variance;
use crate::training::{ExperimentKind, ExperimentReport, InitMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

impl Spread {
    fn of(values: Vec<f64>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let (mean, var) = mean_and_variance(&values);
        Some(Self {
            mean,
            std: var.sqrt(),
            values,
        })
    }
}

/// One experiment directory, condensed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub dir: String,
    pub experiment: ExperimentKind,
    pub init_mode: InitMode,
    pub holdout: Option<usize>,
    pub seeds: Vec<u64>,
    /// Keyed by phase name.
    pub final_losses: BTreeMap<String, Spread>,
    pub clustering_accuracy: Option<Spread>,
    pub initial_clustering_accuracy: Option<Spread>,
    /// Mean success rate over primitives, per seed.
    pub success_rate: Option<Spread>,
    pub retained_loss: Option<Spread>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub runs: Vec<RunSummary>,
    /// Final loss of the last phase and clustering accuracy per init mode.
    pub table: BTreeMap<String, TableRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub experiment: ExperimentKind,
    pub phase: String,
    pub final_loss_mean: f64,
    pub final_loss_std: f64,
    pub clustering_accuracy: Option<f64>,
    pub initial_clustering_accuracy: Option<f64>,
    pub success_rate: Option<f64>,
}

fn kind_name(k: ExperimentKind) -> &'static str {
    match k {
        ExperimentKind::Intra => "intra",
        ExperimentKind::Inter => "inter",
    }
}

fn accuracies(report: &ExperimentReport, initial: bool) -> Option<Spread> {
    let vals: Vec<f64> = report
        .runs
        .iter()
        .filter_map(|r| if initial { &r.initial_clustering } else { &r.clustering }.as_ref())
        .filter_map(|c| c.accuracy)
        .collect();
    Spread::of(vals)
}

pub fn summarize_report(dir: &str, report: &ExperimentReport) -> RunSummary {
    let mut final_losses = BTreeMap::new();
    if let Some(first) = report.runs.first() {
        for (i, ph) in first.phases.iter().enumerate() {
            if let Some(s) = Spread::of(report.final_losses(i)) {
                final_losses.insert(ph.name.clone(), s);
            }
        }
    }
    let success = report
        .runs
        .iter()
        .filter(|r| !r.success_rates.is_empty())
        .map(|r| r.success_rates.iter().map(|s| s.rate).sum::<f64>() / r.success_rates.len() as f64)
        .collect();
    RunSummary {
        dir: dir.to_string(),
        experiment: report.experiment,
        init_mode: report.init_mode,
        holdout: report.holdout,
        seeds: report.runs.iter().map(|r| r.seed).collect(),
        final_losses,
        clustering_accuracy: accuracies(report, false),
        initial_clustering_accuracy: accuracies(report, true),
        success_rate: Spread::of(success),
        retained_loss: Spread::of(report.runs.iter().filter_map(|r| r.retained_loss).collect()),
    }
}

fn table_row(report: &ExperimentReport, summary: &RunSummary) -> Option<TableRow> {
    let last = report.runs.first()?.phases.last()?.name.clone();
    let loss = summary.final_losses.get(&last)?;
    Some(TableRow {
        experiment: report.experiment,
        phase: last,
        final_loss_mean: loss.mean,
        final_loss_std: loss.std,
        clustering_accuracy: summary.clustering_accuracy.as_ref().map(|s| s.mean),
        initial_clustering_accuracy: summary.initial_clustering_accuracy.as_ref().map(|s| s.mean),
        success_rate: summary.success_rate.as_ref().map(|s| s.mean),
    })
}

/// `(seed, τ, R²)` for every sweep point of every run.
pub(crate) fn sweep_rows(report: &ExperimentReport) -> Vec<Vec<String>> {
    report
        .runs
        .iter()
        .filter_map(|r| r.clustering.as_ref().map(|c| (r.seed, c)))
        .flat_map(|(seed, c)| {
            c.sweep
                .iter()
                .map(move |p| vec![seed.to_string(), p.tau.to_string(), p.r_squared.to_string()])
        })
        .collect()
}

/// `(seed, sample, primitive, label)` of the final clustering, grouped by
/// primitive and ordered by sample index within each group.
pub(crate) fn cluster_label_rows(report: &ExperimentReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (r, run) in report.runs.iter().enumerate() {
        let Some(c) = &run.clustering else { continue };
        let (Some(train), Some(eval)) = (report.train_indices.get(r), report.eval_indices.get(r)) else {
            continue;
        };
        let mut entries: Vec<(usize, usize, usize)> = train
            .iter()
            .chain(eval)
            .zip(&c.labels)
            .map(|(s, l)| (report.primitive_ids.get(*s).copied().unwrap_or(usize::MAX), *s, *l))
            .collect();
        entries.sort_unstable();
        rows.extend(
            entries
                .into_iter()
                .map(|(p, s, l)| vec![run.seed.to_string(), s.to_string(), p.to_string(), l.to_string()]),
        );
    }
    rows
}

pub(crate) fn report(args: &ReportArgs, argv: &[String]) -> Result<()> {
    let mut loaded = Vec::new();
    for dir in &args.runs {
        let path = dir.join("report.json");
        if !path.is_file() {
            return Err(Error::InvalidArgument(format!("{} has no report.json", dir.display())));
        }
        loaded.push((dir.display().to_string(), path));
    }
    let mut rec = RunRecorder::new("report", argv, Some(&args.out))?;
    let mut reports = Vec::new();
    for (dir, path) in &loaded {
        rec.input(path)?;
        reports.push((dir.clone(), read_json::<ExperimentReport>(path)?));
    }

    let mut runs = Vec::new();
    let mut table = BTreeMap::new();
    let mut csv_table = Vec::new();
    let mut curves = Vec::new();
    let mut sweeps = Vec::new();
    let mut labels = Vec::new();
    for (dir, report) in &reports {
        let s = summarize_report(dir, report);
        let mode = report.init_mode.name();
        let kind = kind_name(report.experiment);
        if let Some(row) = table_row(report, &s) {
            let mut key = mode.to_string();
            if table.contains_key(&key) {
                key = format!("{mode}/{kind}");
            }
            let mut n = 2;
            while table.contains_key(&key) {
                key = format!("{mode}/{kind}/{n}");
                n += 1;
            }
            let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
            csv_table.push(vec![
                key.clone(),
                kind.to_string(),
                row.phase.clone(),
                row.final_loss_mean.to_string(),
                row.final_loss_std.to_string(),
                opt(row.clustering_accuracy),
                opt(row.initial_clustering_accuracy),
                opt(row.success_rate),
            ]);
            table.insert(key, row);
        }
        let phases = report.runs.first().map(|r| r.phases.len()).unwrap_or(0);
        for i in 0..phases {
            let name = &report.runs[0].phases[i].name;
            let len = report.runs.iter().map(|r| r.phases[i].curve.len()).min().unwrap_or(0);
            for e in 0..len {
                let vals: Vec<f64> = report.runs.iter().map(|r| r.phases[i].curve[e]).collect();
                let (m, v) = mean_and_variance(&vals);
                curves.push(vec![
                    mode.to_string(),
                    kind.to_string(),
                    name.clone(),
                    e.to_string(),
                    m.to_string(),
                    v.sqrt().to_string(),
                ]);
            }
        }
        for mut r in sweep_rows(report) {
            r.insert(0, mode.to_string());
            sweeps.push(r);
        }
        for mut r in cluster_label_rows(report) {
            r.insert(0, mode.to_string());
            labels.push(r);
        }
        runs.push(s);
    }
    let summary = ReportSummary { runs, table };
    rec.write_json("summary.json", &summary)?;
    rec.write_csv(
        "summary.csv",
        &[
            "init_mode",
            "experiment",
            "phase",
            "final_loss_mean",
            "final_loss_std",
            "clustering_accuracy",
            "initial_clustering_accuracy",
            "success_rate",
        ],
        &csv_table,
    )?;
    rec.write_csv("curves.csv", &["init_mode", "experiment", "phase", "epoch", "mean", "std"], &curves)?;
    rec.write_csv("tau_sweep.csv", &["init_mode", "seed", "tau", "r_squared"], &sweeps)?;
    rec.write_csv("cluster_labels.csv", &["init_mode", "seed", "sample", "primitive", "label"], &labels)?;
    rec.finish(serde_json::json!({ "runs": loaded.iter().map(|(d, _)| d).collect::<Vec<_>>() }))?;
    Ok(())
}
