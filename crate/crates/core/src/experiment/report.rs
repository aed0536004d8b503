//! Run summaries and the files written for them.

use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::dataset::Failure;
use super::protocol::{Protocol, Split};
use crate::classify::MetricsReport;
use crate::error::{Error, Result};
use crate::manipulate::ManipulationClass;
use crate::metrics::{QualityReport, Thresholds};
use crate::stego::EngineId;

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    #[serde(with = "crate::serde_inf")]
    pub mean: f64,
    #[serde(with = "crate::serde_inf")]
    pub std: f64,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        if !mean.is_finite() {
            return Self { mean, std: f64::NAN };
        }
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    /// `certifying` (stego vs cover) or `recovery` (revealed vs marker).
    pub task: String,
    pub engine: EngineId,
    pub n: usize,
    pub ssim: Stat,
    pub mse: Stat,
    pub psnr: Stat,
}

impl QualityRow {
    pub fn new(task: &str, engine: EngineId, reports: &[QualityReport]) -> Self {
        Self {
            task: task.into(),
            engine,
            n: reports.len(),
            ssim: Stat::of(reports.iter().map(|q| q.ssim)),
            mse: Stat::of(reports.iter().map(|q| q.mse)),
            psnr: Stat::of(reports.iter().map(|q| q.psnr)),
        }
    }
}

/// Revealed-marker quality for one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStat {
    pub spec_id: String,
    pub class: ManipulationClass,
    pub n: usize,
    pub ssim: Stat,
    pub psnr: Stat,
    /// Baseline mean SSIM minus this cell's mean SSIM.
    pub ssim_drop: f64,
    pub flag_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineSummary {
    pub engine: EngineId,
    pub thresholds: Thresholds,
    pub samples: usize,
    pub baseline_ssim: Stat,
    pub baseline_flag_rate: f64,
    /// Flag rate pooled over the severe end of every class.
    pub severe_flag_rate: f64,
    pub severe: Vec<CellStat>,
    pub cells: Vec<CellStat>,
    pub failures: Vec<Failure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub truth: ManipulationClass,
    pub predicted: ManipulationClass,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub train_engine: EngineId,
    pub test_engine: EngineId,
    pub protocol: Protocol,
    pub intra: bool,
    pub n_train: usize,
    pub n_test: usize,
    /// Cells excluded from training (empty under P8-8).
    pub held_out: Vec<String>,
    /// The morph class has a single cell, so under P6-8 it is both trained and
    /// tested; its per-class score is not an unseen-variation result.
    pub morph_seen_in_training: bool,
    pub final_train_loss: f64,
    pub metrics: MetricsReport,
    pub top_confusions: Vec<Confusion>,
}

/// Intra minus cross accuracy for one test engine and protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub train_engine: EngineId,
    pub test_engine: EngineId,
    pub protocol: Protocol,
    pub intra_accuracy: f64,
    pub cross_accuracy: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Seconds since the epoch; the only field that differs between reruns.
    pub timestamp: u64,
    pub config: ExperimentConfig,
    pub identities: usize,
    pub grid: Vec<String>,
    /// Cells dropped because their codec is unavailable.
    pub skipped_cells: Vec<String>,
    pub held_out: Vec<String>,
    pub split: Split,
    pub split_hash: String,
    pub engines: Vec<EngineSummary>,
    pub quality_summary: Vec<QualityRow>,
    pub scenarios: Vec<ScenarioResult>,
    pub gaps: Vec<Gap>,
}

impl ExperimentReport {
    pub fn scenario(&self, train: EngineId, test: EngineId, protocol: Protocol) -> Option<&ScenarioResult> {
        self.scenarios
            .iter()
            .find(|s| s.train_engine == train && s.test_engine == test && s.protocol == protocol)
    }

    pub fn engine(&self, id: EngineId) -> Option<&EngineSummary> {
        self.engines.iter().find(|e| e.engine == id)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// One test prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub scenario: String,
    pub identity: String,
    pub spec_id: String,
    #[serde(rename = "true")]
    pub truth: ManipulationClass,
    pub predicted: ManipulationClass,
    pub posterior_max: f64,
    pub ssim: f64,
    pub psnr: f64,
    pub mse: f64,
    pub flagged: bool,
}

fn fmt_stat(s: &Stat, digits: usize) -> String {
    format!("{:.*} ± {:.*}", digits, s.mean, digits, s.std)
}

/// Human-readable summary. Depends only on the report, so a report read back
/// from `metrics.json` prints the same text.
pub fn summary_text(r: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "identities: {} (train {}, test {}), split {}",
        r.identities,
        r.split.train.len(),
        r.split.test.len(),
        &r.split_hash[..16.min(r.split_hash.len())]
    );
    if !r.skipped_cells.is_empty() {
        let _ = writeln!(out, "skipped cells: {}", r.skipped_cells.join(", "));
    }
    let _ = writeln!(out, "\nquality (task, engine, n, ssim, mse, psnr)");
    for q in &r.quality_summary {
        let _ = writeln!(
            out,
            "  {:<10} {:<4} {:>5}  {}  {}  {}",
            q.task,
            q.engine,
            q.n,
            fmt_stat(&q.ssim, 4),
            fmt_stat(&q.mse, 2),
            fmt_stat(&q.psnr, 2)
        );
    }
    for e in &r.engines {
        let _ = writeln!(
            out,
            "\n{} thresholds ssim {} psnr {}: baseline flagged {:.3}, severe flagged {:.3}, failures {}",
            e.engine,
            e.thresholds.ssim,
            e.thresholds.psnr,
            e.baseline_flag_rate,
            e.severe_flag_rate,
            e.failures.len()
        );
        for c in &e.severe {
            let _ = writeln!(
                out,
                "  {:<28} ssim {}  drop {:+.4}  flagged {:.3}",
                c.spec_id,
                fmt_stat(&c.ssim, 4),
                c.ssim_drop,
                c.flag_rate
            );
        }
    }
    let _ = writeln!(out, "\nscenarios (accuracy, macro-P, macro-R, macro-F1)");
    for s in &r.scenarios {
        let m = &s.metrics;
        let _ = writeln!(
            out,
            "  {:<14} {:<5} n={:<5} acc {:.4}  P {:.4}  R {:.4}  F1 {:.4}",
            s.name,
            if s.intra { "intra" } else { "cross" },
            m.n,
            m.accuracy,
            m.macro_precision,
            m.macro_recall,
            m.macro_f1
        );
        let top: Vec<String> = s
            .top_confusions
            .iter()
            .map(|c| format!("{}->{} {}", c.truth, c.predicted, c.count))
            .collect();
        if !top.is_empty() {
            let _ = writeln!(out, "    confusions: {}", top.join(", "));
        }
    }
    if !r.gaps.is_empty() {
        let _ = writeln!(out, "\nintra - cross accuracy gaps");
        for g in &r.gaps {
            let _ = writeln!(
                out,
                "  {}->{} {}: {:.4} - {:.4} = {:+.4}",
                g.train_engine, g.test_engine, g.protocol, g.intra_accuracy, g.cross_accuracy, g.gap
            );
        }
    }
    out
}

fn csv_err(e: csv::Error) -> Error {
    Error::Serialization(e.to_string())
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

/// 7x7 matrix with class names on the header row and first column.
pub fn write_confusion(m: &MetricsReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["true\\predicted".to_string()];
    header.extend(ManipulationClass::ALL.iter().map(|c| c.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for t in ManipulationClass::ALL {
        let mut row = vec![t.to_string()];
        row.extend(m.confusion[t.index()].iter().map(|c| c.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_stacked_confusion(r: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["scenario".to_string(), "true\\predicted".to_string()];
    header.extend(ManipulationClass::ALL.iter().map(|c| c.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for s in &r.scenarios {
        for t in ManipulationClass::ALL {
            let mut row = vec![s.name.clone(), t.to_string()];
            row.extend(s.metrics.confusion[t.index()].iter().map(|c| c.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_samples<'a>(rows: impl IntoIterator<Item = &'a SampleRow>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_quality(rows: &[QualityRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record([
        "task", "engine", "n", "ssim_mean", "ssim_std", "mse_mean", "mse_std", "psnr_mean", "psnr_std",
    ])
    .map_err(csv_err)?;
    for q in rows {
        let f = crate::serde_inf::format_f64;
        w.write_record([
            q.task.clone(),
            q.engine.to_string(),
            q.n.to_string(),
            f(q.ssim.mean),
            f(q.ssim.std),
            f(q.mse.mean),
            f(q.mse.std),
            f(q.psnr.mean),
            f(q.psnr.std),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the top-level files plus one directory per scenario under `scenarios/`.
pub fn write_report(r: &ExperimentReport, samples: &[SampleRow], out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_text(&out.join("metrics.json"), &r.to_json()?)?;
    write_stacked_confusion(r, &out.join("confusion.csv"))?;
    write_samples(samples, &out.join("per_sample.csv"))?;
    write_quality(&r.quality_summary, &out.join("quality_summary.csv"))?;
    write_text(&out.join("summary.txt"), &summary_text(r))?;
    for s in &r.scenarios {
        let dir = out.join("scenarios").join(&s.name);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let json = serde_json::to_string_pretty(s).map_err(|e| Error::Serialization(e.to_string()))?;
        write_text(&dir.join("metrics.json"), &json)?;
        write_confusion(&s.metrics, &dir.join("confusion.csv"))?;
        write_samples(samples.iter().filter(|row| row.scenario == s.name), &dir.join("per_sample.csv"))?;
    }
    Ok(())
}
