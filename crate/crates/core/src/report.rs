//! Trial results, aggregated reports and their file forms.
//!
//! JSON reports follow `{schema, config, seeds, per_trial, aggregate, ...}`
//! where `aggregate` maps each metric to its mean and population standard
//! deviation over trials. Markdown reports render the detection, recognition
//! and clustering tables plus the per-trial rows and the effective config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::{Error, Result};
use crate::experiment::{Arm, ExperimentConfig, SweepResult};
use crate::rng::RngSeed;
use crate::stats::MeanStd;

pub const SCHEMA: &str = "osr-report/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: RngSeed,
    pub known_classes: usize,
    pub novel_classes: usize,
    pub test_samples: usize,
    pub known_accuracy: f64,
    pub novel_accuracy: f64,
    /// Sample-weighted combination of the known and novel accuracies.
    pub overall_accuracy: f64,
    pub recognition_rate: f64,
    pub novel_ari: f64,
    /// Samples entering the ARI after exclusions.
    pub ari_samples: usize,
    /// Clusters after outlier removal.
    pub clusters: usize,
    pub outliers: usize,
    pub novelty_threshold: f64,
    /// Largest `|Σp − 1|` over every posterior and membership vector.
    pub max_probability_error: f64,
}

/// Reads one metric from a trial row.
pub type MetricFn = fn(&TrialResult) -> f64;

/// Metrics aggregated in every report, with their accessors.
pub const METRICS: [(&str, MetricFn); 7] = [
    ("known_accuracy", |t| t.known_accuracy),
    ("novel_accuracy", |t| t.novel_accuracy),
    ("overall_accuracy", |t| t.overall_accuracy),
    ("recognition_rate", |t| t.recognition_rate),
    ("novel_ari", |t| t.novel_ari),
    ("clusters", |t| t.clusters as f64),
    ("outliers", |t| t.outliers as f64),
];

/// Values published for the physical-robot dataset, which is not
/// available. Shown next to results for orientation only.
pub fn reference_values(arm: Arm) -> BTreeMap<String, MeanStd> {
    let ms = |mean, std| MeanStd { mean, std };
    let mut m = BTreeMap::new();
    match arm {
        Arm::Full => {
            m.insert("known_accuracy".into(), ms(0.9576, 0.0187));
            m.insert("novel_accuracy".into(), ms(0.8921, 0.0476));
            m.insert("overall_accuracy".into(), ms(0.9106, 0.0298));
            m.insert("recognition_rate".into(), ms(0.9558, 0.0161));
            m.insert("novel_ari".into(), ms(0.701, 0.096));
        }
        Arm::RandomParams => {
            m.insert("novel_ari".into(), ms(0.120, 0.025));
        }
        Arm::KmeansBaseline => {
            m.insert("novel_ari".into(), ms(0.642, 0.123));
        }
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<RngSeed>,
    pub per_trial: Vec<TrialResult>,
    /// Mean and population std of each metric.
    pub aggregate: BTreeMap<String, MeanStd>,
    pub reference: BTreeMap<String, MeanStd>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
}

impl ExperimentReport {
    pub fn new(config: ExperimentConfig, seeds: Vec<RngSeed>, per_trial: Vec<TrialResult>) -> Self {
        let aggregate = aggregate(&per_trial);
        let reference = reference_values(config.arm);
        ExperimentReport {
            schema: SCHEMA.to_owned(),
            config,
            seeds,
            per_trial,
            aggregate,
            reference,
            runtime_seconds: None,
            created_unix: None,
        }
    }

    pub fn metric(&self, f: impl Fn(&TrialResult) -> f64) -> MeanStd {
        MeanStd::of(&self.per_trial.iter().map(f).collect::<Vec<_>>())
    }

    /// Drops the wall-clock fields so identical runs serialise identically.
    pub fn without_timing(mut self) -> Self {
        self.runtime_seconds = None;
        self.created_unix = None;
        self
    }

    pub fn stamp_now(&mut self) {
        self.created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses a JSON report, checking the schema tag before anything else.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("schema")
            .and_then(|v| v.as_str())
            .unwrap_or("<missing>");
        if found != SCHEMA {
            return Err(Error::SchemaMismatch {
                expected: SCHEMA.to_owned(),
                found: found.to_owned(),
            });
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let arm = self.config.arm.name();
        let _ = writeln!(out, "# Open-set recognition report\n");
        let _ = writeln!(
            out,
            "Arm `{arm}`, {} repetitions, master seed {}. Mean ± population std over trials.\n",
            self.per_trial.len(),
            self.config.seed
        );

        let pct = |key: &str, map: &BTreeMap<String, MeanStd>| fmt_ms(map.get(key), 100.0, 2);
        let raw = |key: &str, map: &BTreeMap<String, MeanStd>| fmt_ms(map.get(key), 1.0, 3);
        let reference_row = !self.reference.is_empty();

        let _ = writeln!(out, "## Novelty detection accuracy (%)\n");
        let _ = writeln!(
            out,
            "| Method | Known | Novel | Overall |\n|---|---|---|---|"
        );
        let _ = writeln!(
            out,
            "| {arm} | {} | {} | {} |",
            pct("known_accuracy", &self.aggregate),
            pct("novel_accuracy", &self.aggregate),
            pct("overall_accuracy", &self.aggregate)
        );
        if self.reference.contains_key("overall_accuracy") {
            let _ = writeln!(
                out,
                "| reference (physical dataset) | {} | {} | {} |",
                pct("known_accuracy", &self.reference),
                pct("novel_accuracy", &self.reference),
                pct("overall_accuracy", &self.reference)
            );
        }

        let _ = writeln!(out, "\n## Known-class recognition rate (%)\n");
        let _ = writeln!(out, "| Method | Recognition rate |\n|---|---|");
        let _ = writeln!(
            out,
            "| {arm} | {} |",
            pct("recognition_rate", &self.aggregate)
        );
        if self.reference.contains_key("recognition_rate") {
            let _ = writeln!(
                out,
                "| reference (physical dataset) | {} |",
                pct("recognition_rate", &self.reference)
            );
        }

        let _ = writeln!(out, "\n## Novel-object clustering\n");
        let _ = writeln!(
            out,
            "| Method | ARI | Clusters | Outliers |\n|---|---|---|---|"
        );
        let _ = writeln!(
            out,
            "| {arm} | {} | {} | {} |",
            raw("novel_ari", &self.aggregate),
            fmt_ms(self.aggregate.get("clusters"), 1.0, 1),
            fmt_ms(self.aggregate.get("outliers"), 1.0, 1)
        );
        if reference_row {
            let _ = writeln!(
                out,
                "| reference (physical dataset) | {} | – | – |",
                raw("novel_ari", &self.reference)
            );
        }

        let _ = writeln!(out, "\n## Per-trial results\n");
        let _ = writeln!(
            out,
            "| Trial | Seed | Known | Novel | Overall | Recognition | ARI | Clusters | Outliers |\n|---|---|---|---|---|---|---|---|---|"
        );
        for t in &self.per_trial {
            let _ = writeln!(
                out,
                "| {} | {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.3} | {} | {} |",
                t.trial,
                t.seed,
                100.0 * t.known_accuracy,
                100.0 * t.novel_accuracy,
                100.0 * t.overall_accuracy,
                100.0 * t.recognition_rate,
                t.novel_ari,
                t.clusters,
                t.outliers
            );
        }
        let _ = writeln!(
            out,
            "\nNovel cluster `u` corresponds to overall label `N + u` with `N` known classes."
        );

        let _ = writeln!(out, "\n## Effective configuration\n\n```text");
        out.push_str(&config::to_kv(&self.config));
        let _ = writeln!(out, "```\n\nTrial seeds: {}", join_seeds(&self.seeds));
        out
    }
}

fn join_seeds(seeds: &[RngSeed]) -> String {
    seeds
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn fmt_ms(v: Option<&MeanStd>, scale: f64, digits: usize) -> String {
    match v {
        Some(m) => format!(
            "{:.*} ± {:.*}",
            digits,
            scale * m.mean,
            digits,
            scale * m.std
        ),
        None => "–".to_owned(),
    }
}

pub fn aggregate(per_trial: &[TrialResult]) -> BTreeMap<String, MeanStd> {
    METRICS
        .iter()
        .map(|(name, f)| {
            let v: Vec<f64> = per_trial.iter().map(f).collect();
            (name.to_string(), MeanStd::of(&v))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::UnknownFormat(other.to_owned())),
        }
    }
}

pub fn save_report(
    report: &ExperimentReport,
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Json => report.to_json()?,
        ReportFormat::Markdown => report.to_markdown(),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn report_label(r: &ExperimentReport) -> String {
    r.config.arm.name().to_owned()
}

/// Side-by-side markdown table, one row per report.
pub fn compare_markdown(reports: &[ExperimentReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports to compare"));
    }
    let mut out = String::from(
        "| Method | Known (%) | Novel (%) | Overall (%) | Recognition (%) | ARI | Repetitions |\n|---|---|---|---|---|---|---|\n",
    );
    for r in reports {
        let g = |k: &str| r.aggregate.get(k);
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            report_label(r),
            fmt_ms(g("known_accuracy"), 100.0, 2),
            fmt_ms(g("novel_accuracy"), 100.0, 2),
            fmt_ms(g("overall_accuracy"), 100.0, 2),
            fmt_ms(g("recognition_rate"), 100.0, 2),
            fmt_ms(g("novel_ari"), 1.0, 3),
            r.per_trial.len()
        );
    }
    Ok(out)
}

/// CSV form of [`compare_markdown`].
pub fn compare_csv(reports: &[ExperimentReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports to compare"));
    }
    let mut out = String::from("method");
    for (name, _) in METRICS {
        let _ = write!(out, ",mean_{name},std_{name}");
    }
    out.push('\n');
    for r in reports {
        out.push_str(&report_label(r));
        for (name, _) in METRICS {
            let m = r.aggregate.get(name).copied().unwrap_or(MeanStd {
                mean: 0.0,
                std: 0.0,
            });
            let _ = write!(out, ",{},{}", m.mean, m.std);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Plot-ready sweep curve. Lines starting with `#` carry the effective base
/// config and the trial seeds.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    if let Some(first) = result.reports.first() {
        let _ = writeln!(out, "# sweep = {}", result.param.name());
        for line in config::to_kv(&first.config).lines() {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "# trial_seeds = {}", join_seeds(&first.seeds));
    }
    out.push_str(
        "value,mean_ari,std_ari,mean_overall,std_overall,mean_recognition,std_recognition\n",
    );
    for p in result.curve() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.value,
            p.ari.mean,
            p.ari.std,
            p.overall_accuracy.mean,
            p.overall_accuracy.std,
            p.recognition_rate.mean,
            p.recognition_rate.std
        );
    }
    out
}
