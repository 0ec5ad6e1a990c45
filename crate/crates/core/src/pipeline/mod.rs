//! Manifest-driven batch analysis of TR/GT image pairs.

mod manifest;
mod report;

pub use manifest::{
    parse_manifest, parse_manifest_str, Group, ManifestEntry, ManifestError, Resolution,
};
pub use report::{emit_report, round_sig, EMITTED_FILES};

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::biomarkers::{biomarker_set, BiomarkerSet};
use crate::config::{Config, EmbeddingSource};
use crate::imaging::load_grayscale;
use crate::quality::{embed, fid_from_embeddings, quality_scores};
use crate::stats::{boxplot_stats, summarize, ttest, BoxplotStats, SummaryStats, TTestResult};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Label of the all-entries block in each resolution.
pub const COMPLETE: &str = "Complete";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("line {line}: missing file {path} (use --skip-missing to continue without it)")]
    MissingFile { line: u64, path: String },
    #[error("no eligible entries: all {0} failed")]
    NoEligibleEntries(usize),
    #[error("embeddings file {path}: {reason}")]
    Embeddings { path: String, reason: String },
    #[error("cannot write {path}: {reason}")]
    Write { path: String, reason: String },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub jobs: usize,
    pub skip_missing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            skip_missing: false,
        }
    }
}

/// Per-entry values, rounded to the reported precision so that every
/// aggregate can be recomputed exactly from `rows.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryRow {
    pub patient_id: String,
    pub group: Group,
    pub resolution: Resolution,
    pub tr: BiomarkerSet,
    pub gt: BiomarkerSet,
    pub ssim: f64,
    pub pcqi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryFailure {
    pub line: u64,
    pub patient_id: String,
    pub resolution: Resolution,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Bvd,
    Bvc,
    Bvt,
    Vpi,
}

impl Feature {
    pub const ALL: [Feature; 4] = [Feature::Bvd, Feature::Bvc, Feature::Bvt, Feature::Vpi];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Bvd => "bvd",
            Feature::Bvc => "bvc",
            Feature::Bvt => "bvt",
            Feature::Vpi => "vpi",
        }
    }

    pub fn of(self, b: &BiomarkerSet) -> f64 {
        match self {
            Feature::Bvd => b.bvd,
            Feature::Bvc => b.bvc,
            Feature::Bvt => b.bvt,
            Feature::Vpi => b.vpi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureStats {
    pub tr: SummaryStats,
    pub gt: SummaryStats,
    pub ttest: Option<TTestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ttest_note: Option<String>,
    #[serde(skip)]
    pub tr_box: BoxplotStats,
    #[serde(skip)]
    pub gt_box: BoxplotStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureTable {
    pub bvd: FeatureStats,
    pub bvc: FeatureStats,
    pub bvt: FeatureStats,
    pub vpi: FeatureStats,
}

impl FeatureTable {
    pub fn get(&self, f: Feature) -> &FeatureStats {
        match f {
            Feature::Bvd => &self.bvd,
            Feature::Bvc => &self.bvc,
            Feature::Bvt => &self.bvt,
            Feature::Vpi => &self.vpi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub group: String,
    pub n: usize,
    pub features: FeatureTable,
    pub ssim: SummaryStats,
    pub pcqi: SummaryStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidReport {
    pub value: Option<f64>,
    pub embedding: String,
    pub n_tr: usize,
    pub n_gt: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionReport {
    pub resolution: Resolution,
    pub fid: FidReport,
    /// `Complete` first, then each present group in label order.
    pub groups: Vec<GroupReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortReport {
    pub tool_version: String,
    pub config: Config,
    pub n_entries: usize,
    pub rows: Vec<EntryRow>,
    pub errors: Vec<EntryFailure>,
    pub resolutions: Vec<ResolutionReport>,
}

impl CohortReport {
    pub fn is_partial(&self) -> bool {
        !self.errors.is_empty()
    }
}

/// TR and GT embedding vectors of one entry.
type EmbeddingPair = (Vec<f64>, Vec<f64>);
/// TR and GT embedding sets of one resolution.
type EmbeddingSets = (Vec<Vec<f64>>, Vec<Vec<f64>>);

struct Processed {
    row: EntryRow,
    grid_embeddings: Option<Result<EmbeddingPair, String>>,
}

fn failure(entry: &ManifestEntry, stage: &str, message: String) -> EntryFailure {
    EntryFailure {
        line: entry.line,
        patient_id: entry.patient_id.clone(),
        resolution: entry.resolution,
        stage: stage.to_string(),
        message,
    }
}

fn rounded_set(b: BiomarkerSet) -> BiomarkerSet {
    BiomarkerSet {
        bvd: round_sig(b.bvd),
        bvc: round_sig(b.bvc),
        bvt: round_sig(b.bvt),
        vpi: round_sig(b.vpi),
        ..b
    }
}

fn process(entry: &ManifestEntry, cfg: &Config) -> Result<Processed, EntryFailure> {
    let tr = load_grayscale(&entry.tr_path).map_err(|e| failure(entry, "load", e.to_string()))?;
    let gt = load_grayscale(&entry.gt_path).map_err(|e| failure(entry, "load", e.to_string()))?;
    let features = cfg.features();
    let tr_set =
        biomarker_set(&tr, &features).map_err(|e| failure(entry, e.stage(), format!("TR: {e}")))?;
    let gt_set =
        biomarker_set(&gt, &features).map_err(|e| failure(entry, e.stage(), format!("GT: {e}")))?;
    let scores = quality_scores(&gt, &tr, &cfg.quality.ssim, &cfg.quality.pcqi)
        .map_err(|e| failure(entry, "quality", e.to_string()))?;
    let grid_embeddings = match cfg.quality.fid.embedding {
        EmbeddingSource::Builtin => {
            let grid = cfg.quality.fid.grid;
            Some(
                embed(&tr, grid)
                    .and_then(|a| Ok((a, embed(&gt, grid)?)))
                    .map_err(|e| e.to_string()),
            )
        }
        EmbeddingSource::File(_) => None,
    };
    Ok(Processed {
        row: EntryRow {
            patient_id: entry.patient_id.clone(),
            group: entry.group,
            resolution: entry.resolution,
            tr: rounded_set(tr_set),
            gt: rounded_set(gt_set),
            ssim: round_sig(scores.ssim),
            pcqi: round_sig(scores.pcqi),
        },
        grid_embeddings,
    })
}

/// Reads an embeddings table: header `id,<d1>,<d2>,...`, one row per image,
/// keyed by the image path exactly as written in the manifest.
pub fn load_embeddings(path: &Path) -> Result<HashMap<String, Vec<f64>>, PipelineError> {
    let err = |reason: String| PipelineError::Embeddings {
        path: path.display().to_string(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.get(0) != Some("id") || headers.len() < 2 {
        return Err(err("expected header `id,<dim1>,...`".to_string()));
    }
    let mut table = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| err(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let values = record
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| err(format!("line {line}: bad value `{v}`")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if table.insert(record[0].to_string(), values).is_some() {
            return Err(err(format!("line {line}: duplicate id `{}`", &record[0])));
        }
    }
    Ok(table)
}

fn summary_or_default(values: &[f64]) -> SummaryStats {
    summarize(values).expect("groups are never empty and values are finite")
}

fn feature_stats(rows: &[&EntryRow], f: Feature, cfg: &Config) -> FeatureStats {
    let tr: Vec<f64> = rows.iter().map(|r| f.of(&r.tr)).collect();
    let gt: Vec<f64> = rows.iter().map(|r| f.of(&r.gt)).collect();
    let (ttest, ttest_note) = match ttest(&tr, &gt, cfg.stats.ttest, cfg.stats.paired) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    FeatureStats {
        tr: summary_or_default(&tr),
        gt: summary_or_default(&gt),
        ttest,
        ttest_note,
        tr_box: boxplot_stats(&tr).expect("non-empty"),
        gt_box: boxplot_stats(&gt).expect("non-empty"),
    }
}

fn group_report(label: &str, rows: &[&EntryRow], cfg: &Config) -> GroupReport {
    let ssim: Vec<f64> = rows.iter().map(|r| r.ssim).collect();
    let pcqi: Vec<f64> = rows.iter().map(|r| r.pcqi).collect();
    GroupReport {
        group: label.to_string(),
        n: rows.len(),
        features: FeatureTable {
            bvd: feature_stats(rows, Feature::Bvd, cfg),
            bvc: feature_stats(rows, Feature::Bvc, cfg),
            bvt: feature_stats(rows, Feature::Bvt, cfg),
            vpi: feature_stats(rows, Feature::Vpi, cfg),
        },
        ssim: summary_or_default(&ssim),
        pcqi: summary_or_default(&pcqi),
    }
}

fn fid_report(embeddings: Result<EmbeddingSets, String>, source: &EmbeddingSource) -> FidReport {
    let (value, note, n_tr, n_gt) = match embeddings {
        Ok((tr, gt)) => {
            let (n_tr, n_gt) = (tr.len(), gt.len());
            match fid_from_embeddings(&tr, &gt) {
                Ok(v) => (Some(round_sig(v)), None, n_tr, n_gt),
                Err(e) => (None, Some(e.to_string()), n_tr, n_gt),
            }
        }
        Err(note) => (None, Some(note), 0, 0),
    };
    FidReport {
        value,
        embedding: source.to_string(),
        n_tr,
        n_gt,
        note,
    }
}

/// Runs the whole cohort.
///
/// Missing files abort the run unless `opts.skip_missing` is set; any other
/// per-entry failure is recorded in the error ledger and the run continues.
pub fn run_cohort(
    entries: &[ManifestEntry],
    cfg: &Config,
    opts: &RunOptions,
) -> Result<CohortReport, PipelineError> {
    let mut errors = Vec::new();
    let mut eligible = Vec::new();
    for entry in entries {
        let missing = [&entry.tr_path, &entry.gt_path]
            .into_iter()
            .find(|p| !p.is_file());
        match missing {
            None => eligible.push(entry),
            Some(p) if opts.skip_missing => errors.push(failure(
                entry,
                "missing",
                format!("missing file {}", p.display()),
            )),
            Some(p) => {
                return Err(PipelineError::MissingFile {
                    line: entry.line,
                    path: p.display().to_string(),
                })
            }
        }
    }

    let external = match &cfg.quality.fid.embedding {
        EmbeddingSource::File(p) => Some(load_embeddings(p)?),
        EmbeddingSource::Builtin => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| PipelineError::ThreadPool(e.to_string()))?;
    let results: Vec<Result<Processed, EntryFailure>> =
        pool.install(|| eligible.par_iter().map(|e| process(e, cfg)).collect());

    let mut processed = Vec::new();
    for (entry, result) in eligible.iter().zip(results) {
        match result {
            Ok(p) => processed.push((*entry, p)),
            Err(f) => {
                log::warn!("entry {} ({}): {}", f.patient_id, f.stage, f.message);
                errors.push(f);
            }
        }
    }
    errors.sort_by_key(|f| f.line);
    if processed.is_empty() {
        return Err(PipelineError::NoEligibleEntries(entries.len()));
    }

    let mut resolutions = Vec::new();
    for res in [Resolution::Mm3, Resolution::Mm6] {
        let at_res: Vec<&(&ManifestEntry, Processed)> = processed
            .iter()
            .filter(|(e, _)| e.resolution == res)
            .collect();
        if at_res.is_empty() {
            continue;
        }
        let rows: Vec<&EntryRow> = at_res.iter().map(|(_, p)| &p.row).collect();
        let mut groups = vec![group_report(COMPLETE, &rows, cfg)];
        for g in Group::ALL {
            let members: Vec<&EntryRow> = rows.iter().copied().filter(|r| r.group == g).collect();
            if !members.is_empty() {
                groups.push(group_report(g.as_str(), &members, cfg));
            }
        }

        let embeddings = match &external {
            None => at_res
                .iter()
                .map(|(_, p)| {
                    p.grid_embeddings
                        .clone()
                        .expect("builtin embeddings computed")
                })
                .collect::<Result<Vec<_>, _>>()
                .map(|pairs| pairs.into_iter().unzip()),
            Some(table) => {
                let lookup = |key: &str| {
                    table
                        .get(key)
                        .cloned()
                        .ok_or_else(|| format!("no embedding for `{key}`"))
                };
                at_res
                    .iter()
                    .map(|(e, _)| Ok((lookup(&e.tr_ref)?, lookup(&e.gt_ref)?)))
                    .collect::<Result<Vec<_>, String>>()
                    .map(|pairs| pairs.into_iter().unzip())
            }
        };
        resolutions.push(ResolutionReport {
            resolution: res,
            fid: fid_report(embeddings, &cfg.quality.fid.embedding),
            groups,
        });
    }

    Ok(CohortReport {
        tool_version: TOOL_VERSION.to_string(),
        config: cfg.clone(),
        n_entries: entries.len(),
        rows: processed.into_iter().map(|(_, p)| p.row).collect(),
        errors,
        resolutions,
    })
}

/// Parses the manifest, runs the cohort and writes the report files.
pub fn run_manifest(
    manifest: &Path,
    out_dir: &Path,
    cfg: &Config,
    opts: &RunOptions,
) -> Result<CohortReport, PipelineError> {
    let entries = parse_manifest(manifest)?;
    let report = run_cohort(&entries, cfg, opts)?;
    emit_report(&report, out_dir)?;
    Ok(report)
}

/// Output files written by [`emit_report`], relative to the output directory.
pub fn report_paths(out_dir: &Path) -> Vec<PathBuf> {
    EMITTED_FILES.iter().map(|f| out_dir.join(f)).collect()
}
