use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::{CohortReport, EntryFailure, Feature, FidReport, PipelineError, Resolution};
use crate::biomarkers::BiomarkerSet;
use crate::stats::{BoxplotStats, SummaryStats};

pub const EMITTED_FILES: [&str; 5] = [
    "rows.csv",
    "summary.json",
    "quality.json",
    "boxplots.json",
    "errors.json",
];

/// Rounds to 6 significant digits. Non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            *v = serde_json::Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("report serializes");
    round_value(&mut v);
    let mut text = serde_json::to_string_pretty(&v).expect("value serializes");
    text.push('\n');
    text
}

fn write(out_dir: &Path, name: &str, contents: &[u8]) -> Result<(), PipelineError> {
    let path = out_dir.join(name);
    std::fs::write(&path, contents).map_err(|e| PipelineError::Write {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    tool_version: &'a str,
    config: String,
    n_entries: usize,
    n_rows: usize,
    n_errors: usize,
    resolutions: Vec<SummaryResolution<'a>>,
}

#[derive(Serialize)]
struct SummaryResolution<'a> {
    resolution: Resolution,
    groups: Vec<SummaryGroup<'a>>,
}

#[derive(Serialize)]
struct SummaryGroup<'a> {
    group: &'a str,
    n: usize,
    features: &'a super::FeatureTable,
    ssim: SsimBlock,
}

/// SSIM mean and range, as tabulated per group.
#[derive(Serialize)]
struct SsimBlock {
    mean: f64,
    min: f64,
    max: f64,
}

#[derive(Serialize)]
struct QualityFile<'a> {
    tool_version: &'a str,
    resolutions: Vec<QualityResolution<'a>>,
}

#[derive(Serialize)]
struct QualityResolution<'a> {
    resolution: Resolution,
    n: usize,
    fid: &'a FidReport,
    pcqi: MeanStd,
    ssim: &'a SummaryStats,
}

#[derive(Serialize)]
struct MeanStd {
    mean: f64,
    std: f64,
}

#[derive(Serialize)]
struct BoxplotFile {
    resolutions: Vec<BoxplotResolution>,
}

#[derive(Serialize)]
struct BoxplotResolution {
    resolution: Resolution,
    groups: Vec<BoxplotGroup>,
}

#[derive(Serialize)]
struct BoxplotGroup {
    group: String,
    features: serde_json::Map<String, Value>,
}

#[derive(Serialize)]
struct SourcePair<'a> {
    tr: &'a BoxplotStats,
    gt: &'a BoxplotStats,
}

#[derive(Serialize)]
struct ErrorsFile<'a> {
    errors: &'a [EntryFailure],
}

const ROW_HEADER: [&str; 17] = [
    "patient_id",
    "group",
    "resolution",
    "tr_bvd",
    "tr_bvc",
    "tr_bvt",
    "tr_vpi",
    "tr_n_branches",
    "tr_n_cyclic_excluded",
    "gt_bvd",
    "gt_bvc",
    "gt_bvt",
    "gt_vpi",
    "gt_n_branches",
    "gt_n_cyclic_excluded",
    "ssim",
    "pcqi",
];

fn set_fields(b: &BiomarkerSet) -> [String; 6] {
    [
        round_sig(b.bvd).to_string(),
        round_sig(b.bvc).to_string(),
        round_sig(b.bvt).to_string(),
        round_sig(b.vpi).to_string(),
        b.n_branches.to_string(),
        b.n_cyclic_excluded.to_string(),
    ]
}

fn rows_csv(report: &CohortReport) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ROW_HEADER).expect("in-memory write");
    for r in &report.rows {
        let mut record = vec![
            r.patient_id.clone(),
            r.group.to_string(),
            r.resolution.to_string(),
        ];
        record.extend(set_fields(&r.tr));
        record.extend(set_fields(&r.gt));
        record.push(round_sig(r.ssim).to_string());
        record.push(round_sig(r.pcqi).to_string());
        w.write_record(&record).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Writes `rows.csv`, `summary.json`, `quality.json`, `boxplots.json` and
/// `errors.json` into `out_dir`, creating it if needed.
pub fn emit_report(report: &CohortReport, out_dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(out_dir).map_err(|e| PipelineError::Write {
        path: out_dir.display().to_string(),
        reason: e.to_string(),
    })?;

    let summary = SummaryFile {
        tool_version: &report.tool_version,
        config: report.config.to_toml_string(),
        n_entries: report.n_entries,
        n_rows: report.rows.len(),
        n_errors: report.errors.len(),
        resolutions: report
            .resolutions
            .iter()
            .map(|r| SummaryResolution {
                resolution: r.resolution,
                groups: r
                    .groups
                    .iter()
                    .map(|g| SummaryGroup {
                        group: &g.group,
                        n: g.n,
                        features: &g.features,
                        ssim: SsimBlock {
                            mean: g.ssim.mean,
                            min: g.ssim.min,
                            max: g.ssim.max,
                        },
                    })
                    .collect(),
            })
            .collect(),
    };

    let quality = QualityFile {
        tool_version: &report.tool_version,
        resolutions: report
            .resolutions
            .iter()
            .map(|r| {
                let complete = &r.groups[0];
                QualityResolution {
                    resolution: r.resolution,
                    n: complete.n,
                    fid: &r.fid,
                    pcqi: MeanStd {
                        mean: complete.pcqi.mean,
                        std: complete.pcqi.std,
                    },
                    ssim: &complete.ssim,
                }
            })
            .collect(),
    };

    let boxplots = BoxplotFile {
        resolutions: report
            .resolutions
            .iter()
            .map(|r| BoxplotResolution {
                resolution: r.resolution,
                groups: r
                    .groups
                    .iter()
                    .map(|g| {
                        let mut features = serde_json::Map::new();
                        for f in Feature::ALL {
                            let s = g.features.get(f);
                            let pair = SourcePair {
                                tr: &s.tr_box,
                                gt: &s.gt_box,
                            };
                            features.insert(
                                f.name().to_string(),
                                serde_json::to_value(pair).expect("boxplot serializes"),
                            );
                        }
                        BoxplotGroup {
                            group: g.group.clone(),
                            features,
                        }
                    })
                    .collect(),
            })
            .collect(),
    };

    write(out_dir, "rows.csv", &rows_csv(report))?;
    write(out_dir, "summary.json", to_json(&summary).as_bytes())?;
    write(out_dir, "quality.json", to_json(&quality).as_bytes())?;
    write(out_dir, "boxplots.json", to_json(&boxplots).as_bytes())?;
    write(
        out_dir,
        "errors.json",
        to_json(&ErrorsFile {
            errors: &report.errors,
        })
        .as_bytes(),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_six_significant_digits() {
        assert_eq!(round_sig(0.123456789), 0.123457);
        assert_eq!(round_sig(1.089), 1.089);
        assert_eq!(round_sig(35.8812345), 35.8812);
        assert_eq!(round_sig(-2.5e-7), -2.5e-7);
        assert_eq!(round_sig(0.0), 0.0);
        assert!(round_sig(f64::NAN).is_nan());
    }

    #[test]
    fn rounding_reaches_nested_floats_only() {
        let mut v = serde_json::json!({"a": [1.23456789, 3], "b": {"c": 2}});
        round_value(&mut v);
        assert_eq!(v, serde_json::json!({"a": [1.23457, 3], "b": {"c": 2}}));
    }
}
