//! Descriptive statistics, two-tailed t-tests and boxplot summaries.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

pub const ALPHA: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    Empty,
    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("zero variance: t statistic undefined")]
    ZeroVariance,
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("non-finite value in sample")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

fn check_finite(values: &[f64]) -> Result<(), StatsError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased variance around a precomputed mean; 0 for a single value.
fn sample_variance(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

pub fn summarize(values: &[f64]) -> Result<SummaryStats, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(values)?;
    let m = mean(values);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SummaryStats {
        n: values.len(),
        // Rounding can push the mean of near-identical values just outside the range.
        mean: m.clamp(min, max),
        std: sample_variance(values, m).sqrt(),
        min,
        max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TTestKind {
    #[default]
    Welch,
    Student,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub significant_at_05: bool,
}

impl TTestResult {
    fn new(t: f64, df: f64) -> Self {
        let p = two_tailed_p(t, df);
        Self {
            t_statistic: t,
            degrees_of_freedom: df,
            p_value: p,
            significant_at_05: p < ALPHA,
        }
    }
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom, via the
/// regularized incomplete beta function `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn two_tailed_p(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<(), StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::InsufficientData {
                needed: 2,
                got: s.len(),
            });
        }
        check_finite(s)?;
    }
    Ok(())
}

/// Welch's unequal-variance t-test; `t` has the sign of `mean(a) − mean(b)`.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    check_samples(a, b)?;
    let (ma, mb) = (mean(a), mean(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let qa = sample_variance(a, ma) / na;
    let qb = sample_variance(b, mb) / nb;
    let se2 = qa + qb;
    if se2 <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    Ok(TTestResult::new(t, df))
}

/// Student's pooled-variance t-test.
pub fn student_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    check_samples(a, b)?;
    let (ma, mb) = (mean(a), mean(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * sample_variance(a, ma) + (nb - 1.0) * sample_variance(b, mb)) / df;
    let se2 = pooled * (1.0 / na + 1.0 / nb);
    if se2 <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok(TTestResult::new((ma - mb) / se2.sqrt(), df))
}

/// Paired t-test on `a[i] − b[i]`. All-zero differences give `t = 0, p = 1`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    check_samples(a, b)?;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let md = mean(&diffs);
    let n = diffs.len() as f64;
    let se2 = sample_variance(&diffs, md) / n;
    if se2 <= 0.0 {
        if diffs.iter().all(|d| *d == 0.0) {
            return Ok(TTestResult::new(0.0, n - 1.0));
        }
        return Err(StatsError::ZeroVariance);
    }
    Ok(TTestResult::new(md / se2.sqrt(), n - 1.0))
}

/// Dispatches on test kind and pairing.
pub fn ttest(
    a: &[f64],
    b: &[f64],
    kind: TTestKind,
    paired: bool,
) -> Result<TTestResult, StatsError> {
    match (paired, kind) {
        (true, _) => paired_ttest(a, b),
        (false, TTestKind::Welch) => welch_ttest(a, b),
        (false, TTestKind::Student) => student_ttest(a, b),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Linear interpolation between order statistics at position `(n−1)·q`
/// (Hyndman–Fan type 7). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quartiles, Tukey fences at 1.5·IQR, whiskers at the extreme inliers.
pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inliers: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|v| (lo_fence..=hi_fence).contains(v))
        .collect();
    let outliers = sorted
        .iter()
        .copied()
        .filter(|v| !(lo_fence..=hi_fence).contains(v))
        .collect();
    Ok(BoxplotStats {
        q1,
        median,
        q3,
        whisker_low: *inliers.first().unwrap_or(&q1),
        whisker_high: *inliers.last().unwrap_or(&q3),
        outliers,
    })
}
