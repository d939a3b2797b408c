//! Inference over feature and rating tables: split-plot ANOVA, Bonferroni
//! post-hoc tests, t-tests, Mann-Whitney U and multiple linear regression.

pub mod anova;
pub mod dist;
pub mod mwu;
pub mod regression;
pub mod table;
pub mod ttest;

use std::fmt;

use thiserror::Error;

pub use anova::{mixed_anova, AnovaResult, EffectRow};
pub use mwu::mann_whitney_u;
pub use regression::{linear_regression, Regression};
pub use table::{MixedDesignTable, MixedObs, RatingRow};
pub use ttest::{
    bonferroni, independent_ttest, one_sample_ttest, paired_ttest, posthoc_between, posthoc_within,
    Comparison,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("invalid design: {0}")]
    Design(String),
    #[error("singular design matrix: {0}")]
    Singular(String),
    #[error("invalid input: {0}")]
    Input(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    PairedT,
    OneSampleT,
    IndependentT,
    MannWhitneyExact,
    MannWhitneyNormal,
    RegressionF,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::PairedT => "paired_t",
            Method::OneSampleT => "one_sample_t",
            Method::IndependentT => "independent_t",
            Method::MannWhitneyExact => "mann_whitney_exact",
            Method::MannWhitneyNormal => "mann_whitney_normal",
            Method::RegressionF => "regression_f",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    /// Two-tailed, in `(0, 1]`.
    pub p: f64,
    /// Degrees of freedom (one entry for t, two for F, none for U).
    pub df: Vec<f64>,
    pub n: (usize, usize),
    pub method: Method,
}

/// Keeps p-values inside `(0, 1]`.
pub(crate) fn clamp_p(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(f64::MIN_POSITIVE, 1.0)
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance (n - 1 denominator).
pub(crate) fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}
