//! Test outcome with full reproducibility metadata.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::limitlaws::{LimitLawId, LimitLawSample};
use crate::rng::SeedSpec;

/// Sampling-scheme parameters recorded with a diffusion test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeMeta {
    pub n: usize,
    pub horizon: f64,
    pub delta_max: f64,
}

/// Everything needed to reproduce a test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestMetadata {
    /// Number of observation intervals (diffusion) or transitions (series).
    pub n: usize,
    /// Hypothesis description.
    pub hypothesis: String,
    /// Seed of the data simulation, when the data was simulated here.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<SeedSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeMeta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_floor: Option<f64>,
    /// Identity of the limit-law sample supplying critical value and p-value.
    pub limit: LimitLawId,
}

/// Statistic, critical value, Monte Carlo p-value and decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: String,
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub metadata: TestMetadata,
}

impl TestResult {
    /// Assemble the decision for a computed statistic against a limit-law
    /// sample: reject iff the statistic exceeds the empirical
    /// (1 - alpha)-quantile.
    pub fn from_statistic(
        test: impl Into<String>,
        statistic: f64,
        alpha: f64,
        limit: &LimitLawSample,
        metadata: TestMetadata,
    ) -> Result<Self> {
        let critical_value = limit.critical_value(alpha)?;
        let p_value = limit.p_value(statistic)?;
        Ok(Self {
            test: test.into(),
            statistic,
            critical_value,
            p_value,
            reject: statistic > critical_value,
            alpha,
            metadata,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("test result serializes")
    }
}
