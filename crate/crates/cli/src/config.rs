//! Pipeline configuration: one JSON document, optionally overridden by flags.

use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use varlab::ingest::{ImputationPolicy, RawSource};
use varlab::stattests::AdfTerms;
use varlab::var::TrendSpec;

use crate::error::{Result, RunError};

const TIMESTAMP_LAYOUTS: [&str; 4] = ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"];

/// Accepts `YYYY-MM-DD HH:MM[:SS]`, the ISO `T` form, or a bare date (midnight).
pub fn parse_config_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    TIMESTAMP_LAYOUTS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
        .or_else(|| NaiveDate::parse_from_str(raw, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0)))
}

mod timestamp {
    use chrono::NaiveDateTime;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&varlab::frame::format_timestamp(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
        let raw = String::deserialize(d)?;
        super::parse_config_timestamp(&raw).ok_or_else(|| D::Error::custom(format!("bad timestamp `{raw}`")))
    }

    pub mod option {
        use chrono::NaiveDateTime;
        use serde::{de::Error, Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(ts: &Option<NaiveDateTime>, s: S) -> Result<S::Ok, S::Error> {
            match ts {
                Some(ts) => super::serialize(ts, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<NaiveDateTime>, D::Error> {
            match Option::<String>::deserialize(d)? {
                None => Ok(None),
                Some(raw) => crate::config::parse_config_timestamp(&raw)
                    .map(Some)
                    .ok_or_else(|| D::Error::custom(format!("bad timestamp `{raw}`"))),
            }
        }
    }
}

fn default_grid_lags() -> Vec<usize> {
    vec![12, 24, 36, 48]
}

fn default_grid_trends() -> Vec<TrendSpec> {
    vec![TrendSpec::Constant, TrendSpec::ConstantLinear, TrendSpec::ConstantQuadratic, TrendSpec::None]
}

fn default_granger_lag() -> usize {
    12
}

fn default_fevd_horizon() -> usize {
    varlab::fevd::DEFAULT_HORIZON
}

fn default_validation_hours() -> usize {
    24
}

fn default_adf_terms() -> AdfTerms {
    AdfTerms::Constant
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub sources: Vec<RawSource>,
    #[serde(default)]
    pub imputation: ImputationPolicy,
    /// First held-out hour. Everything before it is training data.
    #[serde(with = "timestamp")]
    pub test_start: NaiveDateTime,
    /// Alignment range; defaults to the span covered by the sources.
    #[serde(default, with = "timestamp::option", skip_serializing_if = "Option::is_none")]
    pub start: Option<NaiveDateTime>,
    #[serde(default, with = "timestamp::option", skip_serializing_if = "Option::is_none")]
    pub end: Option<NaiveDateTime>,
    #[serde(default = "default_grid_lags")]
    pub grid_lags: Vec<usize>,
    #[serde(default = "default_grid_trends")]
    pub grid_trends: Vec<TrendSpec>,
    #[serde(default = "default_granger_lag")]
    pub granger_lag: usize,
    #[serde(default = "default_fevd_horizon")]
    pub fevd_horizon: usize,
    /// Cholesky ordering for the decomposition; defaults to column order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fevd_order: Option<Vec<String>>,
    /// Trailing training hours held back to score grid cells.
    #[serde(default = "default_validation_hours")]
    pub validation_hours: usize,
    #[serde(default = "default_adf_terms")]
    pub adf_terms: AdfTerms,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adf_max_lag: Option<usize>,
    /// Difference once before modelling when any column keeps a unit root.
    #[serde(default)]
    pub auto_difference: bool,
    /// Columns to emit plot data for; defaults to every column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot_columns: Option<Vec<String>>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl PipelineConfig {
    /// Reads a config file. Relative source paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: Self =
            serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for s in &mut config.sources {
            if s.path.is_relative() {
                s.path = base.join(&s.path);
            }
        }
        if config.output_dir.is_relative() {
            config.output_dir = base.join(&config.output_dir);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(RunError::Config(msg.to_string()));
        if self.sources.is_empty() {
            return fail("at least one source is required");
        }
        if self.grid_lags.is_empty() || self.grid_lags.contains(&0) {
            return fail("grid_lags must be non-empty and every lag at least 1");
        }
        if self.grid_trends.is_empty() {
            return fail("grid_trends must be non-empty");
        }
        if self.granger_lag == 0 {
            return fail("granger_lag must be at least 1");
        }
        if self.fevd_horizon == 0 {
            return fail("fevd_horizon must be at least 1");
        }
        if self.validation_hours == 0 {
            return fail("validation_hours must be at least 1");
        }
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if s >= e {
                return fail("start must precede end");
            }
        }
        self.imputation.validate().map_err(|e| RunError::Config(e.to_string()))
    }

    /// Canonical JSON of the effective configuration.
    pub fn to_canonical_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self)?;
        out.push(b'\n');
        Ok(out)
    }
}
