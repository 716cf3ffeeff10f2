//! Surfacing configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probing::{Background, PlanConfig, ProbeConfig};
use crate::semantics::{Classifier, NamePatterns, TypeLexicon, TypeTag};
use crate::surfacer::{FetchPolicy, SurfaceOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// All fields are optional in the file; missing ones take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub min_delay_ms: u64,
    pub max_fetches_per_site: usize,
    pub timeout_ms: u64,
    pub user_agent: String,
    pub probe: ProbeConfig,
    pub tau: f64,
    pub max_dims: usize,
    pub samples: usize,
    pub near_duplicate: f64,
    pub page_limit: usize,
    pub typed_values: usize,
    pub max_template_urls: usize,
    pub probe_types: bool,
    /// Replacement lexicon files keyed by `zipcode`, `city`, `date` or `price`.
    pub lexicons: BTreeMap<String, PathBuf>,
    pub patterns: Option<PathBuf>,
    pub background: Option<PathBuf>,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        let fetch = FetchPolicy::default();
        let plan = PlanConfig::default();
        Self {
            min_delay_ms: fetch.min_delay_per_host.as_millis() as u64,
            max_fetches_per_site: fetch.max_fetches_per_site,
            timeout_ms: fetch.timeout.as_millis() as u64,
            user_agent: fetch.user_agent,
            probe: plan.probe,
            tau: plan.tau,
            max_dims: plan.max_dims,
            samples: plan.samples,
            near_duplicate: plan.near_duplicate,
            page_limit: plan.page_limit,
            typed_values: plan.typed_values,
            max_template_urls: plan.max_template_urls,
            probe_types: true,
            lexicons: BTreeMap::new(),
            patterns: None,
            background: None,
            seed: plan.seed,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let c: Config =
            serde_json::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text).map_err(|e| ConfigError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.min_delay_ms == 0 {
            return bad("min_delay_ms must be at least 1");
        }
        if self.max_fetches_per_site == 0 {
            return bad("max_fetches_per_site must be at least 1");
        }
        if self.timeout_ms == 0 {
            return bad("timeout_ms must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1]");
        }
        if !(1..=5).contains(&self.max_dims) {
            return bad("max_dims must lie in [1, 5]");
        }
        if self.samples == 0 || self.page_limit == 0 || self.max_template_urls == 0 {
            return bad("samples, page_limit and max_template_urls must be at least 1");
        }
        if !(self.near_duplicate > 0.0 && self.near_duplicate <= 1.0) {
            return bad("near_duplicate must lie in (0, 1]");
        }
        if self.probe.per_round == 0 {
            return bad("probe.per_round must be at least 1");
        }
        if let Some(k) = self
            .lexicons
            .keys()
            .find(|k| TypeTag::from_key(k).is_none())
        {
            return Err(ConfigError::Invalid(format!(
                "unknown lexicon {k:?}; expected zipcode, city, date or price"
            )));
        }
        Ok(())
    }

    pub fn fetch_policy(&self) -> FetchPolicy {
        FetchPolicy {
            min_delay_per_host: Duration::from_millis(self.min_delay_ms),
            max_fetches_per_site: self.max_fetches_per_site,
            timeout: Duration::from_millis(self.timeout_ms),
            user_agent: self.user_agent.clone(),
        }
    }

    pub fn plan_config(&self) -> PlanConfig {
        PlanConfig {
            probe: self.probe.clone(),
            tau: self.tau,
            max_dims: self.max_dims,
            samples: self.samples,
            near_duplicate: self.near_duplicate,
            page_limit: self.page_limit,
            typed_values: self.typed_values,
            max_template_urls: self.max_template_urls,
            seed: self.seed,
        }
    }

    /// Loads the referenced data files.
    pub fn surface_options(&self) -> Result<SurfaceOptions, ConfigError> {
        let file_err = |p: &Path, e: String| ConfigError::File {
            path: p.display().to_string(),
            message: e,
        };
        let mut lexicon = TypeLexicon::bundled();
        for (key, path) in &self.lexicons {
            let tag = TypeTag::from_key(key).expect("validated");
            lexicon
                .load_file(tag, path)
                .map_err(|e| file_err(path, e.to_string()))?;
        }
        let patterns = match &self.patterns {
            Some(p) => NamePatterns::load(p).map_err(|e| file_err(p, e.to_string()))?,
            None => NamePatterns::default(),
        };
        let background = match &self.background {
            Some(p) => Background::load(p).map_err(|e| file_err(p, e.to_string()))?,
            None => Background::bundled(),
        };
        Ok(SurfaceOptions {
            plan: self.plan_config(),
            classifier: Classifier {
                lexicon,
                patterns,
                seed: self.seed,
                ..Classifier::default()
            },
            background,
            probe_types: self.probe_types,
        })
    }
}
