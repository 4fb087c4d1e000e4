//! Project configuration: the TOML file that describes a mined project.

use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RepoType, Subsystem, SubsystemMap};

/// Numeric weights of the two involvement kinds. Contributing must outweigh
/// Informative, and both must be positive; otherwise edge intensities lose
/// their meaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvolvementWeights {
    pub contributing: u32,
    pub informative: u32,
}

impl Default for InvolvementWeights {
    fn default() -> Self {
        InvolvementWeights {
            contributing: 3,
            informative: 2,
        }
    }
}

impl InvolvementWeights {
    pub fn weight_of(&self, kind: crate::model::InvolvementKind) -> u32 {
        match kind {
            crate::model::InvolvementKind::Contributing => self.contributing,
            crate::model::InvolvementKind::Informative => self.informative,
        }
    }

    pub fn min_weight(&self) -> u32 {
        self.contributing.min(self.informative)
    }
}

/// Activity needed for subsystem team membership within one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityThresholds {
    /// Minimum number of issues with a Contributing involvement.
    pub min_contributing: u32,
    /// Minimum number of issues with an Informative involvement.
    pub min_informative: u32,
}

impl Default for ActivityThresholds {
    fn default() -> Self {
        ActivityThresholds {
            min_contributing: 2,
            min_informative: 5,
        }
    }
}

fn default_window_months() -> u32 {
    4
}

fn default_min_window_devs() -> usize {
    10
}

fn default_overlap_ratio() -> f64 {
    0.5
}

/// Everything the pipeline needs to know about one project.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub project_name: String,
    pub repo_type: RepoType,
    pub subsystems: Vec<Subsystem>,
    /// Regexes that extract issue keys from commit messages and reference
    /// strings. A pattern with a capture group contributes group 1,
    /// otherwise the whole match; purely numeric keys are qualified with
    /// the repository name ("115" in repo "kumuluz" becomes "kumuluz#115").
    pub issue_key_patterns: Vec<String>,
    #[serde(default = "default_window_months")]
    pub window_months: u32,
    #[serde(default = "default_min_window_devs")]
    pub min_window_devs: usize,
    #[serde(default)]
    pub involvement_weights: InvolvementWeights,
    #[serde(default)]
    pub activity_thresholds: ActivityThresholds,
    /// Community overlap threshold, see the communities module.
    #[serde(default = "default_overlap_ratio")]
    pub overlap_ratio: f64,
    /// Optional alias file, resolved relative to the config file location.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias_file: Option<PathBuf>,
}

impl ProjectConfig {
    /// Loads and validates a TOML config file. Relative alias-file paths
    /// are anchored at the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
        let mut config: ProjectConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(alias) = &config.alias_file {
            if alias.is_relative() {
                if let Some(dir) = path.parent() {
                    config.alias_file = Some(dir.join(alias));
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.project_name.trim().is_empty() {
            return Err(Error::Config("project_name must not be empty".into()));
        }
        if self.window_months == 0 {
            return Err(Error::Config("window_months must be at least 1".into()));
        }
        if self.issue_key_patterns.is_empty() {
            return Err(Error::Config(
                "at least one issue_key_pattern is required".into(),
            ));
        }
        self.compiled_patterns()?;
        let w = &self.involvement_weights;
        if !(w.contributing > w.informative && w.informative > 0) {
            return Err(Error::Config(format!(
                "involvement weights must satisfy contributing > informative > 0, got {} and {}",
                w.contributing, w.informative
            )));
        }
        let t = &self.activity_thresholds;
        if t.min_contributing == 0 || t.min_informative == 0 {
            return Err(Error::Config(
                "activity thresholds must be at least 1".into(),
            ));
        }
        if self.min_window_devs == 0 {
            return Err(Error::Config("min_window_devs must be at least 1".into()));
        }
        if !(self.overlap_ratio.is_finite() && self.overlap_ratio > 0.0) {
            return Err(Error::Config(
                "overlap_ratio must be a positive finite number".into(),
            ));
        }
        // Subsystem invariants are enforced by the map constructor.
        self.subsystem_map()?;
        Ok(())
    }

    pub fn subsystem_map(&self) -> Result<SubsystemMap> {
        SubsystemMap::new(self.repo_type, &self.subsystems)
    }

    pub fn compiled_patterns(&self) -> Result<Vec<Regex>> {
        self.issue_key_patterns
            .iter()
            .map(|p| {
                Regex::new(p).map_err(|e| {
                    Error::Config(format!("invalid issue key pattern '{p}': {e}"))
                })
            })
            .collect()
    }
}
