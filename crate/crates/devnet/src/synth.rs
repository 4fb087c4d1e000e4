//! Synthetic project generator with planted ground truth.
//!
//! Real mined datasets have no known community structure, so validation
//! runs on generated ones: developers are partitioned into planted groups,
//! issues draw participants preferentially within a group (p_in inside vs
//! p_out across), and each issue lands in a subsystem tied to its group
//! with configurable strength. The emitted files go through the exact same
//! ingest path as mined data, and the planted truth is written alongside
//! for comparison.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, Months, TimeZone, Utc};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::ProjectConfig;
use crate::error::{Error, Result};
use crate::model::{RepoType, Subsystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Size of the initial developer pool; planted groups index into it.
    pub n_developers: usize,
    pub n_subsystems: usize,
    pub n_windows: usize,
    /// Disjoint developer index sets. Developers outside every group stay
    /// inactive.
    pub planted_groups: Vec<Vec<usize>>,
    /// Probability that a group co-member joins an issue.
    pub p_in: f64,
    /// Probability that an outside developer joins an issue.
    pub p_out: f64,
    /// Fraction of group slots replaced by fresh developers each window.
    pub churn_rate: f64,
    pub rng_seed: u64,
    pub issues_per_window: usize,
    /// Probability that an issue's subsystem follows its group (group g
    /// maps to subsystem g mod n_subsystems); otherwise uniform.
    pub alignment: f64,
    pub window_months: u32,
    pub min_window_devs: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_developers: 30,
            n_subsystems: 3,
            n_windows: 3,
            planted_groups: (0..3).map(|g| (g * 10..(g + 1) * 10).collect()).collect(),
            p_in: 0.5,
            p_out: 0.02,
            churn_rate: 0.0,
            rng_seed: 42,
            issues_per_window: 30,
            alignment: 1.0,
            window_months: 1,
            min_window_devs: 10,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InfeasibleSpec(msg));
        if self.n_developers == 0 || self.n_windows == 0 || self.n_subsystems == 0 {
            return fail("developer pool, windows and subsystems must be non-empty".into());
        }
        if self.issues_per_window == 0 {
            return fail("issues_per_window must be at least 1".into());
        }
        if self.window_months == 0 {
            return fail("window_months must be at least 1".into());
        }
        if self.planted_groups.is_empty() || self.planted_groups.iter().any(|g| g.is_empty()) {
            return fail("planted groups must be non-empty".into());
        }
        let mut seen = BTreeSet::new();
        for group in &self.planted_groups {
            for &dev in group {
                if dev >= self.n_developers {
                    return fail(format!(
                        "group member {dev} outside the developer pool of {}",
                        self.n_developers
                    ));
                }
                if !seen.insert(dev) {
                    return fail(format!("developer {dev} appears in two groups"));
                }
            }
        }
        for (name, p) in [
            ("p_in", self.p_in),
            ("p_out", self.p_out),
            ("churn_rate", self.churn_rate),
            ("alignment", self.alignment),
        ] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return fail(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.p_in <= self.p_out {
            return fail(format!(
                "p_in ({}) must exceed p_out ({})",
                self.p_in, self.p_out
            ));
        }
        Ok(())
    }

    fn subsystem_names(&self) -> Vec<String> {
        (0..self.n_subsystems).map(|k| format!("sub{k}")).collect()
    }

    /// The config the generated project runs under.
    pub fn project_config(&self) -> ProjectConfig {
        ProjectConfig {
            project_name: "synthetic".into(),
            repo_type: RepoType::MonoRepo,
            subsystems: self
                .subsystem_names()
                .into_iter()
                .enumerate()
                .map(|(k, name)| Subsystem {
                    folder_prefixes: vec![name.clone()],
                    name,
                    is_main: k == 0,
                })
                .collect(),
            issue_key_patterns: vec!["SYN-\\d+".into()],
            window_months: self.window_months,
            min_window_devs: self.min_window_devs,
            involvement_weights: Default::default(),
            activity_thresholds: Default::default(),
            overlap_ratio: 0.5,
            alias_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub commits_path: PathBuf,
    pub issues_path: PathBuf,
    pub config_path: PathBuf,
    pub planted_path: PathBuf,
    /// Active developer numbers per window per group, after churn.
    pub planted: Vec<Vec<BTreeSet<u32>>>,
}

fn actor_json(dev: u32) -> serde_json::Value {
    json!({
        "id": format!("dev{dev}"),
        "name": format!("dev{dev}"),
        "email": format!("dev{dev}@synth.test"),
    })
}

/// Recovers the generator's developer number from a canonical name.
pub fn dev_number(name: &str) -> Option<u32> {
    name.strip_prefix("dev")?.parse().ok()
}

/// Writes commits.jsonl, issues.jsonl, config.toml and planted.json into
/// `out_dir`. Deterministic for a fixed spec.
pub fn generate(spec: &SynthSpec, out_dir: &Path) -> Result<SynthOutput> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io_at(out_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    let epoch = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
    let mut groups: Vec<Vec<u32>> = spec
        .planted_groups
        .iter()
        .map(|g| g.iter().map(|&d| d as u32).collect())
        .collect();
    let mut next_dev = spec.n_developers as u32;

    let mut commit_lines: Vec<String> = Vec::new();
    let mut issue_lines: Vec<String> = Vec::new();
    let mut planted: Vec<Vec<BTreeSet<u32>>> = Vec::new();
    let mut issue_seq = 0usize;
    let mut commit_seq = 0u64;

    for window in 0..spec.n_windows {
        if window > 0 && spec.churn_rate > 0.0 {
            for group in groups.iter_mut() {
                for slot in group.iter_mut() {
                    if rng.gen::<f64>() < spec.churn_rate {
                        *slot = next_dev;
                        next_dev += 1;
                    }
                }
            }
        }
        planted.push(groups.iter().map(|g| g.iter().copied().collect()).collect());

        let window_start = epoch
            .checked_add_months(Months::new(window as u32 * spec.window_months))
            .expect("synthetic timeline fits chrono range");
        for local in 0..spec.issues_per_window {
            issue_seq += 1;
            let key = format!("SYN-{issue_seq}");
            let created = window_start
                + Duration::days(1 + (local % 26) as i64)
                + Duration::hours((local % 12) as i64);

            let g = rng.gen_range(0..groups.len());
            let seed_slot = rng.gen_range(0..groups[g].len());
            let seed = groups[g][seed_slot];
            let mut participants: BTreeSet<u32> = BTreeSet::from([seed]);
            for (gi, group) in groups.iter().enumerate() {
                let p = if gi == g { spec.p_in } else { spec.p_out };
                for &dev in group {
                    if dev != seed && rng.gen::<f64>() < p {
                        participants.insert(dev);
                    }
                }
            }

            let subsystem = if rng.gen::<f64>() < spec.alignment {
                g % spec.n_subsystems
            } else {
                rng.gen_range(0..spec.n_subsystems)
            };
            let sub_name = format!("sub{subsystem}");

            let mut events = Vec::new();
            for (j, &dev) in participants.iter().enumerate() {
                let at = created + Duration::minutes(5 * j as i64 + 1);
                // The reporting developer always lands a commit so every
                // issue carries subsystem evidence; the rest split between
                // code and comments.
                let contributes = dev == seed || rng.gen::<f64>() < 0.5;
                if contributes {
                    commit_seq += 1;
                    let file = format!("{sub_name}/src/file{}.rs", rng.gen_range(0..6));
                    let line = json!({
                        "sha": format!("{commit_seq:040x}"),
                        "repo": "synth",
                        "author": actor_json(dev),
                        "timestamp": at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                        "message": format!("{key}: change {commit_seq}"),
                        "files": [file],
                    });
                    commit_lines.push(line.to_string());
                } else {
                    events.push(json!({
                        "actor": actor_json(dev),
                        "action": "comment",
                        "timestamp": at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                    }));
                }
            }
            let line = json!({
                "key": key,
                "repo": "synth",
                "kind": "issue",
                "title": format!("synthetic issue {issue_seq}"),
                "components": [sub_name],
                "created_at": created.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                "reporter": actor_json(seed),
                "events": events,
            });
            issue_lines.push(line.to_string());
        }
    }

    let commits_path = out_dir.join("commits.jsonl");
    let issues_path = out_dir.join("issues.jsonl");
    let config_path = out_dir.join("config.toml");
    let planted_path = out_dir.join("planted.json");
    fs::write(&commits_path, commit_lines.join("\n") + "\n")
        .map_err(|e| Error::io_at(&commits_path, e))?;
    fs::write(&issues_path, issue_lines.join("\n") + "\n")
        .map_err(|e| Error::io_at(&issues_path, e))?;
    let config_text = toml::to_string_pretty(&spec.project_config())
        .map_err(|e| Error::Internal(format!("config serialization: {e}")))?;
    fs::write(&config_path, config_text).map_err(|e| Error::io_at(&config_path, e))?;
    let planted_json = serde_json::to_string_pretty(&planted)
        .map_err(Error::from)?;
    fs::write(&planted_path, planted_json + "\n").map_err(|e| Error::io_at(&planted_path, e))?;

    Ok(SynthOutput {
        commits_path,
        issues_path,
        config_path,
        planted_path,
        planted,
    })
}
