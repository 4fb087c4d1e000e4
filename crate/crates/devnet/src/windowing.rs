//! Calendar time windows and the per-window involvement index.
//!
//! A window is `window_months` whole calendar months; window 0 starts on
//! the first day of the month of the earliest event, and consecutive
//! windows tile the project span without gaps or overlap.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use chrono::{DateTime, Datelike, Months, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ProjectDataset;
use crate::model::{CommitRecord, DevId, InvolvementKind, IssueId, SubsystemId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub index: usize,
    pub start: DateTime<Utc>,
    /// Exclusive.
    pub end: DateTime<Utc>,
}

impl TimeWindow {
    pub fn contains(&self, ts: DateTime<Utc>) -> bool {
        self.start <= ts && ts < self.end
    }
}

fn month_start(ts: DateTime<Utc>) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(ts.year(), ts.month(), 1, 0, 0, 0)
        .single()
        .expect("first day of month at midnight is always valid")
}

/// Every timestamp the dataset contains, in arbitrary order.
fn event_timestamps<'a>(
    dataset: &'a ProjectDataset,
) -> impl Iterator<Item = DateTime<Utc>> + 'a {
    let commits = dataset.commits.iter().map(|c| c.timestamp);
    let involvements = dataset
        .issues
        .iter()
        .flat_map(|i| i.involvements.iter().map(|inv| inv.timestamp));
    commits.chain(involvements)
}

/// Tiles the project span with `window_months`-sized calendar windows.
/// A dataset without any events yields no windows.
pub fn build_windows(dataset: &ProjectDataset) -> Vec<TimeWindow> {
    let Some(earliest) = event_timestamps(dataset).min() else {
        return Vec::new();
    };
    let latest = event_timestamps(dataset).max().expect("min implies max");
    let months = Months::new(dataset.config.window_months);
    let anchor = month_start(earliest);
    let mut windows = Vec::new();
    let mut start = anchor;
    loop {
        let end = start
            .checked_add_months(months)
            .expect("window end within chrono range");
        windows.push(TimeWindow {
            index: windows.len(),
            start,
            end,
        });
        if end > latest {
            break;
        }
        start = end;
    }
    windows
}

/// Whether a developer contributed to or was informed about an issue,
/// attributed to one subsystem.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ActivityFlags {
    pub contributing: bool,
    pub informative: bool,
}

/// Who was involved in what during one window.
///
/// `inv_max` keeps only the highest involvement weight per developer and
/// issue; everything downstream (edges, teams, focus) is built from these
/// maxima, so commenting ten times on one issue counts no more than
/// commenting once).
#[derive(Debug, Clone, PartialEq)]
pub struct InvolvementIndex {
    pub window_index: usize,
    inv_max: BTreeMap<(DevId, IssueId), u32>,
    by_issue: BTreeMap<IssueId, Vec<(DevId, u32)>>,
    subsystem_issues: BTreeMap<(DevId, SubsystemId), BTreeMap<IssueId, ActivityFlags>>,
    /// Involvements plus commits falling into this window; used to check
    /// that windows tile the span.
    pub event_count: usize,
}

impl InvolvementIndex {
    pub fn inv_max(&self, dev: DevId, issue: IssueId) -> Option<u32> {
        self.inv_max.get(&(dev, issue)).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (DevId, IssueId, u32)> + '_ {
        self.inv_max.iter().map(|(&(d, i), &w)| (d, i, w))
    }

    /// Participants of each issue with their per-issue maxima; developers
    /// sorted by id.
    pub fn by_issue(&self) -> &BTreeMap<IssueId, Vec<(DevId, u32)>> {
        &self.by_issue
    }

    pub fn active_developers(&self) -> BTreeSet<DevId> {
        self.inv_max.keys().map(|&(d, _)| d).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_max.is_empty()
    }

    /// Issues attributed to (developer, subsystem) with activity flags.
    pub fn subsystem_issues(
        &self,
        dev: DevId,
        subsystem: SubsystemId,
    ) -> Option<&BTreeMap<IssueId, ActivityFlags>> {
        self.subsystem_issues.get(&(dev, subsystem))
    }

    pub fn subsystem_entries(
        &self,
    ) -> impl Iterator<Item = (DevId, SubsystemId, &BTreeMap<IssueId, ActivityFlags>)> {
        self.subsystem_issues
            .iter()
            .map(|(&(d, s), issues)| (d, s, issues))
    }

    /// Focus mass per subsystem: the sum of per-issue maxima over all
    /// issues attributed to the subsystem for this developer.
    pub fn per_subsystem_mass(&self, dev: DevId) -> BTreeMap<SubsystemId, u64> {
        let mut masses = BTreeMap::new();
        for (&(d, s), issues) in &self.subsystem_issues {
            if d != dev {
                continue;
            }
            let mass: u64 = issues
                .keys()
                .map(|&i| self.inv_max[&(dev, i)] as u64)
                .sum();
            masses.insert(s, mass);
        }
        masses
    }
}

/// Builds the involvement index of one window.
///
/// Issue events attribute their weight to every component of the issue; a
/// linked commit is a Contributing involvement attributed additionally to
/// the subsystems of its touched files. Commit involvements are timed by
/// the commit timestamp, so work merged in a later window counts there.
pub fn compute_involvements(
    dataset: &ProjectDataset,
    window: &TimeWindow,
) -> Result<InvolvementIndex> {
    let weights = dataset.config.involvement_weights;
    let submap = dataset.config.subsystem_map()?;
    let commit_index: BTreeMap<&str, &CommitRecord> = dataset
        .commits
        .iter()
        .map(|c| (c.sha.as_str(), c))
        .collect();

    let mut inv_max: BTreeMap<(DevId, IssueId), u32> = BTreeMap::new();
    let mut subsystem_issues: BTreeMap<(DevId, SubsystemId), BTreeMap<IssueId, ActivityFlags>> =
        BTreeMap::new();
    let mut event_count = 0usize;

    let mut record = |dev: DevId,
                      issue: IssueId,
                      weight: u32,
                      kind: InvolvementKind,
                      subsystems: &BTreeSet<SubsystemId>,
                      inv_max: &mut BTreeMap<(DevId, IssueId), u32>| {
        let slot = inv_max.entry((dev, issue)).or_insert(0);
        *slot = (*slot).max(weight);
        for &s in subsystems {
            let flags = subsystem_issues
                .entry((dev, s))
                .or_default()
                .entry(issue)
                .or_default();
            match kind {
                InvolvementKind::Contributing => flags.contributing = true,
                InvolvementKind::Informative => flags.informative = true,
            }
        }
    };

    for issue in &dataset.issues {
        let components: BTreeSet<SubsystemId> = issue
            .components
            .iter()
            .filter_map(|name| submap.by_name(name))
            .collect();

        for involvement in &issue.involvements {
            if !window.contains(involvement.timestamp) {
                continue;
            }
            event_count += 1;
            let dev = dataset
                .developers
                .resolve(&involvement.actor)
                .ok_or_else(|| Error::UnresolvedActor {
                    actor: involvement.actor.describe(),
                })?;
            record(
                dev,
                issue.id,
                weights.weight_of(involvement.kind),
                involvement.kind,
                &components,
                &mut inv_max,
            );
        }

        for sha in &issue.linked_commits {
            let commit = commit_index.get(sha.as_str()).ok_or_else(|| {
                Error::Data(format!("issue {} links unknown commit {sha}", issue.id))
            })?;
            if !window.contains(commit.timestamp) {
                continue;
            }
            let dev = dataset
                .developers
                .resolve(&commit.author)
                .ok_or_else(|| Error::UnresolvedActor {
                    actor: commit.author.describe(),
                })?;
            let mut subsystems = components.clone();
            for file in &commit.files {
                subsystems.insert(submap.resolve_path(file, &commit.repo)?);
            }
            record(
                dev,
                issue.id,
                weights.contributing,
                InvolvementKind::Contributing,
                &subsystems,
                &mut inv_max,
            );
        }
    }

    event_count += dataset
        .commits
        .iter()
        .filter(|c| window.contains(c.timestamp))
        .count();

    let mut by_issue: BTreeMap<IssueId, Vec<(DevId, u32)>> = BTreeMap::new();
    for (&(dev, issue), &w) in &inv_max {
        by_issue.entry(issue).or_default().push((dev, w));
    }

    Ok(InvolvementIndex {
        window_index: window.index,
        inv_max,
        by_issue,
        subsystem_issues,
        event_count,
    })
}

/// Builds an index straight from (dev, subsystem, issue, weight,
/// contributing) rows, bypassing the dataset machinery. Metric modules
/// test against this.
#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    pub fn index_from_entries(
        window_index: usize,
        entries: impl IntoIterator<Item = (DevId, SubsystemId, u32, u32, bool)>,
    ) -> InvolvementIndex {
        let mut inv_max: BTreeMap<(DevId, IssueId), u32> = BTreeMap::new();
        let mut subsystem_issues: BTreeMap<(DevId, SubsystemId), BTreeMap<IssueId, ActivityFlags>> =
            BTreeMap::new();
        let mut event_count = 0usize;
        for (dev, subsystem, issue, weight, contributing) in entries {
            let issue = IssueId(issue);
            event_count += 1;
            let slot = inv_max.entry((dev, issue)).or_insert(0);
            *slot = (*slot).max(weight);
            let flags = subsystem_issues
                .entry((dev, subsystem))
                .or_default()
                .entry(issue)
                .or_default();
            if contributing {
                flags.contributing = true;
            } else {
                flags.informative = true;
            }
        }
        let mut by_issue: BTreeMap<IssueId, Vec<(DevId, u32)>> = BTreeMap::new();
        for (&(dev, issue), &w) in &inv_max {
            by_issue.entry(issue).or_default().push((dev, w));
        }
        InvolvementIndex {
            window_index,
            inv_max,
            by_issue,
            subsystem_issues,
            event_count,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProjectConfig;
    use crate::ingest::{LinkStats, ProjectDataset};
    use crate::model::{
        resolve_identities, Involvement, IssueRecord, Platform, RawActor, RepoType, Subsystem,
    };

    fn ts(s: &str) -> DateTime<Utc> {
        s.parse().unwrap()
    }

    fn actor(name: &str) -> RawActor {
        RawActor {
            source_id: format!("{}@x.com", name.to_lowercase()),
            display_name: name.to_string(),
            email: Some(format!("{}@x.com", name.to_lowercase())),
            platform: Platform::Jira,
        }
    }

    fn config() -> ProjectConfig {
        ProjectConfig {
            project_name: "t".into(),
            repo_type: RepoType::MonoRepo,
            subsystems: vec![
                Subsystem {
                    name: "core".into(),
                    folder_prefixes: vec!["core".into()],
                    is_main: false,
                },
                Subsystem {
                    name: "main".into(),
                    folder_prefixes: vec![],
                    is_main: true,
                },
            ],
            issue_key_patterns: vec![r"[A-Z]+-\d+".into()],
            window_months: 4,
            min_window_devs: 10,
            involvement_weights: Default::default(),
            activity_thresholds: Default::default(),
            overlap_ratio: 0.5,
            alias_file: None,
        }
    }

    /// Dataset with one issue; involvements given as (actor, kind, ts).
    fn dataset_with(
        involvements: Vec<(RawActor, InvolvementKind, &str)>,
        commits: Vec<CommitRecord>,
        linked: &[&str],
    ) -> ProjectDataset {
        let mut actors: Vec<RawActor> = involvements.iter().map(|(a, _, _)| a.clone()).collect();
        actors.extend(commits.iter().map(|c| c.author.clone()));
        let developers = resolve_identities(&actors, None).unwrap();
        let issue = IssueRecord {
            id: IssueId(0),
            origin_keys: std::iter::once("T-1".to_string()).collect(),
            repo: Some("repo".into()),
            components: std::iter::once("core".to_string()).collect(),
            involvements: involvements
                .into_iter()
                .map(|(actor, kind, t)| Involvement {
                    actor,
                    kind,
                    timestamp: ts(t),
                })
                .collect(),
            linked_commits: linked.iter().map(|s| s.to_string()).collect(),
        };
        ProjectDataset {
            config: config(),
            developers,
            commits,
            issues: vec![issue],
            link_stats: LinkStats::default(),
        }
    }

    fn commit(sha: &str, author: RawActor, t: &str, files: &[&str]) -> CommitRecord {
        CommitRecord {
            sha: sha.into(),
            repo: "repo".into(),
            author,
            timestamp: ts(t),
            message: String::new(),
            files: files.iter().map(|f| f.to_string()).collect(),
        }
    }

    #[test]
    fn window_zero_starts_at_month_start() {
        let ds = dataset_with(
            vec![(
                actor("Ann"),
                InvolvementKind::Informative,
                "2016-03-15T12:00:00Z",
            )],
            vec![],
            &[],
        );
        let windows = build_windows(&ds);
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].start, ts("2016-03-01T00:00:00Z"));
        assert_eq!(windows[0].end, ts("2016-07-01T00:00:00Z"));
    }

    #[test]
    fn forty_four_month_span_gives_eleven_windows() {
        let ds = dataset_with(
            vec![
                (
                    actor("Ann"),
                    InvolvementKind::Informative,
                    "2016-03-15T12:00:00Z",
                ),
                (
                    actor("Bob"),
                    InvolvementKind::Informative,
                    "2019-10-20T12:00:00Z",
                ),
            ],
            vec![],
            &[],
        );
        let windows = build_windows(&ds);
        assert_eq!(windows.len(), 11);
        assert_eq!(windows[10].start, ts("2019-07-01T00:00:00Z"));
        assert_eq!(windows[10].end, ts("2019-11-01T00:00:00Z"));
        // Tiling: consecutive windows share their boundary.
        for pair in windows.windows(2) {
            assert_eq!(pair[0].end, pair[1].start);
        }
    }

    #[test]
    fn no_events_no_windows() {
        let ds = dataset_with(vec![], vec![], &[]);
        assert!(build_windows(&ds).is_empty());
    }

    #[test]
    fn comment_plus_commit_keeps_the_maximum() {
        let ann = actor("Ann");
        let commits = vec![commit("c1", ann.clone(), "2021-02-01T00:00:00Z", &["core/a.rs"])];
        let ds = dataset_with(
            vec![
                (ann.clone(), InvolvementKind::Informative, "2021-01-10T00:00:00Z"),
                (ann.clone(), InvolvementKind::Informative, "2021-01-20T00:00:00Z"),
            ],
            commits,
            &["c1"],
        );
        let windows = build_windows(&ds);
        let inv = compute_involvements(&ds, &windows[0]).unwrap();
        let dev = ds.developers.resolve(&ann).unwrap();
        assert_eq!(inv.inv_max(dev, IssueId(0)), Some(3));
    }

    #[test]
    fn comments_alone_weigh_two() {
        let ann = actor("Ann");
        let ds = dataset_with(
            vec![(ann.clone(), InvolvementKind::Informative, "2021-01-10T00:00:00Z")],
            vec![],
            &[],
        );
        let windows = build_windows(&ds);
        let inv = compute_involvements(&ds, &windows[0]).unwrap();
        let dev = ds.developers.resolve(&ann).unwrap();
        assert_eq!(inv.inv_max(dev, IssueId(0)), Some(2));
    }

    #[test]
    fn maxima_are_recomputed_per_window() {
        // Commit in window 0, comment in window 1: 3 then 2.
        let ann = actor("Ann");
        let commits = vec![commit("c1", ann.clone(), "2021-01-05T00:00:00Z", &["core/a.rs"])];
        let ds = dataset_with(
            vec![(ann.clone(), InvolvementKind::Informative, "2021-06-10T00:00:00Z")],
            commits,
            &["c1"],
        );
        let windows = build_windows(&ds);
        assert_eq!(windows.len(), 2);
        let dev = ds.developers.resolve(&ann).unwrap();
        let w0 = compute_involvements(&ds, &windows[0]).unwrap();
        let w1 = compute_involvements(&ds, &windows[1]).unwrap();
        assert_eq!(w0.inv_max(dev, IssueId(0)), Some(3));
        assert_eq!(w1.inv_max(dev, IssueId(0)), Some(2));
    }

    #[test]
    fn windows_partition_all_events() {
        let ann = actor("Ann");
        let bob = actor("Bob");
        let commits = vec![
            commit("c1", ann.clone(), "2021-01-05T00:00:00Z", &[]),
            commit("c2", bob.clone(), "2021-09-05T00:00:00Z", &[]),
        ];
        let ds = dataset_with(
            vec![
                (ann.clone(), InvolvementKind::Informative, "2021-02-10T00:00:00Z"),
                (bob.clone(), InvolvementKind::Informative, "2021-06-10T00:00:00Z"),
                (ann, InvolvementKind::Contributing, "2021-11-10T00:00:00Z"),
            ],
            commits,
            &["c1"],
        );
        let windows = build_windows(&ds);
        let total: usize = windows
            .iter()
            .map(|w| compute_involvements(&ds, w).unwrap().event_count)
            .sum();
        // 3 involvements + 2 commits.
        assert_eq!(total, 5);
    }

    #[test]
    fn commit_files_attribute_to_file_subsystems() {
        let ann = actor("Ann");
        let commits = vec![commit(
            "c1",
            ann.clone(),
            "2021-01-05T00:00:00Z",
            &["docs/readme.md"], // maps to main, issue component is core
        )];
        let ds = dataset_with(vec![], commits, &["c1"]);
        let windows = build_windows(&ds);
        let inv = compute_involvements(&ds, &windows[0]).unwrap();
        let dev = ds.developers.resolve(&ann).unwrap();
        let core = SubsystemId(0);
        let main = SubsystemId(1);
        assert!(inv.subsystem_issues(dev, core).is_some(), "issue component");
        assert!(inv.subsystem_issues(dev, main).is_some(), "touched file");
        let masses = inv.per_subsystem_mass(dev);
        assert_eq!(masses.get(&core), Some(&3));
        assert_eq!(masses.get(&main), Some(&3));
    }

    #[test]
    fn unresolved_actor_is_a_hard_error() {
        let ann = actor("Ann");
        let mut ds = dataset_with(
            vec![(ann, InvolvementKind::Informative, "2021-01-10T00:00:00Z")],
            vec![],
            &[],
        );
        // Forge an identity map that does not know the actor.
        ds.developers = resolve_identities(&[actor("Someone Else")], None).unwrap();
        let windows = build_windows(&ds);
        let err = compute_involvements(&ds, &windows[0]).unwrap_err();
        assert!(matches!(err, Error::UnresolvedActor { .. }));
    }

    #[test]
    fn involvement_order_does_not_matter() {
        let ann = actor("Ann");
        let bob = actor("Bob");
        let mut ds = dataset_with(
            vec![
                (ann.clone(), InvolvementKind::Informative, "2021-01-10T00:00:00Z"),
                (bob.clone(), InvolvementKind::Contributing, "2021-01-11T00:00:00Z"),
                (ann.clone(), InvolvementKind::Contributing, "2021-01-12T00:00:00Z"),
            ],
            vec![],
            &[],
        );
        let windows = build_windows(&ds);
        let forward = compute_involvements(&ds, &windows[0]).unwrap();
        ds.issues[0].involvements.reverse();
        let backward = compute_involvements(&ds, &windows[0]).unwrap();
        assert_eq!(forward, backward);
    }
}
