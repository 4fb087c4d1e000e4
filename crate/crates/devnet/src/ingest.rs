//! Reading commit and issue dumps, linking them, and producing the
//! immutable [`ProjectDataset`] every later stage works from.
//!
//! Input is JSON lines, one record per line. Malformed lines are counted
//! and skipped; a dump with more than [`MALFORMED_LIMIT_PCT`] percent
//! malformed lines is rejected wholesale as corrupt rather than silently
//! mined with holes.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::config::ProjectConfig;
use crate::error::{Error, Result};
use crate::model::{
    resolve_identities, AliasFile, CommitRecord, IdentityMap, Involvement, InvolvementKind,
    IssueId, IssueRecord, Platform, RawActor, RepoType, SubsystemMap,
};

/// Reject a dump when more than this percentage of its lines is malformed.
pub const MALFORMED_LIMIT_PCT: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    Issue,
    Pr,
    Jira,
}

#[derive(Debug, Clone, Deserialize)]
struct ActorLine {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    name: String,
    #[serde(default)]
    email: Option<String>,
}

impl ActorLine {
    fn into_raw(self, platform: Platform) -> Option<RawActor> {
        let name = self.name.trim().to_string();
        let email = self
            .email
            .map(|e| e.trim().to_string())
            .filter(|e| !e.is_empty());
        let id = self.id.map(|i| i.trim().to_string()).filter(|i| !i.is_empty());
        let source_id = id
            .or_else(|| email.as_deref().map(str::to_lowercase))
            .or_else(|| (!name.is_empty()).then(|| name.clone()))?;
        Some(RawActor {
            source_id,
            display_name: name,
            email,
            platform,
        })
    }
}

#[derive(Debug, Deserialize)]
struct CommitLine {
    sha: String,
    repo: String,
    author: ActorLine,
    timestamp: DateTime<Utc>,
    #[serde(default)]
    message: String,
    #[serde(default)]
    files: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ActionKind {
    Comment,
    Review,
    Report,
    CommitLink,
}

impl ActionKind {
    fn involvement_kind(&self) -> InvolvementKind {
        match self {
            ActionKind::Comment | ActionKind::Review | ActionKind::Report => {
                InvolvementKind::Informative
            }
            ActionKind::CommitLink => InvolvementKind::Contributing,
        }
    }
}

#[derive(Debug, Deserialize)]
struct EventLine {
    actor: ActorLine,
    action: ActionKind,
    timestamp: DateTime<Utc>,
}

#[derive(Debug, Deserialize)]
struct IssueLine {
    key: String,
    #[serde(default)]
    repo: Option<String>,
    kind: IssueKind,
    #[serde(default)]
    title: String,
    #[serde(default)]
    components: Vec<String>,
    created_at: DateTime<Utc>,
    reporter: ActorLine,
    #[serde(default)]
    events: Vec<EventLine>,
    #[serde(default)]
    refs: Vec<String>,
}

/// An issue as parsed, before pull-request merging.
#[derive(Debug, Clone)]
pub struct ParsedIssue {
    pub key: String,
    pub repo: Option<String>,
    pub kind: IssueKind,
    pub title: String,
    /// Raw component field values, mapped to subsystems later.
    pub component_names: Vec<String>,
    pub involvements: Vec<Involvement>,
    /// Raw reference strings found in body or title by the converter.
    pub refs: Vec<String>,
    pub linked_commits: BTreeSet<String>,
}

/// Ingest bookkeeping, reported in the run summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkStats {
    pub commits_total: usize,
    pub commits_linked: usize,
    /// Issue records after merging.
    pub issues_total: usize,
    pub issues_linked: usize,
    pub issues_with_components: usize,
    pub malformed_commit_lines: usize,
    pub malformed_issue_lines: usize,
    /// Records dropped because their sha or key was already taken.
    pub duplicate_records: usize,
    /// Merges performed by [`merge_pull_requests`].
    pub record_merges: usize,
    /// Records whose references still pointed at two or more distinct
    /// issues after merging settled.
    pub multi_ref_warnings: usize,
    /// Component or repository names that match no configured subsystem.
    pub unmapped_components: BTreeMap<String, usize>,
}

impl LinkStats {
    pub fn commits_linked_pct(&self) -> f64 {
        percentage(self.commits_linked, self.commits_total)
    }

    pub fn issues_linked_pct(&self) -> f64 {
        percentage(self.issues_linked, self.issues_total)
    }

    pub fn issues_with_components_pct(&self) -> f64 {
        percentage(self.issues_with_components, self.issues_total)
    }
}

fn percentage(part: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * part as f64 / total as f64
    }
}

/// "115" in repo "kumuluz" becomes "kumuluz#115"; "#115" likewise. Keys
/// that are not purely numeric pass through unchanged.
fn normalize_key(raw: &str, repo: Option<&str>) -> String {
    let trimmed = raw.trim();
    let digits = trimmed.strip_prefix('#').unwrap_or(trimmed);
    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
        if let Some(repo) = repo {
            return format!("{repo}#{digits}");
        }
    }
    trimmed.to_string()
}

/// Parses one JSON-lines commit dump. `label` names the stream in errors.
pub fn parse_commits(
    reader: impl BufRead,
    label: &str,
    stats: &mut LinkStats,
) -> Result<Vec<CommitRecord>> {
    let mut commits = Vec::new();
    let mut seen_shas: BTreeSet<String> = BTreeSet::new();
    let mut total = 0usize;
    let mut malformed = 0usize;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        let parsed: CommitLine = match serde_json::from_str(&line) {
            Ok(p) => p,
            Err(_) => {
                malformed += 1;
                continue;
            }
        };
        let sha = parsed.sha.trim().to_string();
        if sha.is_empty() || parsed.repo.trim().is_empty() {
            malformed += 1;
            continue;
        }
        let Some(author) = parsed.author.into_raw(Platform::Git) else {
            malformed += 1;
            continue;
        };
        if !seen_shas.insert(sha.clone()) {
            stats.duplicate_records += 1;
            continue;
        }
        commits.push(CommitRecord {
            sha,
            repo: parsed.repo.trim().to_string(),
            author,
            timestamp: parsed.timestamp,
            message: parsed.message,
            files: parsed.files,
        });
    }
    stats.commits_total = commits.len();
    stats.malformed_commit_lines = malformed;
    check_corruption(label, malformed, total)?;
    Ok(commits)
}

/// Parses one JSON-lines issue dump. The reporter counts as an Informative
/// involvement at creation time, in addition to any explicit events.
pub fn parse_issues(
    reader: impl BufRead,
    label: &str,
    stats: &mut LinkStats,
) -> Result<Vec<ParsedIssue>> {
    let mut issues = Vec::new();
    let mut seen_keys: BTreeSet<String> = BTreeSet::new();
    let mut total = 0usize;
    let mut malformed = 0usize;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        let parsed: IssueLine = match serde_json::from_str(&line) {
            Ok(p) => p,
            Err(_) => {
                malformed += 1;
                continue;
            }
        };
        let repo = parsed
            .repo
            .map(|r| r.trim().to_string())
            .filter(|r| !r.is_empty());
        let key = normalize_key(&parsed.key, repo.as_deref());
        if key.is_empty() {
            malformed += 1;
            continue;
        }
        let platform = match parsed.kind {
            IssueKind::Jira => Platform::Jira,
            IssueKind::Issue | IssueKind::Pr => Platform::Github,
        };
        let mut involvements = Vec::new();
        let mut broken = false;
        match parsed.reporter.into_raw(platform) {
            Some(actor) => involvements.push(Involvement {
                actor,
                kind: InvolvementKind::Informative,
                timestamp: parsed.created_at,
            }),
            None => broken = true,
        }
        for event in parsed.events {
            let kind = event.action.involvement_kind();
            match event.actor.into_raw(platform) {
                Some(actor) => involvements.push(Involvement {
                    actor,
                    kind,
                    timestamp: event.timestamp,
                }),
                None => {
                    broken = true;
                    break;
                }
            }
        }
        if broken {
            malformed += 1;
            continue;
        }
        if !seen_keys.insert(key.clone()) {
            stats.duplicate_records += 1;
            continue;
        }
        issues.push(ParsedIssue {
            key,
            repo,
            kind: parsed.kind,
            title: parsed.title,
            component_names: parsed.components,
            involvements,
            refs: parsed.refs,
            linked_commits: BTreeSet::new(),
        });
    }
    stats.malformed_issue_lines = malformed;
    check_corruption(label, malformed, total)?;
    Ok(issues)
}

fn check_corruption(label: &str, malformed: usize, total: usize) -> Result<()> {
    if total > 0 && malformed * 100 > total * MALFORMED_LIMIT_PCT as usize {
        return Err(Error::CorruptDump {
            path: label.to_string(),
            malformed,
            total,
            limit_pct: MALFORMED_LIMIT_PCT,
        });
    }
    Ok(())
}

/// Parses both dumps. Spec'd entry point; the per-stream functions carry
/// the actual logic.
pub fn parse_events(
    commits: impl BufRead,
    issues: impl BufRead,
    _config: &ProjectConfig,
    stats: &mut LinkStats,
) -> Result<(Vec<CommitRecord>, Vec<ParsedIssue>)> {
    let commit_records = parse_commits(commits, "commits", stats)?;
    let issue_records = parse_issues(issues, "issues", stats)?;
    Ok((commit_records, issue_records))
}

/// All issue keys a text mentions, according to the configured patterns.
fn extract_keys(
    text: &str,
    patterns: &[Regex],
    repo: Option<&str>,
    out: &mut BTreeSet<String>,
) {
    for pattern in patterns {
        for caps in pattern.captures_iter(text) {
            let m = caps
                .get(1)
                .or_else(|| caps.get(0))
                .map(|m| m.as_str())
                .unwrap_or("");
            if !m.trim().is_empty() {
                out.insert(normalize_key(m, repo));
            }
        }
    }
}

/// Links commits to the issues their messages mention. A commit may link
/// to several issues; a message with no recognized key links to none.
pub fn link_commits_to_issues(
    commits: &[CommitRecord],
    issues: &mut [ParsedIssue],
    config: &ProjectConfig,
    stats: &mut LinkStats,
) -> Result<()> {
    let patterns = config.compiled_patterns()?;
    let by_key: BTreeMap<String, usize> = issues
        .iter()
        .enumerate()
        .map(|(i, issue)| (issue.key.clone(), i))
        .collect();
    let mut linked_commits = 0usize;
    for commit in commits {
        let mut keys = BTreeSet::new();
        extract_keys(&commit.message, &patterns, Some(&commit.repo), &mut keys);
        let mut linked = false;
        for key in keys {
            if let Some(&idx) = by_key.get(&key) {
                issues[idx].linked_commits.insert(commit.sha.clone());
                linked = true;
            }
        }
        if linked {
            linked_commits += 1;
        }
    }
    stats.commits_linked = linked_commits;
    Ok(())
}

/// Merges records that are the same piece of work seen from different
/// trackers:
///
/// * a pull request referencing exactly one other issue melts into it;
/// * a platform issue referencing exactly one tracker (jira) issue melts
///   into it;
/// * merging is transitive, so PR -> platform issue -> tracker ticket
///   collapses to a single record.
///
/// A record still referencing two or more distinct issues after the above
/// settles is left alone: its linked commits are attached to every
/// referenced issue and a warning is counted, because guessing a merge
/// target would silently conflate unrelated work.
pub fn merge_pull_requests(
    issues: Vec<ParsedIssue>,
    config: &ProjectConfig,
    stats: &mut LinkStats,
) -> Result<Vec<IssueRecord>> {
    let patterns = config.compiled_patterns()?;
    let by_key: BTreeMap<String, usize> = issues
        .iter()
        .enumerate()
        .map(|(i, issue)| (issue.key.clone(), i))
        .collect();

    // Keys each record references, own key excluded.
    let ref_targets: Vec<BTreeSet<usize>> = issues
        .iter()
        .map(|issue| {
            let mut keys = BTreeSet::new();
            extract_keys(&issue.title, &patterns, issue.repo.as_deref(), &mut keys);
            for r in &issue.refs {
                extract_keys(r, &patterns, issue.repo.as_deref(), &mut keys);
            }
            keys.remove(&issue.key);
            keys.iter()
                .filter_map(|k| by_key.get(k).copied())
                .collect()
        })
        .collect();

    let mut parent: Vec<usize> = (0..issues.len()).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }

    // The "exactly one target" condition can only become true as groups
    // coarsen (two targets collapsing into one), never false, so iterating
    // to a fixpoint yields a unique, order-independent result.
    loop {
        let mut changed = false;
        for (i, issue) in issues.iter().enumerate() {
            let my_root = find(&mut parent, i);
            let mut eligible_targets: BTreeSet<usize> = BTreeSet::new();
            for &t in &ref_targets[i] {
                let eligible = match issue.kind {
                    IssueKind::Pr => true,
                    IssueKind::Issue => issues[t].kind == IssueKind::Jira,
                    IssueKind::Jira => false,
                };
                if !eligible {
                    continue;
                }
                let root = find(&mut parent, t);
                if root != my_root {
                    eligible_targets.insert(root);
                }
            }
            if eligible_targets.len() == 1 {
                let target = *eligible_targets.iter().next().unwrap();
                let (lo, hi) = if my_root < target {
                    (my_root, target)
                } else {
                    (target, my_root)
                };
                parent[hi] = lo;
                stats.record_merges += 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // Unresolved multi-references: attach commits, count a warning.
    let mut extra_commits: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for (i, issue) in issues.iter().enumerate() {
        if matches!(issue.kind, IssueKind::Jira) {
            continue;
        }
        let my_root = find(&mut parent, i);
        let mut targets: BTreeSet<usize> = BTreeSet::new();
        for &t in &ref_targets[i] {
            let root = find(&mut parent, t);
            if root != my_root {
                targets.insert(root);
            }
        }
        if targets.len() >= 2 {
            stats.multi_ref_warnings += 1;
            log::warn!(
                "record '{}' references {} distinct issues; linking commits to all of them instead of merging",
                issue.key,
                targets.len()
            );
            for t in targets {
                extra_commits
                    .entry(t)
                    .or_default()
                    .extend(issue.linked_commits.iter().cloned());
            }
        }
    }

    // Assemble merged records; groups ordered by their smallest origin key
    // so output ids do not depend on input order quirks.
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..issues.len() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut assembled: Vec<(String, IssueRecord)> = Vec::with_capacity(groups.len());
    for (root, members) in groups {
        let mut origin_keys = BTreeSet::new();
        let mut involvements = Vec::new();
        let mut component_names = BTreeSet::new();
        let mut linked_commits = BTreeSet::new();
        for &m in &members {
            let issue = &issues[m];
            origin_keys.insert(issue.key.clone());
            involvements.extend(issue.involvements.iter().cloned());
            component_names.extend(issue.component_names.iter().cloned());
            linked_commits.extend(issue.linked_commits.iter().cloned());
        }
        // Platform records carry the authoritative repo; tracker tickets
        // usually have none.
        let repo = members
            .iter()
            .filter(|&&m| issues[m].kind != IssueKind::Jira)
            .chain(members.iter())
            .find_map(|&m| issues[m].repo.clone());
        if let Some(extra) = extra_commits.get(&root) {
            linked_commits.extend(extra.iter().cloned());
        }
        let min_key = origin_keys
            .iter()
            .next()
            .expect("every group has at least one key")
            .clone();
        assembled.push((
            min_key,
            IssueRecord {
                id: IssueId(0), // assigned below
                origin_keys,
                repo,
                components: component_names, // still raw names here
                involvements,
                linked_commits,
            },
        ));
    }
    assembled.sort_by(|a, b| a.0.cmp(&b.0));
    let mut records: Vec<IssueRecord> = assembled.into_iter().map(|(_, r)| r).collect();
    for (i, record) in records.iter_mut().enumerate() {
        record.id = IssueId(i as u32);
    }
    stats.issues_total = records.len();
    stats.issues_linked = records
        .iter()
        .filter(|r| !r.linked_commits.is_empty())
        .count();
    Ok(records)
}

/// Replaces raw component names with configured subsystem names.
///
/// Multi-repo projects derive the single component from the issue's
/// repository. Names matching no subsystem are tallied in
/// `unmapped_components` and dropped; the issue still contributes
/// interaction edges, it just cannot contribute to any subsystem team.
pub fn link_issues_to_subsystems(
    issues: &mut [IssueRecord],
    map: &SubsystemMap,
    stats: &mut LinkStats,
) {
    for issue in issues.iter_mut() {
        let raw: Vec<String> = std::mem::take(&mut issue.components).into_iter().collect();
        let mut mapped = BTreeSet::new();
        match map.repo_type() {
            RepoType::MultiRepo => {
                let repo = issue.repo.as_deref().unwrap_or("");
                match map.by_repo(repo) {
                    Some(id) => {
                        mapped.insert(map.name(id).to_string());
                    }
                    None => {
                        let label = if repo.is_empty() {
                            "<no repository>".to_string()
                        } else {
                            repo.to_string()
                        };
                        *stats.unmapped_components.entry(label).or_insert(0) += 1;
                    }
                }
            }
            RepoType::MonoRepo => {
                for name in raw {
                    match map.by_name(&name) {
                        Some(id) => {
                            mapped.insert(map.name(id).to_string());
                        }
                        None => {
                            *stats.unmapped_components.entry(name).or_insert(0) += 1;
                        }
                    }
                }
            }
        }
        issue.components = mapped;
    }
    stats.issues_with_components = issues.iter().filter(|i| !i.components.is_empty()).count();
}

/// The immutable product of ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectDataset {
    pub config: ProjectConfig,
    pub developers: IdentityMap,
    pub commits: Vec<CommitRecord>,
    pub issues: Vec<IssueRecord>,
    pub link_stats: LinkStats,
}

impl ProjectDataset {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io_at(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io_at(path, e))?;
        let dataset: ProjectDataset = serde_json::from_reader(std::io::BufReader::new(file))?;
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn commit(&self, sha: &str) -> Option<&CommitRecord> {
        self.commits.iter().find(|c| c.sha == sha)
    }

    /// Cross-record consistency; called on load so a hand-edited dataset
    /// cannot smuggle dangling references into the metric stages.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let shas: BTreeSet<&str> = self.commits.iter().map(|c| c.sha.as_str()).collect();
        let submap = self.config.subsystem_map()?;
        for issue in &self.issues {
            for sha in &issue.linked_commits {
                if !shas.contains(sha.as_str()) {
                    return Err(Error::Data(format!(
                        "issue {} links unknown commit {sha}",
                        issue.id
                    )));
                }
            }
            for involvement in &issue.involvements {
                if self.developers.resolve(&involvement.actor).is_none() {
                    return Err(Error::UnresolvedActor {
                        actor: involvement.actor.describe(),
                    });
                }
            }
            for component in &issue.components {
                if submap.by_name(component).is_none() {
                    return Err(Error::Data(format!(
                        "issue {} has unknown component '{component}'",
                        issue.id
                    )));
                }
            }
        }
        for commit in &self.commits {
            if self.developers.resolve(&commit.author).is_none() {
                return Err(Error::UnresolvedActor {
                    actor: commit.author.describe(),
                });
            }
        }
        Ok(())
    }
}

/// Full ingest: parse, link, merge, map components, resolve identities.
pub fn build_dataset(
    commits: impl BufRead,
    issues: impl BufRead,
    config: &ProjectConfig,
) -> Result<ProjectDataset> {
    let mut stats = LinkStats::default();
    let (commit_records, parsed_issues) = parse_events(commits, issues, config, &mut stats)?;
    build_dataset_from_parsed(commit_records, parsed_issues, config, stats)
}

/// Ingest from files on disk.
pub fn ingest_files(
    commits_path: &Path,
    issues_path: &Path,
    config: &ProjectConfig,
) -> Result<ProjectDataset> {
    let mut stats = LinkStats::default();
    let commits_file =
        std::fs::File::open(commits_path).map_err(|e| Error::io_at(commits_path, e))?;
    let commit_records = parse_commits(
        std::io::BufReader::new(commits_file),
        &commits_path.display().to_string(),
        &mut stats,
    )?;
    let issues_file =
        std::fs::File::open(issues_path).map_err(|e| Error::io_at(issues_path, e))?;
    let parsed_issues = parse_issues(
        std::io::BufReader::new(issues_file),
        &issues_path.display().to_string(),
        &mut stats,
    )?;
    build_dataset_from_parsed(commit_records, parsed_issues, config, stats)
}

fn build_dataset_from_parsed(
    commits: Vec<CommitRecord>,
    mut parsed: Vec<ParsedIssue>,
    config: &ProjectConfig,
    mut stats: LinkStats,
) -> Result<ProjectDataset> {
    config.validate()?;
    let submap = config.subsystem_map()?;

    // Fail early on misattributed repositories: every commit of a
    // multi-repo project must belong to a configured subsystem.
    if submap.repo_type() == RepoType::MultiRepo {
        for commit in &commits {
            if submap.by_repo(&commit.repo).is_none() {
                return Err(Error::UnknownRepo {
                    repo: commit.repo.clone(),
                });
            }
        }
    }

    link_commits_to_issues(&commits, &mut parsed, config, &mut stats)?;
    let mut issues = merge_pull_requests(parsed, config, &mut stats)?;
    link_issues_to_subsystems(&mut issues, &submap, &mut stats);

    let mut actors: Vec<RawActor> = Vec::new();
    for commit in &commits {
        actors.push(commit.author.clone());
    }
    for issue in &issues {
        for involvement in &issue.involvements {
            actors.push(involvement.actor.clone());
        }
    }
    let alias_file = match &config.alias_file {
        Some(path) => Some(AliasFile::load(path)?),
        None => None,
    };
    let developers = resolve_identities(&actors, alias_file.as_ref())?;

    Ok(ProjectDataset {
        config: config.clone(),
        developers,
        commits,
        issues,
        link_stats: stats,
    })
}
