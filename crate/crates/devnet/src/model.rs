//! Core domain types: actors, developers, commits, issues, subsystems.
//!
//! Two pieces of non-trivial logic live here because everything downstream
//! depends on them: identity resolution (collapsing the many author strings a
//! person uses into one [`Developer`]) and artifact-to-subsystem mapping.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Where an actor string was observed.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    Git,
    Github,
    Jira,
}

/// One unresolved author/actor occurrence as found in the raw dumps.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RawActor {
    /// Platform-specific id; falls back to the email or display name.
    pub source_id: String,
    pub display_name: String,
    pub email: Option<String>,
    pub platform: Platform,
}

impl RawActor {
    /// Short human-readable form for error messages.
    pub fn describe(&self) -> String {
        match &self.email {
            Some(email) => format!("{} <{}>", self.display_name, email),
            None => self.display_name.clone(),
        }
    }
}

/// Stable identifier of a resolved developer within one dataset.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct DevId(pub u32);

impl fmt::Display for DevId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A real person, i.e. an alias group produced by identity resolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Developer {
    pub id: DevId,
    /// Most frequent display name among the aliases, ties broken
    /// lexicographically.
    pub canonical_name: String,
    pub aliases: BTreeSet<RawActor>,
}

/// Resolved identity map: every raw actor points at exactly one developer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Developer>", into = "Vec<Developer>")]
pub struct IdentityMap {
    developers: Vec<Developer>,
    index: BTreeMap<RawActor, DevId>,
}

impl IdentityMap {
    pub fn resolve(&self, actor: &RawActor) -> Option<DevId> {
        self.index.get(actor).copied()
    }

    pub fn developer(&self, id: DevId) -> &Developer {
        &self.developers[id.0 as usize]
    }

    pub fn developers(&self) -> &[Developer] {
        &self.developers
    }

    pub fn len(&self) -> usize {
        self.developers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.developers.is_empty()
    }
}

impl TryFrom<Vec<Developer>> for IdentityMap {
    type Error = Error;

    /// Rebuilds the actor index, enforcing that alias sets are disjoint and
    /// ids are the dense sequence 0..n.
    fn try_from(developers: Vec<Developer>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, dev) in developers.iter().enumerate() {
            if dev.id.0 as usize != i {
                return Err(Error::Data(format!(
                    "developer ids are not dense: position {i} holds d{}",
                    dev.id
                )));
            }
            for alias in &dev.aliases {
                if index.insert(alias.clone(), dev.id).is_some() {
                    return Err(Error::Data(format!(
                        "actor {} appears in two developer alias sets",
                        alias.describe()
                    )));
                }
            }
        }
        Ok(IdentityMap { developers, index })
    }
}

impl From<IdentityMap> for Vec<Developer> {
    fn from(map: IdentityMap) -> Self {
        map.developers
    }
}

/// One group line of an alias file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasGroup {
    pub label: String,
    /// Lowercased emails.
    pub emails: BTreeSet<String>,
    /// Display names, matched case-insensitively.
    pub names: BTreeSet<String>,
}

/// Manually curated identity groups, the escape hatch for cases the
/// automatic rules cannot see (e.g. a Jira account and a GitHub account
/// with unrelated emails and names).
///
/// Line format, one group per line:
///
/// ```text
/// # comment
/// some-label: jd@example.com, john@corp.example, name:"John Doe"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasFile {
    pub groups: Vec<AliasGroup>,
}

impl AliasFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut groups: Vec<AliasGroup> = Vec::new();
        let mut seen_emails: BTreeMap<String, String> = BTreeMap::new();
        let mut seen_names: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = lineno + 1;
            let (label, rest) = line.split_once(':').ok_or_else(|| {
                Error::Config(format!("alias file line {lineno}: missing 'label:' prefix"))
            })?;
            let label = label.trim();
            if label.is_empty() {
                return Err(Error::Config(format!(
                    "alias file line {lineno}: empty group label"
                )));
            }
            let mut group = AliasGroup {
                label: label.to_string(),
                emails: BTreeSet::new(),
                names: BTreeSet::new(),
            };
            for entry in split_respecting_quotes(rest) {
                let entry = entry.trim();
                if entry.is_empty() {
                    continue;
                }
                if let Some(quoted) = entry.strip_prefix("name:") {
                    let quoted = quoted.trim();
                    let name = quoted
                        .strip_prefix('"')
                        .and_then(|s| s.strip_suffix('"'))
                        .ok_or_else(|| {
                            Error::Config(format!(
                                "alias file line {lineno}: name entry must be quoted: {entry}"
                            ))
                        })?;
                    let key = name.to_lowercase();
                    if let Some(other) = seen_names.insert(key, label.to_string()) {
                        return Err(Error::Config(format!(
                            "alias file line {lineno}: name \"{name}\" already used by group '{other}'"
                        )));
                    }
                    group.names.insert(name.to_string());
                } else if entry.contains('@') {
                    let email = entry.to_lowercase();
                    if let Some(other) = seen_emails.insert(email.clone(), label.to_string()) {
                        return Err(Error::Config(format!(
                            "alias file line {lineno}: email {email} already used by group '{other}'"
                        )));
                    }
                    group.emails.insert(email);
                } else {
                    return Err(Error::Config(format!(
                        "alias file line {lineno}: entry '{entry}' is neither an email nor name:\"...\""
                    )));
                }
            }
            if group.emails.is_empty() && group.names.is_empty() {
                return Err(Error::Config(format!(
                    "alias file line {lineno}: group '{label}' has no entries"
                )));
            }
            groups.push(group);
        }
        Ok(AliasFile { groups })
    }

    /// Index of the group the actor belongs to, if any. Errors when the
    /// actor matches more than one group.
    fn group_of(&self, actor: &RawActor) -> Result<Option<usize>> {
        let email = actor.email.as_deref().map(str::to_lowercase);
        let name = actor.display_name.to_lowercase();
        let mut found: Option<usize> = None;
        for (i, group) in self.groups.iter().enumerate() {
            let hit = email
                .as_deref()
                .is_some_and(|e| group.emails.contains(e))
                || group.names.iter().any(|n| n.to_lowercase() == name);
            if hit {
                if let Some(first) = found {
                    return Err(Error::AliasConflict {
                        actor: actor.describe(),
                        first: self.groups[first].label.clone(),
                        second: group.label.clone(),
                    });
                }
                found = Some(i);
            }
        }
        Ok(found)
    }
}

/// Splits on commas, but not inside double quotes.
fn split_respecting_quotes(s: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut current = String::new();
    let mut in_quotes = false;
    for c in s.chars() {
        match c {
            '"' => {
                in_quotes = !in_quotes;
                current.push(c);
            }
            ',' if !in_quotes => {
                parts.push(std::mem::take(&mut current));
            }
            _ => current.push(c),
        }
    }
    parts.push(current);
    parts
}

/// Display-name normalization used by the name-equality rule: Unicode
/// decomposition with combining marks dropped, lowercased, punctuation and
/// whitespace removed.
pub fn normalized_name(name: &str) -> String {
    name.nfkd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .filter(|c| c.is_alphanumeric())
        .collect()
}

/// Normalized names shorter than this never merge identities: short names
/// ("kim", "alex") collide across distinct people far too often.
pub const MIN_NAME_MATCH_LEN: usize = 5;

fn email_local_part(email: &str) -> Option<String> {
    let lower = email.to_lowercase();
    let local = lower.split('@').next().unwrap_or("").trim().to_string();
    if local.is_empty() {
        None
    } else {
        Some(local)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // Lower index wins so that grouping is independent of union order.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

/// Collapses raw actor occurrences into developers.
///
/// Rules are applied in order; each may only merge groups, so the result is
/// independent of input order and idempotent:
///
/// 1. both actors belong to the same alias-file group,
/// 2. identical lowercased email,
/// 3. identical lowercased email local-part across different domains,
/// 4. identical normalized display name of length >= [`MIN_NAME_MATCH_LEN`].
///
/// The input may contain duplicates; multiplicity only influences which
/// display name becomes canonical (most frequent wins, ties go to the
/// lexicographically smallest).
pub fn resolve_identities(
    actors: &[RawActor],
    alias_file: Option<&AliasFile>,
) -> Result<IdentityMap> {
    // Dedup first; BTreeSet gives a deterministic, order-independent indexing.
    let distinct: Vec<&RawActor> = actors
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let idx_of: BTreeMap<&RawActor, usize> = distinct
        .iter()
        .enumerate()
        .map(|(i, a)| (*a, i))
        .collect();

    let mut uf = UnionFind::new(distinct.len());

    // Rule 1: alias file groups.
    if let Some(aliases) = alias_file {
        let mut first_of_group: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, actor) in distinct.iter().enumerate() {
            if let Some(g) = aliases.group_of(actor)? {
                match first_of_group.get(&g) {
                    Some(&j) => {
                        uf.union(i, j);
                    }
                    None => {
                        first_of_group.insert(g, i);
                    }
                }
            }
        }
    }

    // Rules 2-4 all have the shape "identical key merges"; rule 3 subsumes
    // rule 2 (equal emails have equal local parts) but both are applied for
    // clarity, the outcome is the same.
    let merge_by_key = |keys: Vec<Option<String>>, uf: &mut UnionFind| {
        let mut first_of_key: BTreeMap<String, usize> = BTreeMap::new();
        for (i, key) in keys.into_iter().enumerate() {
            if let Some(key) = key {
                match first_of_key.get(&key) {
                    Some(&j) => {
                        uf.union(i, j);
                    }
                    None => {
                        first_of_key.insert(key, i);
                    }
                }
            }
        }
    };

    merge_by_key(
        distinct
            .iter()
            .map(|a| a.email.as_deref().map(str::to_lowercase))
            .collect(),
        &mut uf,
    );
    merge_by_key(
        distinct
            .iter()
            .map(|a| a.email.as_deref().and_then(email_local_part))
            .collect(),
        &mut uf,
    );
    merge_by_key(
        distinct
            .iter()
            .map(|a| {
                let n = normalized_name(&a.display_name);
                (n.chars().count() >= MIN_NAME_MATCH_LEN).then_some(n)
            })
            .collect(),
        &mut uf,
    );

    // Group members, keyed by root; roots are the smallest member index, so
    // iterating the BTreeMap yields groups in a stable order.
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..distinct.len() {
        groups.entry(uf.find(i)).or_default().push(i);
    }

    // Display-name frequencies over all occurrences, not distinct actors.
    let mut name_counts: BTreeMap<usize, BTreeMap<&str, usize>> = BTreeMap::new();
    for actor in actors {
        let root = uf.find(idx_of[actor]);
        *name_counts
            .entry(root)
            .or_default()
            .entry(actor.display_name.as_str())
            .or_insert(0) += 1;
    }

    let mut developers = Vec::with_capacity(groups.len());
    let mut index = BTreeMap::new();
    for (dev_idx, (root, members)) in groups.into_iter().enumerate() {
        let id = DevId(dev_idx as u32);
        let canonical_name = name_counts[&root]
            .iter()
            .max_by(|(na, ca), (nb, cb)| ca.cmp(cb).then(nb.cmp(na)))
            .map(|(name, _)| name.to_string())
            .unwrap_or_default();
        let mut aliases = BTreeSet::new();
        for m in members {
            aliases.insert(distinct[m].clone());
            index.insert(distinct[m].clone(), id);
        }
        developers.push(Developer {
            id,
            canonical_name,
            aliases,
        });
    }

    Ok(IdentityMap { developers, index })
}

/// How a developer took part in an issue. Contributing outweighs
/// Informative; the numeric weights live in the project config.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum InvolvementKind {
    Contributing,
    Informative,
}

/// One timestamped involvement of an actor in an issue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Involvement {
    pub actor: RawActor,
    pub kind: InvolvementKind,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub sha: String,
    pub repo: String,
    pub author: RawActor,
    pub timestamp: DateTime<Utc>,
    pub message: String,
    pub files: Vec<String>,
}

/// Dense issue identifier within one dataset (assigned after merging).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct IssueId(pub u32);

impl fmt::Display for IssueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An issue after linking and merging: possibly the fusion of a pull
/// request, a platform issue and a tracker ticket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueRecord {
    pub id: IssueId,
    /// All keys the record is known under ("FLUME-3311", "kumuluz#115").
    pub origin_keys: BTreeSet<String>,
    pub repo: Option<String>,
    /// Names of the subsystems the issue belongs to; empty when no
    /// component could be mapped.
    pub components: BTreeSet<String>,
    pub involvements: Vec<Involvement>,
    /// Shas of commits linked to this issue via message references.
    pub linked_commits: BTreeSet<String>,
}

/// Mono-repo projects map paths by folder prefix; multi-repo projects map
/// whole repositories to subsystems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepoType {
    MonoRepo,
    MultiRepo,
}

/// One configured subsystem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsystem {
    pub name: String,
    /// Folder prefixes (mono-repo) or repository names (multi-repo). A
    /// multi-repo subsystem with no prefixes matches the repo equal to its
    /// name.
    #[serde(default)]
    pub folder_prefixes: Vec<String>,
    /// Catch-all for unmapped paths; mono-repo projects need exactly one.
    #[serde(default)]
    pub is_main: bool,
}

/// Index of a subsystem in the configured list.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SubsystemId(pub u16);

impl fmt::Display for SubsystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Validated artifact-to-subsystem mapping.
#[derive(Debug, Clone)]
pub struct SubsystemMap {
    repo_type: RepoType,
    subsystems: Vec<Subsystem>,
    main: Option<SubsystemId>,
    by_name: BTreeMap<String, SubsystemId>,
    by_repo: BTreeMap<String, SubsystemId>,
    /// (normalized prefix, owner), mono-repo only.
    prefixes: Vec<(String, SubsystemId)>,
}

/// True when `prefix` covers `path` on a path-component boundary, so the
/// prefix "flume-ng" does not capture "flume-ng-sinks/...".
fn is_path_prefix(prefix: &str, path: &str) -> bool {
    path == prefix
        || (path.len() > prefix.len()
            && path.starts_with(prefix)
            && path.as_bytes()[prefix.len()] == b'/')
}

impl SubsystemMap {
    pub fn new(repo_type: RepoType, subsystems: &[Subsystem]) -> Result<Self> {
        if subsystems.is_empty() {
            return Err(Error::Config("no subsystems configured".into()));
        }
        let mut by_name = BTreeMap::new();
        let mut main = None;
        for (i, sub) in subsystems.iter().enumerate() {
            let id = SubsystemId(i as u16);
            if sub.name.trim().is_empty() {
                return Err(Error::Config(format!("subsystem {i} has an empty name")));
            }
            if by_name.insert(sub.name.clone(), id).is_some() {
                return Err(Error::Config(format!(
                    "duplicate subsystem name '{}'",
                    sub.name
                )));
            }
            if sub.is_main {
                if main.is_some() {
                    return Err(Error::Config(
                        "more than one subsystem is marked is_main".into(),
                    ));
                }
                main = Some(id);
            }
        }

        let mut prefixes: Vec<(String, SubsystemId)> = Vec::new();
        let mut by_repo: BTreeMap<String, SubsystemId> = BTreeMap::new();
        match repo_type {
            RepoType::MonoRepo => {
                if main.is_none() {
                    return Err(Error::Config(
                        "mono-repo projects need exactly one subsystem with is_main = true".into(),
                    ));
                }
                for (i, sub) in subsystems.iter().enumerate() {
                    let id = SubsystemId(i as u16);
                    for p in &sub.folder_prefixes {
                        let norm = p.trim().trim_end_matches('/').to_string();
                        if norm.is_empty() {
                            return Err(Error::Config(format!(
                                "subsystem '{}' has an empty folder prefix",
                                sub.name
                            )));
                        }
                        prefixes.push((norm, id));
                    }
                }
                // Prefixes of distinct non-main subsystems must not nest:
                // otherwise the longest-prefix rule silently shadows one
                // subsystem with another.
                for (a, (pa, ia)) in prefixes.iter().enumerate() {
                    for (pb, ib) in prefixes.iter().skip(a + 1) {
                        if ia == ib || Some(*ia) == main || Some(*ib) == main {
                            continue;
                        }
                        if pa == pb || is_path_prefix(pa, pb) || is_path_prefix(pb, pa) {
                            return Err(Error::Config(format!(
                                "ambiguous folder prefixes: '{}' ({}) vs '{}' ({})",
                                pa,
                                subsystems[ia.0 as usize].name,
                                pb,
                                subsystems[ib.0 as usize].name
                            )));
                        }
                    }
                }
            }
            RepoType::MultiRepo => {
                for (i, sub) in subsystems.iter().enumerate() {
                    let id = SubsystemId(i as u16);
                    let keys: Vec<String> = if sub.folder_prefixes.is_empty() {
                        vec![sub.name.clone()]
                    } else {
                        sub.folder_prefixes.clone()
                    };
                    for key in keys {
                        if by_repo.insert(key.clone(), id).is_some() {
                            return Err(Error::Config(format!(
                                "repository '{key}' is claimed by two subsystems"
                            )));
                        }
                    }
                }
            }
        }

        Ok(SubsystemMap {
            repo_type,
            subsystems: subsystems.to_vec(),
            main,
            by_name,
            by_repo,
            prefixes,
        })
    }

    pub fn repo_type(&self) -> RepoType {
        self.repo_type
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn get(&self, id: SubsystemId) -> &Subsystem {
        &self.subsystems[id.0 as usize]
    }

    pub fn name(&self, id: SubsystemId) -> &str {
        &self.subsystems[id.0 as usize].name
    }

    pub fn ids(&self) -> impl Iterator<Item = SubsystemId> + '_ {
        (0..self.subsystems.len()).map(|i| SubsystemId(i as u16))
    }

    /// Subsystem with the given configured name.
    pub fn by_name(&self, name: &str) -> Option<SubsystemId> {
        self.by_name.get(name).copied()
    }

    /// Subsystem owning a repository (multi-repo mapping).
    pub fn by_repo(&self, repo: &str) -> Option<SubsystemId> {
        self.by_repo.get(repo).copied()
    }

    /// Maps one touched artifact to its subsystem.
    ///
    /// Mono-repo: the subsystem with the longest matching folder prefix,
    /// falling back to the main subsystem. Multi-repo: the subsystem owning
    /// `repo`; an unknown repo is an error because silently misattributed
    /// commits would poison every downstream metric.
    pub fn resolve_path(&self, path: &str, repo: &str) -> Result<SubsystemId> {
        match self.repo_type {
            RepoType::MultiRepo => self
                .by_repo(repo)
                .ok_or_else(|| Error::UnknownRepo { repo: repo.into() }),
            RepoType::MonoRepo => {
                let best = self
                    .prefixes
                    .iter()
                    .filter(|(p, _)| is_path_prefix(p, path))
                    .max_by_key(|(p, _)| p.len());
                Ok(match best {
                    Some((_, id)) => *id,
                    None => self.main.expect("mono-repo map always has a main subsystem"),
                })
            }
        }
    }
}
