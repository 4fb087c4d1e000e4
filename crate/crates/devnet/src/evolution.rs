//! Cross-window stability metrics.
//!
//! Three views on how the organization moves between adjacent windows:
//! who enters and leaves the network (external), whether developer pairs
//! keep their same/different-community status (internal), and whether
//! subsystem team pairs keep overlapping with the same community (team
//! stability). The pairwise formulations are invariant under renumbering
//! of community ids, so no matching of communities across windows is
//! needed.

use std::collections::BTreeMap;

use crate::alignment::SubsystemTeam;
use crate::communities::CommunityCover;
use crate::model::{DevId, SubsystemId};

/// Node turnover between two adjacent windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExternalStability {
    pub joined: usize,
    pub left: usize,
    pub remained: usize,
}

/// Developer turnover over the post-pruning node sets. None when either
/// window was skipped: a skipped window has no meaningful node set.
pub fn external_stability(
    prev: &CommunityCover,
    curr: &CommunityCover,
) -> Option<ExternalStability> {
    if prev.is_skipped() || curr.is_skipped() {
        return None;
    }
    let before = prev.node_ids();
    let after = curr.node_ids();
    Some(ExternalStability {
        joined: after.difference(&before).count(),
        left: before.difference(&after).count(),
        remained: before.intersection(&after).count(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InternalStability {
    /// Developers holding community membership in both windows.
    pub common_members: usize,
    /// Pairs sharing a community in both windows.
    pub same_both: usize,
    /// Pairs sharing a community in neither window.
    pub diff_both: usize,
    pub total_pairs: usize,
    /// (same_both + diff_both) / total_pairs.
    pub value: f64,
}

/// Pair-status stability over developers with membership in both covers.
/// A pair counts as stable when its shares-a-community status is the same
/// in both windows. None when either window is skipped or fewer than two
/// developers qualify.
pub fn internal_stability(
    prev: &CommunityCover,
    curr: &CommunityCover,
) -> Option<InternalStability> {
    if prev.is_skipped() || curr.is_skipped() {
        return None;
    }
    let common: Vec<DevId> = prev
        .membership
        .keys()
        .filter(|d| curr.membership.contains_key(d))
        .copied()
        .collect();
    if common.len() < 2 {
        return None;
    }
    let mut same_both = 0usize;
    let mut diff_both = 0usize;
    let mut total_pairs = 0usize;
    for (i, &a) in common.iter().enumerate() {
        for &b in &common[i + 1..] {
            total_pairs += 1;
            let before = prev.share_community(a, b);
            let after = curr.share_community(a, b);
            match (before, after) {
                (true, true) => same_both += 1,
                (false, false) => diff_both += 1,
                _ => {}
            }
        }
    }
    Some(InternalStability {
        common_members: common.len(),
        same_both,
        diff_both,
        total_pairs,
        value: (same_both + diff_both) as f64 / total_pairs as f64,
    })
}

/// The community attracting the team's maximum focus-weighted mass, under
/// the same mass rule as membership heterogeneity. Only communities that
/// hold at least one team member are candidates. Ties go to the larger
/// community, then the lower id. None when the cover is skipped or no
/// member holds a membership; a member without a focus score contributes
/// zero mass but still makes its communities candidates.
pub fn dominant_community(
    team: &SubsystemTeam,
    cover: &CommunityCover,
    focuses: &BTreeMap<DevId, f64>,
) -> Option<usize> {
    if cover.is_skipped() {
        return None;
    }
    let mut masses: BTreeMap<usize, f64> = BTreeMap::new();
    for &dev in team.members.keys() {
        let Some(communities) = cover.communities_of(dev) else {
            continue;
        };
        let share = focuses.get(&dev).copied().unwrap_or(0.0) / communities.len() as f64;
        for &c in communities {
            *masses.entry(c).or_insert(0.0) += share;
        }
    }
    let size_of = |c: usize| {
        cover
            .communities
            .iter()
            .find(|community| community.id == c)
            .map(|community| community.members.len())
            .unwrap_or(0)
    };
    masses
        .into_iter()
        .max_by(|(ca, ma), (cb, mb)| {
            ma.partial_cmp(mb)
                .expect("masses are finite")
                .then(size_of(*ca).cmp(&size_of(*cb)))
                .then(cb.cmp(ca))
        })
        .map(|(c, _)| c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeamStability {
    /// Subsystems with a dominant community in both windows, the pair
    /// universe of the metric.
    pub subsystems: Vec<SubsystemId>,
    pub stable_pairs: usize,
    pub total_pairs: usize,
    pub value: f64,
}

/// Pair-status stability of subsystem teams: a pair of subsystems is
/// stable when its dominant communities agree in both windows or disagree
/// in both. Only subsystems with a dominant community in both windows
/// participate; fewer than two of them leave the metric undefined.
pub fn team_stability(
    teams_prev: &[SubsystemTeam],
    teams_curr: &[SubsystemTeam],
    cover_prev: &CommunityCover,
    cover_curr: &CommunityCover,
    focuses_prev: &BTreeMap<DevId, f64>,
    focuses_curr: &BTreeMap<DevId, f64>,
) -> Option<TeamStability> {
    if cover_prev.is_skipped() || cover_curr.is_skipped() {
        return None;
    }
    let dominants = |teams: &[SubsystemTeam],
                     cover: &CommunityCover,
                     focuses: &BTreeMap<DevId, f64>|
     -> BTreeMap<SubsystemId, usize> {
        teams
            .iter()
            .filter_map(|team| {
                dominant_community(team, cover, focuses).map(|c| (team.subsystem, c))
            })
            .collect()
    };
    let before = dominants(teams_prev, cover_prev, focuses_prev);
    let after = dominants(teams_curr, cover_curr, focuses_curr);
    let subsystems: Vec<SubsystemId> = before
        .keys()
        .filter(|s| after.contains_key(s))
        .copied()
        .collect();
    if subsystems.len() < 2 {
        return None;
    }
    let mut stable_pairs = 0usize;
    let mut total_pairs = 0usize;
    for (i, &a) in subsystems.iter().enumerate() {
        for &b in &subsystems[i + 1..] {
            total_pairs += 1;
            let same_before = before[&a] == before[&b];
            let same_after = after[&a] == after[&b];
            if same_before == same_after {
                stable_pairs += 1;
            }
        }
    }
    Some(TeamStability {
        subsystems,
        stable_pairs,
        total_pairs,
        value: stable_pairs as f64 / total_pairs as f64,
    })
}

/// Everything the evolution report carries for one adjacent window pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTransition {
    pub from_window: usize,
    pub to_window: usize,
    pub external: Option<ExternalStability>,
    pub i_stab: Option<f64>,
    pub sdt_stab: Option<f64>,
}
