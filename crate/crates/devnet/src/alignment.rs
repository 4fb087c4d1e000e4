//! Alignment metrics: how well detected communities line up with the
//! configured subsystem structure.
//!
//! Per window this derives subsystem developer teams from activity
//! thresholds, a focus score per developer, and a membership heterogeneity
//! score per team. Heterogeneity near zero means a team draws from one
//! community, near one means it is spread evenly over all of them.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::communities::CommunityCover;
use crate::config::ActivityThresholds;
use crate::error::{Error, Result};
use crate::model::{DevId, SubsystemId, SubsystemMap};
use crate::network::{conductance_with, ConductanceMode, InteractionGraph};
use crate::windowing::InvolvementIndex;

/// Issue tallies behind a team membership decision. An issue counts at
/// most once per kind per developer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActivityCounts {
    pub contributing_issues: usize,
    pub informative_issues: usize,
}

/// The developers working on one subsystem during one window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemTeam {
    pub subsystem: SubsystemId,
    pub name: String,
    pub members: BTreeMap<DevId, ActivityCounts>,
}

impl SubsystemTeam {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn member_ids(&self) -> BTreeSet<DevId> {
        self.members.keys().copied().collect()
    }
}

/// Derives one team per configured subsystem. A developer joins a team
/// when they contributed to at least `min_contributing` of its issues or
/// participated informatively in at least `min_informative`.
pub fn extract_teams(
    index: &InvolvementIndex,
    submap: &SubsystemMap,
    thresholds: &ActivityThresholds,
) -> Vec<SubsystemTeam> {
    let mut counts: BTreeMap<SubsystemId, BTreeMap<DevId, ActivityCounts>> = BTreeMap::new();
    for (dev, subsystem, issues) in index.subsystem_entries() {
        let tally = counts.entry(subsystem).or_default().entry(dev).or_default();
        for flags in issues.values() {
            if flags.contributing {
                tally.contributing_issues += 1;
            }
            if flags.informative {
                tally.informative_issues += 1;
            }
        }
    }
    submap
        .ids()
        .map(|id| {
            let members = counts
                .remove(&id)
                .unwrap_or_default()
                .into_iter()
                .filter(|(_, c)| {
                    c.contributing_issues >= thresholds.min_contributing as usize
                        || c.informative_issues >= thresholds.min_informative as usize
                })
                .collect();
            SubsystemTeam {
                subsystem: id,
                name: submap.name(id).to_string(),
                members,
            }
        })
        .collect()
}

/// How a developer's activity mass distributes over subsystems, and the
/// focus score derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct FocusBreakdown {
    pub per_subsystem_mass: BTreeMap<SubsystemId, u64>,
    pub proportions: BTreeMap<SubsystemId, f64>,
    /// 1 for single-subsystem specialists, 0 for perfectly even spread
    /// over every configured subsystem.
    pub focus: f64,
}

/// Focus of one developer in one window. `total_subsystems` is the number
/// of configured subsystems, which fixes the entropy normalizer; a single
/// configured subsystem makes every active developer fully focused.
/// Returns None for developers with no attributed activity mass.
pub fn developer_focus(
    index: &InvolvementIndex,
    dev: DevId,
    total_subsystems: usize,
) -> Option<FocusBreakdown> {
    let per_subsystem_mass = index.per_subsystem_mass(dev);
    let total: u64 = per_subsystem_mass.values().sum();
    if total == 0 {
        return None;
    }
    let proportions: BTreeMap<SubsystemId, f64> = per_subsystem_mass
        .iter()
        .map(|(&s, &m)| (s, m as f64 / total as f64))
        .collect();
    let focus = if total_subsystems <= 1 {
        1.0
    } else {
        let entropy: f64 = proportions
            .values()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum();
        // Entropy can float a few ulps past ln(Y) at uniform proportions.
        (1.0 - entropy / (total_subsystems as f64).ln()).clamp(0.0, 1.0)
    };
    Some(FocusBreakdown {
        per_subsystem_mass,
        proportions,
        focus,
    })
}

/// How a team's focus-weighted mass distributes over the window's
/// communities.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneityBreakdown {
    /// Mass per community id; ids without any team mass hold 0.
    pub per_community_mass: BTreeMap<usize, f64>,
    pub proportions: BTreeMap<usize, f64>,
    /// Team members holding at least one community membership.
    pub counted_members: usize,
    pub mh: f64,
}

/// Membership heterogeneity of one team against one cover. Each counted
/// member contributes their focus, split evenly over the communities they
/// belong to. Degenerate situations (a single community in the window, at
/// most one counted member, or zero total mass) score 0: there is no
/// spread to measure.
pub fn membership_heterogeneity(
    team: &SubsystemTeam,
    cover: &CommunityCover,
    focuses: &BTreeMap<DevId, f64>,
) -> Result<HeterogeneityBreakdown> {
    if let Some(reason) = &cover.skipped {
        return Err(Error::Data(format!(
            "window {} has no cover ({reason})",
            cover.window_index
        )));
    }
    let k = cover.community_count();
    let mut per_community_mass: BTreeMap<usize, f64> =
        (0..k).map(|c| (c, 0.0)).collect();
    let mut counted_members = 0usize;
    for &dev in team.members.keys() {
        let Some(communities) = cover.communities_of(dev) else {
            continue;
        };
        counted_members += 1;
        let focus = *focuses.get(&dev).ok_or_else(|| {
            Error::Data(format!(
                "developer {dev} is a team member of {} but has no focus score",
                team.name
            ))
        })?;
        let share = focus / communities.len() as f64;
        for &c in communities {
            *per_community_mass.get_mut(&c).expect("cover community ids are dense") += share;
        }
    }
    let total: f64 = per_community_mass.values().sum();
    let proportions: BTreeMap<usize, f64> = if total > 0.0 {
        per_community_mass
            .iter()
            .map(|(&c, &m)| (c, m / total))
            .collect()
    } else {
        per_community_mass.keys().map(|&c| (c, 0.0)).collect()
    };
    let mh = if k <= 1 || counted_members <= 1 || total <= 0.0 {
        0.0
    } else {
        let entropy: f64 = proportions
            .values()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum();
        // A single nonzero proportion sums to IEEE -0.0 (which clamp keeps,
        // -0.0 < 0.0 is false), and uniform proportions can float a few
        // ulps past ln(k). Adding +0.0 normalizes the zero sign.
        (entropy / (k as f64).ln()).clamp(0.0, 1.0) + 0.0
    };
    Ok(HeterogeneityBreakdown {
        per_community_mass,
        proportions,
        counted_members,
        mh,
    })
}

/// Conductance of the team inside the window graph, over the members that
/// appear in the graph. None when no member does.
pub fn team_conductance(
    team: &SubsystemTeam,
    graph: &InteractionGraph,
    mode: ConductanceMode,
) -> Result<Option<f64>> {
    let present: BTreeSet<DevId> = team
        .members
        .keys()
        .copied()
        .filter(|&d| graph.contains(d))
        .collect();
    if present.is_empty() {
        return Ok(None);
    }
    conductance_with(graph, &present, mode).map(Some)
}

/// Pearson correlation over (x, y) pairs. None with fewer than three
/// pairs or when either coordinate has zero variance.
pub fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in pairs {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
