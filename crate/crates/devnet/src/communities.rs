//! Overlapping community detection on the interaction graph.
//!
//! The reference engine runs three phases:
//!
//! 1. greedy weighted-modularity optimization with two-level aggregation,
//!    made fully deterministic: nodes are visited by descending weighted
//!    degree (ties by ascending id), and gain ties go to the lowest
//!    community id;
//! 2. an overlap pass: a developer is additionally assigned to every
//!    community that attracts at least `overlap_ratio` of the interaction
//!    intensity their home community does;
//! 3. communities of size one are dissolved and their members reported as
//!    unassigned.
//!
//! Windows whose graph has fewer than `min_window_devs` developers are
//! skipped: on such fragments detection returns noise, not structure.
//!
//! Any cover produced elsewhere can be swapped in via [`import_cover`], so
//! the rest of the pipeline is agnostic to the detection algorithm.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::config::ProjectConfig;
use crate::error::{Error, Result};
use crate::model::DevId;
use crate::network::{conductance_with, ConductanceMode, InteractionGraph};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Community {
    pub id: usize,
    pub members: BTreeSet<DevId>,
}

/// Possibly overlapping communities of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityCover {
    pub window_index: usize,
    /// Ordered by descending size; ids are the positions 0..k-1.
    pub communities: Vec<Community>,
    /// Community ids per developer; developers without membership are in
    /// `unassigned` instead.
    pub membership: BTreeMap<DevId, BTreeSet<usize>>,
    pub unassigned: BTreeSet<DevId>,
    /// Conductance per community, parallel to `communities`.
    pub quality: Vec<f64>,
    /// Reason the window was skipped; a skipped cover has no communities.
    pub skipped: Option<String>,
}

impl CommunityCover {
    pub fn is_skipped(&self) -> bool {
        self.skipped.is_some()
    }

    pub fn community_count(&self) -> usize {
        self.communities.len()
    }

    pub fn communities_of(&self, dev: DevId) -> Option<&BTreeSet<usize>> {
        self.membership.get(&dev)
    }

    /// Developers that share at least one community.
    pub fn share_community(&self, a: DevId, b: DevId) -> bool {
        match (self.membership.get(&a), self.membership.get(&b)) {
            (Some(ca), Some(cb)) => ca.intersection(cb).next().is_some(),
            _ => false,
        }
    }

    /// All developers the cover accounts for: assigned plus unassigned.
    pub fn node_ids(&self) -> BTreeSet<DevId> {
        self.membership
            .keys()
            .copied()
            .chain(self.unassigned.iter().copied())
            .collect()
    }

    fn skipped_for(window_index: usize, graph: &InteractionGraph, min_devs: usize) -> Self {
        CommunityCover {
            window_index,
            communities: Vec::new(),
            membership: BTreeMap::new(),
            unassigned: graph.nodes().clone(),
            quality: Vec::new(),
            skipped: Some(format!(
                "{} active developers, need at least {min_devs}",
                graph.node_count()
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionParams {
    pub min_window_devs: usize,
    /// A developer joins a non-home community when their intensity into it
    /// reaches this fraction of the intensity into their home community.
    pub overlap_ratio: f64,
    pub conductance_mode: ConductanceMode,
}

impl DetectionParams {
    pub fn from_config(config: &ProjectConfig) -> Self {
        DetectionParams {
            min_window_devs: config.min_window_devs,
            overlap_ratio: config.overlap_ratio,
            conductance_mode: ConductanceMode::Weighted,
        }
    }
}

/// A community detection algorithm. Implementations must be deterministic:
/// the same graph and params yield the identical cover.
pub trait CommunityEngine {
    fn name(&self) -> &'static str;
    fn detect(&self, graph: &InteractionGraph, params: &DetectionParams)
        -> Result<CommunityCover>;
}

/// The built-in three-phase engine described in the module docs.
#[derive(Debug, Clone, Copy, Default)]
pub struct ModularityEngine;

impl CommunityEngine for ModularityEngine {
    fn name(&self) -> &'static str {
        "modularity-overlap"
    }

    fn detect(
        &self,
        graph: &InteractionGraph,
        params: &DetectionParams,
    ) -> Result<CommunityCover> {
        if graph.node_count() < params.min_window_devs {
            return Ok(CommunityCover::skipped_for(
                graph.window_index,
                graph,
                params.min_window_devs,
            ));
        }
        let partition = louvain_partition(graph);

        // Phase 2: overlap. Strengths are measured against the phase-1
        // partition, so additions do not cascade.
        let mut home: BTreeMap<DevId, usize> = BTreeMap::new();
        for (c, members) in partition.iter().enumerate() {
            for &d in members {
                home.insert(d, c);
            }
        }
        let mut communities = partition.clone();
        for &dev in graph.nodes() {
            let home_c = home[&dev];
            let mut strengths: BTreeMap<usize, f64> = BTreeMap::new();
            for &(neighbor, w) in graph.neighbors(dev) {
                *strengths.entry(home[&neighbor]).or_insert(0.0) += w as f64;
            }
            let home_strength = strengths.get(&home_c).copied().unwrap_or(0.0);
            for (&c, &s) in &strengths {
                // A touchpoint of zero intensity is no membership signal,
                // whatever the ratio says about it.
                if c != home_c && s > 0.0 && s >= params.overlap_ratio * home_strength {
                    communities[c].insert(dev);
                }
            }
        }

        Ok(finalize_cover(graph, communities, params))
    }
}

/// Runs the built-in engine.
pub fn detect(graph: &InteractionGraph, params: &DetectionParams) -> Result<CommunityCover> {
    ModularityEngine.detect(graph, params)
}

/// Phase 3 plus bookkeeping, shared by detection and import: dissolves
/// size-1 communities, renumbers by descending size, derives membership,
/// unassigned and per-community conductance.
fn finalize_cover(
    graph: &InteractionGraph,
    communities: Vec<BTreeSet<DevId>>,
    params: &DetectionParams,
) -> CommunityCover {
    let mut kept: Vec<BTreeSet<DevId>> = communities
        .into_iter()
        .filter(|c| c.len() >= 2)
        .collect();
    kept.sort_by(|a, b| {
        b.len()
            .cmp(&a.len())
            .then_with(|| a.iter().collect::<Vec<_>>().cmp(&b.iter().collect::<Vec<_>>()))
    });
    kept.dedup();

    let mut membership: BTreeMap<DevId, BTreeSet<usize>> = BTreeMap::new();
    let mut quality = Vec::with_capacity(kept.len());
    let mut communities = Vec::with_capacity(kept.len());
    for (id, members) in kept.into_iter().enumerate() {
        for &d in &members {
            membership.entry(d).or_default().insert(id);
        }
        quality.push(
            conductance_with(graph, &members, params.conductance_mode)
                .expect("community members are graph nodes by construction"),
        );
        communities.push(Community { id, members });
    }
    let unassigned: BTreeSet<DevId> = graph
        .nodes()
        .iter()
        .copied()
        .filter(|d| !membership.contains_key(d))
        .collect();

    CommunityCover {
        window_index: graph.window_index,
        communities,
        membership,
        unassigned,
        quality,
        skipped: None,
    }
}

/// Imports a cover computed by an external tool (rows of community id and
/// developer id). The same invariants are enforced as for detected covers:
/// singletons dissolve, ids are renumbered by size, members must be graph
/// nodes.
pub fn import_cover(
    graph: &InteractionGraph,
    rows: &[(usize, DevId)],
    params: &DetectionParams,
) -> Result<CommunityCover> {
    if graph.node_count() < params.min_window_devs {
        return Ok(CommunityCover::skipped_for(
            graph.window_index,
            graph,
            params.min_window_devs,
        ));
    }
    let mut grouped: BTreeMap<usize, BTreeSet<DevId>> = BTreeMap::new();
    for &(community, dev) in rows {
        if !graph.contains(dev) {
            return Err(Error::MemberNotInGraph {
                dev: dev.0,
                window: graph.window_index,
            });
        }
        grouped.entry(community).or_default().insert(dev);
    }
    Ok(finalize_cover(
        graph,
        grouped.into_values().collect(),
        params,
    ))
}

/// (community id, conductance) rows plus their arithmetic mean, which is
/// None when the cover has no communities.
pub type CoverQuality = (Vec<(usize, f64)>, Option<f64>);

/// Scores every community of a cover. Errors on skipped covers.
pub fn cover_quality(
    cover: &CommunityCover,
    graph: &InteractionGraph,
    mode: ConductanceMode,
) -> Result<CoverQuality> {
    if let Some(reason) = &cover.skipped {
        return Err(Error::Data(format!(
            "cover of window {} was skipped ({reason})",
            cover.window_index
        )));
    }
    let mut per_community = Vec::with_capacity(cover.communities.len());
    for community in &cover.communities {
        per_community.push((
            community.id,
            conductance_with(graph, &community.members, mode)?,
        ));
    }
    let mean = if per_community.is_empty() {
        None
    } else {
        Some(per_community.iter().map(|(_, phi)| phi).sum::<f64>() / per_community.len() as f64)
    };
    Ok((per_community, mean))
}

/// Weighted modularity of a disjoint partition, computed from the plain
/// definition. Used by the optimizer's self-checks and by tests.
pub fn weighted_modularity(graph: &InteractionGraph, partition: &[BTreeSet<DevId>]) -> f64 {
    let m = graph.total_weight() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for community in partition {
        let mut internal = 0.0;
        for (a, b, w) in graph.edges() {
            if community.contains(&a) && community.contains(&b) {
                internal += w as f64;
            }
        }
        let degree_sum: f64 = community
            .iter()
            .map(|&d| graph.weighted_degree(d) as f64)
            .sum();
        q += internal / m - (degree_sum / (2.0 * m)).powi(2);
    }
    q
}

/// One level of the aggregation hierarchy. `adj[i]` includes a self entry
/// holding twice the internal weight of the supernode, so the degree sum
/// stays 2m across levels.
struct LevelGraph {
    adj: Vec<BTreeMap<usize, f64>>,
    degree: Vec<f64>,
    /// Smallest original node index inside each supernode; part of the
    /// deterministic visiting order.
    rep: Vec<usize>,
    m2: f64,
}

impl LevelGraph {
    fn node_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.adj.len()).collect();
        order.sort_by(|&a, &b| {
            self.degree[b]
                .partial_cmp(&self.degree[a])
                .expect("degrees are finite")
                .then(self.rep[a].cmp(&self.rep[b]))
        });
        order
    }

    /// Modularity of a labeling of this level's nodes; for the
    /// monotonicity self-check.
    fn modularity(&self, community: &[usize]) -> f64 {
        let mut intra2 = 0.0;
        for (i, neighbors) in self.adj.iter().enumerate() {
            for (&j, &w) in neighbors {
                if community[i] == community[j] {
                    intra2 += w;
                }
            }
        }
        let mut tot: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, &c) in community.iter().enumerate() {
            *tot.entry(c).or_insert(0.0) += self.degree[i];
        }
        intra2 / self.m2 - tot.values().map(|t| (t / self.m2).powi(2)).sum::<f64>()
    }
}

/// Greedy move phase on one level. Returns the community label per node
/// and whether anything moved.
fn local_optimize(level: &LevelGraph) -> (Vec<usize>, bool) {
    let n = level.adj.len();
    let mut community: Vec<usize> = (0..n).collect();
    let mut comm_tot: Vec<f64> = level.degree.clone();
    let order = level.node_order();
    let mut moved_any = false;
    loop {
        #[cfg(debug_assertions)]
        let q_before = level.modularity(&community);
        let mut moved_this_pass = false;
        for &i in &order {
            let current = community[i];
            let k_i = level.degree[i];
            let mut w_to: BTreeMap<usize, f64> = BTreeMap::new();
            for (&j, &w) in &level.adj[i] {
                if j != i {
                    *w_to.entry(community[j]).or_insert(0.0) += w;
                }
            }
            comm_tot[current] -= k_i;
            // score(c) differs from the true modularity gain by a positive
            // factor and a constant, which preserves the argmax and the
            // sign of improvements over staying.
            let score = |c: usize, w: f64| w - k_i * comm_tot[c] / level.m2;
            let stay_score = score(current, w_to.get(&current).copied().unwrap_or(0.0));
            let mut best = (stay_score, current);
            for (&c, &w) in &w_to {
                if c == current {
                    continue;
                }
                // Strict improvement required; ascending iteration makes
                // the lowest community id win ties.
                let s = score(c, w);
                if s > best.0 {
                    best = (s, c);
                }
            }
            comm_tot[best.1] += k_i;
            if best.1 != current {
                community[i] = best.1;
                moved_this_pass = true;
                moved_any = true;
            }
        }
        #[cfg(debug_assertions)]
        {
            let q_after = level.modularity(&community);
            debug_assert!(
                q_after >= q_before - 1e-9,
                "greedy pass must not decrease modularity: {q_before} -> {q_after}"
            );
        }
        if !moved_this_pass {
            break;
        }
    }
    (community, moved_any)
}

/// Aggregates a labeled level into its quotient graph. Labels are mapped
/// to dense indices in ascending label order.
fn aggregate(level: &LevelGraph, community: &[usize]) -> (LevelGraph, Vec<usize>) {
    let labels: BTreeSet<usize> = community.iter().copied().collect();
    let dense: BTreeMap<usize, usize> = labels.into_iter().zip(0..).collect();
    let k = dense.len();
    let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
    let mut rep: Vec<usize> = vec![usize::MAX; k];
    for (i, neighbors) in level.adj.iter().enumerate() {
        let ci = dense[&community[i]];
        rep[ci] = rep[ci].min(level.rep[i]);
        for (&j, &w) in neighbors {
            let cj = dense[&community[j]];
            *adj[ci].entry(cj).or_insert(0.0) += w;
        }
    }
    let degree: Vec<f64> = adj
        .iter()
        .map(|neighbors| neighbors.values().sum())
        .collect();
    let mapping: Vec<usize> = community.iter().map(|c| dense[c]).collect();
    (
        LevelGraph {
            adj,
            degree,
            rep,
            m2: level.m2,
        },
        mapping,
    )
}

/// Phase 1: the full aggregation hierarchy. Returns a disjoint partition
/// of the graph's nodes.
pub(crate) fn louvain_partition(graph: &InteractionGraph) -> Vec<BTreeSet<DevId>> {
    let nodes: Vec<DevId> = graph.nodes().iter().copied().collect();
    let n = nodes.len();
    if n == 0 {
        return Vec::new();
    }
    let index_of: BTreeMap<DevId, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, &d)| (d, i))
        .collect();
    let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for (a, b, w) in graph.edges() {
        let (i, j) = (index_of[&a], index_of[&b]);
        *adj[i].entry(j).or_insert(0.0) += w as f64;
        *adj[j].entry(i).or_insert(0.0) += w as f64;
    }
    let degree: Vec<f64> = adj.iter().map(|ns| ns.values().sum()).collect();
    let m2: f64 = degree.iter().sum();
    if m2 == 0.0 {
        // No edges: every node is its own (size-1) community.
        return nodes.iter().map(|&d| BTreeSet::from([d])).collect();
    }
    let mut level = LevelGraph {
        adj,
        degree,
        rep: (0..n).collect(),
        m2,
    };
    // assignment[v] = supernode of original node v at the current level.
    let mut assignment: Vec<usize> = (0..n).collect();
    loop {
        let (community, moved) = local_optimize(&level);
        if !moved {
            break;
        }
        let (next, mapping) = aggregate(&level, &community);
        for slot in assignment.iter_mut() {
            *slot = mapping[community[*slot]];
        }
        if next.adj.len() == level.adj.len() {
            level = next;
            break;
        }
        level = next;
    }
    let _ = &level;
    let mut grouped: BTreeMap<usize, BTreeSet<DevId>> = BTreeMap::new();
    for (v, &c) in assignment.iter().enumerate() {
        grouped.entry(c).or_default().insert(nodes[v]);
    }
    grouped.into_values().collect()
}
