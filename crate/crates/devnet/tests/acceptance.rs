//! Release acceptance checks, one test per criterion. Every test prints
//! a single PASS line with the measured values once its checks hold, so
//! running with `--nocapture` yields a checklist.
//!
//! Tolerances are pinned as constants next to the suite rather than
//! derived at runtime.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use devnet::alignment::{
    developer_focus, extract_teams, membership_heterogeneity, pearson, ActivityCounts,
    SubsystemTeam,
};
use devnet::communities::{Community, CommunityCover};
use devnet::evolution::{dominant_community, internal_stability, team_stability};
use devnet::ingest::{ingest_files, ProjectDataset};
use devnet::model::{DevId, SubsystemId};
use devnet::network::{build_graph, conductance, InteractionGraph};
use devnet::pipeline::{analyze_windows, run_pipeline, PipelineOptions};
use devnet::synth::{self, SynthSpec};
use devnet::windowing::{build_windows, compute_involvements, InvolvementIndex};

const CONDUCTANCE_TOLERANCE: f64 = 1e-12;
const FOCUS_TOLERANCE: f64 = 1e-12;
const PEARSON_TOLERANCE: f64 = 1e-9;
const MIN_PLANTED_AGREEMENT: f64 = 0.8;
const PLANTED_TIME_LIMIT: Duration = Duration::from_secs(10);
const MAX_ALIGNED_MEAN_MH: f64 = 0.1;
const MIN_SHUFFLED_MEAN_MH: f64 = 0.5;
const END_TO_END_TIME_LIMIT: Duration = Duration::from_secs(30);

// ---- tiny ingestable projects ----------------------------------------

fn commit_line(sha_seed: u32, author: &str, ts: &str, message: &str, files: &[&str]) -> String {
    serde_json::json!({
        "sha": format!("{sha_seed:040x}"),
        "repo": "mini",
        "author": {"id": author, "name": author, "email": format!("{author}@mini.test")},
        "timestamp": ts,
        "message": message,
        "files": files,
    })
    .to_string()
}

fn issue_line(
    key: &str,
    created: &str,
    reporter: &str,
    components: &[&str],
    comments: &[(&str, &str)],
) -> String {
    let events: Vec<serde_json::Value> = comments
        .iter()
        .map(|(who, ts)| {
            serde_json::json!({
                "actor": {"id": who, "name": who, "email": format!("{who}@mini.test")},
                "action": "comment",
                "timestamp": ts,
            })
        })
        .collect();
    serde_json::json!({
        "key": key,
        "repo": "mini",
        "kind": "issue",
        "title": format!("{key} work"),
        "components": components,
        "created_at": created,
        "reporter": {"id": reporter, "name": reporter, "email": format!("{reporter}@mini.test")},
        "events": events,
    })
    .to_string()
}

struct MiniProject {
    dataset: ProjectDataset,
}

impl MiniProject {
    fn dev(&self, name: &str) -> DevId {
        self.dataset
            .developers
            .developers()
            .iter()
            .find(|d| d.canonical_name == name)
            .unwrap_or_else(|| panic!("no developer named {name}"))
            .id
    }

    /// The single window every mini project is designed to fit in.
    fn only_window_index(&self) -> InvolvementIndex {
        let windows = build_windows(&self.dataset);
        assert_eq!(windows.len(), 1, "mini projects span one window");
        compute_involvements(&self.dataset, &windows[0]).unwrap()
    }
}

fn ingest_mini(subsystems: &[&str], commits: &[String], issues: &[String]) -> MiniProject {
    let dir = tempfile::tempdir().unwrap();
    let mut config = String::from(
        "project_name = \"mini\"\nrepo_type = \"mono_repo\"\nissue_key_patterns = ['K-\\d+']\n",
    );
    for (i, name) in subsystems.iter().enumerate() {
        config.push_str(&format!(
            "\n[[subsystems]]\nname = \"{name}\"\nfolder_prefixes = [\"{name}\"]\n"
        ));
        if i == 0 {
            config.push_str("is_main = true\n");
        }
    }
    let config_path = dir.path().join("config.toml");
    let commits_path = dir.path().join("commits.jsonl");
    let issues_path = dir.path().join("issues.jsonl");
    fs::write(&config_path, config).unwrap();
    fs::write(&commits_path, commits.join("\n") + "\n").unwrap();
    fs::write(&issues_path, issues.join("\n") + "\n").unwrap();
    let config = devnet::config::ProjectConfig::load(&config_path).unwrap();
    let dataset = ingest_files(&commits_path, &issues_path, &config).unwrap();
    MiniProject { dataset }
}

// ---- hand-built covers and teams --------------------------------------

fn cover_from(window_index: usize, groups: &[&[u32]]) -> CommunityCover {
    let communities: Vec<Community> = groups
        .iter()
        .enumerate()
        .map(|(id, members)| Community {
            id,
            members: members.iter().map(|&d| DevId(d)).collect(),
        })
        .collect();
    let mut membership: BTreeMap<DevId, BTreeSet<usize>> = BTreeMap::new();
    for community in &communities {
        for &dev in &community.members {
            membership.entry(dev).or_default().insert(community.id);
        }
    }
    CommunityCover {
        window_index,
        quality: vec![0.0; communities.len()],
        communities,
        membership,
        unassigned: BTreeSet::new(),
        skipped: None,
    }
}

fn team_of(name: &str, subsystem: u16, members: &[u32]) -> SubsystemTeam {
    SubsystemTeam {
        subsystem: SubsystemId(subsystem),
        name: name.to_string(),
        members: members
            .iter()
            .map(|&d| {
                (
                    DevId(d),
                    ActivityCounts {
                        contributing_issues: 2,
                        informative_issues: 0,
                    },
                )
            })
            .collect(),
    }
}

fn uniform_focus(devs: impl IntoIterator<Item = u32>) -> BTreeMap<DevId, f64> {
    devs.into_iter().map(|d| (DevId(d), 1.0)).collect()
}

fn lcg(state: &mut u64) -> u64 {
    *state = state
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    *state
}

// ---- criteria ----------------------------------------------------------

/// A linked commit next to a comment scores the pair 2; two linked
/// commits score 3; both contributions on one pair add up.
#[test]
fn criterion_01_per_issue_pair_scores() {
    let t = |d: u32| format!("2024-01-{d:02}T10:00:00Z");
    let project = ingest_mini(
        &["core"],
        &[
            commit_line(1, "ann", &t(10), "K-1: patch", &["core/a.rs"]),
            commit_line(2, "cara", &t(11), "K-2: patch", &["core/b.rs"]),
            commit_line(3, "dan", &t(11), "K-2: more", &["core/b.rs"]),
            commit_line(4, "emma", &t(12), "K-3: patch", &["core/c.rs"]),
            commit_line(5, "emma", &t(13), "K-4: patch", &["core/d.rs"]),
            commit_line(6, "fred", &t(13), "K-4: more", &["core/d.rs"]),
        ],
        &[
            issue_line("K-1", &t(10), "ann", &["core"], &[("ben", &t(10))]),
            issue_line("K-2", &t(11), "cara", &["core"], &[]),
            issue_line("K-3", &t(12), "emma", &["core"], &[("fred", &t(12))]),
            issue_line("K-4", &t(13), "emma", &["core"], &[]),
        ],
    );
    let graph = build_graph(&project.only_window_index());
    let dev = |n: &str| project.dev(n);

    // Contributing (3) x Informative (2): min is exactly 2.
    assert_eq!(graph.intensity(dev("ann"), dev("ben")), Some(2));
    // Contributing x Contributing: exactly 3.
    assert_eq!(graph.intensity(dev("cara"), dev("dan")), Some(3));
    // One issue of each kind on the same pair: 2 + 3.
    assert_eq!(graph.intensity(dev("emma"), dev("fred")), Some(5));
    println!("PASS criterion 1: per-issue pair scores C*I = 2, C*C = 3, summed = 5");
}

/// A team inside one community scores 0; a two-member team split over
/// two communities scores 1. Both values are exact, not approximate.
#[test]
fn criterion_02_heterogeneity_of_the_motivating_example() {
    // carol(0), dave(1), alice(2) form one community; john(3), eve(4)
    // the other. Subsystem A's team sits inside the first community;
    // subsystem B's team is dave and john, one from each.
    let cover = cover_from(0, &[&[0, 1, 2], &[3, 4]]);
    let focuses = uniform_focus(0..5);

    let team_a = team_of("A", 0, &[0, 1, 2]);
    let mh_a = membership_heterogeneity(&team_a, &cover, &focuses).unwrap().mh;
    assert_eq!(mh_a, 0.0);

    let team_b = team_of("B", 1, &[1, 3]);
    let mh_b = membership_heterogeneity(&team_b, &cover, &focuses).unwrap().mh;
    assert_eq!(mh_b, 1.0);
    println!("PASS criterion 2: single-community team mh = 0, evenly split team mh = 1");
}

#[test]
fn criterion_03_conductance_extremes_and_mixed_fixture() {
    // Two disconnected pairs: each is fully isolated.
    let split = InteractionGraph::from_edges(0, vec![(DevId(0), DevId(1), 4), (DevId(2), DevId(3), 1)]);
    let isolated = conductance(&split, &[DevId(0), DevId(1)].into()).unwrap();
    assert_eq!(isolated, 0.0);

    // A member set without internal edges leaks everything.
    let edgeless = conductance(&split, &[DevId(0), DevId(2)].into()).unwrap();
    assert_eq!(edgeless, 1.0);

    // Path a-b(2), b-c(1), members {a,b}: 1 / (2*2 + 1).
    let path = InteractionGraph::from_edges(0, vec![(DevId(0), DevId(1), 2), (DevId(1), DevId(2), 1)]);
    let mixed = conductance(&path, &[DevId(0), DevId(1)].into()).unwrap();
    assert!((mixed - 0.2).abs() <= CONDUCTANCE_TOLERANCE, "{mixed}");
    println!("PASS criterion 3: conductance 0 isolated, 1 edgeless, 0.2 mixed (tol {CONDUCTANCE_TOLERANCE:e})");
}

#[test]
fn criterion_04_focus_extremes_and_half_split() {
    let t = |d: u32| format!("2024-02-{d:02}T09:00:00Z");
    // solo works in one subsystem, roam in all four, pair in two.
    let project = ingest_mini(
        &["core", "ui", "db", "docs"],
        &[
            commit_line(1, "solo", &t(1), "K-1: patch", &["core/a.rs"]),
            commit_line(2, "roam", &t(2), "K-2: patch", &["core/b.rs"]),
            commit_line(3, "roam", &t(3), "K-3: patch", &["ui/a.rs"]),
            commit_line(4, "roam", &t(4), "K-4: patch", &["db/a.rs"]),
            commit_line(5, "roam", &t(5), "K-5: patch", &["docs/a.md"]),
            commit_line(6, "pair", &t(6), "K-6: patch", &["core/c.rs"]),
            commit_line(7, "pair", &t(7), "K-7: patch", &["ui/b.rs"]),
        ],
        &[
            issue_line("K-1", &t(1), "bot", &[], &[]),
            issue_line("K-2", &t(2), "bot", &[], &[]),
            issue_line("K-3", &t(3), "bot", &[], &[]),
            issue_line("K-4", &t(4), "bot", &[], &[]),
            issue_line("K-5", &t(5), "bot", &[], &[]),
            issue_line("K-6", &t(6), "bot", &[], &[]),
            issue_line("K-7", &t(7), "bot", &[], &[]),
        ],
    );
    let index = project.only_window_index();
    let subsystems = project.dataset.config.subsystem_map().unwrap().len();
    assert_eq!(subsystems, 4);
    let focus = |name: &str| {
        developer_focus(&index, project.dev(name), subsystems)
            .expect("every developer here has attributed mass")
            .focus
    };

    let specialist = focus("solo");
    assert_eq!(specialist, 1.0);
    let generalist = focus("roam");
    assert!(generalist.abs() <= FOCUS_TOLERANCE, "{generalist}");
    let half = focus("pair");
    assert!((half - 0.5).abs() <= FOCUS_TOLERANCE, "{half}");
    println!("PASS criterion 4: focus 1 specialist, 0 uniform, 0.5 two-of-four (tol {FOCUS_TOLERANCE:e})");
}

/// Pairwise stability values equal a quadratic brute-force enumeration
/// on 50 randomized fixtures, exactly; plus the two boundary fixtures.
#[test]
fn criterion_05_stability_matches_brute_force() {
    fn istab_oracle(prev: &CommunityCover, curr: &CommunityCover) -> Option<f64> {
        let common: Vec<DevId> = prev
            .membership
            .keys()
            .filter(|d| curr.membership.contains_key(d))
            .copied()
            .collect();
        if common.len() < 2 {
            return None;
        }
        let same = |cover: &CommunityCover, a: DevId, b: DevId| {
            cover.membership[&a].intersection(&cover.membership[&b]).next().is_some()
        };
        let (mut preserved, mut total) = (0usize, 0usize);
        for i in 0..common.len() {
            for j in i + 1..common.len() {
                total += 1;
                if same(prev, common[i], common[j]) == same(curr, common[i], common[j]) {
                    preserved += 1;
                }
            }
        }
        Some(preserved as f64 / total as f64)
    }

    fn sdtstab_oracle(
        teams: &[(SubsystemTeam, SubsystemTeam)],
        prev: &CommunityCover,
        curr: &CommunityCover,
        focuses: &BTreeMap<DevId, f64>,
    ) -> Option<f64> {
        let dominants: Vec<(usize, usize)> = teams
            .iter()
            .filter_map(|(tp, tc)| {
                match (
                    dominant_community(tp, prev, focuses),
                    dominant_community(tc, curr, focuses),
                ) {
                    (Some(a), Some(b)) => Some((a, b)),
                    _ => None,
                }
            })
            .collect();
        if dominants.len() < 2 {
            return None;
        }
        let (mut preserved, mut total) = (0usize, 0usize);
        for i in 0..dominants.len() {
            for j in i + 1..dominants.len() {
                total += 1;
                let same_prev = dominants[i].0 == dominants[j].0;
                let same_curr = dominants[i].1 == dominants[j].1;
                if same_prev == same_curr {
                    preserved += 1;
                }
            }
        }
        Some(preserved as f64 / total as f64)
    }

    fn random_cover(state: &mut u64, devs: u32, window: usize) -> CommunityCover {
        let k = 1 + (lcg(state) % 4) as usize;
        let mut groups: Vec<Vec<u32>> = vec![Vec::new(); k];
        for dev in 0..devs {
            if lcg(state).is_multiple_of(10) {
                continue; // dev sits this window out
            }
            groups[(lcg(state) % k as u64) as usize].push(dev);
            if lcg(state).is_multiple_of(7) {
                let other = (lcg(state) % k as u64) as usize;
                if !groups[other].contains(&dev) {
                    groups[other].push(dev); // overlapping membership
                }
            }
        }
        let groups: Vec<&[u32]> = groups.iter().filter(|g| !g.is_empty()).map(|g| g.as_slice()).collect();
        cover_from(window, &groups)
    }

    fn random_teams(state: &mut u64, devs: u32) -> Vec<(SubsystemTeam, SubsystemTeam)> {
        let subsystems = 2 + (lcg(state) % 3) as u16;
        (0..subsystems)
            .map(|s| {
                let pick = |state: &mut u64| -> Vec<u32> {
                    (0..devs).filter(|_| lcg(state) % 5 < 2).collect()
                };
                let name = format!("sub{s}");
                (
                    team_of(&name, s, &pick(state)),
                    team_of(&name, s, &pick(state)),
                )
            })
            .collect()
    }

    let mut state = 0xacce97a0ce5eed;
    for fixture in 0..50 {
        let devs = 4 + (lcg(&mut state) % 7) as u32;
        let prev = random_cover(&mut state, devs, fixture);
        let curr = random_cover(&mut state, devs, fixture + 1);
        let focuses = uniform_focus(0..devs);

        let istab = internal_stability(&prev, &curr).map(|s| s.value);
        assert_eq!(istab, istab_oracle(&prev, &curr), "fixture {fixture}");

        let teams = random_teams(&mut state, devs);
        let prev_teams: Vec<SubsystemTeam> = teams.iter().map(|t| t.0.clone()).collect();
        let curr_teams: Vec<SubsystemTeam> = teams.iter().map(|t| t.1.clone()).collect();
        let sdtstab =
            team_stability(&prev_teams, &curr_teams, &prev, &curr, &focuses, &focuses)
                .map(|s| s.value);
        assert_eq!(
            sdtstab,
            sdtstab_oracle(&teams, &prev, &curr, &focuses),
            "fixture {fixture}"
        );
    }

    // Identical covers preserve every pair.
    let cover = cover_from(0, &[&[0, 1, 2], &[3, 4]]);
    let same = cover_from(1, &[&[0, 1, 2], &[3, 4]]);
    assert_eq!(internal_stability(&cover, &same).map(|s| s.value), Some(1.0));

    // Two developers together, then split: the only pair flips.
    let joined = cover_from(0, &[&[0, 1]]);
    let split = cover_from(1, &[&[0], &[1]]);
    assert_eq!(internal_stability(&joined, &split).map(|s| s.value), Some(0.0));
    println!("PASS criterion 5: stability equals brute force on 50 fixtures, 1 on identical covers, 0 on a split pair");
}

/// Two contributing involvements admit, four informative do not, one
/// contributing plus five informative admit.
#[test]
fn criterion_06_team_membership_thresholds() {
    let t = |d: u32| format!("2024-03-{d:02}T09:00:00Z");
    let mut issues = vec![
        issue_line("K-1", &t(1), "bot", &["core"], &[]),
        issue_line("K-2", &t(2), "bot", &["core"], &[]),
        issue_line("K-3", &t(3), "bot", &["core"], &[("fouri", &t(3))]),
        issue_line("K-4", &t(4), "bot", &["core"], &[("fouri", &t(4))]),
        issue_line("K-5", &t(5), "bot", &["core"], &[("fouri", &t(5))]),
        issue_line("K-6", &t(6), "bot", &["core"], &[("fouri", &t(6))]),
        issue_line("K-7", &t(7), "bot", &["core"], &[]),
    ];
    for d in 8..=12 {
        issues.push(issue_line(&format!("K-{d}"), &t(d), "bot", &["core"], &[("mixed", &t(d))]));
    }
    let project = ingest_mini(
        &["core"],
        &[
            commit_line(1, "twoc", &t(1), "K-1: patch", &["core/a.rs"]),
            commit_line(2, "twoc", &t(2), "K-2: patch", &["core/b.rs"]),
            commit_line(3, "mixed", &t(7), "K-7: patch", &["core/c.rs"]),
        ],
        &issues,
    );
    let index = project.only_window_index();
    let submap = project.dataset.config.subsystem_map().unwrap();
    let teams = extract_teams(&index, &submap, &project.dataset.config.activity_thresholds);
    assert_eq!(teams.len(), 1);
    let team = &teams[0];

    let counts = |name: &str| {
        let c = &team.members[&project.dev(name)];
        (c.contributing_issues, c.informative_issues)
    };
    // 2 contributing: in.
    assert_eq!(counts("twoc"), (2, 0));
    // 1 contributing + 5 informative: in through the informative gate.
    assert_eq!(counts("mixed"), (1, 5));
    // 4 informative: out.
    assert!(!team.members.contains_key(&project.dev("fouri")));
    // The reporter of all twelve issues clears the informative gate.
    assert_eq!(counts("bot"), (0, 12));
    assert_eq!(team.size(), 3);
    println!("PASS criterion 6: thresholds admit 2C and 1C+5I, reject 4I");
}

#[test]
fn criterion_07_nine_developer_window_is_skipped() {
    let t = "2024-04-02T09:00:00Z";
    let commits: Vec<String> = (0..9)
        .map(|d| commit_line(d, &format!("dev{d}"), t, "K-1: patch", &["core/a.rs"]))
        .collect();
    let project = ingest_mini(
        &["core"],
        &commits,
        &[issue_line("K-1", t, "dev0", &["core"], &[])],
    );
    let analyses = analyze_windows(&project.dataset, &PipelineOptions::default()).unwrap();
    assert_eq!(analyses.len(), 1);
    let cover = &analyses[0].cover;
    assert_eq!(analyses[0].graph.node_count(), 9);
    assert_eq!(cover.skipped.as_deref(), Some("9 active developers, need at least 10"));
    assert_eq!(cover.community_count(), 0);
    assert_eq!(cover.unassigned.len(), 9);
    println!("PASS criterion 7: 9 active developers yield a skipped cover");
}

/// Three planted groups of ten at p_in 0.5 / p_out 0.02 are recovered
/// with pairwise agreement at or above the pinned floor, quickly.
#[test]
fn criterion_08_planted_communities_recovered() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec::default(); // 3 groups x 10, p_in 0.5, p_out 0.02, seed 42
    assert_eq!(spec.planted_groups.len(), 3);
    assert!(spec.planted_groups.iter().all(|g| g.len() == 10));
    assert_eq!((spec.p_in, spec.p_out), (0.5, 0.02));

    let outputs = synth::generate(&spec, dir.path()).unwrap();
    let run = run_pipeline(
        &outputs.config_path,
        &outputs.commits_path,
        &outputs.issues_path,
        &dir.path().join("out"),
        &PipelineOptions::default(),
    )
    .unwrap();
    let dataset = ProjectDataset::load(&dir.path().join("out/dataset.json")).unwrap();
    let number_of: BTreeMap<DevId, u32> = dataset
        .developers
        .developers()
        .iter()
        .map(|d| (d.id, synth::dev_number(&d.canonical_name).expect("synthetic name")))
        .collect();

    let mut agreements = Vec::new();
    for (analysis, planted) in run.analyses.iter().zip(&outputs.planted) {
        let group_of: BTreeMap<u32, usize> = planted
            .iter()
            .enumerate()
            .flat_map(|(g, devs)| devs.iter().map(move |&d| (d, g)))
            .collect();
        let devs: Vec<(DevId, usize)> = analysis
            .cover
            .membership
            .keys()
            .filter_map(|&d| group_of.get(&number_of[&d]).map(|&g| (d, g)))
            .collect();
        let (mut matches, mut total) = (0usize, 0usize);
        for i in 0..devs.len() {
            for j in i + 1..devs.len() {
                total += 1;
                let planted_same = devs[i].1 == devs[j].1;
                let detected_same = analysis.cover.share_community(devs[i].0, devs[j].0);
                if planted_same == detected_same {
                    matches += 1;
                }
            }
        }
        assert!(total > 0, "window {} has no comparable pairs", analysis.window.index);
        let agreement = matches as f64 / total as f64;
        assert!(
            agreement >= MIN_PLANTED_AGREEMENT,
            "window {}: agreement {agreement:.3} below {MIN_PLANTED_AGREEMENT}",
            analysis.window.index
        );
        agreements.push(agreement);
    }
    let elapsed = started.elapsed();
    assert!(elapsed < PLANTED_TIME_LIMIT, "took {elapsed:?}");
    let shown: Vec<String> = agreements.iter().map(|a| format!("{a:.3}")).collect();
    println!(
        "PASS criterion 8: planted-group agreement per window [{}] >= {MIN_PLANTED_AGREEMENT} in {elapsed:?}",
        shown.join(", ")
    );
}

/// Subsystems tied to planted groups give near-zero heterogeneity;
/// subsystems assigned independently of groups give high heterogeneity.
#[test]
fn criterion_09_alignment_strength_drives_heterogeneity() {
    fn mean_mh(alignment: f64) -> (f64, Duration) {
        let started = Instant::now();
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            alignment,
            ..SynthSpec::default()
        };
        let outputs = synth::generate(&spec, dir.path()).unwrap();
        let run = run_pipeline(
            &outputs.config_path,
            &outputs.commits_path,
            &outputs.issues_path,
            &dir.path().join("out"),
            &PipelineOptions::default(),
        )
        .unwrap();
        let rows: Vec<f64> = run
            .analyses
            .iter()
            .flat_map(|a| &a.heterogeneity)
            .filter(|row| row.counted_members >= 2)
            .map(|row| row.mh)
            .collect();
        assert!(!rows.is_empty(), "no teams with two counted members");
        (rows.iter().sum::<f64>() / rows.len() as f64, started.elapsed())
    }

    let (aligned, aligned_time) = mean_mh(1.0);
    assert!(aligned_time < END_TO_END_TIME_LIMIT, "took {aligned_time:?}");
    assert!(
        aligned <= MAX_ALIGNED_MEAN_MH,
        "aligned project mean mh {aligned:.3} above {MAX_ALIGNED_MEAN_MH}"
    );

    let (shuffled, shuffled_time) = mean_mh(0.0);
    assert!(shuffled_time < END_TO_END_TIME_LIMIT, "took {shuffled_time:?}");
    assert!(
        shuffled >= MIN_SHUFFLED_MEAN_MH,
        "shuffled project mean mh {shuffled:.3} below {MIN_SHUFFLED_MEAN_MH}"
    );
    println!(
        "PASS criterion 9: mean mh {aligned:.3} <= {MAX_ALIGNED_MEAN_MH} aligned, {shuffled:.3} >= {MIN_SHUFFLED_MEAN_MH} shuffled ({aligned_time:?} / {shuffled_time:?})"
    );
}

#[test]
fn criterion_10_pipeline_runs_are_byte_identical() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/fix");
    let run = |out: &Path| {
        run_pipeline(
            &fixtures.join("config.toml"),
            &fixtures.join("commits.jsonl"),
            &fixtures.join("issues.jsonl"),
            out,
            &PipelineOptions::default(),
        )
        .unwrap();
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path());
    run(b.path());

    let listing = |dir: &Path| -> Vec<PathBuf> {
        let mut names: Vec<PathBuf> = fs::read_dir(dir)
            .unwrap()
            .map(|e| PathBuf::from(e.unwrap().file_name()))
            .collect();
        names.sort();
        names
    };
    let names = listing(a.path());
    assert_eq!(names, listing(b.path()), "output trees list different files");
    for name in &names {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{} differs between runs",
            name.display()
        );
    }
    println!("PASS criterion 10: two pipeline runs emit {} byte-identical files", names.len());
}

/// The correlation routine agrees with an independently coded
/// computational-formula evaluation on 20 random samples.
#[test]
fn criterion_11_pearson_matches_brute_force() {
    fn oracle(pairs: &[(f64, f64)]) -> Option<f64> {
        let n = pairs.len();
        if n < 3 {
            return None;
        }
        // Computational form: moments first, then the closed formula.
        let nf = n as f64;
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(x, y) in pairs {
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        let vx = sxx - sx * sx / nf;
        let vy = syy - sy * sy / nf;
        if vx <= 0.0 || vy <= 0.0 {
            return None;
        }
        Some((sxy - sx * sy / nf) / (vx * vy).sqrt())
    }

    // The worked reference sample.
    let reference = [(1.0, 0.1), (2.0, 0.4), (3.0, 0.2), (4.0, 0.5)];
    let expected = 0.5 / 0.5f64.sqrt();
    let r = pearson(&reference).unwrap();
    assert!((r - expected).abs() <= PEARSON_TOLERANCE, "{r}");
    assert!((r - oracle(&reference).unwrap()).abs() <= PEARSON_TOLERANCE);

    let mut state = 0xcafe_f00d_u64;
    let mut defined = 0;
    for sample in 0..20 {
        let n = 3 + (lcg(&mut state) % 10) as usize;
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                (
                    (lcg(&mut state) % 1000) as f64 / 100.0,
                    (lcg(&mut state) % 1000) as f64 / 100.0,
                )
            })
            .collect();
        match (pearson(&pairs), oracle(&pairs)) {
            (Some(ours), Some(theirs)) => {
                assert!(
                    (ours - theirs).abs() <= PEARSON_TOLERANCE,
                    "sample {sample}: {ours} vs {theirs}"
                );
                defined += 1;
            }
            (None, None) => {}
            (ours, theirs) => panic!("sample {sample}: {ours:?} vs {theirs:?}"),
        }
    }
    assert!(defined >= 15, "only {defined} samples had defined correlations");

    // Degenerate samples are undefined on both routes.
    let constant_x = [(2.0, 0.1), (2.0, 0.4), (2.0, 0.2)];
    assert_eq!(pearson(&constant_x), None);
    assert_eq!(oracle(&constant_x), None);
    assert_eq!(pearson(&reference[..2]), None);
    println!(
        "PASS criterion 11: pearson matches the moment-form oracle on {defined} random samples (tol {PEARSON_TOLERANCE:e})"
    );
}
