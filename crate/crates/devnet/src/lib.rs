//! Mining library for developer interaction networks.
//!
//! From raw commit and issue dumps, the crate builds time-windowed
//! weighted graphs of developer interaction, detects overlapping
//! communities in each window, extracts per-subsystem developer teams,
//! and measures how well the two structures align and how stable each
//! remains across windows.
//!
//! The stages compose in dependency order:
//!
//! 1. [`config`] and [`ingest`] parse a project description and its
//!    JSON-lines dumps, resolving author aliases to developers and
//!    linking commits to the issues their messages mention.
//! 2. [`windowing`] slices the event history into fixed-length windows
//!    and scores each developer's involvement per issue.
//! 3. [`network`] folds involvements into one interaction graph per
//!    window; [`communities`] finds overlapping developer communities
//!    on it and scores them by conductance.
//! 4. [`alignment`] extracts subsystem teams and measures their spread
//!    over communities; [`evolution`] tracks developer, community, and
//!    team stability across adjacent windows.
//! 5. [`pipeline`] orchestrates all of the above and [`report`] reads
//!    and writes every artifact; [`synth`] generates seeded synthetic
//!    projects with planted communities for end-to-end validation.
//!
//! All results are deterministic: reruns over the same inputs produce
//! byte-identical reports regardless of thread count.

pub mod alignment;
pub mod communities;
pub mod config;
pub mod error;
pub mod evolution;
pub mod ingest;
pub mod model;
pub mod network;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod windowing;

pub use error::{Error, Result};
