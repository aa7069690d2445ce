//! At-risk student analytics over LMS activity logs.
//!
//! The pipeline ingests two LMS export tables (a learner usage report and a
//! grades report), derives a four-feature modeling dataset with per-section
//! min-max normalization, trains seven classifier families with grid search,
//! explains them with exact Shapley values, profiles the cohort with k-means,
//! and compares clusters with one-way ANOVA and Tukey HSD.
//!
//! Everything stochastic is seeded; identical seeds give identical results.

pub mod cluster;
pub mod explain;
pub mod features;
pub mod ingest;
pub mod models;
pub mod seed;
pub mod stats;
pub mod svg;

/// Canonical feature order used by every stage downstream of feature selection.
pub const FEATURE_NAMES: [&str; 4] = [
    "Content_Completed",
    "Number_Of_Assignment_Submissions",
    "Total_Time_Spent_In_Content",
    "Number_Of_Logins_To_The_System",
];

/// Number of modeling features.
pub const N_FEATURES: usize = 4;
