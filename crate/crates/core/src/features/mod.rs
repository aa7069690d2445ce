//! From filtered cohort to modeling dataset.
//!
//! Selects features by missingness, min-max normalizes per section, screens
//! multicollinearity with VIF, derives the binary at-risk label, oversamples
//! the minority class, and splits train/test.

mod dataset;
mod vif;

pub use dataset::{read_dataset, write_dataset};
pub use vif::{compute_vif, VifEntry, VifReport, VifValue};

use crate::ingest::{CohortTable, GradeItem, NUMERIC_USAGE_FIELDS};
use crate::seed;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no feature has missing fraction below the threshold")]
    NoFeaturesSelected,
    #[error("section {0} has zero retained rows")]
    EmptySection(String),
    #[error("degenerate design: feature {0} is constant")]
    DegenerateDesign(String),
    #[error("VIF requires at least 2 features and more rows than features")]
    TooFewRowsForVif,
    #[error("only one class present")]
    SingleClass,
    #[error("need at least 2 instances to split")]
    TooFewInstances,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Missingness screen over every numeric usage field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionReport {
    /// Features below the missingness threshold, in canonical export order.
    pub selected: Vec<String>,
    /// `(field, missing fraction)` for all numeric usage fields.
    pub missingness: Vec<(String, f64)>,
    /// Rows missing at least one selected feature; dropped downstream.
    pub dropped_rows: usize,
}

/// Keep features whose missing fraction is strictly below
/// `max_missing_fraction` (the published screen uses 0.20).
pub fn select_features(
    cohort: &CohortTable,
    max_missing_fraction: f64,
) -> Result<SelectionReport, FeatureError> {
    let n = cohort.usage.len();
    let missingness: Vec<(String, f64)> = NUMERIC_USAGE_FIELDS
        .iter()
        .map(|&field| {
            let missing = cohort
                .usage
                .iter()
                .filter(|u| u.numeric_field(field).is_none())
                .count();
            let fraction = if n == 0 { 1.0 } else { missing as f64 / n as f64 };
            (field.to_string(), fraction)
        })
        .collect();
    let selected: Vec<String> = missingness
        .iter()
        .filter(|(_, frac)| *frac < max_missing_fraction)
        .map(|(name, _)| name.clone())
        .collect();
    if selected.is_empty() {
        return Err(FeatureError::NoFeaturesSelected);
    }
    let dropped_rows = cohort
        .usage
        .iter()
        .filter(|u| selected.iter().any(|f| u.numeric_field(f).is_none()))
        .count();
    Ok(SelectionReport {
        selected,
        missingness,
        dropped_rows,
    })
}

/// Per-(section, feature) min/max used for normalization, kept so unseen
/// rows can be mapped with the same witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationWitness {
    pub section_id: String,
    pub feature: String,
    pub min: f64,
    pub max: f64,
}

/// Normalized modeling matrix. Every stored value lies in `[0, 1]` and the
/// feature order is fixed for everything downstream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub rows: Vec<FeatureRow>,
    pub witnesses: Vec<NormalizationWitness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub student_id: String,
    pub section_id: String,
    pub values: Vec<f64>,
}

/// Min-max normalize each selected feature within each section:
/// `v = (x - x_min) / (x_max - x_min)`. A degenerate section range
/// (`x_max == x_min`) maps to 0. Rows missing any selected feature are
/// skipped; a section whose rows are all skipped is an error.
pub fn normalize_per_section(
    cohort: &CohortTable,
    selected: &[String],
) -> Result<FeatureMatrix, FeatureError> {
    // (section -> retained row indices), insertion-ordered by section id.
    let mut by_section: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut seen_sections: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, u) in cohort.usage.iter().enumerate() {
        *seen_sections.entry(u.section_id.as_str()).or_insert(0) += 1;
        if selected.iter().all(|f| u.numeric_field(f).is_some()) {
            by_section.entry(u.section_id.as_str()).or_default().push(i);
        }
    }
    for (&section, _) in &seen_sections {
        if !by_section.contains_key(section) {
            return Err(FeatureError::EmptySection(section.to_string()));
        }
    }

    let mut witnesses = Vec::new();
    let mut normalized: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (section, indices) in &by_section {
        for (j, feature) in selected.iter().enumerate() {
            let values: Vec<f64> = indices
                .iter()
                .map(|&i| cohort.usage[i].numeric_field(feature).unwrap())
                .collect();
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            witnesses.push(NormalizationWitness {
                section_id: section.to_string(),
                feature: feature.clone(),
                min,
                max,
            });
            for (&i, &x) in indices.iter().zip(&values) {
                let v = if max > min { (x - min) / (max - min) } else { 0.0 };
                normalized.entry(i).or_insert_with(|| vec![0.0; selected.len()])[j] = v;
            }
        }
    }

    // Preserve cohort row order.
    let rows: Vec<FeatureRow> = normalized
        .into_iter()
        .map(|(i, values)| FeatureRow {
            student_id: cohort.usage[i].student_id.clone(),
            section_id: cohort.usage[i].section_id.clone(),
            values,
        })
        .collect();

    Ok(FeatureMatrix {
        feature_names: selected.to_vec(),
        rows,
        witnesses,
    })
}

/// How final grades become the binary at-risk label.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelPolicy {
    /// At-risk iff grade percentage is strictly below this threshold.
    pub threshold: f64,
    /// Fall back to the adjusted final grade when the calculated one is
    /// missing.
    pub fallback: bool,
}

impl Default for LabelPolicy {
    fn default() -> Self {
        LabelPolicy {
            threshold: 70.0,
            fallback: true,
        }
    }
}

/// One modeling row: normalized features, binary label, and the final grade
/// (as a fraction) retained for cluster profiling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub student_id: String,
    pub section_id: String,
    pub features: Vec<f64>,
    pub at_risk: bool,
    pub final_grade: f64,
}

/// Attach labels to normalized rows. Grade source is the calculated final
/// grade, then the adjusted one under the fallback policy; rows with
/// neither are dropped and counted.
pub fn label(
    matrix: &FeatureMatrix,
    cohort: &CohortTable,
    policy: &LabelPolicy,
) -> (Vec<LabeledInstance>, usize) {
    let lookup = cohort.grade_lookup();
    let mut dropped = 0usize;
    let mut out = Vec::with_capacity(matrix.rows.len());
    for row in &matrix.rows {
        let grades = lookup.get(&(row.student_id.as_str(), row.section_id.as_str()));
        let pick = |item: GradeItem| {
            grades.and_then(|gs| {
                gs.iter()
                    .find(|g| g.grade_item_name == item && g.grade_value.is_some())
                    .and_then(|g| g.grade_value)
            })
        };
        let grade = pick(GradeItem::FinalCalculated)
            .or_else(|| policy.fallback.then(|| pick(GradeItem::FinalAdjusted)).flatten());
        match grade {
            Some(g) => out.push(LabeledInstance {
                student_id: row.student_id.clone(),
                section_id: row.section_id.clone(),
                features: row.values.clone(),
                at_risk: g < policy.threshold,
                final_grade: g / 100.0,
            }),
            None => dropped += 1,
        }
    }
    (out, dropped)
}

/// Duplicate minority rows uniformly at random with replacement until the
/// class counts are equal. Every added row is an exact copy.
pub fn oversample(
    instances: &[LabeledInstance],
    seed_value: u64,
) -> Result<Vec<LabeledInstance>, FeatureError> {
    let minority_class = {
        let positives = instances.iter().filter(|i| i.at_risk).count();
        let negatives = instances.len() - positives;
        if positives == 0 || negatives == 0 {
            return Err(FeatureError::SingleClass);
        }
        positives < negatives
    };
    let minority: Vec<&LabeledInstance> = instances
        .iter()
        .filter(|i| i.at_risk == minority_class)
        .collect();
    let deficit = instances.len() - 2 * minority.len();
    let mut rng = seed::rng(seed_value, "oversample", 0);
    let mut out = instances.to_vec();
    for _ in 0..deficit {
        out.push(minority[rng.gen_range(0..minority.len())].clone());
    }
    Ok(out)
}

/// Seeded train/test split.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Uniform random permutation by seed; train size is
/// `floor(train_fraction * n)`, the remainder is test.
pub fn split(
    instances: &[LabeledInstance],
    spec: &SplitSpec,
) -> Result<(Vec<LabeledInstance>, Vec<LabeledInstance>), FeatureError> {
    if instances.len() < 2 {
        return Err(FeatureError::TooFewInstances);
    }
    if !(0.0..1.0).contains(&spec.train_fraction) || spec.train_fraction == 0.0 {
        return Err(FeatureError::InvalidParameter(format!(
            "train_fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    let mut order: Vec<usize> = (0..instances.len()).collect();
    let mut rng = seed::rng(spec.seed, "split", 0);
    order.shuffle(&mut rng);
    let n_train = (spec.train_fraction * instances.len() as f64).floor() as usize;
    let train = order[..n_train]
        .iter()
        .map(|&i| instances[i].clone())
        .collect();
    let test = order[n_train..]
        .iter()
        .map(|&i| instances[i].clone())
        .collect();
    Ok((train, test))
}

#[cfg(test)]
mod tests;
