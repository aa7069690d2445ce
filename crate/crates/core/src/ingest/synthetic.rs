//! Seeded synthetic cohorts with planted structure.
//!
//! Students are drawn from a 4-component mixture in normalized feature space;
//! raw counts are scaled per section so per-section normalization is
//! exercised. Final grades are an affine function of the planted feature
//! weights plus noise, so the importance order and cluster structure are
//! known ground truth, emitted in a sidecar for tests.

use super::record::{GradeItem, GradeRecord, LearnerUsageRecord, Role, Term};
use super::{CohortTable, IngestError, Provenance};
use crate::{seed, FEATURE_NAMES, N_FEATURES};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Configuration for [`generate_synthetic`]. Defaults mirror the shapes of
/// the published four-cluster cohort profile and are tuned so the at-risk
/// prevalence lands near 18.5%.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_students: usize,
    pub n_sections: usize,
    /// Mixture proportions of the four planted clusters; must sum to 1.
    pub cluster_weights: [f64; 4],
    /// Cluster centers in normalized `[0,1]^4` feature space, canonical
    /// feature order.
    pub cluster_centroids: [[f64; 4]; 4],
    pub feature_noise_sd: f64,
    /// Fraction of grades flipped across the 70% boundary.
    pub label_noise_rate: f64,
    /// Planted per-feature grade weights, canonical feature order.
    pub grade_weights: [f64; 4],
    /// Grade model: `g = clip(offset + gain * (w . u) + eps, 0, 1)`.
    pub grade_offset: f64,
    pub grade_gain: f64,
    pub grade_noise_sd: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let counts = [13756.0, 24942.0, 22646.0, 22662.0];
        let total: f64 = counts.iter().sum();
        SyntheticConfig {
            seed: 0,
            n_students: 1000,
            n_sections: 20,
            cluster_weights: counts.map(|c| c / total),
            cluster_centroids: [
                [0.726, 0.627, 0.805, 0.414],
                [0.802, 0.647, 0.224, 0.446],
                [0.279, 0.150, 0.134, 0.233],
                [0.310, 0.716, 0.157, 0.304],
            ],
            feature_noise_sd: 0.08,
            label_noise_rate: 0.05,
            grade_weights: [0.35, 0.45, 0.10, 0.10],
            grade_offset: 0.62,
            grade_gain: 0.41,
            grade_noise_sd: 0.08,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        let sum: f64 = self.cluster_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.cluster_weights.iter().any(|&w| w < 0.0) {
            return Err(IngestError::InvalidConfig(format!(
                "cluster_weights must be non-negative and sum to 1, got sum {sum}"
            )));
        }
        if self
            .cluster_centroids
            .iter()
            .flatten()
            .any(|&c| !(0.0..=1.0).contains(&c))
        {
            return Err(IngestError::InvalidConfig(
                "cluster centroid coordinates must lie in [0,1]".into(),
            ));
        }
        if self.feature_noise_sd <= 0.0 {
            return Err(IngestError::InvalidConfig(
                "feature_noise_sd must be positive".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.label_noise_rate) {
            return Err(IngestError::InvalidConfig(
                "label_noise_rate must lie in [0, 0.5)".into(),
            ));
        }
        if self.grade_weights.iter().any(|&w| w < 0.0) {
            return Err(IngestError::InvalidConfig(
                "grade_weights must be non-negative".into(),
            ));
        }
        if self.n_students == 0 || self.n_sections == 0 {
            return Err(IngestError::InvalidConfig(
                "n_students and n_sections must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-student planted ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudentTruth {
    pub student_id: String,
    pub section_id: String,
    /// Index into the planted centroid list.
    pub cluster: usize,
}

/// Ground-truth sidecar emitted next to the synthetic export files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub seed: u64,
    pub grade_weights: [f64; 4],
    pub grade_offset: f64,
    pub grade_gain: f64,
    pub cluster_weights: [f64; 4],
    pub cluster_centroids: [[f64; 4]; 4],
    /// Feature names ordered by planted grade weight, heaviest first.
    pub planted_importance: Vec<String>,
    pub students: Vec<StudentTruth>,
}

const SCHOOLS: [&str; 5] = [
    "School of Business",
    "School of Education",
    "School of Health and Sciences",
    "School of Liberal Arts",
    "School of Science and Technology",
];

struct Section {
    id: String,
    school: String,
    term: Term,
    /// Raw-count scale per canonical feature.
    scales: [f64; 4],
}

fn clip01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Deterministically generate a synthetic cohort plus its truth sidecar.
pub fn generate_synthetic(
    config: &SyntheticConfig,
) -> Result<(CohortTable, SyntheticTruth), IngestError> {
    config.validate()?;
    let mut rng = seed::rng(config.seed, "synthetic", 0);

    let terms = [Term::Fall2019, Term::Spring2020, Term::Fall2020];
    let sections: Vec<Section> = (0..config.n_sections)
        .map(|s| Section {
            id: format!("SEC-{:04}", s + 1),
            school: SCHOOLS[s % SCHOOLS.len()].to_string(),
            term: terms[s % terms.len()].clone(),
            scales: [
                rng.gen_range(20.0..80.0_f64).round(),
                rng.gen_range(8.0..30.0_f64).round(),
                rng.gen_range(500.0..3000.0_f64).round(),
                rng.gen_range(40.0..200.0_f64).round(),
            ],
        })
        .collect();

    let cumulative: Vec<f64> = config
        .cluster_weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();

    let mut usage = Vec::with_capacity(config.n_students);
    let mut grades = Vec::new();
    let mut students = Vec::with_capacity(config.n_students);

    for i in 0..config.n_students {
        let student_id = format!("STU-{:06}", i + 1);
        let section = &sections[i % config.n_sections];

        let draw: f64 = rng.gen();
        let cluster = cumulative.iter().position(|&c| draw < c).unwrap_or(3);

        let mut u = [0.0_f64; N_FEATURES];
        for (j, slot) in u.iter_mut().enumerate() {
            let noise: f64 = StandardNormal.sample(&mut rng);
            *slot = clip01(config.cluster_centroids[cluster][j] + config.feature_noise_sd * noise);
        }

        // Selected features go missing rarely, the rest often, so the
        // missingness screen selects exactly the canonical four.
        let mut present = [true; N_FEATURES];
        for p in present.iter_mut() {
            if rng.gen_bool(0.03) {
                *p = false;
            }
        }
        let raw = |j: usize| (u[j] * section.scales[j]).round() as u32;

        // Section-constant, so it must miss the downstream screen: a
        // surviving constant column would make the design degenerate.
        let content_required = rng.gen_bool(0.70).then(|| section.scales[0] as u32);
        let checklist_completed = rng.gen_bool(0.40).then(|| (u[0] * 8.0).round() as u32);
        let quiz_completed = rng.gen_bool(0.65).then(|| (u[3] * 9.0).round() as u32);
        let total_quiz_attempts = quiz_completed
            .filter(|_| rng.gen_bool(0.95))
            .map(|q| q + rng.gen_range(0..3));
        let discussion_post_created = rng.gen_bool(0.50).then(|| (u[1] * 6.0).round() as u32);
        let discussion_post_replies = rng.gen_bool(0.45).then(|| (u[1] * 10.0).round() as u32);
        let discussion_post_read = rng.gen_bool(0.55).then(|| (u[3] * 30.0).round() as u32);

        usage.push(LearnerUsageRecord {
            student_id: student_id.clone(),
            section_id: section.id.clone(),
            term: section.term.clone(),
            school: section.school.clone(),
            role: Role::Student,
            content_completed: present[0].then(|| raw(0)),
            content_required,
            checklist_completed,
            quiz_completed,
            total_quiz_attempts,
            discussion_post_created,
            discussion_post_replies,
            discussion_post_read,
            last_discussion_post_date: None,
            number_of_assignment_submissions: present[1].then(|| raw(1)),
            last_assignment_submission_date: None,
            total_time_spent_in_content: present[2].then(|| (u[2] * section.scales[2]).round()),
            last_visited_date: None,
            last_system_login: None,
            number_of_logins_to_the_system: present[3].then(|| raw(3)),
        });

        let score: f64 = config
            .grade_weights
            .iter()
            .zip(&u)
            .map(|(w, x)| w * x)
            .sum();
        let eps: f64 = StandardNormal.sample(&mut rng);
        let mut g = clip01(config.grade_offset + config.grade_gain * score + config.grade_noise_sd * eps);
        if config.label_noise_rate > 0.0 && rng.gen_bool(config.label_noise_rate) {
            // Flip the label by moving the grade across the 70% boundary.
            g = if g < 0.70 {
                rng.gen_range(0.70..0.98)
            } else {
                rng.gen_range(0.40..0.699)
            };
        }

        // Most students carry a calculated final grade; a few only an
        // adjusted one, exercising the fallback. ~1% carry neither.
        let source: f64 = rng.gen();
        if source < 0.96 {
            grades.push(GradeRecord {
                student_id: student_id.clone(),
                section_id: section.id.clone(),
                grade_item_name: GradeItem::FinalCalculated,
                grade_value: Some(100.0 * g),
            });
        } else if source < 0.99 {
            grades.push(GradeRecord {
                student_id: student_id.clone(),
                section_id: section.id.clone(),
                grade_item_name: GradeItem::FinalAdjusted,
                grade_value: Some(100.0 * g),
            });
        }
        if rng.gen_bool(0.30) {
            grades.push(GradeRecord {
                student_id: student_id.clone(),
                section_id: section.id.clone(),
                grade_item_name: GradeItem::Other("Quiz 1".into()),
                grade_value: Some(rng.gen_range(0.0..100.0_f64).round()),
            });
        }

        students.push(StudentTruth {
            student_id,
            section_id: section.id.clone(),
            cluster,
        });
    }

    let mut order: Vec<usize> = (0..N_FEATURES).collect();
    order.sort_by(|&a, &b| {
        config.grade_weights[b]
            .partial_cmp(&config.grade_weights[a])
            .unwrap()
    });
    let truth = SyntheticTruth {
        seed: config.seed,
        grade_weights: config.grade_weights,
        grade_offset: config.grade_offset,
        grade_gain: config.grade_gain,
        cluster_weights: config.cluster_weights,
        cluster_centroids: config.cluster_centroids,
        planted_importance: order.iter().map(|&j| FEATURE_NAMES[j].to_string()).collect(),
        students,
    };

    Ok((
        CohortTable {
            usage,
            grades,
            provenance: Provenance::Synthetic { seed: config.seed },
        },
        truth,
    ))
}
