//! Ingestion of the two LMS export tables.
//!
//! Parses the Learner Usage Report (LUR) and Grades Report (GR), joins them
//! on the anonymized `(student_id, section_id)` key, applies the course
//! filters, and generates seeded synthetic cohorts for testing.

mod parse;
mod record;
mod synthetic;

pub use parse::{parse_gr, parse_lur, write_gr, write_lur, GR_COLUMNS, LUR_COLUMNS};
pub use record::{
    GradeItem, GradeRecord, LearnerUsageRecord, Role, Term, NUMERIC_USAGE_FIELDS,
};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticTruth};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("required column {0} is missing from the header")]
    MissingColumn(String),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("row {row}: grade value {value} outside [0, 100]")]
    OutOfRangeGrade { row: usize, value: f64 },
    #[error("duplicate usage row for student {student_id} in section {section_id}")]
    DuplicateUsageRow {
        student_id: String,
        section_id: String,
    },
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Where a cohort came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    RealExport,
    Synthetic { seed: u64 },
}

/// Joined usage and grade rows for one cohort.
///
/// Invariant: `(student_id, section_id)` identifies at most one usage row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortTable {
    pub usage: Vec<LearnerUsageRecord>,
    pub grades: Vec<GradeRecord>,
    pub provenance: Provenance,
}

impl CohortTable {
    /// Grade rows grouped by `(student_id, section_id)`.
    pub fn grade_lookup(&self) -> BTreeMap<(&str, &str), Vec<&GradeRecord>> {
        let mut map: BTreeMap<(&str, &str), Vec<&GradeRecord>> = BTreeMap::new();
        for g in &self.grades {
            map.entry((g.student_id.as_str(), g.section_id.as_str()))
                .or_default()
                .push(g);
        }
        map
    }
}

/// Join diagnostics: orphan grade rows are expected (GR has far more rows
/// than LUR) and only counted.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct JoinStats {
    pub matched_grades: usize,
    pub orphan_grades: usize,
}

/// Attach grade rows to usage rows by `(student_id, section_id)`.
///
/// Usage rows without grades are retained; grade rows without a usage row
/// are dropped and counted as orphans.
pub fn join_reports(
    usage: Vec<LearnerUsageRecord>,
    grades: Vec<GradeRecord>,
    provenance: Provenance,
) -> Result<(CohortTable, JoinStats), IngestError> {
    let mut keys: BTreeMap<(&str, &str), ()> = BTreeMap::new();
    for u in &usage {
        if keys
            .insert((u.student_id.as_str(), u.section_id.as_str()), ())
            .is_some()
        {
            return Err(IngestError::DuplicateUsageRow {
                student_id: u.student_id.clone(),
                section_id: u.section_id.clone(),
            });
        }
    }
    let mut stats = JoinStats::default();
    let kept: Vec<GradeRecord> = grades
        .into_iter()
        .filter(|g| {
            let hit = keys.contains_key(&(g.student_id.as_str(), g.section_id.as_str()));
            if hit {
                stats.matched_grades += 1;
            } else {
                stats.orphan_grades += 1;
            }
            hit
        })
        .collect();
    Ok((
        CohortTable {
            usage,
            grades: kept,
            provenance,
        },
        stats,
    ))
}

/// Rows removed by [`filter_courses`], by reason.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct FilterStats {
    pub removed_school: usize,
    pub removed_summer: usize,
    pub removed_role: usize,
}

/// School labels whose sections are excluded: not full-semester academic
/// courses.
const EXCLUDED_SCHOOLS: [&str; 2] = ["career center", "center for teaching of excellence"];

fn school_excluded(school: &str) -> bool {
    let s = school.trim().to_lowercase();
    EXCLUDED_SCHOOLS.contains(&s.as_str())
}

/// Drop excluded-school sections, summer-term sections, and non-student rows.
/// Grade rows whose usage row was dropped go with it. Idempotent.
pub fn filter_courses(cohort: &CohortTable) -> (CohortTable, FilterStats) {
    let mut stats = FilterStats::default();
    let usage: Vec<LearnerUsageRecord> = cohort
        .usage
        .iter()
        .filter(|u| {
            if school_excluded(&u.school) {
                stats.removed_school += 1;
                false
            } else if u.term == Term::Summer {
                stats.removed_summer += 1;
                false
            } else if u.role != Role::Student {
                stats.removed_role += 1;
                false
            } else {
                true
            }
        })
        .cloned()
        .collect();
    let keys: BTreeMap<(&str, &str), ()> = usage
        .iter()
        .map(|u| ((u.student_id.as_str(), u.section_id.as_str()), ()))
        .collect();
    let grades: Vec<GradeRecord> = cohort
        .grades
        .iter()
        .filter(|g| keys.contains_key(&(g.student_id.as_str(), g.section_id.as_str())))
        .cloned()
        .collect();
    (
        CohortTable {
            usage,
            grades,
            provenance: cohort.provenance,
        },
        stats,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn usage_row(student: &str, section: &str) -> LearnerUsageRecord {
        LearnerUsageRecord {
            student_id: student.into(),
            section_id: section.into(),
            term: Term::Fall2019,
            school: "School of Business".into(),
            role: Role::Student,
            content_completed: Some(5),
            content_required: Some(10),
            checklist_completed: None,
            quiz_completed: None,
            total_quiz_attempts: None,
            discussion_post_created: None,
            discussion_post_replies: None,
            discussion_post_read: None,
            last_discussion_post_date: None,
            number_of_assignment_submissions: Some(3),
            last_assignment_submission_date: None,
            total_time_spent_in_content: Some(120.0),
            last_visited_date: None,
            last_system_login: None,
            number_of_logins_to_the_system: Some(42),
        }
    }

    fn grade_row(student: &str, section: &str, value: f64) -> GradeRecord {
        GradeRecord {
            student_id: student.into(),
            section_id: section.into(),
            grade_item_name: GradeItem::FinalCalculated,
            grade_value: Some(value),
        }
    }

    #[test]
    fn join_attaches_matching_grades() {
        let (cohort, stats) = join_reports(
            vec![usage_row("s1", "c1")],
            vec![grade_row("s1", "c1", 85.0)],
            Provenance::RealExport,
        )
        .unwrap();
        assert_eq!(cohort.grades.len(), 1);
        assert_eq!(stats.matched_grades, 1);
        assert_eq!(stats.orphan_grades, 0);
    }

    #[test]
    fn join_keeps_usage_without_grades() {
        let (cohort, _) =
            join_reports(vec![usage_row("s1", "c1")], vec![], Provenance::RealExport).unwrap();
        assert_eq!(cohort.usage.len(), 1);
        assert!(cohort.grades.is_empty());
    }

    #[test]
    fn join_counts_orphans() {
        let (_, stats) = join_reports(
            vec![usage_row("s1", "c1")],
            vec![grade_row("s2", "c9", 50.0)],
            Provenance::RealExport,
        )
        .unwrap();
        assert_eq!(stats.orphan_grades, 1);
    }

    #[test]
    fn join_rejects_duplicate_usage_keys() {
        let err = join_reports(
            vec![usage_row("s1", "c1"), usage_row("s1", "c1")],
            vec![],
            Provenance::RealExport,
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::DuplicateUsageRow { .. }));
    }

    #[test]
    fn filter_removes_excluded_schools_and_summer_and_staff() {
        let mut career = usage_row("s1", "c1");
        career.school = "Career Center".into();
        let mut summer = usage_row("s2", "c2");
        summer.term = Term::Summer;
        let mut ta = usage_row("s3", "c3");
        ta.role = Role::Ta;
        let keep = usage_row("s4", "c4");
        let cohort = CohortTable {
            usage: vec![career, summer, ta, keep],
            grades: vec![grade_row("s1", "c1", 80.0), grade_row("s4", "c4", 90.0)],
            provenance: Provenance::RealExport,
        };
        let (filtered, stats) = filter_courses(&cohort);
        assert_eq!(filtered.usage.len(), 1);
        assert_eq!(filtered.usage[0].student_id, "s4");
        assert_eq!(filtered.grades.len(), 1);
        assert_eq!(
            (stats.removed_school, stats.removed_summer, stats.removed_role),
            (1, 1, 1)
        );
    }

    #[test]
    fn filter_is_idempotent() {
        let mut career = usage_row("s1", "c1");
        career.school = " CAREER CENTER ".into();
        let cohort = CohortTable {
            usage: vec![career, usage_row("s2", "c2")],
            grades: vec![],
            provenance: Provenance::RealExport,
        };
        let (once, _) = filter_courses(&cohort);
        let (twice, stats) = filter_courses(&once);
        assert_eq!(once.usage, twice.usage);
        assert_eq!(stats.removed_school + stats.removed_summer + stats.removed_role, 0);
    }
}
