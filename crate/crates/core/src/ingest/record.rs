//! Raw rows of the two LMS export tables.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Academic term a section ran in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    Fall2019,
    Spring2020,
    Fall2020,
    Summer,
    Other(String),
}

impl Term {
    /// Case-insensitive, whitespace-trimmed parse. Any label containing
    /// "summer" maps to [`Term::Summer`].
    pub fn parse(s: &str) -> Term {
        let t = s.trim();
        let lower = t.to_lowercase();
        match lower.as_str() {
            "fall 2019" => Term::Fall2019,
            "spring 2020" => Term::Spring2020,
            "fall 2020" => Term::Fall2020,
            _ if lower.contains("summer") => Term::Summer,
            _ => Term::Other(t.to_string()),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Fall2019 => write!(f, "Fall 2019"),
            Term::Spring2020 => write!(f, "Spring 2020"),
            Term::Fall2020 => write!(f, "Fall 2020"),
            Term::Summer => write!(f, "Summer"),
            Term::Other(s) => write!(f, "{s}"),
        }
    }
}

/// Role of the user a usage row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Student,
    Ta,
    Instructor,
}

impl Role {
    pub fn parse(s: &str) -> Option<Role> {
        match s.trim().to_lowercase().as_str() {
            "student" => Some(Role::Student),
            "ta" => Some(Role::Ta),
            "instructor" => Some(Role::Instructor),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Student => write!(f, "Student"),
            Role::Ta => write!(f, "TA"),
            Role::Instructor => write!(f, "Instructor"),
        }
    }
}

/// One row of the Learner Usage Report: a student's activity in one section.
///
/// Counts and minutes are `None` when the export cell was empty or
/// unparseable; they are never imputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerUsageRecord {
    pub student_id: String,
    pub section_id: String,
    pub term: Term,
    pub school: String,
    pub role: Role,
    pub content_completed: Option<u32>,
    pub content_required: Option<u32>,
    pub checklist_completed: Option<u32>,
    pub quiz_completed: Option<u32>,
    pub total_quiz_attempts: Option<u32>,
    pub discussion_post_created: Option<u32>,
    pub discussion_post_replies: Option<u32>,
    pub discussion_post_read: Option<u32>,
    pub last_discussion_post_date: Option<String>,
    pub number_of_assignment_submissions: Option<u32>,
    pub last_assignment_submission_date: Option<String>,
    pub total_time_spent_in_content: Option<f64>,
    pub last_visited_date: Option<String>,
    pub last_system_login: Option<String>,
    pub number_of_logins_to_the_system: Option<u32>,
}

/// Numeric usage fields covered by the missingness screen, in export order.
pub const NUMERIC_USAGE_FIELDS: [&str; 11] = [
    "Content_Completed",
    "Content_Required",
    "Checklist_Completed",
    "Quiz_Completed",
    "Total_Quiz_Attempts",
    "Discussion_Post_Created",
    "Discussion_Post_Replies",
    "Discussion_Post_Read",
    "Number_Of_Assignment_Submissions",
    "Total_Time_Spent_In_Content",
    "Number_Of_Logins_To_The_System",
];

impl LearnerUsageRecord {
    /// Value of a numeric usage field by its export column name.
    pub fn numeric_field(&self, name: &str) -> Option<f64> {
        match name {
            "Content_Completed" => self.content_completed.map(f64::from),
            "Content_Required" => self.content_required.map(f64::from),
            "Checklist_Completed" => self.checklist_completed.map(f64::from),
            "Quiz_Completed" => self.quiz_completed.map(f64::from),
            "Total_Quiz_Attempts" => self.total_quiz_attempts.map(f64::from),
            "Discussion_Post_Created" => self.discussion_post_created.map(f64::from),
            "Discussion_Post_Replies" => self.discussion_post_replies.map(f64::from),
            "Discussion_Post_Read" => self.discussion_post_read.map(f64::from),
            "Number_Of_Assignment_Submissions" => {
                self.number_of_assignment_submissions.map(f64::from)
            }
            "Total_Time_Spent_In_Content" => self.total_time_spent_in_content,
            "Number_Of_Logins_To_The_System" => self.number_of_logins_to_the_system.map(f64::from),
            _ => None,
        }
    }
}

/// Which graded item a grade row refers to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradeItem {
    FinalCalculated,
    FinalAdjusted,
    Other(String),
}

impl GradeItem {
    pub fn parse(s: &str) -> GradeItem {
        let t = s.trim();
        match t.to_lowercase().as_str() {
            "final calculated grade" => GradeItem::FinalCalculated,
            "final adjusted grade" => GradeItem::FinalAdjusted,
            _ => GradeItem::Other(t.to_string()),
        }
    }
}

impl fmt::Display for GradeItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GradeItem::FinalCalculated => write!(f, "Final Calculated Grade"),
            GradeItem::FinalAdjusted => write!(f, "Final Adjusted Grade"),
            GradeItem::Other(s) => write!(f, "{s}"),
        }
    }
}

/// One row of the Grades Report. `grade_value` is a percentage in `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeRecord {
    pub student_id: String,
    pub section_id: String,
    pub grade_item_name: GradeItem,
    pub grade_value: Option<f64>,
}
