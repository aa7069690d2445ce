//! Reading and writing the delimiter-separated export files.
//!
//! Both files are UTF-8, comma-delimited, RFC-quoted, with a header row.
//! Column names follow the LMS export variable names; column order in the
//! input is free (columns are located by name).

use super::record::{GradeItem, GradeRecord, LearnerUsageRecord, Role, Term};
use super::IngestError;
use std::collections::HashMap;
use std::path::Path;

/// LUR columns in canonical write order.
pub const LUR_COLUMNS: [&str; 20] = [
    "Org_Defined_Id",
    "Section_Id",
    "Semester",
    "School_Name",
    "Role_Name",
    "Content_Completed",
    "Content_Required",
    "Checklist_Completed",
    "Quiz_Completed",
    "Total_Quiz_Attempts",
    "Discussion_Post_Created",
    "Discussion_Post_Replies",
    "Discussion_Post_Read",
    "Last_Discussion_Post_Date",
    "Number_Of_Assignment_Submissions",
    "Last_Assignment_Submission_Date",
    "Total_Time_Spent_In_Content",
    "Last_Visited_Date",
    "Last_System_Login",
    "Number_Of_Logins_To_The_System",
];

/// GR columns in canonical write order.
pub const GR_COLUMNS: [&str; 4] = [
    "Org_Defined_Id",
    "Section_Id",
    "Grade_Item_Name",
    "Grade_Value",
];

struct Header {
    index: HashMap<String, usize>,
    len: usize,
}

impl Header {
    fn read(reader: &mut csv::Reader<std::fs::File>, required: &[&str]) -> Result<Header, IngestError> {
        let headers = reader.headers()?.clone();
        let index: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        for col in required {
            if !index.contains_key(*col) {
                return Err(IngestError::MissingColumn((*col).to_string()));
            }
        }
        Ok(Header {
            len: headers.len(),
            index,
        })
    }

    fn cell<'a>(&self, record: &'a csv::StringRecord, name: &str) -> &'a str {
        record.get(self.index[name]).unwrap_or("")
    }
}

fn required_cell(
    header: &Header,
    record: &csv::StringRecord,
    name: &str,
    row: usize,
) -> Result<String, IngestError> {
    let v = header.cell(record, name).trim();
    if v.is_empty() {
        return Err(IngestError::MalformedRow {
            row,
            reason: format!("empty {name} cell"),
        });
    }
    Ok(v.to_string())
}

fn check_len(record: &csv::StringRecord, header: &Header, row: usize) -> Result<(), IngestError> {
    if record.len() != header.len {
        return Err(IngestError::MalformedRow {
            row,
            reason: format!("expected {} fields, found {}", header.len, record.len()),
        });
    }
    Ok(())
}

/// Unparseable or negative optional counts become missing.
fn opt_count(s: &str) -> Option<u32> {
    s.trim().parse::<u32>().ok()
}

fn opt_minutes(s: &str) -> Option<f64> {
    let v = s.trim().parse::<f64>().ok()?;
    (v >= 0.0 && v.is_finite()).then_some(v)
}

fn opt_date(s: &str) -> Option<String> {
    let t = s.trim();
    (!t.is_empty()).then(|| t.to_string())
}

/// Parse a Learner Usage Report file. Row order is preserved; row numbers in
/// errors count the header as row 1.
pub fn parse_lur(path: &Path) -> Result<Vec<LearnerUsageRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header = Header::read(&mut reader, &LUR_COLUMNS)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record?;
        check_len(&record, &header, row)?;
        let role_raw = required_cell(&header, &record, "Role_Name", row)?;
        let role = Role::parse(&role_raw).ok_or_else(|| IngestError::MalformedRow {
            row,
            reason: format!("unknown role {role_raw:?}"),
        })?;
        out.push(LearnerUsageRecord {
            student_id: required_cell(&header, &record, "Org_Defined_Id", row)?,
            section_id: required_cell(&header, &record, "Section_Id", row)?,
            term: Term::parse(header.cell(&record, "Semester")),
            school: header.cell(&record, "School_Name").trim().to_string(),
            role,
            content_completed: opt_count(header.cell(&record, "Content_Completed")),
            content_required: opt_count(header.cell(&record, "Content_Required")),
            checklist_completed: opt_count(header.cell(&record, "Checklist_Completed")),
            quiz_completed: opt_count(header.cell(&record, "Quiz_Completed")),
            total_quiz_attempts: opt_count(header.cell(&record, "Total_Quiz_Attempts")),
            discussion_post_created: opt_count(header.cell(&record, "Discussion_Post_Created")),
            discussion_post_replies: opt_count(header.cell(&record, "Discussion_Post_Replies")),
            discussion_post_read: opt_count(header.cell(&record, "Discussion_Post_Read")),
            last_discussion_post_date: opt_date(header.cell(&record, "Last_Discussion_Post_Date")),
            number_of_assignment_submissions: opt_count(
                header.cell(&record, "Number_Of_Assignment_Submissions"),
            ),
            last_assignment_submission_date: opt_date(
                header.cell(&record, "Last_Assignment_Submission_Date"),
            ),
            total_time_spent_in_content: opt_minutes(
                header.cell(&record, "Total_Time_Spent_In_Content"),
            ),
            last_visited_date: opt_date(header.cell(&record, "Last_Visited_Date")),
            last_system_login: opt_date(header.cell(&record, "Last_System_Login")),
            number_of_logins_to_the_system: opt_count(
                header.cell(&record, "Number_Of_Logins_To_The_System"),
            ),
        });
    }
    Ok(out)
}

/// Parse a Grades Report file.
pub fn parse_gr(path: &Path) -> Result<Vec<GradeRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header = Header::read(&mut reader, &GR_COLUMNS)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record?;
        check_len(&record, &header, row)?;
        let raw_value = header.cell(&record, "Grade_Value").trim();
        let grade_value = match raw_value.parse::<f64>() {
            Ok(v) => {
                if !(0.0..=100.0).contains(&v) {
                    return Err(IngestError::OutOfRangeGrade { row, value: v });
                }
                Some(v)
            }
            Err(_) => None,
        };
        out.push(GradeRecord {
            student_id: required_cell(&header, &record, "Org_Defined_Id", row)?,
            section_id: required_cell(&header, &record, "Section_Id", row)?,
            grade_item_name: GradeItem::parse(header.cell(&record, "Grade_Item_Name")),
            grade_value,
        });
    }
    Ok(out)
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Write usage rows in the canonical column order.
pub fn write_lur(path: &Path, rows: &[LearnerUsageRecord]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(LUR_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.student_id.clone(),
            r.section_id.clone(),
            r.term.to_string(),
            r.school.clone(),
            r.role.to_string(),
            fmt_opt(&r.content_completed),
            fmt_opt(&r.content_required),
            fmt_opt(&r.checklist_completed),
            fmt_opt(&r.quiz_completed),
            fmt_opt(&r.total_quiz_attempts),
            fmt_opt(&r.discussion_post_created),
            fmt_opt(&r.discussion_post_replies),
            fmt_opt(&r.discussion_post_read),
            fmt_opt(&r.last_discussion_post_date),
            fmt_opt(&r.number_of_assignment_submissions),
            fmt_opt(&r.last_assignment_submission_date),
            fmt_opt(&r.total_time_spent_in_content),
            fmt_opt(&r.last_visited_date),
            fmt_opt(&r.last_system_login),
            fmt_opt(&r.number_of_logins_to_the_system),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write grade rows in the canonical column order.
pub fn write_gr(path: &Path, rows: &[GradeRecord]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(GR_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.student_id.clone(),
            r.section_id.clone(),
            r.grade_item_name.to_string(),
            fmt_opt(&r.grade_value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn lur_line(fields: &[&str]) -> String {
        fields.join(",")
    }

    #[test]
    fn parses_single_row() {
        let header = lur_line(&LUR_COLUMNS);
        let row = "s1,c1,Fall 2019,School of Business,Student,5,10,,,,,,,,3,,120.5,,,42";
        let f = write_temp(&format!("{header}\n{row}\n"));
        let rows = parse_lur(f.path()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].number_of_logins_to_the_system, Some(42));
        assert_eq!(rows[0].total_time_spent_in_content, Some(120.5));
        assert_eq!(rows[0].quiz_completed, None);
    }

    #[test]
    fn header_only_gives_empty_list() {
        let f = write_temp(&format!("{}\n", lur_line(&LUR_COLUMNS)));
        assert!(parse_lur(f.path()).unwrap().is_empty());
    }

    #[test]
    fn short_row_is_malformed_with_row_number() {
        let f = write_temp(&format!(
            "{}\nc1,Fall 2019,School of Business,Student\n",
            lur_line(&LUR_COLUMNS)
        ));
        match parse_lur(f.path()).unwrap_err() {
            IngestError::MalformedRow { row, .. } => assert_eq!(row, 2),
            e => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn missing_identifier_column_is_reported() {
        let cols: Vec<&str> = LUR_COLUMNS[1..].to_vec();
        let f = write_temp(&format!("{}\n", lur_line(&cols)));
        match parse_lur(f.path()).unwrap_err() {
            IngestError::MissingColumn(c) => assert_eq!(c, "Org_Defined_Id"),
            e => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn unparseable_optional_field_becomes_missing() {
        let header = lur_line(&LUR_COLUMNS);
        let row = "s1,c1,Fall 2019,School of Business,Student,n/a,10,,,,,,,,-3,,oops,,,42";
        let f = write_temp(&format!("{header}\n{row}\n"));
        let rows = parse_lur(f.path()).unwrap();
        assert_eq!(rows[0].content_completed, None);
        assert_eq!(rows[0].number_of_assignment_submissions, None);
        assert_eq!(rows[0].total_time_spent_in_content, None);
    }

    #[test]
    fn gr_maps_item_names_and_checks_range() {
        let f = write_temp(
            "Org_Defined_Id,Section_Id,Grade_Item_Name,Grade_Value\n\
             s1,c1,Final Calculated Grade,85\n\
             s1,c1,Quiz 3,55.5\n",
        );
        let rows = parse_gr(f.path()).unwrap();
        assert_eq!(rows[0].grade_item_name, GradeItem::FinalCalculated);
        assert_eq!(rows[0].grade_value, Some(85.0));
        assert_eq!(rows[1].grade_item_name, GradeItem::Other("Quiz 3".into()));

        let bad = write_temp(
            "Org_Defined_Id,Section_Id,Grade_Item_Name,Grade_Value\n\
             s1,c1,Final Calculated Grade,120\n",
        );
        match parse_gr(bad.path()).unwrap_err() {
            IngestError::OutOfRangeGrade { row, value } => {
                assert_eq!(row, 2);
                assert_eq!(value, 120.0);
            }
            e => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn lur_round_trip() {
        let header = lur_line(&LUR_COLUMNS);
        let row = "s1,c1,Fall 2019,School of Business,Student,5,10,1,2,3,4,5,6,2020-01-01,3,2020-02-02,120.5,2020-03-03,2020-04-04,42";
        let f = write_temp(&format!("{header}\n{row}\n"));
        let rows = parse_lur(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_lur(out.path(), &rows).unwrap();
        let rows2 = parse_lur(out.path()).unwrap();
        assert_eq!(rows, rows2);
    }
}
