//! Delimiter-separated dataset file for labeled instances.

use super::LabeledInstance;
use crate::ingest::IngestError;
use std::path::Path;

/// Write the featurized dataset: id columns, normalized features in order,
/// final grade fraction, and the binary label.
pub fn write_dataset(
    path: &Path,
    feature_names: &[String],
    instances: &[LabeledInstance],
) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["student_id".to_string(), "section_id".to_string()];
    header.extend(feature_names.iter().cloned());
    header.push("final_grade".into());
    header.push("at_risk".into());
    w.write_record(&header)?;
    for inst in instances {
        let mut rec = vec![inst.student_id.clone(), inst.section_id.clone()];
        rec.extend(inst.features.iter().map(|v| v.to_string()));
        rec.push(inst.final_grade.to_string());
        rec.push(if inst.at_risk { "1" } else { "0" }.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a featurized dataset back; returns the feature names and rows.
pub fn read_dataset(path: &Path) -> Result<(Vec<String>, Vec<LabeledInstance>), IngestError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let cols: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    if cols.len() < 5 || cols[0] != "student_id" || cols[1] != "section_id" {
        return Err(IngestError::MissingColumn("student_id".into()));
    }
    let feature_names: Vec<String> = cols[2..cols.len() - 2].to_vec();
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record?;
        if record.len() != cols.len() {
            return Err(IngestError::MalformedRow {
                row,
                reason: format!("expected {} fields, found {}", cols.len(), record.len()),
            });
        }
        let parse_f64 = |idx: usize| -> Result<f64, IngestError> {
            record[idx].parse::<f64>().map_err(|_| IngestError::MalformedRow {
                row,
                reason: format!("unparseable number in column {}", cols[idx]),
            })
        };
        let features = (2..cols.len() - 2)
            .map(parse_f64)
            .collect::<Result<Vec<f64>, _>>()?;
        out.push(LabeledInstance {
            student_id: record[0].to_string(),
            section_id: record[1].to_string(),
            features,
            final_grade: parse_f64(cols.len() - 2)?,
            at_risk: &record[cols.len() - 1] == "1",
        });
    }
    Ok((feature_names, out))
}
