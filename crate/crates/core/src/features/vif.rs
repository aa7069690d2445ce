//! Variance inflation factors.
//!
//! `VIF_j = 1 / (1 - R2_j)` where `R2_j` comes from least-squares regression
//! of feature j on the remaining features plus an intercept. Exact
//! collinearity is reported as flagged-infinite rather than a huge float.

use super::{FeatureError, FeatureMatrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum VifValue {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifEntry {
    pub feature: String,
    pub vif: VifValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifReport {
    pub entries: Vec<VifEntry>,
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when the system is singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in (col + 1)..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

/// R-squared of regressing `y` on the columns of `z` plus an intercept,
/// via the normal equations.
fn r_squared(y: &[f64], z: &[Vec<f64>]) -> Option<f64> {
    let n = y.len();
    let p = z.len() + 1; // predictors + intercept
    let mut design = vec![vec![1.0; n]; 1];
    design.extend(z.iter().cloned());
    let mut gram = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for a in 0..p {
        for b in a..p {
            let dot: f64 = design[a].iter().zip(&design[b]).map(|(x, w)| x * w).sum();
            gram[a][b] = dot;
            gram[b][a] = dot;
        }
        rhs[a] = design[a].iter().zip(y).map(|(x, w)| x * w).sum();
    }
    let coef = solve(gram, rhs)?;
    let mean = y.iter().sum::<f64>() / n as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..n {
        let mut fit = coef[0];
        for (a, col) in z.iter().enumerate() {
            fit += coef[a + 1] * col[i];
        }
        ss_res += (y[i] - fit).powi(2);
        ss_tot += (y[i] - mean).powi(2);
    }
    if ss_tot == 0.0 {
        return None;
    }
    Some(1.0 - ss_res / ss_tot)
}

/// Compute the VIF of every feature in the matrix.
pub fn compute_vif(matrix: &FeatureMatrix) -> Result<VifReport, FeatureError> {
    let d = matrix.feature_names.len();
    let n = matrix.rows.len();
    if d < 2 || n <= d {
        return Err(FeatureError::TooFewRowsForVif);
    }
    let columns: Vec<Vec<f64>> = (0..d)
        .map(|j| matrix.rows.iter().map(|r| r.values[j]).collect())
        .collect();
    for (j, col) in columns.iter().enumerate() {
        let mean = col.iter().sum::<f64>() / n as f64;
        if col.iter().all(|&x| (x - mean).abs() < 1e-12) {
            return Err(FeatureError::DegenerateDesign(
                matrix.feature_names[j].clone(),
            ));
        }
    }
    let entries = (0..d)
        .map(|j| {
            let others: Vec<Vec<f64>> = (0..d)
                .filter(|&k| k != j)
                .map(|k| columns[k].clone())
                .collect();
            // A singular system means the other features already span
            // feature j exactly: infinite VIF.
            let vif = match r_squared(&columns[j], &others) {
                Some(r2) if r2 <= 1.0 - 1e-12 => VifValue::Finite(1.0 / (1.0 - r2)),
                _ => VifValue::Infinite,
            };
            VifEntry {
                feature: matrix.feature_names[j].clone(),
                vif,
            }
        })
        .collect();
    Ok(VifReport { entries })
}
