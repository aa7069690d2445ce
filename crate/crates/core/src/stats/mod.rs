//! One-way ANOVA across clusters and Tukey HSD post-hoc comparisons.

mod srange;

pub use srange::studentized_range_cdf;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("degenerate groups: {0}")]
    DegenerateGroups(String),
    #[error("within-group variance is zero")]
    ZeroWithinVariance,
    #[error("quadrature tolerance unreachable")]
    QuadratureFailure,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One-way ANOVA outcome. When `zero_within_variance` is set, group means
/// differ but within-group variance is exactly zero; `f` is infinite and
/// `p_value` is reported as 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnovaResult {
    pub groups: usize,
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub msb: f64,
    pub msw: f64,
    pub p_value: f64,
    pub zero_within_variance: bool,
}

/// Survival function of the F distribution via the regularized incomplete
/// beta function.
fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    beta_reg(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * f))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// One-way ANOVA over `groups` of observations.
pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::DegenerateGroups(format!(
            "need at least 2 groups, got {k}"
        )));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(StatsError::DegenerateGroups("empty group".into()));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    if n <= k {
        return Err(StatsError::DegenerateGroups(format!(
            "need more observations ({n}) than groups ({k})"
        )));
    }
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = mean(g);
        ssb += g.len() as f64 * (m - grand).powi(2);
        ssw += g.iter().map(|y| (y - m).powi(2)).sum::<f64>();
    }
    let df_between = k - 1;
    let df_within = n - k;
    let msb = ssb / df_between as f64;
    let msw = ssw / df_within as f64;
    if msw == 0.0 {
        if msb == 0.0 {
            // All observations identical: no evidence of any difference.
            return Ok(AnovaResult {
                groups: k,
                f: 0.0,
                df_between,
                df_within,
                msb,
                msw,
                p_value: 1.0,
                zero_within_variance: false,
            });
        }
        return Ok(AnovaResult {
            groups: k,
            f: f64::INFINITY,
            df_between,
            df_within,
            msb,
            msw,
            p_value: 0.0,
            zero_within_variance: true,
        });
    }
    let f = msb / msw;
    Ok(AnovaResult {
        groups: k,
        f,
        df_between,
        df_within,
        msb,
        msw,
        p_value: f_sf(f, df_between as f64, df_within as f64),
        zero_within_variance: false,
    })
}

/// One pairwise comparison in a Tukey HSD table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TukeyPair {
    pub group_i: usize,
    pub group_j: usize,
    pub mean_difference: f64,
    pub q: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TukeyResult {
    pub pairs: Vec<TukeyPair>,
    pub alpha: f64,
}

/// Tukey HSD over all unordered group pairs, using the Tukey-Kramer
/// statistic for unequal group sizes:
/// `q_ij = |m_i - m_j| / sqrt((MSW / 2)(1/n_i + 1/n_j))`.
pub fn tukey_hsd(groups: &[Vec<f64>], alpha: f64) -> Result<TukeyResult, StatsError> {
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(StatsError::InvalidArgument(format!(
            "alpha {alpha} outside (0, 1)"
        )));
    }
    let anova = anova_oneway(groups)?;
    if anova.msw == 0.0 {
        return Err(StatsError::ZeroWithinVariance);
    }
    let k = groups.len();
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            let se = (0.5 * anova.msw
                * (1.0 / groups[i].len() as f64 + 1.0 / groups[j].len() as f64))
                .sqrt();
            let diff = means[i] - means[j];
            let q = diff.abs() / se;
            let p_value = 1.0 - studentized_range_cdf(q, k, anova.df_within)?;
            pairs.push(TukeyPair {
                group_i: i,
                group_j: j,
                mean_difference: diff,
                q,
                p_value,
                significant: p_value < alpha,
            });
        }
    }
    Ok(TukeyResult { pairs, alpha })
}
