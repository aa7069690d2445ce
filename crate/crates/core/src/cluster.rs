//! K-means cluster profiling of student interaction features.
//!
//! Lloyd's algorithm with seeded restarts, k selection by the elbow and mean
//! silhouette curves, and per-cluster mean/SD summaries including final
//! grades.

use crate::features::LabeledInstance;
use crate::seed;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("k = {k} exceeds the number of distinct points ({distinct})")]
    KTooLarge { k: usize, distinct: usize },
    #[error("no input points")]
    EmptyInput,
    #[error("silhouette needs at least 2 clusters")]
    SingleCluster,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Fitted k-means model. Each point is assigned to its nearest centroid,
/// ties to the lowest index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Sum of squared Euclidean distances to assigned centroids.
    pub inertia: f64,
    pub n_iterations: usize,
    pub seed: u64,
    /// Inertia after each assignment step of the winning restart;
    /// non-increasing by Lloyd monotonicity.
    pub inertia_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KmeansOptions {
    pub n_restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KmeansOptions {
    fn default() -> Self {
        KmeansOptions {
            n_restarts: 10,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

struct LloydOutcome {
    centroids: Vec<Vec<f64>>,
    assignments: Vec<usize>,
    inertia: f64,
    n_iterations: usize,
    inertia_history: Vec<f64>,
}

/// One Lloyd descent from the given initial centroids.
fn lloyd_run(
    points: &[Vec<f64>],
    mut centroids: Vec<Vec<f64>>,
    max_iter: usize,
    tol: f64,
) -> LloydOutcome {
    let dim = points[0].len();
    let k = centroids.len();
    let mut assignments = vec![0usize; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            assignments[i] = c;
            inertia += d;
        }
        history.push(inertia);

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        // Empty cluster: reseed at the point farthest from its assigned
        // centroid (first such point on ties, so the choice is deterministic).
        for c in 0..k {
            if counts[c] == 0 {
                let far = points
                    .iter()
                    .enumerate()
                    .max_by(|(i, a), (j, b)| {
                        let da = sq_dist(a, &centroids[assignments[*i]]);
                        let db = sq_dist(b, &centroids[assignments[*j]]);
                        da.partial_cmp(&db).unwrap().then(j.cmp(i))
                    })
                    .map(|(i, _)| i)
                    .unwrap();
                sums[c] = points[far].clone();
                counts[c] = 1;
            }
        }
        for c in 0..k {
            for s in sums[c].iter_mut() {
                *s /= counts[c] as f64;
            }
        }
        let moved = sums
            .iter()
            .zip(&centroids)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0f64, f64::max);
        centroids = sums;
        if moved < tol {
            break;
        }
    }
    // Final assignment pass so assignments match the returned centroids.
    let mut inertia = 0.0;
    for (i, p) in points.iter().enumerate() {
        let (c, d) = nearest(p, &centroids);
        assignments[i] = c;
        inertia += d;
    }
    history.push(inertia);
    LloydOutcome {
        centroids,
        assignments,
        inertia,
        n_iterations: iterations,
        inertia_history: history,
    }
}

fn distinct_points(points: &[Vec<f64>]) -> Vec<usize> {
    let mut seen: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !seen.iter().any(|&j| points[j] == *p) {
            seen.push(i);
        }
    }
    seen
}

/// Fit k-means: best of `n_restarts` seeded Lloyd descents by inertia,
/// ties to the lowest restart index. Initialization samples k distinct
/// data points.
pub fn kmeans_fit(
    points: &[Vec<f64>],
    k: usize,
    seed_value: u64,
    options: &KmeansOptions,
) -> Result<ClusterModel, ClusterError> {
    if points.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    if k == 0 {
        return Err(ClusterError::InvalidArgument("k must be >= 1".into()));
    }
    let distinct = distinct_points(points);
    if k > distinct.len() {
        return Err(ClusterError::KTooLarge {
            k,
            distinct: distinct.len(),
        });
    }
    let mut best: Option<LloydOutcome> = None;
    for restart in 0..options.n_restarts.max(1) {
        let mut rng = seed::rng(seed_value, "kmeans", restart as u64);
        let mut pool = distinct.clone();
        pool.shuffle(&mut rng);
        let init: Vec<Vec<f64>> = pool[..k].iter().map(|&i| points[i].clone()).collect();
        let outcome = lloyd_run(points, init, options.max_iter, options.tol);
        if best.as_ref().map_or(true, |b| outcome.inertia < b.inertia) {
            best = Some(outcome);
        }
    }
    let best = best.unwrap();
    Ok(ClusterModel {
        k,
        centroids: best.centroids,
        assignments: best.assignments,
        inertia: best.inertia,
        n_iterations: best.n_iterations,
        seed: seed_value,
        inertia_history: best.inertia_history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KSelectionMethod {
    Elbow,
    Silhouette,
}

/// SSE-versus-k or silhouette-versus-k curve with the automatic choice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KSelectionCurve {
    pub points: Vec<(usize, f64)>,
    pub chosen_k: usize,
    pub method: KSelectionMethod,
}

/// Knee of a curve by maximum perpendicular distance from the chord joining
/// its endpoints, with both axes normalized to [0, 1] first.
fn knee_by_chord(points: &[(usize, f64)]) -> usize {
    if points.len() < 3 {
        return points[0].0;
    }
    let (x0, y0) = (points[0].0 as f64, points[0].1);
    let (x1, y1) = (
        points[points.len() - 1].0 as f64,
        points[points.len() - 1].1,
    );
    let span_x = (x1 - x0).max(1e-12);
    let span_y = (y0 - y1).abs().max(1e-12);
    let mut best_k = points[0].0;
    let mut best_d = f64::NEG_INFINITY;
    for &(k, sse) in points {
        let nx = (k as f64 - x0) / span_x;
        let ny = (sse - y1) / span_y;
        // Chord runs from (0, ny0) to (1, ny1) in normalized space.
        let ny0 = (y0 - y1) / span_y;
        let ny1 = 0.0;
        let d = ((ny1 - ny0) * nx - 1.0 * ny + ny0).abs() / ((ny1 - ny0).powi(2) + 1.0).sqrt();
        if d > best_d {
            best_d = d;
            best_k = k;
        }
    }
    best_k
}

/// SSE per k over a range, with a warm start from the previous k so the
/// curve is non-increasing, and the elbow chosen by distance-to-chord.
pub fn elbow_curve(
    points: &[Vec<f64>],
    k_range: std::ops::RangeInclusive<usize>,
    seed_value: u64,
    options: &KmeansOptions,
) -> Result<(KSelectionCurve, Vec<ClusterModel>), ClusterError> {
    let mut curve = Vec::new();
    let mut models: Vec<ClusterModel> = Vec::new();
    for k in k_range {
        let mut model = kmeans_fit(points, k, seed_value, options)?;
        if let Some(prev) = models.last() {
            // Warm start: previous centroids plus the point farthest from
            // them; adding a centroid can only lower the optimum.
            let mut init = prev.centroids.clone();
            let far = points
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| {
                    nearest(a, &init).1.partial_cmp(&nearest(b, &init).1).unwrap()
                })
                .map(|(i, _)| i)
                .unwrap();
            init.push(points[far].clone());
            let warm = lloyd_run(points, init, options.max_iter, options.tol);
            if warm.inertia < model.inertia {
                model = ClusterModel {
                    k,
                    centroids: warm.centroids,
                    assignments: warm.assignments,
                    inertia: warm.inertia,
                    n_iterations: warm.n_iterations,
                    seed: seed_value,
                    inertia_history: warm.inertia_history,
                };
            }
        }
        curve.push((k, model.inertia));
        models.push(model);
    }
    let chosen_k = knee_by_chord(&curve);
    Ok((
        KSelectionCurve {
            points: curve,
            chosen_k,
            method: KSelectionMethod::Elbow,
        },
        models,
    ))
}

/// Mean silhouette coefficient of a fitted model. Per point,
/// `s = (b - a) / max(a, b)`; singleton clusters and degenerate
/// `max(a, b) = 0` score 0.
pub fn silhouette_mean(points: &[Vec<f64>], model: &ClusterModel) -> Result<f64, ClusterError> {
    if model.k < 2 {
        return Err(ClusterError::SingleCluster);
    }
    let n = points.len();
    let counts = {
        let mut c = vec![0usize; model.k];
        for &a in &model.assignments {
            c[a] += 1;
        }
        c
    };
    let mut total = 0.0;
    for i in 0..n {
        let own = model.assignments[i];
        if counts[own] <= 1 {
            continue; // singleton scores 0
        }
        let mut sums = vec![0.0f64; model.k];
        for j in 0..n {
            if i != j {
                sums[model.assignments[j]] += sq_dist(&points[i], &points[j]).sqrt();
            }
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let b = (0..model.k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Mean silhouette per k over a range.
pub fn silhouette_curve(
    points: &[Vec<f64>],
    k_range: std::ops::RangeInclusive<usize>,
    seed_value: u64,
    options: &KmeansOptions,
) -> Result<KSelectionCurve, ClusterError> {
    let mut curve = Vec::new();
    for k in k_range {
        if k < 2 {
            continue;
        }
        let model = kmeans_fit(points, k, seed_value, options)?;
        curve.push((k, silhouette_mean(points, &model)?));
    }
    if curve.is_empty() {
        return Err(ClusterError::SingleCluster);
    }
    let chosen_k = curve
        .iter()
        .cloned()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
        .unwrap()
        .0;
    Ok(KSelectionCurve {
        points: curve,
        chosen_k,
        method: KSelectionMethod::Silhouette,
    })
}

/// Mean and population SD per cluster for each feature and the final grade.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterProfile {
    /// Position after descending-grade relabeling (0 = highest mean grade).
    pub label: usize,
    pub count: usize,
    pub feature_mean: Vec<f64>,
    pub feature_sd: Vec<f64>,
    pub grade_mean: f64,
    pub grade_sd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub clusters: Vec<ClusterProfile>,
    /// `relabeling[old_cluster_index] = new_label`.
    pub relabeling: Vec<usize>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Summarize clusters over labeled instances (features + final grade),
/// reported in descending mean final grade.
pub fn summarize_clusters(
    model: &ClusterModel,
    instances: &[LabeledInstance],
) -> Result<ClusterSummary, ClusterError> {
    if instances.len() != model.assignments.len() {
        return Err(ClusterError::InvalidArgument(format!(
            "assignments cover {} instances but {} were given",
            model.assignments.len(),
            instances.len()
        )));
    }
    let dim = instances.first().map_or(0, |i| i.features.len());
    let mut raw: Vec<(usize, Vec<Vec<f64>>, Vec<f64>)> = (0..model.k)
        .map(|c| (c, vec![Vec::new(); dim], Vec::new()))
        .collect();
    for (inst, &c) in instances.iter().zip(&model.assignments) {
        for (j, &v) in inst.features.iter().enumerate() {
            raw[c].1[j].push(v);
        }
        raw[c].2.push(inst.final_grade);
    }
    let grade_mean = |entry: &(usize, Vec<Vec<f64>>, Vec<f64>)| {
        if entry.2.is_empty() {
            f64::NEG_INFINITY
        } else {
            entry.2.iter().sum::<f64>() / entry.2.len() as f64
        }
    };
    let mut order: Vec<usize> = (0..model.k).collect();
    order.sort_by(|&a, &b| {
        grade_mean(&raw[b])
            .partial_cmp(&grade_mean(&raw[a]))
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut relabeling = vec![0usize; model.k];
    for (new_label, &old) in order.iter().enumerate() {
        relabeling[old] = new_label;
    }
    let clusters = order
        .iter()
        .enumerate()
        .map(|(new_label, &old)| {
            let (_, features, grades) = &raw[old];
            let (feature_mean, feature_sd): (Vec<f64>, Vec<f64>) =
                features.iter().map(|col| mean_sd(col)).unzip();
            let (grade_mean, grade_sd) = if grades.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                mean_sd(grades)
            };
            ClusterProfile {
                label: new_label,
                count: grades.len(),
                feature_mean,
                feature_sd,
                grade_mean,
                grade_sd,
            }
        })
        .collect();
    Ok(ClusterSummary {
        clusters,
        relabeling,
    })
}
