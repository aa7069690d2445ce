//! Pipeline stages. Each stage reads the artifacts of the previous one from
//! the output directory and writes its own, so stages can be run alone or
//! chained by `report`.

use crate::config::PipelineConfig;
use crate::manifest::{digest_dir, now_unix, sha256_hex, RunManifest, MANIFEST_FILE};
use atrisk::cluster::{
    elbow_curve, kmeans_fit, silhouette_curve, summarize_clusters, ClusterError, ClusterModel,
    ClusterSummary, KSelectionCurve, KmeansOptions,
};
use atrisk::explain::{rank_table, summarize, ExplainError, RankTable, ShapReport};
use atrisk::features::{
    compute_vif, label, normalize_per_section, oversample, read_dataset, select_features, split,
    write_dataset, FeatureError, LabeledInstance, SelectionReport, SplitSpec, VifReport,
};
use atrisk::ingest::{
    filter_courses, generate_synthetic, join_reports, parse_gr, parse_lur, write_gr, write_lur,
    CohortTable, FilterStats, IngestError, JoinStats, Provenance, SyntheticConfig,
};
use atrisk::models::{
    evaluate, grid_search, model_from_json, model_to_json, train, CvEntry, EvalReport, ModelError,
    ModelSpec, TrainedModel,
};
use atrisk::stats::{anova_oneway, tukey_hsd, AnovaResult, StatsError, TukeyResult};
use atrisk::{seed, svg, FEATURE_NAMES};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

// ---------------------------------------------------------------------------
// Errors and exit codes

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration (exit 1).
    Usage(String),
    /// Input data could not be read or featurized (exit 2).
    Data(String),
    /// A model failed to train (exit 3).
    Train(String),
    /// A stage was invoked before its upstream stage produced its artifacts
    /// (exit 4).
    MissingArtifact { stage: &'static str, path: PathBuf },
    /// Internal failure: IO on artifacts, numerics, etc. (exit 1).
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Other(_) => 1,
            CliError::Data(_) => 2,
            CliError::Train(_) => 3,
            CliError::MissingArtifact { .. } => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Train(m) => write!(f, "training error: {m}"),
            CliError::MissingArtifact { stage, path } => write!(
                f,
                "missing artifact {}: run the `{stage}` stage first",
                path.display()
            ),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Data(e.to_string())
    }
}
impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        CliError::Data(e.to_string())
    }
}
impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Train(e.to_string())
    }
}
impl From<ExplainError> for CliError {
    fn from(e: ExplainError) -> Self {
        CliError::Other(e.to_string())
    }
}
impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        CliError::Other(e.to_string())
    }
}
impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Other(e.to_string())
    }
}
impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(format!("io error: {e}"))
    }
}
impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(format!("json error: {e}"))
    }
}

// ---------------------------------------------------------------------------
// Small helpers

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn require(path: PathBuf, stage: &'static str) -> Result<PathBuf, CliError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::MissingArtifact { stage, path })
    }
}

fn ensure_out_dir(config: &PipelineConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&config.out_dir)?;
    Ok(())
}

/// Canonical serialization of the resolved configuration, hashed into the
/// manifest so runs can be matched to their exact settings.
pub fn config_digest(config: &PipelineConfig) -> Result<String, CliError> {
    Ok(sha256_hex(serde_json::to_string(config)?.as_bytes()))
}

// ---------------------------------------------------------------------------
// synth

/// Generate a synthetic cohort and write it as raw export files
/// (`lur.csv`, `gr.csv`) plus the ground-truth sidecar (`truth.json`).
pub fn run_synth(config: &PipelineConfig) -> Result<(), CliError> {
    ensure_out_dir(config)?;
    let synth = config.synthetic.clone().unwrap_or_else(|| SyntheticConfig {
        seed: config.seed,
        ..SyntheticConfig::default()
    });
    let (cohort, truth) = generate_synthetic(&synth)?;
    write_lur(&config.out_dir.join("lur.csv"), &cohort.usage)?;
    write_gr(&config.out_dir.join("gr.csv"), &cohort.grades)?;
    write_json(&config.out_dir.join("truth.json"), &truth)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// ingest

#[derive(Debug, Serialize, Deserialize)]
pub struct IngestSummary {
    pub provenance: Provenance,
    pub usage_rows_in: usize,
    pub grade_rows_in: usize,
    pub join: JoinStats,
    pub filter: FilterStats,
    pub usage_rows_out: usize,
    pub grade_rows_out: usize,
}

/// Parse (or generate), join, and filter the cohort; write the joined and
/// filtered table as `cohort_lur.csv` / `cohort_gr.csv` plus `ingest.json`.
pub fn run_ingest(config: &PipelineConfig) -> Result<(), CliError> {
    ensure_out_dir(config)?;
    let (usage, grades, provenance) = if let Some(synth) = &config.synthetic {
        let (cohort, truth) = generate_synthetic(synth)?;
        write_json(&config.out_dir.join("truth.json"), &truth)?;
        (cohort.usage, cohort.grades, cohort.provenance)
    } else {
        let lur = config
            .lur
            .clone()
            .ok_or_else(|| CliError::Usage("ingest needs --lur/--gr paths or a synthetic config".into()))?;
        let gr = config
            .gr
            .clone()
            .ok_or_else(|| CliError::Usage("ingest needs --lur/--gr paths or a synthetic config".into()))?;
        (parse_lur(&lur)?, parse_gr(&gr)?, Provenance::RealExport)
    };
    let usage_rows_in = usage.len();
    let grade_rows_in = grades.len();
    let (joined, join_stats) = join_reports(usage, grades, provenance)?;
    let (cohort, filter_stats) = filter_courses(&joined);
    write_lur(&config.out_dir.join("cohort_lur.csv"), &cohort.usage)?;
    write_gr(&config.out_dir.join("cohort_gr.csv"), &cohort.grades)?;
    write_json(
        &config.out_dir.join("ingest.json"),
        &IngestSummary {
            provenance,
            usage_rows_in,
            grade_rows_in,
            join: join_stats,
            filter: filter_stats,
            usage_rows_out: cohort.usage.len(),
            grade_rows_out: cohort.grades.len(),
        },
    )?;
    Ok(())
}

fn load_cohort(config: &PipelineConfig) -> Result<CohortTable, CliError> {
    let lur = require(config.out_dir.join("cohort_lur.csv"), "ingest")?;
    let gr = require(config.out_dir.join("cohort_gr.csv"), "ingest")?;
    let usage = parse_lur(&lur)?;
    let grades = parse_gr(&gr)?;
    // The stored cohort is already joined and filtered; re-joining is a
    // no-op that rebuilds the table invariants.
    let (cohort, _) = join_reports(usage, grades, Provenance::RealExport)?;
    Ok(cohort)
}

// ---------------------------------------------------------------------------
// featurize

#[derive(Debug, Serialize, Deserialize)]
pub struct FeaturizeSummary {
    pub selection: SelectionReport,
    pub vif: VifReport,
    pub label_threshold: f64,
    pub label_fallback: bool,
    pub dropped_unlabeled: usize,
    pub oversample_before_split: bool,
    pub n_instances: usize,
    pub n_at_risk: usize,
    pub n_after_oversample: usize,
    pub n_train: usize,
    pub n_test: usize,
}

/// Select, normalize, label, oversample, and split; writes the full
/// (pre-oversampling) dataset plus the train/test splits and `features.json`.
pub fn run_featurize(config: &PipelineConfig) -> Result<(), CliError> {
    ensure_out_dir(config)?;
    let cohort = load_cohort(config)?;
    let selection = select_features(&cohort, config.max_missing_fraction)?;
    let matrix = normalize_per_section(&cohort, &selection.selected)?;
    let vif = compute_vif(&matrix)?;
    let (instances, dropped_unlabeled) = label(&matrix, &cohort, &config.label_policy);
    let n_at_risk = instances.iter().filter(|i| i.at_risk).count();
    write_dataset(
        &config.out_dir.join("dataset_full.csv"),
        &matrix.feature_names,
        &instances,
    )?;

    let spec = SplitSpec {
        train_fraction: config.train_fraction,
        seed: config.seed,
    };
    let (train_set, test_set, n_after_oversample) = if config.oversample_before_split {
        let balanced = oversample(&instances, config.seed)?;
        let n = balanced.len();
        let (tr, te) = split(&balanced, &spec)?;
        (tr, te, n)
    } else {
        let (tr, te) = split(&instances, &spec)?;
        let tr = oversample(&tr, config.seed)?;
        let n = tr.len() + te.len();
        (tr, te, n)
    };
    write_dataset(
        &config.out_dir.join("train.csv"),
        &matrix.feature_names,
        &train_set,
    )?;
    write_dataset(
        &config.out_dir.join("test.csv"),
        &matrix.feature_names,
        &test_set,
    )?;
    write_json(
        &config.out_dir.join("features.json"),
        &FeaturizeSummary {
            selection,
            vif,
            label_threshold: config.label_policy.threshold,
            label_fallback: config.label_policy.fallback,
            dropped_unlabeled,
            oversample_before_split: config.oversample_before_split,
            n_instances: instances.len(),
            n_at_risk,
            n_after_oversample,
            n_train: train_set.len(),
            n_test: test_set.len(),
        },
    )?;
    Ok(())
}

fn load_split(
    config: &PipelineConfig,
    name: &str,
) -> Result<(Vec<String>, Vec<LabeledInstance>), CliError> {
    let path = require(config.out_dir.join(name), "featurize")?;
    Ok(read_dataset(&path)?)
}

fn xy(instances: &[LabeledInstance]) -> (Vec<Vec<f64>>, Vec<bool>) {
    (
        instances.iter().map(|i| i.features.clone()).collect(),
        instances.iter().map(|i| i.at_risk).collect(),
    )
}

// ---------------------------------------------------------------------------
// train

#[derive(Debug, Serialize, Deserialize)]
pub struct FamilyMetrics {
    pub family: String,
    pub best_spec: ModelSpec,
    pub cv_table: Vec<CvEntry>,
    pub eval: EvalReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetricsSummaryRow {
    pub family: String,
    pub accuracy: f64,
    pub auc: Option<f64>,
    pub best_hyperparameters: ModelSpec,
}

/// Grid-search, fit, and evaluate every configured family. Writes per-family
/// model/metrics/ROC artifacts plus `metrics_summary.json`.
pub fn run_train(config: &PipelineConfig) -> Result<(), CliError> {
    ensure_out_dir(config)?;
    let (feature_names, train_set) = load_split(config, "train.csv")?;
    let (_, test_set) = load_split(config, "test.csv")?;
    let (train_x, train_y) = xy(&train_set);
    let (test_x, test_y) = xy(&test_set);
    let families = config.resolved_families().map_err(CliError::Usage)?;
    let mut summary = Vec::new();
    for family in families {
        let name = family.as_str();
        let grid = config.grid_for(family);
        let search = grid_search(
            family,
            &grid,
            &train_x,
            &train_y,
            &feature_names,
            config.cv_folds,
            config.seed,
        )
        .map_err(|e| CliError::Train(format!("{name}: {e}")))?;
        let model = train(&search.best_spec, &train_x, &train_y, &feature_names)
            .map_err(|e| CliError::Train(format!("{name}: {e}")))?;
        let eval = evaluate(&model, &test_x, &test_y)
            .map_err(|e| CliError::Train(format!("{name}: {e}")))?;

        std::fs::write(
            config.out_dir.join(format!("model_{name}.json")),
            model_to_json(&model)?,
        )?;
        let roc_series = [
            svg::Series {
                name: name.to_string(),
                points: eval.roc_points.clone(),
            },
            svg::Series {
                name: "chance".to_string(),
                points: vec![(0.0, 0.0), (1.0, 1.0)],
            },
        ];
        std::fs::write(
            config.out_dir.join(format!("roc_{name}.svg")),
            svg::line_chart(
                &format!("ROC: {name}"),
                "false positive rate",
                "true positive rate",
                &roc_series,
            ),
        )?;
        summary.push(MetricsSummaryRow {
            family: name.to_string(),
            accuracy: eval.accuracy,
            auc: eval.auc,
            best_hyperparameters: search.best_spec.clone(),
        });
        write_json(
            &config.out_dir.join(format!("metrics_{name}.json")),
            &FamilyMetrics {
                family: name.to_string(),
                best_spec: search.best_spec,
                cv_table: search.cv_table,
                eval,
            },
        )?;
    }
    write_json(&config.out_dir.join("metrics_summary.json"), &summary)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// explain

/// Seeded subsample of up to `n` feature rows.
fn sample_rows(instances: &[LabeledInstance], n: usize, seed_value: u64, stage: &str) -> Vec<Vec<f64>> {
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.shuffle(&mut seed::rng(seed_value, stage, 0));
    order.truncate(n);
    order.sort_unstable();
    order.iter().map(|&i| instances[i].features.clone()).collect()
}

/// Exact Shapley attributions per family; writes `shap_<family>.json`, a
/// beeswarm `shap_<family>.svg`, and the cross-family `rank_table.json`.
pub fn run_explain(config: &PipelineConfig) -> Result<(), CliError> {
    ensure_out_dir(config)?;
    let (_, train_set) = load_split(config, "train.csv")?;
    let (_, test_set) = load_split(config, "test.csv")?;
    let background = sample_rows(&train_set, config.shap_background, config.seed, "shap-background");
    let explained = sample_rows(&test_set, config.shap_instances, config.seed, "shap-instances");
    let families = config.resolved_families().map_err(CliError::Usage)?;
    let mut reports: Vec<(String, ShapReport)> = Vec::new();
    for family in families {
        let name = family.as_str();
        let model_path = require(config.out_dir.join(format!("model_{name}.json")), "train")?;
        let model: TrainedModel = model_from_json(&std::fs::read_to_string(&model_path)?)?;
        let report = summarize(&model, &explained, &background)?;
        write_json(&config.out_dir.join(format!("shap_{name}.json")), &report)?;
        let rows: Vec<svg::BeeswarmRow> = report
            .feature_names
            .iter()
            .enumerate()
            .map(|(j, feature)| svg::BeeswarmRow {
                feature: feature.clone(),
                points: report
                    .phi
                    .iter()
                    .zip(&explained)
                    .map(|(phi, x)| (phi[j], x[j]))
                    .collect(),
            })
            .collect();
        std::fs::write(
            config.out_dir.join(format!("shap_{name}.svg")),
            svg::beeswarm(&format!("Shapley attributions: {name}"), &rows),
        )?;
        reports.push((name.to_string(), report));
    }
    let refs: Vec<(String, &ShapReport)> =
        reports.iter().map(|(n, r)| (n.clone(), r)).collect();
    let table: RankTable = rank_table(&refs);
    write_json(&config.out_dir.join("rank_table.json"), &table)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// cluster

#[derive(Debug, Serialize, Deserialize)]
pub struct ClusterArtifact {
    pub chosen_k: usize,
    pub model: ClusterModel,
    pub summary: ClusterSummary,
    pub elbow: KSelectionCurve,
    pub silhouette: Option<KSelectionCurve>,
}

/// K-means over the full (pre-oversampling) dataset with elbow/silhouette
/// model selection; writes `cluster.json` plus the three diagnostic charts.
pub fn run_cluster(config: &PipelineConfig) -> Result<(), CliError> {
    ensure_out_dir(config)?;
    let (feature_names, instances) = load_split(config, "dataset_full.csv")?;
    let points: Vec<Vec<f64>> = instances.iter().map(|i| i.features.clone()).collect();
    if config.k_min < 1 || config.k_min > config.k_max {
        return Err(CliError::Usage(format!(
            "invalid k range {}..={}",
            config.k_min, config.k_max
        )));
    }
    let options = KmeansOptions::default();
    let (elbow, models) = elbow_curve(
        &points,
        config.k_min..=config.k_max,
        config.seed,
        &options,
    )?;
    let silhouette = if config.k_max >= 2 {
        Some(silhouette_curve(
            &points,
            config.k_min.max(2)..=config.k_max,
            config.seed,
            &options,
        )?)
    } else {
        None
    };
    let chosen_k = config.cluster_k.unwrap_or(elbow.chosen_k);
    let model = models
        .into_iter()
        .find(|m| m.k == chosen_k)
        .map(Ok)
        .unwrap_or_else(|| kmeans_fit(&points, chosen_k, config.seed, &options))?;
    let summary = summarize_clusters(&model, &instances)?;

    std::fs::write(
        config.out_dir.join("elbow.svg"),
        svg::line_chart(
            "Within-cluster sum of squares by k",
            "k",
            "SSE",
            &[svg::Series {
                name: "SSE".into(),
                points: elbow.points.iter().map(|&(k, v)| (k as f64, v)).collect(),
            }],
        ),
    )?;
    if let Some(sil) = &silhouette {
        std::fs::write(
            config.out_dir.join("silhouette.svg"),
            svg::line_chart(
                "Mean silhouette by k",
                "k",
                "silhouette",
                &[svg::Series {
                    name: "silhouette".into(),
                    points: sil.points.iter().map(|&(k, v)| (k as f64, v)).collect(),
                }],
            ),
        )?;
    }
    let centroid_series: Vec<svg::Series> = summary
        .clusters
        .iter()
        .map(|c| svg::Series {
            name: format!("cluster {}", c.label),
            points: c.feature_mean.iter().copied().enumerate()
                .map(|(i, v)| (i as f64, v))
                .collect(),
        })
        .collect();
    std::fs::write(
        config.out_dir.join("centroids.svg"),
        svg::bar_chart(
            "Cluster profiles (feature means)",
            "normalized mean",
            &feature_names,
            &centroid_series,
        ),
    )?;
    write_json(
        &config.out_dir.join("cluster.json"),
        &ClusterArtifact {
            chosen_k,
            model,
            summary,
            elbow,
            silhouette,
        },
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// stats

#[derive(Debug, Serialize, Deserialize)]
pub struct VariableStats {
    pub variable: String,
    pub alpha: f64,
    pub anova: AnovaResult,
    pub significant: bool,
    /// Absent when the within-group variance is exactly zero (the ANOVA
    /// itself carries the degenerate-variance flag).
    pub tukey: Option<TukeyResult>,
}

/// One-way ANOVA plus Tukey HSD of each feature and the final grade across
/// the fitted clusters; one `stats_<variable>.json` per variable.
pub fn run_stats(config: &PipelineConfig) -> Result<(), CliError> {
    ensure_out_dir(config)?;
    let (feature_names, instances) = load_split(config, "dataset_full.csv")?;
    let cluster_path = require(config.out_dir.join("cluster.json"), "cluster")?;
    let artifact: ClusterArtifact = read_json(&cluster_path)?;
    if artifact.model.assignments.len() != instances.len() {
        return Err(CliError::Other(format!(
            "cluster.json covers {} instances but dataset_full.csv has {}",
            artifact.model.assignments.len(),
            instances.len()
        )));
    }
    let k = artifact.model.k;
    let mut variables: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for (j, name) in feature_names.iter().enumerate() {
        let mut groups = vec![Vec::new(); k];
        for (inst, &c) in instances.iter().zip(&artifact.model.assignments) {
            groups[artifact.summary.relabeling[c]].push(inst.features[j]);
        }
        variables.push((name.clone(), groups));
    }
    let mut grade_groups = vec![Vec::new(); k];
    for (inst, &c) in instances.iter().zip(&artifact.model.assignments) {
        grade_groups[artifact.summary.relabeling[c]].push(inst.final_grade);
    }
    variables.push(("final_grade".to_string(), grade_groups));

    for (variable, groups) in variables {
        let anova = anova_oneway(&groups)?;
        let tukey = match tukey_hsd(&groups, config.alpha) {
            Ok(t) => Some(t),
            Err(StatsError::ZeroWithinVariance) => None,
            Err(e) => return Err(e.into()),
        };
        write_json(
            &config.out_dir.join(format!("stats_{variable}.json")),
            &VariableStats {
                variable: variable.clone(),
                alpha: config.alpha,
                significant: anova.p_value < config.alpha,
                anova,
                tukey,
            },
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// report

const FEATURE_NAME_CHECK: [&str; 4] = FEATURE_NAMES;

/// Run every stage in order and write `manifest.json` with per-stage wall
/// times and a SHA-256 digest of every artifact.
pub fn run_report(config: &PipelineConfig) -> Result<(), CliError> {
    ensure_out_dir(config)?;
    // Sanity anchor: the canonical feature order everything assumes.
    debug_assert_eq!(FEATURE_NAME_CHECK.len(), 4);
    let stages: [(&str, fn(&PipelineConfig) -> Result<(), CliError>); 6] = [
        ("ingest", run_ingest),
        ("featurize", run_featurize),
        ("train", run_train),
        ("explain", run_explain),
        ("cluster", run_cluster),
        ("stats", run_stats),
    ];
    let mut stage_seconds = BTreeMap::new();
    for (name, stage) in stages {
        let start = Instant::now();
        stage(config)?;
        stage_seconds.insert(name.to_string(), start.elapsed().as_secs_f64());
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        config_sha256: config_digest(config)?,
        generated_at: now_unix(),
        stage_seconds,
        files: digest_dir(&config.out_dir)?,
    };
    write_json(&config.out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(())
}
