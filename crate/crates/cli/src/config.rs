//! Pipeline configuration: JSON file via `--config`, with command-line
//! flags overriding individual fields.

use atrisk::features::LabelPolicy;
use atrisk::ingest::SyntheticConfig;
use atrisk::models::{ModelFamily, ParamValue, ALL_FAMILIES};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; every stochastic stage derives its own stream from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Learner Usage Report export path (real data mode).
    pub lur: Option<PathBuf>,
    /// Grades Report export path (real data mode).
    pub gr: Option<PathBuf>,
    /// Synthetic cohort parameters; takes precedence over file inputs.
    pub synthetic: Option<SyntheticConfig>,
    pub max_missing_fraction: f64,
    pub label_policy: LabelPolicy,
    pub train_fraction: f64,
    /// True (the published protocol): oversample the whole cohort, then
    /// split. False: split first, oversample the training side only.
    pub oversample_before_split: bool,
    /// Families to train; "all" expands to the seven.
    pub families: Vec<String>,
    /// Per-family grid overrides keyed by family name.
    pub grids: BTreeMap<String, BTreeMap<String, Vec<ParamValue>>>,
    pub cv_folds: usize,
    pub shap_background: usize,
    pub shap_instances: usize,
    pub k_min: usize,
    pub k_max: usize,
    /// Fixed cluster count; absent means the elbow choice.
    pub cluster_k: Option<usize>,
    pub alpha: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            lur: None,
            gr: None,
            synthetic: None,
            max_missing_fraction: 0.20,
            label_policy: LabelPolicy::default(),
            train_fraction: 0.8,
            oversample_before_split: true,
            families: vec!["all".to_string()],
            grids: BTreeMap::new(),
            cv_folds: 3,
            shap_background: 100,
            shap_instances: 200,
            k_min: 1,
            k_max: 10,
            cluster_k: None,
            alpha: 0.05,
        }
    }
}

impl PipelineConfig {
    pub fn resolved_families(&self) -> Result<Vec<ModelFamily>, String> {
        let mut out = Vec::new();
        for name in &self.families {
            if name == "all" {
                out.extend(ALL_FAMILIES);
            } else {
                out.push(
                    ModelFamily::parse(name)
                        .ok_or_else(|| format!("unknown model family: {name}"))?,
                );
            }
        }
        out.dedup();
        Ok(out)
    }

    pub fn grid_for(&self, family: ModelFamily) -> BTreeMap<String, Vec<ParamValue>> {
        if let Some(grid) = self.grids.get(family.as_str()) {
            return grid.clone();
        }
        default_grid(family)
    }
}

/// Built-in grids, anchored at the published winning points.
pub fn default_grid(family: ModelFamily) -> BTreeMap<String, Vec<ParamValue>> {
    use ParamValue::{Float, Int, IntList, Text};
    match family {
        ModelFamily::LogisticRegression => BTreeMap::from([(
            "C".to_string(),
            vec![
                Float(0.001),
                Float(0.009),
                Float(0.1),
                Float(1.0),
                Float(10.0),
            ],
        )]),
        ModelFamily::GaussianNaiveBayes => BTreeMap::from([(
            "var_smoothing".to_string(),
            vec![Float(1e-9), Float(1e-7), Float(1e-5)],
        )]),
        ModelFamily::DecisionTree => BTreeMap::from([(
            "min_samples_split".to_string(),
            vec![Int(2), Int(3)],
        )]),
        ModelFamily::RandomForest => BTreeMap::from([
            ("n_estimators".to_string(), vec![Int(700)]),
            ("min_samples_split".to_string(), vec![Int(3)]),
            ("max_features".to_string(), vec![Text("log2".into())]),
        ]),
        ModelFamily::NeuralNetwork => BTreeMap::from([
            (
                "hidden_layer_sizes".to_string(),
                vec![IntList(vec![100, 100])],
            ),
            ("alpha".to_string(), vec![Float(0.1)]),
        ]),
        ModelFamily::GradientBoosting => BTreeMap::from([
            ("n_estimators".to_string(), vec![Int(400)]),
            ("max_depth".to_string(), vec![Int(15)]),
            ("learning_rate".to_string(), vec![Float(0.1)]),
        ]),
        ModelFamily::SupportVectorMachine => BTreeMap::from([
            ("C".to_string(), vec![Float(1000.0)]),
            ("gamma".to_string(), vec![Float(1.0)]),
        ]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_expands_to_seven_families() {
        let config = PipelineConfig::default();
        assert_eq!(config.resolved_families().unwrap().len(), 7);
    }

    #[test]
    fn unknown_family_is_an_error() {
        let config = PipelineConfig {
            families: vec!["perceptron".into()],
            ..PipelineConfig::default()
        };
        assert!(config.resolved_families().is_err());
    }

    #[test]
    fn default_grids_cover_the_published_anchors() {
        let forest = default_grid(ModelFamily::RandomForest);
        assert!(forest["n_estimators"].contains(&ParamValue::Int(700)));
        let logistic = default_grid(ModelFamily::LogisticRegression);
        assert!(logistic["C"].contains(&ParamValue::Float(0.009)));
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = PipelineConfig::default();
        let json = serde_json::to_string(&config).unwrap();
        let back: PipelineConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.seed, config.seed);
        assert_eq!(back.k_max, 10);
    }
}
