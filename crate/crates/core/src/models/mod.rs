//! The seven classifier families, grid search, and evaluation.
//!
//! Every family trains deterministically from `(spec, seed)` and predicts the
//! probability of the at-risk class. Hyperparameters travel as a name/value
//! map validated against each family's declared set.

pub mod boosting;
pub mod eval;
pub mod forest;
pub mod grid;
pub mod logistic;
pub mod naive_bayes;
pub mod neural;
pub mod svm;
pub mod tree;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

pub use eval::{evaluate, EvalReport};
pub use grid::{grid_search, CvEntry, GridSearchResult};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set contains a single class")]
    SingleClassTraining,
    #[error("optimizer failed to converge (last loss {last_loss})")]
    NonConvergence { last_loss: f64 },
    #[error("instance has {found} features, model expects {expected}")]
    FeatureMismatch { expected: usize, found: usize },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("invalid hyperparameter {name} for {family}: {reason}")]
    InvalidHyperparameter {
        family: ModelFamily,
        name: String,
        reason: String,
    },
    #[error("model persistence failed: {0}")]
    Persistence(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelFamily {
    LogisticRegression,
    GaussianNaiveBayes,
    DecisionTree,
    RandomForest,
    NeuralNetwork,
    GradientBoosting,
    SupportVectorMachine,
}

pub const ALL_FAMILIES: [ModelFamily; 7] = [
    ModelFamily::LogisticRegression,
    ModelFamily::GaussianNaiveBayes,
    ModelFamily::DecisionTree,
    ModelFamily::RandomForest,
    ModelFamily::NeuralNetwork,
    ModelFamily::GradientBoosting,
    ModelFamily::SupportVectorMachine,
];

impl ModelFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelFamily::LogisticRegression => "logistic_regression",
            ModelFamily::GaussianNaiveBayes => "gaussian_naive_bayes",
            ModelFamily::DecisionTree => "decision_tree",
            ModelFamily::RandomForest => "random_forest",
            ModelFamily::NeuralNetwork => "neural_network",
            ModelFamily::GradientBoosting => "gradient_boosting",
            ModelFamily::SupportVectorMachine => "support_vector_machine",
        }
    }

    pub fn parse(s: &str) -> Option<ModelFamily> {
        ALL_FAMILIES.iter().copied().find(|f| f.as_str() == s)
    }

    fn allowed_params(&self) -> &'static [&'static str] {
        match self {
            ModelFamily::LogisticRegression => &["C", "max_iter", "tol"],
            ModelFamily::GaussianNaiveBayes => &["var_smoothing"],
            ModelFamily::DecisionTree => &["criterion", "max_depth", "min_samples_split"],
            ModelFamily::RandomForest => &[
                "n_estimators",
                "max_depth",
                "min_samples_split",
                "bootstrap",
                "max_features",
            ],
            ModelFamily::NeuralNetwork => &[
                "hidden_layer_sizes",
                "alpha",
                "learning_rate_init",
                "max_iter",
                "tol",
            ],
            ModelFamily::GradientBoosting => &[
                "learning_rate",
                "max_depth",
                "n_estimators",
                "reg_lambda",
                "gamma",
            ],
            ModelFamily::SupportVectorMachine => &["C", "gamma", "tol", "max_rows"],
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A hyperparameter value. Untagged so JSON configs read naturally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Text(String),
    IntList(Vec<i64>),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Text(v) => write!(f, "{v}"),
            ParamValue::IntList(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", parts.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, ParamValue>,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, seed: u64) -> ModelSpec {
        ModelSpec {
            family,
            hyperparameters: BTreeMap::new(),
            seed,
        }
    }

    pub fn with(mut self, name: &str, value: ParamValue) -> ModelSpec {
        self.hyperparameters.insert(name.to_string(), value);
        self
    }

    fn invalid(&self, name: &str, reason: &str) -> ModelError {
        ModelError::InvalidHyperparameter {
            family: self.family,
            name: name.to_string(),
            reason: reason.to_string(),
        }
    }

    pub fn f64_param(&self, name: &str, default: f64) -> Result<f64, ModelError> {
        match self.hyperparameters.get(name) {
            None => Ok(default),
            Some(ParamValue::Float(v)) => Ok(*v),
            Some(ParamValue::Int(v)) => Ok(*v as f64),
            Some(_) => Err(self.invalid(name, "expected a number")),
        }
    }

    pub fn usize_param(&self, name: &str, default: usize) -> Result<usize, ModelError> {
        match self.hyperparameters.get(name) {
            None => Ok(default),
            Some(ParamValue::Int(v)) if *v >= 0 => Ok(*v as usize),
            Some(_) => Err(self.invalid(name, "expected a non-negative integer")),
        }
    }

    pub fn opt_usize_param(&self, name: &str) -> Result<Option<usize>, ModelError> {
        match self.hyperparameters.get(name) {
            None => Ok(None),
            Some(ParamValue::Int(v)) if *v >= 0 => Ok(Some(*v as usize)),
            Some(ParamValue::Text(t)) if t == "none" => Ok(None),
            Some(_) => Err(self.invalid(name, "expected a non-negative integer or \"none\"")),
        }
    }

    /// Reject unknown names and out-of-range values for the family.
    pub fn validate(&self) -> Result<(), ModelError> {
        let allowed = self.family.allowed_params();
        for name in self.hyperparameters.keys() {
            if !allowed.contains(&name.as_str()) {
                return Err(self.invalid(name, "not a hyperparameter of this family"));
            }
        }
        match self.family {
            ModelFamily::LogisticRegression | ModelFamily::SupportVectorMachine => {
                if self.f64_param("C", 1.0)? <= 0.0 {
                    return Err(self.invalid("C", "must be > 0"));
                }
            }
            ModelFamily::GaussianNaiveBayes => {
                if self.f64_param("var_smoothing", 1e-9)? < 0.0 {
                    return Err(self.invalid("var_smoothing", "must be >= 0"));
                }
            }
            _ => {}
        }
        match self.family {
            ModelFamily::DecisionTree | ModelFamily::RandomForest => {
                if self.usize_param("min_samples_split", 2)? < 2 {
                    return Err(self.invalid("min_samples_split", "must be >= 2"));
                }
                if let Some(ParamValue::Text(c)) = self.hyperparameters.get("criterion") {
                    if c != "gini" {
                        return Err(self.invalid("criterion", "only \"gini\" is supported"));
                    }
                }
            }
            ModelFamily::NeuralNetwork => {
                if let Some(value) = self.hyperparameters.get("hidden_layer_sizes") {
                    match value {
                        ParamValue::IntList(sizes)
                            if !sizes.is_empty() && sizes.iter().all(|&s| s > 0) => {}
                        _ => {
                            return Err(self.invalid(
                                "hidden_layer_sizes",
                                "expected a non-empty list of positive integers",
                            ))
                        }
                    }
                }
            }
            ModelFamily::GradientBoosting => {
                if self.f64_param("learning_rate", 0.1)? <= 0.0 {
                    return Err(self.invalid("learning_rate", "must be > 0"));
                }
                if self.f64_param("reg_lambda", 1.0)? < 0.0 {
                    return Err(self.invalid("reg_lambda", "must be >= 0"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// A fitted classifier of any family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TrainedModel {
    Logistic(logistic::LogisticModel),
    NaiveBayes(naive_bayes::GaussianNbModel),
    Tree(tree::TreeModel),
    Forest(forest::ForestModel),
    Neural(neural::NeuralModel),
    Boosting(boosting::BoostingModel),
    Svm(svm::SvmModel),
}

impl TrainedModel {
    pub fn spec(&self) -> &ModelSpec {
        match self {
            TrainedModel::Logistic(m) => &m.spec,
            TrainedModel::NaiveBayes(m) => &m.spec,
            TrainedModel::Tree(m) => &m.spec,
            TrainedModel::Forest(m) => &m.spec,
            TrainedModel::Neural(m) => &m.spec,
            TrainedModel::Boosting(m) => &m.spec,
            TrainedModel::Svm(m) => &m.spec,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            TrainedModel::Logistic(m) => &m.feature_names,
            TrainedModel::NaiveBayes(m) => &m.feature_names,
            TrainedModel::Tree(m) => &m.feature_names,
            TrainedModel::Forest(m) => &m.feature_names,
            TrainedModel::Neural(m) => &m.feature_names,
            TrainedModel::Boosting(m) => &m.feature_names,
            TrainedModel::Svm(m) => &m.feature_names,
        }
    }

    /// Probability of the at-risk class for each instance, in [0, 1].
    pub fn predict_proba(&self, instances: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        let expected = self.feature_names().len();
        for row in instances {
            if row.len() != expected {
                return Err(ModelError::FeatureMismatch {
                    expected,
                    found: row.len(),
                });
            }
        }
        Ok(match self {
            TrainedModel::Logistic(m) => m.predict_proba(instances),
            TrainedModel::NaiveBayes(m) => m.predict_proba(instances),
            TrainedModel::Tree(m) => m.predict_proba(instances),
            TrainedModel::Forest(m) => m.predict_proba(instances),
            TrainedModel::Neural(m) => m.predict_proba(instances),
            TrainedModel::Boosting(m) => m.predict_proba(instances),
            TrainedModel::Svm(m) => m.predict_proba(instances),
        })
    }

    /// Class prediction at the fixed 0.5 threshold.
    pub fn predict(&self, instances: &[Vec<f64>]) -> Result<Vec<bool>, ModelError> {
        Ok(self
            .predict_proba(instances)?
            .into_iter()
            .map(|p| p >= 0.5)
            .collect())
    }
}

/// Train one model. `labels[i]` is true for at-risk instances.
pub fn train(
    spec: &ModelSpec,
    instances: &[Vec<f64>],
    labels: &[bool],
    feature_names: &[String],
) -> Result<TrainedModel, ModelError> {
    spec.validate()?;
    if instances.is_empty() || instances.len() != labels.len() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let expected = feature_names.len();
    for row in instances {
        if row.len() != expected {
            return Err(ModelError::FeatureMismatch {
                expected,
                found: row.len(),
            });
        }
    }
    let names = feature_names.to_vec();
    Ok(match spec.family {
        ModelFamily::LogisticRegression => {
            TrainedModel::Logistic(logistic::fit(spec, instances, labels, names)?)
        }
        ModelFamily::GaussianNaiveBayes => {
            TrainedModel::NaiveBayes(naive_bayes::fit(spec, instances, labels, names)?)
        }
        ModelFamily::DecisionTree => TrainedModel::Tree(tree::fit(spec, instances, labels, names)?),
        ModelFamily::RandomForest => {
            TrainedModel::Forest(forest::fit(spec, instances, labels, names)?)
        }
        ModelFamily::NeuralNetwork => {
            TrainedModel::Neural(neural::fit(spec, instances, labels, names)?)
        }
        ModelFamily::GradientBoosting => {
            TrainedModel::Boosting(boosting::fit(spec, instances, labels, names)?)
        }
        ModelFamily::SupportVectorMachine => {
            TrainedModel::Svm(svm::fit(spec, instances, labels, names)?)
        }
    })
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct PersistedModel {
    format_version: u32,
    model: TrainedModel,
}

/// Serialize a fitted model to versioned JSON.
pub fn model_to_json(model: &TrainedModel) -> Result<String, ModelError> {
    serde_json::to_string_pretty(&PersistedModel {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    })
    .map_err(|e| ModelError::Persistence(e.to_string()))
}

/// Load a fitted model back from its JSON form.
pub fn model_from_json(json: &str) -> Result<TrainedModel, ModelError> {
    let persisted: PersistedModel =
        serde_json::from_str(json).map_err(|e| ModelError::Persistence(e.to_string()))?;
    if persisted.format_version != MODEL_FORMAT_VERSION {
        return Err(ModelError::Persistence(format!(
            "unsupported model format version {}",
            persisted.format_version
        )));
    }
    Ok(persisted.model)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Gaussian elimination with partial pivoting; `None` if singular.
pub(crate) fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for k in row + 1..n {
            sum -= a[row][k] * x[k];
        }
        x[row] = sum / a[row][row];
    }
    Some(x)
}
