//! Tree ensembles and baseline regressors.
//!
//! [`Forest`] covers both extremely randomized trees (random thresholds,
//! best of `k` by variance reduction) and the classic best-split random
//! forest; [`SplitRule`] picks between them. Linear baselines live in
//! [`linear`].

mod forest;
pub mod linear;
mod tree;

use alloc::format;

pub use forest::{feature_importances, Forest};
pub use linear::{LinearModel, LinearPenalty};
pub use tree::{Node, Tree};

use crate::error::{Error, Result};

/// Borrowed training matrix: `targets.len()` rows of `n_features` values,
/// row-major.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    features: &'a [f64],
    targets: &'a [f64],
    n_features: usize,
    names: Option<&'a [&'a str]>,
}

impl<'a> Samples<'a> {
    pub fn new(features: &'a [f64], targets: &'a [f64], n_features: usize) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if n_features == 0 || features.len() != targets.len() * n_features {
            return Err(Error::DimensionMismatch {
                expected: targets.len() * n_features,
                found: features.len(),
            });
        }
        if let Some(row) = targets.iter().position(|y| !y.is_finite()) {
            return Err(Error::NonFiniteTarget { row });
        }
        Ok(Self {
            features,
            targets,
            n_features,
            names: None,
        })
    }

    pub fn with_names(mut self, names: &'a [&'a str]) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: names.len(),
            });
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn targets(&self) -> &'a [f64] {
        self.targets
    }

    pub fn features(&self) -> &'a [f64] {
        self.features
    }

    pub fn names(&self) -> Option<&'a [&'a str]> {
        self.names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitRule {
    /// One uniform threshold per candidate feature (extremely randomized).
    Random,
    /// Exhaustive search over midpoints of each candidate feature.
    Best,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub n_trees: usize,
    /// Candidate features per node; `None` means all of them.
    pub k_candidate_features: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
    pub split_rule: SplitRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_trees: 20,
            k_candidate_features: None,
            min_samples_leaf: 5,
            max_depth: None,
            bootstrap: false,
            seed: 0,
            split_rule: SplitRule::Random,
        }
    }
}

impl TrainConfig {
    pub fn extra_trees(n_trees: usize, seed: u64) -> Self {
        Self {
            n_trees,
            seed,
            ..Self::default()
        }
    }

    /// Bootstrapped best-split trees over a third of the features per node.
    pub fn random_forest(n_trees: usize, n_features: usize, seed: u64) -> Self {
        Self {
            n_trees,
            k_candidate_features: Some(n_features.div_ceil(3).max(1)),
            bootstrap: true,
            seed,
            split_rule: SplitRule::Best,
            ..Self::default()
        }
    }

    /// A single exhaustive CART-style regression tree.
    pub fn single_tree() -> Self {
        Self {
            n_trees: 1,
            k_candidate_features: None,
            bootstrap: false,
            split_rule: SplitRule::Best,
            ..Self::default()
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<usize> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be >= 1".into()));
        }
        let k = self.k_candidate_features.unwrap_or(n_features);
        if k == 0 || k > n_features {
            return Err(Error::InvalidConfig(format!(
                "k_candidate_features must be in 1..={n_features}, got {k}"
            )));
        }
        Ok(k)
    }
}

/// A fitted model mapping a feature row to a prediction.
pub trait Regressor {
    fn n_features(&self) -> usize;

    /// Caller guarantees `x.len() == self.n_features()`.
    fn predict_row(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        Ok(self.predict_row(x))
    }
}

/// Something that can be fitted to [`Samples`].
pub trait Learner {
    type Model: Regressor;

    fn fit(&self, samples: &Samples<'_>) -> Result<Self::Model>;
}

impl Learner for TrainConfig {
    type Model = Forest;

    fn fit(&self, samples: &Samples<'_>) -> Result<Forest> {
        Forest::fit(samples, self)
    }
}

/// The comparison learners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineModel {
    OrdinaryLeastSquares,
    Ridge(f64),
    Lasso(f64),
    SingleDecisionTree(TrainConfig),
    RandomForest(TrainConfig),
}

impl BaselineModel {
    pub fn label(&self) -> &'static str {
        match self {
            BaselineModel::OrdinaryLeastSquares => "linear_regression",
            BaselineModel::Ridge(_) => "ridge_regression",
            BaselineModel::Lasso(_) => "lasso_regression",
            BaselineModel::SingleDecisionTree(_) => "decision_tree",
            BaselineModel::RandomForest(_) => "random_forest",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedBaseline {
    Linear(LinearModel),
    Trees(Forest),
}

impl Regressor for FittedBaseline {
    fn n_features(&self) -> usize {
        match self {
            FittedBaseline::Linear(m) => m.n_features(),
            FittedBaseline::Trees(f) => f.n_features(),
        }
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            FittedBaseline::Linear(m) => m.predict_row(x),
            FittedBaseline::Trees(f) => f.predict_row(x),
        }
    }
}

impl Learner for BaselineModel {
    type Model = FittedBaseline;

    fn fit(&self, samples: &Samples<'_>) -> Result<FittedBaseline> {
        fit_baseline(samples, self)
    }
}

/// Fit one of the comparison learners. Linear models see sentinel values as
/// ordinary numbers.
pub fn fit_baseline(samples: &Samples<'_>, model: &BaselineModel) -> Result<FittedBaseline> {
    Ok(match *model {
        BaselineModel::OrdinaryLeastSquares => {
            FittedBaseline::Linear(LinearModel::fit(samples, LinearPenalty::None)?)
        }
        BaselineModel::Ridge(lambda) => {
            FittedBaseline::Linear(LinearModel::fit(samples, LinearPenalty::Ridge(lambda))?)
        }
        BaselineModel::Lasso(lambda) => {
            FittedBaseline::Linear(LinearModel::fit(samples, LinearPenalty::Lasso(lambda))?)
        }
        BaselineModel::SingleDecisionTree(cfg) | BaselineModel::RandomForest(cfg) => {
            FittedBaseline::Trees(Forest::fit(samples, &cfg)?)
        }
    })
}
