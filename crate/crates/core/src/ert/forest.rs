use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tree::{grow, Columns, TreeParams};
use super::{Regressor, Samples, TrainConfig};
use crate::error::{Error, Result};

/// A bag of regression trees; predictions are the unweighted mean of the
/// trees.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<super::Tree>,
    config: TrainConfig,
    feature_names: Vec<String>,
    /// Non-negative, sums to one (all zero when no split was ever made).
    importances: Vec<f64>,
}

/// Tree `i` draws from its own ChaCha stream, so adding trees never changes
/// the ones already grown.
pub(crate) fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

impl Forest {
    pub fn fit(samples: &Samples<'_>, config: &TrainConfig) -> Result<Self> {
        let p = samples.n_features();
        let k = config.validate(p)?;
        let cols = Columns::new(samples);
        let params = TreeParams {
            rule: config.split_rule,
            k,
            min_samples_leaf: config.min_samples_leaf,
            max_depth: config.max_depth,
        };
        let n = samples.len();
        if n > u32::MAX as usize {
            return Err(Error::InvalidConfig(format!("{n} samples exceed u32 indexing")));
        }

        let mut importances = vec![0.0; p];
        let mut per_tree = vec![0.0; p];
        let mut trees = Vec::with_capacity(config.n_trees);
        for t in 0..config.n_trees {
            let mut rng = tree_rng(config.seed, t);
            let idx: Vec<u32> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n as u32)).collect()
            } else {
                (0..n as u32).collect()
            };
            per_tree.iter_mut().for_each(|x| *x = 0.0);
            trees.push(grow(&cols, idx, &params, &mut rng, &mut per_tree));
            for (acc, d) in importances.iter_mut().zip(&per_tree) {
                *acc += d / n as f64;
            }
        }
        let total: f64 = importances.iter().sum();
        if total > 0.0 {
            importances.iter_mut().for_each(|x| *x /= total);
        }

        let feature_names = match samples.names() {
            Some(names) => names.iter().map(|s| s.to_string()).collect(),
            None => (0..p).map(|j| format!("f{j}")).collect(),
        };
        Ok(Self {
            trees,
            config: *config,
            feature_names,
            importances,
        })
    }

    /// Reassemble a forest from stored parts.
    pub fn from_parts(
        trees: Vec<super::Tree>,
        config: TrainConfig,
        feature_names: Vec<String>,
        importances: Vec<f64>,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::Inconsistent("forest has no trees".into()));
        }
        if importances.len() != feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: feature_names.len(),
                found: importances.len(),
            });
        }
        Ok(Self {
            trees,
            config,
            feature_names,
            importances,
        })
    }

    pub fn trees(&self) -> &[super::Tree] {
        &self.trees
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn importances(&self) -> &[f64] {
        &self.importances
    }
}

impl Regressor for Forest {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(x)).sum();
        sum / self.trees.len() as f64
    }
}

/// `(name, importance)` sorted descending; ties keep feature order.
pub fn feature_importances(forest: &Forest) -> Vec<(String, f64)> {
    let mut out: Vec<(usize, f64)> = forest.importances.iter().copied().enumerate().collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out.into_iter()
        .map(|(j, v)| (forest.feature_names[j].clone(), v))
        .collect()
}
