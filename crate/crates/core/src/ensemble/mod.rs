//! From-scratch regression trees and tree ensembles under squared error.
//!
//! Three model kinds share one splitter ([`tree`]): a single CART tree, a
//! bagged random forest and stagewise gradient boosting. Boosting grows its
//! trees either level by level (depth-capped) or best-first by gain
//! (leaf-capped). Evaluation helpers live in [`metrics`], [`cv`] and
//! [`search`]; [`model_io`] persists fitted models as JSON.

pub mod cv;
pub mod metrics;
pub mod model_io;
pub mod search;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::seed::rng_for;

pub use tree::{fit_tree, fit_tree_ordered, fit_tree_rows, ColumnOrder, Growth, Node, Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    SingleTree,
    Forest,
    Boosted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub tree: TreeParams,
    pub tree_count: usize,
    /// Resample rows with replacement for every tree.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            tree: TreeParams { feature_subsample: 0.5, ..TreeParams::default() },
            tree_count: 100,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub tree: TreeParams,
    pub tree_count: usize,
    pub learning_rate: f64,
    /// Fraction of rows drawn without replacement for each stage, in (0, 1].
    pub row_subsample: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            tree: TreeParams { max_depth: Some(3), ..TreeParams::default() },
            tree_count: 100,
            learning_rate: 0.1,
            row_subsample: 1.0,
        }
    }
}

/// What to fit: the model kind with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    SingleTree(TreeParams),
    Forest(ForestParams),
    Boosted(BoostParams),
}

impl ModelSpec {
    /// Preset model variants: `decision_tree`, `random_forest`,
    /// `boosted_level` (depth-capped trees) and `boosted_leaf` (leaf-capped,
    /// best-first trees).
    pub fn preset(name: &str) -> Result<Self> {
        Ok(match name {
            "decision_tree" => ModelSpec::SingleTree(TreeParams { max_depth: Some(8), min_samples_leaf: 5, ..Default::default() }),
            "random_forest" => ModelSpec::Forest(ForestParams {
                tree: TreeParams { max_depth: Some(12), min_samples_leaf: 2, feature_subsample: 0.5, ..Default::default() },
                tree_count: 100,
                bootstrap: true,
            }),
            "boosted_level" => ModelSpec::Boosted(BoostParams {
                tree: TreeParams { max_depth: Some(4), min_samples_leaf: 5, ..Default::default() },
                tree_count: 200,
                learning_rate: 0.05,
                row_subsample: 0.8,
            }),
            "boosted_leaf" => ModelSpec::Boosted(BoostParams {
                tree: TreeParams {
                    max_leaves: Some(15),
                    min_samples_leaf: 10,
                    growth: Growth::LeafWise,
                    ..Default::default()
                },
                tree_count: 200,
                learning_rate: 0.05,
                row_subsample: 0.8,
            }),
            other => return Err(Error::Config(format!("unknown model preset {other:?}"))),
        })
    }

    pub const PRESETS: [&'static str; 4] = ["decision_tree", "random_forest", "boosted_level", "boosted_leaf"];

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::SingleTree(t) => t.validate(),
            ModelSpec::Forest(f) => {
                f.tree.validate()?;
                if f.tree_count == 0 {
                    return Err(Error::InvalidParameter("tree_count must be at least 1".into()));
                }
                Ok(())
            }
            ModelSpec::Boosted(b) => {
                b.tree.validate()?;
                if b.tree_count == 0 {
                    return Err(Error::InvalidParameter("tree_count must be at least 1".into()));
                }
                if !(b.learning_rate > 0.0 && b.learning_rate <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "learning_rate must be in (0, 1], got {}",
                        b.learning_rate
                    )));
                }
                if !(b.row_subsample > 0.0 && b.row_subsample <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "row_subsample must be in (0, 1], got {}",
                        b.row_subsample
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn tree_params(&self) -> &TreeParams {
        match self {
            ModelSpec::SingleTree(t) => t,
            ModelSpec::Forest(f) => &f.tree,
            ModelSpec::Boosted(b) => &b.tree,
        }
    }

    pub fn fit(&self, x: &FeatureMatrix, seed: u64) -> Result<TreeEnsemble> {
        match self {
            ModelSpec::SingleTree(p) => {
                let tree = fit_tree(x, p, &mut rng_for(seed, "tree", 0))?;
                Ok(TreeEnsemble {
                    kind: EnsembleKind::SingleTree,
                    spec: *self,
                    feature_names: x.columns().to_vec(),
                    trees: vec![tree],
                    learning_rate: 1.0,
                    base_prediction: 0.0,
                })
            }
            ModelSpec::Forest(p) => fit_forest(x, p, seed),
            ModelSpec::Boosted(p) => fit_boosted(x, p, seed),
        }
    }
}

/// A fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub kind: EnsembleKind,
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
    /// Shrinkage applied to every boosted stage (1 otherwise).
    pub learning_rate: f64,
    /// Starting value of a boosted model (0 otherwise).
    pub base_prediction: f64,
}

impl TreeEnsemble {
    pub fn growth(&self) -> Growth {
        self.spec.tree_params().growth
    }

    /// A boosted model with no stages is valid (it predicts its base);
    /// other kinds need at least one tree.
    pub fn is_fitted(&self) -> bool {
        !self.trees.is_empty() || self.kind == EnsembleKind::Boosted
    }

    pub fn check_columns(&self, x: &FeatureMatrix) -> Result<()> {
        if x.columns() != self.feature_names.as_slice() {
            return Err(Error::Schema(format!(
                "model expects columns {:?}, data has {:?}",
                self.feature_names,
                x.columns()
            )));
        }
        Ok(())
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_row_stages(row, self.trees.len())
    }

    fn predict_row_stages(&self, row: &[f64], stages: usize) -> f64 {
        let trees = &self.trees[..stages.min(self.trees.len())];
        match self.kind {
            EnsembleKind::SingleTree | EnsembleKind::Forest => {
                trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / trees.len() as f64
            }
            EnsembleKind::Boosted => {
                self.base_prediction + self.learning_rate * trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
            }
        }
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.predict_stages(x, self.trees.len())
    }

    /// Predictions using only the first `stages` trees.
    pub fn predict_stages(&self, x: &FeatureMatrix, stages: usize) -> Result<Vec<f64>> {
        if !self.is_fitted() {
            return Err(Error::NotFitted);
        }
        self.check_columns(x)?;
        Ok(crate::par::map_indexed(x.n_rows(), |r| self.predict_row_stages(x.row(r), stages)))
    }
}

pub fn fit_forest(x: &FeatureMatrix, params: &ForestParams, seed: u64) -> Result<TreeEnsemble> {
    let spec = ModelSpec::Forest(*params);
    spec.validate()?;
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::InsufficientData("cannot fit a forest on zero rows".into()));
    }
    let order = ColumnOrder::new(x);
    let trees = crate::par::map_indexed(params.tree_count, |i| {
        let mut rng = rng_for(seed, "forest-tree", i as u64);
        let rows: Vec<usize> = if params.bootstrap {
            use rand::Rng;
            let mut r: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        fit_tree_ordered(x, x.target(), &rows, &params.tree, &mut rng, &order)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(TreeEnsemble {
        kind: EnsembleKind::Forest,
        spec,
        feature_names: x.columns().to_vec(),
        trees,
        learning_rate: 1.0,
        base_prediction: 0.0,
    })
}

pub fn fit_boosted(x: &FeatureMatrix, params: &BoostParams, seed: u64) -> Result<TreeEnsemble> {
    let spec = ModelSpec::Boosted(*params);
    spec.validate()?;
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::InsufficientData("cannot fit a boosted model on zero rows".into()));
    }
    let y = x.target();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut fitted = vec![base; n];
    let mut residual = vec![0.0; n];
    let take = ((params.row_subsample * n as f64).round() as usize).clamp(1, n);
    let mut trees = Vec::with_capacity(params.tree_count);
    let order = ColumnOrder::new(x);
    for stage in 0..params.tree_count {
        let mut rng = rng_for(seed, "boost-stage", stage as u64);
        for i in 0..n {
            residual[i] = y[i] - fitted[i];
        }
        let rows: Vec<usize> = if take < n {
            let mut r = rand::seq::index::sample(&mut rng, n, take).into_vec();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let tree = fit_tree_ordered(x, &residual, &rows, &params.tree, &mut rng, &order)?;
        for (i, f) in fitted.iter_mut().enumerate() {
            *f += params.learning_rate * tree.predict_row(x.row(i));
        }
        trees.push(tree);
    }
    Ok(TreeEnsemble {
        kind: EnsembleKind::Boosted,
        spec,
        feature_names: x.columns().to_vec(),
        trees,
        learning_rate: params.learning_rate,
        base_prediction: base,
    })
}
