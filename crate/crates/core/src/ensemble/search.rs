//! Seeded random hyperparameter search.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ModelSpec, TreeParams};
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

impl IntRange {
    pub const fn point(v: usize) -> Self {
        Self { min: v, max: v }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        rng.random_range(self.min..=self.max)
    }
}

/// Closed real range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloatRange {
    pub min: f64,
    pub max: f64,
}

impl FloatRange {
    pub const fn point(v: f64) -> Self {
        Self { min: v, max: v }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub max_depth: IntRange,
    pub min_samples_leaf: IntRange,
    pub tree_count: IntRange,
    pub learning_rate: FloatRange,
    pub feature_subsample: FloatRange,
    pub row_subsample: FloatRange,
    pub max_leaves: IntRange,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            max_depth: IntRange { min: 2, max: 8 },
            min_samples_leaf: IntRange { min: 1, max: 20 },
            tree_count: IntRange { min: 50, max: 300 },
            learning_rate: FloatRange { min: 0.02, max: 0.2 },
            feature_subsample: FloatRange { min: 0.5, max: 1.0 },
            row_subsample: FloatRange { min: 0.6, max: 1.0 },
            max_leaves: IntRange { min: 4, max: 63 },
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let ints = [
            ("max_depth", self.max_depth, 0),
            ("min_samples_leaf", self.min_samples_leaf, 1),
            ("tree_count", self.tree_count, 1),
            ("max_leaves", self.max_leaves, 1),
        ];
        for (name, r, floor) in ints {
            if r.min > r.max {
                return Err(Error::Config(format!("search range {name} is empty ({} > {})", r.min, r.max)));
            }
            if r.min < floor {
                return Err(Error::Config(format!("search range {name} must start at {floor} or above")));
            }
        }
        let floats = [
            ("learning_rate", self.learning_rate),
            ("feature_subsample", self.feature_subsample),
            ("row_subsample", self.row_subsample),
        ];
        for (name, r) in floats {
            if !(r.min <= r.max) {
                return Err(Error::Config(format!("search range {name} is empty ({} > {})", r.min, r.max)));
            }
            if !(r.min > 0.0 && r.max <= 1.0) {
                return Err(Error::Config(format!("search range {name} must lie in (0, 1]")));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> HyperParams {
        HyperParams {
            max_depth: self.max_depth.sample(rng),
            min_samples_leaf: self.min_samples_leaf.sample(rng),
            tree_count: self.tree_count.sample(rng),
            learning_rate: self.learning_rate.sample(rng),
            feature_subsample: self.feature_subsample.sample(rng),
            row_subsample: self.row_subsample.sample(rng),
            max_leaves: self.max_leaves.sample(rng),
        }
    }
}

/// One point of a [`SearchSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub tree_count: usize,
    pub learning_rate: f64,
    pub feature_subsample: f64,
    pub row_subsample: f64,
    pub max_leaves: usize,
}

impl ModelSpec {
    /// A copy with its tunable fields replaced; fields the model kind does
    /// not have are ignored.
    pub fn with_hyperparams(&self, hp: &HyperParams) -> ModelSpec {
        let tree = |t: &TreeParams| TreeParams {
            max_depth: Some(hp.max_depth),
            min_samples_leaf: hp.min_samples_leaf,
            max_leaves: Some(hp.max_leaves),
            feature_subsample: hp.feature_subsample,
            growth: t.growth,
        };
        match self {
            ModelSpec::SingleTree(t) => ModelSpec::SingleTree(TreeParams { feature_subsample: 1.0, ..tree(t) }),
            ModelSpec::Forest(f) => {
                ModelSpec::Forest(super::ForestParams { tree: tree(&f.tree), tree_count: hp.tree_count, ..*f })
            }
            ModelSpec::Boosted(b) => ModelSpec::Boosted(super::BoostParams {
                tree: tree(&b.tree),
                tree_count: hp.tree_count,
                learning_rate: hp.learning_rate,
                row_subsample: hp.row_subsample,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: HyperParams,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: HyperParams,
    pub best_score: f64,
    pub best_index: usize,
    pub trace: Vec<Trial>,
}

/// Evaluates `budget` configurations drawn uniformly from `space` and
/// returns the lowest-scoring one (earliest on ties; NaN never wins).
pub fn random_search<F>(space: &SearchSpace, budget: usize, mut objective: F, seed: u64) -> Result<SearchOutcome>
where
    F: FnMut(&HyperParams) -> Result<f64>,
{
    space.validate()?;
    if budget == 0 {
        return Err(Error::InvalidParameter("search budget must be at least 1".into()));
    }
    let mut rng = rng_for(seed, "search", 0);
    let mut trace: Vec<Trial> = Vec::with_capacity(budget);
    let mut best_index = 0;
    for index in 0..budget {
        let params = space.sample(&mut rng);
        let score = objective(&params)?;
        if index > 0 && !score.is_nan() {
            let incumbent = trace[best_index].score;
            if incumbent.is_nan() || score < incumbent {
                best_index = index;
            }
        }
        trace.push(Trial { index, params, score });
    }
    let best = &trace[best_index];
    Ok(SearchOutcome { best: best.params, best_score: best.score, best_index, trace })
}

pub fn write_trace<W: Write>(out: W, trace: &[Trial]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "max_depth",
        "min_samples_leaf",
        "tree_count",
        "learning_rate",
        "feature_subsample",
        "row_subsample",
        "max_leaves",
        "score",
    ])?;
    for t in trace {
        let p = &t.params;
        w.write_record([
            t.index.to_string(),
            p.max_depth.to_string(),
            p.min_samples_leaf.to_string(),
            p.tree_count.to_string(),
            p.learning_rate.to_string(),
            p.feature_subsample.to_string(),
            p.row_subsample.to_string(),
            p.max_leaves.to_string(),
            t.score.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
