//! JSON model files.
//!
//! Layout: `format_version`, `kind`, `growth`, `spec` (the hyperparameters),
//! `feature_names`, `learning_rate`, `base_prediction` and `trees`, where
//! each tree is a set of parallel node arrays. Leaves have `feature = -1`
//! and child indices `-1`; internal nodes carry `value = 0`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EnsembleKind, Growth, ModelSpec, Node, Tree, TreeEnsemble};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatTree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub gain: Vec<f64>,
    pub left: Vec<i64>,
    pub right: Vec<i64>,
    pub value: Vec<f64>,
    pub sample_count: Vec<u64>,
}

impl From<&Tree> for FlatTree {
    fn from(tree: &Tree) -> Self {
        let n = tree.nodes.len();
        let mut flat = FlatTree {
            feature: Vec::with_capacity(n),
            threshold: Vec::with_capacity(n),
            gain: Vec::with_capacity(n),
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            value: Vec::with_capacity(n),
            sample_count: Vec::with_capacity(n),
        };
        for node in &tree.nodes {
            match *node {
                Node::Internal { feature, threshold, gain, left, right, sample_count } => {
                    flat.feature.push(feature as i64);
                    flat.threshold.push(threshold);
                    flat.gain.push(gain);
                    flat.left.push(left as i64);
                    flat.right.push(right as i64);
                    flat.value.push(0.0);
                    flat.sample_count.push(sample_count as u64);
                }
                Node::Leaf { prediction, sample_count } => {
                    flat.feature.push(-1);
                    flat.threshold.push(0.0);
                    flat.gain.push(0.0);
                    flat.left.push(-1);
                    flat.right.push(-1);
                    flat.value.push(prediction);
                    flat.sample_count.push(sample_count as u64);
                }
            }
        }
        flat
    }
}

impl FlatTree {
    /// Rebuilds the tree. Children must come after their parent, which rules
    /// out cycles.
    pub fn to_tree(&self, n_features: usize) -> Result<Tree> {
        let n = self.feature.len();
        let lens = [self.threshold.len(), self.gain.len(), self.left.len(), self.right.len(), self.value.len(), self.sample_count.len()];
        if n == 0 || lens.iter().any(|&l| l != n) {
            return Err(Error::InvalidRecord("tree node arrays are empty or of unequal length".into()));
        }
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let sample_count = self.sample_count[i] as usize;
            if self.feature[i] < 0 {
                nodes.push(Node::Leaf { prediction: self.value[i], sample_count });
                continue;
            }
            let feature = self.feature[i] as usize;
            let (left, right) = (self.left[i], self.right[i]);
            let child_ok = |c: i64| c > i as i64 && (c as usize) < n;
            if feature >= n_features || !child_ok(left) || !child_ok(right) {
                return Err(Error::InvalidRecord(format!("tree node {i} has an invalid feature or child index")));
            }
            if !(self.gain[i] >= 0.0) {
                return Err(Error::InvalidRecord(format!("tree node {i} has negative gain")));
            }
            nodes.push(Node::Internal {
                feature,
                threshold: self.threshold[i],
                gain: self.gain[i],
                left: left as usize,
                right: right as usize,
                sample_count,
            });
        }
        Ok(Tree { nodes })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub kind: EnsembleKind,
    pub growth: Growth,
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub learning_rate: f64,
    pub base_prediction: f64,
    pub trees: Vec<FlatTree>,
}

impl From<&TreeEnsemble> for ModelFile {
    fn from(m: &TreeEnsemble) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            kind: m.kind,
            growth: m.growth(),
            spec: m.spec,
            feature_names: m.feature_names.clone(),
            learning_rate: m.learning_rate,
            base_prediction: m.base_prediction,
            trees: m.trees.iter().map(FlatTree::from).collect(),
        }
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<TreeEnsemble> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "model format version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let n_features = self.feature_names.len();
        let trees = self.trees.iter().map(|t| t.to_tree(n_features)).collect::<Result<Vec<_>>>()?;
        Ok(TreeEnsemble {
            kind: self.kind,
            spec: self.spec,
            feature_names: self.feature_names,
            trees,
            learning_rate: self.learning_rate,
            base_prediction: self.base_prediction,
        })
    }
}

pub fn to_json(model: &TreeEnsemble) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelFile::from(model))?)
}

pub fn from_json(text: &str) -> Result<TreeEnsemble> {
    serde_json::from_str::<ModelFile>(text)?.into_model()
}

pub fn save_model(path: impl AsRef<Path>, model: &TreeEnsemble) -> Result<()> {
    let mut text = to_json(model)?;
    text.push('\n');
    crate::io::write_atomic(path, text.as_bytes())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TreeEnsemble> {
    from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::FeatureMatrix;

    #[test]
    fn round_trip_is_exact() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![f64::from(i) * 0.1, f64::from(i % 4)]).collect();
        let y: Vec<f64> = (0..30).map(|i| (f64::from(i) * 0.37).sin() * 100.0).collect();
        let x = FeatureMatrix::from_rows(vec!["a".into(), "b".into()], &rows, y).unwrap();
        for name in ModelSpec::PRESETS {
            let spec = ModelSpec::preset(name).unwrap();
            let m = spec.fit(&x, 5).unwrap();
            let text = to_json(&m).unwrap();
            assert!(text.contains("\"format_version\": 1"));
            let back = from_json(&text).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn rejects_bad_files() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![f64::from(i)]).collect();
        let x = FeatureMatrix::from_rows(vec!["a".into()], &rows, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let m = ModelSpec::SingleTree(super::super::TreeParams::default()).fit(&x, 0).unwrap();
        let mut file = ModelFile::from(&m);
        file.format_version = 99;
        assert!(matches!(file.clone().into_model(), Err(Error::Schema(_))));
        file.format_version = FORMAT_VERSION;
        file.trees[0].left[0] = 0;
        assert!(file.into_model().is_err());
    }
}
