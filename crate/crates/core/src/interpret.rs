//! Importance and partial-dependence diagnostics for fitted ensembles.
//!
//! Split importance counts the internal nodes that use a feature across all
//! trees and averages their gains. Permutation importance is the increase in
//! a metric after shuffling one column (positive means the model relies on
//! it). Partial dependence sweeps one feature over a quantile grid and
//! averages predictions over all rows.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::ensemble::metrics::Metric;
use crate::ensemble::TreeEnsemble;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::property_prep::quantile_sorted;
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub split_count: usize,
    pub mean_gain: f64,
    pub permutation_delta: Option<f64>,
    pub permutation_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub entries: Vec<FeatureImportance>,
}

impl ImportanceReport {
    pub fn get(&self, feature: &str) -> Option<&FeatureImportance> {
        self.entries.iter().find(|e| e.feature == feature)
    }

    /// Copies the permutation scores into the matching entries.
    pub fn with_permutation(mut self, scores: &[PermutationScore]) -> Result<Self> {
        for s in scores {
            let e = self
                .entries
                .iter_mut()
                .find(|e| e.feature == s.feature)
                .ok_or_else(|| Error::Schema(format!("no importance entry for {:?}", s.feature)))?;
            e.permutation_delta = Some(s.mean_delta);
            e.permutation_std = Some(s.std_delta);
        }
        Ok(self)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "split_count", "mean_gain", "permutation_delta", "permutation_std"])?;
        for e in &self.entries {
            w.write_record([
                e.feature.clone(),
                e.split_count.to_string(),
                e.mean_gain.to_string(),
                opt(e.permutation_delta),
                opt(e.permutation_std),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn split_and_gain_importance(model: &TreeEnsemble) -> Result<ImportanceReport> {
    if !model.is_fitted() {
        return Err(Error::NotFitted);
    }
    let p = model.feature_names.len();
    let mut counts = vec![0usize; p];
    let mut gains = vec![0.0f64; p];
    for tree in &model.trees {
        for (feature, gain) in tree.internal_nodes() {
            counts[feature] += 1;
            gains[feature] += gain;
        }
    }
    let entries = model
        .feature_names
        .iter()
        .enumerate()
        .map(|(f, name)| FeatureImportance {
            feature: name.clone(),
            split_count: counts[f],
            mean_gain: if counts[f] == 0 { 0.0 } else { gains[f] / counts[f] as f64 },
            permutation_delta: None,
            permutation_std: None,
        })
        .collect();
    Ok(ImportanceReport { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationScore {
    pub feature: String,
    pub deltas: Vec<f64>,
    pub mean_delta: f64,
    /// Population standard deviation over repeats.
    pub std_delta: f64,
}

/// `metric(shuffled) − metric(baseline)` per feature and repeat. The shuffle
/// of feature `f` in repeat `r` is seeded from `(seed, f, r)`, so results do
/// not depend on scheduling.
pub fn permutation_importance(
    model: &TreeEnsemble,
    x: &FeatureMatrix,
    metric: Metric,
    repeats: usize,
    seed: u64,
) -> Result<Vec<PermutationScore>> {
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    let baseline_pred = model.predict(x)?;
    let baseline = metric.compute(x.target(), &baseline_pred)?;
    let p = x.n_cols();
    let deltas = crate::par::map_indexed(p * repeats, |job| -> Result<f64> {
        let (f, r) = (job / repeats, job % repeats);
        let mut column = x.column(f);
        column.shuffle(&mut rng_for(seed, "permutation", ((f as u64) << 32) | r as u64));
        let pred: Vec<f64> = (0..x.n_rows())
            .map(|i| {
                let mut row = x.row(i).to_vec();
                row[f] = column[i];
                model.predict_row(&row)
            })
            .collect();
        Ok(metric.compute(x.target(), &pred)? - baseline)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok((0..p)
        .map(|f| {
            let d = deltas[f * repeats..(f + 1) * repeats].to_vec();
            let mean = d.iter().sum::<f64>() / repeats as f64;
            let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / repeats as f64;
            PermutationScore { feature: x.columns()[f].clone(), deltas: d, mean_delta: mean, std_delta: var.sqrt() }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceCurve {
    pub feature: String,
    pub grid: Vec<f64>,
    pub mean_prediction: Vec<f64>,
}

impl DependenceCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "value", "mean_prediction"])?;
        for (v, m) in self.grid.iter().zip(&self.mean_prediction) {
            w.write_record([self.feature.clone(), v.to_string(), m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Fraction of adjacent grid pairs whose prediction moves in the
    /// direction of `sign` (> 0 rising, < 0 falling).
    pub fn slope_agreement(&self, sign: f64) -> f64 {
        let pairs = self.mean_prediction.windows(2);
        let n = pairs.len();
        if n == 0 {
            return 0.0;
        }
        pairs.filter(|w| (w[1] - w[0]) * sign > 0.0).count() as f64 / n as f64
    }
}

/// `grid_size` quantiles of the column at probabilities `k / (grid_size − 1)`
/// (linear interpolation), with repeated values removed.
pub fn quantile_grid(values: &[f64], grid_size: usize) -> Result<Vec<f64>> {
    if grid_size < 2 {
        return Err(Error::InvalidParameter(format!("grid_size must be at least 2, got {grid_size}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidRecord("feature column contains non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    match (sorted.first(), sorted.last()) {
        (Some(lo), Some(hi)) if lo < hi => {}
        _ => {
            return Err(Error::DegenerateGrid(
                "feature is constant over the data, so a dependence grid has a single point".into(),
            ))
        }
    }
    let mut grid: Vec<f64> =
        (0..grid_size).map(|k| quantile_sorted(&sorted, k as f64 / (grid_size - 1) as f64)).collect();
    grid.dedup();
    Ok(grid)
}

pub fn partial_dependence(
    model: &TreeEnsemble,
    x: &FeatureMatrix,
    feature: &str,
    grid_size: usize,
) -> Result<DependenceCurve> {
    model.check_columns(x)?;
    let f = x.column_index(feature).ok_or_else(|| Error::Schema(format!("no feature {feature:?}")))?;
    let grid = quantile_grid(&x.column(f), grid_size)?;
    let n = x.n_rows();
    let mean_prediction = crate::par::map_indexed(grid.len(), |g| {
        let mut row = vec![0.0; x.n_cols()];
        let total: f64 = (0..n)
            .map(|i| {
                row.copy_from_slice(x.row(i));
                row[f] = grid[g];
                model.predict_row(&row)
            })
            .sum();
        total / n as f64
    });
    Ok(DependenceCurve { feature: feature.to_string(), grid, mean_prediction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{fit_forest, ForestParams, ModelSpec, Node, TreeParams};

    fn step_fixture() -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = (1..=8).map(|i| vec![f64::from(i), f64::from(i % 3)]).collect();
        let y: Vec<f64> = (1..=8).map(|i| if i < 5 { 0.0 } else { 10.0 }).collect();
        FeatureMatrix::from_rows(vec!["x".into(), "z".into()], &rows, y).unwrap()
    }

    fn stump() -> ModelSpec {
        ModelSpec::SingleTree(TreeParams { max_depth: Some(1), ..Default::default() })
    }

    #[test]
    fn stump_importance() {
        let m = stump().fit(&step_fixture(), 0).unwrap();
        let r = split_and_gain_importance(&m).unwrap();
        assert_eq!(r.entries[0].split_count, 1);
        assert_eq!(r.entries[1].split_count, 0);
        assert_eq!(r.entries[1].mean_gain, 0.0);
        // SSE 200 at the root, 0 in both leaves
        assert!((r.entries[0].mean_gain - 200.0).abs() < 1e-9);
    }

    #[test]
    fn two_stumps_in_a_forest() {
        let x = step_fixture();
        let p = ForestParams { tree: TreeParams { max_depth: Some(1), ..Default::default() }, tree_count: 2, bootstrap: false };
        let m = fit_forest(&x, &p, 0).unwrap();
        let gain = match m.trees[0].nodes[0] {
            Node::Internal { gain, .. } => gain,
            Node::Leaf { .. } => panic!("expected a stump"),
        };
        let r = split_and_gain_importance(&m).unwrap();
        assert_eq!(r.entries[0].split_count, 2);
        assert_eq!(r.entries[0].mean_gain, gain);
    }

    #[test]
    fn unfitted_and_constant_models() {
        let x = step_fixture();
        let mut m = stump().fit(&x, 0).unwrap();
        let c = stump().fit(&x.clone().with_target(vec![3.0; 8]).unwrap(), 0).unwrap();
        let r = split_and_gain_importance(&c).unwrap();
        assert!(r.entries.iter().all(|e| e.split_count == 0 && e.mean_gain == 0.0));
        m.trees.clear();
        assert!(matches!(split_and_gain_importance(&m), Err(Error::NotFitted)));
    }

    #[test]
    fn unused_feature_has_zero_delta() {
        let x = step_fixture();
        let m = stump().fit(&x, 0).unwrap();
        let s = permutation_importance(&m, &x, Metric::Mae, 5, 1).unwrap();
        assert!(s[1].deltas.iter().all(|&d| d == 0.0));
        assert!(s[0].mean_delta >= 0.0);
        let again = permutation_importance(&m, &x, Metric::Mae, 1, 9).unwrap();
        assert_eq!(again, permutation_importance(&m, &x, Metric::Mae, 1, 9).unwrap());
    }

    #[test]
    fn stump_dependence_is_a_step() {
        let x = step_fixture();
        let m = stump().fit(&x, 0).unwrap();
        let curve = partial_dependence(&m, &x, "x", 8).unwrap();
        assert_eq!(curve.grid.first(), Some(&1.0));
        assert_eq!(curve.grid.last(), Some(&8.0));
        assert_eq!(curve.mean_prediction.first(), Some(&0.0));
        assert_eq!(curve.mean_prediction.last(), Some(&10.0));
        let flat = partial_dependence(&m, &x, "z", 5).unwrap();
        let mean = m.predict(&x).unwrap().iter().sum::<f64>() / 8.0;
        assert!(flat.mean_prediction.iter().all(|&v| (v - mean).abs() < 1e-12));
    }

    #[test]
    fn constant_feature_grid_is_degenerate() {
        let x = step_fixture().with_column("k", &[2.0; 8]).unwrap();
        let m = stump().fit(&x, 0).unwrap();
        assert!(matches!(partial_dependence(&m, &x, "k", 5), Err(Error::DegenerateGrid(_))));
        assert!(matches!(partial_dependence(&m, &x, "nope", 5), Err(Error::Schema(_))));
    }
}
