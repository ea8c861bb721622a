//! k-fold cross-validation, hold-out evaluation and learning curves.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{mae, mape};
use super::ModelSpec;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::seed::{derive_seed, rng_for};

/// Shuffles `0..n` with the seed and cuts it into `k` contiguous folds whose
/// sizes differ by at most one (the first `n % k` folds get the extra row).
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    if n < k {
        return Err(Error::InsufficientData(format!("{n} rows cannot form {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, "cv-shuffle", 0));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub rows: usize,
    pub mae: f64,
    pub mape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldScore>,
    pub mean_mae: f64,
    pub mean_mape: f64,
}

/// Trains on k−1 folds and scores the held-out fold, for every fold. Folds
/// run in parallel; each fold's model seed derives from `seed` and the fold
/// index.
pub fn cross_validate(x: &FeatureMatrix, spec: &ModelSpec, k: usize, seed: u64) -> Result<CvResult> {
    spec.validate()?;
    let folds = fold_assignment(x.n_rows(), k, seed)?;
    let scores = crate::par::map_indexed(k, |f| -> Result<FoldScore> {
        let train: Vec<usize> =
            folds.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, rows)| rows.iter().copied()).collect();
        let test = &folds[f];
        let model = spec.fit(&x.select_rows(&train), derive_seed(seed, "cv-model", f as u64))?;
        let held = x.select_rows(test);
        let pred = model.predict(&held)?;
        Ok(FoldScore { fold: f, rows: test.len(), mae: mae(held.target(), &pred)?, mape: mape(held.target(), &pred)? })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mean_mae = scores.iter().map(|s| s.mae).sum::<f64>() / k as f64;
    let mean_mape = scores.iter().map(|s| s.mape).sum::<f64>() / k as f64;
    Ok(CvResult { folds: scores, mean_mae, mean_mape })
}

pub fn write_cv<W: Write>(out: W, result: &CvResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["fold", "rows", "mae", "mape"])?;
    for s in &result.folds {
        w.write_record([s.fold.to_string(), s.rows.to_string(), s.mae.to_string(), s.mape.to_string()])?;
    }
    w.write_record(["mean".to_string(), String::new(), result.mean_mae.to_string(), result.mean_mape.to_string()])?;
    w.flush()?;
    Ok(())
}

/// Seeded hold-out split: `(training order, validation rows)`.
pub fn holdout_split(n: usize, validation_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "validation fraction must be in (0, 1), got {validation_fraction}"
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} rows cannot be split for validation")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, "holdout", 0));
    let n_valid = ((validation_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let train = order.split_off(n_valid);
    Ok((train, order))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub train_rows: usize,
    pub mae: f64,
    pub mape: f64,
}

fn evaluate(x: &FeatureMatrix, spec: &ModelSpec, train: &[usize], valid: &[usize], seed: u64) -> Result<Evaluation> {
    let model = spec.fit(&x.select_rows(train), derive_seed(seed, "holdout-model", 0))?;
    let held = x.select_rows(valid);
    let pred = model.predict(&held)?;
    Ok(Evaluation { train_rows: train.len(), mae: mae(held.target(), &pred)?, mape: mape(held.target(), &pred)? })
}

/// Fits on the training part of [`holdout_split`] and scores the rest.
pub fn train_validate(x: &FeatureMatrix, spec: &ModelSpec, validation_fraction: f64, seed: u64) -> Result<Evaluation> {
    spec.validate()?;
    let (train, valid) = holdout_split(x.n_rows(), validation_fraction, seed)?;
    evaluate(x, spec, &train, &valid, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub train_rows: usize,
    pub validation_mae: f64,
}

/// Validation MAE of models trained on growing prefixes of one shuffled
/// training set, so each smaller training set is a subset of the larger ones.
/// A fraction uses `floor(fraction · training rows)` rows.
pub fn learning_curve(
    x: &FeatureMatrix,
    spec: &ModelSpec,
    fractions: &[f64],
    validation_fraction: f64,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    spec.validate()?;
    if fractions.is_empty() {
        return Err(Error::InvalidParameter("no learning-curve fractions".into()));
    }
    for w in fractions.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::InvalidParameter("learning-curve fractions must be strictly ascending".into()));
        }
    }
    if fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::InvalidParameter("learning-curve fractions must lie in (0, 1]".into()));
    }
    let (train, valid) = holdout_split(x.n_rows(), validation_fraction, seed)?;
    let sizes: Vec<usize> = fractions.iter().map(|&f| (f * train.len() as f64).floor() as usize).collect();
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::InsufficientData(format!(
            "fraction {} of {} training rows leaves an empty training set",
            fractions[i],
            train.len()
        )));
    }
    let points = crate::par::map_indexed(fractions.len(), |i| {
        evaluate(x, spec, &train[..sizes[i]], &valid, seed)
            .map(|e| CurvePoint { fraction: fractions[i], train_rows: e.train_rows, validation_mae: e.mae })
    });
    points.into_iter().collect()
}

pub fn write_curve<W: Write>(out: W, points: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["fraction", "train_rows", "validation_mae"])?;
    for p in points {
        w.write_record([p.fraction.to_string(), p.train_rows.to_string(), p.validation_mae.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
