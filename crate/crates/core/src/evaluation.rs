//! Accuracy scoring, k-fold cross-validation with grid search, and
//! experiment reports.
//!
//! Accuracy over a test set credits, for every collapsed tuple, the outcome
//! count on the predicted side, normalized by the total outcome count:
//! `A = sum(n_a * 1[predict a] + n_b * 1[predict b]) / sum(n_a + n_b)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{split_folds, Dataset};
use crate::error::{Error, Result};
use crate::intransitivity::{stats_summary, IntransSummary};
use crate::models::{MatchupModel, ModelKind};
use crate::training::{train_model, TrainConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Average test accuracy of a model on a collapsed test set.
///
/// Exact-tie predictions (probability 0.5) are resolved by a coin flip from a
/// generator seeded with `seed`, so the result is deterministic.
pub fn test_accuracy(model: &MatchupModel, test: &Dataset, seed: u64) -> Result<f64> {
    if test.records.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut credit = 0u64;
    let mut total = 0u64;
    for t in &test.records {
        let winner = model.predict_winner(t.a, t.b, &mut rng)?;
        credit += if winner == t.a { t.wins_a } else { t.wins_b };
        total += t.total();
    }
    Ok(credit as f64 / total as f64)
}

/// One grid-search candidate: embedding dimension and the shared
/// regularization weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub dim: usize,
    pub lambda: f64,
}

/// Default search grid: d in {2, 5, 10, 50} crossed with
/// lambda in {0, 1e-4, 1e-3, 1e-2}.
pub fn default_grid() -> Vec<GridPoint> {
    let mut grid = Vec::new();
    for &dim in &[2usize, 5, 10, 50] {
        for &lambda in &[0.0, 1e-4, 1e-3, 1e-2] {
            grid.push(GridPoint { dim, lambda });
        }
    }
    grid
}

/// Outcome of one cross-validation fold.
#[derive(Debug, Clone, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub accuracy: f64,
    pub dim: usize,
    pub lambda: f64,
    pub val_accuracy: Option<f64>,
}

/// Cross-validation results for one (dataset, model) pair.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub model: ModelKind,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
    /// Sample standard deviation over folds.
    pub std_accuracy: f64,
    /// Most frequently selected hyperparameters across folds.
    pub chosen_dim: usize,
    pub chosen_lambda: f64,
    pub intransitivity: IntransSummary,
}

impl ExperimentReport {
    pub fn mean_std(accuracies: &[f64]) -> (f64, f64) {
        let k = accuracies.len();
        let mean = accuracies.iter().sum::<f64>() / k as f64;
        let std = if k > 1 {
            (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
        } else {
            0.0
        };
        (mean, std)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic sub-seed for independent work units, so that parallel
/// execution order cannot affect results.
pub(crate) fn mix_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed).wrapping_add(stream)).wrapping_add(index))
}

/// Restricts the grid to points meaningful for the model kind: the naive
/// predictor has no hyperparameters, Bradley-Terry only uses lambda, and the
/// general model needs dim >= 2.
fn effective_grid(kind: ModelKind, grid: &[GridPoint]) -> Result<Vec<GridPoint>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    match kind {
        ModelKind::Naive => Ok(vec![GridPoint { dim: 0, lambda: 0.0 }]),
        ModelKind::Bt => {
            let mut seen = Vec::new();
            for gp in grid {
                if !seen.iter().any(|s: &GridPoint| s.lambda == gp.lambda) {
                    seen.push(GridPoint { dim: 1, lambda: gp.lambda });
                }
            }
            Ok(seen)
        }
        ModelKind::Bci | ModelKind::Bcd => {
            let pts: Vec<GridPoint> = grid.iter().copied().filter(|g| g.dim >= 1).collect();
            if pts.is_empty() {
                return Err(Error::InvalidDimension { kind, min: 1, dim: 0 });
            }
            Ok(pts)
        }
        ModelKind::General => {
            let pts: Vec<GridPoint> = grid.iter().copied().filter(|g| g.dim >= 2).collect();
            if pts.is_empty() {
                return Err(Error::InvalidDimension { kind, min: 2, dim: 1 });
            }
            Ok(pts)
        }
    }
}

/// K-fold cross-validation with per-fold hyperparameter selection.
///
/// Each fold serves once as the test set. On the remaining outcomes, every
/// grid point is trained (the trainer's own held-out slice scores it) and
/// the best validation accuracy selects the model evaluated on the test
/// fold. Grid points run in parallel; all seeds are derived deterministically
/// from `seed`.
pub fn cross_validate(
    kind: ModelKind,
    data: &Dataset,
    name: &str,
    k: usize,
    grid: &[GridPoint],
    base_cfg: &TrainConfig,
    seed: u64,
) -> Result<ExperimentReport> {
    if k < 3 {
        return Err(Error::InvalidConfig(format!(
            "cross-validation needs k >= 3 (train/validation/test), got {k}"
        )));
    }
    let grid_eff = effective_grid(kind, grid)?;
    let folds = split_folds(data, k, mix_seed(seed, 0, 0))?;

    let mut fold_results = Vec::with_capacity(k);
    for (fi, (train, test)) in folds.iter().enumerate() {
        let candidates: Vec<(GridPoint, MatchupModel, f64, Option<f64>)> = grid_eff
            .par_iter()
            .enumerate()
            .map(|(gi, gp)| -> Result<_> {
                let mut cfg = base_cfg.clone().with_lambda(gp.lambda);
                cfg.dim = gp.dim;
                cfg.seed = mix_seed(seed, 1 + fi as u64, gi as u64);
                let (model, trace) = train_model(kind, train, &cfg)?;
                let score = match trace.best_val_accuracy {
                    Some(v) => v,
                    // No validation slice (naive, or eval_fraction = 0):
                    // score on the training outcomes instead.
                    None => test_accuracy(&model, train, mix_seed(cfg.seed, 2, 0))?,
                };
                Ok((*gp, model, score, trace.best_val_accuracy))
            })
            .collect::<Result<_>>()?;

        let (gp, model, _, val_acc) = candidates
            .into_iter()
            .reduce(|best, cand| if cand.2 > best.2 { cand } else { best })
            .expect("grid is non-empty");
        let accuracy = test_accuracy(&model, test, mix_seed(seed, 3, fi as u64))?;
        fold_results.push(FoldResult {
            fold: fi,
            accuracy,
            dim: gp.dim,
            lambda: gp.lambda,
            val_accuracy: val_acc,
        });
    }

    let accuracies: Vec<f64> = fold_results.iter().map(|f| f.accuracy).collect();
    let (mean_accuracy, std_accuracy) = ExperimentReport::mean_std(&accuracies);

    // Most frequent (dim, lambda) across folds, smallest first on ties.
    let mut counts: Vec<((usize, u64), usize)> = Vec::new();
    for f in &fold_results {
        let key = (f.dim, f.lambda.to_bits());
        match counts.iter_mut().find(|(k2, _)| *k2 == key) {
            Some((_, c)) => *c += 1,
            None => counts.push((key, 1)),
        }
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let (chosen_dim, chosen_lambda) = counts
        .first()
        .map(|((d, l), _)| (*d, f64::from_bits(*l)))
        .unwrap_or((0, 0.0));

    Ok(ExperimentReport {
        dataset: name.to_owned(),
        model: kind,
        k,
        seed,
        folds: fold_results,
        mean_accuracy,
        std_accuracy,
        chosen_dim,
        chosen_lambda,
        intransitivity: stats_summary(data),
    })
}

/// Runs cross-validation for several model kinds on one dataset, sharing the
/// same fold split. Returns one report per requested kind, in order.
pub fn run_benchmark(
    data: &Dataset,
    name: &str,
    models: &[ModelKind],
    k: usize,
    grid: &[GridPoint],
    base_cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<ExperimentReport>> {
    models
        .iter()
        .map(|&kind| cross_validate(kind, data, name, k, grid, base_cfg, seed))
        .collect()
}
