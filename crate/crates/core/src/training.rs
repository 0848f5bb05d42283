//! Regularized maximum-likelihood training by stochastic gradient descent.
//!
//! The objective is the log-likelihood of the collapsed tuples minus weighted
//! regularizers: `Q = log L - lambda1*R1 - lambda2*R2 - lambda3*R3`, with
//! `R1 = sum_p 0.5*||p||^2` over per-player parameters, `R2 = ||Sigma'||_F`,
//! and `R3 = ||Gamma||_F` (the matrix terms apply to the general model only).
//!
//! One epoch performs N single-tuple updates (N = tuple count), sampling
//! with replacement. Each update adds the tuple's log-likelihood gradient and
//! subtracts the full regularizer gradient scaled by `lambda/N`, so a whole
//! epoch applies the regularizer once in expectation. Early stopping tracks
//! accuracy on a held-out slice of the training outcomes and returns the
//! best-validation parameters.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{holdout_split, AggregatedMatchup, Dataset, PlayerId};
use crate::error::{Error, Result};
use crate::evaluation::test_accuracy;
use crate::models::{init_params, log_logistic, MatchupModel, ModelKind, NaiveParams};

/// Hyperparameters for one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub seed: u64,
    /// Consecutive epochs without validation improvement before stopping.
    pub patience: usize,
    /// Fraction of training outcomes held out for validation, in [0, 1).
    pub eval_fraction: f64,
    /// Embedding dimension for vector-valued kinds.
    pub dim: usize,
    /// Half-width of the uniform initialization interval.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 500,
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
            seed: 0,
            patience: 20,
            eval_fraction: 0.1,
            dim: 2,
            init_scale: 0.1,
        }
    }
}

impl TrainConfig {
    /// Sets all three regularization weights to the shared value.
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda1 = lambda;
        self.lambda2 = lambda;
        self.lambda3 = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.eval_fraction) {
            return Err(Error::InvalidConfig(format!(
                "eval fraction must be in [0, 1), got {}",
                self.eval_fraction
            )));
        }
        for (name, l) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ] {
            if l.is_nan() || l < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be non-negative, got {l}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    EarlyStopped,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StopReason::MaxEpochs => f.write_str("max epochs"),
            StopReason::EarlyStopped => f.write_str("early stop"),
        }
    }
}

/// Objective and validation accuracy at the end of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub val_accuracy: Option<f64>,
}

/// Per-epoch training observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    /// Objective of the initial parameters, before any update.
    pub initial_objective: f64,
    pub epochs: Vec<EpochRecord>,
    pub stop: StopReason,
    /// Epoch whose parameters were returned (0 = initial parameters).
    pub best_epoch: usize,
    pub best_val_accuracy: Option<f64>,
}

impl TrainTrace {
    fn empty() -> Self {
        Self {
            initial_objective: 0.0,
            epochs: Vec::new(),
            stop: StopReason::MaxEpochs,
            best_epoch: 0,
            best_val_accuracy: None,
        }
    }

    /// Writes the trace as `epoch,objective,val_accuracy` CSV rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,objective,val_accuracy")?;
        for rec in &self.epochs {
            match rec.val_accuracy {
                Some(v) => writeln!(w, "{},{},{}", rec.epoch, rec.objective, v)?,
                None => writeln!(w, "{},{},", rec.epoch, rec.objective)?,
            }
        }
        Ok(())
    }
}

/// Log-likelihood of a whole dataset under a model. Always <= 0.
pub fn log_likelihood(model: &MatchupModel, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for t in &data.records {
        total += tuple_log_likelihood(model, t)?;
    }
    Ok(total)
}

/// Log-likelihood contribution of a single tuple:
/// `n_a * ln p + n_b * ln(1 - p)` with `p = Pr(a beats b)`.
pub fn tuple_log_likelihood(model: &MatchupModel, t: &AggregatedMatchup) -> Result<f64> {
    let m = model.matchup_value(t.a, t.b)?;
    Ok(t.wins_a as f64 * log_logistic(m) + t.wins_b as f64 * log_logistic(-m))
}

/// The three regularizer values `(R1, R2, R3)` for a model. R2 and R3 are
/// zero for every kind except the general model; the naive model has no
/// parameters to regularize.
pub fn regularizers(model: &MatchupModel) -> (f64, f64, f64) {
    match model {
        MatchupModel::Naive(_) => (0.0, 0.0, 0.0),
        MatchupModel::Bt(p) => {
            let r1 = p.gamma.iter().map(|g| 0.5 * g * g).sum();
            (r1, 0.0, 0.0)
        }
        MatchupModel::Bci(p) | MatchupModel::Bcd(p) => {
            let r1 = p
                .blade
                .iter()
                .chain(p.chest.iter())
                .map(|v| 0.5 * v.norm_squared())
                .sum();
            (r1, 0.0, 0.0)
        }
        MatchupModel::General(p) => {
            let r1 = p.embed.iter().map(|v| 0.5 * v.norm_squared()).sum();
            (r1, p.sigma_free.norm(), p.gamma_mat.norm())
        }
    }
}

/// The regularized objective `Q = log L - sum_i lambda_i R_i`. Zero-weight
/// terms are skipped so they contribute nothing even if a norm overflows.
pub fn objective(model: &MatchupModel, data: &Dataset, cfg: &TrainConfig) -> Result<f64> {
    let mut q = log_likelihood(model, data)?;
    let (r1, r2, r3) = regularizers(model);
    for (lambda, r) in [(cfg.lambda1, r1), (cfg.lambda2, r2), (cfg.lambda3, r3)] {
        if lambda > 0.0 {
            q -= lambda * r;
        }
    }
    Ok(q)
}

/// Gradient of one tuple's log-likelihood contribution with respect to the
/// parameters touched by its two players (plus the shared matrices for the
/// general model).
#[derive(Debug, Clone)]
pub enum GradientBlock {
    Bt {
        a: PlayerId,
        b: PlayerId,
        gamma_a: f64,
        gamma_b: f64,
    },
    BladeChest {
        a: PlayerId,
        b: PlayerId,
        blade_a: DVector<f64>,
        chest_a: DVector<f64>,
        blade_b: DVector<f64>,
        chest_b: DVector<f64>,
    },
    General {
        a: PlayerId,
        b: PlayerId,
        embed_a: DVector<f64>,
        embed_b: DVector<f64>,
        sigma_free: DMatrix<f64>,
        gamma_mat: DMatrix<f64>,
    },
}

/// Analytic gradient of `tuple_log_likelihood` for gradient-trainable kinds.
///
/// With `p = Pr(a beats b)` the scalar factor is
/// `s = n_a * (1 - p) - n_b * p`, and the blocks are `s` times the matchup
/// gradient. For the general model:
/// `grad_a = s*(Sigma b + (Gamma + Gamma^T) a)`,
/// `grad_b = s*(Sigma^T a - (Gamma + Gamma^T) b)`,
/// `grad_Sigma' = s*(a b^T - b a^T)`, `grad_Gamma = s*(a a^T - b b^T)`.
pub fn gradients(model: &MatchupModel, t: &AggregatedMatchup) -> Result<GradientBlock> {
    let p = model.win_probability(t.a, t.b)?;
    let s = t.wins_a as f64 * (1.0 - p) - t.wins_b as f64 * p;
    let (a, b) = (t.a, t.b);
    match model {
        MatchupModel::Naive(_) => Err(Error::UnsupportedKind(ModelKind::Naive)),
        MatchupModel::Bt(_) => Ok(GradientBlock::Bt {
            a,
            b,
            gamma_a: s,
            gamma_b: -s,
        }),
        MatchupModel::Bci(params) => {
            let (ai, bi) = (a.index(), b.index());
            Ok(GradientBlock::BladeChest {
                a,
                b,
                blade_a: s * &params.chest[bi],
                chest_a: -s * &params.blade[bi],
                blade_b: -s * &params.chest[ai],
                chest_b: s * &params.blade[ai],
            })
        }
        MatchupModel::Bcd(params) => {
            let (ai, bi) = (a.index(), b.index());
            let def = &params.blade[bi] - &params.chest[ai];
            let off = &params.blade[ai] - &params.chest[bi];
            Ok(GradientBlock::BladeChest {
                a,
                b,
                blade_a: -2.0 * s * &off,
                chest_a: -2.0 * s * &def,
                blade_b: 2.0 * s * &def,
                chest_b: 2.0 * s * &off,
            })
        }
        MatchupModel::General(params) => {
            let (ai, bi) = (a.index(), b.index());
            let va = &params.embed[ai];
            let vb = &params.embed[bi];
            let gamma_sym_a = &params.gamma_mat * va + params.gamma_mat.tr_mul(va);
            let gamma_sym_b = &params.gamma_mat * vb + params.gamma_mat.tr_mul(vb);
            let sigma_b = params.sigma_mul(vb);
            let sigma_t_a = -params.sigma_mul(va);
            Ok(GradientBlock::General {
                a,
                b,
                embed_a: s * (sigma_b + gamma_sym_a),
                embed_b: s * (sigma_t_a - gamma_sym_b),
                sigma_free: s * (va * vb.transpose() - vb * va.transpose()),
                gamma_mat: s * (va * va.transpose() - vb * vb.transpose()),
            })
        }
    }
}

fn apply_gradient(model: &mut MatchupModel, block: &GradientBlock, lr: f64) {
    match (model, block) {
        (MatchupModel::Bt(p), GradientBlock::Bt { a, b, gamma_a, gamma_b }) => {
            p.gamma[a.index()] += lr * gamma_a;
            p.gamma[b.index()] += lr * gamma_b;
        }
        (
            MatchupModel::Bci(p) | MatchupModel::Bcd(p),
            GradientBlock::BladeChest {
                a,
                b,
                blade_a,
                chest_a,
                blade_b,
                chest_b,
            },
        ) => {
            p.blade[a.index()].axpy(lr, blade_a, 1.0);
            p.chest[a.index()].axpy(lr, chest_a, 1.0);
            p.blade[b.index()].axpy(lr, blade_b, 1.0);
            p.chest[b.index()].axpy(lr, chest_b, 1.0);
        }
        (
            MatchupModel::General(p),
            GradientBlock::General {
                a,
                b,
                embed_a,
                embed_b,
                sigma_free,
                gamma_mat,
            },
        ) => {
            p.embed[a.index()].axpy(lr, embed_a, 1.0);
            p.embed[b.index()].axpy(lr, embed_b, 1.0);
            p.sigma_free += lr * sigma_free;
            p.gamma_mat += lr * gamma_mat;
        }
        _ => unreachable!("gradient block kind matches model kind"),
    }
}

/// One SGD update: regularizer decay scaled by `lambda/N` plus the sampled
/// tuple's log-likelihood gradient, both evaluated at the pre-update
/// parameters.
fn sgd_step(
    model: &mut MatchupModel,
    t: &AggregatedMatchup,
    cfg: &TrainConfig,
    n_records: f64,
) -> Result<()> {
    let lr = cfg.learning_rate;
    let block = gradients(model, t)?;
    let decay1 = lr * cfg.lambda1 / n_records;
    match model {
        MatchupModel::Bt(p) => {
            if decay1 > 0.0 {
                for g in &mut p.gamma {
                    *g -= decay1 * *g;
                }
            }
        }
        MatchupModel::Bci(p) | MatchupModel::Bcd(p) => {
            if decay1 > 0.0 {
                for v in p.blade.iter_mut().chain(p.chest.iter_mut()) {
                    *v *= 1.0 - decay1;
                }
            }
        }
        MatchupModel::General(p) => {
            if decay1 > 0.0 {
                for v in p.embed.iter_mut() {
                    *v *= 1.0 - decay1;
                }
            }
            // Frobenius-norm regularizers: gradient X/||X||, subgradient 0
            // at the zero matrix.
            if cfg.lambda2 > 0.0 {
                let norm = p.sigma_free.norm();
                if norm > 0.0 {
                    p.sigma_free *= 1.0 - lr * cfg.lambda2 / (n_records * norm);
                }
            }
            if cfg.lambda3 > 0.0 {
                let norm = p.gamma_mat.norm();
                if norm > 0.0 {
                    p.gamma_mat *= 1.0 - lr * cfg.lambda3 / (n_records * norm);
                }
            }
        }
        MatchupModel::Naive(_) => return Err(Error::UnsupportedKind(ModelKind::Naive)),
    }
    apply_gradient(model, &block, lr);
    Ok(())
}

fn params_finite(model: &MatchupModel) -> bool {
    match model {
        MatchupModel::Naive(_) => true,
        MatchupModel::Bt(p) => p.gamma.iter().all(|g| g.is_finite()),
        MatchupModel::Bci(p) | MatchupModel::Bcd(p) => p
            .blade
            .iter()
            .chain(p.chest.iter())
            .all(|v| v.iter().all(|x| x.is_finite())),
        MatchupModel::General(p) => {
            p.embed.iter().all(|v| v.iter().all(|x| x.is_finite()))
                && p.sigma_free.iter().all(|x| x.is_finite())
                && p.gamma_mat.iter().all(|x| x.is_finite())
        }
    }
}

/// Fits any model kind: the naive predictor is built by counting, all other
/// kinds go through [`sgd_train`].
pub fn train_model(
    kind: ModelKind,
    d_train: &Dataset,
    cfg: &TrainConfig,
) -> Result<(MatchupModel, TrainTrace)> {
    if kind == ModelKind::Naive {
        if d_train.records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let model = MatchupModel::Naive(NaiveParams::fit(d_train));
        return Ok((model, TrainTrace::empty()));
    }
    sgd_train(kind, d_train, cfg)
}

/// Maximizes the regularized log-likelihood with single-tuple SGD.
///
/// An epoch is N sampled updates (N = training tuple count). When a
/// validation slice is held out (`eval_fraction > 0`), the parameters with
/// the best validation accuracy are returned, ties resolved toward the
/// higher training objective, and training stops after `patience` epochs
/// without improvement. Without a validation slice, all epochs run and the
/// final parameters are returned. Fully deterministic for a given seed.
pub fn sgd_train(
    kind: ModelKind,
    d_train: &Dataset,
    cfg: &TrainConfig,
) -> Result<(MatchupModel, TrainTrace)> {
    cfg.validate()?;
    if !kind.is_gradient_kind() {
        return Err(Error::UnsupportedKind(kind));
    }
    if d_train.records.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (sgd_data, val_data) = holdout_split(d_train, cfg.eval_fraction, rng.next_u64())?;
    let mut model = init_params(
        kind,
        d_train.num_players(),
        cfg.dim,
        cfg.init_scale,
        rng.next_u64(),
    )?;

    let n = sgd_data.records.len();
    let initial_objective = objective(&model, &sgd_data, cfg)?;

    // The first epoch seeds the early-stop baseline; initial parameters are
    // never returned once at least one epoch has run.
    let mut best = model.clone();
    let mut best_epoch = 0usize;
    let mut best_val: Option<f64> = None;
    let mut best_objective = initial_objective;
    let mut stale_epochs = 0usize;
    let mut stop = StopReason::MaxEpochs;
    let mut epochs = Vec::new();

    for epoch in 1..=cfg.epochs {
        for _ in 0..n {
            let idx = rng.gen_range(0..n);
            sgd_step(&mut model, &sgd_data.records[idx], cfg, n as f64)?;
        }
        if !params_finite(&model) {
            return Err(Error::NonFiniteParameters {
                epoch,
                lr: cfg.learning_rate,
            });
        }
        let obj = objective(&model, &sgd_data, cfg)?;
        let val_acc = match &val_data {
            Some(val) => Some(test_accuracy(&model, val, rng.next_u64())?),
            None => None,
        };
        epochs.push(EpochRecord {
            epoch,
            objective: obj,
            val_accuracy: val_acc,
        });

        match (val_acc, best_val) {
            (Some(v), prev) if prev.is_none_or(|bv| v > bv) => {
                best = model.clone();
                best_epoch = epoch;
                best_val = Some(v);
                best_objective = obj;
                stale_epochs = 0;
            }
            (Some(v), prev) => {
                if prev == Some(v) && obj > best_objective {
                    // Same validation accuracy, better fit: keep the
                    // better-trained parameters without resetting patience.
                    best = model.clone();
                    best_epoch = epoch;
                    best_objective = obj;
                }
                stale_epochs += 1;
                if stale_epochs >= cfg.patience {
                    stop = StopReason::EarlyStopped;
                    break;
                }
            }
            (None, _) => {
                // No validation slice: keep the latest parameters.
                best = model.clone();
                best_epoch = epoch;
                best_objective = obj;
            }
        }
    }

    let trace = TrainTrace {
        initial_objective,
        epochs,
        stop,
        best_epoch,
        best_val_accuracy: best_val,
    };
    Ok((best, trace))
}

// Flat parameter views used by the finite-difference harness. Layouts:
// Bt: gamma; blade-chest: all blades then all chests (player-major);
// general: embeddings, then Sigma' row-major, then Gamma row-major.

pub(crate) fn param_vector(model: &MatchupModel) -> Vec<f64> {
    match model {
        MatchupModel::Naive(_) => Vec::new(),
        MatchupModel::Bt(p) => p.gamma.clone(),
        MatchupModel::Bci(p) | MatchupModel::Bcd(p) => p
            .blade
            .iter()
            .chain(p.chest.iter())
            .flat_map(|v| v.iter().copied())
            .collect(),
        MatchupModel::General(p) => {
            let mut out: Vec<f64> = p.embed.iter().flat_map(|v| v.iter().copied()).collect();
            for i in 0..p.dim {
                for j in 0..p.dim {
                    out.push(p.sigma_free[(i, j)]);
                }
            }
            for i in 0..p.dim {
                for j in 0..p.dim {
                    out.push(p.gamma_mat[(i, j)]);
                }
            }
            out
        }
    }
}

pub(crate) fn set_param_vector(model: &mut MatchupModel, values: &[f64]) {
    match model {
        MatchupModel::Naive(_) => {}
        MatchupModel::Bt(p) => p.gamma.copy_from_slice(values),
        MatchupModel::Bci(p) | MatchupModel::Bcd(p) => {
            let mut it = values.iter();
            for v in p.blade.iter_mut().chain(p.chest.iter_mut()) {
                for x in v.iter_mut() {
                    *x = *it.next().unwrap();
                }
            }
        }
        MatchupModel::General(p) => {
            let mut it = values.iter();
            for v in p.embed.iter_mut() {
                for x in v.iter_mut() {
                    *x = *it.next().unwrap();
                }
            }
            for i in 0..p.dim {
                for j in 0..p.dim {
                    p.sigma_free[(i, j)] = *it.next().unwrap();
                }
            }
            for i in 0..p.dim {
                for j in 0..p.dim {
                    p.gamma_mat[(i, j)] = *it.next().unwrap();
                }
            }
        }
    }
}

/// Densifies a [`GradientBlock`] into the `param_vector` layout.
fn dense_gradients(model: &MatchupModel, t: &AggregatedMatchup) -> Result<Vec<f64>> {
    let mut out = vec![0.0; param_vector(model).len()];
    let block = gradients(model, t)?;
    match (&block, model) {
        (GradientBlock::Bt { a, b, gamma_a, gamma_b }, _) => {
            out[a.index()] += gamma_a;
            out[b.index()] += gamma_b;
        }
        (
            GradientBlock::BladeChest {
                a,
                b,
                blade_a,
                chest_a,
                blade_b,
                chest_b,
            },
            MatchupModel::Bci(p) | MatchupModel::Bcd(p),
        ) => {
            let d = p.dim;
            let n = p.blade.len();
            for i in 0..d {
                out[a.index() * d + i] += blade_a[i];
                out[b.index() * d + i] += blade_b[i];
                out[(n + a.index()) * d + i] += chest_a[i];
                out[(n + b.index()) * d + i] += chest_b[i];
            }
        }
        (
            GradientBlock::General {
                a,
                b,
                embed_a,
                embed_b,
                sigma_free,
                gamma_mat,
            },
            MatchupModel::General(p),
        ) => {
            let d = p.dim;
            let n = p.embed.len();
            for i in 0..d {
                out[a.index() * d + i] += embed_a[i];
                out[b.index() * d + i] += embed_b[i];
            }
            let sigma_base = n * d;
            let gamma_base = sigma_base + d * d;
            for i in 0..d {
                for j in 0..d {
                    out[sigma_base + i * d + j] += sigma_free[(i, j)];
                    out[gamma_base + i * d + j] += gamma_mat[(i, j)];
                }
            }
        }
        _ => unreachable!("gradient block kind matches model kind"),
    }
    Ok(out)
}

/// Compares analytic tuple gradients against central finite differences on
/// random configurations; returns the worst relative error observed.
pub fn finite_difference_check(
    kind: ModelKind,
    dim: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    const H: f64 = 1e-5;
    let n_players = 4usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let model = init_params(kind, n_players, dim, 1.0, rng.next_u64())?;
        let a = rng.gen_range(0..n_players as u32);
        let b = loop {
            let b = rng.gen_range(0..n_players as u32);
            if b != a {
                break b;
            }
        };
        let (wins_a, wins_b) = loop {
            let wa = rng.gen_range(0..=3u64);
            let wb = rng.gen_range(0..=3u64);
            if wa + wb >= 1 {
                break (wa, wb);
            }
        };
        let tuple = AggregatedMatchup {
            a: PlayerId(a),
            b: PlayerId(b),
            wins_a,
            wins_b,
        };
        let analytic = dense_gradients(&model, &tuple)?;
        let theta = param_vector(&model);
        let mut probe = model.clone();
        for i in 0..theta.len() {
            let mut plus = theta.clone();
            plus[i] += H;
            set_param_vector(&mut probe, &plus);
            let f_plus = tuple_log_likelihood(&probe, &tuple)?;
            let mut minus = theta.clone();
            minus[i] -= H;
            set_param_vector(&mut probe, &minus);
            let f_minus = tuple_log_likelihood(&probe, &tuple)?;
            let fd = (f_plus - f_minus) / (2.0 * H);
            let denom = analytic[i].abs().max(fd.abs()).max(1.0);
            worst = worst.max((fd - analytic[i]).abs() / denom);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::testutil::{rps, table1_toy};
    use crate::dataset::PlayerTable;
    use crate::models::{BtParams, GeneralParams};
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn pair_dataset(wins_a: u64, wins_b: u64) -> Dataset {
        let players = PlayerTable::from_labels(["a", "b"]).unwrap();
        Dataset {
            players,
            records: vec![AggregatedMatchup {
                a: PlayerId(0),
                b: PlayerId(1),
                wins_a,
                wins_b,
            }],
        }
    }

    #[test]
    fn log_likelihood_at_even_odds() {
        let m = MatchupModel::Bt(BtParams { gamma: vec![0.0, 0.0] });
        let one = pair_dataset(1, 0);
        assert_relative_eq!(
            log_likelihood(&m, &one).unwrap(),
            0.5f64.ln(),
            epsilon = 1e-12
        );
        let three = pair_dataset(2, 1);
        assert_relative_eq!(
            log_likelihood(&m, &three).unwrap(),
            3.0 * 0.5f64.ln(),
            epsilon = 1e-12
        );
        let empty = Dataset {
            players: PlayerTable::from_labels(["a", "b"]).unwrap(),
            records: vec![],
        };
        assert_eq!(log_likelihood(&m, &empty).unwrap(), 0.0);
    }

    #[test]
    fn regularizer_values() {
        let zero = init_params(ModelKind::General, 2, 2, 0.0, 0).unwrap();
        assert_eq!(regularizers(&zero), (0.0, 0.0, 0.0));

        let single = MatchupModel::General(GeneralParams {
            dim: 2,
            embed: vec![DVector::from_row_slice(&[3.0, 4.0])],
            sigma_free: DMatrix::zeros(2, 2),
            gamma_mat: DMatrix::zeros(2, 2),
        });
        let (r1, r2, r3) = regularizers(&single);
        assert_eq!((r1, r2, r3), (12.5, 0.0, 0.0));

        let identity_sigma = MatchupModel::General(GeneralParams {
            dim: 2,
            embed: vec![],
            sigma_free: DMatrix::identity(2, 2),
            gamma_mat: DMatrix::zeros(2, 2),
        });
        let (_, r2, _) = regularizers(&identity_sigma);
        assert_relative_eq!(r2, 2.0f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn objective_combines_terms() {
        let cfg = TrainConfig::default();
        let m = MatchupModel::Bt(BtParams { gamma: vec![0.0, 0.0] });
        let d = pair_dataset(1, 0);
        assert_relative_eq!(
            objective(&m, &d, &cfg).unwrap(),
            0.5f64.ln(),
            epsilon = 1e-12
        );

        // Regularizer example: R1 = 12.5, lambda1 = 2, empty data -> -25.
        let single = MatchupModel::General(GeneralParams {
            dim: 2,
            embed: vec![DVector::from_row_slice(&[3.0, 4.0])],
            sigma_free: DMatrix::zeros(2, 2),
            gamma_mat: DMatrix::zeros(2, 2),
        });
        let empty = Dataset {
            players: PlayerTable::from_labels(["a"]).unwrap(),
            records: vec![],
        };
        let cfg2 = TrainConfig {
            lambda1: 2.0,
            ..TrainConfig::default()
        };
        assert_relative_eq!(objective(&single, &empty, &cfg2).unwrap(), -25.0);
    }

    #[test]
    fn gradient_is_zero_at_balanced_fair_odds() {
        let m = init_params(ModelKind::General, 2, 2, 0.0, 0).unwrap();
        let t = AggregatedMatchup {
            a: PlayerId(0),
            b: PlayerId(1),
            wins_a: 3,
            wins_b: 3,
        };
        match gradients(&m, &t).unwrap() {
            GradientBlock::General {
                embed_a,
                embed_b,
                sigma_free,
                gamma_mat,
                ..
            } => {
                assert!(embed_a.iter().all(|&x| x == 0.0));
                assert!(embed_b.iter().all(|&x| x == 0.0));
                assert!(sigma_free.iter().all(|&x| x == 0.0));
                assert!(gamma_mat.iter().all(|&x| x == 0.0));
            }
            _ => panic!("wrong block"),
        }
    }

    #[test]
    fn sigma_gradient_outer_difference() {
        // a = e1, b = e2, zero matrices; tuple (2, 0) at p = 0.5 gives s = 1,
        // so the Sigma' gradient is exactly a b^T - b a^T.
        let m = MatchupModel::General(GeneralParams {
            dim: 2,
            embed: vec![
                DVector::from_row_slice(&[1.0, 0.0]),
                DVector::from_row_slice(&[0.0, 1.0]),
            ],
            sigma_free: DMatrix::zeros(2, 2),
            gamma_mat: DMatrix::zeros(2, 2),
        });
        let t = AggregatedMatchup {
            a: PlayerId(0),
            b: PlayerId(1),
            wins_a: 2,
            wins_b: 0,
        };
        match gradients(&m, &t).unwrap() {
            GradientBlock::General { sigma_free, .. } => {
                assert_eq!(sigma_free, dmatrix![0.0, 1.0; -1.0, 0.0]);
            }
            _ => panic!("wrong block"),
        }
    }

    #[test]
    fn finite_differences_match_all_kinds() {
        for (kind, dims, tol) in [
            (ModelKind::Bt, &[1usize][..], 1e-7),
            (ModelKind::Bci, &[1, 2, 5][..], 1e-5),
            (ModelKind::Bcd, &[1, 2, 5][..], 1e-5),
            (ModelKind::General, &[2, 3, 5][..], 1e-5),
        ] {
            for &dim in dims {
                let err = finite_difference_check(kind, dim, 25, 1234).unwrap();
                assert!(err <= tol, "{kind} dim {dim}: {err}");
            }
        }
    }

    #[test]
    fn sgd_learns_single_pair_rate() {
        // MLE of a (9, 1) tuple through the logistic link approaches 0.9.
        let d = pair_dataset(9, 1);
        let mut cfg = TrainConfig {
            eval_fraction: 0.0,
            epochs: 500,
            seed: 42,
            ..TrainConfig::default()
        };
        cfg = cfg.with_lambda(1e-3);
        let (model, trace) = sgd_train(ModelKind::Bt, &d, &cfg).unwrap();
        let p = model.win_probability(PlayerId(0), PlayerId(1)).unwrap();
        assert!(p > 0.8 && p < 0.95, "p = {p}");
        assert_eq!(trace.epochs.len(), 500);
    }

    #[test]
    fn sgd_general_fits_rps_perfectly() {
        let d = rps(100);
        // Count-scaled tuple gradients need a smaller step on 100-outcome
        // tuples than the small-count default.
        let cfg = TrainConfig {
            learning_rate: 0.01,
            patience: 60,
            seed: 7,
            ..TrainConfig::default()
        };
        let (model, _) = sgd_train(ModelKind::General, &d, &cfg).unwrap();
        // All three majority directions must be reproduced.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut correct = 0;
        for r in &d.records {
            let winner = model.predict_winner(r.a, r.b, &mut rng).unwrap();
            let majority = if r.wins_a > r.wins_b { r.a } else { r.b };
            if winner == majority {
                correct += 1;
            }
        }
        assert_eq!(correct, 3);
        let acc = test_accuracy(&model, &d, 0).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn sgd_bt_cannot_fit_rps() {
        let d = rps(100);
        let cfg = TrainConfig {
            learning_rate: 0.01,
            patience: 60,
            seed: 7,
            ..TrainConfig::default()
        };
        let (model, _) = sgd_train(ModelKind::Bt, &d, &cfg).unwrap();
        let acc = test_accuracy(&model, &d, 0).unwrap();
        assert!(acc <= 2.0 / 3.0 + 1e-9, "acc = {acc}");
    }

    #[test]
    fn objective_improves_over_training() {
        let d = table1_toy();
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            epochs: 200,
            eval_fraction: 0.0,
            seed: 3,
            ..TrainConfig::default()
        };
        let (_, trace) = sgd_train(ModelKind::General, &d, &cfg).unwrap();
        assert_eq!(trace.epochs.len(), 200);
        assert!(
            trace.epochs.last().unwrap().objective > trace.initial_objective,
            "no improvement: {} -> {}",
            trace.initial_objective,
            trace.epochs.last().unwrap().objective
        );
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let d = table1_toy();
        let cfg = TrainConfig {
            seed: 11,
            epochs: 50,
            ..TrainConfig::default()
        };
        let (m1, t1) = sgd_train(ModelKind::General, &d, &cfg).unwrap();
        let (m2, t2) = sgd_train(ModelKind::General, &d, &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn effective_sigma_stays_antisymmetric_after_training() {
        let d = table1_toy();
        let cfg = TrainConfig {
            seed: 5,
            epochs: 30,
            ..TrainConfig::default()
        }
        .with_lambda(1e-3);
        let (model, _) = sgd_train(ModelKind::General, &d, &cfg).unwrap();
        match model {
            MatchupModel::General(p) => {
                let s = p.effective_sigma();
                for i in 0..p.dim {
                    assert_eq!(s[(i, i)], 0.0);
                    for j in 0..p.dim {
                        assert_eq!(s[(i, j)], -s[(j, i)]);
                    }
                }
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn divergence_is_reported() {
        let d = pair_dataset(10, 0);
        let cfg = TrainConfig {
            learning_rate: 1e200,
            epochs: 5,
            eval_fraction: 0.0,
            seed: 0,
            ..TrainConfig::default()
        }
        .with_lambda(1.0);
        match sgd_train(ModelKind::Bt, &d, &cfg) {
            Err(Error::NonFiniteParameters { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let empty = Dataset {
            players: PlayerTable::from_labels(["a", "b"]).unwrap(),
            records: vec![],
        };
        assert!(matches!(
            sgd_train(ModelKind::Bt, &empty, &TrainConfig::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn trace_csv_format() {
        let trace = TrainTrace {
            initial_objective: -1.0,
            epochs: vec![
                EpochRecord {
                    epoch: 1,
                    objective: -0.75,
                    val_accuracy: Some(0.5),
                },
                EpochRecord {
                    epoch: 2,
                    objective: -0.5,
                    val_accuracy: None,
                },
            ],
            stop: StopReason::MaxEpochs,
            best_epoch: 2,
            best_val_accuracy: Some(0.5),
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "epoch,objective,val_accuracy\n1,-0.75,0.5\n2,-0.5,\n");
    }
}
