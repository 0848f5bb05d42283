//! The matchup-function family and the logistic win-probability link.
//!
//! Every model assigns each ordered pair of players a real matchup value
//! `M(a, b)` with the symmetry property `M(a, b) = -M(b, a)`; the probability
//! that `a` beats `b` is the logistic transform of `M(a, b)`. The kinds are:
//!
//! - `Bt`: one scalar strength per player, `M = gamma_a - gamma_b`. Always
//!   transitive.
//! - `Bci` / `Bcd`: two d'-vectors per player (blade = offense, chest =
//!   defense), combined by inner products or squared distances.
//! - `General`: one d-vector per player plus two d-by-d matrices: an
//!   interaction matrix that is antisymmetric by construction
//!   (`Sigma = Sigma' - Sigma'^T`, stored as the free matrix `Sigma'`) and an
//!   unconstrained intrinsic-strength matrix `Gamma` used through quadratic
//!   forms. `M = a^T Sigma b + a^T Gamma a - b^T Gamma b`.
//! - `Naive`: add-one smoothed empirical win rates from a training set.
//!
//! The interaction term of the general model is evaluated in the pairwise
//! form `sum_{i<j} (S'_ij - S'_ji) (a_i b_j - a_j b_i)`, which makes
//! `M(a, b) = -M(b, a)` hold bitwise and `M(a, a) = 0` exact.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, PlayerId, PlayerTable};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: &str = "intransic-model-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Naive,
    Bt,
    Bci,
    Bcd,
    General,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Naive => "naive",
            ModelKind::Bt => "bt",
            ModelKind::Bci => "bci",
            ModelKind::Bcd => "bcd",
            ModelKind::General => "general",
        }
    }

    /// Kinds trained by gradient descent (everything except `Naive`).
    pub fn is_gradient_kind(self) -> bool {
        !matches!(self, ModelKind::Naive)
    }

    pub fn all() -> [ModelKind; 5] {
        [
            ModelKind::Naive,
            ModelKind::Bt,
            ModelKind::Bci,
            ModelKind::Bcd,
            ModelKind::General,
        ]
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(ModelKind::Naive),
            "bt" => Ok(ModelKind::Bt),
            "bci" => Ok(ModelKind::Bci),
            "bcd" => Ok(ModelKind::Bcd),
            "general" => Ok(ModelKind::General),
            other => Err(Error::InvalidConfig(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Bradley-Terry parameters: one strength scalar per player.
#[derive(Debug, Clone, PartialEq)]
pub struct BtParams {
    pub gamma: Vec<f64>,
}

/// Blade-chest parameters: per-player offense and defense vectors of a
/// shared dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct BladeChestParams {
    pub dim: usize,
    pub blade: Vec<DVector<f64>>,
    pub chest: Vec<DVector<f64>>,
}

/// Generalized embedding parameters: one d-vector per player, the free
/// interaction matrix `Sigma'`, and the intrinsic-strength matrix `Gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralParams {
    pub dim: usize,
    pub embed: Vec<DVector<f64>>,
    pub sigma_free: DMatrix<f64>,
    pub gamma_mat: DMatrix<f64>,
}

impl GeneralParams {
    /// The effective interaction matrix `Sigma = Sigma' - Sigma'^T`.
    /// Antisymmetric with a zero diagonal by construction.
    pub fn effective_sigma(&self) -> DMatrix<f64> {
        &self.sigma_free - self.sigma_free.transpose()
    }

    /// `Sigma * x` without materializing the effective matrix.
    pub(crate) fn sigma_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.sigma_free * x - self.sigma_free.tr_mul(x)
    }
}

/// Empirical win counts, canonical orientation, for the naive predictor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NaiveParams {
    pub n_players: usize,
    counts: BTreeMap<(u32, u32), (u64, u64)>,
}

impl NaiveParams {
    pub fn fit(train: &Dataset) -> Self {
        let counts = train
            .records
            .iter()
            .map(|r| ((r.a.0, r.b.0), (r.wins_a, r.wins_b)))
            .collect();
        Self {
            n_players: train.num_players(),
            counts,
        }
    }

    pub(crate) fn from_counts(n_players: usize, entries: &[(u32, u32, u64, u64)]) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for &(a, b, wa, wb) in entries {
            if a >= b {
                return Err(Error::InvalidConfig(format!(
                    "naive counts must be canonically oriented, got ({a}, {b})"
                )));
            }
            if b as usize >= n_players {
                return Err(Error::UnknownPlayer(b));
            }
            counts.insert((a, b), (wa, wb));
        }
        Ok(Self { n_players, counts })
    }

    pub(crate) fn entries(&self) -> impl Iterator<Item = (u32, u32, u64, u64)> + '_ {
        self.counts.iter().map(|(&(a, b), &(wa, wb))| (a, b, wa, wb))
    }

    /// Observed counts for `(a, b)` from a's perspective.
    pub fn counts_for(&self, a: PlayerId, b: PlayerId) -> Option<(u64, u64)> {
        if a.0 < b.0 {
            self.counts.get(&(a.0, b.0)).copied()
        } else {
            self.counts.get(&(b.0, a.0)).map(|&(wa, wb)| (wb, wa))
        }
    }
}

/// A model kind together with its parameter block.
#[derive(Debug, Clone, PartialEq)]
pub enum MatchupModel {
    Naive(NaiveParams),
    Bt(BtParams),
    Bci(BladeChestParams),
    Bcd(BladeChestParams),
    General(GeneralParams),
}

impl MatchupModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            MatchupModel::Naive(_) => ModelKind::Naive,
            MatchupModel::Bt(_) => ModelKind::Bt,
            MatchupModel::Bci(_) => ModelKind::Bci,
            MatchupModel::Bcd(_) => ModelKind::Bcd,
            MatchupModel::General(_) => ModelKind::General,
        }
    }

    pub fn n_players(&self) -> usize {
        match self {
            MatchupModel::Naive(p) => p.n_players,
            MatchupModel::Bt(p) => p.gamma.len(),
            MatchupModel::Bci(p) | MatchupModel::Bcd(p) => p.blade.len(),
            MatchupModel::General(p) => p.embed.len(),
        }
    }

    /// Embedding dimension: 0 for naive, 1 for Bradley-Terry.
    pub fn dim(&self) -> usize {
        match self {
            MatchupModel::Naive(_) => 0,
            MatchupModel::Bt(_) => 1,
            MatchupModel::Bci(p) | MatchupModel::Bcd(p) => p.dim,
            MatchupModel::General(p) => p.dim,
        }
    }

    /// The antisymmetric matchup value `M(a, b)`.
    pub fn matchup_value(&self, a: PlayerId, b: PlayerId) -> Result<f64> {
        match self {
            MatchupModel::Naive(p) => {
                check_player(a, p.n_players)?;
                check_player(b, p.n_players)?;
                // Log-odds of the smoothed empirical probability; 0 for
                // unseen pairs.
                let (na, nb) = p.counts_for(a, b).unwrap_or((0, 0));
                Ok(((na + 1) as f64).ln() - ((nb + 1) as f64).ln())
            }
            MatchupModel::Bt(p) => matchup_bt(p, a, b),
            MatchupModel::Bci(p) => matchup_bci(p, a, b),
            MatchupModel::Bcd(p) => matchup_bcd(p, a, b),
            MatchupModel::General(p) => matchup_general(p, a, b),
        }
    }

    /// `Pr(a beats b)`, always in the open interval (0, 1).
    ///
    /// The naive model returns the smoothed empirical rate directly so that
    /// observed counts map to exact ratios; all other kinds apply the
    /// logistic link to the matchup value. Querying both orientations of a
    /// pair yields probabilities that sum to 1 exactly, except in the far
    /// saturation clamp (|M| > ~37).
    pub fn win_probability(&self, a: PlayerId, b: PlayerId) -> Result<f64> {
        if let MatchupModel::Naive(p) = self {
            check_player(a, p.n_players)?;
            check_player(b, p.n_players)?;
            if a.0 < b.0 {
                let (na, nb) = p.counts_for(a, b).unwrap_or((0, 0));
                Ok((na + 1) as f64 / ((na + 1) + (nb + 1)) as f64)
            } else {
                let (nb, na) = p.counts_for(b, a).unwrap_or((0, 0));
                Ok(1.0 - (nb + 1) as f64 / ((nb + 1) + (na + 1)) as f64)
            }
        } else {
            Ok(logistic(self.matchup_value(a, b)?))
        }
    }

    /// Predicted winner; an exact 0.5 probability is broken by a coin flip
    /// from `rng`.
    pub fn predict_winner(
        &self,
        a: PlayerId,
        b: PlayerId,
        rng: &mut impl Rng,
    ) -> Result<PlayerId> {
        let p = self.win_probability(a, b)?;
        if p > 0.5 {
            Ok(a)
        } else if p < 0.5 {
            Ok(b)
        } else if rng.gen_bool(0.5) {
            Ok(a)
        } else {
            Ok(b)
        }
    }
}

fn check_player(p: PlayerId, n: usize) -> Result<()> {
    if p.index() < n {
        Ok(())
    } else {
        Err(Error::UnknownPlayer(p.0))
    }
}

fn check_pair<T>(v: &[T], a: PlayerId, b: PlayerId) -> Result<(&T, &T)> {
    let va = v.get(a.index()).ok_or(Error::UnknownPlayer(a.0))?;
    let vb = v.get(b.index()).ok_or(Error::UnknownPlayer(b.0))?;
    Ok((va, vb))
}

/// `M = gamma_a - gamma_b`.
pub fn matchup_bt(p: &BtParams, a: PlayerId, b: PlayerId) -> Result<f64> {
    let (ga, gb) = check_pair(&p.gamma, a, b)?;
    Ok(ga - gb)
}

/// Blade-chest inner: `M = a_blade . b_chest - b_blade . a_chest`.
pub fn matchup_bci(p: &BladeChestParams, a: PlayerId, b: PlayerId) -> Result<f64> {
    let (a_blade, b_blade) = check_pair(&p.blade, a, b)?;
    let (a_chest, b_chest) = check_pair(&p.chest, a, b)?;
    Ok(a_blade.dot(b_chest) - b_blade.dot(a_chest))
}

/// Blade-chest distance: `M = ||b_blade - a_chest||^2 - ||a_blade - b_chest||^2`.
pub fn matchup_bcd(p: &BladeChestParams, a: PlayerId, b: PlayerId) -> Result<f64> {
    let (a_blade, b_blade) = check_pair(&p.blade, a, b)?;
    let (a_chest, b_chest) = check_pair(&p.chest, a, b)?;
    Ok((b_blade - a_chest).norm_squared() - (a_blade - b_chest).norm_squared())
}

/// Generalized embedding: `M = a^T Sigma b + a^T Gamma a - b^T Gamma b` with
/// `Sigma = Sigma' - Sigma'^T`.
pub fn matchup_general(p: &GeneralParams, a: PlayerId, b: PlayerId) -> Result<f64> {
    let (va, vb) = check_pair(&p.embed, a, b)?;
    if va.len() != p.dim || vb.len() != p.dim {
        return Err(Error::DimMismatch {
            expected: p.dim,
            got: va.len().min(vb.len()),
        });
    }
    // Pairwise form of a^T (Sigma' - Sigma'^T) b; exact zero when va == vb.
    let mut interaction = 0.0;
    for i in 0..p.dim {
        for j in (i + 1)..p.dim {
            let s = p.sigma_free[(i, j)] - p.sigma_free[(j, i)];
            interaction += s * (va[i] * vb[j] - va[j] * vb[i]);
        }
    }
    let strength = quad_form(&p.gamma_mat, va) - quad_form(&p.gamma_mat, vb);
    Ok(interaction + strength)
}

fn quad_form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}

/// Numerically stable logistic `1 / (1 + exp(-m))`, clamped into (0, 1).
///
/// The negative branch computes `1 - logistic(-m)`; since `logistic(|m|)`
/// lies in [0.5, 1], that subtraction is exact, so querying `m` and `-m`
/// yields values that sum to 1 exactly. The clamp keeps saturated outputs
/// strictly inside (0, 1): `logistic(-1000)` is the smallest positive normal
/// rather than 0.
pub fn logistic(m: f64) -> f64 {
    if m >= 0.0 {
        let v = 1.0 / (1.0 + (-m).exp());
        if v == 1.0 {
            1.0 - 0.5 * f64::EPSILON
        } else {
            v
        }
    } else {
        let v = 1.0 / (1.0 + m.exp());
        let p = 1.0 - v;
        if p == 0.0 {
            f64::MIN_POSITIVE
        } else {
            p
        }
    }
}

/// Stable `ln(logistic(m))`.
pub fn log_logistic(m: f64) -> f64 {
    if m >= 0.0 {
        -(-m).exp().ln_1p()
    } else {
        m - m.exp().ln_1p()
    }
}

/// Add-one smoothed empirical probability that `a` beats `b` given the
/// training aggregation; unseen pairs get 0.5. Equal counts yield exactly
/// 0.5, which downstream prediction resolves with a seeded coin flip.
pub fn naive_probability(train: &Dataset, a: PlayerId, b: PlayerId) -> f64 {
    let (na, nb) = train.counts_for(a, b).unwrap_or((0, 0));
    (na + 1) as f64 / ((na + 1) + (nb + 1)) as f64
}

/// Embeds blade-chest parameters into the generalized model so the two
/// matchup functions agree on every pair.
///
/// Each player's embedding is the concatenation `[blade; chest]`, `Gamma` is
/// zero, and the free matrix has an identity upper-right block so that the
/// effective interaction matrix is `[[0, I], [-I, 0]]`.
pub fn degenerate_to_bci(bc: &BladeChestParams) -> GeneralParams {
    let d = bc.dim;
    let n = bc.blade.len();
    let embed = (0..n)
        .map(|p| {
            DVector::from_fn(2 * d, |i, _| {
                if i < d {
                    bc.blade[p][i]
                } else {
                    bc.chest[p][i - d]
                }
            })
        })
        .collect();
    let sigma_free = DMatrix::from_fn(2 * d, 2 * d, |i, j| {
        if j >= d && j - d == i {
            1.0
        } else {
            0.0
        }
    });
    GeneralParams {
        dim: 2 * d,
        embed,
        sigma_free,
        gamma_mat: DMatrix::zeros(2 * d, 2 * d),
    }
}

/// Random initialization: every parameter i.i.d. uniform in
/// `[-scale, scale]`, deterministic for a given seed.
pub fn init_params(
    kind: ModelKind,
    n_players: usize,
    dim: usize,
    scale: f64,
    seed: u64,
) -> Result<MatchupModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = move |rng: &mut ChaCha8Rng| -> f64 {
        if scale > 0.0 {
            rng.gen_range(-scale..=scale)
        } else {
            0.0
        }
    };
    match kind {
        ModelKind::Naive => Err(Error::UnsupportedKind(kind)),
        ModelKind::Bt => {
            let gamma = (0..n_players).map(|_| draw(&mut rng)).collect();
            Ok(MatchupModel::Bt(BtParams { gamma }))
        }
        ModelKind::Bci | ModelKind::Bcd => {
            if dim < 1 {
                return Err(Error::InvalidDimension { kind, min: 1, dim });
            }
            let mut blade = Vec::with_capacity(n_players);
            let mut chest = Vec::with_capacity(n_players);
            for _ in 0..n_players {
                blade.push(DVector::from_fn(dim, |_, _| draw(&mut rng)));
                chest.push(DVector::from_fn(dim, |_, _| draw(&mut rng)));
            }
            let params = BladeChestParams { dim, blade, chest };
            Ok(match kind {
                ModelKind::Bci => MatchupModel::Bci(params),
                _ => MatchupModel::Bcd(params),
            })
        }
        ModelKind::General => {
            if dim < 2 {
                return Err(Error::InvalidDimension { kind, min: 2, dim });
            }
            let embed = (0..n_players)
                .map(|_| DVector::from_fn(dim, |_, _| draw(&mut rng)))
                .collect();
            let sigma_free = DMatrix::from_fn(dim, dim, |_, _| draw(&mut rng));
            let gamma_mat = DMatrix::from_fn(dim, dim, |_, _| draw(&mut rng));
            Ok(MatchupModel::General(GeneralParams {
                dim,
                embed,
                sigma_free,
                gamma_mat,
            }))
        }
    }
}

// Checkpoint file: JSON with a version tag, the model kind, player labels in
// id order, and the parameter arrays (matrices flattened row-major).

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: String,
    kind: ModelKind,
    dim: usize,
    players: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    blade: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chest: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embed: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma_free: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma_mat: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<Vec<(u32, u32, u64, u64)>>,
}

fn matrix_to_rows(v: &[DVector<f64>]) -> Vec<Vec<f64>> {
    v.iter().map(|x| x.iter().copied().collect()).collect()
}

fn rows_to_vectors(rows: &[Vec<f64>], dim: usize, what: &str, path: &Path) -> Result<Vec<DVector<f64>>> {
    rows.iter()
        .map(|r| {
            if r.len() != dim {
                Err(bad_checkpoint(
                    path,
                    format!("{what} row has {} entries, expected {dim}", r.len()),
                ))
            } else {
                Ok(DVector::from_row_slice(r))
            }
        })
        .collect()
}

fn flat_to_matrix(flat: &[f64], dim: usize, what: &str, path: &Path) -> Result<DMatrix<f64>> {
    if flat.len() != dim * dim {
        return Err(bad_checkpoint(
            path,
            format!("{what} has {} entries, expected {}", flat.len(), dim * dim),
        ));
    }
    Ok(DMatrix::from_row_slice(dim, dim, flat))
}

fn bad_checkpoint(path: &Path, msg: impl Into<String>) -> Error {
    Error::BadCheckpoint {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Writes a model plus its player labels as a checkpoint file.
pub fn save_checkpoint(
    model: &MatchupModel,
    players: &PlayerTable,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if players.len() != model.n_players() {
        return Err(Error::PlayerMismatch(format!(
            "model has {} players, table has {}",
            model.n_players(),
            players.len()
        )));
    }
    let mut file = CheckpointFile {
        version: CHECKPOINT_VERSION.to_owned(),
        kind: model.kind(),
        dim: model.dim(),
        players: players.labels().to_vec(),
        gamma: None,
        blade: None,
        chest: None,
        embed: None,
        sigma_free: None,
        gamma_mat: None,
        counts: None,
    };
    match model {
        MatchupModel::Naive(p) => {
            file.counts = Some(p.entries().collect());
        }
        MatchupModel::Bt(p) => {
            file.gamma = Some(p.gamma.clone());
        }
        MatchupModel::Bci(p) | MatchupModel::Bcd(p) => {
            file.blade = Some(matrix_to_rows(&p.blade));
            file.chest = Some(matrix_to_rows(&p.chest));
        }
        MatchupModel::General(p) => {
            file.embed = Some(matrix_to_rows(&p.embed));
            file.sigma_free = Some(p.sigma_free.transpose().as_slice().to_vec());
            file.gamma_mat = Some(p.gamma_mat.transpose().as_slice().to_vec());
        }
    }
    let mut out = serde_json::to_string_pretty(&file)?;
    out.push('\n');
    std::fs::write(path, out)?;
    Ok(())
}

/// Loads a checkpoint, returning the model and its player table.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(MatchupModel, PlayerTable)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let file: CheckpointFile =
        serde_json::from_str(&text).map_err(|e| bad_checkpoint(path, e.to_string()))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(bad_checkpoint(
            path,
            format!("unsupported version {:?}", file.version),
        ));
    }
    let players = PlayerTable::from_labels(file.players.clone())?;
    let n = players.len();
    let require = |field: Option<&str>| bad_checkpoint(path, format!("missing field {field:?}"));
    let model = match file.kind {
        ModelKind::Naive => {
            let counts = file.counts.ok_or_else(|| require(Some("counts")))?;
            MatchupModel::Naive(NaiveParams::from_counts(n, &counts)?)
        }
        ModelKind::Bt => {
            let gamma = file.gamma.ok_or_else(|| require(Some("gamma")))?;
            if gamma.len() != n {
                return Err(bad_checkpoint(path, "gamma length != player count"));
            }
            MatchupModel::Bt(BtParams { gamma })
        }
        ModelKind::Bci | ModelKind::Bcd => {
            let blade = file.blade.ok_or_else(|| require(Some("blade")))?;
            let chest = file.chest.ok_or_else(|| require(Some("chest")))?;
            if blade.len() != n || chest.len() != n {
                return Err(bad_checkpoint(path, "blade/chest length != player count"));
            }
            let params = BladeChestParams {
                dim: file.dim,
                blade: rows_to_vectors(&blade, file.dim, "blade", path)?,
                chest: rows_to_vectors(&chest, file.dim, "chest", path)?,
            };
            match file.kind {
                ModelKind::Bci => MatchupModel::Bci(params),
                _ => MatchupModel::Bcd(params),
            }
        }
        ModelKind::General => {
            let embed = file.embed.ok_or_else(|| require(Some("embed")))?;
            if embed.len() != n {
                return Err(bad_checkpoint(path, "embed length != player count"));
            }
            let sigma = file.sigma_free.ok_or_else(|| require(Some("sigma_free")))?;
            let gamma = file.gamma_mat.ok_or_else(|| require(Some("gamma_mat")))?;
            MatchupModel::General(GeneralParams {
                dim: file.dim,
                embed: rows_to_vectors(&embed, file.dim, "embed", path)?,
                sigma_free: flat_to_matrix(&sigma, file.dim, "sigma_free", path)?,
                gamma_mat: flat_to_matrix(&gamma, file.dim, "gamma_mat", path)?,
            })
        }
    };
    Ok((model, players))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::testutil::table1_toy;
    use approx::assert_relative_eq;

    fn player(i: u32) -> PlayerId {
        PlayerId(i)
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn bt_matchup_values() {
        let p = BtParams { gamma: vec![2.0, 0.5] };
        assert_eq!(matchup_bt(&p, player(0), player(1)).unwrap(), 1.5);
        let same = BtParams { gamma: vec![0.7, 0.7] };
        assert_eq!(matchup_bt(&same, player(0), player(1)).unwrap(), 0.0);
    }

    #[test]
    fn bt_translation_invariance() {
        let mut r = rng(1);
        for _ in 0..50 {
            let gamma: Vec<f64> = (0..4).map(|_| r.gen_range(-3.0..3.0)).collect();
            let shift = r.gen_range(-10.0..10.0);
            let shifted: Vec<f64> = gamma.iter().map(|g| g + shift).collect();
            let p = BtParams { gamma };
            let q = BtParams { gamma: shifted };
            for a in 0..4u32 {
                for b in 0..4u32 {
                    if a == b {
                        continue;
                    }
                    let ma = matchup_bt(&p, player(a), player(b)).unwrap();
                    let mb = matchup_bt(&q, player(a), player(b)).unwrap();
                    assert!((ma - mb).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn bci_matchup_values() {
        let p = BladeChestParams {
            dim: 2,
            blade: vec![
                DVector::from_row_slice(&[1.0, 0.0]),
                DVector::from_row_slice(&[0.0, 0.0]),
            ],
            chest: vec![
                DVector::from_row_slice(&[0.0, 0.0]),
                DVector::from_row_slice(&[1.0, 0.0]),
            ],
        };
        assert_eq!(matchup_bci(&p, player(0), player(1)).unwrap(), 1.0);

        // One-dimensional worked example: 2*7 - 5*3 = -1.
        let q = BladeChestParams {
            dim: 1,
            blade: vec![DVector::from_element(1, 2.0), DVector::from_element(1, 5.0)],
            chest: vec![DVector::from_element(1, 3.0), DVector::from_element(1, 7.0)],
        };
        assert_eq!(matchup_bci(&q, player(0), player(1)).unwrap(), -1.0);

        // Identical blade=chest vectors on both sides cancel.
        let v = DVector::from_row_slice(&[0.3, -0.4]);
        let same = BladeChestParams {
            dim: 2,
            blade: vec![v.clone(), v.clone()],
            chest: vec![v.clone(), v],
        };
        assert_eq!(matchup_bci(&same, player(0), player(1)).unwrap(), 0.0);
    }

    #[test]
    fn bcd_matchup_values() {
        let zeros = DVector::from_row_slice(&[0.0, 0.0]);
        let p = BladeChestParams {
            dim: 2,
            blade: vec![zeros.clone(), DVector::from_row_slice(&[3.0, 4.0])],
            chest: vec![zeros.clone(), zeros.clone()],
        };
        assert_eq!(matchup_bcd(&p, player(0), player(1)).unwrap(), 25.0);

        let v = DVector::from_row_slice(&[1.0, -2.0]);
        let same = BladeChestParams {
            dim: 2,
            blade: vec![v.clone(), v.clone()],
            chest: vec![v.clone(), v],
        };
        assert_eq!(matchup_bcd(&same, player(0), player(1)).unwrap(), 0.0);
    }

    #[test]
    fn general_rps_construction() {
        // Three unit vectors at 120 degrees with a rotation-like interaction
        // produce a perfect 3-cycle of strength sqrt(3)/2.
        let s3 = 3.0f64.sqrt() / 2.0;
        let p = GeneralParams {
            dim: 2,
            embed: vec![
                DVector::from_row_slice(&[0.0, 1.0]),   // rock
                DVector::from_row_slice(&[-s3, -0.5]),  // paper
                DVector::from_row_slice(&[s3, -0.5]),   // scissors
            ],
            sigma_free: DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]),
            gamma_mat: DMatrix::zeros(2, 2),
        };
        let m_pr = matchup_general(&p, player(1), player(0)).unwrap();
        let m_rs = matchup_general(&p, player(0), player(2)).unwrap();
        let m_sp = matchup_general(&p, player(2), player(1)).unwrap();
        assert_relative_eq!(m_pr, s3, epsilon = 1e-12);
        assert_relative_eq!(m_rs, s3, epsilon = 1e-12);
        assert_relative_eq!(m_sp, s3, epsilon = 1e-12);
    }

    #[test]
    fn general_self_match_is_exactly_zero() {
        let mut r = rng(4);
        for _ in 0..20 {
            let d = 3;
            let v = DVector::from_fn(d, |_, _| r.gen_range(-2.0..2.0));
            let p = GeneralParams {
                dim: d,
                embed: vec![v.clone(), v],
                sigma_free: DMatrix::from_fn(d, d, |_, _| r.gen_range(-2.0..2.0)),
                gamma_mat: DMatrix::from_fn(d, d, |_, _| r.gen_range(-2.0..2.0)),
            };
            assert_eq!(matchup_general(&p, player(0), player(1)).unwrap(), 0.0);
        }
    }

    #[test]
    fn general_strength_term_is_active() {
        // With Gamma != 0 and unequal norms the intrinsic term shifts M away
        // from the pure interaction value.
        let p = GeneralParams {
            dim: 2,
            embed: vec![
                DVector::from_row_slice(&[1.0, 0.0]),
                DVector::from_row_slice(&[0.0, 2.0]),
            ],
            sigma_free: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            gamma_mat: DMatrix::identity(2, 2),
        };
        let m = matchup_general(&p, player(0), player(1)).unwrap();
        // Interaction: (1)(1*2 - 0*0) = 2; strength: 1 - 4 = -3.
        assert_relative_eq!(m, -1.0, epsilon = 1e-12);
        let interaction_only = 2.0;
        assert!((m - interaction_only).abs() > 1.0);
    }

    #[test]
    fn effective_sigma_is_exactly_antisymmetric() {
        let mut r = rng(9);
        for _ in 0..20 {
            let d = 4;
            let sf = DMatrix::from_fn(d, d, |_, _| r.gen_range(-5.0..5.0));
            let p = GeneralParams {
                dim: d,
                embed: vec![],
                sigma_free: sf,
                gamma_mat: DMatrix::zeros(d, d),
            };
            let s = p.effective_sigma();
            for i in 0..d {
                assert_eq!(s[(i, i)], 0.0);
                for j in 0..d {
                    assert_eq!(s[(i, j)], -s[(j, i)]);
                }
            }
        }
    }

    #[test]
    fn symmetry_across_all_kinds() {
        let mut r = rng(11);
        for kind in [ModelKind::Bt, ModelKind::Bci, ModelKind::Bcd, ModelKind::General] {
            for _ in 0..100 {
                let dim = if kind == ModelKind::General { 3 } else { 2 };
                let m = init_params(kind, 5, dim, 1.0, r.next_u64()).unwrap();
                for a in 0..5u32 {
                    for b in 0..5u32 {
                        if a == b {
                            continue;
                        }
                        let mab = m.matchup_value(player(a), player(b)).unwrap();
                        let mba = m.matchup_value(player(b), player(a)).unwrap();
                        let tol = 1e-12 * mab.abs().max(1.0);
                        assert!(
                            (mab + mba).abs() <= tol,
                            "{kind}: {mab} + {mba} not antisymmetric"
                        );
                    }
                }
            }
        }
    }

    use rand::RngCore;

    #[test]
    fn logistic_values() {
        assert_eq!(logistic(0.0), 0.5);
        assert_relative_eq!(logistic(3.0f64.ln()), 0.75, epsilon = 1e-12);
        let p = logistic(-1000.0);
        assert!(p > 0.0 && p <= 1e-300, "saturated low: {p}");
        let q = logistic(1000.0);
        assert!(q < 1.0 && q > 1.0 - 1e-15, "saturated high: {q}");
        assert!(logistic(f64::MIN).is_finite());
    }

    #[test]
    fn probability_complement_is_exact() {
        let mut r = rng(21);
        for kind in [ModelKind::Bt, ModelKind::Bci, ModelKind::Bcd, ModelKind::General] {
            for _ in 0..200 {
                let m = init_params(kind, 4, 2, 1.5, r.next_u64()).unwrap();
                let p = m.win_probability(player(0), player(1)).unwrap();
                let q = m.win_probability(player(1), player(0)).unwrap();
                assert_eq!(p + q, 1.0, "{kind}: {p} + {q} != 1");
            }
        }
        // Naive complement.
        let naive = MatchupModel::Naive(NaiveParams::fit(&table1_toy()));
        let p = naive.win_probability(player(0), player(1)).unwrap();
        let q = naive.win_probability(player(1), player(0)).unwrap();
        assert_eq!(p + q, 1.0);
    }

    #[test]
    fn naive_probabilities() {
        let toy = table1_toy();
        // First toy pair has counts (10, 5): smoothed 11/17.
        assert_relative_eq!(
            naive_probability(&toy, player(0), player(1)),
            11.0 / 17.0,
            epsilon = 1e-12
        );
        // Unseen pair (2, 4) in the toy data.
        assert_eq!(naive_probability(&toy, player(1), player(3)), 0.5);
        // Zero-count smoothing symmetry.
        let naive = NaiveParams::from_counts(2, &[(0, 1, 0, 0)]).unwrap();
        let m = MatchupModel::Naive(naive);
        assert_eq!(m.win_probability(player(0), player(1)).unwrap(), 0.5);
    }

    #[test]
    fn predict_winner_follows_sign_and_seeded_ties() {
        let m = MatchupModel::Bt(BtParams { gamma: vec![2.3, 0.0, 0.0] });
        let mut r = rng(3);
        assert_eq!(m.predict_winner(player(0), player(1), &mut r).unwrap(), player(0));
        let m2 = MatchupModel::Bt(BtParams { gamma: vec![0.0, 0.1, 0.0] });
        assert_eq!(m2.predict_winner(player(0), player(1), &mut r).unwrap(), player(1));
        // Exact tie: deterministic under the same seed.
        let tied = MatchupModel::Bt(BtParams { gamma: vec![0.0, 0.0, 0.0] });
        let w1 = tied.predict_winner(player(1), player(2), &mut rng(7)).unwrap();
        let w2 = tied.predict_winner(player(1), player(2), &mut rng(7)).unwrap();
        assert_eq!(w1, w2);
    }

    #[test]
    fn degenerate_to_bci_reproduces_values() {
        // d' = 1 worked example: M = -1 on both sides.
        let bc = BladeChestParams {
            dim: 1,
            blade: vec![DVector::from_element(1, 2.0), DVector::from_element(1, 5.0)],
            chest: vec![DVector::from_element(1, 3.0), DVector::from_element(1, 7.0)],
        };
        let gen = degenerate_to_bci(&bc);
        assert_relative_eq!(
            matchup_general(&gen, player(0), player(1)).unwrap(),
            -1.0,
            epsilon = 1e-12
        );

        let mut r = rng(31);
        for dim in [1usize, 2, 3] {
            for _ in 0..100 {
                let m = init_params(ModelKind::Bci, 4, dim, 1.0, r.next_u64()).unwrap();
                let bc = match &m {
                    MatchupModel::Bci(p) => p.clone(),
                    _ => unreachable!(),
                };
                let gen = degenerate_to_bci(&bc);
                for a in 0..4u32 {
                    for b in 0..4u32 {
                        if a == b {
                            continue;
                        }
                        let mg = matchup_general(&gen, player(a), player(b)).unwrap();
                        let mb = matchup_bci(&bc, player(a), player(b)).unwrap();
                        assert!((mg - mb).abs() <= 1e-12, "dim {dim}: {mg} vs {mb}");
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_effective_sigma_is_block_structure() {
        let bc = BladeChestParams {
            dim: 2,
            blade: vec![DVector::zeros(2)],
            chest: vec![DVector::zeros(2)],
        };
        let gen = degenerate_to_bci(&bc);
        let s = gen.effective_sigma();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                -1.0, 0.0, 0.0, 0.0, //
                0.0, -1.0, 0.0, 0.0,
            ],
        );
        assert_eq!(s, expected);
        assert!(gen.gamma_mat.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn init_params_shapes_and_determinism() {
        let m = init_params(ModelKind::General, 3, 2, 0.1, 17).unwrap();
        match &m {
            MatchupModel::General(p) => {
                assert_eq!(p.embed.len(), 3);
                assert!(p.embed.iter().all(|e| e.len() == 2));
                assert_eq!(p.sigma_free.shape(), (2, 2));
                assert_eq!(p.gamma_mat.shape(), (2, 2));
                let entries: usize =
                    p.embed.iter().map(|e| e.len()).sum::<usize>() + 2 * (2 * 2);
                assert_eq!(entries, 14);
                assert!(p
                    .embed
                    .iter()
                    .flat_map(|e| e.iter())
                    .all(|&x| (-0.1..=0.1).contains(&x)));
            }
            _ => panic!("wrong kind"),
        }
        let m2 = init_params(ModelKind::General, 3, 2, 0.1, 17).unwrap();
        assert_eq!(m, m2);

        let zero = init_params(ModelKind::Bci, 3, 2, 0.0, 5).unwrap();
        assert_eq!(zero.matchup_value(player(0), player(1)).unwrap(), 0.0);

        assert!(matches!(
            init_params(ModelKind::General, 3, 1, 0.1, 0),
            Err(Error::InvalidDimension { min: 2, dim: 1, .. })
        ));
        assert!(matches!(
            init_params(ModelKind::Naive, 3, 1, 0.1, 0),
            Err(Error::UnsupportedKind(ModelKind::Naive))
        ));
    }

    #[test]
    fn unknown_player_is_rejected() {
        let m = init_params(ModelKind::Bt, 2, 1, 0.1, 0).unwrap();
        assert!(matches!(
            m.matchup_value(player(0), player(9)),
            Err(Error::UnknownPlayer(9))
        ));
    }

    #[test]
    fn checkpoint_round_trip_all_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let players = PlayerTable::from_labels(["x", "y", "z"]).unwrap();
        let mut r = rng(23);
        for kind in [ModelKind::Bt, ModelKind::Bci, ModelKind::Bcd, ModelKind::General] {
            let dim = if kind == ModelKind::General { 3 } else { 2 };
            let m = init_params(kind, 3, dim, 0.5, r.next_u64()).unwrap();
            let path = dir.path().join(format!("{kind}.json"));
            save_checkpoint(&m, &players, &path).unwrap();
            let (back, table) = load_checkpoint(&path).unwrap();
            assert_eq!(back, m);
            assert_eq!(table, players);
        }
        // Naive round trip.
        let naive = MatchupModel::Naive(NaiveParams::fit(&table1_toy()));
        let toy_players = table1_toy().players;
        let path = dir.path().join("naive.json");
        save_checkpoint(&naive, &toy_players, &path).unwrap();
        let (back, _) = load_checkpoint(&path).unwrap();
        assert_eq!(back, naive);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn matchup_symmetry_and_probability_complement(
                kind_idx in 0usize..4,
                seed in any::<u64>(),
                scale in 0.01f64..2.0,
            ) {
                let kind = [ModelKind::Bt, ModelKind::Bci, ModelKind::Bcd, ModelKind::General][kind_idx];
                let dim = if kind == ModelKind::General { 2 } else { 1 };
                let m = init_params(kind, 3, dim, scale, seed).unwrap();
                let (a, b) = (PlayerId(0), PlayerId(2));
                let mab = m.matchup_value(a, b).unwrap();
                let mba = m.matchup_value(b, a).unwrap();
                prop_assert!((mab + mba).abs() <= 1e-12 * mab.abs().max(1.0));
                let p = m.win_probability(a, b).unwrap();
                let q = m.win_probability(b, a).unwrap();
                prop_assert!(p > 0.0 && p < 1.0);
                prop_assert_eq!(p + q, 1.0);
            }

            #[test]
            fn logistic_stays_in_open_unit_interval(m in -1e6f64..1e6) {
                let p = logistic(m);
                prop_assert!(p > 0.0 && p < 1.0);
            }

            // Outside the saturation clamp, ln(logistic(m)) and the stable
            // log form agree. The complement branch carries an absolute
            // error of ~2^-53 in p, hence ~2^-53/p on the log scale.
            #[test]
            fn log_logistic_consistent_below_saturation(m in -30.0f64..30.0) {
                let p = logistic(m);
                let tol = 1e-15 / p + 1e-12;
                prop_assert!((log_logistic(m) - p.ln()).abs() <= tol);
            }
        }
    }

    #[test]
    fn checkpoint_rejects_bad_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(
            &path,
            r#"{"version":"other","kind":"bt","dim":1,"players":["a"],"gamma":[0.0]}"#,
        )
        .unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::BadCheckpoint { .. })
        ));
    }
}
