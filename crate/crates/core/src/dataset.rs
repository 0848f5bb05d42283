//! Pairwise outcome ingestion, aggregation into collapsed 4-tuples, and
//! cross-validation fold splitting.
//!
//! Raw win/loss records are collapsed into one [`AggregatedMatchup`] per
//! unordered player pair, stored in canonical orientation (lower id first).
//! Fold splitting operates on individual outcomes, not tuples: tuples are
//! expanded, outcomes are shuffled into near-equal folds, and each fold is
//! re-aggregated.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense index into a [`PlayerTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub u32);

impl PlayerId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bidirectional mapping between opaque string labels and dense ids 0..M-1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlayerTable {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl PlayerTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a table from labels in id order. Labels must be unique.
    pub fn from_labels<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut table = Self::new();
        for label in labels {
            table.insert(label.into())?;
        }
        Ok(table)
    }

    /// Appends a new label, assigning the next dense id.
    pub fn insert(&mut self, label: String) -> Result<PlayerId> {
        if self.index.contains_key(&label) {
            return Err(Error::DuplicateLabel(label));
        }
        let id = self.labels.len() as u32;
        self.index.insert(label.clone(), id);
        self.labels.push(label);
        Ok(PlayerId(id))
    }

    /// Looks up `label`, inserting it if missing.
    pub fn get_or_insert(&mut self, label: &str) -> PlayerId {
        if let Some(&id) = self.index.get(label) {
            return PlayerId(id);
        }
        let id = self.labels.len() as u32;
        self.index.insert(label.to_owned(), id);
        self.labels.push(label.to_owned());
        PlayerId(id)
    }

    pub fn id_of(&self, label: &str) -> Option<PlayerId> {
        self.index.get(label).map(|&id| PlayerId(id))
    }

    pub fn label(&self, id: PlayerId) -> Option<&str> {
        self.labels.get(id.index()).map(String::as_str)
    }

    pub fn contains(&self, id: PlayerId) -> bool {
        id.index() < self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels in id order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (PlayerId, &str)> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| (PlayerId(i as u32), l.as_str()))
    }
}

/// A single observed outcome: `a` played `b` and won iff `a_won`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawOutcome {
    pub a: PlayerId,
    pub b: PlayerId,
    pub a_won: bool,
}

/// Collapsed counts for one unordered pair, canonically oriented so that
/// `a.0 < b.0`; `wins_a` counts a's wins over b and `wins_b` the reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatedMatchup {
    pub a: PlayerId,
    pub b: PlayerId,
    pub wins_a: u64,
    pub wins_b: u64,
}

impl AggregatedMatchup {
    pub fn total(&self) -> u64 {
        self.wins_a + self.wins_b
    }
}

/// A player table plus one collapsed tuple per observed unordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub players: PlayerTable,
    pub records: Vec<AggregatedMatchup>,
}

impl Dataset {
    pub fn num_players(&self) -> usize {
        self.players.len()
    }

    /// Total count of individual outcomes across all tuples.
    pub fn total_outcomes(&self) -> u64 {
        self.records.iter().map(AggregatedMatchup::total).sum()
    }

    /// Win counts for the pair `(a, b)` from a's perspective, if observed.
    pub fn counts_for(&self, a: PlayerId, b: PlayerId) -> Option<(u64, u64)> {
        let (lo, hi) = if a.0 < b.0 { (a, b) } else { (b, a) };
        let idx = self
            .records
            .binary_search_by_key(&(lo, hi), |r| (r.a, r.b))
            .ok()?;
        let r = &self.records[idx];
        if a.0 < b.0 {
            Some((r.wins_a, r.wins_b))
        } else {
            Some((r.wins_b, r.wins_a))
        }
    }

    /// Expands every tuple back into individual outcomes, in record order.
    pub fn expand_outcomes(&self) -> Vec<RawOutcome> {
        let mut out = Vec::with_capacity(self.total_outcomes() as usize);
        for r in &self.records {
            for _ in 0..r.wins_a {
                out.push(RawOutcome {
                    a: r.a,
                    b: r.b,
                    a_won: true,
                });
            }
            for _ in 0..r.wins_b {
                out.push(RawOutcome {
                    a: r.a,
                    b: r.b,
                    a_won: false,
                });
            }
        }
        out
    }
}

/// Collapses `(a, b, wins_for_a, wins_for_b)` contributions into canonical,
/// sorted records. Duplicate pairs are summed.
fn aggregate<I>(contributions: I) -> Vec<AggregatedMatchup>
where
    I: IntoIterator<Item = (PlayerId, PlayerId, u64, u64)>,
{
    let mut map: BTreeMap<(PlayerId, PlayerId), (u64, u64)> = BTreeMap::new();
    for (a, b, wa, wb) in contributions {
        let (key, add) = if a.0 < b.0 {
            ((a, b), (wa, wb))
        } else {
            ((b, a), (wb, wa))
        };
        let entry = map.entry(key).or_insert((0, 0));
        entry.0 += add.0;
        entry.1 += add.1;
    }
    map.into_iter()
        .map(|((a, b), (wins_a, wins_b))| AggregatedMatchup {
            a,
            b,
            wins_a,
            wins_b,
        })
        .collect()
}

/// Collapses raw outcomes into a dataset over the given player table.
///
/// Total outcome count is conserved. Rejects self-matches and ids outside the
/// table, reporting the offending row index.
pub fn ingest(raw: &[RawOutcome], players: PlayerTable) -> Result<Dataset> {
    let n = players.len() as u32;
    for (row, o) in raw.iter().enumerate() {
        if o.a.0 >= n {
            return Err(Error::UnknownPlayerRow { row, id: o.a.0 });
        }
        if o.b.0 >= n {
            return Err(Error::UnknownPlayerRow { row, id: o.b.0 });
        }
        if o.a == o.b {
            return Err(Error::SelfMatch { row });
        }
    }
    let records = aggregate(raw.iter().map(|o| {
        if o.a_won {
            (o.a, o.b, 1, 0)
        } else {
            (o.a, o.b, 0, 1)
        }
    }));
    Ok(Dataset { players, records })
}

fn dataset_from_outcomes(players: &PlayerTable, outcomes: &[RawOutcome]) -> Dataset {
    let records = aggregate(outcomes.iter().map(|o| {
        if o.a_won {
            (o.a, o.b, 1, 0)
        } else {
            (o.a, o.b, 0, 1)
        }
    }));
    Dataset {
        players: players.clone(),
        records,
    }
}

/// Splits a dataset into `k` (train, test) pairs for cross-validation.
///
/// The split unit is the individual outcome: tuples are expanded, outcomes
/// are shuffled with a generator seeded by `seed`, dealt into `k` near-equal
/// folds, and both sides are re-aggregated. Outcome totals are partitioned
/// exactly and the result is deterministic for a given seed.
pub fn split_folds(d: &Dataset, k: usize, seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    if d.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total = d.total_outcomes();
    if k < 2 || k as u64 > total {
        return Err(Error::InvalidFoldCount { k, outcomes: total });
    }
    let mut outcomes = d.expand_outcomes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    outcomes.shuffle(&mut rng);

    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let (test, train): (Vec<_>, Vec<_>) = outcomes
            .iter()
            .enumerate()
            .partition(|(i, _)| i % k == fold);
        let test: Vec<RawOutcome> = test.into_iter().map(|(_, o)| *o).collect();
        let train: Vec<RawOutcome> = train.into_iter().map(|(_, o)| *o).collect();
        folds.push((
            dataset_from_outcomes(&d.players, &train),
            dataset_from_outcomes(&d.players, &test),
        ));
    }
    Ok(folds)
}

/// Splits off roughly `fraction` of the outcomes as a held-out set.
///
/// Returns `(train, None)` when the requested fraction rounds to zero
/// outcomes. The training side is never left empty.
pub fn holdout_split(d: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Option<Dataset>)> {
    if d.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!(
            "holdout fraction must be in [0, 1), got {fraction}"
        )));
    }
    let total = d.total_outcomes();
    let held = ((total as f64 * fraction).round() as u64).min(total - 1) as usize;
    if held == 0 {
        return Ok((d.clone(), None));
    }
    let mut outcomes = d.expand_outcomes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    outcomes.shuffle(&mut rng);
    let (held_out, kept) = outcomes.split_at(held);
    Ok((
        dataset_from_outcomes(&d.players, kept),
        Some(dataset_from_outcomes(&d.players, held_out)),
    ))
}

// File formats. Raw: `winner,loser` or `a,b,a_won` with a_won in {0,1};
// collapsed: `a,b,n_a,n_b`. Headers matching those exact column names are
// skipped; labels are mapped to dense ids in order of first appearance.

fn is_header(fields: &[&str]) -> bool {
    let lower: Vec<String> = fields.iter().map(|f| f.to_ascii_lowercase()).collect();
    let lower: Vec<&str> = lower.iter().map(String::as_str).collect();
    matches!(
        lower.as_slice(),
        ["winner", "loser"] | ["a", "b", "a_won"] | ["a", "b", "n_a", "n_b"] | ["id", "label"]
    )
}

fn malformed(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::MalformedLine {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_count(path: &Path, line: u64, field: &str, name: &str) -> Result<u64> {
    let v: i64 = field
        .parse()
        .map_err(|_| malformed(path, line, format!("{name} is not an integer: {field:?}")))?;
    if v < 0 {
        return Err(malformed(path, line, format!("negative count {name}={v}")));
    }
    Ok(v as u64)
}

/// Reads a dataset from a raw or collapsed CSV file; the format is detected
/// from the first data line's column count (2 or 3 raw, 4 collapsed).
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let mut players = PlayerTable::new();
    let mut contributions: Vec<(PlayerId, PlayerId, u64, u64)> = Vec::new();
    let mut width: Option<usize> = None;

    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<&str> = record.iter().collect();
        if fields.is_empty() || (fields.len() == 1 && fields[0].is_empty()) {
            continue;
        }
        if width.is_none() && is_header(&fields) {
            continue;
        }
        let w = *width.get_or_insert(fields.len());
        if fields.len() != w {
            return Err(malformed(
                path,
                line,
                format!("expected {w} fields, got {}", fields.len()),
            ));
        }
        match w {
            2 | 3 => {
                let a_won = match w {
                    2 => true,
                    _ => match fields[2] {
                        "1" => true,
                        "0" => false,
                        other => {
                            return Err(malformed(
                                path,
                                line,
                                format!("a_won must be 0 or 1, got {other:?}"),
                            ))
                        }
                    },
                };
                if fields[0] == fields[1] {
                    return Err(malformed(path, line, "player matched against itself"));
                }
                let a = players.get_or_insert(fields[0]);
                let b = players.get_or_insert(fields[1]);
                contributions.push(if a_won { (a, b, 1, 0) } else { (a, b, 0, 1) });
            }
            4 => {
                if fields[0] == fields[1] {
                    return Err(malformed(path, line, "player matched against itself"));
                }
                let n_a = parse_count(path, line, fields[2], "n_a")?;
                let n_b = parse_count(path, line, fields[3], "n_b")?;
                if n_a + n_b == 0 {
                    return Err(malformed(path, line, "pair with zero outcomes"));
                }
                let a = players.get_or_insert(fields[0]);
                let b = players.get_or_insert(fields[1]);
                contributions.push((a, b, n_a, n_b));
            }
            other => {
                return Err(malformed(
                    path,
                    line,
                    format!("expected 2, 3, or 4 fields, got {other}"),
                ))
            }
        }
    }

    let records = aggregate(contributions);
    Ok(Dataset { players, records })
}

/// Writes a dataset in collapsed format (`a,b,n_a,n_b`, canonical order).
pub fn write_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["a", "b", "n_a", "n_b"])?;
    for r in &d.records {
        let a = d.players.label(r.a).ok_or(Error::UnknownPlayer(r.a.0))?;
        let b = d.players.label(r.b).ok_or(Error::UnknownPlayer(r.b.0))?;
        writer.write_record([a, b, &r.wins_a.to_string(), &r.wins_b.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes raw outcomes in `winner,loser` format.
pub fn write_raw(players: &PlayerTable, outcomes: &[RawOutcome], path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["winner", "loser"])?;
    for o in outcomes {
        let (w, l) = if o.a_won { (o.a, o.b) } else { (o.b, o.a) };
        let w = players.label(w).ok_or(Error::UnknownPlayer(w.0))?;
        let l = players.label(l).ok_or(Error::UnknownPlayer(l.0))?;
        writer.write_record([w, l])?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads an `id,label` player table; ids must be exactly 0..M-1.
pub fn read_player_table(path: impl AsRef<Path>) -> Result<PlayerTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<(u32, String)> = Vec::new();
    let mut saw_data = false;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<&str> = record.iter().collect();
        if fields.is_empty() || (fields.len() == 1 && fields[0].is_empty()) {
            continue;
        }
        if !saw_data && is_header(&fields) {
            continue;
        }
        saw_data = true;
        if fields.len() != 2 {
            return Err(malformed(path, line, "expected `id,label`"));
        }
        let id: u32 = fields[0]
            .parse()
            .map_err(|_| malformed(path, line, format!("bad id {:?}", fields[0])))?;
        rows.push((id, fields[1].to_owned()));
    }
    rows.sort_by_key(|(id, _)| *id);
    let mut table = PlayerTable::new();
    for (expect, (id, label)) in rows.into_iter().enumerate() {
        if id as usize != expect {
            return Err(Error::MalformedLine {
                path: path.display().to_string(),
                line: 0,
                msg: format!("player ids are not dense: expected {expect}, found {id}"),
            });
        }
        table.insert(label)?;
    }
    Ok(table)
}

/// Writes an `id,label` player table.
pub fn write_player_table(players: &PlayerTable, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["id", "label"])?;
    for (id, label) in players.iter() {
        writer.write_record([&id.to_string(), label])?;
    }
    writer.flush()?;
    Ok(())
}
