//! Synthetic datasets with planted cyclic structure.
//!
//! Players are arranged into cyclic cliques that share a single pivot
//! player. Each clique is a dominance ring through the pivot with the
//! remaining in-clique pairs filled transitively; cliques are joined by
//! transitive edges from the earlier clique's pivot-beater to the later
//! clique's non-pivot members. With two 3-cliques this reproduces the
//! nested two-triangle structure over five players.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{ingest, Dataset, PlayerId, PlayerTable, RawOutcome};
use crate::error::{Error, Result};
use crate::intransitivity::{intrans_at_3, players_in_triangles, DominanceGraph};

/// Generator settings for one synthetic dataset.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    /// Sizes of the planted cyclic cliques (each >= 3); all share one pivot.
    pub cycle_sizes: Vec<usize>,
    /// Outcomes generated per planted pair.
    pub outcomes_per_pair: u64,
    /// Probability of flipping each generated outcome, in [0, 0.5) so the
    /// planted majority directions survive in expectation.
    pub noise: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.cycle_sizes.is_empty() {
            return Err(Error::InvalidSynthSpec("no cycle sizes given".into()));
        }
        if let Some(&bad) = self.cycle_sizes.iter().find(|&&c| c < 3) {
            return Err(Error::InvalidSynthSpec(format!(
                "cycle size must be >= 3, got {bad}"
            )));
        }
        if self.outcomes_per_pair == 0 {
            return Err(Error::InvalidSynthSpec("outcomes per pair must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&self.noise) {
            return Err(Error::InvalidSynthSpec(format!(
                "noise must be in [0, 0.5), got {}",
                self.noise
            )));
        }
        Ok(())
    }

    pub fn n_players(&self) -> usize {
        1 + self.cycle_sizes.iter().map(|c| c - 1).sum::<usize>()
    }
}

/// A generated dataset with its noise-free ground truth.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub outcomes: Vec<RawOutcome>,
    /// The planted majority digraph (what the dominance graph is at noise 0).
    pub planted: DominanceGraph,
    pub planted_triangles: u64,
    pub planted_intrans_at_3: f64,
    pub planted_players_in_triangles: usize,
}

/// Directed edges of the planted structure, before noise.
fn planted_edges(cycle_sizes: &[usize]) -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    let mut groups: Vec<Vec<u32>> = Vec::new();
    let mut next_id = 1u32;
    for &size in cycle_sizes {
        // Ring members in order: pivot, then fresh players.
        let mut ring = vec![0u32];
        for _ in 0..size - 1 {
            ring.push(next_id);
            next_id += 1;
        }
        for i in 0..size {
            edges.push((ring[i], ring[(i + 1) % size]));
        }
        // Transitive fill for non-adjacent in-clique pairs.
        for i in 0..size {
            for j in (i + 2)..size {
                if i == 0 && j == size - 1 {
                    continue; // ring closure, already present
                }
                edges.push((ring[i], ring[j]));
            }
        }
        groups.push(ring);
    }
    // Join cliques: the earlier clique's pivot-beater dominates the later
    // clique's non-pivot members.
    for i in 0..groups.len() {
        for j in (i + 1)..groups.len() {
            let beater = *groups[i].last().expect("ring is non-empty");
            for &v in &groups[j][1..] {
                edges.push((beater, v));
            }
        }
    }
    edges
}

/// Generates the dataset described by `spec`.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let n = spec.n_players();
    let players = PlayerTable::from_labels((0..n).map(|i| format!("p{i}")))?;
    let edges = planted_edges(&spec.cycle_sizes);
    let planted = DominanceGraph::from_edges(n, &edges)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut outcomes = Vec::with_capacity(edges.len() * spec.outcomes_per_pair as usize);
    for &(u, v) in &edges {
        for _ in 0..spec.outcomes_per_pair {
            let flip = spec.noise > 0.0 && rng.gen_bool(spec.noise);
            outcomes.push(RawOutcome {
                a: PlayerId(u),
                b: PlayerId(v),
                a_won: !flip,
            });
        }
    }
    let dataset = ingest(&outcomes, players)?;
    let (planted_triangles, planted_intrans_at_3) = intrans_at_3(&planted);
    let planted_players_in_triangles = players_in_triangles(&planted).len();
    Ok(SynthOutput {
        dataset,
        outcomes,
        planted,
        planted_triangles,
        planted_intrans_at_3,
        planted_players_in_triangles,
    })
}
