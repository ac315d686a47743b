//! Instance-strategy bipartite graph and greedy SetCover pruning.

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, RewardTable};
use crate::error::{Error, Result};
use crate::model::StrategyLibrary;

/// Default edge tolerance for both infeasibility and suboptimality.
pub const DEFAULT_EPS: f64 = 1e-4;

/// Edge `(i, j)` exists when strategy `j` solves instance `i` within `(eps_p, eps_d)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub n_instances: usize,
    pub n_strategies: usize,
    /// Sorted covered instances for each strategy.
    pub adjacency: Vec<Vec<usize>>,
    pub eps_p: f64,
    pub eps_d: f64,
}

impl BipartiteGraph {
    pub fn from_adjacency(n_instances: usize, adjacency: Vec<Vec<usize>>) -> Self {
        Self { n_instances, n_strategies: adjacency.len(), adjacency, eps_p: f64::NAN, eps_d: f64::NAN }
    }

    /// Instances with no incident edge.
    pub fn uncovered_instances(&self) -> Vec<usize> {
        let mut seen = FixedBitSet::with_capacity(self.n_instances);
        for adj in &self.adjacency {
            seen.extend(adj.iter().copied());
        }
        seen.zeroes().collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[j].binary_search(&i).is_ok()
    }
}

pub fn build_bipartite_from_table(table: &RewardTable, eps_p: f64, eps_d: f64) -> Result<BipartiteGraph> {
    if !table.is_complete() {
        return Err(Error::Precondition("reward table incomplete".into()));
    }
    let adjacency = (0..table.cols)
        .map(|j| (0..table.rows).filter(|&i| table.get(i, j).is_some_and(|r| r.within(eps_p, eps_d))).collect())
        .collect();
    Ok(BipartiteGraph { n_instances: table.rows, n_strategies: table.cols, adjacency, eps_p, eps_d })
}

pub fn build_bipartite(ds: &Dataset, eps_p: f64, eps_d: f64) -> Result<BipartiteGraph> {
    let table = ds.reward_table.as_ref().ok_or_else(|| Error::Precondition("reward table incomplete".into()))?;
    build_bipartite_from_table(table, eps_p, eps_d)
}

/// Greedy cover: repeatedly take the strategy covering the most uncovered
/// instances (lowest index on ties). Returns the selected indices in order.
pub fn greedy_cover_indices(g: &BipartiteGraph) -> Result<Vec<usize>> {
    let missing = g.uncovered_instances();
    if !missing.is_empty() {
        return Err(Error::Precondition(format!("{} instances have no edge (first: {})", missing.len(), missing[0])));
    }
    let sets: Vec<FixedBitSet> = g
        .adjacency
        .iter()
        .map(|adj| {
            let mut s = FixedBitSet::with_capacity(g.n_instances);
            s.extend(adj.iter().copied());
            s
        })
        .collect();
    let mut uncovered = FixedBitSet::with_capacity(g.n_instances);
    uncovered.insert_range(..);
    let mut selected = Vec::new();
    while !uncovered.is_clear() {
        let mut best = (0usize, 0usize);
        for (j, s) in sets.iter().enumerate() {
            let gain = s.intersection_count(&uncovered);
            if gain > best.1 {
                best = (j, gain);
            }
        }
        selected.push(best.0);
        uncovered.difference_with(&sets[best.0]);
    }
    Ok(selected)
}

/// The pruned library `S^P`, re-indexed in selection order; `source_indices`
/// maps each new index back to `library`.
pub fn greedy_set_cover(g: &BipartiteGraph, library: &StrategyLibrary) -> Result<StrategyLibrary> {
    if g.n_strategies != library.len() {
        return Err(Error::InvalidArgument(format!("graph has {} strategies, library {}", g.n_strategies, library.len())));
    }
    let selected = greedy_cover_indices(g)?;
    let counts = selected.iter().map(|&j| library.counts()[j]).collect();
    Ok(StrategyLibrary::pruned_from(library, &selected, counts))
}

/// Raw index -> pruned index, for strategies kept by pruning.
pub fn old_to_new(pruned: &StrategyLibrary) -> std::collections::BTreeMap<usize, usize> {
    pruned.source_indices().unwrap_or(&[]).iter().enumerate().map(|(new, &old)| (old, new)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    /// Covered-instance count per strategy.
    pub covered: Vec<usize>,
    /// Mean over strategies of `covered / N`.
    pub mean_fraction: f64,
    pub max_fraction: f64,
}

pub fn coverage_stats(g: &BipartiteGraph) -> CoverageStats {
    let covered: Vec<usize> = g.adjacency.iter().map(Vec::len).collect();
    let n = g.n_instances.max(1) as f64;
    let fractions: Vec<f64> = covered.iter().map(|&c| c as f64 / n).collect();
    let mean_fraction = if fractions.is_empty() { 0.0 } else { fractions.iter().sum::<f64>() / fractions.len() as f64 };
    let max_fraction = fractions.iter().copied().fold(0.0, f64::max);
    CoverageStats { covered, mean_fraction, max_fraction }
}

/// Every instance has at least one edge into the selected strategies.
pub fn covers_all(g: &BipartiteGraph, selected: &[usize]) -> bool {
    let mut seen = FixedBitSet::with_capacity(g.n_instances);
    for &j in selected {
        seen.extend(g.adjacency[j].iter().copied());
    }
    seen.is_full()
}
