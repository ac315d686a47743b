//! Strategy generation: sample, label with exact optima, stop by the
//! Good-Turing estimate, and score strategies against instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milp::{solve_milp, BnbConfig};
use crate::model::{sample_instance, MilpInstance, ParameterizedFamily, SolveStatus, StrategyLibrary};
use crate::reduction::{apply_strategy, extract_strategy, EvalRecord};

/// Fraction of the total count carried by strategies seen exactly once.
pub fn good_turing(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 1.0;
    }
    let n1 = counts.iter().filter(|&&c| c == 1).count();
    n1 as f64 / n as f64
}

/// Incremental Good-Turing estimate over a stream of label indices.
#[derive(Clone, Debug, Default)]
pub struct GoodTuringTracker {
    counts: Vec<usize>,
    n: usize,
    n1: usize,
}

impl GoodTuringTracker {
    pub fn push(&mut self, label: usize) {
        if label >= self.counts.len() {
            self.counts.resize(label + 1, 0);
        }
        let c = &mut self.counts[label];
        *c += 1;
        match *c {
            1 => self.n1 += 1,
            2 => self.n1 -= 1,
            _ => {}
        }
        self.n += 1;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn estimate(&self) -> f64 {
        if self.n == 0 {
            1.0
        } else {
            self.n1 as f64 / self.n as f64
        }
    }

    /// Stopping rule, evaluated after every labeled instance.
    pub fn should_stop(&self, gt_threshold: f64, min_n: usize, max_n: usize) -> bool {
        self.n >= max_n || (self.n >= min_n && self.estimate() <= gt_threshold)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatagenConfig {
    pub gt_threshold: f64,
    pub min_n: usize,
    pub max_n: usize,
    pub base_seed: u64,
    pub bnb: BnbConfig,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        Self { gt_threshold: 0.05, min_n: 100, max_n: 2000, base_seed: 0, bnb: BnbConfig::default() }
    }
}

impl DatagenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_n == 0 || self.min_n > self.max_n {
            return Err(Error::Config(format!("need 1 <= min_n <= max_n, got min_n={} max_n={}", self.min_n, self.max_n)));
        }
        if !(self.gt_threshold > 0.0 && self.gt_threshold <= 1.0) {
            return Err(Error::Config(format!("gt_threshold must lie in (0, 1], got {}", self.gt_threshold)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub instance_id: usize,
    pub seed: u64,
    pub theta: Vec<f64>,
    pub f_star: f64,
    pub label_key: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedInstance {
    pub seed: u64,
    pub status: SolveStatus,
}

/// Dense `rows x cols` table of evaluation records; `None` marks unfilled cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardTable {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Option<EvalRecord>>,
}

impl RewardTable {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self { rows, cols, cells: vec![None; rows * cols] }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&EvalRecord> {
        self.cells[i * self.cols + j].as_ref()
    }

    pub fn row(&self, i: usize) -> &[Option<EvalRecord>] {
        &self.cells[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(Option::is_some)
    }

    pub fn is_complete_for(&self, cols: &[usize]) -> bool {
        (0..self.rows).all(|i| cols.iter().all(|&j| self.get(i, j).is_some()))
    }

    /// Reward of cell `(i, j)`; panics when unfilled.
    pub fn reward(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).expect("reward table cell not filled").r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub family: ParameterizedFamily,
    pub records: Vec<DatasetRecord>,
    pub library: StrategyLibrary,
    pub skipped: Vec<SkippedInstance>,
    pub good_turing: f64,
    pub reward_table: Option<RewardTable>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn instance(&self, i: usize) -> MilpInstance {
        self.family.with_theta(&self.records[i].theta)
    }

    /// Library index of the label of record `i`.
    pub fn label_index(&self, i: usize) -> Option<usize> {
        self.library.index_of(&self.records[i].label_key)
    }

    pub fn check_invariants(&self) -> Result<()> {
        for (k, r) in self.records.iter().enumerate() {
            if r.instance_id != k {
                return Err(Error::InvalidArgument(format!("record {k} has instance_id {}", r.instance_id)));
            }
            if self.library.index_of(&r.label_key).is_none() {
                return Err(Error::InvalidArgument(format!("record {k} label not in library")));
            }
        }
        if let Some(t) = &self.reward_table {
            if t.rows != self.records.len() || t.cols != self.library.len() || t.cells.len() != t.rows * t.cols {
                return Err(Error::InvalidArgument("reward table shape does not match dataset".into()));
            }
        }
        Ok(())
    }
}

/// Instances labeled per parallel round; fixed so results do not depend on the pool size.
const LABEL_CHUNK: usize = 16;

/// Samples seeds `base_seed, base_seed + 1, ...`, labels each with its optimal
/// strategy, and stops at the first `N >= min_n` whose Good-Turing estimate is
/// at most `gt_threshold`, or at `max_n`.
pub fn generate_dataset(family: &ParameterizedFamily, cfg: &DatagenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut library = StrategyLibrary::new_raw();
    let mut tracker = GoodTuringTracker::default();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut next_seed = cfg.base_seed;
    let unsolvable = |skipped: usize, sampled: usize| Error::Unsolvable { skipped, sampled };

    'outer: loop {
        let seeds: Vec<u64> = (0..LABEL_CHUNK as u64).map(|k| next_seed.wrapping_add(k)).collect();
        next_seed = next_seed.wrapping_add(LABEL_CHUNK as u64);
        let labeled: Vec<_> = seeds
            .par_iter()
            .map(|&seed| {
                let inst = sample_instance(family, seed);
                let sol = solve_milp(&inst, &cfg.bnb);
                let strategy = extract_strategy(&inst, &sol).ok();
                (seed, family.theta_of(&inst), sol, strategy)
            })
            .collect();
        for (seed, theta, sol, strategy) in labeled {
            match strategy {
                Some(s) => {
                    let key = s.key.clone();
                    let (idx, _) = library.insert(s);
                    tracker.push(idx);
                    records.push(DatasetRecord { instance_id: records.len(), seed, theta, f_star: sol.objective, label_key: key });
                }
                None => skipped.push(SkippedInstance { seed, status: sol.status }),
            }
            let sampled = records.len() + skipped.len();
            if records.is_empty() && skipped.len() > cfg.max_n.max(10) {
                return Err(unsolvable(skipped.len(), sampled));
            }
            if tracker.should_stop(cfg.gt_threshold, cfg.min_n, cfg.max_n) {
                break 'outer;
            }
        }
    }
    let sampled = records.len() + skipped.len();
    if 2 * skipped.len() > sampled {
        return Err(unsolvable(skipped.len(), sampled));
    }
    Ok(Dataset {
        family: family.clone(),
        records,
        good_turing: tracker.estimate(),
        library,
        skipped,
        reward_table: None,
    })
}

/// Fills the requested cells (all rows / all columns when `None`) that are
/// still empty. Timings are zeroed so the table is reproducible.
pub fn fill_reward_table(ds: &mut Dataset, rows: Option<&[usize]>, cols: Option<&[usize]>) -> Result<()> {
    let (n, m) = (ds.records.len(), ds.library.len());
    let table = ds.reward_table.get_or_insert_with(|| RewardTable::empty(n, m));
    if table.rows != n || table.cols != m {
        return Err(Error::InvalidArgument(format!("reward table is {}x{}, dataset is {n}x{m}", table.rows, table.cols)));
    }
    let all_rows: Vec<usize> = (0..n).collect();
    let all_cols: Vec<usize> = (0..m).collect();
    let rows = rows.unwrap_or(&all_rows);
    let cols = cols.unwrap_or(&all_cols);
    if let Some(&i) = rows.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidArgument(format!("row {i} out of range")));
    }
    if let Some(&j) = cols.iter().find(|&&j| j >= m) {
        return Err(Error::InvalidArgument(format!("column {j} out of range")));
    }

    let family = &ds.family;
    let records = &ds.records;
    let library = &ds.library;
    let filled: Vec<(usize, Vec<(usize, EvalRecord)>)> = rows
        .par_iter()
        .filter(|&&i| cols.iter().any(|&j| table.get(i, j).is_none()))
        .map(|&i| {
            let inst = family.with_theta(&records[i].theta);
            let cells = cols
                .iter()
                .filter(|&&j| table.get(i, j).is_none())
                .map(|&j| {
                    let (_, mut rec) = apply_strategy(&inst, library.get(j), records[i].f_star)?;
                    rec.solve_time_s = 0.0;
                    Ok((j, rec))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((i, cells))
        })
        .collect::<Result<Vec<_>>>()?;
    for (i, cells) in filled {
        for (j, rec) in cells {
            table.cells[i * m + j] = Some(rec);
        }
    }
    Ok(())
}
