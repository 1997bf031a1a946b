//! Slot-level Monte Carlo of miners exchanging chains over lossy links.
//!
//! Each slot first runs the synchronization phase (one Bernoulli draw per
//! ordered pair `(i, j)`, `i != j`, in lexicographic order) and then the
//! mining phase (one draw per miner, in order). All draws come from a single
//! ChaCha8 stream seeded with `seed + replication` through
//! `SeedableRng::seed_from_u64`, and every draw consumes exactly one `u64`.

mod rule;
mod tree;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use rule::{fork_choice_by_name, ghost_parent, ForkChoice, GhostTwoMiner, LongestChain, FORK_CHOICE_NAMES};
pub use tree::{Block, BlockRef, BlockTree, ChainBlock, LocalChain, NO_MINER};

use crate::error::{Error, Result};
use crate::netmodel::NetworkScenario;

/// Batches used for batch-means standard errors.
pub const BATCHES: u64 = 100;

/// Pre-synchronization pair states `(i, j)` with `i, j < PAIR_LIMIT` are
/// counted when pair tracking is on.
pub const PAIR_LIMIT: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: NetworkScenario,
    pub slots: u64,
    pub seed: u64,
    pub rule: String,
    pub track_consistency: bool,
    pub track_attribution: bool,
    /// Two miners only: histogram of blocks held exclusively by each miner
    /// just before synchronization.
    pub track_pairs: bool,
}

impl SimConfig {
    pub fn new(scenario: NetworkScenario, slots: u64, seed: u64) -> Self {
        Self {
            scenario,
            slots,
            seed,
            rule: "longest-chain".into(),
            track_consistency: true,
            track_attribution: true,
            track_pairs: false,
        }
    }

    pub fn with_rule(mut self, rule: &str) -> Self {
        self.rule = rule.into();
        self
    }

    pub fn validate(&self) -> Result<Box<dyn ForkChoice>> {
        if self.slots == 0 {
            return Err(Error::InvalidParameter("slots must be at least 1".into()));
        }
        let rule = fork_choice_by_name(&self.rule)?;
        rule.validate(&self.scenario)?;
        if rule.tracks_knowledge() && self.scenario.miners() > 64 {
            return Err(Error::InvalidParameter("knowledge tracking supports at most 64 miners".into()));
        }
        if self.track_pairs && self.scenario.miners() != 2 {
            return Err(Error::InvalidParameter("pair tracking needs exactly 2 miners".into()));
        }
        Ok(rule)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairFrequency {
    pub i: u32,
    pub j: u32,
    pub frequency: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub seed: u64,
    pub slots: u64,
    pub replications: u64,
    pub rule: String,
    pub capacity_estimate: f64,
    pub capacity_stderr: f64,
    pub stale_ratio: f64,
    /// Share of admitted blocks per miner; empty when nothing was admitted or
    /// attribution is off.
    pub gamma_empirical: Vec<f64>,
    pub gamma_stderr: Vec<f64>,
    pub consistency_fraction: Option<f64>,
    pub consistency_stderr: Option<f64>,
    pub total_mined: u64,
    pub total_admitted: u64,
    pub mined_per_miner: Vec<u64>,
    pub pairs: Vec<PairFrequency>,
}

impl SimReport {
    pub fn pair(&self, i: u32, j: u32) -> Option<&PairFrequency> {
        self.pairs.iter().find(|p| p.i == i && p.j == j)
    }

    /// Mining rates observed over the run.
    pub fn empirical_rates(&self) -> Vec<f64> {
        self.mined_per_miner
            .iter()
            .map(|&m| m as f64 / (self.slots as f64 * self.replications as f64))
            .collect()
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One running replication.
pub struct Simulation {
    scenario: NetworkScenario,
    rule: Box<dyn ForkChoice>,
    rng: ChaCha8Rng,
    config: SimConfig,
    tree: BlockTree,
    tips: Vec<BlockRef>,
    delivered: Vec<bool>,
    slot: u64,
    batches: u64,
    max_height: u64,
    mined: Vec<u64>,
    admitted: Vec<u64>,
    batch_heights: Vec<u64>,
    batch_consistent: Vec<u64>,
    batch_admitted: Vec<Vec<u64>>,
    batch_pairs: Vec<[u64; PAIR_LIMIT * PAIR_LIMIT]>,
}

impl Simulation {
    pub fn new(config: &SimConfig) -> Result<Self> {
        Self::replication(config, 0)
    }

    /// Replication `rep` of `config`, seeded with `config.seed + rep`.
    pub fn replication(config: &SimConfig, rep: u64) -> Result<Self> {
        let rule = config.validate()?;
        let n = config.scenario.miners();
        let batches = BATCHES.min(config.slots);
        Ok(Self {
            scenario: config.scenario.clone(),
            rule,
            rng: ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(rep)),
            config: config.clone(),
            tree: BlockTree::new(),
            tips: vec![0; n],
            delivered: vec![false; n * n],
            slot: 0,
            batches,
            max_height: 0,
            mined: vec![0; n],
            admitted: vec![0; n],
            batch_heights: vec![0; batches as usize + 1],
            batch_consistent: vec![0; batches as usize],
            batch_admitted: vec![vec![0; n]; batches as usize],
            batch_pairs: vec![[0; PAIR_LIMIT * PAIR_LIMIT]; batches as usize],
        })
    }

    fn batch_of(&self, slot: u64) -> usize {
        (u128::from(slot) * u128::from(self.batches) / u128::from(self.config.slots)) as usize
    }

    fn batch_len(&self, b: usize) -> u64 {
        let start = (b as u128 * u128::from(self.config.slots)).div_ceil(u128::from(self.batches));
        let end = ((b as u128 + 1) * u128::from(self.config.slots)).div_ceil(u128::from(self.batches));
        (end - start) as u64
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn is_done(&self) -> bool {
        self.slot >= self.config.slots
    }

    pub fn tree(&self) -> &BlockTree {
        &self.tree
    }

    pub fn tips(&self) -> &[BlockRef] {
        &self.tips
    }

    pub fn local_chain(&self, miner: usize) -> LocalChain {
        self.tree.local_chain(self.tips[miner])
    }

    /// Height of the longest local chain.
    pub fn max_height(&self) -> u64 {
        self.max_height
    }

    /// Blocks admitted so far into the settled prefix.
    pub fn settled_height(&self) -> u64 {
        self.tree.height(self.tree.root())
    }

    fn draw(&mut self, p: f64) -> bool {
        self.rng.gen::<f64>() < p
    }

    /// Runs one slot.
    pub fn step(&mut self) {
        let n = self.scenario.miners();
        let t = self.slot;
        let batch = self.batch_of(t);

        if self.config.track_pairs {
            let l = self.tree.lca(self.tips[0], self.tips[1]);
            let base = self.tree.height(l);
            let i = (self.tree.height(self.tips[0]) - base) as usize;
            let j = (self.tree.height(self.tips[1]) - base) as usize;
            if i < PAIR_LIMIT && j < PAIR_LIMIT {
                self.batch_pairs[batch][i * PAIR_LIMIT + j] += 1;
            }
        }

        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let p = self.scenario.link(i, j);
                    self.delivered[i * n + j] = self.draw(p);
                }
            }
        }
        self.rule.synchronize(&mut self.tree, &mut self.tips, &self.delivered);

        if self.config.track_consistency && self.tips.iter().all(|&x| x == self.tips[0]) {
            self.batch_consistent[batch] += 1;
        }

        let settled = self.rule.settled(&self.tree, &self.tips);
        if settled != self.tree.root() {
            self.admit_path(settled);
            self.tree.reroot(settled, &mut self.tips);
        }

        let knowledge = self.rule.tracks_knowledge();
        for i in 0..n {
            let c = self.scenario.rate(i);
            if self.draw(c) {
                let known = if knowledge { 1u64 << i } else { 0 };
                let b = self.tree.push(self.tips[i], i as u32, t, known);
                self.tips[i] = b;
                self.mined[i] += 1;
                self.max_height = self.max_height.max(self.tree.height(b));
            }
        }

        self.slot += 1;
        let next = if self.is_done() {
            self.batches as usize
        } else {
            self.batch_of(self.slot)
        };
        if next != batch {
            self.batch_heights[next] = self.max_height;
        }
    }

    /// Credits the blocks strictly above the root up to `top` as admitted.
    fn admit_path(&mut self, top: BlockRef) {
        let root = self.tree.root();
        let mut b = top;
        while b != root {
            let blk = *self.tree.get(b);
            self.admitted[blk.miner as usize] += 1;
            if self.config.track_attribution {
                let k = self.batch_of(blk.slot);
                self.batch_admitted[k][blk.miner as usize] += 1;
            }
            b = blk.parent;
        }
    }

    /// Runs the remaining slots and summarizes.
    pub fn run_to_end(mut self) -> SimReport {
        while !self.is_done() {
            self.step();
        }
        self.finish()
    }

    fn finish(mut self) -> SimReport {
        // The final global chain is the longest tip, lowest miner on ties.
        let mut best = self.tips[0];
        for &t in &self.tips[1..] {
            if self.tree.height(t) > self.tree.height(best) {
                best = t;
            }
        }
        self.admit_path(best);
        let slots = self.config.slots;
        let b = self.batches as usize;
        let height = self.max_height;

        let rates: Vec<f64> = (0..b)
            .map(|k| (self.batch_heights[k + 1] - self.batch_heights[k]) as f64 / self.batch_len(k) as f64)
            .collect();
        let capacity_stderr = mean_stderr(&rates).1;

        let (consistency_fraction, consistency_stderr) = if self.config.track_consistency {
            let total: u64 = self.batch_consistent.iter().sum();
            let per: Vec<f64> = (0..b)
                .map(|k| self.batch_consistent[k] as f64 / self.batch_len(k) as f64)
                .collect();
            (Some(total as f64 / slots as f64), Some(mean_stderr(&per).1))
        } else {
            (None, None)
        };

        let total_mined: u64 = self.mined.iter().sum();
        let total_admitted: u64 = self.admitted.iter().sum();
        debug_assert_eq!(total_admitted, height);
        let n = self.scenario.miners();
        let (gamma_empirical, gamma_stderr) = if self.config.track_attribution && total_admitted > 0 {
            let shares: Vec<f64> = self.admitted.iter().map(|&a| a as f64 / total_admitted as f64).collect();
            let stderr = (0..n)
                .map(|i| {
                    let per: Vec<f64> = self
                        .batch_admitted
                        .iter()
                        .filter_map(|row| {
                            let s: u64 = row.iter().sum();
                            (s > 0).then(|| row[i] as f64 / s as f64)
                        })
                        .collect();
                    mean_stderr(&per).1
                })
                .collect();
            (shares, stderr)
        } else {
            (Vec::new(), Vec::new())
        };

        let pairs = if self.config.track_pairs {
            let mut out = Vec::new();
            for i in 0..PAIR_LIMIT {
                for j in 0..PAIR_LIMIT {
                    let cell = i * PAIR_LIMIT + j;
                    let total: u64 = self.batch_pairs.iter().map(|row| row[cell]).sum();
                    let per: Vec<f64> = (0..b)
                        .map(|k| self.batch_pairs[k][cell] as f64 / self.batch_len(k) as f64)
                        .collect();
                    out.push(PairFrequency {
                        i: i as u32,
                        j: j as u32,
                        frequency: total as f64 / slots as f64,
                        stderr: mean_stderr(&per).1,
                    });
                }
            }
            out
        } else {
            Vec::new()
        };

        SimReport {
            seed: self.config.seed,
            slots,
            replications: 1,
            rule: self.rule.name().to_string(),
            capacity_estimate: height as f64 / slots as f64,
            capacity_stderr,
            stale_ratio: if total_mined == 0 {
                0.0
            } else {
                1.0 - total_admitted as f64 / total_mined as f64
            },
            gamma_empirical,
            gamma_stderr,
            consistency_fraction,
            consistency_stderr,
            total_mined,
            total_admitted,
            mined_per_miner: self.mined,
            pairs,
        }
    }
}

pub fn run(config: &SimConfig) -> Result<SimReport> {
    Ok(Simulation::new(config)?.run_to_end())
}

/// Runs `reps` independent replications in parallel. With one replication
/// this is [`run`]; otherwise fractions are averaged and standard errors are
/// taken across replications.
pub fn run_replications(config: &SimConfig, reps: u64) -> Result<SimReport> {
    if reps == 0 {
        return Err(Error::InvalidParameter("replications must be at least 1".into()));
    }
    config.validate()?;
    let mut reports: Vec<SimReport> = (0..reps)
        .into_par_iter()
        .map(|r| Simulation::replication(config, r).map(Simulation::run_to_end))
        .collect::<Result<_>>()?;
    if reps == 1 {
        return Ok(reports.pop().unwrap());
    }
    Ok(aggregate(&reports))
}

fn aggregate(reports: &[SimReport]) -> SimReport {
    let first = &reports[0];
    let stat = |f: &dyn Fn(&SimReport) -> f64| -> (f64, f64) {
        let xs: Vec<f64> = reports.iter().map(f).collect();
        mean_stderr(&xs)
    };
    let (capacity_estimate, capacity_stderr) = stat(&|r| r.capacity_estimate);
    let total_mined: u64 = reports.iter().map(|r| r.total_mined).sum();
    let total_admitted: u64 = reports.iter().map(|r| r.total_admitted).sum();
    let n = first.mined_per_miner.len();
    let mined_per_miner = (0..n).map(|i| reports.iter().map(|r| r.mined_per_miner[i]).sum()).collect();
    let (consistency_fraction, consistency_stderr) = if first.consistency_fraction.is_some() {
        let (m, s) = stat(&|r| r.consistency_fraction.unwrap_or(f64::NAN));
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    let with_gamma: Vec<&SimReport> = reports.iter().filter(|r| !r.gamma_empirical.is_empty()).collect();
    let (gamma_empirical, gamma_stderr) = if with_gamma.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        (0..n)
            .map(|i| {
                let xs: Vec<f64> = with_gamma.iter().map(|r| r.gamma_empirical[i]).collect();
                mean_stderr(&xs)
            })
            .unzip()
    };
    let pairs = first
        .pairs
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let xs: Vec<f64> = reports.iter().map(|r| r.pairs[k].frequency).collect();
            let (frequency, stderr) = mean_stderr(&xs);
            PairFrequency { frequency, stderr, ..*p }
        })
        .collect();
    SimReport {
        seed: first.seed,
        slots: first.slots,
        replications: reports.len() as u64,
        rule: first.rule.clone(),
        capacity_estimate,
        capacity_stderr,
        stale_ratio: if total_mined == 0 {
            0.0
        } else {
            1.0 - total_admitted as f64 / total_mined as f64
        },
        gamma_empirical,
        gamma_stderr,
        consistency_fraction,
        consistency_stderr,
        total_mined,
        total_admitted,
        mined_per_miner,
        pairs,
    }
}

#[cfg(test)]
mod tests;
