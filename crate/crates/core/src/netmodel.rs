//! Network scenario description and the ideal-link formulas.
//!
//! A scenario is a set of miners with per-slot mining probabilities and a
//! directed matrix of per-slot link success probabilities. Row `i`, column
//! `j` of the link matrix is the probability that miner `i` delivers its
//! chain to miner `j` in one synchronization phase. Diagonal entries are 0.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};

/// Miners, their mining rates and the directed link success matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioDocument", into = "ScenarioDocument")]
pub struct NetworkScenario {
    rates: Vec<f64>,
    links: Vec<Vec<f64>>,
    zeta: u32,
}

impl NetworkScenario {
    /// Validates rates and links. Diagonal link entries are forced to 0.
    pub fn new(rates: Vec<f64>, mut links: Vec<Vec<f64>>) -> Result<Self> {
        let n = rates.len();
        if n == 0 {
            return Err(Error::InvalidParameter("scenario needs at least one miner".into()));
        }
        for (i, &c) in rates.iter().enumerate() {
            check_probability(&format!("c[{i}]"), c)?;
        }
        if links.len() != n || links.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidParameter(format!(
                "link matrix must be {n}x{n}"
            )));
        }
        for (i, row) in links.iter_mut().enumerate() {
            for (j, a) in row.iter_mut().enumerate() {
                if i == j {
                    *a = 0.0;
                } else {
                    check_probability(&format!("a[{i}][{j}]"), *a)?;
                }
            }
        }
        Ok(Self {
            rates,
            links,
            zeta: 1,
        })
    }

    pub fn with_zeta(mut self, zeta: u32) -> Result<Self> {
        if zeta == 0 {
            return Err(Error::InvalidParameter("zeta must be positive".into()));
        }
        self.zeta = zeta;
        Ok(self)
    }

    /// Every ordered pair of distinct miners linked with success `alpha`.
    pub fn complete(rates: Vec<f64>, alpha: f64) -> Result<Self> {
        let n = rates.len();
        let links = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { alpha }).collect())
            .collect();
        Self::new(rates, links)
    }

    /// Miner 0 is the hub; every other miner links only to it.
    pub fn star(rates: Vec<f64>, alpha: f64) -> Result<Self> {
        let n = rates.len();
        let links = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i != j && (i == 0 || j == 0) { alpha } else { 0.0 })
                    .collect()
            })
            .collect();
        Self::new(rates, links)
    }

    /// Miners form a path 0 - 1 - ... - (n-1).
    pub fn line(rates: Vec<f64>, alpha: f64) -> Result<Self> {
        let n = rates.len();
        let links = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i.abs_diff(j) == 1 { alpha } else { 0.0 })
                    .collect()
            })
            .collect();
        Self::new(rates, links)
    }

    pub fn two_miner(c1: f64, c2: f64, a12: f64, a21: f64) -> Result<Self> {
        Self::new(vec![c1, c2], vec![vec![0.0, a12], vec![a21, 0.0]])
    }

    pub fn miners(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn rate(&self, i: usize) -> f64 {
        self.rates[i]
    }

    /// Success probability of the link from `from` to `to`.
    pub fn link(&self, from: usize, to: usize) -> f64 {
        self.links[from][to]
    }

    pub fn links(&self) -> &[Vec<f64>] {
        &self.links
    }

    pub fn zeta(&self) -> u32 {
        self.zeta
    }

    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    pub fn set_rates(&mut self, rates: Vec<f64>) -> Result<()> {
        if rates.len() != self.rates.len() {
            return Err(Error::InvalidParameter("rate vector length mismatch".into()));
        }
        for (i, &c) in rates.iter().enumerate() {
            check_probability(&format!("c[{i}]"), c)?;
        }
        self.rates = rates;
        Ok(())
    }

    pub fn set_link(&mut self, from: usize, to: usize, a: f64) -> Result<()> {
        if from == to {
            return Err(Error::InvalidParameter("self links are fixed to 0".into()));
        }
        check_probability(&format!("a[{from}][{to}]"), a)?;
        self.links[from][to] = a;
        Ok(())
    }

    /// Replaces every nonzero off-diagonal link by `alpha`, keeping the topology.
    pub fn with_uniform_links(&self, alpha: f64) -> Result<Self> {
        check_probability("alpha", alpha)?;
        let mut out = self.clone();
        for row in out.links.iter_mut() {
            for a in row.iter_mut() {
                if *a > 0.0 {
                    *a = alpha;
                }
            }
        }
        Ok(out)
    }

    pub fn capacity_result(&self, growth_rate: f64) -> Result<CapacityResult> {
        CapacityResult::new(self, growth_rate)
    }
}

#[derive(Serialize, Deserialize)]
struct MinerDocument {
    rate: f64,
}

#[derive(Serialize, Deserialize)]
struct ScenarioDocument {
    miners: Vec<MinerDocument>,
    links: Vec<Vec<f64>>,
    #[serde(default = "default_zeta")]
    zeta: u32,
}

fn default_zeta() -> u32 {
    1
}

impl TryFrom<ScenarioDocument> for NetworkScenario {
    type Error = Error;

    fn try_from(doc: ScenarioDocument) -> Result<Self> {
        let rates = doc.miners.into_iter().map(|m| m.rate).collect();
        NetworkScenario::new(rates, doc.links)?.with_zeta(doc.zeta)
    }
}

impl From<NetworkScenario> for ScenarioDocument {
    fn from(s: NetworkScenario) -> Self {
        ScenarioDocument {
            miners: s.rates.iter().map(|&rate| MinerDocument { rate }).collect(),
            links: s.links,
            zeta: s.zeta,
        }
    }
}

/// Growth rate of the globally endorsed chain with its stale-block ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    /// Blocks admitted per slot.
    pub growth_rate: f64,
    pub stale_ratio: f64,
    pub transactions_per_slot: f64,
}

impl CapacityResult {
    pub fn new(scenario: &NetworkScenario, growth_rate: f64) -> Result<Self> {
        let total = scenario.total_rate();
        // Clamp solver noise at the ends of the feasible interval.
        let growth_rate = growth_rate.clamp(0.0, total.min(1.0));
        let stale = if total > 0.0 {
            stale_ratio(scenario.rates(), growth_rate)?
        } else {
            0.0
        };
        Ok(Self {
            growth_rate,
            stale_ratio: stale,
            transactions_per_slot: growth_rate * f64::from(scenario.zeta()),
        })
    }
}

/// Growth rate when every miner hears every other miner each slot:
/// `1 - prod(1 - c_i)`.
pub fn ideal_capacity(rates: &[f64]) -> Result<f64> {
    let mut hit = 0.0;
    for (i, &c) in rates.iter().enumerate() {
        check_probability(&format!("c[{i}]"), c)?;
        hit = union(hit, c);
    }
    Ok(hit)
}

/// Equivalent single-miner rate of `miner_count` ideally connected miners.
pub fn aggregate_lan(per_miner_rate: f64, miner_count: u32) -> Result<f64> {
    check_probability("rate", per_miner_rate)?;
    if miner_count == 0 {
        return Err(Error::InvalidParameter("LAN needs at least one miner".into()));
    }
    Ok((0..miner_count).fold(0.0, |acc, _| union(acc, per_miner_rate)))
}

/// `P(A or B)` for independent events, exact when either side is 0.
fn union(p: f64, q: f64) -> f64 {
    p + q - p * q
}

/// Fraction of mined blocks that never enter the endorsed chain.
pub fn stale_ratio(rates: &[f64], capacity: f64) -> Result<f64> {
    let total: f64 = rates.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroMiningRate);
    }
    if capacity < 0.0 {
        return Err(Error::InvalidParameter(format!("negative capacity {capacity}")));
    }
    if capacity > total * (1.0 + 1e-12) {
        return Err(Error::CapacityExceedsMining { capacity, total });
    }
    Ok(((total - capacity) / total).max(0.0))
}

/// Mean number of slots until a link with per-slot success `a` delivers.
pub fn expected_delay(a: f64) -> Result<f64> {
    check_probability("a", a)?;
    if a == 0.0 {
        return Err(Error::InfiniteDelay);
    }
    Ok(1.0 / a)
}
