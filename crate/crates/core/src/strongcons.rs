//! Strong consistency of two miners.
//!
//! State `(i, j)` counts the blocks held only by miner 1 and only by miner 2
//! just before synchronization. The miners agree exactly when both are 0.
//! With perfect links the steady state has a closed form; otherwise the
//! chain is truncated at `i + j <= bound` and solved numerically.

use serde::Serialize;

use crate::error::{check_probability, Error, Result};
use crate::markov::{AutoSolver, SparseChain, StationarySolver};
use crate::twominer::TwoMinerParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FdtmcState {
    pub i: u32,
    pub j: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyReport {
    /// Probability that both miners hold identical chains right after
    /// synchronization.
    pub eta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Steady-state mass on states with `i == j`.
    pub theta: f64,
}

fn check_rates(c1: f64, c2: f64) -> Result<()> {
    check_probability("c1", c1)?;
    check_probability("c2", c2)?;
    if c1 + c2 == 0.0 {
        return Err(Error::InvalidParameter("c1 + c2 must be positive".into()));
    }
    Ok(())
}

/// `c1 + c2 - c1 c2`, the probability that someone mines.
fn any(c1: f64, c2: f64) -> f64 {
    c1 + c2 - c1 * c2
}

/// `c1 + c2 - 2 c1 c2`, the probability that exactly one miner mines.
fn exactly_one(c1: f64, c2: f64) -> f64 {
    c1 + c2 - 2.0 * c1 * c2
}

/// Pre-synchronization steady-state probability of `(i, j)` with perfect links.
pub fn tau(i: u32, j: u32, c1: f64, c2: f64) -> Result<f64> {
    check_rates(c1, c2)?;
    let s = any(c1, c2);
    let x = exactly_one(c1, c2);
    // Powers go through the ratio `c1 c2 / s < 1` so deep states underflow to 0.
    let r = c1 * c2 / s;
    let v = match (i, j) {
        (0, 0) => x * (1.0 - c1) * (1.0 - c2) / s,
        (i, j) if i == j => x / s * r.powi(i as i32),
        (i, j) if i == j + 1 => (1.0 - c2) * x * (c1 / s) * r.powi(j as i32),
        (i, j) if j == i + 1 => (1.0 - c1) * x * (c2 / s) * r.powi(i as i32),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "state ({i}, {j}) is unreachable with perfect links"
            )))
        }
    };
    Ok(v)
}

/// Strong-consistency probability with perfect links.
pub fn eta(c1: f64, c2: f64) -> Result<f64> {
    check_rates(c1, c2)?;
    Ok(exactly_one(c1, c2) / any(c1, c2))
}

/// Shares of admitted blocks with perfect links.
pub fn gamma(c1: f64, c2: f64) -> Result<(f64, f64)> {
    check_rates(c1, c2)?;
    let (a, b) = (c1 * (1.0 - c2), c2 * (1.0 - c1));
    let x = a + b;
    if x == 0.0 {
        return Err(Error::InvalidParameter(
            "admitted-block shares are undefined when both miners always mine".into(),
        ));
    }
    if a >= b {
        let g = a / x;
        Ok((g, 1.0 - g))
    } else {
        let g = b / x;
        Ok((1.0 - g, g))
    }
}

/// Diagonal mass `sum_i tau(i, i)` with perfect links, via the geometric tail.
pub fn theta(c1: f64, c2: f64) -> Result<f64> {
    let t00 = tau(0, 0, c1, c2)?;
    let t11 = tau(1, 1, c1, c2)?;
    let ratio = any(c1, c2) / (any(c1, c2) - c1 * c2);
    Ok(t00 + ratio * t11)
}

/// Closed-form report with perfect links.
pub fn ideal_report(c1: f64, c2: f64) -> Result<ConsistencyReport> {
    let (gamma1, gamma2) = gamma(c1, c2)?;
    Ok(ConsistencyReport {
        eta: eta(c1, c2)?,
        gamma1,
        gamma2,
        theta: theta(c1, c2)?,
    })
}

/// Truncated chain over `(i, j)` with `i + j <= bound`, lexicographic order.
#[derive(Debug, Clone)]
pub struct Fdtmc {
    params: TwoMinerParams,
    bound: u32,
    states: Vec<FdtmcState>,
    chain: SparseChain,
}

impl Fdtmc {
    pub fn new(params: &TwoMinerParams, bound: u32) -> Result<Self> {
        params.validate()?;
        if bound < 2 {
            return Err(Error::InvalidParameter("truncation bound must be at least 2".into()));
        }
        let mut states = Vec::new();
        for i in 0..=bound {
            for j in 0..=bound - i {
                states.push(FdtmcState { i, j });
            }
        }
        let index = |s: FdtmcState| -> usize {
            // Rows before `i` hold (bound + 1) + bound + ... + (bound - i + 2) states.
            let (i, b) = (s.i as usize, bound as usize);
            i * (b + 1) - i * (i.saturating_sub(1)) / 2 + s.j as usize
        };
        let TwoMinerParams { c1, c2, a12, a21 } = *params;
        let rows = states
            .iter()
            .map(|&s| {
                let resolved = match s.i.cmp(&s.j) {
                    std::cmp::Ordering::Greater => a12,
                    std::cmp::Ordering::Less => a21,
                    std::cmp::Ordering::Equal => 0.0,
                };
                let mut row = Vec::with_capacity(8);
                for (from, p) in [(FdtmcState { i: 0, j: 0 }, resolved), (s, 1.0 - resolved)] {
                    if p == 0.0 {
                        continue;
                    }
                    for (di, q1) in [(0, 1.0 - c1), (1, c1)] {
                        for (dj, q2) in [(0, 1.0 - c2), (1, c2)] {
                            let mut to = FdtmcState {
                                i: from.i + di,
                                j: from.j + dj,
                            };
                            if to.i + to.j > bound {
                                to.i = to.i.saturating_sub(1);
                                to.j = to.j.saturating_sub(1);
                            }
                            row.push((index(to), p * q1 * q2));
                        }
                    }
                }
                row
            })
            .collect();
        Ok(Self {
            params: *params,
            bound,
            states,
            chain: SparseChain::from_rows(rows),
        })
    }

    pub fn bound(&self) -> u32 {
        self.bound
    }

    pub fn states(&self) -> &[FdtmcState] {
        &self.states
    }

    pub fn chain(&self) -> &SparseChain {
        &self.chain
    }

    /// Steady state and derived report.
    pub fn solve(&self, solver: &dyn StationarySolver) -> Result<(Vec<f64>, ConsistencyReport)> {
        let pi = solver.solve(&self.chain)?.pi;
        let TwoMinerParams { a12, a21, .. } = self.params;
        let (mut eta, mut theta, mut adm1, mut adm2) = (0.0, 0.0, 0.0, 0.0);
        for (s, &p) in self.states.iter().zip(&pi) {
            match s.i.cmp(&s.j) {
                std::cmp::Ordering::Greater => {
                    eta += a12 * p;
                    adm1 += a12 * p * f64::from(s.i);
                }
                std::cmp::Ordering::Less => {
                    eta += a21 * p;
                    adm2 += a21 * p * f64::from(s.j);
                }
                std::cmp::Ordering::Equal => {
                    theta += p;
                    if s.i == 0 {
                        eta += p;
                    }
                }
            }
        }
        let total = adm1 + adm2;
        let (gamma1, gamma2) = if total > 0.0 {
            (adm1 / total, adm2 / total)
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok((
            pi,
            ConsistencyReport {
                eta,
                gamma1,
                gamma2,
                theta,
            },
        ))
    }
}

/// Numeric consistency report for arbitrary links.
pub fn fdtmc_numeric(params: &TwoMinerParams, bound: u32) -> Result<ConsistencyReport> {
    Ok(Fdtmc::new(params, bound)?.solve(&AutoSolver::default())?.1)
}
