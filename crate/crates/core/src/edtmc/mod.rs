//! Ergodic chain over relative chain lengths, truncated at a maximum lead.
//!
//! A state is the vector of local chain lengths minus its minimum. The
//! truncated chain keeps the states whose largest entry is below `k`; a
//! transition that would reach `k` is redirected by decrementing every
//! positive entry. Capacity is the steady-state average of the per-state
//! probability that some holder of the longest chain mines.
//!
//! One transition is applied in factored form: a sparse synchronization
//! kernel between states, then independent per-miner mining on a dense grid
//! of absolute lengths `[0, k]^n`, then a fold of the grid back onto states.

mod kernel;

use std::fmt;
use std::io::Write;
use std::path::Path;

pub use kernel::{
    mine_kernel, miner_sync_outcomes, one_step_relative, relative, sync_kernel,
    LengthDistribution,
};

use crate::error::{Error, Result};
use crate::markov::{AutoSolver, SparseChain, StationarySolver, SteadyState, TransitionOperator};
use crate::netmodel::{CapacityResult, NetworkScenario};

/// Relative lengths of the local chains; the smallest entry is 0.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelativeState(Vec<u32>);

impl RelativeState {
    pub fn new(r: Vec<u32>) -> Result<Self> {
        match r.iter().min() {
            Some(0) => Ok(Self(r)),
            Some(_) => Err(Error::InvalidParameter(format!(
                "relative state {r:?} must contain a zero"
            ))),
            None => Err(Error::InvalidParameter("empty relative state".into())),
        }
    }

    /// Normalizes absolute lengths.
    pub fn from_lengths(b: &[u32]) -> Result<Self> {
        Self::new(relative(b))
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn lead(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

impl fmt::Display for RelativeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        f.write_str(&parts.join("|"))
    }
}

/// Redirect for a relative vector whose lead reached `k`: every positive
/// entry drops by one.
pub fn redirect(r: &mut [u32]) {
    for x in r.iter_mut() {
        if *x > 0 {
            *x -= 1;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub max_states: usize,
}

pub const DEFAULT_MAX_STATES: usize = 1_500_000;

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            max_states: DEFAULT_MAX_STATES,
        }
    }
}

/// Number of vectors in `[0, k)^n` with a zero entry.
pub fn state_count(n: usize, k: usize) -> Option<usize> {
    let n = u32::try_from(n).ok()?;
    let all = k.checked_pow(n)?;
    let without_zero = (k - 1).checked_pow(n)?;
    Some(all - without_zero)
}

fn mixed_code(v: &[u32], radix: usize) -> usize {
    v.iter().fold(0, |acc, &x| acc * radix + x as usize)
}

/// Finite chain over all relative states with lead below `k`, in
/// lexicographic order.
#[derive(Debug, Clone)]
pub struct TruncatedChain {
    scenario: NetworkScenario,
    k: usize,
    /// Flattened states, `n` entries each.
    states: Vec<u32>,
    /// Synchronization kernel between state indices.
    sync: SparseChain,
    omega: Vec<f64>,
    /// State index to grid code in radix `k + 1`.
    grid_of_state: Vec<u32>,
    /// Grid code to the state reached after normalizing and redirecting.
    fold: Vec<u32>,
}

impl TruncatedChain {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn miners(&self) -> usize {
        self.scenario.miners()
    }

    pub fn scenario(&self) -> &NetworkScenario {
        &self.scenario
    }

    pub fn state(&self, i: usize) -> RelativeState {
        let n = self.miners();
        RelativeState(self.states[i * n..(i + 1) * n].to_vec())
    }

    pub fn states(&self) -> impl Iterator<Item = RelativeState> + '_ {
        (0..self.len()).map(|i| self.state(i))
    }

    /// Index of a relative state, if it lies inside the truncation.
    pub fn index_of(&self, r: &[u32]) -> Option<usize> {
        if r.len() != self.miners() || r.iter().any(|&x| x as usize >= self.k) {
            return None;
        }
        if !r.contains(&0) {
            return None;
        }
        Some(self.fold[mixed_code(r, self.k + 1)] as usize)
    }

    /// Probability that at least one holder of the post-sync longest chain
    /// mines, per state.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn sync_matrix(&self) -> &SparseChain {
        &self.sync
    }

    fn grid_len(&self) -> usize {
        self.fold.len()
    }

    fn mine_on_grid(&self, grid: &mut [f64]) {
        let side = self.k + 1;
        let n = self.miners();
        for d in 0..n {
            let c = self.scenario.rate(d);
            if c == 0.0 {
                continue;
            }
            let stride = side.pow((n - 1 - d) as u32);
            let block = stride * side;
            for base in (0..grid.len()).step_by(block) {
                for inner in 0..stride {
                    let at = |t: usize| base + inner + t * stride;
                    for t in (1..side).rev() {
                        grid[at(t)] = grid[at(t)] * (1.0 - c) + grid[at(t - 1)] * c;
                    }
                    grid[at(0)] *= 1.0 - c;
                }
            }
        }
    }
}

impl TransitionOperator for TruncatedChain {
    fn len(&self) -> usize {
        self.omega.len()
    }

    fn row(&self, i: usize) -> Vec<(usize, f64)> {
        let n = self.miners();
        let strides: Vec<usize> = (0..n).map(|d| (self.k + 1).pow((n - 1 - d) as u32)).collect();
        let mut out = Vec::new();
        for (s, p) in self.sync.row_entries(i) {
            let code = self.grid_of_state[s] as usize;
            for mask in 0u32..(1 << n) {
                let mut q = p;
                let mut x = code;
                for (d, &stride) in strides.iter().enumerate() {
                    let c = self.scenario.rate(d);
                    if mask & (1 << d) != 0 {
                        q *= c;
                        x += stride;
                    } else {
                        q *= 1.0 - c;
                    }
                }
                if q > 0.0 {
                    out.push((self.fold[x] as usize, q));
                }
            }
        }
        out.sort_by_key(|e| e.0);
        out.dedup_by(|later, first| {
            if later.0 == first.0 {
                first.1 += later.1;
                true
            } else {
                false
            }
        });
        out
    }

    fn apply_left(&self, x: &[f64], out: &mut [f64]) {
        let mut grid = vec![0.0; self.grid_len()];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (s, p) in self.sync.row_entries(i) {
                grid[self.grid_of_state[s] as usize] += xi * p;
            }
        }
        self.mine_on_grid(&mut grid);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (code, &g) in grid.iter().enumerate() {
            if g != 0.0 {
                out[self.fold[code] as usize] += g;
            }
        }
    }
}

/// Builds the truncated chain with default options.
pub fn build_chain(scenario: &NetworkScenario, k: usize) -> Result<TruncatedChain> {
    build_chain_with(scenario, k, BuildOptions::default())
}

pub fn build_chain_with(
    scenario: &NetworkScenario,
    k: usize,
    options: BuildOptions,
) -> Result<TruncatedChain> {
    let n = scenario.miners();
    if k == 0 {
        return Err(Error::InvalidParameter("truncation k must be at least 1".into()));
    }
    let count = state_count(n, k).unwrap_or(usize::MAX);
    if count > options.max_states {
        return Err(Error::StateCapExceeded {
            states: count,
            cap: options.max_states,
        });
    }
    let side = k + 1;
    let grid_len = u32::try_from(n)
        .ok()
        .and_then(|e| side.checked_pow(e))
        .filter(|&g| g <= u32::MAX as usize)
        .ok_or(Error::StateCapExceeded {
            states: usize::MAX,
            cap: options.max_states,
        })?;

    // Lexicographic enumeration of [0, k)^n, keeping vectors with a zero.
    let mut states = Vec::with_capacity(count * n);
    let mut v = vec![0u32; n];
    for code in 0..k.pow(n as u32) {
        let mut rest = code;
        for d in (0..n).rev() {
            v[d] = (rest % k) as u32;
            rest /= k;
        }
        if v.contains(&0) {
            states.extend_from_slice(&v);
        }
    }
    debug_assert_eq!(states.len(), count * n);

    let mut fold = vec![u32::MAX; grid_len];
    let mut grid_of_state = Vec::with_capacity(count);
    for (idx, r) in states.chunks(n).enumerate() {
        let code = mixed_code(r, side);
        fold[code] = idx as u32;
        grid_of_state.push(code as u32);
    }
    // Every grid point maps to a state after normalization and redirect.
    let mut x = vec![0u32; n];
    for code in 0..grid_len {
        if fold[code] != u32::MAX {
            continue;
        }
        let mut rest = code;
        for d in (0..n).rev() {
            x[d] = (rest % side) as u32;
            rest /= side;
        }
        let mut r = relative(&x);
        if r.iter().any(|&e| e as usize >= k) {
            redirect(&mut r);
        }
        fold[code] = fold[mixed_code(&r, side)];
    }

    let mut rows = Vec::with_capacity(count);
    let mut omega = Vec::with_capacity(count);
    for r in states.chunks(n) {
        let mut row = Vec::new();
        for (mid, p) in sync_kernel(r, scenario) {
            let rel = relative(&mid);
            row.push((fold[mixed_code(&rel, side)] as usize, p));
        }
        rows.push(row);
        let miss: f64 = (0..n)
            .map(|i| 1.0 - scenario.rate(i) * kernel::holds_max_after_sync(r, scenario, i))
            .product();
        omega.push(1.0 - miss);
    }

    Ok(TruncatedChain {
        scenario: scenario.clone(),
        k,
        states,
        sync: SparseChain::from_rows(rows),
        omega,
        grid_of_state,
        fold,
    })
}

/// Steady state with the default solver strategy.
pub fn steady_state(chain: &TruncatedChain) -> Result<SteadyState> {
    AutoSolver::default().solve(chain)
}

pub fn capacity(chain: &TruncatedChain, pi: &SteadyState) -> Result<CapacityResult> {
    if pi.pi.len() != chain.len() {
        return Err(Error::InvalidParameter(format!(
            "steady state has {} entries for a chain of {} states",
            pi.pi.len(),
            chain.len()
        )));
    }
    let r: f64 = pi.pi.iter().zip(chain.omega()).map(|(p, w)| p * w).sum();
    CapacityResult::new(chain.scenario(), r)
}

/// Builds, solves and evaluates at a fixed truncation.
pub fn evaluate(
    scenario: &NetworkScenario,
    k: usize,
    options: BuildOptions,
    solver: &dyn StationarySolver,
) -> Result<CapacityResult> {
    let chain = build_chain_with(scenario, k, options)?;
    let pi = solver.solve(&chain)?;
    capacity(&chain, &pi)
}

#[derive(Debug, Clone, Copy)]
pub struct ConvergeOptions {
    pub build: BuildOptions,
    /// Upper bound on `k` regardless of the state cap.
    pub max_k: usize,
}

impl Default for ConvergeOptions {
    fn default() -> Self {
        Self {
            build: BuildOptions::default(),
            max_k: 200,
        }
    }
}

/// Raises `k` until consecutive capacities differ by less than `tolerance`.
pub fn converge_k(scenario: &NetworkScenario, tolerance: f64) -> Result<(usize, CapacityResult)> {
    converge_k_with(scenario, tolerance, ConvergeOptions::default(), &AutoSolver::default())
}

pub fn converge_k_with(
    scenario: &NetworkScenario,
    tolerance: f64,
    options: ConvergeOptions,
    solver: &dyn StationarySolver,
) -> Result<(usize, CapacityResult)> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let mut previous = evaluate(scenario, 1, options.build, solver)?;
    let mut delta = f64::INFINITY;
    for k in 2..=options.max_k {
        let current = match evaluate(scenario, k, options.build, solver) {
            Ok(c) => c,
            Err(Error::StateCapExceeded { .. }) => {
                return Err(Error::TruncationNotConverged { k: k - 1, delta })
            }
            Err(e) => return Err(e),
        };
        delta = (current.growth_rate - previous.growth_rate).abs();
        if delta < tolerance {
            return Ok((k, current));
        }
        previous = current;
    }
    Err(Error::TruncationNotConverged {
        k: options.max_k,
        delta,
    })
}

/// Writes `state_id,r_vector,pi,omega` rows, and optionally the dense
/// transition matrix with a header of column ids.
pub fn write_debug_csv(
    chain: &TruncatedChain,
    pi: &SteadyState,
    states_path: &Path,
    matrix_path: Option<&Path>,
) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(states_path)?);
    writeln!(w, "state_id,r_vector,pi,omega")?;
    for (i, state) in chain.states().enumerate() {
        writeln!(w, "{i},{state},{},{}", pi.pi[i], chain.omega()[i])?;
    }
    w.flush()?;
    if let Some(path) = matrix_path {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (0..chain.len()).map(|j| j.to_string()).collect();
        writeln!(w, "from,{}", header.join(","))?;
        for (i, row) in chain.to_dense().iter().enumerate() {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(w, "{i},{}", cells.join(","))?;
        }
        w.flush()?;
    }
    Ok(())
}
