//! Stationary distributions of finite row-stochastic chains.
//!
//! Chains are exposed through [`TransitionOperator`], which only needs a
//! left multiplication `x -> xP` and a way to list one row. Solvers are
//! strategies selected by name: `dense` (GTH elimination), `power` and
//! `auto`, which picks dense below a state-count threshold.

use crate::error::{Error, Result};

/// Entries below `-CLAMP_TOLERANCE` in a computed steady state are an error.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

pub trait TransitionOperator: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nonzero entries `(column, probability)` of row `i`, unordered.
    fn row(&self, i: usize) -> Vec<(usize, f64)>;

    /// `out = x P`. `out` is overwritten.
    fn apply_left(&self, x: &[f64], out: &mut [f64]);

    fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut m = vec![vec![0.0; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, p) in self.row(i) {
                row[j] += p;
            }
        }
        m
    }
}

/// Compressed sparse rows of a stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseChain {
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseChain {
    /// Rows given as `(column, probability)` lists. Duplicate columns are merged.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last = None;
            for (j, p) in row {
                if p == 0.0 {
                    continue;
                }
                if last == Some(j) {
                    *vals.last_mut().unwrap() += p;
                } else {
                    cols.push(j as u32);
                    vals.push(p);
                    last = Some(j);
                }
            }
            offsets.push(cols.len());
        }
        Self { offsets, cols, vals }
    }

    pub fn from_dense(m: &[Vec<f64>]) -> Self {
        Self::from_rows(
            m.iter()
                .map(|r| r.iter().copied().enumerate().filter(|&(_, p)| p != 0.0).collect())
                .collect(),
        )
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[i]..self.offsets[i + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.vals[span])
            .map(|(&j, &p)| (j as usize, p))
    }
}

impl TransitionOperator for SparseChain {
    fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    fn row(&self, i: usize) -> Vec<(usize, f64)> {
        self.row_entries(i).collect()
    }

    fn apply_left(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, p) in self.row_entries(i) {
                out[j] += xi * p;
            }
        }
    }
}

/// Probability vector with `pi P = pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub pi: Vec<f64>,
    /// Iterations used by an iterative solver; 0 for direct solves.
    pub iterations: usize,
    /// Final `||pi P - pi||_inf`.
    pub residual: f64,
}

impl SteadyState {
    /// Clamps small negative entries and renormalizes.
    fn finish(mut pi: Vec<f64>, iterations: usize, op: &dyn TransitionOperator) -> Result<Self> {
        for v in pi.iter_mut() {
            if *v < -CLAMP_TOLERANCE || !v.is_finite() {
                return Err(Error::NegativeSteadyState { value: *v });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|v| *v /= total);
        let residual = residual(op, &pi);
        Ok(Self {
            pi,
            iterations,
            residual,
        })
    }
}

pub fn residual(op: &dyn TransitionOperator, pi: &[f64]) -> f64 {
    let mut next = vec![0.0; pi.len()];
    op.apply_left(pi, &mut next);
    next.iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

pub trait StationarySolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, op: &dyn TransitionOperator) -> Result<SteadyState>;
}

/// Grassmann-Taksar-Heyman elimination on the dense matrix. Subtraction-free,
/// so it stays accurate for nearly decomposable chains.
#[derive(Debug, Clone, Copy, Default)]
pub struct DenseSolver;

impl StationarySolver for DenseSolver {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn solve(&self, op: &dyn TransitionOperator) -> Result<SteadyState> {
        let n = op.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty chain".into()));
        }
        let mut a: Vec<f64> = op.to_dense().into_iter().flatten().collect();
        let at = |i: usize, j: usize| i * n + j;
        for k in (1..n).rev() {
            let s: f64 = (0..k).map(|j| a[at(k, j)]).sum();
            if s <= 0.0 {
                // State k cannot leave to lower states: the reduced chain is
                // reducible. Fall back to an iterative answer.
                return PowerSolver::default().solve(op);
            }
            for i in 0..k {
                a[at(i, k)] /= s;
            }
            for i in 0..k {
                let aik = a[at(i, k)];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..k {
                    a[at(i, j)] += aik * a[at(k, j)];
                }
            }
        }
        let mut pi = vec![0.0; n];
        pi[0] = 1.0;
        for j in 1..n {
            pi[j] = (0..j).map(|i| pi[i] * a[at(i, j)]).sum();
        }
        SteadyState::finish(pi, 0, op)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PowerSolver {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PowerSolver {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 1_000_000,
        }
    }
}

impl StationarySolver for PowerSolver {
    fn name(&self) -> &'static str {
        "power"
    }

    fn solve(&self, op: &dyn TransitionOperator) -> Result<SteadyState> {
        let n = op.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty chain".into()));
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut next = vec![0.0; n];
        let mut res = f64::INFINITY;
        for it in 1..=self.max_iterations {
            op.apply_left(&x, &mut next);
            let total: f64 = next.iter().sum();
            res = 0.0;
            for (a, b) in next.iter_mut().zip(&x) {
                *a /= total;
                res = f64::max(res, (*a - b).abs());
            }
            std::mem::swap(&mut x, &mut next);
            if res <= self.tolerance {
                return SteadyState::finish(x, it, op);
            }
        }
        Err(Error::NotConverged {
            iterations: self.max_iterations,
            residual: res,
        })
    }
}

/// Dense elimination for small chains, power iteration otherwise.
#[derive(Debug, Clone, Copy)]
pub struct AutoSolver {
    pub dense_limit: usize,
    pub power: PowerSolver,
}

/// Largest chain handed to the cubic-cost dense solver by default.
pub const DEFAULT_DENSE_LIMIT: usize = 1_000;

impl Default for AutoSolver {
    fn default() -> Self {
        Self {
            dense_limit: DEFAULT_DENSE_LIMIT,
            power: PowerSolver::default(),
        }
    }
}

impl StationarySolver for AutoSolver {
    fn name(&self) -> &'static str {
        "auto"
    }

    fn solve(&self, op: &dyn TransitionOperator) -> Result<SteadyState> {
        if op.len() <= self.dense_limit {
            DenseSolver.solve(op)
        } else {
            self.power.solve(op)
        }
    }
}

pub const SOLVER_NAMES: [&str; 3] = ["auto", "dense", "power"];

/// Looks a solver up by name.
pub fn solver_by_name(name: &str) -> Result<Box<dyn StationarySolver>> {
    match name {
        "auto" => Ok(Box::new(AutoSolver::default())),
        "dense" => Ok(Box::new(DenseSolver)),
        "power" => Ok(Box::new(PowerSolver::default())),
        other => Err(Error::UnknownStrategy {
            kind: "solver",
            name: other.to_string(),
            available: SOLVER_NAMES.join(", "),
        }),
    }
}
