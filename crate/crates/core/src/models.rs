//! Capacity and consistency evaluators, looked up by name.
//!
//! Every model fills in the metrics it knows about; the grid runner merges
//! them into one row per parameter point.

use crate::edtmc::{self, BuildOptions, ConvergeOptions};
use crate::error::{Error, Result};
use crate::markov::solver_by_name;
use crate::netmodel::{ideal_capacity, NetworkScenario};
use crate::simulator::{self, SimConfig};
use crate::strongcons;
use crate::twominer::{self, Coupling, Regime, TwoMinerParams};

/// Settings shared by all points of an experiment.
#[derive(Debug, Clone)]
pub struct Settings {
    pub tolerance: f64,
    pub max_k: usize,
    pub max_states: usize,
    pub solver: String,
    pub slots: u64,
    pub seed: u64,
    pub replications: u64,
    pub rule: String,
    pub bound: u32,
    pub step: f64,
    pub coupling: Coupling,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_k: ConvergeOptions::default().max_k,
            max_states: edtmc::DEFAULT_MAX_STATES,
            solver: "auto".into(),
            slots: 1_000_000,
            seed: 1,
            replications: 1,
            rule: "longest-chain".into(),
            bound: 60,
            step: 1e-5,
            coupling: Coupling::Free,
        }
    }
}

/// One parameter point.
#[derive(Debug, Clone)]
pub struct Point<'a> {
    pub scenario: &'a NetworkScenario,
    /// Uniform link probability, when the links were built from one.
    pub alpha: Option<f64>,
    /// Fixed truncation; `None` raises `k` until convergence.
    pub k: Option<usize>,
    pub settings: &'a Settings,
}

impl Point<'_> {
    fn two_miner(&self, model: &str) -> Result<TwoMinerParams> {
        let s = self.scenario;
        if s.miners() != 2 {
            return Err(Error::InvalidParameter(format!(
                "{model} needs exactly 2 miners, got {}",
                s.miners()
            )));
        }
        TwoMinerParams::new(s.rate(0), s.rate(1), s.link(0, 1), s.link(1, 0))
    }

    /// The single link probability of a symmetric two-miner point.
    fn uniform_alpha(&self, model: &str) -> Result<f64> {
        let p = self.two_miner(model)?;
        match self.alpha {
            Some(a) => Ok(a),
            None if p.a12 == p.a21 => Ok(p.a12),
            None => Err(Error::InvalidParameter(format!(
                "{model} needs symmetric links, got a12 = {} and a21 = {}",
                p.a12, p.a21
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub r_ideal: Option<f64>,
    pub r_closed: Option<f64>,
    pub regime: Option<Regime>,
    pub r_edtmc: Option<f64>,
    pub k_used: Option<usize>,
    pub r_sim: Option<f64>,
    pub r_sim_stderr: Option<f64>,
    pub o_r_sim: Option<f64>,
    pub consistency_sim: Option<f64>,
    pub consistency_stderr: Option<f64>,
    pub gamma_sim: Option<(f64, f64)>,
    pub r2_prime: Option<f64>,
    pub r2_star: Option<f64>,
    pub eta: Option<f64>,
    pub gamma: Option<(f64, f64)>,
    pub theta: Option<f64>,
    pub derivative: Option<f64>,
}

impl Metrics {
    /// Fills every field of `self` that `other` provides.
    pub fn merge(&mut self, other: Metrics) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            r_ideal, r_closed, regime, r_edtmc, k_used, r_sim, r_sim_stderr, o_r_sim,
            consistency_sim, consistency_stderr, gamma_sim, r2_prime, r2_star, eta, gamma,
            theta, derivative
        );
    }
}

pub trait CapacityModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn evaluate(&self, point: &Point) -> Result<Metrics>;
}

pub struct Ideal;

impl CapacityModel for Ideal {
    fn name(&self) -> &'static str {
        "ideal"
    }

    fn evaluate(&self, point: &Point) -> Result<Metrics> {
        Ok(Metrics {
            r_ideal: Some(ideal_capacity(point.scenario.rates())?),
            ..Metrics::default()
        })
    }
}

pub struct ClosedForm;

impl CapacityModel for ClosedForm {
    fn name(&self) -> &'static str {
        "closed-form"
    }

    fn evaluate(&self, point: &Point) -> Result<Metrics> {
        let s = twominer::solve(&point.two_miner(self.name())?)?;
        Ok(Metrics {
            r_closed: Some(s.r2),
            regime: Some(s.regime),
            ..Metrics::default()
        })
    }
}

pub struct Edtmc;

impl CapacityModel for Edtmc {
    fn name(&self) -> &'static str {
        "edtmc"
    }

    fn evaluate(&self, point: &Point) -> Result<Metrics> {
        let st = point.settings;
        let solver = solver_by_name(&st.solver)?;
        let build = BuildOptions {
            max_states: st.max_states,
        };
        let (k, cap) = match point.k {
            Some(k) => (k, edtmc::evaluate(point.scenario, k, build, solver.as_ref())?),
            None => {
                let opts = ConvergeOptions { build, max_k: st.max_k };
                edtmc::converge_k_with(point.scenario, st.tolerance, opts, solver.as_ref())?
            }
        };
        Ok(Metrics {
            r_edtmc: Some(cap.growth_rate),
            k_used: Some(k),
            ..Metrics::default()
        })
    }
}

pub struct Simulate;

impl CapacityModel for Simulate {
    fn name(&self) -> &'static str {
        "simulate"
    }

    fn evaluate(&self, point: &Point) -> Result<Metrics> {
        let st = point.settings;
        let cfg = SimConfig::new(point.scenario.clone(), st.slots, st.seed).with_rule(&st.rule);
        let r = simulator::run_replications(&cfg, st.replications)?;
        let gamma_sim = (point.scenario.miners() == 2 && r.gamma_empirical.len() == 2)
            .then(|| (r.gamma_empirical[0], r.gamma_empirical[1]));
        Ok(Metrics {
            r_sim: Some(r.capacity_estimate),
            r_sim_stderr: Some(r.capacity_stderr),
            o_r_sim: Some(r.stale_ratio),
            consistency_sim: r.consistency_fraction,
            consistency_stderr: r.consistency_stderr,
            gamma_sim,
            ..Metrics::default()
        })
    }
}

pub struct ConstantDelay;

impl CapacityModel for ConstantDelay {
    fn name(&self) -> &'static str {
        "r2-prime"
    }

    fn evaluate(&self, point: &Point) -> Result<Metrics> {
        let alpha = point.uniform_alpha(self.name())?;
        let s = point.scenario;
        Ok(Metrics {
            r2_prime: Some(twominer::baseline_constant_delay(s.rate(0), s.rate(1), alpha)?),
            ..Metrics::default()
        })
    }
}

pub struct ForkProbability;

impl CapacityModel for ForkProbability {
    fn name(&self) -> &'static str {
        "r2-star"
    }

    fn evaluate(&self, point: &Point) -> Result<Metrics> {
        let alpha = point.uniform_alpha(self.name())?;
        let s = point.scenario;
        Ok(Metrics {
            r2_star: Some(twominer::baseline_fork_probability(s.rate(0), s.rate(1), alpha)?),
            ..Metrics::default()
        })
    }
}

pub struct Strong;

impl CapacityModel for Strong {
    fn name(&self) -> &'static str {
        "strong"
    }

    fn evaluate(&self, point: &Point) -> Result<Metrics> {
        let p = point.two_miner(self.name())?;
        let r = if p.a12 == 1.0 && p.a21 == 1.0 {
            strongcons::ideal_report(p.c1, p.c2)?
        } else {
            strongcons::fdtmc_numeric(&p, point.settings.bound)?
        };
        Ok(Metrics {
            eta: Some(r.eta),
            gamma: Some((r.gamma1, r.gamma2)),
            theta: Some(r.theta),
            ..Metrics::default()
        })
    }
}

pub struct Derivative;

impl CapacityModel for Derivative {
    fn name(&self) -> &'static str {
        "derivative"
    }

    fn evaluate(&self, point: &Point) -> Result<Metrics> {
        let p = point.two_miner(self.name())?;
        let st = point.settings;
        Ok(Metrics {
            derivative: Some(twominer::capacity_derivative(&p, st.step, st.coupling)?),
            ..Metrics::default()
        })
    }
}

pub const MODEL_NAMES: [&str; 8] = [
    "ideal",
    "closed-form",
    "edtmc",
    "simulate",
    "r2-prime",
    "r2-star",
    "strong",
    "derivative",
];

pub fn model_by_name(name: &str) -> Result<Box<dyn CapacityModel>> {
    Ok(match name {
        "ideal" => Box::new(Ideal),
        "closed-form" => Box::new(ClosedForm),
        "edtmc" => Box::new(Edtmc),
        "simulate" => Box::new(Simulate),
        "r2-prime" => Box::new(ConstantDelay),
        "r2-star" => Box::new(ForkProbability),
        "strong" => Box::new(Strong),
        "derivative" => Box::new(Derivative),
        other => {
            return Err(Error::UnknownStrategy {
                kind: "model",
                name: other.to_string(),
                available: MODEL_NAMES.join(", "),
            })
        }
    })
}
