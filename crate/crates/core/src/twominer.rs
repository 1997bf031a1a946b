//! Exact steady state and capacity of the two-miner chain.
//!
//! Relative state `(i, 0)` means miner 1 leads by `i`, `(0, j)` that miner 2
//! leads by `j`. Leading-side probabilities decay geometrically; the ratio is
//! the small root of a quadratic, computed in rationalized form so that it is
//! finite at `a = 1` and accurate for tiny rates.

use serde::Serialize;

use crate::error::{check_probability, Error, Result};
use crate::netmodel::expected_delay;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoMinerParams {
    pub c1: f64,
    pub c2: f64,
    pub a12: f64,
    pub a21: f64,
}

impl TwoMinerParams {
    pub fn new(c1: f64, c2: f64, a12: f64, a21: f64) -> Result<Self> {
        let p = Self { c1, c2, a12, a21 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("c1", self.c1)?;
        check_probability("c2", self.c2)?;
        check_probability("a12", self.a12)?;
        check_probability("a21", self.a21)
    }

    /// The same network with the two miners relabelled.
    pub fn swapped(&self) -> Self {
        Self {
            c1: self.c2,
            c2: self.c1,
            a12: self.a21,
            a21: self.a12,
        }
    }
}

/// Long-run behaviour of the two-miner chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Positive recurrent; the steady state below is exact.
    Ergodic,
    /// Neither link ever delivers. Capacity is the faster miner's rate.
    Partitioned,
    /// One miner's lead drifts to infinity because its chain is never
    /// delivered while it outpaces the other. Capacity is its rate.
    Runaway,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Ergodic => "ergodic",
            Regime::Partitioned => "partitioned",
            Regime::Runaway => "runaway",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoMinerSolution {
    pub params: TwoMinerParams,
    pub regime: Regime,
    pub z1: f64,
    pub z3: f64,
    pub d_const: f64,
    pub e_const: f64,
    pub f_const: f64,
    pub g_const: f64,
    pub pi00: f64,
    pub pi10: f64,
    pub pi01: f64,
    /// `sum_{i >= 2} pi_{i,0}`
    pub phi1: f64,
    /// `sum_{j >= 2} pi_{0,j}`
    pub psi1: f64,
    pub r2: f64,
}

impl TwoMinerSolution {
    pub fn total_mass(&self) -> f64 {
        self.pi00 + self.pi10 + self.phi1 + self.pi01 + self.psi1
    }
}

/// Root in `[0, 1]` of
/// `(1-a) cf (1-cb) z^2 - [1 - (1-a)(1 - cf - cb + 2 cf cb)] z + (1-a)(1-cf) cb`.
pub fn small_root(c_fwd: f64, c_bwd: f64, a: f64) -> Result<f64> {
    check_probability("c_fwd", c_fwd)?;
    check_probability("c_bwd", c_bwd)?;
    check_probability("a", a)?;
    let fail = 1.0 - a;
    let quad = fail * c_fwd * (1.0 - c_bwd);
    let constant = fail * (1.0 - c_fwd) * c_bwd;
    if constant == 0.0 {
        return Ok(0.0);
    }
    let b = 1.0 - fail * (1.0 - c_fwd - c_bwd + 2.0 * c_fwd * c_bwd);
    let mut disc = b * b - 4.0 * quad * constant;
    if disc < 0.0 {
        if disc < -1e-14 {
            return Err(Error::NegativeDiscriminant(disc));
        }
        disc = 0.0;
    }
    Ok(2.0 * constant / (b + disc.sqrt()))
}

/// Residual of the quadratic defining [`small_root`].
pub fn root_residual(c_fwd: f64, c_bwd: f64, a: f64, z: f64) -> f64 {
    let fail = 1.0 - a;
    let b = 1.0 - fail * (1.0 - c_fwd - c_bwd + 2.0 * c_fwd * c_bwd);
    fail * c_fwd * (1.0 - c_bwd) * z * z - b * z + fail * (1.0 - c_fwd) * c_bwd
}

/// Growth rate in each of the three kinds of post-sync situation.
fn omegas(p: &TwoMinerParams) -> (f64, f64, f64) {
    let both = p.c1 + p.c2 - p.c1 * p.c2;
    let one_leads = p.c1 + p.a12 * (p.c2 - p.c1 * p.c2);
    let two_leads = p.c2 + p.a21 * (p.c1 - p.c1 * p.c2);
    (both, one_leads, two_leads)
}

pub fn solve(params: &TwoMinerParams) -> Result<TwoMinerSolution> {
    params.validate()?;
    let TwoMinerParams { c1, c2, a12, a21 } = *params;
    let u = c1 * (1.0 - c2);
    let v = (1.0 - c1) * c2;
    let w = (1.0 - c1) * (1.0 - c2) + c1 * c2;
    let z1 = small_root(c1, c2, a12)?;
    let z3 = small_root(c2, c1, a21)?;
    // Geometric ratios along each leading side.
    let rho1 = small_root(c2, c1, a12)?;
    let rho2 = small_root(c1, c2, a21)?;

    let mut sol = TwoMinerSolution {
        params: *params,
        regime: Regime::Ergodic,
        z1,
        z3,
        d_const: f64::NAN,
        e_const: f64::NAN,
        f_const: f64::NAN,
        g_const: f64::NAN,
        pi00: 0.0,
        pi10: 0.0,
        pi01: 0.0,
        phi1: 0.0,
        psi1: 0.0,
        r2: 0.0,
    };

    // Lengths never separate: both idle forever or both mine every slot.
    if u == 0.0 && v == 0.0 {
        sol.pi00 = 1.0;
        sol.r2 = omegas(params).0;
        return Ok(sol);
    }

    let escapes1 = a12 == 0.0 && u >= v;
    let escapes2 = a21 == 0.0 && v >= u;
    if escapes1 || escapes2 {
        sol.regime = if a12 == 0.0 && a21 == 0.0 {
            Regime::Partitioned
        } else {
            Regime::Runaway
        };
        if escapes1 && escapes2 {
            // Equal drift: neither side is favoured.
            sol.phi1 = 0.5;
            sol.psi1 = 0.5;
            sol.r2 = c1;
        } else if escapes1 {
            sol.phi1 = 1.0;
            sol.r2 = c1;
        } else {
            sol.psi1 = 1.0;
            sol.r2 = c2;
        }
        return Ok(sol);
    }

    // d = 1 + (1-a12) u (1-z1) / a12 = 1 / (1 - rho1), finite also at a12 = 0.
    let d = 1.0 / (1.0 - rho1);
    let e = 1.0 / (1.0 - rho2);
    let f = 1.0 - (1.0 - a12) * (w + u * z1) - d * a12 * u;
    let g = 1.0 - (1.0 - a21) * (w + v * z3) - e * a21 * v;
    let den = (f + d * u) * (g + e * v) - (d * u * (1.0 - a12)) * (e * v * (1.0 - a21));
    let pi10 = u * (g + a21 * e * v) / den;
    let pi01 = v * (f + a12 * d * u) / den;
    let phi1 = (d - 1.0) * pi10;
    let psi1 = (e - 1.0) * pi01;
    let pi00 = 1.0 - (d * pi10 + e * pi01);

    let (w00, w10, w01) = omegas(params);
    let mut r2 = w00 * pi00 + (w10 * (pi10 + phi1) + w01 * (pi01 + psi1));
    if c1 == 0.0 {
        r2 = c2;
    } else if c2 == 0.0 {
        r2 = c1;
    }
    sol.d_const = d;
    sol.e_const = e;
    sol.f_const = f;
    sol.g_const = g;
    sol.pi00 = pi00;
    sol.pi10 = pi10;
    sol.pi01 = pi01;
    sol.phi1 = phi1;
    sol.psi1 = psi1;
    sol.r2 = r2;
    Ok(sol)
}

/// Capacity with both links perfect, `c1 + c2 - c1 c2`.
pub fn ideal_two_miner(c1: f64, c2: f64) -> f64 {
    c1 + c2 - c1 * c2
}

/// Growth rate of two LANs under a constant propagation delay `1 / alpha`.
pub fn baseline_constant_delay(c1: f64, c2: f64, alpha: f64) -> Result<f64> {
    check_probability("c1", c1)?;
    check_probability("c2", c2)?;
    if c1 == c2 {
        return Err(Error::InvalidParameter(
            "constant-delay baseline is singular for equal rates".into(),
        ));
    }
    let d = expected_delay(alpha)?;
    let e1 = (2.0 * c1 * d).exp();
    let e2 = (2.0 * c2 * d).exp();
    Ok((c1 * c1 * e1 - c2 * c2 * e2) / (c1 * e1 - c2 * e2))
}

/// Growth rate derived from a fork probability under delay `1 / alpha`.
pub fn baseline_fork_probability(c1: f64, c2: f64, alpha: f64) -> Result<f64> {
    check_probability("c1", c1)?;
    check_probability("c2", c2)?;
    let d = expected_delay(alpha)?;
    let s = c1 + c2;
    Ok(s / (2.0 - (-d * s).exp()))
}

/// How `c2` moves when `c1` is perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coupling {
    /// `c2` held fixed.
    #[default]
    Free,
    /// `c2 = 1 - c1`.
    Complement,
}

/// Central difference of `R2` in `c1` with step `h`.
pub fn capacity_derivative(params: &TwoMinerParams, h: f64, coupling: Coupling) -> Result<f64> {
    params.validate()?;
    if h.is_nan() || h <= 0.0 || params.c1 - h < 0.0 || params.c1 + h > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "step {h} moves c1 = {} outside [0, 1]",
            params.c1
        )));
    }
    let at = |c1: f64| -> Result<f64> {
        let c2 = match coupling {
            Coupling::Free => params.c2,
            Coupling::Complement => 1.0 - c1,
        };
        Ok(solve(&TwoMinerParams { c1, c2, ..*params })?.r2)
    };
    Ok((at(params.c1 + h)? - at(params.c1 - h)?) / (2.0 * h))
}
