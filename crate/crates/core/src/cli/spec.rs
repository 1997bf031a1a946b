//! Experiment documents and their expansion into parameter points.

use serde::Deserialize;

use crate::error::{check_probability, Error, Result};
use crate::models::{model_by_name, Settings};
use crate::netmodel::{aggregate_lan, NetworkScenario};
use crate::twominer::Coupling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    EdtmcCapacity,
    ClosedForm,
    StrongConsistency,
    Simulate,
    CompareBaselines,
    Sweep,
}

impl Kind {
    pub fn default_models(self) -> &'static [&'static str] {
        match self {
            Kind::EdtmcCapacity => &["ideal", "edtmc"],
            Kind::ClosedForm => &["ideal", "closed-form"],
            Kind::StrongConsistency => &["strong"],
            Kind::Simulate => &["simulate"],
            Kind::CompareBaselines => &["closed-form", "r2-prime", "r2-star", "simulate"],
            Kind::Sweep => &[],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::EdtmcCapacity => "edtmc-capacity",
            Kind::ClosedForm => "closed-form",
            Kind::StrongConsistency => "strong-consistency",
            Kind::Simulate => "simulate",
            Kind::CompareBaselines => "compare-baselines",
            Kind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Complete,
    Star,
    Line,
}

impl Topology {
    pub fn name(self) -> &'static str {
        match self {
            Topology::Complete => "complete",
            Topology::Star => "star",
            Topology::Line => "line",
        }
    }

    pub fn build(self, rates: Vec<f64>, alpha: f64) -> Result<NetworkScenario> {
        match self {
            Topology::Complete => NetworkScenario::complete(rates, alpha),
            Topology::Star => NetworkScenario::star(rates, alpha),
            Topology::Line => NetworkScenario::line(rates, alpha),
        }
    }
}

/// A real-valued axis: explicit values or evenly spaced steps over `[from, to]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Range { from: f64, to: f64, steps: usize },
}

impl Axis {
    pub fn values(&self, name: &str) -> Result<Vec<f64>> {
        let v = match *self {
            Axis::Values(ref v) => v.clone(),
            Axis::Range { from, to, steps } => match steps {
                0 => Vec::new(),
                1 => vec![from],
                _ => (0..steps)
                    .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
                    .collect(),
            },
        };
        if v.is_empty() {
            return Err(Error::Config(format!("grid axis `{name}` is empty")));
        }
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::Config(format!("grid axis `{name}` has non-finite value {bad}")));
        }
        Ok(v)
    }

    fn probabilities(&self, name: &str) -> Result<Vec<f64>> {
        let v = self.values(name)?;
        for &x in &v {
            check_probability(name, x)?;
        }
        Ok(v)
    }
}

/// Rates `c_i = c_1 q^(i-1)` for `i = 1..=n`, normalised so they sum to `total`.
pub fn mining_profile(n: usize, q: f64, total: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("mining profile needs n >= 1".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!("scale factor q = {q} is outside (0, 1]")));
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvalidParameter(format!("total rate {total} must be positive")));
    }
    if q == 1.0 {
        return Ok(vec![total / n as f64; n]);
    }
    let c1 = total * (1.0 - q) / (1.0 - q.powi(n as i32));
    Ok((0..n).map(|i| c1 * q.powi(i as i32)).collect())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileAxes {
    pub n: Vec<usize>,
    pub q: Axis,
    #[serde(default = "default_total")]
    pub total: Axis,
}

fn default_total() -> Axis {
    Axis::Values(vec![0.5])
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairAxes {
    pub c1: Axis,
    #[serde(default)]
    pub c2: Option<Axis>,
    /// Sets `c2 = 1 - c1` instead of sweeping `c2`.
    #[serde(default)]
    pub complement: bool,
}

/// Two-miner rates `[share * total, (1 - share) * total]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitAxes {
    pub share: Axis,
    pub total: Axis,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanGroup {
    pub rate: f64,
    pub count: u32,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    /// Explicit rate vectors.
    pub rates: Option<Vec<Vec<f64>>>,
    /// Geometric profiles over `n`, `q` and `total`.
    pub profile: Option<ProfileAxes>,
    /// Two-miner rate pairs.
    pub pairs: Option<PairAxes>,
    /// Two-miner rates by share of the total.
    pub split: Option<SplitAxes>,
    /// Each entry lists LAN groups; every group becomes one aggregated miner.
    pub lan: Option<Vec<Vec<LanGroup>>>,
    /// Complete scenarios with their own links.
    pub scenarios: Option<Vec<NetworkScenario>>,
    pub topology: Option<Vec<Topology>>,
    pub alpha: Option<Axis>,
    pub a12: Option<Axis>,
    pub a21: Option<Axis>,
    pub k: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SettingsDocument {
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
    pub coupling: CouplingName,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingName {
    #[default]
    Free,
    Complement,
}

impl Default for SettingsDocument {
    fn default() -> Self {
        Settings::default().into()
    }
}

impl From<Settings> for SettingsDocument {
    fn from(s: Settings) -> Self {
        Self {
            tolerance: s.tolerance,
            max_k: s.max_k,
            max_states: s.max_states,
            solver: s.solver,
            slots: s.slots,
            seed: s.seed,
            replications: s.replications,
            rule: s.rule,
            bound: s.bound,
            step: s.step,
            coupling: match s.coupling {
                Coupling::Free => CouplingName::Free,
                Coupling::Complement => CouplingName::Complement,
            },
        }
    }
}

impl From<SettingsDocument> for Settings {
    fn from(d: SettingsDocument) -> Self {
        Self {
            tolerance: d.tolerance,
            max_k: d.max_k,
            max_states: d.max_states,
            solver: d.solver,
            slots: d.slots,
            seed: d.seed,
            replications: d.replications,
            rule: d.rule,
            bound: d.bound,
            step: d.step,
            coupling: match d.coupling {
                CouplingName::Free => Coupling::Free,
                CouplingName::Complement => Coupling::Complement,
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub kind: Option<Kind>,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub models: Option<Vec<String>>,
    pub grid: Grid,
    #[serde(default)]
    pub settings: SettingsDocument,
}

/// A fully specified parameter point.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub scenario: NetworkScenario,
    pub topology: Option<Topology>,
    pub alpha: Option<f64>,
    pub q: Option<f64>,
    pub k: Option<usize>,
}

struct RateSet {
    rates: Vec<f64>,
    q: Option<f64>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.get("miners").is_some() {
            return Self::from_sim_config(value);
        }
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    /// A scenario document extended with simulation settings, run as one point.
    fn from_sim_config(mut value: serde_json::Value) -> Result<Self> {
        let obj = value
            .as_object_mut()
            .ok_or_else(|| Error::Config("expected a JSON object".into()))?;
        let mut settings = SettingsDocument::default();
        let take_u64 = |obj: &mut serde_json::Map<_, _>, key: &str| -> Result<Option<u64>> {
            obj.remove(key)
                .map(|v: serde_json::Value| {
                    v.as_u64()
                        .ok_or_else(|| Error::Config(format!("`{key}` must be a non-negative integer")))
                })
                .transpose()
        };
        if let Some(v) = take_u64(obj, "slots")? {
            settings.slots = v;
        }
        if let Some(v) = take_u64(obj, "seed")? {
            settings.seed = v;
        }
        if let Some(v) = take_u64(obj, "replications")? {
            settings.replications = v;
        }
        if let Some(v) = obj.remove("rule") {
            settings.rule = v
                .as_str()
                .ok_or_else(|| Error::Config("`rule` must be a string".into()))?
                .to_string();
        }
        let scenario: NetworkScenario =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            kind: Some(Kind::Simulate),
            description: None,
            models: None,
            grid: Grid {
                scenarios: Some(vec![scenario]),
                ..Grid::default()
            },
            settings,
        })
    }

    pub fn kind(&self) -> Kind {
        self.kind.unwrap_or(Kind::Sweep)
    }

    pub fn model_names(&self) -> Result<Vec<String>> {
        let names: Vec<String> = match &self.models {
            Some(m) => m.clone(),
            None => self.kind().default_models().iter().map(|s| s.to_string()).collect(),
        };
        if names.is_empty() {
            return Err(Error::Config(format!(
                "experiment kind `{}` needs an explicit `models` list",
                self.kind().name()
            )));
        }
        for name in &names {
            model_by_name(name)?;
        }
        Ok(names)
    }

    pub fn settings(&self) -> Settings {
        self.settings.clone().into()
    }

    /// Every parameter point: rates outermost, then topology, then links, then `k`.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        let g = &self.grid;
        let ks: Vec<Option<usize>> = match &g.k {
            None => vec![None],
            Some(v) if v.is_empty() => return Err(Error::Config("grid axis `k` is empty".into())),
            Some(v) => v.iter().map(|&k| Some(k)).collect(),
        };
        let sources = [
            g.rates.is_some(),
            g.profile.is_some(),
            g.pairs.is_some(),
            g.split.is_some(),
            g.lan.is_some(),
            g.scenarios.is_some(),
        ];
        match sources.iter().filter(|&&s| s).count() {
            0 => {
                return Err(Error::Config(
                    "grid needs one of `rates`, `profile`, `pairs`, `split`, `lan` or `scenarios`".into(),
                ))
            }
            1 => {}
            _ => return Err(Error::Config("grid has more than one rate source".into())),
        }

        let mut out = Vec::new();
        if let Some(scenarios) = &g.scenarios {
            if g.topology.is_some() || g.alpha.is_some() || g.a12.is_some() || g.a21.is_some() {
                return Err(Error::Config(
                    "`scenarios` carry their own links; drop `topology`, `alpha`, `a12` and `a21`".into(),
                ));
            }
            if scenarios.is_empty() {
                return Err(Error::Config("grid axis `scenarios` is empty".into()));
            }
            for s in scenarios {
                for &k in &ks {
                    out.push(GridPoint {
                        scenario: s.clone(),
                        topology: None,
                        alpha: None,
                        q: None,
                        k,
                    });
                }
            }
            return Ok(out);
        }

        let rate_sets = self.rate_sets()?;
        let directed = g.a12.is_some() || g.a21.is_some();
        if directed {
            if g.alpha.is_some() || g.topology.is_some() {
                return Err(Error::Config(
                    "`a12`/`a21` set two-miner links directly; drop `alpha` and `topology`".into(),
                ));
            }
            let a12 = g
                .a12
                .as_ref()
                .ok_or_else(|| Error::Config("`a21` needs `a12`".into()))?
                .probabilities("a12")?;
            let a21 = g
                .a21
                .as_ref()
                .ok_or_else(|| Error::Config("`a12` needs `a21`".into()))?
                .probabilities("a21")?;
            for rs in &rate_sets {
                if rs.rates.len() != 2 {
                    return Err(Error::Config(format!(
                        "`a12`/`a21` need two miners, got {}",
                        rs.rates.len()
                    )));
                }
                for &x in &a12 {
                    for &y in &a21 {
                        for &k in &ks {
                            out.push(GridPoint {
                                scenario: NetworkScenario::two_miner(rs.rates[0], rs.rates[1], x, y)?,
                                topology: None,
                                alpha: (x == y).then_some(x),
                                q: rs.q,
                                k,
                            });
                        }
                    }
                }
            }
            return Ok(out);
        }

        let topologies = match &g.topology {
            None => vec![Topology::Complete],
            Some(t) if t.is_empty() => return Err(Error::Config("grid axis `topology` is empty".into())),
            Some(t) => t.clone(),
        };
        let alphas = match &g.alpha {
            None => vec![1.0],
            Some(a) => a.probabilities("alpha")?,
        };
        for rs in &rate_sets {
            for &t in &topologies {
                for &alpha in &alphas {
                    for &k in &ks {
                        out.push(GridPoint {
                            scenario: t.build(rs.rates.clone(), alpha)?,
                            topology: Some(t),
                            alpha: Some(alpha),
                            q: rs.q,
                            k,
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    fn rate_sets(&self) -> Result<Vec<RateSet>> {
        let g = &self.grid;
        let sets: Vec<RateSet> = if let Some(rates) = &g.rates {
            rates.iter().map(|r| RateSet { rates: r.clone(), q: None }).collect()
        } else if let Some(p) = &g.profile {
            if p.n.is_empty() {
                return Err(Error::Config("grid axis `n` is empty".into()));
            }
            let qs = p.q.values("q")?;
            let totals = p.total.values("total")?;
            let mut v = Vec::new();
            for &n in &p.n {
                for &q in &qs {
                    for &total in &totals {
                        v.push(RateSet {
                            rates: mining_profile(n, q, total)?,
                            q: Some(q),
                        });
                    }
                }
            }
            v
        } else if let Some(p) = &g.pairs {
            let c1 = p.c1.probabilities("c1")?;
            let mut v = Vec::new();
            match (&p.c2, p.complement) {
                (Some(_), true) => {
                    return Err(Error::Config("`pairs` takes either `c2` or `complement`".into()))
                }
                (None, false) => {
                    return Err(Error::Config("`pairs` needs `c2` or `complement: true`".into()))
                }
                (None, true) => v.extend(c1.iter().map(|&a| RateSet {
                    rates: vec![a, 1.0 - a],
                    q: None,
                })),
                (Some(c2), false) => {
                    let c2 = c2.probabilities("c2")?;
                    for &a in &c1 {
                        for &b in &c2 {
                            v.push(RateSet { rates: vec![a, b], q: None });
                        }
                    }
                }
            }
            v
        } else if let Some(p) = &g.split {
            let shares = p.share.probabilities("share")?;
            let totals = p.total.probabilities("total")?;
            let mut v = Vec::new();
            for &total in &totals {
                for &x in &shares {
                    v.push(RateSet {
                        rates: vec![x * total, (1.0 - x) * total],
                        q: None,
                    });
                }
            }
            v
        } else if let Some(lan) = &g.lan {
            lan.iter()
                .map(|groups| {
                    let rates = groups
                        .iter()
                        .map(|grp| aggregate_lan(grp.rate, grp.count))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(RateSet { rates, q: None })
                })
                .collect::<Result<_>>()?
        } else {
            unreachable!("rate source checked by caller")
        };
        if sets.is_empty() {
            return Err(Error::Config("grid has no rate vectors".into()));
        }
        Ok(sets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(json: &str) -> ExperimentSpec {
        ExperimentSpec::from_json(json).unwrap()
    }

    #[test]
    fn uniform_profile() {
        assert_eq!(mining_profile(5, 1.0, 0.5).unwrap(), vec![0.1; 5]);
    }

    #[test]
    fn geometric_profile_leading_rate() {
        let c = mining_profile(5, 0.1, 0.5).unwrap();
        let expected = (1.0 - 0.1) / (2.0 * (1.0 - 0.1f64.powi(5)));
        assert!((c[0] - expected).abs() < 1e-15);
        assert!((c[0] - 0.45005).abs() < 1e-4);
        for w in c.windows(2) {
            assert!((w[1] / w[0] - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_rejects_bad_inputs() {
        assert!(mining_profile(3, 0.0, 0.5).is_err());
        assert!(mining_profile(0, 0.5, 0.5).is_err());
        assert!(mining_profile(3, 1.5, 0.5).is_err());
        assert!(mining_profile(3, 0.5, 0.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn profile_sums_to_total(n in 1usize..30, q in 0.01f64..=1.0, total in 0.01f64..2.0) {
            let s: f64 = mining_profile(n, q, total).unwrap().iter().sum();
            proptest::prop_assert!((s - total).abs() < 1e-12);
        }
    }

    #[test]
    fn range_axis_is_inclusive() {
        let a = Axis::Range { from: 0.1, to: 0.9, steps: 5 };
        let v = a.values("alpha").unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[4], 0.9);
    }

    #[test]
    fn expansion_order_and_count() {
        let s = spec(
            r#"{"kind":"closed-form","grid":{"pairs":{"c1":[0.2,0.3],"c2":[0.4]},
                "a12":[0.1,0.5],"a21":[0.2,0.8]}}"#,
        );
        let p = s.points().unwrap();
        assert_eq!(p.len(), 8);
        assert_eq!(p[0].scenario.link(0, 1), 0.1);
        assert_eq!(p[1].scenario.link(1, 0), 0.8);
        assert_eq!(p[4].scenario.rate(0), 0.3);
    }

    #[test]
    fn topology_and_alpha_product() {
        let s = spec(
            r#"{"grid":{"rates":[[0.1,0.1,0.1]],"topology":["complete","line"],
                "alpha":{"from":0.1,"to":0.9,"steps":3},"k":[2,3]}}"#,
        );
        let p = s.points().unwrap();
        assert_eq!(p.len(), 12);
        assert_eq!(p[0].topology, Some(Topology::Complete));
        assert_eq!(p[6].topology, Some(Topology::Line));
        assert_eq!((p[0].k, p[1].k), (Some(2), Some(3)));
    }

    #[test]
    fn empty_axes_are_rejected() {
        for json in [
            r#"{"grid":{"rates":[]}}"#,
            r#"{"grid":{"rates":[[0.1]],"alpha":[]}}"#,
            r#"{"grid":{"rates":[[0.1]],"topology":[]}}"#,
            r#"{"grid":{"profile":{"n":[],"q":[0.5]}}}"#,
            r#"{"grid":{"rates":[[0.1]],"k":[]}}"#,
            r#"{"grid":{}}"#,
        ] {
            assert!(spec(json).points().is_err(), "{json}");
        }
    }

    #[test]
    fn probabilities_are_range_checked() {
        assert!(spec(r#"{"grid":{"rates":[[0.1]],"alpha":[1.2]}}"#).points().is_err());
        assert!(spec(r#"{"grid":{"rates":[[1.5]]}}"#).points().is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentSpec::from_json(r#"{"grid":{"rates":[[0.1]]},"colour":1}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"grid":{"ratez":[[0.1]]}}"#).is_err());
    }

    #[test]
    fn sweep_needs_models() {
        let s = spec(r#"{"kind":"sweep","grid":{"rates":[[0.1]]}}"#);
        assert!(s.model_names().is_err());
        let s = spec(r#"{"kind":"sweep","models":["warp"],"grid":{"rates":[[0.1]]}}"#);
        assert!(s.model_names().is_err());
    }

    #[test]
    fn sim_config_document() {
        let s = spec(
            r#"{"miners":[{"rate":0.2},{"rate":0.4}],"links":[[0,0.2],[0.8,0]],
                "slots":5000,"seed":9,"rule":"ghost","replications":2}"#,
        );
        assert_eq!(s.kind(), Kind::Simulate);
        let st = s.settings();
        assert_eq!((st.slots, st.seed, st.replications, st.rule.as_str()), (5000, 9, 2, "ghost"));
        assert_eq!(s.points().unwrap()[0].scenario.link(1, 0), 0.8);
    }

    #[test]
    fn complement_pairs_and_lan_groups() {
        let s = spec(r#"{"grid":{"pairs":{"c1":[0.25],"complement":true}}}"#);
        assert_eq!(s.points().unwrap()[0].scenario.rates(), &[0.25, 0.75]);
        let s = spec(r#"{"grid":{"split":{"share":[0.25],"total":[0.4,0.8]}}}"#);
        let p = s.points().unwrap();
        assert_eq!(p[1].scenario.rates(), &[0.25 * 0.8, 0.75 * 0.8]);
        let s = spec(r#"{"grid":{"lan":[[{"rate":0.5,"count":2},{"rate":0.1,"count":1}]]}}"#);
        assert_eq!(s.points().unwrap()[0].scenario.rates(), &[0.75, 0.1]);
    }
}
