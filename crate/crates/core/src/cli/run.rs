//! Grid evaluation and CSV emission.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::spec::{ExperimentSpec, GridPoint};
use crate::error::Result;
use crate::models::{model_by_name, CapacityModel, Metrics, Point, Settings};
use crate::netmodel::stale_ratio;

pub const HEADER: [&str; 33] = [
    "point",
    "n",
    "rates",
    "topology",
    "alpha",
    "a12",
    "a21",
    "q",
    "k",
    "k_used",
    "seed",
    "slots",
    "replications",
    "R_ideal",
    "R_closed",
    "R_edtmc",
    "R_sim",
    "R_sim_stderr",
    "R2_prime",
    "R2_star",
    "O_r",
    "O_r_sim",
    "eta",
    "gamma1",
    "gamma2",
    "theta",
    "consistency_sim",
    "consistency_stderr",
    "gamma1_sim",
    "gamma2_sim",
    "dR2_dc1",
    "regime",
    "error",
];

/// One evaluated grid point.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub point: GridPoint,
    pub metrics: Metrics,
    pub errors: Vec<String>,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        !self.errors.is_empty()
    }

    /// Stale ratio of the analytic capacity, preferring the closed form.
    pub fn stale_ratio(&self) -> Option<f64> {
        let r = self.metrics.r_closed.or(self.metrics.r_edtmc)?;
        stale_ratio(self.point.scenario.rates(), r).ok()
    }

    fn fields(&self, index: usize, settings: &Settings, simulated: bool) -> Vec<String> {
        let s = &self.point.scenario;
        let m = &self.metrics;
        let two = s.miners() == 2;
        let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let u = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        let sim = |x: u64| if simulated { x.to_string() } else { String::new() };
        vec![
            index.to_string(),
            s.miners().to_string(),
            s.rates().iter().map(f64::to_string).collect::<Vec<_>>().join("|"),
            self.point.topology.map(|t| t.name()).unwrap_or("custom").to_string(),
            f(self.point.alpha),
            f(two.then(|| s.link(0, 1))),
            f(two.then(|| s.link(1, 0))),
            f(self.point.q),
            u(self.point.k),
            u(m.k_used),
            sim(settings.seed),
            sim(settings.slots),
            sim(settings.replications),
            f(m.r_ideal),
            f(m.r_closed),
            f(m.r_edtmc),
            f(m.r_sim),
            f(m.r_sim_stderr),
            f(m.r2_prime),
            f(m.r2_star),
            f(self.stale_ratio()),
            f(m.o_r_sim),
            f(m.eta),
            f(m.gamma.map(|g| g.0)),
            f(m.gamma.map(|g| g.1)),
            f(m.theta),
            f(m.consistency_sim),
            f(m.consistency_stderr),
            f(m.gamma_sim.map(|g| g.0)),
            f(m.gamma_sim.map(|g| g.1)),
            f(m.derivative),
            m.regime.map(|r| r.name()).unwrap_or_default().to_string(),
            self.errors.join("; "),
        ]
    }
}

/// All rows of an experiment, in grid order.
#[derive(Debug, Clone)]
pub struct Table {
    pub settings: Settings,
    pub models: Vec<String>,
    pub rows: Vec<ResultRow>,
}

impl Table {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(HEADER)?;
        let simulated = self.models.iter().any(|m| m == "simulate");
        for (i, row) in self.rows.iter().enumerate() {
            w.write_record(row.fields(i, &self.settings, simulated))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }
}

/// Validates the experiment and evaluates every point; rows are kept in grid order.
pub fn evaluate(spec: &ExperimentSpec) -> Result<Table> {
    let names = spec.model_names()?;
    let settings = spec.settings();
    let points = spec.points()?;
    let models: Vec<Box<dyn CapacityModel>> =
        names.iter().map(|n| model_by_name(n)).collect::<Result<_>>()?;
    let rows = points
        .into_par_iter()
        .map(|point| {
            let p = Point {
                scenario: &point.scenario,
                alpha: point.alpha,
                k: point.k,
                settings: &settings,
            };
            let mut metrics = Metrics::default();
            let mut errors = Vec::new();
            for model in &models {
                match model.evaluate(&p) {
                    Ok(m) => metrics.merge(m),
                    Err(e) => errors.push(format!("{}: {e}", model.name())),
                }
            }
            ResultRow { point, metrics, errors }
        })
        .collect();
    Ok(Table { settings, models: names, rows })
}

/// Evaluates the experiment and writes the CSV to `out` (stdout when `None`).
/// Nothing is written when the experiment fails validation.
pub fn run_experiment(spec: &ExperimentSpec, out: Option<&Path>) -> Result<Table> {
    let table = evaluate(spec)?;
    let csv = table.to_csv_string()?;
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, csv)?;
        }
        None => std::io::stdout().lock().write_all(csv.as_bytes())?,
    }
    Ok(table)
}
