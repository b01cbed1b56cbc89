//! Parameter sweeps over seed fractions and `beta`, with replicas.
//!
//! Every replica draws its simulation seed from the stream at
//! `(master_seed, grid index, replica index)`, so results do not depend on
//! scheduling, and skipped points consume nothing.

use std::path::Path;

use log::{info, warn};
use percolate::influence::argmax;
use percolate::rng::derive_stream;
use percolate::{init_scenario, percolation_threshold, Error, Graph, ScenarioConfig, Simulator};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::config::{numeric_value, set_path, Axis, Config};
use crate::output::{fmt_f64, CsvTable};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub name: String,
    pub grid: Vec<f64>,
}

impl GridAxis {
    fn new(axis: &Axis, default_name: &str) -> Result<Self, CliError> {
        Ok(GridAxis {
            key: axis.key.clone(),
            name: axis
                .name
                .clone()
                .unwrap_or_else(|| default_name.to_string()),
            grid: axis.grid()?,
        })
    }

    fn step(&self) -> f64 {
        match self.grid.as_slice() {
            [a, b, ..] => (b - a).abs(),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Fully layered configuration table each grid point starts from.
    pub base: Table,
    pub axis1: GridAxis,
    pub axis2: Option<GridAxis>,
    pub betas: Vec<f64>,
    pub replicas: usize,
    pub master_seed: u64,
    /// 0-based candidate whose threshold is measured.
    pub candidate: usize,
    pub success_fraction: f64,
}

impl SweepSpec {
    pub fn from_config(base: &Table, cfg: &Config) -> Result<Self, CliError> {
        let s = &cfg.sweep;
        let axis1 = s
            .axis1
            .as_ref()
            .ok_or_else(|| CliError::Usage("missing required key sweep.axis1".into()))?;
        let two_d = s.axis2.is_some();
        let default1 = match (two_d, axis1.seed_target()) {
            (false, Some(_)) => "rho".to_string(),
            (false, None) => axis1.key.rsplit('.').next().unwrap_or("value").to_string(),
            (true, _) => "axis1".to_string(),
        };
        let axis1 = GridAxis::new(axis1, &default1)?;
        let axis2 = s
            .axis2
            .as_ref()
            .map(|a| GridAxis::new(a, "axis2"))
            .transpose()?;
        let betas = match &s.betas {
            Some(b) if b.is_empty() => {
                return Err(CliError::Usage("sweep.betas: empty grid".into()))
            }
            Some(b) => b.clone(),
            None => vec![cfg.beta()?],
        };
        if s.replicas == 0 {
            return Err(CliError::Usage(
                "sweep.replicas: need at least one replica".into(),
            ));
        }
        let candidate = match (
            s.candidate,
            cfg.sweep.axis1.as_ref().and_then(Axis::seed_target),
        ) {
            (Some(c), _) | (None, Some((_, c))) => c,
            (None, None) => 1,
        };
        if candidate == 0 {
            return Err(CliError::Usage(
                "sweep.candidate: candidates are numbered from 1".into(),
            ));
        }
        Ok(SweepSpec {
            base: base.clone(),
            axis1,
            axis2,
            betas,
            replicas: s.replicas,
            master_seed: s.master_seed,
            candidate: candidate - 1,
            success_fraction: s.success_fraction,
        })
    }

    /// Grid points in output order: `beta`, then axis 1, then axis 2.
    pub fn points(&self) -> Vec<(f64, f64, Option<f64>)> {
        let mut out = Vec::new();
        for &beta in &self.betas {
            for &x in &self.axis1.grid {
                match &self.axis2 {
                    None => out.push((beta, x, None)),
                    Some(a2) => out.extend(a2.grid.iter().map(|&y| (beta, x, Some(y)))),
                }
            }
        }
        out
    }

    fn point_table(&self, beta: f64, x: f64, y: Option<f64>) -> Result<Table, CliError> {
        let mut t = self.base.clone();
        set_path(&mut t, "scenario.beta", Value::Float(beta))?;
        let v = numeric_value(&t, &self.axis1.key, x);
        set_path(&mut t, &self.axis1.key, v)?;
        if let (Some(a2), Some(y)) = (&self.axis2, y) {
            let v = numeric_value(&t, &a2.key, y);
            set_path(&mut t, &a2.key, v)?;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Serial,
    /// `None` uses every available core.
    Threads(Option<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub index: usize,
    pub beta: f64,
    pub axis1: f64,
    pub axis2: Option<f64>,
    /// Why the point was not simulated.
    pub skipped: Option<String>,
    /// Mean fraction of undecided votes per candidate.
    pub fractions: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// 1-based.
    pub winner: Option<usize>,
    pub replicas: usize,
    pub undecided: usize,
    pub events: Vec<u64>,
    pub early_stopped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryPoint {
    pub beta: f64,
    pub threshold: Option<f64>,
    pub feasible: bool,
    pub condition_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredThreshold {
    pub beta: f64,
    /// Smallest grid value where the candidate's mean fraction reaches the
    /// success fraction.
    pub threshold: Option<f64>,
    /// The grid step.
    pub uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub candidates: usize,
    /// 1-based.
    pub candidate: usize,
    pub axis1: String,
    pub axis2: Option<String>,
    pub replicas: usize,
    pub master_seed: u64,
    pub points: Vec<PointResult>,
    pub theory: Vec<TheoryPoint>,
    pub measured: Vec<MeasuredThreshold>,
}

struct Task {
    point: usize,
    cfg: ScenarioConfig,
}

struct Outcome {
    votes: Vec<usize>,
    undecided: usize,
    events: u64,
    early_stopped: bool,
}

fn replica_seed(master: u64, point: usize, replica: usize) -> u64 {
    derive_stream(master, &[point as u64, replica as u64]).random()
}

pub fn run_sweep(
    spec: &SweepSpec,
    graph: &Graph,
    par: Parallelism,
) -> Result<SweepResult, CliError> {
    let grid = spec.points();
    let mut points = Vec::with_capacity(grid.len());
    let mut tasks = Vec::new();
    let mut k = 0;
    for (index, &(beta, x, y)) in grid.iter().enumerate() {
        let cfg = Config::from_table(&spec.point_table(beta, x, y)?)?;
        let sc = cfg.scenario_config_unchecked(graph)?;
        k = sc.candidates;
        let mut point = PointResult {
            index,
            beta,
            axis1: x,
            axis2: y,
            skipped: None,
            fractions: Vec::new(),
            min: Vec::new(),
            max: Vec::new(),
            winner: None,
            replicas: 0,
            undecided: 0,
            events: Vec::new(),
            early_stopped: 0,
        };
        match sc.validate(graph) {
            Ok(_) => {}
            Err(Error::Parameter {
                key: "block_seed_fractions",
                reason,
            }) => point.skipped = Some(format!("infeasible: {reason}")),
            Err(Error::Placement(reason)) => point.skipped = Some(format!("infeasible: {reason}")),
            Err(e) => return Err(e.into()),
        }
        if point.skipped.is_none() {
            let state = init_scenario(graph, &sc)?;
            point.undecided = (0..graph.node_count())
                .filter(|&u| !state.is_seeded(u))
                .count();
            if point.undecided == 0 {
                point.skipped = Some("no undecided voters".into());
            }
        }
        if point.skipped.is_none() {
            for r in 0..spec.replicas {
                let mut cfg = sc.clone();
                cfg.rng_seed = replica_seed(spec.master_seed, index, r);
                tasks.push(Task { point: index, cfg });
            }
        }
        points.push(point);
    }

    let run = |t: &Task| -> Result<Outcome, CliError> {
        let res = Simulator::new(graph, t.cfg.clone())?.run()?;
        Ok(Outcome {
            votes: res.votes,
            undecided: res.undecided_count,
            events: res.event_count,
            early_stopped: res.early_stopped,
        })
    };
    let outcomes: Vec<Outcome> = match par {
        Parallelism::Serial => tasks.iter().map(run).collect::<Result<_, _>>()?,
        Parallelism::Threads(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            pool.install(|| tasks.par_iter().map(run).collect::<Result<_, _>>())?
        }
    };

    for (task, out) in tasks.iter().zip(&outcomes) {
        let p = &mut points[task.point];
        let fr: Vec<f64> = out
            .votes
            .iter()
            .map(|&v| v as f64 / out.undecided as f64)
            .collect();
        if p.replicas == 0 {
            p.fractions = vec![0.0; fr.len()];
            p.min = fr.clone();
            p.max = fr.clone();
        }
        for c in 0..fr.len() {
            p.fractions[c] += fr[c];
            p.min[c] = p.min[c].min(fr[c]);
            p.max[c] = p.max[c].max(fr[c]);
        }
        p.replicas += 1;
        p.events.push(out.events);
        p.early_stopped += out.early_stopped as usize;
    }
    for p in &mut points {
        if p.replicas > 0 {
            p.fractions.iter_mut().for_each(|f| *f /= p.replicas as f64);
            p.winner = Some(argmax(&p.fractions) + 1);
        }
        match &p.skipped {
            Some(why) => info!(
                "point {} beta={} {}={}: skipped ({why})",
                p.index, p.beta, spec.axis1.name, p.axis1
            ),
            None => info!(
                "point {} beta={} {}={}{}: fractions {:?}",
                p.index,
                p.beta,
                spec.axis1.name,
                p.axis1,
                p.axis2
                    .map(|y| format!(" {}={y}", spec.axis2.as_ref().unwrap().name))
                    .unwrap_or_default(),
                p.fractions
            ),
        }
    }
    if points.iter().all(|p| p.skipped.is_some()) {
        warn!("every grid point was skipped; the output has no data rows");
    }

    let theory = theory_overlay(spec)?;
    let measured = spec
        .betas
        .iter()
        .map(|&beta| MeasuredThreshold {
            beta,
            threshold: if spec.axis2.is_some() {
                None
            } else {
                points
                    .iter()
                    .filter(|p| p.beta == beta && p.skipped.is_none())
                    .find(|p| {
                        p.fractions.get(spec.candidate).copied().unwrap_or(0.0)
                            >= spec.success_fraction
                    })
                    .map(|p| p.axis1)
            },
            uncertainty: spec.axis1.step(),
        })
        .collect();

    Ok(SweepResult {
        candidates: k,
        candidate: spec.candidate + 1,
        axis1: spec.axis1.name.clone(),
        axis2: spec.axis2.as_ref().map(|a| a.name.clone()),
        replicas: spec.replicas,
        master_seed: spec.master_seed,
        points,
        theory,
        measured,
    })
}

/// Mean-field threshold per `beta`, when axis 1 seeds the last block of a
/// block-model configuration.
fn theory_overlay(spec: &SweepSpec) -> Result<Vec<TheoryPoint>, CliError> {
    let cfg = Config::from_table(&spec.base)?;
    let Some(params) = cfg.params()? else {
        return Ok(Vec::new());
    };
    let target = Axis {
        key: spec.axis1.key.clone(),
        name: None,
        values: None,
        start: None,
        stop: None,
        step: None,
    }
    .seed_target();
    let Some((block, cand)) = target.filter(|(b, _)| *b == params.block_count()) else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for &beta in &spec.betas {
        let mut t = spec.base.clone();
        set_path(&mut t, "scenario.beta", Value::Float(beta))?;
        // the solved candidate's own fraction is the unknown
        set_path(
            &mut t,
            &format!("scenario.block_seed_fractions.{block}.{cand}"),
            Value::Float(0.0),
        )?;
        let sc = match Config::from_table(&t)?.meanfield() {
            Ok(sc) => sc,
            Err(e) => {
                warn!("no theory overlay: {e}");
                return Ok(Vec::new());
            }
        };
        let r = percolation_threshold(&sc, cand - 1, None)?;
        out.push(TheoryPoint {
            beta,
            threshold: r.threshold,
            feasible: r.feasible,
            condition_holds: r.condition_holds,
        });
    }
    Ok(out)
}

impl SweepResult {
    pub fn table(&self) -> CsvTable {
        let fracs = (1..=self.candidates).map(|c| format!("frac_{c}"));
        match &self.axis2 {
            None => {
                let mut header = vec![self.axis1.clone(), "beta".into()];
                header.extend(fracs);
                header.push("theory_threshold".into());
                let mut t = CsvTable::new(header);
                for p in self.points.iter().filter(|p| p.skipped.is_none()) {
                    let theory = self
                        .theory
                        .iter()
                        .find(|th| th.beta == p.beta)
                        .and_then(|th| th.threshold)
                        .map(fmt_f64)
                        .unwrap_or_default();
                    let mut row = vec![fmt_f64(p.axis1), fmt_f64(p.beta)];
                    row.extend(p.fractions.iter().map(|f| fmt_f64(*f)));
                    row.push(theory);
                    t.push(row);
                }
                t
            }
            Some(axis2) => {
                let mut header = vec![
                    self.axis1.clone(),
                    axis2.clone(),
                    "beta".into(),
                    "winner".into(),
                ];
                header.extend(fracs);
                let mut t = CsvTable::new(header);
                for p in self.points.iter().filter(|p| p.skipped.is_none()) {
                    let mut row = vec![
                        fmt_f64(p.axis1),
                        fmt_f64(p.axis2.unwrap_or(f64::NAN)),
                        fmt_f64(p.beta),
                        p.winner.map(|w| w.to_string()).unwrap_or_default(),
                    ];
                    row.extend(p.fractions.iter().map(|f| fmt_f64(*f)));
                    t.push(row);
                }
                t
            }
        }
    }

    /// Writes the CSV table and a JSON summary next to it.
    pub fn write(&self, csv_path: &Path) -> Result<(), CliError> {
        self.table().write(csv_path)?;
        crate::output::write_json(&summary_path(csv_path), self)
    }
}

pub fn summary_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("json")
}
