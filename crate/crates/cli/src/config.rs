//! Layered TOML configuration.
//!
//! Layers apply in order: a named preset, a config file, then `key=value`
//! overrides. Keys are dotted paths (`scenario.theta = 20`). Blocks and
//! candidates are numbered from 1, so seeding 25% of `n` for candidate 1 in
//! block 3 reads `scenario.block_seed_fractions.3.1 = 0.25`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use percolate::{
    BlockModelParams, EarlyStop, Graph, MeanFieldScenario, ScenarioConfig, SeedFraction,
    WholeBlockSeed,
};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

pub const PRESETS: &[(&str, &str)] = &[
    ("one-eager", include_str!("../presets/one-eager.toml")),
    (
        "two-competing",
        include_str!("../presets/two-competing.toml"),
    ),
    ("polblogs", include_str!("../presets/polblogs.toml")),
];

pub fn preset(name: &str) -> Result<Table, CliError> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        CliError::Usage(format!(
            "unknown preset {name:?}; known: {}",
            names.join(", ")
        ))
    })?;
    Ok(text.parse().expect("embedded presets parse"))
}

/// Deep-merges `over` into `base`; tables merge, everything else replaces.
pub fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Sets a dotted key, creating intermediate tables.
pub fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("malformed key {key:?}")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => {
                return Err(CliError::Usage(format!(
                    "key {key:?} crosses a non-table value at {p:?}"
                )))
            }
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn get_path<'a>(table: &'a Table, key: &str) -> Option<&'a Value> {
    let mut parts = key.split('.');
    let mut cur = table.get(parts.next()?)?;
    for p in parts {
        cur = cur.as_table()?.get(p)?;
    }
    Some(cur)
}

/// Parses `key=value`; the value is read as a TOML value, falling back to a
/// bare string.
pub fn parse_override(text: &str) -> Result<(String, Value), CliError> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override {text:?} is not key=value")))?;
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.trim().to_string(), value))
}

/// A number for a dotted key, typed like the value it replaces.
pub fn numeric_value(table: &Table, key: &str, x: f64) -> Value {
    match get_path(table, key) {
        Some(Value::Integer(_)) if x.fract() == 0.0 => Value::Integer(x as i64),
        _ => Value::Float(x),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub graph: GraphSection,
    pub scenario: ScenarioSection,
    pub threshold: ThresholdSection,
    pub trajectory: TrajectorySection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub n: Option<usize>,
    pub p_in: Option<f64>,
    pub p_out: Option<f64>,
    pub rho: Option<Vec<f64>>,
    pub seed: u64,
    /// Graph file to load instead of generating one.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub candidates: Option<usize>,
    pub beta: Option<f64>,
    pub theta: Option<f64>,
    pub end_time: f64,
    pub initial_ppv: Option<Vec<f64>>,
    pub rng_seed: u64,
    /// block -> candidate. Absent means block `k` seeds candidate `k` for
    /// every non-empty block but the last.
    pub whole_block_seeds: Option<BTreeMap<String, usize>>,
    /// block -> candidate -> fraction of `n`.
    pub block_seed_fractions: BTreeMap<String, BTreeMap<String, f64>>,
    pub early_stop: bool,
    pub early_stop_tolerance: f64,
    pub early_stop_window: Option<u64>,
    pub trajectory_stride: Option<u64>,
    pub rebuild_every: Option<u64>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            candidates: None,
            beta: None,
            theta: None,
            end_time: 1e6,
            initial_ppv: None,
            rng_seed: 0,
            whole_block_seeds: None,
            block_seed_fractions: BTreeMap::new(),
            early_stop: true,
            early_stop_tolerance: 1e-6,
            early_stop_window: None,
            trajectory_stride: None,
            rebuild_every: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    pub candidate: usize,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        ThresholdSection { candidate: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySection {
    pub max_iters: usize,
    pub eps: f64,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        TrajectorySection {
            max_iters: 100_000,
            eps: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis1: Option<Axis>,
    pub axis2: Option<Axis>,
    pub betas: Option<Vec<f64>>,
    pub replicas: usize,
    pub master_seed: u64,
    /// 1-based candidate whose threshold is measured; defaults to the
    /// candidate of `axis1`.
    pub candidate: Option<usize>,
    pub success_fraction: f64,
    pub output: Option<PathBuf>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            axis1: None,
            axis2: None,
            betas: None,
            replicas: 1,
            master_seed: 0,
            candidate: None,
            success_fraction: 0.99,
            output: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted config key the grid value is written to.
    pub key: String,
    /// CSV column name.
    pub name: Option<String>,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
}

impl Axis {
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let grid = match (&self.values, self.start, self.stop, self.step) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(start), Some(stop), Some(step)) => {
                if !(step > 0.0) || stop < start {
                    return Err(CliError::Usage(format!(
                        "axis {}: need step > 0 and stop >= start",
                        self.key
                    )));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..count)
                    .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                    .collect()
            }
            _ => {
                return Err(CliError::Usage(format!(
                    "axis {}: give either values or start, stop and step",
                    self.key
                )))
            }
        };
        if grid.is_empty() {
            return Err(CliError::Usage(format!("axis {}: empty grid", self.key)));
        }
        Ok(grid)
    }

    /// `(block, candidate)`, both 1-based, when the key is a seed fraction.
    pub fn seed_target(&self) -> Option<(usize, usize)> {
        let rest = self.key.strip_prefix("scenario.block_seed_fractions.")?;
        let (b, c) = rest.split_once('.')?;
        Some((b.parse().ok()?, c.parse().ok()?))
    }
}

fn missing(key: &str) -> CliError {
    CliError::Usage(format!("missing required key {key}"))
}

fn one_based(key: &str, raw: &str, limit: usize, what: &str) -> Result<usize, CliError> {
    match raw.parse::<usize>() {
        Ok(i) if (1..=limit).contains(&i) => Ok(i - 1),
        _ => Err(CliError::Usage(format!(
            "{key}: {what} {raw:?} is not in 1..={limit}"
        ))),
    }
}

impl Config {
    pub fn from_table(table: &Table) -> Result<Config, CliError> {
        Config::deserialize(Value::Table(table.clone()))
            .map_err(|e| CliError::Usage(format!("configuration: {}", e.to_string().trim())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Block-model parameters, when all four are given.
    pub fn params(&self) -> Result<Option<BlockModelParams>, CliError> {
        let g = &self.graph;
        let given = [
            g.n.is_some(),
            g.p_in.is_some(),
            g.p_out.is_some(),
            g.rho.is_some(),
        ];
        if given.iter().all(|x| !x) {
            return Ok(None);
        }
        let n = g.n.ok_or_else(|| missing("graph.n"))?;
        let p_in = g.p_in.ok_or_else(|| missing("graph.p_in"))?;
        let p_out = g.p_out.ok_or_else(|| missing("graph.p_out"))?;
        let rho = g.rho.clone().ok_or_else(|| missing("graph.rho"))?;
        Ok(Some(BlockModelParams::new(n, p_in, p_out, rho)?))
    }

    pub fn require_params(&self) -> Result<BlockModelParams, CliError> {
        self.params()?.ok_or_else(|| missing("graph.n"))
    }

    pub fn beta(&self) -> Result<f64, CliError> {
        self.scenario.beta.ok_or_else(|| missing("scenario.beta"))
    }

    pub fn theta(&self) -> Result<f64, CliError> {
        self.scenario.theta.ok_or_else(|| missing("scenario.theta"))
    }

    fn candidates_for(&self, blocks: usize) -> usize {
        self.scenario
            .candidates
            .or_else(|| self.scenario.initial_ppv.as_ref().map(Vec::len))
            .unwrap_or(blocks.saturating_sub(1))
    }

    fn initial_ppv(&self, k: usize) -> Vec<f64> {
        self.scenario
            .initial_ppv
            .clone()
            .unwrap_or_else(|| vec![1.0 / k as f64; k])
    }

    /// Simulation configuration for graph `g`, with 0-based indices.
    pub fn scenario_config(&self, g: &Graph) -> Result<ScenarioConfig, CliError> {
        let cfg = self.scenario_config_unchecked(g)?;
        cfg.validate(g)?;
        Ok(cfg)
    }

    /// As [`Config::scenario_config`], without checking seed capacities.
    pub fn scenario_config_unchecked(&self, g: &Graph) -> Result<ScenarioConfig, CliError> {
        let b = g.block_count();
        let k = self.candidates_for(b);
        if k == 0 {
            return Err(missing("scenario.candidates"));
        }
        let sizes = g.block_sizes();
        let whole_block_seeds = match &self.scenario.whole_block_seeds {
            None => (0..b.saturating_sub(1).min(k))
                .filter(|&blk| sizes[blk] > 0)
                .map(|blk| WholeBlockSeed {
                    block: blk,
                    candidate: blk,
                })
                .collect(),
            Some(map) => map
                .iter()
                .map(|(blk, &c)| {
                    let key = "whole_block_seeds";
                    Ok(WholeBlockSeed {
                        block: one_based(key, blk, b, "block")?,
                        candidate: one_based(key, &c.to_string(), k, "candidate")?,
                    })
                })
                .collect::<Result<_, CliError>>()?,
        };
        let mut block_seed_fractions = Vec::new();
        for (blk, per) in &self.scenario.block_seed_fractions {
            let key = "block_seed_fractions";
            let block = one_based(key, blk, b, "block")?;
            for (c, &fraction) in per {
                block_seed_fractions.push(SeedFraction {
                    block,
                    candidate: one_based(key, c, k, "candidate")?,
                    fraction,
                });
            }
        }
        let s = &self.scenario;
        let cfg = ScenarioConfig {
            candidates: k,
            beta: self.beta()?,
            theta: self.theta()?,
            end_time: s.end_time,
            initial_ppv: self.initial_ppv(k),
            block_seed_fractions,
            whole_block_seeds,
            rng_seed: s.rng_seed,
            early_stop: s.early_stop.then_some(EarlyStop {
                tolerance: s.early_stop_tolerance,
                window: s.early_stop_window,
            }),
            trajectory_stride: s.trajectory_stride,
            rebuild_every: s.rebuild_every,
        };
        Ok(cfg)
    }

    /// Mean-field scenario: candidate `k` owns block `k` and every
    /// undecided voter sits in the last block.
    pub fn meanfield(&self) -> Result<MeanFieldScenario, CliError> {
        let params = self.require_params()?;
        let b = params.block_count();
        if b < 2 {
            return Err(CliError::Usage(
                "graph.rho: mean field needs at least two blocks".into(),
            ));
        }
        let k = b - 1;
        if self.candidates_for(b) != k {
            return Err(CliError::Usage(format!(
                "scenario.candidates: mean field needs one candidate per block but the last ({k})"
            )));
        }
        if let Some(map) = &self.scenario.whole_block_seeds {
            let conventional = map
                .iter()
                .all(|(blk, &c)| blk.parse::<usize>().ok() == Some(c) && c <= k);
            if !conventional {
                return Err(CliError::Usage(
                    "whole_block_seeds: mean field requires block k to seed candidate k".into(),
                ));
            }
        }
        let mut seed_fractions = vec![0.0; k];
        for (blk, per) in &self.scenario.block_seed_fractions {
            let block = one_based("block_seed_fractions", blk, b, "block")?;
            for (c, &f) in per {
                let c = one_based("block_seed_fractions", c, k, "candidate")?;
                if block != k && f != 0.0 {
                    return Err(CliError::Usage(format!(
                        "block_seed_fractions: mean field places seeds only in block {b}"
                    )));
                }
                if block == k {
                    seed_fractions[c] = f;
                }
            }
        }
        let sc = MeanFieldScenario {
            params,
            beta: self.beta()?,
            theta: self.theta()?,
            seed_fractions,
            initial_h: self.initial_ppv(k),
        };
        sc.validate()?;
        Ok(sc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        for (name, _) in PRESETS {
            let cfg = Config::from_table(&preset(name).unwrap()).unwrap();
            cfg.meanfield().unwrap();
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn override_parsing() {
        assert_eq!(
            parse_override("a.b=0.5").unwrap(),
            ("a.b".into(), Value::Float(0.5))
        );
        assert_eq!(parse_override("a = 3").unwrap().1, Value::Integer(3));
        assert_eq!(
            parse_override("a=x.csv").unwrap().1,
            Value::String("x.csv".into())
        );
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn layering_and_seed_keys() {
        let mut t = preset("one-eager").unwrap();
        let (k, v) = parse_override("scenario.block_seed_fractions.3.1=0.25").unwrap();
        set_path(&mut t, &k, v).unwrap();
        merge(&mut t, "scenario.beta = 0.9".parse().unwrap());
        let cfg = Config::from_table(&t).unwrap();
        let sc = cfg.meanfield().unwrap();
        assert_eq!(sc.seed_fractions, vec![0.25, 0.0]);
        assert_eq!(sc.beta, 0.9);
        assert_eq!(get_path(&t, "graph.n"), Some(&Value::Integer(2000)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let t: Table = "scenario.thetta = 3".parse().unwrap();
        match Config::from_table(&t) {
            Err(CliError::Usage(m)) => assert!(m.contains("thetta"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_fraction_names_key() {
        let mut t = preset("one-eager").unwrap();
        set_path(
            &mut t,
            "scenario.block_seed_fractions.3.1",
            Value::Float(0.6),
        )
        .unwrap();
        let cfg = Config::from_table(&t).unwrap();
        match cfg.meanfield() {
            Err(CliError::Usage(m)) => assert!(m.contains("block_seed_fractions"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn axis_grids() {
        let axis = Axis {
            key: "scenario.block_seed_fractions.3.1".into(),
            name: None,
            values: None,
            start: Some(0.0),
            stop: Some(0.1),
            step: Some(0.02),
        };
        assert_eq!(axis.grid().unwrap(), vec![0.0, 0.02, 0.04, 0.06, 0.08, 0.1]);
        assert_eq!(axis.seed_target(), Some((3, 1)));
    }
}
