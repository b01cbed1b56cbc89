//! Seeded-voter placement and the event-driven softmax opinion dynamics.
//!
//! Every undecided voter carries a rate-1 Poisson clock. The superposition of
//! `N_u` such clocks is a single Poisson process of rate `N_u` whose ticks
//! belong to a uniformly chosen undecided voter, so the simulator draws one
//! exponential gap and one uniform index per event.

use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::influence::{argmax, check_probability, Influence, InfluenceModel, PreferenceState};
use crate::rng::derive_stream;

/// Candidate `candidate` seeds `round(fraction * n)` voters of `block`.
/// Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedFraction {
    pub block: usize,
    pub candidate: usize,
    pub fraction: f64,
}

/// Every voter of `block` is a seeded voter of `candidate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WholeBlockSeed {
    pub block: usize,
    pub candidate: usize,
}

/// Stop once no component of the average undecided PPV moved more than
/// `tolerance` over the last `window` events (default `5 N_u`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub tolerance: f64,
    pub window: Option<u64>,
}

impl Default for EarlyStop {
    fn default() -> Self {
        EarlyStop {
            tolerance: 1e-6,
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub candidates: usize,
    /// Social temperature of the influence model.
    pub beta: f64,
    /// Inverse temperature of the softmax update.
    pub theta: f64,
    /// Simulated ending time.
    pub end_time: f64,
    pub initial_ppv: Vec<f64>,
    pub block_seed_fractions: Vec<SeedFraction>,
    pub whole_block_seeds: Vec<WholeBlockSeed>,
    pub rng_seed: u64,
    pub early_stop: Option<EarlyStop>,
    /// Events between trajectory samples (default `N_u`).
    pub trajectory_stride: Option<u64>,
    /// Updates between exact aggregate rebuilds (default `10 n`).
    pub rebuild_every: Option<u64>,
}

impl ScenarioConfig {
    /// Checks the configuration against `g` and returns the number of seeds
    /// to place per `block_seed_fractions` entry.
    pub fn validate(&self, g: &Graph) -> Result<Vec<usize>> {
        let k = self.candidates;
        if k == 0 {
            return Err(Error::param("candidates", "need at least one candidate"));
        }
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::param("theta", format!("{} must be > 0", self.theta)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::param("beta", format!("{} must be >= 0", self.beta)));
        }
        if !(self.end_time > 0.0) {
            return Err(Error::param(
                "end_time",
                format!("{} must be > 0", self.end_time),
            ));
        }
        if self.initial_ppv.len() != k {
            return Err(Error::param(
                "initial_ppv",
                format!("expected {k} entries, got {}", self.initial_ppv.len()),
            ));
        }
        check_probability(&self.initial_ppv)
            .map_err(|e| Error::param("initial_ppv", e.to_string()))?;
        if let Some(es) = self.early_stop {
            if !(es.tolerance >= 0.0) || es.window == Some(0) {
                return Err(Error::param("early_stop", "tolerance >= 0 and window > 0"));
            }
        }

        let b = g.block_count();
        let sizes = g.block_sizes();
        let n = g.node_count() as f64;
        let mut whole = vec![None; b];
        for s in &self.whole_block_seeds {
            if s.block >= b || s.candidate >= k {
                return Err(Error::param(
                    "whole_block_seeds",
                    format!(
                        "block {} / candidate {} out of range",
                        s.block + 1,
                        s.candidate + 1
                    ),
                ));
            }
            if whole[s.block].replace(s.candidate).is_some() {
                return Err(Error::param(
                    "whole_block_seeds",
                    format!("block {} listed twice", s.block + 1),
                ));
            }
        }

        let mut per_block_fraction = vec![0.0; b];
        let mut per_block_count = vec![0usize; b];
        let mut counts = Vec::with_capacity(self.block_seed_fractions.len());
        for s in &self.block_seed_fractions {
            if s.block >= b || s.candidate >= k {
                return Err(Error::param(
                    "block_seed_fractions",
                    format!(
                        "block {} / candidate {} out of range",
                        s.block + 1,
                        s.candidate + 1
                    ),
                ));
            }
            if !(s.fraction.is_finite() && s.fraction >= 0.0) {
                return Err(Error::param(
                    "block_seed_fractions",
                    format!("fraction {} must be >= 0", s.fraction),
                ));
            }
            if whole[s.block].is_some() && s.fraction > 0.0 {
                return Err(Error::param(
                    "block_seed_fractions",
                    format!("block {} is already fully seeded", s.block + 1),
                ));
            }
            let count = (s.fraction * n).round() as usize;
            per_block_fraction[s.block] += s.fraction;
            per_block_count[s.block] += count;
            counts.push(count);
        }
        for blk in 0..b {
            let capacity = sizes[blk] as f64 / n;
            if per_block_fraction[blk] > capacity + 1e-12 {
                return Err(Error::param(
                    "block_seed_fractions",
                    format!(
                        "seed fractions in block {} sum to {} but the block holds {capacity}",
                        blk + 1,
                        per_block_fraction[blk]
                    ),
                ));
            }
            if per_block_count[blk] > sizes[blk] {
                return Err(Error::Placement(format!(
                    "{} seeds requested in block {} of size {}",
                    per_block_count[blk],
                    blk + 1,
                    sizes[blk]
                )));
            }
        }
        Ok(counts)
    }
}

/// Places seeded voters and sets every other voter to the initial PPV.
///
/// Within a partially seeded block, candidates draw their seeds in the order
/// of `block_seed_fractions`, uniformly without replacement from the voters
/// not yet seeded.
pub fn init_scenario(g: &Graph, cfg: &ScenarioConfig) -> Result<PreferenceState> {
    let counts = cfg.validate(g)?;
    let n = g.node_count();
    let k = cfg.candidates;
    let mut seeded: Vec<Option<usize>> = vec![None; n];
    for s in &cfg.whole_block_seeds {
        for u in g.block_members(s.block) {
            seeded[u] = Some(s.candidate);
        }
    }
    let mut rng = derive_stream(cfg.rng_seed, &[0]);
    let mut free: Vec<Vec<usize>> = (0..g.block_count()).map(|b| g.block_members(b)).collect();
    for (s, &count) in cfg.block_seed_fractions.iter().zip(&counts) {
        if count == 0 {
            continue;
        }
        let pool = &mut free[s.block];
        let mut picked = index::sample(&mut rng, pool.len(), count).into_vec();
        for &i in &picked {
            seeded[pool[i]] = Some(s.candidate);
        }
        picked.sort_unstable_by(|a, b| b.cmp(a));
        for i in picked {
            pool.swap_remove(i);
        }
    }
    let mut rows = Vec::with_capacity(n * k);
    for s in &seeded {
        match s {
            Some(c) => rows.extend((0..k).map(|j| if j == *c { 1.0 } else { 0.0 })),
            None => rows.extend_from_slice(&cfg.initial_ppv),
        }
    }
    let state = PreferenceState::new(g.degrees(), k, rows, seeded)?;
    Ok(match cfg.rebuild_every {
        Some(r) => state.with_rebuild_interval(r),
        None => state,
    })
}

/// One softmax preference update:
/// `h'(k) = exp(theta z(k)) h(k) / sum_l exp(theta z(l)) h(l)`.
///
/// Exponents are shifted by their maximum over the support of `h`, so the
/// largest surviving term is `h_max > 0`.
pub fn softmax_update(h: &[f64], z: &[f64], theta: f64) -> Result<Vec<f64>> {
    if h.len() != z.len() {
        return Err(Error::NotProbability("h and z lengths differ".into()));
    }
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::param("theta", format!("{theta} must be > 0")));
    }
    if h.iter().any(|x| !x.is_finite() || *x < 0.0) || !h.iter().any(|&x| x > 0.0) {
        return Err(Error::NotProbability("h has no positive entry".into()));
    }
    let mut out = vec![0.0; h.len()];
    softmax_update_into(h, z, theta, &mut out);
    Ok(out)
}

pub fn softmax_update_into(h: &[f64], z: &[f64], theta: f64, out: &mut [f64]) {
    let shift = h
        .iter()
        .zip(z)
        .filter(|(hk, _)| **hk > 0.0)
        .map(|(_, zk)| theta * zk)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for ((o, hk), zk) in out.iter_mut().zip(h).zip(z) {
        *o = if *hk > 0.0 {
            (theta * zk - shift).exp() * hk
        } else {
            0.0
        };
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Votes of undecided voters: argmax of each row, lowest index on ties.
pub fn tally_votes(state: &PreferenceState) -> Vec<usize> {
    let mut votes = vec![0; state.candidates()];
    for u in (0..state.voter_count()).filter(|&u| !state.is_seeded(u)) {
        votes[argmax(state.row(u))] += 1;
    }
    votes
}

/// Seeded voters per candidate.
pub fn seeded_counts(state: &PreferenceState) -> Vec<usize> {
    let mut counts = vec![0; state.candidates()];
    for u in 0..state.voter_count() {
        if let Some(c) = state.seeded_candidate(u) {
            counts[c] += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub events: u64,
    /// Average PPV over undecided voters.
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub candidates: usize,
    /// Votes of undecided voters per candidate.
    pub votes: Vec<usize>,
    pub seeded_votes: Vec<usize>,
    pub undecided_count: usize,
    pub event_count: u64,
    pub final_time: f64,
    pub early_stopped: bool,
    pub wall_time_secs: f64,
    pub trajectory: Vec<TrajectoryPoint>,
    /// Hardened one-hot rows, row-major `n x K`.
    #[serde(skip)]
    pub final_h: Vec<f64>,
}

impl SimulationResult {
    /// Fraction of undecided votes per candidate (all zero when nobody was
    /// undecided).
    pub fn vote_fractions(&self) -> Vec<f64> {
        if self.undecided_count == 0 {
            return vec![0.0; self.candidates];
        }
        self.votes
            .iter()
            .map(|&v| v as f64 / self.undecided_count as f64)
            .collect()
    }
}

/// What happened at one clock tick.
#[derive(Debug)]
pub struct UpdateEvent<'a> {
    pub index: u64,
    pub time: f64,
    /// Gap since the previous event.
    pub dt: f64,
    pub voter: usize,
    pub z: &'a [f64],
    pub before: &'a [f64],
    pub after: &'a [f64],
}

/// A single simulation run. Strictly sequential.
pub struct Simulator<'g> {
    model: InfluenceModel<'g>,
    state: PreferenceState,
    undecided: Vec<usize>,
    cfg: ScenarioConfig,
}

impl<'g> Simulator<'g> {
    pub fn new(g: &'g Graph, cfg: ScenarioConfig) -> Result<Self> {
        let state = init_scenario(g, &cfg)?;
        let undecided = (0..g.node_count())
            .filter(|&u| !state.is_seeded(u))
            .collect();
        Simulator::from_state(g, cfg, state, undecided)
    }

    /// Starts from an explicit state. `undecided` fixes the order in which the
    /// uniform voter draw indexes undecided voters; it must list exactly the
    /// unseeded voters.
    pub fn from_state(
        g: &'g Graph,
        cfg: ScenarioConfig,
        state: PreferenceState,
        undecided: Vec<usize>,
    ) -> Result<Self> {
        let mut listed = vec![false; g.node_count()];
        for &u in &undecided {
            if u >= g.node_count() || state.is_seeded(u) || std::mem::replace(&mut listed[u], true)
            {
                return Err(Error::param(
                    "undecided",
                    format!("voter {u} listed wrongly"),
                ));
            }
        }
        if listed.iter().filter(|x| **x).count()
            + (0..g.node_count()).filter(|&u| state.is_seeded(u)).count()
            != g.node_count()
        {
            return Err(Error::param(
                "undecided",
                "not every unseeded voter is listed",
            ));
        }
        let model = InfluenceModel::new(g, cfg.beta)?;
        Ok(Simulator {
            model,
            state,
            undecided,
            cfg,
        })
    }

    pub fn state(&self) -> &PreferenceState {
        &self.state
    }

    pub fn run(self) -> Result<SimulationResult> {
        self.run_with(|_| {})
    }

    /// Runs to completion, calling `observer` after computing every update
    /// and before applying it.
    pub fn run_with(
        mut self,
        mut observer: impl FnMut(&UpdateEvent<'_>),
    ) -> Result<SimulationResult> {
        let started = Instant::now();
        let k = self.cfg.candidates;
        let nu = self.undecided.len();
        let mut result = SimulationResult {
            candidates: k,
            votes: vec![0; k],
            seeded_votes: seeded_counts(&self.state),
            undecided_count: nu,
            event_count: 0,
            final_time: 0.0,
            early_stopped: false,
            wall_time_secs: 0.0,
            trajectory: Vec::new(),
            final_h: Vec::new(),
        };
        if nu == 0 {
            self.state.harden();
            result.final_h = self.state.rows().to_vec();
            result.wall_time_secs = started.elapsed().as_secs_f64();
            return Ok(result);
        }

        let mut rng = derive_stream(self.cfg.rng_seed, &[1]);
        let clock = Exp::new(nu as f64).expect("positive rate");
        let stride = self.cfg.trajectory_stride.unwrap_or(nu as u64).max(1);
        let window = self
            .cfg
            .early_stop
            .map(|es| (es.tolerance, es.window.unwrap_or(5 * nu as u64)));
        let theta = self.cfg.theta;

        let mut z = vec![0.0; k];
        let mut next = vec![0.0; k];
        let mut before = vec![0.0; k];
        let mut time = 0.0;
        let mut events = 0u64;
        let mut checkpoint = self.average_undecided();
        result.trajectory.push(TrajectoryPoint {
            time: 0.0,
            events: 0,
            h: checkpoint.clone(),
        });

        loop {
            let dt = clock.sample(&mut rng);
            if time + dt >= self.cfg.end_time {
                time = self.cfg.end_time;
                break;
            }
            time += dt;
            let u = self.undecided[rng.random_range(0..nu)];
            self.model.combined_influence_into(&self.state, u, &mut z);
            before.copy_from_slice(self.state.row(u));
            softmax_update_into(&before, &z, theta, &mut next);
            let sum: f64 = next.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                next.iter_mut().for_each(|x| *x /= sum);
            }
            observer(&UpdateEvent {
                index: events,
                time,
                dt,
                voter: u,
                z: &z,
                before: &before,
                after: &next,
            });
            self.state.apply_preference_change(u, &next)?;
            events += 1;

            if events % stride == 0 {
                result.trajectory.push(TrajectoryPoint {
                    time,
                    events,
                    h: self.average_undecided(),
                });
            }
            if let Some((tolerance, w)) = window {
                if events % w == 0 {
                    let now = self.average_undecided();
                    let moved = now
                        .iter()
                        .zip(&checkpoint)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    if moved < tolerance {
                        result.early_stopped = true;
                        break;
                    }
                    checkpoint = now;
                }
            }
        }

        if result.trajectory.last().map(|p| p.events) != Some(events) {
            result.trajectory.push(TrajectoryPoint {
                time,
                events,
                h: self.average_undecided(),
            });
        }
        result.votes = tally_votes(&self.state);
        self.state.harden();
        result.final_h = self.state.rows().to_vec();
        result.event_count = events;
        result.final_time = time;
        result.wall_time_secs = started.elapsed().as_secs_f64();
        Ok(result)
    }

    fn average_undecided(&self) -> Vec<f64> {
        let mut avg = vec![0.0; self.cfg.candidates];
        for &u in &self.undecided {
            for (a, h) in avg.iter_mut().zip(self.state.row(u)) {
                *a += h;
            }
        }
        let nu = self.undecided.len() as f64;
        avg.iter_mut().for_each(|a| *a /= nu);
        avg
    }
}

pub fn run_simulation(g: &Graph, cfg: &ScenarioConfig) -> Result<SimulationResult> {
    Simulator::new(g, cfg.clone())?.run()
}
