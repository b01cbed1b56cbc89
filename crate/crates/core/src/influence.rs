//! Generalized-modularity influence and the combined-influence query.
//!
//! The influence of `w` on `u` is
//!
//! ```text
//! q(u, w) = a(u, w) / 2m - beta * (k_u / 2m) * (k_w / 2m)
//! ```
//!
//! and the combined influence on `u` for candidate `k` is
//! `z(u, k) = sum_{w != u} q(w, u) * h(w, k)`. Nothing `n x n` is ever
//! materialized: with `S_k = sum_w k_w h(w, k)` maintained incrementally,
//!
//! ```text
//! z(u, k) = (1 / 2m) * sum_{w in N(u)} h(w, k) - beta * k_u / (2m)^2 * (S_k - k_u h(u, k))
//! ```
//!
//! which costs `O(deg(u) * K)` per query.

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Tolerance for a row to count as a probability vector.
pub const PROBABILITY_TOL: f64 = 1e-9;

/// Relative drift of the aggregates that a rebuild tolerates before
/// reporting [`Error::StaleAggregates`].
pub const AGGREGATE_DRIFT_TOL: f64 = 1e-6;

/// An influence model over a sampled graph: pairwise weights `q(u, w)` plus
/// the per-node mass used to aggregate preferences for the long-range term.
///
/// Only uniform edge sampling ([`InfluenceModel`]) is implemented.
pub trait Influence {
    fn node_count(&self) -> usize;

    /// `q(u, w)`; undefined for `u == w`.
    fn weight(&self, u: usize, w: usize) -> Result<f64>;

    /// Degree-like mass of `u` accumulated into [`PreferenceState`] aggregates.
    fn mass(&self, u: usize) -> f64;

    /// Writes `z(u, k)` for every candidate into `out`.
    fn combined_influence_into(&self, state: &PreferenceState, u: usize, out: &mut [f64]);

    fn combined_influence(&self, state: &PreferenceState, u: usize) -> Vec<f64> {
        let mut z = vec![0.0; state.candidates()];
        self.combined_influence_into(state, u, &mut z);
        z
    }
}

/// Generalized modularity under uniform edge sampling.
#[derive(Debug, Clone, Copy)]
pub struct InfluenceModel<'g> {
    graph: &'g Graph,
    beta: f64,
    two_m: f64,
}

impl<'g> InfluenceModel<'g> {
    pub fn new(graph: &'g Graph, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::param(
                "beta",
                format!("{beta} must be finite and >= 0"),
            ));
        }
        let two_m = graph.degree_sum();
        if two_m == 0 {
            return Err(Error::Degenerate("graph has no edges".into()));
        }
        Ok(InfluenceModel {
            graph,
            beta,
            two_m: two_m as f64,
        })
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn two_m(&self) -> f64 {
        self.two_m
    }

    /// A state whose masses are this graph's degrees.
    pub fn new_state(
        &self,
        candidates: usize,
        rows: Vec<f64>,
        seeded: Vec<Option<usize>>,
    ) -> Result<PreferenceState> {
        PreferenceState::new(self.graph.degrees(), candidates, rows, seeded)
    }

    fn check_node(&self, u: usize) -> Result<()> {
        let n = self.graph.node_count();
        if u >= n {
            return Err(Error::NodeOutOfRange { node: u, n });
        }
        Ok(())
    }

    /// Reference `O(n K)` evaluation of `z(u, ·)` straight from the pairwise
    /// weights, summing `w` in ascending order.
    pub fn dense_combined_influence(&self, state: &PreferenceState, u: usize) -> Vec<f64> {
        let k = state.candidates();
        let mut z = vec![0.0; k];
        for w in (0..self.graph.node_count()).filter(|&w| w != u) {
            let q = self.weight(w, u).expect("w != u");
            for (zk, hk) in z.iter_mut().zip(state.row(w)) {
                *zk += q * hk;
            }
        }
        z
    }
}

impl Influence for InfluenceModel<'_> {
    fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    fn weight(&self, u: usize, w: usize) -> Result<f64> {
        self.check_node(u)?;
        self.check_node(w)?;
        if u == w {
            return Err(Error::SelfInfluence(u));
        }
        let a = if self.graph.has_edge(u, w) { 1.0 } else { 0.0 };
        // integer product first, so the weight is exactly symmetric
        let kk = (self.graph.degree(u) * self.graph.degree(w)) as f64;
        Ok(a / self.two_m - self.beta * kk / (self.two_m * self.two_m))
    }

    fn mass(&self, u: usize) -> f64 {
        self.graph.degree(u) as f64
    }

    fn combined_influence_into(&self, state: &PreferenceState, u: usize, out: &mut [f64]) {
        let k = state.candidates();
        debug_assert_eq!(out.len(), k);
        out.fill(0.0);
        for &w in self.graph.neighbors(u) {
            for (o, h) in out.iter_mut().zip(state.row(w as usize)) {
                *o += h;
            }
        }
        let ku = self.graph.degree(u) as f64;
        let long_range = self.beta * ku / (self.two_m * self.two_m);
        let own = state.row(u);
        for c in 0..k {
            out[c] = out[c] / self.two_m - long_range * (state.aggregate(c) - ku * own[c]);
        }
    }
}

/// Per-voter preference probability vectors with degree-weighted aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceState {
    candidates: usize,
    /// Row-major `n x K`.
    h: Vec<f64>,
    seeded: Vec<Option<usize>>,
    masses: Vec<f64>,
    aggregates: Vec<f64>,
    updates_since_rebuild: u64,
    rebuild_every: u64,
}

pub(crate) fn check_probability(row: &[f64]) -> Result<()> {
    if let Some(x) = row.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::NotProbability(format!(
            "entry {x} is negative or not finite"
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_TOL {
        return Err(Error::NotProbability(format!("entries sum to {sum}")));
    }
    Ok(())
}

impl PreferenceState {
    /// `rows` is row-major `n x K`; seeded rows must be one-hot on their
    /// candidate. Rebuild interval defaults to `10 n` updates.
    pub fn new(
        degrees: Vec<usize>,
        candidates: usize,
        rows: Vec<f64>,
        seeded: Vec<Option<usize>>,
    ) -> Result<Self> {
        let n = degrees.len();
        if candidates == 0 {
            return Err(Error::param("candidates", "need at least one candidate"));
        }
        if rows.len() != n * candidates || seeded.len() != n {
            return Err(Error::param(
                "rows",
                "state dimensions do not match the graph",
            ));
        }
        for u in 0..n {
            let row = &rows[u * candidates..(u + 1) * candidates];
            check_probability(row)?;
            if let Some(c) = seeded[u] {
                if c >= candidates
                    || row
                        .iter()
                        .enumerate()
                        .any(|(k, &x)| x != (k == c) as u8 as f64)
                {
                    return Err(Error::NotProbability(format!(
                        "seeded voter {u} must be one-hot on candidate {c}"
                    )));
                }
            }
        }
        let mut state = PreferenceState {
            candidates,
            h: rows,
            seeded,
            masses: degrees.into_iter().map(|d| d as f64).collect(),
            aggregates: vec![0.0; candidates],
            updates_since_rebuild: 0,
            rebuild_every: (10 * n as u64).max(1),
        };
        state.aggregates = state.exact_aggregates();
        Ok(state)
    }

    pub fn with_rebuild_interval(mut self, every: u64) -> Self {
        self.rebuild_every = every.max(1);
        self
    }

    pub fn candidates(&self) -> usize {
        self.candidates
    }

    pub fn voter_count(&self) -> usize {
        self.seeded.len()
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.h[u * self.candidates..(u + 1) * self.candidates]
    }

    pub fn rows(&self) -> &[f64] {
        &self.h
    }

    pub fn seeded_candidate(&self, u: usize) -> Option<usize> {
        self.seeded[u]
    }

    pub fn is_seeded(&self, u: usize) -> bool {
        self.seeded[u].is_some()
    }

    /// `S_k = sum_w k_w h(w, k)`.
    pub fn aggregate(&self, k: usize) -> f64 {
        self.aggregates[k]
    }

    pub fn aggregates(&self) -> &[f64] {
        &self.aggregates
    }

    pub fn exact_aggregates(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.candidates];
        for (u, &mass) in self.masses.iter().enumerate() {
            for (sk, hk) in s.iter_mut().zip(self.row(u)) {
                *sk += mass * hk;
            }
        }
        s
    }

    /// Replaces `S` by an exact recomputation. Fails if the maintained values
    /// had drifted past [`AGGREGATE_DRIFT_TOL`] (relative to `max |S|`).
    pub fn rebuild_aggregates(&mut self) -> Result<()> {
        let exact = self.exact_aggregates();
        let drift = max_abs_diff(&exact, &self.aggregates);
        let scale = exact.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        self.aggregates = exact;
        self.updates_since_rebuild = 0;
        if drift > AGGREGATE_DRIFT_TOL * scale {
            return Err(Error::StaleAggregates {
                drift,
                tolerance: AGGREGATE_DRIFT_TOL * scale,
            });
        }
        Ok(())
    }

    /// Replaces the PPV of undecided voter `u` and updates the aggregates.
    pub fn apply_preference_change(&mut self, u: usize, new_row: &[f64]) -> Result<()> {
        if u >= self.voter_count() {
            return Err(Error::NodeOutOfRange {
                node: u,
                n: self.voter_count(),
            });
        }
        if self.is_seeded(u) {
            return Err(Error::SeededVoter(u));
        }
        if new_row.len() != self.candidates {
            return Err(Error::NotProbability(format!(
                "expected {} entries, got {}",
                self.candidates,
                new_row.len()
            )));
        }
        check_probability(new_row)?;
        let mass = self.masses[u];
        let k = self.candidates;
        let row = &mut self.h[u * k..(u + 1) * k];
        for c in 0..k {
            self.aggregates[c] += mass * (new_row[c] - row[c]);
        }
        row.copy_from_slice(new_row);
        self.updates_since_rebuild += 1;
        if self.updates_since_rebuild >= self.rebuild_every {
            self.rebuild_aggregates()?;
        }
        Ok(())
    }

    /// Sets `u`'s row to the one-hot vector of its argmax (lowest index on
    /// ties). Used only for final hardening; aggregates are rebuilt.
    pub(crate) fn harden(&mut self) {
        let k = self.candidates;
        for u in 0..self.voter_count() {
            let winner = argmax(self.row(u));
            let row = &mut self.h[u * k..(u + 1) * k];
            row.fill(0.0);
            row[winner] = 1.0;
        }
        self.aggregates = self.exact_aggregates();
        self.updates_since_rebuild = 0;
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_sbm, BlockModelParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_edge() -> Graph {
        Graph::from_edges(vec![0, 0], 1, [(0, 1)]).unwrap()
    }

    #[test]
    fn weight_examples() {
        let g = single_edge();
        let m = InfluenceModel::new(&g, 1.0).unwrap();
        assert_eq!(m.weight(0, 1).unwrap(), 0.25);
        assert_eq!(m.weight(0, 0), Err(Error::SelfInfluence(0)));

        let m0 = InfluenceModel::new(&g, 0.0).unwrap();
        assert_eq!(m0.weight(1, 0).unwrap(), 1.0 / 2.0);

        // C4: every degree 2, m = 4; 0 and 2 are not adjacent
        let c4 = Graph::from_edges(vec![0; 4], 1, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let m = InfluenceModel::new(&c4, 1.0).unwrap();
        assert_eq!(m.weight(0, 2).unwrap(), -0.0625);
        assert_eq!(m.weight(0, 1).unwrap(), 1.0 / 8.0 - 0.0625);
    }

    #[test]
    fn invalid_models() {
        let g = single_edge();
        assert!(InfluenceModel::new(&g, -0.1).is_err());
        let empty = Graph::from_edges(vec![0, 0], 1, std::iter::empty()).unwrap();
        assert!(matches!(
            InfluenceModel::new(&empty, 0.5),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn combined_influence_on_single_edge() {
        let g = single_edge();
        let m = InfluenceModel::new(&g, 1.0).unwrap();
        let state = m
            .new_state(2, vec![0.5, 0.5, 1.0, 0.0], vec![None, Some(0)])
            .unwrap();
        let z = m.combined_influence(&state, 0);
        assert_eq!(z, vec![0.25, 0.0]);
        assert_eq!(m.dense_combined_influence(&state, 0), vec![0.25, 0.0]);
    }

    #[test]
    fn uniform_preferences_without_long_range_term() {
        let params = BlockModelParams::new(40, 0.3, 0.1, vec![0.5, 0.5]).unwrap();
        let g = generate_sbm(&params, 5).unwrap();
        let m = InfluenceModel::new(&g, 0.0).unwrap();
        let k = 4;
        let state = m.new_state(k, vec![0.25; 40 * k], vec![None; 40]).unwrap();
        for u in 0..40 {
            let expected = g.degree(u) as f64 / (m.two_m() * k as f64);
            for z in m.combined_influence(&state, u) {
                assert!((z - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn aggregate_update_arithmetic() {
        // star with center 0 of degree 3
        let g = Graph::from_edges(vec![0; 4], 1, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let m = InfluenceModel::new(&g, 1.0).unwrap();
        let mut state = m.new_state(2, vec![0.5; 8], vec![None; 4]).unwrap();
        let before = state.aggregates().to_vec();
        state.apply_preference_change(0, &[0.5, 0.5]).unwrap();
        assert_eq!(state.aggregates(), &before[..]);
        state.apply_preference_change(0, &[0.9, 0.1]).unwrap();
        assert!((state.aggregate(0) - before[0] - 1.2).abs() < 1e-12);
        assert!((state.aggregate(1) - before[1] + 1.2).abs() < 1e-12);
    }

    #[test]
    fn mutation_errors() {
        let g = single_edge();
        let m = InfluenceModel::new(&g, 1.0).unwrap();
        let mut state = m
            .new_state(2, vec![0.5, 0.5, 1.0, 0.0], vec![None, Some(0)])
            .unwrap();
        assert_eq!(
            state.apply_preference_change(1, &[0.5, 0.5]),
            Err(Error::SeededVoter(1))
        );
        assert!(matches!(
            state.apply_preference_change(0, &[0.7, 0.7]),
            Err(Error::NotProbability(_))
        ));
        assert!(matches!(
            state.apply_preference_change(0, &[1.2, -0.2]),
            Err(Error::NotProbability(_))
        ));
        // seeded rows must be one-hot
        assert!(m
            .new_state(2, vec![0.5, 0.5, 0.5, 0.5], vec![None, Some(0)])
            .is_err());
    }

    #[test]
    fn drift_after_many_updates_is_bounded() {
        let params = BlockModelParams::new(200, 0.2, 0.05, vec![0.5, 0.5]).unwrap();
        let g = generate_sbm(&params, 9).unwrap();
        let m = InfluenceModel::new(&g, 0.8).unwrap();
        let k = 3;
        let mut state = m
            .new_state(k, vec![1.0 / 3.0; 200 * k], vec![None; 200])
            .unwrap()
            .with_rebuild_interval(u64::MAX);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let u = rng.random_range(0..200);
            let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            let row: Vec<f64> = raw.iter().map(|x| x / total).collect();
            state.apply_preference_change(u, &row).unwrap();
        }
        let exact = state.exact_aggregates();
        let scale = exact.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        assert!(max_abs_diff(&exact, state.aggregates()) <= 1e-8 * scale);
        state.rebuild_aggregates().unwrap();
        assert_eq!(state.aggregates(), &exact[..]);
    }

    #[test]
    fn periodic_rebuild_triggers() {
        let g = single_edge();
        let m = InfluenceModel::new(&g, 1.0).unwrap();
        let mut state = m
            .new_state(2, vec![0.5; 4], vec![None; 2])
            .unwrap()
            .with_rebuild_interval(2);
        state.apply_preference_change(0, &[0.3, 0.7]).unwrap();
        assert_eq!(state.updates_since_rebuild, 1);
        state.apply_preference_change(1, &[0.6, 0.4]).unwrap();
        assert_eq!(state.updates_since_rebuild, 0);
        assert_eq!(state.aggregates(), &state.exact_aggregates()[..]);
    }

    #[test]
    fn stale_aggregates_are_detected_on_rebuild() {
        let g = single_edge();
        let m = InfluenceModel::new(&g, 1.0).unwrap();
        let mut state = m.new_state(2, vec![0.5; 4], vec![None; 2]).unwrap();
        state.aggregates[0] += 0.5;
        assert!(matches!(
            state.rebuild_aggregates(),
            Err(Error::StaleAggregates { .. })
        ));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }
}
