//! Block-level mean-field theory for stochastic block models.
//!
//! Block `k < b - 1` is entirely seeded for candidate `k` (it may be empty)
//! and every undecided voter lives in the last block, where candidate `k`
//! additionally seeds a fraction `rho_{b,k}` of all `n` voters. With
//! `lambda_k = rho_k p_in + (1 - rho_k) p_out`, `D = sum_l rho_l lambda_l` and
//! `rho_u = rho_b - sum_k rho_{b,k}`, the scaled combined influence on an
//! undecided voter is
//!
//! ```text
//! n z_k ~ (1/D) [ rho_k p_out + (rho_{b,k} + rho_u h_k) p_in
//!                 - beta (rho_k lambda_k lambda_b + (rho_{b,k} + rho_u h_k) lambda_b^2) / D ]
//! ```
//!
//! The common factor `1/D` does not change which candidate is ahead, so
//! thresholds are the same with or without it.

use serde::{Deserialize, Serialize};

use crate::dynamics::{softmax_update_into, ScenarioConfig, SeedFraction, WholeBlockSeed};
use crate::error::{Error, Result};
use crate::graph::BlockModelParams;
use crate::influence::{check_probability, Influence, InfluenceModel, PreferenceState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldScenario {
    pub params: BlockModelParams,
    pub beta: f64,
    pub theta: f64,
    /// `rho_{b,k}` for each of the `b - 1` candidates, as fractions of `n`.
    pub seed_fractions: Vec<f64>,
    /// Initial PPV of undecided voters.
    pub initial_h: Vec<f64>,
}

impl MeanFieldScenario {
    pub fn candidates(&self) -> usize {
        self.params.block_count() - 1
    }

    /// `rho_u`, the fraction of all voters that are undecided.
    pub fn undecided_fraction(&self) -> f64 {
        self.params.rho[self.candidates()] - self.seed_fractions.iter().sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let b = self.params.block_count();
        if b < 2 {
            return Err(Error::param("rho", "mean field needs at least two blocks"));
        }
        let k = b - 1;
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::param("beta", format!("{} must be >= 0", self.beta)));
        }
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::param("theta", format!("{} must be > 0", self.theta)));
        }
        if self.seed_fractions.len() != k || self.initial_h.len() != k {
            return Err(Error::param(
                "block_seed_fractions",
                format!("expected {k} candidate entries"),
            ));
        }
        if self
            .seed_fractions
            .iter()
            .any(|f| !(f.is_finite() && *f >= 0.0))
        {
            return Err(Error::param(
                "block_seed_fractions",
                "fractions must be >= 0",
            ));
        }
        let total: f64 = self.seed_fractions.iter().sum();
        let rho_b = self.params.rho[k];
        if total > rho_b + 1e-12 {
            return Err(Error::param(
                "block_seed_fractions",
                format!("seed fractions sum to {total} but the undecided block holds {rho_b}"),
            ));
        }
        check_probability(&self.initial_h).map_err(|e| Error::param("initial_ppv", e.to_string()))
    }

    /// The matching simulation configuration: block `k` fully seeded for
    /// candidate `k` (when non-empty) and `rho_{b,k}` seeds in the last block.
    pub fn to_scenario_config(&self, rng_seed: u64, end_time: f64) -> ScenarioConfig {
        let k = self.candidates();
        let sizes = self.params.block_sizes().unwrap_or_default();
        ScenarioConfig {
            candidates: k,
            beta: self.beta,
            theta: self.theta,
            end_time,
            initial_ppv: self.initial_h.clone(),
            block_seed_fractions: self
                .seed_fractions
                .iter()
                .enumerate()
                .filter(|(_, f)| **f > 0.0)
                .map(|(c, &fraction)| SeedFraction {
                    block: k,
                    candidate: c,
                    fraction,
                })
                .collect(),
            whole_block_seeds: (0..k)
                .filter(|&c| sizes.get(c).copied().unwrap_or(0) > 0)
                .map(|c| WholeBlockSeed {
                    block: c,
                    candidate: c,
                })
                .collect(),
            rng_seed,
            early_stop: None,
            trajectory_stride: None,
            rebuild_every: None,
        }
    }
}

/// `lambda_k = rho_k p_in + (1 - rho_k) p_out`: the limit of `k_v / n` for a
/// node in block `k`.
pub fn lambda_vector(params: &BlockModelParams) -> Vec<f64> {
    params
        .rho
        .iter()
        .map(|r| r * params.p_in + (1.0 - r) * params.p_out)
        .collect()
}

/// `sum_l rho_l lambda_l`, the limit of `2m / n^2`.
pub fn edge_density(params: &BlockModelParams) -> f64 {
    params
        .rho
        .iter()
        .zip(lambda_vector(params))
        .map(|(r, l)| r * l)
        .sum()
}

struct Terms {
    denom: f64,
    /// `p_in - beta lambda_b^2 / D`
    feedback: f64,
    /// `rho_k p_out - beta rho_k lambda_k lambda_b / D` per candidate.
    base: Vec<f64>,
}

fn terms(sc: &MeanFieldScenario) -> Result<Terms> {
    let p = &sc.params;
    let lambda = lambda_vector(p);
    let denom = edge_density(p);
    if !(denom > 0.0) {
        return Err(Error::Degenerate(
            "edge density is zero; the influence model is undefined".into(),
        ));
    }
    let k = sc.candidates();
    let lb = lambda[k];
    let feedback = p.p_in - sc.beta * lb * lb / denom;
    let base = (0..k)
        .map(|c| p.rho[c] * p.p_out - sc.beta * p.rho[c] * lambda[c] * lb / denom)
        .collect();
    Ok(Terms {
        denom,
        feedback,
        base,
    })
}

/// Scaled mean-field combined influence `n z_k` on an undecided voter whose
/// fellow undecided voters hold average PPV `h`.
pub fn meanfield_z(sc: &MeanFieldScenario, h: &[f64]) -> Result<Vec<f64>> {
    sc.validate()?;
    if h.len() != sc.candidates() {
        return Err(Error::NotProbability(format!(
            "expected {} entries, got {}",
            sc.candidates(),
            h.len()
        )));
    }
    let t = terms(sc)?;
    let rho_u = sc.undecided_fraction();
    Ok((0..sc.candidates())
        .map(|c| (t.base[c] + (sc.seed_fractions[c] + rho_u * h[c]) * t.feedback) / t.denom)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionMargin {
    /// `p_in - beta lambda_b^2 / sum_l rho_l lambda_l`
    pub margin: f64,
    pub holds: bool,
}

/// Whether the average influence between two undecided voters is
/// nonnegative, the condition under which the leading candidate keeps its
/// lead.
pub fn nonnegativity_condition(sc: &MeanFieldScenario) -> Result<ConditionMargin> {
    sc.validate()?;
    let margin = terms(sc)?.feedback;
    Ok(ConditionMargin {
        margin,
        holds: margin >= 0.0,
    })
}

/// `n z_j(x) = slope x + intercept` as a function of the seed fraction `x`
/// of the candidate solving for its threshold. Candidates are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCoefficient {
    pub candidate: usize,
    pub slope: f64,
    pub intercept: f64,
}

/// Threshold solution. Candidate numbers in the report are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    /// Scenario solved, with the `k*` seed fraction zeroed.
    pub scenario: MeanFieldScenario,
    pub k_star: usize,
    /// Minimal `rho_{b,k*}` for which `k*` has the largest mean-field
    /// influence; `None` when no fraction within capacity works.
    pub threshold: Option<f64>,
    pub feasible: bool,
    /// Largest fraction `k*` can place given the rivals' seeds.
    pub capacity: f64,
    pub condition_margin: f64,
    pub condition_holds: bool,
    /// `k*` has the (weakly) largest initial preference.
    pub initially_top: bool,
    /// Both the nonnegativity condition and `initially_top` hold, so winning
    /// the initial influence ordering means winning the undecided block.
    pub assumptions_met: bool,
    pub affine_coefficients: Vec<AffineCoefficient>,
}

const TIE_SLACK: f64 = 1e-14;
const BOUND_SLACK: f64 = 1e-12;

/// Minimal seed fraction `rho_{b,k*}` (0-based `k_star`) making candidate
/// `k_star`'s mean-field influence at the initial PPV at least every rival's.
///
/// `rivals_fixed` holds one seed fraction per candidate; the `k_star` entry is
/// ignored. `None` takes them from `sc.seed_fractions`. Each `z_j` is affine
/// in `rho_{b,k*}`, so the feasible set is an intersection of half-lines,
/// solved exactly.
pub fn percolation_threshold(
    sc: &MeanFieldScenario,
    k_star: usize,
    rivals_fixed: Option<&[f64]>,
) -> Result<ThresholdReport> {
    let k = sc.candidates();
    if k_star >= k {
        return Err(Error::param(
            "k_star",
            format!("candidate {} out of range", k_star + 1),
        ));
    }
    let mut sc = sc.clone();
    if let Some(r) = rivals_fixed {
        if r.len() != k {
            return Err(Error::param(
                "block_seed_fractions",
                format!("expected {k} rival entries, got {}", r.len()),
            ));
        }
        sc.seed_fractions.copy_from_slice(r);
    }
    sc.seed_fractions[k_star] = 0.0;
    sc.validate()?;
    let sc = &sc;
    let t = terms(sc)?;
    let h = &sc.initial_h;
    let rivals: f64 = (0..k)
        .filter(|&c| c != k_star)
        .map(|c| sc.seed_fractions[c])
        .sum();
    let capacity = (sc.params.rho[k] - rivals).max(0.0);

    let coeffs: Vec<AffineCoefficient> = (0..k)
        .map(|c| {
            let (slope, intercept) = if c == k_star {
                (
                    t.feedback * (1.0 - h[c]) / t.denom,
                    (t.base[c] + capacity * h[c] * t.feedback) / t.denom,
                )
            } else {
                (
                    -t.feedback * h[c] / t.denom,
                    (t.base[c] + (sc.seed_fractions[c] + capacity * h[c]) * t.feedback) / t.denom,
                )
            };
            AffineCoefficient {
                candidate: c + 1,
                slope,
                intercept,
            }
        })
        .collect();

    let star = coeffs[k_star];
    let (mut lo, mut hi) = (0.0f64, capacity);
    let mut contradiction = false;
    for (c, rival) in coeffs.iter().enumerate() {
        if c == k_star {
            continue;
        }
        // (s* - s_j) x + (i* - i_j) >= 0
        let ds = star.slope - rival.slope;
        let di = star.intercept - rival.intercept;
        if ds > 0.0 {
            lo = lo.max(-di / ds);
        } else if ds < 0.0 {
            hi = hi.min(-di / ds);
        } else if di < -TIE_SLACK {
            contradiction = true;
        }
    }
    // a bound landing on the capacity can overshoot it by rounding
    if lo > hi && lo - hi <= BOUND_SLACK * hi.abs().max(1.0) {
        lo = hi;
    }
    let feasible = !contradiction && lo <= hi;
    let condition = nonnegativity_condition(sc)?;
    let initially_top = h.iter().all(|&x| h[k_star] >= x);
    Ok(ThresholdReport {
        scenario: sc.clone(),
        k_star: k_star + 1,
        threshold: feasible.then_some(lo),
        feasible,
        capacity,
        condition_margin: condition.margin,
        condition_holds: condition.holds,
        initially_top,
        assumptions_met: condition.holds && initially_top,
        affine_coefficients: coeffs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldTrajectory {
    /// Average undecided PPV, starting with the initial PPV; one entry per
    /// unit of simulated time.
    pub h: Vec<Vec<f64>>,
    /// Scaled influence `n z` evaluated at each entry of `h`.
    pub z: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates `h <- softmax(h, z(h), theta / n)`; one iteration stands for one
/// unit of simulated time. Stops after `max_iters` or once no component moves
/// by `eps` or more.
pub fn meanfield_trajectory(
    sc: &MeanFieldScenario,
    max_iters: usize,
    eps: f64,
) -> Result<MeanFieldTrajectory> {
    sc.validate()?;
    let theta_eff = sc.theta / sc.params.n as f64;
    let k = sc.candidates();
    let mut h = sc.initial_h.clone();
    let mut out = MeanFieldTrajectory {
        h: vec![h.clone()],
        z: Vec::new(),
        iterations: 0,
        converged: false,
    };
    let mut next = vec![0.0; k];
    loop {
        let z = meanfield_z(sc, &h)?;
        if out.iterations == max_iters {
            out.z.push(z);
            break;
        }
        softmax_update_into(&h, &z, theta_eff, &mut next);
        out.z.push(z);
        let moved = next
            .iter()
            .zip(&h)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        h.copy_from_slice(&next);
        out.iterations += 1;
        out.h.push(h.clone());
        if moved < eps {
            out.converged = true;
            out.z.push(meanfield_z(sc, &h)?);
            break;
        }
    }
    Ok(out)
}

/// Average over undecided voters of the exact `n z(u, ·)`, evaluated by the
/// dense pairwise sum. The empirical counterpart of [`meanfield_z`].
pub fn empirical_scaled_influence(model: &InfluenceModel<'_>, state: &PreferenceState) -> Vec<f64> {
    let n = model.node_count();
    let k = state.candidates();
    let mut avg = vec![0.0; k];
    let mut count = 0usize;
    for u in (0..n).filter(|&u| !state.is_seeded(u)) {
        for (a, z) in avg.iter_mut().zip(model.dense_combined_influence(state, u)) {
            *a += n as f64 * z;
        }
        count += 1;
    }
    if count > 0 {
        avg.iter_mut().for_each(|a| *a /= count as f64);
    }
    avg
}
