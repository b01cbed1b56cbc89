use percolate::meanfield::empirical_scaled_influence;
use percolate::{
    generate_sbm, init_scenario, lambda_vector, meanfield_trajectory, meanfield_z,
    nonnegativity_condition, percolation_threshold, BlockModelParams, InfluenceModel,
    MeanFieldScenario,
};
use proptest::prelude::*;

fn one_eager(beta: f64, rho31: f64) -> MeanFieldScenario {
    MeanFieldScenario {
        params: BlockModelParams::new(2000, 0.8, 0.2, vec![0.5, 0.0, 0.5]).unwrap(),
        beta,
        theta: 20.0,
        seed_fractions: vec![rho31, 0.0],
        initial_h: vec![0.5, 0.5],
    }
}

fn two_competing(beta: f64, rho41: f64, rho42: f64) -> MeanFieldScenario {
    let third = 1.0 / 3.0;
    MeanFieldScenario {
        params: BlockModelParams::new(3000, 0.9, 0.1, vec![third, third, 0.0, third]).unwrap(),
        beta,
        theta: 100.0,
        seed_fractions: vec![rho41, rho42, 0.0],
        initial_h: vec![third; 3],
    }
}

fn polblogs(beta: f64) -> MeanFieldScenario {
    MeanFieldScenario {
        params: BlockModelParams::new(
            1095,
            0.9224,
            0.0776,
            vec![508.0 / 1095.0, 0.0, 587.0 / 1095.0],
        )
        .unwrap(),
        beta,
        theta: 20.0,
        seed_fractions: vec![0.0, 0.0],
        initial_h: vec![0.5, 0.5],
    }
}

// Hand-expanded influences for the one-eager-candidate scenario, written out
// without the block machinery. The bracket is divided by D = 0.5.
fn one_eager_expanded(beta: f64, r: f64, h: [f64; 2]) -> [f64; 2] {
    let ru = 0.5 - r;
    let z1 =
        0.5 * 0.2 + (r + ru * h[0]) * 0.8 - beta * (0.5 * 0.5 * 0.5 + (r + ru * h[0]) * 0.25) / 0.5;
    let z2 = ru * h[1] * 0.8 - beta * (ru * h[1] * 0.25) / 0.5;
    [z1 / 0.5, z2 / 0.5]
}

#[test]
fn one_eager_thresholds() {
    for (beta, printed) in [(0.7, 0.167), (0.8, 0.25), (0.9, 0.357), (1.0, 0.5)] {
        let r = percolation_threshold(&one_eager(beta, 0.0), 0, None).unwrap();
        let t = r.threshold.unwrap();
        let closed = 0.5 * (beta - 0.4) / (1.6 - beta);
        assert!((t - closed).abs() < 1e-12, "beta {beta}: {t} vs {closed}");
        assert!((t - printed).abs() < 1e-3);
        assert!(r.condition_holds && r.initially_top && r.assumptions_met);
    }
}

#[test]
fn two_competing_threshold() {
    for rival in [0.0, 0.05, 0.1] {
        let r = percolation_threshold(&two_competing(0.8, 0.0, rival), 0, None).unwrap();
        let t = r.threshold.unwrap();
        let closed = (33.0 / 270.0 * 0.8 - 1.0 / 30.0) / (0.9 - 33.0 / 90.0 * 0.8);
        assert!((t - closed).abs() < 1e-12);
        assert!((t - 0.106).abs() < 1e-3);
    }
    // a rival above the third-candidate bound must be matched
    let r = percolation_threshold(&two_competing(0.8, 0.0, 0.15), 0, None).unwrap();
    assert!((r.threshold.unwrap() - 0.15).abs() < 1e-12);
    // and one past half the block cannot be
    let r = percolation_threshold(&two_competing(0.8, 0.0, 0.2), 0, None).unwrap();
    assert!(!r.feasible);
}

#[test]
fn polblogs_thresholds() {
    let lambda = lambda_vector(&polblogs(1.0).params);
    assert!((lambda[0] - 0.469525).abs() < 1e-6);
    assert!((lambda[2] - 0.530474).abs() < 1e-6);
    let margin = nonnegativity_condition(&polblogs(1.0)).unwrap();
    assert!((margin.margin - (0.9224 - 0.56034)).abs() < 1e-5);
    for (beta, printed) in [(0.7, 0.2358), (0.8, 0.3123), (0.9, 0.409), (1.0, 0.536)] {
        let t = percolation_threshold(&polblogs(beta), 0, None)
            .unwrap()
            .threshold
            .unwrap();
        assert!((t - printed).abs() < 1e-3, "beta {beta}: {t}");
        let rounded = (0.23009 * beta - 0.036) / (1153.0 / 1250.0 - 0.56034 * beta);
        assert!((t - rounded).abs() < 1e-3);
    }
}

#[test]
fn threshold_json_carries_fields() {
    let r = percolation_threshold(&one_eager(0.8, 0.0), 0, None).unwrap();
    let v: serde_json::Value = serde_json::to_value(&r).unwrap();
    for key in [
        "scenario",
        "k_star",
        "threshold",
        "feasible",
        "condition_margin",
        "affine_coefficients",
    ] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn trajectory_shapes() {
    let mut previous = usize::MAX;
    for rho in [0.25, 0.35, 0.45] {
        let tr = meanfield_trajectory(&one_eager(0.7, rho), 1_000_000, 1e-9).unwrap();
        assert!(tr.converged);
        assert!(tr.h.windows(2).all(|w| w[1][0] >= w[0][0]));
        assert!(tr.h.last().unwrap()[0] >= 0.999);
        assert!(tr.iterations < previous);
        previous = tr.iterations;
    }
    for rho in [0.05, 0.15] {
        let tr = meanfield_trajectory(&one_eager(0.7, rho), 1_000_000, 1e-9).unwrap();
        assert!(tr.h.last().unwrap()[0] <= 0.001);
    }
}

#[test]
fn lemma_consistency_on_generated_graph() {
    let sc = one_eager(0.8, 0.25);
    let g = generate_sbm(&sc.params, 17).unwrap();
    let state = init_scenario(&g, &sc.to_scenario_config(5, 1.0)).unwrap();
    let model = InfluenceModel::new(&g, sc.beta).unwrap();
    let empirical = empirical_scaled_influence(&model, &state);
    let theory = meanfield_z(&sc, &sc.initial_h).unwrap();
    for (e, t) in empirical.iter().zip(&theory) {
        assert!((e - t).abs() <= 0.05 * t.abs(), "{e} vs {t}");
    }
}

#[test]
fn tight_bound_at_threshold() {
    let mut cases = Vec::new();
    for beta in [0.7, 0.8, 0.9, 1.0] {
        cases.push((one_eager(beta, 0.0), 0));
        cases.push((polblogs(beta), 0));
    }
    cases.push((two_competing(0.8, 0.0, 0.05), 0));
    cases.push((two_competing(0.8, 0.07, 0.0), 1));
    for (sc, k) in cases {
        let t = percolation_threshold(&sc, k, None)
            .unwrap()
            .threshold
            .unwrap();
        let mut at = sc.clone();
        at.seed_fractions[k] = t;
        let z = meanfield_z(&at, &at.initial_h).unwrap();
        let rival = z
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((z[k] - rival).abs() <= 1e-12, "{} vs {}", z[k], rival);
    }
}

#[test]
fn threshold_nondecreasing_in_beta() {
    for family in [one_eager as fn(f64, f64) -> MeanFieldScenario, |b, _| {
        polblogs(b)
    }] {
        let mut last = 0.0;
        for i in 0..=100 {
            let beta = 0.4 + 0.6 * i as f64 / 100.0;
            let r = percolation_threshold(&family(beta, 0.0), 0, None).unwrap();
            let Some(t) = r.threshold else { break };
            assert!(t >= last - 1e-15);
            last = t;
        }
    }
}

fn random_scenario() -> impl Strategy<Value = MeanFieldScenario> {
    (3usize..=5)
        .prop_flat_map(|b| {
            (
                Just(b),
                prop::collection::vec(0.05f64..1.0, b),
                0.0f64..=1.0,
                0.0f64..=1.0,
                prop::collection::vec(0.0f64..1.0, b),
                0.0f64..=1.0,
                1.0f64..200.0,
                100usize..5000,
            )
        })
        .prop_filter_map(
            "condition",
            |(b, w, p_in, p_out, seeds, beta_frac, theta, n)| {
                let total: f64 = w.iter().sum();
                let rho: Vec<f64> = w.iter().map(|x| x / total).collect();
                let params = BlockModelParams::new(n, p_in, p_out, rho.clone()).ok()?;
                let lambda = lambda_vector(&params);
                let denom: f64 = rho.iter().zip(&lambda).map(|(r, l)| r * l).sum();
                if denom <= 0.0 {
                    return None;
                }
                let lb = lambda[b - 1];
                let beta_max = if lb > 0.0 {
                    p_in * denom / (lb * lb)
                } else {
                    2.0
                };
                let seed_total: f64 = seeds[..b - 1].iter().sum::<f64>() + seeds[b - 1];
                let seed_fractions = seeds[..b - 1]
                    .iter()
                    .map(|s| s / seed_total * rho[b - 1] * 0.999)
                    .collect();
                let sc = MeanFieldScenario {
                    params,
                    beta: beta_frac * beta_max.min(2.0),
                    theta,
                    seed_fractions,
                    initial_h: vec![1.0 / (b - 1) as f64; b - 1],
                };
                sc.validate().ok()?;
                Some(sc)
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn monotone_along_trajectory(sc in random_scenario()) {
        prop_assert!(nonnegativity_condition(&sc).unwrap().holds);
        let tr = meanfield_trajectory(&sc, 300, 0.0).unwrap();
        let z0 = &tr.z[0];
        let top = z0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let k = z0.iter().position(|&v| v == top).unwrap();
        let slack = 1e-12;
        for (i, (h, z)) in tr.h.iter().zip(&tr.z).enumerate() {
            for j in 0..h.len() {
                prop_assert!(h[k] >= h[j] - slack, "iteration {i}: h");
                prop_assert!(z[k] >= z[j] - slack, "iteration {i}: z");
            }
            if i > 0 {
                prop_assert!(h[k] >= tr.h[i - 1][k] - slack, "iteration {i}: growth");
            }
        }
    }

    #[test]
    fn common_factor_keeps_ordering(sc in random_scenario()) {
        let z = meanfield_z(&sc, &sc.initial_h).unwrap();
        let lambda = lambda_vector(&sc.params);
        let denom: f64 = sc.params.rho.iter().zip(&lambda).map(|(r, l)| r * l).sum();
        let order = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
            idx
        };
        let scaled: Vec<f64> = z.iter().map(|x| x * denom).collect();
        prop_assert_eq!(order(&z), order(&scaled));
    }

    #[test]
    fn matches_expanded_formulas(beta in 0.0f64..1.6, r in 0.0f64..0.5, h1 in 0.0f64..=1.0) {
        let h = [h1, 1.0 - h1];
        let z = meanfield_z(&one_eager(beta, r), &h).unwrap();
        let oracle = one_eager_expanded(beta, r, h);
        prop_assert!((z[0] - oracle[0]).abs() < 1e-12);
        prop_assert!((z[1] - oracle[1]).abs() < 1e-12);
    }
}
