use clare_core::*;
use proptest::prelude::*;

fn normalize(raw: &[f64]) -> Vec<f64> {
    let t: f64 = raw.iter().sum();
    raw.iter().map(|x| x / t).collect()
}

prop_compose! {
    fn mdp_and_policy()(ns in 1usize..=6, na in 1usize..=6)(
        t in prop::collection::vec(0.001f64..1.0, ns * na * ns),
        mu in prop::collection::vec(0.001f64..1.0, ns),
        pi in prop::collection::vec(0.0f64..1.0, ns * na),
        sparse in prop::collection::vec(any::<bool>(), ns * na * ns),
        gamma in 0.3f64..0.95,
    ) -> (TabularMdp<f64>, Policy<f64>) {
        let ns = mu.len();
        let na = pi.len() / ns;
        let dims = Dims::new(ns, na);
        let mut trans = Vec::new();
        for (row, mask) in t.chunks(ns).zip(sparse.chunks(ns)) {
            let mut r: Vec<f64> = row.iter().zip(mask).map(|(x, m)| if *m { 0.0 } else { *x }).collect();
            if r.iter().sum::<f64>() == 0.0 {
                r[0] = 1.0;
            }
            trans.extend(normalize(&r));
        }
        let mut probs = Vec::new();
        for row in pi.chunks(na) {
            let mut r = row.to_vec();
            if r.iter().sum::<f64>() < 1e-3 {
                r[0] = 1.0;
            }
            probs.extend(normalize(&r));
        }
        let mdp = TabularMdp::new(dims, trans, vec![0.0; ns * na], normalize(&mu), gamma).unwrap();
        (mdp, Policy::new(dims, probs).unwrap())
    }
}

/// Discounted causal entropy by propagating the state distribution forward.
fn rollout_entropy(mdp: &TabularMdp<f64>, pi: &Policy<f64>) -> f64 {
    let dims = mdp.dims();
    let g = mdp.discount();
    let row_entropy: Vec<f64> = (0..dims.num_states)
        .map(|s| -pi.row(s).iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>())
        .collect();
    let mut p = mdp.initial().to_vec();
    let mut w = 1.0 - g;
    let mut h = 0.0;
    while w > 1e-18 {
        let mut next = vec![0.0; dims.num_states];
        for s in 0..dims.num_states {
            h += w * p[s] * row_entropy[s];
            for a in 0..dims.num_actions {
                let m = p[s] * pi.prob(s, a);
                for (s2, t) in mdp.transition_row(s, a).iter().enumerate() {
                    next[s2] += m * t;
                }
            }
        }
        p = next;
        w *= g;
    }
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn occupancy_is_valid_and_round_trips((mdp, pi) in mdp_and_policy()) {
        let occ = occupancy_of_policy(&mdp, &pi, 1e-10).unwrap();
        prop_assert!(occ.mass().iter().all(|&x| x >= 0.0));
        prop_assert!((occ.mass().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(bellman_flow_residual(&mdp, &occ).unwrap() < 1e-10);
        let back = policy_of_occupancy(&occ);
        let marginal = occ.state_marginal();
        for s in 0..mdp.num_states() {
            if marginal[s] > 1e-12 {
                for a in 0..mdp.num_actions() {
                    prop_assert!((back.prob(s, a) - pi.prob(s, a)).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn causal_entropy_matches_rollout((mdp, pi) in mdp_and_policy()) {
        let occ = occupancy_of_policy(&mdp, &pi, 1e-10).unwrap();
        prop_assert!((causal_entropy(&occ) - rollout_entropy(&mdp, &pi)).abs() < 1e-6);
    }

    #[test]
    fn causal_entropy_is_concave(
        (mdp, pi) in mdp_and_policy(),
        other in prop::collection::vec(0.01f64..1.0, 36),
        t in 0.01f64..0.99,
    ) {
        let dims = mdp.dims();
        let mut probs = Vec::new();
        for row in other[..dims.pairs()].chunks(dims.num_actions) {
            probs.extend(normalize(row));
        }
        let pi2 = Policy::new(dims, probs).unwrap();
        let a = occupancy_of_policy(&mdp, &pi, 1e-10).unwrap();
        let b = occupancy_of_policy(&mdp, &pi2, 1e-10).unwrap();
        let mixed = a.mix(&b, t).unwrap();
        let lhs = causal_entropy(&mixed);
        let rhs = t * causal_entropy(&a) + (1.0 - t) * causal_entropy(&b);
        prop_assert!(lhs >= rhs - 1e-12);
    }

    #[test]
    fn union_is_count_weighted_mixture(
        e in prop::collection::vec((0usize..3, 0usize..2), 1..40),
        b in prop::collection::vec((0usize..3, 0usize..2), 1..40),
    ) {
        let dims = Dims::new(3, 2);
        let mk = |label, v: &[(usize, usize)]| {
            Dataset::new(label, v.iter().map(|&(s, a)| Transition::from([s, a, 0])).collect())
        };
        let de = mk(DatasetLabel::Expert, &e);
        let db = mk(DatasetLabel::Diverse, &b);
        let re = empirical_expert::<f64>(&de, dims).unwrap();
        let rb = empirical_expert::<f64>(&db, dims).unwrap();
        let ru = empirical_union::<f64>(&de, &db, dims).unwrap();
        let (ne, nb) = (e.len() as f64, b.len() as f64);
        for i in 0..dims.pairs() {
            prop_assert!((ru.mass[i] - (ne * re.mass[i] + nb * rb.mass[i]) / (ne + nb)).abs() < 1e-12);
        }
        let pb = behavior_policy::<f64>(&de.union(&db), dims).unwrap();
        for s in 0..3 {
            prop_assert!((pb.row(s).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unsmoothed_fit_reproduces_frequencies(
        ts in prop::collection::vec((0usize..3, 0usize..2, 0usize..3), 1..60),
    ) {
        let dims = Dims::new(3, 2);
        let d = Dataset::new(DatasetLabel::Diverse, ts.iter().map(|&(s, a, n)| Transition::from([s, a, n])).collect());
        let empty = Dataset::new(DatasetLabel::Expert, vec![]);
        let m = fit_dynamics(&d, &empty, dims, 0.0f64).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                let n = ts.iter().filter(|t| t.0 == s && t.1 == a).count();
                for s2 in 0..3 {
                    let k = ts.iter().filter(|t| t.0 == s && t.1 == a && t.2 == s2).count();
                    let expect = if n == 0 { 1.0 / 3.0 } else { k as f64 / n as f64 };
                    prop_assert!((m.transition_row(s, a)[s2] - expect).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn count_uncertainty_is_monotone(n in 1u64..10_000, k in 2u64..10, d1 in 0.01f64..0.5, d2 in 0.01f64..0.5) {
        let dims = Dims::new(1, 2);
        let d = Dataset::new(
            DatasetLabel::Diverse,
            (0..n).map(|_| Transition::from([0, 0, 0])).chain((0..n * k).map(|_| Transition::from([0, 1, 0]))).collect(),
        );
        let empty = Dataset::new(DatasetLabel::Expert, vec![]);
        let m = fit_dynamics(&d, &empty, dims, 0.0f64).unwrap();
        let e = count_uncertainty(&m, d1, 0.9).unwrap();
        prop_assert!(e.get(0, 1) <= e.get(0, 0));
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let tight = count_uncertainty(&m, lo, 0.9).unwrap();
        let loose = count_uncertainty(&m, hi, 0.9).unwrap();
        prop_assert!(tight.get(0, 0) >= loose.get(0, 0));
    }
}

fn ergodic() -> TabularMdp<f64> {
    let t = vec![
        0.6, 0.3, 0.1, 0.2, 0.5, 0.3, //
        0.1, 0.7, 0.2, 0.3, 0.3, 0.4, //
        0.5, 0.1, 0.4, 0.2, 0.2, 0.6,
    ];
    TabularMdp::new(Dims::new(3, 2), t, vec![0.0, 1.0, 0.5, 0.0, 0.2, 0.8], vec![0.5, 0.3, 0.2], 0.8).unwrap()
}

#[test]
fn empirical_expert_approaches_true_occupancy() {
    let mdp = ergodic();
    let pi = Policy::new(mdp.dims(), vec![0.7, 0.3, 0.4, 0.6, 0.5, 0.5]).unwrap();
    let truth = occupancy_of_policy(&mdp, &pi, 1e-12).unwrap();
    let h = default_horizon(mdp.discount());
    let avg_tv = |n: usize| -> f64 {
        (0..5u64)
            .map(|seed| {
                let d = sample_dataset(&mdp, &pi, n, h, seed, DatasetLabel::Expert).unwrap();
                let e = empirical_expert::<f64>(&d, mdp.dims()).unwrap();
                tv_distance(&e.mass, truth.mass()).unwrap()
            })
            .sum::<f64>()
            / 5.0
    };
    let tvs: Vec<f64> = [100, 1000, 10_000].iter().map(|&n| avg_tv(n)).collect();
    assert!(tvs[0] > tvs[1] && tvs[1] > tvs[2], "{tvs:?}");
}

#[test]
fn model_error_shrinks_with_data() {
    let mdp = ergodic();
    let pi = Policy::uniform(mdp.dims());
    let avg = |n: usize| -> f64 {
        (0..5u64)
            .map(|seed| {
                let d = sample_dataset(&mdp, &pi, n, 20, seed, DatasetLabel::Diverse).unwrap();
                let empty = Dataset::new(DatasetLabel::Expert, vec![]);
                let m = fit_dynamics(&d, &empty, mdp.dims(), 0.0).unwrap();
                let e = true_model_error(&mdp, &m).unwrap();
                e.c.iter().sum::<f64>() / e.c.len() as f64
            })
            .sum::<f64>()
            / 5.0
    };
    // n counts tuples; every pair is visited at these sizes
    let errs: Vec<f64> = [60, 600, 6000].iter().map(|&n| avg(n)).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn single_precision_pipeline() {
    let t: Vec<f32> = ergodic().transitions().iter().map(|&x| x as f32).collect();
    let mdp = TabularMdpF32::new(Dims::new(3, 2), t, vec![0.0; 6], vec![0.5, 0.3, 0.2], 0.8).unwrap();
    let expert = Policy::deterministic(mdp.dims(), &[1, 0, 1]).unwrap();
    let data = sample_dataset(&mdp, &expert, 500, 20, 3, DatasetLabel::Expert).unwrap();
    let empty = Dataset::new(DatasetLabel::Diverse, vec![]);
    let model = fit_dynamics(&data, &empty, mdp.dims(), 1e-3f32).unwrap();
    let rho_e = empirical_expert::<f32>(&data, mdp.dims()).unwrap();
    let env = model.environment(mdp.initial().to_vec(), mdp.discount()).unwrap();
    let w = WeightTableF32::zeros(mdp.dims());
    let config = ClareConfigF32 {
        outer_iters: 20,
        vi_tol: 1e-5,
        ..ClareConfig::default()
    };
    let out = clare_train(
        &config,
        &TrainProblem {
            model: &env,
            rho_e: &rho_e.mass,
            rho_d: &rho_e.mass,
            weights: &w,
            behavior: None,
            true_env: None,
        },
    )
    .unwrap();
    assert_eq!(out.trace.rows.len(), 20);
    assert!(out.trace.rows.iter().all(|r| r.saddle_value.is_finite()));
}
