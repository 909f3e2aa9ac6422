mod common;

use common::{fixture, problem_from_parts, problem_from_seed, random_policy};
use dptool_core::audit::{audit_problem, multiplicity_check, Verdict};
use dptool_core::behavioral::{bootstrap, raw_scores, BehavioralDataset, BootstrapConfig, ScoreOptions};
use dptool_core::normative::{expected_score, is_proper, optimal_action, optimal_action_certain, Benchmarks};
use dptool_core::problem::{AggregateStat, DisclosureSpec, StatisticKind};
use dptool_core::simulation::{build_policy, exact_metrics, sample_dataset, AgentSpec};
use dptool_core::{Belief, BeliefGrid, RuleChoice, ScoreTable};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

proptest! {
    #[test]
    fn law_of_total_probability(seed in any::<u64>()) {
        let p = problem_from_seed(seed);
        let info = p.info();
        let marginal = info.signal_marginal();
        let prior = info.marginal_prior();
        let mut mixed = vec![0.0; p.n_states()];
        for v in info.reachable_signals() {
            let q = info.posterior(v).unwrap();
            for (s, m) in mixed.iter_mut().enumerate() {
                *m += marginal[v] * q.probs()[s];
            }
        }
        for (m, p) in mixed.iter().zip(prior.probs()) {
            prop_assert!(close(*m, *p, 1e-12));
        }
    }

    #[test]
    fn posterior_routes_agree(seed in any::<u64>()) {
        let p = problem_from_seed(seed);
        let info = p.info();
        for v in info.reachable_signals() {
            let direct = info.posterior(v).unwrap();
            let bayes = info.posterior_via_bayes(v).unwrap();
            prop_assert!(direct.max_abs_diff(&bayes) < 1e-12);
        }
    }

    #[test]
    fn value_of_information_is_nonnegative(seed in any::<u64>()) {
        let p = problem_from_seed(seed);
        prop_assert!(Benchmarks::compute(&p, RuleChoice::Incentive).value_of_information >= -1e-12);
    }

    #[test]
    fn affine_transform_preserves_actions_and_ratios(
        seed in any::<u64>(),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let p = problem_from_seed(seed);
        let table = p.incentive_table();
        let moved = table.affine(scale, shift);
        let q = problem_from_parts(p.info().rows().to_vec(), moved.rows().to_vec(), None, DisclosureSpec::default());
        for b in BeliefGrid::default_for(p.n_states()).points() {
            let (a1, v1) = optimal_action(table, b);
            let (a2, v2) = optimal_action(&moved, b);
            // ties can resolve differently only if values are numerically equal
            if a1 != a2 {
                prop_assert!(close(expected_score(table, a2, b), v1, 1e-9));
            } else {
                prop_assert!(close(v2, scale * v1 + shift, 1e-9));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let policy = random_policy(&mut rng, p.n_signals(), p.n_actions());
        let m1 = exact_metrics(&p, &policy, RuleChoice::Incentive);
        let m2 = exact_metrics(&q, &policy, RuleChoice::Incentive);
        if let (Ok(d1), Ok(d2)) = (m1.decomposition(), m2.decomposition()) {
            if d1.delta > 1e-6 {
                prop_assert!(close(d1.total_loss, d2.total_loss, 1e-6));
                prop_assert!(close(d1.stimulus_prior_gap, d2.stimulus_prior_gap, 1e-6));
            }
        }
    }

    #[test]
    fn exact_scores_are_ordered(seed in any::<u64>()) {
        let p = problem_from_seed(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
        let policy = random_policy(&mut rng, p.n_signals(), p.n_actions());
        let m = exact_metrics(&p, &policy, RuleChoice::Incentive);
        prop_assert!(m.benchmark >= m.calibrated - 1e-9);
        prop_assert!(m.calibrated >= m.behavioral - 1e-9);
    }

    #[test]
    fn certainty_equivalence(seed in any::<u64>()) {
        let p = problem_from_seed(seed);
        for s in 0..p.n_states() {
            let point = Belief::point_mass(p.n_states(), s);
            prop_assert_eq!(optimal_action(p.incentive_table(), &point).0, optimal_action_certain(p.incentive_table(), s));
        }
    }

    #[test]
    fn scores_ignore_record_order(seed in any::<u64>()) {
        let p = fixture("recidivism_mismatched.json");
        let agent = AgentSpec::rational().with_lapse(0.2);
        let policy = build_policy(&p, &agent).unwrap();
        let ds = sample_dataset(&p, &policy, 300, seed);
        let mut records = ds.records().to_vec();
        records.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = BehavioralDataset::new(&p, records).unwrap();
        let a = raw_scores(&ds, &p, ScoreOptions::default()).unwrap();
        let b = raw_scores(&shuffled, &p, ScoreOptions::default()).unwrap();
        prop_assert!(close(a.behavioral, b.behavioral, 1e-12));
        prop_assert!(close(a.calibrated, b.calibrated, 1e-12));
    }

    #[test]
    fn recid_switch_tracks_threshold(q in 0.0f64..1.0) {
        let table = fixture("recidivism.json").incentive_table().clone();
        let (a, _) = optimal_action(&table, &Belief::new(vec![1.0 - q, q]).unwrap());
        let threshold = 12.0 / 19.0;
        if q < threshold - 1e-9 {
            prop_assert_eq!(a, 0);
        } else if q > threshold + 1e-9 {
            prop_assert_eq!(a, 1);
        }
    }

    #[test]
    fn multiplicity_witnesses_satisfy_constraints(prior in 0.05f64..0.95, acc in 0.0f64..1.0) {
        // Build some joint consistent with the disclosed prior and accuracy,
        // if one exists, then check the analysis against it.
        let disclosure = DisclosureSpec {
            prior_endowed: true,
            aggregate_stats: vec![AggregateStat {
                statistic: StatisticKind::UnconditionalAccuracy,
                value: acc,
                conditioning: String::new(),
            }],
            ..DisclosureSpec::default()
        };
        // correct cells split proportionally to the prior where feasible
        let tp = (acc * prior).min(prior);
        let tn = acc - tp;
        prop_assume!(tn >= 0.0 && tn <= 1.0 - prior);
        let joint = vec![vec![tn, prior - tp], vec![1.0 - prior - tn, tp]];
        prop_assume!(joint.iter().flatten().all(|m| *m >= 0.0));
        let recid = vec![vec![0.2, -0.2], vec![-1.0, 0.5]];
        let q = problem_from_parts(joint, recid, None, disclosure);
        let m = multiplicity_check(&q).unwrap();
        prop_assert!(m.constraint_residual(q.info()) < 1e-9);
        for b in &m.signals {
            if let (Some(lo), Some(hi)) = (b.min, b.max) {
                prop_assert!(lo <= hi + 1e-12);
                for (w, bound) in [(b.min_witness.as_ref().unwrap(), lo), (b.max_witness.as_ref().unwrap(), hi)] {
                    prop_assert!(m.constraint_residual(w) < 1e-9);
                    let v = q.signal_index(&b.signal).unwrap();
                    prop_assert!(close(w.posterior(v).unwrap().probs()[1], bound, 1e-9));
                }
                let v = q.signal_index(&b.signal).unwrap();
                if let Ok(truth) = q.info().posterior(v) {
                    prop_assert!(truth.probs()[1] >= lo - 1e-9 && truth.probs()[1] <= hi + 1e-9);
                }
            }
        }
    }

    #[test]
    fn audit_is_monotone_in_disclosure(seed in any::<u64>(), base in 0u8..32, extra in 0u8..8) {
        let p = fixture("recidivism_prediction_confidence.json");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let joint = common::random_joint(&mut rng, 2, 2, false);
        let p = p.with_info(dptool_core::InformationStructure::new(joint).unwrap()).unwrap();
        let with = |bits: u8| DisclosureSpec {
            prior_endowed: bits & 1 != 0,
            likelihoods_disclosed: bits & 2 != 0,
            posterior_in_signal: bits & 4 != 0,
            feedback_after_trial: bits & 8 != 0,
            scoring_rule_communicated: bits & 16 != 0,
            ..DisclosureSpec::default()
        };
        let before = audit_problem(&p.with_disclosure(with(base)));
        let after = audit_problem(&p.with_disclosure(with(base | extra)));
        if before.verdict == Verdict::WellDefined {
            prop_assert_eq!(after.verdict, Verdict::WellDefined);
        }
        if before.verdict == Verdict::IllDefined {
            prop_assert!(!before.reasons.is_empty());
        }
    }

    #[test]
    fn degenerate_verdict_matches_normative_module(seed in any::<u64>()) {
        let p = problem_from_seed(seed);
        let report = audit_problem(&p);
        let delta = Benchmarks::compute(&p, RuleChoice::Incentive).value_of_information;
        let info = p.info();
        let actions: Vec<usize> = info
            .reachable_signals()
            .map(|v| optimal_action(p.incentive_table(), &info.posterior(v).unwrap()).0)
            .collect();
        let constant = actions.windows(2).all(|w| w[0] == w[1]);
        prop_assert_eq!(report.verdict == Verdict::Degenerate, constant && delta.abs() <= 1e-12);
    }
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let p = fixture("recidivism_mismatched.json");
    let policy = build_policy(&p, &AgentSpec::rational().with_lapse(0.3)).unwrap();
    let bytes = |seed| {
        let mut out = Vec::new();
        sample_dataset(&p, &policy, 500, seed).write_csv(&mut out).unwrap();
        out
    };
    assert_eq!(bytes(42), bytes(42));
    assert_ne!(bytes(42), bytes(43));
}

#[test]
fn bootstrap_is_independent_of_parallelism() {
    let p = fixture("recidivism_mismatched.json");
    let policy = build_policy(&p, &AgentSpec::rational().with_lapse(0.3)).unwrap();
    let ds = sample_dataset(&p, &policy, 400, 7);
    let config = BootstrapConfig {
        resamples: 200,
        seed: 11,
        ..BootstrapConfig::default()
    };
    let serial = bootstrap(&ds, &p, ScoreOptions::default(), config, false).unwrap();
    let parallel = bootstrap(&ds, &p, ScoreOptions::default(), config, true).unwrap();
    assert_eq!(serial, parallel);
    let total = serial.total_loss.unwrap();
    assert!(total.lower <= total.upper);
}

#[test]
fn proper_rules_stay_proper_under_affine_maps() {
    let p = fixture("belief_report.json");
    let grid = BeliefGrid::from_points(p.actions().reports().unwrap().to_vec());
    let table: &ScoreTable = p.incentive_table();
    assert!(is_proper(table, &grid).is_strict());
    assert!(is_proper(&table.affine(3.0, -1.0), &grid).is_strict());
    assert!(!is_proper(&table.affine(-1.0, 0.0), &grid).is_proper());
}
