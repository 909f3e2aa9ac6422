#![allow(dead_code)]

use std::path::PathBuf;

use dptool_core::problem::{ActionsSpec, DisclosureSpec, ProblemSpec, ScoringRule};
use dptool_core::simulation::PolicyKernel;
use dptool_core::DecisionProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> DecisionProblem {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture readable");
    DecisionProblem::from_json(&text).expect("fixture valid")
}

pub fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Joint with random positive weights; roughly one cell in six is zeroed
/// when `sparse`, keeping every state with some mass.
pub fn random_joint(rng: &mut impl Rng, n_signals: usize, n_states: usize, sparse: bool) -> Vec<Vec<f64>> {
    loop {
        let mut joint: Vec<Vec<f64>> = (0..n_signals)
            .map(|_| {
                (0..n_states)
                    .map(|_| {
                        if sparse && rng.gen_bool(1.0 / 6.0) {
                            0.0
                        } else {
                            rng.gen_range(0.01..1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let total: f64 = joint.iter().flatten().sum();
        let state_mass_ok = (0..n_states).all(|s| joint.iter().any(|row| row[s] > 0.0));
        if total > 0.0 && state_mass_ok {
            joint.iter_mut().flatten().for_each(|m| *m /= total);
            return joint;
        }
    }
}

pub fn random_table(rng: &mut impl Rng, n_actions: usize, n_states: usize) -> Vec<Vec<f64>> {
    (0..n_actions)
        .map(|_| (0..n_states).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

pub fn problem_from_parts(
    joint: Vec<Vec<f64>>,
    incentive: Vec<Vec<f64>>,
    evaluation: Option<Vec<Vec<f64>>>,
    disclosure: DisclosureSpec,
) -> DecisionProblem {
    let spec = ProblemSpec {
        states: labels("t", joint[0].len()),
        actions: ActionsSpec::Labels(labels("a", incentive.len())),
        signals: labels("v", joint.len()),
        joint,
        incentive_rule: ScoringRule::Table(incentive),
        evaluation_rule: evaluation.map(ScoringRule::Table),
        disclosure,
        endowed_prior: None,
    };
    spec.build().expect("generated problem is valid")
}

/// Random problem with |Θ|, |V| in 2..=max_sv and |A| in 2..=max_a.
pub fn random_problem(rng: &mut impl Rng, max_sv: usize, max_a: usize) -> DecisionProblem {
    let n_states = rng.gen_range(2..=max_sv);
    let n_signals = rng.gen_range(2..=max_sv);
    let n_actions = rng.gen_range(2..=max_a);
    let sparse = rng.gen_bool(0.3);
    problem_from_parts(
        random_joint(rng, n_signals, n_states, sparse),
        random_table(rng, n_actions, n_states),
        None,
        DisclosureSpec::default(),
    )
}

pub fn problem_from_seed(seed: u64) -> DecisionProblem {
    random_problem(&mut ChaCha8Rng::seed_from_u64(seed), 5, 4)
}

pub fn random_policy(rng: &mut impl Rng, n_signals: usize, n_actions: usize) -> PolicyKernel {
    let rho = (0..n_signals)
        .map(|_| {
            let w: Vec<f64> = (0..n_actions).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| x / total).collect()
        })
        .collect();
    PolicyKernel::new(rho).expect("rows normalized")
}
