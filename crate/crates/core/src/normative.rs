//! Normative apparatus: optimal actions, properization, the rational-agent
//! benchmark and baseline, value of information, and finite checks of the
//! ordering and non-indifference axioms.

use serde::{Deserialize, Serialize};

use crate::grid::BeliefGrid;
use crate::problem::{Belief, DecisionProblem, InformationStructure, RuleChoice, ScoreTable};

/// Two expected scores closer than this (scaled by magnitude) are a tie.
pub fn tie_tolerance(reference: f64) -> f64 {
    1e-12 * (1.0 + reference.abs())
}

/// Σ_θ b(θ)·S(a,θ).
pub fn expected_score(table: &ScoreTable, action: usize, belief: &Belief) -> f64 {
    table.row(action).iter().zip(belief.probs()).map(|(s, p)| s * p).sum()
}

/// Expected score of every action under `belief`.
pub fn expected_scores(table: &ScoreTable, belief: &Belief) -> Vec<f64> {
    (0..table.n_actions())
        .map(|a| expected_score(table, a, belief))
        .collect()
}

/// Index of the first maximal entry, treating near-equal values as ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = tie_tolerance(max);
    values
        .iter()
        .position(|v| *v >= max - tol)
        .expect("argmax over an empty slice")
}

/// Expected-score maximizing action; ties go to the lowest action index.
pub fn optimal_action(table: &ScoreTable, belief: &Belief) -> (usize, f64) {
    let values = expected_scores(table, belief);
    let best = argmax_lowest(&values);
    (best, values[best])
}

/// argmax_a S(a,θ) when the state is known.
pub fn optimal_action_certain(table: &ScoreTable, state: usize) -> usize {
    let column: Vec<f64> = (0..table.n_actions()).map(|a| table.score(a, state)).collect();
    argmax_lowest(&column)
}

/// Proper rule Ŝ(p,θ) = S(a*(p),θ) obtained by playing the optimal action
/// under the reported belief. The optimal action at each grid belief is
/// computed once at construction.
#[derive(Debug, Clone)]
pub struct ProperizedRule {
    base: ScoreTable,
    grid: BeliefGrid,
    grid_actions: Vec<usize>,
}

impl ProperizedRule {
    pub fn new(base: ScoreTable, grid: BeliefGrid) -> Self {
        let grid_actions = grid.points().iter().map(|b| optimal_action(&base, b).0).collect();
        Self {
            base,
            grid,
            grid_actions,
        }
    }

    pub fn base(&self) -> &ScoreTable {
        &self.base
    }

    pub fn grid(&self) -> &BeliefGrid {
        &self.grid
    }

    /// Optimal action at each grid belief, in grid order.
    pub fn grid_actions(&self) -> &[usize] {
        &self.grid_actions
    }

    pub fn action_for(&self, belief: &Belief) -> usize {
        optimal_action(&self.base, belief).0
    }

    /// Ŝ(belief, state).
    pub fn score(&self, belief: &Belief, state: usize) -> f64 {
        self.base.score(self.action_for(belief), state)
    }

    /// Ŝ viewed as a belief-report rule on the grid: row k scores report k.
    pub fn as_report_table(&self) -> ScoreTable {
        ScoreTable::new_unchecked(self.grid_actions.iter().map(|a| self.base.row(*a).to_vec()).collect())
    }
}

/// Properizes a rule over the default grid for its state count.
pub fn properize(table: &ScoreTable) -> ProperizedRule {
    ProperizedRule::new(table.clone(), BeliefGrid::default_for(table.n_states()))
}

/// Outcome of checking a belief-report rule for properness on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Properness {
    /// Truthful reporting is the unique best report at every grid belief.
    Strict,
    /// Truthful reporting is optimal, but `tied_report` does equally well
    /// when the true belief is `belief`.
    Weak { belief: usize, tied_report: usize },
    /// Reporting `better_report` beats truth-telling at `belief` by `gain`.
    Improper {
        belief: usize,
        better_report: usize,
        gain: f64,
    },
}

impl Properness {
    /// Membership definition: truthful reports are among the optimal ones.
    pub fn is_proper(&self) -> bool {
        !matches!(self, Properness::Improper { .. })
    }

    pub fn is_strict(&self) -> bool {
        matches!(self, Properness::Strict)
    }
}

/// Checks whether reporting the true grid belief maximizes expected score.
/// Row `k` of `table` must score the report `grid.points()[k]`.
pub fn is_proper(table: &ScoreTable, grid: &BeliefGrid) -> Properness {
    assert_eq!(table.n_actions(), grid.len(), "rule rows must match grid points");
    let mut weak_witness = None;
    for (i, belief) in grid.points().iter().enumerate() {
        let values = expected_scores(table, belief);
        let truthful = values[i];
        let best = argmax_lowest(&values);
        let tol = tie_tolerance(truthful);
        if values[best] > truthful + tol {
            return Properness::Improper {
                belief: i,
                better_report: best,
                gain: values[best] - truthful,
            };
        }
        if weak_witness.is_none() {
            if let Some(j) = (0..values.len()).find(|j| *j != i && values[*j] >= truthful - tol) {
                weak_witness = Some((i, j));
            }
        }
    }
    match weak_witness {
        None => Properness::Strict,
        Some((belief, tied_report)) => Properness::Weak { belief, tied_report },
    }
}

/// R∅: expected score of the optimizer that only knows the prior.
pub fn baseline_for(info: &InformationStructure, table: &ScoreTable) -> f64 {
    optimal_action(table, &info.marginal_prior()).1
}

/// R: Σ_{v,θ} π(v,θ)·Ŝ(π(·|v), θ), skipping zero-mass signals.
pub fn benchmark_for(info: &InformationStructure, table: &ScoreTable) -> f64 {
    info.reachable_signals()
        .map(|v| {
            let posterior = info.posterior(v).expect("reachable signal");
            let action = optimal_action(table, &posterior).0;
            info.rows()[v]
                .iter()
                .enumerate()
                .map(|(s, m)| m * table.score(action, s))
                .sum::<f64>()
        })
        .sum()
}

pub fn rational_baseline(problem: &DecisionProblem, rule: RuleChoice) -> f64 {
    baseline_for(problem.info(), problem.table(rule))
}

pub fn rational_benchmark(problem: &DecisionProblem, rule: RuleChoice) -> f64 {
    benchmark_for(problem.info(), problem.table(rule))
}

/// Δ = R − R∅.
pub fn value_of_information(problem: &DecisionProblem, rule: RuleChoice) -> f64 {
    rational_benchmark(problem, rule) - rational_baseline(problem, rule)
}

/// R, R∅ and Δ computed together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Benchmarks {
    pub rule: RuleChoice,
    pub benchmark: f64,
    pub baseline: f64,
    pub value_of_information: f64,
}

impl Benchmarks {
    pub fn compute(problem: &DecisionProblem, rule: RuleChoice) -> Self {
        let benchmark = rational_benchmark(problem, rule);
        let baseline = rational_baseline(problem, rule);
        Self {
            rule,
            benchmark,
            baseline,
            value_of_information: benchmark - baseline,
        }
    }
}

/// Interval of q = belief in the second state over which one action is on
/// the upper envelope of expected scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionInterval {
    pub action: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Exact belief cutpoints for a two-state rule, found by walking the upper
/// envelope of the lines q ↦ (1−q)·S(a,0) + q·S(a,1). At a cutpoint itself
/// the lowest-index tie-break applies.
pub fn binary_cutpoints(table: &ScoreTable) -> Vec<ActionInterval> {
    assert_eq!(table.n_states(), 2, "cutpoints are defined for two states");
    let intercept = |a: usize| table.score(a, 0);
    let slope = |a: usize| table.score(a, 1) - table.score(a, 0);
    let value = |a: usize, q: f64| intercept(a) + q * slope(a);

    // Among actions maximal at q, the one that stays maximal just after q.
    let leader = |q: f64| -> usize {
        let values: Vec<f64> = (0..table.n_actions()).map(|a| value(a, q)).collect();
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = tie_tolerance(max);
        let mut best = None::<usize>;
        for (a, v) in values.iter().enumerate() {
            if *v >= max - tol && best.is_none_or(|b| slope(a) > slope(b)) {
                best = Some(a);
            }
        }
        best.expect("nonempty action space")
    };

    let mut out = Vec::new();
    let mut lower = 0.0;
    let mut current = leader(0.0);
    loop {
        let next = (0..table.n_actions())
            .filter(|b| slope(*b) > slope(current))
            .map(|b| (intercept(current) - intercept(b)) / (slope(b) - slope(current)))
            .filter(|q| *q > lower && *q < 1.0)
            .fold(None::<f64>, |acc, q| Some(acc.map_or(q, |m| m.min(q))));
        match next {
            Some(q) => {
                out.push(ActionInterval {
                    action: current,
                    lower,
                    upper: q,
                });
                lower = q;
                current = leader(q);
            }
            None => {
                out.push(ActionInterval {
                    action: current,
                    lower,
                    upper: 1.0,
                });
                return out;
            }
        }
    }
}

/// Weak preference relation over a finite set of options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRelation {
    options: Vec<String>,
    weak_pref: Vec<Vec<bool>>,
}

impl PreferenceRelation {
    /// `weak_pref[i][j]` means option i is weakly preferred to option j.
    /// The matrix must be square with a true diagonal.
    pub fn new(options: Vec<String>, weak_pref: Vec<Vec<bool>>) -> Result<Self, String> {
        let n = options.len();
        if weak_pref.len() != n || weak_pref.iter().any(|r| r.len() != n) {
            return Err(format!("preference matrix must be {n}x{n}"));
        }
        if (0..n).any(|i| !weak_pref[i][i]) {
            return Err("preference relation must be reflexive".into());
        }
        Ok(Self { options, weak_pref })
    }

    /// Relation induced by comparing real-valued utilities.
    pub fn from_values(options: Vec<String>, values: &[f64]) -> Self {
        let weak_pref = values
            .iter()
            .map(|vi| values.iter().map(|vj| vi >= vj).collect())
            .collect();
        Self { options, weak_pref }
    }

    pub fn options(&self) -> &[String] {
        &self.options
    }

    pub fn prefers(&self, i: usize, j: usize) -> bool {
        self.weak_pref[i][j]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum OrderingVerdict {
    Pass,
    /// Neither option is weakly preferred to the other.
    IncompletePair {
        first: String,
        second: String,
    },
    /// first ⪰ second and second ⪰ third, but not first ⪰ third.
    IntransitiveTriple {
        first: String,
        second: String,
        third: String,
    },
}

impl OrderingVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, OrderingVerdict::Pass)
    }
}

/// Completeness and transitivity of a weak preference relation.
pub fn check_ordering_axiom(rel: &PreferenceRelation) -> OrderingVerdict {
    let n = rel.options.len();
    let name = |i: usize| rel.options[i].clone();
    for i in 0..n {
        for j in (i + 1)..n {
            if !rel.prefers(i, j) && !rel.prefers(j, i) {
                return OrderingVerdict::IncompletePair {
                    first: name(i),
                    second: name(j),
                };
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if !rel.prefers(i, j) {
                continue;
            }
            for k in 0..n {
                if rel.prefers(j, k) && !rel.prefers(i, k) {
                    return OrderingVerdict::IntransitiveTriple {
                        first: name(i),
                        second: name(j),
                        third: name(k),
                    };
                }
            }
        }
    }
    OrderingVerdict::Pass
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum NonIndifferenceVerdict {
    /// At grid belief `belief`, actions `first` and `second` differ in
    /// expected score.
    Pass { belief: usize, first: usize, second: usize },
    /// Every action earns the same expected score at every grid belief; the
    /// rule cannot discriminate responses and is unusable for evaluation.
    Flat,
}

impl NonIndifferenceVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, NonIndifferenceVerdict::Pass { .. })
    }
}

pub fn check_non_indifference(table: &ScoreTable, grid: &BeliefGrid) -> NonIndifferenceVerdict {
    for (k, belief) in grid.points().iter().enumerate() {
        let values = expected_scores(table, belief);
        for a in 1..values.len() {
            if (values[a] - values[0]).abs() > 1e-12 {
                return NonIndifferenceVerdict::Pass {
                    belief: k,
                    first: 0,
                    second: a,
                };
            }
        }
    }
    NonIndifferenceVerdict::Flat
}
