//! Well-definedness audit of a decision problem as disclosed to participants.
//!
//! The audit asks whether a rational participant could, in principle,
//! identify the optimal response from what they are told. The verdict comes
//! from an ordered rule table ([`RULE_TABLE`]); the first rule that fires
//! decides it and every rule's outcome is kept in the report.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::BeliefGrid;
use crate::normative::{check_non_indifference, is_proper, optimal_action, Benchmarks};
use crate::polytope::{enumerate_vertices, residual};
use crate::problem::{
    parse_conditioning, ActionKind, Belief, Conditioning, DecisionProblem, InformationStructure, RuleChoice,
    StatisticKind,
};

/// Tolerance when comparing disclosed statistics to the true joint.
pub const DISCLOSURE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum AuditError {
    #[error("multiplicity analysis needs two states and two prediction signals; problem has {states} states and {signals} signals")]
    NotBinaryPrediction { states: usize, signals: usize },
    #[error("disclosed statistics admit no joint distribution")]
    InfeasibleDisclosure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    WellDefined,
    IllDefined,
    Degenerate,
}

/// How a well-defined problem lets participants reach the optimal response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    PosteriorRevealed,
    PriorAndLikelihoods,
    JointPinnedByStatistics,
    LearnableInTheLimit,
}

/// Ordered well-definedness rules: (code, verdict when fired, description).
pub const RULE_TABLE: [(&str, &str, &str); 6] = [
    (
        "D1_NO_DECISION_AT_STAKE",
        "degenerate",
        "the incentive-optimal action is the same at every reachable posterior and the signal has zero value",
    ),
    (
        "W1_POSTERIOR_REVEALED",
        "well_defined",
        "each signal states the posterior, directly or as prediction-conditional confidence for every signal",
    ),
    (
        "W2_PRIOR_AND_LIKELIHOODS",
        "well_defined",
        "the prior is endowed and the likelihoods are disclosed, so Bayes' rule yields the posterior",
    ),
    (
        "W3_JOINT_PINNED_BY_STATISTICS",
        "well_defined",
        "the disclosed prior and aggregate statistics admit exactly one joint distribution",
    ),
    (
        "W4_LEARNABLE_FROM_FEEDBACK",
        "well_defined (learnable in the limit)",
        "trial-by-trial feedback on the realized state lets participants learn the joint over time",
    ),
    (
        "I1_INSUFFICIENT_INFORMATION",
        "ill_defined",
        "none of the above: participants cannot recover the posterior from what they are told",
    ),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub code: String,
    pub fired: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Definability {
    Definable,
    Undefinable { reason: String },
}

impl Definability {
    fn from(condition: bool, reason: &str) -> Self {
        if condition {
            Definability::Definable
        } else {
            Definability::Undefinable { reason: reason.into() }
        }
    }

    pub fn is_definable(&self) -> bool {
        matches!(self, Definability::Definable)
    }
}

/// Whether each of the four loss sources can be conceived for this design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossLedger {
    pub prior: Definability,
    pub receiver: Definability,
    pub updating: Definability,
    pub optimization: Definability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Warning {
    pub code: String,
    pub message: String,
}

impl Warning {
    fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub verdict: Verdict,
    pub basis: Option<Basis>,
    /// Outcome of every rule in table order.
    pub rules: Vec<RuleOutcome>,
    /// Why the verdict is not well-defined; empty otherwise.
    pub reasons: Vec<Warning>,
    pub loss_ledger: LossLedger,
    pub warnings: Vec<Warning>,
    pub notes: Vec<String>,
    pub value_of_information: f64,
}

impl AuditReport {
    pub fn has_warning(&self, code: &str) -> bool {
        self.warnings.iter().any(|w| w.code == code)
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = serde_json::to_value(self.verdict).unwrap_or_default();
        write!(f, "verdict: {}", verdict.as_str().unwrap_or("?"))?;
        if let Some(basis) = self.basis {
            let basis = serde_json::to_value(basis).unwrap_or_default();
            write!(f, " ({})", basis.as_str().unwrap_or("?"))?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "value of information (incentive rule): {:.6}",
            self.value_of_information
        )?;
        writeln!(f, "rules:")?;
        for r in &self.rules {
            writeln!(f, "  [{}] {}: {}", if r.fired { "x" } else { " " }, r.code, r.message)?;
        }
        for r in &self.reasons {
            writeln!(f, "reason {}: {}", r.code, r.message)?;
        }
        writeln!(f, "loss ledger:")?;
        let ledger = [
            ("prior", &self.loss_ledger.prior),
            ("receiver", &self.loss_ledger.receiver),
            ("updating", &self.loss_ledger.updating),
            ("optimization", &self.loss_ledger.optimization),
        ];
        for (name, d) in ledger {
            match d {
                Definability::Definable => writeln!(f, "  {name:<13} definable")?,
                Definability::Undefinable { reason } => writeln!(f, "  {name:<13} undefinable: {reason}")?,
            }
        }
        for w in &self.warnings {
            writeln!(f, "warning {}: {}", w.code, w.message)?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

fn is_prediction_setting(problem: &DecisionProblem) -> bool {
    problem.n_states() == problem.n_signals()
}

/// Signals whose prediction-conditional confidence is disclosed.
fn confidence_signals(problem: &DecisionProblem) -> Vec<usize> {
    problem
        .disclosure()
        .aggregate_stats
        .iter()
        .filter_map(|s| match parse_conditioning(s, problem.states(), problem.signals()) {
            Ok(Some(Conditioning::Signal(v))) => Some(v),
            _ => None,
        })
        .collect()
}

fn class_accuracy_states(problem: &DecisionProblem) -> Vec<usize> {
    problem
        .disclosure()
        .aggregate_stats
        .iter()
        .filter_map(|s| match parse_conditioning(s, problem.states(), problem.signals()) {
            Ok(Some(Conditioning::State(t))) => Some(t),
            _ => None,
        })
        .collect()
}

fn posterior_revealed(problem: &DecisionProblem) -> bool {
    if problem.disclosure().posterior_in_signal {
        return true;
    }
    let disclosed = confidence_signals(problem);
    problem.n_states() == 2
        && is_prediction_setting(problem)
        && (0..problem.n_signals()).all(|v| disclosed.contains(&v))
}

fn likelihoods_known(problem: &DecisionProblem) -> bool {
    if problem.disclosure().likelihoods_disclosed {
        return true;
    }
    // In a binary prediction setting, per-class accuracies are the likelihoods.
    let disclosed = class_accuracy_states(problem);
    problem.n_states() == 2 && is_prediction_setting(problem) && (0..2).all(|t| disclosed.contains(&t))
}

fn prior_known(problem: &DecisionProblem) -> bool {
    problem.disclosure().prior_endowed
}

/// The incentive-optimal action is constant over reachable posteriors and Δ = 0.
pub fn is_degenerate(problem: &DecisionProblem) -> bool {
    let table = problem.incentive_table();
    let info = problem.info();
    let mut actions = info
        .reachable_signals()
        .map(|v| optimal_action(table, &info.posterior(v).expect("reachable")).0);
    let first = actions.next();
    let constant = actions.all(|a| Some(a) == first);
    let delta = Benchmarks::compute(problem, RuleChoice::Incentive).value_of_information;
    constant && delta.abs() <= 1e-12
}

/// Applies the rule table and builds the loss ledger and warnings.
pub fn audit_problem(problem: &DecisionProblem) -> AuditReport {
    let disclosure = problem.disclosure();
    let delta = Benchmarks::compute(problem, RuleChoice::Incentive).value_of_information;
    let degenerate = is_degenerate(problem);
    let posterior = posterior_revealed(problem);
    let prior = prior_known(problem);
    let likelihoods = likelihoods_known(problem);
    let pinned = matches!(multiplicity_check(problem), Ok(m) if m.is_unique());
    let feedback = disclosure.feedback_after_trial;

    let conditions = [degenerate, posterior, prior && likelihoods, pinned, feedback];
    let fired_index = conditions.iter().position(|c| *c).unwrap_or(5);
    let (verdict, basis) = match fired_index {
        0 => (Verdict::Degenerate, None),
        1 => (Verdict::WellDefined, Some(Basis::PosteriorRevealed)),
        2 => (Verdict::WellDefined, Some(Basis::PriorAndLikelihoods)),
        3 => (Verdict::WellDefined, Some(Basis::JointPinnedByStatistics)),
        4 => (Verdict::WellDefined, Some(Basis::LearnableInTheLimit)),
        _ => (Verdict::IllDefined, None),
    };
    let rules = RULE_TABLE
        .iter()
        .enumerate()
        .map(|(i, (code, _, description))| RuleOutcome {
            code: (*code).into(),
            fired: i == fired_index,
            message: (*description).into(),
        })
        .collect();

    let mut reasons = Vec::new();
    match verdict {
        Verdict::Degenerate => reasons.push(Warning::new(
            "D1_NO_DECISION_AT_STAKE",
            "the response cannot change the expected payoff given any signal, so no loss source can be conceived",
        )),
        Verdict::IllDefined => {
            if !prior {
                reasons.push(Warning::new("MISSING_PRIOR", "the prior over states is not endowed"));
            }
            if !likelihoods {
                reasons.push(Warning::new(
                    "MISSING_LIKELIHOODS",
                    "the likelihood of each signal given the state is not disclosed",
                ));
            }
            if !posterior {
                reasons.push(Warning::new(
                    "POSTERIOR_NOT_REVEALED",
                    "signals do not state the posterior over states",
                ));
            }
            if !feedback {
                reasons.push(Warning::new(
                    "NO_FEEDBACK",
                    "no per-trial feedback from which to learn the joint",
                ));
            }
            if disclosure
                .aggregate_stats
                .iter()
                .any(|s| s.statistic == StatisticKind::ConfidenceConditionalOnFeatures)
            {
                reasons.push(Warning::new(
                    "FEATURE_CONDITIONAL_CONFIDENCE",
                    "confidence conditional on features alone, not on the prediction, does not identify the posterior",
                ));
            }
        }
        Verdict::WellDefined => {}
    }

    let incentive_flat =
        !check_non_indifference(problem.incentive_table(), &BeliefGrid::default_for(problem.n_states())).passed();
    let loss_ledger = LossLedger {
        prior: if posterior && !prior && !pinned {
            Definability::Undefinable {
                reason: "the posterior is supplied directly; no prior enters the normative response".into(),
            }
        } else {
            Definability::from(
                prior || pinned,
                "no normative prior is endowed or pinned down by disclosure",
            )
        },
        receiver: Definability::from(
            delta > 1e-12,
            "signals carry no decision-relevant information (zero value of information)",
        ),
        updating: if posterior && !(prior && likelihoods) && !pinned {
            Definability::Undefinable {
                reason: "the posterior is supplied directly; there is no updating step".into(),
            }
        } else {
            Definability::from(
                (prior && likelihoods) || pinned,
                "prior and likelihoods are not both pinned down",
            )
        },
        optimization: Definability::from(
            !incentive_flat,
            "the incentive rule is flat, so every response is optimal",
        ),
    };

    let mut warnings = Vec::new();
    if basis == Some(Basis::LearnableInTheLimit) {
        warnings.push(Warning::new(
            "LEARNABLE_IN_THE_LIMIT",
            "the joint is only learnable from feedback; early trials are ambiguous",
        ));
    }
    if delta <= 1e-12 {
        warnings.push(Warning::new(
            "ZERO_VALUE_OF_INFORMATION",
            "the signal cannot raise the expected incentive score",
        ));
    }
    if incentive_flat {
        warnings.push(Warning::new(
            "FLAT_INCENTIVE_RULE",
            "the incentive rule does not distinguish any responses",
        ));
    }
    if !check_non_indifference(problem.evaluation_table(), &BeliefGrid::default_for(problem.n_states())).passed() {
        warnings.push(Warning::new(
            "FLAT_EVALUATION_RULE",
            "the evaluation rule cannot be used to rank responses",
        ));
    }
    if !disclosure.scoring_rule_communicated {
        warnings.push(Warning::new(
            "RULE_NOT_COMMUNICATED",
            "participants are not told the scoring rule",
        ));
    }
    warnings.extend(incentive_evaluation_consistency(problem).warnings);
    warnings.extend(deception_screen(problem));

    AuditReport {
        verdict,
        basis,
        rules,
        reasons,
        loss_ledger,
        warnings,
        notes: vec![
            "misunderstanding of the task can contribute to every loss source and is not measurable from responses; \
             loss estimates test a joint hypothesis that includes task comprehension"
                .into(),
        ],
        value_of_information: delta,
    }
}

/// Result of comparing the optimal actions of the incentive and evaluation rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleConsistency {
    pub warnings: Vec<Warning>,
    pub note: Option<String>,
    /// Grid beliefs at which the two rules' optimal actions differ.
    pub disagreement: Vec<Belief>,
}

pub fn incentive_evaluation_consistency(problem: &DecisionProblem) -> RuleConsistency {
    let mut out = RuleConsistency {
        warnings: Vec::new(),
        note: None,
        disagreement: Vec::new(),
    };
    if problem.rules_identical() {
        return out;
    }
    if let (ActionKind::BeliefReport, Some(reports)) = (problem.actions().kind(), problem.actions().reports()) {
        let report_grid = BeliefGrid::from_points(reports.to_vec());
        if is_proper(problem.incentive_table(), &report_grid).is_proper() {
            out.note =
                Some("incentive rule is proper; reported beliefs are transferable to the evaluation rule".into());
            return out;
        }
    }
    let grid = BeliefGrid::default_for(problem.n_states());
    out.disagreement = grid
        .points()
        .iter()
        .filter(|b| optimal_action(problem.incentive_table(), b).0 != optimal_action(problem.evaluation_table(), b).0)
        .cloned()
        .collect();
    if !out.disagreement.is_empty() {
        let region = if problem.n_states() == 2 {
            let qs: Vec<f64> = out.disagreement.iter().map(|b| b.probs()[1]).collect();
            format!(
                " (q({}) from {:.2} to {:.2} on the grid)",
                problem.states().label(1),
                qs[0],
                qs[qs.len() - 1]
            )
        } else {
            String::new()
        };
        out.warnings.push(Warning::new(
            "MISMATCHED_RULES",
            format!(
                "incentive and evaluation rules prescribe different actions at {} of {} grid beliefs{region}",
                out.disagreement.len(),
                grid.len()
            ),
        ));
    }
    out
}

/// Value of a disclosed statistic under the true joint, when computable.
fn implied_statistic(problem: &DecisionProblem, stat: &crate::problem::AggregateStat) -> Option<f64> {
    if !is_prediction_setting(problem) {
        return None;
    }
    let info = problem.info();
    let n = problem.n_states();
    match (
        stat.statistic,
        parse_conditioning(stat, problem.states(), problem.signals()).ok()?,
    ) {
        (StatisticKind::UnconditionalAccuracy, _) => Some((0..n).map(|i| info.mass(i, i)).sum()),
        (StatisticKind::ClassConditionalAccuracy, Some(Conditioning::State(t))) => {
            let p = info.marginal_prior().probs()[t];
            (p > 0.0).then(|| info.mass(t, t) / p)
        }
        (StatisticKind::ConfidenceConditionalOnPrediction, Some(Conditioning::Signal(v))) => {
            info.posterior(v).ok().map(|q| q.probs()[v])
        }
        _ => None,
    }
}

/// Flags disclosure that misdescribes the payoff structure or the joint.
pub fn deception_screen(problem: &DecisionProblem) -> Vec<Warning> {
    let mut out = Vec::new();
    let table = problem.incentive_table();
    let disclosure = problem.disclosure();
    if problem.n_states() >= 2 && !disclosure.null_actions_disclosed {
        for j in 1..table.n_actions() {
            let reference = (0..j).find(|i| {
                let diffs: Vec<f64> = (0..problem.n_states())
                    .map(|s| table.score(j, s) - table.score(*i, s))
                    .collect();
                diffs.iter().all(|d| (d - diffs[0]).abs() <= 1e-12)
            });
            if let Some(i) = reference {
                out.push(Warning::new(
                    "DISCLOSURE_AMBIGUOUS",
                    format!(
                        "choosing '{}' instead of '{}' shifts the payoff by a state-independent amount, \
                         and participants are not told that this action leaves the outcome unaffected",
                        problem.actions().label(j),
                        problem.actions().label(i)
                    ),
                ));
            }
        }
    }
    if disclosure.feedback_after_trial {
        for stat in &disclosure.aggregate_stats {
            if let Some(implied) = implied_statistic(problem, stat) {
                if (implied - stat.value).abs() > DISCLOSURE_TOLERANCE {
                    out.push(Warning::new(
                        "FEEDBACK_CONTRADICTION",
                        format!(
                            "disclosed {:?} {} but the joint implies {:.6}; feedback will contradict the instructions",
                            stat.statistic, stat.value, implied
                        ),
                    ));
                }
            }
        }
    }
    out
}

/// Posterior range for one signal over all joints consistent with disclosure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalBounds {
    pub signal: String,
    /// Bounds on π′(second state | signal); `None` when no consistent joint
    /// gives the signal positive mass.
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub action_at_min: Option<String>,
    pub action_at_max: Option<String>,
    pub action_flips: bool,
    pub min_witness: Option<InformationStructure>,
    pub max_witness: Option<InformationStructure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityResult {
    /// Human-readable constraints that define the consistent joints.
    pub constraints: Vec<String>,
    /// Disclosed statistics that carry no linear constraint on the joint.
    pub ignored_statistics: Vec<String>,
    pub vertices: Vec<InformationStructure>,
    pub signals: Vec<SignalBounds>,
    #[serde(skip)]
    system: (Vec<Vec<f64>>, Vec<f64>),
}

impl MultiplicityResult {
    /// Disclosure pins the joint down to a single distribution.
    pub fn is_unique(&self) -> bool {
        self.vertices.len() == 1
    }

    pub fn any_flip(&self) -> bool {
        self.signals.iter().any(|s| s.action_flips)
    }

    /// Largest constraint violation of `joint`, including negativity.
    pub fn constraint_residual(&self, joint: &InformationStructure) -> f64 {
        let x: Vec<f64> = joint.rows().iter().flatten().copied().collect();
        let negativity = x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
        residual(&self.system.0, &self.system.1, &x).max(negativity)
    }

    pub fn bounds_for(&self, signal: &str) -> Option<&SignalBounds> {
        self.signals.iter().find(|s| s.signal == signal)
    }
}

/// Bounds the posterior of each signal over every joint consistent with what
/// participants are told, for binary states with prediction signals (signal
/// i predicts state i). Consistent joints form a polytope; its vertices are
/// enumerated and the posterior extremes are attained at vertices.
pub fn multiplicity_check(problem: &DecisionProblem) -> Result<MultiplicityResult, AuditError> {
    if problem.n_states() != 2 || problem.n_signals() != 2 {
        return Err(AuditError::NotBinaryPrediction {
            states: problem.n_states(),
            signals: problem.n_signals(),
        });
    }
    // variable index v*2 + θ
    let idx = |v: usize, t: usize| v * 2 + t;
    let disclosure = problem.disclosure();
    let info = problem.info();
    let state = |t: usize| problem.states().label(t).to_owned();
    let signal = |v: usize| problem.signals().label(v).to_owned();
    let mut a: Vec<Vec<f64>> = vec![vec![1.0; 4]];
    let mut b: Vec<f64> = vec![1.0];
    let mut constraints = vec!["total mass 1".to_string()];
    let mut ignored = Vec::new();

    if disclosure.prior_endowed {
        let p = problem
            .endowed_prior()
            .cloned()
            .unwrap_or_else(|| info.marginal_prior());
        let mut row = vec![0.0; 4];
        row[idx(0, 1)] = 1.0;
        row[idx(1, 1)] = 1.0;
        a.push(row);
        b.push(p.probs()[1]);
        constraints.push(format!("prior p({}) = {}", state(1), p.probs()[1]));
    }
    if disclosure.likelihoods_disclosed {
        for t in 0..2 {
            if let Ok(lik) = info.likelihood(t) {
                // π(0,t) = L(0|t)·(π(0,t) + π(1,t))
                let mut row = vec![0.0; 4];
                row[idx(0, t)] = 1.0 - lik[0];
                row[idx(1, t)] = -lik[0];
                a.push(row);
                b.push(0.0);
                constraints.push(format!("likelihood Pr({}|{}) = {}", signal(0), state(t), lik[0]));
            }
        }
    }
    if disclosure.posterior_in_signal {
        for v in info.reachable_signals().collect::<Vec<_>>() {
            let q = info.posterior(v).expect("reachable").probs()[1];
            let mut row = vec![0.0; 4];
            row[idx(v, 1)] = 1.0 - q;
            row[idx(v, 0)] = -q;
            a.push(row);
            b.push(0.0);
            constraints.push(format!("posterior q({}|{}) = {}", state(1), signal(v), q));
        }
    }
    for stat in &disclosure.aggregate_stats {
        let conditioning = parse_conditioning(stat, problem.states(), problem.signals())
            .ok()
            .flatten();
        let mut row = vec![0.0; 4];
        match (stat.statistic, conditioning) {
            (StatisticKind::UnconditionalAccuracy, _) => {
                row[idx(0, 0)] = 1.0;
                row[idx(1, 1)] = 1.0;
                a.push(row);
                b.push(stat.value);
                constraints.push(format!("unconditional accuracy = {}", stat.value));
            }
            (StatisticKind::ClassConditionalAccuracy, Some(Conditioning::State(t))) => {
                // π(t,t) = value·(π(0,t) + π(1,t))
                row[idx(t, t)] += 1.0;
                row[idx(0, t)] -= stat.value;
                row[idx(1, t)] -= stat.value;
                a.push(row);
                b.push(0.0);
                constraints.push(format!("accuracy given {} = {}", state(t), stat.value));
            }
            (StatisticKind::ConfidenceConditionalOnPrediction, Some(Conditioning::Signal(v))) => {
                // π(v,v) = value·(π(v,0) + π(v,1))
                row[idx(v, v)] += 1.0;
                row[idx(v, 0)] -= stat.value;
                row[idx(v, 1)] -= stat.value;
                a.push(row);
                b.push(0.0);
                constraints.push(format!("confidence given prediction {} = {}", signal(v), stat.value));
            }
            (kind, _) => ignored.push(format!("{kind:?} = {} ({})", stat.value, stat.conditioning)),
        }
    }

    let raw = enumerate_vertices(&a, &b, 4);
    if raw.is_empty() {
        return Err(AuditError::InfeasibleDisclosure);
    }
    let to_joint = |x: &[f64]| InformationStructure::from_rows_unchecked(vec![x[0..2].to_vec(), x[2..4].to_vec()]);
    let vertices: Vec<InformationStructure> = raw.iter().map(|x| to_joint(x)).collect();

    let table = problem.incentive_table();
    let signals = (0..2)
        .map(|v| {
            let mut lo: Option<(f64, usize)> = None;
            let mut hi: Option<(f64, usize)> = None;
            for (k, joint) in vertices.iter().enumerate() {
                let Ok(q) = joint.posterior(v) else { continue };
                if joint.signal_marginal()[v] <= 1e-12 {
                    continue;
                }
                let q1 = q.probs()[1];
                if lo.is_none_or(|(m, _)| q1 < m) {
                    lo = Some((q1, k));
                }
                if hi.is_none_or(|(m, _)| q1 > m) {
                    hi = Some((q1, k));
                }
            }
            let action = |q1: f64| optimal_action(table, &Belief::from_vec_unchecked(vec![1.0 - q1, q1])).0;
            let at_min = lo.map(|(q, _)| action(q));
            let at_max = hi.map(|(q, _)| action(q));
            SignalBounds {
                signal: signal(v),
                min: lo.map(|(q, _)| q),
                max: hi.map(|(q, _)| q),
                action_at_min: at_min.map(|a| problem.actions().label(a).to_owned()),
                action_at_max: at_max.map(|a| problem.actions().label(a).to_owned()),
                action_flips: at_min != at_max,
                min_witness: lo.map(|(_, k)| vertices[k].clone()),
                max_witness: hi.map(|(_, k)| vertices[k].clone()),
            }
        })
        .collect();

    Ok(MultiplicityResult {
        constraints,
        ignored_statistics: ignored,
        vertices,
        signals,
        system: (a, b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const RECID: &str = r#"{"table":[[0.2,-0.2],[-1.0,0.5]]}"#;

    fn recid(joint: &str, disclosure: &str, prior: Option<&str>) -> DecisionProblem {
        let prior = prior.map(|p| format!(r#","endowed_prior":{p}"#)).unwrap_or_default();
        DecisionProblem::from_json(&format!(
            r#"{{"states":["not_recid","recid"],"actions":["release","detain"],
                "signals":["pred_not","pred_recid"],"joint":{joint},"incentive_rule":{RECID},
                "disclosure":{disclosure}{prior}}}"#
        ))
        .unwrap()
    }

    fn accuracy_problem(acc: f64) -> DecisionProblem {
        // all-FP joint with the given accuracy and prior 0.5
        let joint = format!("[[{},0.0],[{},0.5]]", acc - 0.5, 1.0 - acc);
        recid(
            &joint,
            &format!(
                r#"{{"prior_endowed":true,"aggregate_stats":[{{"statistic":"unconditional_accuracy","value":{acc}}}]}}"#
            ),
            Some("[0.5,0.5]"),
        )
    }

    #[test]
    fn accuracy_seventy_flips_the_release_decision() {
        let m = multiplicity_check(&accuracy_problem(0.7)).unwrap();
        assert_eq!(m.vertices.len(), 2);
        let b = m.bounds_for("pred_recid").unwrap();
        assert!((b.min.unwrap() - 0.625).abs() < 1e-12);
        assert!((b.max.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(b.action_at_min.as_deref(), Some("release"));
        assert_eq!(b.action_at_max.as_deref(), Some("detain"));
        assert!(b.action_flips);
        let fp = b.min_witness.as_ref().unwrap();
        let fn_ = b.max_witness.as_ref().unwrap();
        assert_eq!(fp.mass(0, 1), 0.0);
        assert!((fp.mass(1, 0) - 0.3).abs() < 1e-12);
        assert_eq!(fn_.mass(1, 0), 0.0);
        assert!((fn_.mass(0, 1) - 0.3).abs() < 1e-12);
        for w in [fp, fn_] {
            assert!(m.constraint_residual(w) < 1e-9);
        }
    }

    #[test]
    fn accuracy_eighty_has_multiplicity_without_flip() {
        let m = multiplicity_check(&accuracy_problem(0.8)).unwrap();
        let b = m.bounds_for("pred_recid").unwrap();
        assert!((b.min.unwrap() - 0.5 / 0.7).abs() < 1e-12);
        assert!(b.max.unwrap() > b.min.unwrap());
        assert!(!b.action_flips);
        assert!(!m.is_unique());
    }

    #[test]
    fn perfect_accuracy_pins_the_joint() {
        let m = multiplicity_check(&accuracy_problem(1.0)).unwrap();
        assert!(m.is_unique());
        for b in &m.signals {
            assert_eq!(b.min, b.max);
            assert!(!b.action_flips);
        }
    }

    #[test]
    fn contradictory_statistics_are_infeasible() {
        let p = recid(
            "[[0.4,0.1],[0.1,0.4]]",
            r#"{"aggregate_stats":[{"statistic":"unconditional_accuracy","value":0.7},
                                   {"statistic":"unconditional_accuracy","value":0.8}]}"#,
            None,
        );
        assert_eq!(multiplicity_check(&p).unwrap_err(), AuditError::InfeasibleDisclosure);
    }

    #[test]
    fn multiplicity_needs_binary_prediction() {
        let p = DecisionProblem::from_json(
            r#"{"states":["a","b","c"],"actions":["x"],"signals":["u","v"],
                "joint":[[0.2,0.2,0.1],[0.1,0.2,0.2]],"incentive_rule":{"table":[[1,0,0]]}}"#,
        )
        .unwrap();
        assert!(matches!(
            multiplicity_check(&p),
            Err(AuditError::NotBinaryPrediction { .. })
        ));
    }

    #[test]
    fn feature_conditional_confidence_is_ill_defined() {
        let p = recid(
            "[[0.4,0.1],[0.1,0.4]]",
            r#"{"scoring_rule_communicated":true,"aggregate_stats":[
                {"statistic":"unconditional_accuracy","value":0.8},
                {"statistic":"confidence_conditional_on_features","value":0.75,"conditioning":"features x"}]}"#,
            None,
        );
        let report = audit_problem(&p);
        assert_eq!(report.verdict, Verdict::IllDefined);
        assert!(report
            .reasons
            .iter()
            .any(|r| r.code == "FEATURE_CONDITIONAL_CONFIDENCE"));
        assert!(report.rules.last().unwrap().fired);
    }

    #[test]
    fn prediction_conditional_confidence_is_well_defined() {
        let p = recid(
            "[[0.4,0.1],[0.1,0.4]]",
            r#"{"scoring_rule_communicated":true,"aggregate_stats":[
                {"statistic":"confidence_conditional_on_prediction","value":0.8,"conditioning":"signal:pred_not"},
                {"statistic":"confidence_conditional_on_prediction","value":0.8,"conditioning":"signal:pred_recid"}]}"#,
            None,
        );
        let report = audit_problem(&p);
        assert_eq!(report.verdict, Verdict::WellDefined);
        assert_eq!(report.basis, Some(Basis::PosteriorRevealed));
        assert!(!report.loss_ledger.updating.is_definable());
        assert!(report.loss_ledger.receiver.is_definable());
    }

    #[test]
    fn feedback_only_is_learnable_in_the_limit() {
        let p = recid("[[0.4,0.1],[0.1,0.4]]", r#"{"feedback_after_trial":true}"#, None);
        let report = audit_problem(&p);
        assert_eq!(report.verdict, Verdict::WellDefined);
        assert_eq!(report.basis, Some(Basis::LearnableInTheLimit));
        assert!(report.has_warning("LEARNABLE_IN_THE_LIMIT"));
    }

    #[test]
    fn voting_without_cost_is_degenerate_and_ambiguous() {
        let p = DecisionProblem::from_json(
            r#"{"states":["lose","win"],"actions":["abstain","vote"],"signals":["behind","close","ahead"],
                "joint":[[0.3,0.05],[0.15,0.15],[0.05,0.3]],"incentive_rule":{"table":[[0.0,0.25],[0.0,0.25]]},
                "disclosure":{"posterior_in_signal":true}}"#,
        )
        .unwrap();
        let report = audit_problem(&p);
        assert_eq!(report.verdict, Verdict::Degenerate);
        assert!(!report.loss_ledger.receiver.is_definable());
        assert!(!report.loss_ledger.optimization.is_definable());
        let flags = deception_screen(&p);
        assert_eq!(flags.len(), 1);
        assert!(flags[0].message.contains("'vote'"));
        let disclosed = p.with_disclosure(crate::problem::DisclosureSpec {
            null_actions_disclosed: true,
            ..p.disclosure().clone()
        });
        assert!(deception_screen(&disclosed).is_empty());
    }

    #[test]
    fn feedback_contradiction_is_flagged() {
        // implied accuracy 0.2 + 0.425 = 0.625
        let p = recid(
            "[[0.2,0.075],[0.3,0.425]]",
            r#"{"feedback_after_trial":true,"aggregate_stats":[{"statistic":"unconditional_accuracy","value":0.9}]}"#,
            None,
        );
        let flags = deception_screen(&p);
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].code, "FEEDBACK_CONTRADICTION");
        let consistent = recid(
            "[[0.2,0.075],[0.3,0.425]]",
            r#"{"feedback_after_trial":true,"aggregate_stats":[{"statistic":"unconditional_accuracy","value":0.625}]}"#,
            None,
        );
        assert!(deception_screen(&consistent).is_empty());
    }

    #[test]
    fn mismatched_rules_disagree_between_half_and_threshold() {
        let p = DecisionProblem::from_json(&format!(
            r#"{{"states":["not_recid","recid"],"actions":["release","detain"],"signals":["s"],
                "joint":[[0.5,0.5]],"incentive_rule":{RECID},"evaluation_rule":{{"table":[[0,-0.5],[-0.5,0]]}}}}"#
        ))
        .unwrap();
        let c = incentive_evaluation_consistency(&p);
        assert_eq!(c.warnings[0].code, "MISMATCHED_RULES");
        let qs: Vec<f64> = c.disagreement.iter().map(|b| b.probs()[1]).collect();
        assert!((qs[0] - 0.51).abs() < 1e-12);
        assert!((qs[qs.len() - 1] - 0.63).abs() < 1e-12);
        assert!(qs.iter().all(|q| *q > 0.5 && *q < 12.0 / 19.0));
        assert_eq!(qs.len(), 13);
    }

    #[test]
    fn identical_or_proper_incentives_are_consistent() {
        let same = recid("[[0.4,0.1],[0.1,0.4]]", "{}", None);
        assert!(incentive_evaluation_consistency(&same).warnings.is_empty());
        let p = DecisionProblem::from_json(
            r#"{"states":["not_recid","recid"],"actions":{"belief_report":{}},"signals":["s"],
                "joint":[[0.5,0.5]],"incentive_rule":"quadratic","evaluation_rule":{"logarithmic":{}}}"#,
        )
        .unwrap();
        let c = incentive_evaluation_consistency(&p);
        assert!(c.warnings.is_empty());
        assert!(c.note.is_some());
    }
}
