//! Decision problems and their information structures.
//!
//! A decision problem is the tuple of a finite state space, an action space,
//! a signal space, a joint distribution over signals and states, and the
//! scoring rules used to incentivize and to evaluate responses. Problems are
//! read from a JSON document ([`ProblemSpec`]), checked by
//! [`validate_problem`], and turned into an immutable [`DecisionProblem`].

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ProblemError;
use crate::grid::BeliefGrid;

/// Tolerance used when validating user-supplied probability vectors.
pub const INPUT_TOLERANCE: f64 = 1e-9;

/// Tolerance used for internal probability identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Ordered, duplicate-free set of labels addressable by name or index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelSet(Vec<String>);

impl LabelSet {
    pub fn new<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(labels.into_iter().map(Into::into).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn label(&self, index: usize) -> &str {
        &self.0[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }

    fn first_duplicate(&self) -> Option<&str> {
        let mut seen = HashSet::new();
        self.0.iter().find(|l| !seen.insert(l.as_str())).map(String::as_str)
    }
}

/// Finite set of mutually exclusive payoff-relevant states.
pub type StateSpace = LabelSet;

/// Finite set of signals shown to the agent.
pub type SignalSpace = LabelSet;

/// How an action space is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Discrete,
    BeliefReport,
}

/// Finite action space. Belief-report spaces carry the grid belief that each
/// action reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    labels: LabelSet,
    reports: Option<Vec<Belief>>,
}

impl ActionSpace {
    pub fn discrete<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            labels: LabelSet::new(labels),
            reports: None,
        }
    }

    pub fn belief_report(grid: &BeliefGrid) -> Self {
        let reports: Vec<Belief> = grid.points().to_vec();
        let labels = LabelSet::new(reports.iter().map(|b| b.to_string()));
        Self {
            labels,
            reports: Some(reports),
        }
    }

    pub fn kind(&self) -> ActionKind {
        if self.reports.is_some() {
            ActionKind::BeliefReport
        } else {
            ActionKind::Discrete
        }
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> &str {
        self.labels.label(index)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.index_of(label)
    }

    /// Reported beliefs, one per action, for belief-report spaces.
    pub fn reports(&self) -> Option<&[Belief]> {
        self.reports.as_deref()
    }
}

/// Probability vector over the state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self, ProblemError> {
        if probs.is_empty() {
            return Err(ProblemError::InvalidBelief("empty probability vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(ProblemError::InvalidBelief(format!("entry {p} is not a probability")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > INPUT_TOLERANCE {
            return Err(ProblemError::InvalidBelief(format!("entries sum to {total}, not 1")));
        }
        Ok(Self(probs))
    }

    /// Normalizes nonnegative weights; `None` when the weights have no mass.
    pub fn from_weights(weights: Vec<f64>) -> Option<Self> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return None;
        }
        Some(Self(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, index: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Self(probs)
    }

    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs_diff(&self, other: &Belief) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for Belief {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p:.4}")?;
        }
        write!(f, "]")
    }
}

/// Joint distribution over signals (rows) and states (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InformationStructure {
    joint: Vec<Vec<f64>>,
}

impl InformationStructure {
    pub fn new(joint: Vec<Vec<f64>>) -> Result<Self, ProblemError> {
        let info = Self { joint };
        match info.violations().into_iter().next() {
            None => Ok(info),
            Some(v) => Err(ProblemError::InvalidJoint(v.message)),
        }
    }

    /// Product joint p(θ)·m(v): signals carry no information about the state.
    pub fn product(prior: &Belief, signal_marginal: &[f64]) -> Self {
        let joint = signal_marginal
            .iter()
            .map(|m| prior.probs().iter().map(|p| p * m).collect())
            .collect();
        Self { joint }
    }

    pub(crate) fn from_rows_unchecked(joint: Vec<Vec<f64>>) -> Self {
        Self { joint }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.joint
    }

    pub fn mass(&self, signal: usize, state: usize) -> f64 {
        self.joint[signal][state]
    }

    pub fn n_signals(&self) -> usize {
        self.joint.len()
    }

    pub fn n_states(&self) -> usize {
        self.joint.first().map_or(0, Vec::len)
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.joint.is_empty() || self.joint[0].is_empty() {
            out.push(Violation::new(ViolationCode::JointShapeMismatch, "joint is empty"));
            return out;
        }
        let width = self.joint[0].len();
        if self.joint.iter().any(|r| r.len() != width) {
            out.push(Violation::new(
                ViolationCode::JointShapeMismatch,
                "joint rows have unequal lengths",
            ));
            return out;
        }
        if self.joint.iter().flatten().any(|p| !p.is_finite()) {
            out.push(Violation::new(
                ViolationCode::JointNotFinite,
                "joint contains a non-finite entry",
            ));
            return out;
        }
        if let Some(p) = self.joint.iter().flatten().find(|p| **p < 0.0) {
            out.push(Violation::new(
                ViolationCode::JointNegative,
                format!("joint contains negative mass {p}"),
            ));
        }
        let total: f64 = self.joint.iter().flatten().sum();
        if (total - 1.0).abs() > INPUT_TOLERANCE {
            out.push(Violation::new(
                ViolationCode::JointNotNormalized,
                format!("joint has total mass {total}, expected 1"),
            ));
        }
        out
    }

    /// p(θ) = Σ_v π(v,θ).
    pub fn marginal_prior(&self) -> Belief {
        let mut prior = vec![0.0; self.n_states()];
        for row in &self.joint {
            for (acc, p) in prior.iter_mut().zip(row) {
                *acc += p;
            }
        }
        Belief::from_vec_unchecked(prior)
    }

    /// Pr(v) = Σ_θ π(v,θ).
    pub fn signal_marginal(&self) -> Vec<f64> {
        self.joint.iter().map(|row| row.iter().sum()).collect()
    }

    /// Pr(v|θ) = π(v,θ)/p(θ) as a vector over signals.
    pub fn likelihood(&self, state: usize) -> Result<Vec<f64>, ProblemError> {
        let p = self.marginal_prior().probs()[state];
        if p <= 0.0 {
            return Err(ProblemError::ZeroMassState(state));
        }
        Ok(self.joint.iter().map(|row| row[state] / p).collect())
    }

    /// Full likelihood matrix indexed (signal, state); zero-mass states get
    /// zero likelihood everywhere.
    pub fn likelihood_matrix(&self) -> Vec<Vec<f64>> {
        let prior = self.marginal_prior();
        self.joint
            .iter()
            .map(|row| {
                row.iter()
                    .zip(prior.probs())
                    .map(|(m, p)| if *p > 0.0 { m / p } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    /// π(θ|v) = π(v,θ) / Σ_θ π(v,θ).
    pub fn posterior(&self, signal: usize) -> Result<Belief, ProblemError> {
        let row = &self.joint[signal];
        let norm: f64 = row.iter().sum();
        if norm <= 0.0 {
            return Err(ProblemError::ZeroMassSignal(signal));
        }
        Ok(Belief::from_vec_unchecked(row.iter().map(|m| m / norm).collect()))
    }

    /// Posterior through Bayes' rule: prior × likelihood / Pr(v).
    pub fn posterior_via_bayes(&self, signal: usize) -> Result<Belief, ProblemError> {
        let pv = self.signal_marginal()[signal];
        if pv <= 0.0 {
            return Err(ProblemError::ZeroMassSignal(signal));
        }
        let prior = self.marginal_prior();
        let probs = prior
            .probs()
            .iter()
            .enumerate()
            .map(|(s, p)| {
                if *p > 0.0 {
                    let lik = self.joint[signal][s] / p;
                    lik * p / pv
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Belief::from_vec_unchecked(probs))
    }

    /// Signals with positive probability.
    pub fn reachable_signals(&self) -> impl Iterator<Item = usize> + '_ {
        self.joint
            .iter()
            .enumerate()
            .filter(|(_, row)| row.iter().sum::<f64>() > 0.0)
            .map(|(v, _)| v)
    }
}

/// Scoring rule as declared in a problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScoringRule {
    /// Explicit payoff table indexed (action, state).
    Table(Vec<Vec<f64>>),
    /// Quadratic (Brier) score 1 − Σ_k (p̂_k − 1[k=θ])² over belief reports.
    Quadratic,
    /// Logarithmic score ln(clip(p̂_θ, ε, 1−ε)) over belief reports.
    Logarithmic {
        #[serde(default = "default_log_epsilon")]
        epsilon: f64,
    },
}

fn default_log_epsilon() -> f64 {
    1e-4
}

impl ScoringRule {
    pub fn logarithmic() -> Self {
        Self::Logarithmic {
            epsilon: default_log_epsilon(),
        }
    }

    /// Resolves the rule into an (action, state) payoff table.
    pub fn tabulate(&self, actions: &ActionSpace, n_states: usize) -> Result<ScoreTable, ProblemError> {
        let invalid = |msg: String| ProblemError::InvalidRule(msg);
        match self {
            ScoringRule::Table(rows) => {
                if rows.len() != actions.len() || rows.iter().any(|r| r.len() != n_states) {
                    return Err(invalid(format!(
                        "table must be {}x{} (actions x states)",
                        actions.len(),
                        n_states
                    )));
                }
                if rows.iter().flatten().any(|s| !s.is_finite()) {
                    return Err(invalid("table contains a non-finite score".into()));
                }
                Ok(ScoreTable::new_unchecked(rows.clone()))
            }
            ScoringRule::Quadratic => {
                let reports = actions
                    .reports()
                    .ok_or_else(|| invalid("quadratic rule requires a belief-report action space".into()))?;
                Ok(ScoreTable::new_unchecked(
                    reports
                        .iter()
                        .map(|r| (0..n_states).map(|s| quadratic_score(r, s)).collect())
                        .collect(),
                ))
            }
            ScoringRule::Logarithmic { epsilon } => {
                if !(*epsilon > 0.0 && *epsilon < 0.5) {
                    return Err(invalid(format!("logarithmic epsilon {epsilon} outside (0, 0.5)")));
                }
                let reports = actions
                    .reports()
                    .ok_or_else(|| invalid("logarithmic rule requires a belief-report action space".into()))?;
                Ok(ScoreTable::new_unchecked(
                    reports
                        .iter()
                        .map(|r| (0..n_states).map(|s| log_score(r, s, *epsilon)).collect())
                        .collect(),
                ))
            }
        }
    }
}

pub fn quadratic_score(report: &Belief, state: usize) -> f64 {
    let miss: f64 = report
        .probs()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let target = if k == state { 1.0 } else { 0.0 };
            (p - target).powi(2)
        })
        .sum();
    1.0 - miss
}

pub fn log_score(report: &Belief, state: usize, epsilon: f64) -> f64 {
    report.probs()[state].clamp(epsilon, 1.0 - epsilon).ln()
}

/// Payoff matrix indexed (action, state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreTable {
    rows: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, ProblemError> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(ProblemError::InvalidRule(
                "score table must be a nonempty rectangle".into(),
            ));
        }
        if rows.iter().flatten().any(|s| !s.is_finite()) {
            return Err(ProblemError::InvalidRule("table contains a non-finite score".into()));
        }
        Ok(Self { rows })
    }

    pub(crate) fn new_unchecked(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    pub fn score(&self, action: usize, state: usize) -> f64 {
        self.rows[action][state]
    }

    pub fn row(&self, action: usize) -> &[f64] {
        &self.rows[action]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_actions(&self) -> usize {
        self.rows.len()
    }

    pub fn n_states(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// αS + β applied cellwise.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        Self {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|s| scale * s + shift).collect())
                .collect(),
        }
    }
}

/// Aggregate statistics a study may disclose to participants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    UnconditionalAccuracy,
    ClassConditionalAccuracy,
    ConfidenceConditionalOnFeatures,
    ConfidenceConditionalOnPrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateStat {
    pub statistic: StatisticKind,
    pub value: f64,
    /// `state:<label>` for class-conditional accuracy, `signal:<label>` for
    /// prediction-conditional confidence, free text otherwise.
    #[serde(default)]
    pub conditioning: String,
}

/// What participants are told about the data-generating process.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisclosureSpec {
    pub prior_endowed: bool,
    pub likelihoods_disclosed: bool,
    pub posterior_in_signal: bool,
    pub feedback_after_trial: bool,
    pub aggregate_stats: Vec<AggregateStat>,
    pub scoring_rule_communicated: bool,
    /// Instructions state which actions leave the state-dependent payoff
    /// unchanged (e.g. "your vote does not affect the outcome").
    pub null_actions_disclosed: bool,
}

/// Parsed form of a `conditioning` string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    State(usize),
    Signal(usize),
}

/// Action space as written in a problem file: a list of labels or a
/// belief-report grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionsSpec {
    Labels(Vec<String>),
    BeliefReport { belief_report: BeliefReportSpec },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeliefReportSpec {
    /// Grid denominator; defaults to 100 for two states and 20 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<u32>,
    /// Explicit report points, overriding `resolution`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
}

/// Problem file contents prior to validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub states: Vec<String>,
    pub actions: ActionsSpec,
    pub signals: Vec<String>,
    pub joint: Vec<Vec<f64>>,
    pub incentive_rule: ScoringRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation_rule: Option<ScoringRule>,
    #[serde(default)]
    pub disclosure: DisclosureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endowed_prior: Option<Vec<f64>>,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        serde_json::from_str(text).map_err(|e| ProblemError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem spec serializes")
    }

    /// Validates and converts into a [`DecisionProblem`].
    pub fn build(self) -> Result<DecisionProblem, ValidationReport> {
        let report = validate_problem(&self);
        if !report.is_valid() {
            return Err(report);
        }
        let n_states = self.states.len();
        let actions = resolve_actions(&self.actions, n_states).expect("validated action space");
        let incentive = self
            .incentive_rule
            .tabulate(&actions, n_states)
            .expect("validated incentive rule");
        let evaluation_rule = self.evaluation_rule.unwrap_or_else(|| self.incentive_rule.clone());
        let evaluation = evaluation_rule
            .tabulate(&actions, n_states)
            .expect("validated evaluation rule");
        Ok(DecisionProblem {
            states: LabelSet::new(self.states),
            actions,
            signals: LabelSet::new(self.signals),
            info: InformationStructure::from_rows_unchecked(self.joint),
            incentive_rule: self.incentive_rule,
            evaluation_rule,
            incentive,
            evaluation,
            disclosure: self.disclosure,
            endowed_prior: self.endowed_prior.map(Belief::from_vec_unchecked),
        })
    }
}

fn resolve_actions(spec: &ActionsSpec, n_states: usize) -> Result<ActionSpace, String> {
    match spec {
        ActionsSpec::Labels(labels) => Ok(ActionSpace::discrete(labels.clone())),
        ActionsSpec::BeliefReport { belief_report } => {
            if let Some(points) = &belief_report.points {
                let beliefs = points
                    .iter()
                    .map(|p| {
                        if p.len() != n_states {
                            return Err(format!("report point has {} entries, expected {n_states}", p.len()));
                        }
                        Belief::new(p.clone()).map_err(|e| e.to_string())
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(ActionSpace::belief_report(&BeliefGrid::from_points(beliefs)))
            } else {
                let resolution = belief_report
                    .resolution
                    .unwrap_or_else(|| BeliefGrid::default_resolution(n_states));
                if resolution == 0 {
                    return Err("belief grid resolution must be positive".into());
                }
                if n_states == 0 {
                    return Err("belief grid needs at least one state".into());
                }
                Ok(ActionSpace::belief_report(&BeliefGrid::simplex(n_states, resolution)))
            }
        }
    }
}

/// Machine-readable validation codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    EmptyStates,
    EmptySignals,
    EmptyActions,
    DuplicateLabel,
    InvalidBeliefGrid,
    JointShapeMismatch,
    JointNotFinite,
    JointNegative,
    JointNotNormalized,
    RuleShapeMismatch,
    RuleNotFinite,
    RuleInvalidEpsilon,
    RuleRequiresBeliefActions,
    PriorShapeMismatch,
    PriorInvalid,
    StatOutOfRange,
    StatBadConditioning,
}

impl ViolationCode {
    pub fn as_str(&self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

/// Every invariant violation found in a problem; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "valid: no violations");
        }
        for v in &self.violations {
            writeln!(f, "{}: {}", v.code.as_str(), v.message)?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of a problem file.
pub fn validate_problem(spec: &ProblemSpec) -> ValidationReport {
    let mut out = Vec::new();
    let states = LabelSet::new(spec.states.clone());
    let signals = LabelSet::new(spec.signals.clone());
    let n_states = states.len();

    if states.is_empty() {
        out.push(Violation::new(ViolationCode::EmptyStates, "state space is empty"));
    }
    if signals.is_empty() {
        out.push(Violation::new(ViolationCode::EmptySignals, "signal space is empty"));
    }
    for (what, set) in [("state", &states), ("signal", &signals)] {
        if let Some(dup) = set.first_duplicate() {
            out.push(Violation::new(
                ViolationCode::DuplicateLabel,
                format!("duplicate {what} label '{dup}'"),
            ));
        }
    }

    let actions = match resolve_actions(&spec.actions, n_states) {
        Ok(actions) => {
            if actions.is_empty() {
                out.push(Violation::new(ViolationCode::EmptyActions, "action space is empty"));
            }
            if let Some(dup) = actions.labels().first_duplicate() {
                out.push(Violation::new(
                    ViolationCode::DuplicateLabel,
                    format!("duplicate action label '{dup}'"),
                ));
            }
            Some(actions)
        }
        Err(msg) => {
            out.push(Violation::new(ViolationCode::InvalidBeliefGrid, msg));
            None
        }
    };

    let info = InformationStructure::from_rows_unchecked(spec.joint.clone());
    let joint_violations = info.violations();
    let joint_ok = joint_violations.is_empty();
    out.extend(joint_violations);
    if joint_ok && (info.n_signals() != signals.len() || info.n_states() != n_states) {
        out.push(Violation::new(
            ViolationCode::JointShapeMismatch,
            format!(
                "joint is {}x{}, expected {}x{} (signals x states)",
                info.n_signals(),
                info.n_states(),
                signals.len(),
                n_states
            ),
        ));
    }

    if let Some(actions) = &actions {
        let rules = std::iter::once(("incentive_rule", &spec.incentive_rule))
            .chain(spec.evaluation_rule.as_ref().map(|r| ("evaluation_rule", r)));
        for (name, rule) in rules {
            out.extend(rule_violations(name, rule, actions, n_states));
        }
    }

    if let Some(prior) = &spec.endowed_prior {
        if prior.len() != n_states {
            out.push(Violation::new(
                ViolationCode::PriorShapeMismatch,
                format!("endowed prior has {} entries, expected {n_states}", prior.len()),
            ));
        } else if let Err(e) = Belief::new(prior.clone()) {
            out.push(Violation::new(
                ViolationCode::PriorInvalid,
                format!("endowed prior: {e}"),
            ));
        }
    }

    for stat in &spec.disclosure.aggregate_stats {
        if !(0.0..=1.0).contains(&stat.value) {
            out.push(Violation::new(
                ViolationCode::StatOutOfRange,
                format!("{:?} value {} outside [0,1]", stat.statistic, stat.value),
            ));
        }
        if let Err(msg) = parse_conditioning(stat, &states, &signals) {
            out.push(Violation::new(ViolationCode::StatBadConditioning, msg));
        }
    }

    ValidationReport { violations: out }
}

fn rule_violations(name: &str, rule: &ScoringRule, actions: &ActionSpace, n_states: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    match rule {
        ScoringRule::Table(rows) => {
            if rows.len() != actions.len() || rows.iter().any(|r| r.len() != n_states) {
                out.push(Violation::new(
                    ViolationCode::RuleShapeMismatch,
                    format!(
                        "{name} table is {}x{}, expected {}x{} (actions x states)",
                        rows.len(),
                        rows.first().map_or(0, Vec::len),
                        actions.len(),
                        n_states
                    ),
                ));
            }
            if rows.iter().flatten().any(|s| !s.is_finite()) {
                out.push(Violation::new(
                    ViolationCode::RuleNotFinite,
                    format!("{name} contains a non-finite score"),
                ));
            }
        }
        ScoringRule::Quadratic | ScoringRule::Logarithmic { .. } => {
            if actions.kind() != ActionKind::BeliefReport {
                out.push(Violation::new(
                    ViolationCode::RuleRequiresBeliefActions,
                    format!("{name} scores belief reports but the action space is discrete"),
                ));
            }
            if let ScoringRule::Logarithmic { epsilon } = rule {
                if !(*epsilon > 0.0 && *epsilon < 0.5) {
                    out.push(Violation::new(
                        ViolationCode::RuleInvalidEpsilon,
                        format!("{name} epsilon {epsilon} outside (0, 0.5)"),
                    ));
                }
            }
        }
    }
    out
}

/// Resolves a statistic's conditioning string against the problem labels.
pub fn parse_conditioning(
    stat: &AggregateStat,
    states: &LabelSet,
    signals: &LabelSet,
) -> Result<Option<Conditioning>, String> {
    let lookup = |prefix: &str, set: &LabelSet| -> Result<usize, String> {
        let label = stat
            .conditioning
            .strip_prefix(prefix)
            .ok_or_else(|| format!("{:?} needs conditioning '{prefix}<label>'", stat.statistic))?;
        set.index_of(label.trim())
            .ok_or_else(|| format!("unknown label '{}' in conditioning", label.trim()))
    };
    match stat.statistic {
        StatisticKind::ClassConditionalAccuracy => lookup("state:", states).map(|i| Some(Conditioning::State(i))),
        StatisticKind::ConfidenceConditionalOnPrediction => {
            lookup("signal:", signals).map(|i| Some(Conditioning::Signal(i)))
        }
        StatisticKind::UnconditionalAccuracy | StatisticKind::ConfidenceConditionalOnFeatures => Ok(None),
    }
}

/// Which of the two scoring rules an analysis uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleChoice {
    Incentive,
    #[default]
    Evaluation,
}

/// A validated decision problem. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionProblem {
    states: StateSpace,
    actions: ActionSpace,
    signals: SignalSpace,
    info: InformationStructure,
    incentive_rule: ScoringRule,
    evaluation_rule: ScoringRule,
    incentive: ScoreTable,
    evaluation: ScoreTable,
    disclosure: DisclosureSpec,
    endowed_prior: Option<Belief>,
}

impl DecisionProblem {
    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        ProblemSpec::from_json(text)?.build().map_err(ProblemError::Invalid)
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn signals(&self) -> &SignalSpace {
        &self.signals
    }

    pub fn info(&self) -> &InformationStructure {
        &self.info
    }

    pub fn incentive_rule(&self) -> &ScoringRule {
        &self.incentive_rule
    }

    pub fn evaluation_rule(&self) -> &ScoringRule {
        &self.evaluation_rule
    }

    pub fn incentive_table(&self) -> &ScoreTable {
        &self.incentive
    }

    pub fn evaluation_table(&self) -> &ScoreTable {
        &self.evaluation
    }

    pub fn table(&self, choice: RuleChoice) -> &ScoreTable {
        match choice {
            RuleChoice::Incentive => &self.incentive,
            RuleChoice::Evaluation => &self.evaluation,
        }
    }

    pub fn disclosure(&self) -> &DisclosureSpec {
        &self.disclosure
    }

    pub fn endowed_prior(&self) -> Option<&Belief> {
        self.endowed_prior.as_ref()
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn rules_identical(&self) -> bool {
        self.incentive == self.evaluation
    }

    pub fn state_index(&self, label: &str) -> Result<usize, ProblemError> {
        self.states
            .index_of(label)
            .ok_or_else(|| ProblemError::UnknownLabel(label.to_owned()))
    }

    pub fn signal_index(&self, label: &str) -> Result<usize, ProblemError> {
        self.signals
            .index_of(label)
            .ok_or_else(|| ProblemError::UnknownLabel(label.to_owned()))
    }

    pub fn action_index(&self, label: &str) -> Result<usize, ProblemError> {
        self.actions
            .index_of(label)
            .ok_or_else(|| ProblemError::UnknownLabel(label.to_owned()))
    }

    pub fn likelihood(&self, state: &str) -> Result<Vec<f64>, ProblemError> {
        self.info.likelihood(self.state_index(state)?)
    }

    pub fn posterior(&self, signal: &str) -> Result<Belief, ProblemError> {
        self.info.posterior(self.signal_index(signal)?)
    }

    /// Same problem with a different information structure.
    pub fn with_info(&self, info: InformationStructure) -> Result<Self, ProblemError> {
        if info.n_signals() != self.n_signals() || info.n_states() != self.n_states() {
            return Err(ProblemError::InvalidJoint(
                "joint dimensions differ from the problem".into(),
            ));
        }
        let info = InformationStructure::new(info.joint)?;
        Ok(Self { info, ..self.clone() })
    }

    /// Same problem with different disclosure metadata.
    pub fn with_disclosure(&self, disclosure: DisclosureSpec) -> Self {
        Self {
            disclosure,
            ..self.clone()
        }
    }

    /// Label spaces match, so datasets bound to one problem are valid for
    /// the other.
    pub fn same_label_spaces(&self, other: &DecisionProblem) -> bool {
        self.states == other.states && self.signals == other.signals && self.actions.labels == other.actions.labels
    }

    /// Serializable problem file equivalent to this problem.
    pub fn to_spec(&self) -> ProblemSpec {
        let actions = match self.actions.reports() {
            None => ActionsSpec::Labels(self.actions.labels().labels().to_vec()),
            Some(reports) => ActionsSpec::BeliefReport {
                belief_report: BeliefReportSpec {
                    resolution: None,
                    points: Some(reports.iter().map(|b| b.probs().to_vec()).collect()),
                },
            },
        };
        ProblemSpec {
            states: self.states.labels().to_vec(),
            actions,
            signals: self.signals.labels().to_vec(),
            joint: self.info.joint.clone(),
            incentive_rule: self.incentive_rule.clone(),
            evaluation_rule: Some(self.evaluation_rule.clone()),
            disclosure: self.disclosure.clone(),
            endowed_prior: self.endowed_prior.as_ref().map(|b| b.probs().to_vec()),
        }
    }
}
