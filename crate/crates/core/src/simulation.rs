//! Synthetic agents for design analysis.
//!
//! An [`AgentSpec`] composes four parametrized deviations from the rational
//! agent, applied in a fixed order:
//!
//! 1. prior: the agent starts from `prior_override` instead of p(θ);
//! 2. garbling: the true signal v is perceived as v′ with probability Γ(v′|v),
//!    and the agent updates as if v′ were the true signal;
//! 3. updating: q_λ(θ) ∝ p̃(θ)·Pr(v′|θ)^λ, with λ = 1 Bayesian, λ < 1
//!    conservative and λ > 1 overreacting;
//! 4. optimization: (1−ε)·softmax_τ(expected scores) + ε·uniform, τ = 0 being
//!    the exact argmax.
//!
//! [`build_policy`] closes an agent specification against a problem into a [`PolicyKernel`]
//! ρ(a|v). [`exact_metrics`] evaluates that kernel in closed form.

use std::collections::BTreeMap;
use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavioral::{
    behavioral_score, calibrated_from_weights, calibrated_score, score_from_weights, BehavioralDataset,
    BehavioralError, Cell, LossDecomposition, RawScores, ScoreOptions, TrialRecord,
};
use crate::normative::{argmax_lowest, expected_scores, Benchmarks};
use crate::problem::{Belief, DecisionProblem, InformationStructure, RuleChoice, ScoreTable, INPUT_TOLERANCE};
use crate::seeding::stream_rng;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid agent: {0}")]
    InvalidAgent(String),
    #[error("perceived signal {0} has zero mass under the agent's prior and likelihood")]
    ZeroMassPerceivedSignal(usize),
    #[error("learning agents require feedback after each trial")]
    NoFeedback,
    #[error("invalid policy kernel: {0}")]
    InvalidPolicy(String),
}

fn default_exponent() -> f64 {
    1.0
}

fn default_respond_to() -> RuleChoice {
    RuleChoice::Incentive
}

/// Parametrized lossy agent. The default is the rational agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_override: Option<Vec<f64>>,
    /// Row-stochastic matrix Γ(v′|v), rows indexed by the true signal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub garbling: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_exponent")]
    pub updating_exponent: f64,
    #[serde(default)]
    pub softmax_temperature: f64,
    #[serde(default)]
    pub lapse_rate: f64,
    /// Rule the agent optimizes against.
    #[serde(default = "default_respond_to")]
    pub respond_to: RuleChoice,
}

impl Default for AgentSpec {
    fn default() -> Self {
        Self::rational()
    }
}

impl AgentSpec {
    pub fn rational() -> Self {
        Self {
            prior_override: None,
            garbling: None,
            updating_exponent: 1.0,
            softmax_temperature: 0.0,
            lapse_rate: 0.0,
            respond_to: RuleChoice::Incentive,
        }
    }

    pub fn with_lapse(mut self, lapse_rate: f64) -> Self {
        self.lapse_rate = lapse_rate;
        self
    }

    pub fn with_exponent(mut self, updating_exponent: f64) -> Self {
        self.updating_exponent = updating_exponent;
        self
    }

    pub fn with_temperature(mut self, softmax_temperature: f64) -> Self {
        self.softmax_temperature = softmax_temperature;
        self
    }

    pub fn from_json(text: &str) -> Result<Self, SimulationError> {
        serde_json::from_str(text).map_err(|e| SimulationError::InvalidAgent(e.to_string()))
    }

    pub fn validate(&self, problem: &DecisionProblem) -> Result<(), SimulationError> {
        let invalid = |msg: String| Err(SimulationError::InvalidAgent(msg));
        if !(self.updating_exponent >= 0.0 && self.updating_exponent.is_finite()) {
            return invalid(format!(
                "updating_exponent {} must be finite and >= 0",
                self.updating_exponent
            ));
        }
        if !(self.softmax_temperature >= 0.0 && self.softmax_temperature.is_finite()) {
            return invalid(format!(
                "softmax_temperature {} must be finite and >= 0",
                self.softmax_temperature
            ));
        }
        if !(0.0..=1.0).contains(&self.lapse_rate) {
            return invalid(format!("lapse_rate {} outside [0,1]", self.lapse_rate));
        }
        if let Some(prior) = &self.prior_override {
            if prior.len() != problem.n_states() {
                return invalid(format!(
                    "prior_override has {} entries, expected {}",
                    prior.len(),
                    problem.n_states()
                ));
            }
            Belief::new(prior.clone()).map_err(|e| SimulationError::InvalidAgent(format!("prior_override: {e}")))?;
        }
        if let Some(g) = &self.garbling {
            let n = problem.n_signals();
            if g.len() != n || g.iter().any(|r| r.len() != n) {
                return invalid(format!("garbling must be {n}x{n}"));
            }
            for (v, row) in g.iter().enumerate() {
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return invalid(format!("garbling row {v} has a negative or non-finite entry"));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > INPUT_TOLERANCE {
                    return invalid(format!("garbling row {v} sums to {total}"));
                }
            }
        }
        Ok(())
    }
}

/// Stochastic response policy ρ(a|v); rows are signals, columns actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyKernel {
    rho: Vec<Vec<f64>>,
}

impl PolicyKernel {
    pub fn new(rho: Vec<Vec<f64>>) -> Result<Self, SimulationError> {
        for (v, row) in rho.iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(SimulationError::InvalidPolicy(format!(
                    "row {v} has a negative or non-finite entry"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > INPUT_TOLERANCE {
                return Err(SimulationError::InvalidPolicy(format!("row {v} sums to {total}")));
            }
        }
        Ok(Self { rho })
    }

    /// Always plays `action` regardless of the signal.
    pub fn constant(n_signals: usize, n_actions: usize, action: usize) -> Self {
        let mut row = vec![0.0; n_actions];
        row[action] = 1.0;
        Self {
            rho: vec![row; n_signals],
        }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rho
    }

    pub fn prob(&self, signal: usize, action: usize) -> f64 {
        self.rho[signal][action]
    }
}

/// Response distribution at a belief: softmax (or argmax when τ = 0) mixed
/// with a uniform lapse.
fn action_distribution(table: &ScoreTable, belief: &Belief, temperature: f64, lapse: f64) -> Vec<f64> {
    let values = expected_scores(table, belief);
    let n = values.len();
    let mut dist = if temperature == 0.0 {
        let mut d = vec![0.0; n];
        d[argmax_lowest(&values)] = 1.0;
        d
    } else {
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = values.iter().map(|v| ((v - max) / temperature).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    };
    if lapse > 0.0 {
        let uniform = lapse / n as f64;
        for p in &mut dist {
            *p = (1.0 - lapse) * *p + uniform;
        }
    }
    dist
}

/// Closes an agent against a problem.
pub fn build_policy(problem: &DecisionProblem, agent: &AgentSpec) -> Result<PolicyKernel, SimulationError> {
    agent.validate(problem)?;
    policy_for(problem.info(), problem.table(agent.respond_to), agent)
}

/// Policy of `agent` when it believes the information structure is `info`.
/// Perceived signals that no reachable true signal maps to fall back to the
/// agent's prior belief.
pub(crate) fn policy_for(
    info: &InformationStructure,
    table: &ScoreTable,
    agent: &AgentSpec,
) -> Result<PolicyKernel, SimulationError> {
    let prior = match &agent.prior_override {
        Some(p) => Belief::new(p.clone()).map_err(|e| SimulationError::InvalidAgent(e.to_string()))?,
        None => info.marginal_prior(),
    };
    let likelihood = info.likelihood_matrix();
    let signal_mass = info.signal_marginal();
    let n_signals = info.n_signals();

    let needed: Vec<bool> = (0..n_signals)
        .map(|perceived| match &agent.garbling {
            None => signal_mass[perceived] > 0.0,
            Some(g) => (0..n_signals).any(|v| signal_mass[v] > 0.0 && g[v][perceived] > 0.0),
        })
        .collect();

    let mut per_perceived = Vec::with_capacity(n_signals);
    for (perceived, lik) in likelihood.iter().enumerate() {
        let weights = prior
            .probs()
            .iter()
            .zip(lik)
            .map(|(p, l)| p * l.powf(agent.updating_exponent))
            .collect();
        let belief = match Belief::from_weights(weights) {
            Some(b) => b,
            None if needed[perceived] => return Err(SimulationError::ZeroMassPerceivedSignal(perceived)),
            None => prior.clone(),
        };
        per_perceived.push(action_distribution(
            table,
            &belief,
            agent.softmax_temperature,
            agent.lapse_rate,
        ));
    }

    let rho = match &agent.garbling {
        None => per_perceived,
        Some(g) => g
            .iter()
            .map(|row| {
                (0..table.n_actions())
                    .map(|a| row.iter().zip(&per_perceived).map(|(w, d)| w * d[a]).sum())
                    .collect()
            })
            .collect(),
    };
    Ok(PolicyKernel { rho })
}

/// Closed-form scores of a policy: no sampling noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMetrics {
    /// π^B(a,θ) = Σ_v π(v,θ)·ρ(a|v).
    pub joint: Vec<Vec<f64>>,
    pub benchmark: f64,
    pub baseline: f64,
    pub delta: f64,
    pub behavioral: f64,
    pub calibrated: f64,
}

impl ExactMetrics {
    pub fn raw(&self) -> RawScores {
        RawScores {
            benchmark: self.benchmark,
            baseline: self.baseline,
            delta: self.delta,
            behavioral: self.behavioral,
            calibrated: self.calibrated,
        }
    }

    pub fn decomposition(&self) -> Result<LossDecomposition, BehavioralError> {
        LossDecomposition::from_scores(self.raw())
    }
}

/// Response-state joint induced by a policy.
pub fn response_joint(info: &InformationStructure, policy: &PolicyKernel, n_actions: usize) -> Vec<Vec<f64>> {
    let mut joint = vec![vec![0.0; info.n_states()]; n_actions];
    for (v, row) in info.rows().iter().enumerate() {
        for (a, cell) in joint.iter_mut().enumerate() {
            let r = policy.rho[v][a];
            for (s, m) in row.iter().enumerate() {
                cell[s] += m * r;
            }
        }
    }
    joint
}

pub fn exact_metrics(problem: &DecisionProblem, policy: &PolicyKernel, rule: RuleChoice) -> ExactMetrics {
    let table = problem.table(rule);
    let joint = response_joint(problem.info(), policy, problem.n_actions());
    let bench = Benchmarks::compute(problem, rule);
    ExactMetrics {
        behavioral: score_from_weights(&joint, table),
        calibrated: calibrated_from_weights(&joint, table, None),
        joint,
        benchmark: bench.benchmark,
        baseline: bench.baseline,
        delta: bench.value_of_information,
    }
}

/// Condition name attached to simulated records.
pub const SIMULATED_CONDITION: &str = "simulated";

/// i.i.d. trials (v,θ) ~ π, a ~ ρ(·|v), deterministic in `seed`.
pub fn sample_dataset(
    problem: &DecisionProblem,
    policy: &PolicyKernel,
    n_trials: usize,
    seed: u64,
) -> BehavioralDataset {
    sample_with_rng(problem, policy, n_trials, &mut stream_rng(seed, 0))
}

fn sample_with_rng<R: Rng>(
    problem: &DecisionProblem,
    policy: &PolicyKernel,
    n_trials: usize,
    rng: &mut R,
) -> BehavioralDataset {
    let info = problem.info();
    let n_states = info.n_states();
    let cells = WeightedIndex::new(info.rows().iter().flatten().copied()).expect("joint has positive mass");
    let responses: Vec<Option<WeightedIndex<f64>>> = policy
        .rho
        .iter()
        .map(|row| WeightedIndex::new(row.iter().copied()).ok())
        .collect();
    let mut records = Vec::with_capacity(n_trials);
    let mut resolved = Vec::with_capacity(n_trials);
    for i in 0..n_trials {
        let k = cells.sample(rng);
        let (signal, state) = (k / n_states, k % n_states);
        let action = responses[signal]
            .as_ref()
            .expect("reachable signal has a response distribution")
            .sample(rng);
        records.push(TrialRecord {
            participant_id: "agent".into(),
            trial_index: i as u64,
            condition: SIMULATED_CONDITION.into(),
            signal: problem.signals().label(signal).to_owned(),
            action: problem.actions().label(action).to_owned(),
            realized_state: problem.states().label(state).to_owned(),
        });
        resolved.push(Cell { signal, action, state });
    }
    BehavioralDataset::from_parts(problem, records, resolved)
}

/// Dirichlet-style pseudo-counts over (signal, state) cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningAgentState {
    pseudo_counts: Vec<Vec<f64>>,
}

impl LearningAgentState {
    pub fn new(pseudo_counts: Vec<Vec<f64>>) -> Result<Self, SimulationError> {
        if pseudo_counts.is_empty() || pseudo_counts.iter().flatten().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(SimulationError::InvalidAgent(
                "pseudo-counts must all be positive".into(),
            ));
        }
        Ok(Self { pseudo_counts })
    }

    /// α in every cell.
    pub fn uniform(n_signals: usize, n_states: usize, alpha: f64) -> Result<Self, SimulationError> {
        Self::new(vec![vec![alpha; n_states]; n_signals])
    }

    pub fn pseudo_counts(&self) -> &[Vec<f64>] {
        &self.pseudo_counts
    }

    /// Normalized counts used as the agent's information structure.
    pub fn estimate(&self) -> InformationStructure {
        let total: f64 = self.pseudo_counts.iter().flatten().sum();
        InformationStructure::from_rows_unchecked(
            self.pseudo_counts
                .iter()
                .map(|r| r.iter().map(|c| c / total).collect())
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningRun {
    /// Expected incentive score of each trial's policy under the true π.
    pub curve: Vec<f64>,
    pub final_state: LearningAgentState,
}

/// Agent that learns π from trial feedback. Each trial it acts on the
/// normalized pseudo-counts, then observes (v, θ) and increments that cell.
/// Only the response parameters of `agent` are used: a prior override or a
/// non-Bayesian exponent is rejected.
pub fn run_learning_agent(
    problem: &DecisionProblem,
    initial: &LearningAgentState,
    n_trials: usize,
    seed: u64,
    agent: &AgentSpec,
) -> Result<LearningRun, SimulationError> {
    if !problem.disclosure().feedback_after_trial {
        return Err(SimulationError::NoFeedback);
    }
    agent.validate(problem)?;
    if agent.prior_override.is_some() || agent.updating_exponent != 1.0 {
        return Err(SimulationError::InvalidAgent(
            "learning agents take their prior and updating from the pseudo-counts".into(),
        ));
    }
    if initial.pseudo_counts.len() != problem.n_signals()
        || initial.pseudo_counts.iter().any(|r| r.len() != problem.n_states())
    {
        return Err(SimulationError::InvalidAgent(
            "pseudo-count matrix does not match signals x states".into(),
        ));
    }
    let info = problem.info();
    let decision_table = problem.table(agent.respond_to);
    let incentive = problem.incentive_table();
    let n_states = problem.n_states();
    let cells = WeightedIndex::new(info.rows().iter().flatten().copied()).expect("joint has positive mass");
    let mut rng = stream_rng(seed, 0);
    let mut state = initial.clone();
    let mut curve = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let estimate = state.estimate();
        let policy = policy_for(&estimate, decision_table, agent)?;
        curve.push(score_from_weights(
            &response_joint(info, &policy, problem.n_actions()),
            incentive,
        ));
        let k = cells.sample(&mut rng);
        state.pseudo_counts[k / n_states][k % n_states] += 1.0;
    }
    Ok(LearningRun {
        curve,
        final_state: state,
    })
}

/// How a sweep evaluates each agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Exact,
    Sampled { trials: usize, seed: u64 },
}

/// Agents to sweep: an explicit list or a Cartesian product of the scalar
/// parameters applied to a base agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AgentGrid {
    List(Vec<AgentSpec>),
    Product(ProductGrid),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductGrid {
    #[serde(default)]
    pub base: AgentSpec,
    #[serde(default)]
    pub updating_exponent: Vec<f64>,
    #[serde(default)]
    pub softmax_temperature: Vec<f64>,
    #[serde(default)]
    pub lapse_rate: Vec<f64>,
}

impl AgentGrid {
    pub fn from_json(text: &str) -> Result<Self, SimulationError> {
        serde_json::from_str(text).map_err(|e| SimulationError::InvalidAgent(e.to_string()))
    }

    /// Grid points; products vary `lapse_rate` fastest.
    pub fn expand(&self) -> Vec<AgentSpec> {
        match self {
            AgentGrid::List(agents) => agents.clone(),
            AgentGrid::Product(p) => {
                let or_base = |xs: &[f64], base: f64| if xs.is_empty() { vec![base] } else { xs.to_vec() };
                let mut out = Vec::new();
                for l in or_base(&p.updating_exponent, p.base.updating_exponent) {
                    for t in or_base(&p.softmax_temperature, p.base.softmax_temperature) {
                        for e in or_base(&p.lapse_rate, p.base.lapse_rate) {
                            out.push(p.base.clone().with_exponent(l).with_temperature(t).with_lapse(e));
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub agent: AgentSpec,
    pub behavioral: Option<f64>,
    pub calibrated: Option<f64>,
    pub benchmark: f64,
    pub baseline: f64,
    /// Undefined when Δ vanishes.
    pub total_loss: Option<f64>,
    pub gap_rc: Option<f64>,
    pub gap_cb: Option<f64>,
    /// R ≥ C ≥ B within 1e-9; exact mode only.
    pub ordering_holds: Option<bool>,
    pub error: Option<String>,
}

/// B as a function of the lapse rate for agents that agree on every other
/// parameter and whose lapse-free policy attains R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LapseDiagnostic {
    pub rows: Vec<usize>,
    pub lapse_rates: Vec<f64>,
    pub behavioral: Vec<f64>,
    pub nonincreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub mode: SweepMode,
    pub rule: RuleChoice,
    pub rows: Vec<SweepRow>,
    pub diagnostics: Vec<LapseDiagnostic>,
}

/// One row per agent. Sampled rows draw from seed stream `i` of the root
/// seed, so parallel and serial sweeps produce identical tables.
pub fn design_sweep(
    problem: &DecisionProblem,
    grid: &[AgentSpec],
    mode: SweepMode,
    rule: RuleChoice,
    parallel: bool,
) -> SweepTable {
    let bench = Benchmarks::compute(problem, rule);
    let row = |(i, agent): (usize, &AgentSpec)| sweep_row(problem, agent, i, mode, rule, bench);
    let rows: Vec<SweepRow> = if parallel {
        grid.par_iter().enumerate().map(row).collect()
    } else {
        grid.iter().enumerate().map(row).collect()
    };
    let diagnostics = if mode == SweepMode::Exact {
        lapse_diagnostics(&rows)
    } else {
        Vec::new()
    };
    SweepTable {
        mode,
        rule,
        rows,
        diagnostics,
    }
}

fn sweep_row(
    problem: &DecisionProblem,
    agent: &AgentSpec,
    index: usize,
    mode: SweepMode,
    rule: RuleChoice,
    bench: Benchmarks,
) -> SweepRow {
    let mut row = SweepRow {
        agent: agent.clone(),
        behavioral: None,
        calibrated: None,
        benchmark: bench.benchmark,
        baseline: bench.baseline,
        total_loss: None,
        gap_rc: None,
        gap_cb: None,
        ordering_holds: None,
        error: None,
    };
    let policy = match build_policy(problem, agent) {
        Ok(p) => p,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let (b, c) = match mode {
        SweepMode::Exact => {
            let m = exact_metrics(problem, &policy, rule);
            (m.behavioral, m.calibrated)
        }
        SweepMode::Sampled { trials, seed } => {
            let ds = sample_with_rng(problem, &policy, trials.max(1), &mut stream_rng(seed, index as u64));
            let opts = ScoreOptions { rule, laplace: None };
            (
                behavioral_score(&ds, problem.table(rule)).expect("nonempty sample"),
                calibrated_score(&ds, problem, opts).expect("nonempty sample"),
            )
        }
    };
    row.behavioral = Some(b);
    row.calibrated = Some(c);
    if mode == SweepMode::Exact {
        row.ordering_holds = Some(bench.benchmark >= c - 1e-9 && c >= b - 1e-9);
    }
    if let Ok(d) = LossDecomposition::from_scores(RawScores {
        benchmark: bench.benchmark,
        baseline: bench.baseline,
        delta: bench.value_of_information,
        behavioral: b,
        calibrated: c,
    }) {
        row.total_loss = Some(d.total_loss);
        row.gap_rc = Some(d.stimulus_prior_gap);
        row.gap_cb = Some(d.updating_optimization_gap);
    }
    row
}

fn lapse_diagnostics(rows: &[SweepRow]) -> Vec<LapseDiagnostic> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        if row.behavioral.is_none() {
            continue;
        }
        let key = serde_json::to_string(&row.agent.clone().with_lapse(0.0)).expect("agent serializes");
        groups.entry(key).or_default().push(i);
    }
    groups
        .into_values()
        .filter_map(|mut idx| {
            idx.sort_by(|a, b| rows[*a].agent.lapse_rate.total_cmp(&rows[*b].agent.lapse_rate));
            let first = &rows[idx[0]];
            let optimal = first.agent.lapse_rate == 0.0 && first.behavioral? >= first.benchmark - 1e-9;
            if idx.len() < 2 || !optimal {
                return None;
            }
            let behavioral: Vec<f64> = idx.iter().map(|i| rows[*i].behavioral.unwrap()).collect();
            Some(LapseDiagnostic {
                nonincreasing: behavioral.windows(2).all(|w| w[1] <= w[0] + 1e-12),
                lapse_rates: idx.iter().map(|i| rows[*i].agent.lapse_rate).collect(),
                behavioral,
                rows: idx,
            })
        })
        .collect()
}

impl SweepTable {
    /// `updating_exponent,softmax_temperature,lapse_rate,prior_override,garbling,respond_to,B,C,total_loss,gap_rc,gap_cb`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "updating_exponent",
            "softmax_temperature",
            "lapse_rate",
            "prior_override",
            "garbling",
            "respond_to",
            "B",
            "C",
            "total_loss",
            "gap_rc",
            "gap_cb",
        ])?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for row in &self.rows {
            let a = &row.agent;
            w.write_record([
                a.updating_exponent.to_string(),
                a.softmax_temperature.to_string(),
                a.lapse_rate.to_string(),
                json_cell(&a.prior_override),
                json_cell(&a.garbling),
                match a.respond_to {
                    RuleChoice::Incentive => "incentive".into(),
                    RuleChoice::Evaluation => "evaluation".into(),
                },
                opt(row.behavioral),
                opt(row.calibrated),
                opt(row.total_loss),
                opt(row.gap_rc),
                opt(row.gap_cb),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn json_cell<T: Serialize>(value: &Option<T>) -> String {
    value
        .as_ref()
        .map(|v| serde_json::to_string(v).unwrap_or_default())
        .unwrap_or_default()
}
