//! Behavioral response data and the normalized loss decomposition.
//!
//! Observed responses are summarized by the behavioral score B (mean realized
//! score) and the calibrated score C (score of an optimizer acting on the
//! empirical conditional of the state given each response). Together with
//! the rational benchmark R and baseline R∅ they give three ratios
//! normalized by Δ = R − R∅:
//!
//! ```text
//! total_loss                = (R − B) / Δ
//! stimulus_prior_gap        = (R − C) / Δ
//! updating_optimization_gap = (C − B) / Δ
//! ```
//!
//! The two gaps are confounded pairs of loss sources and are never reported
//! as separate prior/receiver/updating/optimization numbers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normative::{optimal_action, Benchmarks};
use crate::problem::{Belief, DecisionProblem, LabelSet, RuleChoice, ScoreTable};
use crate::seeding::stream_rng;

/// Exact CSV header expected by [`ingest_csv`].
pub const CSV_HEADER: [&str; 6] = [
    "participant_id",
    "trial_index",
    "condition",
    "signal",
    "action",
    "state",
];

/// Δ at or below this is treated as zero.
pub const MIN_VALUE_OF_INFORMATION: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BehavioralError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column '{column}': {reason}")]
    Parse { line: u64, column: String, reason: String },
    #[error("line {line}: unknown {column} label '{label}'")]
    UnknownLabel { line: u64, column: String, label: String },
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("value of information is {:.3e}; loss ratios are undefined", .0.delta)]
    ZeroValueOfInformation(RawScores),
    #[error("condition '{0}' is bound to a problem with different label spaces")]
    LabelSpaceMismatch(String),
}

/// One observed response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub participant_id: String,
    pub trial_index: u64,
    pub condition: String,
    pub signal: String,
    pub action: String,
    #[serde(rename = "state")]
    pub realized_state: String,
}

/// Resolved indices of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub signal: usize,
    pub action: usize,
    pub state: usize,
}

/// Records bound to the label spaces of a decision problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BehavioralDataset {
    states: LabelSet,
    signals: LabelSet,
    actions: LabelSet,
    records: Vec<TrialRecord>,
    cells: Vec<Cell>,
}

impl BehavioralDataset {
    /// Binds records to `problem`, resolving every label.
    pub fn new(problem: &DecisionProblem, records: Vec<TrialRecord>) -> Result<Self, BehavioralError> {
        let cells = records
            .iter()
            .enumerate()
            .map(|(i, r)| resolve(problem, r, i as u64 + 2))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_parts(problem, records, cells))
    }

    pub(crate) fn from_parts(problem: &DecisionProblem, records: Vec<TrialRecord>, cells: Vec<Cell>) -> Self {
        Self {
            states: problem.states().clone(),
            signals: problem.signals().clone(),
            actions: problem.actions().labels().clone(),
            records,
            cells,
        }
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn n_actions(&self) -> usize {
        self.actions.len()
    }

    fn n_states(&self) -> usize {
        self.states.len()
    }

    fn bound_to(&self, problem: &DecisionProblem) -> bool {
        &self.states == problem.states()
            && &self.signals == problem.signals()
            && &self.actions == problem.actions().labels()
    }

    /// Records whose condition equals `condition`.
    pub fn for_condition(&self, condition: &str) -> Self {
        let (records, cells) = self
            .records
            .iter()
            .zip(&self.cells)
            .filter(|(r, _)| r.condition == condition)
            .map(|(r, c)| (r.clone(), *c))
            .unzip();
        Self {
            records,
            cells,
            ..self.clone_spaces()
        }
    }

    /// Distinct condition names in first-seen order.
    pub fn conditions(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.condition) {
                out.push(r.condition.clone());
            }
        }
        out
    }

    fn clone_spaces(&self) -> Self {
        Self {
            states: self.states.clone(),
            signals: self.signals.clone(),
            actions: self.actions.clone(),
            records: Vec::new(),
            cells: Vec::new(),
        }
    }

    /// Counts indexed (action, state).
    pub fn counts(&self) -> Vec<Vec<f64>> {
        let mut counts = vec![vec![0.0; self.n_states()]; self.n_actions()];
        for c in &self.cells {
            counts[c.action][c.state] += 1.0;
        }
        counts
    }

    /// Writes the dataset in the ingest CSV schema.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        if self.records.is_empty() {
            w.write_record(CSV_HEADER)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn resolve(problem: &DecisionProblem, r: &TrialRecord, line: u64) -> Result<Cell, BehavioralError> {
    let unknown = |column: &str, label: &str| BehavioralError::UnknownLabel {
        line,
        column: column.to_owned(),
        label: label.to_owned(),
    };
    Ok(Cell {
        signal: problem
            .signals()
            .index_of(&r.signal)
            .ok_or_else(|| unknown("signal", &r.signal))?,
        action: problem
            .action_index(&r.action)
            .map_err(|_| unknown("action", &r.action))?,
        state: problem
            .states()
            .index_of(&r.realized_state)
            .ok_or_else(|| unknown("state", &r.realized_state))?,
    })
}

/// Reads and label-checks a behavioral CSV file. A header-only file yields an
/// empty dataset; scoring operations reject it later.
pub fn ingest_csv(path: impl AsRef<Path>, problem: &DecisionProblem) -> Result<BehavioralDataset, BehavioralError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| BehavioralError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ingest_reader(file, problem)
}

pub fn ingest_reader<R: Read>(reader: R, problem: &DecisionProblem) -> Result<BehavioralDataset, BehavioralError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_error(1, "<header>", e.to_string()))?
        .clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(parse_error(
            1,
            "<header>",
            format!(
                "expected header '{}', found '{}'",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut records = Vec::new();
    let mut cells = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(line, "<row>", e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or_default().to_owned();
        let trial_index = field(1).trim().parse::<u64>().map_err(|e| {
            parse_error(
                line,
                "trial_index",
                format!("'{}' is not a nonnegative integer: {e}", field(1)),
            )
        })?;
        let record = TrialRecord {
            participant_id: field(0),
            trial_index,
            condition: field(2),
            signal: field(3),
            action: field(4),
            realized_state: field(5),
        };
        cells.push(resolve(problem, &record, line)?);
        records.push(record);
    }
    Ok(BehavioralDataset::from_parts(problem, records, cells))
}

fn parse_error(line: u64, column: &str, reason: String) -> BehavioralError {
    BehavioralError::Parse {
        line,
        column: column.to_owned(),
        reason,
    }
}

/// B: mean realized score, computed from cell counts so that it does not
/// depend on record order.
pub fn behavioral_score(ds: &BehavioralDataset, table: &ScoreTable) -> Result<f64, BehavioralError> {
    if ds.is_empty() {
        return Err(BehavioralError::EmptyDataset);
    }
    Ok(score_from_weights(&ds.counts(), table) / ds.len() as f64)
}

/// Σ_{a,θ} w(a,θ)·S(a,θ).
pub fn score_from_weights(weights: &[Vec<f64>], table: &ScoreTable) -> f64 {
    weights
        .iter()
        .enumerate()
        .flat_map(|(a, row)| row.iter().enumerate().map(move |(s, w)| (a, s, w)))
        .map(|(a, s, w)| w * table.score(a, s))
        .sum()
}

/// π^B(a,θ) = count(a,θ)/N.
pub fn empirical_joint(ds: &BehavioralDataset) -> Result<Vec<Vec<f64>>, BehavioralError> {
    if ds.is_empty() {
        return Err(BehavioralError::EmptyDataset);
    }
    let n = ds.len() as f64;
    Ok(ds
        .counts()
        .into_iter()
        .map(|row| row.into_iter().map(|c| c / n).collect())
        .collect())
}

/// Calibrated score of a nonnegative weight matrix over (action, state):
/// Σ_{a,θ} w̄(a,θ)·Ŝ(w(θ|a), θ) where w̄ is `weights` normalized to unit mass.
/// Action rows without mass are skipped. With `laplace = Some(α)` the
/// conditionals are smoothed as (w(a,θ)+α)/(w(a)+α|Θ|); weights are not.
pub fn calibrated_from_weights(weights: &[Vec<f64>], table: &ScoreTable, laplace: Option<f64>) -> f64 {
    let total: f64 = weights.iter().flatten().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut score = 0.0;
    for row in weights {
        let row_mass: f64 = row.iter().sum();
        if row_mass <= 0.0 {
            continue;
        }
        let conditional = match laplace {
            Some(alpha) => Belief::from_weights(row.iter().map(|w| w + alpha).collect()),
            None => Belief::from_weights(row.clone()),
        }
        .expect("row has positive mass");
        let action = optimal_action(table, &conditional).0;
        score += row
            .iter()
            .enumerate()
            .map(|(s, w)| w * table.score(action, s))
            .sum::<f64>();
    }
    score / total
}

/// Options shared by the scoring operations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreOptions {
    /// Rule used for B, C, R and R∅.
    pub rule: RuleChoice,
    /// Add-α smoothing of the empirical conditionals in C; off by default.
    pub laplace: Option<f64>,
}

/// C per the calibrated-score definition, using the chosen rule's
/// properization.
pub fn calibrated_score(
    ds: &BehavioralDataset,
    problem: &DecisionProblem,
    opts: ScoreOptions,
) -> Result<f64, BehavioralError> {
    if ds.is_empty() {
        return Err(BehavioralError::EmptyDataset);
    }
    Ok(calibrated_from_weights(
        &ds.counts(),
        problem.table(opts.rule),
        opts.laplace,
    ))
}

/// Scores that remain meaningful when Δ vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawScores {
    pub benchmark: f64,
    pub baseline: f64,
    pub delta: f64,
    pub behavioral: f64,
    pub calibrated: f64,
}

/// R, R∅, Δ, B, C and the three Δ-normalized ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossDecomposition {
    pub benchmark: f64,
    pub baseline: f64,
    pub delta: f64,
    pub behavioral: f64,
    pub calibrated: f64,
    pub total_loss: f64,
    /// (R − C)/Δ: receiver and prior loss, confounded.
    pub stimulus_prior_gap: f64,
    /// (C − B)/Δ: updating and optimization loss, confounded.
    pub updating_optimization_gap: f64,
}

impl LossDecomposition {
    pub fn from_scores(scores: RawScores) -> Result<Self, BehavioralError> {
        let RawScores {
            benchmark: r,
            baseline,
            delta,
            behavioral: b,
            calibrated: c,
        } = scores;
        if delta <= MIN_VALUE_OF_INFORMATION {
            return Err(BehavioralError::ZeroValueOfInformation(scores));
        }
        let stimulus_prior_gap = (r - c) / delta;
        let updating_optimization_gap = (c - b) / delta;
        Ok(Self {
            benchmark: r,
            baseline,
            delta,
            behavioral: b,
            calibrated: c,
            total_loss: stimulus_prior_gap + updating_optimization_gap,
            stimulus_prior_gap,
            updating_optimization_gap,
        })
    }

    pub fn raw(&self) -> RawScores {
        RawScores {
            benchmark: self.benchmark,
            baseline: self.baseline,
            delta: self.delta,
            behavioral: self.behavioral,
            calibrated: self.calibrated,
        }
    }
}

pub fn raw_scores(
    ds: &BehavioralDataset,
    problem: &DecisionProblem,
    opts: ScoreOptions,
) -> Result<RawScores, BehavioralError> {
    if !ds.bound_to(problem) {
        return Err(BehavioralError::LabelSpaceMismatch(String::new()));
    }
    let bench = Benchmarks::compute(problem, opts.rule);
    Ok(RawScores {
        benchmark: bench.benchmark,
        baseline: bench.baseline,
        delta: bench.value_of_information,
        behavioral: behavioral_score(ds, problem.table(opts.rule))?,
        calibrated: calibrated_score(ds, problem, opts)?,
    })
}

pub fn decompose_losses(
    ds: &BehavioralDataset,
    problem: &DecisionProblem,
    opts: ScoreOptions,
) -> Result<LossDecomposition, BehavioralError> {
    LossDecomposition::from_scores(raw_scores(ds, problem, opts)?)
}

/// Decomposition per condition. Conditions named in `condition_problems` use
/// their own problem (and so their own benchmark); the rest use `problem`.
/// A condition listed there without records reports `EmptyDataset`.
pub fn per_condition_report(
    ds: &BehavioralDataset,
    problem: &DecisionProblem,
    condition_problems: &BTreeMap<String, DecisionProblem>,
    opts: ScoreOptions,
) -> BTreeMap<String, Result<LossDecomposition, BehavioralError>> {
    let mut names = ds.conditions();
    for name in condition_problems.keys() {
        if !names.contains(name) {
            names.push(name.clone());
        }
    }
    names
        .into_iter()
        .map(|name| {
            let bound = condition_problems.get(&name).unwrap_or(problem);
            let result = if bound.same_label_spaces(problem) {
                decompose_losses(&ds.for_condition(&name), bound, opts).map_err(|e| match e {
                    BehavioralError::LabelSpaceMismatch(_) => BehavioralError::LabelSpaceMismatch(name.clone()),
                    other => other,
                })
            } else {
                Err(BehavioralError::LabelSpaceMismatch(name.clone()))
            };
            (name, result)
        })
        .collect()
}

/// Bootstrap settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
    /// Two-sided coverage of the percentile intervals.
    pub coverage: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 1000,
            seed: 0,
            coverage: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

/// Percentile intervals from a nonparametric bootstrap over records. R and
/// R∅ depend only on the problem, so only B, C and the ratios vary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub method: String,
    pub resamples: usize,
    pub seed: u64,
    pub coverage: f64,
    pub behavioral: Interval,
    pub calibrated: Interval,
    pub total_loss: Option<Interval>,
    pub stimulus_prior_gap: Option<Interval>,
    pub updating_optimization_gap: Option<Interval>,
}

/// Resample `i` draws from seed stream `i`, so serial and parallel runs agree.
pub fn bootstrap(
    ds: &BehavioralDataset,
    problem: &DecisionProblem,
    opts: ScoreOptions,
    config: BootstrapConfig,
    parallel: bool,
) -> Result<BootstrapSummary, BehavioralError> {
    let base = raw_scores(ds, problem, opts)?;
    let table = problem.table(opts.rule);
    let n = ds.len();
    let one = |i: usize| -> (f64, f64) {
        let mut rng = stream_rng(config.seed, i as u64);
        let mut counts = vec![vec![0.0; problem.n_states()]; problem.n_actions()];
        for _ in 0..n {
            let c = ds.cells[rng.gen_range(0..n)];
            counts[c.action][c.state] += 1.0;
        }
        (
            score_from_weights(&counts, table) / n as f64,
            calibrated_from_weights(&counts, table, opts.laplace),
        )
    };
    let draws: Vec<(f64, f64)> = if parallel {
        (0..config.resamples).into_par_iter().map(one).collect()
    } else {
        (0..config.resamples).map(one).collect()
    };
    let alpha = (1.0 - config.coverage) / 2.0;
    let interval = |mut values: Vec<f64>| -> Interval {
        values.sort_by(f64::total_cmp);
        Interval {
            lower: quantile(&values, alpha),
            upper: quantile(&values, 1.0 - alpha),
        }
    };
    let bs: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let cs: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let ratios = (base.delta > MIN_VALUE_OF_INFORMATION).then(|| {
        let d = base.delta;
        let r = base.benchmark;
        (
            interval(bs.iter().map(|b| (r - b) / d).collect()),
            interval(cs.iter().map(|c| (r - c) / d).collect()),
            interval(draws.iter().map(|(b, c)| (c - b) / d).collect()),
        )
    });
    Ok(BootstrapSummary {
        method: "nonparametric percentile bootstrap over records".into(),
        resamples: config.resamples,
        seed: config.seed,
        coverage: config.coverage,
        behavioral: interval(bs),
        calibrated: interval(cs),
        total_loss: ratios.map(|r| r.0),
        stimulus_prior_gap: ratios.map(|r| r.1),
        updating_optimization_gap: ratios.map(|r| r.2),
    })
}

// Linear interpolation between order statistics of a sorted sample.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
