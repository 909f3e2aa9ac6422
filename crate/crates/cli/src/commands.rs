use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dptool_core::audit::{
    audit_problem, deception_screen, incentive_evaluation_consistency, is_degenerate, multiplicity_check, AuditError,
    AuditReport, MultiplicityResult, Verdict, Warning,
};
use dptool_core::behavioral::{
    bootstrap, ingest_csv, per_condition_report, raw_scores, BehavioralError, BootstrapConfig, BootstrapSummary,
    LossDecomposition, RawScores, ScoreOptions,
};
use dptool_core::normative::{
    binary_cutpoints, is_proper, optimal_action, optimal_action_certain, Benchmarks, ProperizedRule, Properness,
};
use dptool_core::problem::{validate_problem, ActionKind};
use dptool_core::simulation::{
    build_policy, design_sweep, exact_metrics, run_learning_agent, sample_dataset, AgentGrid, AgentSpec, ExactMetrics,
    LearningAgentState, SimulationError, SweepMode, SweepTable,
};
use dptool_core::{BeliefGrid, DecisionProblem, RuleChoice};
use serde::Serialize;

use crate::io::{
    emit_json, emit_rows, load_problem, paint, parse_spec, print_text, read_text, CmdResult, Failure, EXIT_DATA,
    EXIT_INVALID, EXIT_NOT_WELL_DEFINED, EXIT_OK, EXIT_USAGE, EXIT_ZERO_VALUE,
};
use crate::manifest::RunManifest;
use crate::{AnalyzeArgs, AuditArgs, Format, LearnArgs, RowFormat, ScoreArgs, SimulateArgs, SweepArgs};

pub fn validate(path: &Path) -> CmdResult {
    let (spec, _) = parse_spec(path)?;
    let report = validate_problem(&spec);
    print_text(&report.to_string())?;
    Ok(if report.is_valid() { EXIT_OK } else { EXIT_INVALID })
}

#[derive(Serialize)]
struct SignalSummary {
    signal: String,
    probability: f64,
    posterior: Vec<f64>,
    optimal_action: String,
    expected_score: f64,
}

#[derive(Serialize)]
struct Cutpoint {
    action: String,
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Thresholds {
    /// Exact belief intervals (in the second state's probability) per action.
    Cutpoints { state: String, intervals: Vec<Cutpoint> },
    /// Share of grid beliefs at which each action is optimal.
    GridShares {
        resolution: u32,
        shares: BTreeMap<String, f64>,
    },
}

#[derive(Serialize)]
struct ProperizedProperness {
    incentive: Properness,
    evaluation: Properness,
}

#[derive(Serialize)]
struct AnalyzeReport {
    rule: RuleChoice,
    benchmark: f64,
    baseline: f64,
    value_of_information: f64,
    signals: Vec<SignalSummary>,
    certainty_optimal: BTreeMap<String, String>,
    thresholds: Thresholds,
    properness: Option<ProperizedProperness>,
    warnings: Vec<Warning>,
}

fn grid_for(problem: &DecisionProblem, resolution: Option<u32>) -> BeliefGrid {
    let n = problem.n_states();
    BeliefGrid::simplex(n, resolution.unwrap_or_else(|| BeliefGrid::default_resolution(n)))
}

pub fn analyze(args: &AnalyzeArgs) -> CmdResult {
    let (problem, bytes) = load_problem(&args.problem)?;
    if args.grid == Some(0) {
        return Err(Failure::new(EXIT_USAGE, "--grid must be positive"));
    }
    let manifest = RunManifest::start(&bytes, None);
    let rule: RuleChoice = args.rule.into();
    let table = problem.table(rule);
    let bench = Benchmarks::compute(&problem, rule);
    let action_label = |a: usize| problem.actions().label(a).to_string();
    let info = problem.info();
    let marginal = info.signal_marginal();
    let signals = info
        .reachable_signals()
        .map(|v| {
            let posterior = info.posterior(v).expect("reachable");
            let (a, value) = optimal_action(table, &posterior);
            SignalSummary {
                signal: problem.signals().label(v).to_string(),
                probability: marginal[v],
                posterior: posterior.probs().to_vec(),
                optimal_action: action_label(a),
                expected_score: value,
            }
        })
        .collect();
    let certainty_optimal = (0..problem.n_states())
        .map(|s| {
            (
                problem.states().label(s).to_string(),
                action_label(optimal_action_certain(table, s)),
            )
        })
        .collect();
    let grid = grid_for(&problem, args.grid);
    let thresholds = if problem.n_states() == 2 {
        Thresholds::Cutpoints {
            state: problem.states().label(1).to_string(),
            intervals: binary_cutpoints(table)
                .into_iter()
                .map(|i| Cutpoint {
                    action: action_label(i.action),
                    lower: i.lower,
                    upper: i.upper,
                })
                .collect(),
        }
    } else {
        let properized = ProperizedRule::new(table.clone(), grid.clone());
        let mut shares = BTreeMap::new();
        for a in properized.grid_actions() {
            *shares.entry(action_label(*a)).or_insert(0.0) += 1.0 / grid.len() as f64;
        }
        Thresholds::GridShares {
            resolution: grid.resolution().unwrap_or_default(),
            shares,
        }
    };
    let properness = match (problem.actions().kind(), problem.actions().reports()) {
        (ActionKind::BeliefReport, Some(reports)) => {
            let report_grid = BeliefGrid::from_points(reports.to_vec());
            Some(ProperizedProperness {
                incentive: is_proper(problem.incentive_table(), &report_grid),
                evaluation: is_proper(problem.evaluation_table(), &report_grid),
            })
        }
        _ => None,
    };
    let mut warnings = Vec::new();
    if bench.value_of_information <= 1e-12 {
        warnings.push(Warning {
            code: "ZERO_VALUE_OF_INFORMATION".into(),
            message: "signals cannot raise the expected score; loss ratios are undefined".into(),
        });
    }
    if is_degenerate(&problem) {
        warnings.push(Warning {
            code: "DEGENERATE".into(),
            message: "the incentive-optimal action does not depend on the signal and information has no value".into(),
        });
    }
    warnings.extend(incentive_evaluation_consistency(&problem).warnings);
    let report = AnalyzeReport {
        rule,
        benchmark: bench.benchmark,
        baseline: bench.baseline,
        value_of_information: bench.value_of_information,
        signals,
        certainty_optimal,
        thresholds,
        properness,
        warnings,
    };
    emit_json(args.out.as_deref(), &manifest.finish(), &report)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum MultiplicityEntry {
    Computed(MultiplicityResult),
    NotApplicable { reason: String },
    InfeasibleDisclosure { reason: String },
}

#[derive(Serialize)]
struct FullAudit {
    audit: AuditReport,
    multiplicity: MultiplicityEntry,
    deception: Vec<Warning>,
}

fn multiplicity_text(m: &MultiplicityEntry) -> String {
    match m {
        MultiplicityEntry::NotApplicable { reason } => format!("multiplicity: not applicable ({reason})\n"),
        MultiplicityEntry::InfeasibleDisclosure { reason } => format!("multiplicity: {reason}\n"),
        MultiplicityEntry::Computed(r) => {
            let mut out = format!(
                "multiplicity: {} consistent extreme joint(s) under {}\n",
                r.vertices.len(),
                r.constraints.join("; ")
            );
            for b in &r.signals {
                match (b.min, b.max) {
                    (Some(lo), Some(hi)) => out.push_str(&format!(
                        "  {}: posterior range [{lo:.4}, {hi:.4}], optimal {} .. {}{}\n",
                        b.signal,
                        b.action_at_min.as_deref().unwrap_or("?"),
                        b.action_at_max.as_deref().unwrap_or("?"),
                        if b.action_flips { "  ACTION FLIPS" } else { "" }
                    )),
                    _ => out.push_str(&format!("  {}: never reached under disclosed constraints\n", b.signal)),
                }
            }
            for s in &r.ignored_statistics {
                out.push_str(&format!("  ignored (no linear constraint): {s}\n"));
            }
            out
        }
    }
}

pub fn audit(args: &AuditArgs) -> CmdResult {
    let (problem, bytes) = load_problem(&args.problem)?;
    let manifest = RunManifest::start(&bytes, None);
    let report = audit_problem(&problem);
    let multiplicity = match multiplicity_check(&problem) {
        Ok(m) => MultiplicityEntry::Computed(m),
        Err(e @ AuditError::NotBinaryPrediction { .. }) => MultiplicityEntry::NotApplicable { reason: e.to_string() },
        Err(e @ AuditError::InfeasibleDisclosure) => MultiplicityEntry::InfeasibleDisclosure { reason: e.to_string() },
    };
    let full = FullAudit {
        deception: deception_screen(&problem),
        audit: report,
        multiplicity,
    };
    let manifest = manifest.finish();
    match args.format {
        Format::Json => emit_json(None, &manifest, &full)?,
        Format::Text => {
            let color = match full.audit.verdict {
                Verdict::WellDefined => 32,
                Verdict::IllDefined => 31,
                Verdict::Degenerate => 33,
            };
            let text = full.audit.to_string();
            let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
            print_text(&format!(
                "{}\n{rest}{}",
                paint(first, color),
                multiplicity_text(&full.multiplicity)
            ))?;
        }
    }
    if let Some(out) = &args.out {
        emit_json(Some(out), &manifest, &full)?;
    }
    Ok(match full.audit.verdict {
        Verdict::WellDefined => EXIT_OK,
        _ => EXIT_NOT_WELL_DEFINED,
    })
}

fn load_agent(path: Option<&Path>, manifest: &mut RunManifest) -> Result<AgentSpec, Failure> {
    match path {
        None => Ok(AgentSpec::rational()),
        Some(path) => {
            let (text, bytes) = read_text(path)?;
            manifest.add_input("agent", &bytes);
            AgentSpec::from_json(&text).map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", path.display())))
        }
    }
}

fn simulation_failure(e: SimulationError) -> Failure {
    Failure::new(EXIT_INVALID, e.to_string())
}

#[derive(Serialize)]
struct ExactReport {
    rule: RuleChoice,
    agent: AgentSpec,
    policy: Vec<Vec<f64>>,
    metrics: ExactMetrics,
    decomposition: Option<LossDecomposition>,
}

pub fn simulate(args: &SimulateArgs) -> CmdResult {
    let (problem, bytes) = load_problem(&args.problem)?;
    let mut manifest = RunManifest::start(&bytes, (!args.exact).then_some(args.seed));
    let agent = load_agent(args.agent.as_deref(), &mut manifest)?;
    let policy = build_policy(&problem, &agent).map_err(simulation_failure)?;
    if args.exact {
        let rule: RuleChoice = args.rule.into();
        let metrics = exact_metrics(&problem, &policy, rule);
        let report = ExactReport {
            rule,
            agent,
            policy: policy.rows().to_vec(),
            decomposition: metrics.decomposition().ok(),
            metrics,
        };
        emit_json(args.out.as_deref(), &manifest.finish(), &report)?;
        return Ok(EXIT_OK);
    }
    if args.trials == 0 {
        return Err(Failure::new(EXIT_USAGE, "--trials must be positive"));
    }
    let ds = sample_dataset(&problem, &policy, args.trials, args.seed);
    let mut rows = Vec::new();
    ds.write_csv(&mut rows)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("cannot encode CSV: {e}")))?;
    emit_rows(args.out.as_deref(), &manifest.finish(), &rows)?;
    Ok(EXIT_OK)
}

fn data_failure(e: BehavioralError) -> Failure {
    match e {
        BehavioralError::Io { .. } => Failure::new(EXIT_USAGE, e.to_string()),
        BehavioralError::Parse { .. } | BehavioralError::UnknownLabel { .. } | BehavioralError::EmptyDataset => {
            Failure::new(EXIT_DATA, format!("trial data: {e}"))
        }
        other => Failure::new(EXIT_INVALID, other.to_string()),
    }
}

#[derive(Serialize)]
struct ConditionEntry {
    records: usize,
    decomposition: Option<LossDecomposition>,
    /// Raw scores when Δ is zero and the ratios are undefined.
    raw: Option<RawScores>,
    error: Option<String>,
}

#[derive(Serialize)]
struct ScoreReport {
    rule: RuleChoice,
    records: usize,
    laplace: Option<f64>,
    scores: RawScores,
    decomposition: Option<LossDecomposition>,
    by_condition: Option<BTreeMap<String, ConditionEntry>>,
    bootstrap: Option<BootstrapSummary>,
}

fn parse_binding(binding: &str) -> Result<(String, PathBuf), Failure> {
    match binding.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(Failure::new(
            EXIT_USAGE,
            format!("--condition-problem expects NAME=PATH, got '{binding}'"),
        )),
    }
}

pub fn score(args: &ScoreArgs) -> CmdResult {
    let (problem, bytes) = load_problem(&args.problem)?;
    let seed = args.bootstrap.map(|_| args.seed);
    let mut manifest = RunManifest::start(&bytes, seed);
    let (_, data_bytes) = read_text(&args.data)?;
    manifest.add_input("data", &data_bytes);
    let ds = ingest_csv(&args.data, &problem).map_err(data_failure)?;
    if let Some(alpha) = args.laplace {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Failure::new(EXIT_USAGE, "--laplace must be positive"));
        }
    }
    let opts = ScoreOptions {
        rule: args.rule.into(),
        laplace: args.laplace,
    };
    let scores = raw_scores(&ds, &problem, opts).map_err(data_failure)?;
    let mut zero_value = false;

    let decomposition = if args.decompose {
        match LossDecomposition::from_scores(scores) {
            Ok(d) => Some(d),
            Err(BehavioralError::ZeroValueOfInformation(_)) => {
                zero_value = true;
                None
            }
            Err(e) => return Err(data_failure(e)),
        }
    } else {
        None
    };

    let by_condition = if args.by_condition || !args.condition_problems.is_empty() {
        let mut bound = BTreeMap::new();
        for binding in &args.condition_problems {
            let (name, path) = parse_binding(binding)?;
            let (p, b) = load_problem(&path)?;
            manifest.add_input(format!("condition:{name}"), &b);
            bound.insert(name, p);
        }
        let entries = per_condition_report(&ds, &problem, &bound, opts)
            .into_iter()
            .map(|(name, result)| {
                let records = ds.for_condition(&name).len();
                let entry = match result {
                    Ok(d) => ConditionEntry {
                        records,
                        decomposition: Some(d),
                        raw: None,
                        error: None,
                    },
                    Err(BehavioralError::ZeroValueOfInformation(raw)) => {
                        zero_value = true;
                        ConditionEntry {
                            records,
                            decomposition: None,
                            raw: Some(raw),
                            error: Some("value of information is zero".into()),
                        }
                    }
                    Err(e) => ConditionEntry {
                        records,
                        decomposition: None,
                        raw: None,
                        error: Some(e.to_string()),
                    },
                };
                (name, entry)
            })
            .collect();
        Some(entries)
    } else {
        None
    };

    let bootstrap = match args.bootstrap {
        Some(0) => return Err(Failure::new(EXIT_USAGE, "--bootstrap needs at least one resample")),
        Some(resamples) => {
            if !(args.coverage > 0.0 && args.coverage < 1.0) {
                return Err(Failure::new(EXIT_USAGE, "--coverage must lie in (0, 1)"));
            }
            let config = BootstrapConfig {
                resamples,
                seed: args.seed,
                coverage: args.coverage,
            };
            Some(bootstrap(&ds, &problem, opts, config, args.parallel).map_err(data_failure)?)
        }
        None => None,
    };

    let report = ScoreReport {
        rule: opts.rule,
        records: ds.len(),
        laplace: args.laplace,
        scores,
        decomposition,
        by_condition,
        bootstrap,
    };
    emit_json(args.out.as_deref(), &manifest.finish(), &report)?;
    if zero_value {
        eprintln!("error: value of information is zero; loss ratios are undefined (raw scores reported)");
        return Ok(EXIT_ZERO_VALUE);
    }
    Ok(EXIT_OK)
}

pub fn sweep(args: &SweepArgs) -> CmdResult {
    let (problem, bytes) = load_problem(&args.problem)?;
    let mode = match args.trials {
        Some(0) => return Err(Failure::new(EXIT_USAGE, "--trials must be positive")),
        Some(trials) => SweepMode::Sampled {
            trials,
            seed: args.seed,
        },
        None => SweepMode::Exact,
    };
    let mut manifest = RunManifest::start(&bytes, args.trials.map(|_| args.seed));
    let (text, agent_bytes) = read_text(&args.agents)?;
    manifest.add_input("agents", &agent_bytes);
    let grid = AgentGrid::from_json(&text)
        .map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", args.agents.display())))?;
    let agents = grid.expand();
    for (i, agent) in agents.iter().enumerate() {
        agent
            .validate(&problem)
            .map_err(|e| Failure::new(EXIT_INVALID, format!("agent {i}: {e}")))?;
    }
    let table: SweepTable = design_sweep(&problem, &agents, mode, args.rule.into(), args.parallel);
    let manifest = manifest.finish();
    match args.format {
        RowFormat::Json => emit_json(args.out.as_deref(), &manifest, &table)?,
        RowFormat::Csv => {
            let mut rows = Vec::new();
            table
                .write_csv(&mut rows)
                .map_err(|e| Failure::new(EXIT_USAGE, format!("cannot encode CSV: {e}")))?;
            emit_rows(args.out.as_deref(), &manifest, &rows)?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct LearnReport {
    alpha: f64,
    trials: usize,
    benchmark: f64,
    baseline: f64,
    /// Expected incentive score of the policy in force at each trial.
    curve: Vec<f64>,
    final_pseudo_counts: Vec<Vec<f64>>,
}

pub fn learn(args: &LearnArgs) -> CmdResult {
    let (problem, bytes) = load_problem(&args.problem)?;
    let mut manifest = RunManifest::start(&bytes, Some(args.seed));
    let agent = load_agent(args.agent.as_deref(), &mut manifest)?;
    let initial =
        LearningAgentState::uniform(problem.n_signals(), problem.n_states(), args.alpha).map_err(simulation_failure)?;
    let run = run_learning_agent(&problem, &initial, args.trials, args.seed, &agent).map_err(simulation_failure)?;
    let bench = Benchmarks::compute(&problem, RuleChoice::Incentive);
    let report = LearnReport {
        alpha: args.alpha,
        trials: args.trials,
        benchmark: bench.benchmark,
        baseline: bench.baseline,
        curve: run.curve,
        final_pseudo_counts: run.final_state.pseudo_counts().to_vec(),
    };
    emit_json(args.out.as_deref(), &manifest.finish(), &report)?;
    Ok(EXIT_OK)
}
