//! The four subcommands. Each builds its inputs, runs seeded work, prints
//! a human summary to stdout, and writes `trials.csv` / `report.json`
//! according to `--format`. File contents depend only on the config and
//! seeds, never on timing or thread count.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use indexmap::IndexMap;
use rayon::prelude::*;

use prefsim_core::choice_model::sample_response;
use prefsim_core::contest::{
    exact_expected_scores, run_contest, score_agglomerative, score_inclusive, ExpectedScores,
    Perspective,
};
use prefsim_core::decision::{empirical_decision, kl_divergence, theorem3_bound_with_pcd};
use prefsim_core::error::Error as CoreError;
use prefsim_core::rng;
use prefsim_core::score::Score;
use prefsim_core::verify::{
    self, check_theorem1, check_theorem2, check_theorem3, defaults, mc_estimate,
    summarize_samples, ContestScenario, DecisionScenario, TheoremCheckReport, TheoremId,
};
use prefsim_core::fig1;

use crate::config::{parse_scenario, BuiltScenario, ScenarioConfig};
use crate::report::{
    record_to_csv, select, to_json_bytes, ContestReport, DecisionPolicyReport, RunReport,
    ScorePair, SelectionReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    fn wants_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    fn wants_json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

/// Global flags shared by every subcommand.
pub struct CommonArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub out: PathBuf,
    pub format: OutputFormat,
}

impl CommonArgs {
    fn load_config(&self) -> Result<Option<ScenarioConfig>> {
        match &self.config {
            Some(path) => Ok(Some(parse_scenario(path)?)),
            None => Ok(None),
        }
    }

    fn require_config(&self, command: &str) -> Result<ScenarioConfig> {
        self.load_config()?
            .with_context(|| format!("the {command} command requires --config"))
    }

    fn effective_seed(&self, config: Option<&ScenarioConfig>, fallback: u64) -> u64 {
        self.seed
            .unwrap_or_else(|| config.map(|c| c.seed).unwrap_or(fallback))
    }

    fn effective_reps(&self, config: Option<&ScenarioConfig>, fallback: u64) -> u64 {
        self.reps
            .unwrap_or_else(|| config.map(|c| c.reps).unwrap_or(fallback))
    }
}

fn write_outputs(
    args: &CommonArgs,
    report: &RunReport,
    csv: Option<&str>,
) -> Result<()> {
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    if args.format.wants_csv() {
        if let Some(csv) = csv {
            let path = args.out.join("trials.csv");
            std::fs::write(&path, csv)
                .with_context(|| format!("cannot write {}", path.display()))?;
            println!("wrote {}", path.display());
        }
    }
    if args.format.wants_json() {
        let path = args.out.join("report.json");
        std::fs::write(&path, to_json_bytes(report)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn score_pair(
    names: &[String; 2],
    agg: (Score, Score),
    inc: (Score, Score),
) -> ScorePair {
    let mut agglomerative = IndexMap::new();
    agglomerative.insert(names[0].clone(), agg.0);
    agglomerative.insert(names[1].clone(), agg.1);
    let mut inclusive = IndexMap::new();
    inclusive.insert(names[0].clone(), inc.0);
    inclusive.insert(names[1].clone(), inc.1);
    ScorePair {
        agglomerative,
        inclusive,
    }
}

fn selection(names: &[String; 2], pair: &ScorePair) -> SelectionReport {
    let agg = select(
        &names[0],
        pair.agglomerative[&names[0]],
        &names[1],
        pair.agglomerative[&names[1]],
    );
    let inc = select(
        &names[0],
        pair.inclusive[&names[0]],
        &names[1],
        pair.inclusive[&names[1]],
    );
    let agreement = agg == inc;
    SelectionReport {
        agglomerative: agg,
        inclusive: inc,
        agreement,
    }
}

// ---------------------------------------------------------------------------
// contest
// ---------------------------------------------------------------------------

pub fn run_contest_command(args: &CommonArgs, pair: Option<&[String]>) -> Result<i32> {
    let config = args.require_config("contest")?;
    let built = config.build()?;
    let seed = args.effective_seed(Some(&config), 0);
    let reps = args.effective_reps(Some(&config), 1000);

    let names: [String; 2] = match pair {
        Some(p) => {
            if p.len() != 2 {
                bail!("--pair needs exactly two policy names, got {}", p.len());
            }
            [p[0].clone(), p[1].clone()]
        }
        None => {
            if built.policies.len() == 2 {
                let mut keys = built.policies.keys();
                [keys.next().unwrap().clone(), keys.next().unwrap().clone()]
            } else {
                bail!(
                    "--pair is required when the config defines {} policies",
                    built.policies.len()
                );
            }
        }
    };
    let policy_a = built
        .policies
        .get(&names[0])
        .with_context(|| format!("unknown policy name \"{}\"", names[0]))?;
    let policy_b = built
        .policies
        .get(&names[1])
        .with_context(|| format!("unknown policy name \"{}\"", names[1]))?;

    let record = run_contest(policy_a, policy_b, &built.model, config.trials, seed)?;
    let realized = score_pair(
        &names,
        (
            score_agglomerative(&record, Perspective::A),
            score_agglomerative(&record, Perspective::B),
        ),
        (
            score_inclusive(&record, policy_a, Perspective::A),
            score_inclusive(&record, policy_b, Perspective::B),
        ),
    );
    let realized_selection = selection(&names, &realized);

    let (exact_expected, oracle_note) =
        match exact_expected_scores(policy_a, policy_b, &built.model, config.trials) {
            Ok(e) => (
                Some(score_pair(
                    &names,
                    (Score::finite(e.agg_a), Score::finite(e.agg_b)),
                    (e.inc_a, e.inc_b),
                )),
                None,
            ),
            Err(CoreError::EnumerationTooLarge { tuples, limit }) => (
                None,
                Some(format!(
                    "exact oracle skipped: {tuples} outcome tuples exceed the cap of {limit}"
                )),
            ),
            Err(e) => return Err(e.into()),
        };
    let expected_selection = exact_expected.as_ref().map(|e| selection(&names, e));

    let mc_master = rng::derive(seed, 1);
    let mut estimates = IndexMap::new();
    for (key, perspective, policy) in [
        ("agglomerative", Perspective::A, policy_a),
        ("agglomerative", Perspective::B, policy_b),
        ("inclusive", Perspective::A, policy_a),
        ("inclusive", Perspective::B, policy_b),
    ] {
        let name = match perspective {
            Perspective::A => &names[0],
            Perspective::B => &names[1],
        };
        let trials = config.trials;
        let statistic = |rep_seed: u64| {
            let r = run_contest(policy_a, policy_b, &built.model, trials, rep_seed)
                .expect("shapes already validated");
            if key == "agglomerative" {
                score_agglomerative(&r, perspective)
            } else {
                score_inclusive(&r, policy, perspective)
            }
        };
        estimates.insert(format!("{key}_{name}"), mc_estimate(reps, mc_master, statistic)?);
    }

    println!(
        "contest {} vs {} over {} trials (seed {seed})",
        names[0], names[1], config.trials
    );
    println!(
        "  realized counts: {} = {}, {} = {}",
        names[0],
        realized.agglomerative[&names[0]],
        names[1],
        realized.agglomerative[&names[1]]
    );
    println!(
        "  realized inclusive: {} = {}, {} = {}",
        names[0],
        realized.inclusive[&names[0]],
        names[1],
        realized.inclusive[&names[1]]
    );
    println!(
        "  agglomerative objective selects {}; inclusive objective selects {}",
        realized_selection.agglomerative, realized_selection.inclusive
    );
    if let Some(note) = &oracle_note {
        println!("  {note}");
    }

    let mut report = RunReport::new("contest", seed, Some(config.clone()));
    report.contest = Some(ContestReport {
        pair: names,
        trials: config.trials,
        realized,
        realized_selection,
        exact_expected,
        expected_selection,
        oracle_note,
        estimates,
    });
    let csv = record_to_csv(&record);
    write_outputs(args, &report, Some(&csv))?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// decide
// ---------------------------------------------------------------------------

pub fn run_decide_command(args: &CommonArgs) -> Result<i32> {
    let config = args.require_config("decide")?;
    let built = config.build()?;
    let problem = built
        .problem
        .as_ref()
        .context("the decide command requires a `decision` block in the config")?;
    if config.trials == 0 {
        bail!("the decide command requires trials_T >= 1");
    }
    let seed = args.effective_seed(Some(&config), 0);
    let reps = args.effective_reps(Some(&config), 1000);

    let truth = prefsim_core::decision::true_values(problem, &built.pcd)?;
    let best_action = truth
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();

    let mut reports = Vec::new();
    for (idx, (name, policy)) in built.policies.iter().enumerate() {
        let kl = kl_divergence(
            built.pcd.probs().row(problem.prompt()),
            policy.probs().row(problem.prompt()),
        )?;
        let bound =
            theorem3_bound_with_pcd(problem, &built.pcd, policy, config.trials, config.delta)?;

        let master = rng::derive(seed, 100 + idx as u64);
        let runs: Vec<prefsim_core::DecisionResult> = (0..reps)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::stream(rng::derive(master, i), 0);
                let responses: Vec<usize> = (0..config.trials)
                    .map(|_| sample_response(policy, problem.prompt(), &mut r))
                    .collect();
                empirical_decision(problem, &responses, &built.pcd)
                    .expect("sampled responses are in range")
            })
            .collect();

        let mut counts = vec![0u64; problem.num_actions()];
        let mut tie_count = 0u64;
        for run in &runs {
            counts[run.chosen_action] += 1;
            let max = run
                .empirical_values
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            if run.empirical_values.iter().filter(|&&v| v == max).count() > 1 {
                tie_count += 1;
            }
        }
        let chosen_action_frequency: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 / reps as f64)
            .collect();

        let gaps: Vec<Score> = runs
            .iter()
            .map(|r| Score::finite(r.optimality_gap))
            .collect();
        let gap = summarize_samples(&gaps)?;

        let violations: Vec<Score> = runs
            .iter()
            .map(|r| {
                let violated = match bound.value() {
                    Some(b) => r.true_values[r.chosen_action] < b,
                    None => false,
                };
                Score::finite(if violated { 1.0 } else { 0.0 })
            })
            .collect();
        let violation_frequency = summarize_samples(&violations)?;

        println!(
            "decide {name}: KL = {kl:.6e}, bound = {bound}, mean gap = {:.6e}, \
             violation frequency = {:.4}",
            gap.mean, violation_frequency.mean
        );

        reports.push(DecisionPolicyReport {
            policy: name.clone(),
            prompt: problem.prompt(),
            trials: config.trials,
            delta: config.delta,
            kl,
            bound,
            true_values: truth.clone(),
            best_action,
            chosen_action_frequency,
            empirical_tie_count: tie_count,
            gap,
            violation_frequency,
            first_run: runs[0].clone(),
        });
    }

    let mut report = RunReport::new("decide", seed, Some(config.clone()));
    report.decision = Some(reports);
    write_outputs(args, &report, None)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

fn parse_selector(theorems: &[String]) -> Result<Vec<TheoremId>> {
    let mut selected = Vec::new();
    for raw in theorems {
        for part in raw.split(',') {
            let part = part.trim();
            let id = match part.to_ascii_lowercase().as_str() {
                "" => continue,
                "all" => {
                    return Ok(vec![TheoremId::T1, TheoremId::T2, TheoremId::T3, TheoremId::T4])
                }
                "t1" => TheoremId::T1,
                "t2" => TheoremId::T2,
                "t3" => TheoremId::T3,
                "t4" => TheoremId::T4,
                _ => bail!("unknown theorem selector \"{part}\" (use T1..T4 or all)"),
            };
            if !selected.contains(&id) {
                selected.push(id);
            }
        }
    }
    if selected.is_empty() {
        bail!("empty theorem selector");
    }
    Ok(selected)
}

/// Default-suite checks for one selector entry, with the same sub-seed
/// layout as the full default run so partial runs reproduce subsets of it.
fn default_checks(
    id: TheoremId,
    seed: u64,
    reps_override: Option<u64>,
) -> Result<Vec<TheoremCheckReport>> {
    let checks = match id {
        TheoremId::T1 => verify::theorem1_suite(
            defaults::T1_SCENARIOS,
            reps_override.unwrap_or(defaults::T1_REPS),
            rng::derive(seed, 1),
        )?,
        TheoremId::T2 => verify::theorem2_suite(
            defaults::T2_PAIRS,
            reps_override.unwrap_or(defaults::T2_REPS),
            rng::derive(seed, 2),
        )?,
        TheoremId::T3 => verify::theorem3_suite(
            defaults::T3_SCENARIOS,
            defaults::T3_TRIALS,
            defaults::T3_DELTA,
            reps_override.unwrap_or(defaults::T3_RUNS),
            rng::derive(seed, 3),
        )?,
        TheoremId::T4 => vec![verify::theorem4_report(rng::derive(seed, 4))?],
    };
    Ok(checks)
}

/// Config-scoped checks: every policy is run through the selected checks
/// against the config's model.
fn config_checks(
    id: TheoremId,
    config: &ScenarioConfig,
    built: &BuiltScenario,
    seed: u64,
    reps: u64,
) -> Result<Vec<TheoremCheckReport>> {
    let mut reports = Vec::new();
    match id {
        TheoremId::T1 | TheoremId::T2 => {
            for (idx, (name, policy)) in built.policies.iter().enumerate() {
                let scenario = ContestScenario {
                    descriptor: format!("config policy \"{name}\""),
                    model: built.model.clone(),
                    policy: policy.clone(),
                    trials: config.trials,
                };
                let check_seed = rng::derive(seed, 1000 * (id as u64 + 1) + idx as u64);
                let check = match id {
                    TheoremId::T1 => check_theorem1(&scenario, reps, check_seed),
                    _ => check_theorem2(&scenario, reps, check_seed),
                };
                reports.push(check.with_context(|| format!("checking {id} for policy \"{name}\""))?);
            }
        }
        TheoremId::T3 => {
            let problem = built.problem.as_ref().context(
                "verifying T3 against a config requires a `decision` block",
            )?;
            for (idx, (name, policy)) in built.policies.iter().enumerate() {
                let scenario = DecisionScenario {
                    descriptor: format!("config policy \"{name}\""),
                    model: built.model.clone(),
                    policy: policy.clone(),
                    problem: problem.clone(),
                };
                let check = check_theorem3(
                    &scenario,
                    config.trials,
                    config.delta,
                    reps,
                    rng::derive(seed, 3000 + idx as u64),
                );
                reports.push(check.with_context(|| format!("checking T3 for policy \"{name}\""))?);
            }
        }
        TheoremId::T4 => {
            reports.push(verify::theorem4_report(rng::derive(seed, 4))?);
        }
    }
    Ok(reports)
}

pub fn run_verify_command(args: &CommonArgs, theorems: &[String]) -> Result<i32> {
    let selected = parse_selector(theorems)?;
    let config = args.load_config()?;
    let seed = args.effective_seed(config.as_ref(), defaults::SEED);

    let mut checks = Vec::new();
    match &config {
        Some(cfg) => {
            let built = cfg.build()?;
            let reps = args.effective_reps(Some(cfg), 1000);
            for &id in &selected {
                checks.extend(config_checks(id, cfg, &built, seed, reps)?);
            }
        }
        None => {
            for &id in &selected {
                checks.extend(default_checks(id, seed, args.reps)?);
            }
        }
    }

    let mut all_passed = true;
    for check in &checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {} {}: margin {:.3e}",
            check.theorem_id, check.scenario, check.margin
        );
        all_passed &= check.passed;
    }
    println!(
        "verify: {}/{} checks passed",
        checks.iter().filter(|c| c.passed).count(),
        checks.len()
    );

    let mut report = RunReport::new("verify", seed, config);
    report.theorem_checks = Some(checks);
    report.all_passed = Some(all_passed);
    write_outputs(args, &report, None)?;
    Ok(if all_passed { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// example-fig1
// ---------------------------------------------------------------------------

pub fn run_example_fig1(args: &CommonArgs) -> Result<i32> {
    if args.seed.is_some() {
        println!("note: example-fig1 replays a fixed record; --seed is ignored");
    }
    let f = fig1::scenario();
    let names = ["A".to_string(), "B".to_string()];

    let realized = score_pair(
        &names,
        (
            score_agglomerative(&f.record, Perspective::A),
            score_agglomerative(&f.record, Perspective::B),
        ),
        (
            score_inclusive(&f.record, &f.policy_a, Perspective::A),
            score_inclusive(&f.record, &f.policy_b, Perspective::B),
        ),
    );
    let realized_selection = selection(&names, &realized);

    let exact: ExpectedScores =
        exact_expected_scores(&f.policy_a, &f.policy_b, &f.model, f.record.num_trials())?;
    let exact_expected = score_pair(
        &names,
        (Score::finite(exact.agg_a), Score::finite(exact.agg_b)),
        (exact.inc_a, exact.inc_b),
    );
    let expected_selection = selection(&names, &exact_expected);

    println!("built-in example: one prompt, two responses, three fixed trials");
    println!(
        "  S_agg(A) = {}, S_agg(B) = {}",
        realized.agglomerative["A"], realized.agglomerative["B"]
    );
    println!(
        "  S_inc(A) = {}, S_inc(B) = {}",
        realized.inclusive["A"], realized.inclusive["B"]
    );
    println!(
        "  agglomerative objective selects {}; inclusive objective selects {}",
        realized_selection.agglomerative, realized_selection.inclusive
    );
    println!(
        "  the two objectives {} on this record",
        if realized_selection.agreement {
            "agree"
        } else {
            "disagree"
        }
    );
    println!(
        "  exact expectations: E[S_agg] = ({}, {}), E[S_inc] = ({}, {})",
        exact_expected.agglomerative["A"],
        exact_expected.agglomerative["B"],
        exact_expected.inclusive["A"],
        exact_expected.inclusive["B"]
    );

    let mut report = RunReport::new("example-fig1", fig1::FIXED_RECORD_SEED, None);
    report.contest = Some(ContestReport {
        pair: names,
        trials: f.record.num_trials(),
        realized,
        realized_selection,
        exact_expected: Some(exact_expected),
        expected_selection: Some(expected_selection),
        oracle_note: None,
        estimates: IndexMap::new(),
    });
    let csv = record_to_csv(&f.record);
    write_outputs(args, &report, Some(&csv))?;
    Ok(0)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selector_accepts_subsets_and_all() {
        assert_eq!(
            parse_selector(&["all".to_string()]).unwrap(),
            vec![TheoremId::T1, TheoremId::T2, TheoremId::T3, TheoremId::T4]
        );
        assert_eq!(
            parse_selector(&["T4".to_string(), "t2".to_string()]).unwrap(),
            vec![TheoremId::T4, TheoremId::T2]
        );
        assert_eq!(
            parse_selector(&["T1,T3".to_string()]).unwrap(),
            vec![TheoremId::T1, TheoremId::T3]
        );
        assert!(parse_selector(&["T5".to_string()]).is_err());
        assert!(parse_selector(&[]).is_err());
    }
}
