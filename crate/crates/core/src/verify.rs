//! Seeded Monte Carlo estimation and the four built-in guarantee checks.
//!
//! Each check pairs an exact enumeration oracle with seeded simulation and
//! reports pass/fail against a stated quantitative criterion:
//!
//! * T1: the constructed deterministic challenger weakly beats its target
//!   in expected agglomerative score, and wins at least half of seeded
//!   contests.
//! * T2: the expected inclusive-score advantage of the maximally inclusive
//!   policy equals an independently computed sum of Bernoulli KL
//!   divergences, and is never negative.
//! * T3: the deployment-value lower bound is violated no more often than
//!   its confidence level allows.
//! * T4: the two-action counterexample scenario misleads the empirical
//!   decision by exactly its designed gap at every sample size.
//!
//! All estimates derive per-repetition seeds from a master seed with a
//! counter, so results are identical across runs and across thread counts.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::choice_model::{
    maximally_inclusive_ai, sample_response, softmax_choice_distribution, GenerativePolicy,
    PopulationModel,
};
use crate::contest::{
    construct_dominating_deterministic, dominating_response, exact_expected_scores,
    expected_inclusive_gap, run_contest, score_agglomerative, score_inclusive, Perspective,
};
use crate::decision::{
    empirical_decision, theorem3_bound, theorem4_scenario, true_values, DecisionProblem,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;
use crate::score::Score;

/// Confidence band half-width in standard errors, used by every check.
pub const SE_BAND: f64 = 4.0;

/// Summary of a batch of seeded repetitions of a scalar statistic.
/// Negative-infinity samples are excluded from the mean and standard error
/// and counted separately; when every sample is infinite the mean itself
/// is negative infinity. The interval is `mean ± 4 SE`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub n: u64,
    #[serde(serialize_with = "crate::score::json_num::serialize")]
    pub mean: f64,
    pub std_error: f64,
    #[serde(serialize_with = "crate::score::json_num::serialize")]
    pub ci_low: f64,
    #[serde(serialize_with = "crate::score::json_num::serialize")]
    pub ci_high: f64,
    pub infinite_count: u64,
}

/// Identifier of one of the four built-in checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TheoremId {
    T1,
    T2,
    T3,
    T4,
}

impl std::fmt::Display for TheoremId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TheoremId::T1 => "T1",
            TheoremId::T2 => "T2",
            TheoremId::T3 => "T3",
            TheoremId::T4 => "T4",
        };
        f.write_str(s)
    }
}

/// Result of one check on one scenario. `criterion` states the pass rule
/// in words; `margin` is the smallest slack by which any part of that rule
/// held (negative means failed by that much).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremCheckReport {
    pub theorem_id: TheoremId,
    pub scenario: String,
    #[serde(serialize_with = "crate::score::json_num::map::serialize")]
    pub exact_quantities: BTreeMap<String, f64>,
    pub mc_quantities: BTreeMap<String, EstimatorSummary>,
    pub criterion: String,
    pub passed: bool,
    #[serde(serialize_with = "crate::score::json_num::serialize")]
    pub margin: f64,
}

/// A contest-shaped scenario: a population model, one policy, and a trial
/// count. The checks derive any opponent they need.
#[derive(Debug, Clone)]
pub struct ContestScenario {
    pub descriptor: String,
    pub model: PopulationModel,
    pub policy: GenerativePolicy,
    pub trials: u64,
}

/// A decision-shaped scenario: model, sampling policy, and value table.
#[derive(Debug, Clone)]
pub struct DecisionScenario {
    pub descriptor: String,
    pub model: PopulationModel,
    pub policy: GenerativePolicy,
    pub problem: DecisionProblem,
}

// ---------------------------------------------------------------------------
// Monte Carlo harness
// ---------------------------------------------------------------------------

/// Runs `n_reps` independent repetitions of `statistic`, one per derived
/// seed, in parallel, and summarizes them. The repetition order is fixed by
/// the seed counter, so the summary does not depend on thread count.
pub fn mc_estimate<F>(n_reps: u64, master_seed: u64, statistic: F) -> Result<EstimatorSummary>
where
    F: Fn(u64) -> Score + Sync,
{
    if n_reps < 2 {
        return Err(Error::TooFewReps { got: n_reps });
    }
    let samples: Vec<Score> = (0..n_reps)
        .into_par_iter()
        .map(|i| statistic(rng::derive(master_seed, i)))
        .collect();
    Ok(summarize(&samples))
}

/// Summarizes an already collected sample batch under the same rules as
/// [`mc_estimate`]. At least two samples are required.
pub fn summarize_samples(samples: &[Score]) -> Result<EstimatorSummary> {
    if samples.len() < 2 {
        return Err(Error::TooFewReps {
            got: samples.len() as u64,
        });
    }
    Ok(summarize(samples))
}

fn summarize(samples: &[Score]) -> EstimatorSummary {
    let n = samples.len() as u64;
    let finite: Vec<f64> = samples.iter().filter_map(|s| s.value()).collect();
    let infinite_count = n - finite.len() as u64;
    if finite.is_empty() {
        return EstimatorSummary {
            n,
            mean: f64::NEG_INFINITY,
            std_error: 0.0,
            ci_low: f64::NEG_INFINITY,
            ci_high: f64::NEG_INFINITY,
            infinite_count,
        };
    }
    let fn_ = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / fn_;
    let std_error = if finite.len() < 2 {
        0.0
    } else {
        let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (fn_ - 1.0);
        (var / fn_).sqrt()
    };
    EstimatorSummary {
        n,
        mean,
        std_error,
        ci_low: mean - SE_BAND * std_error,
        ci_high: mean + SE_BAND * std_error,
        infinite_count,
    }
}

/// Whether an estimate is consistent with a finite oracle value: within
/// 4 standard errors and with no infinite samples.
pub fn consistent_with_oracle(summary: &EstimatorSummary, oracle: f64) -> bool {
    summary.infinite_count == 0 && (summary.mean - oracle).abs() <= SE_BAND * summary.std_error
}

// ---------------------------------------------------------------------------
// Random scenario generators
// ---------------------------------------------------------------------------

/// Uniform-prompt model with `|X|` in 1..=max_prompts, `|Y|` in
/// 2..=max_responses, and utilities i.i.d. uniform on [-2, 2].
pub fn random_model(seed: u64, max_prompts: usize, max_responses: usize) -> PopulationModel {
    use rand::Rng;
    let mut rng = rng::stream(seed, 0);
    let nx = rng.gen_range(1..=max_prompts);
    let ny = rng.gen_range(2..=max_responses);
    let data: Vec<f64> = (0..nx * ny).map(|_| rng.gen_range(-2.0..=2.0)).collect();
    PopulationModel::with_uniform_prompts(Matrix::from_flat(nx, ny, data).unwrap())
        .expect("generated utilities are finite")
}

/// Policy with every row drawn from the flat simplex (normalized unit
/// exponentials), so all entries are strictly positive.
pub fn random_policy(seed: u64, rows: usize, cols: usize) -> GenerativePolicy {
    use rand::Rng;
    let mut rng = rng::stream(seed, 1);
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let mut row: Vec<f64> = (0..cols)
            .map(|_| -rng.gen_range(f64::MIN_POSITIVE..1.0f64).ln())
            .collect();
        let sum: f64 = row.iter().sum();
        for v in &mut row {
            *v /= sum;
        }
        data.extend(row);
    }
    GenerativePolicy::new(Matrix::from_flat(rows, cols, data).unwrap())
        .expect("normalized rows are stochastic")
}

/// Challenger policies for the inclusive-gap check: mostly interior
/// simplex draws, with some one-hot rows and some rows that zero out one
/// response, to exercise the infinite branches.
pub fn random_challenger(seed: u64, rows: usize, cols: usize) -> (GenerativePolicy, &'static str) {
    use rand::Rng;
    let mut rng = rng::stream(seed, 2);
    let style = rng.gen_range(0.0..1.0);
    if style < 0.70 {
        (random_policy(rng::derive(seed, 3), rows, cols), "simplex")
    } else if style < 0.85 {
        let hot: Vec<usize> = (0..rows).map(|_| rng.gen_range(0..cols)).collect();
        (
            GenerativePolicy::new(Matrix::one_hot(cols, &hot).unwrap()).unwrap(),
            "one-hot",
        )
    } else {
        let base = random_policy(rng::derive(seed, 3), rows, cols);
        let mut nested = base.probs().to_nested();
        for row in nested.iter_mut() {
            let z = rng.gen_range(0..cols);
            row[z] = 0.0;
            let sum: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        (
            GenerativePolicy::new(Matrix::from_rows(nested).unwrap()).unwrap(),
            "zeroed-entry",
        )
    }
}

/// Value table with 2..=4 actions, entries i.i.d. uniform on [0, 1], at a
/// random prompt of the model.
pub fn random_decision_problem(seed: u64, model: &PopulationModel) -> DecisionProblem {
    use rand::Rng;
    let mut rng = rng::stream(seed, 4);
    let actions = rng.gen_range(2..=4);
    let ny = model.num_responses();
    let data: Vec<f64> = (0..actions * ny).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let prompt = rng.gen_range(0..model.num_prompts());
    DecisionProblem::new(prompt, Matrix::from_flat(actions, ny, data).unwrap())
        .expect("generated values lie in the unit interval")
}

// ---------------------------------------------------------------------------
// Check T1: the dominating deterministic challenger
// ---------------------------------------------------------------------------

/// Builds the deterministic challenger B for the scenario's policy A and
/// checks both halves of the dominance guarantee: the exact expected
/// agglomerative gap E[S(B)] - E[S(A)] is at least -1e-12, and the seeded
/// frequency of contests with S(B) >= S(A) is at least 0.5 - 4 SE.
pub fn check_theorem1(
    scenario: &ContestScenario,
    n_reps: u64,
    seed: u64,
) -> Result<TheoremCheckReport> {
    let a = &scenario.policy;
    let model = &scenario.model;
    let b = construct_dominating_deterministic(a, model)?;
    let exact = exact_expected_scores(a, &b, model, scenario.trials)?;
    let exact_gap = exact.agg_b - exact.agg_a;

    let tie_count = (0..model.num_prompts())
        .filter(|&x| dominating_response(a, model, x).2)
        .count();

    let trials = scenario.trials;
    let weak_win = mc_estimate(n_reps, seed, |rep_seed| {
        let record = run_contest(a, &b, model, trials, rep_seed)
            .expect("shapes validated by the oracle call");
        let wins_a = score_agglomerative(&record, Perspective::A);
        let wins_b = score_agglomerative(&record, Perspective::B);
        Score::finite(if wins_b >= wins_a { 1.0 } else { 0.0 })
    })?;

    let exact_margin = exact_gap + 1e-12;
    let mc_margin = weak_win.mean - (0.5 - SE_BAND * weak_win.std_error);
    let passed = exact_margin >= 0.0 && mc_margin >= 0.0;

    let mut exact_quantities = BTreeMap::new();
    exact_quantities.insert("expected_agg_policy".to_string(), exact.agg_a);
    exact_quantities.insert("expected_agg_challenger".to_string(), exact.agg_b);
    exact_quantities.insert("exact_gap".to_string(), exact_gap);
    exact_quantities.insert("dominance_tie_count".to_string(), tie_count as f64);
    let mut mc_quantities = BTreeMap::new();
    mc_quantities.insert("weak_win_frequency".to_string(), weak_win);

    Ok(TheoremCheckReport {
        theorem_id: TheoremId::T1,
        scenario: scenario.descriptor.clone(),
        exact_quantities,
        mc_quantities,
        criterion: "exact expected gap >= -1e-12 and weak-win frequency >= 0.5 - 4 SE".to_string(),
        passed,
        margin: exact_margin.min(mc_margin),
    })
}

// ---------------------------------------------------------------------------
// Check T2: inclusive-score gap equals the Bernoulli KL sum
// ---------------------------------------------------------------------------

/// Treats the scenario's policy as the challenger B, pits it against the
/// maximally inclusive policy, and verifies that two independent
/// computations of E[S_inc(A*)] - E[S_inc(B)] agree: the score oracle and
/// the per-tuple Bernoulli KL sum. Both must also be nonnegative. A seeded
/// estimate of S_inc(A*) must agree with its oracle within 4 SE (one retry
/// at doubled repetitions before declaring failure).
pub fn check_theorem2(
    scenario: &ContestScenario,
    n_reps: u64,
    seed: u64,
) -> Result<TheoremCheckReport> {
    let model = &scenario.model;
    let b = &scenario.policy;
    let a_star = maximally_inclusive_ai(&softmax_choice_distribution(model));
    let exact = exact_expected_scores(&a_star, b, model, scenario.trials)?;
    let kl_gap = expected_inclusive_gap(&a_star, b, model, scenario.trials)?;

    // A* has full support, so its own expected inclusive score is finite.
    let inc_star = exact
        .inc_a
        .value()
        .expect("maximally inclusive score is finite");
    let diff = match exact.inc_b.value() {
        Some(inc_b) => inc_star - inc_b,
        None => f64::INFINITY,
    };

    let (identity_abs_error, identity_margin) = if diff.is_finite() || kl_gap.is_finite() {
        let err = (diff - kl_gap).abs();
        (err, 1e-10 - err)
    } else {
        // Both computations agree the gap is infinite.
        (0.0, f64::INFINITY)
    };
    let nonneg_margin = if diff == f64::INFINITY {
        f64::INFINITY
    } else {
        diff + 1e-12
    };

    let trials = scenario.trials;
    let statistic = |rep_seed: u64| {
        let record = run_contest(&a_star, b, model, trials, rep_seed)
            .expect("shapes validated by the oracle call");
        score_inclusive(&record, &a_star, Perspective::A)
    };
    let mut mc_inc_star = mc_estimate(n_reps, seed, statistic)?;
    if !consistent_with_oracle(&mc_inc_star, inc_star) {
        // One retry with doubled repetitions before declaring failure.
        mc_inc_star = mc_estimate(n_reps * 2, rng::derive(seed, u64::MAX), statistic)?;
    }
    let mc_margin =
        SE_BAND * mc_inc_star.std_error - (mc_inc_star.mean - inc_star).abs();
    let mc_ok = consistent_with_oracle(&mc_inc_star, inc_star);

    let passed = identity_margin >= 0.0 && nonneg_margin >= 0.0 && mc_ok;

    let mut exact_quantities = BTreeMap::new();
    exact_quantities.insert("expected_inc_star".to_string(), inc_star);
    exact_quantities.insert(
        "expected_inc_challenger".to_string(),
        exact.inc_b.to_f64(),
    );
    exact_quantities.insert("score_difference".to_string(), diff);
    exact_quantities.insert("kl_sum".to_string(), kl_gap);
    exact_quantities.insert("identity_abs_error".to_string(), identity_abs_error);
    let mut mc_quantities = BTreeMap::new();
    mc_quantities.insert("inc_star_estimate".to_string(), mc_inc_star);

    Ok(TheoremCheckReport {
        theorem_id: TheoremId::T2,
        scenario: scenario.descriptor.clone(),
        exact_quantities,
        mc_quantities,
        criterion: "score difference matches KL sum within 1e-10, is >= -1e-12, and the \
                    inclusive-score estimate is within 4 SE of its oracle"
            .to_string(),
        passed,
        margin: identity_margin.min(nonneg_margin).min(mc_margin),
    })
}

// ---------------------------------------------------------------------------
// Check T3: deployment-value lower bound
// ---------------------------------------------------------------------------

/// Over `n_runs` seeded experiments, samples `trials` responses from the
/// scenario policy, decides empirically, and counts how often the chosen
/// action's true value falls below the bound. Pass when the frequency is
/// at most `delta + 4 sqrt(delta (1 - delta) / n_runs)`. An infinite-KL
/// scenario makes the bound negative infinity and the check passes
/// vacuously.
pub fn check_theorem3(
    scenario: &DecisionScenario,
    trials: u64,
    delta: f64,
    n_runs: u64,
    seed: u64,
) -> Result<TheoremCheckReport> {
    let model = &scenario.model;
    let policy = &scenario.policy;
    let problem = &scenario.problem;
    let bound = theorem3_bound(problem, model, policy, trials, delta)?;
    let pcd = softmax_choice_distribution(model);
    let truth = true_values(problem, &pcd)?;
    let threshold = delta + SE_BAND * (delta * (1.0 - delta) / n_runs as f64).sqrt();

    let mut exact_quantities = BTreeMap::new();
    exact_quantities.insert("bound".to_string(), bound.to_f64());
    exact_quantities.insert("delta".to_string(), delta);
    exact_quantities.insert("violation_threshold".to_string(), threshold);
    exact_quantities.insert(
        "best_value".to_string(),
        truth.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );

    let bound_value = match bound.value() {
        Some(v) => v,
        None => {
            return Ok(TheoremCheckReport {
                theorem_id: TheoremId::T3,
                scenario: scenario.descriptor.clone(),
                exact_quantities,
                mc_quantities: BTreeMap::new(),
                criterion: "bound is negative infinity, so no run can violate it".to_string(),
                passed: true,
                margin: f64::INFINITY,
            });
        }
    };

    let prompt = problem.prompt();
    let violations = mc_estimate(n_runs, seed, |rep_seed| {
        let mut rng = rng::stream(rep_seed, 0);
        let responses: Vec<usize> = (0..trials)
            .map(|_| sample_response(policy, prompt, &mut rng))
            .collect();
        let result =
            empirical_decision(problem, &responses, &pcd).expect("responses are in range");
        let achieved = result.true_values[result.chosen_action];
        Score::finite(if achieved < bound_value { 1.0 } else { 0.0 })
    })?;

    let margin = threshold - violations.mean;
    let passed = margin >= 0.0;
    let mut mc_quantities = BTreeMap::new();
    mc_quantities.insert("violation_frequency".to_string(), violations);

    Ok(TheoremCheckReport {
        theorem_id: TheoremId::T3,
        scenario: scenario.descriptor.clone(),
        exact_quantities,
        mc_quantities,
        criterion: format!(
            "violation frequency <= {threshold:.6} (delta plus four binomial standard errors)"
        ),
        passed,
        margin,
    })
}

// ---------------------------------------------------------------------------
// Check T4: the misleading deterministic deployment
// ---------------------------------------------------------------------------

/// Builds the two-action counterexample at the given `beta` and, for every
/// trial count in `t_list` and 20 derived seeds each, verifies that the
/// empirical decision picks the second action with an optimality gap of
/// exactly `(1 - beta) / 2` (to 1e-15). Also confirms via the exact oracle
/// that the scenario policy is weakly preferred to the maximally inclusive
/// policy in expected agglomerative score.
pub fn check_theorem4(beta: f64, t_list: &[u64], seed: u64) -> Result<TheoremCheckReport> {
    const SEEDS_PER_T: u64 = 20;
    let s = theorem4_scenario(beta)?;
    let pcd = softmax_choice_distribution(&s.model);
    let truth = true_values(&s.problem, &pcd)?;
    let expected_gap = (1.0 - beta) / 2.0;

    let a_star = maximally_inclusive_ai(&pcd);
    let oracle = exact_expected_scores(&s.policy, &a_star, &s.model, 100)?;
    let precondition_margin = oracle.agg_a - oracle.agg_b + 1e-12;

    let mut max_abs_gap_error = 0.0f64;
    let mut wrong_action_count = 0u64;
    for (ti, &t) in t_list.iter().enumerate() {
        for rep in 0..SEEDS_PER_T {
            let rep_seed = rng::derive(seed, (ti as u64) * SEEDS_PER_T + rep);
            let mut rng = rng::stream(rep_seed, 0);
            let responses: Vec<usize> = (0..t)
                .map(|_| sample_response(&s.policy, 0, &mut rng))
                .collect();
            let result = empirical_decision(&s.problem, &responses, &pcd)?;
            if result.chosen_action != 1 {
                wrong_action_count += 1;
            }
            max_abs_gap_error =
                max_abs_gap_error.max((result.optimality_gap - expected_gap).abs());
        }
    }

    let gap_margin = 1e-15 - max_abs_gap_error;
    let passed = wrong_action_count == 0 && gap_margin >= 0.0 && precondition_margin >= 0.0;

    let mut exact_quantities = BTreeMap::new();
    exact_quantities.insert("beta".to_string(), beta);
    exact_quantities.insert("expected_gap".to_string(), expected_gap);
    exact_quantities.insert("max_abs_gap_error".to_string(), max_abs_gap_error);
    exact_quantities.insert("wrong_action_count".to_string(), wrong_action_count as f64);
    exact_quantities.insert("value_a1".to_string(), truth[0]);
    exact_quantities.insert("value_a2".to_string(), truth[1]);
    exact_quantities.insert(
        "expected_agg_policy_vs_star".to_string(),
        oracle.agg_a,
    );
    exact_quantities.insert(
        "expected_agg_star_vs_policy".to_string(),
        oracle.agg_b,
    );

    Ok(TheoremCheckReport {
        theorem_id: TheoremId::T4,
        scenario: format!(
            "two actions, two equal-utility responses, beta={beta}, T in {t_list:?}"
        ),
        exact_quantities,
        mc_quantities: BTreeMap::new(),
        criterion: "second action chosen with gap exactly (1 - beta)/2 (to 1e-15) for every \
                    trial count and seed; policy weakly preferred in expected count"
            .to_string(),
        passed,
        margin: gap_margin.min(precondition_margin),
    })
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

/// Default suite sizes. The four checks together run in well under the
/// acceptance time budgets on a desktop core count.
pub mod defaults {
    pub const T1_SCENARIOS: u64 = 50;
    pub const T1_MAX_PROMPTS: usize = 3;
    pub const T1_MAX_RESPONSES: usize = 4;
    pub const T1_TRIALS: u64 = 30;
    pub const T1_REPS: u64 = 10_000;

    pub const T2_PAIRS: u64 = 200;
    pub const T2_MAX_PROMPTS: usize = 4;
    pub const T2_MAX_RESPONSES: usize = 5;
    pub const T2_TRIALS: u64 = 50;
    pub const T2_REPS: u64 = 1_000;

    pub const T3_SCENARIOS: u64 = 10;
    pub const T3_TRIALS: u64 = 1_000;
    pub const T3_DELTA: f64 = 0.05;
    pub const T3_RUNS: u64 = 2_000;
    pub const T3_MAX_PROMPTS: usize = 4;
    pub const T3_MAX_RESPONSES: usize = 5;

    pub const T4_BETA: f64 = 1.0 / 3.0;
    pub const T4_T_LIST: [u64; 3] = [1, 10, 1000];

    pub const SEED: u64 = 42;
}

/// Random contest scenario for the dominance check.
pub fn contest_scenario(
    index: u64,
    seed: u64,
    max_prompts: usize,
    max_responses: usize,
    trials: u64,
) -> ContestScenario {
    let model_seed = rng::derive(seed, 2 * index);
    let model = random_model(model_seed, max_prompts, max_responses);
    let policy = random_policy(
        rng::derive(seed, 2 * index + 1),
        model.num_prompts(),
        model.num_responses(),
    );
    ContestScenario {
        descriptor: format!(
            "random scenario {index} (|X|={}, |Y|={}, T={trials})",
            model.num_prompts(),
            model.num_responses()
        ),
        model,
        policy,
        trials,
    }
}

/// Random (model, challenger) pair for the inclusive-gap check.
pub fn challenger_scenario(
    index: u64,
    seed: u64,
    max_prompts: usize,
    max_responses: usize,
    trials: u64,
) -> ContestScenario {
    let model = random_model(rng::derive(seed, 2 * index), max_prompts, max_responses);
    let (challenger, style) = random_challenger(
        rng::derive(seed, 2 * index + 1),
        model.num_prompts(),
        model.num_responses(),
    );
    ContestScenario {
        descriptor: format!(
            "random pair {index} (|X|={}, |Y|={}, B={style}, T={trials})",
            model.num_prompts(),
            model.num_responses()
        ),
        model,
        policy: challenger,
        trials,
    }
}

/// Random finite-KL decision scenario: the sampling policy is a simplex
/// draw, which has full support, so the KL term is always finite.
pub fn decision_scenario(
    index: u64,
    seed: u64,
    max_prompts: usize,
    max_responses: usize,
) -> DecisionScenario {
    let model = random_model(rng::derive(seed, 3 * index), max_prompts, max_responses);
    let policy = random_policy(
        rng::derive(seed, 3 * index + 1),
        model.num_prompts(),
        model.num_responses(),
    );
    let problem = random_decision_problem(rng::derive(seed, 3 * index + 2), &model);
    DecisionScenario {
        descriptor: format!(
            "random decision scenario {index} (|X|={}, |Y|={}, |A|={})",
            model.num_prompts(),
            model.num_responses(),
            problem.num_actions()
        ),
        model,
        policy,
        problem,
    }
}

pub fn theorem1_suite(n_scenarios: u64, n_reps: u64, seed: u64) -> Result<Vec<TheoremCheckReport>> {
    (0..n_scenarios)
        .map(|i| {
            let scenario = contest_scenario(
                i,
                rng::derive(seed, i),
                defaults::T1_MAX_PROMPTS,
                defaults::T1_MAX_RESPONSES,
                defaults::T1_TRIALS,
            );
            check_theorem1(&scenario, n_reps, rng::derive(seed, n_scenarios + i))
        })
        .collect()
}

pub fn theorem2_suite(n_pairs: u64, n_reps: u64, seed: u64) -> Result<Vec<TheoremCheckReport>> {
    (0..n_pairs)
        .map(|i| {
            let scenario = challenger_scenario(
                i,
                rng::derive(seed, i),
                defaults::T2_MAX_PROMPTS,
                defaults::T2_MAX_RESPONSES,
                defaults::T2_TRIALS,
            );
            check_theorem2(&scenario, n_reps, rng::derive(seed, n_pairs + i))
        })
        .collect()
}

pub fn theorem3_suite(
    n_scenarios: u64,
    trials: u64,
    delta: f64,
    n_runs: u64,
    seed: u64,
) -> Result<Vec<TheoremCheckReport>> {
    (0..n_scenarios)
        .map(|i| {
            let scenario = decision_scenario(
                i,
                rng::derive(seed, i),
                defaults::T3_MAX_PROMPTS,
                defaults::T3_MAX_RESPONSES,
            );
            check_theorem3(
                &scenario,
                trials,
                delta,
                n_runs,
                rng::derive(seed, n_scenarios + i),
            )
        })
        .collect()
}

pub fn theorem4_report(seed: u64) -> Result<TheoremCheckReport> {
    check_theorem4(defaults::T4_BETA, &defaults::T4_T_LIST, seed)
}

/// The full default verification run: all four checks at their default
/// sizes, with sub-seeds derived from one master seed.
pub fn default_verify_suite(seed: u64) -> Result<Vec<TheoremCheckReport>> {
    let mut reports = theorem1_suite(defaults::T1_SCENARIOS, defaults::T1_REPS, rng::derive(seed, 1))?;
    reports.extend(theorem2_suite(
        defaults::T2_PAIRS,
        defaults::T2_REPS,
        rng::derive(seed, 2),
    )?);
    reports.extend(theorem3_suite(
        defaults::T3_SCENARIOS,
        defaults::T3_TRIALS,
        defaults::T3_DELTA,
        defaults::T3_RUNS,
        rng::derive(seed, 3),
    )?);
    reports.push(theorem4_report(rng::derive(seed, 4))?);
    Ok(reports)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fig1;

    #[test]
    fn too_few_reps_is_rejected() {
        assert!(matches!(
            mc_estimate(1, 0, |_| Score::finite(1.0)).unwrap_err(),
            Error::TooFewReps { got: 1 }
        ));
    }

    #[test]
    fn constant_statistic_collapses_the_interval() {
        let s = mc_estimate(2, 9, |_| Score::finite(3.5)).unwrap();
        assert_eq!(s.mean, 3.5);
        assert_eq!(s.std_error, 0.0);
        assert_eq!(s.ci_low, 3.5);
        assert_eq!(s.ci_high, 3.5);
        assert_eq!(s.infinite_count, 0);
    }

    #[test]
    fn estimates_are_seed_deterministic() {
        let f = |seed: u64| {
            mc_estimate(500, seed, |s| {
                let mut r = rng::stream(s, 0);
                use rand::Rng;
                Score::finite(r.gen_range(0.0..1.0))
            })
            .unwrap()
        };
        assert_eq!(f(7), f(7));
        assert_ne!(f(7), f(8));
    }

    #[test]
    fn infinite_samples_are_excluded_and_counted() {
        let s = mc_estimate(10, 0, |seed| {
            if seed % 2 == 0 {
                Score::NegInfinity
            } else {
                Score::finite(2.0)
            }
        })
        .unwrap();
        assert!(s.infinite_count > 0);
        assert_eq!(s.infinite_count + 10 - s.infinite_count, s.n);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std_error, 0.0);
    }

    #[test]
    fn all_infinite_samples_give_infinite_mean() {
        let s = mc_estimate(4, 0, |_| Score::NegInfinity).unwrap();
        assert_eq!(s.mean, f64::NEG_INFINITY);
        assert_eq!(s.infinite_count, 4);
        assert_eq!(s.std_error, 0.0);
    }

    #[test]
    fn self_play_win_fraction_is_half() {
        let f = fig1::scenario();
        let a = &f.policy_a;
        let model = &f.model;
        let s = mc_estimate(5000, 31, |seed| {
            let record = run_contest(a, a, model, 20, seed).unwrap();
            Score::finite(
                score_agglomerative(&record, Perspective::A).value().unwrap() / 20.0,
            )
        })
        .unwrap();
        assert!(consistent_with_oracle(&s, 0.5), "mean {}", s.mean);
    }

    #[test]
    fn inclusive_score_estimate_matches_oracle() {
        let f = fig1::scenario();
        let exact = exact_expected_scores(&f.policy_a, &f.policy_b, &f.model, 3).unwrap();
        let oracle = exact.inc_a.value().unwrap();
        let s = mc_estimate(10_000, 77, |seed| {
            let record = run_contest(&f.policy_a, &f.policy_b, &f.model, 3, seed).unwrap();
            score_inclusive(&record, &f.policy_a, Perspective::A)
        })
        .unwrap();
        assert!(
            consistent_with_oracle(&s, oracle),
            "mean {} vs oracle {oracle}",
            s.mean
        );
    }

    #[test]
    fn theorem_ids_serialize_as_bare_names() {
        assert_eq!(serde_json::to_string(&TheoremId::T3).unwrap(), "\"T3\"");
        assert_eq!(TheoremId::T2.to_string(), "T2");
    }

    #[test]
    fn check_t1_passes_on_the_builtin_scenario() {
        let f = fig1::scenario();
        let scenario = ContestScenario {
            descriptor: "builtin".to_string(),
            model: f.model.clone(),
            policy: f.policy_a.clone(),
            trials: 3,
        };
        let report = check_theorem1(&scenario, 4000, 5).unwrap();
        assert!(report.passed, "margin {}", report.margin);
        assert!(report.exact_quantities["exact_gap"] > 0.0);
        assert_eq!(report.theorem_id, TheoremId::T1);
    }

    #[test]
    fn check_t1_with_dominant_deterministic_policy_reports_zero_gap() {
        // A already plays the best response everywhere; B equals A, every
        // trial ties, and the weak-win indicator is constant 1.
        let model = PopulationModel::with_uniform_prompts(
            Matrix::from_rows(vec![vec![2.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let a = GenerativePolicy::new(Matrix::from_rows(vec![vec![1.0, 0.0]]).unwrap()).unwrap();
        let scenario = ContestScenario {
            descriptor: "deterministic dominant".to_string(),
            model,
            policy: a,
            trials: 10,
        };
        let report = check_theorem1(&scenario, 400, 3).unwrap();
        assert!(report.passed);
        assert_eq!(report.exact_quantities["exact_gap"], 0.0);
        // Every trial is a coin flip, so the weak-win indicator follows
        // P(Binomial(10, 1/2) >= 5) = 638/1024.
        let freq = &report.mc_quantities["weak_win_frequency"];
        assert!(
            (freq.mean - 0.623046875).abs() <= SE_BAND * freq.std_error,
            "tie-heavy weak-win frequency {}",
            freq.mean
        );
    }

    #[test]
    fn t1_suite_smoke() {
        let reports = theorem1_suite(6, 1500, 11).unwrap();
        assert_eq!(reports.len(), 6);
        for r in &reports {
            assert!(r.passed, "{}: margin {}", r.scenario, r.margin);
        }
    }

    #[test]
    fn check_t2_is_exact_against_itself() {
        let f = fig1::scenario();
        let scenario = ContestScenario {
            descriptor: "A* vs itself".to_string(),
            model: f.model.clone(),
            policy: f.policy_a.clone(),
            trials: 3,
        };
        let report = check_theorem2(&scenario, 400, 9).unwrap();
        assert!(report.passed);
        assert_eq!(report.exact_quantities["score_difference"], 0.0);
        assert_eq!(report.exact_quantities["kl_sum"], 0.0);
    }

    #[test]
    fn check_t2_reports_infinite_gap_for_greedy_challenger() {
        let f = fig1::scenario();
        let scenario = ContestScenario {
            descriptor: "greedy challenger".to_string(),
            model: f.model.clone(),
            policy: f.policy_b.clone(),
            trials: 3,
        };
        let report = check_theorem2(&scenario, 400, 10).unwrap();
        assert!(report.passed);
        assert_eq!(
            report.exact_quantities["score_difference"],
            f64::INFINITY
        );
        assert_eq!(report.exact_quantities["kl_sum"], f64::INFINITY);
        assert_eq!(report.exact_quantities["identity_abs_error"], 0.0);
    }

    #[test]
    fn t2_suite_smoke() {
        let reports = theorem2_suite(25, 300, 13).unwrap();
        assert_eq!(reports.len(), 25);
        for r in &reports {
            assert!(r.passed, "{}: margin {}", r.scenario, r.margin);
            assert!(r.exact_quantities["identity_abs_error"] < 1e-10);
        }
    }

    #[test]
    fn t2_challenger_styles_all_appear() {
        let mut styles = std::collections::BTreeSet::new();
        for i in 0..40 {
            let (_, style) = random_challenger(rng::derive(99, i), 2, 3);
            styles.insert(style);
        }
        assert!(styles.contains("simplex"));
        assert!(styles.contains("one-hot"));
        assert!(styles.contains("zeroed-entry"));
    }

    #[test]
    fn check_t3_passes_with_faithful_sampling() {
        let scenario = decision_scenario(0, 21, 3, 4);
        // Replace the policy with the choice distribution itself: zero KL,
        // bound reduces to the concentration term.
        let pcd = softmax_choice_distribution(&scenario.model);
        let faithful = maximally_inclusive_ai(&pcd);
        let scenario = DecisionScenario {
            descriptor: "faithful sampling".to_string(),
            policy: faithful,
            model: scenario.model,
            problem: scenario.problem,
        };
        let report = check_theorem3(&scenario, 400, 0.05, 500, 4).unwrap();
        assert!(report.passed, "margin {}", report.margin);
    }

    #[test]
    fn check_t3_vacuous_pass_on_support_gap() {
        let s = theorem4_scenario(0.5).unwrap();
        let scenario = DecisionScenario {
            descriptor: "deterministic policy".to_string(),
            model: s.model,
            policy: s.policy,
            problem: s.problem,
        };
        let report = check_theorem3(&scenario, 100, 0.05, 50, 2).unwrap();
        assert!(report.passed);
        assert_eq!(report.margin, f64::INFINITY);
        assert_eq!(report.exact_quantities["bound"], f64::NEG_INFINITY);
        assert!(report.mc_quantities.is_empty());
    }

    #[test]
    fn t3_suite_smoke() {
        let reports = theorem3_suite(3, 400, 0.05, 400, 17).unwrap();
        for r in &reports {
            assert!(r.passed, "{}: margin {}", r.scenario, r.margin);
        }
    }

    #[test]
    fn check_t4_reproduces_the_designed_gap() {
        let report = check_theorem4(1.0 / 3.0, &[1, 10, 1000], 42).unwrap();
        assert!(report.passed, "margin {}", report.margin);
        assert!((report.exact_quantities["expected_gap"] - 1.0 / 3.0).abs() <= 1e-15);
        assert_eq!(report.exact_quantities["max_abs_gap_error"], 0.0);
        assert_eq!(report.exact_quantities["wrong_action_count"], 0.0);
        assert!((report.exact_quantities["value_a1"] - 5.0 / 6.0).abs() < 1e-15);
        assert!((report.exact_quantities["value_a2"] - 0.5).abs() < 1e-15);
        // Equal utilities make the precondition hold with equality.
        assert_eq!(
            report.exact_quantities["expected_agg_policy_vs_star"],
            report.exact_quantities["expected_agg_star_vs_policy"]
        );
    }

    #[test]
    fn check_t4_other_beta() {
        let report = check_theorem4(0.9, &[1, 5], 1).unwrap();
        assert!(report.passed);
        assert!((report.exact_quantities["expected_gap"] - 0.05).abs() < 1e-16);
    }

    #[test]
    fn check_t4_rejects_bad_beta() {
        assert!(check_theorem4(1.0, &[1], 0).is_err());
    }

    #[test]
    fn generated_policies_are_interior_and_stochastic() {
        for i in 0..20 {
            let p = random_policy(i, 3, 4);
            for x in 0..3 {
                let row = p.probs().row(x);
                assert!(row.iter().all(|&v| v > 0.0));
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn generated_models_respect_size_caps() {
        for i in 0..20 {
            let m = random_model(i, 3, 4);
            assert!((1..=3).contains(&m.num_prompts()));
            assert!((2..=4).contains(&m.num_responses()));
            let mut seen = false;
            for x in 0..m.num_prompts() {
                for y in 0..m.num_responses() {
                    let u = m.utility(x, y);
                    assert!((-2.0..=2.0).contains(&u));
                    seen = true;
                }
            }
            assert!(seen);
        }
    }

    #[test]
    fn reports_are_identical_across_thread_counts() {
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| theorem1_suite(3, 800, 5).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
