//! The built-in didactic scenario: one prompt, two responses, and a fixed
//! three-trial record on which the two objectives disagree.
//!
//! The population prefers response 0 to response 1 with probability 2/3
//! (utility gap ln 2). Policy A is maximally inclusive, matching the
//! population choice distribution (2/3, 1/3); policy B plays response 0
//! deterministically. In the fixed record B wins two of three trials, so
//! the agglomerative count prefers B, while the inclusive score prefers A
//! because B assigned probability zero to the response that won trial 3.

use crate::choice_model::{
    deterministic_greedy_ai, maximally_inclusive_ai, softmax_choice_distribution,
    GenerativePolicy, PopulationModel,
};
use crate::contest::{ContestRecord, TrialOutcome};
use crate::matrix::Matrix;

/// Seed stored on the fixed record. The record is part of the scenario
/// definition rather than the output of a sampled contest, so the seed is
/// a documented sentinel.
pub const FIXED_RECORD_SEED: u64 = 0;

/// A contest seed that happens to resample exactly the fixed record, found
/// by exhaustive search; shipped scenario files use it so a config-driven
/// run reproduces the documented numbers.
pub const REPRODUCING_CONTEST_SEED: u64 = 41;

#[derive(Debug, Clone)]
pub struct Fig1Scenario {
    pub model: PopulationModel,
    /// Maximally inclusive: emits (2/3, 1/3), the population distribution.
    pub policy_a: GenerativePolicy,
    /// Deterministic greedy: always emits response 0.
    pub policy_b: GenerativePolicy,
    /// Three trials, A's side sampled response 1 each time: B preferred in
    /// trials 1 and 2, A preferred in trial 3.
    pub record: ContestRecord,
}

pub fn scenario() -> Fig1Scenario {
    let model = PopulationModel::with_uniform_prompts(
        Matrix::from_rows(vec![vec![std::f64::consts::LN_2, 0.0]]).unwrap(),
    )
    .unwrap();
    let pcd = softmax_choice_distribution(&model);
    let policy_a = maximally_inclusive_ai(&pcd);
    let policy_b = deterministic_greedy_ai(&pcd);
    let trials = [0u8, 0, 1]
        .iter()
        .enumerate()
        .map(|(i, &preference)| TrialOutcome {
            t: i as u64 + 1,
            x: 0,
            y_a: 1,
            y_b: 0,
            preference,
            tie_broken: false,
        })
        .collect();
    let record = ContestRecord::from_parts(
        trials,
        policy_a.clone(),
        policy_b.clone(),
        FIXED_RECORD_SEED,
    )
    .expect("fixed trial record is well formed");
    Fig1Scenario {
        model,
        policy_a,
        policy_b,
        record,
    }
}
