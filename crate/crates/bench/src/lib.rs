//! Benchmark fixtures shared by the criterion benches: deterministic
//! scenarios big enough to measure, small enough to iterate quickly.

use prefsim_core::choice_model::{maximally_inclusive_ai, softmax_choice_distribution};
use prefsim_core::verify::{random_model, random_policy};
use prefsim_core::{GenerativePolicy, PopulationModel};

pub const FIXTURE_SEED: u64 = 1729;

/// A mid-sized random scenario: up to 20 prompts and 15 responses.
pub fn fixture() -> (PopulationModel, GenerativePolicy, GenerativePolicy) {
    let model = random_model(FIXTURE_SEED, 20, 15);
    let a = maximally_inclusive_ai(&softmax_choice_distribution(&model));
    let b = random_policy(FIXTURE_SEED, model.num_prompts(), model.num_responses());
    (model, a, b)
}
