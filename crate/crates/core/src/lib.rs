//! Simulation library for comparing generative AIs under two
//! model-selection objectives.
//!
//! A population of annotators is modeled by a multinomial-logit
//! random-utility model: per prompt, each response carries a base utility,
//! an annotator's realized utility adds independent Gumbel noise, and the
//! population choice distribution is therefore the softmax of the utility
//! row. Two policies play head-to-head annotation contests; a contest
//! record can be scored by counting preferred trials (agglomerative) or by
//! a log-likelihood-style criterion that rewards assigning probability to
//! whatever the population preferred (inclusive). The crate provides exact
//! enumeration oracles for the expected scores, a seeded Monte Carlo
//! harness, downstream decision problems with a deployment-value bound,
//! and four built-in guarantee checks over randomized scenarios.
//!
//! Everything is deterministic given seeds: parallel estimation derives
//! one sub-seed per repetition from a counter, so results are independent
//! of thread count.

pub mod choice_model;
pub mod contest;
pub mod decision;
pub mod error;
pub mod fig1;
pub mod matrix;
pub mod rng;
pub mod score;
pub mod verify;

pub use choice_model::{
    deterministic_greedy_ai, maximally_inclusive_ai, pairwise_win_probability,
    softmax_choice_distribution, tempered_ai, GenerativePolicy, PopulationChoiceDistribution,
    PopulationModel, PromptSpace, ResponseSpace,
};
pub use contest::{
    construct_dominating_deterministic, exact_expected_scores, expected_inclusive_gap,
    run_contest, score_agglomerative, score_inclusive, ContestRecord, ExpectedScores,
    Perspective, TrialOutcome,
};
pub use decision::{
    empirical_decision, kl_divergence, theorem3_bound, theorem3_bound_with_pcd,
    theorem4_scenario, true_values, DecisionProblem, DecisionResult, Theorem4Scenario,
};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use score::Score;
pub use verify::{
    check_theorem1, check_theorem2, check_theorem3, check_theorem4, default_verify_suite,
    mc_estimate, ContestScenario, DecisionScenario, EstimatorSummary, TheoremCheckReport,
    TheoremId,
};
