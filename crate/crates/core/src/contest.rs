//! Head-to-head annotation contests and the two selection objectives.
//!
//! A contest runs T independent trials. Each trial draws a prompt, one
//! response from each policy, and a preference: the annotator realizes
//! Gumbel-noised utilities for the two responses and prefers the larger,
//! with a fair coin on ties. Identical responses share one noise draw, so
//! they always tie.
//!
//! Two objectives score the same record from the perspective of either
//! side. The agglomerative score counts preferred trials. The inclusive
//! score sums, per trial, the log of the probability the scored policy
//! assigned to whichever response was preferred, normalized by the total
//! probability it assigned to the two candidates:
//! `L ln P(Y_self) + (1 - L) ln P(Y_other) - ln(P(Y_self) + P(Y_other))`.
//! A preferred response with zero probability makes the whole score exactly
//! negative infinity, as does a trial where both candidates have zero
//! probability.

use rand::Rng;

use crate::choice_model::{
    pairwise_win_probability, sample_response, softmax_choice_distribution, GenerativePolicy,
    PopulationModel,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;
use crate::score::Score;

/// Cap on |X| * |Y|^2 for the exact enumeration oracles.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

/// Entry-wise tolerance when an argument must equal the maximally inclusive
/// policy.
pub const MAXIMALLY_INCLUSIVE_TOL: f64 = 1e-12;

/// Which side of an (A, B) pair a score is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perspective {
    A,
    B,
}

/// One annotation trial. `preference` is 1 when side A's response was
/// preferred, 0 otherwise; `tie_broken` records that the fair coin decided
/// (identical responses, or realized utilities exactly equal).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub t: u64,
    pub x: usize,
    pub y_a: usize,
    pub y_b: usize,
    pub preference: u8,
    pub tie_broken: bool,
}

/// A completed contest: the trial sequence plus the policies it compared
/// and the seed that reproduces it.
#[derive(Debug, Clone, PartialEq)]
pub struct ContestRecord {
    trials: Vec<TrialOutcome>,
    policy_a: GenerativePolicy,
    policy_b: GenerativePolicy,
    seed: u64,
}

impl ContestRecord {
    /// Assembles a record from parts, checking that trial indices run
    /// contiguously from 1 and preferences are binary.
    pub fn from_parts(
        trials: Vec<TrialOutcome>,
        policy_a: GenerativePolicy,
        policy_b: GenerativePolicy,
        seed: u64,
    ) -> Result<ContestRecord> {
        for (i, trial) in trials.iter().enumerate() {
            if trial.t != i as u64 + 1 {
                return Err(Error::ShapeMismatch {
                    context: "contest record".to_string(),
                    expected: format!("trial index {}", i + 1),
                    got: format!("{}", trial.t),
                });
            }
            if trial.preference > 1 {
                return Err(Error::EntryOutOfRange {
                    context: "contest record".to_string(),
                    row: i,
                    col: 4,
                    value: trial.preference as f64,
                    range: "{0, 1}".to_string(),
                });
            }
        }
        Ok(ContestRecord {
            trials,
            policy_a,
            policy_b,
            seed,
        })
    }

    pub fn trials(&self) -> &[TrialOutcome] {
        &self.trials
    }

    pub fn num_trials(&self) -> u64 {
        self.trials.len() as u64
    }

    pub fn policy_a(&self) -> &GenerativePolicy {
        &self.policy_a
    }

    pub fn policy_b(&self) -> &GenerativePolicy {
        &self.policy_b
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Exact per-pair expectations from [`exact_expected_scores`]. Fields named
/// `_a` refer to the first policy argument, `_b` to the second.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedScores {
    pub agg_a: f64,
    pub agg_b: f64,
    pub inc_a: Score,
    pub inc_b: Score,
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Draws one preference between `y_a` and `y_b` at prompt `x`. Returns
/// (preference, tie_broken) with preference 1 when `y_a` wins. Identical
/// responses share their noise draw and therefore always tie.
pub fn sample_preference<R: Rng + ?Sized>(
    model: &PopulationModel,
    x: usize,
    y_a: usize,
    y_b: usize,
    rng: &mut R,
) -> (u8, bool) {
    if y_a == y_b {
        return (rng.gen_bool(0.5) as u8, true);
    }
    let u_a = model.utility(x, y_a) + crate::choice_model::sample_gumbel(rng);
    let u_b = model.utility(x, y_b) + crate::choice_model::sample_gumbel(rng);
    if u_a > u_b {
        (1, false)
    } else if u_a < u_b {
        (0, false)
    } else {
        (rng.gen_bool(0.5) as u8, true)
    }
}

/// Runs a seeded contest of `trials` independent trials between `a` and
/// `b`. The record is fully determined by the arguments; per trial the
/// stream is consumed in the fixed order prompt, response A, response B,
/// preference.
pub fn run_contest(
    a: &GenerativePolicy,
    b: &GenerativePolicy,
    model: &PopulationModel,
    trials: u64,
    seed: u64,
) -> Result<ContestRecord> {
    check_policy_shape(a, model, "policy A")?;
    check_policy_shape(b, model, "policy B")?;
    let mut rng = rng::stream(seed, 0);
    let mut outcomes = Vec::with_capacity(trials as usize);
    for t in 1..=trials {
        let x = model.prompts().sample(&mut rng);
        let y_a = sample_response(a, x, &mut rng);
        let y_b = sample_response(b, x, &mut rng);
        let (preference, tie_broken) = sample_preference(model, x, y_a, y_b, &mut rng);
        outcomes.push(TrialOutcome {
            t,
            x,
            y_a,
            y_b,
            preference,
            tie_broken,
        });
    }
    Ok(ContestRecord {
        trials: outcomes,
        policy_a: a.clone(),
        policy_b: b.clone(),
        seed,
    })
}

fn check_policy_shape(
    policy: &GenerativePolicy,
    model: &PopulationModel,
    context: &str,
) -> Result<()> {
    if policy.num_prompts() != model.num_prompts()
        || policy.num_responses() != model.num_responses()
    {
        return Err(Error::ShapeMismatch {
            context: context.to_string(),
            expected: format!("{} x {}", model.num_prompts(), model.num_responses()),
            got: format!("{} x {}", policy.num_prompts(), policy.num_responses()),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

/// Number of trials the given side won. Always finite; the two
/// perspectives sum to the trial count.
pub fn score_agglomerative(record: &ContestRecord, perspective: Perspective) -> Score {
    let wins = record
        .trials
        .iter()
        .filter(|t| match perspective {
            Perspective::A => t.preference == 1,
            Perspective::B => t.preference == 0,
        })
        .count();
    Score::finite(wins as f64)
}

/// Inclusive score of `scored_policy` for the given side of the record.
/// The empty record scores exactly 0.
pub fn score_inclusive(
    record: &ContestRecord,
    scored_policy: &GenerativePolicy,
    perspective: Perspective,
) -> Score {
    let mut total = 0.0;
    for trial in &record.trials {
        let (y_self, y_other, preferred_self) = match perspective {
            Perspective::A => (trial.y_a, trial.y_b, trial.preference == 1),
            Perspective::B => (trial.y_b, trial.y_a, trial.preference == 0),
        };
        let p_self = scored_policy.prob(trial.x, y_self);
        let p_other = scored_policy.prob(trial.x, y_other);
        match inclusive_trial_term(p_self, p_other, preferred_self) {
            Some(term) => total += term,
            None => return Score::NegInfinity,
        }
    }
    Score::finite(total)
}

/// One trial's inclusive term, `ln(chosen) - ln(p_self + p_other)`.
/// `None` encodes negative infinity: the preferred response had zero
/// probability, or both candidates did (the 0/0 trial).
fn inclusive_trial_term(p_self: f64, p_other: f64, preferred_self: bool) -> Option<f64> {
    let denom = p_self + p_other;
    if denom <= 0.0 {
        return None;
    }
    let chosen = if preferred_self { p_self } else { p_other };
    if chosen <= 0.0 {
        return None;
    }
    Some(chosen.ln() - denom.ln())
}

// ---------------------------------------------------------------------------
// Deterministic challenger
// ---------------------------------------------------------------------------

/// For prompt `x`, the one-hot response maximizing the probability of being
/// weakly preferred to a draw from `policy`, under the fair-coin tie rule
/// (an identical response wins with probability exactly 1/2). Returns
/// (response, win probability, tie flag). The policy-weighted average of
/// the objective over candidates is exactly 1/2, so the maximum is always
/// at least 1/2. Ties take the smallest index.
pub fn dominating_response(
    policy: &GenerativePolicy,
    model: &PopulationModel,
    x: usize,
) -> (usize, f64, bool) {
    let row = policy.probs().row(x);
    let mut best_y = 0;
    let mut best_p = f64::NEG_INFINITY;
    let mut tied = false;
    for y0 in 0..model.num_responses() {
        let mut p_win = 0.0;
        for (y, &py) in row.iter().enumerate() {
            if py == 0.0 {
                continue;
            }
            let w = if y == y0 {
                0.5
            } else {
                pairwise_win_probability(model, x, y0, y)
            };
            p_win += py * w;
        }
        if p_win > best_p {
            best_p = p_win;
            best_y = y0;
            tied = false;
        } else if p_win == best_p {
            tied = true;
        }
    }
    (best_y, best_p, tied)
}

/// Deterministic policy that weakly beats `a` in expectation: per prompt it
/// plays the [`dominating_response`]. Its per-trial weak-win probability is
/// at least 1/2, so E[agglomerative(B)] >= E[agglomerative(A)] holds
/// exactly for every model.
pub fn construct_dominating_deterministic(
    a: &GenerativePolicy,
    model: &PopulationModel,
) -> Result<GenerativePolicy> {
    check_policy_shape(a, model, "policy A")?;
    let hot: Vec<usize> = (0..model.num_prompts())
        .map(|x| dominating_response(a, model, x).0)
        .collect();
    Ok(GenerativePolicy::from_validated(
        Matrix::one_hot(model.num_responses(), &hot).expect("selected response is in range"),
    ))
}

// ---------------------------------------------------------------------------
// Exact oracles
// ---------------------------------------------------------------------------

/// Exact expected scores of a T-trial contest between `a` and `b`, by
/// enumerating (prompt, response, response) tuples weighted by
/// `p(x) P_a(y_a|x) P_b(y_b|x)` and splitting each on the preference
/// probability. Expectations are linear in T. An inclusive expectation is
/// negative infinity exactly when some positive-probability branch scores
/// negative infinity; zero-probability branches are skipped.
pub fn exact_expected_scores(
    a: &GenerativePolicy,
    b: &GenerativePolicy,
    model: &PopulationModel,
    trials: u64,
) -> Result<ExpectedScores> {
    check_policy_shape(a, model, "policy A")?;
    check_policy_shape(b, model, "policy B")?;
    check_enumeration_size(model)?;
    if trials == 0 {
        return Ok(ExpectedScores {
            agg_a: 0.0,
            agg_b: 0.0,
            inc_a: Score::finite(0.0),
            inc_b: Score::finite(0.0),
        });
    }

    let mut agg_a = 0.0;
    let mut agg_b = 0.0;
    let mut inc_a = IncAccumulator::new();
    let mut inc_b = IncAccumulator::new();

    for x in 0..model.num_prompts() {
        let px = model.prompts().weight(x);
        if px == 0.0 {
            continue;
        }
        for y_a in 0..model.num_responses() {
            let pa = a.prob(x, y_a);
            if pa == 0.0 {
                continue;
            }
            for y_b in 0..model.num_responses() {
                let pb = b.prob(x, y_b);
                if pb == 0.0 {
                    continue;
                }
                let w = px * pa * pb;
                let q = pairwise_win_probability(model, x, y_a, y_b);
                agg_a += w * q;
                agg_b += w * (1.0 - q);
                // Perspective A: preferred with probability q, own response y_a.
                inc_a.add(w, q, a.prob(x, y_a), a.prob(x, y_b));
                // Perspective B: preferred with probability 1 - q, own response y_b.
                inc_b.add(w, 1.0 - q, b.prob(x, y_b), b.prob(x, y_a));
            }
        }
    }

    let t = trials as f64;
    Ok(ExpectedScores {
        agg_a: agg_a * t,
        agg_b: agg_b * t,
        inc_a: inc_a.finish(t),
        inc_b: inc_b.finish(t),
    })
}

/// Expected inclusive term accumulator with the convention that a branch of
/// probability zero contributes nothing even when its log is -inf.
struct IncAccumulator {
    sum: f64,
    neg_inf: bool,
}

impl IncAccumulator {
    fn new() -> IncAccumulator {
        IncAccumulator {
            sum: 0.0,
            neg_inf: false,
        }
    }

    /// Adds weight `w` times the expected trial term for a side that is
    /// preferred with probability `q_self`, holds probability `p_self` on
    /// its own response and `p_other` on the opponent's. `p_self > 0`
    /// because the tuple weight includes it.
    fn add(&mut self, w: f64, q_self: f64, p_self: f64, p_other: f64) {
        if self.neg_inf {
            return;
        }
        debug_assert!(p_self > 0.0);
        let denom = p_self + p_other;
        let mut term = q_self * (p_self.ln() - denom.ln());
        let q_other = 1.0 - q_self;
        if q_other > 0.0 {
            if p_other == 0.0 {
                self.neg_inf = true;
                return;
            }
            term += q_other * (p_other.ln() - denom.ln());
        }
        self.sum += w * term;
    }

    fn finish(self, t: f64) -> Score {
        if self.neg_inf {
            Score::NegInfinity
        } else {
            Score::finite(self.sum * t)
        }
    }
}

fn check_enumeration_size(model: &PopulationModel) -> Result<()> {
    let tuples = model.num_prompts() as u128 * (model.num_responses() as u128).pow(2);
    if tuples > ENUMERATION_LIMIT as u128 {
        return Err(Error::EnumerationTooLarge {
            tuples,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Exact value of E[inclusive(A*)] - E[inclusive(B)] over a T-trial
/// contest between the maximally inclusive policy `a_star` and `b`,
/// computed as a weighted sum of Bernoulli KL divergences rather than from
/// the score expectations: per (x, y_a, y_b) tuple the term is
/// `D(Bern(Q*) || Bern(Q_B))` with `Q* = P*(y_a) / (P*(y_a) + P*(y_b))`
/// and `Q_B = P_B(y_a) / (P_B(y_a) + P_B(y_b))`. Returns +inf when B has
/// an expected inclusive score of -inf. Always nonnegative.
///
/// `a_star` must equal the softmax choice distribution of `model` to
/// [`MAXIMALLY_INCLUSIVE_TOL`] per entry; the identity with the score
/// difference is specific to that policy.
pub fn expected_inclusive_gap(
    a_star: &GenerativePolicy,
    b: &GenerativePolicy,
    model: &PopulationModel,
    trials: u64,
) -> Result<f64> {
    check_policy_shape(a_star, model, "policy A*")?;
    check_policy_shape(b, model, "policy B")?;
    check_enumeration_size(model)?;
    let reference = softmax_choice_distribution(model);
    let mut max_abs_diff = 0.0f64;
    for x in 0..model.num_prompts() {
        for y in 0..model.num_responses() {
            max_abs_diff = max_abs_diff.max((a_star.prob(x, y) - reference.prob(x, y)).abs());
        }
    }
    if max_abs_diff > MAXIMALLY_INCLUSIVE_TOL {
        return Err(Error::NotMaximallyInclusive {
            max_abs_diff,
            tol: MAXIMALLY_INCLUSIVE_TOL,
        });
    }
    if trials == 0 {
        return Ok(0.0);
    }

    let mut sum = 0.0;
    for x in 0..model.num_prompts() {
        let px = model.prompts().weight(x);
        if px == 0.0 {
            continue;
        }
        for y_a in 0..model.num_responses() {
            let pa = a_star.prob(x, y_a);
            if pa == 0.0 {
                continue;
            }
            for y_b in 0..model.num_responses() {
                let pb = b.prob(x, y_b);
                if pb == 0.0 {
                    continue;
                }
                // Softmax rows are strictly positive, so Q* is interior.
                let star_denom = a_star.prob(x, y_a) + a_star.prob(x, y_b);
                let q_star = a_star.prob(x, y_a) / star_denom;
                let q_star_comp = a_star.prob(x, y_b) / star_denom;
                // pb > 0 keeps this denominator positive; Q_B may hit 0.
                let b_denom = b.prob(x, y_a) + b.prob(x, y_b);
                let q_b = b.prob(x, y_a) / b_denom;
                let q_b_comp = b.prob(x, y_b) / b_denom;
                let kl = bernoulli_kl(q_star, q_star_comp, q_b, q_b_comp);
                if kl == f64::INFINITY {
                    return Ok(f64::INFINITY);
                }
                sum += px * pa * pb * kl;
            }
        }
    }
    debug_assert!(sum > -1e-9, "per-tuple KL sums should never go negative");
    Ok((sum * trials as f64).max(0.0))
}

/// KL divergence between Bernoulli(p) and Bernoulli(q), with complements
/// passed explicitly so that values computed as ratios keep full precision
/// near 0 and 1. `p` must be interior; `q` may be degenerate, giving +inf.
fn bernoulli_kl(p: f64, p_comp: f64, q: f64, q_comp: f64) -> f64 {
    debug_assert!(p > 0.0 && p_comp > 0.0);
    if q == 0.0 || q_comp == 0.0 {
        return f64::INFINITY;
    }
    p * (p.ln() - q.ln()) + p_comp * (p_comp.ln() - q_comp.ln())
}

// ---------------------------------------------------------------------------
