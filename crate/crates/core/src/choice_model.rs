//! Population choice model and generative policies.
//!
//! A population of annotators is modeled by finite prompt and response
//! spaces plus a utility table `u(x, y)`. A single annotation draws
//! `U(x, y) = u(x, y) + g(x, y)` with i.i.d. standard Gumbel noise `g` and
//! picks the response with the largest realized utility. Under that noise
//! the marginal choice distribution is the row softmax of `u`, and the
//! probability that response `a` beats a distinct response `b` is
//! `exp(u_a) / (exp(u_a) + exp(u_b))`, the logistic of the utility gap.
//!
//! Generative policies are row-stochastic tables over the same spaces.
//! Rows are validated to tolerance [`STOCHASTIC_TOL`] and renormalized
//! exactly once at construction; afterwards every row sums to 1 up to f64
//! rounding and is never touched again.

use rand::distributions::Open01;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Tolerance for validating stochastic rows handed in from outside.
pub const STOCHASTIC_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Spaces and the population model
// ---------------------------------------------------------------------------

/// Finite prompt space with a sampling distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpace {
    weights: Vec<f64>,
}

impl PromptSpace {
    /// Uniform distribution over `n` prompts.
    pub fn uniform(n: usize) -> Result<PromptSpace> {
        if n == 0 {
            return Err(Error::ParamOutOfRange {
                name: "prompt count".to_string(),
                value: 0.0,
                range: ">= 1".to_string(),
            });
        }
        PromptSpace::new(vec![1.0 / n as f64; n])
    }

    /// Explicit weights: nonnegative, summing to 1 within [`STOCHASTIC_TOL`].
    /// Renormalized once so downstream code sees an exact distribution.
    pub fn new(weights: Vec<f64>) -> Result<PromptSpace> {
        let m = validated_stochastic(Matrix::from_flat(1, weights.len(), weights).map_err(
            |_| Error::ParamOutOfRange {
                name: "prompt count".to_string(),
                value: 0.0,
                range: ">= 1".to_string(),
            },
        )?, "prompt distribution")?;
        Ok(PromptSpace {
            weights: m.row(0).to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, x: usize) -> f64 {
        self.weights[x]
    }

    /// Inverse-CDF draw over the prompt weights.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.weights, rng)
    }
}

/// Finite response space; only its size matters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResponseSpace {
    size: usize,
}

impl ResponseSpace {
    pub fn new(size: usize) -> Result<ResponseSpace> {
        if size == 0 {
            return Err(Error::ParamOutOfRange {
                name: "response count".to_string(),
                value: 0.0,
                range: ">= 1".to_string(),
            });
        }
        Ok(ResponseSpace { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

/// Prompt space, response space, and the annotator utility table.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationModel {
    prompts: PromptSpace,
    responses: ResponseSpace,
    utility: Matrix,
}

impl PopulationModel {
    pub fn new(
        prompts: PromptSpace,
        responses: ResponseSpace,
        utility: Matrix,
    ) -> Result<PopulationModel> {
        if utility.rows() != prompts.len() || utility.cols() != responses.size() {
            return Err(Error::ShapeMismatch {
                context: "utility table".to_string(),
                expected: format!("{} x {}", prompts.len(), responses.size()),
                got: format!("{} x {}", utility.rows(), utility.cols()),
            });
        }
        if let Some((row, col, _)) = utility.position_where(|v| !v.is_finite()) {
            return Err(Error::NotFinite {
                context: "utility table".to_string(),
                row,
                col,
            });
        }
        Ok(PopulationModel {
            prompts,
            responses,
            utility,
        })
    }

    /// Model with uniform prompt weights derived from the utility shape.
    pub fn with_uniform_prompts(utility: Matrix) -> Result<PopulationModel> {
        let prompts = PromptSpace::uniform(utility.rows())?;
        let responses = ResponseSpace::new(utility.cols())?;
        PopulationModel::new(prompts, responses, utility)
    }

    pub fn num_prompts(&self) -> usize {
        self.prompts.len()
    }

    pub fn num_responses(&self) -> usize {
        self.responses.size()
    }

    pub fn prompts(&self) -> &PromptSpace {
        &self.prompts
    }

    pub fn utilities(&self) -> &Matrix {
        &self.utility
    }

    pub fn utility(&self, x: usize, y: usize) -> f64 {
        self.utility.get(x, y)
    }
}

// ---------------------------------------------------------------------------
// Stochastic tables
// ---------------------------------------------------------------------------

/// Row-stochastic response distribution of a generative AI.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativePolicy {
    probs: Matrix,
}

impl GenerativePolicy {
    /// Validates and renormalizes an externally supplied table.
    pub fn new(probs: Matrix) -> Result<GenerativePolicy> {
        Ok(GenerativePolicy {
            probs: validated_stochastic(probs, "generative policy")?,
        })
    }

    /// Wraps rows already known to be stochastic (softmax output, one-hot
    /// construction). Skips the renormalization pass so entries are kept
    /// bit for bit.
    pub(crate) fn from_validated(probs: Matrix) -> GenerativePolicy {
        GenerativePolicy { probs }
    }

    pub fn probs(&self) -> &Matrix {
        &self.probs
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.probs.get(x, y)
    }

    pub fn num_prompts(&self) -> usize {
        self.probs.rows()
    }

    pub fn num_responses(&self) -> usize {
        self.probs.cols()
    }

    /// True when every row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.probs.iter_rows().all(|row| row.iter().all(|&p| p == 0.0 || p == 1.0))
    }
}

/// Marginal choice distribution of the annotator population.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationChoiceDistribution {
    probs: Matrix,
}

impl PopulationChoiceDistribution {
    pub fn new(probs: Matrix) -> Result<PopulationChoiceDistribution> {
        Ok(PopulationChoiceDistribution {
            probs: validated_stochastic(probs, "population choice distribution")?,
        })
    }

    pub fn probs(&self) -> &Matrix {
        &self.probs
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.probs.get(x, y)
    }

    pub fn num_prompts(&self) -> usize {
        self.probs.rows()
    }

    pub fn num_responses(&self) -> usize {
        self.probs.cols()
    }
}

fn validated_stochastic(mut m: Matrix, context: &str) -> Result<Matrix> {
    if let Some((row, col, _)) = m.position_where(|v| !v.is_finite()) {
        return Err(Error::NotFinite {
            context: context.to_string(),
            row,
            col,
        });
    }
    if let Some((row, col, value)) = m.position_where(|v| !(-0.0..=1.0 + STOCHASTIC_TOL).contains(&v))
    {
        return Err(Error::EntryOutOfRange {
            context: context.to_string(),
            row,
            col,
            value,
            range: "[0, 1]".to_string(),
        });
    }
    for row in 0..m.rows() {
        let sum: f64 = m.row(row).iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::NotStochastic {
                context: context.to_string(),
                row,
                sum,
                tol: STOCHASTIC_TOL,
            });
        }
        // The single renormalization pass. Entries stay in [0, 1] because
        // each is at most the row sum.
        for v in m.row_mut(row) {
            *v /= sum;
        }
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// Model-derived policies
// ---------------------------------------------------------------------------

/// Row softmax of the utility table: the annotators' marginal choice
/// distribution under Gumbel noise. Rows subtract their max before
/// exponentiation, so arbitrary utility shifts cannot overflow.
pub fn softmax_choice_distribution(model: &PopulationModel) -> PopulationChoiceDistribution {
    PopulationChoiceDistribution {
        probs: softmax_rows(model.utilities(), 1.0),
    }
}

fn softmax_rows(util: &Matrix, inv_temperature: f64) -> Matrix {
    let mut rows = Vec::with_capacity(util.rows());
    for row in util.iter_rows() {
        let m = row
            .iter()
            .map(|&u| u * inv_temperature)
            .fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&u| (u * inv_temperature - m).exp()).collect();
        let sum: f64 = exps.iter().sum();
        rows.push(exps.into_iter().map(|e| e / sum).collect());
    }
    Matrix::from_rows(rows).expect("softmax preserves the table shape")
}

/// The policy whose response distribution equals the population choice
/// distribution, entry for entry.
pub fn maximally_inclusive_ai(pcd: &PopulationChoiceDistribution) -> GenerativePolicy {
    GenerativePolicy::from_validated(pcd.probs.clone())
}

/// One-hot policy at the modal response of each prompt, smallest index on
/// ties.
pub fn deterministic_greedy_ai(pcd: &PopulationChoiceDistribution) -> GenerativePolicy {
    let hot: Vec<usize> = pcd
        .probs
        .iter_rows()
        .map(|row| argmax_first(row).0)
        .collect();
    GenerativePolicy::from_validated(
        Matrix::one_hot(pcd.num_responses(), &hot).expect("argmax index is in range"),
    )
}

/// Softmax of `u / temperature`. Sharpens toward greedy as the temperature
/// drops and flattens toward uniform as it grows.
pub fn tempered_ai(model: &PopulationModel, temperature: f64) -> Result<GenerativePolicy> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::ParamOutOfRange {
            name: "temperature".to_string(),
            value: temperature,
            range: "(0, inf)".to_string(),
        });
    }
    Ok(GenerativePolicy::from_validated(softmax_rows(
        model.utilities(),
        1.0 / temperature,
    )))
}

/// Smallest-index argmax. The flag reports whether another entry ties the
/// maximum exactly.
pub(crate) fn argmax_first(values: &[f64]) -> (usize, bool) {
    let mut best = 0;
    let mut tied = false;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
            tied = false;
        } else if v == values[best] {
            tied = true;
        }
    }
    (best, tied)
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Standard Gumbel variate via inverse CDF on an open-interval uniform.
pub fn sample_gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    gumbel_from_uniform(u)
}

/// Inverse CDF of the standard Gumbel. Finite for `u` in the open unit
/// interval; `u = 1/e` maps to 0.
pub fn gumbel_from_uniform(u: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0);
    -(-u.ln()).ln()
}

/// Inverse-CDF draw from the policy's row at prompt `x`. Zero-probability
/// responses are never returned.
pub fn sample_response<R: Rng + ?Sized>(
    policy: &GenerativePolicy,
    x: usize,
    rng: &mut R,
) -> usize {
    sample_index(policy.probs.row(x), rng)
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            cum += w;
            if u < cum {
                return i;
            }
        }
    }
    // Reached only when rounding left the row sum a few ulps below u.
    last_positive
}

/// Probability that response `y_a` is preferred to `y_b` at prompt `x` in a
/// single annotation. Identical responses tie by a fair coin, so the value
/// is exactly 1/2 there; otherwise this is the logistic of the utility gap.
///
/// The two orderings sum to exactly 1: the larger branch is computed as
/// `1/(1 + exp(-|d|))`, which lies in [1/2, 1], and the smaller as its
/// floating-point-exact complement.
pub fn pairwise_win_probability(
    model: &PopulationModel,
    x: usize,
    y_a: usize,
    y_b: usize,
) -> f64 {
    if y_a == y_b {
        return 0.5;
    }
    let d = model.utility(x, y_a) - model.utility(x, y_b);
    if d >= 0.0 {
        positive_logistic(d)
    } else {
        1.0 - positive_logistic(-d)
    }
}

// For d >= 0 the result is in [1/2, 1], where 1 - p is exact.
fn positive_logistic(d: f64) -> f64 {
    debug_assert!(d >= 0.0);
    1.0 / (1.0 + (-d).exp())
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    const EULER_MASCHERONI: f64 = 0.5772156649015329;

    fn two_response_model(u0: f64, u1: f64) -> PopulationModel {
        PopulationModel::with_uniform_prompts(Matrix::from_rows(vec![vec![u0, u1]]).unwrap())
            .unwrap()
    }

    #[test]
    fn softmax_matches_closed_form() {
        let model = two_response_model(std::f64::consts::LN_2, 0.0);
        let pcd = softmax_choice_distribution(&model);
        assert!((pcd.prob(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((pcd.prob(0, 1) - 1.0 / 3.0).abs() < 1e-15);

        let sym = softmax_choice_distribution(&two_response_model(1.25, 1.25));
        assert_eq!(sym.prob(0, 0), 0.5);
        assert_eq!(sym.prob(0, 1), 0.5);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let util = Matrix::from_rows(vec![vec![700.0, -700.0, 0.3], vec![-2.0, -2.0, -2.0]]).unwrap();
        let pcd = softmax_choice_distribution(
            &PopulationModel::with_uniform_prompts(util).unwrap(),
        );
        for row in pcd.probs().iter_rows() {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(
            u in proptest::collection::vec(-5.0f64..5.0, 2..5),
            shift in -1000.0f64..1000.0,
        ) {
            let base = softmax_choice_distribution(
                &PopulationModel::with_uniform_prompts(Matrix::from_rows(vec![u.clone()]).unwrap())
                    .unwrap(),
            );
            let shifted_u: Vec<f64> = u.iter().map(|v| v + shift).collect();
            let shifted = softmax_choice_distribution(
                &PopulationModel::with_uniform_prompts(Matrix::from_rows(vec![shifted_u]).unwrap())
                    .unwrap(),
            );
            for y in 0..u.len() {
                prop_assert!((base.prob(0, y) - shifted.prob(0, y)).abs() < 1e-12);
            }
        }

        #[test]
        fn win_probabilities_are_exact_complements(
            u0 in -800.0f64..800.0,
            u1 in -800.0f64..800.0,
        ) {
            let model = two_response_model(u0, u1);
            let p = pairwise_win_probability(&model, 0, 0, 1);
            let q = pairwise_win_probability(&model, 0, 1, 0);
            prop_assert_eq!(p + q, 1.0);
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn win_probability_examples() {
        let model = two_response_model(std::f64::consts::LN_2, 0.0);
        assert!((pairwise_win_probability(&model, 0, 0, 1) - 2.0 / 3.0).abs() < 1e-15);
        // Same response index: fair coin regardless of utility.
        assert_eq!(pairwise_win_probability(&model, 0, 0, 0), 0.5);
        // Distinct responses with equal utilities.
        let flat = two_response_model(0.7, 0.7);
        assert_eq!(pairwise_win_probability(&flat, 0, 0, 1), 0.5);
        assert_eq!(pairwise_win_probability(&flat, 0, 1, 0), 0.5);
    }

    #[test]
    fn maximally_inclusive_copies_exactly() {
        let model = two_response_model(0.31, -1.7);
        let pcd = softmax_choice_distribution(&model);
        let ai = maximally_inclusive_ai(&pcd);
        for x in 0..pcd.num_prompts() {
            for y in 0..pcd.num_responses() {
                assert_eq!(ai.prob(x, y).to_bits(), pcd.prob(x, y).to_bits());
            }
        }
    }

    #[test]
    fn greedy_and_tempered_policies() {
        let util = Matrix::from_rows(vec![vec![0.0, 1.0, 1.0], vec![2.0, -1.0, 0.0]]).unwrap();
        let model = PopulationModel::with_uniform_prompts(util).unwrap();
        let pcd = softmax_choice_distribution(&model);

        let greedy = deterministic_greedy_ai(&pcd);
        assert_eq!(greedy.probs().row(0), &[0.0, 1.0, 0.0]); // tie at (1, 2) takes index 1
        assert_eq!(greedy.probs().row(1), &[1.0, 0.0, 0.0]);
        assert!(greedy.is_deterministic());

        let unit = tempered_ai(&model, 1.0).unwrap();
        for x in 0..2 {
            for y in 0..3 {
                assert_eq!(unit.prob(x, y), pcd.prob(x, y));
            }
        }
        let cold = tempered_ai(&model, 1e-3).unwrap();
        assert!(cold.prob(1, 0) > 1.0 - 1e-12);
        let hot = tempered_ai(&model, 1e6).unwrap();
        for y in 0..3 {
            assert!((hot.prob(0, y) - 1.0 / 3.0).abs() < 1e-6);
        }
        assert!(tempered_ai(&model, 0.0).is_err());
        assert!(tempered_ai(&model, -1.0).is_err());
    }

    #[test]
    fn stochastic_validation_rejects_bad_rows() {
        let short = Matrix::from_rows(vec![vec![0.5, 0.5], vec![0.49, 0.49]]).unwrap();
        match GenerativePolicy::new(short).unwrap_err() {
            Error::NotStochastic { row, .. } => assert_eq!(row, 1),
            e => panic!("unexpected error {e:?}"),
        }
        let negative = Matrix::from_rows(vec![vec![1.2, -0.2]]).unwrap();
        assert!(matches!(
            GenerativePolicy::new(negative).unwrap_err(),
            Error::EntryOutOfRange { .. }
        ));
        // Inside tolerance: accepted and renormalized to an exact distribution.
        let close = Matrix::from_rows(vec![vec![0.5 + 4e-10, 0.5 + 4e-10]]).unwrap();
        let p = GenerativePolicy::new(close).unwrap();
        let sum: f64 = p.probs().row(0).iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn prompt_space_validation_and_uniform() {
        assert!(PromptSpace::uniform(0).is_err());
        assert!(PromptSpace::new(vec![0.5, 0.4]).is_err());
        assert!(PromptSpace::new(vec![1.1, -0.1]).is_err());
        let u3 = PromptSpace::uniform(3).unwrap();
        let sum: f64 = u3.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn model_shape_checks() {
        let util = Matrix::from_rows(vec![vec![0.0, 1.0]]).unwrap();
        let bad = PopulationModel::new(
            PromptSpace::uniform(2).unwrap(),
            ResponseSpace::new(2).unwrap(),
            util.clone(),
        );
        assert!(matches!(bad.unwrap_err(), Error::ShapeMismatch { .. }));
        let inf = Matrix::from_rows(vec![vec![f64::INFINITY, 0.0]]).unwrap();
        assert!(PopulationModel::with_uniform_prompts(inf).is_err());
    }

    #[test]
    fn gumbel_inverse_cdf_fixed_point() {
        let u = 1.0 / std::f64::consts::E;
        assert_eq!(gumbel_from_uniform(u), 0.0);
    }

    #[test]
    fn gumbel_moments_and_cdf() {
        let mut rng = stream(2024, 0);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut nonpositive = 0usize;
        for _ in 0..n {
            let g = sample_gumbel(&mut rng);
            sum += g;
            if g <= 0.0 {
                nonpositive += 1;
            }
        }
        let mean = sum / n as f64;
        assert!(
            (mean - EULER_MASCHERONI).abs() < 0.005,
            "gumbel mean {mean} too far from {EULER_MASCHERONI}"
        );
        let p0 = nonpositive as f64 / n as f64;
        assert!(
            (p0 - (-1.0f64).exp()).abs() < 0.002,
            "P(G <= 0) = {p0}, expected about exp(-1)"
        );
    }

    #[test]
    fn sample_response_respects_point_mass() {
        let policy =
            GenerativePolicy::new(Matrix::from_rows(vec![vec![0.0, 1.0, 0.0]]).unwrap()).unwrap();
        let mut rng = stream(5, 0);
        for _ in 0..100 {
            assert_eq!(sample_response(&policy, 0, &mut rng), 1);
        }
        let single = GenerativePolicy::new(Matrix::from_rows(vec![vec![1.0]]).unwrap()).unwrap();
        assert_eq!(sample_response(&single, 0, &mut rng), 0);
    }

    #[test]
    fn sample_response_frequency_bracket() {
        let policy = GenerativePolicy::new(
            Matrix::from_rows(vec![vec![2.0 / 3.0, 1.0 / 3.0]]).unwrap(),
        )
        .unwrap();
        let mut rng = stream(11, 0);
        let n = 300_000usize;
        let mut zeros = 0usize;
        for _ in 0..n {
            if sample_response(&policy, 0, &mut rng) == 0 {
                zeros += 1;
            }
        }
        let freq = zeros as f64 / n as f64;
        assert!(
            (0.6637..=0.6696).contains(&freq),
            "frequency of response 0 was {freq}"
        );
    }

    #[test]
    fn gumbel_argmax_frequencies_match_softmax() {
        let util = vec![0.4, -0.9, 1.1];
        let model = PopulationModel::with_uniform_prompts(
            Matrix::from_rows(vec![util.clone()]).unwrap(),
        )
        .unwrap();
        let pcd = softmax_choice_distribution(&model);
        let mut rng = stream(31, 0);
        let n = 1_000_000usize;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for (y, &u) in util.iter().enumerate() {
                let v = u + sample_gumbel(&mut rng);
                if v > best_v {
                    best_v = v;
                    best = y;
                }
            }
            counts[best] += 1;
        }
        for (y, &count) in counts.iter().enumerate() {
            let p = pcd.prob(0, y);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let freq = count as f64 / n as f64;
            assert!(
                (freq - p).abs() <= 4.0 * se,
                "response {y}: frequency {freq} vs softmax {p} (4 se = {})",
                4.0 * se
            );
        }
    }

    #[test]
    fn argmax_first_breaks_ties_low() {
        assert_eq!(argmax_first(&[1.0, 3.0, 3.0]), (1, true));
        assert_eq!(argmax_first(&[5.0]), (0, false));
        assert_eq!(argmax_first(&[2.0, 1.0]), (0, false));
    }
}
