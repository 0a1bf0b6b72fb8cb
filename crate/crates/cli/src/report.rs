//! Run reports and their serialization. JSON output renders every float
//! with 17 significant digits so values round-trip exactly, and renders
//! infinities as the strings "inf" and "-inf". The trial CSV has the fixed
//! header `t,x,y_a,y_b,preference,tie_broken`.

use std::io;

use indexmap::IndexMap;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};

use prefsim_core::contest::ContestRecord;
use prefsim_core::decision::DecisionResult;
use prefsim_core::score::Score;
use prefsim_core::verify::{EstimatorSummary, TheoremCheckReport};

use crate::config::ScenarioConfig;

/// Top-level report written as `report.json`. Wall time is deliberately
/// not a field: reports must be byte-identical across reruns, so timing
/// goes to stdout instead.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ScenarioConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contest: Option<ContestReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decision: Option<Vec<DecisionPolicyReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem_checks: Option<Vec<TheoremCheckReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub all_passed: Option<bool>,
}

impl RunReport {
    pub fn new(command: &str, seed: u64, config: Option<ScenarioConfig>) -> RunReport {
        RunReport {
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            config,
            contest: None,
            decision: None,
            theorem_checks: None,
            all_passed: None,
        }
    }
}

/// Scores of one contest pair under both objectives and both perspectives,
/// keyed by policy name.
#[derive(Debug, Serialize)]
pub struct ScorePair {
    pub agglomerative: IndexMap<String, Score>,
    pub inclusive: IndexMap<String, Score>,
}

/// Which policy each objective selects; "tie" when the scores are equal.
#[derive(Debug, Serialize)]
pub struct SelectionReport {
    pub agglomerative: String,
    pub inclusive: String,
    pub agreement: bool,
}

#[derive(Debug, Serialize)]
pub struct ContestReport {
    pub pair: [String; 2],
    pub trials: u64,
    pub realized: ScorePair,
    pub realized_selection: SelectionReport,
    /// Exact expected scores; absent (with `oracle_note`) when the
    /// scenario exceeds the enumeration cap.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_expected: Option<ScorePair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_selection: Option<SelectionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_note: Option<String>,
    pub estimates: IndexMap<String, EstimatorSummary>,
}

#[derive(Debug, Serialize)]
pub struct DecisionPolicyReport {
    pub policy: String,
    pub prompt: usize,
    pub trials: u64,
    pub delta: f64,
    /// KL divergence from the population choice distribution to the
    /// policy at the decision prompt; "inf" when the policy misses support.
    #[serde(serialize_with = "prefsim_core::score::json_num::serialize")]
    pub kl: f64,
    /// High-probability lower bound on the chosen action's true value.
    pub bound: Score,
    pub true_values: Vec<f64>,
    pub best_action: usize,
    /// Fraction of repetitions choosing each action.
    pub chosen_action_frequency: Vec<f64>,
    /// Repetitions whose empirical argmax was tied.
    pub empirical_tie_count: u64,
    pub gap: EstimatorSummary,
    pub violation_frequency: EstimatorSummary,
    /// The first repetition in full, as a worked example.
    pub first_run: DecisionResult,
}

/// Selects between two named scores, returning "tie" on equality.
pub fn select(name_a: &str, score_a: Score, name_b: &str, score_b: Score) -> String {
    match score_a.cmp(&score_b) {
        std::cmp::Ordering::Greater => name_a.to_string(),
        std::cmp::Ordering::Less => name_b.to_string(),
        std::cmp::Ordering::Equal => "tie".to_string(),
    }
}

// ---------------------------------------------------------------------------
// JSON rendering
// ---------------------------------------------------------------------------

/// Pretty JSON with finite floats rendered as 17-significant-digit
/// scientific notation so they round-trip exactly. Non-finite floats never
/// reach a formatter (serde_json writes `null` for them upstream); fields
/// that can be infinite use the string-mapping field serializers from the
/// core score module instead.
struct ReportFormatter<'a> {
    pretty: PrettyFormatter<'a>,
}

impl<'a> Formatter for ReportFormatter<'a> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.pretty.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.pretty.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object_value(writer)
    }
}

/// Renders any serializable value with the report formatting rules,
/// ending with a newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    let formatter = ReportFormatter {
        pretty: PrettyFormatter::new(),
    };
    let mut serializer = Serializer::with_formatter(&mut out, formatter);
    value.serialize(&mut serializer)?;
    out.push(b'\n');
    Ok(out)
}

// ---------------------------------------------------------------------------
// CSV rendering
// ---------------------------------------------------------------------------

pub const CSV_HEADER: &str = "t,x,y_a,y_b,preference,tie_broken";

pub fn record_to_csv(record: &ContestRecord) -> String {
    let mut out = String::with_capacity(32 * (record.trials().len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for trial in record.trials() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            trial.t, trial.x, trial.y_a, trial.y_b, trial.preference, trial.tie_broken
        ));
    }
    out
}
