//! Append-only JSONL transcripts.
//!
//! A transcript file holds one `header` line, one `turn` line per resolved
//! turn and a closing `summary` line. The summary carries a SHA-256 over the
//! header and turn lines so later edits are detectable. Transcripts are
//! self-contained: replaying the recorded decisions with the recorded seed and
//! config reproduces every outcome.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{Exchange, PROMPT_VERSION};
use crate::engine::{Accident, EngineConfig, GameSetup, GameState, TurnOutcome, VictoryResult};
use crate::forces::{fighting_power, power_shares, AttritionReport, ForceState};
use crate::ladder::{Ladder, LadderRung};
use crate::memory::{BetrayalSnapshot, DecisionLabel, DecisionRecord};
use crate::protocol::{
    ActionDecision, Confidence, CredibilityAssessment, CredibilityRating, Decision, Forecast, MiscalculationRisk,
    ReflectionReport, SignalDecision, TurnDecision, SCHEMA_VERSION,
};
use crate::scenarios::ScenarioSpec;
use crate::{PerSide, Side};

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("transcript has no header line")]
    MissingHeader,
    #[error("line {line}: unexpected {kind} line")]
    UnexpectedLine { line: usize, kind: &'static str },
    #[error("transcript has no summary line")]
    MissingSummary,
    #[error("content hash mismatch: summary says {expected}, content hashes to {actual}")]
    HashMismatch { expected: String, actual: String },
    #[error("replay failed: {0}")]
    Replay(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub schema_version: u32,
    pub prompt_version: String,
    pub game_id: String,
    pub scenario: ScenarioSpec,
    pub agents: PerSide<String>,
    pub seed: u64,
    pub max_turns: u32,
    pub config: EngineConfig,
    pub custom_ladder: bool,
    /// Present only when the game was played on a non-canonical ladder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<LadderRung>>,
}

impl TranscriptHeader {
    pub fn new(setup: &GameSetup, agents: PerSide<String>) -> Self {
        let canonical = setup.ladder.is_canonical();
        TranscriptHeader {
            schema_version: SCHEMA_VERSION,
            prompt_version: PROMPT_VERSION.to_string(),
            game_id: setup.game_id.clone(),
            scenario: setup.scenario.clone(),
            agents,
            seed: setup.seed,
            max_turns: setup.scenario.max_turns(),
            config: setup.config.clone(),
            custom_ladder: setup.ladder.is_custom(),
            ladder: (!canonical).then(|| setup.ladder.rungs().to_vec()),
        }
    }

    pub fn ladder(&self) -> Result<Arc<Ladder>, TranscriptError> {
        match &self.ladder {
            None => Ok(Ladder::canonical()),
            Some(rungs) => Ladder::from_rungs(rungs.clone(), self.custom_ladder)
                .map(Arc::new)
                .map_err(|e| TranscriptError::Replay(e.to_string())),
        }
    }

    pub fn setup(&self) -> Result<GameSetup, TranscriptError> {
        Ok(GameSetup::new(self.game_id.clone(), self.scenario.clone(), self.seed)
            .with_config(self.config.clone())
            .with_ladder(self.ladder()?))
    }
}

/// Reflection block, 16 fields per side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionFields {
    pub agent: String,
    pub view_hash: String,
    /// Territory balance from this side's perspective when the turn began.
    pub balance_seen: f64,
    pub immediate_rating: CredibilityRating,
    pub immediate_rationale: String,
    pub resolve_rating: CredibilityRating,
    pub resolve_rationale: String,
    pub self_forecasting: String,
    pub self_credibility_assessment: String,
    pub self_metacognition: String,
    pub opponent_predicts_me: String,
    pub opponent_assesses_my_credibility: String,
    pub opponent_self_awareness: String,
    pub situational_assessment: String,
    pub reflection_hash: String,
    /// Model calls made for the whole turn, retries included.
    pub attempts: u32,
}

/// Forecast block, 4 fields per side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastFields {
    pub predicted_action: String,
    pub confidence: Confidence,
    pub miscalculation_risk: MiscalculationRisk,
    pub reasoning: String,
}

/// Signal block, 4 fields per side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFields {
    pub immediate_signal: String,
    pub signal_value: i32,
    pub conditional_signal: String,
    pub public_statement: String,
}

/// Action block, 8 fields per side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionFields {
    pub action_choice: String,
    pub chosen_value: i32,
    pub executed_action: String,
    pub executed_value: i32,
    pub effective_value: i32,
    pub consistency_statement: String,
    pub private_rationale: String,
    /// Hash of the reflection and forecast the decision phase received.
    pub decision_inputs_hash: String,
}

/// Memory block, 6 fields per side: what this side remembered about its
/// opponent when the turn began, and how the opponent's move was labeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryFields {
    pub decision_panel: String,
    pub betrayal_panel: String,
    pub betrayal_count: u32,
    pub records: Vec<DecisionRecord>,
    pub betrayals: Vec<BetrayalSnapshot>,
    pub opponent_label: DecisionLabel,
}

/// Game-state block, 14 fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameStateFields {
    pub turn: u32,
    pub balance_before: f64,
    pub territory_delta: f64,
    pub balance_after: f64,
    pub asym_multiplier: f64,
    pub gate_open: bool,
    /// A's shares of combined power at the start of the turn.
    pub conventional_share_a: f64,
    pub nuclear_share_a: f64,
    /// Forces after attrition.
    pub forces_a: ForceState,
    pub forces_b: ForceState,
    pub attrition: AttritionReport,
    pub accident_a: Option<Accident>,
    pub accident_b: Option<Accident>,
    pub victory: Option<VictoryResult>,
}

impl GameStateFields {
    pub fn from_outcome(
        outcome: &TurnOutcome,
        forces_before: &PerSide<ForceState>,
        forces_after: &PerSide<ForceState>,
        nuclear_fp_scale: f64,
    ) -> Self {
        let fp_a = fighting_power(&forces_before.a, nuclear_fp_scale);
        let fp_b = fighting_power(&forces_before.b, nuclear_fp_scale);
        let (conventional_share_a, nuclear_share_a) = power_shares(&fp_a, &fp_b);
        GameStateFields {
            turn: outcome.turn,
            balance_before: outcome.balance_before,
            territory_delta: outcome.territory_delta,
            balance_after: outcome.balance_after,
            asym_multiplier: outcome.asym_multiplier,
            gate_open: outcome.gate_open,
            conventional_share_a,
            nuclear_share_a,
            forces_a: forces_after.a.clone(),
            forces_b: forces_after.b.clone(),
            attrition: outcome.attrition,
            accident_a: outcome.accidents.a,
            accident_b: outcome.accidents.b,
            victory: outcome.victory,
        }
    }
}

/// One resolved turn: six blocks of 90 fields in total, plus anomalies and
/// the raw model exchanges (credentials stripped) kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub reflection: PerSide<ReflectionFields>,
    pub forecast: PerSide<ForecastFields>,
    pub signal: PerSide<SignalFields>,
    pub action: PerSide<ActionFields>,
    pub memory: PerSide<MemoryFields>,
    pub game_state: GameStateFields,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anomalies: Vec<String>,
    #[serde(default = "empty_audit", skip_serializing_if = "audit_is_empty")]
    pub audit: PerSide<Vec<Exchange>>,
}

fn empty_audit() -> PerSide<Vec<Exchange>> {
    PerSide::new(Vec::new(), Vec::new())
}

fn audit_is_empty(a: &PerSide<Vec<Exchange>>) -> bool {
    a.a.is_empty() && a.b.is_empty()
}

impl TurnRecord {
    pub fn turn(&self) -> u32 {
        self.game_state.turn
    }

    /// Rebuilds the validated decision each side submitted.
    pub fn decision(&self, side: Side) -> TurnDecision {
        let r = self.reflection.get(side);
        let f = self.forecast.get(side);
        let s = self.signal.get(side);
        let a = self.action.get(side);
        TurnDecision {
            reflection: ReflectionReport {
                opponent_immediate_credibility: CredibilityAssessment {
                    rating: r.immediate_rating,
                    rationale: r.immediate_rationale.clone(),
                },
                opponent_resolve_credibility: CredibilityAssessment {
                    rating: r.resolve_rating,
                    rationale: r.resolve_rationale.clone(),
                },
                self_forecasting: r.self_forecasting.clone(),
                self_credibility_assessment: r.self_credibility_assessment.clone(),
                self_metacognition: r.self_metacognition.clone(),
                opponent_predicts_me: r.opponent_predicts_me.clone(),
                opponent_assesses_my_credibility: r.opponent_assesses_my_credibility.clone(),
                opponent_self_awareness: r.opponent_self_awareness.clone(),
                situational_assessment: r.situational_assessment.clone(),
            },
            forecast: Forecast {
                predicted_action: f.predicted_action.clone(),
                confidence: f.confidence,
                miscalculation_risk: f.miscalculation_risk,
                reasoning: f.reasoning.clone(),
            },
            decision: Decision {
                signal: SignalDecision {
                    immediate_signal: s.immediate_signal.clone(),
                    conditional_signal: s.conditional_signal.clone(),
                    public_statement: s.public_statement.clone(),
                },
                action: ActionDecision {
                    action_choice: a.action_choice.clone(),
                    consistency_statement: a.consistency_statement.clone(),
                    private_rationale: a.private_rationale.clone(),
                },
            },
        }
    }

    pub fn accident(&self, side: Side) -> Option<&Accident> {
        match side {
            Side::A => self.game_state.accident_a.as_ref(),
            Side::B => self.game_state.accident_b.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anomaly {
    pub turn: u32,
    pub side: Option<Side>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub game_id: String,
    pub scenario: String,
    pub agents: PerSide<String>,
    pub seed: u64,
    pub turns_played: u32,
    pub victory: Option<VictoryResult>,
    pub final_balance: f64,
    pub accidents: u32,
    pub max_executed: PerSide<i32>,
    pub anomalies: u32,
    /// Set when the game stopped because an agent failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<Anomaly>,
    pub content_hash: String,
}

impl Summary {
    pub fn from_game(state: &GameState, transcript: &Transcript, aborted: Option<Anomaly>, anomalies: u32) -> Self {
        let h = &transcript.header;
        let accidents = transcript
            .turns
            .iter()
            .map(|t| t.game_state.accident_a.is_some() as u32 + t.game_state.accident_b.is_some() as u32)
            .sum();
        let max_executed = Side::BOTH
            .map(|side| {
                transcript
                    .turns
                    .iter()
                    .map(|t| t.action.get(side).executed_value)
                    .max()
                    .unwrap_or(0)
            })
            .into();
        Summary {
            game_id: h.game_id.clone(),
            scenario: h.scenario.id.clone(),
            agents: h.agents.clone(),
            seed: h.seed,
            turns_played: transcript.turns.len() as u32,
            victory: state.outcome,
            final_balance: state.territory_balance,
            accidents,
            max_executed,
            anomalies,
            aborted,
            content_hash: transcript.content_hash(),
        }
    }

    pub fn winner(&self) -> Option<Side> {
        self.victory.and_then(|v| v.winner)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(TranscriptHeader),
    Turn(TurnRecord),
    Summary(Summary),
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LineRef<'a> {
    Header(&'a TranscriptHeader),
    Turn(&'a TurnRecord),
    Summary(&'a Summary),
}

fn to_line(line: LineRef<'_>) -> String {
    serde_json::to_string(&line).expect("transcript types always serialize")
}

/// Receives transcript lines as a game is played.
pub trait TranscriptSink {
    fn write_header(&mut self, header: &TranscriptHeader) -> std::io::Result<()>;
    fn write_turn(&mut self, record: &TurnRecord) -> std::io::Result<()>;
    fn write_summary(&mut self, summary: &Summary) -> std::io::Result<()>;
}

/// Discards everything; the returned [`Transcript`] still holds the game.
pub struct NullSink;

impl TranscriptSink for NullSink {
    fn write_header(&mut self, _: &TranscriptHeader) -> std::io::Result<()> {
        Ok(())
    }
    fn write_turn(&mut self, _: &TurnRecord) -> std::io::Result<()> {
        Ok(())
    }
    fn write_summary(&mut self, _: &Summary) -> std::io::Result<()> {
        Ok(())
    }
}

/// Streams lines to a writer, flushing after each one.
pub struct JsonlWriter<W: Write> {
    out: W,
}

impl JsonlWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        Ok(JsonlWriter::new(BufWriter::new(File::create(path)?)))
    }
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(out: W) -> Self {
        JsonlWriter { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }

    fn line(&mut self, text: String) -> std::io::Result<()> {
        self.out.write_all(text.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

impl<W: Write> TranscriptSink for JsonlWriter<W> {
    fn write_header(&mut self, header: &TranscriptHeader) -> std::io::Result<()> {
        self.line(to_line(LineRef::Header(header)))
    }
    fn write_turn(&mut self, record: &TurnRecord) -> std::io::Result<()> {
        self.line(to_line(LineRef::Turn(record)))
    }
    fn write_summary(&mut self, summary: &Summary) -> std::io::Result<()> {
        self.line(to_line(LineRef::Summary(summary)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub turns: Vec<TurnRecord>,
    /// Missing only for transcripts of games that were interrupted.
    pub summary: Option<Summary>,
}

/// Result of re-deriving a transcript's outcomes from its decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub turns_checked: usize,
    pub mismatches: Vec<String>,
}

impl ReplayReport {
    pub fn is_faithful(&self) -> bool {
        self.mismatches.is_empty()
    }
}

impl Transcript {
    pub fn begin(header: TranscriptHeader) -> Self {
        Transcript {
            header,
            turns: Vec::new(),
            summary: None,
        }
    }

    pub fn summary(&self) -> Result<&Summary, TranscriptError> {
        self.summary.as_ref().ok_or(TranscriptError::MissingSummary)
    }

    /// Hash over the header and turn lines exactly as written.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(to_line(LineRef::Header(&self.header)).as_bytes());
        h.update(b"\n");
        for t in &self.turns {
            h.update(to_line(LineRef::Turn(t)).as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = to_line(LineRef::Header(&self.header));
        out.push('\n');
        for t in &self.turns {
            out.push_str(&to_line(LineRef::Turn(t)));
            out.push('\n');
        }
        if let Some(s) = &self.summary {
            out.push_str(&to_line(LineRef::Summary(s)));
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_jsonl())
    }

    pub fn read_from(path: &Path) -> Result<Transcript, TranscriptError> {
        let file = File::open(path)?;
        Transcript::parse_lines(BufReader::new(file).lines())
    }

    pub fn parse(text: &str) -> Result<Transcript, TranscriptError> {
        Transcript::parse_lines(text.lines().map(|l| Ok(l.to_string())))
    }

    fn parse_lines(lines: impl Iterator<Item = std::io::Result<String>>) -> Result<Transcript, TranscriptError> {
        let mut header = None;
        let mut turns = Vec::new();
        let mut summary = None;
        for (i, line) in lines.enumerate() {
            let line = line?;
            let n = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line =
                serde_json::from_str(&line).map_err(|source| TranscriptError::Json { line: n, source })?;
            match parsed {
                Line::Header(h) if header.is_none() => header = Some(h),
                Line::Header(_) => {
                    return Err(TranscriptError::UnexpectedLine {
                        line: n,
                        kind: "header",
                    })
                }
                Line::Turn(_) if header.is_none() => return Err(TranscriptError::MissingHeader),
                Line::Turn(_) | Line::Summary(_) if summary.is_some() => {
                    return Err(TranscriptError::UnexpectedLine {
                        line: n,
                        kind: "post-summary",
                    })
                }
                Line::Turn(t) => turns.push(t),
                Line::Summary(_) if header.is_none() => return Err(TranscriptError::MissingHeader),
                Line::Summary(s) => summary = Some(s),
            }
        }
        let header = header.ok_or(TranscriptError::MissingHeader)?;
        Ok(Transcript { header, turns, summary })
    }

    /// Checks the recorded content hash against the header and turn lines.
    pub fn verify_hash(&self) -> Result<(), TranscriptError> {
        let expected = self.summary()?.content_hash.clone();
        let actual = self.content_hash();
        if expected == actual {
            Ok(())
        } else {
            Err(TranscriptError::HashMismatch { expected, actual })
        }
    }

    /// Re-runs the engine on the recorded decisions and compares every
    /// derived value with what was recorded.
    pub fn replay(&self) -> Result<ReplayReport, TranscriptError> {
        let setup = self.header.setup()?;
        let mut state = GameState::new(setup.game_id, setup.scenario, setup.ladder, setup.config, setup.seed);
        let scale = state.config.attrition.nuclear_fp_scale;
        let mut mismatches = Vec::new();
        for record in &self.turns {
            let turn = record.turn();
            if state.turn != turn {
                mismatches.push(format!("turn {turn}: engine expected turn {}", state.turn));
                break;
            }
            let memory_before = Side::BOTH.map(|s| state.memories.get(s).snapshot(turn));
            let forces_before = state.forces.clone();
            let outcome = state
                .resolve_turn(&record.decision(Side::A), &record.decision(Side::B))
                .map_err(|e| TranscriptError::Replay(format!("turn {turn}: {e}")))?;
            let derived = GameStateFields::from_outcome(&outcome, &forces_before, &state.forces, scale);
            if derived != record.game_state {
                mismatches.push(format!("turn {turn}: game state differs"));
            }
            let last = state.history.last().expect("turn resolved");
            for side in Side::BOTH {
                let m = last.moves.get(side);
                let a = record.action.get(side);
                if (m.chosen_value, m.executed_value, m.effective_value)
                    != (a.chosen_value, a.executed_value, a.effective_value)
                    || m.executed != a.executed_action
                {
                    mismatches.push(format!("turn {turn}: {side} action values differ"));
                }
                if m.signal_value != record.signal.get(side).signal_value {
                    mismatches.push(format!("turn {turn}: {side} signal value differs"));
                }
                let mem = record.memory.get(side);
                let snap = &memory_before[side.index()];
                if snap.records != mem.records
                    || snap.betrayals != mem.betrayals
                    || *outcome.labels.get(side.opponent()) != mem.opponent_label
                {
                    mismatches.push(format!("turn {turn}: {side} memory differs"));
                }
            }
        }
        if let Some(summary) = &self.summary {
            if summary.aborted.is_none() {
                if summary.victory != state.outcome {
                    mismatches.push(format!(
                        "victory differs: recorded {:?}, derived {:?}",
                        summary.victory, state.outcome
                    ));
                }
                if summary.final_balance != state.territory_balance {
                    mismatches.push("final balance differs".to_string());
                }
            }
        }
        Ok(ReplayReport {
            turns_checked: self.turns.len(),
            mismatches,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_turn_before_header() {
        let err = Transcript::parse("{\"type\":\"summary\"}\n").unwrap_err();
        assert!(matches!(
            err,
            TranscriptError::Json { .. } | TranscriptError::MissingHeader
        ));
        assert!(matches!(Transcript::parse(""), Err(TranscriptError::MissingHeader)));
    }

    #[test]
    fn empty_audit_is_omitted() {
        assert!(audit_is_empty(&empty_audit()));
    }
}
