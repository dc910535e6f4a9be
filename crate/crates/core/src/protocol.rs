//! The agent-facing contract.
//!
//! Each side runs three phases per turn: reflection, forecast, then a
//! decision made of a public signal and a private action. This module holds
//! the typed schema for those phases, validators for raw (JSON-shaped) agent
//! responses, the ordering guard, and the deterministic rendering of the turn
//! view an agent sees.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::GameState;
use crate::forces::{fighting_power, power_shares, AttritionConfig, ForceState};
use crate::ladder::{Ladder, LadderError};
use crate::scenarios::briefing_for;
use crate::Side;

/// Version of the response schema persisted in transcripts.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("response is not a JSON object: {0}")]
    Malformed(String),
    #[error("missing required field `{0}`")]
    MissingField(String),
    #[error("field `{0}` must be a non-empty string")]
    EmptyField(String),
    #[error("field `{field}` has invalid value {value:?}; allowed: {}", allowed.join(", "))]
    InvalidEnum {
        field: String,
        value: String,
        allowed: Vec<String>,
    },
    #[error("field `{field}`: unknown escalation option {name:?}; valid options are: {}", candidates.join(", "))]
    UnknownRung {
        field: String,
        name: String,
        candidates: Vec<String>,
    },
    #[error("phase out of order: {phase:?} submitted while expecting {expected:?}")]
    OutOfOrder { phase: Phase, expected: Phase },
    #[error("{0:?} inputs differ from the outputs validated earlier this turn")]
    InputMismatch(Phase),
}

impl ProtocolError {
    /// Whether the violation can be described back to the agent for another
    /// attempt. Ordering violations are engine bugs, not agent mistakes.
    pub fn is_retryable(&self) -> bool {
        !matches!(self, ProtocolError::OutOfOrder { .. } | ProtocolError::InputMismatch(_))
    }

    fn rung(field: &str, err: LadderError) -> ProtocolError {
        match err {
            LadderError::UnknownRung { name, candidates } => ProtocolError::UnknownRung {
                field: field.to_string(),
                name,
                candidates,
            },
            other => ProtocolError::Malformed(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Reflection,
    Forecast,
    Decision,
}

trait SchemaEnum: Sized + Copy + 'static {
    const VARIANTS: &'static [(&'static str, Self)];

    fn parse(field: &str, raw: &str) -> Result<Self, ProtocolError> {
        let norm: String = raw
            .trim()
            .to_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c })
            .collect();
        Self::VARIANTS
            .iter()
            .find(|(k, _)| *k == norm)
            .map(|(_, v)| *v)
            .ok_or_else(|| ProtocolError::InvalidEnum {
                field: field.to_string(),
                value: raw.to_string(),
                allowed: Self::VARIANTS.iter().map(|(k, _)| k.to_string()).collect(),
            })
    }

    fn allowed() -> String {
        Self::VARIANTS
            .iter()
            .map(|(k, _)| format!("\"{k}\""))
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CredibilityRating {
    HighlyCredible,
    ModeratelyCredible,
    NotCredible,
}

impl SchemaEnum for CredibilityRating {
    const VARIANTS: &'static [(&'static str, Self)] = &[
        ("highly_credible", CredibilityRating::HighlyCredible),
        ("moderately_credible", CredibilityRating::ModeratelyCredible),
        ("not_credible", CredibilityRating::NotCredible),
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    High,
    Medium,
    Low,
}

impl SchemaEnum for Confidence {
    const VARIANTS: &'static [(&'static str, Self)] = &[
        ("high", Confidence::High),
        ("medium", Confidence::Medium),
        ("low", Confidence::Low),
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiscalculationRisk {
    Low,
    Medium,
    High,
}

impl SchemaEnum for MiscalculationRisk {
    const VARIANTS: &'static [(&'static str, Self)] = &[
        ("low", MiscalculationRisk::Low),
        ("medium", MiscalculationRisk::Medium),
        ("high", MiscalculationRisk::High),
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredibilityAssessment {
    pub rating: CredibilityRating,
    pub rationale: String,
}

/// Phase 1 output: assessment without prediction or choice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionReport {
    pub opponent_immediate_credibility: CredibilityAssessment,
    pub opponent_resolve_credibility: CredibilityAssessment,
    pub self_forecasting: String,
    pub self_credibility_assessment: String,
    pub self_metacognition: String,
    pub opponent_predicts_me: String,
    pub opponent_assesses_my_credibility: String,
    pub opponent_self_awareness: String,
    pub situational_assessment: String,
}

/// Phase 2 output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Forecast {
    pub predicted_action: String,
    pub confidence: Confidence,
    pub miscalculation_risk: MiscalculationRisk,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalDecision {
    pub immediate_signal: String,
    pub conditional_signal: String,
    pub public_statement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDecision {
    pub action_choice: String,
    pub consistency_statement: String,
    pub private_rationale: String,
}

/// Phase 3 output: the public signal and the private action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub signal: SignalDecision,
    pub action: ActionDecision,
}

/// One side's complete three-phase output for a turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnDecision {
    pub reflection: ReflectionReport,
    pub forecast: Forecast,
    pub decision: Decision,
}

fn non_empty(field: &str, s: &str) -> Result<(), ProtocolError> {
    if s.trim().is_empty() {
        Err(ProtocolError::EmptyField(field.to_string()))
    } else {
        Ok(())
    }
}

fn canonical_rung(ladder: &Ladder, field: &str, name: &str) -> Result<String, ProtocolError> {
    ladder
        .rung_by_name(name)
        .map(|r| r.name.clone())
        .map_err(|e| ProtocolError::rung(field, e))
}

impl ReflectionReport {
    pub fn check(&self) -> Result<(), ProtocolError> {
        non_empty(
            "opponent_immediate_credibility.rationale",
            &self.opponent_immediate_credibility.rationale,
        )?;
        non_empty(
            "opponent_resolve_credibility.rationale",
            &self.opponent_resolve_credibility.rationale,
        )?;
        for (field, text) in [
            ("self_forecasting", &self.self_forecasting),
            ("self_credibility_assessment", &self.self_credibility_assessment),
            ("self_metacognition", &self.self_metacognition),
            ("opponent_predicts_me", &self.opponent_predicts_me),
            (
                "opponent_assesses_my_credibility",
                &self.opponent_assesses_my_credibility,
            ),
            ("opponent_self_awareness", &self.opponent_self_awareness),
            ("situational_assessment", &self.situational_assessment),
        ] {
            non_empty(field, text)?;
        }
        Ok(())
    }
}

impl Forecast {
    /// Validates and canonicalizes the predicted rung name.
    pub fn check(mut self, ladder: &Ladder) -> Result<Forecast, ProtocolError> {
        self.predicted_action = canonical_rung(ladder, "predicted_action", &self.predicted_action)?;
        non_empty("reasoning", &self.reasoning)?;
        Ok(self)
    }
}

impl Decision {
    /// Validates and canonicalizes the signal and action rung names.
    pub fn check(mut self, ladder: &Ladder) -> Result<Decision, ProtocolError> {
        self.signal.immediate_signal =
            canonical_rung(ladder, "signal.immediate_signal", &self.signal.immediate_signal)?;
        non_empty("signal.conditional_signal", &self.signal.conditional_signal)?;
        non_empty("signal.public_statement", &self.signal.public_statement)?;
        self.action.action_choice = canonical_rung(ladder, "action.action_choice", &self.action.action_choice)?;
        non_empty("action.consistency_statement", &self.action.consistency_statement)?;
        non_empty("action.private_rationale", &self.action.private_rationale)?;
        Ok(self)
    }
}

/// Pulls the JSON object out of a raw response, tolerating code fences and
/// surrounding prose.
fn parse_object(raw: &str) -> Result<Map<String, Value>, ProtocolError> {
    let start = raw.find('{');
    let end = raw.rfind('}');
    let body = match (start, end) {
        (Some(s), Some(e)) if s < e => &raw[s..=e],
        _ => return Err(ProtocolError::Malformed("no JSON object found".into())),
    };
    match serde_json::from_str::<Value>(body) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(ProtocolError::Malformed("top-level value is not an object".into())),
        Err(e) => Err(ProtocolError::Malformed(e.to_string())),
    }
}

struct Fields<'a> {
    map: &'a Map<String, Value>,
    prefix: String,
}

impl<'a> Fields<'a> {
    fn root(map: &'a Map<String, Value>) -> Self {
        Fields {
            map,
            prefix: String::new(),
        }
    }

    fn path(&self, key: &str) -> String {
        format!("{}{key}", self.prefix)
    }

    fn text(&self, key: &str) -> Result<String, ProtocolError> {
        match self.map.get(key) {
            None | Some(Value::Null) => Err(ProtocolError::MissingField(self.path(key))),
            Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.trim().to_string()),
            Some(_) => Err(ProtocolError::EmptyField(self.path(key))),
        }
    }

    fn enumeration<E: SchemaEnum>(&self, key: &str) -> Result<E, ProtocolError> {
        let raw = self.text(key)?;
        E::parse(&self.path(key), &raw)
    }

    fn object(&self, key: &str) -> Result<Fields<'a>, ProtocolError> {
        match self.map.get(key) {
            None | Some(Value::Null) => Err(ProtocolError::MissingField(self.path(key))),
            Some(Value::Object(m)) => Ok(Fields {
                map: m,
                prefix: format!("{}.", self.path(key)),
            }),
            Some(_) => Err(ProtocolError::Malformed(format!(
                "`{}` must be an object",
                self.path(key)
            ))),
        }
    }

    fn credibility(&self, key: &str) -> Result<CredibilityAssessment, ProtocolError> {
        let obj = self.object(key)?;
        Ok(CredibilityAssessment {
            rating: obj.enumeration("rating")?,
            rationale: obj.text("rationale")?,
        })
    }
}

/// Parses and schema-checks a raw reflection response.
pub fn validate_reflection(raw: &str) -> Result<ReflectionReport, ProtocolError> {
    let map = parse_object(raw)?;
    let f = Fields::root(&map);
    let report = ReflectionReport {
        opponent_immediate_credibility: f.credibility("opponent_immediate_credibility")?,
        opponent_resolve_credibility: f.credibility("opponent_resolve_credibility")?,
        self_forecasting: f.text("self_forecasting")?,
        self_credibility_assessment: f.text("self_credibility_assessment")?,
        self_metacognition: f.text("self_metacognition")?,
        opponent_predicts_me: f.text("opponent_predicts_me")?,
        opponent_assesses_my_credibility: f.text("opponent_assesses_my_credibility")?,
        opponent_self_awareness: f.text("opponent_self_awareness")?,
        situational_assessment: f.text("situational_assessment")?,
    };
    report.check()?;
    Ok(report)
}

/// Parses and schema-checks a raw forecast response.
pub fn validate_forecast(raw: &str, ladder: &Ladder) -> Result<Forecast, ProtocolError> {
    let map = parse_object(raw)?;
    let f = Fields::root(&map);
    Forecast {
        predicted_action: f.text("predicted_action")?,
        confidence: f.enumeration("confidence")?,
        miscalculation_risk: f.enumeration("miscalculation_risk")?,
        reasoning: f.text("reasoning")?,
    }
    .check(ladder)
}

/// Parses and schema-checks a raw decision response.
pub fn validate_decision(raw: &str, ladder: &Ladder) -> Result<Decision, ProtocolError> {
    let map = parse_object(raw)?;
    let f = Fields::root(&map);
    let signal = f.object("signal")?;
    let action = f.object("action")?;
    Decision {
        signal: SignalDecision {
            immediate_signal: signal.text("immediate_signal")?,
            conditional_signal: signal.text("conditional_signal")?,
            public_statement: signal.text("public_statement")?,
        },
        action: ActionDecision {
            action_choice: action.text("action_choice")?,
            consistency_statement: action.text("consistency_statement")?,
            private_rationale: action.text("private_rationale")?,
        },
    }
    .check(ladder)
}

/// Response-format instructions for one phase.
pub fn phase_instructions(phase: Phase) -> String {
    let cred = CredibilityRating::allowed();
    match phase {
        Phase::Reflection => format!(
            "PHASE 1: REFLECTION. Assess the situation. Do not predict the opponent's move and do not choose an action yet.\n\
             Respond with a single JSON object with exactly these keys:\n\
             {{\n\
             \x20 \"opponent_immediate_credibility\": {{\"rating\": {cred}, \"rationale\": \"do their signals match their actions?\"}},\n\
             \x20 \"opponent_resolve_credibility\": {{\"rating\": {cred}, \"rationale\": \"do they follow through on conditional threats?\"}},\n\
             \x20 \"self_forecasting\": \"how well do I predict opponent moves?\",\n\
             \x20 \"self_credibility_assessment\": \"how well do I judge opponent honesty?\",\n\
             \x20 \"self_metacognition\": \"how well do I reason about my own reasoning?\",\n\
             \x20 \"opponent_predicts_me\": \"how well does the opponent predict my moves?\",\n\
             \x20 \"opponent_assesses_my_credibility\": \"how well do they assess my credibility?\",\n\
             \x20 \"opponent_self_awareness\": \"how well do they reason about their own abilities?\",\n\
             \x20 \"situational_assessment\": \"overall crisis dynamics and risks\"\n\
             }}\n"
        ),
        Phase::Forecast => format!(
            "PHASE 2: FORECAST. Using your reflection, predict the opponent's action this turn.\n\
             Respond with a single JSON object with exactly these keys:\n\
             {{\n\
             \x20 \"predicted_action\": \"<exact name of one escalation option>\",\n\
             \x20 \"confidence\": {},\n\
             \x20 \"miscalculation_risk\": {},\n\
             \x20 \"reasoning\": \"explicit justification of the prediction\"\n\
             }}\n",
            Confidence::allowed(),
            MiscalculationRisk::allowed()
        ),
        Phase::Decision => "PHASE 3: DECISION. Choose your public signal and your actual action. They may differ.\n\
             Consistency statement: if you act BELOW the level you predicted for the opponent, explain why this is \
             strategically optimal given the territory balance, the military balance and the miscalculation risk; if \
             you act AT OR ABOVE it, explain your acceptance of risk given the stakes.\n\
             Respond with a single JSON object with exactly these keys:\n\
             {\n\
             \x20 \"signal\": {\"immediate_signal\": \"<exact name of one escalation option>\", \"conditional_signal\": \"strategic resolve statement\", \"public_statement\": \"concise public declaration\"},\n\
             \x20 \"action\": {\"action_choice\": \"<exact name of one escalation option>\", \"consistency_statement\": \"...\", \"private_rationale\": \"full reasoning\"}\n\
             }\n"
            .to_string(),
    }
}

/// Enforces reflection, then forecast, then decision for one
/// (game, side, turn), and keeps the validated outputs of earlier phases.
#[derive(Debug, Clone)]
pub struct PhasePipeline {
    side: Side,
    turn: u32,
    reflection: Option<ReflectionReport>,
    forecast: Option<Forecast>,
    decision: Option<Decision>,
}

impl PhasePipeline {
    pub fn new(side: Side, turn: u32) -> Self {
        PhasePipeline {
            side,
            turn,
            reflection: None,
            forecast: None,
            decision: None,
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn turn(&self) -> u32 {
        self.turn
    }

    pub fn expected(&self) -> Option<Phase> {
        match (&self.reflection, &self.forecast, &self.decision) {
            (None, _, _) => Some(Phase::Reflection),
            (Some(_), None, _) => Some(Phase::Forecast),
            (Some(_), Some(_), None) => Some(Phase::Decision),
            _ => None,
        }
    }

    fn require(&self, phase: Phase) -> Result<(), ProtocolError> {
        match self.expected() {
            Some(expected) if expected == phase => Ok(()),
            Some(expected) => Err(ProtocolError::OutOfOrder { phase, expected }),
            None => Err(ProtocolError::OutOfOrder {
                phase,
                expected: Phase::Decision,
            }),
        }
    }

    pub fn reflection(&self) -> Option<&ReflectionReport> {
        self.reflection.as_ref()
    }

    pub fn forecast(&self) -> Option<&Forecast> {
        self.forecast.as_ref()
    }

    pub fn accept_reflection(&mut self, r: ReflectionReport) -> Result<&ReflectionReport, ProtocolError> {
        self.require(Phase::Reflection)?;
        r.check()?;
        Ok(self.reflection.insert(r))
    }

    pub fn accept_forecast(&mut self, ladder: &Ladder, f: Forecast) -> Result<&Forecast, ProtocolError> {
        self.require(Phase::Forecast)?;
        let f = f.check(ladder)?;
        Ok(self.forecast.insert(f))
    }

    pub fn accept_decision(&mut self, ladder: &Ladder, d: Decision) -> Result<&Decision, ProtocolError> {
        self.require(Phase::Decision)?;
        let d = d.check(ladder)?;
        Ok(self.decision.insert(d))
    }

    /// Checks that the inputs handed to a later phase are exactly what was
    /// validated earlier this turn.
    pub fn verify_inputs(
        &self,
        phase: Phase,
        reflection: &ReflectionReport,
        forecast: Option<&Forecast>,
    ) -> Result<(), ProtocolError> {
        if self.reflection.as_ref() != Some(reflection) {
            return Err(ProtocolError::InputMismatch(phase));
        }
        if let Some(f) = forecast {
            if self.forecast.as_ref() != Some(f) {
                return Err(ProtocolError::InputMismatch(phase));
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<TurnDecision, ProtocolError> {
        match (self.reflection, self.forecast, self.decision) {
            (Some(reflection), Some(forecast), Some(decision)) => Ok(TurnDecision {
                reflection,
                forecast,
                decision,
            }),
            (None, _, _) => Err(ProtocolError::OutOfOrder {
                phase: Phase::Decision,
                expected: Phase::Reflection,
            }),
            (Some(_), None, _) => Err(ProtocolError::OutOfOrder {
                phase: Phase::Decision,
                expected: Phase::Forecast,
            }),
            (Some(_), Some(_), None) => Err(ProtocolError::OutOfOrder {
                phase: Phase::Decision,
                expected: Phase::Decision,
            }),
        }
    }
}

/// SHA-256 of a value's JSON serialization, hex encoded.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("schema types always serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// One revealed past turn as shown to a side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub turn: u32,
    pub own_signal: String,
    pub own_action: String,
    /// Set only when an accident escalated this side's chosen action.
    pub own_chosen: Option<String>,
    pub opponent_signal: String,
    pub opponent_action: String,
    pub opponent_public_statement: String,
    pub opponent_conditional_signal: String,
    /// Territory balance after the turn, from this side's perspective.
    pub balance_after: f64,
}

/// An escalation option as presented to agents: no numeric value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionEntry {
    pub name: String,
    pub description: String,
}

/// Everything a side may know at the start of a turn.
///
/// Built from the state before the turn is resolved, so it cannot carry the
/// opponent's current-turn choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnView {
    pub side: Side,
    pub turn: u32,
    pub max_turns: u32,
    pub deadline: Option<u32>,
    pub briefing: String,
    /// Positive favors this side.
    pub territory_balance: f64,
    pub military_panel: String,
    pub memory_panels: String,
    pub accident_notice: Option<String>,
    pub history: Vec<HistoryEntry>,
    pub options: Vec<OptionEntry>,
}

impl TurnView {
    pub fn last_opponent_action(&self) -> Option<&str> {
        self.history.last().map(|h| h.opponent_action.as_str())
    }

    pub fn last_own_action(&self) -> Option<&str> {
        self.history.last().map(|h| h.own_action.as_str())
    }

    pub fn turn_header(&self) -> String {
        let mut out = format!("{}: Turn {} of {}\n", self.side.state_name(), self.turn, self.max_turns);
        match self.deadline {
            Some(limit) => {
                let remaining = limit.saturating_sub(self.turn);
                out.push_str(&format!(
                    "Deadline: the crisis is decided by territorial control when the {limit}-turn deadline expires at the end of turn {limit}.\n"
                ));
                if remaining == 0 {
                    out.push_str(&format!(
                        "FINAL TURN WARNING: the {limit}-turn deadline expires at the end of this turn.\n"
                    ));
                } else if remaining == 1 {
                    out.push_str(&format!(
                        "FINAL TURN WARNING: only this turn and turn {limit} remain before the {limit}-turn deadline expires.\n"
                    ));
                }
            }
            None => out.push_str(&format!(
                "There is no scenario deadline; the game ends after turn {} at the latest.\n",
                self.max_turns
            )),
        }
        out
    }

    /// Deterministic text rendering used as the agent prompt body.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("=== {} ===\n", self.turn_header().trim_end()));
        out.push_str("\n== Scenario Briefing ==\n");
        out.push_str(&self.briefing);
        out.push_str("\n== Territorial Situation ==\n");
        out.push_str(&format!(
            "Territory balance: {:+.2} (positive favors you; a balance of 5.00 either way ends the crisis)\n",
            self.territory_balance
        ));
        out.push_str("\n== Military Balance Assessment ==\n");
        out.push_str(&self.military_panel);
        out.push('\n');
        out.push_str(&self.memory_panels);
        if let Some(notice) = &self.accident_notice {
            out.push_str("\n== Accident Notice (known only to you) ==\n");
            out.push_str(notice);
            out.push('\n');
        }
        out.push_str("\n== Crisis History ==\n");
        if self.history.is_empty() {
            out.push_str("No turns have been played yet.\n");
        }
        for h in &self.history {
            out.push_str(&format!(
                "Turn {}: you signaled \"{}\" and executed \"{}\"",
                h.turn, h.own_signal, h.own_action
            ));
            if let Some(chosen) = &h.own_chosen {
                out.push_str(&format!(" (you had chosen \"{chosen}\")"));
            }
            out.push_str(&format!(
                "; opponent signaled \"{}\" and executed \"{}\". Opponent public statement: \"{}\". Opponent conditional signal: \"{}\". Territory after turn: {:+.2}.\n",
                h.opponent_signal,
                h.opponent_action,
                h.opponent_public_statement,
                h.opponent_conditional_signal,
                h.balance_after
            ));
        }
        out.push_str("\n== Escalation Options (ordered from least to most escalatory) ==\n");
        for o in &self.options {
            out.push_str(&format!("- {}: {}\n", o.name, o.description));
        }
        out
    }
}

/// Shares rendered as "Superiority"/"Inferiority"/"Parity" lines.
pub fn render_share_lines(conventional_share: f64, nuclear_share: f64) -> String {
    let line = |axis: &str, share: f64| {
        let pct = share * 100.0;
        if (share - 0.5).abs() < 0.005 {
            format!(
                "{axis} Parity: You hold {pct:.0}% of total {} power\n",
                axis.to_lowercase()
            )
        } else if share < 0.5 {
            format!(
                "{axis} Inferiority: You have only {pct:.0}% of total {} power\n",
                axis.to_lowercase()
            )
        } else {
            format!(
                "{axis} Superiority: You control {pct:.0}% of total {} power\n",
                axis.to_lowercase()
            )
        }
    };
    let mut out = String::from("Relative Strength Assessment:\n  ");
    out.push_str(&line("Conventional", conventional_share));
    out.push_str("  ");
    out.push_str(&line("Nuclear", nuclear_share));
    out
}

pub fn render_military_panel(own: &ForceState, opp: &ForceState, cfg: &AttritionConfig) -> String {
    let fo = fighting_power(own, cfg.nuclear_fp_scale);
    let fp = fighting_power(opp, cfg.nuclear_fp_scale);
    let (conv, nuc) = power_shares(&fo, &fp);
    let forces = |f: &ForceState, p: &crate::forces::FightingPower| {
        format!(
            "  Conventional: {:.0}% effectiveness -> Fighting Power: {:.2}\n  Nuclear: {:.0}% readiness -> Fighting Power: {:.2}\n",
            f.conventional_effectiveness * 100.0,
            p.conventional,
            f.nuclear_readiness * 100.0,
            p.nuclear
        )
    };
    let mut out = String::from("Your Forces:\n");
    out.push_str(&forces(own, &fo));
    out.push_str("Opponent Forces (Intelligence Assessment):\n");
    out.push_str(&forces(opp, &fp));
    out.push_str(&render_share_lines(conv, nuc));
    out
}

/// Assembles the view `side` sees at the start of the current turn.
pub fn render_turn_view(state: &GameState, side: Side) -> TurnView {
    let opp = side.opponent();
    let history = state
        .history
        .iter()
        .map(|t| {
            let own = t.moves.get(side);
            let theirs = t.moves.get(opp);
            HistoryEntry {
                turn: t.turn,
                own_signal: own.signal.clone(),
                own_action: own.executed.clone(),
                own_chosen: own.accident.as_ref().map(|_| own.chosen.clone()),
                opponent_signal: theirs.signal.clone(),
                opponent_action: theirs.executed.clone(),
                opponent_public_statement: theirs.public_statement.clone(),
                opponent_conditional_signal: theirs.conditional_signal.clone(),
                balance_after: t.balance_after * side.sign(),
            }
        })
        .collect();

    let accident_notice = state.history.last().and_then(|t| {
        let own = t.moves.get(side);
        own.accident.as_ref().map(|acc| {
            format!(
                "On turn {} you chose \"{}\", but an accident involuntarily escalated it by {} rung(s) to \"{}\". \
                 Your opponent saw only \"{}\" and does not know it was unintended.",
                t.turn, own.chosen, acc.rungs, own.executed, own.executed
            )
        })
    });

    TurnView {
        side,
        turn: state.turn,
        max_turns: state.max_turns(),
        deadline: state.scenario.time_limit,
        briefing: briefing_for(&state.scenario, side),
        territory_balance: state.territory_balance * side.sign(),
        military_panel: render_military_panel(state.forces.get(side), state.forces.get(opp), &state.config.attrition),
        memory_panels: state.memories.get(side).render_panels(state.turn),
        accident_notice,
        history,
        options: state
            .ladder
            .rungs()
            .iter()
            .map(|r| OptionEntry {
                name: r.name.clone(),
                description: r.description.clone(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reflection_json() -> Value {
        serde_json::json!({
            "opponent_immediate_credibility": {"rating": "highly_credible", "rationale": "signals matched"},
            "opponent_resolve_credibility": {"rating": "Moderately Credible", "rationale": "untested"},
            "self_forecasting": "adequate",
            "self_credibility_assessment": "adequate",
            "self_metacognition": "adequate",
            "opponent_predicts_me": "partially",
            "opponent_assesses_my_credibility": "cautiously",
            "opponent_self_awareness": "limited",
            "situational_assessment": "tense but stable"
        })
    }

    fn decision_json() -> Value {
        serde_json::json!({
            "signal": {
                "immediate_signal": "Nuclear Posturing",
                "conditional_signal": "Any advance will be met with force",
                "public_statement": "We stand firm"
            },
            "action": {
                "action_choice": "strategic nuclear threat",
                "consistency_statement": "Acting above forecast; stakes justify the risk",
                "private_rationale": "Coerce withdrawal"
            }
        })
    }

    #[test]
    fn reflection_parses_with_lenient_enums() {
        let raw = format!("```json\n{}\n```", reflection_json());
        let r = validate_reflection(&raw).unwrap();
        assert_eq!(
            r.opponent_immediate_credibility.rating,
            CredibilityRating::HighlyCredible
        );
        assert_eq!(
            r.opponent_resolve_credibility.rating,
            CredibilityRating::ModeratelyCredible
        );
    }

    #[test]
    fn reflection_missing_field() {
        let mut v = reflection_json();
        v.as_object_mut().unwrap().remove("situational_assessment");
        assert_eq!(
            validate_reflection(&v.to_string()),
            Err(ProtocolError::MissingField("situational_assessment".into()))
        );
        let mut v = reflection_json();
        v["opponent_resolve_credibility"]["rating"] = "very".into();
        assert!(matches!(
            validate_reflection(&v.to_string()),
            Err(ProtocolError::InvalidEnum { .. })
        ));
    }

    #[test]
    fn forecast_parses_and_canonicalizes() {
        let raw = r#"{"predicted_action": "limited nuclear use", "confidence": "High", "miscalculation_risk": "medium", "reasoning": "pattern"}"#;
        let f = validate_forecast(raw, &Ladder::canonical()).unwrap();
        assert_eq!(f.predicted_action, "Limited Nuclear Use");
        assert_eq!(f.miscalculation_risk, MiscalculationRisk::Medium);
    }

    #[test]
    fn decision_examples() {
        let ladder = Ladder::canonical();
        let d = validate_decision(&decision_json().to_string(), &ladder).unwrap();
        assert_eq!(d.action.action_choice, "Strategic Nuclear Threat");

        let mut v = decision_json();
        v["action"].as_object_mut().unwrap().remove("consistency_statement");
        assert_eq!(
            validate_decision(&v.to_string(), &ladder),
            Err(ProtocolError::MissingField("action.consistency_statement".into()))
        );

        let mut v = decision_json();
        v["action"]["action_choice"] = "Nuclear Posture".into();
        let err = validate_decision(&v.to_string(), &ladder).unwrap_err();
        assert!(err.is_retryable());
        match err {
            ProtocolError::UnknownRung { field, candidates, .. } => {
                assert_eq!(field, "action.action_choice");
                assert!(candidates.contains(&"Nuclear Posturing".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn garbage_is_malformed() {
        assert!(matches!(
            validate_forecast("I choose war", &Ladder::canonical()),
            Err(ProtocolError::Malformed(_))
        ));
        assert!(matches!(
            validate_decision("[1, 2]", &Ladder::canonical()),
            Err(ProtocolError::Malformed(_))
        ));
    }

    #[test]
    fn pipeline_enforces_order() {
        let ladder = Ladder::canonical();
        let reflection = validate_reflection(&reflection_json().to_string()).unwrap();
        let forecast = Forecast {
            predicted_action: "Return to Start Line".into(),
            confidence: Confidence::Low,
            miscalculation_risk: MiscalculationRisk::Low,
            reasoning: "quiet".into(),
        };
        let decision = validate_decision(&decision_json().to_string(), &ladder).unwrap();

        let mut p = PhasePipeline::new(Side::A, 1);
        assert_eq!(
            p.accept_decision(&ladder, decision.clone()).unwrap_err(),
            ProtocolError::OutOfOrder {
                phase: Phase::Decision,
                expected: Phase::Reflection
            }
        );
        p.accept_reflection(reflection.clone()).unwrap();
        assert_eq!(
            p.accept_decision(&ladder, decision.clone()).unwrap_err(),
            ProtocolError::OutOfOrder {
                phase: Phase::Decision,
                expected: Phase::Forecast
            }
        );
        p.accept_forecast(&ladder, forecast.clone()).unwrap();
        p.verify_inputs(Phase::Decision, &reflection, Some(&forecast)).unwrap();
        let mut other = forecast.clone();
        other.reasoning = "changed".into();
        assert_eq!(
            p.verify_inputs(Phase::Decision, &reflection, Some(&other)),
            Err(ProtocolError::InputMismatch(Phase::Decision))
        );
        p.accept_decision(&ladder, decision).unwrap();
        assert!(p.accept_reflection(reflection).is_err());
        p.finish().unwrap();
    }

    #[test]
    fn share_lines() {
        let text = render_share_lines(0.393, 0.571);
        assert!(text.contains("Conventional Inferiority: You have only 39% of total conventional power"));
        assert!(text.contains("Nuclear Superiority: You control 57% of total nuclear power"));
        assert!(render_share_lines(0.5, 0.5).contains("Conventional Parity"));
    }

    #[test]
    fn instructions_name_every_field() {
        let r = phase_instructions(Phase::Reflection);
        for key in reflection_json().as_object().unwrap().keys() {
            assert!(r.contains(key.as_str()), "{key}");
        }
        assert!(phase_instructions(Phase::Forecast).contains("miscalculation_risk"));
        assert!(phase_instructions(Phase::Decision).contains("consistency_statement"));
    }

    #[test]
    fn content_hash_is_stable() {
        let h1 = content_hash(&reflection_json());
        let h2 = content_hash(&reflection_json());
        assert_eq!(h1, h2);
        assert_eq!(h1.len(), 64);
    }
}
