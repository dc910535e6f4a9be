//! Game state machine: simultaneous turn resolution, accidents, territory
//! dynamics and victory detection.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::debug;

use crate::agents::{Agent, AgentAudit, AgentError};
use crate::forces::{apply_attrition, AttritionConfig, AttritionReport, ForceState};
use crate::ladder::{
    classify, effective_value, keeps_gate_open, opens_gate, Ladder, LadderRung, ThresholdClass, SIGNALING_THRESHOLD,
    STATUS_QUO, STRATEGIC_WAR, SURRENDER,
};
use crate::memory::{render_betrayal_panel, render_decision_panel, DecisionLabel, MemoryError, OpponentMemory};
use crate::protocol::{
    content_hash, render_turn_view, ActionDecision, Confidence, CredibilityAssessment, CredibilityRating, Decision,
    Forecast, MiscalculationRisk, PhasePipeline, ProtocolError, ReflectionReport, SignalDecision, TurnDecision,
    TurnView,
};
use crate::scenarios::ScenarioSpec;
use crate::transcript::{
    ActionFields, Anomaly, ForecastFields, GameStateFields, MemoryFields, ReflectionFields, SignalFields, Summary,
    Transcript, TranscriptHeader, TranscriptSink, TurnRecord,
};
use crate::{PerSide, Side};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("game is already over ({0:?})")]
    GameOver(VictoryResult),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("invalid engine config: {0}")]
    Config(String),
    #[error("transcript I/O failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AccidentConfig {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
    /// Accidents escalate by a uniform draw from `1..=max_rungs`.
    pub max_rungs: u32,
}

impl Default for AccidentConfig {
    fn default() -> Self {
        AccidentConfig {
            low: 0.05,
            medium: 0.10,
            high: 0.15,
            max_rungs: 3,
        }
    }
}

impl AccidentConfig {
    pub fn probability(&self, risk: MiscalculationRisk) -> f64 {
        match risk {
            MiscalculationRisk::Low => self.low,
            MiscalculationRisk::Medium => self.medium,
            MiscalculationRisk::High => self.high,
        }
    }
}

/// What to do when an agent cannot produce a valid turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackPolicy {
    /// End the game and record the anomaly.
    Abort,
    /// Repeat the side's previous executed action as signal and action,
    /// flagged in the transcript.
    RepeatPrevious,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Territory points per full-ladder (1000-point) effective gap.
    pub territory_rate: f64,
    pub asym_multiplier: f64,
    pub knockout_threshold: f64,
    pub attrition: AttritionConfig,
    pub accidents: AccidentConfig,
    pub max_retries: u32,
    pub fallback: FallbackPolicy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            territory_rate: 9.0,
            asym_multiplier: 1.25,
            knockout_threshold: 5.0,
            attrition: AttritionConfig::default(),
            accidents: AccidentConfig::default(),
            max_retries: 3,
            fallback: FallbackPolicy::Abort,
            seed: None,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if !(self.territory_rate.is_finite() && self.territory_rate > 0.0) {
            return bad("territory_rate must be positive");
        }
        if !(self.asym_multiplier.is_finite() && self.asym_multiplier >= 1.0) {
            return bad("asym_multiplier must be >= 1");
        }
        if !(self.knockout_threshold.is_finite() && self.knockout_threshold > 0.0) {
            return bad("knockout_threshold must be positive");
        }
        for p in [self.accidents.low, self.accidents.medium, self.accidents.high] {
            if !(0.0..=1.0).contains(&p) {
                return bad("accident probabilities must lie in [0, 1]");
            }
        }
        if self.accidents.max_rungs == 0 {
            return bad("accidents.max_rungs must be at least 1");
        }
        let a = &self.attrition;
        if !(a.capability_min > 0.0 && a.capability_min <= a.capability_max) {
            return bad("attrition capability bounds must satisfy 0 < min <= max");
        }
        for m in [a.conventional, a.tactical, a.limited, a.strategic] {
            if m.conventional < 0.0 || m.nuclear < 0.0 {
                return bad("attrition multipliers must be non-negative");
            }
        }
        if a.nuclear_fp_scale <= 0.0 {
            return bad("attrition.nuclear_fp_scale must be positive");
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<EngineConfig, EngineError> {
        let cfg: EngineConfig = serde_json::from_str(json).map_err(|e| EngineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<EngineConfig, EngineError> {
        let text = std::fs::read_to_string(path)?;
        EngineConfig::from_json(&text)
    }
}

/// An involuntary escalation of a chosen action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accident {
    pub original: i32,
    pub escalated: i32,
    pub rungs: u32,
}

/// Rolls for an accident on a chosen action.
///
/// Always consumes exactly two draws (the accident gate, then the rung count)
/// so the stream position never depends on the actions chosen. Actions below
/// the signaling threshold never escalate.
pub fn accident_roll<R: Rng + ?Sized>(
    ladder: &Ladder,
    chosen: i32,
    risk: MiscalculationRisk,
    cfg: &AccidentConfig,
    rng: &mut R,
) -> (i32, Option<Accident>) {
    let gate: f64 = rng.gen();
    let rungs: u32 = rng.gen_range(1..=cfg.max_rungs);
    if chosen < SIGNALING_THRESHOLD || gate >= cfg.probability(risk) {
        return (chosen, None);
    }
    let escalated = ladder.escalate_rungs(chosen, rungs as usize);
    if escalated == chosen {
        (chosen, None)
    } else {
        (
            escalated,
            Some(Accident {
                original: chosen,
                escalated,
                rungs,
            }),
        )
    }
}

/// Asymmetry multiplier: applies when exactly one side is at tactical use or
/// above while the other stays below the firebreak.
pub fn asymmetry(class_a: ThresholdClass, class_b: ThresholdClass, multiplier: f64) -> f64 {
    let nuc_a = class_a >= ThresholdClass::TacticalUse;
    let nuc_b = class_b >= ThresholdClass::TacticalUse;
    if nuc_a != nuc_b {
        multiplier
    } else {
        1.0
    }
}

/// Territory change in A's favor for one turn of effective actions.
pub fn territory_delta(
    eff_a: i32,
    eff_b: i32,
    class_a: ThresholdClass,
    class_b: ThresholdClass,
    cfg: &EngineConfig,
) -> f64 {
    let asym = asymmetry(class_a, class_b, cfg.asym_multiplier);
    cfg.territory_rate * (eff_a - eff_b) as f64 / 1000.0 * asym
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VictoryKind {
    Knockout,
    Surrender,
    Mad,
    DeadlinePoints,
    TurnLimitPoints,
    Draw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VictoryResult {
    pub kind: VictoryKind,
    pub winner: Option<Side>,
}

/// One side's move as revealed after resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevealedMove {
    pub signal: String,
    pub chosen: String,
    pub executed: String,
    pub signal_value: i32,
    pub chosen_value: i32,
    pub executed_value: i32,
    pub effective_value: i32,
    pub public_statement: String,
    pub conditional_signal: String,
    /// Private to the acting side.
    pub accident: Option<Accident>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedTurn {
    pub turn: u32,
    pub moves: PerSide<RevealedMove>,
    pub balance_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnOutcome {
    pub turn: u32,
    pub executed: PerSide<i32>,
    pub effective: PerSide<i32>,
    pub accidents: PerSide<Option<Accident>>,
    /// Gate status after this turn.
    pub gate_open: bool,
    pub balance_before: f64,
    pub territory_delta: f64,
    pub asym_multiplier: f64,
    pub balance_after: f64,
    pub attrition: AttritionReport,
    /// How each side's move was labeled in its opponent's memory.
    pub labels: PerSide<DecisionLabel>,
    pub victory: Option<VictoryResult>,
}

#[derive(Debug, Clone)]
pub struct GameState {
    pub game_id: String,
    /// Number of the turn about to be played, starting at 1.
    pub turn: u32,
    /// Positive favors A.
    pub territory_balance: f64,
    pub forces: PerSide<ForceState>,
    /// Opens once any executed action reaches the firebreak; never closes.
    pub gate_open: bool,
    pub history: Vec<ResolvedTurn>,
    /// Memory held by each side about its opponent.
    pub memories: PerSide<OpponentMemory>,
    pub scenario: ScenarioSpec,
    pub rng_seed: u64,
    pub ladder: Arc<Ladder>,
    pub config: EngineConfig,
    pub outcome: Option<VictoryResult>,
    rng: ChaCha8Rng,
}

impl GameState {
    pub fn new(
        game_id: impl Into<String>,
        scenario: ScenarioSpec,
        ladder: Arc<Ladder>,
        config: EngineConfig,
        seed: u64,
    ) -> Self {
        GameState {
            game_id: game_id.into(),
            turn: 1,
            territory_balance: scenario.starting_balance,
            forces: PerSide::new(ForceState::alpha(), ForceState::beta()),
            gate_open: false,
            history: Vec::new(),
            memories: PerSide::new(OpponentMemory::new(), OpponentMemory::new()),
            scenario,
            rng_seed: seed,
            ladder,
            config,
            outcome: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn max_turns(&self) -> u32 {
        self.scenario.max_turns()
    }

    pub fn is_over(&self) -> bool {
        self.outcome.is_some()
    }

    fn rung(&self, name: &str, field: &str) -> Result<LadderRung, ProtocolError> {
        self.ladder.rung_by_name(name).cloned().map_err(|e| match e {
            crate::ladder::LadderError::UnknownRung { name, candidates } => ProtocolError::UnknownRung {
                field: field.to_string(),
                name,
                candidates,
            },
            other => ProtocolError::Malformed(other.to_string()),
        })
    }

    fn check_victory(&self, executed: &PerSide<i32>) -> Option<VictoryResult> {
        let surrender_a = executed.a == SURRENDER;
        let surrender_b = executed.b == SURRENDER;
        let balance = self.territory_balance;
        let by_sign = || {
            if balance > 0.0 {
                Some(Side::A)
            } else if balance < 0.0 {
                Some(Side::B)
            } else {
                None
            }
        };
        let result = |kind, winner| Some(VictoryResult { kind, winner });
        if surrender_a && surrender_b {
            result(VictoryKind::Draw, None)
        } else if surrender_a {
            result(VictoryKind::Surrender, Some(Side::B))
        } else if surrender_b {
            result(VictoryKind::Surrender, Some(Side::A))
        } else if executed.a == STRATEGIC_WAR && executed.b == STRATEGIC_WAR {
            result(VictoryKind::Mad, None)
        } else if balance.abs() >= self.config.knockout_threshold {
            result(VictoryKind::Knockout, by_sign())
        } else if self.turn >= self.max_turns() {
            let kind = if self.scenario.has_deadline() {
                VictoryKind::DeadlinePoints
            } else {
                VictoryKind::TurnLimitPoints
            };
            result(kind, by_sign())
        } else {
            None
        }
    }

    /// Resolves one simultaneous turn from both sides' validated decisions.
    ///
    /// Order: accident rolls (A, then B), gating on executed values, territory,
    /// attrition on effective values, victory check, then history and memory.
    pub fn resolve_turn(
        &mut self,
        decision_a: &TurnDecision,
        decision_b: &TurnDecision,
    ) -> Result<TurnOutcome, EngineError> {
        if let Some(v) = self.outcome {
            return Err(EngineError::GameOver(v));
        }
        let decisions = PerSide::new(decision_a, decision_b);
        let mut signals = Vec::with_capacity(2);
        let mut chosen = Vec::with_capacity(2);
        for side in Side::BOTH {
            let d = &decisions.get(side).decision;
            signals.push(self.rung(&d.signal.immediate_signal, "signal.immediate_signal")?);
            chosen.push(self.rung(&d.action.action_choice, "action.action_choice")?);
        }

        let mut executed = PerSide::new(0, 0);
        let mut accidents = PerSide::new(None, None);
        for side in Side::BOTH {
            let risk = decisions.get(side).forecast.miscalculation_risk;
            let (value, accident) = accident_roll(
                &self.ladder,
                chosen[side.index()].value,
                risk,
                &self.config.accidents,
                &mut self.rng,
            );
            *executed.get_mut(side) = value;
            *accidents.get_mut(side) = accident;
        }

        // tactical use lifts gating in the same turn; a strategic threat only
        // for later turns, so it is still reduced on the turn it is made
        let open_now = self.gate_open || opens_gate(executed.a) || opens_gate(executed.b);
        let effective = executed.map(|_, v| effective_value(*v, open_now));
        self.gate_open = open_now || keeps_gate_open(executed.a) || keeps_gate_open(executed.b);

        let (class_a, class_b) = (classify(effective.a), classify(effective.b));
        let asym = asymmetry(class_a, class_b, self.config.asym_multiplier);
        let delta = territory_delta(effective.a, effective.b, class_a, class_b, &self.config);
        let balance_before = self.territory_balance;
        self.territory_balance += delta;

        let (fa, fb, attrition) = apply_attrition(
            &self.forces.a,
            &self.forces.b,
            effective.a,
            effective.b,
            &self.config.attrition,
        );
        self.forces = PerSide::new(fa, fb);

        let victory = self.check_victory(&executed);

        let mut moves = Vec::with_capacity(2);
        let mut labels = PerSide::new(DecisionLabel::Matched, DecisionLabel::Matched);
        for side in Side::BOTH {
            let exec_rung = self
                .ladder
                .rung_by_value(*executed.get(side))
                .cloned()
                .expect("executed values are always ladder rungs");
            let signal = &signals[side.index()];
            // the opponent remembers what was executed, never the accident
            *labels.get_mut(side) =
                self.memories
                    .get_mut(side.opponent())
                    .record_turn(&self.ladder, self.turn, signal, &exec_rung)?;
            let d = &decisions.get(side).decision;
            moves.push(RevealedMove {
                signal: signal.name.clone(),
                chosen: chosen[side.index()].name.clone(),
                executed: exec_rung.name.clone(),
                signal_value: signal.value,
                chosen_value: chosen[side.index()].value,
                executed_value: exec_rung.value,
                effective_value: *effective.get(side),
                public_statement: d.signal.public_statement.clone(),
                conditional_signal: d.signal.conditional_signal.clone(),
                accident: *accidents.get(side),
            });
        }
        let move_b = moves.pop().expect("two moves");
        let move_a = moves.pop().expect("two moves");
        self.history.push(ResolvedTurn {
            turn: self.turn,
            moves: PerSide::new(move_a, move_b),
            balance_after: self.territory_balance,
        });

        let outcome = TurnOutcome {
            turn: self.turn,
            executed,
            effective,
            accidents,
            gate_open: self.gate_open,
            balance_before,
            territory_delta: delta,
            asym_multiplier: asym,
            balance_after: self.territory_balance,
            attrition,
            labels,
            victory,
        };
        debug!(game = %self.game_id, turn = self.turn, balance = self.territory_balance, "turn resolved");
        self.outcome = victory;
        if victory.is_none() {
            self.turn += 1;
        }
        Ok(outcome)
    }
}

/// Fixed parameters of one game.
#[derive(Debug, Clone)]
pub struct GameSetup {
    pub game_id: String,
    pub scenario: ScenarioSpec,
    pub seed: u64,
    pub config: EngineConfig,
    pub ladder: Arc<Ladder>,
}

impl GameSetup {
    pub fn new(game_id: impl Into<String>, scenario: ScenarioSpec, seed: u64) -> Self {
        GameSetup {
            game_id: game_id.into(),
            scenario,
            seed,
            config: EngineConfig::default(),
            ladder: Ladder::canonical(),
        }
    }

    pub fn with_config(mut self, config: EngineConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_ladder(mut self, ladder: Arc<Ladder>) -> Self {
        self.ladder = ladder;
        self
    }
}

/// Everything one side produced while playing a turn.
struct SideTurn {
    view_hash: String,
    result: Result<TurnDecision, AgentError>,
    audit: AgentAudit,
}

fn play_phases(agent: &mut dyn Agent, view: &TurnView, ladder: &Ladder) -> Result<TurnDecision, AgentError> {
    let mut pipeline = PhasePipeline::new(view.side, view.turn);
    let reflection = agent.reflect(view)?;
    let reflection = pipeline.accept_reflection(reflection)?.clone();
    let forecast = agent.forecast(view, &reflection)?;
    let forecast = pipeline.accept_forecast(ladder, forecast)?.clone();
    let decision = agent.decide(view, &reflection, &forecast)?;
    pipeline.accept_decision(ladder, decision)?;
    Ok(pipeline.finish()?)
}

fn play_side(agent: &mut dyn Agent, view: &TurnView, ladder: &Ladder) -> SideTurn {
    let result = play_phases(agent, view, ladder);
    SideTurn {
        view_hash: content_hash(&view.render()),
        result,
        audit: agent.take_audit(),
    }
}

/// Substitute turn for a side whose agent failed: repeat its previous
/// executed action as both signal and action.
fn fallback_decision(state: &GameState, side: Side, error: &AgentError) -> TurnDecision {
    let status_quo = state
        .ladder
        .rung_by_value(STATUS_QUO)
        .map(|r| r.name.clone())
        .unwrap_or_else(|| state.ladder.rungs()[0].name.clone());
    let previous = state
        .history
        .last()
        .map(|t| t.moves.get(side).executed.clone())
        .unwrap_or_else(|| status_quo.clone());
    let predicted = state
        .history
        .last()
        .map(|t| t.moves.get(side.opponent()).executed.clone())
        .unwrap_or(status_quo);
    let note = format!("engine fallback after agent failure: {error}");
    let assess = CredibilityAssessment {
        rating: CredibilityRating::ModeratelyCredible,
        rationale: note.clone(),
    };
    TurnDecision {
        reflection: ReflectionReport {
            opponent_immediate_credibility: assess.clone(),
            opponent_resolve_credibility: assess,
            self_forecasting: note.clone(),
            self_credibility_assessment: note.clone(),
            self_metacognition: note.clone(),
            opponent_predicts_me: note.clone(),
            opponent_assesses_my_credibility: note.clone(),
            opponent_self_awareness: note.clone(),
            situational_assessment: note.clone(),
        },
        forecast: Forecast {
            predicted_action: predicted,
            confidence: Confidence::Low,
            miscalculation_risk: MiscalculationRisk::Low,
            reasoning: note.clone(),
        },
        decision: Decision {
            signal: SignalDecision {
                immediate_signal: previous.clone(),
                conditional_signal: note.clone(),
                public_statement: note.clone(),
            },
            action: ActionDecision {
                action_choice: previous,
                consistency_statement: note.clone(),
                private_rationale: note,
            },
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn build_record(
    state_before: &GameState,
    views: &PerSide<TurnView>,
    sides: &PerSide<SideTurn>,
    decisions: &PerSide<TurnDecision>,
    outcome: &TurnOutcome,
    agent_names: &PerSide<String>,
    state_after: &GameState,
    anomalies: Vec<String>,
) -> TurnRecord {
    let scale = state_before.config.attrition.nuclear_fp_scale;
    let turn = outcome.turn;
    let last = state_after.history.last().expect("turn just resolved");

    TurnRecord {
        reflection: decisions.map(|side, d| {
            let r = &d.reflection;
            ReflectionFields {
                agent: agent_names.get(side).clone(),
                view_hash: sides.get(side).view_hash.clone(),
                balance_seen: views.get(side).territory_balance,
                immediate_rating: r.opponent_immediate_credibility.rating,
                immediate_rationale: r.opponent_immediate_credibility.rationale.clone(),
                resolve_rating: r.opponent_resolve_credibility.rating,
                resolve_rationale: r.opponent_resolve_credibility.rationale.clone(),
                self_forecasting: r.self_forecasting.clone(),
                self_credibility_assessment: r.self_credibility_assessment.clone(),
                self_metacognition: r.self_metacognition.clone(),
                opponent_predicts_me: r.opponent_predicts_me.clone(),
                opponent_assesses_my_credibility: r.opponent_assesses_my_credibility.clone(),
                opponent_self_awareness: r.opponent_self_awareness.clone(),
                situational_assessment: r.situational_assessment.clone(),
                reflection_hash: content_hash(r),
                attempts: sides.get(side).audit.attempts,
            }
        }),
        forecast: decisions.map(|_, d| ForecastFields {
            predicted_action: d.forecast.predicted_action.clone(),
            confidence: d.forecast.confidence,
            miscalculation_risk: d.forecast.miscalculation_risk,
            reasoning: d.forecast.reasoning.clone(),
        }),
        signal: decisions.map(|side, d| SignalFields {
            immediate_signal: d.decision.signal.immediate_signal.clone(),
            signal_value: last.moves.get(side).signal_value,
            conditional_signal: d.decision.signal.conditional_signal.clone(),
            public_statement: d.decision.signal.public_statement.clone(),
        }),
        action: decisions.map(|side, d| {
            let m = last.moves.get(side);
            ActionFields {
                action_choice: d.decision.action.action_choice.clone(),
                chosen_value: m.chosen_value,
                executed_action: m.executed.clone(),
                executed_value: m.executed_value,
                effective_value: m.effective_value,
                consistency_statement: d.decision.action.consistency_statement.clone(),
                private_rationale: d.decision.action.private_rationale.clone(),
                decision_inputs_hash: content_hash(&(&d.reflection, &d.forecast)),
            }
        }),
        memory: Side::BOTH
            .map(|side| {
                let snap = state_before.memories.get(side).snapshot(turn);
                MemoryFields {
                    decision_panel: render_decision_panel(&snap),
                    betrayal_panel: render_betrayal_panel(&snap),
                    betrayal_count: snap.betrayals.len() as u32,
                    records: snap.records,
                    betrayals: snap.betrayals,
                    opponent_label: *outcome.labels.get(side.opponent()),
                }
            })
            .into(),
        game_state: GameStateFields::from_outcome(outcome, &state_before.forces, &state_after.forces, scale),
        anomalies,
        audit: sides.map(|_, s| s.audit.exchanges.clone()),
    }
}

/// Plays a full game and streams its transcript into `sink`.
///
/// Both sides' phase pipelines run concurrently against immutable views of
/// the state before the turn; resolution is serialized. An agent failure is
/// handled by the configured fallback policy and never surfaces as an error.
pub fn run_game(
    agent_a: &mut dyn Agent,
    agent_b: &mut dyn Agent,
    setup: &GameSetup,
    sink: &mut dyn TranscriptSink,
) -> Result<Transcript, EngineError> {
    setup.config.validate()?;
    let mut state = GameState::new(
        setup.game_id.clone(),
        setup.scenario.clone(),
        setup.ladder.clone(),
        setup.config.clone(),
        setup.seed,
    );
    let agent_names = PerSide::new(agent_a.name().to_string(), agent_b.name().to_string());
    let header = TranscriptHeader::new(setup, agent_names.clone());
    let mut transcript = Transcript::begin(header);
    sink.write_header(&transcript.header)?;

    let mut aborted = None;
    let mut anomaly_count = 0u32;
    while !state.is_over() {
        let views = PerSide::new(render_turn_view(&state, Side::A), render_turn_view(&state, Side::B));
        let ladder = state.ladder.clone();
        let (side_a, side_b) = std::thread::scope(|s| {
            let handle = s.spawn(|| play_side(&mut *agent_b, &views.b, &ladder));
            let a = play_side(&mut *agent_a, &views.a, &ladder);
            (a, handle.join().expect("agent thread panicked"))
        });
        let sides = PerSide::new(side_a, side_b);

        let mut anomalies = Vec::new();
        let mut decisions = Vec::with_capacity(2);
        for side in Side::BOTH {
            match &sides.get(side).result {
                Ok(d) => decisions.push(d.clone()),
                Err(err) => {
                    let note = format!("{side} agent failed on turn {}: {err}", state.turn);
                    tracing::warn!(game = %state.game_id, "{note}");
                    match setup.config.fallback {
                        FallbackPolicy::Abort => {
                            aborted.get_or_insert(Anomaly {
                                turn: state.turn,
                                side: Some(side),
                                message: note,
                            });
                        }
                        FallbackPolicy::RepeatPrevious => {
                            anomalies.push(format!("{note}; fallback repeated previous action"));
                            decisions.push(fallback_decision(&state, side, err));
                        }
                    }
                }
            }
        }
        if aborted.is_some() {
            break;
        }
        anomaly_count += anomalies.len() as u32;
        let decisions: PerSide<TurnDecision> = PerSide::new(decisions[0].clone(), decisions[1].clone());

        let before = state.clone();
        let outcome = state.resolve_turn(&decisions.a, &decisions.b)?;
        let record = build_record(
            &before,
            &views,
            &sides,
            &decisions,
            &outcome,
            &agent_names,
            &state,
            anomalies,
        );
        sink.write_turn(&record)?;
        transcript.turns.push(record);
    }

    let summary = Summary::from_game(&state, &transcript, aborted, anomaly_count);
    sink.write_summary(&summary)?;
    transcript.summary = Some(summary);
    Ok(transcript)
}
