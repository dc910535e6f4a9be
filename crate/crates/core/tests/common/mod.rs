#![allow(dead_code)]

pub mod oracle;

use std::sync::{Arc, Mutex};

use escalation_core::agents::{AgentError, ChatRequest, ChatTransport};
use escalation_core::engine::{AccidentConfig, GameSetup};
use escalation_core::scenarios::load_scenario;
use escalation_core::transcript::NullSink;
use escalation_core::{run_game, AgentSpec, EngineConfig, Ladder, Transcript};
use serde_json::{json, Value};

pub fn no_accidents() -> EngineConfig {
    EngineConfig {
        accidents: AccidentConfig {
            low: 0.0,
            medium: 0.0,
            high: 0.0,
            max_rungs: 3,
        },
        ..EngineConfig::default()
    }
}

pub fn play(a: &str, b: &str, scenario: &str, seed: u64, config: EngineConfig) -> Transcript {
    let ladder = Ladder::canonical();
    let spec_a: AgentSpec = a.parse().unwrap();
    let spec_b: AgentSpec = b.parse().unwrap();
    let mut agent_a = spec_a.build(ladder.clone(), seed ^ 1, 3).unwrap();
    let mut agent_b = spec_b.build(ladder.clone(), seed ^ 2, 3).unwrap();
    let setup = GameSetup::new(format!("{a}-vs-{b}"), load_scenario(scenario).unwrap(), seed).with_config(config);
    run_game(agent_a.as_mut(), agent_b.as_mut(), &setup, &mut NullSink).unwrap()
}

pub fn reflection_json() -> Value {
    json!({
        "opponent_immediate_credibility": {"rating": "highly_credible", "rationale": "signals matched"},
        "opponent_resolve_credibility": {"rating": "not_credible", "rationale": "no follow-through"},
        "self_forecasting": "fair",
        "self_credibility_assessment": "fair",
        "self_metacognition": "fair",
        "opponent_predicts_me": "poorly",
        "opponent_assesses_my_credibility": "as reliable",
        "opponent_self_awareness": "limited",
        "situational_assessment": "tense"
    })
}

pub fn forecast_json(predicted: &str) -> Value {
    json!({
        "predicted_action": predicted,
        "confidence": "medium",
        "miscalculation_risk": "low",
        "reasoning": "they have held this level"
    })
}

pub fn decision_json(signal: &str, action: &str) -> Value {
    json!({
        "signal": {
            "immediate_signal": signal,
            "conditional_signal": "we will match any escalation",
            "public_statement": "we seek calm"
        },
        "action": {
            "action_choice": action,
            "consistency_statement": "acting at the predicted level",
            "private_rationale": "hold the line"
        }
    })
}

/// Replays canned replies in order and records every request it receives.
#[derive(Clone)]
pub struct MockTransport {
    replies: Arc<Mutex<Vec<Result<String, String>>>>,
    pub requests: Arc<Mutex<Vec<ChatRequest>>>,
}

impl MockTransport {
    pub fn new(replies: Vec<Result<String, String>>) -> Self {
        let mut replies = replies;
        replies.reverse();
        MockTransport {
            replies: Arc::new(Mutex::new(replies)),
            requests: Arc::new(Mutex::new(Vec::new())),
        }
    }

    pub fn ok(values: &[Value]) -> Self {
        MockTransport::new(values.iter().map(|v| Ok(v.to_string())).collect())
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

impl ChatTransport for MockTransport {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, AgentError> {
        self.requests.lock().unwrap().push(request.clone());
        match self.replies.lock().unwrap().pop() {
            Some(Ok(text)) => Ok(text),
            Some(Err(e)) => Err(AgentError::Transport(e)),
            None => Err(AgentError::Transport("mock exhausted".into())),
        }
    }
}

/// Inputs one instrumented side saw and outputs it produced, per turn.
#[derive(Debug, Default, Clone)]
pub struct SideLog {
    /// Serialized views handed to every phase, keyed by turn.
    pub inputs: std::collections::BTreeMap<u32, Vec<String>>,
    /// Unique tokens planted in this side's outputs, keyed by turn.
    pub tokens: std::collections::BTreeMap<u32, Vec<String>>,
    /// Hash of the first view of each turn.
    pub view_hash: std::collections::BTreeMap<u32, String>,
}

/// Wraps an agent, logs every input it receives and tags every free-text
/// output with a token that is unique to (game, side, turn, field).
pub struct Instrumented {
    pub inner: Box<dyn escalation_core::Agent>,
    pub game: u64,
    pub log: Arc<Mutex<SideLog>>,
    /// Replaces the chosen action with this rung from the given turn on.
    pub divert: Option<(u32, String)>,
}

impl Instrumented {
    pub fn new(inner: Box<dyn escalation_core::Agent>, game: u64) -> (Self, Arc<Mutex<SideLog>>) {
        let log = Arc::new(Mutex::new(SideLog::default()));
        (
            Instrumented {
                inner,
                game,
                log: log.clone(),
                divert: None,
            },
            log,
        )
    }

    fn see(&self, view: &escalation_core::TurnView, phase: &str) {
        let mut log = self.log.lock().unwrap();
        let json = serde_json::to_string(view).unwrap();
        log.view_hash
            .entry(view.turn)
            .or_insert_with(|| escalation_core::protocol::content_hash(view));
        log.inputs.entry(view.turn).or_default().push(format!("{phase}:{json}"));
    }

    fn token(&self, view: &escalation_core::TurnView, field: &str) -> String {
        let t = format!("~tok-{}-{:?}-{}-{field}~", self.game, view.side, view.turn);
        self.log
            .lock()
            .unwrap()
            .tokens
            .entry(view.turn)
            .or_default()
            .push(t.clone());
        t
    }
}

impl escalation_core::Agent for Instrumented {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn reflect(&mut self, view: &escalation_core::TurnView) -> Result<escalation_core::ReflectionReport, AgentError> {
        self.see(view, "reflect");
        let mut r = self.inner.reflect(view)?;
        r.situational_assessment.push_str(&self.token(view, "assessment"));
        r.opponent_immediate_credibility
            .rationale
            .push_str(&self.token(view, "credibility"));
        Ok(r)
    }

    fn forecast(
        &mut self,
        view: &escalation_core::TurnView,
        reflection: &escalation_core::ReflectionReport,
    ) -> Result<escalation_core::Forecast, AgentError> {
        self.see(view, "forecast");
        let mut f = self.inner.forecast(view, reflection)?;
        f.reasoning.push_str(&self.token(view, "forecast"));
        Ok(f)
    }

    fn decide(
        &mut self,
        view: &escalation_core::TurnView,
        reflection: &escalation_core::ReflectionReport,
        forecast: &escalation_core::Forecast,
    ) -> Result<escalation_core::protocol::Decision, AgentError> {
        self.see(view, "decide");
        let mut d = self.inner.decide(view, reflection, forecast)?;
        if let Some((from, rung)) = &self.divert {
            if view.turn >= *from {
                d.action.action_choice = rung.clone();
            }
        }
        d.signal.public_statement.push_str(&self.token(view, "public"));
        d.signal.conditional_signal.push_str(&self.token(view, "conditional"));
        d.action.private_rationale.push_str(&self.token(view, "private"));
        d.action
            .consistency_statement
            .push_str(&self.token(view, "consistency"));
        Ok(d)
    }
}

/// Opponent tokens of `turn` that appear anywhere in `own`'s inputs for that turn.
pub fn same_turn_leaks(own: &SideLog, opponent: &SideLog, turn: u32) -> Vec<String> {
    let inputs = own.inputs.get(&turn).cloned().unwrap_or_default();
    opponent
        .tokens
        .get(&turn)
        .into_iter()
        .flatten()
        .filter(|tok| inputs.iter().any(|i| i.contains(tok.as_str())))
        .cloned()
        .collect()
}
