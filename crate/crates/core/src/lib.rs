//! Deterministic, seedable simulator of two-party nuclear crisis escalation
//! games between pluggable agents.
//!
//! The crate is organised bottom-up:
//!
//! - [`ladder`]: the escalation ladder, threshold classes and strategic gating
//! - [`forces`]: fighting power, power shares and combat attrition
//! - [`scenarios`]: crisis scenarios and state profiles
//! - [`memory`]: rolling decision memory and decaying betrayal memory
//! - [`protocol`]: the agent-facing three-phase schema, turn views and validation
//! - [`engine`]: simultaneous turn resolution, accidents, territory and victory
//! - [`agents`]: scripted strategies and the chat-completion LLM adapter
//! - [`transcript`]: the append-only JSONL transcript format
//! - [`tournament`]: scheduling and parallel execution of many games
//! - [`analytics`]: metrics computed purely from transcript files

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub mod agents;
pub mod analytics;
pub mod engine;
pub mod forces;
pub mod ladder;
pub mod memory;
pub mod protocol;
pub mod scenarios;
pub mod tournament;
pub mod transcript;

pub use agents::{Agent, AgentError, AgentSpec};
pub use engine::{run_game, EngineConfig, GameState, TurnOutcome, VictoryKind, VictoryResult};
pub use forces::{FightingPower, ForceState};
pub use ladder::{Ladder, LadderRung, ThresholdClass};
pub use protocol::{ActionDecision, Forecast, ReflectionReport, SignalDecision, TurnDecision, TurnView};
pub use scenarios::ScenarioSpec;
pub use transcript::{Transcript, TurnRecord};

/// One of the two parties. Side A is State Alpha, side B is State Beta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::A, Side::B];

    pub fn opponent(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::A => 0,
            Side::B => 1,
        }
    }

    pub fn state_name(self) -> &'static str {
        match self {
            Side::A => "State Alpha",
            Side::B => "State Beta",
        }
    }

    /// `+1` for A, `-1` for B: multiplies a balance into this side's perspective.
    pub fn sign(self) -> f64 {
        match self {
            Side::A => 1.0,
            Side::B => -1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::A => f.write_str("Side A"),
            Side::B => f.write_str("Side B"),
        }
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Side::A),
            "B" => Ok(Side::B),
            other => Err(format!("unknown side {other:?}, expected A or B")),
        }
    }
}

/// Per-side pair, indexed by [`Side`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSide<T> {
    pub a: T,
    pub b: T,
}

impl<T> PerSide<T> {
    pub fn new(a: T, b: T) -> Self {
        PerSide { a, b }
    }

    pub fn get(&self, side: Side) -> &T {
        match side {
            Side::A => &self.a,
            Side::B => &self.b,
        }
    }

    pub fn get_mut(&mut self, side: Side) -> &mut T {
        match side {
            Side::A => &mut self.a,
            Side::B => &mut self.b,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Side, &T) -> U) -> PerSide<U> {
        PerSide {
            a: f(Side::A, &self.a),
            b: f(Side::B, &self.b),
        }
    }
}

impl<T> From<[T; 2]> for PerSide<T> {
    fn from([a, b]: [T; 2]) -> Self {
        PerSide { a, b }
    }
}
