//! What each side remembers about its opponent: a rolling window of
//! signal/action pairs and a longer-lived, decaying record of betrayals.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ladder::{Ladder, LadderRung, SIGNALING_THRESHOLD, TACTICAL_THRESHOLD};

/// Records kept in the decision panel.
pub const WINDOW: usize = 5;
/// Per-turn salience retention of a betrayal.
pub const SALIENCE_DECAY: f64 = 0.85;
/// Betrayals below this salience are forgotten.
pub const PRUNE_BELOW: f64 = 0.10;
/// Minimum rung gap for a major escalation.
pub const MAJOR_ESCALATION_RUNGS: i64 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MemoryError {
    #[error("turn {turn} recorded after turn {last}; turns must strictly increase")]
    NonMonotoneTurn { turn: u32, last: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionLabel {
    Matched,
    EscalatedBeyond,
    DeEscalatedBelow,
    MajorEscalation,
}

impl DecisionLabel {
    fn panel_text(self) -> &'static str {
        match self {
            DecisionLabel::Matched => "✓ MATCHED",
            DecisionLabel::EscalatedBeyond => "✗ ESCALATED beyond signal",
            DecisionLabel::DeEscalatedBelow => "✗ DE-ESCALATED below signal",
            DecisionLabel::MajorEscalation => "✗ MAJOR ESCALATION beyond signal",
        }
    }
}

/// Labels a signal/action pair.
///
/// A major escalation is an action at least two rungs above the signal that
/// also reaches nuclear signaling level.
pub fn label_decision(ladder: &Ladder, signal: &LadderRung, action: &LadderRung) -> DecisionLabel {
    let gap = ladder.rung_gap(signal.value, action.value);
    if gap == 0 {
        DecisionLabel::Matched
    } else if gap >= MAJOR_ESCALATION_RUNGS && action.value >= SIGNALING_THRESHOLD {
        DecisionLabel::MajorEscalation
    } else if gap > 0 {
        DecisionLabel::EscalatedBeyond
    } else {
        DecisionLabel::DeEscalatedBelow
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub turn: u32,
    pub signaled: String,
    pub chose: String,
    pub signaled_value: i32,
    pub chose_value: i32,
    pub label: DecisionLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BetrayalEvent {
    pub turn: u32,
    /// Set when the betraying action was actual nuclear use (450+).
    pub nuclear_flag: bool,
}

impl BetrayalEvent {
    pub fn salience(&self, current_turn: u32) -> f64 {
        salience_at_age(current_turn.saturating_sub(self.turn))
    }
}

pub fn salience_at_age(age: u32) -> f64 {
    SALIENCE_DECAY.powi(age as i32)
}

/// A betrayal as shown at a given turn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetrayalSnapshot {
    pub turn: u32,
    pub salience: f64,
    pub nuclear_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySnapshot {
    pub records: Vec<DecisionRecord>,
    pub betrayals: Vec<BetrayalSnapshot>,
}

/// One side's memory of its opponent's revealed behaviour.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OpponentMemory {
    records: VecDeque<DecisionRecord>,
    betrayals: Vec<BetrayalEvent>,
    last_turn: Option<u32>,
}

impl OpponentMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> impl Iterator<Item = &DecisionRecord> {
        self.records.iter()
    }

    pub fn latest(&self) -> Option<&DecisionRecord> {
        self.records.back()
    }

    /// Betrayals still salient at `current_turn`, newest first.
    pub fn betrayals_at(&self, current_turn: u32) -> Vec<BetrayalSnapshot> {
        let mut out: Vec<_> = self
            .betrayals
            .iter()
            .map(|b| BetrayalSnapshot {
                turn: b.turn,
                salience: b.salience(current_turn),
                nuclear_flag: b.nuclear_flag,
            })
            .filter(|b| b.salience >= PRUNE_BELOW)
            .collect();
        out.sort_by(|x, y| y.turn.cmp(&x.turn));
        out
    }

    pub fn record_turn(
        &mut self,
        ladder: &Ladder,
        turn: u32,
        signal: &LadderRung,
        action: &LadderRung,
    ) -> Result<DecisionLabel, MemoryError> {
        if let Some(last) = self.last_turn {
            if turn <= last {
                return Err(MemoryError::NonMonotoneTurn { turn, last });
            }
        }
        self.last_turn = Some(turn);

        let label = label_decision(ladder, signal, action);
        self.records.push_back(DecisionRecord {
            turn,
            signaled: signal.name.clone(),
            chose: action.name.clone(),
            signaled_value: signal.value,
            chose_value: action.value,
            label,
        });
        while self.records.len() > WINDOW {
            self.records.pop_front();
        }

        self.betrayals.retain(|b| b.salience(turn) >= PRUNE_BELOW);
        if label == DecisionLabel::MajorEscalation && action.value >= SIGNALING_THRESHOLD {
            self.betrayals.push(BetrayalEvent {
                turn,
                nuclear_flag: action.value >= TACTICAL_THRESHOLD,
            });
        }
        Ok(label)
    }

    pub fn snapshot(&self, current_turn: u32) -> MemorySnapshot {
        MemorySnapshot {
            records: self.records.iter().cloned().collect(),
            betrayals: self.betrayals_at(current_turn),
        }
    }

    pub fn render_panels(&self, current_turn: u32) -> String {
        let snap = self.snapshot(current_turn);
        let mut out = String::new();
        out.push_str(&render_decision_panel(&snap));
        out.push('\n');
        out.push_str(&render_betrayal_panel(&snap));
        out
    }
}

fn nuclear_tag(value: i32) -> &'static str {
    if value >= SIGNALING_THRESHOLD {
        " [NUCLEAR]"
    } else {
        ""
    }
}

pub fn render_decision_panel(snap: &MemorySnapshot) -> String {
    let mut out = format!("Opponent Decision Memory (last {WINDOW} turns):\n");
    if snap.records.is_empty() {
        out.push_str("  (no history yet)\n");
    }
    for r in &snap.records {
        out.push_str(&format!("Turn {}:\n", r.turn));
        out.push_str(&format!("  Signaled: {}\n", r.signaled));
        out.push_str(&format!("  Chose: {}{}\n", r.chose, nuclear_tag(r.chose_value)));
        out.push_str(&format!("  {}\n", r.label.panel_text()));
    }
    out
}

pub fn render_betrayal_panel(snap: &MemorySnapshot) -> String {
    let mut out = String::from("Betrayal Memory (significant past deceptions):\n");
    if snap.betrayals.is_empty() {
        out.push_str("  (no history of major deceptions)\n");
    }
    for b in &snap.betrayals {
        out.push_str(&format!(
            "  Turn {} (memory: {:.0}%): MAJOR ESCALATION beyond stated intent{}\n",
            b.turn,
            b.salience * 100.0,
            if b.nuclear_flag { " [NUCLEAR]" } else { "" }
        ));
    }
    out
}
