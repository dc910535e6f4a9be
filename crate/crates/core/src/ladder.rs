//! The 30-option escalation ladder, threshold classes and strategic gating.
//!
//! Agents only ever see rung names and descriptions. The numeric values live
//! here and are used engine-side for territory, attrition and analytics.

use std::fmt;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Value of "Complete Surrender".
pub const SURRENDER: i32 = -95;
/// Value of "Return to Start Line".
pub const STATUS_QUO: i32 = 0;
/// Lowest nuclear-signaling value; accidents only roll at or above it.
pub const SIGNALING_THRESHOLD: i32 = 125;
/// Value of "Nuclear Threat", the score gated strategic threats collapse to.
pub const NUCLEAR_THREAT: i32 = 350;
/// The nuclear firebreak: first actual use of nuclear weapons.
pub const TACTICAL_THRESHOLD: i32 = 450;
pub const STRATEGIC_THREAT_THRESHOLD: i32 = 850;
pub const FINAL_WARNING: i32 = 950;
pub const STRATEGIC_WAR: i32 = 1000;

/// Number of rungs in the canonical ladder.
pub const CANONICAL_RUNG_COUNT: usize = 30;

const CANONICAL_LADDER_JSON: &str = include_str!("../data/ladder.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RungCategory {
    DeEscalation,
    StatusQuo,
    Conventional,
    NuclearThreshold,
    NuclearCampaign,
    StrategicWar,
}

/// One escalation option.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LadderRung {
    pub name: String,
    pub description: String,
    pub value: i32,
    pub category: RungCategory,
}

/// Nested nuclear threshold classes, ordered from least to most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdClass {
    SubNuclear,
    Signaling,
    TacticalUse,
    StrategicThreat,
    StrategicWar,
}

impl ThresholdClass {
    pub const CROSSABLE: [ThresholdClass; 4] = [
        ThresholdClass::Signaling,
        ThresholdClass::TacticalUse,
        ThresholdClass::StrategicThreat,
        ThresholdClass::StrategicWar,
    ];

    /// Lower bound in ladder points, `None` for `SubNuclear`.
    pub fn bound(self) -> Option<i32> {
        match self {
            ThresholdClass::SubNuclear => None,
            ThresholdClass::Signaling => Some(SIGNALING_THRESHOLD),
            ThresholdClass::TacticalUse => Some(TACTICAL_THRESHOLD),
            ThresholdClass::StrategicThreat => Some(STRATEGIC_THREAT_THRESHOLD),
            ThresholdClass::StrategicWar => Some(STRATEGIC_WAR),
        }
    }
}

impl fmt::Display for ThresholdClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ThresholdClass::SubNuclear => "sub_nuclear",
            ThresholdClass::Signaling => "signaling",
            ThresholdClass::TacticalUse => "tactical_use",
            ThresholdClass::StrategicThreat => "strategic_threat",
            ThresholdClass::StrategicWar => "strategic_war",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LadderError {
    #[error("unknown escalation option {name:?}; valid options are: {}", candidates.join(", "))]
    UnknownRung { name: String, candidates: Vec<String> },
    #[error("ladder must contain exactly {CANONICAL_RUNG_COUNT} rungs, got {0} (set custom_ladder to override)")]
    WrongRungCount(usize),
    #[error("ladder rung values must strictly increase: {prev} then {next}")]
    NotIncreasing { prev: i32, next: i32 },
    #[error("duplicate rung name {0:?}")]
    DuplicateName(String),
    #[error("rung value {0} at position {1} differs from the canonical structure")]
    StructureChanged(i32, usize),
    #[error("ladder is empty")]
    Empty,
    #[error("failed to read ladder file: {0}")]
    Io(String),
    #[error("invalid ladder JSON: {0}")]
    Json(String),
}

/// Lower-cases and collapses runs of whitespace so that agent-supplied names
/// compare equal to canonical names regardless of spacing or case.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// An ordered, validated escalation ladder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ladder {
    rungs: Vec<LadderRung>,
    custom: bool,
}

impl Ladder {
    /// The embedded canonical ladder, shared process-wide.
    pub fn canonical() -> Arc<Ladder> {
        static CANONICAL: OnceLock<Arc<Ladder>> = OnceLock::new();
        CANONICAL
            .get_or_init(|| {
                let rungs: Vec<LadderRung> =
                    serde_json::from_str(CANONICAL_LADDER_JSON).expect("embedded ladder data is valid JSON");
                Arc::new(Ladder::validate(rungs, false).expect("embedded ladder is valid"))
            })
            .clone()
    }

    /// Builds a ladder from explicit rungs.
    ///
    /// Without `custom`, the rungs must keep the canonical 30-rung value
    /// sequence; only names and descriptions may change.
    pub fn from_rungs(rungs: Vec<LadderRung>, custom: bool) -> Result<Ladder, LadderError> {
        if !custom {
            if rungs.len() != CANONICAL_RUNG_COUNT {
                return Err(LadderError::WrongRungCount(rungs.len()));
            }
            let canonical = Ladder::canonical();
            for (i, (r, c)) in rungs.iter().zip(canonical.rungs()).enumerate() {
                if r.value != c.value {
                    return Err(LadderError::StructureChanged(r.value, i));
                }
            }
        }
        Ladder::validate(rungs, custom)
    }

    pub fn from_json(json: &str, custom: bool) -> Result<Ladder, LadderError> {
        let rungs: Vec<LadderRung> = serde_json::from_str(json).map_err(|e| LadderError::Json(e.to_string()))?;
        Ladder::from_rungs(rungs, custom)
    }

    pub fn from_file(path: &Path, custom: bool) -> Result<Ladder, LadderError> {
        let text = std::fs::read_to_string(path).map_err(|e| LadderError::Io(e.to_string()))?;
        Ladder::from_json(&text, custom)
    }

    fn validate(rungs: Vec<LadderRung>, custom: bool) -> Result<Ladder, LadderError> {
        if rungs.is_empty() {
            return Err(LadderError::Empty);
        }
        for pair in rungs.windows(2) {
            if pair[1].value <= pair[0].value {
                return Err(LadderError::NotIncreasing {
                    prev: pair[0].value,
                    next: pair[1].value,
                });
            }
        }
        let mut seen = std::collections::HashSet::new();
        for r in &rungs {
            if !seen.insert(normalize_name(&r.name)) {
                return Err(LadderError::DuplicateName(r.name.clone()));
            }
        }
        Ok(Ladder { rungs, custom })
    }

    pub fn rungs(&self) -> &[LadderRung] {
        &self.rungs
    }

    pub fn len(&self) -> usize {
        self.rungs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rungs.is_empty()
    }

    /// Whether the ladder was loaded with the custom-ladder flag.
    pub fn is_custom(&self) -> bool {
        self.custom
    }

    pub fn is_canonical(&self) -> bool {
        *self == *Ladder::canonical()
    }

    pub fn names(&self) -> Vec<String> {
        self.rungs.iter().map(|r| r.name.clone()).collect()
    }

    /// Looks a rung up by name, case-insensitively with whitespace normalized.
    /// There is no fuzzy matching: a near miss is an error listing every
    /// valid name.
    pub fn rung_by_name(&self, name: &str) -> Result<&LadderRung, LadderError> {
        let wanted = normalize_name(name);
        self.rungs
            .iter()
            .find(|r| normalize_name(&r.name) == wanted)
            .ok_or_else(|| LadderError::UnknownRung {
                name: name.to_string(),
                candidates: self.names(),
            })
    }

    pub fn rung_by_value(&self, value: i32) -> Option<&LadderRung> {
        self.index_of(value).map(|i| &self.rungs[i])
    }

    pub fn index_of(&self, value: i32) -> Option<usize> {
        self.rungs.binary_search_by_key(&value, |r| r.value).ok()
    }

    /// Index of the first rung at or above `value`, used to place values that
    /// are not exactly on the ladder.
    fn position(&self, value: i32) -> usize {
        match self.rungs.binary_search_by_key(&value, |r| r.value) {
            Ok(i) => i,
            Err(i) => i.min(self.rungs.len() - 1),
        }
    }

    /// Value of the rung `n` positions above `value`, clamped at the top rung.
    pub fn escalate_rungs(&self, value: i32, n: usize) -> i32 {
        let idx = (self.position(value) + n).min(self.rungs.len() - 1);
        self.rungs[idx].value.max(value)
    }

    /// Signed number of rung positions from `from` to `to`.
    pub fn rung_gap(&self, from: i32, to: i32) -> i64 {
        self.position(to) as i64 - self.position(from) as i64
    }

    pub fn top_value(&self) -> i32 {
        self.rungs[self.rungs.len() - 1].value
    }
}

/// Highest threshold class whose bound `value` meets.
pub fn classify(value: i32) -> ThresholdClass {
    if value >= STRATEGIC_WAR {
        ThresholdClass::StrategicWar
    } else if value >= STRATEGIC_THREAT_THRESHOLD {
        ThresholdClass::StrategicThreat
    } else if value >= TACTICAL_THRESHOLD {
        ThresholdClass::TacticalUse
    } else if value >= SIGNALING_THRESHOLD {
        ThresholdClass::Signaling
    } else {
        ThresholdClass::SubNuclear
    }
}

/// Territorial score of an action under the strategic gating rule.
///
/// While the gate is closed, "Strategic Nuclear Threat" and "Final Nuclear
/// Warning" score as "Nuclear Threat". Demonstrations and all-out war are
/// never reduced.
pub fn effective_value(action: i32, gate_open: bool) -> i32 {
    if !gate_open && is_gated(action) {
        NUCLEAR_THREAT
    } else {
        action
    }
}

/// Strategic threats that score as a plain nuclear threat while the gate is closed.
pub fn is_gated(action: i32) -> bool {
    action == STRATEGIC_THREAT_THRESHOLD || action == FINAL_WARNING
}

/// Whether an executed action lifts gating for the turn it is played in:
/// actual nuclear employment at or above the firebreak. The gated threats
/// themselves do not count, otherwise every strategic threat would lift its
/// own reduction.
pub fn opens_gate(executed: i32) -> bool {
    executed >= TACTICAL_THRESHOLD && !is_gated(executed)
}

/// Whether an executed action keeps the gate open for every later turn. Any
/// action at or above the firebreak does, strategic threats included.
pub fn keeps_gate_open(executed: i32) -> bool {
    executed >= TACTICAL_THRESHOLD
}
