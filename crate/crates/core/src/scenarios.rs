//! Crisis scenarios and state profiles as data.
//!
//! The seven canonical scenarios ship embedded; arbitrary scenarios with the
//! same JSON schema can be loaded from files.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Side;

/// Turn cap for scenarios without their own deadline.
pub const DEFAULT_MAX_TURNS: u32 = 40;

const CANONICAL_SCENARIOS_JSON: &str = include_str!("../data/scenarios.json");
const PROFILES_JSON: &str = include_str!("../data/profiles.json");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {id:?}; canonical scenarios are: {}", known.join(", "))]
    Unknown { id: String, known: Vec<String> },
    #[error("scenario {id:?}: time limit {limit} outside 1..={DEFAULT_MAX_TURNS}")]
    BadTimeLimit { id: String, limit: u32 },
    #[error("scenario {id:?}: starting balance {balance} is not finite")]
    BadBalance { id: String, balance: f64 },
    #[error("duplicate scenario id {0:?}")]
    DuplicateId(String),
    #[error("failed to read scenario file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Side-specific replacements for briefing blocks. Absent blocks fall back to
/// the shared text.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BriefingOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stakes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consequences: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub key_dynamic: String,
    #[serde(default)]
    pub context: String,
    #[serde(default)]
    pub stakes: String,
    #[serde(default)]
    pub pressure: String,
    #[serde(default)]
    pub consequences: String,
    #[serde(default)]
    pub per_side_overrides: BTreeMap<Side, BriefingOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit: Option<u32>,
    /// Positive favors side A.
    #[serde(default)]
    pub starting_balance: f64,
    #[serde(default = "default_aggressor")]
    pub aggressor: Side,
}

fn default_aggressor() -> Side {
    Side::A
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if let Some(limit) = self.time_limit {
            if limit == 0 || limit > DEFAULT_MAX_TURNS {
                return Err(ScenarioError::BadTimeLimit {
                    id: self.id.clone(),
                    limit,
                });
            }
        }
        if !self.starting_balance.is_finite() {
            return Err(ScenarioError::BadBalance {
                id: self.id.clone(),
                balance: self.starting_balance,
            });
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<ScenarioSpec, ScenarioError> {
        let spec: ScenarioSpec = serde_json::from_str(json)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<ScenarioSpec, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ScenarioSpec::from_json(&text)
    }

    pub fn max_turns(&self) -> u32 {
        self.time_limit.unwrap_or(DEFAULT_MAX_TURNS)
    }

    pub fn has_deadline(&self) -> bool {
        self.time_limit.is_some()
    }

    pub fn with_starting_balance(mut self, balance: f64) -> Self {
        self.starting_balance = balance;
        self
    }
}

/// The seven embedded scenarios, in canonical order.
pub fn canonical_scenarios() -> &'static [ScenarioSpec] {
    static SCENARIOS: OnceLock<Vec<ScenarioSpec>> = OnceLock::new();
    SCENARIOS.get_or_init(|| {
        let specs: Vec<ScenarioSpec> =
            serde_json::from_str(CANONICAL_SCENARIOS_JSON).expect("embedded scenario data is valid JSON");
        let mut ids = HashSet::new();
        for s in &specs {
            s.validate().expect("embedded scenario is valid");
            assert!(ids.insert(s.id.clone()), "duplicate embedded scenario id");
        }
        specs
    })
}

pub fn canonical_ids() -> Vec<String> {
    canonical_scenarios().iter().map(|s| s.id.clone()).collect()
}

/// Loads a canonical scenario by id.
pub fn load_scenario(id: &str) -> Result<ScenarioSpec, ScenarioError> {
    canonical_scenarios()
        .iter()
        .find(|s| s.id == id)
        .cloned()
        .ok_or_else(|| ScenarioError::Unknown {
            id: id.to_string(),
            known: canonical_ids(),
        })
}

/// Accepts either a canonical id or a path to a scenario JSON file.
pub fn resolve_scenario(id_or_path: &str) -> Result<ScenarioSpec, ScenarioError> {
    let path = Path::new(id_or_path);
    if id_or_path.ends_with(".json") || path.is_file() {
        ScenarioSpec::from_file(path)
    } else {
        load_scenario(id_or_path)
    }
}

/// Renders the scenario briefing seen by `side`, with that side's override
/// blocks substituted in.
pub fn briefing_for(s: &ScenarioSpec, side: Side) -> String {
    let ov = s.per_side_overrides.get(&side).cloned().unwrap_or_default();
    let pick = |o: Option<String>, base: &str| o.unwrap_or_else(|| base.to_string());
    let role = if side == s.aggressor {
        "the aggressor, pressing for advantage"
    } else {
        "the defender, resisting the aggressor's pressure"
    };

    let mut out = format!("Role: You lead {} ({}), {role}.\n", side.state_name(), side);
    out.push_str(&format!("Scenario: {}\n", s.title));
    let blocks = [
        ("Context", pick(ov.context, &s.context)),
        ("Stakes", pick(ov.stakes, &s.stakes)),
        ("Pressure", pick(ov.pressure, &s.pressure)),
    ];
    for (label, text) in blocks {
        if !text.is_empty() {
            out.push_str(&format!("\n{label}: {text}\n"));
        }
    }
    if let Some(limit) = s.time_limit {
        out.push_str(&format!("\nTime Limit: {limit} turns\n"));
    }
    let consequences = pick(ov.consequences, &s.consequences);
    if !consequences.is_empty() {
        out.push_str(&format!("\nConsequences: {consequences}\n"));
    }
    out
}

pub fn max_turns(s: &ScenarioSpec) -> u32 {
    s.max_turns()
}

/// Leader, doctrine and intelligence profile of one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateProfile {
    pub state_name: String,
    pub epithet: String,
    pub leader: String,
    pub biography: String,
    pub traits: Vec<String>,
    pub decision_style: String,
    pub nuclear_doctrine: String,
    pub risk_tolerance: String,
    pub primary_concerns: String,
    pub capabilities: Vec<String>,
    pub strategic_doctrine: String,
    pub strengths: String,
    pub weaknesses: String,
    pub intelligence_assessment: String,
    pub opponent_leadership: String,
    pub opponent_predictability: String,
    pub opponent_risk_tolerance: String,
    pub intelligence_confidence: String,
}

impl StateProfile {
    pub fn for_side(side: Side) -> &'static StateProfile {
        static PROFILES: OnceLock<BTreeMap<Side, StateProfile>> = OnceLock::new();
        let profiles =
            PROFILES.get_or_init(|| serde_json::from_str(PROFILES_JSON).expect("embedded profile data is valid JSON"));
        &profiles[&side]
    }

    pub fn render(&self) -> String {
        let mut out = format!("{} ({})\n", self.state_name, self.epithet);
        out.push_str(&format!("Leader: {}\n", self.leader));
        out.push_str(&format!("Biography: {}\n", self.biography));
        out.push_str(&format!("Traits: {}\n", self.traits.join(", ")));
        out.push_str(&format!("Decision Style: {}\n", self.decision_style));
        out.push_str(&format!("Nuclear Doctrine: {}\n", self.nuclear_doctrine));
        out.push_str(&format!("Risk Tolerance: {}\n", self.risk_tolerance));
        out.push_str(&format!("Primary Concerns: {}\n", self.primary_concerns));
        out.push_str("Military Capabilities:\n");
        for c in &self.capabilities {
            out.push_str(&format!("  - {c}\n"));
        }
        out.push_str(&format!("Strategic Doctrine: {}\n", self.strategic_doctrine));
        out.push_str(&format!("Key Strengths: {}\n", self.strengths));
        out.push_str(&format!("Key Weaknesses: {}\n", self.weaknesses));
        out.push_str("Intelligence Assessment of Opponent:\n");
        out.push_str(&format!("  Overall: {}\n", self.intelligence_assessment));
        out.push_str(&format!("  Leadership: {}\n", self.opponent_leadership));
        out.push_str(&format!("  Predictability: {}\n", self.opponent_predictability));
        out.push_str(&format!("  Risk Tolerance: {}\n", self.opponent_risk_tolerance));
        out.push_str(&format!(
            "  Intelligence Confidence: {}\n",
            self.intelligence_confidence
        ));
        out
    }
}
