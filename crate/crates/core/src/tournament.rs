//! Tournament planning and parallel execution.
//!
//! A plan is a roster of agent specs, a scenario list and a pairing rule.
//! Scheduling is deterministic: every game gets an index, a stable id and a
//! seed derived from the master seed by a SplitMix64 counter, so the whole
//! tournament is reproducible from one integer regardless of parallelism.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::agents::AgentSpec;
use crate::engine::{run_game, EngineConfig, GameSetup, VictoryKind, VictoryResult};
use crate::ladder::Ladder;
use crate::scenarios::{canonical_ids, resolve_scenario, ScenarioSpec};
use crate::transcript::{JsonlWriter, Transcript};
use crate::{PerSide, Side};

#[derive(Debug, Error)]
pub enum TournamentError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("duplicate game id {0}")]
    DuplicateGameId(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("transcript error in {path}: {message}")]
    Transcript { path: PathBuf, message: String },
}

/// Which orientations of a cross pairing are played.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orders {
    /// One orientation per game, alternating which agent is side A.
    Single,
    /// Every game is played twice with sides swapped.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairingRule {
    pub orders: Orders,
    /// Games per unordered pair of distinct agents (before doubling for
    /// `Orders::Both`). `None` plays every scenario once.
    pub games_per_pair: Option<usize>,
    /// Self-play games per agent.
    pub self_play_games: usize,
}

impl Default for PairingRule {
    /// Six games per rival pair in alternating orientation plus one
    /// self-play game each: 21 games for three agents over seven scenarios.
    fn default() -> Self {
        PairingRule {
            orders: Orders::Single,
            games_per_pair: Some(6),
            self_play_games: 1,
        }
    }
}

fn default_parallel() -> usize {
    1
}

fn default_scenarios() -> Vec<String> {
    canonical_ids()
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentPlan {
    pub agents: Vec<AgentSpec>,
    /// Canonical scenario ids or paths to scenario files.
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<String>,
    #[serde(default)]
    pub pairing: PairingRule,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_parallel")]
    pub parallel: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub config: EngineConfig,
    /// Overrides every scenario's starting balance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starting_balance: Option<f64>,
    /// Ladder file; the canonical ladder when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<PathBuf>,
    /// Allows a ladder file whose values differ from the canonical ones.
    #[serde(default)]
    pub custom_ladder: bool,
}

impl TournamentPlan {
    pub fn new(agents: Vec<AgentSpec>) -> Self {
        TournamentPlan {
            agents,
            scenarios: default_scenarios(),
            pairing: PairingRule::default(),
            master_seed: 0,
            parallel: 1,
            out: default_out(),
            config: EngineConfig::default(),
            starting_balance: None,
            ladder: None,
            custom_ladder: false,
        }
    }

    pub fn from_file(path: &Path) -> Result<TournamentPlan, TournamentError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| TournamentError::Plan(format!("{}: {e}", path.display())))
    }

    pub fn load_ladder(&self) -> Result<Arc<Ladder>, TournamentError> {
        match &self.ladder {
            None => Ok(Ladder::canonical()),
            Some(p) => Ladder::from_file(p, self.custom_ladder)
                .map(Arc::new)
                .map_err(|e| TournamentError::Plan(e.to_string())),
        }
    }
}

/// One scheduled game.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledGame {
    pub index: usize,
    pub game_id: String,
    pub agents: PerSide<AgentSpec>,
    pub scenario: ScenarioSpec,
    pub seed: u64,
}

impl ScheduledGame {
    pub fn is_self_play(&self) -> bool {
        self.agents.a == self.agents.b
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of game `index`: the `index + 1`-th output of SplitMix64 started at
/// the master seed.
pub fn game_seed(master_seed: u64, index: usize) -> u64 {
    splitmix64(master_seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Seed handed to an unseeded random agent on `side` of a game.
pub fn agent_seed(game_seed: u64, side: Side) -> u64 {
    splitmix64(game_seed ^ (side.index() as u64 + 1))
}

fn id_part(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn game_id(index: usize, scenario: &str, a: &AgentSpec, b: &AgentSpec) -> String {
    format!(
        "g{index:03}-{}-{}-vs-{}",
        id_part(scenario),
        id_part(&a.label()),
        id_part(&b.label())
    )
}

/// Expands a plan into its ordered game list.
///
/// Matchups come first for every pair `i < j` of roster entries, then
/// self-play. Scenarios are assigned cyclically over the whole schedule.
pub fn schedule(plan: &TournamentPlan) -> Result<Vec<ScheduledGame>, TournamentError> {
    if plan.agents.is_empty() {
        return Err(TournamentError::Plan("agent roster is empty".into()));
    }
    if plan.scenarios.is_empty() {
        return Err(TournamentError::Plan("scenario list is empty".into()));
    }
    let mut seen = BTreeSet::new();
    for a in &plan.agents {
        if !seen.insert(a.to_string()) {
            return Err(TournamentError::Plan(format!("agent {a} appears twice in the roster")));
        }
    }
    let scenarios = plan
        .scenarios
        .iter()
        .map(|s| {
            let spec = resolve_scenario(s).map_err(|e| TournamentError::Plan(e.to_string()))?;
            Ok(match plan.starting_balance {
                Some(b) => spec.with_starting_balance(b),
                None => spec,
            })
        })
        .collect::<Result<Vec<_>, TournamentError>>()?;

    let per_pair = plan.pairing.games_per_pair.unwrap_or(scenarios.len());
    let mut matchups: Vec<(usize, usize)> = Vec::new();
    for i in 0..plan.agents.len() {
        for j in i + 1..plan.agents.len() {
            for k in 0..per_pair {
                match plan.pairing.orders {
                    Orders::Single if k % 2 == 0 => matchups.push((i, j)),
                    Orders::Single => matchups.push((j, i)),
                    Orders::Both => {
                        matchups.push((i, j));
                        matchups.push((j, i));
                    }
                }
            }
        }
    }
    for i in 0..plan.agents.len() {
        for _ in 0..plan.pairing.self_play_games {
            matchups.push((i, i));
        }
    }
    if matchups.is_empty() {
        return Err(TournamentError::Plan("pairing rule produces no games".into()));
    }

    let mut ids = BTreeSet::new();
    let mut games = Vec::with_capacity(matchups.len());
    let mut scenario_cursor = 0;
    for (index, (i, j)) in matchups.into_iter().enumerate() {
        // both orientations of one pairing share a scenario
        let paired = plan.pairing.orders == Orders::Both && i != j && i > j;
        if !paired {
            scenario_cursor += 1;
        }
        let scenario = scenarios[(scenario_cursor - 1) % scenarios.len()].clone();
        let (a, b) = (plan.agents[i].clone(), plan.agents[j].clone());
        let id = game_id(index, &scenario.id, &a, &b);
        if !ids.insert(id.clone()) {
            return Err(TournamentError::DuplicateGameId(id));
        }
        games.push(ScheduledGame {
            index,
            game_id: id,
            agents: PerSide::new(a, b),
            scenario,
            seed: game_seed(plan.master_seed, index),
        });
    }
    Ok(games)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameStatus {
    Completed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRow {
    pub game_id: String,
    pub scenario: String,
    pub agents: PerSide<String>,
    pub seed: u64,
    pub status: GameStatus,
    pub victory: Option<VictoryResult>,
    pub winner: Option<String>,
    pub turns: u32,
    pub final_balance: f64,
    pub max_executed: PerSide<i32>,
    pub accidents: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl GameRow {
    pub fn from_transcript(t: &Transcript) -> GameRow {
        let h = &t.header;
        match &t.summary {
            Some(s) => GameRow {
                game_id: s.game_id.clone(),
                scenario: s.scenario.clone(),
                agents: s.agents.clone(),
                seed: s.seed,
                status: if s.aborted.is_some() {
                    GameStatus::Aborted
                } else {
                    GameStatus::Completed
                },
                victory: s.victory,
                winner: s.winner().map(|w| s.agents.get(w).clone()),
                turns: s.turns_played,
                final_balance: s.final_balance,
                max_executed: s.max_executed.clone(),
                accidents: s.accidents,
                error: s.aborted.as_ref().map(|a| a.message.clone()),
            },
            None => GameRow {
                game_id: h.game_id.clone(),
                scenario: h.scenario.id.clone(),
                agents: h.agents.clone(),
                seed: h.seed,
                status: GameStatus::Aborted,
                victory: None,
                winner: None,
                turns: t.turns.len() as u32,
                final_balance: t
                    .turns
                    .last()
                    .map(|r| r.game_state.balance_after)
                    .unwrap_or(h.scenario.starting_balance),
                max_executed: PerSide::new(0, 0),
                accidents: 0,
                error: Some("transcript has no summary".into()),
            },
        }
    }

    fn failed(game: &ScheduledGame, error: String) -> GameRow {
        GameRow {
            game_id: game.game_id.clone(),
            scenario: game.scenario.id.clone(),
            agents: game.agents.map(|_, a| a.to_string()),
            seed: game.seed,
            status: GameStatus::Aborted,
            victory: None,
            winner: None,
            turns: 0,
            final_balance: game.scenario.starting_balance,
            max_executed: PerSide::new(0, 0),
            accidents: 0,
            error: Some(error),
        }
    }
}

/// Win/loss record of one agent. Self-play games are counted separately and
/// never as wins or losses.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Standing {
    pub games: u32,
    pub wins: u32,
    pub losses: u32,
    pub draws: u32,
    pub self_play: u32,
    pub aborted: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentSummary {
    pub games: Vec<GameRow>,
    pub standings: BTreeMap<String, Standing>,
    pub outcome_kinds: BTreeMap<String, u32>,
}

fn kind_name(kind: VictoryKind) -> String {
    serde_json::to_value(kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

impl TournamentSummary {
    pub fn from_rows(mut games: Vec<GameRow>) -> Self {
        games.sort_by(|a, b| a.game_id.cmp(&b.game_id));
        let mut standings: BTreeMap<String, Standing> = BTreeMap::new();
        let mut outcome_kinds = BTreeMap::new();
        for g in &games {
            let self_play = g.agents.a == g.agents.b;
            let key = match (g.status, g.victory) {
                (GameStatus::Aborted, _) | (_, None) => "aborted".to_string(),
                (_, Some(v)) => kind_name(v.kind),
            };
            *outcome_kinds.entry(key).or_insert(0) += 1;
            for side in Side::BOTH {
                let name = g.agents.get(side);
                if self_play && side == Side::B {
                    continue;
                }
                let s = standings.entry(name.clone()).or_default();
                s.games += 1;
                if g.status == GameStatus::Aborted {
                    s.aborted += 1;
                } else if self_play {
                    s.self_play += 1;
                } else {
                    match g.victory.and_then(|v| v.winner) {
                        Some(w) if w == side => s.wins += 1,
                        Some(_) => s.losses += 1,
                        None => s.draws += 1,
                    }
                }
            }
        }
        TournamentSummary {
            games,
            standings,
            outcome_kinds,
        }
    }

    /// Rebuilds the summary from the transcript files in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, TournamentError> {
        let rows = load_transcripts(dir)?.iter().map(GameRow::from_transcript).collect();
        Ok(TournamentSummary::from_rows(rows))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary always serializes")
    }
}

/// Loads every `*.jsonl` transcript in `dir`, sorted by file name.
pub fn load_transcripts(dir: &Path) -> Result<Vec<Transcript>, TournamentError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            Transcript::read_from(&p).map_err(|e| TournamentError::Transcript {
                path: p.clone(),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn transcript_path(out: &Path, game_id: &str) -> PathBuf {
    out.join(format!("{game_id}.jsonl"))
}

fn play(game: &ScheduledGame, plan: &TournamentPlan, ladder: &Arc<Ladder>) -> GameRow {
    let build = |side: Side| {
        game.agents
            .get(side)
            .build(ladder.clone(), agent_seed(game.seed, side), plan.config.max_retries)
    };
    let (mut a, mut b) = match (build(Side::A), build(Side::B)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return GameRow::failed(game, e.to_string()),
    };
    let setup = GameSetup::new(game.game_id.clone(), game.scenario.clone(), game.seed)
        .with_config(plan.config.clone())
        .with_ladder(ladder.clone());
    let path = transcript_path(&plan.out, &game.game_id);
    let result = JsonlWriter::create(&path)
        .map_err(|e| e.to_string())
        .and_then(|mut sink| run_game(a.as_mut(), b.as_mut(), &setup, &mut sink).map_err(|e| e.to_string()));
    match result {
        Ok(t) => {
            let row = GameRow::from_transcript(&t);
            info!(game = %game.game_id, turns = row.turns, "game finished");
            row
        }
        Err(e) => {
            warn!(game = %game.game_id, error = %e, "game failed");
            GameRow::failed(game, e)
        }
    }
}

/// Runs every scheduled game on a pool of `plan.parallel` threads, writing
/// `<out>/<game_id>.jsonl` per game and `<out>/summary.json` at the end.
/// A failing game is recorded as aborted and the others continue.
pub fn run_tournament(plan: &TournamentPlan) -> Result<TournamentSummary, TournamentError> {
    plan.config
        .validate()
        .map_err(|e| TournamentError::Plan(e.to_string()))?;
    let ladder = plan.load_ladder()?;
    let games = schedule(plan)?;
    for spec in &plan.agents {
        spec.check(&ladder)
            .map_err(|e| TournamentError::Plan(format!("agent {spec}: {e}")))?;
    }
    std::fs::create_dir_all(&plan.out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.parallel.max(1))
        .build()
        .map_err(|e| TournamentError::Plan(e.to_string()))?;
    let rows: Vec<GameRow> = pool.install(|| games.par_iter().map(|g| play(g, plan, &ladder)).collect());
    let summary = TournamentSummary::from_rows(rows);
    std::fs::write(plan.out.join("summary.json"), summary.to_json())?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specs(names: &[&str]) -> Vec<AgentSpec> {
        names.iter().map(|s| s.parse().unwrap()).collect()
    }

    #[test]
    fn default_plan_for_three_agents_has_21_games_and_14_appearances() {
        let plan = TournamentPlan::new(specs(&["constant:0", "mirror", "climber:1"]));
        let games = schedule(&plan).unwrap();
        assert_eq!(games.len(), 21);
        for agent in &plan.agents {
            let seats: usize = games
                .iter()
                .map(|g| (g.agents.a == *agent) as usize + (g.agents.b == *agent) as usize)
                .sum();
            assert_eq!(seats, 14);
        }
        assert_eq!(games.iter().filter(|g| g.is_self_play()).count(), 3);
    }

    #[test]
    fn single_agent_single_scenario_is_one_self_play_game() {
        let mut plan = TournamentPlan::new(specs(&["mirror"]));
        plan.scenarios = vec!["v7_alliance".into()];
        let games = schedule(&plan).unwrap();
        assert_eq!(games.len(), 1);
        assert!(games[0].is_self_play());
    }

    #[test]
    fn both_orders_swap_roles_on_the_same_scenario() {
        let mut plan = TournamentPlan::new(specs(&["constant:0", "mirror"]));
        plan.pairing = PairingRule {
            orders: Orders::Both,
            games_per_pair: None,
            self_play_games: 0,
        };
        let games = schedule(&plan).unwrap();
        assert_eq!(games.len(), 14);
        for pair in games.chunks(2) {
            assert_eq!(pair[0].agents.a, pair[1].agents.b);
            assert_eq!(pair[0].agents.b, pair[1].agents.a);
            assert_eq!(pair[0].scenario.id, pair[1].scenario.id);
        }
    }

    #[test]
    fn seeds_and_ids_are_unique_and_reproducible() {
        let plan = TournamentPlan::new(specs(&["constant:0", "mirror", "random"]));
        let a = schedule(&plan).unwrap();
        let b = schedule(&plan).unwrap();
        assert_eq!(a, b);
        let seeds: BTreeSet<u64> = a.iter().map(|g| g.seed).collect();
        assert_eq!(seeds.len(), a.len());
    }

    #[test]
    fn rejects_empty_or_duplicate_rosters() {
        assert!(schedule(&TournamentPlan::new(vec![])).is_err());
        assert!(schedule(&TournamentPlan::new(specs(&["mirror", "mirror"]))).is_err());
    }

    #[test]
    fn plan_parses_with_defaults() {
        let plan: TournamentPlan = serde_json::from_str(r#"{"agents": ["mirror", "constant:100"]}"#).unwrap();
        assert_eq!(plan.scenarios.len(), 7);
        assert_eq!(plan.pairing, PairingRule::default());
        assert_eq!(plan.parallel, 1);
    }
}
