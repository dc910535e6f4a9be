//! Shared fixtures for the benchmarks.

use escalation_core::engine::GameSetup;
use escalation_core::scenarios::load_scenario;
use escalation_core::transcript::NullSink;
use escalation_core::{run_game, AgentSpec, Ladder, Transcript};

/// Plays one scripted game with default engine settings.
pub fn scripted_game(a: &str, b: &str, scenario: &str, seed: u64) -> Transcript {
    let ladder = Ladder::canonical();
    let spec = |s: &str| s.parse::<AgentSpec>().expect("valid agent spec");
    let mut agent_a = spec(a)
        .build(ladder.clone(), seed, 0)
        .expect("scripted agents always build");
    let mut agent_b = spec(b)
        .build(ladder, seed + 1, 0)
        .expect("scripted agents always build");
    let setup = GameSetup::new(
        format!("bench-{seed}"),
        load_scenario(scenario).expect("canonical id"),
        seed,
    );
    run_game(agent_a.as_mut(), agent_b.as_mut(), &setup, &mut NullSink).expect("scripted games never fail")
}

/// A corpus of random-walk games, roughly `games * 20` turns.
pub fn corpus(games: u64) -> Vec<Transcript> {
    (0..games)
        .map(|i| scripted_game("random", "deceiver:70:175", "v9_regime_survival", i))
        .collect()
}
