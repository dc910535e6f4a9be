use std::collections::BTreeMap;
use std::path::Path;

use escalation_core::tournament::{
    load_transcripts, run_tournament, GameStatus, Orders, PairingRule, TournamentPlan, TournamentSummary,
};
use escalation_core::AgentSpec;
use serde_json::Value;

fn plan(agents: &[&str], out: &Path, parallel: usize) -> TournamentPlan {
    let mut plan = TournamentPlan::new(agents.iter().map(|a| a.parse::<AgentSpec>().unwrap()).collect());
    plan.master_seed = 2026;
    plan.parallel = parallel;
    plan.out = out.to_path_buf();
    plan
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn parallelism_does_not_change_a_single_byte() {
    let roster = ["constant:100", "deceiver:70:175", "random"];
    let one = tempfile::tempdir().unwrap();
    let four = tempfile::tempdir().unwrap();
    let s1 = run_tournament(&plan(&roster, one.path(), 1)).unwrap();
    let s4 = run_tournament(&plan(&roster, four.path(), 4)).unwrap();
    assert_eq!(s1, s4);
    let (f1, f4) = (files(one.path()), files(four.path()));
    assert_eq!(f1.len(), 22);
    assert_eq!(f1, f4);
    for t in load_transcripts(one.path()).unwrap() {
        t.verify_hash().unwrap();
        assert!(t.replay().unwrap().is_faithful());
    }
}

#[test]
fn failing_agent_is_aborted_while_the_rest_complete() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = plan(&["failing:2", "mirror", "constant:0"], dir.path(), 3);
    p.pairing = PairingRule {
        orders: Orders::Both,
        games_per_pair: Some(1),
        self_play_games: 0,
    };
    let summary = run_tournament(&p).unwrap();
    assert_eq!(summary.games.len(), 6);
    for g in &summary.games {
        let involved = g.agents.a == "failing:2" || g.agents.b == "failing:2";
        assert_eq!(g.status == GameStatus::Aborted, involved, "{}", g.game_id);
        if involved {
            assert_eq!(g.turns, 1);
            assert!(g.error.is_some());
        }
    }
    assert_eq!(summary.standings["failing:2"].aborted, 4);
    assert_eq!(summary.standings["mirror"].aborted, 2);
    assert_eq!(summary.outcome_kinds["aborted"], 4);
}

/// Recounts wins/losses/draws from the raw summary lines of every transcript.
fn recount(dir: &Path) -> BTreeMap<String, [u32; 4]> {
    let mut out: BTreeMap<String, [u32; 4]> = BTreeMap::new();
    for (name, bytes) in files(dir) {
        if !name.ends_with(".jsonl") {
            continue;
        }
        let text = String::from_utf8(bytes).unwrap();
        let summary: Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
        assert_eq!(summary["type"], "summary");
        let a = summary["agents"]["a"].as_str().unwrap().to_string();
        let b = summary["agents"]["b"].as_str().unwrap().to_string();
        let winner = summary["victory"]["winner"].as_str().map(str::to_string);
        if a == b {
            out.entry(a).or_default()[3] += 1;
            continue;
        }
        for (me, side) in [(a, "A"), (b, "B")] {
            let slot = match &winner {
                Some(w) if w == side => 0,
                Some(_) => 1,
                None => 2,
            };
            out.entry(me).or_default()[slot] += 1;
        }
    }
    out
}

#[test]
fn summary_matches_a_recount_of_the_raw_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_tournament(&plan(&["constant:100", "climber:1", "random:9"], dir.path(), 2)).unwrap();
    let expected = recount(dir.path());
    for (agent, s) in &summary.standings {
        assert_eq!([s.wins, s.losses, s.draws, s.self_play], expected[agent], "{agent}");
        // 12 rival games plus one self-play game counted once
        assert_eq!(s.games, 13);
    }
    assert_eq!(TournamentSummary::from_dir(dir.path()).unwrap(), summary);
    let on_disk: TournamentSummary =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, summary);
}
