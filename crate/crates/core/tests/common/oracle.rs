//! Brute-force recount of the analytics metrics. Reads the raw JSONL through
//! `serde_json::Value` and shares no code with the library.

use std::collections::BTreeMap;
use std::path::Path;

use escalation_core::analytics::{
    ByModel, ConsistencyStats, DeterrenceStats, ImproveStats, PredictionStats, ThresholdStats,
};
use escalation_core::{EngineConfig, Transcript};
use serde_json::Value;

use super::play;

pub const MATCHUPS: [(&str, &str); 8] = [
    ("random:1", "deceiver:70:450"),
    ("random:2", "random:3"),
    ("climber:2", "mirror"),
    ("deceiver:350:125", "random:1"),
    ("constant:850", "climber:1"),
    ("mirror", "random:2"),
    ("deceiver:175:850", "deceiver:70:175"),
    ("random:3", "constant:450"),
];
pub const SCENARIOS: [&str; 4] = [
    "v7_alliance",
    "v10_standoff_crisis",
    "v9_regime_survival",
    "v7_resource",
];

/// Random scripted games until exactly `turns` turns; the last game is cut
/// short (and loses its summary) if it would overshoot.
pub fn corpus(turns: usize) -> Vec<Transcript> {
    let mut out = Vec::new();
    let mut total = 0;
    let mut i = 0;
    while total < turns {
        let (a, b) = MATCHUPS[i % MATCHUPS.len()];
        let mut t = play(
            a,
            b,
            SCENARIOS[i % SCENARIOS.len()],
            1000 + i as u64,
            EngineConfig::default(),
        );
        t.header.game_id = format!("oracle-{i:03}");
        if total + t.turns.len() > turns {
            t.turns.truncate(turns - total);
            t.summary = None;
        }
        total += t.turns.len();
        out.push(t);
        i += 1;
    }
    out
}

pub fn raw(corpus: &[Transcript]) -> Vec<Vec<Value>> {
    corpus
        .iter()
        .map(|t| t.to_jsonl().lines().map(|l| serde_json::from_str(l).unwrap()).collect())
        .collect()
}

pub fn ladder_values() -> BTreeMap<String, i64> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/ladder.json");
    let rungs: Vec<Value> = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    rungs
        .iter()
        .map(|r| (r["name"].as_str().unwrap().to_string(), r["value"].as_i64().unwrap()))
        .collect()
}

pub struct Game<'a> {
    pub header: &'a Value,
    pub turns: Vec<&'a Value>,
    pub summary: Option<&'a Value>,
}

pub fn split(lines: &[Value]) -> Game<'_> {
    Game {
        header: lines.iter().find(|l| l["type"] == "header").unwrap(),
        turns: lines.iter().filter(|l| l["type"] == "turn").collect(),
        summary: lines.iter().find(|l| l["type"] == "summary"),
    }
}

pub const SIDES: [&str; 2] = ["a", "b"];

pub fn model<'a>(g: &Game<'a>, side: usize) -> &'a str {
    g.header["agents"][SIDES[side]].as_str().unwrap()
}

pub fn int(v: &Value) -> i64 {
    v.as_i64().unwrap()
}

/// Tallies raw counters per model and overall, then finishes each.
pub fn by_model<C: Default + Clone, T>(
    entries: Vec<(String, C)>,
    merge: fn(&mut C, &C),
    finish: fn(&C) -> T,
) -> ByModel<T> {
    let mut overall = C::default();
    let mut per: BTreeMap<String, C> = BTreeMap::new();
    for (m, c) in &entries {
        merge(&mut overall, c);
        merge(per.entry(m.clone()).or_default(), c);
    }
    ByModel {
        overall: finish(&overall),
        per_model: per.iter().map(|(k, v)| (k.clone(), finish(v))).collect(),
    }
}

pub fn add5(x: &mut [i64; 5], y: &[i64; 5]) {
    for i in 0..5 {
        x[i] += y[i];
    }
}

pub fn oracle_prediction(games: &[Game], values: &BTreeMap<String, i64>) -> ByModel<PredictionStats> {
    let mut entries = Vec::new();
    for g in games {
        for t in &g.turns {
            for s in 0..2 {
                let predicted = values[t["forecast"][SIDES[s]]["predicted_action"].as_str().unwrap()];
                let actual = int(&t["action"][SIDES[1 - s]]["executed_value"]);
                let e = actual - predicted;
                entries.push((
                    model(g, s).to_string(),
                    [1, e.abs(), e, (e.abs() <= 50) as i64, (e >= 200) as i64],
                ));
            }
        }
    }
    by_model(entries, add5, |c| {
        if c[0] == 0 {
            return PredictionStats::default();
        }
        let n = c[0] as f64;
        PredictionStats {
            n: c[0] as u64,
            mae: c[1] as f64 / n,
            bias: c[2] as f64 / n,
            exact_rate: c[3] as f64 / n,
            severe_under_rate: c[4] as f64 / n,
        }
    })
}

pub fn oracle_consistency(games: &[Game]) -> ByModel<ConsistencyStats> {
    let mut entries = Vec::new();
    for g in games {
        for t in &g.turns {
            for s in 0..2 {
                let gap = int(&t["action"][SIDES[s]]["chosen_value"]) - int(&t["signal"][SIDES[s]]["signal_value"]);
                let class = if gap > 50 {
                    [0, 1, 0]
                } else if gap < -50 {
                    [0, 0, 1]
                } else {
                    [1, 0, 0]
                };
                entries.push((model(g, s).to_string(), [1, class[0], class[1], class[2], gap]));
            }
        }
    }
    by_model(entries, add5, |c| {
        let n = c[0] as f64;
        ConsistencyStats {
            n: c[0] as u64,
            match_rate: c[1] as f64 / n,
            escalated_rate: c[2] as f64 / n,
            de_escalated_rate: c[3] as f64 / n,
            avg_gap: c[4] as f64 / n,
        }
    })
}

pub fn oracle_thresholds(games: &[Game]) -> ByModel<ThresholdStats> {
    let mut entries = Vec::new();
    for g in games {
        for s in 0..2 {
            let max = g
                .turns
                .iter()
                .map(|t| int(&t["action"][SIDES[s]]["executed_value"]))
                .max()
                .unwrap_or(i64::MIN);
            let c = [
                1,
                (max >= 125) as i64,
                (max >= 450) as i64,
                (max >= 850) as i64,
                (max >= 1000) as i64,
            ];
            entries.push((model(g, s).to_string(), c));
        }
    }
    by_model(entries, add5, |c| {
        let counts = [c[1] as u64, c[2] as u64, c[3] as u64, c[4] as u64];
        let fractions = counts.map(|k| if c[0] == 0 { 0.0 } else { k as f64 / c[0] as f64 });
        ThresholdStats {
            games: c[0] as u64,
            counts,
            fractions,
        }
    })
}

pub fn oracle_deterrence(games: &[Game], values: &BTreeMap<String, i64>) -> ByModel<DeterrenceStats> {
    let mut ordered: Vec<i64> = values.values().copied().collect();
    ordered.sort();
    let rung = |v: i64| ordered.iter().position(|&x| x == v).unwrap();
    let mut entries = Vec::new();
    for g in games {
        for i in 0..g.turns.len().saturating_sub(1) {
            for s in 0..2 {
                if int(&g.turns[i]["action"][SIDES[s]]["executed_value"]) < 450 {
                    continue;
                }
                let now = int(&g.turns[i]["action"][SIDES[1 - s]]["executed_value"]);
                let next = int(&g.turns[i + 1]["action"][SIDES[1 - s]]["executed_value"]);
                entries.push((model(g, s).to_string(), [1, (rung(next) < rung(now)) as i64, 0, 0, 0]));
            }
        }
    }
    by_model(entries, add5, |c| DeterrenceStats {
        nuclear_turns: c[0] as u64,
        caused_deescalation: c[1] as u64,
        rate: if c[0] == 0 { 0.0 } else { c[1] as f64 / c[0] as f64 },
    })
}

pub fn series(g: &Game) -> Vec<f64> {
    let mut s = vec![g.header["scenario"]["starting_balance"].as_f64().unwrap()];
    s.extend(
        g.turns
            .iter()
            .map(|t| t["game_state"]["balance_after"].as_f64().unwrap()),
    );
    s
}

pub fn sign(side: usize) -> f64 {
    if side == 0 {
        1.0
    } else {
        -1.0
    }
}

/// (lead changes, comebacks, swings, improve-when-behind per model).
pub fn oracle_trajectory(games: &[Game]) -> (Vec<u32>, Vec<bool>, Vec<f64>, ByModel<ImproveStats>) {
    let (mut leads, mut comebacks, mut swings, mut entries) = (vec![], vec![], vec![], vec![]);
    for g in games {
        let s = series(g);
        let nonzero: Vec<f64> = s.iter().copied().filter(|v| *v != 0.0).collect();
        leads.push(nonzero.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count() as u32);
        let hi = s.iter().copied().fold(f64::MIN, f64::max);
        let lo = s.iter().copied().fold(f64::MAX, f64::min);
        swings.push(hi - lo);
        let winner = g
            .summary
            .and_then(|x| x["victory"]["winner"].as_str())
            .map(|w| if w == "A" { 0 } else { 1 });
        comebacks.push(match winner {
            Some(w) => s.iter().any(|v| v * sign(w) <= -1.5) && s.last().unwrap() * sign(w) >= 3.0,
            None => false,
        });
        for side in 0..2 {
            let mut c = [0i64; 5];
            for i in 0..s.len() - 1 {
                let now = s[i] * sign(side);
                if now <= -0.5 {
                    c[0] += 1;
                    c[1] += (s[i + 1] * sign(side) > now) as i64;
                }
            }
            entries.push((model(g, side).to_string(), c));
        }
    }
    let improve = by_model(entries, add5, |c| ImproveStats {
        behind_turns: c[0] as u64,
        improved: c[1] as u64,
        rate: if c[0] == 0 { 0.0 } else { c[1] as f64 / c[0] as f64 },
    });
    (leads, comebacks, swings, improve)
}

/// Every comparison the oracle supports, as (name, equal) pairs.
pub fn compare_all(corpus: &[Transcript]) -> Vec<(&'static str, bool)> {
    use escalation_core::analytics::*;
    let lines = raw(corpus);
    let games: Vec<Game> = lines.iter().map(|l| split(l)).collect();
    let values = ladder_values();
    let traj = trajectory_metrics(corpus).unwrap();
    let (leads, comebacks, swings, improve) = oracle_trajectory(&games);
    vec![
        (
            "prediction",
            prediction_metrics(corpus).unwrap() == oracle_prediction(&games, &values),
        ),
        (
            "consistency",
            consistency_metrics(corpus).unwrap() == oracle_consistency(&games),
        ),
        (
            "thresholds",
            threshold_crossings(corpus).unwrap() == oracle_thresholds(&games),
        ),
        (
            "deterrence",
            deterrence_metrics(corpus).unwrap() == oracle_deterrence(&games, &values),
        ),
        (
            "trajectory",
            traj.games.iter().map(|g| g.lead_changes).collect::<Vec<_>>() == leads
                && traj.games.iter().map(|g| g.comeback).collect::<Vec<_>>() == comebacks
                && traj.games.iter().map(|g| g.max_swing).collect::<Vec<_>>() == swings
                && traj.total_lead_changes == leads.iter().map(|&x| x as u64).sum::<u64>()
                && traj.comebacks == comebacks.iter().filter(|&&c| c).count() as u64
                && traj.improve_when_behind == improve,
        ),
    ]
}
