use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vclock::oracle::{random_history, replay_clocks, EventKind};
use vclock::simulator::{run_scenario, ReplicaId, ReplicaState, RunOptions, Scenario, WriteMode};

/// Random updates and syncs, then one sync per ordered replica pair for
/// every written key, in shuffled order.
fn converging_script(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=5);
    let names: Vec<String> = (1..=n).map(|i| format!("r{i}")).collect();
    let mut text = format!("replicas {}\n", names.join(" "));
    let mut written = BTreeSet::new();
    for i in 0..rng.gen_range(1..40) {
        let r = &names[rng.gen_range(0..n)];
        let key = ["a", "b", "c"][rng.gen_range(0..3)];
        if written.is_empty() || rng.gen_bool(0.4) {
            text.push_str(&format!("update {r} {key} v{i}\n"));
            written.insert(key);
        } else {
            let d = &names[rng.gen_range(0..n)];
            let key = *written.iter().next().unwrap();
            if d != r {
                text.push_str(&format!("sync {r} {d} {key}\n"));
            }
        }
    }
    let mut suffix = Vec::new();
    for key in &written {
        for s in &names {
            for d in &names {
                if s != d {
                    suffix.push(format!("sync {s} {d} {key}\n"));
                }
            }
        }
    }
    for i in (1..suffix.len()).rev() {
        suffix.swap(i, rng.gen_range(0..=i));
    }
    text.extend(suffix);
    text
}

fn states_text(states: &[ReplicaState]) -> Vec<String> {
    states
        .iter()
        .map(|s| {
            s.store()
                .iter()
                .map(|(k, o)| format!("{k}={}", o.render()))
                .collect::<Vec<_>>()
                .join("|")
        })
        .collect()
}

#[test]
fn full_sync_suffix_converges() {
    for mode in [WriteMode::Collapse, WriteMode::Blind] {
        for seed in 0..200 {
            let text = converging_script(seed);
            let scenario = Scenario::parse(&text).unwrap();
            let report = run_scenario(&scenario, RunOptions { write_mode: mode });
            let texts = states_text(&report.replicas);
            assert!(
                texts.windows(2).all(|w| w[0] == w[1]),
                "seed {seed}:\n{text}\n{}",
                report.render()
            );
        }
    }
}

#[test]
fn reports_are_reproducible() {
    for seed in 0..50 {
        let scenario = Scenario::parse(&converging_script(seed)).unwrap();
        let one = run_scenario(&scenario, RunOptions::default()).render();
        let two = run_scenario(&scenario, RunOptions::default()).render();
        assert_eq!(one, two);
    }
}

#[test]
fn siblings_stay_an_antichain_and_match_lineage() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut replicas: Vec<ReplicaState> = (0..3)
            .map(|i| ReplicaState::new(ReplicaId::new(format!("r{i}")).unwrap()))
            .collect();
        for step in 1..60u64 {
            let key = ["x", "y"][rng.gen_range(0..2)];
            let r = rng.gen_range(0..3);
            if rng.gen_bool(0.5) {
                let mode = if rng.gen_bool(0.5) {
                    WriteMode::Blind
                } else {
                    WriteMode::Collapse
                };
                replicas[r].apply_update(key, &format!("v{step}"), step, mode);
            } else {
                let d = (r + rng.gen_range(1..3)) % 3;
                let src = replicas[r].clone();
                if let Some(out) = ReplicaState::apply_sync(&src, &mut replicas[d], key, step) {
                    assert!(out.anomalies.is_empty());
                }
            }
            for state in &replicas {
                for object in state.store().values() {
                    assert!(object.is_antichain(), "seed {seed} step {step}");
                    for s in object.siblings() {
                        assert_eq!(s.clock, s.lineage);
                    }
                }
            }
        }
    }
}

#[test]
fn clocks_agree_with_oracle_replay() {
    // Each oracle event becomes an update; a receive is a sync from the
    // sender followed by an update, valid when the sender's event is its
    // latest one.
    let mut checked = 0;
    for seed in 0..2000 {
        let h = random_history(seed, 8, 3);
        let mut latest = std::collections::BTreeMap::new();
        let usable = h.events().iter().all(|e| {
            let ok = match e.kind {
                EventKind::Receive { from } => latest.get(&h.events()[from.0].actor) == Some(&from),
                EventKind::LocalUpdate => true,
            };
            latest.insert(e.actor.clone(), e.id);
            ok
        });
        if !usable {
            continue;
        }
        let mut replicas: std::collections::BTreeMap<_, _> = h
            .actors()
            .iter()
            .map(|a| {
                (
                    a.clone(),
                    ReplicaState::new(ReplicaId::new(a.as_str()).unwrap()),
                )
            })
            .collect();
        let expected = replay_clocks(&h);
        let mut step = 0;
        for (e, want) in h.events().iter().zip(&expected) {
            if let EventKind::Receive { from } = e.kind {
                step += 1;
                let src = replicas[&h.events()[from.0].actor].clone();
                ReplicaState::apply_sync(&src, replicas.get_mut(&e.actor).unwrap(), "k", step);
            }
            step += 1;
            let out = replicas.get_mut(&e.actor).unwrap().apply_update(
                "k",
                "v",
                step,
                WriteMode::Collapse,
            );
            assert!(
                out.clock.equal(want),
                "seed {seed} {}: {} vs {want}",
                e.id,
                out.clock
            );
        }
        checked += 1;
    }
    assert!(checked >= 50, "only {checked} usable histories");
}

#[test]
fn bundled_scenarios_pass() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let report = run_scenario(&Scenario::parse(&text).unwrap(), RunOptions::default());
        assert!(
            report.is_success(),
            "{}:\n{}",
            path.display(),
            report.render()
        );
        seen += 1;
    }
    assert!(seen >= 2);
}
