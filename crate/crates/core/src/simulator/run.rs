use std::collections::BTreeMap;

use super::{Assertion, Command, ReplicaId, ReplicaState, Scenario, WriteMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub write_mode: WriteMode,
}

/// Text report of one run: event lines, `PASS`/`FAIL` lines for assertions,
/// a dump of every replica's store, and a summary line.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunReport {
    pub lines: Vec<String>,
    pub passed: usize,
    pub failed: usize,
    pub replicas: Vec<ReplicaState>,
}

impl RunReport {
    pub fn is_success(&self) -> bool {
        self.failed == 0
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    pub fn replica(&self, id: &str) -> Option<&ReplicaState> {
        self.replicas.iter().find(|r| r.id().as_str() == id)
    }

    fn pass(&mut self, line: String) {
        self.passed += 1;
        self.lines.push(format!("PASS {line}"));
    }

    fn fail(&mut self, line: String) {
        self.failed += 1;
        self.lines.push(format!("FAIL {line}"));
    }
}

/// Executes the scenario in order. Each command is one logical tick; the
/// tick number prefixes its report line and is the logical time of any
/// replica event it causes.
pub fn run_scenario(scenario: &Scenario, options: RunOptions) -> RunReport {
    let mut replicas: BTreeMap<ReplicaId, ReplicaState> = scenario
        .replicas
        .iter()
        .map(|id| (id.clone(), ReplicaState::new(id.clone())))
        .collect();
    let mut report = RunReport::default();

    for (tick, (_, command)) in (1u64..).zip(&scenario.commands) {
        match command {
            Command::Update {
                replica,
                key,
                value,
            } => {
                let state = replicas.get_mut(replica).expect("validated at load");
                let out = state.apply_update(key, value, tick, options.write_mode);
                report.lines.push(format!(
                    "{tick} update {replica} {key} {value} clock={} replaced={}",
                    out.clock, out.replaced
                ));
            }
            Command::Sync { src, dst, key } => {
                let source = replicas[src].clone();
                let target = replicas.get_mut(dst).expect("validated at load");
                match ReplicaState::apply_sync(&source, target, key, tick) {
                    None => report
                        .lines
                        .push(format!("{tick} sync {src} {dst} {key} absent-at-source")),
                    Some(out) => {
                        report.lines.push(format!(
                            "{tick} sync {src} {dst} {key} incoming={} discarded={} replaced={} added={} siblings={}",
                            out.incoming,
                            out.discarded,
                            out.replaced,
                            out.added,
                            target.get(key).map_or(0, |o| o.len()),
                        ));
                        for anomaly in out.anomalies {
                            report
                                .lines
                                .push(format!("{tick} anomaly {dst} {key} {anomaly}"));
                        }
                    }
                }
            }
            Command::Read { replica, key } => {
                let line = match replicas[replica].get(key) {
                    None => format!("{tick} read {replica} {key} absent"),
                    Some(o) => format!(
                        "{tick} read {replica} {key} siblings={} {}",
                        o.len(),
                        o.render()
                    ),
                };
                report.lines.push(line);
            }
            Command::Prune { replica, key } => {
                let bounds = scenario.bounds.expect("validated at load");
                let state = replicas.get_mut(replica).expect("validated at load");
                match state.apply_prune(key, &bounds, tick) {
                    None => report.fail(format!("{tick} prune {replica} {key}: key absent")),
                    Some(out) => {
                        let removed: Vec<String> =
                            out.removed.iter().map(usize::to_string).collect();
                        report.lines.push(format!(
                            "{tick} prune {replica} {key} removed={} collapsed={} siblings={}",
                            removed.join(","),
                            out.collapsed,
                            state.get(key).map_or(0, |o| o.len()),
                        ));
                        for anomaly in out.anomalies {
                            report
                                .lines
                                .push(format!("{tick} anomaly {replica} {key} {anomaly}"));
                        }
                        for i in out.model_mismatches {
                            report.fail(format!(
                                "{tick} prune {replica} {key}: prune model disagrees on sibling {i}"
                            ));
                        }
                    }
                }
            }
            Command::Expect(assertion) => {
                let verdict = check(&replicas, assertion);
                match verdict {
                    Ok(()) => report.pass(format!("{tick} {assertion}")),
                    Err(why) => report.fail(format!("{tick} {assertion}: {why}")),
                }
            }
        }
    }

    for (id, state) in scenario.replicas.iter().map(|id| (id, &replicas[id])) {
        for (key, object) in state.store() {
            report
                .lines
                .push(format!("store {id} {key} {}", object.render()));
        }
    }
    report.lines.push(format!(
        "summary commands={} pass={} fail={}",
        scenario.commands.len(),
        report.passed,
        report.failed
    ));
    report.replicas = scenario
        .replicas
        .iter()
        .filter_map(|id| replicas.remove(id))
        .collect();
    report
}

fn check(
    replicas: &BTreeMap<ReplicaId, ReplicaState>,
    assertion: &Assertion,
) -> Result<(), String> {
    let object = |replica: &ReplicaId, key: &str| replicas[replica].get(key);
    match assertion {
        Assertion::Siblings {
            replica,
            key,
            count,
        } => {
            let got = object(replica, key).map_or(0, |o| o.len());
            if got == *count {
                Ok(())
            } else {
                Err(format!("got {got}"))
            }
        }
        Assertion::Clock {
            replica,
            key,
            clock,
        } => {
            let o = object(replica, key).ok_or("key absent")?;
            let wanted = clock.to_string();
            if o.siblings().iter().any(|s| s.clock.to_string() == wanted) {
                Ok(())
            } else {
                let got: Vec<String> = o.siblings().iter().map(|s| s.clock.to_string()).collect();
                Err(format!("got {}", got.join(" ")))
            }
        }
        Assertion::Compare {
            replica,
            key,
            left,
            right,
            ordering,
        } => {
            let o = object(replica, key).ok_or("key absent")?;
            let sib = |i: usize| {
                o.siblings()
                    .get(i)
                    .ok_or_else(|| format!("no sibling {i}, have {}", o.len()))
            };
            let got = sib(*left)?.clock.compare(&sib(*right)?.clock);
            if got == *ordering {
                Ok(())
            } else {
                Err(format!("got {got}"))
            }
        }
    }
}
