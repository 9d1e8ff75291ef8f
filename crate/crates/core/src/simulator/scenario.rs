//! Line-oriented scenario scripts.
//!
//! ```text
//! # two replicas write the same key, then exchange it
//! replicas r1 r2
//! bounds 1 4 10 100
//! update r1 k x
//! update r2 k y
//! sync r1 r2 k
//! expect siblings r2 k 2
//! ```
//!
//! A token starting with `#` comments out the rest of its line. The whole
//! script is validated before anything runs.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::ReplicaId;
use crate::clock::{
    ActorIdError, ClockOrdering, ParseOrderingError, PruneBounds, PruneBoundsError, VClock,
};
use crate::codec::{decode, DecodeError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Assertion {
    Siblings {
        replica: ReplicaId,
        key: String,
        count: usize,
    },
    Clock {
        replica: ReplicaId,
        key: String,
        clock: VClock,
    },
    Compare {
        replica: ReplicaId,
        key: String,
        left: usize,
        right: usize,
        ordering: ClockOrdering,
    },
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assertion::Siblings {
                replica,
                key,
                count,
            } => {
                write!(f, "expect siblings {replica} {key} {count}")
            }
            Assertion::Clock {
                replica,
                key,
                clock,
            } => {
                write!(f, "expect clock {replica} {key} {clock}")
            }
            Assertion::Compare {
                replica,
                key,
                left,
                right,
                ordering,
            } => write!(
                f,
                "expect compare {replica} {key} {left} {right} {ordering}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Update {
        replica: ReplicaId,
        key: String,
        value: String,
    },
    Sync {
        src: ReplicaId,
        dst: ReplicaId,
        key: String,
    },
    Read {
        replica: ReplicaId,
        key: String,
    },
    Prune {
        replica: ReplicaId,
        key: String,
    },
    Expect(Assertion),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Scenario {
    pub replicas: Vec<ReplicaId>,
    pub bounds: Option<PruneBounds>,
    /// `(line number, command)` in script order.
    pub commands: Vec<(usize, Command)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ScenarioError {
    pub line: usize,
    pub kind: ScenarioErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioErrorKind {
    #[error("unknown command {0:?}")]
    UnknownCommand(String),
    #[error("`{command}` takes {expected} arguments, got {got}")]
    Arity {
        command: String,
        expected: usize,
        got: usize,
    },
    #[error("`{0}` may only appear once")]
    Repeated(&'static str),
    #[error("`replicas` must be declared before this command")]
    NoReplicas,
    #[error("replica {0} declared twice")]
    DuplicateReplica(String),
    #[error("unknown replica {0}")]
    UnknownReplica(String),
    #[error("key {0} is never written before this point")]
    UnknownKey(String),
    #[error("invalid replica name: {0}")]
    InvalidReplica(#[from] ActorIdError),
    #[error("sync source and destination are both {0}")]
    SelfSync(String),
    #[error("`prune` needs a `bounds` line earlier in the script")]
    NoBounds,
    #[error("invalid bounds: {0}")]
    InvalidBounds(#[from] PruneBoundsError),
    #[error("{0:?} is not a non-negative integer")]
    InvalidNumber(String),
    #[error("invalid clock: {0}")]
    InvalidClock(#[from] DecodeError),
    #[error("{0}")]
    InvalidOrdering(#[from] ParseOrderingError),
}

struct Parser {
    scenario: Scenario,
    declared: BTreeSet<ReplicaId>,
    known_keys: BTreeSet<String>,
    saw_replicas: bool,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut p = Parser {
            scenario: Scenario::default(),
            declared: BTreeSet::new(),
            known_keys: BTreeSet::new(),
            saw_replicas: false,
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let tokens: Vec<&str> = raw
                .split_whitespace()
                .take_while(|t| !t.starts_with('#'))
                .collect();
            if tokens.is_empty() {
                continue;
            }
            if let Some(cmd) = p
                .line(&tokens)
                .map_err(|kind| ScenarioError { line, kind })?
            {
                p.scenario.commands.push((line, cmd));
            }
        }
        Ok(p.scenario)
    }
}

fn arity(tokens: &[&str], expected: usize) -> Result<(), ScenarioErrorKind> {
    let got = tokens.len() - 1;
    if got != expected {
        return Err(ScenarioErrorKind::Arity {
            command: tokens[..tokens.len().min(2)].join(" "),
            expected,
            got,
        });
    }
    Ok(())
}

fn number(s: &str) -> Result<u64, ScenarioErrorKind> {
    if !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ScenarioErrorKind::InvalidNumber(s.to_owned()));
    }
    s.parse()
        .map_err(|_| ScenarioErrorKind::InvalidNumber(s.to_owned()))
}

fn index(s: &str) -> Result<usize, ScenarioErrorKind> {
    usize::try_from(number(s)?).map_err(|_| ScenarioErrorKind::InvalidNumber(s.to_owned()))
}

impl Parser {
    fn replica(&self, name: &str) -> Result<ReplicaId, ScenarioErrorKind> {
        if !self.saw_replicas {
            return Err(ScenarioErrorKind::NoReplicas);
        }
        let id = ReplicaId::new(name)?;
        if !self.declared.contains(&id) {
            return Err(ScenarioErrorKind::UnknownReplica(name.to_owned()));
        }
        Ok(id)
    }

    fn known_key(&self, key: &str) -> Result<String, ScenarioErrorKind> {
        if !self.known_keys.contains(key) {
            return Err(ScenarioErrorKind::UnknownKey(key.to_owned()));
        }
        Ok(key.to_owned())
    }

    fn line(&mut self, t: &[&str]) -> Result<Option<Command>, ScenarioErrorKind> {
        let cmd = match t[0] {
            "replicas" => {
                if self.saw_replicas {
                    return Err(ScenarioErrorKind::Repeated("replicas"));
                }
                self.saw_replicas = true;
                for name in &t[1..] {
                    let id = ReplicaId::new(*name)?;
                    if !self.declared.insert(id.clone()) {
                        return Err(ScenarioErrorKind::DuplicateReplica(name.to_string()));
                    }
                    self.scenario.replicas.push(id);
                }
                return Ok(None);
            }
            "bounds" => {
                arity(t, 4)?;
                if self.scenario.bounds.is_some() {
                    return Err(ScenarioErrorKind::Repeated("bounds"));
                }
                let small = index(t[1])?;
                let large = index(t[2])?;
                self.scenario.bounds = Some(PruneBounds::new(
                    small,
                    large,
                    number(t[3])?,
                    number(t[4])?,
                )?);
                return Ok(None);
            }
            "update" => {
                arity(t, 3)?;
                let replica = self.replica(t[1])?;
                self.known_keys.insert(t[2].to_owned());
                Command::Update {
                    replica,
                    key: t[2].to_owned(),
                    value: t[3].to_owned(),
                }
            }
            "sync" => {
                arity(t, 3)?;
                let src = self.replica(t[1])?;
                let dst = self.replica(t[2])?;
                if src == dst {
                    return Err(ScenarioErrorKind::SelfSync(t[1].to_owned()));
                }
                Command::Sync {
                    src,
                    dst,
                    key: self.known_key(t[3])?,
                }
            }
            "read" => {
                arity(t, 2)?;
                Command::Read {
                    replica: self.replica(t[1])?,
                    key: self.known_key(t[2])?,
                }
            }
            "prune" => {
                arity(t, 2)?;
                let replica = self.replica(t[1])?;
                let key = self.known_key(t[2])?;
                if self.scenario.bounds.is_none() {
                    return Err(ScenarioErrorKind::NoBounds);
                }
                Command::Prune { replica, key }
            }
            "expect" => Command::Expect(self.assertion(t)?),
            other => return Err(ScenarioErrorKind::UnknownCommand(other.to_owned())),
        };
        Ok(Some(cmd))
    }

    fn assertion(&self, t: &[&str]) -> Result<Assertion, ScenarioErrorKind> {
        let what = t.get(1).copied().unwrap_or("");
        let target = |t: &[&str]| -> Result<(ReplicaId, String), ScenarioErrorKind> {
            Ok((self.replica(t[2])?, self.known_key(t[3])?))
        };
        match what {
            "siblings" => {
                arity(t, 4)?;
                let (replica, key) = target(t)?;
                Ok(Assertion::Siblings {
                    replica,
                    key,
                    count: index(t[4])?,
                })
            }
            "clock" => {
                arity(t, 4)?;
                let (replica, key) = target(t)?;
                Ok(Assertion::Clock {
                    replica,
                    key,
                    clock: decode(t[4])?,
                })
            }
            "compare" => {
                arity(t, 6)?;
                let (replica, key) = target(t)?;
                Ok(Assertion::Compare {
                    replica,
                    key,
                    left: index(t[4])?,
                    right: index(t[5])?,
                    ordering: t[6].parse()?,
                })
            }
            other => Err(ScenarioErrorKind::UnknownCommand(format!("expect {other}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> ScenarioErrorKind {
        Scenario::parse(text).unwrap_err().kind
    }

    #[test]
    fn parses_full_grammar() {
        let s = Scenario::parse(
            "# header\n\
             replicas r1 r2\n\
             bounds 1 4 10 100\n\
             update r1 k v1   # trailing comment\n\
             sync r1 r2 k\n\
             read r2 k\n\
             prune r2 k\n\
             expect siblings r2 k 1\n\
             expect clock r2 k r1:1:1\n\
             expect compare r2 k 0 0 Equal\n",
        )
        .unwrap();
        assert_eq!(s.replicas.len(), 2);
        assert_eq!(s.bounds, Some(PruneBounds::new(1, 4, 10, 100).unwrap()));
        assert_eq!(s.commands.len(), 7);
        assert_eq!(s.commands[0].0, 4);
        assert!(matches!(s.commands[0].1, Command::Update { ref value, .. } if value == "v1"));
    }

    #[test]
    fn empty_script() {
        assert_eq!(Scenario::parse("").unwrap(), Scenario::default());
        assert_eq!(
            Scenario::parse("# nothing\n\n").unwrap(),
            Scenario::default()
        );
    }

    #[test]
    fn load_errors() {
        assert_eq!(err("update r1 k v"), ScenarioErrorKind::NoReplicas);
        assert_eq!(
            err("replicas r1\nupdate r9 k v"),
            ScenarioErrorKind::UnknownReplica("r9".into())
        );
        assert_eq!(
            err("replicas r1 r2\nsync r1 r2 k"),
            ScenarioErrorKind::UnknownKey("k".into())
        );
        assert_eq!(
            err("replicas r1\nupdate r1 k v\nprune r1 k"),
            ScenarioErrorKind::NoBounds
        );
        assert_eq!(
            err("replicas r1 r1"),
            ScenarioErrorKind::DuplicateReplica("r1".into())
        );
        assert_eq!(
            err("replicas r1\nreplicas r2"),
            ScenarioErrorKind::Repeated("replicas")
        );
        assert!(matches!(
            err("bounds 5 1 0 0"),
            ScenarioErrorKind::InvalidBounds(_)
        ));
        assert!(matches!(
            err("bounds 1 x 0 0"),
            ScenarioErrorKind::InvalidNumber(_)
        ));
        assert!(matches!(
            err("replicas r1\nupdate r1 k"),
            ScenarioErrorKind::Arity { .. }
        ));
        assert!(matches!(
            err("frobnicate"),
            ScenarioErrorKind::UnknownCommand(_)
        ));
        assert!(matches!(
            err("replicas r1\nupdate r1 k v\nexpect clock r1 k a:0:1"),
            ScenarioErrorKind::InvalidClock(_)
        ));
        assert!(matches!(
            err("replicas r1\nupdate r1 k v\nexpect compare r1 k 0 1 Before"),
            ScenarioErrorKind::InvalidOrdering(_)
        ));
        assert_eq!(
            err("replicas r1\nupdate r1 k v\nsync r1 r1 k"),
            ScenarioErrorKind::SelfSync("r1".into())
        );
        assert!(matches!(
            err("replicas a:b"),
            ScenarioErrorKind::InvalidReplica(_)
        ));
        assert_eq!(Scenario::parse("replicas r1\nbogus").unwrap_err().line, 2);
    }
}
