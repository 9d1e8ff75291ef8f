//! Deterministic multi-replica key/value simulation.
//!
//! Replicas hold clock-tagged values per key. Writes are stamped by the
//! writing replica, syncs move an object from one replica to another and
//! keep only causally maximal versions, so concurrent writes surface as
//! siblings.
//!
//! Every sibling also carries a `lineage` clock that goes through the same
//! merges and increments but is never pruned. Comparing the two exposes the
//! causality that pruning throws away.

mod prune_model;
mod run;
mod scenario;

use std::collections::BTreeMap;
use std::fmt;

use crate::clock::{
    ActorId, ActorIdError, ClockEntry, ClockOrdering, Count, FixedClock, PruneBounds, Timestamp,
    VClock,
};

pub use prune_model::prune_by_age_queue;
pub use run::{run_scenario, RunOptions, RunReport};
pub use scenario::{Assertion, Command, Scenario, ScenarioError, ScenarioErrorKind};

/// A replica name. Same lexical rules as [`ActorId`]; the replica is the
/// actor that stamps its own writes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReplicaId(ActorId);

impl ReplicaId {
    pub fn new(name: impl Into<String>) -> Result<Self, ActorIdError> {
        ActorId::new(name).map(ReplicaId)
    }

    pub fn as_actor(&self) -> &ActorId {
        &self.0
    }

    pub fn as_str(&self) -> &str {
        self.0.as_str()
    }
}

impl fmt::Display for ReplicaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sibling {
    pub value: String,
    pub clock: VClock,
    /// Never pruned; equal to `clock` until a prune happens.
    pub lineage: VClock,
}

impl fmt::Display for Sibling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.value, self.clock)
    }
}

/// How an update treats the siblings it finds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WriteMode {
    /// Merge all sibling clocks, increment, and replace them with the write.
    #[default]
    Collapse,
    /// Write with only this replica's own history as context, keeping
    /// siblings from other replicas alongside it.
    Blind,
}

/// Values stored under one key: pairwise concurrent siblings in canonical
/// order (by clock text, then value).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct StoredObject {
    siblings: Vec<Sibling>,
}

/// Clock disagreement between the pruned clocks and the lineage clocks for
/// the same pair of siblings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Anomaly {
    pub clocks: ClockOrdering,
    pub lineage: ClockOrdering,
}

impl Anomaly {
    pub fn kind(&self) -> &'static str {
        if self.clocks == ClockOrdering::Concurrent {
            "false-concurrency"
        } else {
            "false-causality"
        }
    }
}

impl fmt::Display for Anomaly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} clocks={} lineage={}",
            self.kind(),
            self.clocks,
            self.lineage
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Absorbed {
    /// An existing sibling already covers the incoming one.
    Discarded,
    /// Added, superseding `replaced` existing siblings.
    Added { replaced: usize },
}

impl StoredObject {
    pub fn siblings(&self) -> &[Sibling] {
        &self.siblings
    }

    pub fn len(&self) -> usize {
        self.siblings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.siblings.is_empty()
    }

    fn single(sibling: Sibling) -> Self {
        StoredObject {
            siblings: vec![sibling],
        }
    }

    /// Keeps the sibling set an antichain: drops `incoming` if an existing
    /// sibling's clock descends it, otherwise removes every sibling it
    /// strictly descends and inserts it.
    pub fn absorb(&mut self, incoming: Sibling, anomalies: &mut Vec<Anomaly>) -> Absorbed {
        let mut covered = false;
        let mut superseded = vec![false; self.siblings.len()];
        for (i, existing) in self.siblings.iter().enumerate() {
            let clocks = incoming.clock.compare(&existing.clock);
            let lineage = incoming.lineage.compare(&existing.lineage);
            if clocks != lineage {
                anomalies.push(Anomaly { clocks, lineage });
            }
            match clocks {
                ClockOrdering::Equal | ClockOrdering::Dominated => covered = true,
                ClockOrdering::Descends => superseded[i] = true,
                ClockOrdering::Concurrent => {}
            }
        }
        if covered {
            return Absorbed::Discarded;
        }
        let replaced = superseded.iter().filter(|&&s| s).count();
        let mut flags = superseded.into_iter();
        self.siblings.retain(|_| !flags.next().unwrap_or(false));
        self.siblings.push(incoming);
        self.canonicalize();
        Absorbed::Added { replaced }
    }

    fn canonicalize(&mut self) {
        self.siblings
            .sort_by_cached_key(|s| (s.clock.to_string(), s.value.clone()));
    }

    /// True iff no sibling's clock descends another's.
    pub fn is_antichain(&self) -> bool {
        self.siblings.iter().enumerate().all(|(i, a)| {
            self.siblings
                .iter()
                .enumerate()
                .all(|(j, b)| i == j || !a.clock.descends(&b.clock))
        })
    }

    /// Siblings rendered as `value@clock`, space separated.
    pub fn render(&self) -> String {
        self.siblings
            .iter()
            .map(Sibling::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateOutcome {
    pub clock: VClock,
    pub replaced: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SyncOutcome {
    pub incoming: usize,
    pub discarded: usize,
    pub replaced: usize,
    pub added: usize,
    pub anomalies: Vec<Anomaly>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PruneOutcome {
    /// Entries removed from each sibling's clock, in pre-prune sibling order.
    pub removed: Vec<usize>,
    /// Siblings dropped because pruning made them comparable.
    pub collapsed: usize,
    pub anomalies: Vec<Anomaly>,
    /// Siblings on which the queue-based prune model disagreed with
    /// [`VClock::prune`].
    pub model_mismatches: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicaState {
    id: ReplicaId,
    store: BTreeMap<String, StoredObject>,
    logical_time: u64,
}

impl ReplicaState {
    pub fn new(id: ReplicaId) -> Self {
        ReplicaState {
            id,
            store: BTreeMap::new(),
            logical_time: 0,
        }
    }

    pub fn id(&self) -> &ReplicaId {
        &self.id
    }

    pub fn get(&self, key: &str) -> Option<&StoredObject> {
        self.store.get(key)
    }

    pub fn store(&self) -> &BTreeMap<String, StoredObject> {
        &self.store
    }

    pub fn logical_time(&self) -> Timestamp {
        Timestamp::from(self.logical_time)
    }

    // strictly increasing per event, never behind the global step
    fn tick(&mut self, step: u64) -> u64 {
        self.logical_time = step.max(self.logical_time + 1);
        self.logical_time
    }

    pub fn apply_update(
        &mut self,
        key: &str,
        value: &str,
        step: u64,
        mode: WriteMode,
    ) -> UpdateOutcome {
        let now = FixedClock::at(self.tick(step));
        let actor = self.id.as_actor().clone();
        let existing = self
            .store
            .get(key)
            .map(|o| o.siblings.as_slice())
            .unwrap_or(&[]);

        match mode {
            WriteMode::Collapse => {
                let merged = |f: fn(&Sibling) -> &VClock| {
                    existing
                        .iter()
                        .fold(VClock::fresh(), |acc, s| acc.merge(f(s)))
                        .increment(&actor, &now)
                };
                let sibling = Sibling {
                    value: value.to_owned(),
                    clock: merged(|s| &s.clock),
                    lineage: merged(|s| &s.lineage),
                };
                let outcome = UpdateOutcome {
                    clock: sibling.clock.clone(),
                    replaced: existing.len(),
                };
                self.store
                    .insert(key.to_owned(), StoredObject::single(sibling));
                outcome
            }
            WriteMode::Blind => {
                let own_history = |f: fn(&Sibling) -> &VClock| {
                    let seen = existing
                        .iter()
                        .map(|s| f(s).get_counter(&actor))
                        .max()
                        .unwrap_or_default();
                    own_counter_clock(&actor, seen).increment(&actor, &now)
                };
                let sibling = Sibling {
                    value: value.to_owned(),
                    clock: own_history(|s| &s.clock),
                    lineage: own_history(|s| &s.lineage),
                };
                let clock = sibling.clock.clone();
                let object = self.store.entry(key.to_owned()).or_default();
                let replaced = match object.absorb(sibling, &mut Vec::new()) {
                    Absorbed::Added { replaced } => replaced,
                    Absorbed::Discarded => unreachable!("blind write exceeds every own count"),
                };
                UpdateOutcome { clock, replaced }
            }
        }
    }

    /// Absorbs `src`'s siblings for `key`. Returns `None` without touching
    /// anything when `src` does not hold the key.
    pub fn apply_sync(
        src: &ReplicaState,
        dst: &mut ReplicaState,
        key: &str,
        step: u64,
    ) -> Option<SyncOutcome> {
        let incoming = src.store.get(key)?;
        dst.tick(step);
        let object = dst.store.entry(key.to_owned()).or_default();
        let mut outcome = SyncOutcome {
            incoming: incoming.len(),
            ..SyncOutcome::default()
        };
        for sibling in incoming.siblings() {
            match object.absorb(sibling.clone(), &mut outcome.anomalies) {
                Absorbed::Discarded => outcome.discarded += 1,
                Absorbed::Added { replaced } => {
                    outcome.added += 1;
                    outcome.replaced += replaced;
                }
            }
        }
        Some(outcome)
    }

    /// Prunes every sibling's clock at the replica's logical time, then
    /// re-resolves siblings that pruning made comparable. `None` when the
    /// key is absent.
    pub fn apply_prune(
        &mut self,
        key: &str,
        bounds: &PruneBounds,
        step: u64,
    ) -> Option<PruneOutcome> {
        if !self.store.contains_key(key) {
            return None;
        }
        let now = Timestamp::from(self.tick(step));
        let object = self.store.get_mut(key)?;
        let mut outcome = PruneOutcome::default();
        let mut pruned = Vec::with_capacity(object.len());
        for (i, sibling) in object.siblings.iter().enumerate() {
            let clock = sibling.clock.prune(&now, bounds);
            if prune_by_age_queue(&sibling.clock, &now, bounds) != clock {
                outcome.model_mismatches.push(i);
            }
            outcome.removed.push(sibling.clock.len() - clock.len());
            pruned.push(Sibling {
                clock,
                ..sibling.clone()
            });
        }
        let mut resolved = StoredObject::default();
        for sibling in pruned {
            resolved.absorb(sibling, &mut outcome.anomalies);
        }
        outcome.collapsed = object.len() - resolved.len();
        *object = resolved;
        Some(outcome)
    }
}

fn own_counter_clock(actor: &ActorId, seen: Count) -> VClock {
    if seen.is_zero() {
        return VClock::fresh();
    }
    VClock::from_entries([ClockEntry::new(actor.clone(), seen, 0)])
        .expect("single entry with a non-zero count")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn replica(name: &str) -> ReplicaState {
        ReplicaState::new(ReplicaId::new(name).unwrap())
    }

    #[test]
    fn first_update_creates_single_sibling() {
        let mut r1 = replica("r1");
        let out = r1.apply_update("k", "v", 1, WriteMode::Collapse);
        assert_eq!(out.clock.to_string(), "r1:1:1");
        assert_eq!(r1.get("k").unwrap().render(), "v@r1:1:1");
    }

    #[test]
    fn second_update_counts_two() {
        let mut r1 = replica("r1");
        r1.apply_update("k", "v1", 1, WriteMode::Collapse);
        let out = r1.apply_update("k", "v2", 2, WriteMode::Collapse);
        assert_eq!(out.clock.to_string(), "r1:2:2");
        assert_eq!(out.replaced, 1);
    }

    #[test]
    fn concurrent_writes_become_siblings_then_collapse() {
        let mut r1 = replica("r1");
        let mut r2 = replica("r2");
        r1.apply_update("k", "x", 1, WriteMode::Collapse);
        r2.apply_update("k", "y", 2, WriteMode::Collapse);
        let out = ReplicaState::apply_sync(&r1, &mut r2, "k", 3).unwrap();
        assert_eq!((out.added, out.discarded, out.replaced), (1, 0, 0));
        let object = r2.get("k").unwrap();
        assert_eq!(object.len(), 2);
        assert_eq!(
            object.siblings()[0]
                .clock
                .compare(&object.siblings()[1].clock),
            ClockOrdering::Concurrent
        );
        let before: Vec<VClock> = object.siblings().iter().map(|s| s.clock.clone()).collect();
        let out = r2.apply_update("k", "z", 4, WriteMode::Collapse);
        assert_eq!(out.replaced, 2);
        for c in &before {
            assert_eq!(out.clock.compare(c), ClockOrdering::Descends);
        }
    }

    #[test]
    fn sync_of_descendant_replaces() {
        let mut r1 = replica("r1");
        let mut r2 = replica("r2");
        r1.apply_update("k", "x", 1, WriteMode::Collapse);
        ReplicaState::apply_sync(&r1, &mut r2, "k", 2).unwrap();
        r1.apply_update("k", "x2", 3, WriteMode::Collapse);
        let out = ReplicaState::apply_sync(&r1, &mut r2, "k", 4).unwrap();
        assert_eq!((out.added, out.replaced), (1, 1));
        assert_eq!(r2.get("k").unwrap().render(), "x2@r1:2:3");
    }

    #[test]
    fn sync_of_identical_object_is_a_no_op() {
        let mut r1 = replica("r1");
        let mut r2 = replica("r2");
        r1.apply_update("k", "x", 1, WriteMode::Collapse);
        ReplicaState::apply_sync(&r1, &mut r2, "k", 2).unwrap();
        let before = r2.get("k").cloned();
        let out = ReplicaState::apply_sync(&r1, &mut r2, "k", 3).unwrap();
        assert_eq!(out.discarded, 1);
        assert_eq!(r2.get("k").cloned(), before);
    }

    #[test]
    fn sync_of_absent_key() {
        let r1 = replica("r1");
        let mut r2 = replica("r2");
        assert!(ReplicaState::apply_sync(&r1, &mut r2, "k", 1).is_none());
        assert_eq!(r2.logical_time(), Timestamp::from(0));
    }

    #[test]
    fn blind_write_keeps_foreign_siblings() {
        let mut r1 = replica("r1");
        let mut r2 = replica("r2");
        r1.apply_update("k", "x", 1, WriteMode::Collapse);
        r2.apply_update("k", "y", 2, WriteMode::Collapse);
        ReplicaState::apply_sync(&r1, &mut r2, "k", 3).unwrap();
        let out = r2.apply_update("k", "z", 4, WriteMode::Blind);
        // supersedes its own earlier write only
        assert_eq!(out.clock.to_string(), "r2:2:4");
        assert_eq!(out.replaced, 1);
        let object = r2.get("k").unwrap();
        assert_eq!(object.render(), "x@r1:1:1 z@r2:2:4");
        assert!(object.is_antichain());
    }

    #[test]
    fn logical_time_strictly_increases() {
        let mut r1 = replica("r1");
        r1.apply_update("k", "a", 5, WriteMode::Collapse);
        r1.apply_update("k", "b", 5, WriteMode::Collapse);
        assert_eq!(r1.logical_time(), Timestamp::from(6));
    }

    #[test]
    fn prune_with_generous_bounds_is_identity() {
        let mut r1 = replica("r1");
        r1.apply_update("k", "a", 1, WriteMode::Collapse);
        let before = r1.get("k").cloned();
        let out = r1
            .apply_prune("k", &PruneBounds::new(5, 10, 0, 0).unwrap(), 9)
            .unwrap();
        assert_eq!(out.removed, vec![0]);
        assert_eq!(r1.get("k").cloned(), before);
        assert!(r1
            .apply_prune("missing", &PruneBounds::new(0, 0, 0, 0).unwrap(), 10)
            .is_none());
    }

    #[test]
    fn aggressive_prune_then_sync_shows_false_concurrency() {
        let mut r1 = replica("r1");
        let mut r2 = replica("r2");
        r1.apply_update("k", "x", 1, WriteMode::Collapse);
        ReplicaState::apply_sync(&r1, &mut r2, "k", 2).unwrap();
        r2.apply_update("k", "y", 3, WriteMode::Collapse);
        // at time 5, young = 1 protects only entries stamped 4 or later
        let bounds = PruneBounds::new(0, 0, 1, 1).unwrap();
        let out = r2.apply_prune("k", &bounds, 5).unwrap();
        assert_eq!(out.removed, vec![2]);
        assert!(r2.get("k").unwrap().siblings()[0].clock.is_empty());

        // r2's next write follows x but its clock no longer shows it
        r2.apply_update("k", "z", 6, WriteMode::Collapse);
        let out = ReplicaState::apply_sync(&r2, &mut r1, "k", 8).unwrap();
        assert_eq!(out.anomalies.len(), 1);
        assert_eq!(out.anomalies[0].kind(), "false-concurrency");
        assert_eq!(out.anomalies[0].lineage, ClockOrdering::Descends);
        assert_eq!(r1.get("k").unwrap().len(), 2);
    }
}
