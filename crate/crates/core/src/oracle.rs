//! Happened-before ground truth for checking clocks.
//!
//! A [`History`] is an explicit event graph: every event is either a local
//! update or the receipt of an earlier event from another actor. Causality
//! is answered by graph reachability alone, then compared against what the
//! clocks computed for the same events say.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::clock::{ActorId, ClockOrdering, FixedClock, PruneBounds, Timestamp, VClock};

/// Largest history size `enumerate_histories` accepts.
pub const MAX_ENUM_EVENTS: usize = 7;
/// Largest actor count `enumerate_histories` accepts.
pub const MAX_ENUM_ACTORS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub usize);

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    LocalUpdate,
    Receive { from: EventId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub id: EventId,
    pub actor: ActorId,
    pub kind: EventKind,
    /// Sorted; the actor's previous event and, for a receive, the sender.
    pub predecessors: Vec<EventId>,
    pub clock_snapshot: VClock,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("unknown event {0}")]
    UnknownEvent(EventId),
    #[error("{actor} cannot receive its own event {from}")]
    SelfReceive { actor: ActorId, from: EventId },
    #[error(
        "enumeration budget exceeded: asked for {events} events over {actors} actors, \
         limit is {MAX_ENUM_EVENTS} events over {MAX_ENUM_ACTORS} actors"
    )]
    BudgetExceeded { events: usize, actors: usize },
}

/// Events in topological order. Built only through [`History::push_local`]
/// and [`History::push_receive`], so predecessors always point backwards.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct History {
    events: Vec<EventRecord>,
    actors: BTreeSet<ActorId>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    /// An empty history that already declares `actors`.
    pub fn with_actors(actors: impl IntoIterator<Item = ActorId>) -> Self {
        History {
            events: Vec::new(),
            actors: actors.into_iter().collect(),
        }
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn actors(&self) -> &BTreeSet<ActorId> {
        &self.actors
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn event(&self, id: EventId) -> Result<&EventRecord, OracleError> {
        self.events.get(id.0).ok_or(OracleError::UnknownEvent(id))
    }

    pub fn push_local(&mut self, actor: ActorId) -> EventId {
        self.push(actor, EventKind::LocalUpdate)
    }

    pub fn push_receive(&mut self, actor: ActorId, from: EventId) -> Result<EventId, OracleError> {
        let sender = self.event(from)?;
        if sender.actor == actor {
            return Err(OracleError::SelfReceive { actor, from });
        }
        Ok(self.push(actor, EventKind::Receive { from }))
    }

    fn push(&mut self, actor: ActorId, kind: EventKind) -> EventId {
        let id = EventId(self.events.len());
        let mut predecessors = Vec::with_capacity(2);
        if let Some(prev) = self.events.iter().rev().find(|e| e.actor == actor) {
            predecessors.push(prev.id);
        }
        if let EventKind::Receive { from } = kind {
            predecessors.push(from);
        }
        predecessors.sort();
        let clock_snapshot = step_clock(id, &actor, &predecessors, |p| {
            &self.events[p.0].clock_snapshot
        });
        self.actors.insert(actor.clone());
        self.events.push(EventRecord {
            id,
            actor,
            kind,
            predecessors,
            clock_snapshot,
        });
        id
    }

    /// One line per event, e.g. `e2 b recv e0 a:1:0;b:1:2`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            match e.kind {
                EventKind::LocalUpdate => out.push_str(&format!(
                    "{} {} local {}\n",
                    e.id, e.actor, e.clock_snapshot
                )),
                EventKind::Receive { from } => out.push_str(&format!(
                    "{} {} recv {} {}\n",
                    e.id, e.actor, from, e.clock_snapshot
                )),
            }
        }
        out
    }
}

// merge of the predecessors' clocks, then the actor's own increment stamped
// with the event index
fn step_clock<'a, F>(id: EventId, actor: &ActorId, predecessors: &[EventId], clock_of: F) -> VClock
where
    F: Fn(EventId) -> &'a VClock,
{
    let merged = predecessors
        .iter()
        .fold(VClock::fresh(), |acc, &p| acc.merge(clock_of(p)));
    merged.increment(actor, &logical_time(id))
}

fn logical_time(id: EventId) -> FixedClock {
    FixedClock::at(id.0 as u64)
}

/// Transitive closure of the predecessor relation, one bit row per event.
#[derive(Debug, Clone)]
pub struct Reachability {
    // ancestors[i] has bit j set iff j happened before i
    ancestors: Vec<Vec<u64>>,
}

impl Reachability {
    pub fn new(h: &History) -> Self {
        let n = h.len();
        let words = n.div_ceil(64);
        let mut ancestors: Vec<Vec<u64>> = Vec::with_capacity(n);
        for e in h.events() {
            let mut row = vec![0u64; words];
            for p in &e.predecessors {
                for (w, bits) in row.iter_mut().zip(&ancestors[p.0]) {
                    *w |= bits;
                }
                row[p.0 / 64] |= 1 << (p.0 % 64);
            }
            ancestors.push(row);
        }
        Reachability { ancestors }
    }

    /// True iff `earlier` is a strict causal ancestor of `later`.
    pub fn happened_before(&self, earlier: EventId, later: EventId) -> bool {
        self.ancestors[later.0][earlier.0 / 64] & (1 << (earlier.0 % 64)) != 0
    }

    /// Ids of every strict ancestor of `e`.
    pub fn ancestors(&self, e: EventId) -> impl Iterator<Item = EventId> + '_ {
        let row = &self.ancestors[e.0];
        (0..e.0)
            .filter(move |&j| row[j / 64] & (1 << (j % 64)) != 0)
            .map(EventId)
    }
}

/// Graph reachability only: true iff `e1 != e2` and `e1` can be reached by
/// walking predecessor edges back from `e2`.
pub fn happened_before(h: &History, e1: EventId, e2: EventId) -> Result<bool, OracleError> {
    h.event(e1)?;
    h.event(e2)?;
    if e1 == e2 {
        return Ok(false);
    }
    let mut seen = vec![false; h.len()];
    let mut stack = vec![e2];
    while let Some(e) = stack.pop() {
        for &p in &h.events[e.0].predecessors {
            if p == e1 {
                return Ok(true);
            }
            // predecessors only point backwards, nothing below e1 can reach it
            if p > e1 && !seen[p.0] {
                seen[p.0] = true;
                stack.push(p);
            }
        }
    }
    Ok(false)
}

/// Recomputes every event's clock from the graph structure alone.
pub fn replay_clocks(h: &History) -> Vec<VClock> {
    replay_clocks_pruned(h, &[])
}

/// A prune applied to one event's clock right after it is computed, before
/// any later event reads it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PruneInjection {
    pub at: EventId,
    pub bounds: PruneBounds,
}

/// Like [`replay_clocks`], but prunes at the given events, using the event's
/// own logical time as "now".
pub fn replay_clocks_pruned(h: &History, injections: &[PruneInjection]) -> Vec<VClock> {
    let mut clocks: Vec<VClock> = Vec::with_capacity(h.len());
    for e in h.events() {
        let mut clock = step_clock(e.id, &e.actor, &e.predecessors, |p| &clocks[p.0]);
        for inj in injections.iter().filter(|inj| inj.at == e.id) {
            clock = clock.prune(&Timestamp::from(e.id.0 as u64), &inj.bounds);
        }
        clocks.push(clock);
    }
    clocks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GraphRelation {
    /// The first event happened before the second.
    HappenedBefore,
    Concurrent,
    /// The second event happened before the first.
    Inverse,
}

impl GraphRelation {
    /// What `compare(first, second)` must return for this relation.
    pub fn expected_ordering(self) -> ClockOrdering {
        match self {
            GraphRelation::HappenedBefore => ClockOrdering::Dominated,
            GraphRelation::Concurrent => ClockOrdering::Concurrent,
            GraphRelation::Inverse => ClockOrdering::Descends,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GraphRelation::HappenedBefore => "hb",
            GraphRelation::Concurrent => "concurrent",
            GraphRelation::Inverse => "inverse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Violation {
    pub first: EventId,
    pub second: EventId,
    pub graph: GraphRelation,
    pub clocks: ClockOrdering,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "VIOLATION {} {} graph={} clocks={}",
            self.first,
            self.second,
            self.graph.as_str(),
            self.clocks
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub pairs_checked: usize,
    pub violations: Vec<Violation>,
}

impl EquivalenceReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn render(&self) -> String {
        self.violations.iter().map(|v| format!("{v}\n")).collect()
    }
}

/// Replays the history and compares every ordered pair of distinct events.
pub fn check_equivalence(h: &History) -> EquivalenceReport {
    check_snapshots(h, &replay_clocks(h))
}

/// Compares arbitrary per-event clocks (one per event, in order) against
/// the graph.
pub fn check_snapshots(h: &History, clocks: &[VClock]) -> EquivalenceReport {
    assert_eq!(clocks.len(), h.len(), "one clock per event");
    let reach = Reachability::new(h);
    let mut report = EquivalenceReport::default();
    for i in 0..h.len() {
        for j in 0..h.len() {
            if i == j {
                continue;
            }
            let (e1, e2) = (EventId(i), EventId(j));
            let graph = if reach.happened_before(e1, e2) {
                GraphRelation::HappenedBefore
            } else if reach.happened_before(e2, e1) {
                GraphRelation::Inverse
            } else {
                GraphRelation::Concurrent
            };
            let observed = clocks[i].compare(&clocks[j]);
            report.pairs_checked += 1;
            if observed != graph.expected_ordering() {
                report.violations.push(Violation {
                    first: e1,
                    second: e2,
                    graph,
                    clocks: observed,
                });
            }
        }
    }
    report
}

/// Deterministic actor names: `a`..`z`, then `a26`, `a27`, ...
pub fn actor_name(index: usize) -> ActorId {
    let token = if index < 26 {
        char::from(b'a' + index as u8).to_string()
    } else {
        format!("a{index}")
    };
    ActorId::new(token).expect("generated names are valid tokens")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Step {
    actor: usize,
    from: Option<usize>,
}

/// Depth-first stream of every history with 1..=`max_events` events.
///
/// Actors are named in order of first appearance, so histories that differ
/// only by renaming actors are produced once.
pub struct HistoryEnumerator {
    max_events: usize,
    max_actors: usize,
    stack: Vec<Vec<Step>>,
}

impl HistoryEnumerator {
    fn children(&self, prefix: &[Step]) -> Vec<Vec<Step>> {
        let used = prefix.iter().map(|s| s.actor + 1).max().unwrap_or(0);
        let mut out = Vec::new();
        for actor in 0..(used + 1).min(self.max_actors) {
            let mut push = |from| {
                let mut next = prefix.to_vec();
                next.push(Step { actor, from });
                out.push(next);
            };
            push(None);
            for (j, s) in prefix.iter().enumerate() {
                if s.actor != actor {
                    push(Some(j));
                }
            }
        }
        out
    }
}

impl Iterator for HistoryEnumerator {
    type Item = History;

    fn next(&mut self) -> Option<History> {
        let prefix = self.stack.pop()?;
        if prefix.len() < self.max_events {
            let mut kids = self.children(&prefix);
            kids.reverse();
            self.stack.extend(kids);
        }
        let mut h = History::new();
        for s in &prefix {
            let actor = actor_name(s.actor);
            match s.from {
                None => {
                    h.push_local(actor);
                }
                Some(j) => {
                    h.push_receive(actor, EventId(j))
                        .expect("enumerated receives come from other actors");
                }
            }
        }
        Some(h)
    }
}

pub fn enumerate_histories(
    max_events: usize,
    max_actors: usize,
) -> Result<HistoryEnumerator, OracleError> {
    if max_events > MAX_ENUM_EVENTS || max_actors > MAX_ENUM_ACTORS {
        return Err(OracleError::BudgetExceeded {
            events: max_events,
            actors: max_actors,
        });
    }
    let mut it = HistoryEnumerator {
        max_events,
        max_actors,
        stack: Vec::new(),
    };
    if max_events > 0 && max_actors > 0 {
        let mut roots = it.children(&[]);
        roots.reverse();
        it.stack = roots;
    }
    Ok(it)
}

/// Seeded pseudo-random history. Each event picks an actor uniformly and,
/// half the time, receives a uniformly chosen earlier event of another actor.
pub fn random_history(seed: u64, events: usize, actors: usize) -> History {
    assert!(actors >= 1, "random_history needs at least one actor");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = History::with_actors((0..actors).map(actor_name));
    let mut owner: Vec<usize> = Vec::with_capacity(events);
    for _ in 0..events {
        let actor = rng.gen_range(0..actors);
        let senders: Vec<usize> = (0..owner.len()).filter(|&j| owner[j] != actor).collect();
        if !senders.is_empty() && rng.gen_bool(0.5) {
            let from = senders[rng.gen_range(0..senders.len())];
            h.push_receive(actor_name(actor), EventId(from))
                .expect("sender belongs to another actor");
        } else {
            h.push_local(actor_name(actor));
        }
        owner.push(actor);
    }
    h
}

/// Aggregate result of checking many histories.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CheckSummary {
    pub histories: usize,
    pub pairs: usize,
    /// `(label, violation)` sorted, so output order is independent of
    /// scheduling.
    pub violations: Vec<(String, Violation)>,
}

impl CheckSummary {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn absorb(&mut self, label: impl Fn() -> String, report: EquivalenceReport) {
        self.histories += 1;
        self.pairs += report.pairs_checked;
        if !report.violations.is_empty() {
            let label = label();
            self.violations
                .extend(report.violations.into_iter().map(|v| (label.clone(), v)));
        }
    }

    fn combine(mut self, other: CheckSummary) -> CheckSummary {
        self.histories += other.histories;
        self.pairs += other.pairs;
        self.violations.extend(other.violations);
        self
    }
}

/// Checks every enumerated history, in parallel.
pub fn check_exhaustive(max_events: usize, max_actors: usize) -> Result<CheckSummary, OracleError> {
    let mut summary = enumerate_histories(max_events, max_actors)?
        .enumerate()
        .par_bridge()
        .map(|(i, h)| {
            let mut s = CheckSummary::default();
            s.absorb(|| format!("history#{i}"), check_equivalence(&h));
            s
        })
        .reduce(CheckSummary::default, CheckSummary::combine);
    summary.violations.sort();
    Ok(summary)
}

/// Checks `random_history(seed, events, actors)` for seeds `0..seeds`, in
/// parallel.
pub fn check_random(seeds: u64, events: usize, actors: usize) -> CheckSummary {
    let mut summary = (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let mut s = CheckSummary::default();
            s.absorb(
                || format!("seed={seed}"),
                check_equivalence(&random_history(seed, events, actors)),
            );
            s
        })
        .reduce(CheckSummary::default, CheckSummary::combine);
    summary.violations.sort();
    summary
}
