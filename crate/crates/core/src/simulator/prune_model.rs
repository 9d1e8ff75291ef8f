use std::collections::{BTreeMap, BTreeSet};

use crate::clock::{ActorId, PruneBounds, Timestamp, VClock};

/// Second implementation of the prune rule, kept apart from
/// [`VClock::prune`] so the simulator can cross-check it.
///
/// Entries go into a queue keyed by `(timestamp, actor)` and are popped
/// from the front while the eviction condition holds.
pub fn prune_by_age_queue(clock: &VClock, now: &Timestamp, bounds: &PruneBounds) -> VClock {
    let mut queue: BTreeMap<(&Timestamp, &ActorId), ()> = clock
        .entries()
        .iter()
        .map(|e| ((&e.timestamp, &e.actor), ()))
        .collect();
    let mut dropped: BTreeSet<&ActorId> = BTreeSet::new();

    loop {
        let size = queue.len();
        if size <= bounds.small() {
            break;
        }
        let Some((&(ts, actor), ())) = queue.first_key_value() else {
            break;
        };
        // age > young, and either over the ceiling or age > old
        let age_exceeds = |limit: u64| now > &(ts + limit);
        let evict =
            age_exceeds(bounds.young()) && (size > bounds.large() || age_exceeds(bounds.old()));
        if !evict {
            break;
        }
        dropped.insert(actor);
        queue.pop_first();
    }

    VClock::from_entries(
        clock
            .entries()
            .iter()
            .filter(|e| !dropped.contains(&e.actor))
            .cloned(),
    )
    .expect("subset of a valid clock")
}
