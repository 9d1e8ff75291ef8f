//! Vector clock values and the riak_core-style clock API.
//!
//! A [`VClock`] is an immutable, canonically ordered list of
//! `(actor, count, timestamp)` entries. Counts carry the causal meaning;
//! timestamps only feed [`VClock::prune`]. Every operation returns a new
//! value and leaves its inputs untouched.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::time::{SystemTime, UNIX_EPOCH};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

/// Identifier of the entity that increments a clock.
///
/// A non-empty printable token without whitespace, `:` or `;`, so that it
/// can be embedded in the canonical text form unescaped.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActorId(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActorIdError {
    #[error("actor id is empty")]
    Empty,
    #[error("actor id {token:?} contains illegal character {ch:?}")]
    IllegalChar { token: String, ch: char },
}

impl ActorId {
    pub fn new(token: impl Into<String>) -> Result<Self, ActorIdError> {
        let token = token.into();
        if token.is_empty() {
            return Err(ActorIdError::Empty);
        }
        if let Some(ch) = token.chars().find(|&c| !is_token_char(c)) {
            return Err(ActorIdError::IllegalChar { token, ch });
        }
        Ok(ActorId(token))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_token_char(c: char) -> bool {
    !c.is_whitespace() && !c.is_control() && c != ':' && c != ';'
}

impl FromStr for ActorId {
    type Err = ActorIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActorId::new(s)
    }
}

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Number of events an actor has contributed. Unbounded, so it never wraps.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Count(BigUint);

impl Count {
    pub fn zero() -> Self {
        Count(BigUint::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn succ(&self) -> Self {
        Count(&self.0 + BigUint::one())
    }

    pub fn as_biguint(&self) -> &BigUint {
        &self.0
    }
}

impl From<u64> for Count {
    fn from(n: u64) -> Self {
        Count(BigUint::from(n))
    }
}

impl From<BigUint> for Count {
    fn from(n: BigUint) -> Self {
        Count(n)
    }
}

impl PartialEq<u64> for Count {
    fn eq(&self, other: &u64) -> bool {
        self.0 == BigUint::from(*other)
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Seconds since the epoch. Unbounded, so `now + age` never overflows.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(BigUint);

impl Timestamp {
    pub fn as_biguint(&self) -> &BigUint {
        &self.0
    }

    /// True when strictly more than `age` seconds separate `self` from `now`,
    /// i.e. `self < now - age`. Never true when `age >= now`.
    pub fn older_than(&self, now: &Timestamp, age: u64) -> bool {
        &self.0 + BigUint::from(age) < now.0
    }
}

impl From<u64> for Timestamp {
    fn from(n: u64) -> Self {
        Timestamp(BigUint::from(n))
    }
}

impl From<BigUint> for Timestamp {
    fn from(n: BigUint) -> Self {
        Timestamp(n)
    }
}

impl PartialEq<u64> for Timestamp {
    fn eq(&self, other: &u64) -> bool {
        self.0 == BigUint::from(*other)
    }
}

impl Add<u64> for &Timestamp {
    type Output = Timestamp;

    fn add(self, rhs: u64) -> Timestamp {
        Timestamp(&self.0 + BigUint::from(rhs))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Source of timestamps for `increment`. Successive reads never decrease.
pub trait ClockSource {
    fn now(&self) -> Timestamp;
}

impl<F> ClockSource for F
where
    F: Fn() -> Timestamp,
{
    fn now(&self) -> Timestamp {
        self()
    }
}

/// Always reports the same instant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedClock(pub Timestamp);

impl FixedClock {
    pub fn at(seconds: u64) -> Self {
        FixedClock(Timestamp::from(seconds))
    }
}

impl ClockSource for FixedClock {
    fn now(&self) -> Timestamp {
        self.0.clone()
    }
}

/// Wall-clock seconds since the UNIX epoch, clamped so that a step backwards
/// in system time is reported as the previous high-water mark.
#[derive(Debug, Default)]
pub struct SystemClock {
    high_water: AtomicU64,
}

impl SystemClock {
    pub fn new() -> Self {
        Self::default()
    }
}

impl ClockSource for SystemClock {
    fn now(&self) -> Timestamp {
        let wall = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let prev = self.high_water.fetch_max(wall, AtomicOrdering::Relaxed);
        Timestamp::from(prev.max(wall))
    }
}

/// One actor's slot in a vector clock.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClockEntry {
    pub actor: ActorId,
    pub count: Count,
    pub timestamp: Timestamp,
}

impl ClockEntry {
    pub fn new(actor: ActorId, count: impl Into<Count>, timestamp: impl Into<Timestamp>) -> Self {
        ClockEntry {
            actor,
            count: count.into(),
            timestamp: timestamp.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClockError {
    #[error("actor {0} appears more than once")]
    DuplicateActor(ActorId),
    #[error("actor {0} has a zero count")]
    ZeroCount(ActorId),
}

/// Causal relation between two clocks, read left-to-right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClockOrdering {
    Equal,
    /// The left clock strictly dominates the right one.
    Descends,
    /// The right clock strictly dominates the left one.
    Dominated,
    Concurrent,
}

impl ClockOrdering {
    pub const ALL: [ClockOrdering; 4] = [
        ClockOrdering::Equal,
        ClockOrdering::Descends,
        ClockOrdering::Dominated,
        ClockOrdering::Concurrent,
    ];

    /// The same relation seen from the other side.
    pub fn reverse(self) -> Self {
        match self {
            ClockOrdering::Descends => ClockOrdering::Dominated,
            ClockOrdering::Dominated => ClockOrdering::Descends,
            other => other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClockOrdering::Equal => "Equal",
            ClockOrdering::Descends => "Descends",
            ClockOrdering::Dominated => "Dominated",
            ClockOrdering::Concurrent => "Concurrent",
        }
    }
}

impl fmt::Display for ClockOrdering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown ordering {0:?}, expected Equal, Descends, Dominated or Concurrent")]
pub struct ParseOrderingError(pub String);

impl FromStr for ClockOrdering {
    type Err = ParseOrderingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClockOrdering::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| ParseOrderingError(s.to_owned()))
    }
}

/// The four pruning parameters.
///
/// `small` and `large` bound the number of entries, `young` and `old` are
/// ages in seconds. Construction enforces `small <= large` and
/// `young <= old`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PruneBounds {
    small: usize,
    large: usize,
    young: u64,
    old: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PruneBoundsError {
    #[error("small ({small}) exceeds large ({large})")]
    SmallAboveLarge { small: usize, large: usize },
    #[error("young ({young}) exceeds old ({old})")]
    YoungAboveOld { young: u64, old: u64 },
}

impl PruneBounds {
    pub fn new(small: usize, large: usize, young: u64, old: u64) -> Result<Self, PruneBoundsError> {
        if small > large {
            return Err(PruneBoundsError::SmallAboveLarge { small, large });
        }
        if young > old {
            return Err(PruneBoundsError::YoungAboveOld { young, old });
        }
        Ok(PruneBounds {
            small,
            large,
            young,
            old,
        })
    }

    pub fn small(&self) -> usize {
        self.small
    }

    pub fn large(&self) -> usize {
        self.large
    }

    pub fn young(&self) -> u64 {
        self.young
    }

    pub fn old(&self) -> u64 {
        self.old
    }
}

/// An immutable vector clock.
///
/// `==` is structural (timestamps included); use [`VClock::equal`] for the
/// causal equality that ignores timestamps.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct VClock {
    // sorted by actor, unique actors, every count >= 1
    entries: Vec<ClockEntry>,
}

impl VClock {
    pub fn fresh() -> Self {
        VClock::default()
    }

    /// Builds a clock from entries in any order.
    pub fn from_entries<I>(entries: I) -> Result<Self, ClockError>
    where
        I: IntoIterator<Item = ClockEntry>,
    {
        let mut entries: Vec<ClockEntry> = entries.into_iter().collect();
        if let Some(e) = entries.iter().find(|e| e.count.is_zero()) {
            return Err(ClockError::ZeroCount(e.actor.clone()));
        }
        entries.sort_by(|a, b| a.actor.cmp(&b.actor));
        if let Some(w) = entries.windows(2).find(|w| w[0].actor == w[1].actor) {
            return Err(ClockError::DuplicateActor(w[0].actor.clone()));
        }
        Ok(VClock { entries })
    }

    pub fn entries(&self) -> &[ClockEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, actor: &ActorId) -> Option<&ClockEntry> {
        self.entries
            .binary_search_by(|e| e.actor.cmp(actor))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn actors(&self) -> impl Iterator<Item = &ActorId> {
        self.entries.iter().map(|e| &e.actor)
    }

    /// Bumps `actor`'s count by one and stamps it with `clock.now()`,
    /// inserting the actor with count 1 if it is not present yet.
    pub fn increment<C>(&self, actor: &ActorId, clock: &C) -> VClock
    where
        C: ClockSource + ?Sized,
    {
        let now = clock.now();
        let mut entries = self.entries.clone();
        match entries.binary_search_by(|e| e.actor.cmp(actor)) {
            Ok(i) => {
                let e = &mut entries[i];
                e.count = e.count.succ();
                e.timestamp = now;
            }
            Err(i) => entries.insert(i, ClockEntry::new(actor.clone(), 1, now)),
        }
        VClock { entries }
    }

    /// Same actors with the same counts. Timestamps are not consulted.
    pub fn equal(&self, other: &VClock) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.actor == b.actor && a.count == b.count)
    }

    /// Non-strict: every count in `other` is matched or exceeded here.
    pub fn descends(&self, other: &VClock) -> bool {
        let (self_ge, _) = self.dominance(other);
        self_ge
    }

    pub fn compare(&self, other: &VClock) -> ClockOrdering {
        match self.dominance(other) {
            (true, true) => ClockOrdering::Equal,
            (true, false) => ClockOrdering::Descends,
            (false, true) => ClockOrdering::Dominated,
            (false, false) => ClockOrdering::Concurrent,
        }
    }

    /// `(self >= other, other >= self)` pointwise, absent actors read as 0.
    fn dominance(&self, other: &VClock) -> (bool, bool) {
        let mut self_ge = true;
        let mut other_ge = true;
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].actor.cmp(&b[j].actor) {
                Ordering::Less => {
                    other_ge = false;
                    i += 1;
                }
                Ordering::Greater => {
                    self_ge = false;
                    j += 1;
                }
                Ordering::Equal => {
                    match a[i].count.cmp(&b[j].count) {
                        Ordering::Less => self_ge = false,
                        Ordering::Greater => other_ge = false,
                        Ordering::Equal => {}
                    }
                    i += 1;
                    j += 1;
                }
            }
            if !self_ge && !other_ge {
                return (false, false);
            }
        }
        if i < a.len() {
            other_ge = false;
        }
        if j < b.len() {
            self_ge = false;
        }
        (self_ge, other_ge)
    }

    /// Pointwise maximum of counts and, independently, of timestamps.
    pub fn merge(&self, other: &VClock) -> VClock {
        let (a, b) = (&self.entries, &other.entries);
        let mut entries = Vec::with_capacity(a.len().max(b.len()));
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].actor.cmp(&b[j].actor) {
                Ordering::Less => {
                    entries.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    entries.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    entries.push(ClockEntry {
                        actor: a[i].actor.clone(),
                        count: a[i].count.clone().max(b[j].count.clone()),
                        timestamp: a[i].timestamp.clone().max(b[j].timestamp.clone()),
                    });
                    i += 1;
                    j += 1;
                }
            }
        }
        entries.extend_from_slice(&a[i..]);
        entries.extend_from_slice(&b[j..]);
        VClock { entries }
    }

    pub fn get_counter(&self, actor: &ActorId) -> Count {
        self.entry(actor)
            .map(|e| e.count.clone())
            .unwrap_or_default()
    }

    pub fn get_timestamp(&self, actor: &ActorId) -> Option<&Timestamp> {
        self.entry(actor).map(|e| &e.timestamp)
    }

    pub fn all_nodes(&self) -> Vec<ActorId> {
        self.actors().cloned().collect()
    }

    /// Drops old entries under the size and age bounds.
    ///
    /// Nothing happens while the clock has at most `small` entries. Above
    /// that, entries are visited oldest first (ties by actor) and the oldest
    /// one is evicted as long as the clock still has more than `small`
    /// entries, it is either over `large` entries or the entry is older than
    /// `old`, and the entry is older than `young`. The first entry that fails
    /// the test stops the scan. Survivors are left untouched.
    pub fn prune(&self, now: &Timestamp, bounds: &PruneBounds) -> VClock {
        if self.entries.len() <= bounds.small {
            return self.clone();
        }
        let mut by_age: Vec<&ClockEntry> = self.entries.iter().collect();
        by_age.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| a.actor.cmp(&b.actor))
        });

        let mut remaining = self.entries.len();
        let mut evicted: Vec<&ActorId> = Vec::new();
        for oldest in by_age {
            if remaining <= bounds.small {
                break;
            }
            let over_size = remaining > bounds.large;
            let expired = oldest.timestamp.older_than(now, bounds.old);
            let settled = oldest.timestamp.older_than(now, bounds.young);
            if !(settled && (over_size || expired)) {
                break;
            }
            evicted.push(&oldest.actor);
            remaining -= 1;
        }

        if evicted.is_empty() {
            return self.clone();
        }
        evicted.sort();
        let entries = self
            .entries
            .iter()
            .filter(|e| evicted.binary_search(&&e.actor).is_err())
            .cloned()
            .collect();
        VClock { entries }
    }
}

/// A new, empty clock.
pub fn fresh() -> VClock {
    VClock::fresh()
}

pub fn increment<C>(actor: &ActorId, v: &VClock, clock: &C) -> VClock
where
    C: ClockSource + ?Sized,
{
    v.increment(actor, clock)
}

pub fn equal(v1: &VClock, v2: &VClock) -> bool {
    v1.equal(v2)
}

pub fn descends(v1: &VClock, v2: &VClock) -> bool {
    v1.descends(v2)
}

pub fn compare(v1: &VClock, v2: &VClock) -> ClockOrdering {
    v1.compare(v2)
}

/// Merges two clocks. `clock` is accepted for signature parity with
/// `increment` and is never read.
pub fn merge<C>(v1: &VClock, v2: &VClock, _clock: &C) -> VClock
where
    C: ClockSource + ?Sized,
{
    v1.merge(v2)
}

pub fn get_counter(actor: &ActorId, v: &VClock) -> Count {
    v.get_counter(actor)
}

pub fn get_timestamp<'a>(actor: &ActorId, v: &'a VClock) -> Option<&'a Timestamp> {
    v.get_timestamp(actor)
}

pub fn all_nodes(v: &VClock) -> Vec<ActorId> {
    v.all_nodes()
}

pub fn prune(v: &VClock, now: &Timestamp, bounds: &PruneBounds) -> VClock {
    v.prune(now, bounds)
}
