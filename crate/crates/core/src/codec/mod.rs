//! Canonical text form of a clock.
//!
//! Entries are written as `actor:count:timestamp`, joined by `;`, in actor
//! order. The empty clock is the single character `-`. Two clocks encode to
//! the same bytes exactly when they are structurally identical.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use thiserror::Error;

use crate::clock::{ActorId, ActorIdError, ClockEntry, ClockError, Count, Timestamp, VClock};

pub mod peano;

pub use peano::{natural_to_peano, peano_cost, peano_to_natural, CapacityError, PeanoNumeral};

const EMPTY: &str = "-";

/// A clock rendered in canonical text form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WireClock(String);

impl WireClock {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for WireClock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("empty input; the empty clock is written `-`")]
    EmptyInput,
    #[error("entry {index} ({entry:?}) has {fields} fields, expected actor:count:timestamp")]
    FieldCount {
        index: usize,
        entry: String,
        fields: usize,
    },
    #[error("entry {index}: count {value:?} is not a non-negative integer")]
    InvalidCount { index: usize, value: String },
    #[error("entry {index}: timestamp {value:?} is not a non-negative integer")]
    InvalidTimestamp { index: usize, value: String },
    #[error("entry {index}: count must be at least 1")]
    ZeroCount { index: usize },
    #[error("entry {index}: {source}")]
    InvalidActor {
        index: usize,
        #[source]
        source: ActorIdError,
    },
    #[error("actor {actor} appears more than once")]
    DuplicateActor { actor: String },
}

pub fn encode(v: &VClock) -> WireClock {
    WireClock(v.to_string())
}

/// Parses the text form. Entries may arrive in any order; duplicate actors
/// are rejected.
pub fn decode(text: &str) -> Result<VClock, DecodeError> {
    if text.is_empty() {
        return Err(DecodeError::EmptyInput);
    }
    if text == EMPTY {
        return Ok(VClock::fresh());
    }

    let mut entries = Vec::new();
    for (index, raw) in text.split(';').enumerate() {
        let fields: Vec<&str> = raw.split(':').collect();
        let [actor, count, timestamp] = fields[..] else {
            return Err(DecodeError::FieldCount {
                index,
                entry: raw.to_owned(),
                fields: fields.len(),
            });
        };
        let actor =
            ActorId::new(actor).map_err(|source| DecodeError::InvalidActor { index, source })?;
        let count = parse_natural(count).ok_or_else(|| DecodeError::InvalidCount {
            index,
            value: count.to_owned(),
        })?;
        let timestamp = parse_natural(timestamp).ok_or_else(|| DecodeError::InvalidTimestamp {
            index,
            value: timestamp.to_owned(),
        })?;
        let count = Count::from(count);
        if count.is_zero() {
            return Err(DecodeError::ZeroCount { index });
        }
        entries.push(ClockEntry::new(actor, count, Timestamp::from(timestamp)));
    }

    VClock::from_entries(entries).map_err(|e| match e {
        ClockError::DuplicateActor(actor) => DecodeError::DuplicateActor {
            actor: actor.to_string(),
        },
        // zero counts were rejected per entry above
        ClockError::ZeroCount(_) => unreachable!("zero count already rejected"),
    })
}

// ASCII digits only: BigUint's own parser also takes a leading `+` and `_`.
pub(crate) fn parse_natural(s: &str) -> Option<BigUint> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigUint::parse_bytes(s.as_bytes(), 10)
}

impl fmt::Display for VClock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str(EMPTY);
        }
        for (i, e) in self.entries().iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{}:{}:{}", e.actor, e.count, e.timestamp)?;
        }
        Ok(())
    }
}

impl FromStr for VClock {
    type Err = DecodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        decode(s)
    }
}
