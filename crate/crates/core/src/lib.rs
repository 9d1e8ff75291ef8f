//! Vector clocks with size/age pruning, a deterministic replica simulator,
//! and an event-graph oracle that checks the clocks against happened-before.
//!
//! The clock API mirrors riak_core's `vclock` module:
//!
//! ```
//! use vclock::{ActorId, ClockOrdering, FixedClock, VClock};
//!
//! let a = ActorId::new("a").unwrap();
//! let b = ActorId::new("b").unwrap();
//! let v1 = VClock::fresh().increment(&a, &FixedClock::at(100));
//! let v2 = v1.increment(&b, &FixedClock::at(101));
//! assert_eq!(v2.compare(&v1), ClockOrdering::Descends);
//! assert_eq!(v2.to_string(), "a:1:100;b:1:101");
//! ```

pub mod cli;
pub mod clock;
pub mod codec;
pub mod oracle;
pub mod simulator;

pub use clock::{
    all_nodes, compare, descends, equal, fresh, get_counter, get_timestamp, increment, merge,
    prune, ActorId, ActorIdError, ClockEntry, ClockError, ClockOrdering, ClockSource, Count,
    FixedClock, PruneBounds, PruneBoundsError, SystemClock, Timestamp, VClock,
};
pub use codec::{decode, encode, DecodeError, WireClock};
