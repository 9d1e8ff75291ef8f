//! Unary (Peano) numerals: `O`, `S O`, `S S O`, ...
//!
//! Each successor is its own heap node, so a numeral costs memory linear in
//! the number it denotes. Construction, traversal and drop are iterative,
//! which keeps deep numerals safe from stack exhaustion.

use std::fmt;
use std::mem;

use thiserror::Error;

/// Largest value [`natural_to_peano`] will materialize.
pub const MATERIALIZE_LIMIT: u64 = 10_000_000;

/// Heap bytes allocated per successor node.
pub const NODE_BYTES: usize = mem::size_of::<Node>();

enum Node {
    Zero,
    Successor(Box<Node>),
}

/// A natural number as a chain of successor constructors over zero.
pub struct PeanoNumeral {
    root: Node,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("refusing to materialize a numeral of depth {requested}; the limit is {limit}")]
pub struct CapacityError {
    pub requested: u64,
    pub limit: u64,
}

impl PeanoNumeral {
    pub fn zero() -> Self {
        PeanoNumeral { root: Node::Zero }
    }

    #[must_use]
    pub fn succ(mut self) -> Self {
        let inner = mem::replace(&mut self.root, Node::Zero);
        PeanoNumeral {
            root: Node::Successor(Box::new(inner)),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.root, Node::Zero)
    }

    /// Strips one successor, or returns `None` for zero.
    pub fn into_predecessor(mut self) -> Option<PeanoNumeral> {
        match mem::replace(&mut self.root, Node::Zero) {
            Node::Zero => None,
            Node::Successor(inner) => Some(PeanoNumeral { root: *inner }),
        }
    }

    /// Number of successor constructors.
    pub fn depth(&self) -> u64 {
        let mut depth = 0;
        let mut node = &self.root;
        while let Node::Successor(inner) = node {
            depth += 1;
            node = inner;
        }
        depth
    }

    fn build(n: u64) -> Self {
        let mut node = Node::Zero;
        for _ in 0..n {
            node = Node::Successor(Box::new(node));
        }
        PeanoNumeral { root: node }
    }
}

impl Drop for PeanoNumeral {
    fn drop(&mut self) {
        let mut node = mem::replace(&mut self.root, Node::Zero);
        while let Node::Successor(inner) = node {
            node = *inner;
        }
    }
}

impl Clone for PeanoNumeral {
    fn clone(&self) -> Self {
        PeanoNumeral::build(self.depth())
    }
}

impl PartialEq for PeanoNumeral {
    fn eq(&self, other: &Self) -> bool {
        let (mut a, mut b) = (&self.root, &other.root);
        loop {
            match (a, b) {
                (Node::Zero, Node::Zero) => return true,
                (Node::Successor(x), Node::Successor(y)) => {
                    a = x;
                    b = y;
                }
                _ => return false,
            }
        }
    }
}

impl Eq for PeanoNumeral {}

impl fmt::Debug for PeanoNumeral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PeanoNumeral({})", self.depth())
    }
}

/// Renders as `S S O`.
impl fmt::Display for PeanoNumeral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for _ in 0..self.depth() {
            f.write_str("S ")?;
        }
        f.write_str("O")
    }
}

pub fn natural_to_peano(n: u64) -> Result<PeanoNumeral, CapacityError> {
    if n > MATERIALIZE_LIMIT {
        return Err(CapacityError {
            requested: n,
            limit: MATERIALIZE_LIMIT,
        });
    }
    Ok(PeanoNumeral::build(n))
}

/// Walks the whole successor chain.
pub fn peano_to_natural(p: &PeanoNumeral) -> u64 {
    p.depth()
}

/// Constructor nodes in the numeral for `n` (successors plus the zero),
/// computed without building it.
pub fn peano_cost(n: u64) -> u128 {
    u128::from(n) + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_two() {
        let zero = natural_to_peano(0).unwrap();
        assert!(zero.is_zero());
        assert_eq!(zero.to_string(), "O");

        let two = natural_to_peano(2).unwrap();
        assert_eq!(two.depth(), 2);
        assert_eq!(two.to_string(), "S S O");
        assert_eq!(two, PeanoNumeral::zero().succ().succ());
        let one = two.into_predecessor().unwrap();
        assert_eq!(peano_to_natural(&one), 1);
        assert!(one.into_predecessor().unwrap().into_predecessor().is_none());
    }

    #[test]
    fn cost_counts_constructors() {
        assert_eq!(peano_cost(0), 1);
        assert_eq!(peano_cost(2), 3);
        assert_eq!(peano_cost(1_390_525_760), 1_390_525_761);
        assert_eq!(peano_cost(u64::MAX), u128::from(u64::MAX) + 1);
    }

    #[test]
    fn round_trip_to_ten_thousand() {
        for k in 0..=10_000 {
            assert_eq!(peano_to_natural(&natural_to_peano(k).unwrap()), k);
        }
        assert_eq!(peano_to_natural(&natural_to_peano(1024).unwrap()), 1024);
    }

    #[test]
    fn capacity_ceiling() {
        assert_eq!(
            natural_to_peano(MATERIALIZE_LIMIT + 1).unwrap_err(),
            CapacityError {
                requested: MATERIALIZE_LIMIT + 1,
                limit: MATERIALIZE_LIMIT
            }
        );
    }

    #[test]
    fn deep_numeral_drops_and_clones_without_recursion() {
        let p = natural_to_peano(2_000_000).unwrap();
        let q = p.clone();
        assert_eq!(p, q);
        assert_ne!(p, natural_to_peano(1_999_999).unwrap());
        drop(p);
        assert_eq!(q.depth(), 2_000_000);
    }
}
