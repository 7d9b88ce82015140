//! Exhaustive optimum for small instances.
//!
//! Enumerates all `2^n` subsets in Gray-code order so each step flips a
//! single vertex and costs only `O(degree)` via [`GvcpInstance::flip_delta`].
//! This is the correctness oracle for the heuristic solvers, so it stays a
//! plain single pass with no pruning.

use thiserror::Error;

use crate::instance::{GvcpInstance, VertexSubset};

/// Default enumeration cap; `2^26` subsets is the most `solve_exact` will scan.
pub const DEFAULT_VERTEX_CAP: usize = 26;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("instance has {n} vertices; exact enumeration is capped at {cap}")]
    InstanceTooLarge { n: usize, cap: usize },
}

/// A proven optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub best_subset: VertexSubset,
    pub best_cost: f64,
    pub subsets_examined: u64,
}

/// Finds the minimum-cost subset, enumerating with [`DEFAULT_VERTEX_CAP`].
pub fn solve_exact(instance: &GvcpInstance) -> Result<ExactResult, ExactError> {
    solve_exact_with_cap(instance, DEFAULT_VERTEX_CAP)
}

/// Finds the minimum-cost subset for instances with at most `cap` vertices.
///
/// Ties are broken deterministically towards the lexicographically smallest
/// bitstring (vertex 0 most significant), so repeated runs return the
/// identical subset.
pub fn solve_exact_with_cap(
    instance: &GvcpInstance,
    cap: usize,
) -> Result<ExactResult, ExactError> {
    let n = instance.vertex_count();
    let cap = cap.min(62);
    if n > cap {
        return Err(ExactError::InstanceTooLarge { n, cap });
    }

    let mut current = VertexSubset::empty(n);
    let mut cost = instance.evaluate(&current);
    let mut mask: u64 = 0;
    let mut best_mask: u64 = 0;
    let mut best_cost = cost;

    let total: u64 = 1 << n;
    for i in 1..total {
        // Gray code: step i flips exactly bit trailing_zeros(i).
        let v = i.trailing_zeros() as usize;
        cost += instance.flip_delta(&current, v);
        current.toggle(v);
        mask ^= 1 << v;
        if cost < best_cost || (cost == best_cost && lex_less(mask, best_mask)) {
            best_cost = cost;
            best_mask = mask;
        }
    }

    let members: Vec<usize> = (0..n).filter(|v| best_mask >> v & 1 == 1).collect();
    let best_subset = VertexSubset::from_members(n, &members);
    // report the directly evaluated cost, not the accumulated one
    let best_cost = instance.evaluate(&best_subset);
    Ok(ExactResult {
        best_subset,
        best_cost,
        subsets_examined: total,
    })
}

/// Bitstring order with bit 0 most significant: the first differing bit is
/// the lowest-index one, and the mask holding a 0 there is smaller.
fn lex_less(a: u64, b: u64) -> bool {
    let diff = a ^ b;
    if diff == 0 {
        return false;
    }
    a >> diff.trailing_zeros() & 1 == 0
}
