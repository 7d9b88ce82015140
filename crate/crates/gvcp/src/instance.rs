//! Problem instances: an undirected graph with per-vertex costs and a
//! three-level cost triple per edge, plus objective evaluation, incremental
//! flip deltas, the instance file format, and a random generator.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Errors from parsing, constructing, or generating instances.
///
/// Parse errors carry the 1-based line number of the offending input line.
#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: costs must be non-negative and edge triples ordered d0 >= d1 >= d2")]
    CostOrdering { line: usize },
    #[error("line {line}: self-loops are not allowed")]
    SelfLoop { line: usize },
    #[error("line {line}: duplicate undirected edge")]
    DuplicateEdge { line: usize },
    #[error("line {line}: vertex id out of range")]
    VertexOutOfRange { line: usize },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// An undirected edge with its cost triple.
///
/// `d0` applies when neither endpoint is covered, `d1` when exactly one is,
/// and `d2` when both are. Endpoints are 0-based and stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
}

/// A validated problem instance.
///
/// Immutable after construction, so it can be shared freely across worker
/// threads. Vertices are 0-based internally; the file format is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct GvcpInstance {
    vertex_costs: Vec<f64>,
    edges: Vec<Edge>,
    /// Per-vertex list of (neighbor, edge index).
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// A subset of the vertices of one instance, stored as one byte per vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VertexSubset {
    bits: Vec<u8>,
}

/// The objective split into its four components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    /// Sum of `c(v)` over covered vertices.
    pub vertex_cost: f64,
    /// Sum of `d2(e)` over edges with both endpoints covered.
    pub covered_edge_cost: f64,
    /// Sum of `d1(e)` over edges with exactly one endpoint covered.
    pub boundary_edge_cost: f64,
    /// Sum of `d0(e)` over edges with no endpoint covered.
    pub uncovered_edge_cost: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.vertex_cost
            + self.covered_edge_cost
            + self.boundary_edge_cost
            + self.uncovered_edge_cost
    }
}

impl VertexSubset {
    pub fn empty(n: usize) -> Self {
        Self { bits: vec![0; n] }
    }

    pub fn full(n: usize) -> Self {
        Self { bits: vec![1; n] }
    }

    /// Subset of `0..n` containing the given 0-based members.
    pub fn from_members(n: usize, members: &[usize]) -> Self {
        let mut s = Self::empty(n);
        for &v in members {
            s.set(v, true);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.bits[v] != 0
    }

    pub fn set(&mut self, v: usize, member: bool) {
        self.bits[v] = u8::from(member);
    }

    pub fn toggle(&mut self, v: usize) {
        self.bits[v] ^= 1;
    }

    /// Number of covered vertices.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    /// Covered vertices as 0-based ids, ascending.
    pub fn members(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.contains(v)).collect()
    }

    /// `'0'`/`'1'` string, vertex 0 first.
    pub fn to_bitstring(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b != 0 { '1' } else { '0' })
            .collect()
    }
}

impl GvcpInstance {
    /// Builds and validates an instance from raw parts.
    ///
    /// Edge endpoints may be given in either order; they are normalized to
    /// `u < v`. Rejects empty vertex sets, negative or non-finite costs,
    /// unordered triples, self-loops, out-of-range ids, and duplicate edges.
    pub fn from_parts(vertex_costs: Vec<f64>, edges: Vec<Edge>) -> Result<Self, InstanceError> {
        let n = vertex_costs.len();
        if n == 0 {
            return Err(InstanceError::InvalidInstance(
                "instance needs at least one vertex".into(),
            ));
        }
        for (v, &c) in vertex_costs.iter().enumerate() {
            if !c.is_finite() || c < 0.0 {
                return Err(InstanceError::InvalidInstance(format!(
                    "vertex {} has invalid cost {}",
                    v + 1,
                    c
                )));
            }
        }
        let mut normalized = Vec::with_capacity(edges.len());
        let mut seen = HashSet::with_capacity(edges.len());
        for (i, e) in edges.into_iter().enumerate() {
            if e.u >= n || e.v >= n {
                return Err(InstanceError::InvalidInstance(format!(
                    "edge {i} has endpoint out of range"
                )));
            }
            if e.u == e.v {
                return Err(InstanceError::InvalidInstance(format!(
                    "edge {i} is a self-loop"
                )));
            }
            if !valid_triple(e.d0, e.d1, e.d2) {
                return Err(InstanceError::InvalidInstance(format!(
                    "edge {i} violates d0 >= d1 >= d2 >= 0"
                )));
            }
            let (u, v) = (e.u.min(e.v), e.u.max(e.v));
            if !seen.insert((u, v)) {
                return Err(InstanceError::InvalidInstance(format!(
                    "edge {i} duplicates an earlier edge"
                )));
            }
            normalized.push(Edge { u, v, ..e });
        }
        Ok(Self::from_validated(vertex_costs, normalized))
    }

    /// Parts must already satisfy every instance invariant.
    fn from_validated(vertex_costs: Vec<f64>, edges: Vec<Edge>) -> Self {
        let mut adjacency = vec![Vec::new(); vertex_costs.len()];
        for (i, e) in edges.iter().enumerate() {
            adjacency[e.u].push((e.v, i));
            adjacency[e.v].push((e.u, i));
        }
        Self {
            vertex_costs,
            edges,
            adjacency,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_costs.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_costs(&self) -> &[f64] {
        &self.vertex_costs
    }

    pub fn vertex_cost(&self, v: usize) -> f64 {
        self.vertex_costs[v]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `v` as (neighbor, edge index) pairs.
    pub fn adjacency(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Objective value of a subset: `c(S) + d2(S) + d1(S, S^c) + d0(S^c)`.
    ///
    /// # Panics
    ///
    /// Panics if the subset length does not match the vertex count.
    pub fn evaluate(&self, s: &VertexSubset) -> f64 {
        self.cost_breakdown(s).total()
    }

    /// Objective value split by edge class; same contract as [`evaluate`].
    ///
    /// [`evaluate`]: GvcpInstance::evaluate
    pub fn cost_breakdown(&self, s: &VertexSubset) -> CostBreakdown {
        assert_eq!(
            s.len(),
            self.vertex_count(),
            "subset length {} does not match vertex count {}",
            s.len(),
            self.vertex_count()
        );
        let mut b = CostBreakdown {
            vertex_cost: 0.0,
            covered_edge_cost: 0.0,
            boundary_edge_cost: 0.0,
            uncovered_edge_cost: 0.0,
        };
        for v in 0..self.vertex_count() {
            if s.contains(v) {
                b.vertex_cost += self.vertex_costs[v];
            }
        }
        for e in &self.edges {
            match (s.contains(e.u), s.contains(e.v)) {
                (true, true) => b.covered_edge_cost += e.d2,
                (false, false) => b.uncovered_edge_cost += e.d0,
                _ => b.boundary_edge_cost += e.d1,
            }
        }
        b
    }

    /// Change in objective from flipping vertex `v` in or out of `s`,
    /// computed in `O(degree(v))` without mutating `s`.
    ///
    /// Equals `evaluate(s ^ {v}) - evaluate(s)` exactly for integer cost data.
    ///
    /// # Panics
    ///
    /// Panics if `v` is out of range or the subset length does not match.
    pub fn flip_delta(&self, s: &VertexSubset, v: usize) -> f64 {
        assert_eq!(
            s.len(),
            self.vertex_count(),
            "subset length {} does not match vertex count {}",
            s.len(),
            self.vertex_count()
        );
        assert!(v < self.vertex_count(), "vertex {v} out of range");
        let joining = !s.contains(v);
        let mut delta = if joining {
            self.vertex_costs[v]
        } else {
            -self.vertex_costs[v]
        };
        for &(neighbor, ei) in &self.adjacency[v] {
            let e = &self.edges[ei];
            delta += match (joining, s.contains(neighbor)) {
                (true, true) => e.d2 - e.d1,
                (true, false) => e.d1 - e.d0,
                (false, true) => e.d1 - e.d2,
                (false, false) => e.d0 - e.d1,
            };
        }
        delta
    }
}

fn valid_triple(d0: f64, d1: f64, d2: f64) -> bool {
    d0.is_finite() && d1.is_finite() && d2.is_finite() && d0 >= d1 && d1 >= d2 && d2 >= 0.0
}

/// Parses the instance file format.
///
/// ```text
/// # comment lines start with '#', blank lines are skipped
/// n m
/// c1 c2 ... cn
/// u v d0 d1 d2        (m lines, 1-based vertex ids)
/// ```
pub fn parse_instance(text: &str) -> Result<GvcpInstance, InstanceError> {
    let mut total_lines = 0;
    let mut lines = text
        .lines()
        .map(|l| {
            total_lines += 1;
            (total_lines, l.trim())
        })
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect::<Vec<_>>()
        .into_iter();

    let (header_line, header) = lines.next().ok_or_else(|| InstanceError::Malformed {
        line: 1,
        message: "missing header line".into(),
    })?;
    let mut it = header.split_whitespace();
    let n: usize = parse_token(it.next(), header_line, "vertex count")?;
    let m: usize = parse_token(it.next(), header_line, "edge count")?;
    if it.next().is_some() {
        return Err(InstanceError::Malformed {
            line: header_line,
            message: "header must be exactly 'n m'".into(),
        });
    }
    if n == 0 {
        return Err(InstanceError::Malformed {
            line: header_line,
            message: "vertex count must be at least 1".into(),
        });
    }

    let (cost_line, costs) = lines.next().ok_or(InstanceError::Malformed {
        line: header_line,
        message: "missing vertex cost line".into(),
    })?;
    let tokens: Vec<&str> = costs.split_whitespace().collect();
    if tokens.len() != n {
        return Err(InstanceError::Malformed {
            line: cost_line,
            message: format!("expected {n} vertex costs, found {}", tokens.len()),
        });
    }
    let mut vertex_costs = Vec::with_capacity(n);
    for t in tokens {
        let c: f64 = t.parse().map_err(|_| InstanceError::Malformed {
            line: cost_line,
            message: format!("bad cost '{t}'"),
        })?;
        if !c.is_finite() || c < 0.0 {
            return Err(InstanceError::CostOrdering { line: cost_line });
        }
        vertex_costs.push(c);
    }

    let mut edges = Vec::with_capacity(m);
    let mut seen = HashSet::with_capacity(m);
    let mut last_line = cost_line;
    for _ in 0..m {
        let (line, text) = lines.next().ok_or(InstanceError::Malformed {
            line: last_line,
            message: format!("expected {m} edge lines, input ended early"),
        })?;
        last_line = line;
        let tok: Vec<&str> = text.split_whitespace().collect();
        if tok.len() != 5 {
            return Err(InstanceError::Malformed {
                line,
                message: format!("expected 'u v d0 d1 d2', found {} fields", tok.len()),
            });
        }
        let u: usize = parse_token(Some(tok[0]), line, "vertex id")?;
        let v: usize = parse_token(Some(tok[1]), line, "vertex id")?;
        if u == 0 || v == 0 || u > n || v > n {
            return Err(InstanceError::VertexOutOfRange { line });
        }
        if u == v {
            return Err(InstanceError::SelfLoop { line });
        }
        let mut d = [0.0f64; 3];
        for (slot, t) in d.iter_mut().zip(&tok[2..]) {
            *slot = t.parse().map_err(|_| InstanceError::Malformed {
                line,
                message: format!("bad cost '{t}'"),
            })?;
        }
        if !valid_triple(d[0], d[1], d[2]) {
            return Err(InstanceError::CostOrdering { line });
        }
        let (u, v) = (u.min(v) - 1, u.max(v) - 1);
        if !seen.insert((u, v)) {
            return Err(InstanceError::DuplicateEdge { line });
        }
        edges.push(Edge {
            u,
            v,
            d0: d[0],
            d1: d[1],
            d2: d[2],
        });
    }
    if let Some((line, _)) = lines.next() {
        return Err(InstanceError::Malformed {
            line,
            message: "unexpected content after last edge".into(),
        });
    }
    Ok(GvcpInstance::from_validated(vertex_costs, edges))
}

fn parse_token<T: std::str::FromStr>(
    token: Option<&str>,
    line: usize,
    what: &str,
) -> Result<T, InstanceError> {
    let t = token.ok_or_else(|| InstanceError::Malformed {
        line,
        message: format!("missing {what}"),
    })?;
    t.parse().map_err(|_| InstanceError::Malformed {
        line,
        message: format!("bad {what} '{t}'"),
    })
}

/// Serializes an instance in the canonical file format.
///
/// The output round-trips: `parse_instance(&write_instance(x))` reproduces
/// `x` exactly, and re-serializing yields identical bytes.
pub fn write_instance(instance: &GvcpInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", instance.vertex_count(), instance.edge_count());
    let costs: Vec<String> = instance
        .vertex_costs
        .iter()
        .map(|c| c.to_string())
        .collect();
    let _ = writeln!(out, "{}", costs.join(" "));
    for e in &instance.edges {
        let _ = writeln!(out, "{} {} {} {} {}", e.u + 1, e.v + 1, e.d0, e.d1, e.d2);
    }
    out
}

/// Generates a random instance: Erdős–Rényi edges with probability
/// `edge_prob`, vertex costs uniform integers in `[0, cost_max]`, and each
/// edge triple drawn as three uniform integers sorted descending so that
/// `d0 >= d1 >= d2`. Deterministic for a given seed.
pub fn generate_instance(
    n: usize,
    edge_prob: f64,
    cost_max: u64,
    seed: u64,
) -> Result<GvcpInstance, InstanceError> {
    if n == 0 {
        return Err(InstanceError::InvalidParameter(
            "vertex count must be at least 1".into(),
        ));
    }
    if !(edge_prob > 0.0 && edge_prob <= 1.0) {
        return Err(InstanceError::InvalidParameter(format!(
            "edge probability must be in (0, 1], got {edge_prob}"
        )));
    }
    if cost_max == 0 {
        return Err(InstanceError::InvalidParameter(
            "cost-max must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertex_costs: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=cost_max) as f64).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < edge_prob {
                let mut d = [
                    rng.gen_range(0..=cost_max) as f64,
                    rng.gen_range(0..=cost_max) as f64,
                    rng.gen_range(0..=cost_max) as f64,
                ];
                d.sort_by(|a, b| b.total_cmp(a));
                edges.push(Edge {
                    u,
                    v,
                    d0: d[0],
                    d1: d[1],
                    d2: d[2],
                });
            }
        }
    }
    Ok(GvcpInstance::from_validated(vertex_costs, edges))
}
