//! Solvers for the minimum generalized vertex cover problem.
//!
//! Given an undirected graph with a cost `c(v)` per vertex and a cost triple
//! `d0 >= d1 >= d2 >= 0` per edge, the problem asks for a vertex subset `S`
//! minimizing `c(S) + d2(S) + d1(S, S^c) + d0(S^c)`: an edge pays `d2` when
//! both endpoints are covered, `d1` when exactly one is, and `d0` when none is.
//!
//! The crate provides:
//!
//! - [`instance`]: instance representation, objective evaluation (full and
//!   incremental), the text file format, and a random instance generator;
//! - [`exact`]: an exhaustive-enumeration optimum, used as the correctness
//!   oracle for everything else;
//! - [`ga`]: the evolutionary operators (fine-grained tournament selection,
//!   one-point crossover, frozen-gene mutation, first-improvement local
//!   search) and a single-threaded reference generation step;
//! - [`mapreduce`]: a generic, deterministic, in-process map-reduce engine
//!   (map, shuffle with sort/group-by-key, parallel reduce) plus keyed
//!   reproducible random streams;
//! - [`driver`]: the genetic algorithm expressed as iterated map-reduce jobs
//!   (selection and elitism in the map phase, crossover/mutation/scoring in
//!   the reduce phase) and its convergence loop;
//! - [`report`] and [`cli`]: run reports and the `gvcp` command-line tool.

pub mod cli;
pub mod driver;
pub mod exact;
pub mod ga;
pub mod instance;
pub mod mapreduce;
pub mod report;
