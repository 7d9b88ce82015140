//! A generic, deterministic, in-process map-reduce engine.
//!
//! One sequential mapper consumes the input records in order; emitted records
//! are partitioned by key, grouped with keys in ascending byte order and
//! values in emission order, and the groups are reduced by a pool of worker
//! threads. The output is the concatenation of partition outputs in
//! partition-index order, so a job's result is a pure function of its spec
//! and input — worker count and scheduling cannot change it.
//!
//! Jobs that need randomness take it from [`derive_rng_stream`], which keys
//! an independent reproducible stream off `(seed, generation, role, unit)`
//! so the draws a unit sees are the same no matter which worker runs it.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type DynError = Box<dyn std::error::Error + Send + Sync + 'static>;

/// A keyed record; keys must be non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Record {
    pub key: Vec<u8>,
    pub value: Vec<u8>,
}

impl Record {
    pub fn new(key: impl Into<Vec<u8>>, value: impl Into<Vec<u8>>) -> Self {
        Self {
            key: key.into(),
            value: value.into(),
        }
    }
}

/// Immutable key-value side data visible to every mapper and reducer.
#[derive(Debug, Clone, Default)]
pub struct JobConfig {
    entries: BTreeMap<Vec<u8>, Vec<u8>>,
}

impl JobConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<Vec<u8>>, value: impl Into<Vec<u8>>) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn get(&self, key: &[u8]) -> Option<&[u8]> {
        self.entries.get(key).map(Vec::as_slice)
    }
}

/// Map-phase output collector: emitted records plus job-config updates that
/// become visible to the reducers once the map phase finishes.
#[derive(Debug, Default)]
pub struct MapContext {
    records: Vec<Record>,
    config_updates: Vec<(Vec<u8>, Vec<u8>)>,
}

impl MapContext {
    pub fn emit(&mut self, key: impl Into<Vec<u8>>, value: impl Into<Vec<u8>>) {
        self.records.push(Record::new(key, value));
    }

    /// Publishes a job-config entry for the reduce phase. Later writes to the
    /// same key win.
    pub fn publish(&mut self, key: impl Into<Vec<u8>>, value: impl Into<Vec<u8>>) {
        self.config_updates.push((key.into(), value.into()));
    }
}

/// Context handed to each reduce call.
pub struct ReduceContext<'a> {
    config: &'a JobConfig,
    partition: usize,
}

impl<'a> ReduceContext<'a> {
    pub fn new(config: &'a JobConfig, partition: usize) -> Self {
        Self { config, partition }
    }

    pub fn config(&self, key: &[u8]) -> Option<&[u8]> {
        self.config.get(key)
    }

    pub fn partition(&self) -> usize {
        self.partition
    }
}

/// Map contract. `map` runs once per input record, in input order; `flush`
/// runs after the last record so buffering mappers can fail loudly on
/// leftover state.
pub trait Mapper: Send {
    fn map(&mut self, record: Record, ctx: &mut MapContext) -> Result<(), DynError>;

    fn flush(&mut self, _ctx: &mut MapContext) -> Result<(), DynError> {
        Ok(())
    }
}

/// Reduce contract: one call per key group. Values arrive in mapper-emission
/// order. Must be pure given its inputs and any stream derived from them —
/// groups may run concurrently on any worker.
pub trait Reducer: Send + Sync {
    fn reduce(
        &self,
        key: &[u8],
        values: &[Vec<u8>],
        ctx: &ReduceContext<'_>,
        out: &mut dyn FnMut(Record),
    ) -> Result<(), DynError>;
}

/// Routes a key to a partition index; must be a pure function of the key.
pub type Partitioner<'a> = Box<dyn Fn(&[u8]) -> usize + Send + Sync + 'a>;

/// One reduce group: (partition, key, values in emission order).
type Group = (usize, Vec<u8>, Vec<Vec<u8>>);

/// A complete job: the two contracts, the partition layout, and side data.
pub struct JobSpec<'a> {
    pub mapper: Box<dyn Mapper + 'a>,
    pub reducer: Box<dyn Reducer + 'a>,
    pub partition_count: usize,
    /// Pure function of the key, returning a partition index in
    /// `[0, partition_count)`.
    pub partitioner: Partitioner<'a>,
    pub job_config: JobConfig,
}

/// Stable FNV-1a key hash for the default partitioner.
pub fn hash_partitioner(partition_count: usize) -> Partitioner<'static> {
    Box::new(move |key| {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &b in key {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        (h % partition_count as u64) as usize
    })
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("mapper failed on record {record}: {source}")]
    MapperFailed { record: usize, source: DynError },
    #[error("reducer failed in partition {partition} on key {key}: {source}")]
    ReducerFailed {
        partition: usize,
        key: String,
        source: DynError,
    },
    #[error("record {record} has an empty key")]
    EmptyKey { record: usize },
    #[error("partitioner sent key {key} to partition {index}, but the job has {count} partitions")]
    PartitionOutOfRange {
        key: String,
        index: usize,
        count: usize,
    },
    #[error("partition count must be at least 1")]
    NoPartitions,
}

/// Per-phase accounting for one job, in a stable tab-separated layout.
#[derive(Debug, Clone, PartialEq)]
pub struct JobTrace {
    pub map_records_in: usize,
    pub map_records_out: usize,
    pub map_ms: f64,
    pub partition_sizes: Vec<usize>,
    pub group_count: usize,
    pub shuffle_ms: f64,
    pub reduce_records_out: usize,
    pub reduce_ms: f64,
}

impl JobTrace {
    /// Three lines: `map <in> <out> <ms>`, `shuffle <out> <groups> <partition
    /// sizes> <ms>`, `reduce <groups> <out> <ms>`.
    pub fn tsv(&self) -> String {
        let sizes: Vec<String> = self.partition_sizes.iter().map(usize::to_string).collect();
        format!(
            "map\t{}\t{}\t{:.3}\nshuffle\t{}\t{}\t{}\t{:.3}\nreduce\t{}\t{}\t{:.3}\n",
            self.map_records_in,
            self.map_records_out,
            self.map_ms,
            self.map_records_out,
            self.group_count,
            sizes.join(","),
            self.shuffle_ms,
            self.group_count,
            self.reduce_records_out,
            self.reduce_ms,
        )
    }
}

/// The execution engine: a reduce-phase worker pool of fixed size.
#[derive(Debug, Clone, Copy)]
pub struct Engine {
    worker_count: usize,
}

impl Engine {
    /// # Panics
    ///
    /// Panics if `worker_count` is zero.
    pub fn new(worker_count: usize) -> Self {
        assert!(worker_count >= 1, "worker count must be at least 1");
        Self { worker_count }
    }

    pub fn worker_count(&self) -> usize {
        self.worker_count
    }

    /// Runs a job to completion and returns its output records.
    pub fn run_job(
        &self,
        spec: JobSpec<'_>,
        input: Vec<Record>,
    ) -> Result<Vec<Record>, EngineError> {
        self.run_job_traced(spec, input).map(|(records, _)| records)
    }

    /// Like [`run_job`], also returning per-phase accounting.
    ///
    /// [`run_job`]: Engine::run_job
    pub fn run_job_traced(
        &self,
        mut spec: JobSpec<'_>,
        input: Vec<Record>,
    ) -> Result<(Vec<Record>, JobTrace), EngineError> {
        if spec.partition_count == 0 {
            return Err(EngineError::NoPartitions);
        }

        // Map phase: sequential, in input order.
        let map_start = Instant::now();
        let map_records_in = input.len();
        let mut ctx = MapContext::default();
        for (i, record) in input.into_iter().enumerate() {
            if record.key.is_empty() {
                return Err(EngineError::EmptyKey { record: i });
            }
            spec.mapper
                .map(record, &mut ctx)
                .map_err(|source| EngineError::MapperFailed { record: i, source })?;
        }
        spec.mapper
            .flush(&mut ctx)
            .map_err(|source| EngineError::MapperFailed {
                record: map_records_in,
                source,
            })?;
        let MapContext {
            records: mapped,
            config_updates,
        } = ctx;
        let map_ms = ms_since(map_start);

        let mut config = spec.job_config.clone();
        for (k, v) in config_updates {
            config.set(k, v);
        }

        // Shuffle: partition, then group by key with keys ascending and
        // values in emission order.
        let shuffle_start = Instant::now();
        let map_records_out = mapped.len();
        let mut partitions: Vec<BTreeMap<Vec<u8>, Vec<Vec<u8>>>> =
            (0..spec.partition_count).map(|_| BTreeMap::new()).collect();
        let mut partition_sizes = vec![0usize; spec.partition_count];
        for (i, record) in mapped.into_iter().enumerate() {
            if record.key.is_empty() {
                return Err(EngineError::EmptyKey { record: i });
            }
            let p = (spec.partitioner)(&record.key);
            if p >= spec.partition_count {
                return Err(EngineError::PartitionOutOfRange {
                    key: display_key(&record.key),
                    index: p,
                    count: spec.partition_count,
                });
            }
            partition_sizes[p] += 1;
            partitions[p]
                .entry(record.key)
                .or_default()
                .push(record.value);
        }
        let groups: Vec<Group> = partitions
            .into_iter()
            .enumerate()
            .flat_map(|(p, m)| m.into_iter().map(move |(k, vs)| (p, k, vs)))
            .collect();
        let group_count = groups.len();
        let shuffle_ms = ms_since(shuffle_start);

        // Reduce phase: groups may run on any worker; outputs are stitched
        // back together in canonical group order.
        let reduce_start = Instant::now();
        let outputs = self.reduce_groups(spec.reducer.as_ref(), &config, &groups)?;
        let reduce_ms = ms_since(reduce_start);

        let output: Vec<Record> = outputs.into_iter().flatten().collect();
        let trace = JobTrace {
            map_records_in,
            map_records_out,
            map_ms,
            partition_sizes,
            group_count,
            shuffle_ms,
            reduce_records_out: output.len(),
            reduce_ms,
        };
        Ok((output, trace))
    }

    fn reduce_groups(
        &self,
        reducer: &dyn Reducer,
        config: &JobConfig,
        groups: &[Group],
    ) -> Result<Vec<Vec<Record>>, EngineError> {
        let run_one = |(partition, key, values): &Group| {
            let ctx = ReduceContext {
                config,
                partition: *partition,
            };
            let mut emitted = Vec::new();
            reducer
                .reduce(key, values, &ctx, &mut |record| emitted.push(record))
                .map_err(|source| EngineError::ReducerFailed {
                    partition: *partition,
                    key: display_key(key),
                    source,
                })?;
            Ok(emitted)
        };

        let workers = self.worker_count.min(groups.len().max(1));
        if workers == 1 {
            return groups.iter().map(run_one).collect();
        }

        type Slot = Mutex<Option<Result<Vec<Record>, EngineError>>>;
        let next = AtomicUsize::new(0);
        let slots: Vec<Slot> = groups.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= groups.len() {
                        break;
                    }
                    let result = run_one(&groups[i]);
                    *slots[i].lock().unwrap() = Some(result);
                });
            }
        });
        // canonical order; on failure report the earliest failing group
        slots
            .into_iter()
            .map(|slot| {
                slot.into_inner()
                    .unwrap()
                    .expect("worker pool covered every group")
            })
            .collect()
    }
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn display_key(key: &[u8]) -> String {
    match std::str::from_utf8(key) {
        Ok(s) if s.chars().all(|c| !c.is_control()) => s.to_string(),
        _ => format!("0x{}", hex::encode(key)),
    }
}

/// Which phase a derived stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Map,
    Reduce,
}

/// Deterministic random stream keyed by `(master_seed, generation, role,
/// unit_index)`.
///
/// The tuple is folded through a splitmix64 chain into a 256-bit ChaCha8 key,
/// so distinct tuples give statistically independent streams and identical
/// tuples give identical draws regardless of which thread consumes them.
pub fn derive_rng_stream(
    master_seed: u64,
    generation: u64,
    role: StreamRole,
    unit_index: u64,
) -> ChaCha8Rng {
    let role_tag = match role {
        StreamRole::Map => 0x4d41_5000,
        StreamRole::Reduce => 0x5245_4400,
    };
    let mut state: u64 = 0x243f_6a88_85a3_08d3; // pi fraction, arbitrary non-zero start
    for word in [master_seed, generation, role_tag, unit_index] {
        state = splitmix64(state ^ word);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
