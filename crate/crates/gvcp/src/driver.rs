//! The genetic algorithm as iterated map-reduce jobs.
//!
//! Each generation is one job. The map phase buffers the scored population,
//! sorts it best-first, improves the best individual by local search, emits
//! the elite as passthrough records and the remaining `(Z - E) / 2` parent
//! pairs chosen by tournament selection, and publishes the frozen-gene mask
//! through the job config. The reduce phase turns each pair record into next
//! generation individuals: passthroughs are rescored as-is, parent pairs are
//! crossed, mutated, and scored. Records are keyed by a per-generation pair
//! id, so duplicate chromosomes never collapse into one shuffle group.
//!
//! Randomness is keyed per unit: the single map unit draws from
//! `(seed, generation, Map, 0)` and each pair from
//! `(seed, generation, Reduce, pair_id)`, which makes every run reproducible
//! and independent of worker count. Generation 0 is the initial population;
//! its stream is `(seed, 0, Map, 0)`.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ga::{
    best_individual, compute_frozen_mask, fgts_select, init_population, local_search, mutate,
    one_point_crossover, sort_population, Chromosome, FrozenMask, GaConfig, GaError,
    ScoredIndividual,
};
use crate::instance::GvcpInstance;
use crate::mapreduce::{
    derive_rng_stream, DynError, Engine, EngineError, JobConfig, JobSpec, JobTrace, MapContext,
    Mapper, Record, ReduceContext, Reducer, StreamRole,
};

/// Job-config key carrying the frozen-gene mask as a `'0'`/`'1'` string.
pub const CONFIG_FROZEN_MASK: &[u8] = b"frozen_mask";
/// Job-config key carrying the generation index as big-endian u64.
pub const CONFIG_GENERATION: &[u8] = b"generation";

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Ga(#[from] GaError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("job config entry '{0}' is missing")]
    MissingJobConfig(String),
    #[error("job produced {actual} individuals, expected {expected}")]
    UnexpectedJobOutput { expected: usize, actual: usize },
}

/// The shuffle unit: a unique pair id plus one or two parents. A missing
/// second parent marks an elite passthrough.
///
/// Pair ids are contiguous from 0 within a generation and ids below the
/// elite count are the passthroughs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub pair_id: u64,
    pub parent1: Chromosome,
    pub parent2: Option<Chromosome>,
}

impl PairRecord {
    /// Key is the pair id as 8 big-endian bytes (so byte order equals
    /// numeric order); value is `parent1,parent2` as bitstrings with an
    /// empty second field for passthroughs.
    pub fn to_record(&self) -> Record {
        let mut value = self.parent1.to_bitstring().into_bytes();
        value.push(b',');
        if let Some(p2) = &self.parent2 {
            value.extend_from_slice(p2.to_bitstring().as_bytes());
        }
        Record::new(self.pair_id.to_be_bytes().to_vec(), value)
    }

    pub fn from_record(key: &[u8], value: &[u8]) -> Result<Self, DriverError> {
        let key: [u8; 8] = key
            .try_into()
            .map_err(|_| DriverError::MalformedRecord("pair key must be 8 bytes".into()))?;
        let pair_id = u64::from_be_bytes(key);
        let text = std::str::from_utf8(value)
            .map_err(|_| DriverError::MalformedRecord("pair value is not UTF-8".into()))?;
        let (p1, p2) = text
            .split_once(',')
            .ok_or_else(|| DriverError::MalformedRecord("pair value lacks a separator".into()))?;
        let parent1 = Chromosome::from_bitstring(p1)
            .map_err(|_| DriverError::MalformedRecord(format!("bad parent bitstring '{p1}'")))?;
        let parent2 = if p2.is_empty() {
            None
        } else {
            Some(Chromosome::from_bitstring(p2).map_err(|_| {
                DriverError::MalformedRecord(format!("bad parent bitstring '{p2}'"))
            })?)
        };
        Ok(Self {
            pair_id,
            parent1,
            parent2,
        })
    }
}

/// Wire form of a scored individual: key is the chromosome bitstring, value
/// the fitness as big-endian IEEE-754 bits.
pub fn encode_individual(individual: &ScoredIndividual) -> Record {
    Record::new(
        individual.chromosome.to_bitstring().into_bytes(),
        individual.fitness.to_be_bytes().to_vec(),
    )
}

pub fn decode_individual(record: &Record) -> Result<ScoredIndividual, DriverError> {
    let text = std::str::from_utf8(&record.key)
        .map_err(|_| DriverError::MalformedRecord("chromosome key is not UTF-8".into()))?;
    let chromosome = Chromosome::from_bitstring(text)
        .map_err(|_| DriverError::MalformedRecord(format!("bad chromosome bitstring '{text}'")))?;
    let bits: [u8; 8] = record
        .value
        .as_slice()
        .try_into()
        .map_err(|_| DriverError::MalformedRecord("fitness value must be 8 bytes".into()))?;
    Ok(ScoredIndividual {
        chromosome,
        fitness: f64::from_be_bytes(bits),
    })
}

/// Map-phase core: sort, improve the best by local search, emit elite
/// passthroughs and tournament-selected parent pairs, and report the frozen
/// mask of the (post-local-search) population.
pub fn select_pairs(
    instance: &GvcpInstance,
    population: &[ScoredIndividual],
    config: &GaConfig,
    rng: &mut impl Rng,
) -> Result<(Vec<PairRecord>, FrozenMask), DriverError> {
    let z = config.population_size;
    if population.len() != z {
        return Err(GaError::WrongPopulationSize {
            expected: z,
            actual: population.len(),
        }
        .into());
    }
    let e = config.elite_count;
    let mut sorted = population.to_vec();
    sort_population(&mut sorted);
    let improved = local_search(instance, &sorted[0].chromosome);
    sorted[0] = ScoredIndividual::new(instance, improved);
    let frozen = compute_frozen_mask(sorted.iter().map(|s| &s.chromosome));

    let mut pairs = Vec::with_capacity(e + config.pairs_per_generation());
    for (i, elite) in sorted[..e].iter().enumerate() {
        pairs.push(PairRecord {
            pair_id: i as u64,
            parent1: elite.chromosome.clone(),
            parent2: None,
        });
    }
    for i in 0..config.pairs_per_generation() {
        let parent1 = fgts_select(&sorted, config.tournament_size, rng)
            .chromosome
            .clone();
        let parent2 = fgts_select(&sorted, config.tournament_size, rng)
            .chromosome
            .clone();
        pairs.push(PairRecord {
            pair_id: (e + i) as u64,
            parent1,
            parent2: Some(parent2),
        });
    }
    Ok((pairs, frozen))
}

/// Reduce-phase core: an elite passthrough is rescored and forwarded; a
/// parent pair is crossed with probability `crossover_prob` at a uniform cut
/// in `[0, n]`, both children mutated under the frozen mask, and both scored.
pub fn breed_pair(
    instance: &GvcpInstance,
    pair: &PairRecord,
    frozen: &FrozenMask,
    config: &GaConfig,
    rng: &mut impl Rng,
) -> Vec<ScoredIndividual> {
    match &pair.parent2 {
        None => vec![ScoredIndividual::new(instance, pair.parent1.clone())],
        Some(parent2) => {
            let n = instance.vertex_count();
            let (c1, c2) = if rng.gen::<f64>() < config.crossover_prob {
                let cut = rng.gen_range(0..=n);
                one_point_crossover(&pair.parent1, parent2, cut)
            } else {
                (pair.parent1.clone(), parent2.clone())
            };
            let rates = config.mutation_rates(n);
            let c1 = mutate(&c1, frozen, rates, rng);
            let c2 = mutate(&c2, frozen, rates, rng);
            vec![
                ScoredIndividual::new(instance, c1),
                ScoredIndividual::new(instance, c2),
            ]
        }
    }
}

/// Buffers `(solution, fitness)` records until the whole population has
/// arrived, then runs [`select_pairs`] once and publishes the frozen mask
/// and generation index for the reducers.
struct SelectionMapper<'a> {
    instance: &'a GvcpInstance,
    config: &'a GaConfig,
    generation: u64,
    buffer: Vec<ScoredIndividual>,
}

impl<'a> SelectionMapper<'a> {
    fn new(instance: &'a GvcpInstance, config: &'a GaConfig, generation: u64) -> Self {
        Self {
            instance,
            config,
            generation,
            buffer: Vec::with_capacity(config.population_size),
        }
    }
}

impl Mapper for SelectionMapper<'_> {
    fn map(&mut self, record: Record, ctx: &mut MapContext) -> Result<(), DynError> {
        self.buffer.push(decode_individual(&record)?);
        if self.buffer.len() == self.config.population_size {
            let mut rng =
                derive_rng_stream(self.config.master_seed, self.generation, StreamRole::Map, 0);
            let (pairs, frozen) = select_pairs(self.instance, &self.buffer, self.config, &mut rng)?;
            for pair in &pairs {
                let record = pair.to_record();
                ctx.emit(record.key, record.value);
            }
            ctx.publish(
                CONFIG_FROZEN_MASK.to_vec(),
                frozen.to_bitstring().into_bytes(),
            );
            ctx.publish(
                CONFIG_GENERATION.to_vec(),
                self.generation.to_be_bytes().to_vec(),
            );
            self.buffer.clear();
        }
        Ok(())
    }

    fn flush(&mut self, _ctx: &mut MapContext) -> Result<(), DynError> {
        if self.buffer.is_empty() {
            Ok(())
        } else {
            Err(Box::new(DriverError::from(GaError::WrongPopulationSize {
                expected: self.config.population_size,
                actual: self.buffer.len(),
            })))
        }
    }
}

/// Applies [`breed_pair`] to one pair record per key group, drawing from the
/// stream keyed by the pair id.
struct BreedingReducer<'a> {
    instance: &'a GvcpInstance,
    config: &'a GaConfig,
}

impl Reducer for BreedingReducer<'_> {
    fn reduce(
        &self,
        key: &[u8],
        values: &[Vec<u8>],
        ctx: &ReduceContext<'_>,
        out: &mut dyn FnMut(Record),
    ) -> Result<(), DynError> {
        if values.len() != 1 {
            return Err(Box::new(DriverError::MalformedRecord(format!(
                "pair group holds {} values, expected exactly 1",
                values.len()
            ))));
        }
        let pair = PairRecord::from_record(key, &values[0])?;
        let mask_bytes = ctx
            .config(CONFIG_FROZEN_MASK)
            .ok_or_else(|| DriverError::MissingJobConfig("frozen_mask".into()))?;
        let mask_text = std::str::from_utf8(mask_bytes)
            .map_err(|_| DriverError::MalformedRecord("frozen mask is not UTF-8".into()))?;
        let frozen = FrozenMask::from_bitstring(mask_text)
            .map_err(|_| DriverError::MalformedRecord("frozen mask is not a bitstring".into()))?;
        let generation_bytes = ctx
            .config(CONFIG_GENERATION)
            .ok_or_else(|| DriverError::MissingJobConfig("generation".into()))?;
        let generation: [u8; 8] = generation_bytes
            .try_into()
            .map_err(|_| DriverError::MalformedRecord("generation must be 8 bytes".into()))?;
        let mut rng = derive_rng_stream(
            self.config.master_seed,
            u64::from_be_bytes(generation),
            StreamRole::Reduce,
            pair.pair_id,
        );
        for individual in breed_pair(self.instance, &pair, &frozen, self.config, &mut rng) {
            let record = encode_individual(&individual);
            out(record);
        }
        Ok(())
    }
}

fn pair_partitioner(partition_count: usize) -> crate::mapreduce::Partitioner<'static> {
    Box::new(move |key| {
        let mut bytes = [0u8; 8];
        if key.len() == 8 {
            bytes.copy_from_slice(key);
        }
        (u64::from_be_bytes(bytes) % partition_count as u64) as usize
    })
}

/// Runs one generation as a map-reduce job and decodes the next population.
pub fn run_generation_job(
    instance: &GvcpInstance,
    config: &GaConfig,
    engine: &Engine,
    population: &[ScoredIndividual],
    generation: u64,
) -> Result<(Vec<ScoredIndividual>, JobTrace), DriverError> {
    let spec = JobSpec {
        mapper: Box::new(SelectionMapper::new(instance, config, generation)),
        reducer: Box::new(BreedingReducer { instance, config }),
        partition_count: config.worker_count,
        partitioner: pair_partitioner(config.worker_count),
        job_config: JobConfig::new(),
    };
    let input: Vec<Record> = population.iter().map(encode_individual).collect();
    let (output, trace) = engine.run_job_traced(spec, input)?;
    let next: Vec<ScoredIndividual> = output
        .iter()
        .map(decode_individual)
        .collect::<Result<_, _>>()?;
    if next.len() != config.population_size {
        return Err(DriverError::UnexpectedJobOutput {
            expected: config.population_size,
            actual: next.len(),
        });
    }
    Ok((next, trace))
}

/// One row of run history, describing the population a generation produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_cost: f64,
    pub mean_cost: f64,
    pub frozen_count: usize,
    pub elapsed_ms: f64,
}

/// Outcome of an [`evolve`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveResult {
    pub best_chromosome: Chromosome,
    pub best_cost: f64,
    pub generations_run: usize,
    pub history: Vec<GenerationStats>,
}

/// Runs the full genetic algorithm.
///
/// Creates and scores the initial population, then iterates generation jobs
/// until `max_generations` or until the best-ever cost has not improved for
/// `stall_generations` consecutive generations. Returns the best individual
/// seen across the whole run together with per-generation history.
///
/// Results are identical for identical `(instance, config)` regardless of
/// worker count.
pub fn evolve(instance: &GvcpInstance, config: &GaConfig) -> Result<EvolveResult, DriverError> {
    evolve_traced(instance, config, |_, _| {})
}

/// [`evolve`] with a per-generation callback receiving each job's trace.
pub fn evolve_traced(
    instance: &GvcpInstance,
    config: &GaConfig,
    mut on_trace: impl FnMut(usize, &JobTrace),
) -> Result<EvolveResult, DriverError> {
    config.validate()?;
    let mut init_rng = derive_rng_stream(config.master_seed, 0, StreamRole::Map, 0);
    let mut population: Vec<ScoredIndividual> = init_population(instance, config, &mut init_rng)?
        .into_iter()
        .map(|chromosome| ScoredIndividual::new(instance, chromosome))
        .collect();

    let mut best = best_individual(&population).clone();
    let engine = Engine::new(config.worker_count);
    let mut history = Vec::new();
    let mut generations_run = 0;
    let mut stall = 0;

    for generation in 1..=config.max_generations {
        let start = Instant::now();
        let (next, trace) =
            run_generation_job(instance, config, &engine, &population, generation as u64)?;
        population = next;
        generations_run = generation;
        on_trace(generation, &trace);

        let generation_best = best_individual(&population);
        if generation_best.cost() < best.cost() {
            best = generation_best.clone();
            stall = 0;
        } else {
            stall += 1;
        }
        let mean_cost =
            population.iter().map(ScoredIndividual::cost).sum::<f64>() / population.len() as f64;
        history.push(GenerationStats {
            generation,
            best_cost: generation_best.cost(),
            mean_cost,
            frozen_count: compute_frozen_mask(population.iter().map(|s| &s.chromosome)).count(),
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if stall >= config.stall_generations {
            break;
        }
    }

    Ok(EvolveResult {
        best_cost: best.cost(),
        best_chromosome: best.chromosome,
        generations_run,
        history,
    })
}

/// Differential check of the parallelization: runs the single-threaded
/// reference step and the map-reduce path from the same initial population
/// for `max_generations` generations and reports whether the populations
/// match at every generation (compared in sorted order; the engine
/// interleaves partition outputs, which permutes but never changes the
/// population).
pub fn serial_parallel_equivalence(
    instance: &GvcpInstance,
    config: &GaConfig,
) -> Result<bool, DriverError> {
    config.validate()?;
    let mut init_rng = derive_rng_stream(config.master_seed, 0, StreamRole::Map, 0);
    let initial: Vec<ScoredIndividual> = init_population(instance, config, &mut init_rng)?
        .into_iter()
        .map(|chromosome| ScoredIndividual::new(instance, chromosome))
        .collect();

    let engine = Engine::new(config.worker_count);
    let mut serial = initial.clone();
    let mut parallel = initial;
    for generation in 1..=config.max_generations {
        serial = crate::ga::generation_step_serial(instance, &serial, config, generation as u64)?;
        parallel = run_generation_job(instance, config, &engine, &parallel, generation as u64)?.0;
        let mut lhs = serial.clone();
        let mut rhs = parallel.clone();
        sort_population(&mut lhs);
        sort_population(&mut rhs);
        if lhs != rhs {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ga::fitness;
    use crate::instance::{generate_instance, parse_instance};
    use crate::mapreduce::derive_rng_stream;

    const EXAMPLE: &str =
        "4 5\n10 20 30 40\n1 2 50 30 20\n1 3 40 40 30\n1 4 50 20 20\n2 3 30 20 10\n3 4 20 20 20\n";

    fn example() -> GvcpInstance {
        parse_instance(EXAMPLE).unwrap()
    }

    fn chrom(s: &str) -> Chromosome {
        Chromosome::from_bitstring(s).unwrap()
    }

    fn scored_population(
        instance: &GvcpInstance,
        config: &GaConfig,
        seed: u64,
    ) -> Vec<ScoredIndividual> {
        let mut rng = derive_rng_stream(seed, 0, StreamRole::Map, 0);
        init_population(instance, config, &mut rng)
            .unwrap()
            .into_iter()
            .map(|c| ScoredIndividual::new(instance, c))
            .collect()
    }

    #[test]
    fn select_pairs_emits_elites_then_pairs() {
        let inst = example();
        let config = GaConfig::default();
        let population = scored_population(&inst, &config, 1);
        let mut rng = derive_rng_stream(1, 1, StreamRole::Map, 0);
        let (pairs, _) = select_pairs(&inst, &population, &config, &mut rng).unwrap();
        assert_eq!(pairs.len(), 100); // 50 elites + 50 pairs

        let ids: Vec<u64> = pairs.iter().map(|p| p.pair_id).collect();
        assert_eq!(ids, (0..100).collect::<Vec<u64>>());
        for pair in &pairs[..50] {
            assert!(pair.pair_id < 50);
            assert!(pair.parent2.is_none());
        }
        for pair in &pairs[50..] {
            assert!(pair.parent2.is_some());
        }

        // elites are the top-50 of the sorted population after local search
        let mut sorted = population.clone();
        sort_population(&mut sorted);
        sorted[0] = ScoredIndividual::new(&inst, local_search(&inst, &sorted[0].chromosome));
        for (pair, elite) in pairs[..50].iter().zip(&sorted[..50]) {
            assert_eq!(pair.parent1, elite.chromosome);
        }
    }

    #[test]
    fn select_pairs_is_deterministic_and_checks_size() {
        let inst = example();
        let config = GaConfig::default();
        let population = scored_population(&inst, &config, 2);
        let run = || {
            let mut rng = derive_rng_stream(9, 3, StreamRole::Map, 0);
            select_pairs(&inst, &population, &config, &mut rng).unwrap()
        };
        let (a, mask_a) = run();
        let (b, mask_b) = run();
        assert_eq!(a, b);
        assert_eq!(mask_a, mask_b);

        let mut rng = derive_rng_stream(9, 3, StreamRole::Map, 0);
        assert!(matches!(
            select_pairs(&inst, &population[..10], &config, &mut rng),
            Err(DriverError::Ga(GaError::WrongPopulationSize {
                expected: 150,
                actual: 10
            }))
        ));
    }

    #[test]
    fn select_pairs_on_converged_population() {
        // a population of copies of a local optimum stays fully frozen and
        // every selected parent is that chromosome
        let inst = example();
        let config = GaConfig::default();
        let population = vec![ScoredIndividual::new(&inst, chrom("1000")); config.population_size];
        let mut rng = derive_rng_stream(4, 1, StreamRole::Map, 0);
        let (pairs, frozen) = select_pairs(&inst, &population, &config, &mut rng).unwrap();
        assert_eq!(frozen.count(), 4);
        for pair in &pairs {
            assert_eq!(pair.parent1, chrom("1000"));
        }
    }

    #[test]
    fn select_pairs_mask_reflects_local_search_improvement() {
        // when the repeated chromosome is not a local optimum, local search
        // replaces the best copy; the mask describes the population that
        // selection actually draws from, so the changed positions unfreeze
        let inst = example();
        let config = GaConfig::default();
        let population = vec![ScoredIndividual::new(&inst, chrom("0110")); config.population_size];
        let mut rng = derive_rng_stream(4, 1, StreamRole::Map, 0);
        let (pairs, frozen) = select_pairs(&inst, &population, &config, &mut rng).unwrap();
        let improved = local_search(&inst, &chrom("0110"));
        assert_eq!(improved, chrom("1100")); // differs at two positions
        assert_eq!(frozen.count(), 2);
        for pair in pairs {
            assert!(pair.parent1 == chrom("0110") || pair.parent1 == improved);
        }
    }

    #[test]
    fn breed_pair_elite_passthrough() {
        let inst = example();
        let config = GaConfig::default();
        let pair = PairRecord {
            pair_id: 0,
            parent1: chrom("1000"),
            parent2: None,
        };
        let mut rng = derive_rng_stream(1, 1, StreamRole::Reduce, 0);
        let out = breed_pair(&inst, &pair, &FrozenMask::none(4), &config, &mut rng);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].chromosome, chrom("1000"));
        assert_eq!(out[0].fitness, -150.0);
    }

    #[test]
    fn breed_pair_forced_crossover_no_mutation() {
        let inst = example();
        // cost of {3,4} is 220 and of {1,2} is 150; frozen from the
        // enumeration oracle (also covered by the acceptance suite)
        assert_eq!(fitness(&inst, &chrom("0011")), -220.0);
        assert_eq!(fitness(&inst, &chrom("1100")), -150.0);

        let config = GaConfig {
            crossover_prob: 1.0,
            mutation_rate_frozen: Some(0.0),
            mutation_rate_normal: Some(0.0),
            ..GaConfig::default()
        };
        let pair = PairRecord {
            pair_id: 60,
            parent1: chrom("0000"),
            parent2: Some(chrom("1111")),
        };
        // find a pair stream whose cut lands at 2, then pin the outputs
        let mut checked_cut_two = false;
        for seed in 0..64 {
            let mut rng = derive_rng_stream(seed, 1, StreamRole::Reduce, 60);
            let out = breed_pair(&inst, &pair, &FrozenMask::none(4), &config, &mut rng);
            assert_eq!(out.len(), 2);
            // children complement each other gene by gene
            for i in 0..4 {
                assert_ne!(out[0].chromosome.is_set(i), out[1].chromosome.is_set(i));
            }
            assert_eq!(out[0].fitness, fitness(&inst, &out[0].chromosome));
            assert_eq!(out[1].fitness, fitness(&inst, &out[1].chromosome));
            if out[0].chromosome == chrom("0011") {
                assert_eq!(out[0].fitness, -220.0);
                assert_eq!(out[1].chromosome, chrom("1100"));
                assert_eq!(out[1].fitness, -150.0);
                checked_cut_two = true;
            }
        }
        assert!(checked_cut_two, "no stream in 0..64 produced cut 2");
    }

    #[test]
    fn breed_pair_same_stream_same_output() {
        let inst = generate_instance(16, 0.4, 30, 2).unwrap();
        let config = GaConfig::default();
        let pair = PairRecord {
            pair_id: 77,
            parent1: Chromosome::zeros(16),
            parent2: Some(Chromosome::ones(16)),
        };
        let mask = FrozenMask::none(16);
        let run = || {
            let mut rng = derive_rng_stream(5, 9, StreamRole::Reduce, 77);
            breed_pair(&inst, &pair, &mask, &config, &mut rng)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn wire_round_trips() {
        let pair = PairRecord {
            pair_id: 123,
            parent1: chrom("0101"),
            parent2: Some(chrom("1110")),
        };
        let record = pair.to_record();
        assert_eq!(
            PairRecord::from_record(&record.key, &record.value).unwrap(),
            pair
        );

        let elite = PairRecord {
            pair_id: 3,
            parent1: chrom("0101"),
            parent2: None,
        };
        let record = elite.to_record();
        assert_eq!(
            PairRecord::from_record(&record.key, &record.value).unwrap(),
            elite
        );

        let individual = ScoredIndividual {
            chromosome: chrom("10011"),
            fitness: -37.5,
        };
        assert_eq!(
            decode_individual(&encode_individual(&individual)).unwrap(),
            individual
        );

        assert!(PairRecord::from_record(b"abc", b"01,10").is_err());
        assert!(PairRecord::from_record(&7u64.to_be_bytes(), b"0102").is_err());
        assert!(decode_individual(&Record::new("012", vec![0u8; 8])).is_err());
        assert!(decode_individual(&Record::new("01", vec![0u8; 4])).is_err());
    }

    #[test]
    fn generation_job_matches_serial_step_exactly_with_one_worker() {
        let inst = generate_instance(18, 0.3, 50, 8).unwrap();
        let config = GaConfig {
            worker_count: 1,
            master_seed: 3,
            ..GaConfig::default()
        };
        let population = scored_population(&inst, &config, 3);
        let engine = Engine::new(1);
        let (from_job, _) = run_generation_job(&inst, &config, &engine, &population, 1).unwrap();
        let from_serial =
            crate::ga::generation_step_serial(&inst, &population, &config, 1).unwrap();
        // with one partition the canonical job order is pair-id order, which
        // is exactly the serial construction order
        assert_eq!(from_job, from_serial);
    }

    #[test]
    fn elites_survive_into_next_generation() {
        let inst = generate_instance(12, 0.5, 30, 1).unwrap();
        let config = GaConfig {
            master_seed: 6,
            ..GaConfig::default()
        };
        let population = scored_population(&inst, &config, 6);
        let engine = Engine::new(2);
        let (next, _) = run_generation_job(&inst, &config, &engine, &population, 1).unwrap();

        let mut sorted = population.clone();
        sort_population(&mut sorted);
        sorted[0] = ScoredIndividual::new(&inst, local_search(&inst, &sorted[0].chromosome));
        for elite in &sorted[..config.elite_count] {
            assert!(next.contains(elite), "elite {} missing", elite.chromosome);
        }
    }

    #[test]
    fn evolve_reaches_optimum_on_worked_example() {
        let inst = example();
        let config = GaConfig {
            max_generations: 10,
            ..GaConfig::default()
        };
        let result = evolve(&inst, &config).unwrap();
        assert_eq!(result.best_cost, 150.0);
        assert_eq!(result.generations_run, 10);
        assert_eq!(result.history.len(), 10);
        // elitism and improving-only local search keep the best monotone
        for window in result.history.windows(2) {
            assert!(window[1].best_cost <= window[0].best_cost);
        }
    }

    #[test]
    fn evolve_with_zero_generations_returns_initial_best() {
        let inst = example();
        let config = GaConfig {
            max_generations: 0,
            ..GaConfig::default()
        };
        let result = evolve(&inst, &config).unwrap();
        assert_eq!(result.generations_run, 0);
        assert!(result.history.is_empty());
        // the initial population contains local_search("0000") = "1000"
        assert_eq!(result.best_cost, 150.0);
        assert_eq!(result.best_chromosome, chrom("1000"));
    }

    #[test]
    fn evolve_stalls_out() {
        let inst = example();
        let config = GaConfig {
            max_generations: 200,
            stall_generations: 5,
            ..GaConfig::default()
        };
        let result = evolve(&inst, &config).unwrap();
        // the optimum is found at initialization, so exactly 5 stalled
        // generations run before the cutoff
        assert_eq!(result.best_cost, 150.0);
        assert_eq!(result.generations_run, 5);
    }

    #[test]
    fn evolve_is_invariant_under_worker_count() {
        let inst = generate_instance(25, 0.3, 60, 12).unwrap();
        let config = GaConfig {
            max_generations: 8,
            master_seed: 42,
            ..GaConfig::default()
        };
        let one = evolve(
            &inst,
            &GaConfig {
                worker_count: 1,
                ..config.clone()
            },
        )
        .unwrap();
        let four = evolve(
            &inst,
            &GaConfig {
                worker_count: 4,
                ..config.clone()
            },
        )
        .unwrap();
        assert_eq!(one.best_cost, four.best_cost);
        assert_eq!(one.best_chromosome, four.best_chromosome);
        assert_eq!(one.generations_run, four.generations_run);
        for (a, b) in one.history.iter().zip(&four.history) {
            assert_eq!(a.generation, b.generation);
            assert_eq!(a.best_cost, b.best_cost);
            assert_eq!(a.mean_cost, b.mean_cost);
            assert_eq!(a.frozen_count, b.frozen_count);
        }
    }

    #[test]
    fn serial_and_parallel_paths_agree() {
        let inst = example();
        let config = GaConfig {
            max_generations: 12,
            master_seed: 5,
            ..GaConfig::default()
        };
        assert!(serial_parallel_equivalence(&inst, &config).unwrap());

        let random = generate_instance(30, 0.2, 80, 33).unwrap();
        let config = GaConfig {
            max_generations: 6,
            master_seed: 7,
            ..GaConfig::default()
        };
        assert!(serial_parallel_equivalence(&random, &config).unwrap());
    }

    #[test]
    fn perturbed_seed_breaks_equivalence() {
        // drive the two paths by hand with different seeds; the sorted
        // populations must diverge within a few generations
        let inst = generate_instance(24, 0.3, 50, 2).unwrap();
        let config_a = GaConfig {
            max_generations: 6,
            master_seed: 100,
            ..GaConfig::default()
        };
        let config_b = GaConfig {
            master_seed: 101,
            ..config_a.clone()
        };
        let engine = Engine::new(2);
        let mut pop_a = scored_population(&inst, &config_a, 100);
        let mut pop_b = pop_a.clone();
        let mut diverged = false;
        for generation in 1..=6 {
            pop_a = run_generation_job(&inst, &config_a, &engine, &pop_a, generation)
                .unwrap()
                .0;
            pop_b =
                crate::ga::generation_step_serial(&inst, &pop_b, &config_b, generation).unwrap();
            let mut lhs = pop_a.clone();
            let mut rhs = pop_b.clone();
            sort_population(&mut lhs);
            sort_population(&mut rhs);
            if lhs != rhs {
                diverged = true;
                break;
            }
        }
        assert!(diverged);
    }

    #[test]
    fn reducer_requires_job_config() {
        let inst = example();
        let config = GaConfig::default();
        let reducer = BreedingReducer {
            instance: &inst,
            config: &config,
        };
        let empty = JobConfig::new();
        let ctx = ReduceContext::new(&empty, 0);
        let pair = PairRecord {
            pair_id: 2,
            parent1: chrom("1000"),
            parent2: None,
        };
        let record = pair.to_record();
        let mut sink = |_r: Record| {};
        let err = reducer
            .reduce(
                &record.key,
                std::slice::from_ref(&record.value),
                &ctx,
                &mut sink,
            )
            .unwrap_err();
        assert!(err.to_string().contains("frozen_mask"));
    }
}
