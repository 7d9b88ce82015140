//! Evolutionary operators: binary encoding, population initialization,
//! fine-grained tournament selection, one-point crossover, frozen-gene
//! mutation, and first-improvement local search — plus a single-threaded
//! reference generation step that the map-reduce path is checked against.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::instance::{GvcpInstance, VertexSubset};
use crate::mapreduce::{derive_rng_stream, StreamRole};

#[derive(Debug, Error)]
pub enum GaError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("population must have at least 4 individuals, got {0}")]
    PopulationTooSmall(usize),
    #[error("expected a population of {expected} individuals, got {actual}")]
    WrongPopulationSize { expected: usize, actual: usize },
    #[error("bitstring may contain only '0' and '1'")]
    InvalidBitstring,
}

/// A candidate solution: one gene per vertex, gene k set ⇔ vertex k covered.
///
/// The derived ordering is lexicographic with gene 0 most significant, which
/// is the tie-break order used throughout.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Chromosome {
    genes: Vec<u8>, // each 0 or 1
}

impl Chromosome {
    pub fn zeros(n: usize) -> Self {
        Self { genes: vec![0; n] }
    }

    pub fn ones(n: usize) -> Self {
        Self { genes: vec![1; n] }
    }

    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        Self {
            genes: (0..n).map(|_| u8::from(rng.gen::<f64>() < 0.5)).collect(),
        }
    }

    pub fn from_bitstring(s: &str) -> Result<Self, GaError> {
        s.bytes()
            .map(|b| match b {
                b'0' => Ok(0),
                b'1' => Ok(1),
                _ => Err(GaError::InvalidBitstring),
            })
            .collect::<Result<Vec<u8>, _>>()
            .map(|genes| Self { genes })
    }

    pub fn to_bitstring(&self) -> String {
        self.genes
            .iter()
            .map(|&g| if g != 0 { '1' } else { '0' })
            .collect()
    }

    pub fn from_subset(s: &VertexSubset) -> Self {
        Self {
            genes: (0..s.len()).map(|v| u8::from(s.contains(v))).collect(),
        }
    }

    /// The vertex subset this chromosome encodes.
    pub fn to_subset(&self) -> VertexSubset {
        let mut s = VertexSubset::empty(self.len());
        for (v, &g) in self.genes.iter().enumerate() {
            s.set(v, g != 0);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn is_set(&self, i: usize) -> bool {
        self.genes[i] != 0
    }

    pub fn flip(&mut self, i: usize) {
        self.genes[i] ^= 1;
    }

    pub fn genes(&self) -> &[u8] {
        &self.genes
    }
}

impl std::fmt::Display for Chromosome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

/// Decodes a chromosome into the vertex subset it represents.
pub fn decode(chromosome: &Chromosome) -> VertexSubset {
    chromosome.to_subset()
}

/// A chromosome with its cached fitness.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredIndividual {
    pub chromosome: Chromosome,
    pub fitness: f64,
}

impl ScoredIndividual {
    pub fn new(instance: &GvcpInstance, chromosome: Chromosome) -> Self {
        let fitness = fitness(instance, &chromosome);
        Self {
            chromosome,
            fitness,
        }
    }

    pub fn cost(&self) -> f64 {
        -self.fitness
    }
}

/// Fitness is the negated objective cost, so higher fitness means a cheaper
/// cover and every comparison stays rank-based.
pub fn fitness(instance: &GvcpInstance, chromosome: &Chromosome) -> f64 {
    -instance.evaluate(&chromosome.to_subset())
}

/// Positions where every individual in the population carries the same gene.
/// Selection and crossover can never change such a position, so mutation
/// hits it at an elevated rate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrozenMask {
    frozen: Vec<u8>,
}

impl FrozenMask {
    /// Mask with no frozen positions, for testing single operators.
    pub fn none(n: usize) -> Self {
        Self { frozen: vec![0; n] }
    }

    pub fn len(&self) -> usize {
        self.frozen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frozen.is_empty()
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i] != 0
    }

    pub fn count(&self) -> usize {
        self.frozen.iter().filter(|&&b| b != 0).count()
    }

    pub fn to_bitstring(&self) -> String {
        self.frozen
            .iter()
            .map(|&b| if b != 0 { '1' } else { '0' })
            .collect()
    }

    pub fn from_bitstring(s: &str) -> Result<Self, GaError> {
        Chromosome::from_bitstring(s).map(|c| Self { frozen: c.genes })
    }
}

/// Computes the frozen mask over a non-empty population.
///
/// # Panics
///
/// Panics on an empty population or mismatched chromosome lengths.
pub fn compute_frozen_mask<'a, I>(population: I) -> FrozenMask
where
    I: IntoIterator<Item = &'a Chromosome>,
{
    let mut it = population.into_iter();
    let first = it.next().expect("population must be non-empty");
    let mut frozen: Vec<u8> = vec![1; first.len()];
    let reference = first.genes();
    for chromosome in it {
        assert_eq!(chromosome.len(), first.len(), "chromosome length mismatch");
        for (f, (&a, &b)) in frozen
            .iter_mut()
            .zip(reference.iter().zip(chromosome.genes()))
        {
            if a != b {
                *f = 0;
            }
        }
    }
    FrozenMask { frozen }
}

/// Per-gene flip probabilities for frozen and non-frozen positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutationRates {
    pub frozen: f64,
    pub normal: f64,
}

/// Genetic algorithm parameters. Defaults: Z = 150, E = 50, average
/// tournament size 5.4, crossover probability 0.85, mutation rates `1/n`
/// (frozen) and `0.4/n` (non-frozen), 500 generations with a 100-generation
/// stall cutoff, and 4 reduce workers.
#[derive(Debug, Clone, Serialize)]
pub struct GaConfig {
    /// Population size Z.
    pub population_size: usize,
    /// Elite count E; the E fittest individuals pass through unchanged.
    pub elite_count: usize,
    /// Desired average tournament size; may be fractional.
    pub tournament_size: f64,
    /// Probability that a selected pair is crossed rather than copied.
    pub crossover_prob: f64,
    /// Flip probability for frozen genes; `None` means `1.0 / n`.
    pub mutation_rate_frozen: Option<f64>,
    /// Flip probability for non-frozen genes; `None` means `0.4 / n`.
    pub mutation_rate_normal: Option<f64>,
    pub max_generations: usize,
    /// Stop after this many consecutive generations without improvement.
    pub stall_generations: usize,
    pub master_seed: u64,
    /// Reduce-phase worker (and partition) count.
    pub worker_count: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 150,
            elite_count: 50,
            tournament_size: 5.4,
            crossover_prob: 0.85,
            mutation_rate_frozen: None,
            mutation_rate_normal: None,
            max_generations: 500,
            stall_generations: 100,
            master_seed: 1,
            worker_count: 4,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), GaError> {
        let z = self.population_size;
        let e = self.elite_count;
        if z < 4 {
            return Err(GaError::InvalidConfig(format!(
                "population size must be at least 4, got {z}"
            )));
        }
        if e == 0 || e >= z {
            return Err(GaError::InvalidConfig(format!(
                "elite count must satisfy 1 <= E < Z, got E={e}, Z={z}"
            )));
        }
        if !(z - e).is_multiple_of(2) {
            return Err(GaError::InvalidConfig(format!(
                "Z - E must be even, got {}",
                z - e
            )));
        }
        if !self.tournament_size.is_finite() || self.tournament_size < 1.0 {
            return Err(GaError::InvalidConfig(format!(
                "tournament size must be at least 1, got {}",
                self.tournament_size
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err(GaError::InvalidConfig(format!(
                "crossover probability must be in [0, 1], got {}",
                self.crossover_prob
            )));
        }
        for (name, rate) in [
            ("frozen", self.mutation_rate_frozen),
            ("normal", self.mutation_rate_normal),
        ] {
            if let Some(r) = rate {
                if !(0.0..=1.0).contains(&r) {
                    return Err(GaError::InvalidConfig(format!(
                        "{name} mutation rate must be in [0, 1], got {r}"
                    )));
                }
            }
        }
        if self.worker_count == 0 {
            return Err(GaError::InvalidConfig(
                "worker count must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Effective mutation rates for chromosomes of length `n`.
    pub fn mutation_rates(&self, n: usize) -> MutationRates {
        let n = n as f64;
        MutationRates {
            frozen: self.mutation_rate_frozen.unwrap_or(1.0 / n),
            normal: self.mutation_rate_normal.unwrap_or(0.4 / n),
        }
    }

    /// Parent pairs selected per generation: `(Z - E) / 2`, so the next
    /// generation is exactly `E + 2 * pairs = Z` individuals.
    pub fn pairs_per_generation(&self) -> usize {
        (self.population_size - self.elite_count) / 2
    }
}

/// Sorts best-first: fitness descending, ties towards the lexicographically
/// smallest bitstring. The sort is stable, so full ties keep input order.
pub fn sort_population(population: &mut [ScoredIndividual]) {
    population.sort_by(|a, b| {
        b.fitness
            .total_cmp(&a.fitness)
            .then_with(|| a.chromosome.cmp(&b.chromosome))
    });
}

/// The best individual under the [`sort_population`] order.
pub fn best_individual(population: &[ScoredIndividual]) -> &ScoredIndividual {
    population
        .iter()
        .min_by(|a, b| {
            b.fitness
                .total_cmp(&a.fitness)
                .then_with(|| a.chromosome.cmp(&b.chromosome))
        })
        .expect("population must be non-empty")
}

/// Creates the initial population: the all-zeros and all-ones individuals,
/// their local-search improvements, and `Z - 4` uniform random bitstrings.
pub fn init_population(
    instance: &GvcpInstance,
    config: &GaConfig,
    rng: &mut impl Rng,
) -> Result<Vec<Chromosome>, GaError> {
    let z = config.population_size;
    if z < 4 {
        return Err(GaError::PopulationTooSmall(z));
    }
    let n = instance.vertex_count();
    let zeros = Chromosome::zeros(n);
    let ones = Chromosome::ones(n);
    let mut population = Vec::with_capacity(z);
    population.push(zeros.clone());
    population.push(ones.clone());
    population.push(local_search(instance, &zeros));
    population.push(local_search(instance, &ones));
    population.extend((4..z).map(|_| Chromosome::random(n, rng)));
    Ok(population)
}

/// One selection outcome; `contestants` are distinct population indices and
/// `winner` is the contestant with the highest fitness (ties towards the
/// lexicographically smallest bitstring).
#[derive(Debug, Clone)]
pub struct TournamentOutcome {
    pub winner: usize,
    pub contestants: Vec<usize>,
}

/// Fine-grained tournament selection.
///
/// The tournament size for each call is `floor(tSize)` plus a Bernoulli draw
/// on its fractional part, so sizes mix between `floor` and `ceil` and
/// average `tSize`. Contestants are drawn without replacement.
///
/// # Panics
///
/// Panics on an empty population or `t_size < 1`.
pub fn fgts_select<'a>(
    population: &'a [ScoredIndividual],
    t_size: f64,
    rng: &mut impl Rng,
) -> &'a ScoredIndividual {
    &population[fgts_select_outcome(population, t_size, rng).winner]
}

/// [`fgts_select`] with the tournament composition exposed.
pub fn fgts_select_outcome(
    population: &[ScoredIndividual],
    t_size: f64,
    rng: &mut impl Rng,
) -> TournamentOutcome {
    assert!(!population.is_empty(), "population must be non-empty");
    assert!(t_size >= 1.0, "tournament size must be at least 1");
    let z = population.len();
    let size = (t_size.floor() as usize + usize::from(rng.gen::<f64>() < t_size.fract())).min(z);

    // partial Fisher-Yates: the first `size` slots become the contestants
    let mut indices: Vec<usize> = (0..z).collect();
    let mut contestants = Vec::with_capacity(size);
    let mut winner = usize::MAX;
    for i in 0..size {
        let j = rng.gen_range(i..z);
        indices.swap(i, j);
        let candidate = indices[i];
        contestants.push(candidate);
        if winner == usize::MAX || beats(&population[candidate], &population[winner]) {
            winner = candidate;
        }
    }
    TournamentOutcome {
        winner,
        contestants,
    }
}

fn beats(a: &ScoredIndividual, b: &ScoredIndividual) -> bool {
    a.fitness > b.fitness || (a.fitness == b.fitness && a.chromosome < b.chromosome)
}

/// Standard one-point crossover: children swap tails at `cut`.
///
/// `cut` may be anywhere in `[0, n]`; the boundary cuts copy the parents.
///
/// # Panics
///
/// Panics on parent length mismatch or an out-of-range cut.
pub fn one_point_crossover(
    parent1: &Chromosome,
    parent2: &Chromosome,
    cut: usize,
) -> (Chromosome, Chromosome) {
    let n = parent1.len();
    assert_eq!(n, parent2.len(), "parents must have equal length");
    assert!(cut <= n, "cut {cut} out of range for length {n}");
    let mut child1 = Vec::with_capacity(n);
    let mut child2 = Vec::with_capacity(n);
    child1.extend_from_slice(&parent1.genes[..cut]);
    child1.extend_from_slice(&parent2.genes[cut..]);
    child2.extend_from_slice(&parent2.genes[..cut]);
    child2.extend_from_slice(&parent1.genes[cut..]);
    (Chromosome { genes: child1 }, Chromosome { genes: child2 })
}

/// Flips each gene independently: frozen positions with probability
/// `rates.frozen`, the rest with `rates.normal`. Consumes exactly one draw
/// per gene, in index order.
///
/// # Panics
///
/// Panics if the mask length does not match the chromosome length.
pub fn mutate(
    chromosome: &Chromosome,
    mask: &FrozenMask,
    rates: MutationRates,
    rng: &mut impl Rng,
) -> Chromosome {
    assert_eq!(chromosome.len(), mask.len(), "mask length mismatch");
    let mut out = chromosome.clone();
    for i in 0..out.len() {
        let rate = if mask.is_frozen(i) {
            rates.frozen
        } else {
            rates.normal
        };
        if rng.gen::<f64>() < rate {
            out.flip(i);
        }
    }
    out
}

/// Add/remove local search with first improvement: scan positions in index
/// order, apply every strictly improving flip immediately, and repeat full
/// passes until one applies no flip. The result never costs more than the
/// input and has no improving single flip.
pub fn local_search(instance: &GvcpInstance, chromosome: &Chromosome) -> Chromosome {
    let mut subset = chromosome.to_subset();
    loop {
        let mut improved = false;
        for v in 0..instance.vertex_count() {
            if instance.flip_delta(&subset, v) < 0.0 {
                subset.toggle(v);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    Chromosome::from_subset(&subset)
}

/// Reference implementation of one generation, single-threaded.
///
/// Sorts the population best-first, replaces the best individual with its
/// local-search improvement, copies the elite E forward, selects
/// `(Z - E) / 2` parent pairs by tournament, then crosses (with probability
/// `crossover_prob`), mutates, and scores the children. Draws come from the
/// same keyed streams as the map-reduce path — the map stream for selection
/// and one reduce stream per pair — so both paths produce identical
/// populations for the same seed.
pub fn generation_step_serial(
    instance: &GvcpInstance,
    population: &[ScoredIndividual],
    config: &GaConfig,
    generation: u64,
) -> Result<Vec<ScoredIndividual>, GaError> {
    config.validate()?;
    let z = config.population_size;
    if population.len() != z {
        return Err(GaError::WrongPopulationSize {
            expected: z,
            actual: population.len(),
        });
    }
    let n = instance.vertex_count();
    let e = config.elite_count;

    let mut sorted = population.to_vec();
    sort_population(&mut sorted);
    let improved = local_search(instance, &sorted[0].chromosome);
    sorted[0] = ScoredIndividual::new(instance, improved);
    let frozen = compute_frozen_mask(sorted.iter().map(|s| &s.chromosome));
    let rates = config.mutation_rates(n);

    let mut map_rng = derive_rng_stream(config.master_seed, generation, StreamRole::Map, 0);
    let mut parent_pairs = Vec::with_capacity(config.pairs_per_generation());
    for _ in 0..config.pairs_per_generation() {
        let p1 = fgts_select(&sorted, config.tournament_size, &mut map_rng)
            .chromosome
            .clone();
        let p2 = fgts_select(&sorted, config.tournament_size, &mut map_rng)
            .chromosome
            .clone();
        parent_pairs.push((p1, p2));
    }

    let mut next: Vec<ScoredIndividual> = sorted[..e].to_vec();
    for (i, (p1, p2)) in parent_pairs.into_iter().enumerate() {
        let pair_id = (e + i) as u64;
        let mut rng =
            derive_rng_stream(config.master_seed, generation, StreamRole::Reduce, pair_id);
        let (c1, c2) = if rng.gen::<f64>() < config.crossover_prob {
            let cut = rng.gen_range(0..=n);
            one_point_crossover(&p1, &p2, cut)
        } else {
            (p1, p2)
        };
        let c1 = mutate(&c1, &frozen, rates, &mut rng);
        let c2 = mutate(&c2, &frozen, rates, &mut rng);
        next.push(ScoredIndividual::new(instance, c1));
        next.push(ScoredIndividual::new(instance, c2));
    }
    debug_assert_eq!(next.len(), z);
    Ok(next)
}
