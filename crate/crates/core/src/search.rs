//! Upper-level search drivers.
//!
//! Two strategies explore the topology bit-string space. `enumerate`
//! visits every one of the 2^m bit strings in ascending integer order and
//! sends the upper-feasible ones to the lower level, removing all
//! randomness from the upper level of small instances. `run_nbpso` is a
//! binary particle swarm whose selection signal is novelty — the mean
//! Hamming distance to the k nearest previously visited topologies — so
//! the swarm is pushed toward unseen designs while the lower level
//! supplies the weights that are recorded for reporting.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feasibility::{check_g1, check_g2, repair};
use crate::instance::{Instance, Topology};
use crate::seed;
use crate::sizing::{optimize_sizing, LowerConfig, SizingError, SizingSolution};

/// Enumeration is guarded to spaces of at most 2^12 topologies.
pub const ENUMERATION_GUARD: usize = 12;

/// Attempts to re-randomize a particle whose repair exhausted its budget.
const REPAIR_RETRY_LIMIT: usize = 100;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("instance has {m} groups; enumeration is guarded to m ≤ {limit} (use force to override)")]
    TooManyGroups { m: usize, limit: usize },
    #[error("novelty archive is empty")]
    EmptyArchive,
    #[error("invalid search parameters: {0}")]
    BadParams(String),
    #[error("could not repair a particle to feasibility after {attempts} fresh restarts")]
    RepairFailed { attempts: usize },
    #[error(transparent)]
    Sizing(#[from] SizingError),
}

/// Which bit rule the transfer function drives.
///
/// `Printed` follows the published update: a component becomes 1 when the
/// uniform draw is at least the transfer value, so larger velocities make
/// the bit less likely. `Conventional` is the textbook binary-PSO mapping
/// (bit is 1 when the draw falls below the transfer value).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FlipRule {
    #[default]
    Printed,
    Conventional,
}

/// Upper-level search parameters; defaults follow the benchmark settings
/// (swarm of 30, 300 iterations, υ = 6, c1 = c2 = 1, ω from 0.9 to 0.4,
/// φ from 5 to 1, k = 3).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchParams {
    pub swarm_size: usize,
    pub iterations: usize,
    /// velocity clamp υ: components stay in [−υ, υ]
    pub velocity_limit: f64,
    pub cognitive: f64,
    pub social: f64,
    pub inertia_start: f64,
    pub inertia_end: f64,
    pub phi_start: f64,
    pub phi_end: f64,
    pub k_nearest: usize,
    pub repair_budget: usize,
    pub flip_rule: FlipRule,
    pub lower: LowerConfig,
    pub seed: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            swarm_size: 30,
            iterations: 300,
            velocity_limit: 6.0,
            cognitive: 1.0,
            social: 1.0,
            inertia_start: 0.9,
            inertia_end: 0.4,
            phi_start: 5.0,
            phi_end: 1.0,
            k_nearest: 3,
            repair_budget: 10_000,
            flip_rule: FlipRule::Printed,
            lower: LowerConfig::default(),
            seed: 0,
        }
    }
}

impl SearchParams {
    fn validate(&self, m: usize) -> Result<(), SearchError> {
        if self.swarm_size == 0 || self.iterations == 0 || self.k_nearest == 0 {
            return Err(SearchError::BadParams(
                "swarm_size, iterations and k_nearest must be positive".into(),
            ));
        }
        if !(self.velocity_limit > 0.0) || !(self.phi_start > 0.0) || !(self.phi_end > 0.0) {
            return Err(SearchError::BadParams(
                "velocity_limit and phi schedule must be positive".into(),
            ));
        }
        if self.repair_budget == 0 {
            return Err(SearchError::BadParams("repair_budget must be positive".into()));
        }
        if m > 63 {
            return Err(SearchError::BadParams(format!(
                "novelty archive supports at most 63 groups, instance has {m}"
            )));
        }
        Ok(())
    }

    fn schedule(&self, iteration: usize) -> (f64, f64) {
        let fraction = if self.iterations > 1 {
            (iteration - 1) as f64 / (self.iterations - 1) as f64
        } else {
            0.0
        };
        let inertia = self.inertia_start + (self.inertia_end - self.inertia_start) * fraction;
        let phi = self.phi_start + (self.phi_end - self.phi_start) * fraction;
        (inertia, phi)
    }
}

/// One swarm member: position, velocity and personal best.
#[derive(Debug, Clone)]
pub struct Particle {
    pub position: Topology,
    pub velocity: Vec<f64>,
    pub best: Topology,
}

/// Insertion-ordered, duplicate-free store of visited topologies.
#[derive(Debug, Clone, Default)]
pub struct NoveltyArchive {
    topologies: Vec<Topology>,
    first_seen: Vec<usize>,
    masks: Vec<u64>,
    seen: HashMap<u64, usize>,
}

impl NoveltyArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a topology; returns false when it was already archived.
    pub fn insert(&mut self, topology: &Topology, iteration: usize) -> bool {
        let mask = topology.mask();
        if self.seen.contains_key(&mask) {
            return false;
        }
        self.seen.insert(mask, self.topologies.len());
        self.topologies.push(topology.clone());
        self.first_seen.push(iteration);
        self.masks.push(mask);
        true
    }

    pub fn len(&self) -> usize {
        self.topologies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topologies.is_empty()
    }

    pub fn contains(&self, topology: &Topology) -> bool {
        self.seen.contains_key(&topology.mask())
    }

    /// Archived topologies with the iteration at which each first appeared.
    pub fn entries(&self) -> impl Iterator<Item = (&Topology, usize)> {
        self.topologies.iter().zip(self.first_seen.iter().copied())
    }

    fn masks(&self) -> &[u64] {
        &self.masks
    }
}

/// Mean Hamming distance from `query` to its k nearest masks; scans in
/// insertion order so distance ties keep the earlier entry. Averages over
/// everything when fewer than k comparison points exist.
fn k_nearest_mean(query: u64, masks: impl Iterator<Item = u64>, k: usize) -> Option<f64> {
    let mut best: Vec<u32> = Vec::with_capacity(k);
    for mask in masks {
        let d = (query ^ mask).count_ones();
        if best.len() < k {
            let pos = best.partition_point(|b| *b <= d);
            best.insert(pos, d);
        } else if d < *best.last().unwrap() {
            best.pop();
            let pos = best.partition_point(|b| *b <= d);
            best.insert(pos, d);
        }
    }
    if best.is_empty() {
        None
    } else {
        Some(best.iter().map(|d| *d as f64).sum::<f64>() / best.len() as f64)
    }
}

/// Novelty score of a topology against an archive: mean Hamming distance
/// to its k nearest entries (all entries when the archive holds fewer
/// than k). The query's own archive entry, when present, is not its own
/// neighbour; an archive holding nothing but the query scores 0.
pub fn novelty(topology: &Topology, archive: &NoveltyArchive, k: usize) -> Result<f64, SearchError> {
    if archive.is_empty() {
        return Err(SearchError::EmptyArchive);
    }
    let query = topology.mask();
    let others = archive.masks().iter().copied().filter(|mask| *mask != query);
    Ok(k_nearest_mean(query, others, k).unwrap_or(0.0))
}

/// Time-varying transfer function TV(v, φ) = 1/(1 + e^(−v/φ)).
pub fn transfer(velocity: f64, phi: f64) -> f64 {
    1.0 / (1.0 + (-velocity / phi).exp())
}

/// Regenerate a position from velocities through the transfer function.
///
/// Under the printed rule a component becomes 1 exactly when the uniform
/// draw is at least TV(v, φ).
pub fn flip_positions<R: Rng>(
    velocity: &[f64],
    phi: f64,
    rule: FlipRule,
    rng: &mut R,
) -> Topology {
    let bits = velocity
        .iter()
        .map(|v| {
            let threshold = transfer(*v, phi);
            let draw = rng.gen::<f64>();
            match rule {
                FlipRule::Printed => draw >= threshold,
                FlipRule::Conventional => draw < threshold,
            }
        })
        .collect();
    Topology::new(bits)
}

/// Velocity update with fresh uniform r1, r2 vectors, clamped to ±υ.
pub fn update_velocity<R: Rng>(
    velocity: &[f64],
    position: &Topology,
    personal_best: &Topology,
    global_best: &Topology,
    inertia: f64,
    cognitive: f64,
    social: f64,
    velocity_limit: f64,
    rng: &mut R,
) -> Vec<f64> {
    (0..velocity.len())
        .map(|i| {
            let z = if position.is_active(i) { 1.0 } else { 0.0 };
            let p = if personal_best.is_active(i) { 1.0 } else { 0.0 };
            let g = if global_best.is_active(i) { 1.0 } else { 0.0 };
            let r1: f64 = rng.gen();
            let r2: f64 = rng.gen();
            let v = inertia * velocity[i] + cognitive * r1 * (p - z) + social * r2 * (g - z);
            v.clamp(-velocity_limit, velocity_limit)
        })
        .collect()
}

/// One topology design with its lower-level outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluatedDesign {
    pub topology_bits: String,
    pub d_hamming: usize,
    /// `None` marks an upper-infeasible topology never sent to the
    /// lower level.
    pub sizing: Option<SizingSolution>,
    /// Reported weight: the (lower) median over feasible lower-level runs
    /// for enumeration, the run weight for swarm records. `None` when no
    /// feasible sizing exists.
    pub weight: Option<f64>,
}

impl EvaluatedDesign {
    pub fn topology(&self) -> Topology {
        Topology::from_bit_string(&self.topology_bits).expect("stored bits are valid")
    }

    pub fn is_feasible(&self) -> bool {
        self.weight.is_some()
    }
}

/// Configuration for exact enumeration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnumerateConfig {
    pub runs_per_topology: usize,
    pub lower: LowerConfig,
    pub seed: u64,
    /// Override the m ≤ 12 tractability guard.
    pub force: bool,
}

impl Default for EnumerateConfig {
    fn default() -> Self {
        EnumerateConfig {
            runs_per_topology: 30,
            lower: LowerConfig::default(),
            seed: 0,
            force: false,
        }
    }
}

/// Visit all 2^m topologies in ascending integer order; upper-feasible
/// ones get `runs_per_topology` independent lower-level runs and report
/// the median feasible weight (lower median for even counts, so every
/// reported weight corresponds to an actually evaluated sizing).
pub fn enumerate(instance: &Instance, cfg: &EnumerateConfig) -> Result<Vec<EvaluatedDesign>, SearchError> {
    let m = instance.group_count();
    if m > ENUMERATION_GUARD && !cfg.force {
        return Err(SearchError::TooManyGroups {
            m,
            limit: ENUMERATION_GUARD,
        });
    }
    if cfg.runs_per_topology == 0 {
        return Err(SearchError::BadParams("runs_per_topology must be positive".into()));
    }
    let mut designs = Vec::with_capacity(1usize << m);
    for index in 0..(1u64 << m) {
        let topology = Topology::from_index(index, m);
        let design = if check_g1(instance, &topology) && check_g2(instance, &topology) {
            let mut runs: Vec<SizingSolution> = Vec::with_capacity(cfg.runs_per_topology);
            for run in 0..cfg.runs_per_topology {
                let lower = cfg
                    .lower
                    .clone()
                    .with_seed(seed::mix(&[cfg.seed, index, run as u64]));
                runs.push(optimize_sizing(instance, &topology, &lower)?);
            }
            median_design(&topology, runs)
        } else {
            EvaluatedDesign {
                topology_bits: topology.to_string(),
                d_hamming: topology.d_hamming(),
                sizing: None,
                weight: None,
            }
        };
        designs.push(design);
    }
    Ok(designs)
}

/// Pick the (lower) median feasible run as the design's representative.
fn median_design(topology: &Topology, mut runs: Vec<SizingSolution>) -> EvaluatedDesign {
    runs.sort_by(|a, b| {
        match (a.feasible, b.feasible) {
            (true, false) => std::cmp::Ordering::Less,
            (false, true) => std::cmp::Ordering::Greater,
            _ => a.weight.partial_cmp(&b.weight).unwrap_or(std::cmp::Ordering::Equal),
        }
    });
    let feasible_count = runs.iter().filter(|r| r.feasible).count();
    if feasible_count == 0 {
        // keep the least violating run for inspection; no weight reported
        return EvaluatedDesign {
            topology_bits: topology.to_string(),
            d_hamming: topology.d_hamming(),
            sizing: runs.into_iter().next(),
            weight: None,
        };
    }
    let median = runs.swap_remove((feasible_count - 1) / 2);
    EvaluatedDesign {
        topology_bits: topology.to_string(),
        d_hamming: topology.d_hamming(),
        weight: Some(median.weight),
        sizing: Some(median),
    }
}

/// One per-particle, per-iteration evaluation record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwarmRecord {
    pub iteration: usize,
    pub particle: usize,
    pub novelty: f64,
    #[serde(flatten)]
    pub design: EvaluatedDesign,
}

/// Full outcome of one novelty-driven binary PSO run.
#[derive(Debug, Clone)]
pub struct SearchRun {
    pub records: Vec<SwarmRecord>,
    pub archive: NoveltyArchive,
    /// number of fresh re-randomizations forced by repair failures
    pub repair_restarts: usize,
}

impl SearchRun {
    pub fn designs(&self) -> Vec<&EvaluatedDesign> {
        self.records.iter().map(|r| &r.design).collect()
    }

    /// Best feasible weight over every recorded evaluation.
    pub fn best_weight(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.design.weight)
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }
}

/// Novelty-driven binary PSO over topologies.
///
/// Every iteration regenerates particle positions through the transfer
/// function, repairs them to upper feasibility, scores novelty against
/// the archive plus the other particles' current positions, sizes each
/// new topology with the memoized lower level, and finally applies
/// personal/global best and archive updates in particle-index order.
/// Personal and global bests are re-scored against the grown archive each
/// iteration, which makes both dynamic. Weights never influence upper
/// selection.
pub fn run_nbpso(instance: &Instance, params: &SearchParams) -> Result<SearchRun, SearchError> {
    let m = instance.group_count();
    params.validate(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut archive = NoveltyArchive::new();
    let mut records = Vec::with_capacity(params.swarm_size * (params.iterations + 1));
    let mut cache: HashMap<u64, SizingSolution> = HashMap::new();
    let mut repair_restarts = 0usize;

    let repair_fresh = |topology: Topology, rng: &mut ChaCha8Rng, restarts: &mut usize| -> Result<Topology, SearchError> {
        let mut candidate = topology;
        for _ in 0..REPAIR_RETRY_LIMIT {
            match repair(instance, &candidate, rng, params.repair_budget) {
                Ok(feasible) => return Ok(feasible),
                Err(_) => {
                    *restarts += 1;
                    candidate = random_topology(m, rng);
                }
            }
        }
        Err(SearchError::RepairFailed {
            attempts: REPAIR_RETRY_LIMIT,
        })
    };

    // initial population: random, repaired, random velocities
    let mut particles: Vec<Particle> = Vec::with_capacity(params.swarm_size);
    for _ in 0..params.swarm_size {
        let position = repair_fresh(random_topology(m, &mut rng), &mut rng, &mut repair_restarts)?;
        let velocity: Vec<f64> = (0..m)
            .map(|_| rng.gen_range(-params.velocity_limit..=params.velocity_limit))
            .collect();
        particles.push(Particle {
            best: position.clone(),
            position,
            velocity,
        });
    }

    let mut global_best = particles[0].position.clone();
    let mut global_score = f64::NEG_INFINITY;

    // iteration 0: score, size and archive the initial population
    let scores = score_population(&particles, &archive, params.k_nearest);
    for (i, score) in scores.iter().enumerate() {
        let design = sized_design(instance, &particles[i].position, params, &mut cache)?;
        records.push(SwarmRecord {
            iteration: 0,
            particle: i,
            novelty: *score,
            design,
        });
        if *score > global_score {
            global_score = *score;
            global_best = particles[i].position.clone();
        }
    }
    for particle in &particles {
        archive.insert(&particle.position, 0);
    }

    for iteration in 1..=params.iterations {
        let (inertia, phi) = params.schedule(iteration);

        // dynamic bests: re-score against the current archive
        let mut best_scores: Vec<f64> = particles
            .iter()
            .map(|p| novelty(&p.best, &archive, params.k_nearest).expect("archive populated"))
            .collect();
        let mut global_score = novelty(&global_best, &archive, params.k_nearest).expect("archive populated");

        // position, velocity and repair updates (sequential)
        for i in 0..particles.len() {
            let flipped = flip_positions(&particles[i].velocity, phi, params.flip_rule, &mut rng);
            let velocity = update_velocity(
                &particles[i].velocity,
                &flipped,
                &particles[i].best,
                &global_best,
                inertia,
                params.cognitive,
                params.social,
                params.velocity_limit,
                &mut rng,
            );
            let repaired = repair_fresh(flipped, &mut rng, &mut repair_restarts)?;
            particles[i].position = repaired;
            particles[i].velocity = velocity;
        }

        // novelty against archive ∪ other particles' current positions
        let scores = score_population(&particles, &archive, params.k_nearest);

        // lower level on each (memoized) topology, recorded in index order
        for (i, score) in scores.iter().enumerate() {
            let design = sized_design(instance, &particles[i].position, params, &mut cache)?;
            records.push(SwarmRecord {
                iteration,
                particle: i,
                novelty: *score,
                design,
            });
        }

        // best and archive updates in particle-index order
        for i in 0..particles.len() {
            if scores[i] > best_scores[i] {
                particles[i].best = particles[i].position.clone();
                best_scores[i] = scores[i];
            }
            if scores[i] > global_score {
                global_best = particles[i].position.clone();
                global_score = scores[i];
            }
            archive.insert(&particles[i].position, iteration);
        }
    }

    Ok(SearchRun {
        records,
        archive,
        repair_restarts,
    })
}

fn random_topology<R: Rng>(m: usize, rng: &mut R) -> Topology {
    Topology::new((0..m).map(|_| rng.gen_bool(0.5)).collect())
}

/// Novelty of each particle against the archive plus the other particles'
/// current positions; the particle's own entries (its population slot and
/// its archive copy, when archived) are excluded.
fn score_population(particles: &[Particle], archive: &NoveltyArchive, k: usize) -> Vec<f64> {
    let position_masks: Vec<u64> = particles.iter().map(|p| p.position.mask()).collect();
    (0..particles.len())
        .map(|i| {
            let query = position_masks[i];
            let archived = archive.masks().iter().copied().filter(|mask| *mask != query);
            let others = position_masks
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, mask)| *mask);
            k_nearest_mean(query, archived.chain(others), k).unwrap_or(f64::INFINITY)
        })
        .collect()
}

fn sized_design(
    instance: &Instance,
    topology: &Topology,
    params: &SearchParams,
    cache: &mut HashMap<u64, SizingSolution>,
) -> Result<EvaluatedDesign, SearchError> {
    let mask = topology.mask();
    let solution = match cache.get(&mask) {
        Some(hit) => hit.clone(),
        None => {
            let lower = params
                .lower
                .clone()
                .with_seed(seed::mix(&[params.seed, 0x7369_7a65, mask]));
            let solution = optimize_sizing(instance, topology, &lower)?;
            cache.insert(mask, solution.clone());
            solution
        }
    };
    Ok(EvaluatedDesign {
        topology_bits: topology.to_string(),
        d_hamming: topology.d_hamming(),
        weight: solution.feasible.then_some(solution.weight),
        sizing: Some(solution),
    })
}

/// The K lightest feasible designs with pairwise distinct topologies.
/// Returns fewer than K when not enough distinct feasible designs exist.
pub fn top_k_distinct<'a>(designs: &'a [EvaluatedDesign], k: usize) -> Vec<&'a EvaluatedDesign> {
    let mut feasible: Vec<&EvaluatedDesign> = designs.iter().filter(|d| d.is_feasible()).collect();
    feasible.sort_by(|a, b| {
        a.weight
            .partial_cmp(&b.weight)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.topology_bits.cmp(&b.topology_bits))
    });
    let mut kept: Vec<&EvaluatedDesign> = Vec::with_capacity(k);
    for design in feasible {
        if kept.len() == k {
            break;
        }
        if kept.iter().all(|d| d.topology_bits != design.topology_bits) {
            kept.push(design);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn archive_of(bits: &[&str]) -> NoveltyArchive {
        let mut archive = NoveltyArchive::new();
        for (i, b) in bits.iter().enumerate() {
            archive.insert(&Topology::from_bit_string(b).unwrap(), i);
        }
        archive
    }

    #[test]
    fn novelty_hand_cases() {
        // the query's own archive copy is not a neighbour: the three
        // distance-2 entries are the 3 nearest → (2+2+2)/3
        let archive = archive_of(&["000", "011", "101", "110"]);
        let x = Topology::from_bit_string("000").unwrap();
        assert_eq!(novelty(&x, &archive, 3).unwrap(), 2.0);

        let single = archive_of(&["111"]);
        assert_eq!(novelty(&x, &single, 3).unwrap(), 3.0);

        // archive holding only the query itself
        let selfish = archive_of(&["000"]);
        assert_eq!(novelty(&x, &selfish, 3).unwrap(), 0.0);

        assert!(matches!(
            novelty(&x, &NoveltyArchive::new(), 3),
            Err(SearchError::EmptyArchive)
        ));
    }

    #[test]
    fn transfer_identities() {
        for phi in [0.5, 1.0, 5.0] {
            assert_eq!(transfer(0.0, phi), 0.5);
        }
        assert!((transfer(5.0, 5.0) - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((transfer(5.0, 5.0) - 0.7310585786300049).abs() < 1e-12);
        for v in [-6.0, -1.5, 0.0, 2.0, 6.0] {
            let sum = transfer(v, 2.0) + transfer(-v, 2.0);
            assert!((sum - 1.0).abs() < 1e-15);
        }
        // strictly increasing in v
        assert!(transfer(1.0, 1.0) > transfer(0.5, 1.0));
    }

    #[test]
    fn printed_flip_rule_inverts_high_velocity() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // v = +60: transfer ≈ 1 → printed rule almost surely produces 0
        let t = flip_positions(&[60.0; 16], 1.0, FlipRule::Printed, &mut rng);
        assert_eq!(t.count_active(), 0);
        let t = flip_positions(&[60.0; 16], 1.0, FlipRule::Conventional, &mut rng);
        assert_eq!(t.count_active(), 16);
    }

    #[test]
    fn flip_rule_frequencies_match_formula() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let mut ones = 0usize;
        for _ in 0..n {
            let t = flip_positions(&[0.0], 3.0, FlipRule::Printed, &mut rng);
            ones += t.count_active();
        }
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.02, "freq {freq}");

        // v = −6, φ = 1: P(bit = 1) = 1 − TV(−6, 1) ≈ 0.9975
        let expected = 1.0 - transfer(-6.0, 1.0);
        let mut ones = 0usize;
        for _ in 0..n {
            let t = flip_positions(&[-6.0], 1.0, FlipRule::Printed, &mut rng);
            ones += t.count_active();
        }
        let freq = ones as f64 / n as f64;
        assert!((freq - expected).abs() < 0.01, "freq {freq} vs {expected}");
    }

    #[test]
    fn velocity_update_vanishes_at_consensus() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = Topology::from_bit_string("1010").unwrap();
        let v = update_velocity(&[1.0, -2.0, 3.0, -4.0], &z, &z, &z, 0.0, 1.0, 1.0, 6.0, &mut rng);
        assert_eq!(v, vec![0.0; 4]);
    }

    #[test]
    fn velocity_clamp_is_idempotent_at_the_boundary() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = Topology::from_bit_string("1111").unwrap();
        let v = update_velocity(&[6.0; 4], &z, &z, &z, 1.0, 1.0, 1.0, 6.0, &mut rng);
        assert_eq!(v, vec![6.0; 4]);
    }

    #[test]
    fn velocity_pull_toward_active_bits_is_positive() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let z = Topology::from_bit_string("0").unwrap();
        let ones = Topology::from_bit_string("1").unwrap();
        for _ in 0..100 {
            let v = update_velocity(&[0.0], &z, &ones, &ones, 0.0, 1.0, 1.0, 6.0, &mut rng);
            assert!((0.0..=2.0).contains(&v[0]));
        }
    }

    #[test]
    fn archive_rejects_duplicates_and_keeps_order() {
        let mut archive = NoveltyArchive::new();
        let a = Topology::from_bit_string("101").unwrap();
        let b = Topology::from_bit_string("011").unwrap();
        assert!(archive.insert(&a, 0));
        assert!(!archive.insert(&a, 1));
        assert!(archive.insert(&b, 1));
        assert_eq!(archive.len(), 2);
        let entries: Vec<usize> = archive.entries().map(|(_, it)| it).collect();
        assert_eq!(entries, vec![0, 1]);
    }

    #[test]
    fn top_k_distinct_filters_and_sorts() {
        let mk = |bits: &str, w: Option<f64>| EvaluatedDesign {
            topology_bits: bits.to_string(),
            d_hamming: bits.chars().filter(|c| *c == '0').count(),
            sizing: None,
            weight: w,
        };
        let designs = vec![
            mk("111", Some(10.0)),
            mk("110", Some(8.0)),
            mk("110", Some(8.5)),
            mk("011", None),
            mk("101", Some(12.0)),
        ];
        let top = top_k_distinct(&designs, 2);
        assert_eq!(top.len(), 2);
        assert_eq!(top[0].topology_bits, "110");
        assert_eq!(top[0].weight, Some(8.0));
        assert_eq!(top[1].topology_bits, "111");
        // degenerate distinctness: all same topology
        let same = vec![mk("111", Some(2.0)), mk("111", Some(1.0))];
        assert_eq!(top_k_distinct(&same, 3).len(), 1);
        // K = 1 reduces to the argmin
        assert_eq!(top_k_distinct(&designs, 1)[0].weight, Some(8.0));
    }
}
