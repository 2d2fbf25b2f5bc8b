//! Lower-level discrete sizing optimizer.
//!
//! Given an upper-feasible topology, searches the discrete size catalog
//! for per-group areas minimizing weight subject to stability, stress and
//! displacement constraints. The search is an evolution strategy with
//! covariance adaptation over log-area latent variables; candidates are
//! discretized per evaluation with a probabilistic rounding scheme, and
//! two response-driven operators steer candidates toward the constraint
//! boundary: a violation mapping that rescales overloaded designs and a
//! resizing move applied to designs with slack.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::{AnalysisError, ConstraintReport, Scratch, StructuralModel, CONSTRAINT_TOL};
use crate::feasibility::{check_g1, check_g2};
use crate::instance::{Instance, Topology};

mod cma;

use cma::CmaEs;

/// Probability of applying the boundary-resizing move to an offspring.
const RESIZE_PROBABILITY: f64 = 0.1;
/// Resizing targets a worst constraint ratio in this window.
const RESIZE_WINDOW: (f64, f64) = (0.9, 1.0);

#[derive(Debug, Error)]
pub enum SizingError {
    #[error("topology is upper-infeasible (violates G1 or G2)")]
    UpperInfeasible,
    #[error("invalid lower-level configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Configuration of one `optimize_sizing` call.
///
/// `population` and `parents` default to the usual evolution-strategy
/// sizing rule λ = 4 + ⌊3·ln m̂⌋, μ = λ/2 when left unset.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LowerConfig {
    pub population: Option<usize>,
    pub parents: Option<usize>,
    pub max_evaluations: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for LowerConfig {
    fn default() -> Self {
        LowerConfig {
            population: None,
            parents: None,
            max_evaluations: 5000,
            restarts: 2,
            seed: 0,
        }
    }
}

impl LowerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn lambda(&self, n: usize) -> usize {
        self.population
            .unwrap_or_else(|| 4 + (3.0 * (n.max(1) as f64).ln()).floor() as usize)
    }

    fn mu(&self, lambda: usize) -> usize {
        self.parents.unwrap_or(lambda / 2).clamp(1, lambda)
    }

    fn validate(&self, n: usize) -> Result<(), SizingError> {
        let lambda = self.lambda(n);
        let mu = self.mu(lambda);
        if lambda == 0 || mu == 0 || mu > lambda {
            return Err(SizingError::BadConfig(format!(
                "need 1 ≤ μ ≤ λ, got μ={mu}, λ={lambda}"
            )));
        }
        if self.max_evaluations < lambda {
            return Err(SizingError::BadConfig(format!(
                "max_evaluations {} is below one generation (λ={lambda})",
                self.max_evaluations
            )));
        }
        Ok(())
    }
}

/// Result of one lower-level optimization.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SizingSolution {
    /// Per-group areas; `None` marks inactive groups. Active entries are
    /// exact elements of the instance size set.
    pub areas: Vec<Option<f64>>,
    /// Structure weight of `areas`.
    pub weight: f64,
    pub max_stress_ratio: f64,
    pub max_disp_ratio: f64,
    pub internally_stable: bool,
    pub feasible: bool,
    pub evaluations_used: usize,
}

impl SizingSolution {
    /// Areas as a dense per-group vector with 0 size for inactive groups
    /// replaced by the given filler (useful for `weight` re-evaluation,
    /// which ignores inactive entries).
    pub fn areas_by_group(&self, filler: f64) -> Vec<f64> {
        self.areas.iter().map(|a| a.unwrap_or(filler)).collect()
    }
}

/// Round a continuous area onto the discrete catalog.
///
/// Values beyond the catalog clamp to the nearest extreme. A value
/// strictly between neighbors `s_lo < v ≤ s_hi` rounds up with
/// probability `(v − s_lo)/(s_hi − s_lo)`; exact grid points are kept.
pub fn probabilistic_round<R: Rng>(value: f64, size_set: &[f64], rng: &mut R) -> f64 {
    debug_assert!(!size_set.is_empty());
    let first = size_set[0];
    let last = size_set[size_set.len() - 1];
    if value <= first {
        return first;
    }
    if value >= last {
        return last;
    }
    let idx = size_set.partition_point(|s| *s < value);
    let hi = size_set[idx];
    if hi == value {
        return hi;
    }
    let lo = size_set[idx - 1];
    let p_up = (value - lo) / (hi - lo);
    if rng.gen::<f64>() < p_up {
        hi
    } else {
        lo
    }
}

/// Violation mapping: rescale every active area by the worst constraint
/// ratio (exponent 1), clamped to the catalog maximum. Identity for
/// feasible or unstable inputs (no finite ratio to map by).
pub fn mapping_adjust(areas: &[f64], report: &ConstraintReport, max_area: f64) -> Vec<f64> {
    if !report.internally_stable {
        return areas.to_vec();
    }
    let ratio = report.max_ratio();
    if !(ratio > 1.0) || !ratio.is_finite() {
        return areas.to_vec();
    }
    areas.iter().map(|a| (a * ratio).min(max_area)).collect()
}

/// Boundary resizing: with the given probability, rescale the candidate so
/// its predicted worst ratio lands in [0.9, 1.0]. Uniform area scaling by
/// c changes every ratio by 1/c, which is exact on statically determinate
/// trusses and a good estimate otherwise. Candidates already inside the
/// window (or with no finite positive ratio) are returned unchanged.
pub fn resize_near_boundary<R: Rng>(
    areas: &[f64],
    report: &ConstraintReport,
    probability: f64,
    rng: &mut R,
) -> Vec<f64> {
    if !(probability > 0.0) || rng.gen::<f64>() >= probability {
        return areas.to_vec();
    }
    if !report.internally_stable {
        return areas.to_vec();
    }
    let ratio = report.max_ratio();
    if !(ratio > 0.0) || !ratio.is_finite() {
        return areas.to_vec();
    }
    if (RESIZE_WINDOW.0..=RESIZE_WINDOW.1).contains(&ratio) {
        return areas.to_vec();
    }
    let target = rng.gen_range(RESIZE_WINDOW.0..=RESIZE_WINDOW.1);
    let factor = ratio / target;
    areas.iter().map(|a| a * factor).collect()
}

/// Candidate quality: feasible designs rank by weight, stable-but-violating
/// designs rank by worst ratio behind every feasible one, unstable designs
/// rank last.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Fitness {
    class: u8,
    key: f64,
}

impl Fitness {
    fn from_report(report: &ConstraintReport, weight: f64) -> Self {
        if report.is_feasible() {
            Fitness { class: 0, key: weight }
        } else if report.internally_stable {
            Fitness {
                class: 1,
                key: report.max_ratio(),
            }
        } else {
            Fitness { class: 2, key: 0.0 }
        }
    }

    fn better_than(&self, other: &Fitness) -> bool {
        self.class < other.class || (self.class == other.class && self.key < other.key)
    }
}

struct Evaluated {
    latent: Vec<f64>,
    areas: Vec<f64>,
    report: ConstraintReport,
    weight: f64,
    fitness: Fitness,
}

/// Optimize the sizing of a feasible topology.
///
/// Returns the best feasible solution found within the evaluation budget,
/// or the least-violating candidate flagged infeasible when no feasible
/// sizing was found. Deterministic for a fixed `cfg.seed`.
pub fn optimize_sizing(
    instance: &Instance,
    topology: &Topology,
    cfg: &LowerConfig,
) -> Result<SizingSolution, SizingError> {
    if !check_g1(instance, topology) || !check_g2(instance, topology) {
        return Err(SizingError::UpperInfeasible);
    }
    let model = StructuralModel::new(instance, topology)?;
    let n = model.active_groups().len();
    cfg.validate(n)?;

    let size_set = instance.size_set();
    let lo = size_set[0].ln();
    let hi = size_set[size_set.len() - 1].ln();
    let lambda = cfg.lambda(n);
    let mu = cfg.mu(lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut scratch = Scratch::default();

    let mut evaluations = 0usize;
    let mut best: Option<Evaluated> = None;

    // generations without improvement before a restart triggers
    let stall_limit = 20 + 3 * n;

    let mut starts = 0usize;
    while evaluations < cfg.max_evaluations && starts <= cfg.restarts {
        starts += 1;
        let span = (hi - lo).max(1e-12);
        let mean: Vec<f64> = if starts == 1 {
            vec![(lo + hi) / 2.0; n]
        } else {
            (0..n).map(|_| rng.gen_range(lo..=hi)).collect()
        };
        let mut es = CmaEs::new(mean, 0.3 * span, lambda, mu);
        let mut stall = 0usize;
        let mut restart_best: Option<Fitness> = None;

        'generations: while evaluations < cfg.max_evaluations && stall < stall_limit {
            let mut offspring: Vec<Evaluated> = Vec::with_capacity(lambda);
            for _ in 0..lambda {
                if evaluations >= cfg.max_evaluations {
                    break;
                }
                let latent = es.sample(&mut rng);
                let cont: Vec<f64> = latent.iter().map(|z| z.clamp(lo, hi).exp()).collect();
                let mut candidate =
                    evaluate(&model, &cont, size_set, &mut rng, &mut scratch, &mut evaluations)?;
                candidate.latent = latent;

                // violation mapping for overloaded candidates
                if candidate.report.internally_stable
                    && candidate.report.max_ratio() > 1.0 + CONSTRAINT_TOL
                    && evaluations < cfg.max_evaluations
                {
                    let adjusted = mapping_adjust(&cont, &candidate.report, size_set[size_set.len() - 1]);
                    let mut mapped =
                        evaluate(&model, &adjusted, size_set, &mut rng, &mut scratch, &mut evaluations)?;
                    if mapped.fitness.better_than(&candidate.fitness) {
                        mapped.latent = adjusted.iter().map(|a| a.ln().clamp(lo, hi)).collect();
                        candidate = mapped;
                    }
                } else if candidate.report.internally_stable
                    && candidate.report.max_ratio() < RESIZE_WINDOW.0
                    && evaluations < cfg.max_evaluations
                {
                    let resized =
                        resize_near_boundary(&cont, &candidate.report, RESIZE_PROBABILITY, &mut rng);
                    if resized != cont {
                        let clamped: Vec<f64> = resized
                            .iter()
                            .map(|a| a.clamp(size_set[0], size_set[size_set.len() - 1]))
                            .collect();
                        let mut moved =
                            evaluate(&model, &clamped, size_set, &mut rng, &mut scratch, &mut evaluations)?;
                        if moved.fitness.better_than(&candidate.fitness) {
                            moved.latent = clamped.iter().map(|a| a.ln().clamp(lo, hi)).collect();
                            candidate = moved;
                        }
                    }
                }

                offspring.push(candidate);
            }
            if offspring.is_empty() {
                break 'generations;
            }

            offspring.sort_by(|a, b|

                match a.fitness.class.cmp(&b.fitness.class) {
                    std::cmp::Ordering::Equal => a
                        .fitness
                        .key
                        .partial_cmp(&b.fitness.key)
                        .unwrap_or(std::cmp::Ordering::Equal),
                    other => other,
                });

            let generation_best = offspring[0].fitness;
            if restart_best.map_or(true, |rb| generation_best.better_than(&rb)) {
                restart_best = Some(generation_best);
                stall = 0;
            } else {
                stall += 1;
            }
            if best
                .as_ref()
                .map_or(true, |b| generation_best.better_than(&b.fitness))
            {
                best = Some(Evaluated {
                    latent: offspring[0].latent.clone(),
                    areas: offspring[0].areas.clone(),
                    report: offspring[0].report,
                    weight: offspring[0].weight,
                    fitness: offspring[0].fitness,
                });
            }

            if offspring.len() < mu {
                break 'generations;
            }
            let parents: Vec<&[f64]> = offspring[..mu].iter().map(|c| c.latent.as_slice()).collect();
            if !es.update(&parents) {
                break 'generations; // degenerate covariance: force restart
            }
        }
    }

    let best = best.expect("budget guarantees at least one evaluation");
    let mut areas = vec![None; instance.group_count()];
    for (slot, &g) in model.active_groups().iter().enumerate() {
        areas[g] = Some(best.areas[slot]);
    }
    Ok(SizingSolution {
        areas,
        weight: best.weight,
        max_stress_ratio: best.report.max_stress_ratio,
        max_disp_ratio: best.report.max_disp_ratio,
        internally_stable: best.report.internally_stable,
        feasible: best.report.is_feasible(),
        evaluations_used: evaluations,
    })
}

fn evaluate(
    model: &StructuralModel<'_>,
    continuous: &[f64],
    size_set: &[f64],
    rng: &mut ChaCha8Rng,
    scratch: &mut Scratch,
    evaluations: &mut usize,
) -> Result<Evaluated, SizingError> {
    let areas: Vec<f64> = continuous
        .iter()
        .map(|v| probabilistic_round(*v, size_set, rng))
        .collect();
    let report = model.constraint_report(&areas, scratch)?;
    *evaluations += 1;
    let weight = model.weight(&areas);
    Ok(Evaluated {
        latent: Vec::new(),
        areas,
        report,
        weight,
        fitness: Fitness::from_report(&report, weight),
    })
}
