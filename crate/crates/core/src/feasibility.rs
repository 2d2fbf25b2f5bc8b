//! Upper-level topology feasibility: necessary-node coverage (G1),
//! external stability (G2), graded violation degrees and the (1+1)-EA
//! repair operator.
//!
//! G2 combines three conditions: non-positive degree of freedom, a
//! minimum member/restraint count at every active node, and a strictly
//! larger count at active nodes that carry no external load.

use rand::Rng;
use thiserror::Error;

use crate::instance::{Instance, Topology};

#[derive(Debug, Error)]
pub enum RepairError {
    #[error("repair budget of {budget} iterations exhausted without reaching feasibility")]
    BudgetExhausted { budget: usize },
}

/// Graded infeasibility of a topology.
///
/// `alpha` counts necessary nodes with no incident active member, `beta`
/// is the positive part of the degree of freedom, and `theta` counts
/// active nodes failing the per-node member/restraint conditions.
/// `(0, 0, 0)` is equivalent to G1 ∧ G2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViolationVector {
    pub alpha: usize,
    pub beta: usize,
    pub theta: usize,
}

impl ViolationVector {
    pub fn is_feasible(&self) -> bool {
        self.alpha == 0 && self.beta == 0 && self.theta == 0
    }
}

/// Per-node activity summary for one topology.
struct NodeActivity {
    /// incident active member count per node index
    degree: Vec<usize>,
    active_member_count: usize,
}

fn node_activity(instance: &Instance, topology: &Topology) -> NodeActivity {
    let mut degree = vec![0usize; instance.nodes().len()];
    let mut active_member_count = 0;
    for g in 0..instance.group_count() {
        if topology.is_active(g) {
            for &m_idx in instance.group_member_indices(g) {
                let (ni, nj) = instance.member_ends_idx(m_idx);
                degree[ni] += 1;
                degree[nj] += 1;
                active_member_count += 1;
            }
        }
    }
    NodeActivity {
        degree,
        active_member_count,
    }
}

/// G1: every necessary node (support or loaded) has an incident active member.
pub fn check_g1(instance: &Instance, topology: &Topology) -> bool {
    let activity = node_activity(instance, topology);
    instance
        .necessary_idx()
        .iter()
        .all(|&n_idx| activity.degree[n_idx] > 0)
}

/// G2: the truss is externally stable.
pub fn check_g2(instance: &Instance, topology: &Topology) -> bool {
    let activity = node_activity(instance, topology);
    dof_violation(instance, &activity) == 0 && node_condition_violations(instance, &activity) == 0
}

/// DoF = dim·(active nodes) − active members − restraints on active nodes;
/// returns max(0, DoF).
fn dof_violation(instance: &Instance, activity: &NodeActivity) -> usize {
    let dim = instance.dimension() as i64;
    let mut active_nodes = 0i64;
    let mut restraints = 0i64;
    for (n_idx, node) in instance.nodes().iter().enumerate() {
        if activity.degree[n_idx] > 0 {
            active_nodes += 1;
            restraints += node.restrained.iter().filter(|r| **r).count() as i64;
        }
    }
    let dof = dim * active_nodes - activity.active_member_count as i64 - restraints;
    dof.max(0) as usize
}

/// Count of active nodes violating the per-node conditions: every active
/// node needs members + restraints ≥ dimension, and active nodes that
/// carry no external load need strictly more than the dimension.
fn node_condition_violations(instance: &Instance, activity: &NodeActivity) -> usize {
    let dim = instance.dimension();
    let mut violating = 0;
    for (n_idx, node) in instance.nodes().iter().enumerate() {
        if activity.degree[n_idx] == 0 {
            continue;
        }
        let restraints = node.restrained.iter().filter(|r| **r).count();
        let total = activity.degree[n_idx] + restraints;
        let carrying = instance.is_loaded_idx(n_idx);
        let violated = if carrying { total < dim } else { total <= dim };
        if violated {
            violating += 1;
        }
    }
    violating
}

/// Violation degrees (α, β, θ) of a topology.
pub fn violations(instance: &Instance, topology: &Topology) -> ViolationVector {
    let activity = node_activity(instance, topology);
    let alpha = instance
        .necessary_idx()
        .iter()
        .filter(|&&n_idx| activity.degree[n_idx] == 0)
        .count();
    ViolationVector {
        alpha,
        beta: dof_violation(instance, &activity),
        theta: node_condition_violations(instance, &activity),
    }
}

/// Repair-comparator acceptance: strict lexicographic ordering on
/// (α, β, θ) with ties accepted on the final component.
pub fn dominates(a: &ViolationVector, b: &ViolationVector) -> bool {
    if a.alpha != b.alpha {
        return a.alpha < b.alpha;
    }
    if a.beta != b.beta {
        return a.beta < b.beta;
    }
    a.theta <= b.theta
}

/// (1+1)-EA repair: mutate with per-bit rate 1/m (redrawing when no bit
/// flips), accept offspring that do not worsen the violation vector, and
/// return the first feasible topology reached. The input is returned
/// unchanged when already feasible.
pub fn repair<R: Rng>(
    instance: &Instance,
    topology: &Topology,
    rng: &mut R,
    budget: usize,
) -> Result<Topology, RepairError> {
    let m = instance.group_count();
    debug_assert_eq!(topology.len(), m);
    let mut parent = topology.clone();
    let mut parent_violations = violations(instance, &parent);
    if parent_violations.is_feasible() {
        return Ok(parent);
    }
    let rate = 1.0 / m as f64;
    for _ in 0..budget {
        let mut offspring = parent.clone();
        let mut flipped = false;
        while !flipped {
            for g in 0..m {
                if rng.gen::<f64>() < rate {
                    offspring.set(g, !offspring.is_active(g));
                    flipped = true;
                }
            }
        }
        let offspring_violations = violations(instance, &offspring);
        if dominates(&offspring_violations, &parent_violations) {
            parent = offspring;
            parent_violations = offspring_violations;
            if parent_violations.is_feasible() {
                return Ok(parent);
            }
        }
    }
    Err(RepairError::BudgetExhausted { budget })
}
