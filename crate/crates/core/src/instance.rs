//! Ground-structure problem instances and upper-level topology vectors.
//!
//! An [`Instance`] is an immutable description of a truss optimization
//! benchmark: nodal geometry, the ground-structure member set partitioned
//! into design groups, supports, load cases, the discrete size catalog and
//! material/constraint data. A [`Topology`] is the upper-level design
//! variable: one bit per member group.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors produced while loading or validating an instance file.
#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("failed to read instance file `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed instance document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> InstanceError {
    InstanceError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Tension/compression stress magnitudes a member may not exceed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AxialLimits {
    pub tension: f64,
    pub compression: f64,
}

impl AxialLimits {
    pub fn symmetric(magnitude: f64) -> Self {
        Self {
            tension: magnitude,
            compression: magnitude,
        }
    }
}

/// Per-axis nodal displacement bound: one magnitude for every axis, or a
/// per-axis list where `null` leaves an axis unconstrained.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum DisplacementLimit {
    Uniform(f64),
    PerAxis(Vec<Option<f64>>),
}

/// Stress limit as written in an instance document: either one symmetric
/// global magnitude or a default with per-group / per-member overrides.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum StressLimit {
    Uniform(f64),
    Detailed {
        default: AxialLimits,
        #[serde(default)]
        groups: BTreeMap<String, AxialLimits>,
        #[serde(default)]
        members: BTreeMap<String, AxialLimits>,
    },
}

/// A truss joint: position plus per-axis support restraints.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: u32,
    pub xyz: Vec<f64>,
    pub restrained: Vec<bool>,
}

/// An axial bar connecting two nodes, assigned to one design group.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Member {
    pub id: u32,
    pub i: u32,
    pub j: u32,
    pub group: usize,
}

/// One external point load applied to a node.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointLoad {
    pub node: u32,
    pub force: Vec<f64>,
}

/// A set of simultaneous nodal loads; constraints are checked per case.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadCase {
    pub loads: Vec<PointLoad>,
}

/// On-disk instance schema (reference serialization: JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    provenance: Option<String>,
    dimension: usize,
    nodes: Vec<Node>,
    members: Vec<Member>,
    groups: Vec<Vec<u32>>,
    necessary_nodes: Vec<u32>,
    size_set: Vec<f64>,
    density: f64,
    elastic_modulus: f64,
    load_cases: Vec<LoadCase>,
    stress_limit: StressLimit,
    #[serde(default)]
    displacement_limit: Option<DisplacementLimit>,
}

/// A validated, immutable ground-structure instance.
///
/// All cross-references (member end nodes, group membership, load targets)
/// are checked at load time; derived lookup tables are precomputed so the
/// analysis and search layers never re-resolve ids. Instances are safe to
/// share across threads.
#[derive(Debug, Clone)]
pub struct Instance {
    name: String,
    provenance: Option<String>,
    dimension: usize,
    nodes: Vec<Node>,
    members: Vec<Member>,
    groups: Vec<Vec<u32>>,
    necessary_nodes: Vec<u32>,
    size_set: Vec<f64>,
    density: f64,
    elastic_modulus: f64,
    load_cases: Vec<LoadCase>,
    stress_limit: StressLimit,
    displacement_limit: Option<DisplacementLimit>,
    /// per-axis displacement bounds resolved from `displacement_limit`
    axis_limits: [Option<f64>; 3],

    node_index: HashMap<u32, usize>,
    member_index: HashMap<u32, usize>,
    member_lengths: Vec<f64>,
    member_limits: Vec<AxialLimits>,
    /// member index -> (node index i, node index j)
    member_ends: Vec<(usize, usize)>,
    /// group index -> member indices
    group_members: Vec<Vec<usize>>,
    necessary_idx: Vec<usize>,
    /// node indices carrying a nonzero external load in any case
    loaded_idx: HashSet<usize>,
    /// per load case: (node index, force components)
    case_loads: Vec<Vec<(usize, [f64; 3])>>,
}

impl Instance {
    /// Load and validate an instance document from `path`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut inst = Self::from_json(&text)?;
        if inst.name.is_empty() {
            inst.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "instance".to_string());
        }
        Ok(inst)
    }

    /// Parse and validate an instance document from JSON text.
    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        Self::from_parts(file)
    }

    fn from_parts(file: InstanceFile) -> Result<Self, InstanceError> {
        let InstanceFile {
            name,
            provenance,
            dimension,
            nodes,
            members,
            groups,
            necessary_nodes,
            size_set,
            density,
            elastic_modulus,
            load_cases,
            stress_limit,
            displacement_limit,
        } = file;

        if dimension != 2 && dimension != 3 {
            return Err(invalid("dimension", format!("must be 2 or 3, got {dimension}")));
        }
        if nodes.is_empty() {
            return Err(invalid("nodes", "must not be empty"));
        }
        let mut node_index = HashMap::new();
        for (idx, node) in nodes.iter().enumerate() {
            if node_index.insert(node.id, idx).is_some() {
                return Err(invalid("nodes", format!("duplicate node id {}", node.id)));
            }
            if node.xyz.len() != dimension {
                return Err(invalid(
                    "nodes.xyz",
                    format!("node {} has {} coordinates, expected {dimension}", node.id, node.xyz.len()),
                ));
            }
            if node.xyz.iter().any(|c| !c.is_finite()) {
                return Err(invalid("nodes.xyz", format!("node {} has non-finite coordinates", node.id)));
            }
            if node.restrained.len() != dimension {
                return Err(invalid(
                    "nodes.restrained",
                    format!("node {} has {} restraint flags, expected {dimension}", node.id, node.restrained.len()),
                ));
            }
        }

        if members.is_empty() {
            return Err(invalid("members", "must not be empty"));
        }
        let mut member_index = HashMap::new();
        let mut member_lengths = Vec::with_capacity(members.len());
        let mut member_ends = Vec::with_capacity(members.len());
        for (idx, member) in members.iter().enumerate() {
            if member_index.insert(member.id, idx).is_some() {
                return Err(invalid("members", format!("duplicate member id {}", member.id)));
            }
            let ni = *node_index
                .get(&member.i)
                .ok_or_else(|| invalid("members.i", format!("member {} references unknown node {}", member.id, member.i)))?;
            let nj = *node_index
                .get(&member.j)
                .ok_or_else(|| invalid("members.j", format!("member {} references unknown node {}", member.id, member.j)))?;
            if ni == nj {
                return Err(invalid("members", format!("member {} connects node {} to itself", member.id, member.i)));
            }
            let length = euclidean(&nodes[ni].xyz, &nodes[nj].xyz);
            if !(length > 0.0) {
                return Err(invalid("members", format!("member {} has zero length", member.id)));
            }
            member_ends.push((ni, nj));
            member_lengths.push(length);
        }

        if groups.is_empty() {
            return Err(invalid("groups", "must not be empty"));
        }
        let mut group_members = vec![Vec::new(); groups.len()];
        let mut seen = HashSet::new();
        for (g, ids) in groups.iter().enumerate() {
            if ids.is_empty() {
                return Err(invalid("groups", format!("group {g} is empty")));
            }
            for id in ids {
                let idx = *member_index
                    .get(id)
                    .ok_or_else(|| invalid("groups", format!("group {g} references unknown member {id}")))?;
                if !seen.insert(*id) {
                    return Err(invalid("groups", format!("member {id} appears in more than one group")));
                }
                if members[idx].group != g {
                    return Err(invalid(
                        "members.group",
                        format!("member {id} declares group {} but is listed in group {g}", members[idx].group),
                    ));
                }
                group_members[g].push(idx);
            }
        }
        if seen.len() != members.len() {
            return Err(invalid("groups", "groups do not cover every member"));
        }

        if size_set.is_empty() {
            return Err(invalid("size_set", "must not be empty"));
        }
        if !(size_set[0] > 0.0) {
            return Err(invalid("size_set", "areas must be positive"));
        }
        if size_set.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("size_set", "must be strictly increasing"));
        }
        if size_set.iter().any(|a| !a.is_finite()) {
            return Err(invalid("size_set", "areas must be finite"));
        }
        if !(density > 0.0) {
            return Err(invalid("density", "must be positive"));
        }
        if !(elastic_modulus > 0.0) {
            return Err(invalid("elastic_modulus", "must be positive"));
        }

        if load_cases.is_empty() {
            return Err(invalid("load_cases", "must not be empty"));
        }
        let mut case_loads = Vec::with_capacity(load_cases.len());
        let mut loaded_idx = HashSet::new();
        for (c, case) in load_cases.iter().enumerate() {
            let mut resolved = Vec::with_capacity(case.loads.len());
            let mut any_nonzero = false;
            for load in &case.loads {
                let idx = *node_index.get(&load.node).ok_or_else(|| {
                    invalid("load_cases", format!("case {c} loads unknown node {}", load.node))
                })?;
                if load.force.len() != dimension {
                    return Err(invalid(
                        "load_cases",
                        format!("case {c} node {} has {} force components, expected {dimension}", load.node, load.force.len()),
                    ));
                }
                let mut f = [0.0; 3];
                for (axis, value) in load.force.iter().enumerate() {
                    if !value.is_finite() {
                        return Err(invalid("load_cases", format!("case {c} node {} has non-finite force", load.node)));
                    }
                    f[axis] = *value;
                }
                if f.iter().any(|v| *v != 0.0) {
                    any_nonzero = true;
                    loaded_idx.insert(idx);
                }
                resolved.push((idx, f));
            }
            if !any_nonzero {
                return Err(invalid("load_cases", format!("case {c} applies no nonzero force")));
            }
            case_loads.push(resolved);
        }

        // necessary_nodes must equal supports ∪ loaded nodes.
        let mut expected: BTreeSet<u32> = BTreeSet::new();
        for (idx, node) in nodes.iter().enumerate() {
            if node.restrained.iter().any(|r| *r) || loaded_idx.contains(&idx) {
                expected.insert(node.id);
            }
        }
        let declared: BTreeSet<u32> = necessary_nodes.iter().copied().collect();
        if declared.len() != necessary_nodes.len() {
            return Err(invalid("necessary_nodes", "contains duplicates"));
        }
        if declared != expected {
            return Err(invalid(
                "necessary_nodes",
                format!("must equal supports ∪ loaded nodes; expected {expected:?}, got {declared:?}"),
            ));
        }

        let member_limits = resolve_limits(&stress_limit, &members, groups.len(), &member_index)?;

        let mut axis_limits = [None, None, None];
        match &displacement_limit {
            None => {}
            Some(DisplacementLimit::Uniform(limit)) => {
                if !(*limit > 0.0) {
                    return Err(invalid("displacement_limit", "must be positive when present"));
                }
                for axis in 0..dimension {
                    axis_limits[axis] = Some(*limit);
                }
            }
            Some(DisplacementLimit::PerAxis(limits)) => {
                if limits.len() != dimension {
                    return Err(invalid(
                        "displacement_limit",
                        format!("per-axis form needs {dimension} entries, got {}", limits.len()),
                    ));
                }
                for (axis, limit) in limits.iter().enumerate() {
                    if let Some(l) = limit {
                        if !(*l > 0.0) {
                            return Err(invalid("displacement_limit", "entries must be positive"));
                        }
                        axis_limits[axis] = Some(*l);
                    }
                }
            }
        }

        let necessary_idx = expected.iter().map(|id| node_index[id]).collect();

        Ok(Instance {
            name: name.unwrap_or_default(),
            provenance,
            dimension,
            nodes,
            members,
            groups,
            necessary_nodes,
            size_set,
            density,
            elastic_modulus,
            load_cases,
            stress_limit,
            displacement_limit,
            axis_limits,
            node_index,
            member_index,
            member_lengths,
            member_limits,
            member_ends,
            group_members,
            necessary_idx,
            loaded_idx,
            case_loads,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    /// Number of member groups, i.e. the upper-level bit-string length m.
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn groups(&self) -> &[Vec<u32>] {
        &self.groups
    }

    pub fn necessary_nodes(&self) -> &[u32] {
        &self.necessary_nodes
    }

    pub fn size_set(&self) -> &[f64] {
        &self.size_set
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn elastic_modulus(&self) -> f64 {
        self.elastic_modulus
    }

    pub fn load_cases(&self) -> &[LoadCase] {
        &self.load_cases
    }

    /// Per-axis displacement bounds; `None` entries are unconstrained.
    pub fn displacement_limits(&self) -> &[Option<f64>; 3] {
        &self.axis_limits
    }

    /// The displacement limit exactly as written in the document.
    pub fn displacement_limit_spec(&self) -> Option<&DisplacementLimit> {
        self.displacement_limit.as_ref()
    }

    /// True when any axis carries a displacement bound.
    pub fn has_displacement_limit(&self) -> bool {
        self.axis_limits.iter().any(|l| l.is_some())
    }

    pub fn stress_limit(&self) -> &StressLimit {
        &self.stress_limit
    }

    /// Stress limits resolved per member, in member-vector order.
    pub fn member_limits(&self) -> &[AxialLimits] {
        &self.member_limits
    }

    /// Euclidean length of the member with the given id.
    pub fn member_length(&self, member_id: u32) -> Result<f64, InstanceError> {
        let idx = self
            .member_index
            .get(&member_id)
            .ok_or_else(|| invalid("member", format!("unknown member id {member_id}")))?;
        Ok(self.member_lengths[*idx])
    }

    /// Expand group-level topology bits into the set of active member ids.
    pub fn expand_topology(&self, topology: &Topology) -> Result<BTreeSet<u32>, InstanceError> {
        if topology.len() != self.group_count() {
            return Err(invalid(
                "topology",
                format!("length {} does not match group count {}", topology.len(), self.group_count()),
            ));
        }
        let mut active = BTreeSet::new();
        for (g, ids) in self.groups.iter().enumerate() {
            if topology.is_active(g) {
                active.extend(ids.iter().copied());
            }
        }
        Ok(active)
    }

    // --- index-space accessors used by the analysis and search layers ---

    pub(crate) fn node_position(&self, node_idx: usize) -> &[f64] {
        &self.nodes[node_idx].xyz
    }

    pub(crate) fn node_idx(&self, id: u32) -> Option<usize> {
        self.node_index.get(&id).copied()
    }

    pub(crate) fn member_ends_idx(&self, member_idx: usize) -> (usize, usize) {
        self.member_ends[member_idx]
    }

    pub(crate) fn member_length_idx(&self, member_idx: usize) -> f64 {
        self.member_lengths[member_idx]
    }

    pub(crate) fn group_member_indices(&self, group: usize) -> &[usize] {
        &self.group_members[group]
    }

    pub(crate) fn necessary_idx(&self) -> &[usize] {
        &self.necessary_idx
    }

    pub(crate) fn is_loaded_idx(&self, node_idx: usize) -> bool {
        self.loaded_idx.contains(&node_idx)
    }

    pub(crate) fn case_loads(&self, case: usize) -> &[(usize, [f64; 3])] {
        &self.case_loads[case]
    }

    /// Active member indices for a topology, in member-vector order.
    pub(crate) fn active_member_indices(&self, topology: &Topology) -> Vec<usize> {
        let mut active = Vec::new();
        for (m_idx, member) in self.members.iter().enumerate() {
            if topology.is_active(member.group) {
                active.push(m_idx);
            }
        }
        active
    }
}

fn resolve_limits(
    limit: &StressLimit,
    members: &[Member],
    group_count: usize,
    member_index: &HashMap<u32, usize>,
) -> Result<Vec<AxialLimits>, InstanceError> {
    let check = |l: &AxialLimits, field: &str| -> Result<(), InstanceError> {
        if !(l.tension > 0.0) || !(l.compression > 0.0) {
            return Err(invalid(field, "stress limits must be positive"));
        }
        Ok(())
    };
    match limit {
        StressLimit::Uniform(magnitude) => {
            if !(*magnitude > 0.0) {
                return Err(invalid("stress_limit", "must be positive"));
            }
            Ok(vec![AxialLimits::symmetric(*magnitude); members.len()])
        }
        StressLimit::Detailed {
            default,
            groups,
            members: member_overrides,
        } => {
            check(default, "stress_limit.default")?;
            let mut by_group: BTreeMap<usize, AxialLimits> = BTreeMap::new();
            for (key, value) in groups {
                let g: usize = key
                    .parse()
                    .map_err(|_| invalid("stress_limit.groups", format!("bad group index `{key}`")))?;
                if g >= group_count {
                    return Err(invalid("stress_limit.groups", format!("group index {g} out of range")));
                }
                check(value, "stress_limit.groups")?;
                by_group.insert(g, *value);
            }
            let mut by_member: BTreeMap<usize, AxialLimits> = BTreeMap::new();
            for (key, value) in member_overrides {
                let id: u32 = key
                    .parse()
                    .map_err(|_| invalid("stress_limit.members", format!("bad member id `{key}`")))?;
                let idx = member_index
                    .get(&id)
                    .ok_or_else(|| invalid("stress_limit.members", format!("unknown member id {id}")))?;
                check(value, "stress_limit.members")?;
                by_member.insert(*idx, *value);
            }
            Ok(members
                .iter()
                .enumerate()
                .map(|(idx, member)| {
                    by_member
                        .get(&idx)
                        .or_else(|| by_group.get(&member.group))
                        .copied()
                        .unwrap_or(*default)
                })
                .collect())
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Upper-level design variable: one inclusion bit per member group.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Topology {
    bits: Vec<bool>,
}

impl Topology {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Ground structure: every group active.
    pub fn all_ones(m: usize) -> Self {
        Self { bits: vec![true; m] }
    }

    pub fn all_zeros(m: usize) -> Self {
        Self { bits: vec![false; m] }
    }

    /// Decode bit j of `index` as the activity of group j; iterating
    /// `index` over 0..2^m visits all topologies in ascending integer order.
    pub fn from_index(index: u64, m: usize) -> Self {
        assert!(m <= 63, "topology index encoding supports at most 63 groups");
        Self {
            bits: (0..m).map(|j| (index >> j) & 1 == 1).collect(),
        }
    }

    /// Parse a bit string such as "1101"; character k is group k.
    pub fn from_bit_string(s: &str) -> Result<Self, InstanceError> {
        let mut bits = Vec::with_capacity(s.len());
        for ch in s.chars() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => {
                    return Err(invalid("topology", format!("invalid bit character `{other}`")));
                }
            }
        }
        if bits.is_empty() {
            return Err(invalid("topology", "empty bit string"));
        }
        Ok(Self { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_active(&self, group: usize) -> bool {
        self.bits[group]
    }

    pub fn set(&mut self, group: usize, active: bool) {
        self.bits[group] = active;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_active(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Hamming distance to the all-ones ground-structure reference.
    pub fn d_hamming(&self) -> usize {
        self.bits.iter().filter(|b| !**b).count()
    }

    pub fn hamming_distance(&self, other: &Topology) -> usize {
        debug_assert_eq!(self.len(), other.len());
        self.bits
            .iter()
            .zip(other.bits.iter())
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Pack the bits into a word for fast Hamming queries (m ≤ 63).
    pub fn mask(&self) -> u64 {
        debug_assert!(self.bits.len() <= 63);
        self.bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (j, b)| if *b { acc | (1 << j) } else { acc })
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}
