//! Checks of the shipped benchmark instances: schema validity, ground
//! structure feasibility, equilibrium of the analyzed ground structures,
//! and reproduction of well-known published designs (weight and
//! feasibility), which pins down the transcription of geometry, groups,
//! load cases and catalogs.

use truss_core::{
    analyze, check_g1, check_g2, check_internal_stability, evaluate_constraints, violations,
    weight, Instance, Topology,
};

fn load(name: &str) -> Instance {
    let path = format!("{}/../../instances/{name}.json", env!("CARGO_MANIFEST_DIR"));
    Instance::load(path).unwrap_or_else(|e| panic!("loading {name}: {e}"))
}

const ALL: &[&str] = &["10bar", "15bar", "25bar-case1", "25bar-case2", "52bar", "72bar"];

#[test]
fn ground_structures_are_upper_feasible() {
    for name in ALL {
        let inst = load(name);
        let full = Topology::all_ones(inst.group_count());
        assert!(check_g1(&inst, &full), "{name}: G1 fails on ground structure");
        assert!(check_g2(&inst, &full), "{name}: G2 fails on ground structure: {:?}", violations(&inst, &full));
        assert!(violations(&inst, &full).is_feasible());
    }
}

#[test]
fn ground_structures_are_internally_stable() {
    for name in ALL {
        let inst = load(name);
        let full = Topology::all_ones(inst.group_count());
        let mid = inst.size_set()[inst.size_set().len() / 2];
        let areas = vec![mid; inst.group_count()];
        assert!(
            check_internal_stability(&inst, &full, &areas).unwrap(),
            "{name}: ground structure is a mechanism"
        );
    }
}

#[test]
fn ground_structure_equilibrium_residuals_are_tiny() {
    for name in ALL {
        let inst = load(name);
        let full = Topology::all_ones(inst.group_count());
        let mid = inst.size_set()[inst.size_set().len() / 2];
        let areas = vec![mid; inst.group_count()];
        for (c, case) in inst.load_cases().iter().enumerate() {
            let result = analyze(&inst, &full, &areas, case).unwrap();
            assert!(result.stable, "{name} case {c} unstable");
            let dim = inst.dimension();
            let mut total = vec![0.0f64; dim];
            let mut scale = 0.0f64;
            for load in &case.loads {
                for (axis, f) in load.force.iter().enumerate() {
                    total[axis] += f;
                    scale = scale.max(f.abs());
                }
            }
            for (_, axis, r) in &result.reactions {
                total[*axis] += r;
            }
            for axis in 0..dim {
                assert!(
                    total[axis].abs() <= 1e-8 * scale,
                    "{name} case {c} axis {axis}: residual {} vs load scale {scale}",
                    total[axis]
                );
            }
        }
    }
}

#[test]
fn instance_shapes_match_the_benchmarks() {
    let expect = [
        ("10bar", 10, 6, 10, 1),
        ("15bar", 15, 8, 15, 1),
        ("25bar-case1", 8, 10, 25, 1),
        ("25bar-case2", 8, 10, 25, 2),
        ("52bar", 12, 20, 52, 1),
        ("72bar", 16, 20, 72, 2),
    ];
    for (name, m, nodes, members, cases) in expect {
        let inst = load(name);
        assert_eq!(inst.group_count(), m, "{name} groups");
        assert_eq!(inst.nodes().len(), nodes, "{name} nodes");
        assert_eq!(inst.members().len(), members, "{name} members");
        assert_eq!(inst.load_cases().len(), cases, "{name} load cases");
    }
}

#[test]
fn ten_bar_necessary_nodes_are_supports_and_loads() {
    let inst = load("10bar");
    assert_eq!(inst.necessary_nodes(), &[1, 2, 3, 4]);
}

/// Published discrete full-topology optimum of the 10-bar problem
/// (33.5, 1.62, 22.9, 14.2, 1.62, 1.62, 7.97, 22.9, 22.0, 1.62) weighs
/// 5490.74 lb and satisfies the constraints.
#[test]
fn ten_bar_reference_design_reproduces() {
    let inst = load("10bar");
    let full = Topology::all_ones(10);
    let areas = [33.5, 1.62, 22.9, 14.2, 1.62, 1.62, 7.97, 22.9, 22.0, 1.62];
    let w = weight(&inst, &full, &areas).unwrap();
    assert!(
        (w - 5490.74).abs() / 5490.74 < 2e-4,
        "10-bar reference weight came out as {w}"
    );
    let report = evaluate_constraints(&inst, &full, &areas).unwrap();
    assert!(report.internally_stable);
    assert!(
        report.max_stress_ratio <= 1.0 + 1e-3 && report.max_disp_ratio <= 1.0 + 1e-3,
        "10-bar reference ratios: stress {}, disp {}",
        report.max_stress_ratio,
        report.max_disp_ratio
    );
}

/// Published optimum of the 25-bar single-load-case variant:
/// (0.1, 0.3, 3.4, 0.1, 2.1, 1.0, 0.5, 3.4) at 484.85 lb, feasible.
#[test]
fn twenty_five_bar_reference_design_reproduces() {
    let inst = load("25bar-case1");
    let full = Topology::all_ones(8);
    let areas = [0.1, 0.3, 3.4, 0.1, 2.1, 1.0, 0.5, 3.4];
    let w = weight(&inst, &full, &areas).unwrap();
    assert!(
        (w - 484.85).abs() / 484.85 < 2e-4,
        "25-bar reference weight came out as {w}"
    );
    let report = evaluate_constraints(&inst, &full, &areas).unwrap();
    assert!(report.internally_stable);
    assert!(
        report.max_stress_ratio <= 1.0 + 1e-3 && report.max_disp_ratio <= 1.0 + 1e-3,
        "25-bar reference ratios: stress {}, disp {}",
        report.max_stress_ratio,
        report.max_disp_ratio
    );
}

/// Member lengths recomputed straight from the raw JSON coordinates (an
/// independent path that bypasses the Instance construction) must match
/// `member_length`.
#[test]
fn member_lengths_match_raw_coordinates() {
    for name in ALL {
        let path = format!("{}/../../instances/{name}.json", env!("CARGO_MANIFEST_DIR"));
        let raw: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let inst = load(name);
        let coords: std::collections::HashMap<u64, Vec<f64>> = raw["nodes"]
            .as_array()
            .unwrap()
            .iter()
            .map(|n| {
                (
                    n["id"].as_u64().unwrap(),
                    n["xyz"].as_array().unwrap().iter().map(|c| c.as_f64().unwrap()).collect(),
                )
            })
            .collect();
        for m in raw["members"].as_array().unwrap() {
            let id = m["id"].as_u64().unwrap() as u32;
            let a = &coords[&m["i"].as_u64().unwrap()];
            let b = &coords[&m["j"].as_u64().unwrap()];
            let expected: f64 = a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            let got = inst.member_length(id).unwrap();
            assert!(
                (got - expected).abs() <= 1e-12 * expected,
                "{name} member {id}: {got} vs {expected}"
            );
        }
    }
    // spot values fixed by the 10-bar geometry
    let inst = load("10bar");
    assert_eq!(inst.member_length(1).unwrap(), 360.0);
    let diag = inst.member_length(7).unwrap();
    assert!((diag - 360.0 * 2.0f64.sqrt()).abs() < 1e-9);
}
