//! Property tests for the library invariants: topology expansion
//! monotonicity, geometry symmetries, comparator order properties, repair
//! feasibility, rounding membership, transfer-function identities, weight
//! linearity and novelty monotonicity.

use proptest::prelude::*;

use truss_core::{
    dominates, flip_positions, novelty, probabilistic_round, repair, transfer, update_velocity,
    violations, weight, FlipRule, Instance, NoveltyArchive, Topology, ViolationVector,
};

fn ten_bar() -> Instance {
    let path = format!("{}/../../instances/10bar.json", env!("CARGO_MANIFEST_DIR"));
    Instance::load(path).unwrap()
}

fn two_node_instance(ax: f64, ay: f64, bx: f64, by: f64, density: f64) -> Option<Instance> {
    let json = format!(
        r#"{{
            "dimension": 2,
            "nodes": [
                {{"id": 1, "xyz": [{ax}, {ay}], "restrained": [true, true]}},
                {{"id": 2, "xyz": [{bx}, {by}], "restrained": [false, true]}}
            ],
            "members": [{{"id": 1, "i": 1, "j": 2, "group": 0}}],
            "groups": [[1]],
            "necessary_nodes": [1, 2],
            "size_set": [1.0],
            "density": {density},
            "elastic_modulus": 100.0,
            "load_cases": [{{"loads": [{{"node": 2, "force": [1.0, 0.0]}}]}}],
            "stress_limit": 1.0
        }}"#
    );
    Instance::from_json(&json).ok()
}

proptest! {
    #[test]
    fn expansion_is_monotone_and_counts_group_sizes(bits in prop::collection::vec(any::<bool>(), 10)) {
        let inst = ten_bar();
        let x = Topology::new(bits.clone());
        let active = inst.expand_topology(&x).unwrap();
        // singleton groups: cardinality equals the number of active bits
        prop_assert_eq!(active.len(), x.count_active());

        // raising any zero bit only grows the active set
        if let Some(zero) = bits.iter().position(|b| !b) {
            let mut raised = x.clone();
            raised.set(zero, true);
            let bigger = inst.expand_topology(&raised).unwrap();
            prop_assert!(active.is_subset(&bigger));
            prop_assert_eq!(bigger.len(), active.len() + 1);
        }
    }

    #[test]
    fn member_length_is_symmetric_and_translation_invariant(
        ax in -500.0f64..500.0, ay in -500.0f64..500.0,
        bx in -500.0f64..500.0, by in -500.0f64..500.0,
        tx in -200.0f64..200.0, ty in -200.0f64..200.0,
    ) {
        prop_assume!((ax - bx).abs() > 1e-6 || (ay - by).abs() > 1e-6);
        let forward = two_node_instance(ax, ay, bx, by, 1.0).unwrap();
        let reversed = two_node_instance(bx, by, ax, ay, 1.0).unwrap();
        let shifted = two_node_instance(ax + tx, ay + ty, bx + tx, by + ty, 1.0).unwrap();
        let l = forward.member_length(1).unwrap();
        prop_assert!((l - reversed.member_length(1).unwrap()).abs() <= 1e-12 * l);
        prop_assert!((l - shifted.member_length(1).unwrap()).abs() <= 1e-9 * l.max(1.0));
    }

    #[test]
    fn comparator_is_total_and_transitive(
        a in (0usize..6, 0usize..6, 0usize..6),
        b in (0usize..6, 0usize..6, 0usize..6),
        c in (0usize..6, 0usize..6, 0usize..6),
    ) {
        let va = ViolationVector { alpha: a.0, beta: a.1, theta: a.2 };
        let vb = ViolationVector { alpha: b.0, beta: b.1, theta: b.2 };
        let vc = ViolationVector { alpha: c.0, beta: c.1, theta: c.2 };
        prop_assert!(dominates(&va, &vb) || dominates(&vb, &va));
        if dominates(&va, &vb) && dominates(&vb, &vc) {
            prop_assert!(dominates(&va, &vc));
        }
        let zero = ViolationVector { alpha: 0, beta: 0, theta: 0 };
        prop_assert!(dominates(&zero, &va));
    }

    #[test]
    fn repair_reaches_feasibility_and_never_worsens(
        bits in prop::collection::vec(any::<bool>(), 10),
        seed in 0u64..1000,
    ) {
        use rand::SeedableRng;
        let inst = ten_bar();
        let start = Topology::new(bits);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let repaired = repair(&inst, &start, &mut rng, 10_000).unwrap();
        prop_assert!(violations(&inst, &repaired).is_feasible());
        // feasible inputs come back unchanged
        if violations(&inst, &start).is_feasible() {
            prop_assert_eq!(repaired, start);
        }
    }

    #[test]
    fn rounding_stays_on_the_catalog(value in -10.0f64..50.0, seed in 0u64..100) {
        use rand::SeedableRng;
        let set = [1.0, 2.0, 3.5, 7.0, 20.0];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rounded = probabilistic_round(value, &set, &mut rng);
        prop_assert!(set.contains(&rounded));
        if value >= set[0] && value <= set[4] {
            // lands on one of the two neighbours
            let idx = set.partition_point(|s| *s < value);
            if set[idx] == value {
                prop_assert_eq!(rounded, value);
            } else {
                prop_assert!(rounded == set[idx] || rounded == set[idx - 1]);
            }
        }
    }

    #[test]
    fn transfer_is_a_sigmoid(v in -20.0f64..20.0, dv in 0.001f64..5.0, phi in 1.0f64..10.0) {
        // |v/φ| ≤ 20 here, well inside f64 range (velocities are clamped
        // to ±6 and φ ≥ 1 in the search itself)
        let t = transfer(v, phi);
        prop_assert!(t > 0.0 && t < 1.0);
        prop_assert!(transfer(v + dv, phi) > t);
        prop_assert!((transfer(-v, phi) - (1.0 - t)).abs() < 1e-12);
    }

    #[test]
    fn transfer_saturates_cleanly(v in -1e6f64..1e6, phi in 1e-3f64..10.0) {
        let t = transfer(v, phi);
        prop_assert!((0.0..=1.0).contains(&t));
    }

    #[test]
    fn velocities_stay_clamped(
        v in prop::collection::vec(-20.0f64..20.0, 8),
        pos_bits in prop::collection::vec(any::<bool>(), 8),
        best_bits in prop::collection::vec(any::<bool>(), 8),
        seed in 0u64..100,
    ) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let z = Topology::new(pos_bits);
        let p = Topology::new(best_bits.clone());
        let g = Topology::new(best_bits);
        let updated = update_velocity(&v, &z, &p, &g, 0.9, 1.0, 1.0, 6.0, &mut rng);
        prop_assert!(updated.iter().all(|vi| (-6.0..=6.0).contains(vi)));
        let flipped = flip_positions(&updated, 2.5, FlipRule::Printed, &mut rng);
        prop_assert_eq!(flipped.len(), 8);
    }

    #[test]
    fn weight_is_linear_in_density_and_areas(
        areas in prop::collection::vec(0.5f64..30.0, 10),
        bits in prop::collection::vec(any::<bool>(), 10),
        scale in 0.1f64..5.0,
    ) {
        let inst = ten_bar();
        let x = Topology::new(bits);
        let w = weight(&inst, &x, &areas).unwrap();
        prop_assert!(w >= 0.0);
        let doubled: Vec<f64> = areas.iter().map(|a| a * scale).collect();
        let w2 = weight(&inst, &x, &doubled).unwrap();
        prop_assert!((w2 - scale * w).abs() <= 1e-9 * w.max(1.0));
        // removing a group never increases weight at fixed sizes
        if let Some(active) = (0..10).find(|g| x.is_active(*g)) {
            let mut smaller = x.clone();
            smaller.set(active, false);
            let w3 = weight(&inst, &smaller, &areas).unwrap();
            prop_assert!(w3 <= w + 1e-12);
        }
    }

    #[test]
    fn novelty_is_nonnegative_and_self_insertion_never_raises_it(
        masks in prop::collection::vec(0u64..256, 4..20),
        query in 0u64..256,
        k in 1usize..5,
    ) {
        let mut archive = NoveltyArchive::new();
        for (i, mask) in masks.iter().enumerate() {
            archive.insert(&Topology::from_index(*mask, 8), i);
        }
        let x = Topology::from_index(query, 8);
        let before = novelty(&x, &archive, k).unwrap();
        prop_assert!(before >= 0.0);
        let mut with_self = archive.clone();
        with_self.insert(&x, 99);
        let after = novelty(&x, &with_self, k).unwrap();
        prop_assert!(after <= before + 1e-12);
    }
}

#[test]
fn archive_grows_monotonically_without_duplicates() {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let mut archive = NoveltyArchive::new();
    let mut previous_len = 0;
    for iteration in 0..500 {
        let t = Topology::from_index(rng.gen_range(0..64), 6);
        archive.insert(&t, iteration);
        assert!(archive.len() >= previous_len);
        previous_len = archive.len();
    }
    assert_eq!(archive.len(), 64);
    let mut seen = std::collections::HashSet::new();
    for (topology, _) in archive.entries() {
        assert!(seen.insert(topology.to_string()));
    }
}
