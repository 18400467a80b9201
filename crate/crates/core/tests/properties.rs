//! Cross-module properties on generated scenarios.

use jamloc_core::estimators::{estimate, wcl, Estimator, EstimatorContext};
use jamloc_core::graph::{GraphBuilder, GraphConfig};
use jamloc_core::scenario::{
    generate_dynamic, generate_static, DynamicGenConfig, MeasurementSample, Placement,
    StaticGenConfig, Topology,
};
use jamloc_core::Point;
use proptest::prelude::*;

/// Brute-force hull membership: `p` lies in some triangle of the point set.
fn in_some_triangle(pts: &[Point], p: &Point) -> bool {
    let side = |a: &Point, b: &Point| (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    let n = pts.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, c) = (&pts[i], &pts[j], &pts[k]);
                let (s1, s2, s3) = (side(a, b), side(b, c), side(c, a));
                if (s1 >= 0.0 && s2 >= 0.0 && s3 >= 0.0) || (s1 <= 0.0 && s2 <= 0.0 && s3 <= 0.0) {
                    return true;
                }
            }
        }
    }
    false
}

fn arb_topology() -> impl Strategy<Value = Topology> {
    prop::sample::select(Topology::STATIC.to_vec())
}

fn arb_placement() -> impl Strategy<Value = Placement> {
    prop::sample::select(vec![Placement::InsideRegion, Placement::OutsideRegion])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn static_generation_is_valid_and_labelled(seed in any::<u64>(), topo in arb_topology(), place in arb_placement()) {
        let cfg = StaticGenConfig::default();
        let a = generate_static(topo, place, 2, seed, &cfg).unwrap();
        prop_assert_eq!(&a, &generate_static(topo, place, 2, seed, &cfg).unwrap());
        for inst in &a {
            inst.validate().unwrap();
            prop_assert!((2.7..=5.0).contains(&inst.propagation.gamma));
            prop_assert!((2.0..=6.0).contains(&inst.propagation.sigma));
            let inside = in_some_triangle(&inst.positions(), &inst.jammer.position);
            prop_assert_eq!(inside, place == Placement::InsideRegion);
        }
    }

    #[test]
    fn graphs_are_symmetric_with_inbound_supernode(seed in any::<u64>(), topo in arb_topology(), k in 1usize..8) {
        let inst = &generate_static(topo, Placement::InsideRegion, 1, seed, &StaticGenConfig::default()).unwrap()[0];
        let cfg = GraphConfig { k, ..GraphConfig::default() };
        let g = GraphBuilder::new(cfg).build(inst).unwrap();
        let sn = g.supernode_index.unwrap();
        prop_assert!(g.features.is_finite());
        let set: std::collections::HashSet<_> = g.edges.iter().copied().collect();
        for &(s, d) in &g.edges {
            if s == sn || d == sn {
                prop_assert_eq!(d, sn);
            } else {
                prop_assert!(set.contains(&(d, s)));
            }
        }
        for i in 0..g.num_measurements {
            prop_assert!(set.contains(&(i, sn)));
            prop_assert!(!g.neighbors[i].contains(&sn));
        }
        prop_assert!(g.edge_weights.iter().all(|w| (0.0..=1.0).contains(w)));
    }

    #[test]
    fn wcl_ignores_a_common_linear_scale(seed in any::<u64>(), shift_db in -20.0f64..20.0) {
        let inst = &generate_static(Topology::Random, Placement::OutsideRegion, 1, seed, &StaticGenConfig::default()).unwrap()[0];
        let shifted: Vec<MeasurementSample> = inst
            .samples
            .iter()
            .map(|s| MeasurementSample::new(s.position, s.noise_dbm + shift_db, s.time_index))
            .collect();
        let a = wcl(&inst.samples).unwrap().position;
        let b = wcl(&shifted).unwrap().position;
        prop_assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn estimators_are_deterministic(seed in any::<u64>()) {
        let inst = &generate_static(Topology::Circle, Placement::InsideRegion, 1, seed, &StaticGenConfig::default()).unwrap()[0];
        let ctx = EstimatorContext::for_instance(inst);
        for e in [Estimator::Mlat, Estimator::Mle, Estimator::Lsq, Estimator::Pl] {
            let a = estimate(e, &inst.samples, &ctx).unwrap();
            let b = estimate(e, &inst.samples, &ctx).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

#[test]
fn dynamic_generation_is_reproducible_and_valid() {
    let cfg = DynamicGenConfig::default();
    let a = generate_dynamic(3, 11, &cfg).unwrap();
    assert_eq!(a, generate_dynamic(3, 11, &cfg).unwrap());
    for inst in &a {
        inst.validate().unwrap();
        assert!(inst.is_dynamic());
        let t: Vec<u64> = inst.samples.iter().map(|s| s.time_index).collect();
        assert!(t.windows(2).all(|w| w[0] < w[1]));
    }
}
