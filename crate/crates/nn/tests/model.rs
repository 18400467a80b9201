use jamloc_core::graph::{
    AugmentConfig, GraphBuilder, GraphConfig, GraphMode, MeasurementGraph, NormalizationTransform,
};
use jamloc_core::scenario::{generate_static, Placement, StaticGenConfig, Topology};
use jamloc_core::{Bounds, Point};
use jamloc_nn::loss::graph_loss;
use jamloc_nn::model::{Arch, ConfHead, ConfInput, ConfOut, Model, ModelConfig, Pooling, RegInput};
use jamloc_nn::tape::Tape;
use jamloc_nn::{Checkpoint, GraphInput, LossKind, SnEdges, TrainConfig};

fn small_graph(n: usize, supernode: bool) -> MeasurementGraph {
    let area = Bounds::square(100.0);
    let pos: Vec<Point> = (0..n)
        .map(|i| {
            let a = i as f64 * 2.4;
            Point::new(50.0 + 30.0 * a.cos() + i as f64, 50.0 + 25.0 * a.sin(), 0.0)
        })
        .collect();
    let noise: Vec<f64> = (0..n)
        .map(|i| -60.0 - 7.0 * i as f64 + (i % 2) as f64 * 3.0)
        .collect();
    let times: Vec<u64> = (0..n as u64).collect();
    let t = NormalizationTransform::for_static_area(&area).unwrap();
    let g = MeasurementGraph::build(
        pos,
        noise,
        &times,
        3,
        false,
        GraphMode::Static,
        t,
        Some(Point::new(40.0, 55.0, 0.0)),
    )
    .unwrap();
    if supernode {
        g.attach_supernode().unwrap()
    } else {
        g
    }
}

fn loss_value(model: &Model, g: &GraphInput, kind: LossKind) -> f64 {
    let mut t = Tape::new(&model.params);
    let f = model.forward(&mut t, g, None).unwrap();
    let l = graph_loss(
        &mut t,
        &f,
        g.target.unwrap(),
        kind,
        model.config.cage.lambda,
        1,
    );
    t.scalar(l)
}

/// Central differences against the tape for every parameter tensor.
/// Zero-initialized biases leave isolated nodes exactly on the ReLU kink, so
/// every parameter is nudged first.
fn check_gradients(mut model: Model, g: &GraphInput, kind: LossKind) {
    let ids: Vec<_> = model.params.ids().collect();
    for (k, &id) in ids.iter().enumerate() {
        for (j, v) in model.params.get_mut(id).iter_mut().enumerate() {
            *v += 0.05 * (((k * 31 + j * 17) % 13) as f64 / 6.0 - 1.0);
        }
    }
    let grads = {
        let mut t = Tape::new(&model.params);
        let f = model.forward(&mut t, g, None).unwrap();
        let l = graph_loss(
            &mut t,
            &f,
            g.target.unwrap(),
            kind,
            model.config.cage.lambda,
            1,
        );
        t.backward(l)
    };
    let h = 1e-6;
    let ids: Vec<_> = model.params.ids().collect();
    for id in ids {
        let shape = model.params.get(id).dim();
        let mut diff = 0.0f64;
        let mut norm = 0.0f64;
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let orig = model.params.get(id)[[r, c]];
                model.params.get_mut(id)[[r, c]] = orig + h;
                let up = loss_value(&model, g, kind);
                model.params.get_mut(id)[[r, c]] = orig - h;
                let down = loss_value(&model, g, kind);
                model.params.get_mut(id)[[r, c]] = orig;
                let num = (up - down) / (2.0 * h);
                let ana = grads.get(id)[[r, c]];
                diff += (num - ana).powi(2);
                norm += num.powi(2);
            }
        }
        let (diff, norm) = (diff.sqrt(), norm.sqrt());
        let rel = diff / norm.max(1e-8);
        assert!(
            rel < 1e-4 || diff < 1e-9,
            "{:?} tensor {}: relative error {rel:e} (|num| = {norm:e})",
            model.config.arch,
            model.params.name(id)
        );
    }
}

fn cage_config() -> ModelConfig {
    let mut c = ModelConfig::for_arch(Arch::Cage, 15).scaled(2, 8);
    c.heads = 2;
    c.cage.lambda = 0.3;
    c
}

#[test]
fn cage_gradients_match_finite_differences() {
    let g = small_graph(5, true);
    let m = Model::new(cage_config(), 7).unwrap();
    let input = m.prepare(&g).unwrap();
    check_gradients(m, &input, LossKind::Cage);
}

#[test]
fn cage_variant_gradients_match_finite_differences() {
    let g = small_graph(5, true);
    for (edges, head, cin, rin, out) in [
        (
            SnEdges::Undirected,
            ConfHead::Linear,
            ConfInput::Supernode,
            RegInput::PooledWithSn,
            ConfOut::Single,
        ),
        (
            SnEdges::None,
            ConfHead::Mlp3,
            ConfInput::PooledWithSn,
            RegInput::PooledWithoutSn,
            ConfOut::Multiple,
        ),
    ] {
        let mut c = cage_config();
        c.cage.sn_edges = edges;
        c.cage.conf_head = head;
        c.cage.conf_in = cin;
        c.cage.reg_in = rin;
        c.cage.conf_out = out;
        let m = Model::new(c, 3).unwrap();
        let input = m.prepare(&g).unwrap();
        check_gradients(m, &input, LossKind::Cage);
    }
}

#[test]
fn baseline_gradients_match_finite_differences() {
    let g = small_graph(6, false);
    for arch in [Arch::Mlp, Arch::Gcn, Arch::Gat, Arch::Pna] {
        for pooling in [Pooling::Mean, Pooling::Attention, Pooling::Max] {
            let mut c = ModelConfig::for_arch(arch, 15).scaled(2, 8);
            c.heads = 2;
            c.pooling = pooling;
            c.pna_delta = 1.3;
            let m = Model::new(c, 11).unwrap();
            let input = m.prepare(&g).unwrap();
            check_gradients(m, &input, LossKind::Gnn);
        }
    }
}

#[test]
fn attention_sums_to_one_per_destination() {
    let g = small_graph(9, true);
    let m = Model::new(cage_config(), 1).unwrap();
    let input = m.prepare(&g).unwrap();
    let mut t = Tape::new(&m.params);
    let f = m.forward(&mut t, &input, None).unwrap();
    for a in &f.attention {
        let a = t.value(*a);
        for head in 0..a.ncols() {
            let mut sums = vec![0.0; input.num_nodes];
            for (e, &d) in input.dst.iter().enumerate() {
                sums[d] += a[[e, head]];
            }
            for (v, s) in sums.iter().enumerate() {
                if input.dst.contains(&v) {
                    assert!((s - 1.0).abs() < 1e-12, "node {v} head {head}: {s}");
                }
            }
        }
    }
}

#[test]
fn predictions_are_permutation_invariant() {
    let g = small_graph(8, true);
    for arch in Arch::ALL {
        let mut c = ModelConfig::for_arch(arch, 15).scaled(2, 8);
        c.heads = 2;
        let m = Model::new(c, 5).unwrap();
        let input = m.prepare(&g).unwrap();
        let n = input.num_nodes;
        let perm: Vec<usize> = (0..n).map(|i| (i * 5 + 3) % n).collect();
        let mut seen = perm.clone();
        seen.sort();
        assert_eq!(seen, (0..n).collect::<Vec<_>>());
        let a = m.predict(&input).unwrap();
        let b = m.predict(&input.permuted(&perm)).unwrap();
        for k in 0..5 {
            assert!((a.output[k] - b.output[k]).abs() < 1e-10, "{arch:?}");
        }
    }
}

#[test]
fn blend_follows_confidence() {
    let g = small_graph(6, true);
    let m = Model::new(cage_config(), 2).unwrap();
    let input = m.prepare(&g).unwrap();
    for alpha in [0.0, 0.25, 1.0] {
        let mut t = Tape::new(&m.params);
        let f = m
            .forward_with_alpha(&mut t, &input, None, Some([alpha; 5]))
            .unwrap();
        let gnn = t.value(f.gnn).clone();
        let out = t.value(f.output);
        for k in 0..5 {
            let expect = alpha * gnn[[0, k]] + (1.0 - alpha) * input.wcl[k];
            assert_eq!(out[[0, k]], expect);
        }
    }
    let p = m.predict(&input).unwrap();
    assert!(p.alpha.unwrap().iter().all(|a| *a > 0.0 && *a < 1.0));
}

#[test]
fn baselines_reject_nothing_and_cage_requires_supernode() {
    let plain = small_graph(5, false);
    let m = Model::new(cage_config(), 0).unwrap();
    assert!(m.prepare(&plain).is_err());
    let gat = Model::new(ModelConfig::for_arch(Arch::Gat, 15).scaled(2, 8), 0).unwrap();
    let with_sn = small_graph(5, true);
    assert_eq!(gat.prepare(&with_sn).unwrap().num_nodes, 5);
}

fn tiny_dataset() -> Vec<jamloc_core::scenario::ScenarioInstance> {
    let cfg = StaticGenConfig::with_area(Bounds::square(600.0));
    let mut v = generate_static(Topology::Random, Placement::InsideRegion, 24, 9, &cfg).unwrap();
    v.extend(generate_static(Topology::Circle, Placement::OutsideRegion, 24, 10, &cfg).unwrap());
    v
}

fn quick_train(arch: Arch, seed: u64) -> (Model, jamloc_nn::TrainHistory) {
    let data = tiny_dataset();
    let builder = GraphBuilder::new(GraphConfig::default());
    let mut c = ModelConfig::for_arch(arch, 15).scaled(2, 16);
    c.heads = 2;
    let mut model = Model::new(c, seed).unwrap();
    let mut tc = TrainConfig::for_arch(arch);
    tc.epochs = 6;
    tc.lr = 3e-3;
    tc.seed = seed;
    tc.augment = AugmentConfig {
        drop_node: 0.2,
        ..AugmentConfig::none()
    };
    let h = jamloc_nn::train(&mut model, &builder, &data[..40], &data[40..], &tc).unwrap();
    (model, h)
}

#[test]
fn training_reduces_loss_and_is_reproducible() {
    let (_, a) = quick_train(Arch::Cage, 4);
    let (_, b) = quick_train(Arch::Cage, 4);
    let losses = |h: &jamloc_nn::TrainHistory| {
        h.epochs
            .iter()
            .map(|e| (e.train_loss, e.val_loss))
            .collect::<Vec<_>>()
    };
    assert_eq!(losses(&a), losses(&b));
    let first = a.epochs.first().unwrap().train_loss;
    let last = a.epochs.last().unwrap().train_loss;
    assert!(last < first, "{first} -> {last}");
    assert!(a.best_val_loss <= a.epochs[0].val_loss);
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let (model, _) = quick_train(Arch::Gat, 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    Checkpoint::new(&model, GraphConfig::default(), None)
        .save(&path)
        .unwrap();
    let back = Checkpoint::load(&path).unwrap().into_model().unwrap();
    let g = small_graph(7, true);
    let a = model.predict(&model.prepare(&g).unwrap()).unwrap();
    let b = back.predict(&back.prepare(&g).unwrap()).unwrap();
    assert_eq!(a, b);
}
