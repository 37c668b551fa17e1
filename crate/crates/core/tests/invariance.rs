//! Symmetry, batching and reproducibility properties of the full pipeline.

use std::sync::Arc;

use meshgcn::datasets::synthetic::{self, random_rotation, rotate_point};
use meshgcn::geometry::{FeatureComponent, FeatureMask, FeatureOptions, MeshGeometry, NodeFeatures};
use meshgcn::graph::{batch_graphs, mesh_to_graph, normalized_operator, Aggregation, FaceGraph, GraphBatch};
use meshgcn::mesh::Mesh;
use meshgcn::models::{Model, ModelConfig};
use meshgcn::nn::{self, Activation, Tape};
use meshgcn::primitives;
use meshgcn::train::{train, PreparedItem, Target, TrainConfig};
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graph_of(mesh: &Mesh) -> FaceGraph {
    let opts = FeatureOptions::default();
    let geo = MeshGeometry::compute(mesh, &opts).unwrap();
    mesh_to_graph(&geo.edges, &geo.features(opts.mask))
}

/// Relabels nodes so new node `i` is old node `order[i]`.
fn permute_graph(g: &FaceGraph, order: &[usize]) -> FaceGraph {
    let mut new_of = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        new_of[old] = new;
    }
    let mut text = format!("meshgcn-adjacency 1\nnodes {}\nedges {}\n", g.node_count(), g.edges().len());
    for &(i, j) in g.edges() {
        text.push_str(&format!("{} {}\n", new_of[i], new_of[j]));
    }
    FaceGraph::read_adjacency(&text, g.features.select(Axis(0), order)).unwrap()
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

fn single_batch(g: &FaceGraph) -> GraphBatch {
    batch_graphs(&[g], Aggregation::SymmetricNormalized).unwrap()
}

fn toy(config: ModelConfig) -> Model {
    Model::new(ModelConfig { tau: 8, seed: 17, ..config }).unwrap()
}

#[test]
fn gcn_layer_is_permutation_equivariant_exactly() {
    let g = graph_of(&primitives::icosphere(2));
    let order = shuffled(g.node_count(), 1);
    let p = permute_graph(&g, &order);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = nn::glorot_uniform(57, 9, &mut rng);
    let b = Array2::from_shape_simple_fn((1, 9), || rng.random_range(-1.0..1.0));
    let out = |graph: &FaceGraph| {
        let op = Arc::new(normalized_operator(graph, Aggregation::SymmetricNormalized));
        let mut t = Tape::detached();
        let x = t.leaf(graph.features.clone());
        let (wv, bv) = (t.leaf(w.clone()), t.leaf(b.clone()));
        let y = nn::gcn_forward(&mut t, x, &op, wv, Some(bv), Some(Activation::Relu)).unwrap();
        t.value(y).clone()
    };
    assert_eq!(out(&p), out(&g).select(Axis(0), &order));
}

#[test]
fn segmenter_is_permutation_equivariant_exactly() {
    let g = graph_of(&primitives::torus(12, 8, 1.0, 0.3));
    let order = shuffled(g.node_count(), 3);
    let model = toy(ModelConfig::segmentation(4));
    let base = model.predict(&single_batch(&g)).unwrap();
    let perm = model.predict(&single_batch(&permute_graph(&g, &order))).unwrap();
    assert_eq!(perm, base.select(Axis(0), &order));
}

#[test]
fn classifier_is_permutation_invariant() {
    let g = graph_of(&primitives::icosphere(2));
    let model = toy(ModelConfig::classification(3));
    let base = model.predict(&single_batch(&g)).unwrap();
    for seed in 0..4 {
        let perm = model.predict(&single_batch(&permute_graph(&g, &shuffled(g.node_count(), seed)))).unwrap();
        for (a, b) in perm.iter().zip(base.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn mean_nodes_is_invariant_to_permuting_graphs_and_nodes() {
    let graphs =
        [graph_of(&primitives::icosahedron()), graph_of(&primitives::cube()), graph_of(&primitives::tetrahedron())];
    let readout = |gs: &[&FaceGraph]| {
        let batch = batch_graphs(gs, Aggregation::SymmetricNormalized).unwrap();
        let mut t = Tape::detached();
        let x = t.leaf(batch.features.clone());
        let m = nn::mean_nodes(&mut t, &batch, x).unwrap();
        t.value(m).clone()
    };
    let base = readout(&[&graphs[0], &graphs[1], &graphs[2]]);
    let permuted: Vec<FaceGraph> =
        graphs.iter().enumerate().map(|(k, g)| permute_graph(g, &shuffled(g.node_count(), 10 + k as u64))).collect();
    let swapped = readout(&[&permuted[2], &permuted[0], &permuted[1]]);
    let expected = base.select(Axis(0), &[2, 0, 1]);
    for (a, b) in swapped.iter().zip(expected.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn mesh_face_relabeling_permutes_feature_rows() {
    let mesh = primitives::torus(10, 6, 1.0, 0.35);
    let order = shuffled(mesh.face_count(), 4);
    let a = graph_of(&mesh);
    let b = graph_of(&mesh.permute_faces(&order).unwrap());
    let expected = a.features.select(Axis(0), &order);
    for (x, y) in b.features.iter().zip(expected.iter()) {
        // Per-vertex sums run over faces in index order, so only the last bits may move.
        assert!((x - y).abs() < 1e-12);
    }
    assert_eq!(b.edges(), permute_graph(&a, &order).edges());
}

#[test]
fn batch_then_unbatch_is_identity() {
    let graphs = [graph_of(&primitives::icosahedron()), graph_of(&primitives::cube())];
    let labels: Vec<Vec<usize>> = graphs.iter().map(|g| (0..g.node_count()).map(|i| i % 3).collect()).collect();
    let slices: Vec<&[usize]> = labels.iter().map(Vec::as_slice).collect();
    let batch = batch_graphs(&[&graphs[0], &graphs[1]], Aggregation::SymmetricNormalized)
        .unwrap()
        .with_node_labels(&slices)
        .unwrap();
    let parts = batch.unbatch(&batch.features).unwrap();
    assert_eq!(parts[0], graphs[0].features);
    assert_eq!(parts[1], graphs[1].features);
    assert_eq!(batch.unbatch_node_labels().unwrap(), slices);
}

#[test]
fn segmenter_output_does_not_depend_on_batch_neighbors() {
    let graphs = [graph_of(&primitives::icosahedron()), graph_of(&primitives::cube())];
    let model = toy(ModelConfig::segmentation(3));
    let together =
        model.predict(&batch_graphs(&[&graphs[0], &graphs[1]], Aggregation::SymmetricNormalized).unwrap()).unwrap();
    let alone0 = model.predict(&single_batch(&graphs[0])).unwrap();
    let alone1 = model.predict(&single_batch(&graphs[1])).unwrap();
    let n0 = graphs[0].node_count();
    assert_eq!(together.slice(ndarray::s![..n0, ..]), alone0);
    assert_eq!(together.slice(ndarray::s![n0.., ..]), alone1);
}

fn component(f: &NodeFeatures, c: FeatureComponent) -> Array2<f64> {
    f.data.slice(ndarray::s![.., f.columns(c).unwrap()]).to_owned()
}

/// Applies `r` to every consecutive xyz triple in the rows of `block`.
fn rotate_triples(block: &Array2<f64>, r: &[[f64; 3]; 3]) -> Array2<f64> {
    let mut out = block.clone();
    for mut row in out.rows_mut() {
        for k in 0..row.len() / 3 {
            let p = rotate_point(r, [row[3 * k], row[3 * k + 1], row[3 * k + 2]]);
            for d in 0..3 {
                row[3 * k + d] = p[d];
            }
        }
    }
    out
}

fn assert_close(a: &Array2<f64>, b: &Array2<f64>, tol: f64, what: &str) {
    assert_eq!(a.dim(), b.dim());
    for (x, y) in a.iter().zip(b.iter()) {
        assert!((x - y).abs() <= tol, "{what}: {x} vs {y}");
    }
}

fn check_rigid_motion(mesh: &Mesh, seed: u64, shift: [f64; 3]) {
    let opts = FeatureOptions::default();
    let r = random_rotation(&mut ChaCha8Rng::seed_from_u64(seed));
    let moved = mesh.map_vertices(|p| {
        let q = rotate_point(&r, p);
        [q[0] + shift[0], q[1] + shift[1], q[2] + shift[2]]
    });
    let a = MeshGeometry::compute(mesh, &opts).unwrap().features(FeatureMask::ALL);
    let b = MeshGeometry::compute(&moved, &opts).unwrap().features(FeatureMask::ALL);
    for c in [FeatureComponent::Positions, FeatureComponent::VertexNormals, FeatureComponent::FaceNormals] {
        assert_close(&component(&b, c), &rotate_triples(&component(&a, c), &r), 1e-9, c.tag());
    }
    for c in [FeatureComponent::Curvature, FeatureComponent::Angles] {
        assert_close(&component(&b, c), &component(&a, c), 1e-9, c.tag());
    }
    assert!(b.data.iter().all(|v| v.is_finite()));
}

#[test]
fn rigid_motion_on_fixed_meshes() {
    check_rigid_motion(&primitives::icosphere(3), 1, [0.5, -2.0, 3.0]);
    check_rigid_motion(&primitives::torus(16, 9, 1.0, 0.3), 2, [-10.0, 0.0, 7.5]);
    check_rigid_motion(&primitives::cylinder(12, 5, 0.5, 2.0), 3, [0.0, 0.0, 0.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rigid_motion_on_jittered_spheres(seed in any::<u64>(), shift in proptest::array::uniform3(-5.0f64..5.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = synthetic::noisy_sphere(0.02, &mut rng);
        check_rigid_motion(&mesh, seed ^ 0x5eed, shift);
    }

    #[test]
    fn segmenter_equivariant_under_random_relabeling(seed in any::<u64>()) {
        let g = graph_of(&primitives::icosphere(1));
        let order = shuffled(g.node_count(), seed);
        let model = toy(ModelConfig::segmentation(2));
        let base = model.predict(&single_batch(&g)).unwrap();
        let perm = model.predict(&single_batch(&permute_graph(&g, &order))).unwrap();
        prop_assert_eq!(perm, base.select(Axis(0), &order));
    }

    #[test]
    fn cross_entropy_is_nonnegative_and_shift_free(
        logits in proptest::collection::vec(-30.0f64..30.0, 12),
        label in 0usize..4,
        shift in -100.0f64..100.0,
    ) {
        let x = Array2::from_shape_vec((3, 4), logits).unwrap();
        let labels = [label, (label + 1) % 4, (label + 2) % 4];
        let value = |m: Array2<f64>| {
            let mut t = Tape::detached();
            let v = t.leaf(m);
            let l = nn::cross_entropy(&mut t, v, &labels).unwrap();
            t.value(l)[[0, 0]]
        };
        let a = value(x.clone());
        prop_assert!(a >= 0.0);
        prop_assert!((value(&x + shift) - a).abs() < 1e-12);
    }
}

fn prepared(meshes: &[(Mesh, Target)]) -> Vec<PreparedItem> {
    let opts = FeatureOptions::default();
    meshes
        .iter()
        .map(|(m, t)| {
            let geo = MeshGeometry::compute(m, &opts).unwrap();
            PreparedItem::new(m.name.clone(), &geo, opts.mask, Aggregation::SymmetricNormalized, t.clone())
        })
        .collect()
}

#[test]
fn repeated_training_is_bitwise_identical() {
    let items = prepared(
        &synthetic::classification_meshes(3, 0.01, 9)
            .into_iter()
            .map(|(class, m)| (m, Target::Class(usize::from(class == "box"))))
            .collect::<Vec<_>>(),
    );
    let refs: Vec<&PreparedItem> = items.iter().collect();
    let (tr, te) = refs.split_at(4);
    let cfg = TrainConfig {
        epochs: 4,
        batch_size: 3,
        seed: 5,
        ..TrainConfig::for_task(meshgcn::models::Task::Classification)
    };
    let run = || {
        let mut log = Vec::new();
        let out =
            train(toy(ModelConfig::classification(2)), tr, te, &cfg, |r| log.push(serde_json::to_string(r).unwrap()))
                .unwrap();
        (log, out)
    };
    let (log_a, a) = run();
    let (log_b, b) = run();
    assert_eq!(log_a, log_b);
    assert!(a.final_model.params().iter().zip(b.final_model.params().iter()).all(|(x, y)| x == y));
    assert!(a.best_model.params().iter().zip(b.best_model.params().iter()).all(|(x, y)| x == y));
    // Parameters actually moved, so the comparison is not vacuous.
    let init = toy(ModelConfig::classification(2));
    assert!(a.final_model.params().iter().zip(init.params().iter()).any(|(x, y)| x != y));
}

#[test]
fn training_does_not_depend_on_thread_count() {
    let items = prepared(
        &synthetic::segmentation_meshes(3, 0.01, 4).into_iter().map(|(m, l)| (m, Target::Faces(l))).collect::<Vec<_>>(),
    );
    let refs: Vec<&PreparedItem> = items.iter().collect();
    let cfg = TrainConfig { epochs: 2, batch_size: 3, ..TrainConfig::for_task(meshgcn::models::Task::Segmentation) };
    let run_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut log = Vec::new();
            train(toy(ModelConfig::segmentation(2)), &refs, &refs, &cfg, |r| {
                log.push(serde_json::to_string(r).unwrap())
            })
            .unwrap();
            log
        })
    };
    assert_eq!(run_with(1), run_with(3));
}
