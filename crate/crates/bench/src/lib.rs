//! Criterion benchmarks for the hot kernels: temporal shift, snippet forward and
//! backward passes, ROC AUC and mask rasterization.

use criterion::{BenchmarkId, Criterion};
use ndarray::Array4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use maskemo_core::geometry::synthetic::{face_mesh, FaceParams};
use maskemo_core::geometry::{apply_mask, build_mask_polygon, LandmarkSet, MaskConfig};
use maskemo_core::metrics::{roc_auc_binary, roc_auc_unbalanced, EvalRecord};
use maskemo_core::model::{clip_gradient, temporal_shift, ClipInput, ShiftConfig};
use maskemo_core::{Architecture, Backbone, NUM_LABELS};

fn random4(rng: &mut ChaCha8Rng, dims: (usize, usize, usize, usize)) -> Array4<f64> {
    Array4::from_shape_fn(dims, |_| rng.random_range(-1.0..1.0))
}

pub fn shift(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random4(&mut rng, (3, 64, 28, 28));
    c.bench_function("temporal_shift 3x64x28x28", |b| b.iter(|| temporal_shift(&x, 0.25).unwrap()));
}

pub fn network(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let snippet = random4(&mut rng, (3, 3, 32, 32));
    let mut group = c.benchmark_group("tiny snippet");
    for shift in [None, Some(ShiftConfig::new(0.25))] {
        let model = Backbone::new(Architecture::tiny(), shift, 32, 3).unwrap();
        let label = if shift.is_some() { "shift" } else { "plain" };
        group.bench_with_input(BenchmarkId::new("forward", label), &snippet, |b, s| b.iter(|| model.snippet_forward(s).unwrap()));
        let clip = ClipInput { id: "c".into(), snippets: vec![snippet.clone(); 3], labels: [1, 0, 0, 1, 0, 0, 0, 0] };
        group.bench_with_input(BenchmarkId::new("clip_gradient_k3", label), &clip, |b, clip| b.iter(|| clip_gradient(&model, clip).unwrap()));
    }
    group.finish();
}

pub fn auc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 10_000;
    let scores: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.3))).collect();
    c.bench_function("roc_auc_binary 10k", |b| b.iter(|| roc_auc_binary(&scores, &labels).unwrap()));
    let records: Vec<EvalRecord> = (0..1000)
        .map(|i| EvalRecord {
            clip_id: i.to_string(),
            epoch: 0,
            probabilities: std::array::from_fn(|_| rng.random()),
            labels: std::array::from_fn(|l| u8::from((i + l) % 3 == 0)),
        })
        .collect();
    c.bench_function(&format!("roc_auc_unbalanced 1000x{NUM_LABELS}"), |b| b.iter(|| roc_auc_unbalanced(&records).unwrap()));
}

pub fn geometry(c: &mut Criterion) {
    let params = FaceParams { yaw_deg: 12.0, ..FaceParams::frontal(112.0, 112.0, 80.0) };
    let mut set = LandmarkSet::empty(0);
    set.face = Some(face_mesh(&params));
    let cfg = MaskConfig::default();
    let frame = image::RgbImage::from_pixel(224, 224, image::Rgb([90, 120, 150]));
    c.bench_function("mask polygon + fill 224", |b| {
        b.iter(|| {
            let poly = build_mask_polygon(&set, &cfg).unwrap();
            apply_mask(&frame, &poly)
        })
    });
}

pub fn benchmarks(c: &mut Criterion) {
    shift(c);
    network(c);
    auc(c);
    geometry(c);
}
