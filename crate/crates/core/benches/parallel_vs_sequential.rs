use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tattoo_core::evalkit::{self, SampleRef, SplitMode};
use tattoo_core::imaging::Image;
use tattoo_core::model::{ModelConfig, TrainState};
use tattoo_core::par::Mode;
use tattoo_core::retrieval::{enroll, FeatureVector};
use tattoo_core::synthgen::{self, DatasetConfig};

const MODES: [(&str, Mode); 2] = [
    ("sequential", Mode::Sequential),
    ("parallel", Mode::Parallel),
];

fn unit(rng: &mut impl Rng, dim: usize) -> Vec<f32> {
    let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn features(n: usize, k: usize, categories: usize) -> Vec<FeatureVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..n)
        .map(|i| {
            let mut v = unit(&mut rng, k);
            v.extend(unit(&mut rng, k));
            FeatureVector::new(format!("s{i:05}"), i % categories, v)
        })
        .collect()
}

fn dataset_generation(c: &mut Criterion) {
    let templates = synthgen::procedural_templates(8, 1, 96).unwrap();
    let pools = vec![synthgen::procedural_skins(4, 2, 160, 160).unwrap()];
    let cfg = DatasetConfig {
        per_template_count: 8,
        output_side: 64,
        ..Default::default()
    };
    let mut group = c.benchmark_group("dataset_generation");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                let dir = tempfile::tempdir().unwrap();
                black_box(
                    synthgen::build_dataset_with(mode, &templates, &pools, &cfg, dir.path())
                        .unwrap(),
                )
            })
        });
    }
    group.finish();
}

fn feature_extraction(c: &mut Criterion) {
    let cfg = ModelConfig {
        embedding_dim: 128,
        num_classes: 10,
        input_side: 64,
        ..Default::default()
    };
    let state = TrainState::new(&cfg, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let images: Vec<Image> = (0..16)
        .map(|_| Image::from_fn(3, 64, 64, |_, _, _| rng.random_range(0.0..1.0)))
        .collect();
    let mut group = c.benchmark_group("feature_extraction");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| black_box(state.extract_features_with(mode, &images).unwrap()))
        });
    }
    group.finish();
}

fn gallery_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("gallery_search");
    for n in [1_000, 20_000] {
        let gallery = enroll(features(n, 512, 500)).unwrap();
        let probe = features(1, 512, 1).pop().unwrap();
        for (name, mode) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| black_box(gallery.search_with(mode, &probe, 20).unwrap()))
            });
        }
    }
    group.finish();
}

fn split_evaluation(c: &mut Criterion) {
    let feats = features(2_000, 128, 100);
    let refs: Vec<SampleRef> = feats
        .iter()
        .map(|f| SampleRef {
            sample_id: f.sample_id.clone(),
            label: f.category_label,
        })
        .collect();
    let splits = evalkit::make_splits(&refs, 5, SplitMode::Closed, 3).unwrap();
    let mut group = c.benchmark_group("closed_set_evaluation");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| black_box(evalkit::evaluate_closed(mode, &feats, &splits, 2, 20).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    dataset_generation,
    feature_extraction,
    gallery_search,
    split_evaluation
);
criterion_main!(benches);
