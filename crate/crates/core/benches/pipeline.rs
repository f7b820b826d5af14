use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use uwb_mapper::capture::Channel;
use uwb_mapper::clustering::{dbscan, ClusterParams};
use uwb_mapper::filtering::Material;
use uwb_mapper::geometry::DetectedPoint;
use uwb_mapper::pipeline::{run_pipeline, PipelineConfig};
use uwb_mapper::sim::{straight_approach_scene, synth_scene_stream};
use uwb_mapper::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_pipeline(c: &mut Criterion) {
    let mut scene = straight_approach_scene(Channel::Ch9, Material::Metal, 340.0, 100.0, 11);
    scene.noise_sigma = 0.002;
    let captures = synth_scene_stream(&scene, Execution::Sequential);

    let mut group = c.benchmark_group("run_pipeline");
    group.sample_size(20);
    for (name, exec) in MODES {
        let cfg = PipelineConfig {
            exec,
            ..PipelineConfig::default()
        };
        group.bench_with_input(BenchmarkId::new(name, captures.len()), &captures, |b, caps| {
            b.iter(|| black_box(run_pipeline(caps, &cfg)))
        });
    }
    group.finish();
}

fn cloud(n: usize) -> Vec<DetectedPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let centres: Vec<(f64, f64)> = (0..8).map(|_| (rng.random_range(0.0..800.0), rng.random_range(0.0..800.0))).collect();
    (0..n)
        .map(|i| {
            let (cx, cy) = centres[i % centres.len()];
            DetectedPoint {
                x: cx + rng.random_range(-40.0..40.0),
                y: cy + rng.random_range(-40.0..40.0),
                snr_score: 20.0,
                timestamp_ms: i as i64,
                receiver_id: "front".into(),
                aoa: 0.0,
                range_rx: 100.0,
            }
        })
        .collect()
}

fn bench_dbscan(c: &mut Criterion) {
    let params = ClusterParams::default();
    let mut group = c.benchmark_group("dbscan");
    for n in [1_000, 5_000, 20_000] {
        let pts = cloud(n);
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &pts, |b, pts| {
                b.iter(|| black_box(dbscan(pts, &params, exec)))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_pipeline, bench_dbscan);
criterion_main!(benches);
