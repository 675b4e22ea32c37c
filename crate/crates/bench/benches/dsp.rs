use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use eegunify::cleaning::{bandpass_filter, fastica, quality_score, FastIcaOptions, FilterKind};
use eegunify::metrics::welch_psd;
use eegunify::unification::resample;
use eegunify_bench::synthetic;

fn bench_dsp(c: &mut Criterion) {
    let rec = synthetic(19, 60.0, 256.0);
    c.bench_function("welch 60 s", |b| {
        b.iter(|| welch_psd(black_box(&rec), 0).unwrap())
    });
    c.bench_function("bandpass 1-49 Hz 19 ch 60 s", |b| {
        b.iter(|| {
            bandpass_filter(
                black_box(&rec),
                FilterKind::Bandpass,
                Some(1.0),
                Some(49.0),
                4,
            )
            .unwrap()
        })
    });
    c.bench_function("resample 256 to 128 Hz", |b| {
        b.iter(|| resample(black_box(&rec), 128.0).unwrap())
    });
    c.bench_function("resample 256 to 100 Hz", |b| {
        b.iter(|| resample(black_box(&rec), 100.0).unwrap())
    });
    c.bench_function("quality score", |b| {
        b.iter(|| quality_score(black_box(&rec)).unwrap())
    });

    let small = synthetic(8, 20.0, 256.0);
    c.bench_function("fastica 8 ch 20 s", |b| {
        b.iter(|| fastica(black_box(&small), FastIcaOptions::default()).unwrap())
    });
}

criterion_group!(benches, bench_dsp);
criterion_main!(benches);
