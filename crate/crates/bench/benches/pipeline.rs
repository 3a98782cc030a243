use criterion::{criterion_group, criterion_main, Criterion};
use sevenseg::classifiers::{train_forest, train_model, ClassifierKind, TrainConfig};
use sevenseg::imaging::{
    binarize, normalize_polarity, otsu_threshold, segment_digits, SegmentParams,
};
use sevenseg::pipeline::{recognize_gray, RecognizeOptions};
use sevenseg::{Model, TrainParams};
use sevenseg_bench::{digit_dataset, noisy_spec, render_images};

fn imaging(c: &mut Criterion) {
    let images = render_images(&noisy_spec(64, 1));
    let img = &images[0].1;
    c.bench_function("otsu_threshold", |b| {
        b.iter(|| otsu_threshold(img).unwrap())
    });

    let t = otsu_threshold(img).unwrap();
    let binary = normalize_polarity(&binarize(img, t).unwrap());
    let params = SegmentParams::default();
    c.bench_function("segment_digits", |b| {
        b.iter(|| segment_digits(&binary, &params).unwrap())
    });
}

fn training(c: &mut Criterion) {
    let data = digit_dataset(&render_images(&noisy_spec(250, 2)));
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    for trees in [10, 100] {
        let params = TrainParams {
            n_trees: trees,
            ..TrainParams::default()
        };
        group.bench_function(format!("forest_{trees}_trees_{}_digits", data.len()), |b| {
            b.iter(|| train_forest(&data, &params).unwrap())
        });
    }
    let cfg = TrainConfig::default();
    for kind in [ClassifierKind::NaiveBayes, ClassifierKind::Svm] {
        group.bench_function(kind.as_str(), |b| {
            b.iter(|| train_model(kind, &data, &cfg).unwrap())
        });
    }
    group.finish();
}

fn recognition(c: &mut Criterion) {
    let data = digit_dataset(&render_images(&noisy_spec(250, 2)));
    let model = Model::Forest(train_forest(&data, &TrainParams::default()).unwrap());
    let images = render_images(&noisy_spec(32, 9));
    let opts = RecognizeOptions::default();
    c.bench_function("recognize_32_images_forest_100", |b| {
        b.iter(|| {
            images
                .iter()
                .filter(|(_, img)| recognize_gray(&model, img, &opts).is_ok())
                .count()
        })
    });
}

criterion_group!(benches, imaging, training, recognition);
criterion_main!(benches);
