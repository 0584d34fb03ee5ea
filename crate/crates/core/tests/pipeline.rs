//! End-to-end library use: benchmark, features, model, ranking and tuning on
//! a tiny corpus.

use dnqa::forest::{load_model, save_model, train, Candidate};
use dnqa::harness::corpus::corpus;
use dnqa::harness::{build_benchmark, extract_dataset, BenchmarkOptions, CorpusSpec, Dataset};
use dnqa::io::save_image;
use dnqa::tuner::{tune, TuneConfig};
use dnqa::{
    denoise, extract_features, psnr, rank_results, DenoiserId, ForestConfig, ImageF32, ImageF64, Method, NoiseKind,
    NoiseSpec, Target,
};

fn tiny_corpus(dir: &std::path::Path) -> Vec<String> {
    let spec = CorpusSpec {
        count: 3,
        size: 32,
        color_every: 3,
        seed: 4,
    };
    corpus(&spec)
        .into_iter()
        .map(|(id, img)| {
            save_image(&img, dir.join(format!("{id}.png"))).unwrap();
            id
        })
        .collect()
}

#[test]
fn benchmark_to_model_to_tuning() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean");
    std::fs::create_dir_all(&clean).unwrap();
    let ids = tiny_corpus(&clean);
    let rep = build_benchmark(&clean, &dir.path().join("bench"), &BenchmarkOptions::default()).unwrap();
    assert!(rep.failures.is_empty());
    assert_eq!(rep.manifest.rows.len(), ids.len() * 9 * 17);

    let ds = extract_dataset(&rep.manifest).unwrap();
    assert!(ds.failures.is_empty());
    let csv = dir.path().join("features.csv");
    ds.write_csv(&csv).unwrap();
    let back = Dataset::read_csv(&csv).unwrap();
    assert_eq!(back.rows.len(), ds.rows.len());
    assert_eq!(back.rows[7].features, ds.rows[7].features);

    let cfg = ForestConfig {
        n_trees: 30,
        seed: 2,
        ..Default::default()
    };
    let model = train(&ds.samples(Target::Psnr), Target::Psnr, &cfg).unwrap();
    let path = dir.path().join("model.json");
    save_model(&model, &path).unwrap();
    let model = load_model(&path).unwrap();

    // The model must separate a reasonable result from a destroyed one.
    let (_, img) = corpus(&CorpusSpec {
        count: 1,
        size: 32,
        color_every: 0,
        seed: 9,
    })
    .remove(0);
    let noisy = NoiseSpec::new(NoiseKind::Gaussian, 25.0, 1).unwrap().apply(&img).unwrap().quantized();
    let good = denoise(&noisy, &DenoiserId::grid(Method::Nlm, 2)).unwrap();
    let bad = denoise(&noisy, &DenoiserId::theta(Method::GaussianFilter, 5.0)).unwrap();
    let ranked = rank_results(
        &model,
        &[
            Candidate { id: "bad", noisy: &noisy, denoised: &bad },
            Candidate { id: "good", noisy: &noisy, denoised: &good },
        ],
    )
    .unwrap();
    assert!(psnr(&img, &good).unwrap() > psnr(&img, &bad).unwrap() + 3.0);
    assert_eq!(ranked[0].0, "good");

    let tcfg = TuneConfig::for_method(Method::Nlm, Target::Psnr).unwrap();
    let tuned = tune(&noisy, Method::Nlm, &model, &tcfg).unwrap();
    let (lo, hi) = tcfg.bounds;
    assert!(tuned.trace.theta >= lo && tuned.trace.theta <= hi);
    assert_eq!(tuned.trace.evaluations, 2 * tuned.trace.iterations() + 1);
}

#[test]
fn single_precision_tracks_double() {
    let (_, img): (_, ImageF64) = corpus(&CorpusSpec {
        count: 1,
        size: 32,
        color_every: 0,
        seed: 1,
    })
    .remove(0);
    let noisy = NoiseSpec::new(NoiseKind::Gaussian, 15.0, 3).unwrap().apply(&img).unwrap().quantized();
    let den = denoise(&noisy, &DenoiserId::grid(Method::GaussianFilter, 1)).unwrap().quantized();
    let f64v = extract_features(&noisy, &den).unwrap();
    let (n32, d32): (ImageF32, ImageF32) = (noisy.cast(), den.cast());
    let f32v = extract_features(&n32, &d32).unwrap();
    for (i, (a, b)) in f64v.0.iter().zip(&f32v.0).enumerate() {
        assert!((a - b).abs() <= 2e-2 * a.abs().max(1.0), "feature {i}: {a} vs {b}");
    }
}
