//! Benchmark construction, datasets and the evaluation studies.

pub mod benchmark;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod eval;
pub mod manifest;
pub mod plot;
pub mod split;

pub use benchmark::{build_benchmark, BenchmarkOptions, BuildReport, Failure, LevelSet};
pub use config::RunConfig;
pub use corpus::{write_corpus, CorpusSpec};
pub use dataset::{extract_dataset, Dataset, DatasetRow};
pub use eval::{run_ranking_eval, run_tuning_eval, RankingReport, TuningEvalConfig, TuningReport, Variant};
pub use manifest::{Manifest, ManifestRow};
pub use split::SplitSpec;
