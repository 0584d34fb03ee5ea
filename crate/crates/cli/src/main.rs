//! `dnqa`: benchmark generation, model training, ranking and tuning from the
//! command line.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 for data errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dnqa::harness::eval::{default_dtheta_ladder, default_step_ladder, run_ranking_eval, run_tuning_eval, TuningEvalConfig, Variant};
use dnqa::harness::plot::{bar_svg, line_svg, scatter_svg, Series};
use dnqa::harness::{build_benchmark, extract_dataset, write_corpus, BenchmarkOptions, CorpusSpec, Dataset, LevelSet, Manifest, RunConfig};
use dnqa::io::{load_image, save_image};
use dnqa::forest::{load_model, rank_results, save_model, train, Candidate};
use dnqa::tuner::{tune, TuneConfig};
use dnqa::{DenoiserId, Image, Method, QualityModel, Target, FEATURE_NAMES};

#[derive(Parser, Debug)]
#[command(name = "dnqa", version, about = "No-reference denoising quality assessment")]
struct Cli {
    /// Master seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Quality label the model predicts.
    #[arg(long, global = true, value_enum, default_value_t = TargetArg::Psnr)]
    target: TargetArg,
    /// Quality model file.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress to standard error.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TargetArg {
    Psnr,
    Ssim,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Psnr => Target::Psnr,
            TargetArg::Ssim => Target::Ssim,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Levels {
    Benchmark,
    Holdout,
    Both,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the procedural desk corpus of clean images.
    Corpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        /// Every n-th image is RGB (0: all grayscale).
        #[arg(long, default_value_t = 5)]
        color_every: usize,
    },
    /// Build the benchmark: noisy images, denoised results and labels.
    Gen {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Levels::Benchmark)]
        levels: Levels,
    },
    /// Compute feature vectors for every manifest row.
    Features {
        /// Benchmark directory or its manifest.csv.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a quality model from a feature CSV.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep only this method's results (a dedicated model).
        #[arg(long)]
        method: Option<String>,
    },
    /// Predict the quality of denoised results of one noisy image.
    Predict(PairArgs),
    /// Rank denoised results of one noisy image, best first.
    Rank(PairArgs),
    /// Tune a denoiser's strength on a noisy image.
    Tune {
        #[arg(long)]
        noisy: PathBuf,
        #[arg(long)]
        method: String,
        /// Where to write the tuned result.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the iterate trace (CSV).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Ranking study: repeated splits, per-family and leave-one-out models.
    EvalRank {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Where to write the per-variant summary (CSV).
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Only the all-features model.
        #[arg(long)]
        all_only: bool,
    },
    /// Tuning study against the brute-force optimum.
    EvalTune {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render SVG charts.
    #[command(subcommand)]
    Plot(PlotCommand),
}

#[derive(Args, Debug)]
struct PairArgs {
    #[arg(long)]
    noisy: PathBuf,
    /// Denoised results of the noisy image.
    #[arg(required = true)]
    results: Vec<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum PlotCommand {
    /// Feature value against the quality label, one series per noise kind.
    Scatter {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        feature: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean τ per model variant from an eval-rank summary CSV.
    Tau {
        #[arg(long)]
        summary: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predicted quality along a tuning trace.
    Trace {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Errors caused by how the tool was invoked rather than by the data.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

struct Ctx {
    seed: u64,
    target: Target,
    model: Option<PathBuf>,
    config: RunConfig,
}

impl Ctx {
    fn model(&self) -> anyhow::Result<QualityModel> {
        let path = self.model.as_ref().ok_or_else(|| usage("this command needs --model <path>"))?;
        Ok(load_model(path)?)
    }
}

fn method_arg(s: &str) -> anyhow::Result<Method> {
    s.parse().map_err(|e: dnqa::Error| usage(e.to_string()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn tune_config(ctx: &Ctx, method: Method, target: Target) -> anyhow::Result<TuneConfig> {
    let mut cfg = TuneConfig::for_method(method, target).map_err(|e| usage(e.to_string()))?;
    let t = &ctx.config.tune;
    if let Some(s) = t.step {
        cfg.step = s;
    }
    if let Some(d) = t.dtheta {
        cfg.dtheta = d;
    }
    if let Some(m) = t.max_iters {
        cfg.max_iters = m;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn score_pairs(ctx: &Ctx, args: &PairArgs) -> anyhow::Result<(Vec<(String, f64)>, Vec<String>)> {
    let model = ctx.model()?;
    let noisy: Image = load_image(&args.noisy)?;
    let results: Vec<Image> = args.results.iter().map(load_image).collect::<Result<_, _>>()?;
    let ids: Vec<String> = args.results.iter().map(|p| p.display().to_string()).collect();
    let pairs: Vec<Candidate<'_, f64>> = ids
        .iter()
        .zip(&results)
        .map(|(id, d)| Candidate {
            id,
            noisy: &noisy,
            denoised: d,
        })
        .collect();
    Ok((rank_results(&model, &pairs)?, ids))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.seed.or(config.seed).unwrap_or(0),
        target: cli.target.into(),
        model: cli.model.clone(),
        config,
    };
    match cli.command {
        Command::Corpus {
            out,
            count,
            size,
            color_every,
        } => {
            let spec = CorpusSpec {
                count,
                size,
                color_every,
                seed: ctx.seed,
            };
            let paths = write_corpus(&spec, &out).map_err(|e| usage(e.to_string()))?;
            println!("wrote {} images to {}", paths.len(), out.display());
        }
        Command::Gen { clean, out, levels } => {
            let opts = BenchmarkOptions {
                master_seed: ctx.seed,
                levels: match levels {
                    Levels::Benchmark => LevelSet::Benchmark,
                    Levels::Holdout => LevelSet::Holdout,
                    Levels::Both => LevelSet::Both,
                },
                denoisers: Vec::new(),
            };
            let rep = build_benchmark(&clean, &out, &opts)?;
            println!(
                "{} rows ({} images written, {} reused, {} failures)",
                rep.manifest.rows.len(),
                rep.written,
                rep.reused,
                rep.failures.len()
            );
            for f in &rep.failures {
                eprintln!("failed: {}: {}", f.target, f.reason);
            }
        }
        Command::Features { manifest, out } => {
            let m = Manifest::read(&manifest)?;
            let ds = extract_dataset(&m)?;
            ds.write_csv(&out)?;
            println!("{} samples ({} failures)", ds.rows.len(), ds.failures.len());
            for f in &ds.failures {
                eprintln!("failed: {}: {}", f.target, f.reason);
            }
        }
        Command::Train { features, out, method } => {
            let ds = Dataset::read_csv(&features)?;
            let filter = method.as_deref().map(method_arg).transpose()?;
            let samples: Vec<_> = ds
                .rows
                .iter()
                .filter(|r| filter.is_none_or(|m| r.denoiser.method == m))
                .map(|r| r.sample(ctx.target))
                .collect();
            if samples.is_empty() {
                bail!("no training samples in {}", features.display());
            }
            let cfg = ctx.config.forest_config(ctx.seed);
            let model = train(&samples, ctx.target, &cfg)?;
            save_model(&model, &out)?;
            match model.oob_rmse {
                Some(o) => println!("trained on {} samples, oob rmse {o:.4}", samples.len()),
                None => println!("trained on {} samples", samples.len()),
            }
        }
        Command::Predict(args) => {
            let (ranked, ids) = score_pairs(&ctx, &args)?;
            for id in ids {
                let q = ranked.iter().find(|(i, _)| *i == id).map(|(_, q)| *q).unwrap_or(f64::NAN);
                println!("{id}\t{q}");
            }
        }
        Command::Rank(args) => {
            let (ranked, _) = score_pairs(&ctx, &args)?;
            for (id, q) in ranked {
                println!("{id}\t{q}");
            }
        }
        Command::Tune {
            noisy,
            method,
            out,
            trace,
        } => {
            let method = method_arg(&method)?;
            if method.theta_bounds().is_none() {
                return Err(usage(format!("{method} has no tunable parameter")));
            }
            let model = ctx.model()?;
            let cfg = tune_config(&ctx, method, model.target)?;
            let img: Image = load_image(&noisy)?;
            let tuned = tune(&img, method, &model, &cfg)?;
            if let Some(p) = out {
                save_image(&tuned.denoised, &p)?;
            }
            if let Some(p) = trace {
                tuned.trace.save_csv(&p)?;
            }
            let t = &tuned.trace;
            println!("{}", DenoiserId::theta(method, t.theta));
            println!("theta = {}", t.theta);
            println!("predicted = {}", t.quality);
            println!("iterations = {}\nevaluations = {}\nconverged = {}", t.iterations(), t.evaluations, t.converged);
        }
        Command::EvalRank {
            features,
            report,
            summary,
            all_only,
        } => {
            let ds = Dataset::read_csv(&features)?;
            let split = ctx.config.split_spec(ctx.seed);
            let forest = ctx.config.forest_config(ctx.seed);
            let variants = if all_only { vec![Variant::All] } else { Variant::standard() };
            let rep = run_ranking_eval(&ds, &split, &forest, ctx.target, &variants)?;
            let text = rep.to_string();
            match report {
                Some(p) => write_text(&p, &text)?,
                None => print!("{text}"),
            }
            if let Some(p) = summary {
                write_text(&p, &rep.summary_csv())?;
            }
            if let Some(all) = rep.variant(Variant::All) {
                let (m, s) = all.tau();
                println!("tau[{}] = {m:.4} ± {s:.4}", ctx.target);
            }
        }
        Command::EvalTune {
            manifest,
            method,
            report,
        } => {
            let method = method_arg(&method)?;
            let m = Manifest::read(&manifest)?;
            let mut cfg = TuningEvalConfig::new(method, ctx.target, ctx.seed).map_err(|e| usage(e.to_string()))?;
            cfg.tune = tune_config(&ctx, method, ctx.target)?;
            cfg.forest = ctx.config.forest_config(ctx.seed);
            let t = &ctx.config.tune;
            cfg.grid_points = t.grid_points.unwrap_or(cfg.grid_points);
            cfg.train_thetas = t.train_thetas.unwrap_or(cfg.train_thetas);
            cfg.max_test = t.max_test.unwrap_or(cfg.max_test);
            cfg.calibration_images = t.calibration_images.unwrap_or(cfg.calibration_images);
            if t.calibrate.unwrap_or(t.step.is_none()) {
                cfg.step_ladder = default_step_ladder(cfg.tune.step);
                cfg.dtheta_ladder = if t.dtheta.is_some() { Vec::new() } else { default_dtheta_ladder(cfg.tune.dtheta) };
            } else {
                cfg.step_ladder.clear();
            }
            let (rep, _) = run_tuning_eval(&m, &cfg)?;
            let text = rep.to_string();
            match report {
                Some(p) => write_text(&p, &text)?,
                None => print!("{text}"),
            }
            let ((g, _), (i, _)) = (rep.gap(), rep.iterations());
            println!("step = {}, dtheta = {}, gap = {g:.4}, iterations = {i:.2}", rep.tune.step, rep.tune.dtheta);
        }
        Command::Plot(p) => plot(&ctx, p)?,
    }
    Ok(())
}

fn plot(ctx: &Ctx, cmd: PlotCommand) -> anyhow::Result<()> {
    match cmd {
        PlotCommand::Scatter { features, feature, out } => {
            let col = FEATURE_NAMES
                .iter()
                .position(|n| *n == feature)
                .ok_or_else(|| usage(format!("unknown feature {feature:?}; expected one of {}", FEATURE_NAMES.join(", "))))?;
            let ds = Dataset::read_csv(&features)?;
            let series: Vec<Series> = dnqa::NoiseKind::ALL
                .iter()
                .map(|k| {
                    let pts = ds
                        .rows
                        .iter()
                        .filter(|r| r.noise.kind == *k)
                        .map(|r| (r.features.0[col], r.label(ctx.target)))
                        .collect();
                    Series::new(k.name(), pts)
                })
                .filter(|s| !s.points.is_empty())
                .collect();
            let title = format!("{feature} vs {}", ctx.target);
            write_text(&out, &scatter_svg(&title, &feature, ctx.target.name(), &series))?;
        }
        PlotCommand::Tau { summary, out } => {
            let text = fs::read_to_string(&summary).with_context(|| format!("reading {}", summary.display()))?;
            let mut bars = Vec::new();
            for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() < 3 {
                    bail!("malformed summary line {line:?}");
                }
                bars.push((f[0].to_string(), f[1].parse()?, f[2].parse()?));
            }
            write_text(&out, &bar_svg("Kendall tau by feature set", "tau", &bars))?;
        }
        PlotCommand::Trace { trace, out } => {
            let mut rd = dnqa_csv_reader(&trace)?;
            let mut pts = Vec::new();
            for rec in rd.records() {
                let rec = rec?;
                pts.push((rec[1].parse::<f64>()?, rec[2].parse::<f64>()?));
            }
            let series = [Series::new("trace", pts)];
            write_text(&out, &line_svg("Tuning trajectory", "theta", "predicted quality", &series))?;
        }
    }
    Ok(())
}

fn dnqa_csv_reader(path: &Path) -> anyhow::Result<csv::Reader<fs::File>> {
    Ok(csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .parse_default_env()
        .init();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
