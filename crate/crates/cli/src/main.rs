//! `gaen`: generate synthetic data, run, tune and compare the feature
//! selection pipelines from the command line.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use gaen::data::{generate_synthetic, impute_missing, load_csv, write_csv, Dataset, SynthSpec};
use gaen::pipeline::{compare_methods_detailed, grid_tune, render_table, run_nested, Method, PipelineConfig, TuneMode};

#[derive(Parser)]
#[command(name = "gaen", version, about = "GA + Elastic Net feature selection benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (data.csv) and its ground truth (truth.json).
    Gen(GenArgs),
    /// Evaluate one method by nested cross-validation.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Grid-search the fitness weights and FSP for GA-EN.
    Tune {
        #[command(flatten)]
        common: CommonArgs,
        /// Score grid cells directly on the outer folds instead of by inner CV.
        #[arg(long)]
        outside: bool,
    },
    /// Evaluate GA-EN, EN and GA-Lr on shared folds and print the table.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    response: Option<String>,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    outer_k: Option<usize>,
    #[arg(long)]
    ga_iterations: Option<usize>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 30)]
    n: usize,
    #[arg(long, default_value_t = 120)]
    p: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    /// Correlation between neighbouring predictors.
    #[arg(long, default_value_t = 0.3)]
    corr: f64,
    /// Fraction of predictor cells blanked out.
    #[arg(long, default_value_t = 0.0)]
    missing: f64,
    /// Gaussian predictors instead of 0/1 markers.
    #[arg(long)]
    continuous: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    GaEn,
    En,
    GaLr,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::GaEn => Method::GaEn,
            MethodArg::En => Method::En,
            MethodArg::GaLr => Method::GaLr,
        }
    }
}

/// Fully resolved settings of a run, written to `config.json` in the output
/// directory. Passing that file back via `--config` repeats the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    data: Option<PathBuf>,
    response: String,
    out: PathBuf,
    jobs: Option<usize>,
    method: Method,
    #[serde(flatten)]
    pipeline: PipelineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            response: "y".into(),
            out: PathBuf::from("out"),
            jobs: None,
            method: Method::GaEn,
            pipeline: PipelineConfig::default(),
        }
    }
}

/// Missing input data; reported with exit code 2.
#[derive(Debug)]
struct MissingInput(PathBuf);

impl std::fmt::Display for MissingInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "data file not found: {}", self.0.display())
    }
}

impl std::error::Error for MissingInput {}

fn resolve(common: &CommonArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(d) = &common.data {
        cfg.data = Some(d.clone());
    }
    if let Some(r) = &common.response {
        cfg.response = r.clone();
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(s) = common.seed {
        cfg.pipeline.seed = s;
    }
    if let Some(j) = common.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(k) = common.outer_k {
        cfg.pipeline.outer_k = k;
    }
    if let Some(g) = common.ga_iterations {
        cfg.pipeline.n_ga_iterations = g;
    }
    cfg.pipeline.validate()?;
    Ok(cfg)
}

fn echo_config<T: Serialize>(cfg: &T, out: &Path) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(cfg)?;
    eprintln!("resolved config:\n{text}");
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.json"), text + "\n")?;
    Ok(())
}

fn load(cfg: &RunConfig) -> anyhow::Result<Dataset> {
    let Some(path) = &cfg.data else { bail!("no data file given (use --data or the config's \"data\" field)") };
    if !path.is_file() {
        return Err(MissingInput(path.clone()).into());
    }
    let d = load_csv(path, &cfg.response)?;
    if d.has_missing() {
        log::info!("imputing {} missing cells", d.missing_count());
        return Ok(impute_missing(&d)?);
    }
    Ok(d)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    Ok(builder.build()?.install(f))
}

fn cmd_gen(args: &GenArgs) -> anyhow::Result<()> {
    let spec = SynthSpec {
        n: args.n,
        p: args.p,
        k_true: args.k,
        beta_magnitude: args.beta,
        noise_sd: args.noise,
        adjacent_correlation: args.corr,
        missing_rate: args.missing,
        binary_predictors: !args.continuous,
        seed: args.seed,
    };
    spec.validate()?;
    echo_config(&spec, &args.out)?;
    let s = generate_synthetic(&spec)?;
    write_csv(&s.dataset, args.out.join("data.csv"))?;
    write_json(&args.out.join("truth.json"), &s.truth)?;
    println!("wrote {} ({} x {})", args.out.join("data.csv").display(), s.dataset.n(), s.dataset.p() + 1);
    Ok(())
}

fn cmd_run(common: &CommonArgs, method: Option<MethodArg>) -> anyhow::Result<()> {
    let mut cfg = resolve(common)?;
    if let Some(m) = method {
        cfg.method = m.into();
    }
    echo_config(&cfg, &cfg.out)?;
    let d = load(&cfg)?;
    let run = with_pool(cfg.jobs, || run_nested(&d, &cfg.pipeline, &[cfg.method]))??;
    let result = &run.results[0];
    write_json(&cfg.out.join("result.json"), result)?;

    let trace_path = cfg.out.join("trace.jsonl");
    if cfg.method.uses_ga() {
        let mut w = BufWriter::new(File::create(&trace_path)?);
        for (fold, layer1) in run.layer1.iter().enumerate() {
            let Some(layer1) = layer1 else { continue };
            for (iteration, trace) in layer1.traces.iter().enumerate() {
                for rec in trace {
                    let mut line = serde_json::to_value(rec)?;
                    line["fold"] = fold.into();
                    line["iteration"] = iteration.into();
                    writeln!(w, "{line}")?;
                }
            }
        }
    } else if trace_path.exists() {
        fs::remove_file(&trace_path)?;
    }

    let mut summary = format!(
        "method: {}\npredictors: {}\nobservations: {}\nouter folds: {}\nRMSE_CV: {:.6}\nrelative RMSE_CV: {:.6} ({}%)\nmean final predictors: {:.2}\n",
        result.method,
        result.n_original,
        d.n(),
        cfg.pipeline.outer_k,
        result.rmse_cv,
        result.relative_rmse_cv,
        gaen::pipeline::display_pct(result.relative_rmse_cv),
        result.mean_final_predictors,
    );
    for f in &result.per_fold {
        summary += &format!("fold {}: rmse {:.6}, {} predictors\n", f.fold, f.rmse, f.selected_count);
    }
    fs::write(cfg.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

#[derive(Serialize)]
struct GridRow {
    scenario: usize,
    w_r: f64,
    w_p: f64,
    fsp: f64,
    relative_rmse_cv: f64,
    mean_final_predictors: f64,
}

fn cmd_tune(common: &CommonArgs, outside: bool) -> anyhow::Result<()> {
    let mut cfg = resolve(common)?;
    if outside {
        cfg.pipeline.tune_mode = TuneMode::Outside;
    }
    echo_config(&cfg, &cfg.out)?;
    let d = load(&cfg)?;
    let result = with_pool(cfg.jobs, || grid_tune(&d, &cfg.pipeline))??;

    let mut w = csv::Writer::from_path(cfg.out.join("tune_grid.csv"))?;
    for c in &result.cells {
        w.serialize(GridRow {
            scenario: c.scenario,
            w_r: c.w_r,
            w_p: c.w_p,
            fsp: c.fsp,
            relative_rmse_cv: c.relative_rmse_cv,
            mean_final_predictors: c.mean_final_predictors,
        })?;
    }
    w.flush()?;
    write_json(&cfg.out.join("result.json"), &result)?;
    println!(
        "best: w_r = {}, w_p = {}, fsp = {}; relative RMSE_CV = {:.6} ({}%)",
        result.best_weights.w_r,
        result.best_weights.w_p,
        result.best_fsp,
        result.eval.relative_rmse_cv,
        gaen::pipeline::display_pct(result.eval.relative_rmse_cv)
    );
    Ok(())
}

fn cmd_compare(common: &CommonArgs) -> anyhow::Result<()> {
    let cfg = resolve(common)?;
    echo_config(&cfg, &cfg.out)?;
    let d = load(&cfg)?;
    let (report, _) = with_pool(cfg.jobs, || compare_methods_detailed(&d, &cfg.pipeline))??;
    write_json(&cfg.out.join("report.json"), &report)?;
    let table = render_table(&report);
    fs::write(cfg.out.join("report.md"), &table)?;
    print!("{table}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Run { common, method } => cmd_run(common, *method),
        Command::Tune { common, outside } => cmd_tune(common, *outside),
        Command::Compare { common } => cmd_compare(common),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<MissingInput>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
