//! `colossal` — cold-start selection for 3D volume pools.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3 benchmark
//! finished with failed cells. Every run writes its resolved configuration
//! and the tool version next to its output (`<out>.log`, or `run.log`
//! inside the benchmark output directory).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use colossal::bench::{emit_report, parse_config, run_benchmark};
use colossal::error::{Error, Result};
use colossal::features::read_feature_table;
use colossal::metrics::seg_score;
use colossal::selectors::{run_selector, Budget, SelectorParams, SelectorPool, Strategy};
use colossal::uncertainty::read_prediction_stack;
use colossal::volume::{preprocess_ct, preprocess_mr, read_volume, write_volume, RoiMode};

#[derive(Parser)]
#[command(name = "colossal", version, about = "Cold-start active-learning selection for 3D volume pools")]
struct Cli {
    /// Cap the rayon worker count (or set COLOSSAL_THREADS); outputs do not
    /// depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModalityArg {
    Ct,
    Mr,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoiModeArg {
    Global,
    Local,
}

impl From<RoiModeArg> for RoiMode {
    fn from(arg: RoiModeArg) -> Self {
        match arg {
            RoiModeArg::Global => RoiMode::Global,
            RoiModeArg::Local => RoiMode::Local,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Apply the CT or MR intensity preprocessing pipeline to a volume.
    Preprocess {
        #[arg(long)]
        modality: ModalityArg,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one selection strategy over precomputed features or stacks.
    Select {
        /// random, proxy-ent, proxy-var, alps, calr or typiclust.
        #[arg(long)]
        strategy: String,
        #[arg(long)]
        budget: usize,
        /// Feature CSV (diversity and random strategies).
        #[arg(long, conflicts_with = "stacks")]
        features: Option<PathBuf>,
        /// Directory of prediction-stack directories (proxy and random).
        #[arg(long)]
        stacks: Option<PathBuf>,
        /// Recorded in the result; file inputs must already reflect it.
        #[arg(long, value_enum, default_value = "global")]
        roi_mode: RoiModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        birch_threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full experiment matrix from a config file.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dice and HD95 for a prediction/ground-truth mask pair (files or
    /// directories matched by file name).
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    let threads = cli.threads.or_else(|| {
        std::env::var("COLOSSAL_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    match run(cli.command) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(if e.is_usage() { 1 } else { 2 });
        }
    }
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Preprocess {
            modality,
            input,
            out,
        } => {
            let volume = read_volume(&input)?;
            let (name, processed) = match modality {
                ModalityArg::Ct => ("ct", preprocess_ct(&volume)?),
                ModalityArg::Mr => ("mr", preprocess_mr(&volume)?),
            };
            write_volume(&processed, &out)?;
            let mut log = String::new();
            let _ = writeln!(log, "command = preprocess");
            let _ = writeln!(log, "modality = {name}");
            let _ = writeln!(log, "in = {}", input.display());
            let _ = writeln!(log, "out = {}", out.display());
            write_invocation_log(&out, &log)?;
            Ok(0)
        }
        Command::Select {
            strategy,
            budget,
            features,
            stacks,
            roi_mode,
            seed,
            birch_threshold,
            out,
        } => {
            let strategy: Strategy = strategy.parse()?;
            let budget = Budget::new(budget)?;
            let roi_mode: RoiMode = roi_mode.into();
            let params = SelectorParams {
                birch_threshold,
                ..SelectorParams::default()
            };
            let (pool, source) = match (&features, &stacks) {
                (Some(path), None) => (
                    SelectorPool::from_features(read_feature_table(path)?, roi_mode),
                    format!("features = {}", path.display()),
                ),
                (None, Some(dir)) => (
                    SelectorPool::from_stacks(read_stacks_dir(dir)?, roi_mode)?,
                    format!("stacks = {}", dir.display()),
                ),
                _ => {
                    return Err(Error::Config(
                        "exactly one of --features or --stacks is required".into(),
                    ))
                }
            };
            let result = run_selector(strategy, &pool, budget, roi_mode, seed, &params)?;
            result.write(&out)?;
            let mut log = String::new();
            let _ = writeln!(log, "command = select");
            let _ = writeln!(log, "strategy = {strategy}");
            let _ = writeln!(log, "budget = {}", budget.0);
            let _ = writeln!(log, "{source}");
            let _ = writeln!(log, "roi_mode = {}", roi_mode.name());
            let _ = writeln!(log, "seed = {seed}");
            let _ = writeln!(log, "birch_threshold = {birch_threshold}");
            let _ = writeln!(log, "out = {}", out.display());
            write_invocation_log(&out, &log)?;
            Ok(0)
        }
        Command::Benchmark { config, out } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::io(&config, e))?;
            let config = parse_config(&text)?;
            let report = run_benchmark(&config)?;
            emit_report(&report, &out)?;
            if report.failed_cells() > 0 {
                eprintln!(
                    "benchmark finished with {} failed cell(s); see {}",
                    report.failed_cells(),
                    out.join("run.log").display()
                );
                Ok(3)
            } else {
                Ok(0)
            }
        }
        Command::Metrics { pred, gt, out } => {
            let pairs = collect_mask_pairs(&pred, &gt)?;
            let mut csv = String::from("id,dice,hd95\n");
            for (id, pred_path, gt_path) in &pairs {
                let p = read_volume(pred_path)?;
                let g = read_volume(gt_path)?;
                let score = seg_score(&p, &g)?;
                let hd = match score.hd95 {
                    Some(v) => format!("{v:.6}"),
                    None => String::new(),
                };
                let _ = writeln!(csv, "{id},{:.6},{hd}", score.dice);
            }
            std::fs::write(&out, csv).map_err(|e| Error::io(&out, e))?;
            let mut log = String::new();
            let _ = writeln!(log, "command = metrics");
            let _ = writeln!(log, "pred = {}", pred.display());
            let _ = writeln!(log, "gt = {}", gt.display());
            let _ = writeln!(log, "out = {}", out.display());
            let _ = writeln!(log, "pairs = {}", pairs.len());
            write_invocation_log(&out, &log)?;
            Ok(0)
        }
    }
}

/// Read every stack subdirectory of `dir`, sorted by name.
fn read_stacks_dir(dir: &Path) -> Result<Vec<colossal::uncertainty::PredictionStack>> {
    let mut subdirs = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.path().is_dir() {
            subdirs.push(entry.path());
        }
    }
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(Error::Input(format!(
            "no stack directories under {}",
            dir.display()
        )));
    }
    subdirs.iter().map(read_prediction_stack).collect()
}

/// A single file pair, or two directories matched by `*.vol` file name.
fn collect_mask_pairs(pred: &Path, gt: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let stem = |p: &Path| -> String {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| p.display().to_string())
    };
    if pred.is_dir() != gt.is_dir() {
        return Err(Error::Input(
            "--pred and --gt must both be files or both be directories".into(),
        ));
    }
    if !pred.is_dir() {
        return Ok(vec![(stem(pred), pred.to_path_buf(), gt.to_path_buf())]);
    }
    let list = |dir: &Path| -> Result<Vec<String>> {
        let mut names = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.ends_with(".vol") {
                names.push(name);
            }
        }
        names.sort();
        Ok(names)
    };
    let pred_names = list(pred)?;
    let gt_names = list(gt)?;
    if pred_names != gt_names {
        return Err(Error::Input(
            "prediction and ground-truth directories hold different .vol file sets".into(),
        ));
    }
    Ok(pred_names
        .into_iter()
        .map(|name| {
            let id = name.trim_end_matches(".vol").to_string();
            (id, pred.join(&name), gt.join(&name))
        })
        .collect())
}

fn write_invocation_log(out: &Path, body: &str) -> Result<()> {
    let mut content = format!("colossal v{}\n", env!("CARGO_PKG_VERSION"));
    content.push_str(body);
    let mut name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    name.push_str(".log");
    let path = out.with_file_name(name);
    std::fs::write(&path, content).map_err(|e| Error::io(&path, e))
}
