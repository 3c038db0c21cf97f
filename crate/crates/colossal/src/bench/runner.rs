//! The three-scenario experiment matrix: run every configured strategy at
//! every budget and ROI mode on a synthetic pool, train the surrogate on
//! each selection, evaluate on a held-out validation pool, and report Dice
//! deltas against the random-selection baseline.
//!
//! Everything is deterministic: two runs of the same config produce
//! byte-identical artifact trees. Cell failures are recorded per cell and
//! do not abort the run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::bench::config::ExperimentConfig;
use crate::bench::surrogate::{surrogate_predict, surrogate_predict_stack, surrogate_train};
use crate::bench::synthetic::{generate_pool, SyntheticPool};
use crate::error::{Error, Result};
use crate::metrics::{seg_score, SegScore};
use crate::rng::derive;
use crate::selectors::{
    run_selector, select_random, Budget, SelectionResult, SelectorParams, SelectorPool, Strategy,
};
use crate::uncertainty::PredictionStack;
use crate::volume::{proxy_label_mr, RoiMode, VolumeGrid, VoxelKind};

/// Salt for per-sample Monte-Carlo perturbation streams.
const PROXY_STACK_SALT: u64 = 0x5354_4143;
/// k-means seed used by the seeded strategies inside the benchmark.
const BENCH_KMEANS_SEED: u64 = 0;

/// Cached random-cell payload per budget: per-seed selections, the
/// flattened metrics rows, and the mean hd95 over defined values.
type RandomCellData = (Vec<SelectionResult>, Vec<SampleMetrics>, Option<f64>);

/// One random seed's outcome: selection, metrics, mean dice, mean hd95.
type RandomRun = (SelectionResult, Vec<SampleMetrics>, f64, Option<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellKey {
    pub strategy: Strategy,
    pub budget: usize,
    pub roi_mode: RoiMode,
}

impl CellKey {
    pub fn dir_name(&self) -> String {
        format!("{}_m{}_{}", self.strategy, self.budget, self.roi_mode.name())
    }

    pub fn column_name(budget: usize, roi_mode: RoiMode) -> String {
        format!("m{}_{}", budget, roi_mode.name())
    }
}

/// One validation sample's metrics under one trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMetrics {
    /// Random-strategy seed that produced the training selection, if any.
    pub seed: Option<u64>,
    pub id: String,
    pub score: SegScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSuccess {
    /// One selection, or one per random seed.
    pub selections: Vec<SelectionResult>,
    pub per_sample: Vec<SampleMetrics>,
    pub mean_dice: f64,
    pub mean_hd95: Option<f64>,
    /// `mean_dice` minus the random-baseline mean at the same budget.
    pub delta_dice: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: CellKey,
    pub outcome: std::result::Result<CellSuccess, String>,
}

/// Random baseline at one budget: Dice per seed plus summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomStats {
    pub per_seed: Vec<(u64, f64)>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Pass/fail of the non-gating TypiClust-vs-random trend at one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendLine {
    pub budget: usize,
    pub roi_mode: RoiMode,
    pub typiclust_dice: f64,
    pub random_mean: f64,
    pub random_min: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub random: BTreeMap<usize, RandomStats>,
    pub trend: Vec<TrendLine>,
    pub log_lines: Vec<String>,
}

impl ExperimentReport {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_err()).count()
    }

    pub fn cell(&self, key: &CellKey) -> Option<&CellResult> {
        self.cells.iter().find(|c| &c.key == key)
    }
}

/// Preprocessed (id, image, gt) triples ready for training and evaluation.
struct EvalPool {
    ids: Vec<String>,
    images: Vec<VolumeGrid>,
    masks: Vec<VolumeGrid>,
}

impl EvalPool {
    fn from_synthetic(pool: &SyntheticPool) -> Result<Self> {
        let mut ids = Vec::new();
        let mut images = Vec::new();
        let mut masks = Vec::new();
        for s in &pool.samples {
            let mask = s
                .gt_mask
                .clone()
                .ok_or_else(|| Error::Input(format!("sample {} lacks a gt mask", s.id)))?;
            ids.push(s.id.clone());
            // synthetic images are already in [0, 1]
            images.push(s.image.clone());
            masks.push(mask);
        }
        Ok(EvalPool { ids, images, masks })
    }

    fn index_of(&self, id: &str) -> Result<usize> {
        self.ids
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| Error::Input(format!("selected id {id} not in pool")))
    }
}

/// Train on the selected pool samples and evaluate on the validation pool.
fn train_and_eval(
    selected: &[String],
    seed: Option<u64>,
    pool: &EvalPool,
    val: &EvalPool,
) -> Result<(Vec<SampleMetrics>, f64, Option<f64>)> {
    let mut labeled: Vec<(&str, &VolumeGrid, &VolumeGrid)> = Vec::with_capacity(selected.len());
    for id in selected {
        let i = pool.index_of(id)?;
        labeled.push((&pool.ids[i], &pool.images[i], &pool.masks[i]));
    }
    let model = surrogate_train(&labeled)?;

    let scores: Vec<SegScore> = val
        .images
        .par_iter()
        .zip(&val.masks)
        .map(|(image, gt)| {
            let pred = surrogate_predict(&model, image).with_kind(VoxelKind::BinaryMask)?;
            seg_score(&pred, gt)
        })
        .collect::<Result<_>>()?;

    let per_sample: Vec<SampleMetrics> = val
        .ids
        .iter()
        .zip(&scores)
        .map(|(id, score)| SampleMetrics {
            seed,
            id: id.clone(),
            score: *score,
        })
        .collect();
    let mean_dice = scores.iter().map(|s| s.dice).sum::<f64>() / scores.len() as f64;
    let defined: Vec<f64> = scores.iter().filter_map(|s| s.hd95).collect();
    let mean_hd95 = (!defined.is_empty())
        .then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok((per_sample, mean_dice, mean_hd95))
}

pub fn run_benchmark(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut log_lines = Vec::new();

    let pool_gen = generate_pool(&config.pool, "pool_")?;
    let val_gen = generate_pool(&config.val, "val_")?;
    let pool = EvalPool::from_synthetic(&pool_gen)?;
    let val = EvalPool::from_synthetic(&val_gen)?;

    // evaluation isolation audit: validation ids never appear in the pool
    if pool.ids.iter().any(|id| val.ids.contains(id)) {
        return Err(Error::Input("pool and validation ids overlap".into()));
    }
    log_lines.push(format!(
        "id audit: {} pool ids and {} validation ids are disjoint; selection, \
         feature standardization and training draw from the pool only",
        pool.ids.len(),
        val.ids.len()
    ));

    let selector_params = SelectorParams {
        descriptor_grid: config.features_grid,
        birch_threshold: config.birch_threshold,
        ..SelectorParams::default()
    };

    // One prepared selector pool per ROI mode, sharing one set of proxy
    // stacks when any uncertainty strategy is configured.
    let needs_proxy = config
        .strategies
        .iter()
        .any(|s| matches!(s, Strategy::ProxyEnt | Strategy::ProxyVar));
    let stacks: Option<Arc<Vec<PredictionStack>>> = if needs_proxy {
        let proxy_masks: Vec<VolumeGrid> = pool_gen
            .samples
            .iter()
            .map(|s| proxy_label_mr(&s.image))
            .collect::<Result<_>>()?;
        log_lines.push(
            "proxy task: Otsu pseudo-labels on the pool, surrogate fit on all pool samples"
                .into(),
        );
        let labeled: Vec<(&str, &VolumeGrid, &VolumeGrid)> = pool
            .ids
            .iter()
            .zip(&pool.images)
            .zip(&proxy_masks)
            .map(|((id, image), mask)| (id.as_str(), image, mask))
            .collect();
        let proxy_model = surrogate_train(&labeled)?;
        if !proxy_model.missing_classes().is_empty() {
            log_lines.push(format!(
                "warning: proxy model lacks prototypes for classes {:?}",
                proxy_model.missing_classes()
            ));
        }
        let stacks: Vec<PredictionStack> = pool
            .ids
            .par_iter()
            .zip(&pool.images)
            .enumerate()
            .map(|(i, (id, image))| {
                surrogate_predict_stack(
                    &proxy_model,
                    image,
                    id,
                    config.surrogate.runs,
                    config.surrogate.sigma,
                    derive(PROXY_STACK_SALT, i as u64),
                )
            })
            .collect::<Result<_>>()?;
        Some(Arc::new(stacks))
    } else {
        None
    };

    let mut selector_pools: BTreeMap<RoiMode, SelectorPool> = BTreeMap::new();
    for &mode in &config.roi_modes {
        let mut sp = SelectorPool::from_samples(&pool_gen.samples, mode, &selector_params)?;
        if let Some(stacks) = &stacks {
            sp = sp.with_stacks(stacks.clone())?;
        }
        selector_pools.insert(mode, sp);
    }

    // Random baseline per budget; ROI mode cannot affect it, so it is
    // computed once and reused across the roi columns.
    let mut random: BTreeMap<usize, RandomStats> = BTreeMap::new();
    let mut random_cells: BTreeMap<usize, RandomCellData> = BTreeMap::new();
    for &budget in &config.budgets {
        let runs: Vec<RandomRun> = config
            .random_seeds
            .par_iter()
            .map(|&seed| {
                let sel = select_random(&pool.ids, Budget(budget), seed)?;
                let (per_sample, dice, hd) =
                    train_and_eval(&sel.selected, Some(seed), &pool, &val)?;
                Ok((sel, per_sample, dice, hd))
            })
            .collect::<Result<_>>()?;
        let per_seed: Vec<(u64, f64)> = runs
            .iter()
            .zip(&config.random_seeds)
            .map(|((_, _, dice, _), &seed)| (seed, *dice))
            .collect();
        let mean = per_seed.iter().map(|(_, d)| d).sum::<f64>() / per_seed.len() as f64;
        let min = per_seed.iter().map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
        let max = per_seed
            .iter()
            .map(|(_, d)| *d)
            .fold(f64::NEG_INFINITY, f64::max);
        random.insert(
            budget,
            RandomStats {
                per_seed,
                mean,
                min,
                max,
            },
        );
        let selections: Vec<SelectionResult> = runs.iter().map(|(s, _, _, _)| s.clone()).collect();
        let metrics: Vec<SampleMetrics> = runs
            .iter()
            .flat_map(|(_, m, _, _)| m.iter().cloned())
            .collect();
        let hd_defined: Vec<f64> = runs.iter().filter_map(|(_, _, _, h)| *h).collect();
        let mean_hd = (!hd_defined.is_empty())
            .then(|| hd_defined.iter().sum::<f64>() / hd_defined.len() as f64);
        random_cells.insert(budget, (selections, metrics, mean_hd));
    }

    // The full matrix, rows in strategy order, columns budget-major then ROI.
    let mut cells = Vec::new();
    for &strategy in &config.strategies {
        for &budget in &config.budgets {
            for &roi_mode in &config.roi_modes {
                let key = CellKey {
                    strategy,
                    budget,
                    roi_mode,
                };
                let outcome = run_cell(
                    key,
                    &selector_pools,
                    &random,
                    &random_cells,
                    &pool,
                    &val,
                    &selector_params,
                )
                .map_err(|e| e.to_string());
                match &outcome {
                    Ok(c) => log_lines.push(format!(
                        "cell {}: ok (dice {:.6}, delta {:+.6})",
                        key.dir_name(),
                        c.mean_dice,
                        c.delta_dice
                    )),
                    Err(msg) => log_lines.push(format!("cell {}: FAILED: {msg}", key.dir_name())),
                }
                cells.push(CellResult { key, outcome });
            }
        }
    }

    // Non-gating trend diagnostic: TypiClust vs the random baseline.
    let mut trend = Vec::new();
    for cell in &cells {
        if cell.key.strategy != Strategy::Typiclust {
            continue;
        }
        if let Ok(success) = &cell.outcome {
            let stats = &random[&cell.key.budget];
            let pass = success.mean_dice >= stats.mean - 0.02 && success.mean_dice >= stats.min;
            trend.push(TrendLine {
                budget: cell.key.budget,
                roi_mode: cell.key.roi_mode,
                typiclust_dice: success.mean_dice,
                random_mean: stats.mean,
                random_min: stats.min,
                pass,
            });
        }
    }
    for t in &trend {
        log_lines.push(format!(
            "trend m{} {}: typiclust dice {:.6} vs random mean {:.6} / min {:.6} -> {}",
            t.budget,
            t.roi_mode.name(),
            t.typiclust_dice,
            t.random_mean,
            t.random_min,
            if t.pass { "pass" } else { "fail" }
        ));
    }

    Ok(ExperimentReport {
        config: config.clone(),
        cells,
        random,
        trend,
        log_lines,
    })
}

fn run_cell(
    key: CellKey,
    selector_pools: &BTreeMap<RoiMode, SelectorPool>,
    random: &BTreeMap<usize, RandomStats>,
    random_cells: &BTreeMap<usize, RandomCellData>,
    pool: &EvalPool,
    val: &EvalPool,
    params: &SelectorParams,
) -> Result<CellSuccess> {
    let baseline = random[&key.budget].mean;
    if key.strategy == Strategy::Random {
        let stats = &random[&key.budget];
        let (selections, per_sample, mean_hd95) = random_cells[&key.budget].clone();
        // the file records which mode this cell ran under
        let selections = selections
            .into_iter()
            .map(|mut s| {
                s.roi_mode = key.roi_mode;
                s
            })
            .collect();
        return Ok(CellSuccess {
            selections,
            per_sample,
            mean_dice: stats.mean,
            mean_hd95,
            delta_dice: stats.mean - baseline,
        });
    }

    let sp = selector_pools
        .get(&key.roi_mode)
        .ok_or_else(|| Error::Input(format!("no pool prepared for {}", key.roi_mode.name())))?;
    let selection = run_selector(
        key.strategy,
        sp,
        Budget(key.budget),
        key.roi_mode,
        BENCH_KMEANS_SEED,
        params,
    )?;
    let (per_sample, mean_dice, mean_hd95) =
        train_and_eval(&selection.selected, None, pool, val)?;
    Ok(CellSuccess {
        selections: vec![selection],
        per_sample,
        mean_dice,
        mean_hd95,
        delta_dice: mean_dice - baseline,
    })
}

fn fmt_hd(h: Option<f64>) -> String {
    match h {
        Some(v) => format!("{v:.6}"),
        None => String::new(),
    }
}

/// Write the report artifact tree:
///
/// ```text
/// out/
///   report.csv          strategy x (budget, roi) delta-Dice matrix
///   random_runs.csv     per-seed random Dice with mean/min/max rows
///   run.log             resolved config, tool version, cell statuses
///   cells/<cell>/       selection json(s), metrics.csv or error.txt
/// ```
pub fn emit_report(report: &ExperimentReport, out_dir: impl AsRef<Path>) -> Result<()> {
    let out = out_dir.as_ref();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let write = |path: &Path, content: &str| -> Result<()> {
        std::fs::write(path, content).map_err(|e| Error::io(path, e))
    };

    let config = &report.config;
    let mut matrix = String::from("strategy");
    for &budget in &config.budgets {
        for &roi in &config.roi_modes {
            let _ = write!(matrix, ",{}", CellKey::column_name(budget, roi));
        }
    }
    matrix.push('\n');
    for &strategy in &config.strategies {
        matrix.push_str(strategy.name());
        for &budget in &config.budgets {
            for &roi_mode in &config.roi_modes {
                let key = CellKey {
                    strategy,
                    budget,
                    roi_mode,
                };
                let cell = report.cell(&key).expect("every configured cell present");
                match &cell.outcome {
                    Ok(c) => {
                        let _ = write!(matrix, ",{:.6}", c.delta_dice);
                    }
                    Err(_) => matrix.push_str(",FAILED"),
                }
            }
        }
        matrix.push('\n');
    }
    write(&out.join("report.csv"), &matrix)?;

    let mut runs = String::from("budget,seed,dice\n");
    for (budget, stats) in &report.random {
        for (seed, dice) in &stats.per_seed {
            let _ = writeln!(runs, "{budget},{seed},{dice:.6}");
        }
        let _ = writeln!(runs, "{budget},mean,{:.6}", stats.mean);
        let _ = writeln!(runs, "{budget},min,{:.6}", stats.min);
        let _ = writeln!(runs, "{budget},max,{:.6}", stats.max);
    }
    write(&out.join("random_runs.csv"), &runs)?;

    let cells_dir = out.join("cells");
    for cell in &report.cells {
        let dir = cells_dir.join(cell.key.dir_name());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        match &cell.outcome {
            Err(msg) => write(&dir.join("error.txt"), &format!("{msg}\n"))?,
            Ok(success) => {
                if cell.key.strategy == Strategy::Random {
                    for sel in &success.selections {
                        let seed = sel.seed.expect("random selections carry their seed");
                        sel.write(dir.join(format!("selection_seed{seed}.json")))?;
                    }
                    let mut metrics = String::from("seed,id,dice,hd95\n");
                    for row in &success.per_sample {
                        let _ = writeln!(
                            metrics,
                            "{},{},{:.6},{}",
                            row.seed.expect("random metrics carry their seed"),
                            row.id,
                            row.score.dice,
                            fmt_hd(row.score.hd95)
                        );
                    }
                    write(&dir.join("metrics.csv"), &metrics)?;
                } else {
                    success.selections[0].write(dir.join("selection.json"))?;
                    let mut metrics = String::from("id,dice,hd95\n");
                    for row in &success.per_sample {
                        let _ = writeln!(
                            metrics,
                            "{},{:.6},{}",
                            row.id,
                            row.score.dice,
                            fmt_hd(row.score.hd95)
                        );
                    }
                    write(&dir.join("metrics.csv"), &metrics)?;
                }
            }
        }
    }

    let mut log = String::new();
    let _ = writeln!(log, "colossal benchmark v{}", env!("CARGO_PKG_VERSION"));
    log.push_str("\n[resolved config]\n");
    log.push_str(&config.render_resolved());
    log.push_str("\n[run]\n");
    for line in &report.log_lines {
        log.push_str(line);
        log.push('\n');
    }
    write(&out.join("run.log"), &log)?;
    Ok(())
}

#[cfg(test)]
mod tests;
