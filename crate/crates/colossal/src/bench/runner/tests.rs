use super::*;
use crate::bench::parse_config;

fn small_config(strategies: &str, budgets: &str, seeds: &str) -> ExperimentConfig {
    let text = format!(
        "\
strategies = {strategies}
budgets = {budgets}
roi_modes = global
random_seeds = {seeds}
pool.n = 10
pool.dims = 12
pool.seed = 5
pool.modes = 2
val.n = 4
val.dims = 12
val.seed = 99
val.modes = 2
surrogate.runs = 4
"
    );
    parse_config(&text).unwrap()
}

#[test]
fn random_only_report_has_all_seed_runs() {
    let config = small_config("random", "3", "0..14");
    let report = run_benchmark(&config).unwrap();
    let stats = &report.random[&3];
    assert_eq!(stats.per_seed.len(), 15);
    assert!(stats.min <= stats.mean && stats.mean <= stats.max);
    assert_eq!(report.cells.len(), 1);
    let cell = report.cells[0].outcome.as_ref().unwrap();
    assert_eq!(cell.selections.len(), 15);
    assert_eq!(cell.delta_dice, 0.0);
    assert_eq!(report.failed_cells(), 0);
}

#[test]
fn full_budget_makes_all_strategies_equal() {
    let config = small_config("all", "10", "0..2");
    let report = run_benchmark(&config).unwrap();
    let non_random: Vec<f64> = report
        .cells
        .iter()
        .filter(|c| c.key.strategy != Strategy::Random)
        .map(|c| c.outcome.as_ref().unwrap().mean_dice)
        .collect();
    // same training set -> identical model -> identical dice, exactly
    for d in &non_random {
        assert_eq!(*d, non_random[0]);
    }
    // the random row reports the mean over seeds of that same value, which
    // re-rounds in the last ulp
    let random_dice = report.random[&10].mean;
    assert!((random_dice - non_random[0]).abs() < 1e-12);
}

// Designed coverage: on a pool of duplicated mode groups with m = modes,
// every diversity strategy picks exactly one sample per mode, and training
// on that coverage cannot do worse than the unluckiest random draw.
#[test]
fn duplicated_modes_pool_is_covered_exactly() {
    let text = "\
strategies = alps, calr, typiclust
budgets = 5
roi_modes = global
random_seeds = 0..14
pool.n = 20
pool.dims = 14
pool.seed = 3
pool.modes = 5
pool.noise_std = 0.01
val.n = 5
val.dims = 14
val.seed = 31
val.modes = 5
val.noise_std = 0.01
surrogate.runs = 4
";
    let config = parse_config(text).unwrap();
    let report = run_benchmark(&config).unwrap();
    assert_eq!(report.failed_cells(), 0);

    let pool = crate::bench::generate_pool(&config.pool, "pool_").unwrap();
    let mode_of = |id: &str| -> usize {
        let idx = pool.samples.iter().position(|s| s.id == id).unwrap();
        pool.provenance[idx].mode
    };
    for cell in &report.cells {
        let success = cell.outcome.as_ref().unwrap();
        let mut modes: Vec<usize> = success.selections[0]
            .selected
            .iter()
            .map(|id| mode_of(id))
            .collect();
        modes.sort();
        assert_eq!(modes, vec![0, 1, 2, 3, 4], "{}", cell.key.dir_name());
        assert!(
            success.mean_dice >= report.random[&5].min,
            "{}: coverage dice {} below worst random {}",
            cell.key.dir_name(),
            success.mean_dice,
            report.random[&5].min
        );
    }
}

#[test]
fn local_mode_runs_and_keeps_global_evaluation() {
    let text = "\
strategies = typiclust, proxy-ent
budgets = 3
roi_modes = global, local
random_seeds = 0..4
pool.n = 8
pool.dims = 12
pool.seed = 7
val.n = 3
val.dims = 12
val.seed = 70
surrogate.runs = 4
";
    let config = parse_config(text).unwrap();
    let report = run_benchmark(&config).unwrap();
    assert_eq!(report.failed_cells(), 0);
    assert_eq!(report.cells.len(), 4);
    // metrics rows always cover the full validation pool
    for cell in &report.cells {
        let success = cell.outcome.as_ref().unwrap();
        assert_eq!(success.per_sample.len(), 3);
    }
}

#[test]
fn emitted_tree_is_byte_identical_across_runs() {
    let config = small_config("random, typiclust, proxy-var", "2, 3", "0..4");
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    emit_report(&run_benchmark(&config).unwrap(), dir_a.path()).unwrap();
    emit_report(&run_benchmark(&config).unwrap(), dir_b.path()).unwrap();

    let tree_a = read_tree(dir_a.path());
    let tree_b = read_tree(dir_b.path());
    assert_eq!(
        tree_a.keys().collect::<Vec<_>>(),
        tree_b.keys().collect::<Vec<_>>()
    );
    for (path, bytes) in &tree_a {
        assert_eq!(bytes, &tree_b[path], "file {path} differs");
    }

    // report matrix shape: strategies x (budgets x roi_modes), header + rows
    let report_csv = String::from_utf8(tree_a["report.csv"].clone()).unwrap();
    let lines: Vec<&str> = report_csv.lines().collect();
    assert_eq!(lines.len(), 1 + 3);
    assert_eq!(lines[0], "strategy,m2_global,m3_global");
    // the random row is a delta against itself
    let random_row: Vec<&str> = lines
        .iter()
        .find(|l| l.starts_with("random,"))
        .unwrap()
        .split(',')
        .collect();
    assert_eq!(random_row[1], "0.000000");
    assert_eq!(random_row[2], "0.000000");
}

fn read_tree(root: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let entry = entry.unwrap();
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_str().unwrap().to_string();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn budget_above_pool_is_a_config_error() {
    let text = "\
strategies = random
budgets = 99
roi_modes = global
random_seeds = 0
pool.n = 10
pool.dims = 12
pool.seed = 1
val.n = 4
val.dims = 12
val.seed = 2
";
    assert!(matches!(
        parse_config(text),
        Err(Error::Budget { m: 99, n: 10 })
    ));
}
