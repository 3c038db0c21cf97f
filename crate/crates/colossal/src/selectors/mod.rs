//! The six cold-start selection strategies behind one contract: a pool goes
//! in, an ordered selection of `m` ids comes out.
//!
//! Uncertainty strategies rank samples by the mean entropy or variance of a
//! stochastic prediction stack; diversity strategies cluster feature vectors
//! into `m` groups and pick one representative per group. Every tie breaks
//! by ascending id and all randomness is seeded, so each strategy is a pure
//! function of its inputs.

mod pool;
mod result;

pub use pool::{SelectorParams, SelectorPool};
pub use result::{ScoreDetail, SelectionResult};

use std::collections::BTreeMap;

use crate::clustering::{birch_cluster, cosine_sim, kmeans, BirchParams};
use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::numeric::euclidean;
use crate::rng::SplitMix64;
use crate::uncertainty::{Measure, UncertaintyScore};
use crate::volume::RoiMode;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Random,
    ProxyEnt,
    ProxyVar,
    Alps,
    Calr,
    Typiclust,
}

pub const ALL_STRATEGIES: [Strategy; 6] = [
    Strategy::Random,
    Strategy::ProxyEnt,
    Strategy::ProxyVar,
    Strategy::Alps,
    Strategy::Calr,
    Strategy::Typiclust,
];

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::ProxyEnt => "proxy-ent",
            Strategy::ProxyVar => "proxy-var",
            Strategy::Alps => "alps",
            Strategy::Calr => "calr",
            Strategy::Typiclust => "typiclust",
        }
    }

    /// Strategies that consume a seed (shuffling or k-means restarts).
    pub fn is_seeded(self) -> bool {
        matches!(self, Strategy::Random | Strategy::Alps | Strategy::Typiclust)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ALL_STRATEGIES
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

/// Number of volumes one selection round may request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget(pub usize);

impl Budget {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        Ok(Budget(m))
    }

    fn check_pool(self, n: usize) -> Result<usize> {
        if self.0 > n {
            return Err(Error::Budget { m: self.0, n });
        }
        Ok(self.0)
    }
}

/// Shuffle the id list with a seeded Fisher-Yates pass and take the first m.
pub fn select_random(ids: &[String], budget: Budget, seed: u64) -> Result<SelectionResult> {
    crate::volume::check_unique_ids(ids.iter().map(|s| s.as_str()))?;
    let m = budget.check_pool(ids.len())?;
    let mut order: Vec<&String> = ids.iter().collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let selected = order.into_iter().take(m).cloned().collect();
    Ok(SelectionResult {
        strategy: Strategy::Random,
        budget: budget.0,
        seed: Some(seed),
        roi_mode: RoiMode::Global,
        selected,
        scores: BTreeMap::new(),
    })
}

/// Rank by descending uncertainty score (ties by ascending id) and keep the
/// top m. All scores must use the same measure and ROI mode.
pub fn select_proxy_rank(scores: &[UncertaintyScore], budget: Budget) -> Result<SelectionResult> {
    if scores.is_empty() {
        return Err(Error::Input("no uncertainty scores given".into()));
    }
    let m = budget.check_pool(scores.len())?;
    let measure = scores[0].measure;
    let roi_mode = scores[0].roi_mode;
    for s in scores {
        if s.measure != measure {
            return Err(Error::Input(format!(
                "mixed measures: {} and {}",
                measure.name(),
                s.measure.name()
            )));
        }
        if s.roi_mode != roi_mode {
            return Err(Error::Input("mixed roi modes in score list".into()));
        }
        if !s.score.is_finite() {
            return Err(Error::Input(format!(
                "score for {} is not finite",
                s.id
            )));
        }
    }
    crate::volume::check_unique_ids(scores.iter().map(|s| s.id.as_str()))?;

    let mut ranked: Vec<&UncertaintyScore> = scores.iter().collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
    let selected = ranked.iter().take(m).map(|s| s.id.clone()).collect();
    let diagnostics = scores
        .iter()
        .map(|s| {
            (
                s.id.clone(),
                ScoreDetail {
                    score: Some(s.score),
                    ..ScoreDetail::default()
                },
            )
        })
        .collect();
    Ok(SelectionResult {
        strategy: match measure {
            Measure::Entropy => Strategy::ProxyEnt,
            Measure::Variance => Strategy::ProxyVar,
        },
        budget: budget.0,
        seed: None,
        roi_mode,
        selected,
        scores: diagnostics,
    })
}

/// ALPS: k-means with k = m; from each cluster take the member closest to
/// the cluster center.
pub fn select_alps(
    table: &FeatureTable,
    budget: Budget,
    seed: u64,
    kmeans_restarts: usize,
) -> Result<SelectionResult> {
    let m = budget.check_pool(table.len())?;
    let clustering = kmeans(table, m, seed, kmeans_restarts)?;
    let mut selected = Vec::with_capacity(m);
    let mut diagnostics = BTreeMap::new();
    for (cluster, members) in clustering.members().iter().enumerate() {
        let mut best: Option<(f64, &str)> = None;
        for &row in members {
            let r = &table.rows()[row];
            let d = euclidean(&r.values, &clustering.centers[cluster]);
            diagnostics.insert(
                r.id.clone(),
                ScoreDetail {
                    cluster: Some(cluster),
                    center_distance: Some(d),
                    ..ScoreDetail::default()
                },
            );
            let better = match best {
                None => true,
                Some((bd, bid)) => d < bd || (d == bd && r.id.as_str() < bid),
            };
            if better {
                best = Some((d, &r.id));
            }
        }
        selected.push(best.expect("clusters are non-empty").1.to_string());
    }
    Ok(SelectionResult {
        strategy: Strategy::Alps,
        budget: budget.0,
        seed: Some(seed),
        roi_mode: RoiMode::Global,
        selected,
        scores: diagnostics,
    })
}

/// Mean cosine similarity of `row` to every member of its cluster, the row
/// itself included.
fn information_density(table: &FeatureTable, members: &[usize], row: usize) -> Result<f64> {
    let x = &table.rows()[row].values;
    let mut sum = 0.0;
    for &other in members {
        sum += cosine_sim(x, &table.rows()[other].values)?;
    }
    Ok(sum / members.len() as f64)
}

/// CALR: BIRCH with k = m; from each cluster take the member with the
/// highest information density.
pub fn select_calr(
    table: &FeatureTable,
    budget: Budget,
    birch: &BirchParams,
) -> Result<SelectionResult> {
    let m = budget.check_pool(table.len())?;
    let clustering = birch_cluster(table, m, birch)?;
    let mut selected = Vec::with_capacity(m);
    let mut diagnostics = BTreeMap::new();
    for (cluster, members) in clustering.members().iter().enumerate() {
        let mut best: Option<(f64, &str)> = None;
        for &row in members {
            let density = information_density(table, members, row)?;
            let r = &table.rows()[row];
            diagnostics.insert(
                r.id.clone(),
                ScoreDetail {
                    cluster: Some(cluster),
                    density: Some(density),
                    ..ScoreDetail::default()
                },
            );
            let better = match best {
                None => true,
                Some((bd, bid)) => density > bd || (density == bd && r.id.as_str() < bid),
            };
            if better {
                best = Some((density, &r.id));
            }
        }
        selected.push(best.expect("clusters are non-empty").1.to_string());
    }
    Ok(SelectionResult {
        strategy: Strategy::Calr,
        budget: budget.0,
        seed: None,
        roi_mode: RoiMode::Global,
        selected,
        scores: diagnostics,
    })
}

/// Inverse mean Euclidean distance of `row` to the other cluster members;
/// `None` for singletons (no neighbors to average over).
fn typicality(table: &FeatureTable, members: &[usize], row: usize) -> Option<f64> {
    if members.len() < 2 {
        return None;
    }
    let x = &table.rows()[row].values;
    let sum: f64 = members
        .iter()
        .filter(|&&other| other != row)
        .map(|&other| euclidean(x, &table.rows()[other].values))
        .sum();
    Some((members.len() - 1) as f64 / sum)
}

/// TypiClust: k-means with k = m; from each cluster take the most typical
/// member, where the neighbor set is everyone else in the same cluster.
/// Singleton clusters contribute their sole member.
pub fn select_typiclust(
    table: &FeatureTable,
    budget: Budget,
    seed: u64,
    kmeans_restarts: usize,
) -> Result<SelectionResult> {
    let m = budget.check_pool(table.len())?;
    let clustering = kmeans(table, m, seed, kmeans_restarts)?;
    let mut selected = Vec::with_capacity(m);
    let mut diagnostics = BTreeMap::new();
    for (cluster, members) in clustering.members().iter().enumerate() {
        let mut best: Option<(Option<f64>, &str)> = None;
        for &row in members {
            let typ = typicality(table, members, row);
            let r = &table.rows()[row];
            diagnostics.insert(
                r.id.clone(),
                ScoreDetail {
                    cluster: Some(cluster),
                    typicality: typ,
                    ..ScoreDetail::default()
                },
            );
            let better = match &best {
                None => true,
                Some((bt, bid)) => match (typ, bt) {
                    (Some(t), Some(b)) => t > *b || (t == *b && r.id.as_str() < *bid),
                    // singletons only ever compete with themselves
                    _ => false,
                },
            };
            if better {
                best = Some((typ, &r.id));
            }
        }
        selected.push(best.expect("clusters are non-empty").1.to_string());
    }
    Ok(SelectionResult {
        strategy: Strategy::Typiclust,
        budget: budget.0,
        seed: Some(seed),
        roi_mode: RoiMode::Global,
        selected,
        scores: diagnostics,
    })
}

/// Uniform dispatch: run `strategy` against a prepared pool. Diversity
/// strategies need features, proxy strategies need prediction stacks; the
/// features are standardized here if they were not already.
pub fn run_selector(
    strategy: Strategy,
    pool: &SelectorPool,
    budget: Budget,
    roi_mode: RoiMode,
    seed: u64,
    params: &SelectorParams,
) -> Result<SelectionResult> {
    pool.check_roi_mode(roi_mode)?;
    let mut result = match strategy {
        Strategy::Random => select_random(pool.ids(), budget, seed)?,
        Strategy::ProxyEnt => {
            select_proxy_rank(&pool.uncertainty_scores(Measure::Entropy, roi_mode)?, budget)?
        }
        Strategy::ProxyVar => {
            select_proxy_rank(&pool.uncertainty_scores(Measure::Variance, roi_mode)?, budget)?
        }
        Strategy::Alps => {
            select_alps(&pool.standardized_features()?, budget, seed, params.kmeans_restarts)?
        }
        Strategy::Calr => select_calr(
            &pool.standardized_features()?,
            budget,
            &BirchParams {
                threshold: params.birch_threshold,
                branching: params.birch_branching,
            },
        )?,
        Strategy::Typiclust => select_typiclust(
            &pool.standardized_features()?,
            budget,
            seed,
            params.kmeans_restarts,
        )?,
    };
    result.roi_mode = roi_mode;
    Ok(result)
}
