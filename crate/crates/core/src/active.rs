//! Suggestive annotation loop: train, score the unlabeled pool by Average
//! BvSB, query one case, reveal its ground truth, warm-start retrain.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boundary::{effort_report, EffortReport};
use crate::error::{Error, Result};
use crate::json::to_canonical_json;
use crate::metrics::{average_bvsb, dice_report, DiceReport};
use crate::rng::SplitMix64;
use crate::segmenter::{predict_labels, save_model, train_set, ModelParams, Segmenter, TrainConfig, TrainingSet};
use crate::tensor::{load_labels, load_volume, Case, DatasetManifest, LabelMap, Split, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Query the case with the lowest Average BvSB.
    Bvsb,
    /// Query a uniformly drawn case.
    Random,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Bvsb => "bvsb",
            Strategy::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub strategy: Strategy,
    #[serde(default)]
    pub seed: u64,
    /// Subset of the manifest's labeled split to start from; empty means the whole split.
    /// Labeled cases left out of this list join the unlabeled pool.
    #[serde(default)]
    pub initial_labeled_ids: Vec<String>,
    pub budget: usize,
    #[serde(default)]
    pub target_mean_dice: Option<f64>,
    #[serde(default)]
    pub train_cfg: TrainConfig,
    #[serde(default)]
    pub effort_tol: usize,
}

impl SimulationConfig {
    pub fn new(strategy: Strategy, seed: u64, budget: usize) -> Self {
        Self {
            strategy,
            seed,
            initial_labeled_ids: Vec::new(),
            budget,
            target_mean_dice: None,
            train_cfg: TrainConfig::default(),
            effort_tol: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.target_mean_dice {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("target_mean_dice must be in (0, 1], got {t}")));
            }
        }
        self.train_cfg.validate()
    }
}

/// A manifest case with its tensors in memory.
#[derive(Debug, Clone)]
pub struct LoadedCase {
    pub id: String,
    pub volume: Volume,
    pub labels: Option<LabelMap>,
}

impl LoadedCase {
    pub fn load(manifest: &DatasetManifest, case: &Case) -> Result<Self> {
        let wrap = |e| Error::Case {
            id: case.id.clone(),
            source: Box::new(e),
        };
        let volume = load_volume(manifest.volume_path(case)).map_err(wrap)?;
        let labels = match manifest.labels_path(case) {
            Some(p) => Some(load_labels(p).map_err(wrap)?),
            None => None,
        };
        if let Some(l) = &labels {
            if l.dims() != volume.dims() {
                return Err(wrap(Error::DimMismatch {
                    left: volume.dims().to_vec(),
                    right: l.dims().to_vec(),
                }));
            }
        }
        Ok(Self {
            id: case.id.clone(),
            volume,
            labels,
        })
    }

    fn ground_truth(&self) -> Result<&LabelMap> {
        self.labels.as_ref().ok_or_else(|| {
            Error::Manifest(format!(
                "case {:?} has no ground truth for the annotation oracle",
                self.id
            ))
        })
    }
}

/// Mean Average BvSB over the axial slices of a case.
pub fn score_case(seg: &impl Segmenter, volume: &Volume) -> Result<f64> {
    let slices = volume.axial_slices();
    let mut total = 0.0;
    for s in &slices {
        total += average_bvsb(&seg.predict_slice(s)?);
    }
    Ok(total / slices.len() as f64)
}

pub fn score_pool(seg: &impl Segmenter, pool: &[LoadedCase]) -> Result<BTreeMap<String, f64>> {
    if pool.is_empty() {
        return Err(Error::invariant("cannot score an empty pool"));
    }
    pool.iter()
        .map(|c| {
            score_case(seg, &c.volume)
                .map(|s| (c.id.clone(), s))
                .map_err(|e| Error::Case {
                    id: c.id.clone(),
                    source: Box::new(e),
                })
        })
        .collect()
}

/// Pick the next case to annotate. `bvsb` takes the lowest score, ties to the smallest id;
/// `random` draws uniformly over the ids in sorted order and ignores the scores.
pub fn select_candidate(scores: &BTreeMap<String, f64>, strategy: Strategy, rng: &mut SplitMix64) -> Result<String> {
    if scores.is_empty() {
        return Err(Error::invariant("cannot select from an empty pool"));
    }
    let id = match strategy {
        Strategy::Bvsb => {
            let mut best: Option<(&String, f64)> = None;
            for (id, &s) in scores {
                if best.is_none_or(|(_, b)| s < b) {
                    best = Some((id, s));
                }
            }
            best.expect("non-empty").0
        }
        Strategy::Random => {
            let k = rng.below(scores.len() as u64) as usize;
            scores.keys().nth(k).expect("index below len")
        }
    };
    Ok(id.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    TargetReached,
    PoolExhausted,
}

/// One query round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Labeled cases the scoring model was trained on.
    pub labeled_count: usize,
    pub test_dice: DiceReport,
    pub candidate_scores: BTreeMap<String, f64>,
    pub selected_id: String,
    /// The scoring model's prediction on the selected case against its ground truth.
    pub effort: EffortReport,
}

/// Test performance of the model trained after the last query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub labeled_count: usize,
    pub test_dice: DiceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationLog {
    pub config: SimulationConfig,
    pub records: Vec<IterationRecord>,
    pub final_evaluation: Evaluation,
    /// File name of the saved final model, relative to the log's directory.
    pub final_model_path: Option<String>,
    pub stop_reason: StopReason,
}

impl SimulationLog {
    pub fn to_json(&self) -> String {
        to_canonical_json(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Mean foreground test Dice after 0, 1, 2, ... queries.
    pub fn dice_curve(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.test_dice.mean_foreground)
            .chain(std::iter::once(self.final_evaluation.test_dice.mean_foreground))
            .collect()
    }

    /// Fewest queries after which the test Dice is at least `threshold`.
    pub fn queries_to_reach(&self, threshold: f64) -> Option<usize> {
        self.dice_curve().iter().position(|&d| d >= threshold)
    }

    /// Trapezoidal area under the Dice-vs-queries curve.
    pub fn dice_auc(&self) -> f64 {
        self.dice_curve().windows(2).map(|w| 0.5 * (w[0] + w[1])).sum()
    }

    /// Per-iteration rows: iteration, selected case, its score, labeled count, test Dice.
    pub fn iterations_csv(&self) -> String {
        let mut s = String::from("iteration,selected_id,selected_score,labeled_count,mean_foreground_dice\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.iteration,
                r.selected_id,
                r.candidate_scores[&r.selected_id],
                r.labeled_count,
                r.test_dice.mean_foreground
            ));
        }
        s
    }

    /// Saved-effort rows per iteration and tissue class.
    pub fn effort_csv(&self) -> String {
        let mut s = String::from("iteration,selected_id,class,gt_boundary_len,overlap_len,saved_effort_pct\n");
        for r in &self.records {
            for row in &r.effort.rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.iteration,
                    r.selected_id,
                    crate::boundary::class_name(row.class_id),
                    row.gt_boundary_len,
                    row.overlap_len,
                    row.saved_effort_pct
                ));
            }
        }
        s
    }
}

/// Mean per-case hard Dice of `seg` over the test cases.
pub fn evaluate(seg: &impl Segmenter, test: &[LoadedCase]) -> Result<DiceReport> {
    let reports = test
        .iter()
        .map(|c| {
            let pred = predict_labels(seg, &c.volume)?;
            dice_report(&pred, c.ground_truth()?)
        })
        .collect::<Result<Vec<_>>>()?;
    DiceReport::mean(&reports).ok_or_else(|| Error::invariant("empty test pool"))
}

struct Pools {
    labeled: Vec<LoadedCase>,
    unlabeled: Vec<LoadedCase>,
    test: Vec<LoadedCase>,
}

fn build_pools(manifest: &DatasetManifest, cfg: &SimulationConfig) -> Result<Pools> {
    let labeled_split: Vec<&Case> = manifest.split(Split::Labeled).collect();
    let initial: Vec<String> = if cfg.initial_labeled_ids.is_empty() {
        labeled_split.iter().map(|c| c.id.clone()).collect()
    } else {
        let mut seen = HashSet::new();
        for id in &cfg.initial_labeled_ids {
            if !labeled_split.iter().any(|c| &c.id == id) {
                return Err(Error::Config(format!(
                    "initial labeled id {id:?} is not in the labeled split"
                )));
            }
            if !seen.insert(id) {
                return Err(Error::Config(format!("initial labeled id {id:?} listed twice")));
            }
        }
        cfg.initial_labeled_ids.clone()
    };
    let mut pools = Pools {
        labeled: Vec::new(),
        unlabeled: Vec::new(),
        test: Vec::new(),
    };
    for id in &initial {
        pools
            .labeled
            .push(LoadedCase::load(manifest, manifest.case(id).expect("checked above"))?);
    }
    for c in manifest.cases() {
        match c.split {
            Split::Labeled if initial.contains(&c.id) => {}
            Split::Labeled | Split::Unlabeled => pools.unlabeled.push(LoadedCase::load(manifest, c)?),
            Split::Test => pools.test.push(LoadedCase::load(manifest, c)?),
        }
    }
    if pools.labeled.is_empty() {
        return Err(Error::Config("initial labeled set is empty".into()));
    }
    if pools.unlabeled.is_empty() {
        return Err(Error::Config("unlabeled pool is empty".into()));
    }
    if pools.test.is_empty() {
        return Err(Error::Config("test pool is empty".into()));
    }
    for c in &pools.unlabeled {
        c.ground_truth()?;
    }
    Ok(pools)
}

/// Run the loop until the target Dice is met, the pool is empty, or the budget is spent.
/// The target is checked after every training round, including the first.
pub fn run_simulation(
    manifest: &DatasetManifest,
    cfg: &SimulationConfig,
    model_out: Option<&Path>,
) -> Result<SimulationLog> {
    cfg.validate()?;
    let Pools {
        labeled,
        mut unlabeled,
        test,
    } = build_pools(manifest, cfg)?;
    let mut set = TrainingSet::new();
    for c in &labeled {
        set.push(&c.volume, c.ground_truth()?)?;
    }
    let mut labeled_count = labeled.len();
    let mut rng = SplitMix64::derive(cfg.seed, 0);
    let mut model = ModelParams::fresh(cfg.seed);
    let mut records = Vec::new();
    let (test_dice, stop_reason) = loop {
        model = train_set(&model, &set, &cfg.train_cfg)?.model;
        let test_dice = evaluate(&model, &test)?;
        if cfg.target_mean_dice.is_some_and(|t| test_dice.mean_foreground >= t) {
            break (test_dice, StopReason::TargetReached);
        }
        if unlabeled.is_empty() {
            break (test_dice, StopReason::PoolExhausted);
        }
        if records.len() >= cfg.budget {
            break (test_dice, StopReason::Budget);
        }
        let candidate_scores = score_pool(&model, &unlabeled)?;
        let selected_id = select_candidate(&candidate_scores, cfg.strategy, &mut rng)?;
        let pos = unlabeled
            .iter()
            .position(|c| c.id == selected_id)
            .expect("scored case is in the pool");
        let case = unlabeled.remove(pos);
        let gt = case.ground_truth()?;
        let effort = effort_report(gt, &predict_labels(&model, &case.volume)?, cfg.effort_tol)?;
        records.push(IterationRecord {
            iteration: records.len(),
            labeled_count,
            test_dice,
            candidate_scores,
            selected_id,
            effort,
        });
        set.push(&case.volume, gt)?;
        labeled_count += 1;
    };
    let final_model_path = match model_out {
        Some(p) => {
            save_model(&model, p)?;
            Some(
                p.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            )
        }
        None => None,
    };
    Ok(SimulationLog {
        config: cfg.clone(),
        records,
        final_evaluation: Evaluation {
            labeled_count,
            test_dice,
        },
        final_model_path,
        stop_reason,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub iteration: usize,
    pub bvsb_mean_dice: f64,
    pub random_mean_dice: f64,
}

/// Dice-vs-queries curves of two runs side by side.
/// A run that stopped early is padded with its last value.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub const CSV_HEADER: &'static str = "iteration,bvsb_mean_dice,random_mean_dice";

    pub fn from_logs(first: &SimulationLog, second: &SimulationLog) -> Self {
        let (a, b) = (first.dice_curve(), second.dice_curve());
        let n = a.len().max(b.len());
        let at = |c: &[f64], i: usize| c[i.min(c.len() - 1)];
        let rows = (0..n)
            .map(|i| ComparisonRow {
                iteration: i,
                bvsb_mean_dice: at(&a, i),
                random_mean_dice: at(&b, i),
            })
            .collect();
        Self { rows }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{}\n",
                r.iteration, r.bvsb_mean_dice, r.random_mean_dice
            ));
        }
        s
    }
}

pub fn check_comparable(first: &SimulationConfig, second: &SimulationConfig) -> Result<()> {
    let aligned = SimulationConfig {
        strategy: first.strategy,
        ..second.clone()
    };
    if &aligned != first {
        return Err(Error::Config(
            "compared configurations may differ only in strategy".into(),
        ));
    }
    Ok(())
}

/// Run two configurations that differ at most in strategy, first one in the `bvsb` column.
pub fn compare_strategies(
    manifest: &DatasetManifest,
    first: &SimulationConfig,
    second: &SimulationConfig,
) -> Result<(SimulationLog, SimulationLog, ComparisonTable)> {
    check_comparable(first, second)?;
    let a = run_simulation(manifest, first, None)?;
    let b = run_simulation(manifest, second, None)?;
    let table = ComparisonTable::from_logs(&a, &b);
    Ok((a, b, table))
}
