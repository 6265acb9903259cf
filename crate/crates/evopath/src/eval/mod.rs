//! Evaluation protocols: knowledge base completion, link prediction and
//! the inductive node-removal variant.

mod kbc;
mod lp;
mod metrics;

pub use kbc::{
    candidate_tails, kbc_metrics, kbc_rank, kbc_split, rank_of_true_tail, CandidateSet,
    KbcMetrics, KbcOptions, KbcSplit, TieBreak,
};
pub use lp::{
    build_lp_dataset, inductive_mask, lp_scores, InductiveMask, LpDataset, LpRatios, LpScoreMode,
};
pub use metrics::{average_precision, roc_auc};

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AtomKind, EvoPathError, Result};
use crate::evolution::{Evolution, RunConfig, RunOutcome};
use crate::hin::{unknown_atom, EntityId, Fact, FactSet, Hin};

/// Metric bundle plus run statistics, serialized as the report artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub relation: String,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits_at_1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits_at_3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits_at_10: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mrr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub removal_pct: Option<u32>,
    pub rounds: u32,
    pub mean_seconds_per_round: f64,
    pub mean_error_rate: f64,
    pub rules: usize,
    pub seed: u64,
}

impl EvalReport {
    fn from_outcome(task: &str, relation: &str, outcome: &RunOutcome, seed: u64) -> EvalReport {
        let generation: Vec<_> = outcome.rounds.iter().filter(|r| r.round > 0).collect();
        let rounds = generation.len() as u32;
        let mean_seconds = if generation.is_empty() {
            0.0
        } else {
            generation.iter().map(|r| r.seconds).sum::<f64>() / generation.len() as f64
        };
        let processed: usize = generation
            .iter()
            .map(|r| r.clean.accepted + r.clean.rejected.total())
            .sum();
        let rejected: usize = generation.iter().map(|r| r.clean.rejected.total()).sum();
        EvalReport {
            task: task.to_owned(),
            relation: relation.to_owned(),
            n: 0,
            hits_at_1: None,
            hits_at_3: None,
            hits_at_10: None,
            mrr: None,
            roc_auc: None,
            ap: None,
            removal_pct: None,
            rounds,
            mean_seconds_per_round: mean_seconds,
            mean_error_rate: if processed == 0 {
                0.0
            } else {
                rejected as f64 / processed as f64
            },
            rules: outcome.buffer.len(),
            seed,
        }
    }

    /// Aligned-column text rendering.
    pub fn table(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("task".into(), self.task.clone()),
            ("relation".into(), self.relation.clone()),
            ("n".into(), self.n.to_string()),
        ];
        let mut push = |name: &str, v: Option<f64>| {
            if let Some(v) = v {
                rows.push((name.into(), format!("{v:.4}")));
            }
        };
        push("hits@1", self.hits_at_1);
        push("hits@3", self.hits_at_3);
        push("hits@10", self.hits_at_10);
        push("mrr", self.mrr);
        push("roc_auc", self.roc_auc);
        push("ap", self.ap);
        if let Some(pct) = self.removal_pct {
            rows.push(("removal_pct".into(), pct.to_string()));
        }
        rows.push(("rules".into(), self.rules.to_string()));
        rows.push(("rounds".into(), self.rounds.to_string()));
        rows.push((
            "time_per_round_s".into(),
            format!("{:.3}", self.mean_seconds_per_round),
        ));
        rows.push((
            "error_rate".into(),
            format!("{:.4}", self.mean_error_rate),
        ));
        rows.push(("seed".into(), self.seed.to_string()));
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.into_iter()
            .map(|(k, v)| format!("{k:<width$}  {v}\n"))
            .collect()
    }
}

/// Discover rules and rank every held-out query's candidate tails; the
/// standard KBC protocol with filtered, average-tie ranking by default.
pub fn evaluate_kbc(
    hin: &Hin,
    cfg: &RunConfig,
    ratio: (u32, u32),
    opts: KbcOptions,
    run_dir: Option<&Path>,
) -> Result<(EvalReport, KbcSplit, RunOutcome)> {
    let target = hinrelation(hin, cfg)?;
    let split = kbc_split(hin, &[target], ratio, cfg.rng_seed);
    if split.test.is_empty() {
        return Err(EvoPathError::Eval(
            "the test split is empty; relation too small for the ratio".into(),
        ));
    }
    let excluded = FactSet::closed_from(hin, split.test.iter().copied());

    let mut evolution = Evolution::new(hin, cfg.clone())?.with_excluded_facts(excluded.clone());
    if let Some(dir) = run_dir {
        evolution = evolution.with_run_dir(dir)?;
    }
    let outcome = evolution.run()?;

    let candidates = candidate_tails(hin, target, &excluded, opts.candidates);
    let mut train_tails: HashMap<EntityId, HashSet<EntityId>> = HashMap::new();
    if opts.filtered {
        for f in &split.train {
            if f.relation == target {
                train_tails.entry(f.head).or_default().insert(f.tail);
            }
        }
    }
    let empty = HashSet::new();
    let mut ranks = Vec::with_capacity(split.test.len());
    for query in &split.test {
        let scored = kbc_rank(hin, outcome.buffer.entries(), &excluded, query.head, &candidates)?;
        let filter = train_tails.get(&query.head).unwrap_or(&empty);
        ranks.push(rank_of_true_tail(&scored, query.tail, filter, opts.tie));
    }
    let metrics = kbc_metrics(&ranks)?;

    let mut report = EvalReport::from_outcome("kbc", &cfg.target_relation, &outcome, cfg.rng_seed);
    report.n = metrics.queries;
    report.hits_at_1 = Some(metrics.hits_at_1);
    report.hits_at_3 = Some(metrics.hits_at_3);
    report.hits_at_10 = Some(metrics.hits_at_10);
    report.mrr = Some(metrics.mrr);
    Ok((report, split, outcome))
}

/// Link prediction: build the dataset, discover rules with test facts
/// masked, score test pairs and compute ROC-AUC and average precision.
pub fn evaluate_lp(
    hin: &Hin,
    cfg: &RunConfig,
    ratios: LpRatios,
    mode: LpScoreMode,
    run_dir: Option<&Path>,
) -> Result<(EvalReport, LpDataset, RunOutcome)> {
    let target = hinrelation(hin, cfg)?;
    let lp = build_lp_dataset(hin, target, cfg.walk.max_length, ratios, cfg.rng_seed)?;

    let mut evolution = Evolution::new(hin, cfg.clone())?.with_excluded_facts(lp.excluded.clone());
    if let Some(dir) = run_dir {
        evolution = evolution.with_run_dir(dir)?;
    }
    let outcome = evolution.run()?;

    let (report, _) = score_lp_outcome(hin, cfg, &lp, &outcome, mode, "lp")?;
    Ok((report, lp, outcome))
}

/// Inductive link prediction: nodes from selected test pairs are removed
/// from the graph *used for discovery and score estimation*; the held-out
/// pairs are then scored on the evaluation graph, where the removed
/// entities reappear unseen.
pub fn evaluate_inductive(
    hin: &Hin,
    cfg: &RunConfig,
    ratios: LpRatios,
    mode: LpScoreMode,
    removal_pct: u32,
    run_dir: Option<&Path>,
) -> Result<(EvalReport, LpDataset, InductiveMask)> {
    let target = hinrelation(hin, cfg)?;
    let lp = build_lp_dataset(hin, target, cfg.walk.max_length, ratios, cfg.rng_seed)?;
    let (masked, mask) = inductive_mask(hin, &lp, removal_pct, cfg.rng_seed)?;

    let mut evolution =
        Evolution::new(&masked, cfg.clone())?.with_excluded_facts(lp.excluded.clone());
    if let Some(dir) = run_dir {
        evolution = evolution.with_run_dir(dir)?;
    }
    let outcome = evolution.run()?;

    let (mut report, _) = score_lp_outcome(hin, cfg, &lp, &outcome, mode, "inductive")?;
    report.removal_pct = Some(removal_pct);
    Ok((report, lp, mask))
}

fn hinrelation(hin: &Hin, cfg: &RunConfig) -> Result<crate::hin::RelationId> {
    hin.relation_id(&cfg.target_relation)
        .ok_or_else(|| unknown_atom(AtomKind::Relation, &cfg.target_relation))
}

fn score_lp_outcome(
    hin: &Hin,
    cfg: &RunConfig,
    lp: &LpDataset,
    outcome: &RunOutcome,
    mode: LpScoreMode,
    task: &str,
) -> Result<(EvalReport, Vec<f64>)> {
    let mut pairs: Vec<(EntityId, EntityId)> = Vec::new();
    let mut labels: Vec<bool> = Vec::new();
    for &p in &lp.test_pos {
        pairs.push(p);
        labels.push(true);
    }
    for &p in &lp.test_neg {
        pairs.push(p);
        labels.push(false);
    }
    let scores = lp_scores(hin, outcome.buffer.entries(), &pairs, mode, Some(&lp.excluded))?;
    let auc = roc_auc(&labels, &scores)?;
    let ap = average_precision(&labels, &scores)?;

    let mut report = EvalReport::from_outcome(task, &cfg.target_relation, outcome, cfg.rng_seed);
    report.n = pairs.len();
    report.roc_auc = Some(auc);
    report.ap = Some(ap);
    Ok((report, scores))
}

/// Persist the held-out facts of a KBC split (the training side is the
/// complement within the graph).
pub fn save_kbc_split(hin: &Hin, split: &KbcSplit, path: &Path) -> Result<()> {
    let mut out = String::new();
    for f in &split.test {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            hin.entity_label(f.head),
            hin.relation_label(f.relation),
            hin.entity_label(f.tail)
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_kbc_test_facts(hin: &Hin, path: &Path) -> Result<Vec<Fact>> {
    let text = std::fs::read_to_string(path)?;
    let mut facts = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(EvoPathError::Parse {
                file: path.display().to_string(),
                line: idx + 1,
                message: "expected 3 tab-separated columns".into(),
            });
        }
        let head = hin
            .entity_id(cols[0])
            .ok_or_else(|| unknown_atom(AtomKind::Entity, cols[0]))?;
        let relation = hin
            .relation_id(cols[1])
            .ok_or_else(|| unknown_atom(AtomKind::Relation, cols[1]))?;
        let tail = hin
            .entity_id(cols[2])
            .ok_or_else(|| unknown_atom(AtomKind::Entity, cols[2]))?;
        facts.push(Fact::new(head, relation, tail));
    }
    Ok(facts)
}

/// Persist LP pairs as `head<TAB>tail<TAB>label<TAB>split` rows.
pub fn save_lp_dataset(hin: &Hin, lp: &LpDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    let mut write = |pairs: &[(EntityId, EntityId)], label: u8, split: &str| {
        for &(h, t) in pairs {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                hin.entity_label(h),
                hin.entity_label(t),
                label,
                split
            ));
        }
    };
    write(&lp.train_pos, 1, "train");
    write(&lp.train_neg, 0, "train");
    write(&lp.test_pos, 1, "test");
    write(&lp.test_neg, 0, "test");
    std::fs::write(path, out)?;
    Ok(())
}
