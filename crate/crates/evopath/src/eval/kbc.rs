//! Knowledge base completion: 9:1 fact splits, max-pooled confidence
//! ranking of candidate tails, Hits@k and MRR.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::buffer::ScoredMetaPath;
use crate::error::{EvoPathError, Result};
use crate::hin::{EntityId, Fact, FactSet, Hin, RelationId};
use crate::matcher::match_pairs_from_sources;
use crate::rng::{stream_rng, StreamDomain};

/// Train/test split over the facts of the evaluated relations.
#[derive(Debug, Clone)]
pub struct KbcSplit {
    pub train: Vec<Fact>,
    pub test: Vec<Fact>,
    pub ratio: (u32, u32),
    pub seed: u64,
}

/// Split each evaluated relation's facts at `ratio` (train:test). Facts of
/// other relations are untouched (all training).
pub fn kbc_split(hin: &Hin, relations: &[RelationId], ratio: (u32, u32), seed: u64) -> KbcSplit {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for &r in relations {
        let mut facts: Vec<Fact> = hin.relation_facts(r).to_vec();
        let mut rng = stream_rng(seed, StreamDomain::KbcSplit, r.0 as u64);
        facts.shuffle(&mut rng);
        let test_n = facts.len() * ratio.1 as usize / (ratio.0 + ratio.1) as usize;
        test.extend_from_slice(&facts[..test_n]);
        train.extend_from_slice(&facts[test_n..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    KbcSplit {
        train,
        test,
        ratio,
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    Average,
    Optimistic,
    Pessimistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSet {
    /// Entities sharing a declared type with any observed tail of the
    /// target relation in the training graph.
    TypedTails,
    AllEntities,
}

#[derive(Debug, Clone, Copy)]
pub struct KbcOptions {
    /// Filter known training tails of the query head before ranking.
    pub filtered: bool,
    pub tie: TieBreak,
    pub candidates: CandidateSet,
}

impl Default for KbcOptions {
    fn default() -> Self {
        KbcOptions {
            filtered: true,
            tie: TieBreak::Average,
            candidates: CandidateSet::TypedTails,
        }
    }
}

/// Candidate tails for a relation under the configured candidate policy.
pub fn candidate_tails(
    hin: &Hin,
    target: RelationId,
    excluded: &FactSet,
    policy: CandidateSet,
) -> Vec<EntityId> {
    match policy {
        CandidateSet::AllEntities => hin.entity_ids().filter(|&e| hin.entity_is_present(e)).collect(),
        CandidateSet::TypedTails => {
            let mut tail_types: HashSet<crate::hin::TypeId> = HashSet::new();
            for f in hin.facts() {
                if f.relation == target && !excluded.contains(f) {
                    tail_types.extend(hin.declared_types(f.tail).iter().copied());
                }
            }
            let mut out: Vec<EntityId> = hin
                .entity_ids()
                .filter(|&e| {
                    hin.entity_is_present(e)
                        && hin.declared_types(e).iter().any(|t| tail_types.contains(t))
                })
                .collect();
            out.sort_unstable();
            out
        }
    }
}

/// Max-pooled confidence score for every candidate tail reachable from the
/// query head through at least one rule. Unreachable candidates are absent
/// (infinite rank). Results are sorted by descending score, ties by id.
pub fn kbc_rank(
    hin: &Hin,
    rules: &[ScoredMetaPath],
    excluded: &FactSet,
    query_head: EntityId,
    candidates: &[EntityId],
) -> Result<Vec<(EntityId, f64)>> {
    if query_head.index() >= hin.entity_count() {
        return Err(EvoPathError::Eval(format!(
            "query head {query_head} is not interned"
        )));
    }
    let candidate_set: HashSet<EntityId> = candidates.iter().copied().collect();
    let mut scores: HashMap<EntityId, f64> = HashMap::new();
    for rule in rules {
        let reached = match_pairs_from_sources(
            hin,
            &rule.metapath,
            &[query_head],
            Some(excluded),
        )?;
        for &(_, tail) in reached.iter() {
            if !candidate_set.contains(&tail) {
                continue;
            }
            let entry = scores.entry(tail).or_insert(f64::NEG_INFINITY);
            if rule.score.confidence > *entry {
                *entry = rule.score.confidence;
            }
        }
    }
    let mut ranked: Vec<(EntityId, f64)> = scores.into_iter().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Rank of the true tail among scored candidates. Candidates in `filter_out`
/// (known true tails) are ignored. Unreachable true tails rank infinite.
pub fn rank_of_true_tail(
    scored: &[(EntityId, f64)],
    true_tail: EntityId,
    filter_out: &HashSet<EntityId>,
    tie: TieBreak,
) -> f64 {
    let Some(&(_, true_score)) = scored.iter().find(|(e, _)| *e == true_tail) else {
        return f64::INFINITY;
    };
    let mut above = 0usize;
    let mut tied = 0usize;
    for &(e, s) in scored {
        if e != true_tail && filter_out.contains(&e) {
            continue;
        }
        if s > true_score {
            above += 1;
        } else if s == true_score {
            tied += 1; // includes the true tail itself
        }
    }
    match tie {
        TieBreak::Average => above as f64 + (tied as f64 + 1.0) / 2.0,
        TieBreak::Optimistic => (above + 1) as f64,
        TieBreak::Pessimistic => (above + tied) as f64,
    }
}

/// Hits@k and MRR over a rank list (infinite ranks contribute zero).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct KbcMetrics {
    pub hits_at_1: f64,
    pub hits_at_3: f64,
    pub hits_at_10: f64,
    pub mrr: f64,
    pub queries: usize,
}

pub fn kbc_metrics(ranks: &[f64]) -> Result<KbcMetrics> {
    if ranks.is_empty() {
        return Err(EvoPathError::Eval("no ranks to aggregate".into()));
    }
    let n = ranks.len() as f64;
    let hits = |k: f64| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
    Ok(KbcMetrics {
        hits_at_1: hits(1.0),
        hits_at_3: hits(3.0),
        hits_at_10: hits(10.0),
        mrr: ranks
            .iter()
            .map(|&r| if r.is_finite() { 1.0 / r } else { 0.0 })
            .sum::<f64>()
            / n,
        queries: ranks.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_match_hand_computation() {
        let m = kbc_metrics(&[1.0, 4.0]).unwrap();
        assert_eq!(m.hits_at_1, 0.5);
        assert_eq!(m.hits_at_3, 0.5);
        assert_eq!(m.hits_at_10, 1.0);
        assert_eq!(m.mrr, 0.625);
    }

    #[test]
    fn all_rank_one_is_perfect() {
        let m = kbc_metrics(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.hits_at_1, 1.0);
        assert_eq!(m.mrr, 1.0);
    }

    #[test]
    fn all_infinite_is_zero() {
        let m = kbc_metrics(&[f64::INFINITY, f64::INFINITY]).unwrap();
        assert_eq!(m.hits_at_10, 0.0);
        assert_eq!(m.mrr, 0.0);
    }

    #[test]
    fn empty_ranks_error() {
        assert!(kbc_metrics(&[]).is_err());
    }

    #[test]
    fn average_tie_rank() {
        let scored = vec![
            (EntityId(0), 0.5),
            (EntityId(1), 0.5),
            (EntityId(2), 0.2),
        ];
        let none = HashSet::new();
        assert_eq!(
            rank_of_true_tail(&scored, EntityId(1), &none, TieBreak::Average),
            1.5
        );
        assert_eq!(
            rank_of_true_tail(&scored, EntityId(1), &none, TieBreak::Optimistic),
            1.0
        );
        assert_eq!(
            rank_of_true_tail(&scored, EntityId(1), &none, TieBreak::Pessimistic),
            2.0
        );
        assert_eq!(
            rank_of_true_tail(&scored, EntityId(2), &none, TieBreak::Average),
            3.0
        );
    }

    #[test]
    fn unreachable_true_tail_ranks_infinite() {
        let scored = vec![(EntityId(0), 0.5)];
        let none = HashSet::new();
        assert!(rank_of_true_tail(&scored, EntityId(9), &none, TieBreak::Average).is_infinite());
    }

    #[test]
    fn filtering_removes_known_tails_from_the_ranking() {
        let scored = vec![
            (EntityId(0), 0.9), // known true tail, filtered
            (EntityId(1), 0.5),
        ];
        let known: HashSet<EntityId> = [EntityId(0)].into_iter().collect();
        assert_eq!(
            rank_of_true_tail(&scored, EntityId(1), &known, TieBreak::Average),
            1.0
        );
    }

    #[test]
    fn low_scoring_unrelated_candidate_never_changes_the_rank() {
        let base = vec![(EntityId(0), 0.9), (EntityId(1), 0.5)];
        let none = HashSet::new();
        let before = rank_of_true_tail(&base, EntityId(0), &none, TieBreak::Average);
        let mut extended = base.clone();
        extended.push((EntityId(7), 0.1));
        let after = rank_of_true_tail(&extended, EntityId(0), &none, TieBreak::Average);
        assert_eq!(before, after);
    }
}
