//! Exact meta-path evaluation: path-instance pair sets, coverage and
//! confidence.
//!
//! Matching works by frontier expansion over deduplicated
//! `(source, current)` pairs: start from every entity matching the first
//! type slot, join along each relation and filter the arrival frontier by
//! the next type slot. Entity pairs connected by several instances count
//! once. A backward reachability pass prunes entities that cannot reach the
//! final type slot, which keeps the expansion sparse without changing the
//! result.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EvoPathError, Result};
use crate::hin::{EntityId, Fact, FactSet, Hin, RelationId};
use crate::metapath::MetaPath;

/// Directed head->tail entity pairs with set semantics.
#[derive(Debug, Clone, Default)]
pub struct PairSet {
    pairs: HashSet<(EntityId, EntityId)>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, head: EntityId, tail: EntityId) -> bool {
        self.pairs.contains(&(head, tail))
    }

    pub fn iter(&self) -> impl Iterator<Item = &(EntityId, EntityId)> {
        self.pairs.iter()
    }

    /// Pairs in ascending order, for deterministic output.
    pub fn sorted(&self) -> Vec<(EntityId, EntityId)> {
        let mut v: Vec<_> = self.pairs.iter().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn is_subset(&self, other: &PairSet) -> bool {
        self.pairs.is_subset(&other.pairs)
    }
}

impl FromIterator<(EntityId, EntityId)> for PairSet {
    fn from_iter<I: IntoIterator<Item = (EntityId, EntityId)>>(iter: I) -> Self {
        PairSet {
            pairs: iter.into_iter().collect(),
        }
    }
}

/// Coverage and confidence of a meta-path against a target relation,
/// together with the raw pair counts they are computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaPathScore {
    pub coverage: f64,
    pub confidence: f64,
    pub support_both: u64,
    pub support_rq: u64,
    pub support_m: u64,
}

impl MetaPathScore {
    /// Combined score used by rank-based prioritization.
    pub fn sum(&self) -> f64 {
        self.coverage + self.confidence
    }
}

/// Knobs for the frontier expansion.
#[derive(Debug, Clone, Copy, Default)]
pub struct MatchOptions {
    /// Abort with an error when a step frontier would exceed this many
    /// `(source, current)` pairs. Unbounded by default.
    pub step_cap: Option<usize>,
}

/// Entity pairs connected by at least one instance of `m`, ignoring the
/// facts in `excluded`. A zero-relation path returns `{(v, v)}` over the
/// entities matching its single type slot.
pub fn match_pairs(hin: &Hin, m: &MetaPath, excluded: Option<&FactSet>) -> Result<PairSet> {
    match_pairs_opts(hin, m, excluded, MatchOptions::default())
}

pub fn match_pairs_opts(
    hin: &Hin,
    m: &MetaPath,
    excluded: Option<&FactSet>,
    opts: MatchOptions,
) -> Result<PairSet> {
    check_bounds(hin, m)?;
    let sources = hin.entities_with_type(m.types()[0]);
    expand(hin, m, sources, excluded, opts)
}

/// Same as [`match_pairs`] but starting only from the given sources. Used
/// by ranking, where one query head is expanded at a time.
pub fn match_pairs_from_sources(
    hin: &Hin,
    m: &MetaPath,
    sources: &[EntityId],
    excluded: Option<&FactSet>,
) -> Result<PairSet> {
    check_bounds(hin, m)?;
    let start: Vec<EntityId> = sources
        .iter()
        .copied()
        .filter(|&v| hin.matches_type(v, m.types()[0]))
        .collect();
    expand(hin, m, &start, excluded, MatchOptions::default())
}

fn check_bounds(hin: &Hin, m: &MetaPath) -> Result<()> {
    for &t in m.types() {
        if t.index() >= hin.type_count() {
            return Err(EvoPathError::InvalidMetaPath(format!(
                "type id {t} out of range for this graph"
            )));
        }
    }
    for &r in m.relations() {
        if r.index() >= hin.relation_count() {
            return Err(EvoPathError::InvalidMetaPath(format!(
                "relation id {r} out of range for this graph"
            )));
        }
    }
    Ok(())
}

#[inline]
fn edge_excluded(excluded: Option<&FactSet>, head: EntityId, r: RelationId, tail: EntityId) -> bool {
    excluded.is_some_and(|set| set.contains(&Fact::new(head, r, tail)))
}

fn expand(
    hin: &Hin,
    m: &MetaPath,
    sources: &[EntityId],
    excluded: Option<&FactSet>,
    opts: MatchOptions,
) -> Result<PairSet> {
    let relations = m.relations();
    if relations.is_empty() {
        return Ok(sources.iter().map(|&v| (v, v)).collect());
    }

    // Backward pass: entities at slot i that can still reach slot k. The
    // last slot's set is implicit in the type check.
    let k = m.types().len();
    let mut allowed: Vec<Option<HashSet<EntityId>>> = vec![None; k];
    let mut current: HashSet<EntityId> = hin
        .entities_with_type(m.types()[k - 1])
        .iter()
        .copied()
        .collect();
    for i in (0..relations.len()).rev() {
        let r = relations[i];
        let t_here = m.types()[i];
        let mut prev = HashSet::new();
        for &w in &current {
            for &(_, head) in hin.predecessors(w, r) {
                if !edge_excluded(excluded, head, r, w) && hin.matches_type(head, t_here) {
                    prev.insert(head);
                }
            }
        }
        current = prev;
        if i > 0 {
            allowed[i] = Some(current.clone());
        }
    }
    let start_allowed = current;

    let mut frontier: HashSet<(EntityId, EntityId)> = sources
        .iter()
        .copied()
        .filter(|v| start_allowed.contains(v))
        .map(|v| (v, v))
        .collect();

    for (i, &r) in relations.iter().enumerate() {
        let t_next = m.types()[i + 1];
        let gate = allowed.get(i + 1).and_then(|a| a.as_ref());
        let mut next: HashSet<(EntityId, EntityId)> = HashSet::new();
        for &(src, cur) in &frontier {
            for &(_, tail) in hin.successors(cur, r) {
                if edge_excluded(excluded, cur, r, tail) {
                    continue;
                }
                if let Some(gate) = gate {
                    if !gate.contains(&tail) {
                        continue;
                    }
                } else if !hin.matches_type(tail, t_next) {
                    continue;
                }
                next.insert((src, tail));
                if let Some(cap) = opts.step_cap {
                    if next.len() > cap {
                        return Err(EvoPathError::FrontierCapExceeded { cap });
                    }
                }
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }

    Ok(PairSet { pairs: frontier })
}

/// Pairs connected by `relation` after exclusion.
pub fn relation_pairs(hin: &Hin, relation: RelationId, excluded: Option<&FactSet>) -> PairSet {
    hin.relation_facts(relation)
        .iter()
        .filter(|f| !excluded.is_some_and(|set| set.contains(f)))
        .map(|f| (f.head, f.tail))
        .collect()
}

/// Coverage (how many target pairs the path also connects) and confidence
/// (how many of the path's pairs carry the target relation).
pub fn score_metapath(
    hin: &Hin,
    m: &MetaPath,
    target: RelationId,
    excluded: Option<&FactSet>,
) -> Result<MetaPathScore> {
    score_metapath_opts(hin, m, target, excluded, MatchOptions::default())
}

pub fn score_metapath_opts(
    hin: &Hin,
    m: &MetaPath,
    target: RelationId,
    excluded: Option<&FactSet>,
    opts: MatchOptions,
) -> Result<MetaPathScore> {
    let rq_pairs = relation_pairs(hin, target, excluded);
    if rq_pairs.is_empty() {
        return Err(EvoPathError::NoRelationSupport {
            relation: hin.relation_label(target).to_owned(),
        });
    }
    let m_pairs = match_pairs_opts(hin, m, excluded, opts)?;
    let both = m_pairs
        .iter()
        .filter(|&&(h, t)| rq_pairs.contains(h, t))
        .count() as u64;
    let support_rq = rq_pairs.len() as u64;
    let support_m = m_pairs.len() as u64;
    Ok(MetaPathScore {
        coverage: both as f64 / support_rq as f64,
        confidence: if support_m == 0 {
            0.0
        } else {
            both as f64 / support_m as f64
        },
        support_both: both,
        support_rq,
        support_m,
    })
}

/// Score a batch of meta-paths. Items fail independently; order is
/// preserved and results are identical for any worker count.
pub fn batch_score(
    hin: &Hin,
    metapaths: &[MetaPath],
    target: RelationId,
    excluded: Option<&FactSet>,
) -> Vec<Result<MetaPathScore>> {
    batch_score_opts(hin, metapaths, target, excluded, MatchOptions::default())
}

pub fn batch_score_opts(
    hin: &Hin,
    metapaths: &[MetaPath],
    target: RelationId,
    excluded: Option<&FactSet>,
    opts: MatchOptions,
) -> Vec<Result<MetaPathScore>> {
    metapaths
        .par_iter()
        .map(|m| score_metapath_opts(hin, m, target, excluded, opts))
        .collect()
}
