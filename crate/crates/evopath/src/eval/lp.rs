//! Link prediction protocol: eligible-pair selection, 8:2 splits,
//! same-type negative sampling at 2:1, pair scoring and inductive masking.

use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::ScoredMetaPath;
use crate::error::{EvoPathError, Result};
use crate::hin::{EntityId, Fact, FactSet, Hin, RelationId};
use crate::matcher::match_pairs_from_sources;
use crate::rng::{stream_rng, StreamDomain};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LpRatios {
    /// Train : test proportions for positive pairs.
    pub train: u32,
    pub test: u32,
    /// Positives per negative (2 means half as many negatives).
    pub pos_per_neg: u32,
}

impl Default for LpRatios {
    fn default() -> Self {
        LpRatios {
            train: 8,
            test: 2,
            pos_per_neg: 2,
        }
    }
}

/// The per-relation link prediction dataset. Negatives replace the tail
/// with a type-compatible entity and never coincide with a true fact.
#[derive(Debug, Clone)]
pub struct LpDataset {
    pub relation: RelationId,
    pub train_pos: Vec<(EntityId, EntityId)>,
    pub test_pos: Vec<(EntityId, EntityId)>,
    pub train_neg: Vec<(EntityId, EntityId)>,
    pub test_neg: Vec<(EntityId, EntityId)>,
    /// Test positives' facts (closed under inversion), masked from every
    /// scoring call.
    pub excluded: FactSet,
}

/// Whether head reaches tail within `max_steps` relation steps, ignoring
/// the direct edges between the pair itself.
fn connected_avoiding_direct(
    hin: &Hin,
    head: EntityId,
    tail: EntityId,
    target: RelationId,
    max_steps: usize,
) -> bool {
    if max_steps == 0 {
        return false;
    }
    let mut masked = FactSet::new();
    masked.insert_closed(hin, Fact::new(head, target, tail));
    let mut visited: HashSet<EntityId> = HashSet::new();
    let mut queue: VecDeque<(EntityId, usize)> = VecDeque::new();
    visited.insert(head);
    queue.push_back((head, 0));
    while let Some((node, depth)) = queue.pop_front() {
        if depth == max_steps {
            continue;
        }
        for &(r, next) in hin.out_edges(node) {
            if masked.contains(&Fact::new(node, r, next)) {
                continue;
            }
            if next == tail {
                return true;
            }
            if visited.insert(next) {
                queue.push_back((next, depth + 1));
            }
        }
    }
    false
}

/// Build the dataset for one relation. Positive pairs must be connected by
/// a non-direct path of at most `max_length - 1` steps; the rest follow the
/// ratios.
pub fn build_lp_dataset(
    hin: &Hin,
    target: RelationId,
    max_length: usize,
    ratios: LpRatios,
    seed: u64,
) -> Result<LpDataset> {
    let facts = hin.relation_facts(target);
    if facts.is_empty() {
        return Err(EvoPathError::NoRelationSupport {
            relation: hin.relation_label(target).to_owned(),
        });
    }
    let max_steps = max_length.saturating_sub(1);
    let eligible: Vec<(EntityId, EntityId)> = facts
        .iter()
        .filter(|f| connected_avoiding_direct(hin, f.head, f.tail, target, max_steps))
        .map(|f| (f.head, f.tail))
        .collect();
    if eligible.len() < 2 {
        return Err(EvoPathError::Eval(format!(
            "only {} of {} pairs are path-connected; not enough for a split",
            eligible.len(),
            facts.len()
        )));
    }

    let mut pairs = eligible;
    let mut rng = stream_rng(seed, StreamDomain::LpSplit, target.0 as u64);
    pairs.shuffle(&mut rng);
    let test_n = (pairs.len() * ratios.test as usize) / (ratios.train + ratios.test) as usize;
    let test_pos: Vec<_> = pairs[..test_n].to_vec();
    let train_pos: Vec<_> = pairs[test_n..].to_vec();

    let mut neg_rng = stream_rng(seed, StreamDomain::Negatives, target.0 as u64);
    let train_neg = sample_negatives(hin, target, &train_pos, ratios.pos_per_neg, &mut neg_rng)?;
    let test_neg = sample_negatives(hin, target, &test_pos, ratios.pos_per_neg, &mut neg_rng)?;

    let excluded = FactSet::closed_from(
        hin,
        test_pos.iter().map(|&(h, t)| Fact::new(h, target, t)),
    );

    Ok(LpDataset {
        relation: target,
        train_pos,
        test_pos,
        train_neg,
        test_neg,
        excluded,
    })
}

/// Same-type tail replacement: the fake tail shares at least one declared
/// type with the original, is uniformly drawn among compatible non-linked
/// entities, and never forms a true fact.
fn sample_negatives(
    hin: &Hin,
    target: RelationId,
    positives: &[(EntityId, EntityId)],
    pos_per_neg: u32,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<(EntityId, EntityId)>> {
    let needed = positives.len() / pos_per_neg.max(1) as usize;
    if needed == 0 {
        return Ok(Vec::new());
    }
    let mut emitted: HashSet<(EntityId, EntityId)> = HashSet::new();
    let mut order: Vec<usize> = (0..positives.len()).collect();
    order.shuffle(rng);
    let mut negatives = Vec::with_capacity(needed);
    'outer: for pass in 0..8 {
        for &i in &order {
            if negatives.len() == needed {
                break 'outer;
            }
            let (head, tail) = positives[i];
            let candidates: Vec<EntityId> = hin
                .entity_ids()
                .filter(|&e| {
                    e != tail
                        && hin.entity_is_present(e)
                        && hin.declared_type_overlap(e, tail)
                        && !hin.has_fact(&Fact::new(head, target, e))
                        && !emitted.contains(&(head, e))
                })
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let fake = candidates[rng.random_range(0..candidates.len())];
            emitted.insert((head, fake));
            negatives.push((head, fake));
        }
        if pass == 7 {
            break;
        }
    }
    if negatives.len() < needed {
        return Err(EvoPathError::Eval(format!(
            "could only sample {} of {} negatives (type-compatible pool exhausted)",
            negatives.len(),
            needed
        )));
    }
    Ok(negatives)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpScoreMode {
    /// Maximum confidence among rules whose instance connects the pair.
    MaxConf,
    /// Sum of confidences over connecting rules.
    WeightedSum,
}

/// Score each pair against the rule set. Pairs matched by no rule score 0.
pub fn lp_scores(
    hin: &Hin,
    rules: &[ScoredMetaPath],
    pairs: &[(EntityId, EntityId)],
    mode: LpScoreMode,
    excluded: Option<&FactSet>,
) -> Result<Vec<f64>> {
    let mut heads: Vec<EntityId> = pairs.iter().map(|&(h, _)| h).collect();
    heads.sort_unstable();
    heads.dedup();

    let mut scores = vec![0.0f64; pairs.len()];
    for rule in rules {
        let reached = match_pairs_from_sources(hin, &rule.metapath, &heads, excluded)?;
        if reached.is_empty() {
            continue;
        }
        for (i, &(h, t)) in pairs.iter().enumerate() {
            if reached.contains(h, t) {
                match mode {
                    LpScoreMode::MaxConf => {
                        if rule.score.confidence > scores[i] {
                            scores[i] = rule.score.confidence;
                        }
                    }
                    LpScoreMode::WeightedSum => scores[i] += rule.score.confidence,
                }
            }
        }
    }
    Ok(scores)
}

/// Output of the inductive node-removal protocol.
#[derive(Debug, Clone)]
pub struct InductiveMask {
    /// The 40% of positive test pairs chosen for the inductive subset.
    pub selected_pairs: Vec<(EntityId, EntityId)>,
    /// Nodes removed from the graph (a `removal_pct` share of the
    /// selected pairs' member nodes).
    pub removed_nodes: Vec<EntityId>,
    /// Selected pairs that lost at least one member node.
    pub affected_pairs: Vec<(EntityId, EntityId)>,
}

/// Select 40% of the positive test pairs, then remove `removal_pct` percent
/// of their member nodes (with all incident facts) from the graph. Node
/// removal is nested: a higher percentage removes a superset of a lower
/// one under the same seed.
pub fn inductive_mask(
    hin: &Hin,
    lp: &LpDataset,
    removal_pct: u32,
    seed: u64,
) -> Result<(Hin, InductiveMask)> {
    if removal_pct > 100 {
        return Err(EvoPathError::Config(format!(
            "removal percentage {removal_pct} out of range"
        )));
    }
    let mut selected = lp.test_pos.clone();
    let mut select_rng = stream_rng(seed, StreamDomain::Masks, 0);
    selected.shuffle(&mut select_rng);
    selected.truncate((selected.len() * 2) / 5);

    let mut nodes: Vec<EntityId> = selected
        .iter()
        .flat_map(|&(h, t)| [h, t])
        .collect();
    nodes.sort_unstable();
    nodes.dedup();
    let mut removal_rng = stream_rng(seed, StreamDomain::Masks, 1);
    nodes.shuffle(&mut removal_rng);
    let remove_n = nodes.len() * removal_pct as usize / 100;
    let removed_nodes: Vec<EntityId> = nodes[..remove_n].to_vec();

    let removed_set: HashSet<EntityId> = removed_nodes.iter().copied().collect();
    let masked = hin.remove_entities(&removed_set);
    let affected_pairs: Vec<(EntityId, EntityId)> = selected
        .iter()
        .copied()
        .filter(|&(h, t)| removed_set.contains(&h) || removed_set.contains(&t))
        .collect();

    Ok((
        masked,
        InductiveMask {
            selected_pairs: selected,
            removed_nodes,
            affected_pairs,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::Hin;
    use crate::matcher::MetaPathScore;
    use crate::metapath::MetaPath;

    fn rule(hin: &Hin, types: &[&str], relations: &[&str], confidence: f64) -> ScoredMetaPath {
        let types: Vec<String> = types.iter().map(|s| s.to_string()).collect();
        let relations: Vec<String> = relations.iter().map(|s| s.to_string()).collect();
        ScoredMetaPath {
            metapath: MetaPath::from_labels(hin, &types, &relations).unwrap(),
            score: MetaPathScore {
                coverage: 0.0,
                confidence,
                support_both: 0,
                support_rq: 1,
                support_m: 1,
            },
            target_relation: RelationId(0),
            generation_round: 0,
        }
    }

    #[test]
    fn pair_connected_only_by_its_own_edge_is_excluded() {
        let hin = Hin::builder()
            .fact("a", "rq", "b")
            .fact("c", "rq", "d")
            .fact("c", "other", "d")
            .typed("a", "T")
            .typed("b", "T")
            .typed("c", "T")
            .typed("d", "T")
            .build()
            .unwrap()
            .augment_inverses()
            .unwrap();
        let rq = hin.relation_id("rq").unwrap();
        let a = hin.entity_id("a").unwrap();
        let b = hin.entity_id("b").unwrap();
        let c = hin.entity_id("c").unwrap();
        let d = hin.entity_id("d").unwrap();
        assert!(!connected_avoiding_direct(&hin, a, b, rq, 2));
        assert!(connected_avoiding_direct(&hin, c, d, rq, 2));
    }

    #[test]
    fn lp_scores_follow_the_mode() {
        let hin = Hin::builder()
            .fact("a", "r1", "b")
            .fact("a", "r2", "b")
            .typed("a", "H")
            .typed("b", "T")
            .build()
            .unwrap();
        let a = hin.entity_id("a").unwrap();
        let b = hin.entity_id("b").unwrap();
        let rules = vec![
            rule(&hin, &["H", "T"], &["r1"], 0.4),
            rule(&hin, &["H", "T"], &["r2"], 0.9),
        ];
        let pairs = vec![(a, b), (b, a)];
        let max = lp_scores(&hin, &rules, &pairs, LpScoreMode::MaxConf, None).unwrap();
        assert_eq!(max, vec![0.9, 0.0]);
        let sum = lp_scores(&hin, &rules, &pairs, LpScoreMode::WeightedSum, None).unwrap();
        assert_eq!(sum, vec![1.3, 0.0]);
    }

    #[test]
    fn masking_is_total_at_one_hundred_and_empty_at_zero() {
        let mut b = Hin::builder();
        for i in 0..5 {
            let (h, t) = (format!("h{i}"), format!("t{i}"));
            b.add_fact_row(&h, "rq", &t);
            b.add_fact_row(&h, "x", &t);
            b.add_type_row(&h, "T");
            b.add_type_row(&t, "T");
        }
        let hin = b.build().unwrap().augment_inverses().unwrap();
        let rq = hin.relation_id("rq").unwrap();
        let test_pos: Vec<(EntityId, EntityId)> = hin
            .relation_facts(rq)
            .iter()
            .map(|f| (f.head, f.tail))
            .collect();
        let lp = LpDataset {
            relation: rq,
            train_pos: vec![],
            test_pos,
            train_neg: vec![],
            test_neg: vec![],
            excluded: FactSet::new(),
        };

        let (masked, mask) = inductive_mask(&hin, &lp, 0, 7).unwrap();
        assert_eq!(masked.fact_count(), hin.fact_count());
        assert!(mask.removed_nodes.is_empty());
        assert_eq!(mask.selected_pairs.len(), 2); // 40% of 5

        let (masked, mask) = inductive_mask(&hin, &lp, 100, 7).unwrap();
        assert_eq!(mask.removed_nodes.len(), 4);
        for &n in &mask.removed_nodes {
            assert!(!masked.entity_is_present(n));
        }
        assert_eq!(mask.affected_pairs.len(), mask.selected_pairs.len());
        // Fact count drops by the incident facts of the removed nodes.
        let incident = hin
            .facts()
            .iter()
            .filter(|f| {
                mask.removed_nodes.contains(&f.head) || mask.removed_nodes.contains(&f.tail)
            })
            .count();
        assert_eq!(masked.fact_count(), hin.fact_count() - incident);
    }

    #[test]
    fn removal_sets_are_nested_across_percentages() {
        let mut b = Hin::builder();
        for i in 0..10 {
            let (h, t) = (format!("h{i}"), format!("t{i}"));
            b.add_fact_row(&h, "rq", &t);
            b.add_type_row(&h, "T");
            b.add_type_row(&t, "T");
        }
        let hin = b.build().unwrap();
        let rq = hin.relation_id("rq").unwrap();
        let test_pos: Vec<(EntityId, EntityId)> = hin
            .relation_facts(rq)
            .iter()
            .map(|f| (f.head, f.tail))
            .collect();
        let lp = LpDataset {
            relation: rq,
            train_pos: vec![],
            test_pos,
            train_neg: vec![],
            test_neg: vec![],
            excluded: FactSet::new(),
        };
        let (_, at20) = inductive_mask(&hin, &lp, 20, 3).unwrap();
        let (_, at50) = inductive_mask(&hin, &lp, 50, 3).unwrap();
        let fifty: HashSet<EntityId> = at50.removed_nodes.iter().copied().collect();
        assert!(at20.removed_nodes.iter().all(|n| fifty.contains(n)));
        assert_eq!(at20.selected_pairs, at50.selected_pairs);
    }
}
