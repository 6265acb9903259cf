//! Relation-anchored random-walk collection of path instances and their
//! summarization into seed meta-paths.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EvoPathError, Result};
use crate::hin::{EntityId, Fact, Hin, RelationId, TypeId};
use crate::metapath::MetaPath;
use crate::rng::{stream_rng, StreamDomain};

/// An entity-level path witnessed while explaining `anchor_relation`:
/// every consecutive triple is a fact, and the endpoints are connected by
/// the anchor relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathInstance {
    pub entities: Vec<EntityId>,
    pub relations: Vec<RelationId>,
    pub anchor_relation: RelationId,
}

/// Walk budget. `max_length` bounds the number of type slots of the
/// summarized meta-paths, so walks take at most `max_length - 1` steps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WalkConfig {
    pub max_length: usize,
    pub fact_batch_size: usize,
    pub walks_per_fact: usize,
    pub rng_seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            max_length: 3,
            fact_batch_size: 200,
            walks_per_fact: 10,
            rng_seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_length < 1 {
            return Err(EvoPathError::Config("max_length must be >= 1".into()));
        }
        if self.fact_batch_size < 1 {
            return Err(EvoPathError::Config("fact_batch_size must be >= 1".into()));
        }
        if self.walks_per_fact < 1 {
            return Err(EvoPathError::Config("walks_per_fact must be >= 1".into()));
        }
        Ok(())
    }
}

/// One uniform step over the out-edges of `from`, skipping `banned` (the
/// anchor fact itself, on the first step). Edge-uniform: parallel relations
/// to the same neighbor count separately.
pub(crate) fn uniform_step(
    hin: &Hin,
    from: EntityId,
    banned: Option<&Fact>,
    rng: &mut ChaCha8Rng,
) -> Option<(RelationId, EntityId)> {
    let edges = hin.out_edges(from);
    let banned_idx = banned.and_then(|f| {
        if f.head != from {
            return None;
        }
        edges.binary_search(&(f.relation, f.tail)).ok()
    });
    match banned_idx {
        None => {
            if edges.is_empty() {
                None
            } else {
                Some(edges[rng.random_range(0..edges.len())])
            }
        }
        Some(b) => {
            if edges.len() <= 1 {
                None
            } else {
                let i = rng.random_range(0..edges.len() - 1);
                Some(edges[if i >= b { i + 1 } else { i }])
            }
        }
    }
}

/// Sample a batch of anchor facts for the target relation and run uniform
/// random walks from each head. After every step, when the anchor relation
/// also connects the start to the current node, the walk prefix is recorded
/// as a path instance (and the walk continues). The anchor fact's own edge
/// is never taken as the first step — it would only restate itself.
///
/// Walks for distinct anchor facts use independent RNG streams derived from
/// `(rng_seed, batch index)`, so results are identical for any worker count
/// and merge in batch order.
pub fn sample_paths(hin: &Hin, target: RelationId, cfg: &WalkConfig) -> Result<Vec<PathInstance>> {
    cfg.validate()?;
    if target.index() >= hin.relation_count() {
        return Err(EvoPathError::NoRelationSupport {
            relation: format!("#{target}"),
        });
    }
    let anchor_facts = hin.relation_facts(target);
    if anchor_facts.is_empty() {
        return Err(EvoPathError::NoRelationSupport {
            relation: hin.relation_label(target).to_owned(),
        });
    }

    let selected: Vec<Fact> = if anchor_facts.len() <= cfg.fact_batch_size {
        anchor_facts.to_vec()
    } else {
        let mut rng = stream_rng(cfg.rng_seed, StreamDomain::WalkSelect, 0);
        let mut idx: Vec<usize> =
            rand::seq::index::sample(&mut rng, anchor_facts.len(), cfg.fact_batch_size).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| anchor_facts[i]).collect()
    };

    let per_fact: Vec<Vec<PathInstance>> = selected
        .par_iter()
        .enumerate()
        .map(|(batch_idx, anchor)| {
            let mut rng = stream_rng(cfg.rng_seed, StreamDomain::Walks, batch_idx as u64);
            let mut instances = Vec::new();
            for _ in 0..cfg.walks_per_fact {
                let mut entities = vec![anchor.head];
                let mut relations = Vec::new();
                let mut current = anchor.head;
                for step in 1..cfg.max_length {
                    let banned = (step == 1).then_some(anchor);
                    let Some((r, next)) = uniform_step(hin, current, banned, &mut rng) else {
                        break;
                    };
                    relations.push(r);
                    entities.push(next);
                    current = next;
                    if hin.has_fact(&Fact::new(anchor.head, target, current)) {
                        instances.push(PathInstance {
                            entities: entities.clone(),
                            relations: relations.clone(),
                            anchor_relation: target,
                        });
                    }
                }
            }
            instances
        })
        .collect();

    Ok(per_fact.into_iter().flatten().collect())
}

/// Lift path instances to meta-paths. Singleton type slots are kept as-is;
/// multi-typed slots are replaced by their minimal common ancestors in the
/// taxonomy. One meta-path is emitted per element of the cross-product of
/// slot alternatives (lexicographic by type label, capped per instance);
/// duplicates across instances are removed, keeping first appearance.
pub fn summarize(hin: &Hin, instances: &[PathInstance], cap_per_instance: usize) -> Vec<MetaPath> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for instance in instances {
        let slots: Vec<Vec<TypeId>> = instance
            .entities
            .iter()
            .map(|&v| {
                let declared = hin.declared_types(v);
                let mut alts = if declared.len() == 1 {
                    declared.to_vec()
                } else {
                    hin.taxonomy().minimal_common_ancestors(declared)
                };
                alts.sort_by(|&a, &b| hin.type_label(a).cmp(hin.type_label(b)));
                alts
            })
            .collect();

        for combo in CrossProduct::new(&slots).take(cap_per_instance) {
            let m = MetaPath::new(combo, instance.relations.clone())
                .expect("slot count matches relation count");
            if seen.insert(m.clone()) {
                out.push(m);
            }
        }
    }
    out
}

/// Odometer over slot alternatives; the last slot varies fastest, which
/// enumerates type tuples in lexicographic order when slots are sorted.
struct CrossProduct<'a> {
    slots: &'a [Vec<TypeId>],
    counters: Vec<usize>,
    done: bool,
}

impl<'a> CrossProduct<'a> {
    fn new(slots: &'a [Vec<TypeId>]) -> Self {
        let done = slots.iter().any(Vec::is_empty);
        CrossProduct {
            slots,
            counters: vec![0; slots.len()],
            done,
        }
    }
}

impl Iterator for CrossProduct<'_> {
    type Item = Vec<TypeId>;

    fn next(&mut self) -> Option<Vec<TypeId>> {
        if self.done {
            return None;
        }
        let item: Vec<TypeId> = self
            .counters
            .iter()
            .zip(self.slots)
            .map(|(&c, alts)| alts[c])
            .collect();
        let mut i = self.slots.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.counters[i] += 1;
            if self.counters[i] < self.slots[i].len() {
                break;
            }
            self.counters[i] = 0;
        }
        Some(item)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::Hin;

    /// Forced two-step chains: h_i -s-> m_i -u-> c_i with anchors
    /// (h_i, rq, c_i). Unaugmented, so every choice is forced.
    fn chain_graph(k: usize) -> Hin {
        let mut b = Hin::builder();
        for i in 0..k {
            let (h, m, c) = (format!("h{i}"), format!("m{i}"), format!("c{i}"));
            b.add_fact_row(&h, "rq", &c);
            b.add_fact_row(&h, "s", &m);
            b.add_fact_row(&m, "u", &c);
            b.add_type_row(&h, "H");
            b.add_type_row(&m, "M");
            b.add_type_row(&c, "C");
        }
        b.build().unwrap()
    }

    #[test]
    fn dead_end_start_yields_no_instances() {
        // The only out-edge of h is the banned anchor edge.
        let hin = Hin::builder()
            .fact("h", "rq", "t")
            .typed("h", "H")
            .typed("t", "T")
            .build()
            .unwrap();
        let rq = hin.relation_id("rq").unwrap();
        let cfg = WalkConfig {
            rng_seed: 1,
            ..WalkConfig::default()
        };
        assert!(sample_paths(&hin, rq, &cfg).unwrap().is_empty());
    }

    #[test]
    fn forced_chains_record_one_instance_per_walk() {
        let hin = chain_graph(5);
        let rq = hin.relation_id("rq").unwrap();
        let cfg = WalkConfig {
            max_length: 3,
            fact_batch_size: 5,
            walks_per_fact: 7,
            rng_seed: 3,
        };
        let instances = sample_paths(&hin, rq, &cfg).unwrap();
        assert_eq!(instances.len(), 5 * 7);
        for inst in &instances {
            assert_eq!(inst.entities.len(), 3);
            assert_eq!(inst.relations.len(), 2);
        }
    }

    #[test]
    fn fixed_seed_reproduces_the_instance_list() {
        let hin = chain_graph(4).augment_inverses().unwrap();
        let rq = hin.relation_id("rq").unwrap();
        let cfg = WalkConfig {
            max_length: 3,
            fact_batch_size: 3,
            walks_per_fact: 5,
            rng_seed: 42,
        };
        let a = sample_paths(&hin, rq, &cfg).unwrap();
        let b = sample_paths(&hin, rq, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_relation_is_an_error() {
        let hin = chain_graph(1);
        let cfg = WalkConfig::default();
        assert!(matches!(
            sample_paths(&hin, RelationId(999), &cfg),
            Err(EvoPathError::NoRelationSupport { .. })
        ));
        let cfg = WalkConfig {
            walks_per_fact: 0,
            ..WalkConfig::default()
        };
        let rq = hin.relation_id("rq").unwrap();
        assert!(matches!(
            sample_paths(&hin, rq, &cfg),
            Err(EvoPathError::Config(_))
        ));
    }

    #[test]
    fn step_transitions_are_uniform_within_three_sigma() {
        let d = 8usize;
        let mut b = Hin::builder();
        for i in 0..d {
            b.add_fact_row("hub", &format!("r{i}"), &format!("x{i}"));
        }
        let hin = b.build().unwrap();
        let hub = hin.entity_id("hub").unwrap();
        let mut rng = stream_rng(9, StreamDomain::Walks, 0);
        let n = 100_000usize;
        let mut counts = vec![0usize; d];
        for _ in 0..n {
            let (_, tail) = uniform_step(&hin, hub, None, &mut rng).unwrap();
            let label = hin.entity_label(tail);
            let idx: usize = label[1..].parse().unwrap();
            counts[idx] += 1;
        }
        let p = 1.0 / d as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for &c in &counts {
            let diff = (c as f64 - n as f64 * p).abs();
            assert!(diff <= 3.0 * sigma, "count {c} deviates more than 3 sigma");
        }
    }

    #[test]
    fn singly_typed_instances_summarize_to_one_metapath_each() {
        let hin = chain_graph(2);
        let rq = hin.relation_id("rq").unwrap();
        let cfg = WalkConfig {
            max_length: 3,
            fact_batch_size: 2,
            walks_per_fact: 1,
            rng_seed: 0,
        };
        let instances = sample_paths(&hin, rq, &cfg).unwrap();
        assert_eq!(instances.len(), 2);
        let seeds = summarize(&hin, &instances, 10);
        // Both chains lift to the same single meta-path.
        assert_eq!(seeds.len(), 1);
        assert_eq!(seeds[0].render(&hin), "H -[s]-> M -[u]-> C");
    }

    #[test]
    fn multi_typed_slot_lifts_to_lca() {
        let hin = Hin::builder()
            .fact("e", "worksAt", "u")
            .typed("e", "Scientist")
            .typed("e", "Writer")
            .typed("u", "University")
            .subtype("Scientist", "Person")
            .subtype("Writer", "Person")
            .build()
            .unwrap();
        let e = hin.entity_id("e").unwrap();
        let u = hin.entity_id("u").unwrap();
        let r = hin.relation_id("worksAt").unwrap();
        let instance = PathInstance {
            entities: vec![e, u],
            relations: vec![r],
            anchor_relation: r,
        };
        let seeds = summarize(&hin, &[instance], 10);
        assert_eq!(seeds.len(), 1);
        assert_eq!(seeds[0].render(&hin), "Person -[worksAt]-> University");
    }

    #[test]
    fn cross_product_is_capped_and_lexicographic() {
        // Flat taxonomy: two multi-typed slots lift to {ROOT}; use a DAG
        // with two minimal common ancestors instead.
        let hin = Hin::builder()
            .fact("x", "r", "y")
            .typed("x", "X1")
            .typed("x", "X2")
            .typed("y", "Y1")
            .typed("y", "Y2")
            .subtype("X1", "A")
            .subtype("X1", "B")
            .subtype("X2", "A")
            .subtype("X2", "B")
            .subtype("Y1", "C")
            .subtype("Y1", "D")
            .subtype("Y2", "C")
            .subtype("Y2", "D")
            .build()
            .unwrap();
        let x = hin.entity_id("x").unwrap();
        let y = hin.entity_id("y").unwrap();
        let r = hin.relation_id("r").unwrap();
        let instance = PathInstance {
            entities: vec![x, y],
            relations: vec![r],
            anchor_relation: r,
        };
        let all = summarize(&hin, &[instance.clone()], 10);
        assert_eq!(all.len(), 4); // {A,B} x {C,D}
        let renders: Vec<String> = all.iter().map(|m| m.render(&hin)).collect();
        assert_eq!(
            renders,
            vec![
                "A -[r]-> C",
                "A -[r]-> D",
                "B -[r]-> C",
                "B -[r]-> D",
            ]
        );
        let capped = summarize(&hin, &[instance], 3);
        assert_eq!(capped.len(), 3);
        assert_eq!(capped[0].render(&hin), "A -[r]-> C");
    }
}
