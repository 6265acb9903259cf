//! Type-level summary graph derived from the instance graph.

use std::collections::HashMap;

use super::{Hin, RelationId, TypeId};

/// Edges are `(type, relation, type)` triples witnessed by instance facts
/// under the *declared* types of the endpoints; the support of an edge is
/// the number of witnessing facts.
#[derive(Debug, Clone, Default)]
pub struct SchemaGraph {
    support: HashMap<(TypeId, RelationId, TypeId), u64>,
    out: HashMap<TypeId, Vec<(RelationId, TypeId)>>,
}

impl SchemaGraph {
    /// Summarize the instance graph: one edge per (head type, relation,
    /// tail type) combination over the declared type sets of each fact's
    /// endpoints.
    pub fn build(hin: &Hin) -> SchemaGraph {
        let mut support: HashMap<(TypeId, RelationId, TypeId), u64> = HashMap::new();
        for fact in hin.facts() {
            for &t1 in hin.declared_types(fact.head) {
                for &t2 in hin.declared_types(fact.tail) {
                    *support.entry((t1, fact.relation, t2)).or_insert(0) += 1;
                }
            }
        }
        let mut out: HashMap<TypeId, Vec<(RelationId, TypeId)>> = HashMap::new();
        for &(t1, r, t2) in support.keys() {
            out.entry(t1).or_default().push((r, t2));
        }
        for edges in out.values_mut() {
            edges.sort_unstable();
            edges.dedup();
        }
        SchemaGraph { support, out }
    }

    pub fn edge_count(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self, head: TypeId, relation: RelationId, tail: TypeId) -> u64 {
        self.support
            .get(&(head, relation, tail))
            .copied()
            .unwrap_or(0)
    }

    pub fn has_edge(&self, head: TypeId, relation: RelationId, tail: TypeId) -> bool {
        self.support.contains_key(&(head, relation, tail))
    }

    /// Outgoing schema edges of a type, sorted by (relation, tail type).
    pub fn out_edges(&self, ty: TypeId) -> &[(RelationId, TypeId)] {
        self.out.get(&ty).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn edges(&self) -> impl Iterator<Item = (&(TypeId, RelationId, TypeId), &u64)> {
        self.support.iter()
    }

    pub fn total_support(&self) -> u64 {
        self.support.values().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::Hin;

    #[test]
    fn single_fact_single_edge() {
        let hin = Hin::builder()
            .fact("a", "r", "b")
            .typed("a", "P")
            .typed("b", "C")
            .build()
            .unwrap();
        let schema = SchemaGraph::build(&hin);
        let p = hin.type_id("P").unwrap();
        let c = hin.type_id("C").unwrap();
        let r = hin.relation_id("r").unwrap();
        assert_eq!(schema.edge_count(), 1);
        assert_eq!(schema.support(p, r, c), 1);
    }

    #[test]
    fn multi_typed_head_expands_per_type() {
        let hin = Hin::builder()
            .fact("a", "r", "b")
            .typed("a", "P")
            .typed("a", "Q")
            .typed("b", "C")
            .build()
            .unwrap();
        let schema = SchemaGraph::build(&hin);
        let p = hin.type_id("P").unwrap();
        let q = hin.type_id("Q").unwrap();
        let c = hin.type_id("C").unwrap();
        let r = hin.relation_id("r").unwrap();
        assert_eq!(schema.edge_count(), 2);
        assert_eq!(schema.support(p, r, c), 1);
        assert_eq!(schema.support(q, r, c), 1);
    }

    #[test]
    fn support_totals_match_type_set_products() {
        let hin = Hin::builder()
            .fact("a", "r", "b")
            .fact("b", "s", "c")
            .fact("a", "r", "c")
            .typed("a", "P")
            .typed("a", "Q")
            .typed("b", "C")
            .typed("c", "C")
            .typed("c", "D")
            .build()
            .unwrap();
        let schema = SchemaGraph::build(&hin);
        let expected: u64 = hin
            .facts()
            .iter()
            .map(|f| {
                (hin.declared_types(f.head).len() * hin.declared_types(f.tail).len()) as u64
            })
            .sum();
        assert_eq!(schema.total_support(), expected);
    }
}
