//! Type taxonomy: a DAG of entity types rooted at the synthetic ROOT.

use super::{TypeId, ROOT_TYPE};

/// Child-to-parents DAG over type ids. Every type other than ROOT has at
/// least one parent (ROOT is added for parentless types), so ROOT is a
/// common ancestor of any type set.
#[derive(Debug, Clone, Default)]
pub struct Taxonomy {
    parents: Vec<Vec<TypeId>>,
    /// Ancestors-or-self per type, sorted by id.
    ancestors: Vec<Vec<TypeId>>,
}

impl Taxonomy {
    /// Build from raw `(child, parent)` edges. On a cycle, returns one of
    /// its member type ids as the error value.
    pub(super) fn build(
        type_count: usize,
        edges: &[(TypeId, TypeId)],
    ) -> Result<Taxonomy, TypeId> {
        let mut parents = vec![Vec::new(); type_count];
        for &(child, parent) in edges {
            if child != parent && !parents[child.index()].contains(&parent) {
                parents[child.index()].push(parent);
            } else if child == parent && child != ROOT_TYPE {
                return Err(child);
            }
        }
        for (t, ps) in parents.iter_mut().enumerate() {
            if ps.is_empty() && t != ROOT_TYPE.index() {
                ps.push(ROOT_TYPE);
            }
            ps.sort_unstable();
        }

        // Kahn's algorithm over child->parent edges; leftovers are on a cycle.
        let mut out_degree: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut children: Vec<Vec<TypeId>> = vec![Vec::new(); type_count];
        for (c, ps) in parents.iter().enumerate() {
            for &p in ps {
                children[p.index()].push(TypeId(c as u32));
            }
        }
        let mut stack: Vec<TypeId> = (0..type_count as u32)
            .map(TypeId)
            .filter(|t| out_degree[t.index()] == 0)
            .collect();
        let mut order: Vec<TypeId> = Vec::with_capacity(type_count);
        while let Some(t) = stack.pop() {
            order.push(t);
            for &c in &children[t.index()] {
                out_degree[c.index()] -= 1;
                if out_degree[c.index()] == 0 {
                    stack.push(c);
                }
            }
        }
        if order.len() != type_count {
            let member = (0..type_count)
                .find(|&t| out_degree[t] > 0)
                .map(|t| TypeId(t as u32))
                .expect("cycle member exists");
            return Err(member);
        }

        // Ancestor sets in topological order: parents resolve before children.
        let mut ancestors: Vec<Vec<TypeId>> = vec![Vec::new(); type_count];
        for &t in &order {
            let mut set = vec![t];
            for &p in &parents[t.index()] {
                set.extend_from_slice(&ancestors[p.index()]);
            }
            set.sort_unstable();
            set.dedup();
            ancestors[t.index()] = set;
        }

        Ok(Taxonomy { parents, ancestors })
    }

    pub fn parents(&self, ty: TypeId) -> &[TypeId] {
        &self.parents[ty.index()]
    }

    pub fn ancestors_or_self(&self, ty: TypeId) -> &[TypeId] {
        &self.ancestors[ty.index()]
    }

    pub fn is_ancestor_or_self(&self, ancestor: TypeId, ty: TypeId) -> bool {
        self.ancestors[ty.index()].binary_search(&ancestor).is_ok()
    }

    /// Minimal common ancestors of a type set (DAG LCA; can be a set).
    /// A singleton input returns itself. The result is sorted by id.
    pub fn minimal_common_ancestors(&self, types: &[TypeId]) -> Vec<TypeId> {
        match types {
            [] => vec![ROOT_TYPE],
            [t] => vec![*t],
            _ => {
                let mut common: Vec<TypeId> = self.ancestors_or_self(types[0]).to_vec();
                for &t in &types[1..] {
                    let other = self.ancestors_or_self(t);
                    common.retain(|a| other.binary_search(a).is_ok());
                }
                // Keep only ancestors with no strict descendant among the
                // common set.
                let minimal: Vec<TypeId> = common
                    .iter()
                    .copied()
                    .filter(|&a| {
                        !common
                            .iter()
                            .any(|&c| c != a && self.is_ancestor_or_self(a, c))
                    })
                    .collect();
                minimal
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::Hin;

    #[test]
    fn lca_singleton_returns_itself() {
        let hin = Hin::builder()
            .typed("x", "T")
            .fact("x", "r", "x")
            .build()
            .unwrap();
        let t = hin.type_id("T").unwrap();
        assert_eq!(hin.taxonomy().minimal_common_ancestors(&[t]), vec![t]);
    }

    #[test]
    fn lca_of_siblings_is_their_parent() {
        let hin = Hin::builder()
            .subtype("Scientist", "Person")
            .subtype("Writer", "Person")
            .build()
            .unwrap();
        let s = hin.type_id("Scientist").unwrap();
        let w = hin.type_id("Writer").unwrap();
        let p = hin.type_id("Person").unwrap();
        assert_eq!(hin.taxonomy().minimal_common_ancestors(&[s, w]), vec![p]);
    }

    #[test]
    fn lca_in_flat_taxonomy_is_root() {
        let hin = Hin::builder()
            .typed("x", "A")
            .typed("x", "B")
            .fact("x", "r", "x")
            .build()
            .unwrap();
        let a = hin.type_id("A").unwrap();
        let b = hin.type_id("B").unwrap();
        assert_eq!(
            hin.taxonomy().minimal_common_ancestors(&[a, b]),
            vec![ROOT_TYPE]
        );
    }

    #[test]
    fn lca_can_be_a_set() {
        // X and Y both descend from A and B, which are incomparable.
        let hin = Hin::builder()
            .subtype("X", "A")
            .subtype("X", "B")
            .subtype("Y", "A")
            .subtype("Y", "B")
            .build()
            .unwrap();
        let x = hin.type_id("X").unwrap();
        let y = hin.type_id("Y").unwrap();
        let a = hin.type_id("A").unwrap();
        let b = hin.type_id("B").unwrap();
        let mut expected = vec![a, b];
        expected.sort_unstable();
        assert_eq!(hin.taxonomy().minimal_common_ancestors(&[x, y]), expected);
    }
}
