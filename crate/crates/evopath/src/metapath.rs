//! Schema-level paths: alternating entity types and relations.

use crate::error::{AtomKind, EvoPathError, Result};
use crate::hin::{unknown_atom, Hin, RelationId, TypeId};

/// An alternating sequence `t1 -r1-> t2 -r2-> ... -> tk` with
/// `|types| = |relations| + 1`. The length of a meta-path is its number of
/// type slots; its token rendering has `2*|relations| + 1` words.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MetaPath {
    types: Vec<TypeId>,
    relations: Vec<RelationId>,
}

impl MetaPath {
    pub fn new(types: Vec<TypeId>, relations: Vec<RelationId>) -> Result<MetaPath> {
        if types.is_empty() {
            return Err(EvoPathError::InvalidMetaPath(
                "a meta-path needs at least one type slot".into(),
            ));
        }
        if types.len() != relations.len() + 1 {
            return Err(EvoPathError::InvalidMetaPath(format!(
                "{} type slots do not fit {} relations",
                types.len(),
                relations.len()
            )));
        }
        Ok(MetaPath { types, relations })
    }

    pub fn types(&self) -> &[TypeId] {
        &self.types
    }

    pub fn relations(&self) -> &[RelationId] {
        &self.relations
    }

    /// Number of type slots.
    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Length of the token rendering: `2 * |relations| + 1`.
    pub fn token_len(&self) -> usize {
        2 * self.relations.len() + 1
    }

    /// Whether this path is the degenerate one-hop restatement of `target`.
    pub fn is_trivial_for(&self, target: RelationId) -> bool {
        self.relations.len() == 1 && self.relations[0] == target
    }

    /// Resolve a parsed token sequence (odd positions are types, even are
    /// relations, 0-indexed) against the graph's symbol tables.
    pub fn resolve(hin: &Hin, tokens: &[String]) -> Result<MetaPath> {
        if tokens.len() < 3 || tokens.len() % 2 == 0 {
            return Err(EvoPathError::InvalidMetaPath(format!(
                "token sequence of length {} does not alternate types and relations",
                tokens.len()
            )));
        }
        let mut types = Vec::with_capacity(tokens.len() / 2 + 1);
        let mut relations = Vec::with_capacity(tokens.len() / 2);
        for (i, token) in tokens.iter().enumerate() {
            if i % 2 == 0 {
                types.push(
                    hin.type_id(token)
                        .ok_or_else(|| unknown_atom(AtomKind::EntityType, token))?,
                );
            } else {
                relations.push(
                    hin.relation_id(token)
                        .ok_or_else(|| unknown_atom(AtomKind::Relation, token))?,
                );
            }
        }
        MetaPath::new(types, relations)
    }

    /// ASCII rendering: `Type1 -[rel1]-> Type2 -[rel2]-> Type3`. Inverse
    /// suffixes stay inside the brackets.
    pub fn render(&self, hin: &Hin) -> String {
        let mut out = String::new();
        out.push_str(hin.type_label(self.types[0]));
        for (i, &r) in self.relations.iter().enumerate() {
            out.push_str(" -[");
            out.push_str(hin.relation_label(r));
            out.push_str("]-> ");
            out.push_str(hin.type_label(self.types[i + 1]));
        }
        out
    }

    /// Deterministic natural-language gloss of the path.
    pub fn describe(&self, hin: &Hin) -> String {
        let mut out = format!("A {}", hin.type_label(self.types[0]));
        for (i, &r) in self.relations.iter().enumerate() {
            out.push_str(&format!(
                " that {} a {}",
                hin.relation_label(r),
                hin.type_label(self.types[i + 1])
            ));
        }
        out.push('.');
        out
    }

    /// Label form, for persistence.
    pub fn labels(&self, hin: &Hin) -> (Vec<String>, Vec<String>) {
        (
            self.types.iter().map(|&t| hin.type_label(t).to_owned()).collect(),
            self.relations
                .iter()
                .map(|&r| hin.relation_label(r).to_owned())
                .collect(),
        )
    }

    pub fn from_labels(hin: &Hin, types: &[String], relations: &[String]) -> Result<MetaPath> {
        let tys = types
            .iter()
            .map(|t| hin.type_id(t).ok_or_else(|| unknown_atom(AtomKind::EntityType, t)))
            .collect::<Result<Vec<_>>>()?;
        let rels = relations
            .iter()
            .map(|r| hin.relation_id(r).ok_or_else(|| unknown_atom(AtomKind::Relation, r)))
            .collect::<Result<Vec<_>>>()?;
        MetaPath::new(tys, rels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::Hin;

    fn hin() -> Hin {
        Hin::builder()
            .fact("a", "livesIn", "c")
            .typed("a", "Person")
            .typed("c", "Country")
            .build()
            .unwrap()
            .augment_inverses()
            .unwrap()
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(MetaPath::new(vec![], vec![]).is_err());
        assert!(MetaPath::new(vec![TypeId(0), TypeId(1)], vec![]).is_err());
        let m = MetaPath::new(vec![TypeId(0)], vec![]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.token_len(), 1);
    }

    #[test]
    fn render_and_resolve_round_trip() {
        let hin = hin();
        let m = MetaPath::from_labels(
            &hin,
            &["Person".into(), "Country".into()],
            &["livesIn".into()],
        )
        .unwrap();
        assert_eq!(m.render(&hin), "Person -[livesIn]-> Country");
        assert_eq!(m.token_len(), 3);
        let tokens: Vec<String> = vec!["Person".into(), "livesIn".into(), "Country".into()];
        assert_eq!(MetaPath::resolve(&hin, &tokens).unwrap(), m);
    }

    #[test]
    fn inverse_suffix_stays_inside_brackets() {
        let hin = hin();
        let m = MetaPath::from_labels(
            &hin,
            &["Country".into(), "Person".into()],
            &["livesIn^-1".into()],
        )
        .unwrap();
        assert_eq!(m.render(&hin), "Country -[livesIn^-1]-> Person");
    }

    #[test]
    fn unknown_atom_is_reported_with_label() {
        let hin = hin();
        let tokens: Vec<String> = vec!["Person".into(), "nope".into(), "Country".into()];
        let err = MetaPath::resolve(&hin, &tokens).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    #[test]
    fn describe_is_deterministic() {
        let hin = hin();
        let m = MetaPath::from_labels(
            &hin,
            &["Person".into(), "Country".into()],
            &["livesIn".into()],
        )
        .unwrap();
        assert_eq!(m.describe(&hin), "A Person that livesIn a Country.");
    }
}
