//! Validation and repair of generated token sequences.
//!
//! Per sequence: out-of-vocabulary atoms are replaced with the closest
//! catalog atom of the right kind (by Gestalt similarity, position parity
//! deciding type vs relation), then the length bound, per-step schema
//! support and the trivial-restatement ban are enforced. Survivors are
//! deduplicated. Every failure is a per-item rejection with a reason, never
//! an error.

use serde::{Deserialize, Serialize};

use crate::atoms::{gestalt_similarity, AtomCatalog};
use crate::hin::{Hin, RelationId, SchemaGraph, TypeId};
use crate::metapath::MetaPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    UnknownAtom,
    InvalidStep,
    TrivialTarget,
    Overlength,
    Malformed,
}

/// Rejection tallies by reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectCounts {
    pub unknown_atom: usize,
    pub invalid_step: usize,
    pub trivial_rq: usize,
    pub overlength: usize,
    pub malformed: usize,
}

impl RejectCounts {
    pub fn total(&self) -> usize {
        self.unknown_atom + self.invalid_step + self.trivial_rq + self.overlength + self.malformed
    }

    fn bump(&mut self, reason: RejectReason) {
        match reason {
            RejectReason::UnknownAtom => self.unknown_atom += 1,
            RejectReason::InvalidStep => self.invalid_step += 1,
            RejectReason::TrivialTarget => self.trivial_rq += 1,
            RejectReason::Overlength => self.overlength += 1,
            RejectReason::Malformed => self.malformed += 1,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CleanReport {
    /// Accepted meta-paths, deduplicated, in first-acceptance order.
    pub accepted: Vec<MetaPath>,
    /// Number of input sequences that were accepted (batch duplicates of an
    /// accepted path count here but appear once in `accepted`).
    pub accepted_count: usize,
    /// Accepted sequences that needed at least one atom replaced.
    pub corrected_count: usize,
    pub rejected: RejectCounts,
}

impl CleanReport {
    /// Rejections over all processed sequences; 0 for empty input.
    pub fn error_rate(&self) -> f64 {
        let total = self.accepted_count + self.rejected.total();
        if total == 0 {
            0.0
        } else {
            self.rejected.total() as f64 / total as f64
        }
    }
}

/// Where synonym correction searches for replacements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrectionScope {
    /// The atom catalog (closed world, the default).
    #[default]
    Catalog,
    /// The full type/relation vocabularies, for ablation.
    FullVocabulary,
}

#[derive(Debug, Clone, Copy)]
pub struct CleanOptions {
    pub max_length: usize,
    pub min_similarity: f64,
    pub scope: CorrectionScope,
}

impl Default for CleanOptions {
    fn default() -> Self {
        CleanOptions {
            max_length: 3,
            min_similarity: 0.5,
            scope: CorrectionScope::Catalog,
        }
    }
}

/// Clean a batch of parsed token sequences against the schema and catalog.
pub fn clean(
    hin: &Hin,
    schema: &SchemaGraph,
    catalog: &AtomCatalog,
    sequences: &[Vec<String>],
    target: RelationId,
    opts: &CleanOptions,
) -> CleanReport {
    let mut report = CleanReport::default();
    let mut seen = std::collections::HashSet::new();
    for tokens in sequences {
        match clean_one(hin, schema, catalog, tokens, target, opts) {
            Ok((metapath, corrected)) => {
                report.accepted_count += 1;
                if corrected {
                    report.corrected_count += 1;
                }
                if seen.insert(metapath.clone()) {
                    report.accepted.push(metapath);
                }
            }
            Err(reason) => report.rejected.bump(reason),
        }
    }
    report
}

fn clean_one(
    hin: &Hin,
    schema: &SchemaGraph,
    catalog: &AtomCatalog,
    tokens: &[String],
    target: RelationId,
    opts: &CleanOptions,
) -> std::result::Result<(MetaPath, bool), RejectReason> {
    if tokens.len() < 3 || tokens.len() % 2 == 0 {
        return Err(RejectReason::Malformed);
    }

    let mut corrected = false;
    let mut types: Vec<TypeId> = Vec::with_capacity(tokens.len() / 2 + 1);
    let mut relations: Vec<RelationId> = Vec::with_capacity(tokens.len() / 2);
    for (i, token) in tokens.iter().enumerate() {
        if i % 2 == 0 {
            match resolve_type(hin, catalog, token, opts) {
                Some((t, was_corrected)) => {
                    corrected |= was_corrected;
                    types.push(t);
                }
                None => return Err(RejectReason::UnknownAtom),
            }
        } else {
            match resolve_relation(hin, catalog, token, opts) {
                Some((r, was_corrected)) => {
                    corrected |= was_corrected;
                    relations.push(r);
                }
                None => return Err(RejectReason::UnknownAtom),
            }
        }
    }

    if types.len() > opts.max_length {
        return Err(RejectReason::Overlength);
    }

    for (i, &r) in relations.iter().enumerate() {
        if schema.support(types[i], r, types[i + 1]) == 0 {
            return Err(RejectReason::InvalidStep);
        }
    }

    let metapath = MetaPath::new(types, relations).map_err(|_| RejectReason::Malformed)?;
    if metapath.is_trivial_for(target) {
        return Err(RejectReason::TrivialTarget);
    }
    Ok((metapath, corrected))
}

fn resolve_type(
    hin: &Hin,
    catalog: &AtomCatalog,
    token: &str,
    opts: &CleanOptions,
) -> Option<(TypeId, bool)> {
    if let Some(t) = hin.type_id(token) {
        let in_scope = match opts.scope {
            CorrectionScope::Catalog => catalog.contains_type(t),
            CorrectionScope::FullVocabulary => true,
        };
        if in_scope {
            return Some((t, false));
        }
    }
    let candidates: Vec<TypeId> = match opts.scope {
        CorrectionScope::Catalog => catalog.types().collect(),
        CorrectionScope::FullVocabulary => hin.type_ids().collect(),
    };
    best_match(token, candidates, |t| hin.type_label(t), opts.min_similarity)
        .map(|t| (t, true))
}

fn resolve_relation(
    hin: &Hin,
    catalog: &AtomCatalog,
    token: &str,
    opts: &CleanOptions,
) -> Option<(RelationId, bool)> {
    if let Some(r) = hin.relation_id(token) {
        let in_scope = match opts.scope {
            CorrectionScope::Catalog => catalog.contains_relation(r),
            CorrectionScope::FullVocabulary => true,
        };
        if in_scope {
            return Some((r, false));
        }
    }
    let candidates: Vec<RelationId> = match opts.scope {
        CorrectionScope::Catalog => catalog.relations().collect(),
        CorrectionScope::FullVocabulary => hin.relation_ids().collect(),
    };
    best_match(
        token,
        candidates,
        |r| hin.relation_label(r),
        opts.min_similarity,
    )
    .map(|r| (r, true))
}

/// Argmax by similarity; ties keep the earliest candidate, which is the
/// catalog order (extraction first, then expansion rank).
fn best_match<'a, T: Copy>(
    token: &str,
    candidates: Vec<T>,
    label: impl Fn(T) -> &'a str,
    min_similarity: f64,
) -> Option<T> {
    let mut best: Option<(f64, T)> = None;
    for c in candidates {
        let score = gestalt_similarity(token, label(c));
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, c));
        }
    }
    match best {
        Some((score, c)) if score >= min_similarity => Some(c),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::build_catalog;

    fn context() -> (Hin, SchemaGraph, AtomCatalog, RelationId) {
        let hin = Hin::builder()
            .fact("p1", "isCitizenOf", "c1")
            .fact("p1", "livesIn", "c1")
            .fact("u1", "locatedIn", "c1")
            .typed("p1", "Person")
            .typed("c1", "Country")
            .typed("u1", "University")
            .build()
            .unwrap();
        let schema = SchemaGraph::build(&hin);
        let seed = MetaPath::from_labels(
            &hin,
            &["Person".into(), "Country".into()],
            &["livesIn".into()],
        )
        .unwrap();
        let seed2 = MetaPath::from_labels(
            &hin,
            &["Person".into(), "Country".into()],
            &["isCitizenOf".into()],
        )
        .unwrap();
        let seed3 = MetaPath::from_labels(
            &hin,
            &["University".into(), "Country".into()],
            &["locatedIn".into()],
        )
        .unwrap();
        let catalog = build_catalog(&hin, &[seed, seed2, seed3], 0, 0.5);
        let rq = hin.relation_id("isCitizenOf").unwrap();
        (hin, schema, catalog, rq)
    }

    fn seq(tokens: &[&str]) -> Vec<String> {
        tokens.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn valid_sequence_passes_without_correction() {
        let (hin, schema, catalog, rq) = context();
        let report = clean(
            &hin,
            &schema,
            &catalog,
            &[seq(&["Person", "livesIn", "Country"])],
            rq,
            &CleanOptions::default(),
        );
        assert_eq!(report.accepted.len(), 1);
        assert_eq!(report.accepted_count, 1);
        assert_eq!(report.corrected_count, 0);
        assert_eq!(report.rejected.total(), 0);
        assert_eq!(report.error_rate(), 0.0);
    }

    #[test]
    fn near_miss_atom_is_corrected() {
        let (hin, schema, catalog, rq) = context();
        let report = clean(
            &hin,
            &schema,
            &catalog,
            &[seq(&["Person", "Citizenship", "Country"])],
            rq,
            &CleanOptions {
                min_similarity: 0.5,
                ..CleanOptions::default()
            },
        );
        // "Citizenship" corrects to isCitizenOf, but that restates the
        // target, so the sequence is rejected as trivial.
        assert_eq!(report.rejected.trivial_rq, 1);

        let report = clean(
            &hin,
            &schema,
            &catalog,
            &[seq(&["Person", "lives_in", "Country"])],
            rq,
            &CleanOptions::default(),
        );
        assert_eq!(report.accepted.len(), 1);
        assert_eq!(report.corrected_count, 1);
        assert_eq!(report.accepted[0].render(&hin), "Person -[livesIn]-> Country");
    }

    #[test]
    fn gibberish_atom_is_rejected_unknown() {
        let (hin, schema, catalog, rq) = context();
        let report = clean(
            &hin,
            &schema,
            &catalog,
            &[seq(&["Person", "qzxv", "Country"])],
            rq,
            &CleanOptions::default(),
        );
        assert_eq!(report.rejected.unknown_atom, 1);
        assert!(report.accepted.is_empty());
    }

    #[test]
    fn schema_unsupported_step_is_rejected() {
        let (hin, schema, catalog, rq) = context();
        let report = clean(
            &hin,
            &schema,
            &catalog,
            &[seq(&["Person", "locatedIn", "University"])],
            rq,
            &CleanOptions::default(),
        );
        assert_eq!(report.rejected.invalid_step, 1);
    }

    #[test]
    fn overlength_and_malformed_are_flagged() {
        let (hin, schema, catalog, rq) = context();
        let report = clean(
            &hin,
            &schema,
            &catalog,
            &[
                seq(&[
                    "Person", "livesIn", "Country", "locatedIn^-1", "University", "locatedIn",
                    "Country",
                ]),
                seq(&["Person", "livesIn"]),
            ],
            rq,
            &CleanOptions {
                max_length: 3,
                ..CleanOptions::default()
            },
        );
        assert_eq!(report.rejected.overlength, 1);
        assert_eq!(report.rejected.malformed, 1);
    }

    #[test]
    fn duplicates_count_as_accepted_but_appear_once() {
        let (hin, schema, catalog, rq) = context();
        let line = seq(&["Person", "livesIn", "Country"]);
        let report = clean(
            &hin,
            &schema,
            &catalog,
            &[line.clone(), line],
            rq,
            &CleanOptions::default(),
        );
        assert_eq!(report.accepted.len(), 1);
        assert_eq!(report.accepted_count, 2);
    }

    #[test]
    fn cleaning_accepted_output_is_idempotent() {
        let (hin, schema, catalog, rq) = context();
        let report = clean(
            &hin,
            &schema,
            &catalog,
            &[
                seq(&["Person", "lives_in", "Country"]),
                seq(&["University", "locatedIn", "Country"]),
            ],
            rq,
            &CleanOptions::default(),
        );
        let rendered: Vec<Vec<String>> = report
            .accepted
            .iter()
            .map(|m| {
                let (types, relations) = m.labels(&hin);
                let mut tokens = vec![types[0].clone()];
                for (i, r) in relations.iter().enumerate() {
                    tokens.push(r.clone());
                    tokens.push(types[i + 1].clone());
                }
                tokens
            })
            .collect();
        let again = clean(&hin, &schema, &catalog, &rendered, rq, &CleanOptions::default());
        assert_eq!(again.accepted.len(), report.accepted.len());
        assert_eq!(again.corrected_count, 0);
        assert_eq!(again.rejected.total(), 0);
    }
}
