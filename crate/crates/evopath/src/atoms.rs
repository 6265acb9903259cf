//! Candidate taxonomy construction: atoms extracted from seed meta-paths,
//! expanded by Gestalt string similarity against the full vocabularies.

use std::collections::HashSet;

use crate::hin::{Hin, RelationId, TypeId, INVERSE_SUFFIX};
use crate::metapath::MetaPath;

/// Ratcliff-Obershelp similarity in [0, 1]: twice the total number of
/// characters matched by recursive longest-common-substring decomposition,
/// over the combined length. Comparison is case-insensitive, and the
/// argument pair is put into a canonical order first so the result is
/// symmetric (the classic formulation is not when anchor choices differ).
pub fn gestalt_similarity(a: &str, b: &str) -> f64 {
    let a_lc = a.to_lowercase();
    let b_lc = b.to_lowercase();
    if a_lc.is_empty() && b_lc.is_empty() {
        return 1.0;
    }
    let (first, second) = if a_lc <= b_lc { (&a_lc, &b_lc) } else { (&b_lc, &a_lc) };
    let x: Vec<char> = first.chars().collect();
    let y: Vec<char> = second.chars().collect();
    let matched = matched_chars(&x, &y);
    2.0 * matched as f64 / (x.len() + y.len()) as f64
}

fn matched_chars(a: &[char], b: &[char]) -> usize {
    let mut total = 0;
    let mut stack = vec![(0usize, a.len(), 0usize, b.len())];
    while let Some((alo, ahi, blo, bhi)) = stack.pop() {
        if alo >= ahi || blo >= bhi {
            continue;
        }
        let (bi, bj, size) = longest_match(a, b, alo, ahi, blo, bhi);
        if size == 0 {
            continue;
        }
        total += size;
        stack.push((alo, bi, blo, bj));
        stack.push((bi + size, ahi, bj + size, bhi));
    }
    total
}

/// Longest matching block within the given windows, preferring the earliest
/// end in `a` and then the earliest position in `b` on ties.
fn longest_match(
    a: &[char],
    b: &[char],
    alo: usize,
    ahi: usize,
    blo: usize,
    bhi: usize,
) -> (usize, usize, usize) {
    use std::collections::HashMap;
    let mut b_positions: HashMap<char, Vec<usize>> = HashMap::new();
    for (j, &ch) in b.iter().enumerate().take(bhi).skip(blo) {
        b_positions.entry(ch).or_default().push(j);
    }
    let (mut best_i, mut best_j, mut best_size) = (alo, blo, 0usize);
    let mut ending_here: HashMap<usize, usize> = HashMap::new();
    for i in alo..ahi {
        let mut next: HashMap<usize, usize> = HashMap::new();
        if let Some(js) = b_positions.get(&a[i]) {
            for &j in js {
                let k = if j > blo {
                    ending_here.get(&(j - 1)).copied().unwrap_or(0) + 1
                } else {
                    1
                };
                next.insert(j, k);
                if k > best_size {
                    best_i = i + 1 - k;
                    best_j = j + 1 - k;
                    best_size = k;
                }
            }
        }
        ending_here = next;
    }
    (best_i, best_j, best_size)
}

/// Label used when comparing relations: inverses compare by their base
/// label so the `^-1` suffix does not distort similarity.
pub fn relation_compare_label(label: &str) -> &str {
    label.strip_suffix(INVERSE_SUFFIX).unwrap_or(label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomProvenance {
    Extracted,
    Expanded,
}

/// Ordered candidate vocabularies handed to the generator: seed atoms in
/// extraction order, then similarity expansions (score descending, label as
/// tiebreak).
#[derive(Debug, Clone, Default)]
pub struct AtomCatalog {
    types: Vec<(TypeId, AtomProvenance)>,
    relations: Vec<(RelationId, AtomProvenance)>,
    type_set: HashSet<TypeId>,
    relation_set: HashSet<RelationId>,
}

impl AtomCatalog {
    pub fn contains_type(&self, t: TypeId) -> bool {
        self.type_set.contains(&t)
    }

    pub fn contains_relation(&self, r: RelationId) -> bool {
        self.relation_set.contains(&r)
    }

    pub fn types(&self) -> impl Iterator<Item = TypeId> + '_ {
        self.types.iter().map(|&(t, _)| t)
    }

    pub fn relations(&self) -> impl Iterator<Item = RelationId> + '_ {
        self.relations.iter().map(|&(r, _)| r)
    }

    pub fn type_entries(&self) -> &[(TypeId, AtomProvenance)] {
        &self.types
    }

    pub fn relation_entries(&self) -> &[(RelationId, AtomProvenance)] {
        &self.relations
    }

    pub fn type_count(&self) -> usize {
        self.types.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn type_labels(&self, hin: &Hin) -> Vec<String> {
        self.types().map(|t| hin.type_label(t).to_owned()).collect()
    }

    pub fn relation_labels(&self, hin: &Hin) -> Vec<String> {
        self.relations()
            .map(|r| hin.relation_label(r).to_owned())
            .collect()
    }

    fn push_type(&mut self, t: TypeId, provenance: AtomProvenance) -> bool {
        if self.type_set.insert(t) {
            self.types.push((t, provenance));
            true
        } else {
            false
        }
    }

    fn push_relation(&mut self, r: RelationId, provenance: AtomProvenance) -> bool {
        if self.relation_set.insert(r) {
            self.relations.push((r, provenance));
            true
        } else {
            false
        }
    }

    /// Two-column inspection dump: label and provenance, types first.
    pub fn dump(&self, hin: &Hin) -> String {
        let mut out = String::from("# types\n");
        for &(t, p) in &self.types {
            out.push_str(&format!("{}\t{}\n", hin.type_label(t), provenance_str(p)));
        }
        out.push_str("# relations\n");
        for &(r, p) in &self.relations {
            out.push_str(&format!("{}\t{}\n", hin.relation_label(r), provenance_str(p)));
        }
        out
    }
}

fn provenance_str(p: AtomProvenance) -> &'static str {
    match p {
        AtomProvenance::Extracted => "extracted",
        AtomProvenance::Expanded => "expanded",
    }
}

/// Extract every atom from the seed meta-paths (in order of appearance
/// along each path), then expand each extracted atom with up to
/// `expand_top_k` vocabulary atoms at similarity >= `min_similarity`.
pub fn build_catalog(
    hin: &Hin,
    seeds: &[MetaPath],
    expand_top_k: usize,
    min_similarity: f64,
) -> AtomCatalog {
    let mut catalog = AtomCatalog::default();
    for seed in seeds {
        let types = seed.types();
        let relations = seed.relations();
        catalog.push_type(types[0], AtomProvenance::Extracted);
        for (i, &r) in relations.iter().enumerate() {
            catalog.push_relation(r, AtomProvenance::Extracted);
            catalog.push_type(types[i + 1], AtomProvenance::Extracted);
        }
    }

    if expand_top_k == 0 {
        return catalog;
    }

    let extracted_types: Vec<TypeId> = catalog.types().collect();
    for t in extracted_types {
        let anchor = hin.type_label(t);
        let mut scored: Vec<(f64, &str, TypeId)> = hin
            .type_ids()
            .filter(|c| !catalog.contains_type(*c))
            .map(|c| {
                let label = hin.type_label(c);
                (gestalt_similarity(anchor, label), label, c)
            })
            .filter(|(s, _, _)| *s >= min_similarity)
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
        for (_, _, c) in scored.into_iter().take(expand_top_k) {
            catalog.push_type(c, AtomProvenance::Expanded);
        }
    }

    let extracted_relations: Vec<RelationId> = catalog.relations().collect();
    for r in extracted_relations {
        let anchor = relation_compare_label(hin.relation_label(r)).to_owned();
        let mut scored: Vec<(f64, &str, RelationId)> = hin
            .relation_ids()
            .filter(|c| !catalog.contains_relation(*c))
            .map(|c| {
                let label = hin.relation_label(c);
                (
                    gestalt_similarity(&anchor, relation_compare_label(label)),
                    label,
                    c,
                )
            })
            .filter(|(s, _, _)| *s >= min_similarity)
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
        for (_, _, c) in scored.into_iter().take(expand_top_k) {
            catalog.push_relation(c, AtomProvenance::Expanded);
        }
    }

    catalog
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::Hin;

    #[test]
    fn identical_strings_score_one() {
        assert_eq!(gestalt_similarity("abc", "abc"), 1.0);
        assert_eq!(gestalt_similarity("", ""), 1.0);
    }

    #[test]
    fn disjoint_alphabets_score_zero() {
        assert_eq!(gestalt_similarity("abc", "xyz"), 0.0);
    }

    #[test]
    fn citizenship_example() {
        assert_eq!(gestalt_similarity("iscitizenof", "citizenof"), 0.9);
    }

    #[test]
    fn similarity_is_case_insensitive_and_symmetric() {
        assert_eq!(gestalt_similarity("LivesIn", "livesin"), 1.0);
        let a = "GESTALT PATTERN MATCHING";
        let b = "GESTALT PRACTICE";
        assert_eq!(gestalt_similarity(a, b), gestalt_similarity(b, a));
    }

    fn vocab_hin() -> Hin {
        Hin::builder()
            .fact("x", "livesIn", "y")
            .fact("x", "residesIn", "y")
            .fact("x", "bornIn", "y")
            .fact("x", "hasCurrency", "y")
            .typed("x", "Person")
            .typed("y", "Country")
            .build()
            .unwrap()
    }

    fn seed(hin: &Hin) -> MetaPath {
        MetaPath::from_labels(
            hin,
            &["Person".into(), "Country".into()],
            &["livesIn".into()],
        )
        .unwrap()
    }

    #[test]
    fn no_expansion_keeps_extracted_atoms_only() {
        let hin = vocab_hin();
        let catalog = build_catalog(&hin, &[seed(&hin)], 0, 0.5);
        assert_eq!(catalog.type_labels(&hin), vec!["Person", "Country"]);
        assert_eq!(catalog.relation_labels(&hin), vec!["livesIn"]);
    }

    #[test]
    fn expansion_ranks_by_similarity() {
        let hin = vocab_hin();
        let catalog = build_catalog(&hin, &[seed(&hin)], 2, 0.5);
        let labels = catalog.relation_labels(&hin);
        assert_eq!(labels[0], "livesIn");
        // residesIn is closest to livesIn; hasCurrency is below threshold.
        assert!(labels.contains(&"residesIn".to_string()));
        assert!(!labels.contains(&"hasCurrency".to_string()));
    }

    #[test]
    fn saturated_vocabulary_adds_nothing() {
        let hin = Hin::builder()
            .fact("x", "livesIn", "y")
            .typed("x", "Person")
            .typed("y", "Country")
            .build()
            .unwrap();
        let catalog = build_catalog(&hin, &[seed(&hin)], 5, 0.0);
        // ROOT is the only type outside the seeds and scores 0 against both.
        assert_eq!(catalog.relation_count(), 1);
    }

    #[test]
    fn raising_threshold_never_grows_the_catalog() {
        let hin = vocab_hin();
        let low = build_catalog(&hin, &[seed(&hin)], 3, 0.3);
        let high = build_catalog(&hin, &[seed(&hin)], 3, 0.8);
        assert!(high.relation_count() <= low.relation_count());
        assert!(high.type_count() <= low.type_count());
    }
}
