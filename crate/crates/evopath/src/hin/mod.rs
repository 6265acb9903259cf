//! In-memory heterogeneous information network.
//!
//! Entities, typed facts and the type taxonomy are interned into dense
//! integer ids. The graph is immutable after construction; all mutation
//! paths (`augment_inverses`, `remove_entities`) build a new [`Hin`].

mod schema;
mod taxonomy;

pub use schema::SchemaGraph;
pub use taxonomy::Taxonomy;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use crate::error::{AtomKind, EvoPathError, Result};

/// Label of the synthetic root type. It is always interned first and is an
/// ancestor of every other type; untyped entities are assigned to it.
pub const ROOT_TYPE_LABEL: &str = "ROOT";

/// Suffix appended to a relation label to name its inverse.
pub const INVERSE_SUFFIX: &str = "^-1";

macro_rules! id_newtype {
    ($name:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        #[repr(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_newtype!(EntityId);
id_newtype!(TypeId);
id_newtype!(RelationId);

/// The synthetic root type id.
pub const ROOT_TYPE: TypeId = TypeId(0);

/// One directed, labeled edge of the instance graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fact {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Fact {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Fact { head, relation, tail }
    }

    /// Canonical order: (relation, head, tail), so facts of one relation
    /// form a contiguous run.
    fn key(&self) -> (RelationId, EntityId, EntityId) {
        (self.relation, self.head, self.tail)
    }
}

impl PartialOrd for Fact {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fact {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

/// A set of facts, used to mask edges (held-out test facts) during matching.
#[derive(Debug, Default, Clone)]
pub struct FactSet(HashSet<Fact>);

impl FactSet {
    pub fn new() -> Self {
        FactSet::default()
    }

    pub fn insert(&mut self, fact: Fact) -> bool {
        self.0.insert(fact)
    }

    /// Insert a fact together with its inverse twin (when the relation has
    /// one). Exclusion sets on augmented graphs must be closed under
    /// inversion or the masked fact stays reachable through the twin edge.
    pub fn insert_closed(&mut self, hin: &Hin, fact: Fact) {
        self.0.insert(fact);
        if let Some(twin) = hin.twin(&fact) {
            self.0.insert(twin);
        }
    }

    pub fn closed_from<I: IntoIterator<Item = Fact>>(hin: &Hin, facts: I) -> Self {
        let mut set = FactSet::new();
        for f in facts {
            set.insert_closed(hin, f);
        }
        set
    }

    #[inline]
    pub fn contains(&self, fact: &Fact) -> bool {
        self.0.contains(fact)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Fact> {
        self.0.iter()
    }
}

impl FromIterator<Fact> for FactSet {
    fn from_iter<I: IntoIterator<Item = Fact>>(iter: I) -> Self {
        FactSet(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Default)]
struct SymbolTable {
    labels: Vec<String>,
    ids: HashMap<String, u32>,
}

impl SymbolTable {
    fn intern(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.ids.get(label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.labels.push(label.to_owned());
        self.ids.insert(label.to_owned(), id);
        id
    }

    fn get(&self, label: &str) -> Option<u32> {
        self.ids.get(label).copied()
    }

    fn label(&self, id: u32) -> &str {
        &self.labels[id as usize]
    }

    fn len(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, Default)]
struct RelationTable {
    symbols: SymbolTable,
    inverse: Vec<Option<RelationId>>,
    is_inverse: Vec<bool>,
}

impl RelationTable {
    fn intern(&mut self, label: &str) -> RelationId {
        if let Some(id) = self.symbols.get(label) {
            return RelationId(id);
        }
        let id = RelationId(self.symbols.intern(label));
        self.inverse.push(None);
        self.is_inverse.push(false);
        // Wire base <-> inverse links when both spellings are present.
        if let Some(base_label) = label.strip_suffix(INVERSE_SUFFIX) {
            if let Some(base) = self.symbols.get(base_label) {
                self.link(RelationId(base), id);
            }
        } else {
            let inv_label = format!("{label}{INVERSE_SUFFIX}");
            if let Some(inv) = self.symbols.get(&inv_label) {
                self.link(id, RelationId(inv));
            }
        }
        id
    }

    fn link(&mut self, base: RelationId, inverse: RelationId) {
        self.inverse[base.index()] = Some(inverse);
        self.inverse[inverse.index()] = Some(base);
        self.is_inverse[inverse.index()] = true;
    }

    fn len(&self) -> usize {
        self.symbols.len()
    }
}

/// The instance graph: interned symbols, deduplicated facts with adjacency
/// indexes in both directions, per-entity type sets and the type taxonomy.
#[derive(Debug, Clone)]
pub struct Hin {
    entities: SymbolTable,
    types: SymbolTable,
    relations: RelationTable,
    taxonomy: Taxonomy,
    facts: Vec<Fact>,
    relation_ranges: Vec<Range<usize>>,
    out_edges: Vec<Vec<(RelationId, EntityId)>>,
    in_edges: Vec<Vec<(RelationId, EntityId)>>,
    declared: Vec<Vec<TypeId>>,
    closed: Vec<Vec<TypeId>>,
    by_closed_type: Vec<Vec<EntityId>>,
    augmented: bool,
}

impl Hin {
    pub fn builder() -> HinBuilder {
        HinBuilder::default()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn type_count(&self) -> usize {
        self.types.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }

    pub fn augmented(&self) -> bool {
        self.augmented
    }

    pub fn entity_id(&self, label: &str) -> Option<EntityId> {
        self.entities.get(label).map(EntityId)
    }

    pub fn type_id(&self, label: &str) -> Option<TypeId> {
        self.types.get(label).map(TypeId)
    }

    pub fn relation_id(&self, label: &str) -> Option<RelationId> {
        self.relations.symbols.get(label).map(RelationId)
    }

    pub fn entity_label(&self, id: EntityId) -> &str {
        self.entities.label(id.0)
    }

    pub fn type_label(&self, id: TypeId) -> &str {
        self.types.label(id.0)
    }

    pub fn relation_label(&self, id: RelationId) -> &str {
        self.relations.symbols.label(id.0)
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    /// Facts carrying `relation`, as a contiguous sorted slice.
    pub fn relation_facts(&self, relation: RelationId) -> &[Fact] {
        let range = self.relation_ranges[relation.index()].clone();
        &self.facts[range]
    }

    pub fn has_fact(&self, fact: &Fact) -> bool {
        self.relation_facts(fact.relation)
            .binary_search_by_key(&(fact.head, fact.tail), |f| (f.head, f.tail))
            .is_ok()
    }

    /// All out-edges of `entity`, sorted by (relation, tail).
    pub fn out_edges(&self, entity: EntityId) -> &[(RelationId, EntityId)] {
        &self.out_edges[entity.index()]
    }

    /// Tails reachable from `head` through `relation`.
    pub fn successors(&self, head: EntityId, relation: RelationId) -> &[(RelationId, EntityId)] {
        edge_range(&self.out_edges[head.index()], relation)
    }

    /// Heads pointing at `tail` through `relation`.
    pub fn predecessors(&self, tail: EntityId, relation: RelationId) -> &[(RelationId, EntityId)] {
        edge_range(&self.in_edges[tail.index()], relation)
    }

    /// Declared types of the entity (post root-fallback), sorted.
    pub fn declared_types(&self, entity: EntityId) -> &[TypeId] {
        &self.declared[entity.index()]
    }

    /// Ancestor closure of the declared types, sorted.
    pub fn closed_types(&self, entity: EntityId) -> &[TypeId] {
        &self.closed[entity.index()]
    }

    /// Type test used by matching: `ty` matches the entity when it is an
    /// ancestor-or-equal of one of its declared types. This is what makes
    /// LCA-summarized meta-paths matchable against their own instances.
    #[inline]
    pub fn matches_type(&self, entity: EntityId, ty: TypeId) -> bool {
        self.closed[entity.index()].binary_search(&ty).is_ok()
    }

    /// Entities matching `ty` under the ancestor-closure test, sorted.
    pub fn entities_with_type(&self, ty: TypeId) -> &[EntityId] {
        &self.by_closed_type[ty.index()]
    }

    /// Whether two entities share at least one declared type.
    pub fn declared_type_overlap(&self, a: EntityId, b: EntityId) -> bool {
        let (xs, ys) = (&self.declared[a.index()], &self.declared[b.index()]);
        let (mut i, mut j) = (0, 0);
        while i < xs.len() && j < ys.len() {
            match xs[i].cmp(&ys[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn inverse_of(&self, relation: RelationId) -> Option<RelationId> {
        self.relations.inverse[relation.index()]
    }

    pub fn is_inverse(&self, relation: RelationId) -> bool {
        self.relations.is_inverse[relation.index()]
    }

    /// Base relation of an inverse, or the relation itself.
    pub fn base_relation(&self, relation: RelationId) -> RelationId {
        if self.is_inverse(relation) {
            self.inverse_of(relation).unwrap_or(relation)
        } else {
            relation
        }
    }

    /// The inverse twin `(t, r^-1, h)` of a fact, when `r` is linked.
    pub fn twin(&self, fact: &Fact) -> Option<Fact> {
        self.inverse_of(fact.relation)
            .map(|inv| Fact::new(fact.tail, inv, fact.head))
    }

    /// Whether the entity still takes part in the graph. Entities dropped by
    /// [`Hin::remove_entities`] stay interned but lose all types and facts.
    pub fn entity_is_present(&self, entity: EntityId) -> bool {
        !self.declared[entity.index()].is_empty()
            || !self.out_edges[entity.index()].is_empty()
            || !self.in_edges[entity.index()].is_empty()
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> {
        (0..self.entities.len() as u32).map(EntityId)
    }

    pub fn type_ids(&self) -> impl Iterator<Item = TypeId> {
        (0..self.types.len() as u32).map(TypeId)
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> {
        (0..self.relations.len() as u32).map(RelationId)
    }

    /// Materialize inverse relations: for every fact `(h, r, t)` add
    /// `(t, r^-1, h)`. Fails when called twice.
    pub fn augment_inverses(mut self) -> Result<Hin> {
        if self.augmented {
            return Err(EvoPathError::AlreadyAugmented);
        }
        for r in 0..self.relations.len() as u32 {
            if self.relations.inverse[r as usize].is_none() {
                let label = format!(
                    "{}{INVERSE_SUFFIX}",
                    self.relations.symbols.label(r)
                );
                self.relations.intern(&label);
            }
        }
        let twins: Vec<Fact> = self
            .facts
            .iter()
            .map(|f| self.twin(f).expect("all relations linked"))
            .collect();
        self.facts.extend(twins);
        self.augmented = true;
        self.finalize();
        Ok(self)
    }

    /// Drop the given entities: all their incident facts and type
    /// declarations are removed; the ids stay interned but inert.
    pub fn remove_entities(&self, removed: &HashSet<EntityId>) -> Hin {
        let mut masked = self.clone();
        masked.facts.retain(|f| !removed.contains(&f.head) && !removed.contains(&f.tail));
        for &e in removed {
            masked.declared[e.index()].clear();
        }
        masked.finalize();
        masked
    }

    /// Rebuild the derived indexes from `facts`, `declared` and the taxonomy.
    fn finalize(&mut self) {
        self.facts.sort_unstable();
        self.facts.dedup();

        let n_rel = self.relations.len();
        self.relation_ranges = vec![0..0; n_rel];
        let mut start = 0;
        for r in 0..n_rel {
            let rid = RelationId(r as u32);
            let end = start
                + self.facts[start..]
                    .iter()
                    .take_while(|f| f.relation == rid)
                    .count();
            self.relation_ranges[r] = start..end;
            start = end;
        }

        let n_ent = self.entities.len();
        self.out_edges = vec![Vec::new(); n_ent];
        self.in_edges = vec![Vec::new(); n_ent];
        for f in &self.facts {
            self.out_edges[f.head.index()].push((f.relation, f.tail));
            self.in_edges[f.tail.index()].push((f.relation, f.head));
        }
        for list in self.out_edges.iter_mut().chain(self.in_edges.iter_mut()) {
            list.sort_unstable();
        }

        for list in self.declared.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        self.closed = self
            .declared
            .iter()
            .map(|tys| {
                let mut closure: Vec<TypeId> = tys
                    .iter()
                    .flat_map(|&t| self.taxonomy.ancestors_or_self(t).iter().copied())
                    .collect();
                closure.sort_unstable();
                closure.dedup();
                closure
            })
            .collect();
        self.by_closed_type = vec![Vec::new(); self.types.len()];
        for (e, closure) in self.closed.iter().enumerate() {
            for &t in closure {
                self.by_closed_type[t.index()].push(EntityId(e as u32));
            }
        }
    }

    /// Write the graph back to its three tabular files. Loading the result
    /// reproduces the same fact set and type assignments.
    pub fn save(&self, facts: &Path, types: &Path, dag: Option<&Path>) -> Result<()> {
        let mut fw = BufWriter::new(File::create(facts)?);
        for f in &self.facts {
            writeln!(
                fw,
                "{}\t{}\t{}",
                self.entity_label(f.head),
                self.relation_label(f.relation),
                self.entity_label(f.tail)
            )?;
        }
        fw.flush()?;

        let mut tw = BufWriter::new(File::create(types)?);
        for e in self.entity_ids() {
            for &t in self.declared_types(e) {
                writeln!(tw, "{}\t{}", self.entity_label(e), self.type_label(t))?;
            }
        }
        tw.flush()?;

        if let Some(dag) = dag {
            let mut dw = BufWriter::new(File::create(dag)?);
            for t in self.type_ids() {
                for &p in self.taxonomy.parents(t) {
                    if p != ROOT_TYPE {
                        writeln!(dw, "{}\t{}", self.type_label(t), self.type_label(p))?;
                    }
                }
            }
            dw.flush()?;
        }
        Ok(())
    }
}

fn edge_range(edges: &[(RelationId, EntityId)], relation: RelationId) -> &[(RelationId, EntityId)] {
    let lo = edges.partition_point(|&(r, _)| r < relation);
    let hi = edges.partition_point(|&(r, _)| r <= relation);
    &edges[lo..hi]
}

/// Accumulates raw label rows and builds the interned graph.
#[derive(Debug, Default, Clone)]
pub struct HinBuilder {
    facts: Vec<(String, String, String)>,
    types: Vec<(String, String)>,
    dag: Vec<(String, String)>,
}

impl HinBuilder {
    pub fn fact(mut self, head: &str, relation: &str, tail: &str) -> Self {
        self.facts.push((head.into(), relation.into(), tail.into()));
        self
    }

    pub fn typed(mut self, entity: &str, ty: &str) -> Self {
        self.types.push((entity.into(), ty.into()));
        self
    }

    pub fn subtype(mut self, child: &str, parent: &str) -> Self {
        self.dag.push((child.into(), parent.into()));
        self
    }

    pub fn add_fact_row(&mut self, head: &str, relation: &str, tail: &str) {
        self.facts.push((head.into(), relation.into(), tail.into()));
    }

    pub fn add_type_row(&mut self, entity: &str, ty: &str) {
        self.types.push((entity.into(), ty.into()));
    }

    pub fn add_dag_row(&mut self, child: &str, parent: &str) {
        self.dag.push((child.into(), parent.into()));
    }

    pub fn build(self) -> Result<Hin> {
        let mut types = SymbolTable::default();
        types.intern(ROOT_TYPE_LABEL);

        let mut dag_edges: Vec<(TypeId, TypeId)> = Vec::new();
        for (child, parent) in &self.dag {
            let c = TypeId(types.intern(child));
            let p = TypeId(types.intern(parent));
            dag_edges.push((c, p));
        }

        let mut entities = SymbolTable::default();
        let mut declared_map: Vec<Vec<TypeId>> = Vec::new();
        let mut declare = |entities: &mut SymbolTable,
                           declared_map: &mut Vec<Vec<TypeId>>,
                           label: &str|
         -> EntityId {
            let id = entities.intern(label);
            if id as usize >= declared_map.len() {
                declared_map.push(Vec::new());
            }
            EntityId(id)
        };

        for (entity, ty) in &self.types {
            let e = declare(&mut entities, &mut declared_map, entity);
            let t = TypeId(types.intern(ty));
            declared_map[e.index()].push(t);
        }

        let mut relations = RelationTable::default();
        let mut facts = Vec::with_capacity(self.facts.len());
        for (head, rel, tail) in &self.facts {
            let h = declare(&mut entities, &mut declared_map, head);
            let t = declare(&mut entities, &mut declared_map, tail);
            let r = relations.intern(rel);
            facts.push(Fact::new(h, r, t));
        }

        for tys in declared_map.iter_mut() {
            if tys.is_empty() {
                tys.push(ROOT_TYPE);
            }
        }

        let taxonomy = Taxonomy::build(types.len(), &dag_edges).map_err(|cycle_member| {
            EvoPathError::TaxonomyCycle {
                type_label: types.label(cycle_member.0).to_owned(),
            }
        })?;

        let mut hin = Hin {
            entities,
            types,
            relations,
            taxonomy,
            facts,
            relation_ranges: Vec::new(),
            out_edges: Vec::new(),
            in_edges: Vec::new(),
            declared: declared_map,
            closed: Vec::new(),
            by_closed_type: Vec::new(),
            augmented: false,
        };
        hin.finalize();
        Ok(hin)
    }
}

/// Load a graph from tab-separated files: facts as `head<TAB>relation<TAB>tail`,
/// types as `entity<TAB>type`, and an optional taxonomy as
/// `child_type<TAB>parent_type`. Blank lines and `#` comments are skipped.
pub fn load_hin(facts: &Path, types: &Path, dag: Option<&Path>) -> Result<Hin> {
    let mut builder = HinBuilder::default();
    read_rows(facts, 3, |cols| {
        builder.add_fact_row(cols[0], cols[1], cols[2]);
    })?;
    read_rows(types, 2, |cols| {
        builder.add_type_row(cols[0], cols[1]);
    })?;
    if let Some(dag) = dag {
        read_rows(dag, 2, |cols| {
            builder.add_dag_row(cols[0], cols[1]);
        })?;
    }
    builder.build()
}

fn read_rows(path: &Path, columns: usize, mut row: impl FnMut(&[&str])) -> Result<()> {
    let file = File::open(path).map_err(|e| {
        EvoPathError::Parse {
            file: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        }
    })?;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split('\t').collect();
        if cols.len() != columns || cols.iter().any(|c| c.is_empty()) {
            return Err(EvoPathError::Parse {
                file: path.display().to_string(),
                line: idx + 1,
                message: format!(
                    "expected {columns} tab-separated columns, found {}",
                    cols.len()
                ),
            });
        }
        row(&cols);
    }
    Ok(())
}

/// Convenience for error construction in other modules.
pub fn unknown_atom(kind: AtomKind, label: &str) -> EvoPathError {
    EvoPathError::UnknownAtom {
        kind,
        label: label.to_owned(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn micro() -> Hin {
        Hin::builder()
            .fact("a", "livesIn", "c1")
            .fact("b", "livesIn", "c1")
            .fact("a", "citizenOf", "c1")
            .fact("c", "citizenOf", "c2")
            .typed("a", "Person")
            .typed("b", "Person")
            .typed("c", "Person")
            .typed("c1", "Country")
            .typed("c2", "Country")
            .build()
            .unwrap()
    }

    #[test]
    fn duplicate_facts_are_deduped() {
        let hin = Hin::builder()
            .fact("a", "r", "b")
            .fact("b", "r", "c")
            .fact("a", "r", "b")
            .fact("a", "s", "b")
            .typed("a", "T")
            .build()
            .unwrap();
        assert_eq!(hin.fact_count(), 3);
    }

    #[test]
    fn untyped_entity_gets_root() {
        let hin = Hin::builder().fact("a", "r", "b").build().unwrap();
        let a = hin.entity_id("a").unwrap();
        assert_eq!(hin.declared_types(a), &[ROOT_TYPE]);
        assert!(hin.matches_type(a, ROOT_TYPE));
    }

    #[test]
    fn dag_cycle_is_rejected() {
        let err = Hin::builder()
            .subtype("A", "B")
            .subtype("B", "A")
            .build()
            .unwrap_err();
        match err {
            EvoPathError::TaxonomyCycle { type_label } => {
                assert!(type_label == "A" || type_label == "B");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn augmentation_doubles_facts_and_links_inverses() {
        let hin = Hin::builder()
            .fact("a", "locatedIn", "b")
            .fact("b", "r", "c")
            .fact("c", "r", "a")
            .build()
            .unwrap();
        let hin = hin.augment_inverses().unwrap();
        assert_eq!(hin.fact_count(), 6);
        let r = hin.relation_id("locatedIn").unwrap();
        let inv = hin.inverse_of(r).unwrap();
        assert_eq!(hin.relation_label(inv), "locatedIn^-1");
        assert!(hin.is_inverse(inv));
        assert!(!hin.is_inverse(r));
        assert_eq!(hin.inverse_of(inv), Some(r));
        assert_eq!(hin.base_relation(inv), r);
    }

    #[test]
    fn symmetric_pair_gets_both_inverse_twins() {
        let hin = Hin::builder()
            .fact("a", "r", "b")
            .fact("b", "r", "a")
            .build()
            .unwrap()
            .augment_inverses()
            .unwrap();
        assert_eq!(hin.fact_count(), 4);
        let r = hin.relation_id("r").unwrap();
        let inv = hin.inverse_of(r).unwrap();
        let a = hin.entity_id("a").unwrap();
        let b = hin.entity_id("b").unwrap();
        assert!(hin.has_fact(&Fact::new(b, inv, a)));
        assert!(hin.has_fact(&Fact::new(a, inv, b)));
    }

    #[test]
    fn double_augmentation_errors() {
        let hin = Hin::builder().fact("a", "r", "b").build().unwrap();
        let hin = hin.augment_inverses().unwrap();
        assert!(matches!(
            hin.augment_inverses(),
            Err(EvoPathError::AlreadyAugmented)
        ));
    }

    #[test]
    fn stripping_inverses_recovers_original_facts() {
        let hin = micro();
        let before: Vec<Fact> = hin.facts().to_vec();
        let aug = hin.augment_inverses().unwrap();
        let stripped: Vec<Fact> = aug
            .facts()
            .iter()
            .filter(|f| !aug.is_inverse(f.relation))
            .copied()
            .collect();
        assert_eq!(before, stripped);
    }

    #[test]
    fn matches_type_uses_ancestor_closure() {
        let hin = Hin::builder()
            .fact("einstein", "worksAt", "eth")
            .typed("einstein", "Scientist")
            .typed("eth", "University")
            .subtype("Scientist", "Person")
            .build()
            .unwrap();
        let e = hin.entity_id("einstein").unwrap();
        let person = hin.type_id("Person").unwrap();
        let scientist = hin.type_id("Scientist").unwrap();
        assert!(hin.matches_type(e, scientist));
        assert!(hin.matches_type(e, person));
        assert!(hin.matches_type(e, ROOT_TYPE));
        assert_eq!(hin.declared_types(e), &[scientist]);
    }

    #[test]
    fn remove_entities_drops_facts_and_types() {
        let hin = micro();
        let a = hin.entity_id("a").unwrap();
        let masked = hin.remove_entities(&[a].into_iter().collect());
        assert!(!masked.entity_is_present(a));
        assert_eq!(masked.fact_count(), 2);
        assert!(hin.entity_is_present(a));
    }

    #[test]
    fn comment_and_blank_lines_are_skipped() {
        let dir = std::env::temp_dir().join(format!("evopath-hin-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let facts = dir.join("facts.tsv");
        let types = dir.join("types.tsv");
        std::fs::write(&facts, "# comment\na\tr\tb\n\na\tr\tb\n").unwrap();
        std::fs::write(&types, "a\tT\n").unwrap();
        let hin = load_hin(&facts, &types, None).unwrap();
        assert_eq!(hin.fact_count(), 1);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = std::env::temp_dir().join(format!("evopath-hin-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let facts = dir.join("facts.tsv");
        let types = dir.join("types.tsv");
        std::fs::write(&facts, "a\tr\tb\nbad row\n").unwrap();
        std::fs::write(&types, "a\tT\n").unwrap();
        match load_hin(&facts, &types, None) {
            Err(EvoPathError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected: {other:?}"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
