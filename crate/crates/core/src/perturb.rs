//! KG perturbation operators.
//!
//! Every operator is a pure function of `(graph, parameters, random stream)`.
//! Ratio-based operators never touch placeholder self-loops (see
//! [`add_self_loop_placeholders`]): those facts are excluded from every
//! selection pool and always survive.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{self, Interaction, InteractionDataset, LinkTable};
use crate::error::{Error, Result};
use crate::kg::{EntityId, Fact, ItemId, KnowledgeGraph, RelationId};
use crate::rng::{RngStream, STREAM_ALGORITHM};

/// Label of the relation used for placeholder self-loops and Self KG facts.
pub const SELF_RELATION: &str = "self_to_self";
pub const INTERACT: &str = "interact";
/// Reverse interaction relation. Also known as `interact_tans`.
pub const INTERACT_TRANS: &str = "interact_trans";

/// `round(ratio * pool)` with halves rounded up, clamped to `pool`.
pub fn selection_count(ratio: f64, pool: usize) -> usize {
    // tolerance absorbs products such as 0.3 * 5 = 1.4999999999999998
    let n = (ratio * pool as f64 + 0.5 + 1e-9).floor();
    (n.max(0.0) as usize).min(pool)
}

fn check_ratio(ratio: f64) -> Result<()> {
    if (0.0..=1.0).contains(&ratio) {
        Ok(())
    } else {
        Err(Error::InvalidRatio(ratio))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbKind {
    InteractionKg,
    SelfKg,
    Distort,
    DeleteFacts,
    DeleteEntities,
    DeleteRelations,
    RemoveRelationType,
}

impl PerturbKind {
    pub fn is_ratio_based(self) -> bool {
        matches!(
            self,
            Self::Distort | Self::DeleteFacts | Self::DeleteEntities | Self::DeleteRelations
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::InteractionKg => "interaction_kg",
            Self::SelfKg => "self_kg",
            Self::Distort => "distort",
            Self::DeleteFacts => "delete_facts",
            Self::DeleteEntities => "delete_entities",
            Self::DeleteRelations => "delete_relations",
            Self::RemoveRelationType => "remove_relation_type",
        }
    }
}

impl fmt::Display for PerturbKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for PerturbKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "interaction_kg" => Self::InteractionKg,
            "self_kg" => Self::SelfKg,
            "distort" => Self::Distort,
            "delete_facts" => Self::DeleteFacts,
            "delete_entities" => Self::DeleteEntities,
            "delete_relations" => Self::DeleteRelations,
            "remove_relation_type" => Self::RemoveRelationType,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown perturbation kind `{other}`"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub kind: PerturbKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_relation: Option<RelationId>,
}

impl PerturbSpec {
    pub fn ratio(kind: PerturbKind, ratio: f64) -> Result<Self> {
        let spec = Self {
            kind,
            ratio: Some(ratio),
            target_relation: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn remove_relation(r: RelationId) -> Self {
        Self {
            kind: PerturbKind::RemoveRelationType,
            ratio: None,
            target_relation: Some(r),
        }
    }

    pub fn regime(kind: PerturbKind) -> Result<Self> {
        let spec = Self {
            kind,
            ratio: None,
            target_relation: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.is_ratio_based() != self.ratio.is_some() {
            return Err(Error::InvalidArgument(format!(
                "{}: ratio must be given iff the kind is ratio-based",
                self.kind
            )));
        }
        if (self.kind == PerturbKind::RemoveRelationType) != self.target_relation.is_some() {
            return Err(Error::InvalidArgument(format!(
                "{}: target_relation must be given iff kind is remove_relation_type",
                self.kind
            )));
        }
        if let Some(r) = self.ratio {
            check_ratio(r)?;
        }
        Ok(())
    }

    /// Apply a graph-only operator. The regime kinds need interactions; use
    /// [`to_interaction_kg`] / [`to_self_kg`] for those.
    pub fn apply(&self, kg: &KnowledgeGraph, stream: &RngStream) -> Result<KnowledgeGraph> {
        self.validate()?;
        let ratio = self.ratio.unwrap_or(0.0);
        match self.kind {
            PerturbKind::Distort => distort(kg, ratio, stream),
            PerturbKind::DeleteFacts => delete_facts(kg, ratio, stream),
            PerturbKind::DeleteEntities => delete_entities(kg, ratio, stream, &BTreeSet::new()),
            PerturbKind::DeleteRelations => delete_relations(kg, ratio, stream),
            PerturbKind::RemoveRelationType => {
                remove_relation_type(kg, self.target_relation.expect("validated"))
            }
            PerturbKind::InteractionKg | PerturbKind::SelfKg => Err(Error::InvalidArgument(
                format!("{} is built from interactions, not from a graph", self.kind),
            )),
        }
    }
}

/// A replacement graph together with the link table that points items into it.
#[derive(Debug, Clone)]
pub struct RegimeGraph {
    pub kg: KnowledgeGraph,
    pub links: LinkTable,
}

fn item_node_label(ds: &InteractionDataset, source: &KnowledgeGraph, item: ItemId) -> String {
    match ds.links.entity(item) {
        Some(e) if e.index() < source.entity_count() => source.entity_label(e).to_string(),
        _ => ds.item_labels[item.index()].clone(),
    }
}

/// Interaction KG: `<u, interact, i>` and `<i, interact_trans, u>` for every
/// training interaction.
///
/// Entities `0..n_items` are the item nodes (labelled like the item's entity
/// in `source`), followed by one node per user labelled `user:<token>`.
/// The returned link table maps item `i` to entity `i`.
pub fn to_interaction_kg(
    train: &[Interaction],
    ds: &InteractionDataset,
    source: &KnowledgeGraph,
) -> Result<RegimeGraph> {
    let n_items = ds.item_count();
    let mut entity_labels: Vec<String> = (0..n_items)
        .map(|i| item_node_label(ds, source, ItemId::from_index(i)))
        .collect();
    entity_labels.extend(ds.user_labels.iter().map(|u| format!("user:{u}")));
    let user_node = |x: &Interaction| (n_items + x.user.index()) as u32;
    let mut facts = Vec::with_capacity(2 * train.len());
    for x in train {
        facts.push(Fact::new(user_node(x), 0, x.item.0));
        facts.push(Fact::new(x.item.0, 1, user_node(x)));
    }
    let kg = KnowledgeGraph::with_labels(
        facts,
        entity_labels,
        vec![INTERACT.to_string(), INTERACT_TRANS.to_string()],
    )?;
    let links = LinkTable::total((0..n_items).map(EntityId::from_index).collect())?;
    Ok(RegimeGraph { kg, links })
}

/// Self KG: one `<e, self_to_self, e>` per linked item.
///
/// Entities are the linked items' nodes, numbered in item order. The
/// self-loops double as placeholders (every node is protected), so the
/// ratio-based operators leave a Self KG unchanged.
pub fn to_self_kg(ds: &InteractionDataset, source: &KnowledgeGraph) -> Result<RegimeGraph> {
    let mut links = LinkTable::unlinked(ds.item_count());
    let mut labels = Vec::new();
    for (item, _) in ds.links.iter() {
        let e = EntityId::from_index(labels.len());
        labels.push(item_node_label(ds, source, item));
        links.set(item, e)?;
    }
    let facts = (0..labels.len() as u32).map(|e| Fact::new(e, 0, e)).collect();
    let mut kg = KnowledgeGraph::with_labels(facts, labels, vec![SELF_RELATION.to_string()])?;
    let protected = (0..kg.entity_count()).map(EntityId::from_index).collect();
    kg.set_placeholders(Some(RelationId(0)), protected);
    Ok(RegimeGraph { kg, links })
}

/// Add a `<e, self_to_self, e>` placeholder for every protected entity that
/// lacks one. The placeholder relation is reused if the graph already has
/// one (or a relation labelled `self_to_self`), otherwise appended.
pub fn add_self_loop_placeholders(
    kg: &KnowledgeGraph,
    protected: &BTreeSet<EntityId>,
) -> Result<KnowledgeGraph> {
    if let Some(e) = protected.iter().find(|e| e.index() >= kg.entity_count()) {
        return Err(Error::UnknownEntity(e.0));
    }
    let mut out = kg.clone();
    let relation = match kg
        .placeholder_relation()
        .or_else(|| kg.relation_by_label(SELF_RELATION))
    {
        Some(r) => r,
        None => out.push_relation(SELF_RELATION),
    };
    let mut all: BTreeSet<EntityId> = kg.protected_entities().clone();
    all.extend(protected.iter().copied());
    let existing: BTreeSet<EntityId> = kg
        .facts()
        .iter()
        .filter(|f| f.relation == relation && f.head == f.tail)
        .map(|f| f.head)
        .collect();
    let mut facts = kg.facts().to_vec();
    facts.extend(all.iter().filter(|e| !existing.contains(e)).map(|&e| Fact {
        head: e,
        relation,
        tail: e,
    }));
    let mut out = out.with_facts(facts);
    out.set_placeholders(Some(relation), all);
    Ok(out)
}

fn deletable_positions(kg: &KnowledgeGraph) -> Vec<usize> {
    kg.facts()
        .iter()
        .enumerate()
        .filter(|(_, f)| !kg.is_placeholder(f))
        .map(|(i, _)| i)
        .collect()
}

/// Replace `round(degree * n)` uniformly chosen non-placeholder facts by
/// `<h', r', t'>` with `h'`, `t'` uniform over all entities and `r'` uniform
/// over the non-placeholder relations, all drawn independently.
///
/// Positions are chosen first; replacements are then drawn in ascending
/// position order. A replacement may coincide with the original fact.
pub fn distort(kg: &KnowledgeGraph, degree: f64, stream: &RngStream) -> Result<KnowledgeGraph> {
    check_ratio(degree)?;
    let pool = deletable_positions(kg);
    let count = selection_count(degree, pool.len());
    if count == 0 {
        return Ok(kg.clone());
    }
    let mut relations: Vec<RelationId> = (0..kg.relation_count())
        .map(RelationId::from_index)
        .filter(|&r| Some(r) != kg.placeholder_relation())
        .collect();
    if relations.is_empty() {
        relations = (0..kg.relation_count()).map(RelationId::from_index).collect();
    }
    let mut rng = stream.rng();
    let mut chosen: Vec<usize> = rng
        .sample_indices(pool.len(), count)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    chosen.sort_unstable();
    let n_entities = kg.entity_count();
    let mut facts = kg.facts().to_vec();
    for pos in chosen {
        let head = EntityId::from_index(rng.below(n_entities));
        let relation = relations[rng.below(relations.len())];
        let tail = EntityId::from_index(rng.below(n_entities));
        facts[pos] = Fact {
            head,
            relation,
            tail,
        };
    }
    Ok(kg.with_facts(facts))
}

/// Positions `distort` would rewrite, without rewriting them.
pub fn distortion_positions(kg: &KnowledgeGraph, degree: f64, stream: &RngStream) -> Result<Vec<usize>> {
    check_ratio(degree)?;
    let pool = deletable_positions(kg);
    let count = selection_count(degree, pool.len());
    let mut chosen: Vec<usize> = stream
        .rng()
        .sample_indices(pool.len(), count)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Delete `round(ratio * n)` uniformly chosen non-placeholder facts.
/// The vocabulary is unchanged.
pub fn delete_facts(kg: &KnowledgeGraph, ratio: f64, stream: &RngStream) -> Result<KnowledgeGraph> {
    check_ratio(ratio)?;
    let pool = deletable_positions(kg);
    let count = selection_count(ratio, pool.len());
    let mut drop = vec![false; kg.facts().len()];
    for i in stream.rng().sample_indices(pool.len(), count) {
        drop[pool[i]] = true;
    }
    let facts = kg
        .facts()
        .iter()
        .zip(&drop)
        .filter(|(_, &d)| !d)
        .map(|(f, _)| *f)
        .collect();
    Ok(kg.with_facts(facts))
}

/// Delete `round(ratio * n)` of the unprotected entities together with every
/// fact touching them. Entities stay in the vocabulary as isolated nodes.
///
/// `extra_protected` is added to the graph's own protected set.
pub fn delete_entities(
    kg: &KnowledgeGraph,
    ratio: f64,
    stream: &RngStream,
    extra_protected: &BTreeSet<EntityId>,
) -> Result<KnowledgeGraph> {
    check_ratio(ratio)?;
    let pool: Vec<EntityId> = (0..kg.entity_count())
        .map(EntityId::from_index)
        .filter(|e| !kg.protected_entities().contains(e) && !extra_protected.contains(e))
        .collect();
    let count = selection_count(ratio, pool.len());
    let mut deleted = vec![false; kg.entity_count()];
    for i in stream.rng().sample_indices(pool.len(), count) {
        deleted[pool[i].index()] = true;
    }
    let facts = kg
        .facts()
        .iter()
        .filter(|f| kg.is_placeholder(f) || !(deleted[f.head.index()] || deleted[f.tail.index()]))
        .copied()
        .collect();
    Ok(kg.with_facts(facts))
}

/// Entities `delete_entities` would delete.
pub fn deleted_entities(
    kg: &KnowledgeGraph,
    ratio: f64,
    stream: &RngStream,
    extra_protected: &BTreeSet<EntityId>,
) -> Result<BTreeSet<EntityId>> {
    check_ratio(ratio)?;
    let pool: Vec<EntityId> = (0..kg.entity_count())
        .map(EntityId::from_index)
        .filter(|e| !kg.protected_entities().contains(e) && !extra_protected.contains(e))
        .collect();
    let count = selection_count(ratio, pool.len());
    Ok(stream
        .rng()
        .sample_indices(pool.len(), count)
        .into_iter()
        .map(|i| pool[i])
        .collect())
}

/// Choose `round(ratio * n)` relations (never the placeholder relation) and
/// delete every fact labelled with one of them.
pub fn delete_relations(
    kg: &KnowledgeGraph,
    ratio: f64,
    stream: &RngStream,
) -> Result<KnowledgeGraph> {
    let chosen = deleted_relations(kg, ratio, stream)?;
    let facts = kg
        .facts()
        .iter()
        .filter(|f| !chosen.contains(&f.relation))
        .copied()
        .collect();
    Ok(kg.with_facts(facts))
}

/// Relations `delete_relations` would delete.
pub fn deleted_relations(
    kg: &KnowledgeGraph,
    ratio: f64,
    stream: &RngStream,
) -> Result<BTreeSet<RelationId>> {
    check_ratio(ratio)?;
    let pool: Vec<RelationId> = (0..kg.relation_count())
        .map(RelationId::from_index)
        .filter(|&r| Some(r) != kg.placeholder_relation())
        .collect();
    let count = selection_count(ratio, pool.len());
    Ok(stream
        .rng()
        .sample_indices(pool.len(), count)
        .into_iter()
        .map(|i| pool[i])
        .collect())
}

/// Delete every fact with relation `r`. Deterministic.
pub fn remove_relation_type(kg: &KnowledgeGraph, r: RelationId) -> Result<KnowledgeGraph> {
    if r.index() >= kg.relation_count() {
        return Err(Error::UnknownRelation(r.0));
    }
    if Some(r) == kg.placeholder_relation() {
        return Err(Error::InvalidArgument(
            "the placeholder relation cannot be removed".into(),
        ));
    }
    let facts = kg
        .facts()
        .iter()
        .filter(|f| f.relation != r)
        .copied()
        .collect();
    Ok(kg.with_facts(facts))
}

/// Sidecar written next to a perturbed `.kg` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbManifest {
    pub spec: PerturbSpec,
    pub stream: Option<RngStream>,
    pub stream_algorithm: String,
    pub source: String,
    pub protected_entities: Vec<String>,
    pub placeholder_relation: Option<String>,
    pub n_facts_before: usize,
    pub n_facts_after: usize,
}

impl PerturbManifest {
    pub fn new(
        spec: PerturbSpec,
        stream: Option<RngStream>,
        source: impl Into<String>,
        before: &KnowledgeGraph,
        after: &KnowledgeGraph,
    ) -> Self {
        Self {
            spec,
            stream,
            stream_algorithm: STREAM_ALGORITHM.to_string(),
            source: source.into(),
            protected_entities: after
                .protected_entities()
                .iter()
                .map(|&e| after.entity_label(e).to_string())
                .collect(),
            placeholder_relation: after
                .placeholder_relation()
                .map(|r| after.relation_label(r).to_string()),
            n_facts_before: before.facts().len(),
            n_facts_after: after.facts().len(),
        }
    }
}

/// Write `kg` as `<stem>.kg` plus `<stem>.manifest.json` into `dir`.
pub fn write_perturbed(
    dir: impl AsRef<Path>,
    stem: &str,
    kg: &KnowledgeGraph,
    manifest: &PerturbManifest,
) -> Result<()> {
    let dir = dir.as_ref();
    dataio::write_kg(dir.join(format!("{stem}.kg")), kg)?;
    let path = dir.join(format!("{stem}.manifest.json"));
    let json = serde_json::to_string_pretty(manifest)?;
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(tag: &str) -> RngStream {
        RngStream::new(11, tag, 0)
    }

    fn chain(n: u32) -> KnowledgeGraph {
        // path 0 -> 1 -> ... -> n-1, relation alternating 0/1
        let facts = (0..n - 1).map(|i| Fact::new(i, i % 2, i + 1)).collect();
        KnowledgeGraph::build(facts, n as usize, 2).unwrap()
    }

    #[test]
    fn selection_count_rounds_half_up() {
        assert_eq!(selection_count(0.5, 5), 3);
        assert_eq!(selection_count(0.25, 10), 3);
        assert_eq!(selection_count(0.3, 5), 2);
        assert_eq!(selection_count(0.3, 10), 3);
        assert_eq!(selection_count(1.0, 7), 7);
        assert_eq!(selection_count(0.0, 7), 0);
    }

    #[test]
    fn interaction_kg_worked_example() {
        let mut ds = InteractionDataset::new(1, 1, vec![Interaction::new(0, 0)]).unwrap();
        ds.user_labels = vec!["Mike".into()];
        ds.item_labels = vec!["i_interstellar".into()];
        let source = KnowledgeGraph::with_labels(vec![], vec!["Interstellar".into()], vec![]).unwrap();
        ds.links.set(ItemId(0), EntityId(0)).unwrap();
        let g = to_interaction_kg(&ds.interactions, &ds, &source).unwrap();
        let named: Vec<(String, String, String)> = g
            .kg
            .facts()
            .iter()
            .map(|f| {
                (
                    g.kg.entity_label(f.head).to_string(),
                    g.kg.relation_label(f.relation).to_string(),
                    g.kg.entity_label(f.tail).to_string(),
                )
            })
            .collect();
        assert_eq!(
            named,
            vec![
                ("user:Mike".into(), "interact".into(), "Interstellar".into()),
                ("Interstellar".into(), "interact_trans".into(), "user:Mike".into()),
            ]
        );
        assert_eq!(g.links.entity(ItemId(0)), Some(EntityId(0)));
    }

    #[test]
    fn interaction_kg_counts() {
        let ds = InteractionDataset::new(
            2,
            3,
            vec![Interaction::new(0, 0), Interaction::new(1, 2), Interaction::new(0, 1)],
        )
        .unwrap();
        let src = KnowledgeGraph::build(vec![], 0, 0).unwrap();
        let g = to_interaction_kg(&ds.interactions, &ds, &src).unwrap();
        assert_eq!(g.kg.stats().n_facts, 6);
        assert_eq!(g.kg.relation_count(), 2);
        assert_eq!(g.kg.entity_count(), 5);
        let empty = to_interaction_kg(&[], &ds, &src).unwrap();
        assert_eq!(empty.kg.stats().n_facts, 0);
        assert_eq!(empty.kg.relation_count(), 2);
    }

    #[test]
    fn self_kg_cases() {
        let mut ds = InteractionDataset::new(1, 6, vec![]).unwrap();
        let src = KnowledgeGraph::build(vec![], 10, 1).unwrap();
        let empty = to_self_kg(&ds, &src).unwrap();
        assert_eq!(empty.kg.stats().n_facts, 0);
        for i in 0..5u32 {
            ds.links.set(ItemId(i), EntityId(i + 3)).unwrap();
        }
        let g = to_self_kg(&ds, &src).unwrap();
        assert_eq!(g.kg.stats().n_facts, 5);
        assert!(g.kg.facts().iter().all(|f| f.head == f.tail));
        assert_eq!(g.kg.relation_count(), 1);
        assert_eq!(g.kg.relation_label(RelationId(0)), SELF_RELATION);
        assert_eq!(g.links.entity(ItemId(5)), None);
        assert_eq!(g.kg.entity_label(g.links.entity(ItemId(2)).unwrap()), "5");
        // self loops already act as placeholders
        let again = add_self_loop_placeholders(&g.kg, &BTreeSet::new()).unwrap();
        assert_eq!(again, g.kg);
    }

    #[test]
    fn placeholders_idempotent_and_incremental() {
        let kg = chain(5);
        let p: BTreeSet<EntityId> = [0, 1, 2].map(EntityId).into();
        let once = add_self_loop_placeholders(&kg, &p).unwrap();
        assert_eq!(once.relation_count(), 3);
        assert_eq!(once.stats().n_facts, 4 + 3);
        let twice = add_self_loop_placeholders(&once, &p).unwrap();
        assert_eq!(twice, once);
        let more: BTreeSet<EntityId> = [1, 2, 3, 4].map(EntityId).into();
        let grown = add_self_loop_placeholders(&once, &more).unwrap();
        assert_eq!(grown.stats().n_facts, 7 + 2);
        assert_eq!(grown.relation_count(), 3);
    }

    #[test]
    fn distort_identity_and_full() {
        let kg = chain(11);
        assert_eq!(distort(&kg, 0.0, &stream("d")).unwrap(), kg);
        let full = distortion_positions(&kg, 1.0, &stream("d")).unwrap();
        assert_eq!(full, (0..10).collect::<Vec<_>>());
        let d = distort(&kg, 1.0, &stream("d")).unwrap();
        assert_eq!(d.stats(), kg.stats());
        assert!(distort(&kg, 1.5, &stream("d")).is_err());
        assert!(distort(&kg, -0.1, &stream("d")).is_err());
    }

    #[test]
    fn distort_half_selects_five_positions() {
        let kg = chain(11);
        let pos = distortion_positions(&kg, 0.5, &stream("d")).unwrap();
        assert_eq!(pos.len(), 5);
        let d = distort(&kg, 0.5, &stream("d")).unwrap();
        let changed: Vec<usize> = (0..10).filter(|&i| d.facts()[i] != kg.facts()[i]).collect();
        assert!(changed.iter().all(|i| pos.contains(i)));
    }

    #[test]
    fn delete_facts_counts() {
        let kg = chain(11);
        assert_eq!(delete_facts(&kg, 0.0, &stream("f")).unwrap(), kg);
        assert_eq!(delete_facts(&kg, 0.3, &stream("f")).unwrap().stats().n_facts, 7);
        let p = add_self_loop_placeholders(&kg, &[EntityId(0), EntityId(3)].into()).unwrap();
        let all = delete_facts(&p, 1.0, &stream("f")).unwrap();
        assert_eq!(all.stats().n_facts, 2);
        assert!(all.facts().iter().all(|f| all.is_placeholder(f)));
        assert_eq!(all.entity_count(), p.entity_count());
    }

    #[test]
    fn delete_entities_matches_incidence_oracle() {
        let kg = chain(10);
        let s = stream("e");
        let gone = deleted_entities(&kg, 0.3, &s, &BTreeSet::new()).unwrap();
        assert_eq!(gone.len(), 3);
        let out = delete_entities(&kg, 0.3, &s, &BTreeSet::new()).unwrap();
        let expected: Vec<Fact> = kg
            .facts()
            .iter()
            .filter(|f| !gone.contains(&f.head) && !gone.contains(&f.tail))
            .copied()
            .collect();
        assert_eq!(out.facts(), expected.as_slice());
        for e in &gone {
            assert!(out.neighbors(*e).unwrap().is_empty());
            assert!(out.facts().iter().all(|f| f.tail != *e));
        }
        assert_eq!(out.entity_count(), 10);
        assert_eq!(delete_entities(&kg, 0.0, &s, &BTreeSet::new()).unwrap(), kg);
    }

    #[test]
    fn delete_entity_removes_incident_fact() {
        // <Mike, interact, Interstellar>: deleting Mike removes the fact
        let kg = KnowledgeGraph::with_labels(
            vec![Fact::new(0, 0, 1)],
            vec!["Mike".into(), "Interstellar".into()],
            vec!["interact".into()],
        )
        .unwrap();
        let keep_interstellar: BTreeSet<EntityId> = [EntityId(1)].into();
        let out = delete_entities(&kg, 1.0, &stream("m"), &keep_interstellar).unwrap();
        assert!(out.facts().is_empty());
    }

    #[test]
    fn delete_relations_histogram_oracle() {
        let mut facts = Vec::new();
        for (r, n) in [(0u32, 5usize), (1, 3), (2, 2), (3, 0)] {
            for k in 0..n {
                facts.push(Fact::new(k as u32, r, k as u32 + 1));
            }
        }
        let kg = KnowledgeGraph::build(facts, 8, 4).unwrap();
        let hist = kg.relation_histogram();
        for seed in 0..20 {
            let s = RngStream::new(seed, "r", 0);
            let chosen = deleted_relations(&kg, 0.5, &s).unwrap();
            assert_eq!(chosen.len(), 2);
            let out = delete_relations(&kg, 0.5, &s).unwrap();
            let expected: usize = (0..4)
                .filter(|r| !chosen.contains(&RelationId(*r)))
                .map(|r| hist[r as usize])
                .sum();
            assert_eq!(out.stats().n_facts, expected);
        }
        assert_eq!(delete_relations(&kg, 0.0, &stream("r")).unwrap(), kg);
    }

    #[test]
    fn delete_relations_skips_placeholder() {
        let kg = chain(6);
        let p = add_self_loop_placeholders(&kg, &[EntityId(2)].into()).unwrap();
        let all = delete_relations(&p, 1.0, &stream("r")).unwrap();
        assert_eq!(all.facts().len(), 1);
        assert!(all.is_placeholder(&all.facts()[0]));
    }

    #[test]
    fn remove_relation_type_cases() {
        let kg = KnowledgeGraph::build(vec![Fact::new(0, 0, 1), Fact::new(0, 1, 1)], 2, 3).unwrap();
        assert_eq!(
            remove_relation_type(&kg, RelationId(0)).unwrap().facts(),
            &[Fact::new(0, 1, 1)]
        );
        assert_eq!(remove_relation_type(&kg, RelationId(2)).unwrap(), kg);
        assert!(matches!(
            remove_relation_type(&kg, RelationId(3)),
            Err(Error::UnknownRelation(3))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(PerturbSpec::ratio(PerturbKind::Distort, 0.5).is_ok());
        assert!(PerturbSpec::ratio(PerturbKind::SelfKg, 0.5).is_err());
        assert!(PerturbSpec::ratio(PerturbKind::Distort, 2.0).is_err());
        assert!(PerturbSpec::regime(PerturbKind::Distort).is_err());
        assert!(PerturbSpec::regime(PerturbKind::InteractionKg).is_ok());
        let bad = PerturbSpec {
            kind: PerturbKind::DeleteFacts,
            ratio: Some(0.1),
            target_relation: Some(RelationId(0)),
        };
        assert!(bad.validate().is_err());
        assert_eq!("delete_facts".parse::<PerturbKind>().unwrap(), PerturbKind::DeleteFacts);
    }
}
