//! Knowledge-graph representation.
//!
//! A [`KnowledgeGraph`] is a flat, ordered list of directed facts over a
//! fixed entity/relation vocabulary. Perturbation operators only ever rewrite
//! the fact list; the vocabulary never shrinks.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! dense_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }

            #[inline]
            pub fn from_index(i: usize) -> Self {
                Self(u32::try_from(i).expect("id exceeds u32 range"))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

dense_id!(
    /// Node of a knowledge graph.
    EntityId
);
dense_id!(
    /// Edge label of a knowledge graph.
    RelationId
);
dense_id!(UserId);
dense_id!(ItemId);

/// One directed, labelled edge `<head, relation, tail>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Fact {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Fact {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Self {
            head: EntityId(head),
            relation: RelationId(relation),
            tail: EntityId(tail),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n_entities: usize,
    pub n_relations: usize,
    pub n_facts: usize,
}

#[derive(Debug)]
pub struct KnowledgeGraph {
    entity_labels: Vec<String>,
    relation_labels: Vec<String>,
    facts: Vec<Fact>,
    protected: BTreeSet<EntityId>,
    placeholder_relation: Option<RelationId>,
    // outgoing fact indices per entity, built on first `neighbors` call
    adjacency: OnceLock<Vec<Vec<u32>>>,
}

impl Clone for KnowledgeGraph {
    fn clone(&self) -> Self {
        Self {
            entity_labels: self.entity_labels.clone(),
            relation_labels: self.relation_labels.clone(),
            facts: self.facts.clone(),
            protected: self.protected.clone(),
            placeholder_relation: self.placeholder_relation,
            adjacency: OnceLock::new(),
        }
    }
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.entity_labels == other.entity_labels
            && self.relation_labels == other.relation_labels
            && self.facts == other.facts
            && self.protected == other.protected
            && self.placeholder_relation == other.placeholder_relation
    }
}

fn numeric_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Check every fact against the vocabulary sizes.
fn validate(facts: &[Fact], entity_count: usize, relation_count: usize) -> Result<()> {
    for (index, f) in facts.iter().enumerate() {
        for e in [f.head, f.tail] {
            if e.index() >= entity_count {
                return Err(Error::EntityOutOfBounds {
                    index,
                    entity: e.0,
                    count: entity_count,
                });
            }
        }
        if f.relation.index() >= relation_count {
            return Err(Error::RelationOutOfBounds {
                index,
                relation: f.relation.0,
                count: relation_count,
            });
        }
    }
    Ok(())
}

impl KnowledgeGraph {
    /// Graph with exactly `facts`, in order, over numeric vocabulary labels.
    pub fn build(facts: Vec<Fact>, entity_count: usize, relation_count: usize) -> Result<Self> {
        Self::with_labels(
            facts,
            numeric_labels(entity_count),
            numeric_labels(relation_count),
        )
    }

    pub fn with_labels(
        facts: Vec<Fact>,
        entity_labels: Vec<String>,
        relation_labels: Vec<String>,
    ) -> Result<Self> {
        validate(&facts, entity_labels.len(), relation_labels.len())?;
        Ok(Self {
            entity_labels,
            relation_labels,
            facts,
            protected: BTreeSet::new(),
            placeholder_relation: None,
            adjacency: OnceLock::new(),
        })
    }

    /// Same vocabulary and placeholder bookkeeping, new fact list.
    /// The caller guarantees the facts are in bounds.
    pub(crate) fn with_facts(&self, facts: Vec<Fact>) -> Self {
        debug_assert!(validate(&facts, self.entity_count(), self.relation_count()).is_ok());
        Self {
            entity_labels: self.entity_labels.clone(),
            relation_labels: self.relation_labels.clone(),
            facts,
            protected: self.protected.clone(),
            placeholder_relation: self.placeholder_relation,
            adjacency: OnceLock::new(),
        }
    }

    pub(crate) fn set_placeholders(
        &mut self,
        relation: Option<RelationId>,
        protected: BTreeSet<EntityId>,
    ) {
        self.placeholder_relation = relation;
        self.protected = protected;
    }

    pub(crate) fn push_relation(&mut self, label: impl Into<String>) -> RelationId {
        self.relation_labels.push(label.into());
        self.adjacency = OnceLock::new();
        RelationId::from_index(self.relation_labels.len() - 1)
    }

    pub(crate) fn push_entity(&mut self, label: impl Into<String>) -> EntityId {
        self.entity_labels.push(label.into());
        self.adjacency = OnceLock::new();
        EntityId::from_index(self.entity_labels.len() - 1)
    }

    pub fn entity_count(&self) -> usize {
        self.entity_labels.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relation_labels.len()
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn entity_label(&self, e: EntityId) -> &str {
        &self.entity_labels[e.index()]
    }

    pub fn relation_label(&self, r: RelationId) -> &str {
        &self.relation_labels[r.index()]
    }

    pub fn entity_labels(&self) -> &[String] {
        &self.entity_labels
    }

    pub fn relation_labels(&self) -> &[String] {
        &self.relation_labels
    }

    pub fn entity_by_label(&self, label: &str) -> Option<EntityId> {
        self.entity_labels
            .iter()
            .position(|l| l == label)
            .map(EntityId::from_index)
    }

    pub fn relation_by_label(&self, label: &str) -> Option<RelationId> {
        self.relation_labels
            .iter()
            .position(|l| l == label)
            .map(RelationId::from_index)
    }

    /// Entities whose self-loop placeholder is exempt from deletion.
    pub fn protected_entities(&self) -> &BTreeSet<EntityId> {
        &self.protected
    }

    pub fn placeholder_relation(&self) -> Option<RelationId> {
        self.placeholder_relation
    }

    /// A placeholder is `<e, placeholder, e>` for a protected `e`.
    pub fn is_placeholder(&self, f: &Fact) -> bool {
        Some(f.relation) == self.placeholder_relation
            && f.head == f.tail
            && self.protected.contains(&f.head)
    }

    /// Outgoing edges of `e` as `(relation, tail)`, in fact-list order.
    pub fn neighbors(&self, e: EntityId) -> Result<Vec<(RelationId, EntityId)>> {
        if e.index() >= self.entity_count() {
            return Err(Error::UnknownEntity(e.0));
        }
        let adj = self.adjacency.get_or_init(|| {
            let mut adj = vec![Vec::new(); self.entity_count()];
            for (i, f) in self.facts.iter().enumerate() {
                adj[f.head.index()].push(i as u32);
            }
            adj
        });
        Ok(adj[e.index()]
            .iter()
            .map(|&i| {
                let f = &self.facts[i as usize];
                (f.relation, f.tail)
            })
            .collect())
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            n_entities: self.entity_count(),
            n_relations: self.relation_count(),
            n_facts: self.facts.len(),
        }
    }

    /// Number of facts per relation id.
    pub fn relation_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.relation_count()];
        for f in &self.facts {
            h[f.relation.index()] += 1;
        }
        h
    }

    /// Number of facts that occur more than once (counting repeats only).
    pub fn duplicate_count(&self) -> usize {
        let mut sorted = self.facts.clone();
        sorted.sort_unstable();
        sorted.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

/// Free-function form of [`KnowledgeGraph::build`].
pub fn build_graph(
    facts: Vec<Fact>,
    entity_count: usize,
    relation_count: usize,
) -> Result<KnowledgeGraph> {
    KnowledgeGraph::build(facts, entity_count, relation_count)
}
