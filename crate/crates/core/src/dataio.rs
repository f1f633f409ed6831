//! Loading, preprocessing and writing of interaction, KG and link files.
//!
//! All three formats are UTF-8, tab-separated, with a header row:
//!
//! | file    | header                                        |
//! |---------|-----------------------------------------------|
//! | `.inter`| `user_id  item_id  [rating]  [timestamp]`     |
//! | `.kg`   | `head_id  relation_id  tail_id`               |
//! | `.link` | `item_id  entity_id`                          |
//!
//! Header fields may carry a `:type` suffix (`user_id:token`), which is
//! ignored. Tokens are arbitrary strings without tabs; dense integer ids are
//! assigned in first-appearance order, and the original tokens are kept as
//! labels so files can be written back unchanged.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, Fact, ItemId, KnowledgeGraph, RelationId, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: UserId,
    pub item: ItemId,
    pub rating: Option<f64>,
    pub timestamp: Option<i64>,
}

impl Interaction {
    pub fn new(user: u32, item: u32) -> Self {
        Self {
            user: UserId(user),
            item: ItemId(item),
            rating: None,
            timestamp: None,
        }
    }

    pub fn rated(user: u32, item: u32, rating: f64) -> Self {
        Self {
            rating: Some(rating),
            ..Self::new(user, item)
        }
    }
}

/// Item -> entity link function. Injective over linked items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkTable {
    item_to_entity: Vec<Option<EntityId>>,
}

impl LinkTable {
    pub fn unlinked(item_count: usize) -> Self {
        Self {
            item_to_entity: vec![None; item_count],
        }
    }

    /// Every item linked, item `i` to `entities[i]`. Fails if not injective.
    pub fn total(entities: Vec<EntityId>) -> Result<Self> {
        let t = Self {
            item_to_entity: entities.into_iter().map(Some).collect(),
        };
        t.check_injective()?;
        Ok(t)
    }

    pub fn item_count(&self) -> usize {
        self.item_to_entity.len()
    }

    pub fn entity(&self, item: ItemId) -> Option<EntityId> {
        self.item_to_entity.get(item.index()).copied().flatten()
    }

    /// Number of linked items.
    pub fn len(&self) -> usize {
        self.item_to_entity.iter().filter(|e| e.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_total(&self) -> bool {
        self.item_to_entity.iter().all(Option::is_some)
    }

    /// `(item, entity)` pairs for linked items in item order.
    pub fn iter(&self) -> impl Iterator<Item = (ItemId, EntityId)> + '_ {
        self.item_to_entity
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.map(|e| (ItemId::from_index(i), e)))
    }

    pub fn unlinked_items(&self) -> Vec<ItemId> {
        self.item_to_entity
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_none())
            .map(|(i, _)| ItemId::from_index(i))
            .collect()
    }

    /// Entities of every item; errors if some item is unlinked.
    pub fn require_total(&self) -> Result<Vec<EntityId>> {
        self.item_to_entity
            .iter()
            .enumerate()
            .map(|(i, e)| {
                e.ok_or_else(|| Error::InvalidArgument(format!("item {i} has no linked entity")))
            })
            .collect()
    }

    pub fn set(&mut self, item: ItemId, entity: EntityId) -> Result<()> {
        if let Some((other, _)) = self.iter().find(|&(i, e)| e == entity && i != item) {
            return Err(Error::InvalidArgument(format!(
                "link is not injective: items {other} and {item} both map to entity {entity}"
            )));
        }
        self.item_to_entity[item.index()] = Some(entity);
        Ok(())
    }

    fn check_injective(&self) -> Result<()> {
        let mut seen: HashMap<EntityId, ItemId> = HashMap::new();
        for (item, e) in self.iter() {
            if let Some(prev) = seen.insert(e, item) {
                return Err(Error::InvalidArgument(format!(
                    "link is not injective: items {prev} and {item} both map to entity {e}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    pub user_labels: Vec<String>,
    pub item_labels: Vec<String>,
    pub interactions: Vec<Interaction>,
    pub links: LinkTable,
}

impl InteractionDataset {
    /// Dataset over numeric labels. Every id must be in bounds.
    pub fn new(user_count: usize, item_count: usize, interactions: Vec<Interaction>) -> Result<Self> {
        for (i, x) in interactions.iter().enumerate() {
            if x.user.index() >= user_count || x.item.index() >= item_count {
                return Err(Error::InvalidArgument(format!(
                    "interaction {i}: ({}, {}) out of bounds ({user_count} users, {item_count} items)",
                    x.user, x.item
                )));
            }
            if x.rating.is_some_and(|r| !r.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "interaction {i}: non-finite rating"
                )));
            }
        }
        Ok(Self {
            user_labels: (0..user_count).map(|i| i.to_string()).collect(),
            item_labels: (0..item_count).map(|i| i.to_string()).collect(),
            interactions,
            links: LinkTable::unlinked(item_count),
        })
    }

    pub fn user_count(&self) -> usize {
        self.user_labels.len()
    }

    pub fn item_count(&self) -> usize {
        self.item_labels.len()
    }

    pub fn item_by_label(&self, label: &str) -> Option<ItemId> {
        self.item_labels
            .iter()
            .position(|l| l == label)
            .map(ItemId::from_index)
    }

    /// Keep only interactions matching `keep`, then drop users/items left
    /// without interactions and re-number the rest in their previous order.
    fn retain_and_compact(&self, mut keep: impl FnMut(&Interaction) -> bool) -> Self {
        let kept: Vec<Interaction> = self.interactions.iter().copied().filter(|x| keep(x)).collect();
        let mut user_used = vec![false; self.user_count()];
        let mut item_used = vec![false; self.item_count()];
        for x in &kept {
            user_used[x.user.index()] = true;
            item_used[x.item.index()] = true;
        }
        let remap = |used: &[bool]| -> Vec<Option<u32>> {
            let mut next = 0u32;
            used.iter()
                .map(|&u| {
                    u.then(|| {
                        next += 1;
                        next - 1
                    })
                })
                .collect()
        };
        let user_map = remap(&user_used);
        let item_map = remap(&item_used);
        let pick = |labels: &[String], used: &[bool]| -> Vec<String> {
            labels
                .iter()
                .zip(used)
                .filter(|(_, &u)| u)
                .map(|(l, _)| l.clone())
                .collect()
        };
        let interactions = kept
            .into_iter()
            .map(|x| Interaction {
                user: UserId(user_map[x.user.index()].expect("kept user")),
                item: ItemId(item_map[x.item.index()].expect("kept item")),
                ..x
            })
            .collect();
        let links = LinkTable {
            item_to_entity: self
                .links
                .item_to_entity
                .iter()
                .zip(&item_used)
                .filter(|(_, &u)| u)
                .map(|(e, _)| *e)
                .collect(),
        };
        Self {
            user_labels: pick(&self.user_labels, &user_used),
            item_labels: pick(&self.item_labels, &item_used),
            interactions,
            links,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_users: usize,
    pub n_items: usize,
    pub n_interactions: usize,
    pub sparsity: f64,
}

impl DatasetStats {
    /// Stats from raw counts; `sparsity = 1 - interactions / (users * items)`.
    pub fn from_counts(n_users: usize, n_items: usize, n_interactions: usize) -> Result<Self> {
        if n_users == 0 || n_items == 0 {
            return Err(Error::InvalidArgument(
                "sparsity undefined for zero users or items".into(),
            ));
        }
        let cells = n_users as f64 * n_items as f64;
        Ok(Self {
            n_users,
            n_items,
            n_interactions,
            sparsity: 1.0 - n_interactions as f64 / cells,
        })
    }
}

pub fn dataset_stats(ds: &InteractionDataset) -> Result<DatasetStats> {
    DatasetStats::from_counts(ds.user_count(), ds.item_count(), ds.interactions.len())
}

/// Keep interactions with `rating >= threshold`.
pub fn filter_by_rating(ds: &InteractionDataset, threshold: f64) -> Result<InteractionDataset> {
    if !threshold.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rating threshold must be finite, got {threshold}"
        )));
    }
    if let Some(i) = ds.interactions.iter().position(|x| x.rating.is_none()) {
        return Err(Error::InvalidArgument(format!(
            "interaction {i} has no rating; cannot filter by rating"
        )));
    }
    Ok(ds.retain_and_compact(|x| x.rating.is_some_and(|r| r >= threshold)))
}

/// Iteratively drop users and items with `<= k` interactions until every
/// survivor has more than `k`.
pub fn k_core_filter(ds: &InteractionDataset, k: usize) -> InteractionDataset {
    let mut alive = vec![true; ds.interactions.len()];
    loop {
        let mut user_deg = vec![0usize; ds.user_count()];
        let mut item_deg = vec![0usize; ds.item_count()];
        for (x, _) in ds.interactions.iter().zip(&alive).filter(|(_, &a)| a) {
            user_deg[x.user.index()] += 1;
            item_deg[x.item.index()] += 1;
        }
        let mut changed = false;
        for (x, a) in ds.interactions.iter().zip(alive.iter_mut()) {
            if *a && (user_deg[x.user.index()] <= k || item_deg[x.item.index()] <= k) {
                *a = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut idx = 0;
    ds.retain_and_compact(|_| {
        idx += 1;
        alive[idx - 1]
    })
}

// ---------------------------------------------------------------------------
// Parsing

/// First-appearance interner for string tokens.
#[derive(Default)]
struct Interner {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    fn from_labels(labels: &[String]) -> Self {
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i as u32))
            .collect();
        Self {
            labels: labels.to_vec(),
            index,
        }
    }

    fn intern(&mut self, token: &str) -> u32 {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.labels.len() as u32;
        self.labels.push(token.to_string());
        self.index.insert(token.to_string(), i);
        i
    }
}

struct Table {
    path: PathBuf,
    columns: Vec<String>,
    // (1-based line number, fields)
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.column(name).ok_or_else(|| Error::Parse {
            path: self.path.clone(),
            line: 1,
            message: format!("missing column `{name}` in header"),
        })
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }
}

fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::EmptyFile {
        path: path.to_path_buf(),
    })?;
    let columns: Vec<String> = header
        .split('\t')
        .map(|c| c.trim().split(':').next().unwrap_or("").to_string())
        .collect();
    let width = columns.len();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let fields: Vec<String> = line
            .trim_end_matches('\r')
            .split('\t')
            .map(str::to_string)
            .collect();
        if fields.len() != width {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected {width} fields, found {}", fields.len()),
            });
        }
        rows.push((i + 1, fields));
    }
    Ok(Table {
        path: path.to_path_buf(),
        columns,
        rows,
    })
}

fn parse_timestamp(s: &str) -> Option<i64> {
    s.parse::<i64>().ok().or_else(|| {
        let f: f64 = s.parse().ok()?;
        (f.is_finite() && f.fract() == 0.0).then_some(f as i64)
    })
}

/// Load a `.inter` file.
pub fn load_interactions(path: impl AsRef<Path>) -> Result<InteractionDataset> {
    let table = read_table(path.as_ref())?;
    let user_col = table.require("user_id")?;
    let item_col = table.require("item_id")?;
    let rating_col = table.column("rating");
    let ts_col = table.column("timestamp");
    if table.rows.is_empty() {
        return Err(Error::EmptyFile {
            path: table.path.clone(),
        });
    }
    let mut users = Interner::default();
    let mut items = Interner::default();
    let mut interactions = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        let user = UserId(users.intern(&fields[user_col]));
        let item = ItemId(items.intern(&fields[item_col]));
        let rating = match rating_col {
            Some(c) => {
                let r: f64 = fields[c]
                    .trim()
                    .parse()
                    .map_err(|_| table.err(*line, format!("non-numeric rating `{}`", fields[c])))?;
                if !r.is_finite() {
                    return Err(table.err(*line, "non-finite rating"));
                }
                Some(r)
            }
            None => None,
        };
        let timestamp = match ts_col {
            Some(c) => Some(parse_timestamp(fields[c].trim()).ok_or_else(|| {
                table.err(*line, format!("invalid timestamp `{}`", fields[c]))
            })?),
            None => None,
        };
        interactions.push(Interaction {
            user,
            item,
            rating,
            timestamp,
        });
    }
    let item_count = items.labels.len();
    Ok(InteractionDataset {
        user_labels: users.labels,
        item_labels: items.labels,
        interactions,
        links: LinkTable::unlinked(item_count),
    })
}

/// Load a `.kg` file. Duplicate facts are kept and logged.
pub fn load_kg(path: impl AsRef<Path>) -> Result<KnowledgeGraph> {
    let table = read_table(path.as_ref())?;
    let h = table.require("head_id")?;
    let r = table.require("relation_id")?;
    let t = table.require("tail_id")?;
    let mut entities = Interner::default();
    let mut relations = Interner::default();
    let mut facts = Vec::with_capacity(table.rows.len());
    for (_, fields) in &table.rows {
        let head = EntityId(entities.intern(&fields[h]));
        let relation = RelationId(relations.intern(&fields[r]));
        let tail = EntityId(entities.intern(&fields[t]));
        facts.push(Fact {
            head,
            relation,
            tail,
        });
    }
    let kg = KnowledgeGraph::with_labels(facts, entities.labels, relations.labels)?;
    let dups = kg.duplicate_count();
    if dups > 0 {
        log::warn!("{}: {dups} duplicate facts kept", table.path.display());
    }
    Ok(kg)
}

/// Raw `(item token, entity token)` rows of a `.link` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawLinks {
    pub rows: Vec<(String, String)>,
}

impl RawLinks {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn load_links(path: impl AsRef<Path>) -> Result<RawLinks> {
    let table = read_table(path.as_ref())?;
    let i = table.require("item_id")?;
    let e = table.require("entity_id")?;
    Ok(RawLinks {
        rows: table
            .rows
            .iter()
            .map(|(_, f)| (f[i].clone(), f[e].clone()))
            .collect(),
    })
}

/// Interactions, KG and a total item -> entity link table that agree on ids.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub dataset: InteractionDataset,
    pub kg: KnowledgeGraph,
    /// Items that had no link row; each received a fresh isolated entity.
    pub flagged_items: Vec<ItemId>,
}

impl Bundle {
    /// Resolve `links` against the dataset and KG vocabularies.
    ///
    /// Link rows naming unknown items are skipped. Linked entities missing
    /// from the KG are appended to its vocabulary (as isolated nodes). Items
    /// without any link row get a fresh entity labelled `item:<token>` and are
    /// listed in `flagged_items`. Items are never dropped.
    pub fn assemble(
        mut dataset: InteractionDataset,
        mut kg: KnowledgeGraph,
        links: &RawLinks,
    ) -> Result<Self> {
        let items = Interner::from_labels(&dataset.item_labels);
        let mut entities = Interner::from_labels(kg.entity_labels());
        let mut table = LinkTable::unlinked(dataset.item_count());
        let mut skipped = 0usize;
        for (item_tok, entity_tok) in &links.rows {
            let Some(&item) = items.index.get(item_tok) else {
                skipped += 1;
                continue;
            };
            let before = entities.labels.len();
            let e = entities.intern(entity_tok);
            if e as usize == before {
                kg.push_entity(entity_tok.clone());
            }
            table.set(ItemId(item), EntityId(e))?;
        }
        if skipped > 0 {
            log::info!("{skipped} link rows reference items absent from the interactions");
        }
        let flagged_items = table.unlinked_items();
        for &item in &flagged_items {
            let label = format!("item:{}", dataset.item_labels[item.index()]);
            let e = kg.push_entity(label);
            table.set(item, e)?;
        }
        if !flagged_items.is_empty() {
            log::warn!(
                "{} items have no KG link; isolated entities created",
                flagged_items.len()
            );
        }
        dataset.links = table;
        Ok(Self {
            dataset,
            kg,
            flagged_items,
        })
    }

    pub fn load(
        inter: impl AsRef<Path>,
        kg: impl AsRef<Path>,
        link: impl AsRef<Path>,
    ) -> Result<Self> {
        Self::assemble(load_interactions(inter)?, load_kg(kg)?, &load_links(link)?)
    }

    /// Apply a dataset transformation, keeping links and KG consistent.
    pub fn map_dataset(
        self,
        f: impl FnOnce(&InteractionDataset) -> Result<InteractionDataset>,
    ) -> Result<Self> {
        let dataset = f(&self.dataset)?;
        let flagged_items = dataset
            .item_labels
            .iter()
            .enumerate()
            .filter(|(_, l)| {
                self.flagged_items
                    .iter()
                    .any(|f| &self.dataset.item_labels[f.index()] == *l)
            })
            .map(|(i, _)| ItemId::from_index(i))
            .collect();
        Ok(Self {
            dataset,
            kg: self.kg,
            flagged_items,
        })
    }
}

// ---------------------------------------------------------------------------
// Writing

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_interactions(
    path: impl AsRef<Path>,
    ds: &InteractionDataset,
    interactions: &[Interaction],
) -> Result<()> {
    let path = path.as_ref();
    let with_rating = interactions.iter().any(|x| x.rating.is_some());
    let with_ts = interactions.iter().any(|x| x.timestamp.is_some());
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let mut header = String::from("user_id\titem_id");
    if with_rating {
        header.push_str("\trating");
    }
    if with_ts {
        header.push_str("\ttimestamp");
    }
    writeln!(w, "{header}").map_err(io)?;
    for x in interactions {
        write!(
            w,
            "{}\t{}",
            ds.user_labels[x.user.index()],
            ds.item_labels[x.item.index()]
        )
        .map_err(io)?;
        if with_rating {
            write!(w, "\t{}", x.rating.unwrap_or(f64::NAN)).map_err(io)?;
        }
        if with_ts {
            write!(w, "\t{}", x.timestamp.unwrap_or(0)).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_kg(path: impl AsRef<Path>, kg: &KnowledgeGraph) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "head_id\trelation_id\ttail_id").map_err(io)?;
    for f in kg.facts() {
        writeln!(
            w,
            "{}\t{}\t{}",
            kg.entity_label(f.head),
            kg.relation_label(f.relation),
            kg.entity_label(f.tail)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_links(
    path: impl AsRef<Path>,
    ds: &InteractionDataset,
    kg: &KnowledgeGraph,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "item_id\tentity_id").map_err(io)?;
    for (item, e) in ds.links.iter() {
        writeln!(w, "{}\t{}", ds.item_labels[item.index()], kg.entity_label(e)).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_rows() {
        let f = file("user_id\titem_id\trating\na\tx\t5\nb\tx\t3\na\ty\t4\n");
        let ds = load_interactions(f.path()).unwrap();
        assert_eq!(ds.interactions.len(), 3);
        assert_eq!(ds.user_count(), 2);
        assert_eq!(ds.item_count(), 2);
        assert_eq!(ds.user_labels, vec!["a", "b"]);
        assert_eq!(ds.interactions[2], Interaction::rated(0, 1, 4.0));
    }

    #[test]
    fn typed_header_and_implicit_feedback() {
        let f = file("user_id:token\titem_id:token\n1\t10\n2\t10\n");
        let ds = load_interactions(f.path()).unwrap();
        assert_eq!(ds.interactions.len(), 2);
        assert!(ds.interactions.iter().all(|x| x.rating.is_none()));
        let f = file("user_id\titem_id\trating\ttimestamp\n1\t10\t4\t978300760.0\n");
        let ds = load_interactions(f.path()).unwrap();
        assert_eq!(ds.interactions[0].timestamp, Some(978300760));
    }

    #[test]
    fn bad_rating_reports_line() {
        let f = file("user_id\titem_id\trating\na\tx\t5\nb\tx\tgood\n");
        match load_interactions(f.path()).unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("rating"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn wrong_field_count_and_empty() {
        let f = file("user_id\titem_id\na\tx\tz\n");
        assert!(matches!(
            load_interactions(f.path()),
            Err(Error::Parse { line: 2, .. })
        ));
        let f = file("");
        assert!(matches!(
            load_interactions(f.path()),
            Err(Error::EmptyFile { .. })
        ));
        let f = file("user_id\titem_id\n");
        assert!(matches!(
            load_interactions(f.path()),
            Err(Error::EmptyFile { .. })
        ));
    }

    #[test]
    fn loads_kg_and_links() {
        let kg = load_kg(file("head_id\trelation_id\ttail_id\nm1\tgenre\tscifi\nm2\tgenre\tscifi\n").path())
            .unwrap();
        assert_eq!(kg.stats().n_facts, 2);
        assert_eq!(kg.entity_labels(), ["m1", "scifi", "m2"]);
        let links = load_links(file("item_id\tentity_id\ni1\tm1\ni2\tm2\ni3\tm3\n").path()).unwrap();
        assert_eq!(links.len(), 3);
    }

    #[test]
    fn assemble_links_and_flags() {
        let ds = InteractionDataset {
            user_labels: vec!["u".into()],
            item_labels: vec!["i1".into(), "i2".into(), "i3".into()],
            interactions: vec![Interaction::new(0, 0), Interaction::new(0, 1), Interaction::new(0, 2)],
            links: LinkTable::unlinked(3),
        };
        let kg = KnowledgeGraph::with_labels(
            vec![Fact::new(0, 0, 1)],
            vec!["m1".into(), "g".into()],
            vec!["genre".into()],
        )
        .unwrap();
        let raw = RawLinks {
            rows: vec![
                ("i1".into(), "m1".into()),
                ("i2".into(), "m2".into()),
                ("zz".into(), "g".into()),
            ],
        };
        let b = Bundle::assemble(ds, kg, &raw).unwrap();
        assert!(b.dataset.links.is_total());
        assert_eq!(b.flagged_items, vec![ItemId(2)]);
        assert_eq!(b.kg.entity_count(), 4);
        assert_eq!(b.kg.entity_label(b.dataset.links.entity(ItemId(1)).unwrap()), "m2");
        assert_eq!(b.kg.entity_label(b.dataset.links.entity(ItemId(2)).unwrap()), "item:i3");
    }

    #[test]
    fn non_injective_links_rejected() {
        let mut t = LinkTable::unlinked(2);
        t.set(ItemId(0), EntityId(5)).unwrap();
        assert!(t.set(ItemId(1), EntityId(5)).is_err());
        assert!(LinkTable::total(vec![EntityId(1), EntityId(1)]).is_err());
    }

    fn rated(rows: &[(u32, u32, f64)]) -> InteractionDataset {
        let nu = rows.iter().map(|r| r.0).max().map_or(0, |m| m + 1) as usize;
        let ni = rows.iter().map(|r| r.1).max().map_or(0, |m| m + 1) as usize;
        InteractionDataset::new(
            nu,
            ni,
            rows.iter().map(|&(u, i, r)| Interaction::rated(u, i, r)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn rating_filter_cases() {
        let ds = rated(&[(0, 0, 3.0), (0, 1, 4.0), (1, 1, 5.0)]);
        assert_eq!(filter_by_rating(&ds, 4.0).unwrap().interactions.len(), 2);
        assert_eq!(filter_by_rating(&ds, 0.0).unwrap(), ds);
        assert!(filter_by_rating(&ds, f64::NAN).is_err());
        let unrated = InteractionDataset::new(1, 1, vec![Interaction::new(0, 0)]).unwrap();
        assert!(filter_by_rating(&unrated, 1.0).is_err());
    }

    #[test]
    fn rating_filter_matches_linear_scan() {
        let rows = [
            (0, 0, 1.0),
            (0, 1, 4.0),
            (1, 2, 5.0),
            (2, 0, 3.5),
            (2, 3, 4.0),
            (3, 1, 2.0),
            (3, 2, 4.5),
            (4, 4, 3.9),
            (4, 0, 5.0),
            (1, 4, 4.1),
        ];
        let ds = rated(&rows);
        let got = filter_by_rating(&ds, 4.0).unwrap();
        let expected: Vec<(String, String)> = rows
            .iter()
            .filter(|r| r.2 >= 4.0)
            .map(|r| (r.0.to_string(), r.1.to_string()))
            .collect();
        let got_pairs: Vec<(String, String)> = got
            .interactions
            .iter()
            .map(|x| {
                (
                    got.user_labels[x.user.index()].clone(),
                    got.item_labels[x.item.index()].clone(),
                )
            })
            .collect();
        assert_eq!(got_pairs, expected);
        assert_eq!(got.user_count(), 5);
    }

    #[test]
    fn kcore_star_empties() {
        let ds = rated(&[(0, 0, 1.0), (1, 0, 1.0), (2, 0, 1.0)]);
        let out = k_core_filter(&ds, 2);
        assert!(out.interactions.is_empty());
        assert_eq!((out.user_count(), out.item_count()), (0, 0));
    }

    #[test]
    fn kcore_zero_is_identity() {
        let ds = rated(&[(0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert_eq!(k_core_filter(&ds, 0), ds);
    }

    /// Brute-force fixpoint: repeatedly remove one violating interaction.
    fn kcore_oracle(rows: &[(u32, u32)], k: usize) -> Vec<(u32, u32)> {
        let mut rows = rows.to_vec();
        loop {
            let bad = rows.iter().position(|&(u, i)| {
                rows.iter().filter(|r| r.0 == u).count() <= k
                    || rows.iter().filter(|r| r.1 == i).count() <= k
            });
            match bad {
                Some(p) => {
                    rows.remove(p);
                }
                None => return rows,
            }
        }
    }

    #[test]
    fn kcore_cascade_differs_from_single_pass() {
        // user 2 has one interaction; dropping it leaves item 1 with degree 1
        let rows = [(0, 0), (1, 0), (0, 2), (1, 2), (1, 1), (2, 1)];
        let ds = rated(&rows.map(|(u, i)| (u, i, 1.0)));
        let got = k_core_filter(&ds, 1);
        let single_pass: Vec<(u32, u32)> = rows
            .iter()
            .copied()
            .filter(|&(u, i)| {
                rows.iter().filter(|r| r.0 == u).count() > 1
                    && rows.iter().filter(|r| r.1 == i).count() > 1
            })
            .collect();
        let oracle = kcore_oracle(&rows, 1);
        assert_eq!(oracle, vec![(0, 0), (1, 0), (0, 2), (1, 2)]);
        assert_ne!(single_pass, oracle);
        let labels: Vec<(u32, u32)> = got
            .interactions
            .iter()
            .map(|x| {
                (
                    got.user_labels[x.user.index()].parse().unwrap(),
                    got.item_labels[x.item.index()].parse().unwrap(),
                )
            })
            .collect();
        assert_eq!(labels, oracle);
    }

    #[test]
    fn stats_cases() {
        let one = InteractionDataset::new(1, 1, vec![Interaction::new(0, 0)]).unwrap();
        assert_eq!(dataset_stats(&one).unwrap().sparsity, 0.0);
        assert!(DatasetStats::from_counts(0, 4, 0).is_err());
        let ml = DatasetStats::from_counts(6038, 3498, 573_637).unwrap();
        assert!((ml.sparsity * 100.0 - 97.284).abs() <= 0.001);
    }

    fn arb_rows() -> impl Strategy<Value = Vec<(u32, u32, f64)>> {
        proptest::collection::vec((0u32..12, 0u32..10, 1u32..6), 1..60)
            .prop_map(|v| v.into_iter().map(|(u, i, r)| (u, i, r as f64)).collect())
    }

    proptest! {
        #[test]
        fn filters_are_idempotent(rows in arb_rows(), k in 0usize..4, t in 1u32..6) {
            let ds = rated(&rows);
            let once = k_core_filter(&ds, k);
            prop_assert_eq!(k_core_filter(&once, k), once.clone());
            let f = filter_by_rating(&ds, t as f64).unwrap();
            prop_assert_eq!(filter_by_rating(&f, t as f64).unwrap(), f);
        }

        #[test]
        fn kcore_survivors_exceed_k(rows in arb_rows(), k in 0usize..4) {
            let out = k_core_filter(&rated(&rows), k);
            let mut ud = vec![0; out.user_count()];
            let mut id = vec![0; out.item_count()];
            for x in &out.interactions {
                ud[x.user.index()] += 1;
                id[x.item.index()] += 1;
            }
            prop_assert!(ud.iter().chain(&id).all(|&d| d > k));
            // matches the brute-force fixpoint
            let pairs: Vec<(u32, u32)> = rows.iter().map(|r| (r.0, r.1)).collect();
            prop_assert_eq!(out.interactions.len(), kcore_oracle(&pairs, k).len());
        }

        #[test]
        fn redensified_ids_are_bijections(rows in arb_rows(), t in 1u32..6) {
            let out = filter_by_rating(&rated(&rows), t as f64).unwrap();
            let mut users: Vec<u32> = out.interactions.iter().map(|x| x.user.0).collect();
            users.sort_unstable();
            users.dedup();
            prop_assert_eq!(users, (0..out.user_count() as u32).collect::<Vec<_>>());
            let mut items: Vec<u32> = out.interactions.iter().map(|x| x.item.0).collect();
            items.sort_unstable();
            items.dedup();
            prop_assert_eq!(items, (0..out.item_count() as u32).collect::<Vec<_>>());
        }
    }
}
