//! Flat binary checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! 8 bytes   magic  b"KGUCKPT1"
//! u32       header length H
//! H bytes   UTF-8 JSON header: kind, dim, n_users, n_items, config,
//!           table names and row counts, index maps, training log
//! ...       every table in header order, row-major f32
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpochRecord, ModelConfig, ModelKind, Params, Table, TrainedModel};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"KGUCKPT1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: ModelKind,
    dim: usize,
    n_users: usize,
    n_items: usize,
    config: ModelConfig,
    tables: Vec<(String, usize)>,
    #[serde(default)]
    user_rows: Vec<u32>,
    #[serde(default)]
    item_rows: Vec<u32>,
    #[serde(default)]
    interact: u32,
    #[serde(default)]
    neighbors: Vec<Vec<(u32, u32)>>,
    log: Vec<EpochRecord>,
    best_epoch: usize,
}

pub fn to_bytes(model: &TrainedModel) -> Result<Vec<u8>> {
    let dim = model.config.embedding_dim;
    let mut header = Header {
        kind: model.kind,
        dim,
        n_users: model.n_users,
        n_items: model.n_items,
        config: model.config,
        tables: Vec::new(),
        user_rows: Vec::new(),
        item_rows: Vec::new(),
        interact: 0,
        neighbors: Vec::new(),
        log: model.log.clone(),
        best_epoch: model.best_epoch,
    };
    let tables: Vec<(&str, &Table)> = match &model.params {
        Params::Bpr { users, items } => vec![("users", users), ("items", items)],
        Params::Cfkg {
            entities,
            relations,
            user_rows,
            item_rows,
            interact,
        } => {
            header.user_rows = user_rows.clone();
            header.item_rows = item_rows.clone();
            header.interact = *interact;
            vec![("entities", entities), ("relations", relations)]
        }
        Params::Kgcn {
            users,
            entities,
            relations,
            item_rows,
            neighbors,
        } => {
            header.item_rows = item_rows.clone();
            header.neighbors = neighbors.clone();
            vec![("users", users), ("entities", entities), ("relations", relations)]
        }
    };
    header.tables = tables.iter().map(|(n, t)| (n.to_string(), t.rows)).collect();
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(12 + json.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in tables {
        for x in &t.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let h_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(12..12 + h_len).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body)?;
    let mut offset = 12 + h_len;
    let mut tables = Vec::new();
    for (name, rows) in &header.tables {
        let n = rows * header.dim * 4;
        let raw = bytes
            .get(offset..offset + n)
            .ok_or_else(|| bad(&format!("truncated table `{name}`")))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        tables.push(Table {
            rows: *rows,
            dim: header.dim,
            data,
        });
        offset += n;
    }
    if offset != bytes.len() {
        return Err(bad("trailing bytes after the last table"));
    }
    let mut it = tables.into_iter();
    let mut next = || it.next().ok_or_else(|| bad("missing table"));
    let params = match header.kind {
        ModelKind::BprMf => Params::Bpr {
            users: next()?,
            items: next()?,
        },
        ModelKind::CfkgLite => Params::Cfkg {
            entities: next()?,
            relations: next()?,
            user_rows: header.user_rows,
            item_rows: header.item_rows,
            interact: header.interact,
        },
        ModelKind::KgcnLite => Params::Kgcn {
            users: next()?,
            entities: next()?,
            relations: next()?,
            item_rows: header.item_rows,
            neighbors: header.neighbors,
        },
    };
    Ok(TrainedModel {
        kind: header.kind,
        config: header.config,
        n_users: header.n_users,
        n_items: header.n_items,
        params,
        log: header.log,
        best_epoch: header.best_epoch,
    })
}

pub fn save(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
