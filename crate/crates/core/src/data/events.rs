//! JSONL readers and writers for raw interaction logs and bundle corpora.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One purchased item. Items sharing `(user, order)` form a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEvent {
    pub user: u64,
    pub order: u64,
    pub item: u64,
    #[serde(default)]
    pub cate: Option<u64>,
    pub price: f64,
}

/// Catalogue row for the pre-defined bundle format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub item: u64,
    #[serde(default)]
    pub cate: Option<u64>,
    pub price: f64,
}

/// One bundle interaction in the pre-defined bundle format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleRecord {
    pub user: u64,
    pub seq: u64,
    pub bundle: Vec<u64>,
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn check_price(path: &Path, line: usize, price: f64) -> Result<()> {
    if price.is_finite() && price >= 0.0 {
        Ok(())
    } else {
        Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("price must be a non-negative number, got {price}"),
        })
    }
}

/// Reads an events file in file order.
pub fn load_events(path: &Path) -> Result<Vec<RawEvent>> {
    let events: Vec<RawEvent> = read_jsonl(path)?;
    for (i, e) in events.iter().enumerate() {
        check_price(path, i + 1, e.price)?;
    }
    Ok(events)
}

pub fn write_events(path: &Path, events: &[RawEvent]) -> Result<()> {
    write_jsonl(path, events)
}

pub fn load_catalog(path: &Path) -> Result<Vec<CatalogEntry>> {
    let rows: Vec<CatalogEntry> = read_jsonl(path)?;
    for (i, r) in rows.iter().enumerate() {
        check_price(path, i + 1, r.price)?;
    }
    Ok(rows)
}

pub fn load_bundle_records(path: &Path) -> Result<Vec<BundleRecord>> {
    let rows: Vec<BundleRecord> = read_jsonl(path)?;
    if let Some(i) = rows.iter().position(|r| r.bundle.is_empty()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: "empty bundle".into(),
        });
    }
    Ok(rows)
}

/// Catalogue implied by an event log; the first occurrence of an item fixes
/// its category and price.
pub fn catalog_from_events(events: &[RawEvent]) -> Vec<CatalogEntry> {
    let mut seen: HashMap<u64, CatalogEntry> = HashMap::new();
    for e in events {
        seen.entry(e.item).or_insert_with(|| CatalogEntry {
            item: e.item,
            cate: e.cate,
            price: e.price,
        });
    }
    let mut out: Vec<CatalogEntry> = seen.into_values().collect();
    out.sort_by_key(|c| c.item);
    out
}

#[cfg(test)]
mod tests {
    use super::*;


    fn file_with(lines: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(lines.as_bytes()).unwrap();
        f
    }

    #[test]
    fn empty_file_has_no_events() {
        let f = file_with("");
        assert!(load_events(f.path()).unwrap().is_empty());
    }

    #[test]
    fn reads_well_formed_lines_in_order() {
        let f = file_with(
            r#"{"user":1,"order":0,"item":5,"cate":2,"price":3.5}
{"user":1,"order":0,"item":6,"cate":null,"price":1.0}
{"user":2,"order":7,"item":5,"price":3.5}
"#,
        );
        let ev = load_events(f.path()).unwrap();
        assert_eq!(ev.len(), 3);
        assert_eq!(ev[1].cate, None);
        assert_eq!(ev[2].user, 2);
    }

    #[test]
    fn missing_item_reports_line() {
        let f = file_with(
            r#"{"user":1,"order":0,"item":5,"cate":2,"price":3.5}

{"user":1,"order":0,"cate":2,"price":3.5}
"#,
        );
        match load_events(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_price_is_rejected() {
        let f = file_with(r#"{"user":1,"order":0,"item":5,"price":-1.0}"#);
        assert!(matches!(load_events(f.path()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn catalog_keeps_first_occurrence() {
        let ev = vec![
            RawEvent {
                user: 0,
                order: 0,
                item: 9,
                cate: Some(1),
                price: 2.0,
            },
            RawEvent {
                user: 1,
                order: 0,
                item: 9,
                cate: Some(3),
                price: 5.0,
            },
        ];
        let c = catalog_from_events(&ev);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].cate, Some(1));
    }
}
