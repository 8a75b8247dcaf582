//! FNC-1 delimited files and the entity sidecar.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::sync::Arc;

use super::{Article, ArticleId, ArticleStore, Question, StanceLabel, StancePair};
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader)
}

fn row_error(source: &str, err: &csv::Error) -> Error {
    let row = err.position().map_or(0, |p| p.line());
    Error::MalformedRow {
        path: source.to_string(),
        row,
        message: err.to_string(),
    }
}

fn parse_id(source: &str, row: u64, field: &str) -> Result<ArticleId> {
    field.trim().parse().map_err(|_| Error::MalformedRow {
        path: source.to_string(),
        row,
        message: format!("body id {field:?} is not an integer"),
    })
}

/// Loads a bodies file (`Body ID`, `articleBody`).
pub fn load_bodies(path: impl AsRef<Path>) -> Result<ArticleStore> {
    let path = path.as_ref();
    load_bodies_from_reader(open(path)?, &path.display().to_string())
}

pub fn load_bodies_from_reader<R: Read>(reader: R, source: &str) -> Result<ArticleStore> {
    let mut rdr = csv_reader(reader);
    let mut store = ArticleStore::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| row_error(source, &e))?;
        let row = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(Error::MalformedRow {
                path: source.to_string(),
                row,
                message: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        let id = parse_id(source, row, &rec[0])?;
        store.insert(Article::new(id, &rec[1]))?;
    }
    Ok(store)
}

/// Loads a stances file (`Headline`, `Body ID`, `Stance`) against `store`.
///
/// Pairs keep file order; identical headlines share one [`Question`].
pub fn load_stances(path: impl AsRef<Path>, store: &ArticleStore) -> Result<Vec<StancePair>> {
    let path = path.as_ref();
    load_stances_from_reader(open(path)?, &path.display().to_string(), store)
}

pub fn load_stances_from_reader<R: Read>(reader: R, source: &str, store: &ArticleStore) -> Result<Vec<StancePair>> {
    let mut rdr = csv_reader(reader);
    let mut questions: HashMap<String, Arc<Question>> = HashMap::new();
    let mut pairs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| row_error(source, &e))?;
        let row = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(Error::MalformedRow {
                path: source.to_string(),
                row,
                message: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        let id = parse_id(source, row, &rec[1])?;
        if !store.contains(id) {
            return Err(Error::DanglingBody { row, id });
        }
        let label: StanceLabel = rec[2].parse().map_err(|label| Error::UnknownStance { row, label })?;
        let question = questions
            .entry(rec[0].to_string())
            .or_insert_with(|| Arc::new(Question::new(&rec[0])))
            .clone();
        pairs.push(StancePair {
            question,
            article_id: id,
            label,
        });
    }
    Ok(pairs)
}

/// Reads `article_id<TAB>entity1|entity2|...` lines. Blank lines are skipped;
/// entity surfaces are lowercased and trimmed.
pub fn load_entity_sidecar(path: impl AsRef<Path>) -> Result<HashMap<ArticleId, Vec<String>>> {
    let path = path.as_ref();
    parse_entity_sidecar(BufReader::new(open(path)?), &path.display().to_string())
}

pub fn parse_entity_sidecar<R: BufRead>(reader: R, source: &str) -> Result<HashMap<ArticleId, Vec<String>>> {
    let mut out = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let row = n as u64 + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, ents) = line.split_once('\t').ok_or_else(|| Error::MalformedRow {
            path: source.to_string(),
            row,
            message: "missing tab separator".into(),
        })?;
        let id = parse_id(source, row, id)?;
        let ents = ents
            .split('|')
            .map(|e| e.trim().to_lowercase())
            .filter(|e| !e.is_empty())
            .collect();
        if out.insert(id, ents).is_some() {
            return Err(Error::DuplicateArticle(id));
        }
    }
    Ok(out)
}
