//! Line-oriented TSV formats.
//!
//! ```text
//! # comment
//! users=3 items=4          <- optional header, first non-comment line
//! 0<TAB>2                  <- interactions: user, item / social: follower, followee
//! ```
//!
//! Feature files carry one `id<TAB>v1,v2,...,vd` line per entity.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::num::IntErrorKind;
use std::path::Path;

use ndarray::Array2;

use super::{FeatureTable, InteractionMatrix, SocialGraph};
use crate::error::{Error, Result};

#[derive(Debug, Default)]
struct Header {
    users: Option<usize>,
    items: Option<usize>,
}

struct PairFile {
    header: Header,
    pairs: Vec<(usize, usize)>,
    linenos: Vec<usize>,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_id(path: &Path, line: usize, field: &str) -> Result<usize> {
    field.trim().parse::<usize>().map_err(|e| match e.kind() {
        IntErrorKind::PosOverflow => parse_err(path, line, format!("id overflow: {field:?}")),
        _ => parse_err(path, line, format!("invalid id {field:?}")),
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Yields `(1-based line number, content)` for non-blank, non-comment lines.
fn data_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push((idx + 1, trimmed.to_string()));
    }
    Ok(out)
}

fn parse_header(path: &Path, lineno: usize, line: &str) -> Result<Header> {
    let mut header = Header::default();
    for token in line.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| parse_err(path, lineno, format!("bad header token {token:?}")))?;
        let value = parse_id(path, lineno, value)?;
        match key {
            "users" => header.users = Some(value),
            "items" => header.items = Some(value),
            other => return Err(parse_err(path, lineno, format!("unknown header key {other:?}"))),
        }
    }
    Ok(header)
}

fn read_pairs(path: &Path) -> Result<PairFile> {
    let mut header = Header::default();
    let mut pairs = Vec::new();
    let mut linenos = Vec::new();
    for (n, (lineno, line)) in data_lines(path)?.into_iter().enumerate() {
        if n == 0 && line.contains('=') {
            header = parse_header(path, lineno, &line)?;
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(path, lineno, "expected two tab-separated ids"));
        };
        pairs.push((parse_id(path, lineno, a)?, parse_id(path, lineno, b)?));
        linenos.push(lineno);
    }
    Ok(PairFile {
        header,
        pairs,
        linenos,
    })
}

fn resolve_count(
    path: &Path,
    declared: Option<usize>,
    observed_max: Option<usize>,
    what: &str,
) -> Result<usize> {
    let implied = observed_max.map_or(0, |m| m + 1);
    match declared {
        Some(d) if d < implied => Err(Error::Data(format!(
            "{}: {what} id {} exceeds declared count {d}",
            path.display(),
            implied - 1
        ))),
        Some(d) => Ok(d),
        None => Ok(implied),
    }
}

/// Loads `user<TAB>item` positive feedback, deduplicating repeated lines.
pub fn load_interactions(path: impl AsRef<Path>) -> Result<InteractionMatrix> {
    let path = path.as_ref();
    let file = read_pairs(path)?;
    if file.pairs.is_empty() && file.header.users.is_none() {
        return Err(Error::Data(format!("{}: empty interaction file", path.display())));
    }
    let users = resolve_count(
        path,
        file.header.users,
        file.pairs.iter().map(|p| p.0).max(),
        "user",
    )?;
    let items = resolve_count(
        path,
        file.header.items,
        file.pairs.iter().map(|p| p.1).max(),
        "item",
    )?;
    InteractionMatrix::new(users, items, file.pairs)
}

/// Loads `follower<TAB>followee` edges. Self loops are rejected with the
/// offending line number.
pub fn load_social(path: impl AsRef<Path>) -> Result<SocialGraph> {
    let path = path.as_ref();
    let file = read_pairs(path)?;
    let max_id = file.pairs.iter().map(|&(a, b)| a.max(b)).max();
    let users = resolve_count(path, file.header.users, max_id, "user")?;
    if let Some(idx) = file.pairs.iter().position(|(a, b)| a == b) {
        return Err(parse_err(
            path,
            file.linenos[idx],
            format!("self-loop on user {}", file.pairs[idx].0),
        ));
    }
    SocialGraph::new(users, file.pairs)
}

/// Loads one `id<TAB>v1,...,vd` row per entity; every id in
/// `0..expected_count` must be present exactly once.
pub fn load_features(path: impl AsRef<Path>, expected_count: usize) -> Result<FeatureTable> {
    let path = path.as_ref();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; expected_count];
    let mut dim = None;
    for (lineno, line) in data_lines(path)? {
        let (id, values) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(path, lineno, "expected id<TAB>values"))?;
        let id = parse_id(path, lineno, id)?;
        if id >= expected_count {
            return Err(parse_err(
                path,
                lineno,
                format!("entity {id} out of range (expected {expected_count})"),
            ));
        }
        let values = values.trim();
        let vector = if values.is_empty() {
            Vec::new()
        } else {
            values
                .split(',')
                .map(|v| {
                    let x: f64 = v
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(path, lineno, format!("invalid value {v:?}")))?;
                    if x.is_finite() {
                        Ok(x)
                    } else {
                        Err(parse_err(path, lineno, format!("non-finite value {v:?}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?
        };
        match dim {
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("inconsistent dim: expected {d}, got {}", vector.len()),
                ))
            }
            Some(_) => {}
        }
        if rows[id].replace(vector).is_some() {
            return Err(parse_err(path, lineno, format!("duplicate entity {id}")));
        }
    }
    let dim = dim.unwrap_or(0);
    let mut data = Vec::with_capacity(expected_count * dim);
    for (id, row) in rows.into_iter().enumerate() {
        let row = row.ok_or_else(|| {
            Error::Data(format!("{}: missing features for entity {id}", path.display()))
        })?;
        data.extend(row);
    }
    let matrix = Array2::from_shape_vec((expected_count, dim), data)
        .expect("row lengths checked above");
    FeatureTable::new(matrix)
}

pub fn write_interactions<W: Write>(m: &InteractionMatrix, mut out: W) -> std::io::Result<()> {
    writeln!(out, "users={} items={}", m.num_users(), m.num_items())?;
    for (u, i) in m.edges() {
        writeln!(out, "{u}\t{i}")?;
    }
    Ok(())
}

pub fn write_social<W: Write>(g: &SocialGraph, mut out: W) -> std::io::Result<()> {
    writeln!(out, "users={}", g.num_users())?;
    for (a, b) in g.edges() {
        writeln!(out, "{a}\t{b}")?;
    }
    Ok(())
}

pub fn write_features<W: Write>(t: &FeatureTable, mut out: W) -> std::io::Result<()> {
    for (id, row) in t.matrix().rows().into_iter().enumerate() {
        write!(out, "{id}\t")?;
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.write_all(b",")?;
            }
            // `Display` for f64 is the shortest round-tripping representation.
            write!(out, "{v}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn save_with<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn save_interactions(m: &InteractionMatrix, path: impl AsRef<Path>) -> Result<()> {
    save_with(path.as_ref(), |out| write_interactions(m, out))
}

pub fn save_social(g: &SocialGraph, path: impl AsRef<Path>) -> Result<()> {
    save_with(path.as_ref(), |out| write_social(g, out))
}

pub fn save_features(t: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    save_with(path.as_ref(), |out| write_features(t, out))
}
