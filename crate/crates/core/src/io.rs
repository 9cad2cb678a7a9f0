//! Text artifact formats.
//!
//! Every artifact starts with a `#schema <name>/<version>` line followed by
//! `#key value` header lines, then a tab-separated body. Floats are written
//! in shortest round-trip form so re-reading an artifact is lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::corpus::{EntityKind, FieldId, MatchStats, ResolvedCorpus};
use crate::emb_model::{EmbeddingConfig, FieldEmbedding};
use crate::error::{Error, Result};
use crate::freq_model::{ModelTag, ProximityMatrix};
use crate::matrix::SparseRows;
use crate::presence::TimeWindow;
use crate::specialization::RcaMatrix;

pub const CORPUS_SCHEMA: &str = "rspace.corpus/1";
pub const PROXIMITY_SCHEMA: &str = "rspace.proximity/1";
pub const EMBEDDING_SCHEMA: &str = "rspace.embedding/1";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Header {
    pub schema: String,
    pub entries: Vec<(String, String)>,
}

impl Header {
    pub fn new(schema: &str) -> Self {
        Self {
            schema: schema.to_string(),
            entries: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.set(key, value);
        self
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// The header lines as they appear at the top of an artifact.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out);
        out
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::config(format!("artifact header lacks `{key}`")))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::config(format!("artifact header `{key}` has bad value {raw:?}")))
    }

    fn write(&self, out: &mut String) {
        let _ = writeln!(out, "#schema {}", self.schema);
        for (k, v) in &self.entries {
            let _ = writeln!(out, "#{k} {v}");
        }
    }

    /// Splits `text` into its header and body lines, checking the schema.
    fn split<'a>(
        text: &'a str,
        path: &Path,
        schema: &str,
    ) -> Result<(Header, Vec<(usize, &'a str)>)> {
        let mut header = Header::default();
        let mut body = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix('#') {
                if body.is_empty() {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    if k == "schema" {
                        header.schema = v.to_string();
                    } else {
                        header.entries.push((k.to_string(), v.to_string()));
                    }
                    continue;
                }
            }
            if !line.trim().is_empty() {
                body.push((i + 1, line));
            }
        }
        if header.schema != schema {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("expected schema {schema}, found {:?}", header.schema),
            });
        }
        Ok((header, body))
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn join_fields(fields: &[FieldId]) -> String {
    fields
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn split_fields(s: &str) -> Result<Vec<FieldId>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(str::parse).collect()
}

// ---------------------------------------------------------------------------
// corpus

pub fn corpus_to_string(c: &ResolvedCorpus, mut header: Header) -> String {
    header.schema = CORPUS_SCHEMA.into();
    header.set("kind", c.kind);
    header.set("fields", join_fields(&c.fields));
    let s = c.match_stats;
    header.set(
        "match",
        format!(
            "exact={},approximate={},unmatched={},missing_attribute={}",
            s.exact, s.approximate, s.unmatched, s.missing_attribute
        ),
    );
    let mut out = String::new();
    header.write(&mut out);
    out.push_str("entity_id\tyear\tn_authors\tfield_ids\n");
    for r in &c.records {
        let fields: Vec<FieldId> = r.fields.iter().map(|&i| c.fields[i as usize]).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            c.entities[r.entity as usize],
            r.year,
            r.n_authors,
            join_fields(&fields)
        );
    }
    out
}

fn parse_match(s: &str) -> Result<MatchStats> {
    let mut m = MatchStats::default();
    for part in s.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::config(format!("bad match entry {part:?}")))?;
        let v: usize = v
            .parse()
            .map_err(|_| Error::config(format!("bad count {v:?}")))?;
        match k {
            "exact" => m.exact = v,
            "approximate" => m.approximate = v,
            "unmatched" => m.unmatched = v,
            "missing_attribute" => m.missing_attribute = v,
            _ => {}
        }
    }
    Ok(m)
}

pub fn read_corpus(path: &Path) -> Result<(ResolvedCorpus, Header)> {
    let text = read(path)?;
    let (header, body) = Header::split(&text, path, CORPUS_SCHEMA)?;
    let kind: EntityKind = header.parse("kind")?;
    let fields = split_fields(header.require("fields")?)?;
    let match_stats = parse_match(header.get("match").unwrap_or(""))?;
    let mut rows = Vec::with_capacity(body.len());
    for (line, row) in body.into_iter().skip(1) {
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() != 4 {
            return Err(parse_err(
                path,
                line,
                format!("expected 4 columns, got {}", cols.len()),
            ));
        }
        let year = cols[1]
            .parse()
            .map_err(|_| parse_err(path, line, "bad year"))?;
        let n = cols[2]
            .parse()
            .map_err(|_| parse_err(path, line, "bad n_authors"))?;
        let fs = split_fields(cols[3]).map_err(|e| parse_err(path, line, e.to_string()))?;
        rows.push((cols[0].to_string(), fs, n, year));
    }
    let mut corpus = ResolvedCorpus::from_tuples(kind, fields, rows)?;
    corpus.match_stats = match_stats;
    Ok((corpus, header))
}

// ---------------------------------------------------------------------------
// proximity

pub fn proximity_to_string(phi: &ProximityMatrix, mut header: Header) -> String {
    header.schema = PROXIMITY_SCHEMA.into();
    header.set("model", phi.model);
    header.set("window", phi.window);
    let mut out = String::new();
    header.write(&mut out);
    out.push_str("field_id");
    for f in phi.fields().iter() {
        let _ = write!(out, "\t{f}");
    }
    out.push('\n');
    for (i, f) in phi.fields().iter().enumerate() {
        let _ = write!(out, "{f}");
        for v in phi.row(i) {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

pub fn read_proximity(path: &Path) -> Result<(ProximityMatrix, Header)> {
    let text = read(path)?;
    let (header, body) = Header::split(&text, path, PROXIMITY_SCHEMA)?;
    let model: ModelTag = header.parse("model")?;
    let window: TimeWindow = header.parse("window")?;
    let mut lines = body.into_iter();
    let (hline, head) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing column header"))?;
    let fields: Vec<FieldId> = head
        .split('\t')
        .skip(1)
        .map(str::parse)
        .collect::<Result<_>>()
        .map_err(|e| parse_err(path, hline, e.to_string()))?;
    let n = fields.len();
    let mut values = Vec::with_capacity(n * n);
    let mut n_rows = 0;
    for (line, row) in lines {
        let mut cols = row.split('\t');
        let id: FieldId = cols
            .next()
            .unwrap_or("")
            .parse()
            .map_err(|e: Error| parse_err(path, line, e.to_string()))?;
        if fields.get(n_rows) != Some(&id) {
            return Err(parse_err(path, line, format!("row {id} out of order")));
        }
        let before = values.len();
        for c in cols {
            values.push(
                c.parse::<f64>()
                    .map_err(|_| parse_err(path, line, format!("bad value {c:?}")))?,
            );
        }
        if values.len() - before != n {
            return Err(parse_err(path, line, "wrong number of columns"));
        }
        n_rows += 1;
    }
    if n_rows != n {
        return Err(parse_err(
            path,
            0,
            format!("expected {n} rows, found {n_rows}"),
        ));
    }
    Ok((
        ProximityMatrix::from_dense(Arc::new(fields), values, model, window)?,
        header,
    ))
}

/// `u v w` for every nonzero off-diagonal entry (upper triangle only for
/// symmetric matrices).
pub fn proximity_edgelist(phi: &ProximityMatrix) -> String {
    let symmetric = phi.model == ModelTag::Embedding;
    let fields = phi.fields();
    let mut out = String::from("# u\tv\tw\n");
    for i in 0..phi.n_fields() {
        let start = if symmetric { i + 1 } else { 0 };
        for j in start..phi.n_fields() {
            let w = phi.get(i, j);
            if i != j && w > 0.0 {
                let _ = writeln!(out, "{}\t{}\t{}", fields[i], fields[j], w);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// embedding

pub fn embedding_to_string(e: &FieldEmbedding, mut header: Header) -> String {
    header.schema = EMBEDDING_SCHEMA.into();
    header.set("window", e.window);
    header.set("dim", e.dim());
    header.set(
        "config",
        serde_json::to_string(&e.config).expect("plain struct"),
    );
    let mut out = String::new();
    header.write(&mut out);
    for (i, f) in e.fields().iter().enumerate() {
        let _ = write!(out, "{f}");
        for v in e.vector(i) {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

pub fn read_embedding(path: &Path) -> Result<(FieldEmbedding, Header)> {
    let text = read(path)?;
    let (header, body) = Header::split(&text, path, EMBEDDING_SCHEMA)?;
    let window: TimeWindow = header.parse("window")?;
    let dim: usize = header.parse("dim")?;
    let config: EmbeddingConfig = serde_json::from_str(header.require("config")?)
        .map_err(|e| Error::config(format!("bad embedding config: {e}")))?;
    let mut fields = Vec::new();
    let mut vectors = Vec::new();
    for (line, row) in body {
        let mut cols = row.split(' ');
        fields.push(
            cols.next()
                .unwrap_or("")
                .parse::<FieldId>()
                .map_err(|e| parse_err(path, line, e.to_string()))?,
        );
        let before = vectors.len();
        for c in cols {
            vectors.push(
                c.parse::<f64>()
                    .map_err(|_| parse_err(path, line, format!("bad value {c:?}")))?,
            );
        }
        if vectors.len() - before != dim {
            return Err(parse_err(path, line, format!("expected {dim} components")));
        }
    }
    Ok((
        FieldEmbedding::from_vectors(Arc::new(fields), dim, vectors, config, window)?,
        header,
    ))
}

// ---------------------------------------------------------------------------
// sparse triples

/// `entity_id field_id value` for each stored entry.
pub fn triples_to_string<T: Copy + Default + PartialEq>(
    m: &SparseRows<T>,
    header: Header,
    fmt_value: impl Fn(T) -> String,
) -> String {
    let mut out = String::new();
    header.write(&mut out);
    out.push_str("entity_id\tfield_id\tvalue\n");
    for (e, f, v) in m.triples() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            m.entities()[e],
            m.fields()[f],
            fmt_value(v)
        );
    }
    out
}

/// RCA triples with the stage code (`0 N I D`) as a fourth column.
pub fn stages_to_string(r: &RcaMatrix, header: Header) -> String {
    let mut out = String::new();
    header.write(&mut out);
    out.push_str("entity_id\tfield_id\trca\tstage\n");
    for (e, f, v) in r.values.triples() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.values.entities()[e],
            r.values.fields()[f],
            v,
            crate::specialization::Stage::of(v)
        );
    }
    out
}
