//! Publication-record ingestion: record/taxonomy/venue-map loading, venue
//! resolution (exact, then split-substring approximate matching) and
//! aggregation of records into scientist, institution or state entities.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numeric field identifier (Scopus ASJC-style codes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FieldId(pub u32);

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for FieldId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .parse::<u32>()
            .map(FieldId)
            .map_err(|_| Error::config(format!("invalid field id {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicationRecord {
    pub researcher_id: String,
    pub venue_name: String,
    pub year: i32,
    pub n_authors: u32,
    pub institution: Option<String>,
    pub state: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Scientist,
    Institution,
    State,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityKind::Scientist => "scientist",
            EntityKind::Institution => "institution",
            EntityKind::State => "state",
        })
    }
}

impl FromStr for EntityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scientist" | "scientists" => Ok(EntityKind::Scientist),
            "institution" | "institutions" => Ok(EntityKind::Institution),
            "state" | "states" => Ok(EntityKind::State),
            other => Err(Error::config(format!("unknown entity kind {other:?}"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Taxonomy

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub id: FieldId,
    pub name: String,
    pub intermediate_id: u32,
    pub macro_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intermediate {
    pub id: u32,
    pub acronym: String,
    pub macro_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroArea {
    pub id: u32,
    pub name: String,
}

/// Three-level field hierarchy: field -> intermediate -> macro area.
///
/// Fields are kept sorted by id, so a field's position in `fields()` is its
/// column index in every matrix built from this taxonomy.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTaxonomy {
    fields: Vec<Field>,
    intermediates: Vec<Intermediate>,
    macros: Vec<MacroArea>,
    index: HashMap<FieldId, usize>,
}

impl FieldTaxonomy {
    pub fn new(
        mut fields: Vec<Field>,
        mut intermediates: Vec<Intermediate>,
        mut macros: Vec<MacroArea>,
    ) -> Result<Self> {
        fields.sort_by_key(|f| f.id);
        intermediates.sort_by_key(|i| i.id);
        macros.sort_by_key(|m| m.id);
        if fields.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::config("duplicate field id in taxonomy"));
        }
        if intermediates.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::config("duplicate intermediate id in taxonomy"));
        }
        let inter_macro: HashMap<u32, u32> =
            intermediates.iter().map(|i| (i.id, i.macro_id)).collect();
        let macro_ids: BTreeSet<u32> = macros.iter().map(|m| m.id).collect();
        for i in &intermediates {
            if !macro_ids.contains(&i.macro_id) {
                return Err(Error::config(format!(
                    "intermediate {} refers to unknown macro area {}",
                    i.id, i.macro_id
                )));
            }
        }
        for f in &fields {
            match inter_macro.get(&f.intermediate_id) {
                None => {
                    return Err(Error::config(format!(
                        "field {} refers to unknown intermediate {}",
                        f.id, f.intermediate_id
                    )))
                }
                Some(&m) if m != f.macro_id => {
                    return Err(Error::config(format!(
                        "field {} macro area {} disagrees with its intermediate's {}",
                        f.id, f.macro_id, m
                    )))
                }
                _ => {}
            }
        }
        let index = fields.iter().enumerate().map(|(i, f)| (f.id, i)).collect();
        Ok(Self {
            fields,
            intermediates,
            macros,
            index,
        })
    }

    /// Reads the delimited taxonomy file (`field_id, field_name,
    /// intermediate_id, intermediate_acronym, macro_id, macro_name`).
    pub fn load(path: &Path) -> Result<Self> {
        let mut reader = delimited_reader(path)?;
        let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        let col = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::config(format!("{}: missing column {name}", path.display())))
        };
        let (c_fid, c_fname, c_iid, c_iacr, c_mid, c_mname) = (
            col("field_id")?,
            col("field_name")?,
            col("intermediate_id")?,
            col("intermediate_acronym")?,
            col("macro_id")?,
            col("macro_name")?,
        );

        let mut fields = Vec::new();
        let mut inters: BTreeMap<u32, Intermediate> = BTreeMap::new();
        let mut macros: BTreeMap<u32, MacroArea> = BTreeMap::new();
        for (i, row) in reader.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| csv_error(path, e))?;
            let get = |c: usize| row.get(c).unwrap_or("").trim().to_string();
            let num = |c: usize| -> Result<u32> {
                get(c).parse::<u32>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!(
                        "expected integer in column {}",
                        headers.get(c).unwrap_or("?")
                    ),
                })
            };
            let fid = num(c_fid)?;
            let iid = num(c_iid)?;
            let mid = num(c_mid)?;
            fields.push(Field {
                id: FieldId(fid),
                name: get(c_fname),
                intermediate_id: iid,
                macro_id: mid,
            });
            let inter = Intermediate {
                id: iid,
                acronym: get(c_iacr),
                macro_id: mid,
            };
            if let Some(prev) = inters.insert(iid, inter) {
                if prev.macro_id != mid {
                    return Err(Error::config(format!(
                        "intermediate {iid} assigned to two macro areas ({} and {mid})",
                        prev.macro_id
                    )));
                }
            }
            macros.entry(mid).or_insert_with(|| MacroArea {
                id: mid,
                name: get(c_mname),
            });
        }
        Self::new(
            fields,
            inters.into_values().collect(),
            macros.into_values().collect(),
        )
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn intermediates(&self) -> &[Intermediate] {
        &self.intermediates
    }

    pub fn macros(&self) -> &[MacroArea] {
        &self.macros
    }

    pub fn field_ids(&self) -> Vec<FieldId> {
        self.fields.iter().map(|f| f.id).collect()
    }

    pub fn field_index(&self, id: FieldId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn field(&self, id: FieldId) -> Option<&Field> {
        self.field_index(id).map(|i| &self.fields[i])
    }

    pub fn intermediate(&self, id: u32) -> Option<&Intermediate> {
        self.intermediates
            .binary_search_by_key(&id, |i| i.id)
            .ok()
            .map(|i| &self.intermediates[i])
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Venue map and matching

/// Case-folds, trims and collapses internal whitespace.
pub fn normalize_venue(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VenueFieldMap {
    entries: HashMap<String, BTreeSet<FieldId>>,
}

impl VenueFieldMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, venue: &str, field: FieldId) {
        let key = normalize_venue(venue);
        if key.is_empty() {
            return;
        }
        self.entries.entry(key).or_default().insert(field);
    }

    pub fn get(&self, venue: &str) -> Option<&BTreeSet<FieldId>> {
        self.entries.get(&normalize_venue(venue))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads a delimited file with columns `venue_name, field_id`, one row per
    /// venue-field pair.
    pub fn load(path: &Path) -> Result<Self> {
        let mut reader = delimited_reader(path)?;
        let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        let col = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::config(format!("{}: missing column {name}", path.display())))
        };
        let (c_venue, c_field) = (col("venue_name")?, col("field_id")?);
        let mut map = Self::new();
        for (i, row) in reader.records().enumerate() {
            let row = row.map_err(|e| csv_error(path, e))?;
            let field = row
                .get(c_field)
                .unwrap_or("")
                .parse::<FieldId>()
                .map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 2,
                    msg: "invalid field_id".into(),
                })?;
            map.insert(row.get(c_venue).unwrap_or(""), field);
        }
        Ok(map)
    }

    /// Every field id referenced by the map must exist in the taxonomy.
    pub fn check_against(&self, taxonomy: &FieldTaxonomy) -> Result<()> {
        let mut missing: BTreeSet<FieldId> = BTreeSet::new();
        for fields in self.entries.values() {
            missing.extend(
                fields
                    .iter()
                    .filter(|f| taxonomy.field_index(**f).is_none()),
            );
        }
        match missing.first() {
            None => Ok(()),
            Some(first) => Err(Error::config(format!(
                "venue map references {} field id(s) absent from the taxonomy (first: {first})",
                missing.len()
            ))),
        }
    }
}

const VENUE_SPLIT_CHARS: [char; 5] = ['.', ';', ':', '/', '-'];

/// The full venue name followed by the pieces obtained by splitting it at
/// `. ; : / -`, trimmed, empty pieces removed.
pub fn venue_substrings(name: &str) -> Vec<String> {
    let mut out = vec![name.to_string()];
    if name.contains(&VENUE_SPLIT_CHARS[..]) {
        out.extend(
            name.split(&VENUE_SPLIT_CHARS[..])
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string),
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Exact,
    Approximate,
}

pub fn match_venue<'m>(
    name: &str,
    map: &'m VenueFieldMap,
) -> Option<(&'m BTreeSet<FieldId>, MatchKind)> {
    if let Some(fields) = map.get(name) {
        return Some((fields, MatchKind::Exact));
    }
    venue_substrings(name)
        .iter()
        .skip(1)
        .find_map(|s| map.get(s))
        .map(|fields| (fields, MatchKind::Approximate))
}

// ---------------------------------------------------------------------------
// Record loading

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    /// One JSON object per line with keys `researcher_id, venue, year,
    /// n_authors` and optional `institution, state`.
    JsonLines,
    /// Tab-separated with a header row; column names follow the layout of
    /// the public Lattes dump (`lattes_id`, `venue`, ...), see
    /// [`LATTES_COLUMN_ALIASES`].
    LattesTsv,
}

impl FromStr for RecordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" | "ndjson" => Ok(RecordFormat::JsonLines),
            "lattes-tsv" | "tsv" => Ok(RecordFormat::LattesTsv),
            other => Err(Error::config(format!("unknown record format {other:?}"))),
        }
    }
}

/// Accepted header names per logical column for [`RecordFormat::LattesTsv`].
pub const LATTES_COLUMN_ALIASES: [(&str, &[&str]); 6] = [
    (
        "researcher_id",
        &["researcher_id", "lattes_id", "id_lattes", "id"],
    ),
    ("venue", &["venue", "venue_name", "journal", "periodico"]),
    ("year", &["year", "ano"]),
    (
        "n_authors",
        &["n_authors", "num_authors", "authors", "n_autores"],
    ),
    ("institution", &["institution", "instituicao"]),
    ("state", &["state", "uf"]),
];

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub min_year: i32,
    pub max_year: i32,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            min_year: 1900,
            max_year: 2100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIssue {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedRecords {
    pub records: Vec<PublicationRecord>,
    /// Rows that parsed but failed validation; they are not in `records`.
    pub rejected: Vec<RowIssue>,
}

pub fn load_records(path: &Path, format: RecordFormat) -> Result<LoadedRecords> {
    load_records_with(path, format, LoadOptions::default())
}

pub fn load_records_with(
    path: &Path,
    format: RecordFormat,
    opts: LoadOptions,
) -> Result<LoadedRecords> {
    match format {
        RecordFormat::JsonLines => load_jsonl(path, opts),
        RecordFormat::LattesTsv => load_lattes_tsv(path, opts),
    }
}

struct RawRow<'a> {
    researcher_id: Option<&'a str>,
    venue: Option<&'a str>,
    year: Option<std::result::Result<i64, String>>,
    n_authors: Option<std::result::Result<i64, String>>,
    institution: Option<&'a str>,
    state: Option<&'a str>,
}

fn validate_row(
    row: RawRow<'_>,
    line: usize,
    opts: &LoadOptions,
) -> std::result::Result<PublicationRecord, RowIssue> {
    let issue = |msg: String| RowIssue { line, msg };
    let nonempty = |v: Option<&str>, key: &str| -> std::result::Result<String, RowIssue> {
        match v.map(str::trim) {
            Some(s) if !s.is_empty() => Ok(s.to_string()),
            _ => Err(issue(format!("missing mandatory field `{key}`"))),
        }
    };
    let researcher_id = nonempty(row.researcher_id, "researcher_id")?;
    let venue_name = nonempty(row.venue, "venue")?;
    let year = match row.year {
        None => return Err(issue("missing mandatory field `year`".into())),
        Some(Err(e)) => return Err(issue(format!("invalid `year`: {e}"))),
        Some(Ok(y)) => y,
    };
    if year < opts.min_year as i64 || year > opts.max_year as i64 {
        return Err(issue(format!(
            "year {year} outside [{}, {}]",
            opts.min_year, opts.max_year
        )));
    }
    let n_authors = match row.n_authors {
        None => return Err(issue("missing mandatory field `n_authors`".into())),
        Some(Err(e)) => return Err(issue(format!("invalid `n_authors`: {e}"))),
        Some(Ok(n)) => n,
    };
    if n_authors < 1 || n_authors > u32::MAX as i64 {
        return Err(issue(format!("n_authors must be >= 1, got {n_authors}")));
    }
    let opt = |v: Option<&str>| {
        v.map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
    };
    Ok(PublicationRecord {
        researcher_id,
        venue_name,
        year: year as i32,
        n_authors: n_authors as u32,
        institution: opt(row.institution),
        state: opt(row.state),
    })
}

fn json_int(v: &serde_json::Value) -> std::result::Result<i64, String> {
    match v {
        serde_json::Value::Number(n) => n.as_i64().ok_or_else(|| format!("not an integer: {n}")),
        serde_json::Value::String(s) => s
            .trim()
            .parse::<i64>()
            .map_err(|_| format!("not an integer: {s:?}")),
        other => Err(format!("not an integer: {other}")),
    }
}

fn load_jsonl(path: &Path, opts: LoadOptions) -> Result<LoadedRecords> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = LoadedRecords::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            msg: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            msg: "expected a JSON object".into(),
        })?;
        let s = |k: &str| obj.get(k).and_then(|v| v.as_str());
        let raw = RawRow {
            researcher_id: s("researcher_id"),
            venue: s("venue").or_else(|| s("venue_name")),
            year: obj.get("year").map(json_int),
            n_authors: obj.get("n_authors").map(json_int),
            institution: s("institution"),
            state: s("state"),
        };
        match validate_row(raw, lineno, &opts) {
            Ok(r) => out.records.push(r),
            Err(issue) => out.rejected.push(issue),
        }
    }
    Ok(out)
}

fn load_lattes_tsv(path: &Path, opts: LoadOptions) -> Result<LoadedRecords> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .flexible(true)
        .quoting(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let find = |logical: &str| -> Option<usize> {
        let aliases = LATTES_COLUMN_ALIASES
            .iter()
            .find(|(k, _)| *k == logical)
            .map(|(_, a)| *a)
            .unwrap_or(&[]);
        headers
            .iter()
            .position(|h| aliases.iter().any(|a| h.trim().eq_ignore_ascii_case(a)))
    };
    let mandatory = |logical: &str| {
        find(logical)
            .ok_or_else(|| Error::config(format!("{}: no column for `{logical}`", path.display())))
    };
    let (c_id, c_venue, c_year, c_auth) = (
        mandatory("researcher_id")?,
        mandatory("venue")?,
        mandatory("year")?,
        mandatory("n_authors")?,
    );
    let (c_inst, c_state) = (find("institution"), find("state"));
    let int = |s: &str| {
        s.trim()
            .parse::<i64>()
            .map_err(|_| format!("not an integer: {s:?}"))
    };

    let mut out = LoadedRecords::default();
    for (i, row) in reader.records().enumerate() {
        let lineno = i + 2;
        let row = row.map_err(|e| csv_error(path, e))?;
        let raw = RawRow {
            researcher_id: row.get(c_id),
            venue: row.get(c_venue),
            year: row.get(c_year).filter(|s| !s.trim().is_empty()).map(int),
            n_authors: row.get(c_auth).filter(|s| !s.trim().is_empty()).map(int),
            institution: c_inst.and_then(|c| row.get(c)),
            state: c_state.and_then(|c| row.get(c)),
        };
        match validate_row(raw, lineno, &opts) {
            Ok(r) => out.records.push(r),
            Err(issue) => out.rejected.push(issue),
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Resolution

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchStats {
    pub exact: usize,
    pub approximate: usize,
    pub unmatched: usize,
    /// Records skipped because they lack the institution/state attribute
    /// required by the entity kind. Not part of the three match counts.
    pub missing_attribute: usize,
}

impl MatchStats {
    pub fn considered(&self) -> usize {
        self.exact + self.approximate + self.unmatched
    }

    pub fn exact_ratio(&self) -> f64 {
        ratio(self.exact, self.considered())
    }

    pub fn covered_ratio(&self) -> f64 {
        ratio(self.exact + self.approximate, self.considered())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRecord {
    /// Index into [`ResolvedCorpus::entities`].
    pub entity: u32,
    /// Column indices into [`ResolvedCorpus::fields`], sorted, non-empty.
    pub fields: Vec<u32>,
    pub n_authors: u32,
    pub year: i32,
}

impl ResolvedRecord {
    pub fn m_fields(&self) -> usize {
        self.fields.len()
    }
}

/// Records aggregated at one entity kind with venues resolved to fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedCorpus {
    pub kind: EntityKind,
    /// Sorted distinct entity ids.
    pub entities: Arc<Vec<String>>,
    /// Field columns, ascending id.
    pub fields: Arc<Vec<FieldId>>,
    pub records: Vec<ResolvedRecord>,
    pub match_stats: MatchStats,
}

impl ResolvedCorpus {
    /// Builds a corpus from already-resolved `(entity, fields, n_authors,
    /// year)` tuples. Field ids must belong to `fields`.
    pub fn from_tuples<I>(kind: EntityKind, fields: Vec<FieldId>, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<FieldId>, u32, i32)>,
    {
        let mut fields = fields;
        fields.sort();
        fields.dedup();
        let col: HashMap<FieldId, u32> = fields
            .iter()
            .enumerate()
            .map(|(i, f)| (*f, i as u32))
            .collect();
        let rows: Vec<_> = rows.into_iter().collect();
        let entities: Vec<String> = rows
            .iter()
            .map(|r| r.0.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let ent_index: HashMap<&str, u32> = entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.as_str(), i as u32))
            .collect();
        let mut records = Vec::with_capacity(rows.len());
        for (entity, fs, n_authors, year) in &rows {
            if *n_authors == 0 {
                return Err(Error::config("n_authors must be >= 1"));
            }
            let mut cols = fs
                .iter()
                .map(|f| {
                    col.get(f)
                        .copied()
                        .ok_or_else(|| Error::config(format!("unknown field id {f}")))
                })
                .collect::<Result<Vec<_>>>()?;
            cols.sort_unstable();
            cols.dedup();
            if cols.is_empty() {
                return Err(Error::config("resolved record without fields"));
            }
            records.push(ResolvedRecord {
                entity: ent_index[entity.as_str()],
                fields: cols,
                n_authors: *n_authors,
                year: *year,
            });
        }
        let n = records.len();
        Ok(Self {
            kind,
            entities: Arc::new(entities),
            fields: Arc::new(fields),
            records,
            match_stats: MatchStats {
                exact: n,
                ..Default::default()
            },
        })
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn entity_index(&self, id: &str) -> Option<usize> {
        self.entities.binary_search_by(|e| e.as_str().cmp(id)).ok()
    }

    pub fn year_range(&self) -> Option<(i32, i32)> {
        let min = self.records.iter().map(|r| r.year).min()?;
        let max = self.records.iter().map(|r| r.year).max()?;
        Some((min, max))
    }
}

/// Resolves venues to fields and aggregates records at `kind`.
///
/// Records whose venue has no exact or approximate match are dropped and
/// counted; for institution/state aggregation, records lacking that attribute
/// are dropped and counted separately.
pub fn resolve_corpus(
    records: &[PublicationRecord],
    map: &VenueFieldMap,
    taxonomy: &FieldTaxonomy,
    kind: EntityKind,
) -> Result<ResolvedCorpus> {
    map.check_against(taxonomy)?;
    let mut stats = MatchStats::default();
    // venue -> resolved columns, memoized since venues repeat heavily
    let mut cache: HashMap<&str, Option<(Vec<u32>, MatchKind)>> = HashMap::new();
    let mut entity_ids: BTreeMap<&str, u32> = BTreeMap::new();
    let mut staged: Vec<(&str, Vec<u32>, u32, i32)> = Vec::new();

    for rec in records {
        let entity = match kind {
            EntityKind::Scientist => Some(rec.researcher_id.as_str()),
            EntityKind::Institution => rec.institution.as_deref(),
            EntityKind::State => rec.state.as_deref(),
        };
        let Some(entity) = entity else {
            stats.missing_attribute += 1;
            continue;
        };
        let resolved = cache.entry(rec.venue_name.as_str()).or_insert_with(|| {
            match_venue(&rec.venue_name, map).map(|(fields, how)| {
                let cols = fields
                    .iter()
                    .map(|f| taxonomy.field_index(*f).expect("checked above") as u32)
                    .collect();
                (cols, how)
            })
        });
        match resolved {
            None => stats.unmatched += 1,
            Some((cols, how)) => {
                match how {
                    MatchKind::Exact => stats.exact += 1,
                    MatchKind::Approximate => stats.approximate += 1,
                }
                entity_ids.insert(entity, 0);
                staged.push((entity, cols.clone(), rec.n_authors, rec.year));
            }
        }
    }

    for (i, v) in entity_ids.values_mut().enumerate() {
        *v = i as u32;
    }
    let records = staged
        .into_iter()
        .map(|(e, fields, n_authors, year)| ResolvedRecord {
            entity: entity_ids[e],
            fields,
            n_authors,
            year,
        })
        .collect();
    Ok(ResolvedCorpus {
        kind,
        entities: Arc::new(entity_ids.keys().map(|s| s.to_string()).collect()),
        fields: Arc::new(taxonomy.field_ids()),
        records,
        match_stats: stats,
    })
}

// ---------------------------------------------------------------------------
// helpers

/// Opens a delimited file, choosing tab or comma from the header line.
pub(crate) fn delimited_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut first = String::new();
    BufReader::new(&file)
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    let delim = if first.contains('\t') { b'\t' } else { b',' };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(delim)
        .flexible(true)
        .from_reader(file))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("{other:?}"),
        },
    }
}
