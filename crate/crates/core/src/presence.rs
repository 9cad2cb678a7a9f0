//! Normalized contribution matrix `X` and thresholded presence matrix `P`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{EntityKind, ResolvedCorpus};
use crate::error::{Error, Result};
use crate::matrix::SparseRows;

/// Presence threshold used for prediction.
pub const DEFAULT_THETA: f64 = 0.05;
/// Presence threshold used for backbone extraction.
pub const DEFAULT_BACKBONE_THETA: f64 = 0.10;

/// Inclusive year range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: i32,
    pub end: i32,
}

impl TimeWindow {
    pub fn new(start: i32, end: i32) -> Result<Self> {
        if start > end {
            return Err(Error::config(format!(
                "window start {start} is after end {end}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, year: i32) -> bool {
        self.start <= year && year <= self.end
    }

    /// `end - start`: [2011, 2013] has span 2.
    pub fn span(&self) -> i32 {
        self.end - self.start
    }

    pub fn overlaps(&self, other: &TimeWindow) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl FromStr for TimeWindow {
    type Err = Error;

    /// Parses `START:END`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::config(format!("window {s:?} is not START:END")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<i32>()
                .map_err(|_| Error::config(format!("window {s:?}: {x:?} is not a year")))
        };
        TimeWindow::new(parse(a)?, parse(b)?)
    }
}

/// Model-fitting, RCA and test windows of one prediction experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub fit: TimeWindow,
    pub rca: TimeWindow,
    pub test: TimeWindow,
}

impl WindowConfig {
    pub fn new(fit: TimeWindow, rca: TimeWindow, test: TimeWindow) -> Result<Self> {
        if test.overlaps(&fit) || test.overlaps(&rca) {
            return Err(Error::config(format!(
                "test window {test} overlaps the fit ({fit}) or RCA ({rca}) window"
            )));
        }
        if fit.end != rca.end {
            return Err(Error::config(format!(
                "fit window {fit} and RCA window {rca} must end in the same year"
            )));
        }
        if test.start != rca.end + 1 {
            return Err(Error::config(format!(
                "test window {test} must start the year after {}",
                rca.end
            )));
        }
        if fit.span() < rca.span() {
            return Err(Error::config(format!(
                "fit window {fit} must be at least as long as RCA window {rca}"
            )));
        }
        Ok(Self { fit, rca, test })
    }
}

/// `X_sf`: sum over the entity's in-window records touching field `f` of
/// `1 / (n_authors * n_fields)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionMatrix {
    pub values: SparseRows<f64>,
    pub window: TimeWindow,
    pub kind: EntityKind,
}

impl ContributionMatrix {
    pub fn get(&self, entity: usize, field: usize) -> f64 {
        self.values.get(entity, field)
    }

    pub fn total_mass(&self) -> f64 {
        self.values.triples().map(|(_, _, v)| v).sum()
    }

    /// Entity x field matrix with every value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.map(|v| v * c),
            ..self.clone()
        }
    }
}

pub fn contribution_matrix(corpus: &ResolvedCorpus, window: TimeWindow) -> ContributionMatrix {
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); corpus.n_entities()];
    for rec in corpus.records.iter().filter(|r| window.contains(r.year)) {
        let share = 1.0 / (rec.n_authors as f64 * rec.m_fields() as f64);
        let row = &mut rows[rec.entity as usize];
        row.extend(rec.fields.iter().map(|&c| (c, share)));
    }
    for row in &mut rows {
        // stable sort keeps record order within a column, so sums are reproducible
        row.sort_by_key(|&(c, _)| c);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(row.len());
        for &(c, v) in row.iter() {
            match merged.last_mut() {
                Some((lc, lv)) if *lc == c => *lv += v,
                _ => merged.push((c, v)),
            }
        }
        *row = merged;
    }
    ContributionMatrix {
        values: SparseRows::from_rows(
            Arc::clone(&corpus.entities),
            Arc::clone(&corpus.fields),
            rows,
        ),
        window,
        kind: corpus.kind,
    }
}

/// `P_sf = 1` iff `X_sf > theta` (strict).
#[derive(Debug, Clone, PartialEq)]
pub struct PresenceMatrix {
    pub values: SparseRows<bool>,
    pub theta: f64,
    pub window: TimeWindow,
}

impl PresenceMatrix {
    pub fn is_present(&self, entity: usize, field: usize) -> bool {
        self.values.get(entity, field)
    }

    /// Present field columns of one entity, ascending.
    pub fn present_fields(&self, entity: usize) -> impl Iterator<Item = usize> + '_ {
        self.values.row(entity).iter().map(|&(c, _)| c as usize)
    }

    pub fn count(&self) -> usize {
        self.values.nnz()
    }

    /// Number of present entities per field.
    pub fn field_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.values.n_fields()];
        for (_, f, _) in self.values.triples() {
            counts[f] += 1;
        }
        counts
    }

    pub fn n_entities(&self) -> usize {
        self.values.n_entities()
    }

    pub fn n_fields(&self) -> usize {
        self.values.n_fields()
    }
}

pub fn presence_matrix(x: &ContributionMatrix, theta: f64) -> Result<PresenceMatrix> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::config(format!("theta must be > 0, got {theta}")));
    }
    Ok(PresenceMatrix {
        values: x.values.map(|v| v > theta),
        theta,
        window: x.window,
    })
}
