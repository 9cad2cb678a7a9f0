//! Frequentist research space: co-presence counts and column-conditional
//! proximity `phi_ff' = M_ff' / n_f'`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::FieldId;
use crate::error::{Error, Result};
use crate::presence::{PresenceMatrix, TimeWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Frequentist,
    Embedding,
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelTag::Frequentist => "frequentist",
            ModelTag::Embedding => "embedding",
        })
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "freq" | "frequentist" => Ok(ModelTag::Frequentist),
            "emb" | "embedding" => Ok(ModelTag::Embedding),
            other => Err(Error::config(format!("unknown model {other:?}"))),
        }
    }
}

/// Dense symmetric field x field count matrix, `M_ff'` = number of entities
/// present in both `f` and `f'`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoPresenceMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl CoPresenceMatrix {
    pub fn n_fields(&self) -> usize {
        self.n
    }

    pub fn get(&self, f: usize, g: usize) -> u64 {
        self.counts[f * self.n + g]
    }
}

pub fn copresence(p: &PresenceMatrix) -> CoPresenceMatrix {
    let n = p.n_fields();
    let mut counts = vec![0u64; n * n];
    let mut present: Vec<usize> = Vec::new();
    for e in 0..p.n_entities() {
        present.clear();
        present.extend(p.present_fields(e));
        for &f in &present {
            let base = f * n;
            for &g in &present {
                counts[base + g] += 1;
            }
        }
    }
    CoPresenceMatrix { n, counts }
}

/// Dense field x field proximity with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityMatrix {
    fields: Arc<Vec<FieldId>>,
    values: Vec<f64>,
    pub model: ModelTag,
    pub window: TimeWindow,
}

impl ProximityMatrix {
    /// `values` is row-major `fields.len()^2`.
    pub fn from_dense(
        fields: Arc<Vec<FieldId>>,
        values: Vec<f64>,
        model: ModelTag,
        window: TimeWindow,
    ) -> Result<Self> {
        let n = fields.len();
        if values.len() != n * n {
            return Err(Error::config(format!(
                "proximity matrix has {} values, expected {}",
                values.len(),
                n * n
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::config(format!("proximity value {v} outside [0, 1]")));
        }
        Ok(Self {
            fields,
            values,
            model,
            window,
        })
    }

    pub fn fields(&self) -> &Arc<Vec<FieldId>> {
        &self.fields
    }

    pub fn n_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn get(&self, f: usize, g: usize) -> f64 {
        self.values[f * self.fields.len() + g]
    }

    pub fn row(&self, f: usize) -> &[f64] {
        let n = self.fields.len();
        &self.values[f * n..(f + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n_fields();
        (0..n).all(|i| (i + 1..n).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// `phi_ff' = M_ff' / sum_s P_sf'`; columns with no present entity are 0.
pub fn proximity_freq(m: &CoPresenceMatrix, p: &PresenceMatrix) -> Result<ProximityMatrix> {
    let n = m.n_fields();
    if n != p.n_fields() {
        return Err(Error::config(
            "co-presence and presence matrices disagree on fields",
        ));
    }
    let col_counts = p.field_counts();
    let mut values = vec![0.0; n * n];
    for f in 0..n {
        for g in 0..n {
            let denom = col_counts[g];
            if denom > 0 {
                values[f * n + g] = m.get(f, g) as f64 / denom as f64;
            }
        }
    }
    ProximityMatrix::from_dense(
        Arc::clone(p.values.fields()),
        values,
        ModelTag::Frequentist,
        p.window,
    )
}

/// Convenience: `proximity_freq(copresence(p), p)`.
pub fn fit_frequentist(p: &PresenceMatrix) -> Result<ProximityMatrix> {
    proximity_freq(&copresence(p), p)
}
