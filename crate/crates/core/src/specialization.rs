//! Revealed comparative advantage, development stages, transition indicator
//! matrices and relatedness densities.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::FieldId;
use crate::error::{Error, Result};
use crate::freq_model::ProximityMatrix;
use crate::matrix::SparseRows;
use crate::presence::{ContributionMatrix, TimeWindow};

#[derive(Debug, Clone, PartialEq)]
pub struct RcaMatrix {
    pub values: SparseRows<f64>,
    pub window: TimeWindow,
}

impl RcaMatrix {
    pub fn get(&self, entity: usize, field: usize) -> f64 {
        self.values.get(entity, field)
    }

    pub fn stage(&self, entity: usize, field: usize) -> Stage {
        Stage::of(self.get(entity, field))
    }
}

/// Balassa index: the entity's share of its own output in `f` over the
/// share of `f` in the whole corpus. Zero-mass rows stay zero.
pub fn rca(x: &ContributionMatrix) -> RcaMatrix {
    let n_fields = x.values.n_fields();
    let mut col = vec![0.0; n_fields];
    let mut row_sums = Vec::with_capacity(x.values.n_entities());
    for row in x.values.rows() {
        let mut s = 0.0;
        for &(c, v) in row {
            col[c as usize] += v;
            s += v;
        }
        row_sums.push(s);
    }
    let total: f64 = col.iter().sum();
    let rows = x
        .values
        .rows()
        .zip(&row_sums)
        .map(|(row, &rs)| {
            if rs <= 0.0 || total <= 0.0 {
                return Vec::new();
            }
            row.iter()
                .filter(|(_, v)| *v > 0.0)
                .map(|&(c, v)| (c, (v / rs) / (col[c as usize] / total)))
                .collect()
        })
        .collect();
    RcaMatrix {
        values: SparseRows::from_rows(
            Arc::clone(x.values.entities()),
            Arc::clone(x.values.fields()),
            rows,
        ),
        window: x.window,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Inactive,
    Nascent,
    Intermediate,
    Developed,
}

impl Stage {
    /// Stage of a non-negative RCA value. Callers holding unchecked input
    /// should use [`classify_stage`].
    pub fn of(rca: f64) -> Stage {
        if rca <= 0.0 {
            Stage::Inactive
        } else if rca < 0.5 {
            Stage::Nascent
        } else if rca < 1.0 {
            Stage::Intermediate
        } else {
            Stage::Developed
        }
    }

    pub fn is_active(self) -> bool {
        self != Stage::Inactive
    }

    pub fn code(self) -> char {
        match self {
            Stage::Inactive => '0',
            Stage::Nascent => 'N',
            Stage::Intermediate => 'I',
            Stage::Developed => 'D',
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

pub fn classify_stage(rca_value: f64) -> Result<Stage> {
    if rca_value.is_nan() || rca_value < 0.0 {
        return Err(Error::Domain(format!("RCA must be >= 0, got {rca_value}")));
    }
    Ok(Stage::of(rca_value))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TransitionKind {
    ZeroToActive,
    NascentToDeveloped,
    IntermediateToDeveloped,
}

impl TransitionKind {
    pub const ALL: [TransitionKind; 3] = [
        TransitionKind::ZeroToActive,
        TransitionKind::NascentToDeveloped,
        TransitionKind::IntermediateToDeveloped,
    ];

    /// Stage a field must be in during the RCA window to be a candidate.
    pub fn source_stage(self) -> Stage {
        match self {
            TransitionKind::ZeroToActive => Stage::Inactive,
            TransitionKind::NascentToDeveloped => Stage::Nascent,
            TransitionKind::IntermediateToDeveloped => Stage::Intermediate,
        }
    }

    /// Whether the stage reached in the test window completes the transition.
    pub fn is_reached(self, after: Stage) -> bool {
        match self {
            TransitionKind::ZeroToActive => after.is_active(),
            _ => after == Stage::Developed,
        }
    }

    /// Indicator threshold: `U_sf = 1[RCA_sf > threshold]`.
    pub fn indicator_threshold(self) -> f64 {
        match self {
            TransitionKind::ZeroToActive => 0.0,
            _ => 1.0,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            TransitionKind::ZeroToActive => "0A",
            TransitionKind::NascentToDeveloped => "ND",
            TransitionKind::IntermediateToDeveloped => "ID",
        }
    }
}

impl fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for TransitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        match key.as_str() {
            "0A" => Ok(TransitionKind::ZeroToActive),
            "ND" => Ok(TransitionKind::NascentToDeveloped),
            "ID" => Ok(TransitionKind::IntermediateToDeveloped),
            _ => Err(Error::config(format!(
                "unknown transition {s:?} (expected 0A, ND or ID)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorMatrix {
    pub values: SparseRows<bool>,
    pub kind: TransitionKind,
}

impl IndicatorMatrix {
    pub fn is_set(&self, entity: usize, field: usize) -> bool {
        self.values.get(entity, field)
    }
}

pub fn indicator(r: &RcaMatrix, kind: TransitionKind) -> IndicatorMatrix {
    let t = kind.indicator_threshold();
    IndicatorMatrix {
        values: r.values.map(|v| v > t),
        kind,
    }
}

/// Relatedness densities `omega_sf`, stored per computed entity row.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entities: Arc<Vec<String>>,
    fields: Arc<Vec<FieldId>>,
    rows: BTreeMap<usize, Vec<f64>>,
}

impl DensityMatrix {
    pub fn row(&self, entity: usize) -> Option<&[f64]> {
        self.rows.get(&entity).map(Vec::as_slice)
    }

    pub fn get(&self, entity: usize, field: usize) -> Option<f64> {
        self.row(entity).map(|r| r[field])
    }

    /// Computed rows in entity order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.rows.iter().map(|(e, r)| (*e, r.as_slice()))
    }

    pub fn entities(&self) -> &Arc<Vec<String>> {
        &self.entities
    }

    pub fn fields(&self) -> &Arc<Vec<FieldId>> {
        &self.fields
    }
}

/// Precomputed `sum_f' phi_ff'` per field, reused across entity rows.
pub struct DensityKernel<'a> {
    phi: &'a ProximityMatrix,
    row_sums: Vec<f64>,
}

impl<'a> DensityKernel<'a> {
    pub fn new(phi: &'a ProximityMatrix) -> Self {
        let row_sums = (0..phi.n_fields())
            .map(|f| phi.row(f).iter().sum())
            .collect();
        Self { phi, row_sums }
    }

    /// `omega_f = sum_{f' in set} phi_ff' / sum_f' phi_ff'`, 0 for rows of
    /// phi that sum to 0.
    pub fn row(&self, set: impl Iterator<Item = usize> + Clone) -> Vec<f64> {
        (0..self.phi.n_fields())
            .map(|f| {
                let denom = self.row_sums[f];
                if denom <= 0.0 {
                    return 0.0;
                }
                let phi_row = self.phi.row(f);
                let num: f64 = set.clone().map(|g| phi_row[g]).sum();
                (num / denom).clamp(0.0, 1.0)
            })
            .collect()
    }
}

fn check_alignment(u: &IndicatorMatrix, phi: &ProximityMatrix) -> Result<()> {
    let (uf, pf) = (u.values.fields(), phi.fields());
    if !(Arc::ptr_eq(uf, pf) || uf == pf) {
        return Err(Error::config(
            "indicator and proximity matrices are over different field sets",
        ));
    }
    Ok(())
}

pub fn density(u: &IndicatorMatrix, phi: &ProximityMatrix) -> Result<DensityMatrix> {
    density_for(u, phi, 0..u.values.n_entities())
}

/// Density rows for the given entities only.
pub fn density_for(
    u: &IndicatorMatrix,
    phi: &ProximityMatrix,
    entities: impl IntoIterator<Item = usize>,
) -> Result<DensityMatrix> {
    check_alignment(u, phi)?;
    let kernel = DensityKernel::new(phi);
    let rows = entities
        .into_iter()
        .map(|e| {
            let set = u.values.row(e).iter().map(|&(c, _)| c as usize);
            (e, kernel.row(set))
        })
        .collect();
    Ok(DensityMatrix {
        entities: Arc::clone(u.values.entities()),
        fields: Arc::clone(u.values.fields()),
        rows,
    })
}
