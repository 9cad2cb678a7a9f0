//! Transition detection, candidate ranking by density, per-entity AUROC and
//! the summary statistics used to compare models.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::ResolvedCorpus;
use crate::error::{Error, Result};
use crate::freq_model::ProximityMatrix;
use crate::presence::{contribution_matrix, ContributionMatrix, TimeWindow};
use crate::specialization::{
    density_for, indicator, rca, DensityMatrix, IndicatorMatrix, RcaMatrix, Stage, TransitionKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransitionEvent {
    pub entity: usize,
    pub field: usize,
    pub kind: TransitionKind,
}

/// Field/entity pairs that moved from the kind's source stage in `before` to
/// its target in `after`, ordered by entity then field.
pub fn detect_transitions(
    before: &RcaMatrix,
    after: &RcaMatrix,
    kind: TransitionKind,
) -> Result<Vec<TransitionEvent>> {
    if !before.values.aligned_with(&after.values) {
        return Err(Error::config(
            "RCA matrices cover different entities or fields",
        ));
    }
    let mut events = Vec::new();
    for e in 0..before.values.n_entities() {
        match kind {
            TransitionKind::ZeroToActive => {
                for &(f, v) in after.values.row(e) {
                    if v > 0.0 && before.get(e, f as usize) == 0.0 {
                        events.push(TransitionEvent {
                            entity: e,
                            field: f as usize,
                            kind,
                        });
                    }
                }
            }
            _ => {
                for &(f, v) in before.values.row(e) {
                    if Stage::of(v) == kind.source_stage()
                        && kind.is_reached(after.stage(e, f as usize))
                    {
                        events.push(TransitionEvent {
                            entity: e,
                            field: f as usize,
                            kind,
                        });
                    }
                }
            }
        }
    }
    Ok(events)
}

/// Which fields are ranked (and count as negatives) for an entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidatePolicy {
    /// Fields in the transition's source stage during the RCA window.
    #[default]
    SourceStage,
    /// Every field with `U_sf = 0`.
    AllUnset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedPrediction {
    pub entity: usize,
    /// `(field column, density)`, density descending, column ascending on ties.
    pub ranked: Vec<(usize, f64)>,
}

impl RankedPrediction {
    pub fn top(&self, k: usize) -> &[(usize, f64)] {
        &self.ranked[..k.min(self.ranked.len())]
    }
}

fn is_candidate(
    policy: CandidatePolicy,
    kind: TransitionKind,
    u: &IndicatorMatrix,
    r_before: &RcaMatrix,
    e: usize,
    f: usize,
) -> bool {
    match policy {
        CandidatePolicy::SourceStage => r_before.stage(e, f) == kind.source_stage(),
        CandidatePolicy::AllUnset => !u.is_set(e, f),
    }
}

/// Ranks each entity's candidate fields (one entry per computed density row).
pub fn rank_candidates(
    omega: &DensityMatrix,
    u: &IndicatorMatrix,
    r_before: &RcaMatrix,
    kind: TransitionKind,
    policy: CandidatePolicy,
) -> Result<Vec<RankedPrediction>> {
    if !u.values.aligned_with(&r_before.values) {
        return Err(Error::config("indicator and RCA matrices are not aligned"));
    }
    Ok(omega
        .iter()
        .map(|(e, row)| {
            let mut ranked: Vec<(usize, f64)> = row
                .iter()
                .enumerate()
                .filter(|&(f, _)| is_candidate(policy, kind, u, r_before, e, f))
                .map(|(f, &d)| (f, d))
                .collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            RankedPrediction { entity: e, ranked }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AurocResult {
    pub entity: usize,
    pub auroc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Mann-Whitney AUROC of the ranked candidates against `positives`, with
/// tied pairs counted as one half. `None` unless there is at least one
/// positive and one negative candidate.
pub fn auroc(ranked: &RankedPrediction, positives: &BTreeSet<usize>) -> Option<AurocResult> {
    let mut scored: Vec<(f64, bool)> = ranked
        .ranked
        .iter()
        .map(|&(f, s)| (s, positives.contains(&f)))
        .collect();
    let n_pos = scored.iter().filter(|(_, p)| *p).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    // midranks (1-based) summed over positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        while j + 1 < scored.len() && scored[j + 1].0 == scored[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_tie = scored[i..=j].iter().filter(|(_, p)| *p).count();
        rank_sum += midrank * pos_in_tie as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(AurocResult {
        entity: ranked.entity,
        auroc: u / (n_pos * n_neg) as f64,
        n_pos,
        n_neg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub p_value: Option<f64>,
}

/// Linear-interpolation quantile of sorted data (`h = (n - 1) q`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Result<EvalSummary> {
    if values.is_empty() {
        return Err(Error::Empty("no AUROC values to summarize".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(EvalSummary {
        n: sorted.len(),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        median: quantile_sorted(&sorted, 0.5),
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
        p_value: None,
    })
}

pub fn summarize_results(results: &[AurocResult]) -> Result<EvalSummary> {
    summarize(&results.iter().map(|r| r.auroc).collect::<Vec<_>>())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Two-sided permutation test on the difference of means, `(k + 1) / (n + 1)`
/// smoothing.
pub fn compare_models(a: &[f64], b: &[f64], n_permutations: usize, seed: u64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("both samples must be non-empty".into()));
    }
    if n_permutations < 100 {
        return Err(Error::config(format!(
            "need at least 100 permutations, got {n_permutations}"
        )));
    }
    let observed = (mean(a) - mean(b)).abs();
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let total: f64 = pooled.iter().sum();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let tol = 1e-12 * observed.max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extreme = 0usize;
    for _ in 0..n_permutations {
        pooled.shuffle(&mut rng);
        let sa: f64 = pooled[..a.len()].iter().sum();
        let diff = (sa / na - (total - sa) / nb).abs();
        if diff >= observed - tol {
            extreme += 1;
        }
    }
    Ok((extreme + 1) as f64 / (n_permutations + 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCurve {
    /// `(covariate midpoint, coefficient of variation)` per window.
    pub points: Vec<(f64, f64)>,
    /// Windows whose mean is zero.
    pub skipped: usize,
}

/// Coefficient of variation (sample sd / mean) of `value` over every
/// contiguous window of `window_size` points ordered by `covariate`.
pub fn cv_sliding(pairs: &[(f64, f64)], window_size: usize) -> Result<CvCurve> {
    if window_size < 2 {
        return Err(Error::config("CV window must hold at least 2 points"));
    }
    if window_size > pairs.len() {
        return Err(Error::config(format!(
            "CV window {window_size} larger than sample size {}",
            pairs.len()
        )));
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut curve = CvCurve {
        points: Vec::with_capacity(sorted.len() - window_size + 1),
        skipped: 0,
    };
    for w in sorted.windows(window_size) {
        let m = w.iter().map(|p| p.1).sum::<f64>() / window_size as f64;
        if m == 0.0 {
            curve.skipped += 1;
            continue;
        }
        let var = w.iter().map(|p| (p.1 - m).powi(2)).sum::<f64>() / (window_size - 1) as f64;
        let mid = (w[0].0 + w[window_size - 1].0) / 2.0;
        curve.points.push((mid, var.sqrt() / m));
    }
    Ok(curve)
}

/// Complementary CDF: for each distinct value `v`, the fraction of samples
/// `>= v`.
pub fn ccdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        out.push((v, (sorted.len() - i) as f64 / n));
        while i < sorted.len() && sorted[i] == v {
            i += 1;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// pipeline

/// Per-entity covariates over one window, for CV and CCDF exports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntityStats {
    pub n_active: usize,
    pub n_developed: usize,
    /// Sum of the entity's normalized publication mass.
    pub mass: f64,
}

pub fn entity_stats(x: &ContributionMatrix, r: &RcaMatrix, entity: usize) -> EntityStats {
    let row = r.values.row(entity);
    EntityStats {
        n_active: row.iter().filter(|(_, v)| *v > 0.0).count(),
        n_developed: row.iter().filter(|(_, v)| *v >= 1.0).count(),
        mass: x.values.row(entity).iter().map(|(_, v)| v).sum(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityEvaluation {
    pub result: AurocResult,
    pub stats: EntityStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub kind: TransitionKind,
    pub policy: CandidatePolicy,
    /// Entities with a defined AUROC, in entity order.
    pub entities: Vec<EntityEvaluation>,
    /// Entities with at least one transition.
    pub n_transitioned: usize,
    /// Transitioned entities without a negative candidate.
    pub n_undefined: usize,
}

impl Evaluation {
    pub fn aurocs(&self) -> Vec<f64> {
        self.entities.iter().map(|e| e.result.auroc).collect()
    }

    pub fn summary(&self) -> Result<EvalSummary> {
        summarize(&self.aurocs())
    }
}

/// RCA on the RCA window and densities from `phi`, for the given entities.
pub struct Specialization {
    pub x: ContributionMatrix,
    pub rca: RcaMatrix,
    pub indicator: IndicatorMatrix,
}

impl Specialization {
    pub fn new(corpus: &ResolvedCorpus, rca_window: TimeWindow, kind: TransitionKind) -> Self {
        let x = contribution_matrix(corpus, rca_window);
        let r = rca(&x);
        let u = indicator(&r, kind);
        Self {
            x,
            rca: r,
            indicator: u,
        }
    }
}

/// Ranked candidates for the selected entities, as used for forward
/// predictions.
pub fn predict(
    corpus: &ResolvedCorpus,
    phi: &ProximityMatrix,
    rca_window: TimeWindow,
    kind: TransitionKind,
    policy: CandidatePolicy,
    entities: impl IntoIterator<Item = usize>,
) -> Result<Vec<RankedPrediction>> {
    let spec = Specialization::new(corpus, rca_window, kind);
    let omega = density_for(&spec.indicator, phi, entities)?;
    rank_candidates(&omega, &spec.indicator, &spec.rca, kind, policy)
}

/// Scores every entity that made at least one `kind` transition between the
/// RCA window and the test window.
pub fn evaluate_transitions(
    corpus: &ResolvedCorpus,
    phi: &ProximityMatrix,
    rca_window: TimeWindow,
    test_window: TimeWindow,
    kind: TransitionKind,
    policy: CandidatePolicy,
) -> Result<Evaluation> {
    if rca_window.overlaps(&test_window) {
        return Err(Error::config(format!(
            "test window {test_window} overlaps RCA window {rca_window}"
        )));
    }
    let spec = Specialization::new(corpus, rca_window, kind);
    let after = rca(&contribution_matrix(corpus, test_window));
    let events = detect_transitions(&spec.rca, &after, kind)?;

    let mut positives: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for ev in &events {
        positives.entry(ev.entity).or_default().insert(ev.field);
    }
    let omega = density_for(&spec.indicator, phi, positives.keys().copied())?;
    let ranked = rank_candidates(&omega, &spec.indicator, &spec.rca, kind, policy)?;

    let mut entities = Vec::new();
    let mut n_undefined = 0;
    for pred in &ranked {
        match auroc(pred, &positives[&pred.entity]) {
            Some(result) => entities.push(EntityEvaluation {
                result,
                stats: entity_stats(&spec.x, &spec.rca, pred.entity),
            }),
            None => n_undefined += 1,
        }
    }
    Ok(Evaluation {
        kind,
        policy,
        entities,
        n_transitioned: positives.len(),
        n_undefined,
    })
}
