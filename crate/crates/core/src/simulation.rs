//! Synthetic corpora with a planted field-relatedness structure.
//!
//! Fields sit on a ring and planted proximity decays with ring distance.
//! Each scientist grows a portfolio from a random seed field by repeatedly
//! adding fields with probability proportional to their planted density
//! against the current portfolio, publishes in it through the fit/RCA
//! windows, and then enters new fields the same way in the test window.

use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{EntityKind, FieldId, ResolvedCorpus};
use crate::error::Result;
use crate::freq_model::{ModelTag, ProximityMatrix};
use crate::presence::{TimeWindow, WindowConfig};

#[derive(Debug, Clone, Copy)]
pub struct SimulationConfig {
    pub n_scientists: usize,
    pub n_fields: usize,
    /// Portfolio size during the fit/RCA windows.
    pub portfolio_size: usize,
    /// Inclusive range of fields entered during the test window.
    pub new_fields: (usize, usize),
    /// Ring-distance length scale of the planted proximity.
    pub length_scale: f64,
    pub windows: WindowConfig,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_scientists: 500,
            n_fields: 40,
            portfolio_size: 5,
            new_fields: (1, 3),
            length_scale: 2.0,
            windows: WindowConfig {
                fit: TimeWindow {
                    start: 2005,
                    end: 2013,
                },
                rca: TimeWindow {
                    start: 2011,
                    end: 2013,
                },
                test: TimeWindow {
                    start: 2014,
                    end: 2016,
                },
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedCorpus {
    pub corpus: ResolvedCorpus,
    pub planted: ProximityMatrix,
    pub windows: WindowConfig,
    /// Fields each scientist entered in the test window.
    pub entered: Vec<Vec<usize>>,
}

pub fn planted_proximity(
    n_fields: usize,
    length_scale: f64,
    window: TimeWindow,
) -> ProximityMatrix {
    let fields: Vec<FieldId> = (0..n_fields as u32).map(|i| FieldId(1000 + i)).collect();
    let mut values = vec![0.0; n_fields * n_fields];
    for i in 0..n_fields {
        for j in 0..n_fields {
            let d = i.abs_diff(j).min(n_fields - i.abs_diff(j)) as f64;
            values[i * n_fields + j] = (-d / length_scale).exp();
        }
    }
    ProximityMatrix::from_dense(Arc::new(fields), values, ModelTag::Embedding, window)
        .expect("planted values in [0, 1]")
}

/// Draws `count` new fields, each proportional to its summed planted
/// proximity to the growing portfolio.
fn grow(
    portfolio: &mut Vec<usize>,
    count: usize,
    planted: &ProximityMatrix,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let n = planted.n_fields();
    let mut added = Vec::with_capacity(count);
    for _ in 0..count {
        let weights: Vec<f64> = (0..n)
            .map(|f| {
                if portfolio.contains(&f) {
                    0.0
                } else {
                    portfolio.iter().map(|&p| planted.get(f, p)).sum()
                }
            })
            .collect();
        let Ok(dist) = WeightedIndex::new(&weights) else {
            break;
        };
        let f = dist.sample(rng);
        portfolio.push(f);
        added.push(f);
    }
    added
}

pub fn simulate(cfg: &SimulationConfig) -> Result<SimulatedCorpus> {
    let w = cfg.windows;
    let planted = planted_proximity(cfg.n_fields, cfg.length_scale, w.fit);
    let fields: Vec<FieldId> = planted.fields().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows: Vec<(String, Vec<FieldId>, u32, i32)> = Vec::new();
    let mut entered = Vec::with_capacity(cfg.n_scientists);

    let first_year = w.fit.start.min(w.rca.start);
    for s in 0..cfg.n_scientists {
        let id = format!("sci{s:04}");
        let mut portfolio = vec![rng.gen_range(0..cfg.n_fields)];
        grow(
            &mut portfolio,
            cfg.portfolio_size.saturating_sub(1),
            &planted,
            &mut rng,
        );
        for year in first_year..=w.rca.end {
            for &f in &portfolio {
                rows.push((id.clone(), vec![fields[f]], rng.gen_range(1..=4), year));
            }
        }
        let k = rng.gen_range(cfg.new_fields.0..=cfg.new_fields.1);
        let new = grow(&mut portfolio, k, &planted, &mut rng);
        for year in w.test.start..=w.test.end {
            for &f in &portfolio {
                rows.push((id.clone(), vec![fields[f]], rng.gen_range(1..=4), year));
            }
        }
        entered.push(new);
    }

    Ok(SimulatedCorpus {
        corpus: ResolvedCorpus::from_tuples(EntityKind::Scientist, fields, rows)?,
        planted,
        windows: w,
        entered,
    })
}
