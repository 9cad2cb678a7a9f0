//! Embedding research space.
//!
//! Every entity contributes a bag of the fields it is present in. Field
//! vectors are trained StarSpace-style: for each bag one field is held out as
//! the positive target, the mean of the remaining fields' vectors is the
//! input, and trained fields outside the bag serve as negatives under a cosine
//! margin-ranking hinge loss. Proximity is the cosine similarity clipped at 0.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::FieldId;
use crate::error::{Error, Result};
use crate::freq_model::{ModelTag, ProximityMatrix};
use crate::presence::{PresenceMatrix, TimeWindow};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldBag {
    pub entity: usize,
    /// Present field columns, ascending.
    pub fields: Vec<u32>,
}

impl FieldBag {
    pub fn is_trainable(&self) -> bool {
        self.fields.len() >= 2
    }
}

/// One bag per entity with at least one present field.
pub fn build_bags(p: &PresenceMatrix) -> Vec<FieldBag> {
    (0..p.n_entities())
        .filter_map(|e| {
            let fields: Vec<u32> = p.present_fields(e).map(|c| c as u32).collect();
            (!fields.is_empty()).then_some(FieldBag { entity: e, fields })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub epochs: usize,
    /// Initial rate, decayed linearly to 0 over the whole run.
    pub learning_rate: f64,
    pub negatives_per_example: usize,
    pub margin: f64,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            epochs: 10,
            learning_rate: 0.05,
            negatives_per_example: 10,
            margin: 0.05,
            seed: 0,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("embedding dim must be > 0"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("learning rate must be > 0"));
        }
        if self.negatives_per_example == 0 {
            return Err(Error::config("negatives_per_example must be > 0"));
        }
        if !(self.margin > 0.0) || !self.margin.is_finite() {
            return Err(Error::config("margin must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldEmbedding {
    fields: Arc<Vec<FieldId>>,
    dim: usize,
    vectors: Vec<f64>,
    pub config: EmbeddingConfig,
    pub window: TimeWindow,
    /// Mean hinge loss per training example, one entry per epoch.
    pub epoch_losses: Vec<f64>,
}

impl FieldEmbedding {
    pub fn from_vectors(
        fields: Arc<Vec<FieldId>>,
        dim: usize,
        vectors: Vec<f64>,
        config: EmbeddingConfig,
        window: TimeWindow,
    ) -> Result<Self> {
        if dim == 0 || vectors.len() != fields.len() * dim {
            return Err(Error::config(format!(
                "embedding table has {} values for {} fields x dim {dim}",
                vectors.len(),
                fields.len()
            )));
        }
        Ok(Self {
            fields,
            dim,
            vectors,
            config,
            window,
            epoch_losses: Vec::new(),
        })
    }

    pub fn fields(&self) -> &Arc<Vec<FieldId>> {
        &self.fields
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn vector(&self, f: usize) -> &[f64] {
        &self.vectors[f * self.dim..(f + 1) * self.dim]
    }

    pub fn similarity(&self, f: usize, g: usize) -> f64 {
        cosine(self.vector(f), self.vector(g))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        log::debug!("cosine of a zero-norm vector taken as 0");
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// d cos(a, b) / d a.
fn cosine_grad(a: &[f64], b: &[f64]) -> Vec<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return vec![0.0; a.len()];
    }
    let c = dot(a, b) / (na * nb);
    a.iter()
        .zip(b)
        .map(|(ai, bi)| bi / (na * nb) - c * ai / (na * na))
        .collect()
}

/// `sum_neg max(0, margin - cos(input, pos) + cos(input, neg))`.
pub fn hinge_loss(input: &[f64], pos: &[f64], negs: &[&[f64]], margin: f64) -> f64 {
    let cp = cosine(input, pos);
    negs.iter()
        .map(|n| (margin - cp + cosine(input, n)).max(0.0))
        .sum()
}

/// Gradients of [`hinge_loss`] with respect to each of its vector arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeGrad {
    pub loss: f64,
    pub input: Vec<f64>,
    pub pos: Vec<f64>,
    pub negs: Vec<Vec<f64>>,
}

pub fn hinge_grad(input: &[f64], pos: &[f64], negs: &[&[f64]], margin: f64) -> HingeGrad {
    let d = input.len();
    let cp = cosine(input, pos);
    let dcp_dinput = cosine_grad(input, pos);
    let dcp_dpos = cosine_grad(pos, input);
    let mut g = HingeGrad {
        loss: 0.0,
        input: vec![0.0; d],
        pos: vec![0.0; d],
        negs: vec![vec![0.0; d]; negs.len()],
    };
    for (k, n) in negs.iter().enumerate() {
        let l = margin - cp + cosine(input, n);
        if l <= 0.0 {
            continue;
        }
        g.loss += l;
        let dcn_dinput = cosine_grad(input, n);
        let dcn_dneg = cosine_grad(n, input);
        for i in 0..d {
            g.input[i] += dcn_dinput[i] - dcp_dinput[i];
            g.pos[i] -= dcp_dpos[i];
        }
        g.negs[k] = dcn_dneg;
    }
    g
}

fn project_to_unit_ball(v: &mut [f64]) {
    let n = norm(v);
    if n > 1.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Trains field vectors on the trainable bags (two or more fields).
///
/// Deterministic for a fixed `config.seed`: one ChaCha stream drives the
/// initialization, the per-epoch bag shuffle and all sampling.
pub fn train_embeddings(
    bags: &[FieldBag],
    fields: &Arc<Vec<FieldId>>,
    window: TimeWindow,
    config: &EmbeddingConfig,
) -> Result<FieldEmbedding> {
    config.validate()?;
    let n = fields.len();
    let dim = config.dim;
    let mut order: Vec<&FieldBag> = bags.iter().filter(|b| b.is_trainable()).collect();
    if order.is_empty() {
        return Err(Error::Training("no bag with two or more fields".into()));
    }
    if let Some(bad) = order
        .iter()
        .flat_map(|b| &b.fields)
        .find(|&&c| c as usize >= n)
    {
        return Err(Error::config(format!(
            "bag field column {bad} out of range"
        )));
    }

    // negatives come from fields seen in training, so fields outside every
    // bag keep their initial vectors
    let mut vocab: Vec<u32> = order
        .iter()
        .flat_map(|b| b.fields.iter().copied())
        .collect();
    vocab.sort_unstable();
    vocab.dedup();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bound = 1.0 / dim as f64;
    let mut vectors: Vec<f64> = (0..n * dim)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();

    let total_steps = (config.epochs * order.len()) as f64;
    let mut step = 0usize;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut input = vec![0.0; dim];
    let mut negs: Vec<u32> = Vec::with_capacity(config.negatives_per_example);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for bag in &order {
            let lr = config.learning_rate * (1.0 - step as f64 / total_steps);
            step += 1;

            let k = bag.fields.len();
            let target = rng.gen_range(0..k);
            let pos = bag.fields[target] as usize;

            negs.clear();
            if k < vocab.len() {
                while negs.len() < config.negatives_per_example {
                    let c = vocab[rng.gen_range(0..vocab.len())];
                    if bag.fields.binary_search(&c).is_err() {
                        negs.push(c);
                    }
                }
            }
            if negs.is_empty() {
                continue;
            }

            input.iter_mut().for_each(|x| *x = 0.0);
            for (j, &c) in bag.fields.iter().enumerate() {
                if j != target {
                    let v = &vectors[c as usize * dim..(c as usize + 1) * dim];
                    input.iter_mut().zip(v).for_each(|(a, b)| *a += b);
                }
            }
            let inv = 1.0 / (k - 1) as f64;
            input.iter_mut().for_each(|x| *x *= inv);

            let neg_vecs: Vec<&[f64]> = negs
                .iter()
                .map(|&c| &vectors[c as usize * dim..(c as usize + 1) * dim])
                .collect();
            let pos_vec = &vectors[pos * dim..(pos + 1) * dim];
            let grad = hinge_grad(&input, pos_vec, &neg_vecs, config.margin);
            epoch_loss += grad.loss;
            if grad.loss == 0.0 {
                continue;
            }

            let mut touched: Vec<usize> = Vec::with_capacity(k + negs.len());
            let mut apply = |col: usize, g: &[f64], scale: f64, vectors: &mut Vec<f64>| {
                let v = &mut vectors[col * dim..(col + 1) * dim];
                v.iter_mut().zip(g).for_each(|(x, gi)| *x -= scale * gi);
                touched.push(col);
            };
            apply(pos, &grad.pos, lr, &mut vectors);
            for (c, g) in negs.iter().zip(&grad.negs) {
                apply(*c as usize, g, lr, &mut vectors);
            }
            for (j, &c) in bag.fields.iter().enumerate() {
                if j != target {
                    apply(c as usize, &grad.input, lr * inv, &mut vectors);
                }
            }
            touched.sort_unstable();
            touched.dedup();
            for c in touched {
                project_to_unit_ball(&mut vectors[c * dim..(c + 1) * dim]);
            }
        }
        epoch_losses.push(epoch_loss / order.len() as f64);
    }

    Ok(FieldEmbedding {
        fields: Arc::clone(fields),
        dim,
        vectors,
        config: *config,
        window,
        epoch_losses,
    })
}

/// Bags from `p`, then [`train_embeddings`].
pub fn fit_embedding(p: &PresenceMatrix, config: &EmbeddingConfig) -> Result<FieldEmbedding> {
    train_embeddings(&build_bags(p), p.values.fields(), p.window, config)
}

/// `phi_ff' = max(0, cos(vec_f, vec_f'))`, diagonal 1 for nonzero vectors.
pub fn proximity_emb(e: &FieldEmbedding) -> ProximityMatrix {
    let n = e.n_fields();
    let norms: Vec<f64> = (0..n).map(|f| norm(e.vector(f))).collect();
    let zero = norms.iter().filter(|&&x| x == 0.0).count();
    if zero > 0 {
        log::warn!("{zero} field vector(s) have zero norm; their similarities are 0");
    }
    let mut values = vec![0.0; n * n];
    for f in 0..n {
        if norms[f] == 0.0 {
            continue;
        }
        values[f * n + f] = 1.0;
        for g in f + 1..n {
            if norms[g] == 0.0 {
                continue;
            }
            let c = (dot(e.vector(f), e.vector(g)) / (norms[f] * norms[g])).clamp(-1.0, 1.0);
            let v = c.max(0.0);
            values[f * n + g] = v;
            values[g * n + f] = v;
        }
    }
    ProximityMatrix::from_dense(Arc::clone(&e.fields), values, ModelTag::Embedding, e.window)
        .expect("clipped cosines lie in [0, 1]")
}
