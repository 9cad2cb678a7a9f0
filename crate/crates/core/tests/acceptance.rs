//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Runs without external data. Each check builds its own fixtures and
//! compares the library against an oracle written independently here.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rspace_core::emb_model::{
    cosine, fit_embedding, hinge_grad, hinge_loss, proximity_emb, train_embeddings,
    EmbeddingConfig, FieldBag,
};
use rspace_core::freq_model::fit_frequentist;
use rspace_core::matrix::SparseRows;
use rspace_core::network::{
    disparity_filter, disparity_pvalues, greedy_communities, WeightedGraph,
};
use rspace_core::prediction_eval::{
    auroc, detect_transitions, evaluate_transitions, predict, CandidatePolicy, RankedPrediction,
};
use rspace_core::presence::{
    contribution_matrix, presence_matrix, ContributionMatrix, PresenceMatrix,
};
use rspace_core::simulation::{simulate, SimulationConfig};
use rspace_core::specialization::{classify_stage, rca, Stage};
use rspace_core::{EntityKind, FieldId, ProximityMatrix, TimeWindow, TransitionKind};

type Outcome = Result<String, String>;

const W: TimeWindow = TimeWindow {
    start: 2000,
    end: 2001,
};

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ids(n: usize) -> Arc<Vec<FieldId>> {
    Arc::new((0..n as u32).map(FieldId).collect())
}

fn names(n: usize) -> Arc<Vec<String>> {
    Arc::new((0..n).map(|i| format!("e{i:03}")).collect())
}

fn presence_from(rows: &[Vec<bool>], n_fields: usize) -> PresenceMatrix {
    let sparse = rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(f, _)| (f as u32, true))
                .collect()
        })
        .collect();
    PresenceMatrix {
        values: SparseRows::from_rows(names(rows.len()), ids(n_fields), sparse),
        theta: 0.05,
        window: W,
    }
}

fn contribution_from(rows: &[Vec<f64>]) -> ContributionMatrix {
    let n_fields = rows.first().map_or(0, Vec::len);
    let sparse = rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(f, &v)| (f as u32, v))
                .collect()
        })
        .collect();
    ContributionMatrix {
        values: SparseRows::from_rows(names(rows.len()), ids(n_fields), sparse),
        window: W,
        kind: EntityKind::Scientist,
    }
}

// ---------------------------------------------------------------------------
// 1. AUROC

fn pairwise_auroc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0usize;
    for (&sp, _) in scores.iter().zip(positive).filter(|(_, &p)| p) {
        for (&sn, _) in scores.iter().zip(positive).filter(|(_, &p)| !p) {
            pairs += 1;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

fn auroc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut defined = 0;
    for fixture in 0..200 {
        let n = rng.gen_range(1..=30);
        // coarse scores on half the fixtures so ties are common
        let coarse = fixture % 2 == 0;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if coarse {
                    rng.gen_range(0..5) as f64 / 4.0
                } else {
                    rng.gen()
                }
            })
            .collect();
        let p_rate: f64 = rng.gen();
        let positive: Vec<bool> = (0..n).map(|_| rng.gen_bool(p_rate)).collect();

        let mut ranked: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let pred = RankedPrediction { entity: 0, ranked };
        let pos: BTreeSet<usize> = (0..n).filter(|&i| positive[i]).collect();

        let got = auroc(&pred, &pos).map(|r| r.auroc);
        let want = pairwise_auroc(&scores, &positive);
        match (got, want) {
            (Some(g), Some(w)) => {
                defined += 1;
                worst = worst.max((g - w).abs());
            }
            (None, None) => {}
            _ => {
                return Err(format!(
                    "fixture {fixture}: defined-ness differs ({got:?} vs {want:?})"
                ))
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max |error| {worst:e}"))?;
    Ok(format!(
        "200 fixtures ({defined} defined), max |error| {worst:e}"
    ))
}

// ---------------------------------------------------------------------------
// 2. frequentist proximity

fn frequentist_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut worst_bayes: f64 = 0.0;
    for _ in 0..100 {
        let n_e = rng.gen_range(1..=25);
        let n_f = rng.gen_range(1..=10);
        let density: f64 = rng.gen_range(0.1..0.9);
        let rows: Vec<Vec<bool>> = (0..n_e)
            .map(|_| (0..n_f).map(|_| rng.gen_bool(density)).collect())
            .collect();
        let phi = fit_frequentist(&presence_from(&rows, n_f)).map_err(|e| e.to_string())?;
        let n: Vec<usize> = (0..n_f)
            .map(|f| rows.iter().filter(|r| r[f]).count())
            .collect();
        for f in 0..n_f {
            for g in 0..n_f {
                // P(f present | g present), counted directly
                let both = rows.iter().filter(|r| r[f] && r[g]).count();
                let want = if n[g] == 0 {
                    0.0
                } else {
                    both as f64 / n[g] as f64
                };
                worst = worst.max((phi.get(f, g) - want).abs());
                let bayes = phi.get(f, g) * n[g] as f64 - phi.get(g, f) * n[f] as f64;
                worst_bayes = worst_bayes.max(bayes.abs());
            }
        }
    }
    ensure(worst <= 1e-12, || {
        format!("max |phi - brute force| {worst:e}")
    })?;
    ensure(worst_bayes <= 1e-12, || {
        format!("Bayes identity off by {worst_bayes:e}")
    })?;
    Ok(format!(
        "100 matrices, max |error| {worst:e}, Bayes residual {worst_bayes:e}"
    ))
}

// ---------------------------------------------------------------------------
// 3. embedding gradients and planted co-occurrence

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-10 {
        diff
    } else {
        diff / scale
    }
}

fn numeric_grad(v: &[f64], loss: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    (0..v.len())
        .map(|i| {
            let mut plus = v.to_vec();
            let mut minus = v.to_vec();
            plus[i] += h;
            minus[i] -= h;
            (loss(&plus) - loss(&minus)) / (2.0 * h)
        })
        .collect()
}

/// Hinge terms this close to the kink make central differences meaningless.
fn near_kink(input: &[f64], pos: &[f64], negs: &[Vec<f64>], margin: f64) -> bool {
    let cp = cosine(input, pos);
    negs.iter()
        .any(|n| (margin - cp + cosine(input, n)).abs() < 1e-3)
}

fn gradient_check(rng: &mut ChaCha8Rng) -> Result<(usize, f64), String> {
    let mut worst: f64 = 0.0;
    let mut active = 0;
    let mut done = 0;
    while done < 50 {
        let dim = rng.gen_range(2..=12);
        let k = rng.gen_range(1..=5);
        let margin = rng.gen_range(0.05..1.0);
        let mut v = || {
            (0..dim)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect::<Vec<f64>>()
        };
        let input = v();
        let pos = v();
        let negs: Vec<Vec<f64>> = (0..k).map(|_| v()).collect();
        if near_kink(&input, &pos, &negs, margin) {
            continue;
        }
        done += 1;
        let neg_refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        let g = hinge_grad(&input, &pos, &neg_refs, margin);
        if g.loss > 0.0 {
            active += 1;
        }

        let num_in = numeric_grad(&input, |x| hinge_loss(x, &pos, &neg_refs, margin));
        worst = worst.max(rel_err(&g.input, &num_in));
        let num_pos = numeric_grad(&pos, |x| hinge_loss(&input, x, &neg_refs, margin));
        worst = worst.max(rel_err(&g.pos, &num_pos));
        for j in 0..k {
            let num_neg = numeric_grad(&negs[j], |x| {
                let mut refs = neg_refs.clone();
                refs[j] = x;
                hinge_loss(&input, &pos, &refs, margin)
            });
            worst = worst.max(rel_err(&g.negs[j], &num_neg));
        }
    }
    Ok((active, worst))
}

/// Fields 0 and 1 always appear together; field 2 never meets either.
fn planted_bags() -> Vec<FieldBag> {
    let mut bags = Vec::new();
    let mut push = |fields: &[u32], times: usize| {
        for _ in 0..times {
            bags.push(FieldBag {
                entity: bags.len(),
                fields: fields.to_vec(),
            });
        }
    };
    push(&[0, 1], 10);
    push(&[0, 1, 5], 5);
    push(&[2, 3], 10);
    push(&[3, 4], 10);
    push(&[2, 4], 10);
    push(&[4, 5], 5);
    bags
}

fn embedding_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (active, worst) = gradient_check(&mut rng)?;
    ensure(worst <= 1e-4, || {
        format!("gradient relative error {worst:e}")
    })?;
    ensure(active > 0, || {
        "no active hinge among the gradient triples".into()
    })?;

    let bags = planted_bags();
    let fields = ids(6);
    let mut wins = 0;
    for seed in 0..100 {
        let cfg = EmbeddingConfig {
            seed,
            ..Default::default()
        };
        let e = train_embeddings(&bags, &fields, W, &cfg).map_err(|e| e.to_string())?;
        if e.similarity(0, 1) > e.similarity(0, 2) {
            wins += 1;
        }
    }
    ensure(wins >= 95, || {
        format!("cos(f1,f2) > cos(f1,f3) in only {wins}/100 runs")
    })?;
    Ok(format!(
        "50 triples ({active} active), max rel err {worst:e}; planted order held in {wins}/100 runs"
    ))
}

// ---------------------------------------------------------------------------
// 4. RCA invariances

fn rca_invariances() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_global: f64 = 0.0;
    let mut worst_formula: f64 = 0.0;
    let mut worst_single: f64 = 0.0;
    let mut worst_entity: f64 = 0.0;
    let mut entity_violations = 0;
    for _ in 0..50 {
        let n_e = rng.gen_range(2..=20);
        let n_f = rng.gen_range(1..=12);
        let rows: Vec<Vec<f64>> = (0..n_e)
            .map(|_| {
                (0..n_f)
                    .map(|_| {
                        if rng.gen_bool(0.6) {
                            rng.gen_range(0.01..5.0)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let base = rca(&contribution_from(&rows));
        let direct = direct_rca(&rows);

        let c = rng.gen_range(0.01..100.0);
        let global = rca(&contribution_from(&rows).scaled(c));

        let target = rng.gen_range(0..n_e);
        let ce = rng.gen_range(0.01..100.0);
        let mut scaled_rows = rows.clone();
        scaled_rows[target].iter_mut().for_each(|v| *v *= ce);
        let per_entity = rca(&contribution_from(&scaled_rows));

        let mut violated = false;
        for e in 0..n_e {
            for f in 0..n_f {
                worst_global = worst_global.max((global.get(e, f) - base.get(e, f)).abs());
                worst_formula = worst_formula.max((base.get(e, f) - direct[e][f]).abs());
            }
        }
        for f in 0..n_f {
            let d = (per_entity.get(target, f) - base.get(target, f)).abs();
            worst_entity = worst_entity.max(d);
            violated |= d > 1e-12;
        }
        entity_violations += violated as usize;

        let solo = rca(&contribution_from(&rows[target..=target]));
        for f in 0..n_f {
            let want = if rows[target][f] > 0.0 { 1.0 } else { 0.0 };
            worst_single = worst_single.max((solo.get(0, f) - want).abs());
        }
    }
    let summary = format!(
        "global {worst_global:e}, formula {worst_formula:e}, single-entity {worst_single:e}, \
         per-entity {worst_entity:e}"
    );
    ensure(worst_global <= 1e-12, || {
        format!("global scaling moves RCA ({summary})")
    })?;
    ensure(worst_formula <= 1e-12, || {
        format!("RCA differs from the direct formula ({summary})")
    })?;
    ensure(worst_single <= 1e-12, || {
        format!("single-entity RCA is not 1 ({summary})")
    })?;
    // Rescaling one entity also rescales its contribution to every field
    // total, so under the Balassa form its row is only invariant when it is
    // the sole publisher of its fields. Reported as found.
    ensure(worst_entity <= 1e-12, || {
        format!(
            "per-entity scaling changed the entity's RCA row in {entity_violations}/50 fixtures \
             ({summary})"
        )
    })?;
    Ok(format!("50 matrices, max |error|: {summary}"))
}

fn direct_rca(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: f64 = rows.iter().flatten().sum();
    let n_f = rows[0].len();
    let col: Vec<f64> = (0..n_f).map(|f| rows.iter().map(|r| r[f]).sum()).collect();
    rows.iter()
        .map(|r| {
            let rs: f64 = r.iter().sum();
            (0..n_f)
                .map(|f| {
                    if rs == 0.0 || r[f] == 0.0 {
                        0.0
                    } else {
                        (r[f] / rs) / (col[f] / total)
                    }
                })
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// 5. stage boundaries

fn stage_boundaries() -> Outcome {
    let below_half = f64::from_bits(0.5f64.to_bits() - 1);
    let below_one = f64::from_bits(1.0f64.to_bits() - 1);
    let cases = [
        (0.0, Stage::Inactive),
        (below_half, Stage::Nascent),
        (0.5, Stage::Intermediate),
        (below_one, Stage::Intermediate),
        (1.0, Stage::Developed),
    ];
    for (v, want) in cases {
        let got = classify_stage(v).map_err(|e| e.to_string())?;
        ensure(got == want, || {
            format!("RCA {v:?} -> {got:?}, expected {want:?}")
        })?;
    }
    let codes: String = cases.iter().map(|(_, s)| s.code()).collect();
    Ok(format!("0, 0.5-, 0.5, 1-, 1 -> {codes}"))
}

// ---------------------------------------------------------------------------
// 6. disparity filter

fn disparity_checks() -> Outcome {
    let mut worst: f64 = 0.0;

    // star: hub 0, one edge carrying 97% of its strength, nine light edges
    let mut star = vec![(0, 1, 0.97)];
    star.extend((2..=10).map(|leaf| (0, leaf, 0.03 / 9.0)));
    let g = WeightedGraph::from_edges(11, &star).map_err(|e| e.to_string())?;
    let p = disparity_pvalues(&g).map_err(|e| e.to_string())?;
    let hub_strength: f64 = star.iter().map(|e| e.2).sum();
    for (edge, &(pu, pv)) in star.iter().zip(&p) {
        let want = (1.0 - edge.2 / hub_strength).powi(9);
        worst = worst.max((pu - want).abs()).max((pv - 1.0).abs());
    }
    worst = worst.max((p[0].0 - 0.03f64.powi(9)).abs());
    let kept = disparity_filter(&g, 1e-6).map_err(|e| e.to_string())?;
    ensure(kept.n_edges() == 1, || {
        format!("star keeps {} edges at alpha 1e-6", kept.n_edges())
    })?;

    // equal-weight triangle: every endpoint sees p = 0.5
    let tri = WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
        .map_err(|e| e.to_string())?;
    for &(pu, pv) in &disparity_pvalues(&tri).map_err(|e| e.to_string())? {
        worst = worst.max((pu - 0.5).abs()).max((pv - 0.5).abs());
    }
    let at_half = disparity_filter(&tri, 0.5)
        .map_err(|e| e.to_string())?
        .n_edges();
    let above = disparity_filter(&tri, 0.5 + 1e-9)
        .map_err(|e| e.to_string())?
        .n_edges();
    ensure(at_half == 0 && above == 3, || {
        format!("triangle kept {at_half}/{above} edges")
    })?;

    // 3-2-1 triangle: node strengths 5, 4, 3 (each degree 2)
    let w = [(0, 1, 3.0), (0, 2, 2.0), (1, 2, 1.0)];
    let s = [5.0, 4.0, 3.0];
    let tri = WeightedGraph::from_edges(3, &w).map_err(|e| e.to_string())?;
    let pv = disparity_pvalues(&tri).map_err(|e| e.to_string())?;
    for (e, got) in tri.edges.iter().zip(&pv) {
        let want = (1.0 - e.weight / s[e.u], 1.0 - e.weight / s[e.v]);
        worst = worst
            .max((got.0 - want.0).abs())
            .max((got.1 - want.1).abs());
    }
    ensure(worst <= 1e-12, || {
        format!("closed-form p values off by {worst:e}")
    })?;

    // monotonicity in alpha on random graphs
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    for trial in 0..30 {
        let n = rng.gen_range(3..=15);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(0.4) {
                    edges.push((u, v, rng.gen_range(0.01..10.0)));
                }
            }
        }
        let g = WeightedGraph::from_edges(n, &edges).map_err(|e| e.to_string())?;
        let mut prev: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &alpha in &grid {
            let kept: BTreeSet<(usize, usize)> = disparity_filter(&g, alpha)
                .map_err(|e| e.to_string())?
                .edges
                .iter()
                .map(|e| (e.u, e.v))
                .collect();
            ensure(prev.is_subset(&kept), || {
                format!("graph {trial}: edge set shrinks at alpha {alpha}")
            })?;
            prev = kept;
        }
    }
    Ok(format!(
        "closed forms within {worst:e}; nested over a 99-point alpha grid on 30 graphs"
    ))
}

// ---------------------------------------------------------------------------
// 7. community detection

fn oracle_modularity(n: usize, edges: &[(usize, usize, f64)], label: &[usize]) -> f64 {
    let m: f64 = edges.iter().map(|e| e.2).sum();
    let mut deg = vec![0.0; n];
    for &(u, v, w) in edges {
        deg[u] += w;
        deg[v] += w;
    }
    // Q = 1/2m sum_ij [A_ij - k_i k_j / 2m] delta(c_i, c_j)
    let mut q = 0.0;
    for &(u, v, w) in edges {
        if label[u] == label[v] {
            q += 2.0 * w;
        }
    }
    for i in 0..n {
        for j in 0..n {
            if label[i] == label[j] {
                q -= deg[i] * deg[j] / (2.0 * m);
            }
        }
    }
    q / (2.0 * m)
}

/// Every set partition of `0..n` as restricted growth strings.
fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; n];
    fn rec(i: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for c in 0..=max + 1 {
            cur[i] = c;
            rec(i + 1, max.max(c), cur, out);
        }
    }
    if n > 0 {
        rec(1, 0, &mut cur, &mut out);
    }
    out
}

fn community_checks() -> Outcome {
    let mut cliques = Vec::new();
    for base in [0, 4] {
        for u in base..base + 4 {
            for v in u + 1..base + 4 {
                cliques.push((u, v, 1.0));
            }
        }
    }
    cliques.push((3, 4, 1.0));
    let g = WeightedGraph::from_edges(8, &cliques).map_err(|e| e.to_string())?;
    let part = greedy_communities(&g).map_err(|e| e.to_string())?;
    ensure(
        part.communities() == vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]],
        || format!("two-clique fixture split as {:?}", part.communities()),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let partitions: Vec<Vec<Vec<usize>>> = (0..=8).map(set_partitions).collect();
    let mut worst_gap: f64 = 0.0;
    let mut worst_q: f64 = 0.0;
    let mut graphs = 0;
    while graphs < 60 {
        let n = rng.gen_range(3..=8);
        let p_edge = rng.gen_range(0.2..0.8);
        let weighted = rng.gen_bool(0.5);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(p_edge) {
                    let w = if weighted {
                        rng.gen_range(0.1..5.0)
                    } else {
                        1.0
                    };
                    edges.push((u, v, w));
                }
            }
        }
        if edges.is_empty() {
            continue;
        }
        graphs += 1;
        let g = WeightedGraph::from_edges(n, &edges).map_err(|e| e.to_string())?;
        let part = greedy_communities(&g).map_err(|e| e.to_string())?;
        worst_q =
            worst_q.max((part.modularity - oracle_modularity(n, &edges, &part.assignment)).abs());
        let best = partitions[n]
            .iter()
            .map(|l| oracle_modularity(n, &edges, l))
            .fold(f64::NEG_INFINITY, f64::max);
        worst_gap = worst_gap.max(best - part.modularity);
    }
    ensure(worst_q <= 1e-12, || {
        format!("reported Q differs from recomputed Q by {worst_q:e}")
    })?;
    ensure(worst_gap <= 0.05, || {
        format!("CNM falls {worst_gap:.4} below the exhaustive optimum")
    })?;
    Ok(format!(
        "cliques recovered; 60 graphs, max gap to exhaustive optimum {worst_gap:.4}"
    ))
}

// ---------------------------------------------------------------------------
// 8. planted-relatedness simulation

struct ModelScore {
    mean: f64,
    baseline: f64,
    n: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn score_model(
    sim: &rspace_core::simulation::SimulatedCorpus,
    phi: &ProximityMatrix,
    rng: &mut ChaCha8Rng,
) -> Result<ModelScore, String> {
    let w = sim.windows;
    let kind = TransitionKind::ZeroToActive;
    let policy = CandidatePolicy::SourceStage;
    let eval = evaluate_transitions(&sim.corpus, phi, w.rca, w.test, kind, policy)
        .map_err(|e| e.to_string())?;

    let before = rca(&contribution_matrix(&sim.corpus, w.rca));
    let after = rca(&contribution_matrix(&sim.corpus, w.test));
    let events = detect_transitions(&before, &after, kind).map_err(|e| e.to_string())?;
    let mut positives = std::collections::BTreeMap::<usize, BTreeSet<usize>>::new();
    for ev in events {
        positives.entry(ev.entity).or_default().insert(ev.field);
    }
    let ranked = predict(
        &sim.corpus,
        phi,
        w.rca,
        kind,
        policy,
        positives.keys().copied(),
    )
    .map_err(|e| e.to_string())?;

    // same rankings, positives reassigned uniformly at random among the
    // candidates; averaged over repeated shuffles
    let mut shuffled_means = Vec::new();
    for _ in 0..20 {
        let mut values = Vec::new();
        for pred in &ranked {
            let k = positives[&pred.entity].len();
            let mut cands: Vec<usize> = pred.ranked.iter().map(|(f, _)| *f).collect();
            cands.shuffle(rng);
            let fake: BTreeSet<usize> = cands.into_iter().take(k).collect();
            if let Some(r) = auroc(pred, &fake) {
                values.push(r.auroc);
            }
        }
        shuffled_means.push(mean(&values));
    }
    Ok(ModelScore {
        mean: mean(&eval.aurocs()),
        baseline: mean(&shuffled_means),
        n: eval.entities.len(),
    })
}

fn simulation_check() -> Outcome {
    let cfg = SimulationConfig {
        n_scientists: 500,
        seed: 8,
        ..Default::default()
    };
    let sim = simulate(&cfg).map_err(|e| e.to_string())?;
    let x_fit = contribution_matrix(&sim.corpus, sim.windows.fit);
    let p_fit = presence_matrix(&x_fit, 0.05).map_err(|e| e.to_string())?;

    let freq = fit_frequentist(&p_fit).map_err(|e| e.to_string())?;
    let emb_cfg = EmbeddingConfig {
        seed: 8,
        ..Default::default()
    };
    let emb = proximity_emb(&fit_embedding(&p_fit, &emb_cfg).map_err(|e| e.to_string())?);

    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for (name, phi) in [("frequentist", &freq), ("embedding", &emb)] {
        let s = score_model(&sim, phi, &mut rng)?;
        lines.push(format!(
            "{name}: mean AUROC {:.3} over {} scientists, shuffled {:.3}",
            s.mean, s.n, s.baseline
        ));
        if s.mean < 0.75 {
            failures.push(format!("{name} mean {:.3} < 0.75", s.mean));
        }
        if s.mean - s.baseline < 0.25 {
            failures.push(format!("{name} lift {:.3} < 0.25", s.mean - s.baseline));
        }
        if (s.baseline - 0.5).abs() > 0.03 {
            failures.push(format!(
                "{name} baseline {:.3} outside 0.5 +/- 0.03",
                s.baseline
            ));
        }
    }
    if failures.is_empty() {
        Ok(lines.join("; "))
    } else {
        Err(format!("{} ({})", failures.join(", "), lines.join("; ")))
    }
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 AUROC oracle equivalence", auroc_oracle),
        ("2 frequentist oracle", frequentist_oracle),
        ("3 embedding gradients and planted order", embedding_checks),
        ("4 RCA invariances", rca_invariances),
        ("5 stage boundaries", stage_boundaries),
        ("6 disparity filter", disparity_checks),
        ("7 community detection", community_checks),
        ("8 planted-relatedness simulation", simulation_check),
    ];
    // silence the default hook; panics are reported as failures below
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
