use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use log::{info, warn};

use rspace_core::corpus::{load_records, resolve_corpus};
use rspace_core::emb_model::{fit_embedding, proximity_emb, EmbeddingConfig};
use rspace_core::freq_model::fit_frequentist;
use rspace_core::io::{self, Header};
use rspace_core::network::{
    aggregate_to_intermediate, classify_edges, disparity_filter, graph_from_proximity,
    greedy_communities, intermediate_graph, mst_plus_threshold, to_dot, to_edgelist, to_graphml,
};
use rspace_core::prediction_eval;
use rspace_core::prediction_eval::{
    ccdf, compare_models, cv_sliding, entity_stats, evaluate_transitions, summarize,
    CandidatePolicy, Evaluation,
};
use rspace_core::presence::{contribution_matrix, presence_matrix, WindowConfig};
use rspace_core::specialization::rca;
use rspace_core::{Error, FieldTaxonomy, ModelTag, VenueFieldMap};

use crate::manifest::{sha256_hex, RunManifest};
use crate::{
    BackboneArgs, BackboneMode, EvaluateArgs, ExportStatsArgs, FitArgs, GraphFormat, IngestArgs,
    Level, PredictArgs,
};

const MATCH_REPORT_SCHEMA: &str = "rspace.match-report/1";
const PREDICTIONS_SCHEMA: &str = "rspace.predictions/1";
const AUROC_SCHEMA: &str = "rspace.auroc/1";
const SUMMARY_SCHEMA: &str = "rspace.summary/1";
const GRAPH_SCHEMA: &str = "rspace.graph/1";
const PARTITION_SCHEMA: &str = "rspace.partition/1";
const MATRIX_SCHEMA: &str = "rspace.matrix/1";
const STATS_SCHEMA: &str = "rspace.entity-stats/1";
const CCDF_SCHEMA: &str = "rspace.ccdf/1";
const CV_SCHEMA: &str = "rspace.cv/1";

/// Missing inputs are configuration errors (exit 2), not runtime failures.
fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(Error::config(format!("{what} file {} not found", path.display())).into());
    }
    Ok(())
}

fn write(out: &Path, name: &str, text: &str) -> Result<()> {
    let path = out.join(name);
    io::write_text(&path, text)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn policy_name(p: CandidatePolicy) -> &'static str {
    match p {
        CandidatePolicy::SourceStage => "source-stage",
        CandidatePolicy::AllUnset => "all-unset",
    }
}

// ---------------------------------------------------------------------------

pub fn ingest(a: IngestArgs) -> Result<()> {
    require_file(&a.taxonomy, "taxonomy")?;
    require_file(&a.venues, "venue map")?;
    require_file(&a.records, "records")?;

    let mut m = RunManifest::new("ingest", &a.out);
    m.input(&a.records)?;
    m.input(&a.venues)?;
    m.input(&a.taxonomy)?;
    m.entity_kind = Some(a.kind.to_string());
    m.param("format", format!("{:?}", a.format));

    let taxonomy = FieldTaxonomy::load(&a.taxonomy)?;
    let venues = VenueFieldMap::load(&a.venues)?;
    let loaded = load_records(&a.records, a.format)?;
    for issue in loaded.rejected.iter().take(20) {
        warn!(
            "{}: line {}: {}",
            a.records.display(),
            issue.line,
            issue.msg
        );
    }
    if loaded.rejected.len() > 20 {
        warn!("{} more rejected rows", loaded.rejected.len() - 20);
    }
    let corpus = resolve_corpus(&loaded.records, &venues, &taxonomy, a.kind)?;

    let hash = m.persist("ingest")?;
    let header = Header::new(io::CORPUS_SCHEMA).with("manifest", &hash);
    write(&a.out, "corpus.tsv", &io::corpus_to_string(&corpus, header))?;

    let s = corpus.match_stats;
    let mut report = Header::new(MATCH_REPORT_SCHEMA)
        .with("manifest", &hash)
        .render();
    let rows: [(&str, String); 10] = [
        (
            "records_read",
            (loaded.records.len() + loaded.rejected.len()).to_string(),
        ),
        ("rejected_rows", loaded.rejected.len().to_string()),
        ("exact", s.exact.to_string()),
        ("approximate", s.approximate.to_string()),
        ("unmatched", s.unmatched.to_string()),
        ("missing_attribute", s.missing_attribute.to_string()),
        ("exact_ratio", s.exact_ratio().to_string()),
        ("covered_ratio", s.covered_ratio().to_string()),
        ("entities", corpus.n_entities().to_string()),
        ("resolved_records", corpus.records.len().to_string()),
    ];
    report.push_str("key\tvalue\n");
    for (k, v) in &rows {
        let _ = writeln!(report, "{k}\t{v}");
    }
    write(&a.out, "match_report.tsv", &report)?;

    println!(
        "{} entities, {} records (exact {}, approximate {}, unmatched {}, missing attribute {})",
        corpus.n_entities(),
        corpus.records.len(),
        s.exact,
        s.approximate,
        s.unmatched,
        s.missing_attribute
    );
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn fit(a: FitArgs) -> Result<()> {
    require_file(&a.corpus, "corpus")?;
    let mut m = RunManifest::new("fit", &a.out);
    m.input(&a.corpus)?;
    m.windows.insert("fit", a.window.to_string());
    m.theta = Some(a.theta);
    m.model = Some(a.model.to_string());

    let (corpus, _) = io::read_corpus(&a.corpus)?;
    m.entity_kind = Some(corpus.kind.to_string());
    let x = contribution_matrix(&corpus, a.window);
    let p = presence_matrix(&x, a.theta)?;
    info!(
        "{} present (entity, field) pairs in {}",
        p.count(),
        a.window
    );

    let stem = match a.model {
        ModelTag::Frequentist => "freq",
        ModelTag::Embedding => "emb",
    };
    let (phi, embedding) = match a.model {
        ModelTag::Frequentist => (fit_frequentist(&p)?, None),
        ModelTag::Embedding => {
            let cfg = EmbeddingConfig {
                dim: a.emb.dim,
                epochs: a.emb.epochs,
                learning_rate: a.emb.lr,
                negatives_per_example: a.emb.negatives,
                margin: a.emb.margin,
                seed: a.seed,
            };
            cfg.validate()?;
            m.seed = Some(a.seed);
            m.model_config_hash = Some(sha256_hex(&serde_json::to_vec(&cfg)?));
            let e = fit_embedding(&p, &cfg)?;
            if let (Some(first), Some(last)) = (e.epoch_losses.first(), e.epoch_losses.last()) {
                info!("mean hinge loss {first:.4} -> {last:.4}");
            }
            (proximity_emb(&e), Some(e))
        }
    };

    let hash = m.persist(&format!("fit.{stem}"))?;
    let header = Header::new(io::PROXIMITY_SCHEMA)
        .with("manifest", &hash)
        .with("theta", a.theta)
        .with("kind", corpus.kind);
    write(
        &a.out,
        &format!("proximity.{stem}.tsv"),
        &io::proximity_to_string(&phi, header),
    )?;
    if let Some(e) = embedding {
        let header = Header::new(io::EMBEDDING_SCHEMA).with("manifest", &hash);
        write(
            &a.out,
            "embedding.tsv",
            &io::embedding_to_string(&e, header),
        )?;
    }
    println!(
        "{} model over {} fields, window {}",
        a.model,
        phi.n_fields(),
        a.window
    );
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn predict(a: PredictArgs) -> Result<()> {
    require_file(&a.corpus, "corpus")?;
    require_file(&a.phi, "proximity")?;
    let policy: CandidatePolicy = a.policy.into();
    let mut m = RunManifest::new("predict", &a.out);
    m.input(&a.corpus)?;
    m.input(&a.phi)?;
    m.windows.insert("rca", a.rca.to_string());
    m.param("transition", a.transition.code());
    m.param("policy", policy_name(policy));
    m.param("entities", a.entities.join(","));
    m.param("top", a.top.map_or("all".into(), |k| k.to_string()));

    let (corpus, _) = io::read_corpus(&a.corpus)?;
    let (phi, _) = io::read_proximity(&a.phi)?;
    m.model = Some(phi.model.to_string());
    m.entity_kind = Some(corpus.kind.to_string());

    let selected: Vec<usize> = if a.entities.is_empty() {
        (0..corpus.n_entities()).collect()
    } else {
        a.entities
            .iter()
            .filter_map(|id| {
                let idx = corpus.entity_index(id);
                if idx.is_none() {
                    warn!("entity {id} not in corpus, skipped");
                }
                idx
            })
            .collect()
    };
    let preds = prediction_eval::predict(&corpus, &phi, a.rca, a.transition, policy, selected)?;

    let empty: Vec<&str> = preds
        .iter()
        .filter(|p| p.ranked.is_empty())
        .map(|p| corpus.entities[p.entity].as_str())
        .collect();
    for id in &empty {
        warn!("entity {id} has no candidate fields");
    }

    let hash = m.persist("predict")?;
    let mut header = Header::new(PREDICTIONS_SCHEMA)
        .with("manifest", &hash)
        .with("model", phi.model)
        .with("rca", a.rca)
        .with("transition", a.transition.code())
        .with("policy", policy_name(policy));
    if !empty.is_empty() {
        header.set("no_candidates", empty.join(","));
    }
    let mut out = header.render();
    out.push_str("entity_id\trank\tfield_id\tdensity\n");
    let mut table = String::new();
    for p in &preds {
        let rows = match a.top {
            Some(k) => p.top(k),
            None => &p.ranked[..],
        };
        for (rank, (f, d)) in rows.iter().enumerate() {
            let line = format!(
                "{}\t{}\t{}\t{d}\n",
                corpus.entities[p.entity],
                rank + 1,
                corpus.fields[*f]
            );
            table.push_str(&line);
        }
    }
    out.push_str(&table);
    write(&a.out, "predictions.tsv", &out)?;
    if !a.entities.is_empty() {
        print!("{table}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn summary_row(out: &mut String, run: &str, model: ModelTag, eval: &Evaluation) {
    let base = format!(
        "{run}\t{model}\t{}\t{}",
        eval.n_transitioned, eval.n_undefined
    );
    match eval.summary() {
        Ok(s) => {
            let _ = writeln!(
                out,
                "{base}\t{}\t{}\t{}\t{}\t{}",
                s.n, s.mean, s.median, s.q1, s.q3
            );
        }
        Err(_) => {
            let _ = writeln!(out, "{base}\t0\tNA\tNA\tNA\tNA");
        }
    }
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    if a.phi.len() > 2 {
        return Err(Error::config("evaluate takes one or two --phi artifacts").into());
    }
    require_file(&a.corpus, "corpus")?;
    for p in &a.phi {
        require_file(p, "proximity")?;
    }
    let policy: CandidatePolicy = a.policy.into();
    let mut m = RunManifest::new("evaluate", &a.out);
    m.input(&a.corpus)?;
    for p in &a.phi {
        m.input(p)?;
    }
    m.windows.insert("rca", a.rca.to_string());
    m.windows.insert("test", a.test.to_string());
    if let Some(f) = a.fit {
        m.windows.insert("fit", f.to_string());
    }
    m.seed = Some(a.seed);
    m.param("transition", a.transition.code());
    m.param("policy", policy_name(policy));
    m.param("permutations", a.permutations);

    let (corpus, _) = io::read_corpus(&a.corpus)?;
    m.entity_kind = Some(corpus.kind.to_string());
    let mut runs = Vec::new();
    for (i, path) in a.phi.iter().enumerate() {
        let (phi, _) = io::read_proximity(path)?;
        if let Some(f) = a.fit {
            if f != phi.window {
                return Err(Error::config(format!(
                    "--fit {f} does not match the window {} of {}",
                    phi.window,
                    path.display()
                ))
                .into());
            }
        }
        WindowConfig::new(phi.window, a.rca, a.test)?;
        let eval = evaluate_transitions(&corpus, &phi, a.rca, a.test, a.transition, policy)?;
        if eval.entities.is_empty() {
            warn!("{}: no entity has a defined AUROC", path.display());
        }
        let run = ["A", "B"][i];
        runs.push((run, phi.model, eval));
    }

    let p_value = match &runs[..] {
        [(_, _, ea), (_, _, eb)] if !ea.entities.is_empty() && !eb.entities.is_empty() => Some(
            compare_models(&ea.aurocs(), &eb.aurocs(), a.permutations, a.seed)?,
        ),
        _ => None,
    };

    let hash = m.persist("evaluate")?;
    let header = Header::new(AUROC_SCHEMA)
        .with("manifest", &hash)
        .with("rca", a.rca)
        .with("test", a.test)
        .with("transition", a.transition.code())
        .with("policy", policy_name(policy));
    let mut out = header.render();
    out.push_str("run\tmodel\tentity_id\tauroc\tn_pos\tn_neg\tn_active\tn_developed\tmass\n");
    for (run, model, eval) in &runs {
        for e in &eval.entities {
            let r = e.result;
            let _ = writeln!(
                out,
                "{run}\t{model}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                corpus.entities[r.entity],
                r.auroc,
                r.n_pos,
                r.n_neg,
                e.stats.n_active,
                e.stats.n_developed,
                e.stats.mass
            );
        }
    }
    write(&a.out, "auroc.tsv", &out)?;

    let mut header = Header::new(SUMMARY_SCHEMA)
        .with("manifest", &hash)
        .with("transition", a.transition.code());
    if let Some(p) = p_value {
        header.set("p_value", p);
    }
    let mut summary = header.render();
    summary.push_str("run\tmodel\tn_transitioned\tn_undefined\tn\tmean\tmedian\tq1\tq3\n");
    for (run, model, eval) in &runs {
        summary_row(&mut summary, run, *model, eval);
    }
    write(&a.out, "summary.tsv", &summary)?;

    for (run, model, eval) in &runs {
        match eval.summary() {
            Ok(s) => println!(
                "{run} {model} {}: n={} mean={:.4} median={:.4} q1={:.4} q3={:.4}",
                a.transition, s.n, s.mean, s.median, s.q1, s.q3
            ),
            Err(_) => println!("{run} {model} {}: no defined AUROC", a.transition),
        }
    }
    if let Some(p) = p_value {
        println!("permutation p-value (A vs B): {p}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn backbone(a: BackboneArgs) -> Result<()> {
    require_file(&a.taxonomy, "taxonomy")?;
    require_file(&a.phi, "proximity")?;
    let level = a.level.unwrap_or(match a.mode {
        BackboneMode::Disparity => Level::Intermediate,
        BackboneMode::MstThreshold => Level::Field,
    });
    let mut m = RunManifest::new("backbone", &a.out);
    m.input(&a.phi)?;
    m.input(&a.taxonomy)?;
    let mode = match a.mode {
        BackboneMode::Disparity => "disparity",
        BackboneMode::MstThreshold => "mst-threshold",
    };
    m.param("mode", mode);
    m.param(
        "level",
        if level == Level::Field {
            "field"
        } else {
            "intermediate"
        },
    );
    match a.mode {
        BackboneMode::Disparity => m.param("alpha", a.alpha),
        BackboneMode::MstThreshold => m.param("p", a.p),
    }

    let taxonomy = FieldTaxonomy::load(&a.taxonomy)?;
    let (phi, _) = io::read_proximity(&a.phi)?;
    m.model = Some(phi.model.to_string());
    let g = match level {
        Level::Field => graph_from_proximity(&phi, Some(&taxonomy)),
        Level::Intermediate => {
            intermediate_graph(&aggregate_to_intermediate(&phi, &taxonomy)?, &taxonomy)
        }
    };
    let b = match a.mode {
        BackboneMode::Disparity => disparity_filter(&g, a.alpha)?,
        BackboneMode::MstThreshold => mst_plus_threshold(&g, a.p),
    };
    let partition = greedy_communities(&b)?;
    let labels = classify_edges(&b, &partition)?;

    let hash = m.persist("backbone")?;
    let (name, text) = match a.format {
        GraphFormat::Edgelist => ("backbone.edges", to_edgelist(&b, Some(&labels))),
        GraphFormat::Xmlgraph => (
            "backbone.graphml",
            to_graphml(&b, Some(&labels), Some(&partition)),
        ),
        GraphFormat::Dot => ("backbone.dot", to_dot(&b, Some(&labels))),
        GraphFormat::Tsv => {
            let mut out = Header::new(GRAPH_SCHEMA)
                .with("manifest", &hash)
                .with("model", phi.model)
                .with("mode", mode)
                .render();
            out.push_str("u\tv\tweight\tlabel\n");
            for (e, l) in b.edges.iter().zip(&labels) {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}",
                    b.nodes[e.u].id,
                    b.nodes[e.v].id,
                    e.weight,
                    l.as_str()
                );
            }
            ("backbone.tsv", out)
        }
    };
    write(&a.out, name, &text)?;

    let mut out = Header::new(PARTITION_SCHEMA)
        .with("manifest", &hash)
        .with("modularity", partition.modularity)
        .render();
    out.push_str("node_id\tlabel\tgroup\tcommunity\n");
    for (n, c) in b.nodes.iter().zip(&partition.assignment) {
        let _ = writeln!(out, "{}\t{}\t{}\t{c}", n.id, n.label, n.group);
    }
    write(&a.out, "partition.tsv", &out)?;

    let inter = labels.iter().filter(|l| l.as_str() == "inter").count();
    println!(
        "{} nodes, {} edges ({} inter-community), {} communities, Q = {:.4}",
        b.n_nodes(),
        b.n_edges(),
        inter,
        partition.n_communities(),
        partition.modularity
    );
    Ok(())
}

// ---------------------------------------------------------------------------

/// `(run, [(covariate name, value)], auroc)` rows of an `evaluate` AUROC file.
fn read_auroc(path: &Path) -> Result<Vec<(String, BTreeMap<String, f64>, f64)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let head: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::config(format!("{} has no column header", path.display())))?
        .split('\t')
        .collect();
    let col = |name: &str| {
        head.iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::config(format!("{} lacks column {name}", path.display())))
    };
    let (run, auroc) = (col("run")?, col("auroc")?);
    let covariates: Vec<(&str, usize)> = ["n_active", "n_developed", "mass"]
        .iter()
        .map(|&c| col(c).map(|i| (c, i)))
        .collect::<std::result::Result<_, _>>()?;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        let num = |j: usize| -> Result<f64> {
            cols.get(j).and_then(|v| v.parse().ok()).ok_or_else(|| {
                Error::config(format!("{}: bad row {}", path.display(), i + 2)).into()
            })
        };
        let mut cov = BTreeMap::new();
        for &(name, j) in &covariates {
            cov.insert(name.to_string(), num(j)?);
        }
        rows.push((cols[run].to_string(), cov, num(auroc)?));
    }
    Ok(rows)
}

pub fn export_stats(a: ExportStatsArgs) -> Result<()> {
    require_file(&a.corpus, "corpus")?;
    if let Some(p) = &a.auroc {
        require_file(p, "AUROC")?;
    }
    let mut m = RunManifest::new("export-stats", &a.out);
    m.input(&a.corpus)?;
    if let Some(p) = &a.auroc {
        m.input(p)?;
        m.param("cv_window", a.cv_window);
    }
    m.windows.insert("window", a.window.to_string());
    m.theta = Some(a.theta);

    let (corpus, _) = io::read_corpus(&a.corpus)?;
    m.entity_kind = Some(corpus.kind.to_string());
    let x = contribution_matrix(&corpus, a.window);
    let p = presence_matrix(&x, a.theta)?;
    let r = rca(&x);
    let hash = m.persist("export-stats")?;
    let header = |what: &str| {
        Header::new(MATRIX_SCHEMA)
            .with("manifest", &hash)
            .with("matrix", what)
            .with("window", a.window)
    };

    write(
        &a.out,
        "contribution.tsv",
        &io::triples_to_string(&x.values, header("X"), |v| v.to_string()),
    )?;
    write(
        &a.out,
        "presence.tsv",
        &io::triples_to_string(&p.values, header("P").with("theta", a.theta), |_| {
            "1".into()
        }),
    )?;
    write(&a.out, "rca.tsv", &io::stages_to_string(&r, header("RCA")))?;

    let mut stats = Header::new(STATS_SCHEMA)
        .with("manifest", &hash)
        .with("window", a.window)
        .render();
    stats.push_str("entity_id\tn_present\tn_active\tn_developed\tmass\n");
    let mut columns: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for e in 0..corpus.n_entities() {
        let s = entity_stats(&x, &r, e);
        let n_present = p.present_fields(e).count();
        if s.mass == 0.0 {
            continue;
        }
        let _ = writeln!(
            stats,
            "{}\t{n_present}\t{}\t{}\t{}",
            corpus.entities[e], s.n_active, s.n_developed, s.mass
        );
        columns.entry("mass").or_default().push(s.mass);
        columns
            .entry("n_active")
            .or_default()
            .push(s.n_active as f64);
        columns
            .entry("n_developed")
            .or_default()
            .push(s.n_developed as f64);
    }
    write(&a.out, "entity_stats.tsv", &stats)?;

    let mut out = Header::new(CCDF_SCHEMA).with("manifest", &hash).render();
    out.push_str("metric\tvalue\tccdf\n");
    for (metric, values) in &columns {
        for (v, c) in ccdf(values) {
            let _ = writeln!(out, "{metric}\t{v}\t{c}");
        }
    }
    write(&a.out, "ccdf.tsv", &out)?;

    if let Some(path) = &a.auroc {
        let rows = read_auroc(path)?;
        let mut out = Header::new(CV_SCHEMA)
            .with("manifest", &hash)
            .with("window_size", a.cv_window)
            .render();
        out.push_str("run\tcovariate\tmidpoint\tcv\n");
        let runs: Vec<&str> = {
            let mut r: Vec<&str> = rows.iter().map(|r| r.0.as_str()).collect();
            r.dedup();
            r
        };
        for run in runs {
            let aurocs: Vec<f64> = rows.iter().filter(|r| r.0 == run).map(|r| r.2).collect();
            if let Ok(s) = summarize(&aurocs) {
                info!("run {run}: {} AUROC values, mean {:.4}", s.n, s.mean);
            }
            for cov in ["n_active", "n_developed", "mass"] {
                let pairs: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.0 == run)
                    .map(|r| (r.1[cov], r.2))
                    .collect();
                let curve = match cv_sliding(&pairs, a.cv_window) {
                    Ok(c) => c,
                    Err(e) => {
                        warn!("run {run}, {cov}: {e}");
                        continue;
                    }
                };
                if curve.skipped > 0 {
                    warn!(
                        "run {run}, {cov}: {} zero-mean windows skipped",
                        curve.skipped
                    );
                }
                for (mid, cv) in curve.points {
                    let _ = writeln!(out, "{run}\t{cov}\t{mid}\t{cv}");
                }
            }
        }
        write(&a.out, "cv.tsv", &out)?;
    }
    println!(
        "{} entities exported for {}",
        columns.get("mass").map_or(0, Vec::len),
        a.window
    );
    Ok(())
}
