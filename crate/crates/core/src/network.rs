//! Field networks derived from a proximity matrix: visualization graphs
//! (maximum spanning forest plus thresholded edges), disparity-filter
//! backbones, aggregation to the intermediate taxonomy level and greedy
//! (Clauset-Newman-Moore) modularity communities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{FieldId, FieldTaxonomy};
use crate::error::{Error, Result};
use crate::freq_model::{ModelTag, ProximityMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub label: String,
    /// Macro-area id, used for coloring.
    pub group: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub directed: bool,
}

impl WeightedGraph {
    /// Undirected graphs must list each pair once; self-loops and
    /// non-positive weights are rejected.
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>, directed: bool) -> Result<Self> {
        let n = nodes.len();
        let mut seen = BTreeSet::new();
        for e in &edges {
            if e.u >= n || e.v >= n {
                return Err(Error::config(format!(
                    "edge ({}, {}) out of range",
                    e.u, e.v
                )));
            }
            if e.u == e.v {
                return Err(Error::config(format!("self-loop on node {}", e.u)));
            }
            if !(e.weight > 0.0) || !e.weight.is_finite() {
                return Err(Error::config(format!(
                    "edge weight {} is not positive",
                    e.weight
                )));
            }
            let key = if directed {
                (e.u, e.v)
            } else {
                (e.u.min(e.v), e.u.max(e.v))
            };
            if !seen.insert(key) {
                return Err(Error::config(format!("duplicate edge ({}, {})", e.u, e.v)));
            }
        }
        Ok(Self {
            nodes,
            edges,
            directed,
        })
    }

    /// Nodes with anonymous ids `0..n`, all in group 0.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let nodes = (0..n)
            .map(|i| Node {
                id: i.to_string(),
                label: i.to_string(),
                group: 0,
            })
            .collect();
        let edges = edges
            .iter()
            .map(|&(u, v, weight)| Edge { u, v, weight })
            .collect();
        Self::new(nodes, edges, false)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Undirected version; opposite arcs of a directed graph merge into one
    /// edge weighted by the smaller of the two (0 if either is missing).
    pub fn to_undirected(&self) -> WeightedGraph {
        if !self.directed {
            return self.clone();
        }
        let mut arcs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for e in &self.edges {
            arcs.insert((e.u, e.v), e.weight);
        }
        let edges = arcs
            .iter()
            .filter(|((u, v), _)| u < v)
            .filter_map(|(&(u, v), &w)| {
                let back = arcs.get(&(v, u)).copied().unwrap_or(0.0);
                let weight = w.min(back);
                (weight > 0.0).then_some(Edge { u, v, weight })
            })
            .collect();
        WeightedGraph {
            nodes: self.nodes.clone(),
            edges,
            directed: false,
        }
    }

    /// `(strength, degree)` per node of the undirected graph.
    pub fn strengths(&self) -> Vec<(f64, usize)> {
        let mut out = vec![(0.0, 0usize); self.n_nodes()];
        for e in &self.edges {
            for x in [e.u, e.v] {
                out[x].0 += e.weight;
                out[x].1 += 1;
            }
        }
        out
    }

    fn with_edges(&self, edges: Vec<Edge>) -> WeightedGraph {
        WeightedGraph {
            nodes: self.nodes.clone(),
            edges,
            directed: self.directed,
        }
    }
}

fn field_nodes(fields: &[FieldId], taxonomy: Option<&FieldTaxonomy>) -> Vec<Node> {
    fields
        .iter()
        .map(|id| {
            let meta = taxonomy.and_then(|t| t.field(*id));
            Node {
                id: id.to_string(),
                label: meta
                    .map(|f| f.name.clone())
                    .unwrap_or_else(|| id.to_string()),
                group: meta.map(|f| f.macro_id).unwrap_or(0),
            }
        })
        .collect()
}

/// Field network of a proximity matrix: undirected for the embedding model,
/// directed (arc `f -> f'` weighted `phi_ff'`) for the frequentist one.
pub fn graph_from_proximity(
    phi: &ProximityMatrix,
    taxonomy: Option<&FieldTaxonomy>,
) -> WeightedGraph {
    let n = phi.n_fields();
    let directed = phi.model == ModelTag::Frequentist;
    let mut edges = Vec::new();
    for i in 0..n {
        let range = if directed { 0..n } else { i + 1..n };
        for j in range {
            let w = phi.get(i, j);
            if i != j && w > 0.0 {
                edges.push(Edge {
                    u: i,
                    v: j,
                    weight: w,
                });
            }
        }
    }
    WeightedGraph {
        nodes: field_nodes(phi.fields(), taxonomy),
        edges,
        directed,
    }
}

/// Mean cross-field proximity between intermediate categories.
///
/// The result reuses [`ProximityMatrix`] with intermediate ids in place of
/// field ids; its diagonal is 1 by convention and carries no information.
pub fn aggregate_to_intermediate(
    phi: &ProximityMatrix,
    taxonomy: &FieldTaxonomy,
) -> Result<ProximityMatrix> {
    if phi.model == ModelTag::Frequentist || !phi.is_symmetric() {
        return Err(Error::UnsupportedModel {
            model: phi.model.to_string(),
            msg: "aggregation to intermediates needs a symmetric proximity".into(),
        });
    }
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, fid) in phi.fields().iter().enumerate() {
        let field = taxonomy
            .field(*fid)
            .ok_or_else(|| Error::config(format!("field {fid} not in taxonomy")))?;
        groups.entry(field.intermediate_id).or_default().push(i);
    }
    let ids: Vec<u32> = groups.keys().copied().collect();
    let members: Vec<&Vec<usize>> = groups.values().collect();
    let k = ids.len();
    let mut values = vec![0.0; k * k];
    for a in 0..k {
        values[a * k + a] = 1.0;
        for b in a + 1..k {
            let mut sum = 0.0;
            let mut count = 0usize;
            for &f in members[a] {
                for &g in members[b] {
                    sum += phi.get(f, g);
                    count += 1;
                }
            }
            let mean = sum / count as f64;
            values[a * k + b] = mean;
            values[b * k + a] = mean;
        }
    }
    ProximityMatrix::from_dense(
        Arc::new(ids.into_iter().map(FieldId).collect()),
        values,
        phi.model,
        phi.window,
    )
}

/// Undirected graph over intermediates with acronym labels.
pub fn intermediate_graph(agg: &ProximityMatrix, taxonomy: &FieldTaxonomy) -> WeightedGraph {
    let mut g = graph_from_proximity(agg, None);
    for node in &mut g.nodes {
        if let Some(inter) = node
            .id
            .parse()
            .ok()
            .and_then(|id| taxonomy.intermediate(id))
        {
            node.label = inter.acronym.clone();
            node.group = inter.macro_id;
        }
    }
    g
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = x;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Maximum spanning forest (Kruskal, ties by node pair) of the undirected view.
pub fn maximum_spanning_forest(g: &WeightedGraph) -> WeightedGraph {
    let g = g.to_undirected();
    let mut order: Vec<Edge> = g.edges.clone();
    order.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then((a.u.min(a.v), a.u.max(a.v)).cmp(&(b.u.min(b.v), b.u.max(b.v))))
    });
    let mut uf = UnionFind::new(g.n_nodes());
    let edges = order.into_iter().filter(|e| uf.union(e.u, e.v)).collect();
    g.with_edges(edges)
}

/// Maximum spanning forest plus every edge with weight above `p`.
pub fn mst_plus_threshold(g: &WeightedGraph, p: f64) -> WeightedGraph {
    let und = g.to_undirected();
    let mst = maximum_spanning_forest(&und);
    let key = |e: &Edge| (e.u.min(e.v), e.u.max(e.v));
    let in_mst: BTreeSet<(usize, usize)> = mst.edges.iter().map(key).collect();
    let edges = und
        .edges
        .iter()
        .filter(|e| in_mst.contains(&key(e)) || e.weight > p)
        .copied()
        .collect();
    und.with_edges(edges)
}

/// Disparity significance of an edge seen from an endpoint with the given
/// strength and degree: `(1 - w/s)^(k - 1)`, or 1 for degree-1 endpoints.
pub fn disparity_pvalue(weight: f64, strength: f64, degree: usize) -> f64 {
    if degree <= 1 {
        return 1.0;
    }
    (1.0 - weight / strength).max(0.0).powi(degree as i32 - 1)
}

/// Per-edge `(p from u, p from v)`, aligned with `g.edges`.
pub fn disparity_pvalues(g: &WeightedGraph) -> Result<Vec<(f64, f64)>> {
    if g.directed {
        return Err(Error::UnsupportedModel {
            model: ModelTag::Frequentist.to_string(),
            msg: "the disparity filter needs an undirected graph".into(),
        });
    }
    let sd = g.strengths();
    Ok(g.edges
        .iter()
        .map(|e| {
            (
                disparity_pvalue(e.weight, sd[e.u].0, sd[e.u].1),
                disparity_pvalue(e.weight, sd[e.v].0, sd[e.v].1),
            )
        })
        .collect())
}

/// Keeps edges significant at level `alpha` from at least one endpoint.
pub fn disparity_filter(g: &WeightedGraph, alpha: f64) -> Result<WeightedGraph> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    let pvals = disparity_pvalues(g)?;
    let edges = g
        .edges
        .iter()
        .zip(&pvals)
        .filter(|(_, (pu, pv))| pu.min(*pv) < alpha)
        .map(|(e, _)| *e)
        .collect();
    Ok(g.with_edges(edges))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Community of each node, numbered by first appearance.
    pub assignment: Vec<usize>,
    pub modularity: f64,
}

impl Partition {
    pub fn n_communities(&self) -> usize {
        self.assignment.iter().copied().max().map_or(0, |m| m + 1)
    }

    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_communities()];
        for (node, &c) in self.assignment.iter().enumerate() {
            out[c].push(node);
        }
        out
    }
}

/// Renumbers community labels by order of first appearance.
fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Weighted modularity `sum_c (L_c / m - (d_c / 2m)^2)`; 0 for graphs
/// without edges.
pub fn modularity(g: &WeightedGraph, assignment: &[usize]) -> f64 {
    let m: f64 = g.edges.iter().map(|e| e.weight).sum();
    if m <= 0.0 {
        return 0.0;
    }
    let k = assignment.iter().copied().max().map_or(0, |x| x + 1);
    let mut internal = vec![0.0; k];
    let mut degree = vec![0.0; k];
    for e in &g.edges {
        let (cu, cv) = (assignment[e.u], assignment[e.v]);
        if cu == cv {
            internal[cu] += e.weight;
        }
        degree[cu] += e.weight;
        degree[cv] += e.weight;
    }
    internal
        .iter()
        .zip(&degree)
        .map(|(l, d)| l / m - (d / (2.0 * m)).powi(2))
        .sum()
}

/// Clauset-Newman-Moore agglomerative modularity maximization.
///
/// Starts from singletons and merges the connected pair with the largest
/// gain `2 (e_ij - a_i a_j)` until no merge has a positive gain; equal gains
/// go to the lexicographically smallest community pair.
pub fn greedy_communities(g: &WeightedGraph) -> Result<Partition> {
    if g.n_nodes() == 0 {
        return Err(Error::Empty("graph has no nodes".into()));
    }
    let g = g.to_undirected();
    let n = g.n_nodes();
    let two_m: f64 = 2.0 * g.edges.iter().map(|e| e.weight).sum::<f64>();
    let mut label: Vec<usize> = (0..n).collect();
    if two_m <= 0.0 {
        return Ok(Partition {
            assignment: label,
            modularity: 0.0,
        });
    }

    let mut e: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    let mut a = vec![0.0; n];
    for edge in &g.edges {
        let w = edge.weight / two_m;
        *e[edge.u].entry(edge.v).or_insert(0.0) += w;
        *e[edge.v].entry(edge.u).or_insert(0.0) += w;
        a[edge.u] += w;
        a[edge.v] += w;
    }
    let mut alive = vec![true; n];

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in (0..n).filter(|&i| alive[i]) {
            for (&j, &eij) in e[i].range(i + 1..) {
                let dq = 2.0 * (eij - a[i] * a[j]);
                if best.is_none_or(|(b, _, _)| dq > b) {
                    best = Some((dq, i, j));
                }
            }
        }
        let Some((dq, i, j)) = best else { break };
        if dq <= 0.0 {
            break;
        }
        // merge j into i
        let ej = std::mem::take(&mut e[j]);
        for (k, w) in ej {
            if k == i {
                continue;
            }
            *e[i].entry(k).or_insert(0.0) += w;
            let ek = &mut e[k];
            ek.remove(&j);
            *ek.entry(i).or_insert(0.0) += w;
        }
        e[i].remove(&j);
        a[i] += a[j];
        a[j] = 0.0;
        alive[j] = false;
        for l in label.iter_mut() {
            if *l == j {
                *l = i;
            }
        }
    }

    let assignment = canonical(&label);
    let q = modularity(&g, &assignment);
    Ok(Partition {
        assignment,
        modularity: q,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeLabel {
    Intra,
    Inter,
}

impl EdgeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeLabel::Intra => "intra",
            EdgeLabel::Inter => "inter",
        }
    }
}

pub fn classify_edges(g: &WeightedGraph, partition: &Partition) -> Result<Vec<EdgeLabel>> {
    if partition.assignment.len() != g.n_nodes() {
        return Err(Error::config(format!(
            "partition covers {} nodes, graph has {}",
            partition.assignment.len(),
            g.n_nodes()
        )));
    }
    Ok(g.edges
        .iter()
        .map(|e| {
            if partition.assignment[e.u] == partition.assignment[e.v] {
                EdgeLabel::Intra
            } else {
                EdgeLabel::Inter
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// exports

const PALETTE: [&str; 8] = [
    "#1f77b4", "#2ca02c", "#d62728", "#e6b800", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Color of a macro-area group, stable by the group's rank among all groups.
fn group_colors(g: &WeightedGraph) -> BTreeMap<u32, &'static str> {
    let groups: BTreeSet<u32> = g.nodes.iter().map(|n| n.group).collect();
    groups
        .into_iter()
        .enumerate()
        .map(|(i, grp)| (grp, PALETTE[i % PALETTE.len()]))
        .collect()
}

fn label_of(labels: Option<&[EdgeLabel]>, i: usize) -> &'static str {
    labels.map_or("-", |l| l[i].as_str())
}

/// `u v w label`, one edge per line, node ids as in the graph.
pub fn to_edgelist(g: &WeightedGraph, labels: Option<&[EdgeLabel]>) -> String {
    let mut out = String::from("# u\tv\tw\tlabel\n");
    for (i, e) in g.edges.iter().enumerate() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            g.nodes[e.u].id,
            g.nodes[e.v].id,
            e.weight,
            label_of(labels, i)
        );
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn to_graphml(
    g: &WeightedGraph,
    labels: Option<&[EdgeLabel]>,
    partition: Option<&Partition>,
) -> String {
    let colors = group_colors(g);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    out.push_str("  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n");
    out.push_str("  <key id=\"group\" for=\"node\" attr.name=\"group\" attr.type=\"int\"/>\n");
    out.push_str("  <key id=\"color\" for=\"node\" attr.name=\"color\" attr.type=\"string\"/>\n");
    out.push_str(
        "  <key id=\"community\" for=\"node\" attr.name=\"community\" attr.type=\"int\"/>\n",
    );
    out.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n");
    out.push_str("  <key id=\"kind\" for=\"edge\" attr.name=\"kind\" attr.type=\"string\"/>\n");
    let _ = writeln!(
        out,
        "  <graph id=\"G\" edgedefault=\"{}\">",
        if g.directed { "directed" } else { "undirected" }
    );
    for (i, n) in g.nodes.iter().enumerate() {
        let _ = write!(
            out,
            "    <node id=\"{}\"><data key=\"label\">{}</data><data key=\"group\">{}</data><data key=\"color\">{}</data>",
            xml_escape(&n.id),
            xml_escape(&n.label),
            n.group,
            colors[&n.group]
        );
        if let Some(p) = partition {
            let _ = write!(out, "<data key=\"community\">{}</data>", p.assignment[i]);
        }
        out.push_str("</node>\n");
    }
    for (i, e) in g.edges.iter().enumerate() {
        let _ = write!(
            out,
            "    <edge source=\"{}\" target=\"{}\"><data key=\"weight\">{}</data>",
            xml_escape(&g.nodes[e.u].id),
            xml_escape(&g.nodes[e.v].id),
            e.weight
        );
        if let Some(l) = labels {
            let _ = write!(out, "<data key=\"kind\">{}</data>", l[i].as_str());
        }
        out.push_str("</edge>\n");
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

/// Graphviz input: nodes filled by macro-area color, inter-community edges
/// red and intra-community edges black.
pub fn to_dot(g: &WeightedGraph, labels: Option<&[EdgeLabel]>) -> String {
    let colors = group_colors(g);
    let (kw, arrow) = if g.directed {
        ("digraph", "->")
    } else {
        ("graph", "--")
    };
    let mut out = format!("{kw} research_space {{\n  node [style=filled];\n");
    for n in &g.nodes {
        let _ = writeln!(
            out,
            "  \"{}\" [label=\"{}\", fillcolor=\"{}\"];",
            n.id.replace('"', "\\\""),
            n.label.replace('"', "\\\""),
            colors[&n.group]
        );
    }
    for (i, e) in g.edges.iter().enumerate() {
        let color = match labels.map(|l| l[i]) {
            Some(EdgeLabel::Inter) => "red",
            _ => "black",
        };
        let _ = writeln!(
            out,
            "  \"{}\" {arrow} \"{}\" [weight={}, color={color}];",
            g.nodes[e.u].id.replace('"', "\\\""),
            g.nodes[e.v].id.replace('"', "\\\""),
            e.weight
        );
    }
    out.push_str("}\n");
    out
}
