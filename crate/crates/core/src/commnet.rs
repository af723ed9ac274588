//! User communication network: construction, k-cores, homophily and export.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use quick_xml::events::Event;
use quick_xml::Reader;

use crate::corpus::TweetRecord;
use crate::error::{Error, Result};
use crate::polarity::{ternarize, PolarityScore, Scale, TernaryLabel};
use crate::scalar::{fmt9, Scalar};
use crate::tsv;

/// Interaction counts on an undirected pair `(a, b)` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EdgeCounts {
    pub a_to_b: u64,
    pub b_to_a: u64,
}

impl EdgeCounts {
    pub fn total(&self) -> u64 {
        self.a_to_b + self.b_to_a
    }
}

/// Polarity attached to a user for one dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodePolarity<T> {
    pub value: Option<T>,
    pub n_items: usize,
    pub label: TernaryLabel,
}

impl<T> NodePolarity<T> {
    pub fn unclassified() -> Self {
        NodePolarity {
            value: None,
            n_items: 0,
            label: TernaryLabel::Unclassified,
        }
    }
}

/// User scores of one dimension, as fed to [`build_comm_graph`].
#[derive(Debug, Clone)]
pub struct DimensionScores<T> {
    pub dimension: String,
    pub scale: Scale<T>,
    pub scores: BTreeMap<String, PolarityScore<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph<T> {
    /// Sorted user ids.
    nodes: Vec<String>,
    dimensions: Vec<String>,
    /// `attributes[node][dim]`, aligned with `dimensions`.
    attributes: Vec<Vec<NodePolarity<T>>>,
    edges: BTreeMap<(usize, usize), EdgeCounts>,
}

impl<T: Scalar> CommGraph<T> {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn dimensions(&self) -> &[String] {
        &self.dimensions
    }

    pub fn index_of(&self, user: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(user)).ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, EdgeCounts)> + '_ {
        self.edges.iter().map(|(&(a, b), &c)| (a, b, c))
    }

    /// Total interaction count between two users.
    pub fn count(&self, a: &str, b: &str) -> Option<u64> {
        let (ia, ib) = (self.index_of(a)?, self.index_of(b)?);
        self.edges.get(&(ia.min(ib), ia.max(ib))).map(EdgeCounts::total)
    }

    pub fn attribute(&self, node: usize, dimension: &str) -> Option<&NodePolarity<T>> {
        let d = self.dimensions.iter().position(|x| x == dimension)?;
        Some(&self.attributes[node][d])
    }

    /// Distinct-neighbor degree of every node.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for &(a, b) in self.edges.keys() {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in self.edges.keys() {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Subgraph induced by the nodes with `keep[i]`, reindexed.
    pub fn induced(&self, keep: &[bool]) -> Self {
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        let mut attributes = Vec::new();
        for (i, &k) in keep.iter().enumerate() {
            if k {
                remap[i] = nodes.len();
                nodes.push(self.nodes[i].clone());
                attributes.push(self.attributes[i].clone());
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|(&(a, b), _)| keep[a] && keep[b])
            .map(|(&(a, b), &c)| ((remap[a], remap[b]), c))
            .collect();
        CommGraph {
            nodes,
            dimensions: self.dimensions.clone(),
            attributes,
            edges,
        }
    }

    /// Builds a graph from explicit parts; edges are `(a, b, a_to_b, b_to_a)`.
    pub fn from_parts(
        dimensions: Vec<String>,
        nodes: Vec<(String, Vec<NodePolarity<T>>)>,
        edges: impl IntoIterator<Item = (String, String, u64, u64)>,
    ) -> Result<Self> {
        let mut nodes = nodes;
        nodes.sort_by(|a, b| a.0.cmp(&b.0));
        if nodes.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("duplicate user node".into()));
        }
        if nodes.iter().any(|(_, attrs)| attrs.len() != dimensions.len()) {
            return Err(Error::InvalidArgument("node attributes do not match dimensions".into()));
        }
        let (names, attributes): (Vec<String>, Vec<Vec<NodePolarity<T>>>) = nodes.into_iter().unzip();
        let mut graph = CommGraph {
            nodes: names,
            dimensions,
            attributes,
            edges: BTreeMap::new(),
        };
        for (a, b, ab, ba) in edges {
            let ia = graph
                .index_of(&a)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown user {a:?}")))?;
            let ib = graph
                .index_of(&b)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown user {b:?}")))?;
            if ia == ib {
                return Err(Error::InvalidArgument(format!("self-loop on {a:?}")));
            }
            let (lo, hi, fwd, back) = if ia < ib { (ia, ib, ab, ba) } else { (ib, ia, ba, ab) };
            if fwd + back == 0 {
                return Err(Error::InvalidArgument(format!("zero count on ({a:?}, {b:?})")));
            }
            let e = graph.edges.entry((lo, hi)).or_default();
            e.a_to_b += fwd;
            e.b_to_a += back;
        }
        Ok(graph)
    }
}

/// Every interaction target of a record: retweeted user, each mention,
/// replied-to user.
pub fn interaction_targets(record: &TweetRecord) -> impl Iterator<Item = &str> {
    record
        .retweet_of_user
        .iter()
        .chain(record.mentions.iter())
        .chain(record.reply_to_user.iter())
        .map(String::as_str)
}

/// Each retweet, mention or reply adds one to its user pair. Nodes are all
/// authors and targets; users without a score are kept as unclassified.
pub fn build_comm_graph<T: Scalar>(records: &[TweetRecord], user_scores: &[DimensionScores<T>]) -> CommGraph<T> {
    let mut users: BTreeSet<&str> = BTreeSet::new();
    for r in records {
        users.insert(&r.user_id);
        users.extend(interaction_targets(r));
    }
    users.remove("");
    let nodes: Vec<String> = users.iter().map(|u| u.to_string()).collect();
    let dimensions: Vec<String> = user_scores.iter().map(|d| d.dimension.clone()).collect();
    let attributes = nodes
        .iter()
        .map(|u| {
            user_scores
                .iter()
                .map(|d| match d.scores.get(u) {
                    Some(s) => NodePolarity {
                        value: s.value,
                        n_items: s.n_items,
                        label: ternarize(s, &d.scale),
                    },
                    None => NodePolarity::unclassified(),
                })
                .collect()
        })
        .collect();
    let mut graph = CommGraph {
        nodes,
        dimensions,
        attributes,
        edges: BTreeMap::new(),
    };
    for r in records {
        let src = graph.index_of(&r.user_id).expect("author is a node");
        for target in interaction_targets(r) {
            let Some(dst) = graph.index_of(target) else { continue };
            if dst == src {
                continue;
            }
            let e = graph.edges.entry((src.min(dst), src.max(dst))).or_default();
            if src < dst {
                e.a_to_b += 1;
            } else {
                e.b_to_a += 1;
            }
        }
    }
    graph
}

/// Maximal subgraph whose nodes all have at least `k` distinct neighbors,
/// found by queue-driven peeling.
pub fn k_core<T: Scalar>(graph: &CommGraph<T>, k: usize) -> CommGraph<T> {
    let adj = graph.adjacency();
    let mut degree = graph.degrees();
    let mut alive = vec![true; graph.node_count()];
    let mut queue: VecDeque<usize> = (0..graph.node_count()).filter(|&v| degree[v] < k).collect();
    for &v in &queue {
        alive[v] = false;
    }
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if alive[u] {
                degree[u] -= 1;
                if degree[u] < k {
                    alive[u] = false;
                    queue.push_back(u);
                }
            }
        }
    }
    graph.induced(&alive)
}

/// `(same − cross) / (same + cross)` over edges whose endpoints both carry
/// a label other than unclassified for `dimension`.
pub fn homophily_index<T: Scalar>(graph: &CommGraph<T>, dimension: &str) -> Result<T> {
    let d = graph
        .dimensions
        .iter()
        .position(|x| x == dimension)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown dimension {dimension:?}")))?;
    let (mut same, mut cross) = (0usize, 0usize);
    for &(a, b) in graph.edges.keys() {
        let (la, lb) = (graph.attributes[a][d].label, graph.attributes[b][d].label);
        if la == TernaryLabel::Unclassified || lb == TernaryLabel::Unclassified {
            continue;
        }
        if la == lb {
            same += 1;
        } else {
            cross += 1;
        }
    }
    if same + cross == 0 {
        return Err(Error::NoClassifiedEdges);
    }
    Ok((T::from_count(same) - T::from_count(cross)) / T::from_count(same + cross))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    GraphMl,
    Dot,
    EdgeCsv,
}

impl ExportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ExportFormat::GraphMl => "graphml",
            ExportFormat::Dot => "dot",
            ExportFormat::EdgeCsv => "csv",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graphml" => Ok(ExportFormat::GraphMl),
            "dot" => Ok(ExportFormat::Dot),
            "edge_csv" | "csv" => Ok(ExportFormat::EdgeCsv),
            other => Err(Error::InvalidArgument(format!("unknown export format {other:?}"))),
        }
    }
}

pub fn export_graph<T: Scalar>(graph: &CommGraph<T>, path: &Path, format: ExportFormat) -> Result<()> {
    let text = match format {
        ExportFormat::GraphMl => to_graphml(graph),
        ExportFormat::Dot => to_dot(graph),
        ExportFormat::EdgeCsv => to_edge_csv(graph),
    };
    tsv::write_all(path, &text)
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn to_graphml<T: Scalar>(graph: &CommGraph<T>) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    for (i, d) in graph.dimensions.iter().enumerate() {
        let d = xml_escape(d);
        let _ = writeln!(s, "  <key id=\"p{i}\" for=\"node\" attr.name=\"polarity_{d}\" attr.type=\"double\"/>");
        let _ = writeln!(s, "  <key id=\"l{i}\" for=\"node\" attr.name=\"label_{d}\" attr.type=\"string\"/>");
        let _ = writeln!(s, "  <key id=\"n{i}\" for=\"node\" attr.name=\"items_{d}\" attr.type=\"int\"/>");
    }
    s.push_str("  <key id=\"count\" for=\"edge\" attr.name=\"count\" attr.type=\"int\"/>\n");
    s.push_str("  <key id=\"a_to_b\" for=\"edge\" attr.name=\"a_to_b\" attr.type=\"int\"/>\n");
    s.push_str("  <key id=\"b_to_a\" for=\"edge\" attr.name=\"b_to_a\" attr.type=\"int\"/>\n");
    s.push_str("  <graph id=\"communication\" edgedefault=\"undirected\">\n");
    for (node, attrs) in graph.nodes.iter().zip(&graph.attributes) {
        let _ = writeln!(s, "    <node id=\"{}\">", xml_escape(node));
        for (i, a) in attrs.iter().enumerate() {
            if let Some(v) = a.value {
                let _ = writeln!(s, "      <data key=\"p{i}\">{}</data>", fmt9(v));
            }
            let _ = writeln!(s, "      <data key=\"l{i}\">{}</data>", a.label);
            let _ = writeln!(s, "      <data key=\"n{i}\">{}</data>", a.n_items);
        }
        s.push_str("    </node>\n");
    }
    for (&(a, b), c) in &graph.edges {
        let _ = writeln!(
            s,
            "    <edge source=\"{}\" target=\"{}\">",
            xml_escape(&graph.nodes[a]),
            xml_escape(&graph.nodes[b])
        );
        let _ = writeln!(s, "      <data key=\"count\">{}</data>", c.total());
        let _ = writeln!(s, "      <data key=\"a_to_b\">{}</data>", c.a_to_b);
        let _ = writeln!(s, "      <data key=\"b_to_a\">{}</data>", c.b_to_a);
        s.push_str("    </edge>\n");
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn fill_color(label: TernaryLabel) -> &'static str {
    match label {
        TernaryLabel::PoleA => "#1f77b4",
        TernaryLabel::PoleB => "#d62728",
        TernaryLabel::Neutral => "#bbbbbb",
        TernaryLabel::Unclassified => "#ffffff",
    }
}

/// Nodes are filled by the first dimension's label; every dimension's
/// value and label are also emitted as attributes.
pub fn to_dot<T: Scalar>(graph: &CommGraph<T>) -> String {
    let mut s = String::from("graph communication {\n  node [style=filled];\n");
    for (node, attrs) in graph.nodes.iter().zip(&graph.attributes) {
        let mut fields = Vec::new();
        if let Some(first) = attrs.first() {
            fields.push(format!("fillcolor={}", dot_quote(fill_color(first.label))));
        }
        for (d, a) in graph.dimensions.iter().zip(attrs) {
            if let Some(v) = a.value {
                fields.push(format!("{}={}", dot_quote(&format!("polarity_{d}")), dot_quote(&fmt9(v))));
            }
            fields.push(format!("{}={}", dot_quote(&format!("label_{d}")), dot_quote(a.label.as_str())));
        }
        let _ = writeln!(s, "  {} [{}];", dot_quote(node), fields.join(", "));
    }
    for (&(a, b), c) in &graph.edges {
        let _ = writeln!(
            s,
            "  {} -- {} [weight={}];",
            dot_quote(&graph.nodes[a]),
            dot_quote(&graph.nodes[b]),
            c.total()
        );
    }
    s.push_str("}\n");
    s
}

/// `user_a,user_b,count,a_to_b,b_to_a`.
pub fn to_edge_csv<T: Scalar>(graph: &CommGraph<T>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["user_a", "user_b", "count", "a_to_b", "b_to_a"]).expect("in-memory write");
    for (&(a, b), c) in &graph.edges {
        w.write_record([
            graph.nodes[a].as_str(),
            graph.nodes[b].as_str(),
            &c.total().to_string(),
            &c.a_to_b.to_string(),
            &c.b_to_a.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Edges of an edge CSV as `(user_a, user_b, a_to_b, b_to_a)`.
pub fn read_edge_csv(path: &Path) -> Result<Vec<(String, String, u64, u64)>> {
    let name = tsv::source_name(path);
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(&name, line, e.to_string()))?;
        if rec.len() != 5 {
            return Err(Error::parse(&name, line, "expected 5 columns"));
        }
        let num = |j: usize| {
            rec[j]
                .parse::<u64>()
                .map_err(|_| Error::parse(&name, line, format!("bad count {:?}", &rec[j])))
        };
        let (count, ab, ba) = (num(2)?, num(3)?, num(4)?);
        if count != ab + ba {
            return Err(Error::parse(&name, line, "count differs from a_to_b + b_to_a"));
        }
        out.push((rec[0].to_string(), rec[1].to_string(), ab, ba));
    }
    Ok(out)
}

/// Reads a GraphML file in the layout produced by [`to_graphml`].
pub fn read_graphml<T: Scalar>(path: &Path) -> Result<CommGraph<T>> {
    let name = tsv::source_name(path);
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = Reader::from_str(&text);
    reader.config_mut().trim_text(true);
    let bad = |reader: &Reader<&[u8]>, msg: String| {
        let pos = reader.buffer_position() as usize;
        let line = text[..pos.min(text.len())].matches('\n').count() + 1;
        Error::parse(&name, line, msg)
    };

    // key id -> attribute name
    let mut keys: BTreeMap<String, String> = BTreeMap::new();
    let mut dimensions: Vec<String> = Vec::new();
    let mut nodes: Vec<(String, BTreeMap<String, String>)> = Vec::new();
    let mut edges: Vec<(String, String, BTreeMap<String, String>)> = Vec::new();
    let mut current_key: Option<String> = None;
    let mut in_edge = false;

    loop {
        let event = reader.read_event().map_err(|e| bad(&reader, e.to_string()))?;
        match event {
            Event::Start(e) | Event::Empty(e) => {
                let attr = |key: &str| -> Result<Option<String>> {
                    for a in e.attributes() {
                        let a = a.map_err(|err| bad(&reader, err.to_string()))?;
                        if a.key.as_ref() == key.as_bytes() {
                            let v = a.unescape_value().map_err(|err| bad(&reader, err.to_string()))?;
                            return Ok(Some(v.into_owned()));
                        }
                    }
                    Ok(None)
                };
                match e.name().as_ref() {
                    b"key" => {
                        let (Some(id), Some(attr_name)) = (attr("id")?, attr("attr.name")?) else {
                            return Err(bad(&reader, "key without id or attr.name".into()));
                        };
                        if let Some(d) = attr_name.strip_prefix("polarity_") {
                            dimensions.push(d.to_string());
                        }
                        keys.insert(id, attr_name);
                    }
                    b"node" => {
                        let id = attr("id")?.ok_or_else(|| bad(&reader, "node without id".into()))?;
                        nodes.push((id, BTreeMap::new()));
                        in_edge = false;
                    }
                    b"edge" => {
                        let (Some(s), Some(t)) = (attr("source")?, attr("target")?) else {
                            return Err(bad(&reader, "edge without source/target".into()));
                        };
                        edges.push((s, t, BTreeMap::new()));
                        in_edge = true;
                    }
                    b"data" => {
                        let key = attr("key")?.ok_or_else(|| bad(&reader, "data without key".into()))?;
                        current_key = Some(keys.get(&key).cloned().unwrap_or(key));
                    }
                    _ => {}
                }
            }
            Event::Text(t) => {
                if let Some(k) = current_key.take() {
                    let v = t.unescape().map_err(|e| bad(&reader, e.to_string()))?.into_owned();
                    let target = if in_edge {
                        edges.last_mut().map(|e| &mut e.2)
                    } else {
                        nodes.last_mut().map(|n| &mut n.1)
                    };
                    target.ok_or_else(|| bad(&reader, "data outside node or edge".into()))?.insert(k, v);
                }
            }
            Event::End(e) if e.name().as_ref() == b"data" => current_key = None,
            Event::Eof => break,
            _ => {}
        }
    }

    let mut parsed_nodes = Vec::with_capacity(nodes.len());
    for (id, data) in nodes {
        let mut attrs = Vec::with_capacity(dimensions.len());
        for d in &dimensions {
            let value = match data.get(&format!("polarity_{d}")) {
                Some(v) => Some(T::from_f64_lossy(
                    v.parse::<f64>()
                        .map_err(|_| Error::parse(&name, 0, format!("bad polarity {v:?} on {id:?}")))?,
                )),
                None => None,
            };
            let label = match data.get(&format!("label_{d}")) {
                Some(l) => l.parse::<TernaryLabel>()?,
                None => TernaryLabel::Unclassified,
            };
            let n_items = match data.get(&format!("items_{d}")) {
                Some(n) => n
                    .parse::<usize>()
                    .map_err(|_| Error::parse(&name, 0, format!("bad items {n:?} on {id:?}")))?,
                None => 0,
            };
            attrs.push(NodePolarity { value, n_items, label });
        }
        parsed_nodes.push((id, attrs));
    }
    let mut parsed_edges = Vec::with_capacity(edges.len());
    for (s, t, data) in edges {
        let get = |k: &str| -> Result<Option<u64>> {
            data.get(k)
                .map(|v| v.parse::<u64>().map_err(|_| Error::parse(&name, 0, format!("bad {k} {v:?}"))))
                .transpose()
        };
        let (ab, ba) = match (get("a_to_b")?, get("b_to_a")?, get("count")?) {
            (Some(ab), Some(ba), _) => (ab, ba),
            (_, _, Some(c)) => (c, 0),
            _ => (1, 0),
        };
        parsed_edges.push((s, t, ab, ba));
    }
    CommGraph::from_parts(dimensions, parsed_nodes, parsed_edges)
}
