//! Weighted undirected graphs over hashtags or tokens.
//!
//! Nodes are always stored in ascending lexicographic order, so a node's
//! index doubles as its rank in the deterministic iteration order used by
//! propagation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::TokenizedTweet;
use crate::error::{Error, Result};
use crate::scalar::{fmt9, Scalar};
use crate::tsv;

/// Vocabulary the graph was built over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphMode {
    Hashtag,
    Token,
    Embedding,
}

impl fmt::Display for GraphMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphMode::Hashtag => "hashtag",
            GraphMode::Token => "token",
            GraphMode::Embedding => "embedding",
        })
    }
}

impl FromStr for GraphMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hashtag" => Ok(GraphMode::Hashtag),
            "token" => Ok(GraphMode::Token),
            "embedding" => Ok(GraphMode::Embedding),
            other => Err(Error::InvalidArgument(format!("unknown graph mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceGraph<T> {
    mode: GraphMode,
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    /// Per node, `(neighbor, weight)` sorted by neighbor index.
    adjacency: Vec<Vec<(usize, T)>>,
    node_frequency: Vec<u64>,
}

impl<T: Scalar> CooccurrenceGraph<T> {
    /// Builds a graph from named nodes and edges. Nodes are re-sorted;
    /// repeated edges between the same pair are summed.
    pub fn from_parts<I>(mode: GraphMode, nodes: Vec<(String, u64)>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String, T)>,
    {
        let mut nodes = nodes;
        nodes.sort_by(|a, b| a.0.cmp(&b.0));
        for pair in nodes.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::InvalidArgument(format!("duplicate node {:?}", pair[0].0)));
            }
        }
        let (names, freq): (Vec<String>, Vec<u64>) = nodes.into_iter().unzip();
        let index: HashMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut merged: BTreeMap<(usize, usize), T> = BTreeMap::new();
        for (a, b, w) in edges {
            let ia = *index
                .get(&a)
                .ok_or_else(|| Error::InvalidArgument(format!("edge endpoint {a:?} is not a node")))?;
            let ib = *index
                .get(&b)
                .ok_or_else(|| Error::InvalidArgument(format!("edge endpoint {b:?} is not a node")))?;
            if ia == ib {
                return Err(Error::InvalidArgument(format!("self-loop on {a:?}")));
            }
            if !(w > T::zero()) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!("non-positive weight on ({a:?}, {b:?})")));
            }
            let key = (ia.min(ib), ia.max(ib));
            let slot = merged.entry(key).or_insert_with(T::zero);
            *slot = *slot + w;
        }
        Ok(Self::from_indexed(mode, names, index, freq, merged))
    }

    fn from_indexed(
        mode: GraphMode,
        nodes: Vec<String>,
        index: HashMap<String, usize>,
        node_frequency: Vec<u64>,
        edges: BTreeMap<(usize, usize), T>,
    ) -> Self {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (&(a, b), &w) in &edges {
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(n, _)| n);
        }
        CooccurrenceGraph {
            mode,
            nodes,
            index,
            adjacency,
            node_frequency,
        }
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &str {
        &self.nodes[i]
    }

    pub fn index_of(&self, item: &str) -> Option<usize> {
        self.index.get(item).copied()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, T)] {
        &self.adjacency[i]
    }

    /// Number of distinct neighbors.
    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn frequency(&self, i: usize) -> u64 {
        self.node_frequency[i]
    }

    pub fn weight(&self, a: &str, b: &str) -> Option<T> {
        let (ia, ib) = (self.index_of(a)?, self.index_of(b)?);
        self.adjacency[ia]
            .binary_search_by_key(&ib, |&(n, _)| n)
            .ok()
            .map(|pos| self.adjacency[ia][pos].1)
    }

    /// Edges as `(a, b, weight)` with `a < b`, in index order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().filter(move |&&(b, _)| b > a).map(move |&(b, w)| (a, b, w)))
    }

    /// Connected components as sorted node-index lists, ordered by first member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.node_count()];
        let mut out = Vec::new();
        for start in 0..self.node_count() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &(u, _) in &self.adjacency[v] {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Writes `a\tb\tweight` rows to `edges_path` and `node\tfrequency`
    /// rows (with a mode header) to `nodes_path`.
    pub fn write_tsv(&self, edges_path: &Path, nodes_path: &Path) -> Result<()> {
        let mut w = tsv::create(nodes_path)?;
        let res: std::io::Result<()> = (|| {
            writeln!(w, "# mode: {}", self.mode)?;
            for (name, freq) in self.nodes.iter().zip(&self.node_frequency) {
                writeln!(w, "{name}\t{freq}")?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(nodes_path, e))?;

        let mut w = tsv::create(edges_path)?;
        let res: std::io::Result<()> = (|| {
            for (a, b, wt) in self.edges() {
                writeln!(w, "{}\t{}\t{}", self.nodes[a], self.nodes[b], fmt9(wt))?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(edges_path, e))
    }

    pub fn read_tsv(edges_path: &Path, nodes_path: &Path) -> Result<Self> {
        let name = tsv::source_name(nodes_path);
        let mut mode = None;
        let mut nodes = Vec::new();
        for (line_no, line) in tsv::open_lines(nodes_path)? {
            let line = line.map_err(|e| Error::io(nodes_path, e))?;
            if let Some(rest) = line.strip_prefix("# mode:") {
                mode = Some(rest.trim().parse::<GraphMode>().map_err(|e| Error::parse(&name, line_no, e.to_string()))?);
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(node), Some(freq), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::parse(&name, line_no, "expected node<TAB>frequency"));
            };
            let freq = freq
                .parse::<u64>()
                .map_err(|e| Error::parse(&name, line_no, format!("bad frequency: {e}")))?;
            nodes.push((node.to_string(), freq));
        }
        let mode = mode.ok_or_else(|| Error::parse(&name, 1, "missing '# mode:' header"))?;

        let name = tsv::source_name(edges_path);
        let mut edges = Vec::new();
        for (line_no, line) in tsv::open_lines(edges_path)? {
            let line = line.map_err(|e| Error::io(edges_path, e))?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(a), Some(b), Some(w), None) = (fields.next(), fields.next(), fields.next(), fields.next()) else {
                return Err(Error::parse(&name, line_no, "expected nodeA<TAB>nodeB<TAB>weight"));
            };
            let w: f64 = w
                .parse()
                .map_err(|e| Error::parse(&name, line_no, format!("bad weight: {e}")))?;
            edges.push((a.to_string(), b.to_string(), T::from_f64_lossy(w)));
        }
        Self::from_parts(mode, nodes, edges)
    }
}

/// Tweet-level co-occurrence graph.
///
/// Each tweet contributes its deduplicated item set: every unordered pair
/// of distinct items gains weight 1. Token mode first keeps only the
/// `vocab_cap` items present in the most tweets (ties broken
/// lexicographically); hashtag mode ignores the cap.
pub fn build_cooccurrence<T: Scalar>(
    corpus: &[TokenizedTweet],
    mode: GraphMode,
    vocab_cap: usize,
) -> Result<CooccurrenceGraph<T>> {
    let items_of = |t: &TokenizedTweet| -> Vec<String> {
        let src = match mode {
            GraphMode::Hashtag => &t.hashtags,
            _ => &t.tokens,
        };
        let mut v = src.clone();
        v.sort_unstable();
        v.dedup();
        v
    };
    if mode == GraphMode::Embedding {
        return Err(Error::InvalidArgument(
            "co-occurrence graphs are built in hashtag or token mode".into(),
        ));
    }
    let per_tweet: Vec<Vec<String>> = corpus.par_iter().map(items_of).collect();

    let mut frequency: HashMap<&str, u64> = HashMap::new();
    for items in &per_tweet {
        for it in items {
            *frequency.entry(it.as_str()).or_default() += 1;
        }
    }
    let mut vocab: Vec<(&str, u64)> = frequency.into_iter().collect();
    if mode == GraphMode::Token && vocab.len() > vocab_cap {
        vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        vocab.truncate(vocab_cap);
    }
    vocab.sort_by(|a, b| a.0.cmp(b.0));

    let names: Vec<String> = vocab.iter().map(|(n, _)| n.to_string()).collect();
    let freq: Vec<u64> = vocab.iter().map(|&(_, f)| f).collect();
    let index: HashMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();

    // per-shard pair counts, merged; integer counts keep the merge order-free
    let counts: HashMap<(u32, u32), u64> = per_tweet
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<(u32, u32), u64>, items| {
            let ids: Vec<u32> = items.iter().filter_map(|it| index.get(it).map(|&i| i as u32)).collect();
            // items were sorted, and index order is lexicographic, so ids ascend
            for (x, &a) in ids.iter().enumerate() {
                for &b in &ids[x + 1..] {
                    *acc.entry((a, b)).or_default() += 1;
                }
            }
            acc
        })
        .reduce(HashMap::new, |a, b| if a.len() >= b.len() { merge(a, b) } else { merge(b, a) });

    let edges: BTreeMap<(usize, usize), T> = counts
        .into_iter()
        .map(|((a, b), c)| ((a as usize, b as usize), T::from_u64(c).expect("count fits scalar")))
        .collect();
    Ok(CooccurrenceGraph::from_indexed(mode, names, index, freq, edges))
}

fn merge(mut big: HashMap<(u32, u32), u64>, small: HashMap<(u32, u32), u64>) -> HashMap<(u32, u32), u64> {
    for (k, v) in small {
        *big.entry(k).or_default() += v;
    }
    big
}

/// Word vectors read from a whitespace-separated text file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    vocabulary: Vec<String>,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(vocabulary: Vec<String>, vectors: Vec<Vec<T>>) -> Result<Self> {
        if vocabulary.len() != vectors.len() {
            return Err(Error::InvalidArgument("vocabulary and vector counts differ".into()));
        }
        let dim = vectors.first().map_or(0, Vec::len);
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidArgument("vectors differ in dimension".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = vocabulary.iter().find(|t| !seen.insert(t.as_str())) {
            return Err(Error::InvalidArgument(format!("duplicate token {dup:?}")));
        }
        Ok(EmbeddingTable {
            vocabulary,
            dim,
            data: vectors.into_iter().flatten().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn vector(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Reads `token v1 .. vD` lines, keeping the first `vocab_cap` entries.
/// The first line fixes `D`.
pub fn load_embeddings<T: Scalar>(path: &Path, vocab_cap: usize) -> Result<EmbeddingTable<T>> {
    let name = tsv::source_name(path);
    let mut vocabulary = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    let mut seen = HashSet::new();
    for (line_no, line) in tsv::open_lines(path)? {
        if vocabulary.len() >= vocab_cap {
            break;
        }
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().expect("non-empty line has a field");
        let mut values = Vec::new();
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(&name, line_no, format!("non-numeric value {f:?}")))?;
            values.push(T::from_f64_lossy(v));
        }
        let d = *dim.get_or_insert(values.len());
        if d == 0 {
            return Err(Error::parse(&name, line_no, "no vector components"));
        }
        if values.len() != d {
            return Err(Error::parse(
                &name,
                line_no,
                format!("expected {d} components, found {}", values.len()),
            ));
        }
        if !seen.insert(token.to_string()) {
            return Err(Error::parse(&name, line_no, format!("duplicate token {token:?}")));
        }
        vocabulary.push(token.to_string());
        data.extend(values);
    }
    Ok(EmbeddingTable {
        vocabulary,
        dim: dim.unwrap_or(0),
        data,
    })
}

/// Edge weights never fall below this.
pub const MIN_ANGULAR_WEIGHT: f64 = 1e-6;

/// `1 - angle/π` between two vectors; the angle uses the difference/sum
/// form, which is exact for identical directions.
pub fn angular_similarity<T: Scalar>(a: &[T], b: &[T]) -> T {
    let norm = |v: &[T]| v.iter().map(|&x| x * x).sum::<T>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    let mut diff = T::zero();
    let mut sum = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let (ux, uy) = (x / na, y / nb);
        diff = diff + (ux - uy) * (ux - uy);
        sum = sum + (ux + uy) * (ux + uy);
    }
    let two = T::one() + T::one();
    let angle = two * diff.sqrt().atan2(sum.sqrt());
    let pi = T::from_f64_lossy(std::f64::consts::PI);
    let w = T::one() - angle / pi;
    w.max(T::from_f64_lossy(MIN_ANGULAR_WEIGHT)).min(T::one())
}

#[derive(Debug, Clone)]
pub struct KnnGraph<T> {
    pub graph: CooccurrenceGraph<T>,
    /// Tokens dropped because their vector had zero length.
    pub dropped_zero_vectors: usize,
}

/// Symmetrized k-nearest-neighbor graph under angular similarity.
///
/// Each node links to its `k` most similar nodes (ties go to the
/// lexicographically smaller token); the union of these directed relations
/// is kept with the larger of the two weights.
pub fn build_knn_graph<T: Scalar>(table: &EmbeddingTable<T>, k: usize) -> Result<KnnGraph<T>> {
    let mut kept: Vec<usize> = (0..table.len())
        .filter(|&i| table.vector(i).iter().any(|x| !x.is_zero()))
        .collect();
    let dropped = table.len() - kept.len();
    if k == 0 || k >= kept.len() {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 0 < k < {} (usable vocabulary), got {k}",
            kept.len()
        )));
    }
    kept.sort_by(|&a, &b| table.vocabulary[a].cmp(&table.vocabulary[b]));
    let names: Vec<String> = kept.iter().map(|&i| table.vocabulary[i].clone()).collect();
    let index: HashMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();

    let directed: Vec<Vec<(usize, T)>> = (0..kept.len())
        .into_par_iter()
        .map(|i| {
            let vi = table.vector(kept[i]);
            let mut sims: Vec<(usize, T)> = (0..kept.len())
                .filter(|&j| j != i)
                .map(|j| (j, angular_similarity(vi, table.vector(kept[j]))))
                .collect();
            sims.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite similarity").then(a.0.cmp(&b.0)));
            sims.truncate(k);
            sims
        })
        .collect();

    let mut edges: BTreeMap<(usize, usize), T> = BTreeMap::new();
    for (i, list) in directed.into_iter().enumerate() {
        for (j, w) in list {
            let slot = edges.entry((i.min(j), i.max(j))).or_insert(w);
            *slot = slot.max(w);
        }
    }
    let freq = vec![0; names.len()];
    Ok(KnnGraph {
        graph: CooccurrenceGraph::from_indexed(GraphMode::Embedding, names, index, freq, edges),
        dropped_zero_vectors: dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tweet(id: &str, hashtags: &[&str], tokens: &[&str]) -> TokenizedTweet {
        TokenizedTweet {
            tweet_id: id.into(),
            hashtags: hashtags.iter().map(|s| s.to_string()).collect(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn repeated_pair_accumulates() {
        let corpus = vec![tweet("1", &["a", "b"], &["a", "b"]), tweet("2", &["b", "a"], &["a", "b"])];
        let g: CooccurrenceGraph<f64> = build_cooccurrence(&corpus, GraphMode::Hashtag, 10).unwrap();
        assert_eq!(g.weight("a", "b"), Some(2.0));
        assert_eq!(g.weight("b", "a"), Some(2.0));
        assert_eq!(g.frequency(g.index_of("a").unwrap()), 2);
    }

    #[test]
    fn triple_enumerates_all_pairs() {
        let corpus = vec![tweet("1", &["a", "b", "c"], &[])];
        let g: CooccurrenceGraph<f64> = build_cooccurrence(&corpus, GraphMode::Hashtag, 10).unwrap();
        assert_eq!(g.edge_count(), 3);
        for (x, y) in [("a", "b"), ("a", "c"), ("b", "c")] {
            assert_eq!(g.weight(x, y), Some(1.0));
        }
    }

    #[test]
    fn singleton_and_empty_tweets() {
        let corpus = vec![tweet("1", &["solo"], &[]), tweet("2", &[], &[])];
        let g: CooccurrenceGraph<f64> = build_cooccurrence(&corpus, GraphMode::Hashtag, 10).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
        let g: CooccurrenceGraph<f64> = build_cooccurrence(&[], GraphMode::Hashtag, 10).unwrap();
        assert_eq!(g.node_count(), 0);
    }

    #[test]
    fn token_mode_dedups_and_caps() {
        let corpus = vec![
            tweet("1", &[], &["x", "x", "y", "z"]),
            tweet("2", &[], &["x", "y"]),
            tweet("3", &[], &["w", "x"]),
        ];
        // frequencies x:3 y:2 w:1 z:1 -> cap 3 keeps x, y, w (w < z)
        let g: CooccurrenceGraph<f64> = build_cooccurrence(&corpus, GraphMode::Token, 3).unwrap();
        assert_eq!(g.nodes(), ["w", "x", "y"]);
        assert_eq!(g.weight("x", "y"), Some(2.0));
        assert_eq!(g.weight("w", "x"), Some(1.0));
        assert_eq!(g.weight("w", "y"), None);
    }

    #[test]
    fn five_tweets_match_brute_force_pairs() {
        let corpus = vec![
            tweet("1", &["peace", "saynotowar", "pakistan"], &[]),
            tweet("2", &["peace", "saynotowar"], &[]),
            tweet("3", &["india", "pulwama", "revenge", "peace"], &[]),
            tweet("4", &["pulwama"], &[]),
            tweet("5", &["revenge", "pulwama", "india"], &[]),
        ];
        let g: CooccurrenceGraph<f64> = build_cooccurrence(&corpus, GraphMode::Hashtag, 10).unwrap();
        let mut expected: BTreeMap<(String, String), f64> = BTreeMap::new();
        for t in &corpus {
            for a in &t.hashtags {
                for b in &t.hashtags {
                    if a < b {
                        *expected.entry((a.clone(), b.clone())).or_default() += 1.0;
                    }
                }
            }
        }
        let got: BTreeMap<(String, String), f64> =
            g.edges().map(|(a, b, w)| ((g.node(a).to_string(), g.node(b).to_string()), w)).collect();
        assert_eq!(got, expected);
        assert_eq!(got[&("india".into(), "pulwama".into())], 2.0);
    }

    #[test]
    fn tsv_round_trip() {
        let corpus = vec![tweet("1", &["a", "b", "c"], &[]), tweet("2", &["a", "b"], &[]), tweet("3", &["z"], &[])];
        let g: CooccurrenceGraph<f64> = build_cooccurrence(&corpus, GraphMode::Hashtag, 10).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (e, n) = (dir.path().join("edges.tsv"), dir.path().join("nodes.tsv"));
        g.write_tsv(&e, &n).unwrap();
        let back = CooccurrenceGraph::<f64>::read_tsv(&e, &n).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn from_parts_rejects_self_loops_and_bad_weights() {
        let nodes = vec![("a".to_string(), 1), ("b".to_string(), 1)];
        assert!(CooccurrenceGraph::from_parts(GraphMode::Hashtag, nodes.clone(), [("a".into(), "a".into(), 1.0)]).is_err());
        assert!(CooccurrenceGraph::from_parts(GraphMode::Hashtag, nodes.clone(), [("a".into(), "b".into(), 0.0)]).is_err());
        assert!(CooccurrenceGraph::from_parts(GraphMode::Hashtag, nodes, [("a".into(), "q".into(), 1.0)]).is_err());
    }

    #[test]
    fn embedding_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.txt");
        std::fs::write(&p, "a 1 0 0 0\nb 0 1 0 0\nc 0 0 1 0\n").unwrap();
        let t: EmbeddingTable<f64> = load_embeddings(&p, 100).unwrap();
        assert_eq!((t.len(), t.dim()), (3, 4));

        std::fs::write(&p, "a 1 0 0 0\nb 0 1 0\nc 0 0 1 0\n").unwrap();
        let err = load_embeddings::<f64>(&p, 100).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");

        std::fs::write(&p, "a 1 0\nb x 1\n").unwrap();
        assert!(load_embeddings::<f64>(&p, 100).is_err());

        std::fs::write(&p, "a 1\nb 2\nc 3\nd 4\ne 5\n").unwrap();
        let t: EmbeddingTable<f64> = load_embeddings(&p, 2).unwrap();
        assert_eq!(t.vocabulary(), ["a", "b"]);
    }

    #[test]
    fn angular_weight_endpoints() {
        assert_eq!(angular_similarity(&[0.3, -1.2, 2.0], &[0.3, -1.2, 2.0]), 1.0);
        assert!((angular_similarity::<f64>(&[1.0, 0.0], &[0.0, 3.0]) - 0.5).abs() < 1e-15);
        assert_eq!(angular_similarity(&[1.0, 0.0], &[-1.0, 0.0]), MIN_ANGULAR_WEIGHT);
        let w32 = angular_similarity(&[1.0_f32, 0.0], &[0.0, 1.0]);
        assert!((w32 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn knn_matches_all_pairs_cosine_ranking() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let names: Vec<String> = (0..6).map(|i| format!("w{i}")).collect();
        let vecs: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let table = EmbeddingTable::new(names.clone(), vecs.clone()).unwrap();
        let knn = build_knn_graph(&table, 2).unwrap();
        assert_eq!(knn.dropped_zero_vectors, 0);

        // oracle: plain cosine, rank all pairs, union of top-2 lists
        let cos = |a: &[f64], b: &[f64]| {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            dot / (na * nb)
        };
        let mut expected = std::collections::BTreeSet::new();
        for i in 0..6 {
            let mut others: Vec<(usize, f64)> = (0..6).filter(|&j| j != i).map(|j| (j, cos(&vecs[i], &vecs[j]))).collect();
            others.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            for &(j, _) in &others[..2] {
                expected.insert((names[i.min(j)].clone(), names[i.max(j)].clone()));
            }
        }
        let g = &knn.graph;
        let got: std::collections::BTreeSet<_> =
            g.edges().map(|(a, b, _)| (g.node(a).to_string(), g.node(b).to_string())).collect();
        assert_eq!(got, expected);
        for (a, b, w) in g.edges() {
            let c = cos(table.vector(a), table.vector(b));
            let oracle = (1.0 - c.clamp(-1.0, 1.0).acos() / std::f64::consts::PI).max(MIN_ANGULAR_WEIGHT);
            assert!((w - oracle).abs() < 1e-9);
        }
        for i in 0..g.node_count() {
            assert!(g.degree(i) >= 2);
        }
    }

    #[test]
    fn knn_drops_zero_vectors_and_checks_k() {
        let table = EmbeddingTable::new(
            vec!["a".into(), "b".into(), "z".into(), "c".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0]],
        )
        .unwrap();
        let knn = build_knn_graph(&table, 1).unwrap();
        assert_eq!(knn.dropped_zero_vectors, 1);
        assert_eq!(knn.graph.nodes(), ["a", "b", "c"]);
        assert!(build_knn_graph(&table, 3).is_err());
    }
}
