//! Seed lexicons and label propagation.
//!
//! [`propagate_greedy`] is the pass-based weighted-average labeling used for
//! co-occurrence graphs. [`propagate_random_walk`] scores nodes by the
//! relative visit mass of two random walks with restart, one per pole.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::corpus::normalize_token;
use crate::error::{Error, Result};
use crate::lexgraph::CooccurrenceGraph;
use crate::polarity::Scale;
use crate::scalar::{fmt9, Scalar};
use crate::tsv;

/// Hand-picked anchor items for the two poles of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedLexicon<T> {
    dimension: String,
    pole_a: BTreeSet<String>,
    pole_b: BTreeSet<String>,
    value_a: T,
    value_b: T,
}

impl<T: Scalar> SeedLexicon<T> {
    pub fn new(
        dimension: impl Into<String>,
        pole_a: impl IntoIterator<Item = String>,
        pole_b: impl IntoIterator<Item = String>,
        value_a: T,
        value_b: T,
    ) -> Result<Self> {
        let pole_a: BTreeSet<String> = pole_a.into_iter().collect();
        let pole_b: BTreeSet<String> = pole_b.into_iter().collect();
        if pole_a.is_empty() || pole_b.is_empty() {
            return Err(Error::InvalidArgument("both seed poles need at least one item".into()));
        }
        if let Some(shared) = pole_a.intersection(&pole_b).next() {
            return Err(Error::InvalidArgument(format!("seed {shared:?} is listed under both poles")));
        }
        if value_a == value_b || !value_a.is_finite() || !value_b.is_finite() {
            return Err(Error::InvalidArgument("seed values must be finite and distinct".into()));
        }
        Ok(SeedLexicon {
            dimension: dimension.into(),
            pole_a,
            pole_b,
            value_a,
            value_b,
        })
    }

    pub fn dimension(&self) -> &str {
        &self.dimension
    }

    pub fn pole_a(&self) -> &BTreeSet<String> {
        &self.pole_a
    }

    pub fn pole_b(&self) -> &BTreeSet<String> {
        &self.pole_b
    }

    pub fn value_a(&self) -> T {
        self.value_a
    }

    pub fn value_b(&self) -> T {
        self.value_b
    }

    pub fn scale(&self) -> Scale<T> {
        Scale::new(self.value_a, self.value_b)
    }

    /// Same seed sets with different endpoint values.
    pub fn with_values(&self, value_a: T, value_b: T) -> Result<Self> {
        Self::new(
            self.dimension.clone(),
            self.pole_a.iter().cloned(),
            self.pole_b.iter().cloned(),
            value_a,
            value_b,
        )
    }

    /// Reads a seed file:
    ///
    /// ```text
    /// # dimension: india_pakistan
    /// # value_a: 1
    /// # value_b: -1
    /// item	pole
    /// PulwamaRevenge	A
    /// PakistanZindabad	B
    /// ```
    ///
    /// Items are normalized like corpus tokens, so a leading `#` is optional.
    pub fn read(path: &Path) -> Result<Self> {
        let name = tsv::source_name(path);
        let mut dimension = None;
        let mut value_a = None;
        let mut value_b = None;
        let mut pole_a = Vec::new();
        let mut pole_b = Vec::new();
        for (line_no, line) in tsv::open_lines(path)? {
            let line = line.map_err(|e| Error::io(path, e))?;
            let trimmed = line.trim_end();
            if trimmed.is_empty() {
                continue;
            }
            if let Some((key, val)) = header_field(trimmed) {
                let parse_value = |v: &str| {
                    v.parse::<f64>()
                        .map(T::from_f64_lossy)
                        .map_err(|_| Error::parse(&name, line_no, format!("bad {key} {v:?}")))
                };
                match key {
                    "dimension" => dimension = Some(val.to_string()),
                    "value_a" => value_a = Some(parse_value(val)?),
                    "value_b" => value_b = Some(parse_value(val)?),
                    _ => {}
                }
                continue;
            }
            let mut fields = trimmed.split('\t');
            let (Some(item), Some(pole), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::parse(&name, line_no, "expected item<TAB>pole"));
            };
            if item == "item" && pole == "pole" {
                continue;
            }
            let Some(item) = normalize_token(item) else {
                return Err(Error::parse(&name, line_no, format!("item {item:?} normalizes to nothing")));
            };
            match pole {
                "A" | "a" => pole_a.push(item),
                "B" | "b" => pole_b.push(item),
                other => return Err(Error::parse(&name, line_no, format!("pole must be A or B, got {other:?}"))),
            }
        }
        let missing = |what: &str| Error::parse(&name, 1, format!("missing '# {what}:' header"));
        let dimension = dimension.ok_or_else(|| missing("dimension"))?;
        let value_a = value_a.ok_or_else(|| missing("value_a"))?;
        let value_b = value_b.ok_or_else(|| missing("value_b"))?;
        Self::new(dimension, pole_a, pole_b, value_a, value_b)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("# dimension: {}\n", self.dimension));
        out.push_str(&format!("# value_a: {}\n", fmt9(self.value_a)));
        out.push_str(&format!("# value_b: {}\n", fmt9(self.value_b)));
        out.push_str("item\tpole\n");
        for item in &self.pole_a {
            out.push_str(&format!("{item}\tA\n"));
        }
        for item in &self.pole_b {
            out.push_str(&format!("{item}\tB\n"));
        }
        tsv::write_all(path, &out)
    }
}

fn header_field(line: &str) -> Option<(&str, &str)> {
    let rest = line.strip_prefix('#')?.trim_start();
    let (key, val) = rest.split_once(':')?;
    Some((key.trim(), val.trim()))
}

/// Outcome for one vocabulary item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label<T> {
    Seed(T),
    Propagated(T),
    Unlabeled,
}

impl<T: Copy> Label<T> {
    pub fn score(&self) -> Option<T> {
        match *self {
            Label::Seed(v) | Label::Propagated(v) => Some(v),
            Label::Unlabeled => None,
        }
    }

    pub fn status(&self) -> LabelStatus {
        match self {
            Label::Seed(_) => LabelStatus::Seed,
            Label::Propagated(_) => LabelStatus::Propagated,
            Label::Unlabeled => LabelStatus::Unlabeled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelStatus {
    Seed,
    Propagated,
    Unlabeled,
}

impl fmt::Display for LabelStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelStatus::Seed => "seed",
            LabelStatus::Propagated => "propagated",
            LabelStatus::Unlabeled => "unlabeled",
        })
    }
}

/// Per-item polarity scores for one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarityLexicon<T> {
    dimension: String,
    scale: Scale<T>,
    entries: BTreeMap<String, Label<T>>,
}

impl<T: Scalar> PolarityLexicon<T> {
    /// Validates that every score lies within the scale.
    pub fn new(dimension: impl Into<String>, scale: Scale<T>, entries: BTreeMap<String, Label<T>>) -> Result<Self> {
        for (item, label) in &entries {
            if let Some(v) = label.score() {
                if !scale.contains(v) {
                    return Err(Error::InvalidArgument(format!("score {v} of {item:?} outside scale")));
                }
            }
        }
        Ok(PolarityLexicon {
            dimension: dimension.into(),
            scale,
            entries,
        })
    }

    pub fn dimension(&self) -> &str {
        &self.dimension
    }

    pub fn scale(&self) -> Scale<T> {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, item: &str) -> Option<Label<T>> {
        self.entries.get(item).copied()
    }

    /// Score of a labeled item; `None` for unlabeled or unknown items.
    pub fn score(&self, item: &str) -> Option<T> {
        self.entries.get(item).and_then(Label::score)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Label<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn count(&self, status: LabelStatus) -> usize {
        self.entries.values().filter(|l| l.status() == status).count()
    }

    /// Applies `x ↦ factor·x + offset` to every score and to the scale.
    pub fn map_affine(&self, factor: T, offset: T) -> Self {
        let f = |x: T| factor * x + offset;
        let entries = self
            .entries
            .iter()
            .map(|(k, l)| {
                let l = match *l {
                    Label::Seed(v) => Label::Seed(f(v)),
                    Label::Propagated(v) => Label::Propagated(f(v)),
                    Label::Unlabeled => Label::Unlabeled,
                };
                (k.clone(), l)
            })
            .collect();
        PolarityLexicon {
            dimension: self.dimension.clone(),
            scale: Scale::new(f(self.scale.value_a), f(self.scale.value_b)),
            entries,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = tsv::create(path)?;
        let res: std::io::Result<()> = (|| {
            writeln!(w, "# dimension: {}", self.dimension)?;
            writeln!(w, "# value_a: {}", fmt9(self.scale.value_a))?;
            writeln!(w, "# value_b: {}", fmt9(self.scale.value_b))?;
            writeln!(w, "item\tscore\tstatus")?;
            for (item, label) in &self.entries {
                let score = label.score().map(fmt9).unwrap_or_default();
                writeln!(w, "{item}\t{score}\t{}", label.status())?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let name = tsv::source_name(path);
        let mut dimension = None;
        let mut value_a = None;
        let mut value_b = None;
        let mut entries = BTreeMap::new();
        let mut saw_columns = false;
        for (line_no, line) in tsv::open_lines(path)? {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            if !saw_columns {
                if let Some((key, val)) = header_field(&line) {
                    let parse_value = |v: &str| {
                        v.parse::<f64>()
                            .map(T::from_f64_lossy)
                            .map_err(|_| Error::parse(&name, line_no, format!("bad {key} {v:?}")))
                    };
                    match key {
                        "dimension" => dimension = Some(val.to_string()),
                        "value_a" => value_a = Some(parse_value(val)?),
                        "value_b" => value_b = Some(parse_value(val)?),
                        _ => {}
                    }
                    continue;
                }
                if line == "item\tscore\tstatus" {
                    saw_columns = true;
                    continue;
                }
                return Err(Error::parse(&name, line_no, "expected header 'item<TAB>score<TAB>status'"));
            }
            let (Some(value_a), Some(value_b)) = (value_a, value_b) else {
                return Err(Error::parse(&name, line_no, "missing '# value_a:' / '# value_b:' header"));
            };
            let scale = Scale::new(value_a, value_b);
            let mut fields = line.split('\t');
            let (Some(item), Some(score), Some(status), None) = (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(Error::parse(&name, line_no, "expected item<TAB>score<TAB>status"));
            };
            let parse_score = || -> Result<T> {
                let v: f64 = score
                    .parse()
                    .map_err(|_| Error::parse(&name, line_no, format!("bad score {score:?}")))?;
                let v = T::from_f64_lossy(v);
                if !scale.contains(v) {
                    return Err(Error::parse(&name, line_no, format!("score {score} outside scale")));
                }
                Ok(v)
            };
            let label = match status {
                "seed" => Label::Seed(parse_score()?),
                "propagated" => Label::Propagated(parse_score()?),
                "unlabeled" if score.is_empty() => Label::Unlabeled,
                "unlabeled" => return Err(Error::parse(&name, line_no, "unlabeled item carries a score")),
                other => return Err(Error::parse(&name, line_no, format!("unknown status {other:?}"))),
            };
            if entries.insert(item.to_string(), label).is_some() {
                return Err(Error::parse(&name, line_no, format!("duplicate item {item:?}")));
            }
        }
        let dimension = dimension.ok_or_else(|| Error::parse(&name, 1, "missing '# dimension:' header"))?;
        let (Some(value_a), Some(value_b)) = (value_a, value_b) else {
            return Err(Error::parse(&name, 1, "missing '# value_a:' / '# value_b:' header"));
        };
        Ok(PolarityLexicon {
            dimension,
            scale: Scale::new(value_a, value_b),
            entries,
        })
    }
}

fn seed_labels<T: Scalar>(graph: &CooccurrenceGraph<T>, seeds: &SeedLexicon<T>) -> (Vec<Option<T>>, Vec<bool>, [usize; 2]) {
    let mut labels = vec![None; graph.node_count()];
    let mut is_seed = vec![false; graph.node_count()];
    let mut present = [0, 0];
    for (set, value, slot) in [(&seeds.pole_a, seeds.value_a, 0), (&seeds.pole_b, seeds.value_b, 1)] {
        for item in set {
            if let Some(i) = graph.index_of(item) {
                labels[i] = Some(value);
                is_seed[i] = true;
                present[slot] += 1;
            }
        }
    }
    (labels, is_seed, present)
}

fn assemble<T: Scalar>(
    graph: &CooccurrenceGraph<T>,
    seeds: &SeedLexicon<T>,
    labels: &[Option<T>],
    is_seed: &[bool],
) -> PolarityLexicon<T> {
    let entries = (0..graph.node_count())
        .map(|i| {
            let label = match (labels[i], is_seed[i]) {
                (Some(v), true) => Label::Seed(v),
                (Some(v), false) => Label::Propagated(v),
                (None, _) => Label::Unlabeled,
            };
            (graph.node(i).to_string(), label)
        })
        .collect();
    PolarityLexicon {
        dimension: seeds.dimension.clone(),
        scale: seeds.scale(),
        entries,
    }
}

/// Greedy pass-based propagation.
///
/// Pass `i` (counted from 0) allows slack `l = i / gamma`. Visiting nodes
/// in lexicographic order, an unlabeled node with neighbors `t` of which
/// `t_l` are labeled is labeled when `|t_l| >= 1` and `|t_l| + l >= |t|`.
/// Its label is the edge-weighted mean over `t_l` and becomes visible to
/// nodes visited later in the same pass. Labels are never revised.
///
/// Passes that label nothing leave the state unchanged until the slack
/// reaches the smallest outstanding deficit `|t| - |t_l|`, so the counter
/// jumps straight there; the result equals running every pass. Stops when
/// no unlabeled node has a labeled neighbor, or once `max_outer` passes
/// have been counted.
pub fn propagate_greedy<T: Scalar>(
    graph: &CooccurrenceGraph<T>,
    seeds: &SeedLexicon<T>,
    gamma: u64,
    max_outer: u64,
) -> Result<PolarityLexicon<T>> {
    if gamma == 0 {
        return Err(Error::InvalidArgument("gamma must be at least 1".into()));
    }
    let (mut labels, is_seed, present) = seed_labels(graph, seeds);
    if present == [0, 0] {
        return Err(Error::NoSeedsReachable);
    }
    let n = graph.node_count();
    let degree: Vec<usize> = (0..n).map(|v| graph.degree(v)).collect();
    let mut labeled_neighbors: Vec<usize> = (0..n)
        .map(|v| graph.neighbors(v).iter().filter(|&&(u, _)| labels[u].is_some()).count())
        .collect();
    let (lo, hi) = seeds.scale().bounds();

    let mut pass: u64 = 0;
    while pass < max_outer {
        let slack = usize::try_from(pass / gamma).unwrap_or(usize::MAX);
        let mut newly = 0usize;
        for v in 0..n {
            if labels[v].is_some() {
                continue;
            }
            let have = labeled_neighbors[v];
            if have == 0 || have.saturating_add(slack) < degree[v] {
                continue;
            }
            let mut score = T::zero();
            let mut total = T::zero();
            for &(u, w) in graph.neighbors(v) {
                if let Some(label) = labels[u] {
                    score = score + label * w;
                    total = total + w;
                }
            }
            labels[v] = Some((score / total).max(lo).min(hi));
            newly += 1;
            for &(u, _) in graph.neighbors(v) {
                labeled_neighbors[u] += 1;
            }
        }
        if newly > 0 {
            pass += 1;
            continue;
        }
        let deficit = (0..n)
            .filter(|&v| labels[v].is_none() && labeled_neighbors[v] > 0)
            .map(|v| degree[v] - labeled_neighbors[v])
            .min();
        match deficit {
            None => break,
            Some(d) => pass = (pass + 1).max((d as u64).saturating_mul(gamma)),
        }
    }
    Ok(assemble(graph, seeds, &labels, &is_seed))
}

/// Default pass divisor.
pub const DEFAULT_GAMMA: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomWalkConfig<T> {
    /// Probability of jumping back to the seed set at each step.
    pub restart_prob: T,
    /// Convergence threshold on the max-norm change between iterates.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for RandomWalkConfig<T> {
    fn default() -> Self {
        RandomWalkConfig {
            restart_prob: T::from_f64_lossy(0.15),
            tol: T::from_f64_lossy(1e-8),
            max_iter: 1000,
        }
    }
}

/// Stationary distribution of a weighted-degree random walk that restarts
/// uniformly on `restart`. Mass at nodes without edges is returned to the
/// restart set.
pub fn random_walk_with_restart<T: Scalar>(
    graph: &CooccurrenceGraph<T>,
    restart: &[usize],
    config: &RandomWalkConfig<T>,
) -> Vec<T> {
    let n = graph.node_count();
    let mut s = vec![T::zero(); n];
    let share = T::one() / T::from_count(restart.len());
    for &r in restart {
        s[r] = share;
    }
    let strength: Vec<T> = (0..n).map(|v| graph.neighbors(v).iter().map(|&(_, w)| w).sum()).collect();
    let keep = T::one() - config.restart_prob;
    let mut p = s.clone();
    let mut next = vec![T::zero(); n];
    for _ in 0..config.max_iter {
        let mut dangling = T::zero();
        for v in 0..n {
            next[v] = T::zero();
            if strength[v].is_zero() {
                dangling = dangling + p[v];
            }
        }
        for v in 0..n {
            if strength[v].is_zero() || p[v].is_zero() {
                continue;
            }
            let out = p[v] / strength[v];
            for &(u, w) in graph.neighbors(v) {
                next[u] = next[u] + out * w;
            }
        }
        let mut change = T::zero();
        for v in 0..n {
            let value = config.restart_prob * s[v] + keep * (next[v] + dangling * s[v]);
            change = change.max((value - p[v]).abs());
            next[v] = value;
        }
        std::mem::swap(&mut p, &mut next);
        if change < config.tol {
            break;
        }
    }
    p
}

/// Random-walk propagation.
///
/// Runs one walk per pole, restarting at that pole's seeds, and scores each
/// node by `p_a / (p_a + p_b)` mapped affinely onto `[value_b, value_a]`.
/// Seeds keep their exact values; nodes neither walk reaches stay unlabeled.
pub fn propagate_random_walk<T: Scalar>(
    graph: &CooccurrenceGraph<T>,
    seeds: &SeedLexicon<T>,
    config: &RandomWalkConfig<T>,
) -> Result<PolarityLexicon<T>> {
    if !(config.restart_prob > T::zero() && config.restart_prob < T::one()) {
        return Err(Error::InvalidArgument("restart_prob must lie in (0, 1)".into()));
    }
    if !(config.tol > T::zero()) || config.max_iter == 0 {
        return Err(Error::InvalidArgument("tol and max_iter must be positive".into()));
    }
    let (mut labels, is_seed, _) = seed_labels(graph, seeds);
    let in_graph = |set: &BTreeSet<String>| -> Vec<usize> { set.iter().filter_map(|s| graph.index_of(s)).collect() };
    let restart_a = in_graph(&seeds.pole_a);
    let restart_b = in_graph(&seeds.pole_b);
    if restart_a.is_empty() {
        return Err(Error::PoleWithoutSeeds('A'));
    }
    if restart_b.is_empty() {
        return Err(Error::PoleWithoutSeeds('B'));
    }
    let (p_a, p_b) = rayon::join(
        || random_walk_with_restart(graph, &restart_a, config),
        || random_walk_with_restart(graph, &restart_b, config),
    );
    let (lo, hi) = seeds.scale().bounds();
    let span = seeds.value_a - seeds.value_b;
    for v in 0..graph.node_count() {
        if is_seed[v] {
            continue;
        }
        let mass = p_a[v] + p_b[v];
        if mass > T::zero() {
            let ratio = p_a[v] / mass;
            labels[v] = Some((seeds.value_b + span * ratio).max(lo).min(hi));
        }
    }
    Ok(assemble(graph, seeds, &labels, &is_seed))
}
