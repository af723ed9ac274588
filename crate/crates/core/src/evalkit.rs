//! Evaluation against gold labels and inter-annotator agreement.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarity::TernaryLabel;
use crate::scalar::{fmt9, Scalar};
use crate::tsv;

/// Three-way gold or annotator label. Annotator "can't determine" and
/// model "unclassified" both collapse into `Neutral`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldLabel {
    PoleA,
    PoleB,
    Neutral,
}

impl GoldLabel {
    pub const ALL: [GoldLabel; 3] = [GoldLabel::PoleA, GoldLabel::PoleB, GoldLabel::Neutral];

    pub fn as_str(&self) -> &'static str {
        match self {
            GoldLabel::PoleA => "pole_a",
            GoldLabel::PoleB => "pole_b",
            GoldLabel::Neutral => "neutral",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    fn is_polar_opposite(self, other: GoldLabel) -> bool {
        matches!(
            (self, other),
            (GoldLabel::PoleA, GoldLabel::PoleB) | (GoldLabel::PoleB, GoldLabel::PoleA)
        )
    }
}

impl From<TernaryLabel> for GoldLabel {
    fn from(l: TernaryLabel) -> Self {
        match l {
            TernaryLabel::PoleA => GoldLabel::PoleA,
            TernaryLabel::PoleB => GoldLabel::PoleB,
            TernaryLabel::Neutral | TernaryLabel::Unclassified => GoldLabel::Neutral,
        }
    }
}

impl fmt::Display for GoldLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GoldLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pole_a" | "A" | "a" => Ok(GoldLabel::PoleA),
            "pole_b" | "B" | "b" => Ok(GoldLabel::PoleB),
            "neutral" | "N" | "n" | "unclassified" | "cant_determine" => Ok(GoldLabel::Neutral),
            other => Err(Error::InvalidArgument(format!("unknown gold label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalUnit {
    Account,
    UserDay,
}

impl FromStr for EvalUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "account" => Ok(EvalUnit::Account),
            "user_day" => Ok(EvalUnit::UserDay),
            other => Err(Error::InvalidArgument(format!("unknown evaluation unit {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldLabelSet {
    pub unit: EvalUnit,
    pub labels: BTreeMap<String, GoldLabel>,
    pub provenance: String,
}

impl GoldLabelSet {
    /// Reads a gold file:
    ///
    /// ```text
    /// # unit: account
    /// # provenance: account nationality
    /// key	label
    /// some_user	pole_a
    /// ```
    pub fn read(path: &Path) -> Result<Self> {
        let name = tsv::source_name(path);
        let mut unit = EvalUnit::Account;
        let mut provenance = String::new();
        let mut labels = BTreeMap::new();
        for (line_no, line) in tsv::open_lines(path)? {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once(':') {
                    match k.trim() {
                        "unit" => unit = v.trim().parse().map_err(|e: Error| Error::parse(&name, line_no, e.to_string()))?,
                        "provenance" => provenance = v.trim().to_string(),
                        _ => {}
                    }
                }
                continue;
            }
            let mut f = line.split('\t');
            let (Some(key), Some(label), None) = (f.next(), f.next(), f.next()) else {
                return Err(Error::parse(&name, line_no, "expected key<TAB>label"));
            };
            if key == "key" && label == "label" {
                continue;
            }
            let label: GoldLabel = label.parse().map_err(|e: Error| Error::parse(&name, line_no, e.to_string()))?;
            if labels.insert(key.to_string(), label).is_some() {
                return Err(Error::parse(&name, line_no, format!("duplicate key {key:?}")));
            }
        }
        Ok(GoldLabelSet {
            unit,
            labels,
            provenance,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let unit = match self.unit {
            EvalUnit::Account => "account",
            EvalUnit::UserDay => "user_day",
        };
        let mut out = format!("# unit: {unit}\n# provenance: {}\nkey\tlabel\n", self.provenance);
        for (k, l) in &self.labels {
            out.push_str(&format!("{k}\t{l}\n"));
        }
        tsv::write_all(path, &out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pole {
    A,
    B,
}

impl Pole {
    fn gold(self) -> GoldLabel {
        match self {
            Pole::A => GoldLabel::PoleA,
            Pole::B => GoldLabel::PoleB,
        }
    }

    fn predicted(self) -> TernaryLabel {
        match self {
            Pole::A => TernaryLabel::PoleA,
            Pole::B => TernaryLabel::PoleB,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleMetrics<T> {
    /// `None` when no gold unit was predicted as this pole.
    pub precision: Option<T>,
    pub recall: T,
    /// Unclassified or neutral predictions on this pole's gold units.
    pub pct_unknown: T,
    /// Opposite-pole predictions on this pole's gold units.
    pub pct_incorrect: T,
}

fn prediction<'a>(predictions: &'a BTreeMap<String, TernaryLabel>, key: &str) -> TernaryLabel {
    predictions.get(key).copied().unwrap_or(TernaryLabel::Unclassified)
}

/// Per-pole metrics over gold units. Gold units without a prediction count
/// as unclassified; precision is computed over gold-covered units only.
pub fn pole_metrics<T: Scalar>(
    predictions: &BTreeMap<String, TernaryLabel>,
    gold: &GoldLabelSet,
    pole: Pole,
) -> Result<PoleMetrics<T>> {
    let target = pole.gold();
    let (mut hit, mut unknown, mut wrong, mut total) = (0usize, 0usize, 0usize, 0usize);
    let mut predicted_pole = 0usize;
    for (key, &g) in &gold.labels {
        let p = prediction(predictions, key);
        if p == pole.predicted() {
            predicted_pole += 1;
        }
        if g != target {
            continue;
        }
        total += 1;
        if p == pole.predicted() {
            hit += 1;
        } else if p == pole.predicted().flipped() {
            wrong += 1;
        } else {
            unknown += 1;
        }
    }
    if total == 0 {
        return Err(Error::InvalidArgument(format!("gold set has no units of pole {target}")));
    }
    let n = T::from_count(total);
    Ok(PoleMetrics {
        precision: (predicted_pole > 0).then(|| T::from_count(hit) / T::from_count(predicted_pole)),
        recall: T::from_count(hit) / n,
        pct_unknown: T::from_count(unknown) / n,
        pct_incorrect: T::from_count(wrong) / n,
    })
}

/// Exact three-way accuracy (unclassified counts as neutral) and soft
/// accuracy, which only penalizes polar-opposite predictions.
pub fn accuracy_soft<T: Scalar>(predictions: &BTreeMap<String, TernaryLabel>, gold: &GoldLabelSet) -> Result<(T, T)> {
    if gold.labels.is_empty() {
        return Err(Error::InvalidArgument("gold set is empty".into()));
    }
    let (mut exact, mut opposite) = (0usize, 0usize);
    for (key, &g) in &gold.labels {
        let p = GoldLabel::from(prediction(predictions, key));
        if p == g {
            exact += 1;
        } else if p.is_polar_opposite(g) {
            opposite += 1;
        }
    }
    let n = T::from_count(gold.labels.len());
    Ok((T::from_count(exact) / n, T::one() - T::from_count(opposite) / n))
}

/// Two annotators' labels over the same units.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationTable {
    items: Vec<String>,
    first: Vec<GoldLabel>,
    second: Vec<GoldLabel>,
}

impl AnnotationTable {
    pub fn new(items: Vec<String>, first: Vec<GoldLabel>, second: Vec<GoldLabel>) -> Result<Self> {
        if items.len() != first.len() || items.len() != second.len() {
            return Err(Error::InvalidArgument("annotation columns differ in length".into()));
        }
        Ok(AnnotationTable { items, first, second })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn pairs(&self) -> impl Iterator<Item = (GoldLabel, GoldLabel)> + '_ {
        self.first.iter().copied().zip(self.second.iter().copied())
    }

    /// Reads `key<TAB>annotator1<TAB>annotator2` rows; a header row is optional.
    pub fn read(path: &Path) -> Result<Self> {
        let name = tsv::source_name(path);
        let (mut items, mut first, mut second) = (Vec::new(), Vec::new(), Vec::new());
        for (line_no, line) in tsv::open_lines(path)? {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut f = line.split('\t');
            let (Some(key), Some(a), Some(b), None) = (f.next(), f.next(), f.next(), f.next()) else {
                return Err(Error::parse(&name, line_no, "expected key<TAB>annotator1<TAB>annotator2"));
            };
            if key == "key" {
                continue;
            }
            let parse = |s: &str| s.parse::<GoldLabel>().map_err(|e| Error::parse(&name, line_no, e.to_string()));
            items.push(key.to_string());
            first.push(parse(a)?);
            second.push(parse(b)?);
        }
        Self::new(items, first, second)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement<T> {
    pub percent_agreement: T,
    /// One minus the rate of pole A vs pole B disagreements.
    pub polar_opposite_agreement: T,
    pub krippendorff_alpha: T,
    /// Set when expected disagreement is zero and alpha was defined as 1.
    pub alpha_degenerate: bool,
}

/// Coincidence matrix of two annotators over the three categories: each
/// unit contributes its ordered value pair in both directions.
pub fn coincidence_matrix(table: &AnnotationTable) -> [[usize; 3]; 3] {
    let mut o = [[0usize; 3]; 3];
    for (a, b) in table.pairs() {
        o[a.index()][b.index()] += 1;
        o[b.index()][a.index()] += 1;
    }
    o
}

/// Percent agreement, polar-opposite agreement and nominal Krippendorff α.
pub fn agreement<T: Scalar>(table: &AnnotationTable) -> Result<Agreement<T>> {
    if table.len() < 2 {
        return Err(Error::InvalidArgument("agreement needs at least two items".into()));
    }
    let n_units = T::from_count(table.len());
    let same = table.pairs().filter(|(a, b)| a == b).count();
    let opposite = table.pairs().filter(|(a, b)| a.is_polar_opposite(*b)).count();

    let o = coincidence_matrix(table);
    let marginals: Vec<usize> = o.iter().map(|row| row.iter().sum()).collect();
    let n: usize = marginals.iter().sum();
    let mut observed = 0usize;
    let mut expected = 0usize;
    for c in 0..3 {
        for k in 0..3 {
            if c != k {
                observed += o[c][k];
                expected += marginals[c] * marginals[k];
            }
        }
    }
    let (alpha, degenerate) = if expected == 0 {
        (T::one(), true)
    } else {
        // 1 - D_o / D_e with D_o = observed / n and D_e = expected / (n (n - 1))
        let ratio = T::from_count(n - 1) * T::from_count(observed) / T::from_count(expected);
        (T::one() - ratio, false)
    };
    Ok(Agreement {
        percent_agreement: T::from_count(same) / n_units,
        polar_opposite_agreement: T::one() - T::from_count(opposite) / n_units,
        krippendorff_alpha: alpha,
        alpha_degenerate: degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<T> {
    pub dimension: String,
    pub pole_a: PoleMetrics<T>,
    pub pole_b: PoleMetrics<T>,
    pub accuracy: T,
    pub soft_accuracy: T,
    pub agreement: Option<Agreement<T>>,
}

pub fn evaluate<T: Scalar>(
    dimension: &str,
    predictions: &BTreeMap<String, TernaryLabel>,
    gold: &GoldLabelSet,
    annotations: Option<&AnnotationTable>,
) -> Result<EvalReport<T>> {
    let (accuracy, soft_accuracy) = accuracy_soft(predictions, gold)?;
    Ok(EvalReport {
        dimension: dimension.to_string(),
        pole_a: pole_metrics(predictions, gold, Pole::A)?,
        pole_b: pole_metrics(predictions, gold, Pole::B)?,
        accuracy,
        soft_accuracy,
        agreement: annotations.map(agreement).transpose()?,
    })
}

fn opt9<T: Scalar>(v: Option<T>) -> String {
    v.map(fmt9).unwrap_or_default()
}

/// Per-pole table: `dimension,pole,precision,recall,pct_unknown,pct_incorrect`.
pub fn pole_table_csv<T: Scalar>(reports: &[EvalReport<T>]) -> String {
    let mut s = String::from("dimension,pole,precision,recall,pct_unknown,pct_incorrect\n");
    for r in reports {
        for (pole, m) in [("pole_a", &r.pole_a), ("pole_b", &r.pole_b)] {
            s.push_str(&format!(
                "{},{pole},{},{},{},{}\n",
                r.dimension,
                opt9(m.precision),
                fmt9(m.recall),
                fmt9(m.pct_unknown),
                fmt9(m.pct_incorrect)
            ));
        }
    }
    s
}

/// Agreement and accuracy table:
/// `dimension,krippendorff_alpha,percent_agree,polar_opposite_agree,accuracy,soft_accuracy`.
pub fn agreement_table_csv<T: Scalar>(reports: &[EvalReport<T>]) -> String {
    let mut s = String::from("dimension,krippendorff_alpha,percent_agree,polar_opposite_agree,accuracy,soft_accuracy\n");
    for r in reports {
        let a = r.agreement.as_ref();
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.dimension,
            opt9(a.map(|a| a.krippendorff_alpha)),
            opt9(a.map(|a| a.percent_agreement)),
            opt9(a.map(|a| a.polar_opposite_agreement)),
            fmt9(r.accuracy),
            fmt9(r.soft_accuracy)
        ));
    }
    s
}
