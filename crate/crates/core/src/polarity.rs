//! Aggregation of item scores to tweets, users, days and groups.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{TokenizedTweet, TweetRecord, UserDayKey};
use crate::error::{Error, Result};
use crate::proplabel::PolarityLexicon;
use crate::scalar::{compensated_sum, fmt9, Scalar};
use crate::tsv;

/// Endpoint values of a dimension: pole A sits at `value_a`, pole B at
/// `value_b`, and the neutral point is their midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale<T> {
    pub value_a: T,
    pub value_b: T,
}

impl<T: Scalar> Scale<T> {
    pub fn new(value_a: T, value_b: T) -> Self {
        Scale { value_a, value_b }
    }

    /// `[-1, 1]` with pole A at `+1`.
    pub fn signed() -> Self {
        Scale::new(T::one(), -T::one())
    }

    /// `[0, 1]` with pole A at `1`.
    pub fn unit() -> Self {
        Scale::new(T::one(), T::zero())
    }

    pub fn bounds(&self) -> (T, T) {
        (self.value_a.min(self.value_b), self.value_a.max(self.value_b))
    }

    pub fn midpoint(&self) -> T {
        (self.value_a + self.value_b) / (T::one() + T::one())
    }

    pub fn contains(&self, x: T) -> bool {
        let (lo, hi) = self.bounds();
        x >= lo && x <= hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TernaryLabel {
    PoleA,
    PoleB,
    Neutral,
    Unclassified,
}

impl TernaryLabel {
    pub const ALL: [TernaryLabel; 4] = [
        TernaryLabel::PoleA,
        TernaryLabel::PoleB,
        TernaryLabel::Neutral,
        TernaryLabel::Unclassified,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TernaryLabel::PoleA => "pole_a",
            TernaryLabel::PoleB => "pole_b",
            TernaryLabel::Neutral => "neutral",
            TernaryLabel::Unclassified => "unclassified",
        }
    }

    /// The opposite pole; neutral and unclassified map to themselves.
    pub fn flipped(self) -> Self {
        match self {
            TernaryLabel::PoleA => TernaryLabel::PoleB,
            TernaryLabel::PoleB => TernaryLabel::PoleA,
            other => other,
        }
    }
}

impl fmt::Display for TernaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TernaryLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pole_a" => Ok(TernaryLabel::PoleA),
            "pole_b" => Ok(TernaryLabel::PoleB),
            "neutral" => Ok(TernaryLabel::Neutral),
            "unclassified" => Ok(TernaryLabel::Unclassified),
            other => Err(Error::InvalidArgument(format!("unknown label {other:?}"))),
        }
    }
}

/// Mean polarity of a tweet or tweet set; `value` is absent when no
/// labeled item contributed.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarityScore<T> {
    pub dimension: String,
    pub value: Option<T>,
    pub n_items: usize,
}

impl<T: Scalar> PolarityScore<T> {
    pub fn unclassified(dimension: impl Into<String>) -> Self {
        PolarityScore {
            dimension: dimension.into(),
            value: None,
            n_items: 0,
        }
    }

    /// Mean of `values`, or unclassified when empty.
    pub fn from_items(dimension: impl Into<String>, values: &[T]) -> Self {
        if values.is_empty() {
            return Self::unclassified(dimension);
        }
        PolarityScore {
            dimension: dimension.into(),
            value: Some(compensated_sum(values.iter().copied()) / T::from_count(values.len())),
            n_items: values.len(),
        }
    }
}

/// Which items of a tweet are looked up in the lexicon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemMode {
    /// Deduplicated hashtags.
    Hashtag,
    /// Every token occurrence.
    Token,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Pool all labeled item occurrences across the set.
    #[default]
    ByItem,
    /// Average the classified per-tweet values.
    ByTweet,
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "by_item" | "by-item" => Ok(Weighting::ByItem),
            "by_tweet" | "by-tweet" => Ok(Weighting::ByTweet),
            other => Err(Error::InvalidArgument(format!("unknown weighting {other:?}"))),
        }
    }
}

pub fn item_scores<T: Scalar>(tweet: &TokenizedTweet, lexicon: &PolarityLexicon<T>, mode: ItemMode) -> Vec<T> {
    let items = match mode {
        ItemMode::Hashtag => &tweet.hashtags,
        ItemMode::Token => &tweet.tokens,
    };
    items.iter().filter_map(|it| lexicon.score(it)).collect()
}

pub fn score_tweet<T: Scalar>(tweet: &TokenizedTweet, lexicon: &PolarityLexicon<T>, mode: ItemMode) -> PolarityScore<T> {
    PolarityScore::from_items(lexicon.dimension(), &item_scores(tweet, lexicon, mode))
}

pub fn score_tweets<T: Scalar>(
    tweets: &[TokenizedTweet],
    lexicon: &PolarityLexicon<T>,
    mode: ItemMode,
) -> BTreeMap<String, PolarityScore<T>> {
    tweets
        .iter()
        .map(|t| (t.tweet_id.clone(), score_tweet(t, lexicon, mode)))
        .collect()
}

/// Polarity of a set of tweets.
///
/// `ByItem` recovers each tweet's item sum as `value · n_items` and divides
/// the pooled sum by the pooled count. Unknown tweet ids are an error.
pub fn score_aggregate<'a, T: Scalar, I>(
    dimension: &str,
    tweet_ids: I,
    tweet_scores: &BTreeMap<String, PolarityScore<T>>,
    weighting: Weighting,
) -> Result<PolarityScore<T>>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut sums = Vec::new();
    let mut values = Vec::new();
    let mut n_items = 0usize;
    for id in tweet_ids {
        let score = tweet_scores
            .get(id)
            .ok_or_else(|| Error::InvalidArgument(format!("tweet {id:?} has no score")))?;
        if let Some(v) = score.value {
            sums.push(v * T::from_count(score.n_items));
            values.push(v);
            n_items += score.n_items;
        }
    }
    if n_items == 0 {
        return Ok(PolarityScore::unclassified(dimension));
    }
    let value = match weighting {
        Weighting::ByItem => compensated_sum(sums) / T::from_count(n_items),
        Weighting::ByTweet => compensated_sum(values.iter().copied()) / T::from_count(values.len()),
    };
    Ok(PolarityScore {
        dimension: dimension.to_string(),
        value: Some(value),
        n_items,
    })
}

/// Aggregates every group of tweet ids, e.g. the output of
/// [`crate::corpus::group_by_user_day`].
pub fn score_groups<K: Ord + Clone, T: Scalar>(
    dimension: &str,
    groups: &BTreeMap<K, Vec<String>>,
    tweet_scores: &BTreeMap<String, PolarityScore<T>>,
    weighting: Weighting,
) -> Result<BTreeMap<K, PolarityScore<T>>> {
    groups
        .iter()
        .map(|(k, ids)| {
            score_aggregate(dimension, ids.iter().map(String::as_str), tweet_scores, weighting).map(|s| (k.clone(), s))
        })
        .collect()
}

/// Tweet ids per author, in corpus order.
pub fn tweets_by_user(records: &[TweetRecord]) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in records {
        out.entry(r.user_id.clone()).or_default().push(r.tweet_id.clone());
    }
    out
}

/// Cut at the scale midpoint: strictly toward `value_a` is pole A,
/// strictly toward `value_b` is pole B, exactly the midpoint is neutral.
pub fn ternarize<T: Scalar>(score: &PolarityScore<T>, scale: &Scale<T>) -> TernaryLabel {
    let Some(v) = score.value else {
        return TernaryLabel::Unclassified;
    };
    let mid = scale.midpoint();
    let toward_a = if scale.value_a > scale.value_b { v > mid } else { v < mid };
    let toward_b = if scale.value_a > scale.value_b { v < mid } else { v > mid };
    if toward_a {
        TernaryLabel::PoleA
    } else if toward_b {
        TernaryLabel::PoleB
    } else {
        TernaryLabel::Neutral
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TallyRow<T> {
    pub dimension: String,
    pub class: TernaryLabel,
    pub users: usize,
    pub tweets: usize,
    /// `None` when there are no users at all.
    pub user_fraction: Option<T>,
    pub tweet_fraction: Option<T>,
}

impl<T: Scalar> TallyRow<T> {
    pub fn user_percent_display(&self) -> Option<i64> {
        self.user_fraction.map(|f| (f.as_f64() * 100.0).round() as i64)
    }

    pub fn tweet_percent_display(&self) -> Option<i64> {
        self.tweet_fraction.map(|f| (f.as_f64() * 100.0).round() as i64)
    }
}

/// Users and tweets per ternary class for one dimension. Returns no rows
/// when both inputs are empty.
pub fn overall_tally<T: Scalar>(
    dimension: &str,
    scale: &Scale<T>,
    user_scores: &BTreeMap<String, PolarityScore<T>>,
    tweet_scores: &BTreeMap<String, PolarityScore<T>>,
) -> Vec<TallyRow<T>> {
    if user_scores.is_empty() && tweet_scores.is_empty() {
        return Vec::new();
    }
    let count = |scores: &BTreeMap<String, PolarityScore<T>>| {
        let mut c: BTreeMap<TernaryLabel, usize> = BTreeMap::new();
        for s in scores.values() {
            *c.entry(ternarize(s, scale)).or_default() += 1;
        }
        c
    };
    let (users, tweets) = (count(user_scores), count(tweet_scores));
    let frac = |n: usize, total: usize| (total > 0).then(|| T::from_count(n) / T::from_count(total));
    TernaryLabel::ALL
        .iter()
        .map(|&class| {
            let u = users.get(&class).copied().unwrap_or(0);
            let t = tweets.get(&class).copied().unwrap_or(0);
            TallyRow {
                dimension: dimension.to_string(),
                class,
                users: u,
                tweets: t,
                user_fraction: frac(u, user_scores.len()),
                tweet_fraction: frac(t, tweet_scores.len()),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayStat<T> {
    pub date: NaiveDate,
    pub mean: Option<T>,
    /// Population standard deviation of the classified tweet values.
    pub std: Option<T>,
    pub n_classified: usize,
    pub n_unclassified: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries<T> {
    pub group_name: String,
    pub days: Vec<DayStat<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailySeriesOutput<T> {
    pub series: Vec<DailySeries<T>>,
    /// Membership entries whose user never appears in the corpus.
    pub unknown_members: usize,
}

/// Per group and UTC day, mean and population σ of classified per-tweet
/// values over the group's tweets. Every day between the corpus's first
/// and last day is emitted for every group.
pub fn daily_series<T: Scalar>(
    records: &[TweetRecord],
    tweet_scores: &BTreeMap<String, PolarityScore<T>>,
    membership: &BTreeMap<String, String>,
) -> DailySeriesOutput<T> {
    let authors: BTreeSet<&str> = records.iter().map(|r| r.user_id.as_str()).collect();
    let unknown_members = membership.keys().filter(|u| !authors.contains(u.as_str())).count();
    let groups: BTreeSet<&str> = membership.values().map(String::as_str).collect();

    let mut values: BTreeMap<(&str, NaiveDate), (Vec<T>, usize)> = BTreeMap::new();
    for r in records {
        let Some(group) = membership.get(&r.user_id) else {
            continue;
        };
        let slot = values.entry((group.as_str(), r.day())).or_default();
        match tweet_scores.get(&r.tweet_id).and_then(|s| s.value) {
            Some(v) => slot.0.push(v),
            None => slot.1 += 1,
        }
    }

    let days: Vec<NaiveDate> = match (records.iter().map(TweetRecord::day).min(), records.iter().map(TweetRecord::day).max()) {
        (Some(first), Some(last)) => first.iter_days().take_while(|d| *d <= last).collect(),
        _ => Vec::new(),
    };

    let series = groups
        .into_iter()
        .map(|group| DailySeries {
            group_name: group.to_string(),
            days: days
                .iter()
                .map(|&date| {
                    let (vals, unclassified) = values.get(&(group, date)).cloned().unwrap_or_default();
                    let (mean, std) = mean_and_population_std(&vals);
                    DayStat {
                        date,
                        mean,
                        std,
                        n_classified: vals.len(),
                        n_unclassified: unclassified,
                    }
                })
                .collect(),
        })
        .collect();
    DailySeriesOutput { series, unknown_members }
}

pub fn mean_and_population_std<T: Scalar>(values: &[T]) -> (Option<T>, Option<T>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = T::from_count(values.len());
    let mean = compensated_sum(values.iter().copied()) / n;
    let var = compensated_sum(values.iter().map(|&v| (v - mean) * (v - mean))) / n;
    (Some(mean), Some(var.sqrt()))
}

fn opt9<T: Scalar>(v: Option<T>) -> String {
    v.map(fmt9).unwrap_or_default()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidArgument(format!("{}: {other:?}", path.display())),
    }
}

/// Writes `tweet_id,dimension,value,n_items`; `value` is empty when unclassified.
pub fn write_tweet_scores<T: Scalar>(path: &Path, dimensions: &[&BTreeMap<String, PolarityScore<T>>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(tsv::create(path)?);
    w.write_record(["tweet_id", "dimension", "value", "n_items"]).map_err(|e| csv_err(path, e))?;
    for scores in dimensions {
        for (id, s) in scores.iter() {
            w.write_record([id.as_str(), &s.dimension, &opt9(s.value), &s.n_items.to_string()])
                .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `<key_name>,dimension,value,n_items,label`.
pub fn write_group_scores<T: Scalar>(
    path: &Path,
    key_name: &str,
    dimensions: &[(&Scale<T>, &BTreeMap<String, PolarityScore<T>>)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(tsv::create(path)?);
    w.write_record([key_name, "dimension", "value", "n_items", "label"]).map_err(|e| csv_err(path, e))?;
    for (scale, scores) in dimensions {
        for (key, s) in scores.iter() {
            w.write_record([
                key.as_str(),
                &s.dimension,
                &opt9(s.value),
                &s.n_items.to_string(),
                ternarize(s, scale).as_str(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Scores keyed by dimension then by row key, as read back from a scores CSV.
pub type ScoreTable<T> = BTreeMap<String, BTreeMap<String, PolarityScore<T>>>;

/// Reads either scores CSV (the optional trailing `label` column is ignored).
pub fn read_scores<T: Scalar>(path: &Path) -> Result<ScoreTable<T>> {
    let name = tsv::source_name(path);
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let mut out: ScoreTable<T> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(&name, line, e.to_string()))?;
        if rec.len() < 4 {
            return Err(Error::parse(&name, line, "expected at least 4 columns"));
        }
        let value = match &rec[2] {
            "" => None,
            v => Some(T::from_f64_lossy(
                v.parse::<f64>().map_err(|_| Error::parse(&name, line, format!("bad value {v:?}")))?,
            )),
        };
        let n_items: usize = rec[3]
            .parse()
            .map_err(|_| Error::parse(&name, line, format!("bad n_items {:?}", &rec[3])))?;
        if value.is_some() != (n_items > 0) {
            return Err(Error::parse(&name, line, "value must be present exactly when n_items > 0"));
        }
        out.entry(rec[1].to_string()).or_default().insert(
            rec[0].to_string(),
            PolarityScore {
                dimension: rec[1].to_string(),
                value,
                n_items,
            },
        );
    }
    Ok(out)
}

/// Reads the `label` column of a group-scores CSV: dimension → key → label.
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, BTreeMap<String, TernaryLabel>>> {
    let name = tsv::source_name(path);
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let mut out: BTreeMap<String, BTreeMap<String, TernaryLabel>> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(&name, line, e.to_string()))?;
        if rec.len() != 5 {
            return Err(Error::parse(&name, line, "expected 5 columns ending in label"));
        }
        let label: TernaryLabel = rec[4].parse().map_err(|e: Error| Error::parse(&name, line, e.to_string()))?;
        out.entry(rec[1].to_string()).or_default().insert(rec[0].to_string(), label);
    }
    Ok(out)
}

pub fn write_tally<T: Scalar>(path: &Path, rows: &[TallyRow<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(tsv::create(path)?);
    w.write_record(["dimension", "class", "users", "user_pct", "user_fraction", "tweets", "tweet_pct", "tweet_fraction"])
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        let pct = |p: Option<i64>| p.map(|p| p.to_string()).unwrap_or_default();
        w.write_record([
            r.dimension.as_str(),
            r.class.as_str(),
            &r.users.to_string(),
            &pct(r.user_percent_display()),
            &opt9(r.user_fraction),
            &r.tweets.to_string(),
            &pct(r.tweet_percent_display()),
            &opt9(r.tweet_fraction),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `dimension,group,date,mean,std,n,n_unclassified`.
pub fn write_daily_series<T: Scalar>(path: &Path, dimensions: &[(&str, &[DailySeries<T>])]) -> Result<()> {
    let mut w = csv::Writer::from_writer(tsv::create(path)?);
    w.write_record(["dimension", "group", "date", "mean", "std", "n", "n_unclassified"])
        .map_err(|e| csv_err(path, e))?;
    for (dimension, series) in dimensions {
        for s in series.iter() {
            for d in &s.days {
                w.write_record([
                    *dimension,
                    s.group_name.as_str(),
                    &d.date.format("%Y-%m-%d").to_string(),
                    &opt9(d.mean),
                    &opt9(d.std),
                    &d.n_classified.to_string(),
                    &d.n_unclassified.to_string(),
                ])
                .map_err(|e| csv_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a `user_id<TAB>group_name` membership file.
pub fn read_membership(path: &Path) -> Result<BTreeMap<String, String>> {
    let name = tsv::source_name(path);
    let mut out = BTreeMap::new();
    for (line_no, line) in tsv::open_lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut f = line.split('\t');
        let (Some(user), Some(group), None) = (f.next(), f.next(), f.next()) else {
            return Err(Error::parse(&name, line_no, "expected user_id<TAB>group_name"));
        };
        if user == "user_id" && group == "group_name" {
            continue;
        }
        out.insert(user.to_string(), group.to_string());
    }
    Ok(out)
}

/// Scores of every user-day key, keyed by [`UserDayKey::as_key`].
pub fn user_day_scores<T: Scalar>(
    dimension: &str,
    groups: &BTreeMap<UserDayKey, Vec<String>>,
    tweet_scores: &BTreeMap<String, PolarityScore<T>>,
    weighting: Weighting,
) -> Result<BTreeMap<String, PolarityScore<T>>> {
    Ok(score_groups(dimension, groups, tweet_scores, weighting)?
        .into_iter()
        .map(|(k, v)| (k.as_key(), v))
        .collect())
}
