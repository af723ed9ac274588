//! Tweet records, JSONL ingestion and Unicode-aware tokenization.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, SubsecRound, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::error::{Error, Result};
use crate::tsv;

/// One message of the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub user_id: String,
    #[serde(
        serialize_with = "serialize_timestamp",
        deserialize_with = "deserialize_timestamp"
    )]
    pub timestamp: DateTime<Utc>,
    pub text: String,
    #[serde(default)]
    pub is_retweet: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweet_of_user: Option<String>,
    #[serde(default)]
    pub mentions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_to_user: Option<String>,
}

impl TweetRecord {
    pub fn day(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }
}

fn serialize_timestamp<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&ts.format("%Y-%m-%dT%H:%M:%SZ").to_string())
}

fn deserialize_timestamp<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
    let raw = String::deserialize(d)?;
    parse_timestamp(&raw).ok_or_else(|| serde::de::Error::custom(format!("invalid timestamp {raw:?}")))
}

/// Accepts RFC 3339 and offset-less ISO-8601 (read as UTC); truncates to seconds.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(raw) {
        return Some(ts.with_timezone(&Utc).trunc_subsecs(0));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(naive.and_utc().trunc_subsecs(0));
        }
    }
    None
}

/// Hashtags and tokens extracted from one record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedTweet {
    pub tweet_id: String,
    /// Normalized, deduplicated, in first-occurrence order.
    pub hashtags: Vec<String>,
    /// Every normalized occurrence, hashtags included.
    pub tokens: Vec<String>,
}

/// Calendar day of a user's activity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UserDayKey {
    pub user_id: String,
    pub day: NaiveDate,
}

impl UserDayKey {
    /// `user_id|YYYY-MM-DD`, the key format used in gold files.
    pub fn as_key(&self) -> String {
        format!("{}|{}", self.user_id, self.day.format("%Y-%m-%d"))
    }
}

/// Reads a JSONL corpus, preserving file order. Blank lines are skipped.
pub fn load_corpus(path: &Path) -> Result<Vec<TweetRecord>> {
    let name = tsv::source_name(path);
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (line_no, line) in tsv::open_lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TweetRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(&name, line_no, e.to_string()))?;
        if record.tweet_id.is_empty() {
            return Err(Error::parse(&name, line_no, "empty tweet_id"));
        }
        if record.user_id.is_empty() {
            return Err(Error::parse(&name, line_no, "empty user_id"));
        }
        if !seen.insert(record.tweet_id.clone()) {
            return Err(Error::DuplicateTweetId(record.tweet_id));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_corpus(records: &[TweetRecord], path: &Path) -> Result<()> {
    let mut w = tsv::create(path)?;
    for r in records {
        let line = serde_json::to_string(r).expect("tweet record serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Removes retweets, keeping original order.
pub fn drop_retweets(records: Vec<TweetRecord>) -> Vec<TweetRecord> {
    records.into_iter().filter(|r| !r.is_retweet).collect()
}

fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

fn strip_punctuation(s: &str) -> &str {
    s.trim_matches(is_punctuation)
}

fn is_url(lower: &str) -> bool {
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

enum Piece {
    Hashtag(String),
    Word(String),
}

fn classify(raw: &str) -> Option<Piece> {
    // '#' and '@' survive the leading trim so they can be recognized
    let lead = raw.trim_start_matches(|c: char| is_punctuation(c) && c != '#' && c != '@');
    let lead = lead.trim_end_matches(is_punctuation);
    if lead.starts_with('@') {
        return None;
    }
    if let Some(tag) = lead.strip_prefix('#') {
        let tag = strip_punctuation(tag).to_lowercase();
        return (!tag.is_empty() && !is_url(&tag)).then_some(Piece::Hashtag(tag));
    }
    let word = strip_punctuation(lead).to_lowercase();
    if word.is_empty() || is_url(&word) {
        return None;
    }
    Some(Piece::Word(word))
}

/// Normalizes a single already-split token the way [`tokenize`] would,
/// returning `None` for mentions, URLs and pure punctuation.
pub fn normalize_token(raw: &str) -> Option<String> {
    classify(raw).map(|p| match p {
        Piece::Hashtag(s) | Piece::Word(s) => s,
    })
}

pub fn tokenize(record: &TweetRecord) -> TokenizedTweet {
    let mut hashtags: Vec<String> = Vec::new();
    let mut tokens = Vec::new();
    for raw in record.text.split_whitespace() {
        match classify(raw) {
            Some(Piece::Hashtag(tag)) => {
                if !hashtags.contains(&tag) {
                    hashtags.push(tag.clone());
                }
                tokens.push(tag);
            }
            Some(Piece::Word(word)) => tokens.push(word),
            None => {}
        }
    }
    TokenizedTweet {
        tweet_id: record.tweet_id.clone(),
        hashtags,
        tokens,
    }
}

/// Tokenizes in parallel; output order matches input order.
pub fn tokenize_all(records: &[TweetRecord]) -> Vec<TokenizedTweet> {
    records.par_iter().map(tokenize).collect()
}

pub fn group_by_user_day(records: &[TweetRecord]) -> BTreeMap<UserDayKey, Vec<String>> {
    let mut groups: BTreeMap<UserDayKey, Vec<String>> = BTreeMap::new();
    for r in records {
        let key = UserDayKey {
            user_id: r.user_id.clone(),
            day: r.day(),
        };
        groups.entry(key).or_default().push(r.tweet_id.clone());
    }
    groups
}

/// Reads tokenized tweets written by [`write_tokenized`].
pub fn load_tokenized(path: &Path) -> Result<Vec<TokenizedTweet>> {
    let name = tsv::source_name(path);
    let mut out = Vec::new();
    for (line_no, line) in tsv::open_lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(&name, line_no, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_tokenized(tweets: &[TokenizedTweet], path: &Path) -> Result<()> {
    let mut w = tsv::create(path)?;
    for t in tweets {
        let line = serde_json::to_string(t).expect("tokenized tweet serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
