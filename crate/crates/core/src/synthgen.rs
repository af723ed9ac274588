//! Synthetic corpora with a planted two-community structure.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(rng_seed)` and is drawn
//! in a fixed order, so a spec and its seed fully determine the output.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TweetRecord;
use crate::error::{Error, Result};
use crate::evalkit::{EvalUnit, GoldLabel, GoldLabelSet};
use crate::proplabel::SeedLexicon;
use crate::scalar::Scalar;
use crate::tsv;

pub const SYNTH_DIMENSION: &str = "synthetic";

const FILLER: &[&str] = &[
    "today", "news", "people", "rally", "watch", "again", "time", "country", "vote", "speech", "strong", "city",
    "everyone", "tonight", "video", "live", "story", "week", "support", "voice",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_users: usize,
    pub n_tweets: usize,
    pub hashtags_per_community: usize,
    /// Fraction of each community's used hashtags that become seeds.
    pub seed_fraction: f64,
    /// Per hashtag slot: probability of drawing from the author's community.
    pub within_prob: f64,
    /// Per hashtag slot: probability of drawing from the other community.
    /// Slots left over after `within_prob + cross_prob` draw a neutral tag.
    pub cross_prob: f64,
    pub neutral_hashtags: usize,
    /// Probability that a tweet carries only neutral hashtags.
    pub neutral_tweet_prob: f64,
    pub days: u32,
    pub rng_seed: u64,
    pub retweet_prob: f64,
    pub mention_prob: f64,
    pub reply_prob: f64,
    /// Probability that an interaction targets the author's own community.
    pub interaction_homophily: f64,
}

impl SynthSpec {
    /// The planted-recovery configuration: 200 users, 5,000 tweets,
    /// 100 hashtags per community, 10% seeds, rng seed 7.
    pub fn acceptance() -> Self {
        SynthSpec {
            n_users: 200,
            n_tweets: 5000,
            hashtags_per_community: 100,
            seed_fraction: 0.10,
            within_prob: 0.95,
            cross_prob: 0.05,
            neutral_hashtags: 0,
            neutral_tweet_prob: 0.0,
            days: 14,
            rng_seed: 7,
            retweet_prob: 0.05,
            mention_prob: 0.2,
            reply_prob: 0.1,
            interaction_homophily: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        for (name, p) in [
            ("seed_fraction", self.seed_fraction),
            ("within_prob", self.within_prob),
            ("cross_prob", self.cross_prob),
            ("neutral_tweet_prob", self.neutral_tweet_prob),
            ("retweet_prob", self.retweet_prob),
            ("mention_prob", self.mention_prob),
            ("reply_prob", self.reply_prob),
            ("interaction_homophily", self.interaction_homophily),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        if self.seed_fraction == 0.0 {
            return bad("seed_fraction must be positive".into());
        }
        if self.within_prob + self.cross_prob > 1.0 + 1e-12 {
            return bad("within_prob + cross_prob exceeds 1".into());
        }
        if self.n_users < 2 {
            return bad("n_users must be at least 2".into());
        }
        if self.n_tweets < self.n_users {
            return bad(format!("n_tweets ({}) must be at least n_users ({})", self.n_tweets, self.n_users));
        }
        if self.hashtags_per_community == 0 {
            return bad("hashtags_per_community must be positive".into());
        }
        if self.days == 0 {
            return bad("days must be positive".into());
        }
        let needs_neutral = self.neutral_tweet_prob > 0.0 || self.within_prob + self.cross_prob < 1.0 - 1e-12;
        if needs_neutral && self.neutral_hashtags == 0 {
            return bad("neutral slots are possible but neutral_hashtags is 0".into());
        }
        Ok(())
    }
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self::acceptance()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Community {
    A,
    B,
}

impl Community {
    fn other(self) -> Self {
        match self {
            Community::A => Community::B,
            Community::B => Community::A,
        }
    }

    fn idx(self) -> usize {
        self as usize
    }

    fn gold(self) -> GoldLabel {
        match self {
            Community::A => GoldLabel::PoleA,
            Community::B => GoldLabel::PoleB,
        }
    }
}

/// Counts kept while generating, for checking against a scan of the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Bookkeeping {
    /// Users per community, `[A, B]`.
    pub community_sizes: [usize; 2],
    /// Tweets authored per community, `[A, B]`.
    pub community_tweets: [usize; 2],
    /// Tweets whose hashtags are all neutral.
    pub neutral_only_tweets: Vec<String>,
    pub retweets: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth<T> {
    pub users: GoldLabelSet,
    /// Community tags and neutral tags that appear in the corpus.
    pub hashtags: GoldLabelSet,
    pub seeds: SeedLexicon<T>,
    pub bookkeeping: Bookkeeping,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus<T> {
    pub records: Vec<TweetRecord>,
    pub truth: SynthTruth<T>,
}

fn tag_name(c: Option<Community>, i: usize) -> String {
    match c {
        Some(Community::A) => format!("alpha{i:03}"),
        Some(Community::B) => format!("beta{i:03}"),
        None => format!("neutral{i:03}"),
    }
}

fn window_start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2019, 2, 14, 0, 0, 0).unwrap()
}

fn pick_user(rng: &mut ChaCha8Rng, members: &[Vec<usize>; 2], c: Community, not: usize) -> Option<usize> {
    let pool = &members[c.idx()];
    if pool.len() < 2 && pool.first() == Some(&not) || pool.is_empty() {
        return None;
    }
    loop {
        let u = pool[rng.random_range(0..pool.len())];
        if u != not {
            return Some(u);
        }
    }
}

pub fn generate<T: Scalar>(spec: &SynthSpec) -> Result<SynthCorpus<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let width = spec.n_users.saturating_sub(1).to_string().len();
    let user_names: Vec<String> = (0..spec.n_users).map(|i| format!("u{i:0width$}")).collect();

    // u0 and u1 pin both communities non-empty
    let communities: Vec<Community> = (0..spec.n_users)
        .map(|i| match i {
            0 => Community::A,
            1 => Community::B,
            _ if rng.random_bool(0.5) => Community::A,
            _ => Community::B,
        })
        .collect();
    let mut members: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (u, c) in communities.iter().enumerate() {
        members[c.idx()].push(u);
    }

    let mut book = Bookkeeping {
        community_sizes: [members[0].len(), members[1].len()],
        ..Default::default()
    };
    let mut used: [BTreeSet<usize>; 2] = [BTreeSet::new(), BTreeSet::new()];
    let mut used_neutral = BTreeSet::new();
    let span_secs = i64::from(spec.days) * 86_400;
    let id_width = spec.n_tweets.saturating_sub(1).to_string().len();
    let mut records = Vec::with_capacity(spec.n_tweets);

    for t in 0..spec.n_tweets {
        let author = if t < spec.n_users { t } else { rng.random_range(0..spec.n_users) };
        let own = communities[author];
        book.community_tweets[own.idx()] += 1;
        let tweet_id = format!("t{t:0id_width$}");

        let n_tags = rng.random_range(1..=4usize);
        let neutral_only = spec.neutral_tweet_prob > 0.0 && rng.random_bool(spec.neutral_tweet_prob);
        let mut tags = Vec::with_capacity(n_tags);
        for _ in 0..n_tags {
            let source = if neutral_only {
                None
            } else {
                let r: f64 = rng.random();
                if r < spec.within_prob {
                    Some(own)
                } else if r < spec.within_prob + spec.cross_prob {
                    Some(own.other())
                } else if spec.neutral_hashtags > 0 {
                    None
                } else {
                    Some(own)
                }
            };
            let i = match source {
                Some(c) => {
                    let i = rng.random_range(0..spec.hashtags_per_community);
                    used[c.idx()].insert(i);
                    i
                }
                None => {
                    let i = rng.random_range(0..spec.neutral_hashtags);
                    used_neutral.insert(i);
                    i
                }
            };
            tags.push((source, i));
        }
        if tags.iter().all(|(c, _)| c.is_none()) {
            book.neutral_only_tweets.push(tweet_id.clone());
        }

        let n_words = rng.random_range(2..=5usize);
        let mut words: Vec<String> = (0..n_words)
            .map(|_| FILLER[rng.random_range(0..FILLER.len())].to_string())
            .collect();
        for (c, i) in &tags {
            let at = rng.random_range(0..=words.len());
            words.insert(at, format!("#{}", tag_name(*c, *i)));
        }

        // the first pass over users stays original so every user has a tweet
        let mut record = TweetRecord {
            tweet_id,
            user_id: user_names[author].clone(),
            timestamp: window_start() + Duration::seconds(rng.random_range(0..span_secs)),
            text: String::new(),
            is_retweet: false,
            retweet_of_user: None,
            mentions: Vec::new(),
            reply_to_user: None,
        };
        let target_community = |rng: &mut ChaCha8Rng| {
            if rng.random_bool(spec.interaction_homophily) {
                own
            } else {
                own.other()
            }
        };
        if t >= spec.n_users && rng.random_bool(spec.retweet_prob) {
            let c = target_community(&mut rng);
            if let Some(u) = pick_user(&mut rng, &members, c, author) {
                record.is_retweet = true;
                record.retweet_of_user = Some(user_names[u].clone());
                words.insert(0, format!("RT @{}:", user_names[u]));
                book.retweets += 1;
            }
        }
        if rng.random_bool(spec.mention_prob) {
            let c = target_community(&mut rng);
            if let Some(u) = pick_user(&mut rng, &members, c, author) {
                record.mentions.push(user_names[u].clone());
                words.push(format!("@{}", user_names[u]));
            }
        }
        if rng.random_bool(spec.reply_prob) {
            let c = target_community(&mut rng);
            if let Some(u) = pick_user(&mut rng, &members, c, author) {
                record.reply_to_user = Some(user_names[u].clone());
            }
        }
        record.text = words.join(" ");
        records.push(record);
    }

    let users = GoldLabelSet {
        unit: EvalUnit::Account,
        labels: user_names
            .iter()
            .zip(&communities)
            .map(|(n, c)| (n.clone(), c.gold()))
            .collect(),
        provenance: format!("synthgen community assignment, rng_seed {}", spec.rng_seed),
    };
    let mut hashtag_labels = BTreeMap::new();
    for c in [Community::A, Community::B] {
        for &i in &used[c.idx()] {
            hashtag_labels.insert(tag_name(Some(c), i), c.gold());
        }
    }
    for &i in &used_neutral {
        hashtag_labels.insert(tag_name(None, i), GoldLabel::Neutral);
    }
    let hashtags = GoldLabelSet {
        unit: EvalUnit::Account,
        labels: hashtag_labels,
        provenance: format!("synthgen hashtag communities, rng_seed {}", spec.rng_seed),
    };

    let n_seeds = ((spec.seed_fraction * spec.hashtags_per_community as f64).ceil() as usize).max(1);
    let seed_tags = |c: Community| -> Vec<String> {
        used[c.idx()].iter().take(n_seeds).map(|&i| tag_name(Some(c), i)).collect()
    };
    let seeds = SeedLexicon::new(SYNTH_DIMENSION, seed_tags(Community::A), seed_tags(Community::B), T::one(), -T::one())?;

    Ok(SynthCorpus {
        records,
        truth: SynthTruth {
            users,
            hashtags,
            seeds,
            bookkeeping: book,
        },
    })
}

impl<T: Scalar> SynthTruth<T> {
    /// Writes `users.tsv`, `hashtags.tsv`, `seeds.tsv` and `bookkeeping.json`
    /// into `dir` and returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        let users = dir.join("users.tsv");
        let hashtags = dir.join("hashtags.tsv");
        let seeds = dir.join("seeds.tsv");
        let book = dir.join("bookkeeping.json");
        self.users.write(&users)?;
        self.hashtags.write(&hashtags)?;
        self.seeds.write(&seeds)?;
        let json = serde_json::to_string_pretty(&self.bookkeeping).expect("bookkeeping serializes");
        tsv::write_all(&book, &(json + "\n"))?;
        Ok(vec![users, hashtags, seeds, book])
    }
}
