use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use polarprop::lexgraph::GraphMode;
use polarprop::polarity::Weighting;
use polarprop::synthgen::SynthSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming a default config file.
pub const CONFIG_ENV: &str = "POLARPROP_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleOverride {
    pub value_a: f64,
    pub value_b: f64,
}

/// Everything a run can be configured with. Loaded from TOML, then
/// overridden field by field from command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub seed_files: Vec<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub membership: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub mode: GraphMode,
    pub gamma: u64,
    /// Upper bound on counted greedy passes; unbounded when absent.
    pub max_outer: Option<u64>,
    pub vocab_cap: usize,
    pub knn_k: usize,
    pub restart_prob: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub kcore_k: usize,
    pub weighting: Weighting,
    pub include_retweets: bool,
    /// Leave mentions out of the communication network.
    pub drop_mentions: bool,
    pub formats: Vec<String>,
    /// Per-dimension endpoint values replacing those in the seed files.
    pub scales: BTreeMap<String, ScaleOverride>,
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            seed_files: Vec::new(),
            embeddings: None,
            out_dir: None,
            membership: None,
            gold: None,
            annotations: None,
            mode: GraphMode::Hashtag,
            gamma: polarprop::proplabel::DEFAULT_GAMMA,
            max_outer: None,
            vocab_cap: 50_000,
            knn_k: 10,
            restart_prob: 0.15,
            tol: 1e-8,
            max_iter: 1000,
            kcore_k: 30,
            weighting: Weighting::ByItem,
            include_retweets: false,
            drop_mentions: false,
            formats: vec!["graphml".into(), "dot".into(), "edge_csv".into()],
            scales: BTreeMap::new(),
            synth: SynthSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {}", origin.display(), e.message())))
    }

    /// Reads `explicit` if given, else the file named by `POLARPROP_CONFIG`,
    /// else returns defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Self, CliError> {
        let from_env = std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        let Some(path) = explicit.map(Path::to_path_buf).or(from_env) else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("config file {}: {e}", path.display())))?;
        Self::from_toml(&text, &path)
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.out_dir.as_deref().ok_or_else(|| missing("out_dir", "--out-dir"))
    }

    pub fn corpus(&self) -> Result<&Path, CliError> {
        self.corpus.as_deref().ok_or_else(|| missing("corpus", "--corpus"))
    }

    /// Range checks that do not depend on the subcommand.
    pub fn validate_numbers(&self) -> Result<(), CliError> {
        let field = |name: &str, msg: &str| Err(CliError::Config(format!("config field `{name}`: {msg}")));
        if self.gamma == 0 {
            return field("gamma", "must be at least 1");
        }
        if self.max_outer == Some(0) {
            return field("max_outer", "must be at least 1");
        }
        if self.vocab_cap == 0 {
            return field("vocab_cap", "must be at least 1");
        }
        if self.knn_k == 0 {
            return field("knn_k", "must be at least 1");
        }
        if !(self.restart_prob > 0.0 && self.restart_prob < 1.0) {
            return field("restart_prob", "must lie strictly between 0 and 1");
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return field("tol", "must be positive");
        }
        if self.max_iter == 0 {
            return field("max_iter", "must be at least 1");
        }
        for f in &self.formats {
            if f.parse::<polarprop::commnet::ExportFormat>().is_err() {
                return field("formats", &format!("unknown format {f:?}"));
            }
        }
        for (dim, s) in &self.scales {
            if !(s.value_a.is_finite() && s.value_b.is_finite()) || s.value_a == s.value_b {
                return field(&format!("scales.{dim}"), "values must be finite and distinct");
            }
        }
        Ok(())
    }
}

pub(crate) fn missing(field: &str, flag: &str) -> CliError {
    CliError::Config(format!("config field `{field}` is required (set it in the config file or pass {flag})"))
}

/// Fails with the field name when an input path is absent on disk.
pub(crate) fn require_file(field: &str, path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("config field `{field}`: {} does not exist", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn toml_echo_reads_back(
            gamma in 1u64..1000,
            vocab_cap in 1usize..100_000,
            restart_prob in 0.01f64..0.99,
            by_tweet in any::<bool>(),
            max_outer in proptest::option::of(1u64..1_000_000),
            seed in any::<u32>(),
        ) {
            let mut cfg = RunConfig {
                gamma,
                vocab_cap,
                restart_prob,
                max_outer,
                weighting: if by_tweet { Weighting::ByTweet } else { Weighting::ByItem },
                corpus: Some(PathBuf::from("data/tweets.jsonl")),
                ..RunConfig::default()
            };
            cfg.synth.rng_seed = u64::from(seed);
            cfg.scales.insert("x".into(), ScaleOverride { value_a: 1.0, value_b: 0.0 });
            let text = toml::to_string(&cfg).unwrap();
            prop_assert_eq!(RunConfig::from_toml(&text, Path::new("echo.toml")).unwrap(), cfg);
        }
    }

    #[test]
    fn toml_fields_and_defaults() {
        let cfg = RunConfig::from_toml(
            r#"
corpus = "tweets.jsonl"
seed_files = ["a.tsv", "b.tsv"]
gamma = 50
weighting = "by_tweet"
mode = "token"

[scales.india_pakistan]
value_a = 1.0
value_b = 0.0

[synth]
n_users = 20
n_tweets = 100
"#,
            Path::new("run.toml"),
        )
        .unwrap();
        assert_eq!(cfg.gamma, 50);
        assert_eq!(cfg.mode, GraphMode::Token);
        assert_eq!(cfg.weighting, Weighting::ByTweet);
        assert_eq!(cfg.seed_files.len(), 2);
        assert_eq!(cfg.scales["india_pakistan"].value_b, 0.0);
        assert_eq!(cfg.synth.n_users, 20);
        assert_eq!(cfg.synth.hashtags_per_community, 100);
        assert_eq!(cfg.vocab_cap, 50_000);
        cfg.validate_numbers().unwrap();
    }

    #[test]
    fn unknown_and_bad_fields_are_named() {
        let err = RunConfig::from_toml("gamam = 3", Path::new("x.toml")).unwrap_err();
        assert!(err.to_string().contains("gamam"), "{err}");
        let cfg = RunConfig {
            restart_prob: 1.0,
            ..RunConfig::default()
        };
        assert!(cfg.validate_numbers().unwrap_err().to_string().contains("restart_prob"));
        let cfg = RunConfig {
            gamma: 0,
            ..RunConfig::default()
        };
        assert!(cfg.validate_numbers().unwrap_err().to_string().contains("`gamma`"));
    }
}
