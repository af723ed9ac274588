//! Command-line front end for the `polarprop` pipeline.
//!
//! Every subcommand reads its inputs from the configured paths and earlier
//! artifacts in `--out-dir`, writes its outputs there together with a
//! manifest, and removes its partial outputs if it fails.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use polarprop::lexgraph::GraphMode;
use polarprop::polarity::Weighting;

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{run, Command};
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] polarprop::Error),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for problems in the input data, 1 for usage, configuration and
    /// filesystem problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_data_error() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "polarprop", version, about = "Propagate polarity from seed hashtags to tweets, users and days")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArg,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum CommandArg {
    /// Tokenize the corpus into tokens.jsonl
    Ingest,
    /// Build the co-occurrence or embedding k-NN graph
    BuildGraph,
    /// Propagate each seed file over the graph into lexicon_<dimension>.tsv
    Propagate,
    /// Score tweets, users and user-days; write the overall tally
    Score,
    /// Daily mean and standard deviation per group
    Timeseries,
    /// Communication network exports, k-core and homophily
    Commnet,
    /// Compare user or user-day labels with a gold file
    Eval,
    /// Generate a synthetic corpus with ground truth
    Synth,
    /// ingest, build-graph, propagate, score, timeseries and commnet in order
    Pipeline,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Ingest => Command::Ingest,
            CommandArg::BuildGraph => Command::BuildGraph,
            CommandArg::Propagate => Command::Propagate,
            CommandArg::Score => Command::Score,
            CommandArg::Timeseries => Command::Timeseries,
            CommandArg::Commnet => Command::Commnet,
            CommandArg::Eval => Command::Eval,
            CommandArg::Synth => Command::Synth,
            CommandArg::Pipeline => Command::Pipeline,
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// TOML config file; defaults to $POLARPROP_CONFIG
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Seed lexicon, one per dimension; repeatable
    #[arg(long = "seed-file", global = true)]
    pub seed_files: Vec<PathBuf>,
    #[arg(long, global = true)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// user_id<TAB>group_name file for timeseries
    #[arg(long, global = true)]
    pub membership: Option<PathBuf>,
    #[arg(long, global = true)]
    pub gold: Option<PathBuf>,
    #[arg(long, global = true)]
    pub annotations: Option<PathBuf>,
    /// hashtag, token or embedding
    #[arg(long, global = true)]
    pub mode: Option<GraphMode>,
    #[arg(long, global = true)]
    pub gamma: Option<u64>,
    #[arg(long, global = true)]
    pub max_outer: Option<u64>,
    #[arg(long, global = true)]
    pub vocab_cap: Option<usize>,
    #[arg(long, global = true)]
    pub knn_k: Option<usize>,
    #[arg(long, global = true)]
    pub restart_prob: Option<f64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub kcore_k: Option<usize>,
    /// by_item or by_tweet
    #[arg(long, global = true)]
    pub weighting: Option<Weighting>,
    #[arg(long, global = true)]
    pub include_retweets: bool,
    #[arg(long, global = true)]
    pub drop_mentions: bool,
    /// graphml, dot or edge_csv; repeatable
    #[arg(long = "format", global = true)]
    pub formats: Vec<String>,
    /// Seed for synth
    #[arg(long, global = true)]
    pub rng_seed: Option<u64>,
}

impl Flags {
    /// Overrides every field of `cfg` that was given on the command line.
    pub fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.$field = Some(v.clone()); })*
            };
        }
        set!(corpus, embeddings, out_dir, membership, gold, annotations, max_outer);
        macro_rules! set_value {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        set_value!(mode, gamma, vocab_cap, knn_k, restart_prob, tol, max_iter, kcore_k, weighting);
        if !self.seed_files.is_empty() {
            cfg.seed_files = self.seed_files.clone();
        }
        if !self.formats.is_empty() {
            cfg.formats = self.formats.clone();
        }
        cfg.include_retweets |= self.include_retweets;
        cfg.drop_mentions |= self.drop_mentions;
        if let Some(seed) = self.rng_seed {
            cfg.synth.rng_seed = seed;
        }
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn main_with_args<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = RunConfig::load(cli.flags.config.as_deref()).and_then(|mut cfg| {
        cli.flags.apply(&mut cfg);
        run(cli.command.into(), &cfg)
    });
    match result {
        Ok(written) => {
            if let Some(manifest) = written.last() {
                println!("{}", manifest.display());
            }
            0
        }
        Err(e) => {
            eprintln!("polarprop {}: error: {e}", Command::from(cli.command));
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("polarprop").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_config() {
        let cli = parse(&["propagate", "--gamma", "50", "--seed-file", "a.tsv", "--seed-file", "b.tsv", "--mode", "token"]);
        let mut cfg = RunConfig {
            gamma: 7,
            vocab_cap: 10,
            ..RunConfig::default()
        };
        cli.flags.apply(&mut cfg);
        assert_eq!(cfg.gamma, 50);
        assert_eq!(cfg.vocab_cap, 10);
        assert_eq!(cfg.mode, GraphMode::Token);
        assert_eq!(cfg.seed_files, vec![PathBuf::from("a.tsv"), PathBuf::from("b.tsv")]);
        assert!(matches!(cli.command, CommandArg::Propagate));
    }

    #[test]
    fn bad_flag_values_are_usage_errors() {
        assert_eq!(main_with_args(["polarprop", "score", "--weighting", "sideways"]), 1);
        assert_eq!(main_with_args(["polarprop", "frobnicate"]), 1);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        assert_eq!(CliError::Core(polarprop::Error::NoSeedsReachable).exit_code(), 2);
        assert_eq!(CliError::Core(polarprop::Error::InvalidSpec("x".into())).exit_code(), 1);
    }
}
