use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use polarprop::commnet::{build_comm_graph, export_graph, homophily_index, k_core, DimensionScores, ExportFormat};
use polarprop::corpus::{self, group_by_user_day, load_corpus, load_tokenized, tokenize_all, write_tokenized};
use polarprop::evalkit::{self, AnnotationTable, EvalUnit, GoldLabelSet};
use polarprop::lexgraph::{build_cooccurrence, build_knn_graph, load_embeddings, GraphMode};
use polarprop::polarity::{
    self, overall_tally, read_scores, score_groups, score_tweets, tweets_by_user, user_day_scores, ItemMode,
};
use polarprop::proplabel::{propagate_greedy, propagate_random_walk, RandomWalkConfig};
use polarprop::scalar::fmt9;
use polarprop::synthgen;
use polarprop::{CommGraph, CooccurrenceGraph, PolarityLexicon, SeedLexicon, TweetRecord};
use rayon::prelude::*;

use crate::config::{missing, require_file, RunConfig};
use crate::manifest::RunFiles;
use crate::CliError;

pub const TOKENS: &str = "tokens.jsonl";
pub const GRAPH_EDGES: &str = "graph_edges.tsv";
pub const GRAPH_NODES: &str = "graph_nodes.tsv";
pub const TWEET_SCORES: &str = "tweet_scores.csv";
pub const USER_SCORES: &str = "user_scores.csv";
pub const USER_DAY_SCORES: &str = "user_day_scores.csv";
pub const TALLY: &str = "tally.csv";
pub const DAILY_SERIES: &str = "daily_series.csv";
pub const HOMOPHILY: &str = "homophily.csv";
pub const EVAL_POLES: &str = "eval_poles.csv";
pub const EVAL_AGREEMENT: &str = "eval_agreement.csv";
pub const SYNTH_CORPUS: &str = "corpus.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    BuildGraph,
    Propagate,
    Score,
    Timeseries,
    Commnet,
    Eval,
    Synth,
    Pipeline,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::BuildGraph => "build-graph",
            Command::Propagate => "propagate",
            Command::Score => "score",
            Command::Timeseries => "timeseries",
            Command::Commnet => "commnet",
            Command::Eval => "eval",
            Command::Synth => "synth",
            Command::Pipeline => "pipeline",
        }
    }

    /// `manifest.json` for full pipeline runs, `manifest-<command>.json`
    /// for single stages so they do not overwrite each other.
    pub fn manifest_name(&self) -> String {
        match self {
            Command::Pipeline => "manifest.json".to_string(),
            other => format!("manifest-{}.json", other.name()),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn lexicon_file(dimension: &str) -> String {
    format!("lexicon_{dimension}.tsv")
}

fn check_inputs(command: Command, cfg: &RunConfig) -> Result<(), CliError> {
    use Command::*;
    cfg.out_dir()?;
    let needs_corpus = matches!(command, Ingest | Score | Timeseries | Commnet | Pipeline);
    if needs_corpus {
        require_file("corpus", cfg.corpus()?)?;
    }
    if matches!(command, BuildGraph | Pipeline) && cfg.mode == GraphMode::Embedding {
        let path = cfg.embeddings.as_deref().ok_or_else(|| missing("embeddings", "--embeddings"))?;
        require_file("embeddings", path)?;
    }
    if matches!(command, Propagate | Pipeline) && cfg.seed_files.is_empty() {
        return Err(missing("seed_files", "--seed-file"));
    }
    for path in &cfg.seed_files {
        require_file("seed_files", path)?;
    }
    if let Some(p) = &cfg.membership {
        require_file("membership", p)?;
    }
    if command == Eval {
        require_file("gold", cfg.gold.as_deref().ok_or_else(|| missing("gold", "--gold"))?)?;
    }
    if let Some(p) = &cfg.annotations {
        require_file("annotations", p)?;
    }
    Ok(())
}

/// Runs one subcommand and returns every file it wrote, manifest last.
/// On failure the files written so far are removed.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate_numbers()?;
    check_inputs(command, cfg)?;
    let out_dir = cfg.out_dir()?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut files = RunFiles::new(out_dir);
    let result = run_stages(command, cfg, &mut files)
        .and_then(|()| files.write_manifest(&command.manifest_name(), command.name(), cfg));
    match result {
        Ok(manifest) => {
            let mut written = files.outputs().to_vec();
            written.push(manifest);
            Ok(written)
        }
        Err(e) => {
            files.remove_outputs();
            Err(e)
        }
    }
}

fn run_stages(command: Command, cfg: &RunConfig, files: &mut RunFiles) -> Result<(), CliError> {
    match command {
        Command::Ingest => ingest(cfg, files),
        Command::BuildGraph => build_graph(cfg, files),
        Command::Propagate => propagate(cfg, files),
        Command::Score => score(cfg, files),
        Command::Timeseries => timeseries(cfg, files),
        Command::Commnet => commnet(cfg, files),
        Command::Eval => eval(cfg, files),
        Command::Synth => synth(cfg, files),
        Command::Pipeline => {
            ingest(cfg, files)?;
            build_graph(cfg, files)?;
            propagate(cfg, files)?;
            score(cfg, files)?;
            timeseries(cfg, files)?;
            commnet(cfg, files)
        }
    }
}

/// Corpus as scored: retweets dropped unless configured otherwise.
fn scored_records(cfg: &RunConfig, files: &mut RunFiles) -> Result<Vec<TweetRecord>, CliError> {
    let path = files.input(cfg.corpus()?);
    let records = load_corpus(&path)?;
    Ok(if cfg.include_retweets {
        records
    } else {
        corpus::drop_retweets(records)
    })
}

pub fn ingest(cfg: &RunConfig, files: &mut RunFiles) -> Result<(), CliError> {
    let records = scored_records(cfg, files)?;
    let tokens = tokenize_all(&records);
    write_tokenized(&tokens, &files.output(TOKENS))?;
    Ok(())
}

pub fn build_graph(cfg: &RunConfig, files: &mut RunFiles) -> Result<(), CliError> {
    let graph: CooccurrenceGraph = match cfg.mode {
        GraphMode::Hashtag | GraphMode::Token => {
            let tokens = load_tokenized(&files.artifact_input(TOKENS))?;
            build_cooccurrence(&tokens, cfg.mode, cfg.vocab_cap)?
        }
        GraphMode::Embedding => {
            let path = files.input(cfg.embeddings.as_deref().ok_or_else(|| missing("embeddings", "--embeddings"))?);
            let table = load_embeddings(&path, cfg.vocab_cap)?;
            let knn = build_knn_graph(&table, cfg.knn_k)?;
            if knn.dropped_zero_vectors > 0 {
                eprintln!("note: skipped {} zero-length embedding vectors", knn.dropped_zero_vectors);
            }
            knn.graph
        }
    };
    let edges = files.output(GRAPH_EDGES);
    let nodes = files.output(GRAPH_NODES);
    graph.write_tsv(&edges, &nodes)?;
    Ok(())
}

fn check_dimension_name(dim: &str) -> Result<(), CliError> {
    let ok = !dim.is_empty() && dim.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "dimension name {dim:?} must be non-empty ASCII letters, digits, '_', '-' or '.'"
        )))
    }
}

fn read_seed_lexicons(cfg: &RunConfig, files: &mut RunFiles) -> Result<Vec<SeedLexicon>, CliError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for path in &cfg.seed_files {
        let path = files.input(path);
        let mut seeds = SeedLexicon::read(&path)?;
        check_dimension_name(seeds.dimension())?;
        if !seen.insert(seeds.dimension().to_string()) {
            return Err(CliError::Config(format!(
                "config field `seed_files`: dimension {:?} appears twice",
                seeds.dimension()
            )));
        }
        if let Some(s) = cfg.scales.get(seeds.dimension()) {
            seeds = seeds.with_values(s.value_a, s.value_b)?;
        }
        out.push(seeds);
    }
    Ok(out)
}

pub fn propagate(cfg: &RunConfig, files: &mut RunFiles) -> Result<(), CliError> {
    let edges = files.artifact_input(GRAPH_EDGES);
    let nodes = files.artifact_input(GRAPH_NODES);
    let graph = CooccurrenceGraph::read_tsv(&edges, &nodes)?;
    let seeds = read_seed_lexicons(cfg, files)?;
    let walk = RandomWalkConfig {
        restart_prob: cfg.restart_prob,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
    };
    let lexicons: Vec<PolarityLexicon> = seeds
        .par_iter()
        .map(|s| match graph.mode() {
            GraphMode::Embedding => propagate_random_walk(&graph, s, &walk),
            _ => propagate_greedy(&graph, s, cfg.gamma, cfg.max_outer.unwrap_or(u64::MAX)),
        })
        .collect::<polarprop::Result<_>>()?;
    for lex in &lexicons {
        lex.write(&files.output(&lexicon_file(lex.dimension())))?;
    }
    Ok(())
}

/// Lexicons for the configured seed files, or every `lexicon_*.tsv` in the
/// output directory when no seed files are configured.
fn read_lexicons(cfg: &RunConfig, files: &mut RunFiles) -> Result<Vec<PolarityLexicon>, CliError> {
    let names: Vec<String> = if cfg.seed_files.is_empty() {
        let dir = files.out_dir().to_path_buf();
        let mut names: Vec<String> = std::fs::read_dir(&dir)
            .map_err(|e| CliError::io(&dir, e))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n.starts_with("lexicon_") && n.ends_with(".tsv"))
            .collect();
        names.sort();
        names
    } else {
        read_seed_lexicons(cfg, files)?
            .iter()
            .map(|s| lexicon_file(s.dimension()))
            .collect()
    };
    if names.is_empty() {
        return Err(CliError::Config(format!(
            "no lexicon_*.tsv in {}; run propagate first or pass --seed-file",
            files.out_dir().display()
        )));
    }
    names
        .iter()
        .map(|n| Ok(PolarityLexicon::read(&files.artifact_input(n))?))
        .collect()
}

fn item_mode(mode: GraphMode) -> ItemMode {
    match mode {
        GraphMode::Hashtag => ItemMode::Hashtag,
        GraphMode::Token | GraphMode::Embedding => ItemMode::Token,
    }
}

pub fn score(cfg: &RunConfig, files: &mut RunFiles) -> Result<(), CliError> {
    let records = scored_records(cfg, files)?;
    let tokens = load_tokenized(&files.artifact_input(TOKENS))?;
    let token_ids: BTreeSet<&str> = tokens.iter().map(|t| t.tweet_id.as_str()).collect();
    let record_ids: BTreeSet<&str> = records.iter().map(|r| r.tweet_id.as_str()).collect();
    if token_ids != record_ids {
        return Err(CliError::Config(format!(
            "{TOKENS} does not cover the same tweets as the corpus; rerun ingest with the same include_retweets"
        )));
    }
    let lexicons = read_lexicons(cfg, files)?;
    let by_user = tweets_by_user(&records);
    let by_user_day = group_by_user_day(&records);
    let mode = item_mode(cfg.mode);

    let mut tweet_tables = Vec::new();
    let mut user_tables = Vec::new();
    let mut user_day_tables = Vec::new();
    let mut tally = Vec::new();
    for lex in &lexicons {
        let dim = lex.dimension();
        let tweets = score_tweets(&tokens, lex, mode);
        let users = score_groups(dim, &by_user, &tweets, cfg.weighting)?;
        let user_days = user_day_scores(dim, &by_user_day, &tweets, cfg.weighting)?;
        tally.extend(overall_tally(dim, &lex.scale(), &users, &tweets));
        tweet_tables.push(tweets);
        user_tables.push((lex.scale(), users));
        user_day_tables.push((lex.scale(), user_days));
    }
    let refs: Vec<_> = tweet_tables.iter().collect();
    polarity::write_tweet_scores(&files.output(TWEET_SCORES), &refs)?;
    let refs: Vec<_> = user_tables.iter().map(|(s, m)| (s, m)).collect();
    polarity::write_group_scores(&files.output(USER_SCORES), "user_id", &refs)?;
    let refs: Vec<_> = user_day_tables.iter().map(|(s, m)| (s, m)).collect();
    polarity::write_group_scores(&files.output(USER_DAY_SCORES), "user_day", &refs)?;
    polarity::write_tally(&files.output(TALLY), &tally)?;
    Ok(())
}

pub fn timeseries(cfg: &RunConfig, files: &mut RunFiles) -> Result<(), CliError> {
    let records = scored_records(cfg, files)?;
    let table = read_scores::<f64>(&files.artifact_input(TWEET_SCORES))?;
    let membership: BTreeMap<String, String> = match &cfg.membership {
        Some(p) => polarity::read_membership(&files.input(p))?,
        None => records.iter().map(|r| (r.user_id.clone(), "all".to_string())).collect(),
    };
    let mut per_dim = Vec::new();
    for (dim, scores) in &table {
        let out = polarity::daily_series(&records, scores, &membership);
        if out.unknown_members > 0 {
            eprintln!("note: {} membership users have no tweets in the corpus", out.unknown_members);
        }
        per_dim.push((dim.as_str(), out.series));
    }
    let refs: Vec<(&str, &[polarprop::DailySeries])> = per_dim.iter().map(|(d, s)| (*d, s.as_slice())).collect();
    polarity::write_daily_series(&files.output(DAILY_SERIES), &refs)?;
    Ok(())
}

fn homophily_rows(name: &str, graph: &CommGraph, out: &mut String) -> Result<(), CliError> {
    for dim in graph.dimensions() {
        let value = match homophily_index(graph, dim) {
            Ok(h) => fmt9(h),
            Err(polarprop::Error::NoClassifiedEdges) => String::new(),
            Err(e) => return Err(e.into()),
        };
        out.push_str(&format!("{name},{dim},{},{},{value}\n", graph.node_count(), graph.edge_count()));
    }
    Ok(())
}

pub fn commnet(cfg: &RunConfig, files: &mut RunFiles) -> Result<(), CliError> {
    // the network keeps retweets: they are interactions even when not scored
    let path = files.input(cfg.corpus()?);
    let mut records = load_corpus(&path)?;
    if cfg.drop_mentions {
        for r in &mut records {
            r.mentions.clear();
        }
    }
    let lexicons = read_lexicons(cfg, files)?;
    let mut table = read_scores::<f64>(&files.artifact_input(USER_SCORES))?;
    let dims: Vec<DimensionScores<f64>> = lexicons
        .iter()
        .map(|lex| DimensionScores {
            dimension: lex.dimension().to_string(),
            scale: lex.scale(),
            scores: table.remove(lex.dimension()).unwrap_or_default(),
        })
        .collect();
    let graph = build_comm_graph(&records, &dims);
    let formats: Vec<ExportFormat> = cfg.formats.iter().map(|f| f.parse()).collect::<polarprop::Result<_>>()?;

    let mut homophily = String::from("graph,dimension,nodes,edges,homophily\n");
    for f in &formats {
        export_graph(&graph, &files.output(&format!("comm_graph.{}", f.extension())), *f)?;
    }
    homophily_rows("full", &graph, &mut homophily)?;
    if cfg.kcore_k > 0 {
        let core = k_core(&graph, cfg.kcore_k);
        for f in &formats {
            export_graph(&core, &files.output(&format!("comm_kcore.{}", f.extension())), *f)?;
        }
        homophily_rows(&format!("kcore_{}", cfg.kcore_k), &core, &mut homophily)?;
    }
    write_text(&files.output(HOMOPHILY), &homophily)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn eval(cfg: &RunConfig, files: &mut RunFiles) -> Result<(), CliError> {
    let gold_path = files.input(cfg.gold.as_deref().ok_or_else(|| missing("gold", "--gold"))?);
    let gold = GoldLabelSet::read(&gold_path)?;
    let predictions_file = match gold.unit {
        EvalUnit::Account => USER_SCORES,
        EvalUnit::UserDay => USER_DAY_SCORES,
    };
    let labels = polarity::read_labels(&files.artifact_input(predictions_file))?;
    if labels.is_empty() {
        return Err(CliError::Config(format!("{predictions_file} holds no predictions")));
    }
    let annotations = match &cfg.annotations {
        Some(p) => Some(AnnotationTable::read(&files.input(p))?),
        None => None,
    };
    let reports = labels
        .iter()
        .map(|(dim, preds)| evalkit::evaluate(dim, preds, &gold, annotations.as_ref()))
        .collect::<polarprop::Result<Vec<polarprop::EvalReport>>>()?;
    write_text(&files.output(EVAL_POLES), &evalkit::pole_table_csv(&reports))?;
    write_text(&files.output(EVAL_AGREEMENT), &evalkit::agreement_table_csv(&reports))
}

pub fn synth(cfg: &RunConfig, files: &mut RunFiles) -> Result<(), CliError> {
    let corpus = synthgen::generate::<f64>(&cfg.synth)?;
    corpus::write_corpus(&corpus.records, &files.output(SYNTH_CORPUS))?;
    for name in ["users.tsv", "hashtags.tsv", "seeds.tsv", "bookkeeping.json"] {
        files.output(name);
    }
    corpus.truth.write(files.out_dir())?;
    Ok(())
}
