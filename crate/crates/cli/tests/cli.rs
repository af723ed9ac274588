use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn polarprop(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_polarprop"));
    cmd.args(args).env_remove("POLARPROP_CONFIG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic corpus with truth files under `<tmp>/synth`.
fn synth_fixture() -> (TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let synth = tmp.path().join("synth");
    let cfg = tmp.path().join("synth.toml");
    std::fs::write(&cfg, "[synth]\nn_users = 40\nn_tweets = 600\nhashtags_per_community = 30\n").unwrap();
    let out = polarprop(&["synth", "--config", s(&cfg), "--out-dir", s(&synth), "--rng-seed", "3"], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    (tmp, synth)
}

fn manifest(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn pipeline_writes_every_artifact_and_declares_it() {
    let (tmp, synth) = synth_fixture();
    let run = tmp.path().join("run");
    let out = polarprop(
        &[
            "pipeline",
            "--corpus",
            s(&synth.join("corpus.jsonl")),
            "--seed-file",
            s(&synth.join("seeds.tsv")),
            "--out-dir",
            s(&run),
            "--kcore-k",
            "2",
        ],
        &[],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let m = manifest(&run, "manifest.json");
    let declared: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|e| e["path"].as_str().unwrap()).collect();
    let mut on_disk: Vec<String> = std::fs::read_dir(&run)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    assert_eq!(declared, on_disk);
    for expected in [
        "tokens.jsonl",
        "graph_edges.tsv",
        "graph_nodes.tsv",
        "lexicon_synthetic.tsv",
        "tweet_scores.csv",
        "user_scores.csv",
        "user_day_scores.csv",
        "tally.csv",
        "daily_series.csv",
        "comm_graph.graphml",
        "comm_graph.dot",
        "comm_graph.csv",
        "comm_kcore.graphml",
        "homophily.csv",
    ] {
        assert!(declared.contains(&expected), "{expected} missing");
    }
    assert_eq!(m["config"]["kcore_k"], 2);
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    let hash = m["outputs"][0]["sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);

    // the truth files double as gold labels for eval
    let out = polarprop(&["eval", "--gold", s(&synth.join("users.tsv")), "--out-dir", s(&run)], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = std::fs::read_to_string(run.join("eval_poles.csv")).unwrap();
    for line in table.lines().skip(1) {
        let recall: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(recall >= 0.9, "{line}");
    }
}

#[test]
fn stages_run_one_by_one_match_the_pipeline() {
    let (tmp, synth) = synth_fixture();
    let corpus = synth.join("corpus.jsonl");
    let seeds = synth.join("seeds.tsv");
    let whole = tmp.path().join("whole");
    let staged = tmp.path().join("staged");
    let common = |dir: &Path| {
        vec![
            "--corpus".to_string(),
            s(&corpus).to_string(),
            "--seed-file".to_string(),
            s(&seeds).to_string(),
            "--out-dir".to_string(),
            s(dir).to_string(),
        ]
    };
    let run = |cmd: &str, dir: &Path| {
        let mut args = vec![cmd.to_string()];
        args.extend(common(dir));
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = polarprop(&args, &[]);
        assert!(out.status.success(), "{cmd}: {}", stderr(&out));
    };
    run("pipeline", &whole);
    for cmd in ["ingest", "build-graph", "propagate", "score", "timeseries", "commnet"] {
        run(cmd, &staged);
    }
    for name in ["lexicon_synthetic.tsv", "tweet_scores.csv", "user_scores.csv", "daily_series.csv", "comm_graph.graphml"] {
        assert_eq!(
            std::fs::read(whole.join(name)).unwrap(),
            std::fs::read(staged.join(name)).unwrap(),
            "{name}"
        );
    }
    assert!(staged.join("manifest-score.json").exists());
    let m = manifest(&staged, "manifest-score.json");
    let inputs: Vec<&str> = m["inputs"].as_array().unwrap().iter().map(|e| e["path"].as_str().unwrap()).collect();
    assert!(inputs.iter().any(|p| p.ends_with("tokens.jsonl")));
    assert!(inputs.iter().any(|p| p.ends_with("lexicon_synthetic.tsv")));
}

#[test]
fn propagate_without_seeds_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let out = polarprop(&["propagate", "--out-dir", s(tmp.path())], &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("seed_files") && err.contains("--seed-file"), "{err}");

    let missing = tmp.path().join("nope.tsv");
    let out = polarprop(&["propagate", "--out-dir", s(tmp.path()), "--seed-file", s(&missing)], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nope.tsv"), "{}", stderr(&out));
}

#[test]
fn data_errors_exit_2_and_leave_no_partial_outputs() {
    let (tmp, synth) = synth_fixture();
    let run = tmp.path().join("run");
    let seeds = tmp.path().join("foreign_seeds.tsv");
    std::fs::write(&seeds, "# dimension: other\n# value_a: 1\n# value_b: -1\nitem\tpole\nnotthere\tA\nalsonot\tB\n").unwrap();
    let out = polarprop(
        &["pipeline", "--corpus", s(&synth.join("corpus.jsonl")), "--seed-file", s(&seeds), "--out-dir", s(&run)],
        &[],
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("no seeds reachable"));
    let left: Vec<_> = std::fs::read_dir(&run).unwrap().collect();
    assert!(left.is_empty(), "{left:?}");

    let dup = tmp.path().join("dup.jsonl");
    let line = r##"{"tweet_id":"1","user_id":"u","timestamp":"2019-02-14T00:00:00Z","text":"#a"}"##;
    std::fs::write(&dup, format!("{line}\n{line}\n")).unwrap();
    let out = polarprop(&["ingest", "--corpus", s(&dup), "--out-dir", s(&run)], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("duplicate tweet_id"), "{}", stderr(&out));
}

#[test]
fn config_from_environment_and_flag_precedence() {
    let (tmp, synth) = synth_fixture();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "corpus = {:?}\nseed_files = [{:?}]\ngamma = 7\nweighting = \"by_tweet\"\nformats = [\"edge_csv\"]\nkcore_k = 0\n\n[scales.synthetic]\nvalue_a = 1.0\nvalue_b = 0.0\n",
            s(&synth.join("corpus.jsonl")),
            s(&synth.join("seeds.tsv"))
        ),
    )
    .unwrap();
    let run = tmp.path().join("run");
    let out = polarprop(&["pipeline", "--out-dir", s(&run), "--gamma", "50"], &[("POLARPROP_CONFIG", s(&cfg))]);
    assert!(out.status.success(), "{}", stderr(&out));
    let m = manifest(&run, "manifest.json");
    assert_eq!(m["config"]["gamma"], 50);
    assert_eq!(m["config"]["weighting"], "by_tweet");
    assert!(run.join("comm_graph.csv").exists());
    assert!(!run.join("comm_graph.graphml").exists());
    assert!(!run.join("comm_kcore.csv").exists());
    let lexicon = std::fs::read_to_string(run.join("lexicon_synthetic.tsv")).unwrap();
    assert!(lexicon.contains("# value_b: 0.000000000"));

    std::fs::write(&cfg, "gamma = \"lots\"\n").unwrap();
    let out = polarprop(&["ingest", "--out-dir", s(&run)], &[("POLARPROP_CONFIG", s(&cfg))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("run.toml"), "{}", stderr(&out));
}

#[test]
fn embedding_mode_uses_the_knn_graph() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus.jsonl");
    let rows = [
        ("1", "a", "good great fine"),
        ("2", "b", "bad awful poor"),
        ("3", "a", "great fine"),
        ("4", "b", "awful poor"),
    ];
    let text: String = rows
        .iter()
        .map(|(id, u, t)| format!(r#"{{"tweet_id":"{id}","user_id":"{u}","timestamp":"2019-02-14T10:00:00Z","text":"{t}"}}"#) + "\n")
        .collect();
    std::fs::write(&corpus, text).unwrap();
    let emb = tmp.path().join("emb.txt");
    std::fs::write(
        &emb,
        "good 1.0 0.1 0.0\ngreat 0.9 0.2 0.0\nfine 0.8 0.3 0.1\nbad -1.0 0.1 0.0\nawful -0.9 0.2 0.0\npoor -0.8 0.3 0.1\n",
    )
    .unwrap();
    let seeds = tmp.path().join("seeds.tsv");
    std::fs::write(&seeds, "# dimension: sentiment\n# value_a: 1\n# value_b: -1\ngood\tA\nbad\tB\n").unwrap();
    let run = tmp.path().join("run");
    let out = polarprop(
        &[
            "pipeline",
            "--mode",
            "embedding",
            "--knn-k",
            "2",
            "--embeddings",
            s(&emb),
            "--corpus",
            s(&corpus),
            "--seed-file",
            s(&seeds),
            "--out-dir",
            s(&run),
            "--kcore-k",
            "1",
        ],
        &[],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let users = std::fs::read_to_string(run.join("user_scores.csv")).unwrap();
    assert!(users.lines().any(|l| l.starts_with("a,sentiment,") && l.ends_with(",pole_a")), "{users}");
    assert!(users.lines().any(|l| l.starts_with("b,sentiment,") && l.ends_with(",pole_b")), "{users}");

    let out = polarprop(&["build-graph", "--mode", "embedding", "--out-dir", s(&run)], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("embeddings"));
}

#[test]
fn timeseries_uses_membership_groups() {
    let (tmp, synth) = synth_fixture();
    let run = tmp.path().join("run");
    let out = polarprop(
        &["pipeline", "--corpus", s(&synth.join("corpus.jsonl")), "--seed-file", s(&synth.join("seeds.tsv")), "--out-dir", s(&run)],
        &[],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let membership = tmp.path().join("groups.tsv");
    let users = std::fs::read_to_string(synth.join("users.tsv")).unwrap();
    let rows: String = users
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("key"))
        .map(|l| l.replace("\tpole_a", "\tgroup_a").replace("\tpole_b", "\tgroup_b") + "\n")
        .collect();
    std::fs::write(&membership, format!("user_id\tgroup_name\n{rows}")).unwrap();
    let out = polarprop(
        &["timeseries", "--corpus", s(&synth.join("corpus.jsonl")), "--membership", s(&membership), "--out-dir", s(&run)],
        &[],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let series = std::fs::read_to_string(run.join("daily_series.csv")).unwrap();
    assert_eq!(series.lines().next(), Some("dimension,group,date,mean,std,n,n_unclassified"));
    // two groups over the fourteen-day window
    assert_eq!(series.lines().count(), 1 + 2 * 14);
    assert!(series.contains(",group_a,2019-02-14,"));
}
