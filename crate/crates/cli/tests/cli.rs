use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rxfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rxfuse")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/resolver")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Copy of the warmed cache so tests never append to the committed file.
fn warm_cache(dir: &Path) -> PathBuf {
    let p = dir.join("cache.jsonl");
    std::fs::copy(fixtures().join("warmed_cache.jsonl"), &p).unwrap();
    p
}

#[test]
fn resolve_table2_offline_from_warm_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = warm_cache(dir.path());
    let out = dir.path().join("out");
    let o = rxfuse(&["resolve", "--prescriptions", s(&fixtures().join("table2_prescriptions.csv")), "--cache", s(&cache), "--out", s(&out), "--offline"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let resolved = read(&out.join("resolved_drugs.csv"));
    assert_eq!(resolved.lines().count(), 5);
    assert!(resolved.lines().skip(1).all(|l| l.ends_with("generic_name")), "{resolved}");
    assert_eq!(read(&out.join("unresolved.csv")).lines().count(), 1);
    assert!(out.join("run_manifest.json").exists());
    // nothing new was learned, so nothing was appended
    assert_eq!(read(&cache), read(&fixtures().join("warmed_cache.jsonl")));
}

#[test]
fn resolve_unknown_drug_offline_lands_in_unresolved() {
    let dir = tempfile::tempdir().unwrap();
    let rx = dir.path().join("rx.csv");
    std::fs::write(&rx, "patient_id,order_index,drug_name,generic_name,ndc\np1,0,Zorblax,Zorblax Hydrochloride,\n").unwrap();
    let out = dir.path().join("out");
    let o = rxfuse(&["resolve", "--prescriptions", s(&rx), "--cache", s(&dir.path().join("c.jsonl")), "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(read(&out.join("resolved_drugs.csv")).lines().count(), 1);
    let un = read(&out.join("unresolved.csv"));
    assert!(un.contains("Zorblax Hydrochloride"), "{un}");
}

#[test]
fn resolve_empty_input_gives_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let rx = dir.path().join("rx.csv");
    std::fs::write(&rx, "patient_id,order_index,drug_name,generic_name,ndc\n").unwrap();
    let out = dir.path().join("out");
    let o = rxfuse(&["resolve", "--prescriptions", s(&rx), "--cache", s(&dir.path().join("c.jsonl")), "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(read(&out.join("resolved_drugs.csv")).lines().count(), 1);
    assert_eq!(read(&out.join("unresolved.csv")).lines().count(), 1);
}

#[cfg(not(feature = "live"))]
#[test]
fn live_without_the_feature_is_a_network_policy_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = rxfuse(&["resolve", "--prescriptions", s(&fixtures().join("table2_prescriptions.csv")), "--cache", s(&dir.path().join("c.jsonl")), "--out", s(&dir.path().join("o")), "--live"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn malformed_prescriptions_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let rx = dir.path().join("rx.csv");
    std::fs::write(&rx, "patient,drug\np1,x\n").unwrap();
    let o = rxfuse(&["resolve", "--prescriptions", s(&rx), "--cache", s(&dir.path().join("c.jsonl")), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_flag_is_usage_error() {
    assert_eq!(code(&rxfuse(&["train"])), 2);
}

fn synth(dir: &Path, seed: &str) -> PathBuf {
    let out = dir.join(format!("synth_{seed}"));
    let o = rxfuse(&["synth", "--patients", "200", "--features", "3", "--seed", seed, "--table-width", "16", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "3");
    let b = dir.path().join("again");
    std::fs::rename(&a, &b).unwrap();
    let a = synth(dir.path(), "3");
    for f in ["timeseries.csv", "prescriptions.csv", "labels.csv", "resolver_cache.jsonl", "embedding_table.tsv", "synth_config.json"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
}

#[test]
fn embed_table_round_trip_and_unknown_smiles() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "1");
    let res = dir.path().join("res");
    let o = rxfuse(&["resolve", "--prescriptions", s(&data.join("prescriptions.csv")), "--cache", s(&data.join("resolver_cache.jsonl")), "--out", s(&res)]);
    assert_eq!(code(&o), 0);
    let emb = dir.path().join("emb");
    let table = data.join("embedding_table.tsv");
    let o = rxfuse(&["embed", "--resolved", s(&res.join("resolved_drugs.csv")), "--provider", "table", "--table", s(&table), "--out", s(&emb)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stored: std::collections::HashMap<String, String> = read(&table)
        .lines()
        .filter_map(|l| l.split_once('\t').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect();
    let written = read(&emb.join("embeddings.tsv"));
    assert!(written.lines().count() > 5);
    for line in written.lines() {
        let (k, v) = line.split_once('\t').unwrap();
        assert_eq!(stored.get(k).map(String::as_str), Some(v), "{k}");
    }

    let odd = dir.path().join("odd.csv");
    let header = read(&res.join("resolved_drugs.csv")).lines().next().unwrap().to_string();
    std::fs::write(&odd, format!("{header}\np1,0,C1CCCCCCCCCCC1,,generic_name\n")).unwrap();
    let o = rxfuse(&["embed", "--resolved", s(&odd), "--provider", "table", "--table", s(&table), "--out", s(&dir.path().join("e2"))]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

fn train_config(dir: &Path, data: &Path, res: &Path, mode: &str) -> PathBuf {
    let p = dir.join(format!("{mode}.toml"));
    std::fs::write(
        &p,
        format!(
            r#"repetitions = 2
[data]
timeseries = "{ts}"
labels = "{labels}"
resolved = "{resolved}"
split_seed = 5
[model]
task = "los_3"
mode = "{mode}"
hidden = 6
conv_filters = [4, 4, 4]
fc = [12, 6, 4]
epochs = 3
batch = 32
n_drugs = 12
k = 64
seed = 11
provider = {{ kind = "ecfp", radius = 2, nbits = 64 }}
"#,
            ts = s(&data.join("timeseries.csv")),
            labels = s(&data.join("labels.csv")),
            resolved = s(&res.join("resolved_drugs.csv")),
        ),
    )
    .unwrap();
    p
}

fn resolved_synth(dir: &Path) -> (PathBuf, PathBuf) {
    let data = synth(dir, "2");
    let res = dir.join("res");
    let o = rxfuse(&["resolve", "--prescriptions", s(&data.join("prescriptions.csv")), "--cache", s(&data.join("resolver_cache.jsonl")), "--out", s(&res)]);
    assert_eq!(code(&o), 0);
    (data, res)
}

#[test]
fn train_evaluate_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (data, res) = resolved_synth(dir.path());
    let cfg = train_config(dir.path(), &data, &res, "multimodal");

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = rxfuse(&["train", "--config", s(&cfg), "--out", s(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["metrics.json", "summary.json", "split.json", "runs/seed_11/weights.bin", "runs/seed_11/model.json", "runs/seed_12/history.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }

    let ev = dir.path().join("ev");
    let o = rxfuse(&[
        "evaluate", "--model", s(&a.join("runs/seed_11")), "--timeseries", s(&data.join("timeseries.csv")),
        "--labels", s(&data.join("labels.csv")), "--resolved", s(&res.join("resolved_drugs.csv")),
        "--split", s(&a.join("split.json")), "--subset", "train", "--out", s(&ev),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&read(&ev.join("metrics.json"))).unwrap();
    assert_eq!(m["evaluated_on_train"], true);
    assert_eq!(m["subset"], "train");

    let single = dir.path().join("single");
    let o = rxfuse(&["train", "--config", s(&cfg), "--out", s(&single), "--repetitions", "1"]);
    assert_eq!(code(&o), 0);
    let rep = dir.path().join("rep");
    let o = rxfuse(&["report", s(&a), s(&single), "--out", s(&rep)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&rep.join("report.txt"));
    assert!(text.contains("single run"), "{text}");
    assert_eq!(read(&rep.join("report.csv")).lines().count(), 3);
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "[data]\ntimeseries='a'\nlabels='b'\nresolved='c'\n[model]\nhidden = 0\n").unwrap();
    let o = rxfuse(&["train", "--config", s(&p), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}
