use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn cogpath(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cogpath"))
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_lines(path: &Path, values: &[Value]) {
    let text: String = values.iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(path, text).unwrap();
}

fn post_line(id: &str, text: &str) -> Value {
    json!({"id": id, "source": "reddit", "language": "en", "text": text})
}

fn annotation(post: &str, index: usize, text: &str, parent: &str, children: &[&str]) -> Value {
    json!({"post_id": post, "index": index, "text": text, "labels": [{"parent": parent, "children": children}]})
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Self { dir: tempfile::tempdir().unwrap() };
        write_lines(
            &f.path("post.jsonl"),
            &[post_line("p1", "My boss yelled at me. I am useless at everything. I could not sleep.")],
        );
        write_lines(
            &f.path("gold.jsonl"),
            &[
                annotation("p1", 0, "My boss yelled at me.", "A", &["study_and_work"]),
                annotation(
                    "p1",
                    1,
                    "I am useless at everything.",
                    "B",
                    &["over_generalization", "labeling_and_mislabeling"],
                ),
                annotation("p1", 2, "I could not sleep.", "C", &["behavioral_effect"]),
            ],
        );
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        cogpath(self.dir.path(), args)
    }

    fn read_lines(&self, name: &str) -> Vec<Value> {
        std::fs::read_to_string(self.path(name)).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
    }
}

#[test]
fn mock_extract_uses_fixture_labels() {
    let f = Fixture::new();
    let o = f.run(&["extract", "--backend", "mock", "--fixture", "gold.jsonl", "post.jsonl", "--out", "pathway.jsonl"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = f.read_lines("pathway.jsonl");
    assert_eq!(lines.len(), 1);
    let p = &lines[0]["pathway"];
    assert_eq!(p["A"]["composite"], "My boss yelled at me.");
    assert_eq!(p["B"]["member_indices"], json!([1]));
    assert_eq!(p["C"]["summary"], "I could not sleep.");
    assert!(p.get("D").is_none());
}

#[test]
fn classify_then_evaluate_is_perfect() {
    let f = Fixture::new();
    let o = f.run(&["classify", "post.jsonl", "--fixture", "gold.jsonl", "--out", "pred.jsonl"]);
    assert!(o.status.success());
    let o = f.run(&["eval-cls", "--pred", "pred.jsonl", "--gold", "gold.jsonl", "--out", "report.json"]);
    assert!(o.status.success());
    let table = stdout(&o);
    for row in ["Parent nodes", "Child nodes", "Overall"] {
        let line = table.lines().find(|l| l.starts_with(row)).unwrap();
        assert!(line.ends_with("100.00   100.00   100.00"), "{line}");
    }
    let report: Value = serde_json::from_str(&std::fs::read_to_string(f.path("report.json")).unwrap()).unwrap();
    assert_eq!(report["overall"]["f1"], 1.0);
}

#[test]
fn eval_cls_rejects_unmatched_sentences() {
    let f = Fixture::new();
    write_lines(&f.path("pred.jsonl"), &[annotation("p1", 0, "My boss yelled at me.", "A", &[])]);
    let o = f.run(&["eval-cls", "--pred", "pred.jsonl", "--gold", "gold.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no prediction for sentence p1#1"));
}

#[test]
fn eval_sum_identical_texts_score_full_marks() {
    let f = Fixture::new();
    let pairs = [
        json!({"post_id": "p1", "parent": "B", "source_text": "I am useless.", "reference_summary": "I think I am useless at everything I try."}),
        json!({"post_id": "p2", "parent": "C", "source_text": "我睡不着。", "reference_summary": "我每天晚上都睡不着觉。"}),
    ];
    write_lines(&f.path("g.jsonl"), &pairs);
    write_lines(&f.path("p.jsonl"), &pairs);
    let o = f.run(&["eval-sum", "--pred", "p.jsonl", "--gold", "g.jsonl"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert_eq!(row.split_whitespace().collect::<Vec<_>>(), ["model", "100.00", "100.00", "100.00", "100.00"]);
}

#[test]
fn eval_sum_reads_pathway_exports() {
    let f = Fixture::new();
    f.run(&["extract", "post.jsonl", "--fixture", "gold.jsonl", "--out", "pathway.jsonl"]);
    write_lines(
        &f.path("g.jsonl"),
        &[json!({"post_id": "p1", "parent": "A", "source_text": "x", "reference_summary": "My boss yelled at me."})],
    );
    let o = f.run(&["eval-sum", "--pred", "pathway.jsonl", "--gold", "g.jsonl", "--out", "scores.json"]);
    assert!(o.status.success());
    let scores: Value = serde_json::from_str(&std::fs::read_to_string(f.path("scores.json")).unwrap()).unwrap();
    assert_eq!(scores["pairs"], 1);
    assert_eq!(scores["rouge1"]["f"], 1.0);
}

fn many_posts(dir: &Path, n: usize) {
    let posts: Vec<Value> = (0..n).map(|i| post_line(&format!("post-{i:04}"), "Some text here.")).collect();
    write_lines(&dir.join("corpus.jsonl"), &posts);
}

#[test]
fn split_is_six_two_two_and_reproducible() {
    let f = Fixture::new();
    many_posts(f.dir.path(), 555);
    let a = f.run(&["split", "--seed", "7", "corpus.jsonl", "--out", "a.json"]);
    let b = f.run(&["split", "--seed", "7", "corpus.jsonl", "--out", "b.json"]);
    assert!(a.status.success() && b.status.success());
    let bytes = std::fs::read(f.path("a.json")).unwrap();
    assert_eq!(bytes, std::fs::read(f.path("b.json")).unwrap());
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["counts"], json!({"train": 333, "val": 111, "test": 111}));
    assert_eq!(v["seed"], 7);
    assert!(stdout(&a).contains("train        333"));

    let c = f.run(&["split", "--seed", "8", "corpus.jsonl", "--out", "c.json"]);
    assert!(c.status.success());
    assert_ne!(bytes, std::fs::read(f.path("c.json")).unwrap());
}

#[test]
fn seed_can_come_from_config() {
    let f = Fixture::new();
    many_posts(f.dir.path(), 20);
    std::fs::write(f.path("cfg.toml"), "seed = 7\n").unwrap();
    f.run(&["split", "--config", "cfg.toml", "corpus.jsonl", "--out", "a.json"]);
    f.run(&["split", "--seed", "7", "corpus.jsonl", "--out", "b.json"]);
    assert_eq!(std::fs::read(f.path("a.json")).unwrap(), std::fs::read(f.path("b.json")).unwrap());
}

#[test]
fn split_filter_drops_short_posts() {
    let f = Fixture::new();
    write_lines(
        &f.path("corpus.jsonl"),
        &[post_line("a", "one two three"), post_line("b", "one"), post_line("c", "one two three four")],
    );
    let o = f.run(&["split", "--min-words", "3", "corpus.jsonl", "--out", "s.json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(f.path("s.json")).unwrap()).unwrap();
    assert_eq!(v["assignments"].as_object().unwrap().len(), 2);
    assert_eq!(v["excluded"][0]["post_id"], "b");
}

#[test]
fn bundled_manifest_validates_and_broken_one_fails() {
    let f = Fixture::new();
    let o = f.run(&["validate-manifest"]);
    assert!(o.status.success());
    assert!(!stdout(&o).contains("FAIL"));

    let o = f.run(&["validate-manifest", "--out", "m.json"]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(f.path("m.json")).unwrap()).unwrap();
    assert!(o.status.success());
    assert!(report["checks"].as_array().is_some_and(|c| !c.is_empty()));

    let o = f.run(&["report", "--out", "r.json"]);
    assert!(o.status.success());
    let mut manifest: Value = serde_json::from_str(&std::fs::read_to_string(f.path("r.json")).unwrap()).unwrap();
    manifest = manifest["manifest"].take();
    manifest["grand_total"] = json!(4743);
    std::fs::write(f.path("bad.json"), manifest.to_string()).unwrap();
    let o = f.run(&["validate-manifest", "bad.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn report_prints_all_tables() {
    let f = Fixture::new();
    f.run(&["classify", "post.jsonl", "--fixture", "gold.jsonl", "--out", "pred.jsonl"]);
    let pair =
        [json!({"post_id": "p1", "parent": "A", "source_text": "x", "reference_summary": "My boss yelled at me."})];
    write_lines(&f.path("g.jsonl"), &pair);
    write_lines(&f.path("p.jsonl"), &pair);
    let o = f.run(&[
        "report",
        "--cls-pred",
        "pred.jsonl",
        "--cls-gold",
        "gold.jsonl",
        "--sum-pred",
        "p.jsonl",
        "--sum-gold",
        "g.jsonl",
        "--model",
        "mock",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("Total"));
    assert!(out.contains("Overall"));
    assert!(out.contains("(B) Belief"));
    assert!(out.lines().any(|l| l.starts_with("mock ")));
}

#[test]
fn nothing_is_written_without_out() {
    let f = Fixture::new();
    let before: Vec<_> = std::fs::read_dir(f.dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    for args in [
        vec!["segment", "post.jsonl"],
        vec!["classify", "post.jsonl"],
        vec!["extract", "post.jsonl", "--fixture", "gold.jsonl"],
        vec!["split", "post.jsonl"],
        vec!["validate-manifest"],
        vec!["report"],
    ] {
        assert!(f.run(&args).status.success(), "{args:?}");
    }
    let after: Vec<_> = std::fs::read_dir(f.dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(before.len(), after.len());
}

#[test]
fn extract_output_is_byte_identical() {
    let f = Fixture::new();
    f.run(&["extract", "post.jsonl", "--fixture", "gold.jsonl", "--out", "a.jsonl"]);
    f.run(&["extract", "post.jsonl", "--fixture", "gold.jsonl", "--out", "b.jsonl"]);
    assert_eq!(std::fs::read(f.path("a.jsonl")).unwrap(), std::fs::read(f.path("b.jsonl")).unwrap());
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    assert_eq!(f.run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(f.run(&["split", "--seed", "x", "post.jsonl"]).status.code(), Some(2));
    assert_eq!(f.run(&["extract", "post.jsonl", "--backend", "llm"]).status.code(), Some(2));
    std::fs::write(f.path("bad.toml"), "no_such_key = 1\n").unwrap();
    assert_eq!(f.run(&["segment", "post.jsonl", "--config", "bad.toml"]).status.code(), Some(2));

    assert_eq!(f.run(&["segment", "missing.jsonl"]).status.code(), Some(1));
    std::fs::write(f.path("broken.jsonl"), "{not json\n").unwrap();
    assert_eq!(f.run(&["segment", "broken.jsonl"]).status.code(), Some(1));
}

#[test]
fn unreachable_backends_exit_with_three() {
    let f = Fixture::new();
    let stub = cogpath_core::testing::StubServer::scripted(vec![cogpath_core::testing::StubResponse::status(503, "")])
        .unwrap();
    std::fs::write(
        f.path("llm.toml"),
        format!(
            "[llm]\nendpoint_url = \"{}/v1/chat/completions\"\napi_key_env = \"COGPATH_TEST_UNSET\"\nmax_retries = 1\n",
            stub.url()
        ),
    )
    .unwrap();
    let o = f.run(&["extract", "post.jsonl", "--backend", "llm", "--config", "llm.toml"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stub.request_count(), 2);

    std::fs::write(f.path("remote.toml"), format!("[remote]\nurl = \"{}\"\n", stub.url())).unwrap();
    let o = f.run(&["classify", "post.jsonl", "--backend", "remote", "--config", "remote.toml"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn llm_backend_end_to_end_against_stub() {
    let f = Fixture::new();
    let reply = r#"{"labels": {"0": [{"parent": "A", "children": ["study_and_work"]}], "1": [{"parent": "B", "children": ["over_generalization"]}], "2": []}, "summaries": {"A": "Trouble at work.", "B": "Sees self as useless."}}"#;
    let stub = cogpath_core::testing::StubServer::with_handler(move |req| {
        let prompt = req.json()["messages"].to_string();
        if prompt.contains("[2]") {
            cogpath_core::testing::StubResponse::chat(reply)
        } else {
            cogpath_core::testing::StubResponse::chat(
                r#"{"summaries": {"A": "Trouble at work.", "B": "Sees self as useless."}}"#,
            )
        }
    })
    .unwrap();
    std::fs::write(
        f.path("llm.toml"),
        format!("backend = \"llm\"\n[llm]\nendpoint_url = \"{}/v1/chat/completions\"\napi_key_env = \"COGPATH_TEST_UNSET\"\n", stub.url()),
    )
    .unwrap();
    let o = f.run(&["extract", "post.jsonl", "--config", "llm.toml", "--out", "p.jsonl"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let p = &f.read_lines("p.jsonl")[0]["pathway"];
    assert_eq!(p["A"]["member_indices"], json!([0]));
    assert_eq!(p["B"]["summary"], "Sees self as useless.");
    assert!(p.get("C").is_none());
}
