use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn chartalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chartalk"))
        .args(args)
        .env_remove("CHARTALK_API_KEY")
        .env("CHARTALK_API_BASE", "http://127.0.0.1:9")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn render_into(dir: &Path) -> (PathBuf, PathBuf) {
    let out = dir.join("scores.svg");
    let o = chartalk(&[
        "render",
        "--csv",
        fixture("scores.csv").to_str().unwrap(),
        "--spec",
        fixture("box.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    (out, dir.join("scores.knowledge.json"))
}

#[test]
fn render_writes_svg_and_knowledge() {
    let dir = tempfile::tempdir().unwrap();
    let (svg, knowledge) = render_into(dir.path());
    let svg = std::fs::read_to_string(svg).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("id=\"g1.box1\""));
    let k: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(knowledge).unwrap()).unwrap();
    assert!(k["knowledge"]["entries"]["g1.box1"].is_string());
    assert!(k["id_list"].as_array().unwrap().len() > 10);
}

#[test]
fn render_reports_bad_columns() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.json");
    std::fs::write(&spec, r#"{"chart_type": "density", "group_field": "method", "value_field": "grade"}"#).unwrap();
    let o = chartalk(&[
        "render",
        "--csv",
        fixture("scores.csv").to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        dir.path().join("x.svg").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grade"));
    assert!(!dir.path().join("x.svg").exists());
}

#[test]
fn ask_with_mock_lists_citations() {
    let o = chartalk(&[
        "ask",
        "--csv",
        fixture("scores.csv").to_str().unwrap(),
        "--spec",
        fixture("box.json").to_str().unwrap(),
        "--mock",
        fixture("mock_reply.json").to_str().unwrap(),
        "Where is the median of Lecture? [tag: [id: g1]]",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("[cite: g1.median1]"), "{out}");
    assert!(out.contains("[1] g1.median1 ok"), "{out}");
    assert!(out.contains("[2] g9.box1 unknown"), "{out}");
}

#[test]
fn ask_without_key_fails_cleanly() {
    let o = chartalk(&[
        "ask",
        "--csv",
        fixture("scores.csv").to_str().unwrap(),
        "--spec",
        fixture("box.json").to_str().unwrap(),
        "hello",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn validate_flags_unknown_citations() {
    let dir = tempfile::tempdir().unwrap();
    let (_, knowledge) = render_into(dir.path());
    let k = knowledge.to_str().unwrap();

    let bad = chartalk(&["validate", fixture("mock_reply.json").to_str().unwrap(), "--knowledge", k]);
    assert_eq!(bad.status.code(), Some(1));
    let out = stdout(&bad);
    assert!(out.contains("turn 1: citation 2 `g9.box1` is not an element of this chart"), "{out}");
    assert!(out.contains("2 citations, 1 unknown"), "{out}");

    let good = chartalk(&["validate", fixture("mock_clean.json").to_str().unwrap(), "--knowledge", k]);
    assert_eq!(good.status.code(), Some(0), "{}", stdout(&good));
    assert!(stdout(&good).contains("2 citations, 0 unknown"));

    let junk = dir.path().join("junk.txt");
    std::fs::write(&junk, "not a transcript").unwrap();
    let o = chartalk(&["validate", junk.to_str().unwrap(), "--knowledge", k]);
    assert_eq!(o.status.code(), Some(2));
}
