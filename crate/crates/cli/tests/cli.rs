use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use std::io::Write;

fn cars(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data/cars")
        .join(name)
}

fn fm(dir: &Path, args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_fm"))
        .args(args)
        .env("FM_DATA_DIR", dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn query_on_empty_index_lists_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = fm(dir.path(), &["query", "--text", "sport car"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("no results"));
}

#[test]
fn malformed_ingest_line_fails_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.jsonl");
    fs::write(
        &file,
        "{\"id\":\"r1\",\"title\":\"t\",\"body\":\"\",\"content_type\":\"text\"}\n{not json\n",
    )
    .unwrap();
    let o = fm(dir.path(), &["ingest", file.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    // Nothing from the failed file was kept.
    let idx = fm(dir.path(), &["index"], None);
    assert!(stdout(&idx).contains("\"resources\": 0"));
}

#[test]
fn unknown_subcommand_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let o = fm(dir.path(), &["frobnicate"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn eval_prints_both_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let o = fm(
        dir.path(),
        &["eval", "--matrix", cars("usability.json").to_str().unwrap()],
        None,
    );
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("average: 6.7500"), "{out}");
    assert!(out.contains("weighted: 5.9000"), "{out}");
}

#[test]
fn invalid_theta_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = fm(dir.path(), &["--theta", "1.5", "index"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("theta"));
}

#[test]
fn ontology_with_unknown_facet_value_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let tax = cars("taxonomy.jsonl");
    assert!(fm(dir.path(), &["taxonomy", tax.to_str().unwrap()], None)
        .status
        .success());
    let ont = dir.path().join("bad.ont");
    fs::write(&ont, "Boat isA Vehicle\nBoat facetOf BodyStyle=Boat\n").unwrap();
    let o = fm(dir.path(), &["ontology", ont.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("BodyStyle=Boat"));
}

#[test]
fn corrupt_data_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("weights.json"), "{\"w1\": oops").unwrap();
    let o = fm(dir.path(), &["index"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("weights.json"), "{}", stderr(&o));
}

#[test]
fn session_state_is_persisted() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| cars(n).to_str().unwrap().to_string();
    fm(
        dir.path(),
        &["ingest", &p("resources.jsonl"), &p("assignments.jsonl")],
        None,
    );
    fm(dir.path(), &["taxonomy", &p("taxonomy.jsonl")], None);
    fm(dir.path(), &["ingest", &p("associations.jsonl")], None);
    let o = fm(
        dir.path(),
        &["session", "--reader", "mark"],
        Some("commit BodyStyle=SUV\ncommit BodyStyle=Coupe\nretract CarKind\nquit\n"),
    );
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("committed BodyStyle=SUV"));
    assert!(out.contains("error: commitment BodyStyle=Coupe conflicts"));
    assert!(out.contains("error: no commitment for facet group `CarKind`"));
    let saved = fs::read_to_string(dir.path().join("sessions/sess-000001.json")).unwrap();
    let record: fm_core::SessionRecord = serde_json::from_str(&saved).unwrap();
    assert_eq!(record.reader_id, "mark");
    assert_eq!(
        record.commitments["BodyStyle"].value.to_string(),
        "BodyStyle=SUV"
    );
    assert_eq!(record.turn_log.len(), 1);

    let again = fm(dir.path(), &["session"], Some("quit\n"));
    assert!(stderr(&again).contains("sess-000002"));
}
