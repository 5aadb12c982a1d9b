use std::fs;
use std::io::{BufRead, BufReader};
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use triplekit::httpd::{http_request, ClientOptions};
use triplekit::persist::{snapshot_path, Persistence};
use triplekit::rdfio::{Term, Triple};
use triplekit::store::{Store, StoreError};

const DOC: &str = r#"<?xml version="1.0"?>
<rdf:RDF xmlns:rdf="http://www.w3.org/1999/02/22-rdf-syntax-ns#" xmlns:ex="http://ex.org/">
  <rdf:Description rdf:about="http://ex.org/a">
    <ex:name xml:lang="en">Alice</ex:name>
    <ex:knows><rdf:Description rdf:about="http://ex.org/b"><ex:age>42</ex:age></rdf:Description></ex:knows>
  </rdf:Description>
</rdf:RDF>
"#;

fn triplekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_triplekit")).args(args).output().expect("run triplekit")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn canon_compact_and_indented() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "doc.xml", "<a   x='1'><b>t</b><c></c></a>");
    let out = triplekit(&["canon", &file]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "<a x=\"1\"><b>t</b><c/></a>\n");
    let out = triplekit(&["canon", &file, "--indent"]);
    assert_eq!(stdout(&out), "<a x=\"1\">\n  <b>t</b>\n  <c/>\n</a>\n");
}

#[test]
fn canon_html_closes_void_elements() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "doc.html", "<p>one<br>two</p>");
    let out = triplekit(&["canon", "--html", &file]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "<p>one<br/>two</p>\n");
}

#[test]
fn canon_reports_syntax_errors() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "bad.xml", "<a><b></a>");
    let out = triplekit(&["canon", &file]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn rdf_parse_prints_one_triple_per_line() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "doc.rdf", DOC);
    let out = triplekit(&["rdf", "parse", &file]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines: Vec<&str> = text.lines().collect();
    lines.sort();
    assert_eq!(
        lines,
        [
            "<http://ex.org/a> <http://ex.org/knows> <http://ex.org/b> .",
            "<http://ex.org/a> <http://ex.org/name> \"Alice\"@en .",
            "<http://ex.org/b> <http://ex.org/age> \"42\" .",
        ]
    );
}

#[test]
fn rdf_parse_resolves_against_base() {
    let dir = tempfile::tempdir().unwrap();
    let doc = DOC.replace("http://ex.org/a", "a");
    let file = write(dir.path(), "doc.rdf", &doc);
    let out = triplekit(&["rdf", "parse", &file, "--base", "http://base.org/dir/"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("<http://base.org/dir/a> <http://ex.org/name>"));
}

#[test]
fn rdf_roundtrip_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "doc.rdf", DOC);
    let out = triplekit(&["rdf", "roundtrip", &file]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let written = write(dir.path(), "again.rdf", &stdout(&out));
    let a = stdout(&triplekit(&["rdf", "parse", &file]));
    let b = stdout(&triplekit(&["rdf", "parse", &written]));
    let mut a: Vec<&str> = a.lines().collect();
    let mut b: Vec<&str> = b.lines().collect();
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn rdf_parse_rejects_broken_documents() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "bad.rdf", &DOC[..DOC.len() - 12]);
    let out = triplekit(&["rdf", "parse", &file]);
    assert!(!out.status.success());
}

fn populate(dir: &Path) {
    let store = Store::new();
    let _p = Persistence::attach(&store, dir).unwrap();
    for i in 0..5 {
        store
            .transaction::<_, StoreError, _>(|txn| {
                let t = Triple::new(Term::iri("http://ex.org/s"), Term::iri("http://ex.org/p"), Term::plain(format!("v{i}")));
                txn.assert(t, "demo", 0)
            })
            .unwrap();
    }
}

#[test]
fn db_snapshot_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    populate(dir.path());
    let db = dir.path().to_string_lossy().into_owned();
    let out = triplekit(&["db", "verify", &db]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("demo: snapshot 0 triples, journal 5 transactions"), "{}", stdout(&out));

    let out = triplekit(&["db", "snapshot", "demo", "--db", &db]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("demo: 5 triples"));
    assert!(snapshot_path(dir.path(), "demo").exists());

    let out = triplekit(&["db", "verify", &db]);
    assert!(stdout(&out).contains("demo: snapshot 5 triples, journal 0 transactions"), "{}", stdout(&out));

    let out = triplekit(&["db", "snapshot", "missing", "--db", &db]);
    assert!(!out.status.success());
}

#[test]
fn serve_takes_port_from_environment() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_triplekit"))
        .args(["serve", "--no-admin"])
        .env("TRIPLEKIT_PORT", port.to_string())
        .env("TRIPLEKIT_WORKERS", "2")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    assert_eq!(line.trim(), format!("serving on http://127.0.0.1:{port}/"));

    let stats = http_request("GET", &format!("http://127.0.0.1:{port}/statistics"), None, &ClientOptions::default());
    let admin = http_request("GET", &format!("http://127.0.0.1:{port}/admin"), None, &ClientOptions::default());
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(stats.unwrap().text().unwrap().contains("triples=\"0\""));
    assert_eq!(admin.err().and_then(|e| e.status()), Some(404));
}

#[test]
fn serve_rejects_port_zero() {
    let out = triplekit(&["serve", "--port", "0"]);
    assert!(!out.status.success());
}
