use std::collections::BTreeSet;
use std::fs;

use proptest::prelude::*;
use tempfile::TempDir;

use super::*;
use crate::rdfio::{Literal, Term, Triple};
use crate::store::{BulkLoad, Pattern, Store, StoreError, StoredTriple};

fn iri(s: &str) -> Term {
    Term::iri(format!("http://t/{s}"))
}

fn state(store: &Store) -> BTreeSet<StoredTriple> {
    store.read().all().collect()
}

fn fast() -> PersistOptions {
    PersistOptions { fsync: false }
}

fn assert_one(store: &Store, s: &str, o: Term, source: &str) {
    store.transaction(|txn| txn.assert(Triple::new(iri(s), iri("p"), o), source, 1)).unwrap();
}

#[test]
fn empty_directory_gives_empty_store() {
    let dir = TempDir::new().unwrap();
    let store = Store::new();
    let p = Persistence::attach(&store, dir.path()).unwrap();
    assert!(store.is_empty());
    assert!(p.report().is_empty());
}

#[test]
fn missing_directory_is_an_error() {
    let dir = TempDir::new().unwrap();
    let r = Persistence::attach(&Store::new(), dir.path().join("nope"));
    assert!(matches!(r, Err(PersistError::Io { .. })));
}

#[test]
fn restart_restores_state() {
    let dir = TempDir::new().unwrap();
    let store = Store::new();
    let before = {
        let _p = Persistence::attach_with(&store, dir.path(), fast()).unwrap();
        for i in 0..100 {
            let o = if i % 3 == 0 { Term::lang("en", format!("v{i}")) } else { iri(&format!("o{i}")) };
            store
                .transaction(|txn| txn.assert(Triple::new(iri(&format!("s{}", i % 10)), iri("p"), o), "src", i))
                .unwrap();
        }
        state(&store)
    };
    let again = Store::new();
    let p = Persistence::attach_with(&again, dir.path(), fast()).unwrap();
    assert_eq!(state(&again), before);
    assert_eq!(p.report()[0].journal_transactions, 100);
}

#[test]
fn updates_and_retracts_are_replayed() {
    let dir = TempDir::new().unwrap();
    let store = Store::new();
    let p = Persistence::attach_with(&store, dir.path(), fast()).unwrap();
    assert_one(&store, "a", Term::plain("1"), "s");
    assert_one(&store, "b", Term::plain("2"), "s");
    store
        .transaction(|txn| {
            txn.update(&Triple::new(iri("a"), iri("p"), Term::plain("1")), "s", Triple::new(iri("a"), iri("p"), Term::plain("one")))?;
            txn.retract(&Pattern::any().subject(iri("b")))
        })
        .unwrap();
    let text = fs::read_to_string(journal_path(dir.path(), "s")).unwrap();
    assert!(text.contains("update(triple(iri(\"http://t/a\"),iri(\"http://t/p\"),literal(\"1\")),"));
    assert!(text.contains("retract(iri(\"http://t/b\"),"));
    drop(p);
    let again = Store::new();
    let _p = Persistence::attach_with(&again, dir.path(), fast()).unwrap();
    assert_eq!(state(&again), state(&store));
}

#[test]
fn transaction_spanning_sources_is_journalled_per_source() {
    let dir = TempDir::new().unwrap();
    let store = Store::new();
    let _p = Persistence::attach_with(&store, dir.path(), fast()).unwrap();
    store
        .transaction(|txn| {
            txn.assert(Triple::new(iri("a"), iri("p"), iri("b")), "one", 1)?;
            txn.assert(Triple::new(iri("c"), iri("p"), iri("d")), "http://x/two?y", 2)
        })
        .unwrap();
    for src in ["one", "http://x/two?y"] {
        let text = fs::read_to_string(journal_path(dir.path(), src)).unwrap();
        assert_eq!(text.lines().count(), 3, "{text}");
        assert!(text.starts_with("begin(1,"));
        assert!(text.ends_with("end(1).\n"));
    }
    assert_eq!(file_stem("http://x/two?y"), "http%3A%2F%2Fx%2Ftwo%3Fy");
    let sources: Vec<String> = verify(dir.path()).unwrap().into_iter().map(|r| r.source).collect();
    assert_eq!(sources, ["http://x/two?y", "one"]);
}

#[test]
fn transaction_ids_continue_after_restart() {
    let dir = TempDir::new().unwrap();
    {
        let store = Store::new();
        let _p = Persistence::attach_with(&store, dir.path(), fast()).unwrap();
        assert_one(&store, "a", Term::plain("1"), "s");
        assert_one(&store, "b", Term::plain("2"), "s");
    }
    let store = Store::new();
    let _p = Persistence::attach_with(&store, dir.path(), fast()).unwrap();
    assert_one(&store, "c", Term::plain("3"), "s");
    let text = fs::read_to_string(journal_path(dir.path(), "s")).unwrap();
    let ids: Vec<&str> = text.lines().filter(|l| l.starts_with("end(")).collect();
    assert_eq!(ids, ["end(1).", "end(2).", "end(3)."]);
}

#[test]
fn partial_trailing_transaction_is_skipped() {
    let dir = TempDir::new().unwrap();
    let store = Store::new();
    {
        let _p = Persistence::attach_with(&store, dir.path(), fast()).unwrap();
        assert_one(&store, "a", Term::plain("1"), "s");
        assert_one(&store, "b", Term::plain("2"), "s");
    }
    let path = journal_path(dir.path(), "s");
    let text = fs::read_to_string(&path).unwrap();
    // Drop the final `end` line.
    let cut = text.trim_end_matches('\n').rfind('\n').unwrap() + 1;
    fs::write(&path, &text[..cut]).unwrap();
    let again = Store::new();
    let p = Persistence::attach_with(&again, dir.path(), fast()).unwrap();
    assert!(p.report()[0].partial);
    assert_eq!(again.len(), 1);
}

#[test]
fn truncation_anywhere_is_all_or_nothing() {
    let dir = TempDir::new().unwrap();
    let store = Store::new();
    let mut states = vec![state(&store)];
    {
        let _p = Persistence::attach_with(&store, dir.path(), fast()).unwrap();
        for i in 0..6 {
            store
                .transaction(|txn| {
                    for k in 0..3 {
                        txn.assert(Triple::new(iri(&format!("s{i}")), iri("p"), Term::plain(format!("{k}"))), "s", k)?;
                    }
                    if i > 0 {
                        txn.retract(&Pattern::any().subject(iri(&format!("s{}", i - 1))).object(Term::plain("0")))?;
                    }
                    Ok::<_, StoreError>(())
                })
                .unwrap();
            states.push(state(&store));
        }
    }
    let path = journal_path(dir.path(), "s");
    let full = fs::read(&path).unwrap();
    for cut in 0..=full.len() {
        fs::write(&path, &full[..cut]).unwrap();
        let s = Store::new();
        let p = Persistence::attach_with(&s, dir.path(), fast()).unwrap();
        let prefix = String::from_utf8_lossy(&full[..cut]);
        let committed = prefix.split_inclusive('\n').filter(|l| l.ends_with('\n') && l.starts_with("end(")).count();
        assert_eq!(state(&s), states[committed], "cut at byte {cut}");
        drop(p);
    }
}

#[test]
fn corrupt_journal_line_is_reported() {
    let dir = TempDir::new().unwrap();
    let path = journal_path(dir.path(), "s");
    fs::write(&path, "begin(1,0.0).\nassert(iri(\"a\"),oops).\nend(1).\n").unwrap();
    match Persistence::attach(&Store::new(), dir.path()) {
        Err(PersistError::Journal { path: p, line, .. }) => {
            assert_eq!(p, path);
            assert_eq!(line, 2);
        }
        other => panic!("unexpected {:?}", other.err()),
    }
    fs::write(&path, "assert(iri(\"a\"),iri(\"b\"),iri(\"c\"),1).\n").unwrap();
    assert!(matches!(verify(dir.path()), Err(PersistError::Journal { line: 1, .. })));
}

#[test]
fn corrupt_snapshot_is_reported_with_offset() {
    let dir = TempDir::new().unwrap();
    let path = snapshot_path(dir.path(), "s");
    let mut bytes = encode_snapshot("s", &[]);
    bytes[0] = b'X';
    fs::write(&path, &bytes).unwrap();
    match Persistence::attach(&Store::new(), dir.path()) {
        Err(PersistError::Snapshot { path: p, offset, .. }) => assert_eq!((p, offset), (path.clone(), 0)),
        other => panic!("unexpected {:?}", other.err()),
    }
    let mut bytes = encode_snapshot("s", &[]);
    bytes.pop();
    fs::write(&path, &bytes).unwrap();
    assert!(matches!(verify(dir.path()), Err(PersistError::Snapshot { .. })));
    fs::write(&path, encode_snapshot("other", &[])).unwrap();
    assert!(matches!(verify(dir.path()), Err(PersistError::Snapshot { .. })));
}

#[test]
fn empty_snapshot_bytes() {
    let bytes = encode_snapshot("s", &[]);
    let mut want = b"TKQL".to_vec();
    want.extend([1, 0, 1, 1, b's', 0]);
    want.extend([0; 8]);
    assert_eq!(bytes, want);
}

#[test]
fn snapshot_layout() {
    let triples = vec![
        StoredTriple { triple: Triple::new(Term::iri("a"), Term::iri("p"), Term::iri("a")), source: "s".into(), line: 3 },
        StoredTriple {
            triple: Triple::new(Term::bnode("b"), Term::iri("p"), Term::lang("en", "hi")),
            source: "s".into(),
            line: 200,
        },
        StoredTriple {
            triple: Triple::new(Term::iri("a"), Term::iri("p"), Term::typed("d", "1")),
            source: "s".into(),
            line: 0,
        },
        StoredTriple { triple: Triple::new(Term::iri("a"), Term::iri("p"), Term::plain("a")), source: "s".into(), line: 1 },
    ];
    let mut want = b"TKQL\x01\x00".to_vec();
    // strings: s a p b en hi d 1
    want.push(8);
    for s in ["s", "a", "p", "b", "en", "hi", "d", "1"] {
        want.push(s.len() as u8);
        want.extend(s.as_bytes());
    }
    want.extend([1, 1 << 1, 2, 1 << 1, 3]);
    want.extend([3, 3 << 1 | 1, 2, 4, 5, 0xc8, 0x01]);
    want.extend([4, 1 << 1, 2, 6, 7, 0]);
    want.extend([2, 1 << 1, 2, 1, 1]);
    want.push(0);
    want.extend(4u64.to_le_bytes());
    assert_eq!(encode_snapshot("s", &triples), want);
    let back = decode_snapshot(&want).unwrap();
    assert_eq!(back.source, "s");
    let decoded: Vec<StoredTriple> = back
        .triples
        .iter()
        .map(|t| StoredTriple {
            triple: Triple::new(
                back.terms[t[0] as usize].clone(),
                back.terms[t[1] as usize].clone(),
                back.terms[t[2] as usize].clone(),
            ),
            source: "s".into(),
            line: t[3],
        })
        .collect();
    assert_eq!(decoded, triples);
}

#[test]
fn snapshot_then_reload() {
    let dir = TempDir::new().unwrap();
    let store = Store::new();
    let p = Persistence::attach_with(&store, dir.path(), fast()).unwrap();
    for i in 0..20 {
        assert_one(&store, &format!("s{i}"), Term::plain(i.to_string()), if i % 2 == 0 { "even" } else { "odd" });
    }
    p.save_snapshot("even").unwrap();
    assert_eq!(fs::metadata(journal_path(dir.path(), "even")).unwrap().len(), 0);
    assert!(fs::metadata(journal_path(dir.path(), "odd")).unwrap().len() > 0);
    assert_one(&store, "late", Term::plain("x"), "even");
    p.save_all().unwrap();
    assert_one(&store, "later", Term::plain("y"), "even");
    let again = Store::new();
    let p2 = Persistence::attach_with(&again, dir.path(), fast()).unwrap();
    assert_eq!(state(&again), state(&store));
    let even = p2.report().iter().find(|r| r.source == "even").unwrap();
    assert_eq!((even.snapshot_triples, even.journal_transactions), (11, 1));
}

#[test]
fn detach_stops_journalling() {
    let dir = TempDir::new().unwrap();
    let store = Store::new();
    let mut p = Persistence::attach_with(&store, dir.path(), fast()).unwrap();
    assert_one(&store, "a", Term::plain("1"), "s");
    let kept = state(&store);
    p.detach();
    p.detach();
    assert!(!p.is_attached());
    assert!(matches!(p.save_snapshot("s"), Err(PersistError::Detached)));
    assert_one(&store, "b", Term::plain("2"), "s");
    assert_eq!(store.len(), 2);
    let again = Store::new();
    let mut p2 = Persistence::attach_with(&again, dir.path(), fast()).unwrap();
    assert_eq!(state(&again), kept);
    p2.detach();
    let third = Store::new();
    let _p3 = Persistence::attach_with(&third, dir.path(), fast()).unwrap();
    assert_eq!(state(&third), kept);
}

#[test]
fn journal_record_syntax() {
    let t = Triple::new(Term::bnode("__f#1"), Term::iri("http://x/p"), Term::typed("http://x/d", "a\"b\\c\nd\u{1}"));
    let r = JournalRecord::Assert { triple: t, line: 12 };
    let line = r.to_string();
    assert_eq!(
        line,
        r#"assert(bnode("__f#1"),iri("http://x/p"),literal(type("http://x/d"),"a\"b\\c\nd\u{1}"),12)."#
    );
    assert_eq!(JournalRecord::parse(&line), Ok(r));
    assert_eq!(JournalRecord::parse("begin(3,1.5)."), Ok(JournalRecord::Begin { id: 3, time: 1.5 }));
    for bad in ["begin(3,1.5)", "end(x).", "assert(iri(\"a\")).", "retract(iri(\"a\"),iri(\"b\"),iri(\"c\")). x", "nope(1)."] {
        assert!(JournalRecord::parse(bad).is_err(), "{bad}");
    }
}

fn arb_text() -> impl Strategy<Value = String> {
    prop_oneof![any::<String>(), "[a-z\"\\\\\n\t ]{0,8}"]
}

fn arb_term(resource_only: bool) -> BoxedStrategy<Term> {
    let res = prop_oneof![arb_text().prop_map(Term::Iri), arb_text().prop_map(Term::BNode)];
    if resource_only {
        return res.boxed();
    }
    prop_oneof![
        res,
        arb_text().prop_map(|t| Term::Literal(Literal::Plain(t))),
        (arb_text(), arb_text()).prop_map(|(lang, text)| Term::Literal(Literal::Lang { lang, text })),
        (arb_text(), arb_text()).prop_map(|(datatype, text)| Term::Literal(Literal::Typed { datatype, text })),
    ]
    .boxed()
}

fn arb_triple() -> impl Strategy<Value = Triple> {
    (arb_term(true), arb_text().prop_map(Term::Iri), arb_term(false)).prop_map(|(s, p, o)| Triple::new(s, p, o))
}

proptest! {
    #[test]
    fn journal_records_round_trip(t in arb_triple(), u in arb_triple(), line in any::<u32>(), id in any::<u64>(),
                                  time in 0.0f64..1e12) {
        for r in [
            JournalRecord::Assert { triple: t.clone(), line },
            JournalRecord::Retract(t.clone()),
            JournalRecord::Update { old: t.clone(), new: u.clone() },
            JournalRecord::Begin { id, time },
            JournalRecord::End { id },
        ] {
            let text = r.to_string();
            prop_assert!(!text.contains('\n'));
            prop_assert_eq!(JournalRecord::parse(&text), Ok(r));
        }
    }

    #[test]
    fn snapshot_round_trip(triples in prop::collection::vec((arb_triple(), any::<u32>()), 0..40), source in arb_text()) {
        let stored: Vec<StoredTriple> =
            triples.into_iter().map(|(triple, line)| StoredTriple { triple, source: source.clone(), line }).collect();
        let bytes = encode_snapshot(&source, &stored);
        let BulkLoad { source: back_source, terms, triples: back } = decode_snapshot(&bytes).unwrap();
        prop_assert_eq!(back_source, source);
        let decoded: Vec<(Triple, u32)> = back
            .iter()
            .map(|t| (Triple::new(terms[t[0] as usize].clone(), terms[t[1] as usize].clone(), terms[t[2] as usize].clone()), t[3]))
            .collect();
        let want: Vec<(Triple, u32)> = stored.into_iter().map(|s| (s.triple, s.line)).collect();
        prop_assert_eq!(decoded, want);
    }

    #[test]
    fn truncated_snapshots_fail_cleanly(n in 0usize..10, cut_frac in 0.0f64..1.0) {
        let stored: Vec<StoredTriple> = (0..n)
            .map(|i| StoredTriple {
                triple: Triple::new(Term::iri(format!("s{i}")), Term::iri("p"), Term::plain(format!("{i}"))),
                source: "s".into(),
                line: i as u32,
            })
            .collect();
        let bytes = encode_snapshot("s", &stored);
        let cut = ((bytes.len() as f64) * cut_frac) as usize;
        let err = decode_snapshot(&bytes[..cut]).unwrap_err();
        prop_assert!(err.offset <= cut);
    }
}
