use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::rdfio::{Term, Triple};
use crate::store::{ReadView, Store, StoreError};
use crate::vocab::{RDFS_CLASS, RDFS_RESOURCE, RDFS_SUBCLASSOF, RDF_PROPERTY, RDF_TYPE};

fn ex(n: &str) -> Term {
    Term::iri(format!("{DEFAULT_NAMESPACE}{n}"))
}

fn load(triples: &[Triple]) -> Store {
    let store = Store::new();
    store
        .transaction(|txn| {
            for (i, t) in triples.iter().enumerate() {
                txn.assert(t.clone(), "test", i as u32 + 1)?;
            }
            Ok::<_, StoreError>(())
        })
        .unwrap();
    store
}

fn entail_example() -> Store {
    let (ty, class, sub) = (Term::iri(RDF_TYPE), Term::iri(RDFS_CLASS), Term::iri(RDFS_SUBCLASSOF));
    load(&[
        Triple::new(ex("mary"), ty.clone(), ex("woman")),
        Triple::new(ex("woman"), ty.clone(), class.clone()),
        Triple::new(ex("woman"), sub, ex("human")),
        Triple::new(ex("human"), ty, class),
    ])
}

fn column(table: &ResultTable) -> BTreeSet<Term> {
    table.rows.iter().map(|r| r[0].clone()).collect()
}

#[test]
fn parse_simple_select() {
    let q = parse_query("SELECT X WHERE (mary, type, X)").unwrap();
    assert_eq!(q.projection, ["X"]);
    assert_eq!(q.patterns.len(), 1);
    assert_eq!(q.patterns[0].subject, QTerm::Const(ex("mary")));
    assert_eq!(q.patterns[0].predicate, QTerm::Const(Term::iri(RDF_TYPE)));
    assert_eq!(q.patterns[0].object, QTerm::Var("X".into()));
}

#[test]
fn parse_full_grammar() {
    let text = "USING foaf = <http://xmlns.com/foaf/0.1/>\n\
                SELECT P, N WHERE (P, foaf:name, N), (P, foaf:age, A), (P, rdf:type, <http://x/C>)\n\
                FILTER A >= 18 DISTINCT LIMIT 5 ENTAILMENT rdf";
    let q = parse_query(text).unwrap();
    assert_eq!(q.patterns.len(), 3);
    assert_eq!(q.filters.len(), 1);
    assert!(q.distinct);
    assert_eq!(q.limit, Some(5));
    assert_eq!(q.entailment.as_deref(), Some("rdf"));
    assert_eq!(q.patterns[0].predicate, QTerm::Const(Term::iri("http://xmlns.com/foaf/0.1/name")));
    assert_eq!(q.patterns[1].line, 2);

    let q = parse_query(r#"USING <http://d/> SELECT * WHERE (a, b, "x"@EN), (a, c, "1"^^xsd:int), (a, d, 7)"#).unwrap();
    assert_eq!(q.projection, Vec::<String>::new());
    assert_eq!(q.patterns[0].subject, QTerm::Const(Term::iri("http://d/a")));
    assert_eq!(q.patterns[0].object, QTerm::Const(Term::lang("en", "x")));
    assert_eq!(
        q.patterns[1].object,
        QTerm::Const(Term::typed("http://www.w3.org/2001/XMLSchema#int", "1"))
    );
    // Numbers become a hidden variable with an equality filter.
    assert!(matches!(&q.patterns[2].object, QTerm::Var(v) if v.starts_with('_')));
    assert_eq!(q.filters.len(), 1);
}

#[test]
fn syntax_errors_point_at_the_token() {
    match parse_query("SELECT WHERE (a, b, C)") {
        Err(QueryError::Syntax { line, column, message }) => {
            assert_eq!((line, column), (1, 8));
            assert!(message.contains("WHERE"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    match parse_query("SELECT X\nWHERE (a, b X)") {
        Err(QueryError::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 13)),
        other => panic!("{other:?}"),
    }
    for bad in [
        "",
        "SELECT X WHERE",
        "SELECT X WHERE (\"lit\", b, X)",
        "SELECT X WHERE (a, 5, X)",
        "SELECT X WHERE (a, b, X) LIMIT x",
        "SELECT X WHERE (a, nope:b, X)",
        "SELECT X WHERE (a, b, X) FILTER X ~ 3",
        "SELECT X WHERE (a, b, X) extra",
        "SELECT X WHERE (a, b, \"open)",
    ] {
        assert!(matches!(parse_query(bad), Err(QueryError::Syntax { .. })), "{bad:?}");
    }
    assert_eq!(
        parse_query("SELECT X WHERE (a, b, X) ENTAILMENT owl"),
        Err(QueryError::UnknownEntailment("owl".into()))
    );
    assert_eq!(parse_query("SELECT Y WHERE (a, b, X)"), Err(QueryError::UnboundVariable("Y".into())));
    assert_eq!(parse_query("SELECT X WHERE (a, b, X) FILTER Z = 1"), Err(QueryError::UnboundVariable("Z".into())));
}

#[test]
fn rdfs_and_raw_on_the_class_example() {
    let store = entail_example();
    let engine = QueryEngine::new();
    let (rdfs, _) = engine.run_with(&store, "SELECT X WHERE (mary, type, X)", Some("rdfs")).unwrap();
    assert_eq!(rdfs.rows, vec![vec![ex("woman")], vec![ex("human")]]);
    let (raw, _) = engine.run_with(&store, "SELECT X WHERE (mary, type, X)", Some("raw")).unwrap();
    assert_eq!(raw.rows, vec![vec![ex("woman")]]);
    let (members, _) = engine.run_with(&store, "SELECT X WHERE (X, type, human)", Some("rdfs")).unwrap();
    assert_eq!(column(&members), BTreeSet::from([ex("mary")]));
}

#[test]
fn rdf_entailment_hand_evaluated() {
    let store = entail_example();
    let view = store.read();
    let (ty, prop, res) = (Term::iri(RDF_TYPE), Term::iri(RDF_PROPERTY), Term::iri(RDFS_RESOURCE));
    let got: BTreeSet<Triple> = Rdf.solve(&view, None, None, None).into_iter().collect();
    let mut want: BTreeSet<Triple> = view.all().map(|s| s.triple).collect();
    want.insert(Triple::new(ty.clone(), ty.clone(), prop.clone()));
    want.insert(Triple::new(Term::iri(RDFS_SUBCLASSOF), ty.clone(), prop.clone()));
    for s in ["mary", "woman", "human"] {
        want.insert(Triple::new(ex(s), ty.clone(), res.clone()));
    }
    assert_eq!(got, want);
    let n = Rdf.solve(&view, None, None, None).len();
    assert_eq!(n, want.len(), "no duplicates");
    assert_eq!(Rdf.solve(&view, Some(&ty), Some(&ty), Some(&prop)), vec![Triple::new(ty.clone(), ty.clone(), prop)]);
    assert!(Rdf.solve(&view, Some(&ex("nobody")), Some(&ty), None).is_empty());
}

#[test]
fn rdf_does_not_duplicate_stated_axioms() {
    let (ty, prop) = (Term::iri(RDF_TYPE), Term::iri(RDF_PROPERTY));
    let store = load(&[Triple::new(ex("a"), ex("p"), ex("b")), Triple::new(ex("p"), ty.clone(), prop.clone())]);
    let view = store.read();
    let hits = Rdf.solve(&view, Some(&ex("p")), Some(&ty), Some(&prop));
    assert_eq!(hits.len(), 1);
}

#[test]
fn raw_applies_property_hierarchy() {
    let store = load(&[Triple::new(ex("a"), ex("child"), ex("b")), Triple::new(ex("c"), ex("parent"), ex("d"))]);
    store.transaction(|txn| txn.add_subproperty(&ex("child").to_string_iri(), &ex("parent").to_string_iri())).unwrap();
    let view = store.read();
    let by_parent: BTreeSet<Triple> = Raw.solve(&view, None, Some(&ex("parent")), None).into_iter().collect();
    assert_eq!(
        by_parent,
        BTreeSet::from([Triple::new(ex("a"), ex("parent"), ex("b")), Triple::new(ex("c"), ex("parent"), ex("d"))])
    );
    let by_child = Raw.solve(&view, None, Some(&ex("child")), None);
    assert_eq!(by_child, vec![Triple::new(ex("a"), ex("child"), ex("b"))]);
    let all: BTreeSet<Triple> = Raw.solve(&view, Some(&ex("a")), None, None).into_iter().collect();
    assert_eq!(
        all,
        BTreeSet::from([Triple::new(ex("a"), ex("child"), ex("b")), Triple::new(ex("a"), ex("parent"), ex("b"))])
    );
}

trait IriText {
    fn to_string_iri(&self) -> String;
}

impl IriText for Term {
    fn to_string_iri(&self) -> String {
        self.as_iri().expect("iri").to_string()
    }
}

#[test]
fn class_cycles_terminate() {
    let (ty, sub) = (Term::iri(RDF_TYPE), Term::iri(RDFS_SUBCLASSOF));
    let store = load(&[
        Triple::new(ex("a"), sub.clone(), ex("b")),
        Triple::new(ex("b"), sub.clone(), ex("c")),
        Triple::new(ex("c"), sub.clone(), ex("a")),
        Triple::new(ex("x"), ty.clone(), ex("b")),
    ]);
    let view = store.read();
    let types = Rdfs.solve(&view, Some(&ex("x")), Some(&ty), None);
    let objects: Vec<Term> = types.iter().map(|t| t.object.clone()).collect();
    assert_eq!(objects.len(), 3);
    assert_eq!(objects.iter().collect::<BTreeSet<_>>().len(), 3);
    let above_a = Rdfs.solve(&view, Some(&ex("a")), Some(&sub), None);
    assert_eq!(above_a.len(), 3);
    let all_sub = Rdfs.solve(&view, None, Some(&sub), None);
    assert_eq!(all_sub.len(), 9);
    let every = Rdfs.solve(&view, None, None, None);
    assert_eq!(every.len(), every.iter().collect::<BTreeSet<_>>().len());
}

#[test]
fn subclass_closure_is_reflexive_and_transitive() {
    let sub = Term::iri(RDFS_SUBCLASSOF);
    let store = load(&[Triple::new(ex("a"), sub.clone(), ex("b")), Triple::new(ex("b"), sub.clone(), ex("c"))]);
    let view = store.read();
    let got: BTreeSet<(Term, Term)> =
        Rdfs.solve(&view, None, Some(&sub), None).into_iter().map(|t| (t.subject, t.object)).collect();
    let want: BTreeSet<(Term, Term)> = [("a", "a"), ("a", "b"), ("a", "c"), ("b", "b"), ("b", "c"), ("c", "c")]
        .into_iter()
        .map(|(x, y)| (ex(x), ex(y)))
        .collect();
    assert_eq!(got, want);
    let below_c: BTreeSet<Term> = Rdfs.solve(&view, None, Some(&sub), Some(&ex("c"))).into_iter().map(|t| t.subject).collect();
    assert_eq!(below_c, BTreeSet::from([ex("a"), ex("b"), ex("c")]));
    assert!(Rdfs.solve(&view, Some(&ex("zz")), Some(&sub), None).is_empty());
}

#[test]
fn registry_accepts_new_modules() {
    struct Nothing;
    impl Entailment for Nothing {
        fn solve(&self, _: &ReadView, _: Option<&Term>, _: Option<&Term>, _: Option<&Term>) -> Vec<Triple> {
            Vec::new()
        }
    }
    let engine = QueryEngine::new();
    assert!(matches!(engine.parse("SELECT X WHERE (a, b, X) ENTAILMENT none"), Err(QueryError::UnknownEntailment(_))));
    engine.registry().register("none", Arc::new(Nothing));
    let store = entail_example();
    let (t, plan) = engine.run(&store, "SELECT X WHERE (mary, type, X) ENTAILMENT none").unwrap();
    assert!(t.rows.is_empty());
    assert_eq!(plan.entailment, "none");
    assert_eq!(engine.registry().names(), ["none", "raw", "rdf", "rdfs"]);
    assert!(entailment("nope").is_err());
}

fn split_query() -> Query {
    parse_query("SELECT Author, Name, Affil WHERE (paper1, author, Author), (Author, name, Name), (Author, affiliation, Affil)")
        .unwrap()
}

#[test]
fn splitting_counts_three_candidates() {
    let store = Store::new();
    let stats = PlanStats::from_view(&store.read());
    let q = split_query();
    let split = optimize(&q, &stats, &OptimizerOptions::default(), "raw");
    assert_eq!(split.candidates_evaluated, 3);
    let flat = optimize(&q, &stats, &OptimizerOptions { split: false, ..Default::default() }, "raw");
    assert_eq!(flat.candidates_evaluated, 6);
}

#[test]
fn single_pattern_plan() {
    let q = parse_query("SELECT X WHERE (a, b, X)").unwrap();
    let plan = optimize(&q, &PlanStats::default(), &OptimizerOptions::default(), "raw");
    assert_eq!(plan.order(), [0]);
    assert_eq!(plan.candidates_evaluated, 1);
    assert_eq!(plan.groups, [[0]]);
}

#[test]
fn independent_groups_are_reported() {
    let q = parse_query("SELECT X, Y WHERE (a, p, X), (b, q, Y), (X, r, c)").unwrap();
    let plan = optimize(&q, &PlanStats::default(), &OptimizerOptions::default(), "raw");
    assert_eq!(plan.groups.len(), 2);
    let mut members: Vec<Vec<usize>> = plan.groups.iter().map(|g| {
        let mut g = g.clone();
        g.sort();
        g
    }).collect();
    members.sort();
    assert_eq!(members, [vec![0, 2], vec![1]]);
    // Two groups of sizes 2 and 1: 2! * 1! candidates.
    assert_eq!(plan.candidates_evaluated, 2);
}

#[test]
fn greedy_above_limit() {
    let text = format!(
        "SELECT X0 WHERE {}",
        (0..10).map(|i| format!("(X{i}, p, X{})", i + 1)).collect::<Vec<_>>().join(", ")
    );
    let q = parse_query(&text).unwrap();
    let plan = optimize(&q, &PlanStats::default(), &OptimizerOptions::default(), "raw");
    assert_eq!(plan.steps.len(), 10);
    assert_eq!(plan.candidates_evaluated, 1);
    let sorted: BTreeSet<usize> = plan.order().into_iter().collect();
    assert_eq!(sorted.len(), 10);
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn selective_pattern_runs_first_on_skewed_data() {
    let mut triples = Vec::new();
    for i in 0..10_000 {
        triples.push(Triple::new(ex(&format!("s{i}")), ex("common"), ex(&format!("o{}", i % 50))));
    }
    for i in 0..10 {
        triples.push(Triple::new(ex(&format!("s{i}")), ex("rare"), Term::plain(format!("r{i}"))));
    }
    let store = load(&triples);
    let engine = QueryEngine::new().with_default_entailment("raw");
    let q = engine.parse("SELECT S, O, R WHERE (S, common, O), (S, rare, R)").unwrap();
    let view = store.read();
    let plan = engine.plan(&view, &q, None).unwrap();
    assert_eq!(plan.order(), [1, 0]);
    let (_, chosen) = engine.execute(&view, &q, &plan).unwrap();
    let stats = PlanStats::from_view(&view);
    let worst = permutations(2)
        .into_iter()
        .map(|o| execute(&view, &q, &QueryPlan::with_order(&q, &stats, &o, "raw"), &Raw).1.rows_touched)
        .max()
        .unwrap();
    assert!(chosen.rows_touched < worst, "{} vs {worst}", chosen.rows_touched);
}

#[test]
fn filters_limit_and_distinct() {
    let store = load(&[
        Triple::new(ex("a"), ex("age"), Term::plain("17")),
        Triple::new(ex("b"), ex("age"), Term::typed("http://www.w3.org/2001/XMLSchema#int", "30")),
        Triple::new(ex("c"), ex("age"), Term::plain("unknown")),
        Triple::new(ex("d"), ex("age"), ex("weird")),
        Triple::new(ex("e"), ex("age"), Term::plain("18.0")),
    ]);
    let engine = QueryEngine::new().with_default_entailment("raw");
    let rows = |q: &str| column(&engine.run(&store, q).unwrap().0);
    assert_eq!(rows("SELECT P WHERE (P, age, A) FILTER A >= 18"), BTreeSet::from([ex("b"), ex("e")]));
    assert_eq!(rows("SELECT P WHERE (P, age, 18)"), BTreeSet::from([ex("e")]));
    assert_eq!(rows("SELECT P WHERE (P, age, A) FILTER A = <http://example.org/weird>"), BTreeSet::from([ex("d")]));
    assert_eq!(rows("SELECT P WHERE (P, age, A) FILTER A != \"unknown\"").len(), 4);
    assert_eq!(rows("SELECT P WHERE (P, age, A) FILTER A < \"v\""), BTreeSet::from([ex("c")]));
    let (t, _) = engine.run(&store, "SELECT P WHERE (P, age, A) LIMIT 2").unwrap();
    assert_eq!(t.rows.len(), 2);
    let (t, _) = engine.run(&store, "SELECT P WHERE (P, age, A) LIMIT 0").unwrap();
    assert!(t.rows.is_empty());
    let (t, _) = engine.run(&store, "SELECT Q WHERE (P, Q, A)").unwrap();
    assert_eq!(t.rows.len(), 5);
    let (t, _) = engine.run(&store, "SELECT DISTINCT Q WHERE (P, Q, A)").unwrap();
    assert_eq!(t.rows, vec![vec![ex("age")]]);
    let (t, _) = engine.run(&store, "SELECT P WHERE (P, age, A), (A, age, B)").unwrap();
    assert!(t.rows.is_empty());
}

#[test]
fn empty_store_gives_empty_result() {
    let store = Store::new();
    let (t, _) = QueryEngine::new().run(&store, "SELECT X, Y WHERE (X, type, Y)").unwrap();
    assert_eq!(t.columns, ["X", "Y"]);
    assert!(t.rows.is_empty());
}

#[test]
fn result_table_xml() {
    let table = ResultTable {
        columns: vec!["X".into(), "Y".into()],
        rows: vec![
            vec![ex("a"), Term::lang("en", "a<b")],
            vec![Term::bnode("__f#1"), Term::typed("http://t/d", "1 & 2")],
            vec![ex("c"), Term::plain("")],
        ],
    };
    let xml = table.to_xml();
    assert_eq!(
        xml,
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<resulttable>\n<columns><col>X</col><col>Y</col></columns>\n\
         <row><cell kind=\"iri\">http://example.org/a</cell><cell kind=\"literal\" lang=\"en\">a&lt;b</cell></row>\n\
         <row><cell kind=\"bnode\">__f#1</cell><cell kind=\"literal\" datatype=\"http://t/d\">1 &amp; 2</cell></row>\n\
         <row><cell kind=\"iri\">http://example.org/c</cell><cell kind=\"literal\"></cell></row>\n</resulttable>\n"
    );
    assert_eq!(ResultTable::from_xml(&xml).unwrap(), table);
    assert!(ResultTable::from_xml("<other/>").is_err());
    assert!(ResultTable::from_xml("<resulttable><columns><col>X</col></columns><row></row></resulttable>").is_err());
    let html = crate::htmlgen::render_to_string(&table.to_html()).unwrap();
    assert!(html.starts_with("<table class=\"results\"><tr><th>X</th><th>Y</th></tr>"), "{html}");
    assert!(html.contains("<td>a&lt;b@en</td>"));
}

/// Independent join: every combination of stored triples, one per pattern.
fn brute_force(triples: &[Triple], q: &Query) -> BTreeMap<Vec<Term>, usize> {
    fn go(
        triples: &[Triple],
        q: &Query,
        i: usize,
        env: &mut HashMap<String, Term>,
        out: &mut BTreeMap<Vec<Term>, usize>,
    ) {
        if i == q.patterns.len() {
            let row = q.projection.iter().map(|v| env[v].clone()).collect();
            *out.entry(row).or_default() += 1;
            return;
        }
        let p = &q.patterns[i];
        for t in triples {
            let mut added = Vec::new();
            let mut ok = true;
            for (qt, val) in [(&p.subject, &t.subject), (&p.predicate, &t.predicate), (&p.object, &t.object)] {
                match qt {
                    QTerm::Const(c) => ok &= c == val,
                    QTerm::Var(v) => match env.get(v) {
                        Some(b) => ok &= b == val,
                        None => {
                            env.insert(v.clone(), val.clone());
                            added.push(v.clone());
                        }
                    },
                }
                if !ok {
                    break;
                }
            }
            if ok {
                go(triples, q, i + 1, env, out);
            }
            for v in added {
                env.remove(&v);
            }
        }
    }
    let mut out = BTreeMap::new();
    go(triples, q, 0, &mut HashMap::new(), &mut out);
    out
}

fn multiset(t: &ResultTable) -> BTreeMap<Vec<Term>, usize> {
    let mut m = BTreeMap::new();
    for r in &t.rows {
        *m.entry(r.clone()).or_default() += 1;
    }
    m
}

fn arb_store() -> impl Strategy<Value = Vec<Triple>> {
    prop::collection::btree_set((0..12usize, 0..3usize, 0..14usize), 150..200).prop_map(|set| {
        set.into_iter()
            .map(|(s, p, o)| {
                let object = if o < 12 { ex(&format!("n{o}")) } else { Term::plain(format!("{o}")) };
                Triple::new(ex(&format!("n{s}")), ex(&format!("p{p}")), object)
            })
            .collect()
    })
}

fn arb_query() -> impl Strategy<Value = String> {
    let term = prop_oneof![
        3 => prop::sample::select(vec!["A", "B", "C", "D"]).prop_map(str::to_string),
        1 => (0..12usize).prop_map(|i| format!("n{i}")),
    ];
    let pred = prop_oneof![3 => (0..3usize).prop_map(|i| format!("p{i}")), 1 => Just("P".to_string())];
    prop::collection::vec((term.clone(), pred, term), 3).prop_map(|pats| {
        let body: Vec<String> = pats.iter().map(|(s, p, o)| format!("({s}, {p}, {o})")).collect();
        format!("SELECT * WHERE {}", body.join(", "))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_order_matches_brute_force(triples in arb_store(), text in arb_query()) {
        let store = load(&triples);
        let q = parse_query(&text).unwrap();
        prop_assume!(!q.projection.is_empty());
        let want = brute_force(&triples, &q);
        let view = store.read();
        let stats = PlanStats::from_view(&view);
        let plan = optimize(&q, &stats, &OptimizerOptions::default(), "raw");
        prop_assert_eq!(multiset(&execute(&view, &q, &plan, &Raw).0), want.clone());
        for order in permutations(3) {
            let p = QueryPlan::with_order(&q, &stats, &order, "raw");
            prop_assert_eq!(multiset(&execute(&view, &q, &p, &Raw).0), want.clone(), "order {:?}", order);
        }
    }

    #[test]
    fn candidates_bounded_by_factorial(text in prop::collection::vec((0..4usize, 0..3usize, 0..4usize), 1..6)) {
        let body: Vec<String> = text.iter().map(|(s, p, o)| format!("(V{s}, p{p}, V{o})")).collect();
        let q = parse_query(&format!("SELECT * WHERE {}", body.join(", "))).unwrap();
        let k = q.patterns.len() as u64;
        let fact: u64 = (1..=k).product();
        let split = optimize(&q, &PlanStats::default(), &OptimizerOptions::default(), "raw");
        let flat = optimize(&q, &PlanStats::default(), &OptimizerOptions { split: false, ..Default::default() }, "raw");
        prop_assert_eq!(flat.candidates_evaluated, fact);
        prop_assert!(split.candidates_evaluated <= fact);
        prop_assert_eq!(split.order().into_iter().collect::<BTreeSet<_>>().len(), q.patterns.len());
    }

    #[test]
    fn entailments_are_monotone_on_type_queries(
        edges in prop::collection::btree_set((0..6usize, 0..6usize), 0..8),
        types in prop::collection::btree_set((0..5usize, 0..6usize), 1..8),
    ) {
        let (ty, sub) = (Term::iri(RDF_TYPE), Term::iri(RDFS_SUBCLASSOF));
        // Edges only go upward, keeping the hierarchy acyclic.
        let mut triples: Vec<Triple> = edges
            .iter()
            .filter(|(a, b)| a < b)
            .map(|(a, b)| Triple::new(ex(&format!("c{a}")), sub.clone(), ex(&format!("c{b}"))))
            .collect();
        triples.extend(types.iter().map(|(i, c)| Triple::new(ex(&format!("i{i}")), ty.clone(), ex(&format!("c{c}")))));
        let store = load(&triples);
        let view = store.read();
        let resource = Term::iri(RDFS_RESOURCE);
        let property = Term::iri(RDF_PROPERTY);
        for i in 0..5 {
            let s = ex(&format!("i{i}"));
            let raw: BTreeSet<Triple> = Raw.solve(&view, Some(&s), Some(&ty), None).into_iter().collect();
            let rdf: BTreeSet<Triple> = Rdf.solve(&view, Some(&s), Some(&ty), None).into_iter().collect();
            let rdfs: BTreeSet<Triple> = Rdfs.solve(&view, Some(&s), Some(&ty), None).into_iter().collect();
            prop_assert!(raw.is_subset(&rdf));
            prop_assert!(raw.is_subset(&rdfs));
            let rdf_derived: BTreeSet<Triple> =
                rdf.into_iter().filter(|t| t.object != resource && t.object != property).collect();
            prop_assert!(rdf_derived.is_subset(&rdfs));
        }
    }

    #[test]
    fn raw_equals_scan_without_hierarchy(triples in arb_store(), s in prop::option::of(0..12usize), p in prop::option::of(0..3usize)) {
        let store = load(&triples);
        let view = store.read();
        let s = s.map(|i| ex(&format!("n{i}")));
        let p = p.map(|i| ex(&format!("p{i}")));
        let got: BTreeSet<Triple> = Raw.solve(&view, s.as_ref(), p.as_ref(), None).into_iter().collect();
        let want: BTreeSet<Triple> = triples
            .iter()
            .filter(|t| s.as_ref().is_none_or(|s| *s == t.subject) && p.as_ref().is_none_or(|p| *p == t.predicate))
            .cloned()
            .collect();
        prop_assert_eq!(got, want);
    }
}
