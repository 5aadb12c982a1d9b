//! Entailment modules: the triple oracles that queries run against.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::Arc;

use parking_lot::RwLock;

use super::QueryError;
use crate::rdfio::{Term, Triple};
use crate::store::{Pattern, ReadView};
use crate::vocab::{RDFS_CLASS, RDFS_RESOURCE, RDFS_SUBCLASSOF, RDFS_SUBPROPERTYOF, RDF_PROPERTY, RDF_TYPE};

/// A triple oracle. `solve` returns every entailed triple matching the
/// given constants, each once.
pub trait Entailment: Send + Sync {
    fn solve(&self, view: &ReadView, s: Option<&Term>, p: Option<&Term>, o: Option<&Term>) -> Vec<Triple>;
}

/// Collects triples, dropping duplicates, in first-seen order.
#[derive(Default)]
struct Solutions {
    seen: HashSet<Triple>,
    out: Vec<Triple>,
}

impl Solutions {
    fn push(&mut self, t: Triple) {
        if !self.seen.contains(&t) {
            self.seen.insert(t.clone());
            self.out.push(t);
        }
    }

    fn extend(&mut self, ts: impl IntoIterator<Item = Triple>) {
        for t in ts {
            self.push(t);
        }
    }
}

fn stored(view: &ReadView, s: Option<&Term>, p: Option<&Term>, o: Option<&Term>) -> Vec<Triple> {
    let pattern = Pattern::new(s.cloned(), p.cloned(), o.cloned());
    match view.match_pattern(&pattern) {
        Ok(it) => it.map(|st| st.triple).collect(),
        Err(_) => Vec::new(),
    }
}

/// Stored triples plus `rdfs:subPropertyOf` closure on the predicate:
/// `(s, p, o)` holds when some `(s, q, o)` is stored with `q` at or below
/// `p` in the store's property hierarchy.
pub struct Raw;

impl Entailment for Raw {
    fn solve(&self, view: &ReadView, s: Option<&Term>, p: Option<&Term>, o: Option<&Term>) -> Vec<Triple> {
        let mut out = Solutions::default();
        match p {
            Some(p) => {
                let Some(pid) = view.predicate(p) else { return Vec::new() };
                for q in view.subproperties(pid) {
                    let q = view.term(view.predicate_node(q));
                    out.extend(
                        stored(view, s, Some(&q), o)
                            .into_iter()
                            .map(|t| Triple::new(t.subject, p.clone(), t.object)),
                    );
                }
            }
            None => {
                for t in stored(view, s, None, o) {
                    let pid = view.predicate(&t.predicate).expect("stored predicate");
                    for a in view.superproperties(pid) {
                        out.push(Triple::new(t.subject.clone(), view.term(view.predicate_node(a)), t.object.clone()));
                    }
                }
            }
        }
        out.out
    }
}

/// [`Raw`] plus `(P, rdf:type, rdf:Property)` for every predicate in use
/// and `(S, rdf:type, rdfs:Resource)` for every subject.
pub struct Rdf;

impl Entailment for Rdf {
    fn solve(&self, view: &ReadView, s: Option<&Term>, p: Option<&Term>, o: Option<&Term>) -> Vec<Triple> {
        let mut out = Solutions::default();
        out.extend(Raw.solve(view, s, p, o));
        let rdf_type = Term::iri(RDF_TYPE);
        if p.is_some_and(|p| *p != rdf_type) {
            return out.out;
        }
        let property = Term::iri(RDF_PROPERTY);
        if o.is_none_or(|o| *o == property) {
            let in_use = |pid| view.predicate_count(pid) > 0;
            match s {
                Some(s) => {
                    if view.predicate(s).is_some_and(in_use) {
                        out.push(Triple::new(s.clone(), rdf_type.clone(), property.clone()));
                    }
                }
                None => {
                    let mut preds: Vec<Term> = view
                        .predicates()
                        .into_iter()
                        .filter(|p| in_use(*p))
                        .map(|p| view.term(view.predicate_node(p)))
                        .collect();
                    preds.sort();
                    for p in preds {
                        out.push(Triple::new(p, rdf_type.clone(), property.clone()));
                    }
                }
            }
        }
        let resource = Term::iri(RDFS_RESOURCE);
        if o.is_none_or(|o| *o == resource) {
            match s {
                Some(s) => {
                    let used = view.lookup(s).is_some_and(|h| view.subject_count(h) > 0);
                    if used {
                        out.push(Triple::new(s.clone(), rdf_type.clone(), resource.clone()));
                    }
                }
                None => {
                    let subjects: std::collections::BTreeSet<Term> = view.all().map(|st| st.triple.subject).collect();
                    for s in subjects {
                        out.push(Triple::new(s, rdf_type.clone(), resource.clone()));
                    }
                }
            }
        }
        out.out
    }
}

/// [`Raw`] plus class reasoning: `rdf:type` closed over `rdfs:subClassOf`,
/// and `rdfs:subClassOf` and `rdfs:subPropertyOf` closed reflexively and
/// transitively. The axiomatic triples of [`Rdf`] are not included.
pub struct Rdfs;

struct Hierarchy<'v> {
    view: &'v ReadView,
    relation: Term,
    /// Members are typed with this class.
    kind: Term,
}

impl Hierarchy<'_> {
    fn step(&self, from: &Term, up: bool) -> Vec<Term> {
        if up {
            Raw.solve(self.view, Some(from), Some(&self.relation), None).into_iter().map(|t| t.object).collect()
        } else {
            Raw.solve(self.view, None, Some(&self.relation), Some(from)).into_iter().map(|t| t.subject).collect()
        }
    }

    /// Nodes reachable from `start` in one or more steps, each once.
    fn closure(&self, start: &Term, up: bool) -> Vec<Term> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(x) = queue.pop_front() {
            for y in self.step(&x, up) {
                if seen.insert(y.clone()) {
                    out.push(y.clone());
                    queue.push_back(y);
                }
            }
        }
        out
    }

    /// Nodes that take part in the relation or are declared members.
    fn is_member(&self, t: &Term) -> bool {
        !self.step(t, true).is_empty()
            || !self.step(t, false).is_empty()
            || !Raw.solve(self.view, Some(t), Some(&Term::iri(RDF_TYPE)), Some(&self.kind)).is_empty()
    }

    fn members(&self) -> Vec<Term> {
        let mut set = std::collections::BTreeSet::new();
        for t in Raw.solve(self.view, None, Some(&self.relation), None) {
            set.insert(t.subject);
            set.insert(t.object);
        }
        for t in Raw.solve(self.view, None, Some(&Term::iri(RDF_TYPE)), Some(&self.kind)) {
            set.insert(t.subject);
        }
        set.into_iter().collect()
    }

    /// Reflexive-transitive closure of the relation.
    fn solve(&self, s: Option<&Term>, o: Option<&Term>, out: &mut Solutions) {
        let emit = |out: &mut Solutions, a: &Term, b: &Term| out.push(Triple::new(a.clone(), self.relation.clone(), b.clone()));
        match (s, o) {
            (Some(s), _) => {
                let mut above = self.closure(s, true);
                if self.is_member(s) && !above.contains(s) {
                    above.insert(0, s.clone());
                }
                for c in above.iter().filter(|c| o.is_none_or(|o| o == *c)) {
                    emit(out, s, c);
                }
            }
            (None, Some(o)) => {
                let mut below = self.closure(o, false);
                if self.is_member(o) && !below.contains(o) {
                    below.insert(0, o.clone());
                }
                for c in &below {
                    emit(out, c, o);
                }
            }
            (None, None) => {
                for m in self.members() {
                    self.solve(Some(&m), None, out);
                }
            }
        }
    }
}

impl Rdfs {
    fn types(&self, view: &ReadView, s: Option<&Term>, o: Option<&Term>, out: &mut Solutions) {
        let rdf_type = Term::iri(RDF_TYPE);
        let classes = Hierarchy { view, relation: Term::iri(RDFS_SUBCLASSOF), kind: Term::iri(RDFS_CLASS) };
        match (s, o) {
            (None, Some(c)) => {
                let mut below = vec![c.clone()];
                below.extend(classes.closure(c, false).into_iter().filter(|d| d != c));
                for d in below {
                    for t in Raw.solve(view, None, Some(&rdf_type), Some(&d)) {
                        out.push(Triple::new(t.subject, rdf_type.clone(), c.clone()));
                    }
                }
            }
            _ => {
                let mut above_cache: BTreeMap<Term, Vec<Term>> = BTreeMap::new();
                for t in Raw.solve(view, s, Some(&rdf_type), None) {
                    let above = above_cache.entry(t.object.clone()).or_insert_with(|| {
                        let mut v = vec![t.object.clone()];
                        v.extend(classes.closure(&t.object, true).into_iter().filter(|c| *c != t.object));
                        v
                    });
                    for c in above.iter().filter(|c| o.is_none_or(|o| o == *c)) {
                        out.push(Triple::new(t.subject.clone(), rdf_type.clone(), c.clone()));
                    }
                }
            }
        }
    }
}

impl Entailment for Rdfs {
    fn solve(&self, view: &ReadView, s: Option<&Term>, p: Option<&Term>, o: Option<&Term>) -> Vec<Triple> {
        let mut out = Solutions::default();
        let rdf_type = Term::iri(RDF_TYPE);
        let sub_class = Term::iri(RDFS_SUBCLASSOF);
        let sub_prop = Term::iri(RDFS_SUBPROPERTYOF);
        let wants = |x: &Term| p.is_none_or(|p| p == x);
        if wants(&rdf_type) {
            self.types(view, s, o, &mut out);
        }
        if wants(&sub_class) {
            Hierarchy { view, relation: sub_class.clone(), kind: Term::iri(RDFS_CLASS) }.solve(s, o, &mut out);
        }
        if wants(&sub_prop) {
            Hierarchy { view, relation: sub_prop.clone(), kind: Term::iri(RDF_PROPERTY) }.solve(s, o, &mut out);
        }
        let special = p.is_some_and(|p| *p == rdf_type || *p == sub_class || *p == sub_prop);
        if !special {
            out.extend(Raw.solve(view, s, p, o));
        }
        out.out
    }
}

/// Named entailment modules. New modules can be registered while the
/// registry is in use.
pub struct EntailmentRegistry {
    modules: RwLock<BTreeMap<String, Arc<dyn Entailment>>>,
}

impl Default for EntailmentRegistry {
    fn default() -> Self {
        let r = EntailmentRegistry { modules: RwLock::new(BTreeMap::new()) };
        r.register("raw", Arc::new(Raw));
        r.register("rdf", Arc::new(Rdf));
        r.register("rdfs", Arc::new(Rdfs));
        r
    }
}

impl EntailmentRegistry {
    /// Registers or replaces the module called `name`.
    pub fn register(&self, name: &str, module: Arc<dyn Entailment>) {
        self.modules.write().insert(name.to_string(), module);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Entailment>, QueryError> {
        self.modules.read().get(name).cloned().ok_or_else(|| QueryError::UnknownEntailment(name.to_string()))
    }

    pub fn names(&self) -> Vec<String> {
        self.modules.read().keys().cloned().collect()
    }
}

/// Looks up a built-in module by name.
pub fn entailment(name: &str) -> Result<Arc<dyn Entailment>, QueryError> {
    match name {
        "raw" => Ok(Arc::new(Raw)),
        "rdf" => Ok(Arc::new(Rdf)),
        "rdfs" => Ok(Arc::new(Rdfs)),
        _ => Err(QueryError::UnknownEntailment(name.to_string())),
    }
}
