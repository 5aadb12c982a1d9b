use std::collections::HashMap;
use std::sync::Arc;

use super::data::{BulkObject, StoreData};
use super::{Event, EventMask, LoadPhase, Pattern, Store, StoreError, StoredTriple};
use crate::rdfio::{Literal, Term, Triple};

/// Triples of one source in compact form: `terms` is a table and each
/// triple is `[subject, predicate, object, line]` with the first three
/// indexing into it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BulkLoad {
    pub source: String,
    pub terms: Vec<Term>,
    pub triples: Vec<[u32; 4]>,
}

impl BulkLoad {
    fn triple(&self, t: &[u32; 4]) -> Triple {
        Triple::new(
            self.terms[t[0] as usize].clone(),
            self.terms[t[1] as usize].clone(),
            self.terms[t[2] as usize].clone(),
        )
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Action {
    Assert(StoredTriple),
    /// Resolved to a concrete record when recorded.
    Retract(StoredTriple),
    Update { old: StoredTriple, new: Triple },
    AddSubProperty(String, String),
    Load(String, LoadPhase),
    Bulk(Arc<BulkLoad>),
}

fn check_roles(t: &Triple) -> Result<(), StoreError> {
    t.check_roles().map_err(|e| StoreError::Role(e.to_string()))
}

/// Changes recorded by a transaction body. Reads through the transaction
/// see the committed state with the pending changes applied.
pub struct Transaction<'a> {
    store: &'a Store,
    actions: Vec<Action>,
}

impl<'a> Transaction<'a> {
    pub(crate) fn new(store: &'a Store) -> Self {
        Transaction { store, actions: Vec::new() }
    }

    pub(crate) fn into_actions(self) -> Vec<Action> {
        self.actions
    }

    pub fn store(&self) -> &'a Store {
        self.store
    }

    /// Number of recorded actions.
    pub fn pending(&self) -> usize {
        self.actions.len()
    }

    pub fn assert(&mut self, triple: Triple, source: &str, line: u32) -> Result<(), StoreError> {
        self.store.check_writable()?;
        check_roles(&triple)?;
        self.actions.push(Action::Assert(StoredTriple { triple, source: source.to_string(), line }));
        Ok(())
    }

    /// Retracts every triple currently matching `pattern`; returns how many.
    pub fn retract(&mut self, pattern: &Pattern) -> Result<usize, StoreError> {
        self.store.check_writable()?;
        let hits = self.matches(pattern)?;
        let n = hits.len();
        self.actions.extend(hits.into_iter().map(Action::Retract));
        Ok(n)
    }

    pub fn retract_source(&mut self, source: &str) -> Result<usize, StoreError> {
        self.retract(&Pattern::any().source(source))
    }

    /// Replaces `old` from `source` by `new`, keeping source and line.
    /// Returns false when `old` is not present.
    pub fn update(&mut self, old: &Triple, source: &str, new: Triple) -> Result<bool, StoreError> {
        self.store.check_writable()?;
        check_roles(&new)?;
        let pattern = Pattern::new(Some(old.subject.clone()), Some(old.predicate.clone()), Some(old.object.clone()))
            .source(source);
        let Some(found) = self.matches(&pattern)?.pop() else {
            return Ok(false);
        };
        self.actions.push(Action::Update { old: found, new });
        Ok(true)
    }

    pub fn add_subproperty(&mut self, child: &str, parent: &str) -> Result<(), StoreError> {
        self.store.check_writable()?;
        self.actions.push(Action::AddSubProperty(child.to_string(), parent.to_string()));
        Ok(())
    }

    /// Brackets a file load with load events.
    pub fn begin_load(&mut self, source: &str) -> Result<(), StoreError> {
        self.store.check_writable()?;
        self.actions.push(Action::Load(source.to_string(), LoadPhase::Begin));
        Ok(())
    }

    pub fn end_load(&mut self, source: &str) -> Result<(), StoreError> {
        self.store.check_writable()?;
        self.actions.push(Action::Load(source.to_string(), LoadPhase::End));
        Ok(())
    }

    /// Asserts many triples of one source at once.
    pub fn bulk_load(&mut self, bulk: BulkLoad) -> Result<(), StoreError> {
        self.store.check_writable()?;
        let n = bulk.terms.len() as u32;
        for t in &bulk.triples {
            if t[..3].iter().any(|i| *i >= n) {
                return Err(StoreError::Argument(format!("term index out of range in {t:?}")));
            }
            if bulk.terms[t[0] as usize].is_literal() || !matches!(bulk.terms[t[1] as usize], Term::Iri(_)) {
                check_roles(&bulk.triple(t))?;
            }
        }
        self.actions.push(Action::Bulk(Arc::new(bulk)));
        Ok(())
    }

    /// Triples matching `pattern` as this transaction sees them.
    pub fn matches(&self, pattern: &Pattern) -> Result<Vec<StoredTriple>, StoreError> {
        let committed: Vec<StoredTriple> = {
            let view = self.store.read();
            let hits = view.match_pattern(pattern)?.collect();
            hits
        };
        if self.actions.is_empty() {
            return Ok(committed);
        }
        let mut overlay = Overlay::default();
        for st in committed {
            overlay.add(st);
        }
        for action in &self.actions {
            match action {
                Action::Assert(st) if pattern.matches(&st.triple, &st.source) => overlay.add(st.clone()),
                Action::Retract(st) => overlay.remove(&st.triple, &st.source),
                Action::Update { old, new } => {
                    overlay.remove(&old.triple, &old.source);
                    if pattern.matches(new, &old.source) {
                        overlay.add(StoredTriple { triple: new.clone(), source: old.source.clone(), line: old.line });
                    }
                }
                Action::Bulk(b) => {
                    for t in &b.triples {
                        let triple = b.triple(t);
                        if pattern.matches(&triple, &b.source) {
                            overlay.add(StoredTriple { triple, source: b.source.clone(), line: t[3] });
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(overlay.into_vec())
    }

    pub fn contains(&self, triple: &Triple, source: &str) -> Result<bool, StoreError> {
        let pattern =
            Pattern::new(Some(triple.subject.clone()), Some(triple.predicate.clone()), Some(triple.object.clone()))
                .source(source);
        Ok(!self.matches(&pattern)?.is_empty())
    }

    /// Runs `body` as a nested transaction: on `Err` only the actions it
    /// recorded are discarded, and the error is returned.
    pub fn nested<T, E, F>(&mut self, body: F) -> Result<T, E>
    where
        F: FnOnce(&mut Transaction<'a>) -> Result<T, E>,
    {
        let mark = self.actions.len();
        let out = body(self);
        if out.is_err() {
            self.actions.truncate(mark);
        }
        out
    }
}

/// Ordered set of stored triples keyed by triple and source.
#[derive(Default)]
struct Overlay {
    items: Vec<Option<StoredTriple>>,
    index: HashMap<(Triple, String), usize>,
}

impl Overlay {
    fn add(&mut self, st: StoredTriple) {
        let key = (st.triple.clone(), st.source.clone());
        if self.index.contains_key(&key) {
            return;
        }
        self.index.insert(key, self.items.len());
        self.items.push(Some(st));
    }

    fn remove(&mut self, t: &Triple, source: &str) {
        if let Some(i) = self.index.remove(&(t.clone(), source.to_string())) {
            self.items[i] = None;
        }
    }

    fn into_vec(self) -> Vec<StoredTriple> {
        self.items.into_iter().flatten().collect()
    }
}

pub(crate) fn apply(d: &mut StoreData, action: Action, want: EventMask, events: &mut Vec<Event>) {
    match action {
        Action::Assert(st) => {
            if d.insert(&st.triple, &st.source, st.line, want, events).is_some() && want.contains(EventMask::ASSERT) {
                events.push(Event::Assert(st));
            }
        }
        Action::Retract(st) => {
            if let Some(old) = d.delete(&st.triple, &st.source, want, events) {
                if want.contains(EventMask::RETRACT) {
                    events.push(Event::Retract(old));
                }
            }
        }
        Action::Update { old, new } => {
            if let Some((old, new)) = d.replace(&old.triple, &old.source, &new, want, events) {
                if want.contains(EventMask::UPDATE) {
                    events.push(Event::Update { old, new });
                }
            }
        }
        Action::AddSubProperty(child, parent) => d.add_subproperty(&child, &parent),
        Action::Load(source, phase) => {
            if want.contains(EventMask::LOAD) {
                events.push(Event::Load { source, phase });
            }
        }
        Action::Bulk(bulk) => {
            if want.intersects(EventMask::ASSERT | EventMask::NEW_LITERAL) {
                for t in &bulk.triples {
                    let st = StoredTriple { triple: bulk.triple(t), source: bulk.source.clone(), line: t[3] };
                    apply(d, Action::Assert(st), want, events);
                }
                return;
            }
            let handles: Vec<_> = bulk.terms.iter().map(|t| d.interner.intern_term(t)).collect();
            let source = d.interner.intern(&bulk.source, false);
            let literals: Vec<(usize, &Literal)> = bulk
                .terms
                .iter()
                .enumerate()
                .filter_map(|(i, t)| match t {
                    Term::Literal(l) => Some((i, l)),
                    _ => None,
                })
                .collect();
            let interned = d.literals.intern_batch(literals.iter().map(|(_, l)| *l));
            let mut literal_ids = vec![None; bulk.terms.len()];
            for ((i, _), id) in literals.iter().zip(&interned) {
                literal_ids[*i] = Some(*id);
            }
            d.reserve(bulk.triples.len());
            for t in &bulk.triples {
                let s = handles[t[0] as usize].expect("checked subject");
                let p = handles[t[1] as usize].expect("checked predicate");
                let o = match literal_ids[t[2] as usize] {
                    Some(id) => BulkObject::Literal(id),
                    None => BulkObject::Resource(handles[t[2] as usize].expect("resource")),
                };
                d.insert_bulk(s, p, o, source, t[3]);
            }
            for id in interned {
                d.literals.drop_unused(id);
            }
        }
    }
}
