//! In-memory triple store.
//!
//! Resources are interned to [`Handle`]s and literals are kept, shared, in
//! a table ordered by [`compare_literals`]. Every triple record is linked
//! into six chains: all triples, and hash tables on subject, predicate,
//! object, subject+predicate and predicate+object. Predicates hash on the
//! root of their `rdfs:subPropertyOf` hierarchy, so a chain may hold
//! sibling predicates; matching filters them out.
//!
//! Changes go through [`Store::transaction`]. The body records actions;
//! the outer transaction applies them atomically under the write lock,
//! after readers have drained. Monitors see the resulting events once the
//! lock is released, one at a time, and may queue a follow-up transaction.
//!
//! ```
//! use triplekit::rdfio::{Term, Triple};
//! use triplekit::store::{Pattern, Store, StoreError};
//!
//! let store = Store::new();
//! let t = Triple::new(Term::iri("http://x/a"), Term::iri("http://x/p"), Term::plain("v"));
//! store.transaction(|txn| txn.assert(t.clone(), "demo", 1)).unwrap();
//! let hits: Vec<_> = store.match_pattern(&Pattern::any().subject(Term::iri("http://x/a"))).unwrap().collect();
//! assert_eq!(hits[0].triple, t);
//! # Ok::<(), StoreError>(())
//! ```

mod data;
mod interner;
mod literals;
mod txn;

use std::cell::RefCell;
use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use bitflags::bitflags;
use parking_lot::lock_api::ArcRwLockReadGuard;
use parking_lot::{Mutex, RawRwLock, RwLock};
use thiserror::Error;

use crate::rdfio::{Literal, Term, Triple};

pub use data::{Node, PredId};
pub use interner::Handle;
pub use literals::{compare_literals, numeric_value, LitId, LiteralQuery};
pub use txn::{BulkLoad, Transaction};

use data::{Cursor, IdPattern, StoreData};
use txn::Action;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    /// A write or commit while this thread has an open read.
    #[error("permission error: {0}")]
    Permission(String),
    #[error("role error: {0}")]
    Role(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("a transaction is already running on this thread; use Transaction::nested")]
    NestedTransaction,
}

pub type MonitorError = Box<dyn std::error::Error + Send + Sync>;

/// A triple with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StoredTriple {
    pub triple: Triple,
    pub source: String,
    pub line: u32,
}

bitflags! {
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
    pub struct EventMask: u32 {
        const ASSERT = 1;
        const RETRACT = 1 << 1;
        const UPDATE = 1 << 2;
        const NEW_LITERAL = 1 << 3;
        const OLD_LITERAL = 1 << 4;
        const TRANSACTION = 1 << 5;
        const LOAD = 1 << 6;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadPhase {
    Begin,
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Assert(StoredTriple),
    Retract(StoredTriple),
    Update { old: StoredTriple, new: StoredTriple },
    NewLiteral(Literal),
    OldLiteral(Literal),
    TransactionBegin { id: u64 },
    TransactionEnd { id: u64 },
    Load { source: String, phase: LoadPhase },
}

impl Event {
    pub fn kind(&self) -> EventMask {
        match self {
            Event::Assert(_) => EventMask::ASSERT,
            Event::Retract(_) => EventMask::RETRACT,
            Event::Update { .. } => EventMask::UPDATE,
            Event::NewLiteral(_) => EventMask::NEW_LITERAL,
            Event::OldLiteral(_) => EventMask::OLD_LITERAL,
            Event::TransactionBegin { .. } | Event::TransactionEnd { .. } => EventMask::TRANSACTION,
            Event::Load { .. } => EventMask::LOAD,
        }
    }
}

/// Object position of a [`Pattern`].
#[derive(Debug, Clone, Default, PartialEq)]
pub enum ObjectPattern {
    #[default]
    Any,
    Is(Term),
    Literal(LiteralQuery),
}

/// A triple pattern; `None` positions are free. Predicates match exactly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pattern {
    pub subject: Option<Term>,
    pub predicate: Option<Term>,
    pub object: ObjectPattern,
    pub source: Option<String>,
}

impl Pattern {
    pub fn any() -> Self {
        Pattern::default()
    }

    pub fn new(subject: Option<Term>, predicate: Option<Term>, object: Option<Term>) -> Self {
        Pattern { subject, predicate, object: object.map_or(ObjectPattern::Any, ObjectPattern::Is), source: None }
    }

    pub fn subject(mut self, t: Term) -> Self {
        self.subject = Some(t);
        self
    }

    pub fn predicate(mut self, t: Term) -> Self {
        self.predicate = Some(t);
        self
    }

    pub fn object(mut self, t: Term) -> Self {
        self.object = ObjectPattern::Is(t);
        self
    }

    pub fn literal(mut self, q: LiteralQuery) -> Self {
        self.object = ObjectPattern::Literal(q);
        self
    }

    pub fn source(mut self, s: impl Into<String>) -> Self {
        self.source = Some(s.into());
        self
    }

    /// Reference semantics of matching.
    pub fn matches(&self, t: &Triple, source: &str) -> bool {
        self.subject.as_ref().is_none_or(|s| *s == t.subject)
            && self.predicate.as_ref().is_none_or(|p| *p == t.predicate)
            && match &self.object {
                ObjectPattern::Any => true,
                ObjectPattern::Is(o) => *o == t.object,
                ObjectPattern::Literal(q) => matches!(&t.object, Term::Literal(l) if q.matches(l)),
            }
            && self.source.as_deref().is_none_or(|s| s == source)
    }

    fn validate(&self) -> Result<(), StoreError> {
        match &self.object {
            ObjectPattern::Literal(q) => q.validate().map_err(StoreError::Argument),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexLoad {
    pub name: &'static str,
    pub buckets: usize,
    pub entries: usize,
    pub longest_chain: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statistics {
    pub triples: usize,
    /// Live triple count per predicate IRI, sorted by IRI.
    pub per_predicate: Vec<(String, usize)>,
    pub distinct_subjects: usize,
    pub distinct_objects: usize,
    pub literals: usize,
    pub resources: usize,
    pub sources: usize,
    pub indexes: Vec<IndexLoad>,
}

type MonitorFn = dyn Fn(&Event, &mut Transaction<'_>) -> Result<(), MonitorError> + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MonitorId(u64);

struct Monitor {
    id: MonitorId,
    mask: EventMask,
    callback: Arc<MonitorFn>,
}

/// Follow-up transactions triggered by monitors nest at most this deep.
const MAX_FOLLOW_UP_DEPTH: usize = 64;

static NEXT_STORE_ID: AtomicU64 = AtomicU64::new(1);

thread_local! {
    static OPEN_READS: RefCell<HashMap<u64, usize>> = RefCell::new(HashMap::new());
    static IN_TRANSACTION: RefCell<HashSet<u64>> = RefCell::new(HashSet::new());
}

fn open_reads(store: u64) -> usize {
    OPEN_READS.with(|m| m.borrow().get(&store).copied().unwrap_or(0))
}

/// Counts an open read for this thread while alive.
struct ReadToken(u64);

impl ReadToken {
    fn new(store: u64) -> Self {
        OPEN_READS.with(|m| *m.borrow_mut().entry(store).or_insert(0) += 1);
        ReadToken(store)
    }
}

impl Drop for ReadToken {
    fn drop(&mut self) {
        OPEN_READS.with(|m| {
            let mut m = m.borrow_mut();
            if let Some(n) = m.get_mut(&self.0) {
                *n -= 1;
                if *n == 0 {
                    m.remove(&self.0);
                }
            }
        });
    }
}

struct TxnMarker(u64);

impl Drop for TxnMarker {
    fn drop(&mut self) {
        IN_TRANSACTION.with(|s| s.borrow_mut().remove(&self.0));
    }
}

struct Inner {
    id: u64,
    data: Arc<RwLock<StoreData>>,
    writer: Mutex<()>,
    monitors: Mutex<Vec<Monitor>>,
    next_monitor: AtomicU64,
    next_transaction: AtomicU64,
}

/// Shared handle to a triple store. Clones refer to the same store.
#[derive(Clone)]
pub struct Store {
    inner: Arc<Inner>,
}

impl Default for Store {
    fn default() -> Self {
        Store::new()
    }
}

impl Store {
    pub fn new() -> Self {
        Store {
            inner: Arc::new(Inner {
                id: NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed),
                data: Arc::new(RwLock::new(StoreData::default())),
                writer: Mutex::new(()),
                monitors: Mutex::new(Vec::new()),
                next_monitor: AtomicU64::new(1),
                next_transaction: AtomicU64::new(1),
            }),
        }
    }

    fn guard(&self) -> (ArcRwLockReadGuard<RawRwLock, StoreData>, ReadToken) {
        // A thread that already reads must not queue behind a waiting
        // writer, which would wait for that same read.
        let guard = if open_reads(self.inner.id) > 0 {
            self.inner.data.read_arc_recursive()
        } else {
            self.inner.data.read_arc()
        };
        (guard, ReadToken::new(self.inner.id))
    }

    /// A consistent read snapshot. While it is alive this thread may not
    /// write to or commit on the store.
    pub fn read(&self) -> ReadView {
        let (guard, token) = self.guard();
        ReadView { guard, _token: token }
    }

    /// Streams committed triples matching `pattern`. The iterator keeps a
    /// read lock until dropped.
    pub fn match_pattern(&self, pattern: &Pattern) -> Result<MatchIter, StoreError> {
        pattern.validate()?;
        let (guard, token) = self.guard();
        let cursor = resolve(&guard, pattern).map(Cursor::new);
        Ok(MatchIter { guard, _token: token, cursor })
    }

    pub fn intern(&self, text: &str) -> Result<Handle, StoreError> {
        self.check_writable()?;
        Ok(self.inner.data.write().interner.intern(text, false))
    }

    pub fn resolve(&self, h: Handle) -> Option<Term> {
        let view = self.read();
        (h.0 < view.guard.interner.len() as u32).then(|| view.guard.interner.term(h))
    }

    pub fn len(&self) -> usize {
        self.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn statistics(&self) -> Statistics {
        self.read().statistics()
    }

    /// Registers a monitor for the events in `mask`. Callbacks run after a
    /// commit, serialized, and may record changes in the provided
    /// transaction; those are committed as a follow-up transaction.
    pub fn monitor<F>(&self, mask: EventMask, callback: F) -> MonitorId
    where
        F: Fn(&Event, &mut Transaction<'_>) -> Result<(), MonitorError> + Send + Sync + 'static,
    {
        let id = MonitorId(self.inner.next_monitor.fetch_add(1, Ordering::Relaxed));
        self.inner.monitors.lock().push(Monitor { id, mask, callback: Arc::new(callback) });
        id
    }

    pub fn unmonitor(&self, id: MonitorId) -> bool {
        let mut monitors = self.inner.monitors.lock();
        let before = monitors.len();
        monitors.retain(|m| m.id != id);
        monitors.len() != before
    }

    fn check_writable(&self) -> Result<(), StoreError> {
        match open_reads(self.inner.id) {
            0 => Ok(()),
            n => Err(StoreError::Permission(format!("{n} open read(s) on this thread"))),
        }
    }

    /// Runs `body` as a transaction. When it returns `Ok` the recorded
    /// changes are committed atomically; on `Err` they are discarded and
    /// the error is returned.
    pub fn transaction<T, E, F>(&self, body: F) -> Result<T, E>
    where
        E: From<StoreError>,
        F: FnOnce(&mut Transaction<'_>) -> Result<T, E>,
    {
        let id = self.inner.id;
        if IN_TRANSACTION.with(|s| s.borrow().contains(&id)) {
            return Err(StoreError::NestedTransaction.into());
        }
        self.check_writable()?;
        let _writer = self.inner.writer.lock();
        IN_TRANSACTION.with(|s| s.borrow_mut().insert(id));
        let _marker = TxnMarker(id);
        let mut txn = Transaction::new(self);
        let out = body(&mut txn)?;
        let actions = txn.into_actions();
        self.commit(actions, 0)?;
        Ok(out)
    }

    fn commit(&self, actions: Vec<Action>, depth: usize) -> Result<(), StoreError> {
        if actions.is_empty() {
            return Ok(());
        }
        self.check_writable()?;
        let monitors: Vec<(EventMask, Arc<MonitorFn>)> =
            self.inner.monitors.lock().iter().map(|m| (m.mask, m.callback.clone())).collect();
        let want = monitors.iter().fold(EventMask::empty(), |acc, (m, _)| acc | *m);
        let id = self.inner.next_transaction.fetch_add(1, Ordering::Relaxed);

        let mut events = Vec::new();
        if want.contains(EventMask::TRANSACTION) {
            events.push(Event::TransactionBegin { id });
        }
        {
            let mut data = self.inner.data.write();
            for action in actions {
                txn::apply(&mut data, action, want, &mut events);
            }
        }
        if want.contains(EventMask::TRANSACTION) {
            events.push(Event::TransactionEnd { id });
        }
        if monitors.is_empty() {
            return Ok(());
        }

        let mut follow_up = Transaction::new(self);
        for event in &events {
            for (mask, callback) in &monitors {
                if mask.contains(event.kind()) {
                    if let Err(e) = callback(event, &mut follow_up) {
                        log::warn!("monitor failed on {:?}: {e}", event.kind());
                    }
                }
            }
        }
        let follow_up = follow_up.into_actions();
        if follow_up.is_empty() {
            return Ok(());
        }
        if depth >= MAX_FOLLOW_UP_DEPTH {
            log::error!("dropping monitor follow-up transaction: nesting exceeds {MAX_FOLLOW_UP_DEPTH}");
            return Ok(());
        }
        self.commit(follow_up, depth + 1)
    }
}

/// Resolves constants to ids; `None` when some constant is unknown and
/// nothing can match.
fn resolve(d: &StoreData, pattern: &Pattern) -> Option<IdPattern> {
    let mut pat = IdPattern::default();
    if let Some(s) = &pattern.subject {
        pat.s = Some(d.interner.lookup_term(s)?);
    }
    if let Some(p) = &pattern.predicate {
        let Term::Iri(iri) = p else { return None };
        pat.p = Some(d.pred_of(d.interner.lookup(iri, false)?)?);
    }
    match &pattern.object {
        ObjectPattern::Any => {}
        ObjectPattern::Is(o) => pat.o = Some(d.node_of(o)?),
        ObjectPattern::Literal(q) => pat.objects = Some(d.literal_candidates(q)),
    }
    if let Some(src) = &pattern.source {
        pat.source = Some(d.interner.lookup(src, false)?);
    }
    Some(pat)
}

/// Owning iterator over matches; holds the read lock.
pub struct MatchIter {
    guard: ArcRwLockReadGuard<RawRwLock, StoreData>,
    _token: ReadToken,
    cursor: Option<Cursor>,
}

impl Iterator for MatchIter {
    type Item = StoredTriple;

    fn next(&mut self) -> Option<StoredTriple> {
        let r = self.cursor.as_mut()?.next(&self.guard)?;
        Some(self.guard.stored(r))
    }
}

/// A triple in id form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IdTriple {
    pub subject: Handle,
    pub predicate: PredId,
    pub object: Node,
}

/// Read access to a consistent state of the store.
pub struct ReadView {
    guard: ArcRwLockReadGuard<RawRwLock, StoreData>,
    _token: ReadToken,
}

impl ReadView {
    pub fn len(&self) -> usize {
        self.guard.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn match_pattern<'a>(
        &'a self,
        pattern: &Pattern,
    ) -> Result<impl Iterator<Item = StoredTriple> + 'a, StoreError> {
        pattern.validate()?;
        let mut cursor = resolve(&self.guard, pattern).map(Cursor::new);
        Ok(std::iter::from_fn(move || {
            let r = cursor.as_mut()?.next(&self.guard)?;
            Some(self.guard.stored(r))
        }))
    }

    pub fn count(&self, pattern: &Pattern) -> Result<usize, StoreError> {
        pattern.validate()?;
        let Some(mut cursor) = resolve(&self.guard, pattern).map(Cursor::new) else {
            return Ok(0);
        };
        let mut n = 0;
        while cursor.next(&self.guard).is_some() {
            n += 1;
        }
        Ok(n)
    }

    /// Every stored triple in insertion order.
    pub fn all(&self) -> impl Iterator<Item = StoredTriple> + '_ {
        self.match_pattern(&Pattern::any()).expect("free pattern is valid")
    }

    pub fn contains(&self, t: &Triple, source: &str) -> bool {
        self.guard.contains(t, source)
    }

    pub fn statistics(&self) -> Statistics {
        self.guard.statistics()
    }

    /// Source names and their triple counts, sorted by name.
    pub fn sources(&self) -> Vec<(String, usize)> {
        self.guard.sources()
    }

    /// Literals matching `q`, in table order.
    pub fn literal_search(&self, q: &LiteralQuery) -> Result<Vec<Literal>, StoreError> {
        q.validate().map_err(StoreError::Argument)?;
        Ok(self.guard.literal_candidates(q).into_iter().map(|id| self.guard.literals.get(id).clone()).collect())
    }

    /// The whole literal table in order.
    pub fn literals(&self) -> Vec<Literal> {
        self.guard.literals.iter().map(|id| self.guard.literals.get(id).clone()).collect()
    }

    /// Number of live triples using `l` as object.
    pub fn literal_uses(&self, l: &Literal) -> u32 {
        self.guard.literal_uses(l)
    }

    /// Predicate hierarchy root of `p`.
    pub fn predicate_root(&self, p: &Term) -> Option<Term> {
        let id = self.predicate(p)?;
        Some(self.guard.interner.term(self.guard.pred_iri(self.guard.root_of(id))))
    }

    pub fn lookup(&self, t: &Term) -> Option<Handle> {
        self.guard.interner.lookup_term(t)
    }

    pub fn resolve(&self, h: Handle) -> Term {
        self.guard.interner.term(h)
    }

    // ---- id-level access ----

    pub fn node(&self, t: &Term) -> Option<Node> {
        self.guard.node_of(t)
    }

    pub fn term(&self, n: Node) -> Term {
        self.guard.node_term(n)
    }

    pub fn predicate(&self, t: &Term) -> Option<PredId> {
        self.guard.pred_of(self.guard.interner.lookup(t.as_iri()?, false)?)
    }

    pub fn predicate_of_node(&self, n: Node) -> Option<PredId> {
        match n {
            Node::Resource(h) => self.guard.pred_of(h),
            Node::Literal(_) => None,
        }
    }

    pub fn predicate_node(&self, p: PredId) -> Node {
        Node::Resource(self.guard.pred_iri(p))
    }

    /// `p` and every predicate below it in the hierarchy.
    pub fn subproperties(&self, p: PredId) -> Vec<PredId> {
        self.guard.subproperties(p)
    }

    /// `p` and every predicate above it in the hierarchy.
    pub fn superproperties(&self, p: PredId) -> Vec<PredId> {
        self.guard.superproperties(p)
    }

    /// Every predicate known to the store, used or not.
    pub fn predicates(&self) -> Vec<PredId> {
        self.guard.predicates()
    }

    pub fn literal_ids(&self, q: &LiteralQuery) -> Result<Vec<LitId>, StoreError> {
        q.validate().map_err(StoreError::Argument)?;
        Ok(self.guard.literal_candidates(q))
    }

    /// Id-level matching. `objects`, when given, replaces `o` with a list of
    /// alternative literal objects.
    pub fn match_ids<'a>(
        &'a self,
        s: Option<Handle>,
        p: Option<PredId>,
        o: Option<Node>,
        objects: Option<Vec<LitId>>,
    ) -> impl Iterator<Item = IdTriple> + 'a {
        let mut cursor = Cursor::new(IdPattern { s, p, o, objects, source: None });
        std::iter::from_fn(move || {
            let r = cursor.next(&self.guard)?;
            let (subject, predicate, object) = self.guard.record_ids(r);
            Some(IdTriple { subject, predicate, object })
        })
    }

    pub fn predicate_count(&self, p: PredId) -> usize {
        self.guard.pred_count(p)
    }

    pub fn subject_count(&self, s: Handle) -> usize {
        self.guard.subject_count(s)
    }

    pub fn object_count(&self, o: Node) -> usize {
        self.guard.object_count(o)
    }

    pub fn distinct_subjects(&self) -> usize {
        self.guard.distinct_subjects()
    }

    pub fn distinct_objects(&self) -> usize {
        self.guard.distinct_objects()
    }

    #[cfg(test)]
    pub(crate) fn check_integrity(&self) {
        self.guard.check_integrity();
    }
}
