use std::collections::{HashMap, HashSet};

use rustc_hash::FxHashMap;

use super::interner::{Handle, Interner};
use super::literals::{LitId, LiteralQuery, LiteralTable};
use super::{Event, EventMask, IndexLoad, Statistics, StoredTriple};
use crate::rdfio::{Literal, Term, Triple};
use crate::vocab::RDFS_SUBPROPERTYOF;

pub(crate) const NIL: u32 = u32::MAX;
const INITIAL_BUCKETS: usize = 8;
const MAX_LOAD: usize = 4;

/// An object position value: a resource handle or a literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Resource(Handle),
    Literal(LitId),
}

impl Node {
    fn code(self) -> u64 {
        match self {
            Node::Resource(h) => u64::from(h.0) << 1,
            Node::Literal(l) => (u64::from(l.0) << 1) | 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredId(pub(crate) u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Index {
    All = 0,
    S = 1,
    P = 2,
    O = 3,
    SP = 4,
    PO = 5,
}

const INDEXES: [Index; 6] = [Index::All, Index::S, Index::P, Index::O, Index::SP, Index::PO];
const INDEX_NAMES: [&str; 6] = ["all", "s", "p", "o", "sp", "po"];

const ERASED: u8 = 1;

#[derive(Clone, Copy)]
struct Link {
    prev: u32,
    next: u32,
}

const UNLINKED: Link = Link { prev: NIL, next: NIL };

struct Record {
    s: Handle,
    p: PredId,
    o: Node,
    source: Handle,
    line: u32,
    flags: u8,
    links: [Link; 6],
}

struct Chain {
    /// (head, tail) per bucket.
    buckets: Vec<(u32, u32)>,
    entries: usize,
}

impl Chain {
    fn new(buckets: usize) -> Self {
        Chain { buckets: vec![(NIL, NIL); buckets], entries: 0 }
    }
}

fn mix(mut x: u64) -> u64 {
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    x = x.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    x ^ (x >> 33)
}

fn pair(a: u64, b: u64) -> u64 {
    mix(a).wrapping_add(b.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

struct Pred {
    iri: Handle,
    parents: HashMap<PredId, u32>,
    children: HashSet<PredId>,
    root: PredId,
    count: usize,
}

type Key = (Handle, PredId, Node, Handle);

/// Record and index state guarded by the store lock.
pub(crate) struct StoreData {
    pub(crate) interner: Interner,
    pub(crate) literals: LiteralTable,
    records: Vec<Record>,
    free: Vec<u32>,
    chains: [Chain; 6],
    dedup: FxHashMap<Key, u32>,
    preds: Vec<Pred>,
    pred_by_iri: FxHashMap<Handle, PredId>,
    subjects: FxHashMap<Handle, u32>,
    objects: FxHashMap<Node, u32>,
    sources: FxHashMap<Handle, u32>,
    subproperty_of: Handle,
}

impl Default for StoreData {
    fn default() -> Self {
        let mut interner = Interner::default();
        let subproperty_of = interner.intern(RDFS_SUBPROPERTYOF, false);
        StoreData {
            interner,
            literals: LiteralTable::default(),
            records: Vec::new(),
            free: Vec::new(),
            chains: std::array::from_fn(|i| Chain::new(if i == 0 { 1 } else { INITIAL_BUCKETS })),
            dedup: FxHashMap::default(),
            preds: Vec::new(),
            pred_by_iri: FxHashMap::default(),
            subjects: FxHashMap::default(),
            objects: FxHashMap::default(),
            sources: FxHashMap::default(),
            subproperty_of,
        }
    }
}

/// A constant-resolved pattern. `objects` lists alternative object values
/// tried in order (used for literal searches).
#[derive(Debug, Clone, Default)]
pub(crate) struct IdPattern {
    pub(crate) s: Option<Handle>,
    pub(crate) p: Option<PredId>,
    pub(crate) o: Option<Node>,
    pub(crate) objects: Option<Vec<LitId>>,
    pub(crate) source: Option<Handle>,
}

/// Resumable position in an index chain for an [`IdPattern`].
pub(crate) struct Cursor {
    pat: IdPattern,
    index: Index,
    pos: u32,
    candidate: usize,
    started: bool,
}

impl Cursor {
    pub(crate) fn new(pat: IdPattern) -> Self {
        Cursor { pat, index: Index::All, pos: NIL, candidate: 0, started: false }
    }

    pub(crate) fn next(&mut self, d: &StoreData) -> Option<u32> {
        loop {
            if !self.started {
                if let Some(cands) = &self.pat.objects {
                    let lit = *cands.get(self.candidate)?;
                    self.pat.o = Some(Node::Literal(lit));
                }
                let (index, bucket) = d.route(&self.pat);
                self.index = index;
                self.pos = d.chains[index as usize].buckets[bucket].0;
                self.started = true;
            }
            while self.pos != NIL {
                let r = self.pos;
                let rec = &d.records[r as usize];
                self.pos = rec.links[self.index as usize].next;
                if self.pat.s.is_none_or(|s| s == rec.s)
                    && self.pat.p.is_none_or(|p| p == rec.p)
                    && self.pat.o.is_none_or(|o| o == rec.o)
                    && self.pat.source.is_none_or(|src| src == rec.source)
                {
                    return Some(r);
                }
            }
            if self.pat.objects.is_none() {
                return None;
            }
            self.candidate += 1;
            self.started = false;
        }
    }
}

/// Which chain serves a pattern: subject+predicate (and fully bound)
/// patterns use SP, subject+object falls back to S with an object filter.
pub(crate) fn index_for(s: bool, p: bool, o: bool) -> Index {
    match (s, p, o) {
        (true, true, _) => Index::SP,
        (true, false, _) => Index::S,
        (false, true, true) => Index::PO,
        (false, true, false) => Index::P,
        (false, false, true) => Index::O,
        (false, false, false) => Index::All,
    }
}

impl StoreData {
    // ---- index chains ----

    fn root(&self, p: PredId) -> PredId {
        self.preds[p.0 as usize].root
    }

    fn key_hash(&self, index: Index, s: Handle, p: PredId, o: Node) -> u64 {
        let root = || u64::from(self.root(p).0);
        match index {
            Index::All => 0,
            Index::S => mix(u64::from(s.0)),
            Index::P => mix(root()),
            Index::O => mix(o.code()),
            Index::SP => pair(u64::from(s.0), root()),
            Index::PO => pair(root(), o.code()),
        }
    }

    fn bucket_of(&self, index: Index, r: u32) -> usize {
        let rec = &self.records[r as usize];
        let h = self.key_hash(index, rec.s, rec.p, rec.o);
        (h as usize) & (self.chains[index as usize].buckets.len() - 1)
    }

    fn route(&self, pat: &IdPattern) -> (Index, usize) {
        let index = index_for(pat.s.is_some(), pat.p.is_some(), pat.o.is_some());
        let s = pat.s.unwrap_or(Handle(0));
        let p = pat.p.unwrap_or(PredId(0));
        let o = pat.o.unwrap_or(Node::Resource(Handle(0)));
        let h = self.key_hash(index, s, p, o);
        (index, (h as usize) & (self.chains[index as usize].buckets.len() - 1))
    }

    fn link(&mut self, index: Index, r: u32) {
        let b = self.bucket_of(index, r);
        let i = index as usize;
        let tail = self.chains[i].buckets[b].1;
        self.records[r as usize].links[i] = Link { prev: tail, next: NIL };
        if tail == NIL {
            self.chains[i].buckets[b].0 = r;
        } else {
            self.records[tail as usize].links[i].next = r;
        }
        self.chains[i].buckets[b].1 = r;
        self.chains[i].entries += 1;
    }

    fn unlink(&mut self, index: Index, r: u32) {
        let b = self.bucket_of(index, r);
        let i = index as usize;
        let Link { prev, next } = self.records[r as usize].links[i];
        if prev == NIL {
            self.chains[i].buckets[b].0 = next;
        } else {
            self.records[prev as usize].links[i].next = next;
        }
        if next == NIL {
            self.chains[i].buckets[b].1 = prev;
        } else {
            self.records[next as usize].links[i].prev = prev;
        }
        self.records[r as usize].links[i] = UNLINKED;
        self.chains[i].entries -= 1;
    }

    /// Rebuilds a chain table with `buckets` buckets, keeping insertion
    /// order within each bucket.
    pub(crate) fn rehash(&mut self, index: Index, buckets: usize) {
        let i = index as usize;
        self.chains[i] = Chain::new(buckets.next_power_of_two().max(1));
        let mut r = self.chains[Index::All as usize].buckets[0].0;
        while r != NIL {
            let next = self.records[r as usize].links[Index::All as usize].next;
            self.link(index, r);
            r = next;
        }
    }

    /// Sizes the tables for `additional` more records at once, instead of
    /// doubling repeatedly while they arrive.
    pub(crate) fn reserve(&mut self, additional: usize) {
        self.records.reserve(additional);
        self.dedup.reserve(additional);
        for index in &INDEXES[1..] {
            let c = &self.chains[*index as usize];
            let want = (c.entries + additional).div_ceil(MAX_LOAD);
            if want > c.buckets.len() {
                self.rehash(*index, want);
            }
        }
    }

    fn grow_if_needed(&mut self) {
        for index in &INDEXES[1..] {
            let c = &self.chains[*index as usize];
            if c.entries > MAX_LOAD * c.buckets.len() {
                let n = c.buckets.len() * 2;
                self.rehash(*index, n);
            }
        }
    }

    // ---- predicates ----

    pub(crate) fn pred_of(&self, iri: Handle) -> Option<PredId> {
        self.pred_by_iri.get(&iri).copied()
    }

    pub(crate) fn pred_iri(&self, p: PredId) -> Handle {
        self.preds[p.0 as usize].iri
    }

    fn ensure_pred(&mut self, iri: Handle) -> PredId {
        if let Some(p) = self.pred_by_iri.get(&iri) {
            return *p;
        }
        let id = PredId(self.preds.len() as u32);
        self.preds.push(Pred {
            iri,
            parents: HashMap::new(),
            children: HashSet::new(),
            root: id,
            count: 0,
        });
        self.pred_by_iri.insert(iri, id);
        id
    }

    fn reach(&self, from: PredId, up: bool) -> HashSet<PredId> {
        let mut seen = HashSet::from([from]);
        let mut stack = vec![from];
        while let Some(x) = stack.pop() {
            let p = &self.preds[x.0 as usize];
            let next: Vec<PredId> =
                if up { p.parents.keys().copied().collect() } else { p.children.iter().copied().collect() };
            for y in next {
                if seen.insert(y) {
                    stack.push(y);
                }
            }
        }
        seen
    }

    /// The smallest-handle member of the terminal strongly connected
    /// components reachable from `p` through super-properties.
    fn compute_root(&self, p: PredId) -> PredId {
        let reachable = self.reach(p, true);
        let mut best: Option<PredId> = None;
        for &x in &reachable {
            let from_x = self.reach(x, true);
            let terminal = from_x.iter().all(|y| *y == x || self.reach(*y, true).contains(&x));
            if terminal && best.is_none_or(|b| self.pred_iri(x) < self.pred_iri(b)) {
                best = Some(x);
            }
        }
        best.unwrap_or(p)
    }

    fn change_edge(&mut self, child: PredId, parent: PredId, add: bool) {
        let parents = &mut self.preds[child.0 as usize].parents;
        let n = parents.entry(parent).or_insert(0);
        if add {
            *n += 1;
        } else {
            *n -= 1;
        }
        let n = *n;
        let structural = if add { n == 1 } else { n == 0 };
        if !structural {
            return;
        }
        if add {
            self.preds[parent.0 as usize].children.insert(child);
        } else {
            parents.remove(&parent);
            self.preds[parent.0 as usize].children.remove(&child);
        }
        self.reroot(child);
    }

    /// Recomputes roots for every predicate below `changed` and moves the
    /// records of predicates whose root changed into their new chains.
    fn reroot(&mut self, changed: PredId) {
        for x in self.reach(changed, false) {
            let new_root = self.compute_root(x);
            if new_root == self.root(x) {
                continue;
            }
            let mut moved = Vec::new();
            let mut cursor = Cursor::new(IdPattern { p: Some(x), ..IdPattern::default() });
            while let Some(r) = cursor.next(self) {
                moved.push(r);
            }
            for &r in &moved {
                for index in [Index::P, Index::SP, Index::PO] {
                    self.unlink(index, r);
                }
            }
            self.preds[x.0 as usize].root = new_root;
            for &r in &moved {
                for index in [Index::P, Index::SP, Index::PO] {
                    self.link(index, r);
                }
            }
        }
    }

    pub(crate) fn add_subproperty(&mut self, child: &str, parent: &str) {
        let c = self.interner.intern(child, false);
        let p = self.interner.intern(parent, false);
        let (c, p) = (self.ensure_pred(c), self.ensure_pred(p));
        self.change_edge(c, p, true);
    }

    pub(crate) fn root_of(&self, p: PredId) -> PredId {
        self.root(p)
    }

    /// Predicates below `p` in the hierarchy, including `p`.
    pub(crate) fn subproperties(&self, p: PredId) -> Vec<PredId> {
        let mut v: Vec<PredId> = self.reach(p, false).into_iter().collect();
        v.sort();
        v
    }

    pub(crate) fn predicates(&self) -> Vec<PredId> {
        (0..self.preds.len() as u32).map(PredId).collect()
    }

    /// Predicates above `p` in the hierarchy, including `p`.
    pub(crate) fn superproperties(&self, p: PredId) -> Vec<PredId> {
        let mut v: Vec<PredId> = self.reach(p, true).into_iter().collect();
        v.sort();
        v
    }

    fn hierarchy_edge(&mut self, s: Handle, p: PredId, o: Node, add: bool) {
        if self.pred_iri(p) != self.subproperty_of {
            return;
        }
        let Node::Resource(o) = o else { return };
        let (c, parent) = (self.ensure_pred(s), self.ensure_pred(o));
        self.change_edge(c, parent, add);
    }

    // ---- records ----

    fn key_of(&self, t: &Triple, source: &str) -> Option<Key> {
        let s = self.interner.lookup_term(&t.subject)?;
        let p = self.pred_of(self.interner.lookup_term(&t.predicate)?)?;
        let o = self.node_of(&t.object)?;
        let src = self.interner.lookup(source, false)?;
        Some((s, p, o, src))
    }

    pub(crate) fn node_of(&self, t: &Term) -> Option<Node> {
        match t {
            Term::Literal(l) => self.literals.lookup(l).map(Node::Literal),
            other => self.interner.lookup_term(other).map(Node::Resource),
        }
    }

    pub(crate) fn node_term(&self, n: Node) -> Term {
        match n {
            Node::Resource(h) => self.interner.term(h),
            Node::Literal(l) => Term::Literal(self.literals.get(l).clone()),
        }
    }

    pub(crate) fn contains(&self, t: &Triple, source: &str) -> bool {
        self.key_of(t, source).is_some_and(|k| self.dedup.contains_key(&k))
    }

    /// Inserts a record unless it exists. Returns its index when new.
    pub(crate) fn insert(
        &mut self,
        t: &Triple,
        source: &str,
        line: u32,
        want: EventMask,
        events: &mut Vec<Event>,
    ) -> Option<u32> {
        let s = self.interner.intern_term(&t.subject).expect("checked subject");
        let p = self.interner.intern_term(&t.predicate).expect("checked predicate");
        let p = self.ensure_pred(p);
        let src = self.interner.intern(source, false);
        let o = match &t.object {
            Term::Literal(l) => {
                if let Some(existing) = self.literals.lookup(l) {
                    if self.dedup.contains_key(&(s, p, Node::Literal(existing), src)) {
                        return None;
                    }
                }
                let (id, new) = self.literals.acquire(l);
                if new && want.contains(EventMask::NEW_LITERAL) {
                    events.push(Event::NewLiteral(l.clone()));
                }
                Node::Literal(id)
            }
            other => {
                let o = Node::Resource(self.interner.intern_term(other).expect("resource"));
                if self.dedup.contains_key(&(s, p, o, src)) {
                    return None;
                }
                o
            }
        };
        Some(self.insert_ids(s, p, o, src, line))
    }

    /// Inserts a record whose literal use, if any, is already acquired.
    fn insert_ids(&mut self, s: Handle, p: PredId, o: Node, source: Handle, line: u32) -> u32 {
        let rec = Record { s, p, o, source, line, flags: 0, links: [UNLINKED; 6] };
        let r = match self.free.pop() {
            Some(r) => {
                self.records[r as usize] = rec;
                r
            }
            None => {
                self.records.push(rec);
                self.records.len() as u32 - 1
            }
        };
        for index in INDEXES {
            self.link(index, r);
        }
        self.dedup.insert((s, p, o, source), r);
        *self.subjects.entry(s).or_insert(0) += 1;
        *self.objects.entry(o).or_insert(0) += 1;
        *self.sources.entry(source).or_insert(0) += 1;
        self.preds[p.0 as usize].count += 1;
        self.grow_if_needed();
        self.hierarchy_edge(s, p, o, true);
        r
    }

    /// Adds a triple given interned parts; used by bulk loading.
    pub(crate) fn insert_bulk(&mut self, s: Handle, p: Handle, o: BulkObject, source: Handle, line: u32) -> bool {
        let p = self.ensure_pred(p);
        let o = match o {
            BulkObject::Resource(h) => Node::Resource(h),
            BulkObject::Literal(id) => {
                if self.dedup.contains_key(&(s, p, Node::Literal(id), source)) {
                    return false;
                }
                self.literals.add_use(id);
                Node::Literal(id)
            }
        };
        if self.dedup.contains_key(&(s, p, o, source)) {
            return false;
        }
        self.insert_ids(s, p, o, source, line);
        true
    }

    fn decrement<K: std::hash::Hash + Eq>(map: &mut FxHashMap<K, u32>, k: K) {
        if let Some(c) = map.get_mut(&k) {
            *c -= 1;
            if *c == 0 {
                map.remove(&k);
            }
        }
    }

    /// Removes record `r`; returns its term-level form when asked for.
    fn remove(&mut self, r: u32, want: EventMask, events: &mut Vec<Event>, describe: bool) -> Option<StoredTriple> {
        let described = describe.then(|| self.stored(r));
        for index in INDEXES {
            self.unlink(index, r);
        }
        let (s, p, o, source) = {
            let rec = &mut self.records[r as usize];
            rec.flags |= ERASED;
            (rec.s, rec.p, rec.o, rec.source)
        };
        self.dedup.remove(&(s, p, o, source));
        Self::decrement(&mut self.subjects, s);
        Self::decrement(&mut self.objects, o);
        Self::decrement(&mut self.sources, source);
        self.preds[p.0 as usize].count -= 1;
        self.free.push(r);
        if let Node::Literal(l) = o {
            if let Some(old) = self.literals.release(l) {
                if want.contains(EventMask::OLD_LITERAL) {
                    events.push(Event::OldLiteral(old));
                }
            }
        }
        self.hierarchy_edge(s, p, o, false);
        described
    }

    pub(crate) fn delete(&mut self, t: &Triple, source: &str, want: EventMask, events: &mut Vec<Event>) -> Option<StoredTriple> {
        let key = self.key_of(t, source)?;
        let r = *self.dedup.get(&key)?;
        self.remove(r, want, events, true)
    }

    /// Replaces `old` by `new`, keeping source and line. Returns the old
    /// and new stored forms when `old` existed.
    pub(crate) fn replace(
        &mut self,
        old: &Triple,
        source: &str,
        new: &Triple,
        want: EventMask,
        events: &mut Vec<Event>,
    ) -> Option<(StoredTriple, StoredTriple)> {
        let key = self.key_of(old, source)?;
        let r = *self.dedup.get(&key)?;
        let line = self.records[r as usize].line;
        let removed = self.remove(r, want, events, true)?;
        self.insert(new, source, line, want, events);
        let added = StoredTriple { triple: new.clone(), source: source.to_string(), line };
        Some((removed, added))
    }

    // ---- reads ----

    pub(crate) fn stored(&self, r: u32) -> StoredTriple {
        let rec = &self.records[r as usize];
        StoredTriple {
            triple: Triple::new(
                self.interner.term(rec.s),
                self.interner.term(self.pred_iri(rec.p)),
                self.node_term(rec.o),
            ),
            source: self.interner.text(rec.source).to_string(),
            line: rec.line,
        }
    }

    pub(crate) fn record_ids(&self, r: u32) -> (Handle, PredId, Node) {
        let rec = &self.records[r as usize];
        (rec.s, rec.p, rec.o)
    }

    pub(crate) fn len(&self) -> usize {
        self.dedup.len()
    }

    pub(crate) fn distinct_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub(crate) fn distinct_objects(&self) -> usize {
        self.objects.len()
    }

    pub(crate) fn pred_count(&self, p: PredId) -> usize {
        self.preds[p.0 as usize].count
    }

    pub(crate) fn subject_count(&self, s: Handle) -> usize {
        self.subjects.get(&s).copied().unwrap_or(0) as usize
    }

    pub(crate) fn object_count(&self, o: Node) -> usize {
        self.objects.get(&o).copied().unwrap_or(0) as usize
    }

    /// Source names with their live triple counts, sorted by name.
    pub(crate) fn sources(&self) -> Vec<(String, usize)> {
        let mut v: Vec<(String, usize)> = self
            .sources
            .iter()
            .map(|(h, n)| (self.interner.text(*h).to_string(), *n as usize))
            .collect();
        v.sort();
        v
    }

    pub(crate) fn literal_candidates(&self, q: &LiteralQuery) -> Vec<LitId> {
        self.literals.search(q)
    }

    pub(crate) fn literal_uses(&self, l: &Literal) -> u32 {
        self.literals.lookup(l).map_or(0, |id| self.literals.uses(id))
    }

    pub(crate) fn statistics(&self) -> Statistics {
        let mut per_predicate: Vec<(String, usize)> = self
            .preds
            .iter()
            .filter(|p| p.count > 0)
            .map(|p| (self.interner.text(p.iri).to_string(), p.count))
            .collect();
        per_predicate.sort();
        let indexes = INDEXES
            .iter()
            .map(|&index| {
                let c = &self.chains[index as usize];
                let mut longest = 0;
                for &(head, _) in &c.buckets {
                    let mut n = 0;
                    let mut r = head;
                    while r != NIL {
                        n += 1;
                        r = self.records[r as usize].links[index as usize].next;
                    }
                    longest = longest.max(n);
                }
                IndexLoad {
                    name: INDEX_NAMES[index as usize],
                    buckets: c.buckets.len(),
                    entries: c.entries,
                    longest_chain: longest,
                }
            })
            .collect();
        Statistics {
            triples: self.len(),
            per_predicate,
            distinct_subjects: self.subjects.len(),
            distinct_objects: self.objects.len(),
            literals: self.literals.len(),
            resources: self.interner.len(),
            sources: self.sources.len(),
            indexes,
        }
    }

    /// Checks chain and counter consistency; used by tests.
    #[cfg(test)]
    pub(crate) fn check_integrity(&self) {
        for index in INDEXES {
            let c = &self.chains[index as usize];
            let mut total = 0;
            for (b, &(head, tail)) in c.buckets.iter().enumerate() {
                let mut prev = NIL;
                let mut r = head;
                while r != NIL {
                    let rec = &self.records[r as usize];
                    assert_eq!(rec.flags & ERASED, 0);
                    assert_eq!(rec.links[index as usize].prev, prev);
                    assert_eq!(self.bucket_of(index, r), b, "record in wrong bucket of {:?}", index);
                    prev = r;
                    r = rec.links[index as usize].next;
                    total += 1;
                }
                assert_eq!(tail, prev);
            }
            assert_eq!(total, c.entries);
            assert_eq!(total, self.dedup.len());
        }
        let live: usize = self.preds.iter().map(|p| p.count).sum();
        assert_eq!(live, self.dedup.len());
    }
}

/// Object of a bulk-loaded triple. Literals are interned before insertion.
pub(crate) enum BulkObject {
    Resource(Handle),
    Literal(LitId),
}
