use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::ops::Bound;

use crate::rdfio::Literal;

/// Index of a literal in the literal table. Slots are reused once a
/// literal's last use disappears.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LitId(pub(crate) u32);

/// True when `text` is an optionally signed decimal integer or float with
/// an optional exponent.
pub fn numeric_value(text: &str) -> Option<f64> {
    let b = text.as_bytes();
    let mut i = 0;
    if matches!(b.first(), Some(b'+' | b'-')) {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let int_digits = i - int_start;
    let mut frac_digits = 0;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let s = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        frac_digits = i - s;
    }
    if int_digits == 0 && frac_digits == 0 {
        return None;
    }
    if i < b.len() && matches!(b[i], b'e' | b'E') {
        i += 1;
        if matches!(b.get(i), Some(b'+' | b'-')) {
            i += 1;
        }
        let s = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == s {
            return None;
        }
    }
    if i != b.len() {
        return None;
    }
    text.parse().ok()
}

fn kind_rank(l: &Literal) -> (u8, &str) {
    match l {
        Literal::Plain(_) => (0, ""),
        Literal::Lang { lang, .. } => (1, lang),
        Literal::Typed { datatype, .. } => (2, datatype),
    }
}

/// Position of a literal in the table order: numerics by value first, then
/// text compared case-insensitively with uppercase before lowercase on
/// ties. The remaining fields only separate literals that would otherwise
/// compare equal.
#[derive(Debug, Clone)]
pub(crate) struct SortKey {
    numeric: Option<f64>,
    folded: String,
    raw: String,
    kind: u8,
    extra: String,
}

impl SortKey {
    pub(crate) fn of(l: &Literal) -> SortKey {
        let raw = l.text();
        let (kind, extra) = kind_rank(l);
        SortKey {
            numeric: numeric_value(raw),
            folded: raw.to_lowercase(),
            raw: raw.to_string(),
            kind,
            extra: extra.to_string(),
        }
    }

    /// Smallest key in the text region whose folded text is `folded`.
    fn text_probe(folded: String) -> SortKey {
        SortKey { numeric: None, folded, raw: String::new(), kind: 0, extra: String::new() }
    }

    /// Smallest key of the numeric region with the given value.
    fn number_probe(value: f64) -> SortKey {
        SortKey {
            numeric: Some(value),
            folded: String::new(),
            raw: String::new(),
            kind: 0,
            extra: String::new(),
        }
    }
}

/// `false` for uppercase characters so they sort first.
fn case_order(raw: &str) -> impl Iterator<Item = bool> + '_ {
    raw.chars().map(|c| !c.is_uppercase())
}

impl Ord for SortKey {
    fn cmp(&self, other: &Self) -> Ordering {
        let region = match (self.numeric, other.numeric) {
            (Some(a), Some(b)) => a.total_cmp(&b),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        region
            .then_with(|| self.folded.cmp(&other.folded))
            .then_with(|| case_order(&self.raw).cmp(case_order(&other.raw)))
            .then_with(|| self.raw.cmp(&other.raw))
            .then_with(|| self.kind.cmp(&other.kind))
            .then_with(|| self.extra.cmp(&other.extra))
    }
}

impl PartialOrd for SortKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for SortKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SortKey {}

/// The literal table order.
pub fn compare_literals(a: &Literal, b: &Literal) -> Ordering {
    SortKey::of(a).cmp(&SortKey::of(b))
}

/// Search over the literal table.
#[derive(Debug, Clone, PartialEq)]
pub enum LiteralQuery {
    /// Literals whose text starts with the key, ignoring case.
    Prefix(String),
    /// Numeric literals with `lo <= value <= hi`.
    Range(f64, f64),
    /// Literals whose text equals the key, ignoring case.
    CaseInsensitive(String),
}

impl LiteralQuery {
    /// Reference semantics used to filter and to check the index.
    pub fn matches(&self, l: &Literal) -> bool {
        match self {
            LiteralQuery::Prefix(p) => l.text().to_lowercase().starts_with(&p.to_lowercase()),
            LiteralQuery::Range(lo, hi) => numeric_value(l.text()).is_some_and(|v| *lo <= v && v <= *hi),
            LiteralQuery::CaseInsensitive(k) => l.text().to_lowercase() == k.to_lowercase(),
        }
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        match self {
            LiteralQuery::Range(lo, hi) if lo.is_nan() || hi.is_nan() => Err("range bound is NaN".into()),
            LiteralQuery::Range(lo, hi) if lo > hi => Err(format!("empty range [{lo}, {hi}]")),
            _ => Ok(()),
        }
    }
}

fn could_be_numeric_prefix(p: &str) -> bool {
    p.chars().next().is_none_or(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.'))
}

struct LitEntry {
    value: Literal,
    key: SortKey,
    uses: u32,
}

/// Deduplicated literals, ordered by [`compare_literals`].
#[derive(Default)]
pub(crate) struct LiteralTable {
    slots: Vec<Option<LitEntry>>,
    free: Vec<u32>,
    ordered: BTreeMap<SortKey, LitId>,
    exact: HashMap<Literal, LitId>,
}

impl LiteralTable {
    pub(crate) fn lookup(&self, l: &Literal) -> Option<LitId> {
        self.exact.get(l).copied()
    }

    pub(crate) fn get(&self, id: LitId) -> &Literal {
        &self.slots[id.0 as usize].as_ref().expect("live literal").value
    }

    pub(crate) fn len(&self) -> usize {
        self.exact.len()
    }

    pub(crate) fn uses(&self, id: LitId) -> u32 {
        self.slots[id.0 as usize].as_ref().map_or(0, |e| e.uses)
    }

    /// Adds a use; returns the id and whether the literal is new.
    pub(crate) fn acquire(&mut self, l: &Literal) -> (LitId, bool) {
        if let Some(id) = self.exact.get(l) {
            self.slots[id.0 as usize].as_mut().expect("live literal").uses += 1;
            return (*id, false);
        }
        let entry = LitEntry { value: l.clone(), key: SortKey::of(l), uses: 1 };
        let id = match self.free.pop() {
            Some(slot) => {
                self.slots[slot as usize] = Some(entry);
                LitId(slot)
            }
            None => {
                self.slots.push(Some(entry));
                LitId(self.slots.len() as u32 - 1)
            }
        };
        let e = self.slots[id.0 as usize].as_ref().expect("just stored");
        self.ordered.insert(e.key.clone(), id);
        self.exact.insert(l.clone(), id);
        (id, true)
    }

    /// Makes every literal present, new ones with no uses, merging them into
    /// the ordered index in one pass. Returns an id per input literal.
    pub(crate) fn intern_batch<'a>(&mut self, literals: impl IntoIterator<Item = &'a Literal>) -> Vec<LitId> {
        let mut fresh = Vec::new();
        let ids = literals
            .into_iter()
            .map(|l| {
                if let Some(id) = self.exact.get(l) {
                    return *id;
                }
                let key = SortKey::of(l);
                let entry = LitEntry { value: l.clone(), key: key.clone(), uses: 0 };
                let id = match self.free.pop() {
                    Some(slot) => {
                        self.slots[slot as usize] = Some(entry);
                        LitId(slot)
                    }
                    None => {
                        self.slots.push(Some(entry));
                        LitId(self.slots.len() as u32 - 1)
                    }
                };
                self.exact.insert(l.clone(), id);
                fresh.push((key, id));
                id
            })
            .collect();
        let mut batch: BTreeMap<SortKey, LitId> = fresh.into_iter().collect();
        self.ordered.append(&mut batch);
        ids
    }

    /// Removes a literal left without uses by [`Self::intern_batch`].
    pub(crate) fn drop_unused(&mut self, id: LitId) {
        if self.slots[id.0 as usize].as_ref().is_some_and(|e| e.uses == 0) {
            let entry = self.slots[id.0 as usize].take().expect("live literal");
            self.ordered.remove(&entry.key);
            self.exact.remove(&entry.value);
            self.free.push(id.0);
        }
    }

    /// Adds a use of a live literal.
    pub(crate) fn add_use(&mut self, id: LitId) {
        self.slots[id.0 as usize].as_mut().expect("live literal").uses += 1;
    }

    /// Drops a use; returns the literal when it was the last one.
    pub(crate) fn release(&mut self, id: LitId) -> Option<Literal> {
        let entry = self.slots[id.0 as usize].as_mut().expect("live literal");
        entry.uses -= 1;
        if entry.uses > 0 {
            return None;
        }
        let entry = self.slots[id.0 as usize].take().expect("live literal");
        self.ordered.remove(&entry.key);
        self.exact.remove(&entry.value);
        self.free.push(id.0);
        Some(entry.value)
    }

    /// All literals in table order.
    pub(crate) fn iter(&self) -> impl Iterator<Item = LitId> + '_ {
        self.ordered.values().copied()
    }

    /// Literals matching `q`, in table order.
    pub(crate) fn search(&self, q: &LiteralQuery) -> Vec<LitId> {
        match q {
            LiteralQuery::Range(lo, hi) => self
                .ordered
                .range(SortKey::number_probe(*lo)..)
                .take_while(|(k, _)| k.numeric.is_some_and(|v| v <= *hi))
                .map(|(_, id)| *id)
                .collect(),
            LiteralQuery::Prefix(p) => {
                let folded = p.to_lowercase();
                let mut out = Vec::new();
                if could_be_numeric_prefix(&folded) {
                    out.extend(
                        self.ordered
                            .range((Bound::Unbounded, Bound::Excluded(SortKey::text_probe(String::new()))))
                            .filter(|(k, _)| k.folded.starts_with(&folded))
                            .map(|(_, id)| *id),
                    );
                }
                out.extend(
                    self.ordered
                        .range(SortKey::text_probe(folded.clone())..)
                        .take_while(|(k, _)| k.folded.starts_with(&folded))
                        .map(|(_, id)| *id),
                );
                out
            }
            LiteralQuery::CaseInsensitive(key) => {
                let folded = key.to_lowercase();
                let start = match numeric_value(key) {
                    Some(v) => SortKey::number_probe(v),
                    None => SortKey::text_probe(folded.clone()),
                };
                let numeric = start.numeric;
                self.ordered
                    .range(start..)
                    .take_while(|(k, _)| match numeric {
                        Some(v) => k.numeric == Some(v),
                        None => k.folded == folded,
                    })
                    .filter(|(k, _)| k.folded == folded)
                    .map(|(_, id)| *id)
                    .collect()
            }
        }
    }
}
