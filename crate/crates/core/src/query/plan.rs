//! Join-order optimization.
//!
//! A pattern's estimated result count is `N * sel(s) * sel(p) * sel(o)`
//! over the positions bound when it runs: a bound subject contributes
//! `1/distinct_subjects`, a constant predicate `count(p)/N`, a predicate
//! bound by an earlier pattern `1/predicates`, and a bound object
//! `1/distinct_objects`. The cost of an order is the sum over its prefixes
//! of the product of their estimates.
//!
//! Orders are generated and costed exhaustively up to
//! [`OptimizerOptions::exhaustive_limit`] patterns. With splitting on,
//! whenever the remaining patterns fall apart into groups that share no
//! unbound variable, each group is ordered on its own and the groups are
//! concatenated, so their orderings multiply rather than permute.

use std::collections::{BTreeSet, HashMap};

use super::{QTerm, Query};
use crate::rdfio::Term;
use crate::store::ReadView;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub split: bool,
    /// Above this many patterns a greedy order is used instead.
    pub exhaustive_limit: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions { split: true, exhaustive_limit: 8 }
    }
}

/// The store figures the cost model needs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanStats {
    pub triples: usize,
    pub distinct_subjects: usize,
    pub distinct_objects: usize,
    /// Triples per predicate, including those of its sub-properties.
    pub predicates: HashMap<Term, usize>,
}

impl PlanStats {
    pub fn from_view(view: &ReadView) -> PlanStats {
        let mut predicates = HashMap::new();
        for p in view.predicates() {
            let n: usize = view.subproperties(p).into_iter().map(|q| view.predicate_count(q)).sum();
            if n > 0 {
                predicates.insert(view.term(view.predicate_node(p)), n);
            }
        }
        PlanStats {
            triples: view.len(),
            distinct_subjects: view.distinct_subjects(),
            distinct_objects: view.distinct_objects(),
            predicates,
        }
    }

    /// Estimated results of `pattern` when the variables in `bound` have
    /// values.
    pub fn estimate(&self, pattern: &super::TriplePatternExpr, bound: &BTreeSet<&str>) -> f64 {
        let n = self.triples as f64;
        if n == 0.0 {
            return 0.0;
        }
        let is_bound = |t: &QTerm| match t {
            QTerm::Const(_) => true,
            QTerm::Var(v) => bound.contains(v.as_str()),
        };
        let mut est = n;
        if is_bound(&pattern.subject) {
            est /= self.distinct_subjects.max(1) as f64;
        }
        match &pattern.predicate {
            QTerm::Const(p) => est *= self.predicates.get(p).copied().unwrap_or(0) as f64 / n,
            QTerm::Var(v) if bound.contains(v.as_str()) => est /= self.predicates.len().max(1) as f64,
            QTerm::Var(_) => {}
        }
        if is_bound(&pattern.object) {
            est /= self.distinct_objects.max(1) as f64;
        }
        est
    }
}

/// One pattern in execution order.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    /// Index into [`Query::patterns`].
    pub pattern: usize,
    pub estimate: f64,
    /// Filters (indexes into [`Query::filters`]) checked after this step.
    pub filters: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryPlan {
    pub steps: Vec<PlanStep>,
    /// Variable-disjoint groups of pattern indexes, in execution order.
    pub groups: Vec<Vec<usize>>,
    pub estimated_cost: f64,
    pub candidates_evaluated: u64,
    pub entailment: String,
}

impl QueryPlan {
    /// Pattern indexes in execution order.
    pub fn order(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.pattern).collect()
    }

    /// A plan with a fixed order, for comparing orders.
    pub fn with_order(query: &Query, stats: &PlanStats, order: &[usize], entailment: &str) -> QueryPlan {
        assemble(query, stats, order.to_vec(), 1, entailment)
    }
}

fn vars(q: &Query, i: usize) -> impl Iterator<Item = &str> {
    let p = &q.patterns[i];
    [&p.subject, &p.predicate, &p.object].into_iter().filter_map(|t| match t {
        QTerm::Var(v) => Some(v.as_str()),
        QTerm::Const(_) => None,
    })
}

/// Partitions `patterns` into groups connected by shared unbound variables,
/// ordered by their first pattern.
fn components<'q>(q: &'q Query, patterns: &[usize], bound: &BTreeSet<&'q str>) -> Vec<Vec<usize>> {
    let mut groups: Vec<(BTreeSet<&str>, Vec<usize>)> = Vec::new();
    for &i in patterns {
        let free: BTreeSet<&str> = vars(q, i).filter(|v| !bound.contains(v)).collect();
        let mut merged = (free, vec![i]);
        let mut k = 0;
        while k < groups.len() {
            if !groups[k].0.is_disjoint(&merged.0) {
                let (v, p) = groups.remove(k);
                merged.0.extend(v);
                merged.1.extend(p);
            } else {
                k += 1;
            }
        }
        groups.push(merged);
    }
    let mut out: Vec<Vec<usize>> = groups
        .into_iter()
        .map(|(_, mut p)| {
            p.sort();
            p
        })
        .collect();
    out.sort();
    out
}

struct Best {
    order: Vec<usize>,
    cost: f64,
    rows: f64,
    candidates: u64,
}

struct Search<'a> {
    query: &'a Query,
    stats: &'a PlanStats,
    split: bool,
}

impl<'a> Search<'a> {
    fn run(&self, remaining: &[usize], bound: &BTreeSet<&'a str>) -> Best {
        if remaining.is_empty() {
            return Best { order: Vec::new(), cost: 0.0, rows: 1.0, candidates: 1 };
        }
        if self.split {
            let groups = components(self.query, remaining, bound);
            if groups.len() > 1 {
                let parts: Vec<Best> = groups.iter().map(|g| self.run(g, bound)).collect();
                return combine(parts);
            }
        }
        let mut best: Option<Best> = None;
        let mut candidates = 0;
        for (k, &i) in remaining.iter().enumerate() {
            let e = self.stats.estimate(&self.query.patterns[i], bound);
            let mut next = bound.clone();
            next.extend(vars(self.query, i));
            let rest: Vec<usize> = remaining.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, x)| *x).collect();
            let sub = self.run(&rest, &next);
            candidates += sub.candidates;
            let cost = e + e * sub.cost;
            if best.as_ref().is_none_or(|b| cost < b.cost) {
                let mut order = vec![i];
                order.extend(sub.order);
                best = Some(Best { order, cost, rows: e * sub.rows, candidates: 0 });
            }
        }
        let mut best = best.expect("non-empty");
        best.candidates = candidates;
        best
    }
}

/// Runs independent groups one after another, cheapest combination first.
fn combine(mut parts: Vec<Best>) -> Best {
    // Insertion sort on the pairwise exchange rule; stable for ties.
    for i in 1..parts.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (&parts[j - 1], &parts[j]);
            if b.cost + b.rows * a.cost < a.cost + a.rows * b.cost {
                parts.swap(j - 1, j);
                j -= 1;
            } else {
                break;
            }
        }
    }
    let mut out = Best { order: Vec::new(), cost: 0.0, rows: 1.0, candidates: 1 };
    for p in parts {
        out.cost += out.rows * p.cost;
        out.rows *= p.rows;
        out.candidates *= p.candidates;
        out.order.extend(p.order);
    }
    out
}

fn greedy(query: &Query, stats: &PlanStats) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..query.patterns.len()).collect();
    let mut bound = BTreeSet::new();
    let mut order = Vec::new();
    while !remaining.is_empty() {
        let mut pick = 0;
        let mut best = f64::INFINITY;
        for (k, &i) in remaining.iter().enumerate() {
            let e = stats.estimate(&query.patterns[i], &bound);
            if e < best {
                best = e;
                pick = k;
            }
        }
        let i = remaining.remove(pick);
        bound.extend(vars(query, i));
        order.push(i);
    }
    order
}

fn assemble(query: &Query, stats: &PlanStats, order: Vec<usize>, candidates: u64, entailment: &str) -> QueryPlan {
    let mut bound: BTreeSet<&str> = BTreeSet::new();
    let mut placed = vec![false; query.filters.len()];
    let mut steps = Vec::new();
    let (mut cost, mut prefix) = (0.0, 1.0);
    for &i in &order {
        let estimate = stats.estimate(&query.patterns[i], &bound);
        prefix *= estimate;
        cost += prefix;
        bound.extend(vars(query, i));
        let mut filters = Vec::new();
        for (f, filter) in query.filters.iter().enumerate() {
            if !placed[f] && filter.variables().all(|v| bound.contains(v.as_str())) {
                placed[f] = true;
                filters.push(f);
            }
        }
        steps.push(PlanStep { pattern: i, estimate, filters });
    }
    // Filters over constants only are checked with the first step.
    if let Some(first) = steps.first_mut() {
        for (f, done) in placed.iter().enumerate() {
            if !done {
                first.filters.push(f);
            }
        }
    }

    let all: Vec<usize> = (0..query.patterns.len()).collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let comps = components(query, &all, &BTreeSet::new());
    let contiguous = {
        let group_of = |i: usize| comps.iter().position(|c| c.contains(&i));
        let mut seen = BTreeSet::new();
        let mut last = None;
        order.iter().all(|&i| {
            let g = group_of(i);
            if last != Some(g) {
                last = Some(g);
                seen.insert(g)
            } else {
                true
            }
        })
    };
    if contiguous {
        for &i in &order {
            let g = comps.iter().position(|c| c.contains(&i));
            let same = groups.last().is_some_and(|last| comps.iter().position(|c| c.contains(&last[0])) == g);
            if same {
                groups.last_mut().expect("checked").push(i);
            } else {
                groups.push(vec![i]);
            }
        }
    } else {
        groups.push(order.clone());
    }
    QueryPlan { steps, groups, estimated_cost: cost, candidates_evaluated: candidates, entailment: entailment.to_string() }
}

/// Chooses a pattern order for `query`.
pub fn optimize(query: &Query, stats: &PlanStats, options: &OptimizerOptions, entailment: &str) -> QueryPlan {
    let n = query.patterns.len();
    if n > options.exhaustive_limit {
        return assemble(query, stats, greedy(query, stats), 1, entailment);
    }
    let search = Search { query, stats, split: options.split };
    let all: Vec<usize> = (0..n).collect();
    let best = search.run(&all, &BTreeSet::new());
    assemble(query, stats, best.order, best.candidates, entailment)
}
