//! Backtracking nested-loop execution of a plan.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use super::entail::Entailment;
use super::plan::QueryPlan;
use super::{CompareOp, Filter, QTerm, Query, ResultTable};
use crate::rdfio::Term;
use crate::store::{compare_literals, numeric_value, ReadView};

/// Work counters for one execution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExecStats {
    /// Triples returned by the oracle across all pattern calls.
    pub rows_touched: u64,
    /// Oracle calls made.
    pub calls: u64,
}

fn numeric(t: &Term) -> Option<f64> {
    match t {
        Term::Literal(l) => numeric_value(l.text()),
        _ => None,
    }
}

/// `None` when the operands cannot be ordered against each other.
fn compare(a: &Term, b: &Term) -> Option<Ordering> {
    match (numeric(a), numeric(b)) {
        (Some(x), Some(y)) => x.partial_cmp(&y),
        (None, None) => match (a, b) {
            (Term::Literal(x), Term::Literal(y)) => Some(compare_literals(x, y)),
            _ => None,
        },
        _ => None,
    }
}

fn equal(a: &Term, b: &Term) -> bool {
    match (numeric(a), numeric(b)) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}

/// Evaluates a filter; a type mismatch fails the row.
pub(super) fn check(filter: &Filter, a: &Term, b: &Term) -> bool {
    match filter.op {
        CompareOp::Eq => equal(a, b),
        CompareOp::Ne => !equal(a, b),
        op => match compare(a, b) {
            None => false,
            Some(o) => match op {
                CompareOp::Lt => o == Ordering::Less,
                CompareOp::Le => o != Ordering::Greater,
                CompareOp::Gt => o == Ordering::Greater,
                CompareOp::Ge => o != Ordering::Less,
                CompareOp::Eq | CompareOp::Ne => unreachable!(),
            },
        },
    }
}

struct Exec<'a> {
    view: &'a ReadView,
    query: &'a Query,
    plan: &'a QueryPlan,
    oracle: &'a dyn Entailment,
    slots: HashMap<&'a str, usize>,
    binding: Vec<Option<Term>>,
    projection: Vec<usize>,
    rows: Vec<Vec<Term>>,
    seen: HashSet<Vec<Term>>,
    stats: ExecStats,
}

impl<'a> Exec<'a> {
    fn value(&self, t: &'a QTerm) -> Option<Term> {
        match t {
            QTerm::Const(c) => Some(c.clone()),
            QTerm::Var(v) => self.binding[self.slots[v.as_str()]].clone(),
        }
    }

    /// Binds `t` to `value`; records newly bound slots in `newly`.
    fn unify(&mut self, t: &'a QTerm, value: &Term, newly: &mut Vec<usize>) -> bool {
        match t {
            QTerm::Const(c) => c == value,
            QTerm::Var(v) => {
                let slot = self.slots[v.as_str()];
                match &self.binding[slot] {
                    Some(b) => b == value,
                    None => {
                        self.binding[slot] = Some(value.clone());
                        newly.push(slot);
                        true
                    }
                }
            }
        }
    }

    fn filters_pass(&self, step: usize) -> bool {
        self.plan.steps[step].filters.iter().all(|&f| {
            let filter = &self.query.filters[f];
            match (self.value(&filter.left), self.value(&filter.right)) {
                (Some(a), Some(b)) => check(filter, &a, &b),
                _ => false,
            }
        })
    }

    fn full(&self) -> bool {
        self.query.limit.is_some_and(|l| self.rows.len() >= l)
    }

    /// Returns true when the limit is reached.
    fn run(&mut self, step: usize) -> bool {
        if step == self.plan.steps.len() {
            let row: Vec<Term> =
                self.projection.iter().map(|&s| self.binding[s].clone().expect("projected variable bound")).collect();
            if self.query.distinct {
                if self.seen.contains(&row) {
                    return false;
                }
                self.seen.insert(row.clone());
            }
            self.rows.push(row);
            return self.full();
        }
        let pattern = &self.query.patterns[self.plan.steps[step].pattern];
        let (s, p, o) = (self.value(&pattern.subject), self.value(&pattern.predicate), self.value(&pattern.object));
        // A literal bound into the subject or predicate position matches nothing.
        if s.as_ref().is_some_and(Term::is_literal) || p.as_ref().is_some_and(|p| p.as_iri().is_none()) {
            return false;
        }
        self.stats.calls += 1;
        let triples = self.oracle.solve(self.view, s.as_ref(), p.as_ref(), o.as_ref());
        self.stats.rows_touched += triples.len() as u64;
        let mut newly = Vec::new();
        for t in &triples {
            let ok = self.unify(&pattern.subject, &t.subject, &mut newly)
                && self.unify(&pattern.predicate, &t.predicate, &mut newly)
                && self.unify(&pattern.object, &t.object, &mut newly);
            if ok && self.filters_pass(step) && self.run(step + 1) {
                return true;
            }
            for slot in newly.drain(..) {
                self.binding[slot] = None;
            }
        }
        false
    }
}

/// Runs `plan` for `query` against `oracle`.
pub fn execute(
    view: &ReadView,
    query: &Query,
    plan: &QueryPlan,
    oracle: &dyn Entailment,
) -> (ResultTable, ExecStats) {
    let slots: HashMap<&str, usize> = query.variables.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    let projection = query.projection.iter().map(|v| slots[v.as_str()]).collect();
    let mut exec = Exec {
        view,
        query,
        plan,
        oracle,
        binding: vec![None; slots.len()],
        slots,
        projection,
        rows: Vec::new(),
        seen: HashSet::new(),
        stats: ExecStats::default(),
    };
    if query.limit != Some(0) {
        exec.run(0);
    }
    (ResultTable { columns: query.projection.clone(), rows: exec.rows }, exec.stats)
}
