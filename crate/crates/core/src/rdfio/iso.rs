use std::collections::HashMap;

use super::{Term, Triple};

type Counts<'a> = HashMap<&'a Triple, usize>;

fn counts(triples: &[Triple]) -> Counts<'_> {
    let mut c = HashMap::new();
    for t in triples {
        *c.entry(t).or_insert(0) += 1;
    }
    c
}

fn bnodes(triples: &[Triple]) -> Vec<&str> {
    let mut seen = Vec::new();
    for t in triples {
        for term in [&t.subject, &t.object] {
            if let Term::BNode(b) = term {
                if !seen.contains(&b.as_str()) {
                    seen.push(b.as_str());
                }
            }
        }
    }
    seen
}

/// Per-node fingerprint: the non-blank parts of every triple the node
/// occurs in. Isomorphic nodes have equal fingerprints.
fn signature(triples: &[Triple], b: &str) -> Vec<(u8, Term, Option<Term>)> {
    let mut sig = Vec::new();
    let ground = |t: &Term| (!t.is_bnode()).then(|| t.clone());
    for t in triples {
        if matches!(&t.subject, Term::BNode(x) if x == b) {
            sig.push((0, t.predicate.clone(), ground(&t.object)));
        }
        if matches!(&t.object, Term::BNode(x) if x == b) {
            sig.push((1, t.predicate.clone(), ground(&t.subject)));
        }
    }
    sig.sort();
    sig
}

fn map_term(t: &Term, mapping: &HashMap<&str, &str>) -> Option<Term> {
    match t {
        Term::BNode(b) => mapping.get(b.as_str()).map(|m| Term::BNode(m.to_string())),
        other => Some(other.clone()),
    }
}

struct Search<'a> {
    a_counts: Counts<'a>,
    b_counts: Counts<'a>,
    order: Vec<&'a str>,
    candidates: Vec<Vec<&'a str>>,
}

impl<'a> Search<'a> {
    /// Every triple of `a` that mentions `node` and is fully mapped must
    /// occur in `b` exactly as often as in `a`.
    fn consistent(&self, node: &str, mapping: &HashMap<&str, &str>) -> bool {
        for (t, n) in &self.a_counts {
            let mentions = |x: &Term| matches!(x, Term::BNode(b) if b == node);
            if !mentions(&t.subject) && !mentions(&t.object) {
                continue;
            }
            let (Some(s), Some(o)) = (map_term(&t.subject, mapping), map_term(&t.object, mapping)) else {
                continue;
            };
            let image = Triple::new(s, t.predicate.clone(), o);
            if self.b_counts.get(&image) != Some(n) {
                return false;
            }
        }
        true
    }

    fn extend(&self, i: usize, mapping: &mut HashMap<&'a str, &'a str>, used: &mut Vec<&'a str>) -> bool {
        if i == self.order.len() {
            return true;
        }
        let node = self.order[i];
        for &c in &self.candidates[i] {
            if used.contains(&c) {
                continue;
            }
            mapping.insert(node, c);
            used.push(c);
            if self.consistent(node, mapping) && self.extend(i + 1, mapping, used) {
                return true;
            }
            used.pop();
            mapping.remove(node);
        }
        false
    }
}

/// True when the two triple multisets are equal up to a bijective renaming
/// of blank nodes.
pub fn isomorphic(a: &[Triple], b: &[Triple]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let (a_nodes, b_nodes) = (bnodes(a), bnodes(b));
    if a_nodes.len() != b_nodes.len() {
        return false;
    }
    let a_counts = counts(a);
    let b_counts = counts(b);
    for (t, n) in &a_counts {
        if !t.subject.is_bnode() && !t.object.is_bnode() && b_counts.get(t) != Some(n) {
            return false;
        }
    }
    let b_sigs: Vec<_> = b_nodes.iter().map(|n| signature(b, n)).collect();
    let candidates: Vec<Vec<&str>> = a_nodes
        .iter()
        .map(|n| {
            let sig = signature(a, n);
            b_nodes.iter().zip(&b_sigs).filter(|(_, s)| **s == sig).map(|(m, _)| *m).collect()
        })
        .collect();
    let search = Search { a_counts, b_counts, order: a_nodes, candidates };
    search.extend(0, &mut HashMap::new(), &mut Vec::new())
}
