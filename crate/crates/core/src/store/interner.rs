use std::collections::HashMap;
use std::sync::Arc;

use crate::rdfio::Term;

/// An interned IRI or blank node. Handles are never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Handle(pub(crate) u32);

impl Handle {
    pub fn index(self) -> u32 {
        self.0
    }
}

#[derive(Default)]
pub(crate) struct Interner {
    iris: HashMap<Arc<str>, Handle>,
    bnodes: HashMap<Arc<str>, Handle>,
    texts: Vec<(bool, Arc<str>)>,
}

impl Interner {
    pub(crate) fn intern(&mut self, text: &str, bnode: bool) -> Handle {
        if let Some(h) = self.lookup(text, bnode) {
            return h;
        }
        let text: Arc<str> = Arc::from(text);
        let h = Handle(self.texts.len() as u32);
        self.texts.push((bnode, text.clone()));
        let ids = if bnode { &mut self.bnodes } else { &mut self.iris };
        ids.insert(text, h);
        h
    }

    pub(crate) fn lookup(&self, text: &str, bnode: bool) -> Option<Handle> {
        let ids = if bnode { &self.bnodes } else { &self.iris };
        ids.get(text).copied()
    }

    /// Interns an IRI or blank node term; `None` for literals.
    pub(crate) fn intern_term(&mut self, t: &Term) -> Option<Handle> {
        match t {
            Term::Iri(i) => Some(self.intern(i, false)),
            Term::BNode(b) => Some(self.intern(b, true)),
            Term::Literal(_) => None,
        }
    }

    pub(crate) fn lookup_term(&self, t: &Term) -> Option<Handle> {
        match t {
            Term::Iri(i) => self.lookup(i, false),
            Term::BNode(b) => self.lookup(b, true),
            Term::Literal(_) => None,
        }
    }

    pub(crate) fn text(&self, h: Handle) -> &str {
        &self.texts[h.0 as usize].1
    }

    pub(crate) fn term(&self, h: Handle) -> Term {
        let (bnode, text) = &self.texts[h.0 as usize];
        if *bnode {
            Term::BNode(text.to_string())
        } else {
            Term::Iri(text.to_string())
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.texts.len()
    }
}
