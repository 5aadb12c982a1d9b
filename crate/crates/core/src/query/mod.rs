//! Conjunctive queries over a store.
//!
//! ```text
//! [USING prefix = <iri>]* [USING <iri>]
//! SELECT [DISTINCT] Var (, Var)* | *
//! WHERE (term, term, term) (, (term, term, term))*
//! (FILTER term op term)* [DISTINCT] [LIMIT n] [ENTAILMENT name]
//! ```
//!
//! Variables start with an uppercase letter. Other terms are `<iri>`,
//! `prefix:local`, lowercase bare names, `"text"` with optional `@lang` or
//! `^^datatype`, and numbers. A bare name is an RDF or RDFS vocabulary word
//! (`type`, `subClassOf`, ...) or else local to the default namespace. A
//! number in a pattern matches any literal of equal numeric value.
//! Comparison operators are `= != < <= > >=`.
//!
//! ```
//! use triplekit::query::QueryEngine;
//! use triplekit::rdfio::{Term, Triple};
//! use triplekit::store::Store;
//!
//! let store = Store::new();
//! let ex = |n: &str| Term::iri(format!("http://example.org/{n}"));
//! store.transaction(|txn| txn.assert(Triple::new(ex("mary"), Term::iri(triplekit::vocab::RDF_TYPE), ex("woman")), "demo", 1))?;
//! let (table, _) = QueryEngine::new().run(&store, "SELECT X WHERE (mary, type, X)")?;
//! assert_eq!(table.rows, vec![vec![ex("woman")]]);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

mod entail;
mod exec;
mod parse;
mod plan;
mod results;

use std::sync::Arc;

use thiserror::Error;

use crate::rdfio::Term;
use crate::store::{ReadView, Store, StoreError};

pub use entail::{entailment, Entailment, EntailmentRegistry, Raw, Rdf, Rdfs};
pub use exec::{execute, ExecStats};
pub use parse::DEFAULT_NAMESPACE;
pub use plan::{optimize, OptimizerOptions, PlanStats, PlanStep, QueryPlan};
pub use results::{cell_text, ResultTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown entailment {0:?}")]
    UnknownEntailment(String),
    #[error("variable {0} does not occur in any pattern")]
    UnboundVariable(String),
    #[error("bad result table: {0}")]
    Format(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// A pattern position: a variable or a constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum QTerm {
    Var(String),
    Const(Term),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriplePatternExpr {
    pub subject: QTerm,
    pub predicate: QTerm,
    pub object: QTerm,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

/// A comparison. Numeric values compare by value, other literals with the
/// store's literal order. Ordering a number against text, or anything that is
/// not a literal, fails the row.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    pub left: QTerm,
    pub op: CompareOp,
    pub right: QTerm,
}

impl Filter {
    pub fn variables(&self) -> impl Iterator<Item = &String> {
        [&self.left, &self.right].into_iter().filter_map(|t| match t {
            QTerm::Var(v) => Some(v),
            QTerm::Const(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub projection: Vec<String>,
    pub patterns: Vec<TriplePatternExpr>,
    pub filters: Vec<Filter>,
    pub distinct: bool,
    pub limit: Option<usize>,
    /// Requested by an `ENTAILMENT` clause.
    pub entailment: Option<String>,
    /// All pattern variables in order of first occurrence.
    pub variables: Vec<String>,
}

/// Parses query text, checking any `ENTAILMENT` name against the built-in
/// modules.
pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let q = parse::parse(text)?;
    if let Some(e) = &q.entailment {
        entailment(e)?;
    }
    Ok(q)
}

/// Parses, plans and runs queries with a registry of entailment modules.
pub struct QueryEngine {
    registry: Arc<EntailmentRegistry>,
    options: OptimizerOptions,
    default_entailment: String,
}

impl Default for QueryEngine {
    fn default() -> Self {
        QueryEngine::new()
    }
}

impl QueryEngine {
    pub fn new() -> Self {
        QueryEngine {
            registry: Arc::new(EntailmentRegistry::default()),
            options: OptimizerOptions::default(),
            default_entailment: "rdfs".into(),
        }
    }

    pub fn with_options(mut self, options: OptimizerOptions) -> Self {
        self.options = options;
        self
    }

    /// Entailment used when a query names none.
    pub fn with_default_entailment(mut self, name: &str) -> Self {
        self.default_entailment = name.to_string();
        self
    }

    pub fn registry(&self) -> &EntailmentRegistry {
        &self.registry
    }

    pub fn parse(&self, text: &str) -> Result<Query, QueryError> {
        let q = parse::parse(text)?;
        if let Some(e) = &q.entailment {
            self.registry.get(e)?;
        }
        Ok(q)
    }

    fn entailment_name<'q>(&'q self, query: &'q Query, requested: Option<&'q str>) -> &'q str {
        requested.or(query.entailment.as_deref()).unwrap_or(&self.default_entailment)
    }

    pub fn plan(&self, view: &ReadView, query: &Query, entailment: Option<&str>) -> Result<QueryPlan, QueryError> {
        let name = self.entailment_name(query, entailment);
        self.registry.get(name)?;
        Ok(optimize(query, &PlanStats::from_view(view), &self.options, name))
    }

    pub fn execute(&self, view: &ReadView, query: &Query, plan: &QueryPlan) -> Result<(ResultTable, ExecStats), QueryError> {
        let oracle = self.registry.get(&plan.entailment)?;
        Ok(execute(view, query, plan, oracle.as_ref()))
    }

    /// Parses, plans and executes `text` on one read snapshot.
    pub fn run(&self, store: &Store, text: &str) -> Result<(ResultTable, QueryPlan), QueryError> {
        self.run_with(store, text, None)
    }

    /// Like [`run`](Self::run), with an entailment overriding the query's.
    pub fn run_with(
        &self,
        store: &Store,
        text: &str,
        entailment: Option<&str>,
    ) -> Result<(ResultTable, QueryPlan), QueryError> {
        let query = self.parse(text)?;
        let view = store.read();
        let plan = self.plan(&view, &query, entailment)?;
        let (table, _) = self.execute(&view, &query, &plan)?;
        Ok((table, plan))
    }
}

#[cfg(test)]
mod tests;
