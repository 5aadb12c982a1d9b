//! Web-infrastructure toolkit for RDF data.
//!
//! * [`markup`]: XML and canonical HTML-subset parsing, event streaming and
//!   serialization.
//! * [`htmlgen`]: HTML generation from declarative specifications.
//! * [`rdfio`]: RDF/XML reading (whole document or per description) and
//!   writing.
//! * [`store`]: the indexed, transactional triple store.
//! * [`persist`]: binary snapshots plus a textual journal per source.
//! * [`query`]: a small conjunctive query language, entailment modules and
//!   the join-order optimizer.
//! * [`httpd`]: HTTP/1.1 server and client.
//! * [`service`]: the assembled query server with admin pages.

pub mod htmlgen;
pub mod httpd;
pub mod markup;
pub mod persist;
pub mod query;
pub mod rdfio;
pub mod service;
pub mod store;
pub mod vocab;
