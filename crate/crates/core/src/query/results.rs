use std::fmt::Write as _;

use super::QueryError;
use crate::htmlgen::{tag, text, HtmlSpec};
use crate::markup::{parse_str, quote_attribute, quote_text, Element, MarkupNode, ParseOptions};
use crate::rdfio::{Literal, Term};

/// Rows answering a query, one term per projected column.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Term>>,
}

fn cell_xml(out: &mut String, t: &Term) {
    match t {
        Term::Iri(i) => write!(out, "<cell kind=\"iri\">{}</cell>", quote_text(i)),
        Term::BNode(b) => write!(out, "<cell kind=\"bnode\">{}</cell>", quote_text(b)),
        Term::Literal(Literal::Plain(s)) => write!(out, "<cell kind=\"literal\">{}</cell>", quote_text(s)),
        Term::Literal(Literal::Lang { lang, text }) => {
            write!(out, "<cell kind=\"literal\" lang=\"{}\">{}</cell>", quote_attribute(lang), quote_text(text))
        }
        Term::Literal(Literal::Typed { datatype, text }) => write!(
            out,
            "<cell kind=\"literal\" datatype=\"{}\">{}</cell>",
            quote_attribute(datatype),
            quote_text(text)
        ),
    }
    .expect("write to string");
}

/// Display text of a term in an HTML cell.
pub fn cell_text(t: &Term) -> String {
    match t {
        Term::Iri(i) => i.clone(),
        Term::BNode(b) => format!("_:{b}"),
        Term::Literal(Literal::Lang { lang, text }) => format!("{text}@{lang}"),
        Term::Literal(l) => l.text().to_string(),
    }
}

impl ResultTable {
    /// ```text
    /// <?xml version="1.0" encoding="UTF-8"?>
    /// <resulttable>
    /// <columns><col>X</col></columns>
    /// <row><cell kind="iri">http://example.org/woman</cell></row>
    /// </resulttable>
    /// ```
    /// `kind` is `iri`, `bnode` or `literal`; literals may carry `lang` or
    /// `datatype`.
    pub fn to_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<resulttable>\n<columns>");
        for c in &self.columns {
            write!(out, "<col>{}</col>", quote_text(c)).expect("write to string");
        }
        out.push_str("</columns>\n");
        for row in &self.rows {
            out.push_str("<row>");
            for t in row {
                cell_xml(&mut out, t);
            }
            out.push_str("</row>\n");
        }
        out.push_str("</resulttable>\n");
        out
    }

    pub fn from_xml(xml: &str) -> Result<ResultTable, QueryError> {
        let bad = |m: &str| QueryError::Format(m.to_string());
        let nodes = parse_str(xml, &ParseOptions::xml()).map_err(|e| QueryError::Format(e.to_string()))?;
        let root = nodes
            .iter()
            .find_map(|n| match n {
                MarkupNode::Element(e) => Some(e),
                _ => None,
            })
            .filter(|e| e.tag == "resulttable")
            .ok_or_else(|| bad("root element is not resulttable"))?;
        let mut children = root.elements();
        let columns_el = children.next().filter(|e| e.tag == "columns").ok_or_else(|| bad("missing columns"))?;
        let mut columns = Vec::new();
        for c in columns_el.elements() {
            if c.tag != "col" {
                return Err(bad("columns may only contain col"));
            }
            columns.push(c.text());
        }
        let mut rows = Vec::new();
        for r in children {
            if r.tag != "row" {
                return Err(bad(&format!("unexpected element {}", r.tag)));
            }
            let row: Vec<Term> = r.elements().map(cell_term).collect::<Result<_, _>>()?;
            if row.len() != columns.len() {
                return Err(bad("row width does not match columns"));
            }
            rows.push(row);
        }
        Ok(ResultTable { columns, rows })
    }

    /// An HTML table with a header row.
    pub fn to_html(&self) -> HtmlSpec {
        let header = tag("tr").children(self.columns.iter().map(|c| tag("th").child(text(c.clone()))));
        let rows = self
            .rows
            .iter()
            .map(|r| tag("tr").children(r.iter().map(|t| tag("td").child(text(cell_text(t))))));
        tag("table").attr("class", "results").child(header).children(rows)
    }
}

fn cell_term(e: &Element) -> Result<Term, QueryError> {
    if e.tag != "cell" {
        return Err(QueryError::Format(format!("unexpected element {} in row", e.tag)));
    }
    let attr = |n: &str| e.attr(n).map(|v| v.text().into_owned());
    let value = e.text();
    match attr("kind").as_deref() {
        Some("iri") => Ok(Term::Iri(value)),
        Some("bnode") => Ok(Term::BNode(value)),
        Some("literal") => Ok(match (attr("lang"), attr("datatype")) {
            (Some(lang), _) => Term::Literal(Literal::Lang { lang, text: value }),
            (None, Some(datatype)) => Term::Literal(Literal::Typed { datatype, text: value }),
            (None, None) => Term::Literal(Literal::Plain(value)),
        }),
        other => Err(QueryError::Format(format!("bad cell kind {other:?}"))),
    }
}
