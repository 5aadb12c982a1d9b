//! Pull-style event reader: tokenizes markup and applies the structural
//! rules of the selected mode (strict XML nesting, or the canonicalizing
//! HTML subset).

use std::collections::VecDeque;
use std::io::Read;

use super::input::CharInput;
use super::{AttrValue, MarkupError, Mode, Numeric, ParseOptions};

/// One structural event, in document order.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Begin {
        tag: String,
        attributes: Vec<(String, AttrValue)>,
        line: usize,
    },
    End {
        tag: String,
    },
    Text(String),
    ProcInstr(String),
}

enum Token {
    Start {
        name: String,
        attrs: Vec<(String, String)>,
        empty: bool,
        line: usize,
    },
    End {
        name: String,
        line: usize,
    },
    Text(String),
    Pi(String),
    Eof,
}

const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "hr", "img", "input", "link", "meta", "param",
];

pub(crate) fn is_void_element(tag: &str) -> bool {
    VOID_ELEMENTS.contains(&tag)
}

/// Streaming event reader over any byte source.
pub struct EventReader<R> {
    input: CharInput<R>,
    opts: ParseOptions,
    stack: Vec<String>,
    queue: VecDeque<Event>,
    text: String,
    finished: bool,
}

impl<R: Read> EventReader<R> {
    pub fn new(source: R, opts: ParseOptions) -> Self {
        EventReader {
            input: CharInput::new(source),
            opts,
            stack: Vec::new(),
            queue: VecDeque::new(),
            text: String::new(),
            finished: false,
        }
    }

    /// Line number of the input position (1-based).
    pub fn line(&self) -> usize {
        self.input.line()
    }

    /// Current element nesting depth.
    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    pub fn next_event(&mut self) -> Result<Option<Event>, MarkupError> {
        loop {
            if let Some(ev) = self.queue.pop_front() {
                return Ok(Some(ev));
            }
            if self.finished {
                return Ok(None);
            }
            let token = self.next_token()?;
            if let Token::Text(t) = token {
                self.text.push_str(&t);
                continue;
            }
            self.flush_text();
            match token {
                Token::Start { name, attrs, empty, line } => self.start(name, attrs, empty, line)?,
                Token::End { name, line } => self.end(name, line)?,
                Token::Pi(content) => self.queue.push_back(Event::ProcInstr(content)),
                Token::Eof => {
                    self.finish()?;
                    self.finished = true;
                }
                Token::Text(_) => unreachable!(),
            }
        }
    }

    fn html(&self) -> bool {
        self.opts.mode == Mode::Html
    }

    fn flush_text(&mut self) {
        if self.text.is_empty() {
            return;
        }
        let text = std::mem::take(&mut self.text);
        let blank = text.chars().all(char::is_whitespace);
        if blank && (self.stack.is_empty() || self.html()) {
            return;
        }
        self.queue.push_back(Event::Text(text));
    }

    fn push_end(&mut self) {
        if let Some(tag) = self.stack.pop() {
            self.queue.push_back(Event::End { tag });
        }
    }

    fn start(
        &mut self,
        name: String,
        attrs: Vec<(String, String)>,
        empty: bool,
        line: usize,
    ) -> Result<(), MarkupError> {
        let mut attrs = attrs;
        if self.html() {
            self.close_implied(&name);
            if name == "tr" && self.stack.last().map(String::as_str) == Some("table") {
                self.open("tbody".to_string(), Vec::new(), line);
            }
            if name == "td" || name == "th" {
                for default in ["rowspan", "colspan"] {
                    if !attrs.iter().any(|(n, _)| n == default) {
                        attrs.push((default.to_string(), "1".to_string()));
                    }
                }
            }
        }
        let void = self.html() && is_void_element(&name);
        let attributes = attrs
            .into_iter()
            .map(|(n, v)| {
                let value = self.convert_value(&n, v);
                (n, value)
            })
            .collect();
        self.open(name, attributes, line);
        if empty || void {
            self.push_end();
        }
        Ok(())
    }

    fn open(&mut self, tag: String, attributes: Vec<(String, AttrValue)>, line: usize) {
        self.queue.push_back(Event::Begin {
            tag: tag.clone(),
            attributes,
            line,
        });
        self.stack.push(tag);
    }

    /// Closes elements whose end tag may be omitted when `tag` opens.
    fn close_implied(&mut self, tag: &str) {
        let (targets, barriers): (&[&str], &[&str]) = match tag {
            "p" => (&["p"], &[]),
            "li" => (&["li"], &["ul", "ol"]),
            "tr" => (&["tr"], &["table", "tbody", "thead", "tfoot"]),
            "td" | "th" => (&["td", "th"], &["tr", "table"]),
            "tbody" | "thead" | "tfoot" => (&["tbody", "thead", "tfoot"], &["table"]),
            _ => return,
        };
        if tag == "p" {
            if self.stack.last().map(String::as_str) == Some("p") {
                self.push_end();
            }
            return;
        }
        let found = self.stack.iter().rposition(|open| {
            targets.contains(&open.as_str()) || barriers.contains(&open.as_str())
        });
        if let Some(i) = found {
            if targets.contains(&self.stack[i].as_str()) {
                while self.stack.len() > i {
                    self.push_end();
                }
            }
        }
    }

    fn end(&mut self, name: String, line: usize) -> Result<(), MarkupError> {
        if self.html() {
            if let Some(i) = self.stack.iter().rposition(|open| *open == name) {
                while self.stack.len() > i {
                    self.push_end();
                }
            }
            return Ok(());
        }
        match self.stack.last() {
            Some(open) if *open == name => {
                self.push_end();
                Ok(())
            }
            Some(open) => Err(MarkupError::syntax(
                line,
                format!("mismatched end tag </{name}>, expected </{open}>"),
            )),
            None => Err(MarkupError::syntax(line, format!("unexpected end tag </{name}>"))),
        }
    }

    fn finish(&mut self) -> Result<(), MarkupError> {
        if self.html() {
            while !self.stack.is_empty() {
                self.push_end();
            }
            return Ok(());
        }
        match self.stack.last() {
            Some(open) => Err(MarkupError::syntax(
                self.input.line(),
                format!("unexpected end of input inside <{open}>"),
            )),
            None => Ok(()),
        }
    }

    fn convert_value(&self, name: &str, value: String) -> AttrValue {
        if self.html() && self.opts.multi_value.iter().any(|m| m == name) {
            return AttrValue::Multi(
                value
                    .split_whitespace()
                    .map(|part| self.scalar(part.to_string()))
                    .collect(),
            );
        }
        self.scalar(value)
    }

    fn scalar(&self, value: String) -> AttrValue {
        if self.opts.convert_numbers {
            if let Some(n) = Numeric::parse_lossless(&value) {
                return AttrValue::Number(n);
            }
        }
        AttrValue::Atomic(value)
    }

    // ---- tokenizer -------------------------------------------------------

    fn next_token(&mut self) -> Result<Token, MarkupError> {
        loop {
            match self.input.peek()? {
                None => return Ok(Token::Eof),
                Some('<') => {
                    let line = self.input.line();
                    self.input.next()?;
                    match self.input.peek()? {
                        Some('/') => {
                            self.input.next()?;
                            return self.end_tag(line);
                        }
                        Some('?') => {
                            self.input.next()?;
                            match self.pi()? {
                                Some(content) => return Ok(Token::Pi(content)),
                                None => continue,
                            }
                        }
                        Some('!') => {
                            self.input.next()?;
                            match self.bang()? {
                                Some(text) => return Ok(Token::Text(text)),
                                None => continue,
                            }
                        }
                        _ => return self.start_tag(line),
                    }
                }
                Some(_) => return self.text(),
            }
        }
    }

    fn text(&mut self) -> Result<Token, MarkupError> {
        let mut out = String::new();
        while let Some(c) = self.input.peek()? {
            match c {
                '<' => break,
                '&' => {
                    self.input.next()?;
                    self.entity(&mut out)?;
                }
                _ => {
                    self.input.next()?;
                    out.push(c);
                }
            }
        }
        Ok(Token::Text(out))
    }

    /// Decodes one entity reference; the `&` has been consumed.
    fn entity(&mut self, out: &mut String) -> Result<(), MarkupError> {
        let line = self.input.line();
        let mut name = String::new();
        loop {
            match self.input.peek()? {
                Some(';') => {
                    self.input.next()?;
                    break;
                }
                Some(c) if c.is_alphanumeric() || c == '#' => {
                    self.input.next()?;
                    name.push(c);
                    if name.len() > 12 {
                        return Err(MarkupError::syntax(line, "unterminated entity reference"));
                    }
                }
                _ if self.html() => {
                    out.push('&');
                    out.push_str(&name);
                    return Ok(());
                }
                _ => return Err(MarkupError::syntax(line, "unterminated entity reference")),
            }
        }
        let decoded = match name.as_str() {
            "lt" => Some('<'),
            "gt" => Some('>'),
            "amp" => Some('&'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            _ => {
                if let Some(hex) = name.strip_prefix("#x").or_else(|| name.strip_prefix("#X")) {
                    u32::from_str_radix(hex, 16).ok().and_then(char::from_u32)
                } else if let Some(dec) = name.strip_prefix('#') {
                    dec.parse::<u32>().ok().and_then(char::from_u32)
                } else {
                    None
                }
            }
        };
        match decoded {
            Some(c) => {
                out.push(c);
                Ok(())
            }
            None => Err(MarkupError::syntax(line, format!("unknown entity &{name};"))),
        }
    }

    fn name(&mut self) -> Result<String, MarkupError> {
        let mut name = String::new();
        while let Some(c) = self.input.peek()? {
            if c.is_whitespace() || matches!(c, '/' | '>' | '=' | '<' | '"' | '\'') {
                break;
            }
            self.input.next()?;
            name.push(c);
        }
        if name.is_empty() {
            return Err(MarkupError::syntax(self.input.line(), "expected a name"));
        }
        if self.html() {
            name.make_ascii_lowercase();
        }
        Ok(name)
    }

    fn start_tag(&mut self, line: usize) -> Result<Token, MarkupError> {
        let name = self.name()?;
        let mut attrs: Vec<(String, String)> = Vec::new();
        loop {
            self.input.skip_whitespace()?;
            match self.input.peek()? {
                Some('>') => {
                    self.input.next()?;
                    return Ok(Token::Start { name, attrs, empty: false, line });
                }
                Some('/') => {
                    self.input.next()?;
                    self.input.expect_str(">", "empty-element tag")?;
                    return Ok(Token::Start { name, attrs, empty: true, line });
                }
                None => {
                    return Err(MarkupError::syntax(
                        self.input.line(),
                        format!("unexpected end of input in <{name}>"),
                    ))
                }
                Some(_) => {
                    let attr = self.name()?;
                    self.input.skip_whitespace()?;
                    let value = if self.input.peek()? == Some('=') {
                        self.input.next()?;
                        self.input.skip_whitespace()?;
                        self.attr_value()?
                    } else if self.html() {
                        attr.clone()
                    } else {
                        return Err(MarkupError::syntax(
                            self.input.line(),
                            format!("attribute `{attr}` has no value"),
                        ));
                    };
                    if attrs.iter().any(|(n, _)| *n == attr) {
                        if self.html() {
                            continue;
                        }
                        return Err(MarkupError::syntax(
                            self.input.line(),
                            format!("duplicate attribute `{attr}`"),
                        ));
                    }
                    attrs.push((attr, value));
                }
            }
        }
    }

    fn attr_value(&mut self) -> Result<String, MarkupError> {
        let line = self.input.line();
        let mut out = String::new();
        match self.input.peek()? {
            Some(q @ ('"' | '\'')) => {
                self.input.next()?;
                loop {
                    match self.input.next()? {
                        Some(c) if c == q => return Ok(out),
                        Some('&') => self.entity(&mut out)?,
                        Some('<') if !self.html() => {
                            return Err(MarkupError::syntax(line, "`<` in attribute value"))
                        }
                        Some(c) => out.push(c),
                        None => {
                            return Err(MarkupError::syntax(line, "unterminated attribute value"))
                        }
                    }
                }
            }
            Some(_) if self.html() => {
                while let Some(c) = self.input.peek()? {
                    if c.is_whitespace() || c == '>' {
                        break;
                    }
                    self.input.next()?;
                    if c == '&' {
                        self.entity(&mut out)?;
                    } else {
                        out.push(c);
                    }
                }
                Ok(out)
            }
            _ => Err(MarkupError::syntax(line, "expected a quoted attribute value")),
        }
    }

    fn end_tag(&mut self, line: usize) -> Result<Token, MarkupError> {
        let name = self.name()?;
        self.input.skip_whitespace()?;
        match self.input.next()? {
            Some('>') => Ok(Token::End { name, line }),
            _ => Err(MarkupError::syntax(line, format!("malformed end tag </{name}"))),
        }
    }

    /// Reads until `terminator`, returning the text before it.
    fn until(&mut self, terminator: &str, what: &str) -> Result<String, MarkupError> {
        let line = self.input.line();
        let mut out = String::new();
        loop {
            match self.input.next()? {
                Some(c) => {
                    out.push(c);
                    if out.ends_with(terminator) {
                        out.truncate(out.len() - terminator.len());
                        return Ok(out);
                    }
                }
                None => return Err(MarkupError::syntax(line, format!("unterminated {what}"))),
            }
        }
    }

    /// Processing instruction; the XML declaration yields `None`.
    fn pi(&mut self) -> Result<Option<String>, MarkupError> {
        let content = self.until("?>", "processing instruction")?;
        let target = content.split(|c: char| c.is_whitespace()).next().unwrap_or("");
        if target.eq_ignore_ascii_case("xml") {
            return Ok(None);
        }
        Ok(Some(content))
    }

    /// `<!` constructs: comments and doctype are skipped, CDATA is text.
    fn bang(&mut self) -> Result<Option<String>, MarkupError> {
        match self.input.peek()? {
            Some('-') => {
                self.input.expect_str("--", "comment")?;
                self.until("-->", "comment")?;
                Ok(None)
            }
            Some('[') => {
                self.input.expect_str("[CDATA[", "CDATA section")?;
                Ok(Some(self.until("]]>", "CDATA section")?))
            }
            _ => {
                let line = self.input.line();
                let mut depth = 0usize;
                loop {
                    match self.input.next()? {
                        Some('[') => depth += 1,
                        Some(']') => depth = depth.saturating_sub(1),
                        Some('>') if depth == 0 => return Ok(None),
                        Some(_) => {}
                        None => return Err(MarkupError::syntax(line, "unterminated declaration")),
                    }
                }
            }
        }
    }
}
