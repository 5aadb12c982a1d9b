//! Incremental UTF-8 character input with line tracking.
//!
//! Reads the underlying source in fixed-size chunks so that parsing an
//! unbounded stream never holds more than one chunk of raw bytes.

use std::io::{self, Read};

use super::MarkupError;

const CHUNK: usize = 16 * 1024;

pub(crate) struct CharInput<R> {
    reader: R,
    buf: Vec<u8>,
    pos: usize,
    eof: bool,
    line: usize,
    peeked: Option<char>,
    started: bool,
}

impl<R: Read> CharInput<R> {
    pub(crate) fn new(reader: R) -> Self {
        CharInput {
            reader,
            buf: Vec::with_capacity(CHUNK),
            pos: 0,
            eof: false,
            line: 1,
            peeked: None,
            started: false,
        }
    }

    pub(crate) fn line(&self) -> usize {
        self.line
    }

    fn fill(&mut self) -> io::Result<()> {
        if self.eof || self.buf.len() - self.pos >= 4 {
            return Ok(());
        }
        self.buf.drain(..self.pos);
        self.pos = 0;
        let mut chunk = [0u8; CHUNK];
        while self.buf.len() < 4 {
            let n = match self.reader.read(&mut chunk) {
                Ok(n) => n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            };
            if n == 0 {
                self.eof = true;
                break;
            }
            self.buf.extend_from_slice(&chunk[..n]);
        }
        Ok(())
    }

    fn decode(&mut self) -> Result<Option<char>, MarkupError> {
        self.fill()?;
        let avail = &self.buf[self.pos..];
        let Some(&lead) = avail.first() else {
            return Ok(None);
        };
        if lead < 0x80 {
            self.pos += 1;
            return Ok(Some(lead as char));
        }
        let width = match lead {
            0xC2..=0xDF => 2,
            0xE0..=0xEF => 3,
            0xF0..=0xF4 => 4,
            _ => return Err(MarkupError::Encoding { line: self.line }),
        };
        if avail.len() < width {
            return Err(MarkupError::Encoding { line: self.line });
        }
        let s = std::str::from_utf8(&avail[..width])
            .map_err(|_| MarkupError::Encoding { line: self.line })?;
        let c = s.chars().next().expect("non-empty utf-8 slice");
        self.pos += width;
        Ok(Some(c))
    }

    /// Next raw character with line-end normalization (CR LF and lone CR
    /// become LF) and a leading byte-order mark dropped.
    fn raw_next(&mut self) -> Result<Option<char>, MarkupError> {
        let mut c = self.decode()?;
        if !self.started {
            self.started = true;
            if c == Some('\u{feff}') {
                c = self.decode()?;
            }
        }
        if c == Some('\r') {
            self.fill()?;
            if self.buf.get(self.pos) == Some(&b'\n') {
                self.pos += 1;
            }
            c = Some('\n');
        }
        Ok(c)
    }

    pub(crate) fn peek(&mut self) -> Result<Option<char>, MarkupError> {
        if self.peeked.is_none() {
            self.peeked = self.raw_next()?;
        }
        Ok(self.peeked)
    }

    pub(crate) fn next(&mut self) -> Result<Option<char>, MarkupError> {
        let c = match self.peeked.take() {
            Some(c) => Some(c),
            None => self.raw_next()?,
        };
        if c == Some('\n') {
            self.line += 1;
        }
        Ok(c)
    }

    /// Consumes `expected` exactly, or fails with `what` in the message.
    pub(crate) fn expect_str(&mut self, expected: &str, what: &str) -> Result<(), MarkupError> {
        for want in expected.chars() {
            match self.next()? {
                Some(c) if c == want => {}
                _ => return Err(MarkupError::syntax(self.line, format!("malformed {what}"))),
            }
        }
        Ok(())
    }

    pub(crate) fn skip_whitespace(&mut self) -> Result<(), MarkupError> {
        while let Some(c) = self.peek()? {
            if !c.is_whitespace() {
                break;
            }
            self.next()?;
        }
        Ok(())
    }
}
