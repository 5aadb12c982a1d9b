//! Typed access to form parameters.
//!
//! ```
//! use triplekit::httpd::{http_parameters, ParamSpec, ParamValue, Request, Version, Headers};
//!
//! let request = Request::new("GET", "/?name=Ann&age=3", Version::Http11, Headers::new(), Vec::new());
//! let params = http_parameters(&request, &[
//!     ParamSpec::new("name").min_length(2),
//!     ParamSpec::new("age").integer(),
//!     ParamSpec::new("title").optional(),
//! ])?;
//! assert_eq!(params.get("age"), Some(&ParamValue::Integer(3)));
//! assert_eq!(params.get("title"), None);
//! # Ok::<(), triplekit::httpd::ParamError>(())
//! ```

use std::collections::BTreeMap;

use thiserror::Error;
use url::form_urlencoded;

use super::request::Request;

/// Encodes pairs as `application/x-www-form-urlencoded`.
pub fn form_encode<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> String {
    let mut s = form_urlencoded::Serializer::new(String::new());
    for (k, v) in pairs {
        s.append_pair(k.as_ref(), v.as_ref());
    }
    s.finish()
}

/// Decodes `application/x-www-form-urlencoded` text. `+` is a space.
pub fn form_decode(text: &str) -> Vec<(String, String)> {
    form_urlencoded::parse(text.as_bytes()).map(|(k, v)| (k.into_owned(), v.into_owned())).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Constraint {
    Optional,
    Integer,
    /// Minimum length in characters.
    MinLength(usize),
    OneOf(Vec<String>),
    /// Value used when the parameter is absent; implies optional.
    Default(String),
}

/// Declares one expected parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub constraints: Vec<Constraint>,
}

impl ParamSpec {
    /// A required text parameter.
    pub fn new(name: impl Into<String>) -> Self {
        ParamSpec { name: name.into(), constraints: Vec::new() }
    }

    pub fn optional(self) -> Self {
        self.with(Constraint::Optional)
    }

    pub fn integer(self) -> Self {
        self.with(Constraint::Integer)
    }

    pub fn min_length(self, n: usize) -> Self {
        self.with(Constraint::MinLength(n))
    }

    pub fn one_of<I, S>(self, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.with(Constraint::OneOf(values.into_iter().map(Into::into).collect()))
    }

    pub fn default(self, value: impl Into<String>) -> Self {
        self.with(Constraint::Default(value.into()))
    }

    pub fn with(mut self, c: Constraint) -> Self {
        self.constraints.push(c);
        self
    }

    fn default_value(&self) -> Option<&str> {
        self.constraints.iter().find_map(|c| match c {
            Constraint::Default(v) => Some(v.as_str()),
            _ => None,
        })
    }

    fn is_optional(&self) -> bool {
        self.constraints.iter().any(|c| matches!(c, Constraint::Optional | Constraint::Default(_)))
    }

    /// Checks that the constraints can be satisfied together.
    pub fn check(&self) -> Result<(), ParamError> {
        let inconsistent = |reason: String| Err(ParamError::InconsistentSpec { name: self.name.clone(), reason });
        let kinds = |f: fn(&Constraint) -> bool| self.constraints.iter().filter(|c| f(c)).count();
        if kinds(|c| matches!(c, Constraint::Default(_))) > 1 {
            return inconsistent("more than one default".into());
        }
        if kinds(|c| matches!(c, Constraint::OneOf(_))) > 1 {
            return inconsistent("more than one value list".into());
        }
        if let Some(d) = self.default_value() {
            if let Err(e) = self.convert(d) {
                return inconsistent(format!("default {d:?} is invalid: {e}"));
            }
        }
        Ok(())
    }

    fn convert(&self, value: &str) -> Result<ParamValue, ParamError> {
        let name = || self.name.clone();
        for c in &self.constraints {
            match c {
                Constraint::MinLength(n) if value.chars().count() < *n => {
                    return Err(ParamError::TooShort { name: name(), min: *n });
                }
                Constraint::OneOf(values) if !values.iter().any(|v| v == value) => {
                    return Err(ParamError::NotOneOf { name: name(), allowed: values.clone() });
                }
                _ => {}
            }
        }
        if self.constraints.contains(&Constraint::Integer) {
            return value
                .trim()
                .parse()
                .map(ParamValue::Integer)
                .map_err(|_| ParamError::NotInteger { name: name(), value: value.to_string() });
        }
        Ok(ParamValue::Text(value.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamValue {
    Text(String),
    Integer(i64),
}

impl ParamValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            ParamValue::Integer(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Integer(i) => Some(*i),
            ParamValue::Text(_) => None,
        }
    }
}

/// Converted parameters by name. Absent optional parameters have no entry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Params(BTreeMap<String, ParamValue>);

impl Params {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.get(name)
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        self.get(name).and_then(ParamValue::as_str)
    }

    pub fn integer(&self, name: &str) -> Option<i64> {
        self.get(name).and_then(ParamValue::as_i64)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParamError {
    #[error("missing parameter {name:?}")]
    Missing { name: String },
    #[error("parameter {name:?} must be an integer, got {value:?}")]
    NotInteger { name: String, value: String },
    #[error("parameter {name:?} must be at least {min} characters")]
    TooShort { name: String, min: usize },
    #[error("parameter {name:?} must be one of {allowed:?}")]
    NotOneOf { name: String, allowed: Vec<String> },
    #[error("parameter {name:?} is declared inconsistently: {reason}")]
    InconsistentSpec { name: String, reason: String },
}

impl ParamError {
    pub fn name(&self) -> &str {
        match self {
            ParamError::Missing { name }
            | ParamError::NotInteger { name, .. }
            | ParamError::TooShort { name, .. }
            | ParamError::NotOneOf { name, .. }
            | ParamError::InconsistentSpec { name, .. } => name,
        }
    }
}

/// Fetches and converts the parameters named by `specs` from the query
/// string or form body. The first value of a repeated name is used.
pub fn http_parameters(request: &Request, specs: &[ParamSpec]) -> Result<Params, ParamError> {
    let mut out = BTreeMap::new();
    for spec in specs {
        spec.check()?;
        let value = match request.param(&spec.name).or(spec.default_value()) {
            Some(v) => spec.convert(v)?,
            None if spec.is_optional() => continue,
            None => return Err(ParamError::Missing { name: spec.name.clone() }),
        };
        out.insert(spec.name.clone(), value);
    }
    Ok(Params(out))
}
