//! Text descriptors of the form `kind:key=value,key=value`.
//!
//! Used for domains (`torus:a=1,b=1`), targets (`ellipsoid:a=1,b=1,c=2`) and
//! catalog maps (`holomorphic:k=2`). Values are real numbers; keys are
//! validated by the consumer through [`Descriptor::take`] and
//! [`Descriptor::finish`], which rejects leftovers.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub kind: String,
    params: Vec<Param>,
}

#[derive(Debug, Clone, PartialEq)]
struct Param {
    key: String,
    value: f64,
    position: usize,
    used: bool,
}

impl Descriptor {
    pub fn parse(text: &str) -> Result<Self> {
        let text_trim = text.trim();
        let offset = text.len() - text.trim_start().len();
        let (kind, rest, rest_pos) = match text_trim.find(':') {
            Some(i) => (&text_trim[..i], &text_trim[i + 1..], offset + i + 1),
            None => (text_trim, "", offset + text_trim.len()),
        };
        if kind.is_empty() {
            return Err(Error::Parse { position: offset, message: "missing kind".into() });
        }
        if let Some(bad) = kind.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')) {
            return Err(Error::Parse {
                position: offset + bad,
                message: format!("invalid character in kind `{kind}`"),
            });
        }
        let mut params = Vec::new();
        if !rest.is_empty() {
            let mut pos = rest_pos;
            for item in rest.split(',') {
                let Some(eq) = item.find('=') else {
                    return Err(Error::Parse { position: pos, message: format!("expected key=value, got `{item}`") });
                };
                let key = item[..eq].trim();
                let raw = item[eq + 1..].trim();
                if key.is_empty() {
                    return Err(Error::Parse { position: pos, message: "empty key".into() });
                }
                let value: f64 = raw.parse().map_err(|_| Error::Parse {
                    position: pos + eq + 1,
                    message: format!("`{raw}` is not a number"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Parse { position: pos + eq + 1, message: format!("`{raw}` is not finite") });
                }
                if params.iter().any(|p: &Param| p.key == key) {
                    return Err(Error::Parse { position: pos, message: format!("duplicate key `{key}`") });
                }
                params.push(Param { key: key.to_string(), value, position: pos, used: false });
                pos += item.len() + 1;
            }
        }
        Ok(Self { kind: kind.to_string(), params })
    }

    pub fn new(kind: &str) -> Self {
        Self { kind: kind.to_string(), params: Vec::new() }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.set(key, value);
        self
    }

    /// Overrides or appends a parameter.
    pub fn set(&mut self, key: &str, value: f64) {
        match self.params.iter_mut().find(|p| p.key == key) {
            Some(p) => p.value = value,
            None => self.params.push(Param { key: key.to_string(), value, position: 0, used: false }),
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|p| p.key == key).map(|p| p.value)
    }

    pub fn has(&self, key: &str) -> bool {
        self.params.iter().any(|p| p.key == key)
    }

    /// Consumes a parameter, falling back to `default` when absent.
    pub fn take(&mut self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.params.iter_mut().find(|p| p.key == key) {
            Some(p) => {
                p.used = true;
                Ok(p.value)
            }
            None => default.ok_or_else(|| Error::Usage(format!("descriptor `{}` requires `{key}`", self.kind))),
        }
    }

    pub fn take_positive(&mut self, key: &str, default: Option<f64>) -> Result<f64> {
        let v = self.take(key, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::Usage(format!("`{key}` must be positive in `{}`, got {v}", self.kind)))
        }
    }

    /// Rejects any parameter not consumed by `take`.
    pub fn finish(&self) -> Result<()> {
        match self.params.iter().find(|p| !p.used) {
            Some(p) => Err(Error::Parse {
                position: p.position,
                message: format!("unknown key `{}` for `{}`", p.key, self.kind),
            }),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        for (i, p) in self.params.iter().enumerate() {
            let sep = if i == 0 { ':' } else { ',' };
            write!(f, "{sep}{}={}", p.key, p.value)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_kind_and_params() {
        let mut d = Descriptor::parse("ellipsoid:a=1,b=1,c=2").unwrap();
        assert_eq!(d.kind, "ellipsoid");
        assert_eq!(d.take("c", None).unwrap(), 2.0);
        assert!(d.finish().is_err());
        d.take("a", None).unwrap();
        d.take("b", None).unwrap();
        d.finish().unwrap();
    }

    #[test]
    fn bare_kind() {
        let d = Descriptor::parse("identity").unwrap();
        assert_eq!(d.kind, "identity");
        d.finish().unwrap();
    }

    #[test]
    fn bad_number_reports_position() {
        match Descriptor::parse("sphere:r=abc") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_position() {
        let mut d = Descriptor::parse("sphere:r=1,q=3").unwrap();
        d.take("r", None).unwrap();
        match d.finish() {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 11),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn display_round_trips() {
        let d = Descriptor::parse("prodspheres:r1=1,r2=2.5").unwrap();
        assert_eq!(Descriptor::parse(&d.to_string()).unwrap(), d);
    }
}
