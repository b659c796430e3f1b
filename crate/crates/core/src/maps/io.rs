//! Plain-text map dumps.
//!
//! ```text
//! # brl-map v1
//! domain sphere:r=1
//! target sphere:r=1
//! n1 64
//! n2 128
//! m 3
//! <one line per node, m values in %.17e>
//! ```
//! Nodes are row-major: latitude (first chart coordinate) outer.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::DiscreteMap;
use crate::error::{Error, Result};
use crate::geometry::{DomainModel, TargetModel};

const MAGIC: &str = "# brl-map v1";

pub fn write_map<W: Write>(f: &DiscreteMap, mut out: W) -> Result<()> {
    let (n1, n2) = f.domain().shape();
    let m = f.target().ambient_dim();
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "domain {}", f.domain().descriptor())?;
    writeln!(out, "target {}", f.target().descriptor())?;
    writeln!(out, "n1 {n1}")?;
    writeln!(out, "n2 {n2}")?;
    writeln!(out, "m {m}")?;
    for row in f.values().chunks_exact(m) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

fn header_field<'a>(line: Option<&'a str>, key: &str, lineno: usize) -> Result<&'a str> {
    let line = line.ok_or_else(|| Error::Parse { position: lineno, message: format!("missing `{key}` line") })?;
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .map(str::trim)
        .ok_or_else(|| Error::Parse { position: lineno, message: format!("expected `{key} ...`, got `{line}`") })
}

fn parse_count(text: &str, lineno: usize) -> Result<usize> {
    text.parse().map_err(|_| Error::Parse { position: lineno, message: format!("`{text}` is not a count") })
}

/// Reads a dump; parse positions are 1-based line numbers.
pub fn read_map<R: BufRead>(input: R) -> Result<DiscreteMap> {
    let lines: Vec<String> = input.lines().collect::<std::io::Result<_>>()?;
    let mut it = lines.iter().map(String::as_str);
    if it.next().map(str::trim) != Some(MAGIC) {
        return Err(Error::Parse { position: 1, message: format!("expected `{MAGIC}` header") });
    }
    let domain = header_field(it.next(), "domain", 2)?.to_string();
    let target = header_field(it.next(), "target", 3)?.to_string();
    let n1 = parse_count(header_field(it.next(), "n1", 4)?, 4)?;
    let n2 = parse_count(header_field(it.next(), "n2", 5)?, 5)?;
    let m = parse_count(header_field(it.next(), "m", 6)?, 6)?;
    let domain = DomainModel::parse(&domain, n1, n2)?;
    let target = TargetModel::parse(&target)?;
    if target.ambient_dim() != m {
        return Err(Error::Parse { position: 6, message: format!("target has ambient dimension {}, header says {m}", target.ambient_dim()) });
    }
    let mut values = Vec::with_capacity(domain.node_count() * m);
    for (offset, line) in it.enumerate() {
        let lineno = offset + 7;
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parse { position: lineno, message: format!("`{tok}` is not a number") })?;
            values.push(v);
        }
        if values.len() - before != m {
            return Err(Error::Parse { position: lineno, message: format!("expected {m} values per node") });
        }
    }
    DiscreteMap::new(domain, target, values)
}

pub fn save(f: &DiscreteMap, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_map(f, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<DiscreteMap> {
    read_map(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::AnalyticMap;

    #[test]
    fn round_trip_is_bit_exact() {
        let d = DomainModel::round_sphere(1.0, 8, 16).unwrap();
        let t = TargetModel::sphere(1.0).unwrap();
        let f = AnalyticMap::Holomorphic { k: 2 }.sample(&d, &t).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.map");
        save(&f, &path).unwrap();
        assert_eq!(load(&path).unwrap(), f);
    }

    #[test]
    fn malformed_input_reports_the_line() {
        let d = DomainModel::flat_torus(1.0, 1.0, 4, 4).unwrap();
        let t = TargetModel::euclidean(2).unwrap();
        let f = DiscreteMap::constant(d, t, &[0.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        write_map(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("0.00000000000000000e0 0", "0.0 zz", 1);
        match read_map(text.as_bytes()) {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 7),
            other => panic!("{other:?}"),
        }
        assert!(read_map("hello".as_bytes()).is_err());
    }

    #[test]
    fn off_target_values_are_rejected() {
        let text = format!("{MAGIC}\ndomain torus:a=1,b=1\ntarget sphere:r=1\nn1 4\nn2 4\nm 3\n{}", "1 1 1\n".repeat(16));
        assert!(matches!(read_map(text.as_bytes()), Err(Error::Domain(_))));
    }
}
