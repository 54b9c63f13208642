//! CSV files with a `# key: value` metadata preamble.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub type Metadata = Vec<(String, String)>;

pub fn write_preamble<W: Write>(w: &mut W, meta: &[(String, String)]) -> Result<()> {
    for (k, v) in meta {
        if k.contains(':') || k.contains('\n') || v.contains('\n') {
            return Err(Error::InvalidParameter(format!("metadata entry {k:?} is not single-line")));
        }
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}

/// Splits a file into its metadata preamble and the CSV body.
pub fn read_preamble<R: BufRead>(r: R) -> Result<(Metadata, String)> {
    let mut meta = Vec::new();
    let mut body = String::new();
    let mut in_preamble = true;
    for line in r.lines() {
        let line = line?;
        if in_preamble {
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest
                    .split_once(": ")
                    .ok_or_else(|| Error::Parse(format!("bad metadata line {line:?}")))?;
                meta.push((k.to_string(), v.to_string()));
                continue;
            }
            in_preamble = false;
        }
        body.push_str(&line);
        body.push('\n');
    }
    Ok((meta, body))
}

pub fn lookup<'a>(meta: &'a [(String, String)], key: &str) -> Option<&'a str> {
    meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

pub fn parse_field<T: std::str::FromStr>(meta: &[(String, String)], key: &str) -> Result<T> {
    let raw = lookup(meta, key).ok_or_else(|| Error::Parse(format!("missing metadata field {key:?}")))?;
    raw.parse().map_err(|_| Error::Parse(format!("field {key:?}: cannot parse {raw:?}")))
}
