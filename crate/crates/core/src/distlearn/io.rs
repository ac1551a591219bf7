//! Text formats for distributions: dense tables as JSON arrays of `"num/den"`
//! strings, supports as NDJSON lines `{"s": "<bits>", "p": "num/den"}`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::error::{Error, Result};

use super::{format_rational, parse_rational, Rational, SupportTable};

pub fn dense_to_json(masses: &[Rational]) -> String {
    let text: Vec<String> = masses.iter().map(format_rational).collect();
    serde_json::to_string(&text).expect("strings serialize")
}

pub fn dense_from_json(json: &str) -> Result<Vec<Rational>> {
    let text: Vec<String> = serde_json::from_str(json)?;
    text.iter().map(|s| parse_rational(s)).collect()
}

#[derive(Serialize, Deserialize)]
struct SupportLine {
    s: Bits,
    p: String,
}

/// Writes every listed point of `table`. Unlisted strings are implicit.
pub fn write_support<W: Write>(table: &SupportTable, mut out: W) -> Result<()> {
    for (s, p) in table.iter() {
        let line = SupportLine { s, p: format_rational(p) };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads support lines for strings split as `n` input bits and `m` output
/// bits. Blank lines are skipped.
pub fn read_support<R: BufRead>(n: u32, m: u32, input: R) -> Result<SupportTable> {
    let mut entries = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SupportLine = serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
        entries.push((rec.s, parse_rational(&rec.p)?));
    }
    SupportTable::from_entries(n, m, entries)
}
