use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{bail, Context, Result};
use densep_core::distlearn::parse_rational;
use densep_core::prf::{InstanceRecord, SecretInstanceRecord};
use densep_core::{Instance, Rational, SampleRecord, SecretInstance, SecretKey};
use serde::{Deserialize, Serialize};

/// Secret side of an instance: the public fields plus `a` and `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretFile {
    #[serde(flatten)]
    pub instance: SecretInstanceRecord,
    pub k: u64,
}

impl SecretFile {
    pub fn new(si: &SecretInstance, k: &SecretKey) -> Self {
        SecretFile { instance: (*si).into(), k: k.value() }
    }

    pub fn open(&self) -> Result<(SecretInstance, SecretKey)> {
        let si = SecretInstance::try_from(self.instance)?;
        let k = SecretKey::new(self.k, si.instance())?;
        Ok((si, k))
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_secret(path: &Path) -> Result<(SecretInstance, SecretKey)> {
    read_json::<SecretFile>(path)?.open().with_context(|| format!("validating {}", path.display()))
}

pub fn read_public(path: &Path) -> Result<Instance> {
    let record: InstanceRecord = read_json(path)?;
    Instance::try_from(record).with_context(|| format!("validating {}", path.display()))
}

/// Reads up to `limit` records, naming the line of any malformed one.
pub fn read_samples(path: &Path, limit: Option<u64>) -> Result<Vec<SampleRecord>> {
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        if limit.is_some_and(|l| records.len() as u64 >= l) {
            break;
        }
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = SampleRecord::from_line(&line).with_context(|| format!("record {i} is malformed"))?;
        records.push(record);
    }
    Ok(records)
}

/// `num/den` or a finite decimal such as `0.1`, read exactly.
pub fn parse_fraction(s: &str) -> Result<Rational> {
    let s = s.trim();
    let Some((whole, frac)) = s.split_once('.') else {
        return Ok(parse_rational(s)?);
    };
    if s.contains('/') || !frac.chars().all(|c| c.is_ascii_digit()) {
        bail!("cannot read {s:?} as a fraction");
    }
    let digits = format!("{whole}{frac}");
    let den = format!("1{}", "0".repeat(frac.len()));
    Ok(parse_rational(&format!("{digits}/{den}"))?)
}
