//! Fixed-length bitstrings.
//!
//! A [`Bits`] value stores up to 64 bits. The leftmost character of the
//! textual form is the most significant bit, so `"10"` has integer value 2,
//! and bit index 0 is the first character.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MAX_BITS: u32 = 64;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Bits {
    value: u64,
    len: u32,
}

impl Bits {
    pub fn new(value: u64, len: u32) -> Result<Self> {
        if len > MAX_BITS {
            return Err(Error::invalid(format!("bit length {len} exceeds {MAX_BITS}")));
        }
        if len < MAX_BITS && value >> len != 0 {
            return Err(Error::invalid(format!("value {value} does not fit in {len} bits")));
        }
        Ok(Bits { value, len })
    }

    /// Builds a bitstring, truncating `value` to its low `len` bits.
    pub fn truncated(value: u64, len: u32) -> Self {
        assert!(len <= MAX_BITS);
        Bits { value: value & mask(len), len }
    }

    pub fn empty() -> Self {
        Bits { value: 0, len: 0 }
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn len(self) -> u32 {
        self.len
    }

    pub fn is_empty(self) -> bool {
        self.len == 0
    }

    /// The bit at position `index`, counting from the leftmost character.
    pub fn bit(self, index: u32) -> bool {
        assert!(index < self.len, "bit index {index} out of range for length {}", self.len);
        (self.value >> (self.len - 1 - index)) & 1 == 1
    }

    pub fn iter(self) -> impl Iterator<Item = bool> {
        (0..self.len).map(move |i| self.bit(i))
    }

    pub fn concat(self, tail: Bits) -> Result<Bits> {
        let len = self.len + tail.len;
        if len > MAX_BITS {
            return Err(Error::invalid(format!("concatenation of length {len} exceeds {MAX_BITS}")));
        }
        let head = if tail.len == MAX_BITS { 0 } else { self.value << tail.len };
        Ok(Bits { value: head | tail.value, len })
    }

    /// Splits into the first `at` bits and the remainder.
    pub fn split(self, at: u32) -> Result<(Bits, Bits)> {
        if at > self.len {
            return Err(Error::LengthMismatch { expected: at, got: self.len });
        }
        let tail_len = self.len - at;
        let head = if tail_len == MAX_BITS { 0 } else { self.value >> tail_len };
        Ok((Bits { value: head, len: at }, Bits { value: self.value & mask(tail_len), len: tail_len }))
    }

    /// All bitstrings of length `len` in increasing integer order.
    pub fn all(len: u32) -> impl Iterator<Item = Bits> {
        assert!(len < MAX_BITS);
        (0..1u64 << len).map(move |value| Bits { value, len })
    }
}

fn mask(len: u32) -> u64 {
    if len >= MAX_BITS {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits(\"{self}\")")
    }
}

impl FromStr for Bits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() > MAX_BITS as usize {
            return Err(Error::Parse(format!("bitstring longer than {MAX_BITS} characters")));
        }
        let mut value = 0u64;
        for c in s.chars() {
            let bit = match c {
                '0' => 0,
                '1' => 1,
                other => return Err(Error::Parse(format!("invalid bit character {other:?}"))),
            };
            value = (value << 1) | bit;
        }
        Ok(Bits { value, len: s.len() as u32 })
    }
}

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
