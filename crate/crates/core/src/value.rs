//! Numeric literals with SPICE scale suffixes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ValueError;

/// A parsed numeric field. `raw` keeps the token as written so diagnostics
/// can echo it; equality only looks at the magnitude.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Value {
    pub magnitude: f64,
    pub raw: String,
}

impl Value {
    pub fn new(magnitude: f64) -> Self {
        Value {
            magnitude,
            raw: canonical_number(magnitude),
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.magnitude.to_bits() == other.magnitude.to_bits()
            || self.magnitude == other.magnitude
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&canonical_number(self.magnitude))
    }
}

/// Scale suffixes as decimal exponents. Order matters: `meg` must be tried
/// before `m`.
const SUFFIXES: &[(&str, i32)] = &[
    ("meg", 6),
    ("t", 12),
    ("g", 9),
    ("k", 3),
    ("m", -3),
    ("u", -6),
    ("n", -9),
    ("p", -12),
    ("f", -15),
];

/// Parse a SPICE number such as `20kOhm`, `1e-06` or `1.79V`.
///
/// The scale suffix is folded into the decimal exponent before conversion,
/// so `3.3333333333333335k` rounds exactly like the literal
/// `3333.3333333333335`.
pub fn parse_value(token: &str) -> Result<Value, ValueError> {
    let token = token.trim();
    if token.is_empty() {
        return Err(ValueError::Empty);
    }
    let bytes = token.as_bytes();
    let mut i = 0;
    if matches!(bytes[0], b'+' | b'-') {
        i += 1;
    }
    let int_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return Err(ValueError::NotNumeric(token.to_string()));
    }
    let mantissa = &token[..i];

    let mut exponent: i32 = 0;
    if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
        let mut j = i + 1;
        if j < bytes.len() && matches!(bytes[j], b'+' | b'-') {
            j += 1;
        }
        let exp_digits = j;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_digits {
            exponent = token[i + 1..j]
                .parse()
                .map_err(|_| ValueError::NotNumeric(token.to_string()))?;
            i = j;
        }
    }

    let tail = token[i..].to_ascii_lowercase();
    if !tail.chars().all(|c| c.is_ascii_alphabetic()) {
        return Err(ValueError::TrailingGarbage(token.to_string()));
    }
    let scale = SUFFIXES
        .iter()
        .find(|(s, _)| tail.starts_with(s))
        .map_or(0, |&(_, e)| e);

    let literal = format!("{mantissa}e{}", exponent + scale);
    let magnitude: f64 = literal
        .parse()
        .map_err(|_| ValueError::NotNumeric(token.to_string()))?;
    Ok(Value {
        magnitude,
        raw: token.to_string(),
    })
}

/// Shortest scientific rendering that parses back to the same bits.
pub fn canonical_number(x: f64) -> String {
    format!("{x:e}")
}
