//! Unbiased pass@k: `1 - C(n-c, k) / C(n, k)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalStats {
    /// Attempts made.
    pub n: u64,
    /// Attempts that succeeded.
    pub c: u64,
    pub k: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("pass@k needs 0 <= c <= n, got c={c}, n={n}")]
    Correct { n: u64, c: u64 },
    #[error("pass@k needs 1 <= k <= n, got k={k}, n={n}")]
    K { n: u64, k: u64 },
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `C(n-c, k) / C(n, k)` as a reduced fraction, or `None` on overflow.
fn failure_ratio(n: u64, c: u64, k: u64) -> Option<(u128, u128)> {
    let (mut num, mut den) = (1u128, 1u128);
    for i in 0..k {
        let a = (n - c - i) as u128;
        let b = (n - i) as u128;
        num = num.checked_mul(a)?;
        den = den.checked_mul(b)?;
        let g = gcd(num, den).max(1);
        num /= g;
        den /= g;
    }
    Some((num, den))
}

pub fn pass_at_k(stats: EvalStats) -> Result<f64, DomainError> {
    let EvalStats { n, c, k } = stats;
    if c > n {
        return Err(DomainError::Correct { n, c });
    }
    if k == 0 || k > n {
        return Err(DomainError::K { n, k });
    }
    if n - c < k {
        return Ok(1.0);
    }
    if c == 0 {
        return Ok(0.0);
    }
    match failure_ratio(n, c, k) {
        // Exact while both parts fit in an f64 mantissa: one correctly rounded division.
        Some((num, den)) if den < 1u128 << 53 => Ok((den - num) as f64 / den as f64),
        _ => {
            let mut fail = 1.0;
            for i in (n - c + 1)..=n {
                fail *= 1.0 - k as f64 / i as f64;
            }
            Ok(1.0 - fail)
        }
    }
}
