use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Distance between two timestamp histories of equal length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Distance {
    /// Sum of absolute timestamp differences.
    #[serde(rename = "f1")]
    Manhattan,
    /// Manhattan distance divided by the history length.
    #[serde(rename = "f2")]
    Normalized,
}

impl Distance {
    pub fn label(self) -> &'static str {
        match self {
            Distance::Manhattan => "f1",
            Distance::Normalized => "f2",
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Association degree, kept as an exact non-negative rational.
///
/// Equality and ordering are by value, so 1/2 and 2/4 compare equal.
#[derive(Debug, Clone, Copy)]
pub struct Degree {
    num: u64,
    den: u64,
}

impl Degree {
    pub const ZERO: Degree = Degree { num: 0, den: 1 };
    /// Degree of two identical histories. Larger than any `len / d` with
    /// `d >= 1` and `len < 2^63`.
    pub const MAX: Degree = Degree {
        num: 1 << 63,
        den: 1,
    };

    /// # Panics
    ///
    /// Panics if `den` is zero.
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "degree denominator must be positive");
        Degree { num, den }
    }

    pub fn numer(self) -> u64 {
        self.num
    }

    pub fn denom(self) -> u64 {
        self.den
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Degree {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Degree {}

impl PartialOrd for Degree {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Degree {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = self.num as u128 * other.den as u128;
        let rhs = other.num as u128 * self.den as u128;
        lhs.cmp(&rhs)
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// How strongly `b` follows `a`.
///
/// Zero when the histories differ in length, are empty, or `b` started
/// before `a`; the measure is therefore directional. Otherwise the inverse
/// of the chosen distance, or [`Degree::MAX`] when the distance is zero.
pub fn association_degree(a: &[u64], b: &[u64], distance: Distance) -> Degree {
    if a.len() != b.len() || a.is_empty() || a[0] > b[0] {
        return Degree::ZERO;
    }
    let d = a
        .iter()
        .zip(b)
        .fold(0u64, |acc, (x, y)| acc.saturating_add(x.abs_diff(*y)));
    if d == 0 {
        return Degree::MAX;
    }
    match distance {
        Distance::Manhattan => Degree::new(1, d),
        Distance::Normalized => Degree::new(a.len() as u64, d),
    }
}
