//! Small helpers for the exact rational paths.
//!
//! Exact values use `Ratio<i64>` with checked arithmetic. Any overflow drops
//! the caller back to floating point, so every helper here returns `Option`.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, ToPrimitive};

pub type Exact = Ratio<i64>;

/// Largest integer magnitude that converts to `f64` without rounding.
const F64_EXACT_INT: i64 = 1 << 53;

pub fn to_f64(r: &Exact) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn checked_sum<'a, I>(items: I) -> Option<Exact>
where
    I: IntoIterator<Item = &'a Exact>,
{
    items
        .into_iter()
        .try_fold(Exact::from_integer(0), |acc, x| acc.checked_add(x))
}

pub fn checked_product(a: &Exact, b: &Exact) -> Option<Exact> {
    a.checked_mul(b)
}

/// Least common denominator of a set of ratios.
pub fn common_denominator<'a, I>(items: I) -> Option<i64>
where
    I: IntoIterator<Item = &'a Exact>,
{
    items.into_iter().try_fold(1i64, |acc, r| {
        let d = *r.denom();
        let g = acc.gcd(&d);
        (acc / g).checked_mul(d)
    })
}

/// `Σ wᵢ·uᵢ` evaluated as `(Σ nᵢ·uᵢ) / D` over the common denominator `D`.
///
/// With integer numerators this reproduces hand formulas such as
/// `(m·u₁ + (n−m)·u₂) / n` bit for bit.
pub fn weighted_sum(terms: &[(Exact, f64)]) -> Option<f64> {
    let denom = common_denominator(terms.iter().map(|(w, _)| w))?;
    if denom > F64_EXACT_INT {
        return None;
    }
    let mut acc = 0.0;
    for (w, u) in terms {
        let scaled = w.checked_mul(&Exact::from_integer(denom))?;
        let numer = scaled.to_integer();
        if numer.abs() > F64_EXACT_INT {
            return None;
        }
        acc += numer as f64 * u;
    }
    Some(acc / denom as f64)
}

/// The rational with denominator at most 10⁶ whose nearest `f64` is `x`,
/// if there is one. Decimal inputs such as `0.8` come back as `4/5`.
pub fn short_ratio(x: f64) -> Option<Exact> {
    if !x.is_finite() {
        return None;
    }
    let r = Exact::approximate_float(x)?;
    (*r.denom() <= 1_000_000 && to_f64(&r) == x).then_some(r)
}

/// Parses `"m/n"` or an integer literal.
pub fn parse_ratio(text: &str) -> Option<Exact> {
    let text = text.trim();
    match text.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().ok()?;
            let d: i64 = d.trim().parse().ok()?;
            (d != 0).then(|| Exact::new(n, d))
        }
        None => text.parse().ok().map(Exact::from_integer),
    }
}
