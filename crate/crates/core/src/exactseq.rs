//! Exact rational sequences behind the parametrization recursions.
//!
//! Everything here is computed in reduced rationals (GMP `mpq`), so the
//! recursive definitions of `eta` and `mu` can be compared bit-for-bit
//! against their Bernoulli/Euler closed forms.

use std::fmt::Write as _;

use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a [`RationalSeq`] holds. Only used for labelling exports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeqKind {
    Eta,
    Mu,
    Bernoulli,
    Euler,
    Ck0,
    Dk0,
    Beta2k,
    Other,
}

impl SeqKind {
    pub fn name(self) -> &'static str {
        match self {
            SeqKind::Eta => "eta",
            SeqKind::Mu => "mu",
            SeqKind::Bernoulli => "bernoulli",
            SeqKind::Euler => "euler",
            SeqKind::Ck0 => "ck0",
            SeqKind::Dk0 => "dk0",
            SeqKind::Beta2k => "beta2k",
            SeqKind::Other => "other",
        }
    }
}

/// Finite prefix of an integer-indexed rational sequence; entry `k` is the
/// `k`-th element.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalSeq {
    kind: SeqKind,
    entries: Vec<Rational>,
}

impl RationalSeq {
    pub fn new(kind: SeqKind, entries: Vec<Rational>) -> Self {
        Self { kind, entries }
    }

    pub fn zeros(kind: SeqKind, order: usize) -> Self {
        Self::new(kind, vec![Rational::new(); order + 1])
    }

    pub fn kind(&self) -> SeqKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: SeqKind) -> Self {
        self.kind = kind;
        self
    }

    /// Highest stored index (`len - 1`).
    pub fn order(&self) -> usize {
        self.entries.len().saturating_sub(1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<&Rational> {
        self.entries.get(k)
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Rational> {
        self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Rational> {
        self.entries.iter()
    }

    /// Prefix up to and including index `order`.
    pub fn truncated(&self, order: usize) -> Self {
        let n = (order + 1).min(self.entries.len());
        Self::new(self.kind, self.entries[..n].to_vec())
    }

    pub fn scaled(&self, factor: &Rational) -> Self {
        Self::new(
            self.kind,
            self.entries
                .iter()
                .map(|x| Rational::from(x * factor))
                .collect(),
        )
    }

    /// CSV with header `k,numerator,denominator`.
    pub fn to_exact_csv(&self) -> String {
        let mut out = String::from("k,numerator,denominator\n");
        for (k, x) in self.entries.iter().enumerate() {
            let _ = writeln!(out, "{k},{},{}", x.numer(), x.denom());
        }
        out
    }

    /// CSV with header `k,value`, values in decimal with `digits`
    /// significant digits.
    pub fn to_decimal_csv(&self, digits: usize) -> String {
        let mut out = String::from("k,value\n");
        for (k, x) in self.entries.iter().enumerate() {
            let _ = writeln!(out, "{k},{}", rational_to_decimal(x, digits));
        }
        out
    }
}

impl std::ops::Index<usize> for RationalSeq {
    type Output = Rational;

    fn index(&self, k: usize) -> &Rational {
        &self.entries[k]
    }
}

/// `p/q` with the denominator always present (`2/1`, `-1/30`).
pub fn format_rational(x: &Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Accepts `p/q`, `p` or a finite decimal literal such as `-0.25`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational".into()));
    }
    if let Ok(r) = s.parse::<Rational>() {
        return Ok(r);
    }
    // decimal notation
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (mantissa, exp) = match body.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = body[pos + 1..]
                .parse()
                .map_err(|_| Error::Parse(format!("bad exponent in `{s}`")))?;
            (&body[..pos], e)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty()
        || !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(Error::Parse(format!("not a rational number: `{s}`")));
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: Integer = digits
        .parse()
        .map_err(|_| Error::Parse(format!("not a rational number: `{s}`")))?;
    let scale = exp - frac_part.len() as i32;
    let mut r = Rational::from(numer);
    if scale >= 0 {
        r *= Integer::from(Integer::u_pow_u(10, scale as u32));
    } else {
        r /= Integer::from(Integer::u_pow_u(10, (-scale) as u32));
    }
    if neg {
        r = -r;
    }
    Ok(r)
}

/// Decimal rendering with `digits` significant digits.
pub fn rational_to_decimal(x: &Rational, digits: usize) -> String {
    if *x == 0 {
        return "0".to_string();
    }
    let bits = (digits as f64 * std::f64::consts::LOG2_10).ceil() as u32 + 32;
    let f = Float::with_val(bits, x);
    f.to_string_radix(10, Some(digits.max(1)))
}

/// `0!, 1!, ..., n!` as big integers.
pub(crate) fn factorials(n: usize) -> Vec<Integer> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = Integer::from(1);
    out.push(acc.clone());
    for i in 1..=n {
        acc *= i as u32;
        out.push(acc.clone());
    }
    out
}

pub(crate) fn binomial(n: usize, k: usize) -> Integer {
    Integer::from(Integer::binomial_u(n as u32, k as u32))
}

fn sign(k: usize) -> i32 {
    if k.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// `(-1)^i / (4i)!` for `i = 0..=order`, shared by both recursions.
fn alternating_inverse_quartic_factorials(order: usize, fact: &[Integer]) -> Vec<Rational> {
    (0..=order)
        .map(|i| Rational::from((sign(i), fact[4 * i].clone())))
        .collect()
}

/// `eta_0 = 0`, `eta_k = -(-1)^k / (3 (4k-1)!) - sum_{i=1}^k eta_{k-i} (-1)^i / (4i)!`.
pub fn eta_recursive(order: usize) -> RationalSeq {
    let fact = factorials(4 * order + 3);
    let alt = alternating_inverse_quartic_factorials(order, &fact);
    let mut eta: Vec<Rational> = Vec::with_capacity(order + 1);
    eta.push(Rational::new());
    for k in 1..=order {
        let mut v = Rational::from((-sign(k), Integer::from(3 * &fact[4 * k - 1])));
        for i in 1..=k {
            v -= Rational::from(&eta[k - i] * &alt[i]);
        }
        eta.push(v);
    }
    RationalSeq::new(SeqKind::Eta, eta)
}

/// `mu_0 = 2`, `mu_k = 4^k / (4k)! - sum_{i=1}^k mu_{k-i} (-1)^i / (4i)!`.
pub fn mu_recursive(order: usize) -> RationalSeq {
    let fact = factorials(4 * order);
    let alt = alternating_inverse_quartic_factorials(order, &fact);
    let mut mu: Vec<Rational> = Vec::with_capacity(order + 1);
    mu.push(Rational::from(2));
    for k in 1..=order {
        let four_k = Integer::from(Integer::u_pow_u(4, k as u32));
        let mut v = Rational::from((four_k, fact[4 * k].clone()));
        for i in 1..=k {
            v -= Rational::from(&mu[k - i] * &alt[i]);
        }
        mu.push(v);
    }
    RationalSeq::new(SeqKind::Mu, mu)
}

/// Bernoulli numbers `B_0..=B_n`, first kind (`B_1 = -1/2`), from
/// `sum_{j=0}^{m} C(m+1, j) B_j = 0`.
pub fn bernoulli_numbers(max_index: usize) -> RationalSeq {
    let mut b: Vec<Rational> = Vec::with_capacity(max_index + 1);
    b.push(Rational::from(1));
    for m in 1..=max_index {
        // odd indices above 1 vanish
        if m > 1 && m % 2 == 1 {
            b.push(Rational::new());
            continue;
        }
        let mut acc = Rational::new();
        for (j, bj) in b.iter().enumerate() {
            if *bj != 0 {
                acc += Rational::from(bj * binomial(m + 1, j));
            }
        }
        b.push(-acc / Integer::from(m + 1));
    }
    RationalSeq::new(SeqKind::Bernoulli, b)
}

/// Even-index Euler numbers `E_0, E_2, ..., E_{2n}`; entry `j` of the
/// result is `E_{2j}`. Uses `sum_{j=0}^{n} C(2n, 2j) E_{2j} = 0`.
pub fn euler_numbers(half_max_index: usize) -> RationalSeq {
    let mut e: Vec<Rational> = Vec::with_capacity(half_max_index + 1);
    e.push(Rational::from(1));
    for n in 1..=half_max_index {
        let mut acc = Rational::new();
        for (j, ej) in e.iter().enumerate() {
            acc += Rational::from(ej * binomial(2 * n, 2 * j));
        }
        e.push(-acc);
    }
    RationalSeq::new(SeqKind::Euler, e)
}

/// `eta_k = 4^{k+1} (1 - 16^k) B_{4k} / (6 (4k)!)`.
pub fn eta_closed_form(order: usize) -> RationalSeq {
    let bern = bernoulli_numbers(4 * order);
    let fact = factorials(4 * order);
    let entries = (0..=order)
        .map(|k| {
            let four_pow = Integer::from(Integer::u_pow_u(4, k as u32 + 1));
            let sixteen_pow = Integer::from(Integer::u_pow_u(16, k as u32));
            let numer = four_pow * (Integer::from(1) - sixteen_pow);
            let denom = Integer::from(6 * &fact[4 * k]);
            Rational::from((numer, denom)) * &bern[4 * k]
        })
        .collect();
    RationalSeq::new(SeqKind::Eta, entries)
}

/// `mu_k = 2 / (4^k (4k)!) * sum_{i=0}^{2k} (-1)^i E_{2i} C(4k, 2i)`.
pub fn mu_closed_form(order: usize) -> RationalSeq {
    let euler = euler_numbers(2 * order);
    let fact = factorials(4 * order);
    let entries = (0..=order)
        .map(|k| {
            let mut sum = Rational::new();
            for i in 0..=2 * k {
                let term = Rational::from(&euler[i] * binomial(4 * k, 2 * i));
                if i % 2 == 0 {
                    sum += term;
                } else {
                    sum -= term;
                }
            }
            let denom = Integer::from(Integer::u_pow_u(4, k as u32)) * &fact[4 * k];
            sum * Rational::from((2, denom))
        })
        .collect();
    RationalSeq::new(SeqKind::Mu, entries)
}

/// Discrete convolution `out_k = sum_{i=0}^{k} a_{k-i} b_i`.
pub fn convolve(a: &RationalSeq, b: &RationalSeq) -> Result<RationalSeq> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let entries = (0..a.len())
        .map(|k| {
            let mut acc = Rational::new();
            for i in 0..=k {
                if b[i] != 0 && a[k - i] != 0 {
                    acc += Rational::from(&a[k - i] * &b[i]);
                }
            }
            acc
        })
        .collect();
    Ok(RationalSeq::new(SeqKind::Other, entries))
}
