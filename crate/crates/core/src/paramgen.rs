//! Coefficient tables of formal differential parametrizations.
//!
//! A parametrization of order `K` is stored as the triangular arrays
//! `c[k][i]`, `d[k][i]` (`0 <= i <= k <= K`) of the spatial polynomials
//!
//! ```text
//! alpha_2k(z) = sum_i c[k][i] z^(4i+2) + d[k][i] z^(4i+3)
//! ```
//!
//! together with the input coefficients `beta2[k]`. The free design
//! parameter is the sequence `c[k][0]`; everything else follows from it.

use std::collections::BTreeMap;

use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactseq::{
    convolve, eta_recursive, factorials, format_rational, mu_recursive, parse_rational,
    RationalSeq, SeqKind,
};

/// The design sequence `c[k][0]`, `k = 0..=K`. Any values are admissible.
#[derive(Debug, Clone, PartialEq)]
pub struct Ck0Sequence(RationalSeq);

impl Ck0Sequence {
    pub fn new(values: Vec<Rational>) -> Self {
        Self(RationalSeq::new(SeqKind::Ck0, values))
    }

    pub fn order(&self) -> usize {
        self.0.order()
    }

    pub fn values(&self) -> &RationalSeq {
        &self.0
    }

    pub fn as_slice(&self) -> &[Rational] {
        self.0.entries()
    }
}

impl From<RationalSeq> for Ck0Sequence {
    fn from(seq: RationalSeq) -> Self {
        Self(seq.with_kind(SeqKind::Ck0))
    }
}

/// Polynomial in `z` with rational coefficients, keyed by power.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpatialPolynomial {
    coeffs: BTreeMap<u32, Rational>,
}

impl SpatialPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(power: u32, coeff: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(power, coeff);
        p
    }

    /// Adds `coeff * z^power`, dropping the entry if it cancels.
    pub fn add_term(&mut self, power: u32, coeff: Rational) {
        if coeff == 0 {
            return;
        }
        let entry = self.coeffs.entry(power).or_default();
        *entry += coeff;
        if *entry == 0 {
            self.coeffs.remove(&power);
        }
    }

    pub fn coeff(&self, power: u32) -> Rational {
        self.coeffs.get(&power).cloned().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, &Rational)> {
        self.coeffs.iter().map(|(p, c)| (*p, c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<u32> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn derivative(&self) -> Self {
        let mut out = Self::zero();
        for (&p, c) in &self.coeffs {
            if p > 0 {
                out.add_term(p - 1, Rational::from(c * p));
            }
        }
        out
    }

    pub fn nth_derivative(&self, n: u32) -> Self {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&p, c) in &other.coeffs {
            out.add_term(p, c.clone());
        }
        out
    }

    pub fn scaled(&self, factor: &Rational) -> Self {
        let mut out = Self::zero();
        for (&p, c) in &self.coeffs {
            out.add_term(p, Rational::from(c * factor));
        }
        out
    }

    pub fn eval(&self, z: &Rational) -> Rational {
        let mut acc = Rational::new();
        for (&p, c) in &self.coeffs {
            acc += c * Rational::from(z.pow(p as i32));
        }
        acc
    }

    /// Evaluation in big-float arithmetic at the precision of `z`.
    pub fn eval_float(&self, z: &Float) -> Float {
        let prec = z.prec();
        let mut acc = Float::with_val(prec, 0);
        for (&p, c) in &self.coeffs {
            let zp = Float::with_val(prec, z.pow(p));
            acc += Float::with_val(prec, c) * zp;
        }
        acc
    }

    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .coeffs
            .iter()
            .map(|(p, c)| (p.to_string(), serde_json::Value::String(format_rational(c))))
            .collect();
        serde_json::Value::Object(map)
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse("polynomial must be a JSON object".into()))?;
        let mut out = Self::zero();
        for (k, v) in obj {
            let p: u32 = k
                .parse()
                .map_err(|_| Error::Parse(format!("bad power `{k}`")))?;
            let s = v
                .as_str()
                .ok_or_else(|| Error::Parse(format!("coefficient of z^{p} must be a string")))?;
            out.add_term(p, parse_rational(s)?);
        }
        Ok(out)
    }
}

/// Triangular coefficient arrays plus `beta2`, all of order `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    c: Vec<Vec<Rational>>,
    d: Vec<Vec<Rational>>,
    beta2: RationalSeq,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    #[serde(rename = "K")]
    order: usize,
    c: Vec<Vec<String>>,
    d: Vec<Vec<String>>,
    beta2: Vec<String>,
}

impl CoefficientTable {
    /// Assembles a table from raw arrays, checking the triangular shape.
    pub fn from_parts(
        c: Vec<Vec<Rational>>,
        d: Vec<Vec<Rational>>,
        beta2: Vec<Rational>,
    ) -> Result<Self> {
        let n = beta2.len();
        if n == 0 {
            return Err(Error::Parse("empty coefficient table".into()));
        }
        if c.len() != n || d.len() != n {
            return Err(Error::Parse(format!(
                "table rows disagree: c has {}, d has {}, beta2 has {n}",
                c.len(),
                d.len()
            )));
        }
        for k in 0..n {
            if c[k].len() != k + 1 || d[k].len() != k + 1 {
                return Err(Error::Parse(format!("row {k} is not triangular")));
            }
        }
        Ok(Self {
            c,
            d,
            beta2: RationalSeq::new(SeqKind::Beta2k, beta2),
        })
    }

    pub fn order(&self) -> usize {
        self.beta2.order()
    }

    pub fn c(&self, k: usize, i: usize) -> &Rational {
        &self.c[k][i]
    }

    pub fn d(&self, k: usize, i: usize) -> &Rational {
        &self.d[k][i]
    }

    pub fn c_rows(&self) -> &[Vec<Rational>] {
        &self.c
    }

    pub fn d_rows(&self) -> &[Vec<Rational>] {
        &self.d
    }

    pub fn beta2(&self) -> &RationalSeq {
        &self.beta2
    }

    pub fn c_mut(&mut self, k: usize, i: usize) -> &mut Rational {
        &mut self.c[k][i]
    }

    pub fn d_mut(&mut self, k: usize, i: usize) -> &mut Rational {
        &mut self.d[k][i]
    }

    pub fn d_k0(&self) -> RationalSeq {
        RationalSeq::new(
            SeqKind::Dk0,
            self.d.iter().map(|row| row[0].clone()).collect(),
        )
    }

    /// Prefix of order `order` (rows `0..=order`).
    pub fn truncated(&self, order: usize) -> Self {
        let n = (order + 1).min(self.c.len());
        Self {
            c: self.c[..n].to_vec(),
            d: self.d[..n].to_vec(),
            beta2: self.beta2.truncated(order),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let fmt_rows = |rows: &[Vec<Rational>]| -> Vec<Vec<String>> {
            rows.iter()
                .map(|r| r.iter().map(format_rational).collect())
                .collect()
        };
        let json = TableJson {
            order: self.order(),
            c: fmt_rows(&self.c),
            d: fmt_rows(&self.d),
            beta2: self.beta2.iter().map(format_rational).collect(),
        };
        serde_json::to_value(json).expect("table serializes")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("table serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: TableJson =
            serde_json::from_str(s).map_err(|e| Error::Parse(format!("table JSON: {e}")))?;
        let parse_rows = |rows: Vec<Vec<String>>| -> Result<Vec<Vec<Rational>>> {
            rows.iter()
                .map(|r| r.iter().map(|s| parse_rational(s)).collect())
                .collect()
        };
        let beta2 = raw
            .beta2
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>>>()?;
        let table = Self::from_parts(parse_rows(raw.c)?, parse_rows(raw.d)?, beta2)?;
        if table.order() != raw.order {
            return Err(Error::Parse(format!(
                "declared K = {} but arrays have order {}",
                raw.order,
                table.order()
            )));
        }
        Ok(table)
    }
}

/// `c[k][i] = (-1)^i 2!/(4i+2)! c[k-i][0]` and
/// `d[k][i] = (-1)^i 3!/(4i+3)! d[k-i][0]`.
fn expand_rows(ck0: &[Rational], dk0: &[Rational]) -> (Vec<Vec<Rational>>, Vec<Vec<Rational>>) {
    let order = ck0.len() - 1;
    let fact = factorials(4 * order + 3);
    let c_scale: Vec<Rational> = (0..=order)
        .map(|i| Rational::from((if i % 2 == 0 { 2 } else { -2 }, fact[4 * i + 2].clone())))
        .collect();
    let d_scale: Vec<Rational> = (0..=order)
        .map(|i| Rational::from((if i % 2 == 0 { 6 } else { -6 }, fact[4 * i + 3].clone())))
        .collect();
    let c = (0..=order)
        .map(|k| {
            (0..=k)
                .map(|i| Rational::from(&c_scale[i] * &ck0[k - i]))
                .collect()
        })
        .collect();
    let d = (0..=order)
        .map(|k| {
            (0..=k)
                .map(|i| Rational::from(&d_scale[i] * &dk0[k - i]))
                .collect()
        })
        .collect();
    (c, d)
}

/// Builds the full table from `c[k][0]`: `d[k][0]` and `beta2[k]` come from
/// convolving with the `eta` and `mu` sequences.
pub fn build_parametrization(seq: &Ck0Sequence) -> CoefficientTable {
    let order = seq.order();
    let eta = eta_recursive(order);
    let mu = mu_recursive(order);
    let dk0 = convolve(&eta, seq.values()).expect("equal lengths");
    let beta2 = convolve(&mu, seq.values()).expect("equal lengths");
    let (c, d) = expand_rows(seq.as_slice(), dk0.entries());
    CoefficientTable {
        c,
        d,
        beta2: beta2.with_kind(SeqKind::Beta2k),
    }
}

/// Level-by-level construction driven by `beta2`, obtained by integrating
/// `-alpha_2(k-1)` four times and fitting the free-end conditions. Shares
/// nothing with [`build_parametrization`] beyond rational arithmetic.
pub fn recursion_oracle(beta2: &RationalSeq) -> CoefficientTable {
    let order = beta2.order();
    let mut c: Vec<Vec<Rational>> = Vec::with_capacity(order + 1);
    let mut d: Vec<Vec<Rational>> = Vec::with_capacity(order + 1);
    c.push(vec![Rational::from(&beta2[0] / 2u32)]);
    d.push(vec![Rational::new()]);
    for k in 1..=order {
        let (cp, dp) = (&c[k - 1], &d[k - 1]);
        let mut sum_c = Rational::new();
        let mut sum_d = Rational::new();
        for i in 0..k {
            let m = 4 * i as u32;
            sum_c += Rational::from(&cp[i] / (m + 4)) + Rational::from(&dp[i] / (m + 5));
            sum_d += Rational::from(&cp[i] / (m + 3)) + Rational::from(&dp[i] / (m + 4));
        }
        let ck0 = (&beta2[k] - sum_c) / 2u32;
        let dk0 = sum_d / 6u32;
        let mut crow = vec![ck0];
        let mut drow = vec![dk0];
        for i in 1..=k {
            let m = 4 * i as u32;
            // (4i-2)!/(4i+2)! and (4i-1)!/(4i+3)!
            let c_ratio = Integer::from(m - 1) * (m) * (m + 1) * (m + 2);
            let d_ratio = Integer::from(m) * (m + 1) * (m + 2) * (m + 3);
            crow.push(-Rational::from(&cp[i - 1] / &c_ratio));
            drow.push(-Rational::from(&dp[i - 1] / &d_ratio));
        }
        c.push(crow);
        d.push(drow);
    }
    CoefficientTable {
        c,
        d,
        beta2: beta2.clone().with_kind(SeqKind::Beta2k),
    }
}

/// `c[k][0] = (-1)^k c00 / (4k)!`, the choice that yields the flat series.
pub fn flat_choice(c00: &Rational, order: usize) -> Ck0Sequence {
    let fact = factorials(4 * order);
    Ck0Sequence::new(
        (0..=order)
            .map(|k| {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                c00 * Rational::from((sign, fact[4 * k].clone()))
            })
            .collect(),
    )
}

/// `(1/2, 0, 0, ...)`: the parametrizing output becomes the bending moment
/// at the clamped end.
pub fn bending_moment_choice(order: usize) -> Ck0Sequence {
    let mut v = vec![Rational::new(); order + 1];
    v[0] = Rational::from((1, 2));
    Ck0Sequence::new(v)
}

/// The `z^2` coefficients of all `alpha_2k`.
pub fn extract_ck0(table: &CoefficientTable) -> Ck0Sequence {
    Ck0Sequence::new(table.c.iter().map(|row| row[0].clone()).collect())
}

pub fn alpha_polynomial(table: &CoefficientTable, k: usize) -> Result<SpatialPolynomial> {
    if k > table.order() {
        return Err(Error::IndexOutOfRange {
            index: k,
            order: table.order(),
        });
    }
    let mut p = SpatialPolynomial::zero();
    for i in 0..=k {
        let base = 4 * i as u32;
        p.add_term(base + 2, table.c[k][i].clone());
        p.add_term(base + 3, table.d[k][i].clone());
    }
    Ok(p)
}

/// Exact residuals of one level of the boundary value problem chain.
#[derive(Debug, Clone)]
pub struct LevelResidual {
    pub k: usize,
    /// `alpha_2k'''' + alpha_2(k-1)` (just `alpha_0''''` at level 0).
    pub ode: SpatialPolynomial,
    pub deflection_at_clamp: Rational,
    pub slope_at_clamp: Rational,
    /// `alpha_2k''(1) - beta2[k]`.
    pub moment_at_tip: Rational,
    pub shear_at_tip: Rational,
    /// `d[k][k]`, which must vanish.
    pub top_odd_coefficient: Rational,
}

impl LevelResidual {
    pub fn is_zero(&self) -> bool {
        self.ode.is_zero()
            && self.deflection_at_clamp == 0
            && self.slope_at_clamp == 0
            && self.moment_at_tip == 0
            && self.shear_at_tip == 0
            && self.top_odd_coefficient == 0
    }
}

#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub levels: Vec<LevelResidual>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.levels.iter().all(LevelResidual::is_zero)
    }

    pub fn failing_levels(&self) -> Vec<usize> {
        self.levels
            .iter()
            .filter(|l| !l.is_zero())
            .map(|l| l.k)
            .collect()
    }

    pub fn summary(&self) -> String {
        if self.passed() {
            format!(
                "all residuals zero ({} levels, K = {})",
                self.levels.len(),
                self.levels.len().saturating_sub(1)
            )
        } else {
            let mut s = String::from("nonzero residuals at levels");
            for k in self.failing_levels() {
                s.push_str(&format!(" {k}"));
            }
            s
        }
    }
}

/// Checks every level of the BVP chain exactly: the ODE
/// `alpha_2k'''' = -alpha_2(k-1)`, clamped conditions at `z = 0`, and
/// moment/shear conditions at `z = 1`. Failures are reported, not raised.
pub fn verify_formal_solution(table: &CoefficientTable) -> VerificationReport {
    let one = Rational::from(1);
    let zero = Rational::new();
    let mut levels = Vec::with_capacity(table.order() + 1);
    let mut previous: Option<SpatialPolynomial> = None;
    for k in 0..=table.order() {
        let alpha = alpha_polynomial(table, k).expect("index in range");
        let d1 = alpha.derivative();
        let d2 = d1.derivative();
        let d3 = d2.derivative();
        let d4 = d3.derivative();
        let ode = match &previous {
            Some(prev) => d4.add(prev),
            None => d4,
        };
        levels.push(LevelResidual {
            k,
            ode,
            deflection_at_clamp: alpha.eval(&zero),
            slope_at_clamp: d1.eval(&zero),
            moment_at_tip: d2.eval(&one) - &table.beta2[k],
            shear_at_tip: d3.eval(&one),
            top_odd_coefficient: table.d[k][k].clone(),
        });
        previous = Some(alpha);
    }
    VerificationReport { levels }
}

/// One table entry compared against the two published closed forms for the
/// flat choice.
#[derive(Debug, Clone)]
pub struct FlatEntryComparison {
    pub array: char,
    pub k: usize,
    pub i: usize,
    pub recursion: Rational,
    /// Per-coefficient closed form with factors 4 and -16 times `c00`.
    pub printed_closed_form: Rational,
    /// Series form with factors 4 and -16 at `c00 = 2`, rescaled to `c00`.
    pub printed_series: Rational,
}

impl FlatEntryComparison {
    /// `printed_closed_form / recursion`, undefined when both vanish.
    pub fn closed_form_ratio(&self) -> Option<Rational> {
        if self.recursion == 0 {
            None
        } else {
            Some(Rational::from(&self.printed_closed_form / &self.recursion))
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlatClosedFormReport {
    pub c00: Rational,
    pub entries: Vec<FlatEntryComparison>,
    /// `(recursion, series form)` for `beta2[k]`.
    pub beta2: Vec<(Rational, Rational)>,
}

impl FlatClosedFormReport {
    pub fn series_form_matches(&self) -> bool {
        self.entries.iter().all(|e| e.recursion == e.printed_series)
            && self.beta2.iter().all(|(a, b)| a == b)
    }

    /// The common ratio printed/recursion if it is the same for every
    /// nonzero entry.
    pub fn uniform_closed_form_ratio(&self) -> Option<Rational> {
        let mut ratios = self.entries.iter().filter_map(|e| e.closed_form_ratio());
        let first = ratios.next()?;
        ratios.all(|r| r == first).then_some(first)
    }

    pub fn closed_form_matches(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.recursion == e.printed_closed_form)
    }

    pub fn summary(&self) -> String {
        let ratio = match self.uniform_closed_form_ratio() {
            Some(r) => format_rational(&r),
            None => "non-uniform".to_string(),
        };
        format!(
            "series form {}; per-coefficient closed form {} (printed/recursion = {ratio})",
            if self.series_form_matches() {
                "matches"
            } else {
                "differs"
            },
            if self.closed_form_matches() {
                "matches"
            } else {
                "differs"
            },
        )
    }
}

/// Compares the recursion-built flat table with the per-coefficient closed
/// forms (`4 (-1)^k c00 / ...`, `-16 (-1)^k (k-i) c00 / ...`) and with the
/// series form stated for `c00 = 2`.
pub fn flat_closed_form_check(c00: &Rational, order: usize) -> FlatClosedFormReport {
    let table = build_parametrization(&flat_choice(c00, order));
    let fact = factorials(4 * order + 3);
    let half_c00 = Rational::from(c00 / 2u32);
    let mut entries = Vec::new();
    for k in 0..=order {
        let sign = if k % 2 == 0 { 1 } else { -1 };
        for i in 0..=k {
            let c_den = Integer::from(&fact[4 * i + 2] * &fact[4 * (k - i)]);
            let d_den = Integer::from(&fact[4 * i + 3] * &fact[4 * (k - i)]);
            let c_form = Rational::from((4 * sign, c_den));
            let d_form = Rational::from((-16 * sign * (k - i) as i32, d_den));
            entries.push(FlatEntryComparison {
                array: 'c',
                k,
                i,
                recursion: table.c[k][i].clone(),
                printed_closed_form: Rational::from(&c_form * c00),
                printed_series: Rational::from(&c_form * &half_c00),
            });
            entries.push(FlatEntryComparison {
                array: 'd',
                k,
                i,
                recursion: table.d[k][i].clone(),
                printed_closed_form: Rational::from(&d_form * c00),
                printed_series: Rational::from(&d_form * &half_c00),
            });
        }
    }
    let beta2 = (0..=order)
        .map(|k| {
            let series = if k == 0 {
                Rational::from(4)
            } else {
                Rational::from((
                    Integer::from(2) * Integer::from(Integer::u_pow_u(4, k as u32)),
                    fact[4 * k].clone(),
                ))
            };
            (table.beta2[k].clone(), series * &half_c00)
        })
        .collect();
    FlatClosedFormReport {
        c00: c00.clone(),
        entries,
        beta2,
    }
}

/// Equilibrium deflection `alpha_0(z) * ybar = c00 * ybar * z^2`.
pub fn steady_state_profile(table: &CoefficientTable, ybar: &Rational) -> SpatialPolynomial {
    SpatialPolynomial::monomial(2, Rational::from(&table.c[0][0] * ybar))
}

/// Which of the two built-in choices a table corresponds to, if any.
#[derive(Debug, Clone, PartialEq)]
pub enum TableKind {
    Flat { c00: Rational },
    BendingMoment,
    General,
}

pub fn classify(table: &CoefficientTable) -> TableKind {
    let ck0 = extract_ck0(table);
    if ck0 == bending_moment_choice(table.order()) {
        return TableKind::BendingMoment;
    }
    let c00 = ck0.as_slice()[0].clone();
    if c00 != 0 && ck0 == flat_choice(&c00, table.order()) {
        return TableKind::Flat { c00 };
    }
    TableKind::General
}

/// Scale factors mapping a physical beam `mu w_tt = -EI w_zzzz` on
/// `[0, L]` to the normalized one: `z_n = space * z`, `t_n = time * t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalScaling {
    pub space: f64,
    pub time: f64,
}

impl PhysicalScaling {
    pub fn normalized_time(&self, t: f64) -> f64 {
        t * self.time
    }

    pub fn physical_time(&self, t_normalized: f64) -> f64 {
        t_normalized / self.time
    }
}

pub fn normalize_physical(
    mass_density: f64,
    flexural_rigidity: f64,
    length: f64,
) -> Result<PhysicalScaling> {
    for (name, v) in [
        ("mass_density", mass_density),
        ("flexural_rigidity", flexural_rigidity),
        ("length", length),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(name, format!("must be positive, got {v}")));
        }
    }
    Ok(PhysicalScaling {
        space: 1.0 / length,
        time: (flexural_rigidity / mass_density).sqrt() / (length * length),
    })
}
