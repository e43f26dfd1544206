//! Continued fractions, 128-bit fixed-point circle arithmetic and the
//! Diophantine type of rotation angles.
//!
//! The type `nu` of an irrational `alpha` is the supremum of the exponents
//! `beta` for which `j^beta * ||j alpha||` has liminf zero. Along convergent
//! denominators `||q_k alpha|| ~ 1 / q_{k+1}`, so the type is computed as the
//! limsup of `log q_{k+1} / log q_k`; [`type_bruteforce_oracle`] scans
//! `j^beta * ||j alpha||` directly and is kept independent of that route.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_POW_128: f64 = 340_282_366_920_938_463_463_374_607_431_768_211_456.0;

/// A point of `[0, 1)` with 128 fractional bits.
///
/// Addition and integer multiples wrap modulo one, so rotation orbits are
/// exact: `n` additions of `a` equal `n * a` bit for bit.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Fixed(pub u128);

/// Rotation angles are plain fixed-point values.
pub type FixedPointAngle = Fixed;

impl Fixed {
    pub const ZERO: Fixed = Fixed(0);
    pub const HALF: Fixed = Fixed(1 << 127);

    /// `2^-k`, for `1 <= k <= 128`.
    pub fn dyadic(k: u32) -> Fixed {
        assert!((1..=128).contains(&k), "dyadic exponent {k} out of range");
        Fixed(1u128 << (128 - k))
    }

    /// Exact binary expansion of a double in `[0, 1)`.
    ///
    /// Values below `2^-75` lose their trailing bits; everything else is
    /// represented without rounding.
    pub fn from_f64(x: f64) -> Result<Fixed> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::OutOfUnitInterval(x));
        }
        if x == 0.0 {
            return Ok(Fixed::ZERO);
        }
        let bits = x.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        let (mantissa, e) = if exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), exp - 1075)
        };
        // x = mantissa * 2^e, value = mantissa * 2^(e + 128)
        let shift = e + 128;
        let m = mantissa as u128;
        let v = if shift >= 0 {
            m << shift
        } else if shift > -128 {
            m >> (-shift)
        } else {
            0
        };
        Ok(Fixed(v))
    }

    /// Truncates to 53 significant fractional bits, so the result stays in `[0, 1)`.
    pub fn to_f64(self) -> f64 {
        // keep 53 significant bits, truncating, so the result stays below one
        let shift = (128 - self.0.leading_zeros()).saturating_sub(53);
        (self.0 >> shift) as f64 * (shift as f64 - 128.0).exp2()
    }

    pub fn add(self, other: Fixed) -> Fixed {
        Fixed(self.0.wrapping_add(other.0))
    }

    pub fn sub(self, other: Fixed) -> Fixed {
        Fixed(self.0.wrapping_sub(other.0))
    }

    /// `n * self mod 1`.
    pub fn mul_int(self, n: u64) -> Fixed {
        Fixed(self.0.wrapping_mul(n as u128))
    }

    /// Distance to the nearest integer, `||x||`.
    pub fn circle_norm(self) -> u128 {
        self.0.min(self.0.wrapping_neg())
    }

    /// Exact rational `num / den` reduced modulo one, rounded down.
    pub fn from_ratio(num: &BigUint, den: &BigUint) -> Fixed {
        assert!(!den.is_zero(), "zero denominator");
        let r = num % den;
        let scaled: BigUint = (r << 128u32) / den;
        Fixed(scaled.to_u128().expect("fraction below one fits 128 bits"))
    }

    pub fn as_big(self) -> BigUint {
        BigUint::from(self.0)
    }
}

impl fmt::Debug for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fixed({:.17} / {:#034x})", self.to_f64(), self.0)
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.17}", self.to_f64())
    }
}

/// Converts a fixed-point distance (value times `2^128`) to a double.
pub fn fixed_len_to_f64(v: u128) -> f64 {
    v as f64 / TWO_POW_128
}

/// How partial quotients are produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TermRule {
    /// Every term equals the constant (1 gives the golden mean, 2 the silver mean).
    Constant(u64),
    /// `a_1 = first`, then `a_{k+1} = round(q_k^(exponent - 1))`, which makes
    /// `log q_{k+1} / log q_k` tend to `exponent`.
    Power { exponent: f64, first: u64 },
    /// A finite list.
    Explicit(Vec<u64>),
}

/// `[0; a_1, a_2, ...]` with terms produced by a [`TermRule`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuedFraction {
    pub rule: TermRule,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Convergent {
    pub p: BigUint,
    pub q: BigUint,
    pub k: usize,
}

impl ContinuedFraction {
    pub fn golden() -> Self {
        ContinuedFraction {
            rule: TermRule::Constant(1),
        }
    }

    pub fn silver() -> Self {
        ContinuedFraction {
            rule: TermRule::Constant(2),
        }
    }

    /// Angle of type `exponent` built from `a_{k+1} = round(q_k^(exponent-1))`.
    pub fn power(exponent: f64) -> Self {
        ContinuedFraction {
            rule: TermRule::Power { exponent, first: 1 },
        }
    }

    pub fn explicit(terms: Vec<u64>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter(
                "continued fraction needs at least one term".into(),
            ));
        }
        if terms.iter().any(|&a| a == 0) {
            return Err(Error::InvalidParameter(
                "continued fraction terms must be >= 1".into(),
            ));
        }
        Ok(ContinuedFraction {
            rule: TermRule::Explicit(terms),
        })
    }

    /// Number of available terms, `None` for infinite rules.
    pub fn available(&self) -> Option<usize> {
        match &self.rule {
            TermRule::Explicit(t) => Some(t.len()),
            _ => None,
        }
    }

    fn check_depth(&self, depth: usize) -> Result<()> {
        if depth == 0 {
            return Err(Error::InvalidParameter("depth must be >= 1".into()));
        }
        if let Some(n) = self.available() {
            if depth > n {
                return Err(Error::DepthUnavailable {
                    requested: depth,
                    available: n,
                });
            }
        }
        if let TermRule::Power { exponent, first } = &self.rule {
            if !(*exponent >= 1.0) || *first == 0 {
                return Err(Error::InvalidParameter(format!(
                    "power rule needs exponent >= 1 and first term >= 1, got {exponent}, {first}"
                )));
            }
        }
        if let TermRule::Constant(0) = self.rule {
            return Err(Error::InvalidParameter("constant term must be >= 1".into()));
        }
        Ok(())
    }

    /// The first `depth` partial quotients.
    pub fn terms(&self, depth: usize) -> Result<Vec<BigUint>> {
        Ok(self.walk(depth)?.0)
    }

    /// Terms and convergents in one pass; the power rule needs `q_k` to
    /// produce `a_{k+1}`.
    fn walk(&self, depth: usize) -> Result<(Vec<BigUint>, Vec<Convergent>)> {
        self.check_depth(depth)?;
        let mut terms = Vec::with_capacity(depth);
        let mut convs = Vec::with_capacity(depth);
        let (mut p_prev, mut p) = (BigUint::one(), BigUint::zero());
        let (mut q_prev, mut q) = (BigUint::zero(), BigUint::one());
        for k in 1..=depth {
            let a = match &self.rule {
                TermRule::Constant(c) => BigUint::from(*c),
                TermRule::Explicit(t) => BigUint::from(t[k - 1]),
                TermRule::Power { exponent, first } => {
                    if k == 1 {
                        BigUint::from(*first)
                    } else {
                        power_term(&q, exponent - 1.0)
                    }
                }
            };
            let p_next = &a * &p + &p_prev;
            let q_next = &a * &q + &q_prev;
            p_prev = std::mem::replace(&mut p, p_next);
            q_prev = std::mem::replace(&mut q, q_next);
            terms.push(a);
            convs.push(Convergent {
                p: p.clone(),
                q: q.clone(),
                k,
            });
        }
        Ok((terms, convs))
    }

    /// Smallest depth whose convergent pins the value below `2^-136`, i.e. well
    /// under the fixed-point resolution. Finite fractions return their length.
    pub fn auto_depth(&self) -> Result<usize> {
        if let Some(n) = self.available() {
            return Ok(n);
        }
        let mut depth = 4;
        loop {
            let convs = convergents(self, depth)?;
            let q = &convs.last().unwrap().q;
            // |alpha - p/q| < 1/q^2
            if q.bits() >= 68 {
                return Ok(depth);
            }
            depth += 4;
            if depth > 4096 {
                return Err(Error::InvalidParameter(
                    "continued fraction converges too slowly".into(),
                ));
            }
        }
    }

    /// The angle at [`auto_depth`](Self::auto_depth).
    pub fn angle(&self) -> Result<FixedPointAngle> {
        cf_value(self, self.auto_depth()?)
    }
}

/// `round(q^e)` for a possibly huge `q`; at least one.
fn power_term(q: &BigUint, e: f64) -> BigUint {
    if e == 0.0 {
        return BigUint::one();
    }
    if e.fract() == 0.0 && e <= 64.0 {
        let v = q.pow(e as u32);
        return if v.is_zero() { BigUint::one() } else { v };
    }
    let log2 = log2_big(q) * e;
    if log2 < 52.0 {
        let v = log2.exp2().round().max(1.0);
        return BigUint::from(v as u64);
    }
    let whole = log2.floor();
    let mant = ((log2 - whole).exp2() * (1u64 << 52) as f64).round() as u64;
    BigUint::from(mant) << (whole as u64 - 52)
}

/// `log2` of a big integer, accurate to double precision.
pub fn log2_big(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits <= 64 {
        return (v.to_u64().unwrap() as f64).log2();
    }
    let shift = bits - 64;
    let top = (v >> shift).to_u64().unwrap();
    (top as f64).log2() + shift as f64
}

/// Value of `[0; a_1, ..., a_depth]` reduced modulo one.
///
/// Successive depths alternate below and above the limit.
pub fn cf_value(cf: &ContinuedFraction, depth: usize) -> Result<FixedPointAngle> {
    let convs = convergents(cf, depth)?;
    let last = convs.last().expect("depth >= 1");
    Ok(Fixed::from_ratio(&last.p, &last.q))
}

/// Convergents `p_k / q_k` for `k = 1..=depth`.
pub fn convergents(cf: &ContinuedFraction, depth: usize) -> Result<Vec<Convergent>> {
    let (_, convs) = cf.walk(depth)?;
    debug_assert!(convs.iter().all(|c| c.p.gcd(&c.q).is_one()));
    Ok(convs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrrationalType {
    pub nu: f64,
    /// Inclusive range of `k` over which the maximum was taken.
    pub window: (usize, usize),
    /// `(k, log q_{k+1} / log q_k)` for every `k` with `q_k > 1`.
    pub per_k_exponents: Vec<(usize, f64)>,
}

/// Diophantine type from convergent growth: the maximum of
/// `log q_{k+1} / log q_k` over the last half of the computed indices.
pub fn irrational_type(cf: &ContinuedFraction, depth: usize) -> Result<IrrationalType> {
    if depth < 4 {
        return Err(Error::InsufficientData(format!(
            "irrational type needs depth >= 4, got {depth}"
        )));
    }
    let convs = convergents(cf, depth)?;
    let per_k: Vec<(usize, f64)> = convs
        .windows(2)
        .filter(|w| w[0].q > BigUint::one())
        .map(|w| (w[0].k, log2_big(&w[1].q) / log2_big(&w[0].q)))
        .collect();
    if per_k.len() < 2 {
        return Err(Error::InsufficientData(
            "too few convergents with q > 1".into(),
        ));
    }
    let tail = &per_k[per_k.len() / 2..];
    let nu = tail.iter().map(|&(_, e)| e).fold(1.0f64, f64::max);
    Ok(IrrationalType {
        nu,
        window: (tail[0].0, tail[tail.len() - 1].0),
        per_k_exponents: per_k,
    })
}

/// Running minimum of `j^beta * ||j alpha||` over `1 <= j <= j_max`.
pub fn type_bruteforce_oracle(angle: FixedPointAngle, beta: f64, j_max: u64) -> f64 {
    scan_min(angle, beta, 1, j_max.max(1))
}

fn scan_min(angle: FixedPointAngle, beta: f64, j_from: u64, j_to: u64) -> f64 {
    let mut best = f64::INFINITY;
    let mut x = angle.mul_int(j_from);
    for j in j_from..=j_to {
        let v = (j as f64).powf(beta) * fixed_len_to_f64(x.circle_norm());
        if v < best {
            best = v;
        }
        x = x.add(angle);
    }
    best
}

/// Exponent at which `j^beta * ||j alpha||` stops dipping below one on the
/// tail `sqrt(j_max) <= j <= j_max`, located by bisection over `[lo, hi]`.
///
/// Below the threshold the scan keeps finding `||j alpha|| < j^-beta`, which
/// is the finite-range reading of the liminf vanishing.
pub fn type_threshold_bisect(angle: FixedPointAngle, j_max: u64, lo: f64, hi: f64) -> f64 {
    let j_from = ((j_max as f64).sqrt().ceil() as u64).max(1);
    // log(j) and log||j alpha|| are beta-independent; cache them.
    let mut logs = Vec::with_capacity((j_max - j_from + 1) as usize);
    let mut x = angle.mul_int(j_from);
    for j in j_from..=j_max {
        let n = fixed_len_to_f64(x.circle_norm());
        logs.push(((j as f64).ln(), if n > 0.0 { n.ln() } else { f64::NEG_INFINITY }));
        x = x.add(angle);
    }
    let vanishes = |beta: f64| logs.iter().any(|&(lj, ln)| beta * lj + ln < 0.0);
    let (mut lo, mut hi) = (lo, hi);
    if !vanishes(lo) {
        return lo;
    }
    if vanishes(hi) {
        return hi;
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if vanishes(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_and_half() {
        assert_eq!(Fixed::dyadic(1), Fixed::HALF);
        assert_eq!(Fixed::dyadic(3).to_f64(), 0.125);
    }

    #[test]
    fn from_f64_is_exact() {
        for &x in &[0.5, 0.3, 0.1, 1.0 / 3.0, 0.999_999_999, 1e-20] {
            let f = Fixed::from_f64(x).unwrap();
            assert_eq!(f.to_f64(), x, "{x}");
        }
        assert!(Fixed::from_f64(1.0).is_err());
        assert!(Fixed::from_f64(-0.1).is_err());
        assert!(Fixed::from_f64(f64::NAN).is_err());
    }

    #[test]
    fn to_f64_never_reaches_one() {
        assert!(Fixed(u128::MAX).to_f64() < 1.0);
        let v = Fixed(u128::MAX - 12345);
        assert!((1.0 - v.to_f64()) <= 2f64.powi(-52));
    }

    #[test]
    fn cf_value_small_cases() {
        let half = cf_value(&ContinuedFraction::explicit(vec![2]).unwrap(), 1).unwrap();
        assert_eq!(half, Fixed::HALF);
        let v = cf_value(&ContinuedFraction::explicit(vec![1, 2, 3]).unwrap(), 3).unwrap();
        // 7/10
        let exact = Fixed::from_ratio(&BigUint::from(7u32), &BigUint::from(10u32));
        assert_eq!(v, exact);
        assert!((v.to_f64() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn depth_beyond_terms_is_an_error() {
        let cf = ContinuedFraction::explicit(vec![1, 2]).unwrap();
        assert_eq!(
            cf_value(&cf, 3),
            Err(Error::DepthUnavailable {
                requested: 3,
                available: 2
            })
        );
    }

    #[test]
    fn convergent_examples() {
        let q: Vec<u64> = convergents(&ContinuedFraction::golden(), 5)
            .unwrap()
            .iter()
            .map(|c| c.q.to_u64().unwrap())
            .collect();
        assert_eq!(q, vec![1, 2, 3, 5, 8]);

        let c = convergents(&ContinuedFraction::explicit(vec![2, 2, 2]).unwrap(), 3).unwrap();
        let pq: Vec<(u64, u64)> = c
            .iter()
            .map(|c| (c.p.to_u64().unwrap(), c.q.to_u64().unwrap()))
            .collect();
        assert_eq!(pq, vec![(1, 2), (2, 5), (5, 12)]);

        let c = convergents(&ContinuedFraction::explicit(vec![7, 3]).unwrap(), 1).unwrap();
        assert_eq!(c[0].p, BigUint::one());
        assert_eq!(c[0].q, BigUint::from(7u32));
    }

    #[test]
    fn power_rule_growth() {
        let c = convergents(&ContinuedFraction::power(2.0), 7).unwrap();
        let q: Vec<u64> = c.iter().map(|c| c.q.to_u64().unwrap()).collect();
        assert_eq!(q, vec![1, 2, 5, 27, 734, 538_783, 290_287_121_823]);
    }

    #[test]
    fn irrational_type_needs_depth() {
        assert!(matches!(
            irrational_type(&ContinuedFraction::golden(), 3),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn irrational_type_values() {
        let t = irrational_type(&ContinuedFraction::power(2.0), 12).unwrap();
        assert!((t.nu - 2.0).abs() < 0.1, "{t:?}");
        let t = irrational_type(&ContinuedFraction::silver(), 30).unwrap();
        assert!(t.nu >= 1.0 && t.nu < 1.1, "{t:?}");
        // The convergent-ratio proxy approaches one like 1/k: at depth 30 the
        // tail starts at k = 16 and the maximum is log q17 / log q16 with
        // q_k = F_(k+1).
        let t = irrational_type(&ContinuedFraction::golden(), 30).unwrap();
        let frozen = (2584f64).ln() / (1597f64).ln();
        assert!((t.nu - frozen).abs() < 1e-12, "{t:?}");
        let t = irrational_type(&ContinuedFraction::golden(), 60).unwrap();
        assert!((t.nu - 1.0).abs() < 0.05, "{t:?}");
    }

    #[test]
    fn golden_convergent_error() {
        // |alpha - p_k/q_k| < 1/(q_k q_(k+1)); depth 80 stands in for the limit
        let limit = cf_value(&ContinuedFraction::golden(), 80).unwrap();
        let err = |d: usize| fixed_len_to_f64(cf_value(&ContinuedFraction::golden(), d).unwrap().sub(limit).circle_norm());
        let (q40, q41) = (165_580_141f64, 267_914_296f64);
        assert!(err(40) < 1.0 / (q40 * q41));
        assert!(err(40) > 2f64.powi(-60));
        assert!(err(60) < 2f64.powi(-70));
        assert!((limit.to_f64() - (5f64.sqrt() - 1.0) / 2.0).abs() < 3e-16);
    }

    #[test]
    fn golden_bruteforce_scan() {
        // independent double-precision scan; ||j phi|| is accurate to ~1e-11
        // here while the minimum sits near 7e-6
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut want = f64::INFINITY;
        for j in 1..=100_000u64 {
            let x = j as f64 * phi;
            want = want.min((j as f64).powf(0.9) * (x - x.round()).abs());
        }
        let got = type_bruteforce_oracle(ContinuedFraction::golden().angle().unwrap(), 0.9, 100_000);
        assert!((got - want).abs() < 1e-6 * want, "{got} vs {want}");
        // attained at q = 75025, about q^-0.1 / sqrt 5
        assert!((got - 0.1453).abs() < 1e-3, "{got}");
    }

    #[test]
    fn power_term_non_integer_exponent() {
        let q = BigUint::from(1u64) << 200u32;
        let a = power_term(&q, 0.5);
        assert_eq!(a, BigUint::from(1u64) << 100u32);
        assert_eq!(power_term(&BigUint::from(100u32), 0.5), BigUint::from(10u32));
    }
}
