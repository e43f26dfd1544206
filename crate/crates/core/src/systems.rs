//! Built-in dynamical systems: the map, its phase space and metric, and the
//! reference measure the theorems are stated for.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Fixed;

/// Number of ternary digits carried by a Cantor code.
pub const CANTOR_DEPTH: u32 = 60;

/// `floor(2 * 3^-i * 2^64)` for `i = 1..=CANTOR_DEPTH`, index `i - 1`.
static CANTOR_DIGIT_WEIGHTS: std::sync::OnceLock<[u64; CANTOR_DEPTH as usize]> =
    std::sync::OnceLock::new();

fn cantor_weights() -> &'static [u64; CANTOR_DEPTH as usize] {
    CANTOR_DIGIT_WEIGHTS.get_or_init(|| {
        let mut w = [0u64; CANTOR_DEPTH as usize];
        let mut pow3: u128 = 1;
        for slot in w.iter_mut() {
            pow3 *= 3;
            *slot = ((1u128 << 65) / pow3) as u64;
        }
        w
    })
}

/// Base-3 expansion with digits in `{0, 2}`; bit `i` set means digit `i + 1` is 2.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct CantorCode {
    pub digits: u64,
    /// `sum d_i 3^-i` as a 64-bit fraction, rounded down.
    pub value: u64,
}

impl CantorCode {
    pub fn from_digits(digits: u64) -> CantorCode {
        let digits = digits & ((1u64 << CANTOR_DEPTH) - 1);
        let w = cantor_weights();
        let mut value = 0u64;
        let mut d = digits;
        while d != 0 {
            let i = d.trailing_zeros() as usize;
            value += w[i];
            d &= d - 1;
        }
        CantorCode { digits, value }
    }

    /// Ternary digit `i` (1-based), either 0 or 2.
    pub fn digit(&self, i: u32) -> u8 {
        assert!((1..=CANTOR_DEPTH).contains(&i));
        if self.digits >> (i - 1) & 1 == 1 {
            2
        } else {
            0
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.value as f64 / 18_446_744_073_709_551_616.0
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Space {
    Circle,
    Torus,
    Interval,
    Cantor,
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Space::Circle => "circle",
            Space::Torus => "torus",
            Space::Interval => "interval",
            Space::Cantor => "cantor-code",
        };
        f.write_str(s)
    }
}

/// A phase-space point. Circle points carry 128 fractional bits, torus
/// coordinates 64 bits (the cat map is exact on that lattice), interval
/// points are doubles in `[0, 1]`.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub enum Point {
    Circle(Fixed),
    Torus(u64, u64),
    Interval(f64),
    Cantor(CantorCode),
}

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

fn u64_from_unit(x: f64) -> Result<u64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::OutOfUnitInterval(x));
    }
    Ok((Fixed::from_f64(x)?.0 >> 64) as u64)
}

impl Point {
    pub fn circle(x: f64) -> Result<Point> {
        Ok(Point::Circle(Fixed::from_f64(x)?))
    }

    pub fn torus(x: f64, y: f64) -> Result<Point> {
        Ok(Point::Torus(u64_from_unit(x)?, u64_from_unit(y)?))
    }

    pub fn interval(x: f64) -> Result<Point> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfUnitInterval(x));
        }
        Ok(Point::Interval(x))
    }

    pub fn space(&self) -> Space {
        match self {
            Point::Circle(_) => Space::Circle,
            Point::Torus(..) => Space::Torus,
            Point::Interval(_) => Space::Interval,
            Point::Cantor(_) => Space::Cantor,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Point::Torus(..) => 2,
            _ => 1,
        }
    }

    /// Coordinates as doubles.
    pub fn coords(&self) -> Vec<f64> {
        match *self {
            Point::Circle(f) => vec![f.to_f64()],
            Point::Torus(a, b) => vec![a as f64 / TWO_POW_64, b as f64 / TWO_POW_64],
            Point::Interval(x) => vec![x],
            Point::Cantor(c) => vec![c.to_f64()],
        }
    }

    /// Per-axis coordinate as a 128-bit fraction (interval `1.0` saturates).
    pub(crate) fn axis_fixed(&self, axis: usize) -> u128 {
        match *self {
            Point::Circle(f) => f.0,
            Point::Torus(a, b) => (if axis == 0 { a } else { b } as u128) << 64,
            Point::Interval(x) => unit_f64_to_fixed(x),
            Point::Cantor(c) => (c.value as u128) << 64,
        }
    }

    /// The position on the line for the interval metric.
    fn line_value(&self) -> Option<f64> {
        match *self {
            Point::Interval(x) => Some(x),
            Point::Cantor(c) => Some(c.to_f64()),
            _ => None,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Point::Circle(x) => write!(f, "{x}"),
            Point::Torus(a, b) => write!(
                f,
                "{:.17};{:.17}",
                a as f64 / TWO_POW_64,
                b as f64 / TWO_POW_64
            ),
            Point::Interval(x) => write!(f, "{x:.17}"),
            Point::Cantor(c) => write!(f, "{:.17}", c.to_f64()),
        }
    }
}

/// Fraction in `[0, 1]` to 128 fractional bits, saturating at one.
pub(crate) fn unit_f64_to_fixed(x: f64) -> u128 {
    if x >= 1.0 {
        u128::MAX
    } else if x <= 0.0 {
        0
    } else {
        Fixed::from_f64(x).map(|f| f.0).unwrap_or(u128::MAX)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Metric {
    /// `min(|a - b|, 1 - |a - b|)`.
    CircleWraparound,
    /// Maximum of the per-coordinate circle distances; balls are squares.
    TorusMax,
    /// `|a - b|` on `[0, 1]`.
    EuclideanInterval,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Metric::CircleWraparound => "circle_wraparound",
            Metric::TorusMax => "torus_max",
            Metric::EuclideanInterval => "euclidean_interval",
        };
        f.write_str(s)
    }
}

impl Metric {
    pub fn accepts(&self, s: Space) -> bool {
        matches!(
            (self, s),
            (Metric::CircleWraparound, Space::Circle)
                | (Metric::TorusMax, Space::Torus)
                | (Metric::EuclideanInterval, Space::Interval)
                | (Metric::EuclideanInterval, Space::Cantor)
        )
    }

    /// Whether balls wrap around the ends of each axis.
    pub fn wraps(&self) -> bool {
        !matches!(self, Metric::EuclideanInterval)
    }
}

/// Distance as a 128-bit fraction (`d * 2^128`, saturating at one).
///
/// Callers guarantee that both points belong to the metric's space.
#[inline]
pub fn dist_fixed(a: &Point, b: &Point) -> u128 {
    match (a, b) {
        (Point::Circle(x), Point::Circle(y)) => x.sub(*y).circle_norm(),
        (Point::Torus(x1, y1), Point::Torus(x2, y2)) => {
            let dx = x1.wrapping_sub(*x2);
            let dy = y1.wrapping_sub(*y2);
            let dx = dx.min(dx.wrapping_neg());
            let dy = dy.min(dy.wrapping_neg());
            (dx.max(dy) as u128) << 64
        }
        (Point::Cantor(x), Point::Cantor(y)) => (x.value.abs_diff(y.value) as u128) << 64,
        _ => match (a.line_value(), b.line_value()) {
            (Some(x), Some(y)) => unit_f64_to_fixed((x - y).abs()),
            _ => u128::MAX,
        },
    }
}

/// Checked distance in the given metric.
pub fn distance(m: Metric, a: &Point, b: &Point) -> Result<f64> {
    if !m.accepts(a.space()) || !m.accepts(b.space()) {
        return Err(Error::SpaceMismatch {
            metric: m.to_string(),
            left: a.space().to_string(),
            right: b.space().to_string(),
        });
    }
    Ok(crate::numerics::fixed_len_to_f64(dist_fixed(a, b)))
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arithmetic {
    FixedPoint,
    Double,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureTag {
    Lebesgue,
    Cantor,
    /// Density `1 / (pi sqrt(x (1 - x)))`, invariant for the logistic map at 4.
    ArcSine,
    Empirical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// `x -> x + angle mod 1`.
    Rotation { angle: Fixed },
    /// `x -> 2x mod 1`.
    Doubling,
    /// `x -> 4x(1 - x)`.
    Logistic,
    /// `(x, y) -> (2x + y, x + y) mod 1`.
    CatMap,
    /// `x -> 3x mod 1` on Cantor codes.
    CantorShift,
    /// `x -> target` for every `x`; Lebesgue measure is not invariant.
    Constant { target: Fixed },
    /// `x -> x^2` on `[0, 1]`, used for the Hölder clause.
    Square,
    /// An explicit sequence `x_0, x_1, ...` on the circle, cycled.
    Sequence { points: Vec<Fixed> },
}

/// A map, its metric, its reference measure and the arithmetic used for orbits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub kind: SystemKind,
    pub arithmetic: Arithmetic,
}

/// Doubles stay faithful for this many cat-map steps before the flag is raised.
pub const CAT_DOUBLE_SAFE_LEN: u64 = 10_000_000;
/// `2x mod 1` on a double runs out of mantissa after 53 steps.
pub const DOUBLING_DOUBLE_SAFE_LEN: u64 = 52;
/// Same for the logistic map iterated in doubles.
pub const LOGISTIC_DOUBLE_SAFE_LEN: u64 = 10_000_000;

impl SystemSpec {
    pub fn rotation(angle: Fixed) -> Self {
        SystemSpec {
            kind: SystemKind::Rotation { angle },
            arithmetic: Arithmetic::FixedPoint,
        }
    }

    pub fn doubling() -> Self {
        SystemSpec {
            kind: SystemKind::Doubling,
            arithmetic: Arithmetic::FixedPoint,
        }
    }

    pub fn logistic() -> Self {
        SystemSpec {
            kind: SystemKind::Logistic,
            arithmetic: Arithmetic::FixedPoint,
        }
    }

    pub fn cat_map() -> Self {
        SystemSpec {
            kind: SystemKind::CatMap,
            arithmetic: Arithmetic::FixedPoint,
        }
    }

    pub fn cantor_shift() -> Self {
        SystemSpec {
            kind: SystemKind::CantorShift,
            arithmetic: Arithmetic::FixedPoint,
        }
    }

    pub fn square() -> Self {
        SystemSpec {
            kind: SystemKind::Square,
            arithmetic: Arithmetic::Double,
        }
    }

    pub fn sequence(points: Vec<Fixed>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("sequence needs points".into()));
        }
        Ok(SystemSpec {
            kind: SystemKind::Sequence { points },
            arithmetic: Arithmetic::FixedPoint,
        })
    }

    pub fn with_arithmetic(mut self, arithmetic: Arithmetic) -> Result<Self> {
        let ok = match (&self.kind, arithmetic) {
            (_, Arithmetic::FixedPoint) => !matches!(self.kind, SystemKind::Square),
            (SystemKind::Doubling | SystemKind::CatMap | SystemKind::Logistic, _) => true,
            (SystemKind::Square, Arithmetic::Double) => true,
            _ => false,
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "system `{}` does not support {arithmetic:?} arithmetic",
                self.name()
            )));
        }
        self.arithmetic = arithmetic;
        Ok(self)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SystemKind::Rotation { .. } => "rotation",
            SystemKind::Doubling => "doubling",
            SystemKind::Logistic => "logistic",
            SystemKind::CatMap => "cat_map",
            SystemKind::CantorShift => "cantor_shift",
            SystemKind::Constant { .. } => "constant",
            SystemKind::Square => "square",
            SystemKind::Sequence { .. } => "sequence",
        }
    }

    pub fn space(&self) -> Space {
        match self.kind {
            SystemKind::Rotation { .. }
            | SystemKind::Doubling
            | SystemKind::Constant { .. }
            | SystemKind::Sequence { .. } => Space::Circle,
            SystemKind::CatMap => Space::Torus,
            SystemKind::Logistic | SystemKind::Square => Space::Interval,
            SystemKind::CantorShift => Space::Cantor,
        }
    }

    pub fn dim(&self) -> usize {
        if self.space() == Space::Torus {
            2
        } else {
            1
        }
    }

    pub fn metric(&self) -> Metric {
        match self.space() {
            Space::Circle => Metric::CircleWraparound,
            Space::Torus => Metric::TorusMax,
            Space::Interval | Space::Cantor => Metric::EuclideanInterval,
        }
    }

    pub fn measure(&self) -> MeasureTag {
        match self.kind {
            SystemKind::CantorShift => MeasureTag::Cantor,
            SystemKind::Logistic => MeasureTag::ArcSine,
            SystemKind::Sequence { .. } => MeasureTag::Empirical,
            _ => MeasureTag::Lebesgue,
        }
    }

    /// Whether the declared measure is invariant under the map.
    pub fn measure_is_invariant(&self) -> bool {
        !matches!(
            self.kind,
            SystemKind::Constant { .. } | SystemKind::Square | SystemKind::Sequence { .. }
        )
    }

    /// Whether the system is a map `T` (a sequence is not).
    pub fn is_map(&self) -> bool {
        !matches!(self.kind, SystemKind::Sequence { .. })
    }

    /// Orbit length beyond which double arithmetic is flagged.
    pub fn safe_length(&self) -> Option<u64> {
        match (self.arithmetic, &self.kind) {
            (Arithmetic::FixedPoint, _) => None,
            (Arithmetic::Double, SystemKind::CatMap) => Some(CAT_DOUBLE_SAFE_LEN),
            (Arithmetic::Double, SystemKind::Doubling) => Some(DOUBLING_DOUBLE_SAFE_LEN),
            (Arithmetic::Double, SystemKind::Logistic) => Some(LOGISTIC_DOUBLE_SAFE_LEN),
            (Arithmetic::Double, _) => None,
        }
    }

    /// Stable textual form, used for hashing.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("system spec serializes")
    }

    pub fn check_domain(&self, p: &Point) -> Result<()> {
        let ok = p.space() == self.space()
            && match *p {
                Point::Interval(x) => (0.0..=1.0).contains(&x),
                _ => true,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::DomainViolation {
                system: self.name().into(),
                point: format!("{p:?}"),
            })
        }
    }
}

/// `x -> 0.25` on the circle with Lebesgue measure.
pub fn noninvariant_counterexample() -> SystemSpec {
    SystemSpec {
        kind: SystemKind::Constant {
            target: Fixed::dyadic(2),
        },
        arithmetic: Arithmetic::FixedPoint,
    }
}

/// One application of the map.
pub fn step(sys: &SystemSpec, p: &Point) -> Result<Point> {
    sys.check_domain(p)?;
    Ok(match (&sys.kind, *p) {
        (SystemKind::Rotation { angle }, Point::Circle(x)) => Point::Circle(x.add(*angle)),
        (SystemKind::Doubling, Point::Circle(x)) => match sys.arithmetic {
            Arithmetic::FixedPoint => Point::Circle(Fixed(x.0 << 1)),
            Arithmetic::Double => Point::circle(doubling_f64(x.to_f64()))?,
        },
        (SystemKind::Logistic, Point::Interval(x)) => Point::Interval(4.0 * x * (1.0 - x)),
        (SystemKind::CatMap, Point::Torus(x, y)) => match sys.arithmetic {
            Arithmetic::FixedPoint => {
                let (a, b) = cat_u64(x, y);
                Point::Torus(a, b)
            }
            Arithmetic::Double => {
                let (a, b) = cat_f64(x as f64 / TWO_POW_64, y as f64 / TWO_POW_64);
                Point::torus(a, b)?
            }
        },
        (SystemKind::CantorShift, Point::Cantor(c)) => {
            Point::Cantor(CantorCode::from_digits(c.digits >> 1))
        }
        (SystemKind::Constant { target }, Point::Circle(_)) => Point::Circle(*target),
        (SystemKind::Square, Point::Interval(x)) => Point::Interval(x * x),
        (SystemKind::Sequence { .. }, _) => {
            return Err(Error::InvalidParameter(
                "a sequence has no map to step".into(),
            ))
        }
        _ => unreachable!("domain checked above"),
    })
}

#[inline]
fn doubling_f64(x: f64) -> f64 {
    let y = 2.0 * x;
    if y >= 1.0 {
        y - 1.0
    } else {
        y
    }
}

#[inline]
fn cat_u64(x: u64, y: u64) -> (u64, u64) {
    (
        x.wrapping_add(x).wrapping_add(y),
        x.wrapping_add(y),
    )
}

#[inline]
fn cat_f64(x: f64, y: f64) -> (f64, f64) {
    let a = (2.0 * x + y).fract();
    let b = (x + y).fract();
    (a, b)
}

/// Seed of the substream of `seed` reserved for `purpose`, so draws for one
/// purpose do not shift when another purpose asks for more.
pub fn substream_seed(seed: u64, purpose: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(purpose.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Independent draws from the declared measure, reproducible from `seed`.
pub fn sample_measure(sys: &SystemSpec, n: usize, seed: u64) -> Result<Vec<Point>> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..n)
        .map(|_| sample_one(sys, &mut rng))
        .collect::<Vec<_>>();
    Ok(pts)
}

pub(crate) fn sample_one(sys: &SystemSpec, rng: &mut ChaCha8Rng) -> Point {
    match (&sys.kind, sys.measure()) {
        (SystemKind::Sequence { points }, _) => Point::Circle(points[rng.gen_range(0..points.len())]),
        (_, MeasureTag::Cantor) => Point::Cantor(CantorCode::from_digits(rng.gen())),
        (_, MeasureTag::ArcSine) => {
            let theta: f64 = rng.gen();
            let s = (std::f64::consts::PI * theta / 2.0).sin();
            Point::Interval(s * s)
        }
        _ => match sys.space() {
            Space::Circle => Point::Circle(Fixed(rng.gen())),
            Space::Torus => Point::Torus(rng.gen(), rng.gen()),
            Space::Interval => Point::Interval(rng.gen()),
            Space::Cantor => Point::Cantor(CantorCode::from_digits(rng.gen())),
        },
    }
}

/// Seed for the digits that extend a finite expansion, derived from the start.
fn tail_seed(p: &Point) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(p).expect("point serializes"));
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Streams `T^n(start)` for `n = 0, 1, 2, ...`.
///
/// For the doubling, logistic and ternary-shift maps in fixed-point
/// arithmetic, the start's stored digits are the prefix of an infinite
/// expansion whose remaining digits come from a stream seeded by the start
/// itself. The orbit is then the exact shift orbit of that completed point
/// instead of collapsing to zero once the stored digits run out.
pub struct OrbitIter {
    state: IterState,
}

enum IterState {
    Rotation { x: Fixed, angle: Fixed },
    Shift { bits: u128, tail: BitTail, logistic: bool },
    DoublingF64(f64),
    LogisticF64(f64),
    CatFixed(u64, u64),
    CatF64(f64, f64),
    Cantor { digits: u64, tail: BitTail },
    Constant { first: Option<Fixed>, target: Fixed },
    Square(f64),
    Sequence { points: Vec<Fixed>, i: usize },
}

struct BitTail {
    rng: ChaCha8Rng,
    word: u64,
    left: u32,
}

impl BitTail {
    fn new(seed: u64) -> Self {
        BitTail {
            rng: ChaCha8Rng::seed_from_u64(seed),
            word: 0,
            left: 0,
        }
    }

    #[inline]
    fn next_bit(&mut self) -> u64 {
        if self.left == 0 {
            self.word = self.rng.gen();
            self.left = 64;
        }
        let b = self.word & 1;
        self.word >>= 1;
        self.left -= 1;
        b
    }
}

impl OrbitIter {
    pub fn new(sys: &SystemSpec, start: &Point) -> Result<Self> {
        sys.check_domain(start)?;
        let state = match (&sys.kind, sys.arithmetic, *start) {
            (SystemKind::Rotation { angle }, _, Point::Circle(x)) => {
                IterState::Rotation { x, angle: *angle }
            }
            (SystemKind::Doubling, Arithmetic::FixedPoint, Point::Circle(x)) => IterState::Shift {
                bits: x.0,
                tail: BitTail::new(tail_seed(start)),
                logistic: false,
            },
            (SystemKind::Doubling, Arithmetic::Double, Point::Circle(x)) => {
                IterState::DoublingF64(x.to_f64())
            }
            (SystemKind::Logistic, Arithmetic::FixedPoint, Point::Interval(x)) => {
                // x = sin^2(pi theta) conjugates 4x(1-x) to theta -> 2 theta.
                let theta = x.sqrt().asin() / std::f64::consts::PI;
                let theta = Fixed::from_f64(theta.clamp(0.0, 0.5))?;
                IterState::Shift {
                    bits: theta.0,
                    tail: BitTail::new(tail_seed(start)),
                    logistic: true,
                }
            }
            (SystemKind::Logistic, Arithmetic::Double, Point::Interval(x)) => {
                IterState::LogisticF64(x)
            }
            (SystemKind::CatMap, Arithmetic::FixedPoint, Point::Torus(x, y)) => {
                IterState::CatFixed(x, y)
            }
            (SystemKind::CatMap, Arithmetic::Double, Point::Torus(x, y)) => {
                IterState::CatF64(x as f64 / TWO_POW_64, y as f64 / TWO_POW_64)
            }
            (SystemKind::CantorShift, _, Point::Cantor(c)) => IterState::Cantor {
                digits: c.digits,
                tail: BitTail::new(tail_seed(start)),
            },
            (SystemKind::Constant { target }, _, Point::Circle(x)) => IterState::Constant {
                first: Some(x),
                target: *target,
            },
            (SystemKind::Square, _, Point::Interval(x)) => IterState::Square(x),
            (SystemKind::Sequence { points }, _, _) => IterState::Sequence {
                points: points.clone(),
                i: 0,
            },
            _ => {
                return Err(Error::DomainViolation {
                    system: sys.name().into(),
                    point: format!("{start:?}"),
                })
            }
        };
        Ok(OrbitIter { state })
    }
}

impl Iterator for OrbitIter {
    type Item = Point;

    #[inline]
    fn next(&mut self) -> Option<Point> {
        Some(match &mut self.state {
            IterState::Rotation { x, angle } => {
                let p = Point::Circle(*x);
                *x = x.add(*angle);
                p
            }
            IterState::Shift {
                bits,
                tail,
                logistic,
            } => {
                let p = if *logistic {
                    let s = (std::f64::consts::PI * Fixed(*bits).to_f64()).sin();
                    Point::Interval(s * s)
                } else {
                    Point::Circle(Fixed(*bits))
                };
                *bits = (*bits << 1) | tail.next_bit() as u128;
                p
            }
            IterState::DoublingF64(x) => {
                let p = Point::Circle(Fixed::from_f64(*x).unwrap_or(Fixed::ZERO));
                *x = doubling_f64(*x);
                p
            }
            IterState::LogisticF64(x) => {
                let p = Point::Interval(*x);
                *x = 4.0 * *x * (1.0 - *x);
                p
            }
            IterState::CatFixed(x, y) => {
                let p = Point::Torus(*x, *y);
                (*x, *y) = cat_u64(*x, *y);
                p
            }
            IterState::CatF64(x, y) => {
                let p = Point::Torus((*x * TWO_POW_64) as u64, (*y * TWO_POW_64) as u64);
                (*x, *y) = cat_f64(*x, *y);
                p
            }
            IterState::Cantor { digits, tail } => {
                let p = Point::Cantor(CantorCode::from_digits(*digits));
                *digits = (*digits >> 1) | (tail.next_bit() << (CANTOR_DEPTH - 1));
                p
            }
            IterState::Constant { first, target } => match first.take() {
                Some(x) => Point::Circle(x),
                None => Point::Circle(*target),
            },
            IterState::Square(x) => {
                let p = Point::Interval(*x);
                *x *= *x;
                p
            }
            IterState::Sequence { points, i } => {
                let p = Point::Circle(points[*i % points.len()]);
                *i += 1;
                p
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ContinuedFraction;

    #[test]
    fn step_examples() {
        let d = SystemSpec::doubling();
        assert_eq!(
            step(&d, &Point::circle(0.3).unwrap()).unwrap().coords()[0],
            0.6
        );
        let c = SystemSpec::cat_map();
        let p = step(&c, &Point::torus(0.5, 0.5).unwrap()).unwrap();
        assert_eq!(p, Point::torus(0.5, 0.0).unwrap());
        let g = ContinuedFraction::golden().angle().unwrap();
        let r = SystemSpec::rotation(g);
        assert_eq!(
            step(&r, &Point::Circle(Fixed::ZERO)).unwrap(),
            Point::Circle(g)
        );
    }

    #[test]
    fn step_rejects_foreign_points() {
        let d = SystemSpec::doubling();
        assert!(matches!(
            step(&d, &Point::torus(0.1, 0.2).unwrap()),
            Err(Error::DomainViolation { .. })
        ));
        let l = SystemSpec::logistic();
        assert!(step(&l, &Point::Interval(1.5)).is_err());
    }

    #[test]
    fn distance_examples() {
        let a = Point::circle(0.9).unwrap();
        let b = Point::circle(0.1).unwrap();
        let d = distance(Metric::CircleWraparound, &a, &b).unwrap();
        assert!((d - 0.2).abs() < 1e-15);
        let t = distance(
            Metric::TorusMax,
            &Point::torus(0.0, 0.0).unwrap(),
            &Point::torus(0.4, 0.1).unwrap(),
        )
        .unwrap();
        assert!((t - 0.4).abs() < 1e-15);
        assert_eq!(distance(Metric::CircleWraparound, &a, &a).unwrap(), 0.0);
        assert!(matches!(
            distance(Metric::TorusMax, &a, &b),
            Err(Error::SpaceMismatch { .. })
        ));
    }

    #[test]
    fn cantor_codes() {
        // 0.2222... (base 3) over 60 digits is 1 - 3^-60.
        let c = CantorCode::from_digits(u64::MAX);
        assert!(1.0 - c.to_f64() < 1e-15);
        // digit 1 = 2 -> 2/3
        let c = CantorCode::from_digits(1);
        assert!((c.to_f64() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.digit(1), 2);
        assert_eq!(c.digit(2), 0);
        // shift drops the leading digit: 0.02 (base 3) -> 0.2
        let s = step(&SystemSpec::cantor_shift(), &Point::Cantor(CantorCode::from_digits(2)))
            .unwrap();
        assert_eq!(s, Point::Cantor(CantorCode::from_digits(1)));
    }

    #[test]
    fn sampling_is_reproducible_and_on_support() {
        let sys = SystemSpec::cantor_shift();
        let a = sample_measure(&sys, 100, 7).unwrap();
        let b = sample_measure(&sys, 100, 7).unwrap();
        assert_eq!(a, b);
        for p in &a {
            let Point::Cantor(c) = p else { panic!() };
            for i in 1..=CANTOR_DEPTH {
                assert!(c.digit(i) == 0 || c.digit(i) == 2);
            }
        }
        assert!(sample_measure(&sys, 0, 1).is_err());
    }

    #[test]
    fn lebesgue_mean() {
        let sys = SystemSpec::rotation(Fixed::HALF);
        let pts = sample_measure(&sys, 10_000, 11).unwrap();
        let mean = pts.iter().map(|p| p.coords()[0]).sum::<f64>() / 1e4;
        // 4 sigma of the mean of U(0,1): 4 * 0.2887 / 100
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn doubling_double_one_third() {
        let sys = SystemSpec::doubling()
            .with_arithmetic(Arithmetic::Double)
            .unwrap();
        let pts: Vec<f64> = OrbitIter::new(&sys, &Point::circle(1.0 / 3.0).unwrap())
            .unwrap()
            .take(3)
            .map(|p| p.coords()[0])
            .collect();
        for (got, want) in pts.iter().zip([1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn counterexample_orbit() {
        let sys = noninvariant_counterexample();
        let x = Point::circle(0.7).unwrap();
        let pts: Vec<Point> = OrbitIter::new(&sys, &x).unwrap().take(3).collect();
        let y0 = Point::circle(0.25).unwrap();
        assert_eq!(pts, vec![x, y0, y0]);
        assert!(!sys.measure_is_invariant());
    }

    #[test]
    fn shift_completion_matches_step_on_prefix() {
        // The first stored digits of T^n agree with stepping the start.
        let sys = SystemSpec::doubling();
        let x = Point::circle(0.123_456).unwrap();
        let orbit: Vec<Point> = OrbitIter::new(&sys, &x).unwrap().take(10).collect();
        let mut p = x;
        for (n, q) in orbit.iter().enumerate() {
            let (Point::Circle(a), Point::Circle(b)) = (p, *q) else { panic!() };
            // bits above position n come from the start itself
            let mask = if n == 0 { u128::MAX } else { u128::MAX << n };
            assert_eq!(a.0 & mask, b.0 & mask, "step {n}");
            p = step(&sys, &p).unwrap();
        }
    }

    #[test]
    fn logistic_conjugacy_tracks_the_map() {
        let sys = SystemSpec::logistic();
        let x = Point::Interval(0.3);
        let pts: Vec<f64> = OrbitIter::new(&sys, &x)
            .unwrap()
            .take(6)
            .map(|p| p.coords()[0])
            .collect();
        let mut v = 0.3f64;
        for got in pts {
            assert!((got - v).abs() < 1e-9, "{got} vs {v}");
            v = 4.0 * v * (1.0 - v);
        }
    }
}
