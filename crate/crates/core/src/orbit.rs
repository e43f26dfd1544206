//! Orbit storage, dyadic grid indexing and ball-occupation counts.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hitting::RadiusSchedule;
use crate::numerics::Fixed;
use crate::systems::{dist_fixed, CantorCode, OrbitIter, Point, SystemSpec};

/// Largest orbit kept in memory (32-byte points, about 3.2 GB).
pub const DEFAULT_MAX_STORED: usize = 100_000_000;
/// Largest number of grid cells, `2^26`.
pub const DEFAULT_MAX_CELLS_LOG2: u32 = 26;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    /// `points[i] = T^(burn_in + i)(start)`.
    Orbit { start: Point, burn_in: u64 },
    /// Independent draws from the declared measure.
    MeasureSample { seed: u64 },
}

/// A finite orbit segment (or measure sample) with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitBuffer {
    pub system: SystemSpec,
    pub provenance: Provenance,
    pub points: Vec<Point>,
    /// Set when double arithmetic ran past the system's safe length.
    pub precision_loss: bool,
}

impl OrbitBuffer {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn from_samples(system: SystemSpec, points: Vec<Point>, seed: u64) -> Self {
        OrbitBuffer {
            system,
            provenance: Provenance::MeasureSample { seed },
            points,
            precision_loss: false,
        }
    }
}

/// Streams an orbit after discarding `burn_in` points.
pub fn orbit_stream(sys: &SystemSpec, start: &Point, burn_in: u64) -> Result<OrbitIter> {
    let mut it = OrbitIter::new(sys, start)?;
    for _ in 0..burn_in {
        it.next();
    }
    Ok(it)
}

pub fn generate_orbit(sys: &SystemSpec, start: &Point, burn_in: u64, n: usize) -> Result<OrbitBuffer> {
    generate_orbit_capped(sys, start, burn_in, n, DEFAULT_MAX_STORED)
}

pub fn generate_orbit_capped(
    sys: &SystemSpec,
    start: &Point,
    burn_in: u64,
    n: usize,
    cap: usize,
) -> Result<OrbitBuffer> {
    if n == 0 {
        return Err(Error::InvalidParameter("orbit length must be >= 1".into()));
    }
    if n > cap {
        return Err(Error::OrbitTooLarge { requested: n, cap });
    }
    let points: Vec<Point> = orbit_stream(sys, start, burn_in)?.take(n).collect();
    let precision_loss = sys
        .safe_length()
        .is_some_and(|safe| burn_in + n as u64 > safe);
    Ok(OrbitBuffer {
        system: sys.clone(),
        provenance: Provenance::Orbit {
            start: *start,
            burn_in,
        },
        points,
        precision_loss,
    })
}

/// Points bucketed by dyadic cell of side `2^-g`, stored compactly: the
/// indices of cell `c` are `indices[offsets[c]..offsets[c + 1]]`.
#[derive(Clone, Debug)]
pub struct GridIndex {
    pub g: u32,
    pub dim: usize,
    wraps: bool,
    offsets: Vec<u32>,
    indices: Vec<u32>,
}

#[inline]
fn axis_cell(v: u128, g: u32) -> u64 {
    (v >> (128 - g)) as u64
}

fn cell_of(p: &Point, g: u32) -> (u64, u64) {
    let x = axis_cell(p.axis_fixed(0), g);
    let y = if p.dim() == 2 {
        axis_cell(p.axis_fixed(1), g)
    } else {
        0
    };
    (x, y)
}

pub fn build_grid_index(orb: &OrbitBuffer, g: u32) -> Result<GridIndex> {
    build_grid_index_capped(orb, g, DEFAULT_MAX_CELLS_LOG2)
}

pub fn build_grid_index_capped(orb: &OrbitBuffer, g: u32, cap_log2: u32) -> Result<GridIndex> {
    if g == 0 || g > 32 {
        return Err(Error::InvalidParameter(format!("grid level {g} outside 1..=32")));
    }
    if orb.points.len() > u32::MAX as usize {
        return Err(Error::OrbitTooLarge {
            requested: orb.points.len(),
            cap: u32::MAX as usize,
        });
    }
    let dim = orb.system.dim();
    let cells_log2 = g * dim as u32;
    if cells_log2 > cap_log2 {
        return Err(Error::GridTooLarge {
            cells_log2,
            cap_log2,
        });
    }
    let side = 1u64 << g;
    let n_cells = 1usize << cells_log2;
    let flat = |p: &Point| {
        let (x, y) = cell_of(p, g);
        (y * side + x) as usize
    };
    let mut offsets = vec![0u32; n_cells + 1];
    for p in &orb.points {
        offsets[flat(p) + 1] += 1;
    }
    for c in 0..n_cells {
        offsets[c + 1] += offsets[c];
    }
    let mut fill = offsets.clone();
    let mut indices = vec![0u32; orb.points.len()];
    for (i, p) in orb.points.iter().enumerate() {
        let c = flat(p);
        indices[fill[c] as usize] = i as u32;
        fill[c] += 1;
    }
    Ok(GridIndex {
        g,
        dim,
        wraps: orb.system.metric().wraps(),
        offsets,
        indices,
    })
}

impl GridIndex {
    pub fn side(&self) -> u64 {
        1u64 << self.g
    }

    pub fn n_cells(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Orbit indices stored in cell `(x, y)`.
    pub fn cell(&self, x: u64, y: u64) -> &[u32] {
        let c = (y * self.side() + x) as usize;
        &self.indices[self.offsets[c] as usize..self.offsets[c + 1] as usize]
    }

    /// Indices in the `3^dim` cells around `y`, a superset of the points
    /// closer than `2^-g`.
    pub fn neighborhood(&self, y: &Point) -> Vec<u32> {
        let mut out = Vec::new();
        let ax = AxisRange::around(y.axis_fixed(0), self.g, Fixed::dyadic(self.g).0, self.wraps);
        let ay = if self.dim == 2 {
            AxisRange::around(y.axis_fixed(1), self.g, Fixed::dyadic(self.g).0, self.wraps)
        } else {
            AxisRange::single()
        };
        for cy in ay.cells() {
            for cx in ax.cells() {
                out.extend_from_slice(self.cell(cx, cy));
            }
        }
        out
    }
}

/// Cells to visit along one axis for a ball of radius `r`.
struct AxisRange {
    first: i64,
    last: i64,
    side: i64,
    wraps: bool,
}

impl AxisRange {
    fn around(c: u128, g: u32, r: u128, wraps: bool) -> Self {
        let side = 1i64 << g;
        let home = axis_cell(c, g) as i64;
        let cell_len = 1u128 << (128 - g);
        let reach = (r / cell_len) as i64 + 1;
        if wraps && 2 * reach + 1 >= side {
            return AxisRange {
                first: 0,
                last: side - 1,
                side,
                wraps: false,
            };
        }
        let (first, last) = if wraps {
            (home - reach, home + reach)
        } else {
            ((home - reach).max(0), (home + reach).min(side - 1))
        };
        AxisRange {
            first,
            last,
            side,
            wraps,
        }
    }

    fn single() -> Self {
        AxisRange {
            first: 0,
            last: 0,
            side: 1,
            wraps: false,
        }
    }

    fn cells(&self) -> impl Iterator<Item = u64> + '_ {
        (self.first..=self.last).map(move |c| {
            if self.wraps {
                c.rem_euclid(self.side) as u64
            } else {
                c as u64
            }
        })
    }
}

/// Bounds on the distance from coordinate `c` to any point of cell `j`.
#[inline]
fn axis_bounds(c: u128, j: u64, g: u32, wraps: bool) -> (u128, u128) {
    let len = 1u128 << (128 - g);
    let lo = (j as u128) << (128 - g);
    if wraps {
        let half = len >> 1;
        let center = lo.wrapping_add(half);
        let dc = c.wrapping_sub(center);
        let dc = dc.min(dc.wrapping_neg());
        (dc.saturating_sub(half), dc.saturating_add(half).min(1u128 << 127))
    } else {
        let hi = lo.saturating_add(len - 1);
        let min = if c < lo {
            lo - c
        } else if c > hi {
            c - hi
        } else {
            0
        };
        let max = (c.abs_diff(lo)).max(c.abs_diff(hi));
        (min, max)
    }
}

/// Ball counts `#{0 <= i < N : d(points[i], y) < r_k}` for every scale.
///
/// Cells entirely inside the ball contribute their size, cells entirely
/// outside are skipped and only boundary cells are scanned, so the result
/// equals the linear scan exactly at every radius.
pub fn occupation_counts(orb: &OrbitBuffer, idx: &GridIndex, y: &Point, radii: &RadiusSchedule) -> Vec<u64> {
    radii
        .radii_fixed()
        .iter()
        .map(|&r| count_ball(orb, idx, y, r))
        .collect()
}

fn count_ball(orb: &OrbitBuffer, idx: &GridIndex, y: &Point, r: u128) -> u64 {
    let g = idx.g;
    let cx = y.axis_fixed(0);
    let ax = AxisRange::around(cx, g, r, idx.wraps);
    let (cy, ay) = if idx.dim == 2 {
        let c = y.axis_fixed(1);
        (c, AxisRange::around(c, g, r, idx.wraps))
    } else {
        (0, AxisRange::single())
    };
    let mut count = 0u64;
    for jy in ay.cells() {
        let (ymin, ymax) = if idx.dim == 2 {
            axis_bounds(cy, jy, g, idx.wraps)
        } else {
            (0, 0)
        };
        if ymin >= r {
            continue;
        }
        for jx in ax.cells() {
            let (xmin, xmax) = axis_bounds(cx, jx, g, idx.wraps);
            if xmin >= r {
                continue;
            }
            let cell = idx.cell(jx, jy);
            if xmax < r && ymax < r {
                count += cell.len() as u64;
            } else {
                count += cell
                    .iter()
                    .filter(|&&i| dist_fixed(&orb.points[i as usize], y) < r)
                    .count() as u64;
            }
        }
    }
    count
}

/// Same counts by scanning every point; the reference for the grid path.
pub fn occupation_counts_linear(orb: &OrbitBuffer, y: &Point, radii: &RadiusSchedule) -> Vec<u64> {
    let rs = radii.radii_fixed();
    let mut counts = vec![0u64; rs.len()];
    for p in &orb.points {
        let d = dist_fixed(p, y);
        // radii decrease, so the hits form a prefix
        for (c, &r) in counts.iter_mut().zip(&rs) {
            if d < r {
                *c += 1;
            } else {
                break;
            }
        }
    }
    counts
}

const CACHE_MAGIC: &[u8; 8] = b"WDORBIT1";

/// Header of the on-disk orbit cache. A cache file is reused only when
/// every field matches.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CacheHeader {
    pub system_hash: [u8; 32],
    pub start: Vec<u8>,
    pub burn_in: u64,
    pub len: u64,
    pub arithmetic: u8,
}

impl CacheHeader {
    pub fn for_orbit(sys: &SystemSpec, start: &Point, burn_in: u64, len: u64) -> Self {
        let system_hash: [u8; 32] = Sha256::digest(sys.canonical().as_bytes()).into();
        CacheHeader {
            system_hash,
            start: encode_point(start),
            burn_in,
            len,
            arithmetic: match sys.arithmetic {
                crate::systems::Arithmetic::FixedPoint => 0,
                crate::systems::Arithmetic::Double => 1,
            },
        }
    }

    fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&self.system_hash)?;
        w.write_all(&(self.start.len() as u32).to_le_bytes())?;
        w.write_all(&self.start)?;
        w.write_all(&self.burn_in.to_le_bytes())?;
        w.write_all(&self.len.to_le_bytes())?;
        w.write_all(&[self.arithmetic])
    }

    fn read<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Cache("bad magic".into()));
        }
        let mut system_hash = [0u8; 32];
        r.read_exact(&mut system_hash)?;
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        if n > 64 {
            return Err(Error::Cache("corrupt start point".into()));
        }
        let mut start = vec![0u8; n];
        r.read_exact(&mut start)?;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let burn_in = u64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let len = u64::from_le_bytes(b8);
        let mut a = [0u8; 1];
        r.read_exact(&mut a)?;
        Ok(CacheHeader {
            system_hash,
            start,
            burn_in,
            len,
            arithmetic: a[0],
        })
    }
}

/// Point encoding: a tag byte followed by little-endian words.
fn encode_point(p: &Point) -> Vec<u8> {
    let mut out = Vec::with_capacity(17);
    match *p {
        Point::Circle(f) => {
            out.push(0);
            out.extend_from_slice(&f.0.to_le_bytes());
        }
        Point::Torus(a, b) => {
            out.push(1);
            out.extend_from_slice(&a.to_le_bytes());
            out.extend_from_slice(&b.to_le_bytes());
        }
        Point::Interval(x) => {
            out.push(2);
            out.extend_from_slice(&x.to_bits().to_le_bytes());
        }
        Point::Cantor(c) => {
            out.push(3);
            out.extend_from_slice(&c.digits.to_le_bytes());
        }
    }
    out
}

fn decode_point<R: Read>(r: &mut R) -> Result<Point> {
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let mut b8 = [0u8; 8];
    let mut word = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut b8)?;
        Ok(u64::from_le_bytes(b8))
    };
    Ok(match tag[0] {
        0 => {
            let lo = word(r)? as u128;
            let hi = word(r)? as u128;
            Point::Circle(Fixed(lo | (hi << 64)))
        }
        1 => {
            let a = word(r)?;
            let b = word(r)?;
            Point::Torus(a, b)
        }
        2 => Point::Interval(f64::from_bits(word(r)?)),
        3 => Point::Cantor(CantorCode::from_digits(word(r)?)),
        t => return Err(Error::Cache(format!("unknown point tag {t}"))),
    })
}

/// Writes `orb` as header + raw little-endian point words.
pub fn write_cache(path: &Path, orb: &OrbitBuffer) -> Result<()> {
    let Provenance::Orbit { start, burn_in } = orb.provenance else {
        return Err(Error::Cache("only orbits are cached".into()));
    };
    let header = CacheHeader::for_orbit(&orb.system, &start, burn_in, orb.len() as u64);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    header.write(&mut w)?;
    for p in &orb.points {
        w.write_all(&encode_point(p))?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a cached orbit if its header matches exactly; `Ok(None)` otherwise.
pub fn read_cache(
    path: &Path,
    sys: &SystemSpec,
    start: &Point,
    burn_in: u64,
    len: u64,
) -> Result<Option<OrbitBuffer>> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut r = std::io::BufReader::new(file);
    let header = CacheHeader::read(&mut r)?;
    if header != CacheHeader::for_orbit(sys, start, burn_in, len) {
        return Ok(None);
    }
    let mut points = Vec::with_capacity(len as usize);
    for _ in 0..len {
        points.push(decode_point(&mut r)?);
    }
    let precision_loss = sys.safe_length().is_some_and(|safe| burn_in + len > safe);
    Ok(Some(OrbitBuffer {
        system: sys.clone(),
        provenance: Provenance::Orbit {
            start: *start,
            burn_in,
        },
        points,
        precision_loss,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ContinuedFraction;
    use crate::systems::{noninvariant_counterexample, sample_measure, Arithmetic};

    fn sched(a: u32, b: u32) -> RadiusSchedule {
        RadiusSchedule::new(a, b).unwrap()
    }

    #[test]
    fn golden_orbit_first_points() {
        let g = ContinuedFraction::golden().angle().unwrap();
        let orb = generate_orbit(&SystemSpec::rotation(g), &Point::Circle(Fixed::ZERO), 0, 6).unwrap();
        let xs: Vec<f64> = orb.points.iter().map(|p| p.coords()[0]).collect();
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for (k, x) in xs.iter().enumerate() {
            let want = (k as f64 * phi).fract();
            assert!((x - want).abs() < 1e-12, "{k}: {x} vs {want}");
        }
        for (k, p) in orb.points.iter().enumerate() {
            assert_eq!(*p, Point::Circle(g.mul_int(k as u64)));
        }
    }

    #[test]
    fn burn_in_shifts_the_orbit() {
        let sys = SystemSpec::cat_map();
        let x = Point::torus(0.1, 0.7).unwrap();
        let a = generate_orbit(&sys, &x, 0, 20).unwrap();
        let b = generate_orbit(&sys, &x, 5, 15).unwrap();
        assert_eq!(&a.points[5..], &b.points[..]);
        assert_eq!(a, generate_orbit(&sys, &x, 0, 20).unwrap());
    }

    #[test]
    fn counterexample_and_double_examples() {
        let orb = generate_orbit(&noninvariant_counterexample(), &Point::circle(0.6).unwrap(), 0, 3)
            .unwrap();
        let y0 = Point::circle(0.25).unwrap();
        assert_eq!(orb.points, vec![Point::circle(0.6).unwrap(), y0, y0]);

        let sys = SystemSpec::doubling().with_arithmetic(Arithmetic::Double).unwrap();
        let short = generate_orbit(&sys, &Point::circle(1.0 / 3.0).unwrap(), 0, 3).unwrap();
        assert!(!short.precision_loss);
        let long = generate_orbit(&sys, &Point::circle(1.0 / 3.0).unwrap(), 0, 100).unwrap();
        assert!(long.precision_loss);
    }

    #[test]
    fn storage_cap() {
        let sys = SystemSpec::doubling();
        let err = generate_orbit_capped(&sys, &Point::circle(0.1).unwrap(), 0, 11, 10).unwrap_err();
        assert_eq!(err, Error::OrbitTooLarge { requested: 11, cap: 10 });
    }

    #[test]
    fn equispaced_points_one_per_cell() {
        let sys = SystemSpec::rotation(Fixed::dyadic(3));
        let orb = generate_orbit(&sys, &Point::circle(1.0 / 16.0).unwrap(), 0, 8).unwrap();
        let idx = build_grid_index(&orb, 3).unwrap();
        for c in 0..8 {
            assert_eq!(idx.cell(c, 0).len(), 1);
        }
    }

    #[test]
    fn grid_partition_and_cap() {
        let sys = SystemSpec::cat_map();
        let orb = generate_orbit(&sys, &Point::torus(0.3, 0.2).unwrap(), 0, 5000).unwrap();
        let idx = build_grid_index(&orb, 5).unwrap();
        let mut seen = vec![0u32; orb.len()];
        for y in 0..idx.side() {
            for x in 0..idx.side() {
                for &i in idx.cell(x, y) {
                    seen[i as usize] += 1;
                }
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert!(matches!(
            build_grid_index_capped(&orb, 14, 26),
            Err(Error::GridTooLarge { .. })
        ));
    }

    #[test]
    fn neighborhood_covers_the_small_ball() {
        let sys = SystemSpec::doubling();
        let orb = generate_orbit(&sys, &Point::circle(0.77).unwrap(), 0, 20_000).unwrap();
        let idx = build_grid_index(&orb, 6).unwrap();
        for y in sample_measure(&sys, 50, 3).unwrap() {
            let hood: std::collections::HashSet<u32> = idx.neighborhood(&y).into_iter().collect();
            let r = Fixed::dyadic(6).0;
            for (i, p) in orb.points.iter().enumerate() {
                if dist_fixed(p, &y) < r {
                    assert!(hood.contains(&(i as u32)));
                }
            }
        }
    }

    #[test]
    fn whole_circle_and_cantor_gap() {
        let sys = SystemSpec::doubling();
        let orb = generate_orbit(&sys, &Point::circle(0.4).unwrap(), 0, 1000).unwrap();
        let idx = build_grid_index(&orb, 4).unwrap();
        // r = 1/2 covers every point but the antipode
        let c = occupation_counts(&orb, &idx, &Point::circle(0.5).unwrap(), &sched(1, 2));
        assert_eq!(c[0], orb.points.iter().filter(|p| p.coords()[0] != 0.0).count() as u64);

        let cs = SystemSpec::cantor_shift();
        let start = sample_measure(&cs, 1, 5).unwrap()[0];
        let orb = generate_orbit(&cs, &start, 0, 10_000).unwrap();
        let idx = build_grid_index(&orb, 8).unwrap();
        let c = occupation_counts(&orb, &idx, &Point::Interval(0.5), &sched(4, 8));
        assert!(c.iter().all(|&v| v == 0));
    }

    #[test]
    fn cache_round_trip_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("orbit.bin");
        let sys = SystemSpec::cat_map();
        let x = Point::torus(0.3, 0.9).unwrap();
        let orb = generate_orbit(&sys, &x, 7, 500).unwrap();
        write_cache(&path, &orb).unwrap();
        let back = read_cache(&path, &sys, &x, 7, 500).unwrap().unwrap();
        assert_eq!(back, orb);
        assert!(read_cache(&path, &sys, &x, 8, 500).unwrap().is_none());
        assert!(read_cache(&path, &SystemSpec::doubling(), &x, 7, 500)
            .unwrap()
            .is_none());
        assert!(read_cache(&dir.path().join("missing"), &sys, &x, 7, 500)
            .unwrap()
            .is_none());
    }
}
