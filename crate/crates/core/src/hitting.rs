//! First-entrance times `tau_r(x, y)` over dyadic radius schedules.
//!
//! In dynamical mode candidate times start at `n = 1`, so `tau` with `y = x`
//! is the return time. Sequence mode starts at `n = 0`, matching hitting
//! along an arbitrary sequence `x_0, x_1, ...`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::numerics::{fixed_len_to_f64, Fixed};
use crate::systems::{dist_fixed, Point};

/// Radii `r_k = 2^-k` for `k = k_min..=k_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadiusSchedule {
    pub k_min: u32,
    pub k_max: u32,
}

impl RadiusSchedule {
    pub fn new(k_min: u32, k_max: u32) -> Result<Self> {
        if k_min < 1 {
            return Err(Error::InvalidSchedule(format!("k_min = {k_min} must be >= 1")));
        }
        if k_max <= k_min {
            return Err(Error::InvalidSchedule(format!(
                "k_max = {k_max} must exceed k_min = {k_min}"
            )));
        }
        if k_max > 64 {
            return Err(Error::InvalidSchedule(format!(
                "k_max = {k_max} is finer than the 2^-64 point resolution"
            )));
        }
        Ok(RadiusSchedule { k_min, k_max })
    }

    pub fn len(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn ks(&self) -> impl Iterator<Item = u32> + Clone {
        self.k_min..=self.k_max
    }

    pub fn radii_fixed(&self) -> Vec<u128> {
        self.ks().map(|k| Fixed::dyadic(k).0).collect()
    }

    pub fn radius(&self, k: u32) -> f64 {
        (-(k as f64)).exp2()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitMode {
    /// `n >= 1`.
    Dynamical,
    /// `n >= 0`.
    Sequence,
}

impl HitMode {
    fn first_time(self) -> usize {
        match self {
            HitMode::Dynamical => 1,
            HitMode::Sequence => 0,
        }
    }
}

/// `tau` at every scale of a schedule; `None` marks a censored scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingProfile {
    pub source: Point,
    pub target: Point,
    pub schedule: RadiusSchedule,
    pub tau: Vec<Option<u64>>,
    /// Largest time index examined.
    pub n_max: u64,
    pub mode: HitMode,
}

impl HittingProfile {
    pub fn tau_at(&self, k: u32) -> Option<u64> {
        self.tau[(k - self.schedule.k_min) as usize]
    }

    pub fn censored(&self) -> impl Iterator<Item = u32> + '_ {
        self.schedule
            .ks()
            .zip(&self.tau)
            .filter(|(_, t)| t.is_none())
            .map(|(k, _)| k)
    }

    pub fn is_monotone(&self) -> bool {
        let mut last = 0;
        let mut seen_censored = false;
        for t in &self.tau {
            match t {
                Some(v) => {
                    if seen_censored || *v < last {
                        return false;
                    }
                    last = *v;
                }
                None => seen_censored = true,
            }
        }
        true
    }
}

/// Per-target cursor: the next unfilled scale and the times found so far.
struct Cursor {
    next: usize,
    tau: Vec<Option<u64>>,
}

impl Cursor {
    fn new(len: usize) -> Self {
        Cursor {
            next: 0,
            tau: vec![None; len],
        }
    }

    /// Records `n` at every still-open scale whose radius exceeds `d`.
    #[inline]
    fn offer(&mut self, d: u128, n: u64, radii: &[u128]) {
        while self.next < radii.len() && d < radii[self.next] {
            self.tau[self.next] = Some(n);
            self.next += 1;
        }
    }

    fn done(&self) -> bool {
        self.next == self.tau.len()
    }
}

/// One pass over the orbit, filling scales from coarse to fine as the
/// running distance to `y` drops below each radius.
///
/// `points` yields `x_0, x_1, ...`; `len` bounds the pass.
pub fn hitting_single_pass<I>(
    points: I,
    len: usize,
    source: &Point,
    y: &Point,
    sched: &RadiusSchedule,
    mode: HitMode,
) -> HittingProfile
where
    I: IntoIterator<Item = Point>,
{
    let radii = sched.radii_fixed();
    let mut cur = Cursor::new(radii.len());
    let first = mode.first_time();
    for (n, p) in points.into_iter().enumerate().take(len).skip(first) {
        cur.offer(dist_fixed(&p, y), n as u64, &radii);
        if cur.done() {
            break;
        }
    }
    HittingProfile {
        source: *source,
        target: *y,
        schedule: *sched,
        tau: cur.tau,
        n_max: len.saturating_sub(1) as u64,
        mode,
    }
}

/// Convenience wrapper over a stored point slice; the source is `points[0]`.
pub fn hitting_profile(points: &[Point], y: &Point, sched: &RadiusSchedule, mode: HitMode) -> HittingProfile {
    hitting_single_pass(points.iter().copied(), points.len(), &points[0], y, sched, mode)
}

/// Each scale scanned independently from the first admissible time.
pub fn hitting_bruteforce(points: &[Point], y: &Point, sched: &RadiusSchedule, mode: HitMode) -> HittingProfile {
    let first = mode.first_time();
    let tau = sched
        .radii_fixed()
        .iter()
        .map(|&r| {
            (first..points.len())
                .find(|&n| dist_fixed(&points[n], y) < r)
                .map(|n| n as u64)
        })
        .collect();
    HittingProfile {
        source: points[0],
        target: *y,
        schedule: *sched,
        tau,
        n_max: points.len().saturating_sub(1) as u64,
        mode,
    }
}

/// Targets bucketed on a dyadic grid so each orbit point only meets the
/// targets it can still hit.
struct TargetGrid {
    g: u32,
    dim: usize,
    wraps: bool,
    cells: Vec<Vec<u32>>,
}

impl TargetGrid {
    fn new(targets: &[Point], g: u32, wraps: bool) -> Self {
        let dim = targets[0].dim();
        let side = 1usize << g;
        let mut cells = vec![Vec::new(); side.pow(dim as u32)];
        for (i, t) in targets.iter().enumerate() {
            cells[Self::flat(t, g, dim)].push(i as u32);
        }
        TargetGrid {
            g,
            dim,
            wraps,
            cells,
        }
    }

    fn flat(p: &Point, g: u32, dim: usize) -> usize {
        let x = (p.axis_fixed(0) >> (128 - g)) as usize;
        if dim == 2 {
            let y = (p.axis_fixed(1) >> (128 - g)) as usize;
            (y << g) | x
        } else {
            x
        }
    }

    /// Cell index range `[lo, hi]` on one axis around coordinate `c`; wrapped
    /// indices are reduced modulo the side when read back.
    #[inline]
    fn axis_range(&self, c: u128, reach: i64) -> (i64, i64) {
        let side = 1i64 << self.g;
        let home = (c >> (128 - self.g)) as i64;
        if self.wraps {
            if 2 * reach + 1 >= side {
                (0, side - 1)
            } else {
                (home - reach, home + reach)
            }
        } else {
            ((home - reach).max(0), (home + reach).min(side - 1))
        }
    }

    /// Cells whose points may lie within distance `< r` of `p`.
    fn cells_near(&self, p: &Point, r: u128, out: &mut Vec<usize>) {
        out.clear();
        let side = 1i64 << self.g;
        let reach = (r >> (128 - self.g)) as i64 + 1;
        let (x0, x1) = self.axis_range(p.axis_fixed(0), reach);
        if self.dim == 2 {
            let (y0, y1) = self.axis_range(p.axis_fixed(1), reach);
            for y in y0..=y1 {
                let row = (y.rem_euclid(side) as usize) << self.g;
                out.extend((x0..=x1).map(|x| row | x.rem_euclid(side) as usize));
            }
        } else {
            out.extend((x0..=x1).map(|x| x.rem_euclid(side) as usize));
        }
    }
}

/// Profiles for many targets from one pass over the orbit.
///
/// Identical to calling [`hitting_single_pass`] per target. Targets whose
/// finest scale is filled leave the grid; cells farther than the largest
/// open radius are never visited.
pub fn batch_hitting_stream<I>(
    points: I,
    len: usize,
    source: &Point,
    targets: &[Point],
    sched: &RadiusSchedule,
    mode: HitMode,
) -> Vec<HittingProfile>
where
    I: IntoIterator<Item = Point>,
{
    if targets.is_empty() {
        return Vec::new();
    }
    let radii = sched.radii_fixed();
    let mut cursors: Vec<Cursor> = targets.iter().map(|_| Cursor::new(radii.len())).collect();
    let wraps = !matches!(targets[0], Point::Interval(_) | Point::Cantor(_));
    // about four targets per cell, never coarser than the finest radius needs
    let per_axis = ((targets.len() as f64).log2() / targets[0].dim() as f64).ceil() as u32;
    let g = per_axis.clamp(1, sched.k_max.min(if targets[0].dim() == 2 { 10 } else { 20 }));
    let mut grid = TargetGrid::new(targets, g, wraps);
    // open[j] = number of targets whose next unfilled scale is j
    let mut open = vec![0usize; radii.len() + 1];
    open[0] = targets.len();
    let mut finest_open = 0usize;
    let mut near = Vec::new();
    let mut finished = Vec::new();
    let first = mode.first_time();
    for (n, p) in points.into_iter().enumerate().take(len).skip(first) {
        while finest_open < radii.len() && open[finest_open] == 0 {
            finest_open += 1;
        }
        if finest_open == radii.len() {
            break;
        }
        let reach = radii[finest_open];
        grid.cells_near(&p, reach, &mut near);
        for &c in &near {
            finished.clear();
            for (slot, &t) in grid.cells[c].iter().enumerate() {
                let cur = &mut cursors[t as usize];
                let before = cur.next;
                if before < radii.len() && dist_fixed(&p, &targets[t as usize]) < radii[before] {
                    cur.offer(dist_fixed(&p, &targets[t as usize]), n as u64, &radii);
                    open[before] -= 1;
                    open[cur.next] += 1;
                    if cur.done() {
                        finished.push(slot);
                    }
                }
            }
            for &slot in finished.iter().rev() {
                grid.cells[c].swap_remove(slot);
            }
        }
    }
    let n_max = len.saturating_sub(1) as u64;
    targets
        .iter()
        .zip(cursors)
        .map(|(t, c)| HittingProfile {
            source: *source,
            target: *t,
            schedule: *sched,
            tau: c.tau,
            n_max,
            mode,
        })
        .collect()
}

/// Batch hitting over a stored orbit, with targets split across workers.
pub fn batch_hitting(
    points: &[Point],
    targets: &[Point],
    sched: &RadiusSchedule,
    mode: HitMode,
    exec: Exec,
) -> Vec<HittingProfile> {
    if targets.is_empty() || points.is_empty() {
        return Vec::new();
    }
    let chunk = exec::chunk_size(targets.len(), exec);
    let chunks: Vec<&[Point]> = targets.chunks(chunk).collect();
    exec::map(exec, &chunks, |_, ts| {
        batch_hitting_stream(points.iter().copied(), points.len(), &points[0], ts, sched, mode)
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Running minimum of `d(x_i, y)` over `first <= i <= n`, recorded at each
/// strict decrease.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinDistanceRecord {
    /// `(n, m_n)` with `m_n` as a 128-bit fraction.
    pub records: Vec<(u64, u128)>,
    pub n_max: u64,
    pub mode: HitMode,
}

impl MinDistanceRecord {
    pub fn from_stream<I>(points: I, len: usize, y: &Point, mode: HitMode) -> Self
    where
        I: IntoIterator<Item = Point>,
    {
        let mut records = Vec::new();
        let mut best = u128::MAX;
        for (n, p) in points
            .into_iter()
            .enumerate()
            .take(len)
            .skip(mode.first_time())
        {
            let d = dist_fixed(&p, y);
            if d < best || records.is_empty() {
                best = d;
                records.push((n as u64, d));
                if d == 0 {
                    break;
                }
            }
        }
        MinDistanceRecord {
            records,
            n_max: len.saturating_sub(1) as u64,
            mode,
        }
    }

    /// First recorded time whose running minimum is below `r`.
    pub fn tau_below(&self, r: u128) -> Option<u64> {
        self.records.iter().find(|&&(_, m)| m < r).map(|&(n, _)| n)
    }

    /// `m_n` for an arbitrary `n` covered by the record.
    pub fn min_at(&self, n: u64) -> Option<u128> {
        match self.records.partition_point(|&(t, _)| t <= n) {
            0 => None,
            i => Some(self.records[i - 1].1),
        }
    }
}

/// `n^alpha * m_n` along a record, with the minimum over its last half.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceStatistic {
    pub alpha: f64,
    pub values: Vec<(u64, f64)>,
    pub tail_min: f64,
}

/// The divergence diagnostic `liminf n^alpha min_{i <= n} d(y, T^i x)`: for
/// `alpha` above the inverse lower dimension at `y` it tends to infinity for
/// almost every `x`.
pub fn divergence_statistic(rec: &MinDistanceRecord, alpha: f64) -> Result<DivergenceStatistic> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must be > 0")));
    }
    let values: Vec<(u64, f64)> = rec
        .records
        .iter()
        .map(|&(n, m)| (n, (n as f64).powf(alpha) * fixed_len_to_f64(m)))
        .collect();
    let tail_min = values[values.len() / 2..]
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::INFINITY, f64::min);
    Ok(DivergenceStatistic {
        alpha,
        values,
        tail_min,
    })
}

/// Minimum of `n^alpha * m_n` over each decade `[10^j, 10^(j+1))` fully
/// covered by the record. Between records `m_n` is constant, so the minimum
/// sits at the decade start or at a record inside the decade.
pub fn decade_minima(rec: &MinDistanceRecord, alpha: f64) -> Vec<(u64, f64)> {
    let mut out = Vec::new();
    let mut lo = 1u64;
    while lo.saturating_mul(10) <= rec.n_max + 1 {
        let hi = lo * 10;
        let mut best = f64::INFINITY;
        if let Some(m) = rec.min_at(lo) {
            best = (lo as f64).powf(alpha) * fixed_len_to_f64(m);
        }
        for &(n, m) in rec.records.iter().filter(|&&(n, _)| n >= lo && n < hi) {
            best = best.min((n as f64).powf(alpha) * fixed_len_to_f64(m));
        }
        out.push((lo, best));
        lo = hi;
    }
    out
}

/// CSV header for [`profile_rows`].
pub const PROFILE_CSV_HEADER: &str = "system,x,y,k,tau_or_censored,n_max";

/// One CSV row per scale: `system, x, y, k, tau | CENSORED, n_max`.
pub fn profile_rows(system: &str, p: &HittingProfile) -> Vec<String> {
    p.schedule
        .ks()
        .zip(&p.tau)
        .map(|(k, t)| {
            let tau = t.map_or_else(|| "CENSORED".to_string(), |v| v.to_string());
            format!("{system},{},{},{k},{tau},{}", p.source, p.target, p.n_max)
        })
        .collect()
}
