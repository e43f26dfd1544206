//! Slope estimates of the recurrence indicators and local dimensions, and the
//! checks built on them: the dimension inequalities, the shift/Lipschitz/
//! Hölder properties of `R`, and the Hausdorff cover bound.
//!
//! Per-scale slopes are `s_k = log2(tau_k) / k` for recurrence and
//! `s_k = -log2(mu(B(y, 2^-k))) / k` for dimension. The limsup and liminf are
//! read off as the max and min of `s_k` over a tail window of scales.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::hitting::{batch_hitting, batch_hitting_stream, HitMode, HittingProfile, RadiusSchedule};
use crate::orbit::{build_grid_index, generate_orbit, occupation_counts, orbit_stream, GridIndex, OrbitBuffer};
use crate::systems::{sample_measure, step, substream_seed, Point, SystemSpec};

/// Version of every JSON report written by this crate.
pub const SCHEMA_VERSION: u32 = 1;

/// Fewest uncensored scales a slope estimate accepts.
pub const MIN_SCALES: usize = 4;

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`.
pub mod ext_f64 {
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

fn fmt_ext(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "INFINITE".into()
    } else {
        format!("{v:.6}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Quantity {
    /// `R(x, y)` from waiting times.
    #[serde(rename = "R")]
    Recurrence,
    /// `d(y)` from ball measures.
    #[serde(rename = "d")]
    Dimension,
}

/// Tail-window summary of per-scale slopes.
///
/// `sup_proxy` and `inf_proxy` estimate the limsup and liminf. When every
/// scale is censored, or a censored scale falls inside the tail window, the
/// quantity is infinite and all three slopes are `+inf`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeEstimate {
    pub quantity: Quantity,
    /// `(k, s_k)`; `None` marks a censored scale.
    pub per_scale_slopes: Vec<(u32, Option<f64>)>,
    pub tail_window: (u32, u32),
    #[serde(with = "ext_f64")]
    pub sup_proxy: f64,
    #[serde(with = "ext_f64")]
    pub inf_proxy: f64,
    /// Least squares slope of the log-values against `k` through the origin,
    /// over the tail window. It is a weighted mean of the `s_k`, so it stays
    /// between the two proxies.
    #[serde(with = "ext_f64")]
    pub ols_slope: f64,
    #[serde(with = "ext_f64")]
    pub ols_r2: f64,
    pub censored_scales: BTreeSet<u32>,
    pub infinite: bool,
}

impl SlopeEstimate {
    fn infinite(quantity: Quantity, per_scale_slopes: Vec<(u32, Option<f64>)>, tail_window: (u32, u32)) -> Self {
        let censored_scales = per_scale_slopes
            .iter()
            .filter(|(_, s)| s.is_none())
            .map(|&(k, _)| k)
            .collect();
        SlopeEstimate {
            quantity,
            per_scale_slopes,
            tail_window,
            sup_proxy: f64::INFINITY,
            inf_proxy: f64::INFINITY,
            ols_slope: f64::INFINITY,
            ols_r2: f64::NAN,
            censored_scales,
            infinite: true,
        }
    }
}

/// Slope proxies from per-scale log-values `L_k` (`log2 tau_k` or
/// `-log2 mu_k`), given as `(k, Some(L_k))` or `(k, None)` when censored.
///
/// The tail window is the last `ceil(len * tail_fraction)` scales.
pub fn slope_estimate(values: &[(u32, Option<f64>)], quantity: Quantity, tail_fraction: f64) -> Result<SlopeEstimate> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail_fraction = {tail_fraction} must be in (0, 1]"
        )));
    }
    if values.is_empty() {
        return Err(Error::InvalidSchedule("no scales".into()));
    }
    if values.windows(2).any(|w| w[1].0 <= w[0].0) || values[0].0 == 0 {
        return Err(Error::InvalidSchedule("scales must be positive and increasing".into()));
    }
    let slopes: Vec<(u32, Option<f64>)> = values
        .iter()
        .map(|&(k, v)| (k, v.map(|l| l / k as f64)))
        .collect();
    let w = ((values.len() as f64 * tail_fraction).ceil() as usize).clamp(1, values.len());
    let tail = &values[values.len() - w..];
    let window = (tail[0].0, tail[w - 1].0);
    let uncensored = values.iter().filter(|(_, v)| v.is_some()).count();
    if uncensored == 0 {
        return Ok(SlopeEstimate::infinite(quantity, slopes, window));
    }
    // an infinite waiting time at any tail scale makes the quantity infinite
    if tail.iter().any(|(_, v)| v.is_none()) {
        return Ok(SlopeEstimate::infinite(quantity, slopes, window));
    }
    if uncensored < MIN_SCALES {
        return Err(Error::TooFewScales {
            needed: MIN_SCALES,
            found: uncensored,
            censored: values.iter().filter(|(_, v)| v.is_none()).map(|&(k, _)| k).collect(),
        });
    }
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    let (mut skl, mut skk, mut sll) = (0.0, 0.0, 0.0);
    for &(k, v) in tail {
        let l = v.unwrap();
        let k = k as f64;
        let s = l / k;
        sup = sup.max(s);
        inf = inf.min(s);
        skl += k * l;
        skk += k * k;
        sll += l * l;
    }
    // clamp away rounding at the envelope
    let ols = (skl / skk).clamp(inf, sup);
    let sse: f64 = tail
        .iter()
        .map(|&(k, v)| {
            let r = v.unwrap() - ols * k as f64;
            r * r
        })
        .sum();
    let ols_r2 = if sll > 0.0 { 1.0 - sse / sll } else { 1.0 };
    Ok(SlopeEstimate {
        quantity,
        per_scale_slopes: slopes,
        tail_window: window,
        sup_proxy: sup,
        inf_proxy: inf,
        ols_slope: ols,
        ols_r2,
        censored_scales: BTreeSet::new(),
        infinite: false,
    })
}

/// `log2 tau_k` per scale. A hit at time 0 (sequence mode) counts as time 1.
pub fn recurrence_values(p: &HittingProfile) -> Vec<(u32, Option<f64>)> {
    p.schedule
        .ks()
        .zip(&p.tau)
        .map(|(k, t)| (k, t.map(|v| (v.max(1) as f64).log2())))
        .collect()
}

/// `-log2(count / n)` per scale; empty balls are censored.
pub fn occupation_values(counts: &[u64], n: usize, sched: &RadiusSchedule) -> Vec<(u32, Option<f64>)> {
    let ln = (n as f64).log2();
    sched
        .ks()
        .zip(counts)
        .map(|(k, &c)| (k, (c > 0).then(|| ln - (c as f64).log2())))
        .collect()
}

pub fn recurrence_estimate(p: &HittingProfile, tail_fraction: f64) -> Result<SlopeEstimate> {
    slope_estimate(&recurrence_values(p), Quantity::Recurrence, tail_fraction)
}

/// Local dimension at `y` from the empirical measure of `orb`.
pub fn dimension_estimate(
    orb: &OrbitBuffer,
    idx: &GridIndex,
    y: &Point,
    sched: &RadiusSchedule,
    tail_fraction: f64,
) -> Result<SlopeEstimate> {
    let counts = occupation_counts(orb, idx, y, sched);
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::OutsideSupport);
    }
    slope_estimate(&occupation_values(&counts, orb.len(), sched), Quantity::Dimension, tail_fraction)
}

/// Grid resolution for an index over `n` points: about four points per cell,
/// never finer than the finest radius.
pub fn default_grid_log2(n: usize, dim: usize, sched: &RadiusSchedule) -> u32 {
    let g = ((n.max(2) as f64).log2() - 2.0) / dim as f64;
    (g.floor() as u32).clamp(1, sched.k_max.min(crate::orbit::DEFAULT_MAX_CELLS_LOG2 / dim as u32))
}

/// Reference sample for dimension estimates: a Birkhoff orbit when the
/// declared measure is invariant, independent draws from it otherwise.
pub fn reference_sample(sys: &SystemSpec, n: usize, burn_in: u64, seed: u64) -> Result<OrbitBuffer> {
    if sys.measure_is_invariant() {
        let start = sample_measure(sys, 1, substream_seed(seed, "reference"))?[0];
        generate_orbit(sys, &start, burn_in, n)
    } else {
        let s = substream_seed(seed, "reference");
        Ok(OrbitBuffer::from_samples(sys.clone(), sample_measure(sys, n, s)?, s))
    }
}

/// Compact view of an estimate for reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    #[serde(with = "ext_f64")]
    pub sup: f64,
    #[serde(with = "ext_f64")]
    pub inf: f64,
    #[serde(with = "ext_f64")]
    pub ols: f64,
    pub infinite: bool,
}

impl From<&SlopeEstimate> for Summary {
    fn from(e: &SlopeEstimate) -> Self {
        Summary {
            sup: e.sup_proxy,
            inf: e.inf_proxy,
            ols: e.ols_slope,
            infinite: e.infinite,
        }
    }
}

/// An estimate, or the reason none is available.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Estimate(Summary),
    Excluded(String),
}

impl Outcome {
    fn of(r: &Result<SlopeEstimate>) -> Self {
        match r {
            Ok(e) => Outcome::Estimate(e.into()),
            Err(e) => Outcome::Excluded(e.to_string()),
        }
    }

    /// The estimate when every tail scale is uncensored.
    pub fn finite(&self) -> Option<&Summary> {
        match self {
            Outcome::Estimate(s) if !s.infinite => Some(s),
            _ => None,
        }
    }

    pub fn summary(&self) -> Option<&Summary> {
        match self {
            Outcome::Estimate(s) => Some(s),
            Outcome::Excluded(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TargetRecord {
    pub index: usize,
    pub y: String,
    pub d: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairRecord {
    pub source: usize,
    pub target: usize,
    pub r: Outcome,
    /// `R_inf >= d_inf - tol`, when both are finite.
    pub lower_ok: Option<bool>,
    /// `R_sup >= d_sup - tol`, when both are finite.
    pub upper_ok: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagonalRecord {
    pub source: usize,
    pub x: String,
    pub r: Outcome,
    pub d: Outcome,
    /// `R_sup(x, x) <= d_sup(x) + tol`, when both are finite.
    pub ok: Option<bool>,
}

/// Pass fraction over the records where the check applies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fraction {
    pub passed: usize,
    pub evaluated: usize,
    pub excluded: usize,
    pub fraction: Option<f64>,
}

impl Fraction {
    fn of(checks: impl Iterator<Item = Option<bool>>) -> Self {
        let (mut passed, mut evaluated, mut excluded) = (0, 0, 0);
        for c in checks {
            match c {
                Some(ok) => {
                    evaluated += 1;
                    passed += ok as usize;
                }
                None => excluded += 1,
            }
        }
        Fraction {
            passed,
            evaluated,
            excluded,
            fraction: (evaluated > 0).then(|| passed as f64 / evaluated as f64),
        }
    }

    /// `None` counts as a failure of the threshold.
    pub fn at_least(&self, threshold: f64) -> bool {
        self.fraction.is_some_and(|f| f >= threshold)
    }
}

/// Sampled check of `R >= d` off the diagonal and `R(x, x) <= d(x)` on it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub schema_version: u32,
    pub system: String,
    pub invariant: bool,
    /// `"holds almost everywhere"` for invariant measures, `"may fail"` otherwise.
    pub expectation: String,
    pub orbit_len: usize,
    pub schedule: RadiusSchedule,
    pub tail_fraction: f64,
    pub tolerance: f64,
    pub targets: Vec<TargetRecord>,
    pub pairs: Vec<PairRecord>,
    pub diagonal: Vec<DiagonalRecord>,
    pub lower: Fraction,
    pub upper: Fraction,
    pub diagonal_pass: Fraction,
}

impl InequalityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned-column summary.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let frac = |f: &Fraction| match f.fraction {
            Some(v) => format!("{v:.4} ({}/{}, {} excluded)", f.passed, f.evaluated, f.excluded),
            None => format!("n/a (0 evaluated, {} excluded)", f.excluded),
        };
        let _ = writeln!(out, "system            {}", self.system);
        let _ = writeln!(out, "invariant         {} ({})", self.invariant, self.expectation);
        let _ = writeln!(out, "orbit length      {}", self.orbit_len);
        let _ = writeln!(out, "scales            {}..{}", self.schedule.k_min, self.schedule.k_max);
        let _ = writeln!(out, "tolerance         {}", self.tolerance);
        let _ = writeln!(out, "R_inf >= d_inf    {}", frac(&self.lower));
        let _ = writeln!(out, "R_sup >= d_sup    {}", frac(&self.upper));
        let _ = writeln!(out, "R(x,x) <= d(x)    {}", frac(&self.diagonal_pass));
        let _ = writeln!(out);
        let _ = writeln!(out, "{:>6} {:>12} {:>12} {:>12}", "target", "d_sup", "d_inf", "d_ols");
        for t in &self.targets {
            match t.d.summary() {
                Some(s) => {
                    let _ = writeln!(
                        out,
                        "{:>6} {:>12} {:>12} {:>12}",
                        t.index,
                        fmt_ext(s.sup),
                        fmt_ext(s.inf),
                        fmt_ext(s.ols)
                    );
                }
                None => {
                    let _ = writeln!(out, "{:>6} {:>12}", t.index, "excluded");
                }
            }
        }
        out
    }
}

/// Everything computed for an inequality report, including raw profiles.
#[derive(Clone, Debug)]
pub struct InequalityStudy {
    pub report: InequalityReport,
    pub sources: Vec<Point>,
    pub targets: Vec<Point>,
    /// `profiles[s]` holds the target profiles of source `s` followed by its
    /// return-time profile.
    pub profiles: Vec<Vec<HittingProfile>>,
    pub pair_estimates: Vec<Vec<Result<SlopeEstimate>>>,
    pub target_estimates: Vec<Result<SlopeEstimate>>,
    pub source_estimates: Vec<Result<SlopeEstimate>>,
}

/// Parameters of an inequality study.
#[derive(Clone, Debug)]
pub struct InequalityParams {
    pub n_sources: usize,
    pub n_targets: usize,
    pub schedule: RadiusSchedule,
    pub orbit_len: usize,
    pub burn_in: u64,
    pub tolerance: f64,
    pub tail_fraction: f64,
    pub seed: u64,
    /// Sources appended after the sampled ones.
    pub extra_sources: Vec<Point>,
    /// Targets appended after the sampled ones.
    pub extra_targets: Vec<Point>,
    pub exec: Exec,
}

/// Samples sources and targets from the declared measure, measures every
/// waiting time and return time, and estimates the local dimensions from a
/// reference sample of the same length.
pub fn inequality_study(sys: &SystemSpec, p: &InequalityParams) -> Result<InequalityStudy> {
    if p.n_sources + p.extra_sources.len() == 0 {
        return Err(Error::InvalidParameter("at least one source is required".into()));
    }
    if p.n_targets + p.extra_targets.len() == 0 {
        return Err(Error::InvalidParameter("at least one target is required".into()));
    }
    if !(p.tolerance >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance = {} must be >= 0", p.tolerance)));
    }
    for y in &p.extra_targets {
        if !sys.metric().accepts(y.space()) {
            return Err(Error::DomainViolation {
                system: sys.name().into(),
                point: y.to_string(),
            });
        }
    }
    for x in &p.extra_sources {
        sys.check_domain(x)?;
    }
    let mut starts = if p.n_sources > 0 {
        sample_measure(sys, p.n_sources, substream_seed(p.seed, "sources"))?
    } else {
        Vec::new()
    };
    starts.extend(p.extra_sources.iter().copied());
    let mut targets = if p.n_targets > 0 {
        sample_measure(sys, p.n_targets, substream_seed(p.seed, "targets"))?
    } else {
        Vec::new()
    };
    targets.extend(p.extra_targets.iter().copied());

    let sched = p.schedule;
    let runs = exec::map(p.exec, &starts, |_, start| -> Result<(Point, Vec<HittingProfile>)> {
        let mut it = orbit_stream(sys, start, p.burn_in)?.peekable();
        let x = *it.peek().expect("orbit streams are infinite");
        let mut ys = targets.clone();
        ys.push(x);
        let profiles = batch_hitting_stream(it, p.orbit_len, &x, &ys, &sched, HitMode::Dynamical);
        Ok((x, profiles))
    });
    let mut sources = Vec::with_capacity(runs.len());
    let mut profiles = Vec::with_capacity(runs.len());
    for r in runs {
        let (x, ps) = r?;
        sources.push(x);
        profiles.push(ps);
    }

    let reference = reference_sample(sys, p.orbit_len, p.burn_in, p.seed)?;
    let idx = build_grid_index(&reference, default_grid_log2(reference.len(), sys.dim(), &sched))?;
    let dim_at = |y: &Point| dimension_estimate(&reference, &idx, y, &sched, p.tail_fraction);
    let target_estimates: Vec<Result<SlopeEstimate>> = exec::map(p.exec, &targets, |_, y| dim_at(y));
    let source_estimates: Vec<Result<SlopeEstimate>> = exec::map(p.exec, &sources, |_, x| dim_at(x));
    drop(reference);

    let pair_estimates: Vec<Vec<Result<SlopeEstimate>>> = profiles
        .iter()
        .map(|ps| ps.iter().map(|pr| recurrence_estimate(pr, p.tail_fraction)).collect())
        .collect();

    let tol = p.tolerance;
    let d_outcomes: Vec<Outcome> = target_estimates.iter().map(Outcome::of).collect();
    let target_records: Vec<TargetRecord> = targets
        .iter()
        .zip(&d_outcomes)
        .enumerate()
        .map(|(i, (y, d))| TargetRecord {
            index: i,
            y: y.to_string(),
            d: d.clone(),
        })
        .collect();
    let mut pairs = Vec::new();
    let mut diagonal = Vec::new();
    for (s, ests) in pair_estimates.iter().enumerate() {
        for (t, d) in d_outcomes.iter().enumerate() {
            let r = Outcome::of(&ests[t]);
            let both = r.finite().zip(d.finite());
            pairs.push(PairRecord {
                source: s,
                target: t,
                lower_ok: both.map(|(r, d)| r.inf >= d.inf - tol),
                upper_ok: both.map(|(r, d)| r.sup >= d.sup - tol),
                r,
            });
        }
        let r = Outcome::of(&ests[targets.len()]);
        let d = Outcome::of(&source_estimates[s]);
        let ok = r.finite().zip(d.finite()).map(|(r, d)| r.sup <= d.sup + tol);
        diagonal.push(DiagonalRecord {
            source: s,
            x: sources[s].to_string(),
            r,
            d,
            ok,
        });
    }
    let invariant = sys.measure_is_invariant();
    let report = InequalityReport {
        schema_version: SCHEMA_VERSION,
        system: sys.name().into(),
        invariant,
        expectation: if invariant { "holds almost everywhere" } else { "may fail" }.into(),
        orbit_len: p.orbit_len,
        schedule: sched,
        tail_fraction: p.tail_fraction,
        tolerance: tol,
        lower: Fraction::of(pairs.iter().map(|r| r.lower_ok)),
        upper: Fraction::of(pairs.iter().map(|r| r.upper_ok)),
        diagonal_pass: Fraction::of(diagonal.iter().map(|r| r.ok)),
        targets: target_records,
        pairs,
        diagonal,
    };
    Ok(InequalityStudy {
        report,
        sources,
        targets,
        profiles,
        pair_estimates,
        target_estimates,
        source_estimates,
    })
}

pub fn inequality_report(sys: &SystemSpec, p: &InequalityParams) -> Result<InequalityReport> {
    Ok(inequality_study(sys, p)?.report)
}

/// CSV header for [`slope_rows`].
pub const SLOPE_CSV_HEADER: &str = "quantity,source,target,k,slope";

/// Per-scale slopes of one estimate as CSV rows; `source` or `target` may be
/// empty when not applicable.
pub fn slope_rows(e: &SlopeEstimate, source: &str, target: &str) -> Vec<String> {
    let q = match e.quantity {
        Quantity::Recurrence => "R",
        Quantity::Dimension => "d",
    };
    e.per_scale_slopes
        .iter()
        .map(|(k, s)| {
            let v = s.map_or_else(|| "CENSORED".to_string(), |v| v.to_string());
            format!("{q},{source},{target},{k},{v}")
        })
        .collect()
}

/// The Hausdorff cover bound for `{y : R_inf(x, y) <= h}` and its empirical
/// counterpart on a grid of targets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverEstimate {
    pub schema_version: u32,
    pub h: f64,
    pub epsilon: f64,
    pub d: f64,
    pub k_range: (u32, u32),
    pub k0: u32,
    /// Tail bound `sum_{k >= j} 2^(k(h + eps - d) + 1 + d)` for each `j` in
    /// the scale range.
    pub cover_mass: Vec<(u32, f64)>,
    /// Closed form of the tail from `k0`.
    pub tail_bound: f64,
    /// The same tail summed term by term.
    pub direct_sum: f64,
    pub relative_discrepancy: f64,
    pub grid_points: usize,
    /// Grid targets without a usable estimate.
    pub excluded: usize,
    /// Indices of grid targets with `R_inf <= h`.
    pub y_h: Vec<usize>,
    /// `(k, fraction of y_h hit by time 2^((h + eps) k) at radius 2^-k)`.
    pub coverage: Vec<(u32, Option<f64>)>,
    /// Fraction of `y_h` covered at some tail-window scale.
    pub covered_in_tail: Option<f64>,
}

impl CoverEstimate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cover serializes")
    }

    /// Coverage at the deepest scale of the range.
    pub fn deepest_coverage(&self) -> Option<f64> {
        self.coverage.last().and_then(|&(_, c)| c)
    }
}

/// Closed-form tail `sum_{k >= k0} 2^(1 + d) 2^(k (h + eps - d))`.
pub fn cover_tail_bound(h: f64, epsilon: f64, d: f64, k0: u32) -> Result<f64> {
    let q = h + epsilon - d;
    if q >= 0.0 {
        return Err(Error::DivergentCover { d, h_eps: h + epsilon });
    }
    Ok((1.0 + d).exp2() * (k0 as f64 * q).exp2() / (1.0 - q.exp2()))
}

/// The same tail summed term by term with compensated summation.
pub fn cover_tail_direct(h: f64, epsilon: f64, d: f64, k0: u32) -> Result<f64> {
    let q = h + epsilon - d;
    if q >= 0.0 {
        return Err(Error::DivergentCover { d, h_eps: h + epsilon });
    }
    let c = (1.0 + d).exp2();
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let mut k = k0 as f64;
    loop {
        let term = c * (k * q).exp2();
        if term <= sum * 1e-18 || term == 0.0 {
            break;
        }
        let yv = term - comp;
        let t = sum + yv;
        comp = (t - sum) - yv;
        sum = t;
        k += 1.0;
    }
    Ok(sum)
}

/// Cover check over `profiles`, one per grid target, all sharing a schedule.
///
/// A target enters `Y_h` when its `R_inf` proxy is at most `h`. At scale `k`
/// it is covered when the first `2^((h + eps) k)` orbit points already reach
/// its `2^-k` ball, that is when `tau_k <= 2^((h + eps) k)`.
pub fn cover_dimension_bound(
    profiles: &[HittingProfile],
    h: f64,
    epsilon: f64,
    d: f64,
    k0: u32,
    tail_fraction: f64,
) -> Result<CoverEstimate> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be > 0")));
    }
    let tail_bound = cover_tail_bound(h, epsilon, d, k0)?;
    let direct_sum = cover_tail_direct(h, epsilon, d, k0)?;
    let first = profiles
        .first()
        .ok_or_else(|| Error::InvalidParameter("cover check needs grid targets".into()))?;
    let sched = first.schedule;
    let cover_mass = sched
        .ks()
        .map(|j| cover_tail_bound(h, epsilon, d, j).map(|b| (j, b)))
        .collect::<Result<Vec<_>>>()?;
    let mut excluded = 0;
    let mut y_h = Vec::new();
    let mut window = (sched.k_min, sched.k_max);
    for (i, p) in profiles.iter().enumerate() {
        match recurrence_estimate(p, tail_fraction) {
            Ok(e) => {
                window = e.tail_window;
                if !e.infinite && e.inf_proxy <= h {
                    y_h.push(i);
                }
            }
            Err(_) => excluded += 1,
        }
    }
    let budget = |k: u32| ((h + epsilon) * k as f64).exp2();
    let covered = |i: usize, k: u32| profiles[i].tau_at(k).is_some_and(|t| (t as f64) <= budget(k));
    let frac = |n: usize| (!y_h.is_empty()).then(|| n as f64 / y_h.len() as f64);
    let coverage = sched
        .ks()
        .map(|k| (k, frac(y_h.iter().filter(|&&i| covered(i, k)).count())))
        .collect();
    let covered_in_tail = frac(
        y_h.iter()
            .filter(|&&i| (window.0..=window.1).any(|k| covered(i, k)))
            .count(),
    );
    Ok(CoverEstimate {
        schema_version: SCHEMA_VERSION,
        h,
        epsilon,
        d,
        k_range: (sched.k_min, sched.k_max),
        k0,
        cover_mass,
        tail_bound,
        direct_sum,
        relative_discrepancy: ((tail_bound - direct_sum) / tail_bound).abs(),
        grid_points: profiles.len(),
        excluded,
        y_h,
        coverage,
        covered_in_tail,
    })
}

/// The dyadic grid `{j 2^-g}` (per axis) of the system's space.
pub fn dyadic_grid(sys: &SystemSpec, g: u32) -> Result<Vec<Point>> {
    if g == 0 || g > 24 {
        return Err(Error::InvalidParameter(format!("grid resolution 2^-{g} out of range")));
    }
    let side = 1u64 << g;
    let unit = |j: u64| j as f64 / side as f64;
    let pts = match sys.space() {
        crate::systems::Space::Circle => (0..side)
            .map(|j| Point::Circle(crate::numerics::Fixed((j as u128) << (128 - g))))
            .collect(),
        crate::systems::Space::Torus => (0..side)
            .flat_map(|b| (0..side).map(move |a| Point::Torus(a << (64 - g), b << (64 - g))))
            .collect(),
        crate::systems::Space::Interval | crate::systems::Space::Cantor => {
            (0..side).map(|j| Point::Interval(unit(j))).collect()
        }
    };
    Ok(pts)
}

/// Outcome of the three clauses of the basic properties of `R`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecurrencePropertiesReport {
    pub schema_version: u32,
    pub system: String,
    pub orbit_len: usize,
    pub schedule: RadiusSchedule,
    pub tolerance: f64,
    /// `2 / k_max`.
    pub shift_bound: f64,
    /// Largest of `|sup - sup'|`, `|inf - inf'|`, `|ols - ols'|` between
    /// `(x, y)` and `(T x, y)`.
    pub shift_max_deviation: f64,
    pub shift: Fraction,
    /// `R(x, y) >= R(x, T y) - tol` for both proxies.
    pub lipschitz: Fraction,
    /// The same for the sup proxy alone.
    pub lipschitz_sup: Fraction,
    /// The same for the inf proxy alone.
    pub lipschitz_inf: Fraction,
}

/// Checks `R(x, y) = R(T x, y)` and `R(x, y) >= R(x, T y)` at the proxy level
/// on `n_pairs` pairs drawn from the declared measure.
pub fn recurrence_properties_check(
    sys: &SystemSpec,
    n_pairs: usize,
    sched: &RadiusSchedule,
    orbit_len: usize,
    tol: f64,
    tail_fraction: f64,
    seed: u64,
    exec: Exec,
) -> Result<RecurrencePropertiesReport> {
    if !sys.is_map() {
        return Err(Error::InvalidParameter("the checks need a map".into()));
    }
    if n_pairs == 0 || orbit_len < 2 {
        return Err(Error::InvalidParameter("need pairs and an orbit of length >= 2".into()));
    }
    let xs = sample_measure(sys, n_pairs, substream_seed(seed, "sources"))?;
    let ys = sample_measure(sys, n_pairs, substream_seed(seed, "targets"))?;
    let idx: Vec<usize> = (0..n_pairs).collect();
    let bound = 2.0 / sched.k_max as f64;
    type PairOut = (Option<f64>, Option<(bool, bool)>);
    let results = exec::map(exec, &idx, |_, &i| -> Result<PairOut> {
        let orb = generate_orbit(sys, &xs[i], 0, orbit_len + 1)?;
        let y = ys[i];
        let ty = step(sys, &y)?;
        let at_x = batch_hitting(&orb.points, &[y, ty], sched, HitMode::Dynamical, Exec::Sequential);
        let at_tx = batch_hitting(&orb.points[1..], &[y], sched, HitMode::Dynamical, Exec::Sequential);
        let est = |p: &HittingProfile| recurrence_estimate(p, tail_fraction).ok().filter(|e| !e.infinite);
        let (e_xy, e_xty, e_txy) = (est(&at_x[0]), est(&at_x[1]), est(&at_tx[0]));
        let shift = e_xy.as_ref().zip(e_txy.as_ref()).map(|(a, b)| {
            (a.sup_proxy - b.sup_proxy)
                .abs()
                .max((a.inf_proxy - b.inf_proxy).abs())
                .max((a.ols_slope - b.ols_slope).abs())
        });
        let lip = e_xy
            .as_ref()
            .zip(e_xty.as_ref())
            .map(|(a, b)| (a.sup_proxy >= b.sup_proxy - tol, a.inf_proxy >= b.inf_proxy - tol));
        Ok((shift, lip))
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let shift_max_deviation = results
        .iter()
        .filter_map(|r| r.0)
        .fold(0.0, f64::max);
    Ok(RecurrencePropertiesReport {
        schema_version: SCHEMA_VERSION,
        system: sys.name().into(),
        orbit_len,
        schedule: *sched,
        tolerance: tol,
        shift_bound: bound,
        shift_max_deviation,
        shift: Fraction::of(results.iter().map(|r| r.0.map(|d| d <= bound))),
        lipschitz: Fraction::of(results.iter().map(|r| r.1.map(|(a, b)| a && b))),
        lipschitz_sup: Fraction::of(results.iter().map(|r| r.1.map(|(a, _)| a))),
        lipschitz_inf: Fraction::of(results.iter().map(|r| r.1.map(|(_, b)| b))),
    })
}

/// The Hölder clause `R(x, y) >= alpha R(x, T y) - tol` for `x -> x^2` on
/// `[0, 1]`, with targets drawn from `[0, 2^-k_max)` so that the orbit,
/// which collapses onto 0, enters every ball of the schedule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolderReport {
    pub schema_version: u32,
    pub alpha: f64,
    pub tolerance: f64,
    pub clause: Fraction,
}

pub fn holder_check(
    n_pairs: usize,
    sched: &RadiusSchedule,
    orbit_len: usize,
    alpha: f64,
    tol: f64,
    tail_fraction: f64,
    seed: u64,
) -> Result<HolderReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must be in (0, 1]")));
    }
    let sys = SystemSpec::square();
    let xs = sample_measure(&sys, n_pairs, substream_seed(seed, "sources"))?;
    let scale = (-(sched.k_max as f64)).exp2();
    let ys: Vec<Point> = sample_measure(&sys, n_pairs, substream_seed(seed, "targets"))?
        .into_iter()
        .map(|p| Point::Interval(p.coords()[0] * scale))
        .collect();
    let mut checks = Vec::with_capacity(n_pairs);
    for (x, y) in xs.iter().zip(&ys) {
        let orb = generate_orbit(&sys, x, 0, orbit_len)?;
        let ty = step(&sys, y)?;
        let ps = batch_hitting(&orb.points, &[*y, ty], sched, HitMode::Dynamical, Exec::Sequential);
        let est = |p: &HittingProfile| recurrence_estimate(p, tail_fraction).ok().filter(|e| !e.infinite);
        checks.push(
            est(&ps[0])
                .zip(est(&ps[1]))
                .map(|(a, b)| a.sup_proxy >= alpha * b.sup_proxy - tol && a.inf_proxy >= alpha * b.inf_proxy - tol),
        );
    }
    Ok(HolderReport {
        schema_version: SCHEMA_VERSION,
        alpha,
        tolerance: tol,
        clause: Fraction::of(checks.into_iter()),
    })
}
