//! The acceptance criteria as library functions.
//!
//! Each criterion returns a [`CriterionResult`] whose `output` holds the
//! serialized numbers it was judged on; determinism compares those strings
//! across runs.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ExperimentConfig, Validated};
use crate::error::{Error, Result};
use crate::estimators::{
    cover_dimension_bound, dyadic_grid, holder_check, inequality_study, recurrence_properties_check, recurrence_estimate,
    Fraction, Summary,
};
use crate::exec::{self, Exec};
use crate::hitting::{
    batch_hitting, batch_hitting_stream, hitting_bruteforce, hitting_profile, hitting_single_pass, HitMode,
    RadiusSchedule,
};
use crate::numerics::{ContinuedFraction, Fixed};
use crate::orbit::{build_grid_index, generate_orbit, occupation_counts, occupation_counts_linear, orbit_stream};
use crate::systems::{
    dist_fixed, noninvariant_counterexample, sample_measure, substream_seed, Arithmetic, Point, SystemSpec,
};

/// `log 2 / log 3`.
pub const CANTOR_DIMENSION: f64 = std::f64::consts::LN_2 / 1.098_612_288_668_109_8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    /// The criterion could not be evaluated at all.
    pub errored: bool,
    pub summary: String,
    /// Serialized numbers the verdict rests on.
    #[serde(skip)]
    pub output: String,
    pub seconds: f64,
    pub limit_seconds: Option<f64>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let limit = self.limit_seconds.map_or_else(|| "-".to_string(), |l| format!("{l:.0}s"));
        format!(
            "criterion {:>2} {} {:<34} {} [{:.1}s, limit {}]",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.summary,
            self.seconds,
            limit
        )
    }
}

pub const NAMES: [&str; 10] = [
    "golden rotation recurrence",
    "type-2 rotation recurrence",
    "dimension sandwich",
    "cantor measure dimension",
    "non-invariant counterexample",
    "rational rotation infinity",
    "oracle equivalence",
    "shift and lipschitz properties",
    "cover bound",
    "determinism",
];

const LIMITS: [Option<f64>; 10] = [
    Some(60.0),
    Some(90.0),
    Some(300.0),
    Some(60.0),
    Some(5.0),
    Some(1.0),
    Some(30.0),
    Some(60.0),
    Some(60.0),
    None,
];

struct Verdict {
    passed: bool,
    summary: String,
    output: String,
}

fn fmt_frac(f: &Fraction) -> String {
    f.fraction.map_or_else(|| "n/a".into(), |v| format!("{v:.2}"))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("criterion output serializes")
}

fn load(name: &str) -> Result<(ExperimentConfig, Validated)> {
    let cfg = ExperimentConfig::bundled(name)?;
    let v = cfg.validate()?;
    Ok((cfg, v))
}

/// Runs criterion `id` (1 to 9).
pub fn criterion(id: u32, exec: Exec) -> CriterionResult {
    let t = Instant::now();
    let verdict = match id {
        1 => c1_golden(exec),
        2 => c2_type2(exec),
        3 => c3_sandwich(exec),
        4 => c4_cantor(exec),
        5 => c5_counterexample(exec),
        6 => c6_rational(exec),
        7 => c7_oracles(exec),
        8 => c8_properties(exec),
        9 => c9_cover(exec),
        _ => Err(Error::InvalidParameter(format!("no criterion {id}"))),
    };
    let seconds = t.elapsed().as_secs_f64();
    let idx = (id as usize).clamp(1, 10) - 1;
    let limit_seconds = LIMITS[idx];
    let errored = verdict.is_err();
    let (passed, summary, output) = match verdict {
        Ok(v) => (v.passed, v.summary, v.output),
        Err(e) => (false, format!("error: {e}"), format!("error: {e}")),
    };
    let in_time = limit_seconds.is_none_or(|l| seconds <= l);
    CriterionResult {
        id,
        name: NAMES[idx].into(),
        passed: passed && in_time,
        errored,
        summary: if in_time { summary } else { format!("{summary}; over time limit") },
        output,
        seconds,
        limit_seconds,
    }
}

/// Criteria 1 to 9 in order.
pub fn run_all(exec: Exec) -> Vec<CriterionResult> {
    (1..=9).map(|id| criterion(id, exec)).collect()
}

/// Criterion 10 from two complete runs.
pub fn determinism(a: &[CriterionResult], b: &[CriterionResult], labels: (&str, &str)) -> CriterionResult {
    let differing: Vec<u32> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| x.output != y.output)
        .map(|(x, _)| x.id)
        .collect();
    let passed = differing.is_empty() && a.len() == b.len();
    CriterionResult {
        id: 10,
        name: NAMES[9].into(),
        passed,
        errored: false,
        summary: if passed {
            format!("{} outputs byte-identical between {} and {}", a.len(), labels.0, labels.1)
        } else {
            format!("outputs differ for criteria {differing:?}")
        },
        output: String::new(),
        seconds: 0.0,
        limit_seconds: None,
    }
}

/// Runs `f` on a dedicated pool of `threads` workers.
#[cfg(feature = "parallel")]
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

/// Without the `parallel` feature there is one worker whatever is asked.
#[cfg(not(feature = "parallel"))]
pub fn with_threads<R: Send>(_threads: usize, f: impl FnOnce() -> R + Send) -> R {
    f()
}

/// All ten criteria: one run on 8 workers, a second on 1 worker, then the
/// comparison of the two.
pub fn full_suite() -> Vec<CriterionResult> {
    let a = with_threads(8, || run_all(Exec::Parallel));
    let b = with_threads(1, || run_all(Exec::Parallel));
    let d = determinism(&a, &b, ("8 workers", "1 worker"));
    let mut out = a;
    out.push(d);
    out
}

#[derive(Serialize)]
struct PairOut {
    x: String,
    y: String,
    r: Option<Summary>,
}

/// One orbit per (source i, target i) pair, both drawn from the measure.
fn paired_recurrence(cfg: &ExperimentConfig, v: &Validated, exec: Exec) -> Result<Vec<PairOut>> {
    let n = cfg.sources.min(cfg.targets);
    let xs = sample_measure(&v.system, n, substream_seed(cfg.seed, "sources"))?;
    let ys = sample_measure(&v.system, n, substream_seed(cfg.seed, "targets"))?;
    let pairs: Vec<(Point, Point)> = xs.into_iter().zip(ys).collect();
    exec::map(exec, &pairs, |_, (x, y)| -> Result<PairOut> {
        let it = orbit_stream(&v.system, x, cfg.burn_in())?;
        let p = hitting_single_pass(it, cfg.n, x, y, &v.schedule, HitMode::Dynamical);
        let r = recurrence_estimate(&p, cfg.tail_fraction)
            .ok()
            .filter(|e| !e.infinite)
            .map(|e| Summary::from(&e));
        Ok(PairOut {
            x: x.to_string(),
            y: y.to_string(),
            r,
        })
    })
    .into_iter()
    .collect()
}

fn c1_golden(exec: Exec) -> Result<Verdict> {
    let (cfg, v) = load("golden_rotation.cfg")?;
    let pairs = paired_recurrence(&cfg, &v, exec)?;
    let ok = |s: &Summary| (s.sup - 1.0).abs() <= 0.1 && (s.inf - 1.0).abs() <= 0.1;
    let sup_ok = pairs.iter().filter(|p| p.r.as_ref().is_some_and(|s| (s.sup - 1.0).abs() <= 0.1)).count();
    let inf_ok = pairs.iter().filter(|p| p.r.as_ref().is_some_and(|s| (s.inf - 1.0).abs() <= 0.1)).count();
    let both = pairs.iter().filter(|p| p.r.as_ref().is_some_and(ok)).count();
    let frac = both as f64 / pairs.len() as f64;
    Ok(Verdict {
        passed: frac >= 0.9,
        summary: format!(
            "both proxies in 1 +- 0.1 for {both}/{} pairs ({frac:.2}, need 0.90); sup ok {sup_ok}, inf ok {inf_ok}",
            pairs.len()
        ),
        output: json(&pairs),
    })
}

fn c2_type2(exec: Exec) -> Result<Verdict> {
    let (cfg, v) = load("type2_rotation.cfg")?;
    let pairs = paired_recurrence(&cfg, &v, exec)?;
    let n = pairs.len() as f64;
    let count = |f: &dyn Fn(&Summary) -> bool| pairs.iter().filter(|p| p.r.as_ref().is_some_and(f)).count();
    let sep_inf = count(&|s| s.sup - s.inf >= 0.5 && (s.inf - 1.0).abs() <= 0.15);
    let sep = count(&|s| s.sup - s.inf >= 0.5);
    let inf = count(&|s| (s.inf - 1.0).abs() <= 0.15);
    let sup16 = count(&|s| s.sup >= 1.6);
    let frac = sep_inf as f64 / n;
    Ok(Verdict {
        passed: frac >= 0.8,
        summary: format!(
            "separation >= 0.5 with R_inf in 1 +- 0.15 for {sep_inf}/{} ({frac:.2}, need 0.80); separation {sep}, R_inf {inf}, R_sup >= 1.6 {sup16}",
            pairs.len()
        ),
        output: json(&pairs),
    })
}

fn c3_sandwich(exec: Exec) -> Result<Verdict> {
    let mut parts = Vec::new();
    let mut passed = true;
    let mut outputs = Vec::new();
    for name in ["doubling.cfg", "cat_map.cfg"] {
        let (cfg, v) = load(name)?;
        let study = inequality_study(&v.system, &cfg.params(&v, exec))?;
        let r = &study.report;
        let f = |x: &Fraction| x.fraction.map_or("n/a".into(), |v| format!("{v:.3}"));
        passed &= r.lower.at_least(0.95) && r.diagonal_pass.at_least(0.95);
        parts.push(format!(
            "{}: lower {} ({} excl), diagonal {} ({} excl)",
            r.system,
            f(&r.lower),
            r.lower.excluded,
            f(&r.diagonal_pass),
            r.diagonal_pass.excluded
        ));
        outputs.push(r.to_json());
    }
    Ok(Verdict {
        passed,
        summary: format!("{}; need 0.95", parts.join("; ")),
        output: outputs.join("\n"),
    })
}

fn c4_cantor(exec: Exec) -> Result<Verdict> {
    let (cfg, v) = load("cantor.cfg")?;
    let study = inequality_study(&v.system, &cfg.params(&v, exec))?;
    let r = &study.report;
    let n = study.targets.len();
    let mut d_ok = 0;
    let mut r_ok = 0;
    let mut d_vals = Vec::new();
    for t in 0..n {
        let d = r.targets[t].d.finite().map(|s| s.ols);
        d_vals.push(d);
        if let Some(d) = d {
            if (d - CANTOR_DIMENSION).abs() <= 0.05 {
                d_ok += 1;
            }
            if r.pairs[t].r.finite().is_some_and(|s| s.ols >= d - 0.1) {
                r_ok += 1;
            }
        }
    }
    let mut sorted: Vec<f64> = d_vals.iter().flatten().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let median = sorted.get(sorted.len() / 2).copied().unwrap_or(f64::NAN);
    let (fd, fr) = (d_ok as f64 / n as f64, r_ok as f64 / n as f64);
    Ok(Verdict {
        passed: fd >= 0.9 && fr >= 0.9,
        summary: format!(
            "d in {CANTOR_DIMENSION:.4} +- 0.05 for {d_ok}/{n} ({fd:.2}), median d {median:.4}; R >= d - 0.1 for {r_ok}/{n} ({fr:.2}); need 0.90"
        ),
        output: r.to_json(),
    })
}

fn c5_counterexample(exec: Exec) -> Result<Verdict> {
    let (cfg, v) = load("counterexample.cfg")?;
    let study = inequality_study(&v.system, &cfg.params(&v, exec))?;
    let r = &study.report;
    let y0 = study.targets.len() - 1;
    let pair = &r.pairs[y0];
    let r_sup = pair.r.finite().map(|s| s.sup);
    let d = r.targets[y0].d.finite().map(|s| s.ols);
    let passed = !r.invariant && r_sup == Some(0.0) && d.is_some_and(|d| d >= 0.9) && pair.upper_ok == Some(false);
    Ok(Verdict {
        passed,
        summary: format!(
            "invariant = {}, R_sup(x, y0) = {:?}, d(y0) = {:?}, upper inequality holds = {:?}",
            r.invariant, r_sup, d, pair.upper_ok
        ),
        output: r.to_json(),
    })
}

fn c6_rational(exec: Exec) -> Result<Verdict> {
    let (cfg, v) = load("rational_third.cfg")?;
    let study = inequality_study(&v.system, &cfg.params(&v, exec))?;
    let p = &study.profiles[0][0];
    let y = study.targets[0];
    let orb = generate_orbit(&v.system, &study.sources[0], cfg.burn_in(), cfg.n)?;
    let dmin = orb.points[1..].iter().map(|q| dist_fixed(q, &y)).min().unwrap();
    let mut mismatched = Vec::new();
    for (k, t) in p.schedule.ks().zip(&p.tau) {
        let expect_censored = Fixed::dyadic(k).0 <= dmin;
        if expect_censored != t.is_none() {
            mismatched.push(k);
        }
    }
    let censored: Vec<u32> = p.censored().collect();
    let est = recurrence_estimate(p, cfg.tail_fraction)?;
    let passed = mismatched.is_empty() && est.infinite && !censored.is_empty();
    #[derive(Serialize)]
    struct Out {
        distance: f64,
        censored: Vec<u32>,
        tau: Vec<Option<u64>>,
        infinite: bool,
    }
    let distance = crate::numerics::fixed_len_to_f64(dmin);
    Ok(Verdict {
        passed,
        summary: format!(
            "orbit-to-target distance {distance:.4}; censored scales {:?}; R {}",
            (censored.first(), censored.last()),
            if est.infinite { "INFINITE" } else { "finite" }
        ),
        output: json(&Out {
            distance,
            censored,
            tau: p.tau.clone(),
            infinite: est.infinite,
        }),
    })
}

/// Every built-in system, for the randomized oracle checks.
pub fn oracle_systems() -> Result<Vec<SystemSpec>> {
    let mut seq_rng = ChaCha8Rng::seed_from_u64(17);
    let seq: Vec<Fixed> = (0..37).map(|_| Fixed(seq_rng.gen())).collect();
    Ok(vec![
        SystemSpec::rotation(ContinuedFraction::golden().angle()?),
        SystemSpec::rotation(ContinuedFraction::power(2.0).angle()?),
        SystemSpec::rotation(ContinuedFraction::explicit(vec![3])?.angle()?),
        SystemSpec::doubling(),
        SystemSpec::doubling().with_arithmetic(Arithmetic::Double)?,
        SystemSpec::logistic(),
        SystemSpec::cat_map(),
        SystemSpec::cat_map().with_arithmetic(Arithmetic::Double)?,
        SystemSpec::cantor_shift(),
        noninvariant_counterexample(),
        SystemSpec::square(),
        SystemSpec::sequence(seq)?,
    ])
}

/// A target near `orb`: an orbit point, a nudged orbit point, or a fresh
/// draw from the measure.
fn oracle_target(sys: &SystemSpec, orbit: &[Point], rng: &mut ChaCha8Rng) -> Result<Point> {
    Ok(match rng.gen_range(0..4) {
        0 => orbit[rng.gen_range(0..orbit.len())],
        1 => {
            let p = orbit[rng.gen_range(0..orbit.len())];
            let e = rng.gen_range(1..64u32);
            match p {
                Point::Circle(x) => Point::Circle(x.add(Fixed(1u128 << (128 - e)))),
                Point::Torus(a, b) => Point::Torus(a.wrapping_add(1u64 << (64 - e.min(63))), b),
                Point::Interval(x) => Point::Interval((x + (-(e as f64)).exp2()).min(1.0)),
                Point::Cantor(c) => Point::Interval((c.to_f64() + (-(e as f64)).exp2()).min(1.0)),
            }
        }
        _ => sample_measure(sys, 1, rng.gen())?[0],
    })
}

#[derive(Serialize)]
struct OracleOut {
    hitting_instances: usize,
    hitting_mismatches: usize,
    batch_mismatches: usize,
    grid_queries: usize,
    grid_mismatches: usize,
}

/// Single pass against brute force on `instances` random small cases, batch
/// against single pass on the same cases, and grid against linear counts on
/// `queries` random balls per system.
pub fn oracle_equivalence(instances: usize, queries: usize, seed: u64, exec: Exec) -> Result<(usize, usize, usize, usize)> {
    let systems = oracle_systems()?;
    let ids: Vec<usize> = (0..instances).collect();
    let hit = exec::map(exec, &ids, |_, &i| -> Result<(bool, bool)> {
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, &format!("hit{i}")));
        let sys = &systems[i % systems.len()];
        let start = sample_measure(sys, 1, rng.gen())?[0];
        let len = rng.gen_range(1..=3000usize);
        let orb = generate_orbit(sys, &start, rng.gen_range(0..3), len)?;
        let k_min = rng.gen_range(1..=10u32);
        let sched = RadiusSchedule::new(k_min, rng.gen_range(k_min + 1..=k_min + 24))?;
        let mode = if rng.gen_bool(0.5) { HitMode::Dynamical } else { HitMode::Sequence };
        let targets: Vec<Point> = (0..3)
            .map(|_| oracle_target(sys, &orb.points, &mut rng))
            .collect::<Result<_>>()?;
        let single: Vec<_> = targets.iter().map(|y| hitting_profile(&orb.points, y, &sched, mode)).collect();
        let brute_ok = single[0] == hitting_bruteforce(&orb.points, &targets[0], &sched, mode);
        let batch_ok = batch_hitting(&orb.points, &targets, &sched, mode, Exec::Sequential) == single;
        Ok((brute_ok, batch_ok))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let hitting_mismatches = hit.iter().filter(|r| !r.0).count();
    let batch_mismatches = hit.iter().filter(|r| !r.1).count();

    let grid = exec::map(exec, &systems, |si, sys| -> Result<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, &format!("grid{si}")));
        let start = sample_measure(sys, 1, rng.gen())?[0];
        let orb = generate_orbit(sys, &start, 0, 20_000)?;
        let mut bad = 0;
        for _ in 0..queries {
            let g = rng.gen_range(1..=if sys.dim() == 2 { 8 } else { 14 });
            let idx = build_grid_index(&orb, g)?;
            let y = oracle_target(sys, &orb.points, &mut rng)?;
            let k_min = rng.gen_range(1..=8u32);
            let sched = RadiusSchedule::new(k_min, rng.gen_range(k_min + 1..=k_min + 16))?;
            if occupation_counts(&orb, &idx, &y, &sched) != occupation_counts_linear(&orb, &y, &sched) {
                bad += 1;
            }
        }
        Ok(bad)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok((
        hitting_mismatches,
        batch_mismatches,
        systems.len() * queries,
        grid.iter().sum(),
    ))
}

fn c7_oracles(exec: Exec) -> Result<Verdict> {
    let (hm, bm, q, gm) = oracle_equivalence(1000, 100, 7, exec)?;
    let out = OracleOut {
        hitting_instances: 1000,
        hitting_mismatches: hm,
        batch_mismatches: bm,
        grid_queries: q,
        grid_mismatches: gm,
    };
    Ok(Verdict {
        passed: hm == 0 && bm == 0 && gm == 0,
        summary: format!(
            "single vs brute force {hm}/1000 mismatches, batch {bm}/1000, grid vs linear {gm}/{q}"
        ),
        output: json(&out),
    })
}

fn c8_properties(exec: Exec) -> Result<Verdict> {
    let golden = SystemSpec::rotation(ContinuedFraction::golden().angle()?);
    let one_d = RadiusSchedule::new(4, 14)?;
    let two_d = RadiusSchedule::new(3, 8)?;
    let cases = [
        (golden, one_d),
        (SystemSpec::doubling(), one_d),
        (SystemSpec::logistic(), one_d),
        (SystemSpec::cantor_shift(), one_d),
        (SystemSpec::cat_map(), two_d),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    let mut outputs = Vec::new();
    for (sys, sched) in &cases {
        let r = recurrence_properties_check(sys, 100, sched, 300_000, 0.15, 0.5, 8, exec)?;
        let ok = r.shift.fraction == Some(1.0) && r.lipschitz.at_least(0.95);
        passed &= ok;
        parts.push(format!(
            "{}: shift max {:.4}, within {:.4} on {}/{} ({} excl), lipschitz {} (sup {}, inf {})",
            r.system,
            r.shift_max_deviation,
            r.shift_bound,
            r.shift.passed,
            r.shift.evaluated,
            r.shift.excluded,
            fmt_frac(&r.lipschitz),
            fmt_frac(&r.lipschitz_sup),
            fmt_frac(&r.lipschitz_inf)
        ));
        outputs.push(json(&r));
    }
    let holder = holder_check(100, &RadiusSchedule::new(4, 14)?, 1000, 0.5, 0.15, 0.5, 8)?;
    outputs.push(json(&holder));
    parts.push(format!(
        "square (holder 0.5): {}",
        fmt_frac(&holder.clause)
    ));
    Ok(Verdict {
        passed,
        summary: parts.join("; "),
        output: outputs.join("\n"),
    })
}

/// `x_i = j/8 + 2^-(20 + i/8)` with `j = i mod 8`: a sequence that only
/// approaches the eight points `j/8`.
pub fn approaching_sequence(n: usize) -> Result<SystemSpec> {
    let pts = (0..n)
        .map(|i| {
            let base = Fixed(((i % 8) as u128) << 125);
            let e = 20 + i / 8;
            let nudge = if e < 128 { Fixed(1u128 << (128 - e)) } else { Fixed::ZERO };
            base.add(nudge)
        })
        .collect();
    SystemSpec::sequence(pts)
}

fn c9_cover(exec: Exec) -> Result<Verdict> {
    let sched = RadiusSchedule::new(4, 12)?;
    let golden = SystemSpec::rotation(ContinuedFraction::golden().angle()?);
    let grid = dyadic_grid(&golden, 12)?;
    let x0 = sample_measure(&golden, 1, substream_seed(9, "sources"))?[0];
    let chunks: Vec<&[Point]> = grid.chunks(exec::chunk_size(grid.len(), exec)).collect();
    let profiles: Vec<_> = exec::map(exec, &chunks, |_, ys| -> Result<_> {
        Ok(batch_hitting_stream(
            orbit_stream(&golden, &x0, 0)?,
            1_000_000,
            &x0,
            ys,
            &sched,
            HitMode::Dynamical,
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .into_iter()
    .flatten()
    .collect();
    let golden_cover = cover_dimension_bound(&profiles, 0.5, 0.1, 1.0, 20, 0.5)?;

    let seq = approaching_sequence(1 << 14)?;
    let seq_orbit = generate_orbit(&seq, &Point::Circle(Fixed::ZERO), 0, 1 << 14)?;
    let seq_profiles = batch_hitting(&seq_orbit.points, &dyadic_grid(&seq, 12)?, &sched, HitMode::Sequence, exec);
    let synthetic = cover_dimension_bound(&seq_profiles, 0.5, 0.1, 0.8, 20, 0.5)?;

    let golden_empty = golden_cover.y_h.is_empty();
    let series_ok = synthetic.relative_discrepancy <= 1e-10;
    let covered = synthetic.deepest_coverage() == Some(1.0);
    Ok(Verdict {
        passed: golden_empty && series_ok && covered && !synthetic.y_h.is_empty(),
        summary: format!(
            "golden |Y_h| = {} of {} at 2^-12; synthetic |Y_h| = {}, tail {:.10e} vs direct {:.10e} (rel {:.1e}), deepest coverage {:?}",
            golden_cover.y_h.len(),
            golden_cover.grid_points,
            synthetic.y_h.len(),
            synthetic.tail_bound,
            synthetic.direct_sum,
            synthetic.relative_discrepancy,
            synthetic.deepest_coverage()
        ),
        output: format!("{}\n{}", golden_cover.to_json(), synthetic.to_json()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approaching_sequence_points() {
        let s = approaching_sequence(20).unwrap();
        let orb = generate_orbit(&s, &Point::Circle(Fixed::ZERO), 0, 20).unwrap();
        assert_eq!(orb.points[0], Point::Circle(Fixed(1u128 << 108)));
        assert_eq!(orb.points[9], Point::Circle(Fixed((1u128 << 125) + (1u128 << 107))));
    }

    #[test]
    fn cantor_dimension_constant() {
        assert!((CANTOR_DIMENSION - 2f64.ln() / 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn small_oracle_run() {
        let (h, b, q, g) = oracle_equivalence(60, 3, 1, Exec::Sequential).unwrap();
        assert_eq!((h, b, g), (0, 0, 0));
        assert_eq!(q, 36);
    }
}
