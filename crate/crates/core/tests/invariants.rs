use num_bigint::BigUint;
use proptest::prelude::*;

use waitdim_core::estimators::{slope_estimate, Quantity};
use waitdim_core::harness::suite::oracle_systems;
use waitdim_core::hitting::{
    batch_hitting, hitting_bruteforce, hitting_profile, divergence_statistic, HitMode, MinDistanceRecord,
    RadiusSchedule,
};
use waitdim_core::numerics::{convergents, irrational_type, type_threshold_bisect};
use waitdim_core::orbit::{build_grid_index, generate_orbit, occupation_counts, occupation_counts_linear};
use waitdim_core::systems::{dist_fixed, sample_measure, step, Point, SystemSpec};
use waitdim_core::{ContinuedFraction, Exec, Fixed};

fn systems() -> Vec<SystemSpec> {
    oracle_systems().unwrap()
}

fn mode(seq: bool) -> HitMode {
    if seq {
        HitMode::Sequence
    } else {
        HitMode::Dynamical
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn single_pass_equals_bruteforce(
        which in 0usize..12,
        seed in any::<u64>(),
        n in 2usize..1500,
        k_min in 1u32..6,
        span in 1u32..14,
        seq in any::<bool>(),
    ) {
        let sys = &systems()[which];
        let x = sample_measure(sys, 1, seed).unwrap()[0];
        let orb = generate_orbit(sys, &x, 0, n).unwrap();
        let sched = RadiusSchedule::new(k_min, k_min + span).unwrap();
        let mut ys = sample_measure(sys, 3, seed ^ 1).unwrap();
        ys.push(orb.points[n / 2]);
        for y in &ys {
            let a = hitting_profile(&orb.points, y, &sched, mode(seq));
            let b = hitting_bruteforce(&orb.points, y, &sched, mode(seq));
            prop_assert_eq!(&a.tau, &b.tau);
            prop_assert!(a.is_monotone());
            // a censored scale means no admissible time is inside the ball
            let first = if seq { 0 } else { 1 };
            for k in a.censored() {
                let r = Fixed::dyadic(k).0;
                prop_assert!(orb.points[first..].iter().all(|p| dist_fixed(p, y) >= r));
            }
        }
    }

    #[test]
    fn batch_equals_single(which in 0usize..12, seed in any::<u64>(), n in 2usize..2000, nt in 1usize..40) {
        let sys = &systems()[which];
        let x = sample_measure(sys, 1, seed).unwrap()[0];
        let orb = generate_orbit(sys, &x, 0, n).unwrap();
        let sched = RadiusSchedule::new(2, 16).unwrap();
        let ys = sample_measure(sys, nt, seed.wrapping_add(7)).unwrap();
        for exec in [Exec::Sequential, Exec::Parallel] {
            let batch = batch_hitting(&orb.points, &ys, &sched, HitMode::Dynamical, exec);
            prop_assert_eq!(batch.len(), ys.len());
            for (p, y) in batch.iter().zip(&ys) {
                prop_assert_eq!(&p.tau, &hitting_profile(&orb.points, y, &sched, HitMode::Dynamical).tau);
            }
        }
    }

    #[test]
    fn grid_equals_linear(which in 0usize..12, seed in any::<u64>(), n in 1usize..3000, g in 1u32..12) {
        let sys = &systems()[which];
        let x = sample_measure(sys, 1, seed).unwrap()[0];
        let orb = generate_orbit(sys, &x, 0, n).unwrap();
        let idx = build_grid_index(&orb, g).unwrap();
        let sched = RadiusSchedule::new(1, 18).unwrap();
        let mut ys = sample_measure(sys, 4, seed ^ 3).unwrap();
        ys.push(orb.points[0]);
        for y in &ys {
            prop_assert_eq!(
                occupation_counts(&orb, &idx, y, &sched),
                occupation_counts_linear(&orb, y, &sched)
            );
        }
    }

    #[test]
    fn repeated_addition_is_exact(a in any::<u128>(), n in 1u64..20_000) {
        let angle = Fixed(a);
        let mut acc = Fixed::ZERO;
        for _ in 0..n {
            acc = acc.add(angle);
        }
        prop_assert_eq!(acc, angle.mul_int(n));
        prop_assert_eq!(acc.sub(angle.mul_int(n)), Fixed::ZERO);
    }

    #[test]
    fn convergents_alternate(terms in prop::collection::vec(1u64..50, 3..40)) {
        let cf = ContinuedFraction::explicit(terms.clone()).unwrap();
        let c = convergents(&cf, terms.len()).unwrap();
        // p_k q_{k+1} - p_{k+1} q_k = +-1 with alternating sign
        for w in c.windows(2) {
            let l = &w[0].p * &w[1].q;
            let r = &w[1].p * &w[0].q;
            prop_assert!(l.clone().max(r.clone()) - l.min(r) == BigUint::from(1u32));
        }
        for w in c.windows(3) {
            let d1 = &w[0].p * &w[1].q > &w[1].p * &w[0].q;
            let d2 = &w[1].p * &w[2].q > &w[2].p * &w[1].q;
            prop_assert_ne!(d1, d2);
        }
    }

    #[test]
    fn metric_axioms(which in 0usize..12, seed in any::<u64>()) {
        let sys = &systems()[which];
        let p = sample_measure(sys, 3, seed).unwrap();
        let (a, b, c) = (&p[0], &p[1], &p[2]);
        prop_assert_eq!(dist_fixed(a, a), 0);
        prop_assert_eq!(dist_fixed(a, b), dist_fixed(b, a));
        let ab = dist_fixed(a, b) as f64;
        let bc = dist_fixed(b, c) as f64;
        let ac = dist_fixed(a, c) as f64;
        prop_assert!(ac <= (ab + bc) * (1.0 + 1e-12));
    }

    #[test]
    fn slopes_stay_in_envelope(
        raw in prop::collection::vec(0.0f64..3.0, 6..30),
        tf in 0.1f64..1.0,
    ) {
        let values: Vec<(u32, Option<f64>)> = raw
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let k = i as u32 + 2;
                (k, Some(s * k as f64))
            })
            .collect();
        let e = slope_estimate(&values, Quantity::Recurrence, tf).unwrap();
        prop_assert!(e.inf_proxy <= e.ols_slope + 1e-12);
        prop_assert!(e.ols_slope <= e.sup_proxy + 1e-12);
        prop_assert!(!e.infinite);
    }

    #[test]
    fn refining_a_schedule_keeps_coarse_times(
        which in 0usize..12,
        seed in any::<u64>(),
        extra in 1u32..10,
    ) {
        let sys = &systems()[which];
        let x = sample_measure(sys, 1, seed).unwrap()[0];
        let orb = generate_orbit(sys, &x, 0, 3000).unwrap();
        let y = sample_measure(sys, 1, seed ^ 5).unwrap()[0];
        let coarse = RadiusSchedule::new(3, 10).unwrap();
        let fine = RadiusSchedule::new(3, 10 + extra).unwrap();
        let a = hitting_profile(&orb.points, &y, &coarse, HitMode::Dynamical);
        let b = hitting_profile(&orb.points, &y, &fine, HitMode::Dynamical);
        prop_assert_eq!(&a.tau[..], &b.tau[..a.tau.len()]);
        prop_assert!(b.is_monotone());
    }

    #[test]
    fn power_law_waiting_times_are_recovered(beta in 0.2f64..2.5, k_max in 12u32..40) {
        let values: Vec<(u32, Option<f64>)> = (4..=k_max)
            .map(|k| {
                let tau = (beta * k as f64).exp2().round().max(1.0);
                (k, Some(tau.log2()))
            })
            .collect();
        let e = slope_estimate(&values, Quantity::Recurrence, 0.5).unwrap();
        prop_assert!((e.ols_slope - beta).abs() <= 1.0 / k_max as f64, "{} vs {}", e.ols_slope, beta);
        prop_assert!((e.sup_proxy - beta).abs() <= 1.0 / k_max as f64);
        prop_assert!((e.inf_proxy - beta).abs() <= 1.0 / k_max as f64);
    }

    #[test]
    fn censored_tail_is_infinite(n_scales in 6u32..20, censor in 0u32..20) {
        let k_max = 3 + n_scales;
        let cut = 3 + censor.min(n_scales);
        let values: Vec<(u32, Option<f64>)> = (4..=k_max)
            .map(|k| (k, if k > cut { None } else { Some(k as f64) }))
            .collect();
        let e = slope_estimate(&values, Quantity::Recurrence, 0.5).unwrap();
        prop_assert_eq!(e.infinite, cut < k_max);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn bisected_type_agrees_with_convergent_growth(terms in prop::collection::vec(1u64..4, 60)) {
        let cf = ContinuedFraction::explicit(terms).unwrap();
        let angle = cf.angle().unwrap();
        let scan = type_threshold_bisect(angle, 1_000_000, 0.5, 4.0);
        let growth = irrational_type(&cf, 30).unwrap().nu;
        prop_assert!((scan - growth).abs() < 0.2, "scan {} vs growth {}", scan, growth);
    }
}

#[test]
fn doubling_and_cat_preserve_lebesgue() {
    // push forward a uniform sample and compare bin counts with the uniform law
    for sys in [SystemSpec::doubling(), SystemSpec::cat_map(), SystemSpec::cantor_shift()] {
        let n = 40_000;
        let pts = sample_measure(&sys, n, 11).unwrap();
        let bins = 16usize;
        let bin = |p: &Point| -> usize {
            match p {
                Point::Circle(x) => (x.0 >> 124) as usize,
                Point::Torus(a, b) => ((a >> 62) as usize) * 4 + (b >> 62) as usize,
                Point::Cantor(c) => ((c.to_f64() * 16.0) as usize).min(15),
                Point::Interval(x) => ((x * 16.0) as usize).min(15),
            }
        };
        let mut before = vec![0f64; bins];
        let mut after = vec![0f64; bins];
        for p in &pts {
            before[bin(p)] += 1.0;
            after[bin(&step(&sys, p).unwrap())] += 1.0;
        }
        // chi-square between the two histograms, 15 degrees of freedom
        let chi: f64 = before
            .iter()
            .zip(&after)
            .filter(|(a, b)| **a + **b > 0.0)
            .map(|(a, b)| (a - b).powi(2) / (a + b))
            .sum();
        assert!(chi < 50.0, "{}: chi2 = {chi}", sys.name());
    }
}

#[test]
fn logistic_preserves_arcsine_law() {
    let sys = SystemSpec::logistic();
    let pts = sample_measure(&sys, 40_000, 12).unwrap();
    let below = |v: &[Point], t: f64| {
        v.iter()
            .filter(|p| matches!(p, Point::Interval(x) if *x < t))
            .count() as f64
            / v.len() as f64
    };
    let image: Vec<Point> = pts.iter().map(|p| step(&sys, p).unwrap()).collect();
    for t in [0.1f64, 0.25, 0.5, 0.75, 0.9] {
        let cdf = 2.0 / std::f64::consts::PI * t.sqrt().asin();
        assert!((below(&pts, t) - cdf).abs() < 0.01);
        assert!((below(&image, t) - cdf).abs() < 0.01);
    }
}

#[test]
fn divergence_statistic_on_the_golden_rotation() {
    let sys = SystemSpec::rotation(ContinuedFraction::golden().angle().unwrap());
    let x = Point::Circle(Fixed::ZERO);
    let orb = generate_orbit(&sys, &x, 0, 100_001).unwrap();
    let rec = MinDistanceRecord::from_stream(orb.points.iter().copied(), orb.len(), &x, HitMode::Dynamical);
    // n^alpha * min_{j<=n} ||j alpha|| grows without bound for alpha > 1 ...
    let g2 = divergence_statistic(&rec, 2.0).unwrap();
    let (first, last) = (g2.values.first().unwrap().1, g2.values.last().unwrap().1);
    assert!(last > 1000.0 * first, "{first} -> {last}");
    // ... and stays bounded by one for alpha < 1
    let g05 = divergence_statistic(&rec, 0.5).unwrap();
    assert!(g05.values.iter().all(|&(_, v)| v <= 1.0));
}
