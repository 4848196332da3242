mod common;

use cbe::point_process::{
    bottleneck_assignment, d_bl, default_dictionary, dist_config, dist_point, dist_process_estimate, intensity_change_bound, min_cost_assignment,
    ppcom_factor, pp_bound, sample_poisson, wrapped_gaussian_tv, Coupling, FiniteIntensity, FiniteMeasure, MarkedPoint, PointConfiguration, PpMoments,
    TestFunction,
};
use cbe::{Complex64, RngStream};
use common::{brute_force_assignment, chi2_crit_1pct, poisson_pmf};
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

fn random_point(st: &mut RngStream, window: usize) -> MarkedPoint {
    let f = (0..window).map(|_| Complex64::new(0.1 * st.normal(), 0.1 * st.normal())).collect();
    MarkedPoint::new(st.angle(), st.uniform(), f)
}

fn random_config(st: &mut RngStream, n: usize) -> PointConfiguration {
    PointConfiguration::new((0..n).map(|_| random_point(st, 4)).collect())
}

fn cost(x: &PointConfiguration, y: &PointConfiguration) -> Vec<Vec<f64>> {
    x.points.iter().map(|a| y.points.iter().map(|b| dist_point(a, b).unwrap()).collect()).collect()
}

#[test]
fn point_distance_examples() {
    let z = vec![Complex64::new(0.0, 0.0); 5];
    let a = MarkedPoint::new(0.3, 1.0, z.clone());
    assert_eq!(dist_point(&a, &a).unwrap(), 0.0);
    let b = MarkedPoint::new(0.3 + PI, 1.0, z.clone());
    assert_eq!(dist_point(&a, &b).unwrap(), 1.0);
    let c = MarkedPoint::new(0.3 + 0.1, 1.05, z.clone());
    assert!((dist_point(&a, &c).unwrap() - 0.15).abs() < 1e-12);
    let d = MarkedPoint::new(0.3, 1.0, vec![Complex64::new(0.0, 0.0); 4]);
    assert!(dist_point(&a, &d).is_err());
    // wrap-around arc
    let e = MarkedPoint::new(TAU - 0.05, 1.0, z.clone());
    let f = MarkedPoint::new(0.05, 1.0, z);
    assert!((dist_point(&e, &f).unwrap() - 0.1).abs() < 1e-12);
}

#[test]
fn configuration_distance_examples() {
    let mut st = RngStream::new(1, 0);
    let x = random_config(&mut st, 3);
    assert_eq!(dist_config(&x, &x).unwrap(), (0.0, 0.0));
    let y = random_config(&mut st, 2);
    assert_eq!(dist_config(&x, &y).unwrap(), (1.0, 1.0));
    assert_eq!(dist_config(&PointConfiguration::empty(), &PointConfiguration::empty()).unwrap(), (0.0, 0.0));
}

#[test]
fn assignment_matches_factorial_brute_force() {
    let mut st = RngStream::new(2, 0);
    for n in 1..=6 {
        for _ in 0..40 {
            let x = random_config(&mut st, n);
            let y = random_config(&mut st, n);
            let c = cost(&x, &y);
            let (bott, avg) = brute_force_assignment(&c);
            let (p1, d1) = dist_config(&x, &y).unwrap();
            assert_eq!(p1, bott);
            assert!((d1 - avg).abs() < 1e-12);
            assert_eq!(bottleneck_assignment(&c), bott);
            let (s, perm) = min_cost_assignment(&c);
            let mut seen = perm.clone();
            seen.sort();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
            let s2: f64 = perm.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
            assert!((s - s2).abs() < 1e-12 && (s / n as f64 - avg).abs() < 1e-12);
        }
    }
}

#[test]
fn poisson_counts_pass_chi_square() {
    for &lambda in &[0.5, 2.0, 10.0] {
        let intensity = FiniteIntensity {
            total_mass: lambda,
            sampler: Box::new(|s: &mut RngStream| random_point(s, 2)),
        };
        let mut st = RngStream::new(3, (lambda * 10.0) as u64);
        let n = 100_000;
        let counts: Vec<usize> = (0..n).map(|_| sample_poisson(&intensity, &mut st).len()).collect();
        // pool the upper tail so every bin expects at least 5
        let mut top = 0u64;
        while n as f64 * poisson_pmf(top + 1, lambda) >= 5.0 || (top as f64) < lambda {
            top += 1;
        }
        let mut obs = vec![0f64; top as usize + 1];
        for &c in &counts {
            obs[(c as u64).min(top) as usize] += 1.0;
        }
        let mut stat = 0.0;
        let mut below = 0.0;
        for k in 0..=top {
            let p = if k < top { poisson_pmf(k, lambda) } else { 1.0 - below };
            below += p;
            let e = n as f64 * p;
            stat += (obs[k as usize] - e).powi(2) / e;
        }
        assert!(stat < chi2_crit_1pct(top as usize), "Λ {lambda}: {stat}");
        let m = counts.iter().sum::<usize>() as f64 / n as f64;
        assert!((m - lambda).abs() < 3.0 * (lambda / n as f64).sqrt());
    }
    let zero = FiniteIntensity {
        total_mass: 0.0,
        sampler: Box::new(|s: &mut RngStream| random_point(s, 2)),
    };
    assert!(sample_poisson(&zero, &mut RngStream::new(0, 0)).is_empty());
}

#[test]
fn process_distance_estimates() {
    let lam = 3.0;
    let draw = move |mass: f64| {
        move |s: &mut RngStream| {
            let n = s.poisson(mass);
            PointConfiguration::new((0..n).map(|_| random_point(s, 2)).collect())
        }
    };
    let same = dist_process_estimate(draw(lam), draw(lam), 500, 4, Coupling::SharedRandomness).unwrap();
    assert_eq!(same.partial2_upper, 0.0);
    assert_eq!(same.d2_upper, 0.0);
    let ind = dist_process_estimate(draw(lam), draw(lam), 2000, 4, Coupling::Independent).unwrap();
    assert!(ind.partial2_upper <= 1.0 && ind.partial2_upper > 0.0);
    // the estimate is at least the probability that the counts differ
    let other = dist_process_estimate(draw(lam), draw(lam + 1.0), 2000, 5, Coupling::Independent).unwrap();
    let mut p_eq = 0.0;
    for k in 0..60u64 {
        p_eq += poisson_pmf(k, lam) * poisson_pmf(k, lam + 1.0);
    }
    assert!(other.partial2_upper >= (1.0 - p_eq) - 3.0 * other.partial2_se);
}

#[test]
fn bounded_lipschitz_estimates() {
    let mut st = RngStream::new(6, 0);
    let dict = default_dictionary((0.0, 1.0));
    let mu = FiniteMeasure::new((0..50).map(|_| (random_point(&mut st, 3), st.uniform())).collect());
    let nu = FiniteMeasure::new((0..50).map(|_| (random_point(&mut st, 3), st.uniform())).collect());
    assert_eq!(d_bl(&mu, &mu, &dict).lower_bound, 0.0);
    let base = d_bl(&mu, &nu, &dict).lower_bound;
    for c in [0.1, 2.0, 7.5] {
        let s = d_bl(&mu.scaled(c), &nu.scaled(c), &dict).lower_bound;
        assert!((s - c * base).abs() < 1e-12 * c.max(1.0));
    }
    let a = random_point(&mut st, 3);
    let b = random_point(&mut st, 3);
    let mut dict2 = dict.clone();
    dict2.push(TestFunction::DistanceTo(a.clone()));
    let est = d_bl(&FiniteMeasure::dirac(a.clone()), &FiniteMeasure::dirac(b.clone()), &dict2);
    assert!(est.lower_bound >= dist_point(&a, &b).unwrap() - 1e-15);
    assert_eq!(est.dictionary_size, dict.len() + 1);
    // every dictionary member is [0, 1]-valued and 1-Lipschitz for the point distance
    for _ in 0..200 {
        let (x, y) = (random_point(&mut st, 3), random_point(&mut st, 3));
        let d = dist_point(&x, &y).unwrap();
        for f in &dict {
            let (fx, fy) = (f.eval(&x), f.eval(&y));
            assert!((0.0..=1.0).contains(&fx));
            assert!((fx - fy).abs() <= d + 1e-12, "{f:?}");
        }
    }
}

#[test]
fn pp_bound_examples() {
    assert_eq!(pp_bound(&[PpMoments { ep: 0.0, et: 0.0, etp: 0.0, l: 1.0 }], 0.0, 0.0, 1.0).unwrap(), 0.0);
    let m = PpMoments { ep: 0.1, et: 0.1, etp: 0.01, l: 1.0 };
    let v = pp_bound(&[m], 0.0, 0.1, 1.0).unwrap();
    assert!((v - 0.3f64.powf(1.5) * 0.03).abs() < 1e-15);
    assert!((pp_bound(&[m], 0.0, 0.1, 2.5).unwrap() - 2.5 * v).abs() < 1e-15);
    assert!(pp_bound(&[PpMoments { l: 0.0, ..m }], 0.0, 0.1, 1.0).is_err());
    assert!(pp_bound(&[PpMoments { ep: f64::NAN, ..m }], 0.0, 0.1, 1.0).is_err());
}

#[test]
fn change_of_intensity_factor() {
    assert!((ppcom_factor(1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    assert!((ppcom_factor(1.0) - 0.63212).abs() < 1e-5);
    assert!((ppcom_factor(1e-12) - 1.0).abs() < 1e-12);
    for a in [1e-7, 1e-5, 1e-3] {
        let series = 1.0 - a / 2.0 + a * a / 6.0 - a * a * a / 24.0;
        assert!((ppcom_factor(a) - series).abs() < 1e-12);
    }
    let b = intensity_change_bound(0.2, 3.0, 1.0).unwrap();
    assert_eq!(b.alpha, 1.0);
    assert!((b.d2_bound - 0.2 * (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    assert!((b.partial2_bound - 2f64.sqrt() * 3.0 * b.d2_bound).abs() < 1e-12);
    assert!(intensity_change_bound(0.2, -1.0, 1.0).is_err());
}

#[test]
fn wrapped_gaussian_mixing() {
    let mut st = RngStream::new(7, 0);
    let e = wrapped_gaussian_tv(2.0, 0.0, 1_000_000, 64, &mut st).unwrap();
    assert!(e.tv < 1e-3, "{e:?}");
    let tvs: Vec<_> = [0.05, 0.1, 0.2].iter().map(|&v| wrapped_gaussian_tv(v, 0.0, 200_000, 64, &mut st).unwrap()).collect();
    assert!(tvs.windows(2).all(|w| w[1].tv < w[0].tv), "{tvs:?}");
    let a = wrapped_gaussian_tv(0.05, 0.0, 200_000, 64, &mut st).unwrap();
    let b = wrapped_gaussian_tv(0.05, 0.37, 200_000, 64, &mut st).unwrap();
    assert!((a.tv - b.tv).abs() < 3.0 * (a.se * a.se + b.se * b.se).sqrt());
    // exact TV for small V is about (2/π) e^{−2π²V}; the estimate has that shape
    for e in &tvs {
        assert!(e.tv <= 2.0 * e.bound_shape);
    }
    assert!(wrapped_gaussian_tv(0.0, 0.0, 1000, 10, &mut st).is_err());
    assert!(wrapped_gaussian_tv(1.0, 0.0, 100, 64, &mut st).is_err());
}

#[test]
fn configuration_json_round_trip() {
    let x = random_config(&mut RngStream::new(8, 0), 4);
    let s = x.to_json().unwrap();
    assert_eq!(PointConfiguration::from_json(&s).unwrap(), x);
    assert!(PointConfiguration::from_json("[{\"theta\": 1}]").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn configuration_metrics(seed in any::<u64>(), n in 1usize..6) {
        let mut st = RngStream::new(seed, 0);
        let x = random_config(&mut st, n);
        let y = random_config(&mut st, n);
        let z = random_config(&mut st, n);
        let (pxy, dxy) = dist_config(&x, &y).unwrap();
        let (pyx, dyx) = dist_config(&y, &x).unwrap();
        let (pyz, dyz) = dist_config(&y, &z).unwrap();
        let (pxz, dxz) = dist_config(&x, &z).unwrap();
        prop_assert!((pxy - pyx).abs() < 1e-12);
        prop_assert!((dxy - dyx).abs() < 1e-12);
        prop_assert!(pxz <= pxy + pyz + 1e-12);
        prop_assert!(dxz <= dxy + dyz + 1e-12);
        prop_assert!(dxy <= pxy + 1e-12 && pxy <= 1.0);
        prop_assert_eq!(dist_config(&x, &x).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn point_metric(seed in any::<u64>()) {
        let mut st = RngStream::new(seed, 1);
        let (a, b, c) = (random_point(&mut st, 3), random_point(&mut st, 3), random_point(&mut st, 3));
        let ab = dist_point(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - dist_point(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(dist_point(&a, &c).unwrap() <= ab + dist_point(&b, &c).unwrap() + 1e-12);
    }

    #[test]
    fn pp_bound_is_monotone(ep in 0.0f64..1.0, et in 0.0f64..1.0, etp in 0.0f64..1.0, l in 0.1f64..5.0, var in 0.0f64..5.0, lam in 0.0f64..5.0, bump in 0.0f64..1.0) {
        let m = PpMoments { ep, et, etp, l };
        let base = pp_bound(&[m], var, lam, 1.0).unwrap();
        for bigger in [PpMoments { ep: ep + bump, ..m }, PpMoments { et: et + bump, ..m }, PpMoments { etp: etp + bump, ..m }] {
            prop_assert!(pp_bound(&[bigger], var, lam, 1.0).unwrap() >= base);
        }
        prop_assert!(pp_bound(&[m], var + bump, lam, 1.0).unwrap() >= base);
        prop_assert!(pp_bound(&[m], var, lam + bump, 1.0).unwrap() >= base);
    }

    #[test]
    fn ppcom_factor_decreasing(a in 0.0f64..50.0, d in 1e-6f64..5.0) {
        prop_assert!(ppcom_factor(a + d) < ppcom_factor(a));
        prop_assert!(ppcom_factor(a) <= 1.0);
    }
}
