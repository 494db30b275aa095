mod common;

use std::f64::consts::PI;

use common::*;
use harmconf::profile::{
    alpha_c, alpha_limit, alpha_radial, boundary_area, c_min, check_profile_values, maximizer_diagnostics,
    profile_properties, AlphaOptions,
};
use harmconf::Error;

/// Least enclosing area for the flat unit-ball exterior with constant data of
/// boundary area `a`: the sphere area `4π (r + c - 1)^4 / r^2` is least at `r = c - 1`.
fn radial_oracle(a: f64) -> f64 {
    let c = (a / (4.0 * PI)).powf(0.25);
    if c <= 2.0 {
        a
    } else {
        64.0 * PI * (c - 1.0).powi(2)
    }
}

fn opts(seed: u64) -> AlphaOptions {
    AlphaOptions { seed, ..AlphaOptions::default() }
}

#[test]
fn radial_profile_matches_closed_form() {
    let base = flat(3, 1.0);
    assert!(rel(boundary_area(&base).unwrap(), 4.0 * PI) < 1e-14);
    for a in [PI, 4.0 * PI, 64.0 * PI, 100.0 * PI, 256.0 * PI, 1024.0 * PI, 1e4 * PI] {
        assert!(rel(alpha_radial(&base, a).unwrap(), radial_oracle(a)) < 1e-6, "A={a}");
    }
    let b4 = flat(4, 1.0);
    let knee = 8.0 * 2.0 * PI * PI;
    assert!(rel(alpha_radial(&b4, knee).unwrap(), knee) < 1e-6);
    assert!((c_min(&base, 64.0 * PI).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn alpha_examples() {
    let base = flat(3, 1.0);
    let r = alpha_c(&base, 4.0 * PI, 2.0, &opts(1)).unwrap();
    assert!(rel(r.value, 4.0 * PI) < 1e-6 && r.converged);
    let r = alpha_c(&base, 256.0 * PI, 4.0, &opts(1)).unwrap();
    assert!(rel(r.value, radial_oracle(256.0 * PI)) < 1e-2, "{}", r.value / PI);
    assert!(r.counterexample.is_none());
    let r = alpha_c(&base, 1024.0 * PI, 8.0, &opts(1)).unwrap();
    assert!(rel(r.value, 576.0 * PI) < 1e-2);
}

#[test]
fn maximisers_are_feasible_and_beat_the_radial_start() {
    let base = flat(3, 1.0);
    for (a, c) in [(16.0 * PI, 2.0), (256.0 * PI, 4.0), (256.0 * PI, 16.0)] {
        let r = alpha_c(&base, a, c, &opts(3)).unwrap();
        assert!(rel(r.boundary_area_achieved, a) < 1e-9);
        assert!(rel(r.maximizer.area(), a) < 1e-9);
        assert!(r.maximizer.values().iter().all(|&v| v >= 0.0 && v <= c * (1.0 + 1e-12)));
        assert!(r.value >= r.alpha_radial * (1.0 - 1e-9));
        assert!(r.value <= a * (1.0 + 1e-9));
    }
}

#[test]
fn invalid_requests() {
    let base = flat(3, 1.0);
    assert!(matches!(alpha_c(&base, 1024.0 * PI, 2.0, &opts(0)), Err(Error::Infeasible { .. })));
    assert!(alpha_c(&base, -1.0, 2.0, &opts(0)).is_err());
    assert!(alpha_c(&base, 4.0 * PI, 0.9, &opts(0)).is_err());
    assert!(alpha_limit(&base, 256.0 * PI, &[8.0, 4.0], &opts(0)).is_err());
    assert!(alpha_limit(&base, 256.0 * PI, &[2.0, 4.0], &opts(0)).is_err());
}

#[test]
fn limits_along_cap_schedules() {
    let base = flat(3, 1.0);
    let lim = alpha_limit(&base, 4.0 * PI, &[2.0, 4.0, 8.0], &opts(5)).unwrap();
    assert!(lim.converged && rel(lim.value, 4.0 * PI) < 1e-6);
    let lim = alpha_limit(&base, 256.0 * PI, &[4.0, 8.0, 16.0], &opts(5)).unwrap();
    assert!(lim.converged, "{:?}", lim.trail.iter().map(|t| t.value).collect::<Vec<_>>());
    assert!(rel(lim.value, radial_oracle(256.0 * PI)) < 1e-2);
    assert!(!lim.trail.is_empty());
}

#[test]
fn profile_properties_on_the_radial_grid() {
    let base = flat(3, 1.0);
    let areas = [4.0 * PI, 16.0 * PI, 64.0 * PI, 256.0 * PI];
    let (report, results) = profile_properties(&base, &areas, 8.0, &opts(2)).unwrap();
    assert!(report.all_pass(), "{:?}", report.checks);
    let expect = [1.0, 1.0, 1.0, (2.0 * 2f64.sqrt() - 1.0).powi(2) / 4.0];
    for ((r, a), e) in results.iter().zip(areas).zip(expect) {
        assert!((r.value / a - e).abs() < 1e-2, "A={a}: {}", r.value / a);
    }
    assert!((expect[3] - 0.8358).abs() < 1e-4);
}

#[test]
fn checker_flags_violations() {
    let areas = [1.0, 2.0, 4.0];
    let good = check_profile_values(&areas, &[1.0, 2.0, 3.0], 1e-3);
    assert!(good.iter().all(|c| c.pass));
    let find = |v: &[f64], name: &str| {
        check_profile_values(&areas, v, 1e-3).into_iter().find(|c| c.name == name).unwrap().pass
    };
    assert!(!find(&[1.0, 0.5, 3.0], "nondecreasing"));
    assert!(!find(&[1.0, 2.5, 3.0], "bounded_by_area"));
    assert!(!find(&[1.0, 1.5, 3.9], "ratio_nonincreasing"));
    assert!(!find(&[1.0, 1.0, 4.5], "lipschitz"));
}

#[test]
fn diagnostics_of_maximisers() {
    let base = flat(3, 1.0);
    let r = alpha_c(&base, 256.0 * PI, 4.0, &opts(1)).unwrap();
    let d = maximizer_diagnostics(&base, &r).unwrap();
    assert_eq!(d.contact_measure, 0.0);
    assert!(d.contact_within_bound && d.hbar_min.is_none());
    assert!(d.off_sigma_hbar_max.unwrap() < 1e-3);
    assert!((d.eta0 - 2.0).abs() < 1e-12);
    assert!((d.hbar_bound - 2.0 / 16.0).abs() < 1e-12);

    let r = alpha_c(&base, 4.0 * PI, 1.0, &opts(1)).unwrap();
    let d = maximizer_diagnostics(&base, &r).unwrap();
    assert!(rel(d.contact_measure, 4.0 * PI) < 1e-12);
    assert!(rel(d.contact_bound, 4.0 * PI) < 1e-12 && d.contact_within_bound);
    assert!(d.contact_cap_deviation.unwrap() < 1e-9);
    // f ≡ 1 gives the flat metric: H̄ = 2 on the unit sphere, at the bound
    assert!((d.hbar_max.unwrap() - 2.0).abs() < 1e-6 && d.hbar_within_bound == Some(true));
}

#[test]
fn restarts_agree() {
    let base = flat(3, 1.0);
    let vals: Vec<f64> = [1, 2, 9].iter().map(|&s| alpha_c(&base, 256.0 * PI, 8.0, &opts(s)).unwrap().value).collect();
    for v in &vals {
        assert!(rel(*v, vals[0]) < 1e-2, "{vals:?}");
    }
}

#[test]
fn higher_dimensions_use_constant_data() {
    let base = flat(5, 1.0);
    let w = base.constants().omega;
    let r = alpha_c(&base, 3.0 * w, 2.0, &opts(0)).unwrap();
    assert!(rel(r.value, alpha_radial(&base, 3.0 * w).unwrap()) < 1e-9);
}
