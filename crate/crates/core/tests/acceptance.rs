//! Acceptance criteria, one PASS/FAIL line each. Tolerances and time limits
//! are fixed here.

mod common;

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use harmconf::harmonic::harmonic_extension;
use harmconf::invariants::{invariants, invariants_rescaled, mu_direct, mu_formula, mu_lower_demo, mu_maximizer_data};
use harmconf::masschecks::{check_i_sum, check_mu_alpha, zas_mass};
use harmconf::minarea::{mean_curvature_conformal, min_area_radial, schwarzschild_min_area_oracle, EnclosingSurface};
use harmconf::profile::{alpha_c, alpha_limit, c_min, check_profile_values, maximizer_diagnostics, AlphaOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20261019;
const CAPS: [f64; 4] = [2.0, 4.0, 8.0, 16.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run(id: usize, title: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    let t = start.elapsed();
    let pass = o.pass && t <= limit;
    println!(
        "{} [{id}] {title}: {} ({:.2} s, limit {} s)",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        t.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn unit_ball_invariants() -> Outcome {
    let mut worst = 0.0f64;
    let mut slow = 0.0f64;
    for n in 3..=7 {
        let t = Instant::now();
        let inv = invariants(&radial_ext(&flat(n, 1.0)));
        slow = slow.max(t.elapsed().as_secs_f64());
        worst = worst.max((inv.i1 + 2.0).abs()).max((inv.i2 - 2.0).abs());
    }
    outcome(worst <= 1e-6 && slow <= 1.0, format!("max error {worst:.2e}, slowest n {slow:.3} s"))
}

fn conformal_invariance() -> Outcome {
    let ext = flat_ext(3, 4);
    let inv = invariants(&ext);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut e_inv, mut e_cap, mut e_mass) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..5 {
        let c0 = rng.gen_range(0.5..3.0);
        let (a, b, d) = (rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
        let f: Vec<f64> = ext
            .grid()
            .nodes()
            .iter()
            .map(|nd| {
                let (s, c) = nd.theta.sin_cos();
                c0 * (1.0 + a * c + b * s * nd.phi.cos() + d * (3.0 * c * c - 1.0))
            })
            .collect();
        let u = harmonic_extension(&ext, &f, 1.0).unwrap();
        let re = invariants_rescaled(&u).unwrap();
        e_inv = e_inv.max(rel(re.i1, inv.i1)).max(rel(re.i2, inv.i2));
        e_cap = e_cap.max((re.capacity - (inv.capacity + u.expansion_coefficient())).abs());
        e_mass = e_mass.max((re.adm_mass_base - (inv.adm_mass_base + 2.0 * u.expansion_coefficient())).abs());
    }
    outcome(
        e_inv <= 1e-6 && e_cap <= 1e-8 && e_mass <= 1e-8,
        format!("invariants rel {e_inv:.2e}, capacity law {e_cap:.2e}, mass law {e_mass:.2e}"),
    )
}

fn mass_profile() -> Outcome {
    let ext = flat_ext(3, 2);
    let inv = invariants(&ext);
    let (mut e_mu, mut e_arg) = (0.0f64, 0.0f64);
    for a in [4.0, 16.0, 64.0, 256.0].map(|k| k * PI) {
        let formula = mu_formula(&inv, 3, a).unwrap();
        let direct = mu_direct(&ext, a, 3, SEED).unwrap();
        e_mu = e_mu.max((direct.mu - formula).abs() / formula.abs().max(1.0));
        let f0 = mu_maximizer_data(&ext, a).unwrap();
        for (x, y) in direct.maximizer.values().iter().zip(f0.values()) {
            e_arg = e_arg.max((x - y).abs());
        }
    }
    outcome(e_mu <= 1e-3 && e_arg <= 1e-4, format!("mu rel {e_mu:.2e}, argmax {e_arg:.2e}"))
}

fn schwarzschild_area_law() -> Outcome {
    let ext = flat_ext(3, 0);
    let mut areas: Vec<f64> = (0..50).map(|i| PI * 1e4f64.powf(i as f64 / 49.0)).collect();
    areas.push(64.0 * PI);
    let mut worst = 0.0f64;
    for a in areas {
        let u = harmonic_extension(&ext, &[(a / (4.0 * PI)).powf(0.25)], 1.0).unwrap();
        let (got, _) = min_area_radial(&u).unwrap();
        worst = worst.max(rel(got, schwarzschild_min_area_oracle(3, a).unwrap()));
    }
    outcome(worst <= 1e-6, format!("51 areas, max rel {worst:.2e}"))
}

fn feasible(a: f64) -> Vec<f64> {
    let lo = c_min(&flat(3, 1.0), a).unwrap().max(1.0);
    CAPS.iter().cloned().filter(|c| *c >= lo).collect()
}

/// Returns the limit values for criteria 5, 6 and 10.
fn area_profile(values: &mut Vec<(f64, f64)>) -> Outcome {
    let base = flat(3, 1.0);
    let opts = AlphaOptions { seed: SEED, ..AlphaOptions::default() };
    let mut worst = 0.0f64;
    let mut records = 0;
    let mut unrecorded = 0;
    let mut nonconverged = 0;
    for a in [4.0, 64.0, 256.0, 1024.0].map(|k| k * PI) {
        let lim = alpha_limit(&base, a, &feasible(a), &opts).unwrap();
        for r in &lim.trail {
            let excess = (r.value - r.alpha_radial) / r.alpha_radial;
            if excess > 1e-2 {
                if r.counterexample.is_some() {
                    records += 1;
                } else {
                    unrecorded += 1;
                }
            }
            nonconverged += usize::from(!r.converged);
        }
        let radial = lim.trail.last().unwrap().alpha_radial;
        worst = worst.max((radial - lim.value) / radial);
        values.push((a, lim.value));
    }
    outcome(
        worst <= 1e-2 && unrecorded == 0,
        format!(
            "max shortfall below radial {worst:.2e}, counterexample records {records}, unrecorded {unrecorded}, non-converged {nonconverged}"
        ),
    )
}

fn profile_properties(values: &[(f64, f64)]) -> Outcome {
    let areas: Vec<f64> = values.iter().map(|v| v.0).collect();
    let vals: Vec<f64> = values.iter().map(|v| v.1).collect();
    let checks = check_profile_values(&areas, &vals, 1e-3);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    outcome(!values.is_empty() && failed.is_empty(), format!("{} checks, failed {failed:?}", checks.len()))
}

fn contact_diagnostics() -> Outcome {
    let base = flat(3, 1.0);
    let opts = AlphaOptions { seed: SEED, ..AlphaOptions::default() };
    let r = alpha_c(&base, 256.0 * PI, 4.0, &opts).unwrap();
    let d = maximizer_diagnostics(&base, &r).unwrap();
    let off = d.off_sigma_hbar_max.unwrap_or(0.0);
    let first = d.contact_measure <= d.contact_bound * (1.0 + 1e-9) && off <= 1e-3;
    let r1 = alpha_c(&base, 4.0 * PI, 1.0, &opts).unwrap();
    let d1 = maximizer_diagnostics(&base, &r1).unwrap();
    let dev = d1.contact_cap_deviation.unwrap_or(f64::INFINITY);
    let second = (d1.contact_measure - d1.contact_bound).abs() <= 1e-9 * d1.contact_bound && dev <= 1e-6;
    outcome(
        first && second,
        format!(
            "256π/C=4: contact {:.3e} <= {:.3e}, off-Σ |H̄| {off:.2e}; 4π/C=1: contact {:.6} vs {:.6}, |f - C| {dev:.1e}",
            d.contact_measure, d.contact_bound, d1.contact_measure, d1.contact_bound
        ),
    )
}

fn horizon() -> Outcome {
    let ext = flat_ext(3, 2);
    let u = harmonic_extension(&ext, &vec![2.0; ext.grid().len()], 1.0).unwrap();
    let s = EnclosingSurface::boundary(&u);
    let worst = (0..ext.grid().len()).map(|i| mean_curvature_conformal(&u, &s, i).unwrap().abs()).fold(0.0, f64::max);
    outcome(worst <= 1e-6, format!("max |H̄| {worst:.2e}"))
}

fn cap_concentration() -> Outcome {
    let ext = axi_ext(&flat(3, 1.0), 256);
    let out = mu_lower_demo(&ext, 64.0 * PI, &[PI, 1.0, 0.3, 0.1, 0.05]).unwrap();
    let decreasing = out.windows(2).all(|w| w[1].1 < w[0].1);
    let last = out.last().unwrap().1;
    let masses: Vec<String> = out.iter().map(|o| format!("{:.4}", o.1)).collect();
    outcome(decreasing && rel(last, -2.0) <= 0.05, format!("masses [{}]", masses.join(", ")))
}

fn mass_checks(values: &[(f64, f64)]) -> Outcome {
    let base = flat(3, 1.0);
    let sum = check_i_sum(&base).unwrap();
    let mut worst = 0.0f64;
    let mut found = 0;
    for a in [256.0 * PI, 1024.0 * PI] {
        if let Some(&(_, alpha)) = values.iter().find(|v| v.0 == a) {
            let r = check_mu_alpha(&base, a, alpha).unwrap();
            worst = worst.max(r.margin.abs() / r.rhs);
            found += 1;
        }
    }
    let z = zas_mass(&base).unwrap();
    let zerr = (z.zas_mass + 2.0).abs().max((z.adm_mass_conformal + 2.0).abs());
    outcome(
        sum.margin.abs() <= 1e-6 && found == 2 && worst <= 1e-3 && zerr <= 1e-6,
        format!("I1+I2 margin {:.2e}, mu-alpha rel gap {worst:.2e}, ZAS error {zerr:.2e}", sum.margin),
    )
}

fn cli_suite() -> Outcome {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let config = root.join("configs/suite.json");
    let tmp = tempfile::tempdir().unwrap();
    let mut codes = Vec::new();
    for run in ["a", "b"] {
        let out = Command::new(env!("CARGO_BIN_EXE_harmconf"))
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(tmp.path().join(run))
            .output()
            .unwrap();
        codes.push(out.status.code());
    }
    let mut identical = true;
    for name in ["mu_profile.csv", "alpha_profile.csv"] {
        let a = fs::read(tmp.path().join("a").join(name)).ok();
        let b = fs::read(tmp.path().join("b").join(name)).ok();
        identical &= a.is_some() && a == b;
    }
    outcome(
        codes.iter().all(|c| *c == Some(0)) && identical,
        format!("exit codes {codes:?}, CSVs identical {identical}"),
    )
}

fn main() {
    let mut values = Vec::new();
    let secs = Duration::from_secs;
    let results = [
        run(1, "unit-ball invariants, n = 3..7", secs(5), unit_ball_invariants),
        run(2, "conformal invariance, capacity and mass laws", secs(10), conformal_invariance),
        run(3, "mass profile: direct vs closed form", secs(10), mass_profile),
        run(4, "Schwarzschild minimal-area law", secs(5), schwarzschild_area_law),
        run(5, "area profile vs radial oracle", secs(300), || area_profile(&mut values)),
        run(6, "area profile properties", secs(1), || profile_properties(&values)),
        run(7, "maximiser contact diagnostics", secs(30), contact_diagnostics),
        run(8, "horizon minimality", secs(1), horizon),
        run(9, "cap concentration toward I1", secs(30), cap_concentration),
        run(10, "mass inequality checks", secs(10), || mass_checks(&values)),
        run(11, "CLI suite determinism", secs(600), cli_suite),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
