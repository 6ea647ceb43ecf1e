//! Acceptance gates for the whole workspace. Each test covers one
//! numbered criterion, prints a single pass/fail line with the worst
//! measured deviation, and then asserts it.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;

use cavjar_core::estimator::{
    estimate_exp_neg_beta_delta_f, visibility_ratio_functional, visibility_work_identity_report,
    InversionMode, VisibilityPair,
};
use cavjar_core::fock::{suggested_dim, FockSpace};
use cavjar_core::linalg;
use cavjar_core::ramsey::{
    interferometer_scan, visibility_characteristic, visibility_displaced_closed_form,
    visibility_thermal_closed_form, DispersiveCoupling, InteractionConfig,
};
use cavjar_core::states::{delta_f, displaced_thermal_state, DriveProtocol, ThermalParams};
use cavjar_core::work::{
    auto_space, build_propagator, characteristic_function_g_in, default_method,
    tpm_exponential_average_in, AverageMode, PropagatorMethod,
};

fn verdict(criterion: u32, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion:2} {status}: {name} [{detail}]");
    assert!(pass, "criterion {criterion} ({name}): {detail}");
}

fn params(x: f64) -> ThermalParams {
    ThermalParams::from_beta_omega0(x).expect("inside the certified window")
}

fn probe(theta: f64, phases: usize) -> InteractionConfig {
    InteractionConfig::new(DispersiveCoupling::from_shift(1.0).unwrap(), theta)
        .unwrap()
        .with_uniform_phases(phases)
}

/// The three switch-on protocols the work criteria run on: sudden,
/// one oscillator period, fifty periods.
fn work_protocols() -> [DriveProtocol; 3] {
    [
        DriveProtocol::quench(0.0, 1.0),
        DriveProtocol::linear_ramp(0.0, 1.0, 1.0).unwrap(),
        DriveProtocol::linear_ramp(0.0, 1.0, 50.0).unwrap(),
    ]
}

#[test]
fn criterion_01_contrast_routes_agree_pairwise() {
    let started = Instant::now();
    let thetas = [PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI];
    let mut worst = 0.0f64;
    for x in [0.1, 0.5, 1.0, 2.0, 5.0] {
        let p = params(x);
        for a in [0.0, 0.5, 1.0, 2.0] {
            let space = FockSpace::new(suggested_dim(p.mean_occupation(), a * a)).unwrap();
            let field = displaced_thermal_state(space, &p, Complex64::new(a, 0.0)).unwrap();
            for theta in thetas {
                let cfg = probe(theta, 16);
                let mut routes = vec![
                    visibility_displaced_closed_form(&p, Complex64::new(a, 0.0), theta),
                    visibility_characteristic(&field, &cfg),
                    interferometer_scan(&field, &cfg).unwrap().visibility,
                ];
                if a == 0.0 {
                    routes.push(visibility_thermal_closed_form(&p, theta));
                }
                for i in 0..routes.len() {
                    for j in i + 1..routes.len() {
                        worst = worst.max((routes[i] - routes[j]).abs());
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    let pass = worst <= 1e-8 && elapsed.as_secs_f64() < 120.0;
    verdict(
        1,
        "fringe fit, characteristic sum, and closed forms agree pairwise",
        pass,
        &format!("worst dev {worst:.2e} vs 1e-8, elapsed {elapsed:.1?} vs 120s"),
    );
}

#[test]
fn criterion_02_half_turn_contrast_special_values() {
    let mut worst = 0.0f64;
    for x in [0.1, 1.0, 10.0] {
        let p = params(x);
        let tanh_half = (x / 2.0).tanh();
        let thermal = visibility_thermal_closed_form(&p, PI);
        worst = worst.max((thermal - tanh_half).abs());

        let displaced = visibility_displaced_closed_form(&p, Complex64::new(1.0, 0.0), PI);
        let reduction = thermal * (-2.0 * tanh_half).exp();
        worst = worst.max((displaced - reduction).abs());
    }
    verdict(
        2,
        "half-turn contrasts hit tanh(x/2) and its displaced reduction",
        worst <= 1e-10,
        &format!("worst dev {worst:.2e} vs 1e-10"),
    );
}

#[test]
fn criterion_03_limiting_branch_tables() {
    let mut worst_ratio = 0.0f64;
    for (x, tol) in [(0.01, 1e-3), (10.0, 1e-4)] {
        let p = params(x);
        let thermal = visibility_thermal_closed_form(&p, PI);
        let branch = if x < 1.0 { x / 2.0 } else { 1.0 };
        let dev = (thermal / branch - 1.0).abs();
        worst_ratio = worst_ratio.max(dev / tol);

        for a in [1.0, 3.0] {
            let aa = a * a;
            let ratio =
                visibility_displaced_closed_form(&p, Complex64::new(a, 0.0), PI) / thermal;
            // The branch values live in the exponent, so agreement is
            // measured there; small absolute slack in a tiny exponent
            // would otherwise pass vacuously at large displacement.
            let branch_ln = if x < 1.0 { -aa * x } else { -2.0 * aa };
            let dev = (ratio.ln() / branch_ln - 1.0).abs();
            worst_ratio = worst_ratio.max(dev / tol);
        }
    }
    verdict(
        3,
        "hot and cold limiting branches reproduced at their tolerances",
        worst_ratio <= 1.0,
        &format!("worst dev/tol {worst_ratio:.3} vs 1"),
    );
}

#[test]
fn criterion_04_work_average_matches_free_energy_drop() {
    let started = Instant::now();
    let p = params(1.0);
    let mut worst_exact = 0.0f64;
    let mut fewest_hits = 20u32;
    for protocol in work_protocols() {
        let space = auto_space(&p, &protocol);
        let prop = build_propagator(space, &p, &protocol, default_method(&protocol)).unwrap();
        let truth = (-p.beta() * delta_f(&p, &protocol)).exp();

        let exact =
            tpm_exponential_average_in(space, &p, &protocol, &prop, AverageMode::ExactSum)
                .unwrap();
        worst_exact = worst_exact.max((exact.value - truth).abs() / truth);

        let mut hits = 0u32;
        for seed in 1..=20 {
            let mc = tpm_exponential_average_in(
                space,
                &p,
                &protocol,
                &prop,
                AverageMode::MonteCarlo {
                    n_shots: 1_000_000,
                    seed,
                },
            )
            .unwrap();
            if (mc.value - truth).abs() <= 4.0 * mc.std_error.unwrap() {
                hits += 1;
            }
        }
        fewest_hits = fewest_hits.min(hits);
    }
    let elapsed = started.elapsed();
    let pass = worst_exact <= 1e-5 && fewest_hits >= 19 && elapsed.as_secs_f64() < 300.0;
    verdict(
        4,
        "exponential work averages equal the free-energy exponential",
        pass,
        &format!(
            "worst exact-sum dev {worst_exact:.2e} vs 1e-5, sampled hits {fewest_hits}/20 \
             vs 19, elapsed {elapsed:.1?} vs 300s"
        ),
    );
}

#[test]
fn criterion_05_characteristic_function_route_agrees() {
    let p = params(1.0);
    let mut worst = 0.0f64;
    let mut worst_im = 0.0f64;
    for protocol in work_protocols() {
        let space = auto_space(&p, &protocol);
        let prop = build_propagator(space, &p, &protocol, default_method(&protocol)).unwrap();
        let exact =
            tpm_exponential_average_in(space, &p, &protocol, &prop, AverageMode::ExactSum)
                .unwrap();
        let g = characteristic_function_g_in(
            space,
            &p,
            &protocol,
            &prop,
            Complex64::new(0.0, p.beta()),
        )
        .unwrap();
        worst = worst.max((g.re - exact.value).abs() / exact.value);
        worst_im = worst_im.max(g.im.abs());
    }
    verdict(
        5,
        "work characteristic function at imaginary argument matches the sum",
        worst <= 1e-6 && worst_im <= 1e-8,
        &format!("worst rel dev {worst:.2e} vs 1e-6, imaginary part {worst_im:.2e}"),
    );
}

#[test]
fn criterion_06_contrast_functional_is_phase_independent() {
    let mut worst_spread = 0.0f64;
    let mut worst_target = 0.0f64;
    for x in [0.2, 1.0] {
        let p = params(x);
        for aa in [0.5f64, 1.0, 2.0] {
            let alpha = Complex64::new(aa.sqrt(), 0.0);
            let values: Vec<f64> = [PI / 3.0, PI / 2.0, PI]
                .iter()
                .map(|&theta| {
                    let pair = VisibilityPair::from_closed_forms(&p, alpha, theta).unwrap();
                    visibility_ratio_functional(&pair).unwrap()
                })
                .collect();
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            worst_spread = worst_spread.max(hi - lo);
            let target = (aa * x.sinh()).exp();
            for v in values {
                worst_target = worst_target.max((v - target).abs());
            }
        }
    }
    verdict(
        6,
        "contrast-ratio functional ignores the probe phase",
        worst_spread <= 1e-9 && worst_target <= 1e-9,
        &format!(
            "worst phase spread {worst_spread:.2e}, worst dev from exp(|a|^2 sinh x) \
             {worst_target:.2e}, both vs 1e-9"
        ),
    );
}

#[test]
fn criterion_07_three_way_identity_spread() {
    let protocol = DriveProtocol::quench(0.0, 1.0);
    let small = visibility_work_identity_report(
        &params(0.05),
        &protocol,
        PI,
        InversionMode::SmallBeta,
    )
    .unwrap();
    let exact = visibility_work_identity_report(
        &params(1.0),
        &protocol,
        PI,
        InversionMode::ExactInversion,
    )
    .unwrap();
    let pass = small.max_relative_spread <= 3e-5 && exact.max_relative_spread <= 1e-6;
    verdict(
        7,
        "contrast, free-energy, and work members of the identity coincide",
        pass,
        &format!(
            "spread {:.2e} vs 3e-5 at x=0.05 (small-beta), {:.2e} vs 1e-6 at x=1 \
             (exact inversion)",
            small.max_relative_spread, exact.max_relative_spread
        ),
    );
}

#[test]
fn criterion_08_small_beta_error_law() {
    let mut worst_ratio = 0.0f64;
    for x in [0.01, 0.02, 0.05, 0.1] {
        let p = params(x);
        for aa in [0.5f64, 1.0, 2.0] {
            let alpha = Complex64::new(aa.sqrt(), 0.0);
            let pair = VisibilityPair::from_closed_forms(&p, alpha, PI).unwrap();
            let estimate = estimate_exp_neg_beta_delta_f(&pair, InversionMode::SmallBeta).unwrap();
            let error = (estimate.ln() - x * aa).abs();
            let bound = aa * x.powi(3) / 6.0 * (1.0 + 1e-3);
            worst_ratio = worst_ratio.max(error / bound);
        }
    }
    verdict(
        8,
        "small-beta bias follows the cubic error law",
        worst_ratio <= 1.0,
        &format!("worst |ln(est) - x|a|^2| / bound {worst_ratio:.5} vs 1"),
    );
}

#[test]
fn criterion_09_numerical_hygiene() {
    // State gallery: every constructed state passes its own invariants
    // and reports clean diagnostics.
    let mut worst_herm = 0.0f64;
    let mut worst_trace = 0.0f64;
    let mut worst_eig = 0.0f64;
    let mut worst_tail = 0.0f64;
    for x in [0.1, 1.0, 10.0] {
        let p = params(x);
        for a in [0.0, 1.0, 2.0] {
            let space = FockSpace::new(suggested_dim(p.mean_occupation(), a * a)).unwrap();
            let field = displaced_thermal_state(space, &p, Complex64::new(a, 0.0)).unwrap();
            let d = field.diagnostics();
            worst_herm = worst_herm.max(d.hermiticity_defect);
            worst_trace = worst_trace.max(d.trace_defect);
            worst_eig = worst_eig.max(-d.min_eigenvalue);
            worst_tail = worst_tail.max(d.top_level_weight);
        }
    }
    let states_ok = worst_herm <= 1e-12 && worst_trace <= 1e-12 && worst_eig <= 1e-10
        && worst_tail <= 1e-8;

    // Exact sums must not move when the truncation grows.
    let p = params(1.0);
    let mut worst_shift = 0.0f64;
    let mut worst_unitarity = 0.0f64;
    for protocol in work_protocols() {
        let base = auto_space(&p, &protocol);
        let grown = FockSpace::new(base.dim() + 16).unwrap();
        let mut values = [0.0f64; 2];
        for (slot, space) in [base, grown].into_iter().enumerate() {
            let prop =
                build_propagator(space, &p, &protocol, default_method(&protocol)).unwrap();
            worst_unitarity = worst_unitarity.max(linalg::unitarity_defect(&prop.matrix));
            values[slot] =
                tpm_exponential_average_in(space, &p, &protocol, &prop, AverageMode::ExactSum)
                    .unwrap()
                    .value;
        }
        worst_shift = worst_shift.max((values[0] - values[1]).abs() / values[1]);
    }

    // Sliced propagators, refined until self-consistent, land on the
    // closed form.
    let mut worst_slice = 0.0f64;
    for (lambda_final, duration) in [(1.0, 1.0), (0.5, 10.0)] {
        let protocol = DriveProtocol::linear_ramp(0.0, lambda_final, duration).unwrap();
        let space = auto_space(&p, &protocol);
        let prop = build_propagator(
            space,
            &p,
            &protocol,
            PropagatorMethod::Trotter { n_steps: 2000 },
        )
        .unwrap();
        worst_slice = worst_slice.max(prop.magnus_defect.unwrap());
    }

    let pass = states_ok && worst_shift <= 1e-8 && worst_unitarity <= 1e-8
        && worst_slice <= 1e-6;
    verdict(
        9,
        "states, truncation stability, unitarity, and sliced propagators stay clean",
        pass,
        &format!(
            "herm {worst_herm:.1e}, trace {worst_trace:.1e}, eig floor {worst_eig:.1e}, \
             tail {worst_tail:.1e}; dim+16 shift {worst_shift:.2e} vs 1e-8; unitarity \
             {worst_unitarity:.2e} vs 1e-8; slice-vs-closed-form {worst_slice:.2e} vs 1e-6"
        ),
    );
}

#[test]
fn criterion_10_deterministic_cli_output() {
    let exe = env!("CARGO_BIN_EXE_cavjar");
    let run = |extra: &[&str], json: bool| -> Vec<u8> {
        let mut args = vec![
            "jarzynski",
            "--beta-omega0",
            "0.5,1",
            "--alpha",
            "1",
            "--n-shots",
            "20000",
            "--seed",
            "7",
        ];
        if json {
            args.extend(["--format", "json"]);
        }
        args.extend(extra);
        let out = Command::new(exe)
            .args(&args)
            .env("SOURCE_DATE_EPOCH", "1700000000")
            .output()
            .expect("binary runs");
        assert_eq!(out.status.code(), Some(0), "args: {args:?}");
        out.stdout
    };

    let csv_repeat = run(&[], false) == run(&[], false);
    let csv_threads = run(&["--threads", "1"], false) == run(&["--threads", "4"], false);
    let json_repeat = run(&[], true) == run(&[], true);
    let pass = csv_repeat && csv_threads && json_repeat;
    verdict(
        10,
        "fixed seed gives byte-identical output across runs and thread counts",
        pass,
        &format!(
            "csv repeat identical: {csv_repeat}, csv across threads identical: \
             {csv_threads}, json repeat identical: {json_repeat}"
        ),
    );
}
