//! Free-energy estimation from interferometric visibility pairs.
//!
//! The ratio of the undisplaced to the displaced fringe contrast,
//! raised to 1/(1 - V_th^2), equals exp(|alpha|^2 sinh(beta omega0))
//! at every interaction time; for small beta omega0 the exponent is
//! close to beta omega0 |alpha|^2 = -beta DeltaF of the drive switch-on,
//! and dividing the log by sinh(x)/x recovers -beta DeltaF exactly.
//! This module exposes that inversion, its error laws, a synthetic
//! measurement-noise study, and a three-way consistency report against
//! the free-energy difference and the exponential work average.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ramsey::{visibility_displaced_closed_form, visibility_thermal_closed_form};
use crate::states::{delta_f, DriveProtocol, ThermalParams, BETA_OMEGA_MAX, BETA_OMEGA_MIN};
use crate::work::{tpm_exponential_average, AverageMode};

/// Contrast above which the ratio exponent 1/(1 - v^2) is treated as
/// degenerate; reached when the accumulated phase is a multiple of a
/// full turn.
pub const DEGENERATE_CONTRAST: f64 = 1.0 - 1e-9;

/// One undisplaced/displaced contrast measurement at a common
/// interaction time.
#[derive(Debug, Clone, Copy)]
pub struct VisibilityPair {
    v_thermal: f64,
    v_displaced: f64,
    beta_omega0: f64,
}

impl VisibilityPair {
    /// Requires 0 < v_displaced <= v_thermal <= 1 (displacement only
    /// ever damps the contrast) and an in-window inverse temperature.
    pub fn new(v_thermal: f64, v_displaced: f64, beta_omega0: f64) -> Result<Self> {
        if !v_thermal.is_finite() || !v_displaced.is_finite() {
            return Err(Error::Domain("contrasts must be finite".into()));
        }
        if !(v_displaced > 0.0) || v_displaced > v_thermal || v_thermal > 1.0 {
            return Err(Error::Domain(format!(
                "contrasts must satisfy 0 < displaced <= undisplaced <= 1, \
                 got {v_displaced} and {v_thermal}"
            )));
        }
        if !beta_omega0.is_finite()
            || beta_omega0 <= BETA_OMEGA_MIN
            || beta_omega0 >= BETA_OMEGA_MAX
        {
            return Err(Error::Range(format!(
                "beta omega0 = {beta_omega0} outside ({BETA_OMEGA_MIN}, {BETA_OMEGA_MAX})"
            )));
        }
        Ok(VisibilityPair {
            v_thermal,
            v_displaced,
            beta_omega0,
        })
    }

    /// Closed-form pair for a displaced thermal field probed at
    /// accumulated phase `omega_dt`.
    pub fn from_closed_forms(p: &ThermalParams, alpha: Complex64, omega_dt: f64) -> Result<Self> {
        VisibilityPair::new(
            visibility_thermal_closed_form(p, omega_dt),
            visibility_displaced_closed_form(p, alpha, omega_dt),
            p.beta_omega0(),
        )
    }

    pub fn v_thermal(&self) -> f64 {
        self.v_thermal
    }

    pub fn v_displaced(&self) -> f64 {
        self.v_displaced
    }

    pub fn beta_omega0(&self) -> f64 {
        self.beta_omega0
    }
}

/// How the contrast-ratio functional is turned into e^{-beta DeltaF}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversionMode {
    /// Use the functional as-is; exact only to leading order in
    /// beta omega0.
    SmallBeta,
    /// Rescale the log by beta omega0 / sinh(beta omega0), undoing the
    /// sinh exactly at any temperature.
    ExactInversion,
}

/// (v_thermal / v_displaced)^{1/(1 - v_thermal^2)}, the
/// interaction-time-independent contrast functional. Equals
/// exp(|alpha|^2 sinh(beta omega0)) for closed-form inputs.
pub fn visibility_ratio_functional(pair: &VisibilityPair) -> Result<f64> {
    if pair.v_thermal >= DEGENERATE_CONTRAST {
        return Err(Error::Degenerate(format!(
            "undisplaced contrast {} leaves no thermal dephasing to compare \
             against; probe at a phase away from full turns",
            pair.v_thermal
        )));
    }
    let power = 1.0 / (1.0 - pair.v_thermal * pair.v_thermal);
    Ok((pair.v_thermal / pair.v_displaced).powf(power))
}

/// Estimate of e^{-beta DeltaF} for the switch-on whose displaced
/// contrast entered the pair.
pub fn estimate_exp_neg_beta_delta_f(pair: &VisibilityPair, mode: InversionMode) -> Result<f64> {
    let functional = visibility_ratio_functional(pair)?;
    Ok(match mode {
        InversionMode::SmallBeta => functional,
        InversionMode::ExactInversion => {
            let x = pair.beta_omega0;
            functional.powf(x / x.sinh())
        }
    })
}

/// Free-energy difference estimate -ln(e^{-beta DeltaF}) / beta with
/// beta = beta_omega0 / omega0.
pub fn estimate_delta_f(pair: &VisibilityPair, mode: InversionMode, omega0: f64) -> Result<f64> {
    if !(omega0 > 0.0) || !omega0.is_finite() {
        return Err(Error::Domain(format!(
            "oscillator frequency must be positive, got {omega0}"
        )));
    }
    let est = estimate_exp_neg_beta_delta_f(pair, mode)?;
    Ok(-est.ln() * omega0 / pair.beta_omega0)
}

/// Three-way consistency record: the contrast functional, the exact
/// free-energy exponential, and the two-point-measurement work
/// average, all for the same switch-on protocol.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    /// Contrast-ratio estimate of e^{-beta DeltaF} in the chosen mode.
    pub visibility_functional: f64,
    /// e^{-beta DeltaF} from the partition functions.
    pub exp_neg_beta_delta_f: f64,
    /// <e^{-beta DeltaE}> from exact two-point-measurement statistics.
    pub tpm_average: f64,
    /// Undisplaced contrast entering the functional.
    pub v_thermal: f64,
    /// Displaced contrast entering the functional.
    pub v_displaced: f64,
    /// |functional - exact| / exact.
    pub dev_functional_vs_exact: f64,
    /// |tpm - exact| / exact.
    pub dev_tpm_vs_exact: f64,
    /// |functional - tpm| / tpm.
    pub dev_functional_vs_tpm: f64,
    /// (max - min) / min over the three members.
    pub max_relative_spread: f64,
    pub mode: InversionMode,
}

/// Evaluates all three members of the contrast / free-energy / work
/// identity for a switch-on protocol starting from the undriven
/// equilibrium, probing the contrasts at accumulated phase `omega_dt`.
pub fn visibility_work_identity_report(
    p: &ThermalParams,
    protocol: &DriveProtocol,
    omega_dt: f64,
    mode: InversionMode,
) -> Result<IdentityReport> {
    if protocol.lambda_initial() != 0.0 {
        return Err(Error::Domain(format!(
            "the contrast comparison needs a switch-on from the undriven \
             equilibrium; initial drive is {}",
            protocol.lambda_initial()
        )));
    }
    let alpha = Complex64::new(protocol.alpha_final(p.omega0()), 0.0);
    let pair = VisibilityPair::from_closed_forms(p, alpha, omega_dt)?;
    let visibility_functional = estimate_exp_neg_beta_delta_f(&pair, mode)?;
    let exp_neg_beta_delta_f = (-p.beta() * delta_f(p, protocol)).exp();
    let tpm = tpm_exponential_average(p, protocol, AverageMode::ExactSum)?;

    let members = [visibility_functional, exp_neg_beta_delta_f, tpm.value];
    let lo = members.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = members.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(IdentityReport {
        visibility_functional,
        exp_neg_beta_delta_f,
        tpm_average: tpm.value,
        v_thermal: pair.v_thermal,
        v_displaced: pair.v_displaced,
        dev_functional_vs_exact: (visibility_functional - exp_neg_beta_delta_f).abs()
            / exp_neg_beta_delta_f,
        dev_tpm_vs_exact: (tpm.value - exp_neg_beta_delta_f).abs() / exp_neg_beta_delta_f,
        dev_functional_vs_tpm: (visibility_functional - tpm.value).abs() / tpm.value,
        max_relative_spread: (hi - lo) / lo,
        mode,
    })
}

/// Adds independent Gaussian noise of scale `sigma` to both contrasts,
/// clipping so the pair stays valid (positive, ordered, at most 1).
pub fn perturbed_pair<R: rand::Rng>(
    pair: &VisibilityPair,
    sigma: f64,
    rng: &mut R,
) -> Result<VisibilityPair> {
    let g_t: f64 = StandardNormal.sample(rng);
    let g_d: f64 = StandardNormal.sample(rng);
    let vt = (pair.v_thermal + sigma * g_t).clamp(1e-12, 1.0);
    let vd = (pair.v_displaced + sigma * g_d).clamp(1e-12, vt);
    VisibilityPair::new(vt, vd, pair.beta_omega0)
}

/// Free-energy estimates over `n_trials` independently perturbed
/// copies of the pair; a deterministic study keyed by `seed`.
pub fn noisy_delta_f_estimates(
    pair: &VisibilityPair,
    mode: InversionMode,
    omega0: f64,
    sigma: f64,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let noisy = perturbed_pair(pair, sigma, &mut rng)?;
        out.push(estimate_delta_f(&noisy, mode, omega0)?);
    }
    Ok(out)
}

/// First-order propagation of contrast noise of scale `sigma` into the
/// free-energy estimate: sigma times the quadrature sum of the two
/// partial derivatives of the estimator.
pub fn delta_f_first_order_noise(
    pair: &VisibilityPair,
    mode: InversionMode,
    omega0: f64,
    sigma: f64,
) -> Result<f64> {
    if pair.v_thermal >= DEGENERATE_CONTRAST {
        return Err(Error::Degenerate(
            "noise propagation degenerates with the functional itself".into(),
        ));
    }
    let vt = pair.v_thermal;
    let vd = pair.v_displaced;
    let one_minus = 1.0 - vt * vt;
    let d_vd = -1.0 / (vd * one_minus);
    let d_vt = (one_minus / vt + 2.0 * vt * (vt / vd).ln()) / (one_minus * one_minus);
    let scale = match mode {
        InversionMode::SmallBeta => 1.0,
        InversionMode::ExactInversion => pair.beta_omega0 / pair.beta_omega0.sinh(),
    };
    Ok((omega0 / pair.beta_omega0) * scale * sigma * (d_vt * d_vt + d_vd * d_vd).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(x: f64) -> ThermalParams {
        ThermalParams::from_beta_omega0(x).unwrap()
    }

    fn closed_pair(x: f64, alpha_sq: f64, omega_dt: f64) -> VisibilityPair {
        let alpha = Complex64::new(alpha_sq.sqrt(), 0.0);
        VisibilityPair::from_closed_forms(&params(x), alpha, omega_dt).unwrap()
    }

    #[test]
    fn functional_recovers_the_sinh_exponential() {
        let pi = std::f64::consts::PI;
        for &x in &[0.2, 1.0] {
            for &aa in &[0.5, 1.0, 2.0] {
                let pair = closed_pair(x, aa, pi);
                let functional = visibility_ratio_functional(&pair).unwrap();
                let expected = (aa * x.sinh()).exp();
                assert!(
                    (functional - expected).abs() / expected < 1e-9,
                    "x = {x}, |alpha|^2 = {aa}: {functional} vs {expected}"
                );
            }
        }
        // The printed reference point: x = 0.5, |alpha|^2 = 1.
        let pair = closed_pair(0.5, 1.0, pi);
        let functional = visibility_ratio_functional(&pair).unwrap();
        assert!((functional - (0.5f64.sinh()).exp()).abs() < 1e-10);
    }

    #[test]
    fn functional_is_interaction_time_independent() {
        let pi = std::f64::consts::PI;
        for &x in &[0.2, 1.0] {
            for &aa in &[0.5, 1.0, 2.0] {
                let reference = visibility_ratio_functional(&closed_pair(x, aa, pi)).unwrap();
                for &theta in &[pi / 3.0, pi / 2.0, 3.0 * pi / 4.0] {
                    let other =
                        visibility_ratio_functional(&closed_pair(x, aa, theta)).unwrap();
                    assert!(
                        (other - reference).abs() / reference < 1e-9,
                        "x = {x}, aa = {aa}, theta = {theta}"
                    );
                }
            }
        }
    }

    #[test]
    fn undisplaced_input_gives_unit_estimate() {
        let pair = closed_pair(1.0, 0.0, std::f64::consts::PI);
        assert_eq!(pair.v_thermal(), pair.v_displaced());
        let f = visibility_ratio_functional(&pair).unwrap();
        assert!((f - 1.0).abs() < 1e-14);
        for mode in [InversionMode::SmallBeta, InversionMode::ExactInversion] {
            let est = estimate_exp_neg_beta_delta_f(&pair, mode).unwrap();
            assert!((est - 1.0).abs() < 1e-14);
            let df = estimate_delta_f(&pair, mode, 1.0).unwrap();
            assert!(df.abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_contrast_is_refused() {
        let pair = VisibilityPair::new(1.0, 0.5, 1.0).unwrap();
        assert!(matches!(
            visibility_ratio_functional(&pair).unwrap_err(),
            Error::Degenerate(_)
        ));
        // A full-turn phase drives the closed form to exactly 1.
        let full_turn = closed_pair(1.0, 1.0, 0.0);
        assert!(matches!(
            visibility_ratio_functional(&full_turn).unwrap_err(),
            Error::Degenerate(_)
        ));
    }

    #[test]
    fn pair_validation_rejects_bad_inputs() {
        assert!(matches!(
            VisibilityPair::new(0.5, 0.6, 1.0).unwrap_err(),
            Error::Domain(_)
        ));
        assert!(matches!(
            VisibilityPair::new(1.2, 0.5, 1.0).unwrap_err(),
            Error::Domain(_)
        ));
        assert!(matches!(
            VisibilityPair::new(0.5, 0.0, 1.0).unwrap_err(),
            Error::Domain(_)
        ));
        assert!(matches!(
            VisibilityPair::new(0.5, 0.4, 60.0).unwrap_err(),
            Error::Range(_)
        ));
    }

    #[test]
    fn exact_inversion_round_trips_the_free_energy() {
        let pi = std::f64::consts::PI;
        for &x in &[0.1, 0.5, 1.0, 2.0, 5.0] {
            for &aa in &[0.5, 1.0, 2.0] {
                let pair = closed_pair(x, aa, pi);
                let est = estimate_exp_neg_beta_delta_f(&pair, InversionMode::ExactInversion)
                    .unwrap();
                let expected = (aa * x).exp();
                assert!(
                    (est - expected).abs() / expected < 1e-9,
                    "x = {x}, aa = {aa}: {est} vs {expected}"
                );
                let df = estimate_delta_f(&pair, InversionMode::ExactInversion, 1.0).unwrap();
                assert!(
                    (df + aa).abs() / aa < 1e-9,
                    "free energy estimate {df} should be {}",
                    -aa
                );
            }
        }
    }

    #[test]
    fn small_beta_error_follows_the_cubic_law() {
        let pi = std::f64::consts::PI;
        for &x in &[0.01, 0.02, 0.05, 0.1] {
            for &aa in &[0.5, 1.0, 2.0] {
                let pair = closed_pair(x, aa, pi);
                let est =
                    estimate_exp_neg_beta_delta_f(&pair, InversionMode::SmallBeta).unwrap();
                let err = (est.ln() - aa * x).abs();
                let bound = aa * x * x * x / 6.0 * (1.0 + 1e-3);
                assert!(
                    err <= bound,
                    "x = {x}, aa = {aa}: log error {err:.3e} above {bound:.3e}"
                );
                // The estimator genuinely overshoots by the sinh excess,
                // so the error is also bounded away from zero.
                assert!(err >= aa * x * x * x / 6.0 * 0.9);
            }
        }
    }

    #[test]
    fn estimate_is_monotone_in_displacement() {
        let pi = std::f64::consts::PI;
        let mut last = 0.0;
        for &aa in &[0.25, 0.5, 1.0, 2.0, 4.0] {
            let pair = closed_pair(1.0, aa, pi);
            let est =
                estimate_exp_neg_beta_delta_f(&pair, InversionMode::ExactInversion).unwrap();
            assert!(est > last, "estimate not increasing at |alpha|^2 = {aa}");
            last = est;
        }
    }

    #[test]
    fn noise_study_matches_first_order_propagation() {
        let pi = std::f64::consts::PI;
        let pair = closed_pair(1.0, 1.0, pi);
        let sigma = 1e-4;
        let clean = estimate_delta_f(&pair, InversionMode::ExactInversion, 1.0).unwrap();
        let bound =
            delta_f_first_order_noise(&pair, InversionMode::ExactInversion, 1.0, sigma)
                .unwrap();
        let estimates =
            noisy_delta_f_estimates(&pair, InversionMode::ExactInversion, 1.0, sigma, 1000, 7)
                .unwrap();
        let mut errors: Vec<f64> = estimates.iter().map(|e| (e - clean).abs()).collect();
        errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = errors[errors.len() / 2];
        assert!(
            median <= 10.0 * bound,
            "median error {median:.3e} far above propagated scale {bound:.3e}"
        );
        // The median of |N(0, s)| is 0.674 s, so the ratio must sit
        // near that if the propagation is calibrated.
        assert!(
            median / bound > 0.2 && median / bound < 2.0,
            "median/bound ratio {} off scale",
            median / bound
        );
    }

    #[test]
    fn identity_report_closes_the_loop_for_quenches() {
        let quench = DriveProtocol::quench(0.0, 1.0);
        let pi = std::f64::consts::PI;

        let report = visibility_work_identity_report(
            &params(0.05),
            &quench,
            pi,
            InversionMode::SmallBeta,
        )
        .unwrap();
        assert!(
            report.max_relative_spread <= 3e-5,
            "small-beta spread {:.3e}",
            report.max_relative_spread
        );

        let report = visibility_work_identity_report(
            &params(1.0),
            &quench,
            pi,
            InversionMode::ExactInversion,
        )
        .unwrap();
        assert!(
            report.max_relative_spread <= 1e-6,
            "exact-inversion spread {:.3e}",
            report.max_relative_spread
        );
        assert!((report.exp_neg_beta_delta_f - 1f64.exp()).abs() < 1e-12);
        assert!(report.dev_functional_vs_exact <= 1e-6);
        assert!(report.dev_tpm_vs_exact <= 1e-6);
        assert!(report.dev_functional_vs_tpm <= 2e-6);
    }

    #[test]
    fn identity_report_requires_a_switch_on() {
        let err = visibility_work_identity_report(
            &params(1.0),
            &DriveProtocol::quench(0.5, 1.0),
            std::f64::consts::PI,
            InversionMode::ExactInversion,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn undriven_identity_report_is_all_ones() {
        let report = visibility_work_identity_report(
            &params(1.0),
            &DriveProtocol::quench(0.0, 0.0),
            std::f64::consts::PI,
            InversionMode::ExactInversion,
        )
        .unwrap();
        assert!((report.visibility_functional - 1.0).abs() < 1e-12);
        assert!((report.exp_neg_beta_delta_f - 1.0).abs() < 1e-12);
        assert!((report.tpm_average - 1.0).abs() < 1e-10);
    }
}
