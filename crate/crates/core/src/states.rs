//! Thermal and displaced-thermal cavity states, drive protocols, and
//! the closed-form partition and free-energy expressions they obey.
//!
//! Energies are measured in units where hbar = 1; the single frequency
//! scale is `omega0` and the temperature enters only through the
//! dimensionless product `beta * omega0`.

use ndarray::prelude::*;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{FieldState, FockSpace, StateMeta};

/// Certified window for beta * omega0. Outside this range the closed
/// forms or the capped truncation dimensions are no longer trustworthy.
pub const BETA_OMEGA_MIN: f64 = 1e-6;
pub const BETA_OMEGA_MAX: f64 = 50.0;

/// Inverse temperature and oscillator frequency, validated together so
/// every downstream formula can assume beta * omega0 lies in the
/// certified window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParams {
    beta: f64,
    omega0: f64,
}

impl ThermalParams {
    pub fn new(beta: f64, omega0: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Domain(format!(
                "inverse temperature must be finite and positive, got {beta}"
            )));
        }
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::Domain(format!(
                "oscillator frequency must be finite and positive, got {omega0}"
            )));
        }
        let x = beta * omega0;
        if x <= BETA_OMEGA_MIN || x >= BETA_OMEGA_MAX {
            return Err(Error::Range(format!(
                "beta * omega0 = {x:.6e} outside the certified window \
                 ({BETA_OMEGA_MIN:.0e}, {BETA_OMEGA_MAX})"
            )));
        }
        Ok(Self { beta, omega0 })
    }

    /// Convenience constructor with omega0 = 1, so beta equals the
    /// dimensionless product directly.
    pub fn from_beta_omega0(x: f64) -> Result<Self> {
        Self::new(x, 1.0)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn beta_omega0(&self) -> f64 {
        self.beta * self.omega0
    }

    /// Mean thermal occupation 1 / (e^{beta omega0} - 1).
    pub fn mean_occupation(&self) -> f64 {
        1.0 / self.beta_omega0().exp_m1()
    }
}

/// Time dependence of the linear drive amplitude.
#[derive(Debug, Clone, PartialEq)]
pub enum DriveShape {
    /// Instantaneous switch at t = 0.
    Quench,
    /// Linear interpolation over `duration`.
    LinearRamp { duration: f64 },
    /// Piecewise-linear interpolation through (time, amplitude) knots.
    Samples(Vec<(f64, f64)>),
}

/// Drive amplitude lambda(t) multiplying (a + a†) in the Hamiltonian,
/// switched from `lambda_initial` to `lambda_final`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveProtocol {
    shape: DriveShape,
    lambda_initial: f64,
    lambda_final: f64,
}

impl DriveProtocol {
    pub fn quench(lambda_initial: f64, lambda_final: f64) -> Self {
        Self {
            shape: DriveShape::Quench,
            lambda_initial,
            lambda_final,
        }
    }

    pub fn linear_ramp(lambda_initial: f64, lambda_final: f64, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::Domain(format!(
                "ramp duration must be finite and positive, got {duration}"
            )));
        }
        Ok(Self {
            shape: DriveShape::LinearRamp { duration },
            lambda_initial,
            lambda_final,
        })
    }

    /// Piecewise-linear protocol through (time, amplitude) knots. Times
    /// must start at 0, increase strictly, and end above 0.
    pub fn from_samples(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Domain(format!(
                "sampled protocol needs at least 2 knots, got {}",
                samples.len()
            )));
        }
        if samples[0].0 != 0.0 {
            return Err(Error::Domain(format!(
                "sampled protocol must start at time 0, got {}",
                samples[0].0
            )));
        }
        for pair in samples.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(Error::Domain(format!(
                    "sample times must increase strictly: {} then {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        if samples.iter().any(|(t, l)| !t.is_finite() || !l.is_finite()) {
            return Err(Error::Domain("sampled protocol has non-finite knots".into()));
        }
        let lambda_initial = samples[0].1;
        let lambda_final = samples[samples.len() - 1].1;
        Ok(Self {
            shape: DriveShape::Samples(samples),
            lambda_initial,
            lambda_final,
        })
    }

    pub fn shape(&self) -> &DriveShape {
        &self.shape
    }

    pub fn lambda_initial(&self) -> f64 {
        self.lambda_initial
    }

    pub fn lambda_final(&self) -> f64 {
        self.lambda_final
    }

    pub fn is_quench(&self) -> bool {
        matches!(self.shape, DriveShape::Quench)
    }

    /// Total protocol duration; 0 for a quench.
    pub fn duration(&self) -> f64 {
        match &self.shape {
            DriveShape::Quench => 0.0,
            DriveShape::LinearRamp { duration } => *duration,
            DriveShape::Samples(s) => s[s.len() - 1].0,
        }
    }

    /// Drive amplitude at time `t`, clamped to the endpoint values
    /// outside [0, duration].
    pub fn lambda_at(&self, t: f64) -> f64 {
        match &self.shape {
            DriveShape::Quench => {
                if t <= 0.0 {
                    self.lambda_initial
                } else {
                    self.lambda_final
                }
            }
            DriveShape::LinearRamp { duration } => {
                let s = (t / duration).clamp(0.0, 1.0);
                self.lambda_initial + (self.lambda_final - self.lambda_initial) * s
            }
            DriveShape::Samples(samples) => {
                if t <= samples[0].0 {
                    return samples[0].1;
                }
                let last = samples.len() - 1;
                if t >= samples[last].0 {
                    return samples[last].1;
                }
                let hi = samples.partition_point(|(tk, _)| *tk <= t);
                let (t0, l0) = samples[hi - 1];
                let (t1, l1) = samples[hi];
                l0 + (l1 - l0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// Displacement of the equilibrium state before the protocol,
    /// lambda_initial / omega0.
    pub fn alpha_initial(&self, omega0: f64) -> f64 {
        self.lambda_initial / omega0
    }

    /// Displacement of the equilibrium state after the protocol,
    /// lambda_final / omega0.
    pub fn alpha_final(&self, omega0: f64) -> f64 {
        self.lambda_final / omega0
    }
}

/// Log-populations of the thermal state renormalized on `dim` levels:
/// ln p_n = -n x + ln(1 - e^{-x}) - ln(1 - e^{-dim x}), with
/// x = beta omega0. The renormalization keeps the truncated state at
/// exactly unit trace; it shifts each population by a relative
/// q^dim / (1 - q^dim), far below every tolerance at the dimensions the
/// occupancy heuristics select.
pub(crate) fn ln_thermal_populations(dim: usize, x: f64) -> Vec<f64> {
    let ln_norm = (-(-x).exp_m1()).ln() - (-(-(dim as f64) * x).exp_m1()).ln();
    (0..dim).map(|n| ln_norm - x * n as f64).collect()
}

/// Thermal equilibrium state at the given parameters, diagonal with
/// populations proportional to e^{-n beta omega0}.
pub fn thermal_state(space: FockSpace, p: &ThermalParams) -> Result<FieldState> {
    let dim = space.dim();
    let x = p.beta_omega0();
    let mut m = Array2::zeros((dim, dim));
    for (n, ln_p) in ln_thermal_populations(dim, x).into_iter().enumerate() {
        m[[n, n]] = Complex64::new(ln_p.exp(), 0.0);
    }
    FieldState::new(
        space,
        m,
        Some(StateMeta {
            beta: p.beta(),
            alpha: Complex64::new(0.0, 0.0),
        }),
    )
}

/// Thermal state conjugated by the inverse displacement,
/// D†(alpha) rho D(alpha): the equilibrium state of the displaced
/// Hamiltonian, with mean photon number n_bar + |alpha|^2.
pub fn displaced_thermal_state(
    space: FockSpace,
    p: &ThermalParams,
    alpha: Complex64,
) -> Result<FieldState> {
    let thermal = thermal_state(space, p)?;
    let d = space.displacement(alpha)?;
    let m = d
        .dagger()
        .matrix()
        .dot(thermal.matrix())
        .dot(d.matrix());
    FieldState::new(
        space,
        m,
        Some(StateMeta {
            beta: p.beta(),
            alpha,
        }),
    )
}

/// Canonical partition function e^{-x/2} / (1 - e^{-x}), x = beta omega0.
pub fn partition_function(p: &ThermalParams) -> f64 {
    let x = p.beta_omega0();
    (-x / 2.0).exp() / -(-x).exp_m1()
}

/// Partition function of the displaced Hamiltonian,
/// Z * e^{beta omega0 |alpha|^2}: the displacement shifts every level
/// down by omega0 |alpha|^2 and leaves the spacing unchanged.
pub fn displaced_partition_function(p: &ThermalParams, alpha: Complex64) -> f64 {
    partition_function(p) * (p.beta_omega0() * alpha.norm_sqr()).exp()
}

/// F = -ln(Z) / beta.
pub fn helmholtz_free_energy(z: f64, beta: f64) -> Result<f64> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::Domain(format!(
            "partition function must be finite and positive, got {z}"
        )));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Domain(format!(
            "inverse temperature must be finite and positive, got {beta}"
        )));
    }
    Ok(-z.ln() / beta)
}

/// Free-energy change across a protocol,
/// (lambda_initial^2 - lambda_final^2) / omega0. Temperature drops out:
/// the drive rigidly shifts the spectrum by -lambda^2 / omega0.
pub fn delta_f(p: &ThermalParams, protocol: &DriveProtocol) -> f64 {
    (protocol.lambda_initial().powi(2) - protocol.lambda_final().powi(2)) / p.omega0()
}
