//! Ramsey interferometry of a three-level probe atom dispersively
//! coupled to the cavity field.
//!
//! The probe carries levels (e, g, f). Levels e and g shift the cavity
//! by +/- one dispersive phase per photon while f is a spectator, so a
//! g/f superposition prepared by a beam-splitter pulse picks up a
//! relative phase that encodes the field's characteristic function.
//! The fringe visibility of the f-detector as the analysis phase is
//! scanned equals |Tr[rho exp(i theta n)]| for an optimally prepared
//! probe, which this module evaluates by full joint dynamics, by the
//! characteristic function directly, and by closed forms.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{FieldState, FockSpace, EIGENVALUE_FLOOR, HERMITICITY_TOL, TRACE_TOL};
use crate::linalg;
use crate::states::ThermalParams;

/// Probe atom level count.
pub const ATOM_DIM: usize = 3;
/// Index of the upper dispersive level.
pub const IDX_E: usize = 0;
/// Index of the lower dispersive level.
pub const IDX_G: usize = 1;
/// Index of the spectator level used as the interferometric reference.
pub const IDX_F: usize = 2;

/// Dispersive phase sign per photon for each level, in basis order.
const LEVEL_SIGNS: [f64; ATOM_DIM] = [1.0, -1.0, 0.0];

/// Minimum number of analysis phases for a fringe scan.
pub const MIN_SCAN_PHASES: usize = 8;

/// Detuning-to-Rabi ratio above which the dispersive description of
/// the probe-field interaction is trusted.
pub const DISPERSIVE_RATIO_MIN: f64 = 10.0;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Density matrix of the three-level probe.
#[derive(Debug, Clone)]
pub struct AtomState {
    matrix: Array2<Complex64>,
}

impl AtomState {
    /// Probe resting in the lower dispersive level g.
    pub fn ground() -> Self {
        let mut m = Array2::zeros((ATOM_DIM, ATOM_DIM));
        m[[IDX_G, IDX_G]] = c(1.0, 0.0);
        AtomState { matrix: m }
    }

    /// Interferometric preparation on the (g, f) doublet:
    /// g_pop |g><g| + f_pop |f><f| + coherence |g><f| + h.c.
    /// Requires unit total population and |coherence|^2 <= g_pop f_pop
    /// so the matrix stays a state.
    pub fn protocol_state(g_pop: f64, f_pop: f64, coherence: Complex64) -> Result<Self> {
        if !g_pop.is_finite() || !f_pop.is_finite() || !coherence.norm_sqr().is_finite() {
            return Err(Error::Domain("probe populations must be finite".into()));
        }
        if g_pop < 0.0 || f_pop < 0.0 {
            return Err(Error::Domain(format!(
                "probe populations must be nonnegative, got g = {g_pop}, f = {f_pop}"
            )));
        }
        if (g_pop + f_pop - 1.0).abs() > TRACE_TOL {
            return Err(Error::Domain(format!(
                "doublet populations must sum to 1, got {}",
                g_pop + f_pop
            )));
        }
        if coherence.norm_sqr() > g_pop * f_pop + 1e-12 {
            return Err(Error::Domain(format!(
                "|coherence|^2 = {:.3e} exceeds g_pop f_pop = {:.3e}",
                coherence.norm_sqr(),
                g_pop * f_pop
            )));
        }
        let mut m = Array2::zeros((ATOM_DIM, ATOM_DIM));
        m[[IDX_G, IDX_G]] = c(g_pop, 0.0);
        m[[IDX_F, IDX_F]] = c(f_pop, 0.0);
        m[[IDX_G, IDX_F]] = coherence;
        m[[IDX_F, IDX_G]] = coherence.conj();
        Ok(AtomState { matrix: m })
    }

    /// Balanced preparation with maximal real coherence; gives unit
    /// fringe contrast on a decoupled field.
    pub fn optimal() -> Self {
        AtomState::protocol_state(0.5, 0.5, c(0.5, 0.0))
            .expect("balanced preparation is always a state")
    }

    /// Wraps an arbitrary 3x3 density matrix after validating
    /// hermiticity, unit trace, and positivity.
    pub fn from_matrix(matrix: Array2<Complex64>) -> Result<Self> {
        if matrix.dim() != (ATOM_DIM, ATOM_DIM) {
            return Err(Error::Domain(format!(
                "probe state must be {ATOM_DIM}x{ATOM_DIM}, got {:?}",
                matrix.dim()
            )));
        }
        if !linalg::all_finite(&matrix) {
            return Err(Error::Numerical("probe state has non-finite entries".into()));
        }
        let herm = linalg::hermiticity_defect(&matrix);
        if herm > HERMITICITY_TOL {
            return Err(Error::Numerical(format!(
                "probe state hermiticity defect {herm:.3e}"
            )));
        }
        let tr = linalg::trace(&matrix);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Numerical(format!("probe state trace {tr} is not 1")));
        }
        let eigs = linalg::eigvalsh(&matrix)?;
        if let Some(lo) = eigs.first() {
            if *lo < EIGENVALUE_FLOOR {
                return Err(Error::Numerical(format!(
                    "probe state has negative eigenvalue {lo:.3e}"
                )));
            }
        }
        Ok(AtomState { matrix })
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn e_pop(&self) -> f64 {
        self.matrix[[IDX_E, IDX_E]].re
    }

    pub fn g_pop(&self) -> f64 {
        self.matrix[[IDX_G, IDX_G]].re
    }

    pub fn f_pop(&self) -> f64 {
        self.matrix[[IDX_F, IDX_F]].re
    }

    /// Off-diagonal g-f element; its magnitude is half the fringe
    /// contrast the probe can show.
    pub fn coherence_gf(&self) -> Complex64 {
        self.matrix[[IDX_G, IDX_F]]
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Strength of the photon-number-dependent phase shift on the probe.
#[derive(Debug, Clone, Copy)]
pub struct DispersiveCoupling {
    omega: f64,
    rabi_vacuum: Option<f64>,
    detuning: Option<f64>,
}

impl DispersiveCoupling {
    /// Builds from the phase shift per photon per unit time directly.
    pub fn from_shift(omega: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::Domain(format!(
                "dispersive shift must be positive and finite, got {omega}"
            )));
        }
        Ok(DispersiveCoupling {
            omega,
            rabi_vacuum: None,
            detuning: None,
        })
    }

    /// Derives the shift omega = rabi^2 / (4 detuning) from the vacuum
    /// Rabi frequency and the probe-cavity detuning.
    pub fn from_rabi_and_detuning(rabi_vacuum: f64, detuning: f64) -> Result<Self> {
        if !(rabi_vacuum > 0.0) || !rabi_vacuum.is_finite() {
            return Err(Error::Domain(format!(
                "vacuum Rabi frequency must be positive, got {rabi_vacuum}"
            )));
        }
        if !detuning.is_finite() || detuning == 0.0 {
            return Err(Error::Domain(format!(
                "detuning must be finite and nonzero, got {detuning}"
            )));
        }
        let omega = rabi_vacuum * rabi_vacuum / (4.0 * detuning);
        if omega <= 0.0 {
            return Err(Error::Domain(format!(
                "derived shift {omega} is not positive; the detuning sign \
                 must match the level ordering"
            )));
        }
        Ok(DispersiveCoupling {
            omega,
            rabi_vacuum: Some(rabi_vacuum),
            detuning: Some(detuning),
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// True when the stored Rabi/detuning pair satisfies
    /// |detuning| / rabi >= [`DISPERSIVE_RATIO_MIN`], or when the shift
    /// was given directly and there is nothing to check.
    pub fn dispersive_regime_ok(&self) -> bool {
        match (self.rabi_vacuum, self.detuning) {
            (Some(r), Some(d)) => d.abs() / r >= DISPERSIVE_RATIO_MIN,
            _ => true,
        }
    }
}

/// Interaction window and analysis-phase grid for one fringe scan.
#[derive(Debug, Clone)]
pub struct InteractionConfig {
    coupling: DispersiveCoupling,
    delta_t: f64,
    phase_grid: Vec<f64>,
}

impl InteractionConfig {
    pub fn new(coupling: DispersiveCoupling, delta_t: f64) -> Result<Self> {
        if !delta_t.is_finite() || delta_t < 0.0 {
            return Err(Error::Domain(format!(
                "interaction time must be finite and nonnegative, got {delta_t}"
            )));
        }
        Ok(InteractionConfig {
            coupling,
            delta_t,
            phase_grid: Vec::new(),
        })
    }

    /// Installs n analysis phases uniformly covering [0, 2 pi).
    pub fn with_uniform_phases(mut self, n: usize) -> Self {
        self.phase_grid = (0..n)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64)
            .collect();
        self
    }

    pub fn with_phase_grid(mut self, grid: Vec<f64>) -> Self {
        self.phase_grid = grid;
        self
    }

    pub fn coupling(&self) -> DispersiveCoupling {
        self.coupling
    }

    pub fn delta_t(&self) -> f64 {
        self.delta_t
    }

    pub fn phase_grid(&self) -> &[f64] {
        &self.phase_grid
    }

    /// Accumulated dispersive phase per photon over the window.
    pub fn omega_dt(&self) -> f64 {
        self.coupling.omega * self.delta_t
    }
}

/// Joint probe-field interaction generator: the photon number operator
/// weighted by +omega on e, -omega on g, and 0 on f. The probe index
/// is the slow (outer) factor of the product basis.
pub fn dispersive_hamiltonian(
    space: FockSpace,
    coupling: DispersiveCoupling,
) -> Array2<Complex64> {
    let mut atom = Array2::zeros((ATOM_DIM, ATOM_DIM));
    for (b, s) in LEVEL_SIGNS.iter().enumerate() {
        atom[[b, b]] = c(coupling.omega * s, 0.0);
    }
    linalg::kron(&atom, space.number().matrix())
}

/// Conjugates the product state (probe outer, field inner) by the
/// dispersive evolution over the configured window. The generator is
/// diagonal in the product basis, so the conjugation reduces to
/// elementwise phases exp(-i theta (s_b n - s_b' n')).
pub fn evolve_joint(
    field: &FieldState,
    atom: &AtomState,
    cfg: &InteractionConfig,
) -> Result<Array2<Complex64>> {
    let dim = field.space().dim();
    let theta = cfg.omega_dt();
    let mut joint = linalg::kron(&atom.matrix, field.matrix());
    for b_row in 0..ATOM_DIM {
        for n_row in 0..dim {
            let row = b_row * dim + n_row;
            let phase_row = LEVEL_SIGNS[b_row] * n_row as f64;
            for b_col in 0..ATOM_DIM {
                for n_col in 0..dim {
                    let col = b_col * dim + n_col;
                    let phase = theta * (phase_row - LEVEL_SIGNS[b_col] * n_col as f64);
                    joint[[row, col]] *= c(0.0, -phase).exp();
                }
            }
        }
    }
    if !linalg::all_finite(&joint) {
        return Err(Error::Numerical(
            "joint state has non-finite entries after evolution".into(),
        ));
    }
    let tr = linalg::trace(&joint);
    if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
        return Err(Error::Numerical(format!(
            "joint evolution changed the trace to {tr}"
        )));
    }
    Ok(joint)
}

/// Traces out the field from a joint (probe outer, field inner) state.
pub fn reduced_atom(joint: &Array2<Complex64>) -> Result<AtomState> {
    let (rows, cols) = joint.dim();
    if rows != cols || rows % ATOM_DIM != 0 || rows == 0 {
        return Err(Error::Domain(format!(
            "joint state must be square with a side divisible by {ATOM_DIM}, got {rows}x{cols}"
        )));
    }
    let dim = rows / ATOM_DIM;
    let mut atom = Array2::zeros((ATOM_DIM, ATOM_DIM));
    for b_row in 0..ATOM_DIM {
        for b_col in 0..ATOM_DIM {
            let mut acc = c(0.0, 0.0);
            for n in 0..dim {
                acc += joint[[b_row * dim + n, b_col * dim + n]];
            }
            atom[[b_row, b_col]] = acc;
        }
    }
    AtomState::from_matrix(atom)
}

/// Fringe contrast of a probe state: twice the g-f coherence
/// magnitude. Equals 1 for the balanced preparation before any
/// interaction.
pub fn visibility_from_atom(atom: &AtomState) -> f64 {
    2.0 * atom.coherence_gf().norm()
}

/// Fringe contrast straight from the field: |Tr[rho exp(i theta n)]|,
/// with theta the accumulated dispersive phase. Skips the probe
/// simulation entirely.
pub fn visibility_characteristic(field: &FieldState, cfg: &InteractionConfig) -> f64 {
    let theta = cfg.omega_dt();
    let mut acc = c(0.0, 0.0);
    for (n, p) in field.matrix().diag().iter().enumerate() {
        acc += p * c(0.0, theta * n as f64).exp();
    }
    acc.norm()
}

/// Closed-form fringe contrast of an undisplaced thermal field:
/// sinh(x/2) / sqrt(sinh^2(x/2) + sin^2(theta/2)) with x the inverse
/// temperature in oscillator units.
pub fn visibility_thermal_closed_form(p: &ThermalParams, omega_dt: f64) -> f64 {
    let sh = (p.beta_omega0() / 2.0).sinh();
    let sn = (omega_dt / 2.0).sin();
    sh / (sh * sh + sn * sn).sqrt()
}

/// Closed-form fringe contrast of a displaced thermal field: the
/// undisplaced value times
/// exp(-2 |alpha|^2 sin^2(theta/2) sinh(x/2) cosh(x/2) /
///     (sinh^2(x/2) + sin^2(theta/2))).
pub fn visibility_displaced_closed_form(
    p: &ThermalParams,
    alpha: Complex64,
    omega_dt: f64,
) -> f64 {
    let half = p.beta_omega0() / 2.0;
    let sh = half.sinh();
    let ch = half.cosh();
    let sn = (omega_dt / 2.0).sin();
    let damp = -2.0 * alpha.norm_sqr() * sn * sn * sh * ch / (sh * sh + sn * sn);
    visibility_thermal_closed_form(p, omega_dt) * damp.exp()
}

/// Detector record of one analysis-phase scan.
#[derive(Debug, Clone)]
pub struct FringeRecord {
    /// Analysis phases, as supplied.
    pub phases: Vec<f64>,
    /// Probability of finding the probe in f at each phase.
    pub f_populations: Vec<f64>,
    /// Contrast of the fitted first harmonic,
    /// (P_max - P_min) / (P_max + P_min).
    pub visibility: f64,
    /// Fitted constant level (the mean detector probability).
    pub mean_level: f64,
}

/// Balanced beam-splitter pulse on the (g, f) doublet: g maps to
/// (g + f)/sqrt(2) and f to (-g + f)/sqrt(2); e is untouched.
fn doublet_pulse() -> Array2<Complex64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = Array2::zeros((ATOM_DIM, ATOM_DIM));
    m[[IDX_E, IDX_E]] = c(1.0, 0.0);
    m[[IDX_G, IDX_G]] = c(r, 0.0);
    m[[IDX_G, IDX_F]] = c(-r, 0.0);
    m[[IDX_F, IDX_G]] = c(r, 0.0);
    m[[IDX_F, IDX_F]] = c(r, 0.0);
    m
}

fn check_uniform_circle(grid: &[f64]) -> Result<f64> {
    let m = grid.len();
    if m < MIN_SCAN_PHASES {
        return Err(Error::Domain(format!(
            "fringe scans need at least {MIN_SCAN_PHASES} analysis phases, got {m}"
        )));
    }
    let step = 2.0 * std::f64::consts::PI / m as f64;
    for (k, phi) in grid.iter().enumerate() {
        if !phi.is_finite() {
            return Err(Error::Domain("analysis phases must be finite".into()));
        }
        let expect = grid[0] + step * k as f64;
        if (phi - expect).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "the first-harmonic projection needs phases uniform over a \
                 full circle; phase {k} is {phi}, expected {expect}"
            )));
        }
    }
    Ok(step)
}

/// Runs the full interferometer: prepare the probe in g, split the
/// doublet, let the dispersive phase accumulate, then close the
/// interferometer with the analysis phase on f followed by a second
/// splitter, reading out the f population at each phase on the grid.
/// The visibility comes from the exact first-harmonic projection of
/// the record, which is exact on a uniform full-circle grid.
pub fn interferometer_scan(field: &FieldState, cfg: &InteractionConfig) -> Result<FringeRecord> {
    check_uniform_circle(&cfg.phase_grid)?;
    let pulse = doublet_pulse();
    let prepared = pulse.dot(AtomState::ground().matrix()).dot(&linalg::dagger(&pulse));
    let prepared = AtomState::from_matrix(prepared)?;
    let joint = evolve_joint(field, &prepared, cfg)?;
    // Probe-only operations commute with the field trace, so the scan
    // can act on the reduced probe.
    let reduced = reduced_atom(&joint)?;
    let coherence = reduced.coherence_gf();

    let m = cfg.phase_grid.len();
    let mut f_populations = Vec::with_capacity(m);
    let mut first_harmonic = c(0.0, 0.0);
    let mut mean = 0.0;
    for &phi in &cfg.phase_grid {
        let mut analysis = Array2::zeros((ATOM_DIM, ATOM_DIM));
        analysis[[IDX_E, IDX_E]] = c(1.0, 0.0);
        analysis[[IDX_G, IDX_G]] = c(1.0, 0.0);
        analysis[[IDX_F, IDX_F]] = c(0.0, phi).exp();
        let close = pulse.dot(&analysis);
        let out = close.dot(reduced.matrix()).dot(&linalg::dagger(&close));
        let p_f = out[[IDX_F, IDX_F]].re;
        f_populations.push(p_f);
        first_harmonic += p_f * c(0.0, phi).exp();
        mean += p_f;
    }
    mean /= m as f64;
    first_harmonic *= c(2.0 / m as f64, 0.0);

    let (lo, hi) = f_populations
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
            (lo.min(p), hi.max(p))
        });
    if hi - lo <= 1e-14 && coherence.norm() > 1e-12 {
        return Err(Error::Fit(format!(
            "fringe record is flat although the probe keeps coherence {:.3e}",
            coherence.norm()
        )));
    }
    if mean <= 0.0 {
        return Err(Error::Fit(format!(
            "fitted fringe level {mean:.3e} is not positive"
        )));
    }
    Ok(FringeRecord {
        phases: cfg.phase_grid.clone(),
        f_populations,
        visibility: first_harmonic.norm() / mean,
        mean_level: mean,
    })
}
