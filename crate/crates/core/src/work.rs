//! Work statistics for the driven cavity: protocol propagators,
//! two-point-measurement transition matrices, exponential work
//! averages (exact and Monte Carlo), and the characteristic function
//! of the work distribution.
//!
//! The Hamiltonian family is H(lambda) = omega0 (a†a + 1/2)
//! + lambda (a + a†). Completing the square shifts the whole spectrum
//! by -lambda^2 / omega0 and displaces the eigenbasis; both facts are
//! used analytically and independently cross-checked numerically.

use std::collections::BTreeMap;

use ndarray::prelude::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::fock::FockSpace;
use crate::linalg;
use crate::states::{ln_thermal_populations, DriveProtocol, ThermalParams};

/// Floor on Trotter slice counts used by [`build_propagator`].
pub const MIN_TROTTER_STEPS: usize = 1000;
/// Step-doubling stops once successive products agree this well.
pub const TROTTER_SELF_TOL: f64 = 1e-7;
/// A converged Trotter product must match the closed-form propagator
/// this well, else the construction reports a convergence failure.
pub const TROTTER_ORACLE_TOL: f64 = 1e-6;
/// Largest tolerated |U†U - 1| entry for any protocol propagator.
pub const PROPAGATOR_UNITARITY_TOL: f64 = 1e-8;
/// Transition-matrix columns in the lower half of the spectrum must
/// sum to 1 within this tolerance.
pub const COLUMN_SUM_TOL: f64 = 1e-6;
/// Analytic eigenenergies must match the numerically diagonalized
/// truncated Hamiltonian this well on the lower half spectrum.
pub const SPECTRUM_MATCH_TOL: f64 = 1e-8;

/// Step-doubling gives up past this many slices.
const MAX_TROTTER_STEPS: usize = 1 << 21;
/// Simpson intervals for the drive integrals of the closed-form
/// propagator (even; error is quartic in the spacing).
const MAGNUS_QUADRATURE_INTERVALS: usize = 65536;
/// Top levels inspected by the generating-function tail diagnostic.
const G_TAIL_LEVELS: usize = 4;
/// Largest relative summand mass tolerated in those top levels.
const G_TAIL_REL_TOL: f64 = 1e-8;
/// Monte-Carlo shots per derived-seed block.
const MC_BLOCK: u64 = 65536;

/// H(lambda) = omega0 (a†a + 1/2) + lambda (a + a†) on the truncated
/// space.
pub fn hamiltonian(space: FockSpace, p: &ThermalParams, lambda: f64) -> Array2<Complex64> {
    let dim = space.dim();
    let mut h = Array2::zeros((dim, dim));
    for n in 0..dim {
        h[[n, n]] = Complex64::new(p.omega0() * (n as f64 + 0.5), 0.0);
    }
    for n in 1..dim {
        let v = Complex64::new(lambda * (n as f64).sqrt(), 0.0);
        h[[n, n - 1]] += v;
        h[[n - 1, n]] += v;
    }
    h
}

/// Eigenenergies and eigenbasis of one endpoint Hamiltonian. Column j
/// of `basis` is the j-th eigenvector.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub energies: Array1<f64>,
    pub basis: Array2<Complex64>,
}

/// Closed-form eigensystem of H(lambda): energies
/// (j + 1/2) omega0 - lambda^2 / omega0 and eigenvectors obtained by
/// displacing the number basis by -lambda / omega0. The truncated
/// matrix is also diagonalized numerically and must reproduce the
/// closed-form energies on the lower half spectrum, so an undersized
/// basis fails here instead of corrupting downstream statistics.
pub fn hamiltonian_eigensystem(
    space: FockSpace,
    p: &ThermalParams,
    lambda: f64,
) -> Result<Eigensystem> {
    let dim = space.dim();
    let omega0 = p.omega0();
    let alpha = lambda / omega0;
    let shift = lambda * lambda / omega0;
    let energies = Array1::from_iter((0..dim).map(|j| (j as f64 + 0.5) * omega0 - shift));
    let basis = space
        .displacement(Complex64::new(alpha, 0.0))?
        .dagger()
        .into_matrix();
    let h = hamiltonian(space, p, lambda);
    let numeric = linalg::eigvalsh(&h)?;
    for j in 0..=dim / 2 {
        let dev = (numeric[j] - energies[j]).abs();
        if dev > SPECTRUM_MATCH_TOL {
            return Err(Error::Truncation(format!(
                "truncated spectrum deviates by {dev:.3e} at level {j} \
                 (lambda = {lambda}); increase the dimension"
            )));
        }
    }
    Ok(Eigensystem { energies, basis })
}

/// Eigensystem of the post-protocol Hamiltonian H(lambda_final).
pub fn final_hamiltonian_eigensystem(
    space: FockSpace,
    p: &ThermalParams,
    protocol: &DriveProtocol,
) -> Result<Eigensystem> {
    hamiltonian_eigensystem(space, p, protocol.lambda_final())
}

/// How a protocol propagator is constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagatorMethod {
    /// Instantaneous switch: the state does not evolve, U = 1.
    ExactQuench,
    /// Midpoint-sampled product of slice exponentials, step-doubled
    /// from `n_steps` until self-consistent.
    Trotter { n_steps: usize },
    /// Closed-form solution for a linearly driven oscillator: free
    /// evolution times a drive-integral displacement and phase.
    MagnusAnalytic,
}

/// Method matching the protocol family: exact for quenches, the
/// closed form for anything time-extended.
pub fn default_method(protocol: &DriveProtocol) -> PropagatorMethod {
    if protocol.is_quench() {
        PropagatorMethod::ExactQuench
    } else {
        PropagatorMethod::MagnusAnalytic
    }
}

/// Unitary propagator for one protocol, with construction records.
#[derive(Debug, Clone)]
pub struct ProtocolPropagator {
    pub matrix: Array2<Complex64>,
    pub method: PropagatorMethod,
    /// Slice count the step-doubling settled on (Trotter only).
    pub n_steps_used: Option<usize>,
    /// Distance from the closed-form propagator (Trotter only).
    pub magnus_defect: Option<f64>,
}

/// Midpoint-sampled slice product with a fixed step count: the product
/// of exp(-i H(t_k) dt) over `n_steps` slices, sampled at slice
/// midpoints, later times composed on the left.
pub fn trotter_product(
    space: FockSpace,
    p: &ThermalParams,
    protocol: &DriveProtocol,
    n_steps: usize,
) -> Result<Array2<Complex64>> {
    if protocol.is_quench() {
        return Err(Error::Domain(
            "slice products need a protocol with finite duration".into(),
        ));
    }
    if n_steps == 0 {
        return Err(Error::Domain("slice count must be positive".into()));
    }
    let duration = protocol.duration();
    let dt = duration / n_steps as f64;
    let mut u = linalg::identity(space.dim());
    for k in 0..n_steps {
        let t_mid = (k as f64 + 0.5) * dt;
        let h = hamiltonian(space, p, protocol.lambda_at(t_mid));
        let step = linalg::expm(&h.mapv(|z| z * Complex64::new(0.0, -dt)))?;
        u = step.dot(&u);
    }
    Ok(u)
}

/// Composite-Simpson value of a tabulated integrand.
fn simpson_sum(values: &[Complex64], h: f64) -> Complex64 {
    let n = values.len() - 1;
    let mut acc = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        acc += *v * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * (h / 3.0)
}

/// Drive integrals of the closed-form propagator:
/// eta  = -i ∫ lambda(t) e^{i omega0 t} dt over the protocol, and
/// phase = Im ∫ lambda(t1) e^{i omega0 t1} F(t1) dt1 with
/// F(t1) = ∫_0^{t1} lambda(s) e^{-i omega0 s} ds.
pub fn magnus_parameters(p: &ThermalParams, protocol: &DriveProtocol) -> Result<(Complex64, f64)> {
    if protocol.is_quench() {
        return Err(Error::Domain(
            "drive integrals need a protocol with finite duration".into(),
        ));
    }
    let n = MAGNUS_QUADRATURE_INTERVALS;
    let duration = protocol.duration();
    let h = duration / n as f64;
    let omega0 = p.omega0();
    let i = Complex64::i();

    let mut fwd = Vec::with_capacity(n + 1);
    let mut bwd = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as f64 * h;
        let lambda = protocol.lambda_at(t);
        let rot = (i * (omega0 * t)).exp();
        fwd.push(lambda * rot);
        bwd.push(lambda * rot.conj());
    }

    // Cumulative Simpson for F: the even points use the three-point
    // rule, the interior odd points the half-panel 5-8-(-1) rule.
    let mut cum = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut k = 0;
    while k + 2 <= n {
        cum[k + 1] = cum[k] + (bwd[k] * 5.0 + bwd[k + 1] * 8.0 - bwd[k + 2]) * (h / 12.0);
        cum[k + 2] = cum[k] + (bwd[k] + bwd[k + 1] * 4.0 + bwd[k + 2]) * (h / 3.0);
        k += 2;
    }

    let eta = -i * simpson_sum(&fwd, h);
    let outer: Vec<Complex64> = fwd.iter().zip(&cum).map(|(f, c)| f * c).collect();
    let phase = simpson_sum(&outer, h).im;
    Ok((eta, phase))
}

fn magnus_matrix(
    space: FockSpace,
    p: &ThermalParams,
    protocol: &DriveProtocol,
) -> Result<Array2<Complex64>> {
    let (eta, phase) = magnus_parameters(p, protocol)?;
    let duration = protocol.duration();
    let omega0 = p.omega0();
    let mut u = space.displacement(eta)?.into_matrix();
    let global = (Complex64::i() * phase).exp();
    for n in 0..space.dim() {
        // Free evolution on the left: row n picks up its level phase.
        let row_phase = (-Complex64::i() * ((n as f64 + 0.5) * omega0 * duration)).exp() * global;
        for m in 0..space.dim() {
            u[[n, m]] *= row_phase;
        }
    }
    Ok(u)
}

/// Maximum entrywise deviation over the faithful zone: columns in the
/// lower half of the level range. Top columns of any truncated
/// propagator are boundary artifacts that differ between otherwise
/// equivalent constructions, and certified initial states put no
/// probability there.
fn lower_column_defect(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    let cols = a.ncols() / 2 + 1;
    let mut worst = 0.0f64;
    for j in 0..cols.min(a.ncols()) {
        for i in 0..a.nrows() {
            worst = worst.max((a[[i, j]] - b[[i, j]]).norm());
        }
    }
    worst
}

fn check_propagator_unitarity(u: &Array2<Complex64>) -> Result<()> {
    let defect = linalg::unitarity_defect(u);
    if defect > PROPAGATOR_UNITARITY_TOL {
        return Err(Error::Truncation(format!(
            "propagator unitarity defect {defect:.3e} exceeds \
             {PROPAGATOR_UNITARITY_TOL:.1e}; increase the dimension"
        )));
    }
    Ok(())
}

/// Builds the protocol propagator with the requested method.
///
/// Quenches take `ExactQuench` only, time-extended protocols take
/// `Trotter` or `MagnusAnalytic` only; mismatches are domain errors.
/// The Trotter path step-doubles from max(`n_steps`,
/// [`MIN_TROTTER_STEPS`]) until successive products agree within
/// [`TROTTER_SELF_TOL`], then must also match the closed form within
/// [`TROTTER_ORACLE_TOL`]. Both comparisons run over the faithful
/// lower-half columns; the top corner of a truncated propagator is a
/// boundary artifact either way.
pub fn build_propagator(
    space: FockSpace,
    p: &ThermalParams,
    protocol: &DriveProtocol,
    method: PropagatorMethod,
) -> Result<ProtocolPropagator> {
    let matrix_and_records = match method {
        PropagatorMethod::ExactQuench => {
            if !protocol.is_quench() {
                return Err(Error::Domain(
                    "exact_quench applies only to quench protocols".into(),
                ));
            }
            (linalg::identity(space.dim()), None, None)
        }
        PropagatorMethod::MagnusAnalytic => {
            if protocol.is_quench() {
                return Err(Error::Domain(
                    "the closed-form propagator needs a finite-duration protocol; \
                     use exact_quench for quenches"
                        .into(),
                ));
            }
            (magnus_matrix(space, p, protocol)?, None, None)
        }
        PropagatorMethod::Trotter { n_steps } => {
            if protocol.is_quench() {
                return Err(Error::Domain(
                    "slice products need a finite-duration protocol; \
                     use exact_quench for quenches"
                        .into(),
                ));
            }
            let mut n = n_steps.max(MIN_TROTTER_STEPS);
            let mut current = trotter_product(space, p, protocol, n)?;
            loop {
                let doubled = trotter_product(space, p, protocol, 2 * n)?;
                let diff = lower_column_defect(&current, &doubled);
                n *= 2;
                current = doubled;
                if diff <= TROTTER_SELF_TOL {
                    break;
                }
                if n >= MAX_TROTTER_STEPS {
                    return Err(Error::Convergence(format!(
                        "slice product still moving by {diff:.3e} at {n} slices"
                    )));
                }
            }
            let oracle = magnus_matrix(space, p, protocol)?;
            let defect = lower_column_defect(&current, &oracle);
            if defect > TROTTER_ORACLE_TOL {
                return Err(Error::Convergence(format!(
                    "converged slice product disagrees with the closed form \
                     by {defect:.3e} (tolerance {TROTTER_ORACLE_TOL:.1e})"
                )));
            }
            (current, Some(n), Some(defect))
        }
    };
    let (matrix, n_steps_used, magnus_defect) = matrix_and_records;
    check_propagator_unitarity(&matrix)?;
    Ok(ProtocolPropagator {
        matrix,
        method,
        n_steps_used,
        magnus_defect,
    })
}

/// Two-point-measurement transition matrix w[m, n] =
/// |<final m| U |initial n>|^2. Columns with n in the lower half
/// spectrum must keep probability within [`COLUMN_SUM_TOL`] of 1.
pub fn transition_probabilities(
    prop: &ProtocolPropagator,
    initial: &Eigensystem,
    final_basis: &Eigensystem,
) -> Result<Array2<f64>> {
    let dim = prop.matrix.nrows();
    if initial.basis.nrows() != dim || final_basis.basis.nrows() != dim {
        return Err(Error::Domain(
            "eigensystem and propagator dimensions disagree".into(),
        ));
    }
    let m = linalg::dagger(&final_basis.basis)
        .dot(&prop.matrix)
        .dot(&initial.basis);
    let w = m.mapv(|z| z.norm_sqr());
    for n in 0..=dim / 2 {
        let col_sum: f64 = w.column(n).sum();
        if col_sum < 1.0 - COLUMN_SUM_TOL {
            return Err(Error::Truncation(format!(
                "transition column {n} keeps only probability {col_sum:.12}; \
                 increase the dimension"
            )));
        }
    }
    Ok(w)
}

/// How the exponential work average is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AverageMode {
    /// Full double sum over retained transition pairs.
    ExactSum,
    /// Two-point-measurement sampling with a deterministic per-block
    /// seed derivation.
    MonteCarlo { n_shots: u64, seed: u64 },
}

/// Exponential work average with sampling metadata.
#[derive(Debug, Clone, Copy)]
pub struct TpmAverage {
    pub value: f64,
    /// Standard error of the mean (Monte Carlo only).
    pub std_error: Option<f64>,
    /// Truncation dimension the statistics were computed on.
    pub dim: usize,
}

/// Truncation dimension for protocol work statistics: the equilibrium
/// occupancy padded by the drive excursion |alpha_i| + 2|alpha_f -
/// alpha_i|, which bounds how far the driven state can wander from the
/// origin in phase space.
pub fn auto_space(p: &ThermalParams, protocol: &DriveProtocol) -> FockSpace {
    let ai = protocol.alpha_initial(p.omega0());
    let af = protocol.alpha_final(p.omega0());
    let span = ai.abs() + 2.0 * (af - ai).abs();
    FockSpace::for_occupancy(p.mean_occupation(), span * span)
}

struct TpmSetup {
    dim: usize,
    e_initial: Array1<f64>,
    e_final: Array1<f64>,
    w: Array2<f64>,
    ln_p: Vec<f64>,
}

fn tpm_setup(
    space: FockSpace,
    p: &ThermalParams,
    protocol: &DriveProtocol,
    prop: &ProtocolPropagator,
) -> Result<TpmSetup> {
    if prop.matrix.nrows() != space.dim() {
        return Err(Error::Domain(
            "propagator dimension does not match the given space".into(),
        ));
    }
    let initial = hamiltonian_eigensystem(space, p, protocol.lambda_initial())?;
    let final_sys = final_hamiltonian_eigensystem(space, p, protocol)?;
    let w = transition_probabilities(prop, &initial, &final_sys)?;
    let ln_p = ln_thermal_populations(space.dim(), p.beta_omega0());
    Ok(TpmSetup {
        dim: space.dim(),
        e_initial: initial.energies,
        e_final: final_sys.energies,
        w,
        ln_p,
    })
}

fn exact_exponential_average(setup: &TpmSetup, beta: f64) -> f64 {
    let mut acc = 0.0;
    for n in 0..setup.dim {
        // Grouping the initial-level weight with its energy in the
        // exponent keeps every term bounded for hot states.
        let base = setup.ln_p[n] + beta * setup.e_initial[n];
        for m in 0..setup.dim {
            let w_mn = setup.w[[m, n]];
            if w_mn > 0.0 {
                acc += w_mn * (base - beta * setup.e_final[m]).exp();
            }
        }
    }
    acc
}

fn lower_bound(cdf: &[f64], v: f64) -> usize {
    let mut lo = 0usize;
    let mut hi = cdf.len() - 1;
    while lo < hi {
        let mid = (lo + hi) / 2;
        if cdf[mid] < v {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

struct McResult {
    mean: f64,
    std_error: f64,
    counts: Option<BTreeMap<(usize, usize), u64>>,
}

/// Samples (initial level, final level) pairs and averages
/// e^{-beta (E_final - E_initial)}. Shots are grouped into fixed-size
/// blocks, each drawing from a stream derived from (seed, block), so
/// results do not depend on how callers schedule the blocks.
fn run_monte_carlo(
    setup: &TpmSetup,
    beta: f64,
    x: f64,
    n_shots: u64,
    seed: u64,
    want_counts: bool,
) -> Result<McResult> {
    if n_shots == 0 {
        return Err(Error::Domain("sampling needs at least one shot".into()));
    }
    let dim = setup.dim;
    // Per-column transition CDFs; residual mass past the last level is
    // truncation loss already bounded by the column-sum check.
    let mut cdfs = vec![0.0f64; dim * dim];
    for n in 0..dim {
        let mut acc = 0.0;
        for m in 0..dim {
            acc += setup.w[[m, n]];
            cdfs[n * dim + m] = acc;
        }
    }
    let ln_q = -x;
    let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let n_blocks = n_shots.div_ceil(MC_BLOCK);
    for block in 0..n_blocks {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(1 + block);
        let in_block = MC_BLOCK.min(n_shots - block * MC_BLOCK);
        for _ in 0..in_block {
            let n = loop {
                let u: f64 = rng.gen();
                let level = (1.0 - u).ln() / ln_q;
                if level < dim as f64 {
                    break level as usize;
                }
            };
            let v: f64 = rng.gen();
            let col = &cdfs[n * dim..(n + 1) * dim];
            let m = lower_bound(col, v * col[dim - 1]);
            let value = (beta * (setup.e_initial[n] - setup.e_final[m])).exp();
            sum += value;
            sumsq += value * value;
            if want_counts {
                *counts.entry((n, m)).or_insert(0) += 1;
            }
        }
    }
    let shots = n_shots as f64;
    let mean = sum / shots;
    let variance = (sumsq / shots - mean * mean).max(0.0);
    Ok(McResult {
        mean,
        std_error: (variance / shots).sqrt(),
        counts: want_counts.then_some(counts),
    })
}

/// <e^{-beta Delta E}> over two-point-measurement statistics, on an
/// automatically sized space with the default propagator method.
pub fn tpm_exponential_average(
    p: &ThermalParams,
    protocol: &DriveProtocol,
    mode: AverageMode,
) -> Result<TpmAverage> {
    let space = auto_space(p, protocol);
    let prop = build_propagator(space, p, protocol, default_method(protocol))?;
    tpm_exponential_average_in(space, p, protocol, &prop, mode)
}

/// [`tpm_exponential_average`] with caller-supplied space and
/// propagator, for reuse across modes and seeds.
pub fn tpm_exponential_average_in(
    space: FockSpace,
    p: &ThermalParams,
    protocol: &DriveProtocol,
    prop: &ProtocolPropagator,
    mode: AverageMode,
) -> Result<TpmAverage> {
    let setup = tpm_setup(space, p, protocol, prop)?;
    match mode {
        AverageMode::ExactSum => Ok(TpmAverage {
            value: exact_exponential_average(&setup, p.beta()),
            std_error: None,
            dim: setup.dim,
        }),
        AverageMode::MonteCarlo { n_shots, seed } => {
            let mc = run_monte_carlo(&setup, p.beta(), p.beta_omega0(), n_shots, seed, false)?;
            Ok(TpmAverage {
                value: mc.mean,
                std_error: Some(mc.std_error),
                dim: setup.dim,
            })
        }
    }
}

/// One (work value, probability) pair; for exact statistics the pairs
/// run over all retained (initial, final) level combinations.
#[derive(Debug, Clone, Copy)]
pub struct WorkSample {
    pub work: f64,
    pub probability: f64,
}

/// Distribution of two-point-measurement work values.
#[derive(Debug, Clone)]
pub struct WorkDistribution {
    pub samples: Vec<WorkSample>,
    pub mode: AverageMode,
    pub dim: usize,
}

impl WorkDistribution {
    /// Total retained probability; short of 1 only by truncation loss.
    pub fn total_probability(&self) -> f64 {
        self.samples.iter().map(|s| s.probability).sum()
    }

    pub fn mean_work(&self) -> f64 {
        self.samples.iter().map(|s| s.probability * s.work).sum()
    }

    pub fn exponential_average(&self, beta: f64) -> f64 {
        self.samples
            .iter()
            .map(|s| s.probability * (-beta * s.work).exp())
            .sum()
    }

    /// Fourier transform sum_j p_j e^{i u w_j}.
    pub fn fourier(&self, u: f64) -> Complex64 {
        self.samples
            .iter()
            .map(|s| Complex64::new(s.probability, 0.0) * (Complex64::i() * (u * s.work)).exp())
            .sum()
    }
}

/// Work distribution over the protocol: exact transition-pair
/// probabilities, or empirical frequencies under sampling.
pub fn work_distribution(
    p: &ThermalParams,
    protocol: &DriveProtocol,
    mode: AverageMode,
) -> Result<WorkDistribution> {
    let space = auto_space(p, protocol);
    let prop = build_propagator(space, p, protocol, default_method(protocol))?;
    let setup = tpm_setup(space, p, protocol, &prop)?;
    let dim = setup.dim;
    match mode {
        AverageMode::ExactSum => {
            let mut samples = Vec::with_capacity(dim * dim);
            for n in 0..dim {
                let p_n = setup.ln_p[n].exp();
                for m in 0..dim {
                    samples.push(WorkSample {
                        work: setup.e_final[m] - setup.e_initial[n],
                        probability: p_n * setup.w[[m, n]],
                    });
                }
            }
            Ok(WorkDistribution { samples, mode, dim })
        }
        AverageMode::MonteCarlo { n_shots, seed } => {
            let mc = run_monte_carlo(&setup, p.beta(), p.beta_omega0(), n_shots, seed, true)?;
            let counts = mc.counts.expect("counts were requested");
            let samples = counts
                .into_iter()
                .map(|((n, m), c)| WorkSample {
                    work: setup.e_final[m] - setup.e_initial[n],
                    probability: c as f64 / n_shots as f64,
                })
                .collect();
            Ok(WorkDistribution { samples, mode, dim })
        }
    }
}

/// Characteristic function of the work distribution,
/// G(u) = Tr[U† e^{i u H_final} U e^{-i u H_initial} rho_0],
/// evaluated through the numerically diagonalized truncated final
/// Hamiltonian, independent of the closed-form eigensystem. At
/// u = i beta this is the exponential work average.
pub fn characteristic_function_g_in(
    space: FockSpace,
    p: &ThermalParams,
    protocol: &DriveProtocol,
    prop: &ProtocolPropagator,
    u: Complex64,
) -> Result<Complex64> {
    let dim = space.dim();
    if prop.matrix.nrows() != dim {
        return Err(Error::Domain(
            "propagator dimension does not match the given space".into(),
        ));
    }
    let initial = hamiltonian_eigensystem(space, p, protocol.lambda_initial())?;
    let h_final = hamiltonian(space, p, protocol.lambda_final());
    let (e_final, v_final) = linalg::eigh(&h_final)?;
    let m = linalg::dagger(&v_final)
        .dot(&prop.matrix)
        .dot(&initial.basis);
    let w = m.mapv(|z| z.norm_sqr());
    let ln_p = ln_thermal_populations(dim, p.beta_omega0());
    let i = Complex64::i();

    // d_n = e^{-i u E_initial(n)} p_n with the population kept in the
    // exponent so imaginary u never overflows intermediate factors.
    let d: Vec<Complex64> = (0..dim)
        .map(|n| (Complex64::new(ln_p[n], 0.0) - i * u * initial.energies[n]).exp())
        .collect();
    let g_fac: Vec<Complex64> = (0..dim).map(|m_| (i * u * e_final[m_]).exp()).collect();

    let mut summands = Vec::with_capacity(dim);
    for m_ in 0..dim {
        let mut inner = Complex64::new(0.0, 0.0);
        for n in 0..dim {
            inner += d[n] * w[[m_, n]];
        }
        summands.push(g_fac[m_] * inner);
    }
    let total: Complex64 = summands.iter().sum();

    // Both exponential factors must have negligible support on the top
    // retained levels, otherwise the truncated trace is meaningless.
    let abs_final: f64 = summands.iter().map(|z| z.norm()).sum();
    let top_final: f64 = summands[dim - G_TAIL_LEVELS..]
        .iter()
        .map(|z| z.norm())
        .sum();
    if top_final > G_TAIL_REL_TOL * abs_final {
        return Err(Error::Truncation(format!(
            "final-level summands keep {:.3e} of their mass in the top \
             {G_TAIL_LEVELS} levels; increase the dimension",
            top_final / abs_final
        )));
    }
    let initial_mass: Vec<f64> = (0..dim)
        .map(|n| {
            let row: f64 = (0..dim).map(|m_| g_fac[m_].norm() * w[[m_, n]]).sum();
            d[n].norm() * row
        })
        .collect();
    let abs_initial: f64 = initial_mass.iter().sum();
    let top_initial: f64 = initial_mass[dim - G_TAIL_LEVELS..].iter().sum();
    if top_initial > G_TAIL_REL_TOL * abs_initial {
        return Err(Error::Truncation(format!(
            "initial-level summands keep {:.3e} of their mass in the top \
             {G_TAIL_LEVELS} levels; increase the dimension",
            top_initial / abs_initial
        )));
    }
    Ok(total)
}

/// [`characteristic_function_g_in`] on an automatically sized space
/// with the default propagator method.
pub fn characteristic_function_g(
    p: &ThermalParams,
    protocol: &DriveProtocol,
    u: Complex64,
) -> Result<Complex64> {
    let space = auto_space(p, protocol);
    let prop = build_propagator(space, p, protocol, default_method(protocol))?;
    characteristic_function_g_in(space, p, protocol, &prop, u)
}

/// Comparison of the exponential work average against the equilibrium
/// free-energy change, for `n_oscillators` identical independent
/// modes (both sides raised to that power).
#[derive(Debug, Clone, Copy)]
pub struct JarzynskiReport {
    /// e^{-beta Delta F} for the full register.
    pub lhs: f64,
    /// Exact-sum exponential work average for the full register.
    pub rhs: f64,
    pub abs_dev: f64,
    pub rel_dev: f64,
    pub n_oscillators: u32,
}

/// Evaluates both sides of the exponential work identity. Deviations
/// are reported, never judged: the caller owns the tolerance.
pub fn jarzynski_check(
    p: &ThermalParams,
    protocol: &DriveProtocol,
    n_oscillators: u32,
) -> Result<JarzynskiReport> {
    if n_oscillators == 0 {
        return Err(Error::Domain("oscillator count must be positive".into()));
    }
    let delta_f = crate::states::delta_f(p, protocol);
    let lhs = (-p.beta() * delta_f * n_oscillators as f64).exp();
    let single = tpm_exponential_average(p, protocol, AverageMode::ExactSum)?;
    let rhs = single.value.powi(n_oscillators as i32);
    let abs_dev = (lhs - rhs).abs();
    Ok(JarzynskiReport {
        lhs,
        rhs,
        abs_dev,
        rel_dev: abs_dev / lhs,
        n_oscillators,
    })
}
