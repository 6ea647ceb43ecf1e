//! Truncated Fock-space arena: canonical operators, the displacement
//! operator, a validated density-matrix container, and the truncation
//! dimension heuristics.
//!
//! Levels |0>..|dim-1> are retained; the top level is an absorbing
//! truncation boundary. Every state constructed through [`FieldState`]
//! is checked for hermiticity, unit trace, positivity, and negligible
//! weight in the top retained level, so truncation problems fail loudly
//! instead of silently degrading results.

use ndarray::prelude::*;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;

/// Maximum tolerated |rho - rho†| entry for a valid state.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Maximum tolerated |Tr rho - 1| for a valid state.
pub const TRACE_TOL: f64 = 1e-12;
/// Most negative eigenvalue tolerated in a positive-semidefinite state.
pub const EIGENVALUE_FLOOR: f64 = -1e-10;
/// Default ceiling on the top-level population of a valid state.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;
/// Unitarity defect above which a truncated displacement is rejected.
pub const DISPLACEMENT_UNITARITY_TOL: f64 = 1e-6;

/// Bound on the coherent-orbit mass allowed at the top level before a
/// displacement is rejected as unfaithful to the untruncated operator.
pub const DISPLACEMENT_TAIL_TOL: f64 = 1e-6;
/// Default ceiling on automatically chosen truncation dimensions.
pub const DEFAULT_DIM_CAP: usize = 512;

/// Tail mass targeted when choosing a truncation dimension; two orders
/// below `DEFAULT_TAIL_TOL` so the per-state top-level check has margin.
const TAIL_MASS_TARGET: f64 = 1e-10;
/// Upper end of the dimension search; past this the cap always binds.
const DIM_SEARCH_MAX: usize = 8192;

/// Ceiling on automatically chosen dimensions. Reads `CAVJAR_DIM_CAP`
/// (an expert escape hatch) and falls back to [`DEFAULT_DIM_CAP`];
/// values below 2 or unparseable values are ignored.
pub fn dim_cap() -> usize {
    match std::env::var("CAVJAR_DIM_CAP") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(c) if c >= 2 => c,
            _ => DEFAULT_DIM_CAP,
        },
        Err(_) => DEFAULT_DIM_CAP,
    }
}

/// Chernoff bound on ln P(N >= k) for the photon-number distribution of
/// a thermal state with mean occupation `n_bar` displaced by amplitude
/// with |alpha|^2 = `alpha_sq`. The probability generating function is
/// G(z) = exp(alpha_sq (z-1)/(1 - n_bar (z-1))) / (1 - n_bar (z-1)),
/// and ln G(z) - k ln z is an upper bound for every z > 1 with
/// n_bar (z-1) < 1. Minimized over a fixed grid in u = n_bar (z-1);
/// grid coarseness only loosens the bound, never understates the tail.
fn displaced_thermal_log_tail_bound(n_bar: f64, alpha_sq: f64, k: usize) -> f64 {
    // Raising n_bar only loosens the bound, so a tiny floor keeps the
    // parametrization valid for nearly pure coherent states.
    let nb = n_bar.max(1e-12);
    let kf = k as f64;
    let mut best = f64::INFINITY;
    let mut eval = |u: f64| {
        let zm1 = u / nb;
        let val = alpha_sq * zm1 / (1.0 - u) - (1.0 - u).ln() - kf * zm1.ln_1p();
        if val < best {
            best = val;
        }
    };
    // Uniform grid covers the thermal-dominated regime; the log-spaced
    // points reach the near-Poisson regime where the optimum sits at
    // u ~ n_bar * k / alpha_sq, arbitrarily close to zero.
    for j in 1..400 {
        eval(j as f64 / 400.0);
    }
    for t in 1..=26 {
        eval(10f64.powi(-t));
    }
    best
}

/// Smallest dimension whose Chernoff-bounded tail mass is below
/// `TAIL_MASS_TARGET`, before any cap is applied.
fn chernoff_dim(n_bar: f64, alpha_sq: f64) -> usize {
    let target = TAIL_MASS_TARGET.ln();
    let ok = |k: usize| displaced_thermal_log_tail_bound(n_bar, alpha_sq, k) <= target;
    if ok(2) {
        return 2;
    }
    if !ok(DIM_SEARCH_MAX) {
        return DIM_SEARCH_MAX;
    }
    // ok(k) is monotone in k: each grid point's bound decreases in k.
    let mut lo = 2usize;
    let mut hi = DIM_SEARCH_MAX;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Truncation dimension for a thermal state with mean occupation
/// `n_bar` displaced by |alpha|^2 = `alpha_abs_sq`, capped at `cap`.
///
/// Takes the larger of a padded square-root rule,
/// ceil((sqrt(n_bar + |alpha|^2) + 6)^2), and the smallest dimension
/// whose Chernoff-bounded tail mass stays below 1e-10. The second
/// criterion dominates for hot states, where the padded rule alone
/// leaves more than `DEFAULT_TAIL_TOL` in the top level.
pub fn suggested_dim_with_cap(n_bar: f64, alpha_abs_sq: f64, cap: usize) -> usize {
    let nb = n_bar.max(0.0);
    let aa = alpha_abs_sq.max(0.0);
    let rule = ((nb + aa).sqrt() + 6.0).powi(2).ceil() as usize;
    rule.max(chernoff_dim(nb, aa)).max(2).min(cap.max(2))
}

/// [`suggested_dim_with_cap`] with the cap from [`dim_cap`].
pub fn suggested_dim(n_bar: f64, alpha_abs_sq: f64) -> usize {
    suggested_dim_with_cap(n_bar, alpha_abs_sq, dim_cap())
}

/// Number of retained Fock levels |0>..|dim-1>.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockSpace {
    dim: usize,
}

impl FockSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain(format!(
                "Fock space needs at least 2 levels, got {dim}"
            )));
        }
        Ok(Self { dim })
    }

    /// Space sized by [`suggested_dim`] for the given occupancy.
    pub fn for_occupancy(n_bar: f64, alpha_abs_sq: f64) -> Self {
        Self {
            dim: suggested_dim(n_bar, alpha_abs_sq),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Annihilation operator: <m|a|n> = sqrt(n) delta_{m,n-1}.
    pub fn annihilation(&self) -> FieldOperator {
        let mut m = Array2::zeros((self.dim, self.dim));
        for n in 1..self.dim {
            m[[n - 1, n]] = Complex64::new((n as f64).sqrt(), 0.0);
        }
        FieldOperator {
            space: *self,
            matrix: m,
        }
    }

    /// Creation operator, the conjugate transpose of [`annihilation`].
    ///
    /// [`annihilation`]: Self::annihilation
    pub fn creation(&self) -> FieldOperator {
        self.annihilation().dagger()
    }

    /// Number operator, diagonal with entries 0..dim-1.
    pub fn number(&self) -> FieldOperator {
        let mut m = Array2::zeros((self.dim, self.dim));
        for n in 0..self.dim {
            m[[n, n]] = Complex64::new(n as f64, 0.0);
        }
        FieldOperator {
            space: *self,
            matrix: m,
        }
    }

    pub fn identity_op(&self) -> FieldOperator {
        FieldOperator {
            space: *self,
            matrix: linalg::identity(self.dim),
        }
    }

    /// Displacement operator exp(alpha a† - alpha* a) by dense matrix
    /// exponential of the truncated generator.
    ///
    /// The truncated generator stays exactly anti-Hermitian, so the
    /// result is always unitary; losing faithfulness to the untruncated
    /// operator is the real failure mode. The constructor rejects any
    /// amplitude whose coherent orbit D(alpha)|0> would carry more than
    /// [`DISPLACEMENT_TAIL_TOL`] of its mass at the top level, by the
    /// same Chernoff bound used for dimension selection. A unitarity
    /// check stays on as cheap insurance against exponential blowups.
    pub fn displacement(&self, alpha: Complex64) -> Result<FieldOperator> {
        let alpha_sq = alpha.norm_sqr();
        let log_tail = displaced_thermal_log_tail_bound(0.0, alpha_sq, self.dim - 1);
        if log_tail > DISPLACEMENT_TAIL_TOL.ln() {
            return Err(Error::Truncation(format!(
                "displacement with |alpha|^2 = {alpha_sq:.3} does not fit in {} levels \
                 (top-level mass bound e^{log_tail:.3}); increase the dimension",
                self.dim
            )));
        }
        let mut g = Array2::zeros((self.dim, self.dim));
        for k in 1..self.dim {
            let r = (k as f64).sqrt();
            g[[k, k - 1]] = alpha * r;
            g[[k - 1, k]] = -alpha.conj() * r;
        }
        let matrix = linalg::expm(&g)?;
        let defect = linalg::unitarity_defect(&matrix);
        if defect > DISPLACEMENT_UNITARITY_TOL {
            return Err(Error::Numerical(format!(
                "displacement with alpha = {alpha} lost unitarity on {} levels \
                 (defect {defect:.3e})",
                self.dim
            )));
        }
        Ok(FieldOperator {
            space: *self,
            matrix,
        })
    }
}

/// Dense operator bound to a [`FockSpace`].
#[derive(Debug, Clone)]
pub struct FieldOperator {
    space: FockSpace,
    matrix: Array2<Complex64>,
}

impl FieldOperator {
    /// Wraps an explicit matrix; the shape must match the space.
    pub fn from_matrix(space: FockSpace, matrix: Array2<Complex64>) -> Result<Self> {
        if matrix.dim() != (space.dim(), space.dim()) {
            return Err(Error::Domain(format!(
                "operator shape {:?} does not match a {}-level space",
                matrix.dim(),
                space.dim()
            )));
        }
        Ok(Self { space, matrix })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<Complex64> {
        self.matrix
    }

    pub fn dagger(&self) -> FieldOperator {
        FieldOperator {
            space: self.space,
            matrix: linalg::dagger(&self.matrix),
        }
    }

    pub fn dot(&self, other: &FieldOperator) -> FieldOperator {
        FieldOperator {
            space: self.space,
            matrix: self.matrix.dot(&other.matrix),
        }
    }

    pub fn scaled(&self, factor: Complex64) -> FieldOperator {
        FieldOperator {
            space: self.space,
            matrix: self.matrix.mapv(|z| z * factor),
        }
    }

    /// Largest entry of |O†O - 1|.
    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.matrix)
    }
}

/// exp(scale * op) by scaling-and-squaring.
pub fn matrix_exp(op: &FieldOperator, scale: Complex64) -> Result<FieldOperator> {
    let matrix = linalg::expm(&op.matrix.mapv(|z| z * scale))?;
    Ok(FieldOperator {
        space: op.space,
        matrix,
    })
}

/// Construction record attached to states built by the state factory
/// functions: inverse energy `beta` and displacement `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateMeta {
    pub beta: f64,
    pub alpha: Complex64,
}

/// Validity measurements taken when a state is constructed.
#[derive(Debug, Clone, Copy)]
pub struct StateDiagnostics {
    /// Largest entry of |rho - rho†|.
    pub hermiticity_defect: f64,
    /// |Tr rho - 1|.
    pub trace_defect: f64,
    /// Smallest eigenvalue.
    pub min_eigenvalue: f64,
    /// Population of the top retained level.
    pub top_level_weight: f64,
}

/// Density matrix on a [`FockSpace`], validated at construction:
/// Hermitian, unit trace, positive semidefinite, and with negligible
/// population in the top retained level.
#[derive(Debug, Clone)]
pub struct FieldState {
    space: FockSpace,
    matrix: Array2<Complex64>,
    meta: Option<StateMeta>,
    tail_tol: f64,
    diagnostics: StateDiagnostics,
}

impl FieldState {
    /// Validates with the default top-level tolerance.
    pub fn new(
        space: FockSpace,
        matrix: Array2<Complex64>,
        meta: Option<StateMeta>,
    ) -> Result<Self> {
        Self::with_tail_tol(space, matrix, meta, DEFAULT_TAIL_TOL)
    }

    pub fn with_tail_tol(
        space: FockSpace,
        matrix: Array2<Complex64>,
        meta: Option<StateMeta>,
        tail_tol: f64,
    ) -> Result<Self> {
        if matrix.dim() != (space.dim(), space.dim()) {
            return Err(Error::Domain(format!(
                "state shape {:?} does not match a {}-level space",
                matrix.dim(),
                space.dim()
            )));
        }
        if !linalg::all_finite(&matrix) {
            return Err(Error::Numerical("state has non-finite entries".into()));
        }
        let hermiticity_defect = linalg::hermiticity_defect(&matrix);
        if hermiticity_defect > HERMITICITY_TOL {
            return Err(Error::Numerical(format!(
                "state is not Hermitian: defect {hermiticity_defect:.3e} exceeds {HERMITICITY_TOL:.1e}"
            )));
        }
        let trace_defect = (linalg::trace(&matrix) - 1.0).norm();
        if trace_defect > TRACE_TOL {
            return Err(Error::Numerical(format!(
                "state trace deviates from 1 by {trace_defect:.3e}, tolerance {TRACE_TOL:.1e}"
            )));
        }
        let eigenvalues = linalg::eigvalsh(&matrix)?;
        let min_eigenvalue = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min_eigenvalue < EIGENVALUE_FLOOR {
            return Err(Error::Numerical(format!(
                "state has eigenvalue {min_eigenvalue:.3e} below the floor {EIGENVALUE_FLOOR:.1e}"
            )));
        }
        let dim = space.dim();
        let top_level_weight = matrix[[dim - 1, dim - 1]].re;
        if top_level_weight > tail_tol {
            return Err(Error::Truncation(format!(
                "top retained level holds population {top_level_weight:.3e}, above {tail_tol:.1e}; \
                 increase the dimension"
            )));
        }
        Ok(Self {
            space,
            matrix,
            meta,
            tail_tol,
            diagnostics: StateDiagnostics {
                hermiticity_defect,
                trace_defect,
                min_eigenvalue,
                top_level_weight,
            },
        })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn meta(&self) -> Option<StateMeta> {
        self.meta
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    pub fn diagnostics(&self) -> StateDiagnostics {
        self.diagnostics
    }

    /// Level populations <n|rho|n>.
    pub fn populations(&self) -> Array1<f64> {
        self.matrix.diag().mapv(|z| z.re)
    }

    /// Probability mass in the top `k` retained levels (all levels when
    /// `k >= dim`).
    pub fn tail_weight(&self, k: usize) -> f64 {
        let dim = self.space.dim();
        let lo = dim.saturating_sub(k);
        (lo..dim).map(|n| self.matrix[[n, n]].re).sum()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.matrix
            .diag()
            .iter()
            .enumerate()
            .map(|(n, z)| n as f64 * z.re)
            .sum()
    }

    /// Tr(rho O).
    pub fn expectation(&self, op: &FieldOperator) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.space.dim() {
            for j in 0..self.space.dim() {
                acc += self.matrix[[i, j]] * op.matrix[[j, i]];
            }
        }
        acc
    }

    /// Tr(rho^2), real by hermiticity.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }
}
