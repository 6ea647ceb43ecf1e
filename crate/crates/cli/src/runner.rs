//! Grid-point computations behind each subcommand. Rows never abort a
//! sweep: failures land in the error column and the sweep continues.

use num_complex::Complex64;
use rayon::prelude::*;

use cavjar_core::estimator::visibility_work_identity_report;
use cavjar_core::fock::{suggested_dim, FockSpace};
use cavjar_core::ramsey::{
    interferometer_scan, visibility_characteristic, visibility_displaced_closed_form,
    DispersiveCoupling, InteractionConfig,
};
use cavjar_core::states::{delta_f, displaced_thermal_state, ThermalParams};
use cavjar_core::work::{
    auto_space, build_propagator, characteristic_function_g_in, default_method,
    tpm_exponential_average_in, AverageMode,
};

use crate::config::{ModeSpec, Settings};

/// One output cell; floats stay optional so errored rows leave their
/// numeric columns empty in every format.
#[derive(Debug, Clone)]
pub enum Cell {
    Float(Option<f64>),
    Int(u64),
    Text(String),
}

#[derive(Debug)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub n_errors: usize,
}

fn with_pool<T: Send>(
    threads: usize,
    f: impl FnOnce() -> T + Send,
) -> Result<T, String> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| format!("cannot build a {threads}-thread pool: {e}"))?;
    Ok(pool.install(f))
}

pub fn run(command: &str, settings: &Settings) -> Result<Table, String> {
    match command {
        "visibility" => visibility_table(settings),
        "jarzynski" => jarzynski_table(settings),
        "estimate" => estimate_table(settings),
        "fringes" => fringes_table(settings),
        other => Err(format!("unknown command {other}")),
    }
}

fn f(v: f64) -> Cell {
    Cell::Float(Some(v))
}

fn empty() -> Cell {
    Cell::Float(None)
}

fn probe_config(settings: &Settings, theta: f64) -> InteractionConfig {
    InteractionConfig::new(
        DispersiveCoupling::from_shift(1.0).expect("unit shift is valid"),
        theta,
    )
    .expect("nonnegative window")
    .with_uniform_phases(settings.phi_points)
}

fn displaced_field(
    settings: &Settings,
    p: &ThermalParams,
    alpha: f64,
) -> Result<cavjar_core::fock::FieldState, String> {
    let auto = suggested_dim(p.mean_occupation(), alpha * alpha);
    let dim = settings.resolve_dim(auto)?;
    let space = FockSpace::new(dim).map_err(|e| e.to_string())?;
    displaced_thermal_state(space, p, Complex64::new(alpha, 0.0)).map_err(|e| e.to_string())
}

struct VisibilityPoint {
    closed: f64,
    characteristic: f64,
    fringe: f64,
    dev: f64,
}

fn visibility_point(
    settings: &Settings,
    x: f64,
    alpha: f64,
    theta: f64,
) -> Result<VisibilityPoint, String> {
    let p = ThermalParams::from_beta_omega0(x).map_err(|e| e.to_string())?;
    let field = displaced_field(settings, &p, alpha)?;
    let cfg = probe_config(settings, theta);
    let closed = visibility_displaced_closed_form(&p, Complex64::new(alpha, 0.0), theta);
    let characteristic = visibility_characteristic(&field, &cfg);
    let fringe = interferometer_scan(&field, &cfg)
        .map_err(|e| e.to_string())?
        .visibility;
    let dev = (closed - characteristic)
        .abs()
        .max((closed - fringe).abs())
        .max((characteristic - fringe).abs());
    Ok(VisibilityPoint {
        closed,
        characteristic,
        fringe,
        dev,
    })
}

fn visibility_table(settings: &Settings) -> Result<Table, String> {
    let mut inputs = Vec::new();
    for &x in &settings.beta_omega0 {
        for &a in &settings.alpha {
            for &theta in &settings.omega_dt {
                inputs.push((x, a, theta));
            }
        }
    }
    let rows: Vec<(Vec<Cell>, bool)> = with_pool(settings.threads, || {
        inputs
            .par_iter()
            .map(|&(x, a, theta)| match visibility_point(settings, x, a, theta) {
                Ok(v) => (
                    vec![
                        f(x),
                        f(a),
                        f(theta),
                        f(v.closed),
                        f(v.characteristic),
                        f(v.fringe),
                        f(v.dev),
                        Cell::Text(String::new()),
                    ],
                    false,
                ),
                Err(e) => (
                    vec![
                        f(x),
                        f(a),
                        f(theta),
                        empty(),
                        empty(),
                        empty(),
                        empty(),
                        Cell::Text(e),
                    ],
                    true,
                ),
            })
            .collect()
    })?;
    let n_errors = rows.iter().filter(|(_, e)| *e).count();
    Ok(Table {
        headers: vec![
            "beta_omega0",
            "alpha",
            "omega_dt",
            "v_closed_form",
            "v_characteristic",
            "v_fringe_fit",
            "max_pairwise_dev",
            "error",
        ],
        rows: rows.into_iter().map(|(r, _)| r).collect(),
        n_errors,
    })
}

struct JarzynskiPoint {
    lhs: f64,
    rhs_exact: f64,
    dev_exact: f64,
    g_ibeta: f64,
    dev_g: f64,
    rhs_mc: Option<f64>,
    mc_std_error: Option<f64>,
    dev_mc: Option<f64>,
}

fn jarzynski_point(settings: &Settings, x: f64, alpha: f64) -> Result<JarzynskiPoint, String> {
    let p = ThermalParams::from_beta_omega0(x).map_err(|e| e.to_string())?;
    let protocol = settings.protocol.build(alpha);
    let auto = auto_space(&p, &protocol);
    let dim = settings.resolve_dim(auto.dim())?;
    let space = FockSpace::new(dim).map_err(|e| e.to_string())?;
    let prop = build_propagator(space, &p, &protocol, default_method(&protocol))
        .map_err(|e| e.to_string())?;

    let n = settings.n_oscillators as i32;
    let nf = n as f64;
    let lhs = (-p.beta() * delta_f(&p, &protocol) * nf).exp();

    let exact = tpm_exponential_average_in(space, &p, &protocol, &prop, AverageMode::ExactSum)
        .map_err(|e| e.to_string())?;
    let rhs_exact = exact.value.powi(n);

    let g = characteristic_function_g_in(space, &p, &protocol, &prop, Complex64::new(0.0, p.beta()))
        .map_err(|e| e.to_string())?;
    let g_ibeta = g.re.powi(n);

    let (rhs_mc, mc_std_error, dev_mc) = if settings.n_shots > 0 {
        let mc = tpm_exponential_average_in(
            space,
            &p,
            &protocol,
            &prop,
            AverageMode::MonteCarlo {
                n_shots: settings.n_shots,
                seed: settings.seed,
            },
        )
        .map_err(|e| e.to_string())?;
        let sigma = mc.std_error.unwrap_or(0.0);
        let value = mc.value.powi(n);
        (
            Some(value),
            Some(nf * mc.value.powi(n - 1) * sigma),
            Some((value - lhs).abs() / lhs),
        )
    } else {
        (None, None, None)
    };

    Ok(JarzynskiPoint {
        lhs,
        rhs_exact,
        dev_exact: (rhs_exact - lhs).abs() / lhs,
        g_ibeta,
        dev_g: (g_ibeta - lhs).abs() / lhs,
        rhs_mc,
        mc_std_error,
        dev_mc,
    })
}

fn jarzynski_table(settings: &Settings) -> Result<Table, String> {
    let mut inputs = Vec::new();
    for &x in &settings.beta_omega0 {
        for &a in &settings.alpha {
            inputs.push((x, a));
        }
    }
    let protocol_label = settings.protocol.label();
    let rows: Vec<(Vec<Cell>, bool)> = with_pool(settings.threads, || {
        inputs
            .par_iter()
            .map(|&(x, a)| {
                let head = vec![
                    f(x),
                    f(a),
                    Cell::Text(protocol_label.clone()),
                    Cell::Int(settings.n_oscillators as u64),
                ];
                match jarzynski_point(settings, x, a) {
                    Ok(v) => (
                        head.into_iter()
                            .chain([
                                f(v.lhs),
                                f(v.rhs_exact),
                                f(v.dev_exact),
                                f(v.g_ibeta),
                                f(v.dev_g),
                                Cell::Float(v.rhs_mc),
                                Cell::Float(v.mc_std_error),
                                Cell::Float(v.dev_mc),
                                Cell::Text(String::new()),
                            ])
                            .collect(),
                        false,
                    ),
                    Err(e) => (
                        head.into_iter()
                            .chain([
                                empty(),
                                empty(),
                                empty(),
                                empty(),
                                empty(),
                                empty(),
                                empty(),
                                empty(),
                                Cell::Text(e),
                            ])
                            .collect(),
                        true,
                    ),
                }
            })
            .collect()
    })?;
    let n_errors = rows.iter().filter(|(_, e)| *e).count();
    Ok(Table {
        headers: vec![
            "beta_omega0",
            "alpha",
            "protocol",
            "n_oscillators",
            "lhs_exp_neg_beta_delta_f",
            "rhs_exact_sum",
            "dev_exact",
            "g_ibeta",
            "dev_g",
            "rhs_monte_carlo",
            "mc_std_error",
            "dev_monte_carlo",
            "error",
        ],
        rows: rows.into_iter().map(|(r, _)| r).collect(),
        n_errors,
    })
}

struct EstimatePoint {
    regime: &'static str,
    v_thermal: f64,
    v_displaced: f64,
    functional: f64,
    exact: f64,
    tpm: f64,
    spread: f64,
}

fn estimate_point(
    settings: &Settings,
    x: f64,
    alpha: f64,
    theta: f64,
) -> Result<EstimatePoint, String> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let wrapped = theta.rem_euclid(two_pi);
    if wrapped.min(two_pi - wrapped) < 1e-6 {
        return Err(format!(
            "omega_dt = {theta} sits at a full turn where the undisplaced \
             contrast saturates and the ratio degenerates; choose omega_dt = pi"
        ));
    }
    let p = ThermalParams::from_beta_omega0(x).map_err(|e| e.to_string())?;
    let protocol = settings.protocol.build(alpha);
    let report = visibility_work_identity_report(&p, &protocol, theta, settings.mode.to_core())
        .map_err(|e| e.to_string())?;
    let regime = if settings.mode == ModeSpec::SmallBeta && x >= 0.3 {
        "degraded"
    } else {
        "ok"
    };
    Ok(EstimatePoint {
        regime,
        v_thermal: report.v_thermal,
        v_displaced: report.v_displaced,
        functional: report.visibility_functional,
        exact: report.exp_neg_beta_delta_f,
        tpm: report.tpm_average,
        spread: report.max_relative_spread,
    })
}

fn estimate_table(settings: &Settings) -> Result<Table, String> {
    let mut inputs = Vec::new();
    for &x in &settings.beta_omega0 {
        for &a in &settings.alpha {
            for &theta in &settings.omega_dt {
                inputs.push((x, a, theta));
            }
        }
    }
    let mode_label = settings.mode.label();
    let rows: Vec<(Vec<Cell>, bool)> = with_pool(settings.threads, || {
        inputs
            .par_iter()
            .map(|&(x, a, theta)| {
                let head = vec![f(x), f(a), f(theta), Cell::Text(mode_label.into())];
                match estimate_point(settings, x, a, theta) {
                    Ok(v) => (
                        head.into_iter()
                            .chain([
                                Cell::Text(v.regime.into()),
                                f(v.v_thermal),
                                f(v.v_displaced),
                                f(v.functional),
                                f(v.exact),
                                f(v.tpm),
                                f(v.spread),
                                Cell::Text(String::new()),
                            ])
                            .collect(),
                        false,
                    ),
                    Err(e) => (
                        head.into_iter()
                            .chain([
                                Cell::Text(String::new()),
                                empty(),
                                empty(),
                                empty(),
                                empty(),
                                empty(),
                                empty(),
                                Cell::Text(e),
                            ])
                            .collect(),
                        true,
                    ),
                }
            })
            .collect()
    })?;
    let n_errors = rows.iter().filter(|(_, e)| *e).count();
    Ok(Table {
        headers: vec![
            "beta_omega0",
            "alpha",
            "omega_dt",
            "mode",
            "regime",
            "v_thermal",
            "v_displaced",
            "visibility_functional",
            "exp_neg_beta_delta_f",
            "tpm_average",
            "max_relative_spread",
            "error",
        ],
        rows: rows.into_iter().map(|(r, _)| r).collect(),
        n_errors,
    })
}

fn fringes_table(settings: &Settings) -> Result<Table, String> {
    // Fringe records are per field state; the scan uses the first
    // accumulated phase of the grid.
    let theta = settings.omega_dt[0];
    let mut inputs = Vec::new();
    for &x in &settings.beta_omega0 {
        for &a in &settings.alpha {
            inputs.push((x, a));
        }
    }
    let phases: Vec<f64> = (0..settings.phi_points)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / settings.phi_points as f64)
        .collect();

    type Block = Vec<(Vec<Cell>, bool)>;
    let blocks: Vec<Block> = with_pool(settings.threads, || {
        inputs
            .par_iter()
            .map(|&(x, a)| {
                let scan = ThermalParams::from_beta_omega0(x)
                    .map_err(|e| e.to_string())
                    .and_then(|p| {
                        let field = displaced_field(settings, &p, a)?;
                        interferometer_scan(&field, &probe_config(settings, theta))
                            .map_err(|e| e.to_string())
                    });
                match scan {
                    Ok(record) => record
                        .phases
                        .iter()
                        .zip(&record.f_populations)
                        .map(|(&phi, &pop)| {
                            (
                                vec![
                                    f(x),
                                    f(a),
                                    f(theta),
                                    f(phi),
                                    f(pop),
                                    f(record.visibility),
                                    Cell::Text(String::new()),
                                ],
                                false,
                            )
                        })
                        .collect(),
                    Err(e) => phases
                        .iter()
                        .map(|&phi| {
                            (
                                vec![
                                    f(x),
                                    f(a),
                                    f(theta),
                                    f(phi),
                                    empty(),
                                    empty(),
                                    Cell::Text(e.clone()),
                                ],
                                true,
                            )
                        })
                        .collect(),
                }
            })
            .collect()
    })?;
    let rows: Vec<(Vec<Cell>, bool)> = blocks.into_iter().flatten().collect();
    let n_errors = rows.iter().filter(|(_, e)| *e).count();
    Ok(Table {
        headers: vec![
            "beta_omega0",
            "alpha",
            "omega_dt",
            "phi",
            "f_population",
            "fitted_visibility",
            "error",
        ],
        rows: rows.into_iter().map(|(r, _)| r).collect(),
        n_errors,
    })
}
