//! Dense complex linear-algebra kernels shared across the crate.
//!
//! Everything operates on square `Array2<Complex64>` in the default
//! row-major layout. Hermitian eigenproblems go through LAPACK; the
//! general matrix exponential uses scaling-and-squaring with diagonal
//! Pade approximants of order 3/5/7/9/13, picked from the 1-norm of the
//! input so that the approximant is accurate to unit roundoff.

use ndarray::prelude::*;
use ndarray_linalg::{EigValsh as _, Eigh as _, Inverse as _, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn identity(n: usize) -> Array2<Complex64> {
    Array2::eye(n)
}

/// Conjugate transpose.
pub fn dagger(a: &Array2<Complex64>) -> Array2<Complex64> {
    let mut out = Array2::zeros((a.ncols(), a.nrows()));
    for ((i, j), z) in a.indexed_iter() {
        out[[j, i]] = z.conj();
    }
    out
}

pub fn trace(a: &Array2<Complex64>) -> Complex64 {
    a.diag().sum()
}

pub fn max_abs(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest entry of |a - a†|.
pub fn hermiticity_defect(a: &Array2<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

/// Largest entry of |u†u - 1|.
pub fn unitarity_defect(u: &Array2<Complex64>) -> f64 {
    let gram = dagger(u).dot(u);
    max_abs_diff(&gram, &identity(u.nrows()))
}

pub fn all_finite(a: &Array2<Complex64>) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Kronecker product; the left factor owns the slow (outer) index.
pub fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ((i, j), &za) in a.indexed_iter() {
        if za == Complex64::new(0.0, 0.0) {
            continue;
        }
        for ((k, l), &zb) in b.indexed_iter() {
            out[[i * br + k, j * bc + l]] = za * zb;
        }
    }
    out
}

/// Maximum absolute column sum.
fn one_norm(a: &Array2<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|z| z.norm()).sum();
        worst = worst.max(s);
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors
/// as the *columns* of the second array, so `h = v diag(w) v†`. The
/// LAPACK backend reads the row-major buffer in column-major order and
/// therefore diagonalises conj(h); the conjugation below restores the
/// column convention. Pinned by the reconstruction test.
pub fn eigh(h: &Array2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    let (w, v) = h
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigensolve failed: {e}")))?;
    Ok((w, v.mapv(|z| z.conj())))
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(h: &Array2<Complex64>) -> Result<Array1<f64>> {
    h.eigvalsh(UPLO::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigensolve failed: {e}")))
}

/// Applies a scalar function to a Hermitian matrix through its
/// eigendecomposition: `f(h) = v diag(f(w)) v†`.
pub fn func_hermitian(
    h: &Array2<Complex64>,
    f: impl Fn(f64) -> Complex64,
) -> Result<Array2<Complex64>> {
    let (w, v) = eigh(h)?;
    let mut scaled = v.clone();
    for (j, &val) in w.iter().enumerate() {
        let fz = f(val);
        scaled.column_mut(j).mapv_inplace(|z| z * fz);
    }
    Ok(scaled.dot(&dagger(&v)))
}

// Numerators of the diagonal Pade approximants to exp(x); the
// denominator shares the coefficients with alternating signs.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// 1-norm thresholds below which the approximant of each order reaches
// unit roundoff for double precision.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

fn scaled_add(acc: &mut Array2<Complex64>, m: &Array2<Complex64>, c: f64) {
    acc.zip_mut_with(m, |a, &b| *a += b * c);
}

fn diagonal_shift(m: &mut Array2<Complex64>, c: f64) {
    for i in 0..m.nrows() {
        m[[i, i]] += c;
    }
}

/// Odd part `u` and even part `v` of the order-`m` Pade numerator, so
/// that exp(a) is approximated by (v - u)^{-1} (v + u).
fn pade_uv(a: &Array2<Complex64>, order: usize) -> (Array2<Complex64>, Array2<Complex64>) {
    let n = a.nrows();
    let a2 = a.dot(a);
    let coeffs: &[f64] = match order {
        3 => &PADE3,
        5 => &PADE5,
        7 => &PADE7,
        9 => &PADE9,
        13 => &PADE13,
        _ => unreachable!("unsupported Pade order"),
    };
    if order == 13 {
        let a4 = a2.dot(&a2);
        let a6 = a4.dot(&a2);
        let mut u_hi: Array2<Complex64> = Array2::zeros((n, n));
        scaled_add(&mut u_hi, &a6, coeffs[13]);
        scaled_add(&mut u_hi, &a4, coeffs[11]);
        scaled_add(&mut u_hi, &a2, coeffs[9]);
        let mut u_inner = a6.dot(&u_hi);
        scaled_add(&mut u_inner, &a6, coeffs[7]);
        scaled_add(&mut u_inner, &a4, coeffs[5]);
        scaled_add(&mut u_inner, &a2, coeffs[3]);
        diagonal_shift(&mut u_inner, coeffs[1]);
        let u = a.dot(&u_inner);

        let mut v_hi: Array2<Complex64> = Array2::zeros((n, n));
        scaled_add(&mut v_hi, &a6, coeffs[12]);
        scaled_add(&mut v_hi, &a4, coeffs[10]);
        scaled_add(&mut v_hi, &a2, coeffs[8]);
        let mut v = a6.dot(&v_hi);
        scaled_add(&mut v, &a6, coeffs[6]);
        scaled_add(&mut v, &a4, coeffs[4]);
        scaled_add(&mut v, &a2, coeffs[2]);
        diagonal_shift(&mut v, coeffs[0]);
        return (u, v);
    }

    // Orders 3..9: accumulate even powers directly.
    let mut powers = vec![identity(n), a2.clone()];
    while powers.len() <= order / 2 {
        let next = powers.last().unwrap().dot(&a2);
        powers.push(next);
    }
    let mut u_inner: Array2<Complex64> = Array2::zeros((n, n));
    let mut v: Array2<Complex64> = Array2::zeros((n, n));
    for (k, p) in powers.iter().enumerate() {
        scaled_add(&mut u_inner, p, coeffs[2 * k + 1]);
        scaled_add(&mut v, p, coeffs[2 * k]);
    }
    (a.dot(&u_inner), v)
}

/// Matrix exponential by scaling-and-squaring with diagonal Pade
/// approximants.
pub fn expm(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Domain(format!(
            "matrix exponential needs a square input, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if !all_finite(a) {
        return Err(Error::Numerical(
            "matrix exponential input has non-finite entries".into(),
        ));
    }
    let norm = one_norm(a);
    let (order, squarings) = if norm <= THETA3 {
        (3, 0u32)
    } else if norm <= THETA5 {
        (5, 0)
    } else if norm <= THETA7 {
        (7, 0)
    } else if norm <= THETA9 {
        (9, 0)
    } else if norm <= THETA13 {
        (13, 0)
    } else {
        (13, (norm / THETA13).log2().ceil() as u32)
    };

    let scaled;
    let work = if squarings > 0 {
        let factor = 0.5f64.powi(squarings as i32);
        scaled = a.mapv(|z| z * factor);
        &scaled
    } else {
        a
    };
    let (u, v) = pade_uv(work, order);
    let numerator = &v + &u;
    let denominator = &v - &u;
    let den_inv = denominator
        .inv()
        .map_err(|e| Error::Numerical(format!("Pade denominator not invertible: {e}")))?;
    let mut x = den_inv.dot(&numerator);
    for _ in 0..squarings {
        x = x.dot(&x);
    }
    if !all_finite(&x) {
        return Err(Error::Numerical(
            "matrix exponential overflowed to non-finite entries".into(),
        ));
    }
    Ok(x)
}
