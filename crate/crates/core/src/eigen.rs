//! Dense eigendecomposition of small complex matrices.
//!
//! Eigenvalues come from nalgebra's complex Schur decomposition; right
//! eigenvectors are recovered by back-substitution on the triangular factor.
//! Every pair is checked against `‖Av − λv‖ ≤ tol·‖A‖` before it is returned.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: [Complex64; 4],
    /// Unit-norm right eigenvectors, `vectors[k]` belongs to `values[k]`.
    pub vectors: [Vector4<Complex64>; 4],
}

pub fn frobenius(m: &Matrix4<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues only.
pub fn eigenvalues4(m: &Matrix4<Complex64>) -> Result<[Complex64; 4]> {
    if m.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Ok([Complex64::new(0.0, 0.0); 4]);
    }
    let schur = m
        .try_schur(SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok([t[(0, 0)], t[(1, 1)], t[(2, 2)], t[(3, 3)]])
}

/// Full eigendecomposition with residual check.
pub fn eig4(m: &Matrix4<Complex64>) -> Result<EigenPairs> {
    if m.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        let e = Matrix4::<Complex64>::identity();
        return Ok(EigenPairs {
            values: [Complex64::new(0.0, 0.0); 4],
            vectors: [0, 1, 2, 3].map(|k| e.column(k).into_owned()),
        });
    }
    let schur = m
        .try_schur(SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let norm = frobenius(m);
    let small = f64::EPSILON * norm.max(f64::MIN_POSITIVE);

    let mut values = [Complex64::new(0.0, 0.0); 4];
    let mut vectors = [Vector4::zeros(); 4];
    for k in 0..4 {
        let lambda = t[(k, k)];
        let mut y = Vector4::<Complex64>::zeros();
        y[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                s += t[(i, j)] * y[j];
            }
            let mut d = t[(i, i)] - lambda;
            if d.norm() < small {
                d = Complex64::new(small, 0.0);
            }
            y[i] = -s / d;
        }
        let x = q * y;
        let n = x.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Eigen(format!("degenerate eigenvector for {lambda}")));
        }
        values[k] = lambda;
        vectors[k] = x / Complex64::new(n, 0.0);
    }

    let pairs = EigenPairs { values, vectors };
    let worst = max_residual(m, &pairs);
    if worst > RESIDUAL_TOLERANCE * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Eigen(format!(
            "residual {worst:.3e} exceeds {RESIDUAL_TOLERANCE:e}·‖A‖ (‖A‖ = {norm:.3e})"
        )));
    }
    Ok(pairs)
}

pub fn max_residual(m: &Matrix4<Complex64>, pairs: &EigenPairs) -> f64 {
    pairs
        .values
        .iter()
        .zip(pairs.vectors.iter())
        .map(|(&l, v)| (m * v - v * l).norm())
        .fold(0.0, f64::max)
}

/// Eigenpairs of a general complex 2×2 matrix `[[a, b], [c, d]]` in closed
/// form. Returns `(values, unit right eigenvectors)`; the first value has the
/// `+` square-root branch.
pub fn eig2(m: &Matrix2<Complex64>) -> ([Complex64; 2], [Vector2<Complex64>; 2]) {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powu(2) + b * c;
    let root = disc.sqrt();
    let values = [half_tr + root, half_tr - root];
    let vectors = values.map(|l| {
        // Both rows of (M − λ)x = 0 give a candidate; keep the better conditioned.
        let v1 = Vector2::new(b, l - a);
        let v2 = Vector2::new(l - d, c);
        let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
        let n = v.norm();
        if n > 0.0 {
            v / Complex64::new(n, 0.0)
        } else {
            // Scalar matrix: every vector is an eigenvector.
            Vector2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
        }
    });
    (values, vectors)
}
