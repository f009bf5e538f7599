//! Dense complex helpers: Householder thin QR and Hermitian conditioning.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

/// Economy QR factorisation `A = Q R` of a tall `m × k` matrix (`m ≥ k`).
#[derive(Debug, Clone)]
pub struct ThinQr {
    /// `m × k`, orthonormal columns.
    pub q: DMatrix<Complex64>,
    /// `k × k` upper triangular with real, non-negative diagonal.
    pub r: DMatrix<Complex64>,
}

/// Householder QR. Each column step reflects the trailing sub-column onto
/// `-e^{i arg x₀} ‖x‖ e₁`, which avoids cancellation; the diagonal of `R`
/// is then rotated onto the non-negative real axis by moving its phase into
/// the matching column of `Q`.
///
/// Rank-deficient input is fine: the affected diagonal entries come out
/// near zero and `Q` stays orthonormal because it is a product of
/// reflectors.
pub fn thin_qr(a: &DMatrix<Complex64>) -> ThinQr {
    let (m, k) = a.shape();
    assert!(m >= k, "thin QR needs at least as many rows as columns ({m} < {k})");

    let mut work = a.clone();
    let mut reflectors: Vec<Option<(DVector<Complex64>, f64)>> = Vec::with_capacity(k);

    for j in 0..k {
        let x = work.column(j).rows(j, m - j).into_owned();
        let norm = x.norm();
        if norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let x0 = x[0];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm;
        let mut v: DVector<Complex64> = x;
        v[0] -= alpha;
        let vv = v.norm_squared();
        if vv == 0.0 {
            reflectors.push(None);
            continue;
        }
        for c in j..k {
            let mut col = work.column_mut(c);
            let mut col = col.rows_mut(j, m - j);
            let s = v.dotc(&col) * (2.0 / vv);
            col.axpy(-s, &v, Complex64::new(1.0, 0.0));
        }
        reflectors.push(Some((v, vv)));
    }

    let mut r = DMatrix::from_fn(
        k,
        k,
        |i, j| {
            if i <= j {
                work[(i, j)]
            } else {
                Complex64::new(0.0, 0.0)
            }
        },
    );

    // Q = H_0 H_1 … H_{k-1} [I_k; 0]; H_j leaves rows < j and columns < j alone.
    let mut q = DMatrix::from_fn(m, k, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    for (j, refl) in reflectors.iter().enumerate().rev() {
        let Some((v, vv)) = refl else { continue };
        for c in j..k {
            let mut col = q.column_mut(c);
            let mut col = col.rows_mut(j, m - j);
            let s = v.dotc(&col) * (2.0 / vv);
            col.axpy(-s, v, Complex64::new(1.0, 0.0));
        }
    }

    for j in 0..k {
        let d = r[(j, j)];
        let mag = d.norm();
        if mag > 0.0 {
            let phase = d / mag;
            for c in j..k {
                r[(j, c)] *= phase.conj();
            }
            r[(j, j)] = Complex64::new(mag, 0.0);
            for i in 0..m {
                q[(i, j)] *= phase;
            }
        }
    }

    ThinQr { q, r }
}

/// Spectral condition number `λ_max / λ_min` of a Hermitian positive
/// semi-definite matrix; infinite when the smallest eigenvalue is not
/// positive.
pub fn hermitian_condition(g: &DMatrix<Complex64>) -> f64 {
    let eig = SymmetricEigen::new(g.clone()).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if !(min > 0.0) || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}
