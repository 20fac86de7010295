use crate::error::{Error, Result};
use crate::{Matrix, Vector};

fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Number of singular values at least `cutoff * sigma_max`. Zero matrix has rank 0.
pub fn numeric_rank(m: &Matrix, cutoff: f64) -> usize {
    let sv = singular_values(m);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s >= cutoff * smax).count()
}

/// Rank against an externally supplied scale: counts singular values at
/// least `cutoff * scale`. Used when a whole family of matrices shares a
/// reference size, so a collapsed member reports rank 0 rather than noise.
pub fn numeric_rank_scaled(m: &Matrix, cutoff: f64, scale: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s >= cutoff * scale).count()
}

/// Orthonormal basis (as columns) of the kernel of `m`.
pub fn null_space(m: &Matrix, cutoff: f64) -> Matrix {
    let n = m.ncols();
    if m.nrows() == 0 {
        return Matrix::identity(n, n);
    }
    // Pad to a square matrix so the SVD returns a full set of right singular vectors.
    let rows = m.nrows().max(n);
    let mut padded = Matrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let kernel: Vec<Vector> = (0..n)
        .filter(|&i| svd.singular_values[i] <= cutoff * smax.max(f64::MIN_POSITIVE))
        .map(|i| v_t.row(i).transpose())
        .collect();
    if kernel.is_empty() {
        Matrix::zeros(n, 0)
    } else {
        Matrix::from_columns(&kernel)
    }
}

pub fn pseudo_inverse(m: &Matrix) -> Result<Matrix> {
    m.clone()
        .pseudo_inverse(1e-13)
        .map_err(|e| Error::Domain(format!("pseudo-inverse failed: {e}")))
}

/// Solve `a x = b` for symmetric positive-definite `a`.
pub fn solve_spd(a: &Matrix, b: &Vector) -> Result<Vector> {
    a.clone()
        .cholesky()
        .map(|c| c.solve(b))
        .ok_or_else(|| Error::NotPositiveDefinite(format!("{} x {} system", a.nrows(), a.ncols())))
}
