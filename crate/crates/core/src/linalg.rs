//! Small dense solves on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Weighted least squares `argmin Σ wᵢ (bᵢ - aᵢ'z)²` via Householder QR.
///
/// Rows with zero weight are dropped. Returns `None` when the weighted
/// design is numerically rank deficient.
pub fn weighted_least_squares(
    rows: &[f64],
    cols: usize,
    rhs: &[f64],
    weights: &[f64],
) -> Option<Vec<f64>> {
    let active: Vec<usize> = (0..rhs.len()).filter(|&i| weights[i] > 0.0).collect();
    if active.len() < cols {
        return None;
    }
    let mut a = DMatrix::<f64>::zeros(active.len(), cols);
    let mut b = DVector::<f64>::zeros(active.len());
    for (r, &i) in active.iter().enumerate() {
        let sw = weights[i].sqrt();
        for c in 0..cols {
            a[(r, c)] = sw * rows[i * cols + c];
        }
        b[r] = sw * rhs[i];
    }
    least_squares(a, b)
}

fn least_squares(a: DMatrix<f64>, b: DVector<f64>) -> Option<Vec<f64>> {
    let cols = a.ncols();
    let col_scale: f64 = (0..cols)
        .map(|c| a.column(c).norm())
        .fold(0.0, f64::max);
    if col_scale == 0.0 {
        return None;
    }
    let qr = a.qr();
    let r = qr.r();
    let max_diag = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..cols).any(|i| r[(i, i)].abs() <= 1e-12 * max_diag) {
        return None;
    }
    let qtb = qr.q().transpose() * b;
    let z = r.solve_upper_triangular(&qtb)?;
    z.iter().all(|v| v.is_finite()).then(|| z.iter().copied().collect())
}

/// Solve the square system `A z = b` (row-major `A`), rejecting matrices
/// whose determinant is tiny relative to the product of row norms.
pub fn solve_square(rows: &[f64], dim: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    let a = DMatrix::from_row_slice(dim, dim, rows);
    let norm_product: f64 = (0..dim).map(|i| a.row(i).norm()).product();
    if norm_product == 0.0 || !norm_product.is_finite() {
        return None;
    }
    let lu = a.full_piv_lu();
    if lu.determinant().abs() <= 1e-12 * norm_product {
        return None;
    }
    let z = lu.solve(&DVector::from_column_slice(rhs))?;
    z.iter().all(|v| v.is_finite()).then(|| z.iter().copied().collect())
}

/// Ratio of smallest to largest singular value of a row-major matrix.
pub fn inverse_condition(rows: &[f64], cols: usize) -> f64 {
    let n = rows.len() / cols;
    if n < cols {
        return 0.0;
    }
    let a = DMatrix::from_row_slice(n, cols, rows);
    let sv = a.singular_values();
    let max = sv.max();
    if max == 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}
