//! Small dense linear-algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below `max_sv * RANK_TOL` are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Thin SVD with singular values sorted in descending order and a fixed
/// sign convention: the largest-magnitude entry of each left singular
/// vector is positive. Returns (U, sigma, V) with `A = U * diag(sigma) * V^T`.
pub fn sorted_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let svd = a
        .clone()
        .try_svd(true, true, 1e-14, 10_000)
        .ok_or_else(|| Error::Numerical("SVD failed to converge".into()))?;
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let s = svd.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap());

    let mut u_sorted = DMatrix::zeros(u.nrows(), u.ncols());
    let mut v_sorted = DMatrix::zeros(vt.ncols(), vt.nrows());
    let mut s_sorted = DVector::zeros(s.len());
    for (new, &old) in order.iter().enumerate() {
        s_sorted[new] = s[old];
        let mut ucol = u.column(old).clone_owned();
        let mut vcol = vt.row(old).transpose();
        // sign fix for reproducibility across backends
        let mut best = 0usize;
        for k in 0..ucol.len() {
            if ucol[k].abs() > ucol[best].abs() {
                best = k;
            }
        }
        if ucol[best] < 0.0 {
            ucol.neg_mut();
            vcol.neg_mut();
        }
        u_sorted.set_column(new, &ucol);
        v_sorted.set_column(new, &vcol);
    }
    Ok((u_sorted, s_sorted, v_sorted))
}

/// Orthonormal basis of the orthogonal complement of `range(q)`, where the
/// columns of `q` are orthonormal. Returned matrix has `q.nrows() - q.ncols()`
/// orthonormal columns.
pub fn orthonormal_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    let r = q.ncols();
    debug_assert!(r <= n);
    if r == 0 {
        return DMatrix::identity(n, n);
    }
    // eigenvectors of the projector I - Q Q^T with eigenvalue 1
    let proj = DMatrix::identity(n, n) - q * q.transpose();
    let eig = proj.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());

    let dim = n - r;
    let mut out = DMatrix::zeros(n, dim);
    for (col, &idx) in order.iter().take(dim).enumerate() {
        let mut v = eig.eigenvectors.column(idx).clone_owned();
        let mut best = 0usize;
        for k in 0..n {
            if v[k].abs() > v[best].abs() {
                best = k;
            }
        }
        if v[best] < 0.0 {
            v.neg_mut();
        }
        out.set_column(col, &v);
    }
    out
}

/// Orthonormal basis of the null space of `a` (columns span `{x : a x = 0}`).
pub fn nullspace(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() == 0 {
        return Ok(DMatrix::identity(a.ncols(), a.ncols()));
    }
    let (_, s, v) = sorted_svd(a)?;
    let smax = if s.len() > 0 { s[0] } else { 0.0 };
    let tol = smax.max(1.0) * RANK_TOL;
    let rank = s.iter().filter(|&&x| x > tol).count();
    let row_basis = v.columns(0, rank).clone_owned();
    Ok(orthonormal_complement(&row_basis))
}

/// Moore-Penrose pseudo-inverse via SVD with the shared rank tolerance.
pub fn pinv(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (u, s, v) = sorted_svd(a)?;
    let smax = if s.len() > 0 { s[0] } else { 0.0 };
    let tol = smax.max(1.0) * RANK_TOL;
    let mut sinv = DMatrix::zeros(s.len(), s.len());
    for i in 0..s.len() {
        if s[i] > tol {
            sinv[(i, i)] = 1.0 / s[i];
        }
    }
    Ok(&v * sinv * u.transpose())
}

/// 2-norm condition number.
pub fn condition_number(a: &DMatrix<f64>) -> Result<f64> {
    let (_, s, _) = sorted_svd(a)?;
    let smin = s[s.len() - 1];
    if smin <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(s[0] / smin)
}

/// Spectral radius of a square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Load a dense matrix from plain text: first line "rows cols", then
/// row-major whitespace-separated decimals.
pub fn read_matrix_text(content: &str) -> Result<DMatrix<f64>> {
    let mut it = content.split_whitespace();
    let rows: usize = it
        .next()
        .ok_or_else(|| Error::Config("empty matrix file".into()))?
        .parse()
        .map_err(|e| Error::Config(format!("bad row count: {e}")))?;
    let cols: usize = it
        .next()
        .ok_or_else(|| Error::Config("missing column count".into()))?
        .parse()
        .map_err(|e| Error::Config(format!("bad column count: {e}")))?;
    let mut data = Vec::with_capacity(rows * cols);
    for tok in it {
        let x: f64 = tok
            .parse()
            .map_err(|e| Error::Config(format!("bad matrix entry '{tok}': {e}")))?;
        data.push(x);
    }
    if data.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "matrix file has {} entries, expected {}",
            data.len(),
            rows * cols
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// Write a dense matrix in the plain-text format accepted by [`read_matrix_text`].
pub fn write_matrix_text(a: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        let row: Vec<String> = (0..a.ncols()).map(|j| format!("{:.12e}", a[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn svd_reconstructs() {
        let a = seeded_matrix(8, 3, 1);
        let (u, s, v) = sorted_svd(&a).unwrap();
        let rec = &u * DMatrix::from_diagonal(&s) * v.transpose();
        assert!((&rec - &a).norm() / a.norm() < 1e-12);
        assert!(s[0] >= s[1] && s[1] >= s[2]);
    }

    #[test]
    fn complement_is_orthonormal() {
        let a = seeded_matrix(10, 4, 2);
        let (u, _, _) = sorted_svd(&a).unwrap();
        let c = orthonormal_complement(&u);
        assert_eq!(c.ncols(), 6);
        assert!((c.transpose() * &c - DMatrix::identity(6, 6)).norm() < 1e-10);
        assert!((u.transpose() * &c).norm() < 1e-10);
    }

    #[test]
    fn nullspace_annihilates() {
        let a = seeded_matrix(4, 9, 3);
        let n = nullspace(&a).unwrap();
        assert_eq!(n.ncols(), 5);
        assert!((&a * &n).norm() < 1e-10);
    }

    #[test]
    fn matrix_text_round_trip() {
        let a = seeded_matrix(3, 5, 4);
        let txt = write_matrix_text(&a);
        let b = read_matrix_text(&txt).unwrap();
        assert!((&a - &b).norm() < 1e-10);
    }

    #[test]
    fn matrix_text_rejects_short_file() {
        assert!(read_matrix_text("2 2\n1.0 2.0 3.0").is_err());
    }
}
