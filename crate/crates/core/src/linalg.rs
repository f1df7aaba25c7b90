//! Dense linear-algebra helpers shared by every module: numerical rank,
//! null spaces, sorted spectra, and a golden-section line search.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

/// Relative factor of the numerical-rank cut: a singular value counts when it
/// exceeds `RANK_RTOL * sigma_max * dim`.
pub const RANK_RTOL: f64 = 1e-9;

/// Rank cut for a matrix whose largest singular value is `sigma_max`.
pub fn rank_tolerance(sigma_max: f64, dim: usize) -> f64 {
    RANK_RTOL * sigma_max * dim.max(1) as f64
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let svd = SVD::new(m.clone(), false, false);
    svd.singular_values.iter().copied().collect()
}

pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = singular_values(m);
    let Some(&smax) = sv.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    let tol = rank_tolerance(smax, m.nrows().max(m.ncols()));
    sv.iter().filter(|&&s| s > tol).count()
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Eigen-decomposition with eigenvalues sorted ascending and matching columns.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Absolute eigenvalues of a symmetric matrix sorted descending; these are
/// its singular values.
pub fn sym_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().symmetric_eigenvalues().iter().map(|v| v.abs()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numerical rank of a symmetric matrix under the shared rank cut.
pub fn sym_rank(m: &DMatrix<f64>) -> usize {
    rank_from_sorted(&sym_singular_values(m), m.nrows())
}

pub fn rank_from_sorted(sv: &[f64], dim: usize) -> usize {
    let Some(&smax) = sv.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    let tol = rank_tolerance(smax, dim);
    sv.iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis (as columns) of the null space of `m`.
pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    // pad wide matrices so that the SVD returns a complete right basis
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let tol = if smax == 0.0 {
        0.0
    } else {
        rank_tolerance(smax, rows.max(cols))
    };
    let kernel: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] <= tol).collect();
    let mut basis = DMatrix::zeros(cols, kernel.len());
    for (c, &i) in kernel.iter().enumerate() {
        basis.set_column(c, &v_t.row(i).transpose());
    }
    basis
}

/// Orthonormal basis of the column span of `m` (rank-revealing).
pub fn column_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if cols == 0 || rows == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let rank = rank_from_sorted(svd.singular_values.as_slice(), rows.max(cols));
    u.columns(0, rank).into_owned()
}

pub fn frobenius_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// Frobenius Gram matrix of a list of matrices viewed as vectors.
pub fn gram(mats: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let k = mats.len();
    DMatrix::from_fn(k, k, |i, j| frobenius_dot(mats[i], mats[j]))
}

/// Singular values of the stacked, individually normalised matrices relative
/// to the largest, one per input. Zero matrices contribute zeros.
pub fn independence_spectrum(mats: &[&DMatrix<f64>]) -> Vec<f64> {
    let normalized: Vec<DMatrix<f64>> = mats.iter().filter(|m| m.norm() > 0.0).map(|m| *m / m.norm()).collect();
    let mut out = vec![0.0; mats.len()];
    if normalized.is_empty() {
        return out;
    }
    let len = normalized[0].len();
    let stacked = DMatrix::from_fn(len, normalized.len(), |r, c| normalized[c].as_slice()[r]);
    let sv = singular_values(&stacked);
    for (o, s) in out.iter_mut().zip(&sv) {
        *o = s / sv[0];
    }
    out
}

/// Number of linearly independent matrices among `mats` (scale-free: every
/// matrix is normalised first, zero matrices count as dependent).
pub fn independent_count(mats: &[&DMatrix<f64>]) -> usize {
    independence_spectrum(mats).iter().filter(|&&s| s > RANK_RTOL).count()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Square root of a positive-semidefinite matrix via its spectrum.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (values, vectors) = sym_eigen_sorted(m);
    let d = DVector::from_iterator(values.len(), values.iter().map(|v| v.max(0.0).sqrt()));
    &vectors * DMatrix::from_diagonal(&d) * vectors.transpose()
}

/// Maximises a unimodal `f` on `[lo, hi]`; returns `(argmax, max)`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc > fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    let (x, v) = golden_max(|t| -f(t), lo, hi, iters);
    (x, -v)
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let r = theta.rem_euclid(tau);
    if r >= tau {
        0.0
    } else {
        r
    }
}
