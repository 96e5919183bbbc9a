//! Small dense linear algebra on top of nalgebra: kernels, ranks, complements
//! and subspace comparisons, all with relative singular-value cutoffs.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Singular values (descending) and a full orthogonal V (columns).
fn svd_full(a: &Mat) -> (Vec<f64>, Mat) {
    let (r, c) = a.shape();
    if c == 0 {
        return (Vec::new(), Mat::zeros(0, 0));
    }
    // Pad to at least square so V is complete.
    let padded = if r < c {
        let mut p = Mat::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("v requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = Mat::zeros(c, c);
    for (k, &i) in idx.iter().enumerate() {
        v.set_column(k, &vt.row(i).transpose());
    }
    (s, v)
}

fn cutoff(s: &[f64], rel: f64) -> f64 {
    let smax = s.first().copied().unwrap_or(0.0);
    (rel * smax).max(1e-300)
}

pub fn rank(a: &Mat, rel: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let s = a.clone().svd(false, false).singular_values;
    let s: Vec<f64> = s.iter().copied().collect();
    let smax = s.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel * smax).count()
}

/// Orthonormal basis (columns) of the null space.
pub fn null_space(a: &Mat, rel: f64) -> Mat {
    let c = a.ncols();
    if c == 0 {
        return Mat::zeros(0, 0);
    }
    if a.nrows() == 0 {
        return Mat::identity(c, c);
    }
    let (s, v) = svd_full(a);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Mat::identity(c, c);
    }
    let thr = cutoff(&s, rel);
    let r = s.iter().filter(|&&x| x > thr).count();
    v.columns(r, c - r).into_owned()
}

/// Orthonormal basis (columns) of the column space.
pub fn orth(a: &Mat, rel: f64) -> Mat {
    orth_above(a, rel, 0.0)
}

/// Like [`orth`], with singular values at or below `abs` also dropped.
fn orth_above(a: &Mat, rel: f64, abs: f64) -> Mat {
    let n = a.nrows();
    if a.ncols() == 0 || n == 0 {
        return Mat::zeros(n, 0);
    }
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("v requested");
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = s.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Mat::zeros(n, 0);
    }
    let cols: Vec<usize> = (0..s.len()).filter(|&i| s[i] > (rel * smax).max(abs)).collect();
    if cols.is_empty() {
        return Mat::zeros(n, 0);
    }
    // A·v_i lies in span(A) to roundoff even where nalgebra's U drifts on
    // clustered singular values; QR restores orthonormality.
    let mut img = Mat::zeros(n, cols.len());
    for (k, &i) in cols.iter().enumerate() {
        img.set_column(k, &(a * vt.row(i).transpose() / s[i]));
    }
    img.qr().q()
}

pub fn hcat(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.nrows(), b.nrows(), "row mismatch in hcat");
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// Whether span(w) ⊆ span(u).
pub fn contains(u: &Mat, w: &Mat, rel: f64) -> bool {
    if w.ncols() == 0 {
        return true;
    }
    rank(&hcat(u, w), rel) == rank(u, rel)
}

/// Equal dimensions and rank[U|W] = dim U.
pub fn same_subspace(u: &Mat, w: &Mat, rel: f64) -> bool {
    let (ru, rw) = (rank(u, rel), rank(w, rel));
    ru == rw && rank(&hcat(u, w), rel) == ru
}

/// Largest distance of a unit vector of span(w) from span(u); 0 iff contained.
pub fn containment_residual(u: &Mat, w: &Mat, rel: f64) -> f64 {
    if w.ncols() == 0 {
        return 0.0;
    }
    let qu = orth(u, rel);
    let qw = orth(w, rel);
    if qw.ncols() == 0 {
        return 0.0;
    }
    let proj = &qu * (qu.transpose() * &qw);
    (&qw - proj).norm()
}

/// Orthonormal basis of span(k) ∩ span(g)^⊥.
pub fn complement_within(k: &Mat, g: &Mat, rel: f64) -> Mat {
    let qk = orth(k, rel);
    let qg = orth(g, rel);
    if qg.ncols() == 0 {
        return qk;
    }
    let proj = &qk - &qg * (qg.transpose() * &qk);
    // qk is orthonormal, so the residual scale is 1 and the cutoff is absolute.
    orth_above(&proj, rel, rel)
}

/// Basis of span(u) ∩ span(w).
pub fn intersection(u: &Mat, w: &Mat, rel: f64) -> Mat {
    let qu = orth(u, rel);
    let qw = orth(w, rel);
    if qu.ncols() == 0 || qw.ncols() == 0 {
        return Mat::zeros(u.nrows(), 0);
    }
    let stacked = hcat(&qu, &(-&qw));
    let ns = null_space(&stacked, rel);
    let coeffs = ns.rows(0, qu.ncols()).into_owned();
    orth(&(&qu * coeffs), rel)
}

/// Determinant after scaling each row to unit Euclidean norm.
pub fn scaled_det(a: &Mat) -> f64 {
    let mut b = a.clone();
    for mut row in b.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }
    if b.nrows() == 0 {
        return 1.0;
    }
    b.determinant()
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Mat {
    Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_wide_matrix() {
        let a = Mat::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = null_space(&a, 1e-10);
        assert_eq!(k.ncols(), 2);
        assert!(max_abs(&(&a * &k)) < 1e-14);
        assert!(max_abs(&(k.transpose() * &k - Mat::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn complement_and_intersection() {
        let k = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let g = Mat::from_row_slice(3, 1, &[1.0, 1.0, 0.0]);
        let q = complement_within(&k, &g, 1e-10);
        assert_eq!(q.ncols(), 1);
        assert!((q[(0, 0)] + q[(1, 0)]).abs() < 1e-14);
        let w = Mat::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let i = intersection(&k, &w, 1e-10);
        assert_eq!(i.ncols(), 1);
        assert!(same_subspace(&i, &Mat::from_row_slice(3, 1, &[0.0, 1.0, 0.0]), 1e-10));
    }

    #[test]
    fn complement_of_orthonormal_block_is_orthogonal() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let k = orth(&Mat::from_fn(8, 6, |_, _| rng.gen_range(-1.0..1.0)), 1e-10);
            let g = orth(&(&k * Mat::from_fn(6, 2, |_, _| rng.gen_range(-1.0..1.0))), 1e-10);
            let q = complement_within(&k, &g, 1e-10);
            assert_eq!(q.ncols(), 4);
            assert!(max_abs(&(q.transpose() * &g)) < 1e-13);
            assert!(containment_residual(&k, &q, 1e-10) < 1e-13);
        }
        // Equal subspaces leave nothing, not roundoff directions.
        let k = orth(&Mat::from_fn(5, 3, |i, j| ((i + 2 * j) % 4) as f64 - 1.5), 1e-10);
        assert_eq!(complement_within(&k, &k, 1e-10).ncols(), 0);
    }

    #[test]
    fn containment() {
        let u = Mat::identity(3, 2);
        let w = Mat::from_row_slice(3, 1, &[2.0, -1.0, 0.0]);
        assert!(contains(&u, &w, 1e-10));
        assert!(containment_residual(&u, &w, 1e-10) < 1e-14);
        let w2 = Mat::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
        assert!(!contains(&u, &w2, 1e-10));
    }
}
