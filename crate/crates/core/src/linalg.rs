//! Dense complex linear algebra.
//!
//! [`ComplexMatrix`] wraps a dynamically sized `nalgebra` matrix. The block
//! constructions (Kronecker product, direct sum, partial transpose,
//! permutations) are implemented directly; the dense SVD kernel is
//! `nalgebra`'s, wrapped so that zero rows and columns never reach it and so
//! that both factors always come back square and unitary.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest side length any constructed matrix axis may have.
pub const DEFAULT_AXIS_CAP: usize = 1 << 20;

pub const UNITARY_TOL: f64 = 1e-10;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix entry".into()));
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, entries)))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { ZERO })
    }

    pub fn scalar(z: C64) -> Self {
        Self::diagonal(&[z])
    }

    /// Outer product `|u><v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn from_inner(m: DMatrix<C64>) -> Self {
        Self(m)
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        self.0.column(j).iter().copied().collect()
    }

    pub fn row(&self, i: usize) -> Vec<C64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn mat_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols(), "mat_vec dimension mismatch");
        (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.0[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Sub-block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self(self.0.view((r0, c0), (rows, cols)).into_owned())
    }

    /// `max |(M*M - I)_{ij}|`; zero for an exactly unitary matrix.
    pub fn unitarity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let gram = self.0.adjoint() * &self.0;
        (gram - DMatrix::<C64>::identity(n, n))
            .iter()
            .fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() < tol
    }

    pub fn ensure_unitary(&self, tol: f64) -> Result<()> {
        let deviation = self.unitarity_deviation();
        if deviation < tol {
            Ok(())
        } else {
            Err(Error::NotUnitary { deviation })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Determinant via LU.
    pub fn determinant(&self) -> C64 {
        self.0.clone().determinant()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.0[idx]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            write!(f, "  ")?;
            for j in 0..self.cols() {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

fn check_cap(requested: usize, cap: usize) -> Result<()> {
    if requested > cap {
        Err(Error::DimensionCap { requested, cap })
    } else {
        Ok(())
    }
}

fn checked_product(a: usize, b: usize, cap: usize) -> Result<usize> {
    let requested = a.checked_mul(b).unwrap_or(usize::MAX);
    check_cap(requested, cap)?;
    Ok(requested)
}

/// Kronecker product with the default axis cap.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    tensor_with_cap(a, b, DEFAULT_AXIS_CAP)
}

/// Kronecker product: entry `(i1*rows_b + i2, j1*cols_b + j2)` is `a[i1,j1]*b[i2,j2]`.
pub fn tensor_with_cap(a: &ComplexMatrix, b: &ComplexMatrix, cap: usize) -> Result<ComplexMatrix> {
    checked_product(a.rows(), b.rows(), cap)?;
    checked_product(a.cols(), b.cols(), cap)?;
    Ok(ComplexMatrix(a.0.kronecker(&b.0)))
}

/// `a ⊗ a ⊗ ... ⊗ a` (`power` factors); the empty product is `[1]`.
pub fn tensor_power(a: &ComplexMatrix, power: usize) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::identity(1);
    for _ in 0..power {
        out = tensor(&out, a)?;
    }
    Ok(out)
}

pub fn direct_sum(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    direct_sum_with_cap(a, b, DEFAULT_AXIS_CAP)
}

pub fn direct_sum_with_cap(a: &ComplexMatrix, b: &ComplexMatrix, cap: usize) -> Result<ComplexMatrix> {
    let rows = a.rows() + b.rows();
    let cols = a.cols() + b.cols();
    check_cap(rows, cap)?;
    check_cap(cols, cap)?;
    let mut out = DMatrix::zeros(rows, cols);
    out.view_mut((0, 0), (a.rows(), a.cols())).copy_from(&a.0);
    out.view_mut((a.rows(), a.cols()), (b.rows(), b.cols()))
        .copy_from(&b.0);
    Ok(ComplexMatrix(out))
}

/// `A = left · diag(singulars) · right`, both factors unitary.
///
/// `singulars` has `min(rows, cols)` entries in descending order; `left` is
/// `rows x rows` and `right` is `cols x cols`.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub left: ComplexMatrix,
    pub singulars: Vec<f64>,
    pub right: ComplexMatrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let (p, q) = (self.left.rows(), self.right.cols());
        let mut out = DMatrix::<C64>::zeros(p, q);
        for (k, &s) in self.singulars.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let u = self.left.0.column(k);
            let v = self.right.0.row(k);
            out += (u * v) * C64::new(s, 0.0);
        }
        ComplexMatrix(out)
    }

    pub fn trace_norm(&self) -> f64 {
        self.singulars.iter().sum()
    }

    /// Number of singular values above `tol * max(1, largest)`.
    pub fn rank(&self, tol: f64) -> usize {
        let top = self.singulars.first().copied().unwrap_or(0.0).max(1.0);
        self.singulars.iter().filter(|&&s| s > tol * top).count()
    }
}

/// Singular value decomposition in the `A = U·D·V` convention.
///
/// Rows and columns that are identically zero are split off before the dense
/// kernel runs, so structured sparse operators (the usual case for the
/// A-matrices of this crate) decompose in time proportional to their support.
pub fn svd(a: &ComplexMatrix) -> Result<SvdFactors> {
    let (p, q) = (a.rows(), a.cols());
    let support_rows: Vec<usize> = (0..p)
        .filter(|&i| (0..q).any(|j| a[(i, j)] != ZERO))
        .collect();
    let support_cols: Vec<usize> = (0..q)
        .filter(|&j| (0..p).any(|i| a[(i, j)] != ZERO))
        .collect();
    let min_side = p.min(q);

    if support_rows.is_empty() {
        return Ok(SvdFactors {
            left: ComplexMatrix::identity(p),
            singulars: vec![0.0; min_side],
            right: ComplexMatrix::identity(q),
        });
    }

    let (r, c) = (support_rows.len(), support_cols.len());
    let sub = DMatrix::from_fn(r, c, |i, j| a[(support_rows[i], support_cols[j])]);
    let (u_sub, s_sub, vt_sub) = dense_svd(sub)?;

    // Complete the thin factors on the support, then pad with the standard
    // basis vectors of the zero rows/columns.
    let u_full = complete_columns(&u_sub);
    let v_full_adj = complete_columns(&vt_sub.adjoint());

    let mut left = DMatrix::<C64>::zeros(p, p);
    for (local, &global) in support_rows.iter().enumerate() {
        for j in 0..r {
            left[(global, j)] = u_full[(local, j)];
        }
    }
    let mut next = r;
    for i in 0..p {
        if support_rows.binary_search(&i).is_err() {
            left[(i, next)] = ONE;
            next += 1;
        }
    }

    let mut right = DMatrix::<C64>::zeros(q, q);
    for (local, &global) in support_cols.iter().enumerate() {
        for k in 0..c {
            right[(k, global)] = v_full_adj[(local, k)].conj();
        }
    }
    let mut next = c;
    for j in 0..q {
        if support_cols.binary_search(&j).is_err() {
            right[(next, j)] = ONE;
            next += 1;
        }
    }

    let mut singulars = vec![0.0; min_side];
    singulars[..s_sub.len()].copy_from_slice(&s_sub);

    Ok(SvdFactors {
        left: ComplexMatrix(left),
        singulars,
        right: ComplexMatrix(right),
    })
}

/// Thin SVD sorted by descending singular value.
fn dense_svd(m: DMatrix<C64>) -> Result<(DMatrix<C64>, Vec<f64>, DMatrix<C64>)> {
    let (rows, cols) = m.shape();
    let svd = nalgebra::SVD::try_new(m, true, true, 5.0 * f64::EPSILON, 0)
        .ok_or(Error::SvdNonConvergence { rows, cols })?;
    let u = svd.u.ok_or(Error::SvdNonConvergence { rows, cols })?;
    let vt = svd.v_t.ok_or(Error::SvdNonConvergence { rows, cols })?;
    let s = svd.singular_values;

    let k = s.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]).then(x.cmp(&y)));
    let u_sorted = DMatrix::from_fn(u.nrows(), k, |i, j| u[(i, order[j])]);
    let vt_sorted = DMatrix::from_fn(k, vt.ncols(), |i, j| vt[(order[i], j)]);
    let s_sorted = order.iter().map(|&i| s[i].max(0.0)).collect();
    Ok((u_sorted, s_sorted, vt_sorted))
}

/// Extends orthonormal columns `q` (n x k) to an n x n unitary.
///
/// Each new column is seeded from the standard basis vector that the current
/// span covers least, which keeps the Gram–Schmidt step well conditioned.
fn complete_columns(q: &DMatrix<C64>) -> DMatrix<C64> {
    let (n, k) = q.shape();
    let mut out = DMatrix::<C64>::zeros(n, n);
    out.view_mut((0, 0), (n, k)).copy_from(q);
    let mut covered: Vec<f64> = (0..n)
        .map(|i| (0..k).map(|j| q[(i, j)].norm_sqr()).sum())
        .collect();

    for col in k..n {
        let seed = (0..n)
            .min_by(|&a, &b| covered[a].total_cmp(&covered[b]))
            .expect("non-empty");
        let mut v = vec![ZERO; n];
        v[seed] = ONE;
        for _ in 0..2 {
            for j in 0..col {
                let overlap: C64 = (0..n).map(|i| out[(i, j)].conj() * v[i]).sum();
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi -= out[(i, j)] * overlap;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for (i, vi) in v.iter().enumerate() {
            let z = vi / norm;
            out[(i, col)] = z;
            covered[i] += z.norm_sqr();
        }
    }
    out
}

/// Sum of singular values.
pub fn trace_norm(a: &ComplexMatrix) -> Result<f64> {
    Ok(svd(a)?.trace_norm())
}

/// Which tensor factor of `V ⊗ W` a partial transpose acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    First,
    Second,
}

/// Partial transpose of a square operator on `V ⊗ W`.
///
/// Viewing `x` as a `dim_v x dim_v` grid of `dim_w x dim_w` blocks, transposing
/// `W` transposes every block in place and transposing `V` transposes the grid
/// of blocks while leaving each block intact.
pub fn partial_transpose(
    x: &ComplexMatrix,
    dim_v: usize,
    dim_w: usize,
    which: Factor,
) -> Result<ComplexMatrix> {
    let side = dim_v
        .checked_mul(dim_w)
        .ok_or_else(|| Error::Shape("partial transpose dimensions overflow".into()))?;
    if !x.is_square() || x.rows() != side {
        return Err(Error::Shape(format!(
            "partial transpose expects side {dim_v}*{dim_w} = {side}, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    Ok(ComplexMatrix::from_fn(side, side, |row, col| {
        let (bi, a) = (row / dim_w, row % dim_w);
        let (bj, b) = (col / dim_w, col % dim_w);
        match which {
            Factor::Second => x[(bi * dim_w + b, bj * dim_w + a)],
            Factor::First => x[(bj * dim_w + a, bi * dim_w + b)],
        }
    }))
}

/// Permutation matrix `P` with `P e_j = e_{perm[j]}`.
pub fn permutation_matrix(perm: &[usize], n: usize) -> Result<ComplexMatrix> {
    check_permutation(perm, n)?;
    let mut p = ComplexMatrix::zeros(n, n);
    for (j, &i) in perm.iter().enumerate() {
        p[(i, j)] = ONE;
    }
    Ok(p)
}

pub fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidArgument(format!(
            "permutation has {} entries, expected {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &i in perm {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidArgument(format!(
                "index map is not a bijection on 0..{n}"
            )));
        }
    }
    Ok(())
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (j, &i) in perm.iter().enumerate() {
        inv[i] = j;
    }
    inv
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `<u|v>` (conjugate-linear in `u`).
pub fn inner_product(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn kron_vec(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter()
        .flat_map(|&a| v.iter().map(move |&b| a * b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_unitary(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
        let m = random_matrix(rng, n, n);
        let qr = m.into_inner().qr();
        ComplexMatrix::from_inner(qr.q())
    }

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        a.rows() == b.rows() && a.cols() == b.cols() && a.sub(b).max_abs() < tol
    }

    #[test]
    fn tensor_identity_and_scalar() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(tensor(&i2, &i2).unwrap(), ComplexMatrix::identity(4));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_matrix(&mut rng, 3, 2);
        let two = ComplexMatrix::scalar(c(2.0, 0.0));
        assert_eq!(tensor(&two, &b).unwrap(), b.scale(c(2.0, 0.0)));
    }

    #[test]
    fn tensor_x_z_blocks() {
        let x = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let z = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let expected = ComplexMatrix::from_real_rows(&[
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, -1.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, -1.0, 0.0, 0.0],
        ]);
        assert_eq!(tensor(&x, &z).unwrap(), expected);
    }

    #[test]
    fn tensor_respects_cap() {
        let a = ComplexMatrix::identity(8);
        let err = tensor_with_cap(&a, &a, 32).unwrap_err();
        assert!(matches!(err, Error::DimensionCap { requested: 64, cap: 32 }));
    }

    #[test]
    fn direct_sum_examples() {
        let one = ComplexMatrix::scalar(ONE);
        assert_eq!(direct_sum(&one, &one).unwrap(), ComplexMatrix::identity(2));
        let s = direct_sum(
            &ComplexMatrix::scalar(c(2.0, 0.0)),
            &ComplexMatrix::scalar(c(3.0, 0.0)),
        )
        .unwrap();
        assert_eq!(s, ComplexMatrix::diagonal(&[c(2.0, 0.0), c(3.0, 0.0)]));

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_unitary(&mut rng, 3);
        let h = random_unitary(&mut rng, 2);
        assert!(direct_sum(&g, &h).unwrap().is_unitary(UNITARY_TOL));
        assert!(direct_sum_with_cap(&g, &h, 4).is_err());
    }

    #[test]
    fn tensor_and_direct_sum_are_associative() {
        // Gaussian-integer entries keep every product exact.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut gaussian = |r, c| {
            ComplexMatrix::from_fn(r, c, |_, _| {
                C64::new(rng.random_range(-4..5) as f64, rng.random_range(-4..5) as f64)
            })
        };
        let a = gaussian(2, 3);
        let b = gaussian(2, 2);
        let cm = gaussian(3, 1);
        let left = tensor(&tensor(&a, &b).unwrap(), &cm).unwrap();
        let right = tensor(&a, &tensor(&b, &cm).unwrap()).unwrap();
        assert_eq!(left, right);
        let left = direct_sum(&direct_sum(&a, &b).unwrap(), &cm).unwrap();
        let right = direct_sum(&a, &direct_sum(&b, &cm).unwrap()).unwrap();
        assert_eq!(left, right);
    }

    #[test]
    fn svd_of_identity_and_unit_entry() {
        let s = svd(&ComplexMatrix::identity(3)).unwrap();
        assert_eq!(s.singulars, vec![1.0, 1.0, 1.0]);

        let mut e12 = ComplexMatrix::zeros(2, 2);
        e12[(0, 1)] = ONE;
        let s = svd(&e12).unwrap();
        assert!((s.singulars[0] - 1.0).abs() < 1e-15);
        assert_eq!(s.singulars[1], 0.0);
        assert!(s.left.is_unitary(UNITARY_TOL));
        assert!(s.right.is_unitary(UNITARY_TOL));
        assert!(close(&s.reconstruct(), &e12, 1e-14));
    }

    #[test]
    fn svd_recovers_planted_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let u = random_unitary(&mut rng, 4);
            let v = random_unitary(&mut rng, 4);
            let d = ComplexMatrix::diagonal(&[c(3.0, 0.0), c(2.0, 0.0), c(1.0, 0.0), c(0.5, 0.0)]);
            let a = &(&u * &d) * &v;
            let s = svd(&a).unwrap();
            for (got, want) in s.singulars.iter().zip([3.0, 2.0, 1.0, 0.5]) {
                assert!((got - want).abs() < 1e-9, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn svd_of_zero_matrix() {
        let s = svd(&ComplexMatrix::zeros(3, 2)).unwrap();
        assert_eq!(s.singulars, vec![0.0, 0.0]);
        assert!(s.left.is_unitary(UNITARY_TOL) && s.right.is_unitary(UNITARY_TOL));
    }

    #[test]
    fn svd_handles_sparse_support_at_large_side() {
        // A 4096-side operator with a dense 6x5 patch scattered over it.
        let n = 4096;
        let rows = [3, 17, 900, 2048, 3000, 4095];
        let cols = [0, 5, 1234, 2222, 4000];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = ComplexMatrix::zeros(n, n);
        for &i in &rows {
            for &j in &cols {
                a[(i, j)] = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        let s = svd(&a).unwrap();
        let rel = s.reconstruct().sub(&a).frobenius_norm() / a.frobenius_norm();
        assert!(rel < 1e-10, "relative error {rel}");
        assert_eq!(s.rank(1e-12), 5);
        // Unitarity of the padded factors, checked on a sample of columns.
        for &j in &[0usize, 4, 5, 6, 100, 4095] {
            let col = s.left.column(j);
            assert!((vec_norm(&col) - 1.0).abs() < 1e-12);
            let other = s.left.column(1);
            if j != 1 {
                assert!(inner_product(&other, &col).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn svd_of_structured_low_rank_block() {
        // Rank 2 with exact zeros and repeated magnitudes inside an 8x8
        // window of a 225-side matrix; an under-converged kernel misses this.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u1 = [c(h, 0.0), ZERO, ZERO, c(-h, 0.0), ZERO, ZERO, ZERO, ZERO];
        let v1 = [ZERO, c(0.0, h), c(h, 0.0), ZERO, ZERO, ZERO, ZERO, ZERO];
        let u2 = [ZERO, c(0.5, 0.0), c(0.5, 0.0), ZERO, c(0.5, 0.0), c(-0.5, 0.0), ZERO, ZERO];
        let v2 = [ZERO, ZERO, ZERO, c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.5), c(-0.5, 0.0), ZERO];
        let (s1, s2) = (2.0f64.sqrt() / 3.0f64.sqrt(), 1.0 / 3.0f64.sqrt());
        let mut a = ComplexMatrix::zeros(225, 225);
        for i in 0..8 {
            for j in 0..8 {
                a[(49 + i, 49 + j)] = u1[i] * v1[j] * s1 + u2[i] * v2[j] * s2;
            }
        }
        let s = svd(&a).unwrap();
        assert!(s.reconstruct().sub(&a).max_abs() < 1e-12);
        assert!((s.singulars[0] - s1).abs() < 1e-12);
        assert!((s.singulars[1] - s2).abs() < 1e-12);
        assert!((s.trace_norm() - s1 - s2).abs() < 1e-12);
    }

    #[test]
    fn svd_rectangular_factors_are_square_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (p, q) in [(7, 3), (3, 7), (5, 5)] {
            let a = random_matrix(&mut rng, p, q);
            let s = svd(&a).unwrap();
            assert_eq!(s.left.rows(), p);
            assert_eq!(s.right.rows(), q);
            assert_eq!(s.singulars.len(), p.min(q));
            assert!(s.left.is_unitary(UNITARY_TOL));
            assert!(s.right.is_unitary(UNITARY_TOL));
            assert!(s.singulars.windows(2).all(|w| w[0] >= w[1]));
            let rel = s.reconstruct().sub(&a).frobenius_norm() / a.frobenius_norm();
            assert!(rel < 1e-10);
        }
    }

    #[test]
    fn trace_norm_examples() {
        let mut e = ComplexMatrix::zeros(3, 3);
        e[(2, 0)] = ONE;
        assert!((trace_norm(&e).unwrap() - 1.0).abs() < 1e-14);
        assert!((trace_norm(&ComplexMatrix::identity(5)).unwrap() - 5.0).abs() < 1e-13);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_matrix(&mut rng, 4, 4);
        let u = random_unitary(&mut rng, 4);
        let v = random_unitary(&mut rng, 4);
        let uxv = &(&u * &x) * &v;
        assert!((trace_norm(&uxv).unwrap() - trace_norm(&x).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn trace_norm_is_additive_and_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_matrix(&mut rng, 3, 3);
        let b = random_matrix(&mut rng, 2, 2);
        let (ta, tb) = (trace_norm(&a).unwrap(), trace_norm(&b).unwrap());
        let sum = trace_norm(&direct_sum(&a, &b).unwrap()).unwrap();
        let prod = trace_norm(&tensor(&a, &b).unwrap()).unwrap();
        assert!((sum - (ta + tb)).abs() < 1e-10);
        assert!((prod - ta * tb).abs() < 1e-10);
    }

    #[test]
    fn partial_transpose_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_matrix(&mut rng, 3, 3);
        let b = random_matrix(&mut rng, 2, 2);
        let ab = tensor(&a, &b).unwrap();
        let on_w = partial_transpose(&ab, 3, 2, Factor::Second).unwrap();
        assert!(close(&on_w, &tensor(&a, &b.transpose()).unwrap(), 1e-15));
        let on_v = partial_transpose(&ab, 3, 2, Factor::First).unwrap();
        assert!(close(&on_v, &tensor(&a.transpose(), &b).unwrap(), 1e-15));
    }

    #[test]
    fn partial_transpose_rejects_bad_side() {
        let x = ComplexMatrix::identity(6);
        assert!(partial_transpose(&x, 4, 2, Factor::Second).is_err());
        assert!(partial_transpose(&ComplexMatrix::zeros(6, 5), 3, 2, Factor::Second).is_err());
    }

    #[test]
    fn permutation_matrix_examples() {
        assert_eq!(permutation_matrix(&[0, 1, 2], 3).unwrap(), ComplexMatrix::identity(3));
        let x = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(permutation_matrix(&[1, 0], 2).unwrap(), x);

        let perm = [2, 0, 3, 1];
        let p = permutation_matrix(&perm, 4).unwrap();
        let pinv = permutation_matrix(&inverse_permutation(&perm), 4).unwrap();
        assert_eq!(&p * &pinv, ComplexMatrix::identity(4));

        assert!(permutation_matrix(&[0, 0], 2).is_err());
        assert!(permutation_matrix(&[0, 2], 2).is_err());
        assert!(permutation_matrix(&[0], 2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn partial_transpose_is_an_involution(seed in any::<u64>(), dv in 1usize..4, dw in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_matrix(&mut rng, dv * dw, dv * dw);
            for which in [Factor::First, Factor::Second] {
                let twice = partial_transpose(&partial_transpose(&x, dv, dw, which).unwrap(), dv, dw, which).unwrap();
                prop_assert_eq!(&twice, &x);
            }
        }

        #[test]
        fn partial_transpose_exposes_transposed_leading_block(
            seed in any::<u64>(), dv in 1usize..4, dw in 1usize..5, c_frac in 0.0f64..1.0,
        ) {
            // C ⊕ D on V ⊗ W with dim C ≤ dim W: transposing W leaves Cᵀ in
            // the leading corner.
            let c = 1 + ((dw as f64) * c_frac) as usize % dw;
            let n = dv * dw;
            prop_assume!(c < n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cm = random_matrix(&mut rng, c, c);
            let dm = random_matrix(&mut rng, n - c, n - c);
            let x = direct_sum(&cm, &dm).unwrap();
            let pt = partial_transpose(&x, dv, dw, Factor::Second).unwrap();
            let corner = ComplexMatrix::from_fn(c, c, |i, j| pt[(i, j)]);
            prop_assert_eq!(corner, cm.transpose());
        }

        #[test]
        fn svd_reconstructs(seed in any::<u64>(), p in 1usize..9, q in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, p, q);
            let s = svd(&a).unwrap();
            let rel = s.reconstruct().sub(&a).frobenius_norm() / a.frobenius_norm();
            prop_assert!(rel < 1e-10);
            prop_assert!(s.left.is_unitary(UNITARY_TOL));
            prop_assert!(s.right.is_unitary(UNITARY_TOL));
        }
    }
}
