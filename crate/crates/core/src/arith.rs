//! Exact field scalars, dense matrices and Hermitian coordinates.

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Num;

use crate::error::{Error, Result};

/// Scalar field the linear algebra runs over.
///
/// Every routine here tests entries against zero exactly, so the results are
/// only meaningful for exact types such as [`BigRational`].
pub trait Field: Clone + PartialEq + Debug + Num + Neg<Output = Self> + Send + Sync {}

impl<T> Field for T where T: Clone + PartialEq + Debug + Num + Neg<Output = Self> + Send + Sync {}

pub fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn frac(n: i64, d: i64) -> Result<BigRational> {
    if d == 0 {
        return Err(Error::DivisionByZero);
    }
    Ok(BigRational::new(BigInt::from(n), BigInt::from(d)))
}

pub fn checked_div<T: Field>(a: &T, b: &T) -> Result<T> {
    if b.is_zero() {
        return Err(Error::DivisionByZero);
    }
    Ok(a.clone() / b.clone())
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Reduced row-echelon form and the pivot column of each nonzero row.
#[derive(Clone, Debug, PartialEq)]
pub struct Echelon<T> {
    pub reduced: Matrix<T>,
    pub pivots: Vec<usize>,
}

impl<T: Field> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from rows of equal length. `cols` fixes the width when
    /// there are no rows.
    pub fn from_rows(cols: usize, rows: Vec<Vec<T>>) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        let n = rows.len();
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != cols {
                return Err(Error::structure(format!("row {i} has {} entries, expected {cols}", row.len())));
            }
            data.extend(row);
        }
        Ok(Matrix { rows: n, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).clone())
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|r| (r + 1..self.cols).all(|c| self.get(r, c) == self.get(c, r)))
    }

    pub fn is_antisymmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|r| self.get(r, r).is_zero() && (r + 1..self.cols).all(|c| *self.get(r, c) == -self.get(c, r).clone()))
    }

    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::structure(format!("vector length {} does not match {} columns", v.len(), self.cols)));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.row(r).iter().zip(v).fold(
                    T::zero(),
                    |acc, (a, b)| {
                        if a.is_zero() || b.is_zero() {
                            acc
                        } else {
                            acc + a.clone() * b.clone()
                        }
                    },
                )
            })
            .collect())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::structure(format!("cannot multiply {}x{} by {}x{}", self.rows, self.cols, other.rows, other.cols)));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let b = other.get(k, c);
                    if !b.is_zero() {
                        let v = out.get(r, c).clone() + a.clone() * b.clone();
                        out.set(r, c, v);
                    }
                }
            }
        }
        Ok(out)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&T, &T) -> T) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::structure(format!("shape mismatch {}x{} vs {}x{}", self.rows, self.cols, other.rows, other.cols)));
        }
        Ok(Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect() })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.clone() + b.clone())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.clone() - b.clone())
    }

    /// Kronecker product, `self` on the slow index.
    pub fn kron(&self, other: &Self) -> Self {
        Self::from_fn(self.rows * other.rows, self.cols * other.cols, |r, c| {
            let a = self.get(r / other.rows, c / other.cols);
            if a.is_zero() {
                return T::zero();
            }
            a.clone() * other.get(r % other.rows, c % other.cols).clone()
        })
    }

    pub fn is_projector(&self) -> bool {
        self.is_square() && self.mul(self).map(|sq| sq == *self).unwrap_or(false)
    }

    /// Gauss-Jordan elimination with leftmost pivots.
    pub fn rref(&self) -> Echelon<T> {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut lead = 0;
        for c in 0..m.cols {
            if lead == m.rows {
                break;
            }
            let Some(p) = (lead..m.rows).find(|&r| !m.get(r, c).is_zero()) else {
                continue;
            };
            m.swap_rows(lead, p);
            let inv = T::one() / m.get(lead, c).clone();
            if !inv.is_one() {
                for k in c..m.cols {
                    let v = m.get(lead, k).clone();
                    if !v.is_zero() {
                        m.set(lead, k, v * inv.clone());
                    }
                }
            }
            let pivot_row: Vec<(usize, T)> =
                (c..m.cols).filter(|&k| !m.get(lead, k).is_zero()).map(|k| (k, m.get(lead, k).clone())).collect();
            for r in 0..m.rows {
                if r == lead {
                    continue;
                }
                let f = m.get(r, c).clone();
                if f.is_zero() {
                    continue;
                }
                for (k, pv) in &pivot_row {
                    let v = m.get(r, *k).clone() - f.clone() * pv.clone();
                    m.set(r, *k, v);
                }
            }
            pivots.push(c);
            lead += 1;
        }
        Echelon { reduced: m, pivots }
    }

    pub fn rank(&self) -> usize {
        self.rref().pivots.len()
    }

    /// Canonical nullspace basis: one vector per free column in ascending
    /// order, with a 1 in that column and zeros in the other free columns.
    pub fn nullspace(&self) -> Vec<Vec<T>> {
        let Echelon { reduced, pivots } = self.rref();
        let mut is_pivot = vec![false; self.cols];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        (0..self.cols)
            .filter(|&f| !is_pivot[f])
            .map(|f| {
                let mut v = vec![T::zero(); self.cols];
                v[f] = T::one();
                for (r, &p) in pivots.iter().enumerate() {
                    let e = reduced.get(r, f);
                    if !e.is_zero() {
                        v[p] = -e.clone();
                    }
                }
                v
            })
            .collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for c in 0..self.cols {
                self.data.swap(a * self.cols + c, b * self.cols + c);
            }
        }
    }
}

/// Real coordinates of an n×n Hermitian matrix: the n diagonal entries, then
/// the real parts of the strictly upper entries in row-major order, then
/// their imaginary parts.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HermitianParam<T> {
    pub dim: usize,
    pub coords: Vec<T>,
}

pub fn hermitian_len(n: usize) -> usize {
    n * n
}

pub fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// Position of the real part of entry (i, j), i ≠ j, in the coordinate vector.
pub fn re_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    n + pair_rank(n, i, j)
}

/// Position of the imaginary part of entry (i, j), i ≠ j.
pub fn im_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    n + n * (n - 1) / 2 + pair_rank(n, i, j)
}

fn pair_rank(n: usize, i: usize, j: usize) -> usize {
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl<T: Field> HermitianParam<T> {
    pub fn new(dim: usize, coords: Vec<T>) -> Result<Self> {
        if coords.len() != hermitian_len(dim) {
            return Err(Error::structure(format!("dimension {dim} needs {} coordinates, got {}", hermitian_len(dim), coords.len())));
        }
        Ok(HermitianParam { dim, coords })
    }

    pub fn identity(dim: usize) -> Self {
        let mut coords = vec![T::zero(); hermitian_len(dim)];
        for c in coords.iter_mut().take(dim) {
            *c = T::one();
        }
        HermitianParam { dim, coords }
    }

    /// Inverse of [`hermitian_from_coords`].
    pub fn from_parts(re: &Matrix<T>, im: &Matrix<T>) -> Result<Self> {
        let n = re.rows();
        if !re.is_symmetric() || !im.is_antisymmetric() || im.rows() != n {
            return Err(Error::structure("not a Hermitian (symmetric, antisymmetric) pair"));
        }
        let mut coords = vec![T::zero(); hermitian_len(n)];
        for i in 0..n {
            coords[i] = re.get(i, i).clone();
        }
        for (i, j) in upper_pairs(n) {
            coords[re_index(n, i, j)] = re.get(i, j).clone();
            coords[im_index(n, i, j)] = im.get(i, j).clone();
        }
        Ok(HermitianParam { dim: n, coords })
    }
}

/// Reconstructs (real part, imaginary part) of the Hermitian matrix.
pub fn hermitian_from_coords<T: Field>(p: &HermitianParam<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    let n = p.dim;
    if p.coords.len() != hermitian_len(n) {
        return Err(Error::structure(format!("dimension {n} needs {} coordinates, got {}", hermitian_len(n), p.coords.len())));
    }
    let mut re = Matrix::zeros(n, n);
    let mut im = Matrix::zeros(n, n);
    for i in 0..n {
        re.set(i, i, p.coords[i].clone());
    }
    for (i, j) in upper_pairs(n) {
        let x = p.coords[re_index(n, i, j)].clone();
        let y = p.coords[im_index(n, i, j)].clone();
        re.set(i, j, x.clone());
        re.set(j, i, x);
        im.set(i, j, y.clone());
        im.set(j, i, -y);
    }
    Ok((re, im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;
    use proptest::prelude::*;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        frac(n, d).unwrap()
    }

    fn mat(rows: &[&[i64]]) -> Matrix<Q> {
        let cols = rows.first().map_or(0, |r| r.len());
        Matrix::from_rows(cols, rows.iter().map(|r| r.iter().map(|&v| int(v)).collect()).collect()).unwrap()
    }

    #[test]
    fn fraction_arithmetic() {
        assert_eq!(q(1, 2) + q(1, 3), q(5, 6));
        assert_eq!(q(2, 4), q(1, 2));
        let x = q(-3, -6);
        assert_eq!(x, q(1, 2));
        assert_eq!(x.denom(), &BigInt::from(2));
        assert_eq!(frac(1, 0), Err(Error::DivisionByZero));
        assert_eq!(checked_div(&q(1, 2), &Q::zero()), Err(Error::DivisionByZero));
        assert_eq!(checked_div(&q(1, 2), &q(1, 4)), Ok(int(2)));
    }

    #[test]
    fn nullspace_of_zero_matrix_is_standard_basis() {
        let m = Matrix::<Q>::zeros(2, 3);
        let ns = m.nullspace();
        assert_eq!(ns, vec![vec![int(1), int(0), int(0)], vec![int(0), int(1), int(0)], vec![int(0), int(0), int(1)]]);
    }

    #[test]
    fn nullspace_single_constraint() {
        let ns = mat(&[&[1, -1]]).nullspace();
        assert_eq!(ns, vec![vec![int(1), int(1)]]);
    }

    #[test]
    fn nullspace_canonical_form() {
        let m = mat(&[&[0, 2, 4, 2], &[0, 1, 2, 3]]);
        assert_eq!(m.rank(), 2);
        let ns = m.nullspace();
        assert_eq!(ns, vec![vec![int(1), int(0), int(0), int(0)], vec![int(0), int(-2), int(1), int(0)]]);
    }

    #[test]
    fn rref_pivots_leftmost() {
        let e = mat(&[&[2, 4], &[1, 3]]).rref();
        assert_eq!(e.pivots, vec![0, 1]);
        assert_eq!(e.reduced, Matrix::identity(2));
    }

    #[test]
    fn kron_and_projector() {
        let p = mat(&[&[1, 0], &[0, 0]]);
        assert!(p.is_projector());
        let k = p.kron(&Matrix::identity(2));
        assert!(k.is_projector());
        assert_eq!(*k.get(1, 1), int(1));
        assert_eq!(*k.get(2, 2), int(0));
        assert!(!mat(&[&[1, 1], &[0, 1]]).is_projector());
    }

    #[test]
    fn hermitian_identity_and_zero() {
        let (re, im) = hermitian_from_coords(&HermitianParam::<Q>::identity(2)).unwrap();
        assert_eq!(re, Matrix::identity(2));
        assert!(im.is_zero());
        let z = HermitianParam::new(3, vec![Q::zero(); 9]).unwrap();
        let (re, im) = hermitian_from_coords(&z).unwrap();
        assert!(re.is_zero() && im.is_zero());
    }

    #[test]
    fn hermitian_single_imaginary_coord() {
        let mut c = vec![Q::zero(); 9];
        c[im_index(3, 0, 2)] = int(5);
        let (re, im) = hermitian_from_coords(&HermitianParam::new(3, c).unwrap()).unwrap();
        assert!(re.is_zero());
        assert!(im.is_antisymmetric());
        let nonzero = (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).filter(|&(r, c)| !im.get(r, c).is_zero()).count();
        assert_eq!(nonzero, 2);
        assert_eq!(*im.get(0, 2), int(5));
        assert_eq!(*im.get(2, 0), int(-5));
    }

    #[test]
    fn hermitian_length_mismatch() {
        assert!(HermitianParam::new(3, vec![Q::zero(); 8]).is_err());
        let bad = HermitianParam { dim: 2, coords: vec![Q::zero(); 3] };
        assert!(hermitian_from_coords(&bad).is_err());
    }

    #[test]
    fn coordinate_layout() {
        assert_eq!(upper_pairs(3), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(re_index(3, 0, 1), 3);
        assert_eq!(re_index(3, 2, 1), 5);
        assert_eq!(im_index(3, 0, 1), 6);
        assert_eq!(im_index(4, 2, 3), 4 + 6 + 5);
    }

    #[test]
    fn works_over_f64() {
        let m = Matrix::from_rows(2, vec![vec![1.0, -1.0]]).unwrap();
        assert_eq!(m.nullspace(), vec![vec![1.0, 1.0]]);
    }

    fn small_matrix() -> impl Strategy<Value = Matrix<Q>> {
        (1usize..5, 1usize..6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-3i64..4, r * c).prop_map(move |v| {
                Matrix::from_fn(r, c, |i, j| {
                    let x = v[i * c + j];
                    // sparse-ish integer entries, occasionally halves
                    if x == 3 {
                        q(1, 2)
                    } else {
                        int(x)
                    }
                })
            })
        })
    }

    proptest! {
        #[test]
        fn nullspace_vectors_are_annihilated(m in small_matrix()) {
            for v in m.nullspace() {
                prop_assert!(m.mul_vec(&v).unwrap().iter().all(|x| x.is_zero()));
            }
        }

        #[test]
        fn rank_nullity(m in small_matrix()) {
            let ns = m.nullspace();
            prop_assert_eq!(m.rank() + ns.len(), m.cols());
            if !ns.is_empty() {
                let basis = Matrix::from_rows(m.cols(), ns.clone()).unwrap();
                prop_assert_eq!(basis.rank(), ns.len());
            }
        }

        #[test]
        fn nullspace_is_deterministic(m in small_matrix()) {
            prop_assert_eq!(m.nullspace(), m.clone().nullspace());
        }

        #[test]
        fn hermitian_round_trip(n in 1usize..5, seed in proptest::collection::vec((-5i64..6, 1i64..4), 16)) {
            let coords: Vec<Q> = (0..n * n).map(|k| q(seed[k].0, seed[k].1)).collect();
            let p = HermitianParam::new(n, coords).unwrap();
            let (re, im) = hermitian_from_coords(&p).unwrap();
            prop_assert!(re.is_symmetric());
            prop_assert!(im.is_antisymmetric());
            prop_assert_eq!(HermitianParam::from_parts(&re, &im).unwrap(), p);
        }
    }
}
