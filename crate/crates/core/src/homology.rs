//! Integer matrices, exponent-sum matrices and Smith normal form.
//!
//! The matrix type is generic over the entry ring. Fixed-width entries use
//! checked arithmetic and report [`HomologyError::Overflow`]; the default
//! alias [`crate::IntegerMatrix`] uses arbitrary precision and never does.

use std::fmt;

use num_integer::Integer;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, One, Signed};
use thiserror::Error;

use crate::words::Presentation;

/// Entry ring for [`Matrix`] and [`smith_normal_form`].
pub trait Scalar: Integer + Signed + Clone + CheckedAdd + CheckedSub + CheckedMul + fmt::Debug + fmt::Display {
    fn from_i64(v: i64) -> Self;
}

impl Scalar for i64 {
    fn from_i64(v: i64) -> Self {
        v
    }
}

impl Scalar for i128 {
    fn from_i64(v: i64) -> Self {
        v as i128
    }
}

impl Scalar for num_bigint::BigInt {
    fn from_i64(v: i64) -> Self {
        num_bigint::BigInt::from(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HomologyError {
    #[error("integer overflow during Smith normal form")]
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
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

    pub fn from_rows(rows: usize, cols: usize, entries: Vec<T>) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count does not match shape");
        Matrix { rows, cols, data: entries }
    }

    pub fn from_i64_rows(rows: &[Vec<i64>], cols: usize) -> Self {
        let mut m = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols);
            for (j, &v) in row.iter().enumerate() {
                m.data[i * cols + j] = T::from_i64(v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul(&self, other: &Matrix<T>) -> Result<Matrix<T>, HomologyError> {
        assert_eq!(self.cols, other.rows, "shape mismatch");
        let mut out: Matrix<T> = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let prod = a.checked_mul(other.get(k, j)).ok_or(HomologyError::Overflow)?;
                    let sum = out.get(i, j).checked_add(&prod).ok_or(HomologyError::Overflow)?;
                    out.set(i, j, sum);
                }
            }
        }
        Ok(out)
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self.get(i, j).is_zero()))
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[target] -= factor * row[source]
    fn row_axpy(&mut self, target: usize, source: usize, factor: &T) -> Result<(), HomologyError> {
        for j in 0..self.cols {
            let prod = factor.checked_mul(self.get(source, j)).ok_or(HomologyError::Overflow)?;
            let v = self.get(target, j).checked_sub(&prod).ok_or(HomologyError::Overflow)?;
            self.set(target, j, v);
        }
        Ok(())
    }

    /// col[target] -= factor * col[source]
    fn col_axpy(&mut self, target: usize, source: usize, factor: &T) -> Result<(), HomologyError> {
        for i in 0..self.rows {
            let prod = factor.checked_mul(self.get(i, source)).ok_or(HomologyError::Overflow)?;
            let v = self.get(i, target).checked_sub(&prod).ok_or(HomologyError::Overflow)?;
            self.set(i, target, v);
        }
        Ok(())
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let v = -self.get(i, j).clone();
            self.set(i, j, v);
        }
    }
}

impl<T: Scalar> fmt::Display for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

/// Relator-by-generator exponent sums.
pub fn abelianization_matrix<T: Scalar>(p: &Presentation) -> Matrix<T> {
    let mut m: Matrix<T> = Matrix::zeros(p.relators.len(), p.generators);
    for (i, r) in p.relators.iter().enumerate() {
        for l in r.letters() {
            let v = m.get(i, l.gen()).clone() + T::from_i64(l.sign.as_i64());
            m.set(i, l.gen(), v);
        }
    }
    m
}

/// `left · m · right = diag(diagonal)` with `diagonal[i] | diagonal[i+1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmithForm<T> {
    /// Length `min(rows, cols)`, non-negative; zeros trail.
    pub diagonal: Vec<T>,
    pub left: Matrix<T>,
    pub right: Matrix<T>,
}

impl<T: Scalar> SmithForm<T> {
    pub fn rank(&self) -> usize {
        self.diagonal.iter().filter(|d| !d.is_zero()).count()
    }

    /// Invariant factors greater than one.
    pub fn torsion(&self) -> Vec<T> {
        self.diagonal.iter().filter(|d| !d.is_zero() && !d.is_one()).cloned().collect()
    }
}

pub fn smith_normal_form<T: Scalar>(m: &Matrix<T>) -> Result<SmithForm<T>, HomologyError> {
    let (rows, cols) = (m.rows, m.cols);
    let mut a = m.clone();
    let mut left = Matrix::identity(rows);
    let mut right = Matrix::identity(cols);
    let steps = rows.min(cols);

    for t in 0..steps {
        // Pivot: smallest non-zero absolute value in the trailing block.
        let Some((pi, pj)) = smallest_entry(&a, t) else {
            break;
        };
        a.swap_rows(t, pi);
        left.swap_rows(t, pi);
        a.swap_cols(t, pj);
        right.swap_cols(t, pj);

        loop {
            let mut dirty = false;
            for i in t + 1..rows {
                if a.get(i, t).is_zero() {
                    continue;
                }
                let q = a.get(i, t).div_floor(a.get(t, t));
                a.row_axpy(i, t, &q)?;
                left.row_axpy(i, t, &q)?;
                if !a.get(i, t).is_zero() {
                    dirty = true;
                }
            }
            for j in t + 1..cols {
                if a.get(t, j).is_zero() {
                    continue;
                }
                let q = a.get(t, j).div_floor(a.get(t, t));
                a.col_axpy(j, t, &q)?;
                right.col_axpy(j, t, &q)?;
                if !a.get(t, j).is_zero() {
                    dirty = true;
                }
            }
            if !dirty {
                // Divisibility: pivot must divide the whole trailing block.
                let offender = (t + 1..rows)
                    .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                    .find(|&(i, j)| !a.get(i, j).is_multiple_of(a.get(t, t)));
                match offender {
                    None => break,
                    Some((i, _)) => {
                        // row[t] += row[i]; the next pass shrinks the pivot.
                        let minus_one = -T::one();
                        a.row_axpy(t, i, &minus_one)?;
                        left.row_axpy(t, i, &minus_one)?;
                    }
                }
            }
            if let Some((pi, pj)) = smallest_in_cross(&a, t) {
                a.swap_rows(t, pi);
                left.swap_rows(t, pi);
                a.swap_cols(t, pj);
                right.swap_cols(t, pj);
            }
        }
        if a.get(t, t).is_negative() {
            a.negate_row(t);
            left.negate_row(t);
        }
    }

    let diagonal = (0..steps).map(|i| a.get(i, i).clone()).collect();
    Ok(SmithForm { diagonal, left, right })
}

fn smallest_entry<T: Scalar>(a: &Matrix<T>, t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, T)> = None;
    for i in t..a.rows {
        for j in t..a.cols {
            let v = a.get(i, j).abs();
            if v.is_zero() {
                continue;
            }
            if best.as_ref().is_none_or(|(_, _, b)| v < *b) {
                best = Some((i, j, v));
            }
        }
    }
    best.map(|(i, j, _)| (i, j))
}

/// Smallest non-zero entry in row `t` and column `t` beyond the pivot, if it
/// is strictly smaller than the pivot.
fn smallest_in_cross<T: Scalar>(a: &Matrix<T>, t: usize) -> Option<(usize, usize)> {
    let pivot = a.get(t, t).abs();
    let mut best: Option<(usize, usize, T)> = None;
    let candidates = (t + 1..a.rows).map(|i| (i, t)).chain((t + 1..a.cols).map(|j| (t, j)));
    for (i, j) in candidates {
        let v = a.get(i, j).abs();
        if v.is_zero() {
            continue;
        }
        let beats_pivot = pivot.is_zero() || v < pivot;
        if beats_pivot && best.as_ref().is_none_or(|(_, _, b)| v < *b) {
            best = Some((i, j, v));
        }
    }
    best.map(|(i, j, _)| (i, j))
}

/// Whether the exponent-sum homology of a balanced presentation is trivial:
/// full rank and every invariant factor one.
pub fn has_trivial_abelianization(p: &Presentation) -> Result<bool, HomologyError> {
    let m: Matrix<num_bigint::BigInt> = abelianization_matrix(p);
    let snf = smith_normal_form(&m)?;
    Ok(snf.rank() == p.generators && snf.diagonal.iter().all(|d| d.is_one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::parse_presentation;
    use num_bigint::BigInt;

    fn check<T: Scalar>(m: &Matrix<T>) -> SmithForm<T> {
        let snf = smith_normal_form(m).unwrap();
        let prod = snf.left.mul(m).unwrap().mul(&snf.right).unwrap();
        assert!(prod.is_diagonal(), "{prod}");
        for i in 0..snf.diagonal.len() {
            assert_eq!(prod.get(i, i), &snf.diagonal[i]);
        }
        snf
    }

    #[test]
    fn exponent_matrix_examples() {
        let p = parse_presentation("<x,y | x^2 Y^3, x y x Y X Y>").unwrap();
        let m: Matrix<i64> = abelianization_matrix(&p);
        assert_eq!(m, Matrix::from_i64_rows(&[vec![2, -3], vec![1, -1]], 2));
        let one: Matrix<i64> = abelianization_matrix(&parse_presentation("<x | x>").unwrap());
        assert_eq!(one, Matrix::from_i64_rows(&[vec![1]], 1));
        let free: Matrix<i64> = abelianization_matrix(&parse_presentation("<x,y | >").unwrap());
        assert_eq!((free.rows(), free.cols()), (0, 2));
    }

    #[test]
    fn snf_examples() {
        let m = Matrix::<BigInt>::from_i64_rows(&[vec![2, -3], vec![1, -1]], 2);
        assert_eq!(check(&m).diagonal, vec![BigInt::from(1), BigInt::from(1)]);
        let m = Matrix::<i64>::from_i64_rows(&[vec![2]], 1);
        assert_eq!(check(&m).diagonal, vec![2]);
        let m = Matrix::<i64>::identity(4);
        assert_eq!(check(&m).diagonal, vec![1, 1, 1, 1]);
    }

    #[test]
    fn snf_divisibility_needs_mixing() {
        // diag(2, 3) has invariant factors (1, 6).
        let m = Matrix::<i64>::from_i64_rows(&[vec![2, 0], vec![0, 3]], 2);
        assert_eq!(check(&m).diagonal, vec![1, 6]);
        let m = Matrix::<i64>::from_i64_rows(&[vec![4, 0, 0], vec![0, 6, 0], vec![0, 0, 0]], 3);
        assert_eq!(check(&m).diagonal, vec![2, 12, 0]);
    }

    #[test]
    fn snf_rectangular_and_empty() {
        let m = Matrix::<i64>::zeros(0, 2);
        let snf = check(&m);
        assert!(snf.diagonal.is_empty());
        assert_eq!(snf.right, Matrix::identity(2));
        let m = Matrix::<i64>::from_i64_rows(&[vec![2, 4, 6]], 3);
        assert_eq!(check(&m).diagonal, vec![2]);
    }

    #[test]
    fn fixed_width_overflow_is_reported() {
        let big = i64::MAX / 2 + 7;
        let m = Matrix::<i64>::from_i64_rows(&[vec![big, big - 1], vec![big - 3, big]], 2);
        assert_eq!(smith_normal_form(&m), Err(HomologyError::Overflow));
        let wide = Matrix::<BigInt>::from_i64_rows(&[vec![big, big - 1], vec![big - 3, big]], 2);
        check(&wide);
    }

    #[test]
    fn trivial_abelianization() {
        assert!(has_trivial_abelianization(&Presentation::standard(3)).unwrap());
        assert!(!has_trivial_abelianization(&parse_presentation("<x | x^2>").unwrap()).unwrap());
        assert!(!has_trivial_abelianization(&parse_presentation("<x,y | x^2, y>").unwrap()).unwrap());
        assert!(!has_trivial_abelianization(&parse_presentation("<x,y | x y X Y, y>").unwrap()).unwrap());
    }
}
