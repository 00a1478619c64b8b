//! Dense exact linear algebra over the rationals.
//!
//! Elimination works on integer rows (denominators cleared, row content
//! divided out after every update), which keeps entries small compared
//! with naive rational elimination.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("system is inconsistent")]
    Inconsistent,
}

#[derive(Clone, PartialEq, Eq)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl fmt::Debug for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RatMatrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|q| q.to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Rational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn from_columns(cols: Vec<Vec<Rational>>) -> Self {
        Self::from_rows(cols).transpose()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Rational> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn mul(&self, o: &Self) -> Result<Self, LinalgError> {
        if self.cols != o.rows {
            return Err(LinalgError::Shape(format!("{}x{} * {}x{}", self.rows, self.cols, o.rows, o.cols)));
        }
        let mut r = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = o.get(k, j);
                    if !b.is_zero() {
                        let v = r.get(i, j) + a * b;
                        r.set(i, j, v);
                    }
                }
            }
        }
        Ok(r)
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Sub-block `[r0, r1) x [c0, c1)`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        let rows = (r0..r1).map(|i| self.row(i)[c0..c1].to_vec()).collect::<Vec<_>>();
        Self { rows: r1 - r0, cols: c1 - c0, data: rows.into_iter().flatten().collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols), "shape mismatch");
        let data = self.data.iter().zip(&o.data).map(|(a, b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).to_f64().unwrap_or(f64::NAN))
    }

    pub fn rank(&self) -> usize {
        let (_, pivots) = echelon(integer_rows(self), self.cols, false);
        pivots.len()
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> Result<Rational, LinalgError> {
        if self.rows != self.cols {
            return Err(LinalgError::Shape("determinant of a non-square matrix".into()));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(Rational::one());
        }
        // clear denominators row by row, remembering the scale
        let mut scale = Rational::one();
        let mut m: Vec<Vec<BigInt>> = Vec::with_capacity(n);
        for i in 0..n {
            let (row, l) = clear_denominators(self.row(i));
            scale *= Rational::from_integer(l);
            m.push(row);
        }
        let mut sign = 1i32;
        let mut prev = BigInt::one();
        for k in 0..n {
            if m[k][k].is_zero() {
                match (k + 1..n).find(|&r| !m[r][k].is_zero()) {
                    Some(r) => {
                        m.swap(k, r);
                        sign = -sign;
                    }
                    None => return Ok(Rational::zero()),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                    m[i][j] = v;
                }
                m[i][k] = BigInt::zero();
            }
            prev = m[k][k].clone();
        }
        let det = Rational::from_integer(m[n - 1][n - 1].clone()) / scale;
        Ok(if sign < 0 { -det } else { det })
    }

    /// Solves `self * X = rhs` for square nonsingular `self`.
    pub fn solve(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.rows != self.cols || rhs.rows != self.rows {
            return Err(LinalgError::Shape("solve".into()));
        }
        let x = self.solve_unique(rhs)?;
        Ok(x)
    }

    /// Solves `self * X = rhs` when `self` has full column rank and the
    /// system is consistent.
    pub fn solve_unique(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if rhs.rows != self.rows {
            return Err(LinalgError::Shape("right-hand side rows".into()));
        }
        let n = self.cols;
        let aug = hstack(self, rhs);
        let (rows, pivots) = echelon(integer_rows(&aug), aug.cols, true);
        if pivots.iter().any(|&p| p >= n) {
            return Err(LinalgError::Inconsistent);
        }
        if pivots.len() < n {
            return Err(LinalgError::Singular);
        }
        let mut x = Self::zeros(n, rhs.cols);
        for (r, &p) in pivots.iter().enumerate() {
            let d = &rows[r][p];
            for j in 0..rhs.cols {
                x.set(p, j, Rational::new(rows[r][n + j].clone(), d.clone()));
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Self, LinalgError> {
        self.solve(&Self::identity(self.rows))
    }

    /// Basis of the right null space.
    pub fn nullspace(&self) -> Vec<Vec<Rational>> {
        let (rows, pivots) = echelon(integer_rows(self), self.cols, true);
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Rational::zero(); self.cols];
                v[f] = Rational::one();
                for (r, &p) in pivots.iter().enumerate() {
                    if !rows[r][f].is_zero() {
                        v[p] = -Rational::new(rows[r][f].clone(), rows[r][p].clone());
                    }
                }
                v
            })
            .collect()
    }
}

pub fn hstack(a: &RatMatrix, b: &RatMatrix) -> RatMatrix {
    assert_eq!(a.rows, b.rows);
    let rows = (0..a.rows).map(|i| [a.row(i), b.row(i)].concat()).collect();
    RatMatrix::from_rows(rows)
}

pub fn vstack(a: &RatMatrix, b: &RatMatrix) -> RatMatrix {
    assert_eq!(a.cols, b.cols);
    let mut data = a.data.clone();
    data.extend(b.data.iter().cloned());
    RatMatrix { rows: a.rows + b.rows, cols: a.cols, data }
}

/// Integer row proportional to `row` and the positive factor applied.
fn clear_denominators(row: &[Rational]) -> (Vec<BigInt>, BigInt) {
    let l = row.iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
    let r = row.iter().map(|q| q.numer() * (&l / q.denom())).collect();
    (r, l)
}

fn integer_rows(m: &RatMatrix) -> Vec<Vec<BigInt>> {
    (0..m.rows).map(|i| clear_denominators(m.row(i)).0).collect()
}

fn remove_content(row: &mut [BigInt]) {
    let mut g = BigInt::zero();
    for x in row.iter() {
        if !x.is_zero() {
            g = g.gcd(x);
            if g.is_one() {
                return;
            }
        }
    }
    if g.is_zero() || g.is_one() {
        return;
    }
    for x in row.iter_mut() {
        if !x.is_zero() {
            *x /= &g;
        }
    }
}

/// Row echelon form over the integers; with `reduce` the pivot columns are
/// also cleared above each pivot. Returns the nonzero rows and pivot columns.
fn echelon(mut rows: Vec<Vec<BigInt>>, cols: usize, reduce: bool) -> (Vec<Vec<BigInt>>, Vec<usize>) {
    for r in rows.iter_mut() {
        remove_content(r);
    }
    let mut pivots = Vec::new();
    let mut top = 0;
    for c in 0..cols {
        if top == rows.len() {
            break;
        }
        // pick the pivot with the smallest magnitude
        let best = (top..rows.len())
            .filter(|&r| !rows[r][c].is_zero())
            .min_by_key(|&r| rows[r][c].bits());
        let Some(best) = best else { continue };
        rows.swap(top, best);
        let (head, tail) = rows.split_at_mut(top + 1);
        let pivot = &head[top];
        let eliminate = |r: &mut Vec<BigInt>| {
            if r[c].is_zero() {
                return;
            }
            let g = pivot[c].gcd(&r[c]);
            let p = &pivot[c] / &g;
            let q = &r[c] / &g;
            for j in c..cols {
                if pivot[j].is_zero() {
                    if !r[j].is_zero() {
                        r[j] *= &p;
                    }
                } else {
                    let v = &r[j] * &p - &q * &pivot[j];
                    r[j] = v;
                }
            }
            remove_content(r);
        };
        tail.iter_mut().for_each(eliminate);
        if reduce {
            let (above, rest) = rows.split_at_mut(top);
            let pivot = &rest[0];
            for r in above.iter_mut() {
                if r[c].is_zero() {
                    continue;
                }
                let g = pivot[c].gcd(&r[c]);
                let p = &pivot[c] / &g;
                let q = &r[c] / &g;
                for j in 0..cols {
                    if pivot[j].is_zero() {
                        if !r[j].is_zero() {
                            r[j] *= &p;
                        }
                    } else {
                        let v = &r[j] * &p - &q * &pivot[j];
                        r[j] = v;
                    }
                }
                remove_content(r);
            }
        }
        pivots.push(c);
        top += 1;
    }
    rows.truncate(top);
    // normalize pivot signs so that pivots are positive
    for (r, &p) in rows.iter_mut().zip(&pivots) {
        if r[p].is_negative() {
            for x in r.iter_mut() {
                *x = -x.clone();
            }
        }
    }
    (rows, pivots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Rational {
        Rational::from_integer(BigInt::from(n))
    }

    fn m(rows: &[&[i64]]) -> RatMatrix {
        RatMatrix::from_rows(rows.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect())
    }

    #[test]
    fn small_determinants() {
        assert_eq!(m(&[&[2, 1], &[1, 3]]).determinant().unwrap(), q(5));
        assert_eq!(m(&[&[0, 1], &[1, 0]]).determinant().unwrap(), q(-1));
        assert_eq!(m(&[&[1, 2], &[2, 4]]).determinant().unwrap(), q(0));
        let h = RatMatrix::from_rows(
            (0..4).map(|i| (0..4).map(|j| Rational::new(BigInt::one(), BigInt::from(i + j + 1))).collect()).collect(),
        );
        // Hilbert matrix of order 4
        assert_eq!(h.determinant().unwrap(), Rational::new(BigInt::one(), BigInt::from(6048000)));
    }

    #[test]
    fn rank_and_nullspace() {
        let a = m(&[&[1, 2, 3], &[2, 4, 6], &[1, 0, 1]]);
        assert_eq!(a.rank(), 2);
        let ns = a.nullspace();
        assert_eq!(ns.len(), 1);
        assert!(a.mul_vec(&ns[0]).iter().all(|x| x.is_zero()));
    }

    #[test]
    fn inconsistent_systems_are_detected() {
        let a = m(&[&[1, 0], &[0, 1], &[1, 1]]);
        let b = m(&[&[1], &[1], &[3]]);
        assert_eq!(a.solve_unique(&b), Err(LinalgError::Inconsistent));
        let b = m(&[&[1], &[1], &[2]]);
        assert_eq!(a.solve_unique(&b).unwrap(), m(&[&[1], &[1]]));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_square(n: usize) -> impl Strategy<Value = RatMatrix> {
            proptest::collection::vec((-6i64..7, 1i64..4), n * n).prop_map(move |v| {
                RatMatrix::from_rows(
                    v.chunks(n)
                        .map(|r| r.iter().map(|&(a, b)| Rational::new(BigInt::from(a), BigInt::from(b))).collect())
                        .collect(),
                )
            })
        }

        proptest! {
            #[test]
            fn inverse_times_matrix_is_identity(a in arb_square(5)) {
                match a.inverse() {
                    Ok(inv) => {
                        prop_assert_eq!(a.mul(&inv).unwrap(), RatMatrix::identity(5));
                        prop_assert!(!a.determinant().unwrap().is_zero());
                    }
                    Err(_) => prop_assert!(a.determinant().unwrap().is_zero()),
                }
            }

            #[test]
            fn determinant_is_multiplicative(a in arb_square(4), b in arb_square(4)) {
                let ab = a.mul(&b).unwrap();
                prop_assert_eq!(ab.determinant().unwrap(), a.determinant().unwrap() * b.determinant().unwrap());
            }

            #[test]
            fn rank_nullity(a in arb_square(5)) {
                prop_assert_eq!(a.rank() + a.nullspace().len(), 5);
                prop_assert_eq!(a.rank(), a.transpose().rank());
            }
        }
    }
}
