//! Dense exact linear algebra over `Q`.
//!
//! Subspaces are kept as row spans in reduced row echelon form, so two
//! subspaces are equal exactly when their canonical bases are equal.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::rational::{fmt_q, Q};

pub type Vector = Vec<Q>;

#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
  rows: usize,
  cols: usize,
  data: Vec<Q>,
}

impl fmt::Debug for Matrix {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
    for r in 0..self.rows {
      let row: Vec<String> = self.row(r).iter().map(fmt_q).collect();
      writeln!(f, "  [{}]", row.join(", "))?;
    }
    write!(f, "]")
  }
}

/// Serialized as a list of rows of `"p/q"` strings.
impl serde::Serialize for Matrix {
  fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<String>> = (0..self.rows).map(|r| self.row(r).iter().map(fmt_q).collect()).collect();
    rows.serialize(s)
  }
}

impl Matrix {
  pub fn zeros(rows: usize, cols: usize) -> Self {
    Self { rows, cols, data: vec![Q::zero(); rows * cols] }
  }

  pub fn identity(n: usize) -> Self {
    let mut m = Self::zeros(n, n);
    for i in 0..n {
      m[(i, i)] = Q::one();
    }
    m
  }

  /// Builds from row vectors; `cols` is needed when `rows` is empty.
  pub fn from_rows(rows: &[Vector], cols: usize) -> Self {
    let mut data = Vec::with_capacity(rows.len() * cols);
    for r in rows {
      assert_eq!(r.len(), cols, "ragged rows");
      data.extend(r.iter().cloned());
    }
    Self { rows: rows.len(), cols, data }
  }

  pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Q) -> Self {
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
      for c in 0..cols {
        data.push(f(r, c));
      }
    }
    Self { rows, cols, data }
  }

  pub fn rows(&self) -> usize {
    self.rows
  }

  pub fn cols(&self) -> usize {
    self.cols
  }

  pub fn row(&self, r: usize) -> &[Q] {
    &self.data[r * self.cols..(r + 1) * self.cols]
  }

  pub fn row_vecs(&self) -> Vec<Vector> {
    (0..self.rows).map(|r| self.row(r).to_vec()).collect()
  }

  pub fn col(&self, c: usize) -> Vector {
    (0..self.rows).map(|r| self[(r, c)].clone()).collect()
  }

  pub fn transpose(&self) -> Self {
    Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].clone())
  }

  pub fn is_zero(&self) -> bool {
    self.data.iter().all(Zero::is_zero)
  }

  pub fn is_square(&self) -> bool {
    self.rows == self.cols
  }

  pub fn is_skew(&self) -> bool {
    self.is_square() && (0..self.rows).all(|i| (0..self.cols).all(|j| self[(i, j)] == -self[(j, i)].clone()))
  }

  pub fn is_symmetric(&self) -> bool {
    self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
  }

  pub fn scale(&self, s: &Q) -> Self {
    Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
  }

  pub fn mul_vec(&self, v: &[Q]) -> Vector {
    assert_eq!(v.len(), self.cols);
    (0..self.rows)
      .map(|r| {
        let mut acc = Q::zero();
        for (a, b) in self.row(r).iter().zip(v) {
          if !a.is_zero() && !b.is_zero() {
            acc += a * b;
          }
        }
        acc
      })
      .collect()
  }

  /// Row vector times matrix.
  pub fn vec_mul(&self, v: &[Q]) -> Vector {
    assert_eq!(v.len(), self.rows);
    let mut out = vec![Q::zero(); self.cols];
    for (r, x) in v.iter().enumerate() {
      if x.is_zero() {
        continue;
      }
      for (o, a) in out.iter_mut().zip(self.row(r)) {
        if !a.is_zero() {
          *o += x * a;
        }
      }
    }
    out
  }

  /// Bilinear form `u^T A v`.
  pub fn bilinear(&self, u: &[Q], v: &[Q]) -> Q {
    dot(u, &self.mul_vec(v))
  }

  /// `B A B^T` for the rows of `B`: the Gram matrix of a form on a family of vectors.
  pub fn congruence(&self, left: &Matrix, right: &Matrix) -> Matrix {
    &(left * self) * &right.transpose()
  }

  pub fn select_rows(&self, idx: &[usize]) -> Matrix {
    Matrix::from_rows(&idx.iter().map(|&i| self.row(i).to_vec()).collect::<Vec<_>>(), self.cols)
  }

  pub fn hstack(&self, other: &Matrix) -> Matrix {
    assert_eq!(self.rows, other.rows);
    Matrix::from_fn(self.rows, self.cols + other.cols, |r, c| {
      if c < self.cols {
        self[(r, c)].clone()
      } else {
        other[(r, c - self.cols)].clone()
      }
    })
  }

  pub fn vstack(&self, other: &Matrix) -> Matrix {
    assert_eq!(self.cols, other.cols);
    let mut data = self.data.clone();
    data.extend(other.data.iter().cloned());
    Matrix { rows: self.rows + other.rows, cols: self.cols, data }
  }

  /// Reduced row echelon form and pivot columns.
  pub fn rref(&self) -> (Matrix, Vec<usize>) {
    let mut m = self.clone();
    let mut pivots = Vec::new();
    let mut lead = 0;
    for c in 0..m.cols {
      if lead == m.rows {
        break;
      }
      let Some(p) = (lead..m.rows).find(|&r| !m[(r, c)].is_zero()) else {
        continue;
      };
      m.swap_rows(lead, p);
      let inv = m[(lead, c)].recip();
      for k in c..m.cols {
        let v = &m[(lead, k)] * &inv;
        m[(lead, k)] = v;
      }
      for r in 0..m.rows {
        if r == lead || m[(r, c)].is_zero() {
          continue;
        }
        let factor = m[(r, c)].clone();
        for k in c..m.cols {
          if m[(lead, k)].is_zero() {
            continue;
          }
          let v = &m[(lead, k)] * &factor;
          m[(r, k)] -= v;
        }
      }
      pivots.push(c);
      lead += 1;
    }
    (m, pivots)
  }

  fn swap_rows(&mut self, a: usize, b: usize) {
    if a == b {
      return;
    }
    for c in 0..self.cols {
      self.data.swap(a * self.cols + c, b * self.cols + c);
    }
  }

  pub fn rank(&self) -> usize {
    self.rref().1.len()
  }

  /// Basis of `{x : A x = 0}`.
  pub fn nullspace(&self) -> Vec<Vector> {
    let (r, pivots) = self.rref();
    let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
    free
      .iter()
      .map(|&f| {
        let mut x = vec![Q::zero(); self.cols];
        x[f] = Q::one();
        for (i, &p) in pivots.iter().enumerate() {
          x[p] = -r[(i, f)].clone();
        }
        x
      })
      .collect()
  }

  /// Basis of `{y : y^T A = 0}`.
  pub fn left_nullspace(&self) -> Vec<Vector> {
    self.transpose().nullspace()
  }

  pub fn det(&self) -> Q {
    assert!(self.is_square());
    let mut m = self.clone();
    let n = m.rows;
    let mut det = Q::one();
    for c in 0..n {
      let Some(p) = (c..n).find(|&r| !m[(r, c)].is_zero()) else {
        return Q::zero();
      };
      if p != c {
        m.swap_rows(p, c);
        det = -det;
      }
      let piv = m[(c, c)].clone();
      det *= &piv;
      for r in c + 1..n {
        if m[(r, c)].is_zero() {
          continue;
        }
        let f = &m[(r, c)] / &piv;
        for k in c..n {
          let v = &m[(c, k)] * &f;
          m[(r, k)] -= v;
        }
      }
    }
    det
  }

  pub fn inverse(&self) -> Option<Matrix> {
    if !self.is_square() {
      return None;
    }
    let n = self.rows;
    let (r, pivots) = self.hstack(&Matrix::identity(n)).rref();
    if pivots.len() < n || pivots[n - 1] != n - 1 {
      return None;
    }
    Some(Matrix::from_fn(n, n, |i, j| r[(i, n + j)].clone()))
  }

  /// Some `x` with `A x = b`, if one exists.
  pub fn solve(&self, b: &[Q]) -> Option<Vector> {
    assert_eq!(b.len(), self.rows);
    let aug = self.hstack(&Matrix::from_fn(self.rows, 1, |r, _| b[r].clone()));
    let (r, pivots) = aug.rref();
    if pivots.last() == Some(&self.cols) {
      return None;
    }
    let mut x = vec![Q::zero(); self.cols];
    for (i, &p) in pivots.iter().enumerate() {
      x[p] = r[(i, self.cols)].clone();
    }
    Some(x)
  }

  pub fn row_space(&self) -> Subspace {
    Subspace::span(&self.row_vecs(), self.cols)
  }

  pub fn column_space(&self) -> Subspace {
    self.transpose().row_space()
  }

  /// `{ M y : y in space }`, the image of a subspace under this matrix.
  pub fn image_of(&self, space: &Subspace) -> Subspace {
    let imgs: Vec<Vector> = space.basis().iter().map(|v| self.mul_vec(v)).collect();
    Subspace::span(&imgs, self.rows)
  }
}

impl std::ops::Index<(usize, usize)> for Matrix {
  type Output = Q;
  fn index(&self, (r, c): (usize, usize)) -> &Q {
    &self.data[r * self.cols + c]
  }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
  fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Q {
    &mut self.data[r * self.cols + c]
  }
}

impl Mul for &Matrix {
  type Output = Matrix;
  fn mul(self, rhs: &Matrix) -> Matrix {
    assert_eq!(self.cols, rhs.rows, "dimension mismatch in product");
    let mut out = Matrix::zeros(self.rows, rhs.cols);
    for i in 0..self.rows {
      for k in 0..self.cols {
        let a = &self[(i, k)];
        if a.is_zero() {
          continue;
        }
        for j in 0..rhs.cols {
          let b = &rhs[(k, j)];
          if !b.is_zero() {
            out[(i, j)] += a * b;
          }
        }
      }
    }
    out
  }
}

impl Add for &Matrix {
  type Output = Matrix;
  fn add(self, rhs: &Matrix) -> Matrix {
    assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
    Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
  }
}

impl Sub for &Matrix {
  type Output = Matrix;
  fn sub(self, rhs: &Matrix) -> Matrix {
    assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
    Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
  }
}

impl Neg for &Matrix {
  type Output = Matrix;
  fn neg(self) -> Matrix {
    Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| -a).collect() }
  }
}

pub fn dot(u: &[Q], v: &[Q]) -> Q {
  assert_eq!(u.len(), v.len());
  let mut acc = Q::zero();
  for (a, b) in u.iter().zip(v) {
    if !a.is_zero() && !b.is_zero() {
      acc += a * b;
    }
  }
  acc
}

pub fn axpy(acc: &mut [Q], s: &Q, v: &[Q]) {
  if s.is_zero() {
    return;
  }
  for (a, b) in acc.iter_mut().zip(v) {
    if !b.is_zero() {
      *a += s * b;
    }
  }
}

pub fn vsub(u: &[Q], v: &[Q]) -> Vector {
  u.iter().zip(v).map(|(a, b)| a - b).collect()
}

pub fn vscale(u: &[Q], s: &Q) -> Vector {
  u.iter().map(|a| a * s).collect()
}

pub fn is_zero_vec(v: &[Q]) -> bool {
  v.iter().all(Zero::is_zero)
}

/// Subspace of `Q^n` in canonical (RREF) form.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Subspace {
  ambient: usize,
  basis: Vec<Vector>,
}

impl Subspace {
  pub fn zero(ambient: usize) -> Self {
    Self { ambient, basis: Vec::new() }
  }

  pub fn full(ambient: usize) -> Self {
    Self::span(&Matrix::identity(ambient).row_vecs(), ambient)
  }

  pub fn span(vectors: &[Vector], ambient: usize) -> Self {
    if vectors.is_empty() {
      return Self::zero(ambient);
    }
    let (r, pivots) = Matrix::from_rows(vectors, ambient).rref();
    Self { ambient, basis: (0..pivots.len()).map(|i| r.row(i).to_vec()).collect() }
  }

  pub fn ambient(&self) -> usize {
    self.ambient
  }

  pub fn dim(&self) -> usize {
    self.basis.len()
  }

  pub fn basis(&self) -> &[Vector] {
    &self.basis
  }

  pub fn basis_matrix(&self) -> Matrix {
    Matrix::from_rows(&self.basis, self.ambient)
  }

  pub fn contains(&self, v: &[Q]) -> bool {
    let mut b = self.basis.clone();
    b.push(v.to_vec());
    Matrix::from_rows(&b, self.ambient).rank() == self.dim()
  }

  pub fn contains_space(&self, other: &Subspace) -> bool {
    self.sum(other).dim() == self.dim()
  }

  pub fn sum(&self, other: &Subspace) -> Subspace {
    assert_eq!(self.ambient, other.ambient);
    let mut b = self.basis.clone();
    b.extend(other.basis.iter().cloned());
    Subspace::span(&b, self.ambient)
  }

  pub fn intersect(&self, other: &Subspace) -> Subspace {
    assert_eq!(self.ambient, other.ambient);
    if self.dim() == 0 || other.dim() == 0 {
      return Subspace::zero(self.ambient);
    }
    // a.U = b.W  <=>  [U; -W]^T (a, b) = 0
    let stacked = self.basis_matrix().vstack(&-&other.basis_matrix());
    let coeffs = stacked.transpose().nullspace();
    let vs: Vec<Vector> =
      coeffs.iter().map(|c| self.basis_matrix().vec_mul(&c[..self.dim()])).collect();
    Subspace::span(&vs, self.ambient)
  }

  /// `{ x : <x, v> = 0 for all v in self }` under the standard dot product.
  pub fn annihilator(&self) -> Subspace {
    if self.dim() == 0 {
      return Subspace::full(self.ambient);
    }
    Subspace::span(&self.basis_matrix().nullspace(), self.ambient)
  }

  /// Preimage `{ x : M x in self }`.
  pub fn preimage(&self, m: &Matrix) -> Subspace {
    assert_eq!(m.rows(), self.ambient);
    // M x in S  <=>  A M x = 0 with A spanning the annihilator of S.
    let ann = self.annihilator();
    if ann.dim() == 0 {
      return Subspace::full(m.cols());
    }
    Subspace::span(&(&ann.basis_matrix() * m).nullspace(), m.cols())
  }
}
