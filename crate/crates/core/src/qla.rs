//! Quadratic Lie algebras over `Q`.
//!
//! The primary datum is the invariant symmetric element `t` of `S^2 g`, stored
//! as a symmetric matrix `t[i][j]` with `t = sum t^{ij} e_i (x) e_j`. It may be
//! degenerate; the metric on `g` is derived from it only when it is not.

use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::linalg::{dot, Matrix, Subspace, Vector};
use crate::rational::{fmt_q, parse_q, q, qf, Q};

#[derive(Debug, thiserror::Error)]
pub enum AlgebraError {
  #[error("malformed algebra document: {0}")]
  Format(String),
  #[error("index {index} out of range for dimension {dim}")]
  Index { index: usize, dim: usize },
  #[error("unknown catalog algebra {0:?}")]
  UnknownCatalog(String),
  #[error("subalgebra hypothesis violated: {0}")]
  Hypothesis(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadraticLieAlgebra {
  dim: usize,
  labels: Vec<String>,
  // c[(i * dim + j) * dim + k] = coefficient of e_k in [e_i, e_j]
  c: Vec<Q>,
  t: Matrix,
  matrix_model: Option<MatrixModel>,
}

/// Faithful representation by `n x n` rational matrices, one per basis element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixModel {
  n: usize,
  basis: Vec<Matrix>,
  // left inverse of the (n^2 x dim) matrix of flattened basis elements
  coords: Matrix,
  special: bool,
}

impl MatrixModel {
  pub fn new(basis: Vec<Matrix>) -> Result<Self, AlgebraError> {
    let Some(first) = basis.first() else {
      return Ok(Self { n: 0, basis, coords: Matrix::zeros(0, 0), special: true });
    };
    let n = first.rows();
    if basis.iter().any(|m| m.rows() != n || m.cols() != n) {
      return Err(AlgebraError::Format("matrix model entries must be square and equal size".into()));
    }
    let flat = Matrix::from_fn(n * n, basis.len(), |r, c| basis[c][(r / n, r % n)].clone());
    let gram = &flat.transpose() * &flat;
    let inv = gram
      .inverse()
      .ok_or_else(|| AlgebraError::Format("matrix model is not linearly independent".into()))?;
    let coords = &inv * &flat.transpose();
    let special = basis.iter().all(|m| (0..n).map(|i| m[(i, i)].clone()).sum::<Q>().is_zero());
    Ok(Self { n, basis, coords, special })
  }

  pub fn size(&self) -> usize {
    self.n
  }

  pub fn basis(&self) -> &[Matrix] {
    &self.basis
  }

  /// True when every basis matrix is traceless, so the group model is SL(n).
  pub fn is_special(&self) -> bool {
    self.special
  }

  pub fn to_matrix(&self, v: &[Q]) -> Matrix {
    let mut m = Matrix::zeros(self.n, self.n);
    for (x, b) in v.iter().zip(&self.basis) {
      if !x.is_zero() {
        m = &m + &b.scale(x);
      }
    }
    m
  }

  /// Coordinates of a matrix that lies in the span of the basis.
  pub fn coords_of(&self, m: &Matrix) -> Option<Vector> {
    let flat: Vector = (0..self.n * self.n).map(|r| m[(r / self.n, r % self.n)].clone()).collect();
    let x = self.coords.mul_vec(&flat);
    (self.to_matrix(&x) == *m).then_some(x)
  }
}

impl QuadraticLieAlgebra {
  /// Builds from dense structure constants and `t`. Invariants are not enforced
  /// here; `validate` reports them.
  pub fn new(labels: Vec<String>, c: Vec<Q>, t: Matrix, matrix_model: Option<MatrixModel>) -> Self {
    let dim = labels.len();
    assert_eq!(c.len(), dim * dim * dim);
    assert_eq!((t.rows(), t.cols()), (dim, dim));
    Self { dim, labels, c, t, matrix_model }
  }

  /// Structure constants from a matrix model, with the given `t`.
  pub fn from_matrices(labels: &[&str], basis: Vec<Matrix>, t: Matrix) -> Result<Self, AlgebraError> {
    let model = MatrixModel::new(basis)?;
    let dim = labels.len();
    let mut c = vec![Q::zero(); dim * dim * dim];
    for i in 0..dim {
      for j in 0..dim {
        let (a, b) = (&model.basis[i], &model.basis[j]);
        let comm = &(a * b) - &(b * a);
        let coords = model
          .coords_of(&comm)
          .ok_or_else(|| AlgebraError::Format("matrix model not closed under commutator".into()))?;
        for k in 0..dim {
          c[(i * dim + j) * dim + k] = coords[k].clone();
        }
      }
    }
    Ok(Self::new(labels.iter().map(|s| s.to_string()).collect(), c, t, Some(model)))
  }

  pub fn dim(&self) -> usize {
    self.dim
  }

  pub fn labels(&self) -> &[String] {
    &self.labels
  }

  pub fn c(&self, i: usize, j: usize, k: usize) -> &Q {
    &self.c[(i * self.dim + j) * self.dim + k]
  }

  pub fn t(&self) -> &Matrix {
    &self.t
  }

  pub fn matrix_model(&self) -> Option<&MatrixModel> {
    self.matrix_model.as_ref()
  }

  pub fn is_nondegenerate(&self) -> bool {
    !self.t.det().is_zero()
  }

  /// The invariant pairing on `g`, inverse to `t`.
  pub fn metric(&self) -> Option<Matrix> {
    self.t.inverse()
  }

  pub fn bracket(&self, u: &[Q], v: &[Q]) -> Vector {
    let d = self.dim;
    let mut out = vec![Q::zero(); d];
    for i in 0..d {
      if u[i].is_zero() {
        continue;
      }
      for j in 0..d {
        if v[j].is_zero() {
          continue;
        }
        let s = &u[i] * &v[j];
        for k in 0..d {
          let ck = self.c(i, j, k);
          if !ck.is_zero() {
            out[k] += &s * ck;
          }
        }
      }
    }
    out
  }

  pub fn basis_vec(&self, i: usize) -> Vector {
    let mut v = vec![Q::zero(); self.dim];
    v[i] = Q::one();
    v
  }

  /// Matrix of `ad_u` acting on coordinate columns.
  pub fn ad(&self, u: &[Q]) -> Matrix {
    let cols: Vec<Vector> = (0..self.dim).map(|j| self.bracket(u, &self.basis_vec(j))).collect();
    Matrix::from_rows(&cols, self.dim).transpose()
  }

  /// `t^sharp`: g* -> g, alpha |-> t(alpha, .), in coordinates.
  pub fn t_sharp(&self, alpha: &[Q]) -> Vector {
    self.t.vec_mul(alpha)
  }

  pub fn direct_sum(&self, other: &Self) -> Self {
    let (d1, d2) = (self.dim, other.dim);
    let d = d1 + d2;
    let mut c = vec![Q::zero(); d * d * d];
    for i in 0..d1 {
      for j in 0..d1 {
        for k in 0..d1 {
          c[(i * d + j) * d + k] = self.c(i, j, k).clone();
        }
      }
    }
    for i in 0..d2 {
      for j in 0..d2 {
        for k in 0..d2 {
          c[((i + d1) * d + j + d1) * d + k + d1] = other.c(i, j, k).clone();
        }
      }
    }
    let t = Matrix::from_fn(d, d, |i, j| match (i < d1, j < d1) {
      (true, true) => self.t[(i, j)].clone(),
      (false, false) => other.t[(i - d1, j - d1)].clone(),
      _ => Q::zero(),
    });
    let model = match (&self.matrix_model, &other.matrix_model) {
      (Some(a), Some(b)) => {
        let n = a.n + b.n;
        let mut basis = Vec::new();
        for m in &a.basis {
          basis.push(Matrix::from_fn(n, n, |r, s| if r < a.n && s < a.n { m[(r, s)].clone() } else { Q::zero() }));
        }
        for m in &b.basis {
          basis.push(Matrix::from_fn(n, n, |r, s| {
            if r >= a.n && s >= a.n {
              m[(r - a.n, s - a.n)].clone()
            } else {
              Q::zero()
            }
          }));
        }
        MatrixModel::new(basis).ok()
      }
      _ => None,
    };
    let mut labels: Vec<String> = self.labels.iter().map(|l| format!("{l}.1")).collect();
    labels.extend(other.labels.iter().map(|l| format!("{l}.2")));
    Self::new(labels, c, t, model)
  }

  /// Same bracket, `t` negated.
  pub fn bar(&self) -> Self {
    Self { t: -&self.t, ..self.clone() }
  }

  pub fn compose(&self, other: Option<&Self>, mode: ComposeMode) -> Self {
    match mode {
      ComposeMode::DirectSum => self.direct_sum(other.expect("direct sum needs two algebras")),
      ComposeMode::Bar => self.bar(),
    }
  }

  /// The trivector `phi^{abc} = 1/4 sum t^{ai} t^{bj} c_{ij}^c`.
  pub fn cartan_trivector(&self) -> AlgTensor {
    let d = self.dim;
    let quarter = qf(1, 4);
    let mut comps = vec![Q::zero(); d * d * d];
    for a in 0..d {
      for b in 0..d {
        for i in 0..d {
          let tai = &self.t[(a, i)];
          if tai.is_zero() {
            continue;
          }
          for j in 0..d {
            let tbj = &self.t[(b, j)];
            if tbj.is_zero() {
              continue;
            }
            let s = tai * tbj;
            for k in 0..d {
              let ck = self.c(i, j, k);
              if !ck.is_zero() {
                comps[(a * d + b) * d + k] += &s * ck;
              }
            }
          }
        }
      }
    }
    for x in comps.iter_mut() {
      *x *= &quarter;
    }
    AlgTensor { dim: d, degree: 3, symmetry: Symmetry::Alternating, comps }
  }

  pub fn validate(&self) -> ValidationReport {
    let d = self.dim;
    let mut entries = Vec::new();

    let mut anti = None;
    'a: for i in 0..d {
      for j in 0..d {
        for k in 0..d {
          if *self.c(i, j, k) != -self.c(j, i, k).clone() {
            anti = Some(vec![i, j, k]);
            break 'a;
          }
        }
      }
    }
    entries.push(InvariantCheck::new("antisymmetry", anti));

    let mut jac = None;
    'j: for i in 0..d {
      for j in 0..d {
        for k in 0..d {
          for l in 0..d {
            let mut s = Q::zero();
            for m in 0..d {
              s += self.c(i, j, m) * self.c(m, k, l);
              s += self.c(j, k, m) * self.c(m, i, l);
              s += self.c(k, i, m) * self.c(m, j, l);
            }
            if !s.is_zero() {
              jac = Some(vec![i, j, k, l]);
              break 'j;
            }
          }
        }
      }
    }
    entries.push(InvariantCheck::new("jacobi", jac));

    let mut sym = None;
    'sy: for i in 0..d {
      for j in 0..d {
        if self.t[(i, j)] != self.t[(j, i)] {
          sym = Some(vec![i, j]);
          break 'sy;
        }
      }
    }
    entries.push(InvariantCheck::new("t_symmetric", sym));

    let mut inv = None;
    'inv: for k in 0..d {
      for i in 0..d {
        for j in 0..d {
          let mut s = Q::zero();
          for m in 0..d {
            s += self.c(k, m, i) * &self.t[(m, j)];
            s += self.c(k, m, j) * &self.t[(i, m)];
          }
          if !s.is_zero() {
            inv = Some(vec![i, j, k]);
            break 'inv;
          }
        }
      }
    }
    entries.push(InvariantCheck::new("ad_invariance", inv));

    if let Some(model) = &self.matrix_model {
      let mut bad = None;
      'mm: for i in 0..d {
        for j in 0..d {
          let (a, b) = (&model.basis[i], &model.basis[j]);
          let comm = &(a * b) - &(b * a);
          let want = model.to_matrix(&(0..d).map(|k| self.c(i, j, k).clone()).collect::<Vec<_>>());
          if comm != want {
            bad = Some(vec![i, j]);
            break 'mm;
          }
        }
      }
      entries.push(InvariantCheck::new("matrix_model", bad));
    }
    ValidationReport { entries }
  }

  pub fn to_json(&self) -> AlgebraDoc {
    let d = self.dim;
    let mut brackets = Vec::new();
    for i in 0..d {
      for j in 0..d {
        for k in 0..d {
          let v = self.c(i, j, k);
          if !v.is_zero() {
            brackets.push((i, j, k, fmt_q(v)));
          }
        }
      }
    }
    let mut t = Vec::new();
    for i in 0..d {
      for j in 0..d {
        if !self.t[(i, j)].is_zero() {
          t.push((i, j, fmt_q(&self.t[(i, j)])));
        }
      }
    }
    let matrix_model = self.matrix_model.as_ref().map(|m| {
      m.basis.iter().map(|b| b.row_vecs().iter().map(|r| r.iter().map(fmt_q).collect()).collect()).collect()
    });
    AlgebraDoc { dim: d, labels: self.labels.clone(), brackets, t, matrix_model }
  }

  pub fn from_json(doc: &AlgebraDoc) -> Result<Self, AlgebraError> {
    let d = doc.dim;
    if d == 0 || doc.labels.len() != d {
      return Err(AlgebraError::Format("labels must list dim names".into()));
    }
    let check = |i: usize| if i < d { Ok(()) } else { Err(AlgebraError::Index { index: i, dim: d }) };
    let parse = |s: &str| parse_q(s).map_err(|e| AlgebraError::Format(e.to_string()));
    let mut c = vec![Q::zero(); d * d * d];
    for (i, j, k, v) in &doc.brackets {
      check(*i)?;
      check(*j)?;
      check(*k)?;
      c[(i * d + j) * d + k] = parse(v)?;
    }
    let mut t = Matrix::zeros(d, d);
    for (i, j, v) in &doc.t {
      check(*i)?;
      check(*j)?;
      t[(*i, *j)] = parse(v)?;
    }
    let model = match &doc.matrix_model {
      None => None,
      Some(ms) => {
        if ms.len() != d {
          return Err(AlgebraError::Format("matrix_model needs one matrix per basis element".into()));
        }
        let mut basis = Vec::new();
        for m in ms {
          let n = m.len();
          let rows: Result<Vec<Vector>, _> =
            m.iter().map(|r| r.iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()).collect();
          let rows = rows?;
          if rows.iter().any(|r| r.len() != n) {
            return Err(AlgebraError::Format("matrix_model entries must be square".into()));
          }
          basis.push(Matrix::from_rows(&rows, n));
        }
        Some(MatrixModel::new(basis)?)
      }
    };
    Ok(Self::new(doc.labels.clone(), c, t, model))
  }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComposeMode {
  DirectSum,
  Bar,
}

/// JSON form of an algebra: sparse brackets `[i, j, k, "p/q"]` and `t` entries `[i, j, "p/q"]`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct AlgebraDoc {
  pub dim: usize,
  pub labels: Vec<String>,
  pub brackets: Vec<(usize, usize, usize, String)>,
  pub t: Vec<(usize, usize, String)>,
  #[serde(default, skip_serializing_if = "Option::is_none")]
  pub matrix_model: Option<Vec<Vec<Vec<String>>>>,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct InvariantCheck {
  pub name: String,
  pub passed: bool,
  #[serde(skip_serializing_if = "Option::is_none")]
  pub first_violation: Option<Vec<usize>>,
}

impl InvariantCheck {
  fn new(name: &str, violation: Option<Vec<usize>>) -> Self {
    Self { name: name.to_string(), passed: violation.is_none(), first_violation: violation }
  }
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct ValidationReport {
  pub entries: Vec<InvariantCheck>,
}

impl ValidationReport {
  pub fn all_pass(&self) -> bool {
    self.entries.iter().all(|e| e.passed)
  }

  pub fn get(&self, name: &str) -> Option<&InvariantCheck> {
    self.entries.iter().find(|e| e.name == name)
  }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Symmetry {
  Alternating,
  Symmetric,
  None,
}

/// Dense tensor on a quadratic Lie algebra (upper indices, `degree` of them).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgTensor {
  pub dim: usize,
  pub degree: usize,
  pub symmetry: Symmetry,
  pub comps: Vec<Q>,
}

impl AlgTensor {
  pub fn zero(dim: usize, degree: usize, symmetry: Symmetry) -> Self {
    Self { dim, degree, symmetry, comps: vec![Q::zero(); dim.pow(degree as u32)] }
  }

  pub fn from_matrix(m: &Matrix, symmetry: Symmetry) -> Self {
    let d = m.rows();
    Self { dim: d, degree: 2, symmetry, comps: (0..d * d).map(|x| m[(x / d, x % d)].clone()).collect() }
  }

  pub fn index(&self, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * self.dim + i)
  }

  pub fn get(&self, idx: &[usize]) -> &Q {
    &self.comps[self.index(idx)]
  }

  pub fn is_zero(&self) -> bool {
    self.comps.iter().all(Zero::is_zero)
  }

  pub fn unindex(&self, mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0; self.degree];
    for slot in (0..self.degree).rev() {
      idx[slot] = flat % self.dim;
      flat /= self.dim;
    }
    idx
  }

  /// Nonzero components as (index tuple, value).
  pub fn nonzero(&self) -> Vec<(Vec<usize>, Q)> {
    self.comps.iter().enumerate().filter(|(_, v)| !v.is_zero()).map(|(i, v)| (self.unindex(i), v.clone())).collect()
  }

  /// Checks the declared symmetry on every transposition of adjacent slots.
  pub fn respects_symmetry(&self) -> bool {
    let sign = match self.symmetry {
      Symmetry::Alternating => -Q::one(),
      Symmetry::Symmetric => Q::one(),
      Symmetry::None => return true,
    };
    (0..self.comps.len()).all(|f| {
      let idx = self.unindex(f);
      (0..self.degree.saturating_sub(1)).all(|s| {
        let mut sw = idx.clone();
        sw.swap(s, s + 1);
        self.comps[f] == &sign * self.get(&sw)
      })
    })
  }

  /// Change of basis: `e_i = sum_k coords[i][k] b_k`, so components transform by `coords`.
  pub fn transform(&self, coords: &Matrix) -> AlgTensor {
    let new_dim = coords.cols();
    let mut out = AlgTensor::zero(new_dim, self.degree, self.symmetry);
    for (idx, v) in self.nonzero() {
      let mut partial: Vec<(Vec<usize>, Q)> = vec![(Vec::new(), v)];
      for &i in &idx {
        let mut next = Vec::new();
        for (pre, val) in &partial {
          for k in 0..new_dim {
            let ck = &coords[(i, k)];
            if !ck.is_zero() {
              let mut p = pre.clone();
              p.push(k);
              next.push((p, val * ck));
            }
          }
        }
        partial = next;
      }
      for (p, val) in partial {
        let f = out.index(&p);
        out.comps[f] += val;
      }
    }
    out
  }
}

/// A Lie subalgebra given by a spanning set of row vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subalgebra {
  parent: Arc<QuadraticLieAlgebra>,
  span: Subspace,
}

impl Subalgebra {
  pub fn new(parent: Arc<QuadraticLieAlgebra>, rows: &[Vector]) -> Result<Self, AlgebraError> {
    let d = parent.dim();
    if rows.iter().any(|r| r.len() != d) {
      return Err(AlgebraError::Format("subalgebra rows have wrong length".into()));
    }
    let span = Subspace::span(rows, d);
    let s = Self { parent, span };
    if !s.is_closed() {
      return Err(AlgebraError::Hypothesis("subspace is not closed under the bracket".into()));
    }
    Ok(s)
  }

  pub fn full(parent: Arc<QuadraticLieAlgebra>) -> Self {
    let d = parent.dim();
    Self { parent, span: Subspace::full(d) }
  }

  pub fn parent(&self) -> &Arc<QuadraticLieAlgebra> {
    &self.parent
  }

  pub fn span(&self) -> &Subspace {
    &self.span
  }

  pub fn dim(&self) -> usize {
    self.span.dim()
  }

  fn is_closed(&self) -> bool {
    let b = self.span.basis();
    b.iter().all(|x| b.iter().all(|y| self.span.contains(&self.parent.bracket(x, y))))
  }

  /// `Ann c` in `g*` (coordinates against the dual basis).
  pub fn annihilator(&self) -> Subspace {
    self.span.annihilator()
  }

  /// `c^perp = t(Ann c, .)`.
  pub fn perp(&self) -> Subspace {
    let imgs: Vec<Vector> = self.annihilator().basis().iter().map(|a| self.parent.t_sharp(a)).collect();
    Subspace::span(&imgs, self.parent.dim())
  }

  pub fn is_ideal_in(&self, outer: &Subalgebra) -> bool {
    outer.span.contains_space(&self.span)
      && outer
        .span
        .basis()
        .iter()
        .all(|x| self.span.basis().iter().all(|y| self.span.contains(&self.parent.bracket(x, y))))
  }

  pub fn coisotropy_report(&self) -> CoisotropyReport {
    let ann = self.annihilator();
    let t = self.parent.t();
    let is_coisotropic =
      ann.basis().iter().all(|a| ann.basis().iter().all(|b| t.bilinear(a, b).is_zero()));
    let perp = self.perp();
    debug_assert_eq!(is_coisotropic, self.span.contains_space(&perp));
    let lagrangian = if !self.parent.is_nondegenerate() {
      Lagrangian::DegenerateT
    } else if perp == self.span {
      Lagrangian::Yes
    } else {
      Lagrangian::No
    };
    CoisotropyReport { is_coisotropic, perp, lagrangian }
  }

  /// Quotient data on `self / h` (see [`DescendData`]).
  pub fn descend_data(&self, h: &Subalgebra) -> Result<DescendData, AlgebraError> {
    let g = &self.parent;
    let rep = self.coisotropy_report();
    if !rep.is_coisotropic {
      return Err(AlgebraError::Hypothesis("c is not coisotropic".into()));
    }
    if !self.span.contains_space(h.span()) {
      return Err(AlgebraError::Hypothesis("h is not contained in c".into()));
    }
    if !h.is_ideal_in(self) {
      return Err(AlgebraError::Hypothesis("not an ideal: h is not an ideal of c".into()));
    }
    if !h.span().contains_space(&rep.perp) {
      return Err(AlgebraError::Hypothesis("perp not contained: c^perp is not inside h".into()));
    }
    let d = g.dim();
    // adapted basis: h, then a complement of h in c, then a complement of c in g
    let mut basis: Vec<Vector> = h.span().basis().to_vec();
    let extend = |basis: &mut Vec<Vector>, pool: &[Vector]| {
      for v in pool {
        let mut trial = basis.clone();
        trial.push(v.clone());
        if Matrix::from_rows(&trial, d).rank() == trial.len() {
          *basis = trial;
        }
      }
    };
    extend(&mut basis, self.span.basis());
    let c_end = basis.len();
    extend(&mut basis, &Matrix::identity(d).row_vecs());
    let h_dim = h.dim();
    let q_dim = c_end - h_dim;
    let b = Matrix::from_rows(&basis, d);
    let binv = b.inverse().expect("adapted basis is a basis");
    // e_i = sum_k binv[i][k] b_k
    let t_new = AlgTensor::from_matrix(g.t(), Symmetry::Symmetric).transform(&binv);
    let phi_new = g.cartan_trivector().transform(&binv);

    let in_range = |idx: &[usize], lo: usize, hi: usize| idx.iter().all(|&i| i >= lo && i < hi);
    // image of phi in wedge^3(g/c): components with all indices in the g/c block
    let phi_mod_vanishes = phi_new.nonzero().iter().all(|(idx, _)| !in_range(idx, c_end, d));
    // image of t in S^2(g/h) must live in S^2(c/h); components touching h project away
    let t_in_quotient =
      t_new.nonzero().iter().all(|(idx, _)| idx.iter().any(|&i| i < h_dim) || idx.iter().all(|&i| i < c_end));
    if !t_in_quotient {
      return Err(AlgebraError::Hypothesis("image of t in S^2(g/h) leaves S^2(c/h)".into()));
    }
    let restrict = |ten: &AlgTensor| {
      let mut out = AlgTensor::zero(q_dim, ten.degree, ten.symmetry);
      for (idx, v) in ten.nonzero() {
        if in_range(&idx, h_dim, c_end) {
          let local: Vec<usize> = idx.iter().map(|i| i - h_dim).collect();
          let f = out.index(&local);
          out.comps[f] = v;
        }
      }
      out
    };
    let t_prime = restrict(&t_new);
    let phi_image = restrict(&phi_new);

    // quotient bracket on c/h
    let mut cq = vec![Q::zero(); q_dim * q_dim * q_dim];
    for i in 0..q_dim {
      for j in 0..q_dim {
        let br = g.bracket(&basis[h_dim + i], &basis[h_dim + j]);
        let coords = binv.transpose().mul_vec(&br);
        for k in 0..q_dim {
          cq[(i * q_dim + j) * q_dim + k] = coords[h_dim + k].clone();
        }
      }
    }
    let tq = Matrix::from_fn(q_dim, q_dim, |i, j| t_prime.get(&[i, j]).clone());
    let labels = (0..q_dim).map(|i| format!("q{i}")).collect();
    let quotient = QuadraticLieAlgebra::new(labels, cq, tq, None);
    let phi_prime = quotient.cartan_trivector();
    Ok(DescendData {
      phi_image_matches: phi_prime == phi_image,
      quotient,
      t_prime,
      phi_prime,
      phi_mod_vanishes,
      representatives: basis[h_dim..c_end].to_vec(),
    })
  }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Lagrangian {
  Yes,
  No,
  /// `t` is singular, so no Lagrangian verdict is given.
  DegenerateT,
}

#[derive(Clone, Debug)]
pub struct CoisotropyReport {
  pub is_coisotropic: bool,
  pub perp: Subspace,
  pub lagrangian: Lagrangian,
}

impl CoisotropyReport {
  pub fn is_lagrangian(&self) -> bool {
    self.lagrangian == Lagrangian::Yes
  }
}

/// Quadratic data descended to `c/h`.
#[derive(Clone, Debug)]
pub struct DescendData {
  /// `c/h` with the induced bracket and `t'`.
  pub quotient: QuadraticLieAlgebra,
  pub t_prime: AlgTensor,
  /// Cartan trivector of the quotient, built from `t'`.
  pub phi_prime: AlgTensor,
  /// Whether the image of `phi` in `wedge^3(g/c)` vanishes.
  pub phi_mod_vanishes: bool,
  /// Whether the projected `phi` agrees with `phi_prime`.
  pub phi_image_matches: bool,
  /// Representatives in `g` of the quotient basis.
  pub representatives: Vec<Vector>,
}

fn mat2(a: i64, b: i64, c: i64, d: i64) -> Matrix {
  Matrix::from_rows(&[vec![q(a), q(b)], vec![q(c), q(d)]], 2)
}

/// sl2 with basis (e, f, h) and the trace-form element `t = e(x)f + f(x)e + 1/2 h(x)h`.
pub fn sl2() -> QuadraticLieAlgebra {
  let mut t = Matrix::zeros(3, 3);
  t[(0, 1)] = q(1);
  t[(1, 0)] = q(1);
  t[(2, 2)] = qf(1, 2);
  QuadraticLieAlgebra::from_matrices(&["e", "f", "h"], vec![mat2(0, 1, 0, 0), mat2(0, 0, 1, 0), mat2(1, 0, 0, -1)], t)
    .expect("sl2 model")
}

/// gl2 with basis (E11, E12, E21, E22) and the inverse trace form.
pub fn gl2() -> QuadraticLieAlgebra {
  let mut t = Matrix::zeros(4, 4);
  t[(0, 0)] = q(1);
  t[(3, 3)] = q(1);
  t[(1, 2)] = q(1);
  t[(2, 1)] = q(1);
  gl2_with(t)
}

/// gl2 with the sl2 Casimir as `t`, which is degenerate along the center.
pub fn gl2_degenerate() -> QuadraticLieAlgebra {
  let mut t = Matrix::zeros(4, 4);
  t[(1, 2)] = q(1);
  t[(2, 1)] = q(1);
  t[(0, 0)] = qf(1, 2);
  t[(3, 3)] = qf(1, 2);
  t[(0, 3)] = qf(-1, 2);
  t[(3, 0)] = qf(-1, 2);
  gl2_with(t)
}

fn gl2_with(t: Matrix) -> QuadraticLieAlgebra {
  QuadraticLieAlgebra::from_matrices(
    &["E11", "E12", "E21", "E22"],
    vec![mat2(1, 0, 0, 0), mat2(0, 1, 0, 0), mat2(0, 0, 1, 0), mat2(0, 0, 0, 1)],
    t,
  )
  .expect("gl2 model")
}

/// Abelian `Q^n` with `t` the identity; its matrix model is diagonal.
pub fn abelian(n: usize) -> QuadraticLieAlgebra {
  let basis = (0..n).map(|i| Matrix::from_fn(n, n, |r, c| if r == i && c == i { q(1) } else { q(0) })).collect();
  let labels: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
  let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
  QuadraticLieAlgebra::from_matrices(&refs, basis, Matrix::identity(n)).expect("abelian model")
}

/// Looks up a catalog algebra: `abelianN`, `sl2`, `gl2`, `gl2_degenerate`,
/// `sl2_sl2`, `sl2_bar`, `d_sl2` (= sl2 + bar sl2).
pub fn catalog(name: &str) -> Result<QuadraticLieAlgebra, AlgebraError> {
  Ok(match name {
    "sl2" => sl2(),
    "gl2" => gl2(),
    "gl2_degenerate" => gl2_degenerate(),
    "sl2_sl2" => sl2().direct_sum(&sl2()),
    "sl2_bar" => sl2().bar(),
    "d_sl2" => sl2().direct_sum(&sl2().bar()),
    other => match other.strip_prefix("abelian").and_then(|n| n.parse::<usize>().ok()) {
      Some(n) if n > 0 => abelian(n),
      _ => return Err(AlgebraError::UnknownCatalog(other.to_string())),
    },
  })
}

pub const CATALOG: &[&str] = &["abelian1", "abelian3", "sl2", "gl2", "gl2_degenerate", "sl2_sl2", "sl2_bar", "d_sl2"];

/// Applies the coadjoint-dual pairing `alpha(u)`.
pub fn pair(alpha: &[Q], u: &[Q]) -> Q {
  dot(alpha, u)
}
