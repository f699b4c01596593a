//! Invariant multivector fields on a product of matrix groups.
//!
//! Fields are formal combinations of wedge monomials in left/right invariant
//! generators. Wedges follow `a^b = a(x)b - b(x)a`. Evaluation happens in the
//! left-trivialized frame: `u^L -> u` and `u^R -> Ad_{g^-1} u` at site value `g`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use rand::Rng;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::linalg::{Matrix, Vector};
use crate::qla::{AlgTensor, QuadraticLieAlgebra, Symmetry};
use crate::rational::{fmt_q, q, qf, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CalcError {
  #[error("operands live on different site layouts")]
  LayoutMismatch,
  #[error("site {0} has no matrix model")]
  NoMatrixModel(usize),
  #[error("site {site}: {reason}")]
  BadPoint { site: usize, reason: String },
  #[error("dimension mismatch: expected {expected}, got {got}")]
  Dimension { expected: usize, got: usize },
  #[error("cannot sample group points for site {0}: no shear or scaling generators")]
  NoSampler(usize),
}

/// The algebras of the group factors, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
  sites: Vec<Arc<QuadraticLieAlgebra>>,
  offsets: Vec<usize>,
}

impl Layout {
  pub fn new(sites: Vec<Arc<QuadraticLieAlgebra>>) -> Arc<Self> {
    let mut offsets = Vec::with_capacity(sites.len());
    let mut acc = 0;
    for s in &sites {
      offsets.push(acc);
      acc += s.dim();
    }
    Arc::new(Self { sites, offsets })
  }

  pub fn uniform(g: Arc<QuadraticLieAlgebra>, n: usize) -> Arc<Self> {
    Self::new(vec![g; n])
  }

  pub fn n_sites(&self) -> usize {
    self.sites.len()
  }

  pub fn site(&self, i: usize) -> &Arc<QuadraticLieAlgebra> {
    &self.sites[i]
  }

  pub fn offset(&self, i: usize) -> usize {
    self.offsets[i]
  }

  /// Dimension of the product group.
  pub fn total_dim(&self) -> usize {
    self.sites.iter().map(|s| s.dim()).sum()
  }

  /// Splits a frame index into (site, algebra index).
  pub fn locate(&self, idx: usize) -> (usize, usize) {
    let site = self.offsets.partition_point(|&o| o <= idx) - 1;
    (site, idx - self.offsets[site])
  }
}

fn same_layout(a: &Arc<Layout>, b: &Arc<Layout>) -> bool {
  Arc::ptr_eq(a, b) || a == b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Chirality {
  L,
  R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Generator {
  pub site: usize,
  pub chirality: Chirality,
  pub alg_index: usize,
}

impl Generator {
  pub fn new(site: usize, chirality: Chirality, alg_index: usize) -> Self {
    Self { site, chirality, alg_index }
  }
}

impl fmt::Display for Generator {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let c = match self.chirality {
      Chirality::L => "L",
      Chirality::R => "R",
    };
    write!(f, "{}^{}@{}", self.alg_index, c, self.site)
  }
}

/// Sorts a generator word, returning the sign of the permutation, or `None`
/// if a generator repeats.
fn sort_word(word: &mut [Generator]) -> Option<bool> {
  let mut negate = false;
  for i in 1..word.len() {
    let mut j = i;
    while j > 0 && word[j - 1] > word[j] {
      word.swap(j - 1, j);
      negate = !negate;
      j -= 1;
    }
  }
  if word.windows(2).any(|w| w[0] == w[1]) {
    None
  } else {
    Some(negate)
  }
}

/// Formal alternating multivector in canonical form: keys are strictly
/// increasing generator words, values nonzero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multivector {
  layout: Arc<Layout>,
  degree: usize,
  terms: BTreeMap<Vec<Generator>, Q>,
}

impl Multivector {
  pub fn zero(layout: Arc<Layout>, degree: usize) -> Self {
    Self { layout, degree, terms: BTreeMap::new() }
  }

  pub fn generator(layout: Arc<Layout>, g: Generator) -> Self {
    let mut m = Self::zero(layout, 1);
    m.terms.insert(vec![g], Q::one());
    m
  }

  /// `u^L` or `u^R` at a site for an arbitrary algebra element `u`.
  pub fn from_element(layout: Arc<Layout>, site: usize, chirality: Chirality, u: &[Q]) -> Self {
    let mut m = Self::zero(layout, 1);
    for (i, x) in u.iter().enumerate() {
      m.add_term(vec![Generator::new(site, chirality, i)], x.clone());
    }
    m
  }

  pub fn layout(&self) -> &Arc<Layout> {
    &self.layout
  }

  pub fn degree(&self) -> usize {
    self.degree
  }

  pub fn terms(&self) -> &BTreeMap<Vec<Generator>, Q> {
    &self.terms
  }

  pub fn is_zero(&self) -> bool {
    self.terms.is_empty()
  }

  /// Adds `coeff * w_1 ^ ... ^ w_k` for an arbitrary word.
  pub fn add_term(&mut self, mut word: Vec<Generator>, coeff: Q) {
    debug_assert_eq!(word.len(), self.degree);
    if coeff.is_zero() {
      return;
    }
    let Some(negate) = sort_word(&mut word) else { return };
    let c = if negate { -coeff } else { coeff };
    let sum = self.terms.remove(&word).unwrap_or_else(Q::zero) + c;
    if !sum.is_zero() {
      self.terms.insert(word, sum);
    }
  }

  fn check(&self, other: &Self) -> Result<(), CalcError> {
    if same_layout(&self.layout, &other.layout) {
      Ok(())
    } else {
      Err(CalcError::LayoutMismatch)
    }
  }

  pub fn add(&self, other: &Self) -> Result<Self, CalcError> {
    self.check(other)?;
    assert_eq!(self.degree, other.degree, "adding multivectors of different degree");
    let mut out = self.clone();
    for (w, c) in &other.terms {
      out.add_term(w.clone(), c.clone());
    }
    Ok(out)
  }

  pub fn sub(&self, other: &Self) -> Result<Self, CalcError> {
    self.add(&other.scale(&-Q::one()))
  }

  pub fn scale(&self, s: &Q) -> Self {
    let mut out = Self::zero(self.layout.clone(), self.degree);
    if !s.is_zero() {
      out.terms = self.terms.iter().map(|(w, c)| (w.clone(), c * s)).collect();
    }
    out
  }

  pub fn wedge(&self, other: &Self) -> Result<Self, CalcError> {
    self.check(other)?;
    let mut out = Self::zero(self.layout.clone(), self.degree + other.degree);
    for (a, ca) in &self.terms {
      for (b, cb) in &other.terms {
        let mut w = a.clone();
        w.extend_from_slice(b);
        out.add_term(w, ca * cb);
      }
    }
    Ok(out)
  }

  /// Bracket of two generators as a degree-1 field.
  fn generator_bracket(&self, a: Generator, b: Generator) -> Vec<(Generator, Q)> {
    if a.site != b.site || a.chirality != b.chirality {
      return Vec::new();
    }
    let g = self.layout.site(a.site);
    let sign = match a.chirality {
      Chirality::L => Q::one(),
      Chirality::R => -Q::one(),
    };
    (0..g.dim())
      .filter_map(|k| {
        let c = g.c(a.alg_index, b.alg_index, k);
        (!c.is_zero()).then(|| (Generator::new(a.site, a.chirality, k), &sign * c))
      })
      .collect()
  }

  /// Schouten bracket. On monomials:
  /// `[X_1..X_p, Y_1..Y_q] = sum (-1)^{i+j} [X_i,Y_j] ^ X_(no i) ^ Y_(no j)`.
  pub fn schouten(&self, other: &Self) -> Result<Self, CalcError> {
    self.check(other)?;
    if self.degree == 0 || other.degree == 0 {
      let deg = (self.degree + other.degree).saturating_sub(1);
      return Ok(Self::zero(self.layout.clone(), deg));
    }
    let mut out = Self::zero(self.layout.clone(), self.degree + other.degree - 1);
    for (xs, cx) in &self.terms {
      for (ys, cy) in &other.terms {
        let base = cx * cy;
        for (i, &xi) in xs.iter().enumerate() {
          for (j, &yj) in ys.iter().enumerate() {
            let br = self.generator_bracket(xi, yj);
            if br.is_empty() {
              continue;
            }
            let sign = if (i + j) % 2 == 0 { base.clone() } else { -base.clone() };
            for (z, cz) in br {
              let mut w = Vec::with_capacity(out.degree);
              w.push(z);
              w.extend(xs.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, g)| *g));
              w.extend(ys.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, g)| *g));
              out.add_term(w, &sign * cz);
            }
          }
        }
      }
    }
    Ok(out)
  }

  /// Tensor form of a bivector: `a^b -> a(x)b - b(x)a`.
  pub fn to_tensor2(&self) -> InvariantTensor2 {
    assert_eq!(self.degree, 2, "to_tensor2 needs a bivector");
    let mut out = InvariantTensor2::zero(self.layout.clone());
    for (w, c) in &self.terms {
      out.add_term(w[0], w[1], c.clone());
      out.add_term(w[1], w[0], -c.clone());
    }
    out
  }
}

impl fmt::Display for Multivector {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if self.terms.is_empty() {
      return write!(f, "0");
    }
    let parts: Vec<String> = self
      .terms
      .iter()
      .map(|(w, c)| {
        let word: Vec<String> = w.iter().map(Generator::to_string).collect();
        format!("{} {}", fmt_q(c), word.join("^"))
      })
      .collect();
    write!(f, "{}", parts.join(" + "))
  }
}

/// A degree-2 tensor in generators with no symmetry assumed (e.g. `sigma`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantTensor2 {
  layout: Arc<Layout>,
  terms: BTreeMap<(Generator, Generator), Q>,
}

impl InvariantTensor2 {
  pub fn zero(layout: Arc<Layout>) -> Self {
    Self { layout, terms: BTreeMap::new() }
  }

  pub fn layout(&self) -> &Arc<Layout> {
    &self.layout
  }

  pub fn terms(&self) -> &BTreeMap<(Generator, Generator), Q> {
    &self.terms
  }

  pub fn is_zero(&self) -> bool {
    self.terms.is_empty()
  }

  pub fn add_term(&mut self, a: Generator, b: Generator, coeff: Q) {
    if coeff.is_zero() {
      return;
    }
    let slot = self.terms.entry((a, b)).or_insert_with(Q::zero);
    *slot += coeff;
    if slot.is_zero() {
      self.terms.remove(&(a, b));
    }
  }

  /// `sum coeff * X (x) Y` over degree-1 fields.
  pub fn add_product(&mut self, x: &Multivector, y: &Multivector, coeff: &Q) {
    for (a, ca) in &x.terms {
      for (b, cb) in &y.terms {
        self.add_term(a[0], b[0], coeff * ca * cb);
      }
    }
  }

  pub fn add(&self, other: &Self) -> Result<Self, CalcError> {
    if !same_layout(&self.layout, &other.layout) {
      return Err(CalcError::LayoutMismatch);
    }
    let mut out = self.clone();
    for (&(a, b), c) in &other.terms {
      out.add_term(a, b, c.clone());
    }
    Ok(out)
  }

  pub fn scale(&self, s: &Q) -> Self {
    let mut out = Self::zero(self.layout.clone());
    for (&(a, b), c) in &self.terms {
      out.add_term(a, b, c * s);
    }
    out
  }

  pub fn transpose(&self) -> Self {
    let mut out = Self::zero(self.layout.clone());
    for (&(a, b), c) in &self.terms {
      out.add_term(b, a, c.clone());
    }
    out
  }

  /// `(S - S^T)/2` as a bivector; with `a^b = a(x)b - b(x)a` this is
  /// `1/2 sum s_ab a^b`.
  pub fn skew_part(&self) -> Multivector {
    let mut out = Multivector::zero(self.layout.clone(), 2);
    let h = qf(1, 2);
    for (&(a, b), c) in &self.terms {
      out.add_term(vec![a, b], c * &h);
    }
    out
  }

  /// `(S + S^T)/2`.
  pub fn symmetric_part(&self) -> Self {
    let h = qf(1, 2);
    self.add(&self.transpose()).expect("same layout").scale(&h)
  }
}

/// A linear map from an acting algebra into degree-1 invariant fields.
#[derive(Debug, Clone)]
pub struct ActionMap {
  pub acting: Arc<QuadraticLieAlgebra>,
  pub images: Vec<Multivector>,
  layout: Arc<Layout>,
}

impl ActionMap {
  pub fn new(acting: Arc<QuadraticLieAlgebra>, images: Vec<Multivector>) -> Self {
    let layout = images.first().expect("at least one image; use ActionMap::on for a trivial algebra").layout().clone();
    Self::on(layout, acting, images)
  }

  /// Action on a given layout; allows the zero algebra.
  pub fn on(layout: Arc<Layout>, acting: Arc<QuadraticLieAlgebra>, images: Vec<Multivector>) -> Self {
    assert_eq!(acting.dim(), images.len());
    assert!(images.iter().all(|m| m.degree() == 1 && m.layout() == &layout));
    Self { acting, images, layout }
  }

  pub fn layout(&self) -> &Arc<Layout> {
    &self.layout
  }

  /// Image of an arbitrary element of the acting algebra.
  pub fn apply(&self, u: &[Q]) -> Multivector {
    let mut out = Multivector::zero(self.layout().clone(), 1);
    for (x, img) in u.iter().zip(&self.images) {
      if !x.is_zero() {
        out = out.add(&img.scale(x)).expect("same layout");
      }
    }
    out
  }
}

/// Pushes an alternating tensor through `rho`:
/// `sum over sorted I of T^I rho(e_I1) ^ ... ^ rho(e_Ik)`.
pub fn action_extend(rho: &ActionMap, t: &AlgTensor) -> Multivector {
  let layout = rho.layout().clone();
  let mut out = Multivector::zero(layout.clone(), t.degree);
  if t.degree == 0 {
    if let Some(c) = t.comps.first() {
      out.add_term(Vec::new(), c.clone());
    }
    return out;
  }
  for (idx, v) in t.nonzero() {
    if t.symmetry == Symmetry::Alternating && idx.windows(2).any(|w| w[0] >= w[1]) {
      continue;
    }
    let mut acc = Multivector::zero(layout.clone(), 0);
    acc.add_term(Vec::new(), v);
    for &i in &idx {
      acc = acc.wedge(&rho.images[i]).expect("same layout");
    }
    out = out.add(&acc).expect("same layout");
  }
  if t.symmetry != Symmetry::Alternating {
    // the sum above ran over all index tuples; divide out the k! overcount of wedge
    let k: i64 = (1..=t.degree as i64).product();
    out = out.scale(&qf(1, k));
  }
  out
}

/// `sum T^{ij} rho(e_i) (x) rho(e_j)` for any degree-2 tensor.
pub fn action_extend_tensor2(rho: &ActionMap, t: &AlgTensor) -> InvariantTensor2 {
  assert_eq!(t.degree, 2);
  let mut out = InvariantTensor2::zero(rho.layout().clone());
  for (idx, v) in t.nonzero() {
    out.add_product(&rho.images[idx[0]], &rho.images[idx[1]], &v);
  }
  out
}

/// `sigma = pi + 1/2 rho(x)rho(t)`.
pub fn sigma_of(pi: &Multivector, rho: &ActionMap, t: &AlgTensor) -> Result<InvariantTensor2, CalcError> {
  assert_eq!(pi.degree(), 2, "sigma needs a bivector");
  let sym = action_extend_tensor2(rho, t).scale(&qf(1, 2));
  pi.to_tensor2().add(&sym)
}

/// One matrix per site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPoint {
  pub values: Vec<Matrix>,
}

impl GroupPoint {
  pub fn new(layout: &Layout, values: Vec<Matrix>) -> Result<Self, CalcError> {
    if values.len() != layout.n_sites() {
      return Err(CalcError::Dimension { expected: layout.n_sites(), got: values.len() });
    }
    for (i, m) in values.iter().enumerate() {
      let model = layout.site(i).matrix_model().ok_or(CalcError::NoMatrixModel(i))?;
      if m.rows() != model.size() || m.cols() != model.size() {
        return Err(CalcError::BadPoint { site: i, reason: "wrong matrix size".into() });
      }
      let det = m.det();
      if det.is_zero() {
        return Err(CalcError::BadPoint { site: i, reason: "singular matrix".into() });
      }
      if model.is_special() && !det.is_one() {
        return Err(CalcError::BadPoint { site: i, reason: "determinant is not 1".into() });
      }
    }
    Ok(Self { values })
  }

  pub fn identity(layout: &Layout) -> Result<Self, CalcError> {
    let values = (0..layout.n_sites())
      .map(|i| {
        let model = layout.site(i).matrix_model().ok_or(CalcError::NoMatrixModel(i))?;
        Ok(Matrix::identity(model.size()))
      })
      .collect::<Result<_, CalcError>>()?;
    Self::new(layout, values)
  }
}

/// Matrix of `Ad_h` on algebra coordinates.
pub fn adjoint(g: &QuadraticLieAlgebra, h: &Matrix) -> Result<Matrix, CalcError> {
  let model = g.matrix_model().ok_or(CalcError::NoMatrixModel(0))?;
  let hinv = h.inverse().ok_or(CalcError::BadPoint { site: 0, reason: "singular matrix".into() })?;
  let cols: Vec<Vector> = model
    .basis()
    .iter()
    .map(|b| {
      let conj = &(h * b) * &hinv;
      model.coords_of(&conj).ok_or(CalcError::BadPoint { site: 0, reason: "Ad leaves the algebra".into() })
    })
    .collect::<Result<_, _>>()?;
  Ok(Matrix::from_rows(&cols, g.dim()).transpose())
}

/// Per-site `Ad_{g^-1}` matrices at a point: the left-frame images of R generators.
#[derive(Debug, Clone)]
pub struct Frame {
  layout: Arc<Layout>,
  ad_inv: Vec<Matrix>,
}

impl Frame {
  pub fn at(layout: &Arc<Layout>, p: &GroupPoint) -> Result<Self, CalcError> {
    if p.values.len() != layout.n_sites() {
      return Err(CalcError::Dimension { expected: layout.n_sites(), got: p.values.len() });
    }
    let ad_inv = p
      .values
      .iter()
      .enumerate()
      .map(|(i, g)| {
        let ginv = g.inverse().ok_or(CalcError::BadPoint { site: i, reason: "singular matrix".into() })?;
        adjoint(layout.site(i), &ginv).map_err(|e| match e {
          CalcError::NoMatrixModel(_) => CalcError::NoMatrixModel(i),
          CalcError::BadPoint { reason, .. } => CalcError::BadPoint { site: i, reason },
          other => other,
        })
      })
      .collect::<Result<_, _>>()?;
    Ok(Self { layout: layout.clone(), ad_inv })
  }

  pub fn layout(&self) -> &Arc<Layout> {
    &self.layout
  }

  pub fn ad_inv(&self, site: usize) -> &Matrix {
    &self.ad_inv[site]
  }

  /// Sparse image of a generator in the frame.
  pub fn image(&self, g: Generator) -> Vec<(usize, Q)> {
    let off = self.layout.offset(g.site);
    match g.chirality {
      Chirality::L => vec![(off + g.alg_index, Q::one())],
      Chirality::R => {
        let m = &self.ad_inv[g.site];
        (0..m.rows()).filter(|&r| !m[(r, g.alg_index)].is_zero()).map(|r| (off + r, m[(r, g.alg_index)].clone())).collect()
      }
    }
  }

  /// Dense tangent vector of a degree-1 field.
  pub fn vector(&self, x: &Multivector) -> Vector {
    assert_eq!(x.degree(), 1);
    let mut v = vec![Q::zero(); self.layout.total_dim()];
    for (w, c) in x.terms() {
      for (i, y) in self.image(w[0]) {
        v[i] += c * y;
      }
    }
    v
  }

  pub fn evaluate(&self, a: &Multivector) -> Result<PointTensor, CalcError> {
    if !same_layout(&self.layout, a.layout()) {
      return Err(CalcError::LayoutMismatch);
    }
    let mut out = PointTensor::zero(self.layout.total_dim(), a.degree(), true);
    for (word, c) in a.terms() {
      let images: Vec<Vec<(usize, Q)>> = word.iter().map(|&g| self.image(g)).collect();
      let mut stack: Vec<(Vec<usize>, Q)> = vec![(Vec::new(), c.clone())];
      for img in &images {
        let mut next = Vec::new();
        for (idx, val) in &stack {
          for (i, y) in img {
            if !idx.contains(i) {
              let mut n = idx.clone();
              n.push(*i);
              next.push((n, val * y));
            }
          }
        }
        stack = next;
      }
      for (mut idx, val) in stack {
        let negate = sort_indices(&mut idx);
        out.add(idx, if negate { -val } else { val });
      }
    }
    Ok(out)
  }

  pub fn evaluate_tensor2(&self, s: &InvariantTensor2) -> Result<PointTensor, CalcError> {
    if !same_layout(&self.layout, s.layout()) {
      return Err(CalcError::LayoutMismatch);
    }
    let mut out = PointTensor::zero(self.layout.total_dim(), 2, false);
    for (&(a, b), c) in s.terms() {
      let ia = self.image(a);
      let ib = self.image(b);
      for (i, x) in &ia {
        for (j, y) in &ib {
          out.add(vec![*i, *j], c * x * y);
        }
      }
    }
    Ok(out)
  }
}

fn sort_indices(idx: &mut [usize]) -> bool {
  let mut negate = false;
  for i in 1..idx.len() {
    let mut j = i;
    while j > 0 && idx[j - 1] > idx[j] {
      idx.swap(j - 1, j);
      negate = !negate;
      j -= 1;
    }
  }
  negate
}

pub fn evaluate_at(a: &Multivector, p: &GroupPoint) -> Result<PointTensor, CalcError> {
  Frame::at(a.layout(), p)?.evaluate(a)
}

/// Components in the left-trivialized frame. Alternating tensors keep only
/// strictly increasing index tuples; general ones keep every tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointTensor {
  pub dim: usize,
  pub degree: usize,
  pub alternating: bool,
  comps: BTreeMap<Vec<usize>, Q>,
}

impl PointTensor {
  pub fn zero(dim: usize, degree: usize, alternating: bool) -> Self {
    Self { dim, degree, alternating, comps: BTreeMap::new() }
  }

  fn add(&mut self, idx: Vec<usize>, val: Q) {
    if val.is_zero() {
      return;
    }
    let slot = self.comps.entry(idx.clone()).or_insert_with(Q::zero);
    *slot += val;
    if slot.is_zero() {
      self.comps.remove(&idx);
    }
  }

  pub fn get(&self, idx: &[usize]) -> Q {
    if self.alternating {
      let mut s = idx.to_vec();
      let negate = sort_indices(&mut s);
      if s.windows(2).any(|w| w[0] == w[1]) {
        return Q::zero();
      }
      let v = self.comps.get(&s).cloned().unwrap_or_else(Q::zero);
      if negate {
        -v
      } else {
        v
      }
    } else {
      self.comps.get(idx).cloned().unwrap_or_else(Q::zero)
    }
  }

  pub fn components(&self) -> &BTreeMap<Vec<usize>, Q> {
    &self.comps
  }

  pub fn is_zero(&self) -> bool {
    self.comps.is_empty()
  }

  pub fn scale(&self, s: &Q) -> Self {
    let mut out = Self::zero(self.dim, self.degree, self.alternating);
    for (k, v) in &self.comps {
      out.add(k.clone(), v * s);
    }
    out
  }

  pub fn sub(&self, other: &Self) -> Self {
    assert_eq!((self.dim, self.degree, self.alternating), (other.dim, other.degree, other.alternating));
    let mut out = self.clone();
    for (k, v) in &other.comps {
      out.add(k.clone(), -v.clone());
    }
    out
  }

  pub fn plus(&self, other: &Self) -> Self {
    self.sub(&other.scale(&-Q::one()))
  }

  /// Pointwise wedge of alternating tensors.
  pub fn wedge(&self, other: &Self) -> Self {
    assert!(self.alternating && other.alternating);
    let mut out = Self::zero(self.dim, self.degree + other.degree, true);
    for (a, x) in &self.comps {
      for (b, y) in &other.comps {
        if a.iter().any(|i| b.contains(i)) {
          continue;
        }
        let mut idx = a.clone();
        idx.extend_from_slice(b);
        let negate = sort_indices(&mut idx);
        let v = x * y;
        out.add(idx, if negate { -v } else { v });
      }
    }
    out
  }

  /// Dense matrix of a degree-2 tensor.
  pub fn to_matrix(&self) -> Matrix {
    assert_eq!(self.degree, 2);
    let mut m = Matrix::zeros(self.dim, self.dim);
    for (k, v) in &self.comps {
      m[(k[0], k[1])] += v.clone();
      if self.alternating {
        m[(k[1], k[0])] -= v.clone();
      }
    }
    m
  }

  /// Contraction with one covector per slot.
  pub fn contract(&self, covs: &[&[Q]]) -> Q {
    assert_eq!(covs.len(), self.degree);
    let mut total = Q::zero();
    for (k, v) in &self.comps {
      if self.alternating {
        // sum over permutations of the stored sorted tuple
        total += v * alternating_contract(k, covs);
      } else {
        let mut p = v.clone();
        for (slot, &i) in k.iter().enumerate() {
          p *= &covs[slot][i];
        }
        total += p;
      }
    }
    total
  }
}

fn alternating_contract(idx: &[usize], covs: &[&[Q]]) -> Q {
  // determinant of covs[slot][idx[l]]
  let k = idx.len();
  let m = Matrix::from_fn(k, k, |slot, l| covs[slot][idx[l]].clone());
  m.det()
}

impl Serialize for PointTensor {
  fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(self.comps.len()))?;
    for (k, v) in &self.comps {
      seq.serialize_element(&(k, fmt_q(v)))?;
    }
    seq.end()
  }
}

/// Matrix of `S(alpha, beta)` over two covector lists.
pub fn pairing_matrix(
  s: &InvariantTensor2,
  p: &GroupPoint,
  cov_a: &[Vector],
  cov_b: &[Vector],
) -> Result<Matrix, CalcError> {
  let t = Frame::at(s.layout(), p)?.evaluate_tensor2(s)?.to_matrix();
  pairing_from_matrix(&t, cov_a, cov_b)
}

pub fn pairing_from_matrix(t: &Matrix, cov_a: &[Vector], cov_b: &[Vector]) -> Result<Matrix, CalcError> {
  let n = t.rows();
  for c in cov_a.iter().chain(cov_b) {
    if c.len() != n {
      return Err(CalcError::Dimension { expected: n, got: c.len() });
    }
  }
  let tb: Vec<Vector> = cov_b.iter().map(|b| t.mul_vec(b)).collect();
  Ok(Matrix::from_fn(cov_a.len(), cov_b.len(), |i, j| crate::linalg::dot(&cov_a[i], &tb[j])))
}

fn small_rational<R: Rng>(rng: &mut R, nonzero: bool) -> Q {
  loop {
    let n: i64 = rng.gen_range(-7..=7);
    let d: i64 = rng.gen_range(1..=7);
    if !nonzero || n != 0 {
      return qf(n, d);
    }
  }
}

/// Random group element: a product of 4-8 factors, each a shear `I + aX` for a
/// square-zero basis element `X` or a scaling `I + (l-1)X` for an idempotent one.
/// Every factor has denominators at most 7, so every entry's denominator is at
/// most `7^8`. Shears keep the determinant at 1.
pub fn random_site_value<R: Rng>(g: &QuadraticLieAlgebra, rng: &mut R) -> Option<Matrix> {
  let model = g.matrix_model()?;
  let n = model.size();
  let id = Matrix::identity(n);
  let mut shears = Vec::new();
  let mut scalings = Vec::new();
  for b in model.basis() {
    let sq = b * b;
    if sq.is_zero() {
      shears.push(b.clone());
    } else if sq == *b {
      scalings.push(b.clone());
    }
  }
  if shears.is_empty() && scalings.is_empty() {
    return None;
  }
  let count = rng.gen_range(4..=8);
  let mut m = id.clone();
  for _ in 0..count {
    let pick = rng.gen_range(0..shears.len() + scalings.len());
    let factor = if pick < shears.len() {
      &id + &shears[pick].scale(&small_rational(rng, true))
    } else {
      let num: i64 = rng.gen_range(1..=7);
      let den: i64 = rng.gen_range(1..=7);
      let lam = qf(num, den);
      &id + &scalings[pick - shears.len()].scale(&(lam - q(1)))
    };
    m = &m * &factor;
  }
  Some(m)
}

pub fn random_point<R: Rng>(layout: &Layout, rng: &mut R) -> Result<GroupPoint, CalcError> {
  let values = (0..layout.n_sites())
    .map(|i| random_site_value(layout.site(i), rng).ok_or(CalcError::NoSampler(i)))
    .collect::<Result<_, _>>()?;
  GroupPoint::new(layout, values)
}

/// `count` deterministic points from a seed.
pub fn seeded_points(layout: &Layout, seed: u64, count: usize) -> Result<Vec<GroupPoint>, CalcError> {
  use rand::SeedableRng;
  let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
  (0..count).map(|_| random_point(layout, &mut rng)).collect()
}

/// Checks a multivector identity `a = b` by exact evaluation at every point.
pub fn agree_at(a: &Multivector, b: &Multivector, points: &[GroupPoint]) -> Result<bool, CalcError> {
  if a == b {
    return Ok(true);
  }
  let diff = a.sub(b)?;
  for p in points {
    if !evaluate_at(&diff, p)?.is_zero() {
      return Ok(false);
    }
  }
  Ok(true)
}

impl Serialize for Generator {
  fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&self.to_string())
  }
}

#[cfg(test)]
mod tests {
  use super::*;
  use crate::qla::sl2;

  fn layout1() -> Arc<Layout> {
    Layout::uniform(Arc::new(sl2()), 1)
  }

  fn gen(l: &Arc<Layout>, c: Chirality, i: usize) -> Multivector {
    Multivector::generator(l.clone(), Generator::new(0, c, i))
  }

  #[test]
  fn generator_brackets() {
    let l = layout1();
    // [e, f] = h
    let ef = gen(&l, Chirality::L, 0).schouten(&gen(&l, Chirality::L, 1)).unwrap();
    assert_eq!(ef, gen(&l, Chirality::L, 2));
    let ef_r = gen(&l, Chirality::R, 0).schouten(&gen(&l, Chirality::R, 1)).unwrap();
    assert_eq!(ef_r, gen(&l, Chirality::R, 2).scale(&q(-1)));
    assert!(gen(&l, Chirality::L, 0).schouten(&gen(&l, Chirality::R, 1)).unwrap().is_zero());
  }

  #[test]
  fn canonical_form_absorbs_signs() {
    let l = layout1();
    let a = gen(&l, Chirality::L, 0);
    let b = gen(&l, Chirality::R, 1);
    let ab = a.wedge(&b).unwrap();
    let ba = b.wedge(&a).unwrap();
    assert_eq!(ab.add(&ba).unwrap(), Multivector::zero(l.clone(), 2));
    assert!(a.wedge(&a).unwrap().is_zero());
  }

  #[test]
  fn right_generator_images() {
    let l = layout1();
    let g = Matrix::from_rows(&[vec![q(1), q(1)], vec![q(0), q(1)]], 2);
    let p = GroupPoint::new(&l, vec![g]).unwrap();
    let frame = Frame::at(&l, &p).unwrap();
    assert_eq!(frame.vector(&gen(&l, Chirality::R, 0)), vec![q(1), q(0), q(0)]);
    // g^-1 h g = h + 2e
    assert_eq!(frame.vector(&gen(&l, Chirality::R, 2)), vec![q(2), q(0), q(1)]);
  }

  #[test]
  fn identity_point_merges_chiralities() {
    let l = layout1();
    let p = GroupPoint::identity(&l).unwrap();
    let d = gen(&l, Chirality::L, 1).sub(&gen(&l, Chirality::R, 1)).unwrap();
    assert!(evaluate_at(&d, &p).unwrap().is_zero());
  }

  #[test]
  fn seeded_points_are_deterministic_and_special() {
    let l = Layout::uniform(Arc::new(sl2()), 2);
    let a = seeded_points(&l, 7, 5).unwrap();
    let b = seeded_points(&l, 7, 5).unwrap();
    assert_eq!(a, b);
    for p in &a {
      for m in &p.values {
        assert!(m.det().is_one());
      }
    }
  }

  #[test]
  fn bad_points_rejected() {
    let l = layout1();
    let g = Matrix::from_rows(&[vec![q(2), q(0)], vec![q(0), q(1)]], 2);
    assert!(matches!(GroupPoint::new(&l, vec![g]), Err(CalcError::BadPoint { .. })));
  }
}
