//! Manin pairs `(d, h)` with a Lagrangian complement, the twisted bivector
//! `pi' = pi - rho(tau)` of a `d`-quasi-Poisson space, moment maps into
//! `d`-spaces, and the induction, fusion and conjugation of `D/H`-valued
//! moment maps for `D = G x G`, `H = G_diag`.
//!
//! Spaces are moduli spaces; `X` is always the left leaf `mu_L = 1` inside a
//! central pair, and structures on `X` are compared pointwise in the
//! coordinates of the ambient group product.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::Zero;
use serde::Serialize;

use crate::invcalc::{action_extend, CalcError, Frame, GroupPoint, Multivector, PointTensor};
use crate::linalg::{Matrix, Subspace, Vector};
use crate::moduli::{stabilizer_verdict, ArcMap, HolonomyWord, ModuliError, ModuliSpace, QpData};
use crate::qla::{AlgTensor, AlgebraError, QuadraticLieAlgebra, Subalgebra, Symmetry};
use crate::rational::{qf, Q};
use crate::reduction::{align_point, fuse_central_pairs, CentralPairModel, FusedPair, ReductionError, TargetMap};
use crate::surface::{ArcKind, SurfaceRecipe};

#[derive(Debug, thiserror::Error)]
pub enum MomentError {
  #[error(transparent)]
  Moduli(#[from] ModuliError),
  #[error(transparent)]
  Calc(#[from] CalcError),
  #[error(transparent)]
  Algebra(#[from] AlgebraError),
  #[error(transparent)]
  Reduction(#[from] ReductionError),
  #[error("t is degenerate")]
  DegenerateT,
  #[error("{0} is not Lagrangian")]
  NotLagrangian(&'static str),
  #[error("h and the complement do not span d")]
  NotComplementary,
  #[error("the acting algebra is not the d of the Manin pair")]
  AlgebraMismatch,
  #[error("hypothesis failed: {0}")]
  Hypothesis(String),
  #[error("unsupported: {0}")]
  Unsupported(String),
}

/// `d = h + h*` with `h` a Lagrangian subalgebra and `h*` a Lagrangian complement.
#[derive(Debug, Clone)]
pub struct ManinPair {
  pub d: Arc<QuadraticLieAlgebra>,
  pub h: Subalgebra,
  /// `e_i`, rows in `d` coordinates.
  pub h_basis: Vec<Vector>,
  /// `e^i` spanning the complement, with `<e^i, e_j> = delta_ij`.
  pub dual_basis: Vec<Vector>,
  /// `delta(e_c) = sum cobracket[c, a, b] e_a (x) e_b`, indices in `h`.
  pub cobracket: AlgTensor,
  /// Trivector in `h`: the `h` component of `[e^a, e^b]` paired with `e^c`.
  pub phi: AlgTensor,
  /// `1/2 sum e_i ^ e^i` in `d` coordinates.
  pub tau: AlgTensor,
  /// The bracket of `d` agrees with the one rebuilt from `h`, `delta` and `phi`.
  pub bracket_reconstructed: bool,
}

fn is_lagrangian(metric: &Matrix, rows: &[Vector], dim: usize) -> bool {
  let b = Matrix::from_rows(rows, dim);
  2 * b.rank() == dim && metric.congruence(&b, &b).is_zero()
}

/// Builds the Manin pair data from `h` and a spanning set of the complement.
pub fn manin_pair_data(d: Arc<QuadraticLieAlgebra>, h: &Subalgebra, h_star: &[Vector]) -> Result<ManinPair, MomentError> {
  let dim = d.dim();
  let metric = d.metric().ok_or(MomentError::DegenerateT)?;
  if h.parent().as_ref() != d.as_ref() {
    return Err(MomentError::AlgebraMismatch);
  }
  let e = h.span().basis().to_vec();
  if !is_lagrangian(&metric, &e, dim) {
    return Err(MomentError::NotLagrangian("h"));
  }
  let comp = Subspace::span(h_star, dim);
  if !is_lagrangian(&metric, comp.basis(), dim) {
    return Err(MomentError::NotLagrangian("the complement"));
  }
  if h.span().sum(&comp).dim() != dim {
    return Err(MomentError::NotComplementary);
  }
  let n = e.len();
  let em = Matrix::from_rows(&e, dim);
  let fm = comp.basis_matrix();
  // <f_k, e_j>, then e^i = sum_k (G^-1)_ik f_k
  let pairing = metric.congruence(&fm, &em);
  let dual_m = &pairing.inverse().ok_or(MomentError::NotComplementary)? * &fm;
  let dual = dual_m.row_vecs();

  // coordinates in the basis (e_1..e_n, e^1..e^n)
  let frame = em.vstack(&dual_m);
  let to_coords = frame.transpose().inverse().ok_or(MomentError::NotComplementary)?;
  let coords = |x: &[Q]| to_coords.mul_vec(x);

  let mut cobracket = AlgTensor::zero(n, 3, Symmetry::None);
  let mut phi = AlgTensor::zero(n, 3, Symmetry::Alternating);
  for a in 0..n {
    for b in 0..n {
      let c = coords(&d.bracket(&dual[a], &dual[b]));
      for k in 0..n {
        let f = phi.index(&[a, b, k]);
        phi.comps[f] = c[k].clone();
        let f = cobracket.index(&[k, a, b]);
        cobracket.comps[f] = c[n + k].clone();
      }
    }
  }

  // [e_a, e^b] = sum_c delta[a, b, c] e_c - sum_c (e_b-coefficient of [e_a, e_c]) e^c
  let mut reconstructed = true;
  for a in 0..n {
    let brackets: Vec<Vector> = (0..n).map(|c| coords(&d.bracket(&e[a], &e[c]))).collect();
    if brackets.iter().any(|c| c[n..].iter().any(|x| !x.is_zero())) {
      reconstructed = false;
    }
    for b in 0..n {
      let actual = coords(&d.bracket(&e[a], &dual[b]));
      let mut rebuilt = vec![Q::zero(); 2 * n];
      for c in 0..n {
        rebuilt[c] = cobracket.get(&[a, b, c]).clone();
        rebuilt[n + c] = -brackets[c][b].clone();
      }
      if actual != rebuilt {
        reconstructed = false;
      }
    }
  }

  let canonical = &em.transpose() * &dual_m;
  let tau_m = (&canonical - &canonical.transpose()).scale(&qf(1, 2));
  Ok(ManinPair {
    d,
    h: h.clone(),
    h_basis: e,
    dual_basis: dual,
    cobracket,
    phi,
    tau: AlgTensor::from_matrix(&tau_m, Symmetry::Alternating),
    bracket_reconstructed: reconstructed,
  })
}

/// A Lagrangian complement of a Lagrangian `h`, built from coordinate vectors
/// and corrected to be isotropic.
pub fn lagrangian_complement(h: &Subalgebra) -> Result<Vec<Vector>, MomentError> {
  let d = h.parent();
  let dim = d.dim();
  let metric = d.metric().ok_or(MomentError::DegenerateT)?;
  let e = h.span().basis().to_vec();
  let mut w = Vec::new();
  let mut span = h.span().clone();
  for i in 0..dim {
    let v = d.basis_vec(i);
    if !span.contains(&v) {
      span = span.sum(&Subspace::span(&[v.clone()], dim));
      w.push(v);
    }
  }
  let em = Matrix::from_rows(&e, dim);
  let wm = Matrix::from_rows(&w, dim);
  let pairing = metric.congruence(&wm, &em);
  let dual = &pairing.inverse().ok_or(MomentError::NotLagrangian("h"))? * &wm;
  // e^i - 1/2 sum_j <e^i, e^j> e_j
  let gram = metric.congruence(&dual, &dual);
  let correction = &gram.scale(&qf(1, 2)) * &em;
  Ok((&dual - &correction).row_vecs())
}

/// `g_diag` with the antidiagonal complement in `g + g-bar`.
pub fn diagonal_pair(d: Arc<QuadraticLieAlgebra>, g_dim: usize) -> Result<ManinPair, MomentError> {
  if d.dim() != 2 * g_dim {
    return Err(MomentError::Unsupported("the diagonal pair needs exactly two copies".into()));
  }
  let h = crate::reduction::diagonal_subalgebra(d.clone(), g_dim)?;
  let anti: Vec<Vector> = (0..g_dim)
    .map(|i| {
      let mut v = vec![Q::zero(); 2 * g_dim];
      v[i] = Q::from_integer(1.into());
      v[g_dim + i] = Q::from_integer((-1).into());
      v
    })
    .collect();
  manin_pair_data(d, &h, &anti)
}

impl ManinPair {
  pub fn dim_h(&self) -> usize {
    self.h_basis.len()
  }

  fn h_matrix(&self) -> Matrix {
    Matrix::from_rows(&self.h_basis, self.d.dim())
  }

  /// `sum e_i (x) e^i` as a `d x d` matrix.
  pub fn canonical_element(&self) -> Matrix {
    &self.h_matrix().transpose() * &Matrix::from_rows(&self.dual_basis, self.d.dim())
  }

  pub fn tau_matrix(&self) -> Matrix {
    let dim = self.d.dim();
    Matrix::from_fn(dim, dim, |i, j| self.tau.get(&[i, j]).clone())
  }

  pub fn phi_in_d(&self) -> AlgTensor {
    self.phi.transform(&self.h_matrix())
  }

  /// `delta(e_c)` as an alternating tensor on `d`.
  pub fn cobracket_in_d(&self, c: usize) -> AlgTensor {
    let n = self.dim_h();
    let mut t = AlgTensor::zero(n, 2, Symmetry::Alternating);
    for a in 0..n {
      for b in 0..n {
        let f = t.index(&[a, b]);
        t.comps[f] = self.cobracket.get(&[c, a, b]).clone();
      }
    }
    t.transform(&self.h_matrix())
  }

  pub fn cobracket_vanishes(&self) -> bool {
    self.cobracket.is_zero()
  }

  /// `tau_other - tau_self` when `other` has the same `h`; it lies in `h ^ h`.
  pub fn twist_to(&self, other: &ManinPair) -> Result<Matrix, MomentError> {
    if self.h.span() != other.h.span() || self.d != other.d {
      return Err(MomentError::Hypothesis("twists relate complements of the same h".into()));
    }
    Ok(&other.tau_matrix() - &self.tau_matrix())
  }

  /// Whether a `d x d` matrix lies in `h (x) h`.
  pub fn in_h_tensor_h(&self, m: &Matrix) -> bool {
    let hs = self.h.span();
    m.column_space().basis().iter().all(|v| hs.contains(v)) && m.transpose().column_space().basis().iter().all(|v| hs.contains(v))
  }
}

/// A `d`-quasi-Poisson moduli space seen as an `(h, d; h*)`-space through
/// `pi' = pi - rho(tau)`.
#[derive(Debug, Clone)]
pub struct GenQuasiPoissonData {
  pub pair: ManinPair,
  pub data: QpData,
  pub pi_prime: Multivector,
  /// `rho(e_i)` for the basis of `h`.
  pub h_images: Vec<Multivector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StructureCheck {
  pub points: usize,
  /// `[pi', pi'] / 2 = rho(phi_h)`.
  pub bracket: bool,
  /// `[rho(u), pi'] = -rho(delta(u))` on a basis of `h`.
  pub cobracket: bool,
  /// `pi' + sum rho(e_i) (x) rho(e^i) = sigma`.
  pub sigma_reconstruction: bool,
}

impl StructureCheck {
  pub fn passed(&self) -> bool {
    self.bracket && self.cobracket && self.sigma_reconstruction
  }
}

fn same_algebra(a: &QuadraticLieAlgebra, b: &QuadraticLieAlgebra) -> bool {
  a.dim() == b.dim() && a.t() == b.t() && (0..a.dim()).all(|i| (0..a.dim()).all(|j| a.bracket(&a.basis_vec(i), &a.basis_vec(j)) == b.bracket(&b.basis_vec(i), &b.basis_vec(j))))
}

pub fn restrict_structure(m: &ModuliSpace, pair: &ManinPair) -> Result<GenQuasiPoissonData, MomentError> {
  let rho = m.data.rho();
  if !same_algebra(&rho.acting, &pair.d) {
    return Err(MomentError::AlgebraMismatch);
  }
  let pi_prime = m.data.pi.sub(&action_extend(&rho, &pair.tau))?;
  let h_images = pair.h_basis.iter().map(|u| rho.apply(u)).collect();
  Ok(GenQuasiPoissonData { pair: pair.clone(), data: m.data.clone(), pi_prime, h_images })
}

/// Whether a pointwise tensor vanishes on the basic covectors.
fn vanishes_on(t: &PointTensor, basic: &Subspace) -> bool {
  if basic.dim() == basic.ambient() {
    return t.is_zero();
  }
  let b = basic.basis();
  let k = b.len();
  match t.degree {
    2 => (0..k).all(|i| (0..k).all(|j| t.contract(&[&b[i], &b[j]]).is_zero())),
    3 => (0..k).all(|i| {
      (i + 1..k).all(|j| (j + 1..k).all(|l| t.contract(&[&b[i], &b[j], &b[l]]).is_zero()))
    }),
    _ => t.is_zero(),
  }
}

impl GenQuasiPoissonData {
  /// `pi'` at `p` as a matrix on left-frame covectors.
  pub fn pi_prime_at(&self, p: &GroupPoint) -> Result<Matrix, MomentError> {
    let frame = Frame::at(&self.data.layout, p)?;
    Ok(frame.evaluate(&self.pi_prime)?.to_matrix())
  }

  pub fn check(&self, points: &[GroupPoint]) -> Result<StructureCheck, MomentError> {
    let rho = self.data.rho();
    let pipi = self.pi_prime.schouten(&self.pi_prime)?;
    let bracket_defect = pipi.sub(&action_extend(&rho, &self.pair.phi_in_d()).scale(&Q::from_integer(2.into())))?;
    let cobracket_defects: Vec<Multivector> = self
      .h_images
      .iter()
      .enumerate()
      .map(|(c, img)| Ok(img.schouten(&self.pi_prime)?.add(&action_extend(&rho, &self.pair.cobracket_in_d(c)))?))
      .collect::<Result<_, CalcError>>()?;
    let canonical = self.pair.canonical_element();
    let mut out = StructureCheck { points: points.len(), bracket: true, cobracket: true, sigma_reconstruction: true };
    for p in points {
      let pd = self.data.at(p)?;
      let frame = &pd.frame;
      if !vanishes_on(&frame.evaluate(&bracket_defect)?, &pd.basic) {
        out.bracket = false;
      }
      for defect in &cobracket_defects {
        if !vanishes_on(&frame.evaluate(defect)?, &pd.basic) {
          out.cobracket = false;
        }
      }
      let pi_prime = frame.evaluate(&self.pi_prime)?.to_matrix();
      let rebuilt = &pi_prime + &canonical.congruence(&pd.rho, &pd.rho);
      let b = pd.basic.basis_matrix();
      if rebuilt.congruence(&b, &b) != pd.sigma.congruence(&b, &b) {
        out.sigma_reconstruction = false;
      }
    }
    Ok(out)
  }
}

/// Pointwise `(h, d; h*)` data on `X` with its moment map, in the coordinates
/// of the ambient group product.
#[derive(Debug, Clone)]
pub struct LeafPoint {
  pub basic: Subspace,
  pub pi_prime: Matrix,
  /// Columns `rho(e_i)` for the basis of `h`.
  pub rho_h: Matrix,
  pub moment: TargetMap,
  /// Maps whose level set through the point is `X`; empty when `X` is the whole space.
  pub fibre: Vec<TargetMap>,
  pub constraints: Vec<Vector>,
}

impl LeafPoint {
  /// `X = mu_L^-1(mu_L(p))` inside a central pair, with `mu = mu_R`.
  pub fn from_central(model: &CentralPairModel, pair: &ManinPair) -> Result<Self, MomentError> {
    if !same_algebra(&model.acting, &pair.d) {
      return Err(MomentError::AlgebraMismatch);
    }
    if model.right.is_empty() {
      return Err(MomentError::Hypothesis("no right map to serve as moment map".into()));
    }
    let moment = product_target(&model.right);
    let pi_prime = &model.pi - &pair.tau_matrix().congruence(&model.rho, &model.rho);
    let h_cols = Matrix::from_rows(&pair.h_basis, pair.d.dim()).transpose();
    Ok(Self { basic: model.basic.clone(), pi_prime, rho_h: &model.rho * &h_cols, moment, fibre: model.left.clone(), constraints: model.constraints.clone() })
  }

  /// A `g`-quasi-Poisson moduli space with one acting copy, as a
  /// `(g_diag, g + g-bar; h*)`-space with moment map its boundary holonomy.
  pub fn from_moment_space(x: &ModuliSpace, p: &GroupPoint, pair: &ManinPair) -> Result<Self, MomentError> {
    let g = x.algebra();
    let gd = g.dim();
    let diag = crate::reduction::diagonal_subalgebra(pair.d.clone(), gd)?;
    if pair.d.dim() != 2 * gd || pair.h.span() != diag.span() {
      return Err(MomentError::Unsupported("moment spaces are realized for h = g_diag only".into()));
    }
    let arc = moment_arc(x)?;
    let pd = x.data.at(p)?;
    let h = arc.word.eval(p);
    let ad_hinv = crate::invcalc::adjoint(g, &h.inverse().expect("group element"))?;
    // (u, v) |-> u - Ad_{h^-1} v on N = G
    let action = Matrix::identity(gd).hstack(&-&ad_hinv);
    let moment = TargetMap { value: h, differential: arc.word.differential(g, x.layout(), p)?, action };
    let firsts: Vec<Vector> = pair.h_basis.iter().map(|e| e[..gd].to_vec()).collect();
    let rho_h = &pd.rho * &Matrix::from_rows(&firsts, gd).transpose();
    // pi' = pi for the antidiagonal complement; other complements twist it
    let twist = diagonal_pair(pair.d.clone(), gd)?.twist_to(pair)?;
    // a tensor in h (x) h has equal blocks; the first is its matrix on g
    let tw_h = Matrix::from_fn(gd, gd, |i, j| twist[(i, j)].clone());
    let pi_prime = &pd.pi - &tw_h.congruence(&pd.rho, &pd.rho);
    Ok(Self { basic: pd.basic, pi_prime, rho_h, moment, fibre: Vec::new(), constraints: Vec::new() })
  }

  pub fn tangent_dim(&self) -> usize {
    self.pi_prime.rows()
  }
}

/// Several maps as one map to the product of their targets.
pub fn product_target(maps: &[TargetMap]) -> TargetMap {
  let mut it = maps.iter();
  let first = it.next().expect("at least one map").clone();
  it.fold(first, |acc, m| {
    let (a, b) = (acc.value.rows(), m.value.rows());
    let value = Matrix::from_fn(a + b, a + b, |i, j| match (i < a, j < a) {
      (true, true) => acc.value[(i, j)].clone(),
      (false, false) => m.value[(i - a, j - a)].clone(),
      _ => Q::zero(),
    });
    TargetMap { value, differential: acc.differential.vstack(&m.differential), action: acc.action.vstack(&m.action) }
  })
}

/// The boundary arc from the single acting point back to itself.
pub fn moment_arc(x: &ModuliSpace) -> Result<ArcMap, MomentError> {
  let [copy] = x.data.copies.as_slice() else {
    return Err(MomentError::Unsupported("moment spaces need exactly one acting point".into()));
  };
  if copy.sign != crate::surface::Sign::Plus {
    return Err(MomentError::Unsupported("the acting point must be a + point".into()));
  }
  let arc = x
    .report
    .arcs
    .iter()
    .find(|a| a.kind == ArcKind::Neither && a.from == copy.vertex && a.to == copy.vertex)
    .ok_or_else(|| MomentError::Hypothesis("no boundary arc returns to the acting point".into()))?;
  Ok(ArcMap { word: HolonomyWord::new(arc.path.clone()), from: arc.from, to: arc.to })
}

#[derive(Debug, Clone, Serialize)]
pub struct LeafStructure {
  pub leaf_dim: usize,
  /// `pi'(., alpha)` is tangent to `X` for every covector.
  pub tangent: bool,
  /// `rho(h)` and the `pi'(., alpha)` span `T X`.
  pub spans: bool,
  /// The untwisted `pi` is tangent as well (false in general).
  pub untwisted_tangent: bool,
}

fn tangent_space(basic: &Subspace, fibre: &[TargetMap], constraints: &[Vector], n: usize) -> Subspace {
  let b = basic.basis_matrix();
  let mut d = Matrix::from_rows(constraints, n);
  for m in fibre {
    d = d.vstack(&m.differential);
  }
  let kernel = if d.rows() == 0 { Matrix::identity(n).row_vecs() } else { d.nullspace() };
  Subspace::span(&kernel.iter().map(|v| b.mul_vec(v)).collect::<Vec<_>>(), basic.dim())
}

/// Tangency of `pi'` to the left leaf `X` through the point, and whether `X`
/// is a single quasi-symplectic leaf there. `h` must stabilize `mu_L(p)`.
pub fn leaf_structure_check(model: &CentralPairModel, pair: &ManinPair) -> Result<LeafStructure, MomentError> {
  let dd = pair.d.dim();
  let mut stacked = Matrix::zeros(0, dd);
  for m in &model.left {
    stacked = stacked.vstack(&m.action);
  }
  let stab = if stacked.rows() == 0 { Subspace::full(dd) } else { Subspace::span(&stacked.nullspace(), dd) };
  if &stab != pair.h.span() {
    return Err(MomentError::Hypothesis("h is not the stabilizer of the left value".into()));
  }
  let x = LeafPoint::from_central(model, pair)?;
  let n = x.tangent_dim();
  let tx = tangent_space(&x.basic, &x.fibre, &x.constraints, n);
  let b = x.basic.basis_matrix();
  let image = |m: &Matrix| (&(&b * m) * &b.transpose()).column_space();
  let moved = image(&x.pi_prime);
  let orbit = (&b * &x.rho_h).column_space();
  Ok(LeafStructure {
    leaf_dim: tx.dim(),
    tangent: tx.contains_space(&moved),
    spans: moved.sum(&orbit) == tx,
    untwisted_tangent: tx.contains_space(&image(&model.pi)),
  })
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentVerdict {
  /// `(1 (x) mu_*) pi' = -(rho (x) 1)(Z_N)` on basic covectors.
  pub identity: bool,
  /// `d mu . rho(u) = rho_N(u)` for `u` in `h`.
  pub equivariant: bool,
  pub stabilizer_coisotropic: bool,
}

impl MomentVerdict {
  pub fn passed(&self) -> bool {
    self.identity && self.equivariant && self.stabilizer_coisotropic
  }
}

pub fn moment_condition_check(x: &LeafPoint, pair: &ManinPair) -> Result<MomentVerdict, MomentError> {
  let mu = &x.moment;
  let stab = Subspace::span(&mu.action.nullspace(), pair.d.dim());
  let (coisotropic, _) = stabilizer_verdict(&pair.d, &stab);
  if !coisotropic {
    return Err(MomentError::Hypothesis("stabilizer of mu(p) is not coisotropic".into()));
  }
  let b = x.basic.basis_matrix();
  let h_cols = Matrix::from_rows(&pair.h_basis, pair.d.dim()).transpose();
  let dual_cols = Matrix::from_rows(&pair.dual_basis, pair.d.dim()).transpose();
  // Z_N = sum e_i (x) rho_N(e^i)
  let z = &x.rho_h * &(&mu.action * &dual_cols).transpose();
  let lhs = &x.pi_prime * &mu.differential.transpose();
  Ok(MomentVerdict {
    identity: (&b * &(&lhs + &z)).is_zero(),
    equivariant: &mu.differential * &x.rho_h == &mu.action * &h_cols,
    stabilizer_coisotropic: coisotropic,
  })
}

/// Symmetric part of `sigma^-1` against `1/2 mu^* s` for a `g`-quasi-Poisson
/// space with one acting point and its boundary holonomy.
#[derive(Debug, Clone, Serialize)]
pub struct GroupValuedCheck {
  pub sigma_invertible: bool,
  pub symmetric_part_matches: bool,
}

pub fn group_valued_check(x: &ModuliSpace, p: &GroupPoint) -> Result<GroupValuedCheck, MomentError> {
  let g = x.algebra();
  let metric = g.metric().ok_or(MomentError::DegenerateT)?;
  let arc = moment_arc(x)?;
  let pd = x.data.at(p)?;
  let k = pd.sigma_on_basic();
  let Some(k_inv) = k.inverse() else {
    return Ok(GroupValuedCheck { sigma_invertible: false, symmetric_part_matches: false });
  };
  let b = pd.basic.basis_matrix();
  // tangent vectors in basic-dual coordinates y lift to B^T (B B^T)^-1 y
  let lift = &b.transpose() * &(&b * &b.transpose()).inverse().expect("basis has full rank");
  let dmu = &arc.word.differential(g, x.layout(), p)? * &lift;
  let pulled = metric.congruence(&dmu.transpose(), &dmu.transpose());
  let sym = (&k_inv + &k_inv.transpose()).scale(&qf(1, 2));
  Ok(GroupValuedCheck { sigma_invertible: true, symmetric_part_matches: sym == pulled.scale(&qf(1, 2)) })
}

/// `M = (D x X) / H` for `D = G x G`, `H = G_diag`, realized as `X` with a
/// disk glued at its acting point: `M = G x X` with `mu_L` the inverse of the
/// disk edge and `mu_R` the disk edge times the moment map of `X`.
#[derive(Debug, Clone)]
pub struct InducedPair {
  pub space: ModuliSpace,
  pub pair: ManinPair,
  pub disk_edge: usize,
}

impl InducedPair {
  /// The point of `M` over `mu_L = 1` above a point of `X`.
  pub fn slice_point(&self, px: &GroupPoint) -> GroupPoint {
    let mut values = px.values.clone();
    values.push(Matrix::identity(px.values[0].rows()));
    GroupPoint { values }
  }
}

pub fn induce_central_pair(x: &ModuliSpace) -> Result<InducedPair, MomentError> {
  let arc = moment_arc(x)?;
  let name = x
    .surface
    .vertex(arc.from)
    .and_then(|v| v.names.first().cloned())
    .ok_or_else(|| MomentError::Hypothesis("acting point has no name".into()))?;
  let k = x.recipe.disks;
  let recipe = x.recipe.disjoint_union(&SurfaceRecipe::new(1)).glue(&format!("{k}+"), &name);
  let space = ModuliSpace::build(&recipe, x.algebra().clone())?;
  let maps = space.central_maps();
  let single = |a: &[ArcMap], exponent: i8| {
    matches!(a, [m] if m.word.steps.len() == 1 && m.word.steps[0].edge == k && m.word.steps[0].exponent == exponent)
  };
  if !single(&maps.left, -1) || maps.right.len() != 1 {
    return Err(MomentError::Hypothesis("glued disk does not carry the left map".into()));
  }
  let pair = diagonal_pair(space.data.acting_algebra(), x.algebra().dim())?;
  Ok(InducedPair { space, pair, disk_edge: k })
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundTrip {
  pub left_is_identity: bool,
  pub pi_prime: bool,
  pub action: bool,
  pub moment_value: bool,
  pub moment_differential: bool,
  pub moment_action: bool,
}

impl RoundTrip {
  pub fn passed(&self) -> bool {
    self.left_is_identity && self.pi_prime && self.action && self.moment_value && self.moment_differential && self.moment_action
  }
}

fn pad_rows(m: &Matrix, rows: usize) -> Matrix {
  Matrix::from_fn(rows, m.cols(), |i, j| if i < m.rows() { m[(i, j)].clone() } else { Q::zero() })
}

/// Slices the induced pair at `mu_L = 1` over `px` and compares with `X`.
pub fn slice_round_trip(x: &ModuliSpace, induced: &InducedPair, px: &GroupPoint) -> Result<RoundTrip, MomentError> {
  let pm = induced.slice_point(px);
  let model = CentralPairModel::from_moduli(&induced.space, &pm)?;
  let on_m = LeafPoint::from_central(&model, &induced.pair)?;
  let on_x = LeafPoint::from_moment_space(x, px, &induced.pair)?;
  let n = on_m.tangent_dim();
  let nx = on_x.tangent_dim();
  let b = on_m.basic.basis_matrix();
  let padded_pi = pad_rows(&pad_rows(&on_x.pi_prime, n).transpose(), n).transpose();
  let id = Matrix::identity(x.algebra().matrix_model().map_or(0, |mm| mm.size()));
  let restricted = Matrix::from_fn(on_m.moment.differential.rows(), nx, |i, j| on_m.moment.differential[(i, j)].clone());
  Ok(RoundTrip {
    left_is_identity: model.left.iter().all(|l| l.value == id),
    pi_prime: on_m.pi_prime.congruence(&b, &b) == padded_pi.congruence(&b, &b),
    action: &b * &on_m.rho_h == &b * &pad_rows(&on_x.rho_h, n),
    moment_value: on_m.moment.value == on_x.moment.value,
    moment_differential: restricted == on_x.moment.differential,
    moment_action: on_m.moment.action == on_x.moment.action,
  })
}

/// `M-bar`: `pi` negated, so `sigma` becomes its transpose and the left and
/// right maps trade places.
pub fn conjugate(model: &CentralPairModel) -> CentralPairModel {
  CentralPairModel {
    group: model.group.clone(),
    acting: model.acting.clone(),
    basic: model.basic.clone(),
    rho: model.rho.clone(),
    sigma: model.sigma.transpose(),
    pi: -&model.pi,
    left: model.right.clone(),
    right: model.left.clone(),
    classes: model.classes.clone(),
    constraints: model.constraints.clone(),
  }
}

/// Whether two pointwise models carry identical data.
pub fn same_model(a: &CentralPairModel, b: &CentralPairModel) -> bool {
  let maps = |x: &[TargetMap], y: &[TargetMap]| {
    x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.value == q.value && p.differential == q.differential && p.action == q.action)
  };
  a.basic == b.basic
    && a.rho == b.rho
    && a.sigma == b.sigma
    && a.pi == b.pi
    && maps(&a.left, &b.left)
    && maps(&a.right, &b.right)
    && maps(&a.classes, &b.classes)
    && a.constraints == b.constraints
}

/// The fibre product as a pointwise model inside `M1 x M2`, cut out by the conormal.
pub fn fused_model(f: &FusedPair, group: Arc<QuadraticLieAlgebra>, acting: Arc<QuadraticLieAlgebra>) -> CentralPairModel {
  let half_t = acting.t().scale(&qf(1, 2));
  let pi = &f.sigma - &half_t.congruence(&f.rho, &f.rho);
  CentralPairModel {
    group,
    acting,
    basic: f.basic.clone(),
    rho: f.rho.clone(),
    sigma: f.sigma.clone(),
    pi,
    left: f.left.clone(),
    right: f.right.clone(),
    classes: Vec::new(),
    constraints: f.conormal.basis().to_vec(),
  }
}

/// `X1 (*) X2` at a pair of points: both spaces induced, fused over `D/H`,
/// and sliced at `mu_L = 1`.
#[derive(Debug, Clone)]
pub struct FusedMoments {
  pub model: CentralPairModel,
  pub fused: FusedPair,
  pub leaf: LeafStructure,
  pub moment: MomentVerdict,
  pub verdicts: BTreeMap<String, bool>,
}

impl FusedMoments {
  pub fn passed(&self) -> bool {
    self.fused.passed() && self.leaf.tangent && self.moment.passed() && self.verdicts.values().all(|&v| v)
  }
}

pub fn fuse_moment_maps(x1: &ModuliSpace, p1: &GroupPoint, x2: &ModuliSpace, p2: &GroupPoint) -> Result<FusedMoments, MomentError> {
  let (i1, i2) = (induce_central_pair(x1)?, induce_central_pair(x2)?);
  let pair = &i1.pair;
  let g = x1.algebra().clone();
  let model1 = CentralPairModel::from_moduli(&i1.space, &i1.slice_point(p1))?;
  let z = model1.right[0].value.inverse().expect("group element");
  let word = &i2.space.central_maps().left[0].word;
  let q2 = align_point(word, &z, &i2.slice_point(p2))?;
  let mut model2 = CentralPairModel::from_moduli(&i2.space, &q2)?;
  model2.left[0] = model2.left[0].inverted(&g)?;
  let fused = fuse_central_pairs(&model1, &model2)?;
  let model = fused_model(&fused, g, pair.d.clone());
  let leaf = leaf_structure_check(&model, pair)?;
  let moment = moment_condition_check(&LeafPoint::from_central(&model, pair)?, pair)?;
  let mut verdicts = BTreeMap::new();
  let stacked = &model.rho * &Matrix::from_rows(&pair.h_basis, pair.d.dim()).transpose();
  let canonical = pair.canonical_element();
  let pi_prime = &model.pi - &pair.tau_matrix().congruence(&model.rho, &model.rho);
  let b = model.basic.basis_matrix();
  verdicts.insert(
    "sigma_reconstruction".into(),
    (&pi_prime + &canonical.congruence(&model.rho, &model.rho)).congruence(&b, &b) == model.sigma.congruence(&b, &b),
  );
  verdicts.insert("h_tangent".into(), tangent_space(&model.basic, &model.left, &model.constraints, model.tangent_dim()).contains_space(&(&b * &stacked).column_space()));
  Ok(FusedMoments { model, fused, leaf, moment, verdicts })
}

/// `D/H (*) D/H` fused with itself over the middle factor against the triple
/// fusion `D/H (*) D/H (*) D/H`, at a point `(x0, x1, x2)` of the latter.
#[derive(Debug, Clone, Serialize)]
pub struct TripleFusion {
  pub fibre_product: bool,
  pub sigma: bool,
  pub action: bool,
  pub first_projection: bool,
  pub third_projection: bool,
}

impl TripleFusion {
  pub fn passed(&self) -> bool {
    self.fibre_product && self.sigma && self.action && self.first_projection && self.third_projection
  }
}

pub fn triple_fusion_check(g: Arc<QuadraticLieAlgebra>, p: &GroupPoint) -> Result<TripleFusion, MomentError> {
  use crate::surface::suite;
  let double = ModuliSpace::build(&suite::annulus(), g.clone())?;
  let triple = ModuliSpace::build(&suite::pair_of_pants(), g.clone())?;
  let [x0, x1, x2] = p.values.as_slice() else {
    return Err(MomentError::Hypothesis("need a point of G^3".into()));
  };
  let m1 = CentralPairModel::from_moduli(&double, &GroupPoint { values: vec![x0.clone(), x1.clone()] })?;
  let mut m2 = CentralPairModel::from_moduli(&double, &GroupPoint { values: vec![x1.clone(), x2.clone()] })?;
  // the left map of the double is the inverse of the first factor
  m2.left[0] = m2.left[0].inverted(&g)?;
  let fused = fuse_central_pairs(&m1, &m2)?;
  let target = CentralPairModel::from_moduli(&triple, p)?;
  let gd = g.dim();
  // covectors on G^3 lift to G^2 x G^2 with nothing on the repeated factor
  let lift = Matrix::from_fn(4 * gd, 3 * gd, |r, c| {
    let (rb, cb) = (r / gd, c / gd);
    let hit = matches!((rb, cb), (0, 0) | (1, 1) | (3, 2)) && r % gd == c % gd;
    Q::from_integer(i64::from(hit).into())
  });
  let outer = |maps: &[TargetMap], other: &[TargetMap]| {
    matches!((maps, other), ([a], [b]) if a.value == b.value && &a.differential * &lift == b.differential && a.action == b.action)
  };
  Ok(TripleFusion {
    fibre_product: fused.passed(),
    sigma: fused.sigma.congruence(&lift.transpose(), &lift.transpose()) == target.sigma,
    action: &lift.transpose() * &fused.rho == target.rho,
    first_projection: outer(&fused.left, &target.left),
    third_projection: outer(&fused.right, &target.right),
  })
}
