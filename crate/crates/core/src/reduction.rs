//! Reduction of quasi-Poisson data at a point: central reduction by a
//! coisotropic subalgebra, partial reduction by an ideal, fusion of central
//! pairs over a common target, and the two kernel lemmas behind the symplectic
//! leaf statements.
//!
//! No quotient is ever built. Every statement concerns the cotangent space at
//! one sampled point, and reports carry [`SCOPE`] to say so.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use rand::Rng;
use serde::Serialize;

use crate::invcalc::{action_extend, adjoint, ActionMap, CalcError, GroupPoint};
use crate::linalg::{dot, Matrix, Subspace, Vector};
use crate::moduli::{stabilizer_verdict, HolonomyWord, ModuliError, ModuliSpace};
use crate::qla::{AlgebraError, QuadraticLieAlgebra, Subalgebra};
use crate::rational::{q, qf, Q};

pub const SCOPE: &str = "linearized at the sampled point; smoothness of quotients is not assessed";

#[derive(Debug, thiserror::Error)]
pub enum ReductionError {
  #[error(transparent)]
  Moduli(#[from] ModuliError),
  #[error(transparent)]
  Calc(#[from] CalcError),
  #[error(transparent)]
  Algebra(#[from] AlgebraError),
  #[error(transparent)]
  Appendix(#[from] AppendixError),
  #[error("not coisotropic: t does not vanish on the annihilator")]
  NotCoisotropic,
  #[error("c is coisotropic but not Lagrangian")]
  NotLagrangian,
  #[error("transversality fails at p: rank {rank} of {needed} (deficit {deficit})")]
  Transversality { needed: usize, rank: usize, deficit: usize },
  #[error("not a central pair at the base point: {0}")]
  NotCentral(String),
  #[error("point is not on the fibre product")]
  OffFibre,
  #[error("{0}")]
  Hypothesis(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AppendixError {
  #[error("shape mismatch: {0}")]
  Shape(String),
  #[error("pairing is degenerate")]
  DegeneratePairing,
  #[error("L not Lagrangian")]
  NotLagrangian,
  #[error("t is not symmetric")]
  TNotSymmetric,
  #[error("t is degenerate")]
  TDegenerate,
  #[error("sigma(v,v) = t(f v, f v)/2 fails")]
  QuadraticIdentity,
  #[error("left kernel of sigma meets ker f")]
  LeftKernelMeetsKerF,
  #[error("C not t-Lagrangian")]
  CNotLagrangian,
}

/// A map to a group at one point, in the left frame of the target.
#[derive(Debug, Clone)]
pub struct TargetMap {
  pub value: Matrix,
  /// `h^-1 dh`, a `dim g x dim M` matrix.
  pub differential: Matrix,
  /// The acting algebra's infinitesimal action on the target at `value`.
  pub action: Matrix,
}

impl TargetMap {
  /// The same map followed by inversion on the target group.
  pub fn inverted(&self, g: &QuadraticLieAlgebra) -> Result<Self, CalcError> {
    let minus_ad = -&adjoint(g, &self.value)?;
    Ok(Self {
      value: self.value.inverse().expect("group element"),
      differential: &minus_ad * &self.differential,
      action: &minus_ad * &self.action,
    })
  }

  /// Pullback of covector `gamma` on the target.
  pub fn pullback(&self, gamma: &[Q]) -> Vector {
    self.differential.vec_mul(gamma)
  }

  fn padded(&self, before: usize, after: usize) -> Self {
    let rows = self.differential.rows();
    let d = Matrix::zeros(rows, before).hstack(&self.differential).hstack(&Matrix::zeros(rows, after));
    Self { value: self.value.clone(), differential: d, action: self.action.clone() }
  }
}

/// Pointwise data of a central pair: quasi-Poisson tensors on the basic
/// covectors, and the left, right and invariant target maps.
#[derive(Debug, Clone)]
pub struct CentralPairModel {
  pub group: Arc<QuadraticLieAlgebra>,
  pub acting: Arc<QuadraticLieAlgebra>,
  pub basic: Subspace,
  /// Columns are the generating vector fields.
  pub rho: Matrix,
  pub sigma: Matrix,
  pub pi: Matrix,
  pub left: Vec<TargetMap>,
  pub right: Vec<TargetMap>,
  /// Holonomies of uncut circles; invariant, with conjugacy classes as level sets.
  pub classes: Vec<TargetMap>,
  /// Covectors vanishing on the space, when it sits inside the product (fibre products).
  pub constraints: Vec<Vector>,
}

impl CentralPairModel {
  pub fn from_moduli(m: &ModuliSpace, p: &GroupPoint) -> Result<Self, ReductionError> {
    let check = m.check_centrality(p)?;
    if !check.passed() {
      return Err(ReductionError::NotCentral(check.violations.join("; ")));
    }
    let pd = m.data.at(p)?;
    let g = m.algebra().clone();
    let arc_map = |a: &crate::moduli::ArcMap| -> Result<TargetMap, ReductionError> {
      Ok(TargetMap {
        value: a.word.eval(p),
        differential: a.word.differential(&g, m.layout(), p)?,
        action: m.target_action(a, p)?,
      })
    };
    let maps = m.central_maps();
    let acting = m.data.acting_algebra();
    let class_map = |w: &HolonomyWord| -> Result<TargetMap, ReductionError> {
      Ok(TargetMap {
        value: w.eval(p),
        differential: w.differential(&g, m.layout(), p)?,
        action: Matrix::zeros(g.dim(), acting.dim()),
      })
    };
    Ok(Self {
      left: maps.left.iter().map(arc_map).collect::<Result<_, _>>()?,
      right: maps.right.iter().map(arc_map).collect::<Result<_, _>>()?,
      classes: maps.uncut.iter().map(class_map).collect::<Result<_, _>>()?,
      group: g.clone(),
      acting,
      basic: pd.basic,
      rho: pd.rho,
      sigma: pd.sigma,
      pi: pd.pi,
      constraints: Vec::new(),
    })
  }

  pub fn tangent_dim(&self) -> usize {
    self.rho.rows()
  }

  /// Basic covectors killing `rho(c)`.
  pub fn invariant_covectors(&self, c: &Subspace) -> Subspace {
    let imgs: Vec<Vector> = c.basis().iter().map(|u| self.rho.mul_vec(u)).collect();
    self.basic.intersect(&Subspace::span(&imgs, self.tangent_dim()).annihilator())
  }

  fn check_parent(&self, c: &Subalgebra) -> Result<(), ReductionError> {
    if c.parent().dim() != self.acting.dim() || c.parent().t() != self.acting.t() {
      return Err(ReductionError::Hypothesis("subalgebra is not in the acting algebra".into()));
    }
    Ok(())
  }

  /// Conormal of the level set through the base point: `c`-orbits in every
  /// left and right target, and optionally the conjugacy classes of the
  /// invariant maps. Fails unless the maps are transverse to these orbits.
  fn conormal(&self, c: &Subalgebra, with_classes: bool) -> Result<(Subspace, RankCertificate), ReductionError> {
    let d = self.acting.dim();
    let cm = Matrix::from_rows(c.span().basis(), d).transpose();
    let mut blocks: Vec<(&TargetMap, Matrix)> = Vec::new();
    for m in self.left.iter().chain(&self.right) {
      blocks.push((m, &m.action * &cm));
    }
    if with_classes {
      for m in &self.classes {
        let ad = adjoint(&self.group, &m.value.inverse().expect("group element"))?;
        blocks.push((m, &ad - &Matrix::identity(self.group.dim())));
      }
    }
    let gd = self.group.dim();
    let needed = gd * blocks.len();
    let n = self.tangent_dim();
    let mut jac = Matrix::zeros(0, n);
    let mut tangents = Matrix::zeros(needed, 0);
    for (k, (m, tan)) in blocks.iter().enumerate() {
      jac = jac.vstack(&m.differential);
      let mut col = Matrix::zeros(needed, tan.cols());
      for r in 0..gd {
        for c in 0..tan.cols() {
          col[(k * gd + r, c)] = tan[(r, c)].clone();
        }
      }
      tangents = tangents.hstack(&col);
    }
    let rank = if needed == 0 { 0 } else { jac.hstack(&tangents).rank() };
    let cert = RankCertificate { needed, rank };
    if rank < needed {
      return Err(ReductionError::Transversality { needed, rank, deficit: needed - rank });
    }
    let mut pulled = Vec::new();
    for (m, tan) in &blocks {
      for lambda in tan.left_nullspace() {
        pulled.push(m.pullback(&lambda));
      }
    }
    Ok((Subspace::span(&pulled, n), cert))
  }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RankCertificate {
  pub needed: usize,
  pub rank: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReducedPointData {
  /// Covector representatives of the reduced cotangent basis.
  #[serde(skip)]
  pub basis: Vec<Vector>,
  pub matrix: Matrix,
  pub dimension: usize,
  pub rank: usize,
  pub transversality: Option<RankCertificate>,
  pub verdicts: BTreeMap<String, bool>,
  pub scope: &'static str,
}

impl ReducedPointData {
  pub fn passed(&self) -> bool {
    self.verdicts.values().all(|&v| v)
  }

  pub fn is_nondegenerate(&self) -> bool {
    self.rank == self.dimension
  }
}

/// Vectors of `space`'s basis completing a basis of `sub` to one of `space`.
pub fn complement_in(space: &Subspace, sub: &Subspace) -> Vec<Vector> {
  let mut acc = sub.clone();
  let mut out = Vec::new();
  for v in space.basis() {
    if !acc.contains(v) {
      out.push(v.clone());
      acc = acc.sum(&Subspace::span(&[v.clone()], space.ambient()));
    }
  }
  out
}

fn form_vanishes(m: &Matrix, xs: &[Vector], ys: &[Vector]) -> bool {
  xs.iter().all(|x| {
    let row = m.vec_mul(x);
    ys.iter().all(|y| dot(&row, y).is_zero())
  })
}

fn coisotropic(c: &Subalgebra) -> Result<crate::qla::CoisotropyReport, ReductionError> {
  let rep = c.coisotropy_report();
  if !rep.is_coisotropic {
    return Err(ReductionError::NotCoisotropic);
  }
  Ok(rep)
}

/// `pi` on covectors killing `rho(c)`: the bracket of `c`-invariant functions.
pub fn reduced_bivector_at(model: &CentralPairModel, c: &Subalgebra) -> Result<ReducedPointData, ReductionError> {
  model.check_parent(c)?;
  let rep = coisotropic(c)?;
  let perp = Subalgebra::new(c.parent().clone(), rep.perp.basis())?;
  let phi_ok = c.descend_data(&perp)?.phi_mod_vanishes;
  let wc = model.invariant_covectors(c.span());
  let basis = wc.basis().to_vec();
  let b = wc.basis_matrix();
  let matrix = model.pi.congruence(&b, &b);
  let mut verdicts = BTreeMap::new();
  verdicts.insert("skew".into(), matrix.is_skew());
  verdicts.insert("sigma_equals_pi".into(), model.sigma.congruence(&b, &b) == matrix);
  verdicts.insert("phi_vanishes_mod_c".into(), phi_ok);
  // pulled-back covectors that happen to be invariant are Casimirs
  let n = model.tangent_dim();
  let pulled = |maps: &[TargetMap]| -> Subspace {
    let rows: Vec<Vector> = maps.iter().flat_map(|m| m.differential.row_vecs()).collect();
    Subspace::span(&rows, n).intersect(&wc)
  };
  let casimirs = pulled(&model.left).sum(&pulled(&model.right));
  verdicts.insert("central_pullbacks_in_kernel".into(), form_vanishes(&model.pi, casimirs.basis(), &basis));
  Ok(ReducedPointData {
    dimension: basis.len(),
    rank: matrix.rank(),
    basis,
    matrix,
    transversality: None,
    verdicts,
    scope: SCOPE,
  })
}

/// Reduction of the level set of `c`-orbits through the base point (and of the
/// conjugacy classes of the invariant maps when `with_classes`) by `c`.
pub fn central_reduction_at(
  model: &CentralPairModel,
  c: &Subalgebra,
  with_classes: bool,
) -> Result<ReducedPointData, ReductionError> {
  model.check_parent(c)?;
  coisotropic(c)?;
  let (conormal, cert) = model.conormal(c, with_classes)?;
  let wc = model.invariant_covectors(c.span());
  let basis = complement_in(&wc, &conormal);
  let b = Matrix::from_rows(&basis, model.tangent_dim());
  let matrix = model.pi.congruence(&b, &b);
  let mut verdicts = BTreeMap::new();
  verdicts.insert("conormal_is_invariant".into(), wc.contains_space(&conormal));
  verdicts.insert("poisson_submanifold".into(), form_vanishes(&model.pi, conormal.basis(), wc.basis()));
  verdicts.insert(
    "sigma_equals_pi".into(),
    model.sigma.congruence(&wc.basis_matrix(), &wc.basis_matrix()) == model.pi.congruence(&wc.basis_matrix(), &wc.basis_matrix()),
  );
  verdicts.insert("skew".into(), matrix.is_skew());
  Ok(ReducedPointData {
    dimension: basis.len(),
    rank: matrix.rank(),
    basis,
    matrix,
    transversality: Some(cert),
    verdicts,
    scope: SCOPE,
  })
}

#[derive(Debug, Clone, Serialize)]
pub struct LeafVerdict {
  /// Dimension of the cotangent space of the big leaf.
  pub big_leaf_dim: usize,
  pub preimage_dim: usize,
  pub kernel_dim: usize,
  pub leaf_dim: usize,
  pub formula_matches_oracle: bool,
  pub dimension_count: bool,
  pub nondegenerate: bool,
  pub scope: &'static str,
}

/// The reduced level set is a symplectic leaf: the kernel of `sigma` on
/// `(rho^*)^-1(Ann c)` over the big leaf, by formula and by nullspace.
pub fn symplectic_leaf_check(model: &CentralPairModel, c: &Subalgebra) -> Result<LeafVerdict, ReductionError> {
  model.check_parent(c)?;
  if !model.acting.is_nondegenerate() {
    return Err(ReductionError::Hypothesis("t is degenerate".into()));
  }
  let rep = coisotropic(c)?;
  if !rep.is_lagrangian() {
    return Err(ReductionError::NotLagrangian);
  }
  let dd = model.acting.dim();
  for (name, maps) in [("left", &model.left), ("right", &model.right)] {
    let mut stacked = Matrix::zeros(0, dd);
    for m in maps.iter() {
      stacked = stacked.vstack(&m.action);
    }
    if stacked.rank() != stacked.rows() {
      return Err(ReductionError::Hypothesis(format!("action on the {name} target is not transitive")));
    }
    let stab = Subspace::span(&stacked.nullspace(), dd);
    if !stabilizer_verdict(&model.acting, &stab).1 {
      return Err(ReductionError::Hypothesis(format!("{name} target stabilizer is not Lagrangian")));
    }
  }
  // restrict to the big leaf: drop basic covectors killing T^big
  let wb = model.basic.basis_matrix();
  let conditions = model.pi.congruence(&wb, &wb).vstack(&(&wb * &model.rho).transpose());
  let kbig: Vec<Vector> = conditions.nullspace().iter().map(|x| wb.vec_mul(x)).collect();
  let kbig = Subspace::span(&kbig, model.tangent_dim());
  let qv = complement_in(&model.basic, &kbig);
  let qb = Matrix::from_rows(&qv, model.tangent_dim());
  let sigma_v = model.sigma.congruence(&qb, &qb);
  let f = (&qb * &model.rho).transpose();
  let cmp = prop_a2_kernel(&sigma_v, model.acting.t(), &f, c.annihilator().basis())?;
  let rest = complement_in(&cmp.domain, &cmp.oracle);
  let reduced = sigma_v.congruence(&Matrix::from_rows(&rest, qv.len()), &Matrix::from_rows(&rest, qv.len()));
  Ok(LeafVerdict {
    big_leaf_dim: qv.len(),
    preimage_dim: cmp.domain.dim(),
    kernel_dim: cmp.oracle.dim(),
    leaf_dim: rest.len(),
    formula_matches_oracle: cmp.matches,
    dimension_count: cmp.dimension_count,
    nondegenerate: reduced.is_skew() && reduced.rank() == rest.len(),
    scope: SCOPE,
  })
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitRanks {
  pub dimension: usize,
  pub left_rank: usize,
  pub expected_left_rank: i64,
  pub single_big_leaf: bool,
  pub conormal_in_kernels: bool,
}

impl SplitRanks {
  pub fn is_split_symplectic(&self) -> bool {
    self.single_big_leaf && self.conormal_in_kernels && self.left_rank as i64 == self.expected_left_rank
  }
}

#[derive(Debug, Clone, Serialize)]
pub struct PartialReduction {
  #[serde(skip)]
  pub quotient: Arc<QuadraticLieAlgebra>,
  pub t_prime: Matrix,
  #[serde(skip)]
  pub basis: Vec<Vector>,
  /// Columns are the residual generating vector fields.
  pub rho: Matrix,
  /// `pi` on the `h`-basic covectors.
  pub pi: Matrix,
  pub phi_prime_zero: bool,
  pub verdicts: BTreeMap<String, bool>,
  pub split: Option<SplitRanks>,
  pub scope: &'static str,
}

impl PartialReduction {
  pub fn passed(&self) -> bool {
    self.verdicts.values().all(|&v| v) && self.split.as_ref().map_or(true, SplitRanks::is_split_symplectic)
  }
}

/// `M/h` as a `c/h`-quasi-Poisson space at `p`. With `constrain`, also
/// restricts to the level set of `c`-orbits and classes and reports the
/// split-symplectic ranks there.
pub fn partial_reduction_at(
  m: &ModuliSpace,
  p: &GroupPoint,
  c: &Subalgebra,
  h: &Subalgebra,
  constrain: bool,
) -> Result<PartialReduction, ReductionError> {
  let acting = m.data.acting_algebra();
  if c.parent().t() != acting.t() || h.parent().t() != acting.t() || c.parent().dim() != acting.dim() {
    return Err(ReductionError::Hypothesis("subalgebra is not in the acting algebra".into()));
  }
  let dd = c.descend_data(h)?;
  let pd = m.data.at(p)?;
  let n = m.layout().total_dim();
  let h_imgs: Vec<Vector> = h.span().basis().iter().map(|u| pd.rho.mul_vec(u)).collect();
  let wh = pd.basic.intersect(&Subspace::span(&h_imgs, n).annihilator());
  let basis = wh.basis().to_vec();

  let live = m.data.rho();
  let quotient = Arc::new(dd.quotient.clone());
  let images: Vec<_> = dd.representatives.iter().map(|r| live.apply(r)).collect();
  let residual = ActionMap::on(m.layout().clone(), quotient.clone(), images);
  let pipi = m.data.pi.schouten(&m.data.pi)?;
  let rhs = action_extend(&residual, &dd.phi_prime).scale(&q(2));
  let at = pd.frame.evaluate(&pipi.sub(&rhs)?)?;
  let bracket_pt = pd.frame.evaluate(&pipi)?;
  let mut bracket = true;
  let mut poisson = true;
  for x in &basis {
    for y in &basis {
      for z in &basis {
        if !at.contract(&[x, y, z]).is_zero() {
          bracket = false;
        }
        if !bracket_pt.contract(&[x, y, z]).is_zero() {
          poisson = false;
        }
      }
    }
  }
  let mut invariance = true;
  for img in &residual.images {
    let v = pd.frame.evaluate(&img.schouten(&m.data.pi)?)?;
    if basis.iter().any(|x| basis.iter().any(|y| !v.contract(&[x, y]).is_zero())) {
      invariance = false;
    }
  }
  let rho_cols: Vec<Vector> = residual.images.iter().map(|img| pd.frame.vector(img)).collect();
  let rho = Matrix::from_rows(&rho_cols, n).transpose();
  let b = wh.basis_matrix();
  let phi_prime_zero = dd.phi_prime.is_zero();

  let mut verdicts = BTreeMap::new();
  verdicts.insert("bracket_identity".into(), bracket);
  verdicts.insert("invariance".into(), invariance);
  verdicts.insert("phi_vanishes_mod_c".into(), dd.phi_mod_vanishes);
  verdicts.insert("phi_image_matches".into(), dd.phi_image_matches);
  if phi_prime_zero {
    verdicts.insert("poisson".into(), poisson);
  }

  let split = if constrain {
    let model = CentralPairModel::from_moduli(m, p)?;
    let (conormal, _) = model.conormal(c, true)?;
    let v = complement_in(&wh, &conormal);
    let vb = Matrix::from_rows(&v, n);
    let sigma_v = pd.sigma.congruence(&vb, &vb);
    let in_kernels = form_vanishes(&pd.sigma, conormal.basis(), wh.basis())
      && form_vanishes(&pd.sigma.transpose(), conormal.basis(), wh.basis());
    let conditions = pd.pi.congruence(&vb, &vb).vstack(&(&vb * &rho).transpose());
    Some(SplitRanks {
      dimension: v.len(),
      left_rank: sigma_v.rank(),
      expected_left_rank: v.len() as i64 - (quotient.dim() / 2) as i64,
      single_big_leaf: conditions.nullspace().is_empty() && quotient.is_nondegenerate(),
      conormal_in_kernels: in_kernels,
    })
  } else {
    None
  };
  Ok(PartialReduction {
    pi: pd.pi.congruence(&b, &b),
    t_prime: quotient.t().clone(),
    quotient,
    basis,
    rho,
    phi_prime_zero,
    verdicts,
    split,
    scope: SCOPE,
  })
}

/// A point of `M1 x M2` with the fused tensors, and the fibre-product checks.
#[derive(Debug, Clone, Serialize)]
pub struct FusedPair {
  pub sigma: Matrix,
  pub rho: Matrix,
  #[serde(skip)]
  pub basic: Subspace,
  #[serde(skip)]
  pub conormal: Subspace,
  #[serde(skip)]
  pub left: Vec<TargetMap>,
  #[serde(skip)]
  pub right: Vec<TargetMap>,
  pub transversality: RankCertificate,
  pub verdicts: BTreeMap<String, bool>,
  pub scope: &'static str,
}

impl FusedPair {
  pub fn passed(&self) -> bool {
    self.verdicts.values().all(|&v| v)
  }
}

/// Fibre product of two central pairs over the right target of the first and
/// the left target of the second, inside the fusion product.
pub fn fuse_central_pairs(pair1: &CentralPairModel, pair2: &CentralPairModel) -> Result<FusedPair, ReductionError> {
  if pair1.acting.dim() != pair2.acting.dim() || pair1.acting.t() != pair2.acting.t() {
    return Err(ReductionError::Hypothesis("acting algebras differ".into()));
  }
  let (mu, nu) = match (pair1.right.as_slice(), pair2.left.as_slice()) {
    ([mu], [nu]) => (mu, nu),
    _ => return Err(ReductionError::Hypothesis("each side needs exactly one map to the common target".into())),
  };
  if mu.value != nu.value {
    return Err(ReductionError::OffFibre);
  }
  if mu.action != nu.action {
    return Err(ReductionError::Hypothesis("the two actions on the common target differ".into()));
  }
  let gd = pair1.group.dim();
  let rank = mu.differential.hstack(&nu.differential).rank();
  let cert = RankCertificate { needed: gd, rank };
  if rank < gd {
    return Err(ReductionError::Transversality { needed: gd, rank, deficit: gd - rank });
  }
  let (n1, n2) = (pair1.tangent_dim(), pair2.tangent_dim());
  let n = n1 + n2;
  let t = pair1.acting.t();
  // sigma_1 + sigma_2 + (rho_2 (x) rho_1)(t)
  let cross = &(&pair2.rho * t) * &pair1.rho.transpose();
  let sigma = Matrix::from_fn(n, n, |r, c| match (r < n1, c < n1) {
    (true, true) => pair1.sigma[(r, c)].clone(),
    (false, false) => pair2.sigma[(r - n1, c - n1)].clone(),
    (false, true) => cross[(r - n1, c)].clone(),
    (true, false) => Q::zero(),
  });
  let rho = pair1.rho.vstack(&pair2.rho);
  let pad = |v: &[Q], first: bool| -> Vector {
    let mut out = vec![Q::zero(); n];
    let off = if first { 0 } else { n1 };
    for (k, x) in v.iter().enumerate() {
      out[off + k] = x.clone();
    }
    out
  };
  let basic_vecs: Vec<Vector> =
    pair1.basic.basis().iter().map(|v| pad(v, true)).chain(pair2.basic.basis().iter().map(|v| pad(v, false))).collect();
  let basic = Subspace::span(&basic_vecs, n);
  let conormal_vecs: Vec<Vector> = (0..gd)
    .map(|k| {
      let a = pad(mu.differential.row(k), true);
      let b = pad(nu.differential.row(k), false);
      crate::linalg::vsub(&a, &b)
    })
    .collect();
  let left: Vec<TargetMap> = pair1.left.iter().map(|m| m.padded(0, n2)).collect();
  let right: Vec<TargetMap> = pair2.right.iter().map(|m| m.padded(n1, 0)).collect();
  let rows = |maps: &[TargetMap]| -> Vec<Vector> { maps.iter().flat_map(|m| m.differential.row_vecs()).collect() };

  let mut verdicts = BTreeMap::new();
  verdicts.insert("fibre_identity".into(), form_vanishes(&sigma, &conormal_vecs, basic.basis()));
  verdicts.insert("outer_left_central".into(), form_vanishes(&sigma, &rows(&left), basic.basis()));
  verdicts.insert("outer_right_central".into(), form_vanishes(&sigma.transpose(), &rows(&right), basic.basis()));
  let tangent_defect = &(&mu.differential * &pair1.rho) - &(&nu.differential * &pair2.rho);
  verdicts.insert("diagonal_tangent".into(), tangent_defect.is_zero());
  Ok(FusedPair {
    sigma,
    rho,
    basic,
    conormal: Subspace::span(&conormal_vecs, n),
    left,
    right,
    transversality: cert,
    verdicts,
    scope: SCOPE,
  })
}

/// A point agreeing with `p` except on one edge, chosen so that `word`
/// evaluates to `target`. The edge must occur exactly once in the word.
pub fn align_point(word: &HolonomyWord, target: &Matrix, p: &GroupPoint) -> Result<GroupPoint, ReductionError> {
  let pos = word
    .steps
    .iter()
    .position(|s| word.steps.iter().filter(|t| t.edge == s.edge).count() == 1)
    .ok_or_else(|| ReductionError::Hypothesis("no edge occurs exactly once in the word".into()))?;
  let before = HolonomyWord::new(word.steps[..pos].to_vec()).eval(p);
  let after = HolonomyWord::new(word.steps[pos + 1..].to_vec()).eval(p);
  // target = after . x . before
  let x = &(&after.inverse().expect("group element") * target) * &before.inverse().expect("group element");
  let s = word.steps[pos];
  let mut values = p.values.clone();
  values[s.edge] = if s.exponent > 0 { x } else { x.inverse().expect("group element") };
  Ok(GroupPoint { values })
}

/// The diagonal copy of `g` in an acting algebra made of `dim / g_dim` copies.
pub fn diagonal_subalgebra(acting: Arc<QuadraticLieAlgebra>, g_dim: usize) -> Result<Subalgebra, AlgebraError> {
  let copies = acting.dim() / g_dim;
  let rows: Vec<Vector> = (0..g_dim)
    .map(|i| (0..acting.dim()).map(|k| if k % g_dim == i { Q::one() } else { Q::zero() }).collect())
    .collect();
  debug_assert_eq!(copies * g_dim, acting.dim());
  Subalgebra::new(acting, &rows)
}

/// The same subspace of `g` in every copy.
pub fn copywise_subalgebra(acting: Arc<QuadraticLieAlgebra>, rows_in_g: &[Vector]) -> Result<Subalgebra, AlgebraError> {
  let g_dim = rows_in_g.first().map_or(1, Vec::len);
  let copies = acting.dim() / g_dim;
  let mut rows = Vec::new();
  for c in 0..copies {
    for r in rows_in_g {
      let mut v = vec![Q::zero(); acting.dim()];
      v[c * g_dim..(c + 1) * g_dim].clone_from_slice(r);
      rows.push(v);
    }
  }
  Subalgebra::new(acting, &rows)
}

/// Outcome of comparing a kernel formula with a brute-force nullspace.
#[derive(Debug, Clone, Serialize)]
pub struct KernelComparison {
  #[serde(skip)]
  pub domain: Subspace,
  #[serde(skip)]
  pub formula: Subspace,
  #[serde(skip)]
  pub oracle: Subspace,
  pub domain_dim: usize,
  pub kernel_dim: usize,
  /// `2 rank sigma + dim W = 2 dim V`; always true for the first lemma.
  pub dimension_count: bool,
  pub matches: bool,
}

fn restricted_kernel(form: &Matrix, domain: &Subspace) -> Subspace {
  let b = domain.basis_matrix();
  let k = form.congruence(&b, &b);
  let vecs: Vec<Vector> = k.nullspace().iter().map(|x| b.vec_mul(x)).collect();
  Subspace::span(&vecs, form.rows())
}

fn is_lagrangian_for(form: &Matrix, l: &Subspace) -> bool {
  let orth = if l.dim() == 0 {
    Subspace::full(form.rows())
  } else {
    Subspace::span(&(&l.basis_matrix() * form).nullspace(), form.rows())
  };
  orth == *l
}

/// Kernel of the skew form on a Lagrangian `L` in `U + U'` (sym form), against
/// `(L n U) + (L n U')`.
pub fn prop_a1_kernel(pairing: &Matrix, l_basis: &[Vector]) -> Result<KernelComparison, AppendixError> {
  let m = pairing.rows();
  if pairing.cols() != m || pairing.rank() != m {
    return Err(AppendixError::DegeneratePairing);
  }
  if l_basis.iter().any(|v| v.len() != 2 * m) {
    return Err(AppendixError::Shape("L vectors must have length 2 dim U".into()));
  }
  let block = |sign: i64| {
    Matrix::from_fn(2 * m, 2 * m, |r, c| match (r < m, c < m) {
      (true, false) => pairing[(r, c - m)].clone(),
      (false, true) => pairing[(c, r - m)].clone() * q(sign),
      _ => Q::zero(),
    })
  };
  let sym = block(1);
  let skew = block(-1);
  let l = Subspace::span(l_basis, 2 * m);
  if !is_lagrangian_for(&sym, &l) {
    return Err(AppendixError::NotLagrangian);
  }
  let unit = |range: std::ops::Range<usize>| {
    let vs: Vec<Vector> = range.map(|i| (0..2 * m).map(|j| if i == j { Q::one() } else { Q::zero() }).collect()).collect();
    Subspace::span(&vs, 2 * m)
  };
  let formula = l.intersect(&unit(0..m)).sum(&l.intersect(&unit(m..2 * m)));
  let oracle = restricted_kernel(&skew, &l);
  Ok(KernelComparison {
    dimension_count: true,
    domain_dim: l.dim(),
    kernel_dim: oracle.dim(),
    matches: formula == oracle,
    domain: l,
    formula,
    oracle,
  })
}

/// Kernel of `sigma` on `f^-1(C)` against `V_L n f^-1(C) + V_R n f^-1(C)`.
/// `f` is a `dim W x dim V` matrix; `t` a symmetric form on `W`.
pub fn prop_a2_kernel(sigma: &Matrix, t: &Matrix, f: &Matrix, c_basis: &[Vector]) -> Result<KernelComparison, AppendixError> {
  let (nv, nw) = (sigma.rows(), t.rows());
  if sigma.cols() != nv || t.cols() != nw || f.rows() != nw || f.cols() != nv || c_basis.iter().any(|v| v.len() != nw) {
    return Err(AppendixError::Shape(format!("sigma {nv}, t {nw}, f {}x{}", f.rows(), f.cols())));
  }
  if !t.is_symmetric() {
    return Err(AppendixError::TNotSymmetric);
  }
  if t.rank() != nw {
    return Err(AppendixError::TDegenerate);
  }
  if &(sigma + &sigma.transpose()) != &t.congruence(&f.transpose(), &f.transpose()) {
    return Err(AppendixError::QuadraticIdentity);
  }
  let vl = Subspace::span(&sigma.left_nullspace(), nv);
  let vr = Subspace::span(&sigma.nullspace(), nv);
  let ker_f = Subspace::span(&f.nullspace(), nv);
  if vl.intersect(&ker_f).dim() != 0 {
    return Err(AppendixError::LeftKernelMeetsKerF);
  }
  // the image of V in (V/V_L) + (V/V_R) + W is Lagrangian only when this holds
  let dimension_count = 2 * sigma.rank() + nw == 2 * nv;
  let c = Subspace::span(c_basis, nw);
  if !is_lagrangian_for(t, &c) {
    return Err(AppendixError::CNotLagrangian);
  }
  let pre = c.preimage(f);
  let formula = vl.intersect(&pre).sum(&vr.intersect(&pre));
  let oracle = restricted_kernel(sigma, &pre);
  Ok(KernelComparison {
    dimension_count,
    domain_dim: pre.dim(),
    kernel_dim: oracle.dim(),
    matches: formula == oracle,
    domain: pre,
    formula,
    oracle,
  })
}

fn small_rational<R: Rng>(rng: &mut R) -> Q {
  let n = rng.gen_range(-3..=3);
  let d = if rng.gen_bool(0.25) { rng.gen_range(2..=3) } else { 1 };
  qf(n, d)
}

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, density: f64) -> Matrix {
  Matrix::from_fn(rows, cols, |_, _| if rng.gen_bool(density) { small_rational(rng) } else { Q::zero() })
}

fn random_invertible<R: Rng>(rng: &mut R, n: usize) -> Matrix {
  loop {
    let m = random_matrix(rng, n, n, 0.7);
    if m.rank() == n {
      return m;
    }
  }
}

/// A Lagrangian subspace of `U + U'` for the symmetric form built from
/// `pairing`: a split one, moved by a Cayley transform of a sparse
/// form-skew endomorphism.
fn random_lagrangian<R: Rng>(rng: &mut R, pairing: &Matrix) -> Vec<Vector> {
  let m = pairing.rows();
  let sym = Matrix::from_fn(2 * m, 2 * m, |r, c| match (r < m, c < m) {
    (true, false) => pairing[(r, c - m)].clone(),
    (false, true) => pairing[(c, r - m)].clone(),
    _ => Q::zero(),
  });
  let k = rng.gen_range(0..=m);
  let a = random_matrix(rng, k, m, 0.7);
  let a_space = Subspace::span(&a.row_vecs(), m);
  // Ann_P(A) = { alpha : a^T P alpha = 0 }
  let ann = if a_space.dim() == 0 { Subspace::full(m) } else { Subspace::span(&(&a_space.basis_matrix() * pairing).nullspace(), m) };
  let mut split: Vec<Vector> = Vec::new();
  for v in a_space.basis() {
    split.push(v.iter().cloned().chain(std::iter::repeat(Q::zero()).take(m)).collect());
  }
  for v in ann.basis() {
    split.push(std::iter::repeat(Q::zero()).take(m).chain(v.iter().cloned()).collect());
  }
  let density = [0.0, 0.15, 0.4][rng.gen_range(0..3)];
  let mut skew = Matrix::zeros(2 * m, 2 * m);
  for i in 0..2 * m {
    for j in i + 1..2 * m {
      if rng.gen_bool(density) {
        let x = small_rational(rng);
        skew[(i, j)] = x.clone();
        skew[(j, i)] = -x;
      }
    }
  }
  // X = S^-1 K is S-skew, so (1 - X)^-1 (1 + X) preserves S
  let x = &sym.inverse().expect("nondegenerate") * &skew;
  let id = Matrix::identity(2 * m);
  let g = match (&id - &x).inverse() {
    Some(inv) => &inv * &(&id + &x),
    None => id,
  };
  split.iter().map(|v| g.mul_vec(v)).collect()
}

#[derive(Debug, Clone)]
pub struct A1Instance {
  pub pairing: Matrix,
  pub lagrangian: Vec<Vector>,
}

pub fn random_a1_instance<R: Rng>(rng: &mut R) -> A1Instance {
  let m = rng.gen_range(1..=4);
  let pairing = random_invertible(rng, m);
  let lagrangian = random_lagrangian(rng, &pairing);
  A1Instance { pairing, lagrangian }
}

#[derive(Debug, Clone)]
pub struct A2Instance {
  pub sigma: Matrix,
  pub t: Matrix,
  pub f: Matrix,
  pub c_basis: Vec<Vector>,
}

/// `sigma = skew + t(f., f.)/2` of rank `dim V - dim W / 2`, with
/// `ker sigma^T n ker f = 0` and a random Lagrangian `C` of a split form `t`.
/// The right kernel is a subspace `K` with `f(K)` isotropic; the skew part is
/// solved from `sigma K = 0`, then everything is moved by a random basis change.
pub fn random_a2_instance<R: Rng>(rng: &mut R) -> A2Instance {
  loop {
    let nv = rng.gen_range(1..=8);
    let half = rng.gen_range(1..=nv.min(4));
    let nw = 2 * half;
    let pairing = random_invertible(rng, half);
    let t = Matrix::from_fn(nw, nw, |r, c| match (r < half, c < half) {
      (true, false) => pairing[(r, c - half)].clone(),
      (false, true) => pairing[(c, r - half)].clone(),
      _ => Q::zero(),
    });
    let c_basis = random_lagrangian(rng, &pairing);
    let iso = random_lagrangian(rng, &pairing);
    let f_density = [0.3, 0.7][rng.gen_range(0..2)];
    let mut f = random_matrix(rng, nw, nv, f_density);
    for i in 0..half {
      let mut col = vec![Q::zero(); nw];
      for v in &iso {
        crate::linalg::axpy(&mut col, &small_rational(rng), v);
      }
      for (r, x) in col.into_iter().enumerate() {
        f[(r, i)] = x;
      }
    }
    let sym = t.congruence(&f.transpose(), &f.transpose()).scale(&qf(1, 2));
    let mut skew = Matrix::zeros(nv, nv);
    for i in 0..half {
      for r in 0..nv {
        skew[(r, i)] = -sym[(r, i)].clone();
      }
      for j in half..nv {
        skew[(i, j)] = sym[(j, i)].clone();
      }
    }
    let density = [0.3, 0.8][rng.gen_range(0..2)];
    for i in half..nv {
      for j in i + 1..nv {
        if rng.gen_bool(density) {
          let x = small_rational(rng);
          skew[(i, j)] = x.clone();
          skew[(j, i)] = -x;
        }
      }
    }
    debug_assert!(skew.is_skew());
    let a = random_invertible(rng, nv);
    let sigma = (&skew + &sym).congruence(&a.transpose(), &a.transpose());
    let f = &f * &a;
    let vl = Subspace::span(&sigma.left_nullspace(), nv);
    if sigma.rank() == nv - half && vl.intersect(&Subspace::span(&f.nullspace(), nv)).dim() == 0 {
      return A2Instance { sigma, t, f, c_basis };
    }
  }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AppendixSummary {
  pub a1_instances: usize,
  pub a1_matches: usize,
  pub a1_nontrivial: usize,
  pub a2_instances: usize,
  pub a2_matches: usize,
  pub a2_nontrivial: usize,
}

impl AppendixSummary {
  pub fn passed(&self) -> bool {
    self.a1_matches == self.a1_instances && self.a2_matches == self.a2_instances
  }
}

/// Both kernel lemmas on `count` seeded random instances each.
pub fn appendix_suite(seed: u64, count: usize) -> Result<AppendixSummary, AppendixError> {
  use rand::SeedableRng;
  let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
  let mut s = AppendixSummary::default();
  for _ in 0..count {
    let a1 = random_a1_instance(&mut rng);
    let r = prop_a1_kernel(&a1.pairing, &a1.lagrangian)?;
    s.a1_instances += 1;
    s.a1_matches += usize::from(r.matches);
    s.a1_nontrivial += usize::from(r.kernel_dim > 0 && r.kernel_dim < r.domain_dim);
  }
  for _ in 0..count {
    let a2 = random_a2_instance(&mut rng);
    let r = prop_a2_kernel(&a2.sigma, &a2.t, &a2.f, &a2.c_basis)?;
    s.a2_instances += 1;
    s.a2_matches += usize::from(r.matches);
    s.a2_nontrivial += usize::from(r.kernel_dim > 0 && r.kernel_dim < r.domain_dim);
  }
  Ok(s)
}

#[cfg(test)]
mod tests {
  use super::*;

  #[test]
  fn a1_trivial_cases() {
    let p = Matrix::identity(2);
    let u: Vec<Vector> = vec![vec![q(1), q(0), q(0), q(0)], vec![q(0), q(1), q(0), q(0)]];
    let r = prop_a1_kernel(&p, &u).unwrap();
    assert!(r.matches);
    assert_eq!(r.kernel_dim, 2);
    // graph of u -> (u, J u) with J skew: L n U = L n U' = 0
    let g: Vec<Vector> = vec![vec![q(1), q(0), q(0), q(1)], vec![q(0), q(1), q(-1), q(0)]];
    let r = prop_a1_kernel(&p, &g).unwrap();
    assert!(r.matches);
    assert_eq!(r.kernel_dim, 0);
    let bad: Vec<Vector> = vec![vec![q(1), q(0), q(1), q(0)]];
    assert_eq!(prop_a1_kernel(&p, &bad).unwrap_err(), AppendixError::NotLagrangian);
  }

  #[test]
  fn a2_with_zero_f() {
    let sigma = Matrix::from_rows(&[vec![q(0), q(1)], vec![q(-1), q(0)]], 2);
    let t = Matrix::from_rows(&[vec![q(0), q(1)], vec![q(1), q(0)]], 2);
    let f = Matrix::zeros(2, 2);
    let r = prop_a2_kernel(&sigma, &t, &f, &[vec![q(1), q(0)]]).unwrap();
    assert!(r.matches);
    assert_eq!((r.domain_dim, r.kernel_dim), (2, 0));
    let e = prop_a2_kernel(&sigma, &t, &f, &[vec![q(1), q(1)]]).unwrap_err();
    assert_eq!(e, AppendixError::CNotLagrangian);
  }

  #[test]
  fn appendix_suite_small() {
    let s = appendix_suite(7, 10).unwrap();
    assert!(s.passed(), "{s:?}");
  }
}
