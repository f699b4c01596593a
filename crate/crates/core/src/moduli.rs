//! Moduli spaces of flat connections on marked surfaces, built by replaying a
//! surface recipe through fusion.
//!
//! Each atomic disk is one group site whose value is the holonomy from its `+`
//! point to its `-` point. The copy of `g` at the `+` point acts by `u^L`, the
//! copy at the `-` point by `-v^R`. Gluing fuses the two acting copies;
//! forgetting a point drops its copy from the acting algebra but keeps it on
//! record, since pointwise data then only makes sense on covectors that
//! annihilate the forgotten directions ("basic" covectors).

use std::sync::Arc;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::invcalc::{
  action_extend, seeded_points, sigma_of, ActionMap, CalcError, Chirality, Frame, GroupPoint, InvariantTensor2, Layout,
  Multivector,
};
use crate::linalg::{Matrix, Subspace, Vector};
use crate::qla::{AlgTensor, QuadraticLieAlgebra, Subalgebra, Symmetry};
use crate::rational::{qf, Q};
use crate::surface::{ArcKind, MarkedSurface, ResolvedStep, Sign, Step, SurfaceError, SurfaceRecipe, SurfaceReport};

#[derive(Debug, thiserror::Error)]
pub enum ModuliError {
  #[error(transparent)]
  Surface(#[from] SurfaceError),
  #[error(transparent)]
  Calc(#[from] CalcError),
  #[error("algebra has no matrix model")]
  NoMatrixModel,
  #[error("copies {0} and {1} cannot be fused: {2}")]
  Incompatible(usize, usize, String),
  #[error("sigma degenerate on leaf pair: rank T^L = {left}, rank T^R = {right}, pairing rank = {pairing}")]
  SigmaDegenerate { left: usize, right: usize, pairing: usize },
  #[error("t is degenerate")]
  DegenerateT,
}

/// One summand of the acting algebra, with its images as invariant fields.
#[derive(Debug, Clone)]
pub struct ActingCopy {
  pub vertex: usize,
  pub sign: Sign,
  /// `rho` of each basis element of `g`.
  pub images: Vec<Multivector>,
}

/// Quasi-Poisson data on a product of groups: acting copies of `g` or `g-bar`,
/// and the bivector.
#[derive(Debug, Clone)]
pub struct QpData {
  pub algebra: Arc<QuadraticLieAlgebra>,
  pub layout: Arc<Layout>,
  pub copies: Vec<ActingCopy>,
  pub forgotten: Vec<ActingCopy>,
  pub pi: Multivector,
  /// `sigma` as accumulated by the fusion rule, including forgotten copies.
  pub sigma_tracked: InvariantTensor2,
}

fn signed_t(g: &QuadraticLieAlgebra, sign: Sign) -> Matrix {
  match sign {
    Sign::Plus => g.t().clone(),
    Sign::Minus => -g.t(),
  }
}

fn copy_algebra(g: &QuadraticLieAlgebra, sign: Sign) -> QuadraticLieAlgebra {
  match sign {
    Sign::Plus => g.clone(),
    Sign::Minus => g.bar(),
  }
}

fn direct_sum_of(g: &QuadraticLieAlgebra, copies: &[ActingCopy]) -> QuadraticLieAlgebra {
  let mut iter = copies.iter();
  let Some(first) = iter.next() else {
    return QuadraticLieAlgebra::new(Vec::new(), Vec::new(), Matrix::zeros(0, 0), None);
  };
  let mut acc = copy_algebra(g, first.sign);
  for c in iter {
    acc = acc.direct_sum(&copy_algebra(g, c.sign));
  }
  acc
}

impl QpData {
  /// Disjoint union of `n` disks.
  pub fn disks(algebra: Arc<QuadraticLieAlgebra>, n: usize) -> Self {
    let layout = Layout::uniform(algebra.clone(), n);
    let d = algebra.dim();
    let mut copies = Vec::new();
    for site in 0..n {
      let plus = (0..d).map(|i| Multivector::generator(layout.clone(), gen(site, Chirality::L, i))).collect();
      let minus =
        (0..d).map(|i| Multivector::generator(layout.clone(), gen(site, Chirality::R, i)).scale(&-Q::one())).collect();
      copies.push(ActingCopy { vertex: 2 * site, sign: Sign::Plus, images: plus });
      copies.push(ActingCopy { vertex: 2 * site + 1, sign: Sign::Minus, images: minus });
    }
    Self {
      pi: Multivector::zero(layout.clone(), 2),
      sigma_tracked: InvariantTensor2::zero(layout.clone()),
      algebra,
      layout,
      copies,
      forgotten: Vec::new(),
    }
  }

  pub fn copy_index(&self, vertex: usize) -> Option<usize> {
    self.copies.iter().position(|c| c.vertex == vertex)
  }

  /// Fuses copy `b` into copy `a`:
  /// `pi -= 1/2 sum t^{ij} rho_a(e_i) ^ rho_b(e_j)`, `sigma += sum t^{ij} rho_b(e_i) (x) rho_a(e_j)`,
  /// and the fused copy acts by `rho_a + rho_b`.
  pub fn internal_fusion(&mut self, a: usize, b: usize) -> Result<(), ModuliError> {
    if a == b || a >= self.copies.len() || b >= self.copies.len() {
      return Err(ModuliError::Incompatible(a, b, "need two distinct copies".into()));
    }
    if self.copies[a].sign != self.copies[b].sign {
      return Err(ModuliError::Incompatible(a, b, "one copy is g, the other g-bar".into()));
    }
    let t = signed_t(&self.algebra, self.copies[a].sign);
    let d = self.algebra.dim();
    let half = qf(1, 2);
    for i in 0..d {
      for j in 0..d {
        let tij = &t[(i, j)];
        if tij.is_zero() {
          continue;
        }
        let (ra, rb) = (&self.copies[a].images[i], &self.copies[b].images[j]);
        let w = ra.wedge(rb)?;
        self.pi = self.pi.sub(&w.scale(&(tij * &half)))?;
        let (rbi, raj) = (&self.copies[b].images[i], &self.copies[a].images[j]);
        self.sigma_tracked.add_product(rbi, raj, tij);
      }
    }
    let fused: Vec<Multivector> =
      (0..d).map(|i| self.copies[a].images[i].add(&self.copies[b].images[i])).collect::<Result<_, _>>()?;
    self.copies[a].images = fused;
    self.copies.remove(b);
    Ok(())
  }

  pub fn forget(&mut self, idx: usize) {
    let c = self.copies.remove(idx);
    self.forgotten.push(c);
  }

  /// The acting algebra: copies of `g` for `+` points and `g-bar` for `-` points.
  pub fn acting_algebra(&self) -> Arc<QuadraticLieAlgebra> {
    Arc::new(direct_sum_of(&self.algebra, &self.copies))
  }

  /// Acting algebra including forgotten copies.
  pub fn full_algebra(&self) -> Arc<QuadraticLieAlgebra> {
    let all: Vec<ActingCopy> = self.copies.iter().chain(&self.forgotten).cloned().collect();
    Arc::new(direct_sum_of(&self.algebra, &all))
  }

  pub fn rho(&self) -> ActionMap {
    ActionMap::new(self.acting_algebra(), self.copies.iter().flat_map(|c| c.images.clone()).collect())
  }

  pub fn full_rho(&self) -> ActionMap {
    ActionMap::new(
      self.full_algebra(),
      self.copies.iter().chain(&self.forgotten).flat_map(|c| c.images.clone()).collect(),
    )
  }

  /// `sigma = pi + 1/2 rho(x)rho(t_d)` for the live acting algebra.
  pub fn sigma(&self) -> InvariantTensor2 {
    let rho = self.rho();
    let t = AlgTensor::from_matrix(rho.acting.t(), Symmetry::Symmetric);
    sigma_of(&self.pi, &rho, &t).expect("same layout")
  }

  /// `sigma` computed with forgotten copies still acting; equals the tracked one.
  pub fn sigma_full(&self) -> InvariantTensor2 {
    let rho = self.full_rho();
    let t = AlgTensor::from_matrix(rho.acting.t(), Symmetry::Symmetric);
    sigma_of(&self.pi, &rho, &t).expect("same layout")
  }

  /// Pointwise data at `p`.
  pub fn at(&self, p: &GroupPoint) -> Result<PointData, ModuliError> {
    let frame = Frame::at(&self.layout, p)?;
    let n = self.layout.total_dim();
    let cols = |copies: &[ActingCopy]| -> Vec<Vector> {
      copies.iter().flat_map(|c| c.images.iter().map(|m| frame.vector(m)).collect::<Vec<_>>()).collect()
    };
    let live = cols(&self.copies);
    let dead = cols(&self.forgotten);
    let rho = Matrix::from_rows(&live, n).transpose();
    let rho_forgotten = Matrix::from_rows(&dead, n).transpose();
    let basic = Subspace::span(&dead, n).annihilator();
    let sigma = frame.evaluate_tensor2(&self.sigma())?.to_matrix();
    let pi = frame.evaluate(&self.pi)?.to_matrix();
    Ok(PointData { frame, rho, rho_forgotten, basic, sigma, pi })
  }

  /// `[pi,pi] = 2 rho(phi)` and `[rho(u), pi] = 0`, with forgotten copies still
  /// acting, plus the same identity for the live algebra on basic covectors.
  pub fn check_quasi_poisson(&self, points: &[GroupPoint]) -> Result<QpCheck, ModuliError> {
    let pipi = self.pi.schouten(&self.pi)?;
    let full = self.full_rho();
    let live = self.rho();
    let two = Q::from_integer(2.into());
    let rhs_full = action_extend(&full, &full.acting.cartan_trivector()).scale(&two);
    let rhs_live = action_extend(&live, &live.acting.cartan_trivector()).scale(&two);
    let invariance: Vec<Multivector> =
      full.images.iter().map(|r| r.schouten(&self.pi)).collect::<Result<_, _>>()?;
    let diff_full = pipi.sub(&rhs_full)?;
    let diff_live = pipi.sub(&rhs_live)?;
    let mut out = QpCheck { points: points.len(), bracket: true, invariance: true, reduced_bracket: true };
    for p in points {
      let frame = Frame::at(&self.layout, p)?;
      if !frame.evaluate(&diff_full)?.is_zero() {
        out.bracket = false;
      }
      if invariance.iter().any(|m| !frame.evaluate(m).map(|t| t.is_zero()).unwrap_or(false)) {
        out.invariance = false;
      }
      let dl = frame.evaluate(&diff_live)?;
      let basic = self.at(p)?.basic;
      let b = basic.basis();
      for x in b {
        for y in b {
          for z in b {
            if !dl.contract(&[x, y, z]).is_zero() {
              out.reduced_bracket = false;
            }
          }
        }
      }
    }
    Ok(out)
  }
}

fn gen(site: usize, c: Chirality, i: usize) -> crate::invcalc::Generator {
  crate::invcalc::Generator::new(site, c, i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QpCheck {
  pub points: usize,
  pub bracket: bool,
  pub invariance: bool,
  pub reduced_bracket: bool,
}

impl QpCheck {
  pub fn passed(&self) -> bool {
    self.bracket && self.invariance && self.reduced_bracket
  }
}

/// Frame data at one point. Matrices act on left-frame coordinates.
#[derive(Debug, Clone)]
pub struct PointData {
  pub frame: Frame,
  /// Columns are `rho(e_a)` for the live acting algebra.
  pub rho: Matrix,
  pub rho_forgotten: Matrix,
  /// Covectors annihilating the forgotten directions.
  pub basic: Subspace,
  pub sigma: Matrix,
  pub pi: Matrix,
}

impl PointData {
  /// `sigma` restricted to the basic covectors, in their basis.
  pub fn sigma_on_basic(&self) -> Matrix {
    let b = self.basic.basis_matrix();
    self.sigma.congruence(&b, &b)
  }

  pub fn pi_on_basic(&self) -> Matrix {
    let b = self.basic.basis_matrix();
    self.pi.congruence(&b, &b)
  }

  /// Tangent vectors as functionals on the basic covectors.
  pub fn to_basic_dual(&self, v: &[Q]) -> Vector {
    self.basic.basis_matrix().mul_vec(v)
  }
}

/// A holonomy word: travel-ordered steps, `hol = x_k ... x_1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HolonomyWord {
  pub steps: Vec<Step>,
}

impl HolonomyWord {
  pub fn new(steps: Vec<Step>) -> Self {
    Self { steps }
  }

  pub fn eval(&self, p: &GroupPoint) -> Matrix {
    let n = p.values[0].rows();
    let mut h = Matrix::identity(n);
    for s in &self.steps {
      let x = step_value(p, s);
      h = &x * &h;
    }
    h
  }

  /// Left-trivialized differential `h^-1 dh` as a `dim g x dim M` matrix:
  /// `sum_i Ad_{P_(i-1)^-1} (x_i^-1 dx_i)` with `P_(i-1) = x_(i-1) ... x_1`.
  pub fn differential(&self, g: &QuadraticLieAlgebra, layout: &Layout, p: &GroupPoint) -> Result<Matrix, CalcError> {
    let d = g.dim();
    let mut out = Matrix::zeros(d, layout.total_dim());
    let n = p.values[0].rows();
    let mut prefix = Matrix::identity(n);
    for s in &self.steps {
      let pinv = prefix.inverse().expect("group element");
      let ad_pinv = crate::invcalc::adjoint(g, &pinv)?;
      // x^-1 dx is xi_e for x = g_e and -Ad_{g_e} xi_e for x = g_e^-1
      let local = if s.exponent > 0 {
        Matrix::identity(d)
      } else {
        -&crate::invcalc::adjoint(g, &p.values[s.edge])?
      };
      let block = &ad_pinv * &local;
      let off = layout.offset(s.edge);
      for r in 0..d {
        for c in 0..d {
          out[(r, off + c)] += block[(r, c)].clone();
        }
      }
      prefix = &step_value(p, s) * &prefix;
    }
    Ok(out)
  }
}

fn step_value(p: &GroupPoint, s: &Step) -> Matrix {
  let g = &p.values[s.edge];
  if s.exponent > 0 {
    g.clone()
  } else {
    g.inverse().expect("group element")
  }
}

/// A left or right arc and the acting copies at its ends.
#[derive(Debug, Clone, Serialize)]
pub struct ArcMap {
  pub word: HolonomyWord,
  pub from: usize,
  pub to: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CentralMaps {
  pub left: Vec<ArcMap>,
  pub right: Vec<ArcMap>,
  pub uncut: Vec<HolonomyWord>,
}

#[derive(Debug, Clone)]
pub struct ModuliSpace {
  pub recipe: SurfaceRecipe,
  pub surface: MarkedSurface,
  pub report: SurfaceReport,
  pub data: QpData,
}

impl ModuliSpace {
  pub fn build(recipe: &SurfaceRecipe, algebra: Arc<QuadraticLieAlgebra>) -> Result<Self, ModuliError> {
    if algebra.matrix_model().is_none() {
      return Err(ModuliError::NoMatrixModel);
    }
    let (surface, steps) = recipe.replay()?;
    let mut data = QpData::disks(algebra, recipe.disks);
    for step in steps {
      match step {
        ResolvedStep::Glue { x, y } => {
          let (a, b) = (data.copy_index(x).expect("live copy"), data.copy_index(y).expect("live copy"));
          data.internal_fusion(a, b)?;
        }
        ResolvedStep::Forget { x } => {
          let a = data.copy_index(x).expect("live copy");
          data.forget(a);
        }
      }
    }
    let report = surface.analyze();
    Ok(Self { recipe: recipe.clone(), surface, report, data })
  }

  pub fn algebra(&self) -> &Arc<QuadraticLieAlgebra> {
    &self.data.algebra
  }

  pub fn layout(&self) -> &Arc<Layout> {
    &self.data.layout
  }

  /// Dimension of the moduli space after the forgotten directions are quotiented.
  pub fn dim(&self) -> usize {
    self.layout().total_dim() - self.data.forgotten.len() * self.algebra().dim()
  }

  pub fn points(&self, seed: u64, count: usize) -> Result<Vec<GroupPoint>, ModuliError> {
    Ok(seeded_points(self.layout(), seed, count)?)
  }

  pub fn central_maps(&self) -> CentralMaps {
    let arc = |a: &crate::surface::BoundaryArc| ArcMap { word: HolonomyWord::new(a.path.clone()), from: a.from, to: a.to };
    CentralMaps {
      left: self.report.left_arcs().map(arc).collect(),
      right: self.report.right_arcs().map(arc).collect(),
      uncut: self.report.uncut.iter().map(|c| HolonomyWord::new(c.path.clone())).collect(),
    }
  }

  /// Action of the live acting algebra on the target group of an arc, in the
  /// left frame at `h`: `u_from - Ad_{h^-1} u_to` (a `dim g x dim d` matrix).
  pub fn target_action(&self, arc: &ArcMap, p: &GroupPoint) -> Result<Matrix, ModuliError> {
    let g = self.algebra();
    let d = g.dim();
    let h = arc.word.eval(p);
    let ad_hinv = crate::invcalc::adjoint(g, &h.inverse().expect("group element"))?;
    let mut out = Matrix::zeros(d, d * self.data.copies.len());
    for (k, c) in self.data.copies.iter().enumerate() {
      if c.vertex == arc.from {
        for i in 0..d {
          out[(i, k * d + i)] += Q::one();
        }
      }
      if c.vertex == arc.to {
        for r in 0..d {
          for i in 0..d {
            out[(r, k * d + i)] -= ad_hinv[(r, i)].clone();
          }
        }
      }
    }
    Ok(out)
  }

  pub fn check_centrality(&self, p: &GroupPoint) -> Result<CentralityReport, ModuliError> {
    self.check_centrality_with(p, None)
  }

  /// Centrality against an explicit `sigma` matrix (for negative controls).
  pub fn check_centrality_with(&self, p: &GroupPoint, sigma: Option<&Matrix>) -> Result<CentralityReport, ModuliError> {
    let pd = self.data.at(p)?;
    let s = sigma.unwrap_or(&pd.sigma);
    let maps = self.central_maps();
    let g = self.algebra();
    let basic = pd.basic.basis_matrix();
    let mut report = CentralityReport { left_central: true, right_central: true, equivariant: true, violations: Vec::new() };
    for (kind, arcs) in [(ArcKind::Left, &maps.left), (ArcKind::Right, &maps.right)] {
      for (ai, arc) in arcs.iter().enumerate() {
        let dm = arc.word.differential(g, self.layout(), p)?;
        // equivariance: d mu . rho_M = rho_N
        if &dm * &pd.rho != self.target_action(arc, p)? {
          report.equivariant = false;
        }
        for a in 0..g.dim() {
          let beta = dm.row(a).to_vec();
          // left: sigma(beta, w) = 0; right: sigma(w, beta) = 0, for basic w
          let v = match kind {
            ArcKind::Left => s.vec_mul(&beta),
            _ => s.mul_vec(&beta),
          };
          let restricted = basic.mul_vec(&v);
          if restricted.iter().any(|x| !x.is_zero()) {
            match kind {
              ArcKind::Left => report.left_central = false,
              _ => report.right_central = false,
            }
            report.violations.push(format!("{kind:?} arc {ai}, covector {a}"));
          }
        }
      }
    }
    Ok(report)
  }

  /// Differentials of `tr(hol^k)`, `k = 1..n`, for every uncut circle, as covectors.
  pub fn uncut_differentials(&self, p: &GroupPoint) -> Result<Vec<(usize, Vec<Vector>)>, ModuliError> {
    let g = self.algebra();
    let model = g.matrix_model().ok_or(ModuliError::NoMatrixModel)?;
    let mut out = Vec::new();
    for (ci, word) in self.central_maps().uncut.iter().enumerate() {
      let h = word.eval(p);
      let dm = word.differential(g, self.layout(), p)?;
      let mut rows = Vec::new();
      let mut hk = Matrix::identity(model.size());
      for k in 1..=model.size() {
        hk = &hk * &h;
        // d tr(h^k)(X) = k tr(h^k X) for X = h^-1 dh
        let on_g: Vector = model
          .basis()
          .iter()
          .map(|b| {
            let m = &hk * b;
            (0..m.rows()).map(|i| m[(i, i)].clone()).sum::<Q>() * Q::from_integer(k.into())
          })
          .collect();
        rows.push(dm.vec_mul(&on_g));
      }
      out.push((ci, rows));
    }
    Ok(out)
  }

  pub fn leaf_ranks(&self, p: &GroupPoint) -> Result<LeafRanks, ModuliError> {
    let pd = self.data.at(p)?;
    let k = pd.sigma_on_basic();
    let pim = pd.pi_on_basic();
    let rho_cols: Vec<Vector> = (0..pd.rho.cols()).map(|c| pd.to_basic_dual(&pd.rho.col(c))).collect();
    let m = pd.basic.dim();
    let rho_space = Subspace::span(&rho_cols, m);
    let tl = k.column_space();
    let tr = k.transpose().column_space();
    let tbig = pim.transpose().column_space().sum(&rho_space);
    let big_consistent = tl.sum(&rho_space) == tbig && tr.sum(&rho_space) == tbig;

    // left kernel of sigma: left-arc pullbacks and uncut class differentials
    let g = self.algebra();
    let mut left_rows = Vec::new();
    for arc in &self.central_maps().left {
      let dm = arc.word.differential(g, self.layout(), p)?;
      left_rows.extend(dm.row_vecs());
    }
    let left_rank = Subspace::span(&left_rows, self.layout().total_dim()).dim();
    let mut uncut_rows = Vec::new();
    let mut generic = true;
    for (ci, rows) in self.uncut_differentials(p)? {
      let r = Subspace::span(&rows, self.layout().total_dim()).dim();
      let h = self.central_maps().uncut[ci].eval(p);
      let ad = crate::invcalc::adjoint(g, &h)?;
      let centralizer = (&ad - &Matrix::identity(g.dim())).nullspace().len();
      if r != centralizer {
        generic = false;
      }
      uncut_rows.extend(rows);
    }
    let uncut_rank = Subspace::span(&uncut_rows, self.layout().total_dim()).dim();
    let expected = m as i64 - left_rank as i64 - uncut_rank as i64;
    Ok(LeafRanks {
      dim: m,
      left: tl.dim(),
      right: tr.dim(),
      big: tbig.dim(),
      rho_rank: rho_space.dim(),
      big_consistent,
      left_pullback_rank: left_rank,
      uncut_rank,
      generic,
      expected_left: expected,
      theorem_match: generic && expected == tl.dim() as i64,
    })
  }

  /// `sigma^-1` on `T^L x T^R`, computed from two different preimage choices.
  pub fn sigma_inverse_on_leaves(&self, p: &GroupPoint) -> Result<SigmaInverse, ModuliError> {
    if !self.algebra().is_nondegenerate() {
      return Err(ModuliError::DegenerateT);
    }
    let pd = self.data.at(p)?;
    let k = pd.sigma_on_basic();
    sigma_inverse(&k)
  }

  /// Stabilizer in the acting algebra of the left leaf through `p`:
  /// `{u : rho(u) in T^L}`.
  pub fn left_leaf_stabilizer(&self, p: &GroupPoint) -> Result<Subspace, ModuliError> {
    let pd = self.data.at(p)?;
    let k = pd.sigma_on_basic();
    let tl = k.column_space();
    let rho_basic = &pd.basic.basis_matrix() * &pd.rho;
    // u with rho_basic u in tl: preimage of tl
    Ok(tl.preimage(&rho_basic))
  }

  /// Stabilizer of `mu_L(p)` under the action on the left target groups.
  pub fn target_stabilizer(&self, p: &GroupPoint, kind: ArcKind) -> Result<Subspace, ModuliError> {
    let maps = self.central_maps();
    let arcs = if kind == ArcKind::Left { &maps.left } else { &maps.right };
    let dd = self.data.copies.len() * self.algebra().dim();
    let mut stacked = Matrix::zeros(0, dd);
    for a in arcs {
      stacked = stacked.vstack(&self.target_action(a, p)?);
    }
    Ok(Subspace::span(&stacked.nullspace(), dd))
  }
}

/// Nondegenerate pairing check of a `sigma` matrix between its column and row spaces.
pub fn sigma_inverse(k: &Matrix) -> Result<SigmaInverse, ModuliError> {
  let tl = k.column_space();
  let tr = k.transpose().column_space();
  let left_kernel = k.left_nullspace();
  let right_kernel = k.nullspace();
  let pairing = |shift: bool| -> Matrix {
    // u_i = K b_i, v_j = K^T a_j, entry a_j^T K b_i
    let bs: Vec<Vector> = tl
      .basis()
      .iter()
      .map(|u| {
        let mut b = k.solve(u).expect("u in column space");
        if shift {
          if let Some(z) = right_kernel.first() {
            crate::linalg::axpy(&mut b, &Q::one(), z);
          }
        }
        b
      })
      .collect();
    let as_: Vec<Vector> = tr
      .basis()
      .iter()
      .map(|v| {
        let mut a = k.transpose().solve(v).expect("v in row space");
        if shift {
          if let Some(z) = left_kernel.first() {
            crate::linalg::axpy(&mut a, &Q::one(), z);
          }
        }
        a
      })
      .collect();
    Matrix::from_fn(tl.dim(), tr.dim(), |i, j| k.bilinear(&as_[j], &bs[i]))
  };
  let m1 = pairing(false);
  let m2 = pairing(true);
  let rank = m1.rank();
  let nondegenerate = tl.dim() == tr.dim() && rank == tl.dim();
  if tl.dim() != tr.dim() {
    return Err(ModuliError::SigmaDegenerate { left: tl.dim(), right: tr.dim(), pairing: rank });
  }
  Ok(SigmaInverse { well_defined: m1 == m2, nondegenerate, matrix: m1 })
}

#[derive(Debug, Clone, Serialize)]
pub struct CentralityReport {
  pub left_central: bool,
  pub right_central: bool,
  pub equivariant: bool,
  pub violations: Vec<String>,
}

impl CentralityReport {
  pub fn passed(&self) -> bool {
    self.left_central && self.right_central && self.equivariant
  }
}

#[derive(Debug, Clone, Serialize)]
pub struct LeafRanks {
  /// Dimension of the (reduced) moduli space.
  pub dim: usize,
  pub left: usize,
  pub right: usize,
  pub big: usize,
  pub rho_rank: usize,
  /// `T^L + rho(d) = T^big = T^R + rho(d)`.
  pub big_consistent: bool,
  pub left_pullback_rank: usize,
  pub uncut_rank: usize,
  /// Every uncut holonomy has class-function differentials of full rank.
  pub generic: bool,
  pub expected_left: i64,
  pub theorem_match: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaInverse {
  pub well_defined: bool,
  pub nondegenerate: bool,
  #[serde(skip)]
  pub matrix: Matrix,
}

/// Whether a subspace of the acting algebra is coisotropic and Lagrangian for `t_d`.
pub fn stabilizer_verdict(d: &Arc<QuadraticLieAlgebra>, stab: &Subspace) -> (bool, bool) {
  match Subalgebra::new(d.clone(), stab.basis()) {
    Ok(s) => {
      let r = s.coisotropy_report();
      (r.is_coisotropic, r.is_lagrangian())
    }
    Err(_) => (false, false),
  }
}

#[cfg(test)]
mod tests {
  use super::*;
  use crate::qla::sl2;
  use crate::surface::suite;

  fn build(r: SurfaceRecipe) -> ModuliSpace {
    ModuliSpace::build(&r, Arc::new(sl2())).unwrap()
  }

  #[test]
  fn disk_is_commutative() {
    let m = build(suite::disk());
    assert!(m.data.pi.is_zero());
    let pts = m.points(1, 3).unwrap();
    for p in &pts {
      // formally 1/2 (t^L - t^R), which vanishes pointwise
      assert!(m.data.at(p).unwrap().sigma.is_zero());
    }
    assert!(m.data.check_quasi_poisson(&pts).unwrap().passed());
    for p in &pts {
      assert!(m.check_centrality(p).unwrap().passed());
      let r = m.leaf_ranks(p).unwrap();
      assert_eq!((r.left, r.right, r.big), (0, 0, 3));
    }
  }

  #[test]
  fn glued_disks_are_quasi_poisson() {
    for r in [suite::three_marked_disk(), suite::annulus()] {
      let m = build(r);
      let pts = m.points(2, 3).unwrap();
      let check = m.data.check_quasi_poisson(&pts).unwrap();
      assert!(check.passed(), "{check:?}");
      for p in &pts {
        let c = m.check_centrality(p).unwrap();
        assert!(c.passed(), "{c:?}");
      }
    }
  }

  #[test]
  fn tracked_sigma_matches_formula() {
    let m = build(suite::annulus());
    let pts = m.points(3, 3).unwrap();
    for p in &pts {
      let f = Frame::at(m.layout(), p).unwrap();
      assert_eq!(
        f.evaluate_tensor2(&m.data.sigma_tracked).unwrap(),
        f.evaluate_tensor2(&m.data.sigma_full()).unwrap()
      );
    }
  }
}
