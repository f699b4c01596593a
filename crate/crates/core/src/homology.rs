//! The shifted intersection pairing on twisted relative homology, computed
//! directly from the ribbon graph.
//!
//! A cotangent vector of `G^E` is a graph chain: one `g*` coefficient per edge,
//! based at the edge tail. The pairing counts, at each marked point, the germs
//! of the second chain that the shifted point separates from the first.

use std::sync::Arc;

use num_traits::Zero;
use serde::Serialize;

use crate::invcalc::{adjoint, CalcError, GroupPoint};
use crate::linalg::{Matrix, Subspace, Vector};
use crate::qla::QuadraticLieAlgebra;
use crate::surface::{edge_of, is_tail, MarkedSurface, Sign, Step};

#[derive(Debug, thiserror::Error)]
pub enum HomologyError {
  #[error(transparent)]
  Calc(#[from] CalcError),
  #[error("t is degenerate; duality fails")]
  DegenerateT,
  #[error("split has {got} entries for {expected} vertices")]
  Split { expected: usize, got: usize },
}

/// Edge holonomies with coadjoint transport of `g*` coefficients.
#[derive(Debug, Clone)]
pub struct LocalSystem {
  pub algebra: Arc<QuadraticLieAlgebra>,
  pub point: GroupPoint,
  // coadjoint transport from tail to head of each edge
  edge_transport: Vec<Matrix>,
}

impl LocalSystem {
  pub fn new(algebra: Arc<QuadraticLieAlgebra>, point: GroupPoint) -> Result<Self, HomologyError> {
    let edge_transport = point
      .values
      .iter()
      .map(|g| {
        let ginv = g.inverse().ok_or(CalcError::BadPoint { site: 0, reason: "singular matrix".into() })?;
        Ok(adjoint(&algebra, &ginv)?.transpose())
      })
      .collect::<Result<_, CalcError>>()?;
    Ok(Self { algebra, point, edge_transport })
  }

  pub fn dim(&self) -> usize {
    self.algebra.dim()
  }

  pub fn n_edges(&self) -> usize {
    self.point.values.len()
  }

  /// Transport of a coefficient along one step.
  pub fn step_transport(&self, s: &Step) -> Matrix {
    let m = &self.edge_transport[s.edge];
    if s.exponent > 0 {
      m.clone()
    } else {
      m.inverse().expect("invertible transport")
    }
  }

  /// Transport along a travel-ordered word (composite of its steps).
  pub fn transport(&self, word: &[Step]) -> Matrix {
    word.iter().fold(Matrix::identity(self.dim()), |acc, s| &self.step_transport(s) * &acc)
  }

  /// Chain of a path carrying coefficient `lambda` given at its start, in
  /// `(g*)^E` coordinates. Each traversed edge gets the coefficient
  /// transported to its tail, signed by the direction of travel.
  pub fn path_chain(&self, word: &[Step], lambda: &[crate::rational::Q]) -> Vector {
    let d = self.dim();
    let mut out = vec![crate::rational::Q::zero(); d * self.n_edges()];
    let mut here = lambda.to_vec();
    for s in word {
      let at_tail = if s.exponent > 0 { here.clone() } else { self.step_transport(s).mul_vec(&here) };
      let coef: Vector = if s.exponent > 0 { at_tail } else { at_tail.iter().map(|x| -x.clone()).collect() };
      for (k, x) in coef.into_iter().enumerate() {
        out[s.edge * d + k] += x;
      }
      here = self.step_transport(s).mul_vec(&here);
    }
    out
  }
}

/// The shifted intersection pairing for the given sign of every vertex.
/// Vertex signs default to the surface's own marks; unmarked vertices keep
/// the sign they had when marked.
pub fn intersection_sigma(surface: &MarkedSurface, ls: &LocalSystem, split: Option<&[Sign]>) -> Result<Matrix, HomologyError> {
  let d = ls.dim();
  let n = d * ls.n_edges();
  let t = ls.algebra.t();
  let ids: Vec<usize> = surface.vertex_ids().collect();
  if let Some(s) = split {
    if s.len() != ids.len() {
      return Err(HomologyError::Split { expected: ids.len(), got: s.len() });
    }
  }
  let sign_of = |k: usize| split.map(|s| s[k]).unwrap_or_else(|| surface.vertex(ids[k]).unwrap().sign);
  let mut out = Matrix::zeros(n, n);
  let add_block = |out: &mut Matrix, ei: usize, ej: usize, m: &Matrix| {
    for r in 0..d {
      for c in 0..d {
        out[(ei * d + r, ej * d + c)] += m[(r, c)].clone();
      }
    }
  };
  // germ data: edge, orientation, transport of the edge coefficient to the germ
  let germ = |h: usize| {
    let e = edge_of(h);
    if is_tail(h) {
      (e, 1i64, Matrix::identity(d))
    } else {
      (e, -1i64, ls.edge_transport[e].clone())
    }
  };
  let mut end_signs = vec![[None, None]; ls.n_edges()];
  for (k, &v) in ids.iter().enumerate() {
    let order = &surface.vertex(v).unwrap().order;
    let sign = sign_of(k);
    for &h in order {
      end_signs[edge_of(h)][usize::from(!is_tail(h))] = Some(sign);
    }
    for (i, &hi) in order.iter().enumerate() {
      for (j, &hj) in order.iter().enumerate() {
        let crosses = match sign {
          Sign::Plus => i < j,
          Sign::Minus => j < i,
        };
        if !crosses {
          continue;
        }
        let (ei, oi, ti) = germ(hi);
        let (ej, oj, tj) = germ(hj);
        let eps = if sign == Sign::Plus { 1 } else { -1 };
        let coeff = crate::rational::q(eps * oi * oj);
        let block = &(&ti.transpose() * t) * &tj;
        add_block(&mut out, ei, ej, &block.scale(&coeff));
      }
    }
  }
  // an edge whose ends are shifted the same way meets its own push-off once
  for (e, ends) in end_signs.iter().enumerate() {
    let mid = match (ends[0], ends[1]) {
      (Some(Sign::Plus), Some(Sign::Plus)) => 1,
      (Some(Sign::Minus), Some(Sign::Minus)) => -1,
      _ => 0,
    };
    if mid != 0 {
      add_block(&mut out, e, e, &t.scale(&crate::rational::q(mid)));
    }
  }
  Ok(out)
}

/// `(sigma - sigma^T) / 2`.
pub fn skew_pi(surface: &MarkedSurface, ls: &LocalSystem, split: Option<&[Sign]>) -> Result<Matrix, HomologyError> {
  let s = intersection_sigma(surface, ls, split)?;
  Ok((&s - &s.transpose()).scale(&crate::rational::qf(1, 2)))
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnihilatorImage {
  #[serde(skip)]
  pub space: Subspace,
  pub left_arc_dim: usize,
  pub uncut_dims: Vec<usize>,
}

/// Span of left-arc chains (any coefficient) and uncut-circle chains with
/// coefficients fixed by the circle's coadjoint holonomy.
pub fn annihilator_image(surface: &MarkedSurface, ls: &LocalSystem) -> Result<AnnihilatorImage, HomologyError> {
  if !ls.algebra.is_nondegenerate() {
    return Err(HomologyError::DegenerateT);
  }
  let report = surface.analyze();
  let d = ls.dim();
  let n = d * ls.n_edges();
  let mut chains = Vec::new();
  for arc in report.left_arcs() {
    for k in 0..d {
      chains.push(ls.path_chain(&arc.path, &ls.algebra.basis_vec(k)));
    }
  }
  let left_arc_dim = Subspace::span(&chains, n).dim();
  let mut uncut_dims = Vec::new();
  for c in &report.uncut {
    let m = ls.transport(&c.path);
    let fixed = (&m - &Matrix::identity(d)).nullspace();
    uncut_dims.push(fixed.len());
    for lambda in fixed {
      chains.push(ls.path_chain(&c.path, &lambda));
    }
  }
  Ok(AnnihilatorImage { space: Subspace::span(&chains, n), left_arc_dim, uncut_dims })
}

/// Left kernel of a pairing restricted to a subspace of covectors.
pub fn left_kernel_on(sigma: &Matrix, domain: &Subspace) -> Subspace {
  let b = domain.basis_matrix();
  let k = sigma.congruence(&b, &b);
  let coeffs = k.left_nullspace();
  let vecs: Vec<Vector> = coeffs.iter().map(|c| b.vec_mul(c)).collect();
  Subspace::span(&vecs, sigma.rows())
}

#[cfg(test)]
mod tests {
  use super::*;
  use crate::invcalc::{seeded_points, Layout};
  use crate::qla::sl2;
  use crate::surface::suite;

  #[test]
  fn transport_composes() {
    let g = Arc::new(sl2());
    let layout = Layout::uniform(g.clone(), 3);
    let p = seeded_points(&layout, 5, 1).unwrap().remove(0);
    let ls = LocalSystem::new(g, p).unwrap();
    let w1 = vec![Step { edge: 0, exponent: 1 }, Step { edge: 2, exponent: -1 }];
    let w2 = vec![Step { edge: 1, exponent: 1 }];
    let whole: Vec<Step> = w1.iter().chain(&w2).copied().collect();
    assert_eq!(ls.transport(&whole), &ls.transport(&w2) * &ls.transport(&w1));
    assert_eq!(ls.transport(&[]), Matrix::identity(3));
    let back = vec![Step { edge: 0, exponent: 1 }, Step { edge: 0, exponent: -1 }];
    assert_eq!(ls.transport(&back), Matrix::identity(3));
  }

  #[test]
  fn disk_pairing_vanishes() {
    let g = Arc::new(sl2());
    let s = suite::disk().build().unwrap();
    let layout = Layout::uniform(g.clone(), 1);
    for p in seeded_points(&layout, 1, 3).unwrap() {
      let ls = LocalSystem::new(g.clone(), p).unwrap();
      assert!(intersection_sigma(&s, &ls, None).unwrap().is_zero());
    }
  }
}
