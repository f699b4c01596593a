//! Marked surfaces as ribbon graphs.
//!
//! Each atomic disk contributes one edge from its `+` point (tail) to its `-`
//! point (head); half-edge `2k` is the tail of edge `k`, `2k + 1` its head.
//! Every vertex lists its half-edges counterclockwise; the marked corner of a
//! marked vertex sits between its last and first half-edge.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SurfaceError {
  #[error("unknown marked point {0:?}")]
  UnknownPoint(String),
  #[error("point {0:?} is no longer marked")]
  NotMarked(String),
  #[error("cannot glue a point to itself")]
  SamePoint,
  #[error("cannot glue points of different signs")]
  MixedSigns,
  #[error("forgetting {0:?} would leave a component without marked points")]
  Orphan(String),
  #[error("malformed recipe: {0}")]
  Recipe(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sign {
  #[serde(rename = "+")]
  Plus,
  #[serde(rename = "-")]
  Minus,
}

impl fmt::Display for Sign {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    f.write_str(match self {
      Sign::Plus => "+",
      Sign::Minus => "-",
    })
  }
}

pub type HalfEdge = usize;

pub fn edge_of(h: HalfEdge) -> usize {
  h / 2
}

pub fn is_tail(h: HalfEdge) -> bool {
  h % 2 == 0
}

pub fn opposite(h: HalfEdge) -> HalfEdge {
  h ^ 1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Vertex {
  pub sign: Sign,
  pub marked: bool,
  /// Half-edges in counterclockwise order.
  pub order: Vec<HalfEdge>,
  /// Every recipe name that refers to this vertex.
  pub names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedSurface {
  // merged-away vertices are `None`, so indices stay stable
  vertices: Vec<Option<Vertex>>,
  n_edges: usize,
}

/// One traversal of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
  pub edge: usize,
  /// `+1` from tail to head, `-1` against.
  pub exponent: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArcKind {
  Left,
  Right,
  Neither,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundaryArc {
  pub kind: ArcKind,
  pub from: usize,
  pub to: usize,
  /// Edges in travel order.
  pub path: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UncutCircle {
  pub path: Vec<Step>,
  /// Vertices passed, starting where `path` starts.
  pub vertices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SurfaceReport {
  pub arcs: Vec<BoundaryArc>,
  pub uncut: Vec<UncutCircle>,
  pub euler_characteristic: i64,
  pub boundary_components: usize,
  pub components: usize,
  pub genus: usize,
  pub left_count: usize,
  pub right_count: usize,
  pub neither_count: usize,
  pub valid: bool,
}

impl SurfaceReport {
  pub fn left_arcs(&self) -> impl Iterator<Item = &BoundaryArc> {
    self.arcs.iter().filter(|a| a.kind == ArcKind::Left)
  }

  pub fn right_arcs(&self) -> impl Iterator<Item = &BoundaryArc> {
    self.arcs.iter().filter(|a| a.kind == ArcKind::Right)
  }
}

impl MarkedSurface {
  /// Disjoint union of `k` disks, each with points `"{i}+"` and `"{i}-"`.
  pub fn disks(k: usize) -> Self {
    let mut vertices = Vec::with_capacity(2 * k);
    for i in 0..k {
      vertices.push(Some(Vertex { sign: Sign::Plus, marked: true, order: vec![2 * i], names: vec![format!("{i}+")] }));
      vertices.push(Some(Vertex { sign: Sign::Minus, marked: true, order: vec![2 * i + 1], names: vec![format!("{i}-")] }));
    }
    Self { vertices, n_edges: k }
  }

  pub fn disk() -> Self {
    Self::disks(1)
  }

  pub fn n_edges(&self) -> usize {
    self.n_edges
  }

  pub fn vertex(&self, v: usize) -> Option<&Vertex> {
    self.vertices.get(v).and_then(Option::as_ref)
  }

  pub fn vertex_ids(&self) -> impl Iterator<Item = usize> + '_ {
    self.vertices.iter().enumerate().filter(|(_, v)| v.is_some()).map(|(i, _)| i)
  }

  pub fn marked_vertices(&self) -> Vec<usize> {
    self.vertex_ids().filter(|&v| self.vertex(v).unwrap().marked).collect()
  }

  pub fn lookup(&self, name: &str) -> Result<usize, SurfaceError> {
    self
      .vertex_ids()
      .find(|&v| self.vertex(v).unwrap().names.iter().any(|n| n == name))
      .ok_or_else(|| SurfaceError::UnknownPoint(name.to_string()))
  }

  /// Vertex holding each half-edge.
  pub fn half_edge_vertices(&self) -> Vec<usize> {
    let mut at = vec![usize::MAX; 2 * self.n_edges];
    for v in self.vertex_ids() {
      for &h in &self.vertex(v).unwrap().order {
        at[h] = v;
      }
    }
    at
  }

  /// Merges `y` into `x`. For `+` points the merged order is `y`'s half-edges
  /// then `x`'s; for `-` points it is `x`'s then `y`'s. Returns the merged vertex.
  pub fn corner_glue(&self, x: usize, y: usize) -> Result<(Self, usize), SurfaceError> {
    if x == y {
      return Err(SurfaceError::SamePoint);
    }
    let name = |v: usize| self.vertex(v).map(|vx| vx.names[0].clone()).unwrap_or_else(|| v.to_string());
    let vx = self.vertex(x).ok_or_else(|| SurfaceError::UnknownPoint(name(x)))?;
    let vy = self.vertex(y).ok_or_else(|| SurfaceError::UnknownPoint(name(y)))?;
    if !vx.marked {
      return Err(SurfaceError::NotMarked(name(x)));
    }
    if !vy.marked {
      return Err(SurfaceError::NotMarked(name(y)));
    }
    if vx.sign != vy.sign {
      return Err(SurfaceError::MixedSigns);
    }
    let order = match vx.sign {
      Sign::Plus => vy.order.iter().chain(&vx.order).copied().collect(),
      Sign::Minus => vx.order.iter().chain(&vy.order).copied().collect(),
    };
    let mut names = vx.names.clone();
    names.extend(vy.names.iter().cloned());
    let mut out = self.clone();
    out.vertices[x] = Some(Vertex { sign: vx.sign, marked: true, order, names });
    out.vertices[y] = None;
    Ok((out, x))
  }

  pub fn forget_point(&self, x: usize) -> Result<Self, SurfaceError> {
    let v = self.vertex(x).ok_or_else(|| SurfaceError::UnknownPoint(x.to_string()))?;
    if !v.marked {
      return Err(SurfaceError::NotMarked(v.names[0].clone()));
    }
    let comp = self.component_labels();
    let others = self.marked_vertices().into_iter().any(|w| w != x && comp[&w] == comp[&x]);
    if !others {
      return Err(SurfaceError::Orphan(v.names[0].clone()));
    }
    let mut out = self.clone();
    out.vertices[x].as_mut().unwrap().marked = false;
    Ok(out)
  }

  fn component_labels(&self) -> BTreeMap<usize, usize> {
    let ids: Vec<usize> = self.vertex_ids().collect();
    let mut parent: BTreeMap<usize, usize> = ids.iter().map(|&v| (v, v)).collect();
    fn find(p: &mut BTreeMap<usize, usize>, v: usize) -> usize {
      let mut r = v;
      while p[&r] != r {
        r = p[&r];
      }
      let mut c = v;
      while p[&c] != r {
        let n = p[&c];
        p.insert(c, r);
        c = n;
      }
      r
    }
    let at = self.half_edge_vertices();
    for e in 0..self.n_edges {
      let a = find(&mut parent, at[2 * e]);
      let b = find(&mut parent, at[2 * e + 1]);
      if a != b {
        parent.insert(a.max(b), a.min(b));
      }
    }
    ids.iter().map(|&v| (v, find(&mut parent, v))).collect()
  }

  /// Boundary walks. Each walk is a list of corners `(vertex, arrival, departure)`.
  fn faces(&self) -> Vec<Vec<(usize, HalfEdge, HalfEdge)>> {
    let at = self.half_edge_vertices();
    let next_at = |h: HalfEdge| {
      let ord = &self.vertex(at[h]).unwrap().order;
      let i = ord.iter().position(|&x| x == h).unwrap();
      ord[(i + 1) % ord.len()]
    };
    let mut seen = BTreeSet::new();
    let mut faces = Vec::new();
    for start in 0..2 * self.n_edges {
      if seen.contains(&start) {
        continue;
      }
      let mut face = Vec::new();
      let mut a = start;
      while seen.insert(a) {
        let out = next_at(a);
        face.push((at[a], a, out));
        a = opposite(out);
      }
      faces.push(face);
    }
    faces
  }

  fn corner_is_marked(&self, v: usize, arrival: HalfEdge) -> bool {
    let vx = self.vertex(v).unwrap();
    vx.marked && vx.order.last() == Some(&arrival)
  }

  pub fn analyze(&self) -> SurfaceReport {
    let faces = self.faces();
    let mut arcs = Vec::new();
    let mut uncut = Vec::new();
    for face in &faces {
      let marked: Vec<usize> = (0..face.len()).filter(|&i| self.corner_is_marked(face[i].0, face[i].1)).collect();
      let step = |dep: HalfEdge| Step { edge: edge_of(dep), exponent: if is_tail(dep) { 1 } else { -1 } };
      if marked.is_empty() {
        // rotate so the walk starts at the smallest vertex for a stable word
        let start = (0..face.len()).min_by_key(|&i| (face[i].0, face[i].1)).unwrap();
        let rot: Vec<_> = face[start..].iter().chain(&face[..start]).collect();
        uncut.push(UncutCircle { path: rot.iter().map(|c| step(c.2)).collect(), vertices: rot.iter().map(|c| c.0).collect() });
        continue;
      }
      for (k, &i) in marked.iter().enumerate() {
        let j = marked[(k + 1) % marked.len()];
        let mut path = Vec::new();
        let mut c = i;
        loop {
          path.push(step(face[c].2));
          c = (c + 1) % face.len();
          if c == j {
            break;
          }
        }
        let (from, to) = (face[i].0, face[j].0);
        let kind = match (self.vertex(from).unwrap().sign, self.vertex(to).unwrap().sign) {
          (Sign::Minus, Sign::Plus) => ArcKind::Left,
          (Sign::Plus, Sign::Minus) => ArcKind::Right,
          _ => ArcKind::Neither,
        };
        arcs.push(BoundaryArc { kind, from, to, path });
      }
    }
    arcs.sort_by(|a, b| (a.from, a.to, &a.path.iter().map(|s| (s.edge, s.exponent)).collect::<Vec<_>>()).cmp(&(
      b.from,
      b.to,
      &b.path.iter().map(|s| (s.edge, s.exponent)).collect::<Vec<_>>(),
    )));
    let n_vertices = self.vertex_ids().count() as i64;
    let chi = n_vertices - self.n_edges as i64;
    let comps = self.component_labels();
    let roots: BTreeSet<usize> = comps.values().copied().collect();
    let b = faces.len();
    // chi = sum over components of (2 - 2g - b)
    let twice_genus = 2 * roots.len() as i64 - chi - b as i64;
    let count = |k| arcs.iter().filter(|a| a.kind == k).count();
    let (left, right, neither) = (count(ArcKind::Left), count(ArcKind::Right), count(ArcKind::Neither));
    let every_component_marked = roots.iter().all(|r| self.marked_vertices().iter().any(|v| comps[v] == *r));
    SurfaceReport {
      valid: left == right && every_component_marked && twice_genus >= 0 && twice_genus % 2 == 0,
      arcs,
      uncut,
      euler_characteristic: chi,
      boundary_components: b,
      components: roots.len(),
      genus: (twice_genus.max(0) / 2) as usize,
      left_count: left,
      right_count: right,
      neither_count: neither,
    }
  }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum RecipeStep {
  Glue { x: String, y: String },
  Forget { x: String },
}

/// `{"disks": k, "steps": [...]}`; points are named `"{disk}+"` / `"{disk}-"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceRecipe {
  pub disks: usize,
  #[serde(default)]
  pub steps: Vec<RecipeStep>,
}

/// A step after name resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolvedStep {
  Glue { x: usize, y: usize },
  Forget { x: usize },
}

impl SurfaceRecipe {
  pub fn new(disks: usize) -> Self {
    Self { disks, steps: Vec::new() }
  }

  pub fn glue(mut self, x: &str, y: &str) -> Self {
    self.steps.push(RecipeStep::Glue { x: x.into(), y: y.into() });
    self
  }

  pub fn forget(mut self, x: &str) -> Self {
    self.steps.push(RecipeStep::Forget { x: x.into() });
    self
  }

  /// Disjoint union; the disks of `other` are numbered after ours.
  pub fn disjoint_union(&self, other: &Self) -> Self {
    let shift = |name: &str| -> String {
      let (k, sign) = name.split_at(name.len().saturating_sub(1));
      match k.parse::<usize>() {
        Ok(k) => format!("{}{sign}", k + self.disks),
        Err(_) => name.to_string(),
      }
    };
    let moved = other.steps.iter().map(|s| match s {
      RecipeStep::Glue { x, y } => RecipeStep::Glue { x: shift(x), y: shift(y) },
      RecipeStep::Forget { x } => RecipeStep::Forget { x: shift(x) },
    });
    Self { disks: self.disks + other.disks, steps: self.steps.iter().cloned().chain(moved).collect() }
  }

  pub fn parse(text: &str) -> Result<Self, SurfaceError> {
    let r: Self = serde_json::from_str(text).map_err(|e| SurfaceError::Recipe(e.to_string()))?;
    if r.disks == 0 {
      return Err(SurfaceError::Recipe("need at least one disk".into()));
    }
    Ok(r)
  }

  /// Replays the program, returning the surface and the resolved steps.
  pub fn replay(&self) -> Result<(MarkedSurface, Vec<ResolvedStep>), SurfaceError> {
    let mut s = MarkedSurface::disks(self.disks);
    let mut resolved = Vec::new();
    for step in &self.steps {
      match step {
        RecipeStep::Glue { x, y } => {
          let (vx, vy) = (s.lookup(x)?, s.lookup(y)?);
          let (next, _) = s.corner_glue(vx, vy)?;
          s = next;
          resolved.push(ResolvedStep::Glue { x: vx, y: vy });
        }
        RecipeStep::Forget { x } => {
          let vx = s.lookup(x)?;
          s = s.forget_point(vx)?;
          resolved.push(ResolvedStep::Forget { x: vx });
        }
      }
    }
    Ok((s, resolved))
  }

  pub fn build(&self) -> Result<MarkedSurface, SurfaceError> {
    self.replay().map(|(s, _)| s)
  }
}

/// Named recipes used across the test suite.
pub mod suite {
  use super::SurfaceRecipe;

  pub fn disk() -> SurfaceRecipe {
    SurfaceRecipe::new(1)
  }

  /// Two disks glued at their `+` points: three marked points.
  pub fn three_marked_disk() -> SurfaceRecipe {
    SurfaceRecipe::new(2).glue("0+", "1+")
  }

  /// One `+` and one `-` point on the outer circle, inner circle uncut.
  pub fn annulus() -> SurfaceRecipe {
    SurfaceRecipe::new(2).glue("0+", "1+").glue("0-", "1-")
  }

  /// Four points alternating in sign on one circle. The argument order of a
  /// glue decides which corner of the merged vertex is marked.
  pub fn alternating_four() -> SurfaceRecipe {
    SurfaceRecipe::new(3).glue("0+", "1+").glue("2-", "1-")
  }

  /// `2n` alternating points on one circle.
  pub fn alternating(n: usize) -> SurfaceRecipe {
    let mut r = SurfaceRecipe::new(2 * n - 1);
    for i in 0..2 * n - 2 {
      let (a, b) = (i, i + 1);
      r = if i % 2 == 0 { r.glue(&format!("{a}+"), &format!("{b}+")) } else { r.glue(&format!("{b}-"), &format!("{a}-")) };
    }
    r
  }

  /// Three disks fused at both ends: a sphere with three holes, one `+` and
  /// one `-` point, and two uncut circles.
  pub fn pair_of_pants() -> SurfaceRecipe {
    SurfaceRecipe::new(3).glue("0+", "1+").glue("0+", "2+").glue("0-", "1-").glue("0-", "2-")
  }

  /// Four disks fused at both ends.
  pub fn four_holed_sphere() -> SurfaceRecipe {
    SurfaceRecipe::new(4)
      .glue("0+", "1+")
      .glue("0+", "2+")
      .glue("0+", "3+")
      .glue("0-", "1-")
      .glue("0-", "2-")
      .glue("0-", "3-")
  }

  /// Annulus with one `+` point and an uncut inner circle: the conjugation space.
  pub fn conjugation_space() -> SurfaceRecipe {
    SurfaceRecipe::new(2).glue("0+", "1+").glue("1-", "0-").forget("0-")
  }

  /// Genus one with one boundary circle carrying a single `+` point.
  pub fn genus_one_point() -> SurfaceRecipe {
    SurfaceRecipe::new(3).glue("0+", "1+").glue("0+", "2+").glue("0-", "2-").glue("0-", "1-").forget("0-")
  }
}

#[cfg(test)]
mod tests {
  use super::suite::*;
  use super::*;

  #[test]
  fn disk_has_one_left_one_right() {
    let r = MarkedSurface::disk().analyze();
    assert_eq!((r.left_count, r.right_count, r.neither_count), (1, 1, 0));
    assert_eq!(r.uncut.len(), 0);
    assert_eq!(r.euler_characteristic, 1);
    let right = r.right_arcs().next().unwrap();
    assert_eq!(right.path, vec![Step { edge: 0, exponent: 1 }]);
    assert_eq!(MarkedSurface::disks(2).analyze().euler_characteristic, 2);
  }

  #[test]
  fn three_marked_disk_shape() {
    let s = three_marked_disk().build().unwrap();
    let r = s.analyze();
    assert_eq!(r.euler_characteristic, 1);
    assert_eq!(r.boundary_components, 1);
    assert_eq!(s.marked_vertices().len(), 3);
    assert_eq!((r.left_count, r.right_count, r.neither_count), (1, 1, 1));
  }

  #[test]
  fn annulus_has_uncut_circle() {
    let r = annulus().build().unwrap().analyze();
    assert_eq!(r.euler_characteristic, 0);
    assert_eq!(r.boundary_components, 2);
    assert_eq!(r.uncut.len(), 1);
    assert_eq!(r.genus, 0);
    assert_eq!((r.left_count, r.right_count), (1, 1));
  }

  #[test]
  fn gluing_on_one_circle_splits_it() {
    let s = alternating_four().build().unwrap();
    assert_eq!(s.analyze().boundary_components, 1);
    let a = s.lookup("0+").unwrap();
    let b = s.lookup("2+").unwrap();
    let (glued, _) = s.corner_glue(a, b).unwrap();
    assert_eq!(glued.analyze().boundary_components, 2);
  }

  #[test]
  fn alternating_points_classify() {
    for n in 1..5 {
      let r = alternating(n).build().unwrap().analyze();
      assert_eq!((r.left_count, r.right_count, r.neither_count), (n, n, 0), "n = {n}");
      assert_eq!(r.boundary_components, 1);
    }
  }

  #[test]
  fn forget_creates_uncut_circle() {
    let s = SurfaceRecipe::new(2).glue("0+", "1+").glue("0-", "1-").build().unwrap();
    let base = s.analyze().uncut.len();
    let s2 = s.forget_point(s.lookup("0-").unwrap()).unwrap();
    let r = s2.analyze();
    assert!(r.uncut.len() - base <= 1);
    let err = s2.forget_point(s2.lookup("0+").unwrap()).unwrap_err();
    assert!(matches!(err, SurfaceError::Orphan(_)));
  }

  #[test]
  fn glue_errors() {
    let s = MarkedSurface::disks(2);
    assert_eq!(s.corner_glue(0, 0).unwrap_err(), SurfaceError::SamePoint);
    assert_eq!(s.corner_glue(0, 3).unwrap_err(), SurfaceError::MixedSigns);
  }

  #[test]
  fn recipe_json_roundtrip() {
    let r = genus_one_point();
    let text = serde_json::to_string(&r).unwrap();
    assert!(text.contains("\"op\":\"glue\""));
    assert_eq!(SurfaceRecipe::parse(&text).unwrap(), r);
    assert!(SurfaceRecipe::parse("{\"disks\":0}").is_err());
  }
}
