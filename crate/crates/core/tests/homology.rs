use std::sync::Arc;

use qpmoduli::homology::*;
use qpmoduli::invcalc::GroupPoint;
use qpmoduli::linalg::{Matrix, Subspace};
use qpmoduli::moduli::ModuliSpace;
use qpmoduli::qla::{sl2, QuadraticLieAlgebra};
use qpmoduli::surface::{suite, Sign, SurfaceRecipe};

fn g() -> Arc<QuadraticLieAlgebra> {
  Arc::new(sl2())
}

fn surfaces() -> Vec<(&'static str, SurfaceRecipe)> {
  vec![
    ("disk", suite::disk()),
    ("three_marked_disk", suite::three_marked_disk()),
    ("annulus", suite::annulus()),
    ("alternating_four", suite::alternating_four()),
    ("pair_of_pants", suite::pair_of_pants()),
    ("four_holed_sphere", suite::four_holed_sphere()),
    ("conjugation_space", suite::conjugation_space()),
    ("genus_one_point", suite::genus_one_point()),
  ]
}

fn local(p: &GroupPoint) -> LocalSystem {
  LocalSystem::new(g(), p.clone()).unwrap()
}

fn flipped(m: &ModuliSpace) -> Vec<Sign> {
  m.surface
    .vertex_ids()
    .map(|v| match m.surface.vertex(v).unwrap().sign {
      Sign::Plus => Sign::Minus,
      Sign::Minus => Sign::Plus,
    })
    .collect()
}

#[test]
fn intersection_pairing_matches_the_fusion_sigma() {
  for (name, r) in surfaces() {
    let m = ModuliSpace::build(&r, g()).unwrap();
    for p in m.points(5, 5).unwrap() {
      let pd = m.data.at(&p).unwrap();
      let s = intersection_sigma(&m.surface, &local(&p), None).unwrap();
      let b = pd.basic.basis_matrix();
      assert_eq!(s.congruence(&b, &b), pd.sigma_on_basic(), "{name}");
      if m.data.forgotten.is_empty() {
        assert_eq!(s, pd.sigma, "{name}");
      }
    }
  }
}

#[test]
fn skew_part_ignores_the_split() {
  for (name, r) in surfaces() {
    let m = ModuliSpace::build(&r, g()).unwrap();
    let flip = flipped(&m);
    for p in m.points(6, 2).unwrap() {
      let ls = local(&p);
      let s = intersection_sigma(&m.surface, &ls, None).unwrap();
      let t = intersection_sigma(&m.surface, &ls, Some(&flip)).unwrap();
      assert_eq!(t, -&s.transpose(), "{name}");
      assert_eq!(skew_pi(&m.surface, &ls, None).unwrap(), skew_pi(&m.surface, &ls, Some(&flip)).unwrap(), "{name}");
    }
  }
}

#[test]
fn left_kernel_is_the_annihilator_image() {
  for (name, r) in surfaces() {
    let m = ModuliSpace::build(&r, g()).unwrap();
    for p in m.points(7, 3).unwrap() {
      let pd = m.data.at(&p).unwrap();
      let ls = local(&p);
      let s = intersection_sigma(&m.surface, &ls, None).unwrap();
      let image = annihilator_image(&m.surface, &ls).unwrap();
      assert_eq!(left_kernel_on(&s, &pd.basic), image.space.intersect(&pd.basic), "{name}");
    }
  }
}

#[test]
fn annihilator_dimensions() {
  let alt = ModuliSpace::build(&suite::alternating_four(), g()).unwrap();
  let p = alt.points(2, 1).unwrap().remove(0);
  let image = annihilator_image(&alt.surface, &local(&p)).unwrap();
  assert!(image.uncut_dims.is_empty());
  assert_eq!(image.space.dim(), 2 * 3);

  let annulus = ModuliSpace::build(&suite::annulus(), g()).unwrap();
  let p = annulus.points(2, 1).unwrap().remove(0);
  let image = annihilator_image(&annulus.surface, &local(&p)).unwrap();
  assert_eq!(image.uncut_dims, vec![1]);
  assert_eq!(image.space.dim(), image.left_arc_dim + 1);

  let disk = ModuliSpace::build(&suite::disk(), g()).unwrap();
  let p = disk.points(2, 1).unwrap().remove(0);
  let image = annihilator_image(&disk.surface, &local(&p)).unwrap();
  assert_eq!(image.space, Subspace::full(3));
}

#[test]
fn degenerate_pairing_has_no_duality() {
  let alg = Arc::new(qpmoduli::qla::gl2_degenerate());
  let s = suite::disk().build().unwrap();
  let p = GroupPoint { values: vec![Matrix::identity(2)] };
  let ls = LocalSystem::new(alg, p).unwrap();
  assert!(matches!(annihilator_image(&s, &ls), Err(HomologyError::DegenerateT)));
}

#[test]
fn split_must_cover_every_vertex() {
  let m = ModuliSpace::build(&suite::annulus(), g()).unwrap();
  let p = m.points(1, 1).unwrap().remove(0);
  let err = intersection_sigma(&m.surface, &local(&p), Some(&[Sign::Plus])).unwrap_err();
  assert!(matches!(err, HomologyError::Split { got: 1, .. }));
}
