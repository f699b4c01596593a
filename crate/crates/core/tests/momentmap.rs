use std::sync::Arc;

use qpmoduli::invcalc::GroupPoint;
use qpmoduli::linalg::{Matrix, Vector};
use qpmoduli::moduli::ModuliSpace;
use qpmoduli::momentmap::*;
use qpmoduli::qla::{sl2, QuadraticLieAlgebra, Subalgebra};
use qpmoduli::rational::q;
use qpmoduli::reduction::{align_point, CentralPairModel};
use qpmoduli::surface::{suite, ArcKind, SurfaceRecipe};

fn g() -> Arc<QuadraticLieAlgebra> {
  Arc::new(sl2())
}

fn build(r: &SurfaceRecipe) -> ModuliSpace {
  ModuliSpace::build(r, g()).unwrap()
}

/// Annulus with one acting point; the inner circle is uncut.
fn conjugation_space() -> ModuliSpace {
  build(&suite::conjugation_space())
}

/// Genus one, one boundary circle, one acting point.
fn torus_space() -> ModuliSpace {
  build(&suite::genus_one_point())
}

fn row(x: [i64; 6]) -> Vector {
  x.iter().map(|&a| q(a)).collect()
}

/// `(e, 0), (0, f), (h, -h)` in `sl2 + sl2-bar`.
fn borel_rows() -> Vec<Vector> {
  vec![row([1, 0, 0, 0, 0, 0]), row([0, 0, 0, 0, 1, 0]), row([0, 0, 1, 0, 0, -1])]
}

fn diagonal_rows() -> Vec<Vector> {
  vec![row([1, 0, 0, 1, 0, 0]), row([0, 1, 0, 0, 1, 0]), row([0, 0, 1, 0, 0, 1])]
}

#[test]
fn diagonal_pair_recovers_the_cartan_trivector() {
  let m = build(&suite::annulus());
  let pair = diagonal_pair(m.data.acting_algebra(), 3).unwrap();
  assert!(pair.bracket_reconstructed);
  assert!(pair.cobracket_vanishes());
  assert_eq!(pair.phi, g().cartan_trivector());
  // e^i pairs to delta with e_j
  let metric = pair.d.metric().unwrap();
  let e = Matrix::from_rows(&pair.h_basis, 6);
  let dual = Matrix::from_rows(&pair.dual_basis, 6);
  assert_eq!(metric.congruence(&dual, &e), Matrix::identity(3));
  let tau = pair.tau_matrix();
  assert!(tau.is_skew() && !tau.is_zero());
}

#[test]
fn borel_manin_triple_is_poisson() {
  let m = build(&suite::annulus());
  let d = m.data.acting_algebra();
  let h = Subalgebra::new(d.clone(), &borel_rows()).unwrap();
  let pair = manin_pair_data(d, &h, &diagonal_rows()).unwrap();
  assert!(pair.bracket_reconstructed);
  assert!(pair.phi.is_zero());
  assert!(!pair.cobracket_vanishes());
  let s = restrict_structure(&m, &pair).unwrap();
  let check = s.check(&m.points(5, 3).unwrap()).unwrap();
  assert!(check.passed(), "{check:?}");
}

#[test]
fn manin_pair_rejects_bad_complements() {
  let m = build(&suite::annulus());
  let d = m.data.acting_algebra();
  let h = Subalgebra::new(d.clone(), &diagonal_rows()).unwrap();
  assert!(matches!(manin_pair_data(d.clone(), &h, &diagonal_rows()), Err(MomentError::NotComplementary)));
  let not_isotropic = vec![row([1, 0, 0, 0, 0, 0]), row([0, 1, 0, 0, 0, 0]), row([0, 0, 1, 0, 0, 0])];
  assert!(matches!(manin_pair_data(d.clone(), &h, &not_isotropic), Err(MomentError::NotLagrangian(_))));
  let full = Subalgebra::full(d.clone());
  assert!(matches!(manin_pair_data(d, &full, &[]), Err(MomentError::NotLagrangian("h"))));
}

#[test]
fn twisted_bivector_on_the_double() {
  let m = build(&suite::annulus());
  let pts = m.points(5, 5).unwrap();
  let d = m.data.acting_algebra();
  let pair = diagonal_pair(d.clone(), 3).unwrap();
  let check = restrict_structure(&m, &pair).unwrap().check(&pts).unwrap();
  assert!(check.passed(), "{check:?}");
  let generic = manin_pair_data(d.clone(), &pair.h, &lagrangian_complement(&pair.h).unwrap()).unwrap();
  assert!(restrict_structure(&m, &generic).unwrap().check(&pts).unwrap().passed());
}

#[test]
fn wrong_twist_sign_breaks_the_identities() {
  let m = build(&suite::annulus());
  let mut pair = diagonal_pair(m.data.acting_algebra(), 3).unwrap();
  for c in pair.tau.comps.iter_mut() {
    *c = -c.clone();
  }
  let check = restrict_structure(&m, &pair).unwrap().check(&m.points(5, 2).unwrap()).unwrap();
  assert!(!check.sigma_reconstruction);
  assert!(!check.passed());
}

#[test]
fn changing_the_complement_is_a_twist_in_h() {
  let m = build(&suite::annulus());
  let d = m.data.acting_algebra();
  let anti = diagonal_pair(d.clone(), 3).unwrap();
  let standard = manin_pair_data(d.clone(), &anti.h, &borel_rows()).unwrap();
  assert!(!standard.cobracket_vanishes() && standard.phi.is_zero());
  let twist = anti.twist_to(&standard).unwrap();
  assert!(twist.is_skew() && !twist.is_zero());
  assert!(anti.in_h_tensor_h(&twist));
  let (a, b) = (restrict_structure(&m, &anti).unwrap(), restrict_structure(&m, &standard).unwrap());
  for p in m.points(5, 3).unwrap() {
    let pd = m.data.at(&p).unwrap();
    let diff = &b.pi_prime_at(&p).unwrap() - &a.pi_prime_at(&p).unwrap();
    assert_eq!(diff, -&twist.congruence(&pd.rho, &pd.rho));
  }
  assert!(b.check(&m.points(5, 2).unwrap()).unwrap().passed());
}

fn alternating_leaf_points(m: &ModuliSpace, seed: u64, count: usize) -> Vec<GroupPoint> {
  m.points(seed, count)
    .unwrap()
    .into_iter()
    .map(|mut p| {
      for arc in m.central_maps().left {
        p = align_point(&arc.word, &Matrix::identity(2), &p).unwrap();
      }
      p
    })
    .collect()
}

#[test]
fn left_fibre_of_alternating_moduli() {
  let m = build(&suite::alternating_four());
  let d = m.data.acting_algebra();
  for p in alternating_leaf_points(&m, 3, 3) {
    let model = CentralPairModel::from_moduli(&m, &p).unwrap();
    let stab = m.target_stabilizer(&p, ArcKind::Left).unwrap();
    let h = Subalgebra::new(d.clone(), stab.basis()).unwrap();
    let pair = manin_pair_data(d.clone(), &h, &lagrangian_complement(&h).unwrap()).unwrap();
    let leaf = leaf_structure_check(&model, &pair).unwrap();
    assert!(leaf.tangent && leaf.spans, "{leaf:?}");
    assert!(!leaf.untwisted_tangent);
    assert_eq!(leaf.leaf_dim, 3);
    let moment = moment_condition_check(&LeafPoint::from_central(&model, &pair).unwrap(), &pair).unwrap();
    assert!(moment.passed(), "{moment:?}");
  }
}

#[test]
fn leaf_check_needs_the_stabilizer() {
  let m = build(&suite::alternating_four());
  let p = alternating_leaf_points(&m, 3, 1).remove(0);
  let model = CentralPairModel::from_moduli(&m, &p).unwrap();
  // diagonals pairing each copy with one of opposite sign: Lagrangian, but not the stabilizer
  let d = m.data.acting_algebra();
  let t = d.t();
  let (pos, neg): (Vec<usize>, Vec<usize>) = (0..4).partition(|&c| t[(3 * c + 2, 3 * c + 2)] > q(0));
  assert_eq!(pos.len(), 2);
  let rows: Vec<Vector> = pos
    .iter()
    .zip(neg.iter().rev())
    .flat_map(|(&a, &b)| {
      (0..3).map(move |i| {
        let mut v = vec![q(0); 12];
        v[3 * a + i] = q(1);
        v[3 * b + i] = q(1);
        v
      })
    })
    .collect();
  let h = Subalgebra::new(d.clone(), &rows).unwrap();
  let pair = manin_pair_data(d, &h, &lagrangian_complement(&h).unwrap()).unwrap();
  assert!(matches!(leaf_structure_check(&model, &pair), Err(MomentError::Hypothesis(_))));
}

#[test]
fn quasi_symplectic_inverse_has_metric_symmetric_part() {
  let x = torus_space();
  for p in x.points(4, 3).unwrap() {
    let c = group_valued_check(&x, &p).unwrap();
    assert!(c.sigma_invertible && c.symmetric_part_matches, "{c:?}");
  }
}

#[test]
fn conjugation_space_is_not_quasi_symplectic() {
  let x = conjugation_space();
  let p = x.points(4, 1).unwrap().remove(0);
  assert!(!group_valued_check(&x, &p).unwrap().sigma_invertible);
}

#[test]
fn induced_pair_slices_back() {
  for x in [conjugation_space(), torus_space()] {
    let induced = induce_central_pair(&x).unwrap();
    assert_eq!(induced.space.dim(), x.dim() + 3);
    for px in x.points(6, 3).unwrap() {
      let r = slice_round_trip(&x, &induced, &px).unwrap();
      assert!(r.passed(), "{r:?}");
      let on_x = LeafPoint::from_moment_space(&x, &px, &induced.pair).unwrap();
      assert!(moment_condition_check(&on_x, &induced.pair).unwrap().passed());
      let model = CentralPairModel::from_moduli(&induced.space, &induced.slice_point(&px)).unwrap();
      assert!(leaf_structure_check(&model, &induced.pair).unwrap().tangent);
    }
  }
}

#[test]
fn conjugation_space_induces_the_double() {
  let induced = induce_central_pair(&conjugation_space()).unwrap();
  let double = build(&suite::annulus());
  let (a, b) = (induced.space.central_maps(), double.central_maps());
  assert_eq!((a.left.len(), a.right.len(), a.uncut.len()), (b.left.len(), b.right.len(), b.uncut.len()));
  assert_eq!(induced.space.dim(), double.dim());
  let ra = induced.space.leaf_ranks(&induced.space.points(2, 1).unwrap()[0]).unwrap();
  let rb = double.leaf_ranks(&double.points(2, 1).unwrap()[0]).unwrap();
  assert_eq!((ra.dim, ra.left, ra.right, ra.big), (rb.dim, rb.left, rb.right, rb.big));
}

#[test]
fn torus_leaf_is_quasi_symplectic() {
  let x = torus_space();
  let induced = induce_central_pair(&x).unwrap();
  for px in x.points(7, 2).unwrap() {
    let model = CentralPairModel::from_moduli(&induced.space, &induced.slice_point(&px)).unwrap();
    let leaf = leaf_structure_check(&model, &induced.pair).unwrap();
    assert!(leaf.tangent && leaf.spans, "{leaf:?}");
    assert_eq!(leaf.leaf_dim, 6);
  }
}

#[test]
fn conjugation_is_involutive_and_swaps_sides() {
  let x = torus_space();
  let induced = induce_central_pair(&x).unwrap();
  for px in x.points(8, 2).unwrap() {
    let pm = induced.slice_point(&px);
    let model = CentralPairModel::from_moduli(&induced.space, &pm).unwrap();
    assert!(same_model(&conjugate(&conjugate(&model)), &model));
    assert!(!same_model(&conjugate(&model), &model));
    // the conjugate space is the slice mu_R = 1
    let right = &induced.space.central_maps().right[0].word;
    let q = align_point(right, &Matrix::identity(2), &pm).unwrap();
    let bar = conjugate(&CentralPairModel::from_moduli(&induced.space, &q).unwrap());
    let leaf = leaf_structure_check(&bar, &induced.pair).unwrap();
    assert!(leaf.tangent && leaf.spans, "{leaf:?}");
    let moment = moment_condition_check(&LeafPoint::from_central(&bar, &induced.pair).unwrap(), &induced.pair).unwrap();
    assert!(moment.passed());
  }
}

#[test]
fn triple_fusion_is_the_fibre_product_of_doubles() {
  let pants = build(&suite::pair_of_pants());
  for p in pants.points(3, 3).unwrap() {
    let t = triple_fusion_check(g(), &p).unwrap();
    assert!(t.passed(), "{t:?}");
  }
}

#[test]
fn fused_moment_maps() {
  let (a, b) = (conjugation_space(), torus_space());
  for (x1, x2, leaf_dim) in [(&a, &a, 6), (&b, &a, 9), (&a, &b, 9), (&b, &b, 12)] {
    let p1 = x1.points(8, 1).unwrap().remove(0);
    let p2 = x2.points(9, 1).unwrap().remove(0);
    let f = fuse_moment_maps(x1, &p1, x2, &p2).unwrap();
    assert!(f.passed(), "{:?} {:?} {:?}", f.fused.verdicts, f.moment, f.verdicts);
    assert_eq!(f.leaf.leaf_dim, leaf_dim);
  }
}

#[test]
fn fusing_with_a_point_keeps_the_dimension() {
  let x = conjugation_space();
  let point = build(&SurfaceRecipe::new(1).forget("0-"));
  assert_eq!(point.dim(), 0);
  let px = x.points(8, 1).unwrap().remove(0);
  let p0 = point.points(9, 1).unwrap().remove(0);
  for f in [fuse_moment_maps(&x, &px, &point, &p0).unwrap(), fuse_moment_maps(&point, &p0, &x, &px).unwrap()] {
    assert!(f.passed());
    assert_eq!(f.leaf.leaf_dim, x.dim());
  }
}
