use std::sync::Arc;

use proptest::prelude::*;
use qpmoduli::homology::{intersection_sigma, skew_pi, LocalSystem};
use qpmoduli::invcalc::{seeded_points, Chirality, Layout, Multivector};
use qpmoduli::linalg::Matrix;
use qpmoduli::moduli::ModuliSpace;
use qpmoduli::qla::{abelian, sl2, QuadraticLieAlgebra};
use qpmoduli::rational::{fmt_q, parse_q, q, qf, Q};
use qpmoduli::reduction::appendix_suite;
use qpmoduli::surface::{Sign, Step, SurfaceRecipe};

fn g() -> Arc<QuadraticLieAlgebra> {
  Arc::new(sl2())
}

fn rational() -> impl Strategy<Value = Q> {
  (-9i64..=9, 1i64..=5).prop_map(|(n, d)| qf(n, d))
}

fn element(dim: usize) -> impl Strategy<Value = Vec<Q>> {
  prop::collection::vec(rational(), dim)
}

#[derive(Debug, Clone)]
enum Op {
  Glue(usize, usize, bool),
  Forget(usize, bool),
}

fn name(disk: usize, plus: bool) -> String {
  format!("{disk}{}", if plus { '+' } else { '-' })
}

/// Applies the ops that are valid in sequence; returns the recipe and, per
/// kept op, whether it was a glue.
fn recipe_from(disks: usize, ops: &[Op]) -> (SurfaceRecipe, Vec<bool>) {
  let mut r = SurfaceRecipe::new(disks);
  let mut kinds = Vec::new();
  for op in ops {
    let next = match *op {
      Op::Glue(a, b, plus) => r.clone().glue(&name(a % disks, plus), &name(b % disks, plus)),
      Op::Forget(a, plus) => r.clone().forget(&name(a % disks, plus)),
    };
    if next.build().is_ok() {
      r = next;
      kinds.push(matches!(op, Op::Glue(..)));
    }
  }
  (r, kinds)
}

fn op() -> impl Strategy<Value = Op> {
  prop_oneof![
    3 => (0usize..4, 0usize..4, any::<bool>()).prop_map(|(a, b, s)| Op::Glue(a, b, s)),
    1 => (0usize..4, any::<bool>()).prop_map(|(a, s)| Op::Forget(a, s)),
  ]
}

fn recipe(max_disks: usize) -> impl Strategy<Value = SurfaceRecipe> {
  (1..=max_disks, prop::collection::vec(op(), 0..6)).prop_map(|(k, ops)| recipe_from(k, &ops).0)
}

proptest! {
  #![proptest_config(ProptestConfig::with_cases(64))]

  #[test]
  fn rational_literals_roundtrip(x in rational()) {
    prop_assert_eq!(parse_q(&fmt_q(&x)).unwrap(), x);
  }

  #[test]
  fn sl2_bracket_is_antisymmetric_and_jacobi(u in element(3), v in element(3), w in element(3)) {
    let g = sl2();
    let neg: Vec<Q> = g.bracket(&v, &u).iter().map(|x| -x.clone()).collect();
    prop_assert_eq!(g.bracket(&u, &v), neg);
    let cyc = |a: &[Q], b: &[Q], c: &[Q]| g.bracket(a, &g.bracket(b, c));
    let total: Vec<Q> = (0..3).map(|i| cyc(&u, &v, &w)[i].clone() + cyc(&v, &w, &u)[i].clone() + cyc(&w, &u, &v)[i].clone()).collect();
    prop_assert!(total.iter().all(|x| *x == q(0)));
  }

  #[test]
  fn direct_sums_and_bars_validate(n in 1usize..3, bar in any::<bool>()) {
    let s = sl2();
    let other = if bar { s.bar() } else { abelian(n) };
    let d = s.direct_sum(&other);
    prop_assert!(d.validate().all_pass());
    // the sl2 block of the sum carries the sl2 trivector unchanged
    let (phi, own) = (d.cartan_trivector(), s.cartan_trivector());
    for a in 0..3 {
      for b in 0..3 {
        for c in 0..3 {
          prop_assert_eq!(phi.get(&[a, b, c]), own.get(&[a, b, c]));
        }
      }
    }
    prop_assert_eq!(d.dim(), 3 + other.dim());
  }

  #[test]
  fn canonical_form_is_linear(u in element(3), v in element(3), w in element(3), a in rational(), b in rational()) {
    let layout = Layout::uniform(g(), 2);
    let x = Multivector::from_element(layout.clone(), 0, Chirality::L, &u)
      .wedge(&Multivector::from_element(layout.clone(), 1, Chirality::R, &v)).unwrap();
    let y = Multivector::from_element(layout.clone(), 1, Chirality::L, &w)
      .wedge(&Multivector::from_element(layout.clone(), 0, Chirality::L, &u)).unwrap();
    let lhs = x.add(&y).unwrap().scale(&a);
    let rhs = x.scale(&a).add(&y.scale(&a)).unwrap();
    prop_assert_eq!(&lhs, &rhs);
    let combo = x.scale(&a).add(&y.scale(&b)).unwrap();
    prop_assert_eq!(combo.sub(&x.scale(&a)).unwrap(), y.scale(&b));
    // re-adding an already canonical form changes nothing
    prop_assert_eq!(combo.add(&Multivector::zero(layout, 2)).unwrap(), combo);
  }

  #[test]
  fn left_fields_bracket_like_the_algebra(u in element(3), v in element(3)) {
    let layout = Layout::uniform(g(), 1);
    let ul = Multivector::from_element(layout.clone(), 0, Chirality::L, &u);
    let vl = Multivector::from_element(layout.clone(), 0, Chirality::L, &v);
    let expected = Multivector::from_element(layout.clone(), 0, Chirality::L, &sl2().bracket(&u, &v));
    prop_assert_eq!(ul.schouten(&vl).unwrap(), expected);
    prop_assert_eq!(vl.schouten(&ul).unwrap(), ul.schouten(&vl).unwrap().scale(&q(-1)));
  }
}

proptest! {
  #![proptest_config(ProptestConfig::with_cases(48))]

  #[test]
  fn seeded_points_are_special_and_bounded(seed in any::<u64>(), sites in 1usize..4) {
    let layout = Layout::uniform(g(), sites);
    let a = seeded_points(&layout, seed, 2).unwrap();
    prop_assert_eq!(&a, &seeded_points(&layout, seed, 2).unwrap());
    let bound = num_bigint::BigInt::from(7u32).pow(8);
    for p in &a {
      for m in &p.values {
        prop_assert_eq!(m.det(), q(1));
        for r in 0..2 {
          for c in 0..2 {
            prop_assert!(*m[(r, c)].denom() <= bound);
          }
        }
      }
    }
  }

  #[test]
  fn transport_composes_along_random_words(
    seed in any::<u64>(),
    w1 in prop::collection::vec((0usize..3, any::<bool>()), 0..5),
    w2 in prop::collection::vec((0usize..3, any::<bool>()), 0..5),
  ) {
    let layout = Layout::uniform(g(), 3);
    let p = seeded_points(&layout, seed, 1).unwrap().remove(0);
    let ls = LocalSystem::new(g(), p).unwrap();
    let word = |w: &[(usize, bool)]| -> Vec<Step> { w.iter().map(|&(edge, f)| Step { edge, exponent: if f { 1 } else { -1 } }).collect() };
    let (a, b) = (word(&w1), word(&w2));
    let ab: Vec<Step> = a.iter().chain(&b).copied().collect();
    prop_assert_eq!(ls.transport(&ab), &ls.transport(&b) * &ls.transport(&a));
    let back: Vec<Step> = a.iter().rev().map(|s| Step { edge: s.edge, exponent: -s.exponent }).collect();
    let there_and_back: Vec<Step> = a.iter().chain(&back).copied().collect();
    prop_assert_eq!(ls.transport(&there_and_back), Matrix::identity(3));
  }

  #[test]
  fn each_step_changes_the_topology_predictably(k in 1usize..4, ops in prop::collection::vec(op(), 0..6)) {
    let (r, kinds) = recipe_from(k, &ops);
    let (first, _) = r.replay().unwrap();
    let (again, _) = r.replay().unwrap();
    prop_assert_eq!(&first, &again);
    let mut partial = SurfaceRecipe::new(k);
    let mut report = partial.build().unwrap().analyze();
    for (step, glue) in r.steps.iter().zip(kinds) {
      partial.steps.push(step.clone());
      let next = partial.build().unwrap().analyze();
      if glue {
        prop_assert_eq!(next.euler_characteristic, report.euler_characteristic - 1);
      } else {
        prop_assert_eq!(next.euler_characteristic, report.euler_characteristic);
      }
      // uncut circles carry no points, so no step can remove one
      prop_assert!(next.uncut.len() >= report.uncut.len());
      prop_assert!(next.uncut.len() <= report.uncut.len() + 1);
      report = next;
    }
    prop_assert_eq!(report.left_count, report.right_count);
  }

  #[test]
  fn kernel_lemmas_hold_for_any_seed(seed in any::<u64>()) {
    let s = appendix_suite(seed, 3).unwrap();
    prop_assert!(s.passed(), "{:?}", s);
  }
}

proptest! {
  #![proptest_config(ProptestConfig::with_cases(12))]

  #[test]
  fn random_surfaces_are_quasi_poisson(r in recipe(3), seed in any::<u64>()) {
    let m = ModuliSpace::build(&r, g()).unwrap();
    let pts = m.points(seed, 1).unwrap();
    let c = m.data.check_quasi_poisson(&pts).unwrap();
    prop_assert!(c.passed(), "{:?} {:?}", r, c);
    for p in &pts {
      prop_assert!(m.check_centrality(p).unwrap().passed());
      let lr = m.leaf_ranks(p).unwrap();
      prop_assert_eq!(lr.left, lr.right);
      prop_assert!(lr.big_consistent);
    }
  }

  #[test]
  fn random_surfaces_match_their_intersection_pairing(r in recipe(3), seed in any::<u64>()) {
    let m = ModuliSpace::build(&r, g()).unwrap();
    let p = m.points(seed, 1).unwrap().remove(0);
    let pd = m.data.at(&p).unwrap();
    let ls = LocalSystem::new(g(), p).unwrap();
    let s = intersection_sigma(&m.surface, &ls, None).unwrap();
    let b = pd.basic.basis_matrix();
    prop_assert_eq!(s.congruence(&b, &b), pd.sigma_on_basic());
    let flip: Vec<Sign> = m.surface.vertex_ids().map(|v| match m.surface.vertex(v).unwrap().sign {
      Sign::Plus => Sign::Minus,
      Sign::Minus => Sign::Plus,
    }).collect();
    prop_assert_eq!(skew_pi(&m.surface, &ls, Some(&flip)).unwrap(), skew_pi(&m.surface, &ls, None).unwrap());
  }
}
