//! Acceptance suite: one PASS/FAIL line per criterion, all comparisons exact.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use qpmoduli::homology::{annihilator_image, intersection_sigma, left_kernel_on, skew_pi, LocalSystem};
use qpmoduli::invcalc::{Chirality, Frame, Generator, GroupPoint, InvariantTensor2, Multivector};
use qpmoduli::linalg::{Matrix, Vector};
use qpmoduli::moduli::ModuliSpace;
use qpmoduli::momentmap::*;
use qpmoduli::qla::{catalog, sl2, QuadraticLieAlgebra, CATALOG};
use qpmoduli::rational::{q, qf, Q};
use qpmoduli::reduction::*;
use qpmoduli::runner::{self, AlgebraRef, CheckKind, RunOptions, SuiteConfig};
use qpmoduli::surface::{suite, Sign, SurfaceRecipe};

type Outcome = Result<String, String>;

fn ensure(cond: bool, what: impl Into<String>) -> Result<(), String> {
  if cond {
    Ok(())
  } else {
    Err(what.into())
  }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
  let spent = start.elapsed();
  ensure(spent < limit, format!("{what} took {spent:?}, limit {limit:?}"))
}

fn g() -> Arc<QuadraticLieAlgebra> {
  Arc::new(sl2())
}

fn build(r: &SurfaceRecipe) -> ModuliSpace {
  ModuliSpace::build(r, g()).expect("suite recipe builds")
}

fn unit(i: usize, n: usize) -> Vector {
  (0..n).map(|k| q(i64::from(k == i))).collect()
}

/// The surfaces every pointwise criterion runs over.
fn surfaces() -> Vec<(&'static str, SurfaceRecipe)> {
  vec![
    ("disk", suite::disk()),
    ("three_marked_disk", suite::three_marked_disk()),
    ("annulus", suite::annulus()),
    ("alternating_four", suite::alternating_four()),
    ("genus_one_point", suite::genus_one_point()),
    ("four_holed_sphere", suite::four_holed_sphere()),
  ]
}

/// `1/4 <[t# a, t# b], c>` from the structure constants directly.
fn trivector_oracle(g: &QuadraticLieAlgebra, a: usize, b: usize, c: usize) -> Q {
  let n = g.dim();
  let t = g.t();
  let mut out = q(0);
  for i in 0..n {
    for j in 0..n {
      let coeff = &t[(a, i)] * &t[(b, j)];
      if coeff != q(0) {
        out += coeff * g.c(i, j, c);
      }
    }
  }
  out * qf(1, 4)
}

fn algebra_suite() -> Outcome {
  let start = Instant::now();
  for name in CATALOG {
    let r = catalog(name).map_err(|e| e.to_string())?.validate();
    ensure(r.all_pass(), format!("{name} fails validation"))?;
  }
  let s = sl2();
  let phi = s.cartan_trivector();
  for a in 0..3 {
    for b in 0..3 {
      for c in 0..3 {
        ensure(*phi.get(&[a, b, c]) == trivector_oracle(&s, a, b, c), format!("phi[{a}{b}{c}] differs from the oracle"))?;
        let expected = match (a, b, c) {
          (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => qf(-1, 4),
          (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => qf(1, 4),
          _ => q(0),
        };
        ensure(*phi.get(&[a, b, c]) == expected, "phi is not -1/4 e^f^h")?;
      }
    }
  }
  let d = catalog("d_sl2").map_err(|e| e.to_string())?;
  let pd = d.cartan_trivector();
  for a in 0..6 {
    for b in 0..6 {
      for c in 0..6 {
        let block = if a / 3 == b / 3 && b / 3 == c / 3 { phi.get(&[a % 3, b % 3, c % 3]).clone() } else { q(0) };
        ensure(*pd.get(&[a, b, c]) == block && block == trivector_oracle(&d, a, b, c), "phi of g + g-bar is not blockwise")?;
      }
    }
  }
  within(start, Duration::from_secs(1), "algebra suite")?;
  Ok(format!("{} catalog algebras, 27 + 216 trivector components", CATALOG.len()))
}

fn quasi_poisson_identity() -> Outcome {
  let start = Instant::now();
  for (name, r) in surfaces() {
    let m = build(&r);
    let pts = m.points(2024, 5).map_err(|e| e.to_string())?;
    let c = m.data.check_quasi_poisson(&pts).map_err(|e| e.to_string())?;
    ensure(c.passed(), format!("{name}: {c:?}"))?;
  }
  within(start, Duration::from_secs(60), "quasi-Poisson suite")?;
  Ok(format!("6 surfaces x 5 points in {:.1?}", start.elapsed()))
}

fn annulus_golden() -> Outcome {
  let m = build(&suite::annulus());
  let layout = m.layout().clone();
  let t = m.algebra().t().clone();
  let gen = |site: usize, c: Chirality, i: usize| Multivector::generator(layout.clone(), Generator::new(site, c, i));
  // sum t^ij ((0, e_i^L) (x) (e_j^L, 0) - (0, e_i^R) (x) (e_j^R, 0))
  let mut sigma = InvariantTensor2::zero(layout.clone());
  for i in 0..3 {
    for j in 0..3 {
      if t[(i, j)] != q(0) {
        sigma.add_product(&gen(1, Chirality::L, i), &gen(0, Chirality::L, j), &t[(i, j)]);
        sigma.add_product(&gen(1, Chirality::R, i), &gen(0, Chirality::R, j), &-t[(i, j)].clone());
      }
    }
  }
  // canonical form: on each site t^L (x) t^L = t^R (x) t^R by invariance of t,
  // so the formal difference may only be a combination of these relations
  let mut relations = InvariantTensor2::zero(layout.clone());
  for site in 0..2 {
    for i in 0..3 {
      for j in 0..3 {
        if t[(i, j)] != q(0) {
          let half = &t[(i, j)] * qf(1, 2);
          relations.add_product(&gen(site, Chirality::L, i), &gen(site, Chirality::L, j), &half);
          relations.add_product(&gen(site, Chirality::R, i), &gen(site, Chirality::R, j), &-half);
        }
      }
    }
  }
  ensure(sigma.add(&relations).map_err(|e| e.to_string())? == m.data.sigma(), "sigma differs from the formula term by term")?;
  ensure(sigma.skew_part() == m.data.pi, "pi differs from the skew part of the formula")?;
  for p in m.points(3, 5).map_err(|e| e.to_string())? {
    let f = Frame::at(&layout, &p).map_err(|e| e.to_string())?;
    ensure(f.evaluate_tensor2(&sigma).map_err(|e| e.to_string())? == f.evaluate_tensor2(&m.data.sigma()).map_err(|e| e.to_string())?, "pointwise sigma")?;
  }
  Ok(format!("{} pi terms, {} sigma terms", m.data.pi.terms().len(), sigma.terms().len()))
}

fn all_splits(m: &ModuliSpace) -> Vec<Vec<Sign>> {
  let ids: Vec<usize> = m.surface.vertex_ids().collect();
  let marked = m.surface.marked_vertices();
  let base: Vec<Sign> = ids.iter().map(|&v| m.surface.vertex(v).unwrap().sign).collect();
  let free: Vec<usize> = ids.iter().enumerate().filter(|(_, v)| marked.contains(v)).map(|(k, _)| k).collect();
  (0..1usize << free.len())
    .map(|mask| {
      let mut s = base.clone();
      for (bit, &k) in free.iter().enumerate() {
        s[k] = if mask >> bit & 1 == 1 { Sign::Plus } else { Sign::Minus };
      }
      s
    })
    .collect()
}

fn homology_crosscheck() -> Outcome {
  let mut compared = 0;
  for (name, r) in surfaces() {
    let m = build(&r);
    let splits = all_splits(&m);
    for p in m.points(5, 5).map_err(|e| e.to_string())? {
      let pd = m.data.at(&p).map_err(|e| e.to_string())?;
      let ls = LocalSystem::new(g(), p.clone()).map_err(|e| e.to_string())?;
      let s = intersection_sigma(&m.surface, &ls, None).map_err(|e| e.to_string())?;
      let b = pd.basic.basis_matrix();
      ensure(s.congruence(&b, &b) == pd.sigma_on_basic(), format!("{name}: sigma differs"))?;
      if m.data.forgotten.is_empty() {
        ensure(s == pd.sigma, format!("{name}: full sigma differs"))?;
      }
      let pi = skew_pi(&m.surface, &ls, None).map_err(|e| e.to_string())?;
      for split in &splits {
        ensure(skew_pi(&m.surface, &ls, Some(split)).map_err(|e| e.to_string())? == pi, format!("{name}: pi depends on the split"))?;
      }
      compared += 1;
    }
  }
  Ok(format!("{compared} point comparisons, every re-split"))
}

fn leaf_theorems() -> Outcome {
  let mut flagged = 0;
  let mut checked = 0;
  let mut recipes = surfaces();
  recipes.push(("alternating_six", suite::alternating(3)));
  for (name, r) in recipes {
    let m = build(&r);
    let alternating = m.report.uncut.is_empty() && m.report.neither_count == 0 && m.data.forgotten.is_empty();
    for p in m.points(8, 5).map_err(|e| e.to_string())? {
      let lr = m.leaf_ranks(&p).map_err(|e| e.to_string())?;
      ensure(lr.left == lr.right, format!("{name}: rank T^L != rank T^R"))?;
      ensure(lr.big_consistent, format!("{name}: T^L + rho(d) != T^big"))?;
      if alternating && name.starts_with("alternating") {
        let expected = lr.dim - m.data.acting_algebra().dim() / 2;
        ensure(lr.left == expected, format!("{name}: rank T^L = {}, expected {expected}", lr.left))?;
      }
      if !lr.generic {
        flagged += 1;
        continue;
      }
      let pd = m.data.at(&p).map_err(|e| e.to_string())?;
      let ls = LocalSystem::new(g(), p.clone()).map_err(|e| e.to_string())?;
      let s = intersection_sigma(&m.surface, &ls, None).map_err(|e| e.to_string())?;
      let image = annihilator_image(&m.surface, &ls).map_err(|e| e.to_string())?;
      ensure(left_kernel_on(&pd.sigma, &pd.basic) == image.space.intersect(&pd.basic), format!("{name}: left kernel is not the annihilator image"))?;
      ensure(left_kernel_on(&s, &pd.basic) == left_kernel_on(&pd.sigma, &pd.basic), format!("{name}: kernels disagree"))?;
      ensure(lr.theorem_match, format!("{name}: leaf rank formula"))?;
      checked += 1;
    }
  }
  Ok(format!("{checked} generic points, {flagged} non-generic flagged"))
}

fn appendix() -> Outcome {
  let start = Instant::now();
  let s = appendix_suite(2024, 100).map_err(|e| e.to_string())?;
  ensure(s.a1_instances == 100 && s.a2_instances == 100, "instance count")?;
  ensure(s.passed(), format!("{s:?}"))?;
  within(start, Duration::from_secs(30), "appendix suite")?;
  Ok(format!("100 + 100 instances in {:.1?}", start.elapsed()))
}

fn central_reduction() -> Outcome {
  let annulus = build(&suite::annulus());
  let p = annulus.points(5, 1).map_err(|e| e.to_string())?.remove(0);
  let model = CentralPairModel::from_moduli(&annulus, &p).map_err(|e| e.to_string())?;
  let c = diagonal_subalgebra(model.acting.clone(), 3).map_err(|e| e.to_string())?;
  let r = central_reduction_at(&model, &c, true).map_err(|e| e.to_string())?;
  ensure(r.passed() && r.dimension == 0, format!("3-punctured sphere: dimension {}", r.dimension))?;

  let pants = build(&suite::pair_of_pants());
  for p in pants.points(5, 3).map_err(|e| e.to_string())? {
    let model = CentralPairModel::from_moduli(&pants, &p).map_err(|e| e.to_string())?;
    let c = diagonal_subalgebra(model.acting.clone(), 3).map_err(|e| e.to_string())?;
    let r = central_reduction_at(&model, &c, true).map_err(|e| e.to_string())?;
    ensure(r.passed() && r.dimension == 2, format!("4-punctured sphere: dimension {}", r.dimension))?;
    ensure(r.matrix.is_skew() && r.is_nondegenerate(), "reduced form is degenerate")?;
  }

  let mut values = p.values.clone();
  values[0] = Matrix::identity(2);
  let model = CentralPairModel::from_moduli(&annulus, &GroupPoint { values }).map_err(|e| e.to_string())?;
  match central_reduction_at(&model, &c, true) {
    Err(ReductionError::Transversality { deficit, .. }) if deficit > 0 => Ok(format!("dimensions 0 and 2; control deficit {deficit}")),
    other => Err(format!("negative control did not fail transversality: {other:?}")),
  }
}

fn fusion_of_central_pairs() -> Outcome {
  let annulus = build(&suite::annulus());
  let word = &annulus.central_maps().left[0].word;
  for (k, p1) in annulus.points(9, 5).map_err(|e| e.to_string())?.iter().enumerate() {
    let pair1 = CentralPairModel::from_moduli(&annulus, p1).map_err(|e| e.to_string())?;
    let z = pair1.right[0].value.clone();
    let q0 = annulus.points(20 + k as u64, 1).map_err(|e| e.to_string())?.remove(0);
    let p2 = align_point(word, &z.inverse().ok_or("singular")?, &q0).map_err(|e| e.to_string())?;
    let mut pair2 = CentralPairModel::from_moduli(&annulus, &p2).map_err(|e| e.to_string())?;
    pair2.left[0] = pair2.left[0].inverted(&g()).map_err(|e| e.to_string())?;
    let f = fuse_central_pairs(&pair1, &pair2).map_err(|e| e.to_string())?;
    ensure(f.conormal.dim() == 3, "conormal does not span a full basis of gamma")?;
    ensure(f.verdicts.get("fibre_identity") == Some(&true), format!("identity fails: {:?}", f.verdicts))?;
    ensure(f.passed(), format!("{:?}", f.verdicts))?;
  }
  Ok("5 fibre-product points, 3 covectors each".into())
}

fn moment_map_suite() -> Outcome {
  // pi' for the diagonal pair on every surface acted on by g + g-bar
  for r in [suite::disk(), suite::annulus(), suite::pair_of_pants(), suite::four_holed_sphere()] {
    let m = build(&r);
    let pair = diagonal_pair(m.data.acting_algebra(), 3).map_err(|e| e.to_string())?;
    let c = restrict_structure(&m, &pair).and_then(|s| s.check(&m.points(6, 3)?)).map_err(|e| e.to_string())?;
    ensure(c.passed(), format!("{} disks: {c:?}", r.disks))?;
  }
  let torus = build(&suite::genus_one_point());
  let conj = build(&suite::conjugation_space());
  for x in [&torus, &conj] {
    let induced = induce_central_pair(x).map_err(|e| e.to_string())?;
    for px in x.points(6, 3).map_err(|e| e.to_string())? {
      let leaf = LeafPoint::from_moment_space(x, &px, &induced.pair).map_err(|e| e.to_string())?;
      let v = moment_condition_check(&leaf, &induced.pair).map_err(|e| e.to_string())?;
      ensure(v.passed(), format!("moment identity: {v:?}"))?;
      let rt = slice_round_trip(x, &induced, &px).map_err(|e| e.to_string())?;
      ensure(rt.passed(), format!("round trip: {rt:?}"))?;
    }
  }
  for p in torus.points(4, 3).map_err(|e| e.to_string())? {
    let c = group_valued_check(&torus, &p).map_err(|e| e.to_string())?;
    ensure(c.sigma_invertible && c.symmetric_part_matches, format!("symmetric part: {c:?}"))?;
  }
  let pants = build(&suite::pair_of_pants());
  for p in pants.points(3, 3).map_err(|e| e.to_string())? {
    let t = triple_fusion_check(g(), &p).map_err(|e| e.to_string())?;
    ensure(t.passed(), format!("triple fusion: {t:?}"))?;
  }
  Ok("structure on 4 surfaces, moment identity, sigma inverse, round trip, triple fusion".into())
}

fn bruhat_data() -> Outcome {
  let annulus = build(&suite::annulus());
  let d = annulus.data.acting_algebra();
  let (e, h) = (unit(0, 3), unit(2, 3));
  let b = copywise_subalgebra(d.clone(), &[e.clone(), h]).map_err(|e| e.to_string())?;
  let n = copywise_subalgebra(d.clone(), &[e]).map_err(|e| e.to_string())?;
  let report = b.coisotropy_report();
  ensure(report.is_coisotropic, "b + b is not coisotropic")?;
  ensure(report.perp == *n.span(), "perp is not n + n")?;
  let dd = b.descend_data(&n).map_err(|e| e.to_string())?;
  let quotient = &dd.quotient;
  ensure(quotient.dim() == 2, "c/h is not two-dimensional")?;
  let abelian = (0..2).all(|i| (0..2).all(|j| (0..2).all(|k| *quotient.c(i, j, k) == q(0))));
  ensure(abelian, "c/h is not abelian")?;
  let t = quotient.t();
  ensure(t[(0, 1)] == q(0) && t[(0, 0)] != q(0) && t[(1, 1)] == -t[(0, 0)].clone(), "t' is not t + t-bar")?;
  ensure(dd.phi_prime.is_zero(), "phi' is nonzero")?;
  for p in annulus.points(5, 3).map_err(|e| e.to_string())? {
    let r = partial_reduction_at(&annulus, &p, &b, &n, true).map_err(|e| e.to_string())?;
    ensure(r.phi_prime_zero && r.verdicts.get("poisson") == Some(&true), format!("{:?}", r.verdicts))?;
    ensure(r.passed(), format!("{:?}", r.verdicts))?;
  }
  Ok("coisotropic, t + t-bar, zero Jacobiator at 3 points".into())
}

fn determinism() -> Outcome {
  let config = SuiteConfig {
    name: "annulus".into(),
    algebra: AlgebraRef::Catalog("sl2".into()),
    surface: suite::annulus(),
    split: None,
    checks: CheckKind::ALL.to_vec(),
    seed: 99,
    points_per_check: 3,
  };
  let s = runner::validate(&config).map_err(|e| e.to_string())?;
  let a = runner::run(&s, &RunOptions::default()).to_json();
  let b = runner::run(&runner::validate(&config).map_err(|e| e.to_string())?, &RunOptions::default()).to_json();
  ensure(a == b, "reports differ")?;
  let other = runner::run(&s, &RunOptions { seed: Some(100), ..Default::default() }).to_json();
  ensure(a != other, "seed has no effect")?;
  Ok(format!("{} bytes, identical", a.len()))
}

fn main() -> ExitCode {
  let criteria: [(&str, fn() -> Outcome); 11] = [
    ("algebra suite", algebra_suite),
    ("quasi-Poisson identity", quasi_poisson_identity),
    ("annulus golden test", annulus_golden),
    ("homology cross-validation", homology_crosscheck),
    ("leaf theorems", leaf_theorems),
    ("kernel lemmas", appendix),
    ("central reduction", central_reduction),
    ("fusion of central pairs", fusion_of_central_pairs),
    ("moment maps", moment_map_suite),
    ("Bruhat data", bruhat_data),
    ("determinism", determinism),
  ];
  let mut failed = 0;
  for (k, (name, f)) in criteria.iter().enumerate() {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
    match outcome {
      Ok(note) => println!("PASS {:>2} {name}: {note}", k + 1),
      Err(why) => {
        failed += 1;
        println!("FAIL {:>2} {name}: {why}", k + 1);
      }
    }
  }
  println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
  if failed == 0 {
    ExitCode::SUCCESS
  } else {
    ExitCode::FAILURE
  }
}
