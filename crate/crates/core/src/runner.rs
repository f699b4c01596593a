//! Suite configuration, check orchestration and the JSON report.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::homology::{annihilator_image, intersection_sigma, left_kernel_on, skew_pi, LocalSystem};
use crate::invcalc::{action_extend, Frame, GroupPoint, Multivector};
use crate::linalg::{Matrix, Vector};
use crate::moduli::{ModuliError, ModuliSpace};
use crate::momentmap::{diagonal_pair, restrict_structure};
use crate::qla::{catalog, AlgebraDoc, QuadraticLieAlgebra};
use crate::rational::{fmt_q, parse_q, Q};
use crate::reduction::{appendix_suite, central_reduction_at, diagonal_subalgebra, CentralPairModel};
use crate::surface::{ArcKind, Sign, SurfaceRecipe};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
  #[error("{message} at line {line}, column {column}")]
  Parse { line: usize, column: usize, message: String },
  #[error("unresolved reference: {0}")]
  Unresolved(String),
  #[error("invalid configuration: {0}")]
  Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
  QuasiPoisson,
  Centrality,
  Leaves,
  HomologyCrosscheck,
  Reduce,
  Momentmap,
  Appendix,
}

impl CheckKind {
  pub const ALL: [CheckKind; 7] = [
    CheckKind::QuasiPoisson,
    CheckKind::Centrality,
    CheckKind::Leaves,
    CheckKind::HomologyCrosscheck,
    CheckKind::Reduce,
    CheckKind::Momentmap,
    CheckKind::Appendix,
  ];

  pub fn name(self) -> &'static str {
    match self {
      CheckKind::QuasiPoisson => "quasi_poisson",
      CheckKind::Centrality => "centrality",
      CheckKind::Leaves => "leaves",
      CheckKind::HomologyCrosscheck => "homology_crosscheck",
      CheckKind::Reduce => "reduce",
      CheckKind::Momentmap => "momentmap",
      CheckKind::Appendix => "appendix",
    }
  }

  pub fn parse(name: &str) -> Option<Self> {
    Self::ALL.into_iter().find(|k| k.name() == name)
  }
}

/// A catalog name or an inline algebra document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgebraRef {
  Catalog(String),
  Inline(AlgebraDoc),
}

fn default_points() -> usize {
  5
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
  #[serde(default)]
  pub name: String,
  pub algebra: AlgebraRef,
  pub surface: SurfaceRecipe,
  /// Optional re-split of every vertex, used by the homology check.
  #[serde(default, skip_serializing_if = "Option::is_none")]
  pub split: Option<Vec<Sign>>,
  pub checks: Vec<CheckKind>,
  pub seed: u64,
  #[serde(default = "default_points")]
  pub points_per_check: usize,
}

impl SuiteConfig {
  pub fn parse(text: &str) -> Result<Self, ConfigError> {
    serde_json::from_str(text).map_err(|e| {
      let (line, column) = (e.line(), e.column());
      let full = e.to_string();
      let message = full.strip_suffix(&format!(" at line {line} column {column}")).unwrap_or(&full).to_string();
      ConfigError::Parse { line, column, message }
    })
  }

  pub fn to_json(&self) -> String {
    serde_json::to_string_pretty(self).expect("config serializes")
  }
}

/// A config with its references resolved and the moduli space built.
pub struct Suite {
  pub config: SuiteConfig,
  pub algebra: Arc<QuadraticLieAlgebra>,
  pub space: ModuliSpace,
}

/// Resolves references and checks that every requested check applies.
pub fn validate(config: &SuiteConfig) -> Result<Suite, ConfigError> {
  let algebra = match &config.algebra {
    AlgebraRef::Catalog(name) => catalog(name).map_err(|e| ConfigError::Unresolved(e.to_string()))?,
    AlgebraRef::Inline(doc) => QuadraticLieAlgebra::from_json(doc).map_err(|e| ConfigError::Invalid(e.to_string()))?,
  };
  let algebra = Arc::new(algebra);
  let space = ModuliSpace::build(&config.surface, algebra.clone()).map_err(|e| match e {
    ModuliError::Surface(s) => ConfigError::Unresolved(s.to_string()),
    other => ConfigError::Invalid(other.to_string()),
  })?;
  if config.points_per_check == 0 {
    return Err(ConfigError::Invalid("points_per_check must be positive".into()));
  }
  if config.checks.is_empty() {
    return Err(ConfigError::Invalid("no checks requested".into()));
  }
  if let Some(split) = &config.split {
    let n = space.surface.vertex_ids().count();
    if split.len() != n {
      return Err(ConfigError::Invalid(format!("split has {} signs for {n} vertices", split.len())));
    }
  }
  for &k in &config.checks {
    if let Some(reason) = unsupported(k, &space) {
      return Err(ConfigError::Invalid(format!("{} does not apply: {reason}", k.name())));
    }
  }
  Ok(Suite { config: config.clone(), algebra, space })
}

fn unsupported(k: CheckKind, m: &ModuliSpace) -> Option<String> {
  let nondegenerate = m.algebra().is_nondegenerate();
  let live = m.data.copies.len();
  let signs: Vec<Sign> = m.data.copies.iter().map(|c| c.sign).collect();
  match k {
    CheckKind::QuasiPoisson | CheckKind::Centrality | CheckKind::Appendix => None,
    CheckKind::Leaves | CheckKind::HomologyCrosscheck if !nondegenerate => Some("t is degenerate".into()),
    CheckKind::Leaves | CheckKind::HomologyCrosscheck => None,
    CheckKind::Reduce | CheckKind::Momentmap if !nondegenerate => Some("t is degenerate".into()),
    CheckKind::Reduce | CheckKind::Momentmap if live != 2 || signs[0] == signs[1] => {
      Some(format!("needs one + and one - acting point, found {live}"))
    }
    CheckKind::Reduce | CheckKind::Momentmap => None,
  }
}

/// A failure certificate: the point, the covectors it was detected on and the
/// offending value. Replaying it with [`replay`] reproduces the failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
  pub point: Vec<Vec<Vec<String>>>,
  pub kind: String,
  pub covectors: Vec<Vec<String>>,
  #[serde(default, skip_serializing_if = "Option::is_none")]
  pub value: Option<String>,
}

fn strings(v: &[Q]) -> Vec<String> {
  v.iter().map(fmt_q).collect()
}

fn encode_point(p: &GroupPoint) -> Vec<Vec<Vec<String>>> {
  p.values.iter().map(|m| (0..m.rows()).map(|r| strings(m.row(r))).collect()).collect()
}

fn decode_vector(v: &[String]) -> Result<Vector, ConfigError> {
  v.iter().map(|s| parse_q(s).map_err(|e| ConfigError::Invalid(e.to_string()))).collect()
}

fn decode_point(m: &ModuliSpace, w: &Witness) -> Result<GroupPoint, ConfigError> {
  let values = w
    .point
    .iter()
    .map(|rows| {
      let rows: Vec<Vector> = rows.iter().map(|r| decode_vector(r)).collect::<Result<_, _>>()?;
      let cols = rows.first().map_or(0, Vec::len);
      Ok(Matrix::from_rows(&rows, cols))
    })
    .collect::<Result<_, ConfigError>>()?;
  GroupPoint::new(m.layout(), values).map_err(|e| ConfigError::Invalid(e.to_string()))
}

fn unit(i: usize, n: usize) -> Vector {
  (0..n).map(|k| if k == i { Q::from_integer(1.into()) } else { Q::zero() }).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
  pub passed: bool,
  pub points: usize,
  pub details: Value,
  #[serde(skip_serializing_if = "Option::is_none")]
  pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
  pub name: String,
  pub seed: u64,
  pub points_per_check: usize,
  pub algebra: String,
  pub surface: Value,
  pub checks: BTreeMap<String, CheckResult>,
  pub passed: bool,
  #[serde(skip_serializing_if = "Option::is_none")]
  pub timing_ms: Option<BTreeMap<String, u128>>,
}

impl Report {
  pub fn to_json(&self) -> String {
    serde_json::to_string_pretty(self).expect("report serializes")
  }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
  pub seed: Option<u64>,
  pub points: Option<usize>,
  pub only: Option<CheckKind>,
  /// Wall-clock timings make the report non-reproducible, so they are opt-in.
  pub timing: bool,
}

/// Summary of the surface and its moduli space.
pub fn describe(m: &ModuliSpace) -> Value {
  let r = &m.report;
  json!({
    "dim": m.dim(),
    "euler_characteristic": r.euler_characteristic,
    "genus": r.genus,
    "boundary_components": r.boundary_components,
    "left_arcs": r.left_count,
    "right_arcs": r.right_count,
    "neither_arcs": r.neither_count,
    "uncut_circles": r.uncut.len(),
    "acting_points": m.data.copies.len(),
    "forgotten_points": m.data.forgotten.len(),
  })
}

/// The terms of `pi` as `coefficient a ^ b` strings, in canonical order.
pub fn pi_terms(m: &ModuliSpace) -> Vec<String> {
  m.data
    .pi
    .terms()
    .iter()
    .map(|(word, c)| {
      let w: Vec<String> = word.iter().map(|g| g.to_string()).collect();
      format!("{} {}", fmt_q(c), w.join(" ^ "))
    })
    .collect()
}

pub fn run(suite: &Suite, opts: &RunOptions) -> Report {
  let seed = opts.seed.unwrap_or(suite.config.seed);
  let n = opts.points.unwrap_or(suite.config.points_per_check);
  let mut checks = BTreeMap::new();
  let mut timing = BTreeMap::new();
  for &k in &suite.config.checks {
    if opts.only.is_some_and(|o| o != k) {
      continue;
    }
    let start = Instant::now();
    let result = run_check(suite, k, seed, n).unwrap_or_else(|e| CheckResult {
      passed: false,
      points: 0,
      details: json!({ "error": e }),
      witness: None,
    });
    timing.insert(k.name().to_string(), start.elapsed().as_millis());
    checks.insert(k.name().to_string(), result);
  }
  let algebra = match &suite.config.algebra {
    AlgebraRef::Catalog(name) => name.clone(),
    AlgebraRef::Inline(_) => "inline".into(),
  };
  Report {
    name: suite.config.name.clone(),
    seed,
    points_per_check: n,
    algebra,
    surface: describe(&suite.space),
    passed: !checks.is_empty() && checks.values().all(|c| c.passed),
    checks,
    timing_ms: opts.timing.then_some(timing),
  }
}

fn run_check(suite: &Suite, k: CheckKind, seed: u64, n: usize) -> Result<CheckResult, String> {
  let m = &suite.space;
  let err = |e: &dyn std::fmt::Display| e.to_string();
  if k == CheckKind::Appendix {
    let s = appendix_suite(seed, 20 * n).map_err(|e| err(&e))?;
    return Ok(CheckResult { passed: s.passed(), points: 0, details: json!(s), witness: None });
  }
  let points = m.points(seed, n).map_err(|e| err(&e))?;
  let mut details = Vec::new();
  let mut witness = None;
  for p in &points {
    let (row, w) = check_at(suite, k, p)?;
    details.push(row);
    if witness.is_none() {
      witness = w;
    }
  }
  Ok(CheckResult { passed: witness.is_none(), points: points.len(), details: Value::Array(details), witness })
}

fn point_witness(p: &GroupPoint, kind: &str) -> Witness {
  Witness { point: encode_point(p), kind: kind.into(), covectors: Vec::new(), value: None }
}

/// Runs one check at one point: its report row and a witness on failure.
fn check_at(suite: &Suite, k: CheckKind, p: &GroupPoint) -> Result<(Value, Option<Witness>), String> {
  let m = &suite.space;
  let err = |e: &dyn std::fmt::Display| e.to_string();
  match k {
    CheckKind::QuasiPoisson => {
      let c = m.data.check_quasi_poisson(std::slice::from_ref(p)).map_err(|e| err(&e))?;
      let w = if c.passed() { None } else { Some(quasi_poisson_witness(m, p).map_err(|e| err(&e))?.unwrap_or_else(|| point_witness(p, "reduced_bracket"))) };
      Ok((json!(c), w))
    }
    CheckKind::Centrality => {
      let c = m.check_centrality(p).map_err(|e| err(&e))?;
      let w = if c.passed() { None } else { Some(centrality_witness(m, p).map_err(|e| err(&e))?.unwrap_or_else(|| point_witness(p, "equivariance"))) };
      Ok((json!({ "left_central": c.left_central, "right_central": c.right_central, "equivariant": c.equivariant }), w))
    }
    CheckKind::Leaves => {
      let r = m.leaf_ranks(p).map_err(|e| err(&e))?;
      let ok = r.left == r.right && r.big_consistent && (!r.generic || r.theorem_match);
      Ok((json!(r), (!ok).then(|| point_witness(p, "leaves"))))
    }
    CheckKind::HomologyCrosscheck => {
      let pd = m.data.at(p).map_err(|e| err(&e))?;
      let ls = LocalSystem::new(m.algebra().clone(), p.clone()).map_err(|e| err(&e))?;
      let s = intersection_sigma(&m.surface, &ls, None).map_err(|e| err(&e))?;
      let b = pd.basic.basis_matrix();
      let sigma_matches = s.congruence(&b, &b) == pd.sigma_on_basic();
      let split_invariant = match &suite.config.split {
        Some(split) => skew_pi(&m.surface, &ls, Some(split)).map_err(|e| err(&e))? == skew_pi(&m.surface, &ls, None).map_err(|e| err(&e))?,
        None => true,
      };
      let image = annihilator_image(&m.surface, &ls).map_err(|e| err(&e))?;
      let kernel_matches = left_kernel_on(&s, &pd.basic) == image.space.intersect(&pd.basic);
      let ok = sigma_matches && split_invariant && kernel_matches;
      let row = json!({ "sigma_matches": sigma_matches, "split_invariant": split_invariant, "kernel_matches": kernel_matches, "annihilator_dim": image.space.dim() });
      Ok((row, (!ok).then(|| point_witness(p, "homology_crosscheck"))))
    }
    CheckKind::Reduce => {
      let model = CentralPairModel::from_moduli(m, p).map_err(|e| err(&e))?;
      let c = diagonal_subalgebra(model.acting.clone(), m.algebra().dim()).map_err(|e| err(&e))?;
      match central_reduction_at(&model, &c, true) {
        Ok(r) => {
          let ok = r.passed() && r.is_nondegenerate();
          let row = json!({ "dimension": r.dimension, "rank": r.rank, "transversality": r.transversality, "verdicts": r.verdicts });
          Ok((row, (!ok).then(|| point_witness(p, "reduce"))))
        }
        Err(e) => Ok((json!({ "error": e.to_string() }), Some(point_witness(p, "reduce")))),
      }
    }
    CheckKind::Momentmap => {
      let pair = diagonal_pair(m.data.acting_algebra(), m.algebra().dim()).map_err(|e| err(&e))?;
      let c = restrict_structure(m, &pair).and_then(|s| s.check(std::slice::from_ref(p))).map_err(|e| err(&e))?;
      Ok((json!(c), (!c.passed()).then(|| point_witness(p, "momentmap"))))
    }
    CheckKind::Appendix => unreachable!("handled per suite"),
  }
}

fn quasi_poisson_diffs(m: &ModuliSpace) -> Result<(Multivector, Vec<Multivector>), crate::invcalc::CalcError> {
  let full = m.data.full_rho();
  let two = Q::from_integer(2.into());
  let rhs = action_extend(&full, &full.acting.cartan_trivector()).scale(&two);
  let diff = m.data.pi.schouten(&m.data.pi)?.sub(&rhs)?;
  let invariance = full.images.iter().map(|r| r.schouten(&m.data.pi)).collect::<Result<_, _>>()?;
  Ok((diff, invariance))
}

fn quasi_poisson_witness(m: &ModuliSpace, p: &GroupPoint) -> Result<Option<Witness>, crate::invcalc::CalcError> {
  let (diff, invariance) = quasi_poisson_diffs(m)?;
  let frame = Frame::at(m.layout(), p)?;
  let n = m.layout().total_dim();
  let named = std::iter::once(("bracket".to_string(), diff)).chain(invariance.into_iter().enumerate().map(|(u, x)| (format!("invariance:{u}"), x)));
  for (kind, x) in named {
    let t = frame.evaluate(&x)?;
    if let Some((idx, v)) = t.components().iter().find(|(_, v)| !v.is_zero()) {
      let covectors = idx.iter().map(|&i| strings(&unit(i, n))).collect();
      return Ok(Some(Witness { point: encode_point(p), kind, covectors, value: Some(fmt_q(v)) }));
    }
  }
  Ok(None)
}

fn centrality_witness(m: &ModuliSpace, p: &GroupPoint) -> Result<Option<Witness>, ModuliError> {
  let pd = m.data.at(p)?;
  let maps = m.central_maps();
  for (kind, arcs) in [(ArcKind::Left, &maps.left), (ArcKind::Right, &maps.right)] {
    for arc in arcs {
      let dm = arc.word.differential(m.algebra(), m.layout(), p)?;
      for beta in dm.row_vecs() {
        for w in pd.basic.basis() {
          let v = match kind {
            ArcKind::Left => pd.sigma.bilinear(&beta, w),
            _ => pd.sigma.bilinear(w, &beta),
          };
          if !v.is_zero() {
            let name = if kind == ArcKind::Left { "left" } else { "right" };
            return Ok(Some(Witness { point: encode_point(p), kind: name.into(), covectors: vec![strings(&beta), strings(w)], value: Some(fmt_q(&v)) }));
          }
        }
      }
    }
  }
  Ok(None)
}

/// Re-evaluates a witness in isolation. `Ok(true)` means the failure is reproduced.
pub fn replay(suite: &Suite, check: CheckKind, w: &Witness) -> Result<bool, ConfigError> {
  let m = &suite.space;
  let p = decode_point(m, w)?;
  let covs: Vec<Vector> = w.covectors.iter().map(|c| decode_vector(c)).collect::<Result<_, _>>()?;
  let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
  match (check, w.kind.as_str()) {
    (CheckKind::QuasiPoisson, kind) if !covs.is_empty() => {
      let (diff, invariance) = quasi_poisson_diffs(m).map_err(|e| invalid(&e))?;
      let x = match kind.strip_prefix("invariance:") {
        Some(u) => invariance.get(u.parse::<usize>().map_err(|e| invalid(&e))?).cloned().ok_or_else(|| ConfigError::Invalid(kind.into()))?,
        None => diff,
      };
      let t = Frame::at(m.layout(), &p).and_then(|f| f.evaluate(&x)).map_err(|e| invalid(&e))?;
      let refs: Vec<&[Q]> = covs.iter().map(Vec::as_slice).collect();
      Ok(!t.contract(&refs).is_zero())
    }
    (CheckKind::Centrality, "left" | "right") if covs.len() == 2 => {
      let pd = m.data.at(&p).map_err(|e| invalid(&e))?;
      let v = if w.kind == "left" { pd.sigma.bilinear(&covs[0], &covs[1]) } else { pd.sigma.bilinear(&covs[1], &covs[0]) };
      Ok(!v.is_zero())
    }
    _ => {
      let (_, again) = check_at(suite, check, &p).map_err(ConfigError::Invalid)?;
      Ok(again.is_some())
    }
  }
}
