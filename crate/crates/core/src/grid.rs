//! Coefficient grids and evaluation of interpolated checkpoints.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{CacheKey, ResultCache};
use crate::checkpoint::content_hash;
use crate::error::{Error, Result};
use crate::interp::{compute_delta, lerp_pair, plane_point, Delta};
use crate::tensor::{validate_compatibility, ParameterSet, SubsetFilter};

/// Extra 1D coefficients sampled densely near both endpoints.
pub const DEFAULT_EXTRA_POINTS: [f64; 12] = [
    0.025, 0.05, 0.075, 0.125, 0.15, 0.175, 0.825, 0.85, 0.875, 0.925, 0.95, 0.975,
];

const DUPLICATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    OneD,
    TwoD,
}

impl GridKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GridKind::OneD => "one_d",
            GridKind::TwoD => "two_d",
        }
    }
}

impl fmt::Display for GridKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GridKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_d" => Ok(GridKind::OneD),
            "two_d" => Ok(GridKind::TwoD),
            other => Err(Error::invalid(format!("unknown grid kind `{other}`"))),
        }
    }
}

/// Which development set a measurement was taken on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSide {
    Source,
    Target,
}

impl EvalSide {
    pub const BOTH: [EvalSide; 2] = [EvalSide::Source, EvalSide::Target];

    pub fn as_str(self) -> &'static str {
        match self {
            EvalSide::Source => "source",
            EvalSide::Target => "target",
        }
    }
}

impl fmt::Display for EvalSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EvalSide {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(EvalSide::Source),
            "target" => Ok(EvalSide::Target),
            other => Err(Error::invalid(format!("unknown eval side `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub base_step: f64,
    pub lo: f64,
    pub hi: f64,
    pub extra_points: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            base_step: 0.1,
            lo: -0.5,
            hi: 1.5,
            extra_points: DEFAULT_EXTRA_POINTS.to_vec(),
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::invalid(format!(
                "grid needs finite lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if !(self.base_step.is_finite() && self.base_step > 0.0) {
            return Err(Error::invalid(format!(
                "grid step must be positive, got {}",
                self.base_step
            )));
        }
        if let Some(p) = self
            .extra_points
            .iter()
            .find(|p| !p.is_finite() || **p < self.lo || **p > self.hi)
        {
            return Err(Error::invalid(format!(
                "extra point {p} outside [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    /// `lo, lo + step, ..., hi`, snapped to a 1e-12 decimal lattice so that
    /// points such as 0, 0.3 and 1 are the nearest doubles to their decimals.
    fn base_points(&self) -> Vec<f64> {
        let steps = ((self.hi - self.lo) / self.base_step + DUPLICATE_TOL).floor() as usize;
        (0..=steps)
            .map(|i| snap(self.lo + i as f64 * self.base_step))
            .collect()
    }
}

fn snap(v: f64) -> f64 {
    let s = (v * 1e12).round() / 1e12;
    if s == 0.0 {
        0.0
    } else {
        s
    }
}

/// Base arithmetic sequence plus extra points, sorted and de-duplicated.
pub fn build_grid_1d(spec: &GridSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut pts = spec.base_points();
    pts.extend(spec.extra_points.iter().copied());
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|b, a| (*b - *a).abs() <= DUPLICATE_TOL);
    Ok(pts)
}

/// Cartesian product of the base sequence with itself, `alpha1` outer.
pub fn build_grid_2d(spec: &GridSpec) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    let base = spec.base_points();
    Ok(base
        .iter()
        .flat_map(|&a1| base.iter().map(move |&a2| (a1, a2)))
        .collect())
}

/// Language pair, task and seed attached to every record of one sweep.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RecordTags {
    pub seed: u64,
    pub src_lang: String,
    pub tgt_lang: String,
    pub task: String,
}

impl RecordTags {
    pub fn new(seed: u64, src_lang: &str, tgt_lang: &str, task: &str) -> Self {
        Self {
            seed,
            src_lang: src_lang.into(),
            tgt_lang: tgt_lang.into(),
            task: task.into(),
        }
    }
}

/// One measurement at one grid coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub kind: GridKind,
    pub alpha1: f64,
    pub alpha2: Option<f64>,
    pub seed: u64,
    pub src_lang: String,
    pub tgt_lang: String,
    pub task: String,
    pub eval_side: EvalSide,
    pub metric: String,
    pub value: f64,
    pub normalized: Option<f64>,
}

impl EvaluationRecord {
    pub fn pair_tag(&self) -> String {
        format!("{}-{}", self.src_lang, self.tgt_lang)
    }

    pub fn coord_string(&self) -> String {
        match self.alpha2 {
            Some(a2) => format!("({}, {})", self.alpha1, a2),
            None => format!("alpha={}", self.alpha1),
        }
    }

    /// Output order: kind, alpha1, alpha2, seed, side, then the remaining tags.
    pub fn output_cmp(&self, other: &Self) -> Ordering {
        self.kind
            .cmp(&other.kind)
            .then(self.alpha1.total_cmp(&other.alpha1))
            .then(cmp_opt(self.alpha2, other.alpha2))
            .then(self.seed.cmp(&other.seed))
            .then(self.eval_side.cmp(&other.eval_side))
            .then_with(|| self.src_lang.cmp(&other.src_lang))
            .then_with(|| self.tgt_lang.cmp(&other.tgt_lang))
            .then_with(|| self.task.cmp(&other.task))
            .then_with(|| self.metric.cmp(&other.metric))
    }
}

pub(crate) fn cmp_opt(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
    }
}

/// Scores a checkpoint on the source or target development set.
///
/// Implementations must be deterministic; grid points are evaluated in
/// parallel against a shared evaluator.
pub trait Evaluator: Sync {
    fn metric(&self) -> &str;

    /// Stable identifier of the dataset behind `side`, used in cache keys.
    fn dataset_id(&self, side: EvalSide) -> String;

    fn evaluate(&self, params: &ParameterSet<f32>, side: EvalSide) -> Result<f64>;
}

struct PointJob<'a, E: ?Sized> {
    evaluator: &'a E,
    cache: Option<&'a ResultCache>,
    endpoints: &'a [String],
    filter: SubsetFilter,
}

impl<E: Evaluator + ?Sized> PointJob<'_, E> {
    fn measure(
        &self,
        params: &ParameterSet<f32>,
        coords: (f64, Option<f64>),
        side: EvalSide,
    ) -> Result<f64> {
        let coord_str = || match coords.1 {
            Some(a2) => format!("({}, {}) {side}", coords.0, a2),
            None => format!("alpha={} {side}", coords.0),
        };
        let key = self.cache.map(|_| {
            CacheKey::new(
                self.endpoints,
                coords,
                self.filter,
                &self.evaluator.dataset_id(side),
            )
        });
        if let (Some(cache), Some(key)) = (self.cache, &key) {
            if let Some(v) = cache.lookup(key) {
                return Ok(v);
            }
        }
        let value = self
            .evaluator
            .evaluate(params, side)
            .map_err(|e| Error::EvaluationFailed {
                coord: coord_str(),
                message: e.to_string(),
            })?;
        if !value.is_finite() {
            return Err(Error::EvaluationFailed {
                coord: coord_str(),
                message: format!("non-finite metric {value}"),
            });
        }
        if let (Some(cache), Some(key)) = (self.cache, &key) {
            cache.insert(key, value)?;
        }
        Ok(value)
    }
}

fn first_error<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

/// Evaluates `lerp_pair(theta0, theta1, alpha)` on both sides for each grid value.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_grid_1d<E: Evaluator + ?Sized>(
    theta0: &ParameterSet<f32>,
    theta1: &ParameterSet<f32>,
    grid: &[f64],
    evaluator: &E,
    filter: SubsetFilter,
    tags: &RecordTags,
    cache: Option<&ResultCache>,
) -> Result<Vec<EvaluationRecord>> {
    validate_compatibility(theta0, theta1)?;
    if grid.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    let endpoints = match cache {
        Some(_) => vec![content_hash(theta0), content_hash(theta1)],
        None => Vec::new(),
    };
    let job = PointJob {
        evaluator,
        cache,
        endpoints: &endpoints,
        filter,
    };
    let per_point: Vec<Result<Vec<EvaluationRecord>>> = grid
        .par_iter()
        .map(|&alpha| {
            let params = lerp_pair(theta0, theta1, alpha, filter)?;
            EvalSide::BOTH
                .iter()
                .map(|&side| {
                    let value = job.measure(&params, (alpha, None), side)?;
                    Ok(make_record(
                        GridKind::OneD,
                        alpha,
                        None,
                        side,
                        value,
                        evaluator,
                        tags,
                    ))
                })
                .collect()
        })
        .collect();
    let mut records: Vec<_> = first_error(per_point)?.into_iter().flatten().collect();
    records.sort_by(EvaluationRecord::output_cmp);
    Ok(records)
}

/// The plane spanned by two deltas from a reference checkpoint.
#[derive(Debug, Clone)]
pub struct Plane {
    pub reference: ParameterSet<f32>,
    pub d_src: Delta<f32>,
    pub d_tgt: Delta<f32>,
}

impl Plane {
    pub fn new(
        theta_bi: &ParameterSet<f32>,
        theta_src: &ParameterSet<f32>,
        theta_tgt: &ParameterSet<f32>,
        filter: SubsetFilter,
    ) -> Result<Self> {
        Ok(Self {
            reference: theta_bi.clone(),
            d_src: compute_delta(theta_src, theta_bi, filter)?,
            d_tgt: compute_delta(theta_tgt, theta_bi, filter)?,
        })
    }

    /// Same plane with both directions filter-normalized against the reference.
    pub fn filter_normalized(self) -> Result<Self> {
        let d_src = self.d_src.filter_normalized(&self.reference)?;
        let d_tgt = self.d_tgt.filter_normalized(&self.reference)?;
        Ok(Self {
            d_src,
            d_tgt,
            ..self
        })
    }

    pub fn point(&self, alpha1: f64, alpha2: f64) -> Result<ParameterSet<f32>> {
        plane_point(&self.reference, &self.d_src, &self.d_tgt, alpha1, alpha2)
    }
}

/// Evaluates the plane through `theta_bi`, `theta_src` and `theta_tgt`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_grid_2d<E: Evaluator + ?Sized>(
    theta_bi: &ParameterSet<f32>,
    theta_src: &ParameterSet<f32>,
    theta_tgt: &ParameterSet<f32>,
    grid: &[(f64, f64)],
    evaluator: &E,
    filter: SubsetFilter,
    tags: &RecordTags,
    cache: Option<&ResultCache>,
) -> Result<Vec<EvaluationRecord>> {
    let plane = Plane::new(theta_bi, theta_src, theta_tgt, filter)?;
    let endpoints = match cache {
        Some(_) => vec![
            content_hash(theta_bi),
            content_hash(theta_src),
            content_hash(theta_tgt),
        ],
        None => Vec::new(),
    };
    evaluate_plane(&plane, grid, evaluator, filter, tags, cache, &endpoints)
}

/// Evaluates an already-built plane; `endpoints` identifies it in cache keys.
pub fn evaluate_plane<E: Evaluator + ?Sized>(
    plane: &Plane,
    grid: &[(f64, f64)],
    evaluator: &E,
    filter: SubsetFilter,
    tags: &RecordTags,
    cache: Option<&ResultCache>,
    endpoints: &[String],
) -> Result<Vec<EvaluationRecord>> {
    if grid.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    let job = PointJob {
        evaluator,
        cache,
        endpoints,
        filter,
    };
    let per_point: Vec<Result<Vec<EvaluationRecord>>> = grid
        .par_iter()
        .map(|&(a1, a2)| {
            let params = plane.point(a1, a2)?;
            EvalSide::BOTH
                .iter()
                .map(|&side| {
                    let value = job.measure(&params, (a1, Some(a2)), side)?;
                    Ok(make_record(
                        GridKind::TwoD,
                        a1,
                        Some(a2),
                        side,
                        value,
                        evaluator,
                        tags,
                    ))
                })
                .collect()
        })
        .collect();
    let mut records: Vec<_> = first_error(per_point)?.into_iter().flatten().collect();
    records.sort_by(EvaluationRecord::output_cmp);
    Ok(records)
}

fn make_record<E: Evaluator + ?Sized>(
    kind: GridKind,
    alpha1: f64,
    alpha2: Option<f64>,
    side: EvalSide,
    value: f64,
    evaluator: &E,
    tags: &RecordTags,
) -> EvaluationRecord {
    EvaluationRecord {
        kind,
        alpha1,
        alpha2,
        seed: tags.seed,
        src_lang: tags.src_lang.clone(),
        tgt_lang: tags.tgt_lang.clone(),
        task: tags.task.clone(),
        eval_side: side,
        metric: evaluator.metric().to_string(),
        value,
        normalized: None,
    }
}
