//! Reference normalization, seed aggregation, variance profiles and surface
//! flatness.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cmp_opt, EvalSide, EvaluationRecord, GridKind};
use crate::stats;

/// Key identifying the run a record came from: same pair, task, seed, side,
/// metric and grid kind share one reference.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct RunKey {
    kind: GridKind,
    src_lang: String,
    tgt_lang: String,
    task: String,
    seed: u64,
    side: EvalSide,
    metric: String,
}

impl RunKey {
    fn of(r: &EvaluationRecord) -> Self {
        Self {
            kind: r.kind,
            src_lang: r.src_lang.clone(),
            tgt_lang: r.tgt_lang.clone(),
            task: r.task.clone(),
            seed: r.seed,
            side: r.eval_side,
            metric: r.metric.clone(),
        }
    }
}

impl fmt::Display for RunKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}-{} task={} seed={} side={} metric={}",
            self.kind, self.src_lang, self.tgt_lang, self.task, self.seed, self.side, self.metric
        )
    }
}

/// Whether `r` is the bilingual-model measurement of its run.
pub fn is_reference(r: &EvaluationRecord) -> bool {
    match r.kind {
        GridKind::OneD => r.alpha1 == 1.0,
        GridKind::TwoD => r.alpha1 == 0.0 && r.alpha2 == Some(0.0),
    }
}

/// Divides every value by the bilingual measurement of the same run.
///
/// The reference is `alpha = 1` on a 1D path and `(0, 0)` on a plane.
pub fn normalize_by_reference(records: &[EvaluationRecord]) -> Result<Vec<EvaluationRecord>> {
    let mut refs: BTreeMap<RunKey, f64> = BTreeMap::new();
    for r in records.iter().filter(|r| is_reference(r)) {
        refs.insert(RunKey::of(r), r.value);
    }
    records
        .iter()
        .map(|r| {
            let key = RunKey::of(r);
            let reference = *refs
                .get(&key)
                .ok_or_else(|| Error::MissingReference(key.to_string()))?;
            if reference.is_nan() || reference <= 0.0 {
                return Err(Error::DegenerateReference {
                    group: key.to_string(),
                    value: reference,
                });
            }
            let mut out = r.clone();
            out.normalized = Some(if is_reference(r) {
                1.0
            } else {
                r.value / reference
            });
            Ok(out)
        })
        .collect()
}

/// What a group of aggregated samples spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    /// Seeds within one language pair and task.
    PerPair,
    /// Seeds and pairs within one task.
    PerTask,
    /// Every (pair, task, seed) value as one sample.
    Pooled,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::PerPair => "per-pair",
            Scope::PerTask => "per-task",
            Scope::Pooled => "pooled",
        }
    }

    fn group_of(self, r: &EvaluationRecord) -> String {
        match self {
            Scope::PerPair => format!("{}/{}", r.pair_tag(), r.task),
            Scope::PerTask => r.task.clone(),
            Scope::Pooled => "all".to_string(),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-pair" => Ok(Scope::PerPair),
            "per-task" => Ok(Scope::PerTask),
            "pooled" => Ok(Scope::Pooled),
            other => Err(Error::invalid(format!(
                "unknown scope `{other}` (expected per-pair, per-task or pooled)"
            ))),
        }
    }
}

/// Normalized mean, variance and 95% interval at one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub alpha1: f64,
    pub alpha2: Option<f64>,
    pub side: EvalSide,
    pub group: String,
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub ci95: f64,
}

/// Aggregates of one grid kind, as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub kind: GridKind,
    pub scope: Scope,
    pub points: Vec<AggregateRecord>,
}

impl AggregateReport {
    pub fn groups(&self) -> Vec<String> {
        let mut g: Vec<String> = self.points.iter().map(|p| p.group.clone()).collect();
        g.dedup();
        g.sort();
        g.dedup();
        g
    }
}

fn normalized_value(r: &EvaluationRecord) -> Result<f64> {
    r.normalized.ok_or_else(|| {
        Error::invalid(format!(
            "record at {} has no normalized value; normalize first",
            r.coord_string()
        ))
    })
}

/// Mean, unbiased variance and Student-t half-width per
/// (coordinate, side, group), for records of a single grid kind.
pub fn aggregate_records(
    records: &[EvaluationRecord],
    scope: Scope,
) -> Result<Vec<AggregateRecord>> {
    let mut samples: Vec<(String, EvalSide, f64, Option<f64>, f64)> = records
        .iter()
        .map(|r| {
            Ok((
                scope.group_of(r),
                r.eval_side,
                r.alpha1,
                r.alpha2,
                normalized_value(r)?,
            ))
        })
        .collect::<Result<_>>()?;
    samples.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
            .then(cmp_opt(a.3, b.3))
            .then(a.4.total_cmp(&b.4))
    });
    let mut out = Vec::new();
    for chunk in samples.chunk_by(|a, b| {
        a.0 == b.0
            && a.1 == b.1
            && a.2.to_bits() == b.2.to_bits()
            && a.3.map(f64::to_bits) == b.3.map(f64::to_bits)
    }) {
        let values: Vec<f64> = chunk.iter().map(|s| s.4).collect();
        let var = stats::sample_variance(&values)?;
        out.push(AggregateRecord {
            alpha1: chunk[0].2,
            alpha2: chunk[0].3,
            side: chunk[0].1,
            group: chunk[0].0.clone(),
            n: values.len(),
            mean: stats::mean(&values)?,
            var,
            ci95: stats::ci95_half_width(values.len(), var)?,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyGroup("no records to aggregate".into()));
    }
    Ok(out)
}

/// Normalizes, then aggregates each grid kind present into its own report.
pub fn build_reports(records: &[EvaluationRecord], scope: Scope) -> Result<Vec<AggregateReport>> {
    let normalized = normalize_by_reference(records)?;
    let mut reports = Vec::new();
    for kind in [GridKind::OneD, GridKind::TwoD] {
        let subset: Vec<EvaluationRecord> = normalized
            .iter()
            .filter(|r| r.kind == kind)
            .cloned()
            .collect();
        if subset.is_empty() {
            continue;
        }
        reports.push(AggregateReport {
            kind,
            scope,
            points: aggregate_records(&subset, scope)?,
        });
    }
    if reports.is_empty() {
        return Err(Error::EmptyGroup("no records to aggregate".into()));
    }
    Ok(reports)
}

/// Sample variance of normalized values per coordinate and side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariancePoint {
    pub alpha1: f64,
    pub alpha2: Option<f64>,
    pub var_source: f64,
    pub var_target: f64,
}

/// Per-coordinate source and target variance over seeds.
pub fn variance_profile(records: &[EvaluationRecord]) -> Result<Vec<VariancePoint>> {
    type Coord = (GridKind, u64, Option<u64>);
    let mut by_coord: BTreeMap<Coord, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut coords: BTreeMap<Coord, (f64, Option<f64>)> = BTreeMap::new();
    for r in records {
        let v = normalized_value(r)?;
        let key = (r.kind, r.alpha1.to_bits(), r.alpha2.map(f64::to_bits));
        coords.insert(key, (r.alpha1, r.alpha2));
        let slot = by_coord.entry(key).or_default();
        match r.eval_side {
            EvalSide::Source => slot.0.push(v),
            EvalSide::Target => slot.1.push(v),
        }
    }
    let mut out = Vec::with_capacity(by_coord.len());
    for (key, (src, tgt)) in by_coord {
        let (alpha1, alpha2) = coords[&key];
        let found = src.len().min(tgt.len());
        if found < 2 {
            let coord = match alpha2 {
                Some(a2) => format!("({alpha1}, {a2})"),
                None => format!("alpha={alpha1}"),
            };
            return Err(Error::InsufficientSeeds { coord, found });
        }
        out.push(VariancePoint {
            alpha1,
            alpha2,
            var_source: stats::sample_variance(&src)?,
            var_target: stats::sample_variance(&tgt)?,
        });
    }
    out.sort_by(|a, b| {
        a.alpha1
            .total_cmp(&b.alpha1)
            .then(cmp_opt(a.alpha2, b.alpha2))
    });
    Ok(out)
}

/// Values on a rectangular `alpha1 x alpha2` grid, rows indexed by `alpha1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    values: Vec<f64>,
}

impl Surface {
    pub fn new(alpha1: Vec<f64>, alpha2: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if alpha1.is_empty() || alpha2.is_empty() || values.len() != alpha1.len() * alpha2.len() {
            return Err(Error::IncompleteGrid(format!(
                "{} values for a {}x{} grid",
                values.len(),
                alpha1.len(),
                alpha2.len()
            )));
        }
        Ok(Self {
            alpha1,
            alpha2,
            values,
        })
    }

    /// Assembles the `side`/`group` means of a 2D report; every
    /// `(alpha1, alpha2)` combination must be present exactly once.
    pub fn from_aggregates(
        points: &[AggregateRecord],
        side: EvalSide,
        group: &str,
    ) -> Result<Self> {
        let cells: Vec<(f64, f64, f64)> = points
            .iter()
            .filter(|p| p.side == side && p.group == group)
            .map(|p| {
                p.alpha2
                    .map(|a2| (p.alpha1, a2, p.mean))
                    .ok_or_else(|| Error::IncompleteGrid("1D aggregate in a surface".into()))
            })
            .collect::<Result<_>>()?;
        let axis = |sel: fn(&(f64, f64, f64)) -> f64| {
            let mut v: Vec<f64> = cells.iter().map(sel).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let a1 = axis(|c| c.0);
        let a2 = axis(|c| c.1);
        let mut grid = vec![None; a1.len() * a2.len()];
        for &(x, y, m) in &cells {
            let i = a1.binary_search_by(|v| v.total_cmp(&x)).unwrap();
            let j = a2.binary_search_by(|v| v.total_cmp(&y)).unwrap();
            if grid[i * a2.len() + j].replace(m).is_some() {
                return Err(Error::IncompleteGrid(format!("duplicate cell ({x}, {y})")));
            }
        }
        let values = grid
            .into_iter()
            .enumerate()
            .map(|(k, v)| {
                v.ok_or_else(|| {
                    Error::IncompleteGrid(format!(
                        "missing cell ({}, {}) for {side}/{group}",
                        a1[k / a2.len()],
                        a2[k % a2.len()]
                    ))
                })
            })
            .collect::<Result<_>>()?;
        Self::new(a1, a2, values)
    }

    pub fn rows(&self) -> usize {
        self.alpha1.len()
    }

    pub fn cols(&self) -> usize {
        self.alpha2.len()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The `(2r+1) x (2r+1)` block centred on `(alpha1, alpha2)`.
    pub fn window(&self, alpha1: f64, alpha2: f64, radius: usize) -> Result<Self> {
        let find = |axis: &[f64], v: f64| {
            axis.iter()
                .position(|&a| (a - v).abs() < 1e-9)
                .ok_or_else(|| Error::IncompleteGrid(format!("coordinate {v} not on grid")))
        };
        let (ci, cj) = (find(&self.alpha1, alpha1)?, find(&self.alpha2, alpha2)?);
        if ci < radius || cj < radius || ci + radius >= self.rows() || cj + radius >= self.cols() {
            return Err(Error::IncompleteGrid(format!(
                "window of radius {radius} around ({alpha1}, {alpha2}) leaves the grid"
            )));
        }
        let (ri, rj) = (ci - radius..=ci + radius, cj - radius..=cj + radius);
        let values = ri
            .clone()
            .flat_map(|i| rj.clone().map(move |j| (i, j)))
            .map(|(i, j)| self.at(i, j))
            .collect();
        Self::new(self.alpha1[ri].to_vec(), self.alpha2[rj].to_vec(), values)
    }
}

/// Mean absolute difference over horizontally and vertically adjacent cells.
pub fn flatness_score(surface: &Surface) -> f64 {
    let (rows, cols) = (surface.rows(), surface.cols());
    let mut diffs = Vec::with_capacity(2 * rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            if j + 1 < cols {
                diffs.push((surface.at(i, j) - surface.at(i, j + 1)).abs());
            }
            if i + 1 < rows {
                diffs.push((surface.at(i, j) - surface.at(i + 1, j)).abs());
            }
        }
    }
    if diffs.is_empty() {
        return 0.0;
    }
    diffs.sort_by(f64::total_cmp);
    diffs.iter().sum::<f64>() / diffs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(alpha: f64, seed: u64, side: EvalSide, value: f64) -> EvaluationRecord {
        EvaluationRecord {
            kind: GridKind::OneD,
            alpha1: alpha,
            alpha2: None,
            seed,
            src_lang: "src".into(),
            tgt_lang: "tgt".into(),
            task: "toy".into(),
            eval_side: side,
            metric: "acc".into(),
            value,
            normalized: None,
        }
    }

    #[test]
    fn normalization_examples() {
        let recs = vec![
            rec(0.0, 0, EvalSide::Target, 0.6),
            rec(1.0, 0, EvalSide::Target, 0.8),
        ];
        let n = normalize_by_reference(&recs).unwrap();
        assert_eq!(n[0].normalized, Some(0.6 / 0.8));
        assert!((n[0].normalized.unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(n[1].normalized, Some(1.0));
    }

    #[test]
    fn normalization_errors() {
        let missing = vec![rec(0.0, 0, EvalSide::Target, 0.6)];
        assert!(matches!(
            normalize_by_reference(&missing),
            Err(Error::MissingReference(_))
        ));
        let zero = vec![
            rec(0.0, 0, EvalSide::Target, 0.6),
            rec(1.0, 0, EvalSide::Target, 0.0),
        ];
        assert!(matches!(
            normalize_by_reference(&zero),
            Err(Error::DegenerateReference { .. })
        ));
        // References are matched per seed.
        let other_seed = vec![
            rec(0.0, 1, EvalSide::Target, 0.6),
            rec(1.0, 0, EvalSide::Target, 0.8),
        ];
        assert!(normalize_by_reference(&other_seed).is_err());
    }

    fn normed(alpha: f64, seed: u64, side: EvalSide, v: f64) -> EvaluationRecord {
        EvaluationRecord {
            normalized: Some(v),
            ..rec(alpha, seed, side, v)
        }
    }

    #[test]
    fn aggregate_examples() {
        let single =
            aggregate_records(&[normed(0.0, 0, EvalSide::Source, 1.0)], Scope::PerPair).unwrap();
        assert_eq!(single[0].n, 1);
        assert_eq!(
            (single[0].mean, single[0].var, single[0].ci95),
            (1.0, 0.0, 0.0)
        );

        let three: Vec<_> = [0.9, 1.0, 1.1]
            .iter()
            .enumerate()
            .map(|(s, &v)| normed(0.5, s as u64, EvalSide::Target, v))
            .collect();
        let agg = aggregate_records(&three, Scope::PerPair).unwrap();
        assert_eq!(agg.len(), 1);
        assert!((agg[0].mean - 1.0).abs() < 1e-12);
        assert!((agg[0].var.sqrt() - 0.1).abs() < 1e-12);
        assert!((agg[0].ci95 - 0.2484).abs() < 5e-4);
        assert_eq!(agg[0].group, "src-tgt/toy");

        let mut rev = three.clone();
        rev.reverse();
        assert_eq!(aggregate_records(&rev, Scope::PerPair).unwrap(), agg);
    }

    #[test]
    fn unnormalized_records_rejected() {
        assert!(aggregate_records(&[rec(0.0, 0, EvalSide::Source, 1.0)], Scope::Pooled).is_err());
        assert!(matches!(
            aggregate_records(&[], Scope::Pooled),
            Err(Error::EmptyGroup(_))
        ));
    }

    #[test]
    fn variance_profile_examples() {
        let recs = vec![
            normed(0.0, 0, EvalSide::Source, 1.0),
            normed(0.0, 1, EvalSide::Source, 1.0),
            normed(0.0, 0, EvalSide::Target, 0.4),
            normed(0.0, 1, EvalSide::Target, 0.6),
        ];
        let prof = variance_profile(&recs).unwrap();
        assert_eq!(prof.len(), 1);
        assert_eq!(prof[0].var_source, 0.0);
        assert!((prof[0].var_target - 0.02).abs() < 1e-15);

        let one_seed = &recs[..1];
        assert!(matches!(
            variance_profile(one_seed),
            Err(Error::InsufficientSeeds { .. })
        ));
    }

    #[test]
    fn flatness_examples() {
        let constant = Surface::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.7; 4]).unwrap();
        assert_eq!(flatness_score(&constant), 0.0);

        let ramp: Vec<f64> = (0..6).map(|i| i as f64 * 0.1).collect();
        let row = Surface::new(vec![0.0], ramp.clone(), ramp).unwrap();
        assert!((flatness_score(&row) - 0.1).abs() < 1e-12);

        let square =
            Surface::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(flatness_score(&square), 0.5);
    }

    #[test]
    fn surface_from_aggregates_requires_complete_grid() {
        let pt = |a1: f64, a2: f64, m: f64| AggregateRecord {
            alpha1: a1,
            alpha2: Some(a2),
            side: EvalSide::Target,
            group: "g".into(),
            n: 1,
            mean: m,
            var: 0.0,
            ci95: 0.0,
        };
        let pts = vec![
            pt(0.0, 0.0, 1.0),
            pt(0.0, 1.0, 2.0),
            pt(1.0, 0.0, 3.0),
            pt(1.0, 1.0, 4.0),
        ];
        let s = Surface::from_aggregates(&pts, EvalSide::Target, "g").unwrap();
        assert_eq!(s.at(1, 0), 3.0);
        assert!(matches!(
            Surface::from_aggregates(&pts[..3], EvalSide::Target, "g"),
            Err(Error::IncompleteGrid(_))
        ));
    }

    #[test]
    fn window_bounds() {
        let axis: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let vals: Vec<f64> = (0..25).map(|i| i as f64).collect();
        let s = Surface::new(axis.clone(), axis, vals).unwrap();
        let w = s.window(2.0, 1.0, 1).unwrap();
        assert_eq!(
            w.values(),
            &[5.0, 6.0, 7.0, 10.0, 11.0, 12.0, 15.0, 16.0, 17.0]
        );
        assert!(s.window(0.0, 2.0, 1).is_err());
    }
}
