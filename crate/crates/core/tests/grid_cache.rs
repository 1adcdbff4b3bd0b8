use std::sync::atomic::{AtomicUsize, Ordering};

use xfer_surface::cache::ResultCache;
use xfer_surface::grid::*;
use xfer_surface::{ParameterSet32, Result, SubsetFilter, Tensor32};

struct Counting {
    calls: AtomicUsize,
}

impl Evaluator for Counting {
    fn metric(&self) -> &str {
        "sum"
    }

    fn dataset_id(&self, side: EvalSide) -> String {
        format!("counting:{side}")
    }

    fn evaluate(&self, params: &ParameterSet32, side: EvalSide) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let s: f64 = params
            .iter()
            .flat_map(|(_, t)| t.data())
            .map(|&v| f64::from(v))
            .sum();
        Ok(match side {
            EvalSide::Source => 2.0 + s,
            EvalSide::Target => 3.0 + s * s,
        })
    }
}

fn ps(v: [f32; 3]) -> ParameterSet32 {
    ParameterSet32::from_tensors([
        ("encoder.w", Tensor32::vector(v[..2].to_vec()).unwrap()),
        ("head.b", Tensor32::vector(vec![v[2]]).unwrap()),
    ])
    .unwrap()
}

#[test]
fn cache_is_transparent_and_skips_repeat_work() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ResultCache::open(dir.path()).unwrap();
    let (a, b, c) = (
        ps([0.1, 0.2, 0.3]),
        ps([1.0, -1.0, 0.5]),
        ps([0.0, 0.7, -0.2]),
    );
    let grid1 = build_grid_1d(&GridSpec::default()).unwrap();
    let grid2 = build_grid_2d(&GridSpec::default()).unwrap();
    let tags = RecordTags::new(0, "src", "tgt", "unit");

    let eval = Counting {
        calls: AtomicUsize::new(0),
    };
    let plain1 = evaluate_grid_1d(&a, &b, &grid1, &eval, SubsetFilter::All, &tags, None).unwrap();
    let plain2 =
        evaluate_grid_2d(&a, &b, &c, &grid2, &eval, SubsetFilter::All, &tags, None).unwrap();
    let uncached_calls = eval.calls.swap(0, Ordering::SeqCst);
    assert_eq!(uncached_calls, (33 + 441) * 2);

    let first1 = evaluate_grid_1d(
        &a,
        &b,
        &grid1,
        &eval,
        SubsetFilter::All,
        &tags,
        Some(&cache),
    )
    .unwrap();
    let first2 = evaluate_grid_2d(
        &a,
        &b,
        &c,
        &grid2,
        &eval,
        SubsetFilter::All,
        &tags,
        Some(&cache),
    )
    .unwrap();
    assert_eq!(eval.calls.swap(0, Ordering::SeqCst), uncached_calls);
    let again1 = evaluate_grid_1d(
        &a,
        &b,
        &grid1,
        &eval,
        SubsetFilter::All,
        &tags,
        Some(&cache),
    )
    .unwrap();
    let again2 = evaluate_grid_2d(
        &a,
        &b,
        &c,
        &grid2,
        &eval,
        SubsetFilter::All,
        &tags,
        Some(&cache),
    )
    .unwrap();
    assert_eq!(eval.calls.load(Ordering::SeqCst), 0);

    for r in [&first1, &again1] {
        assert_eq!(r, &plain1);
    }
    for r in [&first2, &again2] {
        assert_eq!(r, &plain2);
    }

    // A different filter is a different key.
    evaluate_grid_1d(
        &a,
        &b,
        &grid1,
        &eval,
        SubsetFilter::Encoder,
        &tags,
        Some(&cache),
    )
    .unwrap();
    assert_eq!(eval.calls.load(Ordering::SeqCst), 33 * 2);
}

#[test]
fn corrupted_entries_are_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ResultCache::open(dir.path()).unwrap();
    let (a, b) = (ps([0.1, 0.2, 0.3]), ps([1.0, -1.0, 0.5]));
    let grid = [0.0, 0.5, 1.0];
    let tags = RecordTags::new(0, "src", "tgt", "unit");
    let eval = Counting {
        calls: AtomicUsize::new(0),
    };
    let first =
        evaluate_grid_1d(&a, &b, &grid, &eval, SubsetFilter::All, &tags, Some(&cache)).unwrap();
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        std::fs::write(entry.unwrap().path(), b"{not json").unwrap();
    }
    eval.calls.store(0, Ordering::SeqCst);
    let second =
        evaluate_grid_1d(&a, &b, &grid, &eval, SubsetFilter::All, &tags, Some(&cache)).unwrap();
    assert_eq!(eval.calls.load(Ordering::SeqCst), 6);
    assert_eq!(first, second);
}
