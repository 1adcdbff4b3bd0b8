use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;

use super::config::ToyTaskConfig;
use super::data::{generate_task, Domain, Split};
use super::model::init_autoencoder;
use super::train::{finetune, pretrain_autoencoder, ToyEvaluator, TrainingRole};
use crate::aggregate::{flatness_score, normalize_by_reference, Surface};
use crate::cache::ResultCache;
use crate::checkpoint::{content_hash, save_checkpoint};
use crate::error::Result;
use crate::grid::{
    build_grid_1d, build_grid_2d, evaluate_grid_1d, evaluate_grid_2d, EvalSide, EvaluationRecord,
    GridKind, GridSpec, RecordTags,
};
use crate::tensor::{ParameterSet, SubsetFilter};

pub const TASK_TAG: &str = "toy";
pub const INIT_META: &str = "init";

#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    pub grid: GridSpec,
    pub filter: SubsetFilter,
    /// When set, checkpoints go to `<dir>/seed-<k>/{src,tgt,bi}.lscp`.
    pub checkpoint_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub include_2d: bool,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            filter: SubsetFilter::All,
            checkpoint_dir: None,
            cache_dir: None,
            include_2d: true,
        }
    }
}

/// Checkpoints and raw records of one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub src: ParameterSet<f32>,
    pub tgt: ParameterSet<f32>,
    pub bi: ParameterSet<f32>,
    pub records: Vec<EvaluationRecord>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub runs: Vec<SeedRun>,
    /// Every record of every seed, normalized and in output order.
    pub records: Vec<EvaluationRecord>,
}

impl ExperimentOutput {
    /// Normalized records of one grid kind and path.
    ///
    /// The source-to-bilingual path is tagged `src-tgt`; the
    /// target-to-bilingual path carries the swapped tag `tgt-src`.
    pub fn path_records(&self, kind: GridKind, src_lang: &str) -> Vec<EvaluationRecord> {
        self.records
            .iter()
            .filter(|r| r.kind == kind && r.src_lang == src_lang)
            .cloned()
            .collect()
    }
}

/// Trains the three checkpoints of one seed and sweeps the grids.
pub fn run_seed(cfg: &ToyTaskConfig, opts: &ExperimentOptions) -> Result<SeedRun> {
    let task = generate_task(cfg)?;
    let ds = |d, s| task.dataset(d, s);
    let init = init_autoencoder::<f32>(cfg);
    let pretrained = pretrain_autoencoder(
        &init,
        &[
            ds(Domain::Src, Split::Unlabeled),
            ds(Domain::Tgt, Split::Unlabeled),
        ],
        cfg,
    )?;
    let init_hash = content_hash(&pretrained);

    let roles = [
        (TrainingRole::Src, vec![ds(Domain::Src, Split::Train)]),
        (TrainingRole::Tgt, vec![ds(Domain::Tgt, Split::Train)]),
        (
            TrainingRole::Bilingual,
            vec![ds(Domain::Src, Split::Train), ds(Domain::Tgt, Split::Train)],
        ),
    ];
    let mut models = Vec::with_capacity(3);
    for (role, data) in &roles {
        assert_eq!(
            content_hash(&pretrained),
            init_hash,
            "fine-tuning must share one start point"
        );
        let mut model = finetune(&pretrained, data, *role, cfg)?;
        model.set_meta(INIT_META, init_hash.clone());
        models.push(model);
    }
    let bi = models.pop().expect("three roles");
    let tgt = models.pop().expect("three roles");
    let src = models.pop().expect("three roles");

    if let Some(dir) = &opts.checkpoint_dir {
        let seed_dir = dir.join(format!("seed-{}", cfg.seed));
        fs::create_dir_all(&seed_dir)?;
        save_checkpoint(&src, seed_dir.join("src.lscp"))?;
        save_checkpoint(&tgt, seed_dir.join("tgt.lscp"))?;
        save_checkpoint(&bi, seed_dir.join("bi.lscp"))?;
    }

    let cache = opts.cache_dir.as_ref().map(ResultCache::open).transpose()?;
    let evaluator = ToyEvaluator::new(
        ds(Domain::Src, Split::Dev).clone(),
        ds(Domain::Tgt, Split::Dev).clone(),
        cfg,
    );
    let swapped = evaluator.swapped();
    let forward_tags = RecordTags::new(cfg.seed, "src", "tgt", TASK_TAG);
    let swapped_tags = RecordTags::new(cfg.seed, "tgt", "src", TASK_TAG);

    let grid_1d = build_grid_1d(&opts.grid)?;
    let mut records = evaluate_grid_1d(
        &src,
        &bi,
        &grid_1d,
        &evaluator,
        opts.filter,
        &forward_tags,
        cache.as_ref(),
    )?;
    records.extend(evaluate_grid_1d(
        &tgt,
        &bi,
        &grid_1d,
        &swapped,
        opts.filter,
        &swapped_tags,
        cache.as_ref(),
    )?);
    if opts.include_2d {
        let grid_2d = build_grid_2d(&opts.grid)?;
        records.extend(evaluate_grid_2d(
            &bi,
            &src,
            &tgt,
            &grid_2d,
            &evaluator,
            opts.filter,
            &forward_tags,
            cache.as_ref(),
        )?);
    }
    records.sort_by(EvaluationRecord::output_cmp);
    Ok(SeedRun {
        seed: cfg.seed,
        src,
        tgt,
        bi,
        records,
    })
}

/// Runs seeds `cfg.seed .. cfg.seed + n_seeds`, in parallel, then normalizes.
pub fn run_transfer_experiment(
    cfg: &ToyTaskConfig,
    n_seeds: usize,
    opts: &ExperimentOptions,
) -> Result<ExperimentOutput> {
    cfg.validate()?;
    if n_seeds == 0 {
        return Err(crate::Error::invalid("need at least one seed"));
    }
    let runs: Vec<SeedRun> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|k| run_seed(&cfg.with_seed(cfg.seed + k), opts))
        .collect::<Result<_>>()?;
    let mut records: Vec<EvaluationRecord> = runs
        .iter()
        .flat_map(|r| r.records.iter().cloned())
        .collect();
    records.sort_by(EvaluationRecord::output_cmp);
    let records = normalize_by_reference(&records)?;
    Ok(ExperimentOutput { runs, records })
}

/// Per-seed flatness of the full normalized target surface for a small and a
/// large encoder.
#[derive(Debug, Clone)]
pub struct FlatnessComparison {
    pub small: Vec<f64>,
    pub large: Vec<f64>,
}

/// Exploratory contrast of target-surface flatness between encoder sizes
/// (hidden 16 with 10 pretraining epochs vs hidden 64 with 40).
pub fn compare_encoder_flatness(
    base: &ToyTaskConfig,
    n_seeds: usize,
) -> Result<FlatnessComparison> {
    let score = |cfg: ToyTaskConfig| -> Result<Vec<f64>> {
        let out = run_transfer_experiment(&cfg, n_seeds, &ExperimentOptions::default())?;
        let two_d = out.path_records(GridKind::TwoD, "src");
        out.runs
            .iter()
            .map(|run| {
                let seed_recs: Vec<_> = two_d
                    .iter()
                    .filter(|r| r.seed == run.seed)
                    .cloned()
                    .collect();
                let surface = target_surface(&seed_recs)?;
                Ok(flatness_score(&surface))
            })
            .collect()
    };
    Ok(FlatnessComparison {
        small: score(ToyTaskConfig {
            hidden_dim: 16,
            pretrain_epochs: 10,
            ..base.clone()
        })?,
        large: score(ToyTaskConfig {
            hidden_dim: 64,
            pretrain_epochs: 40,
            ..base.clone()
        })?,
    })
}

/// Normalized target-side surface of one seed's 2D records.
pub fn target_surface(records: &[EvaluationRecord]) -> Result<Surface> {
    let points = crate::aggregate::aggregate_records(records, crate::aggregate::Scope::PerPair)?;
    let group = points.first().map(|p| p.group.clone()).unwrap_or_default();
    Surface::from_aggregates(&points, EvalSide::Target, &group)
}
