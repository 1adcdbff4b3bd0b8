use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde_json::json;
use xfer_surface::aggregate::{build_reports, normalize_by_reference, AggregateReport, Scope};
use xfer_surface::cache::ResultCache;
use xfer_surface::checkpoint::{content_hash, load_checkpoint, save_checkpoint};
use xfer_surface::grid::{
    build_grid_1d, build_grid_2d, evaluate_grid_1d, evaluate_plane, EvalSide, EvaluationRecord,
    GridKind, GridSpec, Plane, RecordTags,
};
use xfer_surface::interp::{compute_delta, direction_diagnostics, model_analogy};
use xfer_surface::report::{
    emit_heatmap, emit_line_plot, emit_records_csv, heatmap_from_report, line_plot_from_report,
    parse_records_csv,
};
use xfer_surface::tensor::meta_keys;
use xfer_surface::toy::{
    generate_task, run_transfer_experiment, Domain, ExperimentOptions, Split, ToyEvaluator,
    ToyTaskConfig, TASK_TAG,
};
use xfer_surface::{ParameterSet32, SubsetFilter};

use crate::{
    AggregateArgs, AnalogyArgs, Command, DiagArgs, DomainArg, EvalArgs, Interp1dArgs, Interp2dArgs,
    PlotArgs, PlotKind, ScopeArg, SideArg, SubsetArg, ToyRunArgs,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Interp1d(a) => interp1d(a),
        Command::Interp2d(a) => interp2d(a),
        Command::Diag(a) => diag(a),
        Command::Analogy(a) => analogy(a),
        Command::ToyRun(a) => toy_run(a),
        Command::Aggregate(a) => aggregate(a),
        Command::Plot(a) => plot(a),
    }
}

impl From<SubsetArg> for SubsetFilter {
    fn from(s: SubsetArg) -> Self {
        match s {
            SubsetArg::All => SubsetFilter::All,
            SubsetArg::Encoder => SubsetFilter::Encoder,
            SubsetArg::Head => SubsetFilter::Head,
        }
    }
}

impl From<ScopeArg> for Scope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::PerPair => Scope::PerPair,
            ScopeArg::PerTask => Scope::PerTask,
            ScopeArg::Pooled => Scope::Pooled,
        }
    }
}

impl From<SideArg> for EvalSide {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::Source => EvalSide::Source,
            SideArg::Target => EvalSide::Target,
        }
    }
}

fn load(path: &Path) -> Result<ParameterSet32> {
    load_checkpoint(path).with_context(|| format!("reading checkpoint {}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn grid_spec(arg: &str) -> Result<GridSpec> {
    let spec = if arg == "default" {
        GridSpec::default()
    } else {
        read_json(Path::new(arg))?
    };
    spec.validate()?;
    Ok(spec)
}

fn toy_config(arg: Option<&Path>) -> Result<ToyTaskConfig> {
    let cfg = match arg {
        None => ToyTaskConfig::default(),
        Some(p) if p.as_os_str() == "default" => ToyTaskConfig::default(),
        Some(p) => read_json(p)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

struct EvalSetup {
    evaluator: ToyEvaluator,
    tags: RecordTags,
    filter: SubsetFilter,
    cache: Option<ResultCache>,
    grid: GridSpec,
}

fn eval_setup(args: &EvalArgs, reference: &ParameterSet32) -> Result<EvalSetup> {
    let seed = match args.seed {
        Some(s) => s,
        None => match reference.meta().get(meta_keys::SEED) {
            Some(s) => s
                .parse()
                .with_context(|| format!("checkpoint seed `{s}` is not an integer"))?,
            None => {
                warn!("no --seed given and the checkpoint records none; using 0");
                0
            }
        },
    };
    let cfg = toy_config(Some(Path::new(&args.eval)))?.with_seed(seed);
    let task = generate_task(&cfg)?;
    let dev = |d| task.dataset(d, Split::Dev).clone();
    let forward = ToyEvaluator::new(dev(Domain::Src), dev(Domain::Tgt), &cfg);
    let (evaluator, src, tgt) = match args.source_domain {
        DomainArg::Src => (forward, "src", "tgt"),
        DomainArg::Tgt => (forward.swapped(), "tgt", "src"),
    };
    Ok(EvalSetup {
        evaluator,
        tags: RecordTags::new(seed, src, tgt, &args.task),
        filter: args.subset.into(),
        cache: args.cache.as_ref().map(ResultCache::open).transpose()?,
        grid: grid_spec(&args.grid)?,
    })
}

/// Fills `normalized` when the grid contains the reference point.
fn normalize_if_possible(records: Vec<EvaluationRecord>) -> Vec<EvaluationRecord> {
    match normalize_by_reference(&records) {
        Ok(n) => n,
        Err(e) => {
            warn!("leaving values unnormalized: {e}");
            records
        }
    }
}

fn interp1d(args: Interp1dArgs) -> Result<()> {
    let a = load(&args.a)?;
    let b = load(&args.b)?;
    let setup = eval_setup(&args.eval, &a)?;
    let grid = build_grid_1d(&setup.grid)?;
    let records = evaluate_grid_1d(
        &a,
        &b,
        &grid,
        &setup.evaluator,
        setup.filter,
        &setup.tags,
        setup.cache.as_ref(),
    )?;
    write(
        &args.out,
        emit_records_csv(&normalize_if_possible(records))?,
    )?;
    info!(
        "{} grid points written to {}",
        grid.len(),
        args.out.display()
    );
    Ok(())
}

fn interp2d(args: Interp2dArgs) -> Result<()> {
    let bi = load(&args.bi)?;
    let src = load(&args.src)?;
    let tgt = load(&args.tgt)?;
    let setup = eval_setup(&args.eval, &bi)?;
    let mut plane = Plane::new(&bi, &src, &tgt, setup.filter)?;
    let mut endpoints = vec![content_hash(&bi), content_hash(&src), content_hash(&tgt)];
    if args.normalize_directions {
        plane = plane.filter_normalized()?;
        endpoints.push("filter-normalized".into());
    }
    let grid = build_grid_2d(&setup.grid)?;
    let records = evaluate_plane(
        &plane,
        &grid,
        &setup.evaluator,
        setup.filter,
        &setup.tags,
        setup.cache.as_ref(),
        &endpoints,
    )?;
    write(
        &args.out,
        emit_records_csv(&normalize_if_possible(records))?,
    )?;
    info!(
        "{} grid points written to {}",
        grid.len(),
        args.out.display()
    );
    Ok(())
}

fn diag(args: DiagArgs) -> Result<()> {
    let src = load(&args.src)?;
    let tgt = load(&args.tgt)?;
    let bi = load(&args.bi)?;
    let d_src = compute_delta(&src, &bi, SubsetFilter::All)?;
    let d_tgt = compute_delta(&tgt, &bi, SubsetFilter::All)?;
    let filters = match args.subset {
        Some(s) => vec![SubsetFilter::from(s)],
        None => vec![SubsetFilter::All, SubsetFilter::Encoder],
    };
    let mut out = BTreeMap::new();
    for f in filters {
        let d = direction_diagnostics(&d_src, &d_tgt, f)?;
        out.insert(
            f.as_str(),
            json!({
                "norm_src": d.norm_a,
                "norm_tgt": d.norm_b,
                "norm_ratio": d.norm_ratio,
                "angle_deg": d.angle_deg,
            }),
        );
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn analogy(args: AnalogyArgs) -> Result<()> {
    let a = load(&args.a)?;
    let b = load(&args.b)?;
    let c = load(&args.c)?;
    let out = model_analogy(&c, &b, &a)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_checkpoint(&out, &args.out)?;
    Ok(())
}

fn aggregates_json(reports: &[AggregateReport]) -> Result<String> {
    let mut text = serde_json::to_string_pretty(reports)?;
    text.push('\n');
    Ok(text)
}

fn toy_run(args: ToyRunArgs) -> Result<()> {
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let cfg = toy_config(args.config.as_deref())?;
    let opts = ExperimentOptions {
        grid: grid_spec(&args.grid)?,
        filter: args.subset.into(),
        checkpoint_dir: Some(args.out.clone()),
        cache_dir: args.cache.clone(),
        include_2d: true,
    };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    info!("training {} seeds from seed {}", args.seeds, cfg.seed);
    let output = run_transfer_experiment(&cfg, args.seeds, &opts)?;
    write(
        &args.out.join("records.csv"),
        emit_records_csv(&output.records)?,
    )?;

    let reports = build_reports(&output.records, Scope::PerPair)?;
    write(
        &args.out.join("aggregates.json"),
        aggregates_json(&reports)?,
    )?;

    let one_d = find_report(&reports, GridKind::OneD)?;
    write(
        &args.out.join("fig-1d.svg"),
        emit_line_plot(&line_plot_from_report(one_d)?)?,
    )?;
    let two_d = find_report(&reports, GridKind::TwoD)?;
    let group = format!("src-tgt/{TASK_TAG}");
    for (side, name) in [
        (EvalSide::Source, "fig-2d-source.svg"),
        (EvalSide::Target, "fig-2d-target.svg"),
    ] {
        let map = heatmap_from_report(two_d, side, Some(&group))?;
        write(&args.out.join(name), emit_heatmap(&map)?)?;
    }
    info!("wrote {}", args.out.display());
    Ok(())
}

fn find_report(reports: &[AggregateReport], kind: GridKind) -> Result<&AggregateReport> {
    match reports.iter().find(|r| r.kind == kind) {
        Some(r) => Ok(r),
        None => bail!("no {kind} aggregates in input"),
    }
}

fn aggregate(args: AggregateArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let records =
        parse_records_csv(&text).with_context(|| format!("parsing {}", args.input.display()))?;
    let reports = build_reports(&records, args.scope.into())?;
    write(&args.out, aggregates_json(&reports)?)
}

fn plot(args: PlotArgs) -> Result<()> {
    let reports: Vec<AggregateReport> = read_json(&args.input)?;
    let svg = match args.kind {
        PlotKind::Line => emit_line_plot(&line_plot_from_report(find_report(
            &reports,
            GridKind::OneD,
        )?)?)?,
        PlotKind::Heatmap => {
            let report = find_report(&reports, GridKind::TwoD)?;
            emit_heatmap(&heatmap_from_report(
                report,
                args.side.into(),
                args.group.as_deref(),
            )?)?
        }
    };
    write(&args.out, svg)
}
