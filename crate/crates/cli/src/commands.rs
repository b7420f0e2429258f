//! Subcommand implementations.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use nested_krig::aggregators::aggregate_variance_based;
use nested_krig::diagnostics::Diagnostics;
use nested_krig::experiments::{
    run_consistency, run_nonconsistency, ConsistencyConfig, DeltaSchedule, ExperimentReport,
    NonConsistencyConfig,
};
use nested_krig::gp::FullModel;
use nested_krig::kernels::{KernelFamily, KernelSpec, Lengthscale, PointSet};
use nested_krig::nested;
use nested_krig::process::AggregatedProcessModel;
use nested_krig::submodels::{make_partition, Partition, PartitionStrategy, SubmodelBank};

use crate::args::{
    CommonArgs, ConsistencyArgs, DemoArgs, FamilyArg, NonconsistencyArgs, PredictArgs, ReportArgs,
    SampleArgs, StrategyArg,
};
use crate::config::{build_grid, GridAxis, MethodName, RunConfig};
use crate::dataset::load_dataset;
use crate::errors::CliError;
use crate::output::{fmt, CsvFile};

const DEFAULT_GRID_COUNT: usize = 101;

impl FamilyArg {
    fn into_family(self) -> KernelFamily {
        match self {
            FamilyArg::SquaredExponential => KernelFamily::SquaredExponential,
            FamilyArg::Matern12 => KernelFamily::Matern12,
            FamilyArg::Matern32 => KernelFamily::Matern32,
            FamilyArg::Matern52 => KernelFamily::Matern52,
        }
    }
}

impl StrategyArg {
    fn into_strategy(self) -> PartitionStrategy {
        match self {
            StrategyArg::Contiguous => PartitionStrategy::ContiguousBlocks,
            StrategyArg::Random => PartitionStrategy::RandomBalanced,
            StrategyArg::NearestCenters => PartitionStrategy::NearestCenters,
        }
    }
}

/// Everything a data-driven subcommand needs, after merging the config file
/// with the flags (flags win).
struct Resolution {
    bank: SubmodelBank,
    method: MethodName,
    grid: PointSet,
    out: PathBuf,
    seed: u64,
}

fn resolve(
    common: &CommonArgs,
    method: Option<MethodName>,
    out: &Option<PathBuf>,
) -> Result<Resolution, CliError> {
    let config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };

    // dataset
    let (x, y) = match (&common.data, &config.data) {
        (Some(path), _) => load_dataset(&path.to_string_lossy())?,
        (None, Some(data)) => match (&data.path, &data.synthetic) {
            (Some(path), None) => load_dataset(path)?,
            (None, Some(synthetic)) => synthetic.generate()?,
            _ => {
                return Err(CliError::validation(
                    "config data must set exactly one of 'path' or 'synthetic'".into(),
                ))
            }
        },
        (None, None) => {
            return Err(CliError::validation(
                "no dataset: pass --data or a config with a data section".into(),
            ))
        }
    };
    let n = x.len();
    let d = x.dim();

    // kernel record, field by field
    let base = config.kernel.clone();
    if let Some(base) = &base {
        if base.dim != d {
            return Err(CliError::validation(format!(
                "config kernel has dim {}, dataset has dim {d}",
                base.dim
            )));
        }
    }
    let family = common
        .kernel
        .map(FamilyArg::into_family)
        .or(base.as_ref().map(|k| k.family))
        .unwrap_or(KernelFamily::Matern32);
    let variance = common
        .variance
        .or(base.as_ref().map(|k| k.variance))
        .unwrap_or(1.0);
    let lengthscale = match &common.lengthscale {
        Some(values) if values.len() == 1 => Lengthscale::Isotropic(values[0]),
        Some(values) => Lengthscale::PerDimension(values.clone()),
        None => base
            .as_ref()
            .map(|k| k.lengthscale.clone())
            .unwrap_or(Lengthscale::Isotropic(0.2)),
    };
    let spec = KernelSpec::new(family, variance, lengthscale, d)?;

    // partition
    let count = common
        .groups
        .or(config.partition.as_ref().map(|p| p.count))
        .unwrap_or_else(|| (n as f64).sqrt().ceil() as usize)
        .min(n)
        .max(1);
    let strategy = common
        .partition
        .map(StrategyArg::into_strategy)
        .or(config.partition.as_ref().map(|p| p.strategy))
        .unwrap_or(PartitionStrategy::ContiguousBlocks);
    let seed = common
        .seed
        .or(config.partition.as_ref().map(|p| p.seed))
        .unwrap_or(0);
    let partition = make_partition(n, count, strategy, seed, &x)?;

    let bank = SubmodelBank::fit(spec, x, y, partition)?;

    // evaluation grid: flags, then config, then the data bounding box
    let axes: Vec<GridAxis> = if !common.grid.is_empty() {
        common.grid.clone()
    } else if let Some(axes) = &config.grid {
        axes.clone()
    } else {
        bounding_axes(bank.design(), DEFAULT_GRID_COUNT)
    };
    if axes.len() != d {
        return Err(CliError::validation(format!(
            "{} grid axes for data of dimension {d}",
            axes.len()
        )));
    }
    let grid = build_grid(&axes)?;

    let method = method.or(config.method).unwrap_or(MethodName::Nested);
    let out = out
        .clone()
        .or(config.output.map(PathBuf::from))
        .ok_or_else(|| CliError::validation("no output path: pass --out".into()))?;

    Ok(Resolution {
        bank,
        method,
        grid,
        out,
        seed,
    })
}

fn bounding_axes(points: &PointSet, count: usize) -> Vec<GridAxis> {
    let d = points.dim();
    let mut axes = Vec::with_capacity(d);
    for axis in 0..d {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in points.iter_points() {
            lo = lo.min(p[axis]);
            hi = hi.max(p[axis]);
        }
        axes.push(GridAxis {
            min: lo,
            max: hi,
            count,
        });
    }
    axes
}

fn coordinate_headers(d: usize, prefix: &str) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

pub fn predict(args: &PredictArgs) -> Result<(), CliError> {
    let resolution = resolve(&args.common, args.method, &args.out)?;
    let bank = &resolution.bank;
    let d = bank.design().dim();
    let p = bank.group_count();

    let mut header: Vec<String> = coordinate_headers(d, "x");
    header.push("mean".into());
    let nested_method = resolution.method == MethodName::Nested;
    if nested_method {
        header.push("variance".into());
    }
    if args.verbose {
        for g in 1..=p {
            header.push(format!("sub{g}_mean"));
            header.push(format!("sub{g}_var"));
        }
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = CsvFile::create(&resolution.out, &header_refs)?;

    for point in resolution.grid.iter_points() {
        let mut row: Vec<String> = point.iter().map(|&v| fmt(v)).collect();
        match resolution.method.as_variance_method() {
            None => {
                let prediction = nested::predict(bank, point)?;
                row.push(fmt(prediction.mean));
                row.push(fmt(prediction.variance));
            }
            Some(method) => {
                let aggregate = aggregate_variance_based(bank, method, point)?;
                row.push(fmt(aggregate.mean));
            }
        }
        if args.verbose {
            let sub = bank.predict_submodels(point)?;
            for g in 0..p {
                row.push(fmt(sub.means[g]));
                row.push(fmt(sub.vars[g]));
            }
        }
        csv.row(&row)?;
    }
    csv.finish()
}

pub fn sample(args: &SampleArgs) -> Result<(), CliError> {
    let resolution = resolve(&args.common, None, &args.out)?;
    let model = AggregatedProcessModel::new(resolution.bank)?;
    let samples = if args.conditional {
        let fx = model.bank().observations().clone();
        model.sample_conditional(&resolution.grid, &fx, args.count, resolution.seed)?
    } else {
        model.sample_unconditional(&resolution.grid, args.count, resolution.seed)?
    };

    let d = resolution.grid.dim();
    let mut header = coordinate_headers(d, "x");
    for s in 1..=args.count {
        header.push(format!("sample_{s}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = CsvFile::create(&resolution.out, &header_refs)?;
    for (j, point) in resolution.grid.iter_points().enumerate() {
        let mut row: Vec<String> = point.iter().map(|&v| fmt(v)).collect();
        for s in 0..args.count {
            row.push(fmt(samples[(s, j)]));
        }
        csv.row(&row)?;
    }
    csv.finish()
}

/// The reference five-point setup: `f(x) = sin(2 pi x) + x` observed at
/// `(0.1, 0.3, 0.5, 0.7, 0.9)` under a unit squared-exponential kernel with
/// lengthscale 0.2, split 3 / 2.
fn reference_bank() -> Result<SubmodelBank, CliError> {
    let spec = KernelSpec::isotropic(KernelFamily::SquaredExponential, 1.0, 0.2, 1)?;
    let x = PointSet::one_d(&[0.1, 0.3, 0.5, 0.7, 0.9]);
    let y = DVector::from_iterator(
        5,
        x.iter_points()
            .map(|p| (2.0 * std::f64::consts::PI * p[0]).sin() + p[0]),
    );
    let partition = Partition::new(vec![vec![0, 1, 2], vec![3, 4]]);
    Ok(SubmodelBank::fit(spec, x, y, partition)?)
}

pub fn demo_figure1(args: &DemoArgs) -> Result<(), CliError> {
    let bank = reference_bank()?;
    let spec = bank.spec().clone();
    let fx = bank.observations().clone();
    let full = FullModel::fit(spec.clone(), bank.design().clone(), fx.clone())?;
    let diagnostics_bank = bank.clone();
    let diag = Diagnostics::new(&diagnostics_bank)?;
    let model = AggregatedProcessModel::new(bank)?;
    let grid = build_grid(&[GridAxis {
        min: 0.0,
        max: 1.0,
        count: args.grid_count,
    }])?;

    std::fs::create_dir_all(&args.out)?;

    // samples.csv: unconditional and conditional paths of the aggregated
    // process, one column per sample
    let uncond = model.sample_unconditional(&grid, args.samples, args.seed)?;
    let cond = model.sample_conditional(&grid, &fx, args.samples, args.seed + 1)?;
    let mut header = vec!["x".to_string()];
    for s in 1..=args.samples {
        header.push(format!("uncond_{s}"));
    }
    for s in 1..=args.samples {
        header.push(format!("cond_{s}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut samples_csv = CsvFile::create(&args.out.join("samples.csv"), &header_refs)?;
    for (j, point) in grid.iter_points().enumerate() {
        let mut row = vec![fmt(point[0])];
        for s in 0..args.samples {
            row.push(fmt(uncond[(s, j)]));
        }
        for s in 0..args.samples {
            row.push(fmt(cond[(s, j)]));
        }
        samples_csv.row(&row)?;
    }
    samples_csv.finish()?;

    // predictions.csv: aggregated and full conditional moments on the grid
    let mut pred_csv = CsvFile::create(
        &args.out.join("predictions.csv"),
        &["x", "mean", "variance", "full_mean", "full_variance"],
    )?;
    for point in grid.iter_points() {
        let aggregated = nested::predict(model.bank(), point)?;
        let exact = full.predict(point)?;
        pred_csv.row(&[
            fmt(point[0]),
            fmt(aggregated.mean),
            fmt(aggregated.variance),
            fmt(exact.mean),
            fmt(exact.variance),
        ])?;
    }
    pred_csv.finish()?;

    // bounds.csv: error gaps against the full model with their bounds
    write_bounds(&diag, &grid, &args.out.join("bounds.csv"))?;

    // kA_grid.csv / kA_minus_k.csv: pairwise modified covariance and its
    // difference from the original kernel
    let kagg = model.k_agg_matrix(&grid)?;
    let mut grid_csv = CsvFile::create(&args.out.join("kA_grid.csv"), &["x", "xprime", "k_agg"])?;
    let mut diff_csv = CsvFile::create(&args.out.join("kA_minus_k.csv"), &["x", "xprime", "diff"])?;
    for (i, a) in grid.iter_points().enumerate() {
        for (j, b) in grid.iter_points().enumerate() {
            let k = spec.eval(a, b)?;
            grid_csv.row(&[fmt(a[0]), fmt(b[0]), fmt(kagg[(i, j)])])?;
            diff_csv.row(&[fmt(a[0]), fmt(b[0]), fmt(kagg[(i, j)] - k)])?;
        }
    }
    grid_csv.finish()?;
    diff_csv.finish()
}

pub fn covariance_report(args: &ReportArgs) -> Result<(), CliError> {
    let resolution = resolve(&args.common, None, &args.out)?;
    let spec = resolution.bank.spec().clone();
    let model = AggregatedProcessModel::new(resolution.bank)?;
    let grid = &resolution.grid;
    let d = grid.dim();

    let mut header = coordinate_headers(d, "x");
    header.extend(coordinate_headers(d, "xprime"));
    header.extend(["k".to_string(), "k_agg".to_string(), "diff".to_string()]);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = CsvFile::create(&resolution.out, &header_refs)?;

    let kagg = model.k_agg_matrix(grid)?;
    for (i, a) in grid.iter_points().enumerate() {
        for (j, b) in grid.iter_points().enumerate() {
            let k = spec.eval(a, b)?;
            let mut row: Vec<String> = a.iter().chain(b).map(|&v| fmt(v)).collect();
            row.push(fmt(k));
            row.push(fmt(kagg[(i, j)]));
            row.push(fmt(kagg[(i, j)] - k));
            csv.row(&row)?;
        }
    }
    csv.finish()
}

pub fn bounds_report(args: &ReportArgs) -> Result<(), CliError> {
    let resolution = resolve(&args.common, None, &args.out)?;
    let diag = Diagnostics::new(&resolution.bank)?;
    write_bounds(&diag, &resolution.grid, &resolution.out)
}

fn write_bounds(diag: &Diagnostics, grid: &PointSet, path: &Path) -> Result<(), CliError> {
    let d = grid.dim();
    let mut header = coordinate_headers(d, "x");
    header.extend(["mean_gap", "mean_gap_bound", "var_gap", "var_gap_upper"].map(String::from));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = CsvFile::create(path, &header_refs)?;
    for point in grid.iter_points() {
        let report = diag.error_report(point)?;
        let mut row: Vec<String> = point.iter().map(|&v| fmt(v)).collect();
        row.push(fmt(report.mean_gap_rms));
        row.push(fmt(report.mean_gap_bound));
        row.push(fmt(report.var_gap));
        row.push(fmt(report.var_gap_upper));
        csv.row(&row)?;
    }
    csv.finish()
}

pub fn consistency(args: &ConsistencyArgs) -> Result<(), CliError> {
    let family = args
        .kernel
        .map(FamilyArg::into_family)
        .unwrap_or(KernelFamily::Matern32);
    let spec = KernelSpec::isotropic(family, args.variance, args.lengthscale, 1)?;
    let grid = build_grid(&[GridAxis {
        min: 0.0,
        max: 1.0,
        count: args.grid_count,
    }])?;
    let cfg = ConsistencyConfig {
        spec,
        domain_grid: grid,
        n_values: args.n.clone(),
        strategy: args
            .partition
            .map(StrategyArg::into_strategy)
            .unwrap_or(PartitionStrategy::RandomBalanced),
        seed: args.seed,
    };
    let report = run_consistency(&cfg)?;
    write_experiment_report(&report, &args.out)?;
    print_verdicts(&report);
    Ok(())
}

pub fn nonconsistency(args: &NonconsistencyArgs) -> Result<(), CliError> {
    let Some(method) = args.method.as_variance_method() else {
        return Err(CliError::validation(
            "the non-consistency experiment tests variance-based methods \
             (poe, gpoe, bcm, rbcm)"
                .into(),
        ));
    };
    let family = args
        .kernel
        .map(FamilyArg::into_family)
        .unwrap_or(KernelFamily::Matern32);
    let spec = KernelSpec::isotropic(family, args.variance, args.lengthscale, 1)?;
    let cfg = NonConsistencyConfig {
        spec,
        x0: vec![args.x0],
        xbar: vec![args.xbar],
        r: args.r,
        delta_schedule: DeltaSchedule {
            exponent: args.delta_exponent,
        },
        n_values: args.n.clone(),
        method,
    };
    let report = run_nonconsistency(&cfg)?;
    write_experiment_report(&report, &args.out)?;
    print_verdicts(&report);
    Ok(())
}

fn write_experiment_report(report: &ExperimentReport, out: &Path) -> Result<(), CliError> {
    let mut csv = CsvFile::create(
        out,
        &[
            "n",
            "p",
            "mse_method_at_x0",
            "mse_nested_at_x0",
            "mse_full_at_x0",
            "sup_mse_nested",
            "sup_mse_full",
            "sup_nn_bound",
            "note",
        ],
    )?;
    let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
    for r in &report.records {
        csv.row(&[
            r.n.to_string(),
            r.p.to_string(),
            opt(r.mse_method_at_x0),
            opt(r.mse_nested_at_x0),
            opt(r.mse_full_at_x0),
            opt(r.sup_mse_nested),
            opt(r.sup_mse_full),
            opt(r.sup_nn_bound),
            r.note.clone().unwrap_or_default(),
        ])?;
    }
    csv.finish()
}

fn print_verdicts(report: &ExperimentReport) {
    for v in &report.verdicts {
        println!(
            "verdict {}: {} - {}",
            v.name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
}
