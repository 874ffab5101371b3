use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;

use osrmon::detectors::{fit_bundle, FitConfig};
use osrmon::eval::{bench_throughput, evaluate};
use osrmon::io::{CsvRecordWriter, Header, RecordSource, RecordWriter};
use osrmon::simulate::{
    arrivals, default_monitor, expected_moment_curve, generate_synthetic_records, run_tracking_experiment,
    shifted_arrivals, track_values, write_moment_curve, write_tracking_csv, ArrivalConfig, SyntheticWorldConfig,
};
use osrmon::tracking::{
    write_tracking_row, DriftMonitor, DriftPolicy, Statistic, TrackMode, TrackerState, TrackingSession,
    TRACKING_CSV_HEADER,
};
use osrmon::{load_bundle, load_model_head, save_bundle, DetectorBundle, DetectorId, InferenceRecord};

use crate::{
    BenchArgs, ConvertArgs, EvalArgs, FitArgs, RecordFormat, ScoreArgs, SimulateCommand, TrackArgs, Usage, WorldArgs,
};

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open_records(path: &Path) -> Result<RecordSource<Box<dyn io::Read>>> {
    RecordSource::open(path).with_context(|| format!("cannot read records from {}", path.display()))
}

fn read_all(path: &Path) -> Result<(Header, Vec<InferenceRecord>)> {
    let source = open_records(path)?;
    let header = source.header();
    let records = source
        .collect::<osrmon::Result<Vec<_>>>()
        .with_context(|| format!("reading {}", path.display()))?;
    Ok((header, records))
}

fn open_bundle(path: &Path) -> Result<DetectorBundle> {
    load_bundle(path).with_context(|| format!("cannot load bundle {}", path.display()))
}

fn check_shape(header: &Header, bundle: &DetectorBundle) -> Result<()> {
    if header.num_classes != bundle.num_classes() || header.feature_dim != bundle.feature_dim() {
        return Err(osrmon::Error::Format(format!(
            "records have K={} D={}, bundle expects K={} D={}",
            header.num_classes,
            header.feature_dim,
            bundle.num_classes(),
            bundle.feature_dim()
        ))
        .into());
    }
    Ok(())
}

/// Requested detectors, or all those the bundle has thresholds for.
fn select(requested: Option<Vec<DetectorId>>, bundle: &DetectorBundle) -> Result<Vec<DetectorId>> {
    let detectors = requested.unwrap_or_else(|| bundle.detectors().collect());
    for &d in &detectors {
        if bundle.threshold(d).is_err() {
            return Err(Usage(format!("bundle has no threshold for detector `{d}`")).into());
        }
    }
    if detectors.is_empty() {
        bail!(Usage("no detectors selected".into()));
    }
    Ok(detectors)
}

pub fn fit(args: FitArgs) -> Result<()> {
    let (header, records) = read_all(&args.records)?;
    let head = args
        .head
        .as_deref()
        .map(|p| load_model_head(p).with_context(|| format!("cannot load model head {}", p.display())))
        .transpose()?;
    let calibration = args.calibration.as_deref().map(read_all).transpose()?;
    if let Some((cal_header, _)) = &calibration {
        if (cal_header.num_classes, cal_header.feature_dim) != (header.num_classes, header.feature_dim) {
            return Err(
                osrmon::Error::Format("calibration records differ in shape from the fit records".into()).into(),
            );
        }
    }
    let config = FitConfig {
        detectors: args.detectors.unwrap_or_else(|| DetectorId::ALL.to_vec()),
        tail_size: args.tail_size,
        revision_rank: args.revision_rank,
        epsilon: args.epsilon,
        n_clusters: args.clusters,
        retained_variance: args.retained_variance,
        target_fpr: args.target_fpr,
        seed: args.seed.seed,
        restarts: args.restarts,
    };
    let bundle = fit_bundle(
        &records,
        header.num_classes,
        header.feature_dim,
        head.as_ref(),
        calibration.as_ref().map(|(_, r)| r.as_slice()),
        &config,
    )?;
    save_bundle(&bundle, &args.out).with_context(|| format!("cannot write bundle {}", args.out.display()))?;
    info!(
        "fitted {} detectors on {} records",
        bundle.thresholds.len(),
        records.len()
    );
    Ok(())
}

pub fn score(args: ScoreArgs) -> Result<()> {
    let bundle = open_bundle(&args.bundle)?;
    let detectors = select(args.detectors, &bundle)?;
    let mut source = open_records(&args.records)?;
    check_shape(&source.header(), &bundle)?;
    if args.batch == 0 {
        bail!(Usage("--batch must be at least 1".into()));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "sample_id,detector,value,is_unknown")?;
    loop {
        let batch = source.by_ref().take(args.batch).collect::<osrmon::Result<Vec<_>>>()?;
        if batch.is_empty() {
            break;
        }
        let scored: Vec<Vec<osrmon::OsrScore>> = pool.install(|| {
            batch
                .par_iter()
                .map(|r| detectors.iter().map(|&d| bundle.score(d, r)).collect())
                .collect::<osrmon::Result<_>>()
        })?;
        for (record, scores) in batch.iter().zip(&scored) {
            for s in scores {
                writeln!(
                    out,
                    "{},{},{},{}",
                    record.sample_id,
                    s.detector,
                    s.value,
                    u8::from(s.is_unknown)
                )?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn track(args: TrackArgs) -> Result<()> {
    let mut bundle = open_bundle(&args.bundle)?;
    bundle.threshold(args.detector)?;
    let mut source = open_records(&args.records)?;
    check_shape(&source.header(), &bundle)?;
    let moments = match (&bundle.tracker, args.resume) {
        (Some(state), true) => {
            if state.detector != args.detector || state.mode != args.mode {
                bail!(Usage(format!(
                    "stored tracker follows {} in {} mode, not {} in {} mode",
                    state.detector, state.mode, args.detector, args.mode
                )));
            }
            state.moments
        }
        (None, true) => bail!(Usage("bundle holds no tracker state to resume".into())),
        (_, false) => Default::default(),
    };
    let monitor = match args.mode {
        TrackMode::Binary => {
            let policies = [Statistic::Mean, Statistic::Skew]
                .map(|statistic| DriftPolicy {
                    statistic,
                    z: args.z,
                    skew_fraction: args.skew_fraction,
                    n_min: args.min_samples,
                })
                .to_vec();
            osrmon::tracking::expected_moments(args.baseline_alpha)?;
            Some(DriftMonitor::new(args.baseline_alpha, policies))
        }
        TrackMode::Raw => {
            warn!("raw mode has no expected moments; drift policies are off");
            None
        }
    };
    let mut session = TrackingSession::resume(moments, args.stride, monitor);
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "{TRACKING_CSV_HEADER}")?;
    for record in source.by_ref() {
        let score = bundle.score(args.detector, &record?)?;
        let (row, alerts) = session.push(args.mode.sample(&score));
        for alert in alerts {
            eprintln!("{alert}");
        }
        if let Some(row) = row {
            write_tracking_row(&mut out, &row)?;
        }
    }
    let moments = *session.moments();
    if let Some(row) = session.finish() {
        write_tracking_row(&mut out, &row)?;
    }
    out.flush()?;
    if args.save_state {
        bundle.tracker = Some(TrackerState {
            detector: args.detector,
            mode: args.mode,
            moments,
        });
        save_bundle(&bundle, &args.bundle)?;
    }
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let bundle = open_bundle(&args.bundle)?;
    let detectors = select(args.detectors, &bundle)?;
    let (header, records) = read_all(&args.records)?;
    check_shape(&header, &bundle)?;
    let report = evaluate(
        &records,
        &bundle,
        &detectors,
        &args.fpr_caps,
        args.bench_ms.map(Duration::from_millis),
    )?;
    report.write_plot_csv(output(args.out.as_deref())?)?;
    Ok(())
}

pub fn bench(args: BenchArgs) -> Result<()> {
    let bundle = open_bundle(&args.bundle)?;
    let detectors = select(args.detectors, &bundle)?;
    let (header, records) = read_all(&args.records)?;
    check_shape(&header, &bundle)?;
    let mut out = output(args.out.as_deref())?;
    writeln!(
        out,
        "detector,scores_per_second,scored,elapsed_s,num_classes,feature_dim"
    )?;
    for det in detectors {
        let t = bench_throughput(det, &bundle, &records, Duration::from_millis(args.duration_ms))?;
        writeln!(
            out,
            "{},{:.1},{},{:.6},{},{}",
            t.detector,
            t.scores_per_second,
            t.scored,
            t.elapsed.as_secs_f64(),
            t.num_classes,
            t.feature_dim
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn simulate(command: SimulateCommand) -> Result<()> {
    match command {
        SimulateCommand::Arrivals(a) => {
            let stream = arrivals(ArrivalConfig {
                alpha: a.alpha,
                n: a.n,
                seed: a.seed.seed,
            })?;
            let mut out = output(a.out.as_deref())?;
            writeln!(out, "n,arrival")?;
            for (i, x) in stream.enumerate() {
                writeln!(out, "{},{x}", i + 1)?;
            }
            out.flush()?;
        }
        SimulateCommand::Moments(a) => {
            write_moment_curve(output(a.out.as_deref())?, &expected_moment_curve(&a.alphas)?)?;
        }
        SimulateCommand::Tracking(a) => {
            let config = ArrivalConfig {
                alpha: a.alpha,
                n: a.n,
                seed: a.seed.seed,
            };
            let rows = match (a.shift_alpha, a.shift_at) {
                (Some(after), Some(at)) => {
                    let stream = shifted_arrivals(config, at, after)?.map(f64::from);
                    track_values(stream, Some(default_monitor(a.alpha, a.warm_up)), a.stride)
                }
                (None, None) => run_tracking_experiment(config, a.warm_up, a.stride)?,
                _ => bail!(Usage("--shift-alpha and --shift-at go together".into())),
            };
            for alert in rows.iter().flat_map(|r| &r.alerts) {
                eprintln!("{alert}");
            }
            write_tracking_csv(output(a.out.as_deref())?, &rows)?;
        }
        SimulateCommand::World(a) => world(a)?,
    }
    Ok(())
}

fn world_config(a: &WorldArgs) -> SyntheticWorldConfig {
    SyntheticWorldConfig {
        num_known: a.known,
        num_unknown: a.unknown,
        feature_dim: a.dim,
        raw_dim: a.raw_dim,
        radius: a.radius,
        unknown_radius: a.unknown_radius,
        noise: a.noise,
        logit_scale: a.logit_scale,
        fit_per_class: a.fit_per_class,
        test_per_class: a.test_per_class,
        unknown_per_class: a.unknown_per_class,
        seed: a.seed.seed,
    }
}

fn write_record_file(path: &Path, format: RecordFormat, header: Header, records: &[InferenceRecord]) -> Result<()> {
    let sink = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    match format {
        RecordFormat::Osr => {
            let mut w = RecordWriter::new(sink, header)?;
            for r in records {
                w.write(r)?;
            }
            w.finish()?;
        }
        RecordFormat::Csv => {
            let mut w = CsvRecordWriter::new(sink, header)?;
            for r in records {
                w.write(r)?;
            }
            w.finish()?;
        }
    }
    Ok(())
}

fn world(a: WorldArgs) -> Result<()> {
    let config = world_config(&a);
    let world = generate_synthetic_records(&config, None)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("cannot create {}", a.out_dir.display()))?;
    let header = Header::new(
        config.num_known,
        config.feature_dim,
        (config.raw_dim > 0).then_some(config.raw_dim),
    )?;
    let ext = a.format.extension();
    write_record_file(&a.out_dir.join(format!("fit.{ext}")), a.format, header, &world.fit)?;
    write_record_file(&a.out_dir.join(format!("test.{ext}")), a.format, header, &world.test)?;
    fs::write(
        a.out_dir.join("head.toml"),
        osrmon::bundle::model_head_to_text(&world.head)?,
    )?;
    Ok(())
}

pub fn convert(args: ConvertArgs) -> Result<()> {
    let mut source = open_records(&args.input)?;
    let header = source.header();
    let sink =
        BufWriter::new(File::create(&args.output).with_context(|| format!("cannot create {}", args.output.display()))?);
    match args.to {
        RecordFormat::Osr => {
            let mut w = RecordWriter::new(sink, header)?;
            for r in source.by_ref() {
                w.write(&r?)?;
            }
            w.finish()?;
        }
        RecordFormat::Csv => {
            let mut w = CsvRecordWriter::new(sink, header)?;
            for r in source.by_ref() {
                w.write(&r?)?;
            }
            w.finish()?;
        }
    }
    Ok(())
}
