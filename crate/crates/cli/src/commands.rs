//! Subcommand implementations. Each command resolves its settings
//! (defaults ← config file ← flags), runs, and writes a snapshot of the
//! resolved settings next to its primary output.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use denl_core::baseline::{self, CalibrationMap};
use denl_core::dataset::{self, DatasetConfig, Manifest};
use denl_core::experiments::{self, glass_phantom, NetPipeline, Pipeline, SystemDistortion};
use denl_core::metrics;
use denl_core::net::{self, NetConfig, Network, OutputActivation, TrainOptions};
use denl_core::sigmodel::{synthesize_signal, Grid, ObjectSpec, Order, RawSignal};
use denl_core::stack::{build_stack, CoeffLadder};
use denl_core::{BScan, SampleRng};

use crate::config::{file_table, resolve, write_snapshot};
use crate::plot::{emit_plot, PlotKind};
use crate::*;

const DEFAULT_SIGMA: f64 = 0.15;

fn settings<S, F>(cfg: Option<&Path>, command: &str, defaults: S, flags: &F) -> Result<S, CliError>
where
    S: Serialize + for<'de> Deserialize<'de>,
    F: Serialize,
{
    resolve(&defaults, file_table(cfg, command)?, flags)
}

fn required<'a>(p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path, CliError> {
    p.as_deref().ok_or_else(|| CliError::Usage(format!("--{} is required", name.replace('_', "-"))))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn read_signal(path: &Path, sigma: f64) -> Result<RawSignal, CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(RawSignal::read_csv(BufReader::new(file), sigma)?)
}

fn write_column(path: &Path, values: &[f64]) -> Result<(), CliError> {
    let mut out = create(path)?;
    for v in values {
        writeln!(out, "{v:?}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Metadata stored next to a weights file: everything needed to turn a raw
/// signal into the network's input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelCard {
    pub net: NetConfig,
    pub order: Order,
    pub ladder: CoeffLadder,
    pub envelope_sigma: f64,
}

pub fn model_card_path(weights: &Path) -> PathBuf {
    with_suffix(weights, ".json")
}

fn load_model(weights: &Path) -> Result<(Network<f32>, ModelCard), CliError> {
    let net = net::load_weights(weights)?;
    let card_path = model_card_path(weights);
    let text = std::fs::read_to_string(&card_path).map_err(io_err(&card_path))?;
    let card: ModelCard = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", card_path.display())))?;
    if card.net != net.config {
        return Err(CliError::Data(format!("{} does not describe {}", card_path.display(), weights.display())));
    }
    Ok((net, card))
}

// simulate

#[derive(Serialize, Deserialize)]
struct Simulate {
    object: Option<PathBuf>,
    n_samples: usize,
    sigma: f64,
    noise: f64,
    seed: u64,
    out: Option<PathBuf>,
}

pub fn simulate(cfg: Option<&Path>, flags: &SimulateArgs) -> Result<(), CliError> {
    let s: Simulate = settings(
        cfg,
        "simulate",
        Simulate {
            object: None,
            n_samples: 1024,
            sigma: DEFAULT_SIGMA,
            noise: 0.0,
            seed: 0,
            out: None,
        },
        flags,
    )?;
    let object_path = required(&s.object, "object")?;
    let out = required(&s.out, "out")?;
    let object = ObjectSpec::from_json_path(object_path)?;
    let grid = Grid::new(s.n_samples, s.sigma)?;
    let mut signal = synthesize_signal(&object, &grid)?;
    if s.noise > 0.0 {
        signal.add_noise(s.noise, &mut SampleRng::from_seed(s.seed));
    }
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    write_column(&out.join("signal.csv"), &signal.samples)?;
    write_column(&out.join("amplitude.csv"), &signal.amplitude())?;
    write_snapshot(&out.join("simulate"), "simulate", &s)
}

// stack

#[derive(Serialize, Deserialize)]
struct StackSettings {
    signal: Option<PathBuf>,
    order: Order,
    max: f64,
    rows: usize,
    sigma: f64,
    out: Option<PathBuf>,
    pgm: Option<PathBuf>,
}

pub fn stack(cfg: Option<&Path>, flags: &StackArgs) -> Result<(), CliError> {
    let s: StackSettings = settings(
        cfg,
        "stack",
        StackSettings {
            signal: None,
            order: Order::Second,
            max: 60.0,
            rows: denl_core::stack::DEFAULT_ROWS,
            sigma: DEFAULT_SIGMA,
            out: None,
            pgm: None,
        },
        flags,
    )?;
    let out = required(&s.out, "out")?;
    let signal = read_signal(required(&s.signal, "signal")?, s.sigma)?;
    let ladder = CoeffLadder::symmetric(s.order, s.max, s.rows)?;
    let stack = build_stack(&signal, &ladder)?;
    let mut w = create(out)?;
    stack.write_csv(&mut w)?;
    w.flush().map_err(io_err(out))?;
    if let Some(pgm) = &s.pgm {
        let image = BScan {
            lines: stack.n_rows,
            n_samples: stack.n_cols,
            data: stack.rows.clone(),
        };
        let mut w = create(pgm)?;
        image.write_pgm(&mut w)?;
        w.flush().map_err(io_err(pgm))?;
    }
    write_snapshot(out, "stack", &s)
}

// gen-dataset

#[derive(Serialize, Deserialize)]
struct GenDataset {
    order: Order,
    count: usize,
    seed: u64,
    preset: String,
    n_samples: Option<usize>,
    rows: Option<usize>,
    a2_bound: Option<f64>,
    a3_bound: Option<f64>,
    out: Option<PathBuf>,
}

fn dataset_config(s: &GenDataset) -> Result<DatasetConfig, CliError> {
    let base = match s.preset.as_str() {
        "toy" => DatasetConfig::toy(s.order, s.count, s.seed),
        "full" => DatasetConfig::full(s.order, s.count, s.seed),
        other => return Err(CliError::Usage(format!("unknown preset `{other}` (toy, full)"))),
    };
    let grid = Grid::new(s.n_samples.unwrap_or(base.grid.n_samples), base.grid.envelope_sigma)?;
    Ok(DatasetConfig::with_geometry(
        s.order,
        s.count,
        s.seed,
        grid,
        s.rows.unwrap_or(base.ladder.len()),
        s.a2_bound.unwrap_or(base.a2_bound),
        s.a3_bound.unwrap_or(base.a3_bound),
    ))
}

pub fn gen_dataset(cfg: Option<&Path>, flags: &GenDatasetArgs) -> Result<(), CliError> {
    let s: GenDataset = settings(
        cfg,
        "gen-dataset",
        GenDataset {
            order: Order::Second,
            count: 2000,
            seed: 0,
            preset: "toy".into(),
            n_samples: None,
            rows: None,
            a2_bound: None,
            a3_bound: None,
            out: None,
        },
        flags,
    )?;
    let out = required(&s.out, "out")?;
    let dcfg = dataset_config(&s)?;
    let start = Instant::now();
    let header = dataset::generate(&dcfg, out)?;
    log::info!("wrote {} samples to {} in {:.1?}", header.count, out.display(), start.elapsed());
    write_snapshot(out, "gen-dataset", &s)
}

// train

#[derive(Serialize, Deserialize)]
struct Train {
    train: Option<PathBuf>,
    val: Option<PathBuf>,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    warmup_steps: usize,
    seed: u64,
    levels: usize,
    /// Defaults to 8 for grids up to 256 samples, otherwise 16.
    base_channels: Option<usize>,
    activation: OutputActivation,
    out: Option<PathBuf>,
    deterministic: bool,
}

fn envelope_sigma_of(path: &Path) -> f64 {
    std::fs::read_to_string(dataset::manifest_path(path))
        .ok()
        .and_then(|t| serde_json::from_str::<Manifest>(&t).ok())
        .map(|m| m.envelope_sigma)
        .unwrap_or(DEFAULT_SIGMA)
}

pub fn train(cfg: Option<&Path>, flags: &TrainArgs) -> Result<(), CliError> {
    let defaults = TrainOptions::new(Order::Second);
    let s: Train = settings(
        cfg,
        "train",
        Train {
            train: None,
            val: None,
            epochs: defaults.epochs,
            batch_size: defaults.batch_size,
            lr: defaults.lr,
            warmup_steps: defaults.warmup_steps,
            seed: 0,
            levels: 3,
            base_channels: None,
            activation: OutputActivation::Sigmoid,
            out: None,
            deterministic: false,
        },
        flags,
    )?;
    let out = required(&s.out, "out")?;
    if s.deterministic {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot pin thread pool: {e}")))?;
    }
    let train_path = required(&s.train, "train")?;
    let val_path = required(&s.val, "val")?;
    let (th, train_set) = dataset::load_all(train_path)?;
    let (vh, val_set) = dataset::load_all(val_path)?;
    if th.order != vh.order || th.rows != vh.rows || th.n_samples != vh.n_samples || th.ladder != vh.ladder {
        return Err(CliError::Data("training and validation sets differ in order or geometry".into()));
    }
    let net_cfg = NetConfig {
        levels: s.levels,
        base_channels: s.base_channels.unwrap_or(if th.n_samples <= 256 { 8 } else { 16 }),
        rows: th.rows,
        width: th.n_samples,
        output_activation: s.activation,
    };
    let net = Network::<f32>::new(net_cfg, None, s.seed)?;
    let opts = TrainOptions {
        epochs: s.epochs,
        batch_size: s.batch_size,
        lr: s.lr,
        warmup_steps: s.warmup_steps,
        seed: s.seed,
        ..TrainOptions::new(th.order)
    };
    let start = Instant::now();
    let (net, report) = net::train(net, &train_set, &val_set, &opts)?;
    log::info!("trained {} epochs in {:.1?}", report.rows.len(), start.elapsed());
    if let Some(best) = report.best_row() {
        log::info!("best epoch {}: val MAE {:.5}, GoF {:?}", best.epoch, best.val_mae, best.val_gof);
    }
    net::save_weights(&net, out)?;
    let card = ModelCard {
        net: net.config,
        order: th.order,
        ladder: th.coeff_ladder(),
        envelope_sigma: envelope_sigma_of(train_path),
    };
    write_json(&model_card_path(out), &card)?;
    write_json(&with_suffix(out, ".report.json"), &report)?;
    write_snapshot(out, "train", &s)
}

// infer

#[derive(Serialize, Deserialize)]
struct Infer {
    weights: Option<PathBuf>,
    signal: Option<PathBuf>,
    out: Option<PathBuf>,
}

pub fn infer(cfg: Option<&Path>, flags: &InferArgs) -> Result<(), CliError> {
    let s: Infer = settings(cfg, "infer", Infer { weights: None, signal: None, out: None }, flags)?;
    let out = required(&s.out, "out")?;
    let (net, card) = load_model(required(&s.weights, "weights")?)?;
    let signal = read_signal(required(&s.signal, "signal")?, card.envelope_sigma)?;
    if signal.len() != card.net.width {
        return Err(CliError::Data(format!("signal has {} samples, network expects {}", signal.len(), card.net.width)));
    }
    let pipeline = Pipeline::Network(NetPipeline {
        net: &net,
        ladder: &card.ladder,
    });
    let lines = pipeline.process(std::slice::from_ref(&signal))?;
    write_column(out, &lines[0])?;
    write_snapshot(out, "infer", &s)
}

// eval

#[derive(Serialize, Deserialize)]
struct Eval {
    weights: Option<PathBuf>,
    dataset: Option<PathBuf>,
    threshold: f64,
    out: Option<PathBuf>,
    allow_order_mismatch: bool,
}

pub fn eval(cfg: Option<&Path>, flags: &EvalArgs) -> Result<(), CliError> {
    let s: Eval = settings(
        cfg,
        "eval",
        Eval {
            weights: None,
            dataset: None,
            threshold: 0.001,
            out: None,
            allow_order_mismatch: false,
        },
        flags,
    )?;
    let out = required(&s.out, "out")?;
    let net = net::load_weights(required(&s.weights, "weights")?)?;
    let (header, samples) = dataset::load_all(required(&s.dataset, "dataset")?)?;
    if header.rows != net.config.rows || header.n_samples != net.config.width {
        return Err(CliError::Data(format!(
            "dataset stacks are {}x{}, network expects {}x{}",
            header.rows, header.n_samples, net.config.rows, net.config.width
        )));
    }
    let reports = metrics::evaluate(&net, &samples, header.order, &[s.threshold], s.allow_order_mismatch)?;
    let report = &reports[0];
    let csv_path = with_suffix(out, ".csv");
    let mut w = create(&csv_path)?;
    report.write_csv(&mut w)?;
    w.flush().map_err(io_err(&csv_path))?;
    write_json(&with_suffix(out, ".json"), report)?;
    print!("{}", report.table());
    write_snapshot(out, "eval", &s)
}

// calibrate / linearize

#[derive(Serialize, Deserialize)]
struct Calibrate {
    mirror1: Option<PathBuf>,
    mirror2: Option<PathBuf>,
    sigma: f64,
    out: Option<PathBuf>,
}

pub fn calibrate(cfg: Option<&Path>, flags: &CalibrateArgs) -> Result<(), CliError> {
    let s: Calibrate = settings(
        cfg,
        "calibrate",
        Calibrate {
            mirror1: None,
            mirror2: None,
            sigma: DEFAULT_SIGMA,
            out: None,
        },
        flags,
    )?;
    let out = required(&s.out, "out")?;
    let m1 = read_signal(required(&s.mirror1, "mirror1")?, s.sigma)?;
    let m2 = read_signal(required(&s.mirror2, "mirror2")?, s.sigma)?;
    let map = baseline::calibrate(&m1, &m2)?;
    map.to_json_path(out)?;
    write_snapshot(out, "calibrate", &s)
}

#[derive(Serialize, Deserialize)]
struct Linearize {
    signal: Option<PathBuf>,
    calib: Option<PathBuf>,
    sigma: f64,
    out: Option<PathBuf>,
}

pub fn linearize(cfg: Option<&Path>, flags: &LinearizeArgs) -> Result<(), CliError> {
    let s: Linearize = settings(
        cfg,
        "linearize",
        Linearize {
            signal: None,
            calib: None,
            sigma: DEFAULT_SIGMA,
            out: None,
        },
        flags,
    )?;
    let out = required(&s.out, "out")?;
    let signal = read_signal(required(&s.signal, "signal")?, s.sigma)?;
    let map = CalibrationMap::from_json_path(required(&s.calib, "calib")?)?;
    write_column(out, &baseline::linearize(&signal, &map)?)?;
    write_snapshot(out, "linearize", &s)
}

// mirror-study

fn pipeline_of(model: &Option<(Network<f32>, ModelCard)>) -> Option<NetPipeline<'_>> {
    model.as_ref().map(|(net, card)| NetPipeline { net, ladder: &card.ladder })
}

#[derive(Serialize, Deserialize)]
struct MirrorStudy {
    n_samples: Option<usize>,
    depths: usize,
    a2_at_max: f64,
    a3_at_max: f64,
    dispersion_a2: f64,
    dispersion_a3: f64,
    net1: Option<PathBuf>,
    net2: Option<PathBuf>,
    out: Option<PathBuf>,
}

pub fn mirror_study(cfg: Option<&Path>, flags: &MirrorStudyArgs) -> Result<(), CliError> {
    let s: MirrorStudy = settings(
        cfg,
        "mirror-study",
        MirrorStudy {
            n_samples: None,
            depths: 11,
            a2_at_max: 40.0,
            a3_at_max: 15.0,
            dispersion_a2: 0.0,
            dispersion_a3: 0.0,
            net1: None,
            net2: None,
            out: None,
        },
        flags,
    )?;
    let out = required(&s.out, "out")?;
    let net1 = s.net1.as_deref().map(load_model).transpose()?;
    let net2 = s.net2.as_deref().map(load_model).transpose()?;
    let widths: Vec<usize> = net1.iter().chain(&net2).map(|(_, c)| c.net.width).collect();
    let n = s.n_samples.or(widths.first().copied()).unwrap_or(1024);
    if let Some(w) = widths.iter().find(|&&w| w != n) {
        return Err(CliError::Usage(format!("network width {w} does not match the {n}-sample grid")));
    }
    let sigma = net1.iter().chain(&net2).map(|(_, c)| c.envelope_sigma).next().unwrap_or(DEFAULT_SIGMA);
    let grid = Grid::new(n, sigma)?;
    let depths = experiments::default_depths(&grid, s.depths);
    if depths.len() < 2 {
        return Err(CliError::Usage("mirror study needs at least two depths".into()));
    }
    let deepest = depths[depths.len() - 1];
    let system = SystemDistortion::reaching(s.a2_at_max, s.a3_at_max, deepest).with_dispersion(s.dispersion_a2, s.dispersion_a3);
    // Calibrate from two mirrors a fifth of the way in from either end.
    let (i1, i2) = (depths.len() / 5, depths.len() - 1 - depths.len() / 5);
    let calib = baseline::calibrate(&system.mirror(&grid, depths[i1])?, &system.mirror(&grid, depths[i2])?)?;
    let result = experiments::mirror_study(&grid, &depths, &system, pipeline_of(&net1), pipeline_of(&net2), Some(&calib))?;
    let mut w = create(out)?;
    result.write_csv(&mut w)?;
    w.flush().map_err(io_err(out))?;
    log::info!("transform limit {:.3} bins", result.transform_limit);
    if !result.raw_fwhm_strictly_increasing() {
        log::warn!("raw FWHM is not strictly increasing with depth");
    }
    write_snapshot(out, "mirror-study", &s)
}

// bscan

#[derive(Serialize, Deserialize)]
struct Bscan {
    signals: Option<PathBuf>,
    lines: usize,
    n_samples: usize,
    sigma: f64,
    pipeline: String,
    weights: Option<PathBuf>,
    calib: Option<PathBuf>,
    out: Option<PathBuf>,
    pgm: Option<PathBuf>,
}

fn read_lines(path: &Path, sigma: f64) -> Result<Vec<RawSignal>, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(RawSignal::read_csv(l.as_bytes(), sigma)?))
        .collect()
}

pub fn bscan(cfg: Option<&Path>, flags: &BscanArgs) -> Result<(), CliError> {
    let s: Bscan = settings(
        cfg,
        "bscan",
        Bscan {
            signals: None,
            lines: 256,
            n_samples: 1024,
            sigma: DEFAULT_SIGMA,
            pipeline: "raw".into(),
            weights: None,
            calib: None,
            out: None,
            pgm: None,
        },
        flags,
    )?;
    let out = required(&s.out, "out")?;
    let model = s.weights.as_deref().map(load_model).transpose()?;
    let sigma = model.as_ref().map(|(_, c)| c.envelope_sigma).unwrap_or(s.sigma);
    let signals = match &s.signals {
        Some(p) => read_lines(p, sigma)?,
        None => {
            let grid = Grid::new(model.as_ref().map(|(_, c)| c.net.width).unwrap_or(s.n_samples), sigma)?;
            let (lo, span) = (grid.f_min(), grid.f_max() - grid.f_min());
            let deepest = grid.f_max();
            let system = SystemDistortion::reaching(40.0, 15.0, deepest);
            glass_phantom(&grid, s.lines, (lo + 0.45 * span, lo + 0.6 * span), 0.25 * span, &system)?
        }
    };
    let calib = s.calib.as_deref().map(CalibrationMap::from_json_path).transpose()?;
    let pipeline = match (s.pipeline.as_str(), &model, &calib) {
        ("raw", _, _) => Pipeline::Raw,
        ("net1" | "net2", Some((net, card)), _) => {
            let want = if s.pipeline == "net1" { Order::Second } else { Order::Third };
            if card.order != want {
                return Err(CliError::Usage(format!("{} needs an order-{want} network, got order {}", s.pipeline, card.order)));
            }
            Pipeline::Network(NetPipeline { net, ladder: &card.ladder })
        }
        ("net1" | "net2", None, _) => return Err(CliError::Usage(format!("pipeline {} needs --weights", s.pipeline))),
        ("baseline", _, Some(map)) => Pipeline::Baseline(map),
        ("baseline", _, None) => return Err(CliError::Usage("pipeline baseline needs --calib".into())),
        (other, _, _) => return Err(CliError::Usage(format!("unknown pipeline `{other}` (raw, net1, net2, baseline)"))),
    };
    let image = experiments::assemble_bscan(&signals, pipeline)?;
    let mut w = create(out)?;
    image.write_csv(&mut w)?;
    w.flush().map_err(io_err(out))?;
    if let Some(pgm) = &s.pgm {
        let mut w = create(pgm)?;
        image.write_pgm(&mut w)?;
        w.flush().map_err(io_err(pgm))?;
    }
    write_snapshot(out, "bscan", &s)
}

// bench

#[derive(Serialize, Deserialize)]
struct Bench {
    preset: String,
    iterations: usize,
}

#[derive(Serialize)]
struct BenchResult {
    preset: String,
    rows: usize,
    n_samples: usize,
    stacks_per_sec: f64,
    inference_ms: f64,
}

pub fn bench(cfg: Option<&Path>, flags: &BenchArgs) -> Result<(), CliError> {
    let s: Bench = settings(
        cfg,
        "bench",
        Bench {
            preset: "toy".into(),
            iterations: 20,
        },
        flags,
    )?;
    let (dcfg, ncfg) = match s.preset.as_str() {
        "toy" => (DatasetConfig::toy(Order::Second, 1, 0), NetConfig::toy()),
        "full" => (DatasetConfig::full(Order::Second, 1, 0), NetConfig::full()),
        other => return Err(CliError::Usage(format!("unknown preset `{other}` (toy, full)"))),
    };
    let iters = s.iterations.max(1);
    let sample = dataset::sample_at(&dcfg, 0)?;
    let signal = synthesize_signal(&sample.object, &dcfg.grid)?;
    let start = Instant::now();
    for _ in 0..iters {
        std::hint::black_box(build_stack(&signal, &dcfg.ladder)?);
    }
    let stack_secs = start.elapsed().as_secs_f64();
    let mut net = Network::<f32>::new(ncfg, None, 0)?;
    net.order = Some(Order::Second);
    let samples = vec![sample];
    let start = Instant::now();
    for _ in 0..iters {
        std::hint::black_box(net::predict(&net, &samples, 1)?);
    }
    let infer_secs = start.elapsed().as_secs_f64();
    let result = BenchResult {
        preset: s.preset.clone(),
        rows: dcfg.ladder.len(),
        n_samples: dcfg.grid.n_samples,
        stacks_per_sec: iters as f64 / stack_secs,
        inference_ms: 1e3 * infer_secs / iters as f64,
    };
    println!("{}", serde_json::to_string_pretty(&result).map_err(|e| CliError::Data(e.to_string()))?);
    Ok(())
}

// plot

#[derive(Serialize, Deserialize)]
struct Plot {
    csv: Option<PathBuf>,
    kind: PlotKind,
    title: String,
    out: Option<PathBuf>,
}

pub fn plot(cfg: Option<&Path>, flags: &PlotArgs) -> Result<(), CliError> {
    let s: Plot = settings(
        cfg,
        "plot",
        Plot {
            csv: None,
            kind: PlotKind::Line,
            title: String::new(),
            out: None,
        },
        flags,
    )?;
    let out = required(&s.out, "out")?;
    emit_plot(required(&s.csv, "csv")?, s.kind, out, &s.title)?;
    write_snapshot(out, "plot", &s)
}
