//! Reproducible `(stack, ground truth)` datasets and their binary format.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! "NLDS"  u16 version=1  u8 order  u32 count  u16 M  u16 N  u64 seed
//! M × f64 ladder values   f64 a2_bound   f64 a3_bound
//! count × record:
//!     u8 J   J × (f64 freq, f64 reflectivity, f64 a2, f64 a3)
//!     M·N × f32 stack (row-major, normalized)   N × f32 target (normalized)
//! ```
//!
//! Record `i` draws from its own stream seeded with `seed ^ i` and gets
//! `2 + i mod 11` interfaces, so generation order does not affect content.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SampleRng;
use crate::sigmodel::{ground_truth, synthesize_signal, Grid, Interface, ObjectSpec, Order, MAX_INTERFACES, MIN_INTERFACES};
use crate::stack::{build_stack, minmax_normalize, CoeffLadder};

pub const DATASET_MAGIC: [u8; 4] = *b"NLDS";
pub const DATASET_VERSION: u16 = 1;

/// Number of interface-count buckets (2..=12).
pub const BUCKETS: usize = MAX_INTERFACES - MIN_INTERFACES + 1;

const MAX_REJECTIONS: usize = 10_000;
const GENERATION_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub count: usize,
    pub order: Order,
    pub seed: u64,
    pub grid: Grid,
    pub interface_range: (usize, usize),
    /// Reflectivities are drawn from `(lo, hi]`.
    pub reflectivity_range: (f64, f64),
    pub a2_bound: f64,
    pub a3_bound: f64,
    pub ladder: CoeffLadder,
}

impl DatasetConfig {
    /// 32 × 1024 stacks, nonlinearity bounds 60 / 30 rad.
    pub fn full(order: Order, count: usize, seed: u64) -> Self {
        Self::with_geometry(order, count, seed, Grid::default(), 32, 60.0, 30.0)
    }

    /// 16 × 256 stacks for desk-scale training, bounds 30 / 20 rad.
    pub fn toy(order: Order, count: usize, seed: u64) -> Self {
        let grid = Grid {
            n_samples: 256,
            envelope_sigma: 0.15,
        };
        Self::with_geometry(order, count, seed, grid, 16, 30.0, 20.0)
    }

    pub fn with_geometry(order: Order, count: usize, seed: u64, grid: Grid, rows: usize, a2_bound: f64, a3_bound: f64) -> Self {
        let max = match order {
            Order::Second => a2_bound,
            Order::Third => a3_bound,
        };
        DatasetConfig {
            count,
            order,
            seed,
            grid,
            interface_range: (MIN_INTERFACES, MAX_INTERFACES),
            reflectivity_range: (0.0, 1.0),
            a2_bound,
            a3_bound,
            ladder: CoeffLadder::symmetric(order, max, rows).expect("positive bounds"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.ladder.validate()?;
        let (lo, hi) = self.interface_range;
        if lo < MIN_INTERFACES || hi > MAX_INTERFACES || lo > hi {
            return Err(Error::Config(format!(
                "interface range [{lo}, {hi}] must lie within [{MIN_INTERFACES}, {MAX_INTERFACES}]"
            )));
        }
        let (rlo, rhi) = self.reflectivity_range;
        if !(rlo >= 0.0 && rhi <= 1.0 && rlo < rhi) {
            return Err(Error::Config(format!("reflectivity range ({rlo}, {rhi}] must lie within (0, 1]")));
        }
        if !(self.a2_bound >= 0.0 && self.a3_bound >= 0.0) {
            return Err(Error::Config("nonlinearity bounds must be non-negative".into()));
        }
        if self.ladder.order != self.order {
            return Err(Error::Config(format!(
                "ladder order {} does not match dataset order {}",
                self.ladder.order, self.order
            )));
        }
        let bound = match self.order {
            Order::Second => self.a2_bound,
            Order::Third => self.a3_bound,
        };
        if self.ladder.max() < bound {
            return Err(Error::Config(format!(
                "ladder maximum {} does not cover the nonlinearity bound {bound}",
                self.ladder.max()
            )));
        }
        if self.grid.n_samples > u16::MAX as usize || self.ladder.len() > u16::MAX as usize {
            return Err(Error::Config("grid or ladder too large for the file header".into()));
        }
        Ok(())
    }

    pub fn buckets(&self) -> usize {
        self.interface_range.1 - self.interface_range.0 + 1
    }

    /// Interface count of record `index`.
    pub fn interfaces_for(&self, index: usize) -> usize {
        self.interface_range.0 + index % self.buckets()
    }
}

/// One dataset record.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub object: ObjectSpec,
    /// Normalized stack, row-major `M × N`.
    pub input: Vec<f32>,
    /// Normalized ground truth, length `N`.
    pub target: Vec<f32>,
}

impl Sample {
    pub fn interface_count(&self) -> usize {
        self.object.len()
    }
}

/// Draws a `j`-interface object, advancing `rng`.
pub fn draw_object(rng: &mut SampleRng, cfg: &DatasetConfig, j: usize) -> Result<ObjectSpec> {
    if !(MIN_INTERFACES..=MAX_INTERFACES).contains(&j) {
        return Err(Error::Config(format!("interface count {j} outside [{MIN_INTERFACES}, {MAX_INTERFACES}]")));
    }
    let (f_lo, f_hi) = (cfg.grid.f_min(), cfg.grid.f_max());
    let (r_lo, r_hi) = cfg.reflectivity_range;
    let mut interfaces: Vec<Interface> = Vec::with_capacity(j);
    let mut attempts = 0;
    while interfaces.len() < j {
        attempts += 1;
        if attempts > MAX_REJECTIONS {
            return Err(Error::Config(format!(
                "could not place {j} interfaces {}-bin apart in [{f_lo}, {f_hi}] within {MAX_REJECTIONS} attempts",
                crate::sigmodel::MIN_SEPARATION
            )));
        }
        let freq = rng.uniform(f_lo, f_hi);
        if interfaces.iter().any(|i| (i.freq - freq).abs() < crate::sigmodel::MIN_SEPARATION) {
            continue;
        }
        let reflectivity = r_lo + (r_hi - r_lo) * rng.next_f64_open_closed();
        let a2 = rng.uniform(-cfg.a2_bound, cfg.a2_bound);
        let a3 = rng.uniform(-cfg.a3_bound, cfg.a3_bound);
        interfaces.push(Interface::new(freq, reflectivity, a2, a3));
    }
    Ok(ObjectSpec { interfaces })
}

/// Builds the normalized stack and target of one object.
pub fn make_sample(object: ObjectSpec, grid: &Grid, ladder: &CoeffLadder) -> Result<Sample> {
    let signal = synthesize_signal(&object, grid)?;
    let stack = build_stack(&signal, ladder)?;
    let input = minmax_normalize(&stack.rows)?.into_iter().map(|v| v as f32).collect();
    let gt = ground_truth(&object, grid, ladder.order)?;
    let target = minmax_normalize(&gt)?.into_iter().map(|v| v as f32).collect();
    Ok(Sample { object, input, target })
}

/// Record `index` of the dataset described by `cfg`.
pub fn sample_at(cfg: &DatasetConfig, index: usize) -> Result<Sample> {
    let mut rng = SampleRng::for_index(cfg.seed, index as u64);
    let object = draw_object(&mut rng, cfg, cfg.interfaces_for(index))?;
    make_sample(object, &cfg.grid, &cfg.ladder)
}

/// Generates records `range` in memory (parallel, order-preserving).
pub fn generate_samples(cfg: &DatasetConfig, range: std::ops::Range<usize>) -> Result<Vec<Sample>> {
    cfg.validate()?;
    range.into_par_iter().map(|i| sample_at(cfg, i)).collect()
}

/// Fixed-size header of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub version: u16,
    pub order: Order,
    pub count: usize,
    pub rows: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub ladder: Vec<f64>,
    pub a2_bound: f64,
    pub a3_bound: f64,
}

impl DatasetHeader {
    fn of(cfg: &DatasetConfig) -> Self {
        DatasetHeader {
            version: DATASET_VERSION,
            order: cfg.order,
            count: cfg.count,
            rows: cfg.ladder.len(),
            n_samples: cfg.grid.n_samples,
            seed: cfg.seed,
            ladder: cfg.ladder.values.clone(),
            a2_bound: cfg.a2_bound,
            a3_bound: cfg.a3_bound,
        }
    }

    pub fn coeff_ladder(&self) -> CoeffLadder {
        CoeffLadder {
            order: self.order,
            values: self.ladder.clone(),
        }
    }

    fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(&DATASET_MAGIC)?;
        out.write_all(&self.version.to_le_bytes())?;
        out.write_all(&[self.order.as_u8()])?;
        out.write_all(&(self.count as u32).to_le_bytes())?;
        out.write_all(&(self.rows as u16).to_le_bytes())?;
        out.write_all(&(self.n_samples as u16).to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        for v in &self.ladder {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&self.a2_bound.to_le_bytes())?;
        out.write_all(&self.a3_bound.to_le_bytes())?;
        Ok(())
    }

    fn read<R: Read>(input: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if magic != DATASET_MAGIC {
            return Err(Error::BadMagic {
                expected: DATASET_MAGIC,
                found: magic,
            });
        }
        let version = read_u16(input)?;
        if version != DATASET_VERSION {
            return Err(Error::VersionMismatch {
                expected: DATASET_VERSION,
                found: version,
            });
        }
        let order = Order::try_from(read_u8(input)?)?;
        let count = read_u32(input)? as usize;
        let rows = read_u16(input)? as usize;
        let n_samples = read_u16(input)? as usize;
        let seed = read_u64(input)?;
        let ladder = (0..rows).map(|_| read_f64(input)).collect::<io::Result<Vec<_>>>()?;
        let a2_bound = read_f64(input)?;
        let a3_bound = read_f64(input)?;
        Ok(DatasetHeader {
            version,
            order,
            count,
            rows,
            n_samples,
            seed,
            ladder,
            a2_bound,
            a3_bound,
        })
    }
}

/// Human-readable mirror of the header, written next to the dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub header: DatasetHeader,
    pub envelope_sigma: f64,
    pub reflectivity_range: (f64, f64),
    pub interface_range: (usize, usize),
    pub normalization: String,
    pub bucket_counts: Vec<(usize, usize)>,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

fn write_record<W: Write>(out: &mut W, sample: &Sample) -> Result<()> {
    out.write_all(&[sample.object.len() as u8])?;
    for i in &sample.object.interfaces {
        for v in [i.freq, i.reflectivity, i.a2, i.a3] {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    for v in sample.input.iter().chain(&sample.target) {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Generates the dataset and writes it (plus manifest) to `path`.
pub fn generate(cfg: &DatasetConfig, path: impl AsRef<Path>) -> Result<DatasetHeader> {
    cfg.validate()?;
    let path = path.as_ref();
    let header = DatasetHeader::of(cfg);
    let mut out = BufWriter::new(File::create(path)?);
    header.write(&mut out)?;
    let mut start = 0;
    while start < cfg.count {
        let end = (start + GENERATION_CHUNK).min(cfg.count);
        for sample in generate_samples(cfg, start..end)? {
            write_record(&mut out, &sample)?;
        }
        start = end;
    }
    out.flush()?;

    let mut bucket_counts: Vec<(usize, usize)> = (cfg.interface_range.0..=cfg.interface_range.1).map(|j| (j, 0)).collect();
    for i in 0..cfg.count {
        bucket_counts[cfg.interfaces_for(i) - cfg.interface_range.0].1 += 1;
    }
    let manifest = Manifest {
        format: format!("NLDS v{DATASET_VERSION}"),
        header: header.clone(),
        envelope_sigma: cfg.grid.envelope_sigma,
        reflectivity_range: cfg.reflectivity_range,
        interface_range: cfg.interface_range,
        normalization: "per-sample global min-max".into(),
        bucket_counts,
    };
    std::fs::write(manifest_path(path), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(header)
}

/// Streaming reader over a dataset file.
pub struct DatasetReader<R> {
    header: DatasetHeader,
    input: R,
    next: usize,
    failed: bool,
}

impl<R: Read> DatasetReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let header = DatasetHeader::read(&mut input).map_err(|e| match e {
            Error::Io(ref io) if io.kind() == io::ErrorKind::UnexpectedEof => Error::TruncatedRecord { index: 0 },
            other => other,
        })?;
        Ok(DatasetReader {
            header,
            input,
            next: 0,
            failed: false,
        })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    fn read_record(&mut self) -> Result<Sample> {
        let index = self.next;
        let truncated = |e: io::Error| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                Error::TruncatedRecord { index }
            } else {
                Error::Io(e)
            }
        };
        let j = read_u8(&mut self.input).map_err(truncated)? as usize;
        let mut interfaces = Vec::with_capacity(j);
        for _ in 0..j {
            let mut f = [0.0; 4];
            for v in &mut f {
                *v = read_f64(&mut self.input).map_err(truncated)?;
            }
            interfaces.push(Interface::new(f[0], f[1], f[2], f[3]));
        }
        let (m, n) = (self.header.rows, self.header.n_samples);
        let input = read_f32s(&mut self.input, m * n).map_err(truncated)?;
        let target = read_f32s(&mut self.input, n).map_err(truncated)?;
        Ok(Sample {
            object: ObjectSpec { interfaces },
            input,
            target,
        })
    }
}

impl<R: Read> Iterator for DatasetReader<R> {
    type Item = Result<Sample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next >= self.header.count {
            return None;
        }
        let item = self.read_record();
        if item.is_err() {
            self.failed = true;
        }
        self.next += 1;
        Some(item)
    }
}

/// Opens a dataset for streaming.
pub fn load(path: impl AsRef<Path>) -> Result<DatasetReader<BufReader<File>>> {
    DatasetReader::new(BufReader::new(File::open(path)?))
}

/// Reads the whole dataset into memory.
pub fn load_all(path: impl AsRef<Path>) -> Result<(DatasetHeader, Vec<Sample>)> {
    let reader = load(path)?;
    let header = reader.header().clone();
    let samples = reader.collect::<Result<Vec<_>>>()?;
    Ok((header, samples))
}

fn read_u8<R: Read>(r: &mut R) -> io::Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u16<R: Read>(r: &mut R) -> io::Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f32s<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<f32>> {
    let mut bytes = vec![0u8; 4 * n];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}
