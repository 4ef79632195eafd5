//! Mini-batch training with per-epoch validation and best-epoch retention.

use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::metrics::gof;
use crate::rng::SampleRng;
use crate::sigmodel::Order;

use super::adam::{AdamConfig, DEFAULT_LEARNING_RATE};
use super::model::mae_loss;
use super::{Network, Tensor4};

/// One epoch of the desk-scale training set at batch size 8.
pub const DEFAULT_WARMUP_STEPS: usize = 250;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Steps of linear ramp from 0 to `lr`.
    pub warmup_steps: usize,
    /// GoF thresholds tracked on the validation set each epoch.
    pub thresholds: Vec<f64>,
    /// Threshold whose mean GoF selects the best epoch.
    pub primary_threshold: f64,
    /// Seed of the per-epoch shuffles.
    pub seed: u64,
    /// Order of the training data; must match the network's tag if it has one.
    pub order: Order,
}

impl TrainOptions {
    pub fn new(order: Order) -> Self {
        TrainOptions {
            epochs: 30,
            batch_size: 8,
            lr: DEFAULT_LEARNING_RATE,
            warmup_steps: DEFAULT_WARMUP_STEPS,
            thresholds: vec![0.01, 0.001],
            primary_threshold: 0.01,
            seed: 0,
            order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    /// 1-based.
    pub epoch: usize,
    pub train_mae: f64,
    pub val_mae: f64,
    /// Mean validation GoF (percent), aligned with `TrainReport::thresholds`.
    pub val_gof: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub thresholds: Vec<f64>,
    pub primary_threshold: f64,
    pub rows: Vec<EpochRow>,
    /// Epoch (1-based) whose parameters were retained.
    pub best_epoch: Option<usize>,
}

impl TrainReport {
    pub fn best_row(&self) -> Option<&EpochRow> {
        let best = self.best_epoch?;
        self.rows.iter().find(|r| r.epoch == best)
    }
}

/// Stacks a slice of samples into a `(B, 1, M, N)` tensor.
pub fn batch_tensor(samples: &[&Sample], rows: usize, width: usize) -> Result<Tensor4<f32>> {
    let mut data = Vec::with_capacity(samples.len() * rows * width);
    for s in samples {
        if s.input.len() != rows * width {
            return Err(Error::ShapeMismatch(format!(
                "sample stack has {} values, network expects {rows}×{width}",
                s.input.len()
            )));
        }
        data.extend_from_slice(&s.input);
    }
    Tensor4::new(data, [samples.len(), 1, rows, width])
}

/// Inference over `samples` in batches of `batch_size`.
pub fn predict(net: &Network<f32>, samples: &[Sample], batch_size: usize) -> Result<Vec<Vec<f32>>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size.max(1)) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let input = batch_tensor(&refs, net.config.rows, net.config.width)?;
        out.extend(net.forward(&input)?);
    }
    Ok(out)
}

/// Validation MAE and mean GoF per threshold.
pub fn validate(net: &Network<f32>, samples: &[Sample], thresholds: &[f64], batch_size: usize) -> Result<(f64, Vec<f64>)> {
    let preds = predict(net, samples, batch_size)?;
    let mut mae = 0.0;
    let mut gofs = vec![0.0; thresholds.len()];
    for (pred, sample) in preds.iter().zip(samples) {
        mae += mae_loss(pred, &sample.target)? as f64;
        let p: Vec<f64> = pred.iter().map(|&v| v as f64).collect();
        let t: Vec<f64> = sample.target.iter().map(|&v| v as f64).collect();
        for (g, &th) in gofs.iter_mut().zip(thresholds) {
            *g += gof(&p, &t, th)?;
        }
    }
    let n = samples.len() as f64;
    Ok((mae / n, gofs.into_iter().map(|g| g / n).collect()))
}

/// Trains `net` and returns the parameters of the best validation epoch.
///
/// Single-threaded and therefore bit-reproducible for a fixed seed.
pub fn train(mut net: Network<f32>, train_set: &[Sample], val_set: &[Sample], opts: &TrainOptions) -> Result<(Network<f32>, TrainReport)> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    match net.order {
        Some(o) if o != opts.order => {
            return Err(Error::OrderMismatch {
                network: o.as_u8(),
                data: opts.order.as_u8(),
            })
        }
        _ => net.order = Some(opts.order),
    }
    if opts.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let primary = opts
        .thresholds
        .iter()
        .position(|&t| t == opts.primary_threshold)
        .ok_or_else(|| Error::Config("primary threshold must be one of the tracked thresholds".into()))?;

    let mut report = TrainReport {
        thresholds: opts.thresholds.clone(),
        primary_threshold: opts.primary_threshold,
        rows: Vec::with_capacity(opts.epochs),
        best_epoch: None,
    };
    let mut best: Option<(f64, Network<f32>)> = None;
    let adam = AdamConfig::default();
    let mut rng = SampleRng::from_seed(opts.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let (rows, width) = (net.config.rows, net.config.width);
    if net.step == 0 && opts.epochs > 0 {
        let total: f64 = train_set.iter().flat_map(|s| s.target.iter()).map(|&v| v as f64).sum();
        let count: usize = train_set.iter().map(|s| s.target.len()).sum();
        net.init_head_bias(total / count as f64);
    }

    for epoch in 1..=opts.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (b, idx) in order.chunks(opts.batch_size).enumerate() {
            let batch: Vec<&Sample> = idx.iter().map(|&i| &train_set[i]).collect();
            let input = batch_tensor(&batch, rows, width)?;
            let target: Vec<f32> = batch.iter().flat_map(|s| s.target.iter().copied()).collect();
            let (loss, grads) = net.backward(&input, &target)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}, batch {b}")));
            }
            let ramp = if opts.warmup_steps == 0 {
                1.0
            } else {
                ((net.step + 1) as f64 / opts.warmup_steps as f64).min(1.0)
            };
            net.adam_step(&grads, opts.lr * ramp, &adam)?;
            loss_sum += loss as f64 * batch.len() as f64;
        }
        let train_mae = loss_sum / train_set.len() as f64;
        let (val_mae, val_gof) = validate(&net, val_set, &opts.thresholds, opts.batch_size)?;
        log::info!(
            "epoch {epoch}: train MAE {train_mae:.5}, val MAE {val_mae:.5}, val GoF {:?}",
            val_gof
        );
        let score = val_gof[primary];
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, net.clone()));
            report.best_epoch = Some(epoch);
        }
        report.rows.push(EpochRow {
            epoch,
            train_mae,
            val_mae,
            val_gof,
        });
    }
    let net = best.map(|(_, n)| n).unwrap_or(net);
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_samples, DatasetConfig};
    use crate::net::NetConfig;

    fn tiny() -> NetConfig {
        NetConfig {
            levels: 2,
            base_channels: 2,
            ..NetConfig::toy()
        }
    }

    fn samples(order: Order, n: usize) -> Vec<Sample> {
        generate_samples(&DatasetConfig::toy(order, n, 1), 0..n).unwrap()
    }

    #[test]
    fn zero_epochs_return_the_initial_state() {
        let set = samples(Order::Second, 4);
        let net = Network::<f32>::new(tiny(), None, 3).unwrap();
        let opts = TrainOptions {
            epochs: 0,
            ..TrainOptions::new(Order::Second)
        };
        let (out, report) = train(net.clone(), &set, &set, &opts).unwrap();
        assert_eq!(out.layers, net.layers);
        assert!(report.rows.is_empty());
        assert_eq!(report.best_epoch, None);
    }

    #[test]
    fn rejects_empty_sets_and_order_mismatch() {
        let set = samples(Order::Second, 2);
        let opts = TrainOptions::new(Order::Second);
        let net = Network::<f32>::new(tiny(), None, 0).unwrap();
        assert!(matches!(train(net.clone(), &[], &set, &opts), Err(Error::EmptyDataset)));
        let third = Network::<f32>::new(tiny(), Some(Order::Third), 0).unwrap();
        assert!(matches!(train(third, &set, &set, &opts), Err(Error::OrderMismatch { .. })));
    }

    #[test]
    fn training_is_deterministic() {
        let set = samples(Order::Second, 6);
        let opts = TrainOptions {
            epochs: 2,
            batch_size: 4,
            ..TrainOptions::new(Order::Second)
        };
        let run = || {
            let net = Network::<f32>::new(tiny(), None, 9).unwrap();
            rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .unwrap()
                .install(|| train(net, &set, &set, &opts).unwrap())
        };
        let (a, ra) = run();
        let (b, rb) = run();
        assert_eq!(ra, rb);
        assert_eq!(a.layers, b.layers);
        assert_eq!(ra.rows.len(), 2);
    }

    #[test]
    fn overfits_eight_samples() {
        let set = samples(Order::Second, 8);
        let net = Network::<f32>::new(NetConfig::toy(), None, 0).unwrap();
        // One batch per epoch, so 500 epochs are 500 steps.
        let opts = TrainOptions {
            epochs: 500,
            thresholds: vec![0.01],
            ..TrainOptions::new(Order::Second)
        };
        let (net, _) = train(net, &set, &set, &opts).unwrap();
        let (mae, _) = validate(&net, &set, &[0.01], 8).unwrap();
        assert!(mae < 0.005, "train MAE {mae}");
    }
}
