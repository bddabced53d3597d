//! Training: mask and guidance fields, multiresolution target pyramids,
//! the gradient-matching loss, and the optimization loops.
//!
//! Two modes. `Fit` trains stages progressively: stage `i` fits pyramid
//! level `i` at its native resolution with earlier stages frozen, value
//! loss only. `Seamless` fine-tunes the full-detail composite against the
//! combined loss `mean(lambda |J_f - U|^2 + (1 - lambda) |f - target|^2)`,
//! where `U` is the wrap-around Jacobian of the target so its primitive is
//! tileable by construction.

mod field;
mod loss;
mod pyramid;

pub use field::{
    binary_border_mask, guidance_from_image, periodic_class_mask, soft_mask, GuidanceField,
    MaskField, MaskKind,
};
pub use loss::{loss_eval, LossWeights};
pub use pyramid::{build_pyramid, Pyramid};

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diffcore::{AdamState, DiffError, Tape};
use crate::mrnet::MrNet;
use crate::pinr::{BatchNodes, PinrError};
use crate::texio::{rgb_to_ycbcr, ColorSpace, ImageGrid, TexError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error(transparent)]
    Tex(#[from] TexError),
    #[error(transparent)]
    Pinr(#[from] PinrError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    Fit,
    Seamless,
}

/// Which mask to build for training. `PeriodicClass` drops pixels from the
/// batches (fit mode); `Binary`/`Soft` weight the gradient-matching term
/// (seamless mode).
#[derive(Debug, Clone, PartialEq)]
pub enum MaskSpec {
    None,
    Binary { margin: usize },
    Soft { gamma: f64, p: f64 },
    PeriodicClass { repeats: (usize, usize) },
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub epochs: usize,
    /// Per-stage epoch override for fit mode.
    pub stage_epochs: Option<Vec<usize>>,
    pub batch_pixels: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub color_space: ColorSpace,
    pub mask: MaskSpec,
    /// Explicit drop indicator (1 excludes a pixel) as an alternative to
    /// the seeded periodic-class mask; fit mode only.
    pub drop_mask: Option<MaskField>,
    /// Multipliers on the two loss integrals; both default to 1.
    pub value_weight: f64,
    pub jacobian_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::Fit,
            epochs: 200,
            stage_epochs: None,
            batch_pixels: 65536,
            learning_rate: 1e-4,
            seed: 0,
            color_space: ColorSpace::Ycbcr,
            mask: MaskSpec::None,
            drop_mask: None,
            value_weight: 1.0,
            jacobian_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub psnr: f64,
}

/// Outcome of a training run: the per-epoch curve, the full-image PSNR of
/// the final composite against the training data, wall time, and the seed.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
    pub final_psnr: f64,
    pub wall_seconds: f64,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl TrainReport {
    /// Line-oriented text: header, then one `epoch,loss,psnr` per epoch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,psnr\n");
        for r in &self.records {
            out.push_str(&format!("{},{:.17e},{:.6}\n", r.epoch, r.loss, r.psnr));
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<(), std::io::Error> {
        std::fs::write(path, self.to_csv())
    }
}

/// Train a network against an image. See the module docs for the two
/// modes; everything is deterministic for a fixed config and seed.
pub fn train(net: &mut MrNet, data: &ImageGrid, cfg: &TrainConfig) -> Result<TrainReport, TrainError> {
    validate(net, data, cfg)?;
    let start = Instant::now();
    let mut warnings = Vec::new();

    let working = match cfg.color_space {
        ColorSpace::Ycbcr => rgb_to_ycbcr(data)?,
        ColorSpace::Rgb => data.clone(),
    };

    let records = match cfg.mode {
        TrainMode::Fit => fit(net, &working, cfg, &mut warnings)?,
        TrainMode::Seamless => seamless(net, &working, cfg, &mut warnings)?,
    };

    let final_psnr = composite_psnr(net, &working);
    Ok(TrainReport {
        records,
        final_psnr,
        wall_seconds: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
        warnings,
    })
}

fn validate(net: &MrNet, data: &ImageGrid, cfg: &TrainConfig) -> Result<(), TrainError> {
    if cfg.epochs == 0 {
        return Err(TrainError::BadConfig("epochs must be >= 1".into()));
    }
    if cfg.batch_pixels == 0 {
        return Err(TrainError::BadConfig("batch_pixels must be >= 1".into()));
    }
    if cfg.color_space == ColorSpace::Ycbcr && data.channels != 3 {
        return Err(TrainError::BadConfig(format!(
            "YCbCr training needs a 3-channel image, got {}",
            data.channels
        )));
    }
    if data.channels != net.channels() {
        return Err(TrainError::BadConfig(format!(
            "image has {} channels but the network expects {}",
            data.channels,
            net.channels()
        )));
    }
    // The grid must span a whole number of periods so that wrap-around
    // guidance and the periodic representation agree.
    let period = net.period();
    for (extent, p, axis) in [
        (data.domain.width(), period[0], "x"),
        (data.domain.height(), period[1], "y"),
    ] {
        let ratio = extent / p;
        if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(TrainError::BadConfig(format!(
                "domain extent {extent} along {axis} is not a whole number of periods {p}"
            )));
        }
    }
    if let MaskSpec::PeriodicClass { repeats } = cfg.mask {
        if cfg.mode == TrainMode::Seamless {
            return Err(TrainError::BadConfig(
                "the periodic-class drop mask applies to fit mode".into(),
            ));
        }
        if cfg.drop_mask.is_some() {
            return Err(TrainError::BadConfig(
                "give either a periodic-class mask or an explicit drop mask, not both".into(),
            ));
        }
        field::check_periodic_class(data.h, data.w, repeats).map_err(TrainError::BadConfig)?;
    }
    if let Some(mask) = &cfg.drop_mask {
        if mask.h != data.h || mask.w != data.w {
            return Err(TrainError::BadConfig(format!(
                "drop mask is {}x{} but the image is {}x{}",
                mask.h, mask.w, data.h, data.w
            )));
        }
    }
    Ok(())
}

fn composite_psnr(net: &MrNet, working: &ImageGrid) -> f64 {
    let pts = working.centers();
    let pred = net.eval(&pts, net.stage_count() as f64);
    let sse: f64 = pred
        .iter()
        .zip(&working.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let mse = sse / working.data.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

fn stage_epoch_count(cfg: &TrainConfig, stage: usize) -> usize {
    cfg.stage_epochs
        .as_ref()
        .and_then(|v| v.get(stage).copied())
        .unwrap_or(cfg.epochs)
}

fn fit(
    net: &mut MrNet,
    working: &ImageGrid,
    cfg: &TrainConfig,
    warnings: &mut Vec<String>,
) -> Result<Vec<EpochRecord>, TrainError> {
    let n_stages = net.stage_count();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let drop_mask = match cfg.mask {
        MaskSpec::PeriodicClass { repeats } => {
            let mask_seed = rng.random::<u64>();
            Some(periodic_class_mask(working.h, working.w, repeats, mask_seed)?)
        }
        MaskSpec::None => cfg.drop_mask.clone(),
        ref other => {
            warnings.push(format!(
                "mask {other:?} weights the seamless loss; fit mode ignores it"
            ));
            cfg.drop_mask.clone()
        }
    };

    let pyramid = match &drop_mask {
        Some(mask) => pyramid::build_pyramid_masked(working, mask, n_stages)?,
        None => build_pyramid(working, n_stages)?,
    };

    let mut records = Vec::new();
    let mut epoch_counter = 0usize;
    for stage_idx in 0..n_stages {
        let level = pyramid.level(stage_idx);
        let coords = level.centers();
        let channels = level.channels;

        // Only the finest level carries dropped pixels; coarser levels are
        // reconstructions from kept data alone.
        let keep: Vec<usize> = if stage_idx + 1 == n_stages {
            match &drop_mask {
                Some(mask) => (0..coords.len())
                    .filter(|&p| mask.values[p] == 0.0)
                    .collect(),
                None => (0..coords.len()).collect(),
            }
        } else {
            (0..coords.len()).collect()
        };

        // Residual targets: earlier stages are frozen, so optimizing
        // stage i of the composite equals fitting the leftover signal.
        let residual: Vec<f64> = if stage_idx == 0 {
            level.data.clone()
        } else {
            let prefix = net.eval(&coords, stage_idx as f64 - 1.0);
            level
                .data
                .iter()
                .zip(&prefix)
                .map(|(t, p)| t - p)
                .collect()
        };

        let mut opt = AdamState::new(cfg.learning_rate);
        let epochs = stage_epoch_count(cfg, stage_idx);
        for _ in 0..epochs {
            epoch_counter += 1;
            let mut order = keep.clone();
            order.shuffle(&mut rng);

            let mut sse = 0.0;
            let mut seen = 0usize;
            for (batch_idx, chunk) in order.chunks(cfg.batch_pixels).enumerate() {
                let pts: Vec<[f64; 2]> = chunk.iter().map(|&p| coords[p]).collect();
                let tgt: Vec<f64> = chunk
                    .iter()
                    .flat_map(|&p| residual[p * channels..(p + 1) * channels].iter().copied())
                    .collect();

                let mut tape = Tape::new();
                let batch = BatchNodes::new(&mut tape, &pts);
                let stage = net.stage(stage_idx);
                let bind = stage.bind(&mut tape);
                let f = stage.forward(&mut tape, &bind, &batch);
                let t_node = tape.constant(vec![pts.len(), channels], tgt);
                let diff = tape.sub(f, t_node)?;
                let sq = tape.mul(diff, diff)?;
                let total = tape.sum(sq);
                let loss_node = tape.scale(total, 1.0 / pts.len() as f64);

                let loss_val = tape.value(loss_node)[0];
                if !loss_val.is_finite() {
                    return Err(TrainError::NonFinite {
                        epoch: epoch_counter,
                        batch: batch_idx,
                    });
                }
                sse += tape.value(total)[0];
                seen += pts.len();

                let grads = tape.backward(loss_node)?;
                drop(tape);
                opt.step(&mut net.stage_mut(stage_idx).trainable_params_mut(), &grads)?;
            }

            let mse = sse / (seen * channels).max(1) as f64;
            records.push(EpochRecord {
                epoch: epoch_counter,
                loss: sse / seen.max(1) as f64,
                psnr: if mse > 0.0 {
                    -10.0 * mse.log10()
                } else {
                    f64::INFINITY
                },
            });
        }
    }
    Ok(records)
}

fn seamless(
    net: &mut MrNet,
    working: &ImageGrid,
    cfg: &TrainConfig,
    warnings: &mut Vec<String>,
) -> Result<Vec<EpochRecord>, TrainError> {
    let channels = working.channels;
    let lambda_field = match cfg.mask {
        MaskSpec::Soft { gamma, p } => soft_mask(working.h, working.w, gamma, p)?,
        MaskSpec::Binary { margin } => binary_border_mask(working.h, working.w, margin)?,
        MaskSpec::None => {
            warnings.push(
                "seamless mode with no mask reduces to plain value fitting".to_string(),
            );
            MaskField::zeros(working.h, working.w)
        }
        MaskSpec::PeriodicClass { .. } => unreachable!("rejected by validate"),
    };
    let lambda_is_one = lambda_field.values.iter().all(|&v| v == 1.0);
    if lambda_is_one {
        warnings.push(
            "lambda is 1 everywhere: value term vanishes, anchoring per-channel means".to_string(),
        );
    }

    let guidance = guidance_from_image(working, true);
    let coords = working.centers();
    let weights = LossWeights {
        value: cfg.value_weight,
        jacobian: cfg.jacobian_weight,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = AdamState::new(cfg.learning_rate);
    let mut records = Vec::new();

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..coords.len()).collect();
        order.shuffle(&mut rng);

        let mut loss_acc = 0.0;
        let mut sse = 0.0;
        let mut seen = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.batch_pixels).enumerate() {
            let pts: Vec<[f64; 2]> = chunk.iter().map(|&p| coords[p]).collect();
            let tgt: Vec<f64> = chunk
                .iter()
                .flat_map(|&p| working.data[p * channels..(p + 1) * channels].iter().copied())
                .collect();
            let lam: Vec<f64> = chunk.iter().map(|&p| lambda_field.values[p]).collect();
            let gui: Vec<f64> = chunk
                .iter()
                .flat_map(|&p| {
                    guidance.values[p * channels * 2..(p + 1) * channels * 2]
                        .iter()
                        .copied()
                })
                .collect();

            let mut tape = Tape::new();
            let binds = net.bind_prefix(&mut tape, net.stage_count());
            let (loss_node, f_node) = loss::eq8_loss(
                &mut tape,
                net,
                &binds,
                &pts,
                &tgt,
                &gui,
                &lam,
                weights,
                lambda_is_one,
            )?;

            let loss_val = tape.value(loss_node)[0];
            if !loss_val.is_finite() {
                return Err(TrainError::NonFinite {
                    epoch,
                    batch: batch_idx,
                });
            }
            loss_acc += loss_val * pts.len() as f64;
            sse += tape
                .value(f_node)
                .iter()
                .zip(&tgt)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            seen += pts.len();

            let grads = tape.backward(loss_node)?;
            drop(tape);
            opt.step(&mut net.trainable_params_mut(), &grads)?;
        }

        let mse = sse / (seen * channels).max(1) as f64;
        records.push(EpochRecord {
            epoch,
            loss: loss_acc / seen.max(1) as f64,
            psnr: if mse > 0.0 {
                -10.0 * mse.log10()
            } else {
                f64::INFINITY
            },
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests;
