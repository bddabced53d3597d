use super::*;
use crate::mrnet::{MrNet, StageConfig};
use crate::texio::{self, synth, ColorSpace, ImageGrid, Rect};

fn constant_image(h: usize, w: usize, rgb: [f64; 3]) -> ImageGrid {
    let mut img = ImageGrid::new(h, w, 3, Rect::symmetric_unit());
    for px in img.data.chunks_exact_mut(3) {
        px.copy_from_slice(&rgb);
    }
    img
}

fn tiny_net(seed: u64) -> MrNet {
    let configs = vec![StageConfig {
        band: (1, 1),
        freq_count: 4,
        hidden_widths: vec![],
    }];
    MrNet::init(&configs, [2.0, 2.0], 3, seed).unwrap()
}

#[test]
fn fit_constant_target_reaches_60db() {
    let data = constant_image(16, 16, [0.3, 0.6, 0.9]);
    let mut net = tiny_net(1);
    let cfg = TrainConfig {
        mode: TrainMode::Fit,
        epochs: 200,
        batch_pixels: 256,
        learning_rate: 0.05,
        seed: 7,
        color_space: ColorSpace::Rgb,
        ..TrainConfig::default()
    };
    let report = train(&mut net, &data, &cfg).unwrap();
    assert!(
        report.final_psnr >= 60.0,
        "constant fit reached only {:.2} dB",
        report.final_psnr
    );
}

#[test]
fn fit_pure_harmonic_reaches_50db() {
    // 0.5 + 0.45 sin(2 pi x) on [0,1]^2 with unit period: the target lies
    // in the span of a shallow band-(1,1) stage, so the fit is a convex
    // least-squares problem the optimizer must essentially solve.
    let data = synth::harmonic_target(64);
    let configs = vec![StageConfig {
        band: (1, 1),
        freq_count: 4,
        hidden_widths: vec![],
    }];
    let mut net = MrNet::init(&configs, [1.0, 1.0], 1, 3).unwrap();
    let cfg = TrainConfig {
        mode: TrainMode::Fit,
        epochs: 2000,
        batch_pixels: 4096,
        learning_rate: 0.02,
        seed: 5,
        color_space: ColorSpace::Rgb,
        ..TrainConfig::default()
    };
    let report = train(&mut net, &data, &cfg).unwrap();
    assert!(
        report.final_psnr >= 50.0,
        "harmonic fit reached only {:.2} dB",
        report.final_psnr
    );
}

#[test]
fn training_is_bitwise_deterministic() {
    let data = synth::periodic_texture(32, 11);
    let run = || {
        let configs = vec![StageConfig {
            band: (3, 3),
            freq_count: 12,
            hidden_widths: vec![8],
        }];
        let mut net = MrNet::init(&configs, [2.0, 2.0], 3, 21).unwrap();
        let cfg = TrainConfig {
            mode: TrainMode::Fit,
            epochs: 5,
            batch_pixels: 300,
            learning_rate: 1e-3,
            seed: 13,
            ..TrainConfig::default()
        };
        let report = train(&mut net, &data, &cfg).unwrap();
        let losses: Vec<f64> = report.records.iter().map(|r| r.loss).collect();
        (losses, net.stage(0).phi().data().to_vec())
    };
    let (l1, p1) = run();
    let (l2, p2) = run();
    assert_eq!(l1, l2, "loss curves must match bitwise");
    assert_eq!(p1, p2, "parameters must match bitwise");
}

#[test]
fn dropped_pixels_never_contribute() {
    // Zeroing the dropped pixels' colors changes nothing, bitwise.
    let data = synth::repeat_texture(32, 2);
    let drop = periodic_class_mask(32, 32, (2, 2), 77).unwrap();
    let mut poisoned = data.clone();
    for i in 0..32 {
        for j in 0..32 {
            if drop.get(i, j) == 1.0 {
                for c in 0..3 {
                    poisoned.set(i, j, c, 0.0);
                }
            }
        }
    }

    let run = |img: &ImageGrid| {
        let configs = vec![StageConfig {
            band: (2, 2),
            freq_count: 8,
            hidden_widths: vec![6],
        }];
        let mut net = MrNet::init(&configs, [1.0, 1.0], 3, 5).unwrap();
        let cfg = TrainConfig {
            mode: TrainMode::Fit,
            epochs: 1,
            batch_pixels: 128,
            learning_rate: 1e-3,
            seed: 99,
            drop_mask: Some(drop.clone()),
            ..TrainConfig::default()
        };
        train(&mut net, img, &cfg).unwrap();
        net.stage(0).output_layer().w.data().to_vec()
    };
    assert_eq!(run(&data), run(&poisoned));
}

#[test]
fn frozen_frequencies_survive_training() {
    let data = synth::periodic_texture(32, 8);
    let configs = vec![StageConfig {
        band: (2, 2),
        freq_count: 6,
        hidden_widths: vec![6],
    }];
    let mut net = MrNet::init(&configs, [2.0, 2.0], 3, 31).unwrap();
    let before = net.stage(0).frequency_set().unwrap().multipliers().to_vec();
    let cfg = TrainConfig {
        mode: TrainMode::Fit,
        epochs: 10,
        batch_pixels: 512,
        learning_rate: 1e-2,
        seed: 3,
        ..TrainConfig::default()
    };
    train(&mut net, &data, &cfg).unwrap();
    let after = net.stage(0).frequency_set().unwrap().multipliers().to_vec();
    assert_eq!(before, after, "K must be bit-for-bit unchanged");

    // And the net is still periodic to the same bound.
    let pts: Vec<[f64; 2]> = (0..200)
        .map(|i| [(i as f64 * 0.37) % 7.0 - 3.5, (i as f64 * 0.61) % 7.0 - 3.5])
        .collect();
    let shifted: Vec<[f64; 2]> = pts.iter().map(|p| [p[0] + 2.0, p[1] + 2.0]).collect();
    let a = net.eval(&pts, 1.0);
    let b = net.eval(&shifted, 1.0);
    let max = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(max <= 1e-9, "periodicity after training: {max}");
}

#[test]
fn seamless_reduces_seam_score() {
    // A non-tileable patch trains into a tile whose wrap seam is close to
    // the interior statistics.
    let data = synth::nontileable_patch(48, 4);
    assert!(texio::seam_score(&data) > 4.0);

    let configs = vec![StageConfig {
        band: (6, 6),
        freq_count: 40,
        hidden_widths: vec![24],
    }];
    let mut net = MrNet::init(&configs, [2.0, 2.0], 3, 17).unwrap();
    let cfg = TrainConfig {
        mode: TrainMode::Seamless,
        epochs: 150,
        batch_pixels: 48 * 48,
        learning_rate: 5e-3,
        seed: 23,
        color_space: ColorSpace::Ycbcr,
        mask: MaskSpec::Soft { gamma: 2.0, p: 2.0 },
        ..TrainConfig::default()
    };
    train(&mut net, &data, &cfg).unwrap();

    let tile = texio::sample_grid(&net, data.domain, 48, 48, 1.0, ColorSpace::Ycbcr);
    let score = texio::seam_score(&tile);
    assert!(score <= 2.0, "seam score after seamless training: {score}");
}

#[test]
fn lambda_of_one_warns_and_anchors() {
    let data = synth::nontileable_patch(16, 5);
    let configs = vec![StageConfig {
        band: (2, 2),
        freq_count: 8,
        hidden_widths: vec![6],
    }];
    let mut net = MrNet::init(&configs, [2.0, 2.0], 3, 1).unwrap();
    let cfg = TrainConfig {
        mode: TrainMode::Seamless,
        epochs: 2,
        batch_pixels: 256,
        learning_rate: 1e-3,
        seed: 0,
        // Margin of half the size makes the binary mask all ones.
        mask: MaskSpec::Binary { margin: 8 },
        ..TrainConfig::default()
    };
    let report = train(&mut net, &data, &cfg).unwrap();
    assert!(report
        .warnings
        .iter()
        .any(|w| w.contains("anchoring")), "{:?}", report.warnings);
}

#[test]
fn report_csv_format() {
    let report = TrainReport {
        records: vec![
            EpochRecord {
                epoch: 1,
                loss: 0.5,
                psnr: 10.0,
            },
            EpochRecord {
                epoch: 2,
                loss: 0.25,
                psnr: 13.0,
            },
        ],
        final_psnr: 13.0,
        wall_seconds: 0.1,
        seed: 4,
        warnings: vec![],
    };
    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epoch,loss,psnr"));
    assert!(lines.next().unwrap().starts_with("1,"));
    assert!(lines.next().unwrap().starts_with("2,"));
}

#[test]
fn validate_rejects_mismatches() {
    let data = constant_image(16, 16, [0.5; 3]);
    let mut net = tiny_net(0);

    let bad_epochs = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    assert!(train(&mut net, &data, &bad_epochs).is_err());

    // Domain not a whole number of periods.
    let mut odd = data.clone();
    odd.domain = Rect::new(-1.0, -1.0, 1.4, 1.0);
    assert!(train(&mut net, &odd, &TrainConfig::default()).is_err());

    // YCbCr needs three channels.
    let gray = ImageGrid::new(16, 16, 1, Rect::symmetric_unit());
    assert!(matches!(
        train(&mut net, &gray, &TrainConfig::default()),
        Err(TrainError::BadConfig(_))
    ));
}

#[test]
fn rendered_guidance_approximates_network_jacobian() {
    // Pixel-anchoring invariant: sampling a smooth net onto a grid and
    // taking wrap central differences approximates the analytic Jacobian
    // at cell centers with O(1/R) error.
    let configs = vec![StageConfig {
        band: (2, 2),
        freq_count: 6,
        hidden_widths: vec![],
    }];
    let mut net = MrNet::init(&configs, [2.0, 2.0], 3, 12).unwrap();
    // Keep outputs well inside [0,1] so export clamping is inactive.
    {
        let mut stage = net.stage_mut(0);
        let params = stage.trainable_params_mut();
        for p in params {
            for v in p.data_mut() {
                *v *= 0.05;
            }
        }
        let bias = stage.trainable_params_mut();
        let c0 = bias.into_iter().last().unwrap();
        for v in c0.data_mut() {
            *v = 0.5;
        }
    }

    let r = 512;
    let img = texio::sample_grid(&net, Rect::symmetric_unit(), r, r, 1.0, ColorSpace::Rgb);
    let guidance = guidance_from_image(&img, true);
    let centers = img.centers();
    let jac = net.stage(0).jacobian_eval(&centers);

    let mut num = 0.0;
    let mut den = 0.0;
    for p in 0..centers.len() {
        for c in 0..3 {
            for axis in 0..2 {
                let g = guidance.get(p / r, p % r, c, axis);
                let j = jac[(p * 3 + c) * 2 + axis];
                num += (g - j) * (g - j);
                den += j * j;
            }
        }
    }
    let rel = (num / den.max(1e-30)).sqrt();
    assert!(rel <= 0.05, "relative field error {rel}");
}
