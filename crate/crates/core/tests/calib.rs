//! Temporary calibration harness; run manually, not part of the suite.

use std::time::Instant;

use tileinr::mrnet::{MrNet, StageConfig};
use tileinr::texio::{self, synth, ColorSpace};
use tileinr::trainer::{self, MaskSpec, TrainConfig, TrainMode};

#[test]
#[ignore]
fn calib_fit_256() {
    let data = synth::periodic_texture(256, 2024);
    let configs = vec![
        StageConfig { band: (4, 4), freq_count: 40, hidden_widths: vec![32] },
        StageConfig { band: (16, 16), freq_count: 160, hidden_widths: vec![96] },
        StageConfig { band: (64, 64), freq_count: 512, hidden_widths: vec![128] },
    ];
    let mut net = MrNet::init(&configs, [2.0, 2.0], 3, 7).unwrap();
    let cfg = TrainConfig {
        mode: TrainMode::Fit,
        epochs: 70,
        stage_epochs: Some(vec![120, 80, 45]),
        batch_pixels: 4096,
        learning_rate: 2e-3,
        seed: 11,
        color_space: ColorSpace::Ycbcr,
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let report = trainer::train(&mut net, &data, &cfg).unwrap();
    println!("fit256: final_psnr={:.2} dB wall={:.1}s", report.final_psnr, t0.elapsed().as_secs_f64());
    for r in report.records.iter().step_by(10) {
        println!("  epoch {:>4}: loss {:.3e} psnr {:.2}", r.epoch, r.loss, r.psnr);
    }
}

#[test]
#[ignore]
fn calib_seamless_128() {
    let data = synth::nontileable_patch(128, 77);
    println!("gt seam score: {:.2}", texio::seam_score(&data));
    let configs = vec![StageConfig { band: (12, 12), freq_count: 100, hidden_widths: vec![64] }];
    let mut net = MrNet::init(&configs, [2.0, 2.0], 3, 5).unwrap();
    let cfg = TrainConfig {
        mode: TrainMode::Seamless,
        epochs: 200,
        batch_pixels: 16384,
        learning_rate: 2e-3,
        seed: 9,
        color_space: ColorSpace::Ycbcr,
        mask: MaskSpec::Soft { gamma: 2.0, p: 2.0 },
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let report = trainer::train(&mut net, &data, &cfg).unwrap();
    let tile = texio::sample_grid(&net, data.domain, 128, 128, 1.0, ColorSpace::Ycbcr);
    println!(
        "seamless128: seam={:.3} final_psnr={:.2} wall={:.1}s",
        texio::seam_score(&tile),
        report.final_psnr,
        t0.elapsed().as_secs_f64()
    );
}

#[test]
#[ignore]
fn calib_masked_128() {
    let data = synth::repeat_texture(128, 31);
    let drop = trainer::periodic_class_mask(128, 128, (2, 2), 4242).unwrap();
    let configs = vec![StageConfig { band: (16, 16), freq_count: 160, hidden_widths: vec![64] }];
    let mut net = MrNet::init(&configs, [1.0, 1.0], 3, 6).unwrap();
    let cfg = TrainConfig {
        mode: TrainMode::Fit,
        epochs: 200,
        batch_pixels: 16384,
        learning_rate: 2e-3,
        seed: 8,
        color_space: ColorSpace::Ycbcr,
        drop_mask: Some(drop.clone()),
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let report = trainer::train(&mut net, &data, &cfg).unwrap();

    // PSNR on dropped pixels only, in RGB.
    let pred = texio::sample_grid(&net, data.domain, 128, 128, 1.0, ColorSpace::Ycbcr);
    let mut sse = 0.0;
    let mut count = 0usize;
    for i in 0..128 {
        for j in 0..128 {
            if drop.get(i, j) == 1.0 {
                for c in 0..3 {
                    let d = pred.get(i, j, c) - data.get(i, j, c);
                    sse += d * d;
                    count += 1;
                }
            }
        }
    }
    let psnr_dropped = -10.0 * (sse / count as f64).log10();
    println!(
        "masked128: dropped_psnr={:.2} full_psnr={:.2} wall={:.1}s",
        psnr_dropped,
        report.final_psnr,
        t0.elapsed().as_secs_f64()
    );
}

#[test]
#[ignore]
fn calib_siren_contrast() {
    let data = synth::periodic_texture(64, 55);
    let cfg = TrainConfig {
        mode: TrainMode::Fit,
        epochs: 120,
        batch_pixels: 4096,
        learning_rate: 2e-3,
        seed: 3,
        color_space: ColorSpace::Ycbcr,
        ..TrainConfig::default()
    };
    let t0 = Instant::now();

    let configs = vec![StageConfig { band: (8, 8), freq_count: 64, hidden_widths: vec![48] }];
    let mut periodic = MrNet::init(&configs, [2.0, 2.0], 3, 12).unwrap();
    let rp = trainer::train(&mut periodic, &data, &cfg).unwrap();

    let siren_stage =
        tileinr::pinr::PeriodicInr::init_siren(64, 30.0, [2.0, 2.0], &[48], 3, 12).unwrap();
    let mut siren = MrNet::from_single(siren_stage);
    let rs = trainer::train(&mut siren, &data, &cfg).unwrap();

    let mut s = 99u64;
    let mut next = || {
        s = s.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = s;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        -9.0 + 18.0 * ((z >> 11) as f64 / (1u64 << 52) as f64)
    };
    let pts: Vec<[f64; 2]> = (0..1000).map(|_| [next(), next()]).collect();
    let shifted: Vec<[f64; 2]> = pts.iter().map(|p| [p[0] + 2.0, p[1] + 2.0]).collect();
    let residual = |net: &MrNet| {
        let a = net.eval(&pts, 1.0);
        let b = net.eval(&shifted, 1.0);
        a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    println!(
        "siren: periodic_res={:.2e} siren_res={:.2e} psnr_p={:.1} psnr_s={:.1} wall={:.1}s",
        residual(&periodic),
        residual(&siren),
        rp.final_psnr,
        rs.final_psnr,
        t0.elapsed().as_secs_f64()
    );
}
