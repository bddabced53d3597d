//! Procedural test textures: deterministic band-limited patterns used by
//! the test suite, the bundled assets, and the examples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ImageGrid, Rect};

struct Harmonic {
    k: [i32; 2],
    amp: f64,
    phase: f64,
}

/// Sample a sum of harmonics with angular frequencies `k * 2*pi/P` on the
/// pixel centers of `domain`.
fn render(
    res: usize,
    domain: Rect,
    period: [f64; 2],
    luma: &[Harmonic],
    per_channel: &[Vec<Harmonic>],
    channel_scales: &[f64],
) -> ImageGrid {
    let channels = channel_scales.len();
    let mut img = ImageGrid::new(res, res, channels, domain);
    let eval = |hs: &[Harmonic], x: f64, y: f64| -> f64 {
        hs.iter()
            .map(|h| {
                let wx = h.k[0] as f64 * 2.0 * std::f64::consts::PI / period[0];
                let wy = h.k[1] as f64 * 2.0 * std::f64::consts::PI / period[1];
                h.amp * (wx * x + wy * y + h.phase).sin()
            })
            .sum()
    };
    for i in 0..res {
        for j in 0..res {
            let [x, y] = img.pixel_center(i, j);
            let base = eval(luma, x, y);
            for c in 0..channels {
                let v = 0.5 + channel_scales[c] * base + eval(&per_channel[c], x, y);
                img.set(i, j, c, v);
            }
        }
    }
    img
}

fn normalize_range(img: &mut ImageGrid, lo: f64, hi: f64) {
    let min = img.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = img.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if max > min { max - min } else { 1.0 };
    for v in &mut img.data {
        *v = lo + (hi - lo) * (*v - min) / span;
    }
}

fn spectrum(rng: &mut ChaCha8Rng, low_norm2: i64, tail: usize, tail_band: i32) -> Vec<Harmonic> {
    let mut hs = Vec::new();
    // Every half-plane multiplier up to the low-frequency cutoff.
    for k1 in 0..=((low_norm2 as f64).sqrt() as i32) {
        for k2 in -((low_norm2 as f64).sqrt() as i32)..=((low_norm2 as f64).sqrt() as i32) {
            if (k1 > 0 || k2 > 0) && (k1 as i64 * k1 as i64 + k2 as i64 * k2 as i64) <= low_norm2 {
                let n2 = (k1 * k1 + k2 * k2) as f64;
                hs.push(Harmonic {
                    k: [k1, k2],
                    amp: rng.random_range(0.35..1.0) / (1.0 + n2).powf(0.8)
                        * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                    phase: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                });
            }
        }
    }
    // A sparse higher-frequency tail for texture detail.
    for _ in 0..tail {
        let k1 = rng.random_range(0..=tail_band);
        let k2 = rng.random_range(-tail_band..=tail_band);
        if k1 == 0 && k2 <= 0 {
            continue;
        }
        let n2 = (k1 * k1 + k2 * k2) as f64;
        hs.push(Harmonic {
            k: [k1, k2],
            amp: rng.random_range(0.2..0.8) / (1.0 + n2),
            phase: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        });
    }
    hs
}

fn channel_detail(rng: &mut ChaCha8Rng, count: usize, band: i32) -> Vec<Harmonic> {
    (0..count)
        .map(|_| {
            let k1 = rng.random_range(0..=band);
            let k2 = if k1 == 0 {
                rng.random_range(1..=band)
            } else {
                rng.random_range(-band..=band)
            };
            Harmonic {
                k: [k1, k2],
                amp: rng.random_range(0.03..0.1),
                phase: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            }
        })
        .collect()
}

/// Periodic RGB texture with period `(2, 2)` on `[-1, 1]^2`: tileable by
/// construction.
pub fn periodic_texture(res: usize, seed: u64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let luma = spectrum(&mut rng, 18, 50, 40);
    let per_channel: Vec<Vec<Harmonic>> =
        (0..3).map(|_| channel_detail(&mut rng, 3, 7)).collect();
    let scales = [0.95, 0.8, 0.7];
    let mut img = render(
        res,
        Rect::symmetric_unit(),
        [2.0, 2.0],
        &luma,
        &per_channel,
        &scales,
    );
    normalize_range(&mut img, 0.04, 0.96);
    img
}

/// RGB texture whose fundamental period is `(1, 1)` sampled on `[-1, 1]^2`,
/// so the pattern repeats 2x2 inside the sample.
pub fn repeat_texture(res: usize, seed: u64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let luma = spectrum(&mut rng, 16, 20, 12);
    let per_channel: Vec<Vec<Harmonic>> =
        (0..3).map(|_| channel_detail(&mut rng, 2, 5)).collect();
    let scales = [0.9, 0.75, 0.85];
    let mut img = render(
        res,
        Rect::symmetric_unit(),
        [1.0, 1.0],
        &luma,
        &per_channel,
        &scales,
    );
    normalize_range(&mut img, 0.05, 0.95);
    img
}

/// Non-tileable RGB patch: a periodic base plus luminance ramps and
/// off-period harmonics, so opposite edges do not match.
pub fn nontileable_patch(res: usize, seed: u64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let luma = spectrum(&mut rng, 13, 24, 20);
    let per_channel: Vec<Vec<Harmonic>> =
        (0..3).map(|_| channel_detail(&mut rng, 2, 6)).collect();
    let scales = [0.85, 0.75, 0.65];
    let mut img = render(
        res,
        Rect::symmetric_unit(),
        [2.0, 2.0],
        &luma,
        &per_channel,
        &scales,
    );
    // Break tileability: smooth ramps plus an incommensurate harmonic.
    let off = 2.6 * std::f64::consts::PI;
    for i in 0..res {
        for j in 0..res {
            let [x, y] = img.pixel_center(i, j);
            let drift = 0.3 * (x + 1.0) / 2.0 + 0.22 * (y + 1.0) / 2.0
                + 0.12 * (off * x + 0.7).sin()
                + 0.08 * (off * 0.8 * y + 1.9).sin();
            for c in 0..3 {
                let k = img.idx(i, j, c);
                img.data[k] += drift * [1.0, 0.9, 0.8][c];
            }
        }
    }
    normalize_range(&mut img, 0.02, 0.98);
    img
}

/// Grayscale `0.5 + 0.45 sin(2 pi x)` on `[0, 1]^2`: a pure harmonic that a
/// shallow network with unit period represents exactly.
pub fn harmonic_target(res: usize) -> ImageGrid {
    let mut img = ImageGrid::new(res, res, 1, Rect::new(0.0, 0.0, 1.0, 1.0));
    for i in 0..res {
        for j in 0..res {
            let [x, _y] = img.pixel_center(i, j);
            img.set(i, j, 0, 0.5 + 0.45 * (2.0 * std::f64::consts::PI * x).sin());
        }
    }
    img
}
