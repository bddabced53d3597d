//! Multiresolution target pyramids: separable `[1, 4, 6, 4, 1]/16` blur
//! with wrap-around boundaries, then 2x decimation per level.

use crate::texio::ImageGrid;

use super::{MaskField, TrainError};

/// Ordered targets, level `i` at resolution `full / 2^(N-1-i)`; the last
/// level is the source image.
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<ImageGrid>,
}

impl Pyramid {
    pub fn level(&self, i: usize) -> &ImageGrid {
        &self.levels[i]
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &ImageGrid {
        self.levels.last().expect("non-empty")
    }
}

const KERNEL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

fn blur_wrap(img: &ImageGrid) -> ImageGrid {
    let (h, w, c) = (img.h, img.w, img.channels);
    // Horizontal pass.
    let mut tmp = img.clone();
    for i in 0..h {
        for j in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (t, k) in KERNEL.iter().enumerate() {
                    let jj = (j + w + t - 2) % w;
                    acc += k * img.get(i, jj, ch);
                }
                tmp.set(i, j, ch, acc);
            }
        }
    }
    // Vertical pass.
    let mut out = img.clone();
    for i in 0..h {
        for j in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (t, k) in KERNEL.iter().enumerate() {
                    let ii = (i + h + t - 2) % h;
                    acc += k * tmp.get(ii, j, ch);
                }
                out.set(i, j, ch, acc);
            }
        }
    }
    out
}

fn decimate(img: &ImageGrid) -> ImageGrid {
    let (h2, w2) = (img.h / 2, img.w / 2);
    let mut out = ImageGrid::new(h2, w2, img.channels, img.domain);
    for i in 0..h2 {
        for j in 0..w2 {
            for c in 0..img.channels {
                out.set(i, j, c, img.get(2 * i, 2 * j, c));
            }
        }
    }
    out
}

/// Blur + downsample `n - 1` times; level `n - 1` is the source.
pub fn build_pyramid(img: &ImageGrid, n: usize) -> Result<Pyramid, TrainError> {
    if n == 0 {
        return Err(TrainError::BadConfig("pyramid needs at least one level".into()));
    }
    let mut levels = vec![img.clone()];
    for _ in 1..n {
        let prev = levels.last().expect("non-empty");
        if prev.h / 2 < 8 || prev.w / 2 < 8 {
            return Err(TrainError::BadConfig(format!(
                "pyramid level would fall below 8x8 (from {}x{})",
                prev.h, prev.w
            )));
        }
        levels.push(decimate(&blur_wrap(prev)));
    }
    levels.reverse();
    Ok(Pyramid { levels })
}

/// Pyramid that never mixes dropped pixels into coarser levels: each level
/// is `blur(img * keep) / blur(keep)` (normalized convolution), so coarse
/// targets are functions of kept data alone.
pub(super) fn build_pyramid_masked(
    img: &ImageGrid,
    drop: &MaskField,
    n: usize,
) -> Result<Pyramid, TrainError> {
    if n == 0 {
        return Err(TrainError::BadConfig("pyramid needs at least one level".into()));
    }
    let mut masked = img.clone();
    let mut keep = ImageGrid::new(img.h, img.w, 1, img.domain);
    for i in 0..img.h {
        for j in 0..img.w {
            let kept = if drop.get(i, j) == 0.0 { 1.0 } else { 0.0 };
            keep.set(i, j, 0, kept);
            for c in 0..img.channels {
                let v = img.get(i, j, c) * kept;
                masked.set(i, j, c, v);
            }
        }
    }

    let mut levels = vec![img.clone()];
    for _ in 1..n {
        if masked.h / 2 < 8 || masked.w / 2 < 8 {
            return Err(TrainError::BadConfig(format!(
                "pyramid level would fall below 8x8 (from {}x{})",
                masked.h, masked.w
            )));
        }
        masked = decimate(&blur_wrap(&masked));
        keep = decimate(&blur_wrap(&keep));
        let mut level = masked.clone();
        for i in 0..level.h {
            for j in 0..level.w {
                let kv = keep.get(i, j, 0);
                for c in 0..level.channels {
                    let v = if kv > 1e-12 {
                        masked.get(i, j, c) / kv
                    } else {
                        0.0
                    };
                    level.set(i, j, c, v);
                }
            }
        }
        levels.push(level);
    }
    levels.reverse();
    Ok(Pyramid { levels })
}
