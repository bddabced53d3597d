//! Mask fields (the lambda weight of the combined loss, and pixel drop
//! indicators) plus the target Jacobian field.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::texio::ImageGrid;

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    Binary,
    Soft,
    PeriodicClass,
    None,
}

/// `H x W` weights in `[0, 1]` aligned to the training grid. For
/// `PeriodicClass` the value is a drop indicator: 1 excludes the pixel.
#[derive(Debug, Clone)]
pub struct MaskField {
    pub h: usize,
    pub w: usize,
    pub values: Vec<f64>,
    pub kind: MaskKind,
}

impl MaskField {
    pub fn zeros(h: usize, w: usize) -> Self {
        MaskField {
            h,
            w,
            values: vec![0.0; h * w],
            kind: MaskKind::None,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.w + j]
    }

    /// Render as a grayscale grid for inspection or export.
    pub fn to_image(&self) -> ImageGrid {
        ImageGrid::from_data(
            self.h,
            self.w,
            1,
            self.values.clone(),
            crate::texio::Rect::symmetric_unit(),
        )
        .expect("mask dims")
    }
}

/// Target Jacobian per pixel, channel, and spatial axis, in color units
/// per domain length. Layout `((i * W + j) * C + c) * 2 + axis`.
#[derive(Debug, Clone)]
pub struct GuidanceField {
    pub h: usize,
    pub w: usize,
    pub channels: usize,
    pub values: Vec<f64>,
    pub domain: crate::texio::Rect,
}

impl GuidanceField {
    #[inline]
    pub fn get(&self, i: usize, j: usize, c: usize, axis: usize) -> f64 {
        self.values[((i * self.w + j) * self.channels + c) * 2 + axis]
    }
}

/// Central finite differences of an image, scaled to color units per
/// domain length. With `period_aware` the indexing wraps, so the field's
/// primitive is tileable by construction; otherwise edges fall back to
/// one-sided differences.
pub fn guidance_from_image(img: &ImageGrid, period_aware: bool) -> GuidanceField {
    let (h, w, c) = (img.h, img.w, img.channels);
    let dx = img.domain.width() / w as f64;
    let dy = img.domain.height() / h as f64;
    let mut values = vec![0.0; h * w * c * 2];
    for i in 0..h {
        for j in 0..w {
            for ch in 0..c {
                let gx = if period_aware {
                    (img.get(i, (j + 1) % w, ch) - img.get(i, (j + w - 1) % w, ch)) / (2.0 * dx)
                } else if j == 0 {
                    (img.get(i, 1, ch) - img.get(i, 0, ch)) / dx
                } else if j == w - 1 {
                    (img.get(i, w - 1, ch) - img.get(i, w - 2, ch)) / dx
                } else {
                    (img.get(i, j + 1, ch) - img.get(i, j - 1, ch)) / (2.0 * dx)
                };
                let gy = if period_aware {
                    (img.get((i + 1) % h, j, ch) - img.get((i + h - 1) % h, j, ch)) / (2.0 * dy)
                } else if i == 0 {
                    (img.get(1, j, ch) - img.get(0, j, ch)) / dy
                } else if i == h - 1 {
                    (img.get(h - 1, j, ch) - img.get(h - 2, j, ch)) / dy
                } else {
                    (img.get(i + 1, j, ch) - img.get(i - 1, j, ch)) / (2.0 * dy)
                };
                let base = ((i * w + j) * c + ch) * 2;
                values[base] = gx;
                values[base + 1] = gy;
            }
        }
    }
    GuidanceField {
        h,
        w,
        channels: c,
        values,
        domain: img.domain,
    }
}

/// Soft radial mask: `clamp01(|x - center|_p / R)^gamma` where `R` is the
/// `L_p` distance from the center to a corner pixel center. Zero at the
/// center, one at the corners, monotone along rays.
pub fn soft_mask(h: usize, w: usize, gamma: f64, p: f64) -> Result<MaskField, TrainError> {
    if gamma <= 0.0 {
        return Err(TrainError::BadConfig(format!(
            "soft mask exponent must be positive, got {gamma}"
        )));
    }
    if p < 1.0 {
        return Err(TrainError::BadConfig(format!(
            "L_p norm order must be >= 1, got {p}"
        )));
    }
    let norm = |u: f64, v: f64| -> f64 {
        if p.is_infinite() {
            u.abs().max(v.abs())
        } else {
            (u.abs().powf(p) + v.abs().powf(p)).powf(1.0 / p)
        }
    };
    // Pixel-center offsets in the grid's own normalized [-1, 1] geometry.
    let umax = 1.0 - 1.0 / w as f64;
    let vmax = 1.0 - 1.0 / h as f64;
    let radius = norm(umax, vmax);
    let mut values = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let u = 2.0 * (j as f64 + 0.5) / w as f64 - 1.0;
            let v = 2.0 * (i as f64 + 0.5) / h as f64 - 1.0;
            values[i * w + j] = (norm(u, v) / radius).clamp(0.0, 1.0).powf(gamma);
        }
    }
    Ok(MaskField {
        h,
        w,
        values,
        kind: MaskKind::Soft,
    })
}

/// One inside a `margin`-pixel border, zero elsewhere. A margin of half
/// the smaller dimension covers everything.
pub fn binary_border_mask(h: usize, w: usize, margin: usize) -> Result<MaskField, TrainError> {
    if margin == 0 || 2 * margin > h.min(w) {
        return Err(TrainError::BadConfig(format!(
            "border margin {margin} out of range for {h}x{w}"
        )));
    }
    let mut values = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            if i < margin || i >= h - margin || j < margin || j >= w - margin {
                values[i * w + j] = 1.0;
            }
        }
    }
    Ok(MaskField {
        h,
        w,
        values,
        kind: MaskKind::Binary,
    })
}

pub(super) fn check_periodic_class(
    h: usize,
    w: usize,
    repeats: (usize, usize),
) -> Result<(), String> {
    let (r1, r2) = repeats;
    if r1 == 0 || r2 == 0 {
        return Err("repeat counts must be positive".into());
    }
    if r1 * r2 == 1 {
        return Err("(1, 1) repeats would drop every pixel".into());
    }
    if h % r1 != 0 || w % r2 != 0 {
        return Err(format!("{h}x{w} grid is not divisible by {r1}x{r2} repeats"));
    }
    Ok(())
}

/// Drop indicator: for every residue class of the `(H/r1, W/r2)`
/// translation lattice, exactly one of its `r1 * r2` equivalent pixels is
/// dropped (value 1), a seeded choice. Dropped fraction is `1/(r1 * r2)`.
pub fn periodic_class_mask(
    h: usize,
    w: usize,
    repeats: (usize, usize),
    seed: u64,
) -> Result<MaskField, TrainError> {
    check_periodic_class(h, w, repeats).map_err(TrainError::BadConfig)?;
    let (r1, r2) = repeats;
    let (ph, pw) = (h / r1, w / r2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; h * w];
    for i0 in 0..ph {
        for j0 in 0..pw {
            let pick = rng.random_range(0..r1 * r2);
            let (a, b) = (pick / r2, pick % r2);
            values[(i0 + a * ph) * w + (j0 + b * pw)] = 1.0;
        }
    }
    Ok(MaskField {
        h,
        w,
        values,
        kind: MaskKind::PeriodicClass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::texio::Rect;

    #[test]
    fn guidance_constant_image_is_zero() {
        let img = ImageGrid::from_data(4, 4, 2, vec![0.7; 32], Rect::symmetric_unit()).unwrap();
        for period_aware in [true, false] {
            let g = guidance_from_image(&img, period_aware);
            assert!(g.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn guidance_ramp_wrap_stencil() {
        // img(i, j) = j / W: interior d/dx = (2/W) / (2 dx) = 1/extent;
        // the seam column carries the wrap jump.
        let w = 8;
        let extent = 2.0;
        let mut img = ImageGrid::new(4, w, 1, Rect::symmetric_unit());
        for i in 0..4 {
            for j in 0..w {
                img.set(i, j, 0, j as f64 / w as f64);
            }
        }
        let g = guidance_from_image(&img, true);
        let dx = extent / w as f64;
        for j in 1..w - 1 {
            let want = 1.0 / extent;
            assert!((g.get(0, j, 0, 0) - want).abs() <= 1e-12, "column {j}");
        }
        // Closed-form evaluation of the wrap stencil at the seam.
        let want_seam = (1.0 / w as f64 - (w as f64 - 1.0) / w as f64) / (2.0 * dx);
        assert!((g.get(0, 0, 0, 0) - want_seam).abs() <= 1e-12);
        assert!((g.get(0, w - 1, 0, 0) - want_seam).abs() <= 1e-12);
        // Vertical derivative of a horizontal ramp is zero.
        assert_eq!(g.get(1, 3, 0, 1), 0.0);
    }

    #[test]
    fn guidance_wrap_equals_clamped_on_truly_periodic_image() {
        // A sampled sinusoid with the grid period: wrap and clamped
        // stencils agree in the interior; compare there.
        let n = 16;
        let mut img = ImageGrid::new(n, n, 1, Rect::symmetric_unit());
        for i in 0..n {
            for j in 0..n {
                let [x, y] = img.pixel_center(i, j);
                img.set(
                    i,
                    j,
                    0,
                    0.5 + 0.25 * (std::f64::consts::PI * x).sin()
                        + 0.2 * (std::f64::consts::PI * y).cos(),
                );
            }
        }
        let a = guidance_from_image(&img, true);
        let b = guidance_from_image(&img, false);
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                for axis in 0..2 {
                    assert!((a.get(i, j, 0, axis) - b.get(i, j, 0, axis)).abs() <= 1e-12);
                }
            }
        }
        // And the wrap stencil at the border matches the interior pattern
        // because the image really is periodic on the grid.
        for j in 0..n {
            for axis in 0..2 {
                let seam = a.get(0, j, 0, axis);
                assert!(seam.is_finite());
            }
        }
    }

    #[test]
    fn soft_mask_center_corner_edge() {
        let m = soft_mask(9, 9, 1.0, 2.0).unwrap();
        assert!(m.get(4, 4) <= 1e-15, "center pixel is 0");
        assert!((m.get(0, 0) - 1.0).abs() <= 1e-12, "corner pixel is 1");
        assert!((m.get(8, 8) - 1.0).abs() <= 1e-12);
        // Midpoint of an edge: |(1,0)| / |(1,1)| = 1/sqrt(2).
        let want = 1.0 / 2.0f64.sqrt();
        assert!((m.get(0, 4) - want).abs() <= 1e-12, "{} vs {want}", m.get(0, 4));
        assert!((m.get(4, 0) - want).abs() <= 1e-12);
    }

    #[test]
    fn soft_mask_monotone_along_rays() {
        let m = soft_mask(17, 17, 2.0, 2.0).unwrap();
        for j in 8..16 {
            assert!(m.get(8, j + 1) >= m.get(8, j));
        }
        for d in 0..8 {
            assert!(m.get(8 + d + 1, 8 + d + 1) >= m.get(8 + d, 8 + d));
        }
        assert!(m.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn binary_mask_counts() {
        let m = binary_border_mask(4, 4, 1).unwrap();
        let ones = m.values.iter().filter(|&&v| v == 1.0).count();
        assert_eq!(ones, 12);
        assert_eq!(m.values.len() - ones, 4);
        assert_eq!(m.get(2, 2), 0.0, "center stays 0");

        // Margin of half the width covers everything.
        let full = binary_border_mask(4, 4, 2).unwrap();
        assert!(full.values.iter().all(|&v| v == 1.0));

        assert!(binary_border_mask(4, 4, 0).is_err());
        assert!(binary_border_mask(4, 4, 3).is_err());
    }

    #[test]
    fn periodic_class_mask_drops_one_per_class() {
        let m = periodic_class_mask(8, 8, (2, 2), 3).unwrap();
        let dropped = m.values.iter().filter(|&&v| v == 1.0).count();
        assert_eq!(dropped, 16, "exactly 1/4 of 64 pixels");
        // Exactly one drop within each residue class.
        for i0 in 0..4 {
            for j0 in 0..4 {
                let count: usize = (0..2)
                    .flat_map(|a| (0..2).map(move |b| (a, b)))
                    .filter(|&(a, b)| m.get(i0 + a * 4, j0 + b * 4) == 1.0)
                    .count();
                assert_eq!(count, 1, "class ({i0}, {j0})");
            }
        }

        let m = periodic_class_mask(4, 4, (2, 1), 9).unwrap();
        let dropped = m.values.iter().filter(|&&v| v == 1.0).count();
        assert_eq!(dropped, 8, "one per class, 8 classes");

        assert!(periodic_class_mask(4, 4, (1, 1), 0).is_err());
        assert!(periodic_class_mask(5, 4, (2, 2), 0).is_err());
    }
}
