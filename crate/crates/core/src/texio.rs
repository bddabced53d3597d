//! Image I/O, color conversion, metrics, and grid sampling of networks.

pub mod synth;

use std::path::Path;

use thiserror::Error;

use crate::mrnet::MrNet;

#[derive(Debug, Error)]
pub enum TexError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("image format not supported: {0}")]
    Format(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("decode error: {0}")]
    Decode(String),
}

/// Axis-aligned rectangle a grid spans: `(x0, y0)` to `(x1, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    /// The unit square centered at the origin, the default training domain.
    pub fn symmetric_unit() -> Self {
        Rect::new(-1.0, -1.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// Color space a network was trained in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorSpace {
    Rgb,
    Ycbcr,
}

/// `H x W x C` grid of doubles anchored to a spatial rectangle. Pixel
/// `(i, j)` sits at the cell center
/// `x = x0 + (j + 0.5) * (x1 - x0) / W`, `y = y0 + (i + 0.5) * (y1 - y0) / H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub h: usize,
    pub w: usize,
    pub channels: usize,
    pub data: Vec<f64>,
    pub domain: Rect,
}

impl ImageGrid {
    pub fn new(h: usize, w: usize, channels: usize, domain: Rect) -> Self {
        ImageGrid {
            h,
            w,
            channels,
            data: vec![0.0; h * w * channels],
            domain,
        }
    }

    pub fn from_data(
        h: usize,
        w: usize,
        channels: usize,
        data: Vec<f64>,
        domain: Rect,
    ) -> Result<Self, TexError> {
        if data.len() != h * w * channels {
            return Err(TexError::Shape(format!(
                "{h}x{w}x{channels} grid needs {} values, got {}",
                h * w * channels,
                data.len()
            )));
        }
        Ok(ImageGrid {
            h,
            w,
            channels,
            data,
            domain,
        })
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, c: usize) -> usize {
        (i * self.w + j) * self.channels + c
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        self.data[self.idx(i, j, c)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, c: usize, v: f64) {
        let k = self.idx(i, j, c);
        self.data[k] = v;
    }

    /// Spatial position of the cell center of pixel `(i, j)`.
    pub fn pixel_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.domain.x0 + (j as f64 + 0.5) * self.domain.width() / self.w as f64,
            self.domain.y0 + (i as f64 + 0.5) * self.domain.height() / self.h as f64,
        ]
    }

    /// All cell centers in row-major order.
    pub fn centers(&self) -> Vec<[f64; 2]> {
        let mut pts = Vec::with_capacity(self.h * self.w);
        for i in 0..self.h {
            for j in 0..self.w {
                pts.push(self.pixel_center(i, j));
            }
        }
        pts
    }

    pub fn clamp01_in_place(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }
}

/// Load an 8-bit RGB or grayscale PNG, mapping samples to `v / 255`.
pub fn load_png(path: &Path) -> Result<ImageGrid, TexError> {
    let img = image::ImageReader::open(path)?
        .decode()
        .map_err(|e| TexError::Decode(e.to_string()))?;
    let (w, h, channels, raw): (usize, usize, usize, Vec<u8>) = match img {
        image::DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            (w as usize, h as usize, 1, g.into_raw())
        }
        image::DynamicImage::ImageRgb8(g) => {
            let (w, h) = g.dimensions();
            (w as usize, h as usize, 3, g.into_raw())
        }
        other => {
            return Err(TexError::Format(format!(
                "expected 8-bit RGB or grayscale, got {:?}",
                other.color()
            )))
        }
    };
    let data: Vec<f64> = raw.iter().map(|&v| v as f64 / 255.0).collect();
    ImageGrid::from_data(h, w, channels, data, Rect::symmetric_unit())
}

/// Save as 8-bit PNG: `round(v * 255)` clamped. Grids with one channel
/// become grayscale, three channels RGB.
pub fn save_png(img: &ImageGrid, path: &Path) -> Result<(), TexError> {
    let quantize = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let raw: Vec<u8> = img.data.iter().map(|&v| quantize(v)).collect();
    let (w, h) = (img.w as u32, img.h as u32);
    match img.channels {
        1 => image::GrayImage::from_raw(w, h, raw)
            .expect("buffer sized")
            .save(path)
            .map_err(|e| TexError::Decode(e.to_string())),
        3 => image::RgbImage::from_raw(w, h, raw)
            .expect("buffer sized")
            .save(path)
            .map_err(|e| TexError::Decode(e.to_string())),
        c => Err(TexError::Format(format!(
            "can only save 1- or 3-channel grids, got {c}"
        ))),
    }
}

// BT.601 full-range coefficients.
const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;

/// RGB to BT.601 full-range YCbCr; channels stay in `[0, 1]` for inputs
/// in `[0, 1]`.
pub fn rgb_to_ycbcr(img: &ImageGrid) -> Result<ImageGrid, TexError> {
    if img.channels != 3 {
        return Err(TexError::Shape(format!(
            "YCbCr conversion needs 3 channels, got {}",
            img.channels
        )));
    }
    let mut out = img.clone();
    for px in out.data.chunks_exact_mut(3) {
        let (r, g, b) = (px[0], px[1], px[2]);
        let y = KR * r + KG * g + KB * b;
        px[0] = y;
        px[1] = 0.5 + (b - y) * 0.5 / (1.0 - KB);
        px[2] = 0.5 + (r - y) * 0.5 / (1.0 - KR);
    }
    Ok(out)
}

/// Inverse of [`rgb_to_ycbcr`]; composes to identity within 1e-12.
pub fn ycbcr_to_rgb(img: &ImageGrid) -> Result<ImageGrid, TexError> {
    if img.channels != 3 {
        return Err(TexError::Shape(format!(
            "YCbCr conversion needs 3 channels, got {}",
            img.channels
        )));
    }
    let mut out = img.clone();
    for px in out.data.chunks_exact_mut(3) {
        let (y, cb, cr) = (px[0], px[1], px[2]);
        let r = y + (cr - 0.5) * (1.0 - KR) / 0.5;
        let b = y + (cb - 0.5) * (1.0 - KB) / 0.5;
        let g = (y - KR * r - KB * b) / KG;
        px[0] = r;
        px[1] = g;
        px[2] = b;
    }
    Ok(out)
}

/// Peak signal-to-noise ratio in dB with peak 1. Identical images report
/// positive infinity.
pub fn psnr(a: &ImageGrid, b: &ImageGrid) -> Result<f64, TexError> {
    if a.h != b.h || a.w != b.w || a.channels != b.channels {
        return Err(TexError::Shape(format!(
            "psnr needs equal shapes, got {}x{}x{} vs {}x{}x{}",
            a.h, a.w, a.channels, b.h, b.w, b.channels
        )));
    }
    let mse: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Evaluate a network over a grid of cell centers at detail level `t`,
/// converting back to RGB when the net was trained in YCbCr, and clamping
/// to the unit interval.
pub fn sample_grid(
    net: &MrNet,
    domain: Rect,
    h: usize,
    w: usize,
    t: f64,
    net_space: ColorSpace,
) -> ImageGrid {
    let mut img = ImageGrid::new(h, w, net.channels(), domain);
    let pts = img.centers();
    img.data = net.eval(&pts, t);
    if net_space == ColorSpace::Ycbcr && net.channels() == 3 {
        img = ycbcr_to_rgb(&img).expect("3 channels");
    }
    img.clamp01_in_place();
    img
}

/// Per-pixel Frobenius norm of the wrap-around central-difference Jacobian,
/// normalized to `[0, 1]` by its maximum (left at zero for constant images).
pub fn gradient_magnitude(img: &ImageGrid) -> ImageGrid {
    let mut out = ImageGrid::new(img.h, img.w, 1, img.domain);
    let dx = img.domain.width() / img.w as f64;
    let dy = img.domain.height() / img.h as f64;
    for i in 0..img.h {
        let up = (i + img.h - 1) % img.h;
        let down = (i + 1) % img.h;
        for j in 0..img.w {
            let left = (j + img.w - 1) % img.w;
            let right = (j + 1) % img.w;
            let mut sq = 0.0;
            for c in 0..img.channels {
                let gx = (img.get(i, right, c) - img.get(i, left, c)) / (2.0 * dx);
                let gy = (img.get(down, j, c) - img.get(up, j, c)) / (2.0 * dy);
                sq += gx * gx + gy * gy;
            }
            out.set(i, j, 0, sq.sqrt());
        }
    }
    let max = out.data.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        for v in &mut out.data {
            *v /= max;
        }
    }
    out
}

/// Seam score: median wrap-around cross-edge difference magnitude divided
/// by median interior difference magnitude. Near 1 for seamless textures.
pub fn seam_score(img: &ImageGrid) -> f64 {
    let mut cross = Vec::with_capacity(img.h + img.w);
    let mut interior = Vec::with_capacity(2 * img.h * img.w);
    let diff = |a: usize, b: usize| -> f64 {
        let mut sq = 0.0;
        for c in 0..img.channels {
            let d = img.data[a * img.channels + c] - img.data[b * img.channels + c];
            sq += d * d;
        }
        sq.sqrt()
    };
    for i in 0..img.h {
        for j in 0..img.w {
            let here = i * img.w + j;
            let right = i * img.w + (j + 1) % img.w;
            let down = ((i + 1) % img.h) * img.w + j;
            if j + 1 == img.w {
                cross.push(diff(here, right));
            } else {
                interior.push(diff(here, right));
            }
            if i + 1 == img.h {
                cross.push(diff(here, down));
            } else {
                interior.push(diff(here, down));
            }
        }
    }
    let med_cross = median(&mut cross);
    let med_interior = median(&mut interior);
    if med_interior == 0.0 {
        if med_cross == 0.0 {
            return 1.0;
        }
        return f64::INFINITY;
    }
    med_cross / med_interior
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
