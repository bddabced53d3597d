//! Pixel-space Poisson solvers for the two classical seamless-tile
//! strategies: solving on the torus against a target gradient field, and
//! averaging opposite borders into a Dirichlet problem.
//!
//! Discretization pairs forward differences (gradient) with backward
//! differences (divergence), whose composition is exactly the periodic
//! 5-point Laplacian; with that pairing the torus solve recovers a grid
//! function from its own wrap gradient up to the anchored constant.

use thiserror::Error;

use crate::texio::ImageGrid;
use crate::trainer::GuidanceField;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("conjugate gradient did not converge within {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("invalid solver input: {0}")]
    BadInput(String),
}

/// Forward wrap differences of an image in color units per domain length:
/// the discrete gradient whose primitive [`solve_torus`] recovers exactly.
pub fn wrap_gradient(img: &ImageGrid) -> GuidanceField {
    let (h, w, c) = (img.h, img.w, img.channels);
    let dx = img.domain.width() / w as f64;
    let dy = img.domain.height() / h as f64;
    let mut values = vec![0.0; h * w * c * 2];
    for i in 0..h {
        for j in 0..w {
            for ch in 0..c {
                let base = ((i * w + j) * c + ch) * 2;
                values[base] = (img.get(i, (j + 1) % w, ch) - img.get(i, j, ch)) / dx;
                values[base + 1] = (img.get((i + 1) % h, j, ch) - img.get(i, j, ch)) / dy;
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

/// Like [`wrap_gradient`] but with the seam-crossing links replaced by the
/// average of the two adjacent interior gradients, so the field is no
/// longer integrable to the original seam and the solve diffuses the
/// mismatch instead of reproducing it.
pub fn seam_muted_gradient(img: &ImageGrid) -> GuidanceField {
    let mut g = wrap_gradient(img);
    let (h, w, c) = (g.h, g.w, g.channels);
    let at = |i: usize, j: usize, ch: usize, axis: usize| ((i * w + j) * c + ch) * 2 + axis;
    for i in 0..h {
        for ch in 0..c {
            let repl = 0.5 * (g.values[at(i, w - 2, ch, 0)] + g.values[at(i, 0, ch, 0)]);
            g.values[at(i, w - 1, ch, 0)] = repl;
        }
    }
    for j in 0..w {
        for ch in 0..c {
            let repl = 0.5 * (g.values[at(h - 2, j, ch, 1)] + g.values[at(0, j, ch, 1)]);
            g.values[at(h - 1, j, ch, 1)] = repl;
        }
    }
    g
}

/// Conjugate gradient on a symmetric positive (semi)definite operator.
/// Returns the solution and the final relative residual.
fn cg<F>(apply: F, rhs: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, f64, usize)
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rhs_norm == 0.0 {
        return (x, 0.0, 0);
    }
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    for iter in 0..max_iter {
        if rs.sqrt() <= tol * rhs_norm {
            return (x, rs.sqrt() / rhs_norm, iter);
        }
        let ap = apply(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap.abs() < 1e-300 {
            break;
        }
        let alpha = rs / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rs_new / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
    (x, rs.sqrt() / rhs_norm, max_iter)
}

// 4u - sum of wrap neighbors: the negated periodic 5-point Laplacian,
// symmetric positive semidefinite with a constant nullspace.
fn neg_laplacian_torus(u: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for i in 0..h {
        let up = (i + h - 1) % h;
        let down = (i + 1) % h;
        for j in 0..w {
            let left = (j + w - 1) % w;
            let right = (j + 1) % w;
            out[i * w + j] = 4.0 * u[i * w + j]
                - u[up * w + j]
                - u[down * w + j]
                - u[i * w + left]
                - u[i * w + right];
        }
    }
    out
}

/// Solve `laplacian(u) = div(U)` per channel on the torus with the
/// constant nullspace fixed by setting each channel's mean to `mean`.
/// Incompatible right-hand sides are projected (mean removed) first.
pub fn solve_torus(
    u: &GuidanceField,
    mean: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<ImageGrid, SolveError> {
    if tol <= 0.0 {
        return Err(SolveError::BadInput("tolerance must be positive".into()));
    }
    if mean.len() != u.channels {
        return Err(SolveError::BadInput(format!(
            "{} channel means for a {}-channel field",
            mean.len(),
            u.channels
        )));
    }
    let (h, w, c) = (u.h, u.w, u.channels);
    let dx = u.domain.width() / w as f64;
    let dy = u.domain.height() / h as f64;
    let mut out = ImageGrid::new(h, w, c, u.domain);

    for ch in 0..c {
        // Backward-difference divergence of the field in pixel units.
        let mut rhs = vec![0.0; h * w];
        for i in 0..h {
            let up = (i + h - 1) % h;
            for j in 0..w {
                let left = (j + w - 1) % w;
                let gx_here = u.get(i, j, ch, 0) * dx;
                let gx_left = u.get(i, left, ch, 0) * dx;
                let gy_here = u.get(i, j, ch, 1) * dy;
                let gy_up = u.get(up, j, ch, 1) * dy;
                rhs[i * w + j] = gx_here - gx_left + gy_here - gy_up;
            }
        }
        // Project out the incompatible mean so the system is consistent,
        // and negate to match the positive semidefinite operator.
        let rhs_mean: f64 = rhs.iter().sum::<f64>() / rhs.len() as f64;
        for v in &mut rhs {
            *v = -(*v - rhs_mean);
        }

        let (mut x, residual, iterations) =
            cg(|v| neg_laplacian_torus(v, h, w), &rhs, tol, max_iter);
        if residual > tol {
            return Err(SolveError::NonConvergence {
                residual,
                iterations,
            });
        }
        let x_mean: f64 = x.iter().sum::<f64>() / x.len() as f64;
        for v in &mut x {
            *v += mean[ch] - x_mean;
        }
        for i in 0..h {
            for j in 0..w {
                out.set(i, j, ch, x[i * w + j]);
            }
        }
    }
    Ok(out)
}

/// Average-border baseline: replace each pair of opposite border pixels by
/// their average (so left = right and top = bottom exactly), then solve
/// the interior Dirichlet problem against the image's own Laplacian.
pub fn solve_average_border(
    img: &ImageGrid,
    tol: f64,
    max_iter: usize,
) -> Result<ImageGrid, SolveError> {
    if img.h < 3 || img.w < 3 {
        return Err(SolveError::BadInput(format!(
            "need at least 3x3 pixels, got {}x{}",
            img.h, img.w
        )));
    }
    if tol <= 0.0 {
        return Err(SolveError::BadInput("tolerance must be positive".into()));
    }
    let (h, w, c) = (img.h, img.w, img.channels);
    let mut out = img.clone();

    // Opposite-edge averaging; corners end up as the mean of all four.
    for i in 0..h {
        for ch in 0..c {
            let avg = 0.5 * (out.get(i, 0, ch) + out.get(i, w - 1, ch));
            out.set(i, 0, ch, avg);
            out.set(i, w - 1, ch, avg);
        }
    }
    for j in 0..w {
        for ch in 0..c {
            let avg = 0.5 * (out.get(0, j, ch) + out.get(h - 1, j, ch));
            out.set(0, j, ch, avg);
            out.set(h - 1, j, ch, avg);
        }
    }

    let (ih, iw) = (h - 2, w - 2);
    let idx = |i: usize, j: usize| (i - 1) * iw + (j - 1);
    for ch in 0..c {
        // rhs: interior 5-point Laplacian of the original image (the
        // divergence of its non-wrap forward gradient), negated for the
        // positive definite operator, plus boundary contributions.
        let mut rhs = vec![0.0; ih * iw];
        for i in 1..h - 1 {
            for j in 1..w - 1 {
                let lap = img.get(i - 1, j, ch)
                    + img.get(i + 1, j, ch)
                    + img.get(i, j - 1, ch)
                    + img.get(i, j + 1, ch)
                    - 4.0 * img.get(i, j, ch);
                let mut b = -lap;
                if i == 1 {
                    b += out.get(0, j, ch);
                }
                if i == h - 2 {
                    b += out.get(h - 1, j, ch);
                }
                if j == 1 {
                    b += out.get(i, 0, ch);
                }
                if j == w - 2 {
                    b += out.get(i, w - 1, ch);
                }
                rhs[idx(i, j)] = b;
            }
        }

        let apply = |v: &[f64]| -> Vec<f64> {
            let mut av = vec![0.0; ih * iw];
            for i in 1..h - 1 {
                for j in 1..w - 1 {
                    let mut acc = 4.0 * v[idx(i, j)];
                    if i > 1 {
                        acc -= v[idx(i - 1, j)];
                    }
                    if i < h - 2 {
                        acc -= v[idx(i + 1, j)];
                    }
                    if j > 1 {
                        acc -= v[idx(i, j - 1)];
                    }
                    if j < w - 2 {
                        acc -= v[idx(i, j + 1)];
                    }
                    av[idx(i, j)] = acc;
                }
            }
            av
        };

        let (x, residual, iterations) = cg(apply, &rhs, tol, max_iter);
        if residual > tol {
            return Err(SolveError::NonConvergence {
                residual,
                iterations,
            });
        }
        for i in 1..h - 1 {
            for j in 1..w - 1 {
                out.set(i, j, ch, x[idx(i, j)]);
            }
        }
    }
    Ok(out)
}
