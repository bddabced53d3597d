//! Software rasterizer mapping a trained network onto a parametric torus.
//!
//! Rays are intersected with the torus by sphere marching on its signed
//! distance function with a bracketed bisection refinement, uv coordinates
//! come from the parametric inverse, screen-space uv footprints from
//! neighboring-ray differences, and the footprint picks the continuous
//! detail level like a mip-map chain.

use thiserror::Error;

use crate::mrnet::{blend_weights, MrNet};
use crate::texio::{ycbcr_to_rgb, ColorSpace, ImageGrid, Rect};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid torus geometry: {0}")]
    BadGeometry(String),
    #[error("degenerate camera: {0}")]
    BadCamera(String),
}

/// Torus around the z axis: major radius to the tube center, minor radius
/// of the tube, and uv tiling repeat factors.
#[derive(Debug, Clone, Copy)]
pub struct TorusGeom {
    pub major_radius: f64,
    pub minor_radius: f64,
    pub uv_scale: [f64; 2],
}

impl TorusGeom {
    pub fn new(major_radius: f64, minor_radius: f64, uv_scale: [f64; 2]) -> Result<Self, RenderError> {
        if !(major_radius > minor_radius && minor_radius > 0.0) {
            return Err(RenderError::BadGeometry(format!(
                "need major > minor > 0, got {major_radius} and {minor_radius}"
            )));
        }
        Ok(TorusGeom {
            major_radius,
            minor_radius,
            uv_scale,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Camera {
    pub eye: [f64; 3],
    pub look_at: [f64; 3],
    /// Vertical field of view in radians.
    pub fov_y: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct RenderOptions {
    pub light_dir: [f64; 3],
    /// Texel resolution the footprint rule compares against.
    pub texture_base_res: usize,
    pub ambient: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            light_dir: [0.4, -0.6, 0.8],
            texture_base_res: 256,
            ambient: 0.15,
        }
    }
}

/// Map uv in `[0,1]^2` to texture domain coordinates: `[0,1] -> [-1,1]`
/// with an extra factor of 2 along `u` so one trip around the big circle
/// spans proportionally more texture.
pub fn uv_to_domain(u: f64, v: f64, geom: &TorusGeom) -> [f64; 2] {
    [
        2.0 * geom.uv_scale[0] * (2.0 * u - 1.0),
        geom.uv_scale[1] * (2.0 * v - 1.0),
    ]
}

/// Continuous detail level from the screen-space uv footprint:
/// `t = clamp(N - log2(max(|duv_dx|, |duv_dy|) * base_res), 0, N)`.
pub fn lod_select(duv_dx: [f64; 2], duv_dy: [f64; 2], texture_base_res: usize, n: usize) -> f64 {
    let norm = |v: [f64; 2]| (v[0] * v[0] + v[1] * v[1]).sqrt();
    let footprint = norm(duv_dx).max(norm(duv_dy)) * texture_base_res as f64;
    if footprint <= 0.0 {
        return n as f64;
    }
    (n as f64 - footprint.log2()).clamp(0.0, n as f64)
}

// ── small vector helpers ────────────────────────────────────────────

type Vec3 = [f64; 3];

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add_scaled(a: Vec3, b: Vec3, s: f64) -> Vec3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(a: Vec3) -> Vec3 {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

fn torus_sdf(p: Vec3, geom: &TorusGeom) -> f64 {
    let ring = (p[0] * p[0] + p[1] * p[1]).sqrt() - geom.major_radius;
    (ring * ring + p[2] * p[2]).sqrt() - geom.minor_radius
}

struct Hit {
    uv: [f64; 2],
    normal: Vec3,
}

fn march(eye: Vec3, dir: Vec3, geom: &TorusGeom) -> Option<Hit> {
    let t_max = 1e3;
    let mut t = 0.0;
    let mut d_prev = torus_sdf(eye, geom);
    for _ in 0..512 {
        let p = add_scaled(eye, dir, t);
        let d = torus_sdf(p, geom);
        if d < 1e-7 {
            return Some(hit_at(p, geom));
        }
        if d < 1e-4 {
            // Bracket the root by probing past the surface, then bisect.
            let probe = 8.0 * d.max(1e-6);
            let mut lo = t;
            let mut hi = t;
            let mut found = false;
            for k in 1..=64 {
                hi = t + probe * k as f64;
                if torus_sdf(add_scaled(eye, dir, hi), geom) < 0.0 {
                    found = true;
                    break;
                }
                lo = hi;
            }
            if found {
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if torus_sdf(add_scaled(eye, dir, mid), geom) < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let p = add_scaled(eye, dir, 0.5 * (lo + hi));
                return Some(hit_at(p, geom));
            }
            // Grazing pass: accept the closest approach as a hit.
            return Some(hit_at(p, geom));
        }
        t += d;
        if t > t_max || (d > d_prev && t > 4.0 * (geom.major_radius + geom.minor_radius) && d > geom.major_radius) {
            return None;
        }
        d_prev = d;
    }
    None
}

fn hit_at(p: Vec3, geom: &TorusGeom) -> Hit {
    let tau = std::f64::consts::TAU;
    let ring = (p[0] * p[0] + p[1] * p[1]).sqrt();
    let phi = p[1].atan2(p[0]);
    let theta = p[2].atan2(ring - geom.major_radius);
    let u = (phi / tau).rem_euclid(1.0);
    let v = (theta / tau).rem_euclid(1.0);
    // Normal points from the tube center circle to the surface point.
    let scale = geom.major_radius / ring.max(1e-12);
    let center = [p[0] * scale, p[1] * scale, 0.0];
    Hit {
        uv: [u, v],
        normal: normalize(sub(p, center)),
    }
}

/// Shortest wrap-aware difference between two uv coordinates.
fn wrap_diff(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - d.round()
}

/// Render the torus with the network as its texture. Hit pixels carry the
/// Lambert-shaded texture color; the background stays black. Deterministic
/// for identical scenes.
pub fn rasterize_torus(
    net: &MrNet,
    net_space: ColorSpace,
    geom: &TorusGeom,
    camera: &Camera,
    opts: &RenderOptions,
) -> Result<ImageGrid, RenderError> {
    if !(camera.fov_y > 0.0 && camera.fov_y < std::f64::consts::PI) {
        return Err(RenderError::BadCamera(format!(
            "field of view {} out of range",
            camera.fov_y
        )));
    }
    if torus_sdf(camera.eye, geom) <= 0.0 {
        return Err(RenderError::BadCamera(
            "eye position is inside the torus tube".into(),
        ));
    }
    let (w, h) = (camera.width, camera.height);
    let forward = normalize(sub(camera.look_at, camera.eye));
    let mut up_hint = [0.0, 0.0, 1.0];
    if cross(forward, up_hint).iter().map(|v| v * v).sum::<f64>() < 1e-12 {
        up_hint = [0.0, 1.0, 0.0];
    }
    let right = normalize(cross(forward, up_hint));
    let up = cross(right, forward);
    let tan_half = (camera.fov_y / 2.0).tan();
    let aspect = w as f64 / h as f64;

    // First pass: intersections and uv per pixel.
    let mut hits: Vec<Option<Hit>> = Vec::with_capacity(w * h);
    for i in 0..h {
        for j in 0..w {
            let px = (2.0 * (j as f64 + 0.5) / w as f64 - 1.0) * tan_half * aspect;
            let py = (1.0 - 2.0 * (i as f64 + 0.5) / h as f64) * tan_half;
            let dir = normalize(add_scaled(add_scaled(forward, right, px), up, py));
            hits.push(march(camera.eye, dir, geom));
        }
    }

    // Second pass: footprints from neighboring rays, detail level, and the
    // texture-domain point per hit pixel.
    let n_stages = net.stage_count();
    let mut hit_points = Vec::new();
    let mut hit_levels = Vec::new();
    let mut hit_px = Vec::new();
    for i in 0..h {
        for j in 0..w {
            let Some(hit) = &hits[i * w + j] else {
                continue;
            };
            let neighbor_uv = |di: isize, dj: isize| -> Option<[f64; 2]> {
                let ni = i as isize + di;
                let nj = j as isize + dj;
                if ni < 0 || nj < 0 || ni >= h as isize || nj >= w as isize {
                    return None;
                }
                hits[ni as usize * w + nj as usize].as_ref().map(|h| h.uv)
            };
            let duv = |a: Option<[f64; 2]>, b: Option<[f64; 2]>| -> [f64; 2] {
                match (a, b) {
                    (Some(a), Some(b)) => [wrap_diff(a[0], b[0]), wrap_diff(a[1], b[1])],
                    (Some(a), None) | (None, Some(a)) => {
                        [wrap_diff(a[0], hit.uv[0]), wrap_diff(a[1], hit.uv[1])]
                    }
                    // No usable neighbor: fall back to a one-texel footprint.
                    (None, None) => [1.0 / opts.texture_base_res as f64, 0.0],
                }
            };
            let duv_dx = duv(neighbor_uv(0, 1), Some(hit.uv));
            let duv_dy = duv(neighbor_uv(1, 0), Some(hit.uv));
            // Footprints in texture-domain units account for the uv scale
            // (a domain period spans 1/scale of the uv interval).
            let sx = geom.uv_scale[0].abs().max(1e-12);
            let sy = geom.uv_scale[1].abs().max(1e-12);
            let t = lod_select(
                [duv_dx[0] * sx, duv_dx[1] * sy],
                [duv_dy[0] * sx, duv_dy[1] * sy],
                opts.texture_base_res,
                n_stages,
            );
            let [x, y] = uv_to_domain(hit.uv[0], hit.uv[1], geom);
            hit_points.push([x, y]);
            hit_levels.push(t);
            hit_px.push(i * w + j);
        }
    }

    // Per-stage evaluation once, then per-pixel blending by detail level.
    let per_stage: Vec<Vec<f64>> = net.stages().iter().map(|s| s.eval(&hit_points)).collect();
    let channels = net.channels();
    let light = normalize(opts.light_dir);

    let mut img = ImageGrid::new(h, w, 3, Rect::new(0.0, 0.0, 1.0, 1.0));
    for (hit_idx, &px) in hit_px.iter().enumerate() {
        let weights = blend_weights(hit_levels[hit_idx], n_stages);
        let mut color = vec![0.0; channels];
        for (stage_vals, &c) in per_stage.iter().zip(&weights) {
            if c == 0.0 {
                continue;
            }
            for ch in 0..channels {
                color[ch] += c * stage_vals[hit_idx * channels + ch];
            }
        }
        let rgb: [f64; 3] = match (net_space, channels) {
            (ColorSpace::Ycbcr, 3) => {
                let tmp = ImageGrid::from_data(
                    1,
                    1,
                    3,
                    color.clone(),
                    Rect::new(0.0, 0.0, 1.0, 1.0),
                )
                .expect("pixel");
                let rgb = ycbcr_to_rgb(&tmp).expect("3 channels");
                [rgb.data[0], rgb.data[1], rgb.data[2]]
            }
            (_, 3) => [color[0], color[1], color[2]],
            (_, 1) => [color[0], color[0], color[0]],
            (_, c) => {
                return Err(RenderError::BadGeometry(format!(
                    "cannot render {c}-channel network"
                )))
            }
        };
        let hit = hits[px].as_ref().expect("recorded hit");
        let lambert = dot(hit.normal, light).max(0.0);
        let shade = opts.ambient + (1.0 - opts.ambient) * lambert;
        let (i, j) = (px / w, px % w);
        for ch in 0..3 {
            img.set(i, j, ch, (rgb[ch] * shade).clamp(0.0, 1.0));
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mrnet::StageConfig;
    use crate::pinr::{DenseLayer, FirstLayer, FrequencySet, PeriodicInr};
    use crate::diffcore::Tensor;

    fn geom() -> TorusGeom {
        TorusGeom::new(2.0, 1.0, [1.0, 1.0]).unwrap()
    }

    fn constant_net(rgb: [f64; 3]) -> MrNet {
        let freq = FrequencySet::new(vec![[1, 0]], [2.0, 2.0]).unwrap();
        MrNet::from_single(
            PeriodicInr::from_parts(
                FirstLayer::Integer(freq),
                Tensor::param(vec![1, 1], vec![0.0]).unwrap(),
                vec![],
                DenseLayer {
                    w: Tensor::param(vec![1, 3], vec![0.0; 3]).unwrap(),
                    b: Tensor::param(vec![1, 3], rgb.to_vec()).unwrap(),
                },
            )
            .unwrap(),
        )
    }

    #[test]
    fn uv_mapping_matches_affine_form() {
        let g = geom();
        assert_eq!(uv_to_domain(0.5, 0.5, &g), [0.0, 0.0]);
        assert_eq!(uv_to_domain(0.25, 0.75, &g), [-1.0, 0.5]);
        // Wrap: uv (1,1) and (0,0) map to points one period apart.
        let a = uv_to_domain(1.0, 1.0, &g);
        let b = uv_to_domain(0.0, 0.0, &g);
        let net = constant_net([0.2, 0.4, 0.8]);
        assert_eq!(net.eval(&[a], 1.0), net.eval(&[b], 1.0));
    }

    #[test]
    fn lod_footprint_rule() {
        let base = 256;
        let n = 6;
        // One texel: finest level.
        let t = lod_select([1.0 / base as f64, 0.0], [0.0, 1.0 / base as f64], base, n);
        assert!((t - n as f64).abs() <= 1e-12);
        // 2^N texels: coarsest.
        let big = (1 << n) as f64 / base as f64;
        let t = lod_select([big, 0.0], [0.0, big], base, n);
        assert!(t.abs() <= 1e-12);
        // Two texels: one level below finest.
        let t = lod_select([2.0 / base as f64, 0.0], [0.0, 0.0], base, n);
        assert!((t - (n - 1) as f64).abs() <= 1e-12);
    }

    #[test]
    fn camera_facing_away_renders_background() {
        let net = constant_net([1.0, 0.0, 0.0]);
        let camera = Camera {
            eye: [8.0, 0.0, 0.0],
            look_at: [16.0, 0.0, 0.0],
            fov_y: 0.8,
            width: 32,
            height: 24,
        };
        let img = rasterize_torus(&net, ColorSpace::Rgb, &geom(), &camera, &RenderOptions::default())
            .unwrap();
        assert!(img.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_net_fills_silhouette_with_shaded_color() {
        let net = constant_net([0.8, 0.4, 0.2]);
        let camera = Camera {
            eye: [8.0, 0.0, 4.0],
            look_at: [0.0, 0.0, 0.0],
            fov_y: 0.7,
            width: 48,
            height: 48,
        };
        let img = rasterize_torus(&net, ColorSpace::Rgb, &geom(), &camera, &RenderOptions::default())
            .unwrap();
        let mut hits = 0;
        for px in img.data.chunks_exact(3) {
            if px.iter().any(|&v| v > 0.0) {
                hits += 1;
                // Color modulated only by shading: channel ratios preserved.
                assert!((px[0] / px[1] - 2.0).abs() <= 1e-9, "{px:?}");
                assert!((px[1] / px[2] - 2.0).abs() <= 1e-9, "{px:?}");
            }
        }
        assert!(hits > 200, "torus should cover pixels, got {hits}");
    }

    #[test]
    fn eye_inside_tube_is_rejected() {
        let net = constant_net([0.5; 3]);
        let camera = Camera {
            eye: [2.0, 0.0, 0.0],
            look_at: [0.0, 0.0, 0.0],
            fov_y: 0.7,
            width: 8,
            height: 8,
        };
        assert!(matches!(
            rasterize_torus(&net, ColorSpace::Rgb, &geom(), &camera, &RenderOptions::default()),
            Err(RenderError::BadCamera(_))
        ));
    }

    fn six_stage_net() -> MrNet {
        let configs: Vec<StageConfig> = (1..=6)
            .map(|b| StageConfig {
                band: (b, b),
                freq_count: 2,
                hidden_widths: vec![],
            })
            .collect();
        let mut net = MrNet::init(&configs, [2.0, 2.0], 3, 8).unwrap();
        // Pull the random init into gamut so it behaves like a trained
        // texture: small amplitudes around a mid-gray.
        let n = net.stage_count();
        for i in 0..n {
            let stage = net.stage_mut(i);
            for p in stage.trainable_params_mut() {
                for v in p.data_mut() {
                    *v *= 0.08;
                }
            }
            let mut params = stage.trainable_params_mut();
            let c0 = params.last_mut().unwrap();
            for v in c0.data_mut() {
                *v = 0.5 / n as f64;
            }
        }
        net
    }

    fn mean_level(img_levels: &[(usize, f64)]) -> f64 {
        let sum: f64 = img_levels.iter().map(|(_, t)| t).sum();
        sum / img_levels.len() as f64
    }

    #[test]
    fn doubling_distance_drops_one_level() {
        let net = six_stage_net();
        let g = geom();
        let opts = RenderOptions::default();
        let levels_at = |dist: f64| -> f64 {
            let camera = Camera {
                eye: [dist, 0.0, dist * 0.5],
                look_at: [0.0, 0.0, 0.0],
                fov_y: 0.5,
                width: 64,
                height: 64,
            };
            // Re-derive the mean selected level from the uv buffer by
            // rendering and re-tracing; simplest is to call the internals.
            let forward = normalize(sub(camera.look_at, camera.eye));
            let right = normalize(cross(forward, [0.0, 0.0, 1.0]));
            let up = cross(right, forward);
            let tan_half = (camera.fov_y / 2.0).tan();
            let mut uvbuf: Vec<Option<[f64; 2]>> = Vec::new();
            for i in 0..64 {
                for j in 0..64 {
                    let px = (2.0 * (j as f64 + 0.5) / 64.0 - 1.0) * tan_half;
                    let py = (1.0 - 2.0 * (i as f64 + 0.5) / 64.0) * tan_half;
                    let dir = normalize(add_scaled(add_scaled(forward, right, px), up, py));
                    uvbuf.push(march(camera.eye, dir, &g).map(|h| h.uv));
                }
            }
            let mut acc = Vec::new();
            for i in 0..64usize {
                for j in 0..63usize {
                    if let (Some(a), Some(b), Some(c)) = (
                        uvbuf[i * 64 + j],
                        uvbuf[i * 64 + j + 1],
                        if i + 1 < 64 { uvbuf[(i + 1) * 64 + j] } else { None },
                    ) {
                        let dx = [wrap_diff(b[0], a[0]), wrap_diff(b[1], a[1])];
                        let dy = [wrap_diff(c[0], a[0]), wrap_diff(c[1], a[1])];
                        acc.push((
                            i * 64 + j,
                            lod_select(dx, dy, opts.texture_base_res, net.stage_count()),
                        ));
                    }
                }
            }
            mean_level(&acc)
        };
        let near = levels_at(6.0);
        let far = levels_at(12.0);
        assert!(
            ((near - far) - 1.0).abs() <= 0.2,
            "near {near}, far {far}"
        );
    }

    #[test]
    fn render_is_deterministic() {
        let net = six_stage_net();
        let camera = Camera {
            eye: [7.0, 2.0, 3.0],
            look_at: [0.0, 0.0, 0.0],
            fov_y: 0.7,
            width: 40,
            height: 30,
        };
        let a = rasterize_torus(&net, ColorSpace::Rgb, &geom(), &camera, &RenderOptions::default())
            .unwrap();
        let b = rasterize_torus(&net, ColorSpace::Rgb, &geom(), &camera, &RenderOptions::default())
            .unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn u_seam_is_invisible_for_periodic_nets() {
        // A periodic net is continuous on the torus, so color differences
        // across the u = 0/1 seam look like any interior differences.
        let net = six_stage_net();
        let g = geom();
        let camera = Camera {
            // Looking at the seam (phi = 0 plane) from outside.
            eye: [8.0, 0.0, 2.0],
            look_at: [2.0, 0.0, 0.0],
            fov_y: 0.6,
            width: 64,
            height: 64,
        };
        let opts = RenderOptions::default();
        let img = rasterize_torus(&net, ColorSpace::Rgb, &g, &camera, &opts).unwrap();

        // Re-trace to get uv per pixel, then split horizontal neighbor
        // pairs into seam-straddling and interior.
        let forward = normalize(sub(camera.look_at, camera.eye));
        let right = normalize(cross(forward, [0.0, 0.0, 1.0]));
        let up = cross(right, forward);
        let tan_half = (camera.fov_y / 2.0).tan();
        let mut uvbuf: Vec<Option<[f64; 2]>> = Vec::new();
        for i in 0..64 {
            for j in 0..64 {
                let px = (2.0 * (j as f64 + 0.5) / 64.0 - 1.0) * tan_half;
                let py = (1.0 - 2.0 * (i as f64 + 0.5) / 64.0) * tan_half;
                let dir = normalize(add_scaled(add_scaled(forward, right, px), up, py));
                uvbuf.push(march(camera.eye, dir, &g).map(|h| h.uv));
            }
        }
        let mut seam = Vec::new();
        let mut interior = Vec::new();
        for i in 0..64usize {
            for j in 0..63usize {
                if let (Some(a), Some(b)) = (uvbuf[i * 64 + j], uvbuf[i * 64 + j + 1]) {
                    // Only surface-adjacent pairs count; silhouette pixels
                    // jump to far-away torus points and always differ.
                    let adjacent = wrap_diff(a[0], b[0]).abs() < 0.05
                        && wrap_diff(a[1], b[1]).abs() < 0.05;
                    if !adjacent {
                        continue;
                    }
                    let mut d = 0.0;
                    for ch in 0..3 {
                        let dv = img.get(i, j, ch) - img.get(i, j + 1, ch);
                        d += dv * dv;
                    }
                    let d = d.sqrt();
                    if (a[0] - b[0]).abs() > 0.5 {
                        seam.push(d);
                    } else {
                        interior.push(d);
                    }
                }
            }
        }
        assert!(seam.len() > 5, "camera should see the seam");
        let med = |v: &mut Vec<f64>| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        let ratio = med(&mut seam) / med(&mut interior).max(1e-12);
        assert!(ratio <= 1.5, "seam ratio {ratio}");
    }
}

