//! Periodic sinusoidal INR: a frozen first layer of integer-multiple
//! frequencies, SIREN-initialized hidden layers, and a linear output.
//!
//! The first layer maps `x` to `sin(omega x + phi)` where every row of
//! `omega` is `k * 2*pi/P` with integer `k`. Composing further sine layers
//! keeps the period, so the whole network is periodic by construction; the
//! frequency multipliers stay frozen while phases, hidden layers, and the
//! output layer train.

mod io;

pub use io::{load_model, save_model, ModelError};

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diffcore::{NodeId, Tape, Tensor};

#[derive(Debug, Error)]
pub enum PinrError {
    #[error("requested {requested} frequencies but only {available} are available{context}")]
    InsufficientFrequencies {
        requested: usize,
        available: usize,
        context: String,
    },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

/// Integer frequency multipliers plus the spatial period they realize.
///
/// Rows are unique, never `(0, 0)`, and no two rows are negatives of each
/// other: the sign pairing is redundant because `a*sin(w.x + p)` covers
/// `-w` via phase.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySet {
    multipliers: Vec<[i32; 2]>,
    period: [f64; 2],
}

impl FrequencySet {
    pub fn new(multipliers: Vec<[i32; 2]>, period: [f64; 2]) -> Result<Self, PinrError> {
        if !(period[0] > 0.0 && period[1] > 0.0) {
            return Err(PinrError::BadConfig(format!(
                "periods must be positive, got {period:?}"
            )));
        }
        for (i, k) in multipliers.iter().enumerate() {
            if *k == [0, 0] {
                return Err(PinrError::BadConfig(format!("row {i} is (0, 0)")));
            }
            for (j, k2) in multipliers.iter().enumerate().take(i) {
                if k == k2 || (k[0] == -k2[0] && k[1] == -k2[1]) {
                    return Err(PinrError::BadConfig(format!(
                        "rows {j} and {i} are equal or sign-paired: {k2:?} vs {k:?}"
                    )));
                }
            }
        }
        Ok(FrequencySet {
            multipliers,
            period,
        })
    }

    pub fn len(&self) -> usize {
        self.multipliers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multipliers.is_empty()
    }

    pub fn multipliers(&self) -> &[[i32; 2]] {
        &self.multipliers
    }

    pub fn period(&self) -> [f64; 2] {
        self.period
    }

    /// Realized angular frequencies, one row per multiplier:
    /// `omega[i][j] = k[i][j] * 2*pi/P[j]`.
    pub fn angular(&self) -> Vec<[f64; 2]> {
        self.multipliers
            .iter()
            .map(|k| {
                [
                    k[0] as f64 * 2.0 * PI / self.period[0],
                    k[1] as f64 * 2.0 * PI / self.period[1],
                ]
            })
            .collect()
    }
}

/// All multipliers `(k1, k2)` with `0 <= k1 <= b1`, `-b2 <= k2 <= b2`, and
/// `k1 > 0 or k2 > 0`: the half-plane convention that removes `(0, 0)` and
/// the sign-paired duplicates. Count is `(b1+1)(2 b2+1) - (b2+1)`.
pub fn enumerate_band(b1: u32, b2: u32) -> Vec<[i32; 2]> {
    let (b1, b2) = (b1 as i32, b2 as i32);
    let mut out = Vec::new();
    for k1 in 0..=b1 {
        for k2 in -b2..=b2 {
            if k1 > 0 || k2 > 0 {
                out.push([k1, k2]);
            }
        }
    }
    out
}

fn norm2(k: &[i32; 2]) -> i64 {
    let (a, b) = (k[0] as i64, k[1] as i64);
    a * a + b * b
}

/// Pick `count` multipliers of smallest Euclidean norm, breaking norm ties
/// by a seeded uniform shuffle within each tie group.
pub(crate) fn select_lowest_norm(
    mut candidates: Vec<[i32; 2]>,
    count: usize,
    rng: &mut ChaCha8Rng,
    context: &str,
) -> Result<Vec<[i32; 2]>, PinrError> {
    if count > candidates.len() {
        return Err(PinrError::InsufficientFrequencies {
            requested: count,
            available: candidates.len(),
            context: context.to_string(),
        });
    }
    candidates.sort_by_key(norm2);
    let mut start = 0;
    while start < candidates.len() {
        let n0 = norm2(&candidates[start]);
        let end = start
            + candidates[start..]
                .iter()
                .position(|k| norm2(k) != n0)
                .unwrap_or(candidates.len() - start);
        candidates[start..end].shuffle(rng);
        start = end;
    }
    candidates.truncate(count);
    Ok(candidates)
}

/// How the first layer was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Integer multiples of the period; periodic by construction.
    PeriodicInteger,
    /// SIREN-style continuous frequencies; generically non-periodic.
    SirenRandom,
}

#[derive(Debug, Clone)]
pub enum FirstLayer {
    Integer(FrequencySet),
    Continuous {
        omega: Vec<[f64; 2]>,
        period: [f64; 2],
    },
}

impl FirstLayer {
    pub fn len(&self) -> usize {
        match self {
            FirstLayer::Integer(f) => f.len(),
            FirstLayer::Continuous { omega, .. } => omega.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn period(&self) -> [f64; 2] {
        match self {
            FirstLayer::Integer(f) => f.period(),
            FirstLayer::Continuous { period, .. } => *period,
        }
    }

    fn angular(&self) -> Vec<[f64; 2]> {
        match self {
            FirstLayer::Integer(f) => f.angular(),
            FirstLayer::Continuous { omega, .. } => omega.clone(),
        }
    }
}

/// One affine layer; `w` is stored input-major (`in x out`) so a batch
/// forward is a plain `B x in` by `in x out` matmul.
#[derive(Debug)]
pub struct DenseLayer {
    pub w: Tensor,
    pub b: Tensor,
}

/// A single periodic INR stage.
#[derive(Debug)]
pub struct PeriodicInr {
    first: FirstLayer,
    phi: Tensor,
    hidden: Vec<DenseLayer>,
    out: DenseLayer,
    channels: usize,
}

/// Architecture of one stage, minus the seed.
#[derive(Debug, Clone)]
pub struct PinrConfig {
    pub freq_count: usize,
    pub band: (u32, u32),
    pub period: [f64; 2],
    pub hidden_widths: Vec<usize>,
    pub channels: usize,
}

/// Trainable and frozen scalar counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCount {
    pub trainable: usize,
    pub frozen: usize,
}

fn uniform_tensor(shape: Vec<usize>, bound: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::param(shape, data).expect("shape/len agree")
}

impl PeriodicInr {
    /// Integer-frequency initialization: the `freq_count` smallest-norm
    /// multipliers from the band (minus `exclude`), uniform phases, and
    /// SIREN-style `U(+-sqrt(6/fan_in))` hidden and output weights with
    /// zero biases.
    pub fn init_periodic(
        cfg: &PinrConfig,
        exclude: &[[i32; 2]],
        seed: u64,
    ) -> Result<Self, PinrError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let candidates: Vec<[i32; 2]> = enumerate_band(cfg.band.0, cfg.band.1)
            .into_iter()
            .filter(|k| !exclude.contains(k))
            .collect();
        let chosen = select_lowest_norm(
            candidates,
            cfg.freq_count,
            &mut rng,
            &format!(" in band {:?} after exclusions", cfg.band),
        )?;
        let freq = FrequencySet::new(chosen, cfg.period)?;
        Ok(Self::assemble(
            FirstLayer::Integer(freq),
            &cfg.hidden_widths,
            cfg.channels,
            &mut rng,
        ))
    }

    /// SIREN-style first layer: `omega ~ omega0 * U(-1/2, 1/2)` per input
    /// dimension. The result is generically non-periodic; `period` is kept
    /// only as the nominal tile size for the rest of the pipeline.
    pub fn init_siren(
        freq_count: usize,
        omega0: f64,
        period: [f64; 2],
        hidden_widths: &[usize],
        channels: usize,
        seed: u64,
    ) -> Result<Self, PinrError> {
        if omega0 < 0.0 {
            return Err(PinrError::BadConfig(format!("omega0 must be >= 0, got {omega0}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega: Vec<[f64; 2]> = (0..freq_count)
            .map(|_| {
                [
                    omega0 * (rng.random_range(-0.5..0.5)),
                    omega0 * (rng.random_range(-0.5..0.5)),
                ]
            })
            .collect();
        Ok(Self::assemble(
            FirstLayer::Continuous { omega, period },
            hidden_widths,
            channels,
            &mut rng,
        ))
    }

    fn assemble(
        first: FirstLayer,
        hidden_widths: &[usize],
        channels: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let n = first.len();
        let phi_data: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
        let phi = Tensor::param(vec![1, n], phi_data).expect("phi");

        let mut hidden = Vec::with_capacity(hidden_widths.len());
        let mut fan_in = n;
        for &width in hidden_widths {
            let bound = (6.0 / fan_in as f64).sqrt();
            let w = uniform_tensor(vec![fan_in, width], bound, rng);
            let b = Tensor::param(vec![1, width], vec![0.0; width]).expect("bias");
            hidden.push(DenseLayer { w, b });
            fan_in = width;
        }

        let bound = (6.0 / fan_in as f64).sqrt();
        let out_w = uniform_tensor(vec![fan_in, channels], bound, rng);
        let out_b = Tensor::param(vec![1, channels], vec![0.0; channels]).expect("c0");

        PeriodicInr {
            first,
            phi,
            hidden,
            out: DenseLayer { w: out_w, b: out_b },
            channels,
        }
    }

    /// Build a stage from explicit tensors, validating the dimension chain.
    pub fn from_parts(
        first: FirstLayer,
        phi: Tensor,
        hidden: Vec<DenseLayer>,
        out: DenseLayer,
    ) -> Result<Self, PinrError> {
        let n = first.len();
        if phi.shape() != [1, n] {
            return Err(PinrError::BadConfig(format!(
                "phi shape {:?} does not match {n} frequencies",
                phi.shape()
            )));
        }
        let mut width = n;
        for (i, layer) in hidden.iter().enumerate() {
            if layer.w.shape().len() != 2 || layer.w.shape()[0] != width {
                return Err(PinrError::BadConfig(format!(
                    "hidden layer {i} weight shape {:?} does not chain from width {width}",
                    layer.w.shape()
                )));
            }
            let out_w = layer.w.shape()[1];
            if layer.b.shape() != [1, out_w] {
                return Err(PinrError::BadConfig(format!(
                    "hidden layer {i} bias shape {:?} does not match width {out_w}",
                    layer.b.shape()
                )));
            }
            width = out_w;
        }
        if out.w.shape().len() != 2 || out.w.shape()[0] != width {
            return Err(PinrError::BadConfig(format!(
                "output weight shape {:?} does not chain from width {width}",
                out.w.shape()
            )));
        }
        let channels = out.w.shape()[1];
        if out.b.shape() != [1, channels] {
            return Err(PinrError::BadConfig(format!(
                "output bias shape {:?} does not match {channels} channels",
                out.b.shape()
            )));
        }
        Ok(PeriodicInr {
            first,
            phi,
            hidden,
            out,
            channels,
        })
    }

    pub fn first_layer(&self) -> &FirstLayer {
        &self.first
    }

    pub fn frequency_set(&self) -> Option<&FrequencySet> {
        match &self.first {
            FirstLayer::Integer(f) => Some(f),
            FirstLayer::Continuous { .. } => None,
        }
    }

    pub fn init_mode(&self) -> InitMode {
        match self.first {
            FirstLayer::Integer(_) => InitMode::PeriodicInteger,
            FirstLayer::Continuous { .. } => InitMode::SirenRandom,
        }
    }

    pub fn period(&self) -> [f64; 2] {
        self.first.period()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn freq_count(&self) -> usize {
        self.first.len()
    }

    pub fn hidden_layers(&self) -> &[DenseLayer] {
        &self.hidden
    }

    pub fn output_layer(&self) -> &DenseLayer {
        &self.out
    }

    pub fn phi(&self) -> &Tensor {
        &self.phi
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.hidden.iter().map(|l| l.w.shape()[1]).collect()
    }

    /// Trainable parameters in canonical order: phi, each hidden (w, b),
    /// output (w, b). The first-layer frequencies are not among them.
    pub fn trainable_params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = Vec::with_capacity(2 + 2 * self.hidden.len() + 2);
        v.push(&mut self.phi);
        for layer in &mut self.hidden {
            v.push(&mut layer.w);
            v.push(&mut layer.b);
        }
        v.push(&mut self.out.w);
        v.push(&mut self.out.b);
        v
    }

    pub fn param_count(&self) -> ParamCount {
        let trainable = self.phi.len()
            + self
                .hidden
                .iter()
                .map(|l| l.w.len() + l.b.len())
                .sum::<usize>()
            + self.out.w.len()
            + self.out.b.len();
        ParamCount {
            trainable,
            frozen: self.first.len() * 2,
        }
    }

    /// First-layer matrix in `2 x n` layout so a batch of points `B x 2`
    /// multiplies straight into pre-activations.
    fn omega_t_data(&self) -> Vec<f64> {
        let ang = self.first.angular();
        let n = ang.len();
        let mut data = vec![0.0; 2 * n];
        for (i, w) in ang.iter().enumerate() {
            data[i] = w[0];
            data[n + i] = w[1];
        }
        data
    }

    /// Put the stage's parameters and first-layer constants on a tape.
    pub fn bind(&self, tape: &mut Tape) -> StageBinding {
        let n = self.first.len();
        let omega_t = tape.constant(vec![2, n], self.omega_t_data());
        let ang = self.first.angular();
        let tan1: Vec<f64> = ang.iter().map(|w| w[0]).collect();
        let tan2: Vec<f64> = ang.iter().map(|w| w[1]).collect();
        let tangent1 = tape.constant(vec![1, n], tan1);
        let tangent2 = tape.constant(vec![1, n], tan2);
        StageBinding {
            omega_t,
            tangent1,
            tangent2,
            phi: tape.leaf(&self.phi),
            hidden: self
                .hidden
                .iter()
                .map(|l| (tape.leaf(&l.w), tape.leaf(&l.b)))
                .collect(),
            out_w: tape.leaf(&self.out.w),
            out_b: tape.leaf(&self.out.b),
        }
    }

    /// Batch forward `f(x) = c0 + C sin(W_L(...sin(omega x + phi)...) + b_L)`.
    pub fn forward(&self, tape: &mut Tape, bind: &StageBinding, batch: &BatchNodes) -> NodeId {
        self.forward_impl(tape, bind, batch, false).0
    }

    /// Batch forward plus the analytic spatial Jacobian, assembled from the
    /// same primitives so both are differentiable with respect to the
    /// parameters. Returns `(f, df/dx1, df/dx2)`, each `B x channels`.
    pub fn forward_with_jacobian(
        &self,
        tape: &mut Tape,
        bind: &StageBinding,
        batch: &BatchNodes,
    ) -> (NodeId, NodeId, NodeId) {
        let (f, jac) = self.forward_impl(tape, bind, batch, true);
        let (j1, j2) = jac.expect("jacobian requested");
        (f, j1, j2)
    }

    fn forward_impl(
        &self,
        tape: &mut Tape,
        bind: &StageBinding,
        batch: &BatchNodes,
        with_jacobian: bool,
    ) -> (NodeId, Option<(NodeId, NodeId)>) {
        let xw = tape.matmul(batch.x, bind.omega_t).expect("x omega");
        let phi_rows = tape.matmul(batch.ones, bind.phi).expect("phi rows");
        let z0 = tape.add(xw, phi_rows).expect("z0");
        let mut act = tape.sin(z0);

        // Tangent of z0 along each axis is constant across the batch.
        let mut tangents = if with_jacobian {
            let cos0 = tape.cos(z0);
            let t1_rows = tape.matmul(batch.ones, bind.tangent1).expect("t1");
            let t2_rows = tape.matmul(batch.ones, bind.tangent2).expect("t2");
            let u1 = tape.mul(cos0, t1_rows).expect("u1");
            let u2 = tape.mul(cos0, t2_rows).expect("u2");
            Some((u1, u2))
        } else {
            None
        };

        for (w, b) in &bind.hidden {
            let aw = tape.matmul(act, *w).expect("hidden matmul");
            let brow = tape.matmul(batch.ones, *b).expect("bias rows");
            let z = tape.add(aw, brow).expect("pre-activation");
            act = tape.sin(z);
            if let Some((u1, u2)) = tangents {
                let cz = tape.cos(z);
                let p1 = tape.matmul(u1, *w).expect("tangent matmul");
                let p2 = tape.matmul(u2, *w).expect("tangent matmul");
                tangents = Some((
                    tape.mul(cz, p1).expect("tangent gate"),
                    tape.mul(cz, p2).expect("tangent gate"),
                ));
            }
        }

        let fw = tape.matmul(act, bind.out_w).expect("output matmul");
        let brow = tape.matmul(batch.ones, bind.out_b).expect("c0 rows");
        let f = tape.add(fw, brow).expect("output");

        let jac = tangents.map(|(u1, u2)| {
            (
                tape.matmul(u1, bind.out_w).expect("j1"),
                tape.matmul(u2, bind.out_w).expect("j2"),
            )
        });
        (f, jac)
    }

    /// Evaluate at a batch of points without keeping gradients around.
    /// Returns row-major `B x channels`.
    pub fn eval(&self, points: &[[f64; 2]]) -> Vec<f64> {
        let mut out = Vec::with_capacity(points.len() * self.channels);
        for chunk in points.chunks(EVAL_CHUNK) {
            let mut tape = Tape::new();
            let batch = BatchNodes::new(&mut tape, chunk);
            let bind = self.bind(&mut tape);
            let f = self.forward(&mut tape, &bind, &batch);
            out.extend_from_slice(tape.value(f));
        }
        out
    }

    /// Analytic spatial Jacobian at a batch of points: per point a
    /// `channels x 2` matrix, flattened row-major as `(j1[c], j2[c])` pairs.
    pub fn jacobian_eval(&self, points: &[[f64; 2]]) -> Vec<f64> {
        let mut out = Vec::with_capacity(points.len() * self.channels * 2);
        for chunk in points.chunks(EVAL_CHUNK) {
            let mut tape = Tape::new();
            let batch = BatchNodes::new(&mut tape, chunk);
            let bind = self.bind(&mut tape);
            let (_, j1, j2) = self.forward_with_jacobian(&mut tape, &bind, &batch);
            let v1 = tape.value(j1);
            let v2 = tape.value(j2);
            for row in 0..chunk.len() {
                for c in 0..self.channels {
                    out.push(v1[row * self.channels + c]);
                    out.push(v2[row * self.channels + c]);
                }
            }
        }
        out
    }
}

pub(crate) const EVAL_CHUNK: usize = 8192;

/// Parameter leaves of one stage on a tape.
pub struct StageBinding {
    omega_t: NodeId,
    tangent1: NodeId,
    tangent2: NodeId,
    phi: NodeId,
    hidden: Vec<(NodeId, NodeId)>,
    out_w: NodeId,
    out_b: NodeId,
}

/// Batch constants shared by every stage evaluated at the same points.
pub struct BatchNodes {
    pub x: NodeId,
    pub ones: NodeId,
    pub len: usize,
}

impl BatchNodes {
    pub fn new(tape: &mut Tape, points: &[[f64; 2]]) -> Self {
        let b = points.len();
        let flat: Vec<f64> = points.iter().flat_map(|p| [p[0], p[1]]).collect();
        BatchNodes {
            x: tape.constant(vec![b, 2], flat),
            ones: tape.constant(vec![b, 1], vec![1.0; b]),
            len: b,
        }
    }
}
