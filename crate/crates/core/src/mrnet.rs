//! Multiresolution network: a sum of periodic INR stages blended by a
//! continuous level parameter.
//!
//! `f(x, t) = sum_i c_i(t) g_i(x)` with `c_i(t) = clamp01(t - i + 1)`, so
//! integer `t = k` is exactly the partial sum `g_0 + ... + g_k` and the
//! fractional part fades the next stage in. Stage frequency sets are
//! disjoint: stage `i` draws from its band minus all lower bands, lowest
//! norms first, which keeps early stages low-frequency.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffcore::{NodeId, Tape};
use crate::pinr::{
    self, enumerate_band, BatchNodes, FrequencySet, ModelError, PeriodicInr, PinrConfig,
    PinrError, StageBinding, EVAL_CHUNK,
};

/// Architecture of one stage inside a multiresolution stack.
#[derive(Debug, Clone)]
pub struct StageConfig {
    pub band: (u32, u32),
    pub freq_count: usize,
    pub hidden_widths: Vec<usize>,
}

/// Blend coefficients `c_i(t) = clamp01(t - i + 1)` for `i in 0..n`,
/// with `t` clamped to `[0, n]`. Nonincreasing in `i`, nondecreasing in `t`.
pub fn blend_weights(t: f64, n: usize) -> Vec<f64> {
    let t = t.clamp(0.0, n as f64);
    (0..n)
        .map(|i| (t - i as f64 + 1.0).clamp(0.0, 1.0))
        .collect()
}

/// Split the frequency plane across stages: stage `i` takes its
/// `freq_count` lowest-norm multipliers from `band_i` minus every lower
/// band (seeded tie-breaking).
pub fn partition_frequencies(
    configs: &[StageConfig],
    period: [f64; 2],
    seed: u64,
) -> Result<Vec<FrequencySet>, PinrError> {
    for w in configs.windows(2) {
        if w[1].band.0 <= w[0].band.0 || w[1].band.1 <= w[0].band.1 {
            return Err(PinrError::BadConfig(format!(
                "stage bands must strictly increase, got {:?} then {:?}",
                w[0].band, w[1].band
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken: Vec<[i32; 2]> = Vec::new();
    let mut sets = Vec::with_capacity(configs.len());
    for (i, cfg) in configs.iter().enumerate() {
        let candidates: Vec<[i32; 2]> = enumerate_band(cfg.band.0, cfg.band.1)
            .into_iter()
            .filter(|k| !taken.contains(k))
            .collect();
        let chosen = pinr::select_lowest_norm(
            candidates,
            cfg.freq_count,
            &mut rng,
            &format!(" for stage {i} band {:?}", cfg.band),
        )?;
        // Lower bands are nested inside higher ones, so excluding all prior
        // bands equals excluding the union of prior candidate pools.
        taken = enumerate_band(cfg.band.0, cfg.band.1);
        sets.push(FrequencySet::new(chosen, period)?);
    }
    Ok(sets)
}

/// Ordered stack of periodic INR stages sharing one period and channel
/// count.
#[derive(Debug)]
pub struct MrNet {
    stages: Vec<PeriodicInr>,
}

impl MrNet {
    /// Initialize a full stack: partition frequencies across stages, then
    /// initialize each stage with its own derived seed.
    pub fn init(
        configs: &[StageConfig],
        period: [f64; 2],
        channels: usize,
        seed: u64,
    ) -> Result<Self, PinrError> {
        if configs.is_empty() {
            return Err(PinrError::BadConfig("at least one stage required".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stage_seeds: Vec<u64> = configs.iter().map(|_| rng.next_u64()).collect();

        let mut stages = Vec::with_capacity(configs.len());
        let mut exclude: Vec<[i32; 2]> = Vec::new();
        for (i, (cfg, stage_seed)) in configs.iter().zip(&stage_seeds).enumerate() {
            if i > 0 {
                let prev = configs[i - 1].band;
                if cfg.band.0 <= prev.0 || cfg.band.1 <= prev.1 {
                    return Err(PinrError::BadConfig(format!(
                        "stage bands must strictly increase, got {prev:?} then {:?}",
                        cfg.band
                    )));
                }
            }
            let pcfg = PinrConfig {
                freq_count: cfg.freq_count,
                band: cfg.band,
                period,
                hidden_widths: cfg.hidden_widths.clone(),
                channels,
            };
            let stage = PeriodicInr::init_periodic(&pcfg, &exclude, *stage_seed)?;
            exclude = enumerate_band(cfg.band.0, cfg.band.1);
            stages.push(stage);
        }
        Self::from_stages(stages)
    }

    /// Wrap existing stages, validating shared period and channel count
    /// plus pairwise-disjoint frequency sets.
    pub fn from_stages(stages: Vec<PeriodicInr>) -> Result<Self, PinrError> {
        if stages.is_empty() {
            return Err(PinrError::BadConfig("at least one stage required".into()));
        }
        let period = stages[0].period();
        let channels = stages[0].channels();
        for (i, s) in stages.iter().enumerate() {
            if s.period() != period {
                return Err(PinrError::BadConfig(format!(
                    "stage {i} period {:?} differs from {:?}",
                    s.period(),
                    period
                )));
            }
            if s.channels() != channels {
                return Err(PinrError::BadConfig(format!(
                    "stage {i} has {} channels, expected {channels}",
                    s.channels()
                )));
            }
        }
        for i in 0..stages.len() {
            for j in 0..i {
                if let (Some(a), Some(b)) = (stages[i].frequency_set(), stages[j].frequency_set())
                {
                    for k in a.multipliers() {
                        if b.multipliers().contains(k) {
                            return Err(PinrError::BadConfig(format!(
                                "stages {j} and {i} share frequency {k:?}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(MrNet { stages })
    }

    pub fn from_single(stage: PeriodicInr) -> Self {
        MrNet {
            stages: vec![stage],
        }
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    pub fn stages(&self) -> &[PeriodicInr] {
        &self.stages
    }

    pub fn stage(&self, i: usize) -> &PeriodicInr {
        &self.stages[i]
    }

    pub fn stage_mut(&mut self, i: usize) -> &mut PeriodicInr {
        &mut self.stages[i]
    }

    pub fn period(&self) -> [f64; 2] {
        self.stages[0].period()
    }

    pub fn channels(&self) -> usize {
        self.stages[0].channels()
    }

    pub fn is_periodic(&self) -> bool {
        self.stages.iter().all(|s| s.frequency_set().is_some())
    }

    /// Trainable parameters of every stage, flattened in stage order.
    pub fn trainable_params_mut(&mut self) -> Vec<&mut crate::diffcore::Tensor> {
        self.stages
            .iter_mut()
            .flat_map(|s| s.trainable_params_mut())
            .collect()
    }

    /// Total parameter counts across stages.
    pub fn param_count(&self) -> pinr::ParamCount {
        let mut total = pinr::ParamCount {
            trainable: 0,
            frozen: 0,
        };
        for s in &self.stages {
            let c = s.param_count();
            total.trainable += c.trainable;
            total.frozen += c.frozen;
        }
        total
    }

    /// Bind the first `upto` stages onto a tape.
    pub fn bind_prefix(&self, tape: &mut Tape, upto: usize) -> Vec<StageBinding> {
        self.stages[..upto].iter().map(|s| s.bind(tape)).collect()
    }

    /// Unweighted sum of the bound stages: the composite the trainer
    /// optimizes (full-detail `t = N` semantics).
    pub fn forward_sum(
        &self,
        tape: &mut Tape,
        binds: &[StageBinding],
        batch: &BatchNodes,
    ) -> NodeId {
        let mut total: Option<NodeId> = None;
        for (stage, bind) in self.stages.iter().zip(binds) {
            let f = stage.forward(tape, bind, batch);
            total = Some(match total {
                Some(acc) => tape.add(acc, f).expect("stage sum"),
                None => f,
            });
        }
        total.expect("at least one stage")
    }

    /// Like [`MrNet::forward_sum`] but also assembling the summed spatial
    /// Jacobian, for the gradient-matching loss.
    pub fn forward_sum_with_jacobian(
        &self,
        tape: &mut Tape,
        binds: &[StageBinding],
        batch: &BatchNodes,
    ) -> (NodeId, NodeId, NodeId) {
        let mut total: Option<(NodeId, NodeId, NodeId)> = None;
        for (stage, bind) in self.stages.iter().zip(binds) {
            let (f, j1, j2) = stage.forward_with_jacobian(tape, bind, batch);
            total = Some(match total {
                Some((af, a1, a2)) => (
                    tape.add(af, f).expect("stage sum"),
                    tape.add(a1, j1).expect("jacobian sum"),
                    tape.add(a2, j2).expect("jacobian sum"),
                ),
                None => (f, j1, j2),
            });
        }
        total.expect("at least one stage")
    }

    /// Evaluate `f(x, t) = sum_i c_i(t) g_i(x)` at a batch of points.
    /// Stages with zero weight are skipped; weight-one stages are added
    /// without scaling so integer `t` is exactly the partial sum.
    pub fn eval(&self, points: &[[f64; 2]], t: f64) -> Vec<f64> {
        let weights = blend_weights(t, self.stages.len());
        let channels = self.channels();
        let mut out = Vec::with_capacity(points.len() * channels);
        for chunk in points.chunks(EVAL_CHUNK) {
            let mut tape = Tape::new();
            let batch = BatchNodes::new(&mut tape, chunk);
            let mut total: Option<NodeId> = None;
            for (stage, &c) in self.stages.iter().zip(&weights) {
                if c == 0.0 {
                    continue;
                }
                let bind = stage.bind(&mut tape);
                let mut f = stage.forward(&mut tape, &bind, &batch);
                if c != 1.0 {
                    f = tape.scale(f, c);
                }
                total = Some(match total {
                    Some(acc) => tape.add(acc, f).expect("blend sum"),
                    None => f,
                });
            }
            match total {
                Some(node) => out.extend_from_slice(tape.value(node)),
                None => out.extend(std::iter::repeat(0.0).take(chunk.len() * channels)),
            }
        }
        out
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), ModelError> {
        pinr::save_model(&self.stages, path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ModelError> {
        let stages = pinr::load_model(path)?;
        Self::from_stages(stages).map_err(|e| ModelError::Invalid(e.to_string()))
    }
}
