//! The combined value/gradient-matching loss:
//! `mean_batch(lambda |J_f - U|_F^2 + (1 - lambda) |f - target|^2)`,
//! each norm summed over channels (and both spatial axes for the
//! Jacobian term), assembled on the tape so it is differentiable.

use crate::diffcore::{NodeId, Tape};
use crate::mrnet::MrNet;
use crate::pinr::{BatchNodes, StageBinding};

use super::TrainError;

/// Multipliers on the two loss integrals.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    pub value: f64,
    pub jacobian: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            value: 1.0,
            jacobian: 1.0,
        }
    }
}

/// Assemble the combined loss for a batch. `targets` is `B x C`,
/// `guidance` is `B x C x 2` (axis fastest), `lambda` is `B`. Returns the
/// scalar loss node.
pub fn loss_eval(
    tape: &mut Tape,
    net: &MrNet,
    binds: &[StageBinding],
    points: &[[f64; 2]],
    targets: &[f64],
    guidance: &[f64],
    lambda: &[f64],
    weights: LossWeights,
) -> Result<NodeId, TrainError> {
    let (node, _) = eq8_loss(
        tape, net, binds, points, targets, guidance, lambda, weights, false,
    )?;
    Ok(node)
}

/// Full assembly, also returning the forward node so callers can read
/// predictions off the tape. With `anchor_means` a small penalty ties the
/// per-channel batch means to the target means (used when `lambda` is 1
/// everywhere and the value term vanishes).
#[allow(clippy::too_many_arguments)]
pub(super) fn eq8_loss(
    tape: &mut Tape,
    net: &MrNet,
    binds: &[StageBinding],
    points: &[[f64; 2]],
    targets: &[f64],
    guidance: &[f64],
    lambda: &[f64],
    weights: LossWeights,
    anchor_means: bool,
) -> Result<(NodeId, NodeId), TrainError> {
    let b = points.len();
    let c = net.channels();
    if targets.len() != b * c {
        return Err(TrainError::BadConfig(format!(
            "targets length {} does not match batch {b} x {c}",
            targets.len()
        )));
    }
    if guidance.len() != b * c * 2 {
        return Err(TrainError::BadConfig(format!(
            "guidance length {} does not match batch {b} x {c} x 2",
            guidance.len()
        )));
    }
    if lambda.len() != b {
        return Err(TrainError::BadConfig(format!(
            "lambda length {} does not match batch {b}",
            lambda.len()
        )));
    }

    let batch = BatchNodes::new(tape, points);
    let (f, j1, j2) = net.forward_sum_with_jacobian(tape, binds, &batch);

    // Per-sample weights tiled across channels.
    let lam_tiled: Vec<f64> = lambda
        .iter()
        .flat_map(|&l| std::iter::repeat(l).take(c))
        .collect();
    let one_minus: Vec<f64> = lam_tiled.iter().map(|l| 1.0 - l).collect();
    let lam_node = tape.constant(vec![b, c], lam_tiled);
    let oml_node = tape.constant(vec![b, c], one_minus);

    let t_node = tape.constant(vec![b, c], targets.to_vec());
    let dv = tape.sub(f, t_node)?;
    let sv = tape.mul(dv, dv)?;
    let wv = tape.mul(sv, oml_node)?;
    let value_sum = tape.sum(wv);

    let mut u1 = vec![0.0; b * c];
    let mut u2 = vec![0.0; b * c];
    for i in 0..b * c {
        u1[i] = guidance[i * 2];
        u2[i] = guidance[i * 2 + 1];
    }
    let u1_node = tape.constant(vec![b, c], u1);
    let u2_node = tape.constant(vec![b, c], u2);
    let d1 = tape.sub(j1, u1_node)?;
    let s1 = tape.mul(d1, d1)?;
    let w1 = tape.mul(s1, lam_node)?;
    let d2 = tape.sub(j2, u2_node)?;
    let s2 = tape.mul(d2, d2)?;
    let w2 = tape.mul(s2, lam_node)?;
    let jac_pair = tape.add(w1, w2)?;
    let jac_sum = tape.sum(jac_pair);

    let value_term = tape.scale(value_sum, weights.value / b as f64);
    let jac_term = tape.scale(jac_sum, weights.jacobian / b as f64);
    let mut loss = tape.add(value_term, jac_term)?;

    if anchor_means {
        // mean-matching penalty: 1e-3 * sum_c (mean f_c - mean target_c)^2.
        let ones_row = tape.constant(vec![1, b], vec![1.0; b]);
        let col_sums = tape.matmul(ones_row, f)?;
        let means = tape.scale(col_sums, 1.0 / b as f64);
        let mut t_means = vec![0.0; c];
        for i in 0..b {
            for ch in 0..c {
                t_means[ch] += targets[i * c + ch];
            }
        }
        for v in &mut t_means {
            *v /= b as f64;
        }
        let t_means_node = tape.constant(vec![1, c], t_means);
        let dm = tape.sub(means, t_means_node)?;
        let sm = tape.mul(dm, dm)?;
        let anchor_sum = tape.sum(sm);
        let anchor = tape.scale(anchor_sum, 1e-3);
        loss = tape.add(loss, anchor)?;
    }
    Ok((loss, f))
}
