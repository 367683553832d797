//! Reconstruction, isomer and KL losses, in plain form and on the tape.

use ndarray::Array2;

use crate::decoder::build::{run_build, TeacherChooser};
use crate::decoder::{isomer_scores, BuildTrace};
use crate::nets::{Model, ModelError};
use crate::nn::{Tape, Var};

use super::{TrainError, TrainingPair};

/// Floor applied to probabilities before logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub build: f64,
    pub isomer: f64,
    pub kl: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(build: f64, isomer: f64, kl: f64, beta: f64) -> Self {
        Self {
            build,
            isomer,
            kl,
            total: build + isomer + beta * kl,
        }
    }
}

fn clamp(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// `−Σ_t log p̂_t[truth_t]`.
pub fn build_loss_from(truth: &[usize], estimated: &[Vec<f64>]) -> Result<f64, TrainError> {
    if truth.len() != estimated.len() {
        return Err(TrainError::Misaligned {
            expected: truth.len(),
            got: estimated.len(),
        });
    }
    truth
        .iter()
        .zip(estimated)
        .map(|(&t, p)| {
            p.get(t)
                .map(|&x| -x.max(PROB_FLOOR).ln())
                .ok_or(TrainError::Misaligned {
                    expected: t + 1,
                    got: p.len(),
                })
        })
        .sum()
}

/// Build loss of a teacher-forced trace (every step must carry its truth).
pub fn build_loss(trace: &BuildTrace) -> Result<f64, TrainError> {
    let mut truth = Vec::with_capacity(trace.steps.len());
    let mut est = Vec::with_capacity(trace.steps.len());
    for (i, s) in trace.steps.iter().enumerate() {
        truth.push(s.truth.ok_or(TrainError::Misaligned {
            expected: trace.steps.len(),
            got: i,
        })?);
        est.push(s.action.probs.clone());
    }
    build_loss_from(&truth, &est)
}

/// Binary cross-entropy summed over isomers, with clamped estimates.
pub fn isomer_loss(flags: &[bool], estimated: &[f64]) -> Result<f64, TrainError> {
    if flags.len() != estimated.len() {
        return Err(TrainError::Misaligned {
            expected: flags.len(),
            got: estimated.len(),
        });
    }
    Ok(flags
        .iter()
        .zip(estimated)
        .map(|(&f, &p)| {
            let p = clamp(p);
            if f {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum())
}

/// KL divergence of `N(μ, diag σ²)` from `N(0, I)`.
pub fn kl_loss(mu: &[f64], sigma: &[f64]) -> f64 {
    assert_eq!(mu.len(), sigma.len(), "mu/sigma length mismatch");
    -0.5 * mu
        .iter()
        .zip(sigma)
        .map(|(m, s)| 1.0 + (s * s).ln() - m * m - s * s)
        .sum::<f64>()
}

/// Tape result of one pair: `total` is differentiable.
pub struct PairLoss {
    pub total: Var,
    pub build: Var,
    pub isomer: Option<Var>,
    pub kl: Var,
    pub breakdown: LossBreakdown,
    /// Teacher-forced trace of the build phase.
    pub trace: BuildTrace,
    /// Raw isomer scores, when more than one isomer exists.
    pub isomer_probs: Vec<f64>,
}

/// Teacher-forced loss of one pair with latent noise `eps`. Pairs with a
/// single stereoisomer contribute no isomer term (the choice is never made
/// at generation time).
pub fn pair_loss(
    model: &Model,
    tape: &mut Tape,
    pair: &TrainingPair,
    eps: &[f64],
    beta: f64,
) -> Result<PairLoss, ModelError> {
    let yt = model.ytilde(tape, &pair.y, &pair.y_s)?;
    let enc = model.encode_with_noise(tape, &pair.molecule, yt, eps)?;
    let zt = model.ztilde(tape, enc.z, yt);
    let mut chooser = TeacherChooser {
        actions: &pair.actions,
        pos: 0,
    };
    let run = run_build(
        model,
        tape,
        &pair.scaffold,
        yt,
        zt,
        &mut chooser,
        Default::default(),
        true,
    )?;
    debug_assert_eq!(chooser.pos, pair.actions.len());
    let logs: Vec<Var> = run
        .chosen
        .iter()
        .map(|c| {
            let p = tape.element(c.probs, 0, c.column);
            tape.ln_clamped(p, PROB_FLOOR)
        })
        .collect();
    let stacked = tape.concat(&logs);
    let s = tape.sum(stacked);
    let build = tape.scale(s, -1.0);

    let (isomer, isomer_probs) = if pair.isomers.len() > 1 {
        let p = isomer_scores(model, tape, &pair.isomers, zt);
        let probs = tape.value(p).column(0).to_vec();
        let k = pair.isomers.len();
        let f = Array2::from_shape_fn((k, 1), |(i, _)| f64::from(u8::from(pair.isomer_flags[i])));
        let nf = f.mapv(|x| 1.0 - x);
        let lp = tape.ln_clamped(p, PROB_FLOOR);
        let q = tape.affine(p, -1.0, 1.0);
        let lq = tape.ln_clamped(q, PROB_FLOOR);
        let (f, nf) = (tape.constant(f), tape.constant(nf));
        let a = tape.mul(f, lp);
        let b = tape.mul(nf, lq);
        let ab = tape.add(a, b);
        let s = tape.sum(ab);
        (Some(tape.scale(s, -1.0)), probs)
    } else {
        (None, Vec::new())
    };

    let kl = model.kl_term(tape, &enc);
    let bkl = tape.scale(kl, beta);
    let mut total = tape.add(build, bkl);
    if let Some(i) = isomer {
        total = tape.add(total, i);
    }
    let breakdown = LossBreakdown::new(
        tape.scalar(build),
        isomer.map_or(0.0, |i| tape.scalar(i)),
        tape.scalar(kl),
        beta,
    );
    Ok(PairLoss {
        total,
        build,
        isomer,
        kl,
        breakdown,
        trace: run.trace,
        isomer_probs,
    })
}
