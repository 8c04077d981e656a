//! Per-network objectives.

use crate::tensor::{Graph, Var, LOG_EPS};
use crate::{Error, Result, Tensor};

/// MSE averaged over every supervised stack.
pub fn loss_heatmap(g: &mut Graph, stacks: &[Var], target: &Tensor) -> Result<Var> {
    if stacks.is_empty() {
        return Err(Error::Usage("heatmap loss over zero stacks".into()));
    }
    let terms = stacks.iter().map(|&s| g.mse(s, target)).collect::<Result<Vec<_>>>()?;
    let total = terms[1..].iter().try_fold(terms[0], |acc, &t| g.add(acc, t))?;
    g.scale(total, 1.0 / stacks.len() as f64)
}

/// Mean squared coordinate error in normalised units.
pub fn loss_regression(g: &mut Graph, pred: Var, target: &Tensor) -> Result<Var> {
    g.mse(pred, target)
}

/// `-E[log D(M)]`, the real half of the discriminator objective.
pub fn loss_discriminator_real(g: &mut Graph, real_scores: Var) -> Result<Var> {
    let l = g.log_clamped(real_scores, false)?;
    let m = g.mean(l)?;
    g.scale(m, -1.0)
}

/// `-E[log(1 - |D(M̂) - d_fake|)]`, the generated half.
pub fn loss_discriminator_fake(g: &mut Graph, fake_scores: Var, labels: &[bool]) -> Result<Var> {
    let l = g.effectiveness_log(fake_scores, labels)?;
    let m = g.mean(l)?;
    g.scale(m, -1.0)
}

/// Full discriminator objective: both halves summed.
pub fn loss_discriminator(g: &mut Graph, real_scores: Var, fake_scores: Var, labels: &[bool]) -> Result<Var> {
    let r = loss_discriminator_real(g, real_scores)?;
    let f = loss_discriminator_fake(g, fake_scores, labels)?;
    g.add(r, f)
}

/// `E[log(1 - D(M̂))]`, minimised by the estimator.
pub fn loss_adversarial(g: &mut Graph, fake_scores: Var) -> Result<Var> {
    let l = g.log_clamped(fake_scores, true)?;
    g.mean(l)
}

/// Scalar reference for the generated-half term `log(1 - |x - d|)` with the
/// same clamping as the graph op.
pub fn effectiveness_term(x: f64, d_fake: bool) -> f64 {
    let p = x.clamp(LOG_EPS, 1.0 - LOG_EPS);
    let d = if d_fake { 1.0 } else { 0.0 };
    (1.0 - (p - d).abs()).ln()
}
