use alloc::vec::Vec;

use super::{partner, PairSets};
use crate::numkernel::{log_sum_exp, Matrix};
use crate::{Error, Result};

fn check_inputs(h: &Matrix, tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Config(alloc::format!("temperature {tau} must be positive")));
    }
    if h.rows() < 2 || h.rows() % 2 != 0 {
        return Err(Error::Usage(alloc::format!(
            "contrastive loss needs an even number (≥ 2) of views, got {}",
            h.rows()
        )));
    }
    Ok(())
}

/// Row norms and unit rows; zero-norm rows are rejected.
fn normalize(h: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let mut norms = Vec::with_capacity(h.rows());
    let mut unit = h.clone();
    for r in 0..h.rows() {
        let norm = libm::sqrt(h.row(r).iter().map(|v| v * v).sum::<f64>());
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateRepresentation { row: r });
        }
        unit.row_mut(r).iter_mut().for_each(|v| *v /= norm);
        norms.push(norm);
    }
    Ok((norms, unit))
}

/// Pairwise cosine similarities of the rows of `h`.
pub fn cosine_similarities(h: &Matrix) -> Result<Matrix> {
    let (_, unit) = normalize(h)?;
    unit.matmul_t(&unit)
}

/// Two-view loss: per anchor, `-log(exp(s_ij/τ) / Σ_{k≠i} exp(s_ik/τ))`,
/// averaged over all `2N` anchors.
pub fn contrastive_loss_traditional(h: &Matrix, tau: f64) -> Result<f64> {
    check_inputs(h, tau)?;
    let sim = cosine_similarities(h)?;
    let views = h.rows();
    let mut total = 0.0;
    let mut logits = Vec::with_capacity(views - 1);
    for i in 0..views {
        logits.clear();
        logits.extend((0..views).filter(|&k| k != i).map(|k| sim.get(i, k) / tau));
        total += log_sum_exp(&logits)? - sim.get(i, partner(i)) / tau;
    }
    Ok(total / views as f64)
}

/// Loss with explicit per-anchor sets: per anchor, the mean over
/// `q ∈ Q(i)` of `-log(exp(s_iq/τ) / Σ_{k∈M(i)} exp(s_ik/τ))`, averaged over
/// all `2N` anchors.
pub fn contrastive_loss_cl4cvr(h: &Matrix, sets: &PairSets, tau: f64) -> Result<f64> {
    contrastive_loss_grad(h, sets, tau).map(|g| g.loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveGrad {
    pub loss: f64,
    /// Gradient with respect to the raw (unnormalized) representations.
    pub representations: Matrix,
}

/// [`contrastive_loss_cl4cvr`] together with its gradient.
pub fn contrastive_loss_grad(h: &Matrix, sets: &PairSets, tau: f64) -> Result<ContrastiveGrad> {
    check_inputs(h, tau)?;
    let views = h.rows();
    if sets.len() != views || sets.q.len() != views {
        return Err(Error::dim("contrastive_loss", h.shape(), (sets.len(), sets.q.len())));
    }
    let (norms, unit) = normalize(h)?;
    let sim = unit.matmul_t(&unit)?;
    let scale = 1.0 / (views as f64 * tau);

    // coef[i][k] = ∂L/∂s_ik
    let mut coef = Matrix::zeros(views, views);
    let mut total = 0.0;
    let mut logits = Vec::new();
    for i in 0..views {
        let (m, q) = (&sets.m[i], &sets.q[i]);
        if q.is_empty() {
            return Err(Error::EmptyPositiveSet { anchor: i });
        }
        if m.iter().any(|&k| k == i || k >= views) || q.iter().any(|k| m.binary_search(k).is_err()) {
            return Err(Error::Usage(alloc::format!(
                "anchor {i}: denominator set must exclude the anchor and contain every positive"
            )));
        }
        logits.clear();
        logits.extend(m.iter().map(|&k| sim.get(i, k) / tau));
        let lse = log_sum_exp(&logits)?;
        let qn = q.len() as f64;
        let mean_pos: f64 = q.iter().map(|&k| sim.get(i, k) / tau).sum::<f64>() / qn;
        total += lse - mean_pos;
        for (&k, &l) in m.iter().zip(&logits) {
            coef.set(i, k, scale * libm::exp(l - lse));
        }
        for &k in q {
            coef.set(i, k, coef.get(i, k) - scale / qn);
        }
    }

    // ∂L/∂u_i = Σ_k coef_ik u_k + Σ_k coef_ki u_k
    let dim = h.cols();
    let mut grad_unit = Matrix::zeros(views, dim);
    for i in 0..views {
        for k in 0..views {
            let c = coef.get(i, k) + coef.get(k, i);
            if c == 0.0 {
                continue;
            }
            let uk = unit.row(k);
            for (g, &u) in grad_unit.row_mut(i).iter_mut().zip(uk) {
                *g += c * u;
            }
        }
    }
    // through u = h / |h|: ∂L/∂h = (g - u (u·g)) / |h|
    let mut grad = Matrix::zeros(views, dim);
    for i in 0..views {
        let u = unit.row(i);
        let g = grad_unit.row(i);
        let proj: f64 = u.iter().zip(g).map(|(a, b)| a * b).sum();
        for ((out, &gv), &uv) in grad.row_mut(i).iter_mut().zip(g).zip(u) {
            *out = (gv - uv * proj) / norms[i];
        }
    }
    Ok(ContrastiveGrad {
        loss: total / views as f64,
        representations: grad,
    })
}

/// `L_pred + α·L_cl`.
pub fn total_loss(pred_loss: f64, contrastive_loss: f64, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Config(alloc::format!("loss weight α={alpha} must be non-negative")));
    }
    Ok(pred_loss + alpha * contrastive_loss)
}
