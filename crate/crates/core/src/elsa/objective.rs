//! Normalized squared error between ℓ2-normalized prediction and target rows,
//! with its closed-form gradient.
//!
//! The parameters `W` pass through an optional frozen mask and row
//! normalization before scoring: `Ā = rownorm(M ⊙ W)`, `P = XĀĀᵀ − X`.
//! The mask is treated as a constant, so masked entries get zero gradient.

use crate::linalg::{gemm, DenseMatrix, NORM_EPS};
use crate::{Error, Result};

/// Mean over rows of `‖normalize(pred) − normalize(target)‖²`. All-zero
/// prediction rows normalize to zero.
pub fn nmse_loss(pred: &DenseMatrix, target: &DenseMatrix) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            format!("{:?}", target.shape()),
            format!("{:?}", pred.shape()),
        ));
    }
    if pred.rows() == 0 {
        return Ok(0.0);
    }
    let unit = |row: &[f32]| -> Vec<f64> {
        let norm = crate::linalg::l2_norm(row);
        let inv = if norm > NORM_EPS { 1.0 / norm } else { 0.0 };
        row.iter().map(|&v| f64::from(v) * inv).collect()
    };
    let total: f64 = pred
        .iter_rows()
        .zip(target.iter_rows())
        .map(|(p, t)| {
            unit(p)
                .iter()
                .zip(unit(t))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum();
    Ok(total / pred.rows() as f64)
}

#[derive(Debug, Clone)]
pub struct LossAndGradient {
    /// Mean loss over the batch.
    pub loss: f64,
    /// `∂loss/∂W`, `n × d` row-major.
    pub gradient: Vec<f64>,
}

/// Loss and gradient w.r.t. the raw parameters `weights` (`n × d`) for a batch
/// of users given as interacted item lists. Users with empty rows are ignored.
pub fn loss_and_gradient(
    weights: &[f64],
    n: usize,
    d: usize,
    mask: Option<&[bool]>,
    batch: &[&[u32]],
) -> LossAndGradient {
    assert_eq!(weights.len(), n * d, "weights must be n × d");
    if let Some(m) = mask {
        assert_eq!(m.len(), n * d, "mask must be n × d");
    }
    let batch: Vec<&[u32]> = batch.iter().copied().filter(|r| !r.is_empty()).collect();
    let b = batch.len();
    if b == 0 {
        return LossAndGradient {
            loss: 0.0,
            gradient: vec![0.0; n * d],
        };
    }

    // Ā = rownorm(M ⊙ W)
    let mut a_bar = weights.to_vec();
    if let Some(m) = mask {
        for (a, &keep) in a_bar.iter_mut().zip(m) {
            if !keep {
                *a = 0.0;
            }
        }
    }
    let mut row_norm = vec![0.0f64; n];
    for (i, row) in a_bar.chunks_exact_mut(d).enumerate() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        row_norm[i] = norm;
        let inv = if norm > NORM_EPS { 1.0 / norm } else { 0.0 };
        row.iter_mut().for_each(|v| *v *= inv);
    }

    // Z = XĀ
    let mut z = vec![0.0f64; b * d];
    for (u, items) in batch.iter().enumerate() {
        let zu = &mut z[u * d..(u + 1) * d];
        for &i in *items {
            let ai = &a_bar[i as usize * d..(i as usize + 1) * d];
            zu.iter_mut().zip(ai).for_each(|(s, &a)| *s += a);
        }
    }

    // P = ZĀᵀ − X, turned in place into G = ∂loss/∂P
    let mut g = gemm::matmul_bt(&z, &a_bar, b, d, n);
    let mut loss = 0.0f64;
    for (u, items) in batch.iter().enumerate() {
        let p = &mut g[u * n..(u + 1) * n];
        for &i in *items {
            p[i as usize] -= 1.0;
        }
        let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let t_val = 1.0 / (items.len() as f64).sqrt();
        if p_norm <= NORM_EPS {
            // normalize(0) = 0, so the loss is ‖t̂‖² and the gradient is taken as 0
            loss += 1.0;
            p.fill(0.0);
            continue;
        }
        let inv = 1.0 / p_norm;
        // ‖p̂ − t̂‖² = 2 − 2⟨p̂, t̂⟩
        let cos: f64 = items.iter().map(|&i| p[i as usize] * inv * t_val).sum();
        loss += (2.0 - 2.0 * cos).max(0.0);
        // ∂/∂P = 2/‖P‖ · (cos · p̂ − t̂)
        let scale = 2.0 * inv / b as f64;
        p.iter_mut().for_each(|v| *v *= scale * cos * inv);
        for &i in *items {
            p[i as usize] -= scale * t_val;
        }
    }
    loss /= b as f64;

    // ∂loss/∂Ā = Xᵀ(GĀ) + GᵀZ
    let h = gemm::matmul(&g, &a_bar, b, n, d);
    let mut grad = gemm::matmul_at(&g, &z, n, b, d);
    for (u, items) in batch.iter().enumerate() {
        let hu = &h[u * d..(u + 1) * d];
        for &i in *items {
            let gi = &mut grad[i as usize * d..(i as usize + 1) * d];
            gi.iter_mut().zip(hu).for_each(|(s, &v)| *s += v);
        }
    }

    // back through row normalization: (I − āāᵀ) g / ‖v‖, then the mask
    for i in 0..n {
        let gi = &mut grad[i * d..(i + 1) * d];
        let norm = row_norm[i];
        if norm <= NORM_EPS {
            gi.fill(0.0);
            continue;
        }
        let ai = &a_bar[i * d..(i + 1) * d];
        let radial: f64 = gi.iter().zip(ai).map(|(g, a)| g * a).sum();
        gi.iter_mut()
            .zip(ai)
            .for_each(|(g, &a)| *g = (*g - radial * a) / norm);
    }
    if let Some(m) = mask {
        for (g, &keep) in grad.iter_mut().zip(m) {
            if !keep {
                *g = 0.0;
            }
        }
    }
    LossAndGradient {
        loss,
        gradient: grad,
    }
}
