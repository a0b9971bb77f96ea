//! Training objectives: pixel-wise binary cross-entropy for template and
//! cycle reconstruction, the additive angular margin softmax loss over
//! cosine logits, and their weighted combination.
//!
//! Inputs may be `f32` or `f64`; all accumulation happens in `f64`.

use num_traits::Float;

use crate::error::{Error, Result};

/// Predictions are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before logs.
pub const BCE_CLAMP: f64 = 1e-7;
/// Cosines are clamped to `[-1 + COS_CLAMP, 1 - COS_CLAMP]`.
pub const COS_CLAMP: f64 = 1e-7;

fn check_same_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b || a == 0 {
        return Err(Error::invalid_arg(format!(
            "{what}: shape mismatch ({a} vs {b})"
        )));
    }
    Ok(())
}

/// Mean binary cross-entropy `-[t ln p + (1 - t) ln(1 - p)]` over all
/// elements.
pub fn bce<F: Float>(target: &[F], pred: &[F]) -> Result<f64> {
    check_same_len("bce", target.len(), pred.len())?;
    let sum: f64 = target
        .iter()
        .zip(pred)
        .map(|(t, p)| {
            let t = t.to_f64().unwrap_or(f64::NAN);
            let p = p
                .to_f64()
                .unwrap_or(f64::NAN)
                .clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / target.len() as f64)
}

/// Gradient of [`bce`] with respect to `pred`. Zero where the clamp is
/// active.
pub fn bce_grad<F: Float>(target: &[F], pred: &[F]) -> Result<Vec<f64>> {
    check_same_len("bce", target.len(), pred.len())?;
    let n = target.len() as f64;
    Ok(target
        .iter()
        .zip(pred)
        .map(|(t, p)| {
            let t = t.to_f64().unwrap_or(f64::NAN);
            let p = p.to_f64().unwrap_or(f64::NAN);
            if !(BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&p) {
                0.0
            } else {
                (p - t) / (p * (1.0 - p)) / n
            }
        })
        .collect())
}

/// Gradient of [`bce`] with respect to the logits of a sigmoid output
/// `pred = sigmoid(z)`: `(pred - target) / n`, ignoring the clamp.
pub fn bce_logit_grad<F: Float>(target: &[F], pred: &[F], weight: f64) -> Result<Vec<F>> {
    check_same_len("bce", target.len(), pred.len())?;
    let scale = F::from(weight / target.len() as f64).unwrap_or_else(F::zero);
    Ok(target
        .iter()
        .zip(pred)
        .map(|(&t, &p)| (p - t) * scale)
        .collect())
}

/// `bce(template, recon_template) + bce(image, recon_image)`.
pub fn rec_loss<F: Float>(
    template: &[F],
    recon_template: &[F],
    image: &[F],
    recon_image: &[F],
) -> Result<f64> {
    Ok(bce(template, recon_template)? + bce(image, recon_image)?)
}

/// Value and gradients of the angular-margin loss.
#[derive(Clone, Debug, PartialEq)]
pub struct ArcFace {
    pub loss: f64,
    /// d loss / d embeddings, row-major `N x dim`.
    pub d_embeddings: Vec<f64>,
    /// d loss / d class weights, row-major `C x dim`.
    pub d_weights: Vec<f64>,
}

fn margin_logit(cos: f64, margin: f64, scale: f64) -> (f64, f64) {
    // s cos(theta + m) = s (cos m cos - sin m sin), sin = sqrt(1 - cos^2);
    // second value is its derivative in `cos`.
    let c = cos.clamp(-1.0 + COS_CLAMP, 1.0 - COS_CLAMP);
    let sin = (1.0 - c * c).sqrt();
    let (sm, cm) = margin.sin_cos();
    let value = scale * (c * cm - sin * sm);
    let clamped = c != cos;
    let deriv = if clamped {
        0.0
    } else {
        scale * (cm + c * sm / sin)
    };
    (value, deriv)
}

/// Additive angular margin softmax loss averaged over the batch:
///
/// `-(1/N) sum_i ln( e^{s cos(theta_yi + m)} / (e^{s cos(theta_yi + m)} + sum_{j != yi} e^{s cos theta_j}) )`
///
/// with `cos theta_j = x_i . w_j`. Embeddings and weight rows are expected
/// to be unit-norm; they are not re-normalised here, so the gradients are
/// with respect to the vectors exactly as given.
pub fn arcface<F: Float>(
    embeddings: &[F],
    labels: &[usize],
    weights: &[F],
    dim: usize,
    margin: f64,
    scale: f64,
) -> Result<ArcFace> {
    if dim == 0 || embeddings.len() != labels.len() * dim || labels.is_empty() {
        return Err(Error::invalid_arg(format!(
            "arcface: {} embedding values for {} labels of dim {dim}",
            embeddings.len(),
            labels.len()
        )));
    }
    if !weights.len().is_multiple_of(dim) || weights.is_empty() {
        return Err(Error::invalid_arg("arcface: weight matrix is not C x dim"));
    }
    let classes = weights.len() / dim;
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::invalid_arg(format!(
            "arcface: label {bad} out of range for {classes} classes"
        )));
    }
    let f = |v: &F| v.to_f64().unwrap_or(f64::NAN);
    let n = labels.len();
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut d_emb = vec![0.0; embeddings.len()];
    let mut d_w = vec![0.0; weights.len()];
    let mut logits = vec![0.0; classes];
    let mut dlogit_dcos = vec![0.0; classes];
    for (i, &y) in labels.iter().enumerate() {
        let x = &embeddings[i * dim..(i + 1) * dim];
        for j in 0..classes {
            let w = &weights[j * dim..(j + 1) * dim];
            let cos: f64 = x.iter().zip(w).map(|(a, b)| f(a) * f(b)).sum();
            if j == y {
                (logits[j], dlogit_dcos[j]) = margin_logit(cos, margin, scale);
            } else {
                logits[j] = scale * cos;
                dlogit_dcos[j] = scale;
            }
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = logits.iter().map(|z| (z - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        loss += log_z - logits[y];
        for j in 0..classes {
            let prob = (logits[j] - log_z).exp();
            let dz = (prob - if j == y { 1.0 } else { 0.0 }) * inv_n;
            let dcos = dz * dlogit_dcos[j];
            if dcos == 0.0 {
                continue;
            }
            let w = &weights[j * dim..(j + 1) * dim];
            for k in 0..dim {
                d_emb[i * dim + k] += dcos * f(&w[k]);
                d_w[j * dim + k] += dcos * f(&x[k]);
            }
        }
    }
    Ok(ArcFace {
        loss: loss * inv_n,
        d_embeddings: d_emb,
        d_weights: d_w,
    })
}

pub fn arcface_loss<F: Float>(
    embeddings: &[F],
    labels: &[usize],
    weights: &[F],
    dim: usize,
    margin: f64,
    scale: f64,
) -> Result<f64> {
    Ok(arcface(embeddings, labels, weights, dim, margin, scale)?.loss)
}

/// `(arc_image + arc_template + lambda * rec) / 3`. Non-finite inputs are an
/// invalid state, the signal to abort training.
pub fn total_loss(arc_image: f64, arc_template: f64, rec: f64, lambda: f64) -> Result<f64> {
    if ![arc_image, arc_template, rec, lambda]
        .iter()
        .all(|v| v.is_finite())
    {
        return Err(Error::invalid_state(format!(
            "non-finite loss component ({arc_image}, {arc_template}, {rec}, lambda {lambda})"
        )));
    }
    Ok((arc_image + arc_template + lambda * rec) / 3.0)
}

/// Partial derivatives of [`total_loss`] in `(arc_image, arc_template, rec)`.
pub fn total_loss_grad(lambda: f64) -> [f64; 3] {
    [1.0 / 3.0, 1.0 / 3.0, lambda / 3.0]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain softmax cross-entropy, written independently of `arcface`.
    fn softmax_ce(logits: &[f64], label: usize) -> f64 {
        let m = logits.iter().cloned().fold(f64::MIN, f64::max);
        let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        lse - logits[label]
    }

    #[test]
    fn bce_reference_values() {
        assert!(bce(&[1.0f64], &[1.0]).unwrap() < 1e-6);
        assert!(bce(&[0.0f64], &[0.0]).unwrap() < 1e-6);
        assert!((bce(&[0.0f64], &[0.5]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce(&[1.0f64], &[0.9]).unwrap() - 0.105_360_515_657_826_3).abs() < 1e-12);
        assert!(bce(&[1.0f64, 0.0], &[0.5]).is_err());
    }

    #[test]
    fn bce_extreme_predictions_are_finite() {
        let v = bce(&[1.0f32, 0.0], &[0.0, 1.0]).unwrap();
        assert!(v.is_finite());
        assert!((v - (-(BCE_CLAMP.ln()))).abs() < 1e-6);
    }

    #[test]
    fn rec_loss_sums_terms() {
        let t = [1.0f64, 0.0];
        assert!(rec_loss(&t, &t, &t, &t).unwrap() < 1e-6);
        // bce(1, e^-0.3) = 0.3 and bce(1, e^-0.5) = 0.5
        let v = rec_loss(&[1.0f64], &[(-0.3f64).exp()], &[1.0], &[(-0.5f64).exp()]).unwrap();
        assert!((v - 0.8).abs() < 1e-12);
    }

    #[test]
    fn rec_loss_two_by_two_grid() {
        // Independent closed-form evaluation of each of the 8 terms.
        let t = [0.0, 1.0, 0.25, 0.75];
        let rt = [0.1, 0.8, 0.5, 0.6];
        let i = [0.2, 0.4, 0.9, 1.0];
        let ri = [0.3, 0.3, 0.7, 0.95];
        let term = |t: f64, p: f64| -(t * p.ln() + (1.0 - t) * (1.0 - p).ln());
        let expect: f64 = (0..4).map(|k| term(t[k], rt[k])).sum::<f64>() / 4.0
            + (0..4).map(|k| term(i[k], ri[k])).sum::<f64>() / 4.0;
        assert!((rec_loss(&t, &rt, &i, &ri).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn arcface_hand_values() {
        let x = [1.0f64, 0.0];
        let w = [1.0f64, 0.0, 0.0, 1.0];
        let l0 = arcface_loss(&x, &[0], &w, 2, 0.0, 1.0).unwrap();
        assert!((l0 - 0.313_261_687_518_222_8).abs() < 1e-6, "{l0}");
        let l5 = arcface_loss(&x, &[0], &w, 2, 0.5, 1.0).unwrap();
        // x = w_1 puts cos at the clamp edge: theta = arccos(1 - 1e-7).
        let theta = (1.0 - COS_CLAMP).acos();
        let c = (theta + 0.5).cos();
        let expect = -(c.exp() / (c.exp() + 1.0)).ln();
        assert!((l5 - expect).abs() < 1e-9, "{l5} vs {expect}");
        // Unclamped ln(1 + e^{-cos 0.5}) = 0.347685; the clamp moves it by ~6e-5.
        assert!((l5 - 0.347_685).abs() < 1e-4, "{l5}");
    }

    #[test]
    fn zero_margin_is_scaled_softmax_ce() {
        let x = [0.6f64, 0.8, 0.0, 1.0, 0.0, 0.0];
        let w = [0.0f64, 1.0, 0.0, 0.8, 0.0, 0.6, 1.0, 0.0, 0.0];
        let labels = [2, 1];
        let s = 64.0;
        let got = arcface_loss(&x, &labels, &w, 3, 0.0, s).unwrap();
        let mut expect = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let logits: Vec<f64> = (0..3)
                .map(|j| s * (0..3).map(|k| x[i * 3 + k] * w[j * 3 + k]).sum::<f64>())
                .collect();
            expect += softmax_ce(&logits, y) / 2.0;
        }
        assert!((got - expect).abs() < 1e-6);
    }

    #[test]
    fn label_out_of_range_rejected() {
        let r = arcface_loss(&[1.0f64, 0.0], &[2], &[1.0, 0.0, 0.0, 1.0], 2, 0.5, 64.0);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn total_loss_arithmetic() {
        assert_eq!(total_loss(1.0, 1.0, 1.0, 4.0).unwrap(), 2.0);
        assert_eq!(total_loss(0.0, 0.0, 0.0, 4.0).unwrap(), 0.0);
        assert!((total_loss(0.31, 0.34, 0.80, 4.0).unwrap() - 1.283_333_333_333_333).abs() < 1e-12);
        assert!(matches!(
            total_loss(f64::NAN, 0.0, 0.0, 4.0),
            Err(Error::InvalidState(_))
        ));
        assert!(total_loss(0.0, f64::INFINITY, 0.0, 4.0).is_err());
    }

    #[test]
    fn logit_grad_is_chain_rule_through_sigmoid() {
        let t = [0.0f64, 1.0, 0.3];
        let p = [0.2f64, 0.7, 0.45];
        let dp = bce_grad(&t, &p).unwrap();
        let dz = bce_logit_grad(&t, &p, 1.0).unwrap();
        for k in 0..3 {
            assert!((dp[k] * p[k] * (1.0 - p[k]) - dz[k]).abs() < 1e-12);
        }
    }
}
