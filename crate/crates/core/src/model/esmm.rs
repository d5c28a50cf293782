use alloc::vec::Vec;

use super::ModelParams;
use crate::data::Sample;
use crate::numkernel::{sigmoid_scalar, Matrix};
use crate::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before `ln`.
pub const PROB_CLAMP: f64 = 1e-12;

/// Predicted CTR `ŷ` and post-click CVR `ẑ` per sample; `ŷ·ẑ` is pCTCVR.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub y_hat: Vec<f64>,
    pub z_hat: Vec<f64>,
}

impl Predictions {
    pub fn len(&self) -> usize {
        self.y_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_hat.is_empty()
    }

    pub fn ctcvr(&self) -> Vec<f64> {
        self.y_hat.iter().zip(&self.z_hat).map(|(y, z)| y * z).collect()
    }
}

/// Concatenated per-field embeddings, one row per sample, fields in order.
pub fn embed(samples: &[Sample], params: &ModelParams) -> Result<Matrix> {
    let emb = &params.config().embedding;
    let f_count = emb.field_count();
    let mut ids = Vec::with_capacity(samples.len() * f_count);
    for s in samples {
        if s.features().len() != f_count {
            return Err(Error::dim("embed", (1, s.features().len()), (1, f_count)));
        }
        for (field, &id) in s.features().iter().enumerate() {
            if id >= emb.vocab_sizes[field] {
                return Err(Error::OutOfVocabulary {
                    field,
                    value: id,
                    vocab: emb.vocab_sizes[field],
                });
            }
        }
        ids.extend_from_slice(s.features());
    }
    embed_ids(&ids, params)
}

/// Like [`embed`] over a flat `N × F` id buffer, additionally accepting each
/// field's mask token id.
pub fn embed_ids(ids: &[u32], params: &ModelParams) -> Result<Matrix> {
    let emb = &params.config().embedding;
    let f_count = emb.field_count();
    let k = emb.dim_per_field;
    if ids.len() % f_count != 0 {
        return Err(Error::dim("embed_ids", (ids.len(), 1), (f_count, 1)));
    }
    let n = ids.len() / f_count;
    let mut out = Matrix::zeros(n, f_count * k);
    for r in 0..n {
        let row = out.row_mut(r);
        for field in 0..f_count {
            let id = ids[r * f_count + field];
            if id > emb.mask_token(field) {
                return Err(Error::OutOfVocabulary {
                    field,
                    value: id,
                    vocab: emb.vocab_sizes[field],
                });
            }
            row[field * k..(field + 1) * k].copy_from_slice(params.embeddings[field].row(id as usize));
        }
    }
    Ok(out)
}

/// ESMM forward pass: both towers read the same embedding rows.
pub fn esmm_forward(samples: &[Sample], params: &ModelParams) -> Result<Predictions> {
    if samples.is_empty() {
        return Err(Error::Usage("esmm_forward on an empty batch".into()));
    }
    let e = embed(samples, params)?;
    predict_embedded(&e, params)
}

pub fn predict_embedded(e: &Matrix, params: &ModelParams) -> Result<Predictions> {
    let ctr = params.ctr_tower.forward(e)?;
    let cvr = params.cvr_tower.forward(e)?;
    Ok(Predictions {
        y_hat: ctr.as_slice().iter().map(|&a| sigmoid_scalar(a)).collect(),
        z_hat: cvr.as_slice().iter().map(|&c| sigmoid_scalar(c)).collect(),
    })
}

/// Representations of the augmented views through the shared encoder.
pub fn encode(views: &Matrix, params: &ModelParams) -> Result<Matrix> {
    let width = params.config().embedding.total_dim();
    if views.cols() != width {
        return Err(Error::dim("encode", views.shape(), (views.rows(), width)));
    }
    params.encoder.forward(views)
}

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

#[inline]
fn bce(p: f64, label: f64) -> f64 {
    let p = clamp_prob(p);
    -(label * libm::log(p) + (1.0 - label) * libm::log(1.0 - p))
}

#[inline]
fn in_clamp_range(p: f64) -> bool {
    (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p)
}

fn check_labels(pred: &Predictions, y: &[u8], z: &[u8]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::Usage("supervised loss on an empty batch".into()));
    }
    if y.len() != pred.len() || z.len() != pred.len() {
        return Err(Error::dim("supervised_loss", (pred.len(), 2), (y.len(), z.len())));
    }
    for (n, (&yn, &zn)) in y.iter().zip(z).enumerate() {
        if yn > 1 || zn > 1 {
            return Err(Error::Label(alloc::format!(
                "sample {n}: labels must be 0 or 1 (y={yn}, z={zn})"
            )));
        }
        if zn == 1 && yn == 0 {
            return Err(Error::Label(alloc::format!(
                "sample {n}: conversion without click (y=0, z=1)"
            )));
        }
    }
    Ok(())
}

/// Mean CTR cross-entropy plus mean CTCVR cross-entropy over the batch.
pub fn supervised_loss(pred: &Predictions, y: &[u8], z: &[u8]) -> Result<f64> {
    check_labels(pred, y, z)?;
    let n = pred.len() as f64;
    let mut ctr = 0.0;
    let mut ctcvr = 0.0;
    for i in 0..pred.len() {
        let yi = f64::from(y[i]);
        let ti = f64::from(y[i] * z[i]);
        ctr += bce(pred.y_hat[i], yi);
        ctcvr += bce(pred.y_hat[i] * pred.z_hat[i], ti);
    }
    Ok(ctr / n + ctcvr / n)
}

/// Loss value and its gradient with respect to the two tower logits.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedGrad {
    pub loss: f64,
    pub ctr_logit: Vec<f64>,
    pub cvr_logit: Vec<f64>,
}

pub fn supervised_loss_grad(pred: &Predictions, y: &[u8], z: &[u8]) -> Result<SupervisedGrad> {
    let loss = supervised_loss(pred, y, z)?;
    let n = pred.len() as f64;
    let mut ctr_logit = Vec::with_capacity(pred.len());
    let mut cvr_logit = Vec::with_capacity(pred.len());
    for i in 0..pred.len() {
        let (yh, zh) = (pred.y_hat[i], pred.z_hat[i]);
        let yi = f64::from(y[i]);
        let ti = f64::from(y[i] * z[i]);
        let p = yh * zh;
        let mut da = if in_clamp_range(yh) { yh - yi } else { 0.0 };
        let mut dc = 0.0;
        if in_clamp_range(p) {
            // d/dp of the CTCVR term is (p - t) / (p (1 - p)); dp/da = p (1 - ŷ),
            // dp/dc = p (1 - ẑ).
            let common = (p - ti) / (1.0 - p);
            da += common * (1.0 - yh);
            dc = common * (1.0 - zh);
        }
        ctr_logit.push(da / n);
        cvr_logit.push(dc / n);
    }
    Ok(SupervisedGrad {
        loss,
        ctr_logit,
        cvr_logit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dense, EmbeddingConfig, Mlp, ModelConfig};
    use crate::rng;
    use alloc::vec;

    fn preds(y: &[f64], z: &[f64]) -> Predictions {
        Predictions {
            y_hat: y.to_vec(),
            z_hat: z.to_vec(),
        }
    }

    #[test]
    fn loss_hand_values() {
        let l = supervised_loss(&preds(&[0.5], &[0.5]), &[1], &[1]).unwrap();
        let expected = -(0.5f64.ln()) - 0.25f64.ln();
        assert!((l - expected).abs() < 1e-12);
        assert!((l - 2.079442).abs() < 1e-6);

        let near = 1.0 - 1e-13;
        let l = supervised_loss(&preds(&[near], &[near]), &[1], &[1]).unwrap();
        assert!(l < 1e-10);

        for zh in [0.1, 0.5, 0.9] {
            let l = supervised_loss(&preds(&[0.5], &[zh]), &[0], &[0]).unwrap();
            let expected = -(0.5f64.ln()) - (1.0 - 0.5 * zh).ln();
            assert!((l - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn label_errors() {
        let p = preds(&[0.5], &[0.5]);
        assert!(matches!(supervised_loss(&p, &[2], &[0]), Err(Error::Label(_))));
        let err = supervised_loss(&p, &[0], &[1]).unwrap_err();
        assert!(matches!(err, Error::Label(ref m) if m.contains("conversion without click")));
    }

    #[test]
    fn logit_gradient_matches_finite_difference() {
        for (y, z) in [(0u8, 0u8), (1, 0), (1, 1)] {
            for (a, c) in [(0.3, -1.2), (-2.0, 0.7), (1.5, 2.5)] {
                let f = |a: f64, c: f64| {
                    supervised_loss(&preds(&[sigmoid_scalar(a)], &[sigmoid_scalar(c)]), &[y], &[z]).unwrap()
                };
                let g = supervised_loss_grad(&preds(&[sigmoid_scalar(a)], &[sigmoid_scalar(c)]), &[y], &[z])
                    .unwrap();
                let h = 1e-6;
                let fa = (f(a + h, c) - f(a - h, c)) / (2.0 * h);
                let fc = (f(a, c + h) - f(a, c - h)) / (2.0 * h);
                assert!((g.ctr_logit[0] - fa).abs() < 1e-7, "{y}{z} {a} {c}");
                assert!((g.cvr_logit[0] - fc).abs() < 1e-7, "{y}{z} {a} {c}");
            }
        }
    }

    fn tiny_params() -> ModelParams {
        let cfg = ModelConfig::new(EmbeddingConfig::new(vec![10], 2).unwrap(), vec![], vec![2]).unwrap();
        ModelParams::init(cfg, &mut rng::stream(0, rng::INIT_STREAM)).unwrap()
    }

    #[test]
    fn embed_lookup_and_order() {
        let mut p = tiny_params();
        p.embeddings[0].row_mut(7).copy_from_slice(&[0.1, -0.2]);
        let s = Sample::new(vec![7], 0, 0).unwrap();
        assert_eq!(embed(&[s.clone()], &p).unwrap().as_slice(), &[0.1, -0.2]);
        let e = embed(&[s.clone(), s], &p).unwrap();
        assert_eq!(e.row(0), e.row(1));

        let cfg = ModelConfig::new(EmbeddingConfig::new(vec![3, 3], 1).unwrap(), vec![], vec![1]).unwrap();
        let mut p2 = ModelParams::zeros(cfg).unwrap();
        p2.embeddings[0].set(1, 0, 5.0);
        p2.embeddings[1].set(2, 0, 9.0);
        let e = embed(&[Sample::new(vec![1, 2], 0, 0).unwrap()], &p2).unwrap();
        assert_eq!(e.as_slice(), &[5.0, 9.0]);
    }

    #[test]
    fn embed_rejects_out_of_vocab() {
        let p = tiny_params();
        let err = embed(&[Sample::new(vec![10], 0, 0).unwrap()], &p).unwrap_err();
        assert_eq!(
            err,
            Error::OutOfVocabulary {
                field: 0,
                value: 10,
                vocab: 10
            }
        );
        // the mask token row is reachable only through embed_ids
        assert!(embed_ids(&[10], &p).is_ok());
        assert!(embed_ids(&[11], &p).is_err());
    }

    #[test]
    fn zero_towers_predict_one_half() {
        let mut p = tiny_params();
        p.ctr_tower = p.ctr_tower.zeros_like();
        p.cvr_tower = p.cvr_tower.zeros_like();
        let batch = [Sample::new(vec![1], 1, 0).unwrap(), Sample::new(vec![4], 0, 0).unwrap()];
        let pred = esmm_forward(&batch, &p).unwrap();
        assert_eq!(pred.y_hat, vec![0.5, 0.5]);
        assert_eq!(pred.z_hat, vec![0.5, 0.5]);
    }

    #[test]
    fn one_layer_towers_match_scalar_computation() {
        // F=1, K=1, single-layer towers: ŷ = σ(w_c e + b_c), ẑ = σ(w_v e + b_v)
        let cfg = ModelConfig::new(EmbeddingConfig::new(vec![2], 1).unwrap(), vec![], vec![1]).unwrap();
        let mut p = ModelParams::zeros(cfg).unwrap();
        p.embeddings[0].set(1, 0, 0.4);
        p.ctr_tower = Mlp {
            layers: vec![Dense {
                weight: Matrix::from_rows(&[[2.0]]).unwrap(),
                bias: vec![-0.5],
            }],
        };
        p.cvr_tower = Mlp {
            layers: vec![Dense {
                weight: Matrix::from_rows(&[[-1.5]]).unwrap(),
                bias: vec![0.25],
            }],
        };
        let pred = esmm_forward(&[Sample::new(vec![1], 1, 1).unwrap()], &p).unwrap();
        let y = 1.0 / (1.0 + (-(2.0 * 0.4 - 0.5f64)).exp());
        let z = 1.0 / (1.0 + (-(-1.5 * 0.4 + 0.25f64)).exp());
        assert!((pred.y_hat[0] - y).abs() < 1e-15);
        assert!((pred.z_hat[0] - z).abs() < 1e-15);
    }

    #[test]
    fn encode_identity_and_width_check() {
        let cfg = ModelConfig::new(EmbeddingConfig::new(vec![4], 2).unwrap(), vec![], vec![2]).unwrap();
        let mut p = ModelParams::zeros(cfg).unwrap();
        p.encoder.layers[0].weight = Matrix::identity(2);
        let v = Matrix::from_rows(&[[0.3, -0.7], [0.3, -0.7]]).unwrap();
        let h = encode(&v, &p).unwrap();
        assert_eq!(h, v);
        assert!(encode(&Matrix::zeros(2, 3), &p).is_err());
    }
}
