//! Finite-difference validation of the analytic gradients, tensor by tensor.

use crate::corpus::Vocabulary;
use crate::rngutil::stage_rng;
use crate::translator::train::{backward_pair, encode_pair_ids, forward_pair, pair_mean_loss, ModelGrads};
use crate::translator::{Seq2SeqModel, TranslatorError};
use rand::Rng;
use std::collections::BTreeSet;

const TENSOR_COUNT: usize = 10;

fn tensor_len(model: &Seq2SeqModel, tensor: usize) -> usize {
    match tensor {
        0 => model.src_embed.data().len(),
        1 => model.tgt_embed.data().len(),
        2 => model.encoder.w_x.data().len(),
        3 => model.encoder.w_h.data().len(),
        4 => model.encoder.b.len(),
        5 => model.decoder.w_x.data().len(),
        6 => model.decoder.w_h.data().len(),
        7 => model.decoder.b.len(),
        8 => model.w_out.data().len(),
        9 => model.b_out.len(),
        _ => unreachable!(),
    }
}

fn tensor_slot(model: &mut Seq2SeqModel, tensor: usize, idx: usize) -> &mut f64 {
    match tensor {
        0 => &mut model.src_embed.data_mut()[idx],
        1 => &mut model.tgt_embed.data_mut()[idx],
        2 => &mut model.encoder.w_x.data_mut()[idx],
        3 => &mut model.encoder.w_h.data_mut()[idx],
        4 => &mut model.encoder.b[idx],
        5 => &mut model.decoder.w_x.data_mut()[idx],
        6 => &mut model.decoder.w_h.data_mut()[idx],
        7 => &mut model.decoder.b[idx],
        8 => &mut model.w_out.data_mut()[idx],
        9 => &mut model.b_out[idx],
        _ => unreachable!(),
    }
}

/// Flat coordinates eligible for checking. Embedding tables are restricted
/// to rows the pair actually touches; everything else receives gradient
/// signal from any pair.
fn coordinate_pool(
    model: &Seq2SeqModel,
    tensor: usize,
    src_ids: &[usize],
    tgt_ids: &[usize],
) -> Vec<usize> {
    let d = model.embed_dim();
    let rows_to_pool = |ids: &[usize]| -> Vec<usize> {
        let rows: BTreeSet<usize> = ids
            .iter()
            .copied()
            .filter(|&id| id != Vocabulary::PAD)
            .collect();
        rows.into_iter()
            .flat_map(|r| (r * d)..(r * d + d))
            .collect()
    };
    match tensor {
        0 => rows_to_pool(src_ids),
        1 => rows_to_pool(&tgt_ids[..tgt_ids.len().saturating_sub(1)]),
        t => (0..tensor_len(model, t)).collect(),
    }
}

pub(crate) fn gradient_check_inner(
    model: &Seq2SeqModel,
    src_ids: &[usize],
    tgt_ids: &[usize],
    epsilon: f64,
    corrupt: impl FnOnce(&mut ModelGrads),
) -> Result<f64, TranslatorError> {
    if !(1e-6..=1e-4).contains(&epsilon) {
        return Err(TranslatorError::Config(format!(
            "epsilon {epsilon} outside [1e-6, 1e-4]"
        )));
    }

    let mut grads = ModelGrads::zeros_like(model);
    let tape = forward_pair(model, src_ids, tgt_ids)?;
    backward_pair(model, &tape, &mut grads);
    grads.scale(1.0 / tape.tokens as f64);
    corrupt(&mut grads);
    for slice in grads.slices() {
        if slice.iter().any(|g| !g.is_finite()) {
            return Err(TranslatorError::NonFinite("analytic gradients".into()));
        }
    }

    let mut rng = stage_rng(model.hyper.seed, "grad-check");
    let mut probe = model.clone();
    let mut max_rel = 0.0f64;

    for tensor in 0..TENSOR_COUNT {
        let pool = coordinate_pool(model, tensor, src_ids, tgt_ids);
        let coords: Vec<usize> = if pool.len() <= 20 {
            pool
        } else {
            let mut chosen = BTreeSet::new();
            while chosen.len() < 20 {
                let pick = pool[rng.random::<u64>() as usize % pool.len()];
                chosen.insert(pick);
            }
            chosen.into_iter().collect()
        };

        for idx in coords {
            let analytic = grads.slices()[tensor][idx];
            *tensor_slot(&mut probe, tensor, idx) += epsilon;
            let plus = pair_mean_loss(&probe, src_ids, tgt_ids)?;
            *tensor_slot(&mut probe, tensor, idx) -= 2.0 * epsilon;
            let minus = pair_mean_loss(&probe, src_ids, tgt_ids)?;
            *tensor_slot(&mut probe, tensor, idx) += epsilon;

            let numeric = (plus - minus) / (2.0 * epsilon);
            if !numeric.is_finite() {
                return Err(TranslatorError::NonFinite("numeric gradient".into()));
            }
            let rel =
                (analytic - numeric).abs() / f64::max(1e-12, analytic.abs() + numeric.abs());
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

/// Compare analytic gradients of the mean-token loss on one pair against
/// central finite differences over a sampled coordinate subset of every
/// parameter tensor (at least 20 coordinates each, or the whole tensor when
/// smaller). Returns the worst relative error.
pub fn gradient_check(
    model: &Seq2SeqModel,
    pair: (&[String], &[String]),
    epsilon: f64,
) -> Result<f64, TranslatorError> {
    let (src_ids, tgt_ids) = encode_pair_ids(model, pair)?;
    gradient_check_inner(model, &src_ids, &tgt_ids, epsilon, |_| {})
}
