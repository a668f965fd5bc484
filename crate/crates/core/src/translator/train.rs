//! Teacher-forced training: full backpropagation through time over each
//! pair, batched adaptive-moment updates, global-norm gradient clipping.

use crate::corpus::{encode_sequence, Vocabulary};
use crate::linalg::{self, Matrix};
use crate::rngutil::stage_rng;
use crate::translator::lstm::{backward_step, forward_step, LstmGrads, StepCache};
use crate::translator::{Seq2SeqModel, TranslatorError};
use rand::Rng;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub(crate) struct ModelGrads {
    pub src_embed: Matrix,
    pub tgt_embed: Matrix,
    pub enc: LstmGrads,
    pub dec: LstmGrads,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

impl ModelGrads {
    pub fn zeros_like(model: &Seq2SeqModel) -> Self {
        ModelGrads {
            src_embed: Matrix::zeros(model.src_embed.rows(), model.src_embed.cols()),
            tgt_embed: Matrix::zeros(model.tgt_embed.rows(), model.tgt_embed.cols()),
            enc: LstmGrads::zeros_like(&model.encoder),
            dec: LstmGrads::zeros_like(&model.decoder),
            w_out: Matrix::zeros(model.w_out.rows(), model.w_out.cols()),
            b_out: vec![0.0; model.b_out.len()],
        }
    }

    pub fn zero(&mut self) {
        for slice in self.slices_mut() {
            slice.fill(0.0);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for slice in self.slices_mut() {
            for v in slice.iter_mut() {
                *v *= alpha;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        let mut sum = 0.0;
        for slice in self.slices() {
            sum += linalg::dot(slice, slice);
        }
        sum.sqrt()
    }

    pub fn slices(&self) -> [&[f64]; 10] {
        [
            self.src_embed.data(),
            self.tgt_embed.data(),
            self.enc.w_x.data(),
            self.enc.w_h.data(),
            &self.enc.b,
            self.dec.w_x.data(),
            self.dec.w_h.data(),
            &self.dec.b,
            self.w_out.data(),
            &self.b_out,
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 10] {
        [
            self.src_embed.data_mut(),
            self.tgt_embed.data_mut(),
            self.enc.w_x.data_mut(),
            self.enc.w_h.data_mut(),
            &mut self.enc.b,
            self.dec.w_x.data_mut(),
            self.dec.w_h.data_mut(),
            &mut self.dec.b,
            self.w_out.data_mut(),
            &mut self.b_out,
        ]
    }
}

fn model_slices_mut(model: &mut Seq2SeqModel) -> [&mut [f64]; 10] {
    [
        model.src_embed.data_mut(),
        model.tgt_embed.data_mut(),
        model.encoder.w_x.data_mut(),
        model.encoder.w_h.data_mut(),
        &mut model.encoder.b,
        model.decoder.w_x.data_mut(),
        model.decoder.w_h.data_mut(),
        &mut model.decoder.b,
        model.w_out.data_mut(),
        &mut model.b_out,
    ]
}

/// Forward record for one pair, everything backward needs.
pub(crate) struct PairTape {
    pub enc_ids: Vec<usize>,
    pub enc_caches: Vec<StepCache>,
    pub dec_in_ids: Vec<usize>,
    pub dec_gold_ids: Vec<usize>,
    pub dec_caches: Vec<StepCache>,
    pub dec_hs: Vec<Vec<f64>>,
    pub probs: Vec<Vec<f64>>,
    pub loss_sum: f64,
    pub tokens: usize,
}

pub(crate) fn forward_pair(
    model: &Seq2SeqModel,
    src_ids: &[usize],
    tgt_ids: &[usize],
) -> Result<PairTape, TranslatorError> {
    let h_dim = model.hidden_dim();
    let enc_ids: Vec<usize> = src_ids
        .iter()
        .copied()
        .filter(|&id| id != Vocabulary::PAD)
        .collect();
    for &id in &enc_ids {
        if id >= model.src_vocab.len() {
            return Err(TranslatorError::Input(format!(
                "source index {id} out of range"
            )));
        }
    }

    let mut h = vec![0.0; h_dim];
    let mut c = vec![0.0; h_dim];
    let mut enc_caches = Vec::with_capacity(enc_ids.len());
    for &id in &enc_ids {
        let (h_new, cache) = forward_step(&model.encoder, model.src_embed.row(id), &h, &c);
        h = h_new;
        c = cache.c_new.clone();
        enc_caches.push(cache);
    }

    let effective: Vec<usize> = tgt_ids
        .iter()
        .copied()
        .filter(|&id| id != Vocabulary::PAD)
        .collect();
    for &id in &effective {
        if id >= model.tgt_vocab.len() {
            return Err(TranslatorError::Input(format!(
                "target index {id} out of range"
            )));
        }
    }
    if effective.first() != Some(&Vocabulary::SOS) || effective.len() < 2 {
        return Err(TranslatorError::Input(
            "target sequence must begin with the start marker and predict something".into(),
        ));
    }

    let steps = effective.len() - 1;
    let mut dec_caches = Vec::with_capacity(steps);
    let mut dec_hs = Vec::with_capacity(steps);
    let mut probs = Vec::with_capacity(steps);
    let mut loss_sum = 0.0;
    for t in 0..steps {
        let (h_new, cache) =
            forward_step(&model.decoder, model.tgt_embed.row(effective[t]), &h, &c);
        h = h_new;
        c = cache.c_new.clone();
        dec_caches.push(cache);

        let mut logits = model.b_out.clone();
        model.w_out.matvec_add(&h, &mut logits);
        let gold = effective[t + 1];
        let gold_logit = logits[gold];
        let log_z = linalg::softmax_inplace(&mut logits);
        loss_sum += log_z - gold_logit;
        probs.push(logits);
        dec_hs.push(h.clone());
    }

    Ok(PairTape {
        enc_ids,
        enc_caches,
        dec_in_ids: effective[..steps].to_vec(),
        dec_gold_ids: effective[1..].to_vec(),
        dec_caches,
        dec_hs,
        probs,
        loss_sum,
        tokens: steps,
    })
}

/// Accumulate unscaled gradients of the summed cross-entropy for one pair.
pub(crate) fn backward_pair(model: &Seq2SeqModel, tape: &PairTape, grads: &mut ModelGrads) {
    let h_dim = model.hidden_dim();
    let mut dh_next = vec![0.0; h_dim];
    let mut dc_next = vec![0.0; h_dim];

    for t in (0..tape.tokens).rev() {
        let mut dlogits = tape.probs[t].clone();
        dlogits[tape.dec_gold_ids[t]] -= 1.0;

        grads.w_out.add_outer(1.0, &dlogits, &tape.dec_hs[t]);
        linalg::axpy(1.0, &dlogits, &mut grads.b_out);

        let mut dh = dh_next;
        model.w_out.matvec_transpose_add(&dlogits, &mut dh);

        let in_id = tape.dec_in_ids[t];
        let (dx, dh_prev, dc_prev) = backward_step(
            &model.decoder,
            &tape.dec_caches[t],
            model.tgt_embed.row(in_id),
            &dh,
            &dc_next,
            &mut grads.dec,
        );
        linalg::axpy(1.0, &dx, grads.tgt_embed.row_mut(in_id));
        dh_next = dh_prev;
        dc_next = dc_prev;
    }

    for t in (0..tape.enc_ids.len()).rev() {
        let id = tape.enc_ids[t];
        let (dx, dh_prev, dc_prev) = backward_step(
            &model.encoder,
            &tape.enc_caches[t],
            model.src_embed.row(id),
            &dh_next,
            &dc_next,
            &mut grads.enc,
        );
        linalg::axpy(1.0, &dx, grads.src_embed.row_mut(id));
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
}

fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    step: f64,
) {
    let bc1 = 1.0 - BETA1.powf(step);
    let bc2 = 1.0 - BETA2.powf(step);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// Train in place on (source tokens, target tokens) pairs and return the
/// per-epoch mean token cross-entropy. The pair list is capped at
/// `hyper.max_pairs`; shuffling, batching, and updates are deterministic for
/// a fixed seed.
pub fn train_translator(
    model: &mut Seq2SeqModel,
    pairs: &[(Vec<String>, Vec<String>)],
) -> Result<Vec<f64>, TranslatorError> {
    model.hyper.validate()?;
    if pairs.is_empty() {
        return Err(TranslatorError::EmptyPairs);
    }
    let used = &pairs[..pairs.len().min(model.hyper.max_pairs)];
    let max_len = model.hyper.max_len;
    let encoded: Vec<(Vec<usize>, Vec<usize>)> = used
        .iter()
        .map(|(src, tgt)| {
            Ok((
                encode_sequence(&model.src_vocab, src, max_len)?,
                encode_sequence(&model.tgt_vocab, tgt, max_len)?,
            ))
        })
        .collect::<Result<_, TranslatorError>>()?;

    let mut grads = ModelGrads::zeros_like(model);
    let mut m = ModelGrads::zeros_like(model);
    let mut v = ModelGrads::zeros_like(model);
    let mut shuffle_rng = stage_rng(model.hyper.seed, "train-shuffle");
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut trace = Vec::with_capacity(model.hyper.epochs);
    let mut adam_step = 0u64;

    for epoch in 0..model.hyper.epochs {
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.random::<u64>() as usize % (i + 1);
            order.swap(i, j);
        }

        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0usize;
        for batch in order.chunks(model.hyper.batch_size) {
            grads.zero();
            let mut batch_loss = 0.0;
            let mut batch_tokens = 0usize;
            for &idx in batch {
                let (src_ids, tgt_ids) = &encoded[idx];
                let tape = forward_pair(model, src_ids, tgt_ids)?;
                backward_pair(model, &tape, &mut grads);
                batch_loss += tape.loss_sum;
                batch_tokens += tape.tokens;
            }
            if !batch_loss.is_finite() {
                return Err(TranslatorError::Divergence { epoch });
            }
            grads.scale(1.0 / batch_tokens as f64);

            let norm = grads.global_norm();
            if norm > model.hyper.grad_clip {
                grads.scale(model.hyper.grad_clip / norm);
            }

            adam_step += 1;
            let lr = model.hyper.learning_rate;
            let step = adam_step as f64;
            let param_slices = model_slices_mut(model);
            let grad_slices = grads.slices();
            let m_slices = m.slices_mut();
            let v_slices = v.slices_mut();
            for (((p, g), mm), vv) in param_slices
                .into_iter()
                .zip(grad_slices)
                .zip(m_slices)
                .zip(v_slices)
            {
                adam_update(p, g, mm, vv, lr, step);
            }

            epoch_loss += batch_loss;
            epoch_tokens += batch_tokens;
        }

        let mean = epoch_loss / epoch_tokens as f64;
        if !mean.is_finite() {
            return Err(TranslatorError::Divergence { epoch });
        }
        trace.push(mean);
    }
    Ok(trace)
}

/// Mean token cross-entropy of one pair under the current parameters.
pub(crate) fn pair_mean_loss(
    model: &Seq2SeqModel,
    src_ids: &[usize],
    tgt_ids: &[usize],
) -> Result<f64, TranslatorError> {
    let tape = forward_pair(model, src_ids, tgt_ids)?;
    Ok(tape.loss_sum / tape.tokens as f64)
}

/// Teacher-forced next-token argmax predictions for one pair, paired with
/// the gold ids. Ties resolve to the lowest index, padding and start markers
/// are never predicted.
pub(crate) fn forced_predictions(
    model: &Seq2SeqModel,
    src_ids: &[usize],
    tgt_ids: &[usize],
) -> Result<Vec<(usize, usize)>, TranslatorError> {
    let tape = forward_pair(model, src_ids, tgt_ids)?;
    let mut out = Vec::with_capacity(tape.tokens);
    for t in 0..tape.tokens {
        let probs = &tape.probs[t];
        let mut best = Vocabulary::EOS;
        let mut best_score = f64::NEG_INFINITY;
        for (id, &p) in probs.iter().enumerate() {
            if id == Vocabulary::PAD || id == Vocabulary::SOS {
                continue;
            }
            if p > best_score {
                best_score = p;
                best = id;
            }
        }
        out.push((best, tape.dec_gold_ids[t]));
    }
    Ok(out)
}

pub(crate) fn encode_pair_ids(
    model: &Seq2SeqModel,
    pair: (&[String], &[String]),
) -> Result<(Vec<usize>, Vec<usize>), TranslatorError> {
    Ok((
        encode_sequence(&model.src_vocab, pair.0, model.hyper.max_len)?,
        encode_sequence(&model.tgt_vocab, pair.1, model.hyper.max_len)?,
    ))
}
