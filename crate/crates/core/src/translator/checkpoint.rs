//! Model checkpoints: a JSON manifest, one little-endian f64 blob, and the
//! two vocabulary files. Round-trips are bit-exact.

use crate::corpus::Vocabulary;
use crate::linalg::Matrix;
use crate::translator::lstm::LstmCellParams;
use crate::translator::{Seq2SeqModel, TrainConfig, TranslatorError};
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

const FORMAT: &str = "seq2seq-checkpoint";
const VERSION: u32 = 1;
const DTYPE: &str = "f64";
const SRC_VOCAB_FILE: &str = "src_vocab.tsv";
const TGT_VOCAB_FILE: &str = "tgt_vocab.tsv";
const BLOB_FILE: &str = "params.bin";
const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    rows: usize,
    cols: usize,
    offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    dtype: String,
    d: usize,
    h: usize,
    src_vocab: String,
    tgt_vocab: String,
    blob: String,
    hyper: TrainConfig,
    tensors: Vec<TensorMeta>,
}

fn tensor_views(model: &Seq2SeqModel) -> [(&'static str, usize, usize, &[f64]); 10] {
    let d = model.embed_dim();
    let h = model.hidden_dim();
    [
        ("src_embed", model.src_vocab.len(), d, model.src_embed.data()),
        ("tgt_embed", model.tgt_vocab.len(), d, model.tgt_embed.data()),
        ("enc_w_x", 4 * h, d, model.encoder.w_x.data()),
        ("enc_w_h", 4 * h, h, model.encoder.w_h.data()),
        ("enc_b", 4 * h, 1, &model.encoder.b),
        ("dec_w_x", 4 * h, d, model.decoder.w_x.data()),
        ("dec_w_h", 4 * h, h, model.decoder.w_h.data()),
        ("dec_b", 4 * h, 1, &model.decoder.b),
        ("w_out", model.tgt_vocab.len(), h, model.w_out.data()),
        ("b_out", model.tgt_vocab.len(), 1, &model.b_out),
    ]
}

pub fn save_model(model: &Seq2SeqModel, dir: &Path) -> Result<(), TranslatorError> {
    fs::create_dir_all(dir)?;

    model
        .src_vocab
        .save(BufWriter::new(File::create(dir.join(SRC_VOCAB_FILE))?))?;
    model
        .tgt_vocab
        .save(BufWriter::new(File::create(dir.join(TGT_VOCAB_FILE))?))?;

    let views = tensor_views(model);
    let mut tensors = Vec::with_capacity(views.len());
    let mut offset = 0u64;
    let mut blob = BufWriter::new(File::create(dir.join(BLOB_FILE))?);
    for (name, rows, cols, data) in views {
        debug_assert_eq!(data.len(), rows * cols);
        tensors.push(TensorMeta {
            name: name.to_string(),
            rows,
            cols,
            offset,
        });
        for value in data {
            blob.write_all(&value.to_le_bytes())?;
        }
        offset += (rows * cols * 8) as u64;
    }
    blob.flush()?;

    let manifest = Manifest {
        format: FORMAT.to_string(),
        version: VERSION,
        dtype: DTYPE.to_string(),
        d: model.embed_dim(),
        h: model.hidden_dim(),
        src_vocab: SRC_VOCAB_FILE.to_string(),
        tgt_vocab: TGT_VOCAB_FILE.to_string(),
        blob: BLOB_FILE.to_string(),
        hyper: model.hyper.clone(),
        tensors,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| TranslatorError::Format(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(())
}

fn take_tensor(
    blob: &[u8],
    meta: &TensorMeta,
    expected_name: &str,
    expected_rows: usize,
    expected_cols: usize,
    running_offset: &mut u64,
) -> Result<Vec<f64>, TranslatorError> {
    if meta.name != expected_name {
        return Err(TranslatorError::Format(format!(
            "expected tensor {expected_name:?}, manifest lists {:?}",
            meta.name
        )));
    }
    if meta.rows != expected_rows || meta.cols != expected_cols {
        return Err(TranslatorError::Format(format!(
            "tensor {expected_name}: manifest shape {}x{}, model requires {}x{}",
            meta.rows, meta.cols, expected_rows, expected_cols
        )));
    }
    if meta.offset != *running_offset {
        return Err(TranslatorError::Format(format!(
            "tensor {expected_name}: offset {} does not follow previous tensor ({})",
            meta.offset, running_offset
        )));
    }
    let bytes = expected_rows * expected_cols * 8;
    let start = meta.offset as usize;
    let end = start + bytes;
    if end > blob.len() {
        return Err(TranslatorError::Format(format!(
            "tensor {expected_name}: blob ends at {} but tensor needs {}..{}",
            blob.len(),
            start,
            end
        )));
    }
    *running_offset += bytes as u64;
    Ok(blob[start..end]
        .chunks_exact(8)
        .map(|chunk| f64::from_le_bytes(chunk.try_into().unwrap()))
        .collect())
}

pub fn load_model(dir: &Path) -> Result<Seq2SeqModel, TranslatorError> {
    let manifest_text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)
        .map_err(|e| TranslatorError::Format(format!("manifest: {e}")))?;
    if manifest.format != FORMAT {
        return Err(TranslatorError::Format(format!(
            "unknown format {:?}",
            manifest.format
        )));
    }
    if manifest.version != VERSION {
        return Err(TranslatorError::Format(format!(
            "unsupported version {}",
            manifest.version
        )));
    }
    if manifest.dtype != DTYPE {
        return Err(TranslatorError::Format(format!(
            "unsupported dtype {:?}",
            manifest.dtype
        )));
    }
    if manifest.hyper.latent_dim != manifest.h {
        return Err(TranslatorError::Format(format!(
            "manifest h {} disagrees with hyper.latent_dim {}",
            manifest.h, manifest.hyper.latent_dim
        )));
    }
    manifest.hyper.validate()?;

    let src_vocab =
        Vocabulary::load(BufReader::new(File::open(dir.join(&manifest.src_vocab))?))?;
    let tgt_vocab =
        Vocabulary::load(BufReader::new(File::open(dir.join(&manifest.tgt_vocab))?))?;
    let blob = fs::read(dir.join(&manifest.blob))?;

    let (d, h) = (manifest.d, manifest.h);
    let expected: [(&str, usize, usize); 10] = [
        ("src_embed", src_vocab.len(), d),
        ("tgt_embed", tgt_vocab.len(), d),
        ("enc_w_x", 4 * h, d),
        ("enc_w_h", 4 * h, h),
        ("enc_b", 4 * h, 1),
        ("dec_w_x", 4 * h, d),
        ("dec_w_h", 4 * h, h),
        ("dec_b", 4 * h, 1),
        ("w_out", tgt_vocab.len(), h),
        ("b_out", tgt_vocab.len(), 1),
    ];
    if manifest.tensors.len() != expected.len() {
        return Err(TranslatorError::Format(format!(
            "manifest lists {} tensors, expected {}",
            manifest.tensors.len(),
            expected.len()
        )));
    }
    let total: usize = expected.iter().map(|(_, r, c)| r * c * 8).sum();
    if blob.len() != total {
        return Err(TranslatorError::Format(format!(
            "blob holds {} bytes, parameters require {}",
            blob.len(),
            total
        )));
    }

    let mut running = 0u64;
    let mut data = Vec::with_capacity(expected.len());
    for (meta, (name, rows, cols)) in manifest.tensors.iter().zip(expected) {
        data.push((
            take_tensor(&blob, meta, name, rows, cols, &mut running)?,
            rows,
            cols,
        ));
    }
    let mut it = data.into_iter();
    let grab = |it: &mut std::vec::IntoIter<(Vec<f64>, usize, usize)>| {
        let (values, rows, cols) = it.next().unwrap();
        Matrix::from_vec(rows, cols, values)
    };
    let src_embed = grab(&mut it);
    let tgt_embed = grab(&mut it);
    let enc_w_x = grab(&mut it);
    let enc_w_h = grab(&mut it);
    let enc_b = it.next().unwrap().0;
    let dec_w_x = grab(&mut it);
    let dec_w_h = grab(&mut it);
    let dec_b = it.next().unwrap().0;
    let w_out = grab(&mut it);
    let b_out = it.next().unwrap().0;

    let model = Seq2SeqModel {
        src_vocab,
        tgt_vocab,
        src_embed,
        tgt_embed,
        encoder: LstmCellParams {
            w_x: enc_w_x,
            w_h: enc_w_h,
            b: enc_b,
        },
        decoder: LstmCellParams {
            w_x: dec_w_x,
            w_h: dec_w_h,
            b: dec_b,
        },
        w_out,
        b_out,
        hyper: manifest.hyper,
    };
    model.encoder.validate()?;
    model.decoder.validate()?;
    Ok(model)
}
