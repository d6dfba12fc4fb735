//! Binary model files and JSON-lines vector export.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "SQEM" | version u32 | dim u32 | min_n u32 | max_n u32
//! with_boundaries u8 | bucket_count u32 | mode u8 | seed u64
//! window u32 | negatives u32 | epochs u32 | lr f64 | min_count u64
//! subsample f64 (0 = off)
//! vocab_len u64, then per token: text_len u32 | text bytes | count u64
//! input matrix  (vocab_len + bucket_count) x dim f32
//! context matrix vocab_len x dim f32
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::Serialize;

use super::{EmbedError, EmbeddingModel, Hyperparams, Matrix, TrainMode, Vocabulary};
use crate::subseq::{self, NgramRange};

pub const MODEL_MAGIC: [u8; 4] = *b"SQEM";
pub const MODEL_VERSION: u32 = 1;

fn to_u32(v: usize, what: &str) -> Result<u32, EmbedError> {
    u32::try_from(v).map_err(|_| EmbedError::Format(format!("{what} {v} does not fit in u32")))
}

pub fn write_model<W: Write>(model: &EmbeddingModel, out: &mut W) -> Result<(), EmbedError> {
    let hp = model.hyperparams();
    out.write_all(&MODEL_MAGIC)?;
    out.write_u32::<LittleEndian>(MODEL_VERSION)?;
    out.write_u32::<LittleEndian>(to_u32(hp.dim, "dim")?)?;
    out.write_u32::<LittleEndian>(to_u32(hp.ngrams.min_n, "min_n")?)?;
    out.write_u32::<LittleEndian>(to_u32(hp.ngrams.max_n, "max_n")?)?;
    out.write_u8(u8::from(hp.ngrams.with_boundaries))?;
    out.write_u32::<LittleEndian>(hp.bucket_count)?;
    out.write_u8(match hp.mode {
        TrainMode::SkipGram => 0,
        TrainMode::Cbow => 1,
    })?;
    out.write_u64::<LittleEndian>(hp.seed)?;
    out.write_u32::<LittleEndian>(to_u32(hp.window, "window")?)?;
    out.write_u32::<LittleEndian>(to_u32(hp.negatives, "negatives")?)?;
    out.write_u32::<LittleEndian>(to_u32(hp.epochs, "epochs")?)?;
    out.write_f64::<LittleEndian>(hp.lr)?;
    out.write_u64::<LittleEndian>(hp.min_count)?;
    out.write_f64::<LittleEndian>(hp.subsample.unwrap_or(0.0))?;

    let vocab = model.vocab();
    out.write_u64::<LittleEndian>(vocab.len() as u64)?;
    for (token, &count) in vocab.tokens().iter().zip(vocab.counts()) {
        let bytes = token.text().as_bytes();
        out.write_u32::<LittleEndian>(to_u32(bytes.len(), "token length")?)?;
        out.write_all(bytes)?;
        out.write_u64::<LittleEndian>(count)?;
    }
    write_floats(out, model.input_vectors().as_slice())?;
    write_floats(out, model.context_vectors().as_slice())?;
    Ok(())
}

fn write_floats<W: Write>(out: &mut W, data: &[f32]) -> Result<(), EmbedError> {
    let mut buf = Vec::with_capacity(4096 * 4);
    for chunk in data.chunks(4096) {
        buf.clear();
        for x in chunk {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

fn read_floats<R: Read>(input: &mut R, len: usize) -> Result<Vec<f32>, EmbedError> {
    let mut data = vec![0f32; len];
    input.read_f32_into::<LittleEndian>(&mut data)?;
    if let Some(bad) = data.iter().position(|x| !x.is_finite()) {
        return Err(EmbedError::Format(format!("non-finite value at offset {bad}")));
    }
    Ok(data)
}

pub fn read_model<R: Read>(input: &mut R) -> Result<EmbeddingModel, EmbedError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if magic != MODEL_MAGIC {
        return Err(EmbedError::Format("bad magic".into()));
    }
    let version = input.read_u32::<LittleEndian>()?;
    if version != MODEL_VERSION {
        return Err(EmbedError::Format(format!("unsupported version {version}")));
    }
    let dim = input.read_u32::<LittleEndian>()? as usize;
    let min_n = input.read_u32::<LittleEndian>()? as usize;
    let max_n = input.read_u32::<LittleEndian>()? as usize;
    let with_boundaries = match input.read_u8()? {
        0 => false,
        1 => true,
        other => return Err(EmbedError::Format(format!("bad boundary flag {other}"))),
    };
    let bucket_count = input.read_u32::<LittleEndian>()?;
    let mode = match input.read_u8()? {
        0 => TrainMode::SkipGram,
        1 => TrainMode::Cbow,
        other => return Err(EmbedError::Format(format!("bad mode {other}"))),
    };
    let seed = input.read_u64::<LittleEndian>()?;
    let window = input.read_u32::<LittleEndian>()? as usize;
    let negatives = input.read_u32::<LittleEndian>()? as usize;
    let epochs = input.read_u32::<LittleEndian>()? as usize;
    let lr = input.read_f64::<LittleEndian>()?;
    let min_count = input.read_u64::<LittleEndian>()?;
    let subsample = input.read_f64::<LittleEndian>()?;
    let hp = Hyperparams {
        mode,
        dim,
        window,
        negatives,
        epochs,
        lr,
        seed,
        ngrams: NgramRange {
            min_n,
            max_n,
            with_boundaries,
        },
        bucket_count,
        min_count,
        subsample: (subsample > 0.0).then_some(subsample),
        threads: 1,
    };
    hp.validate()
        .map_err(|e| EmbedError::Format(format!("invalid header: {e}")))?;

    let vocab_len = input.read_u64::<LittleEndian>()? as usize;
    let mut tokens = Vec::with_capacity(vocab_len.min(1 << 20));
    let mut counts = Vec::with_capacity(vocab_len.min(1 << 20));
    for _ in 0..vocab_len {
        let len = input.read_u32::<LittleEndian>()? as usize;
        let mut bytes = vec![0u8; len];
        input.read_exact(&mut bytes)?;
        let text = String::from_utf8(bytes).map_err(|e| EmbedError::Format(e.to_string()))?;
        tokens.push(subseq::deserialize(&text)?);
        counts.push(input.read_u64::<LittleEndian>()?);
    }
    let vocab = Vocabulary::from_parts(tokens, counts, min_count);
    let input_rows = vocab_len + bucket_count as usize;
    let input_m = Matrix::from_vec(input_rows, dim, read_floats(input, input_rows * dim)?);
    let context_m = Matrix::from_vec(vocab_len, dim, read_floats(input, vocab_len * dim)?);
    Ok(EmbeddingModel::from_parts(hp, vocab, input_m, context_m))
}

pub fn save_model(model: &EmbeddingModel, path: impl AsRef<Path>) -> Result<(), EmbedError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_model(model, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EmbeddingModel, EmbedError> {
    read_model(&mut BufReader::new(File::open(path)?))
}

#[derive(Serialize)]
struct ExportRow<'a> {
    items: &'a [String],
    count: u64,
    vector: Vec<f32>,
}

/// One JSON object per vocabulary token: its items, frequency and composed
/// vector.
pub fn export_jsonl<W: Write>(model: &EmbeddingModel, out: &mut W) -> Result<(), EmbedError> {
    let vocab = model.vocab();
    for (token, &count) in vocab.tokens().iter().zip(vocab.counts()) {
        let row = ExportRow {
            items: token.items(),
            count,
            vector: model.compose(token)?,
        };
        serde_json::to_writer(&mut *out, &row).map_err(|e| EmbedError::Format(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
