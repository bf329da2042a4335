//! Model files.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! "EMB1" | u32 vocab_size | u32 dim | u32 meta_len | meta (JSON, meta_len bytes)
//! then vocab_size rows of: u32 word_len | word (UTF-8) | dim x f32
//! ```
//!
//! The metadata block carries provenance and word counts. The text format is
//! the usual `vocab_size dim` header followed by `word v1 ... vd` lines.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::EmbeddingModel;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::hyper::HyperParams;

const MAGIC: &[u8; 4] = b"EMB1";

#[derive(Serialize, Deserialize)]
struct Meta {
    model_id: String,
    corpus_id: String,
    hyper: HyperParams,
    train_seconds: f64,
    counts: Vec<u64>,
    total_tokens: u64,
    min_count: u64,
}

pub fn save_model(model: &EmbeddingModel, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let vocab = model.vocab();
    let meta = Meta {
        model_id: model.model_id.clone(),
        corpus_id: model.corpus_id.clone(),
        hyper: model.hyper.clone(),
        train_seconds: model.train_seconds,
        counts: vocab.counts().to_vec(),
        total_tokens: vocab.total_tokens(),
        min_count: vocab.min_count(),
    };
    let meta = serde_json::to_vec(&meta)?;
    out.write_all(MAGIC)?;
    out.write_all(&(model.len() as u32).to_le_bytes())?;
    out.write_all(&(model.dim() as u32).to_le_bytes())?;
    out.write_all(&(meta.len() as u32).to_le_bytes())?;
    out.write_all(&meta)?;
    for (word, row) in vocab.words().iter().zip(model.vectors().rows()) {
        out.write_all(&(word.len() as u32).to_le_bytes())?;
        out.write_all(word.as_bytes())?;
        for x in row {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Write the interchange text format with six significant digits.
pub fn save_model_text(model: &EmbeddingModel, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{} {}", model.len(), model.dim())?;
    for (word, row) in model.vocab().words().iter().zip(model.vectors().rows()) {
        out.write_all(word.as_bytes())?;
        for x in row {
            write!(out, " {x:.5e}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Load a model, detecting the format from the first bytes.
pub fn load_model(path: &Path) -> Result<EmbeddingModel> {
    let mut reader = BufReader::new(File::open(path)?);
    let is_binary = reader.fill_buf()?.starts_with(MAGIC);
    if is_binary {
        read_binary(&mut reader)
    } else {
        let fallback_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        read_text(reader, &fallback_id)
    }
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format(format!("truncated file while reading {what}")))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_binary<R: Read>(r: &mut R) -> Result<EmbeddingModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    let n = read_u32(r, "vocab size")? as usize;
    let dim = read_u32(r, "dimension")? as usize;
    let meta_len = read_u32(r, "metadata length")? as usize;
    let mut meta = vec![0u8; meta_len];
    r.read_exact(&mut meta)
        .map_err(|_| Error::format("truncated metadata"))?;
    let meta: Meta = serde_json::from_slice(&meta)?;
    if meta.counts.len() != n {
        return Err(Error::format(format!(
            "metadata lists {} counts for {n} words",
            meta.counts.len()
        )));
    }
    let mut words = Vec::with_capacity(n);
    let mut vectors = Array2::<f32>::zeros((n, dim));
    let mut buf = [0u8; 4];
    for i in 0..n {
        let len = read_u32(r, "word length")? as usize;
        let mut word = vec![0u8; len];
        r.read_exact(&mut word)
            .map_err(|_| Error::format(format!("truncated word in row {i}")))?;
        words.push(String::from_utf8(word).map_err(|_| Error::format(format!("row {i}: word is not UTF-8")))?);
        for x in vectors.row_mut(i).iter_mut() {
            r.read_exact(&mut buf)
                .map_err(|_| Error::format(format!("truncated vector in row {i}")))?;
            *x = f32::from_le_bytes(buf);
        }
    }
    if r.read(&mut buf)? != 0 {
        return Err(Error::format("trailing bytes after last row"));
    }
    let vocab = Vocabulary::from_parts(words, meta.counts, meta.total_tokens, meta.min_count)?;
    EmbeddingModel::new(
        meta.model_id,
        meta.corpus_id,
        meta.hyper,
        meta.train_seconds,
        Arc::new(vocab),
        vectors,
    )
}

fn read_text<R: BufRead>(reader: R, model_id: &str) -> Result<EmbeddingModel> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::format("empty file"))?;
    let mut parts = header.split_whitespace();
    let parse_dim = |s: Option<&str>| -> Result<usize> {
        s.and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(format!("malformed header `{header}`")))
    };
    let n = parse_dim(parts.next())?;
    let dim = parse_dim(parts.next())?;
    if parts.next().is_some() || dim == 0 {
        return Err(Error::format(format!("malformed header `{header}`")));
    }
    let mut words = Vec::with_capacity(n);
    let mut vectors = Array2::<f32>::zeros((n, dim));
    let mut row = 0;
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if row == n {
            return Err(Error::format(format!("more than {n} rows")));
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().unwrap();
        let values: Vec<f32> = fields
            .map(|f| f.parse::<f32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(format!("line {}: bad number", lineno + 2)))?;
        if values.len() != dim {
            return Err(Error::format(format!(
                "line {}: {} values, expected {dim}",
                lineno + 2,
                values.len()
            )));
        }
        words.push(word.to_string());
        vectors.row_mut(row).iter_mut().zip(values).for_each(|(d, v)| *d = v);
        row += 1;
    }
    if row != n {
        return Err(Error::format(format!("header announces {n} rows, found {row}")));
    }
    let vocab = Vocabulary::from_words(words)?;
    let hyper = HyperParams {
        size: dim,
        ..HyperParams::default()
    };
    EmbeddingModel::new(model_id.to_string(), String::new(), hyper, 0.0, Arc::new(vocab), vectors)
}
