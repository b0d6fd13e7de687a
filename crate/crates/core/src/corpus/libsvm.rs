use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;

use super::{Corpus, CorpusError, Document};

/// Parses libsvm-style bag-of-words text: `<label> <idx>:<val> ...`.
///
/// One document per non-blank line; document ids are assigned in line order
/// with blank lines skipped. The label is discarded, and a line whose first
/// token already contains `:` is read as having no label. Indices are
/// 1-based in the text and rebased to 0.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut docs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|error| CorpusError::Io {
            line: Some(lineno + 1),
            error,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let entries = parse_line(&line, true).map_err(|msg| CorpusError::Parse {
            line: lineno + 1,
            msg,
        })?;
        docs.push(Document {
            id: docs.len() as u32,
            entries,
        });
    }
    if docs.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(Corpus::from_documents(docs))
}

pub fn parse_libsvm_str(text: &str) -> Result<Corpus, CorpusError> {
    parse_libsvm(text.as_bytes())
}

/// Opens a corpus file, decompressing when the name ends in `.gz`.
pub fn load_libsvm(path: &Path) -> Result<Corpus, CorpusError> {
    let file = File::open(path).map_err(|error| CorpusError::Io { line: None, error })?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    parse_libsvm(BufReader::new(reader))
}

/// Parses the body of one line into merged `(word, count)` pairs sorted by
/// word. With `allow_label`, a leading token without `:` is skipped.
pub fn parse_line(line: &str, allow_label: bool) -> Result<Vec<(u32, u32)>, String> {
    let mut tokens = line.split_whitespace().peekable();
    if allow_label {
        if let Some(first) = tokens.peek() {
            if !first.contains(':') {
                tokens.next();
            }
        }
    }
    let mut merged: BTreeMap<u32, u32> = BTreeMap::new();
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| format!("expected <idx>:<val>, found {tok:?}"))?;
        let idx: i64 = idx
            .parse()
            .map_err(|_| format!("idx is not an integer: {idx:?}"))?;
        let val: i64 = val
            .parse()
            .map_err(|_| format!("val is not an integer: {val:?}"))?;
        if idx < 1 {
            return Err("idx must be ≥ 1".to_string());
        }
        if val < 1 {
            return Err("val must be ≥ 1".to_string());
        }
        if idx > u32::MAX as i64 || val > u32::MAX as i64 {
            return Err(format!("{tok:?} exceeds the 32-bit range"));
        }
        let slot = merged.entry((idx - 1) as u32).or_insert(0);
        *slot = slot
            .checked_add(val as u32)
            .ok_or_else(|| format!("count overflow for idx {idx}"))?;
    }
    Ok(merged.into_iter().collect())
}
