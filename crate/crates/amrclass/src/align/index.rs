//! Word index over the reference set: every w-mer made of plain `ACGT` maps
//! to its occurrences as `(reference, offset)` pairs. W-mers containing `N`
//! (or anything else) are skipped.
//!
//! The index persists as a single binary file: the `AMRIDX1\0` magic, the
//! word size, then each reference (id, title, sequence) with little-endian
//! length prefixes. The w-mer table is rebuilt on load, so the file depends
//! only on the reference order and bytes — re-indexing the same input
//! produces an identical file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use std::collections::HashMap;

use crate::seqio::SeqRecord;

use super::{AlignError, Result};

pub const INDEX_MAGIC: &[u8; 8] = b"AMRIDX1\0";
pub const MIN_WORD_SIZE: usize = 4;
pub const MAX_WORD_SIZE: usize = 16;

#[derive(Debug, Clone)]
pub struct IndexedRef {
    pub id: String,
    pub title: String,
    pub seq: Vec<u8>,
}

#[derive(Debug)]
pub struct WordIndex {
    word_size: usize,
    refs: Vec<IndexedRef>,
    table: HashMap<u64, Vec<(u32, u32)>>,
    total_db_length: u64,
}

/// Pack a w-mer into 2 bits per base; `None` if any byte is not plain ACGT.
pub(crate) fn pack_word(word: &[u8]) -> Option<u64> {
    let mut packed = 0u64;
    for &b in word {
        let code = match b {
            b'A' => 0u64,
            b'C' => 1,
            b'G' => 2,
            b'T' => 3,
            _ => return None,
        };
        packed = (packed << 2) | code;
    }
    Some(packed)
}

impl WordIndex {
    /// Build the index over preprocessed references.
    pub fn build(references: &[SeqRecord], word_size: usize) -> Result<WordIndex> {
        if references.is_empty() {
            return Err(AlignError::EmptyReferenceSet);
        }
        if !(MIN_WORD_SIZE..=MAX_WORD_SIZE).contains(&word_size) {
            return Err(AlignError::BadWordSize { word_size });
        }
        let refs: Vec<IndexedRef> = references
            .iter()
            .map(|r| IndexedRef {
                id: r.id.clone(),
                title: r.header.clone(),
                seq: r.sequence.as_bytes().to_vec(),
            })
            .collect();
        Ok(Self::from_refs(refs, word_size))
    }

    fn from_refs(refs: Vec<IndexedRef>, word_size: usize) -> WordIndex {
        let mut table: HashMap<u64, Vec<(u32, u32)>> = HashMap::new();
        let mut total = 0u64;
        for (ref_idx, r) in refs.iter().enumerate() {
            total += r.seq.len() as u64;
            if r.seq.len() < word_size {
                continue;
            }
            for offset in 0..=(r.seq.len() - word_size) {
                if let Some(packed) = pack_word(&r.seq[offset..offset + word_size]) {
                    table
                        .entry(packed)
                        .or_default()
                        .push((ref_idx as u32, offset as u32));
                }
            }
        }
        WordIndex {
            word_size,
            refs,
            table,
            total_db_length: total,
        }
    }

    pub fn word_size(&self) -> usize {
        self.word_size
    }

    pub fn total_db_length(&self) -> u64 {
        self.total_db_length
    }

    pub fn references(&self) -> &[IndexedRef] {
        &self.refs
    }

    /// All `(reference, offset)` occurrences of a packed w-mer.
    pub(crate) fn occurrences_packed(&self, packed: u64) -> &[(u32, u32)] {
        self.table.get(&packed).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All occurrences of a textual w-mer (must have length `word_size`).
    pub fn occurrences(&self, word: &str) -> Vec<(u32, u32)> {
        if word.len() != self.word_size {
            return Vec::new();
        }
        match pack_word(word.as_bytes()) {
            Some(packed) => self.occurrences_packed(packed).to_vec(),
            None => Vec::new(),
        }
    }

    /// Number of indexed (w-mer, position) postings.
    pub fn indexed_positions(&self) -> usize {
        self.table.values().map(Vec::len).sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(INDEX_MAGIC)?;
        out.write_all(&(self.word_size as u32).to_le_bytes())?;
        out.write_all(&(self.refs.len() as u32).to_le_bytes())?;
        for r in &self.refs {
            write_bytes(out, r.id.as_bytes())?;
            write_bytes(out, r.title.as_bytes())?;
            out.write_all(&(r.seq.len() as u64).to_le_bytes())?;
            out.write_all(&r.seq)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<WordIndex> {
        let mut input = BufReader::new(File::open(path)?);
        Self::read_from(&mut input)
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<WordIndex> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != INDEX_MAGIC {
            return Err(AlignError::InvalidIndex(format!(
                "bad magic {:?}, expected {:?}",
                magic, INDEX_MAGIC
            )));
        }
        let word_size = read_u32(input)? as usize;
        if !(MIN_WORD_SIZE..=MAX_WORD_SIZE).contains(&word_size) {
            return Err(AlignError::InvalidIndex(format!(
                "word size {word_size} out of range"
            )));
        }
        let n_refs = read_u32(input)? as usize;
        let mut refs = Vec::with_capacity(n_refs);
        for _ in 0..n_refs {
            let id = read_string(input)?;
            let title = read_string(input)?;
            let seq_len = read_u64(input)? as usize;
            let mut seq = vec![0u8; seq_len];
            input.read_exact(&mut seq)?;
            refs.push(IndexedRef { id, title, seq });
        }
        Ok(Self::from_refs(refs, word_size))
    }
}

fn write_bytes<W: Write>(out: &mut W, bytes: &[u8]) -> std::io::Result<()> {
    out.write_all(&(bytes.len() as u32).to_le_bytes())?;
    out.write_all(bytes)
}

fn read_u32<R: Read>(input: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(input: &mut R) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_string<R: Read>(input: &mut R) -> Result<String> {
    let len = read_u32(input)? as usize;
    let mut buf = vec![0u8; len];
    input.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| AlignError::InvalidIndex(format!("non-utf8 string: {e}")))
}
