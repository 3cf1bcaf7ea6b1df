//! On-disk index layout.
//!
//! ```text
//! <dir>/manifest.json   format version, N, avgdl, analysis settings, BM25 params, checksums
//! <dir>/docs.bin        doc ids, lengths, categories (ascending id order)
//! <dir>/postings.bin    term -> [(doc ordinal, tf)] (ascending term order)
//! ```
//!
//! Binary files are little-endian; strings are a `u32` byte length followed by
//! UTF-8 bytes. The layout is stable within a format version and the writer is
//! deterministic, so equal inputs produce byte-identical files.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::analysis::AnalysisConfig;
use super::bm25::Bm25Params;
use super::index::{InvertedIndex, Posting};
use super::RetrievalError;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
const DOCS_FILE: &str = "docs.bin";
const POSTINGS_FILE: &str = "postings.bin";
const DOCS_MAGIC: &[u8; 8] = b"QZDOCS01";
const POSTINGS_MAGIC: &[u8; 8] = b"QZPOST01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub num_docs: u64,
    pub num_terms: u64,
    pub total_tokens: u64,
    pub avgdl: f64,
    pub analysis: AnalysisConfig,
    pub bm25: Bm25Params,
    pub docs_sha256: String,
    pub postings_sha256: String,
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String, RetrievalError> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| RetrievalError::Corrupt(e.to_string()))
}

fn encode_docs(index: &InvertedIndex) -> std::io::Result<Vec<u8>> {
    let mut out = Vec::new();
    out.write_all(DOCS_MAGIC)?;
    out.write_u32::<LittleEndian>(index.doc_ids.len() as u32)?;
    for i in 0..index.doc_ids.len() {
        write_str(&mut out, &index.doc_ids[i])?;
        out.write_u32::<LittleEndian>(index.doc_lengths[i])?;
        let cats = &index.doc_categories[i];
        out.write_u32::<LittleEndian>(cats.len() as u32)?;
        for c in cats {
            write_str(&mut out, c)?;
        }
    }
    Ok(out)
}

fn encode_postings(index: &InvertedIndex) -> std::io::Result<Vec<u8>> {
    let mut out = Vec::new();
    out.write_all(POSTINGS_MAGIC)?;
    let terms = index.sorted_terms();
    out.write_u32::<LittleEndian>(terms.len() as u32)?;
    for term in terms {
        let list = &index.postings[term];
        write_str(&mut out, term)?;
        out.write_u32::<LittleEndian>(list.len() as u32)?;
        for p in list {
            out.write_u32::<LittleEndian>(p.doc)?;
            out.write_u32::<LittleEndian>(p.tf)?;
        }
    }
    Ok(out)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_synced(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(bytes)?;
    w.into_inner().map_err(|e| e.into_error())?.sync_all()
}

pub fn manifest_for(index: &InvertedIndex) -> Result<(Manifest, Vec<u8>, Vec<u8>), RetrievalError> {
    let docs = encode_docs(index)?;
    let postings = encode_postings(index)?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        num_docs: index.num_docs() as u64,
        num_terms: index.num_terms() as u64,
        total_tokens: index.total_tokens,
        avgdl: index.avgdl(),
        analysis: index.analysis,
        bm25: index.params,
        docs_sha256: sha256_hex(&docs),
        postings_sha256: sha256_hex(&postings),
    };
    Ok((manifest, docs, postings))
}

/// Writes the index to `dir`.
///
/// Files are staged in a sibling temporary directory and moved into place
/// with a rename, so readers never observe a half-written index. An existing
/// index at `dir` is replaced; any other existing non-empty directory is
/// refused. On failure the staging directory is removed.
pub fn save(index: &InvertedIndex, dir: &Path) -> Result<Manifest, RetrievalError> {
    let (manifest, docs, postings) = manifest_for(index)?;
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::env::current_dir()?,
    };
    fs::create_dir_all(&parent)?;

    if dir.exists() {
        let is_index = dir.join(MANIFEST_FILE).is_file();
        let is_empty = dir.is_dir() && fs::read_dir(dir)?.next().is_none();
        if !is_index && !is_empty {
            return Err(RetrievalError::Contract(format!(
                "{} exists and is not an index directory",
                dir.display()
            )));
        }
    }

    let staging = tempfile::Builder::new()
        .prefix(".qzero-index-")
        .tempdir_in(&parent)?;
    write_synced(&staging.path().join(DOCS_FILE), &docs)?;
    write_synced(&staging.path().join(POSTINGS_FILE), &postings)?;
    let manifest_json = serde_json::to_vec_pretty(&manifest)?;
    write_synced(&staging.path().join(MANIFEST_FILE), &manifest_json)?;

    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    let staged = staging.keep();
    if let Err(e) = fs::rename(&staged, dir) {
        let _ = fs::remove_dir_all(&staged);
        return Err(e.into());
    }
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, RetrievalError> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(|e| {
        RetrievalError::Unavailable(format!("cannot read {}: {e}", path.display()))
    })?;
    let manifest: Manifest = serde_json::from_slice(&bytes)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(RetrievalError::Corrupt(format!(
            "unsupported index format version {} (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    Ok(manifest)
}

/// Loads an index, verifying checksums and structural invariants.
pub fn load(dir: &Path) -> Result<InvertedIndex, RetrievalError> {
    let manifest = read_manifest(dir)?;
    let docs = fs::read(dir.join(DOCS_FILE))?;
    let postings = fs::read(dir.join(POSTINGS_FILE))?;
    if sha256_hex(&docs) != manifest.docs_sha256 || sha256_hex(&postings) != manifest.postings_sha256 {
        return Err(RetrievalError::Corrupt("checksum mismatch".into()));
    }

    let mut r = BufReader::new(docs.as_slice());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DOCS_MAGIC {
        return Err(RetrievalError::Corrupt("bad docs header".into()));
    }
    let n = r.read_u32::<LittleEndian>()? as usize;
    let mut doc_ids = Vec::with_capacity(n);
    let mut doc_lengths = Vec::with_capacity(n);
    let mut doc_categories = Vec::with_capacity(n);
    for _ in 0..n {
        doc_ids.push(read_str(&mut r)?);
        doc_lengths.push(r.read_u32::<LittleEndian>()?);
        let nc = r.read_u32::<LittleEndian>()? as usize;
        let mut cats = Vec::with_capacity(nc);
        for _ in 0..nc {
            cats.push(read_str(&mut r)?);
        }
        doc_categories.push(cats);
    }

    let mut r = BufReader::new(postings.as_slice());
    r.read_exact(&mut magic)?;
    if &magic != POSTINGS_MAGIC {
        return Err(RetrievalError::Corrupt("bad postings header".into()));
    }
    let nt = r.read_u32::<LittleEndian>()? as usize;
    let mut map = HashMap::with_capacity(nt);
    for _ in 0..nt {
        let term = read_str(&mut r)?;
        let len = r.read_u32::<LittleEndian>()? as usize;
        let mut list = Vec::with_capacity(len);
        for _ in 0..len {
            let doc = r.read_u32::<LittleEndian>()?;
            let tf = r.read_u32::<LittleEndian>()?;
            list.push(Posting { doc, tf });
        }
        map.insert(term, list);
    }

    let index = InvertedIndex {
        doc_ids,
        doc_lengths,
        doc_categories,
        postings: map,
        total_tokens: manifest.total_tokens,
        analysis: manifest.analysis,
        params: manifest.bm25,
    };
    index.check_invariants()?;
    if index.num_docs() as u64 != manifest.num_docs {
        return Err(RetrievalError::Corrupt("document count disagrees with manifest".into()));
    }
    Ok(index)
}

/// Loads an index and refuses it unless it was built with `expected` analysis.
pub fn load_checked(dir: &Path, expected: &AnalysisConfig) -> Result<InvertedIndex, RetrievalError> {
    let manifest = read_manifest(dir)?;
    if manifest.analysis != *expected {
        return Err(RetrievalError::AnalysisMismatch {
            index: manifest.analysis,
            requested: *expected,
        });
    }
    load(dir)
}
