//! Two-party outsourced retrieval.
//!
//! Alice hashes her compact matrix columns with secret SBE parameters and
//! ships only the packed hashes plus public support-set configuration. Bob
//! runs the hashed KP-Centrality pipeline and returns selected column
//! indices (optionally echoing the selected hashes). Alice resolves indices
//! back to plaintext locally. Both an in-process path and a framed TCP
//! transport are provided; they produce identical results.
//!
//! Wire format: frame = magic "SPIR", version 0x01, message type byte
//! (0x01 request, 0x02 response, 0x7F error), u32 LE payload length,
//! payload. Frames above 64 MiB are rejected. All integers little-endian.

use crate::centrality::{self, ColumnSet, Metric, Strategy, SupportSetConfig};
use crate::sbe::{self, BitHash, SbeParams};
use crate::text::{self, CompactMatrix, KeyPhrase, Passage, Weighting};
use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

pub const WIRE_MAGIC: &[u8; 4] = b"SPIR";
pub const WIRE_VERSION: u8 = 0x01;
pub const MSG_REQUEST: u8 = 0x01;
pub const MSG_RESPONSE: u8 = 0x02;
pub const MSG_ERROR: u8 = 0x7F;
pub const MAX_FRAME_BYTES: usize = 64 * 1024 * 1024;

pub const ERR_MALFORMED_FRAME: u16 = 1;
pub const ERR_VERSION_MISMATCH: u16 = 2;
pub const ERR_FRAME_TOO_LARGE: u16 = 3;
pub const ERR_MALFORMED_BUNDLE: u16 = 4;
pub const ERR_INTERNAL: u16 = 5;

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("wire version mismatch: got {0:#04x}")]
    VersionMismatch(u8),
    #[error("frame of {0} bytes exceeds the {MAX_FRAME_BYTES}-byte cap")]
    FrameTooLarge(usize),
    #[error("malformed bundle: {0}")]
    MalformedBundle(String),
    #[error("remote error {code}: {message}")]
    Remote { code: u16, message: String },
    #[error("unknown bundle id")]
    UnknownBundle,
    #[error("result index {0} out of range for {1} passages")]
    IndexOutOfRange(usize, usize),
    #[error(
        "vocabulary size {vocab} does not match params dimension {params}; \
         regenerate params with --dim {vocab} or enable feature hashing"
    )]
    DimensionMismatch { vocab: usize, params: usize },
    #[error(transparent)]
    Centrality(#[from] centrality::CentralityError),
    #[error(transparent)]
    Sbe(#[from] sbe::SbeError),
    #[error(transparent)]
    Text(#[from] text::TextError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Everything that crosses the Alice -> Bob trust boundary. Holds packed
/// hashes and public configuration only: no terms, no counts, no weights,
/// and none of the SBE parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashBundle {
    pub bundle_id: [u8; 16],
    pub m: u32,
    pub num_passages: u32,
    pub num_keyphrases: u32,
    pub requested_n: u32,
    pub strategy: Strategy,
    pub k: u32,
    pub hashes: Vec<BitHash>,
}

impl HashBundle {
    pub fn support_config(&self) -> SupportSetConfig {
        SupportSetConfig {
            strategy: self.strategy,
            k: self.k as usize,
            include_keyphrases_as_members: true,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let hash_bytes = (self.m as usize).div_ceil(8);
        let mut out =
            Vec::with_capacity(37 + self.hashes.len() * hash_bytes);
        out.extend_from_slice(&self.bundle_id);
        out.extend_from_slice(&self.m.to_le_bytes());
        out.extend_from_slice(&self.num_passages.to_le_bytes());
        out.extend_from_slice(&self.num_keyphrases.to_le_bytes());
        out.extend_from_slice(&self.requested_n.to_le_bytes());
        out.push(match self.strategy {
            Strategy::MeanThreshold => 0,
            Strategy::KNearest => 1,
        });
        out.extend_from_slice(&self.k.to_le_bytes());
        for h in &self.hashes {
            out.extend_from_slice(h.as_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProtocolError> {
        if bytes.len() < 37 {
            return Err(ProtocolError::MalformedBundle("payload shorter than header".into()));
        }
        let mut bundle_id = [0u8; 16];
        bundle_id.copy_from_slice(&bytes[0..16]);
        let m = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
        let num_passages = u32::from_le_bytes(bytes[20..24].try_into().unwrap());
        let num_keyphrases = u32::from_le_bytes(bytes[24..28].try_into().unwrap());
        let requested_n = u32::from_le_bytes(bytes[28..32].try_into().unwrap());
        let strategy = match bytes[32] {
            0 => Strategy::MeanThreshold,
            1 => Strategy::KNearest,
            other => {
                return Err(ProtocolError::MalformedBundle(format!(
                    "unknown strategy byte {other:#04x}"
                )))
            }
        };
        let k = u32::from_le_bytes(bytes[33..37].try_into().unwrap());
        if m == 0 || num_passages == 0 {
            return Err(ProtocolError::MalformedBundle("zero M or zero passages".into()));
        }
        let hash_bytes = (m as usize).div_ceil(8);
        let count = (num_passages + num_keyphrases) as usize;
        let expected = 37 + count * hash_bytes;
        if bytes.len() != expected {
            return Err(ProtocolError::MalformedBundle(format!(
                "expected {expected} bytes for {count} hashes, got {}",
                bytes.len()
            )));
        }
        let mut hashes = Vec::with_capacity(count);
        for i in 0..count {
            let start = 37 + i * hash_bytes;
            let chunk = bytes[start..start + hash_bytes].to_vec();
            hashes.push(BitHash::from_bytes(chunk, m as usize)?);
        }
        Ok(Self {
            bundle_id,
            m,
            num_passages,
            num_keyphrases,
            requested_n,
            strategy,
            k,
            hashes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrievalResult {
    pub bundle_id: [u8; 16],
    pub ranked: Vec<(u32, u32)>,
    pub echo_hashes: Option<Vec<BitHash>>,
}

impl RetrievalResult {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.bundle_id);
        out.extend_from_slice(&(self.ranked.len() as u32).to_le_bytes());
        for &(index, score) in &self.ranked {
            out.extend_from_slice(&index.to_le_bytes());
            out.extend_from_slice(&score.to_le_bytes());
        }
        match &self.echo_hashes {
            None => out.push(0),
            Some(hashes) => {
                out.push(1);
                for h in hashes {
                    out.extend_from_slice(h.as_bytes());
                }
            }
        }
        out
    }

    /// `m` is the hash bit length from the requesting side's bundle; it is
    /// needed to slice the optional echo section.
    pub fn from_bytes(bytes: &[u8], m: usize) -> Result<Self, ProtocolError> {
        if bytes.len() < 21 {
            return Err(ProtocolError::MalformedFrame("response payload too short".into()));
        }
        let mut bundle_id = [0u8; 16];
        bundle_id.copy_from_slice(&bytes[0..16]);
        let count = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
        let mut pos = 20;
        if bytes.len() < pos + count * 8 + 1 {
            return Err(ProtocolError::MalformedFrame("truncated response payload".into()));
        }
        let mut ranked = Vec::with_capacity(count);
        for _ in 0..count {
            let index = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
            let score = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap());
            ranked.push((index, score));
            pos += 8;
        }
        let echo_flag = bytes[pos];
        pos += 1;
        let echo_hashes = match echo_flag {
            0 => {
                if pos != bytes.len() {
                    return Err(ProtocolError::MalformedFrame("trailing response bytes".into()));
                }
                None
            }
            1 => {
                let hash_bytes = m.div_ceil(8);
                if bytes.len() != pos + count * hash_bytes {
                    return Err(ProtocolError::MalformedFrame("bad echo section length".into()));
                }
                let mut hashes = Vec::with_capacity(count);
                for i in 0..count {
                    let start = pos + i * hash_bytes;
                    hashes.push(BitHash::from_bytes(
                        bytes[start..start + hash_bytes].to_vec(),
                        m,
                    )?);
                }
                Some(hashes)
            }
            other => {
                return Err(ProtocolError::MalformedFrame(format!(
                    "bad echo flag {other:#04x}"
                )))
            }
        };
        Ok(Self { bundle_id, ranked, echo_hashes })
    }
}

struct MappingEntry {
    doc_id: String,
    passages: Vec<Passage>,
    #[allow(dead_code)]
    params: SbeParams,
}

/// Alice-side state resolving bundle ids back to plaintext. Never
/// serialized; it has no wire representation by construction.
#[derive(Default)]
pub struct PrivateMapping {
    entries: HashMap<[u8; 16], MappingEntry>,
}

impl PrivateMapping {
    pub fn doc_id(&self, bundle_id: &[u8; 16]) -> Option<&str> {
        self.entries.get(bundle_id).map(|e| e.doc_id.as_str())
    }
}

/// Deterministic 128-bit id over the public bundle contents, so identical
/// inputs always produce identical bundle bytes.
fn derive_bundle_id(header: &[u8], hashes: &[BitHash]) -> [u8; 16] {
    let mut lo = text::fnv1a64(header);
    let mut hi = 0x6c62272e07bb0142u64 ^ text::fnv1a64(header).rotate_left(17);
    for h in hashes {
        for &b in h.as_bytes() {
            lo ^= b as u64;
            lo = lo.wrapping_mul(0x100000001b3);
            hi ^= (b as u64) << 8;
            hi = hi.wrapping_mul(0x100000001b3);
        }
    }
    let mut id = [0u8; 16];
    id[0..8].copy_from_slice(&lo.to_le_bytes());
    id[8..16].copy_from_slice(&hi.to_le_bytes());
    id
}

/// Hashes prepared columns into a bundle and records the private mapping.
/// `columns` must already match `params.l` (see [`alice_prepare_matrix`]).
pub fn alice_prepare_columns(
    doc_id: &str,
    passages: &[Passage],
    columns: &[Vec<f64>],
    params: &SbeParams,
    n: usize,
    config: &SupportSetConfig,
    mapping: &mut PrivateMapping,
) -> Result<HashBundle, ProtocolError> {
    let num_passages = passages.len();
    let num_keyphrases = columns.len() - num_passages;
    let mut hashes = Vec::with_capacity(columns.len());
    for col in columns {
        if col.len() != params.l {
            return Err(ProtocolError::DimensionMismatch { vocab: col.len(), params: params.l });
        }
        hashes.push(sbe::compute_hash(col, params)?);
    }
    let mut header = Vec::new();
    header.extend_from_slice(&(params.m as u32).to_le_bytes());
    header.extend_from_slice(&(num_passages as u32).to_le_bytes());
    header.extend_from_slice(&(num_keyphrases as u32).to_le_bytes());
    header.extend_from_slice(&(n as u32).to_le_bytes());
    header.push(match config.strategy {
        Strategy::MeanThreshold => 0,
        Strategy::KNearest => 1,
    });
    header.extend_from_slice(&(config.k as u32).to_le_bytes());
    let bundle_id = derive_bundle_id(&header, &hashes);
    let bundle = HashBundle {
        bundle_id,
        m: params.m as u32,
        num_passages: num_passages as u32,
        num_keyphrases: num_keyphrases as u32,
        requested_n: n as u32,
        strategy: config.strategy,
        k: config.k as u32,
        hashes,
    };
    mapping.entries.insert(
        bundle_id,
        MappingEntry {
            doc_id: doc_id.to_string(),
            passages: passages.to_vec(),
            params: params.clone(),
        },
    );
    Ok(bundle)
}

/// Hashes a prebuilt compact matrix. Without feature hashing the vocabulary
/// size must equal `params.l`; with `feature_dim` set, columns are bucketed
/// into that dimension first.
pub fn alice_prepare_matrix(
    doc_id: &str,
    matrix: &CompactMatrix,
    params: &SbeParams,
    n: usize,
    config: &SupportSetConfig,
    feature_dim: Option<usize>,
    mapping: &mut PrivateMapping,
) -> Result<HashBundle, ProtocolError> {
    let passages: Vec<Passage> = matrix.column_meta()[..matrix.num_passages()].to_vec();
    match feature_dim {
        None => {
            if matrix.num_terms() != params.l {
                return Err(ProtocolError::DimensionMismatch {
                    vocab: matrix.num_terms(),
                    params: params.l,
                });
            }
            alice_prepare_columns(doc_id, &passages, matrix.columns(), params, n, config, mapping)
        }
        Some(dim) => {
            if dim != params.l {
                return Err(ProtocolError::DimensionMismatch { vocab: dim, params: params.l });
            }
            let hashed = matrix.feature_hashed(dim, true);
            alice_prepare_columns(doc_id, &passages, &hashed, params, n, config, mapping)
        }
    }
}

/// Full Alice-side pipeline from raw text: sentence segmentation, key-phrase
/// extraction, compact matrix, hashing.
pub fn alice_prepare(
    doc_id: &str,
    document: &str,
    params: &SbeParams,
    kp_count: usize,
    n: usize,
    config: &SupportSetConfig,
    mapping: &mut PrivateMapping,
) -> Result<HashBundle, ProtocolError> {
    let passages = text::segment(document)?;
    let key_phrases: Vec<KeyPhrase> = text::extract_key_phrases(&passages, kp_count);
    let matrix = text::build_compact_matrix(&passages, &key_phrases, Weighting::Tf, true)?;
    alice_prepare_matrix(doc_id, &matrix, params, n, config, None, mapping)
}

/// Bob's side: hashed KP-Centrality over the bundle contents and nothing
/// else. Echoes the hashes of the selected columns.
pub fn bob_retrieve(bundle: &HashBundle) -> Result<RetrievalResult, ProtocolError> {
    let expected = (bundle.num_passages + bundle.num_keyphrases) as usize;
    if bundle.hashes.len() != expected {
        return Err(ProtocolError::MalformedBundle(format!(
            "bundle declares {expected} columns but carries {}",
            bundle.hashes.len()
        )));
    }
    if bundle.hashes.iter().any(|h| h.len_bits() != bundle.m as usize) {
        return Err(ProtocolError::MalformedBundle("hash length differs from declared M".into()));
    }
    let config = bundle.support_config();
    let ranked = centrality::retrieve(
        &ColumnSet::Hashed(&bundle.hashes),
        bundle.num_passages as usize,
        (bundle.requested_n as usize).max(1),
        Metric::Hamming,
        &config,
    )?;
    let ranked: Vec<(u32, u32)> = ranked.0.iter().map(|&(i, s)| (i as u32, s as u32)).collect();
    let echo: Vec<BitHash> = ranked
        .iter()
        .map(|&(i, _)| bundle.hashes[i as usize].clone())
        .collect();
    Ok(RetrievalResult {
        bundle_id: bundle.bundle_id,
        ranked,
        echo_hashes: Some(echo),
    })
}

/// Maps result indices back to plaintext passages, preserving rank order.
pub fn alice_resolve(
    result: &RetrievalResult,
    mapping: &PrivateMapping,
) -> Result<Vec<Passage>, ProtocolError> {
    let entry = mapping
        .entries
        .get(&result.bundle_id)
        .ok_or(ProtocolError::UnknownBundle)?;
    let mut out = Vec::with_capacity(result.ranked.len());
    for &(index, _) in &result.ranked {
        let passage = entry
            .passages
            .get(index as usize)
            .ok_or(ProtocolError::IndexOutOfRange(index as usize, entry.passages.len()))?;
        out.push(passage.clone());
    }
    Ok(out)
}

// --- framing ---

pub fn write_frame(stream: &mut impl Write, msg_type: u8, payload: &[u8]) -> Result<(), ProtocolError> {
    if payload.len() > MAX_FRAME_BYTES {
        return Err(ProtocolError::FrameTooLarge(payload.len()));
    }
    let mut frame = Vec::with_capacity(10 + payload.len());
    frame.extend_from_slice(WIRE_MAGIC);
    frame.push(WIRE_VERSION);
    frame.push(msg_type);
    frame.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    frame.extend_from_slice(payload);
    stream.write_all(&frame)?;
    Ok(())
}

pub fn read_frame(stream: &mut impl Read) -> Result<(u8, Vec<u8>), ProtocolError> {
    let mut header = [0u8; 10];
    stream
        .read_exact(&mut header)
        .map_err(|e| ProtocolError::MalformedFrame(format!("truncated header: {e}")))?;
    if &header[0..4] != WIRE_MAGIC {
        return Err(ProtocolError::MalformedFrame("bad magic".into()));
    }
    if header[4] != WIRE_VERSION {
        return Err(ProtocolError::VersionMismatch(header[4]));
    }
    let msg_type = header[5];
    let len = u32::from_le_bytes(header[6..10].try_into().unwrap()) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(ProtocolError::FrameTooLarge(len));
    }
    let mut payload = vec![0u8; len];
    stream
        .read_exact(&mut payload)
        .map_err(|e| ProtocolError::MalformedFrame(format!("truncated payload: {e}")))?;
    Ok((msg_type, payload))
}

fn error_payload(code: u16, message: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 + message.len());
    out.extend_from_slice(&code.to_le_bytes());
    out.extend_from_slice(message.as_bytes());
    out
}

fn error_code_for(err: &ProtocolError) -> u16 {
    match err {
        ProtocolError::MalformedFrame(_) => ERR_MALFORMED_FRAME,
        ProtocolError::VersionMismatch(_) => ERR_VERSION_MISMATCH,
        ProtocolError::FrameTooLarge(_) => ERR_FRAME_TOO_LARGE,
        ProtocolError::MalformedBundle(_) => ERR_MALFORMED_BUNDLE,
        _ => ERR_INTERNAL,
    }
}

/// A running Bob server. One request-response per connection, a thread per
/// connection, no state across requests.
pub struct Server {
    addr: std::net::SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl Server {
    pub fn local_addr(&self) -> std::net::SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // unblock accept
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

pub fn serve(addr: &str, port: u16) -> Result<Server, ProtocolError> {
    let listener = TcpListener::bind((addr, port))?;
    let local = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = stop.clone();
    let handle = std::thread::spawn(move || {
        for conn in listener.incoming() {
            if stop_flag.load(Ordering::SeqCst) {
                break;
            }
            match conn {
                Ok(stream) => {
                    std::thread::spawn(move || handle_connection(stream));
                }
                Err(_) => continue,
            }
        }
    });
    Ok(Server { addr: local, stop, handle: Some(handle) })
}

fn handle_connection(mut stream: TcpStream) {
    let started = Instant::now();
    let outcome = (|| -> Result<[u8; 16], ProtocolError> {
        let (msg_type, payload) = read_frame(&mut stream)?;
        if msg_type != MSG_REQUEST {
            return Err(ProtocolError::MalformedFrame(format!(
                "unexpected message type {msg_type:#04x}"
            )));
        }
        let bundle = HashBundle::from_bytes(&payload)?;
        let result = bob_retrieve(&bundle)?;
        write_frame(&mut stream, MSG_RESPONSE, &result.to_bytes())?;
        Ok(bundle.bundle_id)
    })();
    match outcome {
        Ok(bundle_id) => {
            let hex: String = bundle_id.iter().map(|b| format!("{b:02x}")).collect();
            eprintln!("served bundle {hex} in {:.3} ms", started.elapsed().as_secs_f64() * 1e3);
        }
        Err(err) => {
            let code = error_code_for(&err);
            let _ = write_frame(&mut stream, MSG_ERROR, &error_payload(code, &err.to_string()));
            eprintln!("request failed (code {code}): {err}");
        }
    }
}

/// Blocking request-response round trip to a Bob server.
pub fn request<A: ToSocketAddrs>(addr: A, bundle: &HashBundle) -> Result<RetrievalResult, ProtocolError> {
    let mut stream = TcpStream::connect(addr)?;
    write_frame(&mut stream, MSG_REQUEST, &bundle.to_bytes())?;
    let (msg_type, payload) = read_frame(&mut stream)?;
    match msg_type {
        MSG_RESPONSE => RetrievalResult::from_bytes(&payload, bundle.m as usize),
        MSG_ERROR => {
            if payload.len() < 2 {
                return Err(ProtocolError::MalformedFrame("short error payload".into()));
            }
            let code = u16::from_le_bytes(payload[0..2].try_into().unwrap());
            let message = String::from_utf8_lossy(&payload[2..]).into_owned();
            Err(ProtocolError::Remote { code, message })
        }
        other => Err(ProtocolError::MalformedFrame(format!(
            "unexpected message type {other:#04x}"
        ))),
    }
}
