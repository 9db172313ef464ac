//! Secure binary embeddings: band-quantized random projections.
//!
//! A vector `x` of dimension `L` is hashed to `M` bits; bit `m` is
//! `floor(((<x, a_m> + w_m) / delta) mod 2)` with the projection rows `a_m`
//! i.i.d. Gaussian(0, sigma^2) and the dither `w_m` uniform over [0, delta].
//! Hamming distance between two hashes tracks the Euclidean distance between
//! the vectors as long as that distance stays below a delta-dependent radius;
//! beyond it the hashes carry no distance information.

use crate::rng::{GaussianStream, SplitMix64};
use std::io::{Read, Write};
use std::path::Path;

pub const PARAMS_MAGIC: &[u8; 4] = b"SBEP";
pub const PARAMS_VERSION: u8 = 0x01;

#[derive(Debug, thiserror::Error)]
pub enum SbeError {
    #[error("invalid dimension: L and M must be at least 1")]
    InvalidDimension,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("hash length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty distance multiset")]
    EmptyInput,
    #[error("unreachable leakage target: all distances are zero")]
    UnreachableTarget,
    #[error("bad parameter file magic")]
    BadMagic,
    #[error("unsupported parameter file version {0}")]
    BadVersion(u8),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Secret randomization state. `a` is M x L, row-major; `w` has length M.
/// Regenerating from the same (seed, L, M, delta, sigma) reproduces both
/// bit-exactly: A is drawn first (row-major) from the Gaussian stream, then
/// w from the same underlying uniform stream.
#[derive(Debug, Clone)]
pub struct SbeParams {
    pub seed: u64,
    pub l: usize,
    pub m: usize,
    pub delta: f64,
    pub sigma: f64,
    a: Vec<f64>,
    w: Vec<f64>,
}

impl SbeParams {
    pub fn generate(seed: u64, l: usize, m: usize, delta: f64, sigma: f64) -> Result<Self, SbeError> {
        if l == 0 || m == 0 {
            return Err(SbeError::InvalidDimension);
        }
        if !(delta > 0.0) || !(sigma > 0.0) {
            return Err(SbeError::InvalidParameter(format!(
                "delta and sigma must be positive (delta={delta}, sigma={sigma})"
            )));
        }
        let mut rng = SplitMix64::new(seed);
        let mut a = Vec::with_capacity(m * l);
        {
            let mut gauss = GaussianStream::new(&mut rng);
            for _ in 0..m * l {
                a.push(sigma * gauss.next());
            }
        }
        let w: Vec<f64> = (0..m).map(|_| delta * rng.next_f64()).collect();
        Ok(Self { seed, l, m, delta, sigma, a, w })
    }

    /// Builds params from explicit A and w, bypassing the generator.
    /// Used to inject hand-written matrices in tests and tools.
    pub fn from_parts(
        l: usize,
        m: usize,
        delta: f64,
        sigma: f64,
        a: Vec<f64>,
        w: Vec<f64>,
    ) -> Result<Self, SbeError> {
        if l == 0 || m == 0 {
            return Err(SbeError::InvalidDimension);
        }
        if !(delta > 0.0) || !(sigma > 0.0) {
            return Err(SbeError::InvalidParameter("delta and sigma must be positive".into()));
        }
        if a.len() != m * l {
            return Err(SbeError::DimensionMismatch { expected: m * l, got: a.len() });
        }
        if w.len() != m {
            return Err(SbeError::DimensionMismatch { expected: m, got: w.len() });
        }
        Ok(Self { seed: 0, l, m, delta, sigma, a, w })
    }

    #[inline]
    pub fn row(&self, m: usize) -> &[f64] {
        &self.a[m * self.l..(m + 1) * self.l]
    }

    pub fn dither(&self) -> &[f64] {
        &self.w
    }

    /// Bits per coefficient, M/L.
    pub fn bpc(&self) -> f64 {
        self.m as f64 / self.l as f64
    }

    /// Serialized form stores only (seed, L, M, delta, sigma); A and w are
    /// regenerated on load and never touch disk.
    pub fn to_file_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(37);
        out.extend_from_slice(PARAMS_MAGIC);
        out.push(PARAMS_VERSION);
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.l as u32).to_le_bytes());
        out.extend_from_slice(&(self.m as u32).to_le_bytes());
        out.extend_from_slice(&self.delta.to_le_bytes());
        out.extend_from_slice(&self.sigma.to_le_bytes());
        out
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self, SbeError> {
        if bytes.len() != 37 || &bytes[0..4] != PARAMS_MAGIC {
            return Err(SbeError::BadMagic);
        }
        if bytes[4] != PARAMS_VERSION {
            return Err(SbeError::BadVersion(bytes[4]));
        }
        let seed = u64::from_le_bytes(bytes[5..13].try_into().unwrap());
        let l = u32::from_le_bytes(bytes[13..17].try_into().unwrap()) as usize;
        let m = u32::from_le_bytes(bytes[17..21].try_into().unwrap()) as usize;
        let delta = f64::from_le_bytes(bytes[21..29].try_into().unwrap());
        let sigma = f64::from_le_bytes(bytes[29..37].try_into().unwrap());
        Self::generate(seed, l, m, delta, sigma)
    }

    pub fn write_file<P: AsRef<Path>>(&self, path: P) -> Result<(), SbeError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_file_bytes())?;
        Ok(())
    }

    pub fn read_file<P: AsRef<Path>>(path: P) -> Result<Self, SbeError> {
        let mut f = std::fs::File::open(path)?;
        let mut buf = Vec::new();
        f.read_to_end(&mut buf)?;
        Self::from_file_bytes(&buf)
    }
}

/// An M-bit hash, packed LSB-first: bit m lives in byte m/8 at bit m%8.
/// Pad bits of the final byte are always zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitHash {
    bytes: Vec<u8>,
    m: usize,
}

impl BitHash {
    pub fn zeros(m: usize) -> Self {
        Self { bytes: vec![0u8; m.div_ceil(8)], m }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut h = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                h.set(i);
            }
        }
        h
    }

    /// Reinterprets packed bytes as a hash of `m` bits. Pad bits are masked
    /// off so the zero-pad invariant holds regardless of input.
    pub fn from_bytes(bytes: Vec<u8>, m: usize) -> Result<Self, SbeError> {
        if bytes.len() != m.div_ceil(8) {
            return Err(SbeError::LengthMismatch(bytes.len(), m.div_ceil(8)));
        }
        let mut h = Self { bytes, m };
        h.mask_pad();
        Ok(h)
    }

    fn mask_pad(&mut self) {
        let rem = self.m % 8;
        if rem != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= (1u8 << rem) - 1;
            }
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize) {
        self.bytes[i / 8] |= 1 << (i % 8);
    }

    #[inline]
    pub fn bit(&self, i: usize) -> u8 {
        (self.bytes[i / 8] >> (i % 8)) & 1
    }

    pub fn len_bits(&self) -> usize {
        self.m
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn complement(&self) -> Self {
        let mut out = Self {
            bytes: self.bytes.iter().map(|b| !b).collect(),
            m: self.m,
        };
        out.mask_pad();
        out
    }
}

/// One bit of the universal quantizer: floor(((<x, a_m> + w_m)/delta) mod 2),
/// with mod taken as the non-negative remainder.
pub fn quantize_bit(x: &[f64], a_m: &[f64], w_m: f64, delta: f64) -> Result<u8, SbeError> {
    if x.len() != a_m.len() {
        return Err(SbeError::DimensionMismatch { expected: a_m.len(), got: x.len() });
    }
    let dot: f64 = x.iter().zip(a_m).map(|(xi, ai)| xi * ai).sum();
    Ok(quantize_projected(dot, w_m, delta))
}

#[inline]
fn quantize_projected(dot: f64, w_m: f64, delta: f64) -> u8 {
    let v = ((dot + w_m) / delta).rem_euclid(2.0);
    v.floor() as u8
}

pub fn compute_hash(x: &[f64], params: &SbeParams) -> Result<BitHash, SbeError> {
    if x.len() != params.l {
        return Err(SbeError::DimensionMismatch { expected: params.l, got: x.len() });
    }
    let mut h = BitHash::zeros(params.m);
    for m in 0..params.m {
        let row = params.row(m);
        let dot: f64 = x.iter().zip(row).map(|(xi, ai)| xi * ai).sum();
        if quantize_projected(dot, params.w[m], params.delta) == 1 {
            h.set(m);
        }
    }
    Ok(h)
}

/// Per-bit Hamming distance, popcount(h1 xor h2) / M.
pub fn normalized_hamming(h1: &BitHash, h2: &BitHash) -> Result<f64, SbeError> {
    if h1.m != h2.m {
        return Err(SbeError::LengthMismatch(h1.m, h2.m));
    }
    let diff: u32 = h1
        .bytes
        .iter()
        .zip(&h2.bytes)
        .map(|(a, b)| (a ^ b).count_ones())
        .sum();
    Ok(diff as f64 / h1.m as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPair {
    pub lower: f64,
    pub upper: f64,
    pub t: f64,
}

#[inline]
fn gauss_decay(d_e: f64, sigma: f64, delta: f64) -> f64 {
    let z = std::f64::consts::PI * sigma * d_e / (std::f64::consts::SQRT_2 * delta);
    (-z * z).exp()
}

/// Probabilistic envelope for the normalized Hamming distance between hashes
/// of vectors at Euclidean distance `d_e`; each side fails with probability
/// at most exp(-2 t^2 M).
pub fn hamming_bounds(d_e: f64, sigma: f64, delta: f64, t: f64) -> BoundPair {
    let e = gauss_decay(d_e, sigma, delta);
    BoundPair {
        lower: 0.5 - 0.5 * e - t,
        upper: 0.5 - (4.0 / (std::f64::consts::PI * std::f64::consts::PI)) * e + t,
        t,
    }
}

/// Linear-regime bound on the expected Hamming distance: sqrt(2/pi) * sigma * d_e / delta.
pub fn small_distance_expectation(d_e: f64, sigma: f64, delta: f64) -> f64 {
    (2.0 / std::f64::consts::PI).sqrt() * sigma * d_e / delta
}

/// Distance below which a pair is "informative": the t=0 lower-bound curve
/// still sits below the saturation band 0.5 - gamma.
pub fn informative_radius(sigma: f64, delta: f64, gamma: f64) -> f64 {
    // 0.5 (1 - e^{-z^2}) < 0.5 - gamma  <=>  z^2 < -ln(2 gamma)
    let z2 = -(2.0 * gamma).ln();
    z2.sqrt() * std::f64::consts::SQRT_2 * delta / (std::f64::consts::PI * sigma)
}

pub fn is_informative(d_e: f64, params: &SbeParams, gamma: f64) -> bool {
    d_e < informative_radius(params.sigma, params.delta, gamma)
}

fn leakage_fraction(distances: &[f64], sigma: f64, delta: f64, gamma: f64) -> f64 {
    let radius = informative_radius(sigma, delta, gamma);
    let informative = distances.iter().filter(|&&d| d < radius).count();
    informative as f64 / distances.len() as f64
}

/// Smallest delta whose informative fraction over `distances` reaches
/// `target_leakage`. Leakage is monotone nondecreasing in delta, so a
/// bisection on the closed-form radius suffices.
pub fn calibrate_delta(
    distances: &[f64],
    target_leakage: f64,
    sigma: f64,
    gamma: f64,
) -> Result<f64, SbeError> {
    if distances.is_empty() {
        return Err(SbeError::EmptyInput);
    }
    if !(target_leakage > 0.0 && target_leakage < 1.0 || target_leakage == 1.0) {
        return Err(SbeError::InvalidParameter(format!(
            "target leakage must be in (0, 1] (got {target_leakage})"
        )));
    }
    let max_d = distances.iter().cloned().fold(0.0_f64, f64::max);
    if max_d <= 0.0 {
        return Err(SbeError::UnreachableTarget);
    }
    let z = (-(2.0 * gamma).ln()).sqrt() * std::f64::consts::SQRT_2 / (std::f64::consts::PI * sigma);
    // At hi every distance lies strictly inside the radius.
    let mut hi = max_d / z * (1.0 + 1e-9) + 1e-300;
    let mut lo = 0.0_f64;
    debug_assert!(leakage_fraction(distances, sigma, hi, gamma) >= target_leakage);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if leakage_fraction(distances, sigma, mid, gamma) >= target_leakage {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Achieved leakage for a calibrated delta; companion to [`calibrate_delta`].
pub fn achieved_leakage(distances: &[f64], sigma: f64, delta: f64, gamma: f64) -> f64 {
    if distances.is_empty() {
        return 0.0;
    }
    leakage_fraction(distances, sigma, delta, gamma)
}

/// Random vector pairs with Euclidean distances spread over (0, max_distance],
/// hashed and measured: the raw material behind distance-vs-Hamming plots.
pub fn characterize(
    params: &SbeParams,
    num_pairs: usize,
    pair_seed: u64,
    max_distance: f64,
) -> Result<Vec<(f64, f64)>, SbeError> {
    if num_pairs == 0 {
        return Err(SbeError::InvalidParameter("num_pairs must be at least 1".into()));
    }
    if !(max_distance > 0.0) {
        return Err(SbeError::InvalidParameter("max_distance must be positive".into()));
    }
    let mut rng = SplitMix64::new(pair_seed);
    let mut out = Vec::with_capacity(num_pairs);
    for i in 0..num_pairs {
        let d = max_distance * (i + 1) as f64 / num_pairs as f64;
        let (d_e, d_h) = hash_pair_at_distance(params, d, &mut rng)?;
        out.push((d_e, d_h));
    }
    Ok(out)
}

/// Hamming-distance samples for many random pairs at one fixed Euclidean
/// distance; used to study variance as a function of M.
pub fn sample_hamming_at_distance(
    params: &SbeParams,
    d_e: f64,
    num_pairs: usize,
    seed: u64,
) -> Result<Vec<f64>, SbeError> {
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(num_pairs);
    for _ in 0..num_pairs {
        let (_, d_h) = hash_pair_at_distance(params, d_e, &mut rng)?;
        out.push(d_h);
    }
    Ok(out)
}

fn hash_pair_at_distance(
    params: &SbeParams,
    d: f64,
    rng: &mut SplitMix64,
) -> Result<(f64, f64), SbeError> {
    let l = params.l;
    let mut x = Vec::with_capacity(l);
    let mut dir = Vec::with_capacity(l);
    {
        let mut gauss = GaussianStream::new(rng);
        for _ in 0..l {
            x.push(gauss.next());
        }
        for _ in 0..l {
            dir.push(gauss.next());
        }
    }
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let y: Vec<f64> = x
        .iter()
        .zip(&dir)
        .map(|(xi, ui)| xi + d * ui / norm)
        .collect();
    let d_e = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let h1 = compute_hash(&x, params)?;
    let h2 = compute_hash(&y, params)?;
    Ok((d_e, normalized_hamming(&h1, &h2)?))
}
