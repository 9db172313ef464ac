//! Seedable generator used everywhere randomness is needed.
//!
//! The generator is SplitMix64 (Steele et al., the `splitmix64` finalizer)
//! and Gaussian samples come from Box-Muller over its uniform stream. Both
//! are pinned here so that fixtures regenerate bit-exactly: a different
//! implementation following the same algorithm and draw order produces the
//! same values.

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1), 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in (0, 1]; safe as the log argument in Box-Muller.
    #[inline]
    fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Standard-normal stream via Box-Muller.
///
/// Each pair of uniforms (u1, u2) yields two samples, consumed in order
/// (cos branch first, sin branch second). A leftover sin-branch sample is
/// discarded when the stream is dropped.
pub struct GaussianStream<'a> {
    rng: &'a mut SplitMix64,
    spare: Option<f64>,
}

impl<'a> GaussianStream<'a> {
    pub fn new(rng: &'a mut SplitMix64) -> Self {
        Self { rng, spare: None }
    }

    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.rng.next_f64_open();
        let u2 = self.rng.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Derives an independent stream seed from a master seed and a label,
/// so parallel cells/trials never share a stream.
pub fn derive_seed(master: u64, label: u64) -> u64 {
    let mut rng = SplitMix64::new(master ^ label.wrapping_mul(0xA24BAED4963EE407));
    rng.next_u64()
}
