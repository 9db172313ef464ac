//! Randomized property tests for the hashing, scoring and wire layers.

use proptest::prelude::*;
use spir::eval::{self, SummarySize, SweepConfig};
use spir::protocol::{self, HashBundle, MSG_ERROR, MSG_REQUEST, MSG_RESPONSE};
use spir::rng::SplitMix64;
use spir::sbe::{self, BitHash};

proptest! {
    /// The universal quantizer is 2Δ-periodic and flips on a Δ shift.
    #[test]
    fn quantizer_periodicity(p in -50.0f64..50.0, w in 0.0f64..1.0, delta in 0.05f64..4.0) {
        let a = [1.0];
        let base = sbe::quantize_bit(&[p], &a, w, delta).unwrap();
        let shifted_period = sbe::quantize_bit(&[p + 2.0 * delta], &a, w, delta).unwrap();
        let shifted_half = sbe::quantize_bit(&[p + delta], &a, w, delta).unwrap();
        prop_assert_eq!(base, shifted_period);
        prop_assert_eq!(1 - base, shifted_half);
    }

    /// Normalized Hamming distance is a [0, 1] pseudometric with exact
    /// extremes at identity and complement.
    #[test]
    fn hamming_distance_basics(seed: u64, m in 1usize..200) {
        let mut rng = SplitMix64::new(seed);
        let bits_a: Vec<u8> = (0..m).map(|_| (rng.next_u64() & 1) as u8).collect();
        let bits_b: Vec<u8> = (0..m).map(|_| (rng.next_u64() & 1) as u8).collect();
        let a = BitHash::from_bits(&bits_a);
        let b = BitHash::from_bits(&bits_b);
        let d = sbe::normalized_hamming(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, sbe::normalized_hamming(&b, &a).unwrap());
        prop_assert_eq!(sbe::normalized_hamming(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(sbe::normalized_hamming(&a, &a.complement()).unwrap(), 1.0);
    }

    /// Bit accessors agree with the bits the hash was built from.
    #[test]
    fn bithash_roundtrip(seed: u64, m in 1usize..100) {
        let mut rng = SplitMix64::new(seed);
        let bits: Vec<u8> = (0..m).map(|_| (rng.next_u64() & 1) as u8).collect();
        let h = BitHash::from_bits(&bits);
        prop_assert_eq!(h.len_bits(), m);
        for (i, &b) in bits.iter().enumerate() {
            prop_assert_eq!(h.bit(i), b);
        }
        let rebuilt = BitHash::from_bytes(h.as_bytes().to_vec(), m).unwrap();
        prop_assert_eq!(rebuilt, h);
    }

    /// ROUGE-1 scores live in [0, 1] and recall/precision swap with the
    /// argument order.
    #[test]
    fn rouge_swap_symmetry(a in "[a-d ]{0,30}", b in "[a-d ]{0,30}") {
        let ab = eval::rouge1(&a, &b);
        let ba = eval::rouge1(&b, &a);
        prop_assert!((0.0..=1.0).contains(&ab.recall));
        prop_assert!((0.0..=1.0).contains(&ab.precision));
        prop_assert!((0.0..=1.0).contains(&ab.f1));
        prop_assert_eq!(ab.recall, ba.precision);
        prop_assert_eq!(ab.precision, ba.recall);
    }

    /// Calibration always reaches at least the requested leakage, and the
    /// informative fraction is monotone in delta.
    #[test]
    fn calibration_reaches_target(
        seed: u64,
        count in 2usize..40,
        target in 0.05f64..1.0,
    ) {
        let mut rng = SplitMix64::new(seed);
        let distances: Vec<f64> = (0..count).map(|_| rng.next_f64() * 5.0 + 1e-6).collect();
        let delta = sbe::calibrate_delta(&distances, target, 1.0, 0.05).unwrap();
        let achieved = sbe::achieved_leakage(&distances, 1.0, delta, 0.05);
        prop_assert!(achieved >= target, "achieved {} < target {}", achieved, target);
        let larger = sbe::achieved_leakage(&distances, 1.0, delta * 1.5, 0.05);
        prop_assert!(larger >= achieved);
    }

    /// Frames round-trip for every message type and payload.
    #[test]
    fn frame_roundtrip(payload in proptest::collection::vec(any::<u8>(), 0..512), which in 0usize..3) {
        let msg_type = [MSG_REQUEST, MSG_RESPONSE, MSG_ERROR][which];
        let mut buf = Vec::new();
        protocol::write_frame(&mut buf, msg_type, &payload).unwrap();
        let (t, p) = protocol::read_frame(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(t, msg_type);
        prop_assert_eq!(p, payload);
    }

    /// Bundles survive serialization regardless of shape.
    #[test]
    fn bundle_roundtrip(
        seed: u64,
        m in 1u32..120,
        num_passages in 1u32..6,
        num_keyphrases in 0u32..4,
        requested_n in 1u32..5,
        k in 1u32..4,
        mean_threshold: bool,
    ) {
        let mut rng = SplitMix64::new(seed);
        let hashes: Vec<BitHash> = (0..num_passages + num_keyphrases)
            .map(|_| {
                let bits: Vec<u8> = (0..m).map(|_| (rng.next_u64() & 1) as u8).collect();
                BitHash::from_bits(&bits)
            })
            .collect();
        let bundle = HashBundle {
            bundle_id: rng.next_u64().to_le_bytes().repeat(2).try_into().unwrap(),
            m,
            num_passages,
            num_keyphrases,
            requested_n,
            strategy: if mean_threshold {
                spir::centrality::Strategy::MeanThreshold
            } else {
                spir::centrality::Strategy::KNearest
            },
            k,
            hashes,
        };
        let parsed = HashBundle::from_bytes(&bundle.to_bytes()).unwrap();
        prop_assert_eq!(parsed, bundle);
    }
}

/// Statistical trend: mean retrieval quality is positively rank-correlated
/// with the leakage target on the synthetic corpus.
#[test]
fn sweep_trend_spearman_positive() {
    let corpus = spir::corpus::synthetic_corpus(13, 6, 16);
    let config = spir::corpus::CorpusConfig::default();
    let sweep = SweepConfig {
        leakage_targets: vec![0.05, 0.5, 0.95],
        bpc_values: vec![4.0],
        trials: 10,
        seed: 7,
        gamma: 0.05,
        sigma: 1.0,
        size: SummarySize::Fixed(4),
        support: spir::centrality::SupportSetConfig::default(),
    };
    let rows = eval::run_sweep(&corpus, &config, &sweep).unwrap();
    // ranks of rouge1_mean must follow the already-sorted leakage targets
    let means: Vec<f64> = rows.iter().map(|r| r.rouge1_mean).collect();
    let mut rank: Vec<usize> = (0..means.len()).collect();
    rank.sort_by(|&a, &b| means[a].partial_cmp(&means[b]).unwrap());
    let n = means.len() as f64;
    let d2: f64 = rank
        .iter()
        .enumerate()
        .map(|(target_rank, &mean_rank)| {
            let d = target_rank as f64 - mean_rank as f64;
            d * d
        })
        .sum();
    let spearman = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
    assert!(spearman > 0.0, "spearman {spearman}, means {means:?}");
}
