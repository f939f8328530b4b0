//! HDLR1 round trips and robustness against damaged input.

mod common;

use common::exact_hodlr;
use hodlr::{decode, encode, Error, HodlrMatrix, PartitionTree, TruncationControl};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn round_trip_is_bit_exact(n in 1usize..90, n_min in 1usize..30, k in 1usize..3, seed in any::<u64>()) {
        let (_, h) = exact_hodlr(n, n_min, k, seed);
        let bytes = encode(&h).unwrap();
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(&back, &h);
        prop_assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn damaged_bytes_are_errors_not_panics(seed in any::<u64>(), pos in any::<prop::sample::Index>(), byte in any::<u8>(), cut in any::<prop::sample::Index>()) {
        let (_, h) = exact_hodlr(24, 6, 1, seed);
        let bytes = encode(&h).unwrap();
        let mut flipped = bytes.clone();
        let i = pos.index(bytes.len());
        prop_assume!(flipped[i] != byte);
        flipped[i] = byte;
        prop_assert!(decode(&flipped).is_err());
        let truncated = &bytes[..cut.index(bytes.len())];
        prop_assert!(decode(truncated).is_err());
    }

    #[test]
    fn arbitrary_bytes_never_panic(data in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode(&data);
    }
}

#[test]
fn huge_declared_sizes_fail_before_allocating() {
    let tree = PartitionTree::balanced(4, 4);
    let h = HodlrMatrix::from_dense(&nalgebra::DMatrix::identity(4, 4), &tree, &TruncationControl::exact()).unwrap();
    let mut bytes = encode(&h).unwrap();
    // n = 2^60, then fix the checksum so only structural validation can object.
    bytes[10..18].copy_from_slice(&(1u64 << 60).to_le_bytes());
    let body = bytes.len() - 4;
    let crc = crc32fast::hash(&bytes[..body]);
    bytes[body..].copy_from_slice(&crc.to_le_bytes());
    assert!(matches!(decode(&bytes), Err(Error::Corrupt(_))));
}
