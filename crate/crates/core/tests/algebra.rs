use detkey::gf2lin::{convolve, invert, mat_mat, mat_vec, t_lt, truncate};
use detkey::BitVec;
use proptest::prelude::*;

fn bits(len: usize) -> impl Strategy<Value = BitVec> {
    prop::collection::vec(any::<bool>(), len).prop_map(|v| BitVec::from_bits(&v))
}

fn unit_bits(len: usize) -> impl Strategy<Value = BitVec> {
    bits(len).prop_map(|mut v| {
        v.set(0, true);
        v
    })
}

fn sized_pair(max: usize) -> impl Strategy<Value = (BitVec, BitVec)> {
    (1..=max).prop_flat_map(|n| (bits(n), bits(n)))
}

/// Reference product: entry (i, j) of T(a) is a[i - j] for j <= i.
fn dense_mat_vec(a: &BitVec, x: &BitVec) -> BitVec {
    let n = a.len();
    let out: Vec<bool> = (0..n)
        .map(|i| (0..=i).fold(false, |acc, j| acc ^ (a.get(i - j) & x.get(j))))
        .collect();
    BitVec::from_bits(&out)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn toeplitz_products_commute((a, b) in sized_pair(96)) {
        let ta = t_lt(&a).unwrap();
        let tb = t_lt(&b).unwrap();
        prop_assert_eq!(mat_vec(&ta, &b).unwrap(), mat_vec(&tb, &a).unwrap());
        prop_assert_eq!(mat_mat(&ta, &tb).unwrap(), mat_mat(&tb, &ta).unwrap());
    }

    #[test]
    fn truncation_commutes_with_multiplication((a, x) in sized_pair(80), cut in 1usize..=80) {
        let m = cut.min(a.len());
        let ta = t_lt(&a).unwrap();
        let full = mat_vec(&ta, &x).unwrap();
        let lhs = mat_vec(&ta.truncate(m).unwrap(), &truncate(&x, m).unwrap()).unwrap();
        prop_assert_eq!(lhs, full.truncate(m).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn matches_dense_reference((a, x) in sized_pair(70)) {
        prop_assert_eq!(mat_vec(&t_lt(&a).unwrap(), &x).unwrap(), dense_mat_vec(&a, &x));
        prop_assert_eq!(convolve(&a, &x).unwrap(), dense_mat_vec(&a, &x));
    }

    #[test]
    fn product_is_associative(n in 1usize..64, seed in any::<u64>()) {
        let mut r = seed;
        let mut word = || {
            r = r.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            BitVec::from_lsb_word(r, n.min(64))
        };
        let (a, b, c) = (t_lt(&word()).unwrap(), t_lt(&word()).unwrap(), t_lt(&word()).unwrap());
        let left = mat_mat(&mat_mat(&a, &b).unwrap(), &c).unwrap();
        let right = mat_mat(&a, &mat_mat(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn inverse_round_trips(a in (1usize..=100).prop_flat_map(unit_bits), seed in any::<u64>()) {
        let ta = t_lt(&a).unwrap();
        let inv = invert(&ta).unwrap();
        prop_assert!(mat_mat(&ta, &inv).unwrap().is_identity());
        let x = BitVec::from_lsb_word(seed, a.len().min(64));
        if x.len() == a.len() {
            prop_assert_eq!(mat_vec(&inv, &mat_vec(&ta, &x).unwrap()).unwrap(), x);
        }
    }

    #[test]
    fn hex_round_trip(v in (0usize..=130).prop_flat_map(bits)) {
        prop_assert_eq!(BitVec::from_hex(&v.to_hex(), v.len()).unwrap(), v);
    }
}

#[test]
fn singular_matrix_is_rejected() {
    let a = BitVec::from_01(&[0, 1, 1]);
    assert!(invert(&t_lt(&a).unwrap()).is_err());
}
