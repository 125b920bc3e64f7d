use std::path::PathBuf;

use chorate_core::rating::{builtin_ladder, RatingLadder, BUILTIN_LADDERS};
use proptest::prelude::*;

fn ladder() -> impl Strategy<Value = RatingLadder> {
    prop::sample::select(BUILTIN_LADDERS.to_vec()).prop_map(|n| builtin_ladder(n).unwrap())
}

proptest! {
    #[test]
    fn rate_is_monotone(l in ladder(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let r_lo = l.rank(l.rate(lo).unwrap()).unwrap();
        let r_hi = l.rank(l.rate(hi).unwrap()).unwrap();
        prop_assert!(r_lo <= r_hi);
    }

    #[test]
    fn rating_commutes_with_affine_rescaling(l in ladder(), v in 0.0f64..=1.0, s in 0.2f64..=1.0, t in 0.0f64..=0.5) {
        // The map keeps every threshold inside (0,1) as long as s + t <= 1.
        prop_assume!(s + t < 1.0);
        let moved = RatingLadder::new(
            l.name(),
            l.labels().to_vec(),
            l.uppers().iter().map(|u| u * s + t).collect(),
        )
        .unwrap();
        prop_assert_eq!(moved.rate(v * s + t).unwrap(), l.rate(v).unwrap());
    }
}

#[test]
fn builtin_ladders_round_trip_bit_exactly() {
    for name in BUILTIN_LADDERS {
        let l = builtin_ladder(name).unwrap();
        let back = RatingLadder::from_json(&l.to_json()).unwrap();
        assert_eq!(back, l);
        for (a, b) in back.uppers().iter().zip(l.uppers()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn shipped_ladder_files_match_builtins() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ladders");
    for name in BUILTIN_LADDERS {
        let text = std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap();
        let l = RatingLadder::from_json(&text).unwrap();
        assert_eq!(l, builtin_ladder(name).unwrap(), "{name}");
        assert_eq!(text.trim_end(), l.to_json());
    }
}

#[test]
fn boundaries_are_inclusive() {
    let l = builtin_ladder("cat_el").unwrap();
    for (i, u) in l.uppers().iter().enumerate() {
        assert_eq!(l.rate(*u).unwrap(), l.labels()[i]);
    }
}
