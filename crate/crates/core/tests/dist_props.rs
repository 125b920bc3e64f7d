use chorate_core::dist::{icx_leq, DiscreteLoss};
use proptest::prelude::*;

fn loss() -> impl Strategy<Value = DiscreteLoss> {
    prop::collection::vec(((0u32..=16).prop_map(|k| k as f64 / 16.0), 1u32..6), 1..=5).prop_map(|atoms| {
        let total: f64 = atoms.iter().map(|a| a.1 as f64).sum();
        DiscreteLoss::new(atoms.into_iter().map(|(v, w)| (v, w as f64 / total)).collect()).unwrap()
    })
}

fn stop_loss_by_hand(d: &DiscreteLoss, t: f64) -> f64 {
    d.atoms().map(|(v, w)| w * (v - t).max(0.0)).sum()
}

proptest! {
    #[test]
    fn tranche_mean_is_scaled_stop_loss(d in loss(), k in prop::sample::select(vec![0.0, 0.1, 0.25, 0.5, 0.9])) {
        let t = d.tranche(k).unwrap();
        prop_assert!((t.mean() - d.stop_loss(k) / (1.0 - k)).abs() <= 1e-12);
        prop_assert!((d.stop_loss(k) - stop_loss_by_hand(&d, k)).abs() <= 1e-12);
    }

    #[test]
    fn pooling_preserves_mean(d in loss(), ell in 1usize..=5) {
        let p = d.pool_average_exact(ell).unwrap();
        prop_assert!((p.mean() - d.mean()).abs() <= 1e-12);
    }

    #[test]
    fn pooling_decreases_in_icx(d in loss(), a in 1usize..=5, gap in 1usize..=3, k in prop::sample::select(vec![0.0, 0.1, 0.5])) {
        let b = a + gap;
        let small = d.pool_average_exact(a).unwrap().tranche(k).unwrap();
        let large = d.pool_average_exact(b).unwrap().tranche(k).unwrap();
        prop_assert!(icx_leq(&large, &small, 1e-9));
    }

    #[test]
    fn quantile_and_survival_are_monotone(d in loss(), q1 in 0.0f64..1.0, q2 in 0.0f64..1.0, x1 in -0.5f64..1.5, x2 in -0.5f64..1.5) {
        let (qa, qb) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        prop_assert!(d.quantile_left(qa).unwrap() <= d.quantile_left(qb).unwrap());
        let (xa, xb) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        prop_assert!(d.survival(xa) >= d.survival(xb));
    }

    #[test]
    fn icx_is_a_preorder(x in loss(), y in loss(), z in loss()) {
        prop_assert!(icx_leq(&x, &x, 0.0));
        if icx_leq(&x, &y, 0.0) && icx_leq(&y, &z, 0.0) {
            prop_assert!(icx_leq(&x, &z, 0.0));
        }
    }
}

#[test]
fn icx_against_dense_stop_loss_grid() {
    // Brute-force oracle: compare stop-loss transforms on a fine grid.
    let x = DiscreteLoss::new(vec![(0.25, 0.5), (0.75, 0.5)]).unwrap();
    let y = DiscreteLoss::new(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap();
    let dense = |a: &DiscreteLoss, b: &DiscreteLoss| {
        (0..=1000).all(|i| {
            let t = i as f64 / 1000.0;
            stop_loss_by_hand(a, t) <= stop_loss_by_hand(b, t) + 1e-12
        })
    };
    assert_eq!(icx_leq(&x, &y, 0.0), dense(&x, &y));
    assert_eq!(icx_leq(&y, &x, 0.0), dense(&y, &x));
    assert!(icx_leq(&x, &y, 0.0));
    assert!(!icx_leq(&y, &x, 0.0));
}
