//! Fixtures shared by the benchmarks.

use chorate_core::dist::{DiscreteLoss, ScenarioLoss};

/// `n` equiprobable atoms spread deterministically over [0,1].
pub fn spread_loss(n: usize) -> DiscreteLoss {
    let values: Vec<f64> = (0..n).map(|i| ((i * 7919) % n) as f64 / n as f64).collect();
    DiscreteLoss::equiprobable(&values).expect("valid fixture")
}

/// Two equally weighted scenarios of `n` atoms each.
pub fn two_scenarios(n: usize) -> ScenarioLoss {
    let a = spread_loss(n);
    let b = DiscreteLoss::equiprobable(&a.values().iter().map(|v| v * v).collect::<Vec<_>>()).expect("valid fixture");
    ScenarioLoss::new(vec![a, b], vec![0.5, 0.5]).expect("valid fixture")
}
