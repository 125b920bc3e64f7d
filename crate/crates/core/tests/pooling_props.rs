use chorate_core::choquet::{Criterion, DistortionFunction, SDistortionFunction};
use chorate_core::pooling::{
    is_monotone_decreasing, pe_curve, pe_curves, probe_models, ConditionalFamily, CurveSpec, MixingLaw, PoolMode,
    PoolModel, SimConfig,
};
use proptest::prelude::*;

fn concave_h() -> impl Strategy<Value = DistortionFunction> {
    prop::collection::vec(0.0f64..5.0, 1..6).prop_map(|mut slopes| {
        slopes.sort_by(|a, b| b.total_cmp(a));
        slopes[0] += 0.01;
        let n = slopes.len();
        let total: f64 = slopes.iter().sum();
        let mut y = 0.0;
        let mut pts = vec![(0.0, 0.0)];
        for (i, s) in slopes.iter().enumerate() {
            y += s / total;
            pts.push(((i + 1) as f64 / n as f64, y.min(1.0)));
        }
        pts.last_mut().unwrap().1 = 1.0;
        DistortionFunction::tabulated(pts).unwrap()
    })
}

fn values(curve: &[chorate_core::pooling::CurvePoint]) -> Vec<f64> {
    curve.iter().map(|p| p.value).collect()
}

const KS: [f64; 3] = [0.0, 0.1, 0.5];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn concave_h_gives_pooling_effect(h in concave_h(), seed in any::<u64>()) {
        let model = &probe_models(1, 1, seed)[0];
        for k in KS {
            let curve = pe_curve(&h, None, model, 6, k, &SimConfig::default(), PoolMode::Exact).unwrap();
            prop_assert!(is_monotone_decreasing(&values(&curve), 1e-9), "k={k} {:?}", values(&curve));
        }
    }

    #[test]
    fn separable_concave_g_gives_scenario_pooling_effect(h1 in concave_h(), h2 in concave_h(), seed in any::<u64>()) {
        let model = &probe_models(2, 1, seed)[0];
        let g = SDistortionFunction::separable(vec![(0.5, h1), (0.5, h2)]).unwrap();
        for k in KS {
            let curve = pe_curve(&g, None, model, 6, k, &SimConfig::default(), PoolMode::Exact).unwrap();
            prop_assert!(is_monotone_decreasing(&values(&curve), 1e-9), "k={k} {:?}", values(&curve));
        }
    }
}

#[test]
fn monte_carlo_agrees_with_exact_within_three_se() {
    let model = PoolModel::new(
        ConditionalFamily::Bernoulli,
        vec![
            MixingLaw::Discrete { nodes: vec![(0.05, 0.7), (0.4, 0.3)] },
            MixingLaw::Discrete { nodes: vec![(0.1, 0.5), (0.3, 0.5)] },
        ],
        vec![0.5, 0.5],
    )
    .unwrap();
    let criteria = [Criterion::AvgEl, Criterion::AvgEs { p: 0.5 }, Criterion::AvgMaxvar { gamma: 0.5 }];
    let specs: Vec<CurveSpec<'_>> = criteria.iter().map(|c| CurveSpec { measure: c, ladder: None }).collect();
    let cfg = SimConfig::with_paths(40_000, 7);
    for k in [0.0, 0.1] {
        let exact = pe_curves(&specs, &model, 6, k, &cfg, PoolMode::Exact).unwrap();
        let mc = pe_curves(&specs, &model, 6, k, &cfg, PoolMode::Mc).unwrap();
        for (c, (e, m)) in criteria.iter().zip(exact.iter().zip(&mc)) {
            for (pe, pm) in e.iter().zip(m) {
                let se = pm.se.unwrap();
                assert!(
                    (pe.value - pm.value).abs() <= 3.0 * se,
                    "{c} k={k} ell={}: exact {} mc {} se {se}",
                    pe.ell,
                    pe.value,
                    pm.value
                );
            }
        }
    }
}
