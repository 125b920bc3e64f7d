//! Grid checks of the shape conditions behind risk consistency, and a
//! randomized search for quasi-convexity violations.
//!
//! A failing check carries exact counterexamples. A passing check is only
//! evidence at the grid resolution.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::choquet::{DistortionFunction, SDistortionFunction, ScenarioMeasure};
use crate::dist::{DiscreteLoss, ScenarioLoss};
use crate::error::{param, Result};

/// Slack absorbed by every grid inequality.
pub const CHECK_SLACK: f64 = 1e-10;

/// Slack a quasi-convexity witness must exceed.
pub const QC_SLACK: f64 = 1e-9;

/// Witnesses kept per report.
pub const MAX_WITNESSES: usize = 32;

const UNVERIFIED_NOTE: &str =
    "hypothesis unverified: lower semicontinuity of g on {0,1}^s cannot be checked on a grid";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    /// Points per axis, including both endpoints.
    pub n: usize,
    /// Drop the right endpoint 1 on every axis.
    pub half_open: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n: 101,
            half_open: false,
        }
    }
}

impl GridSpec {
    pub fn new(n: usize, half_open: bool) -> Result<Self> {
        if n < 3 {
            return Err(param("n", format!("grid needs at least 3 points, got {n}")));
        }
        Ok(GridSpec { n, half_open })
    }

    pub fn half_open(n: usize) -> Result<Self> {
        Self::new(n, true)
    }

    fn step(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    /// Number of usable indices per axis.
    fn len(&self) -> usize {
        if self.half_open {
            self.n - 1
        } else {
            self.n
        }
    }

    fn coord(&self, i: usize) -> f64 {
        if i == self.n - 1 {
            1.0
        } else {
            i as f64 * self.step()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

/// One violated instance of a tested inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    /// Base point: `(x, y)` for midpoint concavity, `x` otherwise.
    pub point: Vec<f64>,
    /// Axes `(i, j)` for the lattice conditions.
    pub axes: Vec<usize>,
    /// Steps `(eps, delta)` for the lattice conditions.
    pub steps: Vec<f64>,
    /// Amount by which the inequality fails.
    pub excess: f64,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "point {:?}", self.point)?;
        if !self.axes.is_empty() {
            write!(f, " axes {:?} steps {:?}", self.axes, self.steps)?;
        }
        write!(f, " excess {:.3e}", self.excess)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub verdict: Verdict,
    /// Total number of violated grid instances.
    pub violations: u64,
    /// The first violations in lexicographic order, capped at
    /// `MAX_WITNESSES`.
    pub witnesses: Vec<Witness>,
    pub notes: Vec<String>,
    /// A related condition evaluated on the same grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub companion: Option<Box<CheckReport>>,
}

impl CheckReport {
    fn from_parts(check: impl Into<String>, parts: Vec<(u64, Vec<Witness>)>) -> Self {
        let mut violations = 0;
        let mut witnesses = Vec::new();
        for (count, ws) in parts {
            violations += count;
            for w in ws {
                if witnesses.len() < MAX_WITNESSES {
                    witnesses.push(w);
                }
            }
        }
        CheckReport {
            check: check.into(),
            verdict: if violations == 0 {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            violations,
            witnesses,
            notes: Vec::new(),
            companion: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}: {} ({} violations)", self.check, self.verdict, self.violations)?;
        for w in &self.witnesses {
            writeln!(f, "  witness {w}")?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        if let Some(c) = &self.companion {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Midpoint concavity `h((x+y)/2) >= (h(x)+h(y))/2` over grid pairs whose
/// midpoint is a grid point.
pub fn check_concave(h: &DistortionFunction, grid: GridSpec) -> CheckReport {
    let m = grid.len();
    let vals: Vec<f64> = (0..m).map(|i| h.eval(grid.coord(i))).collect();
    let parts: Vec<(u64, Vec<Witness>)> = (0..m)
        .map(|a| {
            let mut count = 0;
            let mut ws = Vec::new();
            for b in (a + 2..m).step_by(2) {
                let excess = (vals[a] + vals[b]) / 2.0 - vals[(a + b) / 2];
                if excess > CHECK_SLACK {
                    count += 1;
                    if ws.len() < MAX_WITNESSES {
                        ws.push(Witness {
                            point: vec![grid.coord(a), grid.coord(b)],
                            axes: vec![],
                            steps: vec![],
                            excess,
                        });
                    }
                }
            }
            (count, ws)
        })
        .collect();
    let name = if grid.half_open {
        "midpoint concavity on [0,1)"
    } else {
        "midpoint concavity on [0,1]"
    };
    CheckReport::from_parts(name, parts)
}

/// `g` tabulated on the usable grid, flat index with axis 0 most
/// significant.
struct Table {
    m: usize,
    s: usize,
    strides: Vec<usize>,
    vals: Vec<f64>,
}

impl Table {
    fn new(g: &SDistortionFunction, grid: GridSpec) -> Self {
        let m = grid.len();
        let s = g.dim();
        let mut strides = vec![1; s];
        for k in (0..s.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * m;
        }
        let total = m.pow(s as u32);
        let vals = (0..total)
            .into_par_iter()
            .map(|flat| {
                let x: Vec<f64> = (0..s).map(|k| grid.coord(flat / strides[k] % m)).collect();
                g.eval(&x)
            })
            .collect();
        Table { m, s, strides, vals }
    }

    fn index(&self, flat: usize) -> Vec<usize> {
        (0..self.s).map(|k| flat / self.strides[k] % self.m).collect()
    }
}

fn point(grid: GridSpec, idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| grid.coord(i)).collect()
}

/// Componentwise concavity plus submodularity, via the lattice inequality
/// `g(x) + g(x + eps e_i + delta e_j) <= g(x + eps e_i) + g(x + delta e_j)`
/// over all grid points, steps and axis pairs (`i = j` is concavity along
/// an axis, `i != j` is submodularity). The companion report evaluates
/// `g(x - eps e_i) + g(x + eps e_i + delta e_j) <= g(x) + g(x + delta e_j)`,
/// which can hold where the first fails when `g` jumps.
pub fn check_cc_submodular(g: &SDistortionFunction, grid: GridSpec) -> CheckReport {
    let t = Table::new(g, grid);
    let m = t.m;
    let s = t.s;
    let h = grid.step();
    let total = t.vals.len();

    let iii: Vec<(u64, Vec<Witness>)> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let idx = t.index(flat);
            let gx = t.vals[flat];
            let mut count = 0;
            let mut ws = Vec::new();
            for i in 0..s {
                for j in i..s {
                    let (si, sj) = (t.strides[i], t.strides[j]);
                    let max_e = m - 1 - idx[i];
                    for e in 1..=max_e {
                        let max_d = if i == j { max_e - e } else { m - 1 - idx[j] };
                        let ge = t.vals[flat + e * si];
                        for d in 1..=max_d {
                            let excess = gx + t.vals[flat + e * si + d * sj] - ge - t.vals[flat + d * sj];
                            if excess > CHECK_SLACK {
                                count += 1;
                                if ws.len() < MAX_WITNESSES {
                                    ws.push(Witness {
                                        point: point(grid, &idx),
                                        axes: vec![i, j],
                                        steps: vec![e as f64 * h, d as f64 * h],
                                        excess,
                                    });
                                }
                            }
                        }
                    }
                }
            }
            (count, ws)
        })
        .collect();

    let iv: Vec<(u64, Vec<Witness>)> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let idx = t.index(flat);
            let gx = t.vals[flat];
            let mut count = 0;
            let mut ws = Vec::new();
            for i in 0..s {
                for j in 0..s {
                    let (si, sj) = (t.strides[i], t.strides[j]);
                    let max_e = idx[i].min(m - 1 - idx[i]);
                    for e in 1..=max_e {
                        let max_d = if i == j { m - 1 - idx[i] - e } else { m - 1 - idx[j] };
                        let g_minus = t.vals[flat - e * si];
                        for d in 1..=max_d {
                            let excess = g_minus + t.vals[flat + e * si + d * sj] - gx - t.vals[flat + d * sj];
                            if excess > CHECK_SLACK {
                                count += 1;
                                if ws.len() < MAX_WITNESSES {
                                    ws.push(Witness {
                                        point: point(grid, &idx),
                                        axes: vec![i, j],
                                        steps: vec![e as f64 * h, d as f64 * h],
                                        excess,
                                    });
                                }
                            }
                        }
                    }
                }
            }
            (count, ws)
        })
        .collect();

    let mut report = CheckReport::from_parts("componentwise concave and submodular (iii)", iii);
    report.companion = Some(Box::new(CheckReport::from_parts(
        "componentwise concave and submodular (iv)",
        iv,
    )));
    report
}

/// `int_0^1 g(1{x_1 > z}, ..., 1{x_s > z}) dz`, exactly: the integrand is
/// constant between consecutive sorted coordinates.
pub fn specon_bound(g: &SDistortionFunction, x: &[f64]) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut indicator = vec![0.0; x.len()];
    let mut prev = 0.0;
    let mut total = 0.0;
    for &level in &sorted {
        if level > prev {
            for (k, &xk) in x.iter().enumerate() {
                indicator[k] = if xk >= level { 1.0 } else { 0.0 };
            }
            total += g.eval(&indicator) * (level - prev);
            prev = level;
        }
    }
    total
}

/// The necessary condition `g(x) >= int_0^1 g(1{x > z}) dz` at interior
/// grid points. The companion report checks the weaker `g(x) >= min(x)`.
pub fn check_specon(g: &SDistortionFunction, grid: GridSpec) -> CheckReport {
    let s = g.dim();
    let inner = grid.n - 2;
    let total = inner.pow(s as u32);
    let results: Vec<(Vec<f64>, f64, f64, f64)> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut r = flat;
            let mut idx = vec![0; s];
            for k in (0..s).rev() {
                idx[k] = 1 + r % inner;
                r /= inner;
            }
            let x = point(grid, &idx);
            let gx = g.eval(&x);
            let bound = specon_bound(g, &x);
            let min = x.iter().copied().fold(f64::INFINITY, f64::min);
            (x, gx, bound, min)
        })
        .collect();

    let collect = |which: fn(&(Vec<f64>, f64, f64, f64)) -> f64| -> Vec<(u64, Vec<Witness>)> {
        results
            .iter()
            .filter_map(|row| {
                let excess = which(row) - row.1;
                (excess > CHECK_SLACK).then(|| {
                    (
                        1,
                        vec![Witness {
                            point: row.0.clone(),
                            axes: vec![],
                            steps: vec![],
                            excess,
                        }],
                    )
                })
            })
            .collect()
    };

    let mut report = CheckReport::from_parts("pooling necessary condition", collect(|r| r.2));
    let mut weak = CheckReport::from_parts("min bound", collect(|r| r.3));
    if g.has_unverified_continuity() {
        report.notes.push(UNVERIFIED_NOTE.into());
        weak.notes.push(UNVERIFIED_NOTE.into());
    }
    report.companion = Some(Box::new(weak));
    report
}

/// Two losses defined on a shared finite factor `{0, ..., m-1}`, with the
/// factor's law under each scenario.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoupledPair {
    /// `probs[j][k]`: probability of factor value k under scenario j.
    pub probs: Vec<Vec<f64>>,
    pub scenario_weights: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl CoupledPair {
    /// Scenario law of the loss taking `values[k]` on factor value k.
    pub fn law(&self, values: &[f64]) -> Result<ScenarioLoss> {
        let scenarios = self
            .probs
            .iter()
            .map(|p| {
                let atoms: Vec<(f64, f64)> = values
                    .iter()
                    .zip(p)
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(&v, &w)| (v, w))
                    .collect();
                DiscreteLoss::new(atoms)
            })
            .collect::<Result<Vec<_>>>()?;
        ScenarioLoss::new(scenarios, self.scenario_weights.clone())
    }

    pub fn mix(&self, lambda: f64) -> Vec<f64> {
        self.x
            .iter()
            .zip(&self.y)
            .map(|(a, b)| (lambda * a + (1.0 - lambda) * b).clamp(0.0, 1.0))
            .collect()
    }
}

pub trait PairSampler: Sync {
    fn sample(&self, rng: &mut ChaCha8Rng) -> CoupledPair;
}

/// Random factor laws with frequent zero masses, so that scenarios often
/// see disjoint parts of the factor, and values drawn mostly from {0, 1}.
#[derive(Clone, Copy, Debug)]
pub struct FactorSampler {
    pub scenarios: usize,
    pub max_atoms: usize,
}

impl FactorSampler {
    pub fn new(scenarios: usize) -> Self {
        FactorSampler {
            scenarios,
            max_atoms: 4,
        }
    }
}

impl PairSampler for FactorSampler {
    fn sample(&self, rng: &mut ChaCha8Rng) -> CoupledPair {
        let m = rng.random_range(2..=self.max_atoms.max(2));
        let probs = (0..self.scenarios)
            .map(|_| {
                let mut p: Vec<f64> = (0..m)
                    .map(|_| if rng.random_bool(0.5) { rng.random_range(0.05..1.0) } else { 0.0 })
                    .collect();
                if p.iter().all(|&w| w == 0.0) {
                    p[rng.random_range(0..m)] = 1.0;
                }
                let total: f64 = p.iter().sum();
                p.iter().map(|w| w / total).collect()
            })
            .collect();
        let mut value = || match rng.random_range(0..4) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random::<f64>(),
        };
        let x = (0..m).map(|_| value()).collect();
        let y = (0..m).map(|_| value()).collect();
        CoupledPair {
            probs,
            scenario_weights: vec![1.0 / self.scenarios as f64; self.scenarios],
            x,
            y,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QcWitness {
    pub trial: usize,
    pub pair: CoupledPair,
    pub lambda: f64,
    pub rho_x: f64,
    pub rho_y: f64,
    pub rho_mix: f64,
}

impl QcWitness {
    pub fn excess(&self) -> f64 {
        self.rho_mix - self.rho_x.max(self.rho_y)
    }
}

/// Searches for `rho(lambda X + (1 - lambda) Y) > max(rho(X), rho(Y))`
/// with `lambda` in `{0.1, ..., 0.9}`. Trials run in order from a single
/// seeded generator and the first witness is returned.
pub fn find_qc_violation(
    measure: &dyn ScenarioMeasure,
    sampler: &dyn PairSampler,
    trials: usize,
    seed: u64,
) -> Result<Option<QcWitness>> {
    if trials == 0 {
        return Err(param("trials", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let pair = sampler.sample(&mut rng);
        let rho_x = measure.evaluate(&pair.law(&pair.x)?)?;
        let rho_y = measure.evaluate(&pair.law(&pair.y)?)?;
        for step in 1..=9 {
            let lambda = step as f64 / 10.0;
            let rho_mix = measure.evaluate(&pair.law(&pair.mix(lambda))?)?;
            if rho_mix - rho_x.max(rho_y) > QC_SLACK {
                return Ok(Some(QcWitness {
                    trial,
                    pair,
                    lambda,
                    rho_x,
                    rho_y,
                    rho_mix,
                }));
            }
        }
    }
    Ok(None)
}

/// The four two-scenario indicator distortions: max and min of essential
/// suprema, max and min of essential infima.
pub fn indicator_table() -> Vec<(&'static str, SDistortionFunction)> {
    let sup = DistortionFunction::essup_indicator;
    let inf = DistortionFunction::essinf_indicator;
    let build = |hs, max: bool| {
        if max {
            SDistortionFunction::max_of(hs)
        } else {
            SDistortionFunction::min_of(hs)
        }
        .expect("indicator distortions are valid")
    };
    vec![
        ("ess-sup v ess-sup", build(vec![sup(), sup()], true)),
        ("ess-sup ^ ess-sup", build(vec![sup(), sup()], false)),
        ("ess-inf v ess-inf", build(vec![inf(), inf()], true)),
        ("ess-inf ^ ess-inf", build(vec![inf(), inf()], false)),
    ]
}

/// Verdicts of one criterion under the grid checks and the pooling probe.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub name: String,
    /// Lattice condition (iii); `None` when the criterion has no
    /// scenario distortion.
    pub cc_submodular: Option<bool>,
    pub specon: Option<bool>,
    /// Exact pooling curves non-increasing on the probe models.
    pub pooling: Option<bool>,
    /// Quasi-convexity violation found by the randomized search.
    pub qc_violation: Option<bool>,
}

const PROBE_SEED: u64 = 20_240_601;

/// The six scenario criteria with two equally weighted scenarios.
pub fn classify_criteria(grid: GridSpec) -> Result<Vec<Classification>> {
    use crate::choquet::Criterion;
    use crate::pooling::{pooling_probe, probe_models};
    let criteria = [
        Criterion::AvgEl,
        Criterion::AvgEs { p: 0.9 },
        Criterion::AvgMaxvar { gamma: 0.3 },
        Criterion::AvgVar { p: 0.8 },
        Criterion::MaxVar { p: 0.8 },
        Criterion::AvgPd,
    ];
    let models = probe_models(2, 12, PROBE_SEED);
    criteria
        .iter()
        .map(|c| {
            let (cc, sp) = match c.s_distortion(&[0.5, 0.5])? {
                Some(g) => (
                    Some(check_cc_submodular(&g, grid).passed()),
                    Some(check_specon(&g, grid).passed()),
                ),
                None => (None, None),
            };
            let pooling = match c {
                Criterion::AvgPd => Some(pooling_probe(c, &models, 4, &[0.0, 0.1, 0.5], 1e-9)?),
                _ => None,
            };
            Ok(Classification {
                name: c.to_string(),
                cc_submodular: cc,
                specon: sp,
                pooling,
                qc_violation: None,
            })
        })
        .collect()
}

/// The four indicator distortions: grid checks, pooling probe and the
/// quasi-convexity search.
pub fn classify_indicators(grid: GridSpec, trials: usize, seed: u64) -> Result<Vec<Classification>> {
    use crate::pooling::{pooling_probe, probe_models};
    let models = probe_models(2, 12, PROBE_SEED);
    let sampler = FactorSampler::new(2);
    indicator_table()
        .into_iter()
        .map(|(name, g)| {
            Ok(Classification {
                name: name.to_string(),
                cc_submodular: Some(check_cc_submodular(&g, grid).passed()),
                specon: Some(check_specon(&g, grid).passed()),
                pooling: Some(pooling_probe(&g, &models, 4, &[0.0, 0.1, 0.5], 1e-9)?),
                qc_violation: Some(find_qc_violation(&g, &sampler, trials, seed)?.is_some()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choquet::Criterion;

    fn grid() -> GridSpec {
        GridSpec::default()
    }

    #[test]
    fn concavity_examples() {
        let pow = DistortionFunction::maxvar_power(0.3).unwrap();
        assert!(check_concave(&pow, grid()).passed());
        assert!(check_concave(&pow, GridSpec::half_open(101).unwrap()).passed());

        let var = DistortionFunction::var_indicator(0.8).unwrap();
        let r = check_concave(&var, grid());
        assert!(!r.passed());
        assert!(r.witnesses.iter().all(|w| w.excess > CHECK_SLACK));
        let excess = (var.eval(0.1) + var.eval(0.3)) / 2.0 - var.eval(0.2);
        assert_eq!(excess, 0.5);

        let inf = DistortionFunction::essinf_indicator();
        assert!(check_concave(&inf, GridSpec::half_open(101).unwrap()).passed());
        assert!(!check_concave(&inf, grid()).passed());
    }

    #[test]
    fn lattice_examples() {
        let es = Criterion::AvgEs { p: 0.9 }.s_distortion(&[0.5, 0.5]).unwrap().unwrap();
        assert!(check_cc_submodular(&es, grid()).passed());

        let prod = SDistortionFunction::custom("x1*x2", 2, |x| x[0] * x[1]).unwrap();
        let r = check_cc_submodular(&prod, grid());
        assert!(!r.passed());
        assert_eq!(r.witnesses[0].point, vec![0.0, 0.0]);

        let var = Criterion::AvgVar { p: 0.8 }.s_distortion(&[0.5, 0.5]).unwrap().unwrap();
        let r = check_cc_submodular(&var, grid());
        assert!(!r.passed());
        assert!(r.witnesses.iter().any(|w| w.axes[0] == w.axes[1]));
    }

    #[test]
    fn specon_examples() {
        let table = indicator_table();
        assert!(check_specon(&table[0].1, grid()).passed());

        let var = Criterion::AvgVar { p: 0.8 }.s_distortion(&[0.5, 0.5]).unwrap().unwrap();
        assert!((specon_bound(&var, &[0.1, 0.1]) - 0.1).abs() < 1e-15);
        assert_eq!(var.eval(&[0.1, 0.1]), 0.0);
        let r = check_specon(&var, grid());
        assert!(!r.passed());
        assert!(r.notes.iter().any(|n| n.contains("unverified")));

        let el = Criterion::AvgEl.s_distortion(&[0.3, 0.7]).unwrap().unwrap();
        let r = check_specon(&el, grid());
        assert!(r.passed() && r.notes.is_empty());
    }

    #[test]
    fn qc_examples() {
        let sampler = FactorSampler::new(2);
        let table = indicator_table();
        let w = find_qc_violation(&table[1].1, &sampler, 10_000, 7).unwrap();
        assert!(w.is_some_and(|w| w.excess() > QC_SLACK));
        assert!(find_qc_violation(&Criterion::AvgEl, &sampler, 10_000, 7).unwrap().is_none());
        assert!(find_qc_violation(&Criterion::AvgEs { p: 0.9 }, &sampler, 10_000, 7)
            .unwrap()
            .is_none());
    }

    #[test]
    fn qc_search_is_deterministic() {
        let sampler = FactorSampler::new(2);
        let g = &indicator_table()[3].1;
        let a = find_qc_violation(g, &sampler, 1000, 3).unwrap();
        let b = find_qc_violation(g, &sampler, 1000, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn indicator_classification() {
        let rows = classify_indicators(GridSpec::new(41, false).unwrap(), 10_000, 1).unwrap();
        let qc: Vec<bool> = rows.iter().map(|r| r.qc_violation.unwrap()).collect();
        assert_eq!(qc, [false, true, true, true]);
        let sp: Vec<bool> = rows.iter().map(|r| r.specon.unwrap()).collect();
        assert_eq!(sp, [true, true, false, false]);
        let cc: Vec<bool> = rows.iter().map(|r| r.cc_submodular.unwrap()).collect();
        assert_eq!(cc, [true, false, false, false]);
        assert!(rows.iter().all(|r| r.pooling == Some(true)));
    }

    #[test]
    fn grid_needs_three_points() {
        assert!(GridSpec::new(2, false).is_err());
    }
}
