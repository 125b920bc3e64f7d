//! Conditionally iid pools: exact and Monte Carlo laws of the senior
//! tranche of a pool average, and pooling curves across pool sizes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choquet::{DistortionFunction, ScenarioMeasure};
use crate::dist::{DiscreteLoss, ScenarioLoss, DEFAULT_EXPLOSION_LIMIT};
use crate::error::{param, Error, Result};
use crate::numeric::neumaier_sum;
use crate::rating::RatingLadder;
use crate::rng::{block_key, substream};

/// Law of the mixing factor Z within one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingLaw {
    /// Atoms `(z, weight)`.
    Discrete { nodes: Vec<(f64, f64)> },
    Uniform { lo: f64, hi: f64 },
}

impl MixingLaw {
    pub fn point(z: f64) -> Self {
        MixingLaw::Discrete {
            nodes: vec![(z, 1.0)],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            MixingLaw::Discrete { nodes } => {
                if nodes.is_empty() {
                    return Err(param("nodes", "mixing law has no nodes"));
                }
                if nodes.iter().any(|n| !(n.1 > 0.0) || !n.0.is_finite()) {
                    return Err(param("nodes", "mixing weights must be positive"));
                }
                let total = neumaier_sum(nodes.iter().map(|n| n.1));
                if (total - 1.0).abs() > 1e-12 {
                    return Err(param("nodes", format!("mixing weights sum to {total}")));
                }
            }
            MixingLaw::Uniform { lo, hi } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(param("uniform", format!("bad range [{lo}, {hi}]")));
                }
            }
        }
        Ok(())
    }

    /// Nodes used in exact mode: the atoms themselves, or `n` equal-weight
    /// midpoints for a uniform law.
    pub fn nodes(&self, n: usize) -> Vec<(f64, f64)> {
        match self {
            MixingLaw::Discrete { nodes } => nodes.clone(),
            MixingLaw::Uniform { lo, hi } => {
                let w = 1.0 / n as f64;
                (0..n)
                    .map(|i| (lo + (hi - lo) * (i as f64 + 0.5) * w, w))
                    .collect()
            }
        }
    }

    fn support(&self) -> (f64, f64) {
        match self {
            MixingLaw::Discrete { nodes } => nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), n| {
                (a.min(n.0), b.max(n.0))
            }),
            MixingLaw::Uniform { lo, hi } => (*lo, *hi),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        match self {
            MixingLaw::Discrete { nodes } => {
                let mut acc = 0.0;
                for &(z, w) in nodes {
                    acc += w;
                    if u < acc {
                        return z;
                    }
                }
                nodes[nodes.len() - 1].0
            }
            MixingLaw::Uniform { lo, hi } => lo + (hi - lo) * u,
        }
    }
}

/// A conditional law indexed by a mixing value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub z: f64,
    pub law: DiscreteLoss,
}

/// Law of one asset's loss given Z = z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ConditionalFamily {
    /// `L = U^(1/z)`, i.e. Beta(z, 1).
    BetaOne,
    /// `L ~ Bernoulli(z)`.
    Bernoulli,
    /// An explicit law for each mixing value.
    Table { entries: Vec<TableEntry> },
}

impl ConditionalFamily {
    fn law(&self, z: f64) -> Result<DiscreteLoss> {
        match self {
            ConditionalFamily::BetaOne => Err(Error::NotDiscrete(
                "the beta_one family has a continuous conditional law".into(),
            )),
            ConditionalFamily::Bernoulli => DiscreteLoss::bernoulli(z),
            ConditionalFamily::Table { entries } => Ok(Self::lookup(entries, z)?.clone()),
        }
    }

    fn lookup(entries: &[TableEntry], z: f64) -> Result<&DiscreteLoss> {
        entries
            .iter()
            .find(|e| (e.z - z).abs() <= 1e-12)
            .map(|e| &e.law)
            .ok_or_else(|| param("z", format!("no table entry for z = {z}")))
    }

    fn draw(&self, z: f64, u: f64, table: Option<&DiscreteLoss>) -> f64 {
        match self {
            ConditionalFamily::BetaOne => u.powf(1.0 / z),
            ConditionalFamily::Bernoulli => {
                if u < z {
                    1.0
                } else {
                    0.0
                }
            }
            ConditionalFamily::Table { .. } => {
                let law = table.expect("table law resolved before drawing");
                let mut acc = 0.0;
                for (v, w) in law.atoms() {
                    acc += w;
                    if u < acc {
                        return v;
                    }
                }
                law.max()
            }
        }
    }

    fn check_z(&self, z_lo: f64, z_hi: f64, law: &MixingLaw) -> Result<()> {
        match self {
            ConditionalFamily::BetaOne if !(z_lo > 0.0) => {
                Err(param("z", format!("beta_one needs z > 0, got {z_lo}")))
            }
            ConditionalFamily::Bernoulli if z_lo < 0.0 || z_hi > 1.0 => {
                Err(param("z", format!("bernoulli needs z in [0,1], got [{z_lo}, {z_hi}]")))
            }
            ConditionalFamily::Table { entries } => match law {
                MixingLaw::Discrete { nodes } => {
                    for n in nodes {
                        Self::lookup(entries, n.0)?;
                    }
                    Ok(())
                }
                MixingLaw::Uniform { .. } => Err(param("mixing", "table family needs a discrete mixing law")),
            },
            _ => Ok(()),
        }
    }
}

/// Per scenario, a mixing law for Z; a common conditional family; scenario
/// weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoolModel", into = "RawPoolModel")]
pub struct PoolModel {
    family: ConditionalFamily,
    mixing: Vec<MixingLaw>,
    weights: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawPoolModel {
    family: ConditionalFamily,
    mixing: Vec<MixingLaw>,
    weights: Vec<f64>,
}

impl TryFrom<RawPoolModel> for PoolModel {
    type Error = Error;

    fn try_from(raw: RawPoolModel) -> Result<Self> {
        PoolModel::new(raw.family, raw.mixing, raw.weights)
    }
}

impl From<PoolModel> for RawPoolModel {
    fn from(m: PoolModel) -> Self {
        RawPoolModel {
            family: m.family,
            mixing: m.mixing,
            weights: m.weights,
        }
    }
}

impl PoolModel {
    pub fn new(family: ConditionalFamily, mixing: Vec<MixingLaw>, weights: Vec<f64>) -> Result<Self> {
        if mixing.is_empty() || mixing.len() != weights.len() {
            return Err(Error::ScenarioMismatch {
                expected: mixing.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(param("weights", "scenario weights must be positive"));
        }
        let total = neumaier_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(param("weights", format!("scenario weights sum to {total}")));
        }
        for law in &mixing {
            law.validate()?;
            let (lo, hi) = law.support();
            family.check_z(lo, hi, law)?;
        }
        Ok(PoolModel {
            family,
            mixing,
            weights,
        })
    }

    /// Single-scenario model.
    pub fn single(family: ConditionalFamily, mixing: MixingLaw) -> Result<Self> {
        Self::new(family, vec![mixing], vec![1.0])
    }

    /// Two equally weighted scenarios with `L = U^(1/Z)`: an optimistic
    /// `Z ~ U(0.007, 0.009)` and a pessimistic `Z ~ U(0.1, 0.15)`.
    pub fn clo() -> Self {
        Self::new(
            ConditionalFamily::BetaOne,
            vec![
                MixingLaw::Uniform { lo: 0.007, hi: 0.009 },
                MixingLaw::Uniform { lo: 0.1, hi: 0.15 },
            ],
            vec![0.5, 0.5],
        )
        .expect("builtin model is valid")
    }

    pub fn family(&self) -> &ConditionalFamily {
        &self.family
    }

    pub fn mixing(&self) -> &[MixingLaw] {
        &self.mixing
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scenarios(&self) -> usize {
        self.mixing.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    Exact,
    Mc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Monte Carlo paths per scenario.
    pub paths: usize,
    pub seed: u64,
    /// Midpoint nodes for continuous mixing laws in exact mode.
    pub z_nodes: usize,
    /// Batches for batch-means standard errors.
    pub batches: usize,
    /// Term budget for exact convolution.
    pub explosion_limit: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            paths: 100_000,
            seed: 42,
            z_nodes: 64,
            batches: 20,
            explosion_limit: DEFAULT_EXPLOSION_LIMIT,
        }
    }
}

impl SimConfig {
    pub fn with_paths(paths: usize, seed: u64) -> Self {
        SimConfig {
            paths,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(param("paths", "must be at least 1"));
        }
        if self.z_nodes == 0 {
            return Err(param("z_nodes", "must be at least 1"));
        }
        Ok(())
    }
}

fn check_attachment(k: f64) -> Result<()> {
    if !(0.0..1.0).contains(&k) {
        return Err(param("K", format!("{k} not in [0,1)")));
    }
    Ok(())
}

/// Senior tranche of a pool loss.
pub fn tranche_value(loss: f64, k: f64) -> f64 {
    ((loss - k).max(0.0) / (1.0 - k)).min(1.0)
}

fn exact_scenario(model: &PoolModel, j: usize, ell: usize, k: f64, cfg: &SimConfig) -> Result<DiscreteLoss> {
    let parts = model.mixing[j]
        .nodes(cfg.z_nodes)
        .into_iter()
        .map(|(z, w)| {
            let pooled = model
                .family
                .law(z)?
                .pool_average_exact_with_limit(ell, cfg.explosion_limit)?;
            Ok((pooled.tranche(k)?, w))
        })
        .collect::<Result<Vec<_>>>()?;
    DiscreteLoss::mixture(&parts)
}

/// Cumulative conditional losses per path: row p holds
/// `L_1, L_1 + L_2, ..., L_1 + ... + L_ell_max`. Path p of scenario j
/// always reads the same stream, so the first `ell` draws coincide for
/// every pool size.
#[derive(Clone, Debug)]
pub struct PathSums {
    ell_max: usize,
    paths: usize,
    sums: Vec<Vec<f64>>,
}

impl PathSums {
    pub fn simulate(model: &PoolModel, ell_max: usize, cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        if ell_max == 0 {
            return Err(param("ell", "must be positive"));
        }
        let sums = (0..model.scenarios())
            .map(|j| {
                let key = block_key(cfg.seed, j as u64);
                let mixing = &model.mixing[j];
                let mut out = vec![0.0; cfg.paths * ell_max];
                out.par_chunks_mut(ell_max).enumerate().try_for_each(|(p, row)| {
                    let mut rng = substream(&key, p as u64);
                    let z = mixing.draw(&mut rng);
                    let table = match &model.family {
                        ConditionalFamily::Table { entries } => Some(ConditionalFamily::lookup(entries, z)?),
                        _ => None,
                    };
                    let mut acc = 0.0;
                    for slot in row.iter_mut() {
                        acc += model.family.draw(z, rng.random(), table);
                        *slot = acc;
                    }
                    Ok::<(), Error>(())
                })?;
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PathSums {
            ell_max,
            paths: cfg.paths,
            sums,
        })
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    /// Tranche losses of scenario j at pool size ell over a path range.
    pub fn tranche_losses(&self, j: usize, ell: usize, k: f64, paths: std::ops::Range<usize>) -> Vec<f64> {
        let n = ell as f64;
        paths
            .map(|p| tranche_value(self.sums[j][p * self.ell_max + ell - 1] / n, k))
            .collect()
    }

    fn scenario_loss(&self, model: &PoolModel, ell: usize, k: f64, paths: std::ops::Range<usize>) -> Result<ScenarioLoss> {
        let scenarios = (0..self.sums.len())
            .map(|j| DiscreteLoss::from_samples(&self.tranche_losses(j, ell, k, paths.clone())))
            .collect::<Result<Vec<_>>>()?;
        ScenarioLoss::new(scenarios, model.weights.clone())
    }
}

/// Per-scenario law of the senior tranche `(L^(ell) - K)+ / (1 - K)` of the
/// average of `ell` conditionally iid losses.
pub fn pool_dist(model: &PoolModel, ell: usize, k: f64, cfg: &SimConfig, mode: PoolMode) -> Result<ScenarioLoss> {
    check_attachment(k)?;
    if ell == 0 {
        return Err(param("ell", "must be positive"));
    }
    match mode {
        PoolMode::Exact => {
            cfg.validate()?;
            let scenarios = (0..model.scenarios())
                .map(|j| exact_scenario(model, j, ell, k, cfg))
                .collect::<Result<Vec<_>>>()?;
            ScenarioLoss::new(scenarios, model.weights.clone())
        }
        PoolMode::Mc => {
            let sums = PathSums::simulate(model, ell, cfg)?;
            sums.scenario_loss(model, ell, k, 0..cfg.paths)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub ell: usize,
    pub value: f64,
    /// Batch-means standard error of the value (Monte Carlo only).
    pub se: Option<f64>,
    /// Batch-means standard error of `value(ell) - value(ell - 1)`.
    pub step_se: Option<f64>,
    pub label: Option<String>,
}

fn batch_se(xs: &[f64]) -> Option<f64> {
    let b = xs.len();
    if b < 2 {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / b as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    Some((var / b as f64).sqrt())
}

/// A measure to trace across pool sizes, with an optional ladder.
pub struct CurveSpec<'a> {
    pub measure: &'a dyn ScenarioMeasure,
    pub ladder: Option<&'a RatingLadder>,
}

/// Pooling curves for several measures over `ell = 1..=ell_max`, sharing
/// one simulation (common random numbers across ell).
pub fn pe_curves(
    specs: &[CurveSpec<'_>],
    model: &PoolModel,
    ell_max: usize,
    k: f64,
    cfg: &SimConfig,
    mode: PoolMode,
) -> Result<Vec<Vec<CurvePoint>>> {
    check_attachment(k)?;
    if ell_max == 0 {
        return Err(param("ell_max", "must be at least 1"));
    }
    let evaluate = |sl: &ScenarioLoss| -> Result<Vec<f64>> { specs.iter().map(|s| s.measure.evaluate(sl)).collect() };

    // rows[ell - 1] = (values per measure, batch values per batch per measure)
    let rows: Vec<(Vec<f64>, Vec<Vec<f64>>)> = match mode {
        PoolMode::Exact => (1..=ell_max)
            .into_par_iter()
            .map(|ell| Ok((evaluate(&pool_dist(model, ell, k, cfg, PoolMode::Exact)?)?, Vec::new())))
            .collect::<Result<_>>()?,
        PoolMode::Mc => {
            let sums = PathSums::simulate(model, ell_max, cfg)?;
            let batches = cfg.batches.min(cfg.paths);
            (1..=ell_max)
                .into_par_iter()
                .map(|ell| {
                    let full = evaluate(&sums.scenario_loss(model, ell, k, 0..cfg.paths)?)?;
                    let per_batch = if batches >= 2 {
                        (0..batches)
                            .map(|b| {
                                let range = b * cfg.paths / batches..(b + 1) * cfg.paths / batches;
                                evaluate(&sums.scenario_loss(model, ell, k, range)?)
                            })
                            .collect::<Result<Vec<_>>>()?
                    } else {
                        Vec::new()
                    };
                    Ok((full, per_batch))
                })
                .collect::<Result<_>>()?
        }
    };

    specs
        .iter()
        .enumerate()
        .map(|(m, spec)| {
            (0..ell_max)
                .map(|i| {
                    let (values, batches) = &rows[i];
                    let value = values[m];
                    let column = |r: &Vec<Vec<f64>>| r.iter().map(|b| b[m]).collect::<Vec<_>>();
                    let se = batch_se(&column(batches));
                    let step_se = if i == 0 {
                        None
                    } else {
                        let now = column(batches);
                        let before = column(&rows[i - 1].1);
                        let diffs: Vec<f64> = now.iter().zip(&before).map(|(a, b)| a - b).collect();
                        batch_se(&diffs)
                    };
                    let label = spec
                        .ladder
                        .map(|l| l.rate(value.clamp(0.0, 1.0)).map(str::to_string))
                        .transpose()?;
                    Ok(CurvePoint {
                        ell: i + 1,
                        value,
                        se,
                        step_se,
                        label,
                    })
                })
                .collect()
        })
        .collect()
}

/// Pooling curve of a single measure.
pub fn pe_curve(
    measure: &dyn ScenarioMeasure,
    ladder: Option<&RatingLadder>,
    model: &PoolModel,
    ell_max: usize,
    k: f64,
    cfg: &SimConfig,
    mode: PoolMode,
) -> Result<Vec<CurvePoint>> {
    let mut curves = pe_curves(&[CurveSpec { measure, ladder }], model, ell_max, k, cfg, mode)?;
    Ok(curves.remove(0))
}

/// True iff each value is at most the previous one plus `tol`.
pub fn is_monotone_decreasing(seq: &[f64], tol: f64) -> bool {
    seq.windows(2).all(|w| w[1] <= w[0] + tol)
}

/// A pooling violation for a left-quantile criterion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeWitness {
    /// `P(Y = 1)`.
    pub x: f64,
    /// `P(Y > 0)`.
    pub y: f64,
    /// The intermediate mixing value.
    pub lambda: f64,
    pub p: f64,
    pub ell: usize,
    pub rho_single: f64,
    pub rho_pool: f64,
}

/// Grid search for `VaR_p(L^(ell)) > VaR_p(L^(1)) + min_excess` when the
/// losses are Bernoulli(Y) given a three-point Y with `P(Y=1) = x`,
/// `P(Y=lambda) = y - x`, `P(Y=0) = 1 - y`.
pub fn find_var_pe_violation(levels: &[f64], ell_max: usize, min_excess: f64) -> Result<Option<PeWitness>> {
    let cfg = SimConfig::default();
    for &x in levels {
        for &y in levels {
            if !(x < y) || y >= 1.0 {
                continue;
            }
            for &lambda in levels {
                if !(lambda > 0.0 && lambda < 1.0) {
                    continue;
                }
                let mixing = MixingLaw::Discrete {
                    nodes: vec![(1.0, x), (lambda, y - x), (0.0, 1.0 - y)],
                };
                let model = PoolModel::single(ConditionalFamily::Bernoulli, mixing)?;
                let single = pool_dist(&model, 1, 0.0, &cfg, PoolMode::Exact)?;
                let pools = (2..=ell_max)
                    .map(|ell| pool_dist(&model, ell, 0.0, &cfg, PoolMode::Exact))
                    .collect::<Result<Vec<_>>>()?;
                for &p in levels {
                    let h = DistortionFunction::var_indicator(p)?;
                    let rho_single = h.evaluate(&single)?;
                    for (i, pool) in pools.iter().enumerate() {
                        let rho_pool = h.evaluate(pool)?;
                        if rho_pool > rho_single + min_excess {
                            return Ok(Some(PeWitness {
                                x,
                                y,
                                lambda,
                                p,
                                ell: i + 2,
                                rho_single,
                                rho_pool,
                            }));
                        }
                    }
                }
            }
        }
    }
    Ok(None)
}

/// Deterministic small Bernoulli-mixture models with `s` equally weighted
/// scenarios, for probing pooling behaviour in exact mode.
pub fn probe_models(s: usize, count: usize, seed: u64) -> Vec<PoolModel> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mixing = (0..s)
                .map(|_| {
                    let k = rng.random_range(1..=3);
                    let mut raw: Vec<(f64, f64)> = (0..k)
                        .map(|_| (rng.random_range(0..=10) as f64 / 10.0, rng.random_range(1..=4) as f64))
                        .collect();
                    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
                    raw.dedup_by(|a, b| {
                        if a.0 == b.0 {
                            b.1 += a.1;
                            true
                        } else {
                            false
                        }
                    });
                    let total: f64 = raw.iter().map(|n| n.1).sum();
                    MixingLaw::Discrete {
                        nodes: raw.into_iter().map(|(z, w)| (z, w / total)).collect(),
                    }
                })
                .collect();
            PoolModel::new(ConditionalFamily::Bernoulli, mixing, vec![1.0 / s as f64; s])
                .expect("probe model is valid")
        })
        .collect()
}

/// Whether every exact pooling curve of `measure` over the given models and
/// attachments is non-increasing within `tol`.
pub fn pooling_probe(measure: &dyn ScenarioMeasure, models: &[PoolModel], ell_max: usize, ks: &[f64], tol: f64) -> Result<bool> {
    let cfg = SimConfig::default();
    for model in models {
        for &k in ks {
            let curve = pe_curve(measure, None, model, ell_max, k, &cfg, PoolMode::Exact)?;
            let values: Vec<f64> = curve.iter().map(|p| p.value).collect();
            if !is_monotone_decreasing(&values, tol) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
