//! Finite loss distributions and the transforms the rating engine needs:
//! tranching, pooling of iid copies, mixing, and stop-loss order tests.
//!
//! Everything here is exact arithmetic on atoms. Continuous laws are
//! discretized or sampled upstream.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::numeric::{neumaier_sum, MERGE_TOL, PROB_TOL, WEIGHT_TOL};

/// Default budget of composite terms for a single exact convolution step.
pub const DEFAULT_EXPLOSION_LIMIT: usize = 1_000_000;

/// Slack allowed when snapping values that overshoot the declared bounds
/// through float rounding.
const BOUND_SNAP: f64 = 1e-9;

/// A finite loss distribution: strictly increasing atom values with
/// strictly positive weights summing to one, inside declared bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDiscreteLoss", into = "RawDiscreteLoss")]
pub struct DiscreteLoss {
    values: Vec<f64>,
    weights: Vec<f64>,
    /// tail[i] = total weight of atoms i.. ; tail[len] = 0.
    tail: Vec<f64>,
    lo: f64,
    hi: f64,
}

#[derive(Serialize, Deserialize)]
struct RawDiscreteLoss {
    atoms: Vec<(f64, f64)>,
    #[serde(default)]
    lo: Option<f64>,
    #[serde(default)]
    hi: Option<f64>,
}

impl TryFrom<RawDiscreteLoss> for DiscreteLoss {
    type Error = Error;

    fn try_from(raw: RawDiscreteLoss) -> Result<Self> {
        DiscreteLoss::with_bounds(raw.atoms, raw.lo.unwrap_or(0.0), raw.hi.unwrap_or(1.0))
    }
}

impl From<DiscreteLoss> for RawDiscreteLoss {
    fn from(d: DiscreteLoss) -> Self {
        RawDiscreteLoss {
            atoms: d.atoms().collect(),
            lo: Some(d.lo),
            hi: Some(d.hi),
        }
    }
}

impl DiscreteLoss {
    /// Distribution on the unit interval (the space of normalized losses).
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Self::with_bounds(atoms, 0.0, 1.0)
    }

    /// Distribution with explicit support bounds. Weights must be strictly
    /// positive and sum to one within `WEIGHT_TOL`.
    pub fn with_bounds(atoms: Vec<(f64, f64)>, lo: f64, hi: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        for &(v, w) in &atoms {
            if !v.is_finite() {
                return Err(Error::InvalidDistribution(format!("non-finite value {v}")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "weight {w} at value {v} is not strictly positive"
                )));
            }
        }
        let total = neumaier_sum(atoms.iter().map(|a| a.1));
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Self::assemble(atoms, lo, hi, false)
    }

    /// Internal constructor for derived distributions: drops zero weights
    /// and renormalizes away accumulated rounding in the total.
    pub(crate) fn from_raw(atoms: Vec<(f64, f64)>, lo: f64, hi: f64) -> Result<Self> {
        let atoms: Vec<_> = atoms.into_iter().filter(|a| a.1 > 0.0).collect();
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms with positive weight".into()));
        }
        Self::assemble(atoms, lo, hi, true)
    }

    fn assemble(mut atoms: Vec<(f64, f64)>, lo: f64, hi: f64, renormalize: bool) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidDistribution(format!("bad bounds [{lo}, {hi}]")));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut weights: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut group_start = f64::NEG_INFINITY;
        for (v, w) in atoms {
            if v - group_start <= MERGE_TOL {
                *weights.last_mut().unwrap() += w;
            } else {
                group_start = v;
                values.push(v);
                weights.push(w);
            }
        }
        for v in values.iter_mut() {
            if *v < lo {
                if lo - *v <= BOUND_SNAP {
                    *v = lo;
                } else {
                    return Err(Error::InvalidDistribution(format!(
                        "value {v} below lower bound {lo}"
                    )));
                }
            }
            if *v > hi {
                if *v - hi <= BOUND_SNAP {
                    *v = hi;
                } else {
                    return Err(Error::InvalidDistribution(format!(
                        "value {v} above upper bound {hi}"
                    )));
                }
            }
        }
        // Snapping may have collapsed the extreme atoms onto one another.
        if values.len() >= 2 {
            let mut i = 1;
            while i < values.len() {
                if values[i] - values[i - 1] <= MERGE_TOL {
                    let w = weights.remove(i);
                    values.remove(i);
                    weights[i - 1] += w;
                } else {
                    i += 1;
                }
            }
        }
        if renormalize {
            let total = neumaier_sum(weights.iter().copied());
            if (total - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidDistribution(format!(
                    "derived weights sum to {total}"
                )));
            }
            for w in weights.iter_mut() {
                *w /= total;
            }
        }
        let mut tail = vec![0.0; values.len() + 1];
        for i in (0..values.len()).rev() {
            tail[i] = (tail[i + 1] + weights[i]).min(1.0);
        }
        // The full mass is one by validation; rounding in the suffix sums must not show through P(X >= min).
        tail[0] = 1.0;
        Ok(DiscreteLoss {
            values,
            weights,
            tail,
            lo,
            hi,
        })
    }

    /// Point mass at `c`; bounds are the unit interval when `c` lies in it.
    pub fn delta(c: f64) -> Result<Self> {
        let (lo, hi) = if (0.0..=1.0).contains(&c) { (0.0, 1.0) } else { (c, c) };
        Self::with_bounds(vec![(c, 1.0)], lo, hi)
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(param("p", format!("{p} not in [0,1]")));
        }
        Self::from_raw(vec![(0.0, 1.0 - p), (1.0, p)], 0.0, 1.0)
    }

    /// Equal weight on each listed value (repeats accumulate).
    pub fn equiprobable(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        let w = 1.0 / values.len() as f64;
        Self::from_raw(values.iter().map(|&v| (v, w)).collect(), 0.0, 1.0)
    }

    /// Empirical law of a sample of normalized losses.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        Self::from_samples_bounded(samples, 0.0, 1.0)
    }

    pub fn from_samples_bounded(samples: &[f64], lo: f64, hi: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidDistribution("empty sample".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let start = sorted[i];
            let mut j = i;
            while j < sorted.len() && sorted[j] - start <= MERGE_TOL {
                j += 1;
            }
            atoms.push((start, (j - i) as f64 / n));
            i = j;
        }
        Self::from_raw(atoms, lo, hi)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// True when the support lies in [0, 1].
    pub fn in_unit_interval(&self) -> bool {
        self.min() >= 0.0 && self.max() <= 1.0
    }

    /// Weight of atoms `i..`; this is the survival value on
    /// `[values[i-1], values[i])`.
    pub fn tail_from(&self, i: usize) -> f64 {
        self.tail[i]
    }

    pub fn mean(&self) -> f64 {
        neumaier_sum(self.atoms().map(|(v, w)| v * w))
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        neumaier_sum(self.atoms().map(|(v, w)| w * (v - m) * (v - m)))
    }

    /// P(X > x); right-continuous.
    pub fn survival(&self, x: f64) -> f64 {
        let i = self.values.partition_point(|&v| v <= x);
        self.tail[i]
    }

    /// P(X <= x).
    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.survival(x)
    }

    /// Left-continuous inverse `inf{x : F(x) >= q}`, evaluated through the
    /// same tail sums as the integrals so ties resolve identically.
    pub fn quantile_left(&self, q: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&q) {
            return Err(param("q", format!("{q} not in [0,1)")));
        }
        let cutoff = 1.0 - q + PROB_TOL;
        // tail[i + 1] is the survival just after atom i, i.e. 1 - F(x_i).
        // tail is non-increasing and tail[len] = 0, so the search terminates.
        let (mut lo, mut hi) = (0usize, self.values.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.tail[mid + 1] > cutoff {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        Ok(self.values[lo])
    }

    /// Stop-loss transform E[(X - t)+].
    pub fn stop_loss(&self, t: f64) -> f64 {
        neumaier_sum(self.atoms().map(|(v, w)| w * (v - t).max(0.0)))
    }

    /// Law of the senior tranche loss `(X - K)+ / (1 - K)`.
    pub fn tranche(&self, attachment: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&attachment) {
            return Err(param("K", format!("{attachment} not in [0,1)")));
        }
        if !self.in_unit_interval() {
            return Err(Error::InvalidDistribution(
                "tranching needs support in [0,1]".into(),
            ));
        }
        if attachment == 0.0 {
            return Ok(self.clone());
        }
        let width = 1.0 - attachment;
        let atoms = self
            .atoms()
            .map(|(v, w)| (((v - attachment).max(0.0) / width).min(1.0), w))
            .collect();
        Self::from_raw(atoms, 0.0, 1.0)
    }

    /// Exact law of the average of `ell` iid copies, using the default
    /// explosion limit.
    pub fn pool_average_exact(&self, ell: usize) -> Result<Self> {
        self.pool_average_exact_with_limit(ell, DEFAULT_EXPLOSION_LIMIT)
    }

    pub fn pool_average_exact_with_limit(&self, ell: usize, limit: usize) -> Result<Self> {
        if ell == 0 {
            return Err(param("ell", "must be positive"));
        }
        if ell == 1 {
            return Ok(self.clone());
        }
        let mut sum: Vec<(f64, f64)> = self.atoms().collect();
        for _ in 1..ell {
            let needed = sum.len().saturating_mul(self.len());
            if needed > limit {
                return Err(Error::ExplosionLimit { needed, limit });
            }
            let mut next = Vec::with_capacity(needed);
            for &(s, ws) in &sum {
                for (v, w) in self.atoms() {
                    next.push((s + v, ws * w));
                }
            }
            sum = merge_atoms(next);
        }
        let n = ell as f64;
        let atoms = sum.into_iter().map(|(s, w)| (s / n, w)).collect();
        Self::from_raw(atoms, self.lo, self.hi)
    }

    /// Weighted mixture of distributions.
    pub fn mixture(parts: &[(DiscreteLoss, f64)]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidDistribution("empty mixture".into()));
        }
        if parts.iter().any(|p| !(p.1 > 0.0)) {
            return Err(param("weight", "mixture weights must be positive"));
        }
        let total = neumaier_sum(parts.iter().map(|p| p.1));
        if (total - 1.0).abs() > 1e-9 {
            return Err(param("weight", format!("mixture weights sum to {total}")));
        }
        let lo = parts.iter().map(|p| p.0.lo).fold(f64::INFINITY, f64::min);
        let hi = parts.iter().map(|p| p.0.hi).fold(f64::NEG_INFINITY, f64::max);
        let atoms = parts
            .iter()
            .flat_map(|(d, a)| d.atoms().map(move |(v, w)| (v, w * a)))
            .collect();
        Self::from_raw(atoms, lo, hi)
    }
}

fn merge_atoms(mut atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    let mut group_start = f64::NEG_INFINITY;
    for (v, w) in atoms {
        if v - group_start <= MERGE_TOL {
            out.last_mut().unwrap().1 += w;
        } else {
            group_start = v;
            out.push((v, w));
        }
    }
    out
}

/// One conditional loss law per scenario, with scenario probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScenarioLoss", into = "RawScenarioLoss")]
pub struct ScenarioLoss {
    scenarios: Vec<DiscreteLoss>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawScenarioLoss {
    weights: Vec<f64>,
    scenarios: Vec<DiscreteLoss>,
}

impl TryFrom<RawScenarioLoss> for ScenarioLoss {
    type Error = Error;

    fn try_from(raw: RawScenarioLoss) -> Result<Self> {
        ScenarioLoss::new(raw.scenarios, raw.weights)
    }
}

impl From<ScenarioLoss> for RawScenarioLoss {
    fn from(s: ScenarioLoss) -> Self {
        RawScenarioLoss {
            weights: s.weights,
            scenarios: s.scenarios,
        }
    }
}

impl ScenarioLoss {
    pub fn new(scenarios: Vec<DiscreteLoss>, weights: Vec<f64>) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::InvalidDistribution("no scenarios".into()));
        }
        if scenarios.len() != weights.len() {
            return Err(Error::ScenarioMismatch {
                expected: scenarios.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(param("weights", "scenario weights must be strictly positive"));
        }
        let total = neumaier_sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(param("weights", format!("scenario weights sum to {total}")));
        }
        Ok(ScenarioLoss { scenarios, weights })
    }

    /// Single-scenario wrapper, so law-invariant measures share the
    /// scenario code path.
    pub fn single(d: DiscreteLoss) -> Self {
        ScenarioLoss {
            scenarios: vec![d],
            weights: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn scenarios(&self) -> &[DiscreteLoss] {
        &self.scenarios
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scenario(&self, j: usize) -> &DiscreteLoss {
        &self.scenarios[j]
    }

    /// The unconditional law of the loss.
    pub fn unconditional(&self) -> Result<DiscreteLoss> {
        let parts: Vec<_> = self
            .scenarios
            .iter()
            .cloned()
            .zip(self.weights.iter().copied())
            .collect();
        DiscreteLoss::mixture(&parts)
    }

    /// Apply the same transform to every scenario.
    pub fn map<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&DiscreteLoss) -> Result<DiscreteLoss>,
    {
        let scenarios = self.scenarios.iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(ScenarioLoss {
            scenarios,
            weights: self.weights.clone(),
        })
    }
}

/// Flavour of stop-loss comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderMode {
    /// Increasing convex order.
    Icx,
    /// Convex order: icx plus equal means.
    Cx,
}

/// `x <=_icx y`: the stop-loss transform of `x` is dominated at every
/// kink. Both transforms are piecewise linear with kinks only at atoms,
/// and agree in slope beyond the extreme atoms, so checking the merged
/// atom set is complete.
pub fn icx_leq(x: &DiscreteLoss, y: &DiscreteLoss, tol: f64) -> bool {
    order_leq(x, y, tol, OrderMode::Icx)
}

pub fn cx_leq(x: &DiscreteLoss, y: &DiscreteLoss, tol: f64) -> bool {
    order_leq(x, y, tol, OrderMode::Cx)
}

pub fn order_leq(x: &DiscreteLoss, y: &DiscreteLoss, tol: f64, mode: OrderMode) -> bool {
    if mode == OrderMode::Cx && (x.mean() - y.mean()).abs() > tol {
        return false;
    }
    let mut points: Vec<f64> = x.values().iter().chain(y.values()).copied().collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
        .iter()
        .all(|&t| x.stop_loss(t) <= y.stop_loss(t) + tol)
}

/// Scenario-wise increasing convex order: icx under every conditional law.
pub fn s_icx_leq(x: &ScenarioLoss, y: &ScenarioLoss, tol: f64) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::ScenarioMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(x
        .scenarios()
        .iter()
        .zip(y.scenarios())
        .all(|(a, b)| icx_leq(a, b, tol)))
}
