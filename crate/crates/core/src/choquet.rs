//! Distortion and scenario-distortion functions, exact Choquet integration
//! on finite distributions, and a definition-level oracle for finite
//! capacities.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::{DiscreteLoss, ScenarioLoss};
use crate::error::{param, Error, Result};
use crate::numeric::{merged_breakpoints, neumaier_sum, MERGE_TOL, PROB_TOL};

/// Points per axis used to validate distortion functions at construction.
pub const VALIDATION_GRID: usize = 1001;

/// Total evaluation budget for validating a multivariate distortion.
pub const VALIDATION_BUDGET: usize = 1_000_000;

const MONOTONE_SLACK: f64 = 1e-12;

/// Parametric families of distortion functions `h: [0,1] -> [0,1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistortionFamily {
    Identity,
    /// `min(x / (1 - p), 1)`: Expected Shortfall at level p.
    EsWedge { p: f64 },
    /// `x^gamma`: MAXVAR.
    MaxvarPower { gamma: f64 },
    /// `1{x > 1 - p}`: left quantile at level p.
    VarIndicator { p: f64 },
    /// `1{x = 1}`: essential infimum.
    EssinfIndicator,
    /// `1{x > 0}`: essential supremum.
    EssupIndicator,
    /// Piecewise-linear interpolation through `(x, h(x))` knots.
    Tabulated { points: Vec<(f64, f64)> },
}

/// A validated distortion function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistortionFamily", into = "DistortionFamily")]
pub struct DistortionFunction {
    family: DistortionFamily,
}

impl TryFrom<DistortionFamily> for DistortionFunction {
    type Error = Error;

    fn try_from(family: DistortionFamily) -> Result<Self> {
        DistortionFunction::new(family)
    }
}

impl From<DistortionFunction> for DistortionFamily {
    fn from(h: DistortionFunction) -> Self {
        h.family
    }
}

impl DistortionFunction {
    pub fn new(family: DistortionFamily) -> Result<Self> {
        match &family {
            DistortionFamily::EsWedge { p } | DistortionFamily::VarIndicator { p } => {
                if !(0.0..1.0).contains(p) {
                    return Err(param("p", format!("{p} not in [0,1)")));
                }
            }
            DistortionFamily::MaxvarPower { gamma } => {
                if !(*gamma > 0.0 && *gamma <= 1.0) {
                    return Err(param("gamma", format!("{gamma} not in (0,1]")));
                }
            }
            DistortionFamily::Tabulated { points } => validate_knots(points)?,
            _ => {}
        }
        let h = DistortionFunction { family };
        if !matches!(h.family, DistortionFamily::Tabulated { .. }) {
            h.validate_on_grid()?;
        }
        Ok(h)
    }

    pub fn identity() -> Self {
        DistortionFunction {
            family: DistortionFamily::Identity,
        }
    }

    pub fn es_wedge(p: f64) -> Result<Self> {
        Self::new(DistortionFamily::EsWedge { p })
    }

    pub fn maxvar_power(gamma: f64) -> Result<Self> {
        Self::new(DistortionFamily::MaxvarPower { gamma })
    }

    pub fn var_indicator(p: f64) -> Result<Self> {
        Self::new(DistortionFamily::VarIndicator { p })
    }

    pub fn essinf_indicator() -> Self {
        DistortionFunction {
            family: DistortionFamily::EssinfIndicator,
        }
    }

    pub fn essup_indicator() -> Self {
        DistortionFunction {
            family: DistortionFamily::EssupIndicator,
        }
    }

    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(DistortionFamily::Tabulated { points })
    }

    pub fn family(&self) -> &DistortionFamily {
        &self.family
    }

    /// Jump-type families whose continuity a grid cannot speak to.
    pub fn is_indicator(&self) -> bool {
        matches!(
            self.family,
            DistortionFamily::VarIndicator { .. }
                | DistortionFamily::EssinfIndicator
                | DistortionFamily::EssupIndicator
        )
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.family {
            DistortionFamily::Identity => x,
            DistortionFamily::EsWedge { p } => (x / (1.0 - p)).min(1.0),
            DistortionFamily::MaxvarPower { gamma } => x.max(0.0).powf(*gamma),
            DistortionFamily::VarIndicator { p } => {
                if x > 1.0 - p + PROB_TOL || x >= 1.0 - PROB_TOL {
                    1.0
                } else {
                    0.0
                }
            }
            DistortionFamily::EssinfIndicator => {
                if x >= 1.0 - PROB_TOL {
                    1.0
                } else {
                    0.0
                }
            }
            DistortionFamily::EssupIndicator => {
                if x > PROB_TOL {
                    1.0
                } else {
                    0.0
                }
            }
            DistortionFamily::Tabulated { points } => interpolate(points, x),
        }
    }

    fn validate_on_grid(&self) -> Result<()> {
        if self.eval(0.0) != 0.0 || (self.eval(1.0) - 1.0).abs() > MONOTONE_SLACK {
            return Err(Error::InvalidDistortion(format!(
                "{:?}: h(0) = {}, h(1) = {}",
                self.family,
                self.eval(0.0),
                self.eval(1.0)
            )));
        }
        let step = 1.0 / (VALIDATION_GRID - 1) as f64;
        let mut prev = self.eval(0.0);
        for i in 1..VALIDATION_GRID {
            let cur = self.eval(i as f64 * step);
            if cur < prev - MONOTONE_SLACK {
                return Err(Error::InvalidDistortion(format!(
                    "{:?} decreases near x = {}",
                    self.family,
                    i as f64 * step
                )));
            }
            prev = cur;
        }
        Ok(())
    }
}

impl fmt::Display for DistortionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            DistortionFamily::Identity => write!(f, "identity"),
            DistortionFamily::EsWedge { p } => write!(f, "es_wedge({p})"),
            DistortionFamily::MaxvarPower { gamma } => write!(f, "maxvar_power({gamma})"),
            DistortionFamily::VarIndicator { p } => write!(f, "var_indicator({p})"),
            DistortionFamily::EssinfIndicator => write!(f, "essinf_indicator"),
            DistortionFamily::EssupIndicator => write!(f, "essup_indicator"),
            DistortionFamily::Tabulated { points } => write!(f, "tabulated[{}]", points.len()),
        }
    }
}

// Monotonicity of a tabulated h is only validated at the knots; linear
// interpolation preserves it in between.
fn validate_knots(points: &[(f64, f64)]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::InvalidDistortion("need at least two knots".into()));
    }
    let first = points[0];
    let last = points[points.len() - 1];
    if first != (0.0, 0.0) || last != (1.0, 1.0) {
        return Err(Error::InvalidDistortion(
            "knots must start at (0,0) and end at (1,1)".into(),
        ));
    }
    for w in points.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::InvalidDistortion("knot abscissae must increase".into()));
        }
        if w[1].1 < w[0].1 || !w[1].1.is_finite() {
            return Err(Error::InvalidDistortion(format!(
                "knot values decrease between x = {} and x = {}",
                w[0].0, w[1].0
            )));
        }
    }
    Ok(())
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    let i = points.partition_point(|k| k.0 < x);
    if i == 0 {
        return points[0].1;
    }
    if i >= points.len() {
        return points[points.len() - 1].1;
    }
    let (x0, y0) = points[i - 1];
    let (x1, y1) = points[i];
    if x == x1 {
        return y1;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Structural forms of scenario distortion functions `g: [0,1]^s -> [0,1]`.
#[derive(Clone)]
pub enum SDistortionForm {
    /// `sum_j a_j h_j(x_j)`.
    Separable(Vec<(f64, DistortionFunction)>),
    /// `h(sum_j w_j x_j)`: the law-invariant special case.
    FromH {
        h: DistortionFunction,
        weights: Vec<f64>,
    },
    /// `max_j h_j(x_j)`.
    MaxOf(Vec<DistortionFunction>),
    /// `min_j h_j(x_j)`.
    MinOf(Vec<DistortionFunction>),
    Custom {
        name: String,
        s: usize,
        eval: Evaluator,
    },
}

impl fmt::Debug for SDistortionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SDistortionForm::Separable(parts) => f.debug_tuple("Separable").field(parts).finish(),
            SDistortionForm::FromH { h, weights } => f
                .debug_struct("FromH")
                .field("h", h)
                .field("weights", weights)
                .finish(),
            SDistortionForm::MaxOf(hs) => f.debug_tuple("MaxOf").field(hs).finish(),
            SDistortionForm::MinOf(hs) => f.debug_tuple("MinOf").field(hs).finish(),
            SDistortionForm::Custom { name, s, .. } => f
                .debug_struct("Custom")
                .field("name", name)
                .field("s", s)
                .finish(),
        }
    }
}

/// A validated scenario distortion function.
#[derive(Clone, Debug)]
pub struct SDistortionFunction {
    form: SDistortionForm,
    s: usize,
}

impl SDistortionFunction {
    pub fn new(form: SDistortionForm) -> Result<Self> {
        let s = match &form {
            SDistortionForm::Separable(parts) => {
                if parts.iter().any(|(a, _)| !(*a >= 0.0)) {
                    return Err(param("a", "separable weights must be nonnegative"));
                }
                let total = neumaier_sum(parts.iter().map(|p| p.0));
                if (total - 1.0).abs() > 1e-12 {
                    return Err(param("a", format!("separable weights sum to {total}")));
                }
                parts.len()
            }
            SDistortionForm::FromH { weights, .. } => {
                if weights.iter().any(|w| !(*w > 0.0)) {
                    return Err(param("weights", "must be strictly positive"));
                }
                let total = neumaier_sum(weights.iter().copied());
                if (total - 1.0).abs() > 1e-12 {
                    return Err(param("weights", format!("sum to {total}")));
                }
                weights.len()
            }
            SDistortionForm::MaxOf(hs) | SDistortionForm::MinOf(hs) => hs.len(),
            SDistortionForm::Custom { s, .. } => *s,
        };
        if s == 0 {
            return Err(Error::InvalidDistortion("zero scenarios".into()));
        }
        let g = SDistortionFunction { form, s };
        g.validate_on_grid()?;
        Ok(g)
    }

    pub fn separable(parts: Vec<(f64, DistortionFunction)>) -> Result<Self> {
        Self::new(SDistortionForm::Separable(parts))
    }

    /// `g(x) = h(sum_j w_j x_j)`, the scenario form of a law-invariant
    /// distortion risk measure under scenario probabilities `weights`.
    pub fn from_h(h: DistortionFunction, weights: Vec<f64>) -> Result<Self> {
        Self::new(SDistortionForm::FromH { h, weights })
    }

    pub fn max_of(hs: Vec<DistortionFunction>) -> Result<Self> {
        Self::new(SDistortionForm::MaxOf(hs))
    }

    pub fn min_of(hs: Vec<DistortionFunction>) -> Result<Self> {
        Self::new(SDistortionForm::MinOf(hs))
    }

    /// `max_j 1{x_j > 1 - p}`: the scenario distortion of Max VaR.
    pub fn max_of_indicators(p: f64, s: usize) -> Result<Self> {
        let h = DistortionFunction::var_indicator(p)?;
        Self::max_of(vec![h; s])
    }

    pub fn custom<F>(name: impl Into<String>, s: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(SDistortionForm::Custom {
            name: name.into(),
            s,
            eval: Arc::new(f),
        })
    }

    pub fn form(&self) -> &SDistortionForm {
        &self.form
    }

    pub fn dim(&self) -> usize {
        self.s
    }

    /// Components if `g` is additively separable.
    pub fn separable_parts(&self) -> Option<&[(f64, DistortionFunction)]> {
        match &self.form {
            SDistortionForm::Separable(parts) => Some(parts),
            _ => None,
        }
    }

    /// True when semicontinuity cannot be read off the structure: jump-type
    /// components or an opaque evaluator.
    pub fn has_unverified_continuity(&self) -> bool {
        match &self.form {
            SDistortionForm::Separable(parts) => parts.iter().any(|(_, h)| h.is_indicator()),
            SDistortionForm::FromH { h, .. } => h.is_indicator(),
            SDistortionForm::MaxOf(hs) | SDistortionForm::MinOf(hs) => {
                hs.iter().any(|h| h.is_indicator())
            }
            SDistortionForm::Custom { .. } => true,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.s);
        match &self.form {
            SDistortionForm::Separable(parts) => parts
                .iter()
                .zip(x)
                .map(|((a, h), &xi)| a * h.eval(xi))
                .sum(),
            SDistortionForm::FromH { h, weights } => {
                let t: f64 = weights.iter().zip(x).map(|(w, xi)| w * xi).sum();
                h.eval(t.min(1.0))
            }
            SDistortionForm::MaxOf(hs) => hs
                .iter()
                .zip(x)
                .map(|(h, &xi)| h.eval(xi))
                .fold(f64::NEG_INFINITY, f64::max),
            SDistortionForm::MinOf(hs) => hs
                .iter()
                .zip(x)
                .map(|(h, &xi)| h.eval(xi))
                .fold(f64::INFINITY, f64::min),
            SDistortionForm::Custom { eval, .. } => eval(x),
        }
    }

    /// Per-axis resolution of the validation grid under the total budget.
    pub fn validation_points_per_axis(s: usize) -> usize {
        let mut n = VALIDATION_GRID;
        while n > 2 && (n as f64).powi(s as i32) > VALIDATION_BUDGET as f64 {
            n -= 1;
        }
        n
    }

    fn validate_on_grid(&self) -> Result<()> {
        let s = self.s;
        let zero = vec![0.0; s];
        let one = vec![1.0; s];
        if self.eval(&zero).abs() > MONOTONE_SLACK || (self.eval(&one) - 1.0).abs() > MONOTONE_SLACK {
            return Err(Error::InvalidDistortion(format!(
                "{:?}: g(0) = {}, g(1) = {}",
                self.form,
                self.eval(&zero),
                self.eval(&one)
            )));
        }
        let n = Self::validation_points_per_axis(s);
        let step = 1.0 / (n - 1) as f64;
        let total = n.pow(s as u32);
        let mut idx = vec![0usize; s];
        let mut x = vec![0.0; s];
        let mut y = vec![0.0; s];
        for flat in 0..total {
            let mut r = flat;
            for k in 0..s {
                idx[k] = r % n;
                r /= n;
                x[k] = idx[k] as f64 * step;
            }
            let gx = self.eval(&x);
            for k in 0..s {
                if idx[k] + 1 < n {
                    y.copy_from_slice(&x);
                    y[k] = (idx[k] + 1) as f64 * step;
                    if self.eval(&y) < gx - MONOTONE_SLACK {
                        return Err(Error::InvalidDistortion(format!(
                            "{:?} decreases along axis {k} at {:?}",
                            self.form, x
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Choquet integral of `d` against the distorted probability `h o P`.
///
/// Exact: the survival function is constant between consecutive atoms, so
/// the layer-cake integral is a finite sum. Written as
/// `min + sum h(S_i) dx_i`, which is the two-sided definition for any
/// support bounds.
pub fn choquet_distortion(d: &DiscreteLoss, h: &DistortionFunction) -> f64 {
    let v = d.values();
    let base = v[0];
    let body = neumaier_sum((0..v.len() - 1).map(|i| h.eval(d.tail_from(i + 1)) * (v[i + 1] - v[i])));
    base + body
}

/// Choquet integral against `g o P^S`, on the merged breakpoint partition
/// of all scenario supports.
pub fn choquet_sdistortion(sl: &ScenarioLoss, g: &SDistortionFunction) -> Result<f64> {
    if sl.len() != g.dim() {
        return Err(Error::ScenarioMismatch {
            expected: g.dim(),
            got: sl.len(),
        });
    }
    let points: Vec<f64> = sl
        .scenarios()
        .iter()
        .flat_map(|d| d.values().iter().copied())
        .collect();
    let breaks = merged_breakpoints(points);
    let mut surv = vec![0.0; sl.len()];
    let mut terms = Vec::with_capacity(breaks.len());
    for k in 0..breaks.len() - 1 {
        // Atoms merged into breakpoint k sit within MERGE_TOL above it.
        let x = breaks[k] + MERGE_TOL;
        for (j, d) in sl.scenarios().iter().enumerate() {
            surv[j] = d.survival(x);
        }
        terms.push(g.eval(&surv) * (breaks[k + 1] - breaks[k]));
    }
    Ok(breaks[0] + neumaier_sum(terms))
}

/// A capacity on the subsets of `m` atoms, indexed by bitmask.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteCapacity {
    m: usize,
    nu: Vec<f64>,
}

impl FiniteCapacity {
    pub const MAX_ATOMS: usize = 24;

    pub fn new(m: usize, nu: Vec<f64>) -> Result<Self> {
        if m == 0 || m > Self::MAX_ATOMS {
            return Err(Error::InvalidCapacity(format!("atom count {m} out of range")));
        }
        if nu.len() != 1 << m {
            return Err(Error::InvalidCapacity(format!(
                "expected {} set values, got {}",
                1usize << m,
                nu.len()
            )));
        }
        if nu[0] != 0.0 || (nu[(1 << m) - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCapacity("need nu(empty) = 0 and nu(all) = 1".into()));
        }
        for mask in 0..nu.len() {
            for bit in 0..m {
                let sup = mask | (1 << bit);
                if sup != mask && nu[sup] < nu[mask] - 1e-15 {
                    return Err(Error::InvalidCapacity(format!(
                        "not monotone: nu({sup:#b}) < nu({mask:#b})"
                    )));
                }
            }
        }
        Ok(FiniteCapacity { m, nu })
    }

    pub fn from_fn<F: Fn(u32) -> f64>(m: usize, f: F) -> Result<Self> {
        let nu = (0..1u32 << m).map(f).collect();
        Self::new(m, nu)
    }

    /// `nu(A) = h(P(A))` for atom probabilities `probs`.
    pub fn distorted(probs: &[f64], h: &DistortionFunction) -> Result<Self> {
        Self::from_fn(probs.len(), |mask| {
            let p: f64 = probs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, p)| *p)
                .sum();
            h.eval(p.min(1.0))
        })
    }

    pub fn atoms(&self) -> usize {
        self.m
    }

    pub fn value(&self, mask: u32) -> f64 {
        self.nu[mask as usize]
    }
}

/// Definition-level Choquet integral of the random variable taking
/// `values[i]` on atom `i`: a telescoping sum over upper level sets.
pub fn choquet_oracle(cap: &FiniteCapacity, values: &[f64]) -> Result<f64> {
    if values.len() != cap.atoms() {
        return Err(Error::InvalidCapacity(format!(
            "{} values for {} atoms",
            values.len(),
            cap.atoms()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(param("values", "must be finite"));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut total = 0.0;
    let mut prev_nu = 0.0;
    let mut mask: u32 = 0;
    let mut i = 0;
    while i < order.len() {
        let level = values[order[i]];
        while i < order.len() && level - values[order[i]] <= MERGE_TOL {
            mask |= 1 << order[i];
            i += 1;
        }
        let nu = cap.value(mask);
        total += level * (nu - prev_nu);
        prev_nu = nu;
    }
    Ok(total)
}

/// The six scenario-based criteria with their parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "snake_case")]
pub enum Criterion {
    AvgEl,
    AvgEs { p: f64 },
    AvgMaxvar { gamma: f64 },
    AvgVar { p: f64 },
    MaxVar { p: f64 },
    AvgPd,
}

impl Criterion {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Criterion::AvgEs { p } | Criterion::AvgVar { p } | Criterion::MaxVar { p } => {
                if !(0.0..1.0).contains(&p) {
                    return Err(param("p", format!("{p} not in [0,1)")));
                }
            }
            Criterion::AvgMaxvar { gamma } => {
                if !(gamma > 0.0 && gamma <= 1.0) {
                    return Err(param("gamma", format!("{gamma} not in (0,1]")));
                }
            }
            Criterion::AvgEl | Criterion::AvgPd => {}
        }
        Ok(())
    }

    /// Whether the criterion is a Choquet integral (all but Average PD).
    pub fn is_choquet(&self) -> bool {
        !matches!(self, Criterion::AvgPd)
    }

    /// Short family name, without parameters.
    pub fn family(&self) -> &'static str {
        match self {
            Criterion::AvgEl => "avg_el",
            Criterion::AvgEs { .. } => "avg_es",
            Criterion::AvgMaxvar { .. } => "avg_maxvar",
            Criterion::AvgVar { .. } => "avg_var",
            Criterion::MaxVar { .. } => "max_var",
            Criterion::AvgPd => "avg_pd",
        }
    }

    /// Per-scenario distortion for the averaged criteria.
    pub fn component_distortion(&self) -> Result<Option<DistortionFunction>> {
        Ok(match *self {
            Criterion::AvgEl => Some(DistortionFunction::identity()),
            Criterion::AvgEs { p } => Some(DistortionFunction::es_wedge(p)?),
            Criterion::AvgMaxvar { gamma } => Some(DistortionFunction::maxvar_power(gamma)?),
            Criterion::AvgVar { p } | Criterion::MaxVar { p } => {
                Some(DistortionFunction::var_indicator(p)?)
            }
            Criterion::AvgPd => None,
        })
    }

    /// Scenario distortion `g` under scenario weights `a`; `None` for the
    /// non-Choquet Average PD.
    pub fn s_distortion(&self, a: &[f64]) -> Result<Option<SDistortionFunction>> {
        self.validate()?;
        let Some(h) = self.component_distortion()? else {
            return Ok(None);
        };
        let g = match self {
            Criterion::MaxVar { p } => SDistortionFunction::max_of_indicators(*p, a.len())?,
            _ => SDistortionFunction::separable(a.iter().map(|&w| (w, h.clone())).collect())?,
        };
        Ok(Some(g))
    }

    /// The criterion's formula evaluated exactly on `sl`, with scenario
    /// weights taken from `sl`.
    pub fn value(&self, sl: &ScenarioLoss) -> Result<f64> {
        self.validate()?;
        let per = |f: &dyn Fn(&DiscreteLoss) -> Result<f64>| -> Result<Vec<f64>> {
            sl.scenarios().iter().map(f).collect()
        };
        let avg = |xs: Vec<f64>| neumaier_sum(xs.iter().zip(sl.weights()).map(|(x, a)| x * a));
        Ok(match *self {
            Criterion::AvgEl => avg(per(&|d| Ok(d.mean()))?),
            Criterion::AvgEs { p } => avg(per(&|d| Ok(expected_shortfall(d, p)))?),
            Criterion::AvgMaxvar { gamma } => avg(per(&|d| Ok(maxvar(d, gamma)))?),
            Criterion::AvgVar { p } => avg(per(&|d| d.quantile_left(p))?),
            Criterion::MaxVar { p } => per(&|d| d.quantile_left(p))?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max),
            Criterion::AvgPd => avg(per(&|d| Ok(d.survival(0.0)))?),
        })
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::AvgEs { p } | Criterion::AvgVar { p } | Criterion::MaxVar { p } => {
                write!(f, "{}:{}", self.family(), p)
            }
            Criterion::AvgMaxvar { gamma } => write!(f, "{}:{}", self.family(), gamma),
            _ => f.write_str(self.family()),
        }
    }
}

impl FromStr for Criterion {
    type Err = Error;

    /// Parses `family` or `family:param`, e.g. `avg_es:0.9`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let num = |default: Option<f64>| -> Result<f64> {
            match arg {
                Some(a) => a
                    .parse::<f64>()
                    .map_err(|_| param("criterion", format!("bad parameter `{a}`"))),
                None => default.ok_or_else(|| param("criterion", format!("`{name}` needs a parameter"))),
            }
        };
        let c = match name.replace('-', "_").as_str() {
            "avg_el" | "el" => Criterion::AvgEl,
            "avg_es" | "es" => Criterion::AvgEs { p: num(None)? },
            "avg_maxvar" | "maxvar" => Criterion::AvgMaxvar { gamma: num(None)? },
            "avg_var" | "var" => Criterion::AvgVar { p: num(None)? },
            "max_var" => Criterion::MaxVar { p: num(None)? },
            "avg_pd" | "pd" => Criterion::AvgPd,
            other => return Err(param("criterion", format!("unknown criterion `{other}`"))),
        };
        if matches!(c, Criterion::AvgEl | Criterion::AvgPd) && arg.is_some() {
            return Err(param("criterion", format!("`{name}` takes no parameter")));
        }
        c.validate()?;
        Ok(c)
    }
}

/// `1/(1-p) * int_p^1 VaR_u du` in closed form: atom i carries the
/// probability slice `(F_{i-1}, F_i]`, whose overlap with `[p, 1]` is
/// `min(tail_i, 1-p) - min(tail_{i+1}, 1-p)`.
pub fn expected_shortfall(d: &DiscreteLoss, p: f64) -> f64 {
    let cap = 1.0 - p;
    let terms = d.values().iter().enumerate().map(|(i, &v)| {
        let hi = d.tail_from(i).min(cap);
        let lo = d.tail_from(i + 1).min(cap);
        v * (hi - lo)
    });
    neumaier_sum(terms) / cap
}

/// `int S(x)^gamma dx`, two-sided form.
pub fn maxvar(d: &DiscreteLoss, gamma: f64) -> f64 {
    let v = d.values();
    let body = neumaier_sum((0..v.len() - 1).map(|i| d.tail_from(i + 1).powf(gamma) * (v[i + 1] - v[i])));
    v[0] + body
}

/// Anything that assigns a risk value to a scenario loss.
pub trait ScenarioMeasure: Send + Sync {
    fn evaluate(&self, sl: &ScenarioLoss) -> Result<f64>;
    fn name(&self) -> String;
}

impl ScenarioMeasure for Criterion {
    fn evaluate(&self, sl: &ScenarioLoss) -> Result<f64> {
        self.value(sl)
    }

    fn name(&self) -> String {
        self.to_string()
    }
}

impl ScenarioMeasure for SDistortionFunction {
    fn evaluate(&self, sl: &ScenarioLoss) -> Result<f64> {
        choquet_sdistortion(sl, self)
    }

    fn name(&self) -> String {
        format!("{:?}", self.form)
    }
}

/// A law-invariant distortion risk measure applied to the unconditional law.
impl ScenarioMeasure for DistortionFunction {
    fn evaluate(&self, sl: &ScenarioLoss) -> Result<f64> {
        if sl.len() == 1 {
            return Ok(choquet_distortion(sl.scenario(0), self));
        }
        Ok(choquet_distortion(&sl.unconditional()?, self))
    }

    fn name(&self) -> String {
        self.to_string()
    }
}

/// `measure_value` entry point.
pub fn measure_value(criterion: &Criterion, sl: &ScenarioLoss) -> Result<f64> {
    criterion.value(sl)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(p: f64) -> DiscreteLoss {
        DiscreteLoss::bernoulli(p).unwrap()
    }

    fn two(x: DiscreteLoss, y: DiscreteLoss) -> ScenarioLoss {
        ScenarioLoss::new(vec![x, y], vec![0.5, 0.5]).unwrap()
    }

    fn all_families() -> Vec<DistortionFunction> {
        vec![
            DistortionFunction::identity(),
            DistortionFunction::es_wedge(0.9).unwrap(),
            DistortionFunction::maxvar_power(0.3).unwrap(),
            DistortionFunction::var_indicator(0.8).unwrap(),
            DistortionFunction::essinf_indicator(),
            DistortionFunction::essup_indicator(),
            DistortionFunction::tabulated(vec![(0.0, 0.0), (0.2, 0.6), (1.0, 1.0)]).unwrap(),
        ]
    }

    #[test]
    fn delta_integrates_to_its_value() {
        for c in [0.0, 0.25, 0.7, 1.0] {
            let d = DiscreteLoss::delta(c).unwrap();
            for h in all_families() {
                assert_eq!(choquet_distortion(&d, &h), c, "{h}");
            }
        }
    }

    #[test]
    fn es_on_bernoulli() {
        let h = DistortionFunction::es_wedge(0.9).unwrap();
        let v = choquet_distortion(&b(0.05), &h);
        assert!((v - 0.5).abs() < 1e-12, "{v}");
        let cap = FiniteCapacity::distorted(&[0.95, 0.05], &h).unwrap();
        let o = choquet_oracle(&cap, &[0.0, 1.0]).unwrap();
        assert!((o - v).abs() < 1e-12);
    }

    #[test]
    fn essinf_of_bernoulli_is_zero() {
        assert_eq!(choquet_distortion(&b(0.05), &DistortionFunction::essinf_indicator()), 0.0);
    }

    #[test]
    fn sdistortion_examples() {
        let c = DiscreteLoss::delta(0.35).unwrap();
        let g = SDistortionFunction::max_of_indicators(0.8, 2).unwrap();
        assert_eq!(choquet_sdistortion(&two(c.clone(), c), &g).unwrap(), 0.35);

        let id = DistortionFunction::identity();
        let g = SDistortionFunction::separable(vec![(0.5, id.clone()), (0.5, id)]).unwrap();
        let v = choquet_sdistortion(&two(b(0.2), b(0.4)), &g).unwrap();
        assert!((v - 0.3).abs() < 1e-12);

        let g = SDistortionFunction::max_of_indicators(0.8, 2).unwrap();
        let v = choquet_sdistortion(&two(b(0.3), b(0.1)), &g).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn scenario_count_mismatch() {
        let g = SDistortionFunction::max_of_indicators(0.8, 3).unwrap();
        assert!(matches!(
            choquet_sdistortion(&two(b(0.3), b(0.1)), &g),
            Err(Error::ScenarioMismatch { .. })
        ));
    }

    #[test]
    fn g_from_h_examples() {
        let g = SDistortionFunction::from_h(DistortionFunction::identity(), vec![0.5, 0.5]).unwrap();
        assert_eq!(g.eval(&[1.0, 0.0]), 0.5);
        let g = SDistortionFunction::from_h(DistortionFunction::maxvar_power(0.5).unwrap(), vec![1.0]).unwrap();
        assert!((g.eval(&[0.25]) - 0.5).abs() < 1e-15);

        let sl = two(b(0.2), b(0.4));
        let g = SDistortionFunction::from_h(DistortionFunction::identity(), vec![0.5, 0.5]).unwrap();
        let via_g = choquet_sdistortion(&sl, &g).unwrap();
        let via_h = choquet_distortion(&sl.unconditional().unwrap(), &DistortionFunction::identity());
        assert!((via_g - 0.3).abs() < 1e-12 && (via_h - 0.3).abs() < 1e-12);
    }

    #[test]
    fn oracle_examples() {
        let h = DistortionFunction::tabulated(vec![(0.0, 0.0), (1.0, 1.0)]).unwrap();
        let cap = FiniteCapacity::distorted(&[0.25; 4], &h).unwrap();
        assert!((choquet_oracle(&cap, &[0.6; 4]).unwrap() - 0.6).abs() < 1e-15);

        // h(x) = x^2 on three equiprobable atoms
        let third = 1.0 / 3.0;
        let cap = FiniteCapacity::from_fn(3, |mask| {
            let p = mask.count_ones() as f64 * third;
            p * p
        })
        .unwrap();
        let v = choquet_oracle(&cap, &[0.2, 0.5, 0.9]).unwrap();
        let expected = 0.2 + 0.3 * (4.0 / 9.0) + 0.4 * (1.0 / 9.0);
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.37778).abs() < 1e-5);

        let probs = [0.1, 0.2, 0.3, 0.4];
        let cap = FiniteCapacity::distorted(&probs, &DistortionFunction::identity()).unwrap();
        let vals = [0.9, 0.1, 0.4, 0.3];
        let ev: f64 = probs.iter().zip(vals).map(|(p, v)| p * v).sum();
        assert!((choquet_oracle(&cap, &vals).unwrap() - ev).abs() < 1e-15);
    }

    #[test]
    fn capacity_validation() {
        assert!(FiniteCapacity::new(1, vec![0.0, 0.5]).is_err());
        assert!(FiniteCapacity::new(2, vec![0.0, 0.7, 0.2, 0.6]).is_err());
        assert!(FiniteCapacity::new(2, vec![0.0, 0.2, 0.2, 1.0]).is_ok());
    }

    #[test]
    fn table_two_examples() {
        let v = Criterion::AvgEl.value(&two(b(0.2), b(0.4))).unwrap();
        assert!((v - 0.3).abs() < 1e-12);
        let v = Criterion::AvgEs { p: 0.9 }.value(&two(b(0.05), b(0.2))).unwrap();
        assert!((v - 0.75).abs() < 1e-12);
        let v = Criterion::AvgPd.value(&two(b(0.05), b(0.25))).unwrap();
        assert!((v - 0.15).abs() < 1e-12);
        let v = Criterion::MaxVar { p: 0.8 }.value(&two(b(0.3), b(0.1))).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn criterion_formulas_match_their_distortions() {
        let sl = ScenarioLoss::new(
            vec![
                DiscreteLoss::new(vec![(0.0, 0.6), (0.1, 0.1), (0.45, 0.2), (1.0, 0.1)]).unwrap(),
                DiscreteLoss::new(vec![(0.0, 0.82), (0.3, 0.08), (0.7, 0.1)]).unwrap(),
            ],
            vec![0.3, 0.7],
        )
        .unwrap();
        for c in [
            Criterion::AvgEl,
            Criterion::AvgEs { p: 0.9 },
            Criterion::AvgEs { p: 0.0 },
            Criterion::AvgMaxvar { gamma: 0.3 },
            Criterion::AvgVar { p: 0.8 },
            Criterion::AvgVar { p: 0.9 },
            Criterion::MaxVar { p: 0.8 },
            Criterion::MaxVar { p: 0.0 },
        ] {
            let g = c.s_distortion(sl.weights()).unwrap().unwrap();
            let a = c.value(&sl).unwrap();
            let b = choquet_sdistortion(&sl, &g).unwrap();
            assert!((a - b).abs() <= 1e-12, "{c}: {a} vs {b}");
        }
        assert!(Criterion::AvgPd.s_distortion(&[0.5, 0.5]).unwrap().is_none());
    }

    #[test]
    fn criterion_parse_and_display() {
        for s in ["avg_el", "avg_es:0.9", "avg_maxvar:0.3", "avg_var:0.8", "max_var:0.8", "avg_pd"] {
            let c: Criterion = s.parse().unwrap();
            assert_eq!(c.to_string(), s);
        }
        assert!("avg_es".parse::<Criterion>().is_err());
        assert!("avg_es:1.0".parse::<Criterion>().is_err());
        assert!("avg_maxvar:0".parse::<Criterion>().is_err());
        assert!("bogus".parse::<Criterion>().is_err());
    }

    #[test]
    fn distortion_validation() {
        assert!(DistortionFunction::es_wedge(1.0).is_err());
        assert!(DistortionFunction::maxvar_power(1.5).is_err());
        assert!(DistortionFunction::tabulated(vec![(0.0, 0.0), (0.5, 0.7), (0.6, 0.4), (1.0, 1.0)]).is_err());
        assert!(DistortionFunction::tabulated(vec![(0.0, 0.1), (1.0, 1.0)]).is_err());
        assert!(SDistortionFunction::custom("bad", 2, |x| 1.0 - x[0] * x[1]).is_err());
        assert!(SDistortionFunction::custom("dec", 2, |x| {
            let t = (x[0] + x[1]) / 2.0;
            t + 0.2 * (std::f64::consts::TAU * t).sin()
        }).is_err());
        assert!(SDistortionFunction::custom("prod", 2, |x| x[0] * x[1]).is_ok());
        let sep = SDistortionFunction::separable(vec![(0.5, DistortionFunction::identity()), (0.6, DistortionFunction::identity())]);
        assert!(sep.is_err());
    }

    #[test]
    fn var_indicator_at_zero_is_essinf() {
        let h = DistortionFunction::var_indicator(0.0).unwrap();
        let d = DiscreteLoss::new(vec![(0.2, 0.5), (0.9, 0.5)]).unwrap();
        assert_eq!(choquet_distortion(&d, &h), 0.2);
        assert_eq!(d.quantile_left(0.0).unwrap(), 0.2);
    }

    #[test]
    fn serde_distortion_round_trip() {
        for h in all_families() {
            let s = serde_json::to_string(&h).unwrap();
            let back: DistortionFunction = serde_json::from_str(&s).unwrap();
            assert_eq!(back, h);
        }
        assert!(serde_json::from_str::<DistortionFunction>(r#"{"family":"es_wedge","p":1.2}"#).is_err());
    }
}
