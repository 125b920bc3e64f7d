//! End-to-end studies: a two-scenario CLO senior tranche across pool sizes,
//! and lognormal CAT bonds pooled across states.

use std::io::{Read, Write};

use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::choquet::Criterion;
use crate::dist::{DiscreteLoss, ScenarioLoss};
use crate::error::{param, Error, Result};
use crate::pooling::{pe_curves, CurveSpec, PoolMode, PoolModel, SimConfig};
use crate::rating::{builtin_ladder, clo_ladder_for, RatingLadder};
use crate::rng::{block_key, substream};

/// Dollar losses are converted to millions and shifted before fitting.
pub const LOSS_SCALE: f64 = 1e-6;
pub const LOSS_SHIFT: f64 = 0.01;

pub const CAT_PD: f64 = 0.10;
pub const CAT_EL: f64 = 0.025;

/// Senior attachment of the CLO tranche.
pub const CLO_ATTACHMENT: f64 = 0.1;

fn std_normal() -> Normal {
    Normal::standard()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LognormalFit {
    pub mu: f64,
    pub sigma: f64,
    pub n: usize,
    /// Additive shift applied to the raw data before fitting.
    pub shift: f64,
    /// Multiplicative rescaling applied to the raw data before fitting.
    pub scale: f64,
}

impl LognormalFit {
    pub fn new(mu: f64, sigma: f64, n: usize) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
            return Err(param("sigma", format!("need finite mu and sigma > 0, got ({mu}, {sigma})")));
        }
        if n < 2 {
            return Err(param("n", "need at least two observations"));
        }
        Ok(LognormalFit {
            mu,
            sigma,
            n,
            shift: 0.0,
            scale: 1.0,
        })
    }

    pub fn quantile(&self, q: f64) -> f64 {
        (self.mu + std_normal().inverse_cdf(q) * self.sigma).exp()
    }

    /// Limited expected value `E[min(L, x)]`.
    pub fn lev(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let n = std_normal();
        let lx = x.ln();
        let (mu, s) = (self.mu, self.sigma);
        (mu + s * s / 2.0).exp() * n.cdf((lx - mu - s * s) / s) + x * (1.0 - n.cdf((lx - mu) / s))
    }

    /// Expected loss of the layer `[attach, detach]`, normalized by its
    /// width.
    pub fn layer_el(&self, attach: f64, detach: f64) -> f64 {
        (self.lev(detach) - self.lev(attach)) / (detach - attach)
    }
}

/// Maximum-likelihood lognormal fit (1/n variance of the logs).
pub fn fit_lognormal(samples: &[f64]) -> Result<LognormalFit> {
    if samples.len() < 2 {
        return Err(Error::DegenerateSample(format!("{} observations", samples.len())));
    }
    if let Some(x) = samples.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(Error::DegenerateSample(format!("non-positive observation {x}")));
    }
    let n = samples.len() as f64;
    let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    let mu = logs.iter().sum::<f64>() / n;
    let sigma = (logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / n).sqrt();
    if !(sigma > 1e-12 * mu.abs().max(1.0)) {
        return Err(Error::DegenerateSample("all observations equal".into()));
    }
    LognormalFit::new(mu, sigma, samples.len())
}

/// Fits `scale * loss + shift`, dropping rows that end up non-positive.
pub fn fit_scaled(losses: &[f64], scale: f64, shift: f64) -> Result<LognormalFit> {
    let kept: Vec<f64> = losses.iter().map(|x| x * scale + shift).filter(|x| *x > 0.0).collect();
    if kept.len() < losses.len() {
        log::warn!("dropped {} non-positive rows before fitting", losses.len() - kept.len());
    }
    let mut fit = fit_lognormal(&kept)?;
    fit.scale = scale;
    fit.shift = shift;
    Ok(fit)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatBondSpec {
    pub state: String,
    pub attach: f64,
    pub detach: f64,
}

impl CatBondSpec {
    pub fn new(state: impl Into<String>, attach: f64, detach: f64) -> Result<Self> {
        if !(attach > 0.0 && attach < detach) || !detach.is_finite() {
            return Err(param("detach", format!("need 0 < attach < detach, got ({attach}, {detach})")));
        }
        Ok(CatBondSpec {
            state: state.into(),
            attach,
            detach,
        })
    }

    /// Normalized payoff loss of an underlying loss `l`.
    pub fn normalized(&self, l: f64) -> f64 {
        ((l - self.attach).max(0.0) / (self.detach - self.attach)).min(1.0)
    }
}

/// Attachment at the `(1 - pd)` quantile; detachment solving
/// `(LEV(D) - LEV(A)) / (D - A) = el` by bracketed bisection.
pub fn calibrate_catbond(state: &str, fit: &LognormalFit, pd: f64, el: f64) -> Result<CatBondSpec> {
    if !(0.0 < el && el < pd && pd < 1.0) {
        return Err(param("el", format!("need 0 < el < pd < 1, got el {el}, pd {pd}")));
    }
    let attach = fit.quantile(1.0 - pd);
    let f = |d: f64| fit.layer_el(attach, d) - el;
    let mut lo = attach * (1.0 + 1e-6);
    let mut hi = attach * 1e3;
    if f(lo) <= 0.0 {
        return Err(Error::NoBracket(format!(
            "layer EL just above attachment is {} <= target {el}",
            f(lo) + el
        )));
    }
    let mut expansions = 0;
    while f(hi) > 0.0 {
        hi *= 10.0;
        expansions += 1;
        if expansions > 60 || !hi.is_finite() {
            return Err(Error::NoBracket(format!("no sign change up to {hi}")));
        }
    }
    while hi - lo > 1e-8 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    CatBondSpec::new(state, attach, 0.5 * (lo + hi))
}

/// Normalized payoff losses on `cfg.paths` draws of stream block `block`.
pub fn catbond_samples(fit: &LognormalFit, spec: &CatBondSpec, cfg: &SimConfig, block: u64) -> Result<Vec<f64>> {
    cfg.validate()?;
    let dist = LogNormal::new(fit.mu, fit.sigma).map_err(|e| param("sigma", e.to_string()))?;
    let key = block_key(cfg.seed, block);
    Ok((0..cfg.paths)
        .into_par_iter()
        .map(|p| spec.normalized(dist.sample(&mut substream(&key, p as u64))))
        .collect())
}

/// Empirical law of the normalized payoff loss.
pub fn catbond_loss(fit: &LognormalFit, spec: &CatBondSpec, cfg: &SimConfig) -> Result<DiscreteLoss> {
    DiscreteLoss::from_samples(&catbond_samples(fit, spec, cfg, 0)?)
}

/// Published per-state figures for lightning losses: sample size, fitted
/// parameters, calibrated layer and the two criterion columns under the
/// headers they were printed with.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceState {
    pub state: &'static str,
    pub n: usize,
    pub mu: f64,
    pub sigma: f64,
    pub attach: f64,
    pub detach: f64,
    pub listed_maxvar_08: f64,
    pub listed_es_09: f64,
}

pub const REFERENCE_STATES: [ReferenceState; 5] = [
    ReferenceState { state: "Kansas", n: 51, mu: -0.69, sigma: 1.03, attach: 1.88, detach: 7.42, listed_maxvar_08: 0.2499, listed_es_09: 0.3047 },
    ReferenceState { state: "Michigan", n: 51, mu: -0.51, sigma: 1.48, attach: 4.03, detach: 24.89, listed_maxvar_08: 0.2496, listed_es_09: 0.3092 },
    ReferenceState { state: "Indiana", n: 51, mu: -1.02, sigma: 1.67, attach: 3.07, detach: 22.44, listed_maxvar_08: 0.2499, listed_es_09: 0.3109 },
    ReferenceState { state: "Minnesota", n: 50, mu: -1.26, sigma: 1.60, attach: 2.21, detach: 15.17, listed_maxvar_08: 0.2498, listed_es_09: 0.3103 },
    ReferenceState { state: "Kentucky", n: 47, mu: -2.04, sigma: 1.65, attach: 1.07, detach: 7.65, listed_maxvar_08: 0.2500, listed_es_09: 0.3107 },
];

impl ReferenceState {
    pub fn fit(&self) -> LognormalFit {
        LognormalFit {
            mu: self.mu,
            sigma: self.sigma,
            n: self.n,
            shift: LOSS_SHIFT,
            scale: LOSS_SCALE,
        }
    }
}

/// Fits of the reference states in their pooling order.
pub fn reference_fits() -> Vec<(String, LognormalFit)> {
    REFERENCE_STATES.iter().map(|s| (s.state.to_string(), s.fit())).collect()
}

/// The four CAT criteria with their ladders.
pub fn cat_criteria() -> Vec<(&'static str, Criterion, RatingLadder)> {
    let ladder = |n: &str| builtin_ladder(n).expect("builtin ladder");
    vec![
        ("el", Criterion::AvgEl, ladder("cat_el")),
        ("es:0.9", Criterion::AvgEs { p: 0.9 }, ladder("cat_es")),
        ("maxvar:0.8", Criterion::AvgMaxvar { gamma: 0.8 }, ladder("cat_maxvar")),
        ("pd", Criterion::AvgPd, ladder("cat_pd")),
    ]
}

/// Normalized CAT losses for several states on shared path indices: path
/// p of state i is always the same draw, so adding a state keeps the
/// earlier ones fixed.
#[derive(Clone, Debug)]
pub struct CatPool {
    pub specs: Vec<CatBondSpec>,
    paths: usize,
    losses: Vec<Vec<f64>>,
}

impl CatPool {
    pub fn simulate(fits: &[(String, LognormalFit)], cfg: &SimConfig) -> Result<Self> {
        if fits.is_empty() {
            return Err(param("states", "need at least one state"));
        }
        let specs = fits
            .iter()
            .map(|(s, f)| calibrate_catbond(s, f, CAT_PD, CAT_EL))
            .collect::<Result<Vec<_>>>()?;
        let losses = fits
            .iter()
            .zip(&specs)
            .enumerate()
            .map(|(i, ((_, f), spec))| catbond_samples(f, spec, cfg, i as u64))
            .collect::<Result<Vec<_>>>()?;
        Ok(CatPool {
            specs,
            paths: cfg.paths,
            losses,
        })
    }

    pub fn states(&self) -> usize {
        self.losses.len()
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    /// Law of the average of the first `m` states over a path range.
    pub fn pooled(&self, m: usize, paths: std::ops::Range<usize>) -> Result<DiscreteLoss> {
        if m == 0 || m > self.states() {
            return Err(param("m", format!("{m} not in 1..={}", self.states())));
        }
        let n = m as f64;
        let avg: Vec<f64> = paths
            .map(|p| self.losses[..m].iter().map(|l| l[p]).sum::<f64>() / n)
            .collect();
        DiscreteLoss::from_samples(&avg)
    }

    pub fn value(&self, m: usize, c: &Criterion, paths: std::ops::Range<usize>) -> Result<f64> {
        c.value(&ScenarioLoss::single(self.pooled(m, paths)?))
    }

    /// Criterion values on `batches` consecutive path blocks.
    pub fn batch_values(&self, m: usize, c: &Criterion, batches: usize) -> Result<Vec<f64>> {
        let b = batches.min(self.paths).max(1);
        (0..b)
            .into_par_iter()
            .map(|i| self.value(m, c, i * self.paths / b..(i + 1) * self.paths / b))
            .collect()
    }
}

/// Standard error of the mean of batch values.
pub fn batch_means_se(xs: &[f64]) -> Option<f64> {
    let b = xs.len();
    if b < 2 {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / b as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    Some((var / b as f64).sqrt())
}

/// One output line: pool size, criterion, value and rating.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyRow {
    pub key: usize,
    pub criterion: String,
    pub value: f64,
    pub se: Option<f64>,
    pub step_se: Option<f64>,
    pub rating: String,
}

/// CAT pooling study over `m = 1..=fits.len()` states in the given order.
pub fn cat_study(fits: &[(String, LognormalFit)], cfg: &SimConfig) -> Result<Vec<StudyRow>> {
    let pool = CatPool::simulate(fits, cfg)?;
    cat_study_on(&pool, cfg)
}

pub fn cat_study_on(pool: &CatPool, cfg: &SimConfig) -> Result<Vec<StudyRow>> {
    let criteria = cat_criteria();
    let mut rows = Vec::new();
    let mut prev_batches: Vec<Option<Vec<f64>>> = vec![None; criteria.len()];
    for m in 1..=pool.states() {
        let laws = pool.pooled(m, 0..pool.paths())?;
        let sl = ScenarioLoss::single(laws);
        for (ci, (name, c, ladder)) in criteria.iter().enumerate() {
            let value = c.value(&sl)?;
            let batches = pool.batch_values(m, c, cfg.batches)?;
            let step_se = prev_batches[ci].as_ref().and_then(|prev| {
                let diffs: Vec<f64> = batches.iter().zip(prev).map(|(a, b)| a - b).collect();
                batch_means_se(&diffs)
            });
            rows.push(StudyRow {
                key: m,
                criterion: name.to_string(),
                value,
                se: batch_means_se(&batches),
                step_se,
                rating: ladder.rate(value.clamp(0.0, 1.0))?.to_string(),
            });
            prev_batches[ci] = Some(batches);
        }
    }
    Ok(rows)
}

/// The six CLO criteria: Average EL, Average ES(0.9), Average MAXVAR(0.3),
/// Average VaR(0.8), Max VaR(0.8), Average PD.
pub fn clo_criteria() -> Vec<Criterion> {
    vec![
        Criterion::AvgEl,
        Criterion::AvgEs { p: 0.9 },
        Criterion::AvgMaxvar { gamma: 0.3 },
        Criterion::AvgVar { p: 0.8 },
        Criterion::MaxVar { p: 0.8 },
        Criterion::AvgPd,
    ]
}

/// CLO senior tranche (attachment 0.1) across pool sizes `1..=ell_max`.
pub fn clo_study(cfg: &SimConfig, ell_max: usize) -> Result<Vec<StudyRow>> {
    let criteria = clo_criteria();
    let ladders = criteria.iter().map(clo_ladder_for).collect::<Result<Vec<_>>>()?;
    let specs: Vec<CurveSpec<'_>> = criteria
        .iter()
        .zip(&ladders)
        .map(|(c, l)| CurveSpec {
            measure: c,
            ladder: Some(l),
        })
        .collect();
    let curves = pe_curves(&specs, &PoolModel::clo(), ell_max, CLO_ATTACHMENT, cfg, PoolMode::Mc)?;
    let mut rows = Vec::with_capacity(ell_max * criteria.len());
    for ell in 0..ell_max {
        for (c, curve) in criteria.iter().zip(&curves) {
            let p = &curve[ell];
            rows.push(StudyRow {
                key: p.ell,
                criterion: c.to_string(),
                value: p.value,
                se: p.se,
                step_se: p.step_se,
                rating: p.label.clone().unwrap_or_default(),
            });
        }
    }
    Ok(rows)
}

/// Writes `key,criterion,value,rating`.
pub fn write_rows_csv<W: Write>(rows: &[StudyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Input(e.to_string());
    w.write_record(["key", "criterion", "value", "rating"]).map_err(io)?;
    for r in rows {
        w.write_record([r.key.to_string(), r.criterion.clone(), r.value.to_string(), r.rating.clone()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Input(e.to_string()))
}

#[derive(Debug, Deserialize)]
struct LossRecord {
    state: String,
    loss: f64,
}

/// Dollar losses per state, states in order of first appearance.
pub fn read_loss_csv<R: Read>(input: R) -> Result<Vec<(String, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| Error::Input(e.to_string()))?.clone();
    for col in ["state", "year", "loss"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Input(format!("missing `{col}` column")));
        }
    }
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for (line, rec) in reader.deserialize::<LossRecord>().enumerate() {
        let rec = rec.map_err(|e| Error::Input(format!("row {}: {e}", line + 2)))?;
        match out.iter_mut().find(|(s, _)| *s == rec.state) {
            Some((_, v)) => v.push(rec.loss),
            None => out.push((rec.state, vec![rec.loss])),
        }
    }
    if out.is_empty() {
        return Err(Error::Input("no data rows".into()));
    }
    Ok(out)
}

/// Fits each listed state from ingested data, in the given order.
pub fn fit_states(data: &[(String, Vec<f64>)], order: &[String]) -> Result<Vec<(String, LognormalFit)>> {
    order
        .iter()
        .map(|state| {
            let (_, losses) = data
                .iter()
                .find(|(s, _)| s == state)
                .ok_or_else(|| Error::Input(format!("state `{state}` not in data")))?;
            Ok((state.clone(), fit_scaled(losses, LOSS_SCALE, LOSS_SHIFT)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mle_example() {
        let e = std::f64::consts::E;
        let f = fit_lognormal(&[1.0, e, e * e]).unwrap();
        assert!((f.mu - 1.0).abs() < 1e-12);
        assert!((f.sigma - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(matches!(fit_lognormal(&[2.0, 2.0, 2.0]), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn mle_recovers_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = LogNormal::<f64>::new(-0.69, 1.03).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| d.sample(&mut rng)).collect();
        let f = fit_lognormal(&xs).unwrap();
        assert!((f.mu + 0.69).abs() < 0.03 && (f.sigma - 1.03).abs() < 0.03, "{f:?}");
    }

    #[test]
    fn kansas_layer() {
        let fit = REFERENCE_STATES[0].fit();
        let spec = calibrate_catbond("Kansas", &fit, CAT_PD, CAT_EL).unwrap();
        assert!((spec.attach - 1.878).abs() < 1e-3, "{}", spec.attach);
        assert!((spec.detach / 7.42 - 1.0).abs() < 0.05, "{}", spec.detach);
        assert!((fit.layer_el(spec.attach, spec.detach) - CAT_EL).abs() < 1e-9);
    }

    #[test]
    fn thin_layer_when_el_approaches_pd() {
        let fit = REFERENCE_STATES[0].fit();
        let spec = calibrate_catbond("Kansas", &fit, 0.10, 0.0999).unwrap();
        assert!(spec.detach / spec.attach - 1.0 < 0.01);
    }

    #[test]
    fn lev_matches_monte_carlo() {
        let fit = LognormalFit::new(-0.5, 0.8, 10).unwrap();
        let d = LogNormal::<f64>::new(-0.5, 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 400_000;
        let mc = (0..n).map(|_| d.sample(&mut rng).min(1.3)).sum::<f64>() / n as f64;
        assert!((fit.lev(1.3) - mc).abs() < 3e-3);
    }

    #[test]
    fn catbond_identities() {
        let fit = REFERENCE_STATES[0].fit();
        let spec = calibrate_catbond("Kansas", &fit, CAT_PD, CAT_EL).unwrap();
        let n = 200_000;
        let d = catbond_loss(&fit, &spec, &SimConfig::with_paths(n, 5)).unwrap();
        let se_el = (d.variance() / n as f64).sqrt();
        assert!((d.mean() - CAT_EL).abs() < 3.0 * se_el);
        let pd = d.survival(0.0);
        assert!((pd - CAT_PD).abs() < 3.0 * (CAT_PD * (1.0 - CAT_PD) / n as f64).sqrt());
        assert_eq!(d.quantile_left(0.999).unwrap(), 1.0);
    }

    #[test]
    fn criterion_values_of_a_calibrated_layer() {
        // With PD fixed at 0.1 the top decile is exactly the loss region, so
        // ES(0.9) = EL / 0.1; the power distortion with exponent 0.3 gives
        // the 0.30-0.31 range.
        let fit = REFERENCE_STATES[0].fit();
        let spec = calibrate_catbond("Kansas", &fit, CAT_PD, CAT_EL).unwrap();
        let d = ScenarioLoss::single(catbond_loss(&fit, &spec, &SimConfig::with_paths(400_000, 8)).unwrap());
        let es = Criterion::AvgEs { p: 0.9 }.value(&d).unwrap();
        assert!((es - 0.25).abs() < 0.005, "{es}");
        let mv = Criterion::AvgMaxvar { gamma: 0.3 }.value(&d).unwrap();
        assert!((mv - 0.3047).abs() < 0.005, "{mv}");
        let mv8 = Criterion::AvgMaxvar { gamma: 0.8 }.value(&d).unwrap();
        assert!(mv8 < 0.1, "{mv8}");
    }

    #[test]
    fn scale_equivariance() {
        let fit = REFERENCE_STATES[1].fit();
        let c: f64 = 3.5;
        let scaled = LognormalFit { mu: fit.mu + c.ln(), ..fit };
        let a = calibrate_catbond("s", &fit, CAT_PD, CAT_EL).unwrap();
        let b = calibrate_catbond("s", &scaled, CAT_PD, CAT_EL).unwrap();
        assert!((b.attach / a.attach - c).abs() < 1e-9);
        assert!((b.detach / a.detach - c).abs() < 1e-6);
    }

    #[test]
    fn pooled_el_is_average_of_state_els() {
        let cfg = SimConfig::with_paths(5000, 2);
        let pool = CatPool::simulate(&reference_fits()[..3], &cfg).unwrap();
        let per: Vec<f64> = (0..3).map(|i| pool.losses[i].iter().sum::<f64>() / 5000.0).collect();
        let pooled = pool.pooled(3, 0..5000).unwrap().mean();
        assert!((pooled - per.iter().sum::<f64>() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn csv_ingest() {
        let text = "state,year,loss\nKansas,2001,1500000\nKansas,2002,-20000\nOhio,2001,30\nKansas,2003,800000\n";
        let data = read_loss_csv(text.as_bytes()).unwrap();
        assert_eq!(data[0].0, "Kansas");
        assert_eq!(data[0].1.len(), 3);
        let fits = fit_states(&data, &["Kansas".to_string()]).unwrap();
        assert_eq!(fits[0].1.n, 2);
        assert!(read_loss_csv("state,loss\nA,1\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_output() {
        let rows = vec![StudyRow {
            key: 1,
            criterion: "avg_es:0.9".into(),
            value: 0.25,
            se: None,
            step_se: None,
            rating: "B".into(),
        }];
        let mut buf = Vec::new();
        write_rows_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "key,criterion,value,rating\n1,avg_es:0.9,0.25,B\n");
    }
}
