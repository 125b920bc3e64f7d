//! Rating ladders: threshold grids that map a risk value in [0,1] to an
//! ordered category.

use serde::{Deserialize, Serialize};

use crate::choquet::Criterion;
use crate::dist::ScenarioLoss;
use crate::error::{param, Error, Result};

pub const CLO_LABELS: [&str; 17] = [
    "Aaa", "Aa1", "Aa2", "Aa3", "A1", "A2", "A3", "Baa1", "Baa2", "Baa3", "Ba1", "Ba2", "Ba3", "B1",
    "B2", "B3", "Caa",
];

pub const CAT_LABELS: [&str; 4] = ["Baa", "Ba", "B", "Caa"];

const CLO_AVG_EL: [f64; 16] = [
    0.000016, 0.000171, 0.000374, 0.000781, 0.001436, 0.002569, 0.004015, 0.006050, 0.008690,
    0.016775, 0.029040, 0.046255, 0.065230, 0.088660, 0.113905, 0.148775,
];
const CLO_AVG_ES: [f64; 16] = [
    0.000102, 0.001092, 0.002389, 0.004988, 0.009172, 0.016408, 0.025644, 0.038642, 0.055504,
    0.107144, 0.185482, 0.295436, 0.416631, 0.566281, 0.727523, 0.950242,
];
const CLO_AVG_MAXVAR: [f64; 16] = [
    0.000092, 0.000978, 0.002139, 0.004467, 0.008214, 0.014694, 0.022965, 0.034605, 0.049706,
    0.095952, 0.166106, 0.264574, 0.373110, 0.507127, 0.651526, 0.850980,
];
const CLO_AVG_VAR: [f64; 16] = [
    0.000023, 0.000241, 0.000528, 0.001102, 0.002026, 0.003624, 0.005665, 0.008536, 0.012260,
    0.023667, 0.040971, 0.065259, 0.092030, 0.125087, 0.160704, 0.209901,
];
const CLO_MAX_VAR: [f64; 16] = [
    0.000045, 0.000482, 0.001055, 0.002202, 0.004050, 0.007245, 0.011322, 0.017061, 0.024506,
    0.047306, 0.081894, 0.130441, 0.183951, 0.250024, 0.321216, 0.419551,
];
const CLO_AVG_PD: [f64; 16] = [
    0.000101, 0.001082, 0.002366, 0.004940, 0.009084, 0.016251, 0.025398, 0.038270, 0.054970,
    0.106113, 0.183697, 0.292593, 0.412623, 0.560833, 0.720524, 0.941100,
];

const CAT_EL: [f64; 3] = [0.0016, 0.0181, 0.0375];
const CAT_ES: [f64; 3] = [0.0160, 0.1810, 0.3750];
const CAT_MAXVAR: [f64; 3] = [0.0195, 0.2207, 0.4572];
const CAT_PD: [f64; 3] = [0.0064, 0.0724, 0.1500];

/// Names accepted by [`builtin_ladder`].
pub const BUILTIN_LADDERS: [&str; 10] = [
    "clo_avg_el",
    "clo_avg_es",
    "clo_avg_maxvar",
    "clo_avg_var",
    "clo_max_var",
    "clo_avg_pd",
    "cat_el",
    "cat_es",
    "cat_maxvar",
    "cat_pd",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RawLadder {
    name: String,
    labels: Vec<String>,
    uppers: Vec<f64>,
}

/// Labels ordered best to worst; `uppers[k]` is the inclusive upper bound
/// of `labels[k]`, and the last label takes everything above.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLadder", into = "RawLadder")]
pub struct RatingLadder {
    name: String,
    labels: Vec<String>,
    uppers: Vec<f64>,
}

impl TryFrom<RawLadder> for RatingLadder {
    type Error = Error;

    fn try_from(raw: RawLadder) -> Result<Self> {
        RatingLadder::new(raw.name, raw.labels, raw.uppers)
    }
}

impl From<RatingLadder> for RawLadder {
    fn from(l: RatingLadder) -> Self {
        RawLadder {
            name: l.name,
            labels: l.labels,
            uppers: l.uppers,
        }
    }
}

impl RatingLadder {
    pub fn new(name: impl Into<String>, labels: Vec<String>, uppers: Vec<f64>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidLadder("need at least two labels".into()));
        }
        if uppers.len() + 1 != labels.len() {
            return Err(Error::InvalidLadder(format!(
                "{} labels need {} uppers, got {}",
                labels.len(),
                labels.len() - 1,
                uppers.len()
            )));
        }
        if let Some(u) = uppers.iter().find(|u| !(**u > 0.0 && **u < 1.0)) {
            return Err(Error::InvalidLadder(format!("upper {u} not in (0,1)")));
        }
        if uppers.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidLadder("uppers must be strictly increasing".into()));
        }
        Ok(RatingLadder {
            name: name.into(),
            labels,
            uppers,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn uppers(&self) -> &[f64] {
        &self.uppers
    }

    /// Position of `label` in the ladder, 0 being best.
    pub fn rank(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn rate(&self, value: f64) -> Result<&str> {
        if !(0.0..=1.0).contains(&value) {
            return Err(param("value", format!("{value} not in [0,1]")));
        }
        Ok(&self.labels[self.rate_index(value)])
    }

    fn rate_index(&self, value: f64) -> usize {
        self.uppers.partition_point(|&u| u < value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ladder serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidLadder(e.to_string()))
    }
}

/// Label of `value` under `ladder`.
pub fn rate(value: f64, ladder: &RatingLadder) -> Result<&str> {
    ladder.rate(value)
}

pub fn builtin_ladder(name: &str) -> Result<RatingLadder> {
    let (labels, uppers): (&[&str], &[f64]) = match name {
        "clo_avg_el" => (&CLO_LABELS, &CLO_AVG_EL),
        "clo_avg_es" => (&CLO_LABELS, &CLO_AVG_ES),
        "clo_avg_maxvar" => (&CLO_LABELS, &CLO_AVG_MAXVAR),
        "clo_avg_var" => (&CLO_LABELS, &CLO_AVG_VAR),
        "clo_max_var" => (&CLO_LABELS, &CLO_MAX_VAR),
        "clo_avg_pd" => (&CLO_LABELS, &CLO_AVG_PD),
        "cat_el" => (&CAT_LABELS, &CAT_EL),
        "cat_es" => (&CAT_LABELS, &CAT_ES),
        "cat_maxvar" => (&CAT_LABELS, &CAT_MAXVAR),
        "cat_pd" => (&CAT_LABELS, &CAT_PD),
        other => return Err(Error::UnknownLadder(other.to_string())),
    };
    RatingLadder::new(
        name,
        labels.iter().map(|s| s.to_string()).collect(),
        uppers.to_vec(),
    )
}

/// CLO ladder for a criterion family.
pub fn clo_ladder_for(criterion: &Criterion) -> Result<RatingLadder> {
    builtin_ladder(&format!("clo_{}", criterion.family()))
}

/// Rescales every threshold by `crit_value / el_value`.
///
/// A scaled threshold outside (0,1) is an error: clamping it would
/// collapse neighbouring categories.
pub fn calibrate_ladder(el_ladder: &RatingLadder, crit_value: f64, el_value: f64) -> Result<RatingLadder> {
    if !(el_value > 0.0) || !el_value.is_finite() {
        return Err(param("el_value", format!("{el_value} must be positive")));
    }
    if !(crit_value > 0.0) || !crit_value.is_finite() {
        return Err(param("crit_value", format!("{crit_value} must be positive")));
    }
    let ratio = crit_value / el_value;
    let uppers = el_ladder.uppers.iter().map(|u| u * ratio).collect();
    RatingLadder::new(el_ladder.name.clone(), el_ladder.labels.clone(), uppers)
}

/// A risk measure paired with the ladder that turns its value into a label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingCriterion {
    pub measure: Criterion,
    pub ladder: RatingLadder,
}

impl RatingCriterion {
    pub fn new(measure: Criterion, ladder: RatingLadder) -> Result<Self> {
        measure.validate()?;
        Ok(RatingCriterion { measure, ladder })
    }

    pub fn value(&self, sl: &ScenarioLoss) -> Result<f64> {
        self.measure.value(sl)
    }

    pub fn rate(&self, sl: &ScenarioLoss) -> Result<(f64, String)> {
        let v = self.value(sl)?;
        let label = self.ladder.rate(v.clamp(0.0, 1.0))?.to_string();
        Ok((v, label))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_examples() {
        let clo = builtin_ladder("clo_avg_el").unwrap();
        assert_eq!(clo.rate(0.0005).unwrap(), "Aa3");
        assert_eq!(clo.rate(0.0).unwrap(), "Aaa");
        assert_eq!(clo.rate(0.046255).unwrap(), "Ba2");
        assert_eq!(clo.rate(0.0462551).unwrap(), "Ba3");
        assert_eq!(clo.rate(1.0).unwrap(), "Caa");
        let cat = builtin_ladder("cat_el").unwrap();
        assert_eq!(cat.rate(0.025).unwrap(), "B");
        assert!(cat.rate(1.5).is_err());
    }

    #[test]
    fn builtin_examples() {
        let el = builtin_ladder("clo_avg_el").unwrap();
        assert_eq!(&el.uppers()[..3], &[0.000016, 0.000171, 0.000374]);
        assert_eq!(el.labels().len(), 17);
        assert_eq!(builtin_ladder("cat_pd").unwrap().uppers(), &[0.0064, 0.0724, 0.1500]);
        assert_eq!(builtin_ladder("cat_el").unwrap().uppers(), &[0.0016, 0.0181, 0.0375]);
        assert!(matches!(builtin_ladder("nope"), Err(Error::UnknownLadder(_))));
        for name in BUILTIN_LADDERS {
            assert_eq!(builtin_ladder(name).unwrap().name(), name);
        }
    }

    #[test]
    fn calibration_examples() {
        let el = builtin_ladder("cat_el").unwrap();
        assert_eq!(calibrate_ladder(&el, 0.3, 0.3).unwrap().uppers(), el.uppers());
        let pd = calibrate_ladder(&el, 0.10, 0.025).unwrap();
        for (a, b) in pd.uppers().iter().zip([0.0064, 0.0724, 0.1500]) {
            assert!((a - b).abs() < 1e-12);
        }
        let r = calibrate_ladder(&el, 0.3047, 0.025).unwrap();
        for (a, b) in r.uppers().iter().zip([0.0195, 0.2206, 0.4570]) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        assert!(calibrate_ladder(&el, 0.5, 0.01).is_err());
        assert!(calibrate_ladder(&el, 0.5, 0.0).is_err());
    }

    #[test]
    fn ladder_validation() {
        let l = |u: Vec<f64>| RatingLadder::new("t", vec!["A".into(), "B".into(), "C".into()], u);
        assert!(l(vec![0.1, 0.2]).is_ok());
        assert!(l(vec![0.2, 0.1]).is_err());
        assert!(l(vec![0.1, 1.0]).is_err());
        assert!(l(vec![0.1]).is_err());
        assert!(RatingLadder::from_json(r#"{"name":"x","labels":["A","B"],"uppers":[0.0]}"#).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        for name in BUILTIN_LADDERS {
            let l = builtin_ladder(name).unwrap();
            let back = RatingLadder::from_json(&l.to_json()).unwrap();
            assert_eq!(back, l);
            for (a, b) in back.uppers().iter().zip(l.uppers()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
