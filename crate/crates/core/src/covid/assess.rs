use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CovidModel, BACKGROUND, TARGET};
use crate::bn::{most_informative_features, posterior_marginal, BnError, Distribution, EvidenceSet, FeatureRanking};

pub const DEFAULT_TOP_QUESTIONS: usize = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Improving {
    Yes,
    No,
    #[default]
    Unknown,
}

/// What the user has told the app so far.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseInput {
    #[serde(default)]
    pub evidence: EvidenceSet,
    #[serde(default)]
    pub symptom_duration_days: f64,
    #[serde(default)]
    pub improving: Option<Improving>,
}

impl CaseInput {
    pub fn from_evidence(evidence: EvidenceSet) -> Self {
        CaseInput { evidence, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlertPolicy {
    /// Minimum P(mild) + P(severe) for a COVID alert.
    pub alert_threshold: f64,
    /// Minimum P(severe) for a hospitalization alert.
    pub hosp_threshold: f64,
    pub hosp_min_duration_days: f64,
    pub hosp_requires_not_improving: bool,
}

impl Default for AlertPolicy {
    fn default() -> Self {
        AlertPolicy {
            alert_threshold: 0.5,
            hosp_threshold: 0.5,
            hosp_min_duration_days: 7.0,
            hosp_requires_not_improving: true,
        }
    }
}

impl AlertPolicy {
    pub fn validate(&self) -> Result<(), AssessError> {
        for (name, v) in [("alert_threshold", self.alert_threshold), ("hosp_threshold", self.hosp_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(AssessError::InvalidPolicy(format!("{name} = {v} outside [0,1]")));
            }
        }
        if !(self.hosp_min_duration_days >= 0.0) {
            return Err(AssessError::InvalidPolicy(format!(
                "hosp_min_duration_days = {} must be non-negative",
                self.hosp_min_duration_days
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub posterior: Distribution,
    pub p_covid: f64,
    pub covid_alert: bool,
    pub hospitalization_alert: bool,
    pub next_questions: FeatureRanking,
    pub policy: AlertPolicy,
}

#[derive(Debug, Error)]
pub enum AssessError {
    /// The evidence has zero probability under the model, e.g. a positive
    /// test together with no recent contact.
    #[error("contradictory evidence: the observations cannot occur together under this model")]
    Contradiction,
    #[error("invalid case: {0}")]
    InvalidCase(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Inference(BnError),
}

impl From<BnError> for AssessError {
    fn from(e: BnError) -> Self {
        match e {
            BnError::ImpossibleEvidence => AssessError::Contradiction,
            BnError::InvalidEvidence(msg) => AssessError::InvalidCase(msg),
            other => AssessError::Inference(other),
        }
    }
}

/// Posterior over `covid_status`, alert decisions and the most useful
/// questions to ask next.
pub fn assess(
    model: &CovidModel,
    case: &CaseInput,
    policy: &AlertPolicy,
    top_k: usize,
) -> Result<RiskReport, AssessError> {
    policy.validate()?;
    if !(case.symptom_duration_days >= 0.0) || !case.symptom_duration_days.is_finite() {
        return Err(AssessError::InvalidCase(format!(
            "symptom_duration_days = {} must be a non-negative number",
            case.symptom_duration_days
        )));
    }

    let net = model.network();
    let posterior = posterior_marginal(net, &case.evidence, TARGET)?;
    let p_severe = posterior.probability("severe").unwrap_or(0.0);
    let p_covid = (posterior.probability("mild").unwrap_or(0.0) + p_severe).clamp(0.0, 1.0);

    let covid_alert = p_covid >= policy.alert_threshold;
    let not_improving = !policy.hosp_requires_not_improving || case.improving == Some(Improving::No);
    let hospitalization_alert = p_severe >= policy.hosp_threshold
        && case.symptom_duration_days >= policy.hosp_min_duration_days
        && not_improving;

    let candidates: BTreeSet<String> = net
        .ids()
        .filter(|id| *id != TARGET && !case.evidence.contains(id))
        .map(String::from)
        .collect();
    let next_questions = if candidates.is_empty() {
        FeatureRanking::default()
    } else {
        most_informative_features(net, &case.evidence, TARGET, &candidates)?.truncated(top_k)
    };

    Ok(RiskReport { posterior, p_covid, covid_alert, hospitalization_alert, next_questions, policy: *policy })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundShift {
    pub prior: Distribution,
    pub posterior: Distribution,
}

/// Prior versus posterior for the background nodes (sex, age group,
/// obesity) under the given evidence.
pub fn backward_inference_check(
    model: &CovidModel,
    evidence: &EvidenceSet,
) -> Result<BTreeMap<String, BackgroundShift>, AssessError> {
    let net = model.network();
    let empty = EvidenceSet::new();
    let mut out = BTreeMap::new();
    for node in BACKGROUND {
        let prior = posterior_marginal(net, &empty, node)?;
        let posterior = posterior_marginal(net, evidence, node)?;
        out.insert(node.to_string(), BackgroundShift { prior, posterior });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covid::{CONTACT, TEST};

    fn model() -> CovidModel {
        CovidModel::default_model()
    }

    #[test]
    fn positive_test_rules_out_none() {
        let case = CaseInput::from_evidence(EvidenceSet::new().with(TEST, "positive"));
        let report = assess(&model(), &case, &AlertPolicy::default(), 3).unwrap();
        assert!(report.posterior.probability("none").unwrap().abs() < 1e-9);
        assert!((report.p_covid - 1.0).abs() < 1e-9);
        assert!(report.covid_alert);
    }

    #[test]
    fn no_contact_means_no_covid() {
        let case = CaseInput::from_evidence(EvidenceSet::new().with(CONTACT, "no"));
        let policy = AlertPolicy { alert_threshold: 1e-6, ..Default::default() };
        let report = assess(&model(), &case, &policy, 3).unwrap();
        assert!((report.posterior.probability("none").unwrap() - 1.0).abs() < 1e-9);
        assert!(!report.covid_alert);
    }

    #[test]
    fn empty_case_returns_prior_and_questions() {
        let m = model();
        let report = assess(&m, &CaseInput::default(), &AlertPolicy::default(), 3).unwrap();
        let prior = posterior_marginal(m.network(), &EvidenceSet::new(), TARGET).unwrap();
        assert_eq!(report.posterior, prior);
        assert_eq!(report.next_questions.len(), 3);
        assert!(!report.covid_alert);
    }

    #[test]
    fn contradiction_is_reported() {
        let ev = EvidenceSet::new().with(TEST, "positive").with(CONTACT, "no");
        let err = assess(&model(), &CaseInput::from_evidence(ev), &AlertPolicy::default(), 3).unwrap_err();
        assert!(matches!(err, AssessError::Contradiction));
    }

    #[test]
    fn invalid_inputs() {
        let m = model();
        let bad_state = CaseInput::from_evidence(EvidenceSet::new().with("fever", "very"));
        assert!(matches!(assess(&m, &bad_state, &AlertPolicy::default(), 3), Err(AssessError::InvalidCase(_))));
        let bad_duration = CaseInput { symptom_duration_days: -1.0, ..Default::default() };
        assert!(matches!(assess(&m, &bad_duration, &AlertPolicy::default(), 3), Err(AssessError::InvalidCase(_))));
        let bad_policy = AlertPolicy { alert_threshold: 1.5, ..Default::default() };
        assert!(matches!(assess(&m, &CaseInput::default(), &bad_policy, 3), Err(AssessError::InvalidPolicy(_))));
    }

    #[test]
    fn hospitalization_alert_needs_all_three_conditions() {
        let m = model();
        let mut ev = m.all_symptoms_evidence();
        ev.insert(TEST, "positive");
        let policy = AlertPolicy { hosp_threshold: 0.3, ..Default::default() };
        let base = CaseInput { evidence: ev, symptom_duration_days: 8.0, improving: Some(Improving::No) };
        let report = assess(&m, &base, &policy, 0).unwrap();
        assert!(report.posterior.probability("severe").unwrap() >= 0.3);
        assert!(report.hospitalization_alert);

        let short = CaseInput { symptom_duration_days: 3.0, ..base.clone() };
        assert!(!assess(&m, &short, &policy, 0).unwrap().hospitalization_alert);
        let improving = CaseInput { improving: Some(Improving::Yes), ..base.clone() };
        assert!(!assess(&m, &improving, &policy, 0).unwrap().hospitalization_alert);
        let unknown = CaseInput { improving: None, ..base.clone() };
        assert!(!assess(&m, &unknown, &policy, 0).unwrap().hospitalization_alert);
        let lenient = AlertPolicy { hosp_requires_not_improving: false, ..policy };
        assert!(assess(&m, &unknown, &lenient, 0).unwrap().hospitalization_alert);
    }

    #[test]
    fn fully_observed_case_has_no_questions() {
        let m = model();
        let mut ev = m.all_symptoms_evidence();
        for id in m.network().ids() {
            if id != TARGET && !ev.contains(id) {
                let first = m.network().node_by_id(id).unwrap().states[0].clone();
                ev.insert(id, &first);
            }
        }
        let report = assess(&m, &CaseInput::from_evidence(ev), &AlertPolicy::default(), 3).unwrap();
        assert!(report.next_questions.is_empty());
    }

    #[test]
    fn case_input_json_shape() {
        let case: CaseInput = serde_json::from_str(
            r#"{"evidence":{"fever":"present"},"symptom_duration_days":2,"improving":"no"}"#,
        )
        .unwrap();
        assert_eq!(case.evidence.get("fever"), Some("present"));
        assert_eq!(case.improving, Some(Improving::No));
        assert!(serde_json::from_str::<CaseInput>(r#"{"evidance":{}}"#).is_err());
    }
}
