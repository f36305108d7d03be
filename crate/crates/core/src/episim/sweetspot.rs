use serde::{Deserialize, Serialize};

use super::cohort::{run_cohort, CohortParams, CohortTimeSeries};
use super::EpiError;

pub const SWEET_SPOT_RESOLUTION: f64 = 0.001;

/// Number of evenly spaced adoption levels probed for monotonicity.
const MONOTONICITY_SAMPLES: usize = 21;

const WINDOW_TOLERANCE: f64 = 1e-9;

/// Ready-made predicates over a cohort run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Criterion {
    /// Two-day windowed new exposures never rise between consecutive
    /// windows ending at `from_day`, `from_day + 2`, … up to the horizon.
    Contained { from_day: f64 },
    /// Windowed new exposures at the horizon stay at or below `threshold`.
    HorizonWindowBelow { threshold: f64 },
}

impl Default for Criterion {
    fn default() -> Self {
        Criterion::Contained { from_day: 14.0 }
    }
}

impl Criterion {
    pub fn evaluate(&self, series: &CohortTimeSeries) -> bool {
        let horizon = series.params.horizon_days;
        match *self {
            Criterion::Contained { from_day } => {
                let mut windows = Vec::new();
                let mut day = from_day;
                while day <= horizon + WINDOW_TOLERANCE {
                    match series.windowed_new_exposures(day) {
                        Ok(w) => windows.push(w),
                        Err(_) => return false,
                    }
                    day += 2.0;
                }
                windows.windows(2).all(|w| w[1] <= w[0] + WINDOW_TOLERANCE)
            }
            Criterion::HorizonWindowBelow { threshold } => {
                series.windowed_new_exposures(horizon).is_ok_and(|w| w <= threshold)
            }
        }
    }
}

/// Least adoption in `[0, 1]` (to [`SWEET_SPOT_RESOLUTION`]) whose cohort run
/// satisfies `criterion`, found by bisection after checking on a grid that
/// the criterion only ever switches from false to true as adoption rises.
pub fn sweet_spot_search<F>(template: &CohortParams, criterion: F) -> Result<f64, EpiError>
where
    F: Fn(&CohortTimeSeries) -> bool,
{
    let holds = |p: f64| -> Result<bool, EpiError> {
        Ok(criterion(&run_cohort(&CohortParams { adoption: p, ..template.clone() })?))
    };

    let mut satisfied_at: Option<f64> = None;
    for i in 0..MONOTONICITY_SAMPLES {
        let p = i as f64 / (MONOTONICITY_SAMPLES - 1) as f64;
        match (holds(p)?, satisfied_at) {
            (true, None) => satisfied_at = Some(p),
            (false, Some(s)) => return Err(EpiError::CriterionNotMonotone { satisfied_at: s, fails_at: p }),
            _ => {}
        }
    }
    match satisfied_at {
        None => return Err(EpiError::CriterionNeverSatisfied),
        Some(0.0) => return Ok(0.0),
        Some(_) => {}
    }

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > SWEET_SPOT_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuous_criteria() {
        let t = CohortParams::default();
        assert_eq!(sweet_spot_search(&t, |_| true), Ok(0.0));
        assert_eq!(sweet_spot_search(&t, |_| false), Err(EpiError::CriterionNeverSatisfied));
    }

    #[test]
    fn threshold_on_adoption_is_recovered() {
        let t = CohortParams::default();
        let p = sweet_spot_search(&t, |s| s.params.adoption >= 0.437).unwrap();
        assert!(p >= 0.437 && p - 0.437 <= SWEET_SPOT_RESOLUTION, "{p}");
    }

    #[test]
    fn non_monotone_criterion_is_reported() {
        let t = CohortParams::default();
        let err = sweet_spot_search(&t, |s| s.params.adoption < 0.5).unwrap_err();
        assert_eq!(err, EpiError::CriterionNotMonotone { satisfied_at: 0.0, fails_at: 0.5 });
    }
}
