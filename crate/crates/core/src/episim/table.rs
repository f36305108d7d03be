use serde::{Deserialize, Serialize};

use super::cohort::{run_cohort, CohortParams};
use super::{check_unit, EpiError};

pub const TABLE1_ADOPTIONS: [f64; 3] = [0.80, 0.90, 0.95];
pub const TABLE1_DAYS: [f64; 5] = [12.0, 14.0, 16.0, 18.0, 20.0];

/// One (adoption, day) cell of the efficacy table under every candidate
/// metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub adoption: f64,
    pub day: f64,
    /// Exposures caused by the index case up to `day`.
    pub cumulative_exposures: f64,
    /// Exposures across all generations up to `day`.
    pub cumulative_all_generations: f64,
    /// New exposures over `(day − 2, day]`.
    pub windowed_new_exposures: f64,
    pub windowed_isolations: f64,
    /// Windowed new exposures per isolation in the same window; `None` when
    /// nobody isolates in the window.
    pub exposures_per_isolation: Option<f64>,
}

pub fn table1(template: &CohortParams, adoptions: &[f64], days: &[f64]) -> Result<Vec<Table1Row>, EpiError> {
    let mut rows = Vec::with_capacity(adoptions.len() * days.len());
    for &adoption in adoptions {
        check_unit("adoption", adoption)?;
        let series = run_cohort(&CohortParams { adoption, ..template.clone() })?;
        for &day in days {
            let windowed = series.windowed_new_exposures(day)?;
            let isolations = series.windowed_isolations(day)?;
            rows.push(Table1Row {
                adoption,
                day,
                cumulative_exposures: series.first_generation_at(day)?,
                cumulative_all_generations: series.cumulative_at(day)?,
                windowed_new_exposures: windowed,
                windowed_isolations: isolations,
                exposures_per_isolation: (isolations > 0.0).then(|| windowed / isolations),
            });
        }
    }
    Ok(rows)
}
