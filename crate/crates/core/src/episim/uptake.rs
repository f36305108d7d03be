use serde::{Deserialize, Serialize};

use super::{check_unit, EpiError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UptakeInputs {
    /// Share of the whole population that must be running the app.
    pub target_population_uptake: f64,
    pub smartphone_penetration: f64,
    /// Share of installers lost to follow-up.
    pub dropout: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UptakePlan {
    pub inputs: UptakeInputs,
    /// Share of smartphone owners who must install.
    pub owners_fraction: f64,
    /// Share of the whole population who must install.
    pub population_fraction: f64,
    /// Owners fraction if dropout were added on rather than divided out.
    pub additive_owners_fraction: f64,
    pub notes: Vec<String>,
}

pub fn required_install_fraction(u: UptakeInputs) -> Result<UptakePlan, EpiError> {
    check_unit("target_population_uptake", u.target_population_uptake)?;
    if !(u.smartphone_penetration > 0.0 && u.smartphone_penetration <= 1.0) {
        return Err(EpiError::InvalidParams(format!(
            "smartphone_penetration = {} must lie in (0,1]",
            u.smartphone_penetration
        )));
    }
    if !(u.dropout >= 0.0 && u.dropout < 1.0) {
        return Err(EpiError::InvalidParams(format!("dropout = {} must lie in [0,1)", u.dropout)));
    }
    let ceiling = u.smartphone_penetration * (1.0 - u.dropout);
    if u.target_population_uptake > ceiling {
        return Err(EpiError::Infeasible { ceiling, target: u.target_population_uptake });
    }

    let owners_fraction = u.target_population_uptake / ceiling;
    let population_fraction = owners_fraction * u.smartphone_penetration;
    let additive_owners_fraction = u.target_population_uptake / u.smartphone_penetration + u.dropout;
    let mut notes = Vec::new();
    if u.dropout > 0.0 {
        notes.push(format!(
            "dropout is divided out: {:.3} / (1 - {}) = {:.3}; adding it on instead would give {:.3}",
            u.target_population_uptake / u.smartphone_penetration,
            u.dropout,
            owners_fraction,
            additive_owners_fraction
        ));
    }
    Ok(UptakePlan { inputs: u, owners_fraction, population_fraction, additive_owners_fraction, notes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(t: f64, p: f64, d: f64) -> Result<UptakePlan, EpiError> {
        required_install_fraction(UptakeInputs { target_population_uptake: t, smartphone_penetration: p, dropout: d })
    }

    #[test]
    fn full_penetration_no_dropout() {
        let r = plan(0.5, 1.0, 0.0).unwrap();
        assert_eq!(r.owners_fraction, 0.5);
        assert_eq!(r.population_fraction, 0.5);
        assert!(r.notes.is_empty());
    }

    #[test]
    fn dropout_inflates_install_base() {
        let r = plan(0.6, 0.79, 0.06).unwrap();
        assert!((r.owners_fraction - 0.6 / (0.79 * 0.94)).abs() < 1e-15);
        assert!((r.population_fraction - 0.6 / 0.94).abs() < 1e-12);
        assert!((r.additive_owners_fraction - (0.6 / 0.79 + 0.06)).abs() < 1e-15);
        assert_eq!(r.notes.len(), 1);
    }

    #[test]
    fn infeasible_and_invalid() {
        assert!(matches!(plan(0.8, 0.79, 0.0), Err(EpiError::Infeasible { .. })));
        assert!(matches!(plan(0.5, 0.0, 0.0), Err(EpiError::InvalidParams(_))));
        assert!(matches!(plan(0.5, 0.9, 1.0), Err(EpiError::InvalidParams(_))));
        assert!(matches!(plan(-0.1, 0.9, 0.0), Err(EpiError::InvalidParams(_))));
    }
}
