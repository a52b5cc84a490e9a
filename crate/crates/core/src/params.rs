use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criticality {
    MassSubcritical,
    MassCritical,
    Intercritical,
    EnergyCritical,
    EnergySupercritical,
}

/// Equation parameters together with the derived scaling quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub d: usize,
    pub sigma: f64,
    pub mu: f64,
    pub s_c: f64,
    pub delta: f64,
    pub criticality: Criticality,
}

impl Params {
    /// Exponent p = 2 sigma + 2 of the potential energy term.
    pub fn power(&self) -> f64 {
        2.0 * self.sigma + 2.0
    }

    /// Scaling exponent alpha = (4 - sigma) / (sigma (d - 1)).
    pub fn alpha(&self) -> f64 {
        (4.0 - self.sigma) / (self.sigma * (self.d as f64 - 1.0))
    }

    pub fn with_mu(&self, mu: f64) -> Params {
        Params { mu, ..*self }
    }
}

pub fn make_params(d: usize, sigma: f64, mu: f64) -> Result<Params> {
    if d < 2 {
        return Err(Error::InvalidParams(format!("dimension {d} < 2")));
    }
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::InvalidParams(format!("sigma = {sigma} must be positive")));
    }
    if !mu.is_finite() {
        return Err(Error::InvalidParams("mu must be finite".into()));
    }
    let df = d as f64;
    if d >= 5 && sigma > 4.0 / (df - 4.0) {
        return Err(Error::InvalidParams(format!(
            "sigma = {sigma} is energy-supercritical for d = {d}"
        )));
    }
    let mass_critical = sigma == 4.0 / df;
    let energy_critical = d >= 5 && sigma == 4.0 / (df - 4.0);
    let (criticality, s_c) = if mass_critical {
        (Criticality::MassCritical, 0.0)
    } else if energy_critical {
        (Criticality::EnergyCritical, 2.0)
    } else {
        let s = df / 2.0 - 2.0 / sigma;
        let c = if s < 0.0 {
            Criticality::MassSubcritical
        } else {
            Criticality::Intercritical
        };
        (c, s)
    };
    Ok(Params { d, sigma, mu, s_c, delta: df * sigma - 4.0, criticality })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        let p = make_params(3, 2.0, 0.0).unwrap();
        assert_eq!(p.criticality, Criticality::Intercritical);
        assert!((p.s_c - 0.5).abs() < 1e-15);
        assert_eq!(p.delta, 2.0);
        let p = make_params(2, 2.0, 1.0).unwrap();
        assert_eq!(p.criticality, Criticality::MassCritical);
        assert_eq!(p.s_c, 0.0);
        let p = make_params(5, 4.0, 0.0).unwrap();
        assert_eq!(p.criticality, Criticality::EnergyCritical);
        assert_eq!(p.s_c, 2.0);
        assert_eq!(make_params(3, 1.0, 0.0).unwrap().criticality, Criticality::MassSubcritical);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(make_params(1, 1.0, 0.0).is_err());
        assert!(make_params(5, 4.5, 0.0).is_err());
        assert!(make_params(3, -1.0, 0.0).is_err());
        assert!(make_params(3, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn alpha_value() {
        let p = make_params(3, 2.0, 0.0).unwrap();
        assert!((p.alpha() - 0.5).abs() < 1e-15);
    }
}
