//! Default pass/fail thresholds, kept in one place so the CLI and the
//! acceptance suite agree.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Final PDE residual of a generated solution.
    pub pde_residual: f64,
    /// Zero-curvature residual of an assembled connection.
    pub flatness: f64,
    /// Numerical E⁻¹dE against the assembled connection.
    pub log_derivative: f64,
    /// Reality condition at sampled λ.
    pub reality: f64,
    /// Projection defect of updated projections.
    pub projection: f64,
    pub birkhoff_reconstruction: f64,
    pub birkhoff_idempotence: f64,
    pub goursat_initial_data: f64,
    pub goursat_residual: f64,
    pub goursat_spectrum: f64,
    pub goursat_cross_validation: f64,
    pub isospectral: f64,
    pub harmonic_residual: f64,
    pub gram: f64,
    pub cartan: f64,
    pub spectrum: f64,
    /// Minimum observed order under grid halving.
    pub convergence_order: f64,
    /// Randomized algebraic property checks.
    pub property: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pde_residual: 1e-5,
            flatness: 1e-5,
            log_derivative: 1e-5,
            reality: 1e-8,
            projection: 1e-10,
            birkhoff_reconstruction: 1e-8,
            birkhoff_idempotence: 1e-10,
            goursat_initial_data: 1e-6,
            goursat_residual: 1e-4,
            goursat_spectrum: 1e-6,
            goursat_cross_validation: 1e-3,
            isospectral: 1e-6,
            harmonic_residual: 1e-5,
            gram: 1e-6,
            cartan: 1e-8,
            spectrum: 1e-6,
            convergence_order: 1.8,
            property: 1e-10,
        }
    }
}

impl Tolerances {
    /// Multiply every residual bound by `s`; the convergence order is left alone.
    pub fn scaled(&self, s: f64) -> Self {
        let mut t = self.clone();
        for f in [
            &mut t.pde_residual,
            &mut t.flatness,
            &mut t.log_derivative,
            &mut t.reality,
            &mut t.projection,
            &mut t.birkhoff_reconstruction,
            &mut t.birkhoff_idempotence,
            &mut t.goursat_initial_data,
            &mut t.goursat_residual,
            &mut t.goursat_spectrum,
            &mut t.goursat_cross_validation,
            &mut t.isospectral,
            &mut t.harmonic_residual,
            &mut t.gram,
            &mut t.cartan,
            &mut t.spectrum,
            &mut t.property,
        ] {
            *f *= s;
        }
        t
    }

    pub fn is_valid(&self) -> bool {
        let s = serde_json::to_value(self).expect("plain struct");
        s.as_object().is_some_and(|m| m.values().all(|v| v.as_f64().is_some_and(|x| x.is_finite() && x > 0.0)))
    }
}
