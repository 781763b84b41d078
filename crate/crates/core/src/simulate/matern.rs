use serde::{Deserialize, Serialize};

use super::bessel::bessel_k_scaled;
use crate::error::{Error, Result};

/// Lower bound applied to the Matérn shape and range.
pub const MATERN_PARAM_FLOOR: f64 = 1e-2;

/// Matérn shape `κ` and range `φ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    pub kappa: f64,
    pub phi: f64,
}

impl MaternParams {
    /// Rejects non-positive or non-finite values; raises anything below
    /// [`MATERN_PARAM_FLOOR`] to the floor.
    pub fn new(kappa: f64, phi: f64) -> Result<Self> {
        for (name, v) in [("kappa", kappa), ("phi", phi)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name}: must be finite and positive, got {v}"
                )));
            }
        }
        Ok(Self {
            kappa: kappa.max(MATERN_PARAM_FLOOR),
            phi: phi.max(MATERN_PARAM_FLOOR),
        })
    }
}

/// Matérn correlation with its normalising constant precomputed.
#[derive(Clone, Copy, Debug)]
pub struct Matern {
    params: MaternParams,
    /// `(1−κ)·ln 2 − ln Γ(κ)`
    log_norm: f64,
}

impl Matern {
    pub fn new(params: MaternParams) -> Self {
        let k = params.kappa;
        Self {
            params,
            log_norm: (1.0 - k) * std::f64::consts::LN_2 - libm::lgamma(k),
        }
    }

    pub fn params(&self) -> MaternParams {
        self.params
    }

    /// `ρ(d) = 2^{1−κ} Γ(κ)^{−1} (d/φ)^κ K_κ(d/φ)`, with `ρ(0) = 1`.
    pub fn correlation(&self, dist: f64) -> f64 {
        if dist <= 0.0 {
            return 1.0;
        }
        let x = dist / self.params.phi;
        let k = self.params.kappa;
        let scaled = bessel_k_scaled(k, x).expect("x > 0 and finite order");
        let log_rho = self.log_norm + k * x.ln() + scaled.ln() - x;
        log_rho.exp().min(1.0)
    }
}

/// Matérn correlation at distance `dist`.
pub fn matern(dist: f64, params: MaternParams) -> f64 {
    Matern::new(params).correlation(dist)
}
