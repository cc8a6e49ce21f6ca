//! Spatially correlated LOS/NLOS condition.
//!
//! A correlated Gaussian map is pushed through the standard normal CDF to get
//! a correlated uniform variate `u` at each position; the position is LOS when
//! `u` falls below the scenario's LOS probability at that BS distance.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::config::Scenario;
use crate::error::Result;
use crate::field::{CorrelatedGridMap, FieldKind};
use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LosState {
    #[serde(rename = "LOS")]
    Los,
    #[serde(rename = "NLOS")]
    Nlos,
}

impl LosState {
    pub fn is_los(self) -> bool {
        self == LosState::Los
    }
}

impl fmt::Display for LosState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LosState::Los => "LOS",
            LosState::Nlos => "NLOS",
        })
    }
}

/// LOS probability law for a scenario (3GPP TR 38.901 Table 7.4.2-1 forms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosModel {
    pub scenario: Scenario,
    pub ut_height: f64,
}

impl LosModel {
    pub fn umi() -> Self {
        Self {
            scenario: Scenario::UMi,
            ut_height: 1.5,
        }
    }

    pub fn probability(&self, d_2d: f64) -> f64 {
        match self.scenario {
            Scenario::UMi => {
                if d_2d <= 18.0 {
                    1.0
                } else {
                    let e = (-d_2d / 36.0).exp();
                    (18.0 / d_2d) * (1.0 - e) + e
                }
            }
            Scenario::UMa => {
                if d_2d <= 18.0 {
                    1.0
                } else {
                    let c = if self.ut_height <= 13.0 {
                        0.0
                    } else {
                        ((self.ut_height - 13.0) / 10.0).powf(1.5)
                    };
                    let e = (-d_2d / 63.0).exp();
                    let base = 18.0 / d_2d + e * (1.0 - 18.0 / d_2d);
                    base * (1.0 + c * 1.25 * (d_2d / 100.0).powi(3) * (-d_2d / 150.0).exp())
                }
            }
            Scenario::RMa => {
                if d_2d <= 10.0 {
                    1.0
                } else {
                    (-(d_2d - 10.0) / 1000.0).exp()
                }
            }
        }
    }

    /// LOS decision for a standard-normal variate `z` at BS distance `d_2d`.
    pub fn classify(&self, z: f64, d_2d: f64) -> LosState {
        let p = self.probability(d_2d);
        if p >= 1.0 || standard_normal_cdf(z) < p {
            LosState::Los
        } else {
            LosState::Nlos
        }
    }
}

pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Propagation condition at `position`, read from a Gaussian-unit map.
pub fn assign_los_state(
    gauss_map: &CorrelatedGridMap,
    model: &LosModel,
    bs_position: Vec2,
    position: Vec2,
) -> Result<LosState> {
    debug_assert_eq!(gauss_map.kind, FieldKind::GaussianUnit);
    let z = gauss_map.sample(position)?;
    Ok(model.classify(z, position.distance(bs_position)))
}

/// Binary LOS map evaluated at every grid point (1 = LOS).
#[derive(Debug, Clone, PartialEq)]
pub struct LosStateMap {
    pub underlying: CorrelatedGridMap,
    pub bs_position: Vec2,
}

impl LosStateMap {
    pub fn from_gaussian(
        gauss_map: &CorrelatedGridMap,
        model: &LosModel,
        bs_position: Vec2,
    ) -> Self {
        let g = gauss_map.grid;
        let mut values = Vec::with_capacity(g.len());
        for j in 0..g.height {
            for i in 0..g.width {
                let d = g.point(i, j).distance(bs_position);
                let los = model.classify(gauss_map.value(i, j), d).is_los();
                values.push(if los { 1.0 } else { 0.0 });
            }
        }
        Self {
            underlying: CorrelatedGridMap {
                grid: g,
                values,
                correlation_distance: gauss_map.correlation_distance,
                kind: FieldKind::Binary,
            },
            bs_position,
        }
    }
}
