use std::path::PathBuf;

use thiserror::Error;

use crate::config::Violation;
use crate::geometry::Vec2;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", format_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("grid of {m}x{n} points is too small (need at least 2x2)")]
    ExtentTooSmall { m: usize, n: usize },

    #[error("position ({:.3}, {:.3}) lies outside the map", .0.x, .0.y)]
    OutOfExtent(Vec2),

    #[error("3-D distance {0} m is below the 1 m reference distance")]
    DistanceBelowReference(f64),

    #[error("total power must be positive, got {0} mW")]
    NonPositiveTotalPower(f64),

    #[error("degenerate geometry: UT coincides with the BS in the horizontal plane")]
    DegenerateGeometry,

    #[error("step {step} at ({:.3}, {:.3}): {source}", .position.x, .position.y)]
    Step {
        step: usize,
        position: Vec2,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
