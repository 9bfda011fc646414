//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by geometry, dynamics, measure and analysis operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A coordinate vector failed the validity predicate of its chart.
    #[error("point {coords:?} is not valid in chart {chart_id}")]
    InvalidChartPoint { chart_id: usize, coords: Vec<f64> },

    /// The metric matrix was not positive definite (Cholesky failed).
    #[error("metric is singular or not positive definite in chart {chart_id} at {coords:?}")]
    SingularMetric { chart_id: usize, coords: Vec<f64> },

    /// No transition map is registered between the two charts.
    #[error("no transition from chart {from} to chart {to}")]
    NoTransition { from: usize, to: usize },

    /// The point lies outside the domain of the requested transition.
    #[error("point {coords:?} is outside the domain of the transition {from} -> {to}")]
    OutOfDomain {
        from: usize,
        to: usize,
        coords: Vec<f64>,
    },

    /// Integration left the region covered by the atlas.
    #[error("trajectory escaped the atlas in chart {chart_id} at {coords:?}")]
    ChartEscape { chart_id: usize, coords: Vec<f64> },

    /// An operation on the unit tangent bundle received a non-unit velocity.
    #[error("state is not on the unit tangent bundle: |v|_g = {norm}")]
    NotUnitState { norm: f64 },

    /// A rejection sampler found a density value above its declared envelope.
    #[error("sampling envelope violated in chart {chart_id}: density {density} > bound {bound}")]
    EnvelopeViolation {
        chart_id: usize,
        density: f64,
        bound: f64,
    },

    /// The operation needs a compact base manifold.
    #[error("manifold '{name}' has a non-compact base; supply the constant explicitly")]
    NonCompactBase { name: String },

    /// No mixing weight makes the rate estimate positive definite.
    #[error("no feasible mixing weight for constants {constants:?}")]
    InfeasibleConstants { constants: [f64; 4] },

    /// Too few decay points rise above the noise floor to fit a rate.
    #[error("insufficient signal: only {usable} of {total} points exceed 3 sigma")]
    InsufficientSignal { usable: usize, total: usize },

    /// The potential gradient vanishes where the check needs a direction.
    #[error("potential gradient vanishes at {coords:?}")]
    DegenerateGradient { coords: Vec<f64> },

    /// Catch-all for invalid arguments to library calls.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
