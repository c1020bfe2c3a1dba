use thiserror::Error;

use crate::error_frame::Region;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate spline: first derivative vanishes near u = {u:.6}")]
    DegenerateSpline { u: f64 },

    #[error("path curvature {max_kappa:.6} 1/m at s = {s:.1} m reaches the bound {kappa0} 1/m")]
    CurvatureBoundExceeded { max_kappa: f64, s: f64, kappa0: f64 },

    #[error("closest projection is ambiguous: |rho| = {rho:.3} m >= R0 with tied minima at s = {s_a:.3} and s = {s_b:.3}")]
    ProjectionAmbiguous { rho: f64, s_a: f64, s_b: f64 },

    #[error("error dynamics are singular: 1 - kappa*rho = {denominator:e}")]
    SingularDenominator { denominator: f64 },

    #[error("infeasible parameter design: {0}")]
    Infeasible(String),

    #[error("control law for {expected} evaluated in region {actual}")]
    WrongRegion { expected: &'static str, actual: Region },

    #[error("UAV {uav} left the control universe at t = {t:.2} s: rho = {rho:.3} m exceeds R2 = {r2:.3} m (x = {x:.3}, y = {y:.3}, theta = {theta:.4})")]
    OutsideUniverse {
        uav: u32,
        t: f64,
        x: f64,
        y: f64,
        theta: f64,
        rho: f64,
        r2: f64,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Validation failures (bad input) as opposed to runtime aborts.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidParams(_)
                | Error::Infeasible(_)
                | Error::CurvatureBoundExceeded { .. }
                | Error::DegenerateSpline { .. }
        )
    }
}
