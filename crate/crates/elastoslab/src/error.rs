use std::fmt;

use thiserror::Error;

use crate::grid::Face;

/// Measured a priori quantities at the moment a threshold was crossed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriStatus {
    pub jk_dev: f64,
    pub ak_dev: f64,
    /// Minimum of -grad q . N over the RT faces; +inf when no face is RT.
    pub rt_margin: f64,
    pub ok: bool,
}

impl fmt::Display for AprioriStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "max|J-1| = {:.3e}, max|A-I| = {:.3e}, rt margin = {:.3e}",
            self.jk_dev, self.ak_dev, self.rt_margin
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("mollifier support {kappa} is below the resolvable floor {floor}")]
    KernelUnresolved { kappa: f64, floor: f64 },
    #[error("mollifier radius {0} must lie in (0, 1/4)")]
    InvalidKappa(f64),
    #[error("flow map is singular: min det = {min_det:.3e}")]
    SingularMap { min_det: f64 },
    #[error("coefficient matrix fails the eigenvalue floor: min eigenvalue = {min_eig:.3e}")]
    NotSpd { min_eig: f64 },
    #[error("elliptic solve did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("initial deformation recipe violates its constraints: residual {0:.3e}")]
    InvalidRecipe(f64),
    #[error("stability condition fails on the {face} face (rt margin {rt_margin:.4e}, nc margin {nc_margin:.4e})")]
    StabilityViolation {
        face: Face,
        rt_margin: f64,
        nc_margin: f64,
    },
    #[error("a priori regime left: {0}")]
    AprioriViolation(AprioriStatus),
    #[error("step rejected at stage {stage}: {status}")]
    StepRejected { stage: usize, status: AprioriStatus },
    #[error("time step {dt:.3e} exceeds the CFL bound {bound:.3e}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("all minors fall below delta^2/3 at face node {node}")]
    DegenerateMinor { node: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
