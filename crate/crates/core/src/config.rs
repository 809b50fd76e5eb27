//! Numerical margins shared by the whole crate.

/// Default lower bound on `|e^{iq_j} - e^{iq_k}|` for a regular torus element.
pub const DEFAULT_REGULARITY_GAP: f64 = 1e-6;
/// Default lower bound on the smallest eigenvalue of a positive definite matrix.
pub const DEFAULT_PD_FLOOR: f64 = 1e-10;
/// Threshold above which strict subspace membership reports an error.
pub const STRICT_MEMBERSHIP_TOL: f64 = 1e-10;

/// Relative first-derivative step, roughly the cube root of machine epsilon.
pub const FD_REL_STEP: f64 = 6.1e-6;
/// Relative step for the outer derivative in nested (Jacobi) differences.
pub const FD_OUTER_REL_STEP: f64 = 3e-4;
/// Tolerance factor for analytic-vs-finite-difference gradient agreement.
pub const FD_CHECK_TOL: f64 = 5e-6;
/// Tolerance factor for the Jacobi defect.
pub const JACOBI_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub regularity_gap: f64,
    pub pd_floor: f64,
    /// Error (instead of silently projecting) when a value is far from its subspace.
    pub strict_membership: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            regularity_gap: DEFAULT_REGULARITY_GAP,
            pd_floor: DEFAULT_PD_FLOOR,
            strict_membership: false,
        }
    }
}
