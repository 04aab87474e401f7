//! Cao's steady gradient Kähler-Ricci soliton on a Calabi-Yau cone, reduced to
//! radial functions of `t`.
//!
//! - [`profile`]: the soliton potential `φ_a(t)` and its asymptotics.
//! - [`geometry`]: curvature, metric difference, charge and volume growth.
//! - [`spectral`]: drift-Laplacian modes, Dirichlet problems and the spectral gap.
//! - [`ma`]: the radial Monge-Ampère continuity path.
//! - [`energy`]: weighted energies along paths of potentials.
//! - [`verification`]: named checks of a profile against its bounds.

pub mod energy;
pub mod geometry;
pub mod ma;
pub mod numerics;
pub mod profile;
pub mod spectral;
pub mod verification;

pub use energy::{
    ck_coefficient, ck_difference, energy_i, energy_j, energy_report, first_variation_check, EnergyError,
    EnergyReport, PotentialPath,
};
pub use geometry::{
    charge_identity, curvature_floor_check, geometry_report, hat_frame_decay, metric_difference, scalar_curvature,
    volume_growth, GeometryError, GeometryReport, MetricSample,
};
pub use ma::{
    continuity_solve, ma_residual, newton_step, verify_exponential_decay, verify_extrema_localization,
    verify_radial_derivative_bound, ContinuityTrace, MaError, MaProblem, RadialPotential,
};
pub use profile::{
    asymptotic_phi, build_profile, derivatives, eval_f, expansion_error_exponent, solve_phi, ConeSpec, Profile,
    ProfileError, RadialGrid,
};
pub use spectral::{
    dirichlet_drift_solve, poincare_gap, second_order_residual, solve_mode, weyl_truncation, Branch, Forcing,
    ModeData, ModeSolution, SpectralError,
};
