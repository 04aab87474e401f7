//! Named pass/fail checks of a profile against its structural bounds and
//! large-`t` asymptotics.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{
    charge_identity, curvature_floor_check, hat_frame_decay, metric_difference_leading_constant,
    metric_difference_rate, scalar_curvature, volume_growth, GeometryError,
};
use crate::profile::{expansion_error_exponent, expansion_error_ratios, Profile, ProfileError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerificationError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn within(name: &str, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let passed = value.is_finite() && lower.is_none_or(|l| value >= l) && upper.is_none_or(|u| value <= u);
        Check { name: name.to_string(), value, lower, upper, passed }
    }

    pub fn at_most(name: &str, value: f64, upper: f64) -> Self {
        Self::within(name, value, None, Some(upper))
    }
}

/// Names of the failed checks.
pub fn failed(checks: &[Check]) -> Vec<String> {
    checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect()
}

/// Start of the large-`t` window for the first-order and curvature checks.
pub const ASYMPTOTIC_START: f64 = 100.0;
/// End of the metric-difference rate window.
pub const RATE_WINDOW_END: f64 = 1e4;

fn count(flags: impl Iterator<Item = bool>) -> f64 {
    flags.filter(|bad| *bad).count() as f64
}

/// Largest value of `|defect(k)| / scale(t_k)` over nodes with `t ≥ 100`.
fn worst_ratio(profile: &Profile, defect: impl Fn(usize) -> f64, scale: impl Fn(f64) -> f64) -> f64 {
    profile
        .grid
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, t)| **t >= ASYMPTOTIC_START)
        .map(|(k, &t)| defect(k).abs() / scale(t))
        .fold(0.0, f64::max)
}

/// Runs every profile check. The grid must reach `t = 1000`.
pub fn verify_profile(profile: &Profile, residual_tol: f64) -> Result<Vec<Check>, VerificationError> {
    let n = profile.spec.n as f64;
    let nodes = &profile.grid.nodes;
    let mut checks = vec![
        Check::at_most("phi > a", count(profile.excess.iter().map(|e| !(*e > 0.0))), 0.0),
        Check::at_most(
            "phi strictly increasing",
            count(profile.phi.windows(2).zip(profile.excess.windows(2)).map(|(p, e)| !(p[1] > p[0] || e[1] > e[0]))),
            0.0,
        ),
        Check::at_most("phi1 > 0", count(profile.phi1.iter().map(|d| !(*d > 0.0))), 0.0),
        Check::at_most("phi1 < n", count(profile.phi1.iter().map(|d| !(*d < n))), 0.0),
        Check::at_most("implicit-equation residual", profile.residual_max, residual_tol),
    ];

    let exponent = expansion_error_exponent(profile)?;
    checks.push(Check::within("expansion error exponent", exponent, Some(-2.3), Some(-1.7)));
    let ratios = expansion_error_ratios(profile)?;
    let lo = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    checks.push(Check::at_most("expansion ratio spread", (hi - lo) / (hi + lo), 0.2));

    let first_order = worst_ratio(
        profile,
        |k| nodes[k] * (4.0 * n - 4.0 * profile.phi1[k]) / 4.0 - (n - 1.0),
        |t| 3.0 * t.ln() * t.ln() / t,
    );
    checks.push(Check::at_most("phi1 first-order term", first_order, 1.0));
    let curvature = scalar_curvature(profile);
    let curvature_rate =
        worst_ratio(profile, |k| nodes[k] * curvature[k] - 4.0 * (n - 1.0), |t| 10.0 * t.ln() * t.ln() / t);
    checks.push(Check::at_most("curvature times t", curvature_rate, 1.0));

    let floor = curvature_floor_check(profile, 0.5)?;
    checks.push(Check::at_most("curvature floor threshold", floor.threshold.unwrap_or(f64::INFINITY), ASYMPTOTIC_START));

    let rate = metric_difference_rate(profile, ASYMPTOTIC_START, profile.grid.t_max.min(RATE_WINDOW_END))?;
    checks.push(Check::within(
        "metric difference rate",
        rate.fitted / metric_difference_leading_constant(profile.spec.n),
        Some(0.7),
        Some(1.3),
    ));

    let charge = charge_identity(profile).into_iter().fold(0.0, f64::max);
    checks.push(Check::at_most("charge identity", charge, 1e-12));

    let growth = volume_growth(profile)?;
    checks.push(Check::within("volume growth slope", growth.slope / n, Some(0.95), Some(1.05)));

    let t_end = profile.grid.t_max;
    let mut frame = 0.0f64;
    for k in 0..=2 {
        let reference = hat_frame_decay(t_end, k, profile.spec.n)? * t_end.powi(k as i32 + 1);
        for &t in nodes.iter().filter(|t| **t >= ASYMPTOTIC_START) {
            let scaled = hat_frame_decay(t, k, profile.spec.n)? * t.powi(k as i32 + 1);
            frame = frame.max((scaled / reference - 1.0).abs());
        }
    }
    checks.push(Check::at_most("frame decay orders", frame, 1e-12));
    Ok(checks)
}
