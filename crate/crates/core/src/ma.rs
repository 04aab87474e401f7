//! Radial reduction of the complex Monge-Ampère continuity path
//!
//! ```text
//! log(τ_ψⁿ / τⁿ) + (X/2)·ψ = s F,    s ∈ [0, 1]
//! ```
//!
//! on Cao's soliton. A radial perturbation `τ_ψ = τ + i∂∂̄ψ` replaces the profile
//! by `φ_ψ = φ + 2ψ′` (and `φ′` by `φ′ + 2ψ″`), and `(X/2)·ψ = 2ψ′`, so the
//! equation becomes
//!
//! ```text
//! (n−1) ln(1 + 2ψ′/φ) + ln(1 + 2ψ″/φ′) + 2ψ′ = s F.
//! ```
//!
//! Boundary conditions: zero slope at `t_min`, `ψ = 0` at `t_max`.

use serde::Serialize;
use thiserror::Error;

use crate::energy::{energy_i, energy_j, PotentialPath};
use crate::numerics::{linear_fit, radial_derivatives, solve_tridiagonal};
use crate::profile::Profile;
use crate::spectral::drift_coefficients;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaError {
    #[error("potential is not admissible at node {index} (t = {t})")]
    Inadmissible { index: usize, t: f64 },
    #[error("line search failed: no admissible step above 2^-20 reduces the residual {residual:e}")]
    LineSearchFailed { residual: f64 },
    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("continuity path stuck at s = {s}: step fell below 2^-20")]
    PathStuck { s: f64 },
    #[error("Newton system is singular")]
    SingularJacobian,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("estimate violated: {0}")]
    Violation(String),
    #[error("insufficient far field: {0}")]
    InsufficientFarField(String),
    #[error("decay fit is degenerate: the potential vanishes identically")]
    DegenerateFit,
}

/// Distance required between the right edge of the support and `t_max`.
pub const FAR_FIELD_MARGIN: f64 = 20.0;

/// Monge-Ampère data on a fixed background profile.
#[derive(Debug, Clone, PartialEq)]
pub struct MaProblem {
    pub profile: Profile,
    /// `F` at the grid nodes.
    pub forcing: Vec<f64>,
    /// Declared support `[t_a, t_b]` of `F`.
    pub support: (f64, f64),
    /// Continuity parameter.
    pub s: f64,
}

impl MaProblem {
    pub fn new(profile: Profile, forcing: Vec<f64>, support: (f64, f64)) -> Result<Self, MaError> {
        let grid = &profile.grid;
        let (t_a, t_b) = support;
        if forcing.len() != grid.count {
            return Err(MaError::InvalidProblem(format!(
                "F has {} samples for {} nodes",
                forcing.len(),
                grid.count
            )));
        }
        if grid.count < 8 {
            return Err(MaError::InvalidProblem("need at least 8 grid nodes".into()));
        }
        if !(t_a < t_b && grid.t_min < t_a && t_b < grid.t_max) {
            return Err(MaError::InvalidProblem(format!(
                "support [{t_a}, {t_b}] must lie strictly inside [{}, {}]",
                grid.t_min, grid.t_max
            )));
        }
        if grid.t_max < t_b + FAR_FIELD_MARGIN {
            return Err(MaError::InvalidProblem(format!(
                "t_max must be at least {FAR_FIELD_MARGIN} beyond the support (t_b = {t_b}, t_max = {})",
                grid.t_max
            )));
        }
        for (k, (&t, &f)) in grid.nodes.iter().zip(&forcing).enumerate() {
            if !f.is_finite() {
                return Err(MaError::InvalidProblem(format!("F is not finite at node {k}")));
            }
            if f != 0.0 && (t < t_a || t > t_b) {
                return Err(MaError::InvalidProblem(format!("F is nonzero at node {k} (t = {t}) outside its support")));
            }
        }
        Ok(Self { profile, forcing, support, s: 1.0 })
    }

    /// Smooth bump `A exp(1 − 1/(1 − x²))` on `[t_a, t_b]`, peak value `A` at the midpoint.
    pub fn bump(profile: Profile, amplitude: f64, t_a: f64, t_b: f64) -> Result<Self, MaError> {
        if !(t_a < t_b) {
            return Err(MaError::InvalidProblem(format!("bump support [{t_a}, {t_b}] is empty")));
        }
        let forcing = profile.grid.nodes.iter().map(|&t| bump_value(t, amplitude, t_a, t_b)).collect();
        Self::new(profile, forcing, (t_a, t_b))
    }

    pub fn in_support(&self, t: f64) -> bool {
        t >= self.support.0 && t <= self.support.1
    }

    pub fn forcing_is_zero(&self) -> bool {
        self.forcing.iter().all(|f| *f == 0.0)
    }
}

pub fn bump_value(t: f64, amplitude: f64, t_a: f64, t_b: f64) -> f64 {
    let x = (2.0 * t - t_a - t_b) / (t_b - t_a);
    if x.abs() >= 1.0 {
        0.0
    } else {
        amplitude * (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

/// Radial potential with its discrete derivatives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialPotential {
    pub psi: Vec<f64>,
    pub psi1: Vec<f64>,
    pub psi2: Vec<f64>,
    /// `φ + 2ψ′ > 0` and `φ′ + 2ψ″ > 0` at every node.
    pub admissible: bool,
}

impl RadialPotential {
    pub fn from_values(psi: Vec<f64>, profile: &Profile) -> Self {
        let (psi1, psi2) = radial_derivatives(&psi, profile.grid.spacing());
        let admissible = (0..psi.len()).all(|k| admissible_at(profile, &psi1, &psi2, k));
        Self { psi, psi1, psi2, admissible }
    }

    pub fn zero(profile: &Profile) -> Self {
        Self::from_values(vec![0.0; profile.grid.count], profile)
    }

    pub fn sup(&self) -> f64 {
        self.psi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.psi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.psi.iter().fold(0.0f64, |a, b| a.max(b.abs()))
    }
}

fn admissible_at(profile: &Profile, psi1: &[f64], psi2: &[f64], k: usize) -> bool {
    profile.phi[k] + 2.0 * psi1[k] > 0.0 && profile.phi1[k] + 2.0 * psi2[k] > 0.0
}

/// Coefficients `(second, first)` of the linearized operator `Δ_{τ_ψ} + X/2` at a
/// node where the perturbed profile has values `φ_ψ, φ_ψ′`. It is half of the
/// drift Laplacian of the perturbed profile.
pub fn linearized_coefficients(phi_psi: f64, phi1_psi: f64, n: usize) -> (f64, f64) {
    let (second, first) = drift_coefficients(phi_psi, phi1_psi, n);
    (0.5 * second, 0.5 * first)
}

/// `log(τ_ψⁿ/τⁿ) + (X/2)·ψ` at node `k`, from the derivative values.
pub(crate) fn volume_ratio_log(profile: &Profile, psi1: f64, psi2: f64, k: usize) -> f64 {
    let n = profile.spec.n as f64;
    (n - 1.0) * (2.0 * psi1 / profile.phi[k]).ln_1p() + (2.0 * psi2 / profile.phi1[k]).ln_1p() + 2.0 * psi1
}

/// `log(τ_ψⁿ/τⁿ) + (X/2)·ψ` at every node; fails on inadmissible input.
pub fn volume_ratio_logs(psi: &RadialPotential, profile: &Profile) -> Result<Vec<f64>, MaError> {
    (0..psi.psi.len())
        .map(|k| {
            if admissible_at(profile, &psi.psi1, &psi.psi2, k) {
                Ok(volume_ratio_log(profile, psi.psi1[k], psi.psi2[k], k))
            } else {
                Err(MaError::Inadmissible { index: k, t: profile.grid.nodes[k] })
            }
        })
        .collect()
}

/// Residual of the reduced equation at the interior and Neumann nodes; the last
/// entry is the boundary residual `ψ(t_max)`.
pub fn ma_residual(psi: &RadialPotential, prob: &MaProblem) -> Result<Vec<f64>, MaError> {
    let mut r = volume_ratio_logs(psi, &prob.profile)?;
    let last = r.len() - 1;
    for k in 0..last {
        r[k] -= prob.s * prob.forcing[k];
    }
    r[last] = psi.psi[last];
    Ok(r)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

/// `(Δ_{τ_ψ} + X/2) v` at every node, with the same stencils as the residual.
pub fn apply_linearization(psi: &RadialPotential, profile: &Profile, v: &[f64]) -> Vec<f64> {
    let (d1, d2) = radial_derivatives(v, profile.grid.spacing());
    (0..v.len())
        .map(|k| {
            let (second, first) = linearized_coefficients(
                profile.phi[k] + 2.0 * psi.psi1[k],
                profile.phi1[k] + 2.0 * psi.psi2[k],
                profile.spec.n,
            );
            second * d2[k] + first * d1[k]
        })
        .collect()
}

/// Tridiagonal Jacobian of the residual in the unknowns `ψ_0 … ψ_{m−2}`.
fn jacobian(psi: &RadialPotential, profile: &Profile) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let rows = psi.psi.len() - 1;
    let h = profile.grid.spacing();
    let mut sub = vec![0.0; rows];
    let mut diag = vec![0.0; rows];
    let mut sup = vec![0.0; rows];
    for k in 0..rows {
        let (second, first) = linearized_coefficients(
            profile.phi[k] + 2.0 * psi.psi1[k],
            profile.phi1[k] + 2.0 * psi.psi2[k],
            profile.spec.n,
        );
        diag[k] = -2.0 * second / (h * h);
        if k == 0 {
            sup[k] = 2.0 * second / (h * h);
        } else {
            sub[k] = second / (h * h) - first / (2.0 * h);
            sup[k] = second / (h * h) + first / (2.0 * h);
        }
    }
    sup[rows - 1] = 0.0;
    (sub, diag, sup)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub psi: RadialPotential,
    /// Accepted damping factor.
    pub damping: f64,
    pub residual_max: f64,
}

const MIN_DAMPING: f64 = 1.0 / 1048576.0;

/// One damped Newton step. The full step is halved until the trial potential is
/// admissible and its residual decreases (or drops below `tol/10`).
pub fn newton_step(psi: &RadialPotential, prob: &MaProblem, tol: f64) -> Result<NewtonStep, MaError> {
    let profile = &prob.profile;
    let residual = ma_residual(psi, prob)?;
    let old = max_abs(&residual);
    let (sub, diag, sup) = jacobian(psi, profile);
    let rows = diag.len();
    let rhs: Vec<f64> = residual[..rows].iter().map(|r| -r).collect();
    let mut delta = solve_tridiagonal(&sub, &diag, &sup, &rhs).ok_or(MaError::SingularJacobian)?;
    delta.push(-psi.psi[rows]);
    let mut alpha = 1.0;
    while alpha >= MIN_DAMPING {
        let values: Vec<f64> = psi.psi.iter().zip(&delta).map(|(p, d)| p + alpha * d).collect();
        let trial = RadialPotential::from_values(values, profile);
        if trial.admissible {
            let new = max_abs(&ma_residual(&trial, prob)?);
            if new < (1.0 - 1e-4 * alpha) * old || new <= 0.1 * tol {
                return Ok(NewtonStep { psi: trial, damping: alpha, residual_max: new });
            }
        }
        alpha *= 0.5;
    }
    Err(MaError::LineSearchFailed { residual: old })
}

pub const MAX_NEWTON_ITERATIONS: usize = 30;

/// Newton iteration from `start` until the residual max-norm is at most `tol`.
/// Returns the converged potential and the number of steps taken.
pub fn newton_solve(start: RadialPotential, prob: &MaProblem, tol: f64) -> Result<(RadialPotential, usize, f64), MaError> {
    let mut psi = start;
    let mut residual = max_abs(&ma_residual(&psi, prob)?);
    let mut iterations = 0;
    while residual > tol {
        if iterations == MAX_NEWTON_ITERATIONS {
            return Err(MaError::NoConvergence { iterations, residual });
        }
        let step = newton_step(&psi, prob, tol)?;
        psi = step.psi;
        residual = step.residual_max;
        iterations += 1;
    }
    Ok((psi, iterations, residual))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityStep {
    pub s: f64,
    pub newton_iters: usize,
    pub residual_max: f64,
    pub sup_psi: f64,
    pub inf_psi: f64,
    pub arg_sup_in_support: bool,
    pub arg_inf_in_support: bool,
    pub energy_i: Option<f64>,
    pub energy_j: Option<f64>,
    /// `sup |ψ_s − ψ_{s_prev}|` against the previous accepted step.
    pub step_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityTrace {
    pub steps: Vec<ContinuityStep>,
}

/// Iterations at or below which a continuation step counts as easy.
const EASY_ITERATIONS: usize = 3;

/// Marches `s` from 0 to 1, warm-starting each Newton solve from the previous
/// accepted potential. Failed steps are halved; three easy successes in a row
/// double the step again, never beyond `1/steps`.
pub fn continuity_solve(template: &MaProblem, steps: usize, tol: f64) -> Result<(RadialPotential, ContinuityTrace), MaError> {
    if steps == 0 {
        return Err(MaError::InvalidProblem("steps must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(MaError::InvalidProblem(format!("tolerance must be positive, got {tol}")));
    }
    let mut prob = template.clone();
    let mut psi = RadialPotential::zero(&prob.profile);
    let mut trace = ContinuityTrace { steps: Vec::new() };
    if prob.forcing_is_zero() {
        prob.s = 1.0;
        trace.steps.push(record(&psi, &prob, 1.0, 0, 0.0, 0.0));
        return Ok((psi, trace));
    }
    let max_step = 1.0 / steps as f64;
    let mut step = max_step;
    let mut s = 0.0;
    let mut easy = 0;
    while s < 1.0 {
        let target = if s + step >= 1.0 - 1e-12 { 1.0 } else { s + step };
        prob.s = target;
        match newton_solve(psi.clone(), &prob, tol) {
            Ok((next, iterations, residual)) => {
                let change = next.psi.iter().zip(&psi.psi).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
                trace.steps.push(record(&next, &prob, target, iterations, residual, change));
                psi = next;
                s = target;
                if iterations <= EASY_ITERATIONS {
                    easy += 1;
                    if easy == 3 {
                        step = (2.0 * step).min(max_step);
                        easy = 0;
                    }
                } else {
                    easy = 0;
                }
            }
            Err(_) => {
                step *= 0.5;
                easy = 0;
                if step < MIN_DAMPING {
                    return Err(MaError::PathStuck { s: target });
                }
            }
        }
    }
    Ok((psi, trace))
}

fn record(psi: &RadialPotential, prob: &MaProblem, s: f64, newton_iters: usize, residual_max: f64, step_change: f64) -> ContinuityStep {
    let ext = extrema(psi, prob, tie_tolerance(psi));
    ContinuityStep {
        s,
        newton_iters,
        residual_max,
        sup_psi: ext.sup,
        inf_psi: ext.inf,
        arg_sup_in_support: ext.sup_in_support,
        arg_inf_in_support: ext.inf_in_support,
        energy_i: energy_i(psi, prob).ok(),
        energy_j: energy_j(&PotentialPath::Linear(psi.psi.clone()), prob).ok(),
        step_change,
    }
}

fn tie_tolerance(psi: &RadialPotential) -> f64 {
    1e-9 * psi.sup_norm().max(f64::MIN_POSITIVE)
}

struct Extrema {
    sup: f64,
    inf: f64,
    sup_in_support: bool,
    inf_in_support: bool,
}

/// Extrema of `ψ`; an extremum counts as attained on the support when the
/// support values come within `tie` of it (flat regions produce ties).
fn extrema(psi: &RadialPotential, prob: &MaProblem, tie: f64) -> Extrema {
    let nodes = &prob.profile.grid.nodes;
    let (mut sup_on, mut inf_on) = (f64::NEG_INFINITY, f64::INFINITY);
    for (k, &t) in nodes.iter().enumerate() {
        if prob.in_support(t) {
            sup_on = sup_on.max(psi.psi[k]);
            inf_on = inf_on.min(psi.psi[k]);
        }
    }
    let sup = psi.sup();
    let inf = psi.inf();
    Extrema { sup, inf, sup_in_support: sup_on >= sup - tie, inf_in_support: inf_on <= inf + tie }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExtremumBranch {
    /// Attained on the support of `F`, with the expected sign.
    InSupport,
    /// Not attained on the support, but bounded by zero.
    SignBounded,
    /// `ψ` vanishes to tolerance.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremaReport {
    pub sup: f64,
    pub inf: f64,
    pub sup_branch: ExtremumBranch,
    pub inf_branch: ExtremumBranch,
}

/// Either the supremum is attained on `supp F` and is nonnegative, or it is at
/// most zero; mirrored for the infimum.
pub fn verify_extrema_localization(psi: &RadialPotential, prob: &MaProblem, tol: f64) -> Result<ExtremaReport, MaError> {
    let ext = extrema(psi, prob, tol.max(tie_tolerance(psi)));
    if psi.sup_norm() <= tol {
        return Ok(ExtremaReport {
            sup: ext.sup,
            inf: ext.inf,
            sup_branch: ExtremumBranch::Degenerate,
            inf_branch: ExtremumBranch::Degenerate,
        });
    }
    let sup_branch = if ext.sup_in_support && ext.sup >= -tol {
        ExtremumBranch::InSupport
    } else if ext.sup <= tol {
        ExtremumBranch::SignBounded
    } else {
        return Err(MaError::Violation(format!("sup psi = {:e} > 0 is attained off the support of F", ext.sup)));
    };
    let inf_branch = if ext.inf_in_support && ext.inf <= tol {
        ExtremumBranch::InSupport
    } else if ext.inf >= -tol {
        ExtremumBranch::SignBounded
    } else {
        return Err(MaError::Violation(format!("inf psi = {:e} < 0 is attained off the support of F", ext.inf)));
    };
    Ok(ExtremaReport { sup: ext.sup, inf: ext.inf, sup_branch, inf_branch })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeBoundReport {
    /// `min (φ + 2ψ′) − min φ`; nonnegative when the bound holds.
    pub margin: f64,
    pub min_phi: f64,
    /// `sup |4ψ′| / sup |ψ|^{1/2}`, absent when `ψ ≡ 0`.
    pub gradient_constant: Option<f64>,
}

/// Checks `φ + 2ψ′ ≥ min φ` on the grid and reports the gradient constant.
pub fn verify_radial_derivative_bound(psi: &RadialPotential, prob: &MaProblem, tol: f64) -> Result<DerivativeBoundReport, MaError> {
    let phi = &prob.profile.phi;
    let min_phi = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let min_shifted = phi.iter().zip(&psi.psi1).map(|(p, d)| p + 2.0 * d).fold(f64::INFINITY, f64::min);
    let margin = min_shifted - min_phi;
    if margin < -tol {
        return Err(MaError::Violation(format!("min(phi + 2 psi') falls {:e} below min phi", -margin)));
    }
    let sup = psi.sup_norm();
    let gradient_constant = if sup > 0.0 {
        Some(psi.psi1.iter().fold(0.0f64, |a, d| a.max((4.0 * d).abs())) / sup.sqrt())
    } else {
        None
    };
    Ok(DerivativeBoundReport { margin, min_phi, gradient_constant })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    /// Slope of `log|ψ|` against `−φ` on the far field.
    pub slope: f64,
    pub window: (f64, f64),
    pub nodes: usize,
    /// Max over nodes of `|(Δ_τ + X/2)e^{−φ} + (Δ_τ φ)e^{−φ}| / e^{−φ}`.
    pub barrier_defect: f64,
}

/// Fit window starts this far beyond the support.
const DECAY_WINDOW_START: f64 = 5.0;
/// and stops this far before `t_max`, away from the truncation boundary.
const DECAY_WINDOW_END: f64 = 10.0;

pub fn verify_exponential_decay(psi: &RadialPotential, prob: &MaProblem) -> Result<DecayReport, MaError> {
    let profile = &prob.profile;
    let n = profile.spec.n;
    let (lo, hi) = (prob.support.1 + DECAY_WINDOW_START, profile.grid.t_max - DECAY_WINDOW_END);
    if profile.grid.t_max < prob.support.1 + FAR_FIELD_MARGIN {
        return Err(MaError::InsufficientFarField(format!(
            "grid must extend {FAR_FIELD_MARGIN} beyond the support"
        )));
    }
    if psi.sup_norm() == 0.0 {
        return Err(MaError::DegenerateFit);
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, &t) in profile.grid.nodes.iter().enumerate() {
        if t >= lo && t <= hi && psi.psi[k] != 0.0 {
            xs.push(-profile.phi[k]);
            ys.push(psi.psi[k].abs().ln());
        }
    }
    if xs.len() < 16 {
        return Err(MaError::InsufficientFarField(format!(
            "window [{lo}, {hi}] holds {} usable nodes, need 16",
            xs.len()
        )));
    }
    let slope = linear_fit(&xs, &ys).0;
    let mut barrier_defect = 0.0f64;
    for k in 0..profile.grid.count {
        let (phi, phi1, phi2) = (profile.phi[k], profile.phi1[k], profile.phi2[k]);
        // w = e^{−φ}: w′/w = −φ′, w″/w = φ′² − φ″
        let (second, first) = linearized_coefficients(phi, phi1, n);
        let operator = second * (phi1 * phi1 - phi2) + first * (-phi1);
        let (lap_second, lap_first) = tau_laplacian_coefficients(phi, phi1, n);
        let laplacian_f = lap_second * phi2 + lap_first * phi1;
        barrier_defect = barrier_defect.max((operator + laplacian_f).abs());
    }
    Ok(DecayReport { slope, window: (lo, hi), nodes: xs.len(), barrier_defect })
}

/// Coefficients `(second, first)` of the Laplacian `Δ_τ` on radial functions.
pub fn tau_laplacian_coefficients(phi: f64, phi1: f64, n: usize) -> (f64, f64) {
    (2.0 / phi1, 2.0 * (n as f64 - 1.0) / phi)
}

impl RadialPotential {
    /// CSV rows `t,psi,psi1,psi2,residual`.
    pub fn write_csv<W: std::io::Write>(&self, prob: &MaProblem, mut out: W) -> std::io::Result<()> {
        let residual = ma_residual(self, prob).unwrap_or_else(|_| vec![f64::NAN; self.psi.len()]);
        writeln!(out, "t,psi,psi1,psi2,residual")?;
        for k in 0..self.psi.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                prob.profile.grid.nodes[k], self.psi[k], self.psi1[k], self.psi2[k], residual[k]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{build_profile, ConeSpec, RadialGrid};

    fn small_problem(count: usize, amplitude: f64) -> MaProblem {
        let spec = ConeSpec::trivial_link(2, 0.0).unwrap();
        let grid = RadialGrid::new(0.5, 40.0, count).unwrap();
        let profile = build_profile(&spec, &grid, 1e-12).unwrap();
        MaProblem::bump(profile, amplitude, 4.0, 8.0).unwrap()
    }

    #[test]
    fn jacobian_matches_linearized_operator() {
        let prob = small_problem(128, 0.05);
        let h = prob.profile.grid.spacing();
        let values: Vec<f64> = prob.profile.grid.nodes.iter().map(|t| -0.01 * (-0.2 * t).exp()).collect();
        let psi = RadialPotential::from_values(values, &prob.profile);
        let v: Vec<f64> = prob.profile.grid.nodes.iter().map(|t| (0.3 * t).sin() * (-0.1 * t).exp()).collect();
        let applied = apply_linearization(&psi, &prob.profile, &v);
        let (sub, diag, sup) = jacobian(&psi, &prob.profile);
        let scale = 1.0 / (h * h);
        for k in 0..diag.len() {
            let left = if k == 0 { 0.0 } else { sub[k] * v[k - 1] };
            let product = left + diag[k] * v[k] + sup[k] * v[k + 1];
            // the last row drops the coupling to the Dirichlet node
            let expected = if k == diag.len() - 1 { applied[k] - sup_full(&psi, &prob, k) * v[k + 1] } else { applied[k] };
            assert!((product - expected).abs() <= 1e-10 * scale, "row {k}: {product} vs {expected}");
        }
    }

    fn sup_full(psi: &RadialPotential, prob: &MaProblem, k: usize) -> f64 {
        let h = prob.profile.grid.spacing();
        let (second, first) = linearized_coefficients(
            prob.profile.phi[k] + 2.0 * psi.psi1[k],
            prob.profile.phi1[k] + 2.0 * psi.psi2[k],
            prob.profile.spec.n,
        );
        second / (h * h) + first / (2.0 * h)
    }

    #[test]
    fn zero_residual_gives_zero_step() {
        let mut prob = small_problem(128, 0.05);
        prob.s = 0.0;
        let zero = RadialPotential::zero(&prob.profile);
        assert_eq!(max_abs(&ma_residual(&zero, &prob).unwrap()), 0.0);
        let step = newton_step(&zero, &prob, 1e-12).unwrap();
        assert!(step.psi.psi.iter().all(|p| *p == 0.0));
        assert_eq!(step.residual_max, 0.0);
    }

    #[test]
    fn newton_step_contracts_for_small_forcing() {
        let prob = small_problem(128, 1e-3);
        let zero = RadialPotential::zero(&prob.profile);
        let before = max_abs(&ma_residual(&zero, &prob).unwrap());
        let step = newton_step(&zero, &prob, 1e-14).unwrap();
        assert_eq!(step.damping, 1.0);
        assert!(step.residual_max * 10.0 <= before, "{} vs {before}", step.residual_max);
        assert!(step.psi.admissible);
    }

    #[test]
    fn damping_keeps_iterates_admissible() {
        let prob = small_problem(128, 2.0);
        let mut psi = RadialPotential::zero(&prob.profile);
        for _ in 0..5 {
            match newton_step(&psi, &prob, 1e-10) {
                Ok(step) => {
                    assert!(step.psi.admissible);
                    psi = step.psi;
                }
                Err(MaError::LineSearchFailed { .. }) => break,
                Err(other) => panic!("unexpected error {other}"),
            }
        }
    }

    #[test]
    fn rejects_support_touching_boundary() {
        let spec = ConeSpec::trivial_link(2, 0.0).unwrap();
        let grid = RadialGrid::new(0.5, 40.0, 64).unwrap();
        let profile = build_profile(&spec, &grid, 1e-12).unwrap();
        assert!(matches!(MaProblem::bump(profile.clone(), 0.1, 0.5, 3.0), Err(MaError::InvalidProblem(_))));
        assert!(matches!(MaProblem::bump(profile, 0.1, 5.0, 30.0), Err(MaError::InvalidProblem(_))));
    }

    #[test]
    fn zero_forcing_is_a_single_record() {
        let mut prob = small_problem(64, 0.1);
        prob.forcing.iter_mut().for_each(|f| *f = 0.0);
        let (psi, trace) = continuity_solve(&prob, 10, 1e-10).unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.steps[0].s, 1.0);
        assert_eq!(psi.sup_norm(), 0.0);
    }
}
