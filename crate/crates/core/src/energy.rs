//! Weighted energies `I` and `J` of radial potentials.
//!
//! With `w = e^φ φ^{n−1} φ′` the weighted volume density of the background
//! (per unit `dt`, up to the link factor `κ = link_volume · n/2`), the perturbed
//! density is `w e^{M(ψ)}` with `M(ψ) = log(τ_ψⁿ/τⁿ) + (X/2)·ψ`. Then
//!
//! ```text
//! I(ψ) = −κ ∫ ψ w expm1(M(ψ)) dt
//! J(ψ) = −κ ∫₀¹ ∫ ψ̇_u w expm1(M(ψ_u)) dt du
//! ```
//!
//! Every product is formed in log space and summed with compensation.

use serde::Serialize;
use thiserror::Error;

use crate::ma::{apply_linearization, volume_ratio_logs, MaError, MaProblem, RadialPotential};
use crate::numerics::{gauss_legendre, simpson_weights, NeumaierSum};
use crate::profile::Profile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("integrand is not summable: tail {tail:e} against peak {peak:e}")]
    Divergent { tail: f64, peak: f64 },
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error(transparent)]
    Potential(#[from] MaError),
}

/// Family `ψ_u`, `u ∈ [0, 1]`, starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialPath {
    /// `u ψ`.
    Linear(Vec<f64>),
    /// `u^power ψ` with `power ≥ 1`.
    Reparam { psi: Vec<f64>, power: f64 },
    /// Up to `ψ` and back to zero: `(1 − |1 − 2u|) ψ`.
    Loop(Vec<f64>),
    /// `u ψ + u(1 − u) χ`, leaving the straight line in the direction `χ`.
    Detour { psi: Vec<f64>, chi: Vec<f64> },
}

impl PotentialPath {
    fn len(&self) -> usize {
        match self {
            PotentialPath::Linear(p) | PotentialPath::Loop(p) => p.len(),
            PotentialPath::Reparam { psi, .. } | PotentialPath::Detour { psi, .. } => psi.len(),
        }
    }

    fn validate(&self, count: usize) -> Result<(), EnergyError> {
        if self.len() != count {
            return Err(EnergyError::InvalidPath(format!("path has {} nodes, grid has {count}", self.len())));
        }
        match self {
            PotentialPath::Reparam { power, .. } if !(*power >= 1.0 && power.is_finite()) => {
                Err(EnergyError::InvalidPath(format!("reparametrization power must be >= 1, got {power}")))
            }
            PotentialPath::Detour { chi, .. } if chi.len() != count => {
                Err(EnergyError::InvalidPath("detour direction has the wrong length".into()))
            }
            _ => Ok(()),
        }
    }

    /// Intervals of `u` on which the path is smooth.
    fn pieces(&self) -> Vec<(f64, f64)> {
        match self {
            PotentialPath::Loop(_) => vec![(0.0, 0.5), (0.5, 1.0)],
            _ => vec![(0.0, 1.0)],
        }
    }

    /// `(ψ_u, ∂_u ψ_u)`.
    pub fn at(&self, u: f64) -> (Vec<f64>, Vec<f64>) {
        let scaled = |psi: &[f64], g: f64, dg: f64| -> (Vec<f64>, Vec<f64>) {
            (psi.iter().map(|p| g * p).collect(), psi.iter().map(|p| dg * p).collect())
        };
        match self {
            PotentialPath::Linear(psi) => scaled(psi, u, 1.0),
            PotentialPath::Reparam { psi, power } => scaled(psi, u.powf(*power), power * u.powf(power - 1.0)),
            PotentialPath::Loop(psi) => {
                if u <= 0.5 {
                    scaled(psi, 2.0 * u, 2.0)
                } else {
                    scaled(psi, 2.0 - 2.0 * u, -2.0)
                }
            }
            PotentialPath::Detour { psi, chi } => {
                let value = psi.iter().zip(chi).map(|(p, c)| u * p + u * (1.0 - u) * c).collect();
                let speed = psi.iter().zip(chi).map(|(p, c)| p + (1.0 - 2.0 * u) * c).collect();
                (value, speed)
            }
        }
    }
}

/// Link factor relating radial integrals to integrals over the manifold.
pub fn link_factor(profile: &Profile) -> f64 {
    profile.spec.link_volume * 0.5 * profile.spec.n as f64
}

fn log_density(profile: &Profile) -> Vec<f64> {
    let n = profile.spec.n as f64;
    (0..profile.grid.count)
        .map(|k| profile.phi[k] + (n - 1.0) * profile.phi[k].ln() + profile.phi1[k].ln())
        .collect()
}

/// Signed product `a · b · e^{log_w}` without forming `e^{log_w}` alone.
fn weighted(a: f64, b: f64, log_w: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    (a * b).signum() * (a.abs().ln() + b.abs().ln() + log_w).exp()
}

/// Fraction of the peak integrand allowed on the last tenth of the grid.
const TAIL_FRACTION: f64 = 1e-8;

/// `κ ∫ v · w · (−expm1(M(ψ))) dt` for the potential values `psi`.
fn paired_integral(values: &[f64], direction: &[f64], profile: &Profile, log_w: &[f64], quad: &[f64]) -> Result<(f64, f64), EnergyError> {
    let potential = RadialPotential::from_values(values.to_vec(), profile);
    let ma = volume_ratio_logs(&potential, profile)?;
    let integrand: Vec<f64> = (0..values.len()).map(|k| weighted(direction[k], -ma[k].exp_m1(), log_w[k])).collect();
    check_tail(&integrand)?;
    let sum: NeumaierSum = integrand.iter().zip(quad).map(|(f, c)| f * c).collect();
    let kappa = link_factor(profile);
    Ok((kappa * sum.total(), kappa * sum.magnitude()))
}

fn check_tail(integrand: &[f64]) -> Result<(), EnergyError> {
    let peak = integrand.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let start = integrand.len() - integrand.len() / 10;
    let tail = integrand[start..].iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if !peak.is_finite() || tail > TAIL_FRACTION * peak {
        return Err(EnergyError::Divergent { tail, peak });
    }
    Ok(())
}

fn quadrature(profile: &Profile) -> Vec<f64> {
    simpson_weights(profile.grid.count, profile.grid.spacing())
}

pub fn energy_i(psi: &RadialPotential, prob: &MaProblem) -> Result<f64, EnergyError> {
    let profile = &prob.profile;
    let log_w = log_density(profile);
    Ok(paired_integral(&psi.psi, &psi.psi, profile, &log_w, &quadrature(profile))?.0)
}

/// Path integral with `nodes` Gauss-Legendre points per smooth piece; also
/// returns the summed magnitude of all contributions (a roundoff scale).
fn path_integral(path: &PotentialPath, prob: &MaProblem, nodes: usize, log_w: &[f64], quad: &[f64]) -> Result<(f64, f64), EnergyError> {
    let mut total = NeumaierSum::default();
    let mut magnitude = 0.0;
    for (lo, hi) in path.pieces() {
        let (us, ws) = gauss_legendre(nodes, lo, hi);
        for (u, w) in us.iter().zip(&ws) {
            let (values, speed) = path.at(*u);
            let (value, scale) = paired_integral(&values, &speed, &prob.profile, log_w, quad)?;
            total.add(w * value);
            magnitude += w * scale;
        }
    }
    Ok((total.total(), magnitude))
}

/// Default number of Gauss-Legendre points in the path parameter.
pub const PATH_NODES: usize = 32;

pub fn energy_j(path: &PotentialPath, prob: &MaProblem) -> Result<f64, EnergyError> {
    Ok(energy_j_with_error(path, prob)?.0)
}

/// `J` together with a quadrature error estimate: the gap between the 32- and
/// 16-point rules in `u` plus a roundoff allowance.
pub fn energy_j_with_error(path: &PotentialPath, prob: &MaProblem) -> Result<(f64, f64), EnergyError> {
    let profile = &prob.profile;
    path.validate(profile.grid.count)?;
    let log_w = log_density(profile);
    let quad = quadrature(profile);
    let (fine, magnitude) = path_integral(path, prob, PATH_NODES, &log_w, &quad)?;
    let (coarse, _) = path_integral(path, prob, PATH_NODES / 2, &log_w, &quad)?;
    let roundoff = 64.0 * f64::EPSILON * magnitude;
    Ok((fine, (fine - coarse).abs() + roundoff))
}

/// Largest defect, over Gauss-Legendre samples of `u`, of the identity
///
/// ```text
/// d/du (I − J)(ψ_u) = −∫ ψ_u (Δ_{τ_u} + X/2) ψ̇_u  w e^{M(ψ_u)}
/// ```
///
/// with the left side by central differences of step `fd_step`, normalized by
/// the largest absolute integral on the right.
pub fn first_variation_check(path: &PotentialPath, prob: &MaProblem, fd_step: f64) -> Result<f64, EnergyError> {
    let profile = &prob.profile;
    path.validate(profile.grid.count)?;
    if !(fd_step > 0.0 && fd_step < 0.25) {
        return Err(EnergyError::InvalidPath(format!("finite-difference step must lie in (0, 0.25), got {fd_step}")));
    }
    let log_w = log_density(profile);
    let quad = quadrature(profile);
    let kappa = link_factor(profile);
    let energy_at = |u: f64| -> Result<f64, EnergyError> {
        let (values, _) = path.at(u);
        Ok(paired_integral(&values, &values, profile, &log_w, &quad)?.0)
    };
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for (lo, hi) in path.pieces() {
        let (us, _) = gauss_legendre(PATH_NODES, lo, hi);
        for &u in &us {
            let step = fd_step.min(0.5 * (u - lo)).min(0.5 * (hi - u));
            let d_i = (energy_at(u + step)? - energy_at(u - step)?) / (2.0 * step);
            let (gu, gw) = gauss_legendre(8, u - step, u + step);
            let mut increment = NeumaierSum::default();
            for (v, w) in gu.iter().zip(&gw) {
                let (values, speed) = path.at(*v);
                increment.add(w * paired_integral(&values, &speed, profile, &log_w, &quad)?.0);
            }
            let d_j = increment.total() / (2.0 * step);

            let (values, speed) = path.at(u);
            let potential = RadialPotential::from_values(values, profile);
            let ma = volume_ratio_logs(&potential, profile)?;
            let lin = apply_linearization(&potential, profile, &speed);
            let mut predicted = NeumaierSum::default();
            for k in 0..lin.len() {
                let term = weighted(potential.psi[k], lin[k], log_w[k] + ma[k]) * quad[k];
                predicted.add(term);
            }
            let defect = (d_i - d_j + kappa * predicted.total()).abs();
            worst = worst.max(defect);
            scale = scale.max(kappa * predicted.magnitude());
        }
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// `c_k(f) e^{−f}` with `c_k(f) = ∫₀¹ s^k e^{sf} ds`.
fn scaled_ck(k: u32, f: f64) -> f64 {
    if f < (k as f64 + 1.0).max(1.0) {
        // Σ_j f^j / (j! (k + j + 1))
        let mut sum = 0.0;
        let mut term = 1.0;
        let mut j = 0.0;
        loop {
            let contrib = term / (k as f64 + j + 1.0);
            sum += contrib;
            if contrib < 1e-17 * sum {
                break;
            }
            j += 1.0;
            term *= f / j;
        }
        return sum * (-f).exp();
    }
    let mut d = -(-f).exp_m1() / f;
    for j in 1..=k {
        d = (1.0 - j as f64 * d) / f;
    }
    d
}

/// `c_k(f) = ∫₀¹ s^k e^{sf} ds` for `f > 0`.
pub fn ck_coefficient(k: u32, f: f64) -> f64 {
    scaled_ck(k, f) * f.exp()
}

/// `c_{k−1}(f) − c_k(f) = ∫₀¹ s^{k−1}(1 − s) e^{sf} ds` for `k ≥ 1`.
pub fn ck_difference(k: u32, f: f64) -> f64 {
    assert!(k >= 1, "ck_difference needs k >= 1");
    (scaled_ck(k - 1, f) - scaled_ck(k, f)) * f.exp()
}

/// Smallest value of `(c_{n−1} − c_n)(f) f² e^{−f}` on a uniform sample of `[f_lo, f_hi]`.
pub fn ck_lower_bound_constant(n: u32, f_lo: f64, f_hi: f64, samples: usize) -> f64 {
    (0..samples)
        .map(|i| {
            let f = f_lo + (f_hi - f_lo) * i as f64 / (samples - 1).max(1) as f64;
            (scaled_ck(n - 1, f) - scaled_ck(n, f)) * f * f
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CkEntry {
    pub k: u32,
    pub f: f64,
    pub c_k: f64,
    /// `c_k f e^{−f}`, tending to 1.
    pub ratio: f64,
    /// `(c_{k−1} − c_k) f² e^{−f}`, tending to 1; absent for `k = 0`.
    pub difference_ratio: Option<f64>,
}

pub fn ck_table(n: u32) -> Vec<CkEntry> {
    let mut out = Vec::new();
    for f in [10.0, 50.0, 200.0] {
        for k in 0..=n {
            out.push(CkEntry {
                k,
                f,
                c_k: ck_coefficient(k, f),
                ratio: scaled_ck(k, f) * f,
                difference_ratio: (k >= 1).then(|| (scaled_ck(k - 1, f) - scaled_ck(k, f)) * f * f),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "J_linear")]
    pub j_linear: f64,
    #[serde(rename = "J_reparam")]
    pub j_reparam: f64,
    pub quadrature_error: f64,
    /// `|J_linear − J_reparam|`.
    pub path_gap: f64,
    pub i_minus_j: f64,
    pub first_variation_defect: f64,
    pub ck_table: Vec<CkEntry>,
}

pub const FIRST_VARIATION_STEP: f64 = 1e-3;

/// Energies of `psi` along the straight path and along `u² ψ`.
pub fn energy_report(psi: &RadialPotential, prob: &MaProblem) -> Result<EnergyReport, EnergyError> {
    let i = energy_i(psi, prob)?;
    let (j_linear, err_linear) = energy_j_with_error(&PotentialPath::Linear(psi.psi.clone()), prob)?;
    let reparam = PotentialPath::Reparam { psi: psi.psi.clone(), power: 2.0 };
    let (j_reparam, err_reparam) = energy_j_with_error(&reparam, prob)?;
    let first_variation_defect =
        first_variation_check(&PotentialPath::Linear(psi.psi.clone()), prob, FIRST_VARIATION_STEP)?;
    Ok(EnergyReport {
        i,
        j_linear,
        j_reparam,
        quadrature_error: err_linear + err_reparam,
        path_gap: (j_linear - j_reparam).abs(),
        i_minus_j: i - j_linear,
        first_variation_defect,
        ck_table: ck_table(prob.profile.spec.n as u32),
    })
}
