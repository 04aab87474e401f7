//! Drift Laplacian of the soliton: Fourier modes, radial Dirichlet problems and
//! the spectral gap of radial functions.
//!
//! In the radial variable the drift Laplacian with potential `f = φ` reads
//!
//! ```text
//! Δ_f u = (4/φ′) u″ + (4(n−1)/φ + 4) u′
//! ```
//!
//! and its weighted measure is `e^φ φ^{n−1} φ′ dt`, which equals `e^{nt} dt`
//! along the profile.

use serde::Serialize;
use thiserror::Error;

use crate::numerics::{gauss_legendre, linear_fit, log_add_exp, solve_tridiagonal, NeumaierSum};
use crate::profile::{derivatives, solve_excess, ConeSpec, Profile, ProfileError, RadialGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("critical exponent: 1 - beta - lambda/(4n) = {gap:e} is within 1e-9 of zero")]
    CriticalExponent { gap: f64 },
    #[error("truncated tail bound {bound:e} exceeds tol * |u(t_max/2)| = {allowed:e}")]
    TailDominates { bound: f64, allowed: f64 },
    #[error("spectrum too short: {0}")]
    SpectrumTooShort(String),
    #[error("discretization lost diagonal dominance at node {index}; refine the grid")]
    SingularSystem { index: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("linear solve residual {residual:e} above tolerance")]
    Residual { residual: f64 },
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Coefficients `(second, first)` of `Δ_f u = second·u″ + first·u′` for a
/// radial profile with values `φ, φ′`.
pub fn drift_coefficients(phi: f64, phi1: f64, n: usize) -> (f64, f64) {
    (4.0 / phi1, 4.0 * (n as f64 - 1.0) / phi + 4.0)
}

/// Right-hand side of a mode equation.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    /// `Q(s) = scale · s^{−exponent}`.
    Power { exponent: f64, scale: f64 },
    /// Values at the grid nodes.
    Samples(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeData {
    pub lambda: f64,
    pub beta: f64,
    /// Constant `C` of the envelope `|Q(s)| ≤ C s^{−β}`.
    pub envelope: f64,
    pub grid: RadialGrid,
    pub forcing: Forcing,
}

impl ModeData {
    /// Validates the data; when `envelope` is omitted it is taken as the smallest
    /// constant consistent with the forcing on the grid.
    pub fn new(
        lambda: f64,
        beta: f64,
        grid: RadialGrid,
        forcing: Forcing,
        envelope: Option<f64>,
    ) -> Result<Self, SpectralError> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(SpectralError::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(SpectralError::InvalidInput(format!("beta must lie in (0, 1), got {beta}")));
        }
        if (grid.t_min - 1.0).abs() > 1e-12 {
            return Err(SpectralError::InvalidInput(format!("mode grids start at t = 1, got {}", grid.t_min)));
        }
        let natural = match &forcing {
            Forcing::Power { exponent, scale } => {
                if !(exponent.is_finite() && scale.is_finite()) {
                    return Err(SpectralError::InvalidInput("power forcing must be finite".into()));
                }
                // on [1, t_max] the bound |Q| ≤ C s^{−β} is tightest at one of the ends
                scale.abs() * grid.t_max.powf(beta - exponent).max(1.0)
            }
            Forcing::Samples(values) => {
                if values.len() != grid.count {
                    return Err(SpectralError::InvalidInput(format!(
                        "forcing has {} samples for {} nodes",
                        values.len(),
                        grid.count
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(SpectralError::InvalidInput("forcing samples must be finite".into()));
                }
                values.iter().zip(&grid.nodes).map(|(q, t)| q.abs() * t.powf(beta)).fold(0.0, f64::max)
            }
        };
        let envelope = match envelope {
            Some(c) if c >= natural * (1.0 - 1e-12) => c,
            Some(c) => {
                return Err(SpectralError::InvalidInput(format!(
                    "declared envelope {c} is below the observed bound {natural}"
                )))
            }
            None => natural,
        };
        Ok(Self { lambda, beta, envelope, grid, forcing })
    }

    pub fn forcing_values(&self) -> Vec<f64> {
        match &self.forcing {
            Forcing::Power { exponent, scale } => self.grid.nodes.iter().map(|t| scale * t.powf(-exponent)).collect(),
            Forcing::Samples(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSolution {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    /// `|4n u′ − (λ/t) u − nQ|` per node.
    pub residual: Vec<f64>,
    pub branch: Branch,
    /// Bound on the part of the improper integral that was not computed, at `t_max/2`.
    pub tail_bound: f64,
    /// `max |u| t^{β−1}` over the grid.
    pub fitted_c: f64,
}

/// Integral of `Q(s) s^{−μ}` over each grid cell.
///
/// Sampled forcing is interpolated by local cubics; the weight `s^{−μ}` is kept
/// exact and the product is integrated by Gauss-Legendre on sub-cells short
/// enough that the weight changes by at most a factor `e^4` across each.
fn cell_integrals(data: &ModeData, mu: f64) -> Vec<f64> {
    let nodes = &data.grid.nodes;
    let m = nodes.len();
    let (xs, ws) = gauss_legendre(8, 0.0, 1.0);
    let forcing_at = |k: usize, s: f64| -> f64 {
        match &data.forcing {
            Forcing::Power { exponent, scale } => scale * s.powf(-exponent),
            Forcing::Samples(values) => {
                if m < 4 {
                    let w = (s - nodes[k]) / (nodes[k + 1] - nodes[k]);
                    return (1.0 - w) * values[k] + w * values[k + 1];
                }
                let first = k.saturating_sub(1).min(m - 4);
                let mut total = 0.0;
                for i in first..first + 4 {
                    let mut basis = 1.0;
                    for j in first..first + 4 {
                        if j != i {
                            basis *= (s - nodes[j]) / (nodes[i] - nodes[j]);
                        }
                    }
                    total += basis * values[i];
                }
                total
            }
        }
    };
    (0..m - 1)
        .map(|k| {
            let (lo, hi) = (nodes[k], nodes[k + 1]);
            let pieces = ((mu * (hi - lo) / lo) / 4.0).ceil().max(1.0) as usize;
            let width = (hi - lo) / pieces as f64;
            let mut sum = NeumaierSum::default();
            for piece in 0..pieces {
                let start = lo + piece as f64 * width;
                for (x, w) in xs.iter().zip(&ws) {
                    let s = start + x * width;
                    sum.add(w * width * forcing_at(k, s) * s.powf(-mu));
                }
            }
            sum.total()
        })
        .collect()
}

/// Solves `4n u′ − (λ/t) u = nQ` on `[1, t_max]` with the growth or decay branch
/// selected by the sign of `1 − β − λ/(4n)`.
pub fn solve_mode(data: &ModeData, spec: &ConeSpec, tol: f64) -> Result<ModeSolution, SpectralError> {
    if !(tol > 0.0) {
        return Err(SpectralError::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let scale = spec.link_spectrum.iter().copied().fold(1.0, f64::max);
    if !spec.link_spectrum.iter().any(|l| (l - data.lambda).abs() <= 1e-12 * scale) {
        return Err(SpectralError::InvalidInput(format!(
            "lambda = {} is not an eigenvalue of the link spectrum",
            data.lambda
        )));
    }
    let n = spec.n as f64;
    let mu = data.lambda / (4.0 * n);
    let gap = 1.0 - data.beta - mu;
    if gap.abs() < 1e-9 {
        return Err(SpectralError::CriticalExponent { gap });
    }
    let branch = if gap > 0.0 { Branch::Forward } else { Branch::Backward };
    let nodes = &data.grid.nodes;
    let m = nodes.len();
    let cells = cell_integrals(data, mu);
    let t_max = data.grid.t_max;

    // integral[k] = ∫_1^{t_k} g (forward) or ∫_{t_k}^∞ g (backward, tail included when exact)
    let mut integral = vec![0.0; m];
    let mut tail_bound = 0.0;
    match branch {
        Branch::Forward => {
            let mut acc = NeumaierSum::default();
            for k in 1..m {
                acc.add(cells[k - 1]);
                integral[k] = acc.total();
            }
        }
        Branch::Backward => {
            let mut acc = NeumaierSum::default();
            if let Forcing::Power { exponent, scale } = data.forcing {
                if scale != 0.0 && exponent + mu <= 1.0 {
                    return Err(SpectralError::InvalidInput(format!(
                        "the decaying solution needs exponent + lambda/(4n) > 1, got {}",
                        exponent + mu
                    )));
                }
                acc.add(scale * t_max.powf(1.0 - exponent - mu) / (exponent + mu - 1.0));
            }
            integral[m - 1] = acc.total();
            for k in (0..m - 1).rev() {
                acc.add(cells[k]);
                integral[k] = acc.total();
            }
        }
    }
    let sign = if branch == Branch::Forward { 0.25 } else { -0.25 };
    let q = data.forcing_values();
    let mut u = Vec::with_capacity(m);
    let mut du = Vec::with_capacity(m);
    let mut residual = Vec::with_capacity(m);
    for k in 0..m {
        let t = nodes[k];
        let uk = sign * t.powf(mu) * integral[k];
        let duk = mu * uk / t + 0.25 * q[k];
        u.push(uk);
        du.push(duk);
        residual.push((4.0 * n * duk - data.lambda / t * uk - n * q[k]).abs());
    }
    for (k, r) in residual.iter().enumerate() {
        if *r > tol * (1.0 + (n * q[k]).abs()) {
            return Err(SpectralError::Residual { residual: *r });
        }
    }
    if branch == Branch::Backward {
        if let Forcing::Samples(_) = data.forcing {
            let mid = nodes.partition_point(|&t| t < 0.5 * t_max).min(m - 1);
            let t_mid = nodes[mid];
            let excess = data.beta + mu - 1.0;
            tail_bound = 0.25 * t_mid.powf(mu) * data.envelope * t_max.powf(-excess) / excess;
            let allowed = tol * u[mid].abs();
            if tail_bound > allowed {
                return Err(SpectralError::TailDominates { bound: tail_bound, allowed });
            }
        }
    }
    let fitted_c = u.iter().zip(nodes).map(|(v, t)| v.abs() * t.powf(data.beta - 1.0)).fold(0.0, f64::max);
    Ok(ModeSolution { t: nodes.clone(), u, du, residual, branch, tail_bound, fitted_c })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondOrderReport {
    /// Max over interior nodes of the second-order equation residual.
    pub max_residual: f64,
    /// Fitted power of `t` in the residual; `None` when it vanishes identically.
    pub decay_exponent: Option<f64>,
}

/// Residual of `4u″ + (4n + 4(n−1)/t) u′ − (λ/t) u − nQ` by centered differences.
pub fn second_order_residual(sol: &ModeSolution, data: &ModeData, spec: &ConeSpec) -> SecondOrderReport {
    let n = spec.n as f64;
    let q = data.forcing_values();
    let t = &sol.t;
    let u = &sol.u;
    let m = t.len();
    let h = data.grid.spacing();
    let mut max_residual = 0.0f64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 1..m.saturating_sub(1) {
        let d1 = (u[k + 1] - u[k - 1]) / (2.0 * h);
        let d2 = (u[k + 1] - 2.0 * u[k] + u[k - 1]) / (h * h);
        let r = 4.0 * d2 + (4.0 * n + 4.0 * (n - 1.0) / t[k]) * d1 - data.lambda / t[k] * u[k] - n * q[k];
        max_residual = max_residual.max(r.abs());
        if t[k] >= 2.0 && r != 0.0 {
            xs.push(t[k].ln());
            ys.push(r.abs().ln());
        }
    }
    let decay_exponent = if xs.len() >= 8 { Some(linear_fit(&xs, &ys).0) } else { None };
    SecondOrderReport { max_residual, decay_exponent }
}

/// Number of link modes to keep so that the discarded ones, weighted by
/// `λ_i^{−k}`, sum below `1e−10`.
///
/// The unseen part of the spectrum is extrapolated with the Weyl-type lower
/// bound `λ_i ≥ C i^{2/(2n−1)}`, where `C` is the largest constant compatible
/// with the supplied eigenvalues.
pub fn weyl_truncation(spec: &ConeSpec, k_target: u32) -> Result<usize, SpectralError> {
    const BUDGET: f64 = 1e-10;
    let spectrum = &spec.link_spectrum;
    let len = spectrum.len();
    if len == 1 {
        return Ok(1);
    }
    let n = spec.n as f64;
    let alpha = 2.0 / (2.0 * n - 1.0);
    let constant = (1..len).map(|i| spectrum[i] / (i as f64).powf(alpha)).fold(f64::INFINITY, f64::min);
    if !(constant > 0.0) {
        return Err(SpectralError::SpectrumTooShort("nonzero eigenvalues must be positive".into()));
    }
    let k = k_target as f64;
    let power = k * alpha;
    if power <= 1.0 {
        return Err(SpectralError::SpectrumTooShort(format!(
            "k = {k_target} is too small for the weighted tail to converge (k * {alpha:.6} <= 1)"
        )));
    }
    let big_n = len as f64;
    let extrapolated = constant.powf(-k) * (big_n.powf(-power) + big_n.powf(1.0 - power) / (power - 1.0));
    if extrapolated >= BUDGET {
        return Err(SpectralError::SpectrumTooShort(format!(
            "{len} eigenvalues leave an extrapolated tail of {extrapolated:e}"
        )));
    }
    let mut tail = extrapolated;
    let mut retained = len;
    for i in (1..len).rev() {
        let next = tail + spectrum[i].powf(-k);
        if next >= BUDGET {
            break;
        }
        tail = next;
        retained = i;
    }
    Ok(retained)
}

/// Solves `Δ_f u = 2F` on `[t_min, R_cut]` with zero slope at `t_min` and
/// `u(R_cut) = 0`; values beyond the cut are zero.
pub fn dirichlet_drift_solve(profile: &Profile, forcing: &[f64], r_cut: f64, tol: f64) -> Result<Vec<f64>, SpectralError> {
    let grid = &profile.grid;
    if forcing.len() != grid.count {
        return Err(SpectralError::InvalidInput(format!(
            "forcing has {} samples for {} nodes",
            forcing.len(),
            grid.count
        )));
    }
    let h = grid.spacing();
    let position = (r_cut - grid.t_min) / h;
    let cut = position.round();
    if !(cut >= 2.0 && cut <= (grid.count - 1) as f64) || (position - cut).abs() > 1e-6 {
        return Err(SpectralError::InvalidInput(format!("R_cut = {r_cut} must be a grid node inside the grid")));
    }
    let cut = cut as usize;
    if forcing[cut..].iter().any(|v| *v != 0.0) {
        return Err(SpectralError::InvalidInput("forcing must vanish from R_cut on".into()));
    }
    let n = profile.spec.n;
    let rows = cut;
    let mut sub = vec![0.0; rows];
    let mut diag = vec![0.0; rows];
    let mut sup = vec![0.0; rows];
    let mut rhs = vec![0.0; rows];
    for k in 0..rows {
        let (second, first) = drift_coefficients(profile.phi[k], profile.phi1[k], n);
        let lower = second / (h * h) - first / (2.0 * h);
        let upper = second / (h * h) + first / (2.0 * h);
        if lower < 0.0 || upper < 0.0 {
            return Err(SpectralError::SingularSystem { index: k });
        }
        diag[k] = -2.0 * second / (h * h);
        if k == 0 {
            sup[k] = 2.0 * second / (h * h);
        } else {
            sub[k] = lower;
            sup[k] = upper;
        }
        rhs[k] = 2.0 * forcing[k];
    }
    sup[rows - 1] = 0.0;
    let solved = solve_tridiagonal(&sub, &diag, &sup, &rhs).ok_or(SpectralError::SingularSystem { index: 0 })?;
    let mut u = vec![0.0; grid.count];
    u[..rows].copy_from_slice(&solved);
    let u_max = solved.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let scale = rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()))
        + diag.iter().fold(0.0f64, |a, b| a.max(b.abs())) * u_max;
    let mut worst = 0.0f64;
    for k in 0..rows {
        let left = if k == 0 { 0.0 } else { sub[k] * u[k - 1] };
        let r = left + diag[k] * u[k] + sup[k] * u[k + 1] - rhs[k];
        worst = worst.max(r.abs() / scale.max(f64::MIN_POSITIVE));
    }
    if worst > tol {
        return Err(SpectralError::Residual { residual: worst });
    }
    Ok(u)
}

/// Symmetric tridiagonal pencil `(A, M)` in diagonal-scaled form (`M_ii = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Pencil {
    pub stiff_diag: Vec<f64>,
    pub stiff_off: Vec<f64>,
    pub mass_diag: Vec<f64>,
    pub mass_off: Vec<f64>,
}

/// Piecewise-linear Galerkin forms of the radial Rayleigh quotient
/// `∫ 4 u′² e^φ φ^{n−1} dt / ∫ u² e^φ φ^{n−1} φ′ dt` with `u = 0` at both ends.
///
/// Element integrals use three Gauss points with `φ` solved there, and every
/// weight is carried in log form so that `e^{nt}` never overflows.
pub fn rayleigh_pencil(profile: &Profile) -> Result<Pencil, SpectralError> {
    let grid = &profile.grid;
    let m = grid.count;
    if m < 3 {
        return Err(SpectralError::InvalidInput("need at least one interior node".into()));
    }
    let spec = &profile.spec;
    let nf = spec.n as f64;
    let (gx, gw) = gauss_legendre(3, 0.0, 1.0);
    let elements = m - 1;
    let mut scale = vec![0.0; elements];
    let mut stiff = vec![0.0; elements];
    let mut mass = vec![[0.0f64; 3]; elements];
    for e in 0..elements {
        let (t0, t1) = (grid.nodes[e], grid.nodes[e + 1]);
        let width = t1 - t0;
        let mut log_p = [0.0; 3];
        let mut log_w = [0.0; 3];
        let mut guess = Some(profile.excess[e]);
        for q in 0..3 {
            let t = t0 + gx[q] * width;
            let root = solve_excess(t, spec, 1e-12, guess)?;
            guess = Some(root.excess);
            let phi = spec.a + root.excess;
            let (phi1, _, _) = derivatives(phi, t, spec)?;
            let base = phi + (nf - 1.0) * phi.ln();
            log_p[q] = 4f64.ln() + base;
            log_w[q] = base + phi1.ln();
        }
        let s = log_p.iter().chain(&log_w).copied().fold(f64::NEG_INFINITY, f64::max);
        scale[e] = s;
        let mut p = 0.0;
        let mut m_local = [0.0; 3];
        for q in 0..3 {
            let w = gw[q] * width;
            let (n0, n1) = (1.0 - gx[q], gx[q]);
            p += w * (log_p[q] - s).exp();
            let weight = w * (log_w[q] - s).exp();
            m_local[0] += weight * n0 * n0;
            m_local[1] += weight * n0 * n1;
            m_local[2] += weight * n1 * n1;
        }
        stiff[e] = p / (width * width);
        mass[e] = m_local;
    }
    let interior = m - 2;
    // node i of the pencil is grid node i + 1, shared by elements i and i + 1
    let log_diag: Vec<f64> = (0..interior)
        .map(|i| log_add_exp(scale[i] + mass[i][2].ln(), scale[i + 1] + mass[i + 1][0].ln()))
        .collect();
    let mut pencil = Pencil {
        stiff_diag: vec![0.0; interior],
        stiff_off: vec![0.0; interior.saturating_sub(1)],
        mass_diag: vec![1.0; interior],
        mass_off: vec![0.0; interior.saturating_sub(1)],
    };
    for i in 0..interior {
        pencil.stiff_diag[i] =
            (scale[i] - log_diag[i]).exp() * stiff[i] + (scale[i + 1] - log_diag[i]).exp() * stiff[i + 1];
        if i + 1 < interior {
            let e = i + 1;
            let factor = (scale[e] - 0.5 * (log_diag[i] + log_diag[i + 1])).exp();
            pencil.stiff_off[i] = -factor * stiff[e];
            pencil.mass_off[i] = factor * mass[e][1];
        }
    }
    Ok(pencil)
}

/// Number of eigenvalues of the pencil below `lambda` (inertia of `A − λM`).
fn count_below(pencil: &Pencil, lambda: f64) -> usize {
    let mut negatives = 0;
    let mut pivot = 0.0;
    for i in 0..pencil.stiff_diag.len() {
        let d = pencil.stiff_diag[i] - lambda * pencil.mass_diag[i];
        pivot = if i == 0 {
            d
        } else {
            let off = pencil.stiff_off[i - 1] - lambda * pencil.mass_off[i - 1];
            d - off * off / pivot
        };
        if pivot == 0.0 {
            pivot = -f64::EPSILON * d.abs().max(f64::MIN_POSITIVE);
        }
        if pivot < 0.0 {
            negatives += 1;
        }
    }
    negatives
}

/// Smallest generalized eigenvalue of the pencil by bisection on the inertia count.
pub fn smallest_pencil_eigenvalue(pencil: &Pencil) -> f64 {
    let mut hi = pencil.stiff_diag.iter().copied().fold(f64::INFINITY, f64::min);
    let mut lo = 0.0;
    hi *= 1.0 + 1e-12;
    while count_below(pencil, hi) == 0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(pencil, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareReport {
    pub beta: f64,
    /// `β(1−β) c/2` with `c = 4n`.
    pub certified_constant: f64,
    /// Hull `[t_lo, t_hi]` of the nodes where the subsolution inequality fails, if any.
    pub exceptional_set: Option<(f64, f64)>,
    /// True when the failing nodes stay away from the outer end of the grid.
    pub subsolution_certified: bool,
    /// Largest `Δ_f w / w + β(1−β)c/2` outside the exceptional set, with `w = e^{−βφ}`.
    pub max_defect_outside: f64,
    /// Smallest discrete Rayleigh quotient.
    pub gap: f64,
}

pub fn poincare_gap(profile: &Profile, beta: f64) -> Result<PoincareReport, SpectralError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SpectralError::InvalidInput(format!("beta must lie in (0, 1), got {beta}")));
    }
    let n = profile.spec.n;
    let certified_constant = beta * (1.0 - beta) * 2.0 * n as f64;
    let slack = 1e-12 * 4.0 * n as f64;
    let mut failing: Option<(usize, usize)> = None;
    let mut max_defect_outside = f64::NEG_INFINITY;
    let mut defects = Vec::with_capacity(profile.grid.count);
    for k in 0..profile.grid.count {
        let (phi, phi1, phi2) = (profile.phi[k], profile.phi1[k], profile.phi2[k]);
        // w = e^{−βφ}: w′/w = −βφ′, w″/w = β²φ′² − βφ″
        let (second, first) = drift_coefficients(phi, phi1, n);
        let ratio = second * (beta * beta * phi1 * phi1 - beta * phi2) + first * (-beta * phi1);
        let defect = ratio + certified_constant;
        defects.push(defect);
        if defect > slack {
            failing = Some(match failing {
                None => (k, k),
                Some((lo, _)) => (lo, k),
            });
        }
    }
    for (k, d) in defects.iter().enumerate() {
        if failing.is_none_or(|(lo, hi)| k < lo || k > hi) {
            max_defect_outside = max_defect_outside.max(*d);
        }
    }
    let last = profile.grid.count - 1;
    let subsolution_certified = failing.is_none_or(|(_, hi)| hi < last);
    let exceptional_set = failing.map(|(lo, hi)| (profile.grid.nodes[lo], profile.grid.nodes[hi]));
    let gap = smallest_pencil_eigenvalue(&rayleigh_pencil(profile)?);
    Ok(PoincareReport {
        beta,
        certified_constant,
        exceptional_set,
        subsolution_certified,
        max_defect_outside,
        gap,
    })
}
