//! Cao's steady soliton profile `φ_a(t)` on a Calabi-Yau cone.
//!
//! The profile is defined implicitly by `F(φ)e^φ = e^{nt}/n + F(a)e^a` with
//! `F(s) = Σ_k (−1)^{n−k−1} (n−1)!/k! s^k`. Since `(F(s)e^s)′ = s^{n−1}e^s`,
//! the equation is equivalent to
//!
//! ```text
//! ∫_a^φ s^{n−1} e^s ds = e^{nt}/n
//! ```
//!
//! and the root is found for the excess `δ = φ − a` in logarithmic
//! coordinates. The integral is expanded as a series of positive terms, so
//! `δ` keeps full relative precision even when it is far below `a·ε`.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::numerics::{linear_fit, log_sum_exp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("complex dimension n must be at least 2 (got {0})")]
    Dimension(usize),
    #[error("soliton parameter a must be finite and a >= 0 (got {0})")]
    Parameter(f64),
    #[error("link spectrum must contain the eigenvalue 0 exactly once, as its first entry")]
    ZeroMode,
    #[error("link spectrum must be finite, nonnegative and sorted")]
    Unsorted,
    #[error("first nonzero link eigenvalue {found} is below the floor {floor}")]
    EigenvalueFloor { found: f64, floor: f64 },
    #[error("link volume must be positive and finite (got {0})")]
    Volume(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 3 nodes (got {0})")]
    Count(usize),
    #[error("grid bounds must be finite with t_min < t_max (got [{0}, {1}])")]
    Bounds(f64, f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("root not bracketed at t = {t}")]
    NoBracket { t: f64 },
    #[error("root-finder did not reach tolerance at t = {t} (residual {residual:e})")]
    NoConvergence { t: f64, residual: f64 },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("insufficient range: {0}")]
    InsufficientRange(String),
    #[error("tolerance must be positive (got {0})")]
    Tolerance(f64),
    #[error("node {index}: {source}")]
    AtNode {
        index: usize,
        #[source]
        source: Box<ProfileError>,
    },
}

/// Discrete data of the cone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeSpec {
    pub n: usize,
    pub a: f64,
    pub link_spectrum: Vec<f64>,
    pub link_volume: f64,
}

impl ConeSpec {
    pub fn new(n: usize, a: f64, link_spectrum: Vec<f64>, link_volume: f64) -> Result<Self, SpecError> {
        if n < 2 {
            return Err(SpecError::Dimension(n));
        }
        if !a.is_finite() || a < 0.0 {
            return Err(SpecError::Parameter(a));
        }
        if !(link_volume.is_finite() && link_volume > 0.0) {
            return Err(SpecError::Volume(link_volume));
        }
        if link_spectrum.first() != Some(&0.0) {
            return Err(SpecError::ZeroMode);
        }
        if link_spectrum.iter().any(|v| !v.is_finite() || *v < 0.0) || link_spectrum.windows(2).any(|w| w[1] < w[0]) {
            return Err(SpecError::Unsorted);
        }
        if link_spectrum.iter().skip(1).any(|v| *v == 0.0) {
            return Err(SpecError::ZeroMode);
        }
        if let Some(&first) = link_spectrum.get(1) {
            let floor = Self::eigenvalue_floor(n);
            if first < floor {
                return Err(SpecError::EigenvalueFloor { found: first, floor });
            }
        }
        Ok(Self { n, a, link_spectrum, link_volume })
    }

    /// Cone with only the constant mode on the link and unit link volume.
    pub fn trivial_link(n: usize, a: f64) -> Result<Self, SpecError> {
        Self::new(n, a, vec![0.0], 1.0)
    }

    /// Lower bound for the first nonzero basic eigenvalue of a Ricci-flat cone link.
    pub fn eigenvalue_floor(n: usize) -> f64 {
        let n = n as f64;
        if n <= 2.0 {
            8.0
        } else {
            2.0 * n * (1.0 + 1.0 / (2.0 * n - 3.0))
        }
    }
}

/// Uniform grid in the radial variable `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
    #[serde(skip)]
    pub nodes: Vec<f64>,
}

impl RadialGrid {
    pub fn new(t_min: f64, t_max: f64, count: usize) -> Result<Self, GridError> {
        if count < 3 {
            return Err(GridError::Count(count));
        }
        if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
            return Err(GridError::Bounds(t_min, t_max));
        }
        let h = (t_max - t_min) / (count - 1) as f64;
        let mut nodes: Vec<f64> = (0..count).map(|k| t_min + k as f64 * h).collect();
        nodes[count - 1] = t_max;
        Ok(Self { t_min, t_max, count, nodes })
    }

    pub fn spacing(&self) -> f64 {
        (self.t_max - self.t_min) / (self.count - 1) as f64
    }

    /// Grid over the same interval with `2(count − 1) + 1` nodes, containing every old node.
    pub fn refined(&self) -> Self {
        Self::new(self.t_min, self.t_max, 2 * self.count - 1).expect("refinement of a valid grid")
    }
}

/// `F(s)` by Horner's scheme.
pub fn eval_f(s: f64, n: usize) -> f64 {
    assert!(n >= 2, "eval_f needs n >= 2");
    // coefficients c_{n-1} = 1, c_k = -(k+1) c_{k+1}
    let mut coeff = 1.0;
    let mut acc = 1.0;
    for k in (0..n - 1).rev() {
        coeff *= -((k + 1) as f64);
        acc = acc * s + coeff;
    }
    acc
}

/// Excess above which the closed form `F(φ)e^φ − F(a)e^a` is used instead of the series.
const SERIES_LIMIT: f64 = 40.0;

/// `ln ∫_a^{a+δ} s^{n−1} e^s ds`, for `a ≥ 0` and `δ = e^{log_excess}`.
pub fn log_weight_integral(a: f64, log_excess: f64, n: usize) -> f64 {
    let excess = log_excess.exp();
    if excess > SERIES_LIMIT {
        let phi = a + excess;
        let f_phi = eval_f(phi, n);
        if f_phi > 0.0 {
            let ratio = eval_f(a, n) / f_phi * (a - phi).exp();
            return phi + f_phi.ln() + (-ratio).ln_1p();
        }
    }
    // ∫_0^δ (a+u)^{n−1} e^{a+u} du = e^a Σ_m C(n−1,m) a^{n−1−m} ∫_0^δ u^m e^u du
    let mut terms = Vec::with_capacity(n);
    let mut log_binom = 0.0;
    for m in 0..n {
        if m > 0 {
            log_binom += ((n - m) as f64).ln() - (m as f64).ln();
        }
        let power = (n - 1 - m) as f64;
        let log_a_part = if power == 0.0 {
            0.0
        } else if a == 0.0 {
            continue;
        } else {
            power * a.ln()
        };
        terms.push(log_binom + log_a_part + log_moment(m, log_excess, excess));
    }
    a + log_sum_exp(&terms)
}

/// `ln ∫_0^δ u^m e^u du = (m+1) ln δ + ln Σ_j δ^j / (j! (m+1+j))`.
fn log_moment(m: usize, log_excess: f64, excess: f64) -> f64 {
    let base = (m + 1) as f64;
    let mut sum = 1.0 / base;
    let mut term = 1.0;
    let mut j = 1.0;
    loop {
        term *= excess / j;
        let contrib = term / (base + j);
        sum += contrib;
        if contrib <= 1e-17 * sum && j > excess {
            break;
        }
        j += 1.0;
    }
    base * log_excess + sum.ln()
}

/// Result of one implicit-equation solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    /// `φ − a`.
    pub excess: f64,
    /// `|ln(lhs) − ln(rhs)|`, the relative residual of the implicit equation.
    pub residual: f64,
}

/// Solves the implicit equation for `δ = φ(t) − a`, optionally warm-started.
pub fn solve_excess(t: f64, spec: &ConeSpec, tol: f64, guess: Option<f64>) -> Result<Root, ProfileError> {
    if !(tol > 0.0) {
        return Err(ProfileError::Tolerance(tol));
    }
    let n = spec.n;
    let nf = n as f64;
    let a = spec.a;
    let target = nf * t - nf.ln();
    if !target.is_finite() {
        return Err(ProfileError::NoBracket { t });
    }
    let g = |x: f64| log_weight_integral(a, x, n) - target;

    // Upper end: ∫_a^{a+X} s^{n-1}e^s ≥ ∫_0^X s^{n-1}e^s ≥ e^{nt}/n for X = n·max(t,1) + n.
    let mut hi = (nf * t.max(1.0) + nf).ln();
    let g_hi = g(hi);
    if !(g_hi > 0.0) {
        return Err(ProfileError::NoBracket { t });
    }
    // Lower end from the leading small-δ behaviour of the integral, pushed down until negative.
    let leading = if a > 0.0 { target - (nf - 1.0) * a.ln() - a } else { (target + nf.ln()) / nf };
    let mut lo = leading.min(hi) - 1.0;
    let mut step = 1.0;
    let mut g_lo = g(lo);
    let mut expansions = 0;
    while !(g_lo < 0.0) {
        if expansions > 60 || !g_lo.is_finite() {
            return Err(ProfileError::NoBracket { t });
        }
        hi = lo;
        step *= 2.0;
        lo -= step;
        g_lo = g(lo);
        expansions += 1;
    }

    let mut x = match guess {
        Some(d) if d > 0.0 && d.is_finite() => d.ln().clamp(lo, hi),
        _ => leading.clamp(lo, hi),
    };
    let floor = 4.0 * f64::EPSILON * target.abs().max(1.0);
    let mut best = (f64::INFINITY, x);
    for _ in 0..200 {
        let gx = g(x);
        if gx.abs() < best.0 {
            best = (gx.abs(), x);
        }
        if gx.abs() <= floor {
            break;
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            break;
        }
        // d/dx ln G = δ · φ^{n−1} e^φ / G
        let phi = a + x.exp();
        let slope = (x + (nf - 1.0) * phi.ln() + phi - (gx + target)).exp();
        let newton = x - gx / slope;
        x = if newton.is_finite() && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    let (residual, x) = best;
    // tolerances below the rounding of the target itself cannot be met
    if residual > tol.max(2.0 * floor) {
        return Err(ProfileError::NoConvergence { t, residual });
    }
    Ok(Root { excess: x.exp(), residual })
}

/// `φ(t)` for the cone `spec`.
pub fn solve_phi(t: f64, spec: &ConeSpec, tol: f64) -> Result<f64, ProfileError> {
    solve_excess(t, spec, tol, None).map(|r| spec.a + r.excess)
}

/// `(φ′, φ″, φ‴)` from the closed forms implied by `φ^{n−1}φ′e^φ = e^{nt}`.
pub fn derivatives(phi: f64, t: f64, spec: &ConeSpec) -> Result<(f64, f64, f64), ProfileError> {
    if !(phi > 0.0 && phi.is_finite()) || phi < spec.a {
        return Err(ProfileError::DomainError(format!("need phi > 0 and phi >= a, got phi = {phi}")));
    }
    let n = spec.n as f64;
    let phi1 = (n * t - phi - (n - 1.0) * phi.ln()).exp();
    let factor = n - phi1 - (n - 1.0) * phi1 / phi;
    let phi2 = phi1 * factor;
    let ratio = phi1 / phi;
    let phi3 = phi2 * factor - phi1 * (phi2 + (n - 1.0) * (phi2 / phi - ratio * ratio));
    Ok((phi1, phi2, phi3))
}

/// Sampled soliton profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub spec: ConeSpec,
    pub grid: RadialGrid,
    pub phi: Vec<f64>,
    /// `φ − a`, carried separately because it can sit far below `ε·a`.
    pub excess: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub phi3: Vec<f64>,
    pub residual: Vec<f64>,
    pub residual_max: f64,
}

/// Builds the profile node by node, warm-starting from the previous node.
pub fn build_profile(spec: &ConeSpec, grid: &RadialGrid, tol: f64) -> Result<Profile, ProfileError> {
    let m = grid.count;
    let mut profile = Profile {
        spec: spec.clone(),
        grid: grid.clone(),
        phi: Vec::with_capacity(m),
        excess: Vec::with_capacity(m),
        phi1: Vec::with_capacity(m),
        phi2: Vec::with_capacity(m),
        phi3: Vec::with_capacity(m),
        residual: Vec::with_capacity(m),
        residual_max: 0.0,
    };
    let h = grid.spacing();
    let mut guess: Option<f64> = None;
    for (index, &t) in grid.nodes.iter().enumerate() {
        let at = |e: ProfileError| ProfileError::AtNode { index, source: Box::new(e) };
        let root = solve_excess(t, spec, tol, guess).map_err(at)?;
        let phi = spec.a + root.excess;
        let (p1, p2, p3) = derivatives(phi, t, spec).map_err(at)?;
        guess = Some(root.excess + h * p1);
        profile.phi.push(phi);
        profile.excess.push(root.excess);
        profile.phi1.push(p1);
        profile.phi2.push(p2);
        profile.phi3.push(p3);
        profile.residual.push(root.residual);
        profile.residual_max = profile.residual_max.max(root.residual);
    }
    Ok(profile)
}

impl Profile {
    /// Rebuilds a profile from exported columns (for example a CSV written earlier).
    /// The derivative columns are taken as given, not recomputed.
    #[allow(clippy::too_many_arguments)]
    pub fn from_columns(
        spec: ConeSpec,
        grid: RadialGrid,
        phi: Vec<f64>,
        phi1: Vec<f64>,
        phi2: Vec<f64>,
        phi3: Vec<f64>,
        residual: Vec<f64>,
    ) -> Result<Self, ProfileError> {
        let m = grid.count;
        if [phi.len(), phi1.len(), phi2.len(), phi3.len(), residual.len()].iter().any(|&l| l != m) {
            return Err(ProfileError::DomainError(format!("every column must have {m} entries")));
        }
        let excess = phi.iter().map(|p| p - spec.a).collect();
        let residual_max = residual.iter().copied().fold(0.0, f64::max);
        Ok(Self { spec, grid, phi, excess, phi1, phi2, phi3, residual, residual_max })
    }

    /// Names of the structural bounds that fail; empty when the profile is sound.
    pub fn invariant_violations(&self, tol: f64) -> Vec<String> {
        let n = self.spec.n as f64;
        let mut failed = Vec::new();
        if self.excess.iter().any(|e| !(*e > 0.0)) {
            failed.push("phi > a".to_string());
        }
        if self.phi.windows(2).zip(self.excess.windows(2)).any(|(p, e)| !(p[1] > p[0] || e[1] > e[0])) {
            failed.push("phi strictly increasing".to_string());
        }
        if self.phi1.iter().any(|d| !(*d > 0.0)) {
            failed.push("phi1 > 0".to_string());
        }
        if self.phi1.iter().any(|d| !(*d < n)) {
            failed.push("phi1 < n".to_string());
        }
        if !(self.residual_max <= tol) {
            failed.push(format!("residual_max <= {tol:e}"));
        }
        failed
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,phi,phi1,phi2,phi3,residual")?;
        for k in 0..self.grid.count {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.grid.nodes[k], self.phi[k], self.phi1[k], self.phi2[k], self.phi3[k], self.residual[k]
            )?;
        }
        Ok(())
    }
}

/// Large-`t` expansion of `φ` and the size `(log t)²/t²` of the omitted terms.
pub fn asymptotic_phi(t: f64, n: usize) -> Result<(f64, f64), ProfileError> {
    if !(t > 1.0) {
        return Err(ProfileError::DomainError(format!("expansion needs t > 1, got {t}")));
    }
    let nf = n as f64;
    let lt = t.ln();
    let value = nf * t - (nf - 1.0) * lt - nf * nf.ln()
        + (nf - 1.0) * (nf - 1.0) / nf * lt / t
        + ((nf - 1.0) / nf + (nf - 1.0) * nf.ln()) / t;
    Ok((value, lt * lt / (t * t)))
}

/// Start of the window in which the expansion error is examined.
pub const EXPANSION_WINDOW_START: f64 = 50.0;

/// `|φ − expansion| / ((log t)²/t²)` at every node with `t ≥ 50`, as `(t, ratio)` pairs.
pub fn expansion_error_ratios(profile: &Profile) -> Result<Vec<(f64, f64)>, ProfileError> {
    let mut out = Vec::new();
    for (k, &t) in profile.grid.nodes.iter().enumerate() {
        if t < EXPANSION_WINDOW_START {
            continue;
        }
        let (value, order) = asymptotic_phi(t, profile.spec.n)?;
        out.push((t, (profile.phi[k] - value).abs() / order));
    }
    Ok(out)
}

/// Fitted power of `t` in `|φ − expansion| ≈ C (log t)² t^p` over `t ∈ [50, t_max]`.
///
/// Nodes where the error vanishes carry no information and are skipped; fewer
/// than 16 informative nodes, or `t_max < 1000`, is reported as an insufficient range.
pub fn expansion_error_exponent(profile: &Profile) -> Result<f64, ProfileError> {
    if profile.grid.t_max < 1e3 {
        return Err(ProfileError::InsufficientRange(format!(
            "expansion fit needs t_max >= 1000, grid ends at {}",
            profile.grid.t_max
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, ratio) in expansion_error_ratios(profile)? {
        if ratio > 0.0 && ratio.is_finite() {
            let lt = t.ln();
            xs.push(lt);
            // ln(|err| / (log t)²) = ln(ratio) − 2 ln t
            ys.push(ratio.ln() - 2.0 * lt);
        }
    }
    if xs.len() < 16 {
        return Err(ProfileError::InsufficientRange(format!(
            "expansion fit has {} informative nodes in [50, t_max], need 16",
            xs.len()
        )));
    }
    Ok(linear_fit(&xs, &ys).0)
}
