//! Cao's metric against the cone metric in the cohomogeneity-one frame.
//!
//! Both metrics have the shape `c_rad (dt²/4 + η²) + c_trans g^T`; Cao's metric
//! has `c_rad = φ′`, `c_trans = φ`, the cone has `c_rad = n`, `c_trans = nt`.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::numerics::{cumulative_simpson, linear_fit};
use crate::profile::Profile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("insufficient range: {0}")]
    InsufficientRange(String),
    #[error("cannot verify: {0}")]
    Unverifiable(String),
    #[error("frame decay of order {0} is not supported (orders 0, 1, 2 only)")]
    Unsupported(usize),
}

/// Coefficients of a metric in the frame `dt²/4, η², g^T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSample {
    pub t: f64,
    pub c_rad: f64,
    pub c_reeb: f64,
    pub c_trans: f64,
}

impl MetricSample {
    pub fn soliton(profile: &Profile, index: usize) -> Self {
        let d = profile.phi1[index];
        Self { t: profile.grid.nodes[index], c_rad: d, c_reeb: d, c_trans: profile.phi[index] }
    }

    pub fn cone(t: f64, n: usize) -> Self {
        let n = n as f64;
        Self { t, c_rad: n, c_reeb: n, c_trans: n * t }
    }

    pub fn is_positive(&self) -> bool {
        self.c_rad > 0.0 && self.c_reeb > 0.0 && self.c_trans > 0.0
    }
}

/// `R = 4n − 4φ′` at every node.
pub fn scalar_curvature(profile: &Profile) -> Vec<f64> {
    let n = profile.spec.n as f64;
    profile.phi1.iter().map(|d| 4.0 * n - 4.0 * d).collect()
}

/// Outcome of the linear curvature lower bound `R ≥ 4(n−1−ε)/t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureFloor {
    /// True when the bound holds at every node with `t ≥ 100`.
    pub holds: bool,
    /// Smallest node `T` such that the bound holds at every node from `T` on.
    pub threshold: Option<f64>,
}

pub const CURVATURE_FLOOR_START: f64 = 100.0;

pub fn curvature_floor_check(profile: &Profile, eps: f64) -> Result<CurvatureFloor, GeometryError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(GeometryError::Unverifiable(format!(
            "margin eps must lie in (0, 1), got {eps}; at eps = 0 the bound has no slack"
        )));
    }
    if profile.grid.t_max < CURVATURE_FLOOR_START {
        return Err(GeometryError::InsufficientRange(format!(
            "curvature floor needs t_max >= {CURVATURE_FLOOR_START}"
        )));
    }
    let n = profile.spec.n as f64;
    let curvature = scalar_curvature(profile);
    let nodes = &profile.grid.nodes;
    let ok = |k: usize| nodes[k] > 0.0 && curvature[k] >= 4.0 * (n - 1.0 - eps) / nodes[k];
    let mut threshold = None;
    for k in (0..nodes.len()).rev() {
        if !ok(k) {
            break;
        }
        threshold = Some(nodes[k]);
    }
    let holds = threshold.is_some_and(|t| t <= CURVATURE_FLOOR_START);
    Ok(CurvatureFloor { holds, threshold })
}

/// `|g̃ − ĝ|_ĝ` from the frame coefficients at one point.
pub fn metric_difference_at(t: f64, phi: f64, phi1: f64, n: usize) -> f64 {
    let nf = n as f64;
    let trans = (phi - nf * t) / (nf * t);
    let rad = (phi1 - nf) / nf;
    ((2.0 * nf - 2.0) * trans * trans + 2.0 * rad * rad).sqrt()
}

pub fn metric_difference(profile: &Profile) -> Result<Vec<f64>, GeometryError> {
    if profile.grid.t_min <= 0.0 {
        return Err(GeometryError::DomainError(format!(
            "metric difference needs t > 0 at every node, grid starts at {}",
            profile.grid.t_min
        )));
    }
    Ok(difference_on(profile, 0))
}

fn difference_on(profile: &Profile, start: usize) -> Vec<f64> {
    (start..profile.grid.count)
        .map(|k| metric_difference_at(profile.grid.nodes[k], profile.phi[k], profile.phi1[k], profile.spec.n))
        .collect()
}

/// Geometric-mean fit of `|g̃ − ĝ|_ĝ · t / log t` over `[t_lo, t_hi]`, with its extremes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DifferenceRate {
    pub fitted: f64,
    pub min: f64,
    pub max: f64,
    pub nodes: usize,
}

pub fn metric_difference_rate(profile: &Profile, t_lo: f64, t_hi: f64) -> Result<DifferenceRate, GeometryError> {
    if !(t_lo > 1.0) {
        return Err(GeometryError::DomainError("rate window must start above t = 1".into()));
    }
    let mut logs = Vec::new();
    let (mut min, mut max) = (f64::INFINITY, 0.0f64);
    for (k, &t) in profile.grid.nodes.iter().enumerate() {
        if t < t_lo || t > t_hi {
            continue;
        }
        let v = metric_difference_at(t, profile.phi[k], profile.phi1[k], profile.spec.n) * t / t.ln();
        min = min.min(v);
        max = max.max(v);
        logs.push(v.ln());
    }
    if logs.len() < 16 {
        return Err(GeometryError::InsufficientRange(format!(
            "rate window [{t_lo}, {t_hi}] holds {} nodes, need 16",
            logs.len()
        )));
    }
    let fitted = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
    Ok(DifferenceRate { fitted, min, max, nodes: logs.len() })
}

/// Leading constant of `|g̃ − ĝ|_ĝ ~ C log t / t`.
pub fn metric_difference_leading_constant(n: usize) -> f64 {
    let n = n as f64;
    (2.0 * n - 2.0).sqrt() * (n - 1.0) / n
}

/// `| |X|² + R − 4n |` with `|X|² = 4φ′`.
pub fn charge_identity(profile: &Profile) -> Vec<f64> {
    let n = profile.spec.n as f64;
    scalar_curvature(profile)
        .iter()
        .zip(&profile.phi1)
        .map(|(r, d)| (4.0 * d + r - 4.0 * n).abs())
        .collect()
}

/// Soliton charge recovered from the profile (`|X|² + R` averaged over nodes).
pub fn charge(profile: &Profile) -> f64 {
    let curvature = scalar_curvature(profile);
    let sum: f64 = curvature.iter().zip(&profile.phi1).map(|(r, d)| 4.0 * d + r).sum();
    sum / curvature.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGrowth {
    /// log-log slope of the volume against radial distance over the last decade of distance.
    pub slope: f64,
    pub volume: Vec<f64>,
    pub radial_distance: Vec<f64>,
}

/// Volume and radial distance from explicit `φ, φ′` samples on a uniform grid.
pub fn volume_growth_from(
    nodes: &[f64],
    phi: &[f64],
    phi1: &[f64],
    n: usize,
    link_volume: f64,
) -> Result<VolumeGrowth, GeometryError> {
    let m = nodes.len();
    if m < 3 {
        return Err(GeometryError::InsufficientRange("volume growth needs at least 3 nodes".into()));
    }
    let h = (nodes[m - 1] - nodes[0]) / (m - 1) as f64;
    let nf = n as f64;
    let density: Vec<f64> = phi
        .iter()
        .zip(phi1)
        .map(|(p, d)| link_volume * 0.5 * nf * p.powi(n as i32 - 1) * d)
        .collect();
    let speed: Vec<f64> = phi1.iter().map(|d| 0.5 * d.sqrt()).collect();
    let volume = cumulative_simpson(&density, h);
    let radial_distance = cumulative_simpson(&speed, h);
    let s_max = radial_distance[m - 1];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 0..m {
        if radial_distance[k] >= 0.1 * s_max && volume[k] > 0.0 && radial_distance[k] > 0.0 {
            xs.push(radial_distance[k].ln());
            ys.push(volume[k].ln());
        }
    }
    if xs.len() < 16 {
        return Err(GeometryError::InsufficientRange(format!(
            "volume fit has {} nodes in the last decade of distance, need 16",
            xs.len()
        )));
    }
    let slope = linear_fit(&xs, &ys).0;
    Ok(VolumeGrowth { slope, volume, radial_distance })
}

pub fn volume_growth(profile: &Profile) -> Result<VolumeGrowth, GeometryError> {
    if profile.grid.t_max < 1e3 {
        return Err(GeometryError::InsufficientRange(format!(
            "volume growth needs t_max >= 1000, grid ends at {}",
            profile.grid.t_max
        )));
    }
    volume_growth_from(&profile.grid.nodes, &profile.phi, &profile.phi1, profile.spec.n, profile.spec.link_volume)
}

/// `|∇̂^k (1/t)|_ĝ` for the cone metric, `k ≤ 2`.
///
/// With `θ̂` the ĝ-orthonormal coframe, `dt = (2/√n) θ̂_r` and the cone Hessian of
/// `t` is `2 g^T`, so `∇̂² t^{−1}` has eigenvalue `8/(n t³)` in the radial
/// direction and `−2/(n t³)` on each of the `2n − 2` transverse directions.
pub fn hat_frame_decay(t: f64, k: usize, n: usize) -> Result<f64, GeometryError> {
    if !(t > 1.0) {
        return Err(GeometryError::DomainError(format!("frame decay needs t > 1, got {t}")));
    }
    let nf = n as f64;
    match k {
        0 => Ok(1.0 / t),
        1 => Ok(2.0 / (t * t * nf.sqrt())),
        2 => Ok((64.0 + (2.0 * nf - 2.0) * 4.0).sqrt() / (nf * t * t * t)),
        _ => Err(GeometryError::Unsupported(k)),
    }
}

/// Per-node geometric quantities over the nodes with `t > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    pub t: Vec<f64>,
    pub scalar_curvature: Vec<f64>,
    pub diff_norm: Vec<f64>,
    pub charge_defect: Vec<f64>,
    pub volume: Vec<f64>,
    pub geodesic_s: Vec<f64>,
}

/// Volume and distance are accumulated from `t_min`; rows are kept where `t > 0`.
pub fn geometry_report(profile: &Profile) -> Result<GeometryReport, GeometryError> {
    let start = profile.grid.nodes.iter().position(|&t| t > 0.0).ok_or_else(|| {
        GeometryError::DomainError("geometry report needs nodes with t > 0".into())
    })?;
    let growth = volume_growth_from(
        &profile.grid.nodes,
        &profile.phi,
        &profile.phi1,
        profile.spec.n,
        profile.spec.link_volume,
    );
    let (volume, distance) = match growth {
        Ok(g) => (g.volume, g.radial_distance),
        Err(_) => {
            let h = profile.grid.spacing();
            let nf = profile.spec.n as f64;
            let density: Vec<f64> = (0..profile.grid.count)
                .map(|k| profile.spec.link_volume * 0.5 * nf * profile.phi[k].powi(profile.spec.n as i32 - 1) * profile.phi1[k])
                .collect();
            let speed: Vec<f64> = profile.phi1.iter().map(|d| 0.5 * d.sqrt()).collect();
            (cumulative_simpson(&density, h), cumulative_simpson(&speed, h))
        }
    };
    Ok(GeometryReport {
        t: profile.grid.nodes[start..].to_vec(),
        scalar_curvature: scalar_curvature(profile)[start..].to_vec(),
        diff_norm: difference_on(profile, start),
        charge_defect: charge_identity(profile)[start..].to_vec(),
        volume: volume[start..].to_vec(),
        geodesic_s: distance[start..].to_vec(),
    })
}

impl GeometryReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,R,diff_norm,charge_defect,volume,geodesic_s")?;
        for k in 0..self.t.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.t[k], self.scalar_curvature[k], self.diff_norm[k], self.charge_defect[k], self.volume[k], self.geodesic_s[k]
            )?;
        }
        Ok(())
    }
}
