//! Exact and semi-analytic geometry of Euclidean balls, heatballs and
//! (n,m)-modified heatballs.
//!
//! A heatball E(x,t;r) is the superlevel set of the backward heat kernel,
//! {(y,s): s <= t, Phi(x-y, t-s) >= 1/r^n}, the parabolic analogue of a
//! ball. Its time slices at depth d = t-s are Euclidean balls whose radius
//! is known in closed form, which is what makes the volumes here reducible
//! to one-dimensional integrals.
//!
//! Convention used throughout the crate: points of space-time are stored as
//! `[x_1, ..., x_n, t]`, i.e. the time coordinate is last.

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadratureConfig};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Gamma(k/2) for k >= 1, by the half-integer recurrence. Exact up to
/// rounding; avoids a general-purpose gamma approximation.
fn gamma_half(k: usize) -> f64 {
    match k {
        0 => f64::INFINITY,
        1 => PI.sqrt(),
        2 => 1.0,
        _ => (k as f64 / 2.0 - 1.0) * gamma_half(k - 2),
    }
}

/// Volume of the unit ball in R^n: pi^(n/2) / Gamma(n/2 + 1).
pub fn unit_ball_volume(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidDimension(0));
    }
    Ok(PI.powf(n as f64 / 2.0) / gamma_half(n + 2))
}

/// Surface measure of the unit sphere in R^n, n * |B_1|.
///
/// For n = 1 this is 2: the "sphere" is the two endpoints of an interval,
/// carrying counting measure.
pub fn unit_sphere_area(n: usize) -> Result<f64> {
    Ok(n as f64 * unit_ball_volume(n)?)
}

pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// The standard heat kernel (4 pi s)^(-n/2) exp(-|y|^2 / 4s) evaluated
/// from the squared offset.
pub fn heat_kernel_radial(dist_sq: f64, s: f64, n: usize) -> Result<f64> {
    if s <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "s",
            value: s,
            reason: "heat kernel requires positive time",
        });
    }
    Ok((4.0 * PI * s).powf(-(n as f64) / 2.0) * (-dist_sq / (4.0 * s)).exp())
}

/// The standard heat kernel at spatial offset `y` and time `s > 0`.
pub fn heat_kernel(y: &[f64], s: f64) -> Result<f64> {
    heat_kernel_radial(norm_sq(y), s, y.len())
}

/// Maximal time depth of a heatball of radius `r`: members satisfy
/// t - s in [0, r^2 / 4 pi].
pub fn heatball_time_extent(r: f64) -> f64 {
    r * r / (4.0 * PI)
}

/// Radius of the spatial slice of E(x,t;r) at depth d = t - s:
/// (2 n d log(r^2 / 4 pi d))^(1/2) for 0 < d < r^2/4pi, `None` past the tip.
pub fn heatball_slice_radius(depth: f64, r: f64, n: usize) -> Result<Option<f64>> {
    if depth <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "depth",
            value: depth,
            reason: "slice depth must be positive",
        });
    }
    if r <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "r",
            value: r,
            reason: "heatball radius must be positive",
        });
    }
    if depth >= heatball_time_extent(r) {
        return Ok(None);
    }
    let log_term = (r * r / (4.0 * PI * depth)).ln();
    Ok(Some((2.0 * n as f64 * depth * log_term).sqrt()))
}

/// Half-width A(y, d) of the slice of the (n,m)-modified heatball at spatial
/// offset norm `y_norm` and depth d: the extra-variable integration in the
/// projected kernel runs over |xi - eta| <= A.
pub fn modified_slice_radius(
    y_norm: f64,
    depth: f64,
    r: f64,
    n: usize,
    m: usize,
) -> Result<Option<f64>> {
    if depth <= 0.0 || r <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "depth/r",
            value: depth.min(r),
            reason: "depth and radius must be positive",
        });
    }
    let log_term = (r * r / (4.0 * PI * depth)).ln();
    let radicand = 2.0 * depth * (m + n) as f64 * log_term - y_norm * y_norm;
    if radicand > 0.0 {
        Ok(Some(radicand.sqrt()))
    } else {
        Ok(None)
    }
}

/// Euclidean ball B_r(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if radius <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "radius",
                value: radius,
                reason: "ball radius must be positive",
            });
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// |B_r| = |B_1| r^n.
    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.dim()).expect("dim >= 1 by construction") * self.radius.powi(self.dim() as i32)
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        debug_assert_eq!(point.len(), self.dim());
        let d2: f64 = point
            .iter()
            .zip(&self.center)
            .map(|(p, c)| (p - c) * (p - c))
            .sum();
        d2 <= self.radius * self.radius
    }
}

/// Heatball E(x,t;r) in R^(n+1); `center` is (x, t) with t last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatballSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub spatial_dim: usize,
}

impl HeatballSpec {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.len() < 2 {
            return Err(Error::InvalidDimension(center.len()));
        }
        if radius <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "radius",
                value: radius,
                reason: "heatball radius must be positive",
            });
        }
        let spatial_dim = center.len() - 1;
        Ok(Self {
            center,
            radius,
            spatial_dim,
        })
    }

    pub fn spatial_center(&self) -> &[f64] {
        &self.center[..self.spatial_dim]
    }

    pub fn time(&self) -> f64 {
        self.center[self.spatial_dim]
    }

    /// Membership test from the defining superlevel set, plus the isolated
    /// center point.
    pub fn contains(&self, point: &[f64]) -> bool {
        debug_assert_eq!(point.len(), self.spatial_dim + 1);
        let depth = self.time() - point[self.spatial_dim];
        let d2: f64 = point[..self.spatial_dim]
            .iter()
            .zip(self.spatial_center())
            .map(|(p, c)| (p - c) * (p - c))
            .sum();
        if depth <= 0.0 {
            return depth == 0.0 && d2 == 0.0;
        }
        match heat_kernel_radial(d2, depth, self.spatial_dim) {
            Ok(phi) => phi >= self.radius.powi(-(self.spatial_dim as i32)),
            Err(_) => false,
        }
    }
}

/// (n,m)-modified heatball E_m(x,t;r): the projection of the
/// (n+m)-dimensional heatball onto the last n+1 coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifiedHeatballSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub spatial_dim: usize,
    pub extra_dim: usize,
}

impl ModifiedHeatballSpec {
    pub fn new(center: Vec<f64>, radius: f64, extra_dim: usize) -> Result<Self> {
        if center.len() < 2 {
            return Err(Error::InvalidDimension(center.len()));
        }
        if extra_dim < 1 {
            return Err(Error::InvalidDimension(extra_dim));
        }
        if radius <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "radius",
                value: radius,
                reason: "heatball radius must be positive",
            });
        }
        let spatial_dim = center.len() - 1;
        Ok(Self {
            center,
            radius,
            spatial_dim,
            extra_dim,
        })
    }

    pub fn spatial_center(&self) -> &[f64] {
        &self.center[..self.spatial_dim]
    }

    pub fn time(&self) -> f64 {
        self.center[self.spatial_dim]
    }

    /// Slice condition |x-y|^2 <= 2 (m+n) (t-s) log(r^2 / 4 pi (t-s)).
    pub fn contains(&self, point: &[f64]) -> bool {
        debug_assert_eq!(point.len(), self.spatial_dim + 1);
        let depth = self.time() - point[self.spatial_dim];
        let d2: f64 = point[..self.spatial_dim]
            .iter()
            .zip(self.spatial_center())
            .map(|(p, c)| (p - c) * (p - c))
            .sum();
        if depth <= 0.0 {
            return depth == 0.0 && d2 == 0.0;
        }
        if depth >= heatball_time_extent(self.radius) {
            return false;
        }
        let log_term = (self.radius * self.radius / (4.0 * PI * depth)).ln();
        d2 <= 2.0 * depth * (self.extra_dim + self.spatial_dim) as f64 * log_term
    }

    /// The lifted (n+m)-dimensional heatball this set projects from,
    /// centered at (0, x, t) in the extra variables.
    pub fn lifted(&self) -> HeatballSpec {
        let mut center = vec![0.0; self.extra_dim];
        center.extend_from_slice(&self.center);
        HeatballSpec {
            center,
            radius: self.radius,
            spatial_dim: self.extra_dim + self.spatial_dim,
        }
    }
}

/// Bounded open domain with closed-form measure: an axis-aligned box or a
/// Euclidean ball. `Empty` is the degenerate result of over-shrinking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Box { intervals: Vec<(f64, f64)> },
    Ball { center: Vec<f64>, radius: f64 },
    Empty { dim: usize },
}

impl Domain {
    pub fn unit_box(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Ok(Domain::Box {
            intervals: vec![(0.0, 1.0); n],
        })
    }

    pub fn unit_ball(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Ok(Domain::Ball {
            center: vec![0.0; n],
            radius: 1.0,
        })
    }

    pub fn from_intervals(intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        for &(a, b) in &intervals {
            if a >= b {
                return Err(Error::InvalidParameter {
                    name: "interval",
                    value: b - a,
                    reason: "box intervals must have positive length",
                });
            }
        }
        Ok(Domain::Box { intervals })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { intervals } => intervals.len(),
            Domain::Ball { center, .. } => center.len(),
            Domain::Empty { dim } => *dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Domain::Empty { .. })
    }

    pub fn measure(&self) -> f64 {
        match self {
            Domain::Box { intervals } => intervals.iter().map(|(a, b)| b - a).product(),
            Domain::Ball { center, radius } => {
                unit_ball_volume(center.len()).expect("dim >= 1") * radius.powi(center.len() as i32)
            }
            Domain::Empty { .. } => 0.0,
        }
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        match self {
            Domain::Box { intervals } => intervals
                .iter()
                .zip(point)
                .all(|((a, b), p)| *a <= *p && *p <= *b),
            Domain::Ball { center, radius } => {
                let d2: f64 = point
                    .iter()
                    .zip(center)
                    .map(|(p, c)| (p - c) * (p - c))
                    .sum();
                d2 <= radius * radius
            }
            Domain::Empty { .. } => false,
        }
    }

    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        match self {
            Domain::Box { intervals } => intervals.clone(),
            Domain::Ball { center, radius } => {
                center.iter().map(|c| (c - radius, c + radius)).collect()
            }
            Domain::Empty { dim } => vec![(0.0, 0.0); *dim],
        }
    }
}

/// Omega_delta: the part of the domain at distance >= delta from the
/// boundary. Boxes shrink per axis (supremum norm), balls by radius; both
/// keep the measure in closed form.
pub fn shrink_domain(dom: &Domain, delta: f64) -> Result<Domain> {
    if delta <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "shrink distance must be positive",
        });
    }
    Ok(match dom {
        Domain::Box { intervals } => {
            let shrunk: Vec<(f64, f64)> = intervals
                .iter()
                .map(|(a, b)| (a + delta, b - delta))
                .collect();
            if shrunk.iter().all(|(a, b)| a < b) {
                Domain::Box { intervals: shrunk }
            } else {
                Domain::Empty {
                    dim: intervals.len(),
                }
            }
        }
        Domain::Ball { center, radius } => {
            if radius - delta > 0.0 {
                Domain::Ball {
                    center: center.clone(),
                    radius: radius - delta,
                }
            } else {
                Domain::Empty { dim: center.len() }
            }
        }
        Domain::Empty { dim } => Domain::Empty { dim: *dim },
    })
}

/// Omega_R for the heat case: centers (x,t) whose modified heatball
/// E_m(x,t;R) stays inside the domain, via the heatball's bounding box
/// (spatial half-width = max slice half-width at y = 0, attained at depth
/// R^2/4pi e; time extent R^2/4pi below the center).
pub fn shrink_domain_heat(dom: &Domain, radius: f64, n: usize, m: usize) -> Result<Domain> {
    if radius <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "R",
            value: radius,
            reason: "heat shrink radius must be positive",
        });
    }
    if dom.dim() != n + 1 {
        return Err(Error::InvalidDimension(dom.dim()));
    }
    // max over depth of A(0, d) = sqrt(2 (m+n) d log(R^2/4pi d)); the
    // maximizer is d = R^2/(4 pi e).
    let half_width = radius * ((m + n) as f64 / (2.0 * PI * std::f64::consts::E)).sqrt();
    let time_extent = heatball_time_extent(radius);
    Ok(match dom {
        Domain::Box { intervals } => {
            let mut shrunk = Vec::with_capacity(intervals.len());
            for (axis, (a, b)) in intervals.iter().enumerate() {
                if axis < n {
                    shrunk.push((a + half_width, b - half_width));
                } else {
                    shrunk.push((a + time_extent, *b));
                }
            }
            if shrunk.iter().all(|(a, b)| a < b) {
                Domain::Box { intervals: shrunk }
            } else {
                Domain::Empty {
                    dim: intervals.len(),
                }
            }
        }
        Domain::Ball { center, radius: rho } => {
            // Any point of the heatball's bounding box is within this
            // distance of the center, so radial shrink by it suffices.
            let reach = (n as f64 * half_width * half_width + time_extent * time_extent).sqrt();
            if rho - reach > 0.0 {
                Domain::Ball {
                    center: center.clone(),
                    radius: rho - reach,
                }
            } else {
                Domain::Empty { dim: center.len() }
            }
        }
        Domain::Empty { dim } => Domain::Empty { dim: *dim },
    })
}

/// |E(1)| for spatial dimension n: one-dimensional quadrature of
/// |B_1| rho(d)^n over the depth range (0, 1/4pi).
pub fn unit_heatball_volume(n: usize, quad: &QuadratureConfig) -> Result<f64> {
    let vn = unit_ball_volume(n)?;
    let depth_max = heatball_time_extent(1.0);
    quadrature::depth_integral(
        |d| {
            match heatball_slice_radius(d, 1.0, n) {
                Ok(Some(rho)) => vn * rho.powi(n as i32),
                _ => 0.0,
            }
        },
        depth_max,
        quad,
    )
}

/// |E(x,t;r)| = r^(n+2) |E(1)| by parabolic scaling.
pub fn heatball_volume(spec: &HeatballSpec, quad: &QuadratureConfig) -> Result<f64> {
    let unit = unit_heatball_volume(spec.spatial_dim, quad)?;
    Ok(unit * spec.radius.powi(spec.spatial_dim as i32 + 2))
}

/// |E_m(1)|: slices are n-dimensional balls whose radius carries the
/// lifted dimension m+n inside the logarithm.
pub fn unit_modified_heatball_volume(n: usize, m: usize, quad: &QuadratureConfig) -> Result<f64> {
    let vn = unit_ball_volume(n)?;
    let depth_max = heatball_time_extent(1.0);
    quadrature::depth_integral(
        |d| match modified_slice_radius(0.0, d, 1.0, n, m) {
            Ok(Some(a)) => vn * a.powi(n as i32),
            _ => 0.0,
        },
        depth_max,
        quad,
    )
}

/// |E_m(x,t;r)| = r^(n+2) |E_m(1)|; same parabolic scaling as the plain
/// heatball (spatial dimension n, time scaling r^2).
pub fn modified_heatball_volume(spec: &ModifiedHeatballSpec, quad: &QuadratureConfig) -> Result<f64> {
    let unit = unit_modified_heatball_volume(spec.spatial_dim, spec.extra_dim, quad)?;
    Ok(unit * spec.radius.powi(spec.spatial_dim as i32 + 2))
}
