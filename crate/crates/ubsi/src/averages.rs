//! The parameterised average families phi(r) for balls, heatballs and
//! modified heatballs, and their derivative formulas.
//!
//! For balls, phi(r) = |B_r|^-1 int_{B_r(x)} u and
//!
//! ```text
//! phi'(r) = |B_r|^-1 int_{B_r(x)} (r^2 - |x-y|^2)/(2r) * Delta u(y) dy.
//! ```
//!
//! For heatballs, phi(r) = (4 r^n)^-1 int_E u |x-y|^2/(t-s)^2 and
//!
//! ```text
//! phi'(r) = n r^-(n+1) int_E Hu(y,s) log(r^n Phi(x-y, t-s)) dy ds;
//! ```
//!
//! the modified family applies the same formula in m+n dimensions to the
//! lifted field, since H(lift u) = Hu.

use crate::error::{Error, Result};
use crate::fields::{operator_value, DiffOp, ScalarField};
use crate::geometry::{
    heatball_time_extent, BallSpec, Domain, HeatballSpec, ModifiedHeatballSpec,
};
use crate::quadrature::{
    self, integrate_ball, integrate_ball_floored, integrate_heatball, integrate_heatball_floored,
    integrate_modified_heatball, GaussRule, QuadratureConfig, Weight,
};
use std::cell::Cell;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AverageKind {
    Ball,
    Heatball,
    ModifiedHeatball { extra_dim: usize },
}

/// A family of averages of one field around one center, for radii up to
/// `max_radius`.
#[derive(Debug, Clone)]
pub struct AverageFamily {
    pub kind: AverageKind,
    pub field: ScalarField,
    pub center: Vec<f64>,
    pub max_radius: f64,
    pub quad: QuadratureConfig,
}

impl AverageFamily {
    pub fn new(
        kind: AverageKind,
        field: ScalarField,
        center: Vec<f64>,
        max_radius: f64,
        quad: QuadratureConfig,
    ) -> Result<Self> {
        if max_radius <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "max_radius",
                value: max_radius,
                reason: "must be positive",
            });
        }
        if center.len() != field.arity.point_dim() {
            return Err(Error::InvalidDimension(center.len()));
        }
        if let AverageKind::ModifiedHeatball { extra_dim } = kind {
            if extra_dim < 3 {
                return Err(Error::UnsupportedExtraDim(extra_dim));
            }
        }
        Ok(Self {
            kind,
            field,
            center,
            max_radius,
            quad,
        })
    }

    /// As `new`, but additionally requires the region at `max_radius` to fit
    /// inside `domain` (checked on bounding boxes).
    pub fn new_in_domain(
        kind: AverageKind,
        field: ScalarField,
        center: Vec<f64>,
        max_radius: f64,
        quad: QuadratureConfig,
        domain: &Domain,
    ) -> Result<Self> {
        let fam = Self::new(kind, field, center, max_radius, quad)?;
        let bbox = fam.region_bounding_box(fam.max_radius);
        if !box_inside_domain(&bbox, domain) {
            return Err(Error::InvalidParameter {
                name: "max_radius",
                value: max_radius,
                reason: "region at max_radius leaves the domain",
            });
        }
        Ok(fam)
    }

    pub fn spatial_dim(&self) -> usize {
        self.field.arity.spatial_dim()
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if r <= 0.0 || r > self.max_radius {
            return Err(Error::RadiusOutOfRange {
                r,
                max: self.max_radius,
            });
        }
        Ok(())
    }

    /// Axis-aligned bounding box of the region at radius r.
    pub fn region_bounding_box(&self, r: f64) -> Vec<(f64, f64)> {
        match self.kind {
            AverageKind::Ball => self.center.iter().map(|c| (c - r, c + r)).collect(),
            AverageKind::Heatball | AverageKind::ModifiedHeatball { .. } => {
                let n = self.spatial_dim();
                let log_dim = match self.kind {
                    AverageKind::ModifiedHeatball { extra_dim } => n + extra_dim,
                    _ => n,
                };
                // max slice radius, attained at depth r^2/(4 pi e)
                let rho_max = r * (log_dim as f64 / (2.0 * PI * std::f64::consts::E)).sqrt();
                let mut bb: Vec<(f64, f64)> = self.center[..n]
                    .iter()
                    .map(|c| (c - rho_max, c + rho_max))
                    .collect();
                let t = self.center[n];
                bb.push((t - heatball_time_extent(r), t));
                bb
            }
        }
    }

    fn heatball_spec(&self, r: f64) -> HeatballSpec {
        HeatballSpec {
            center: self.center.clone(),
            radius: r,
            spatial_dim: self.spatial_dim(),
        }
    }

    fn modified_spec(&self, r: f64, extra_dim: usize) -> ModifiedHeatballSpec {
        ModifiedHeatballSpec {
            center: self.center.clone(),
            radius: r,
            spatial_dim: self.spatial_dim(),
            extra_dim,
        }
    }
}

fn box_inside_domain(bbox: &[(f64, f64)], domain: &Domain) -> bool {
    match domain {
        Domain::Box { intervals } => intervals
            .iter()
            .zip(bbox)
            .all(|((a, b), (lo, hi))| a <= lo && hi <= b),
        Domain::Ball { .. } => {
            // farthest corner of the box must lie inside the ball
            let dim = bbox.len();
            let mut corner = vec![0.0; dim];
            for mask in 0..(1u32 << dim) {
                for (i, c) in corner.iter_mut().enumerate() {
                    *c = if mask & (1 << i) != 0 { bbox[i].1 } else { bbox[i].0 };
                }
                if !domain.contains(&corner) {
                    return false;
                }
            }
            true
        }
        Domain::Empty { .. } => false,
    }
}

/// A derivative-formula value; `degraded_accuracy` marks that the operator
/// values came from finite differences rather than a closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeValue {
    pub value: f64,
    pub degraded_accuracy: bool,
}

/// Finite-difference operator values carry rounding noise amplified by
/// 1/h^2; quadratures of them are judged against that noise floor.
fn noise_floor(has_analytic: bool) -> f64 {
    if has_analytic {
        quadrature::EXACT_NOISE_FLOOR
    } else {
        quadrature::FD_NOISE_FLOOR
    }
}

/// phi(r) = |B_r|^-1 int_{B_r(x)} u.
pub fn ball_average(fam: &AverageFamily, r: f64) -> Result<f64> {
    fam.check_radius(r)?;
    let ball = BallSpec::new(fam.center.clone(), r)?;
    let total = integrate_ball(|p| fam.field.eval(p), &ball, &fam.quad)?;
    Ok(total / ball.volume())
}

/// phi'(r) by the Laplacian derivative formula.
pub fn ball_average_derivative(fam: &AverageFamily, r: f64) -> Result<DerivativeValue> {
    fam.check_radius(r)?;
    let ball = BallSpec::new(fam.center.clone(), r)?;
    let degraded = Cell::new(false);
    let center = &fam.center;
    let total = integrate_ball_floored(
        |p| {
            let dist_sq: f64 = p
                .iter()
                .zip(center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let (lap, fd) = operator_value(&fam.field, DiffOp::Laplacian, p)
                .expect("laplacian evaluation");
            if fd {
                degraded.set(true);
            }
            (r * r - dist_sq) / (2.0 * r) * lap
        },
        &ball,
        &fam.quad,
        noise_floor(fam.field.has_laplacian()),
    )?;
    Ok(DerivativeValue {
        value: total / ball.volume(),
        degraded_accuracy: degraded.get(),
    })
}

/// phi(r) = (4 r^n)^-1 int_E u |x-y|^2/(t-s)^2.
pub fn heatball_average(fam: &AverageFamily, r: f64) -> Result<f64> {
    fam.check_radius(r)?;
    let n = fam.spatial_dim();
    let spec = fam.heatball_spec(r);
    let total = integrate_heatball(
        |p| fam.field.eval(p),
        &spec,
        &Weight::HeatballKernel,
        &fam.quad,
    )?;
    Ok(total / (4.0 * r.powi(n as i32)))
}

/// phi(r) = int_{E_m} K_r(x-y, t-s) u(y, s); K_r carries the normalization.
pub fn modified_heatball_average(fam: &AverageFamily, r: f64) -> Result<f64> {
    fam.check_radius(r)?;
    let extra_dim = match fam.kind {
        AverageKind::ModifiedHeatball { extra_dim } => extra_dim,
        _ => {
            return Err(Error::Unsupported(
                "modified_heatball_average needs a modified-heatball family".into(),
            ))
        }
    };
    let spec = fam.modified_spec(r, extra_dim);
    integrate_modified_heatball(|p| fam.field.eval(p), &spec, &fam.quad)
}

/// phi'(r) by the heat derivative formula. For the modified family the
/// formula is applied in m+n dimensions to the lifted field.
pub fn heatball_average_derivative(fam: &AverageFamily, r: f64) -> Result<DerivativeValue> {
    fam.check_radius(r)?;
    let degraded = Cell::new(false);
    match fam.kind {
        AverageKind::Ball => Err(Error::Unsupported(
            "heatball_average_derivative needs a heatball family".into(),
        )),
        AverageKind::Heatball => {
            let n = fam.spatial_dim();
            let spec = fam.heatball_spec(r);
            let total = integrate_heatball_floored(
                |p| {
                    let (hu, fd) =
                        operator_value(&fam.field, DiffOp::Heat, p).expect("heat evaluation");
                    if fd {
                        degraded.set(true);
                    }
                    hu
                },
                &spec,
                &Weight::LogKernel { r },
                &fam.quad,
                noise_floor(fam.field.has_heat()),
            )?;
            Ok(DerivativeValue {
                value: n as f64 / r.powi(n as i32 + 1) * total,
                degraded_accuracy: degraded.get(),
            })
        }
        AverageKind::ModifiedHeatball { extra_dim } => {
            let n = fam.spatial_dim();
            let big_n = n + extra_dim;
            let lifted_field = fam.field.lift(extra_dim)?;
            let lifted_spec = fam.modified_spec(r, extra_dim).lifted();
            let total = integrate_heatball_floored(
                |p| {
                    let (hu, fd) =
                        operator_value(&lifted_field, DiffOp::Heat, p).expect("heat evaluation");
                    if fd {
                        degraded.set(true);
                    }
                    hu
                },
                &lifted_spec,
                &Weight::LogKernel { r },
                &fam.quad,
                noise_floor(lifted_field.has_heat()),
            )?;
            Ok(DerivativeValue {
                value: big_n as f64 / r.powi(big_n as i32 + 1) * total,
                degraded_accuracy: degraded.get(),
            })
        }
    }
}

/// phi(r) for whichever family this is.
pub fn average(fam: &AverageFamily, r: f64) -> Result<f64> {
    match fam.kind {
        AverageKind::Ball => ball_average(fam, r),
        AverageKind::Heatball => heatball_average(fam, r),
        AverageKind::ModifiedHeatball { .. } => modified_heatball_average(fam, r),
    }
}

/// phi'(r) for whichever family this is.
pub fn average_derivative(fam: &AverageFamily, r: f64) -> Result<DerivativeValue> {
    match fam.kind {
        AverageKind::Ball => ball_average_derivative(fam, r),
        _ => heatball_average_derivative(fam, r),
    }
}

/// Fundamental-theorem reconstruction u(x) = phi(R) - int_0^R phi'(r) dr.
///
/// The radial integral runs over [r_min, R] by Gauss rule with
/// r_min = 1e-3 R; below r_min, phi' vanishes linearly in r for both
/// families, so the missing piece is modeled as phi'(r_min) r_min / 2.
pub fn reconstruct_center_value(fam: &AverageFamily) -> Result<DerivativeValue> {
    let r_max = fam.max_radius;
    let r_min = 1e-3 * r_max;
    let rule = GaussRule::legendre(24);
    let mut degraded = false;
    let mut integral = 0.0;
    let mid = 0.5 * (r_min + r_max);
    let half = 0.5 * (r_max - r_min);
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let r = mid + half * x;
        let d = average_derivative(fam, r)?;
        degraded |= d.degraded_accuracy;
        integral += w * half * d.value;
    }
    let tip = average_derivative(fam, r_min)?;
    degraded |= tip.degraded_accuracy;
    integral += 0.5 * tip.value * r_min;
    let phi_r = average(fam, r_max)?;
    Ok(DerivativeValue {
        value: phi_r - integral,
        degraded_accuracy: degraded,
    })
}
