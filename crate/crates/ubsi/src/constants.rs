//! The explicit constants of the constructive proofs: C_n and the
//! Laplacian constant c, the heat-operator chain (M_R, C_R, C_{m,n}, c),
//! the Chebyshev-derived constant, and the rescaling to classes Du >= A.
//!
//! The proofs require strict inequalities; every constant here is reported
//! together with the threshold terms it must undercut and a configurable
//! safety factor keeping "strictly less" robust to quadrature error.

use crate::averages::{ball_average, AverageFamily, AverageKind};
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::geometry::{
    shrink_domain, shrink_domain_heat, unit_ball_volume, unit_heatball_volume,
    unit_modified_heatball_volume, unit_sphere_area, Domain, ModifiedHeatballSpec,
};
use crate::levelsets::{lp_norm, measure_superlevel, Exponent};
use crate::quadrature::{max_on_region, modified_kernel, QuadratureConfig, Region, Weight, WeightedRegion};
use serde::{Deserialize, Serialize};

/// C_n from the lower bound of the ball derivative formula, evaluated from
/// the displayed expression (|dB_1|/|B_1|) (1/2n - 1/2(n+2)); this
/// simplifies to 1/(n+2).
pub fn laplace_cn(n: usize) -> Result<f64> {
    let ratio = unit_sphere_area(n)? / unit_ball_volume(n)?;
    let cn = ratio * (1.0 / (2.0 * n as f64) - 1.0 / (2.0 * (n as f64 + 2.0)));
    debug_assert!((cn - 1.0 / (n as f64 + 2.0)).abs() < 1e-12);
    Ok(cn)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceConstantReport {
    pub n: usize,
    pub cn: f64,
    pub delta: f64,
    /// |Omega_delta|
    pub shrunken_measure: f64,
    /// |B_{delta/2}|
    pub half_ball_volume: f64,
    /// (C_n/16) delta^2 |Omega_delta|
    pub term_measure: f64,
    /// (1 + |B_{delta/2}|^-1)^-1 (C_n/16) delta^2
    pub term_pointwise: f64,
    pub safety_factor: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatConstantReport {
    pub n: usize,
    pub m: usize,
    pub radius: f64,
    /// |Omega_R|
    pub shrunken_measure: f64,
    /// grid estimate of sup K_R, inflated by the refinement delta
    pub kernel_max: f64,
    pub kernel_max_refinement_delta: f64,
    /// |E_m(R)|
    pub modified_volume: f64,
    /// C_R = M_R (|E_m(R)| + 1)
    pub c_r: f64,
    /// C_{m,n} = (m+n) |E(1)| e^-(m+n+2), |E(1)| in dimension m+n
    pub c_mn: f64,
    /// C_R^-1 (C_mn/16) R^2
    pub term_kernel: f64,
    /// (C_mn/16) R^2
    pub term_pointwise: f64,
    /// (C_mn/16) R^2 |Omega_R|
    pub term_measure: f64,
    pub safety_factor: f64,
    pub c: f64,
}

/// Either proof's constant bundle, with every intermediate it was built
/// from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantReport {
    Laplace(LaplaceConstantReport),
    Heat(HeatConstantReport),
}

impl ConstantReport {
    pub fn c(&self) -> f64 {
        match self {
            ConstantReport::Laplace(r) => r.c,
            ConstantReport::Heat(r) => r.c,
        }
    }

    /// The threshold terms the chosen c must stay strictly below.
    pub fn thresholds(&self) -> Vec<(&'static str, f64)> {
        match self {
            ConstantReport::Laplace(r) => vec![
                ("(C_n/16) delta^2 |Omega_delta|", r.term_measure),
                ("(1+|B|^-1)^-1 (C_n/16) delta^2", r.term_pointwise),
            ],
            ConstantReport::Heat(r) => vec![
                ("C_R^-1 (C_mn/16) R^2", r.term_kernel),
                ("(C_mn/16) R^2", r.term_pointwise),
                ("(C_mn/16) R^2 |Omega_R|", r.term_measure),
            ],
        }
    }
}

fn check_safety(safety: f64) -> Result<()> {
    if !(safety > 0.0 && safety < 1.0) {
        return Err(Error::InvalidParameter {
            name: "safety",
            value: safety,
            reason: "safety factor must lie in (0, 1)",
        });
    }
    Ok(())
}

/// The Laplace-class constant for a given shrink distance delta:
/// c = safety * min{(C_n/16) d^2 |Omega_d|, (1+|B_{d/2}|^-1)^-1 (C_n/16) d^2}.
pub fn laplace_constant(dom: &Domain, delta: f64, safety: f64) -> Result<LaplaceConstantReport> {
    check_safety(safety)?;
    let n = dom.dim();
    let shrunk = shrink_domain(dom, delta)?;
    if shrunk.is_empty() {
        return Err(Error::EmptyShrunkenDomain(format!(
            "Omega_delta empty at delta = {delta}"
        )));
    }
    let cn = laplace_cn(n)?;
    let shrunken_measure = shrunk.measure();
    let half_ball_volume = unit_ball_volume(n)? * (delta / 2.0).powi(n as i32);
    let base = cn / 16.0 * delta * delta;
    let term_measure = base * shrunken_measure;
    let term_pointwise = base / (1.0 + 1.0 / half_ball_volume);
    Ok(LaplaceConstantReport {
        n,
        cn,
        delta,
        shrunken_measure,
        half_ball_volume,
        term_measure,
        term_pointwise,
        safety_factor: safety,
        c: safety * term_measure.min(term_pointwise),
    })
}

/// Largest shrink distance that keeps the domain nonempty.
fn max_shrink(dom: &Domain) -> f64 {
    match dom {
        Domain::Box { intervals } => intervals
            .iter()
            .map(|(a, b)| (b - a) / 2.0)
            .fold(f64::INFINITY, f64::min),
        Domain::Ball { radius, .. } => *radius,
        Domain::Empty { .. } => 0.0,
    }
}

/// The proof only requires Omega_delta to have positive measure; delta is
/// otherwise free, so pick it to maximize c over a 32-point log grid.
pub fn laplace_constant_auto(dom: &Domain, safety: f64) -> Result<LaplaceConstantReport> {
    check_safety(safety)?;
    let hi = max_shrink(dom);
    if hi <= 0.0 {
        return Err(Error::EmptyShrunkenDomain("domain has no interior".into()));
    }
    let mut best: Option<LaplaceConstantReport> = None;
    for k in 0..32 {
        // log grid over [hi/1000, hi)
        let delta = hi * 1e-3 * 1000f64.powf(k as f64 / 32.0) * 0.999;
        if let Ok(report) = laplace_constant(dom, delta, safety) {
            if best.as_ref().is_none_or(|b| report.c > b.c) {
                best = Some(report);
            }
        }
    }
    best.ok_or_else(|| Error::EmptyShrunkenDomain("no feasible delta on the grid".into()))
}

/// The heat-class constant at fixed R and extra dimension m >= 3.
pub fn heat_constant(
    dom: &Domain,
    radius: f64,
    m: usize,
    quad: &QuadratureConfig,
    safety: f64,
) -> Result<HeatConstantReport> {
    check_safety(safety)?;
    if m < 3 {
        return Err(Error::UnsupportedExtraDim(m));
    }
    if dom.dim() < 2 {
        return Err(Error::InvalidDimension(dom.dim()));
    }
    let n = dom.dim() - 1;
    let shrunk = shrink_domain_heat(dom, radius, n, m)?;
    if shrunk.is_empty() {
        return Err(Error::EmptyShrunkenDomain(format!(
            "Omega_R empty at R = {radius}"
        )));
    }
    let shrunken_measure = shrunk.measure();

    // M_R: grid supremum of K_R over a modified heatball, inflated by the
    // observed refinement delta (a smaller M_R would overstate
    // C_R^-1 (C_mn/16) R^2, so conservatism pushes the estimate up).
    let mut center = vec![0.0; n + 1];
    center[n] = 0.0;
    let spec = ModifiedHeatballSpec {
        center,
        radius,
        spatial_dim: n,
        extra_dim: m,
    };
    let wregion = WeightedRegion {
        region: Region::Modified(spec.clone()),
        weight: Weight::ModifiedKernel,
    };
    let t = spec.time();
    let est = max_on_region(
        |p| {
            let dist_sq: f64 = p[..n].iter().map(|v| v * v).sum();
            modified_kernel(dist_sq, t - p[n], radius, n, m)
        },
        &wregion,
        quad,
    )?;
    let kernel_max = est.value + est.refinement_delta.abs();

    let modified_volume =
        unit_modified_heatball_volume(n, m, quad)? * radius.powi(n as i32 + 2);
    let c_r = kernel_max * (modified_volume + 1.0);
    let lifted_unit_volume = unit_heatball_volume(n + m, quad)?;
    let c_mn =
        (n + m) as f64 * lifted_unit_volume * (-((n + m) as f64 + 2.0)).exp();

    let base = c_mn / 16.0 * radius * radius;
    let term_kernel = base / c_r;
    let term_pointwise = base;
    let term_measure = base * shrunken_measure;
    Ok(HeatConstantReport {
        n,
        m,
        radius,
        shrunken_measure,
        kernel_max,
        kernel_max_refinement_delta: est.refinement_delta,
        modified_volume,
        c_r,
        c_mn,
        term_kernel,
        term_pointwise,
        term_measure,
        safety_factor: safety,
        c: safety * term_kernel.min(term_pointwise).min(term_measure),
    })
}

/// R chosen to maximize c over a 32-point log grid of feasible radii.
pub fn heat_constant_auto(
    dom: &Domain,
    m: usize,
    quad: &QuadratureConfig,
    safety: f64,
) -> Result<HeatConstantReport> {
    check_safety(safety)?;
    if dom.dim() < 2 {
        return Err(Error::InvalidDimension(dom.dim()));
    }
    let n = dom.dim() - 1;
    // upper bound on feasible R from the heatball bounding box
    let half_width_unit = ((m + n) as f64 / (2.0 * std::f64::consts::PI * std::f64::consts::E)).sqrt();
    let hi = match dom {
        Domain::Box { intervals } => {
            let spatial = intervals[..n]
                .iter()
                .map(|(a, b)| (b - a) / 2.0 / half_width_unit)
                .fold(f64::INFINITY, f64::min);
            let time_len = intervals[n].1 - intervals[n].0;
            spatial.min((4.0 * std::f64::consts::PI * time_len).sqrt())
        }
        Domain::Ball { radius, .. } => {
            // reach(R) <= sqrt(n) W(R) + R^2/4pi; a slight overshoot is
            // harmless, infeasible grid points are skipped below
            radius / (n as f64).sqrt() / half_width_unit
        }
        Domain::Empty { .. } => {
            return Err(Error::EmptyShrunkenDomain("domain has no interior".into()))
        }
    };
    let mut best: Option<HeatConstantReport> = None;
    for k in 0..32 {
        let radius = hi * 1e-2 * 100f64.powf(k as f64 / 32.0) * 0.999;
        if let Ok(report) = heat_constant(dom, radius, m, quad, safety) {
            if best.as_ref().is_none_or(|b| report.c > b.c) {
                best = Some(report);
            }
        }
    }
    best.ok_or_else(|| Error::EmptyShrunkenDomain("no feasible R on the grid".into()))
}

/// The Chebyshev route from a sublevel estimate |{|u| <= eps}| <= C eps^d:
/// pick eps with C eps^d = |Omega|/2, then c = eps if |Omega|/2 >= 1, else
/// c = eps |Omega| / 2.
pub fn chebyshev_constant(c_sublevel: f64, delta_exp: f64, omega_measure: f64) -> Result<f64> {
    if c_sublevel <= 0.0 || delta_exp <= 0.0 || omega_measure <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "chebyshev",
            value: c_sublevel.min(delta_exp).min(omega_measure),
            reason: "C, delta and |Omega| must be positive",
        });
    }
    let eps = (omega_measure / (2.0 * c_sublevel)).powf(1.0 / delta_exp);
    Ok(if omega_measure / 2.0 >= 1.0 {
        eps
    } else {
        eps * omega_measure / 2.0
    })
}

/// Rescaled inequality parameters for the class Du >= A: applying the
/// unit-class inequality to u/A yields threshold and bound both equal cA.
pub fn rescale_constant(c: f64, a: f64) -> Result<(f64, f64)> {
    if a <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "A",
            value: a,
            reason: "operator lower bound must be positive",
        });
    }
    Ok((c * a, c * a))
}

/// One sampled step of the Laplace-class proof chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub c: f64,
    pub lhs: f64,
    /// the contradiction hypothesis lhs <= c
    pub hypothesis_holds: bool,
    /// max over samples of u(x) + C_n delta^2/8 - phi_x(delta/2); <= 0 when
    /// Delta u >= 1 (unconditional step)
    pub max_growth_violation: f64,
    /// max over samples of u(x) - ((1+|B|^-1) c - C_n delta^2/8); only
    /// meaningful when the hypothesis holds
    pub max_conclusion_violation: f64,
    pub samples: usize,
}

/// Check the Laplace-class proof chain on sampled centers in Omega_delta:
/// the average-growth step u(x) <= phi_x(delta/2) - C_n delta^2/8 holds
/// unconditionally for Delta u >= 1, and whenever the hypothesis
/// lhs <= c holds, u(x) <= (1+|B_{delta/2}|^-1) c - (C_n/8) delta^2.
pub fn laplace_chain_check(
    field: &ScalarField,
    dom: &Domain,
    delta: f64,
    c: f64,
    p: Exponent,
    resolution: usize,
    quad: &QuadratureConfig,
) -> Result<ChainReport> {
    let n = dom.dim();
    let cn = laplace_cn(n)?;
    let shrunk = shrink_domain(dom, delta)?;
    if shrunk.is_empty() {
        return Err(Error::EmptyShrunkenDomain(format!(
            "Omega_delta empty at delta = {delta}"
        )));
    }
    let norm = lp_norm(field, dom, p, resolution)?;
    let level = measure_superlevel(field, dom, c, resolution)?;
    let lhs = norm.value * p.conjugate().measure_power(level.measure);
    let hypothesis_holds = lhs <= c;

    let half_ball = unit_ball_volume(n)? * (delta / 2.0).powi(n as i32);
    let growth = cn / 8.0 * delta * delta;
    let conclusion_bound = (1.0 + 1.0 / half_ball) * c - growth;

    let mut max_growth_violation = f64::NEG_INFINITY;
    let mut max_conclusion_violation = f64::NEG_INFINITY;
    let mut samples = 0usize;
    let mut centers = Vec::new();
    crate::levelsets::for_each_cell(&shrunk, 5, |center, _| centers.push(center.to_vec()));
    for center in centers {
        let fam = AverageFamily::new(
            AverageKind::Ball,
            field.clone(),
            center.clone(),
            delta / 2.0,
            quad.clone(),
        )?;
        let phi = ball_average(&fam, delta / 2.0)?;
        let u = field.eval(&center);
        max_growth_violation = max_growth_violation.max(u + growth - phi);
        max_conclusion_violation = max_conclusion_violation.max(u - conclusion_bound);
        samples += 1;
    }
    Ok(ChainReport {
        c,
        lhs,
        hypothesis_holds,
        max_growth_violation,
        max_conclusion_violation,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_quadratic;
    use std::f64::consts::PI;

    fn assert_rel(a: f64, b: f64, tol: f64) {
        let scale = b.abs().max(1e-300);
        assert!((a - b).abs() <= tol * scale, "{a} vs {b} (rel tol {tol})");
    }

    #[test]
    fn cn_closed_form() {
        for n in 1..=10 {
            assert!((laplace_cn(n).unwrap() - 1.0 / (n as f64 + 2.0)).abs() < 1e-12);
        }
        assert_rel(laplace_cn(1).unwrap(), 1.0 / 3.0, 1e-14);
        assert_rel(laplace_cn(2).unwrap(), 0.25, 1e-14);
        assert_rel(laplace_cn(3).unwrap(), 0.2, 1e-14);
    }

    #[test]
    fn laplace_constant_worked_example() {
        // Omega = [0,1]^2, delta = 1/4
        let dom = Domain::unit_box(2).unwrap();
        let report = laplace_constant(&dom, 0.25, 0.9).unwrap();
        assert_rel(report.term_measure, (1.0 / 64.0) * (1.0 / 16.0) * 0.25, 1e-12);
        let half_ball = PI / 64.0;
        assert_rel(report.half_ball_volume, half_ball, 1e-12);
        let term2 = (1.0 / (1.0 + 64.0 / PI)) * (1.0 / 64.0) * (1.0 / 16.0);
        assert_rel(report.term_pointwise, term2, 1e-12);
        assert_rel(report.c, 0.9 * term2, 1e-12);
        // safety scales c exactly
        let half = laplace_constant(&dom, 0.25, 0.45).unwrap();
        assert_rel(half.c, report.c / 2.0, 1e-12);
    }

    #[test]
    fn laplace_constant_vanishes_with_delta() {
        let dom = Domain::unit_box(2).unwrap();
        let mut last = f64::INFINITY;
        for delta in [0.4, 0.2, 0.1, 0.05, 0.025] {
            let c = laplace_constant(&dom, delta, 0.9).unwrap().c;
            assert!(c < last);
            last = c;
        }
        assert!(laplace_constant(&dom, 0.5, 0.9).is_err());
    }

    #[test]
    fn auto_delta_beats_fixed_choices() {
        let dom = Domain::unit_box(2).unwrap();
        let auto = laplace_constant_auto(&dom, 0.9).unwrap();
        for delta in [0.05, 0.1, 0.2, 0.3, 0.4] {
            let fixed = laplace_constant(&dom, delta, 0.9).unwrap();
            assert!(auto.c >= fixed.c * 0.999, "auto {} < fixed {}", auto.c, fixed.c);
        }
        assert!(auto.c < auto.term_measure);
        assert!(auto.c < auto.term_pointwise);
    }

    #[test]
    fn heat_constant_intermediates_positive() {
        // Omega = [0,1]^3 (n = 2 spatial + time), R = 0.3, m = 3
        let dom = Domain::unit_box(3).unwrap();
        let quad = QuadratureConfig::default();
        let report = heat_constant(&dom, 0.3, 3, &quad, 0.9).unwrap();
        for (name, v) in [
            ("M_R", report.kernel_max),
            ("|E_m|", report.modified_volume),
            ("C_R", report.c_r),
            ("C_mn", report.c_mn),
            ("term_kernel", report.term_kernel),
            ("term_pointwise", report.term_pointwise),
            ("term_measure", report.term_measure),
            ("|Omega_R|", report.shrunken_measure),
            ("c", report.c),
        ] {
            assert!(v > 0.0, "{name} not positive: {v}");
            assert!(v.is_finite(), "{name} not finite");
        }
        // c undercuts every threshold strictly
        for (name, t) in ConstantReport::Heat(report.clone()).thresholds() {
            assert!(report.c < t, "c = {} >= {name} = {t}", report.c);
        }
        // doubling safety doubles c
        let mild = heat_constant(&dom, 0.3, 3, &quad, 0.45).unwrap();
        assert_rel(mild.c, report.c / 2.0, 1e-12);
        // m < 3 rejected
        assert!(heat_constant(&dom, 0.3, 2, &quad, 0.9).is_err());
    }

    #[test]
    fn c_mn_against_closed_form_oracle() {
        // |E(1)| in dimension N has closed form
        // (N/2)^(N/2) / (4 pi ((N+2)/2)^((N+2)/2))
        let dom = Domain::unit_box(3).unwrap();
        let quad = QuadratureConfig::default();
        let report = heat_constant(&dom, 0.3, 3, &quad, 0.9).unwrap();
        let big_n = (report.n + report.m) as f64;
        let e1 = (big_n / 2.0).powf(big_n / 2.0)
            / (4.0 * PI * ((big_n + 2.0) / 2.0).powf((big_n + 2.0) / 2.0));
        let expect = big_n * e1 * (-(big_n + 2.0)).exp();
        assert_rel(report.c_mn, expect, 1e-6);
    }

    #[test]
    fn chebyshev_worked_examples() {
        assert_rel(chebyshev_constant(1.0, 0.5, 1.0).unwrap(), 0.125, 1e-15);
        assert_rel(chebyshev_constant(1.0, 1.0, 4.0).unwrap(), 2.0, 1e-15);
        // larger C gives smaller c, monotonically
        let mut last = f64::INFINITY;
        for c_sub in [0.5, 1.0, 2.0, 4.0] {
            let c = chebyshev_constant(c_sub, 0.5, 1.0).unwrap();
            assert!(c < last);
            last = c;
        }
        assert!(chebyshev_constant(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rescaling() {
        assert_eq!(rescale_constant(0.1, 1.0).unwrap(), (0.1, 0.1));
        let (thr, bound) = rescale_constant(0.1, 10.0).unwrap();
        assert_rel(thr, 1.0, 1e-15);
        assert_rel(bound, 1.0, 1e-15);
        for a in [1e-3, 1e-6] {
            let (t, b) = rescale_constant(0.1, a).unwrap();
            assert!(t < 1e-3 && b < 1e-3);
        }
        assert!(rescale_constant(0.1, 0.0).is_err());
    }

    #[test]
    fn chain_check_on_quadratic() {
        let dom = Domain::unit_box(2).unwrap();
        let field = make_quadratic(2).unwrap();
        let report = laplace_constant_auto(&dom, 0.9).unwrap();
        let quad = QuadratureConfig::default();
        // with the proof's c the hypothesis lhs <= c must fail, and the
        // unconditional growth step must hold at every sample
        let chain = laplace_chain_check(
            &field,
            &dom,
            report.delta,
            report.c,
            Exponent::Finite(2.0),
            256,
            &quad,
        )
        .unwrap();
        assert!(!chain.hypothesis_holds, "theorem violated: lhs {} <= c {}", chain.lhs, chain.c);
        assert!(chain.max_growth_violation <= 1e-9);
        assert!(chain.samples > 0);

        // force the hypothesis with a huge c (empty superlevel set: lhs = 0):
        // the conclusion bound must then hold at every sample
        let big_c = 100.0;
        let chain = laplace_chain_check(
            &field,
            &dom,
            report.delta,
            big_c,
            Exponent::Finite(2.0),
            256,
            &quad,
        )
        .unwrap();
        assert!(chain.hypothesis_holds);
        assert!(chain.max_conclusion_violation <= 1e-9);
    }
}
