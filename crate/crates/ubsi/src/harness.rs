//! End-to-end verification runs: inequality evaluation with constants from
//! the proofs, the det-Hessian counterexample sweep, lifting and
//! change-of-variables property checks, derivative-formula verification,
//! and the rectangle-family demonstration.

use crate::averages::{
    average, average_derivative, AverageFamily, AverageKind,
};
use crate::constants::{heat_constant_auto, laplace_constant_auto, ConstantReport};
use crate::error::{Error, Result};
use crate::fields::{
    heat_catalog, laplace_catalog, make_gressman, make_rectangle_family, operator_value, DiffOp,
    gressman_sup_unit_square, RectangleFamily, ScalarField,
};
use crate::geometry::Domain;
use crate::levelsets::{
    for_each_cell, lp_norm, measure_superlevel, Exponent, LevelSetEstimate, NormEstimate,
};
use crate::quadrature::QuadratureConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Laplace,
    Heat,
    DetHess,
}

impl OperatorKind {
    fn diff_op(&self) -> DiffOp {
        match self {
            OperatorKind::Laplace => DiffOp::Laplacian,
            OperatorKind::Heat => DiffOp::Heat,
            OperatorKind::DetHess => DiffOp::DetHess,
        }
    }
}

/// Where the threshold c came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CProvenance {
    Constants(ConstantReport),
    User { value: f64 },
}

/// Grid verification of the operator lower bound Du >= 1 (the theorems'
/// hypothesis). FD-backed checks get a noise allowance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub operator: OperatorKind,
    pub min_value: f64,
    pub min_point: Vec<f64>,
    pub degraded: bool,
    pub ok: bool,
}

pub fn verify_hypothesis(
    field: &ScalarField,
    dom: &Domain,
    operator: OperatorKind,
    resolution: usize,
) -> Result<HypothesisCheck> {
    let mut min_value = f64::INFINITY;
    let mut min_point = Vec::new();
    let mut degraded = false;
    let mut failure: Option<(Vec<f64>, f64)> = None;
    let mut eval_error: Option<Error> = None;
    for_each_cell(dom, resolution, |center, _| {
        if failure.is_some() || eval_error.is_some() {
            return;
        }
        let (v, fd) = match operator_value(field, operator.diff_op(), center) {
            Ok(pair) => pair,
            Err(e) => {
                eval_error = Some(e);
                return;
            }
        };
        degraded |= fd;
        if v < min_value {
            min_value = v;
            min_point = center.to_vec();
        }
        let tol = if fd { 1e-6 } else { 1e-12 };
        if v < 1.0 - tol {
            failure = Some((center.to_vec(), v));
        }
    });
    if let Some(e) = eval_error {
        return Err(e);
    }
    if let Some((point, value)) = failure {
        return Err(Error::HypothesisViolated {
            operator: format!("{operator:?}"),
            bound: 1.0,
            point,
            value,
        });
    }
    Ok(HypothesisCheck {
        operator,
        min_value,
        min_point,
        degraded,
        ok: true,
    })
}

/// One p-row of an inequality run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityRow {
    pub p: Exponent,
    pub norm: NormEstimate,
    pub superlevel: LevelSetEstimate,
    /// ||u||_p * |{|u| >= c}|^(1/p')
    pub lhs: f64,
    pub verdict: bool,
}

/// Full record of one field on one domain: the verdict is recomputable
/// from the stored intermediates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub field_label: String,
    pub domain: Domain,
    pub operator: OperatorKind,
    pub c: f64,
    pub c_provenance: CProvenance,
    pub resolution: usize,
    pub hypothesis: HypothesisCheck,
    pub rows: Vec<InequalityRow>,
}

impl InequalityReport {
    pub fn all_verdicts_true(&self) -> bool {
        self.rows.iter().all(|r| r.verdict)
    }
}

pub fn inequality_lhs(norm_value: f64, superlevel_measure: f64, p: Exponent) -> f64 {
    norm_value * p.conjugate().measure_power(superlevel_measure)
}

/// Evaluate the uniformly balancing sublevel inequality for one field at
/// every requested p, against one shared c. The operator hypothesis is
/// grid-verified first; a violated cell refuses the run.
#[allow(clippy::too_many_arguments)]
pub fn check_inequality(
    field: &ScalarField,
    dom: &Domain,
    operator: OperatorKind,
    p_list: &[Exponent],
    c_source: Option<f64>,
    resolution: usize,
    quad: &QuadratureConfig,
    safety: f64,
    heat_extra_dim: usize,
) -> Result<InequalityReport> {
    let hypothesis = verify_hypothesis(field, dom, operator, resolution)?;
    let (c, provenance) = match c_source {
        Some(value) => (value, CProvenance::User { value }),
        None => match operator {
            OperatorKind::Laplace => {
                let report = laplace_constant_auto(dom, safety)?;
                (report.c, CProvenance::Constants(ConstantReport::Laplace(report)))
            }
            OperatorKind::Heat => {
                let report = heat_constant_auto(dom, heat_extra_dim, quad, safety)?;
                (report.c, CProvenance::Constants(ConstantReport::Heat(report)))
            }
            OperatorKind::DetHess => {
                return Err(Error::Unsupported(
                    "no constructive constant exists for the det-Hessian class; supply c".into(),
                ))
            }
        },
    };
    // the superlevel set depends on c only, shared by every p-row
    let superlevel = measure_superlevel(field, dom, c, resolution)?;
    let mut rows = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let norm = lp_norm(field, dom, p, resolution)?;
        let lhs = inequality_lhs(norm.value, superlevel.measure, p);
        rows.push(InequalityRow {
            p,
            norm,
            superlevel: superlevel.clone(),
            lhs,
            verdict: lhs >= c,
        });
    }
    Ok(InequalityReport {
        field_label: field.label.clone(),
        domain: dom.clone(),
        operator,
        c,
        c_provenance: provenance,
        resolution,
        hypothesis,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Counterexample sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_param: u32,
    /// dense grid maximum of |u_N| over the unit square
    pub sup_grid: f64,
    /// e/N for N >= 2 (e sin 1 for N = 1)
    pub sup_analytic: f64,
    pub superlevel_measure: f64,
    pub superlevel_outer: f64,
    /// sup * measure: the p = infinity product
    pub lhs_product: f64,
    /// min of Du_N on a 200 x 200 grid
    pub dethess_min: f64,
    pub hypothesis_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub c: f64,
    pub rows: Vec<SweepRow>,
    /// first N at which the superlevel set is empty
    pub first_empty: Option<u32>,
}

/// Sweep the Gressman family u_N = e^x sin(Ny)/N on the unit square: the
/// det-Hessian hypothesis holds at every N, yet the superlevel set at any
/// fixed threshold empties once N > e/c, so no uniform constant exists.
pub fn counterexample_sweep(
    c: f64,
    n_range: std::ops::RangeInclusive<u32>,
    resolution: usize,
) -> Result<SweepReport> {
    if c <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "c",
            value: c,
            reason: "sweep threshold must be positive",
        });
    }
    let dom = Domain::unit_box(2)?;
    let mut rows = Vec::new();
    let mut first_empty = None;
    for big_n in n_range {
        let u = make_gressman(big_n)?;
        let level = measure_superlevel(&u, &dom, c, resolution)?;
        let mut sup_grid: f64 = 0.0;
        for_each_cell(&dom, resolution, |center, _| {
            sup_grid = sup_grid.max(u.eval(center).abs());
        });
        let mut dethess_min = f64::INFINITY;
        for_each_cell(&dom, 200, |center, _| {
            dethess_min = dethess_min.min(u.dethess(center).expect("analytic dethess"));
        });
        let lhs_product = sup_grid * level.measure;
        if level.measure == 0.0 && first_empty.is_none() {
            first_empty = Some(big_n);
        }
        rows.push(SweepRow {
            n_param: big_n,
            sup_grid,
            sup_analytic: gressman_sup_unit_square(big_n),
            superlevel_measure: level.measure,
            superlevel_outer: level.outer,
            lhs_product,
            dethess_min,
            hypothesis_ok: dethess_min >= 1.0,
        });
    }
    Ok(SweepReport {
        c,
        rows,
        first_empty,
    })
}

// ---------------------------------------------------------------------------
// Lifting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftingReport {
    pub base_lhs: f64,
    pub base_verdict: bool,
    pub lifted_lhs: f64,
    /// c |Omega_2|
    pub bound: f64,
    pub verdict: bool,
    /// |{|v| >= c}| against |{|u| >= c}| * |Omega_2| (Fubini for product sets)
    pub product_measure: f64,
    pub factored_measure: f64,
}

/// Lift u on Omega_1 to v(x, y) = u(x) on Omega_1 x Omega_2 and verify
/// ||v||_p |{|v| >= c}|^(1/p') >= c |Omega_2|.
pub fn lifting_check(
    field: &ScalarField,
    dom1: &Domain,
    dom2: &Domain,
    c: f64,
    p: Exponent,
    resolution: usize,
) -> Result<LiftingReport> {
    let (i1, i2) = match (dom1, dom2) {
        (Domain::Box { intervals: a }, Domain::Box { intervals: b }) => (a.clone(), b.clone()),
        _ => {
            return Err(Error::Unsupported(
                "lifting check needs box domains on both factors".into(),
            ))
        }
    };
    let n1 = i1.len();
    let base_norm = lp_norm(field, dom1, p, resolution)?;
    let base_level = measure_superlevel(field, dom1, c, resolution)?;
    let base_lhs = inequality_lhs(base_norm.value, base_level.measure, p);

    let mut intervals = i1;
    intervals.extend(i2);
    let product = Domain::Box { intervals };
    let inner = field.clone();
    let lifted = ScalarField::from_closure(
        format!("lifted({})", field.label),
        crate::fields::Arity::Space(product.dim()),
        move |point| inner.eval(&point[..n1]),
    );
    let lifted_norm = lp_norm(&lifted, &product, p, resolution)?;
    let lifted_level = measure_superlevel(&lifted, &product, c, resolution)?;
    let lifted_lhs = inequality_lhs(lifted_norm.value, lifted_level.measure, p);
    let bound = c * dom2.measure();
    Ok(LiftingReport {
        base_lhs,
        base_verdict: base_lhs >= c,
        lifted_lhs,
        bound,
        verdict: lifted_lhs >= bound,
        product_measure: lifted_level.measure,
        factored_measure: base_level.measure * dom2.measure(),
    })
}

// ---------------------------------------------------------------------------
// Change of variables
// ---------------------------------------------------------------------------

/// Row-major square matrix for the linear map phi.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub rows: Vec<Vec<f64>>,
}

impl LinearMap {
    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Determinant by cofactor expansion; the maps here are tiny.
    pub fn det(&self) -> f64 {
        let n = self.dim();
        match n {
            0 => 1.0,
            1 => self.rows[0][0],
            2 => self.rows[0][0] * self.rows[1][1] - self.rows[0][1] * self.rows[1][0],
            _ => (0..n)
                .map(|j| {
                    let minor = LinearMap {
                        rows: self.rows[1..]
                            .iter()
                            .map(|row| {
                                row.iter()
                                    .enumerate()
                                    .filter(|(k, _)| *k != j)
                                    .map(|(_, v)| *v)
                                    .collect()
                            })
                            .collect(),
                    };
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    sign * self.rows[0][j] * minor.det()
                })
                .sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovReport {
    pub det: f64,
    /// M = sup |det J phi^-1| = 1/|det phi| for linear maps
    pub jacobian_bound: f64,
    pub original_lhs: f64,
    pub mapped_lhs: f64,
    /// c / M
    pub mapped_bound: f64,
    pub verdict: bool,
}

/// Verify the change-of-variables chain c <= lhs(u, Omega) <= M lhs' for an
/// invertible linear map phi. The mapped quantities are midpoint sums over
/// the image cells phi(cell), whose centers are phi(center) and volumes
/// |det phi| vol: u o phi^-1 is evaluated without inverting phi.
pub fn change_of_variables_check(
    field: &ScalarField,
    dom: &Domain,
    map: &LinearMap,
    c: f64,
    p: Exponent,
    resolution: usize,
) -> Result<CovReport> {
    if map.dim() != dom.dim() {
        return Err(Error::InvalidDimension(map.dim()));
    }
    let det = map.det();
    if det.abs() < 1e-12 {
        return Err(Error::InvalidParameter {
            name: "phi",
            value: det,
            reason: "change of variables needs an invertible map",
        });
    }
    let jac = det.abs();
    let jacobian_bound = 1.0 / jac;

    let norm = lp_norm(field, dom, p, resolution)?;
    let level = measure_superlevel(field, dom, c, resolution)?;
    let original_lhs = inequality_lhs(norm.value, level.measure, p);

    // midpoint sums over the image partition
    let mut mapped_norm_p = 0.0;
    let mut mapped_measure = 0.0;
    let mut mapped_sup: f64 = 0.0;
    for_each_cell(dom, resolution, |center, vol| {
        let v = field.eval(center).abs();
        let image_vol = jac * vol;
        match p {
            Exponent::Finite(pf) => mapped_norm_p += v.powf(pf) * image_vol,
            Exponent::Infinity => mapped_sup = mapped_sup.max(v),
        }
        if v >= c {
            mapped_measure += image_vol;
        }
    });
    let mapped_norm = match p {
        Exponent::Finite(pf) => mapped_norm_p.powf(1.0 / pf),
        Exponent::Infinity => mapped_sup,
    };
    let mapped_lhs = inequality_lhs(mapped_norm, mapped_measure, p);
    let mapped_bound = c * jacobian_bound.recip();
    // c <= M * lhs' i.e. lhs' >= c / M
    let verdict = mapped_lhs >= c / jacobian_bound;
    Ok(CovReport {
        det,
        jacobian_bound,
        original_lhs,
        mapped_lhs,
        mapped_bound,
        verdict,
    })
}

// ---------------------------------------------------------------------------
// Derivative-formula verification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeRow {
    pub kind: String,
    pub n: usize,
    pub field_label: String,
    pub radius: f64,
    pub formula: f64,
    pub finite_difference: f64,
    pub rel_err: f64,
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeTable {
    pub rows: Vec<DerivativeRow>,
    pub max_rel_err_ball: f64,
    pub max_rel_err_heat: f64,
    pub ball_tolerance: f64,
    pub heat_tolerance: f64,
    pub ok: bool,
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-6 {
        // a vanishing derivative (caloric fields) is matched absolutely:
        // below 1e-6 both sides are quadrature/differencing noise
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Compare both derivative formulas against centered finite differences of
/// the corresponding average, across the analytic catalogs.
pub fn verify_derivative_formulas(
    ball_dims: &[usize],
    heat_dims: &[usize],
    quad: &QuadratureConfig,
) -> Result<DerivativeTable> {
    let ball_tolerance = 1e-5;
    let heat_tolerance = 1e-4;
    let r_max = 1.0;
    let radii = [0.3, 0.6, 0.9];
    let mut rows = Vec::new();
    let mut max_ball: f64 = 0.0;
    let mut max_heat: f64 = 0.0;

    for &n in ball_dims {
        for field in laplace_catalog(n)? {
            let fam = AverageFamily::new(
                AverageKind::Ball,
                field.clone(),
                vec![0.0; n],
                r_max * 1.01,
                quad.clone(),
            )?;
            for &frac in &radii {
                let r = frac * r_max;
                let h = 1e-3 * r;
                let d = average_derivative(&fam, r)?;
                let fd = (average(&fam, r + h)? - average(&fam, r - h)?) / (2.0 * h);
                let err = rel_err(d.value, fd);
                max_ball = max_ball.max(err);
                rows.push(DerivativeRow {
                    kind: "ball".into(),
                    n,
                    field_label: field.label.clone(),
                    radius: r,
                    formula: d.value,
                    finite_difference: fd,
                    rel_err: err,
                    degraded: d.degraded_accuracy,
                });
            }
        }
    }

    for &n in heat_dims {
        for field in heat_catalog(n)? {
            let fam = AverageFamily::new(
                AverageKind::Heatball,
                field.clone(),
                vec![0.0; n + 1],
                r_max * 1.05,
                quad.clone(),
            )?;
            for &frac in &radii {
                let r = frac * r_max;
                let h = 5e-3 * r;
                let d = average_derivative(&fam, r)?;
                let fd = (average(&fam, r + h)? - average(&fam, r - h)?) / (2.0 * h);
                let err = rel_err(d.value, fd);
                max_heat = max_heat.max(err);
                rows.push(DerivativeRow {
                    kind: "heatball".into(),
                    n,
                    field_label: field.label.clone(),
                    radius: r,
                    formula: d.value,
                    finite_difference: fd,
                    rel_err: err,
                    degraded: d.degraded_accuracy,
                });
            }
        }
    }
    let ok = max_ball <= ball_tolerance && max_heat <= heat_tolerance;
    Ok(DerivativeTable {
        rows,
        max_rel_err_ball: max_ball,
        max_rel_err_heat: max_heat,
        ball_tolerance,
        heat_tolerance,
        ok,
    })
}

// ---------------------------------------------------------------------------
// Rectangle family demonstration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RectangleDemo {
    pub family: RectangleFamily,
    /// the measure's guaranteed lower bound 1 - 2 delta
    pub lower_bound: f64,
    /// approximation budget 2 delta + delta^2/8 a Runge approximant meets
    pub budget: f64,
    pub measure_ok: bool,
    pub gaps_ok: bool,
    pub containment_ok: bool,
}

/// Emit the K(delta) construction with the bounds the existence proof
/// needs; the Runge approximants themselves are non-constructive, so only
/// the target accuracy is documented.
pub fn rectangle_demo(delta: f64) -> Result<RectangleDemo> {
    let family = make_rectangle_family(delta)?;
    let lower_bound = 1.0 - 2.0 * delta;
    let budget = 2.0 * delta + delta * delta / 8.0;
    let measure_ok = family.total_measure > lower_bound;
    let gap = delta * delta / 4.0;
    let gaps_ok = family
        .rectangles
        .windows(2)
        .all(|w| (w[1][1].0 - w[0][1].1 - gap).abs() < 1e-12);
    let containment_ok = family.rectangles.iter().all(|r| {
        r[0].0 >= 0.0 && r[0].1 <= 1.0 && r[1].0 >= 0.0 && r[1].1 <= 1.0 + 1e-12
    });
    Ok(RectangleDemo {
        family,
        lower_bound,
        budget,
        measure_ok,
        gaps_ok,
        containment_ok,
    })
}
