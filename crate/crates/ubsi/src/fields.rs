//! Catalog of analytic scalar fields with closed-form differential-operator
//! values (Laplacian, heat operator Hu = Delta_x u - u_t, det-Hessian),
//! plus centered finite-difference fallbacks for cross-checking.
//!
//! Sign convention for the det-Hessian operator, fixed throughout:
//! Du = (u_xy)^2 - u_xx u_yy, i.e. minus the Hessian determinant. This is
//! the convention under which the Gressman family satisfies Du_N = e^(2x).

use crate::error::{Error, Result};
use crate::geometry::norm_sq;
use std::collections::BTreeMap;
use std::sync::Arc;

type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Whether a field lives on R^n or on space-time R^(n+1) (time last).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Space(usize),
    SpaceTime(usize),
}

impl Arity {
    /// Length of a point accepted by the evaluator.
    pub fn point_dim(&self) -> usize {
        match self {
            Arity::Space(n) => *n,
            Arity::SpaceTime(n) => *n + 1,
        }
    }

    pub fn spatial_dim(&self) -> usize {
        match self {
            Arity::Space(n) | Arity::SpaceTime(n) => *n,
        }
    }
}

/// An evaluable real field with optional analytic operator values.
#[derive(Clone)]
pub struct ScalarField {
    pub arity: Arity,
    pub label: String,
    evaluator: EvalFn,
    analytic_laplacian: Option<EvalFn>,
    analytic_heat: Option<EvalFn>,
    analytic_dethess: Option<EvalFn>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("arity", &self.arity)
            .field("label", &self.label)
            .field("analytic_laplacian", &self.analytic_laplacian.is_some())
            .field("analytic_heat", &self.analytic_heat.is_some())
            .field("analytic_dethess", &self.analytic_dethess.is_some())
            .finish()
    }
}

impl ScalarField {
    fn new(label: impl Into<String>, arity: Arity, evaluator: EvalFn) -> Self {
        Self {
            arity,
            label: label.into(),
            evaluator,
            analytic_laplacian: None,
            analytic_heat: None,
            analytic_dethess: None,
        }
    }

    fn with_laplacian(mut self, f: EvalFn) -> Self {
        self.analytic_laplacian = Some(f);
        self
    }

    fn with_heat(mut self, f: EvalFn) -> Self {
        self.analytic_heat = Some(f);
        self
    }

    fn with_dethess(mut self, f: EvalFn) -> Self {
        self.analytic_dethess = Some(f);
        self
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.arity.point_dim(), "{}", self.label);
        (self.evaluator)(point)
    }

    pub fn laplacian(&self, point: &[f64]) -> Option<f64> {
        self.analytic_laplacian.as_ref().map(|f| f(point))
    }

    pub fn heat(&self, point: &[f64]) -> Option<f64> {
        self.analytic_heat.as_ref().map(|f| f(point))
    }

    pub fn dethess(&self, point: &[f64]) -> Option<f64> {
        self.analytic_dethess.as_ref().map(|f| f(point))
    }

    pub fn has_laplacian(&self) -> bool {
        self.analytic_laplacian.is_some()
    }

    pub fn has_heat(&self) -> bool {
        self.analytic_heat.is_some()
    }

    pub fn has_dethess(&self) -> bool {
        self.analytic_dethess.is_some()
    }

    /// u + c0. The operators kill constants, so the analytic values carry
    /// over unchanged.
    pub fn shifted(&self, c0: f64) -> ScalarField {
        let base = self.evaluator.clone();
        ScalarField {
            arity: self.arity,
            label: format!("{}{:+}", self.label, c0),
            evaluator: Arc::new(move |p| base(p) + c0),
            analytic_laplacian: self.analytic_laplacian.clone(),
            analytic_heat: self.analytic_heat.clone(),
            analytic_dethess: self.analytic_dethess.clone(),
        }
    }

    /// Pointwise sum; linear operator values add, the nonlinear det-Hessian
    /// does not survive.
    pub fn sum(&self, other: &ScalarField) -> Result<ScalarField> {
        if self.arity != other.arity {
            return Err(Error::FieldParameter {
                name: format!("{} + {}", self.label, other.label),
                reason: "arity mismatch".into(),
            });
        }
        let (a, b) = (self.evaluator.clone(), other.evaluator.clone());
        let combine = |x: &Option<EvalFn>, y: &Option<EvalFn>| -> Option<EvalFn> {
            match (x, y) {
                (Some(x), Some(y)) => {
                    let (x, y) = (x.clone(), y.clone());
                    Some(Arc::new(move |p: &[f64]| x(p) + y(p)) as EvalFn)
                }
                _ => None,
            }
        };
        Ok(ScalarField {
            arity: self.arity,
            label: format!("{}+{}", self.label, other.label),
            evaluator: Arc::new(move |p| a(p) + b(p)),
            analytic_laplacian: combine(&self.analytic_laplacian, &other.analytic_laplacian),
            analytic_heat: combine(&self.analytic_heat, &other.analytic_heat),
            analytic_dethess: None,
        })
    }

    /// View a space-time field as independent of `m` extra leading spatial
    /// variables: u~(xi, x, t) = u(x, t), so Hu~ = Hu.
    pub fn lift(&self, m: usize) -> Result<ScalarField> {
        let n = match self.arity {
            Arity::SpaceTime(n) => n,
            Arity::Space(_) => {
                return Err(Error::FieldParameter {
                    name: self.label.clone(),
                    reason: "lifting applies to space-time fields".into(),
                })
            }
        };
        let lift_fn = |f: &EvalFn| -> EvalFn {
            let f = f.clone();
            Arc::new(move |p: &[f64]| f(&p[m..]))
        };
        Ok(ScalarField {
            arity: Arity::SpaceTime(n + m),
            label: format!("lift[{m}]({})", self.label),
            evaluator: lift_fn(&self.evaluator),
            analytic_laplacian: self.analytic_laplacian.as_ref().map(lift_fn),
            analytic_heat: self.analytic_heat.as_ref().map(lift_fn),
            analytic_dethess: None,
        })
    }

    /// Build a field from closures (for user-supplied fields and tests).
    pub fn from_closure(
        label: impl Into<String>,
        arity: Arity,
        evaluator: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(label, arity, Arc::new(evaluator))
    }

    pub fn with_analytic_laplacian(
        mut self,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.analytic_laplacian = Some(Arc::new(f));
        self
    }

    pub fn with_analytic_heat(mut self, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.analytic_heat = Some(Arc::new(f));
        self
    }
}

// ---------------------------------------------------------------------------
// Canonical witnesses
// ---------------------------------------------------------------------------

/// u(x) = |x|^2 / 2n, the canonical witness with Delta u = 1.
pub fn make_quadratic(n: usize) -> Result<ScalarField> {
    if n == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let scale = 1.0 / (2.0 * n as f64);
    Ok(ScalarField::new(
        format!("quadratic(n={n})"),
        Arity::Space(n),
        Arc::new(move |p| norm_sq(p) * scale),
    )
    .with_laplacian(Arc::new(|_| 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeatWitness {
    /// u = -t, Hu = 1.
    Drift,
    /// u = |x|^2/2n + t, Hu = 0.
    Caloric,
    /// Drift plus a constant (invariance testing).
    Shifted(f64),
}

pub fn make_heat_witness(n: usize, kind: HeatWitness) -> Result<ScalarField> {
    if n == 0 {
        return Err(Error::InvalidDimension(0));
    }
    Ok(match kind {
        HeatWitness::Drift => ScalarField::new(
            format!("drift(n={n})"),
            Arity::SpaceTime(n),
            Arc::new(move |p| -p[n]),
        )
        .with_heat(Arc::new(|_| 1.0))
        .with_laplacian(Arc::new(|_| 0.0)),
        HeatWitness::Caloric => {
            let scale = 1.0 / (2.0 * n as f64);
            ScalarField::new(
                format!("caloric(n={n})"),
                Arity::SpaceTime(n),
                Arc::new(move |p| norm_sq(&p[..n]) * scale + p[n]),
            )
            .with_heat(Arc::new(|_| 0.0))
        }
        HeatWitness::Shifted(c0) => make_heat_witness(n, HeatWitness::Drift)?.shifted(c0),
    })
}

/// The Gressman family u_N(x, y) = e^x sin(N y) / N on R^2, with
/// Du_N = e^(2x) under the fixed det-Hessian convention.
pub fn make_gressman(big_n: u32) -> Result<ScalarField> {
    if big_n == 0 {
        return Err(Error::InvalidParameter {
            name: "N",
            value: 0.0,
            reason: "Gressman family needs N >= 1",
        });
    }
    let nf = big_n as f64;
    Ok(ScalarField::new(
        format!("gressman(N={big_n})"),
        Arity::Space(2),
        Arc::new(move |p| p[0].exp() * (nf * p[1]).sin() / nf),
    )
    .with_dethess(Arc::new(|p| (2.0 * p[0]).exp()))
    // u_xx + u_yy = (1/N - N) e^x sin(Ny)
    .with_laplacian(Arc::new(move |p| {
        (1.0 / nf - nf) * p[0].exp() * (nf * p[1]).sin()
    })))
}

/// sup of |u_N| over the closed unit square: e/N once the sine reaches 1
/// inside [0,1] (N >= 2); for N = 1 the maximum of sin is at y = 1.
pub fn gressman_sup_unit_square(big_n: u32) -> f64 {
    let e = std::f64::consts::E;
    if big_n >= 2 {
        e / big_n as f64
    } else {
        e * 1.0f64.sin()
    }
}

/// Harmonic (caloric-free) polynomials for perturbation tests; all have
/// Delta u = 0 exactly.
pub fn make_harmonic(n: usize, variant: usize) -> Result<ScalarField> {
    if n == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let zero: EvalFn = Arc::new(|_| 0.0);
    let field = match (n, variant % 3) {
        (1, 0) => ScalarField::new("harmonic(x)", Arity::Space(1), Arc::new(|p: &[f64]| p[0])),
        (1, 1) => ScalarField::new(
            "harmonic(2x-1)",
            Arity::Space(1),
            Arc::new(|p: &[f64]| 2.0 * p[0] - 1.0),
        ),
        (1, _) => ScalarField::new(
            "harmonic(0.5x+0.25)",
            Arity::Space(1),
            Arc::new(|p: &[f64]| 0.5 * p[0] + 0.25),
        ),
        (_, 0) => ScalarField::new(
            format!("harmonic(x1*x2,n={n})"),
            Arity::Space(n),
            Arc::new(|p: &[f64]| p[0] * p[1]),
        ),
        (_, 1) => ScalarField::new(
            format!("harmonic(x1^2-x2^2,n={n})"),
            Arity::Space(n),
            Arc::new(|p: &[f64]| p[0] * p[0] - p[1] * p[1]),
        ),
        (_, _) => ScalarField::new(
            format!("harmonic(x1^3-3x1x2^2,n={n})"),
            Arity::Space(n),
            Arc::new(|p: &[f64]| p[0].powi(3) - 3.0 * p[0] * p[1] * p[1]),
        ),
    };
    Ok(field.with_laplacian(zero))
}

/// |x|^2/2n plus a scaled harmonic: still Delta u = 1 exactly.
pub fn make_quadratic_plus_harmonic(n: usize, amplitude: f64, variant: usize) -> Result<ScalarField> {
    let quad = make_quadratic(n)?;
    let harm = make_harmonic(n, variant)?;
    let scaled = ScalarField {
        arity: harm.arity,
        label: format!("{:.2}*{}", amplitude, harm.label),
        evaluator: {
            let f = harm.evaluator.clone();
            Arc::new(move |p: &[f64]| amplitude * f(p))
        },
        analytic_laplacian: Some(Arc::new(|_| 0.0)),
        analytic_heat: None,
        analytic_dethess: None,
    };
    quad.sum(&scaled)
}

// ---------------------------------------------------------------------------
// Derivative-formula catalogs
// ---------------------------------------------------------------------------

/// Fields on R^n with analytic Laplacians, for exercising the ball
/// derivative formula. At least ten per supported dimension.
pub fn laplace_catalog(n: usize) -> Result<Vec<ScalarField>> {
    if n == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let mut out = vec![
        make_quadratic(n)?,
        make_harmonic(n, 0)?,
        make_harmonic(n, 1)?,
        make_quadratic_plus_harmonic(n, 0.5, 0)?,
        make_quadratic_plus_harmonic(n, 2.0, 1)?,
    ];
    out.push(
        ScalarField::new("x1^2", Arity::Space(n), Arc::new(|p: &[f64]| p[0] * p[0]))
            .with_laplacian(Arc::new(|_| 2.0)),
    );
    out.push(
        ScalarField::new("x1^3", Arity::Space(n), Arc::new(|p: &[f64]| p[0].powi(3)))
            .with_laplacian(Arc::new(|p: &[f64]| 6.0 * p[0])),
    );
    out.push(
        ScalarField::new(
            "sum(xi^4)",
            Arity::Space(n),
            Arc::new(|p: &[f64]| p.iter().map(|x| x.powi(4)).sum()),
        )
        .with_laplacian(Arc::new(|p: &[f64]| {
            12.0 * p.iter().map(|x| x * x).sum::<f64>()
        })),
    );
    out.push(
        ScalarField::new(
            "gaussian",
            Arity::Space(n),
            Arc::new(|p: &[f64]| (-norm_sq(p) / 2.0).exp()),
        )
        .with_laplacian(Arc::new(move |p: &[f64]| {
            (norm_sq(p) - n as f64) * (-norm_sq(p) / 2.0).exp()
        })),
    );
    out.push(
        ScalarField::new("exp(x1)", Arity::Space(n), Arc::new(|p: &[f64]| p[0].exp()))
            .with_laplacian(Arc::new(|p: &[f64]| p[0].exp())),
    );
    out.push(
        ScalarField::new("sin(x1)", Arity::Space(n), Arc::new(|p: &[f64]| p[0].sin()))
            .with_laplacian(Arc::new(|p: &[f64]| -p[0].sin())),
    );
    if n >= 2 {
        out.push(
            ScalarField::new(
                "x1^2*x2^2",
                Arity::Space(n),
                Arc::new(|p: &[f64]| p[0] * p[0] * p[1] * p[1]),
            )
            .with_laplacian(Arc::new(|p: &[f64]| {
                2.0 * (p[0] * p[0] + p[1] * p[1])
            })),
        );
    } else {
        out.push(
            ScalarField::new("cosh(x)", Arity::Space(1), Arc::new(|p: &[f64]| p[0].cosh()))
                .with_laplacian(Arc::new(|p: &[f64]| p[0].cosh())),
        );
    }
    Ok(out)
}

/// Space-time fields with analytic Hu, for the heatball derivative formula.
pub fn heat_catalog(n: usize) -> Result<Vec<ScalarField>> {
    if n == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let mut out = vec![
        make_heat_witness(n, HeatWitness::Drift)?,
        make_heat_witness(n, HeatWitness::Caloric)?,
        make_heat_witness(n, HeatWitness::Shifted(5.0))?,
    ];
    let scale = 1.0 / (2.0 * n as f64);
    out.push(
        ScalarField::new(
            format!("quad_space(n={n})"),
            Arity::SpaceTime(n),
            Arc::new(move |p| norm_sq(&p[..n]) * scale),
        )
        .with_heat(Arc::new(|_| 1.0)),
    );
    out.push(
        ScalarField::new("t^2", Arity::SpaceTime(n), Arc::new(move |p: &[f64]| p[n] * p[n]))
            .with_heat(Arc::new(move |p: &[f64]| -2.0 * p[n])),
    );
    out.push(
        ScalarField::new(
            "x1*t",
            Arity::SpaceTime(n),
            Arc::new(move |p: &[f64]| p[0] * p[n]),
        )
        .with_heat(Arc::new(|p: &[f64]| -p[0])),
    );
    // caloric: x1^2 + 2t
    out.push(
        ScalarField::new(
            "x1^2+2t",
            Arity::SpaceTime(n),
            Arc::new(move |p: &[f64]| p[0] * p[0] + 2.0 * p[n]),
        )
        .with_heat(Arc::new(|_| 0.0)),
    );
    // caloric: e^(x1 + t)
    out.push(
        ScalarField::new(
            "exp(x1+t)",
            Arity::SpaceTime(n),
            Arc::new(move |p: &[f64]| (p[0] + p[n]).exp()),
        )
        .with_heat(Arc::new(|_| 0.0)),
    );
    // caloric: sin(x1) e^(-t)
    out.push(
        ScalarField::new(
            "sin(x1)exp(-t)",
            Arity::SpaceTime(n),
            Arc::new(move |p: &[f64]| p[0].sin() * (-p[n]).exp()),
        )
        .with_heat(Arc::new(|_| 0.0)),
    );
    // not caloric: sin(x1) e^t, Hu = -2 sin(x1) e^t
    out.push(
        ScalarField::new(
            "sin(x1)exp(t)",
            Arity::SpaceTime(n),
            Arc::new(move |p: &[f64]| p[0].sin() * p[n].exp()),
        )
        .with_heat(Arc::new(move |p: &[f64]| -2.0 * p[0].sin() * p[n].exp())),
    );
    out.push(
        ScalarField::new(
            "x1^4",
            Arity::SpaceTime(n),
            Arc::new(|p: &[f64]| p[0].powi(4)),
        )
        .with_heat(Arc::new(|p: &[f64]| 12.0 * p[0] * p[0])),
    );
    // shifted fundamental solution: caloric where t + 2 > 0
    out.push(
        ScalarField::new(
            format!("heat_kernel_shift(n={n})"),
            Arity::SpaceTime(n),
            Arc::new(move |p: &[f64]| {
                let s = p[n] + 2.0;
                (-norm_sq(&p[..n]) / (4.0 * s)).exp() / s.powf(n as f64 / 2.0)
            }),
        )
        .with_heat(Arc::new(|_| 0.0)),
    );
    Ok(out)
}

// ---------------------------------------------------------------------------
// Rectangle family for the Runge-construction demonstration
// ---------------------------------------------------------------------------

/// The disjoint thin rectangles K(delta) covering most of the unit square.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RectangleFamily {
    pub delta: f64,
    /// [(x_lo, x_hi), (y_lo, y_hi)] per rectangle.
    pub rectangles: Vec<[(f64, f64); 2]>,
    pub count: usize,
    pub total_measure: f64,
}

pub fn make_rectangle_family(delta: f64) -> Result<RectangleFamily> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "rectangle family needs 0 < delta < 1/2",
        });
    }
    let count = ((4.0 - delta * delta) / (4.0 * delta + delta * delta)).floor() as usize;
    let x_span = (delta / 4.0, 1.0 - delta / 4.0);
    let pitch = delta + delta * delta / 4.0;
    let rectangles: Vec<[(f64, f64); 2]> = (1..=count)
        .map(|i| {
            let top = i as f64 * pitch;
            [x_span, (top - delta, top)]
        })
        .collect();
    let total_measure = delta * (1.0 - delta / 2.0) * count as f64;
    Ok(RectangleFamily {
        delta,
        rectangles,
        count,
        total_measure,
    })
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffOp {
    Laplacian,
    Heat,
    DetHess,
}

/// Default step balancing O(h^2) truncation against rounding.
pub fn default_fd_step(point: &[f64]) -> f64 {
    1e-4 * (1.0 + norm_sq(point).sqrt())
}

/// Centered second differences, O(h^2). For `Heat` the spatial Laplacian
/// runs over all but the last coordinate; `DetHess` expects a 2-D field.
pub fn finite_difference_operator(
    field: &ScalarField,
    op: DiffOp,
    point: &[f64],
    h: f64,
) -> Result<f64> {
    let dim = point.len();
    let mut buf = point.to_vec();
    let mut second = |axis: usize| -> f64 {
        let center = field.eval(point);
        buf[axis] = point[axis] + h;
        let plus = field.eval(&buf);
        buf[axis] = point[axis] - h;
        let minus = field.eval(&buf);
        buf[axis] = point[axis];
        (plus - 2.0 * center + minus) / (h * h)
    };
    match op {
        DiffOp::Laplacian => Ok((0..dim).map(&mut second).sum()),
        DiffOp::Heat => {
            let spatial: f64 = (0..dim - 1).map(&mut second).sum();
            buf[dim - 1] = point[dim - 1] + h;
            let plus = field.eval(&buf);
            buf[dim - 1] = point[dim - 1] - h;
            let minus = field.eval(&buf);
            buf[dim - 1] = point[dim - 1];
            Ok(spatial - (plus - minus) / (2.0 * h))
        }
        DiffOp::DetHess => {
            if dim != 2 {
                return Err(Error::FieldParameter {
                    name: field.label.clone(),
                    reason: "det-Hessian finite difference is 2-D only".into(),
                });
            }
            let uxx = second(0);
            let uyy = second(1);
            let mut at = |dx: f64, dy: f64| -> f64 {
                buf[0] = point[0] + dx;
                buf[1] = point[1] + dy;
                let v = field.eval(&buf);
                buf[0] = point[0];
                buf[1] = point[1];
                v
            };
            let uxy = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
            Ok(uxy * uxy - uxx * uyy)
        }
    }
}

/// Analytic operator value if present, else the finite-difference fallback;
/// the flag records the degraded accuracy.
pub fn operator_value(field: &ScalarField, op: DiffOp, point: &[f64]) -> Result<(f64, bool)> {
    let analytic = match op {
        DiffOp::Laplacian => field.laplacian(point),
        DiffOp::Heat => field.heat(point),
        DiffOp::DetHess => field.dethess(point),
    };
    match analytic {
        Some(v) => Ok((v, false)),
        None => Ok((
            finite_difference_operator(field, op, point, default_fd_step(point))?,
            true,
        )),
    }
}

// ---------------------------------------------------------------------------
// Name-addressable catalog (CLI entry point)
// ---------------------------------------------------------------------------

fn param(params: &BTreeMap<String, f64>, key: &str) -> Option<f64> {
    params.get(key).copied()
}

fn require_dim(params: &BTreeMap<String, f64>, name: &str) -> Result<usize> {
    let v = param(params, "n").ok_or_else(|| Error::FieldParameter {
        name: name.into(),
        reason: "missing parameter n".into(),
    })?;
    if v < 1.0 || v.fract() != 0.0 {
        return Err(Error::FieldParameter {
            name: name.into(),
            reason: format!("n must be a positive integer, got {v}"),
        });
    }
    Ok(v as usize)
}

/// Look up a catalog field by name and parameter map. Understood names:
/// `quadratic`, `shifted_quadratic`, `quadratic_plus_harmonic`, `harmonic`,
/// `drift`, `shifted_drift`, `caloric`, `drift_plus_caloric`, `gressman`.
pub fn catalog_field(name: &str, params: &BTreeMap<String, f64>) -> Result<ScalarField> {
    match name {
        "quadratic" => make_quadratic(require_dim(params, name)?),
        "shifted_quadratic" => {
            let c0 = param(params, "c0").unwrap_or(0.0);
            Ok(make_quadratic(require_dim(params, name)?)?.shifted(c0))
        }
        "harmonic" => {
            let variant = param(params, "variant").unwrap_or(0.0) as usize;
            make_harmonic(require_dim(params, name)?, variant)
        }
        "quadratic_plus_harmonic" => {
            let variant = param(params, "variant").unwrap_or(0.0) as usize;
            let amplitude = param(params, "amplitude").unwrap_or(1.0);
            make_quadratic_plus_harmonic(require_dim(params, name)?, amplitude, variant)
        }
        "drift" => make_heat_witness(require_dim(params, name)?, HeatWitness::Drift),
        "shifted_drift" => {
            let c0 = param(params, "c0").unwrap_or(0.0);
            make_heat_witness(require_dim(params, name)?, HeatWitness::Shifted(c0))
        }
        "caloric" => make_heat_witness(require_dim(params, name)?, HeatWitness::Caloric),
        "drift_plus_caloric" => {
            let n = require_dim(params, name)?;
            make_heat_witness(n, HeatWitness::Drift)?
                .sum(&make_heat_witness(n, HeatWitness::Caloric)?)
        }
        "gressman" => {
            let v = param(params, "N").ok_or_else(|| Error::FieldParameter {
                name: name.into(),
                reason: "missing parameter N".into(),
            })?;
            if v < 1.0 || v.fract() != 0.0 {
                return Err(Error::FieldParameter {
                    name: name.into(),
                    reason: format!("N must be a positive integer, got {v}"),
                });
            }
            make_gressman(v as u32)
        }
        other => Err(Error::UnknownField { name: other.into() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn quadratic_witness_values() {
        let u = make_quadratic(2).unwrap();
        assert_close(u.eval(&[1.0, 1.0]), 0.5, 1e-15);
        assert_eq!(u.laplacian(&[1.0, 1.0]), Some(1.0));
        let u1 = make_quadratic(1).unwrap();
        assert_close(u1.eval(&[3.0]), 4.5, 1e-15);
        let u3 = make_quadratic(3).unwrap();
        assert_eq!(u3.laplacian(&[0.2, -0.7, 1.1]), Some(1.0));
    }

    #[test]
    fn heat_witnesses() {
        let drift = make_heat_witness(1, HeatWitness::Drift).unwrap();
        assert_close(drift.eval(&[0.0, 2.0]), -2.0, 1e-15);
        assert_eq!(drift.heat(&[0.0, 2.0]), Some(1.0));

        let caloric = make_heat_witness(2, HeatWitness::Caloric).unwrap();
        assert_eq!(caloric.heat(&[0.3, -0.4, 0.9]), Some(0.0));
        // Delta(|x|^2/2n) = 1 cancels d/dt t
        let fd = finite_difference_operator(&caloric, DiffOp::Heat, &[0.3, -0.4, 0.9], 1e-4)
            .unwrap();
        assert_close(fd, 0.0, 1e-5);

        let shifted = make_heat_witness(1, HeatWitness::Shifted(5.0)).unwrap();
        assert_eq!(shifted.heat(&[1.0, 1.0]), Some(1.0));
        assert_close(shifted.eval(&[1.0, 1.0]), 4.0, 1e-15);
    }

    #[test]
    fn gressman_values_and_dethess() {
        let u = make_gressman(1).unwrap();
        assert_close(u.eval(&[0.0, std::f64::consts::FRAC_PI_2]), 1.0, 1e-15);
        assert_eq!(u.dethess(&[0.0, 0.0]), Some(1.0));
        let u28 = make_gressman(28).unwrap();
        assert_eq!(u28.dethess(&[0.0, 0.5]), Some(1.0));
        // analytic dethess against finite differences at random points
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let fd = finite_difference_operator(&u, DiffOp::DetHess, &p, 1e-4).unwrap();
            assert!((fd - u.dethess(&p).unwrap()).abs() < 1e-5);
        }
    }

    #[test]
    fn gressman_sup_on_grid_matches_analytic() {
        for big_n in [1u32, 5, 28] {
            let u = make_gressman(big_n).unwrap();
            let mut grid_sup: f64 = 0.0;
            let res = 400;
            for i in 0..=res {
                for j in 0..=res {
                    let p = [i as f64 / res as f64, j as f64 / res as f64];
                    grid_sup = grid_sup.max(u.eval(&p).abs());
                }
            }
            let analytic = gressman_sup_unit_square(big_n);
            assert!(grid_sup <= analytic + 1e-12);
            assert!(grid_sup >= analytic * 0.999, "N={big_n}: {grid_sup} vs {analytic}");
        }
    }

    #[test]
    fn rectangle_family_measure_and_gaps() {
        for &delta in &[0.1, 0.05, 0.01] {
            let fam = make_rectangle_family(delta).unwrap();
            assert!(
                fam.total_measure > 1.0 - 2.0 * delta,
                "measure {} at delta {delta}",
                fam.total_measure
            );
            // all inside the unit square
            for r in &fam.rectangles {
                assert!(r[0].0 >= 0.0 && r[0].1 <= 1.0);
                assert!(r[1].0 >= 0.0 && r[1].1 <= 1.0 + 1e-12);
            }
            // consecutive gaps are delta^2/4
            for w in fam.rectangles.windows(2) {
                let gap = w[1][1].0 - w[0][1].1;
                assert_close(gap, delta * delta / 4.0, 1e-12);
            }
            // the floor-count bound the construction relies on
            let pitch = delta + delta * delta / 4.0;
            assert!(fam.count as f64 * pitch <= 1.0 - delta / 4.0 + 1e-12);
        }
        assert!(make_rectangle_family(0.5).is_err());
        assert!(make_rectangle_family(0.0).is_err());
    }

    #[test]
    fn finite_differences_exact_on_quadratics() {
        let u = make_quadratic(3).unwrap();
        for h in [1e-2, 1e-3, 1e-4] {
            let fd =
                finite_difference_operator(&u, DiffOp::Laplacian, &[0.4, -0.2, 0.9], h).unwrap();
            assert_close(fd, 1.0, 1e-8);
        }
    }

    #[test]
    fn fd_second_order_convergence() {
        // |analytic - fd| drops by ~4x under h-halving (order >= 1.9)
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let catalogs = [laplace_catalog(2).unwrap(), laplace_catalog(3).unwrap()];
        let mut checked = 0;
        for cat in &catalogs {
            for field in cat {
                let n = field.arity.point_dim();
                for _ in 0..6 {
                    let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect();
                    let exact = field.laplacian(&p).unwrap();
                    let e1 = (finite_difference_operator(field, DiffOp::Laplacian, &p, 2e-3)
                        .unwrap()
                        - exact)
                        .abs();
                    let e2 = (finite_difference_operator(field, DiffOp::Laplacian, &p, 1e-3)
                        .unwrap()
                        - exact)
                        .abs();
                    if e1 > 1e-9 {
                        let order = (e1 / e2).log2();
                        assert!(order > 1.9, "{}: order {order} at {p:?}", field.label);
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 20, "too few nontrivial convergence checks");
    }

    #[test]
    fn heat_catalog_analytic_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=2 {
            for field in heat_catalog(n).unwrap() {
                for _ in 0..10 {
                    let p: Vec<f64> = (0..=n).map(|_| rng.gen_range(-0.5..0.5)).collect();
                    let exact = field.heat(&p).unwrap();
                    let fd = finite_difference_operator(&field, DiffOp::Heat, &p, 1e-4).unwrap();
                    assert!(
                        (fd - exact).abs() < 1e-5 * (1.0 + exact.abs()),
                        "{} at {p:?}: {fd} vs {exact}",
                        field.label
                    );
                }
            }
        }
    }

    #[test]
    fn shift_leaves_operators_unchanged() {
        let u = make_quadratic(2).unwrap();
        let v = u.shifted(100.0);
        let p = [0.3, 0.4];
        assert_close(v.eval(&p) - u.eval(&p), 100.0, 1e-12);
        assert_eq!(u.laplacian(&p), v.laplacian(&p));
        let d = make_heat_witness(1, HeatWitness::Drift).unwrap();
        assert_eq!(d.heat(&[0.1, 0.2]), d.shifted(-7.0).heat(&[0.1, 0.2]));
    }

    #[test]
    fn lift_preserves_heat_operator() {
        let u = make_heat_witness(2, HeatWitness::Drift).unwrap();
        let lifted = u.lift(3).unwrap();
        assert_eq!(lifted.arity, Arity::SpaceTime(5));
        let p = [9.0, 9.0, 9.0, 0.1, 0.2, 0.5];
        assert_close(lifted.eval(&p), u.eval(&[0.1, 0.2, 0.5]), 1e-15);
        assert_eq!(lifted.heat(&p), Some(1.0));
    }

    #[test]
    fn catalog_lookup_roundtrip() {
        let mut params = BTreeMap::new();
        params.insert("n".into(), 2.0);
        let u = catalog_field("quadratic", &params).unwrap();
        assert_eq!(u.label, "quadratic(n=2)");
        params.insert("N".into(), 28.0);
        assert!(catalog_field("gressman", &params).is_ok());
        assert!(catalog_field("nope", &params).is_err());
        let empty = BTreeMap::new();
        assert!(catalog_field("quadratic", &empty).is_err());
    }

    #[test]
    fn gressman_dethess_at_least_one_on_grid() {
        let u = make_gressman(11).unwrap();
        for i in 0..200 {
            for j in 0..200 {
                let p = [(i as f64 + 0.5) / 200.0, (j as f64 + 0.5) / 200.0];
                assert!(u.dethess(&p).unwrap() >= 1.0);
            }
        }
    }
}
