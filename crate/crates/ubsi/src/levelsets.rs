//! Level-set measures and L^p norms over domains: the raw ingredients of
//! every inequality in the toolkit.
//!
//! The primary estimator is a deterministic midpoint grid: cells are
//! classified by their center value, and an inner/outer bracket built from
//! corner+center samples quantifies the boundary ambiguity instead of
//! pretending exactness. A seeded Monte Carlo estimator is provided as a
//! cross-check.

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::geometry::Domain;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// p in [1, infinity].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p < 1.0 || p.is_nan() {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                reason: "exponent must satisfy p >= 1",
            });
        }
        if p.is_infinite() {
            Ok(Exponent::Infinity)
        } else {
            Ok(Exponent::Finite(p))
        }
    }

    /// 1/p + 1/p' = 1, with 1' = infinity and infinity' = 1.
    pub fn conjugate(&self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(p) if *p == 1.0 => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }

    /// measure^(1/p), with the convention x^0 = 1 adopted for p = infinity
    /// (IEEE powf agrees: 0^0 = 1).
    pub fn measure_power(&self, measure: f64) -> f64 {
        match self {
            Exponent::Infinity => measure.powf(0.0),
            Exponent::Finite(p) => measure.powf(1.0 / p),
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Exponent::new(p).map_err(serde::de::Error::custom),
            Raw::Str(s) if s == "inf" || s == "infinity" => Ok(Exponent::Infinity),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad exponent {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// {x : |u(x)| <= c}
    Sublevel,
    /// {x : |u(x)| >= c}
    Superlevel,
}

/// Measure estimate with a two-sided bracket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetEstimate {
    pub threshold: f64,
    pub direction: Direction,
    /// midpoint-classification estimate
    pub measure: f64,
    /// cells certainly inside (all samples qualify, cell inside the domain)
    pub inner: f64,
    /// cells possibly touching the set
    pub outer: f64,
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub p: Exponent,
    pub value: f64,
    pub resolution: usize,
    /// for p = infinity: change of the grid max against half resolution
    pub refinement_delta: Option<f64>,
}

/// Cells per axis used by the CLI when none is configured.
pub fn default_resolution(dim: usize) -> usize {
    match dim {
        0..=2 => 512,
        3 => 128,
        _ => 32,
    }
}

/// Visit (center, cell_volume) of every grid cell whose center lies in the
/// domain. The grid subdivides the domain bounding box `resolution` times
/// per axis, in row-major order (deterministic).
pub fn for_each_cell<F: FnMut(&[f64], f64)>(dom: &Domain, resolution: usize, mut visit: F) {
    if dom.is_empty() {
        return;
    }
    let bbox = dom.bounding_box();
    let dim = bbox.len();
    let h: Vec<f64> = bbox
        .iter()
        .map(|(a, b)| (b - a) / resolution as f64)
        .collect();
    let vol: f64 = h.iter().product();
    let mut idx = vec![0usize; dim];
    let mut center = vec![0.0; dim];
    loop {
        for d in 0..dim {
            center[d] = bbox[d].0 + (idx[d] as f64 + 0.5) * h[d];
        }
        if dom.contains(&center) {
            visit(&center, vol);
        }
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < resolution {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == dim {
                return;
            }
        }
    }
}

fn classify(value_abs: f64, threshold: f64, direction: Direction) -> bool {
    match direction {
        Direction::Sublevel => value_abs <= threshold,
        Direction::Superlevel => value_abs >= threshold,
    }
}

/// Midpoint measure of {|u| >= c} or {|u| <= c} over the domain, with the
/// inner/outer bracket sampled at cell corners and centers.
pub fn measure_level_set(
    field: &ScalarField,
    dom: &Domain,
    threshold: f64,
    direction: Direction,
    resolution: usize,
) -> Result<LevelSetEstimate> {
    if threshold < 0.0 {
        return Err(Error::InvalidParameter {
            name: "threshold",
            value: threshold,
            reason: "level-set threshold must be nonnegative",
        });
    }
    if resolution < 8 {
        return Err(Error::InvalidParameter {
            name: "resolution",
            value: resolution as f64,
            reason: "resolution must be at least 8 cells per axis",
        });
    }
    let bbox = dom.bounding_box();
    let dim = bbox.len();
    let h: Vec<f64> = bbox
        .iter()
        .map(|(a, b)| (b - a) / resolution as f64)
        .collect();
    let vol: f64 = h.iter().product();

    let mut measure = 0.0;
    let mut inner = 0.0;
    let mut outer = 0.0;

    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    if dom.is_empty() {
        return Ok(LevelSetEstimate {
            threshold,
            direction,
            measure: 0.0,
            inner: 0.0,
            outer: 0.0,
            resolution,
        });
    }
    loop {
        // center sample
        for d in 0..dim {
            point[d] = bbox[d].0 + (idx[d] as f64 + 0.5) * h[d];
        }
        let center_in = dom.contains(&point);
        let center_val = field.eval(&point).abs();
        let mut min_val = center_val;
        let mut max_val = center_val;
        let mut all_in = center_in;
        let mut any_in = center_in;
        // corner samples
        for mask in 0..(1u32 << dim) {
            for d in 0..dim {
                let lo = bbox[d].0 + idx[d] as f64 * h[d];
                point[d] = if mask & (1 << d) != 0 { lo + h[d] } else { lo };
            }
            let inside = dom.contains(&point);
            all_in &= inside;
            any_in |= inside;
            let v = field.eval(&point).abs();
            min_val = min_val.min(v);
            max_val = max_val.max(v);
        }
        if center_in && classify(center_val, threshold, direction) {
            measure += vol;
        }
        let certain = match direction {
            Direction::Sublevel => max_val <= threshold,
            Direction::Superlevel => min_val >= threshold,
        };
        let possible = match direction {
            Direction::Sublevel => min_val <= threshold,
            Direction::Superlevel => max_val >= threshold,
        };
        if all_in && certain {
            inner += vol;
        }
        if any_in && possible {
            outer += vol;
        }

        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < resolution {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == dim {
                return Ok(LevelSetEstimate {
                    threshold,
                    direction,
                    measure,
                    inner,
                    outer,
                    resolution,
                });
            }
        }
    }
}

pub fn measure_superlevel(
    field: &ScalarField,
    dom: &Domain,
    threshold: f64,
    resolution: usize,
) -> Result<LevelSetEstimate> {
    measure_level_set(field, dom, threshold, Direction::Superlevel, resolution)
}

pub fn measure_sublevel(
    field: &ScalarField,
    dom: &Domain,
    threshold: f64,
    resolution: usize,
) -> Result<LevelSetEstimate> {
    measure_level_set(field, dom, threshold, Direction::Sublevel, resolution)
}

/// Seeded Monte Carlo cross-check of the superlevel measure.
pub fn mc_measure_superlevel(
    field: &ScalarField,
    dom: &Domain,
    threshold: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    if dom.is_empty() || samples == 0 {
        return 0.0;
    }
    let bbox = dom.bounding_box();
    let bbox_vol: f64 = bbox.iter().map(|(a, b)| b - a).product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point = vec![0.0; bbox.len()];
    let mut hits = 0usize;
    for _ in 0..samples {
        for (slot, (a, b)) in point.iter_mut().zip(&bbox) {
            *slot = rng.gen_range(*a..*b);
        }
        if dom.contains(&point) && field.eval(&point).abs() >= threshold {
            hits += 1;
        }
    }
    bbox_vol * hits as f64 / samples as f64
}

/// Midpoint-rule (int |u|^p)^(1/p); p = infinity returns the grid max with
/// a refinement delta against half the resolution.
pub fn lp_norm(
    field: &ScalarField,
    dom: &Domain,
    p: Exponent,
    resolution: usize,
) -> Result<NormEstimate> {
    if resolution < 8 {
        return Err(Error::InvalidParameter {
            name: "resolution",
            value: resolution as f64,
            reason: "resolution must be at least 8 cells per axis",
        });
    }
    match p {
        Exponent::Finite(pf) => {
            let mut sum = 0.0;
            for_each_cell(dom, resolution, |center, vol| {
                sum += field.eval(center).abs().powf(pf) * vol;
            });
            Ok(NormEstimate {
                p,
                value: sum.powf(1.0 / pf),
                resolution,
                refinement_delta: None,
            })
        }
        Exponent::Infinity => {
            let grid_max = |res: usize| {
                let mut m: f64 = 0.0;
                for_each_cell(dom, res, |center, _| {
                    m = m.max(field.eval(center).abs());
                });
                m
            };
            let fine = grid_max(resolution);
            let coarse = grid_max((resolution / 2).max(8));
            Ok(NormEstimate {
                p,
                value: fine,
                resolution,
                refinement_delta: Some((fine - coarse).abs()),
            })
        }
    }
}

/// Convenience wrapper matching the classical statement.
pub fn conjugate_exponent(p: f64) -> Result<Exponent> {
    Ok(Exponent::new(p)?.conjugate())
}

/// Chebyshev's inequality eps |{|u| >= eps}|^(1/p) <= ||u||_p, checked with
/// the outer bracket on the left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn chebyshev_check(
    field: &ScalarField,
    dom: &Domain,
    eps: f64,
    p: f64,
    resolution: usize,
) -> Result<ChebyshevCheck> {
    if eps <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "Chebyshev threshold must be positive",
        });
    }
    let level = measure_superlevel(field, dom, eps, resolution)?;
    let norm = lp_norm(field, dom, Exponent::new(p)?, resolution)?;
    let lhs = eps * level.outer.powf(1.0 / p);
    Ok(ChebyshevCheck {
        lhs,
        rhs: norm.value,
        holds: lhs <= norm.value * (1.0 + 1e-12),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_gressman, Arity};

    fn linear_1d() -> ScalarField {
        ScalarField::from_closure("x", Arity::Space(1), |p| p[0])
    }

    fn box1() -> Domain {
        Domain::unit_box(1).unwrap()
    }

    #[test]
    fn conjugate_exponents() {
        assert_eq!(conjugate_exponent(2.0).unwrap(), Exponent::Finite(2.0));
        assert_eq!(conjugate_exponent(1.0).unwrap(), Exponent::Infinity);
        match conjugate_exponent(4.0).unwrap() {
            Exponent::Finite(p) => assert!((p - 4.0 / 3.0).abs() < 1e-15),
            _ => panic!(),
        }
        assert_eq!(Exponent::Infinity.conjugate(), Exponent::Finite(1.0));
        assert!(Exponent::new(0.5).is_err());
        assert!(Exponent::new(f64::NAN).is_err());
    }

    #[test]
    fn superlevel_of_monotone_is_exact() {
        let est = measure_superlevel(&linear_1d(), &box1(), 0.25, 512).unwrap();
        assert!((est.measure - 0.75).abs() < 1e-12);
        assert!(est.inner <= est.measure && est.measure <= est.outer);
        assert!(est.outer - est.inner <= 3.0 / 512.0);
    }

    #[test]
    fn superlevel_of_zero_field_is_empty() {
        let zero = ScalarField::from_closure("0", Arity::Space(2), |_| 0.0);
        let est =
            measure_superlevel(&zero, &Domain::unit_box(2).unwrap(), 0.1, 64).unwrap();
        assert_eq!(est.measure, 0.0);
        assert_eq!(est.outer, 0.0);
    }

    #[test]
    fn gressman_superlevel_empties_below_sup() {
        // sup |u_28| = e/28 < 0.1: superlevel at 0.1 is empty
        let u = make_gressman(28).unwrap();
        let est = measure_superlevel(&u, &Domain::unit_box(2).unwrap(), 0.1, 256).unwrap();
        assert_eq!(est.measure, 0.0);
        assert_eq!(est.outer, 0.0);
    }

    #[test]
    fn lp_norm_closed_forms() {
        // constant K: ||u||_p = K |Omega|^(1/p)
        let k = ScalarField::from_closure("3", Arity::Space(2), |_| 3.0);
        let dom = Domain::from_intervals(vec![(0.0, 2.0), (0.0, 1.0)]).unwrap();
        let norm = lp_norm(&k, &dom, Exponent::Finite(3.0), 64).unwrap();
        assert!((norm.value - 3.0 * 2.0f64.powf(1.0 / 3.0)).abs() < 1e-10);

        // u = x on [0,1], p = 2: 1/sqrt(3)
        let norm = lp_norm(&linear_1d(), &box1(), Exponent::Finite(2.0), 512).unwrap();
        assert!((norm.value - 1.0 / 3.0f64.sqrt()).abs() < 1e-5);

        // p = infinity of sin(pi x): grid max near 1
        let s = ScalarField::from_closure("sin", Arity::Space(1), |p| {
            (std::f64::consts::PI * p[0]).sin()
        });
        let norm = lp_norm(&s, &box1(), Exponent::Infinity, 512).unwrap();
        assert!((norm.value - 1.0).abs() < 1e-4);
        assert!(norm.refinement_delta.unwrap() < 1e-4);
    }

    #[test]
    fn chebyshev_check_exact_case() {
        // u = x on [0,1], eps = 1/2, p = 1: 1/4 <= 1/2
        let check = chebyshev_check(&linear_1d(), &box1(), 0.5, 1.0, 512).unwrap();
        assert!(check.holds);
        assert!((check.lhs - 0.25).abs() < 0.01);
        assert!((check.rhs - 0.5).abs() < 1e-5);

        // u = 0: 0 <= 0
        let zero = ScalarField::from_closure("0", Arity::Space(1), |_| 0.0);
        let check = chebyshev_check(&zero, &box1(), 1.0, 2.0, 64).unwrap();
        assert!(check.holds);
        assert_eq!(check.lhs, 0.0);
    }

    #[test]
    fn complement_identity() {
        let u = ScalarField::from_closure("xy", Arity::Space(2), |p| p[0] * p[1]);
        let dom = Domain::unit_box(2).unwrap();
        let sub = measure_sublevel(&u, &dom, 0.3, 128).unwrap();
        let sup = measure_superlevel(&u, &dom, 0.3, 128).unwrap();
        // midpoint classification partitions the counted cells
        assert!((sub.measure + sup.measure - dom.measure()).abs() < 1e-12);
    }

    #[test]
    fn ball_domain_grid_measure_converges() {
        let one = ScalarField::from_closure("1", Arity::Space(2), |_| 1.0);
        let dom = Domain::unit_ball(2).unwrap();
        let est = measure_superlevel(&one, &dom, 0.5, 512).unwrap();
        let exact = dom.measure();
        assert!((est.measure - exact).abs() < 0.01 * exact);
        assert!(est.inner <= est.measure && est.measure <= est.outer);
    }

    #[test]
    fn mc_cross_check_agrees_with_grid() {
        let u = ScalarField::from_closure("x+y", Arity::Space(2), |p| p[0] + p[1]);
        let dom = Domain::unit_box(2).unwrap();
        let grid = measure_superlevel(&u, &dom, 1.0, 256).unwrap();
        let mc = mc_measure_superlevel(&u, &dom, 1.0, 200_000, 12345);
        assert!((mc - grid.measure).abs() < 0.01, "mc {mc} vs grid {}", grid.measure);
        // deterministic under the same seed
        assert_eq!(mc, mc_measure_superlevel(&u, &dom, 1.0, 200_000, 12345));
    }

    #[test]
    fn measure_power_conventions() {
        assert_eq!(Exponent::Infinity.measure_power(0.0), 1.0);
        assert_eq!(Exponent::Infinity.measure_power(0.5), 1.0);
        assert_eq!(Exponent::Finite(2.0).measure_power(0.25), 0.5);
    }

    #[test]
    fn exponent_serde() {
        let p: Exponent = serde_json::from_str("2.5").unwrap();
        assert_eq!(p, Exponent::Finite(2.5));
        let p: Exponent = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(p, Exponent::Infinity);
        assert_eq!(serde_json::to_string(&Exponent::Infinity).unwrap(), "\"inf\"");
        assert!(serde_json::from_str::<Exponent>("0.3").is_err());
    }
}
