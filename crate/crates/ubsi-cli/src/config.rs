//! JSON run configuration. Unknown keys are rejected so that typos cannot
//! silently change a verification run.

use anyhow::{bail, Context};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::PathBuf;
use ubsi::fields::{catalog_field, ScalarField};
use ubsi::geometry::Domain;
use ubsi::harness::{LinearMap, OperatorKind};
use ubsi::levelsets::Exponent;
use ubsi::quadrature::QuadratureConfig;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl FieldSpec {
    pub fn build(&self) -> anyhow::Result<ScalarField> {
        catalog_field(&self.name, &self.params)
            .with_context(|| format!("building field {:?}", self.name))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub c: f64,
    pub n_min: u32,
    pub n_max: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftingSpec {
    pub domain2: Domain,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovSpec {
    pub matrix: Vec<Vec<f64>>,
}

impl CovSpec {
    pub fn map(&self) -> LinearMap {
        LinearMap {
            rows: self.matrix.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectangleSpec {
    pub delta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatballVolumeSpec {
    pub n: Vec<usize>,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivativeDims {
    #[serde(default = "default_ball_dims")]
    pub ball: Vec<usize>,
    #[serde(default = "default_heat_dims")]
    pub heat: Vec<usize>,
}

fn default_ball_dims() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_heat_dims() -> Vec<usize> {
    vec![1, 2]
}

impl Default for DerivativeDims {
    fn default() -> Self {
        Self {
            ball: default_ball_dims(),
            heat: default_heat_dims(),
        }
    }
}

/// One verification run. The `command` field, when present, must match the
/// CLI subcommand.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub field: Option<FieldSpec>,
    pub domain: Option<Domain>,
    pub operator: Option<OperatorKind>,
    pub p: Option<Vec<Exponent>>,
    /// user-supplied threshold; omitted means "derive from the constants"
    pub c: Option<f64>,
    pub safety: Option<f64>,
    /// fixed shrink distance for the Laplace constant (omitted: optimized)
    pub delta: Option<f64>,
    /// fixed heatball radius for the heat constant (omitted: optimized)
    pub heat_radius: Option<f64>,
    /// extra dimensions m for the modified heatballs of the heat constant
    pub heat_extra_dim: Option<usize>,
    pub resolution: Option<usize>,
    pub quadrature: Option<QuadratureConfig>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// optional Monte Carlo cross-check sample count
    pub mc_samples: Option<usize>,
    pub sweep: Option<SweepSpec>,
    pub lifting: Option<LiftingSpec>,
    pub cov: Option<CovSpec>,
    pub rectangle: Option<RectangleSpec>,
    pub heatball: Option<HeatballVolumeSpec>,
    #[serde(default)]
    pub derivative_dims: Option<DerivativeDims>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    pub fn expect_command(&self, name: &str) -> anyhow::Result<()> {
        if let Some(cmd) = &self.command {
            if cmd != name {
                bail!("config command {cmd:?} does not match subcommand {name:?}");
            }
        }
        Ok(())
    }

    pub fn quad(&self) -> QuadratureConfig {
        self.quadrature.clone().unwrap_or_default()
    }

    pub fn safety(&self) -> f64 {
        self.safety.unwrap_or(0.9)
    }

    pub fn heat_extra_dim(&self) -> usize {
        self.heat_extra_dim.unwrap_or(3)
    }

    pub fn p_list(&self) -> Vec<Exponent> {
        self.p.clone().unwrap_or_else(|| {
            // p = infinity recovers the original L^infinity statement and
            // is always included by default
            vec![
                Exponent::Finite(1.0),
                Exponent::Finite(2.0),
                Exponent::Finite(4.0),
                Exponent::Infinity,
            ]
        })
    }
}
