//! JSON run configurations, one document per command.

use fracsobolev::error::{Error, Result};
use fracsobolev::kernel::{FracParams, KernelSpec};
use fracsobolev::manifold::{build_grid, Grid, ManifoldDesc, ManifoldKind};
use fracsobolev::sobolev::DiscreteFunction;
use fracsobolev::solver::SolveOpts;
use serde::Deserialize;
use std::sync::Arc;

#[derive(Debug, Clone, Deserialize)]
pub struct ManifoldConfig {
    pub kind: String,
    pub dim: usize,
    pub scale: f64,
}

impl ManifoldConfig {
    pub fn to_desc(&self) -> Result<ManifoldDesc> {
        let kind = match self.kind.as_str() {
            "circle" => ManifoldKind::Circle,
            "torus" => ManifoldKind::Torus,
            "sphere" => ManifoldKind::Sphere,
            other => {
                return Err(Error::Config(format!(
                    "unsupported manifold kind '{other}' (expected circle | torus | sphere)"
                )))
            }
        };
        ManifoldDesc::new(kind, self.dim, self.scale)
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ParamsConfig {
    pub n: usize,
    pub s: f64,
    pub p: f64,
}

impl ParamsConfig {
    pub fn to_params(&self) -> Result<FracParams> {
        FracParams::new(self.n, self.s, self.p)
    }
}

/// Scalar field given either as a constant or as per-point samples.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Constant { value: f64 },
    Samples { values: Vec<f64> },
}

impl FieldSpec {
    pub fn realize(&self, grid: &Arc<Grid>) -> Result<DiscreteFunction> {
        match self {
            FieldSpec::Constant { value } => DiscreteFunction::constant(grid, *value),
            FieldSpec::Samples { values } => DiscreteFunction::new(grid, values.clone()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct GridConfig {
    pub manifold: ManifoldConfig,
    pub resolution: usize,
}

impl GridConfig {
    pub fn build(&self) -> Result<(ManifoldDesc, Arc<Grid>)> {
        let desc = self.manifold.to_desc()?;
        Ok((desc, Arc::new(build_grid(&desc, self.resolution)?)))
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct K4Config {
    pub x0: Vec<f64>,
    pub radius: f64,
    pub n_pairs: usize,
    pub eps_ladder: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct KernelCheckConfig {
    #[serde(flatten)]
    pub grid: GridConfig,
    pub kernel: KernelSpec,
    pub k4: K4Config,
}

#[derive(Debug, Clone, Deserialize)]
pub struct EuclidConfig {
    pub r_box: f64,
    pub resolution: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BubbleSweepConfig {
    #[serde(flatten)]
    pub grid: GridConfig,
    pub params: ParamsConfig,
    pub kernel: KernelSpec,
    pub center: Vec<f64>,
    pub delta: f64,
    pub ladder: Vec<f64>,
    pub euclid: EuclidConfig,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BestConstantConfig {
    pub n: usize,
    pub s: f64,
    pub r_box: f64,
    pub resolutions: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
pub struct OptsConfig {
    pub tol_energy: Option<f64>,
    pub tol_res: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
}

impl OptsConfig {
    pub fn to_opts(&self, cli_seed: u64) -> SolveOpts {
        let mut opts = SolveOpts {
            seed: self.seed.unwrap_or(cli_seed),
            ..SolveOpts::default()
        };
        if let Some(v) = self.tol_energy {
            opts.tol_energy = v;
        }
        if let Some(v) = self.tol_res {
            opts.tol_res = v;
        }
        if let Some(v) = self.max_iter {
            opts.max_iter = v;
        }
        opts
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct SolveConfig {
    #[serde(flatten)]
    pub grid: GridConfig,
    pub kernel: KernelSpec,
    pub h: FieldSpec,
    pub f: FieldSpec,
    pub q: Option<f64>,
    pub schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub opts: OptsConfig,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ConditionConfig {
    #[serde(flatten)]
    pub grid: GridConfig,
    pub kernel: KernelSpec,
    pub h: FieldSpec,
    pub f: FieldSpec,
    pub kconst: f64,
    pub continuation_mu: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct EquivalenceConfig {
    #[serde(flatten)]
    pub grid: GridConfig,
    pub params: ParamsConfig,
    pub centers: Vec<Vec<f64>>,
    pub delta: f64,
    pub n_fields: usize,
    pub max_mode: usize,
}

pub fn load<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
}
