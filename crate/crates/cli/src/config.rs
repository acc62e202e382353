//! Experiment configuration.
//!
//! Configs are JSON documents; `config.schema.json` at the crate root
//! documents the schema. Unknown fields are rejected. A manifest written by
//! a previous run is accepted in place of a config.

use std::path::Path;

use mtp_amp::amp::Correction;
use mtp_amp::limits::t_norm;
use mtp_amp::model::{scaled_profile_coupling, BlockPriorProfile, CouplingSet, ScalarPrior};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub amp: AmpSection,
    #[serde(default)]
    pub se: SeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_n")]
    pub n: usize,
    pub blocks: Vec<BlockSpec>,
    pub couplings: CouplingSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub prior: ScalarPrior,
    pub beta: f64,
}

/// `matrices` lists `Λ_1, …, Λ_K` row by row; `profile` sets `Λ = √(cΞ)`
/// entrywise; `profile_norm` picks `c` so that `‖c·diag(β)Ξ‖_op = norm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingSpec {
    Matrices(Vec<Vec<Vec<f64>>>),
    Profile { c: f64, xi: Vec<Vec<f64>> },
    ProfileNorm { norm: f64, xi: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmpSection {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub early_stop: bool,
    #[serde(default = "default_correction")]
    pub correction: Correction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeSection {
    #[serde(default = "default_se_tol")]
    pub tol: f64,
    #[serde(default = "default_se_max_iter")]
    pub max_iter: usize,
}

/// Sweep over `ε` (applied to every Bernoulli–Gaussian block) and the
/// global scale `c`. The grid is given either as `c` values or as target
/// norms `‖T_c‖_op`; without either the default grid is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub eps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norms: Option<Vec<f64>>,
    #[serde(default = "default_grid_res")]
    pub grid_res: usize,
    #[serde(default = "default_true")]
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
}

fn default_n() -> usize {
    4000
}
fn default_max_iter() -> usize {
    30
}
fn default_rho() -> f64 {
    0.05
}
fn default_trials() -> usize {
    10
}
fn default_true() -> bool {
    true
}
fn default_correction() -> Correction {
    Correction::AnalyticDivergence
}
fn default_se_tol() -> f64 {
    mtp_amp::se::DEFAULT_SE_TOL
}
fn default_se_max_iter() -> usize {
    mtp_amp::se::DEFAULT_SE_MAX_ITER
}
fn default_grid_res() -> usize {
    400
}
fn default_dir() -> String {
    "out".into()
}

impl Default for AmpSection {
    fn default() -> Self {
        AmpSection {
            max_iter: default_max_iter(),
            rho: default_rho(),
            trials: default_trials(),
            seed: 0,
            early_stop: true,
            correction: default_correction(),
        }
    }
}

impl Default for SeSection {
    fn default() -> Self {
        SeSection {
            tol: default_se_tol(),
            max_iter: default_se_max_iter(),
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_dir() }
    }
}

/// Model objects built from the `model` section.
#[derive(Debug, Clone)]
pub struct ResolvedModel {
    pub n: usize,
    pub profile: BlockPriorProfile,
    pub couplings: CouplingSet,
    /// `Ξ` and `c` when the couplings are profile-parametrized.
    pub xi: Option<DMatrix<f64>>,
    pub c: Option<f64>,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(CliError::Config(format!("{what}: rows must be nonempty and of equal length")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn bad(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let is_manifest = value.get("config").is_some() && value.get("version").is_some();
        let cfg: ExperimentConfig = if is_manifest {
            let m: crate::output::Manifest =
                serde_json::from_str(text).map_err(|e| CliError::Config(format!("manifest: {e}")))?;
            m.config
        } else {
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.n < 2 {
            return Err(bad("model.n", "must be at least 2"));
        }
        if m.blocks.is_empty() {
            return Err(bad("model.blocks", "needs at least one block"));
        }
        let a = &self.amp;
        if !(0.0..=1.0).contains(&a.rho) {
            return Err(bad("amp.rho", format!("{} lies outside [0, 1]", a.rho)));
        }
        if a.max_iter == 0 {
            return Err(bad("amp.max_iter", "must be positive"));
        }
        if a.trials == 0 {
            return Err(bad("amp.trials", "must be positive"));
        }
        if !(self.se.tol > 0.0) || self.se.max_iter == 0 {
            return Err(bad("se", "tol and max_iter must be positive"));
        }
        if let Some(s) = &self.sweep {
            if s.eps.is_empty() {
                return Err(bad("sweep.eps", "needs at least one value"));
            }
            if let Some(e) = s.eps.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
                return Err(bad("sweep.eps", format!("{e} outside (0, 1]")));
            }
            if s.c.is_some() && s.norms.is_some() {
                return Err(bad("sweep", "give either c or norms, not both"));
            }
            let grid = s.c.as_deref().or(s.norms.as_deref()).unwrap_or(&[]);
            if grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(bad("sweep", "grid values must be finite and nonnegative"));
            }
            if s.grid_res < 2 {
                return Err(bad("sweep.grid_res", "must be at least 2"));
            }
            if matches!(m.couplings, CouplingSpec::Matrices(_)) {
                return Err(bad("model.couplings", "a sweep needs profile or profile_norm couplings"));
            }
        }
        self.resolve_model().map(|_| ())
    }

    pub fn profile(&self) -> Result<BlockPriorProfile> {
        BlockPriorProfile::new(self.model.blocks.iter().map(|b| (b.prior, b.beta)).collect())
            .map_err(|e| bad("model.blocks", e))
    }

    pub fn resolve_model(&self) -> Result<ResolvedModel> {
        let profile = self.profile()?;
        let d = profile.d();
        let (couplings, xi, c) = match &self.model.couplings {
            CouplingSpec::Matrices(ms) => {
                let ms = ms
                    .iter()
                    .enumerate()
                    .map(|(k, rows)| matrix(rows, &format!("model.couplings.matrices[{k}]")))
                    .collect::<Result<Vec<_>>>()?;
                if ms.is_empty() {
                    return Err(bad("model.couplings.matrices", "needs at least one view"));
                }
                let cs = CouplingSet::symmetric(ms).map_err(|e| bad("model.couplings.matrices", e))?;
                (cs, None, None)
            }
            CouplingSpec::Profile { c, xi } => {
                let xi = matrix(xi, "model.couplings.profile.xi")?;
                let lam = scaled_profile_coupling(*c, &xi).map_err(|e| bad("model.couplings.profile", e))?;
                let cs = CouplingSet::single(lam).map_err(|e| bad("model.couplings.profile", e))?;
                (cs, Some(xi), Some(*c))
            }
            CouplingSpec::ProfileNorm { norm, xi } => {
                let xi = matrix(xi, "model.couplings.profile_norm.xi")?;
                if xi.shape() != (d, d) {
                    return Err(bad("model.couplings.profile_norm.xi", format!("must be {d}×{d}")));
                }
                let unit = t_norm(profile.beta(), &xi, 1.0);
                if !(unit > 0.0) {
                    return Err(bad("model.couplings.profile_norm.xi", "diag(β)Ξ vanishes"));
                }
                let c = norm / unit;
                let lam = scaled_profile_coupling(c, &xi).map_err(|e| bad("model.couplings.profile_norm", e))?;
                let cs = CouplingSet::single(lam).map_err(|e| bad("model.couplings.profile_norm", e))?;
                (cs, Some(xi), Some(c))
            }
        };
        if couplings.d() != d {
            return Err(bad("model.couplings", format!("couplings are {}×{}, profile has {d} blocks", couplings.d(), couplings.d())));
        }
        Ok(ResolvedModel {
            n: self.model.n,
            profile,
            couplings,
            xi,
            c,
        })
    }

    /// The config with every Bernoulli–Gaussian block set to sparsity `eps`
    /// and the couplings set to `Λ = √(cΞ)`.
    pub fn at_point(&self, eps: f64, c: f64) -> Result<ExperimentConfig> {
        let mut cfg = self.clone();
        for b in &mut cfg.model.blocks {
            if let ScalarPrior::BernoulliGaussian(_) = b.prior {
                b.prior = ScalarPrior::bernoulli_gaussian(eps).map_err(|e| bad("sweep.eps", e))?;
            }
        }
        let xi = match &self.model.couplings {
            CouplingSpec::Profile { xi, .. } | CouplingSpec::ProfileNorm { xi, .. } => xi.clone(),
            CouplingSpec::Matrices(_) => return Err(bad("model.couplings", "a sweep needs profile couplings")),
        };
        cfg.model.couplings = CouplingSpec::Profile { c, xi };
        cfg.sweep = None;
        Ok(cfg)
    }

    /// The sweep's `c` values in increasing order.
    pub fn c_grid(&self) -> Result<Vec<f64>> {
        let s = self.sweep.as_ref().ok_or_else(|| bad("sweep", "section missing"))?;
        let m = self.resolve_model()?;
        let xi = m.xi.expect("validated profile couplings");
        let unit = t_norm(m.profile.beta(), &xi, 1.0);
        let mut cs = match (&s.c, &s.norms) {
            (Some(c), _) => c.clone(),
            (None, Some(norms)) => norms.iter().map(|v| v / unit).collect(),
            (None, None) => default_norm_grid().iter().map(|v| v / unit).collect(),
        };
        cs.sort_by(f64::total_cmp);
        cs.dedup();
        Ok(cs)
    }
}

/// 40 log-spaced norms on `[0.2, 4]`, with two extra points inserted
/// between neighbours inside the transition window `[0.6, 1.2]`.
pub fn default_norm_grid() -> Vec<f64> {
    let (lo, hi, m) = (0.2f64, 4.0f64, 40);
    let base: Vec<f64> = (0..m)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (m - 1) as f64).exp())
        .collect();
    let mut out = Vec::with_capacity(3 * m);
    for w in base.windows(2) {
        out.push(w[0]);
        if w[0] >= 0.6 && w[1] <= 1.2 {
            for k in 1..3 {
                out.push(w[0] + (w[1] - w[0]) * k as f64 / 3.0);
            }
        }
    }
    out.push(hi);
    out
}
