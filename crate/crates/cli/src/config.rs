use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use hardy_core::discretization::Domain;
use hardy_core::weights::WeightSpec;
use serde::{Deserialize, Serialize};

/// `μ` either fixed or, for `auto`, taken from the weight's closed form when
/// it has one and 1 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Mu {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl std::str::FromStr for Mu {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim().eq_ignore_ascii_case("auto") {
            Ok(Mu::Auto(AutoTag::Auto))
        } else {
            s.trim().parse().map(Mu::Value).map_err(|e| format!("bad mu {s:?}: {e}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    /// Number of ladder levels.
    pub levels: usize,
    /// Nodes on the coarsest level.
    pub n: usize,
    /// Boundary cell size on the coarsest level.
    pub boundary_resolution: f64,
    /// Each level bisects every cell and shrinks the boundary cell by this.
    pub refine_factor: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            n: 500,
            boundary_resolution: 1e-9,
            refine_factor: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub identity: f64,
    pub detect: f64,
    pub lambda_bracket: f64,
    pub stall_rtol: f64,
    pub rq_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-4,
            detect: 1e-3,
            lambda_bracket: 0.1,
            stall_rtol: 1e-10,
            rq_tol: 1e-12,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub weight: WeightSpec,
    pub domain: Domain,
    pub p: f64,
    pub lambda: f64,
    pub lambda_range: (f64, f64),
    /// Profile parameter; defaults to a quarter of the inradius.
    pub eta0: Option<f64>,
    /// Test-family parameter; defaults to `eta0/2`.
    pub eta: Option<f64>,
    pub mu: Mu,
    /// Smallest `t` the profile grid must reach.
    pub profile_t_min: f64,
    pub mesh: MeshConfig,
    pub tolerances: Tolerances,
    pub eps: Vec<f64>,
    pub s: Vec<f64>,
    pub m: f64,
    pub eta_probe: f64,
    pub seed: u64,
    /// Not echoed into outputs, so reruns elsewhere stay byte-identical.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            weight: WeightSpec::constant(1.0),
            domain: Domain::Interval { length: 1.0 },
            p: 2.0,
            lambda: 0.0,
            lambda_range: (-10.0, 50.0),
            eta0: None,
            eta: None,
            mu: Mu::Auto(AutoTag::Auto),
            profile_t_min: 1e-12,
            mesh: MeshConfig::default(),
            tolerances: Tolerances::default(),
            eps: vec![1e-2, 1e-3],
            s: vec![0.6, 1.0],
            m: 1.0,
            eta_probe: 0.1,
            seed: 0,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fills in the derived defaults and checks ranges.
    pub fn resolve(mut self) -> Result<Self> {
        let domain = hardy_core::discretization::make_domain(self.domain)?;
        self.domain = domain;
        let eta0 = self.eta0.unwrap_or_else(|| domain.default_eta0());
        if !(eta0 > 0.0 && eta0 < domain.inradius()) {
            bail!("eta0 must lie in (0, {}), got {eta0}", domain.inradius());
        }
        self.eta0 = Some(eta0);
        self.eta.get_or_insert(eta0 / 2.0);
        if !(self.p > 1.0) {
            bail!("p must exceed 1, got {}", self.p);
        }
        if self.mesh.levels == 0 || !(self.mesh.refine_factor > 0.0 && self.mesh.refine_factor <= 1.0) {
            bail!("mesh needs at least one level and a refine factor in (0, 1]");
        }
        if let Mu::Auto(_) = self.mu {
            let w = hardy_core::weights::make_weight(self.weight.clone())?;
            self.mu = Mu::Value(hardy_core::hardy::closed_form_mu(&w, eta0).unwrap_or(1.0));
        }
        if !(self.profile_t_min > 0.0 && self.profile_t_min < eta0) {
            bail!("profile_t_min must lie in (0, eta0), got {}", self.profile_t_min);
        }
        Ok(self)
    }

    pub fn eta0(&self) -> f64 {
        self.eta0.expect("resolved config")
    }

    pub fn mu(&self) -> f64 {
        match self.mu {
            Mu::Value(v) => v,
            Mu::Auto(_) => 1.0,
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta.expect("resolved config")
    }
}
