use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CampaignError;
use crate::generators::{make_builtin, BuiltinKind, BuiltinParams, Endpoint, ExternalGenerator, Generator};
use crate::geometry::{DiagnosticSettings, Difference, FiniteDifference};
use crate::imaging::EnergyMode;

/// A campaign configuration. Every field has a default; `config init`
/// writes them all out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Run seed: subspace basis, subsampling, bootstrap and resampling.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub probe: ProbeConfig,
    pub seeds: SeedSpec,
    pub trajectory: TrajectoryConfig,
    pub stats: StatsConfig,
    pub conditions: Vec<ConditionConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub subspace_dim: usize,
    pub fd_epsilon: f64,
    pub fd_scheme: Difference,
    pub neighbor_radius: f64,
    pub neighbor_count: usize,
    pub rank_tolerance: f64,
    pub sis_floor: f64,
    pub degeneracy_tolerance: f64,
    pub phfe_mode: EnergyMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedSpec {
    pub start: u64,
    pub count: u64,
    /// Explicit seeds; overrides `start`/`count` when non-empty.
    pub list: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub steps: usize,
    pub n_mc: usize,
    pub fraction: f64,
    pub tortuosity_eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    /// Baseline condition for drops, detection labels and Δη.
    pub reference: String,
    pub subsample_n: usize,
    pub runs: usize,
    pub n_boot: usize,
    pub ci_level: f64,
    /// Metric pairs for `correlate`, e.g. `["lc", "phfe"]`.
    pub pairs: Vec<[String; 2]>,
    pub ratio_floor: f64,
}

/// One condition: a built-in generator or an external endpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<BuiltinKind>,
    #[serde(default, skip_serializing_if = "is_default_params")]
    pub params: BuiltinParams,
    /// `tcp://host:port` or `stdio:<command>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    #[serde(default = "default_max_connections")]
    pub max_connections: usize,
}

fn is_default_params(p: &BuiltinParams) -> bool {
    *p == BuiltinParams::default()
}

fn default_timeout_secs() -> f64 {
    30.0
}

fn default_max_connections() -> usize {
    4
}

impl ConditionConfig {
    pub fn builtin(name: &str, kind: BuiltinKind) -> Self {
        Self {
            name: name.into(),
            builtin: Some(kind),
            params: BuiltinParams::default(),
            endpoint: None,
            timeout_secs: default_timeout_secs(),
            max_connections: default_max_connections(),
        }
    }

    pub fn external(name: &str, endpoint: &str) -> Self {
        Self { builtin: None, endpoint: Some(endpoint.into()), ..Self::builtin(name, BuiltinKind::Saddle) }
    }
}

impl Default for ProbeConfig {
    fn default() -> Self {
        let d = DiagnosticSettings::default();
        Self {
            subspace_dim: 8,
            fd_epsilon: d.fd.epsilon,
            fd_scheme: d.fd.scheme,
            neighbor_radius: d.neighbor_radius,
            neighbor_count: d.neighbor_count,
            rank_tolerance: d.rank_tolerance,
            sis_floor: d.sis_floor,
            degeneracy_tolerance: d.degeneracy_tolerance,
            phfe_mode: d.phfe_mode,
        }
    }
}

impl Default for SeedSpec {
    fn default() -> Self {
        Self { start: 0, count: 100, list: Vec::new() }
    }
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            steps: crate::trajectory::DEFAULT_STEPS,
            n_mc: 800,
            fraction: 0.8,
            tortuosity_eps: crate::trajectory::TORTUOSITY_EPS,
        }
    }
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            reference: "normal".into(),
            subsample_n: 500,
            runs: 10,
            n_boot: 1000,
            ci_level: 0.95,
            pairs: vec![
                ["lc".into(), "phfe".into()],
                ["ls".into(), "phfe".into()],
                ["lc".into(), "hfe".into()],
            ],
            ratio_floor: crate::stats::RATIO_FLOOR,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("mprobe-out"),
            jobs: 0,
            probe: ProbeConfig::default(),
            seeds: SeedSpec::default(),
            trajectory: TrajectoryConfig::default(),
            stats: StatsConfig::default(),
            conditions: vec![
                ConditionConfig::builtin("normal", BuiltinKind::CoupledFamily),
                ConditionConfig::builtin("ood", BuiltinKind::DecoupledFamily),
            ],
        }
    }
}

fn config_err(msg: impl Into<String>) -> CampaignError {
    CampaignError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CampaignError> {
        let config: Self = toml::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let p = &self.probe;
        let positive = [
            ("probe.fd_epsilon", p.fd_epsilon),
            ("probe.neighbor_radius", p.neighbor_radius),
            ("probe.rank_tolerance", p.rank_tolerance),
            ("probe.sis_floor", p.sis_floor),
            ("probe.degeneracy_tolerance", p.degeneracy_tolerance),
            ("trajectory.fraction", self.trajectory.fraction),
            ("trajectory.tortuosity_eps", self.trajectory.tortuosity_eps),
            ("stats.ci_level", self.stats.ci_level),
            ("stats.ratio_floor", self.stats.ratio_floor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(config_err(format!("{name} must be positive, got {v}")));
            }
        }
        let counts = [
            ("probe.subspace_dim", p.subspace_dim),
            ("probe.neighbor_count", p.neighbor_count),
            ("trajectory.steps", self.trajectory.steps),
            ("trajectory.n_mc", self.trajectory.n_mc),
            ("stats.subsample_n", self.stats.subsample_n),
            ("stats.runs", self.stats.runs),
            ("stats.n_boot", self.stats.n_boot),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(config_err(format!("{name} must be at least 1")));
            }
        }
        if self.trajectory.fraction > 1.0 {
            return Err(config_err("trajectory.fraction must be at most 1"));
        }
        if self.stats.ci_level >= 1.0 {
            return Err(config_err("stats.ci_level must be below 1"));
        }
        if self.seed_list().is_empty() {
            return Err(config_err("the seed list is empty"));
        }
        let mut unique = HashSet::new();
        if !self.seed_list().iter().all(|s| unique.insert(*s)) {
            return Err(config_err("seed list contains duplicates"));
        }
        if self.conditions.is_empty() {
            return Err(config_err("at least one condition is required"));
        }
        let mut names = HashSet::new();
        for c in &self.conditions {
            if c.name.is_empty() || !names.insert(c.name.as_str()) {
                return Err(config_err(format!("condition name {:?} is empty or repeated", c.name)));
            }
            match (&c.builtin, &c.endpoint) {
                (Some(_), None) => {}
                (None, Some(e)) => {
                    e.parse::<Endpoint>().map_err(|err| config_err(format!("condition {}: {err}", c.name)))?;
                    if !(c.timeout_secs.is_finite() && c.timeout_secs > 0.0) || c.max_connections == 0 {
                        return Err(config_err(format!("condition {}: timeout and pool size must be positive", c.name)));
                    }
                }
                _ => return Err(config_err(format!("condition {} needs exactly one of builtin or endpoint", c.name))),
            }
        }
        Ok(())
    }

    /// The campaign seeds in canonical (ascending) order.
    pub fn seed_list(&self) -> Vec<u64> {
        let mut seeds = if self.seeds.list.is_empty() {
            (0..self.seeds.count).map(|i| self.seeds.start + i).collect()
        } else {
            self.seeds.list.clone()
        };
        seeds.sort_unstable();
        seeds
    }

    pub fn settings(&self) -> DiagnosticSettings {
        let p = &self.probe;
        DiagnosticSettings {
            fd: FiniteDifference { epsilon: p.fd_epsilon, scheme: p.fd_scheme },
            neighbor_radius: p.neighbor_radius,
            neighbor_count: p.neighbor_count,
            rank_tolerance: p.rank_tolerance,
            sis_floor: p.sis_floor,
            degeneracy_tolerance: p.degeneracy_tolerance,
            phfe_mode: p.phfe_mode,
        }
    }

    /// SHA-256 over every setting that can change record contents.
    /// `out_dir` and `jobs` are excluded.
    pub fn content_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        canonical.jobs = 0;
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionConfig> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub(crate) fn thread_pool(&self) -> Result<rayon::ThreadPool, CampaignError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| config_err(format!("cannot start worker pool: {e}")))
    }
}

/// A condition resolved to something that yields generators. External
/// endpoints are connected once and shared by every cell.
#[derive(Clone)]
pub enum ConditionSource {
    Builtin { kind: BuiltinKind, params: BuiltinParams },
    External(Arc<ExternalGenerator>),
}

impl ConditionSource {
    pub fn resolve(condition: &ConditionConfig) -> Result<Self, CampaignError> {
        match (&condition.builtin, &condition.endpoint) {
            (Some(kind), None) => {
                // Surface bad parameters before any work starts.
                make_builtin(*kind, &condition.params, 0).map_err(|e| config_err(format!("condition {}: {e}", condition.name)))?;
                Ok(Self::Builtin { kind: *kind, params: condition.params.clone() })
            }
            (None, Some(endpoint)) => {
                let endpoint: Endpoint = endpoint.parse().map_err(|e| config_err(format!("condition {}: {e}", condition.name)))?;
                let timeout = Duration::from_secs_f64(condition.timeout_secs);
                let generator = ExternalGenerator::connect(&endpoint, timeout, condition.max_connections)
                    .map_err(|e| CampaignError::Generator(format!("condition {}: cannot reach {endpoint}: {e}", condition.name)))?;
                Ok(Self::External(Arc::new(generator)))
            }
            _ => Err(config_err(format!("condition {} needs exactly one of builtin or endpoint", condition.name))),
        }
    }

    /// The generator for cell `seed`. Only the synthetic families depend on it.
    pub fn generator(&self, seed: u64) -> Result<Arc<dyn Generator>, CampaignError> {
        match self {
            Self::Builtin { kind, params } => make_builtin(*kind, params, seed)
                .map(|g| Arc::new(g) as Arc<dyn Generator>)
                .map_err(|e| config_err(e.to_string())),
            Self::External(g) => Ok(g.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let text = c.to_toml();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
        assert_eq!(RunConfig::from_toml("").unwrap(), c);
    }

    #[test]
    fn hash_ignores_out_dir_and_jobs() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out_dir = "elsewhere".into();
        b.jobs = 3;
        assert_eq!(a.content_hash(), b.content_hash());
        b.probe.neighbor_count = 4;
        assert_ne!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn rejects_invalid_configs() {
        for bad in [
            "[probe]\nfd_epsilon = 0.0",
            "[seeds]\ncount = 0",
            "[[conditions]]\nname = \"a\"",
            "[[conditions]]\nname = \"a\"\nbuiltin = \"saddle\"\n[[conditions]]\nname = \"a\"\nbuiltin = \"saddle\"",
            "[[conditions]]\nname = \"a\"\nendpoint = \"ftp://x\"",
            "bogus = 1",
        ] {
            assert!(matches!(RunConfig::from_toml(bad), Err(CampaignError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn seed_list_is_sorted() {
        let c = RunConfig::from_toml("[seeds]\nlist = [5, 1, 3]").unwrap();
        assert_eq!(c.seed_list(), vec![1, 3, 5]);
    }
}
