//! TOML run configuration: the single source of truth for every numeric
//! setting. CLI flags override individual fields; nothing else does.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::abm::WorldConfig;
use crate::equilibria::{BasinSpec, SearchBox};
use crate::error::{Result, TrapError};
use crate::integrate::IntegrationSettings;
use crate::model::{ParameterSet, StateVector};

/// Equilibrium multistart settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    /// Halton starts per search.
    pub n_starts: usize,
    /// Search box lower corner; None derives it from the parameters.
    pub box_lo: Option<[f64; 3]>,
    /// Search box upper corner; None derives it from the parameters.
    pub box_hi: Option<[f64; 3]>,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self { n_starts: 200, box_lo: None, box_hi: None }
    }
}

impl SearchSettings {
    /// The configured box, or the parameter-derived default.
    pub fn search_box(&self, params: &ParameterSet) -> Result<SearchBox> {
        let mut b = SearchBox::default_for(params);
        if let Some(lo) = self.box_lo {
            b.lo = StateVector::from_array(lo);
        }
        if let Some(hi) = self.box_hi {
            b.hi = StateVector::from_array(hi);
        }
        b.validate()?;
        Ok(b)
    }
}

/// Basin grid settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasinSettings {
    /// Nodes along (k_a, k_s, k_i).
    pub resolution: [usize; 3],
}

impl Default for BasinSettings {
    fn default() -> Self {
        Self { resolution: [41, 41, 41] }
    }
}

impl BasinSettings {
    /// Grid spec over the configured search box.
    pub fn spec(&self, params: &ParameterSet, search: &SearchSettings) -> Result<BasinSpec> {
        let b = search.search_box(params)?;
        let spec = BasinSpec { lo: b.lo, hi: b.hi, resolution: self.resolution };
        spec.validate()?;
        Ok(spec)
    }
}

/// Trajectory-run settings for the simulate command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    /// Initial state (k_a, k_s, k_i).
    pub state0: [f64; 3],
    /// Integration end time.
    pub t_end: f64,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self { state0: [0.5, 0.8, 0.5], t_end: 50.0 }
    }
}

/// Complete tool configuration; every section falls back to its default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Seed for deterministic multistart and perturbation draws.
    pub seed: u64,
    /// Dynamical-system parameters.
    pub params: ParameterSet,
    /// Integrator tolerances and limits.
    pub integration: IntegrationSettings,
    /// Equilibrium search settings.
    pub search: SearchSettings,
    /// Basin grid settings.
    pub basins: BasinSettings,
    /// Simulate-command settings.
    pub simulate: SimulateSettings,
    /// Agent-based model settings.
    pub abm: WorldConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            params: ParameterSet::default(),
            integration: IntegrationSettings::default(),
            search: SearchSettings::default(),
            basins: BasinSettings::default(),
            simulate: SimulateSettings::default(),
            abm: WorldConfig::default(),
        }
    }
}

impl SimConfig {
    /// Parses a TOML string; Err(Config) carries the parser diagnostic.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimConfig =
            toml::from_str(text).map_err(|e| TrapError::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and parses a TOML file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Cross-checks all sections.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.integration.validate()?;
        self.search.search_box(&self.params)?;
        self.basins.spec(&self.params, &self.search)?;
        self.abm.validate()?;
        if self.search.n_starts == 0 {
            return Err(TrapError::Config("search.n_starts must be >= 1".into()));
        }
        let s = StateVector::from_array(self.simulate.state0);
        if !s.is_finite() || !s.is_nonnegative() {
            return Err(TrapError::Config(format!("simulate.state0 {s:?} must be nonnegative")));
        }
        if !(self.simulate.t_end > 0.0 && self.simulate.t_end.is_finite()) {
            return Err(TrapError::Config("simulate.t_end must be a positive finite time".into()));
        }
        Ok(())
    }

    /// Serializes the configuration to TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| TrapError::Config(format!("config write: {e}")))
    }
}

/// SHA-256 of raw bytes as lowercase hex; used to fingerprint config files.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// The annotated baseline configuration shipped with the tool. Parsing it
/// yields exactly `SimConfig::default()` (enforced by a test).
pub const ANNOTATED_BASELINE: &str = r#"# Baseline configuration: a bistable social-ecological landscape with a poor
# attractor (low assets/innovation, near-pristine soil) and a well-being
# attractor (high assets/innovation, working soil). Every numeric setting the
# tool uses lives here; CLI flags override individual fields.

# Seed for the deterministic multistart and perturbation draws.
seed = 42

[params]            # three-state dynamical system
s0 = 0.1054         # savings floor
s1 = 0.346          # savings gain at high assets
s2 = 0.6105         # savings sigmoid half-saturation (k_a^m units)
m = 2.0             # savings sigmoid exponent
a0 = 1.464          # baseline total-factor productivity
a1 = 1.5            # productivity gain from innovation
a2 = 7.5663         # innovation-productivity half-saturation (k_i^n units)
n = 2.0             # innovation-productivity exponent
alpha_a = 0.5       # asset elasticity of production
alpha_s = 0.5       # soil elasticity of production
delta_a = 0.4465    # asset depreciation
r_s = 1.09          # intrinsic soil regeneration
K = 1.0             # soil carrying capacity
d1 = 0.5            # max innovation-driven soil damage (fold near 0.8)
d2 = 0.1641         # damage half-saturation (k_i^p units)
p = 2.0             # damage exponent
c1 = 2.2633         # innovation productivity plateau
c2 = 0.15           # low-asset innovation boost
c3 = 1.0            # low-asset boost decay scale
c4 = 2.0            # asset-gating gain
c5 = 0.3733         # asset-gate half-saturation
delta_i = 1.006     # innovation resource depreciation

[integration]       # adaptive Dormand-Prince 4(5)
rel_tol = 1e-6
abs_tol = 1e-9
max_step = 5.0
min_step = 1e-12
t_max = 10000.0     # model-time budget for attractor searches
convergence_tol = 1e-5

[search]            # equilibrium multistart
n_starts = 200
# box_lo / box_hi override the parameter-derived search box, e.g.
# box_lo = [1e-6, 1e-6, 1e-6]

[basins]
resolution = [41, 41, 41]

[simulate]
state0 = [0.5, 0.8, 0.5]
t_end = 50.0

[abm]               # stylized agricultural-innovation model
n_producers = 100
n_innovators = 5
plots_per_producer = 3
mechanism = "endogenous"       # or "exogenous"
env_damage = "low"             # or "high"
climate_event_prob = 0.15
climate_yield_shock = 0.9
consumption_need = 1.55
pooling_rate = 0.02
adoption_threshold = 0.2
fertility_recovery_rate = 0.05
steps = 200
seed = 42
external_capital_per_step = 0.01   # exogenous mechanism only
network_size = 40
develop_capital_threshold = 1.0
develop_demand_threshold = 0.01
develop_cooldown = 8
innovation_gain_max = 0.8
adoption_cost_per_gain = 1.5
damage_low = [0.0, 0.002]
damage_high = [0.005, 0.02]
init_assets = [0.5, 2.0]
init_soil = [0.3, 0.7]
init_desire = [0.3, 0.7]
init_capital = [0.0, 0.5]
init_efficiency = [0.2, 1.0]

[abm.crops]
sorghum = { base_yield = 0.80, climate_sensitivity = 0.20 }
millet = { base_yield = 0.95, climate_sensitivity = 0.35 }
maize = { base_yield = 1.15, climate_sensitivity = 0.60 }
rice = { base_yield = 1.35, climate_sensitivity = 0.80 }
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotated_baseline_parses_to_defaults() {
        let cfg = SimConfig::from_toml(ANNOTATED_BASELINE).unwrap();
        assert_eq!(cfg, SimConfig::default());
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg = SimConfig::from_toml("[params]\nd1 = 1.2\n").unwrap();
        assert_eq!(cfg.params.d1, 1.2);
        assert_eq!(cfg.params.a1, ParameterSet::baseline().a1);
        assert_eq!(cfg.search.n_starts, 200);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let err = SimConfig::from_toml("[params]\nd_one = 1.2\n");
        assert!(matches!(err, Err(TrapError::Config(_))), "got {err:?}");
        assert!(SimConfig::from_toml("typo = true\n").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(SimConfig::from_toml("[params]\nd1 = -0.5\n").is_err());
        assert!(SimConfig::from_toml("[integration]\nrel_tol = 0.0\n").is_err());
        assert!(SimConfig::from_toml("[simulate]\nt_end = -1.0\n").is_err());
        assert!(SimConfig::from_toml("[abm]\nn_producers = 0\n").is_err());
    }

    #[test]
    fn roundtrip_through_toml() {
        let mut cfg = SimConfig::default();
        cfg.params.a1 = 2.25;
        cfg.abm.steps = 17;
        let text = cfg.to_toml().unwrap();
        assert_eq!(SimConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn sha256_matches_known_vector() {
        // sha256("abc") from FIPS 180-2.
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn search_box_overrides_apply() {
        let cfg = SimConfig::from_toml(
            "[search]\nbox_lo = [0.001, 0.001, 1e-6]\nbox_hi = [4.0, 1.0, 4.0]\n",
        )
        .unwrap();
        let b = cfg.search.search_box(&cfg.params).unwrap();
        assert_eq!(b.hi.k_a, 4.0);
        assert_eq!(b.lo.k_i, 1e-6);
        // A zero lower corner is rejected: the search needs interior starts.
        let zero = SimConfig::from_toml("[search]\nbox_lo = [0.0, 0.001, 1e-6]\n");
        assert!(zero.is_err());
    }
}
