//! Experiment manifests: a human-readable TOML file fully determines one
//! experiment, and the snapshot embedded in every run's metadata record is
//! enough to reproduce it bit for bit.

use ilc_core::controller::CampaignConfig;
use ilc_core::plant::{State, SystemParams, DEFAULT_INITIAL};
use ilc_core::surrogate::ParamSpace;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    #[serde(rename = "trajectory")]
    Trajectory,
    #[serde(rename = "sweep")]
    Sweep,
    #[serde(rename = "floor")]
    Floor,
    #[serde(rename = "campaign-1d")]
    Campaign1d,
    #[serde(rename = "campaign-2d")]
    Campaign2d,
    #[serde(rename = "campaign-robust")]
    CampaignRobust,
    #[serde(rename = "psd")]
    Psd,
    #[serde(rename = "phase")]
    Phase,
    #[serde(rename = "smi-scan")]
    SmiScan,
}

impl Kind {
    pub const ALL: [Kind; 9] = [
        Kind::Trajectory,
        Kind::Sweep,
        Kind::Floor,
        Kind::Campaign1d,
        Kind::Campaign2d,
        Kind::CampaignRobust,
        Kind::Psd,
        Kind::Phase,
        Kind::SmiScan,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Kind::Trajectory => "trajectory",
            Kind::Sweep => "sweep",
            Kind::Floor => "floor",
            Kind::Campaign1d => "campaign-1d",
            Kind::Campaign2d => "campaign-2d",
            Kind::CampaignRobust => "campaign-robust",
            Kind::Psd => "psd",
            Kind::Phase => "phase",
            Kind::SmiScan => "smi-scan",
        }
    }

    /// Figure data files this experiment kind produces.
    pub fn figures(&self) -> &'static [&'static str] {
        match self {
            Kind::Trajectory => &["fig2", "fig4a", "fig4b"],
            Kind::Sweep => &["fig5a"],
            Kind::Floor => &["fig6"],
            Kind::Campaign1d => &["fig7", "fig8"],
            Kind::Campaign2d => &["fig9"],
            Kind::CampaignRobust => &["fig10"],
            Kind::Psd => &["fig11a"],
            Kind::Phase => &["fig11b"],
            Kind::SmiScan => &["fig12a", "fig12b"],
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            Kind::Trajectory => "time response to a parameter step with optional fingerprint emission",
            Kind::Sweep => "distance landscape over one parameter with carry-over",
            Kind::Floor => "Monte Carlo confidence floor under input perturbation",
            Kind::Campaign1d => "single-parameter tuning campaign with per-iteration model snapshots",
            Kind::Campaign2d => "two-parameter tuning campaign and final model map",
            Kind::CampaignRobust => "two-parameter campaign under a hidden parameter drift",
            Kind::Psd => "Welch power spectra of the state variables",
            Kind::Phase => "Hilbert instantaneous phase of the measurement",
            Kind::SmiScan => "greedy embedding-lag scan by shadow manifold interpolation",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_dt() -> f64 {
    0.01
}
fn default_n() -> usize {
    100_000
}
fn default_rtol() -> f64 {
    1e-6
}
fn default_atol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_n")]
    pub n_keep: usize,
    #[serde(default = "default_n")]
    pub n_discard: usize,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            n_keep: default_n(),
            n_discard: default_n(),
            rtol: default_rtol(),
            atol: default_atol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        let p = SystemParams::default();
        Self {
            sigma: p.sigma,
            rho: p.rho,
            beta: p.beta,
        }
    }
}

fn default_tau1() -> f64 {
    0.17
}
fn default_bins() -> usize {
    20
}
fn default_padding() -> f64 {
    0.25
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSection {
    #[serde(default = "default_tau1")]
    pub tau1: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_padding")]
    pub padding: f64,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        Self {
            tau1: default_tau1(),
            bins: default_bins(),
            padding: default_padding(),
        }
    }
}

fn default_xi() -> f64 {
    0.1
}
fn default_curve_points() -> usize {
    200
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub parameters: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n_prior: usize,
    pub n_iterations: usize,
    #[serde(default = "default_xi")]
    pub xi: f64,
    /// Hidden drifts applied to every test run but not the reference.
    #[serde(default)]
    pub hidden: BTreeMap<String, f64>,
    /// Emit per-iteration model curves (1D campaigns).
    #[serde(default = "default_true")]
    pub snapshots: bool,
    /// Resolution of emitted model curves/maps, per axis.
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

fn default_floor_runs() -> usize {
    1000
}
fn default_perturbation() -> f64 {
    0.01
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorSection {
    #[serde(default = "default_floor_runs")]
    pub n_runs: usize,
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    /// Carry plant state across runs instead of fresh initial conditions.
    #[serde(default)]
    pub carry_over: bool,
}

impl Default for FloorSection {
    fn default() -> Self {
        Self {
            n_runs: default_floor_runs(),
            perturbation: default_perturbation(),
            carry_over: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    /// Simulated time discarded before the emitted window.
    pub warmup: f64,
    /// Emitted time before the parameter change (at reference values).
    pub pre_duration: f64,
    /// Emitted time after the change.
    #[serde(default)]
    pub post_duration: f64,
    /// Parameter overrides applied at t = 0. Empty means no change.
    #[serde(default)]
    pub change: BTreeMap<String, f64>,
    /// Also emit the unbinned and binned fingerprint of the emitted window.
    #[serde(default)]
    pub emit_tlpp: bool,
    /// Unbinned fingerprint points to emit.
    #[serde(default = "default_tlpp_points")]
    pub tlpp_points: usize,
}

fn default_tlpp_points() -> usize {
    5_000
}

fn default_psd_step() -> f64 {
    0.001
}
fn default_psd_points() -> usize {
    1_000_000
}
fn default_psd_segment() -> usize {
    100_000
}
fn default_psd_warmup() -> usize {
    20_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdSection {
    /// Output step of the spectral run.
    #[serde(default = "default_psd_step")]
    pub step: f64,
    #[serde(default = "default_psd_points")]
    pub n_points: usize,
    #[serde(default = "default_psd_segment")]
    pub segment: usize,
    #[serde(default)]
    pub overlap: usize,
    #[serde(default = "default_psd_warmup")]
    pub warmup_points: usize,
}

impl Default for PsdSection {
    fn default() -> Self {
        Self {
            step: default_psd_step(),
            n_points: default_psd_points(),
            segment: default_psd_segment(),
            overlap: 0,
            warmup_points: default_psd_warmup(),
        }
    }
}

fn default_e_max() -> usize {
    4
}
fn default_tau_start() -> f64 {
    0.01
}
fn default_tau_stop() -> f64 {
    0.5
}
fn default_tau_count() -> usize {
    50
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmiSection {
    #[serde(default = "default_e_max")]
    pub e_max: usize,
    #[serde(default = "default_tau_start")]
    pub tau_start: f64,
    #[serde(default = "default_tau_stop")]
    pub tau_stop: f64,
    #[serde(default = "default_tau_count")]
    pub tau_count: usize,
}

impl Default for SmiSection {
    fn default() -> Self {
        Self {
            e_max: default_e_max(),
            tau_start: default_tau_start(),
            tau_stop: default_tau_stop(),
            tau_count: default_tau_count(),
        }
    }
}

/// One experiment, fully specified.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub kind: Kind,
    pub seed: u64,
    #[serde(default)]
    pub plant: PlantSection,
    #[serde(default)]
    pub reference: ReferenceSection,
    #[serde(default)]
    pub embedding: EmbeddingSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<FloorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectorySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psd: Option<PsdSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smi: Option<SmiSection>,
}

impl ExperimentManifest {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        let value: toml::Value = toml::from_str(&text)
            .map_err(|e| anyhow::anyhow!("cannot parse {}: {e}", path.display()))?;
        // A metadata record embeds the original manifest; accept it
        // directly so a run can be reproduced from its own metadata.
        let manifest_value = match value.get("manifest") {
            Some(snapshot) if value.get("config_sha256").is_some() => snapshot.clone(),
            _ => value,
        };
        let manifest: ExperimentManifest = manifest_value
            .try_into()
            .map_err(|e| anyhow::anyhow!("invalid manifest {}: {e}", path.display()))?;
        Ok(manifest)
    }

    pub fn reference_params(&self) -> Result<SystemParams, String> {
        SystemParams::new(self.reference.sigma, self.reference.rho, self.reference.beta)
            .map_err(|e| e.to_string())
    }

    /// Structural validation: everything checkable without running the
    /// plant. Returns all problems found, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let mut check = |condition: bool, message: String| {
            if !condition {
                errors.push(message);
            }
        };

        check(self.plant.dt > 0.0, format!("plant.dt must be positive, got {}", self.plant.dt));
        check(self.plant.n_keep >= 1, "plant.n_keep must be at least 1".to_string());
        check(self.plant.rtol > 0.0 && self.plant.atol > 0.0, "plant tolerances must be positive".to_string());
        if let Err(e) = self.reference_params() {
            check(false, format!("reference: {e}"));
        }
        if let Err(e) = ilc_core::embedding::lag_index(self.embedding.tau1, self.plant.dt) {
            check(false, format!("embedding.tau1: {e}"));
        }
        check(self.embedding.bins >= 1, "embedding.bins must be at least 1".to_string());
        check(
            self.embedding.padding >= 0.0,
            format!("embedding.padding must be non-negative, got {}", self.embedding.padding),
        );

        let needs_controller = matches!(
            self.kind,
            Kind::Campaign1d | Kind::Campaign2d | Kind::CampaignRobust
        );
        if needs_controller {
            match &self.controller {
                None => check(false, format!("kind `{}` requires a [controller] section", self.kind)),
                Some(c) => {
                    let expected_dim = match self.kind {
                        Kind::Campaign1d => 1,
                        _ => 2,
                    };
                    check(
                        c.parameters.len() == expected_dim,
                        format!(
                            "kind `{}` controls {} parameter(s), got {}",
                            self.kind,
                            expected_dim,
                            c.parameters.len()
                        ),
                    );
                    check(
                        c.lower.len() == c.parameters.len() && c.upper.len() == c.parameters.len(),
                        "controller.lower/upper must match controller.parameters in length".to_string(),
                    );
                    for ((name, &lo), &hi) in c.parameters.iter().zip(&c.lower).zip(&c.upper) {
                        check(
                            SystemParams::NAMES.contains(&name.as_str()),
                            format!("unknown controlled parameter `{name}`"),
                        );
                        check(lo < hi, format!("bounds for `{name}` need lower < upper, got [{lo}, {hi}]"));
                    }
                    for (name, &value) in &c.hidden {
                        check(
                            SystemParams::NAMES.contains(&name.as_str()),
                            format!("unknown hidden parameter `{name}`"),
                        );
                        check(value > 0.0, format!("hidden override `{name}` must be positive"));
                        check(
                            !c.parameters.contains(name),
                            format!("parameter `{name}` cannot be both controlled and hidden"),
                        );
                    }
                    check(c.n_prior >= 2, format!("controller.n_prior must be at least 2, got {}", c.n_prior));
                    check(c.xi >= 0.0, format!("controller.xi must be non-negative, got {}", c.xi));
                    check(c.curve_points >= 2, "controller.curve_points must be at least 2".to_string());
                    if self.kind == Kind::CampaignRobust {
                        check(
                            !c.hidden.is_empty(),
                            "campaign-robust needs at least one hidden override".to_string(),
                        );
                    }
                }
            }
        }

        match self.kind {
            Kind::Sweep => match &self.sweep {
                None => check(false, "kind `sweep` requires a [sweep] section".to_string()),
                Some(s) => {
                    check(
                        SystemParams::NAMES.contains(&s.parameter.as_str()),
                        format!("unknown sweep parameter `{}`", s.parameter),
                    );
                    check(s.count >= 1, "sweep.count must be at least 1".to_string());
                    check(
                        s.start < s.stop || s.count == 1,
                        format!("sweep range needs start < stop, got [{}, {}]", s.start, s.stop),
                    );
                    check(s.start > 0.0, "sweep values must stay positive".to_string());
                }
            },
            Kind::Floor => {
                let f = self.floor.clone().unwrap_or_default();
                check(f.n_runs >= 2, format!("floor.n_runs must be at least 2, got {}", f.n_runs));
                check(
                    (0.0..1.0).contains(&f.perturbation),
                    format!("floor.perturbation must be in [0, 1), got {}", f.perturbation),
                );
            }
            Kind::Trajectory => match &self.trajectory {
                None => check(false, "kind `trajectory` requires a [trajectory] section".to_string()),
                Some(t) => {
                    check(t.pre_duration > 0.0, "trajectory.pre_duration must be positive".to_string());
                    check(t.warmup >= 0.0, "trajectory.warmup must be non-negative".to_string());
                    check(
                        t.post_duration >= 0.0,
                        "trajectory.post_duration must be non-negative".to_string(),
                    );
                    check(
                        t.change.is_empty() || t.post_duration > 0.0,
                        "a parameter change needs trajectory.post_duration > 0".to_string(),
                    );
                    for (name, &value) in &t.change {
                        check(
                            SystemParams::NAMES.contains(&name.as_str()),
                            format!("unknown changed parameter `{name}`"),
                        );
                        check(value > 0.0, format!("changed parameter `{name}` must be positive"));
                    }
                }
            },
            Kind::Psd => {
                let p = self.psd.clone().unwrap_or_default();
                check(p.step > 0.0, "psd.step must be positive".to_string());
                check(
                    p.segment <= p.n_points,
                    format!("psd.segment ({}) exceeds psd.n_points ({})", p.segment, p.n_points),
                );
                check(p.overlap < p.segment, "psd.overlap must be smaller than psd.segment".to_string());
            }
            Kind::SmiScan => {
                let s = self.smi.clone().unwrap_or_default();
                check(s.e_max >= 2, format!("smi.e_max must be at least 2, got {}", s.e_max));
                check(s.tau_count >= 1, "smi.tau_count must be at least 1".to_string());
                for tau in tau_grid(&s, self.plant.dt) {
                    if ilc_core::embedding::lag_index(tau, self.plant.dt).is_err() {
                        check(false, format!("smi grid lag {tau} is not a multiple of plant.dt"));
                        break;
                    }
                }
            }
            _ => {}
        }

        errors
    }

    /// Controller campaign config for the campaign kinds.
    pub fn campaign_config(&self) -> anyhow::Result<CampaignConfig> {
        let c = self
            .controller
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("manifest has no [controller] section"))?;
        let entries: Vec<(&str, f64, f64)> = c
            .parameters
            .iter()
            .zip(&c.lower)
            .zip(&c.upper)
            .map(|((name, &lo), &hi)| (name.as_str(), lo, hi))
            .collect();
        let space = ParamSpace::new(&entries).map_err(|e| anyhow::anyhow!("{e}"))?;
        let mut config = CampaignConfig::defaults(space, self.seed);
        config.reference = self.reference_params().map_err(|e| anyhow::anyhow!("{e}"))?;
        config.hidden = c.hidden.iter().map(|(k, &v)| (k.clone(), v)).collect();
        config.n_prior = c.n_prior;
        config.n_iterations = c.n_iterations;
        config.xi = c.xi;
        config.tau1 = self.embedding.tau1;
        config.bins = self.embedding.bins;
        config.padding = self.embedding.padding;
        config.dt = self.plant.dt;
        config.n_keep = self.plant.n_keep;
        config.n_discard = self.plant.n_discard;
        Ok(config)
    }

    /// Campaign-shaped config for the non-campaign kinds that still need
    /// reference/grid/plant settings.
    pub fn base_config(&self) -> anyhow::Result<CampaignConfig> {
        let space = ParamSpace::new(&[("rho", 1.0, 2.0)]).map_err(|e| anyhow::anyhow!("{e}"))?;
        let mut config = CampaignConfig::defaults(space, self.seed);
        config.reference = self.reference_params().map_err(|e| anyhow::anyhow!("{e}"))?;
        config.tau1 = self.embedding.tau1;
        config.bins = self.embedding.bins;
        config.padding = self.embedding.padding;
        config.dt = self.plant.dt;
        config.n_keep = self.plant.n_keep;
        config.n_discard = self.plant.n_discard;
        if let Some(f) = &self.floor {
            config.floor_carry_over = f.carry_over;
        }
        Ok(config)
    }

    pub fn initial_state(&self) -> State {
        DEFAULT_INITIAL
    }
}

pub fn tau_grid(s: &SmiSection, dt: f64) -> Vec<f64> {
    // Snap the requested range onto exact multiples of dt.
    let start = (s.tau_start / dt).round().max(1.0) as usize;
    let stop = (s.tau_stop / dt).round() as usize;
    if s.tau_count <= 1 || stop <= start {
        return vec![start as f64 * dt];
    }
    let span = stop - start;
    let mut grid: Vec<usize> = (0..s.tau_count)
        .map(|k| start + (span * k) / (s.tau_count - 1))
        .collect();
    grid.dedup();
    grid.into_iter().map(|n| n as f64 * dt).collect()
}
