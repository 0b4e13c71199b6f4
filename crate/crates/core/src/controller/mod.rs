//! The closed tuning loop.
//!
//! A campaign builds a reference fingerprint once, seeds a surrogate with a
//! few random prior measurements, then repeats measure -> compare -> learn
//! -> actuate: run the plant at the suggested inputs (carrying the final
//! state of the previous run over as the initial condition), fingerprint the
//! measurement, score it against the reference with the Earth Mover's
//! Distance, refit the surrogate, and ask it where to test next. One
//! actuation happens per plant run, so the loop closes at the slow
//! measurement timescale no matter how fast the plant's own dynamics are.

use crate::embedding::{bin, embed, shared_grid, BinnedPdf, EmbeddingError, GridSpec};
use crate::plant::{Plant, PlantError, PlantRunSpec, State, SystemParams, DEFAULT_INITIAL};
use crate::seeds::stream_rng;
use crate::surrogate::{
    self, GpConfig, GpModel, Observation, ParamSpace, SurrogateError,
};
use crate::transport::{emd, EmdError};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

// Stream ids for the counter-based seed split.
const STREAM_PRIOR: u64 = 1;
const STREAM_MINIMUM: u64 = 2;
const STREAM_SUGGEST_BASE: u64 = 0x100;
const STREAM_RETRY_BASE: u64 = 0x10_000;
const STREAM_FLOOR_BASE: u64 = 0x1_000_000;

/// Raw distances of exactly zero would break the log10 objective; anything
/// below one count-unit of work is treated as floor.
const OBJECTIVE_EPSILON: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("invalid campaign config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Emd(#[from] EmdError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

/// Everything that defines a campaign. The config plus the seed reproduce a
/// campaign bit for bit.
#[derive(Debug, Clone)]
pub struct CampaignConfig {
    /// Inputs that produced the desired reference dynamics.
    pub reference: SystemParams,
    /// Controlled parameters and their actuation bounds.
    pub space: ParamSpace,
    /// Parameters the controller can neither measure nor actuate, applied
    /// to every test run but not to the reference.
    pub hidden: Vec<(String, f64)>,
    /// Random prior measurements before the loop closes.
    pub n_prior: usize,
    /// Closed-loop iterations after the priors.
    pub n_iterations: usize,
    /// Expected-improvement exploration weight.
    pub xi: f64,
    /// Embedding lag (time units).
    pub tau1: f64,
    /// Fingerprint grid resolution per axis.
    pub bins: usize,
    /// Grid padding around the reference extents.
    pub padding: f64,
    /// Plant output step.
    pub dt: f64,
    /// Points kept per run.
    pub n_keep: usize,
    /// Transient points discarded per run.
    pub n_discard: usize,
    /// Root seed; all randomness derives from it.
    pub seed: u64,
    /// Initial condition when no carry-over state exists.
    pub initial: State,
    pub gp: GpConfig,
    /// Optional early stop: end the loop once the posterior stddev at the
    /// model minimum falls below this value. Off by default.
    pub stop_stddev: Option<f64>,
    /// Carry plant state across Monte Carlo runs instead of restarting
    /// each run from `initial`.
    pub floor_carry_over: bool,
}

impl CampaignConfig {
    /// Campaign defaults: the classic reference point, dt 0.01 with 1e5
    /// points discarded and 1e5 kept, lag 0.17, 20x20 grid with 25%
    /// padding, 5 priors + 10 iterations at xi 0.1.
    pub fn defaults(space: ParamSpace, seed: u64) -> Self {
        Self {
            reference: SystemParams::default(),
            space,
            hidden: Vec::new(),
            n_prior: 5,
            n_iterations: 10,
            xi: 0.1,
            tau1: 0.17,
            bins: 20,
            padding: 0.25,
            dt: 0.01,
            n_keep: 100_000,
            n_discard: 100_000,
            seed,
            initial: DEFAULT_INITIAL,
            gp: GpConfig::default(),
            stop_stddev: None,
            floor_carry_over: false,
        }
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |msg: String| Err(ControllerError::InvalidConfig(msg));
        self.reference
            .validate()
            .map_err(|e| ControllerError::InvalidConfig(e.to_string()))?;
        if self.n_prior < 2 {
            return bad(format!("n_prior must be at least 2, got {}", self.n_prior));
        }
        if self.bins == 0 {
            return bad("bins must be at least 1".into());
        }
        if !(self.padding >= 0.0) {
            return bad(format!("padding must be non-negative, got {}", self.padding));
        }
        if !(self.xi >= 0.0) {
            return bad(format!("xi must be non-negative, got {}", self.xi));
        }
        crate::embedding::lag_index(self.tau1, self.dt)
            .map_err(|e| ControllerError::InvalidConfig(e.to_string()))?;
        for name in self.space.names() {
            if !SystemParams::NAMES.contains(&name.as_str()) {
                return bad(format!("unknown controlled parameter `{name}`"));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in self.space.names() {
            if !seen.insert(name.clone()) {
                return bad(format!("controlled parameter `{name}` repeated"));
            }
        }
        for (name, value) in &self.hidden {
            if !SystemParams::NAMES.contains(&name.as_str()) {
                return bad(format!("unknown hidden parameter `{name}`"));
            }
            if seen.contains(name) {
                return bad(format!(
                    "parameter `{name}` cannot be both controlled and hidden"
                ));
            }
            if !(*value > 0.0) {
                return bad(format!("hidden override `{name}` must be positive"));
            }
        }
        Ok(())
    }

    /// Simulated plant time consumed per actuation (one full run).
    pub fn actuation_interval(&self) -> f64 {
        (self.n_keep + self.n_discard) as f64 * self.dt
    }

    /// Reference values overridden by hidden drifts, then by the candidate
    /// values of the controlled parameters.
    pub fn merge_params(&self, candidate: &[f64]) -> Result<SystemParams, ControllerError> {
        if candidate.len() != self.space.dim() {
            return Err(ControllerError::InvalidConfig(format!(
                "candidate has {} values for {} controlled parameters",
                candidate.len(),
                self.space.dim()
            )));
        }
        let mut params = self.reference;
        for (name, value) in &self.hidden {
            params
                .set(name, *value)
                .map_err(|e| ControllerError::InvalidConfig(e.to_string()))?;
        }
        for (name, &value) in self.space.names().iter().zip(candidate) {
            params
                .set(name, value)
                .map_err(|e| ControllerError::InvalidConfig(e.to_string()))?;
        }
        params
            .validate()
            .map_err(|e| ControllerError::InvalidConfig(e.to_string()))?;
        Ok(params)
    }

    fn run_spec(&self, params: SystemParams, initial: State) -> Result<PlantRunSpec, ControllerError> {
        Ok(PlantRunSpec::new(
            params,
            initial,
            self.dt,
            self.n_keep,
            self.n_discard,
        )?)
    }
}

/// The campaign-wide reference fingerprint, its grid, and the plant state
/// left behind by the reference run.
#[derive(Debug, Clone)]
pub struct Reference {
    pub pdf: BinnedPdf,
    pub grid: GridSpec,
    pub carry: State,
}

/// Where a tested condition came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuggestionSource {
    Prior,
    Acquisition,
}

/// One loop iteration: the condition tested and what it scored.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub index: usize,
    /// Controlled parameter values, raw units.
    pub params: Vec<f64>,
    pub raw_emd: f64,
    pub log10_emd: f64,
    pub source: SuggestionSource,
    /// Plant state after this run (the next run's initial condition).
    pub carry: State,
}

/// A plant evaluation that failed and was replaced.
#[derive(Debug, Clone)]
pub struct FailureRecord {
    pub index: usize,
    pub params: Vec<f64>,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub history: Vec<IterationRecord>,
    pub failures: Vec<FailureRecord>,
    pub final_model: GpModel,
    /// Minimum of the final model's posterior mean: the controller's best
    /// guess of the optimal inputs.
    pub best_guess: Vec<f64>,
    /// Lowest-objective condition actually measured.
    pub best_observed: Observation,
}

/// Gaussian fit of the Monte Carlo distance distribution; below
/// `mean + stddev` the minimum's location is not resolvable from a single
/// measurement.
#[derive(Debug, Clone)]
pub struct ConfidenceFloor {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
    pub floor: f64,
}

/// Floor-relative similarity thresholds in log10(EMD) units, the analogue
/// of fixed quality contours: `log10(floor) + k * 0.1` for k = 1, 3.
pub fn similarity_thresholds(floor: f64) -> (f64, f64) {
    let base = floor.log10();
    (base + 0.1, base + 0.3)
}

/// A parameter value paired with its measured distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub raw_emd: f64,
    pub log10_emd: f64,
}

/// Run the plant at the reference inputs, fingerprint the measurement, and
/// derive the campaign-wide grid from it.
pub fn build_reference(
    plant: &impl Plant,
    config: &CampaignConfig,
) -> Result<Reference, ControllerError> {
    config.validate()?;
    let traj = plant.run(&config.run_spec(config.reference, config.initial)?)?;
    let embedded = embed(&traj.xs(), &[config.tau1], config.dt)?;
    let grid = shared_grid(&embedded, config.bins, config.padding)?;
    let pdf = bin(&embedded, &grid)?;
    Ok(Reference {
        pdf,
        grid,
        carry: traj.last_state(),
    })
}

/// Run, fingerprint, and score one fully specified condition.
fn measure(
    plant: &impl Plant,
    config: &CampaignConfig,
    reference: &Reference,
    params: SystemParams,
    initial: State,
) -> Result<(f64, State), ControllerError> {
    let traj = plant.run(&config.run_spec(params, initial)?)?;
    let embedded = embed(&traj.xs(), &[config.tau1], config.dt)?;
    let pdf = bin(&embedded, &reference.grid)?;
    let raw = emd(&pdf, &reference.pdf)?;
    Ok((raw, traj.last_state()))
}

fn to_objective(raw_emd: f64) -> f64 {
    raw_emd.max(OBJECTIVE_EPSILON).log10()
}

/// Evaluate one candidate of the controlled parameters against the
/// reference, with hidden overrides applied and plant state carried over.
/// Returns the observation (log10 of the distance) and the carry-over
/// state for the next evaluation.
pub fn evaluate_condition(
    plant: &impl Plant,
    config: &CampaignConfig,
    reference: &Reference,
    candidate: &[f64],
    carry: State,
) -> Result<(Observation, State), ControllerError> {
    let params = config.merge_params(candidate)?;
    let (raw, next) = measure(plant, config, reference, params, carry)?;
    Ok((
        Observation {
            params: candidate.to_vec(),
            objective: to_objective(raw),
        },
        next,
    ))
}

struct LoopState {
    history: Vec<IterationRecord>,
    failures: Vec<FailureRecord>,
    observations: Vec<Observation>,
    carry: State,
}

impl LoopState {
    /// Evaluate `candidate`; on plant failure, record it and try `retry`
    /// instead. A second failure propagates.
    fn evaluate_with_retry(
        &mut self,
        plant: &impl Plant,
        config: &CampaignConfig,
        reference: &Reference,
        candidate: Vec<f64>,
        source: SuggestionSource,
        retry: impl FnOnce() -> Vec<f64>,
    ) -> Result<(), ControllerError> {
        let index = self.history.len();
        let attempt = |state: &mut Self, point: Vec<f64>| -> Result<(), ControllerError> {
            let params = config.merge_params(&point)?;
            let (raw, next) = measure(plant, config, reference, params, state.carry)?;
            state.carry = next;
            state.observations.push(Observation {
                params: point.clone(),
                objective: to_objective(raw),
            });
            state.history.push(IterationRecord {
                index,
                params: point,
                raw_emd: raw,
                log10_emd: to_objective(raw),
                source,
                carry: next,
            });
            Ok(())
        };
        match attempt(self, candidate.clone()) {
            Ok(()) => Ok(()),
            Err(ControllerError::Plant(e)) => {
                self.failures.push(FailureRecord {
                    index,
                    params: candidate,
                    message: e.to_string(),
                });
                attempt(self, retry())
            }
            Err(other) => Err(other),
        }
    }
}

/// Run a full campaign: reference build, seeded priors, then the closed
/// fit -> suggest -> evaluate loop. Identical configs (seed included)
/// produce identical results.
pub fn run_campaign(
    plant: &impl Plant,
    config: &CampaignConfig,
) -> Result<CampaignResult, ControllerError> {
    config.validate()?;
    let reference = build_reference(plant, config)?;
    let dim = config.space.dim();

    let mut state = LoopState {
        history: Vec::new(),
        failures: Vec::new(),
        observations: Vec::new(),
        carry: reference.carry,
    };

    let uniform_draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..dim)
            .map(|axis| {
                let lo = rng.gen::<f64>();
                config.space.lower()[axis] + lo * (config.space.upper()[axis] - config.space.lower()[axis])
            })
            .collect()
    };

    let mut prior_rng = stream_rng(config.seed, STREAM_PRIOR);
    for _ in 0..config.n_prior {
        let candidate = uniform_draw(&mut prior_rng);
        let mut retry_rng = stream_rng(config.seed, STREAM_RETRY_BASE + state.history.len() as u64);
        state.evaluate_with_retry(
            plant,
            config,
            &reference,
            candidate,
            SuggestionSource::Prior,
            || uniform_draw(&mut retry_rng),
        )?;
    }

    let mut model = surrogate::fit_with_warm_start(&state.observations, &config.space, &config.gp, None)?;
    for iteration in 0..config.n_iterations {
        let suggest_seed = config.seed;
        let candidate = model.suggest_next(config.xi, suggest_stream(suggest_seed, iteration, false));
        let retry_model = &model;
        state.evaluate_with_retry(
            plant,
            config,
            &reference,
            candidate,
            SuggestionSource::Acquisition,
            || retry_model.suggest_next(config.xi, suggest_stream(suggest_seed, iteration, true)),
        )?;

        let warm = model.hypers().clone();
        model = surrogate::fit_with_warm_start(
            &state.observations,
            &config.space,
            &config.gp,
            Some(&warm),
        )?;

        if let Some(threshold) = config.stop_stddev {
            let guess = model.model_minimum(stream_rng(config.seed, STREAM_MINIMUM).gen());
            let (_, sigma) = model.predict(&guess)?;
            if sigma < threshold {
                break;
            }
        }
    }

    let best_guess = model.model_minimum(stream_rng(config.seed, STREAM_MINIMUM).gen());
    let best_observed = state
        .observations
        .iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .expect("campaign has at least the priors")
        .clone();

    Ok(CampaignResult {
        history: state.history,
        failures: state.failures,
        final_model: model,
        best_guess,
        best_observed,
    })
}

fn suggest_stream(seed: u64, iteration: usize, retry: bool) -> u64 {
    let base = STREAM_SUGGEST_BASE + iteration as u64;
    let mut rng = stream_rng(seed, if retry { base + STREAM_RETRY_BASE } else { base });
    rng.gen()
}

/// Monte Carlo confidence floor: measure the distance distribution under a
/// fractional perturbation of all reference inputs, and fit a Gaussian to
/// it. Runs are independent (fresh initial conditions) and evaluated in
/// parallel unless `floor_carry_over` asks for sequential carry-over.
pub fn confidence_floor(
    plant: &impl Plant,
    config: &CampaignConfig,
    n_runs: usize,
    perturbation: f64,
) -> Result<ConfidenceFloor, ControllerError> {
    if n_runs < 2 {
        return Err(ControllerError::InvalidConfig(format!(
            "confidence floor needs at least 2 runs, got {n_runs}"
        )));
    }
    if !(0.0..1.0).contains(&perturbation) {
        return Err(ControllerError::InvalidConfig(format!(
            "perturbation must be in [0, 1), got {perturbation}"
        )));
    }
    let reference = build_reference(plant, config)?;

    let perturbed_params = |run: usize| -> SystemParams {
        let mut rng = stream_rng(config.seed, STREAM_FLOOR_BASE + run as u64);
        let mut params = config.reference;
        for name in SystemParams::NAMES {
            let nominal = params.get(name).expect("known name");
            let value = if perturbation > 0.0 {
                let normal = Normal::new(nominal, perturbation * nominal).expect("positive stddev");
                normal.sample(&mut rng).max(1e-6 * nominal)
            } else {
                nominal
            };
            params.set(name, value).expect("known name");
        }
        params
    };

    let samples: Vec<f64> = if config.floor_carry_over {
        let mut carry = reference.carry;
        let mut out = Vec::with_capacity(n_runs);
        for run in 0..n_runs {
            let (raw, next) = measure(plant, config, &reference, perturbed_params(run), carry)?;
            carry = next;
            out.push(raw);
        }
        out
    } else {
        (0..n_runs)
            .into_par_iter()
            .map(|run| {
                measure(plant, config, &reference, perturbed_params(run), config.initial)
                    .map(|(raw, _)| raw)
            })
            .collect::<Result<_, _>>()?
    };

    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let stddev = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Ok(ConfidenceFloor {
        samples,
        mean,
        stddev,
        floor: mean + stddev,
    })
}

/// Evaluate one plant parameter over an ordered list of values with
/// carry-over, scoring each against the reference.
pub fn parameter_sweep(
    plant: &impl Plant,
    config: &CampaignConfig,
    name: &str,
    values: &[f64],
) -> Result<Vec<SweepPoint>, ControllerError> {
    if !SystemParams::NAMES.contains(&name) {
        return Err(ControllerError::InvalidConfig(format!(
            "unknown sweep parameter `{name}`"
        )));
    }
    let reference = build_reference(plant, config)?;
    let mut carry = reference.carry;
    let mut out = Vec::with_capacity(values.len());
    for &value in values {
        let mut params = config.reference;
        for (hidden_name, hidden_value) in &config.hidden {
            params
                .set(hidden_name, *hidden_value)
                .map_err(|e| ControllerError::InvalidConfig(e.to_string()))?;
        }
        params
            .set(name, value)
            .map_err(|e| ControllerError::InvalidConfig(e.to_string()))?;
        params
            .validate()
            .map_err(|e| ControllerError::InvalidConfig(e.to_string()))?;
        let (raw, next) = measure(plant, config, &reference, params, carry)?;
        carry = next;
        out.push(SweepPoint {
            value,
            raw_emd: raw,
            log10_emd: to_objective(raw),
        });
    }
    Ok(out)
}

/// A scored candidate condition from a grid evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridScore {
    pub params: Vec<f64>,
    pub raw_emd: f64,
    pub log10_emd: f64,
}

/// Score many candidate conditions independently (fresh initial conditions,
/// hidden overrides applied), in parallel. The grid oracle behind dense
/// similarity maps.
pub fn evaluate_grid(
    plant: &impl Plant,
    config: &CampaignConfig,
    reference: &Reference,
    candidates: &[Vec<f64>],
) -> Result<Vec<GridScore>, ControllerError> {
    candidates
        .par_iter()
        .map(|candidate| {
            let params = config.merge_params(candidate)?;
            let (raw, _) = measure(plant, config, reference, params, config.initial)?;
            Ok(GridScore {
                params: candidate.clone(),
                raw_emd: raw,
                log10_emd: to_objective(raw),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{LorenzPlant, Trajectory};
    use approx::assert_relative_eq;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Short-run config so unit tests stay fast; statistics live in the
    /// acceptance suite.
    fn small_config(space: ParamSpace, seed: u64) -> CampaignConfig {
        let mut config = CampaignConfig::defaults(space, seed);
        config.n_keep = 4_000;
        config.n_discard = 2_000;
        config
    }

    fn rho_space() -> ParamSpace {
        ParamSpace::new(&[("rho", 15.0, 50.0)]).unwrap()
    }

    #[test]
    fn reference_is_deterministic_and_massive() {
        let plant = LorenzPlant::default();
        let config = small_config(rho_space(), 1);
        let a = build_reference(&plant, &config).unwrap();
        let b = build_reference(&plant, &config).unwrap();
        assert_eq!(a.pdf, b.pdf);
        assert_eq!(a.grid, b.grid);
        // Mass = kept points minus the lag index.
        assert_relative_eq!(a.pdf.total_mass, (config.n_keep - 17) as f64);
    }

    #[test]
    fn fixed_point_reference_collapses_to_few_cells() {
        let plant = LorenzPlant::default();
        let mut config = small_config(rho_space(), 2);
        config.reference = SystemParams::new(10.0, 0.5, 8.0 / 3.0).unwrap();
        let reference = build_reference(&plant, &config).unwrap();
        let top_cell = reference
            .pdf
            .counts
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        assert!(
            top_cell / reference.pdf.total_mass > 0.8,
            "top cell holds {} of {}",
            top_cell,
            reference.pdf.total_mass
        );
    }

    #[test]
    fn evaluating_the_reference_condition_scores_low() {
        let plant = LorenzPlant::default();
        let config = small_config(rho_space(), 3);
        let reference = build_reference(&plant, &config).unwrap();
        let (at_ref, _) =
            evaluate_condition(&plant, &config, &reference, &[28.0], reference.carry).unwrap();
        let (far, _) =
            evaluate_condition(&plant, &config, &reference, &[15.0], reference.carry).unwrap();
        assert!(
            at_ref.objective + 0.5 < far.objective,
            "reference {} vs far {}",
            at_ref.objective,
            far.objective
        );
    }

    #[test]
    fn consecutive_identical_conditions_stay_finite() {
        let plant = LorenzPlant::default();
        let config = small_config(rho_space(), 4);
        let reference = build_reference(&plant, &config).unwrap();
        let (first, carry) =
            evaluate_condition(&plant, &config, &reference, &[30.0], reference.carry).unwrap();
        let (second, _) = evaluate_condition(&plant, &config, &reference, &[30.0], carry).unwrap();
        assert!(first.objective.is_finite() && second.objective.is_finite());
    }

    #[test]
    fn campaign_is_deterministic_and_tracks_best() {
        let plant = LorenzPlant::default();
        let mut config = small_config(rho_space(), 5);
        config.n_prior = 3;
        config.n_iterations = 2;
        let a = run_campaign(&plant, &config).unwrap();
        let b = run_campaign(&plant, &config).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.best_guess, b.best_guess);
        assert_eq!(a.history.len(), 5);
        assert!(a.failures.is_empty());

        let best = a
            .history
            .iter()
            .map(|r| r.log10_emd)
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(best, a.best_observed.objective);
        // Priors first, acquisitions after.
        assert!(a.history[..3].iter().all(|r| r.source == SuggestionSource::Prior));
        assert!(a.history[3..].iter().all(|r| r.source == SuggestionSource::Acquisition));
        // Running best is non-increasing by construction.
        let mut running = f64::INFINITY;
        for record in &a.history {
            running = running.min(record.log10_emd);
            assert!(running <= record.log10_emd);
        }
    }

    #[test]
    fn campaign_respects_bounds_and_stays_inside() {
        let plant = LorenzPlant::default();
        let mut config = small_config(rho_space(), 6);
        config.n_prior = 2;
        config.n_iterations = 2;
        let result = run_campaign(&plant, &config).unwrap();
        for record in &result.history {
            assert!(record.params[0] >= 15.0 && record.params[0] <= 50.0);
        }
        assert!(result.best_guess[0] >= 15.0 && result.best_guess[0] <= 50.0);
    }

    /// Fails the first `failures` runs, then behaves like the Lorenz plant.
    struct FlakyPlant {
        inner: LorenzPlant,
        remaining: AtomicUsize,
    }

    impl Plant for FlakyPlant {
        fn run(&self, spec: &PlantRunSpec) -> Result<Trajectory, PlantError> {
            let left = self.remaining.load(Ordering::SeqCst);
            if left > 0 {
                self.remaining.store(left - 1, Ordering::SeqCst);
                return Err(PlantError::NonFiniteInitial);
            }
            self.inner.run(spec)
        }
    }

    #[test]
    fn failed_evaluation_is_recorded_and_replaced() {
        let mut config = small_config(rho_space(), 7);
        config.n_prior = 2;
        config.n_iterations = 1;
        let plant = FlakyPlant {
            inner: LorenzPlant::default(),
            // Reference build succeeds... then the first prior fails once.
            remaining: AtomicUsize::new(0),
        };
        // Prime: let the reference run pass, then fail the next call.
        let reference_probe = build_reference(&plant, &config);
        assert!(reference_probe.is_ok());
        plant.remaining.store(2, Ordering::SeqCst); // reference + first prior
        let result = run_campaign(&plant, &config);
        // The reference build itself consumes the first failure.
        match result {
            Ok(r) => {
                assert!(!r.failures.is_empty());
                assert_eq!(r.history.len(), 3);
            }
            Err(ControllerError::Plant(_)) => {
                // The failure hit the reference build, which has no retry.
            }
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn retried_failure_is_excluded_from_model() {
        let mut config = small_config(rho_space(), 8);
        config.n_prior = 2;
        config.n_iterations = 0;
        let plant = FlakyPlant {
            inner: LorenzPlant::default(),
            remaining: AtomicUsize::new(0),
        };
        let _ = build_reference(&plant, &config).unwrap();
        // Fail exactly the first prior evaluation (after the reference).
        plant.remaining.store(0, Ordering::SeqCst);
        let result = run_campaign(&plant, &config).unwrap();
        assert_eq!(result.history.len(), 2);
        assert_eq!(result.final_model.observations().len(), 2);
    }

    #[test]
    fn floor_without_perturbation_has_zero_spread() {
        let plant = LorenzPlant::default();
        let config = small_config(rho_space(), 9);
        let floor = confidence_floor(&plant, &config, 4, 0.0).unwrap();
        assert_relative_eq!(floor.stddev, 0.0);
        assert_relative_eq!(floor.floor, floor.mean);
        assert!(floor.samples.iter().all(|&s| s == floor.samples[0]));
    }

    #[test]
    fn floor_accepts_the_degenerate_two_run_case() {
        let plant = LorenzPlant::default();
        let config = small_config(rho_space(), 10);
        let floor = confidence_floor(&plant, &config, 2, 0.01).unwrap();
        assert_eq!(floor.samples.len(), 2);
        assert!(floor.floor >= floor.mean);
    }

    #[test]
    fn floor_rejects_single_run() {
        let plant = LorenzPlant::default();
        let config = small_config(rho_space(), 11);
        assert!(matches!(
            confidence_floor(&plant, &config, 1, 0.01),
            Err(ControllerError::InvalidConfig(_))
        ));
    }

    #[test]
    fn sweep_single_value_sits_near_floor() {
        let plant = LorenzPlant::default();
        let config = small_config(rho_space(), 12);
        let sweep = parameter_sweep(&plant, &config, "rho", &[28.0]).unwrap();
        assert_eq!(sweep.len(), 1);
        assert!(sweep[0].raw_emd.is_finite() && sweep[0].raw_emd > 0.0);
    }

    #[test]
    fn sweep_carries_state_in_order() {
        let plant = LorenzPlant::default();
        let config = small_config(rho_space(), 13);
        let values = [25.0, 28.0, 31.0];
        let a = parameter_sweep(&plant, &config, "rho", &values).unwrap();
        let b = parameter_sweep(&plant, &config, "rho", &values).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation_catches_conflicts() {
        let space = ParamSpace::new(&[("sigma", 2.0, 20.0), ("beta", 0.5, 5.0)]).unwrap();
        let mut config = small_config(space, 14);
        config.hidden = vec![("sigma".to_string(), 12.0)];
        assert!(matches!(
            config.validate(),
            Err(ControllerError::InvalidConfig(_))
        ));

        let mut config2 = small_config(rho_space(), 15);
        config2.tau1 = 0.0173;
        assert!(config2.validate().is_err());

        let mut config3 = small_config(rho_space(), 16);
        config3.n_prior = 1;
        assert!(config3.validate().is_err());
    }

    #[test]
    fn hidden_override_changes_the_measurement() {
        let plant = LorenzPlant::default();
        let space = ParamSpace::new(&[("sigma", 2.0, 20.0)]).unwrap();
        let mut config = small_config(space, 17);
        let reference = build_reference(&plant, &config).unwrap();
        let (plain, _) =
            evaluate_condition(&plant, &config, &reference, &[10.0], reference.carry).unwrap();
        config.hidden = vec![("rho".to_string(), 40.0)];
        let (drifted, _) =
            evaluate_condition(&plant, &config, &reference, &[10.0], reference.carry).unwrap();
        assert!(
            drifted.objective > plain.objective,
            "hidden drift should raise the distance: {} vs {}",
            drifted.objective,
            plain.objective
        );
    }

    #[test]
    fn stop_threshold_ends_the_loop_early() {
        let plant = LorenzPlant::default();
        let mut config = small_config(rho_space(), 19);
        config.n_prior = 2;
        config.n_iterations = 6;
        // A threshold no posterior can exceed: stop right after the first
        // closed-loop iteration.
        config.stop_stddev = Some(f64::MAX);
        let result = run_campaign(&plant, &config).unwrap();
        assert_eq!(result.history.len(), 3);

        config.stop_stddev = None;
        let full = run_campaign(&plant, &config).unwrap();
        assert_eq!(full.history.len(), 8);
    }

    #[test]
    fn actuation_interval_spans_the_full_run() {
        let config = CampaignConfig::defaults(rho_space(), 0);
        assert_relative_eq!(config.actuation_interval(), 2_000.0);
    }

    #[test]
    fn grid_evaluation_is_parallel_deterministic() {
        let plant = LorenzPlant::default();
        let config = small_config(rho_space(), 18);
        let reference = build_reference(&plant, &config).unwrap();
        let points: Vec<Vec<f64>> = vec![vec![20.0], vec![28.0], vec![45.0]];
        let a = evaluate_grid(&plant, &config, &reference, &points).unwrap();
        let b = evaluate_grid(&plant, &config, &reference, &points).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(pa.raw_emd, pb.raw_emd);
        }
    }
}
