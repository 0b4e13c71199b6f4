//! The plant under control: the Lorenz system integrated with an adaptive
//! Runge-Kutta 5(4) scheme and resampled onto a fixed output grid.
//!
//! A run follows a fixed protocol: integrate from an initial state, sample
//! the solution every `dt` through the solver's dense output, discard a
//! transient prefix, and keep a fixed number of points. The final state of a
//! run seeds the next one (carry-over), so consecutive runs form one
//! continuous experiment even when the input parameters change between them.

mod rk45;

use thiserror::Error;

pub use rk45::IntegrationFailure;

/// The three constant, strictly positive inputs of the Lorenz system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
}

impl SystemParams {
    /// Canonical parameter order used wherever parameters travel as a slice.
    pub const NAMES: [&'static str; 3] = ["sigma", "rho", "beta"];

    pub fn new(sigma: f64, rho: f64, beta: f64) -> Result<Self, PlantError> {
        let params = Self { sigma, rho, beta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        for (name, value) in Self::NAMES.iter().zip([self.sigma, self.rho, self.beta]) {
            if !(value > 0.0) || !value.is_finite() {
                return Err(PlantError::NonPositiveParameter { name, value });
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "sigma" => Some(self.sigma),
            "rho" => Some(self.rho),
            "beta" => Some(self.beta),
            _ => None,
        }
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), PlantError> {
        match name {
            "sigma" => self.sigma = value,
            "rho" => self.rho = value,
            "beta" => self.beta = value,
            _ => return Err(PlantError::UnknownParameter(name.to_string())),
        }
        Ok(())
    }
}

impl Default for SystemParams {
    /// The classic chaotic operating point (10, 28, 8/3).
    fn default() -> Self {
        Self {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
        }
    }
}

/// Instantaneous state of the plant. Also used for state derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl State {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    fn from_array([x, y, z]: [f64; 3]) -> Self {
        Self { x, y, z }
    }
}

/// Default initial condition for a run with no predecessor.
pub const DEFAULT_INITIAL: State = State {
    x: 0.1,
    y: 0.2,
    z: 0.3,
};

/// Uniformly sampled solution of a plant run, after transient discard.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Output sampling step.
    pub dt: f64,
    /// Time of the first retained sample.
    pub t0: f64,
    pub samples: Vec<State>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.dt
    }

    /// Final state; the carry-over initial condition for the next run.
    pub fn last_state(&self) -> State {
        *self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn xs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y).collect()
    }

    pub fn zs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.z).collect()
    }
}

/// Everything that defines one plant run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantRunSpec {
    pub params: SystemParams,
    pub initial: State,
    /// Output sampling step.
    pub dt: f64,
    /// Points retained after the transient discard.
    pub n_keep: usize,
    /// Leading output points discarded as transient.
    pub n_discard: usize,
}

impl PlantRunSpec {
    pub fn new(
        params: SystemParams,
        initial: State,
        dt: f64,
        n_keep: usize,
        n_discard: usize,
    ) -> Result<Self, PlantError> {
        let spec = Self {
            params,
            initial,
            dt,
            n_keep,
            n_discard,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        self.params.validate()?;
        if !self.initial.is_finite() {
            return Err(PlantError::NonFiniteInitial);
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(PlantError::InvalidRunSpec(format!(
                "dt must be positive and finite, got {}",
                self.dt
            )));
        }
        if self.n_keep == 0 {
            return Err(PlantError::InvalidRunSpec(
                "n_keep must be at least 1".to_string(),
            ));
        }
        Ok(())
    }

    /// Total simulated time of the run, discard included.
    pub fn simulated_span(&self) -> f64 {
        (self.n_keep + self.n_discard) as f64 * self.dt
    }
}

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("plant parameter `{name}` must be strictly positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("unknown plant parameter `{0}`")]
    UnknownParameter(String),
    #[error("initial state must be finite")]
    NonFiniteInitial,
    #[error("invalid run spec: {0}")]
    InvalidRunSpec(String),
    #[error(transparent)]
    Integration(#[from] IntegrationFailure),
}

/// Right-hand side of the Lorenz equations.
pub fn lorenz_rhs(state: &State, params: &SystemParams) -> State {
    State {
        x: params.sigma * (state.y - state.x),
        y: state.x * (params.rho - state.z) - state.y,
        z: state.x * state.y - params.beta * state.z,
    }
}

/// A plant maps a run spec to a measured trajectory. The controller depends
/// only on this interface, so plants other than the Lorenz system can be
/// dropped in.
pub trait Plant: Sync {
    fn run(&self, spec: &PlantRunSpec) -> Result<Trajectory, PlantError>;
}

/// The Lorenz system solved with adaptive RK45 and dense-output resampling.
///
/// Tolerances are part of the plant's identity: together with the run spec
/// they make every trajectory reproducible bit for bit (no randomness
/// anywhere in the solver).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzPlant {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for LorenzPlant {
    fn default() -> Self {
        // Tight enough that the binned fingerprint downstream is insensitive
        // to the tolerance at the 20x20 binning scale.
        Self {
            rtol: 1e-6,
            atol: 1e-9,
        }
    }
}

impl Plant for LorenzPlant {
    fn run(&self, spec: &PlantRunSpec) -> Result<Trajectory, PlantError> {
        spec.validate()?;
        let params = spec.params;
        let n_total = spec.n_keep + spec.n_discard;
        let opts = rk45::Options {
            rtol: self.rtol,
            atol: self.atol,
            // Generous: accepted steps for this system run ~2x the output
            // grid spacing, and rejections are rare.
            max_steps: 200 * n_total + 100_000,
        };
        let rhs = |_t: f64, y: &[f64; 3]| {
            lorenz_rhs(&State::from_array(*y), &params).to_array()
        };
        let sampled = rk45::integrate_sampled(rhs, spec.initial.to_array(), 0.0, spec.dt, n_total, &opts)?;
        let samples: Vec<State> = sampled[spec.n_discard..]
            .iter()
            .map(|y| State::from_array(*y))
            .collect();
        Ok(Trajectory {
            dt: spec.dt,
            t0: (spec.n_discard + 1) as f64 * spec.dt,
            samples,
        })
    }
}

/// Run the Lorenz plant at its default tolerances.
pub fn integrate(spec: &PlantRunSpec) -> Result<Trajectory, PlantError> {
    LorenzPlant::default().run(spec)
}
