//! Maximal Bell values, threshold efficiencies and the frontier of certain
//! violation.
//!
//! The default search space is the reduced one: a single amplitude pair
//! `(r, r')` shared by all parties and a single phase axis per party, so
//! amplitudes are signed reals (a negative amplitude displaces along the
//! opposite direction of the same axis). The phase centers of the relative
//! offsets are optimized jointly unless pinned to 0. Amplitudes live in
//! `[-3, 3]`; beyond that `e^{-r^2} < 2e-4` and the observables are
//! effectively the constant `-1`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::error::{invalid, Result};
use crate::experiments::{bell_value_fast, worst_case_over_grid, Amplitudes, MeasurementStrategy};
use crate::fock::{correlator, wrap_phase, SubspaceState};
use crate::phase_noise::{dephase_state, PhaseModel};
use crate::wwzb::{wwzb_value, CorrelatorTable};
use crate::simplex::{halton, minimize, Bounds, SimplexOptions};

/// `S` must exceed `1 + VIOLATION_MARGIN` to count as a violation in
/// searches driven by an optimizer.
pub const VIOLATION_MARGIN: f64 = 1e-9;
/// Largest amplitude considered.
pub const MAX_AMPLITUDE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SearchSpace {
    /// One `(r, r')` pair for every party.
    Shared,
    /// Independent `(r_k, r'_k)` per party.
    PerParty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PhaseMode {
    /// Phase centers are free parameters.
    Optimize,
    /// Phase centers fixed at 0.
    Pinned,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizationSpec {
    pub n_parties: usize,
    pub width: f64,
    pub efficiency: f64,
    pub search: SearchSpace,
    pub phases: PhaseMode,
    pub amplitude_bounds: (f64, f64),
    pub restarts: usize,
    pub tolerance: f64,
    pub max_evaluations: usize,
    /// Offset into the quasi-random start sequence; different seeds give
    /// independent restart sets.
    pub seed: u64,
    /// Extra starting point tried before the quasi-random ones.
    pub initial_guess: Option<Vec<f64>>,
}

impl OptimizationSpec {
    pub fn new(n_parties: usize, width: f64, efficiency: f64) -> Self {
        Self {
            n_parties,
            width,
            efficiency,
            search: SearchSpace::Shared,
            phases: PhaseMode::Optimize,
            amplitude_bounds: (-MAX_AMPLITUDE, MAX_AMPLITUDE),
            restarts: 12,
            tolerance: 1e-6,
            max_evaluations: 20_000,
            seed: 0,
            initial_guess: None,
        }
    }

    pub fn with_phases(mut self, phases: PhaseMode) -> Self {
        self.phases = phases;
        self
    }

    pub fn with_search(mut self, search: SearchSpace) -> Self {
        self.search = search;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_parties < 2 {
            return Err(invalid!("optimization needs at least two parties"));
        }
        if !self.width.is_finite() || self.width < 0.0 {
            return Err(invalid!("width must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(invalid!("efficiency {} outside [0, 1]", self.efficiency));
        }
        let (lo, hi) = self.amplitude_bounds;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(invalid!("amplitude bounds ({lo}, {hi}) are empty or invalid"));
        }
        if self.restarts == 0 {
            return Err(invalid!("restarts must be >= 1"));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(invalid!("tolerance must be positive"));
        }
        if let Some(guess) = &self.initial_guess {
            if guess.len() != self.dimension() {
                return Err(invalid!(
                    "initial guess has {} coordinates, expected {}",
                    guess.len(),
                    self.dimension()
                ));
            }
        }
        Ok(())
    }

    fn n_amplitudes(&self) -> usize {
        match self.search {
            SearchSpace::Shared => 2,
            SearchSpace::PerParty => 2 * self.n_parties,
        }
    }

    fn n_phases(&self) -> usize {
        match self.phases {
            PhaseMode::Optimize => self.n_parties - 1,
            PhaseMode::Pinned => 0,
        }
    }

    /// Number of free parameters: amplitudes first, then phase centers.
    pub fn dimension(&self) -> usize {
        self.n_amplitudes() + self.n_phases()
    }

    fn bounds(&self) -> Bounds {
        let mut b = vec![Some(self.amplitude_bounds); self.n_amplitudes()];
        b.extend(vec![None; self.n_phases()]);
        b
    }

    fn decode(&self, x: &[f64]) -> (Vec<[f64; 2]>, Vec<f64>) {
        let na = self.n_amplitudes();
        let amplitudes = x[..na].chunks(2).map(|c| [c[0], c[1]]).collect();
        let centers = match self.phases {
            PhaseMode::Optimize => x[na..].iter().map(|&p| wrap_phase(p)).collect(),
            PhaseMode::Pinned => vec![0.0; self.n_parties - 1],
        };
        (amplitudes, centers)
    }

    fn strategy(&self, amplitudes: &[[f64; 2]]) -> Result<MeasurementStrategy> {
        let phases = vec![0.0; self.n_parties];
        match self.search {
            SearchSpace::Shared => {
                MeasurementStrategy::uniform(amplitudes[0][0], amplitudes[0][1], &phases)
            }
            SearchSpace::PerParty => MeasurementStrategy::per_party(amplitudes, &phases),
        }
    }

    /// Bell value at parameter vector `x`.
    pub fn objective(&self, state: &SubspaceState, x: &[f64]) -> Result<f64> {
        let (amplitudes, centers) = self.decode(x);
        let strategy = self.strategy(&amplitudes)?;
        let model = PhaseModel::new(centers, self.width)?;
        if self.search == SearchSpace::Shared && self.phases == PhaseMode::Pinned {
            let dephased = dephase_state(state, &model)?;
            return Ok(wwzb_value(&symmetric_table(&dephased, &strategy)?).s_value);
        }
        Ok(bell_value_fast(state, &strategy, &model)?.s_value)
    }

    fn start_point(&self, restart: usize) -> Vec<f64> {
        let dim = self.dimension();
        let na = self.n_amplitudes();
        let u = halton(1 + self.seed * self.restarts as u64 + restart as u64, dim);
        let (lo, hi) = self.amplitude_bounds;
        // amplitude starts cover the central half of the box, where the
        // observables still depend on the amplitude
        let (lo, hi) = (0.75 * lo + 0.25 * hi, 0.25 * lo + 0.75 * hi);
        u.iter()
            .enumerate()
            .map(|(i, &v)| if i < na { lo + v * (hi - lo) } else { v * TAU })
            .collect()
    }
}

/// Averaged table for a shared-amplitude strategy with every phase and
/// center at 0. The dephased lossy W state is then symmetric under
/// permutations of parties 2..N, so `xi(s)` depends only on party 1's slot
/// and how many of the others use slot 1: `2N` correlators instead of `2^N`.
fn symmetric_table(dephased: &SubspaceState, strategy: &MeasurementStrategy) -> Result<CorrelatorTable> {
    let n = strategy.n_parties();
    let slots = [strategy.settings(0)[0].observable(), strategy.settings(0)[1].observable()];
    let mut cache = vec![[0.0; 2]; n];
    let mut observables = vec![slots[0]; n];
    for (others, entry) in cache.iter_mut().enumerate() {
        for (k, obs) in observables.iter_mut().enumerate().skip(1) {
            *obs = slots[usize::from(k <= others)];
        }
        for (first, value) in entry.iter_mut().enumerate() {
            observables[0] = slots[first];
            *value = correlator(dephased, &observables)?;
        }
    }
    let values = (0..1usize << n)
        .map(|s| cache[(s >> 1).count_ones() as usize][s & 1])
        .collect();
    CorrelatorTable::new(n, values)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimumReport {
    pub best_s: f64,
    /// One `[r, r']` entry (shared) or one per party.
    pub amplitudes: Vec<[f64; 2]>,
    /// Centers of the `N - 1` relative offsets.
    pub centers: Vec<f64>,
    /// Raw parameter vector, reusable as an initial guess.
    pub parameters: Vec<f64>,
    pub converged: bool,
    pub evaluations: usize,
    /// Best value found by each restart, in restart order.
    pub restart_values: Vec<f64>,
    pub spec: OptimizationSpec,
}

impl OptimumReport {
    /// The shared amplitude pair (first party's for a per-party search).
    pub fn shared_amplitudes(&self) -> Amplitudes {
        Amplitudes {
            r: self.amplitudes[0][0],
            r_prime: self.amplitudes[0][1],
        }
    }

    /// Spread between the best and worst restart.
    pub fn restart_spread(&self) -> f64 {
        let max = self.restart_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.restart_values.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }
}

const POLISH_ROUNDS: usize = 4;

/// Multi-start simplex search for the largest `S` on the lossy W state.
pub fn maximize_bell(spec: &OptimizationSpec) -> Result<OptimumReport> {
    spec.validate()?;
    let state = SubspaceState::lossy_w_state(spec.n_parties, spec.efficiency)?;
    let dim = spec.dimension();
    let bounds = spec.bounds();
    let na = spec.n_amplitudes();
    let step: Vec<f64> = (0..dim).map(|i| if i < na { 0.25 } else { 0.5 }).collect();
    let options = SimplexOptions {
        step,
        tolerance: spec.tolerance,
        max_evaluations: spec.max_evaluations,
    };

    // objective failures only come from invalid parameters, which the
    // bounds rule out; treat them as the worst possible value
    let negated = |x: &[f64]| -> f64 { spec.objective(&state, x).map(|s| -s).unwrap_or(f64::INFINITY) };

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(spec.restarts + 1);
    if let Some(guess) = &spec.initial_guess {
        starts.push(guess.clone());
    }
    starts.extend((0..spec.restarts).map(|i| spec.start_point(i)));

    let mut evaluations = 0;
    let mut restart_values = Vec::with_capacity(starts.len());
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for start in &starts {
        let mut outcome = minimize(negated, start, &bounds, &options);
        evaluations += outcome.evaluations;
        // restart from the optimum until it stops moving
        for _ in 0..POLISH_ROUNDS {
            let again = minimize(negated, &outcome.x, &bounds, &options);
            evaluations += again.evaluations;
            let improved = again.value < outcome.value - 1e-13;
            if again.value <= outcome.value {
                outcome = again;
            }
            if !improved {
                break;
            }
        }
        let s = -outcome.value;
        restart_values.push(s);
        if best.as_ref().is_none_or(|(b, _, _)| s > *b) {
            best = Some((s, outcome.x, outcome.converged));
        }
    }
    let (best_s, x, converged) = best.expect("at least one restart");
    let (amplitudes, centers) = spec.decode(&x);
    Ok(OptimumReport {
        best_s,
        amplitudes,
        centers,
        parameters: x,
        converged,
        evaluations,
        restart_values,
        spec: spec.clone(),
    })
}

/// Amplitudes that maximize `S` with all phase centers at 0.
pub fn optimal_amplitudes_at_zero(n_parties: usize, width: f64, efficiency: f64) -> Result<OptimumReport> {
    maximize_bell(&OptimizationSpec::new(n_parties, width, efficiency).with_phases(PhaseMode::Pinned))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdReport {
    /// Estimated threshold, the midpoint of the final bracket (1 when not violable).
    pub eta: f64,
    /// Final `(no violation, violation)` bracket.
    pub bracket: (f64, f64),
    pub violable: bool,
    /// Whether `S_max` was nondecreasing in the efficiency on a coarse grid.
    pub monotone: bool,
    /// `S_max` at the coarse-grid efficiencies used for the monotonicity check.
    pub coarse_grid: Vec<(f64, f64)>,
    pub iterations: usize,
}

const COARSE_ETAS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

/// Smallest efficiency at which the optimized `S` exceeds 1, by bisection
/// on `[0, 1]`. `base` supplies everything except the efficiency.
pub fn threshold_efficiency(base: &OptimizationSpec, tolerance: f64) -> Result<ThresholdReport> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(invalid!("tolerance must be positive"));
    }
    let at = |eta: f64, guess: Option<Vec<f64>>| {
        let mut spec = base.clone();
        spec.efficiency = eta;
        spec.initial_guess = guess;
        maximize_bell(&spec)
    };

    let mut coarse_grid = Vec::with_capacity(COARSE_ETAS.len());
    for &eta in &COARSE_ETAS {
        coarse_grid.push((eta, at(eta, None)?.best_s));
    }
    // the local bound is always attainable, so values below 1 only mean the
    // optimizer stopped on a non-violating plateau
    let monotone = coarse_grid
        .windows(2)
        .all(|w| w[1].1.max(1.0) >= w[0].1.max(1.0) - 1e-7);

    let top = at(1.0, None)?;
    if top.best_s <= 1.0 + VIOLATION_MARGIN {
        return Ok(ThresholdReport {
            eta: 1.0,
            bracket: (1.0, 1.0),
            violable: false,
            monotone,
            coarse_grid,
            iterations: 0,
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut guess = top.parameters;
    let mut iterations = 0;
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        let report = at(mid, Some(guess.clone()))?;
        if report.best_s > 1.0 + VIOLATION_MARGIN {
            hi = mid;
            guess = report.parameters;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(ThresholdReport {
        eta: 0.5 * (lo + hi),
        bracket: (lo, hi),
        violable: true,
        monotone,
        coarse_grid,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrontierOptions {
    /// Phase-center grid points per relative offset.
    pub grid_points: usize,
    /// Upper end of the width search.
    pub max_width: f64,
    /// Bisection tolerance on the width.
    pub tolerance: f64,
}

impl Default for FrontierOptions {
    fn default() -> Self {
        Self {
            grid_points: 720,
            max_width: 1.5,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrontierPoint {
    pub pairs: usize,
    /// Largest width with certain violation; `None` if even a static frame fails.
    pub max_certain_width: Option<f64>,
}

/// Worst-case best-pair `S` over the center grid for `m` pairs, with
/// amplitudes optimized at zero phase centers for this width.
pub fn certain_violation_margin(
    n_parties: usize,
    efficiency: f64,
    pairs: usize,
    width: f64,
    grid_points: usize,
) -> Result<f64> {
    let amps = optimal_amplitudes_at_zero(n_parties, width, efficiency)?.shared_amplitudes();
    let state = SubspaceState::lossy_w_state(n_parties, efficiency)?;
    let strategy = MeasurementStrategy::uniform(amps.r, amps.r_prime, &vec![0.0; n_parties])?
        .with_phase_pairs(pairs)?;
    Ok(worst_case_over_grid(&state, &strategy, width, grid_points)?.0)
}

/// For each `m`, the largest width at which every grid point of phase
/// centers still violates with the best of `m` setting pairs.
pub fn certainty_frontier(
    n_parties: usize,
    efficiency: f64,
    pairs: &[usize],
    options: &FrontierOptions,
) -> Result<Vec<FrontierPoint>> {
    if options.grid_points < 360 {
        return Err(invalid!("grid density must be >= 360, got {}", options.grid_points));
    }
    if options.tolerance.is_nan()
        || options.tolerance <= 0.0
        || options.max_width.is_nan()
        || options.max_width <= 0.0
    {
        return Err(invalid!("frontier tolerance and max width must be positive"));
    }
    let certain = |m: usize, width: f64| -> Result<bool> {
        Ok(certain_violation_margin(n_parties, efficiency, m, width, options.grid_points)? > 1.0)
    };
    pairs
        .iter()
        .map(|&m| {
            if m == 0 {
                return Err(invalid!("number of setting pairs must be >= 1"));
            }
            let max_certain_width = if !certain(m, 0.0)? {
                None
            } else if certain(m, options.max_width)? {
                Some(options.max_width)
            } else {
                let (mut lo, mut hi) = (0.0, options.max_width);
                while hi - lo > options.tolerance {
                    let mid = 0.5 * (lo + hi);
                    if certain(m, mid)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Some(0.5 * (lo + hi))
            };
            Ok(FrontierPoint {
                pairs: m,
                max_certain_width,
            })
        })
        .collect()
}
