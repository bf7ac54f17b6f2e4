//! Measurement strategies and the Bell values they produce without a shared
//! phase reference.
//!
//! Each party measures with its nominal settings; the unknown frame offset of
//! party `k > 1` relative to party 1 shifts every phase of party `k` by
//! `Delta_{k-1}`. Correlators are therefore trigonometric polynomials in the
//! offsets ([`SymbolicCorrelatorTable`]). Under a noisy model the parties only
//! see averaged correlators, and the Bell functional is applied after
//! averaging.
//!
//! With a pair structure, party 1 holds `m` copies of its two settings, copy
//! `j` rotated by `j 2pi / m`. Every pair together with the other parties'
//! settings is a complete two-setting Bell test on its own, so keeping the
//! best pair after the fact is legitimate.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::fock::{
    correlator, expand_correlator, DisplacementSetting, ModeObservable, SubspaceState,
};
use crate::phase_noise::{average_polynomial, dephase_state, derive_seed, PhaseModel, PhasePolynomial};
use crate::wwzb::{wwzb_value, BellResult, CorrelatorTable};

/// Per party, which two of its settings play the role of setting 0 and 1.
pub type SettingChoice = Vec<[usize; 2]>;

/// Per-party lists of displacement settings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasurementStrategy {
    settings: Vec<Vec<DisplacementSetting>>,
    pairs: Option<usize>,
}

impl MeasurementStrategy {
    pub fn new(settings: Vec<Vec<DisplacementSetting>>) -> Result<Self> {
        if settings.is_empty() {
            return Err(invalid!("a strategy needs at least one party"));
        }
        if let Some(k) = settings.iter().position(|s| s.is_empty()) {
            return Err(invalid!("party {} has no settings", k + 1));
        }
        Ok(Self {
            settings,
            pairs: None,
        })
    }

    /// Every party measures `M_D(0, 0)` and `M_D(r, 0)`.
    pub fn counting_and_displacement(n_parties: usize, r: f64) -> Result<Self> {
        let zero = DisplacementSetting::new(0.0, 0.0)?;
        let displaced = DisplacementSetting::new(r, 0.0)?;
        Self::new(vec![vec![zero, displaced]; n_parties])
    }

    /// Party `k` displaces by `r e^{i phi_k}` and `r' e^{i phi_k}` with
    /// signed real `r, r'`: both settings of a party lie on one phase axis,
    /// and a negative amplitude points along `phi_k + pi`.
    pub fn uniform(r: f64, r_prime: f64, phases: &[f64]) -> Result<Self> {
        let amplitudes = vec![[r, r_prime]; phases.len()];
        Self::per_party(&amplitudes, phases)
    }

    /// Like [`MeasurementStrategy::uniform`] with per-party signed amplitudes.
    pub fn per_party(amplitudes: &[[f64; 2]], phases: &[f64]) -> Result<Self> {
        if amplitudes.len() != phases.len() {
            return Err(invalid!("amplitude and phase lists differ in length"));
        }
        let settings = amplitudes
            .iter()
            .zip(phases)
            .map(|(&[a, b], &phi)| {
                Ok(vec![
                    DisplacementSetting::signed(a, phi)?,
                    DisplacementSetting::signed(b, phi)?,
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(settings)
    }

    /// Replaces party 1's two settings by `m` copies, copy `j` shifted by
    /// `j 2pi / m`.
    pub fn with_phase_pairs(&self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid!("number of setting pairs must be >= 1"));
        }
        if self.pairs.is_some() {
            return Err(invalid!("strategy already has a pair structure"));
        }
        let base = &self.settings[0];
        if base.len() != 2 {
            return Err(invalid!("pair structure needs party 1 to hold exactly two settings"));
        }
        let first = (0..m)
            .flat_map(|j| {
                let shift = j as f64 * TAU / m as f64;
                [base[0].shifted(shift), base[1].shifted(shift)]
            })
            .collect();
        let mut settings = self.settings.clone();
        settings[0] = first;
        Ok(Self {
            settings,
            pairs: Some(m),
        })
    }

    pub fn n_parties(&self) -> usize {
        self.settings.len()
    }

    pub fn settings(&self, party: usize) -> &[DisplacementSetting] {
        &self.settings[party]
    }

    pub fn pairs(&self) -> Option<usize> {
        self.pairs
    }

    /// Settings 0 and 1 for every party.
    pub fn default_choice(&self) -> SettingChoice {
        vec![[0, 1]; self.n_parties()]
    }

    /// Choice using party 1's pair `j` and settings 0/1 elsewhere.
    pub fn pair_choice(&self, j: usize) -> Result<SettingChoice> {
        let m = self.pairs.unwrap_or(1);
        if j >= m {
            return Err(invalid!("pair {j} out of range for {m} pairs"));
        }
        let mut choice = self.default_choice();
        choice[0] = [2 * j, 2 * j + 1];
        Ok(choice)
    }

    fn check_choice(&self, choice: &[[usize; 2]]) -> Result<()> {
        if choice.len() != self.n_parties() {
            return Err(invalid!(
                "choice covers {} parties, strategy has {}",
                choice.len(),
                self.n_parties()
            ));
        }
        for (k, pair) in choice.iter().enumerate() {
            if pair.iter().any(|&i| i >= self.settings[k].len()) {
                return Err(invalid!("party {} has no setting {:?}", k + 1, pair));
            }
        }
        Ok(())
    }

    /// Observables for setting vector `s` (bit `k` of `index` selects party `k`'s slot).
    fn observables_for(&self, choice: &[[usize; 2]], index: usize) -> Vec<ModeObservable> {
        choice
            .iter()
            .enumerate()
            .map(|(k, pair)| self.settings[k][pair[(index >> k) & 1]].observable())
            .collect()
    }
}

fn check_parties(state: &SubspaceState, strategy: &MeasurementStrategy) -> Result<()> {
    if state.n_modes() != strategy.n_parties() {
        return Err(invalid!(
            "state has {} modes but the strategy has {} parties",
            state.n_modes(),
            strategy.n_parties()
        ));
    }
    Ok(())
}

/// Correlators as functions of the `N - 1` relative frame offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicCorrelatorTable {
    n_parties: usize,
    values: Vec<PhasePolynomial>,
}

impl SymbolicCorrelatorTable {
    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn values(&self) -> &[PhasePolynomial] {
        &self.values
    }

    pub fn get(&self, index: usize) -> &PhasePolynomial {
        &self.values[index]
    }

    /// Numeric table at fixed offsets.
    pub fn evaluate(&self, offsets: &[f64]) -> Result<CorrelatorTable> {
        let values = self
            .values
            .iter()
            .map(|p| p.evaluate_real(offsets))
            .collect::<Result<Vec<_>>>()?;
        CorrelatorTable::new(self.n_parties, values)
    }

    /// Entry-wise average over the offset model.
    pub fn average(&self, model: &PhaseModel) -> Result<CorrelatorTable> {
        let values = self
            .values
            .iter()
            .map(|p| average_polynomial(p, model)?.evaluate_real(&vec![0.0; p.dim()]))
            .collect::<Result<Vec<_>>>()?;
        CorrelatorTable::new(self.n_parties, values)
    }
}

/// One correlator `xi(s)` as a phase polynomial; `setting_vector[k]` indexes
/// party `k`'s settings.
pub fn symbolic_correlator(
    state: &SubspaceState,
    strategy: &MeasurementStrategy,
    setting_vector: &[usize],
) -> Result<PhasePolynomial> {
    check_parties(state, strategy)?;
    let n = strategy.n_parties();
    if setting_vector.len() != n {
        return Err(invalid!("setting vector has length {}, expected {n}", setting_vector.len()));
    }
    let observables = setting_vector
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            strategy.settings[k]
                .get(i)
                .map(|s| s.observable())
                .ok_or_else(|| invalid!("party {} has no setting {i}", k + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    polynomial_from_observables(state, &observables)
}

fn polynomial_from_observables(
    state: &SubspaceState,
    observables: &[ModeObservable],
) -> Result<PhasePolynomial> {
    let dim = state.n_modes() - 1;
    let mut poly = PhasePolynomial::zero(dim);
    expand_correlator(state, observables, |term| {
        let mut freq = vec![0i32; dim];
        // party 1 (mode 0) carries no offset
        if let Some(k) = term.raised.filter(|&k| k > 0) {
            freq[k - 1] += 1;
        }
        if let Some(j) = term.lowered.filter(|&j| j > 0) {
            freq[j - 1] -= 1;
        }
        poly.add_term(freq, term.value);
    })?;
    Ok(poly)
}

/// All `2^N` correlators for `choice` as phase polynomials.
pub fn symbolic_correlators(
    state: &SubspaceState,
    strategy: &MeasurementStrategy,
    choice: &[[usize; 2]],
) -> Result<SymbolicCorrelatorTable> {
    check_parties(state, strategy)?;
    strategy.check_choice(choice)?;
    let n = strategy.n_parties();
    let values = (0..1usize << n)
        .map(|s| polynomial_from_observables(state, &strategy.observables_for(choice, s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SymbolicCorrelatorTable {
        n_parties: n,
        values,
    })
}

/// `S` for a static frame at the given offsets, using settings 0/1 per party.
pub fn bell_value_static(
    state: &SubspaceState,
    strategy: &MeasurementStrategy,
    offsets: &[f64],
) -> Result<BellResult> {
    let table = symbolic_correlators(state, strategy, &strategy.default_choice())?;
    Ok(wwzb_value(&table.evaluate(offsets)?))
}

/// `S` of the offset-averaged correlators, using settings 0/1 per party.
pub fn bell_value_averaged(
    state: &SubspaceState,
    strategy: &MeasurementStrategy,
    model: &PhaseModel,
) -> Result<BellResult> {
    if model.n_relative() + 1 != strategy.n_parties() {
        return Err(invalid!(
            "model has {} offsets, expected {}",
            model.n_relative(),
            strategy.n_parties().saturating_sub(1)
        ));
    }
    let table = symbolic_correlators(state, strategy, &strategy.default_choice())?;
    Ok(wwzb_value(&table.average(model)?))
}

/// Averaged correlator table computed by dephasing the state first; equal to
/// [`SymbolicCorrelatorTable::average`] but without building polynomials.
pub fn averaged_table(
    state: &SubspaceState,
    strategy: &MeasurementStrategy,
    choice: &[[usize; 2]],
    model: &PhaseModel,
) -> Result<CorrelatorTable> {
    check_parties(state, strategy)?;
    strategy.check_choice(choice)?;
    let dephased = dephase_state(state, model)?;
    table_for_dephased(&dephased, strategy, choice)
}

fn table_for_dephased(
    dephased: &SubspaceState,
    strategy: &MeasurementStrategy,
    choice: &[[usize; 2]],
) -> Result<CorrelatorTable> {
    let n = strategy.n_parties();
    // observables per party and slot, computed once
    let slots: Vec<[ModeObservable; 2]> = choice
        .iter()
        .enumerate()
        .map(|(k, pair)| {
            [
                strategy.settings[k][pair[0]].observable(),
                strategy.settings[k][pair[1]].observable(),
            ]
        })
        .collect();
    let mut observables = vec![ModeObservable::identity(); n];
    let values = (0..1usize << n)
        .map(|s| {
            for (k, obs) in observables.iter_mut().enumerate() {
                *obs = slots[k][(s >> k) & 1];
            }
            correlator(dephased, &observables)
        })
        .collect::<Result<Vec<_>>>()?;
    CorrelatorTable::new(n, values)
}

/// Fast path of [`bell_value_averaged`] (dephased state, numeric correlators).
pub fn bell_value_fast(
    state: &SubspaceState,
    strategy: &MeasurementStrategy,
    model: &PhaseModel,
) -> Result<BellResult> {
    let table = averaged_table(state, strategy, &strategy.default_choice(), model)?;
    Ok(wwzb_value(&table))
}

/// Best `S` over party 1's setting pairs and the pair that achieves it
/// (ties go to the lowest pair index). A zero-width model is a static frame.
pub fn best_pair_bell_value(
    state: &SubspaceState,
    strategy: &MeasurementStrategy,
    model: &PhaseModel,
) -> Result<(BellResult, usize)> {
    check_parties(state, strategy)?;
    let m = strategy
        .pairs()
        .ok_or_else(|| invalid!("strategy has no pair structure"))?;
    if m == 0 {
        return Err(invalid!("number of setting pairs must be >= 1"));
    }
    let dephased = dephase_state(state, model)?;
    let mut best: Option<(BellResult, usize)> = None;
    for j in 0..m {
        let choice = strategy.pair_choice(j)?;
        let result = wwzb_value(&table_for_dephased(&dephased, strategy, &choice)?);
        if best.is_none_or(|(b, _)| result.s_value > b.s_value) {
            best = Some((result, j));
        }
    }
    Ok(best.expect("m >= 1"))
}

/// Smallest best-pair `S` over a uniform grid of phase centers
/// (`grid_points` per relative offset) and the centers where it occurs.
pub fn worst_case_over_grid(
    state: &SubspaceState,
    strategy: &MeasurementStrategy,
    width: f64,
    grid_points: usize,
) -> Result<(f64, Vec<f64>)> {
    if grid_points == 0 {
        return Err(invalid!("grid needs at least one point"));
    }
    let dims = strategy.n_parties() - 1;
    let total = grid_points
        .checked_pow(dims as u32)
        .ok_or_else(|| invalid!("grid of {grid_points}^{dims} points is too large"))?;
    let mut worst = (f64::INFINITY, vec![0.0; dims]);
    let mut centers = vec![0.0; dims];
    for flat in 0..total {
        let mut rest = flat;
        for c in centers.iter_mut() {
            *c = (rest % grid_points) as f64 * TAU / grid_points as f64;
            rest /= grid_points;
        }
        let model = PhaseModel::new(centers.clone(), width)?;
        let (result, _) = best_pair_bell_value(state, strategy, &model)?;
        if result.s_value < worst.0 {
            worst = (result.s_value, centers.clone());
        }
    }
    Ok(worst)
}

/// Amplitudes `(r, r')` shared by all parties.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Amplitudes {
    pub r: f64,
    pub r_prime: f64,
}

/// Parameters of the frame-randomization experiment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ViolationSpec {
    pub n_parties: usize,
    pub width: f64,
    pub efficiency: f64,
    pub pairs: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub bins: usize,
}

impl ViolationSpec {
    fn validate(&self) -> Result<()> {
        if self.n_parties < 2 {
            return Err(invalid!("need at least two parties"));
        }
        if self.n_samples == 0 {
            return Err(invalid!("n_samples must be >= 1"));
        }
        if self.bins == 0 {
            return Err(invalid!("bins must be >= 1"));
        }
        if self.pairs == 0 {
            return Err(invalid!("number of setting pairs must be >= 1"));
        }
        Ok(())
    }

    /// The measurement strategy used in every run.
    pub fn strategy(&self, amplitudes: Amplitudes) -> Result<MeasurementStrategy> {
        MeasurementStrategy::uniform(amplitudes.r, amplitudes.r_prime, &vec![0.0; self.n_parties])?
            .with_phase_pairs(self.pairs)
    }
}

/// Distribution of the best-pair Bell value over uniformly random frame centers.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ViolationHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_samples: u64,
    pub fraction_violating: f64,
    pub min_s: f64,
    pub max_s: f64,
}

impl ViolationHistogram {
    /// Bins `values` into `bins` equal-width bins spanning `[min, max]`.
    pub fn from_values(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() || bins == 0 {
            return Err(invalid!("histogram needs samples and at least one bin"));
        }
        let min_s = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max_s = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if max_s > min_s { max_s - min_s } else { 1e-9 };
        let bin_edges = (0..=bins)
            .map(|i| min_s + span * i as f64 / bins as f64)
            .collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let idx = (((v - min_s) / span) * bins as f64) as usize;
            counts[idx.min(bins - 1)] += 1;
        }
        let violating = values.iter().filter(|&&v| v > 1.0).count();
        Ok(Self {
            bin_edges,
            counts,
            n_samples: values.len() as u64,
            fraction_violating: violating as f64 / values.len() as f64,
            min_s,
            max_s,
        })
    }

    /// Index of the most populated bin (lowest on ties).
    pub fn mode_bin(&self) -> usize {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        best
    }

    pub fn mode_center(&self) -> f64 {
        let i = self.mode_bin();
        0.5 * (self.bin_edges[i] + self.bin_edges[i + 1])
    }
}

/// Best-pair Bell values for samples `range` of the experiment. Sample `i`
/// draws its frame centers from a generator seeded by `(seed, i)`, so any
/// partition into ranges reproduces the same values.
pub fn violation_samples(
    spec: &ViolationSpec,
    amplitudes: Amplitudes,
    range: Range<usize>,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let state = SubspaceState::lossy_w_state(spec.n_parties, spec.efficiency)?;
    let strategy = spec.strategy(amplitudes)?;
    range
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, i as u64));
            let centers = (0..spec.n_parties - 1)
                .map(|_| rng.random_range(0.0..TAU))
                .collect();
            let model = PhaseModel::new(centers, spec.width)?;
            Ok(best_pair_bell_value(&state, &strategy, &model)?.0.s_value)
        })
        .collect()
}

/// Histogram of best-pair `S` over `spec.n_samples` uniformly random centers.
pub fn violation_distribution(
    spec: &ViolationSpec,
    amplitudes: Amplitudes,
) -> Result<ViolationHistogram> {
    let values = violation_samples(spec, amplitudes, 0..spec.n_samples)?;
    ViolationHistogram::from_values(&values, spec.bins)
}
