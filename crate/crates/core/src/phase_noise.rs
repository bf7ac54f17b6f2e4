//! Unknown reference-frame offsets between the parties' local oscillators.
//!
//! Offsets are measured relative to party 1: `Delta_l` is the offset of
//! party `l + 1` minus that of party 1, so a table over `N` parties depends
//! on `N - 1` offsets. Each offset is an independent Gaussian with its own
//! center and a common width `delta`, wrapped onto the circle.
//!
//! Averages of `e^{i n Delta}` for integer `n` use the Gaussian
//! characteristic function `e^{i n center - n^2 delta^2 / 2}`, which equals
//! the wrapped-Gaussian (theta function) average exactly. As a consequence a
//! coherence between two parties other than party 1 is damped by
//! `e^{-delta^2}`, one involving party 1 by `e^{-delta^2 / 2}`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::fock::{wrap_phase, SubspaceState, C64};

/// Theta-series cutoff: terms with `q^{n^2}` below this are dropped.
pub const THETA_CUTOFF: f64 = 1e-16;
const REAL_RESIDUE_TOL: f64 = 1e-10;

/// Wrapped-Gaussian model of the `N - 1` relative offsets.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseModel {
    centers: Vec<f64>,
    width: f64,
}

impl PhaseModel {
    pub fn new(centers: Vec<f64>, width: f64) -> Result<Self> {
        if !width.is_finite() || width < 0.0 {
            return Err(invalid!("phase width must be finite and >= 0, got {width}"));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(invalid!("phase centers must be finite"));
        }
        Ok(Self {
            centers: centers.into_iter().map(wrap_phase).collect(),
            width,
        })
    }

    /// A static (zero-width) model sitting at `centers`.
    pub fn fixed(centers: Vec<f64>) -> Result<Self> {
        Self::new(centers, 0.0)
    }

    pub fn n_relative(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn is_static(&self) -> bool {
        self.width == 0.0
    }

    /// `E[e^{i sum_l n_l Delta_l}]`.
    pub fn characteristic(&self, frequency: &[i32]) -> C64 {
        let var = self.width * self.width;
        let mut phase = 0.0;
        let mut log_mag = 0.0;
        for (&n, &c) in frequency.iter().zip(&self.centers) {
            let n = n as f64;
            phase += n * c;
            log_mag -= 0.5 * n * n * var;
        }
        C64::from_polar(libm::exp(log_mag), phase)
    }
}

/// `(1 / 2pi) theta3((phi - center) / 2; e^{-width^2 / 2})`, summed as
/// `(1 / 2pi) [1 + 2 sum_{n>=1} q^{n^2} cos(n (phi - center))]`.
pub fn wrapped_gaussian_pdf(phi: f64, center: f64, width: f64) -> Result<f64> {
    if !width.is_finite() || width <= 0.0 {
        return Err(invalid!(
            "wrapped Gaussian needs a positive width, got {width} (use the static path for 0)"
        ));
    }
    let q = libm::exp(-0.5 * width * width);
    let x = phi - center;
    let mut total = 1.0;
    let mut n = 1u32;
    loop {
        let nf = n as f64;
        let weight = libm::pow(q, nf * nf);
        if weight < THETA_CUTOFF {
            break;
        }
        total += 2.0 * weight * libm::cos(nf * x);
        n += 1;
    }
    Ok((total / TAU).max(0.0))
}

/// Finite Fourier series in the relative offsets,
/// `f(Delta) = sum_n c_n e^{i n . Delta}`, kept in merged canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePolynomial {
    dim: usize,
    terms: BTreeMap<Vec<i32>, C64>,
}

impl PhasePolynomial {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, value: C64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(alloc::vec![0; dim], value);
        p
    }

    /// Builds from raw terms, merging repeated frequencies.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<i32>, C64)>,
    {
        let mut p = Self::zero(dim);
        for (freq, c) in terms {
            if freq.len() != dim {
                return Err(invalid!(
                    "frequency of length {} in a {dim}-offset polynomial",
                    freq.len()
                ));
            }
            p.add_term(freq, c);
        }
        Ok(p)
    }

    pub(crate) fn add_term(&mut self, frequency: Vec<i32>, value: C64) {
        debug_assert_eq!(frequency.len(), self.dim);
        let updated = self.coefficient(&frequency) + value;
        // exact cancellations leave no trace in the canonical form
        if updated == C64::new(0.0, 0.0) {
            self.terms.remove(&frequency);
        } else {
            self.terms.insert(frequency, updated);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[i32], C64)> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    /// Coefficient of `frequency` (zero when absent).
    pub fn coefficient(&self, frequency: &[i32]) -> C64 {
        self.terms
            .get(frequency)
            .copied()
            .unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn constant_term(&self) -> C64 {
        self.coefficient(&alloc::vec![0; self.dim])
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|k| k.iter().all(|&n| n == 0))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        let mut out = Self::zero(self.dim);
        for (k, v) in &self.terms {
            out.add_term(k.clone(), v * factor);
        }
        out
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(invalid!("adding polynomials of different dimension"));
        }
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_term(k.clone(), *v);
        }
        Ok(out)
    }

    pub fn evaluate(&self, offsets: &[f64]) -> Result<C64> {
        if offsets.len() != self.dim {
            return Err(invalid!(
                "expected {} offsets, got {}",
                self.dim,
                offsets.len()
            ));
        }
        Ok(self
            .terms
            .iter()
            .map(|(freq, c)| {
                let angle: f64 = freq
                    .iter()
                    .zip(offsets)
                    .map(|(&n, &d)| n as f64 * d)
                    .sum();
                c * C64::from_polar(1.0, angle)
            })
            .sum())
    }

    /// Evaluates a polynomial that represents a physical (real) quantity.
    pub fn evaluate_real(&self, offsets: &[f64]) -> Result<f64> {
        let z = self.evaluate(offsets)?;
        if z.im.abs() > REAL_RESIDUE_TOL {
            return Err(Error::Consistency(alloc::format!(
                "phase polynomial has imaginary residue {}",
                z.im
            )));
        }
        Ok(z.re)
    }
}

/// Averages every term over the offset model; the result is a constant
/// polynomial. A static model evaluates at the centers.
pub fn average_polynomial(poly: &PhasePolynomial, model: &PhaseModel) -> Result<PhasePolynomial> {
    if poly.dim != model.n_relative() {
        return Err(invalid!(
            "polynomial has {} offsets, model has {}",
            poly.dim,
            model.n_relative()
        ));
    }
    let value = if model.is_static() {
        poly.evaluate(model.centers())?
    } else {
        poly.terms()
            .map(|(freq, c)| c * model.characteristic(freq))
            .sum()
    };
    Ok(PhasePolynomial::constant(poly.dim, value))
}

/// Splitmix64 finalizer: derives an independent child seed for `(seed, stream)`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `count` independent offset vectors drawn from the model, reduced mod `2pi`.
pub fn sample_offsets(model: &PhaseModel, rng_seed: u64, count: usize) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(invalid!("sample count must be >= 1"));
    }
    if model.is_static() {
        return Err(invalid!(
            "zero-width model has no distribution to sample; use the centers directly"
        ));
    }
    let normals: Vec<Normal<f64>> = model
        .centers()
        .iter()
        .map(|&c| Normal::new(c, model.width()).map_err(|e| invalid!("{e}")))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok((0..count)
        .map(|_| {
            normals
                .iter()
                .map(|n| wrap_phase(n.sample(&mut rng)))
                .collect()
        })
        .collect())
}

/// Monte Carlo estimate `(mean, standard error)` of a real polynomial under
/// the model.
pub fn monte_carlo_average(
    poly: &PhasePolynomial,
    model: &PhaseModel,
    rng_seed: u64,
    count: usize,
) -> Result<(f64, f64)> {
    let samples = sample_offsets(model, rng_seed, count)?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for offsets in &samples {
        let v = poly.evaluate_real(offsets)?;
        sum += v;
        sum_sq += v * v;
    }
    let n = count as f64;
    let mean = sum / n;
    let var = if count > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((mean, libm::sqrt(var / n)))
}

/// Folds the offset average into the state: the returned state gives the
/// averaged correlators when measured with the parties' nominal settings.
/// Offsets enter the observables as `phi_k -> phi_k + Delta_{k-1}` with
/// `Delta` of party 1 identically zero.
pub fn dephase_state(state: &SubspaceState, model: &PhaseModel) -> Result<SubspaceState> {
    let n = state.n_modes();
    if model.n_relative() + 1 != n {
        return Err(invalid!(
            "state has {n} modes but the model has {} relative offsets",
            model.n_relative()
        ));
    }
    // factor[a] = E-weight for the phase e^{i Delta} attached to basis index a
    let dim = n + 1;
    let mut freq = alloc::vec![0i32; n - 1];
    let matrix = DMatrix::from_fn(dim, dim, |a, b| {
        let rho = state.element(a, b);
        if a == b || rho == C64::new(0.0, 0.0) {
            return rho;
        }
        // rho_{a,b} pairs with <b|O|a>: mode of b raised, mode of a lowered
        freq.iter_mut().for_each(|f| *f = 0);
        if b >= 2 {
            freq[b - 2] += 1;
        }
        if a >= 2 {
            freq[a - 2] -= 1;
        }
        rho * model.characteristic(&freq)
    });
    Ok(SubspaceState::from_trusted(n, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pdf_flat_limit() {
        for i in 0..50 {
            let phi = i as f64 * TAU / 50.0;
            let p = wrapped_gaussian_pdf(phi, 1.0, 10.0).unwrap();
            assert_abs_diff_eq!(p, 1.0 / TAU, epsilon = 1e-12);
        }
    }

    #[test]
    fn pdf_rejects_zero_width() {
        assert!(wrapped_gaussian_pdf(0.0, 0.0, 0.0).is_err());
        assert!(wrapped_gaussian_pdf(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn pdf_symmetry() {
        for &w in &[0.2, 0.9, 1.5] {
            for &x in &[0.1, 0.7, 2.0, 3.0] {
                let a = wrapped_gaussian_pdf(1.3 + x, 1.3, w).unwrap();
                let b = wrapped_gaussian_pdf(1.3 - x, 1.3, w).unwrap();
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn model_validation() {
        assert!(PhaseModel::new(vec![0.0], -0.1).is_err());
        assert!(PhaseModel::new(vec![f64::NAN], 0.1).is_err());
        let m = PhaseModel::new(vec![-1.0], 0.3).unwrap();
        assert_abs_diff_eq!(m.centers()[0], TAU - 1.0, epsilon = 1e-15);
    }

    fn cosine(dim: usize, axis: usize) -> PhasePolynomial {
        let mut plus = vec![0; dim];
        plus[axis] = 1;
        let mut minus = vec![0; dim];
        minus[axis] = -1;
        PhasePolynomial::from_terms(
            dim,
            [(plus, C64::new(0.5, 0.0)), (minus, C64::new(0.5, 0.0))],
        )
        .unwrap()
    }

    #[test]
    fn average_of_cosine() {
        let model = PhaseModel::new(vec![0.8], 0.6).unwrap();
        let avg = average_polynomial(&cosine(1, 0), &model).unwrap();
        assert!(avg.is_constant());
        assert_abs_diff_eq!(
            avg.constant_term().re,
            (-0.18f64).exp() * 0.8f64.cos(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn static_average_evaluates_at_centers() {
        let p = cosine(2, 1).plus(&PhasePolynomial::constant(2, C64::new(0.25, 0.0))).unwrap();
        let model = PhaseModel::fixed(vec![0.4, 1.1]).unwrap();
        let avg = average_polynomial(&p, &model).unwrap();
        assert_abs_diff_eq!(avg.constant_term().re, 0.25 + 1.1f64.cos(), epsilon = 1e-15);
    }

    #[test]
    fn wide_average_keeps_only_dc() {
        let p = cosine(2, 0)
            .plus(&cosine(2, 1).scaled(C64::new(0.3, 0.0)))
            .unwrap()
            .plus(&PhasePolynomial::constant(2, C64::new(-0.4, 0.0)))
            .unwrap();
        let model = PhaseModel::new(vec![0.3, 2.0], 40.0).unwrap();
        let avg = average_polynomial(&p, &model).unwrap();
        assert_abs_diff_eq!(avg.constant_term().re, -0.4, epsilon = 1e-12);
    }

    #[test]
    fn average_dimension_mismatch() {
        let model = PhaseModel::new(vec![0.0, 0.0], 0.3).unwrap();
        assert!(average_polynomial(&cosine(1, 0), &model).is_err());
    }

    #[test]
    fn merged_form_and_cancellation() {
        let p = PhasePolynomial::from_terms(
            1,
            [
                (vec![1], C64::new(0.5, 0.0)),
                (vec![1], C64::new(0.25, 0.0)),
                (vec![-1], C64::new(1.0, 0.0)),
                (vec![-1], C64::new(-1.0, 0.0)),
            ],
        )
        .unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.coefficient(&[1]), C64::new(0.75, 0.0));
        assert!(PhasePolynomial::from_terms(2, [(vec![1], C64::new(1.0, 0.0))]).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_rejects_static() {
        let model = PhaseModel::new(vec![1.0, 2.0], 0.4).unwrap();
        let a = sample_offsets(&model, 7, 100).unwrap();
        let b = sample_offsets(&model, 7, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_offsets(&model, 8, 100).unwrap());
        assert!(a.iter().flatten().all(|&x| (0.0..TAU).contains(&x)));
        assert!(sample_offsets(&PhaseModel::fixed(vec![0.0]).unwrap(), 1, 10).is_err());
        assert!(sample_offsets(&model, 1, 0).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: Vec<u64> = (0..64).map(|s| derive_seed(42, s)).collect();
        for i in 0..seeds.len() {
            for j in i + 1..seeds.len() {
                assert_ne!(seeds[i], seeds[j]);
            }
        }
        assert_eq!(derive_seed(42, 3), derive_seed(42, 3));
    }

    #[test]
    fn dephasing_damps_coherences() {
        let w = SubspaceState::w_state(3).unwrap();
        let model = PhaseModel::new(vec![0.0, 0.0], 0.5).unwrap();
        let d = dephase_state(&w, &model).unwrap();
        let q = (-0.125f64).exp();
        assert_abs_diff_eq!(d.element(1, 2).re, q / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.element(2, 3).re, q * q / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.element(2, 2).re, 1.0 / 3.0, epsilon = 1e-15);
        assert!(dephase_state(&w, &PhaseModel::new(vec![0.0], 0.5).unwrap()).is_err());
    }
}
