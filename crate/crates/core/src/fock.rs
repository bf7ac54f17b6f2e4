//! States and displacement observables on the vacuum plus single-excitation
//! subspace of `N` optical modes.
//!
//! Basis ordering is fixed as `(|vac>, |e_1>, ..., |e_N>)` where `|e_k>` holds
//! one photon in mode `k` and vacuum elsewhere. Internally modes are indexed
//! from zero, so mode `k` lives at matrix index `k + 1`.
//!
//! Observables are single-mode 2x2 blocks in the `(|0>, |1>)` basis. The
//! displacement-plus-click observable assigns `+1` to no-click and `-1` to
//! click, which gives `M_D = 2|alpha><alpha| - 1` restricted to the subspace.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

/// Tolerance for Hermiticity and trace checks at construction time.
pub const CONSTRUCTION_TOL: f64 = 1e-12;
/// Tolerance for physics-level checks (positivity, realness of expectations).
pub const PHYSICS_TOL: f64 = 1e-10;
/// Largest imaginary residue tolerated before an expectation value is rejected.
pub const IMAGINARY_RESIDUE_LIMIT: f64 = 1e-8;
/// Mode count supported by [`correlator_bruteforce`].
pub const BRUTEFORCE_MODE_LIMIT: usize = 12;

/// Density operator restricted to the vacuum + one-photon subspace.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "MatrixRepr", into = "MatrixRepr")
)]
pub struct SubspaceState {
    n_modes: usize,
    matrix: DMatrix<C64>,
}

impl SubspaceState {
    /// Validates and wraps an `(N+1) x (N+1)` density matrix.
    pub fn new(n_modes: usize, matrix: DMatrix<C64>) -> Result<Self> {
        if n_modes == 0 {
            return Err(invalid!("a state needs at least one mode"));
        }
        let dim = n_modes + 1;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(invalid!(
                "expected a {dim}x{dim} matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid!("matrix has non-finite entries"));
        }
        for a in 0..dim {
            for b in a..dim {
                if (matrix[(a, b)] - matrix[(b, a)].conj()).norm() > CONSTRUCTION_TOL {
                    return Err(invalid!("matrix is not Hermitian at ({a}, {b})"));
                }
            }
        }
        let trace = matrix.trace();
        if (trace - C64::new(1.0, 0.0)).norm() > CONSTRUCTION_TOL {
            return Err(invalid!("trace is {trace}, expected 1"));
        }
        let smallest = min_hermitian_eigenvalue(&matrix);
        if smallest < -PHYSICS_TOL {
            return Err(invalid!("matrix is not positive semidefinite (eigenvalue {smallest})"));
        }
        Ok(Self { n_modes, matrix })
    }

    /// `|W_N>`: one photon spread with equal amplitude over `n_modes` modes.
    pub fn w_state(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(invalid!("w_state needs n_modes >= 1"));
        }
        let dim = n_modes + 1;
        let weight = C64::new(1.0 / n_modes as f64, 0.0);
        let matrix = DMatrix::from_fn(dim, dim, |a, b| {
            if a == 0 || b == 0 {
                C64::new(0.0, 0.0)
            } else {
                weight
            }
        });
        Ok(Self { n_modes, matrix })
    }

    /// The all-vacuum projector on `n_modes` modes.
    pub fn vacuum(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(invalid!("vacuum needs n_modes >= 1"));
        }
        let dim = n_modes + 1;
        let mut matrix = DMatrix::zeros(dim, dim);
        matrix[(0, 0)] = C64::new(1.0, 0.0);
        Ok(Self { n_modes, matrix })
    }

    /// `eta |W_N><W_N| + (1 - eta) |vac><vac|`.
    pub fn lossy_w_state(n_modes: usize, efficiency: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(invalid!("efficiency {efficiency} outside [0, 1]"));
        }
        let w = Self::w_state(n_modes)?;
        let vac = Self::vacuum(n_modes)?;
        w.mix(&vac, efficiency)
    }

    /// Convex combination `weight * self + (1 - weight) * other`.
    pub fn mix(&self, other: &Self, weight: f64) -> Result<Self> {
        if self.n_modes != other.n_modes {
            return Err(invalid!(
                "cannot mix states on {} and {} modes",
                self.n_modes,
                other.n_modes
            ));
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(invalid!("mixing weight {weight} outside [0, 1]"));
        }
        let matrix = self.matrix.map(|z| z * weight) + other.matrix.map(|z| z * (1.0 - weight));
        Ok(Self {
            n_modes: self.n_modes,
            matrix,
        })
    }

    /// Builds a state from a matrix already known to be a density operator,
    /// e.g. the average of unitary conjugations of a valid state.
    pub(crate) fn from_trusted(n_modes: usize, matrix: DMatrix<C64>) -> Self {
        debug_assert_eq!(matrix.nrows(), n_modes + 1);
        Self { n_modes, matrix }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        self.n_modes + 1
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Matrix element in the `(vac, e_1, ..., e_N)` basis.
    pub fn element(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Numerical rank: count of eigenvalues above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .filter(|&&v| v > tol)
            .count()
    }

    /// Rows of `[re, im]` pairs in basis order, for debug dumps.
    pub fn to_rows(&self) -> Vec<Vec<[f64; 2]>> {
        matrix_rows(&self.matrix)
    }
}

fn min_hermitian_eigenvalue(matrix: &DMatrix<C64>) -> f64 {
    matrix
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn matrix_rows(matrix: &DMatrix<C64>) -> Vec<Vec<[f64; 2]>> {
    (0..matrix.nrows())
        .map(|a| {
            (0..matrix.ncols())
                .map(|b| [matrix[(a, b)].re, matrix[(a, b)].im])
                .collect()
        })
        .collect()
}

#[cfg(feature = "serde")]
#[derive(Clone, serde::Serialize, serde::Deserialize)]
struct MatrixRepr {
    n_modes: usize,
    matrix: Vec<Vec<[f64; 2]>>,
}

#[cfg(feature = "serde")]
impl From<SubspaceState> for MatrixRepr {
    fn from(state: SubspaceState) -> Self {
        MatrixRepr {
            n_modes: state.n_modes,
            matrix: state.to_rows(),
        }
    }
}

#[cfg(feature = "serde")]
impl TryFrom<MatrixRepr> for SubspaceState {
    type Error = Error;

    fn try_from(repr: MatrixRepr) -> Result<Self> {
        let dim = repr.n_modes + 1;
        if repr.matrix.len() != dim || repr.matrix.iter().any(|row| row.len() != dim) {
            return Err(invalid!("serialized matrix must be {dim}x{dim}"));
        }
        let matrix = DMatrix::from_fn(dim, dim, |a, b| {
            let [re, im] = repr.matrix[a][b];
            C64::new(re, im)
        });
        SubspaceState::new(repr.n_modes, matrix)
    }
}

/// One local measurement: displacement by `alpha = r e^{i phi}` followed by a
/// click detector.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DisplacementSetting {
    amplitude: f64,
    phase: f64,
}

impl DisplacementSetting {
    pub fn new(amplitude: f64, phase: f64) -> Result<Self> {
        if !amplitude.is_finite() || amplitude < 0.0 {
            return Err(invalid!("amplitude must be finite and nonnegative, got {amplitude}"));
        }
        if !phase.is_finite() {
            return Err(invalid!("phase must be finite, got {phase}"));
        }
        Ok(Self {
            amplitude,
            phase: wrap_phase(phase),
        })
    }

    /// Displacement `a e^{i phase}` for signed real `a`; negative `a` is
    /// stored as `|a|` at `phase + pi`.
    pub fn signed(a: f64, phase: f64) -> Result<Self> {
        if a < 0.0 {
            Self::new(-a, phase + core::f64::consts::PI)
        } else {
            Self::new(a, phase)
        }
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Phase in `[0, 2pi)`.
    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// Same amplitude, phase shifted by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            amplitude: self.amplitude,
            phase: wrap_phase(self.phase + delta),
        }
    }

    pub fn observable(&self) -> ModeObservable {
        displacement_observable(self)
    }
}

pub(crate) fn wrap_phase(phase: f64) -> f64 {
    let wrapped = phase - TAU * libm::floor(phase / TAU);
    // rounding can land exactly on TAU for tiny negative inputs
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Single-mode observable in the `(|0>, |1>)` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeObservable {
    m: [[C64; 2]; 2],
}

impl ModeObservable {
    /// Validates Hermiticity and that the spectrum lies in `[-1, 1]`.
    pub fn new(m: [[C64; 2]; 2]) -> Result<Self> {
        if (m[0][1] - m[1][0].conj()).norm() > CONSTRUCTION_TOL
            || m[0][0].im.abs() > CONSTRUCTION_TOL
            || m[1][1].im.abs() > CONSTRUCTION_TOL
        {
            return Err(invalid!("observable is not Hermitian"));
        }
        let obs = Self { m };
        let (lo, hi) = obs.eigenvalues();
        if lo < -1.0 - PHYSICS_TOL || hi > 1.0 + PHYSICS_TOL {
            return Err(invalid!("observable spectrum [{lo}, {hi}] exceeds [-1, 1]"));
        }
        Ok(obs)
    }

    pub fn identity() -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Self {
            m: [[one, zero], [zero, one]],
        }
    }

    /// `<a|M|b>` for `a, b` in `{0, 1}`.
    #[inline]
    pub fn element(&self, a: usize, b: usize) -> C64 {
        self.m[a][b]
    }

    pub fn matrix(&self) -> [[C64; 2]; 2] {
        self.m
    }

    /// Eigenvalues `(smallest, largest)` of the Hermitian 2x2 block.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let a = self.m[0][0].re;
        let d = self.m[1][1].re;
        let mean = 0.5 * (a + d);
        let half_gap = libm::hypot(0.5 * (a - d), self.m[0][1].norm());
        (mean - half_gap, mean + half_gap)
    }

    /// Max-norm distance between two observables.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                worst = worst.max((self.m[a][b] - other.m[a][b]).norm());
            }
        }
        worst
    }

    pub fn scaled(&self, factor: f64) -> [[C64; 2]; 2] {
        let mut out = self.m;
        for row in out.iter_mut() {
            for z in row.iter_mut() {
                *z *= factor;
            }
        }
        out
    }
}

/// `M_D(r, phi)` restricted to `{|0>, |1>}`:
///
/// ```text
/// [[2e^{-r^2} - 1,          2 r e^{-r^2 - i phi}],
///  [2 r e^{-r^2 + i phi},   2 r^2 e^{-r^2} - 1  ]]
/// ```
pub fn displacement_observable(setting: &DisplacementSetting) -> ModeObservable {
    let r = setting.amplitude;
    let g = libm::exp(-r * r);
    let off = 2.0 * r * g;
    let (sin, cos) = libm::sincos(setting.phase);
    ModeObservable {
        m: [
            [C64::new(2.0 * g - 1.0, 0.0), C64::new(off * cos, -off * sin)],
            [C64::new(off * cos, off * sin), C64::new(2.0 * r * r * g - 1.0, 0.0)],
        ],
    }
}

/// Projective qubit observable with the `1/2` prefactor kept:
/// `(1/2) [[cos t, e^{-i phi} sin t], [e^{i phi} sin t, -cos t]]`.
///
/// `2 * M_P(theta, phi)` agrees with `M_D(theta / 2, phi)` up to second order
/// in `theta`.
pub fn projective_observable(theta: f64, phi: f64) -> ModeObservable {
    let (st, ct) = libm::sincos(theta);
    let (sp, cp) = libm::sincos(phi);
    ModeObservable {
        m: [
            [C64::new(0.5 * ct, 0.0), C64::new(0.5 * st * cp, -0.5 * st * sp)],
            [C64::new(0.5 * st * cp, 0.5 * st * sp), C64::new(-0.5 * ct, 0.0)],
        ],
    }
}

/// One contribution `rho_{ab} <b|M_1 x ... x M_N|a>` of the closed-form
/// correlator, tagged with which mode has its `<1|M|0>` element (`raised`)
/// and which its `<0|M|1>` element (`lowered`). Phase-free terms have both
/// set to `None`; those are emitted pre-summed as a single term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatorTerm {
    pub value: C64,
    pub raised: Option<usize>,
    pub lowered: Option<usize>,
}

/// Expands `Tr[rho (M_1 x ... x M_N)]` in `O(N^2)` into its phase-free part
/// and its coherence terms, calling `emit` once per term.
pub fn expand_correlator<F>(
    state: &SubspaceState,
    observables: &[ModeObservable],
    mut emit: F,
) -> Result<()>
where
    F: FnMut(CorrelatorTerm),
{
    let n = state.n_modes;
    if observables.len() != n {
        return Err(invalid!(
            "expected {n} observables, got {}",
            observables.len()
        ));
    }
    let rho = &state.matrix;
    let zero_zero: Vec<C64> = observables.iter().map(|m| m.element(0, 0)).collect();

    // prefix[k] = prod_{l<k} z_l, suffix[k] = prod_{l>=k} z_l
    let one = C64::new(1.0, 0.0);
    let mut prefix = vec![one; n + 1];
    let mut suffix = vec![one; n + 1];
    for k in 0..n {
        prefix[k + 1] = prefix[k] * zero_zero[k];
    }
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] * zero_zero[k];
    }

    let mut diagonal = rho[(0, 0)] * prefix[n];
    for j in 0..n {
        let others = prefix[j] * suffix[j + 1];
        diagonal += rho[(j + 1, j + 1)] * observables[j].element(1, 1) * others;

        let vac_coh = rho[(0, j + 1)];
        if vac_coh != C64::new(0.0, 0.0) {
            // rho_{vac,e_j} <e_j|O|vac>
            emit(CorrelatorTerm {
                value: vac_coh * observables[j].element(1, 0) * others,
                raised: Some(j),
                lowered: None,
            });
            emit(CorrelatorTerm {
                value: rho[(j + 1, 0)] * observables[j].element(0, 1) * others,
                raised: None,
                lowered: Some(j),
            });
        }
    }
    emit(CorrelatorTerm {
        value: diagonal,
        raised: None,
        lowered: None,
    });

    for j in 0..n {
        let mut between = one;
        for k in (j + 1)..n {
            let others = prefix[j] * between * suffix[k + 1];
            between *= zero_zero[k];
            // rho_{e_j,e_k} <e_k|O|e_j> raises k and lowers j
            let forward = rho[(j + 1, k + 1)];
            if forward != C64::new(0.0, 0.0) {
                emit(CorrelatorTerm {
                    value: forward
                        * observables[k].element(1, 0)
                        * observables[j].element(0, 1)
                        * others,
                    raised: Some(k),
                    lowered: Some(j),
                });
                emit(CorrelatorTerm {
                    value: rho[(k + 1, j + 1)]
                        * observables[j].element(1, 0)
                        * observables[k].element(0, 1)
                        * others,
                    raised: Some(j),
                    lowered: Some(k),
                });
            }
        }
    }
    Ok(())
}

fn real_part_checked(total: C64) -> Result<f64> {
    if total.im.abs() > IMAGINARY_RESIDUE_LIMIT {
        return Err(Error::Consistency(alloc::format!(
            "correlator has imaginary part {}",
            total.im
        )));
    }
    Ok(total.re)
}

/// Full-correlation expectation `Tr[rho (M_1 x ... x M_N)]` via the
/// closed form on the restricted subspace.
pub fn correlator(state: &SubspaceState, observables: &[ModeObservable]) -> Result<f64> {
    let mut total = C64::new(0.0, 0.0);
    expand_correlator(state, observables, |term| total += term.value)?;
    real_part_checked(total)
}

/// Reference implementation: embeds `rho` in the full `2^N`-dimensional
/// occupation space and contracts it against the dense Kronecker product of
/// the observables. Bit `k` of a basis index is the occupation of mode `k`.
pub fn correlator_bruteforce(state: &SubspaceState, observables: &[ModeObservable]) -> Result<f64> {
    let n = state.n_modes;
    if n > BRUTEFORCE_MODE_LIMIT {
        return Err(Error::SizeLimit {
            requested: n,
            limit: BRUTEFORCE_MODE_LIMIT,
        });
    }
    if observables.len() != n {
        return Err(invalid!(
            "expected {n} observables, got {}",
            observables.len()
        ));
    }
    let full = 1usize << n;
    let embed = |idx: usize| if idx == 0 { 0 } else { 1usize << (idx - 1) };
    let mut rho_full = DMatrix::<C64>::zeros(full, full);
    for a in 0..=n {
        for b in 0..=n {
            rho_full[(embed(a), embed(b))] = state.matrix[(a, b)];
        }
    }

    // kron(M_{N-1}, ..., M_0) puts mode 0 on the least significant bit
    let mut product = DMatrix::<C64>::from_element(1, 1, C64::new(1.0, 0.0));
    for obs in observables {
        let m = obs.matrix();
        let block = DMatrix::from_fn(2, 2, |a, b| m[a][b]);
        product = block.kronecker(&product);
    }

    let mut total = C64::new(0.0, 0.0);
    for a in 0..full {
        for b in 0..full {
            total += rho_full[(a, b)] * product[(b, a)];
        }
    }
    real_part_checked(total)
}
