//! The N-party, two-setting full-correlation Bell functional
//!
//! ```text
//! S = 2^{-N} sum_r | sum_s (-1)^{r.s} xi(s) |   (local bound 1)
//! ```
//!
//! and the Horodecki maximal-CHSH criterion for two-qubit states.
//!
//! Table index convention: bit `k` (LSB = party 1) of the index is party
//! `k`'s setting. The two normalizations are kept apart: `S` has local bound
//! 1, [`chsh_horodecki`] reports the CHSH value with local bound 2.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Matrix4};

use crate::error::{invalid, Error, Result};
use crate::fock::{SubspaceState, C64, PHYSICS_TOL};

const TABLE_RANGE_TOL: f64 = 1e-9;
/// Party count supported by [`wwzb_value_naive`].
pub const NAIVE_PARTY_LIMIT: usize = 10;

/// Full-correlation function `xi(s)` over all `2^N` setting vectors.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelatorTable {
    n_parties: usize,
    values: Vec<f64>,
}

impl CorrelatorTable {
    pub fn new(n_parties: usize, values: Vec<f64>) -> Result<Self> {
        if n_parties == 0 || n_parties >= usize::BITS as usize {
            return Err(invalid!("unsupported party count {n_parties}"));
        }
        if values.len() != 1usize << n_parties {
            return Err(invalid!(
                "table for {n_parties} parties needs {} entries, got {}",
                1usize << n_parties,
                values.len()
            ));
        }
        if let Some(bad) = values
            .iter()
            .find(|v| !v.is_finite() || v.abs() > 1.0 + TABLE_RANGE_TOL)
        {
            return Err(invalid!("correlator {bad} outside [-1, 1]"));
        }
        Ok(Self { n_parties, values })
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `xi(s)` for the setting vector encoded by `index`.
    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Pointwise `weight * self + (1 - weight) * other`.
    pub fn mix(&self, other: &Self, weight: f64) -> Result<Self> {
        if self.n_parties != other.n_parties {
            return Err(invalid!("tables have different party counts"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| weight * a + (1.0 - weight) * b)
            .collect();
        Self::new(self.n_parties, values)
    }
}

/// Value of the Bell functional plus the `r` with the largest inner sum.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BellResult {
    pub s_value: f64,
    pub dominant_r: usize,
}

impl BellResult {
    pub fn violates(&self) -> bool {
        self.s_value > 1.0
    }
}

fn summarize(transform: &[f64], n_parties: usize) -> BellResult {
    let mut total = 0.0;
    let mut dominant_r = 0;
    let mut dominant = f64::NEG_INFINITY;
    for (r, t) in transform.iter().enumerate() {
        let a = t.abs();
        total += a;
        if a > dominant {
            dominant = a;
            dominant_r = r;
        }
    }
    BellResult {
        s_value: libm::ldexp(total, -(n_parties as i32)),
        dominant_r,
    }
}

/// In-place Walsh-Hadamard transform: `x[r] <- sum_s (-1)^{popcount(r & s)} x[s]`.
pub fn walsh_hadamard_in_place(values: &mut [f64]) {
    let len = values.len();
    debug_assert!(len.is_power_of_two());
    let mut half = 1;
    while half < len {
        for block in (0..len).step_by(2 * half) {
            for i in block..block + half {
                let (a, b) = (values[i], values[i + half]);
                values[i] = a + b;
                values[i + half] = a - b;
            }
        }
        half *= 2;
    }
}

/// `S` via the fast transform, `O(N 2^N)`.
pub fn wwzb_value(table: &CorrelatorTable) -> BellResult {
    let mut scratch = table.values.clone();
    walsh_hadamard_in_place(&mut scratch);
    summarize(&scratch, table.n_parties)
}

/// `S` by the direct double sum, `O(4^N)`.
pub fn wwzb_value_naive(table: &CorrelatorTable) -> Result<BellResult> {
    if table.n_parties > NAIVE_PARTY_LIMIT {
        return Err(Error::SizeLimit {
            requested: table.n_parties,
            limit: NAIVE_PARTY_LIMIT,
        });
    }
    let len = table.values.len();
    let transform: Vec<f64> = (0..len)
        .map(|r| {
            (0..len)
                .map(|s| {
                    if (r & s).count_ones() % 2 == 0 {
                        table.values[s]
                    } else {
                        -table.values[s]
                    }
                })
                .sum()
        })
        .collect();
    Ok(summarize(&transform, table.n_parties))
}

fn pauli(a: usize) -> [[C64; 2]; 2] {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match a {
        0 => [[z, one], [one, z]],
        1 => [[z, -i], [i, z]],
        _ => [[one, z], [z, -one]],
    }
}

/// Correlation matrix `T_ab = Tr[rho (sigma_a x sigma_b)]` for `a, b` in
/// `{x, y, z}`. Basis order `|00>, |01>, |10>, |11>` with the first qubit
/// most significant.
pub fn correlation_matrix(rho: &Matrix4<C64>) -> Matrix3<f64> {
    Matrix3::from_fn(|a, b| {
        let (sa, sb) = (pauli(a), pauli(b));
        let mut total = C64::new(0.0, 0.0);
        for row in 0..4 {
            for col in 0..4 {
                let op = sa[col >> 1][row >> 1] * sb[col & 1][row & 1];
                total += rho[(row, col)] * op;
            }
        }
        total.re
    })
}

/// Maximal CHSH value `2 sqrt(u1 + u2)` over all local qubit measurements,
/// with `u1 >= u2` the two largest eigenvalues of `T^T T`.
pub fn chsh_horodecki(rho: &Matrix4<C64>) -> Result<f64> {
    for a in 0..4 {
        for b in a..4 {
            if (rho[(a, b)] - rho[(b, a)].conj()).norm() > PHYSICS_TOL {
                return Err(invalid!("two-qubit matrix is not Hermitian"));
            }
        }
    }
    if (rho.trace() - C64::new(1.0, 0.0)).norm() > PHYSICS_TOL {
        return Err(invalid!("two-qubit matrix does not have unit trace"));
    }
    let min_eig = rho
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -PHYSICS_TOL {
        return Err(invalid!("two-qubit matrix is not positive semidefinite"));
    }
    let t = correlation_matrix(rho);
    let mut u: Vec<f64> = (t.transpose() * t).symmetric_eigenvalues().iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    Ok(2.0 * libm::sqrt((u[0] + u[1]).max(0.0)))
}

/// Embeds a two-mode subspace state into two qubits: mode A is the first
/// (most significant) qubit, so `|e_A> -> |10>` and `|e_B> -> |01>`.
pub fn two_mode_as_qubits(state: &SubspaceState) -> Result<Matrix4<C64>> {
    if state.n_modes() != 2 {
        return Err(invalid!("qubit embedding needs exactly two modes"));
    }
    let target = [0usize, 2, 1];
    let mut out = Matrix4::zeros();
    for a in 0..3 {
        for b in 0..3 {
            out[(target[a], target[b])] = state.element(a, b);
        }
    }
    Ok(out)
}
