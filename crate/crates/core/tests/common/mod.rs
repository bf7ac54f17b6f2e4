#![allow(dead_code)]

use nalgebra::DMatrix;
use photon_bell_core::{DisplacementSetting, ModeObservable, SubspaceState, C64};
use proptest::prelude::*;

/// `rho = A A^dag / tr` from `2 (N+1)^2` raw coordinates.
pub fn state_from_raw(n: usize, raw: &[f64]) -> SubspaceState {
    let dim = n + 1;
    let a = DMatrix::from_fn(dim, dim, |i, j| {
        let k = 2 * (i * dim + j);
        C64::new(raw[k], raw[k + 1])
    });
    let mut rho = &a * a.adjoint();
    let tr = rho.trace().re;
    rho /= C64::new(tr, 0.0);
    // restore exact Hermiticity lost to rounding
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    SubspaceState::new(n, rho).expect("valid random state")
}

pub fn random_state(n: usize) -> impl Strategy<Value = SubspaceState> {
    let dim = n + 1;
    prop::collection::vec(-1.0..1.0f64, 2 * dim * dim).prop_map(move |raw| state_from_raw(n, &raw))
}

/// A displacement observable or a projective one, chosen by `kind`.
pub fn observable(kind: bool, a: f64, phi: f64) -> ModeObservable {
    if kind {
        DisplacementSetting::new(a, phi).unwrap().observable()
    } else {
        ModeObservable::new(photon_bell_core::projective_observable(4.0 * a, phi).scaled(2.0)).unwrap()
    }
}

pub fn random_observables(n: usize) -> impl Strategy<Value = Vec<ModeObservable>> {
    prop::collection::vec((any::<bool>(), 0.0..1.5f64, 0.0..std::f64::consts::TAU), n)
        .prop_map(|v| v.into_iter().map(|(k, a, p)| observable(k, a, p)).collect())
}
