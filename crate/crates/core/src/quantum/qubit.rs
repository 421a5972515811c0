//! Named states and measurements used throughout the scenario catalogue:
//! spin-1/2 along z and x, photon polarization in the x/y plane, and the
//! three-level raffle coin.

use std::f64::consts::FRAC_1_SQRT_2;

use super::linalg::Matrix;
use super::{axis_pvm, BipartiteState, ProjectiveMeasurement, PureState, UnitaryOp};

pub const SPIN_BASIS: [&str; 2] = ["z+", "z-"];
pub const POLARIZATION_BASIS: [&str; 2] = ["x", "y"];
pub const COIN_BASIS: [&str; 3] = ["ready", "heads", "tails"];

fn spin(a: f64, b: f64) -> PureState {
    PureState::from_real(&SPIN_BASIS, &[a, b]).expect("valid spin state")
}

pub fn z_plus() -> PureState {
    spin(1.0, 0.0)
}

pub fn z_minus() -> PureState {
    spin(0.0, 1.0)
}

pub fn x_plus() -> PureState {
    spin(FRAC_1_SQRT_2, FRAC_1_SQRT_2)
}

pub fn x_minus() -> PureState {
    spin(FRAC_1_SQRT_2, -FRAC_1_SQRT_2)
}

pub fn sigma_z() -> ProjectiveMeasurement {
    ProjectiveMeasurement::from_states(vec![("z+".into(), z_plus()), ("z-".into(), z_minus())]).expect("σz eigenbasis")
}

pub fn sigma_x() -> ProjectiveMeasurement {
    ProjectiveMeasurement::from_states(vec![("x+".into(), x_plus()), ("x-".into(), x_minus())]).expect("σx eigenbasis")
}

/// (|z+ z−⟩ − |z− z+⟩)/√2
pub fn singlet() -> BipartiteState {
    BipartiteState::from_real(&SPIN_BASIS, &SPIN_BASIS, &[0.0, 1.0, -1.0, 0.0]).expect("singlet is normalizable")
}

/// Linear polarization at `angle` from the x axis.
pub fn polarized(angle: f64) -> PureState {
    let (s, c) = angle.sin_cos();
    PureState::from_real(&POLARIZATION_BASIS, &[c, s]).expect("unit polarization vector")
}

/// Polarizer transmitting light polarized at `angle`.
pub fn polarizer(angle: f64) -> ProjectiveMeasurement {
    axis_pvm(angle)
}

pub fn coin_state(amplitudes: &[f64; 3]) -> PureState {
    PureState::from_real(&COIN_BASIS, amplitudes).expect("coin state")
}

pub fn coin_ready() -> PureState {
    coin_state(&[1.0, 0.0, 0.0])
}

/// The coin flip: |ready⟩ → (|heads⟩ + |tails⟩)/√2, completed on the rest of
/// the space by |heads⟩ → (|heads⟩ − |tails⟩)/√2 and |tails⟩ → |ready⟩.
pub fn coin_flip() -> UnitaryOp {
    let h = FRAC_1_SQRT_2;
    let m = Matrix::from_real_rows(&[&[0.0, 0.0, 1.0], &[h, h, 0.0], &[h, -h, 0.0]]).expect("square");
    UnitaryOp::new(m).expect("coin flip is unitary")
}

/// {heads, noheads} read out at the end of the raffle.
pub fn heads_pvm() -> ProjectiveMeasurement {
    ProjectiveMeasurement::from_subsets(3, vec![("heads".into(), vec![1]), ("noheads".into(), vec![0, 2])])
        .expect("heads/noheads partition")
}
