//! The two wavefunction models and pointwise evaluation of Ψ, the Bohmian
//! velocity field, its Jacobian and the quantum potential (ħ = m = 1).
//!
//! Both models factor as `Ψ = g(x, y)·e^{iθ(t)}·P(x, y, t)` where `g` is a real
//! Gaussian and `P` carries every nodal structure. Everything downstream of Ψ
//! is expressed through `P` and its first and second derivatives, which each
//! model supplies analytically (up to a common positive scale factor).

mod frequencies;
mod single_node;
mod two_qubit;

pub use frequencies::{Commensurable, OscillatorFrequencies};
pub use single_node::SingleNodeModel;
pub use two_qubit::{make_two_qubit, TwoQubitModel};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::Mat2;

pub type ComplexAmplitude = Complex64;

/// Default threshold on the scale-free nodal factor below which a point counts as a node.
pub const DEFAULT_NODE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySample {
    pub vx: f64,
    pub vy: f64,
    pub magnitude_psi_sq: f64,
}

impl VelocitySample {
    pub fn as_array(&self) -> [f64; 2] {
        [self.vx, self.vy]
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

/// `P`, its gradient and Hessian at a point, plus the Gaussian frequencies.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalField {
    pub p: Complex64,
    pub dp: [Complex64; 2],
    pub d2p: [[Complex64; 2]; 2],
    /// |P|² divided by the squared sum of the magnitudes of P's terms; 0 exactly at a node.
    pub node_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WavefunctionModel {
    SingleNode(SingleNodeModel),
    TwoQubit(TwoQubitModel),
}

impl From<SingleNodeModel> for WavefunctionModel {
    fn from(m: SingleNodeModel) -> Self {
        WavefunctionModel::SingleNode(m)
    }
}

impl From<TwoQubitModel> for WavefunctionModel {
    fn from(m: TwoQubitModel) -> Self {
        WavefunctionModel::TwoQubit(m)
    }
}

impl WavefunctionModel {
    pub fn frequencies(&self) -> &OscillatorFrequencies {
        match self {
            WavefunctionModel::SingleNode(m) => &m.frequencies,
            WavefunctionModel::TwoQubit(m) => &m.frequencies,
        }
    }

    pub fn node_floor(&self) -> f64 {
        match self {
            WavefunctionModel::SingleNode(m) => m.node_floor,
            WavefunctionModel::TwoQubit(m) => m.node_floor,
        }
    }

    pub fn as_two_qubit(&self) -> Option<&TwoQubitModel> {
        match self {
            WavefunctionModel::TwoQubit(m) => Some(m),
            _ => None,
        }
    }

    pub fn psi(&self, x: f64, y: f64, t: f64) -> ComplexAmplitude {
        match self {
            WavefunctionModel::SingleNode(m) => m.psi(x, y, t),
            WavefunctionModel::TwoQubit(m) => m.psi(x, y, t),
        }
    }

    /// Bohmian velocity `Im(∇Ψ/Ψ)`.
    pub fn velocity(&self, x: f64, y: f64, t: f64) -> Result<VelocitySample> {
        match self {
            WavefunctionModel::SingleNode(m) => m.velocity(x, y, t),
            WavefunctionModel::TwoQubit(m) => m.velocity(x, y, t),
        }
    }

    /// `∂(vx, vy)/∂(x, y)`, row = velocity component, column = coordinate.
    pub fn velocity_jacobian(&self, x: f64, y: f64, t: f64) -> Result<Mat2> {
        match self {
            WavefunctionModel::SingleNode(m) => m.velocity_jacobian(x, y, t),
            WavefunctionModel::TwoQubit(m) => m.velocity_jacobian(x, y, t),
        }
    }

    /// Velocity and Jacobian in one pass (the hot path of the variational equations).
    pub fn velocity_and_jacobian(&self, x: f64, y: f64, t: f64) -> Result<([f64; 2], Mat2)> {
        match self {
            WavefunctionModel::SingleNode(m) => m.velocity_and_jacobian(x, y, t),
            WavefunctionModel::TwoQubit(m) => m.velocity_and_jacobian(x, y, t),
        }
    }

    /// Quantum potential `Q = −½ ∇²|Ψ| / |Ψ|`.
    pub fn quantum_potential(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        let local = self.local_field(x, y, t);
        if !(local.node_ratio >= self.node_floor()) {
            return Err(Error::AtNode { x, y, t });
        }
        let f = self.frequencies();
        let (wx, wy) = (f.omega_x, f.omega_y);
        let p_sq = local.p.norm_sqr();
        let mut lap_rho = 0.0;
        let mut r = [0.0; 2];
        for i in 0..2 {
            r[i] = (local.p.conj() * local.dp[i]).re / p_sq;
            lap_rho += (local.dp[i].norm_sqr() + (local.p.conj() * local.d2p[i][i]).re) / p_sq
                - r[i] * r[i];
        }
        let gauss_grad = [-wx * x, -wy * y];
        let gauss_lap = wx * wx * x * x - wx + wy * wy * y * y - wy;
        let lap = gauss_lap + 2.0 * (gauss_grad[0] * r[0] + gauss_grad[1] * r[1]) + lap_rho;
        Ok(-0.5 * lap)
    }

    /// Quantum potential by 5-point central differences of |Ψ| with step `h`.
    pub fn quantum_potential_fd(&self, x: f64, y: f64, t: f64, h: f64) -> Result<f64> {
        let mag = |x: f64, y: f64| self.psi(x, y, t).norm();
        let c = mag(x, y);
        if !(c > 0.0) || self.local_field(x, y, t).node_ratio < self.node_floor() {
            return Err(Error::AtNode { x, y, t });
        }
        let lap =
            (mag(x + h, y) + mag(x - h, y) + mag(x, y + h) + mag(x, y - h) - 4.0 * c) / (h * h);
        Ok(-0.5 * lap / c)
    }

    pub(crate) fn local_field(&self, x: f64, y: f64, t: f64) -> LocalField {
        match self {
            WavefunctionModel::SingleNode(m) => m.local_field(x, y, t),
            WavefunctionModel::TwoQubit(m) => m.local_field(x, y, t),
        }
    }
}

/// `Im(∂_i∂_j P / P − ∂_i P ∂_j P / P²)`, the Jacobian of `Im(∇P/P)`.
pub(crate) fn jacobian_from_local(local: &LocalField) -> Mat2 {
    let inv = local.p.inv();
    let g = [local.dp[0] * inv, local.dp[1] * inv];
    let mut m = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = (local.d2p[i][j] * inv - g[i] * g[j]).im;
        }
    }
    Mat2(m)
}
