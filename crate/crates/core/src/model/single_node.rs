use std::f64::consts::PI;

use num_complex::Complex64;

use super::{
    jacobian_from_local, LocalField, OscillatorFrequencies, VelocitySample, DEFAULT_NODE_FLOOR,
};
use crate::error::{Error, Result};
use crate::linalg::Mat2;

/// `Ψ = a·Ψ₀₀ + b·Ψ₁₀ + c·Ψ₁₁`, a superposition with a single moving node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleNodeModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub frequencies: OscillatorFrequencies,
    pub node_floor: f64,
}

impl SingleNodeModel {
    pub fn new(a: f64, b: f64, c: f64, frequencies: OscillatorFrequencies) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::InvalidParameter("amplitudes must be finite".into()));
        }
        if b == 0.0 || c == 0.0 {
            return Err(Error::InvalidParameter(
                "b and c must be non-zero for the nodal point to exist".into(),
            ));
        }
        Ok(Self {
            a,
            b,
            c,
            frequencies,
            node_floor: DEFAULT_NODE_FLOOR,
        })
    }

    fn omega_sum(&self) -> f64 {
        self.frequencies.omega_x + self.frequencies.omega_y
    }

    /// Coefficients of `x·e^{−iω_x t}` and `x·y·e^{−i(ω_x+ω_y)t}` in `P`.
    fn coefficients(&self) -> (f64, f64) {
        let OscillatorFrequencies {
            omega_x: wx,
            omega_y: wy,
            ..
        } = self.frequencies;
        (self.b * (2.0 * wx).sqrt(), 2.0 * self.c * (wx * wy).sqrt())
    }

    pub(crate) fn local_field(&self, x: f64, y: f64, t: f64) -> LocalField {
        let (beta, gamma) = self.coefficients();
        let e1 = Complex64::from_polar(1.0, -self.frequencies.omega_x * t);
        let e2 = Complex64::from_polar(1.0, -self.omega_sum() * t);
        let p = self.a + beta * x * e1 + gamma * x * y * e2;
        let dp = [beta * e1 + gamma * y * e2, gamma * x * e2];
        let zero = Complex64::new(0.0, 0.0);
        let d2p = [[zero, gamma * e2], [gamma * e2, zero]];
        let scale = self.a.abs() + (beta * x).abs() + (gamma * x * y).abs();
        LocalField {
            p,
            dp,
            d2p,
            node_ratio: p.norm_sqr() / (scale * scale),
        }
    }

    pub fn psi(&self, x: f64, y: f64, t: f64) -> Complex64 {
        let OscillatorFrequencies {
            omega_x: wx,
            omega_y: wy,
            ..
        } = self.frequencies;
        let norm = (wx * wy).powf(0.25) / PI.sqrt();
        let gauss = (-0.5 * (wx * x * x + wy * y * y)).exp();
        let phase = Complex64::from_polar(1.0, -0.5 * (wx + wy) * t);
        norm * gauss * phase * self.local_field(x, y, t).p
    }

    fn checked_local(&self, x: f64, y: f64, t: f64) -> Result<LocalField> {
        let local = self.local_field(x, y, t);
        if local.node_ratio >= self.node_floor {
            Ok(local)
        } else {
            Err(Error::AtNode { x, y, t })
        }
    }

    pub fn velocity(&self, x: f64, y: f64, t: f64) -> Result<VelocitySample> {
        let local = self.checked_local(x, y, t)?;
        let inv = local.p.inv();
        Ok(VelocitySample {
            vx: (local.dp[0] * inv).im,
            vy: (local.dp[1] * inv).im,
            magnitude_psi_sq: self.psi(x, y, t).norm_sqr(),
        })
    }

    pub fn velocity_jacobian(&self, x: f64, y: f64, t: f64) -> Result<Mat2> {
        Ok(jacobian_from_local(&self.checked_local(x, y, t)?))
    }

    pub fn velocity_and_jacobian(&self, x: f64, y: f64, t: f64) -> Result<([f64; 2], Mat2)> {
        let local = self.checked_local(x, y, t)?;
        let inv = local.p.inv();
        let v = [(local.dp[0] * inv).im, (local.dp[1] * inv).im];
        Ok((v, jacobian_from_local(&local)))
    }

    /// Analytic nodal point and its velocity; `None` when a denominator vanishes.
    pub fn node(&self, t: f64) -> Option<([f64; 2], [f64; 2])> {
        let OscillatorFrequencies {
            omega_x: wx,
            omega_y: wy,
            ..
        } = self.frequencies;
        let ws = wx + wy;
        let (sy, cy) = (wy * t).sin_cos();
        let (ss, cs) = (ws * t).sin_cos();
        let (sx, cx) = (wx * t).sin_cos();
        if sy == 0.0 || ss == 0.0 {
            return None;
        }
        let kx = -self.a * 2.0_f64.sqrt() / (2.0 * wx.sqrt() * self.b);
        let ky = -self.b * 2.0_f64.sqrt() / (2.0 * wy.sqrt() * self.c);
        let x = kx * ss / sy;
        let y = ky * sx / ss;
        let dx = kx * (ws * cs * sy - ss * wy * cy) / (sy * sy);
        let dy = ky * (wx * cx * ss - sx * ws * cs) / (ss * ss);
        Some(([x, y], [dx, dy]))
    }

    /// Both denominators of the nodal formula, `sin(ω_y t)` and `sin((ω_x+ω_y) t)`.
    pub fn escape_denominators(&self, t: f64) -> [f64; 2] {
        [
            (self.frequencies.omega_y * t).sin(),
            (self.omega_sum() * t).sin(),
        ]
    }
}
