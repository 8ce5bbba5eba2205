use std::f64::consts::PI;

use num_complex::Complex64;

use super::{LocalField, OscillatorFrequencies, VelocitySample, DEFAULT_NODE_FLOOR};
use crate::error::{Error, Result};
use crate::linalg::Mat2;

/// Overlap `⟨Y_R|Y_L⟩ = exp(−2a₀²)` above which the two coherent states no
/// longer behave as orthogonal qubit states.
pub const QUBIT_OVERLAP_LIMIT: f64 = 1e-4;

/// `Ψ = c₁·Y_R(x)Y_L(y) + c₂·Y_L(x)Y_R(y)` built from coherent states of
/// common amplitude `a0` with `σ_x = σ_y = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitModel {
    pub c1: f64,
    pub c2: f64,
    pub a0: f64,
    pub frequencies: OscillatorFrequencies,
    pub node_floor: f64,
}

/// Builds the model with `c1 = √(1 − c2²)`.
pub fn make_two_qubit(
    c2: f64,
    a0: f64,
    frequencies: OscillatorFrequencies,
) -> Result<TwoQubitModel> {
    if !(0.0..=1.0).contains(&c2) {
        return Err(Error::InvalidParameter(format!("c2 = {c2} outside [0, 1]")));
    }
    TwoQubitModel::new((1.0 - c2 * c2).sqrt(), c2, a0, frequencies)
}

/// Cosines and sines of `ω_x t` and `ω_y t`.
#[derive(Debug, Clone, Copy)]
struct Trig {
    cx: f64,
    sx: f64,
    cy: f64,
    sy: f64,
}

/// Scaled magnitudes of the two product terms and the relative phase.
#[derive(Debug, Clone, Copy)]
struct Terms {
    /// `c₁e^{F}` and `c₂e^{−F}` divided by the larger of the two.
    w1: f64,
    w2: f64,
    /// log of the scale factor removed from `w1`, `w2`.
    log_scale: f64,
    /// `φ = g_x − g_y`
    phi: f64,
}

impl TwoQubitModel {
    pub fn new(c1: f64, c2: f64, a0: f64, frequencies: OscillatorFrequencies) -> Result<Self> {
        if !(c1 > 0.0 && c2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "require c1 > 0 and c2 >= 0 (c1 = {c1}, c2 = {c2})"
            )));
        }
        if (c1 * c1 + c2 * c2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "c1² + c2² = {} must equal 1",
                c1 * c1 + c2 * c2
            )));
        }
        if !(a0 > 0.0 && a0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "a0 = {a0} must be positive"
            )));
        }
        let model = Self {
            c1,
            c2,
            a0,
            frequencies,
            node_floor: DEFAULT_NODE_FLOOR,
        };
        if model.overlap() >= QUBIT_OVERLAP_LIMIT {
            log::warn!(
                "coherent-state overlap exp(-2 a0^2) = {:.3e} >= {QUBIT_OVERLAP_LIMIT:e}; qubit interpretation is approximate",
                model.overlap()
            );
        }
        Ok(model)
    }

    /// `⟨Y_R|Y_L⟩ = exp(−2a₀²)`.
    pub fn overlap(&self) -> f64 {
        (-2.0 * self.a0 * self.a0).exp()
    }

    /// `ln|c1/c2|`, infinite for the product state.
    pub fn log_ratio(&self) -> f64 {
        (self.c1 / self.c2).abs().ln()
    }

    /// `√(2ω_x)·a0` and `√(2ω_y)·a0`.
    fn momenta(&self) -> (f64, f64) {
        let f = &self.frequencies;
        (
            (2.0 * f.omega_x).sqrt() * self.a0,
            (2.0 * f.omega_y).sqrt() * self.a0,
        )
    }

    fn trig(&self, t: f64) -> Trig {
        let (sx, cx) = (self.frequencies.omega_x * t).sin_cos();
        let (sy, cy) = (self.frequencies.omega_y * t).sin_cos();
        Trig { cx, sx, cy, sy }
    }

    fn terms(&self, x: f64, y: f64, tr: &Trig) -> Terms {
        let (px, py) = self.momenta();
        let f = px * tr.cx * x - py * tr.cy * y;
        let phi = px * tr.sx * x - py * tr.sy * y;
        let l1 = self.c1.ln() + f;
        let l2 = if self.c2 > 0.0 {
            self.c2.ln() - f
        } else {
            f64::NEG_INFINITY
        };
        let m = l1.max(l2);
        Terms {
            w1: (l1 - m).exp(),
            w2: (l2 - m).exp(),
            log_scale: m,
            phi,
        }
    }

    /// Wave vectors `κ_x`, `κ_y` with `∂_i(c₁e^{F−iφ}) = κ_i·c₁e^{F−iφ}`.
    fn kappas(&self, tr: &Trig) -> [Complex64; 2] {
        let (px, py) = self.momenta();
        [
            Complex64::new(px * tr.cx, -px * tr.sx),
            Complex64::new(-py * tr.cy, py * tr.sy),
        ]
    }

    /// log of the modulus of the Gaussian envelope and normalisation.
    fn log_envelope(&self, x: f64, y: f64, tr: &Trig) -> f64 {
        let OscillatorFrequencies {
            omega_x: wx,
            omega_y: wy,
            ..
        } = self.frequencies;
        let a2 = self.a0 * self.a0;
        0.25 * (wx / PI).ln() + 0.25 * (wy / PI).ln()
            - 0.5 * (wx * x * x + wy * y * y)
            - a2 * (tr.cx * tr.cx + tr.cy * tr.cy)
    }

    fn zeta(&self, t: f64) -> f64 {
        let a2 = self.a0 * self.a0;
        let z = |w: f64| 0.5 * (a2 * (2.0 * w * t).sin() - w * t);
        z(self.frequencies.omega_x) + z(self.frequencies.omega_y)
    }

    pub fn psi(&self, x: f64, y: f64, t: f64) -> Complex64 {
        let tr = self.trig(t);
        let terms = self.terms(x, y, &tr);
        let chi = Complex64::from_polar(terms.w1, -terms.phi)
            + Complex64::from_polar(terms.w2, terms.phi);
        let modulus = (self.log_envelope(x, y, &tr) + terms.log_scale).exp();
        modulus * Complex64::from_polar(1.0, self.zeta(t)) * chi
    }

    pub(crate) fn local_field(&self, x: f64, y: f64, t: f64) -> LocalField {
        let tr = self.trig(t);
        let terms = self.terms(x, y, &tr);
        let u1 = Complex64::from_polar(terms.w1, -terms.phi);
        let u2 = Complex64::from_polar(terms.w2, terms.phi);
        let chi = u1 + u2;
        let k = self.kappas(&tr);
        let diff = u1 - u2;
        let sum = terms.w1 + terms.w2;
        LocalField {
            p: chi,
            dp: [k[0] * diff, k[1] * diff],
            d2p: [
                [k[0] * k[0] * chi, k[0] * k[1] * chi],
                [k[1] * k[0] * chi, k[1] * k[1] * chi],
            ],
            node_ratio: chi.norm_sqr() / (sum * sum),
        }
    }

    /// The `A`, `B`, `G` combinations of the closed-form equations of motion,
    /// all divided by the same positive factor.
    fn abg(&self, terms: &Terms) -> (f64, f64, f64) {
        let e1 = terms.w1 * terms.w1;
        let e2 = terms.w2 * terms.w2;
        let cross = 2.0 * terms.w1 * terms.w2;
        let (s2, c2) = (2.0 * terms.phi).sin_cos();
        (cross * s2, e1 - e2, e1 + e2 + cross * c2)
    }

    fn checked(&self, x: f64, y: f64, t: f64) -> Result<(Trig, Terms, (f64, f64, f64))> {
        let tr = self.trig(t);
        let terms = self.terms(x, y, &tr);
        let (a, b, g) = self.abg(&terms);
        let sum = terms.w1 + terms.w2;
        if !(g / (sum * sum) >= self.node_floor) {
            return Err(Error::AtNode { x, y, t });
        }
        Ok((tr, terms, (a, b, g)))
    }

    fn velocity_from(&self, tr: &Trig, a: f64, b: f64, g: f64) -> [f64; 2] {
        let (px, py) = self.momenta();
        [
            -px * (a * tr.cx + b * tr.sx) / g,
            py * (a * tr.cy + b * tr.sy) / g,
        ]
    }

    /// `J_ij = Im(κ_i κ_j (1 − D²))` with `D = (B − iA)/G`.
    fn jacobian_from(&self, tr: &Trig, a: f64, b: f64, g: f64) -> Mat2 {
        let d = Complex64::new(b / g, -a / g);
        let one_minus = Complex64::new(1.0, 0.0) - d * d;
        let k = self.kappas(tr);
        let m01 = (k[0] * k[1] * one_minus).im;
        Mat2([
            [(k[0] * k[0] * one_minus).im, m01],
            [m01, (k[1] * k[1] * one_minus).im],
        ])
    }

    /// Closed-form equations of motion.
    pub fn velocity(&self, x: f64, y: f64, t: f64) -> Result<VelocitySample> {
        let (tr, terms, (a, b, g)) = self.checked(x, y, t)?;
        let [vx, vy] = self.velocity_from(&tr, a, b, g);
        let log_mod = self.log_envelope(x, y, &tr) + terms.log_scale;
        Ok(VelocitySample {
            vx,
            vy,
            magnitude_psi_sq: (2.0 * log_mod).exp() * g,
        })
    }

    pub fn velocity_jacobian(&self, x: f64, y: f64, t: f64) -> Result<Mat2> {
        let (tr, _, (a, b, g)) = self.checked(x, y, t)?;
        Ok(self.jacobian_from(&tr, a, b, g))
    }

    pub fn velocity_and_jacobian(&self, x: f64, y: f64, t: f64) -> Result<([f64; 2], Mat2)> {
        let (tr, _, (a, b, g)) = self.checked(x, y, t)?;
        Ok((
            self.velocity_from(&tr, a, b, g),
            self.jacobian_from(&tr, a, b, g),
        ))
    }

    /// Jacobian through the generic `Im(∇P/P)` route; used to cross-check the closed form.
    #[cfg(test)]
    pub(crate) fn velocity_jacobian_generic(&self, x: f64, y: f64, t: f64) -> Mat2 {
        super::jacobian_from_local(&self.local_field(x, y, t))
    }

    /// Point on the line of critical points for integer index `k`: odd `k` gives
    /// a nodal point, even `k` a Y-point. Returns position and exact time derivative.
    pub fn line_point(&self, k: i64, t: f64) -> Option<([f64; 2], [f64; 2])> {
        let OscillatorFrequencies {
            omega_x: wx,
            omega_y: wy,
            ..
        } = self.frequencies;
        let wxy = wx - wy;
        let den = (wxy * t).sin();
        if den == 0.0 || self.c2 == 0.0 {
            return None;
        }
        let dden = wxy * (wxy * t).cos();
        let l = self.log_ratio();
        let kpi = k as f64 * PI;
        let coord = |w_other: f64, w_self: f64| {
            let pref = 2.0_f64.sqrt() / (4.0 * w_self.sqrt() * self.a0);
            let (s, c) = (w_other * t).sin_cos();
            let num = kpi * c + l * s;
            let dnum = w_other * (-kpi * s + l * c);
            (
                pref * num / den,
                pref * (dnum * den - num * dden) / (den * den),
            )
        };
        let (x, dx) = coord(wy, wx);
        let (y, dy) = coord(wx, wy);
        Some(([x, y], [dx, dy]))
    }

    /// Parity of nodal indices: 1 (odd) when `c1·c2 > 0`, 0 (even) otherwise.
    pub fn node_parity(&self) -> i64 {
        if self.c1 * self.c2 > 0.0 {
            1
        } else {
            0
        }
    }
}
