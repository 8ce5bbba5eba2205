use crate::error::{Error, Result};

/// Rational reduction `omega_x = s1·omega`, `omega_y = s2·omega` with coprime `s1`, `s2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Commensurable {
    pub s1: u64,
    pub s2: u64,
    pub omega: f64,
}

impl Commensurable {
    /// Common period `T = 2π/omega` of every trajectory.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }
}

/// Oscillator angular frequencies (ħ = m = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorFrequencies {
    pub omega_x: f64,
    pub omega_y: f64,
    pub commensurable: Option<Commensurable>,
}

/// Largest denominator tried when recognising a rational frequency ratio.
const MAX_DENOMINATOR: u64 = 1000;

impl OscillatorFrequencies {
    pub fn new(omega_x: f64, omega_y: f64) -> Result<Self> {
        if !(omega_x > 0.0 && omega_x.is_finite() && omega_y > 0.0 && omega_y.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "frequencies must be positive and finite (omega_x = {omega_x}, omega_y = {omega_y})"
            )));
        }
        let commensurable = rational_ratio(omega_x / omega_y).map(|(s1, s2)| Commensurable {
            s1,
            s2,
            omega: omega_x / s1 as f64,
        });
        Ok(Self {
            omega_x,
            omega_y,
            commensurable,
        })
    }

    /// `omega_x = 1`, `omega_y = √3`.
    pub fn irrational_default() -> Self {
        Self::new(1.0, 3.0_f64.sqrt()).expect("valid constants")
    }

    pub fn omega_xy(&self) -> f64 {
        self.omega_x - self.omega_y
    }

    /// Time between successive nodal escapes, `π/|omega_x − omega_y|`.
    pub fn escape_period(&self) -> Option<f64> {
        let d = self.omega_xy().abs();
        (d > 0.0).then(|| std::f64::consts::PI / d)
    }
}

/// Continued-fraction search for `p/q ≈ ratio` with `q ≤ MAX_DENOMINATOR`.
fn rational_ratio(ratio: f64) -> Option<(u64, u64)> {
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut r = ratio;
    for _ in 0..64 {
        let a = r.floor();
        if a > 1e12 {
            break;
        }
        let a = a as u64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > MAX_DENOMINATOR || h2 > MAX_DENOMINATOR {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let approx = h1 as f64 / k1 as f64;
        if (approx - ratio).abs() <= 1e-12 * ratio.abs() {
            return Some((h1, k1));
        }
        let frac = r - r.floor();
        if frac == 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}
