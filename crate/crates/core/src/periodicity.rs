//! Commensurable frequencies: every trajectory and its deviation vector are
//! periodic with the common period `T`, the flow stops at `T/2` and retraces.

use crate::chaos::{envelope_slope, lcn_with_class, ClassifyOptions, TrajectoryClass};
use crate::error::{Error, Result};
use crate::model::WavefunctionModel;
use crate::trajectory::{default_xi0, integrate_with_deviation, IntegrationControls};

/// Samples per half period.
const HALF_PERIOD_SAMPLES: usize = 200;
pub const SPEED_TOL: f64 = 1e-10;
pub const RETRACE_TOL: f64 = 1e-6;
pub const A_CUM_TOL: f64 = 1e-6;
/// Grid of probe points for the zero-velocity check.
const PROBE_EXTENT: f64 = 4.0;
const PROBE_COUNT: usize = 11;

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicityReport {
    pub period: f64,
    pub periods: u32,
    /// Largest speed over the probe grid at `t = T/2`.
    pub max_speed_half_period: f64,
    /// `max |pos(T/2 + τ) − pos(T/2 − τ)|` over `τ ∈ [0, T/2]`.
    pub max_retrace_error: f64,
    /// `Σa` over the first period.
    pub a_cum_period: f64,
    /// `max_n |χ(nT)|`.
    pub max_abs_chi_at_periods: f64,
    /// Log-log slope of the |χ| envelope over the trailing decade.
    pub envelope_slope: f64,
    pub class: Option<TrajectoryClass>,
}

impl PeriodicityReport {
    pub fn passes(&self) -> bool {
        self.max_speed_half_period <= SPEED_TOL
            && self.max_retrace_error < RETRACE_TOL
            && self.a_cum_period.abs() < A_CUM_TOL
            && self.class == Some(TrajectoryClass::Ordered)
    }
}

/// Runs the periodicity diagnostics over `periods` periods from `start`.
/// The sampling grid of `controls` is replaced by one aligned with `T/2`;
/// tolerances are kept.
pub fn periodicity_check(
    model: &WavefunctionModel,
    start: [f64; 2],
    periods: u32,
    controls: &IntegrationControls,
    classify: &ClassifyOptions,
) -> Result<PeriodicityReport> {
    let comm = model
        .frequencies()
        .commensurable
        .ok_or_else(|| Error::Validation("frequencies are not commensurable".into()))?;
    if periods == 0 {
        return Err(Error::Validation("need at least one period".into()));
    }
    let period = comm.period();
    let half = period / 2.0;
    let dt = half / HALF_PERIOD_SAMPLES as f64;
    let c = IntegrationControls {
        dt_sample: dt,
        renorm_dt: dt,
        t_final: periods as f64 * period,
        ..*controls
    };

    let mut max_speed: f64 = 0.0;
    for i in 0..PROBE_COUNT {
        for j in 0..PROBE_COUNT {
            let s =
                |n: usize| -PROBE_EXTENT + 2.0 * PROBE_EXTENT * n as f64 / (PROBE_COUNT - 1) as f64;
            if let Ok(v) = model.velocity(s(i), s(j), half) {
                max_speed = max_speed.max(v.speed());
            }
        }
    }

    let rec = integrate_with_deviation(model, start[0], start[1], default_xi0(), &c)?;
    if !rec.status.is_completed() {
        return Err(Error::Stalled {
            t: rec.times.last().copied().unwrap_or(0.0),
        });
    }
    let mid = HALF_PERIOD_SAMPLES;
    let max_retrace = (0..=mid)
        .map(|j| {
            let (a, b) = (rec.positions[mid + j], rec.positions[mid - j]);
            (a[0] - b[0]).hypot(a[1] - b[1])
        })
        .fold(0.0, f64::max);

    let lcn = lcn_with_class(&rec.stretching, c.renorm_dt, classify);
    let per = 2 * HALF_PERIOD_SAMPLES;
    let a_cum_period = lcn.a_cum[per - 1];
    let max_chi = (1..=periods as usize)
        .map(|n| lcn.chi[n * per - 1].abs())
        .fold(0.0, f64::max);
    Ok(PeriodicityReport {
        period,
        periods,
        max_speed_half_period: max_speed,
        max_retrace_error: max_retrace,
        a_cum_period,
        max_abs_chi_at_periods: max_chi,
        envelope_slope: envelope_slope(&lcn, classify.window_ratio).unwrap_or(f64::NAN),
        class: lcn.classification.map(|c| c.class),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_two_qubit, OscillatorFrequencies};

    #[test]
    fn incommensurable_is_rejected() {
        let m: WavefunctionModel =
            make_two_qubit(0.5, 2.5, OscillatorFrequencies::irrational_default())
                .unwrap()
                .into();
        let r = periodicity_check(
            &m,
            [1.0, 1.0],
            2,
            &IntegrationControls::default(),
            &ClassifyOptions::default(),
        );
        assert!(matches!(r, Err(Error::Validation(_))));
    }
}
