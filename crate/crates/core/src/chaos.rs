//! Chaos diagnostics: distances to the nearest N, X and Y points, event and
//! vortex segmentation, finite-time LCN series and ordered/chaotic labels.

use std::collections::HashMap;
use std::fmt;

use crate::critical::{
    check_escape_guard, find_x_points, nodal_point, CriticalLine, CriticalPointOptions, NodalPoint,
    DEFAULT_ESCAPE_GUARD,
};
use crate::model::WavefunctionModel;
use crate::trajectory::TrajectoryRecord;

pub const DEFAULT_EVENT_THRESHOLD: f64 = 1.0;
pub const DEFAULT_MIN_GAP: f64 = 0.2;
pub const DEFAULT_CHAOTIC_FLOOR: f64 = 1e-3;
pub const DEFAULT_ORDERED_SLOPE: f64 = -0.8;
pub const DEFAULT_CHAOTIC_SLOPE: f64 = 0.8;
/// Log-spaced bins of the envelope fit over the trailing window.
const ENVELOPE_BINS: usize = 20;

/// Per-sample distances to the closest critical points of each kind.
/// Unavailable distances (escape instants, failed X detection) are `+∞`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistanceChannels {
    pub times: Vec<f64>,
    pub d_n: Vec<f64>,
    pub d_x: Vec<f64>,
    pub d_y: Vec<f64>,
    pub nearest_k: Vec<Option<i64>>,
    pub nearest_k_prime: Vec<Option<i64>>,
    /// Samples where no X-point was available.
    pub x_gap: Vec<bool>,
    /// Speed of the nearest node.
    pub node_speed: Vec<f64>,
    /// Particle position relative to the nearest node.
    pub uv: Vec<Option<[f64; 2]>>,
}

impl DistanceChannels {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `min(D_N, D_X, D_Y)` at sample `i`.
    pub fn min_distance(&self, i: usize) -> f64 {
        self.d_n[i].min(self.d_x[i]).min(self.d_y[i])
    }

    fn push_gap(&mut self, t: f64) {
        self.times.push(t);
        self.d_n.push(f64::INFINITY);
        self.d_x.push(f64::INFINITY);
        self.d_y.push(f64::INFINITY);
        self.nearest_k.push(None);
        self.nearest_k_prime.push(None);
        self.x_gap.push(true);
        self.node_speed.push(f64::NAN);
        self.uv.push(None);
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Warm-start cache of X-point offsets per node index.
#[derive(Debug, Default)]
struct XCache(HashMap<i64, Vec<[f64; 2]>>);

impl XCache {
    /// Distance from `p` to the closest X-point of node `k`, if any were found.
    fn closest(
        &mut self,
        model: &WavefunctionModel,
        node: &NodalPoint,
        p: [f64; 2],
        opts: &CriticalPointOptions,
    ) -> Option<f64> {
        let seeds = self.0.get(&node.k).cloned().unwrap_or_default();
        let search = find_x_points(model, node, &seeds, opts).ok()?;
        let offsets: Vec<[f64; 2]> = search.points.iter().map(|x| x.offset).collect();
        self.0.insert(node.k, offsets);
        search
            .points
            .iter()
            .map(|x| dist(x.position_inertial, p))
            .min_by(f64::total_cmp)
    }
}

/// Distances from each sample of `positions` (at `times`) to the nearest N,
/// X and Y points. X-points are searched around the nearest node and its two
/// neighbours of the same parity so that side switches are caught.
pub fn distance_channels_at(
    model: &WavefunctionModel,
    times: &[f64],
    positions: &[[f64; 2]],
    opts: &CriticalPointOptions,
) -> DistanceChannels {
    let mut out = DistanceChannels::default();
    let mut cache = XCache::default();
    for (&t, &p) in times.iter().zip(positions) {
        if check_escape_guard(model, t, opts.escape_guard.max(DEFAULT_ESCAPE_GUARD)).is_err() {
            out.push_gap(t);
            continue;
        }
        let (node, neighbours, y_point, k_prime) = match model {
            WavefunctionModel::SingleNode(m) => match m.node(t) {
                Some((position, velocity)) => (
                    NodalPoint {
                        k: 0,
                        position,
                        velocity,
                        t,
                    },
                    vec![],
                    [0.0, position[1]],
                    0,
                ),
                None => {
                    out.push_gap(t);
                    continue;
                }
            },
            WavefunctionModel::TwoQubit(_) => {
                let Some(line) = CriticalLine::at(model, t) else {
                    out.push_gap(t);
                    continue;
                };
                let k = line.nearest_with_parity(p, line.node_parity);
                let kp = line.nearest_with_parity(p, 1 - line.node_parity);
                let Ok(node) = nodal_point(model, k, t) else {
                    out.push_gap(t);
                    continue;
                };
                let neighbours: Vec<NodalPoint> = [k - 2, k + 2]
                    .iter()
                    .filter_map(|&kk| nodal_point(model, kk, t).ok())
                    .collect();
                (node, neighbours, line.point(kp), kp)
            }
        };
        let d_x = std::iter::once(&node)
            .chain(&neighbours)
            .filter_map(|n| cache.closest(model, n, p, opts))
            .min_by(f64::total_cmp);
        out.times.push(t);
        out.d_n.push(dist(node.position, p));
        out.d_x.push(d_x.unwrap_or(f64::INFINITY));
        out.d_y.push(dist(y_point, p));
        out.nearest_k.push(Some(node.k));
        out.nearest_k_prime.push(Some(k_prime));
        out.x_gap.push(d_x.is_none());
        out.node_speed.push(node.speed());
        out.uv
            .push(Some([p[0] - node.position[0], p[1] - node.position[1]]));
    }
    out
}

pub fn distance_channels(
    record: &TrajectoryRecord,
    model: &WavefunctionModel,
    opts: &CriticalPointOptions,
) -> DistanceChannels {
    distance_channels_at(model, &record.times, &record.positions, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventOptions {
    pub threshold: f64,
    pub min_gap: f64,
}

impl Default for EventOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_EVENT_THRESHOLD,
            min_gap: DEFAULT_MIN_GAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t_start: f64,
    pub t_end: f64,
    /// Nodes approached (local minima of the nearest-node distance), in order.
    pub involved_k: Vec<i64>,
    pub min_d_n: f64,
    pub min_d_x: f64,
    pub min_d_y: f64,
    /// Change of `Σ a` from `t_start` to `t_end`; `NaN` without stretching data.
    pub a_cum_delta: f64,
}

impl Event {
    pub fn min_distance(&self) -> f64 {
        self.min_d_n.min(self.min_d_x).min(self.min_d_y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vortex {
    pub t_start: f64,
    pub t_end: f64,
    pub node_k: i64,
    /// Signed revolutions of `(u, v)` about the node.
    pub winding: f64,
    pub mean_node_speed: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub events: Vec<Event>,
    pub vortices: Vec<Vortex>,
}

/// Index ranges `[start, end]` of runs where `pred` holds, merging runs whose
/// time gap is below `min_gap`.
fn runs(times: &[f64], pred: impl Fn(usize) -> bool, min_gap: f64) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < times.len() {
        if !pred(i) {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < times.len() && pred(i + 1) {
            i += 1;
        }
        match out.last_mut() {
            Some(last) if times[start] - times[last.1] < min_gap => last.1 = i,
            _ => out.push((start, i)),
        }
        i += 1;
    }
    out
}

/// `Σ a` at time `t` from a series on the renormalization grid (0 before the first instant).
fn a_cum_at(lcn: &LcnSeries, t: f64) -> f64 {
    let idx = lcn
        .times
        .partition_point(|&s| s <= t + 1e-9 * t.abs().max(1.0));
    if idx == 0 {
        0.0
    } else {
        lcn.a_cum[idx - 1]
    }
}

/// Clustered close approaches: runs where the smallest distance is below the
/// threshold, merged across gaps shorter than `min_gap`. Gap samples (escape
/// instants) always split events.
pub fn detect_events(
    channels: &DistanceChannels,
    lcn: Option<&LcnSeries>,
    opts: &EventOptions,
) -> Vec<Event> {
    let close = |i: usize| channels.min_distance(i) < opts.threshold;
    let mut segments = Vec::new();
    // Split on gaps first so no event straddles an escape.
    let mut block_start = 0;
    for i in 0..=channels.len() {
        if i == channels.len() || channels.nearest_k[i].is_none() {
            if i > block_start {
                let times = &channels.times[block_start..i];
                for (a, b) in runs(times, |j| close(block_start + j), opts.min_gap) {
                    segments.push((block_start + a, block_start + b));
                }
            }
            block_start = i + 1;
        }
    }
    segments
        .into_iter()
        .map(|(a, b)| {
            // An approach is a local minimum of the distance to the nearest node.
            let mut involved: Vec<i64> = Vec::new();
            for i in a.max(1)..=b.min(channels.len().saturating_sub(2)) {
                let k = channels.nearest_k[i];
                let (d, dl, dr) = (channels.d_n[i], channels.d_n[i - 1], channels.d_n[i + 1]);
                let same = channels.nearest_k[i - 1] == k && channels.nearest_k[i + 1] == k;
                if let (Some(k), true) = (k, same && d <= dl && d < dr && d < opts.threshold) {
                    if involved.last() != Some(&k) {
                        involved.push(k);
                    }
                }
            }
            let min = |v: &[f64]| v[a..=b].iter().copied().fold(f64::INFINITY, f64::min);
            let (t_start, t_end) = (channels.times[a], channels.times[b]);
            Event {
                t_start,
                t_end,
                involved_k: involved,
                min_d_n: min(&channels.d_n),
                min_d_x: min(&channels.d_x),
                min_d_y: min(&channels.d_y),
                a_cum_delta: lcn.map_or(f64::NAN, |l| a_cum_at(l, t_end) - a_cum_at(l, t_start)),
            }
        })
        .collect()
}

/// Spiral motion about a node: runs where the node is the closest critical
/// point (and closer than `threshold`), with the same nearest node, merged
/// across interruptions shorter than `min_gap`. The winding of `(u, v)` is
/// accumulated from unwrapped angle increments; runs with at least one full
/// revolution are reported.
pub fn detect_vortices(channels: &DistanceChannels, opts: &EventOptions) -> Vec<Vortex> {
    let n = channels.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let Some(k) = channels.nearest_k[i] else {
            i += 1;
            continue;
        };
        // Maximal run with the same nearest node.
        let mut j = i;
        while j + 1 < n && channels.nearest_k[j + 1] == Some(k) {
            j += 1;
        }
        let times = &channels.times[i..=j];
        let dominant = |s: usize| {
            let g = i + s;
            channels.d_n[g] < opts.threshold
                && channels.d_n[g] <= channels.d_x[g].min(channels.d_y[g])
        };
        for (a, b) in runs(times, dominant, opts.min_gap) {
            let (a, b) = (i + a, i + b);
            let mut angle = 0.0;
            for s in a..b {
                if let (Some(p), Some(q)) = (channels.uv[s], channels.uv[s + 1]) {
                    let d = q[1].atan2(q[0]) - p[1].atan2(p[0]);
                    angle += (d + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU)
                        - std::f64::consts::PI;
                }
            }
            let winding = angle / std::f64::consts::TAU;
            if winding.abs() >= 1.0 {
                let speeds = &channels.node_speed[a..=b];
                out.push(Vortex {
                    t_start: channels.times[a],
                    t_end: channels.times[b],
                    node_k: k,
                    winding,
                    mean_node_speed: speeds.iter().sum::<f64>() / speeds.len() as f64,
                });
            }
        }
        i = j + 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryClass {
    Ordered,
    Chaotic,
    Undecided,
}

impl fmt::Display for TrajectoryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrajectoryClass::Ordered => "ordered",
            TrajectoryClass::Chaotic => "chaotic",
            TrajectoryClass::Undecided => "undecided",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcnSeries {
    pub times: Vec<f64>,
    pub chi: Vec<f64>,
    pub a_cum: Vec<f64>,
    pub final_chi: f64,
    pub classification: Option<Classification>,
}

/// `χ(t) = Σa / t` on the renormalization grid `t_s = s·renorm_dt`.
pub fn lcn_series(stretching: &[f64], renorm_dt: f64) -> LcnSeries {
    let mut times = Vec::with_capacity(stretching.len());
    let mut chi = Vec::with_capacity(stretching.len());
    let mut a_cum = Vec::with_capacity(stretching.len());
    let mut acc = 0.0;
    for (i, a) in stretching.iter().enumerate() {
        acc += a;
        let t = (i + 1) as f64 * renorm_dt;
        times.push(t);
        a_cum.push(acc);
        chi.push(acc / t);
    }
    let final_chi = chi.last().copied().unwrap_or(0.0);
    LcnSeries {
        times,
        chi,
        a_cum,
        final_chi,
        classification: None,
    }
}

impl LcnSeries {
    /// χ at the last grid instant not after `t`.
    pub fn chi_at(&self, t: f64) -> Option<f64> {
        let idx = self.times.partition_point(|&s| s <= t * (1.0 + 1e-12));
        (idx > 0).then(|| self.chi[idx - 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Ratio of the end of the series to the start of the fitted window
    /// (10 fits the trailing decade).
    pub window_ratio: f64,
    pub ordered_slope: f64,
    pub chaotic_slope: f64,
    pub chaotic_floor: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            window_ratio: 10.0,
            ordered_slope: DEFAULT_ORDERED_SLOPE,
            chaotic_slope: DEFAULT_CHAOTIC_SLOPE,
            chaotic_floor: DEFAULT_CHAOTIC_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub class: TrajectoryClass,
    /// Log-log slope of the |χ| envelope over the trailing window.
    pub slope: f64,
    pub final_chi: f64,
    pub floor: f64,
}

/// Least-squares slope of `log|χ|` against `log t` using the maximum of |χ|
/// inside log-spaced bins of the trailing window. The bin maxima follow the
/// envelope, which is what decays as `t⁻¹` for ordered trajectories whose
/// `Σa` oscillates around zero.
pub fn envelope_slope(lcn: &LcnSeries, window_ratio: f64) -> Option<f64> {
    let t_end = *lcn.times.last()?;
    let t_start = t_end / window_ratio;
    let (l0, l1) = (t_start.ln(), t_end.ln());
    let width = (l1 - l0) / ENVELOPE_BINS as f64;
    let mut best: Vec<Option<(f64, f64)>> = vec![None; ENVELOPE_BINS];
    for (&t, &c) in lcn.times.iter().zip(&lcn.chi) {
        if t < t_start || c == 0.0 {
            continue;
        }
        let b = (((t.ln() - l0) / width) as usize).min(ENVELOPE_BINS - 1);
        if best[b].is_none_or(|(_, m)| c.abs() > m) {
            best[b] = Some((t, c.abs()));
        }
    }
    let pts: Vec<(f64, f64)> = best
        .into_iter()
        .flatten()
        .map(|(t, c)| (t.ln(), c.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn classify_trajectory(lcn: &LcnSeries, opts: &ClassifyOptions) -> Classification {
    let final_chi = lcn.final_chi;
    let slope = envelope_slope(lcn, opts.window_ratio);
    let class = match slope {
        Some(s) if s < opts.ordered_slope && final_chi.abs() < opts.chaotic_floor => {
            TrajectoryClass::Ordered
        }
        Some(s) if s.abs() < opts.chaotic_slope && final_chi > opts.chaotic_floor => {
            TrajectoryClass::Chaotic
        }
        // Σa identically zero: nothing ever stretched.
        None if lcn.a_cum.iter().all(|a| *a == 0.0) && !lcn.a_cum.is_empty() => {
            TrajectoryClass::Ordered
        }
        _ => TrajectoryClass::Undecided,
    };
    Classification {
        class,
        slope: slope.unwrap_or(f64::NAN),
        final_chi,
        floor: opts.chaotic_floor,
    }
}

/// `lcn_series` followed by `classify_trajectory`.
pub fn lcn_with_class(stretching: &[f64], renorm_dt: f64, opts: &ClassifyOptions) -> LcnSeries {
    let mut lcn = lcn_series(stretching, renorm_dt);
    lcn.classification = Some(classify_trajectory(&lcn, opts));
    lcn
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stretching_gives_constant_chi() {
        let lcn = lcn_series(&[0.01; 100], 0.05);
        for c in &lcn.chi {
            assert!((c - 0.2).abs() < 1e-12);
        }
        let zero = lcn_series(&[0.0; 10], 0.05);
        assert!(zero.chi.iter().all(|c| *c == 0.0));
        assert_eq!(
            classify_trajectory(&zero, &ClassifyOptions::default()).class,
            TrajectoryClass::Ordered
        );
    }

    #[test]
    fn classification_of_synthetic_series() {
        let n = 20_000;
        let opts = ClassifyOptions::default();
        let chaotic = lcn_series(&vec![0.002; n], 0.05);
        let c = classify_trajectory(&chaotic, &opts);
        assert_eq!(c.class, TrajectoryClass::Chaotic);
        assert!(c.slope.abs() < 1e-9);
        // Bounded oscillating Σa: envelope decays as 1/t.
        let a: Vec<f64> = (0..n)
            .map(|i| 0.01 * ((i as f64 * 0.3).sin() - ((i as f64 - 1.0) * 0.3).sin()))
            .collect();
        let ordered = classify_trajectory(&lcn_series(&a, 0.05), &opts);
        assert_eq!(ordered.class, TrajectoryClass::Ordered);
        assert!((ordered.slope + 1.0).abs() < 0.05, "{}", ordered.slope);
    }

    #[test]
    fn runs_merge_short_gaps() {
        let times: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let on = [2, 3, 4, 6, 7, 15, 16];
        let r = runs(&times, |i| on.contains(&i), 0.2 + 1e-9);
        assert_eq!(r, vec![(2, 7), (15, 16)]);
    }

    #[test]
    fn empty_channels_give_no_events() {
        let ch = DistanceChannels::default();
        assert!(detect_events(&ch, None, &EventOptions::default()).is_empty());
        assert!(detect_vortices(&ch, &EventOptions::default()).is_empty());
    }

    #[test]
    fn straight_line_has_no_winding() {
        let n = 50;
        let ch = DistanceChannels {
            times: (0..n).map(|i| i as f64 * 0.01).collect(),
            d_n: vec![0.1; n],
            d_x: vec![0.5; n],
            d_y: vec![0.5; n],
            nearest_k: vec![Some(1); n],
            nearest_k_prime: vec![Some(0); n],
            x_gap: vec![false; n],
            node_speed: vec![1.0; n],
            uv: (0..n)
                .map(|i| Some([-0.25 + 0.01 * i as f64, 0.1]))
                .collect(),
        };
        assert!(detect_vortices(&ch, &EventOptions::default()).is_empty());
        let circle = DistanceChannels {
            uv: (0..n)
                .map(|i| {
                    let a = i as f64 * 0.3;
                    Some([0.1 * a.cos(), 0.1 * a.sin()])
                })
                .collect(),
            ..ch
        };
        let v = detect_vortices(&circle, &EventOptions::default());
        assert_eq!(v.len(), 1);
        assert!((v[0].winding - 49.0 * 0.3 / std::f64::consts::TAU).abs() < 1e-9);
    }
}
