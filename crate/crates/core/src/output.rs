//! Output tables. Every file starts with the provenance block of the run
//! configuration; numbers are written with 17 significant digits.

use std::path::Path;

use num_complex::Complex64;

use crate::chaos::{Event, LcnSeries, Vortex};
use crate::config::RunConfig;
use crate::critical::{
    classify_fixed_point, find_x_points, nodal_points_guarded, y_points, CriticalPointOptions,
    KWindow, PointKind,
};
use crate::ensemble::{ColorplotGrid, EnsembleTable, SweepRow};
use crate::error::Result;
use crate::model::WavefunctionModel;
use crate::trajectory::{TrajectoryRecord, TrajectoryStatus};

/// `{:.16e}`; NaN and infinities as `nan`, `inf`, `-inf`.
pub fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Provenance block, header row, data rows.
    pub fn render(&self, cfg: &RunConfig) -> String {
        let mut s = cfg.provenance_header();
        s.push_str(&self.header.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

fn status_label(s: &TrajectoryStatus) -> String {
    match s {
        TrajectoryStatus::Completed => "completed".into(),
        TrajectoryStatus::StalledAtNode { t } => format!("stalled@{}", fmt_f(*t)),
        TrajectoryStatus::Aborted { t, .. } => format!("aborted@{}", fmt_f(*t)),
    }
}

/// `t, x, y, a, a_cum, chi, degraded`; the stretching columns are filled on
/// rows that close a renormalization interval.
pub fn trajectory_table(record: &TrajectoryRecord, lcn: Option<&LcnSeries>) -> CsvTable {
    let mut t = CsvTable::new(&["t", "x", "y", "a", "a_cum", "chi", "degraded"]);
    let per = record.controls.samples_per_renorm().max(1);
    for (i, (&time, p)) in record.times.iter().zip(&record.positions).enumerate() {
        let s = (i % per == 0 && i > 0).then(|| i / per - 1);
        let pick = |v: Option<&Vec<f64>>| s.and_then(|s| v.and_then(|v| v.get(s).copied()));
        t.rows.push(vec![
            fmt_f(time),
            fmt_f(p[0]),
            fmt_f(p[1]),
            fmt_opt(pick(Some(&record.stretching))),
            fmt_opt(pick(lcn.map(|l| &l.a_cum))),
            fmt_opt(pick(lcn.map(|l| &l.chi))),
            u8::from(record.degraded[i]).to_string(),
        ]);
    }
    t
}

pub fn lcn_table(stretching: &[f64], lcn: &LcnSeries) -> CsvTable {
    let mut t = CsvTable::new(&["t", "a", "a_cum", "chi"]);
    for i in 0..lcn.times.len() {
        t.rows.push(vec![
            fmt_f(lcn.times[i]),
            fmt_f(stretching[i]),
            fmt_f(lcn.a_cum[i]),
            fmt_f(lcn.chi[i]),
        ]);
    }
    t
}

/// `k_sequence` is `;`-separated.
pub fn events_table(events: &[Event]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "t_start",
        "t_end",
        "k_sequence",
        "min_d_n",
        "min_d_x",
        "min_d_y",
        "a_cum_delta",
    ]);
    for e in events {
        let ks: Vec<String> = e.involved_k.iter().map(|k| k.to_string()).collect();
        t.rows.push(vec![
            fmt_f(e.t_start),
            fmt_f(e.t_end),
            ks.join(";"),
            fmt_f(e.min_d_n),
            fmt_f(e.min_d_x),
            fmt_f(e.min_d_y),
            fmt_f(e.a_cum_delta),
        ]);
    }
    t
}

pub fn vortices_table(vortices: &[Vortex]) -> CsvTable {
    let mut t = CsvTable::new(&["t_start", "t_end", "node_k", "winding", "mean_node_speed"]);
    for v in vortices {
        t.rows.push(vec![
            fmt_f(v.t_start),
            fmt_f(v.t_end),
            v.node_k.to_string(),
            fmt_f(v.winding),
            fmt_f(v.mean_node_speed),
        ]);
    }
    t
}

/// One located (or missing) critical point.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalRow {
    pub kind: PointKind,
    pub k: i64,
    pub t: f64,
    pub position: [f64; 2],
    /// Offset from the node: zero for N, the frame offset for X, NaN for Y.
    pub offset: [f64; 2],
    pub eigenvalues: Option<[Complex64; 2]>,
    /// `false` for a side on which no X-point converged.
    pub converged: bool,
}

/// N, X and Y points at time `t` over `window`.
pub fn critical_point_rows(
    model: &WavefunctionModel,
    t: f64,
    window: KWindow,
    opts: &CriticalPointOptions,
) -> Result<Vec<CriticalRow>> {
    let nan2 = [f64::NAN; 2];
    let mut rows = Vec::new();
    for node in nodal_points_guarded(model, t, window, opts.escape_guard)? {
        rows.push(CriticalRow {
            kind: PointKind::Nodal,
            k: node.k,
            t,
            position: node.position,
            offset: [0.0, 0.0],
            eigenvalues: None,
            converged: true,
        });
        let search = find_x_points(model, &node, &[], opts)?;
        for x in &search.points {
            rows.push(CriticalRow {
                kind: PointKind::X,
                k: node.k,
                t,
                position: x.position_inertial,
                offset: x.offset,
                eigenvalues: x.classification.map(|c| c.eigenvalues),
                converged: true,
            });
        }
        for _ in &search.failed {
            rows.push(CriticalRow {
                kind: PointKind::X,
                k: node.k,
                t,
                position: nan2,
                offset: nan2,
                eigenvalues: None,
                converged: false,
            });
        }
    }
    for y in y_points(model, t, window)? {
        let eig = model
            .velocity_jacobian(y.position[0], y.position[1], t)
            .ok()
            .and_then(|j| classify_fixed_point(&j).ok())
            .map(|c| c.eigenvalues);
        rows.push(CriticalRow {
            kind: PointKind::Y,
            k: y.k_prime,
            t,
            position: y.position,
            offset: nan2,
            eigenvalues: eig,
            converged: true,
        });
    }
    Ok(rows)
}

pub fn critical_points_table(rows: &[CriticalRow]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "kind",
        "k",
        "t",
        "x",
        "y",
        "u",
        "v",
        "eig_re1",
        "eig_im1",
        "eig_re2",
        "eig_im2",
        "converged",
    ]);
    for r in rows {
        let e = r
            .eigenvalues
            .unwrap_or([Complex64::new(f64::NAN, f64::NAN); 2]);
        t.rows.push(vec![
            r.kind.to_string(),
            r.k.to_string(),
            fmt_f(r.t),
            fmt_f(r.position[0]),
            fmt_f(r.position[1]),
            fmt_f(r.offset[0]),
            fmt_f(r.offset[1]),
            fmt_f(e[0].re),
            fmt_f(e[0].im),
            fmt_f(e[1].re),
            fmt_f(e[1].im),
            u8::from(r.converged).to_string(),
        ]);
    }
    t
}

fn checkpoint_label(c: f64) -> String {
    format!("chi_{c:?}")
}

pub fn ensemble_table(table: &EnsembleTable) -> CsvTable {
    let mut header: Vec<String> = ["index", "x0", "y0", "status", "t_reached", "class", "slope"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(table.checkpoints.iter().map(|&c| checkpoint_label(c)));
    let mut t = CsvTable {
        header,
        rows: Vec::new(),
    };
    for r in &table.rows {
        let mut row = vec![
            r.index.to_string(),
            fmt_f(r.start[0]),
            fmt_f(r.start[1]),
            status_label(&r.status),
            fmt_f(r.t_reached),
            r.class().map(|c| c.to_string()).unwrap_or_default(),
            fmt_opt(r.classification.map(|c| c.slope)),
        ];
        row.extend(r.checkpoint_chi.iter().map(|c| fmt_opt(*c)));
        t.rows.push(row);
    }
    t
}

pub fn sweep_table(rows: &[SweepRow], checkpoints: &[f64]) -> CsvTable {
    let mut header: Vec<String> = [
        "c2",
        "trajectories",
        "chaotic",
        "failed",
        "fraction_chaotic",
        "mean_chi",
        "std_dev",
        "standard_error",
        "delta_chi",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(
        checkpoints
            .iter()
            .map(|&c| format!("mean_{}", checkpoint_label(c))),
    );
    let mut t = CsvTable {
        header,
        rows: Vec::new(),
    };
    for r in rows {
        let mut row = vec![
            fmt_f(r.c2),
            r.trajectories.to_string(),
            r.chaotic.to_string(),
            r.failed.to_string(),
            fmt_f(r.fraction_chaotic),
            fmt_opt(r.mean_chi()),
            fmt_opt(r.std_dev()),
            fmt_opt(r.final_stats.map(|s| s.standard_error)),
            fmt_opt(r.delta_chi()),
        ];
        row.extend(r.checkpoint_means.iter().map(|m| fmt_opt(*m)));
        t.rows.push(row);
    }
    t
}

fn colorplot_header(cfg: &RunConfig, grid: &ColorplotGrid) -> String {
    let r = &grid.region;
    format!(
        "{}# region = {},{},{},{}\n# bin_size = {}\n# total_samples = {}\n# overflow = {}\n# shape = {},{}\n",
        cfg.provenance_header(),
        fmt_f(r.x[0]),
        fmt_f(r.x[1]),
        fmt_f(r.y[0]),
        fmt_f(r.y[1]),
        fmt_f(grid.bin_size),
        grid.total_samples,
        grid.overflow,
        grid.n_y,
        grid.n_x,
    )
}

/// Header lines then one matrix row per bin row (lowest `y` first).
pub fn colorplot_csv(cfg: &RunConfig, grid: &ColorplotGrid) -> String {
    let mut s = colorplot_header(cfg, grid);
    for row in grid.counts.chunks(grid.n_x) {
        let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

/// Same header as the CSV form, then the counts as little-endian `u64`, row-major.
pub fn colorplot_binary(cfg: &RunConfig, grid: &ColorplotGrid) -> Vec<u8> {
    let mut out = colorplot_header(cfg, grid).into_bytes();
    out.extend_from_slice(b"# data = u64le\n");
    for c in &grid.counts {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

/// Writes `contents`, creating parent directories.
pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::ensemble::Region;

    #[test]
    fn numbers_keep_seventeen_digits() {
        let x = 0.1 + 0.2;
        let s = fmt_f(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert_eq!(fmt_f(f64::NAN), "nan");
    }

    #[test]
    fn rendered_table_carries_config() {
        let mut cfg = RunConfig::default();
        cfg.model.c2 = 0.3;
        let mut t = CsvTable::new(&["a"]);
        t.rows.push(vec!["1".into()]);
        let text = t.render(&cfg);
        assert_eq!(parse_config(&text).unwrap(), cfg);
        assert!(text.ends_with("a\n1\n"));
    }

    #[test]
    fn colorplot_files_share_header() {
        let cfg = RunConfig::default();
        let mut g = ColorplotGrid::new(Region::square(0.0, 1.0), 0.5).unwrap();
        g.add([0.1, 0.7]);
        let csv = colorplot_csv(&cfg, &g);
        assert!(csv.contains("# total_samples = 1\n"));
        assert!(csv.ends_with("0,0\n1,0\n"));
        let bin = colorplot_binary(&cfg, &g);
        let tail = &bin[bin.len() - 32..];
        assert_eq!(u64::from_le_bytes(tail[16..24].try_into().unwrap()), 1);
    }
}
