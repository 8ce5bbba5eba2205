use std::path::PathBuf;

use bohmflow::chaos::{detect_events, detect_vortices, distance_channels, lcn_with_class};
use bohmflow::config::{parse_override, parse_with_overrides, OutputFormat, RunConfig};
use bohmflow::ensemble::{
    colorplot_run, entanglement_sweep, lcn_distribution, run_ensemble, ColorplotGrid,
};
use bohmflow::output::{
    colorplot_binary, colorplot_csv, critical_point_rows, critical_points_table, ensemble_table,
    events_table, lcn_table, sweep_table, trajectory_table, vortices_table, write_file, CsvTable,
};
use bohmflow::periodicity::periodicity_check;
use bohmflow::trajectory::{default_xi0, integrate_with_deviation, TrajectoryRecord};
use bohmflow::{Error, Result};

use crate::{Cli, Command};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
/// Share of failed trajectories above which an ensemble counts as a numerical failure.
const FAILURE_SHARE: f64 = 0.1;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_)
        | Error::Parse { .. }
        | Error::Validation(_)
        | Error::NearEscape { .. }
        | Error::GridMismatch
        | Error::TooFewSamples { .. }
        | Error::Io(_) => EXIT_VALIDATION,
        _ => EXIT_NUMERICAL,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let text = match &cli.config {
        Some(p) => {
            std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?
        }
        None => String::new(),
    };
    let mut overrides = cli
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    if let Some(seed) = cli.seed {
        overrides.push(("ensemble.seed".into(), seed.to_string()));
    }
    parse_with_overrides(&text, &overrides)
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    PathBuf::from(&cfg.output.directory).join(name)
}

fn write_table(cfg: &RunConfig, name: &str, table: &CsvTable) -> Result<()> {
    let path = out_path(cfg, name);
    write_file(&path, table.render(cfg).as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_colorplot(cfg: &RunConfig, stem: &str, grid: &ColorplotGrid) -> Result<()> {
    let (name, bytes) = match cfg.output.format {
        OutputFormat::Csv => (format!("{stem}.csv"), colorplot_csv(cfg, grid).into_bytes()),
        OutputFormat::Binary => (format!("{stem}.bin"), colorplot_binary(cfg, grid)),
    };
    let path = out_path(cfg, &name);
    write_file(&path, &bytes)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn trajectory(cfg: &RunConfig) -> Result<TrajectoryRecord> {
    let model = cfg.build_model()?;
    let [x, y] = cfg.start;
    integrate_with_deviation(&model, x, y, default_xi0(), &cfg.integration)
}

fn status_code(rec: &TrajectoryRecord) -> u8 {
    if rec.status.is_completed() {
        EXIT_OK
    } else {
        eprintln!("trajectory did not complete: {:?}", rec.status);
        EXIT_NUMERICAL
    }
}

pub fn run(cli: &Cli) -> Result<u8> {
    let cfg = load_config(cli)?;
    let workers = bohmflow::ensemble::workers_from_env();
    match cli.command {
        Command::Simulate => {
            let rec = trajectory(&cfg)?;
            let lcn = lcn_with_class(
                &rec.stretching,
                cfg.integration.renorm_dt,
                &cfg.classify_options(),
            );
            write_table(&cfg, "trajectory.csv", &trajectory_table(&rec, Some(&lcn)))?;
            if let Some(c) = lcn.classification {
                println!(
                    "samples {}  final chi {:.6e}  class {}",
                    rec.len(),
                    c.final_chi,
                    c.class
                );
            }
            Ok(status_code(&rec))
        }
        Command::CriticalPoints => {
            let model = cfg.build_model()?;
            let rows = critical_point_rows(
                &model,
                cfg.analysis.t_critical,
                cfg.k_window(),
                &cfg.critical_options(),
            )?;
            write_table(&cfg, "critical_points.csv", &critical_points_table(&rows))?;
            let missing = rows.iter().filter(|r| !r.converged).count();
            println!(
                "{} critical points, {missing} unconverged X-point searches",
                rows.len()
            );
            Ok(EXIT_OK)
        }
        Command::Events => {
            let model = cfg.build_model()?;
            let rec = trajectory(&cfg)?;
            let lcn = lcn_with_class(
                &rec.stretching,
                cfg.integration.renorm_dt,
                &cfg.classify_options(),
            );
            let channels = distance_channels(&rec, &model, &cfg.critical_options());
            let events = detect_events(&channels, Some(&lcn), &cfg.event_options());
            let vortices = detect_vortices(&channels, &cfg.event_options());
            write_table(&cfg, "events.csv", &events_table(&events))?;
            write_table(&cfg, "vortices.csv", &vortices_table(&vortices))?;
            println!("{} events, {} vortices", events.len(), vortices.len());
            Ok(status_code(&rec))
        }
        Command::Lcn => {
            let rec = trajectory(&cfg)?;
            let lcn = lcn_with_class(
                &rec.stretching,
                cfg.integration.renorm_dt,
                &cfg.classify_options(),
            );
            write_table(&cfg, "lcn.csv", &lcn_table(&rec.stretching, &lcn))?;
            if let Some(c) = lcn.classification {
                println!(
                    "final chi {:.6e}  slope {:.4}  class {}",
                    c.final_chi, c.slope, c.class
                );
            }
            Ok(status_code(&rec))
        }
        Command::Ensemble => {
            let model = cfg.build_model()?;
            let checkpoints = cfg.checkpoints();
            let table = run_ensemble(
                &model,
                &cfg.grid(),
                &cfg.integration,
                &checkpoints,
                &cfg.ensemble_options(workers),
            )?;
            write_table(&cfg, "ensemble.csv", &ensemble_table(&table))?;
            let last = *checkpoints.last().expect("non-empty");
            match lcn_distribution(&table, last) {
                Ok(d) => println!(
                    "chaotic {}  mean chi {:.6e}  std {:.6e}  skew {:.3}  kurt {:.3}  A2 {:.3}",
                    d.summary.n,
                    d.mean(),
                    d.std_dev(),
                    d.skewness,
                    d.excess_kurtosis,
                    d.normality_statistic
                ),
                Err(e) => println!("no distribution: {e}"),
            }
            Ok(if table.failed_fraction() > FAILURE_SHARE {
                EXIT_NUMERICAL
            } else {
                EXIT_OK
            })
        }
        Command::Sweep => {
            let checkpoints = cfg.checkpoints();
            let rows = entanglement_sweep(
                &cfg.ensemble.c2_list,
                cfg.model.a0,
                cfg.frequencies()?,
                &cfg.grid(),
                &cfg.integration,
                &checkpoints,
                &cfg.ensemble_options(workers),
            )?;
            write_table(&cfg, "sweep.csv", &sweep_table(&rows, &checkpoints))?;
            for r in &rows {
                println!(
                    "c2 {}  chaotic {}/{}  delta chi {:?}",
                    r.c2,
                    r.chaotic,
                    r.trajectories,
                    r.delta_chi()
                );
            }
            let bad = rows
                .iter()
                .any(|r| r.failed as f64 > FAILURE_SHARE * r.trajectories as f64);
            Ok(if bad { EXIT_NUMERICAL } else { EXIT_OK })
        }
        Command::Colorplot => {
            let model = cfg.build_model()?;
            let spec = cfg.colorplot_spec()?;
            let snaps = &cfg.analysis.snapshots;
            let run = colorplot_run(&model, cfg.start, &cfg.integration, &spec, snaps)?;
            for (t, g) in snaps.iter().zip(&run.snapshots) {
                write_colorplot(&cfg, &format!("colorplot_t{t}"), g)?;
            }
            let g = run.final_grid();
            write_colorplot(&cfg, "colorplot", g)?;
            println!(
                "samples {}  inside {:.4}  occupied bins {:.4}",
                g.total_samples,
                g.inside_samples() as f64 / g.total_samples.max(1) as f64,
                g.occupied_fraction()
            );
            Ok(if run.summary.status.is_completed() {
                EXIT_OK
            } else {
                EXIT_NUMERICAL
            })
        }
        Command::PeriodicityCheck => {
            let model = cfg.build_model()?;
            let r = periodicity_check(
                &model,
                cfg.start,
                cfg.analysis.periods,
                &cfg.integration,
                &cfg.classify_options(),
            )?;
            println!("period T = {}", r.period);
            println!("max speed at T/2: {:e}", r.max_speed_half_period);
            println!("retrace error about T/2: {:e}", r.max_retrace_error);
            println!("a_cum(T): {:e}", r.a_cum_period);
            println!(
                "max |chi(nT)| over {} periods: {:e}",
                r.periods, r.max_abs_chi_at_periods
            );
            println!("envelope slope: {}", r.envelope_slope);
            println!(
                "class: {}",
                r.class.map(|c| c.to_string()).unwrap_or_default()
            );
            println!(
                "{}",
                if r.passes() {
                    "periodicity confirmed"
                } else {
                    "periodicity NOT confirmed"
                }
            );
            Ok(if r.passes() { EXIT_OK } else { EXIT_NUMERICAL })
        }
    }
}
