//! Study artifacts: `results.csv`, `summary.json`, `plot.gp`, path and field dumps.

use std::fs;
use std::path::{Path, PathBuf};

use chorin_core::experiments::{CouplingMode, FittedRate, Provenance, StudyContext, StudyReport, StudyRow};
use chorin_core::fem::Discretization;
use chorin_core::scheme::{TrajectoryRecord, Variant};
use chorin_core::stochastic::QWienerSpec;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PLOT_FILE: &str = "plot.gp";

pub const CSV_COLUMNS: [&str; 14] = [
    "variant",
    "N",
    "k",
    "h",
    "Np",
    "e_u_max",
    "e_u_av",
    "e_gradsum",
    "e_p_av",
    "se_u_max",
    "se_u_av",
    "se_gradsum",
    "se_p_av",
    "wall_time_s",
];

/// Everything needed to reproduce and re-plot a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: RunConfig,
    pub provenance: Provenance,
    pub rates: Vec<FittedRate>,
    pub rows: Vec<StudyRow>,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl Summary {
    pub fn new(config: &RunConfig, report: &StudyReport) -> Self {
        Self {
            config: config.clone(),
            provenance: report.provenance.clone(),
            rates: report.rates.clone(),
            rows: report.rows.clone(),
            failures: report.failures,
            first_failure: report.first_failure.clone(),
        }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::io(path.display(), e)
}

pub fn write_results_csv(path: &Path, rows: &[StudyRow]) -> Result<(), CliError> {
    let err = csv_error(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(CSV_COLUMNS).map_err(&err)?;
    for r in rows {
        w.write_record([
            r.variant.name().to_string(),
            r.n_cells.to_string(),
            format!("{:e}", r.k),
            format!("{:e}", r.h),
            r.realizations.to_string(),
            format!("{:e}", r.e_u_max),
            format!("{:e}", r.e_u_av),
            format!("{:e}", r.e_gradsum),
            format!("{:e}", r.e_p_av),
            format!("{:e}", r.se_u_max),
            format!("{:e}", r.se_u_av),
            format!("{:e}", r.se_gradsum),
            format!("{:e}", r.se_p_av),
            format!("{:.3}", r.wall_time_s),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::io(path.display(), e))
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| CliError::io(path.display(), e))?;
    fs::write(path, text).map_err(|e| CliError::io(path.display(), e))
}

pub fn read_summary(path: &Path) -> Result<Summary, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Gnuplot script with a velocity and a pressure panel, one curve per mesh
/// for fixed-mesh sweeps, plus a reference slope anchored at the coarsest row.
pub fn gnuplot_script(summary: &Summary) -> String {
    let variant = summary.config.study.variant;
    let rate = match variant {
        Variant::Standard => 0.25,
        Variant::Modified => 0.5,
    };
    let rate_label = match variant {
        Variant::Standard => "k^{1/4}",
        Variant::Modified => "k^{1/2}",
    };
    let velocity_col = match variant {
        Variant::Standard => (7, 11, "time-averaged velocity error"),
        Variant::Modified => (6, 10, "max-in-time velocity error"),
    };
    let mut meshes: Vec<usize> = summary.rows.iter().map(|r| r.n_cells).collect();
    meshes.sort_unstable();
    meshes.dedup();
    let groups: Vec<(String, String)> = if summary.config.study.coupling == CouplingMode::FixedH {
        meshes
            .iter()
            .map(|n| (format!("($2=={n} ? $3 : 1/0)"), format!("N={n}")))
            .collect()
    } else {
        vec![("($3)".to_string(), "balanced".to_string())]
    };
    let anchor = summary.rows.first();
    let slope_line = |col: fn(&StudyRow) -> f64| match anchor {
        Some(r) if col(r) > 0.0 => format!(
            ", {c:e}*(x/{k:e})**{rate} with lines dashtype 2 lc rgb 'black' title '{rate_label}'",
            c = col(r),
            k = r.k
        ),
        _ => String::new(),
    };
    let panel = |value: usize, err: usize, label: &str, slope: String| {
        let curves: Vec<String> = groups
            .iter()
            .map(|(x, title)| {
                format!("'{RESULTS_FILE}' skip 1 using {x}:{value}:{err} with yerrorlines title '{label} {title}'")
            })
            .collect();
        format!("plot {}{}\n", curves.join(", \\\n     "), slope)
    };
    let mut s = String::new();
    s.push_str(&format!(
        "# {} scheme, coupling {:?}, master seed {}\n",
        variant.name(),
        summary.config.study.coupling,
        summary.provenance.master_seed
    ));
    s.push_str("set terminal pngcairo size 1200,500\nset output 'convergence.png'\n");
    s.push_str("set datafile separator ','\nset logscale xy\nset format xy '%g'\nset key bottom right\n");
    s.push_str("set multiplot layout 1,2\n");
    s.push_str("set xlabel 'k'\nset ylabel 'velocity error'\n");
    let vel_slope = match variant {
        Variant::Standard => slope_line(|r| r.e_u_av),
        Variant::Modified => slope_line(|r| r.e_u_max),
    };
    s.push_str(&panel(velocity_col.0, velocity_col.1, velocity_col.2, vel_slope));
    s.push_str("set ylabel 'time-integrated pressure error'\n");
    s.push_str(&panel(9, 13, "time-averaged pressure error", slope_line(|r| r.e_p_av)));
    s.push_str("unset multiplot\n");
    s
}

pub fn write_plot(path: &Path, summary: &Summary) -> Result<(), CliError> {
    fs::write(path, gnuplot_script(summary)).map_err(|e| CliError::io(path.display(), e))
}

/// Writes `results.csv`, `summary.json` and `plot.gp` into `dir`.
pub fn write_study(dir: &Path, config: &RunConfig, report: &StudyReport) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(dir)?;
    let summary = Summary::new(config, report);
    let paths = [dir.join(RESULTS_FILE), dir.join(SUMMARY_FILE), dir.join(PLOT_FILE)];
    write_results_csv(&paths[0], &report.rows)?;
    write_summary(&paths[1], &summary)?;
    write_plot(&paths[2], &summary)?;
    Ok(paths.to_vec())
}

/// Fine increments of one realization: one row per fine step, one column per
/// mode, headed `dW(j,l)`.
pub fn write_path_dump(path: &Path, ctx: &StudyContext, realization: usize) -> Result<(), CliError> {
    let err = csv_error(path);
    let bp = ctx.sample_path(realization)?;
    let q = QWienerSpec::new(ctx.spec().truncation)?;
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    let mut header = vec!["step".to_string()];
    header.extend(q.modes().iter().map(|m| {
        let (j, l) = m.label();
        format!("dW({j},{l})")
    }));
    w.write_record(&header).map_err(&err)?;
    let table = bp.increments();
    for m in 0..table.steps() {
        let mut rec = vec![m.to_string()];
        rec.extend(table.row(m).iter().map(|v| format!("{v:e}")));
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::io(path.display(), e))
}

/// Per-checkpoint norms: `step,time,u_norm,p_integral_norm`.
pub fn write_trajectory_norms(path: &Path, record: &TrajectoryRecord) -> Result<(), CliError> {
    let err = csv_error(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(["step", "time", "u_norm", "p_integral_norm"]).map_err(&err)?;
    for c in &record.checkpoints {
        w.write_record([
            c.step.to_string(),
            format!("{:e}", c.time),
            format!("{:e}", c.u_norm),
            format!("{:e}", c.p_integral_norm),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::io(path.display(), e))
}

/// Field snapshots, one row per (checkpoint, vertex):
/// `step,time,vertex,x,y,u1,u2,p,P` where `P = k Σ p` is the time-integrated pressure.
pub fn write_field_dump(path: &Path, record: &TrajectoryRecord, disc: &Discretization) -> Result<(), CliError> {
    let err = csv_error(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(["step", "time", "vertex", "x", "y", "u1", "u2", "p", "P"])
        .map_err(&err)?;
    for c in &record.checkpoints {
        let (Some(u), Some(p), Some(pi)) = (&c.u_tilde, &c.pressure, &c.p_time_integral) else {
            return Err(CliError::config("field dump needs a record with stored fields"));
        };
        for (v, x) in disc.mesh.vertices().iter().enumerate() {
            let [u1, u2] = u.nodal(v);
            w.write_record([
                c.step.to_string(),
                format!("{:e}", c.time),
                v.to_string(),
                format!("{:e}", x[0]),
                format!("{:e}", x[1]),
                format!("{u1:e}"),
                format!("{u2:e}"),
                format!("{:e}", p.coeffs[v]),
                format!("{:e}", pi.coeffs[v]),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path.display(), e))
}
