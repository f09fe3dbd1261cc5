use std::path::Path;

use super::metrics::ideal_rmse;
use super::scenario::{run_scenario, MetricsReport, RunOptions, Scenario};
use crate::error::{Error, Result};
use crate::io;
use crate::pde::Quadrature;

/// `(m, n_y, RMSE, ideal RMSE)` rows of the published window-source table.
pub const REFERENCE_TABLE1: [(usize, usize, f64, f64); 6] = [
    (2, 2, 0.7709, 0.7497),
    (2, 3, 0.7517, 0.7497),
    (3, 3, 0.6377, 0.5901),
    (2, 4, 0.7518, 0.7497),
    (3, 4, 0.6454, 0.5901),
    (4, 4, 0.5102, 0.4286),
];

/// Published RMSE of the abrupt and incipient modal scenarios.
pub const REFERENCE_RMSE_ABRUPT: f64 = 0.2007;
pub const REFERENCE_RMSE_INCIPIENT: f64 = 0.1919;

#[derive(Debug, Clone, PartialEq)]
pub struct FigureRun {
    pub name: String,
    pub report: MetricsReport,
    pub reference_rmse: f64,
}

/// Runs the abrupt and incipient scenarios with pinned gains into
/// `out/abrupt` and `out/incipient`, plus `figures.csv`.
pub fn reproduce_figures(out: &Path, opts: &RunOptions) -> Result<Vec<FigureRun>> {
    let mut jobs = Vec::new();
    for (sc, reference) in [
        (Scenario::abrupt()?, REFERENCE_RMSE_ABRUPT),
        (Scenario::incipient()?, REFERENCE_RMSE_INCIPIENT),
    ] {
        let mut sc = sc;
        RunOptions { out: None, ..opts.clone() }.apply(&mut sc)?;
        sc.out_dir = Some(out.join(&sc.name));
        jobs.push((sc, reference));
    }
    let results: Vec<Result<FigureRun>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(sc, reference)| {
                s.spawn(move || {
                    run_scenario(sc).map(|o| FigureRun {
                        name: sc.name.clone(),
                        report: o.report,
                        reference_rmse: *reference,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("figures.csv"))?;
    w.write_record(["scenario", "rmse", "reference_rmse", "modal_error_after_transient", "rho"])?;
    for r in &runs {
        w.write_record([
            r.name.clone(),
            io::fmt(r.report.rmse),
            io::fmt(r.reference_rmse),
            r.report.modal_error_after_transient.map_or("NA".into(), io::fmt),
            r.report.bound.map_or("NA".into(), |b| io::fmt(b.rho)),
        ])?;
    }
    w.flush()?;
    Ok(runs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub m: usize,
    pub n_y: usize,
    pub gamma: f64,
    /// `None` when the row could not be completed.
    pub rmse: Option<f64>,
    pub ideal_rmse: f64,
    pub lambda_max_xi: Option<f64>,
    pub status: String,
}

/// The six `(m, n_y)` window-source rows with interior-uniform sensors,
/// solved gains and `Γ = 100 I`, run concurrently into `out/m{m}_ny{n_y}`;
/// writes `out/table1.csv`.
pub fn reproduce_table1(out: &Path, opts: &RunOptions) -> Result<Vec<Table1Row>> {
    let mut jobs = Vec::new();
    for &(m, n_y, _, _) in REFERENCE_TABLE1.iter() {
        let mut sc = Scenario::window_row(m, n_y)?;
        RunOptions { out: None, pin_gains: None, ..opts.clone() }.apply(&mut sc)?;
        sc.out_dir = Some(out.join(&sc.name));
        jobs.push(sc);
    }
    let rows: Vec<Result<Table1Row>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs.iter().map(|sc| s.spawn(move || table1_row(sc))).collect();
        handles.into_iter().map(|h| h.join().expect("table row thread panicked")).collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("table1.csv"))?;
    w.write_record(["m", "n_y", "gamma", "rmse", "ideal_rmse", "lambda_max_xi", "status"])?;
    for r in &rows {
        w.write_record([
            r.m.to_string(),
            r.n_y.to_string(),
            io::fmt(r.gamma),
            r.rmse.map_or("NA".into(), io::fmt),
            io::fmt(r.ideal_rmse),
            r.lambda_max_xi.map_or("NA".into(), io::fmt),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(rows)
}

fn table1_row(sc: &Scenario) -> Result<Table1Row> {
    let (_, red) = sc.reduce()?;
    let quad = Quadrature::simpson(sc.system.domain, sc.sim.n_nodes)?;
    let t = sc.sim.time_grid()?;
    let ideal = ideal_rmse(&red.phi_s, &sc.source, &t, &quad)?;
    let gamma = sc.gamma[(0, 0)];
    let base = Table1Row {
        m: sc.m,
        n_y: sc.system.n_outputs(),
        gamma,
        rmse: None,
        ideal_rmse: ideal,
        lambda_max_xi: None,
        status: String::new(),
    };
    match run_scenario(sc) {
        Ok(o) => Ok(Table1Row {
            rmse: Some(o.report.rmse),
            lambda_max_xi: Some(o.report.lambda_max_xi),
            status: "ok".into(),
            ..base
        }),
        Err(e) if e.is_numerical() => Ok(Table1Row { status: format!("skipped: {e}"), ..base }),
        Err(Error::Structure(msg)) => Ok(Table1Row { status: format!("skipped: {msg}"), ..base }),
        Err(e) => Err(e),
    }
}
