use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::config::{GainChoice, ScenarioConfig, SourceConfig};
use super::metrics::{error_norms, ideal_rmse, rmse, settle_time};
use crate::error::{Error, Result};
use crate::io;
use crate::lmi::{
    check_solution, reference_design, solve_design, ultimate_bound, BoundParams, CertificateReport,
    DesignProblem, DesignSolution, Epsilon1Mode, SolverOptions, Tolerances, UltimateBound,
};
use crate::observer::{run_identification, synthesize_source, GainSet, ObserverTrajectory};
use crate::pde::{Domain, PdeSystem, Quadrature, ShapeFunction, SpatioTemporalField};
use crate::reduction::{
    build_slow_subsystem, modal_source_coefficients, truncation_residual, ModalSourceSignal,
    ReducedSystem,
};
use crate::series::TimeSeries;
use crate::simulator::{
    place_sensors_uniform, simulate_forward, ConstantInput, SensorArray, SimulationConfig,
    SimulationResult, SourceModel, TimeProfile,
};
use crate::spectral::{canonical_eigenpairs, is_canonical_rod, numeric_eigenpairs, spectral_gap_with, EigenPair};

/// Output tracking tolerance used for settle diagnostics.
pub const SETTLE_TOL: f64 = 0.02;
/// Transient allowance after the last onset before the modal error is judged.
pub const TRANSIENT: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub enum GainSource {
    Solve,
    Pinned(Box<DesignSolution>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignParams {
    pub mu1: f64,
    pub mu2: f64,
    pub epsilon1: Epsilon1Mode,
    pub solver: SolverOptions,
}

impl Default for DesignParams {
    fn default() -> Self {
        DesignParams { mu1: 1.0, mu2: 1.0, epsilon1: Epsilon1Mode::Variable, solver: SolverOptions::default() }
    }
}

/// One identification experiment, fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub system: PdeSystem,
    pub input: Vec<f64>,
    pub source: SourceModel,
    pub m: usize,
    pub k: usize,
    pub sim: SimulationConfig,
    pub gains: GainSource,
    pub design: DesignParams,
    pub gamma: DMatrix<f64>,
    pub sigma: f64,
    pub field_stride: usize,
    pub out_dir: Option<PathBuf>,
}

/// Command-line overrides applied on top of a scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub dt: Option<f64>,
    pub nodes: Option<usize>,
    pub pin_gains: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl RunOptions {
    pub fn apply(&self, sc: &mut Scenario) -> Result<()> {
        if let Some(dt) = self.dt {
            sc.sim.dt = dt;
        }
        if let Some(n) = self.nodes {
            sc.sim.n_nodes = n;
        }
        if let Some(seed) = self.seed {
            sc.design.solver.seed = seed;
        }
        if let Some(p) = &self.pin_gains {
            sc.gains = GainSource::Pinned(Box::new(DesignSolution::load(p)?));
        }
        if let Some(o) = &self.out {
            sc.out_dir = Some(o.clone());
        }
        Ok(())
    }
}

/// Eigenpairs in closed form for the canonical rod, numerically otherwise.
pub fn eigenpairs_for(sys: &PdeSystem, count: usize) -> Result<Vec<EigenPair>> {
    if is_canonical_rod(sys) {
        canonical_eigenpairs(sys, count)
    } else {
        let n = (8 * count + 1).max(401);
        numeric_eigenpairs(sys, count, n | 1)
    }
}

impl Scenario {
    /// The rod with `β = 2`, unit input, initial profile `√(2/π) sin z`.
    pub fn heat_rod(name: &str, sensors: &[f64], source: SourceModel, m: usize) -> Self {
        Scenario {
            name: name.to_string(),
            system: PdeSystem::heat_rod(2.0, sensors).with_initial(super::config::first_mode_shape()),
            input: vec![1.0],
            source,
            m,
            k: 2 * m,
            sim: SimulationConfig::default(),
            gains: GainSource::Solve,
            design: DesignParams::default(),
            gamma: DMatrix::identity(m, m) * 100.0,
            sigma: 1.0,
            field_stride: 10,
            out_dir: None,
        }
    }

    /// Modal step source, thermocouples at π/4 and 3π/4, the published gains.
    pub fn abrupt() -> Result<Self> {
        let basis = crate::spectral::dirichlet_eigenpairs(2.0, 2)?;
        let mut sc = Self::heat_rod("abrupt", &Self::thermocouples(), SourceModel::abrupt(&basis)?, 2);
        sc.gains = GainSource::Pinned(Box::new(reference_design()));
        Ok(sc)
    }

    /// Modal incipient source under the same setup as [`Scenario::abrupt`].
    pub fn incipient() -> Result<Self> {
        let basis = crate::spectral::dirichlet_eigenpairs(2.0, 2)?;
        let mut sc = Self::heat_rod("incipient", &Self::thermocouples(), SourceModel::incipient(&basis)?, 2);
        sc.gains = GainSource::Pinned(Box::new(reference_design()));
        Ok(sc)
    }

    /// Window source, `n_y` interior-uniform sensors, solved gains.
    pub fn window_row(m: usize, n_y: usize) -> Result<Self> {
        let sensors = place_sensors_uniform(n_y, Domain::unit_rod())?;
        Ok(Self::heat_rod(
            &format!("m{m}_ny{n_y}"),
            sensors.positions(),
            SourceModel::heaviside_window(),
            m,
        ))
    }

    fn thermocouples() -> [f64; 2] {
        [std::f64::consts::FRAC_PI_4, 3.0 * std::f64::consts::FRAC_PI_4]
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let s = &cfg.system;
        let sensors = match (&cfg.sensors.positions, cfg.sensors.uniform) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("[sensors] takes either positions or uniform, not both".into()))
            }
            (Some(p), None) => p.clone(),
            (None, Some(n)) => {
                let dom = s.domain.unwrap_or_else(Domain::unit_rod);
                place_sensors_uniform(n, dom)?.positions().to_vec()
            }
            (None, None) => return Err(Error::Config("[sensors] needs positions or uniform".into())),
        };
        let mut sys = PdeSystem::heat_rod(s.beta, &sensors);
        sys.a1 = s.a1.unwrap_or(sys.a1);
        sys.a2 = s.a2.unwrap_or(sys.a2);
        sys.a3 = s.a3.unwrap_or(sys.a3);
        sys.k_u = s.k_u.unwrap_or(sys.k_u);
        sys.k_y = s.k_y.unwrap_or(sys.k_y);
        if let Some(d) = s.domain {
            sys.domain = d;
        }
        if let Some(bc) = s.bc {
            sys.bc = bc;
        }
        if let Some(a) = &s.actuators {
            sys.actuators = a.clone();
        }
        sys.x0 = s.initial.clone().unwrap_or_else(ShapeFunction::zero);
        SensorArray::new(sensors, sys.domain)?;
        let sys = sys.validate()?;

        let m = cfg.observer.m;
        let k = cfg.observer.k.unwrap_or(2 * m);
        let source = match &cfg.source {
            SourceConfig::Zero => SourceModel::Zero,
            SourceConfig::Abrupt => SourceModel::abrupt(&eigenpairs_for(&sys, 2)?)?,
            SourceConfig::Incipient => SourceModel::incipient(&eigenpairs_for(&sys, 2)?)?,
            SourceConfig::HeavisideWindow => SourceModel::heaviside_window(),
            SourceConfig::Modal { terms } => {
                let top = terms.iter().map(|t| t.mode).max().unwrap_or(1);
                let basis = eigenpairs_for(&sys, top)?;
                let parts: Vec<(usize, TimeProfile)> = terms.iter().map(|t| (t.mode, t.time)).collect();
                SourceModel::modal(&basis, &parts)?
            }
            SourceConfig::Separable { shape, time } => {
                SourceModel::Separable { shape: shape.clone(), time: *time }
            }
        };
        let gains = match (&cfg.observer.pin_file, &cfg.observer.gains) {
            (Some(p), _) => GainSource::Pinned(Box::new(DesignSolution::load(&cfg.resolve(p))?)),
            (None, GainChoice::Reference) => GainSource::Pinned(Box::new(reference_design())),
            (None, GainChoice::Solve) => GainSource::Solve,
        };
        let d = &cfg.design;
        let sc = Scenario {
            name: cfg.name.clone().unwrap_or_else(|| "scenario".into()),
            system: sys,
            input: s.input.clone(),
            source,
            m,
            k,
            sim: SimulationConfig { horizon: cfg.run.horizon, dt: cfg.run.dt, n_nodes: cfg.run.nodes },
            gains,
            design: DesignParams {
                mu1: d.mu1,
                mu2: d.mu2,
                epsilon1: d.epsilon1.map_or(Epsilon1Mode::Variable, Epsilon1Mode::Fixed),
                solver: SolverOptions { seed: d.seed, starts: d.starts, ..SolverOptions::default() },
            },
            gamma: DMatrix::identity(m, m) * cfg.observer.gamma,
            sigma: cfg.observer.sigma,
            field_stride: cfg.run.field_stride,
            out_dir: cfg.run.out.as_ref().map(|p| cfg.resolve(p)),
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("m must be at least 1"));
        }
        if self.m > self.system.n_outputs() {
            return Err(Error::invalid(format!(
                "m = {} exceeds the {} available sensors",
                self.m,
                self.system.n_outputs()
            )));
        }
        for on in self.source.onsets() {
            if !(on < self.sim.horizon) {
                return Err(Error::invalid(format!("onset {on} s is not before the horizon {}", self.sim.horizon)));
            }
        }
        if self.input.len() != self.system.n_inputs() {
            return Err(Error::invalid(format!(
                "{} input values for {} actuators",
                self.input.len(),
                self.system.n_inputs()
            )));
        }
        Ok(())
    }

    /// Everything up to the slow model: eigenpairs, quadrature, reduced system.
    pub fn reduce(&self) -> Result<(SpectrumSetup, ReducedSystem)> {
        let eigs = eigenpairs_for(&self.system, self.m + self.k.max(1))?;
        let partition = spectral_gap_with(&eigs, self.m, self.k)?;
        let quad = Quadrature::simpson(self.system.domain, self.sim.n_nodes)?;
        let red = build_slow_subsystem(&self.system, &partition, &quad)?;
        Ok((SpectrumSetup { partition, quad }, red))
    }

    pub fn design_problem(&self, red: &ReducedSystem) -> Result<DesignProblem> {
        DesignProblem::new(red.a_s.clone(), red.c_s.clone(), self.design.mu1, self.design.mu2, self.sigma)?
            .with_epsilon1(self.design.epsilon1)
    }

    /// Solves or loads the design and checks it (strictly when solved,
    /// at printed precision when pinned).
    pub fn resolve_gains(&self, red: &ReducedSystem) -> Result<(DesignSolution, CertificateReport)> {
        let prob = self.design_problem(red)?;
        let (sol, tol) = match &self.gains {
            GainSource::Solve => (solve_design(&prob, &self.design.solver)?, Tolerances::strict()),
            GainSource::Pinned(s) => {
                if s.p.nrows() != red.m || s.x.ncols() != red.n_outputs() {
                    return Err(Error::Config(format!(
                        "pinned gains are {}×{} but the scenario has m = {}, n_y = {}",
                        s.x.nrows(),
                        s.x.ncols(),
                        red.m,
                        red.n_outputs()
                    )));
                }
                ((**s).clone(), Tolerances::printed())
            }
        };
        let report = check_solution(&prob, &sol, tol);
        Ok((sol, report))
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumSetup {
    pub partition: crate::spectral::SpectrumPartition,
    pub quad: Quadrature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SettleRecord {
    pub onset: f64,
    /// Time after the onset until `|e_y|∞ ≤ 0.02` for good.
    pub time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rmse: f64,
    pub ideal_rmse: Option<f64>,
    pub t: Vec<f64>,
    /// `‖e_f(·,t)‖₂` per time stamp.
    pub ef_norm: Vec<f64>,
    pub settle: Vec<SettleRecord>,
    /// `sup ‖f̂_s − f_s‖` from 20 s after the last onset to the horizon.
    pub modal_error_after_transient: Option<f64>,
    pub yf_peak: f64,
    pub dyf_peak: f64,
    pub bound: Option<UltimateBound>,
    pub lambda_max_xi: f64,
    pub eta: f64,
    pub certified: bool,
}

impl MetricsReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["key", "value"])?;
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), io::fmt);
        let mut rows: Vec<(String, String)> = vec![
            ("rmse".into(), io::fmt(self.rmse)),
            ("ideal_rmse".into(), opt(self.ideal_rmse)),
            ("modal_error_after_transient".into(), opt(self.modal_error_after_transient)),
            ("yf_peak".into(), io::fmt(self.yf_peak)),
            ("dyf_peak".into(), io::fmt(self.dyf_peak)),
            ("lambda_max_xi".into(), io::fmt(self.lambda_max_xi)),
            ("eta".into(), io::fmt(self.eta)),
            ("certified".into(), self.certified.to_string()),
            ("rho".into(), opt(self.bound.map(|b| b.rho))),
            ("rho_plus".into(), opt(self.bound.map(|b| b.rho_plus))),
        ];
        for s in &self.settle {
            rows.push((format!("settle_after_{}", io::fmt(s.onset)), opt(s.time)));
        }
        for (k, v) in rows {
            w.write_record([k, v])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub report: MetricsReport,
    pub simulation: SimulationResult,
    pub reduced: ReducedSystem,
    pub design: DesignSolution,
    pub certificate: CertificateReport,
    pub trajectory: ObserverTrajectory,
    pub f_s: ModalSourceSignal,
    pub error_field: SpatioTemporalField,
}

/// Simulate, reduce, design (or pin), observe, synthesize and score.
pub fn run_scenario(sc: &Scenario) -> Result<ScenarioOutcome> {
    sc.validate()?;
    let input = ConstantInput(sc.input.clone());
    let (setup, red) = sc.reduce()?;
    let sim = simulate_forward(&sc.system, &sc.source, &input, &sc.sim)?;
    let (design, certificate) = sc.resolve_gains(&red)?;
    let gains = GainSet::new(design.l.clone(), design.f.clone(), sc.gamma.clone(), sc.sigma)?;
    let traj = run_identification(&sim.y, &input, &red, &gains, None)?;

    let z = setup.quad.nodes();
    let f_hat = synthesize_source(&traj.f_hat_s, &red.phi_s, z)?;
    let error_field = f_hat.sub(&sim.f_true)?;
    let t = sim.x.t().to_vec();
    let f_s = modal_source_coefficients(&sc.source, &setup.partition, &setup.quad, &t)?;

    let rmse = rmse(&error_field, &setup.quad)?;
    let ideal = match sc.source {
        SourceModel::Separable { .. } => Some(ideal_rmse(&red.phi_s, &sc.source, &t, &setup.quad)?),
        _ => None,
    };
    let ef_norm = error_norms(&error_field, &setup.quad)?;

    let onsets = {
        let mut o = sc.source.onsets();
        o.sort_by(|a, b| a.total_cmp(b));
        o.dedup();
        o
    };
    let ey_inf: Vec<f64> =
        (0..traj.e_y.len()).map(|k| traj.e_y.row(k).iter().fold(0.0, |a: f64, v| a.max(v.abs()))).collect();
    let settle = onsets
        .iter()
        .enumerate()
        .map(|(i, &on)| {
            let until = onsets.get(i + 1).copied().unwrap_or(sc.sim.horizon);
            SettleRecord { onset: on, time: settle_time(&t, &ey_inf, on, until, SETTLE_TOL) }
        })
        .collect();
    let judge_from = onsets.last().copied().unwrap_or(0.0) + TRANSIENT;
    let modal_error_after_transient = if judge_from <= sc.sim.horizon {
        let mut sup: f64 = 0.0;
        for (k, &tk) in t.iter().enumerate() {
            if tk >= judge_from {
                sup = sup.max((traj.f_hat_s.vector(k) - f_s.f_s.vector(k)).norm());
            }
        }
        Some(sup)
    } else {
        None
    };

    let y_f = truncation_residual(&sim.x, &sim.y, &red, &setup.quad)?;
    let yf_peak = y_f.peak_norm();
    let dyf_peak = y_f.derivative().peak_norm();
    let bound = source_bounds(sc, &setup, &sim.f_true, yf_peak, dyf_peak)
        .and_then(|b| ultimate_bound(&sc.design_problem(&red)?, &design, &b))
        .ok();

    let report = MetricsReport {
        rmse,
        ideal_rmse: ideal,
        t,
        ef_norm,
        settle,
        modal_error_after_transient,
        yf_peak,
        dyf_peak,
        bound,
        lambda_max_xi: certificate.lambda_max_xi,
        eta: certificate.eq_residual,
        certified: certificate.passed(),
    };
    let outcome = ScenarioOutcome {
        report,
        simulation: sim,
        reduced: red,
        design,
        certificate,
        trajectory: traj,
        f_s,
        error_field,
    };
    if let Some(dir) = &sc.out_dir {
        write_artifacts(dir, &outcome, sc.field_stride)?;
    }
    Ok(outcome)
}

/// `f₁` from the steepest slope of each term (jumps excluded), `f₂` from the
/// sampled source field.
fn source_bounds(
    sc: &Scenario,
    setup: &SpectrumSetup,
    f_true: &SpatioTemporalField,
    yf_peak: f64,
    dyf_peak: f64,
) -> Result<BoundParams> {
    let mut slope = 0.0;
    for (shape, time) in sc.source.terms() {
        let mut c2 = 0.0;
        for p in &setup.partition.slow {
            c2 += crate::pde::inner_product(shape, &p.phi, &setup.quad)?.powi(2);
        }
        slope += time.max_rate() * c2.sqrt();
    }
    let mut f2: f64 = 0.0;
    for k in 0..f_true.n_times() {
        let r = f_true.row(k);
        f2 = f2.max(setup.quad.dot(r, r)?);
    }
    Ok(BoundParams { f1: slope * slope, f2, yf_peak, dyf_peak, gamma: sc.gamma.clone() })
}

pub fn write_artifacts(dir: &Path, o: &ScenarioOutcome, stride: usize) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    o.simulation.write_csv(dir, stride)?;
    let tr = &o.trajectory;
    io::write_series(&dir.join("yhat.csv"), &[("yhat", &tr.y_hat), ("ey", &tr.e_y)])?;
    let ef = TimeSeries::new(o.report.t.clone(), 1, o.report.ef_norm.clone())?;
    io::write_series(
        &dir.join("fs_vs_fshat.csv"),
        &[("fs", &o.f_s.f_s), ("fshat", &tr.f_hat_s), ("ef_norm", &ef)],
    )?;
    io::write_field(&dir.join("ef_field.csv"), &o.error_field, stride)?;
    tr.write_csv(&dir.join("trajectory.csv"))?;
    o.report.write_csv(&dir.join("report.csv"))?;
    o.design.save(&dir.join("gains.toml"))?;
    Ok(())
}
