//! Forward simulation of the full parabolic system by Crank–Nicolson
//! finite differences.

mod sensors;
mod source;

pub use sensors::{place_sensors_uniform, sample_outputs, SensorArray};
pub use source::{eval_source, ModalComponent, SourceModel, TimeProfile};

use std::path::Path;

use crate::error::{Error, Result};
use crate::io;
use crate::pde::{interpolate, PdeSystem, Quadrature, SpatialFunction, SpatioTemporalField};
use crate::series::TimeSeries;

/// Known manipulated input `u(t)`.
pub trait InputSignal: Sync {
    fn n_inputs(&self) -> usize;
    fn value(&self, t: f64) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantInput(pub Vec<f64>);

impl InputSignal for ConstantInput {
    fn n_inputs(&self) -> usize {
        self.0.len()
    }

    fn value(&self, _t: f64) -> Vec<f64> {
        self.0.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub horizon: f64,
    pub dt: f64,
    pub n_nodes: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig { horizon: 80.0, dt: 0.01, n_nodes: 201 }
    }
}

impl SimulationConfig {
    /// Number of steps and the time grid `t_k = k·T/N`.
    pub fn time_grid(&self) -> Result<Vec<f64>> {
        if !(self.dt > 0.0) || !(self.horizon > 0.0) {
            return Err(Error::invalid("dt and horizon must be positive"));
        }
        let steps = (self.horizon / self.dt).round();
        if steps < 1.0 || (steps * self.dt - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(Error::invalid(format!(
                "horizon {} is not a whole number of steps of {}",
                self.horizon, self.dt
            )));
        }
        let n = steps as usize;
        Ok((0..=n).map(|k| self.horizon * k as f64 / n as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeInfo {
    pub name: &'static str,
    pub theta: f64,
    pub n_nodes: usize,
    pub n_steps: usize,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub x: SpatioTemporalField,
    pub y: TimeSeries,
    pub f_true: SpatioTemporalField,
    pub dt: f64,
    pub scheme: SchemeInfo,
}

impl SimulationResult {
    /// Writes `x.csv` (every `stride`-th time row) and `y.csv`.
    pub fn write_csv(&self, dir: &Path, stride: usize) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        io::write_field(&dir.join("x.csv"), &self.x, stride)?;
        io::write_series(&dir.join("y.csv"), &[("y", &self.y)])
    }
}

/// Constant tridiagonal operator `T` plus the affine boundary term, on all nodes.
struct Stencil {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    /// Boundary contribution to `dx/dt` at Robin ends.
    boundary: Vec<f64>,
    /// Imposed values at Dirichlet ends.
    left_fixed: Option<f64>,
    right_fixed: Option<f64>,
}

impl Stencil {
    fn new(sys: &PdeSystem, n: usize) -> Self {
        let h = sys.domain.length() / (n - 1) as f64;
        let lower = sys.a2 / (h * h) - sys.a1 / (2.0 * h);
        let upper = sys.a2 / (h * h) + sys.a1 / (2.0 * h);
        let centre = -2.0 * sys.a2 / (h * h) + sys.a3;
        let mut sub = vec![lower; n];
        let mut sup = vec![upper; n];
        let mut diag = vec![centre; n];
        let mut boundary = vec![0.0; n];
        let bc = sys.bc;
        sub[0] = 0.0;
        sup[n - 1] = 0.0;

        let left_fixed = if bc.d1 == 0.0 {
            Some(bc.r1 / bc.c1)
        } else {
            // ghost x₋₁ = x₁ + 2h(c1 x₀ − r1)/d1
            diag[0] += lower * 2.0 * h * bc.c1 / bc.d1;
            sup[0] += lower;
            boundary[0] -= lower * 2.0 * h * bc.r1 / bc.d1;
            None
        };
        let right_fixed = if bc.d2 == 0.0 {
            Some(bc.r2 / bc.c2)
        } else {
            // ghost x_{N+1} = x_{N−1} + 2h(r2 − c2 x_N)/d2
            sub[n - 1] += upper;
            diag[n - 1] -= upper * 2.0 * h * bc.c2 / bc.d2;
            boundary[n - 1] += upper * 2.0 * h * bc.r2 / bc.d2;
            None
        };
        Stencil { sub, diag, sup, boundary, left_fixed, right_fixed }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.sub[i] * x[i - 1];
            }
            if i + 1 < n {
                v += self.sup[i] * x[i + 1];
            }
            out[i] = v;
        }
    }
}

/// LU factors of the constant implicit matrix, reused every step.
struct ThomasFactor {
    sub: Vec<f64>,
    sup_mod: Vec<f64>,
    denom: Vec<f64>,
}

impl ThomasFactor {
    fn new(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut sup_mod = vec![0.0; n];
        let mut denom = vec![0.0; n];
        for i in 0..n {
            let d = if i == 0 { diag[0] } else { diag[i] - sub[i] * sup_mod[i - 1] };
            if !(d.abs() > 1e-300) || !d.is_finite() {
                return Err(Error::Simulation {
                    step: 0,
                    reason: format!("singular tridiagonal system at row {i}"),
                });
            }
            denom[i] = d;
            sup_mod[i] = sup[i] / d;
        }
        Ok(ThomasFactor { sub: sub.to_vec(), sup_mod, denom })
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        rhs[0] /= self.denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.sub[i] * rhs[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.sup_mod[i] * rhs[i + 1];
        }
    }
}

/// Advances `x(z,t)` by Crank–Nicolson for `a1∂_z + a2∂_zz + a3` with load
/// `k_u b_uᵀu + f`, imposing Dirichlet values exactly, and samples `y` through
/// the system's sensor shapes.
pub fn simulate_forward(
    sys: &PdeSystem,
    source: &SourceModel,
    input: &dyn InputSignal,
    cfg: &SimulationConfig,
) -> Result<SimulationResult> {
    let n = cfg.n_nodes;
    if n < 51 || n.is_multiple_of(2) {
        return Err(Error::invalid(format!("simulation grid needs an odd node count ≥ 51, got {n}")));
    }
    if input.n_inputs() != sys.n_inputs() {
        return Err(Error::dim(format!(
            "{} input channels for {} actuators",
            input.n_inputs(),
            sys.n_inputs()
        )));
    }
    let t_grid = cfg.time_grid()?;
    source.validate(cfg.horizon)?;
    let steps = t_grid.len() - 1;
    let dt = cfg.horizon / steps as f64;

    let quad = Quadrature::simpson(sys.domain, n)?;
    let z = quad.nodes().to_vec();
    let stencil = Stencil::new(sys, n);

    let mut x: Vec<f64> = z.iter().map(|&v| sys.x0.eval(v)).collect();
    for (fixed, idx) in [(stencil.left_fixed, 0), (stencil.right_fixed, n - 1)] {
        if let Some(v) = fixed {
            if (x[idx] - v).abs() > 1e-8 * v.abs().max(1.0) {
                return Err(Error::invalid(format!(
                    "initial profile {} at node {idx} violates the boundary value {v}",
                    x[idx]
                )));
            }
            x[idx] = v;
        }
    }

    // (I − dt/2·T) x⁺ = (I + dt/2·T) x + dt/2·(g + g⁺); Dirichlet rows are identities.
    let half = 0.5 * dt;
    let mut lhs_sub: Vec<f64> = stencil.sub.iter().map(|v| -half * v).collect();
    let mut lhs_diag: Vec<f64> = stencil.diag.iter().map(|v| 1.0 - half * v).collect();
    let mut lhs_sup: Vec<f64> = stencil.sup.iter().map(|v| -half * v).collect();
    if stencil.left_fixed.is_some() {
        lhs_diag[0] = 1.0;
        lhs_sup[0] = 0.0;
    }
    if stencil.right_fixed.is_some() {
        lhs_diag[n - 1] = 1.0;
        lhs_sub[n - 1] = 0.0;
    }
    let factor = ThomasFactor::new(&lhs_sub, &lhs_diag, &lhs_sup)?;

    let actuators: Vec<Vec<f64>> = sys.actuators.iter().map(|b| b.sample(&z)).collect();
    let sensor_weights: Vec<Option<Vec<f64>>> = sys
        .sensors
        .iter()
        .map(|c| {
            if c.point().is_some() {
                None
            } else {
                Some(quad.weights().iter().zip(&z).map(|(w, &v)| w * c.eval(v)).collect())
            }
        })
        .collect();

    let load = |t: f64| -> Result<Vec<f64>> {
        let mut g = eval_source(source, &z, t)?;
        let u = input.value(t);
        for (b, ui) in actuators.iter().zip(&u) {
            for (gi, bi) in g.iter_mut().zip(b) {
                *gi += sys.k_u * bi * ui;
            }
        }
        for (gi, bi) in g.iter_mut().zip(&stencil.boundary) {
            *gi += bi;
        }
        Ok(g)
    };
    let measure = |xs: &[f64], out: &mut [f64]| {
        for ((o, c), w) in out.iter_mut().zip(&sys.sensors).zip(&sensor_weights) {
            *o = sys.k_y
                * match (c.point(), w) {
                    (Some(p), _) => interpolate(&z, xs, p).unwrap_or(0.0),
                    (None, Some(w)) => w.iter().zip(xs).map(|(a, b)| a * b).sum(),
                    (None, None) => 0.0,
                };
        }
    };

    let mut xs = Vec::with_capacity(n * t_grid.len());
    let mut fs = Vec::with_capacity(n * t_grid.len());
    let mut y = TimeSeries::with_capacity(sys.n_outputs(), t_grid.len());
    let mut yrow = vec![0.0; sys.n_outputs()];
    let mut tx = vec![0.0; n];

    let mut g_now = load(t_grid[0])?;
    xs.extend_from_slice(&x);
    fs.extend(eval_source(source, &z, t_grid[0])?);
    measure(&x, &mut yrow);
    y.push(t_grid[0], &yrow);

    for step in 0..steps {
        let t_next = t_grid[step + 1];
        let g_next = load(t_next)?;
        stencil.apply(&x, &mut tx);
        let mut rhs: Vec<f64> =
            (0..n).map(|i| x[i] + half * tx[i] + half * (g_now[i] + g_next[i])).collect();
        if let Some(v) = stencil.left_fixed {
            rhs[0] = v;
        }
        if let Some(v) = stencil.right_fixed {
            rhs[n - 1] = v;
        }
        factor.solve(&mut rhs);
        x = rhs;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Simulation {
                step: step + 1,
                reason: format!("non-finite state at t = {t_next}"),
            });
        }
        xs.extend_from_slice(&x);
        fs.extend(eval_source(source, &z, t_next)?);
        measure(&x, &mut yrow);
        y.push(t_next, &yrow);
        g_now = g_next;
    }

    Ok(SimulationResult {
        x: SpatioTemporalField::new(z.clone(), t_grid.clone(), xs)?,
        y,
        f_true: SpatioTemporalField::new(z, t_grid, fs)?,
        dt,
        scheme: SchemeInfo { name: "crank-nicolson", theta: 0.5, n_nodes: n, n_steps: steps },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::ShapeFunction;
    use std::f64::consts::PI;

    fn phi(j: f64) -> impl Fn(f64) -> f64 {
        move |z: f64| (2.0 / PI).sqrt() * (j * z).sin()
    }

    fn rod() -> PdeSystem {
        PdeSystem::heat_rod(2.0, &[PI / 4.0, 3.0 * PI / 4.0])
    }

    #[test]
    fn steady_state_under_unit_input() {
        let cfg = SimulationConfig { horizon: 80.0, dt: 0.01, n_nodes: 201 };
        let r = simulate_forward(&rod(), &SourceModel::Zero, &ConstantInput(vec![1.0]), &cfg).unwrap();
        let last = r.x.row(r.x.n_times() - 1);
        let err = r.x.z().iter().zip(last).map(|(&z, v)| (v - 2.0 / 3.0 * phi(1.0)(z)).abs());
        assert!(err.fold(0.0, f64::max) < 1e-3);
    }

    #[test]
    fn free_decay_of_first_mode() {
        let sys = rod().with_initial(ShapeFunction::Sine { amplitude: (2.0 / PI).sqrt(), wavenumber: 1.0 });
        let cfg = SimulationConfig { horizon: 1.0, dt: 0.01, n_nodes: 201 };
        let r = simulate_forward(&sys, &SourceModel::Zero, &ConstantInput(vec![0.0]), &cfg).unwrap();
        let last = r.x.row(r.x.n_times() - 1);
        let decay = (-3.0f64).exp();
        let err = r.x.z().iter().zip(last).map(|(&z, v)| (v - decay * phi(1.0)(z)).abs());
        assert!(err.fold(0.0, f64::max) < 1e-3);
    }

    #[test]
    fn dirichlet_ends_stay_zero() {
        let basis = crate::spectral::dirichlet_eigenpairs(2.0, 2).unwrap();
        let cfg = SimulationConfig { horizon: 50.0, dt: 0.01, n_nodes: 101 };
        let src = SourceModel::abrupt(&basis).unwrap();
        let r = simulate_forward(&rod(), &src, &ConstantInput(vec![1.0]), &cfg).unwrap();
        for k in 0..r.x.n_times() {
            let row = r.x.row(k);
            assert_eq!(row[0], 0.0);
            assert_eq!(row[row.len() - 1], 0.0);
        }
    }

    #[test]
    fn neumann_insulated_rod_conserves_heat() {
        // x_t = x_zz with zero flux at both ends: ∫x dz stays constant.
        let mut sys = rod();
        sys.a3 = 0.0;
        sys.bc = crate::pde::BoundaryConditions { c1: 0.0, d1: 1.0, r1: 0.0, c2: 0.0, d2: 1.0, r2: 0.0 };
        sys = sys.with_initial(ShapeFunction::window(0.5, 1.5));
        let cfg = SimulationConfig { horizon: 20.0, dt: 0.01, n_nodes: 201 };
        let r = simulate_forward(&sys, &SourceModel::Zero, &ConstantInput(vec![0.0]), &cfg).unwrap();
        let q = Quadrature::simpson(sys.domain, 201).unwrap();
        let last = r.x.row(r.x.n_times() - 1);
        // trapezoid-consistent mass for the ghost-node scheme
        let h = PI / 200.0;
        let mass = |row: &[f64]| h * (row.iter().sum::<f64>() - 0.5 * (row[0] + row[row.len() - 1]));
        assert!((mass(r.x.row(0)) - mass(last)).abs() < 1e-10);
        // and the profile flattens to its mean
        let mean = q.integrate_samples(last).unwrap() / PI;
        assert!(last.iter().all(|v| (v - mean).abs() < 1e-3));
    }

    #[test]
    fn rejects_inconsistent_initial_profile() {
        let sys = rod().with_initial(ShapeFunction::Constant { value: 1.0 });
        let cfg = SimulationConfig { horizon: 1.0, dt: 0.01, n_nodes: 101 };
        assert!(simulate_forward(&sys, &SourceModel::Zero, &ConstantInput(vec![0.0]), &cfg).is_err());
    }

    #[test]
    fn rejects_coarse_or_even_grid() {
        let cfg = SimulationConfig { horizon: 1.0, dt: 0.01, n_nodes: 50 };
        assert!(simulate_forward(&rod(), &SourceModel::Zero, &ConstantInput(vec![0.0]), &cfg).is_err());
    }

    #[test]
    fn time_grid_is_exact_on_onsets() {
        let g = SimulationConfig::default().time_grid().unwrap();
        assert_eq!(g.len(), 8001);
        assert_eq!(g[1000], 10.0);
        assert_eq!(g[4000], 40.0);
        assert_eq!(g[8000], 80.0);
    }
}
