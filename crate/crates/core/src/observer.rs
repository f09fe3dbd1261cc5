//! Adaptive slow-state observer with derivative-free (PI) source estimation,
//! and time/space synthesis of the estimated source.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io;
use crate::pde::{SpatialFunction, SpatioTemporalField};
use crate::reduction::ReducedSystem;
use crate::series::TimeSeries;
use crate::simulator::InputSignal;
use crate::spectral::EigenPair;

const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    /// Observer gain, `m × n_y`.
    pub l: DMatrix<f64>,
    /// Estimation output map, `m × n_y`.
    pub f: DMatrix<f64>,
    /// Learning rate, symmetric positive definite `m × m`.
    pub gamma: DMatrix<f64>,
    pub sigma: f64,
}

impl GainSet {
    pub fn new(l: DMatrix<f64>, f: DMatrix<f64>, gamma: DMatrix<f64>, sigma: f64) -> Result<Self> {
        let g = GainSet { l, f, gamma, sigma };
        g.validate()?;
        Ok(g)
    }

    pub fn m(&self) -> usize {
        self.l.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.l.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, p) = self.l.shape();
        if self.f.shape() != (m, p) {
            return Err(Error::dim(format!("F is {:?}, L is {:?}", self.f.shape(), (m, p))));
        }
        if self.gamma.shape() != (m, m) {
            return Err(Error::dim(format!("Γ is {:?}, expected {m}×{m}", self.gamma.shape())));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid(format!("σ = {} must be positive", self.sigma)));
        }
        let all = self.l.iter().chain(self.f.iter()).chain(self.gamma.iter());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite gain entry"));
        }
        let asym = (&self.gamma - self.gamma.transpose()).amax();
        if asym > 1e-12 * self.gamma.amax().max(1.0) {
            return Err(Error::invalid("Γ is not symmetric"));
        }
        if self.gamma.clone().cholesky().is_none() {
            return Err(Error::invalid("Γ is not positive definite"));
        }
        Ok(())
    }

    fn check_against(&self, red: &ReducedSystem) -> Result<()> {
        if self.m() != red.m || self.n_outputs() != red.n_outputs() {
            return Err(Error::dim(format!(
                "gains are {}×{} but the reduced system has m = {}, n_y = {}",
                self.m(),
                self.n_outputs(),
                red.m,
                red.n_outputs()
            )));
        }
        Ok(())
    }
}

/// `f̂_s = −ΓF(e_y + σ∫e_y)`.
pub fn source_estimate_pi(
    ey_now: &DVector<f64>,
    ey_integral: &DVector<f64>,
    gains: &GainSet,
) -> Result<DVector<f64>> {
    let p = gains.n_outputs();
    if ey_now.len() != p || ey_integral.len() != p {
        return Err(Error::dim(format!(
            "e_y has {} and its integral {} entries, gains expect {p}",
            ey_now.len(),
            ey_integral.len()
        )));
    }
    Ok(-(&gains.gamma * (&gains.f * (ey_now + ey_integral * gains.sigma))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub x_hat: DVector<f64>,
    pub ey_integral: DVector<f64>,
    pub t: f64,
}

impl ObserverState {
    /// `x̂ = x̂₀`, empty accumulator.
    pub fn initial(x_hat0: DVector<f64>, n_y: usize, t0: f64) -> Self {
        ObserverState { x_hat: x_hat0, ey_integral: DVector::zeros(n_y), t: t0 }
    }
}

fn derivative(
    x_hat: &DVector<f64>,
    integral: &DVector<f64>,
    y: &DVector<f64>,
    bu: &DVector<f64>,
    red: &ReducedSystem,
    gains: &GainSet,
) -> (DVector<f64>, DVector<f64>) {
    let ey = &red.c_s * x_hat - y;
    let f_hat = -(&gains.gamma * (&gains.f * (&ey + integral * gains.sigma)));
    let dx = &red.a_s * x_hat + bu + f_hat - &gains.l * &ey;
    (dx, ey)
}

/// One RK4 step of the observer over `[t, t+dt]`.
///
/// The state is augmented with the accumulator (`d/dt ∫e_y = e_y`) so both
/// advance with the same fourth-order stages; `y` is interpolated linearly
/// between `y_now` and `y_next`, `u` is held.
pub fn observer_step(
    state: &ObserverState,
    y_now: &DVector<f64>,
    y_next: &DVector<f64>,
    u: &DVector<f64>,
    red: &ReducedSystem,
    gains: &GainSet,
    dt: f64,
) -> Result<ObserverState> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("observer step dt = {dt} must be positive")));
    }
    let p = red.n_outputs();
    if y_now.len() != p || y_next.len() != p || u.len() != red.n_inputs() {
        return Err(Error::dim("measurement or input size does not match the reduced system"));
    }
    let bu = &red.b_us * u;
    let y_mid = (y_now + y_next) * 0.5;
    let x = &state.x_hat;
    let i = &state.ey_integral;
    let h = dt;

    let (k1x, k1i) = derivative(x, i, y_now, &bu, red, gains);
    let (k2x, k2i) = derivative(&(x + &k1x * (0.5 * h)), &(i + &k1i * (0.5 * h)), &y_mid, &bu, red, gains);
    let (k3x, k3i) = derivative(&(x + &k2x * (0.5 * h)), &(i + &k2i * (0.5 * h)), &y_mid, &bu, red, gains);
    let (k4x, k4i) = derivative(&(x + &k3x * h), &(i + &k3i * h), y_next, &bu, red, gains);

    Ok(ObserverState {
        x_hat: x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0),
        ey_integral: i + (k1i + k2i * 2.0 + k3i * 2.0 + k4i) * (h / 6.0),
        t: state.t + dt,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverTrajectory {
    pub t: Vec<f64>,
    pub x_hat: TimeSeries,
    pub y_hat: TimeSeries,
    pub e_y: TimeSeries,
    pub f_hat_s: TimeSeries,
}

impl ObserverTrajectory {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        io::write_series(
            path,
            &[("xhat", &self.x_hat), ("yhat", &self.y_hat), ("ey", &self.e_y), ("fhat", &self.f_hat_s)],
        )
    }
}

/// Runs the observer over the whole record of `y`.
pub fn run_identification(
    y: &TimeSeries,
    input: &dyn InputSignal,
    red: &ReducedSystem,
    gains: &GainSet,
    x_hat0: Option<DVector<f64>>,
) -> Result<ObserverTrajectory> {
    gains.validate()?;
    gains.check_against(red)?;
    if y.dim() != red.n_outputs() {
        return Err(Error::dim(format!("{} measured outputs for n_y = {}", y.dim(), red.n_outputs())));
    }
    if y.is_empty() {
        return Err(Error::invalid("empty measurement record"));
    }
    if input.n_inputs() != red.n_inputs() {
        return Err(Error::dim("input channel count does not match B_us"));
    }
    let x0 = x_hat0.unwrap_or_else(|| DVector::zeros(red.m));
    if x0.len() != red.m {
        return Err(Error::dim("initial estimate does not match m"));
    }
    let n = y.len();
    let p = red.n_outputs();
    let mut x_hat = TimeSeries::with_capacity(red.m, n);
    let mut y_hat = TimeSeries::with_capacity(p, n);
    let mut e_y = TimeSeries::with_capacity(p, n);
    let mut f_hat = TimeSeries::with_capacity(red.m, n);

    let mut state = ObserverState::initial(x0, p, y.t()[0]);
    for k in 0..n {
        let t = y.t()[k];
        let yk = y.vector(k);
        let yh = &red.c_s * &state.x_hat;
        let ey = &yh - &yk;
        let fh = source_estimate_pi(&ey, &state.ey_integral, gains)?;
        x_hat.push(t, state.x_hat.as_slice());
        y_hat.push(t, yh.as_slice());
        e_y.push(t, ey.as_slice());
        f_hat.push(t, fh.as_slice());
        if k + 1 == n {
            break;
        }
        let dt = y.t()[k + 1] - t;
        let u = DVector::from_vec(input.value(t));
        state = observer_step(&state, &yk, &y.vector(k + 1), &u, red, gains, dt)?;
        let norm = state.x_hat.norm();
        if !norm.is_finite() || norm > DIVERGENCE_LIMIT || state.ey_integral.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step: k + 1,
                reason: format!("‖x̂‖ = {norm:.3e} at t = {}", state.t),
            });
        }
    }
    Ok(ObserverTrajectory { t: y.t().to_vec(), x_hat, y_hat, e_y, f_hat_s: f_hat })
}

/// `f̂(z,t) = φ_sᵀ(z) f̂_s(t)` on `z_grid`.
pub fn synthesize_source(
    f_hat_s: &TimeSeries,
    phi_s: &[EigenPair],
    z_grid: &[f64],
) -> Result<SpatioTemporalField> {
    if f_hat_s.dim() != phi_s.len() {
        return Err(Error::dim(format!("{} coefficients for {} modes", f_hat_s.dim(), phi_s.len())));
    }
    let table: Vec<Vec<f64>> =
        phi_s.iter().map(|p| z_grid.iter().map(|&z| p.phi.eval(z)).collect()).collect();
    SpatioTemporalField::from_fn(z_grid.to_vec(), f_hat_s.t().to_vec(), |k, _| {
        let mut row = vec![0.0; z_grid.len()];
        for (c, phi) in f_hat_s.row(k).iter().zip(&table) {
            for (r, v) in row.iter_mut().zip(phi) {
                *r += c * v;
            }
        }
        row
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{Domain, PdeSystem, Quadrature};
    use crate::reduction::{build_slow_subsystem, simulate_reduced};
    use crate::simulator::ConstantInput;
    use crate::spectral::{dirichlet_eigenpairs, spectral_gap};
    use std::f64::consts::PI;

    fn identity_gains() -> GainSet {
        GainSet::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 2), DMatrix::identity(2, 2), 1.0).unwrap()
    }

    fn reference_gains() -> GainSet {
        GainSet::new(
            DMatrix::from_row_slice(2, 2, &[-0.6231, -0.6231, -2.6069, 2.6069]),
            DMatrix::from_row_slice(2, 2, &[0.1572, 0.1572, 0.0382, -0.0382]),
            DMatrix::identity(2, 2) * 100.0,
            1.0,
        )
        .unwrap()
    }

    fn rod() -> ReducedSystem {
        let sys = PdeSystem::heat_rod(2.0, &[PI / 4.0, 3.0 * PI / 4.0]);
        let part = spectral_gap(&dirichlet_eigenpairs(2.0, 6).unwrap(), 2).unwrap();
        build_slow_subsystem(&sys, &part, &Quadrature::simpson(Domain::unit_rod(), 201).unwrap()).unwrap()
    }

    #[test]
    fn pi_form_examples() {
        let g = identity_gains();
        let z = DVector::zeros(2);
        assert_eq!(source_estimate_pi(&z, &z, &g).unwrap(), DVector::zeros(2));
        let e = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(source_estimate_pi(&e, &e, &g).unwrap(), DVector::from_vec(vec![-2.0, 0.0]));
        let small = DVector::from_element(2, 1e-3);
        let f = source_estimate_pi(&small, &DVector::zeros(2), &reference_gains()).unwrap();
        assert!(f[0] < 0.0);
        assert!((f[0] + 100.0 * 0.3144e-3).abs() < 1e-12);
        assert!(f[1].abs() < 1e-15);
    }

    #[test]
    fn pi_form_dimension_mismatch() {
        let e = DVector::zeros(3);
        assert!(source_estimate_pi(&e, &e, &identity_gains()).is_err());
    }

    #[test]
    fn invalid_gains() {
        let l = DMatrix::zeros(2, 2);
        let f = DMatrix::zeros(2, 2);
        assert!(GainSet::new(l.clone(), f.clone(), DMatrix::identity(2, 2), 0.0).is_err());
        assert!(GainSet::new(l.clone(), f.clone(), -DMatrix::identity(2, 2), 1.0).is_err());
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(GainSet::new(l, f, skew, 1.0).is_err());
    }

    #[test]
    fn step_without_correction_is_plain_integration() {
        let red = rod();
        let g = GainSet::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 2), DMatrix::identity(2, 2), 1.0).unwrap();
        let mut st = ObserverState::initial(DVector::from_vec(vec![1.0, 1.0]), 2, 0.0);
        let u = DVector::from_vec(vec![0.0]);
        for _ in 0..100 {
            let y = &red.c_s * &st.x_hat;
            st = observer_step(&st, &y, &y, &u, &red, &g, 0.01).unwrap();
        }
        assert!((st.x_hat[0] - (-3.0f64).exp()).abs() < 1e-8);
        assert!((st.x_hat[1] - (-6.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn exact_model_output_recovers_constant_source() {
        let red = rod();
        let t: Vec<f64> = (0..=8000).map(|k| 80.0 * k as f64 / 8000.0).collect();
        let fs = DVector::from_vec(vec![2.0, 3.0]);
        let u = ConstantInput(vec![1.0]);
        let (_, ys) = simulate_reduced(&red, &u, &|_| fs.clone(), &DVector::zeros(2), &t).unwrap();
        let traj = run_identification(&ys, &u, &red, &reference_gains(), None).unwrap();
        let last = traj.f_hat_s.vector(t.len() - 1);
        assert!((last - fs).norm() < 1e-3);
    }

    #[test]
    fn divergence_is_reported() {
        let red = rod();
        let g = GainSet::new(
            DMatrix::from_element(2, 2, -50.0),
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            1.0,
        )
        .unwrap();
        let t: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
        let y = TimeSeries::new(t.clone(), 2, vec![1.0; 2 * t.len()]).unwrap();
        let err = run_identification(&y, &ConstantInput(vec![0.0]), &red, &g, None).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn synthesis_reproduces_basis() {
        let phi = dirichlet_eigenpairs(2.0, 2).unwrap();
        let z = Domain::unit_rod().grid(11);
        let f = TimeSeries::new(vec![0.0, 1.0], 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let field = synthesize_source(&f, &phi, &z).unwrap();
        for k in 0..2 {
            for (v, &zz) in field.row(k).iter().zip(&z) {
                assert!((v - phi[0].phi.eval(zz)).abs() < 1e-15);
            }
        }
        let zero = TimeSeries::new(vec![0.0], 2, vec![0.0, 0.0]).unwrap();
        assert!(synthesize_source(&zero, &phi, &z).unwrap().values().iter().all(|&v| v == 0.0));
    }
}
