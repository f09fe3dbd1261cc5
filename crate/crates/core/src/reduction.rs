//! Galerkin truncation to the slow modal subsystem
//! `ẋ_s = A_s x_s + B_us u + f_s`, `y_s = C_s x_s`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pde::{inner_product, PdeSystem, Quadrature, SpatioTemporalField};
use crate::series::TimeSeries;
use crate::simulator::{InputSignal, SourceModel};
use crate::spectral::{EigenPair, SampledBasis, SpectrumPartition};

#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub a_s: DMatrix<f64>,
    pub b_us: DMatrix<f64>,
    pub c_s: DMatrix<f64>,
    /// Output map of the retained fast modes, for truncation diagnostics.
    pub c_f: DMatrix<f64>,
    pub phi_s: Vec<EigenPair>,
    pub phi_f: Vec<EigenPair>,
    pub m: usize,
}

impl ReducedSystem {
    pub fn n_outputs(&self) -> usize {
        self.c_s.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b_us.ncols()
    }
}

/// Numerical rank with threshold `1e−8 · σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-8 * top).count()
}

/// `[C; CA; …; CA^{m−1}]`.
pub fn observability_matrix(a: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let m = a.nrows();
    let p = c.nrows();
    let mut out = DMatrix::zeros(p * m, m);
    let mut block = c.clone();
    for k in 0..m {
        out.rows_mut(k * p, p).copy_from(&block);
        block = &block * a;
    }
    out
}

fn output_map(sys: &PdeSystem, modes: &[EigenPair], quad: &Quadrature) -> Result<DMatrix<f64>> {
    let mut c = DMatrix::zeros(sys.n_outputs(), modes.len());
    for (i, s) in sys.sensors.iter().enumerate() {
        for (j, p) in modes.iter().enumerate() {
            c[(i, j)] = sys.k_y * inner_product(s, &p.phi, quad)?;
        }
    }
    Ok(c)
}

pub fn build_slow_subsystem(
    sys: &PdeSystem,
    partition: &SpectrumPartition,
    quad: &Quadrature,
) -> Result<ReducedSystem> {
    let m = partition.m;
    if partition.slow.len() != m {
        return Err(Error::dim(format!("partition holds {} slow modes for m = {m}", partition.slow.len())));
    }
    let a_s = DMatrix::from_diagonal(&DVector::from_vec(partition.slow_eigenvalues()));
    let mut b_us = DMatrix::zeros(m, sys.n_inputs());
    for (i, b) in sys.actuators.iter().enumerate() {
        for (j, p) in partition.slow.iter().enumerate() {
            b_us[(j, i)] = sys.k_u * inner_product(b, &p.phi, quad)?;
        }
    }
    let c_s = output_map(sys, &partition.slow, quad)?;
    let c_f = output_map(sys, &partition.fast_head, quad)?;

    if sys.n_outputs() < m {
        return Err(Error::Structure(format!(
            "C_s needs full column rank but only {} sensors observe {m} slow modes",
            sys.n_outputs()
        )));
    }
    let rank = numerical_rank(&c_s);
    if rank < m {
        return Err(Error::Structure(format!("C_s is rank deficient: rank {rank} < m = {m}")));
    }
    let obs = numerical_rank(&observability_matrix(&a_s, &c_s));
    if obs < m {
        return Err(Error::Structure(format!("(A_s, C_s) not observable: rank {obs} < m = {m}")));
    }
    Ok(ReducedSystem {
        a_s,
        b_us,
        c_s,
        c_f,
        phi_s: partition.slow.clone(),
        phi_f: partition.fast_head.clone(),
        m,
    })
}

/// `f_s(t)` and retained fast coefficients `f_f(t)` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalSourceSignal {
    pub t: Vec<f64>,
    pub f_s: TimeSeries,
    pub f_f_head: TimeSeries,
}

/// Projects each separable term's shape once, then scales by its time factor.
pub fn modal_source_coefficients(
    model: &SourceModel,
    partition: &SpectrumPartition,
    quad: &Quadrature,
    t_grid: &[f64],
) -> Result<ModalSourceSignal> {
    let terms = model.terms();
    let project = |modes: &[EigenPair]| -> Result<Vec<Vec<f64>>> {
        terms
            .iter()
            .map(|(shape, _)| modes.iter().map(|p| inner_product(*shape, &p.phi, quad)).collect())
            .collect()
    };
    let slow = project(&partition.slow)?;
    let fast = project(&partition.fast_head)?;
    let mut f_s = TimeSeries::with_capacity(partition.slow.len(), t_grid.len());
    let mut f_f = TimeSeries::with_capacity(partition.fast_head.len(), t_grid.len());
    let mut rs = vec![0.0; partition.slow.len()];
    let mut rf = vec![0.0; partition.fast_head.len()];
    for &t in t_grid {
        rs.iter_mut().for_each(|v| *v = 0.0);
        rf.iter_mut().for_each(|v| *v = 0.0);
        for (k, (_, time)) in terms.iter().enumerate() {
            let a = time.value(t);
            for (r, c) in rs.iter_mut().zip(&slow[k]) {
                *r += a * c;
            }
            for (r, c) in rf.iter_mut().zip(&fast[k]) {
                *r += a * c;
            }
        }
        f_s.push(t, &rs);
        f_f.push(t, &rf);
    }
    Ok(ModalSourceSignal { t: t_grid.to_vec(), f_s, f_f_head: f_f })
}

/// Same projections from a sampled field, row by row.
pub fn modal_source_coefficients_from_field(
    field: &SpatioTemporalField,
    partition: &SpectrumPartition,
    quad: &Quadrature,
) -> Result<ModalSourceSignal> {
    if quad.nodes() != field.z() {
        return Err(Error::Quadrature("field grid differs from the quadrature nodes".into()));
    }
    let slow = SampledBasis::new(&partition.slow, quad.clone());
    let fast = SampledBasis::new(&partition.fast_head, quad.clone());
    let mut f_s = TimeSeries::with_capacity(slow.len(), field.n_times());
    let mut f_f = TimeSeries::with_capacity(fast.len(), field.n_times());
    for (k, &t) in field.t().iter().enumerate() {
        f_s.push(t, slow.project(field.row(k))?.as_slice());
        f_f.push(t, fast.project(field.row(k))?.as_slice());
    }
    Ok(ModalSourceSignal { t: field.t().to_vec(), f_s, f_f_head: f_f })
}

/// `y_f = y − C_s 𝒫_s x`: the part of the measurement the slow model cannot explain.
pub fn truncation_residual(
    x: &SpatioTemporalField,
    y: &TimeSeries,
    red: &ReducedSystem,
    quad: &Quadrature,
) -> Result<TimeSeries> {
    if y.len() != x.n_times() || y.dim() != red.n_outputs() {
        return Err(Error::dim("output series does not match the state field"));
    }
    let basis = SampledBasis::new(&red.phi_s, quad.clone());
    let mut out = TimeSeries::with_capacity(y.dim(), y.len());
    for k in 0..y.len() {
        let xs = basis.project(x.row(k))?;
        let r = y.vector(k) - &red.c_s * xs;
        out.push(y.t()[k], r.as_slice());
    }
    Ok(out)
}

/// RK4 integration of the slow model alone; returns `(x_s, y_s)`.
pub fn simulate_reduced(
    red: &ReducedSystem,
    input: &dyn InputSignal,
    source: &dyn Fn(f64) -> DVector<f64>,
    x0: &DVector<f64>,
    t_grid: &[f64],
) -> Result<(TimeSeries, TimeSeries)> {
    if x0.len() != red.m || input.n_inputs() != red.n_inputs() {
        return Err(Error::dim("initial state or input does not match the reduced system"));
    }
    let rhs = |t: f64, x: &DVector<f64>| -> DVector<f64> {
        let u = DVector::from_vec(input.value(t));
        &red.a_s * x + &red.b_us * u + source(t)
    };
    let mut xs = TimeSeries::with_capacity(red.m, t_grid.len());
    let mut ys = TimeSeries::with_capacity(red.n_outputs(), t_grid.len());
    let mut x = x0.clone();
    for (k, &t) in t_grid.iter().enumerate() {
        xs.push(t, x.as_slice());
        ys.push(t, (&red.c_s * &x).as_slice());
        if k + 1 == t_grid.len() {
            break;
        }
        let h = t_grid[k + 1] - t;
        let k1 = rhs(t, &x);
        let k2 = rhs(t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
        let k3 = rhs(t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
        let k4 = rhs(t + h, &(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Simulation { step: k + 1, reason: "non-finite reduced state".into() });
        }
    }
    Ok((xs, ys))
}
